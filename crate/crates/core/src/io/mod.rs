//! Configuration files, CSV traces and SVG plots.

mod config;
mod plot;
mod trace;

pub use config::{parse_config, read_config, ConfigFile};
pub use plot::{emit_plot, PlotSeries, GAP_FLOOR};
pub use trace::{read_trace, rows_from_dist, rows_from_flow, write_trace, TraceRow, MAX_TRACE_ROWS, TRACE_HEADER};

use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::ExperimentReport;

/// Writes one CSV per run, `summary.txt` and `gap.svg` into `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut series = Vec::new();
    for run in &report.central {
        if let Some(trace) = &run.trace {
            let rows = rows_from_flow(trace, &report.x_star);
            write_trace(&rows, &dir.join(format!("{}.csv", file_stem(&run.label))))?;
            series.push(PlotSeries::from_rows(&run.label, &rows));
        }
    }
    for run in &report.distributed {
        let rows = rows_from_dist(&run.trace);
        write_trace(&rows, &dir.join(format!("{}.csv", file_stem(&run.label))))?;
        series.push(PlotSeries::from_rows(&run.label, &rows));
    }
    let summary = dir.join("summary.txt");
    std::fs::write(&summary, report.to_string()).map_err(|e| Error::io(&summary, e))?;
    if !series.is_empty() {
        emit_plot(&series, &dir.join("gap.svg"))?;
    }
    Ok(())
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{run_distributed, ExperimentConfig};

    #[test]
    fn logreg_report_files() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_distributed(&ExperimentConfig::logreg_default()).unwrap();
        write_report(&report, dir.path()).unwrap();
        let rows = read_trace(&dir.path().join("dhiso.csv")).unwrap();
        assert!(rows.len() <= MAX_TRACE_ROWS);
        assert!(rows.last().unwrap().max_opt_err <= 1e-3);
        assert!(dir.path().join("dgd2.csv").exists());
        let svg = std::fs::read_to_string(dir.path().join("gap.svg")).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.starts_with("experiment logreg (seed 7)"));
    }
}
