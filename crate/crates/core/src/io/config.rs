//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! # comment
//! name = logreg
//! seed = 7
//! mode = distributed        # central | distributed
//! horizon = 60
//!
//! [graph]
//! name = fig1               # or: nodes = 5 / edges = 1-2, 1-3, ...
//!
//! [cost]
//! family = logistic         # quartic | logistic | quadratic
//! features = 5
//! samples = 10
//! lambda = 2
//! separation = 1
//!
//! [solver]
//! step = 1e-3               # or: grid
//! epsilon = 0
//!
//! [output]
//! dir = out/logreg
//! ```
//!
//! Keys left out keep the defaults of the mode's built-in experiment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiments::{CostSpec, ExperimentConfig, GraphSpec, Mode, StepPolicy};

/// Parsed sections; the unnamed top section is `""`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, (String, usize)>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut file = ConfigFile::default();
        let mut section = String::new();
        file.sections.entry(section.clone()).or_default();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {lineno}: unterminated section header")))?;
                section = name.trim().to_string();
                file.sections.entry(section.clone()).or_default();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {lineno}: expected key = value")))?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {lineno}: empty key")));
            }
            let entries = file.sections.get_mut(&section).expect("section inserted above");
            if entries
                .insert(key.clone(), (value.trim().to_string(), lineno))
                .is_some()
            {
                return Err(Error::Config(format!("line {lineno}: duplicate key '{key}'")));
            }
        }
        Ok(file)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|(v, _)| v.as_str())
    }

    fn parse_value<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        let Some((raw, line)) = self.sections.get(section).and_then(|s| s.get(key)) else {
            return Ok(None);
        };
        raw.parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("line {line}: cannot parse {section}.{key} = '{raw}'")))
    }

    fn check_known(&self) -> Result<()> {
        const KNOWN: &[(&str, &[&str])] = &[
            ("", &["name", "seed", "mode", "horizon"]),
            ("graph", &["name", "nodes", "edges"]),
            (
                "cost",
                &[
                    "family",
                    "agents",
                    "coef_min",
                    "coef_max",
                    "radius",
                    "features",
                    "samples",
                    "lambda",
                    "separation",
                    "data",
                    "centers",
                ],
            ),
            (
                "solver",
                &[
                    "step",
                    "grid_min",
                    "grid_max",
                    "grid_points",
                    "stop_gap",
                    "target_gap",
                    "epsilon",
                    "gd_alpha",
                    "x0",
                ],
            ),
            ("output", &["dir"]),
        ];
        for (section, entries) in &self.sections {
            let allowed = KNOWN
                .iter()
                .find(|(s, _)| s == section)
                .map(|(_, keys)| *keys)
                .ok_or_else(|| Error::Config(format!("unknown section [{section}]")))?;
            for (key, (_, line)) in entries {
                if !allowed.contains(&key.as_str()) {
                    let where_ = if section.is_empty() {
                        "top level".into()
                    } else {
                        format!("[{section}]")
                    };
                    return Err(Error::Config(format!("line {line}: unknown key '{key}' in {where_}")));
                }
            }
        }
        Ok(())
    }
}

fn parse_floats(raw: &str, sep: char) -> Result<Vec<f64>> {
    raw.split(sep)
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::Config(format!("bad number '{s}'"))))
        .collect()
}

/// `1-2, 1-3, 2-3` → one-based pairs.
fn parse_edges(raw: &str) -> Result<Vec<(usize, usize)>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (a, b) = pair
                .split_once('-')
                .ok_or_else(|| Error::Config(format!("edge '{pair}' should look like i-j")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad node label in edge '{pair}'")))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

/// Builds an [`ExperimentConfig`] from config text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let file = ConfigFile::parse(text)?;
    file.check_known()?;

    let mode = match file.get("", "mode") {
        None | Some("distributed") => Mode::Distributed,
        Some("central") => Mode::Central,
        Some(other) => return Err(Error::Config(format!("unknown mode '{other}'"))),
    };
    let mut cfg = match mode {
        Mode::Central => ExperimentConfig::quartic_default(),
        Mode::Distributed => ExperimentConfig::logreg_default(),
    };
    if let Some(name) = file.get("", "name") {
        cfg.name = name.to_string();
    }
    if let Some(seed) = file.parse_value("", "seed")? {
        cfg.seed = seed;
    }
    if let Some(h) = file.parse_value("", "horizon")? {
        cfg.horizon = h;
    }

    match (file.get("graph", "name"), file.get("graph", "edges")) {
        (Some(_), Some(_)) => return Err(Error::Config("[graph] takes either name or edges, not both".into())),
        (Some(name), None) => cfg.graph = GraphSpec::Named(name.to_string()),
        (None, Some(edges)) => {
            let edges = parse_edges(edges)?;
            let n_nodes = match file.parse_value("graph", "nodes")? {
                Some(n) => n,
                None => edges.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0),
            };
            cfg.graph = GraphSpec::Edges { n_nodes, edges };
        }
        (None, None) => {}
    }

    let family = file.get("cost", "family");
    cfg.cost = match family {
        None => cfg.cost,
        Some("quartic") => {
            let (mut agents, mut coef_min, mut coef_max, mut radius) = (10, 0.01, 0.1, 2.0);
            if let CostSpec::Quartic {
                agents: a,
                coef_min: lo,
                coef_max: hi,
                radius: r,
            } = cfg.cost
            {
                (agents, coef_min, coef_max, radius) = (a, lo, hi, r);
            }
            CostSpec::Quartic {
                agents: file.parse_value("cost", "agents")?.unwrap_or(agents),
                coef_min: file.parse_value("cost", "coef_min")?.unwrap_or(coef_min),
                coef_max: file.parse_value("cost", "coef_max")?.unwrap_or(coef_max),
                radius: file.parse_value("cost", "radius")?.unwrap_or(radius),
            }
        }
        Some("logistic") => CostSpec::Logistic {
            features: file.parse_value("cost", "features")?.unwrap_or(5),
            samples: file.parse_value("cost", "samples")?.unwrap_or(10),
            lambda: file.parse_value("cost", "lambda")?.unwrap_or(2.0),
            separation: file.parse_value("cost", "separation")?.unwrap_or(1.0),
            data: file.get("cost", "data").map(PathBuf::from),
        },
        Some("quadratic") => {
            let raw = file
                .get("cost", "centers")
                .ok_or_else(|| Error::Config("quadratic cost needs centers".into()))?;
            let centers = raw
                .split(';')
                .map(|c| parse_floats(c, ','))
                .collect::<Result<Vec<_>>>()?;
            if centers.is_empty() || centers.iter().any(Vec::is_empty) {
                return Err(Error::Config("empty quadratic center".into()));
            }
            CostSpec::Quadratic { centers }
        }
        Some(other) => return Err(Error::Config(format!("unknown cost family '{other}'"))),
    };

    match file.get("solver", "step") {
        None => {}
        Some("grid") => {
            let (mut min, mut max, mut points) = (1e-4, 1e1, 41);
            if let StepPolicy::Grid {
                min: a,
                max: b,
                points: n,
            } = cfg.step
            {
                (min, max, points) = (a, b, n);
            }
            cfg.step = StepPolicy::Grid {
                min: file.parse_value("solver", "grid_min")?.unwrap_or(min),
                max: file.parse_value("solver", "grid_max")?.unwrap_or(max),
                points: file.parse_value("solver", "grid_points")?.unwrap_or(points),
            };
        }
        Some(_) => {
            cfg.step = StepPolicy::Fixed(file.parse_value("solver", "step")?.expect("key present"));
        }
    }
    if let Some(v) = file.parse_value("solver", "stop_gap")? {
        cfg.stop_gap = v;
    }
    if let Some(v) = file.parse_value("solver", "target_gap")? {
        cfg.target_gap = v;
    }
    if let Some(v) = file.parse_value("solver", "epsilon")? {
        cfg.epsilon = v;
    }
    if let Some(v) = file.parse_value("solver", "gd_alpha")? {
        cfg.gd_alpha = v;
    }
    if let Some(raw) = file.get("solver", "x0") {
        cfg.x0 = Some(parse_floats(raw, ',')?);
    }
    if let Some(dir) = file.get("output", "dir") {
        cfg.out_dir = Some(PathBuf::from(dir));
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_logreg_default() {
        assert_eq!(parse_config("").unwrap(), ExperimentConfig::logreg_default());
    }

    #[test]
    fn central_mode_starts_from_quartic_default() {
        let cfg = parse_config("mode = central\nseed = 4\n[solver]\ngd_alpha = 3").unwrap();
        let mut expected = ExperimentConfig::quartic_default();
        expected.seed = 4;
        expected.gd_alpha = 3.0;
        assert_eq!(cfg, expected);
    }

    #[test]
    fn full_distributed_config() {
        let text = "\
name = tri  # inline comment
seed = 3
horizon = 12.5
[graph]
edges = 1-2, 2-3, 3-1
[cost]
family = quadratic
centers = 0, 1; 2, 3; 4, 5
[solver]
step = 0.002
epsilon = 0.01
[output]
dir = out/tri
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.name, "tri");
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.horizon, 12.5);
        assert_eq!(
            cfg.graph,
            GraphSpec::Edges {
                n_nodes: 3,
                edges: vec![(1, 2), (2, 3), (3, 1)]
            }
        );
        assert_eq!(
            cfg.cost,
            CostSpec::Quadratic {
                centers: vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]]
            }
        );
        assert_eq!(cfg.step, StepPolicy::Fixed(0.002));
        assert_eq!(cfg.epsilon, 0.01);
        assert_eq!(cfg.out_dir, Some(PathBuf::from("out/tri")));
    }

    #[test]
    fn grid_step_with_bounds() {
        let cfg = parse_config("mode = central\n[solver]\nstep = grid\ngrid_points = 9").unwrap();
        assert_eq!(
            cfg.step,
            StepPolicy::Grid {
                min: 1e-4,
                max: 10.0,
                points: 9
            }
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_config("seed = 1\nhorizon = soon\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(parse_config("bogus = 1").is_err());
        assert!(parse_config("[nowhere]\nx = 1").is_err());
        assert!(parse_config("[graph\nname = fig1").is_err());
        assert!(parse_config("seed = 1\nseed = 2").is_err());
        assert!(parse_config("just words").is_err());
    }

    #[test]
    fn disconnected_graph_is_config_error() {
        assert!(parse_config("[graph]\nnodes = 3\nedges = 1-2").is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_config(Path::new("/nonexistent/missing.cfg")),
            Err(Error::Io { .. })
        ));
    }
}
