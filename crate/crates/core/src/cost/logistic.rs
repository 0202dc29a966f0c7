use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{AgentCost, CostEnsemble, HessianBounds};
use crate::error::{Error, Result};
use crate::linalg::sym_eigenvalues;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    /// `+1.0` or `-1.0`.
    pub label: f64,
}

/// Binary classification data split across agents.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegData {
    /// `samples[i]` holds agent `i`'s training pairs.
    pub samples: Vec<Vec<Sample>>,
    /// Feature dimension `p`; the decision vector is `(w, b)` of length `p + 1`.
    pub p: usize,
    /// Regularization weight `λ`, split evenly so each agent carries `λ / (2N) ‖w‖²`.
    pub lambda: f64,
}

/// Gaussian two-class data: label `+1` features ~ N(+separation·1, I),
/// label `-1` features ~ N(-separation·1, I). Labels alternate within each
/// agent, so every agent is balanced up to parity.
pub fn generate_logreg_data(
    seed: u64,
    n_agents: usize,
    p: usize,
    samples_per_agent: usize,
    separation: f64,
    lambda: f64,
) -> Result<LogRegData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_logreg_data_with(&mut rng, n_agents, p, samples_per_agent, separation, lambda)
}

/// [`generate_logreg_data`] drawing from a caller-owned generator, so later
/// draws (initial conditions) continue the same stream.
pub fn generate_logreg_data_with<R: Rng + ?Sized>(
    rng: &mut R,
    n_agents: usize,
    p: usize,
    samples_per_agent: usize,
    separation: f64,
    lambda: f64,
) -> Result<LogRegData> {
    if p == 0 || samples_per_agent == 0 || n_agents == 0 {
        return Err(Error::InvalidArgument(
            "need at least one agent, one feature and one sample per agent".into(),
        ));
    }
    let samples = (0..n_agents)
        .map(|_| {
            (0..samples_per_agent)
                .map(|j| {
                    let label = if j % 2 == 0 { 1.0 } else { -1.0 };
                    let features = (0..p)
                        .map(|_| {
                            let noise: f64 = StandardNormal.sample(rng);
                            label * separation + noise
                        })
                        .collect();
                    Sample { features, label }
                })
                .collect()
        })
        .collect();
    Ok(LogRegData { samples, p, lambda })
}

impl LogRegData {
    pub fn n_agents(&self) -> usize {
        self.samples.len()
    }

    pub fn total_samples(&self) -> usize {
        self.samples.iter().map(Vec::len).sum()
    }

    /// One [`LogisticCost`] per agent.
    pub fn ensemble(&self) -> Result<CostEnsemble> {
        let n = self.n_agents();
        let costs = (0..n)
            .map(|i| LogisticCost::new(self, i, n))
            .collect::<Result<Vec<_>>>()?;
        CostEnsemble::from_costs(costs)
    }

    /// Writes `agent,label,f1..fp` rows; agents are zero-based.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut header = vec!["agent".to_string(), "label".to_string()];
        header.extend((1..=self.p).map(|k| format!("f{k}")));
        w.write_record(&header).map_err(|e| Error::csv(path, e))?;
        for (i, agent) in self.samples.iter().enumerate() {
            for s in agent {
                let mut rec = vec![i.to_string(), format!("{}", s.label as i64)];
                rec.extend(s.features.iter().map(|v| format!("{v:e}")));
                w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, lambda: f64) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let headers = r.headers().map_err(|e| Error::csv(path, e))?.clone();
        if headers.len() < 3 || &headers[0] != "agent" || &headers[1] != "label" {
            return Err(Error::Config(format!(
                "{}: expected header agent,label,f1..fp",
                path.display()
            )));
        }
        let p = headers.len() - 2;
        let bad = |msg: String| Error::Config(format!("{}: {msg}", path.display()));
        let mut samples: Vec<Vec<Sample>> = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let agent: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| bad(format!("row {row}: bad agent")))?;
            let label: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|_| bad(format!("row {row}: bad label")))?;
            if label != 1.0 && label != -1.0 {
                return Err(bad(format!("row {row}: label must be -1 or +1")));
            }
            let features = (2..rec.len())
                .map(|k| rec[k].trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad(format!("row {row}: bad feature")))?;
            if samples.len() <= agent {
                samples.resize_with(agent + 1, Vec::new);
            }
            samples[agent].push(Sample { features, label });
        }
        if samples.iter().any(Vec::is_empty) {
            return Err(bad("every agent needs at least one sample".into()));
        }
        Ok(LogRegData { samples, p, lambda })
    }
}

/// `Σ_j ln(1 + exp(-(wᵀc_j + b) y_j)) + λ/(2N) ‖w‖²` over the decision
/// vector `(w, b)`. The bias is not regularized.
#[derive(Debug, Clone)]
pub struct LogisticCost {
    /// Augmented features `(c_j, 1)`.
    rows: Vec<DVector<f64>>,
    labels: Vec<f64>,
    /// `λ / N`.
    reg: f64,
    p: usize,
    upper: f64,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

impl LogisticCost {
    pub fn new(data: &LogRegData, agent: usize, n_agents: usize) -> Result<Self> {
        let own = data
            .samples
            .get(agent)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::InvalidArgument(format!("agent {agent} has no samples")))?;
        let p = data.p;
        let mut rows = Vec::with_capacity(own.len());
        let mut labels = Vec::with_capacity(own.len());
        for s in own {
            if s.features.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: s.features.len(),
                });
            }
            let mut c = DVector::zeros(p + 1);
            c.rows_mut(0, p).copy_from_slice(&s.features);
            c[p] = 1.0;
            rows.push(c);
            labels.push(s.label);
        }
        let reg = data.lambda / n_agents as f64;
        let mut gram = DMatrix::zeros(p + 1, p + 1);
        for c in &rows {
            gram += c * c.transpose();
        }
        let upper = 0.25 * sym_eigenvalues(&gram)[p] + reg;
        Ok(LogisticCost {
            rows,
            labels,
            reg,
            p,
            upper,
        })
    }

    /// Strong-convexity modulus on the `w` block alone, `λ / N`.
    pub fn weight_block_modulus(&self) -> f64 {
        self.reg
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }
}

impl AgentCost for LogisticCost {
    fn dim(&self) -> usize {
        self.p + 1
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let loss: f64 = self
            .rows
            .iter()
            .zip(&self.labels)
            .map(|(c, &y)| softplus(-y * c.dot(x)))
            .sum();
        let w = x.rows(0, self.p);
        loss + 0.5 * self.reg * w.norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.p + 1);
        for (c, &y) in self.rows.iter().zip(&self.labels) {
            // d/dθ ln(1 + e^{-y θᵀc}) = -y σ(-y θᵀc) c
            let s = sigmoid(-y * c.dot(x));
            g.axpy(-y * s, c, 1.0);
        }
        for k in 0..self.p {
            g[k] += self.reg * x[k];
        }
        g
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let d = self.p + 1;
        let mut h = DMatrix::zeros(d, d);
        for c in &self.rows {
            let s = sigmoid(c.dot(x));
            h.ger(s * (1.0 - s), c, c, 1.0);
        }
        for k in 0..self.p {
            h[(k, k)] += self.reg;
        }
        h
    }

    /// The lower bound is zero: the bias direction has no uniform curvature.
    fn hessian_bounds(&self) -> HessianBounds {
        HessianBounds {
            lower: 0.0,
            upper: self.upper,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::fd_check;

    fn small_data() -> LogRegData {
        generate_logreg_data(7, 5, 5, 10, 1.0, 2.0).unwrap()
    }

    #[test]
    fn generator_shape_and_labels() {
        let data = small_data();
        assert_eq!(data.total_samples(), 50);
        for agent in &data.samples {
            let pos = agent.iter().filter(|s| s.label == 1.0).count();
            assert_eq!(pos, 5);
            assert!(agent.iter().all(|s| s.label == 1.0 || s.label == -1.0));
            assert!(agent.iter().all(|s| s.features.len() == 5));
        }
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(small_data(), small_data());
        assert_ne!(small_data(), generate_logreg_data(8, 5, 5, 10, 1.0, 2.0).unwrap());
    }

    #[test]
    fn zero_separation_classes_share_distribution() {
        let data = generate_logreg_data(3, 4, 2, 2000, 0.0, 1.0).unwrap();
        let mut sums = [0.0, 0.0];
        let mut counts = [0.0, 0.0];
        for s in data.samples.iter().flatten() {
            let k = usize::from(s.label > 0.0);
            sums[k] += s.features.iter().sum::<f64>();
            counts[k] += s.features.len() as f64;
        }
        let means = [sums[0] / counts[0], sums[1] / counts[1]];
        assert!(means[0].abs() < 0.05 && means[1].abs() < 0.05, "{means:?}");
    }

    #[test]
    fn origin_value_and_gradient() {
        let data = small_data();
        let cost = LogisticCost::new(&data, 2, 5).unwrap();
        let zero = DVector::zeros(6);
        assert!((cost.value(&zero) - 10.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let g = cost.gradient(&zero);
        let mut expected = DVector::zeros(6);
        for s in &data.samples[2] {
            for k in 0..5 {
                expected[k] -= 0.5 * s.label * s.features[k];
            }
            expected[5] -= 0.5 * s.label;
        }
        assert!((g - expected).amax() < 1e-13);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let data = small_data();
        let cost = LogisticCost::new(&data, 0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x = DVector::from_fn(6, |_, _| rng.random_range(-2.0..2.0));
            let (g, h) = fd_check(&cost, &x, 1e-5);
            assert!(g <= 1e-5 && h <= 1e-5, "{g} {h}");
            let eig = sym_eigenvalues(&cost.hessian(&x));
            assert!(eig[0] >= -1e-10);
        }
    }

    #[test]
    fn extreme_margins_stay_finite() {
        let data = small_data();
        let cost = LogisticCost::new(&data, 0, 5).unwrap();
        let x = DVector::from_element(6, 800.0);
        assert!(cost.value(&x).is_finite());
        assert!(cost.gradient(&x).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn csv_round_trip() {
        let data = small_data();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        data.write_csv(&path).unwrap();
        let back = LogRegData::read_csv(&path, 2.0).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn csv_rejects_bad_label() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "agent,label,f1\n0,2,0.5\n").unwrap();
        assert!(LogRegData::read_csv(&path, 1.0).is_err());
    }
}
