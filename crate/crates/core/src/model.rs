//! Univariate Gaussian mixture: parameters, density, likelihood and
//! synthetic data.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

/// Tolerance on `sum(weights) == 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// An ordered set of real observations.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    observations: Vec<f64>,
    pub label: String,
}

impl Dataset {
    pub fn new(observations: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidData(
                "dataset must contain at least one observation".into(),
            ));
        }
        if let Some(bad) = observations.iter().position(|y| !y.is_finite()) {
            return Err(Error::InvalidData(format!(
                "observation {} is not finite",
                bad + 1
            )));
        }
        Ok(Self {
            observations,
            label: label.into(),
        })
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn min(&self) -> f64 {
        self.observations
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.observations
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn mean(&self) -> f64 {
        self.observations.iter().sum::<f64>() / self.n() as f64
    }

    /// Population variance (divisor n).
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.observations
            .iter()
            .map(|y| (y - m).powi(2))
            .sum::<f64>()
            / self.n() as f64
    }

    /// Quantile with linear interpolation between order statistics.
    pub fn quantile(&self, p: f64) -> f64 {
        let mut sorted = self.observations.clone();
        sorted.sort_by(f64::total_cmp);
        quantile_sorted(&sorted, p)
    }

    /// Parses the single-column CSV format (`y` header, one value per row).
    pub fn from_csv_str(text: &str, label: impl Into<String>) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        match lines.next() {
            Some("y") => {}
            Some(other) => {
                return Err(Error::Parse(format!(
                    "expected header `y`, found `{other}`"
                )));
            }
            None => return Err(Error::Parse("empty dataset file".into())),
        }
        let observations = lines
            .enumerate()
            .map(|(i, l)| {
                l.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: `{l}` is not a number", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(observations, label)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, path.display().to_string())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("y\n");
        for y in &self.observations {
            // `{}` prints the shortest representation that round-trips.
            let _ = writeln!(out, "{y}");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Parameters of a K-component univariate Gaussian mixture.
///
/// `globals` holds parameters shared by all components; it is empty for the
/// Gaussian family.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub globals: Vec<f64>,
}

impl MixtureParams {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let params = Self {
            weights,
            means,
            variances,
            globals: Vec::new(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.means.len();
        if k == 0 {
            return Err(Error::InvalidParams(
                "at least one component is required".into(),
            ));
        }
        if self.weights.len() != k || self.variances.len() != k {
            return Err(Error::InvalidParams(format!(
                "component counts disagree: {} weights, {} means, {} variances",
                self.weights.len(),
                k,
                self.variances.len()
            )));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParams(
                "weights must be strictly positive".into(),
            ));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParams(format!(
                "weights sum to {total}, not 1"
            )));
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParams("means must be finite".into()));
        }
        if self.variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParams(
                "variances must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

pub fn normal_log_pdf(y: f64, mean: f64, variance: f64) -> f64 {
    let d = y - mean;
    -0.5 * ((2.0 * PI * variance).ln() + d * d / variance)
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `log sum_k w_k N(y; mu_k, s2_k)`, accumulated with log-sum-exp.
pub fn mixture_log_pdf(y: f64, params: &MixtureParams) -> f64 {
    let mut terms = [0.0; 8];
    let mut heap;
    let buf: &mut [f64] = if params.k() <= terms.len() {
        &mut terms[..params.k()]
    } else {
        heap = vec![0.0; params.k()];
        &mut heap
    };
    for (slot, ((w, m), v)) in buf.iter_mut().zip(
        params
            .weights
            .iter()
            .zip(&params.means)
            .zip(&params.variances),
    ) {
        *slot = w.ln() + normal_log_pdf(y, *m, *v);
    }
    log_sum_exp(buf)
}

pub fn mixture_pdf(y: f64, params: &MixtureParams) -> f64 {
    mixture_log_pdf(y, params).exp()
}

pub fn log_likelihood(data: &Dataset, params: &MixtureParams) -> Result<f64> {
    let mut total = 0.0;
    for (i, &y) in data.observations().iter().enumerate() {
        let lp = mixture_log_pdf(y, params);
        if !lp.is_finite() {
            return Err(Error::DegenerateDensity { index: i });
        }
        total += lp;
    }
    Ok(total)
}

/// Draws `n` i.i.d. observations: a component index with probability
/// `weights[k]`, then a normal draw from that component.
pub fn simulate_data(params: &MixtureParams, n: usize, seed: u64) -> Result<Dataset> {
    params.validate()?;
    if n == 0 {
        return Err(Error::InvalidData("n must be at least 1".into()));
    }
    let mut rng = rng::seeded(seed);
    let observations = (0..n)
        .map(|_| {
            let k = sample_categorical(&mut rng, &params.weights);
            let z: f64 = StandardNormal.sample(&mut rng);
            params.means[k] + params.variances[k].sqrt() * z
        })
        .collect();
    Dataset::new(observations, format!("simulated(n={n}, seed={seed})"))
}

/// Index drawn with probability proportional to `probs` (need not be normalized).
pub(crate) fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let total: f64 = probs.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Rounding can leave u == total; fall back to the last positive entry.
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}
