//! The independent prior factor: Dirichlet weights, normal means,
//! inverse-gamma variances with a gamma hyperprior on the variance rate,
//! together with the conjugate full conditionals used as Gibbs proposals.
//!
//! Variance prior: `1/s2_k ~ Gamma(alpha, rate = beta)`, `beta ~ Gamma(g, rate = h)`.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{normal_log_pdf, sample_categorical, Dataset, MixtureParams};

/// Hyperparameters of the empirical-Bayes prior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperparams {
    /// Prior mean of every component mean.
    pub xi: f64,
    /// Prior precision of every component mean.
    pub kappa: f64,
    /// Shape of the gamma prior on each component precision.
    pub alpha: f64,
    /// Shape of the gamma hyperprior on `beta`.
    pub g: f64,
    /// Rate of the gamma hyperprior on `beta`.
    pub h: f64,
    /// Symmetric Dirichlet concentration for the weights.
    pub dirichlet_delta: f64,
}

pub const HYPER_KEYS: [&str; 6] = ["xi", "kappa", "alpha", "g", "h", "dirichlet_delta"];

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !self.xi.is_finite() {
            return Err(Error::InvalidConfig("xi must be finite".into()));
        }
        for (name, v) in [
            ("kappa", self.kappa),
            ("alpha", self.alpha),
            ("g", self.g),
            ("h", self.h),
            ("dirichlet_delta", self.dirichlet_delta),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Overrides fields from `key=value` entries; unknown keys are ignored so
    /// the same map can carry unrelated run settings.
    pub fn apply_overrides(&mut self, entries: &BTreeMap<String, String>) -> Result<()> {
        for key in HYPER_KEYS {
            let Some(raw) = entries.get(key) else {
                continue;
            };
            let v: f64 = raw
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{key}: `{raw}` is not a number")))?;
            match key {
                "xi" => self.xi = v,
                "kappa" => self.kappa = v,
                "alpha" => self.alpha = v,
                "g" => self.g = v,
                "h" => self.h = v,
                _ => self.dirichlet_delta = v,
            }
        }
        self.validate()
    }

    pub fn to_key_values(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "xi={}", self.xi)?;
        writeln!(f, "kappa={}", self.kappa)?;
        writeln!(f, "alpha={}", self.alpha)?;
        writeln!(f, "g={}", self.g)?;
        writeln!(f, "h={}", self.h)?;
        writeln!(f, "dirichlet_delta={}", self.dirichlet_delta)
    }
}

/// Data-dependent defaults: `xi` at the midrange, `kappa = 1/R^2`,
/// `alpha = 2`, `g = 0.2`, `h = 10/R^2`, `delta = 1`.
pub fn default_hyperparams(data: &Dataset) -> Result<Hyperparams> {
    let (lo, hi) = (data.min(), data.max());
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::ZeroRange);
    }
    let r2 = range * range;
    Ok(Hyperparams {
        xi: (lo + hi) / 2.0,
        kappa: 1.0 / r2,
        alpha: 2.0,
        g: 0.2,
        h: 10.0 / r2,
        dirichlet_delta: 1.0,
    })
}

fn gamma_log_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

fn inverse_gamma_log_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - rate / x
}

fn dirichlet_symmetric_log_pdf(weights: &[f64], delta: f64) -> f64 {
    let k = weights.len() as f64;
    ln_gamma(k * delta) - k * ln_gamma(delta)
        + (delta - 1.0) * weights.iter().map(|w| w.ln()).sum::<f64>()
}

/// Log density of the independent prior factor at `(params, beta)`.
///
/// The Dirichlet term is the density with respect to Lebesgue measure on the
/// first `K-1` weights.
pub fn log_p1(params: &MixtureParams, beta: f64, hyper: &Hyperparams) -> f64 {
    let weights = if params.k() > 1 {
        dirichlet_symmetric_log_pdf(&params.weights, hyper.dirichlet_delta)
    } else {
        0.0
    };
    let means: f64 = params
        .means
        .iter()
        .map(|&m| normal_log_pdf(m, hyper.xi, 1.0 / hyper.kappa))
        .sum();
    let variances: f64 = params
        .variances
        .iter()
        .map(|&v| inverse_gamma_log_pdf(v, hyper.alpha, beta))
        .sum();
    weights + means + variances + gamma_log_pdf(beta, hyper.g, hyper.h)
}

/// Component labels (0-based) for every observation plus per-component tallies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatentAllocations {
    z: Vec<usize>,
    counts: Vec<usize>,
}

impl LatentAllocations {
    pub fn from_labels(z: Vec<usize>, k: usize) -> Result<Self> {
        let mut counts = vec![0; k];
        for &label in &z {
            if label >= k {
                return Err(Error::InvalidParams(format!(
                    "label {label} out of range for K={k}"
                )));
            }
            counts[label] += 1;
        }
        Ok(Self { z, counts })
    }

    pub fn labels(&self) -> &[usize] {
        &self.z
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    /// Per-component sums of assigned observations.
    pub fn sums(&self, data: &Dataset) -> Vec<f64> {
        let mut sums = vec![0.0; self.k()];
        for (&label, &y) in self.z.iter().zip(data.observations()) {
            sums[label] += y;
        }
        sums
    }

    /// Per-component sums of squared deviations from `means`.
    pub fn squared_deviations(&self, data: &Dataset, means: &[f64]) -> Vec<f64> {
        let mut ss = vec![0.0; self.k()];
        for (&label, &y) in self.z.iter().zip(data.observations()) {
            ss[label] += (y - means[label]).powi(2);
        }
        ss
    }
}

/// Draws `P(z_i = k) ∝ w_k N(y_i; mu_k, s2_k)` independently for every i.
pub fn sample_allocations<R: Rng + ?Sized>(
    data: &Dataset,
    params: &MixtureParams,
    rng: &mut R,
) -> LatentAllocations {
    let k = params.k();
    let log_w: Vec<f64> = params.weights.iter().map(|w| w.ln()).collect();
    let mut probs = vec![0.0; k];
    let mut z = Vec::with_capacity(data.n());
    let mut counts = vec![0; k];
    for &y in data.observations() {
        let mut max = f64::NEG_INFINITY;
        for c in 0..k {
            probs[c] = log_w[c] + normal_log_pdf(y, params.means[c], params.variances[c]);
            max = max.max(probs[c]);
        }
        for p in probs.iter_mut() {
            *p = (*p - max).exp();
        }
        let label = sample_categorical(rng, &probs);
        counts[label] += 1;
        z.push(label);
    }
    LatentAllocations { z, counts }
}

/// Dirichlet(delta + n_1, ..., delta + n_K) via normalized gamma draws.
pub fn sample_weights<R: Rng + ?Sized>(
    alloc: &LatentAllocations,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Vec<f64> {
    let mut draws: Vec<f64> = alloc
        .counts()
        .iter()
        .map(|&n| {
            let g = Gamma::new(hyper.dirichlet_delta + n as f64, 1.0).expect("positive shape");
            g.sample(rng).max(f64::MIN_POSITIVE)
        })
        .collect();
    let total: f64 = draws.iter().sum();
    for w in draws.iter_mut() {
        *w /= total;
    }
    draws
}

/// Joint draw of all means from their full conditional given allocations
/// and variances. The components are conditionally independent, so this is
/// an exact draw from the joint conditional:
/// `mu_k ~ N(m_k, v_k)`, `v_k = 1/(kappa + n_k/s2_k)`,
/// `m_k = v_k (kappa xi + S_k/s2_k)`.
pub fn sample_means_conditional<R: Rng + ?Sized>(
    data: &Dataset,
    alloc: &LatentAllocations,
    variances: &[f64],
    hyper: &Hyperparams,
    rng: &mut R,
) -> Vec<f64> {
    let sums = alloc.sums(data);
    alloc
        .counts()
        .iter()
        .zip(&sums)
        .zip(variances)
        .map(|((&n, &s), &var)| {
            let (m, v) = mean_conditional_moments(n, s, var, hyper);
            Normal::new(m, v.sqrt())
                .expect("finite moments")
                .sample(rng)
        })
        .collect()
}

/// `(m_k, v_k)` of the normal full conditional for one component mean.
pub fn mean_conditional_moments(
    n: usize,
    sum: f64,
    variance: f64,
    hyper: &Hyperparams,
) -> (f64, f64) {
    let v = 1.0 / (hyper.kappa + n as f64 / variance);
    (v * (hyper.kappa * hyper.xi + sum / variance), v)
}

/// `1/s2_k ~ Gamma(alpha + n_k/2, rate = beta + SS_k/2)`.
pub fn sample_variances<R: Rng + ?Sized>(
    data: &Dataset,
    alloc: &LatentAllocations,
    means: &[f64],
    beta: f64,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Vec<f64> {
    let ss = alloc.squared_deviations(data, means);
    alloc
        .counts()
        .iter()
        .zip(&ss)
        .map(|(&n, &ss)| {
            let shape = hyper.alpha + n as f64 / 2.0;
            let rate = beta + ss / 2.0;
            let precision = Gamma::new(shape, 1.0 / rate)
                .expect("positive shape/rate")
                .sample(rng);
            1.0 / precision
        })
        .collect()
}

/// `beta ~ Gamma(g + K alpha, rate = h + sum_k 1/s2_k)`.
pub fn sample_beta<R: Rng + ?Sized>(variances: &[f64], hyper: &Hyperparams, rng: &mut R) -> f64 {
    let shape = hyper.g + variances.len() as f64 * hyper.alpha;
    let rate = hyper.h + variances.iter().map(|v| 1.0 / v).sum::<f64>();
    Gamma::new(shape, 1.0 / rate)
        .expect("positive shape/rate")
        .sample(rng)
}

/// Independent draw of `(params, beta)` from the prior factor.
pub fn sample_prior<R: Rng + ?Sized>(
    k: usize,
    hyper: &Hyperparams,
    rng: &mut R,
) -> (MixtureParams, f64) {
    let empty = LatentAllocations {
        z: Vec::new(),
        counts: vec![0; k],
    };
    let weights = sample_weights(&empty, hyper, rng);
    let mean_prior = Normal::new(hyper.xi, (1.0 / hyper.kappa).sqrt()).expect("finite");
    let means = (0..k).map(|_| mean_prior.sample(rng)).collect();
    let beta = Gamma::new(hyper.g, 1.0 / hyper.h)
        .expect("positive")
        .sample(rng);
    let precision = Gamma::new(hyper.alpha, 1.0 / beta).expect("positive");
    let variances = (0..k).map(|_| 1.0 / precision.sample(rng)).collect();
    let params = MixtureParams {
        weights,
        means,
        variances,
        globals: Vec::new(),
    };
    (params, beta)
}
