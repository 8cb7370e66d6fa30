#![allow(dead_code)]

use std::path::PathBuf;

use ppp::model::simulate_data;
use ppp::oracle::{OracleChain, OracleProblem};
use ppp::priors::{self, Hyperparams};
use ppp::rng;
use ppp::sampler::{BlockRates, ChainConfig, SampleRecord};
use ppp::{Dataset, MixtureParams, SampleStore};

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn oracle6() -> Dataset {
    Dataset::read_csv(workspace_root().join("data/oracle6.csv")).unwrap()
}

pub fn galaxy() -> Dataset {
    Dataset::read_csv(workspace_root().join("data/galaxy.csv")).unwrap()
}

pub fn two_normals(seed: u64) -> Dataset {
    let truth = MixtureParams::new(vec![0.5, 0.5], vec![0.0, 2.0], vec![1.0, 1.0]).unwrap();
    simulate_data(&truth, 100, seed).unwrap()
}

pub fn oracle_hyper() -> Hyperparams {
    Hyperparams {
        xi: 1.0,
        kappa: 1.0,
        alpha: 2.0,
        g: 0.2,
        h: 1.0,
        dirichlet_delta: 1.0,
    }
}

pub fn oracle_problem(penalty: &str) -> OracleProblem {
    OracleProblem {
        data: oracle6(),
        weights: vec![0.5, 0.5],
        variances: vec![1.0, 1.0],
        beta: 1.0,
        hyper: oracle_hyper(),
        penalty: penalty.parse().unwrap(),
    }
}

pub fn oracle_chain(retained: usize) -> OracleChain {
    OracleChain {
        iterations: retained + 1000,
        burn_in: 1000,
        thin: 1,
        seed: 1,
    }
}

/// Linear-interpolation quantile, written out independently of the library.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Unpenalized Gibbs sampler built directly from the conditional draws, in
/// the order allocations, weights, means, variances, beta.
pub fn plain_gibbs(data: &Dataset, config: &ChainConfig) -> SampleStore {
    let k = config.k;
    let hyper = &config.hyper;
    let mut r = rng::seeded(config.seed);
    let mut sorted = data.observations().to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    let mut params = MixtureParams {
        weights: vec![1.0 / k as f64; k],
        means: (1..=k)
            .map(|j| quantile(&sorted, j as f64 / (k + 1) as f64))
            .collect(),
        variances: vec![var; k],
        globals: Vec::new(),
    };
    let mut beta = hyper.g / hyper.h;
    let _initial_alloc = priors::sample_allocations(data, &params, &mut r);
    let mut records = Vec::new();
    for i in 0..config.iterations {
        let alloc = priors::sample_allocations(data, &params, &mut r);
        params.weights = priors::sample_weights(&alloc, hyper, &mut r);
        params.means =
            priors::sample_means_conditional(data, &alloc, &params.variances, hyper, &mut r);
        params.variances =
            priors::sample_variances(data, &alloc, &params.means, beta, hyper, &mut r);
        beta = priors::sample_beta(&params.variances, hyper, &mut r);
        if i >= config.burn_in && (i - config.burn_in + 1) % config.thin == 0 {
            records.push(SampleRecord {
                iter: i + 1,
                accept_mu: true,
                beta,
                weights: params.weights.clone(),
                means: params.means.clone(),
                variances: params.variances.clone(),
            });
        }
    }
    SampleStore {
        k,
        records,
        acceptance_rate: 1.0,
        block_rates: BlockRates {
            weights: 1.0,
            means: 1.0,
            variances: 1.0,
        },
    }
}

/// Sample mean and variance with the Monte Carlo standard errors of both.
pub struct Moments {
    pub mean: f64,
    pub var: f64,
    pub mean_se: f64,
    pub var_se: f64,
}

pub fn moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    Moments {
        mean,
        var,
        mean_se: (var / n).sqrt(),
        var_se: ((m4 - var * var) / n).sqrt(),
    }
}

/// Checks draws against exact moments: mean within 4 and variance within 6
/// Monte Carlo standard errors. Returns a description of any failure.
pub fn check_moments(label: &str, xs: &[f64], mean: f64, var: f64) -> Result<(), String> {
    let m = moments(xs);
    let n = xs.len() as f64;
    let mean_se = (var / n).sqrt();
    let dm = (m.mean - mean).abs() / mean_se;
    let dv = (m.var - var).abs() / m.var_se;
    if dm <= 4.0 && dv <= 6.0 {
        Ok(())
    } else {
        Err(format!(
            "{label}: mean {} vs {mean} ({dm:.2} se), variance {} vs {var} ({dv:.2} se)",
            m.mean, m.var
        ))
    }
}

pub const DRAWS: usize = 100_000;

/// Draws every conjugate conditional `DRAWS` times at a fixed state and
/// compares against closed-form moments.
pub fn conditional_moment_checks() -> Vec<Result<(), String>> {
    use ppp::priors::LatentAllocations;

    let data = Dataset::new(vec![-1.2, -0.4, 0.1, 0.3, 1.9, 2.2, 2.6, 3.1, 4.0], "fixed").unwrap();
    let z = vec![0, 0, 0, 1, 1, 1, 1, 2, 2];
    let alloc = LatentAllocations::from_labels(z.clone(), 3).unwrap();
    let hyper = Hyperparams {
        xi: 1.0,
        kappa: 0.25,
        alpha: 2.0,
        g: 0.2,
        h: 0.5,
        dirichlet_delta: 1.5,
    };
    let variances = [0.8, 1.3, 0.5];
    let means = [-0.5, 2.0, 3.4];
    let beta = 0.7;
    let mut r = rng::seeded(2024);
    let mut out = Vec::new();

    let ys = data.observations();
    let members = |c: usize| -> Vec<f64> {
        ys.iter()
            .zip(&z)
            .filter(|(_, &l)| l == c)
            .map(|(y, _)| *y)
            .collect()
    };

    // Means: N(m, v), v = 1/(kappa + n/s2), m = v (kappa xi + S/s2).
    let draws: Vec<Vec<f64>> = (0..DRAWS)
        .map(|_| priors::sample_means_conditional(&data, &alloc, &variances, &hyper, &mut r))
        .collect();
    for c in 0..3 {
        let ys = members(c);
        let v = 1.0 / (hyper.kappa + ys.len() as f64 / variances[c]);
        let m = v * (hyper.kappa * hyper.xi + ys.iter().sum::<f64>() / variances[c]);
        let col: Vec<f64> = draws.iter().map(|d| d[c]).collect();
        out.push(check_moments(&format!("mu_{}", c + 1), &col, m, v));
    }

    // Precisions: Gamma(alpha + n/2, rate beta + SS/2).
    let draws: Vec<Vec<f64>> = (0..DRAWS)
        .map(|_| priors::sample_variances(&data, &alloc, &means, beta, &hyper, &mut r))
        .collect();
    for c in 0..3 {
        let ys = members(c);
        let ss: f64 = ys.iter().map(|y| (y - means[c]).powi(2)).sum();
        let shape = hyper.alpha + ys.len() as f64 / 2.0;
        let rate = beta + ss / 2.0;
        let col: Vec<f64> = draws.iter().map(|d| 1.0 / d[c]).collect();
        out.push(check_moments(
            &format!("1/sigma2_{}", c + 1),
            &col,
            shape / rate,
            shape / (rate * rate),
        ));
    }

    // Beta: Gamma(g + K alpha, rate h + sum 1/s2).
    let shape = hyper.g + 3.0 * hyper.alpha;
    let rate = hyper.h + variances.iter().map(|v| 1.0 / v).sum::<f64>();
    let col: Vec<f64> = (0..DRAWS)
        .map(|_| priors::sample_beta(&variances, &hyper, &mut r))
        .collect();
    out.push(check_moments(
        "beta",
        &col,
        shape / rate,
        shape / (rate * rate),
    ));

    // Weights: Dirichlet(delta + n_k).
    let a: Vec<f64> = [3.0, 4.0, 2.0]
        .iter()
        .map(|n| n + hyper.dirichlet_delta)
        .collect();
    let a0: f64 = a.iter().sum();
    let draws: Vec<Vec<f64>> = (0..DRAWS)
        .map(|_| priors::sample_weights(&alloc, &hyper, &mut r))
        .collect();
    for c in 0..3 {
        let col: Vec<f64> = draws.iter().map(|d| d[c]).collect();
        let var = a[c] * (a0 - a[c]) / (a0 * a0 * (a0 + 1.0));
        out.push(check_moments(
            &format!("pi_{}", c + 1),
            &col,
            a[c] / a0,
            var,
        ));
    }
    out
}
