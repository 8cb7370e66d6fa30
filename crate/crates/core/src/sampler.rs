//! Fixed-K Metropolis-within-Gibbs sampler for penalized mixture priors.
//!
//! Each sweep updates the blocks allocations → weights → means → variances
//! → beta. Every block is drawn from its conjugate full conditional under
//! the independent prior. Blocks the penalty does not read are accepted
//! outright; blocks it does read are accepted with probability
//! `min(1, p2(proposed) / p2(current))`, which is exactly the
//! Metropolis-Hastings ratio for a proposal drawn from the unpenalized
//! conditional. The whole means block is proposed jointly and accepted or
//! rejected as a unit.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{Dataset, MixtureParams};
use crate::penalty::{acceptance_from_logs, eval_log_penalty, PenaltySpec, Target};
use crate::priors::{
    sample_allocations, sample_beta, sample_means_conditional, sample_prior, sample_variances,
    sample_weights, Hyperparams, LatentAllocations,
};
use crate::rng::{self, ChainRng};

/// Attempts made to find an initial state with positive penalty.
pub const MAX_INIT_ATTEMPTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitStrategy {
    /// Means at the k/(K+1) data quantiles, variances at the data variance,
    /// uniform weights, beta at its prior mean.
    Quantile,
    /// Everything drawn from the independent prior.
    Prior,
}

impl FromStr for InitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantile" => Ok(InitStrategy::Quantile),
            "prior" => Ok(InitStrategy::Prior),
            other => Err(Error::Parse(format!(
                "unknown init strategy `{other}` (quantile|prior)"
            ))),
        }
    }
}

impl InitStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            InitStrategy::Quantile => "quantile",
            InitStrategy::Prior => "prior",
        }
    }
}

/// Which parameter blocks a sweep updates. Allocations and means are always
/// updated; the others can be frozen at their current values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockUpdates {
    pub weights: bool,
    pub variances: bool,
    pub beta: bool,
}

impl BlockUpdates {
    pub const ALL: Self = Self {
        weights: true,
        variances: true,
        beta: true,
    };
    pub const MEANS_ONLY: Self = Self {
        weights: false,
        variances: false,
        beta: false,
    };
}

impl Default for BlockUpdates {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfig {
    pub k: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub penalty: PenaltySpec,
    pub hyper: Hyperparams,
    pub init: InitStrategy,
    pub updates: BlockUpdates,
}

impl ChainConfig {
    pub fn new(k: usize, hyper: Hyperparams, penalty: PenaltySpec) -> Self {
        Self {
            k,
            iterations: 20_000,
            burn_in: 5_000,
            thin: 2,
            seed: 1,
            penalty,
            hyper,
            init: InitStrategy::Quantile,
            updates: BlockUpdates::ALL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidConfig(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        self.penalty.validate()?;
        if !self.penalty.applies_to_mixture() {
            return Err(Error::SelectorMismatch {
                penalty: self.penalty.to_string(),
                input: "mixture parameters".into(),
            });
        }
        self.hyper.validate()
    }

    /// Number of records a run retains.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Live state of one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub params: MixtureParams,
    pub beta: f64,
    pub alloc: LatentAllocations,
    /// Cached `log p2(params)`; never `NEG_INFINITY`.
    pub log_penalty: f64,
    /// Completed sweeps.
    pub iteration: usize,
}

impl ChainState {
    /// State at fixed parameters with freshly sampled allocations.
    pub fn at<R: Rng + ?Sized>(
        data: &Dataset,
        params: MixtureParams,
        beta: f64,
        penalty: &PenaltySpec,
        rng: &mut R,
    ) -> Result<Self> {
        params.validate()?;
        let log_penalty = eval_log_penalty(penalty, &params)?;
        if log_penalty == f64::NEG_INFINITY {
            return Err(Error::InvalidCurrentState);
        }
        let alloc = sample_allocations(data, &params, rng);
        Ok(Self {
            params,
            beta,
            alloc,
            log_penalty,
            iteration: 0,
        })
    }
}

/// Which proposals the last sweep accepted. Blocks the penalty does not read
/// are always accepted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepReport {
    pub weights: bool,
    pub means: bool,
    pub variances: bool,
}

pub fn init_chain<R: Rng + ?Sized>(
    data: &Dataset,
    config: &ChainConfig,
    rng: &mut R,
) -> Result<ChainState> {
    config.validate()?;
    let k = config.k;
    let targets = config.penalty.targets();
    let (lo, hi) = (data.min(), data.max());
    let spread = if hi > lo { hi - lo } else { 1.0 };

    let (base, base_beta) = match config.init {
        InitStrategy::Quantile => {
            let var = data.variance();
            let var = if var > 0.0 { var } else { 1.0 };
            let means = (1..=k)
                .map(|j| data.quantile(j as f64 / (k + 1) as f64))
                .collect();
            let params = MixtureParams {
                weights: vec![1.0 / k as f64; k],
                means,
                variances: vec![var; k],
                globals: Vec::new(),
            };
            (params, config.hyper.g / config.hyper.h)
        }
        InitStrategy::Prior => sample_prior(k, &config.hyper, rng),
    };

    let mut candidate = (base.clone(), base_beta);
    for attempt in 0..MAX_INIT_ATTEMPTS {
        if attempt > 0 {
            candidate = match config.init {
                InitStrategy::Prior => sample_prior(k, &config.hyper, rng),
                InitStrategy::Quantile => {
                    let mut p = base.clone();
                    if targets.means {
                        let jitter = Normal::new(0.0, 0.1 * spread).expect("finite sd");
                        for m in p.means.iter_mut() {
                            *m = (*m + jitter.sample(rng)).clamp(lo, hi);
                        }
                    }
                    if targets.variances {
                        let jitter = Normal::new(0.0, 0.5).expect("finite sd");
                        for v in p.variances.iter_mut() {
                            *v *= Distribution::<f64>::sample(&jitter, rng).exp();
                        }
                    }
                    if targets.weights {
                        let empty = LatentAllocations::from_labels(Vec::new(), k)?;
                        p.weights = sample_weights(&empty, &config.hyper, rng);
                    }
                    (p, base_beta)
                }
            };
        }
        let log_penalty = eval_log_penalty(&config.penalty, &candidate.0)?;
        if log_penalty.is_finite() {
            let (params, beta) = candidate;
            let alloc = sample_allocations(data, &params, rng);
            return Ok(ChainState {
                params,
                beta,
                alloc,
                log_penalty,
                iteration: 0,
            });
        }
    }
    Err(Error::InitFailure {
        attempts: MAX_INIT_ATTEMPTS,
    })
}

/// Accepts `proposed` for the block `target` with the penalty ratio.
fn penalized_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    target: Target,
    proposed: Vec<f64>,
    penalty: &PenaltySpec,
    rng: &mut R,
) -> Result<bool> {
    let mut candidate = state.params.clone();
    match target {
        Target::Means => candidate.means = proposed,
        Target::Variances => candidate.variances = proposed,
        Target::Weights => candidate.weights = proposed,
    }
    let log_penalty = eval_log_penalty(penalty, &candidate)?;
    let accept_prob = acceptance_from_logs(log_penalty, state.log_penalty)?;
    let accepted = accept_prob >= 1.0 || (accept_prob > 0.0 && rng.random::<f64>() < accept_prob);
    if accepted {
        state.params = candidate;
        state.log_penalty = log_penalty;
    }
    Ok(accepted)
}

/// One systematic sweep over all blocks.
pub fn sweep<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &Dataset,
    config: &ChainConfig,
    rng: &mut R,
) -> Result<SweepReport> {
    let targets = config.penalty.targets();
    let hyper = &config.hyper;
    let mut report = SweepReport {
        weights: true,
        means: true,
        variances: true,
    };

    state.alloc = sample_allocations(data, &state.params, rng);

    if config.updates.weights {
        let proposed = sample_weights(&state.alloc, hyper, rng);
        if targets.weights {
            report.weights =
                penalized_step(state, Target::Weights, proposed, &config.penalty, rng)?;
        } else {
            state.params.weights = proposed;
        }
    }

    let proposed =
        sample_means_conditional(data, &state.alloc, &state.params.variances, hyper, rng);
    if targets.means {
        report.means = penalized_step(state, Target::Means, proposed, &config.penalty, rng)?;
    } else {
        state.params.means = proposed;
    }

    if config.updates.variances {
        let proposed = sample_variances(
            data,
            &state.alloc,
            &state.params.means,
            state.beta,
            hyper,
            rng,
        );
        if targets.variances {
            report.variances =
                penalized_step(state, Target::Variances, proposed, &config.penalty, rng)?;
        } else {
            state.params.variances = proposed;
        }
    }

    if config.updates.beta {
        state.beta = sample_beta(&state.params.variances, hyper, rng);
    }

    state.iteration += 1;
    debug_assert!(state.log_penalty != f64::NEG_INFINITY);
    Ok(report)
}

/// Runs `config.iterations` sweeps from `state`, calling `visit` on every
/// retained sweep. Returns the means-block acceptance rate over the
/// post-burn-in sweeps.
pub fn run_from_state<R, F>(
    data: &Dataset,
    config: &ChainConfig,
    state: &mut ChainState,
    rng: &mut R,
    mut visit: F,
) -> Result<BlockRates>
where
    R: Rng + ?Sized,
    F: FnMut(&ChainState, &SweepReport),
{
    config.validate()?;
    let mut accepted = [0usize; 3];
    for i in 0..config.iterations {
        let report = sweep(state, data, config, rng)?;
        if i < config.burn_in {
            continue;
        }
        accepted[0] += report.weights as usize;
        accepted[1] += report.means as usize;
        accepted[2] += report.variances as usize;
        if (i - config.burn_in + 1) % config.thin == 0 {
            visit(state, &report);
        }
    }
    let sweeps = (config.iterations - config.burn_in) as f64;
    Ok(BlockRates {
        weights: accepted[0] as f64 / sweeps,
        means: accepted[1] as f64 / sweeps,
        variances: accepted[2] as f64 / sweeps,
    })
}

/// Post-burn-in acceptance rate of each penalized block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockRates {
    pub weights: f64,
    pub means: f64,
    pub variances: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    /// 1-based sweep number.
    pub iter: usize,
    pub accept_mu: bool,
    pub beta: f64,
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl SampleRecord {
    pub fn params(&self) -> MixtureParams {
        MixtureParams {
            weights: self.weights.clone(),
            means: self.means.clone(),
            variances: self.variances.clone(),
            globals: Vec::new(),
        }
    }
}

/// Retained posterior draws of one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleStore {
    pub k: usize,
    pub records: Vec<SampleRecord>,
    /// Means-block acceptance rate over post-burn-in sweeps.
    pub acceptance_rate: f64,
    pub block_rates: BlockRates,
}

pub fn run_chain(data: &Dataset, config: &ChainConfig) -> Result<SampleStore> {
    let mut rng: ChainRng = rng::seeded(config.seed);
    let mut state = init_chain(data, config, &mut rng)?;
    let mut records = Vec::with_capacity(config.retained());
    let rates = run_from_state(data, config, &mut state, &mut rng, |s, r| {
        records.push(SampleRecord {
            iter: s.iteration,
            accept_mu: r.means,
            beta: s.beta,
            weights: s.params.weights.clone(),
            means: s.params.means.clone(),
            variances: s.params.variances.clone(),
        })
    })?;
    Ok(SampleStore {
        k: config.k,
        records,
        acceptance_rate: rates.means,
        block_rates: rates,
    })
}

/// Runs `chains` independent chains concurrently; chain `i` uses seed
/// `config.seed + i`.
pub fn run_chains(data: &Dataset, config: &ChainConfig, chains: usize) -> Result<Vec<SampleStore>> {
    if chains == 0 {
        return Err(Error::InvalidConfig("chains must be at least 1".into()));
    }
    config.validate()?;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains)
            .map(|i| {
                let cfg = ChainConfig {
                    seed: rng::chain_seed(config.seed, i),
                    ..config.clone()
                };
                scope.spawn(move || run_chain(data, &cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    })
}

impl SampleStore {
    pub fn header(k: usize) -> String {
        let mut cols = vec!["iter".to_string(), "accept_mu".into(), "beta".into()];
        for prefix in ["pi", "mu", "sigma2"] {
            cols.extend((1..=k).map(|j| format!("{prefix}_{j}")));
        }
        cols.join(",")
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Self::header(self.k);
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{},{},{}", r.iter, r.accept_mu as u8, r.beta);
            for v in r.weights.iter().chain(&r.means).chain(&r.variances) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// Parses the persisted format. The acceptance rate is recomputed from
    /// the retained `accept_mu` flags.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty samples file".into()))?;
        let n_cols = header.split(',').count();
        if n_cols < 6 || (n_cols - 3) % 3 != 0 {
            return Err(Error::Parse(format!("malformed samples header `{header}`")));
        }
        let k = (n_cols - 3) / 3;
        if header.trim() != Self::header(k) {
            return Err(Error::Parse(format!(
                "unexpected samples header `{header}`"
            )));
        }
        let mut records = Vec::new();
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != n_cols {
                return Err(Error::Parse(format!(
                    "row {}: expected {n_cols} fields",
                    row + 1
                )));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i].parse().map_err(|_| {
                    Error::Parse(format!("row {}: bad number `{}`", row + 1, fields[i]))
                })
            };
            let iter = fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad iteration", row + 1)))?;
            let accept_mu = match fields[1] {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::Parse(format!(
                        "row {}: bad accept flag `{other}`",
                        row + 1
                    )))
                }
            };
            let block = |start: usize| (start..start + k).map(num).collect::<Result<Vec<_>>>();
            records.push(SampleRecord {
                iter,
                accept_mu,
                beta: num(2)?,
                weights: block(3)?,
                means: block(3 + k)?,
                variances: block(3 + 2 * k)?,
            });
        }
        let rate = if records.is_empty() {
            0.0
        } else {
            records.iter().filter(|r| r.accept_mu).count() as f64 / records.len() as f64
        };
        Ok(Self {
            k,
            records,
            acceptance_rate: rate,
            block_rates: BlockRates {
                weights: f64::NAN,
                means: rate,
                variances: f64::NAN,
            },
        })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    /// Concatenates stores with equal K, e.g. the chains of one run.
    pub fn merge(stores: Vec<SampleStore>) -> Result<Self> {
        let mut iter = stores.into_iter();
        let mut first = iter
            .next()
            .ok_or_else(|| Error::InvalidData("no sample stores to merge".into()))?;
        let mut n_weighted = first.records.len() as f64 * first.acceptance_rate;
        for store in iter {
            if store.k != first.k {
                return Err(Error::InvalidData(format!(
                    "cannot merge K={} with K={}",
                    first.k, store.k
                )));
            }
            n_weighted += store.records.len() as f64 * store.acceptance_rate;
            first.records.extend(store.records);
        }
        if !first.records.is_empty() {
            first.acceptance_rate = n_weighted / first.records.len() as f64;
        }
        Ok(first)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::simulate_data;
    use crate::priors::default_hyperparams;

    fn sim_data() -> Dataset {
        let p = MixtureParams::new(vec![0.5, 0.5], vec![0.0, 2.0], vec![1.0, 1.0]).unwrap();
        simulate_data(&p, 100, 7).unwrap()
    }

    fn config(data: &Dataset, penalty: &str) -> ChainConfig {
        ChainConfig {
            iterations: 1000,
            burn_in: 200,
            thin: 4,
            ..ChainConfig::new(
                2,
                default_hyperparams(data).unwrap(),
                penalty.parse().unwrap(),
            )
        }
    }

    #[test]
    fn record_count_arithmetic() {
        let data = sim_data();
        let store = run_chain(&data, &config(&data, "absdiff:mu:s=1")).unwrap();
        assert_eq!(store.records.len(), 200);
        assert_eq!(store.records[0].iter, 204);
        assert_eq!(store.records.last().unwrap().iter, 1000);
        let odd = ChainConfig {
            iterations: 1003,
            burn_in: 0,
            thin: 7,
            ..config(&data, "none")
        };
        assert_eq!(run_chain(&data, &odd).unwrap().records.len(), 1003 / 7);
    }

    #[test]
    fn unpenalized_chain_always_accepts() {
        let data = sim_data();
        for spec in ["none", "absdiff:mu:s=0"] {
            let store = run_chain(&data, &config(&data, spec)).unwrap();
            assert_eq!(store.acceptance_rate, 1.0, "{spec}");
        }
    }

    #[test]
    fn untargeted_blocks_never_reject() {
        let data = sim_data();
        let cfg = config(&data, "absdiff:mu:s=1");
        let mut rng = rng::seeded(11);
        let mut state = init_chain(&data, &cfg, &mut rng).unwrap();
        let mut rejected_means = 0;
        for _ in 0..500 {
            let r = sweep(&mut state, &data, &cfg, &mut rng).unwrap();
            assert!(r.weights && r.variances);
            rejected_means += (!r.means) as usize;
            assert_eq!(
                state.log_penalty,
                eval_log_penalty(&cfg.penalty, &state.params).unwrap()
            );
        }
        assert!(rejected_means > 0);
    }

    #[test]
    fn quantile_init_is_ordered_and_finite() {
        let data = sim_data();
        let cfg = config(&data, "absdiff:mu:s=1");
        let a = init_chain(&data, &cfg, &mut rng::seeded(5)).unwrap();
        let b = init_chain(&data, &cfg, &mut rng::seeded(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.params.means[0] < a.params.means[1]);
        assert!(a.log_penalty.is_finite());
        assert_eq!(a.beta, cfg.hyper.g / cfg.hyper.h);
    }

    #[test]
    fn threshold_wider_than_data_fails_init() {
        let data = sim_data();
        let delta = data.range() * 1.5;
        let cfg = config(&data, &format!("threshold:mu:delta={delta}"));
        assert!(matches!(
            init_chain(&data, &cfg, &mut rng::seeded(1)),
            Err(Error::InitFailure {
                attempts: MAX_INIT_ATTEMPTS
            })
        ));
    }

    #[test]
    fn tied_quantiles_are_jittered_apart() {
        let data = Dataset::new(vec![0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 5.0], "ties").unwrap();
        let cfg = ChainConfig {
            k: 3,
            ..config(&data, "absdiff:mu:s=1")
        };
        let state = init_chain(&data, &cfg, &mut rng::seeded(2)).unwrap();
        assert!(state.log_penalty.is_finite());
    }

    #[test]
    fn prior_init_works() {
        let data = sim_data();
        let cfg = ChainConfig {
            init: InitStrategy::Prior,
            ..config(&data, "threshold:mu:delta=0.5")
        };
        let store = run_chain(&data, &cfg).unwrap();
        assert_eq!(store.records.len(), cfg.retained());
    }

    #[test]
    fn config_validation() {
        let data = sim_data();
        let base = config(&data, "none");
        assert!(ChainConfig {
            thin: 0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(ChainConfig {
            burn_in: 1000,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(ChainConfig {
            k: 0,
            ..base.clone()
        }
        .validate()
        .is_err());
        let maxmin = ChainConfig {
            penalty: "maxmin".parse().unwrap(),
            ..base
        };
        assert!(matches!(
            maxmin.validate(),
            Err(Error::SelectorMismatch { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let data = sim_data();
        let store = run_chain(&data, &config(&data, "absdiff:mu:s=1")).unwrap();
        let text = store.to_csv_string();
        assert!(text.starts_with("iter,accept_mu,beta,pi_1,pi_2,mu_1,mu_2,sigma2_1,sigma2_2\n"));
        let back = SampleStore::from_csv_str(&text).unwrap();
        assert_eq!(back.records, store.records);
        assert_eq!(back.to_csv_string(), text);
    }

    #[test]
    fn csv_errors() {
        assert!(SampleStore::from_csv_str("").is_err());
        assert!(SampleStore::from_csv_str("iter,accept_mu,beta,pi_1,mu_1\n").is_err());
        let h = SampleStore::header(1);
        assert!(SampleStore::from_csv_str(&format!("{h}\n1,2,1,1,0,1\n")).is_err());
        assert!(SampleStore::from_csv_str(&format!("{h}\n1,1,1,1,0\n")).is_err());
    }

    #[test]
    fn penalized_weights_and_variances() {
        let data = sim_data();
        let cfg = config(&data, "product(absdiff:pi:s=1,absdiff:sigma2:s=-1)");
        let store = run_chain(&data, &cfg).unwrap();
        assert!(store.block_rates.weights < 1.0);
        assert!(store.block_rates.variances < 1.0);
        assert_eq!(store.block_rates.means, 1.0);
    }

    #[test]
    fn multiple_chains_are_distinct_and_deterministic() {
        let data = sim_data();
        let cfg = config(&data, "absdiff:mu:s=1");
        let a = run_chains(&data, &cfg, 3).unwrap();
        let b = run_chains(&data, &cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].records, a[1].records);
        assert_eq!(a[0], run_chain(&data, &cfg).unwrap());
        let merged = SampleStore::merge(a).unwrap();
        assert_eq!(merged.records.len(), 600);
    }
}
