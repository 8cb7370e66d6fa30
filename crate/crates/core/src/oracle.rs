//! Brute-force references for the sampler on two-component problems with
//! weights, variances and beta held fixed.
//!
//! Three estimates of the same `(mu_1, mu_2)` posterior are produced on a
//! common grid:
//! - direct evaluation of likelihood × prior × penalty at every cell center,
//! - the Metropolis-within-Gibbs sampler restricted to allocation and mean
//!   updates,
//! - a plain random-walk Metropolis sampler on the two means.
//!
//! Agreement is measured in total variation distance.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::analysis::{AxisSpec, DensityGrid};
use crate::error::{Error, Result};
use crate::model::{log_likelihood, Dataset, MixtureParams};
use crate::penalty::{eval_log_penalty, PenaltySpec};
use crate::priors::{log_p1, Hyperparams};
use crate::rng;
use crate::sampler::{run_from_state, BlockUpdates, ChainConfig, ChainState, InitStrategy};

pub const MAX_ORACLE_POINTS: usize = 10;
pub const MAX_ORACLE_BINS: usize = 201;
/// Default TV budgets: grid vs chain, grid vs walker, chain vs walker.
pub const TV_BUDGET: f64 = 0.05;
pub const TV_BUDGET_CHAIN_WALKER: f64 = 0.07;

/// A two-component problem with everything but the means fixed.
#[derive(Clone, Debug)]
pub struct OracleProblem {
    pub data: Dataset,
    pub weights: Vec<f64>,
    pub variances: Vec<f64>,
    pub beta: f64,
    pub hyper: Hyperparams,
    pub penalty: PenaltySpec,
}

impl OracleProblem {
    pub fn validate(&self) -> Result<()> {
        if self.data.n() > MAX_ORACLE_POINTS {
            return Err(Error::InvalidConfig(format!(
                "oracle datasets are limited to {MAX_ORACLE_POINTS} points, got {}",
                self.data.n()
            )));
        }
        if self.weights.len() != 2 || self.variances.len() != 2 {
            return Err(Error::InvalidConfig(
                "the oracle needs exactly two components".into(),
            ));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig("beta must be positive".into()));
        }
        self.penalty.validate()?;
        if !self.penalty.applies_to_mixture() {
            return Err(Error::SelectorMismatch {
                penalty: self.penalty.to_string(),
                input: "mixture parameters".into(),
            });
        }
        self.hyper.validate()?;
        self.params_at(0.0, 1.0).validate()
    }

    fn params_at(&self, mu1: f64, mu2: f64) -> MixtureParams {
        MixtureParams {
            weights: self.weights.clone(),
            means: vec![mu1, mu2],
            variances: self.variances.clone(),
            globals: Vec::new(),
        }
    }

    /// `log L + log p1 + log p2` at `(mu1, mu2)`; `NEG_INFINITY` off-support.
    pub fn log_target(&self, mu1: f64, mu2: f64) -> Result<f64> {
        let params = self.params_at(mu1, mu2);
        let lp2 = eval_log_penalty(&self.penalty, &params)?;
        if lp2 == f64::NEG_INFINITY {
            return Ok(lp2);
        }
        Ok(log_likelihood(&self.data, &params)? + log_p1(&params, self.beta, &self.hyper) + lp2)
    }

    /// Starting means for both samplers: the 1/3 and 2/3 data quantiles,
    /// separated slightly if they coincide.
    fn start(&self) -> (f64, f64) {
        let a = self.data.quantile(1.0 / 3.0);
        let b = self.data.quantile(2.0 / 3.0);
        if b > a {
            (a, b)
        } else {
            (a - 0.5, a + 0.5)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPosterior {
    pub grid: DensityGrid,
    pub penalty: PenaltySpec,
    /// Share of a three-times-wider grid's mass that falls inside this grid.
    pub coverage: f64,
}

fn evaluate_grid(problem: &OracleProblem, axis: AxisSpec) -> Result<DensityGrid> {
    let centers = axis.centers();
    let mut logs = Vec::with_capacity(centers.len() * centers.len());
    for &x in &centers {
        for &y in &centers {
            logs.push(problem.log_target(x, y)?);
        }
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::EmptyGrid);
    }
    let weights = logs.into_iter().map(|l| (l - max).exp()).collect();
    DensityGrid::from_weights(vec![axis, axis], weights)
}

/// Normalized posterior of `(mu_1, mu_2)` on the square grid `axis × axis`.
pub fn grid_posterior(problem: &OracleProblem, axis: AxisSpec) -> Result<GridPosterior> {
    problem.validate()?;
    if axis.bins > MAX_ORACLE_BINS {
        return Err(Error::InvalidConfig(format!(
            "oracle grids are limited to {MAX_ORACLE_BINS} bins per axis"
        )));
    }
    let grid = evaluate_grid(problem, axis)?;

    // Same cell width, three times the extent: the inner block of cells
    // coincides exactly with `axis`.
    let span = axis.max - axis.min;
    let wide_axis = AxisSpec::new(axis.min - span, axis.max + span, 3 * axis.bins)?;
    let wide = evaluate_grid(problem, wide_axis)?;
    let n = axis.bins;
    let coverage = (n..2 * n)
        .map(|ix| (n..2 * n).map(|iy| wide.at(ix, iy)).sum::<f64>())
        .sum();

    Ok(GridPosterior {
        grid,
        penalty: problem.penalty.clone(),
        coverage,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleChain {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

fn histogram_into(counts: &mut [f64], axis: &AxisSpec, mu1: f64, mu2: f64) {
    if let (Some(ix), Some(iy)) = (axis.index_of(mu1), axis.index_of(mu2)) {
        counts[ix * axis.bins + iy] += 1.0;
    }
}

/// Histogram of `(mu_1, mu_2)` from the penalized sampler with weights,
/// variances and beta frozen at the problem's values.
pub fn constrained_chain_marginal(
    problem: &OracleProblem,
    axis: AxisSpec,
    chain: OracleChain,
) -> Result<DensityGrid> {
    problem.validate()?;
    let config = ChainConfig {
        k: 2,
        iterations: chain.iterations,
        burn_in: chain.burn_in,
        thin: chain.thin,
        seed: chain.seed,
        penalty: problem.penalty.clone(),
        hyper: problem.hyper,
        init: InitStrategy::Quantile,
        updates: BlockUpdates::MEANS_ONLY,
    };
    let mut rng = rng::seeded(chain.seed);
    let (a, b) = problem.start();
    let mut state = ChainState::at(
        &problem.data,
        problem.params_at(a, b),
        problem.beta,
        &problem.penalty,
        &mut rng,
    )?;
    let mut counts = vec![0.0; axis.bins * axis.bins];
    run_from_state(&problem.data, &config, &mut state, &mut rng, |s, _| {
        histogram_into(&mut counts, &axis, s.params.means[0], s.params.means[1]);
    })?;
    DensityGrid::from_weights(vec![axis, axis], counts)
}

/// Random-walk Metropolis on `(mu_1, mu_2)` targeting likelihood × prior ×
/// penalty directly. The first tenth of the steps is discarded.
pub fn reference_rw_sampler(
    problem: &OracleProblem,
    axis: AxisSpec,
    steps: usize,
    step_size: f64,
    seed: u64,
) -> Result<DensityGrid> {
    problem.validate()?;
    if !(step_size >= 0.0 && step_size.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "step size must be non-negative, got {step_size}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let (mut x, mut y) = problem.start();
    let mut current = problem.log_target(x, y)?;
    let mut counts = vec![0.0; axis.bins * axis.bins];
    let burn_in = steps / 10;
    let jump = (step_size > 0.0).then(|| Normal::new(0.0, step_size).expect("finite"));
    for step in 0..steps {
        if let Some(jump) = &jump {
            let px = x + jump.sample(&mut rng);
            let py = y + jump.sample(&mut rng);
            let proposed = problem.log_target(px, py)?;
            if proposed >= current || rng.random::<f64>() < (proposed - current).exp() {
                x = px;
                y = py;
                current = proposed;
            }
        }
        if step >= burn_in {
            histogram_into(&mut counts, &axis, x, y);
        }
    }
    DensityGrid::from_weights(vec![axis, axis], counts)
}

/// `0.5 * sum |a - b|` over matching cells.
pub fn tv_distance(a: &DensityGrid, b: &DensityGrid) -> Result<f64> {
    if a.axes != b.axes || a.masses.len() != b.masses.len() {
        return Err(Error::GridMismatch(
            "TV distance needs identical grids".into(),
        ));
    }
    Ok(0.5
        * a.masses
            .iter()
            .zip(&b.masses)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleBudgets {
    pub grid_chain: f64,
    pub grid_walker: f64,
    pub chain_walker: f64,
}

impl Default for OracleBudgets {
    fn default() -> Self {
        Self {
            grid_chain: TV_BUDGET,
            grid_walker: TV_BUDGET,
            chain_walker: TV_BUDGET_CHAIN_WALKER,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    pub grid: GridPosterior,
    pub chain: DensityGrid,
    pub walker: DensityGrid,
    pub tv_grid_chain: f64,
    pub tv_grid_walker: f64,
    pub tv_chain_walker: f64,
    pub budgets: OracleBudgets,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.tv_grid_chain < self.budgets.grid_chain
            && self.tv_grid_walker < self.budgets.grid_walker
            && self.tv_chain_walker < self.budgets.chain_walker
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let verdict = |tv: f64, budget: f64| if tv < budget { "ok" } else { "VIOLATED" };
        let _ = writeln!(out, "penalty={}", self.grid.penalty);
        let _ = writeln!(out, "grid_coverage={:.6}", self.grid.coverage);
        let b = self.budgets;
        let _ = writeln!(
            out,
            "tv_grid_chain={:.6} budget={} {}",
            self.tv_grid_chain,
            b.grid_chain,
            verdict(self.tv_grid_chain, b.grid_chain)
        );
        let _ = writeln!(
            out,
            "tv_grid_walker={:.6} budget={} {}",
            self.tv_grid_walker,
            b.grid_walker,
            verdict(self.tv_grid_walker, b.grid_walker)
        );
        let _ = writeln!(
            out,
            "tv_chain_walker={:.6} budget={} {}",
            self.tv_chain_walker,
            b.chain_walker,
            verdict(self.tv_chain_walker, b.chain_walker)
        );
        let _ = writeln!(
            out,
            "result={}",
            if self.passed() { "pass" } else { "fail" }
        );
        out
    }
}

/// Runs all three estimates and compares them.
pub fn run_oracle(
    problem: &OracleProblem,
    axis: AxisSpec,
    chain: OracleChain,
    walker_steps: usize,
    step_size: f64,
    budgets: OracleBudgets,
) -> Result<OracleReport> {
    let grid = grid_posterior(problem, axis)?;
    let (chain_grid, walker) = std::thread::scope(|scope| {
        let c = scope.spawn(|| constrained_chain_marginal(problem, axis, chain));
        let w = scope.spawn(|| {
            reference_rw_sampler(
                problem,
                axis,
                walker_steps,
                step_size,
                chain.seed.wrapping_add(1),
            )
        });
        (
            c.join().expect("chain thread"),
            w.join().expect("walker thread"),
        )
    });
    let (chain_grid, walker) = (chain_grid?, walker?);
    Ok(OracleReport {
        tv_grid_chain: tv_distance(&grid.grid, &chain_grid)?,
        tv_grid_walker: tv_distance(&grid.grid, &walker)?,
        tv_chain_walker: tv_distance(&chain_grid, &walker)?,
        grid,
        chain: chain_grid,
        walker,
        budgets,
    })
}
