//! The `ppp` command line: `simulate`, `fit`, `analyze`, `oracle` and `repro`.
//!
//! Every subcommand except `repro` accepts `--config <file>` holding
//! `key=value` lines (`#` starts a comment). Keys are long flag names; prior
//! hyperparameter names (`xi`, `kappa`, ...) are accepted as shorthands for
//! `--prior key=value`. Explicit flags always win over the file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::analysis::{self, AxisSpec, Bandwidth, DensityGrid, TailCondition};
use crate::error::{Error, Result};
use crate::model::{simulate_data, Dataset, MixtureParams};
use crate::oracle::{self, OracleBudgets, OracleChain, OracleProblem};
use crate::penalty::PenaltySpec;
use crate::priors::{default_hyperparams, Hyperparams, HYPER_KEYS};
use crate::sampler::{run_chains, ChainConfig, InitStrategy, SampleStore};
use crate::svg;

/// Tolerance on `--weights` summing to one.
const WEIGHT_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "ppp",
    version,
    about = "Gaussian mixtures with proximity penalty priors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic dataset from a Gaussian mixture.
    Simulate(SimulateArgs),
    /// Run the penalized sampler and write retained draws.
    Fit(FitArgs),
    /// Summarize sample files: KDEs, 2-D grids, tail probabilities.
    Analyze(AnalyzeArgs),
    /// Compare the sampler against a grid posterior on a two-component problem.
    Oracle(OracleArgs),
    /// Run every command listed in a file, one per line.
    Repro(ReproArgs),
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub means: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub sds: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value = "none")]
    pub penalty: String,
    #[arg(long, default_value_t = 20_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 5_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 2)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// `quantile` or `prior`.
    #[arg(long, default_value = "quantile")]
    pub init: String,
    /// Hyperparameter override, `key=value`; repeatable.
    #[arg(long)]
    pub prior: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct AnalyzeArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub samples: Vec<PathBuf>,
    /// `none` or `ic-mu`.
    #[arg(long, default_value = "none")]
    pub relabel: String,
    /// Column to smooth; repeatable.
    #[arg(long)]
    pub kde: Vec<String>,
    /// `x:y` column pair; repeatable.
    #[arg(long)]
    pub grid2d: Vec<String>,
    /// `col<thr` or `col>thr`, joined with `&`; repeatable.
    #[arg(long)]
    pub tailprob: Vec<String>,
    #[arg(long, default_value = "auto")]
    pub bandwidth: String,
    #[arg(long, default_value_t = analysis::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, default_value_t = 101)]
    pub grid_bins: usize,
    /// Smooth 2-D grids with per-axis automatic bandwidths.
    #[arg(long)]
    pub smooth: bool,
    /// Maxima below this fraction of the tallest are not reported as modes.
    #[arg(long, default_value_t = analysis::MODE_FLOOR)]
    pub mode_floor: f64,
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub out_prefix: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "none")]
    pub penalty: String,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.5")]
    pub weights: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,1")]
    pub variances: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long)]
    pub prior: Vec<String>,
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    pub grid_min: f64,
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    pub grid_max: f64,
    #[arg(long, default_value_t = 101)]
    pub bins: usize,
    #[arg(long, default_value_t = 1_001_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 4_000_000)]
    pub walker_steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub step_size: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = oracle::TV_BUDGET)]
    pub budget: f64,
    #[arg(long, default_value_t = oracle::TV_BUDGET_CHAIN_WALKER)]
    pub budget_chain_walker: f64,
    #[arg(long)]
    pub out_prefix: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct ReproArgs {
    pub file: PathBuf,
    /// Replaces `$OUT` in the listed commands.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

/// Outcome of a subcommand that ran to completion.
#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    BudgetViolated,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Ok => 0,
            Outcome::BudgetViolated => 3,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse(&args) {
        Ok(cli) => cli,
        Err(ParseFailure::Clap(e)) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
        Err(ParseFailure::Config(e)) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

enum ParseFailure {
    Clap(clap::Error),
    Config(Error),
}

fn parse(args: &[OsString]) -> std::result::Result<Cli, ParseFailure> {
    // Required flags may come from the config file, so the first pass only
    // locates `--config` and records which flags were given explicitly.
    let relaxed = Cli::command().mut_subcommands(|s| s.mut_args(|a| a.required(false)));
    let matches = relaxed
        .try_get_matches_from(args)
        .map_err(ParseFailure::Clap)?;
    let extra = match matches.subcommand() {
        Some((name, sub)) => config_args(name, sub).map_err(ParseFailure::Config)?,
        None => Vec::new(),
    };
    let mut merged = args.to_vec();
    merged.extend(extra.into_iter().map(OsString::from));
    let matches = Cli::command()
        .try_get_matches_from(merged)
        .map_err(ParseFailure::Clap)?;
    Cli::from_arg_matches(&matches).map_err(ParseFailure::Clap)
}

/// Reads a `key=value` file. Blank lines and `#` comments are skipped.
pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!("config line {}: expected key=value", lineno + 1))
        })?;
        out.insert(key.trim().replace('_', "-"), value.trim().to_string());
    }
    Ok(out)
}

/// Flags contributed by the config file: only those not given explicitly.
fn config_args(subcommand: &str, matches: &ArgMatches) -> Result<Vec<String>> {
    let Some(path) = matches.try_get_one::<PathBuf>("config").ok().flatten() else {
        return Ok(Vec::new());
    };
    let entries = read_config(path)?;
    let command = Cli::command();
    let sub = command
        .find_subcommand(subcommand)
        .expect("matched subcommand exists");
    let explicit = |id: &str| matches.value_source(id) == Some(ValueSource::CommandLine);
    let explicit_priors: Vec<String> = matches
        .try_get_many::<String>("prior")
        .ok()
        .flatten()
        .map(|v| {
            v.filter_map(|s| s.split_once('=').map(|(k, _)| k.trim().to_string()))
                .collect()
        })
        .unwrap_or_default();

    let mut out = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            return Err(Error::InvalidConfig(
                "config files cannot include other config files".into(),
            ));
        }
        if HYPER_KEYS.contains(&key.replace('-', "_").as_str()) {
            let hyper_key = key.replace('-', "_");
            if sub.get_arguments().all(|a| a.get_id() != "prior") {
                return Err(Error::InvalidConfig(format!(
                    "`{key}` does not apply to {subcommand}"
                )));
            }
            if !explicit_priors.contains(&hyper_key) {
                out.push("--prior".to_string());
                out.push(format!("{hyper_key}={value}"));
            }
            continue;
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| {
                Error::InvalidConfig(format!("unknown config key `{key}` for {subcommand}"))
            })?;
        if explicit(arg.get_id().as_str()) {
            continue;
        }
        let is_switch = matches!(arg.get_action(), clap::ArgAction::SetTrue);
        if is_switch {
            match value.as_str() {
                "true" => out.push(format!("--{key}")),
                "false" => {}
                _ => return Err(Error::Parse(format!("`{key}` must be true or false"))),
            }
        } else if matches!(arg.get_action(), clap::ArgAction::Append)
            || arg.get_num_args().is_some_and(|r| r.max_values() > 1)
        {
            for v in value.split_whitespace() {
                out.push(format!("--{key}={v}"));
            }
        } else {
            out.push(format!("--{key}={value}"));
        }
    }
    Ok(out)
}

pub fn execute(command: Command) -> Result<Outcome> {
    match command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Oracle(a) => cmd_oracle(&a),
        Command::Repro(a) => cmd_repro(&a),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `dir/stem<suffix>` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn prefixed(prefix: &Path, suffix: &str) -> PathBuf {
    let name = prefix
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    prefix.with_file_name(format!("{name}{suffix}"))
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<Outcome> {
    if a.k == 0 {
        return Err(Error::InvalidConfig("--k must be at least 1".into()));
    }
    if a.n == 0 {
        return Err(Error::InvalidConfig("--n must be at least 1".into()));
    }
    for (name, len) in [
        ("means", a.means.len()),
        ("sds", a.sds.len()),
        ("weights", a.weights.len()),
    ] {
        if len != a.k {
            return Err(Error::InvalidConfig(format!(
                "--{name} has {len} entries but --k is {}",
                a.k
            )));
        }
    }
    let total: f64 = a.weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::InvalidConfig(format!(
            "--weights sum to {total}, not 1"
        )));
    }
    if a.sds.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidConfig("--sds must be positive".into()));
    }
    let params = MixtureParams::new(
        a.weights.iter().map(|w| w / total).collect(),
        a.means.clone(),
        a.sds.iter().map(|s| s * s).collect(),
    )?;
    let data = simulate_data(&params, a.n, a.seed)?;
    write_text(&a.out, &data.to_csv_string())?;
    Ok(Outcome::Ok)
}

fn hyperparams_for(data: &Dataset, overrides: &[String]) -> Result<Hyperparams> {
    let mut entries = BTreeMap::new();
    for entry in overrides {
        let (k, v) = entry
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("--prior `{entry}`: expected key=value")))?;
        let k = k.trim().replace('-', "_");
        if !HYPER_KEYS.contains(&k.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "unknown hyperparameter `{k}`; expected one of {}",
                HYPER_KEYS.join(", ")
            )));
        }
        entries.insert(k, v.to_string());
    }
    let mut hyper = match default_hyperparams(data) {
        Ok(h) => h,
        // A constant dataset has no empirical-Bayes default; explicit values
        // for every key still make a valid prior.
        Err(Error::ZeroRange) if HYPER_KEYS.iter().all(|k| entries.contains_key(*k)) => {
            Hyperparams {
                xi: 0.0,
                kappa: 1.0,
                alpha: 1.0,
                g: 1.0,
                h: 1.0,
                dirichlet_delta: 1.0,
            }
        }
        Err(e) => return Err(e),
    };
    hyper.apply_overrides(&entries)?;
    Ok(hyper)
}

pub fn cmd_fit(a: &FitArgs) -> Result<Outcome> {
    let penalty: PenaltySpec = a.penalty.parse()?;
    let init: InitStrategy = a.init.parse()?;
    if a.chains == 0 {
        return Err(Error::InvalidConfig("--chains must be at least 1".into()));
    }
    let data = Dataset::read_csv(&a.data)?;
    let hyper = hyperparams_for(&data, &a.prior)?;
    let config = ChainConfig {
        k: a.k,
        iterations: a.iters,
        burn_in: a.burnin,
        thin: a.thin,
        seed: a.seed,
        penalty,
        hyper,
        init,
        ..ChainConfig::new(a.k, hyper, PenaltySpec::None)
    };
    config.validate()?;

    let started = Instant::now();
    let stores = run_chains(&data, &config, a.chains)?;
    let elapsed = started.elapsed();

    let paths: Vec<PathBuf> = if a.chains == 1 {
        vec![a.out.clone()]
    } else {
        (0..a.chains)
            .map(|i| sibling(&a.out, &format!("_chain{i}.csv")))
            .collect()
    };
    for (store, path) in stores.iter().zip(&paths) {
        write_text(path, &store.to_csv_string())?;
    }

    let mut report = String::new();
    let _ = writeln!(report, "data={}", a.data.display());
    let _ = writeln!(report, "n={}", data.n());
    let _ = writeln!(report, "k={}", config.k);
    let _ = writeln!(report, "penalty={}", config.penalty);
    let _ = writeln!(report, "iters={}", config.iterations);
    let _ = writeln!(report, "burnin={}", config.burn_in);
    let _ = writeln!(report, "thin={}", config.thin);
    let _ = writeln!(report, "chains={}", a.chains);
    let _ = writeln!(report, "seed={}", config.seed);
    let _ = writeln!(report, "init={}", config.init.name());
    report.push_str(&config.hyper.to_key_values());
    for (i, (store, path)) in stores.iter().zip(&paths).enumerate() {
        let r = store.block_rates;
        let _ = writeln!(
            report,
            "chain{i} file={} retained={} acceptance_rate={:.6} accept_weights={:.6} accept_means={:.6} accept_variances={:.6}",
            path.display(),
            store.records.len(),
            store.acceptance_rate,
            r.weights,
            r.means,
            r.variances
        );
    }
    write_text(&sibling(&a.out, "_report.txt"), &report)?;
    eprintln!("wall_time_s={:.3}", elapsed.as_secs_f64());
    Ok(Outcome::Ok)
}

fn kde_for(values: &[f64], bandwidth: Bandwidth, bins: usize) -> Result<(DensityGrid, f64)> {
    let h = match bandwidth {
        Bandwidth::Auto => analysis::silverman_bandwidth(values)?,
        Bandwidth::Fixed(h) => h,
    };
    let axis = AxisSpec::around(values, 3.0, bins)?;
    Ok((analysis::kde_1d(values, Bandwidth::Fixed(h), axis)?, h))
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<Outcome> {
    let bandwidth: Bandwidth = a.bandwidth.parse()?;
    if a.bins < 2 || a.grid_bins < 2 {
        return Err(Error::InvalidConfig("grids need at least two bins".into()));
    }
    if !(0.0..=1.0).contains(&a.mode_floor) {
        return Err(Error::InvalidConfig(
            "--mode-floor must lie in [0, 1]".into(),
        ));
    }
    let relabel = match a.relabel.as_str() {
        "none" => false,
        "ic-mu" => true,
        other => {
            return Err(Error::Parse(format!(
                "--relabel `{other}`: expected none or ic-mu"
            )))
        }
    };
    let pairs = a
        .grid2d
        .iter()
        .map(|s| {
            s.split_once(':')
                .map(|(x, y)| (x.to_string(), y.to_string()))
                .ok_or_else(|| Error::Parse(format!("--grid2d `{s}`: expected <colx>:<coly>")))
        })
        .collect::<Result<Vec<_>>>()?;
    let tails = a
        .tailprob
        .iter()
        .map(|s| {
            s.split('&')
                .map(str::parse::<TailCondition>)
                .collect::<Result<Vec<_>>>()
                .map(|c| (s.clone(), c))
        })
        .collect::<Result<Vec<_>>>()?;

    let stores = a
        .samples
        .iter()
        .map(SampleStore::read_csv)
        .collect::<Result<Vec<_>>>()?;
    let mut store = SampleStore::merge(stores)?;
    if relabel {
        store = analysis::relabel_ic(&store).samples;
    }
    // Resolve every column first so a typo fails before any file is written.
    let known = analysis::column_names(store.k);
    for name in a
        .kde
        .iter()
        .chain(pairs.iter().flat_map(|(x, y)| [x, y]))
        .chain(tails.iter().flat_map(|(_, c)| c.iter().map(|c| &c.column)))
    {
        if !known.contains(name) {
            return Err(Error::UnknownColumn(name.clone()));
        }
    }

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "samples={}",
        a.samples
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    let _ = writeln!(summary, "draws={}", store.records.len());
    let _ = writeln!(summary, "k={}", store.k);
    let _ = writeln!(summary, "relabel={}", a.relabel);
    let _ = writeln!(summary, "accept_mu_fraction={:.6}", store.acceptance_rate);

    for name in &a.kde {
        let values = analysis::column(&store, name)?;
        let (grid, h) = kde_for(&values, bandwidth, a.bins)?;
        let stem = format!("_kde_{}", file_safe(name));
        write_text(
            &prefixed(&a.out_prefix, &format!("{stem}.csv")),
            &grid.to_csv_string(),
        )?;
        if a.svg {
            write_text(
                &prefixed(&a.out_prefix, &format!("{stem}.svg")),
                &svg::line_plot(&grid, name),
            )?;
        }
        let modes: Vec<String> = grid
            .modes(a.mode_floor)
            .iter()
            .map(|m| format!("{m:.6}"))
            .collect();
        let _ = writeln!(
            summary,
            "kde {name} bandwidth={h:.6} argmax={:.6} modes={}",
            grid.argmax(),
            modes.join(",")
        );
    }

    for (x, y) in &pairs {
        let xs = analysis::column(&store, x)?;
        let ys = analysis::column(&store, y)?;
        let x_axis = AxisSpec::around(&xs, 1.0, a.grid_bins)?;
        let y_axis = AxisSpec::around(&ys, 1.0, a.grid_bins)?;
        let smoothing = a.smooth.then_some((Bandwidth::Auto, Bandwidth::Auto));
        let grid = analysis::grid_2d(&xs, &ys, x_axis, y_axis, smoothing)?;
        let stem = format!("_grid2d_{}_{}", file_safe(x), file_safe(y));
        write_text(
            &prefixed(&a.out_prefix, &format!("{stem}.csv")),
            &grid.to_csv_string(),
        )?;
        if a.svg {
            write_text(
                &prefixed(&a.out_prefix, &format!("{stem}.svg")),
                &svg::level_plot(&grid, &format!("{x} vs {y}")),
            )?;
        }
        let _ = writeln!(summary, "grid2d {x}:{y} bins={}", a.grid_bins);
    }

    for (expr, conditions) in &tails {
        let p = analysis::joint_tail_probability(&store, conditions)?;
        let _ = writeln!(summary, "tailprob {expr} = {p:.6}");
    }

    write_text(&prefixed(&a.out_prefix, "_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(Outcome::Ok)
}

pub fn cmd_oracle(a: &OracleArgs) -> Result<Outcome> {
    let penalty: PenaltySpec = a.penalty.parse()?;
    let data = Dataset::read_csv(&a.data)?;
    let hyper = hyperparams_for(&data, &a.prior)?;
    let problem = OracleProblem {
        data,
        weights: a.weights.clone(),
        variances: a.variances.clone(),
        beta: a.beta,
        hyper,
        penalty,
    };
    problem.validate()?;
    let axis = AxisSpec::new(a.grid_min, a.grid_max, a.bins)?;
    if a.thin == 0 || a.burnin >= a.iters {
        return Err(Error::InvalidConfig(
            "need thin >= 1 and burnin < iters".into(),
        ));
    }
    let chain = OracleChain {
        iterations: a.iters,
        burn_in: a.burnin,
        thin: a.thin,
        seed: a.seed,
    };
    let budgets = OracleBudgets {
        grid_chain: a.budget,
        grid_walker: a.budget,
        chain_walker: a.budget_chain_walker,
    };
    let report = oracle::run_oracle(&problem, axis, chain, a.walker_steps, a.step_size, budgets)?;
    let summary = report.summary();
    if let Some(prefix) = &a.out_prefix {
        write_text(&prefixed(prefix, "_report.txt"), &summary)?;
        write_text(
            &prefixed(prefix, "_grid.csv"),
            &report.grid.grid.to_csv_string(),
        )?;
        write_text(
            &prefixed(prefix, "_chain.csv"),
            &report.chain.to_csv_string(),
        )?;
        write_text(
            &prefixed(prefix, "_walker.csv"),
            &report.walker.to_csv_string(),
        )?;
    }
    print!("{summary}");
    Ok(if report.passed() {
        Outcome::Ok
    } else {
        Outcome::BudgetViolated
    })
}

/// Commands in a repro file: one per line, whitespace-separated, `#` comments.
pub fn parse_repro(text: &str, out_dir: &Path) -> Vec<Vec<String>> {
    let out = out_dir.display().to_string();
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|w| w.replace("$OUT", &out))
                .collect()
        })
        .collect()
}

pub fn cmd_repro(a: &ReproArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&a.file).map_err(|e| Error::io(&a.file, e))?;
    let commands = parse_repro(&text, &a.out_dir);
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let mut outcome = Outcome::Ok;
    for words in commands {
        if words.first().map(String::as_str) == Some("repro") {
            return Err(Error::InvalidConfig("repro files cannot call repro".into()));
        }
        eprintln!("+ ppp {}", words.join(" "));
        let argv: Vec<OsString> = std::iter::once("ppp".to_string())
            .chain(words)
            .map(OsString::from)
            .collect();
        let cli = parse(&argv).map_err(|e| match e {
            ParseFailure::Clap(e) => Error::Parse(e.to_string()),
            ParseFailure::Config(e) => e,
        })?;
        if execute(cli.command)? == Outcome::BudgetViolated {
            outcome = Outcome::BudgetViolated;
        }
    }
    Ok(outcome)
}
