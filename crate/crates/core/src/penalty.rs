//! Proximity penalties: the joint prior factor that re-weights parameter
//! configurations by how close the components are to one another.
//!
//! All values are log penalties. A penalty of exactly zero is represented by
//! `f64::NEG_INFINITY`; such states are valid inputs but must always be
//! rejected by the sampler.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::MixtureParams;

pub const GRAMMAR: &str = "none | absdiff:<mu|sigma2|pi>:s=<real> | \
threshold:<mu|sigma2|pi>:delta=<real> | maxmin | product(<spec>,<spec>,...)";

/// Which component-specific parameter a penalty compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Target {
    Means,
    Variances,
    Weights,
}

impl Target {
    pub fn select<'a>(&self, params: &'a MixtureParams) -> &'a [f64] {
        match self {
            Target::Means => &params.means,
            Target::Variances => &params.variances,
            Target::Weights => &params.weights,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Target::Means => "mu",
            Target::Variances => "sigma2",
            Target::Weights => "pi",
        }
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mu" | "means" => Ok(Target::Means),
            "sigma2" | "variances" => Ok(Target::Variances),
            "pi" | "weights" => Ok(Target::Weights),
            other => Err(Error::Parse(format!(
                "unknown penalty target `{other}` (expected mu, sigma2 or pi)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PenaltySpec {
    /// Constant penalty; the sampler reduces to plain Gibbs.
    None,
    /// `(min_{k != l} |phi_k - phi_l|)^s`. With `s = 1` this rewards
    /// separation; with `s = -1` it rewards similarity.
    AbsDiffPower { target: Target, s: f64 },
    /// Indicator that every pairwise gap exceeds `delta`.
    Threshold { target: Target, delta: f64 },
    /// `max_j min_{k != l} |b_jk - b_jl|` over a rows x components
    /// coefficient matrix. `shape = None` accepts any shape.
    MaxMinMatrix { shape: Option<(usize, usize)> },
    /// Product of the factor penalties.
    Product(Vec<PenaltySpec>),
}

/// Row-major `rows x cols` matrix; row j holds one coefficient across the
/// `cols` components.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CoefficientMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(Error::InvalidParams(format!(
                "coefficient matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParams("ragged coefficient matrix".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.cols..(j + 1) * self.cols]
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * a).collect(),
            ..self.clone()
        }
    }
}

/// What a penalty is evaluated on.
#[derive(Clone, Copy, Debug)]
pub enum PenaltyInput<'a> {
    Mixture(&'a MixtureParams),
    Coefficients(&'a CoefficientMatrix),
}

impl<'a> From<&'a MixtureParams> for PenaltyInput<'a> {
    fn from(p: &'a MixtureParams) -> Self {
        PenaltyInput::Mixture(p)
    }
}

impl<'a> From<&'a CoefficientMatrix> for PenaltyInput<'a> {
    fn from(m: &'a CoefficientMatrix) -> Self {
        PenaltyInput::Coefficients(m)
    }
}

impl PenaltyInput<'_> {
    fn describe(&self) -> String {
        match self {
            PenaltyInput::Mixture(p) => format!("mixture parameters (K={})", p.k()),
            PenaltyInput::Coefficients(m) => {
                let (r, c) = m.shape();
                format!("a {r}x{c} coefficient matrix")
            }
        }
    }
}

/// Which mixture parameter blocks a penalty depends on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TargetSet {
    pub means: bool,
    pub variances: bool,
    pub weights: bool,
}

impl TargetSet {
    pub fn contains(&self, target: Target) -> bool {
        match target {
            Target::Means => self.means,
            Target::Variances => self.variances,
            Target::Weights => self.weights,
        }
    }

    fn insert(&mut self, target: Target) {
        match target {
            Target::Means => self.means = true,
            Target::Variances => self.variances = true,
            Target::Weights => self.weights = true,
        }
    }
}

/// Smallest gap between any two entries; `None` for fewer than two entries.
pub fn min_pairwise_gap(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).map(|w| w[1] - w[0]).reduce(f64::min)
}

fn log_power(gap: f64, s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else if gap == 0.0 {
        if s > 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        s * gap.ln()
    }
}

impl PenaltySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PenaltySpec::None | PenaltySpec::MaxMinMatrix { .. } => Ok(()),
            PenaltySpec::AbsDiffPower { s, .. } if !s.is_finite() => Err(Error::InvalidConfig(
                format!("exponent s must be finite, got {s}"),
            )),
            PenaltySpec::AbsDiffPower { .. } => Ok(()),
            PenaltySpec::Threshold { delta, .. } => {
                if delta.is_finite() && *delta > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!(
                        "threshold delta must be positive, got {delta}"
                    )))
                }
            }
            PenaltySpec::Product(factors) => {
                if factors.is_empty() {
                    return Err(Error::InvalidConfig(
                        "product needs at least one factor".into(),
                    ));
                }
                factors.iter().try_for_each(PenaltySpec::validate)
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, PenaltySpec::None)
    }

    /// Mixture blocks the penalty reads. `MaxMinMatrix` reads none of them.
    pub fn targets(&self) -> TargetSet {
        let mut set = TargetSet::default();
        self.collect_targets(&mut set);
        set
    }

    fn collect_targets(&self, set: &mut TargetSet) {
        match self {
            PenaltySpec::None | PenaltySpec::MaxMinMatrix { .. } => {}
            PenaltySpec::AbsDiffPower { target, .. } | PenaltySpec::Threshold { target, .. } => {
                set.insert(*target)
            }
            PenaltySpec::Product(factors) => factors.iter().for_each(|f| f.collect_targets(set)),
        }
    }

    /// True when the spec can be evaluated on mixture parameters.
    pub fn applies_to_mixture(&self) -> bool {
        match self {
            PenaltySpec::MaxMinMatrix { .. } => false,
            PenaltySpec::Product(factors) => factors.iter().all(PenaltySpec::applies_to_mixture),
            _ => true,
        }
    }
}

/// `log p2` for `spec` at `input`; `NEG_INFINITY` when the penalty is zero.
pub fn eval_log_penalty<'a>(spec: &PenaltySpec, input: impl Into<PenaltyInput<'a>>) -> Result<f64> {
    eval(spec, input.into())
}

fn eval(spec: &PenaltySpec, input: PenaltyInput<'_>) -> Result<f64> {
    let mismatch = || Error::SelectorMismatch {
        penalty: spec.to_string(),
        input: input.describe(),
    };
    match (spec, input) {
        (PenaltySpec::None, _) => Ok(0.0),
        (PenaltySpec::AbsDiffPower { target, s }, PenaltyInput::Mixture(p)) => {
            Ok(min_pairwise_gap(target.select(p)).map_or(0.0, |gap| log_power(gap, *s)))
        }
        (PenaltySpec::Threshold { target, delta }, PenaltyInput::Mixture(p)) => {
            Ok(match min_pairwise_gap(target.select(p)) {
                Some(gap) if gap <= *delta => f64::NEG_INFINITY,
                _ => 0.0,
            })
        }
        (PenaltySpec::MaxMinMatrix { shape }, PenaltyInput::Coefficients(m)) => {
            if shape.is_some_and(|s| s != m.shape()) {
                return Err(mismatch());
            }
            let (rows, cols) = m.shape();
            if cols < 2 {
                return Ok(0.0);
            }
            let best = (0..rows)
                .filter_map(|j| min_pairwise_gap(m.row(j)))
                .fold(0.0, f64::max);
            Ok(log_power(best, 1.0))
        }
        (PenaltySpec::Product(factors), input) => {
            let mut total = 0.0;
            for f in factors {
                let v = eval(f, input)?;
                if v == f64::NEG_INFINITY {
                    return Ok(v);
                }
                total += v;
            }
            Ok(total)
        }
        _ => Err(mismatch()),
    }
}

/// `min(1, exp(proposed - current))` on cached log penalties.
pub fn acceptance_from_logs(proposed: f64, current: f64) -> Result<f64> {
    if current == f64::NEG_INFINITY || current.is_nan() {
        return Err(Error::InvalidCurrentState);
    }
    if proposed == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if proposed >= current {
        // Also covers proposed == current == +inf.
        return Ok(1.0);
    }
    Ok((proposed - current).exp())
}

/// Metropolis-Hastings acceptance probability for a proposal drawn from the
/// likelihood-times-independent-prior conditional: the penalty ratio.
pub fn acceptance_probability<'a, 'b>(
    spec: &PenaltySpec,
    proposed: impl Into<PenaltyInput<'a>>,
    current: impl Into<PenaltyInput<'b>>,
) -> Result<f64> {
    let current = eval(spec, current.into())?;
    if current == f64::NEG_INFINITY {
        return Err(Error::InvalidCurrentState);
    }
    let proposed = eval(spec, proposed.into())?;
    acceptance_from_logs(proposed, current)
}

impl fmt::Display for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PenaltySpec::None => write!(f, "none"),
            PenaltySpec::AbsDiffPower { target, s } => write!(f, "absdiff:{}:s={s}", target.name()),
            PenaltySpec::Threshold { target, delta } => {
                write!(f, "threshold:{}:delta={delta}", target.name())
            }
            PenaltySpec::MaxMinMatrix { shape: None } => write!(f, "maxmin"),
            PenaltySpec::MaxMinMatrix {
                shape: Some((r, c)),
            } => write!(f, "maxmin:{r}x{c}"),
            PenaltySpec::Product(factors) => {
                write!(f, "product(")?;
                for (i, factor) in factors.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{factor}")?;
                }
                write!(f, ")")
            }
        }
    }
}

fn grammar_error(input: &str, why: &str) -> Error {
    Error::Parse(format!("penalty `{input}`: {why}; expected {GRAMMAR}"))
}

fn parse_keyed_real(input: &str, field: &str, key: &str) -> Result<f64> {
    let raw = field
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| {
            grammar_error(input, &format!("expected `{key}=<real>`, found `{field}`"))
        })?;
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| grammar_error(input, &format!("`{raw}` is not a finite real")))
}

fn parse_target(input: &str, field: &str) -> Result<Target> {
    field
        .parse()
        .map_err(|e: Error| grammar_error(input, &e.to_string()))
}

/// Splits on commas that are not nested inside parentheses.
fn split_top_level(body: &str) -> Option<Vec<&str>> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in body.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.checked_sub(1)?,
            ',' if depth == 0 => {
                parts.push(&body[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return None;
    }
    parts.push(&body[start..]);
    Some(parts)
}

impl FromStr for PenaltySpec {
    type Err = Error;

    fn from_str(raw: &str) -> Result<Self> {
        let s = raw.trim();
        let spec = if s == "none" {
            PenaltySpec::None
        } else if s == "maxmin" {
            PenaltySpec::MaxMinMatrix { shape: None }
        } else if let Some(dims) = s.strip_prefix("maxmin:") {
            let (r, c) = dims
                .split_once('x')
                .and_then(|(r, c)| Some((r.parse().ok()?, c.parse().ok()?)))
                .ok_or_else(|| grammar_error(raw, "bad maxmin shape, expected maxmin:<p>x<K>"))?;
            PenaltySpec::MaxMinMatrix {
                shape: Some((r, c)),
            }
        } else if let Some(body) = s.strip_prefix("product(").and_then(|b| b.strip_suffix(')')) {
            let parts = split_top_level(body)
                .ok_or_else(|| grammar_error(raw, "unbalanced parentheses"))?;
            if parts.iter().any(|p| p.trim().is_empty()) {
                return Err(grammar_error(raw, "empty product factor"));
            }
            PenaltySpec::Product(parts.into_iter().map(str::parse).collect::<Result<_>>()?)
        } else {
            let fields: Vec<&str> = s.split(':').collect();
            match fields.as_slice() {
                ["absdiff", target, s_field] => PenaltySpec::AbsDiffPower {
                    target: parse_target(raw, target)?,
                    s: parse_keyed_real(raw, s_field, "s")?,
                },
                ["threshold", target, d_field] => PenaltySpec::Threshold {
                    target: parse_target(raw, target)?,
                    delta: parse_keyed_real(raw, d_field, "delta")?,
                },
                _ => return Err(grammar_error(raw, "unrecognized form")),
            }
        };
        spec.validate()
            .map_err(|e| grammar_error(raw, &e.to_string()))?;
        Ok(spec)
    }
}
