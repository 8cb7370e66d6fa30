//! Post-processing of retained draws: relabeling by ordered means, pooled
//! label-free samples, kernel density estimates, 2-D histograms and scalar
//! tail summaries.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::quantile_sorted;
use crate::penalty::Target;
use crate::sampler::{SampleRecord, SampleStore};

/// Cells beyond this many bandwidths from a point get no kernel mass.
const KERNEL_CUTOFF: f64 = 9.0;

/// Default resolution for data-driven axes.
pub const DEFAULT_BINS: usize = 512;

/// Maxima lower than this fraction of the tallest cell are treated as noise
/// by [`DensityGrid::modes`].
pub const MODE_FLOOR: f64 = 0.05;

/// Draws relabeled so that means increase within every draw.
#[derive(Clone, Debug, PartialEq)]
pub struct RelabeledSamples {
    pub samples: SampleStore,
    /// `permutations[d][j]` is the original label now at position `j`.
    pub permutations: Vec<Vec<usize>>,
}

/// Sorts every draw by its means, carrying weights and variances along.
/// Ties keep their original order.
pub fn relabel_ic(samples: &SampleStore) -> RelabeledSamples {
    let mut out = samples.clone();
    let permutations = out
        .records
        .iter_mut()
        .map(|r| {
            let mut perm: Vec<usize> = (0..r.means.len()).collect();
            perm.sort_by(|&a, &b| r.means[a].total_cmp(&r.means[b]));
            let pick = |v: &[f64]| perm.iter().map(|&j| v[j]).collect::<Vec<_>>();
            r.means = pick(&r.means);
            r.weights = pick(&r.weights);
            r.variances = pick(&r.variances);
            perm
        })
        .collect();
    RelabeledSamples {
        samples: out,
        permutations,
    }
}

fn block(record: &SampleRecord, parameter: Target) -> &[f64] {
    match parameter {
        Target::Means => &record.means,
        Target::Variances => &record.variances,
        Target::Weights => &record.weights,
    }
}

/// Concatenates the K columns of one parameter, column after column.
pub fn pool_generic(samples: &SampleStore, parameter: Target) -> Vec<f64> {
    (0..samples.k)
        .flat_map(|j| samples.records.iter().map(move |r| block(r, parameter)[j]))
        .collect()
}

/// Per-draw summaries used by the figure reproductions.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedColumns {
    /// `|mu_1 - mu_2|`; empty when K < 2.
    pub absdiff_mu: Vec<f64>,
    pub max_sigma2: Vec<f64>,
    /// `gaps[j][d] = mu_(j+2) - mu_(j+1)` of draw `d` after sorting the means.
    pub gaps: Vec<Vec<f64>>,
}

pub fn derived_columns(samples: &SampleStore) -> DerivedColumns {
    let k = samples.k;
    let absdiff_mu = if k >= 2 {
        samples
            .records
            .iter()
            .map(|r| (r.means[0] - r.means[1]).abs())
            .collect()
    } else {
        Vec::new()
    };
    let max_sigma2 = samples
        .records
        .iter()
        .map(|r| {
            r.variances
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let mut gaps = vec![Vec::with_capacity(samples.records.len()); k.saturating_sub(1)];
    for r in &samples.records {
        let mut sorted = r.means.clone();
        sorted.sort_by(f64::total_cmp);
        for (j, w) in sorted.windows(2).enumerate() {
            gaps[j].push(w[1] - w[0]);
        }
    }
    DerivedColumns {
        absdiff_mu,
        max_sigma2,
        gaps,
    }
}

/// Every column name `column` accepts for a store with `k` components.
pub fn column_names(k: usize) -> Vec<String> {
    let mut names: Vec<String> = SampleStore::header(k)
        .split(',')
        .map(String::from)
        .collect();
    if k >= 2 {
        names.push("absdiff_mu".into());
    }
    names.push("max_sigma2".into());
    names.extend((1..k).map(|j| format!("gap_mu_{}_{}", j + 1, j)));
    names.extend(["mu_pooled", "sigma2_pooled", "pi_pooled"].map(String::from));
    names
}

fn component_index(suffix: &str, k: usize) -> Option<usize> {
    let j: usize = suffix.parse().ok()?;
    (1..=k).contains(&j).then(|| j - 1)
}

/// Values of a persisted or derived column.
pub fn column(samples: &SampleStore, name: &str) -> Result<Vec<f64>> {
    let k = samples.k;
    let unknown = || Error::UnknownColumn(name.to_string());
    let per_draw = |f: &dyn Fn(&SampleRecord) -> f64| samples.records.iter().map(f).collect();
    let values = match name {
        "iter" => per_draw(&|r| r.iter as f64),
        "accept_mu" => per_draw(&|r| r.accept_mu as u8 as f64),
        "beta" => per_draw(&|r| r.beta),
        "absdiff_mu" if k >= 2 => derived_columns(samples).absdiff_mu,
        "max_sigma2" => derived_columns(samples).max_sigma2,
        "mu_pooled" => pool_generic(samples, Target::Means),
        "sigma2_pooled" => pool_generic(samples, Target::Variances),
        "pi_pooled" => pool_generic(samples, Target::Weights),
        _ => {
            if let Some(rest) = name.strip_prefix("gap_mu_") {
                let (upper, lower) = rest.split_once('_').ok_or_else(unknown)?;
                let upper = component_index(upper, k).ok_or_else(unknown)?;
                let lower = component_index(lower, k).ok_or_else(unknown)?;
                if upper != lower + 1 {
                    return Err(unknown());
                }
                derived_columns(samples).gaps.swap_remove(lower)
            } else {
                let (prefix, suffix) = name.rsplit_once('_').ok_or_else(unknown)?;
                let parameter = match prefix {
                    "pi" => Target::Weights,
                    "mu" => Target::Means,
                    "sigma2" => Target::Variances,
                    _ => return Err(unknown()),
                };
                let j = component_index(suffix, k).ok_or_else(unknown)?;
                per_draw(&|r| block(r, parameter)[j])
            }
        }
    };
    Ok(values)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    Less,
    Greater,
}

impl Comparison {
    pub fn holds(&self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::Less => value < threshold,
            Comparison::Greater => value > threshold,
        }
    }

    pub fn symbol(&self) -> char {
        match self {
            Comparison::Less => '<',
            Comparison::Greater => '>',
        }
    }
}

/// Fraction of `values` satisfying `value op threshold`.
pub fn tail_probability(values: &[f64], op: Comparison, threshold: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::DegenerateSample(
            "tail probability of an empty sample".into(),
        ));
    }
    let hits = values.iter().filter(|&&v| op.holds(v, threshold)).count();
    Ok(hits as f64 / values.len() as f64)
}

/// `column op threshold`, e.g. `gap_mu_3_2<0.3`.
#[derive(Clone, Debug, PartialEq)]
pub struct TailCondition {
    pub column: String,
    pub op: Comparison,
    pub threshold: f64,
}

impl FromStr for TailCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let pos = s
            .find(['<', '>'])
            .ok_or_else(|| Error::Parse(format!("tail condition `{s}` needs `<` or `>`")))?;
        let op = if s.as_bytes()[pos] == b'<' {
            Comparison::Less
        } else {
            Comparison::Greater
        };
        let column = s[..pos].trim();
        let threshold = s[pos + 1..]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("tail condition `{s}`: bad threshold")))?;
        if column.is_empty() {
            return Err(Error::Parse(format!(
                "tail condition `{s}`: missing column"
            )));
        }
        Ok(Self {
            column: column.to_string(),
            op,
            threshold,
        })
    }
}

/// Fraction of draws satisfying every condition (conditions joined by `&`).
pub fn joint_tail_probability(samples: &SampleStore, conditions: &[TailCondition]) -> Result<f64> {
    let columns = conditions
        .iter()
        .map(|c| column(samples, &c.column))
        .collect::<Result<Vec<_>>>()?;
    let n = columns.first().map_or(0, Vec::len);
    if n == 0 || columns.iter().any(|c| c.len() != n) {
        return Err(Error::DegenerateSample(
            "joint tail probability needs non-empty columns of equal length".into(),
        ));
    }
    let hits = (0..n)
        .filter(|&i| {
            conditions
                .iter()
                .zip(&columns)
                .all(|(c, col)| c.op.holds(col[i], c.threshold))
        })
        .count();
    Ok(hits as f64 / n as f64)
}

/// A regular partition of `[min, max]` into `bins` cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub bins: usize,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, bins: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) || bins == 0 {
            return Err(Error::GridMismatch(format!(
                "invalid axis [{min}, {max}] with {bins} bins"
            )));
        }
        Ok(Self { min, max, bins })
    }

    /// `[min - pad*sd, max + pad*sd]` of `values`.
    pub fn around(values: &[f64], pad_sd: f64, bins: usize) -> Result<Self> {
        let (lo, hi) = min_max(values);
        let sd = sample_sd(values);
        if !(hi > lo) {
            return Err(Error::DegenerateSample("all values are equal".into()));
        }
        Self::new(lo - pad_sd * sd, hi + pad_sd * sd, bins)
    }

    pub fn width(&self) -> f64 {
        (self.max - self.min) / self.bins as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins).map(|i| self.center(i)).collect()
    }

    /// Cell containing `x`; the upper edge belongs to the last cell.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.min && x <= self.max) {
            return None;
        }
        let i = ((x - self.min) / (self.max - self.min) * self.bins as f64) as usize;
        Some(i.min(self.bins - 1))
    }
}

/// Normalized masses on a 1-D or 2-D regular grid. 2-D masses are stored
/// x-major: `masses[ix * ny + iy]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub axes: Vec<AxisSpec>,
    pub masses: Vec<f64>,
}

impl DensityGrid {
    /// Normalizes non-negative `weights` into a grid.
    pub fn from_weights(axes: Vec<AxisSpec>, weights: Vec<f64>) -> Result<Self> {
        let cells: usize = axes.iter().map(|a| a.bins).product();
        if axes.is_empty() || axes.len() > 2 || weights.len() != cells {
            return Err(Error::GridMismatch(format!(
                "{} weights for {} axes with {cells} cells",
                weights.len(),
                axes.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::EmptyGrid);
        }
        let masses = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { axes, masses })
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.masses[ix * self.axes[1].bins + iy]
    }

    /// Marginal over the second axis (2-D) or a copy (1-D).
    pub fn marginal_x(&self) -> Vec<f64> {
        if self.dimension() == 1 {
            return self.masses.clone();
        }
        self.masses
            .chunks(self.axes[1].bins)
            .map(|row| row.iter().sum())
            .collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        let ny = self.axes[1].bins;
        let mut out = vec![0.0; ny];
        for row in self.masses.chunks(ny) {
            for (o, m) in out.iter_mut().zip(row) {
                *o += m;
            }
        }
        out
    }

    /// Swaps the two axes of a 2-D grid.
    pub fn transposed(&self) -> Self {
        assert_eq!(self.dimension(), 2);
        let (nx, ny) = (self.axes[0].bins, self.axes[1].bins);
        let mut masses = vec![0.0; nx * ny];
        for ix in 0..nx {
            for iy in 0..ny {
                masses[iy * nx + ix] = self.masses[ix * ny + iy];
            }
        }
        Self {
            axes: vec![self.axes[1], self.axes[0]],
            masses,
        }
    }

    /// Cell centers of strict local maxima of a 1-D grid. A plateau counts
    /// once, at its midpoint, when both neighbours are lower.
    pub fn local_maxima(&self) -> Vec<f64> {
        assert_eq!(
            self.dimension(),
            1,
            "local maxima are defined for 1-D grids"
        );
        let m = &self.masses;
        let axis = self.axes[0];
        let mut out = Vec::new();
        let mut i = 0;
        while i < m.len() {
            let mut j = i;
            while j + 1 < m.len() && m[j + 1] == m[i] {
                j += 1;
            }
            let left_lower = i == 0 || m[i - 1] < m[i];
            let right_lower = j + 1 == m.len() || m[j + 1] < m[i];
            if left_lower && right_lower && m[i] > 0.0 && !(i == 0 && j + 1 == m.len()) {
                out.push(axis.center((i + j) / 2));
            }
            i = j + 1;
        }
        out
    }

    /// Local maxima whose height is at least `floor` times the global maximum.
    pub fn modes(&self, floor: f64) -> Vec<f64> {
        let top = self.masses.iter().cloned().fold(0.0, f64::max);
        let axis = self.axes[0];
        self.local_maxima()
            .into_iter()
            .filter(|&x| self.masses[axis.index_of(x).expect("center lies on axis")] >= floor * top)
            .collect()
    }

    /// Cell center with the largest mass (first on ties) of a 1-D grid.
    pub fn argmax(&self) -> f64 {
        let (i, _) =
            self.masses
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &m)| {
                    if m > best.1 {
                        (i, m)
                    } else {
                        best
                    }
                });
        self.axes[0].center(i)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        match self.dimension() {
            1 => {
                out.push_str("x,mass\n");
                for (x, m) in self.axes[0].centers().iter().zip(&self.masses) {
                    let _ = writeln!(out, "{x},{m}");
                }
            }
            _ => {
                out.push_str("x,y,mass\n");
                let ys = self.axes[1].centers();
                for (ix, x) in self.axes[0].centers().iter().enumerate() {
                    for (iy, y) in ys.iter().enumerate() {
                        let _ = writeln!(out, "{x},{y},{}", self.at(ix, iy));
                    }
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    /// `0.9 min(sd, IQR/1.34) n^(-1/5)`.
    Auto,
    Fixed(f64),
}

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Bandwidth::Auto);
        }
        match s.parse::<f64>() {
            Ok(h) if h.is_finite() && h > 0.0 => Ok(Bandwidth::Fixed(h)),
            _ => Err(Error::Parse(format!(
                "bandwidth `{s}` must be `auto` or a positive real"
            ))),
        }
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Silverman's rule of thumb. Falls back to the standard deviation when the
/// interquartile range is zero.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::DegenerateSample(
            "bandwidth needs at least two values".into(),
        ));
    }
    let sd = sample_sd(values);
    if !(sd > 0.0) {
        return Err(Error::DegenerateSample("all values are equal".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (values.len() as f64).powf(-0.2))
}

fn resolve_bandwidth(values: &[f64], bandwidth: Bandwidth) -> Result<f64> {
    match bandwidth {
        Bandwidth::Auto => silverman_bandwidth(values),
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => Ok(h),
        Bandwidth::Fixed(h) => Err(Error::InvalidConfig(format!(
            "bandwidth must be positive, got {h}"
        ))),
    }
}

/// Adds a Gaussian kernel of width `h` at `v` to cell-center weights.
fn add_kernel(weights: &mut [f64], axis: &AxisSpec, v: f64, h: f64) {
    let width = axis.width();
    let lo = ((v - KERNEL_CUTOFF * h - axis.min) / width - 0.5)
        .floor()
        .max(0.0) as usize;
    let hi = ((v + KERNEL_CUTOFF * h - axis.min) / width + 0.5).ceil();
    if hi < 0.0 || lo >= axis.bins {
        return;
    }
    let hi = (hi as usize).min(axis.bins - 1);
    for (i, w) in weights.iter_mut().enumerate().take(hi + 1).skip(lo) {
        let z = (axis.center(i) - v) / h;
        *w += (-0.5 * z * z).exp();
    }
}

/// Gaussian-kernel density of `values` at the cell centers of `axis`,
/// normalized to unit total mass over the cells.
pub fn kde_1d(values: &[f64], bandwidth: Bandwidth, axis: AxisSpec) -> Result<DensityGrid> {
    if values.len() < 2 {
        return Err(Error::DegenerateSample(
            "KDE needs at least two values".into(),
        ));
    }
    let (lo, hi) = min_max(values);
    if !(hi > lo) {
        return Err(Error::DegenerateSample("all values are equal".into()));
    }
    let h = resolve_bandwidth(values, bandwidth)?;
    let mut weights = vec![0.0; axis.bins];
    for &v in values {
        add_kernel(&mut weights, &axis, v, h);
    }
    DensityGrid::from_weights(vec![axis], weights)
}

/// Normalized histogram of the values inside `axis`.
pub fn histogram_1d(values: &[f64], axis: AxisSpec) -> Result<DensityGrid> {
    let mut counts = vec![0.0; axis.bins];
    for &v in values {
        if let Some(i) = axis.index_of(v) {
            counts[i] += 1.0;
        }
    }
    DensityGrid::from_weights(vec![axis], counts)
}

/// Normalized 2-D histogram of the pairs inside both axes, optionally
/// smoothed with a product Gaussian kernel (one bandwidth per axis).
pub fn grid_2d(
    xs: &[f64],
    ys: &[f64],
    x_axis: AxisSpec,
    y_axis: AxisSpec,
    smoothing: Option<(Bandwidth, Bandwidth)>,
) -> Result<DensityGrid> {
    if xs.len() != ys.len() {
        return Err(Error::GridMismatch(format!(
            "x has {} values but y has {}",
            xs.len(),
            ys.len()
        )));
    }
    let (nx, ny) = (x_axis.bins, y_axis.bins);
    let mut weights = vec![0.0; nx * ny];
    match smoothing {
        None => {
            for (&x, &y) in xs.iter().zip(ys) {
                if let (Some(ix), Some(iy)) = (x_axis.index_of(x), y_axis.index_of(y)) {
                    weights[ix * ny + iy] += 1.0;
                }
            }
        }
        Some((bx, by)) => {
            let hx = resolve_bandwidth(xs, bx)?;
            let hy = resolve_bandwidth(ys, by)?;
            let mut kx = vec![0.0; nx];
            let mut ky = vec![0.0; ny];
            for (&x, &y) in xs.iter().zip(ys) {
                kx.iter_mut().for_each(|v| *v = 0.0);
                ky.iter_mut().for_each(|v| *v = 0.0);
                add_kernel(&mut kx, &x_axis, x, hx);
                add_kernel(&mut ky, &y_axis, y, hy);
                for (ix, wx) in kx.iter().enumerate().filter(|(_, w)| **w > 0.0) {
                    for (iy, wy) in ky.iter().enumerate() {
                        weights[ix * ny + iy] += wx * wy;
                    }
                }
            }
        }
    }
    DensityGrid::from_weights(vec![x_axis, y_axis], weights)
        .map_err(|_| Error::DegenerateSample("no points fall inside the grid".into()))
}
