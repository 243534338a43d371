//! The cutoff schedule and Monte-Carlo brackets of the total variation
//! distance between `X_k` and the stationary law.
//!
//! Lower bounds evaluate a single event (a centered ball), so any estimate of
//! `P(stationary in B) - P(X_k in B)` bounds the distance from below. Upper
//! bounds come from a coupling: once every coordinate has been updated, the
//! noise values at the last update of each coordinate are shifted so that the
//! two chains meet, and the coupling fails with probability equal to the total
//! variation of the noise under that shift.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{exact_crossing, exact_tv_at};
use crate::model::{Model, NoiseKind, ScanPolicy, StateVec};
use crate::sphere::{AlphaEstimate, SphereState};
use crate::stationary::{sample_stationary_with, TruncationPolicy};
use crate::stats::{quantile, sorted, wilson_interval, MeanVar};
use crate::streams::{derive_seed, stream_rng};

/// Minimum replica count for the Monte-Carlo bounds.
pub const MIN_BOUND_REPLICAS: usize = 1_000;
/// Width of the confidence intervals in standard errors.
pub const BOUND_Z: f64 = 3.0;
/// Number of radii in the default grid.
pub const RADIUS_GRID_LEN: usize = 10;

const TAG_STATIONARY: u64 = 1;
const TAG_FORWARD: u64 = 2;
const TAG_PILOT: u64 = 3;
const TAG_COUPLING: u64 = 4;

/// `k = round((ln n + beta sqrt(ln n)) / (-alpha))`, ties to even, at least 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffSchedule {
    pub ln_n: f64,
    pub beta: f64,
    pub alpha: f64,
    pub k: usize,
    /// The unrounded value was negative and `k` was set to 0.
    pub clamped: bool,
}

pub fn schedule_k(ln_n: f64, beta: f64, alpha: f64) -> Result<CutoffSchedule> {
    if !(alpha < 0.0) || !alpha.is_finite() {
        return Err(Error::NonNegativeAlpha { alpha_hat: alpha, std_error: f64::NAN });
    }
    if !(ln_n > 0.0) || !ln_n.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!("schedule needs ln_n > 0 and finite beta (got {ln_n}, {beta})")));
    }
    let raw = ((ln_n + beta * ln_n.sqrt()) / -alpha).round_ties_even();
    let clamped = raw < 0.0;
    Ok(CutoffSchedule { ln_n, beta, alpha, k: raw.max(0.0) as usize, clamped })
}

/// `P(T > k)` for the coupon-collector time `T` of `d` equally likely coupons.
pub fn coupon_collector_tail(d: usize, k: usize) -> f64 {
    if k < d {
        return 1.0;
    }
    let mut binom = 1.0;
    let mut total = 0.0;
    for j in 1..=d {
        binom *= (d + 1 - j) as f64 / j as f64;
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * binom * (1.0 - j as f64 / d as f64).powi(k as i32);
    }
    total.clamp(0.0, 1.0)
}

/// First step (1-based) by which every coordinate has appeared in `indices`.
pub fn coupon_collector_time(indices: &[usize], d: usize) -> Option<usize> {
    let mut seen = vec![false; d];
    let mut missing = d;
    for (t, &i) in indices.iter().enumerate() {
        if !seen[i] {
            seen[i] = true;
            missing -= 1;
            if missing == 0 {
                return Some(t + 1);
            }
        }
    }
    None
}

/// Ten log-spaced radii between the 50th and 99.9th percentile norms of
/// `samples` stationary draws at `phase`.
pub fn default_radius_grid(model: &Model, scan: &ScanPolicy, phase: usize, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let policy = TruncationPolicy::default_for(model.dim());
    let key = derive_seed(seed, TAG_PILOT);
    let norms = (0..samples as u64)
        .map(|r| sample_stationary_with(model, scan, phase, &policy, &mut stream_rng(key, r)).map(|s| s.x.norm()))
        .collect::<Result<Vec<f64>>>()?;
    let norms = sorted(norms);
    let (lo, hi) = (quantile(&norms, 0.5), quantile(&norms, 0.999));
    if !(lo > 0.0) || !(hi >= lo) {
        return Err(Error::EmptyRadiusGrid);
    }
    let step = (hi / lo).ln() / (RADIUS_GRID_LEN - 1) as f64;
    Ok((0..RADIUS_GRID_LEN).map(|j| lo * (step * j as f64).exp()).collect())
}

/// Ball probabilities at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusRow {
    pub radius: f64,
    pub p_stationary: f64,
    pub p_forward: f64,
    /// `|p_stationary - p_forward|`.
    pub value: f64,
    pub ci: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBound {
    pub k: usize,
    /// Best value over the radius grid, at least 0.
    pub value: f64,
    pub ci: f64,
    pub best_radius: f64,
    pub replicas: usize,
    pub per_radius: Vec<RadiusRow>,
}

fn check_replicas(replicas: usize) -> Result<()> {
    if replicas < MIN_BOUND_REPLICAS {
        return Err(Error::TooFewReplicas { min: MIN_BOUND_REPLICAS, got: replicas });
    }
    Ok(())
}

/// Lower bound on the distance between `X_k` (started at `x0`) and the
/// stationary law from the probabilities of centered balls.
///
/// The interval for each radius adds the one-sided Wilson margins of the two
/// proportions in the direction of the difference. Taking the best radius
/// inflates the bound slightly; every radius is reported.
pub fn tv_lower_bound_ball(
    model: &Model,
    scan: &ScanPolicy,
    x0: &[f64],
    k: usize,
    r_grid: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<LowerBound> {
    if r_grid.is_empty() {
        return Err(Error::EmptyRadiusGrid);
    }
    check_replicas(replicas)?;
    let policy = TruncationPolicy::default_for(model.dim());
    let (s_key, f_key) = (derive_seed(seed, TAG_STATIONARY), derive_seed(seed, TAG_FORWARD));
    let mut stationary = Vec::with_capacity(replicas);
    let mut forward = Vec::with_capacity(replicas);
    for r in 0..replicas as u64 {
        stationary.push(sample_stationary_with(model, scan, k, &policy, &mut stream_rng(s_key, r))?.x.norm());
        forward.push(model.simulate_from_phase(x0, 0, k, scan, &mut stream_rng(f_key, r), false)?.state.norm());
    }
    let n = replicas as u64;
    let per_radius: Vec<RadiusRow> = r_grid
        .iter()
        .map(|&radius| {
            let cs = stationary.iter().filter(|&&v| v <= radius).count() as u64;
            let cf = forward.iter().filter(|&&v| v <= radius).count() as u64;
            let (ps, pf) = (cs as f64 / n as f64, cf as f64 / n as f64);
            let (ws, wf) = (wilson_interval(cs, n, BOUND_Z), wilson_interval(cf, n, BOUND_Z));
            let ci = if ps >= pf { (ps - ws.0) + (wf.1 - pf) } else { (pf - wf.0) + (ws.1 - ps) };
            RadiusRow { radius, p_stationary: ps, p_forward: pf, value: (ps - pf).abs(), ci }
        })
        .collect();
    let best = per_radius
        .iter()
        .copied()
        .reduce(|a, b| if b.value > a.value { b } else { a })
        .expect("grid is not empty");
    Ok(LowerBound { k, value: best.value, ci: best.ci, best_radius: best.radius, replicas, per_radius })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperBound {
    pub k: usize,
    pub value: f64,
    pub ci: f64,
    /// Fraction of replicas in which some coordinate was never updated.
    pub uncollected_fraction: f64,
    pub replicas: usize,
}

/// Coupling upper bound on the distance between `X_k` (started at `x0`) and
/// the stationary law.
///
/// Per replica a stationary `X'_0` and the index sequence are drawn. If some
/// coordinate is never updated the replica contributes 1. Otherwise the matrix
/// `G` whose column `c` is `A_{I_k} ... A_{I_{k_c + 1}} sigma_c e_c` (`k_c` the
/// last update of `c`) is triangular in the order of the `k_c`; solving
/// `G w = A_{I_k} ... A_{I_1} (x0 - X'_0)` gives the noise shift that makes the
/// chains meet, and the replica contributes the total variation of the product
/// noise under that shift. Exact for Gaussian noise, a union bound for the
/// other families.
pub fn tv_upper_bound_coupling(
    model: &Model,
    scan: &ScanPolicy,
    x0: &[f64],
    k: usize,
    replicas: usize,
    seed: u64,
) -> Result<UpperBound> {
    check_replicas(replicas)?;
    let d = model.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
    }
    if (0..d).any(|i| !(model.effective_sigma(i) > 0.0)) {
        return Err(Error::SingularCoupling);
    }
    scan.validate(d)?;
    let policy = TruncationPolicy::default_for(d);
    let key = derive_seed(seed, TAG_COUPLING);
    let mut acc = MeanVar::default();
    let mut uncollected = 0usize;
    let mut indices = Vec::with_capacity(k);
    let mut last = vec![0usize; d];
    let mut g = vec![0.0; d * d];
    for r in 0..replicas as u64 {
        let mut rng = stream_rng(key, r);
        let xp = sample_stationary_with(model, scan, 0, &policy, &mut rng)?.x;
        indices.clear();
        indices.extend((0..k).map(|t| scan.forward_index(d, t, &mut rng)));
        if coupon_collector_time(&indices, d).is_none() {
            uncollected += 1;
            acc.push(1.0);
            continue;
        }
        for (t, &i) in indices.iter().enumerate() {
            last[i] = t;
        }
        let mut s: Vec<f64> = x0.iter().zip(xp.as_slice()).map(|(a, b)| a - b).collect();
        model.apply_sequence_in_place(&indices, &mut s);
        for c in 0..d {
            let mut col = vec![0.0; d];
            col[c] = model.effective_sigma(c);
            model.apply_sequence_in_place(&indices[last[c] + 1..], &mut col);
            (0..d).for_each(|row| g[row * d + c] = col[row]);
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by_key(|&c| last[c]);
        let mut w = vec![0.0; d];
        for (pos, &c) in order.iter().enumerate() {
            let partial: f64 = order[..pos].iter().map(|&c2| g[c * d + c2] * w[c2]).sum();
            w[c] = (s[c] - partial) / g[c * d + c];
        }
        acc.push(model.noise().product_shift_tv(&w).min(1.0));
    }
    Ok(UpperBound {
        k,
        value: acc.mean.clamp(0.0, 1.0),
        ci: BOUND_Z * acc.std_error(),
        uncollected_fraction: uncollected as f64 / replicas as f64,
        replicas,
    })
}

/// Lower and upper estimates with their interval half-widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TVBracket {
    pub k: usize,
    pub lower: f64,
    pub lower_ci: f64,
    pub upper: f64,
    pub upper_ci: f64,
    /// Some value was clipped into `[0, 1]`.
    pub clamped: bool,
}

/// Both bounds with the default radius grid calibrated at phase `k`.
pub fn tv_bracket(model: &Model, scan: &ScanPolicy, x0: &[f64], k: usize, replicas: usize, seed: u64) -> Result<TVBracket> {
    let grid = default_radius_grid(model, scan, k, replicas, seed)?;
    let lo = tv_lower_bound_ball(model, scan, x0, k, &grid, replicas, seed)?;
    let up = tv_upper_bound_coupling(model, scan, x0, k, replicas, seed)?;
    let clamped = lo.value > 1.0 || up.value > 1.0;
    Ok(TVBracket { k, lower: lo.value.min(1.0), lower_ci: lo.ci, upper: up.value.min(1.0), upper_ci: up.ci, clamped })
}

/// Whether the exact Gaussian pipeline applies.
pub fn exact_pipeline_applies(model: &Model, scan: &ScanPolicy) -> bool {
    model.dim() == 2 && model.noise().kind() == NoiseKind::Gaussian && *scan == ScanPolicy::DeterministicCycle
}

/// Where the `alpha` of a profile came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "source")]
pub enum AlphaProvenance {
    Estimated { value: f64, std_error: f64, n_steps: usize, scan: String },
    ExactReference { value: f64, label: String },
}

impl AlphaProvenance {
    pub fn value(&self) -> f64 {
        match self {
            AlphaProvenance::Estimated { value, .. } | AlphaProvenance::ExactReference { value, .. } => *value,
        }
    }
}

impl From<&AlphaEstimate> for AlphaProvenance {
    fn from(a: &AlphaEstimate) -> Self {
        AlphaProvenance::Estimated { value: a.alpha_hat, std_error: a.std_error, n_steps: a.n_steps, scan: a.scan.clone() }
    }
}

/// One cell of a cutoff profile. Bracket columns are `None` on the exact
/// pipeline and the exact columns are `None` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRow {
    pub ln_n: f64,
    pub beta: f64,
    pub k: usize,
    pub clamped: bool,
    pub tv_lower: Option<f64>,
    pub lower_ci: Option<f64>,
    pub tv_upper: Option<f64>,
    pub upper_ci: Option<f64>,
    pub tv_exact: Option<f64>,
    pub exact_err: Option<f64>,
    pub method: &'static str,
}

/// Evaluates one `(ln n, beta)` cell from `x0 = e^{ln n} x0_direction`.
#[allow(clippy::too_many_arguments)]
pub fn profile_cell(
    model: &Model,
    scan: &ScanPolicy,
    x0_direction: &SphereState,
    ln_n: f64,
    beta: f64,
    alpha: f64,
    replicas: usize,
    seed: u64,
) -> Result<ProfileRow> {
    let sched = schedule_k(ln_n, beta, alpha)?;
    let mut row = ProfileRow {
        ln_n,
        beta,
        k: sched.k,
        clamped: sched.clamped,
        tv_lower: None,
        lower_ci: None,
        tv_upper: None,
        upper_ci: None,
        tv_exact: None,
        exact_err: None,
        method: "exact",
    };
    if exact_pipeline_applies(model, scan) {
        let p = exact_tv_at(model, ln_n, x0_direction, sched.k)?;
        row.tv_exact = Some(p.tv);
        row.exact_err = Some(p.err);
    } else {
        let x0: Vec<f64> = x0_direction.as_slice().iter().map(|v| v * ln_n.exp()).collect();
        let b = tv_bracket(model, scan, &StateVec::new(x0)?, sched.k, replicas, seed)?;
        row.method = "bracket";
        row.tv_lower = Some(b.lower);
        row.lower_ci = Some(b.lower_ci);
        row.tv_upper = Some(b.upper);
        row.upper_ci = Some(b.upper_ci);
        row.clamped |= b.clamped;
    }
    Ok(row)
}

/// Horizontal positions where exact curves cross `level`, and their spacing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpacingReport {
    pub level: f64,
    pub ln_n: Vec<f64>,
    pub crossings: Vec<f64>,
    pub spacings: Vec<f64>,
    /// `(ln n_{j+1} - ln n_j) / (-alpha)` for each spacing.
    pub predicted: Vec<f64>,
    pub mean_spacing: f64,
}

/// Crossings of the exact curves for each `ln n`; errors if a curve has not
/// crossed `level` by `k_limit`.
pub fn crossing_spacing(
    model: &Model,
    x0_direction: &SphereState,
    ln_n_list: &[f64],
    level: f64,
    alpha: f64,
    k_limit: usize,
) -> Result<SpacingReport> {
    let crossings = ln_n_list
        .iter()
        .map(|&ln_n| {
            exact_crossing(model, ln_n, x0_direction, level, k_limit)?
                .ok_or_else(|| Error::InvalidParameter(alloc::format!("no crossing of {level} by k = {k_limit} at ln n = {ln_n}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let spacings: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    let predicted = ln_n_list.windows(2).map(|w| (w[1] - w[0]) / -alpha).collect();
    let mean_spacing = if spacings.is_empty() { f64::NAN } else { spacings.iter().sum::<f64>() / spacings.len() as f64 };
    Ok(SpacingReport { level, ln_n: ln_n_list.to_vec(), crossings, spacings, predicted, mean_spacing })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffProfile {
    pub alpha: AlphaProvenance,
    pub rows: Vec<ProfileRow>,
    /// Present on the exact pipeline.
    pub spacing: Option<SpacingReport>,
}

/// Seed of cell `index` in a profile.
pub fn cell_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, 0x1000 + index as u64)
}

/// Mid-level used for the spacing report.
pub const SPACING_LEVEL: f64 = 0.5;

/// Cells ordered by `ln n` then `beta`; cell `j` uses [`cell_seed`]`(seed, j)`.
#[allow(clippy::too_many_arguments)]
pub fn cutoff_profile(
    model: &Model,
    scan: &ScanPolicy,
    x0_direction: &SphereState,
    ln_n_list: &[f64],
    beta_grid: &[f64],
    alpha: AlphaProvenance,
    replicas: usize,
    seed: u64,
) -> Result<CutoffProfile> {
    let a = alpha.value();
    let mut rows = Vec::with_capacity(ln_n_list.len() * beta_grid.len());
    for (j, (&ln_n, &beta)) in ln_n_list.iter().flat_map(|l| beta_grid.iter().map(move |b| (l, b))).enumerate() {
        rows.push(profile_cell(model, scan, x0_direction, ln_n, beta, a, replicas, cell_seed(seed, j))?);
    }
    let spacing = profile_spacing(model, scan, x0_direction, ln_n_list, a)?;
    Ok(CutoffProfile { alpha, rows, spacing })
}

/// Spacing report for a profile, when the exact pipeline applies.
pub fn profile_spacing(
    model: &Model,
    scan: &ScanPolicy,
    x0_direction: &SphereState,
    ln_n_list: &[f64],
    alpha: f64,
) -> Result<Option<SpacingReport>> {
    if !exact_pipeline_applies(model, scan) || ln_n_list.len() < 2 {
        return Ok(None);
    }
    let ln_max = ln_n_list.iter().copied().fold(0.0, f64::max);
    let k_limit = (4.0 * (ln_max + 10.0) / -alpha).ceil() as usize + 20;
    crossing_spacing(model, x0_direction, ln_n_list, SPACING_LEVEL, alpha, k_limit).map(Some)
}
