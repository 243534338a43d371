//! The noise-averaged chain projected onto the positive part of the unit sphere.
//!
//! Averaging the chain over the noise leaves the linear dynamics
//! `x -> A_i x`. Normalizing after each step gives a Markov chain `Y_k` on
//!
//! ```text
//! S = { y in R^d : |y| = 1, y > 0 }
//! ```
//!
//! and the per-step log norm factors `ln |A_i Y_{k-1}|` average to the
//! Lyapunov constant `alpha` under the unique stationary law of `Y`.
//! This module also carries the Hilbert projective metric
//!
//! ```text
//! h(y, y') = ln( max_i(y_i / y'_i) / min_i(y_i / y'_i) )
//! ```
//!
//! under which common-index updates never expand distances, and the
//! coordinate-ratio bound `min Y_k / max Y_k >= (min Y_0 / max Y_0) eps^(d-1)`
//! with `eps = min { e_i p_ij : p_ij > 0 }`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{norm, Model, ScanPolicy};
use crate::stats::{linear_fit, MeanVar};
use crate::streams::stream_rng;

/// Number of batches for batch-means standard errors of `alpha`.
pub const ALPHA_BATCHES: usize = 30;
pub const DEFAULT_BURN_IN: usize = 1_000;
pub const DEFAULT_ALPHA_STEPS: usize = 1_000_000;
/// Deviation levels `t` (in units of `sqrt(k)`) of the concentration tail table.
pub const TAIL_LEVELS: [f64; 3] = [1.0, 2.0, 3.0];
pub const MIN_CONCENTRATION_REPLICAS: usize = 100;

const RATIO_SLACK: f64 = 1e-12;
const ARGMAX_REL_TOL: f64 = 1e-12;

/// A strictly positive unit vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SphereState(Vec<f64>);

impl SphereState {
    /// `x / |x|` for a strictly positive `x`.
    pub fn project(x: &[f64]) -> Result<Self> {
        check_positive(x)?;
        let n = norm(x);
        Ok(SphereState(x.iter().map(|v| v / n).collect()))
    }

    /// The direction of the all-ones vector.
    pub fn uniform(d: usize) -> Self {
        SphereState(vec![1.0 / (d as f64).sqrt(); d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `min_i y_i / max_i y_i`.
    pub fn min_max_ratio(&self) -> f64 {
        min_max_ratio(&self.0)
    }
}

/// `x / |x|`; fails on a coordinate that is not strictly positive.
pub fn project(x: &[f64]) -> Result<SphereState> {
    SphereState::project(x)
}

fn check_positive(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        Some(i) => Err(Error::NonPositive(i)),
        None => Ok(()),
    }
}

fn min_max_ratio(x: &[f64]) -> f64 {
    let (lo, hi) = x.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    lo / hi
}

/// Applies `A_i` and renormalizes in place, returning `ln |A_i y|`.
fn step_in_place(model: &Model, y: &mut [f64], i: usize) -> f64 {
    model.apply_a_in_place(i, y);
    let n = norm(y);
    y.iter_mut().for_each(|v| *v /= n);
    n.ln()
}

/// One step of the sphere walk: `(A_i y / |A_i y|, ln |A_i y|)`.
pub fn sphere_step(model: &Model, y: &SphereState, i: usize) -> Result<(SphereState, f64)> {
    model.check_index(i)?;
    model.network().check_dim(y.dim())?;
    let mut next = y.0.clone();
    let log_factor = step_in_place(model, &mut next, i);
    Ok((SphereState(next), log_factor))
}

/// `min { e_i p_ij : p_ij > 0 }`.
pub fn epsilon_const(model: &Model) -> f64 {
    let d = model.dim();
    let e = model.params().e();
    (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .filter(|&(i, j)| model.network().p(i, j) > 0.0)
        .map(|(i, j)| e[i] * model.network().p(i, j))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioBoundReport {
    /// `min Y_k / max Y_k` after the sequence.
    pub lhs: f64,
    /// `(min Y_0 / max Y_0) eps^(d-1)`.
    pub rhs: f64,
    pub holds: bool,
}

/// Checks the coordinate-ratio lower bound along one index sequence.
pub fn ratio_bound_check(model: &Model, y0: &SphereState, indices: &[usize]) -> Result<RatioBoundReport> {
    model.network().check_dim(y0.dim())?;
    if let Some(&index) = indices.iter().find(|&&i| i >= model.dim()) {
        return Err(Error::IndexOutOfRange { index, dim: model.dim() });
    }
    let mut y = y0.0.clone();
    for &i in indices {
        step_in_place(model, &mut y, i);
    }
    let lhs = min_max_ratio(&y);
    let rhs = y0.min_max_ratio() * epsilon_const(model).powi(model.dim() as i32 - 1);
    Ok(RatioBoundReport { lhs, rhs, holds: lhs >= rhs - RATIO_SLACK })
}

/// Hilbert projective distance between two strictly positive vectors.
///
/// Invariant under rescaling either argument, so it is a metric on directions.
pub fn hilbert_distance(y: &[f64], y2: &[f64]) -> Result<f64> {
    if y.len() != y2.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: y2.len() });
    }
    check_positive(y)?;
    check_positive(y2)?;
    Ok(hilbert_unchecked(y, y2))
}

fn hilbert_unchecked(y: &[f64], y2: &[f64]) -> f64 {
    let (lo, hi) = y
        .iter()
        .zip(y2)
        .map(|(a, b)| a / b)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
    (hi / lo).ln().max(0.0)
}

/// Index sequence of length `d` that strictly lowers `max_i y_i / y'_i`.
///
/// At each step the lowest index in the current argmax set that has an
/// out-neighbour outside the set is updated in both states, which removes it
/// from the set. Once the two directions coincide the sequence is padded with
/// index 0.
pub fn greedy_contraction_sequence(model: &Model, y0: &SphereState, y0p: &SphereState) -> Result<Vec<usize>> {
    let d = model.dim();
    model.network().check_dim(y0.dim())?;
    model.network().check_dim(y0p.dim())?;
    let (mut y, mut yp) = (y0.0.clone(), y0p.0.clone());
    let mut seq = Vec::with_capacity(d);
    for _ in 0..d {
        let ratios: Vec<f64> = y.iter().zip(&yp).map(|(a, b)| a / b).collect();
        let top = ratios.iter().cloned().fold(0.0f64, f64::max);
        let in_top: Vec<bool> = ratios.iter().map(|r| *r >= top * (1.0 - ARGMAX_REL_TOL)).collect();
        let pick = (0..d)
            .filter(|&i| in_top[i])
            .find(|&i| (0..d).any(|j| !in_top[j] && model.network().p(i, j) > 0.0))
            .unwrap_or(0);
        step_in_place(model, &mut y, pick);
        step_in_place(model, &mut yp, pick);
        seq.push(pick);
    }
    Ok(seq)
}

/// Outcome of [`coupled_contraction_probe`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub trials: usize,
    pub steps_per_trial: usize,
    pub initial_distance: f64,
    /// Largest `h(Y_k, Y'_k) / h(Y_0, Y'_0)` seen over all trials and steps.
    pub max_distance_ratio: f64,
    /// Largest single-step increase of `h` (negative when `h` always shrank).
    pub max_step_increase: f64,
    pub nonexpansion_holds: bool,
    /// Fraction of trials with `h(Y_d, Y'_d) < h(Y_0, Y'_0)`.
    pub strict_decrease_fraction: f64,
    /// `d^(-d)`.
    pub strict_decrease_threshold: f64,
    pub greedy_sequence: Vec<usize>,
    pub greedy_distance_after: f64,
}

impl ContractionReport {
    pub fn passes(&self) -> bool {
        self.nonexpansion_holds
            && self.strict_decrease_fraction >= self.strict_decrease_threshold
            && self.greedy_distance_after < self.initial_distance
    }
}

/// Runs `trials` common-index couplings of length `10 d` from `(y0, y0p)`.
///
/// Trial `t` draws its uniform indices from stream `t` of `seed`.
pub fn coupled_contraction_probe(
    model: &Model,
    y0: &SphereState,
    y0p: &SphereState,
    trials: usize,
    seed: u64,
) -> Result<ContractionReport> {
    let d = model.dim();
    model.network().check_dim(y0.dim())?;
    model.network().check_dim(y0p.dim())?;
    let h0 = hilbert_unchecked(&y0.0, &y0p.0);
    if y0 == y0p || h0 == 0.0 {
        return Err(Error::IdenticalStates);
    }
    let steps = 10 * d;
    let mut max_ratio = 0.0f64;
    let mut max_increase = f64::NEG_INFINITY;
    let mut strict = 0usize;
    for t in 0..trials {
        let mut rng = stream_rng(seed, t as u64);
        let (mut y, mut yp) = (y0.0.clone(), y0p.0.clone());
        let mut h = h0;
        for k in 1..=steps {
            let i = ScanPolicy::RandomScan.forward_index(d, k - 1, &mut rng);
            step_in_place(model, &mut y, i);
            step_in_place(model, &mut yp, i);
            let next = hilbert_unchecked(&y, &yp);
            max_increase = max_increase.max(next - h);
            max_ratio = max_ratio.max(next / h0);
            if k == d && next < h0 * (1.0 - 1e-10) {
                strict += 1;
            }
            h = next;
        }
    }
    let greedy = greedy_contraction_sequence(model, y0, y0p)?;
    let (mut y, mut yp) = (y0.0.clone(), y0p.0.clone());
    for &i in &greedy {
        step_in_place(model, &mut y, i);
        step_in_place(model, &mut yp, i);
    }
    Ok(ContractionReport {
        trials,
        steps_per_trial: steps,
        initial_distance: h0,
        max_distance_ratio: max_ratio,
        max_step_increase: max_increase,
        nonexpansion_holds: max_increase <= 1e-12 && max_ratio <= 1.0 + 1e-12,
        strict_decrease_fraction: strict as f64 / trials.max(1) as f64,
        strict_decrease_threshold: (d as f64).powi(-(d as i32)),
        greedy_sequence: greedy,
        greedy_distance_after: hilbert_unchecked(&y, &yp),
    })
}

/// Ergodic estimate of `alpha = E ln |A_I Y|` under the stationary law of `Y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaEstimate {
    pub alpha_hat: f64,
    /// Batch-means standard error.
    pub std_error: f64,
    pub n_steps: usize,
    pub burn_in: usize,
    pub scan: String,
    /// Set when the estimate is nonnegative but within three standard errors of 0.
    pub nonnegative_flag: bool,
}

/// Runs the sphere walk from the uniform direction for `burn_in + n_steps`
/// steps and averages the log norm factors of the last `n_steps`.
///
/// A nonnegative estimate more than three standard errors above zero is an
/// error; one within three standard errors is returned with a flag.
pub fn estimate_alpha(
    model: &Model,
    scan: &ScanPolicy,
    burn_in: usize,
    n_steps: usize,
    seed: u64,
) -> Result<AlphaEstimate> {
    scan.validate(model.dim())?;
    if n_steps < ALPHA_BATCHES {
        return Err(Error::InvalidParameter(alloc::format!(
            "n_steps must be at least {ALPHA_BATCHES}, got {n_steps}"
        )));
    }
    if n_steps < 10 * burn_in {
        log::warn!("n_steps = {n_steps} is less than ten times burn_in = {burn_in}");
    }
    let d = model.dim();
    let mut rng = stream_rng(seed, 0);
    let mut y = SphereState::uniform(d).0;
    for t in 0..burn_in {
        let i = scan.forward_index(d, t, &mut rng);
        step_in_place(model, &mut y, i);
    }
    let batch_len = n_steps / ALPHA_BATCHES;
    let mut batches = MeanVar::default();
    let (mut total, mut batch_sum) = (0.0, 0.0);
    for s in 0..n_steps {
        let i = scan.forward_index(d, burn_in + s, &mut rng);
        let lf = step_in_place(model, &mut y, i);
        total += lf;
        if s < batch_len * ALPHA_BATCHES {
            batch_sum += lf;
            if (s + 1) % batch_len == 0 {
                batches.push(batch_sum / batch_len as f64);
                batch_sum = 0.0;
            }
        }
    }
    let alpha_hat = total / n_steps as f64;
    let std_error = batches.std_error();
    if alpha_hat >= 0.0 && alpha_hat > 3.0 * std_error {
        return Err(Error::NonNegativeAlpha { alpha_hat, std_error });
    }
    Ok(AlphaEstimate {
        alpha_hat,
        std_error,
        n_steps,
        burn_in,
        scan: scan.name().into(),
        nonnegative_flag: alpha_hat >= 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub t: f64,
    /// Worst case over `k` of the fraction with `|L_k - mean_k| >= t sqrt(k)`.
    pub empirical: f64,
    /// `2 exp(-gamma_hat t^2)`.
    pub bound: f64,
}

/// Fluctuations of `L_k = ln |A_{I_k} ... A_{I_1} y0|` across random index sequences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub k: Vec<usize>,
    pub replicas: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Least-squares exponent of `std` against `k` on log-log axes; absent
    /// when some `std` is zero.
    pub slope: Option<f64>,
    /// Least-squares slope of `mean` against `k`.
    pub alpha_fit: f64,
    /// Least-squares fit of `ln(exceedance / 2) = -gamma t^2` over the levels
    /// with positive exceedance.
    pub gamma_hat: f64,
    pub tails: Vec<TailRow>,
    /// Every empirical tail lies under its bound.
    pub dominated: bool,
}

impl ConcentrationReport {
    /// `mean_k - k alpha` for a reference `alpha`.
    pub fn recentered_means(&self, alpha: f64) -> Vec<f64> {
        self.k.iter().zip(&self.mean).map(|(&k, m)| m - k as f64 * alpha).collect()
    }
}

/// Samples `L_k` for each `k` in the increasing list `k_list`, one index
/// sequence per replica (replica `r` on stream `r`), and summarizes its growth
/// and tails.
pub fn concentration_probe(
    model: &Model,
    scan: &ScanPolicy,
    y0: &SphereState,
    k_list: &[usize],
    replicas: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    if replicas < MIN_CONCENTRATION_REPLICAS {
        return Err(Error::TooFewReplicas { min: MIN_CONCENTRATION_REPLICAS, got: replicas });
    }
    if k_list.is_empty() || k_list.windows(2).any(|w| w[0] >= w[1]) || k_list[0] == 0 {
        return Err(Error::InvalidParameter("k_list must be positive and strictly increasing".into()));
    }
    scan.validate(model.dim())?;
    model.network().check_dim(y0.dim())?;
    let d = model.dim();
    let k_max = *k_list.last().unwrap();
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(replicas); k_list.len()];
    for r in 0..replicas {
        let mut rng = stream_rng(seed, r as u64);
        let mut y = y0.0.clone();
        let mut log_norm = 0.0;
        let mut next = 0;
        for t in 1..=k_max {
            let i = scan.forward_index(d, t - 1, &mut rng);
            log_norm += step_in_place(model, &mut y, i);
            if t == k_list[next] {
                samples[next].push(log_norm);
                next += 1;
            }
        }
    }
    let stats: Vec<MeanVar> = samples.iter().map(|s| s.iter().copied().collect()).collect();
    let mean: Vec<f64> = stats.iter().map(|s| s.mean).collect();
    let std: Vec<f64> = stats.iter().map(|s| s.std_dev()).collect();
    let ks: Vec<f64> = k_list.iter().map(|&k| k as f64).collect();
    let slope = if k_list.len() >= 2 && std.iter().all(|s| *s > 0.0) {
        let lx: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
        let ly: Vec<f64> = std.iter().map(|s| s.ln()).collect();
        Some(linear_fit(&lx, &ly).1)
    } else {
        None
    };
    let alpha_fit = if k_list.len() >= 2 { linear_fit(&ks, &mean).1 } else { mean[0] / ks[0] };

    let exceedance: Vec<f64> = TAIL_LEVELS
        .iter()
        .map(|&t| {
            samples
                .iter()
                .zip(&mean)
                .zip(&ks)
                .map(|((s, m), k)| {
                    let cut = t * k.sqrt();
                    s.iter().filter(|v| (*v - m).abs() >= cut).count() as f64 / replicas as f64
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let positive: Vec<(f64, f64)> =
        TAIL_LEVELS.iter().zip(&exceedance).filter(|(_, e)| **e > 0.0).map(|(t, e)| (*t, *e)).collect();
    let gamma_hat = if positive.is_empty() {
        // Nothing observed beyond the first level: the replica count bounds gamma from below.
        -(0.5 / replicas as f64).ln() / (TAIL_LEVELS[0] * TAIL_LEVELS[0])
    } else {
        let num: f64 = positive.iter().map(|(t, e)| t * t * (e / 2.0).ln()).sum();
        let den: f64 = positive.iter().map(|(t, _)| t.powi(4)).sum();
        -num / den
    };
    let tails: Vec<TailRow> = TAIL_LEVELS
        .iter()
        .zip(&exceedance)
        .map(|(&t, &empirical)| TailRow { t, empirical, bound: 2.0 * (-gamma_hat * t * t).exp() })
        .collect();
    let dominated = tails.iter().all(|r| r.empirical <= r.bound * (1.0 + 1e-12));
    Ok(ConcentrationReport {
        k: k_list.to_vec(),
        replicas,
        mean,
        std,
        slope,
        alpha_fit,
        gamma_hat,
        tails,
        dominated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, Network};

    fn swap(e: f64) -> Model {
        Model::new(Network::swap(), ModelParams::uniform(2, e, 1.0).unwrap()).unwrap()
    }

    fn complete3() -> Model {
        Model::new(Network::complete(3).unwrap(), ModelParams::uniform(3, 0.5, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn project_examples() {
        let y = project(&[1.0, 1.0]).unwrap();
        assert!(y.as_slice().iter().all(|v| (v - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15));
        let y = project(&[3.0, 4.0]).unwrap();
        assert!((y.as_slice()[0] - 0.6).abs() < 1e-16 && (y.as_slice()[1] - 0.8).abs() < 1e-16);
        assert_eq!(project(&[0.0, 1.0]), Err(Error::NonPositive(0)));
    }

    #[test]
    fn sphere_step_two_point_orbit() {
        let m = swap(0.55);
        let (y1, lf) = sphere_step(&m, &SphereState::uniform(2), 0).unwrap();
        // |(0.55, 1)/sqrt 2| = sqrt(1.3025 / 2)
        assert!((lf - (1.3025f64 / 2.0).sqrt().ln()).abs() < 1e-15);
        assert!((lf + 0.214_430).abs() < 1e-6);
        let expect = project(&[0.55, 1.0]).unwrap();
        assert!(y1.as_slice().iter().zip(expect.as_slice()).all(|(a, b)| (a - b).abs() < 1e-15));
        let (y2, lf) = sphere_step(&m, &y1, 0).unwrap();
        assert!(lf.abs() < 1e-15);
        assert!(y2.as_slice().iter().zip(y1.as_slice()).all(|(a, b)| (a - b).abs() < 1e-15));
        let (y3, lf) = sphere_step(&m, &y1, 1).unwrap();
        assert!((lf - 0.55f64.ln()).abs() < 1e-15);
        let flipped = project(&[1.0, 0.55]).unwrap();
        assert!(y3.as_slice().iter().zip(flipped.as_slice()).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(sphere_step(&m, &y1, 2).is_err());
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_const(&swap(0.55)), 0.55);
        assert_eq!(epsilon_const(&complete3()), 0.25);
        let asym = Model::new(
            Network::swap(),
            ModelParams::new(vec![0.2, 0.9], vec![1.0, 1.0], crate::NoiseSpec::gaussian()).unwrap(),
        )
        .unwrap();
        assert_eq!(epsilon_const(&asym), 0.2);
    }

    #[test]
    fn ratio_bound_on_two_point_orbit_is_attained() {
        let m = swap(0.55);
        let y0 = SphereState::uniform(2);
        let empty = ratio_bound_check(&m, &y0, &[]).unwrap();
        assert!(empty.holds && (empty.lhs - 1.0).abs() < 1e-15);
        // all sequences of length 6
        for code in 0..64u32 {
            let seq: Vec<usize> = (0..6).map(|b| ((code >> b) & 1) as usize).collect();
            let r = ratio_bound_check(&m, &y0, &seq).unwrap();
            assert!(r.holds);
            assert!((r.rhs - 0.55).abs() < 1e-15);
            assert!((r.lhs - 0.55).abs() < 1e-12 || (r.lhs - 1.0).abs() < 1e-12, "{seq:?} {r:?}");
        }
    }

    #[test]
    fn ratio_bound_path3_exhaustive() {
        let m = Model::new(Network::path(3).unwrap(), ModelParams::uniform(3, 0.7, 1.0).unwrap()).unwrap();
        let y0 = project(&[1.0, 2.0, 1.5]).unwrap();
        for code in 0..3usize.pow(8) {
            let seq: Vec<usize> = (0..8).scan(code, |c, _| {
                let i = *c % 3;
                *c /= 3;
                Some(i)
            })
            .collect();
            assert!(ratio_bound_check(&m, &y0, &seq).unwrap().holds, "{seq:?}");
        }
    }

    #[test]
    fn hilbert_examples() {
        let a = project(&[0.55, 1.0]).unwrap();
        let b = project(&[1.0, 0.55]).unwrap();
        assert_eq!(hilbert_distance(a.as_slice(), a.as_slice()).unwrap(), 0.0);
        let h = hilbert_distance(a.as_slice(), b.as_slice()).unwrap();
        assert!((h - 2.0 * (1.0f64 / 0.55).ln()).abs() < 1e-14);
        assert!((h - 1.195_674).abs() < 1e-6);
        let scaled = hilbert_distance(&[5.5, 10.0], b.as_slice()).unwrap();
        assert!((scaled - h).abs() < 1e-14);
        assert!(hilbert_distance(&[0.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn contraction_probe_swap_example() {
        let m = swap(0.55);
        let y0 = project(&[0.6, 0.8]).unwrap();
        let y0p = project(&[0.8, 0.6]).unwrap();
        assert_eq!(coupled_contraction_probe(&m, &y0, &y0, 10, 1), Err(Error::IdenticalStates));
        let r = coupled_contraction_probe(&m, &y0, &y0p, 2000, 3).unwrap();
        assert_eq!(r.greedy_sequence.len(), 2);
        assert_eq!(r.greedy_sequence[0], 1);
        assert!(r.greedy_distance_after < r.initial_distance);
        assert!(r.passes(), "{r:?}");
    }

    #[test]
    fn alpha_deterministic_two_point_orbit() {
        let m = swap(0.55);
        let est = estimate_alpha(&m, &ScanPolicy::DeterministicCycle, 10, 3000, 0).unwrap();
        assert!((est.alpha_hat - 0.55f64.ln()).abs() < 1e-12);
        assert!(est.std_error < 1e-12);
        let near_one = swap(0.999);
        let est = estimate_alpha(&near_one, &ScanPolicy::DeterministicCycle, 10, 3000, 0).unwrap();
        assert!(est.alpha_hat < 0.0 && est.alpha_hat > -0.0011);
    }

    #[test]
    fn concentration_rejects_bad_input() {
        let m = complete3();
        let y0 = SphereState::uniform(3);
        assert!(matches!(
            concentration_probe(&m, &ScanPolicy::RandomScan, &y0, &[10], 50, 0),
            Err(Error::TooFewReplicas { .. })
        ));
        assert!(concentration_probe(&m, &ScanPolicy::RandomScan, &y0, &[10, 5], 200, 0).is_err());
    }

    #[test]
    fn concentration_deterministic_has_no_spread() {
        let m = swap(0.55);
        let r = concentration_probe(&m, &ScanPolicy::DeterministicCycle, &SphereState::uniform(2), &[5, 10, 20], 100, 1)
            .unwrap();
        assert!(r.std.iter().all(|s| *s == 0.0));
        assert!(r.slope.is_none());
        assert!(r.tails.iter().all(|t| t.empirical == 0.0));
    }
}
