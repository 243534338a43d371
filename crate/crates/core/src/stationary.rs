//! Sampling the stationary law through the backward iteration
//!
//! ```text
//! X = b_{I_1}(Z_1) + A_{I_1} b_{I_2}(Z_2) + A_{I_1} A_{I_2} b_{I_3}(Z_3) + ...
//! ```
//!
//! The prefix operator `A_{I_1} ... A_{I_m}` is kept as a dense matrix and
//! updated in `O(d^2)` per term.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{norm, Model, ScanPolicy, StateVec};
use crate::stats::MeanVar;
use crate::streams::{derive_seed, stream_rng};

/// Stop once `patience` consecutive terms are quiet, or after `max_terms` terms.
///
/// A term is quiet when every possible next increment per unit of noise is
/// below `tol`, i.e. `max_c |prefix e_c| * max_i sigma_i < tol`. The realized
/// increment norm alone is not enough: re-selecting a coordinate gives an
/// exactly zero increment long before the series has converged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationPolicy {
    pub tol: f64,
    pub patience: usize,
    pub max_terms: usize,
}

impl TruncationPolicy {
    pub fn new(tol: f64, patience: usize, max_terms: usize) -> Result<Self> {
        if !(tol > 0.0) || patience == 0 || max_terms < patience {
            return Err(Error::InvalidParameter(format!(
                "truncation policy needs tol > 0, patience >= 1, max_terms >= patience \
                 (got {tol}, {patience}, {max_terms})"
            )));
        }
        Ok(TruncationPolicy { tol, patience, max_terms })
    }

    /// `tol = 1e-10`, `patience = d`, `max_terms = 10^4`.
    pub fn default_for(d: usize) -> Self {
        TruncationPolicy { tol: 1e-10, patience: d.max(1), max_terms: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarySample {
    pub x: StateVec,
    pub terms: usize,
    pub last_increment_norm: f64,
    /// The series was cut at `max_terms` before the stopping rule fired.
    pub truncated: bool,
}

/// Running state of the backward series.
struct BackwardSeries {
    d: usize,
    /// Row-major prefix product `A_{I_1} ... A_{I_m}`.
    prefix: Vec<f64>,
    sum: Vec<f64>,
    increment: Vec<f64>,
}

impl BackwardSeries {
    fn new(d: usize) -> Self {
        let mut prefix = vec![0.0; d * d];
        (0..d).for_each(|i| prefix[i * d + i] = 1.0);
        BackwardSeries { d, prefix, sum: vec![0.0; d], increment: vec![0.0; d] }
    }

    /// Largest column norm of the prefix operator: the size of the next
    /// increment per unit of noise.
    fn prefix_scale(&self) -> f64 {
        let d = self.d;
        (0..d)
            .map(|c| (0..d).map(|r| self.prefix[r * d + c] * self.prefix[r * d + c]).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt()
    }

    /// Adds term `m` and returns the norm of its increment.
    fn add_term<R: Rng + ?Sized>(&mut self, model: &Model, scan: &ScanPolicy, phase: usize, m: usize, rng: &mut R) -> f64 {
        let d = self.d;
        let i = scan.backward_index(d, phase, m, rng);
        let b = model.draw_increment(i, rng);
        for r in 0..d {
            self.increment[r] = b * self.prefix[r * d + i];
            self.sum[r] += self.increment[r];
        }
        // prefix <- prefix * A_i: column j gains e_i p_ij times column i, column i vanishes.
        let e = model.params().e()[i];
        let row = model.network().row(i);
        for r in 0..d {
            let pivot = self.prefix[r * d + i];
            if pivot != 0.0 {
                for (j, p) in row.iter().enumerate() {
                    self.prefix[r * d + j] += e * p * pivot;
                }
            }
            self.prefix[r * d + i] = 0.0;
        }
        norm(&self.increment)
    }
}

/// One stationary draw on stream 0 of `seed`; see [`sample_stationary_with`].
pub fn sample_stationary(
    model: &Model,
    scan: &ScanPolicy,
    phase: usize,
    policy: &TruncationPolicy,
    seed: u64,
) -> Result<StationarySample> {
    sample_stationary_with(model, scan, phase, policy, &mut stream_rng(seed, 0))
}

/// Draws from the stationary law of the chain seen after `phase` forward
/// steps. For random scan the phase is irrelevant; periodic scans walk their
/// index sequence backwards from step `phase - 1`.
pub fn sample_stationary_with<R: Rng + ?Sized>(
    model: &Model,
    scan: &ScanPolicy,
    phase: usize,
    policy: &TruncationPolicy,
    rng: &mut R,
) -> Result<StationarySample> {
    scan.validate(model.dim())?;
    let mut series = BackwardSeries::new(model.dim());
    let sigma_max = (0..model.dim()).map(|i| model.effective_sigma(i)).fold(0.0, f64::max);
    let mut quiet = 0;
    let mut last = f64::NAN;
    for m in 1..=policy.max_terms {
        last = series.add_term(model, scan, phase, m, rng);
        quiet = if series.prefix_scale() * sigma_max < policy.tol { quiet + 1 } else { 0 };
        if quiet >= policy.patience {
            return Ok(StationarySample { x: StateVec::new(series.sum)?, terms: m, last_increment_norm: last, truncated: false });
        }
    }
    Ok(StationarySample { x: StateVec::new(series.sum)?, terms: policy.max_terms, last_increment_norm: last, truncated: true })
}

/// The first `terms` terms of the backward series, with the norm of every increment.
pub fn backward_partial_sum_with<R: Rng + ?Sized>(
    model: &Model,
    scan: &ScanPolicy,
    phase: usize,
    terms: usize,
    rng: &mut R,
) -> Result<(StateVec, Vec<f64>)> {
    scan.validate(model.dim())?;
    let mut series = BackwardSeries::new(model.dim());
    let norms = (1..=terms).map(|m| series.add_term(model, scan, phase, m, rng)).collect();
    Ok((StateVec::new(series.sum)?, norms))
}

/// Two-sample z statistic for one moment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCheck {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub z: f64,
}

/// Compares means, variances and covariances of two equally weighted samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentComparison {
    pub n_a: usize,
    pub n_b: usize,
    pub checks: Vec<MomentCheck>,
    pub max_abs_z: f64,
    pub threshold: f64,
    pub passes: bool,
}

/// Builds per-moment z statistics. Second moments are centered at the pooled
/// mean of each coordinate so both samples use the same centering.
pub fn compare_moments(a: &[Vec<f64>], b: &[Vec<f64>], threshold: f64) -> MomentComparison {
    let d = a.first().or(b.first()).map_or(0, |x| x.len());
    let pooled: Vec<f64> = (0..d)
        .map(|c| a.iter().chain(b).map(|x| x[c]).sum::<f64>() / (a.len() + b.len()).max(1) as f64)
        .collect();
    let mut features: Vec<(String, alloc::boxed::Box<dyn Fn(&[f64]) -> f64>)> = Vec::new();
    for c in 0..d {
        features.push((format!("mean[{}]", c + 1), alloc::boxed::Box::new(move |x: &[f64]| x[c])));
    }
    for c in 0..d {
        let mc = pooled[c];
        features.push((format!("var[{}]", c + 1), alloc::boxed::Box::new(move |x: &[f64]| (x[c] - mc) * (x[c] - mc))));
    }
    for c in 0..d {
        for c2 in c + 1..d {
            let (m1, m2) = (pooled[c], pooled[c2]);
            features.push((
                format!("cov[{},{}]", c + 1, c2 + 1),
                alloc::boxed::Box::new(move |x: &[f64]| (x[c] - m1) * (x[c2] - m2)),
            ));
        }
    }
    let checks: Vec<MomentCheck> = features
        .into_iter()
        .map(|(name, f)| {
            let sa: MeanVar = a.iter().map(|x| f(x)).collect();
            let sb: MeanVar = b.iter().map(|x| f(x)).collect();
            let diff = sa.mean - sb.mean;
            let se = (sa.std_error().powi(2) + sb.std_error().powi(2)).sqrt();
            let z = if diff == 0.0 { 0.0 } else { diff / se };
            MomentCheck { name, a: sa.mean, b: sb.mean, z }
        })
        .collect();
    let max_abs_z = checks.iter().map(|c| c.z.abs()).fold(0.0, f64::max);
    MomentComparison { n_a: a.len(), n_b: b.len(), checks, max_abs_z, threshold, passes: max_abs_z <= threshold }
}

pub const STATIONARITY_Z: f64 = 4.0;
pub const MIN_STATIONARITY_SAMPLES: usize = 10_000;

/// Draws `n_samples` stationary states, advances each by `k_extra` steps of
/// the chain and compares moments before and after (`|z| <= 4` passes).
pub fn stationarity_self_test(
    model: &Model,
    scan: &ScanPolicy,
    n_samples: usize,
    k_extra: usize,
    seed: u64,
) -> Result<MomentComparison> {
    stationarity_self_test_with_kernel(model, model, scan, n_samples, k_extra, seed)
}

/// As [`stationarity_self_test`], but advancing with the possibly different
/// model `forward`. Used as a negative control.
///
/// For periodic scans whose period does not divide `k_extra`, the advanced
/// states are compared with a second, independent stationary sample drawn at
/// the phase they end in.
pub fn stationarity_self_test_with_kernel(
    model: &Model,
    forward: &Model,
    scan: &ScanPolicy,
    n_samples: usize,
    k_extra: usize,
    seed: u64,
) -> Result<MomentComparison> {
    if n_samples < MIN_STATIONARITY_SAMPLES {
        return Err(Error::TooFewReplicas { min: MIN_STATIONARITY_SAMPLES, got: n_samples });
    }
    forward.network().check_dim(model.dim())?;
    let policy = TruncationPolicy::default_for(model.dim());
    let draw_seed = derive_seed(seed, 1);
    let step_seed = derive_seed(seed, 2);
    let mut before = Vec::with_capacity(n_samples);
    let mut after = Vec::with_capacity(n_samples);
    for r in 0..n_samples {
        let x = sample_stationary_with(model, scan, 0, &policy, &mut stream_rng(draw_seed, r as u64))?.x;
        let run = forward.simulate_from_phase(&x, 0, k_extra, scan, &mut stream_rng(step_seed, r as u64), false)?;
        before.push(x.into_inner());
        after.push(run.state.into_inner());
    }
    let shifted_phase = scan.period(model.dim()).is_some_and(|p| !k_extra.is_multiple_of(p));
    if shifted_phase {
        let ref_seed = derive_seed(seed, 3);
        before = (0..n_samples)
            .map(|r| {
                sample_stationary_with(model, scan, k_extra, &policy, &mut stream_rng(ref_seed, r as u64))
                    .map(|s| s.x.into_inner())
            })
            .collect::<Result<_>>()?;
    }
    Ok(compare_moments(&before, &after, STATIONARITY_Z))
}

pub const EXCHANGEABILITY_Z: f64 = 3.0;

/// Compares the law of `X_k - A_{I_k} ... A_{I_1} x0` (forward runs) with the
/// `k`-term backward partial sum by first and second moments (`|z| <= 3`).
pub fn exchangeability_check(
    model: &Model,
    scan: &ScanPolicy,
    x0: &[f64],
    k: usize,
    replicas: usize,
    seed: u64,
) -> Result<MomentComparison> {
    let fwd_seed = derive_seed(seed, 11);
    let bwd_seed = derive_seed(seed, 12);
    let mut forward = Vec::with_capacity(replicas);
    let mut backward = Vec::with_capacity(replicas);
    for r in 0..replicas {
        let run = model.simulate_forward_with(x0, k, scan, &mut stream_rng(fwd_seed, r as u64), false)?;
        let mean = model.mean_after_updates(x0, &run.indices)?;
        forward.push(run.state.iter().zip(mean.iter()).map(|(a, b)| a - b).collect());
        let (partial, _) = backward_partial_sum_with(model, scan, k, k, &mut stream_rng(bwd_seed, r as u64))?;
        backward.push(partial.into_inner());
    }
    Ok(compare_moments(&forward, &backward, EXCHANGEABILITY_Z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, Network};

    fn swap() -> Model {
        Model::new(Network::swap(), ModelParams::uniform(2, 0.55, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn policy_validation() {
        assert!(TruncationPolicy::new(0.0, 2, 10).is_err());
        assert!(TruncationPolicy::new(1e-9, 0, 10).is_err());
        assert!(TruncationPolicy::new(1e-9, 20, 10).is_err());
        assert_eq!(TruncationPolicy::default_for(3), TruncationPolicy::new(1e-10, 3, 10_000).unwrap());
    }

    #[test]
    fn zero_noise_stops_after_patience() {
        let m = swap().with_noise_scale(0.0).unwrap();
        let policy = TruncationPolicy::default_for(2);
        let s = sample_stationary(&m, &ScanPolicy::RandomScan, 0, &policy, 1).unwrap();
        assert_eq!(s.x.as_slice(), &[0.0, 0.0]);
        assert_eq!(s.terms, 2);
        assert!(!s.truncated);
    }

    #[test]
    fn cap_is_flagged() {
        let policy = TruncationPolicy::new(1e-300, 1, 5).unwrap();
        let s = sample_stationary(&swap(), &ScanPolicy::RandomScan, 0, &policy, 1).unwrap();
        assert!(s.truncated);
        assert_eq!(s.terms, 5);
    }

    #[test]
    fn repeated_index_does_not_stop_early() {
        // 0, 0, 0, ... in the backward order: increments 2.. are exactly zero.
        let scan = ScanPolicy::ExplicitSequence(vec![0, 0, 0, 1]);
        let policy = TruncationPolicy::default_for(2);
        let s = sample_stationary(&swap(), &scan, 3, &policy, 2).unwrap();
        assert!(s.terms > 10, "{s:?}");
    }

    #[test]
    fn prefix_matches_direct_products() {
        // Independent route: rebuild each term by applying A's to b_i directly.
        let m = Model::new(Network::path(3).unwrap(), ModelParams::uniform(3, 0.6, 1.3).unwrap()).unwrap();
        let scan = ScanPolicy::ExplicitSequence(vec![0, 2, 1, 1, 0]);
        let mut rng = stream_rng(4, 0);
        let (sum, _) = backward_partial_sum_with(&m, &scan, 3, 7, &mut rng).unwrap();
        let mut rng = stream_rng(4, 0);
        let mut direct = [0.0; 3];
        let mut used = Vec::new();
        for t in 1..=7 {
            let i = scan.backward_index(3, 3, t, &mut rng);
            let mut v = [0.0; 3];
            v[i] = m.draw_increment(i, &mut rng);
            for &j in used.iter().rev() {
                m.apply_a_in_place(j, &mut v);
            }
            used.push(i);
            (0..3).for_each(|c| direct[c] += v[c]);
        }
        assert!(sum.iter().zip(&direct).all(|(a, b)| (a - b).abs() < 1e-13), "{sum:?} {direct:?}");
    }

    #[test]
    fn identical_sets_give_zero_z() {
        let m = swap();
        let r = stationarity_self_test(&m, &ScanPolicy::RandomScan, 10_000, 0, 3).unwrap();
        assert!(r.checks.iter().all(|c| c.z == 0.0));
        assert!(r.passes);
        assert_eq!(r.checks.len(), 5);
    }
}
