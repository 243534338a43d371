//! Exact Gaussian pipeline for `d = 2` with Gaussian noise and the
//! deterministic cycle `0, 1, 0, 1, ...`.
//!
//! Started from a point mass, the law of `X_k` is Gaussian and can be pushed
//! through the linear updates exactly. The chain is 2-periodic in law, so the
//! stationary reference is the fixed point at the same parity (the coordinate
//! updated last).

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Model, NoiseKind};
use crate::quadrature::simpson_2d;
use crate::special::{gaussian_shift_tv, normal_quantile};
use crate::sphere::SphereState;
use crate::stats::MeanVar;
use crate::streams::stream_rng;

const SYMMETRY_TOL: f64 = 1e-12;
const EQUAL_COV_TOL: f64 = 1e-9;
/// Target error of the quadrature method.
pub const QUADRATURE_TOL: f64 = 1e-4;
const BOX_HALF_WIDTH: f64 = 8.0;
/// Half-width of the Monte-Carlo interval in standard errors.
const MC_Z: f64 = 3.0;

/// Bivariate normal law (possibly degenerate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gaussian2 {
    mean: [f64; 2],
    cov: [[f64; 2]; 2],
}

impl Gaussian2 {
    pub fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        if mean.iter().chain(cov.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("gaussian parameters must be finite".into()));
        }
        let scale = cov[0][1].abs().max(cov[1][0].abs()).max(1.0);
        if (cov[0][1] - cov[1][0]).abs() > SYMMETRY_TOL * scale {
            return Err(Error::InvalidParameter("covariance is not symmetric".into()));
        }
        let g = Gaussian2 { mean, cov };
        let (lo, _) = g.eigenvalues();
        if lo < -SYMMETRY_TOL * scale {
            return Err(Error::InvalidParameter("covariance is not positive semidefinite".into()));
        }
        Ok(g)
    }

    pub fn point_mass(mean: [f64; 2]) -> Self {
        Gaussian2 { mean, cov: [[0.0; 2]; 2] }
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    pub fn cov(&self) -> [[f64; 2]; 2] {
        self.cov
    }

    fn det(&self) -> f64 {
        self.cov[0][0] * self.cov[1][1] - self.cov[0][1] * self.cov[1][0]
    }

    fn eigenvalues(&self) -> (f64, f64) {
        let tr = self.cov[0][0] + self.cov[1][1];
        let disc = (0.25 * (self.cov[0][0] - self.cov[1][1]).powi(2) + self.cov[0][1] * self.cov[1][0]).max(0.0).sqrt();
        (0.5 * tr - disc, 0.5 * tr + disc)
    }

    pub fn is_nondegenerate(&self) -> bool {
        let (lo, hi) = self.eigenvalues();
        lo > 1e-14 * hi.max(f64::MIN_POSITIVE)
    }

    fn inverse_cov(&self) -> Result<[[f64; 2]; 2]> {
        if !self.is_nondegenerate() {
            return Err(Error::SingularCovariance);
        }
        let det = self.det();
        Ok([[self.cov[1][1] / det, -self.cov[0][1] / det], [-self.cov[1][0] / det, self.cov[0][0] / det]])
    }

    fn log_density_with(&self, inv: &[[f64; 2]; 2], x: f64, y: f64) -> f64 {
        let (u, v) = (x - self.mean[0], y - self.mean[1]);
        let q = inv[0][0] * u * u + 2.0 * inv[0][1] * u * v + inv[1][1] * v * v;
        -0.5 * q - 0.5 * self.det().ln() - (2.0 * core::f64::consts::PI).ln()
    }

    pub fn density(&self, x: f64, y: f64) -> Result<f64> {
        let inv = self.inverse_cov()?;
        Ok(self.log_density_with(&inv, x, y).exp())
    }

    /// One draw via the Cholesky factor.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let l00 = self.cov[0][0].max(0.0).sqrt();
        let l10 = if l00 > 0.0 { self.cov[1][0] / l00 } else { 0.0 };
        let l11 = (self.cov[1][1] - l10 * l10).max(0.0).sqrt();
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        [self.mean[0] + l00 * z0, self.mean[1] + l10 * z0 + l11 * z1]
    }

    /// Coordinate-wise `mean +- half_width * sd` box.
    fn bounding_box(&self, half_width: f64) -> [(f64, f64); 2] {
        core::array::from_fn(|c| {
            let sd = self.cov[c][c].max(0.0).sqrt();
            (self.mean[c] - half_width * sd, self.mean[c] + half_width * sd)
        })
    }
}

fn check_exact_model(model: &Model) -> Result<()> {
    if model.dim() != 2 {
        return Err(Error::Unsupported("the exact Gaussian pipeline needs d = 2"));
    }
    if model.noise().kind() != NoiseKind::Gaussian {
        return Err(Error::Unsupported("the exact Gaussian pipeline needs Gaussian noise"));
    }
    Ok(())
}

/// `A_i` as a 2x2 matrix.
fn update_matrix(model: &Model, i: usize) -> [[f64; 2]; 2] {
    let mut a = [[1.0, 0.0], [0.0, 1.0]];
    let e = model.params().e()[i];
    a[i] = [e * model.network().p(i, 0), e * model.network().p(i, 1)];
    a
}

/// Law of `A_i X + b_i(Z)` when `X ~ g`.
pub fn push_gaussian(model: &Model, g: &Gaussian2, i: usize) -> Result<Gaussian2> {
    check_exact_model(model)?;
    if i >= 2 {
        return Err(Error::IndexOutOfRange { index: i, dim: 2 });
    }
    let a = update_matrix(model, i);
    let s = model.effective_sigma(i);
    let mut mean = [0.0; 2];
    let mut cov = [[0.0; 2]; 2];
    for r in 0..2 {
        mean[r] = a[r][0] * g.mean[0] + a[r][1] * g.mean[1];
        for c in 0..2 {
            cov[r][c] = (0..2)
                .map(|p| (0..2).map(|q| a[r][p] * g.cov[p][q] * a[c][q]).sum::<f64>())
                .sum();
        }
    }
    mean[i] += s * model.noise().mean();
    cov[i][i] += s * s;
    Gaussian2::new(mean, cov)
}

/// Stationary law seen right after coordinate `parity` was updated under the
/// deterministic cycle.
///
/// With `s_i` the effective noise scales and `D = 1 - e_1^2 e_2^2`, the
/// variances are `a = (e_1^2 s_2^2 + s_1^2) / D` and `b = (e_2^2 s_1^2 + s_2^2) / D`
/// at both parities; the just-updated coordinate equals `e` times the other
/// plus fresh noise, which fixes the covariance.
pub fn stationary_gaussian(model: &Model, parity: usize) -> Result<Gaussian2> {
    check_exact_model(model)?;
    if parity >= 2 {
        return Err(Error::IndexOutOfRange { index: parity, dim: 2 });
    }
    // On two coordinates every valid network is the swap.
    let (e1, e2) = (model.params().e()[0], model.params().e()[1]);
    let (s1, s2) = (model.effective_sigma(0), model.effective_sigma(1));
    let denom = 1.0 - e1 * e1 * e2 * e2;
    let a = (e1 * e1 * s2 * s2 + s1 * s1) / denom;
    let b = (e2 * e2 * s1 * s1 + s2 * s2) / denom;
    let c = if parity == 0 { e1 * b } else { e2 * a };
    let mu = model.noise().mean();
    let m1 = mu * (s1 + e1 * s2) / (1.0 - e1 * e2);
    let m2 = mu * (s2 + e2 * s1) / (1.0 - e1 * e2);
    Gaussian2::new([m1, m2], [[a, c], [c, b]])
}

/// How [`tv_gaussian`] computes the distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TvMethod {
    /// `2 Phi(Delta / 2) - 1` with `Delta` the Mahalanobis distance of the
    /// means; requires equal covariances.
    ClosedForm,
    /// Adaptive 2-D Simpson of `|p1 - p2| / 2`.
    Quadrature,
    /// `E_{x ~ g2}[max(0, 1 - p1(x)/p2(x))]`.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Total variation value with its error: a rounding-level bound for the
/// closed form, the quadrature error estimate, or the half-width of a
/// three-standard-error interval for Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvEstimate {
    pub tv: f64,
    pub err: f64,
}

fn same_covariance(g1: &Gaussian2, g2: &Gaussian2) -> bool {
    g1.cov.iter().flatten().zip(g2.cov.iter().flatten()).all(|(a, b)| (a - b).abs() <= EQUAL_COV_TOL)
}

fn tv_closed_form(g1: &Gaussian2, g2: &Gaussian2) -> Result<TvEstimate> {
    if !same_covariance(g1, g2) {
        return Err(Error::InvalidParameter("closed-form total variation needs equal covariances".into()));
    }
    let inv = g1.inverse_cov()?;
    let (u, v) = (g1.mean[0] - g2.mean[0], g1.mean[1] - g2.mean[1]);
    let q = inv[0][0] * u * u + 2.0 * inv[0][1] * u * v + inv[1][1] * v * v;
    Ok(TvEstimate { tv: gaussian_shift_tv(q.max(0.0).sqrt()), err: 1e-14 })
}

fn tv_quadrature(g1: &Gaussian2, g2: &Gaussian2) -> Result<TvEstimate> {
    let (inv1, inv2) = (g1.inverse_cov()?, g2.inverse_cov()?);
    let f = |x: f64, y: f64| {
        0.5 * (g1.log_density_with(&inv1, x, y).exp() - g2.log_density_with(&inv2, x, y).exp()).abs()
    };
    let (b1, b2) = (g1.bounding_box(BOX_HALF_WIDTH), g2.bounding_box(BOX_HALF_WIDTH));
    let overlap = (0..2).all(|c| b1[c].0 <= b2[c].1 && b2[c].0 <= b1[c].1);
    let tol = 0.5 * QUADRATURE_TOL;
    let r = if overlap {
        let hull: [(f64, f64); 2] = core::array::from_fn(|c| (b1[c].0.min(b2[c].0), b1[c].1.max(b2[c].1)));
        simpson_2d(f, hull[0], hull[1], tol)
    } else {
        let r1 = simpson_2d(f, b1[0], b1[1], 0.5 * tol);
        let r2 = simpson_2d(f, b2[0], b2[1], 0.5 * tol);
        crate::quadrature::Integral { value: r1.value + r2.value, error: r1.error + r2.error }
    };
    Ok(TvEstimate { tv: r.value.clamp(0.0, 1.0), err: r.error })
}

fn tv_monte_carlo(g1: &Gaussian2, g2: &Gaussian2, samples: usize, seed: u64) -> Result<TvEstimate> {
    if samples < 2 {
        return Err(Error::TooFewReplicas { min: 2, got: samples });
    }
    let (inv1, inv2) = (g1.inverse_cov()?, g2.inverse_cov()?);
    let mut rng = stream_rng(seed, 0);
    let acc: MeanVar = (0..samples)
        .map(|_| {
            let [x, y] = g2.sample(&mut rng);
            let log_ratio = g1.log_density_with(&inv1, x, y) - g2.log_density_with(&inv2, x, y);
            (1.0 - log_ratio.exp()).max(0.0)
        })
        .collect();
    Ok(TvEstimate { tv: acc.mean, err: MC_Z * acc.std_error() })
}

pub fn tv_gaussian(g1: &Gaussian2, g2: &Gaussian2, method: TvMethod) -> Result<TvEstimate> {
    match method {
        TvMethod::ClosedForm => tv_closed_form(g1, g2),
        TvMethod::Quadrature => tv_quadrature(g1, g2),
        TvMethod::MonteCarlo { samples, seed } => tv_monte_carlo(g1, g2, samples, seed),
    }
}

/// Closed form when the covariances agree, quadrature otherwise.
pub fn tv_gaussian_auto(g1: &Gaussian2, g2: &Gaussian2) -> Result<TvEstimate> {
    if same_covariance(g1, g2) {
        tv_closed_form(g1, g2)
    } else {
        tv_quadrature(g1, g2)
    }
}

/// One point of an exact curve. `parity` is the coordinate updated at step
/// `k` (0-based), `None` for `k = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub k: usize,
    pub tv: f64,
    pub err: f64,
    pub parity: Option<usize>,
}

/// Exact total variation between `X_k` started at `e^{ln_n} x0_direction` and
/// the stationary law at matching parity, for `k = 0..=k_max`.
///
/// Step `t` (1-based) updates coordinate `(t - 1) mod 2`. For `k <= 1` the law
/// of `X_k` is singular and the distance is 1.
pub fn tv_curve_exact(model: &Model, ln_n: f64, x0_direction: &SphereState, k_max: usize) -> Result<Vec<CurvePoint>> {
    let mut curve = Vec::with_capacity(k_max + 1);
    let mut walk = ExactWalk::new(model, ln_n, x0_direction)?;
    curve.push(walk.point()?);
    for _ in 0..k_max {
        walk.advance()?;
        curve.push(walk.point()?);
    }
    Ok(curve)
}

/// Interpolated `k` at which the curve first drops below `level`.
///
/// Interpolation is linear in `ln Phi^{-1}((1 + tv) / 2)`, the log of half
/// the Mahalanobis distance when covariances agree. That quantity is affine in
/// `k` once the covariance has settled, so the crossing is not biased by the
/// integer grid.
pub fn level_crossing(curve: &[CurvePoint], level: f64) -> Option<f64> {
    let transform = |tv: f64| normal_quantile(0.5 * (1.0 + tv)).ln();
    curve.windows(2).find(|w| w[0].tv >= level && w[1].tv < level).map(|w| {
        let (k0, k1) = (w[0].k as f64, w[1].k as f64);
        let (g0, g1) = (transform(w[0].tv), transform(w[1].tv));
        let g = transform(level);
        if w[0].tv >= 1.0 || !g0.is_finite() || !g1.is_finite() || g0 == g1 {
            // Fall back to linear interpolation in tv.
            k0 + (w[0].tv - level) / (w[0].tv - w[1].tv) * (k1 - k0)
        } else {
            k0 + (g0 - g) / (g0 - g1) * (k1 - k0)
        }
    })
}

/// Walks the exact curve until it drops below `level` and returns the
/// interpolated crossing; `None` if it has not crossed by `k_limit`.
pub fn exact_crossing(
    model: &Model,
    ln_n: f64,
    x0_direction: &SphereState,
    level: f64,
    k_limit: usize,
) -> Result<Option<f64>> {
    let mut walk = ExactWalk::new(model, ln_n, x0_direction)?;
    let mut prev = walk.point()?;
    for _ in 0..k_limit {
        walk.advance()?;
        let next = walk.point()?;
        if prev.tv >= level && next.tv < level {
            return Ok(level_crossing(&[prev, next], level));
        }
        prev = next;
    }
    Ok(None)
}

/// Exact total variation at a single `k`.
pub fn exact_tv_at(model: &Model, ln_n: f64, x0_direction: &SphereState, k: usize) -> Result<CurvePoint> {
    let mut walk = ExactWalk::new(model, ln_n, x0_direction)?;
    for _ in 0..k {
        walk.advance()?;
    }
    walk.point()
}

struct ExactWalk<'a> {
    model: &'a Model,
    law: Gaussian2,
    k: usize,
    stationary: [Gaussian2; 2],
}

impl<'a> ExactWalk<'a> {
    fn new(model: &'a Model, ln_n: f64, x0_direction: &SphereState) -> Result<Self> {
        check_exact_model(model)?;
        if x0_direction.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: x0_direction.dim() });
        }
        if !ln_n.is_finite() {
            return Err(Error::InvalidParameter("ln_n must be finite".into()));
        }
        let n = ln_n.exp();
        let dir = x0_direction.as_slice();
        Ok(ExactWalk {
            model,
            law: Gaussian2::point_mass([n * dir[0], n * dir[1]]),
            k: 0,
            stationary: [stationary_gaussian(model, 0)?, stationary_gaussian(model, 1)?],
        })
    }

    fn advance(&mut self) -> Result<()> {
        self.law = push_gaussian(self.model, &self.law, self.k % 2)?;
        self.k += 1;
        Ok(())
    }

    fn point(&self) -> Result<CurvePoint> {
        let parity = self.k.checked_sub(1).map(|t| t % 2);
        let est = match parity {
            Some(p) if self.law.is_nondegenerate() => tv_gaussian_auto(&self.law, &self.stationary[p])?,
            _ => TvEstimate { tv: 1.0, err: 0.0 },
        };
        Ok(CurvePoint { k: self.k, tv: est.tv, err: est.err, parity })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, Network, NoiseSpec};
    use alloc::vec;

    fn model(e: f64) -> Model {
        Model::new(Network::swap(), ModelParams::uniform(2, e, 1.0).unwrap()).unwrap()
    }

    fn close(a: [[f64; 2]; 2], b: [[f64; 2]; 2], tol: f64) -> bool {
        a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn push_from_point_mass() {
        let m = model(0.55);
        let g = push_gaussian(&m, &Gaussian2::point_mass([1.0, 1.0]), 0).unwrap();
        assert!((g.mean()[0] - 0.55).abs() < 1e-15 && g.mean()[1] == 1.0);
        assert!(close(g.cov(), [[1.0, 0.0], [0.0, 0.0]], 0.0));
        let g = push_gaussian(&m, &Gaussian2::point_mass([0.0, 0.0]), 0).unwrap();
        let g = push_gaussian(&m, &g, 1).unwrap();
        assert!(close(g.cov(), [[1.0, 0.55], [0.55, 1.3025]], 1e-15), "{g:?}");
    }

    #[test]
    fn push_mean_matches_chain_mean() {
        let m = Model::new(Network::swap(), ModelParams::new(vec![0.3, 0.8], vec![1.0, 2.0], NoiseSpec::gaussian()).unwrap())
            .unwrap();
        let seq = [0, 0, 1, 0, 1, 1, 1, 0];
        let mut g = Gaussian2::point_mass([3.0, -2.0]);
        for &i in &seq {
            g = push_gaussian(&m, &g, i).unwrap();
        }
        let mean = m.mean_after_updates(&[3.0, -2.0], &seq).unwrap();
        assert_eq!(g.mean(), [mean[0], mean[1]]);
    }

    #[test]
    fn stationary_reference_values() {
        let m = model(0.55);
        for parity in 0..2 {
            let g = stationary_gaussian(&m, parity).unwrap();
            assert!((g.cov()[0][0] - 1.433_691_756).abs() < 1e-8);
            assert!((g.cov()[1][1] - 1.433_691_756).abs() < 1e-8);
            assert!((g.cov()[0][1] - 0.788_530_466).abs() < 1e-8);
        }
        let g = stationary_gaussian(&model(1e-9), 0).unwrap();
        assert!(close(g.cov(), [[1.0, 0.0], [0.0, 1.0]], 1e-8));
    }

    #[test]
    fn iteration_converges_to_fixed_point() {
        let m = Model::new(Network::swap(), ModelParams::new(vec![0.4, 0.9], vec![1.5, 0.7], NoiseSpec::gaussian()).unwrap())
            .unwrap();
        let mut g = Gaussian2::point_mass([0.0, 0.0]);
        for t in 0..200 {
            g = push_gaussian(&m, &g, t % 2).unwrap();
        }
        let fixed = stationary_gaussian(&m, 1).unwrap();
        assert!(close(g.cov(), fixed.cov(), 1e-10));
        // The two-step map leaves the fixed point in place.
        let again = push_gaussian(&m, &push_gaussian(&m, &fixed, 0).unwrap(), 1).unwrap();
        assert!(close(again.cov(), fixed.cov(), 1e-12));
    }

    #[test]
    fn tv_methods_agree() {
        let id = [[1.0, 0.0], [0.0, 1.0]];
        let g1 = Gaussian2::new([0.0, 0.0], id).unwrap();
        let g2 = Gaussian2::new([2.0, 0.0], id).unwrap();
        let exact = 0.682_689_492_137_085_9;
        let a = tv_gaussian(&g1, &g2, TvMethod::ClosedForm).unwrap();
        let b = tv_gaussian(&g1, &g2, TvMethod::Quadrature).unwrap();
        let c = tv_gaussian(&g1, &g2, TvMethod::MonteCarlo { samples: 200_000, seed: 9 }).unwrap();
        assert!((a.tv - exact).abs() < 1e-12);
        assert!((a.tv - b.tv).abs() < 2e-4 && b.err <= QUADRATURE_TOL, "{b:?}");
        assert!((c.tv - exact).abs() <= c.err, "{c:?}");
        assert_eq!(tv_gaussian(&g1, &g1, TvMethod::ClosedForm).unwrap().tv, 0.0);
    }

    #[test]
    fn singular_covariance_is_rejected() {
        let g = Gaussian2::point_mass([0.0, 0.0]);
        assert_eq!(tv_gaussian(&g, &g, TvMethod::Quadrature), Err(Error::SingularCovariance));
        assert!(Gaussian2::new([0.0; 2], [[1.0, 2.0], [2.0, 1.0]]).is_err());
    }

    #[test]
    fn curve_starts_at_one_and_crosses_near_reference() {
        let m = model(0.55);
        let dir = SphereState::uniform(2);
        let curve = tv_curve_exact(&m, 1000f64.ln(), &dir, 30).unwrap();
        assert_eq!((curve[0].tv, curve[1].tv), (1.0, 1.0));
        assert_eq!(curve[0].parity, None);
        assert_eq!(curve[3].parity, Some(0));
        for w in curve[2..].windows(2) {
            assert!(w[1].tv <= w[0].tv + 1e-6);
        }
        let cross = level_crossing(&curve, 0.5).unwrap();
        assert!((cross - 1000f64.ln() / 0.59784).abs() <= 1.0, "{cross}");
        let direct = exact_crossing(&m, 1000f64.ln(), &dir, 0.5, 30).unwrap().unwrap();
        assert_eq!(cross, direct);
    }
}
