//! Networks, parameters, noise laws and the single-step dynamics of the chain.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::special::{gaussian_shift_tv, normal_cdf};
use crate::streams::stream_rng;

const ROW_SUM_TOL: f64 = 1e-12;
const DENSITY_TOL: f64 = 1e-6;

/// A state of the chain: a finite vector in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVec(Vec<f64>);

impl StateVec {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(StateVec(x))
    }

    pub fn zeros(d: usize) -> Self {
        StateVec(vec![0.0; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl Deref for StateVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Row-stochastic averaging matrix of a strongly connected network without loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    d: usize,
    p: Vec<f64>,
}

impl Network {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
        }
        Self::from_row_major(d, rows.into_iter().flatten().collect())
    }

    pub fn from_row_major(d: usize, p: Vec<f64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::DimensionTooSmall(d));
        }
        if p.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, got: p.len() });
        }
        for i in 0..d {
            let row = &p[i * d..(i + 1) * d];
            if let Some(j) = row.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidNetwork(format!("p[{i}][{j}] = {} is not a probability", row[j])));
            }
            if row[i] != 0.0 {
                return Err(Error::InvalidNetwork(format!("p[{i}][{i}] = {} but loops are not allowed", row[i])));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidNetwork(format!("row {i} sums to {sum}")));
            }
        }
        let net = Network { d, p };
        if !net.strongly_connected() {
            return Err(Error::Disconnected);
        }
        Ok(net)
    }

    /// Row-normalizes symmetric nonnegative edge weights.
    pub fn from_weights(c: &[Vec<f64>]) -> Result<Self> {
        let d = c.len();
        let mut rows = Vec::with_capacity(d);
        for (i, row) in c.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: row.len() });
            }
            let total: f64 = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, w)| *w).sum();
            if total <= 0.0 {
                return Err(Error::Disconnected);
            }
            rows.push(row.iter().enumerate().map(|(j, w)| if j == i { 0.0 } else { w / total }).collect());
        }
        Self::new(rows)
    }

    /// The two-node network: each coordinate averages the other one.
    pub fn swap() -> Self {
        Network { d: 2, p: vec![0.0, 1.0, 1.0, 0.0] }
    }

    /// Complete graph with uniform weights.
    pub fn complete(d: usize) -> Result<Self> {
        let w = 1.0 / (d.max(2) - 1) as f64;
        let rows = (0..d).map(|i| (0..d).map(|j| if i == j { 0.0 } else { w }).collect()).collect();
        Self::new(rows)
    }

    /// Line graph `0 - 1 - ... - (d-1)` with uniform weights over neighbours.
    pub fn path(d: usize) -> Result<Self> {
        let c: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i.abs_diff(j) == 1 { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::from_weights(&c)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.d + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.p[i * self.d..(i + 1) * self.d]
    }

    /// Row-major copy of the matrix.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.d).map(|i| self.row(i).to_vec()).collect()
    }

    /// `(P x)_i`.
    pub(crate) fn average_at(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).iter().zip(x).map(|(p, v)| p * v).sum()
    }

    /// Returns `P x`, the vector of neighbour averages.
    pub fn weighted_average(&self, x: &[f64]) -> Result<StateVec> {
        self.check_dim(x.len())?;
        StateVec::new((0..self.d).map(|i| self.average_at(i, x)).collect())
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got });
        }
        Ok(())
    }

    fn strongly_connected(&self) -> bool {
        let reach = |forward: bool| {
            let mut seen = vec![false; self.d];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(u) = queue.pop_front() {
                for v in 0..self.d {
                    let w = if forward { self.p(u, v) } else { self.p(v, u) };
                    if w > 0.0 && !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }
}

/// Noise families. All are absolutely continuous and have finite log-moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Standard normal.
    Gaussian,
    /// Uniform on `[-1, 1]`.
    Uniform,
    /// Laplace with location 0 and unit scale, density `exp(-|z|) / 2`.
    Laplace,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Uniform => "uniform",
            NoiseKind::Laplace => "laplace",
        }
    }

    fn density(self, z: f64) -> f64 {
        match self {
            NoiseKind::Gaussian => crate::special::normal_pdf(z),
            NoiseKind::Uniform => {
                if z.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            NoiseKind::Laplace => 0.5 * (-z.abs()).exp(),
        }
    }

    /// Pieces on which the density is smooth, wide enough to hold all but a
    /// negligible amount of mass.
    fn smooth_pieces(self) -> &'static [(f64, f64)] {
        match self {
            NoiseKind::Gaussian => &[(-14.0, 14.0)],
            NoiseKind::Uniform => &[(-1.0, 1.0)],
            NoiseKind::Laplace => &[(-60.0, 0.0), (0.0, 60.0)],
        }
    }

    /// Total variation between the law and its translate by `w`.
    pub fn translation_tv(self, w: f64) -> f64 {
        let w = w.abs();
        match self {
            NoiseKind::Gaussian => 2.0 * normal_cdf(0.5 * w) - 1.0,
            NoiseKind::Uniform => (0.5 * w).min(1.0),
            NoiseKind::Laplace => 1.0 - (-0.5 * w).exp(),
        }
    }
}

/// Noise law `gamma`: a standard family optionally shifted by a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    kind: NoiseKind,
    shift: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind) -> Result<Self> {
        Self::shifted(kind, 0.0)
    }

    pub fn gaussian() -> Self {
        NoiseSpec { kind: NoiseKind::Gaussian, shift: 0.0 }
    }

    /// Family translated by `shift`; the density is checked to integrate to one.
    pub fn shifted(kind: NoiseKind, shift: f64) -> Result<Self> {
        if !shift.is_finite() {
            return Err(Error::InvalidParameter(format!("noise shift {shift} is not finite")));
        }
        let spec = NoiseSpec { kind, shift };
        let integral: f64 = kind
            .smooth_pieces()
            .iter()
            .map(|&(a, b)| quadrature::simpson(|z| spec.density(z), a + shift, b + shift, 1e-10).value)
            .sum();
        if (integral - 1.0).abs() > DENSITY_TOL {
            return Err(Error::NoiseNormalization { integral });
        }
        Ok(spec)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn mean(&self) -> f64 {
        self.shift
    }

    pub fn density(&self, z: f64) -> f64 {
        self.kind.density(z - self.shift)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z = match self.kind {
            NoiseKind::Gaussian => rng.sample(StandardNormal),
            NoiseKind::Uniform => rng.random_range(-1.0..1.0),
            NoiseKind::Laplace => {
                let u: f64 = rng.random::<f64>() - 0.5;
                let mag = -(1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln();
                if u < 0.0 {
                    -mag
                } else {
                    mag
                }
            }
        };
        z + self.shift
    }

    /// Total variation between the product law on `R^d` and its translate by
    /// `w`. Exact for Gaussian noise; a union bound over coordinates otherwise.
    pub fn product_shift_tv(&self, w: &[f64]) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => gaussian_shift_tv(norm(w)),
            kind => w.iter().map(|&wi| kind.translation_tv(wi)).sum::<f64>().min(1.0),
        }
    }
}

/// Damping factors, noise scales and the noise law.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    e: Vec<f64>,
    sigma: Vec<f64>,
    noise: NoiseSpec,
}

impl ModelParams {
    pub fn new(e: Vec<f64>, sigma: Vec<f64>, noise: NoiseSpec) -> Result<Self> {
        if e.len() != sigma.len() {
            return Err(Error::DimensionMismatch { expected: e.len(), got: sigma.len() });
        }
        if let Some((i, v)) = e.iter().enumerate().find(|(_, v)| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::InvalidParameter(format!("e[{i}] = {v} must lie in (0, 1)")));
        }
        if let Some((i, v)) = sigma.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("sigma[{i}] = {v} must be positive")));
        }
        Ok(ModelParams { e, sigma, noise })
    }

    /// Same damping `e` and scale `sigma` for every coordinate, Gaussian noise.
    pub fn uniform(d: usize, e: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![e; d], vec![sigma; d], NoiseSpec::gaussian())
    }

    pub fn e(&self) -> &[f64] {
        &self.e
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }
}

/// Rule selecting the coordinate updated at each step.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ScanPolicy {
    /// Independent uniform draws from `{0, ..., d-1}`.
    #[default]
    RandomScan,
    /// `0, 1, ..., d-1, 0, 1, ...`
    DeterministicCycle,
    /// The given 0-based indices, repeated cyclically.
    ExplicitSequence(Vec<usize>),
}

impl ScanPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            ScanPolicy::RandomScan => "random-scan",
            ScanPolicy::DeterministicCycle => "deterministic-cycle",
            ScanPolicy::ExplicitSequence(_) => "explicit-sequence",
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if let ScanPolicy::ExplicitSequence(seq) = self {
            if seq.is_empty() {
                return Err(Error::InvalidParameter("explicit scan sequence is empty".into()));
            }
            if let Some(&index) = seq.iter().find(|&&i| i >= d) {
                return Err(Error::IndexOutOfRange { index, dim: d });
            }
        }
        Ok(())
    }

    pub fn is_random(&self) -> bool {
        matches!(self, ScanPolicy::RandomScan)
    }

    /// Period of the index sequence; `None` for random scan.
    pub fn period(&self, d: usize) -> Option<usize> {
        match self {
            ScanPolicy::RandomScan => None,
            ScanPolicy::DeterministicCycle => Some(d),
            ScanPolicy::ExplicitSequence(seq) => Some(seq.len()),
        }
    }

    fn periodic(&self, d: usize, t: i64) -> usize {
        match self {
            ScanPolicy::DeterministicCycle => t.rem_euclid(d as i64) as usize,
            ScanPolicy::ExplicitSequence(seq) => seq[t.rem_euclid(seq.len() as i64) as usize],
            ScanPolicy::RandomScan => unreachable!(),
        }
    }

    /// Coordinate updated at forward step `step` (0-based).
    pub(crate) fn forward_index<R: Rng + ?Sized>(&self, d: usize, step: usize, rng: &mut R) -> usize {
        match self {
            ScanPolicy::RandomScan => rng.random_range(0..d),
            _ => self.periodic(d, step as i64),
        }
    }

    /// Coordinate of the `m`-th backward term (`m >= 1`) for a chain that has
    /// already taken `phase` forward steps: the update made at step `phase - m`.
    pub(crate) fn backward_index<R: Rng + ?Sized>(&self, d: usize, phase: usize, m: usize, rng: &mut R) -> usize {
        match self {
            ScanPolicy::RandomScan => rng.random_range(0..d),
            _ => self.periodic(d, phase as i64 - m as i64),
        }
    }
}

/// Outcome of [`Model::simulate_forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardRun {
    pub state: StateVec,
    /// Realized update indices, 0-based, in time order.
    pub indices: Vec<usize>,
    /// States `X_0, ..., X_k` when requested.
    pub trajectory: Option<Vec<StateVec>>,
}

/// A network together with its parameters.
///
/// `noise_scale` multiplies every noise draw. It is 1 for the model proper;
/// 0 switches the noise off, which is used for degenerate-limit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    net: Network,
    params: ModelParams,
    noise_scale: f64,
}

impl Model {
    pub fn new(net: Network, params: ModelParams) -> Result<Self> {
        net.check_dim(params.e.len())?;
        Ok(Model { net, params, noise_scale: 1.0 })
    }

    pub fn with_noise_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise scale {scale} must be nonnegative")));
        }
        self.noise_scale = scale;
        Ok(self)
    }

    /// Copy of the model with every damping factor multiplied by `factor`.
    pub fn with_damping_scaled(&self, factor: f64) -> Result<Self> {
        let e = self.params.e.iter().map(|v| v * factor).collect();
        let params = ModelParams::new(e, self.params.sigma.clone(), self.params.noise)?;
        Ok(Model { net: self.net.clone(), params, noise_scale: self.noise_scale })
    }

    pub fn dim(&self) -> usize {
        self.net.d
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.params.noise
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    /// Effective noise scale of coordinate `i`.
    pub fn effective_sigma(&self, i: usize) -> f64 {
        self.params.sigma[i] * self.noise_scale
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.net.d {
            return Err(Error::IndexOutOfRange { index: i, dim: self.net.d });
        }
        Ok(())
    }

    pub(crate) fn apply_a_in_place(&self, i: usize, x: &mut [f64]) {
        x[i] = self.params.e[i] * self.net.average_at(i, x);
    }

    pub(crate) fn apply_sequence_in_place(&self, indices: &[usize], x: &mut [f64]) {
        for &i in indices {
            self.apply_a_in_place(i, x);
        }
    }

    /// `A_i x`: coordinate `i` becomes `e_i (P x)_i`, the rest is unchanged.
    pub fn apply_a(&self, i: usize, x: &[f64]) -> Result<StateVec> {
        self.check_index(i)?;
        self.net.check_dim(x.len())?;
        let mut y = x.to_vec();
        self.apply_a_in_place(i, &mut y);
        StateVec::new(y)
    }

    /// `A_i x + b_i(z)` for a given noise value `z`.
    pub fn chain_step(&self, x: &[f64], i: usize, z: f64) -> Result<StateVec> {
        let mut y = self.apply_a(i, x)?.into_inner();
        y[i] += self.effective_sigma(i) * z;
        StateVec::new(y)
    }

    /// Draws `b_i(Z)` for coordinate `i`.
    pub(crate) fn draw_increment<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> f64 {
        self.effective_sigma(i) * self.params.noise.sample(rng)
    }

    /// Runs `k` steps from `x0` on stream 0 of `seed`.
    pub fn simulate_forward(&self, x0: &[f64], k: usize, scan: &ScanPolicy, seed: u64) -> Result<ForwardRun> {
        self.simulate_forward_with(x0, k, scan, &mut stream_rng(seed, 0), false)
    }

    /// Runs `k` steps from `x0`. For each step the index is drawn first (random
    /// scan only), then the noise.
    pub fn simulate_forward_with<R: Rng + ?Sized>(
        &self,
        x0: &[f64],
        k: usize,
        scan: &ScanPolicy,
        rng: &mut R,
        record_trajectory: bool,
    ) -> Result<ForwardRun> {
        self.simulate_from_phase(x0, 0, k, scan, rng, record_trajectory)
    }

    /// Like [`Model::simulate_forward_with`] for a chain that has already taken
    /// `phase` steps; periodic scans continue their cycle from there.
    pub fn simulate_from_phase<R: Rng + ?Sized>(
        &self,
        x0: &[f64],
        phase: usize,
        k: usize,
        scan: &ScanPolicy,
        rng: &mut R,
        record_trajectory: bool,
    ) -> Result<ForwardRun> {
        self.net.check_dim(x0.len())?;
        scan.validate(self.dim())?;
        let mut x = StateVec::new(x0.to_vec())?.into_inner();
        let mut indices = Vec::with_capacity(k);
        let mut trajectory = record_trajectory.then(|| {
            let mut t = Vec::with_capacity(k + 1);
            t.push(StateVec(x.clone()));
            t
        });
        for step in 0..k {
            let i = scan.forward_index(self.dim(), phase + step, rng);
            self.apply_a_in_place(i, &mut x);
            x[i] += self.draw_increment(i, rng);
            indices.push(i);
            if let Some(t) = trajectory.as_mut() {
                t.push(StateVec(x.clone()));
            }
        }
        Ok(ForwardRun { state: StateVec::new(x)?, indices, trajectory })
    }

    /// `A_{I_k} ... A_{I_1} x0`, the mean of `X_k` given the indices.
    ///
    /// Only meaningful for mean-zero noise, which is enforced.
    pub fn mean_after_updates(&self, x0: &[f64], indices: &[usize]) -> Result<StateVec> {
        let mean = self.params.noise.mean();
        if mean != 0.0 {
            return Err(Error::BiasedNoise(mean));
        }
        self.net.check_dim(x0.len())?;
        if let Some(&index) = indices.iter().find(|&&i| i >= self.dim()) {
            return Err(Error::IndexOutOfRange { index, dim: self.dim() });
        }
        let mut x = x0.to_vec();
        self.apply_sequence_in_place(indices, &mut x);
        StateVec::new(x)
    }
}

/// Network and parameters obtained from a quadratic form
/// `sum_{i<j} c_ij (x_i - x_j)^2 + sum_i g_i (x_i - x*_i)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadformModel {
    pub network: Network,
    pub e: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl QuadformModel {
    pub fn sigma_squared(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| s * s).collect()
    }

    pub fn into_model(self, noise: NoiseSpec) -> Result<Model> {
        Model::new(self.network, ModelParams::new(self.e, self.sigma, noise)?)
    }
}

/// Converts coupling weights `c` (symmetric, zero diagonal) and precisions `g > 0`
/// into `p_ij = c_ij / sum_j c_ij`, `e_i = C_i / (C_i + g_i)` and
/// `sigma_i^2 = 1 / (C_i + g_i)`, where `C_i = sum_{j != i} c_ij`.
pub fn quadform_to_model(c: &[Vec<f64>], g: &[f64]) -> Result<QuadformModel> {
    let d = c.len();
    if g.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: g.len() });
    }
    if let Some((i, v)) = g.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!("g[{i}] = {v} must be positive")));
    }
    for i in 0..d {
        if c[i].len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: c[i].len() });
        }
        if c[i][i] != 0.0 {
            return Err(Error::InvalidParameter(format!("c[{i}][{i}] must be zero")));
        }
        for j in 0..i {
            let (a, b) = (c[i][j], c[j][i]);
            if !(a >= 0.0 && a.is_finite()) || (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::InvalidParameter(format!("c must be symmetric and nonnegative at ({i}, {j})")));
            }
        }
    }
    let network = Network::from_weights(c)?;
    let totals: Vec<f64> = c.iter().map(|row| row.iter().sum()).collect();
    let e = totals.iter().zip(g).map(|(t, gi)| t / (t + gi)).collect();
    let sigma = totals.iter().zip(g).map(|(t, gi)| (1.0 / (t + gi)).sqrt()).collect();
    Ok(QuadformModel { network, e, sigma })
}
