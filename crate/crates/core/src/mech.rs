//! Privacy mechanisms and their verifiers.
//!
//! One non-interactive mechanism (trim and add Laplace noise) and three
//! sequentially interactive ones. Each interactive mechanism is a
//! randomizer whose `release` method sees only the current raw value `X_i`
//! and the already published `Z_1..Z_{i−1}`, so the sequential contract
//! holds by construction. Every index consumes a fixed number of uniform
//! draws whatever branch it takes, which makes transcripts replayable.
//!
//! The hypercube randomizer maps a vector of the `ℓ∞` ball of radius `τ̃`
//! to a vertex of `{±B}^{K+1}`. Its output distribution can be enumerated
//! exactly for small `K`, which is how unbiasedness and the privacy ratio
//! are certified.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{MechanismKind, TruncationSchedule};

/// Largest `K` accepted by the exact hypercube enumeration.
pub const MAX_ENUMERATION_K: usize = 10;

/// Clamp to `[−τ, τ]`.
pub fn trim(x: f64, tau: f64) -> f64 {
    x.clamp(-tau, tau)
}

fn laplace_from_uniform(u: f64, scale: f64) -> f64 {
    let c = u - 0.5;
    -scale * c.signum() * (1.0 - 2.0 * c.abs()).ln()
}

/// One draw from `Lap(0, scale)` by inversion of a single open-interval uniform.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    debug_assert!(scale > 0.0);
    laplace_from_uniform(rng.sample(Open01), scale)
}

/// Laplace source that always consumes its uniform. With `enabled = false`
/// it returns zero noise, which estimator tests use to compare against
/// noiseless statistics.
#[derive(Clone, Copy, Debug)]
pub(crate) struct NoiseGate {
    enabled: bool,
}

impl NoiseGate {
    pub(crate) const ON: NoiseGate = NoiseGate { enabled: true };
    #[cfg(test)]
    pub(crate) const OFF: NoiseGate = NoiseGate { enabled: false };

    fn laplace<R: Rng + ?Sized>(self, scale: f64, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        if self.enabled {
            laplace_from_uniform(u, scale)
        } else {
            0.0
        }
    }
}

/// Metadata recorded with every transcript so estimators can refuse a
/// mismatched schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptMeta {
    pub kind: MechanismKind,
    pub n: usize,
    pub alpha: f64,
    pub tau: f64,
    pub tau_tilde: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Aux {
    None,
    /// `Z̄_{i,j}` for `i = j+1..n` (all `i` when `j = 0`).
    Cov {
        j: usize,
        values: Vec<f64>,
    },
    /// `Z̃_i` for `i = K+1..n`.
    Point {
        omega: f64,
        k: usize,
        values: Vec<f64>,
    },
    /// Rows `Ž_i ∈ R^{K+1}` for `i = K+1..n`.
    Global {
        k: usize,
        b: f64,
        rows: Vec<Vec<f64>>,
    },
}

/// Privatized outputs of one run.
///
/// `z` holds `Z_1..Z_n`. It is empty for the `j = 0` covariance mechanism,
/// which releases only `Z̄_{i,0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub z: Vec<f64>,
    pub aux: Aux,
    pub meta: TranscriptMeta,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("alpha must be positive, got {alpha}")))
    }
}

fn meta(kind: MechanismKind, n: usize, alpha: f64, sched: &TruncationSchedule) -> TranscriptMeta {
    TranscriptMeta {
        kind,
        n,
        alpha,
        tau: sched.tau,
        tau_tilde: sched.tau_tilde,
    }
}

/// `Z_i = trim(X_i, τ) + Lap(2τ/α)`, independently over `i`.
pub fn privatize_ni<R: Rng + ?Sized>(
    path: &[f64],
    sched: &TruncationSchedule,
    alpha: f64,
    rng: &mut R,
) -> Result<Transcript> {
    check_alpha(alpha)?;
    let scale = 2.0 * sched.tau / alpha;
    let z = path
        .iter()
        .map(|&x| trim(x, sched.tau) + laplace_sample(scale, rng))
        .collect();
    Ok(Transcript {
        z,
        aux: Aux::None,
        meta: meta(MechanismKind::Ni, path.len(), alpha, sched),
    })
}

/// Per-index randomizer for a single covariance coefficient `σ_j`.
#[derive(Clone, Copy, Debug)]
pub struct SiCovRandomizer {
    pub j: usize,
    pub tau: f64,
    pub tau_tilde: f64,
    pub alpha: f64,
}

impl SiCovRandomizer {
    /// Output at index `i = history.len() + 1`: `(Z_i, Z̄_{i,j})`.
    ///
    /// For `j ≥ 1`, `Z_i = trim(X_i, τ) + Lap(4τ/α)` and, once `i > j`,
    /// `Z̄_{i,j} = trim(X_i Z_{i−j}, τ̃) + Lap(4τ̃/α)`. For `j = 0` only
    /// `Z̄_{i,0} = trim(X_i², τ) + Lap(2τ/α)` is released and `Z_i` is `None`.
    pub fn release<R: Rng + ?Sized>(
        &self,
        x: f64,
        history: &[f64],
        rng: &mut R,
    ) -> (Option<f64>, Option<f64>) {
        self.release_gated(x, history, NoiseGate::ON, rng)
    }

    pub(crate) fn release_gated<R: Rng + ?Sized>(
        &self,
        x: f64,
        history: &[f64],
        noise: NoiseGate,
        rng: &mut R,
    ) -> (Option<f64>, Option<f64>) {
        if self.j == 0 {
            let zbar = trim(x * x, self.tau) + noise.laplace(2.0 * self.tau / self.alpha, rng);
            return (None, Some(zbar));
        }
        let z = trim(x, self.tau) + noise.laplace(4.0 * self.tau / self.alpha, rng);
        let xi = noise.laplace(4.0 * self.tau_tilde / self.alpha, rng);
        let i = history.len();
        let zbar = (i >= self.j).then(|| trim(x * history[i - self.j], self.tau_tilde) + xi);
        (Some(z), zbar)
    }
}

pub fn privatize_si_cov<R: Rng + ?Sized>(
    path: &[f64],
    j: usize,
    sched: &TruncationSchedule,
    alpha: f64,
    rng: &mut R,
) -> Result<Transcript> {
    si_cov_gated(path, j, sched, alpha, NoiseGate::ON, rng)
}

pub(crate) fn si_cov_gated<R: Rng + ?Sized>(
    path: &[f64],
    j: usize,
    sched: &TruncationSchedule,
    alpha: f64,
    noise: NoiseGate,
    rng: &mut R,
) -> Result<Transcript> {
    check_alpha(alpha)?;
    if j >= path.len() {
        return Err(invalid(format!(
            "lag j = {j} must be below n = {}",
            path.len()
        )));
    }
    let r = SiCovRandomizer {
        j,
        tau: sched.tau,
        tau_tilde: sched.tau_tilde,
        alpha,
    };
    let mut z = Vec::with_capacity(path.len());
    let mut values = Vec::with_capacity(path.len() - j);
    for &x in path {
        let (zi, zbar) = r.release_gated(x, &z, noise, rng);
        if let Some(zi) = zi {
            z.push(zi);
        }
        if let Some(v) = zbar {
            values.push(v);
        }
    }
    Ok(Transcript {
        z,
        aux: Aux::Cov { j, values },
        meta: meta(MechanismKind::SiCov, path.len(), alpha, sched),
    })
}

/// De la Vallée-Poussin taper: 1 up to `K/2`, then `2(1 − |k|/K)`.
pub fn vdp_weight(k: i64, big_k: usize) -> Result<f64> {
    let ak = k.unsigned_abs() as usize;
    if big_k == 0 || ak > big_k {
        return Err(invalid(format!(
            "weight index |k| = {ak} outside 0..={big_k}"
        )));
    }
    let kf = ak as f64;
    let bk = big_k as f64;
    Ok(if 2.0 * kf <= bk {
        1.0
    } else {
        2.0 * (1.0 - kf / bk)
    })
}

/// Per-index randomizer for the spectral density at one frequency.
#[derive(Clone, Debug)]
pub struct SiPointRandomizer {
    pub omega: f64,
    pub k: usize,
    pub tau: f64,
    pub tau_tilde: f64,
    pub alpha: f64,
    /// `2 a_k cos(ωk)` for `k = 1..=K`.
    taper: Vec<f64>,
}

impl SiPointRandomizer {
    pub fn new(omega: f64, k: usize, tau: f64, tau_tilde: f64, alpha: f64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("K must be at least 1"));
        }
        let taper = (1..=k)
            .map(|m| Ok(2.0 * vdp_weight(m as i64, k)? * (omega * m as f64).cos()))
            .collect::<Result<_>>()?;
        Ok(Self {
            omega,
            k,
            tau,
            tau_tilde,
            alpha,
            taper,
        })
    }

    /// `V_i = X_i² + 2 Σ_{k=1}^{K} a_k X_i Z_{i−k} cos(ωk)`, given
    /// `Z_1..Z_{i−1}` with `i − 1 ≥ K`.
    pub fn v_value(&self, x: f64, history: &[f64]) -> f64 {
        let i = history.len();
        let cross: f64 = self
            .taper
            .iter()
            .enumerate()
            .map(|(m, w)| w * history[i - 1 - m])
            .sum();
        x * x + x * cross
    }

    /// `(Z_i, Z̃_i)`; `Z̃_i` is present once `i > K`.
    pub fn release<R: Rng + ?Sized>(
        &self,
        x: f64,
        history: &[f64],
        rng: &mut R,
    ) -> (f64, Option<f64>) {
        self.release_gated(x, history, NoiseGate::ON, rng)
    }

    pub(crate) fn release_gated<R: Rng + ?Sized>(
        &self,
        x: f64,
        history: &[f64],
        noise: NoiseGate,
        rng: &mut R,
    ) -> (f64, Option<f64>) {
        let z = trim(x, self.tau) + noise.laplace(4.0 * self.tau / self.alpha, rng);
        let xi = noise.laplace(4.0 * self.tau_tilde / self.alpha, rng);
        let ztilde =
            (history.len() >= self.k).then(|| trim(self.v_value(x, history), self.tau_tilde) + xi);
        (z, ztilde)
    }
}

pub fn privatize_si_point<R: Rng + ?Sized>(
    path: &[f64],
    omega: f64,
    k: usize,
    sched: &TruncationSchedule,
    alpha: f64,
    rng: &mut R,
) -> Result<Transcript> {
    si_point_gated(path, omega, k, sched, alpha, NoiseGate::ON, rng)
}

pub(crate) fn si_point_gated<R: Rng + ?Sized>(
    path: &[f64],
    omega: f64,
    k: usize,
    sched: &TruncationSchedule,
    alpha: f64,
    noise: NoiseGate,
    rng: &mut R,
) -> Result<Transcript> {
    check_alpha(alpha)?;
    if k == 0 || k >= path.len() {
        return Err(invalid(format!(
            "K = {k} must satisfy 1 <= K < n = {}",
            path.len()
        )));
    }
    let r = SiPointRandomizer::new(omega, k, sched.tau, sched.tau_tilde, alpha)?;
    let mut z = Vec::with_capacity(path.len());
    let mut values = Vec::with_capacity(path.len() - k);
    for &x in path {
        let (zi, zt) = r.release_gated(x, &z, noise, rng);
        z.push(zi);
        values.extend(zt);
    }
    Ok(Transcript {
        z,
        aux: Aux::Point { omega, k, values },
        meta: meta(MechanismKind::SiPoint, path.len(), alpha, sched),
    })
}

/// `C_K` of the hypercube radius.
///
/// `1/C_K = 2^{−K} binom(K, K/2)` for even `K`, and
/// `(K−1)!(K−1) / (2^K ((K+1)/2 − 1)! ((K+1)/2)!)` for odd `K`. Both are
/// evaluated as running products to stay finite for large `K`.
pub fn c_k(k: usize) -> Result<f64> {
    if k < 2 {
        return Err(invalid(format!(
            "hypercube mechanism needs K >= 2, got {k}"
        )));
    }
    // P(m) = 4^{−m} binom(2m, m)
    let central = |m: usize| (1..=m).fold(1.0, |acc, i| acc * (m + i) as f64 / (4 * i) as f64);
    let inv = if k.is_multiple_of(2) {
        central(k / 2)
    } else {
        let h = k.div_ceil(2);
        central(h - 1) * (k - 1) as f64 / (k + 1) as f64
    };
    Ok(1.0 / inv)
}

/// Factor applied to coordinate 0 when `K+1` is even: `(K−1)/(2K)`.
pub fn parity_factor(k: usize) -> f64 {
    if (k + 1).is_multiple_of(2) {
        (k as f64 - 1.0) / (2.0 * k as f64)
    } else {
        1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypercubeParams {
    pub k: usize,
    pub tau_tilde: f64,
    /// Privacy level spent by this randomizer alone.
    pub epsilon: f64,
    pub b: f64,
    pub c_k: f64,
    pub pi_alpha: f64,
}

impl HypercubeParams {
    /// `π = e^ε/(e^ε+1)` and `B = τ̃ (e^ε+1)/(e^ε−1) C_K`.
    pub fn new(k: usize, tau_tilde: f64, epsilon: f64) -> Result<Self> {
        check_alpha(epsilon)?;
        if !(tau_tilde > 0.0 && tau_tilde.is_finite()) {
            return Err(invalid(format!(
                "tau_tilde must be positive, got {tau_tilde}"
            )));
        }
        let c_k = c_k(k)?;
        let e = epsilon.exp();
        Ok(Self {
            k,
            tau_tilde,
            epsilon,
            b: tau_tilde * (e + 1.0) / (e - 1.0) * c_k,
            c_k,
            pi_alpha: e / (e + 1.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.k + 1
    }

    /// Output vector for a vertex given as a sign mask (bit `j` set means `+B`).
    pub fn outcome(&self, mask: u64) -> Vec<f64> {
        let f0 = parity_factor(self.k);
        (0..self.dim())
            .map(|j| {
                let v = if mask >> j & 1 == 1 { self.b } else { -self.b };
                if j == 0 {
                    f0 * v
                } else {
                    v
                }
            })
            .collect()
    }

    fn check_input(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(invalid(format!(
                "hypercube input has length {}, expected {}",
                w.len(),
                self.dim()
            )));
        }
        let tol = self.tau_tilde * 1e-12;
        if let Some(v) = w.iter().find(|v| !(v.abs() <= self.tau_tilde + tol)) {
            return Err(invalid(format!(
                "hypercube input {v} outside the ball of radius {}",
                self.tau_tilde
            )));
        }
        Ok(())
    }
}

/// Whether vertex `z` lies in the hemisphere selected by `T = 1` for the
/// rounded vector `y` (both as sign masks over `dim` coordinates): positive
/// inner product, or zero inner product with `z_0 = y_0`.
fn in_upper_hemisphere(z: u64, y: u64, dim: usize) -> bool {
    let full = if dim == 64 {
        u64::MAX
    } else {
        (1u64 << dim) - 1
    };
    let agree = (!(z ^ y) & full).count_ones() as i64;
    let inner = 2 * agree - dim as i64;
    inner > 0 || (inner == 0 && (z & 1) == (y & 1))
}

/// One privatized view `Ž` of `w` with `‖w‖_∞ ≤ τ̃`.
///
/// Draws `2K + 3` uniforms: `K+1` for the randomized rounding `Ỹ`, one for
/// the hemisphere coin `T`, `K+1` for a uniform vertex. A vertex outside the
/// requested hemisphere is negated, which maps one hemisphere bijectively
/// onto the other, so the result is exactly uniform on the requested set.
pub fn hypercube_sample<R: Rng + ?Sized>(
    w: &[f64],
    params: &HypercubeParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    params.check_input(w)?;
    Ok(hypercube_draw(w, params, rng))
}

fn hypercube_draw<R: Rng + ?Sized>(w: &[f64], params: &HypercubeParams, rng: &mut R) -> Vec<f64> {
    let dim = params.dim();
    let mut y = 0u64;
    for (j, wj) in w.iter().enumerate() {
        let u: f64 = rng.random();
        if u < 0.5 + wj / (2.0 * params.tau_tilde) {
            y |= 1 << j;
        }
    }
    let t = rng.random::<f64>() < params.pi_alpha;
    let mut z = 0u64;
    for j in 0..dim {
        if rng.random::<f64>() < 0.5 {
            z |= 1 << j;
        }
    }
    if in_upper_hemisphere(z, y, dim) != t {
        z = !z & ((1u64 << dim) - 1);
    }
    params.outcome(z)
}

fn rounding_probability(w: &[f64], y: u64, tau_tilde: f64) -> f64 {
    w.iter()
        .enumerate()
        .map(|(j, wj)| {
            let up = 0.5 + wj / (2.0 * tau_tilde);
            if y >> j & 1 == 1 {
                up
            } else {
                1.0 - up
            }
        })
        .product()
}

/// Exact output distribution of the hypercube randomizer at input `w`,
/// indexed by vertex sign mask.
pub fn hypercube_pmf(w: &[f64], params: &HypercubeParams) -> Result<Vec<f64>> {
    params.check_input(w)?;
    if params.k > MAX_ENUMERATION_K {
        return Err(Error::TooLarge(format!(
            "exact enumeration supports K <= {MAX_ENUMERATION_K}, got {}",
            params.k
        )));
    }
    let dim = params.dim();
    let count = 1usize << dim;
    let half = (count / 2) as f64;
    let (p_in, p_out) = (params.pi_alpha / half, (1.0 - params.pi_alpha) / half);
    let mut pmf = vec![0.0; count];
    for y in 0..count as u64 {
        let py = rounding_probability(w, y, params.tau_tilde);
        if py == 0.0 {
            continue;
        }
        for (z, p) in pmf.iter_mut().enumerate() {
            let q = if in_upper_hemisphere(z as u64, y, dim) {
                p_in
            } else {
                p_out
            };
            *p += py * q;
        }
    }
    Ok(pmf)
}

/// `E[Ž | w]` by exact enumeration.
pub fn hypercube_conditional_mean(w: &[f64], params: &HypercubeParams) -> Result<Vec<f64>> {
    let pmf = hypercube_pmf(w, params)?;
    let mut mean = vec![0.0; params.dim()];
    for (mask, p) in pmf.iter().enumerate() {
        for (m, v) in mean.iter_mut().zip(params.outcome(mask as u64)) {
            *m += p * v;
        }
    }
    Ok(mean)
}

/// Per-index randomizer of the global (whole-density) mechanism.
///
/// The budget is split evenly: `Z_i` carries Laplace noise of scale `4τ/α`
/// (level `α/2`) and the hypercube randomizer runs at level `α/2`.
#[derive(Clone, Copy, Debug)]
pub struct SiGlobalRandomizer {
    pub tau: f64,
    pub alpha: f64,
    pub hypercube: HypercubeParams,
}

impl SiGlobalRandomizer {
    pub fn new(k: usize, tau: f64, tau_tilde: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            tau,
            alpha,
            hypercube: HypercubeParams::new(k, tau_tilde, alpha / 2.0)?,
        })
    }

    /// `W̃_i = (trim(X_i², τ̃), trim(X_i Z_{i−1}, τ̃), …, trim(X_i Z_{i−K}, τ̃))`.
    pub fn trimmed_products(&self, x: f64, history: &[f64]) -> Vec<f64> {
        let tt = self.hypercube.tau_tilde;
        let i = history.len();
        std::iter::once(trim(x * x, tt))
            .chain((1..=self.hypercube.k).map(|m| trim(x * history[i - m], tt)))
            .collect()
    }

    /// `(Z_i, Ž_i)`; `Ž_i` is present once `i > K`.
    pub fn release<R: Rng + ?Sized>(
        &self,
        x: f64,
        history: &[f64],
        rng: &mut R,
    ) -> (f64, Option<Vec<f64>>) {
        let z = trim(x, self.tau) + laplace_sample(4.0 * self.tau / self.alpha, rng);
        let k = self.hypercube.k;
        if history.len() >= k {
            let w = self.trimmed_products(x, history);
            (z, Some(hypercube_draw(&w, &self.hypercube, rng)))
        } else {
            // keep the per-index draw count fixed
            let zero = vec![0.0; k + 1];
            let _ = hypercube_draw(&zero, &self.hypercube, rng);
            (z, None)
        }
    }
}

pub fn privatize_si_global<R: Rng + ?Sized>(
    path: &[f64],
    k: usize,
    sched: &TruncationSchedule,
    alpha: f64,
    rng: &mut R,
) -> Result<Transcript> {
    if k < 2 || k >= path.len() {
        return Err(invalid(format!(
            "K = {k} must satisfy 2 <= K < n = {}",
            path.len()
        )));
    }
    let r = SiGlobalRandomizer::new(k, sched.tau, sched.tau_tilde, alpha)?;
    let mut z = Vec::with_capacity(path.len());
    let mut rows = Vec::with_capacity(path.len() - k);
    for &x in path {
        let (zi, row) = r.release(x, &z, rng);
        z.push(zi);
        rows.extend(row);
    }
    Ok(Transcript {
        z,
        aux: Aux::Global {
            k,
            b: r.hypercube.b,
            rows,
        },
        meta: meta(MechanismKind::SiGlobal, path.len(), alpha, sched),
    })
}

/// Parameters for [`ldp_ratio_check`]; fields unused by a kind are ignored.
#[derive(Clone, Copy, Debug)]
pub struct LdpCheckConfig {
    pub alpha: f64,
    pub tau: f64,
    pub tau_tilde: f64,
    pub j: usize,
    pub k: usize,
    pub omega: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LdpReport {
    pub max_ratio: f64,
    /// Level the ratio is compared against (`e^budget`).
    pub budget: f64,
    pub pass: bool,
}

impl LdpReport {
    fn new(max_ratio: f64, budget: f64) -> Self {
        Self {
            max_ratio,
            budget,
            pass: max_ratio <= budget.exp() * (1.0 + 1e-9),
        }
    }
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Supremum of the conditional density (or pmf) ratio between two inputs.
///
/// For the Laplace-based kinds the supremum over outputs is analytic,
/// `exp(Σ_c |μ_c(x) − μ_c(x')| / b_c)` over released components `c` with
/// location `μ_c` and scale `b_c`; it is maximized over a grid of inputs
/// `x, x'` and of previously released values. For the hypercube mechanism
/// the pmf is enumerated exactly at every vertex of the input ball plus a
/// few interior points, and the report covers that randomizer alone with
/// budget `α/2`.
pub fn ldp_ratio_check(
    kind: MechanismKind,
    cfg: &LdpCheckConfig,
    grid_size: usize,
) -> Result<LdpReport> {
    check_alpha(cfg.alpha)?;
    if grid_size < 2 {
        return Err(invalid("grid_size must be at least 2"));
    }
    let (tau, tt, alpha) = (cfg.tau, cfg.tau_tilde, cfg.alpha);
    let x_max = 2.0 * tau.max(tt.sqrt()).max(1.0);
    let xs = linspace(-x_max, x_max, grid_size);
    let log_ratio = match kind {
        MechanismKind::Ni => {
            let b = 2.0 * tau / alpha;
            max_over_pairs(&xs, |x| vec![(trim(x, tau), b)])
        }
        MechanismKind::SiCov if cfg.j == 0 => {
            let b = 2.0 * tau / alpha;
            max_over_pairs(&xs, |x| vec![(trim(x * x, tau), b)])
        }
        MechanismKind::SiCov => {
            let (b, bt) = (4.0 * tau / alpha, 4.0 * tt / alpha);
            linspace(-tt, tt, grid_size)
                .into_iter()
                .map(|prev| {
                    max_over_pairs(&xs, |x| vec![(trim(x, tau), b), (trim(x * prev, tt), bt)])
                })
                .fold(0.0, f64::max)
        }
        MechanismKind::SiPoint => {
            let r = SiPointRandomizer::new(cfg.omega, cfg.k, tau, tt, alpha)?;
            let (b, bt) = (4.0 * tau / alpha, 4.0 * tt / alpha);
            let slope: f64 = r.taper.iter().sum::<f64>().abs().max(1e-12);
            let z_max = (2.0 * (x_max * x_max + tt) / (x_max * slope)).min(1e12);
            linspace(-z_max, z_max, grid_size)
                .into_iter()
                .map(|prev| {
                    let history = vec![prev; cfg.k];
                    max_over_pairs(&xs, |x| {
                        vec![(trim(x, tau), b), (trim(r.v_value(x, &history), tt), bt)]
                    })
                })
                .fold(0.0, f64::max)
        }
        MechanismKind::SiGlobal => return hypercube_ratio_check(cfg, grid_size),
    };
    Ok(LdpReport::new(log_ratio.exp(), alpha))
}

fn max_over_pairs<F: Fn(f64) -> Vec<(f64, f64)>>(xs: &[f64], components: F) -> f64 {
    let comps: Vec<Vec<(f64, f64)>> = xs.iter().map(|&x| components(x)).collect();
    let mut best = 0.0_f64;
    for a in &comps {
        for b in &comps {
            let s: f64 = a
                .iter()
                .zip(b)
                .map(|((m1, s), (m2, _))| (m1 - m2).abs() / s)
                .sum();
            best = best.max(s);
        }
    }
    best
}

fn hypercube_ratio_check(cfg: &LdpCheckConfig, grid_size: usize) -> Result<LdpReport> {
    if cfg.k > MAX_ENUMERATION_K {
        return Err(Error::TooLarge(format!(
            "hypercube ratio check needs K <= {MAX_ENUMERATION_K}, got {}",
            cfg.k
        )));
    }
    let params = HypercubeParams::new(cfg.k, cfg.tau_tilde, cfg.alpha / 2.0)?;
    let dim = params.dim();
    let mut inputs: Vec<Vec<f64>> = (0..1u64 << dim)
        .map(|m| {
            (0..dim)
                .map(|j| {
                    if m >> j & 1 == 1 {
                        cfg.tau_tilde
                    } else {
                        -cfg.tau_tilde
                    }
                })
                .collect()
        })
        .collect();
    inputs.push(vec![0.0; dim]);
    // deterministic interior points
    let interior = grid_size.min(16);
    for p in 0..interior {
        inputs.push(
            (0..dim)
                .map(|j| {
                    let phase = ((p * 7 + j * 3) % 11) as f64 / 10.0;
                    cfg.tau_tilde * (2.0 * phase - 1.0) * 0.9
                })
                .collect(),
        );
    }
    let pmfs = inputs
        .iter()
        .map(|w| hypercube_pmf(w, &params))
        .collect::<Result<Vec<_>>>()?;
    let mut max_ratio = 1.0_f64;
    for z in 0..1usize << dim {
        let hi = pmfs.iter().map(|p| p[z]).fold(0.0, f64::max);
        let lo = pmfs.iter().map(|p| p[z]).fold(f64::INFINITY, f64::min);
        max_ratio = max_ratio.max(hi / lo);
    }
    Ok(LdpReport::new(max_ratio, params.epsilon))
}
