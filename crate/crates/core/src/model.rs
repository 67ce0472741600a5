//! Second-order model of a stationary Gaussian series.
//!
//! Covariances and spectral densities are related through
//! `f(ω) = (1/2π) Σ_j σ_j exp(−ijω)`, which for a real symmetric sequence is
//! the cosine sum `(1/2π)[σ_0 + 2 Σ_{j≥1} σ_j cos(jω)]`. The inverse direction
//! is `σ_j = ∫_{−π}^{π} f(ω) cos(jω) dω`, evaluated here with the uniform-grid
//! rule, which is exact for trigonometric polynomials of degree below half
//! the node count.
//!
//! The module also carries the truncation levels and bandwidths that drive
//! the privacy mechanisms.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Lag-indexed covariances `σ_0..σ_L`, zero beyond `L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CovarianceSequence {
    values: Vec<f64>,
}

impl TryFrom<Vec<f64>> for CovarianceSequence {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<CovarianceSequence> for Vec<f64> {
    fn from(c: CovarianceSequence) -> Vec<f64> {
        c.values
    }
}

impl CovarianceSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("covariance sequence needs at least σ_0"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("covariance value {v}")));
        }
        if values[0] < 0.0 {
            return Err(invalid(format!("σ_0 = {} is negative", values[0])));
        }
        Ok(Self { values })
    }

    pub fn white_noise(variance: f64) -> Result<Self> {
        Self::new(vec![variance])
    }

    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `σ_{|lag|}`, zero beyond the stored support.
    pub fn get(&self, lag: i64) -> f64 {
        self.values
            .get(lag.unsigned_abs() as usize)
            .copied()
            .unwrap_or(0.0)
    }

    /// Copy truncated (or zero-padded) to exactly `max_lag + 1` entries.
    pub fn with_max_lag(&self, max_lag: usize) -> Self {
        let values = (0..=max_lag).map(|j| self.get(j as i64)).collect();
        Self { values }
    }

    /// Dense symmetric Toeplitz matrix `(σ_{|i−j|})` of the given order.
    pub fn toeplitz(&self, order: usize) -> DMatrix<f64> {
        DMatrix::from_fn(order, order, |i, j| self.get(i as i64 - j as i64))
    }

    /// Smallest eigenvalue of the Toeplitz matrix of the given order.
    pub fn min_eigenvalue(&self, order: usize) -> f64 {
        min_eigenvalue(self.toeplitz(order))
    }

    /// Eigenvalue check of positive semi-definiteness for every order up to
    /// `max_order`, with tolerance relative to `σ_0`.
    pub fn is_psd_up_to(&self, max_order: usize) -> bool {
        let tol = 1e-10 * self.values[0].max(f64::MIN_POSITIVE);
        (1..=max_order).all(|m| self.min_eigenvalue(m) >= -tol)
    }
}

pub(crate) fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// A real spectral density on `[−π, π]`.
pub trait SpectralDensity {
    fn eval(&self, omega: f64) -> f64;
}

impl SpectralDensity for CovarianceSequence {
    fn eval(&self, omega: f64) -> f64 {
        spectral_from_cov(self, omega)
    }
}

/// Adapter turning a closure into a [`SpectralDensity`].
pub struct DensityFn<F>(pub F);

impl<F: Fn(f64) -> f64> SpectralDensity for DensityFn<F> {
    fn eval(&self, omega: f64) -> f64 {
        (self.0)(omega)
    }
}

/// `(1/2π)[c_0 + 2 Σ_{j≥1} c_j cos(jω)]` for a coefficient slice.
pub(crate) fn cosine_sum(coeffs: &[f64], omega: f64) -> f64 {
    let Some((&c0, rest)) = coeffs.split_first() else {
        return 0.0;
    };
    let tail: f64 = rest
        .iter()
        .enumerate()
        .map(|(k, c)| c * ((k + 1) as f64 * omega).cos())
        .sum();
    (c0 + 2.0 * tail) / (2.0 * PI)
}

pub fn spectral_from_cov(covs: &CovarianceSequence, omega: f64) -> f64 {
    cosine_sum(&covs.values, omega)
}

fn quadrature_nodes(points: usize) -> Result<Vec<f64>> {
    if points < 64 || !points.is_multiple_of(2) {
        return Err(invalid(format!(
            "quadrature_points must be even and at least 64, got {points}"
        )));
    }
    let h = 2.0 * PI / points as f64;
    Ok((0..points).map(|k| -PI + h * k as f64).collect())
}

fn density_on_grid<F: SpectralDensity + ?Sized>(f: &F, nodes: &[f64]) -> Result<Vec<f64>> {
    nodes
        .iter()
        .map(|&w| {
            let v = f.eval(w);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(format!("density value {v} at ω = {w}")))
            }
        })
        .collect()
}

/// `∫_{−π}^{π} f(ω) cos(jω) dω` by the uniform-grid rule.
pub fn cov_from_spectral<F: SpectralDensity + ?Sized>(
    f: &F,
    j: usize,
    quadrature_points: usize,
) -> Result<f64> {
    let nodes = quadrature_nodes(quadrature_points)?;
    let values = density_on_grid(f, &nodes)?;
    let h = 2.0 * PI / quadrature_points as f64;
    Ok(h * nodes
        .iter()
        .zip(&values)
        .map(|(w, v)| v * (j as f64 * w).cos())
        .sum::<f64>())
}

/// All lags `0..=max_lag` at once through one FFT of the gridded density.
pub fn covariances_from_spectral<F: SpectralDensity + ?Sized>(
    f: &F,
    max_lag: usize,
    quadrature_points: usize,
) -> Result<CovarianceSequence> {
    let nodes = quadrature_nodes(quadrature_points)?;
    let values = density_on_grid(f, &nodes)?;
    CovarianceSequence::new(fourier_cosine_coefficients(&values, max_lag))
}

/// Given `g` sampled at `ω_k = −π + 2πk/N`, returns
/// `(2π/N) Σ_k g_k cos(jω_k)` for `j = 0..=max_lag`. Lags at or beyond `N`
/// alias, so callers keep `max_lag < N`.
pub(crate) fn fourier_cosine_coefficients(grid_values: &[f64], max_lag: usize) -> Vec<f64> {
    let n = grid_values.len();
    let mut buf: Vec<Complex64> = grid_values
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let h = 2.0 * PI / n as f64;
    (0..=max_lag)
        .map(|j| {
            // exp(ijω_k) = (−1)^j exp(2πijk/N)
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * h * buf[j % n].re
        })
        .collect()
}

/// Privacy level α and the exponent δ of `log^{1+δ}(n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub alpha: f64,
    pub delta_log: f64,
}

impl PrivacyBudget {
    pub fn new(alpha: f64, delta_log: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("alpha must be positive, got {alpha}")));
        }
        if !(delta_log > 0.0 && delta_log.is_finite()) {
            return Err(invalid(format!(
                "delta_log must be positive, got {delta_log}"
            )));
        }
        Ok(Self { alpha, delta_log })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MechanismKind {
    /// Non-interactive Laplace mechanism.
    Ni,
    /// Sequentially interactive, single covariance coefficient.
    SiCov,
    /// Sequentially interactive, spectral density at one frequency.
    SiPoint,
    /// Sequentially interactive hypercube mechanism, whole density.
    SiGlobal,
}

impl MechanismKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MechanismKind::Ni => "ni",
            MechanismKind::SiCov => "si-cov",
            MechanismKind::SiPoint => "si-point",
            MechanismKind::SiGlobal => "si-global",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ni" => Ok(MechanismKind::Ni),
            "si-cov" => Ok(MechanismKind::SiCov),
            "si-point" => Ok(MechanismKind::SiPoint),
            "si-global" => Ok(MechanismKind::SiGlobal),
            other => Err(Error::Parse(format!("unknown mechanism kind {other:?}"))),
        }
    }
}

/// Primary and secondary trimming levels `τ` and `τ̃`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationSchedule {
    pub tau: f64,
    pub tau_tilde: f64,
    pub kind: MechanismKind,
}

impl TruncationSchedule {
    /// Caller-chosen levels, e.g. for reduced-τ experiments.
    pub fn custom(tau: f64, tau_tilde: f64, kind: MechanismKind) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid(format!("tau must be positive, got {tau}")));
        }
        if !(tau_tilde > 0.0 && tau_tilde.is_finite()) {
            return Err(invalid(format!(
                "tau_tilde must be positive, got {tau_tilde}"
            )));
        }
        let tau_tilde = if kind == MechanismKind::Ni {
            tau
        } else {
            tau_tilde
        };
        Ok(Self {
            tau,
            tau_tilde,
            kind,
        })
    }
}

/// `(ln n)^{1+δ}`.
pub fn log_factor(n: f64, delta_log: f64) -> f64 {
    n.ln().powf(1.0 + delta_log)
}

/// Theoretical truncation levels for sample size `n`.
///
/// NI: `τ² = 56 L`; SI_COV / SI_GLOBAL: `τ² = 8 L`, `τ̃ = 16 L τ²`;
/// SI_POINT: `τ² = 8 L`, `τ̃² = 1024 τ⁶ (K+1)`; with `L = (ln n)^{1+δ}`.
pub fn truncation_schedule(
    n: usize,
    budget: &PrivacyBudget,
    kind: MechanismKind,
    k: Option<usize>,
) -> Result<TruncationSchedule> {
    if n < 2 {
        return Err(invalid(format!(
            "truncation schedule needs n >= 2, got {n}"
        )));
    }
    truncation_schedule_real(n as f64, budget.delta_log, kind, k)
}

/// Same formulas with a real-valued sample size (used for the `ln n = 1` anchor).
pub fn truncation_schedule_real(
    n: f64,
    delta_log: f64,
    kind: MechanismKind,
    k: Option<usize>,
) -> Result<TruncationSchedule> {
    if !(n > 1.0) {
        return Err(invalid(format!("truncation schedule needs n > 1, got {n}")));
    }
    let l = log_factor(n, delta_log);
    let (tau, tau_tilde) = match kind {
        MechanismKind::Ni => {
            let tau = (56.0 * l).sqrt();
            (tau, tau)
        }
        MechanismKind::SiCov | MechanismKind::SiGlobal => {
            let tau2 = 8.0 * l;
            (tau2.sqrt(), 16.0 * l * tau2)
        }
        MechanismKind::SiPoint => {
            let k = match k {
                Some(k) if k >= 1 => k,
                _ => return Err(invalid("SI point schedule needs K >= 1")),
            };
            let tau2 = 8.0 * l;
            let tau_tilde2 = 1024.0 * tau2.powi(3) * (k as f64 + 1.0);
            (tau2.sqrt(), tau_tilde2.sqrt())
        }
    };
    Ok(TruncationSchedule {
        tau,
        tau_tilde,
        kind,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SmoothnessClass {
    Sobolev { s: f64, l: f64 },
    Hoelder { s: f64, l: f64, l0: f64 },
}

impl SmoothnessClass {
    pub fn sobolev(s: f64, l: f64) -> Result<Self> {
        Self::check(s, l)?;
        Ok(SmoothnessClass::Sobolev { s, l })
    }

    pub fn hoelder(s: f64, l: f64, l0: f64) -> Result<Self> {
        Self::check(s, l)?;
        if !(l0 > 0.0) {
            return Err(invalid(format!(
                "Hölder constant L0 must be positive, got {l0}"
            )));
        }
        Ok(SmoothnessClass::Hoelder { s, l, l0 })
    }

    fn check(s: f64, l: f64) -> Result<()> {
        if !(s > 0.5) {
            return Err(invalid(format!("smoothness s must exceed 1/2, got {s}")));
        }
        if !(l > 0.0) {
            return Err(invalid(format!("radius L must be positive, got {l}")));
        }
        Ok(())
    }

    pub fn s(&self) -> f64 {
        match *self {
            SmoothnessClass::Sobolev { s, .. } | SmoothnessClass::Hoelder { s, .. } => s,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandwidthTask {
    NiGlobal,
    NiPointHoelder,
    NiPointSobolev,
    SiPointHoelder,
    SiPointSobolev,
    SiGlobal,
}

impl BandwidthTask {
    pub fn ni_point(class: &SmoothnessClass) -> Self {
        match class {
            SmoothnessClass::Sobolev { .. } => BandwidthTask::NiPointSobolev,
            SmoothnessClass::Hoelder { .. } => BandwidthTask::NiPointHoelder,
        }
    }

    pub fn si_point(class: &SmoothnessClass) -> Self {
        match class {
            SmoothnessClass::Sobolev { .. } => BandwidthTask::SiPointSobolev,
            SmoothnessClass::Hoelder { .. } => BandwidthTask::SiPointHoelder,
        }
    }
}

/// Fourier truncation order (`m` for NI, `K` for SI) with unit constants.
///
/// NI tasks: `⌈min(n, nα⁴/τ⁴)^{1/(2s+1)}⌉` (exponent `1/(2s)` for Sobolev
/// pointwise); SI pointwise: `⌈min(n, nα²/τ⁶)^{1/(2s+1)}⌉` (again `1/(2s)`
/// for Sobolev); SI global: `⌈min((nα²/τ̃²)^{1/(2s+2)}, n^{1/(2s+1)})⌉`.
/// The result is clamped to `[1, n−1]`.
pub fn bandwidth(
    n: usize,
    budget: &PrivacyBudget,
    s: f64,
    sched: &TruncationSchedule,
    task: BandwidthTask,
) -> Result<usize> {
    if !(s > 0.5) {
        return Err(invalid(format!("smoothness s must exceed 1/2, got {s}")));
    }
    if n < 2 {
        return Err(invalid(format!("bandwidth needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    let a = budget.alpha;
    let tau = sched.tau;
    let raw = match task {
        BandwidthTask::NiGlobal | BandwidthTask::NiPointHoelder => nf
            .min(nf * a.powi(4) / tau.powi(4))
            .powf(1.0 / (2.0 * s + 1.0)),
        BandwidthTask::NiPointSobolev => nf.min(nf * a.powi(4) / tau.powi(4)).powf(1.0 / (2.0 * s)),
        BandwidthTask::SiPointHoelder => {
            nf.min(nf * a * a / tau.powi(6)).powf(1.0 / (2.0 * s + 1.0))
        }
        BandwidthTask::SiPointSobolev => nf.min(nf * a * a / tau.powi(6)).powf(1.0 / (2.0 * s)),
        BandwidthTask::SiGlobal => {
            let privacy = (nf * a * a / sched.tau_tilde.powi(2)).powf(1.0 / (2.0 * s + 2.0));
            privacy.min(nf.powf(1.0 / (2.0 * s + 1.0)))
        }
    };
    let k = raw.ceil();
    let k = if k.is_finite() { k as usize } else { 1 };
    Ok(k.clamp(1, n - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ar1(phi: f64, var: f64, max_lag: usize) -> CovarianceSequence {
        CovarianceSequence::new((0..=max_lag).map(|j| var * phi.powi(j as i32)).collect()).unwrap()
    }

    #[test]
    fn white_noise_density_is_flat() {
        let c = CovarianceSequence::white_noise(2.0).unwrap();
        for w in [-3.0, 0.0, 0.7, PI] {
            assert!((spectral_from_cov(&c, w) - 1.0 / PI).abs() < 1e-15);
        }
    }

    #[test]
    fn two_term_sum_at_zero() {
        let c = CovarianceSequence::new(vec![1.0, 0.5]).unwrap();
        assert!((spectral_from_cov(&c, 0.0) - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn ar1_matches_closed_form() {
        let (phi, var) = (0.8_f64, 1.44);
        let c = ar1(phi, var, 200);
        let w = PI / 5.0;
        let denom = 1.0 - 2.0 * phi * w.cos() + phi * phi;
        let closed = var * (1.0 - phi * phi) / (2.0 * PI) / denom;
        assert!((spectral_from_cov(&c, w) - closed).abs() < 1e-6);
    }

    #[test]
    fn inverse_of_constant() {
        let f = DensityFn(|_w: f64| 3.0);
        assert!(cov_from_spectral(&f, 1, 64).unwrap().abs() < 1e-12);
        assert!((cov_from_spectral(&f, 0, 64).unwrap() - 6.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn inverse_roundtrip_small() {
        let c = CovarianceSequence::new(vec![1.0, 0.3, 0.1]).unwrap();
        assert!((cov_from_spectral(&c, 2, 64).unwrap() - 0.1).abs() < 1e-10);
    }

    #[test]
    fn quadrature_rejects_bad_inputs() {
        let f = DensityFn(|_w: f64| 1.0);
        assert!(cov_from_spectral(&f, 0, 63).is_err());
        assert!(cov_from_spectral(&f, 0, 32).is_err());
        let g = DensityFn(|w: f64| if w > 0.0 { f64::NAN } else { 1.0 });
        assert!(matches!(
            cov_from_spectral(&g, 0, 64),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn fft_route_matches_direct_sum() {
        let f = DensityFn(|w: f64| 1.27 * (w.cos().abs().powf(0.8) + 0.45));
        let all = covariances_from_spectral(&f, 40, 1024).unwrap();
        for j in 0..=40 {
            let direct = cov_from_spectral(&f, j, 1024).unwrap();
            assert!((all.values()[j] - direct).abs() < 1e-11, "lag {j}");
        }
    }

    #[test]
    fn ni_schedule_near_twenty() {
        let b = PrivacyBudget::new(1.0, 0.001).unwrap();
        let s = truncation_schedule(1000, &b, MechanismKind::Ni, None).unwrap();
        assert!((19.0..=21.0).contains(&s.tau), "tau = {}", s.tau);
        assert_eq!(s.tau, s.tau_tilde);
    }

    #[test]
    fn si_cov_schedule_formula() {
        let b = PrivacyBudget::new(1.0, 0.001).unwrap();
        let s = truncation_schedule(1000, &b, MechanismKind::SiCov, None).unwrap();
        let l = 1000f64.ln().powf(1.001);
        assert!((s.tau - (8.0 * l).sqrt()).abs() < 1e-12);
        assert!((s.tau_tilde - 16.0 * l * 8.0 * l).abs() < 1e-9);
    }

    #[test]
    fn unit_log_anchor() {
        let e = std::f64::consts::E;
        let ni = truncation_schedule_real(e, 0.5, MechanismKind::Ni, None).unwrap();
        let si = truncation_schedule_real(e, 0.5, MechanismKind::SiCov, None).unwrap();
        assert!((ni.tau * ni.tau - 56.0).abs() < 1e-12);
        assert!((si.tau * si.tau - 8.0).abs() < 1e-12);
    }

    #[test]
    fn schedule_rejects_small_n_and_missing_k() {
        let b = PrivacyBudget::new(1.0, 0.001).unwrap();
        assert!(truncation_schedule(1, &b, MechanismKind::Ni, None).is_err());
        assert!(truncation_schedule(100, &b, MechanismKind::SiPoint, None).is_err());
        assert!(truncation_schedule(100, &b, MechanismKind::SiPoint, Some(0)).is_err());
    }

    #[test]
    fn bandwidth_examples() {
        let b = PrivacyBudget::new(1.0, 0.001).unwrap();
        let unit = TruncationSchedule::custom(1.0, 1.0, MechanismKind::Ni).unwrap();
        assert_eq!(
            bandwidth(1000, &b, 3.0, &unit, BandwidthTask::NiGlobal).unwrap(),
            3
        );

        let tiny = PrivacyBudget::new(1e-6, 0.001).unwrap();
        let sched = truncation_schedule(1000, &tiny, MechanismKind::SiCov, None).unwrap();
        assert_eq!(
            bandwidth(1000, &tiny, 3.0, &sched, BandwidthTask::SiPointHoelder).unwrap(),
            1
        );

        let b = PrivacyBudget::new(0.2, 0.001).unwrap();
        let sched = truncation_schedule(1000, &b, MechanismKind::SiCov, None).unwrap();
        let brute = (1000f64.min(1000.0 * 0.04 / sched.tau.powi(6)))
            .powf(1.0 / 7.0)
            .ceil()
            .max(1.0) as usize;
        assert_eq!(
            bandwidth(1000, &b, 3.0, &sched, BandwidthTask::SiPointHoelder).unwrap(),
            brute
        );
    }

    #[test]
    fn smoothness_validation() {
        assert!(SmoothnessClass::sobolev(0.5, 1.0).is_err());
        assert!(SmoothnessClass::hoelder(3.0, 1.0, 0.0).is_err());
        let h = SmoothnessClass::hoelder(3.0, 1.0, 1.0).unwrap();
        assert_eq!(BandwidthTask::si_point(&h), BandwidthTask::SiPointHoelder);
        assert_eq!(h.s(), 3.0);
    }

    #[test]
    fn ar1_toeplitz_is_psd() {
        assert!(ar1(0.8, 1.44, 20).is_psd_up_to(12));
        let bad = CovarianceSequence::new(vec![1.0, 2.0]).unwrap();
        assert!(!bad.is_psd_up_to(2));
    }

    proptest! {
        #[test]
        fn roundtrip_recovers_coefficients(vals in prop::collection::vec(-1.0f64..1.0, 1..20)) {
            let mut vals = vals;
            vals[0] = vals[0].abs();
            let c = CovarianceSequence::new(vals.clone()).unwrap();
            let all = covariances_from_spectral(&c, vals.len() - 1, 64).unwrap();
            for (j, v) in vals.iter().enumerate() {
                prop_assert!((cov_from_spectral(&c, j, 64).unwrap() - v).abs() < 1e-10);
                prop_assert!((all.values()[j] - v).abs() < 1e-10);
            }
        }

        #[test]
        fn density_even_and_periodic(vals in prop::collection::vec(-1.0f64..1.0, 1..15), w in -PI..PI) {
            let mut vals = vals;
            vals[0] = vals[0].abs();
            let c = CovarianceSequence::new(vals).unwrap();
            let f = spectral_from_cov(&c, w);
            prop_assert!((f - spectral_from_cov(&c, -w)).abs() < 1e-12);
            prop_assert!((f - spectral_from_cov(&c, w + 2.0 * PI)).abs() < 1e-11);
        }

        #[test]
        fn schedule_monotone_in_n(n in 2usize..100_000, kind_idx in 0usize..4) {
            let kind = [MechanismKind::Ni, MechanismKind::SiCov, MechanismKind::SiPoint, MechanismKind::SiGlobal][kind_idx];
            let b = PrivacyBudget::new(1.0, 0.001).unwrap();
            let a = truncation_schedule(n, &b, kind, Some(4)).unwrap();
            let c = truncation_schedule(n + 1, &b, kind, Some(4)).unwrap();
            prop_assert!(c.tau >= a.tau && c.tau_tilde >= a.tau_tilde);
        }

        #[test]
        fn bandwidth_nonincreasing_as_alpha_shrinks(a1 in 0.01f64..5.0, shrink in 0.05f64..1.0, task_idx in 0usize..6) {
            let task = [BandwidthTask::NiGlobal, BandwidthTask::NiPointHoelder, BandwidthTask::NiPointSobolev,
                        BandwidthTask::SiPointHoelder, BandwidthTask::SiPointSobolev, BandwidthTask::SiGlobal][task_idx];
            let sched = TruncationSchedule::custom(1.5, 20.0, MechanismKind::SiCov).unwrap();
            let hi = PrivacyBudget::new(a1, 0.001).unwrap();
            let lo = PrivacyBudget::new(a1 * shrink, 0.001).unwrap();
            prop_assert!(bandwidth(1000, &lo, 3.0, &sched, task).unwrap() <= bandwidth(1000, &hi, 3.0, &sched, task).unwrap());
        }
    }
}
