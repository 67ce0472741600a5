//! Estimators built on privatized transcripts, plus non-private baselines.
//!
//! Every estimator checks the transcript metadata against the mechanism and
//! schedule it expects. A bias correction computed with the wrong `τ` or `α`
//! is silently wrong, so mismatches are errors.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mech::{vdp_weight, Aux, Transcript};
use crate::model::{
    cosine_sum, fourier_cosine_coefficients, min_eigenvalue, MechanismKind, SpectralDensity,
    TruncationSchedule,
};

/// Smallest quadrature grid used by [`est_cov_matrix_psd`] by default.
pub const MIN_PSD_QUADRATURE_POINTS: usize = 4096;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

fn expect_kind(t: &Transcript, kind: MechanismKind) -> Result<()> {
    if t.meta.kind != kind {
        return Err(Error::Mismatch(format!(
            "transcript produced by {}, expected {}",
            t.meta.kind.as_str(),
            kind.as_str()
        )));
    }
    Ok(())
}

fn expect_schedule(t: &Transcript, sched: &TruncationSchedule, alpha: f64) -> Result<()> {
    if !close(t.meta.tau, sched.tau) || !close(t.meta.alpha, alpha) {
        return Err(Error::Mismatch(format!(
            "transcript recorded tau = {}, alpha = {}; caller supplied tau = {}, alpha = {}",
            t.meta.tau, t.meta.alpha, sched.tau, alpha
        )));
    }
    Ok(())
}

fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("cannot average an empty sequence"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Lag-`j` product sum `Σ_{t=1}^{n−|j|} Z_t Z_{t+|j|}`.
fn lag_product_sum(z: &[f64], lag: usize) -> f64 {
    z.iter().zip(&z[lag..]).map(|(a, b)| a * b).sum()
}

/// Bias-corrected covariance from a non-interactive transcript.
///
/// `(1/n) Σ Z_t Z_{t+|j|}`, minus `8τ²/α²` at `j = 0`.
pub fn est_cov_ni(t: &Transcript, j: i64, sched: &TruncationSchedule, alpha: f64) -> Result<f64> {
    est_cov_ni_with(t, j, sched, alpha, false)
}

/// As [`est_cov_ni`]; with `renormalize` the lag sum is scaled by
/// `1/(n−|j|)` instead of `1/n`.
pub fn est_cov_ni_with(
    t: &Transcript,
    j: i64,
    sched: &TruncationSchedule,
    alpha: f64,
    renormalize: bool,
) -> Result<f64> {
    expect_kind(t, MechanismKind::Ni)?;
    expect_schedule(t, sched, alpha)?;
    let n = t.z.len();
    let lag = j.unsigned_abs() as usize;
    if lag >= n {
        return Err(invalid(format!("|j| = {lag} must be below n = {n}")));
    }
    let denom = if renormalize { n - lag } else { n } as f64;
    let raw = lag_product_sum(&t.z, lag) / denom;
    Ok(if lag == 0 {
        raw - 8.0 * sched.tau * sched.tau / (alpha * alpha)
    } else {
        raw
    })
}

/// All NI covariance estimates for lags `0..=m`.
pub fn est_cov_vector_ni(
    t: &Transcript,
    m: usize,
    sched: &TruncationSchedule,
    alpha: f64,
) -> Result<Vec<f64>> {
    (0..=m as i64)
        .map(|j| est_cov_ni(t, j, sched, alpha))
        .collect()
}

/// `(1/2π)[σ̂_0 + 2 Σ_{j=1}^{m} σ̂_j cos(jω)]` from NI covariance estimates.
pub fn est_sdf_ni(
    t: &Transcript,
    m: usize,
    sched: &TruncationSchedule,
    alpha: f64,
    omega: f64,
) -> Result<f64> {
    Ok(cosine_sum(&est_cov_vector_ni(t, m, sched, alpha)?, omega))
}

/// Mean of the `Z̄_{i,j}` released by the covariance mechanism.
pub fn est_cov_si(t: &Transcript, j: usize) -> Result<f64> {
    expect_kind(t, MechanismKind::SiCov)?;
    match &t.aux {
        Aux::Cov { j: tj, values } if *tj == j => mean(values),
        Aux::Cov { j: tj, .. } => Err(Error::Mismatch(format!(
            "transcript targets lag {tj}, requested lag {j}"
        ))),
        _ => Err(Error::Mismatch(
            "transcript carries no covariance outputs".into(),
        )),
    }
}

/// Mean of `Z̃_i` divided by `2π`.
pub fn est_sdf_point_si(t: &Transcript, k: usize, omega: f64) -> Result<f64> {
    expect_kind(t, MechanismKind::SiPoint)?;
    match &t.aux {
        Aux::Point {
            omega: tw,
            k: tk,
            values,
        } if *tk == k && close(*tw, omega) => Ok(mean(values)? / (2.0 * PI)),
        Aux::Point {
            omega: tw, k: tk, ..
        } => Err(Error::Mismatch(format!(
            "transcript targets (ω = {tw}, K = {tk}), requested (ω = {omega}, K = {k})"
        ))),
        _ => Err(Error::Mismatch(
            "transcript carries no pointwise outputs".into(),
        )),
    }
}

/// Column means of the hypercube outputs `Ž_i`, giving `σ̌_0..σ̌_K`.
pub fn est_cov_vector_global(t: &Transcript, k: usize) -> Result<Vec<f64>> {
    expect_kind(t, MechanismKind::SiGlobal)?;
    let Aux::Global { k: tk, rows, .. } = &t.aux else {
        return Err(Error::Mismatch(
            "transcript carries no hypercube outputs".into(),
        ));
    };
    if *tk != k {
        return Err(Error::Mismatch(format!(
            "transcript has K = {tk}, requested K = {k}"
        )));
    }
    column_means(rows, k + 1)
}

pub(crate) fn column_means(rows: &[Vec<f64>], width: usize) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(invalid("cannot average an empty set of rows"));
    }
    let mut sums = vec![0.0; width];
    for row in rows {
        if row.len() != width {
            return Err(Error::Mismatch(format!(
                "row of length {}, expected {width}",
                row.len()
            )));
        }
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    Ok(sums.into_iter().map(|s| s / rows.len() as f64).collect())
}

/// Fourier partial sum `(1/2π)[c_0 + 2 Σ_{k=1}^{m} c_k cos(kω)]` together
/// with its values on a caller-chosen grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub coeffs: Vec<f64>,
    pub order: usize,
    /// `(ω, f̂(ω))` pairs.
    pub grid: Vec<(f64, f64)>,
}

impl SpectralEstimate {
    pub fn new(coeffs: Vec<f64>, omega_grid: &[f64]) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("spectral estimate needs at least one coefficient"));
        }
        let order = coeffs.len() - 1;
        let grid = omega_grid
            .iter()
            .map(|&w| (w, cosine_sum(&coeffs, w)))
            .collect();
        Ok(Self {
            coeffs,
            order,
            grid,
        })
    }

    pub fn evaluate(&self, omega: f64) -> f64 {
        cosine_sum(&self.coeffs, omega)
    }
}

impl SpectralDensity for SpectralEstimate {
    fn eval(&self, omega: f64) -> f64 {
        self.evaluate(omega)
    }
}

/// Spectral estimate from the global covariance vector.
pub fn est_sdf_global(coeffs: &[f64], omega_grid: &[f64]) -> Result<SpectralEstimate> {
    SpectralEstimate::new(coeffs.to_vec(), omega_grid)
}

/// `n` equally spaced frequencies on `[0, π]`.
pub fn default_omega_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|i| PI * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// First row `σ†_0..σ†_{n−1}` of a positive semi-definite Toeplitz matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToeplitzEstimate {
    pub first_row: Vec<f64>,
}

impl ToeplitzEstimate {
    pub fn order(&self) -> usize {
        self.first_row.len()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.order();
        DMatrix::from_fn(n, n, |i, j| self.first_row[i.abs_diff(j)])
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(self.to_matrix())
    }
}

/// Default node count `max(4K, 2n, 4096)`, rounded up to an even number.
pub fn default_psd_quadrature_points(order: usize, n: usize) -> usize {
    let p = (4 * order).max(2 * n).max(MIN_PSD_QUADRATURE_POINTS);
    p + p % 2
}

/// Clips the estimate at zero and maps it back to covariances.
///
/// `σ†_j = (2π/N) Σ_k max(f̂(ω_k), 0) cos(jω_k)` on the uniform grid
/// `ω_k = −π + 2πk/N`. Being a nonnegative combination of rank-one
/// matrices `(cos((a−b)ω_k))_{a,b}`, the Toeplitz matrix is PSD for every
/// order, not only up to quadrature error.
pub fn est_cov_matrix_psd(
    est: &SpectralEstimate,
    n: usize,
    quadrature_points: usize,
) -> Result<ToeplitzEstimate> {
    if n == 0 {
        return Err(invalid("matrix order must be positive"));
    }
    if !quadrature_points.is_multiple_of(2)
        || quadrature_points < 4 * est.order
        || quadrature_points < 2 * n
    {
        return Err(invalid(format!(
            "quadrature_points = {quadrature_points} must be even and at least max(4K, 2n) = {}",
            (4 * est.order).max(2 * n)
        )));
    }
    if let Some(c) = est.coeffs.iter().find(|c| !c.is_finite()) {
        return Err(Error::NonFinite(format!("spectral coefficient {c}")));
    }
    let h = 2.0 * PI / quadrature_points as f64;
    let clipped = (0..quadrature_points)
        .map(|k| {
            let v = est.evaluate(-PI + h * k as f64);
            if v.is_finite() {
                Ok(v.max(0.0))
            } else {
                Err(Error::NonFinite(format!("density value {v}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ToeplitzEstimate {
        first_row: fourier_cosine_coefficients(&clipped, n - 1),
    })
}

/// Target of a non-private baseline estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BaselineTask {
    Cov { j: usize },
    SpectralPoint { omega: f64, k: usize },
}

/// Sample covariance `(1/n) Σ_{t=1}^{n−j} X_t X_{t+j}` (mean not removed).
pub fn sample_cov(path: &[f64], j: usize) -> Result<f64> {
    if j >= path.len() {
        return Err(invalid(format!("lag {j} must be below n = {}", path.len())));
    }
    Ok(lag_product_sum(path, j) / path.len() as f64)
}

/// Non-private estimate of a covariance or of the truncated Fourier sum.
pub fn baseline_nonprivate(path: &[f64], task: BaselineTask) -> Result<f64> {
    match task {
        BaselineTask::Cov { j } => sample_cov(path, j),
        BaselineTask::SpectralPoint { omega, k } => {
            let covs = (0..=k)
                .map(|j| sample_cov(path, j))
                .collect::<Result<Vec<_>>>()?;
            Ok(cosine_sum(&covs, omega))
        }
    }
}

/// Weighted sum `(1/2π) Σ_{|k|≤K} a_k σ_k cos(kω)`, the quantity targeted by
/// the pointwise SI estimator.
pub fn tapered_spectral_sum(covs: &[f64], omega: f64, k: usize) -> Result<f64> {
    let weighted = (0..=k)
        .map(|m| Ok(vdp_weight(m as i64, k)? * covs.get(m).copied().unwrap_or(0.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(cosine_sum(&weighted, omega))
}
