//! Exact sampling of centered stationary Gaussian paths.
//!
//! Paths are drawn by circulant embedding: the Toeplitz covariance of order
//! `n` is embedded in a circulant of size `2(n−1)` whose eigenvalues come
//! from one FFT. Small negative eigenvalues (relative magnitude below `1e−8`)
//! are clipped; anything worse falls back to a dense Cholesky factor of the
//! Toeplitz matrix with a `1e−10·σ_0` diagonal jitter.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{covariances_from_spectral, CovarianceSequence, DensityFn};

/// Quadrature nodes used for covariances of closed-form densities.
pub const DENSITY_QUADRATURE_POINTS: usize = 1 << 14;

const CLIP_TOLERANCE: f64 = 1e-8;
const CHOLESKY_JITTER: f64 = 1e-10;

/// Deterministic random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha20, whose 64-bit stream selector gives independent
/// streams for distinct ids under a common seed.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream_id: u64,
    inner: ChaCha20Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Closed-form spectral densities known by name.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "formula", rename_all = "snake_case")]
pub enum ClosedFormDensity {
    /// `scale·(|cos ω|^power + offset)` in the un-normalized convention
    /// `Σ_j σ_j e^{−ijω}`; divided by `2π` on evaluation.
    CosinePower { scale: f64, power: f64, offset: f64 },
}

impl ClosedFormDensity {
    pub fn eval(&self, omega: f64) -> f64 {
        match *self {
            ClosedFormDensity::CosinePower {
                scale,
                power,
                offset,
            } => scale * (omega.cos().abs().powf(power) + offset) / (2.0 * PI),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessSpec {
    /// AR(1) parameterized by its marginal variance `σ_0`.
    Ar1 {
        phi: f64,
        marginal_var: f64,
        max_lag: usize,
    },
    ClosedForm {
        density: ClosedFormDensity,
        max_lag: usize,
    },
    /// `σ_k = scale·(1+|k|)^{−exponent}`.
    PolyCov {
        scale: f64,
        exponent: f64,
        max_lag: usize,
    },
    Explicit {
        covs: CovarianceSequence,
    },
}

impl ProcessSpec {
    /// The three simulation examples: AR(0.8) with `σ_0 = 1.44`; the density
    /// `1.27{|cos ω|^{0.8} + 0.45}`; and `σ_k = 1.44(1+|k|)^{−5.1}`.
    pub fn example(id: u8, max_lag: usize) -> Result<Self> {
        match id {
            1 => Ok(ProcessSpec::Ar1 {
                phi: 0.8,
                marginal_var: 1.44,
                max_lag,
            }),
            2 => Ok(ProcessSpec::ClosedForm {
                density: ClosedFormDensity::CosinePower {
                    scale: 1.27,
                    power: 0.8,
                    offset: 0.45,
                },
                max_lag,
            }),
            3 => Ok(ProcessSpec::PolyCov {
                scale: 1.44,
                exponent: 5.1,
                max_lag,
            }),
            other => Err(invalid(format!(
                "unknown example {other}, expected 1, 2 or 3"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessSpec::Ar1 {
                phi, marginal_var, ..
            } => {
                if !(phi.abs() < 1.0) {
                    return Err(invalid(format!("AR(1) needs |phi| < 1, got {phi}")));
                }
                if !(*marginal_var >= 0.0) {
                    return Err(invalid("AR(1) marginal variance must be nonnegative"));
                }
            }
            ProcessSpec::PolyCov {
                scale, exponent, ..
            } => {
                if !(*exponent > 1.0) {
                    return Err(invalid(format!(
                        "polynomial covariance needs exponent > 1, got {exponent}"
                    )));
                }
                if !(*scale >= 0.0) {
                    return Err(invalid("polynomial covariance scale must be nonnegative"));
                }
            }
            ProcessSpec::ClosedForm { .. } | ProcessSpec::Explicit { .. } => {}
        }
        Ok(())
    }
}

pub fn covs_of(spec: &ProcessSpec) -> Result<CovarianceSequence> {
    spec.validate()?;
    match spec {
        ProcessSpec::Ar1 {
            phi,
            marginal_var,
            max_lag,
        } => CovarianceSequence::new(
            (0..=*max_lag)
                .map(|j| marginal_var * phi.powi(j as i32))
                .collect(),
        ),
        ProcessSpec::ClosedForm { density, max_lag } => {
            let points = DENSITY_QUADRATURE_POINTS.max(2 * (max_lag + 1));
            let points = points + points % 2;
            let d = *density;
            covariances_from_spectral(&DensityFn(move |w| d.eval(w)), *max_lag, points)
        }
        ProcessSpec::PolyCov {
            scale,
            exponent,
            max_lag,
        } => CovarianceSequence::new(
            (0..=*max_lag)
                .map(|k| scale * (1.0 + k as f64).powf(-exponent))
                .collect(),
        ),
        ProcessSpec::Explicit { covs } => Ok(covs.clone()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingMethod {
    /// Circulant embedding, falling back to Cholesky when the embedding is
    /// not nonnegative definite.
    Auto,
    Cholesky,
}

enum Plan {
    Degenerate,
    Circulant {
        sqrt_eigs: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Cholesky(DMatrix<f64>),
}

/// Precomputed sampler for `N(0, Σ)` with `Σ = (σ_{|i−j|})` of order `n`.
///
/// Sampling takes `&self`; concurrent callers each bring their own stream.
pub struct GaussianSampler {
    n: usize,
    sigma0: f64,
    plan: Plan,
}

impl GaussianSampler {
    pub fn new(covs: &CovarianceSequence, n: usize) -> Result<Self> {
        Self::with_method(covs, n, SamplingMethod::Auto)
    }

    pub fn with_method(
        covs: &CovarianceSequence,
        n: usize,
        method: SamplingMethod,
    ) -> Result<Self> {
        if n == 0 {
            return Err(invalid("path length must be at least 1"));
        }
        let sigma0 = covs.get(0);
        if n == 1 {
            return Ok(Self {
                n,
                sigma0,
                plan: Plan::Degenerate,
            });
        }
        if method == SamplingMethod::Auto {
            if let Some(plan) = circulant_plan(covs, n) {
                return Ok(Self { n, sigma0, plan });
            }
        }
        let plan = cholesky_plan(covs, n)?;
        Ok(Self { n, sigma0, plan })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn uses_circulant(&self) -> bool {
        matches!(self.plan, Plan::Circulant { .. })
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.plan {
            Plan::Degenerate => {
                let g: f64 = StandardNormal.sample(rng);
                vec![self.sigma0.sqrt() * g]
            }
            Plan::Circulant { sqrt_eigs, fft } => {
                let mut buf: Vec<Complex64> = sqrt_eigs
                    .iter()
                    .map(|s| {
                        let re: f64 = StandardNormal.sample(rng);
                        let im: f64 = StandardNormal.sample(rng);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf[..self.n].iter().map(|c| c.re).collect()
            }
            Plan::Cholesky(l) => {
                let g = DVector::from_fn(self.n, |_, _| StandardNormal.sample(rng));
                (l * g).iter().copied().collect()
            }
        }
    }
}

fn circulant_plan(covs: &CovarianceSequence, n: usize) -> Option<Plan> {
    let m = 2 * (n - 1);
    let mut row: Vec<Complex64> = (0..m)
        .map(|k| {
            let lag = if k <= m / 2 { k } else { m - k };
            Complex64::new(covs.get(lag as i64), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);
    let eigs: Vec<f64> = row.iter().map(|c| c.re).collect();
    let max = eigs.iter().copied().fold(0.0_f64, f64::max);
    let min = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -CLIP_TOLERANCE * max {
        return None;
    }
    let sqrt_eigs = eigs
        .iter()
        .map(|&l| (l.max(0.0) / m as f64).sqrt())
        .collect();
    Some(Plan::Circulant { sqrt_eigs, fft })
}

fn cholesky_plan(covs: &CovarianceSequence, n: usize) -> Result<Plan> {
    let mut t = covs.toeplitz(n);
    let jitter = CHOLESKY_JITTER * covs.get(0);
    for i in 0..n {
        t[(i, i)] += jitter;
    }
    Cholesky::new(t)
        .map(|c| Plan::Cholesky(c.l()))
        .ok_or_else(|| {
            Error::Indefinite(format!(
                "circulant embedding and Cholesky both failed at order {n}"
            ))
        })
}

/// One draw of length `n`; see [`GaussianSampler`] for repeated use.
pub fn sample_path(covs: &CovarianceSequence, n: usize, rng: &mut SeededRng) -> Result<Vec<f64>> {
    Ok(GaussianSampler::new(covs, n)?.sample(rng))
}
