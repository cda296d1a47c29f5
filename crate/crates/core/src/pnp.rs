//! Linear spectral denoisers and the plug-and-play proximal-gradient iteration.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::filters::{denoiser_lambda, h_tau, prox_scale};
use crate::laws::{DataLaw, NoiseLaw};
use crate::operators::SingularSystem;
use crate::seqspace::{CoefficientVector, SpaceTag, SpectralSequence};

/// Residual at which the iteration is declared converged.
pub const PNP_TOL: f64 = 1e-10;

/// Denoiser `x_n -> x_n / (1 + lambda_n)`, the prox of `1/2 sum lambda_n x_n^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserSpec {
    lambda: SpectralSequence,
}

impl DenoiserSpec {
    pub fn new(lambda: SpectralSequence) -> Result<Self> {
        if lambda.iter().any(|&l| l < 0.0) {
            return Err(Error::InvalidParameter("denoiser weights must be non-negative".into()));
        }
        Ok(Self { lambda })
    }

    pub fn from_weights(lambda: Vec<f64>) -> Result<Self> {
        Self::new(SpectralSequence::non_negative(lambda, "lambda")?)
    }

    /// Denoiser with prescribed eigenvalues `s_n in (0, 1]`.
    pub fn from_eigenvalues(s: &[f64]) -> Result<Self> {
        if s.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::InvalidParameter("denoiser eigenvalues must lie in (0, 1]".into()));
        }
        Self::from_weights(s.iter().map(|v| (1.0 / v - 1.0).max(0.0)).collect())
    }

    pub fn lambda(&self) -> &SpectralSequence {
        &self.lambda
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.lambda.iter().map(|l| 1.0 / (1.0 + l)).collect()
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Step-matched denoiser `D[tau lambda]`.
    pub fn scaled(&self, tau: f64) -> Result<Self> {
        Self::new(prox_scale(&self.lambda, tau)?)
    }

    /// Spectral filtering `h_tau(D[lambda])` of the denoiser itself.
    pub fn filtered(&self, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
        }
        let s: Vec<f64> = self.eigenvalues().iter().map(|&s| h_tau(s, tau)).collect();
        Self::from_eigenvalues(&s)
    }
}

pub fn apply_denoiser(dn: &DenoiserSpec, x: &CoefficientVector) -> Result<CoefficientVector> {
    ensure_len(dn.len(), x.len())?;
    CoefficientVector::new(dn.lambda.iter().zip(x.entries()).map(|(l, x)| x / (1.0 + l)).collect(), x.space())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiserOptimality {
    pub index: usize,
    pub lambda_closed_form: f64,
    pub lambda_search: f64,
    pub objective_at_closed_form: f64,
    pub objective_at_search: f64,
}

/// `E[(z/(1+lambda) - x)^2]` for `z = x + e` with independent zero-mean noise.
pub fn self_supervised_objective(pi: f64, noise: f64, lambda: f64) -> f64 {
    let s = 1.0 / (1.0 + lambda);
    let r = lambda * s;
    r * r * pi + s * s * noise
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Compares the closed-form optimal weights with a one-dimensional search on
/// the exact per-index denoising objective.
pub fn denoiser_self_supervised_optimality(data: &DataLaw, noise: &NoiseLaw) -> Result<Vec<DenoiserOptimality>> {
    let closed = denoiser_lambda(data, noise)?;
    let mut out = Vec::with_capacity(closed.len());
    for n in 0..closed.len() {
        let (p, e) = (data.pi()[n], noise.delta_seq()[n]);
        let f = |l: f64| self_supervised_objective(p, e, l);
        // search in the eigenvalue s = 1/(1+lambda) in (0, 1], where the objective is a parabola
        let g = |s: f64| {
            let r = 1.0 - s;
            r * r * p + s * s * e
        };
        let s0 = golden_section(g, 0.0, 1.0, 60);
        // the objective is flat at its minimum, so finish on the sign of its derivative
        let dg = |s: f64| -2.0 * (1.0 - s) * p + 2.0 * s * e;
        let (mut lo, mut hi) = ((s0 - 1e-6).max(0.0), (s0 + 1e-6).min(1.0));
        if dg(lo) > 0.0 {
            lo = 0.0;
        }
        if dg(hi) < 0.0 {
            hi = 1.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dg(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = (0.5 * (lo + hi)).clamp(f64::MIN_POSITIVE, 1.0);
        let found = (1.0 - s) / s;
        out.push(DenoiserOptimality {
            index: n,
            lambda_closed_form: closed[n],
            lambda_search: found,
            objective_at_closed_form: f(closed[n]),
            objective_at_search: f(found),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnpReport {
    pub x: CoefficientVector,
    pub iterations: usize,
    pub converged: bool,
    /// Last coordinatewise change `max |x_{k+1} - x_k|`.
    pub residual: f64,
    /// `max_n |1 - tau sigma_n^2| / (1 + tau lambda_n)`.
    pub contraction: f64,
}

fn check_step(s: &SingularSystem, tau: f64) -> Result<()> {
    let limit = 2.0 / (s.sigma_max() * s.sigma_max());
    if !(tau > 0.0 && tau < limit) {
        return Err(Error::InvalidParameter(format!("step size {tau} outside (0, {limit})")));
    }
    Ok(())
}

/// Forward-backward iteration with the given denoiser applied as is:
/// `x <- D(x - tau A^*(Ax - y))`.
pub fn pnp_iterate_with(dn: &DenoiserSpec, s: &SingularSystem, y: &CoefficientVector, tau: f64, max_iters: usize) -> Result<PnpReport> {
    y.expect_space(SpaceTag::Y)?;
    ensure_len(s.len(), y.len())?;
    ensure_len(s.len(), dn.len())?;
    check_step(s, tau)?;
    if max_iters == 0 {
        return Err(Error::InvalidParameter("need at least one iteration".into()));
    }
    let sig = s.sigma().values();
    let lam = dn.lambda.values();
    let ys = y.entries();
    let contraction = sig.iter().zip(lam).map(|(sg, l)| (1.0 - tau * sg * sg).abs() / (1.0 + l)).fold(0.0, f64::max);
    let mut x = vec![0.0; s.len()];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iters {
        residual = 0.0;
        for n in 0..x.len() {
            let new = (x[n] - tau * sig[n] * (sig[n] * x[n] - ys[n])) / (1.0 + lam[n]);
            residual = residual.max((new - x[n]).abs());
            x[n] = new;
        }
        iterations += 1;
        if residual < PNP_TOL {
            break;
        }
    }
    x.resize(s.x_dim(), 0.0);
    Ok(PnpReport { x: CoefficientVector::x(x)?, iterations, converged: residual < PNP_TOL, residual, contraction })
}

/// PnP with the denoiser `D[lambda]` rescaled to the step via `tau lambda`.
pub fn pnp_iterate(dn: &DenoiserSpec, s: &SingularSystem, y: &CoefficientVector, tau: f64, max_iters: usize) -> Result<PnpReport> {
    check_step(s, tau)?;
    pnp_iterate_with(&dn.scaled(tau)?, s, y, tau, max_iters)
}

/// Closed-form fixed point `sigma y / (sigma^2 + lambda)`.
pub fn pnp_fixed_point(dn: &DenoiserSpec, s: &SingularSystem, y: &CoefficientVector) -> Result<CoefficientVector> {
    ensure_len(s.len(), y.len())?;
    ensure_len(s.len(), dn.len())?;
    let mut x: Vec<f64> = (0..s.len()).map(|n| s.sigma()[n] * y.entries()[n] / (s.sigma()[n].powi(2) + dn.lambda[n])).collect();
    x.resize(s.x_dim(), 0.0);
    CoefficientVector::x(x)
}
