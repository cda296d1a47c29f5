//! Spectral filters `g` and the reconstruction `R[g] y = sum g_n <y,v_n> u_n`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::laws::{DataLaw, NoiseLaw};
use crate::operators::SingularSystem;
use crate::seqspace::{CoefficientVector, SpaceTag, SpectralSequence};

/// Relative tolerance for the branch boundaries of the adversarial-∞ filter.
pub const BRANCH_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FilterFamily {
    Tikhonov { alpha: f64 },
    Tsvd { cutoff: usize },
    PseudoInverse,
    Mse,
    AdvInf { delta: f64 },
    Adv2 { delta: f64 },
    DenoiserProx { tau: f64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub g: SpectralSequence,
    #[serde(flatten)]
    pub family: FilterFamily,
    pub provenance: String,
}

impl FilterSpec {
    pub fn new(g: SpectralSequence, family: FilterFamily, provenance: impl Into<String>) -> Self {
        Self { g, family, provenance: provenance.into() }
    }

    pub fn custom(g: Vec<f64>) -> Result<Self> {
        Ok(Self::new(SpectralSequence::new(g, "g")?, FilterFamily::Custom, "user supplied"))
    }

    pub fn coefficients(&self) -> &[f64] {
        self.g.values()
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sup_norm(&self) -> f64 {
        self.g.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Whether `0 <= g_n <= 1/sigma_n` for every index (with relative slack).
    pub fn within_box(&self, s: &SingularSystem, rtol: f64) -> bool {
        self.g.iter().zip(s.sigma().iter()).all(|(&g, &sg)| g >= 0.0 && g * sg <= 1.0 + rtol)
    }
}

fn check_same_len(s: &SingularSystem, n: usize) -> Result<()> {
    ensure_len(s.len(), n)
}

/// `g_n = sigma_n / (sigma_n^2 + alpha)`.
pub fn tikhonov(s: &SingularSystem, alpha: f64) -> Result<FilterSpec> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
    }
    let g = s.sigma().map(|sg| sg / (sg * sg + alpha))?.with_label("g_tikhonov");
    Ok(FilterSpec::new(g, FilterFamily::Tikhonov { alpha }, "Tikhonov: sigma/(sigma^2+alpha)"))
}

/// Truncated SVD keeping the first `cutoff` coordinates.
pub fn tsvd(s: &SingularSystem, cutoff: usize) -> Result<FilterSpec> {
    if cutoff > s.len() {
        return Err(Error::IndexOutOfRange { index: cutoff, len: s.len() });
    }
    let g = s.sigma().iter().enumerate().map(|(i, sg)| if i < cutoff { 1.0 / sg } else { 0.0 }).collect();
    Ok(FilterSpec::new(SpectralSequence::new(g, "g_tsvd")?, FilterFamily::Tsvd { cutoff }, "truncated SVD"))
}

/// `g_n = 1 / sigma_n`.
pub fn pseudo_inverse(s: &SingularSystem) -> Result<FilterSpec> {
    let g = s.sigma().map(|sg| 1.0 / sg)?.with_label("g_pinv");
    Ok(FilterSpec::new(g, FilterFamily::PseudoInverse, "pseudo-inverse"))
}

/// MSE-optimal filter `g_n = sigma_n Pi_n / (Pi_n sigma_n^2 + Delta_n)`.
pub fn mse_filter(s: &SingularSystem, data: &DataLaw, noise: &NoiseLaw) -> Result<FilterSpec> {
    check_same_len(s, data.len())?;
    check_same_len(s, noise.len())?;
    let mut g = Vec::with_capacity(s.len());
    for (n, ((&sg, &p), &d)) in s.sigma().iter().zip(data.pi().iter()).zip(noise.delta_seq().iter()).enumerate() {
        let den = p * sg * sg + d;
        if den == 0.0 {
            return Err(Error::UndefinedCoefficient { index: n, reason: "Pi_n = Delta_n = 0".into() });
        }
        g.push(sg * p / den);
    }
    Ok(FilterSpec::new(SpectralSequence::new(g, "g_mse")?, FilterFamily::Mse, "MSE optimum sigma*Pi/(Pi*sigma^2+Delta)"))
}

/// Which regime of the adversarial-∞ closed form an index falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvBranch {
    /// `Pi/M <= delta/sigma` or `M = 0`: filter switched off.
    Zero,
    /// `M < delta/sigma < Pi/M`: interior critical point.
    Interior,
    /// `delta/sigma <= M`: full inversion `1/sigma`.
    Full,
}

pub fn adv_inf_branch(sigma: f64, pi: f64, abs_moment: f64, delta: f64) -> AdvBranch {
    if abs_moment == 0.0 {
        return AdvBranch::Zero;
    }
    let d = delta / sigma;
    // the tie Pi = M^2, d = M lands here first and resolves to zero
    if pi / abs_moment <= d * (1.0 + BRANCH_RTOL) {
        AdvBranch::Zero
    } else if d <= abs_moment * (1.0 + BRANCH_RTOL) {
        AdvBranch::Full
    } else {
        AdvBranch::Interior
    }
}

/// Minimizer over `[0, 1/sigma]` of
/// `S(g) = (1 - sigma g)^2 Pi + 2 delta |1 - sigma g| |g| M + g^2 delta^2`.
pub fn adv_inf_coefficient(sigma: f64, pi: f64, abs_moment: f64, delta: f64) -> f64 {
    match adv_inf_branch(sigma, pi, abs_moment, delta) {
        AdvBranch::Zero => 0.0,
        AdvBranch::Full => 1.0 / sigma,
        AdvBranch::Interior => {
            let num = sigma * abs_moment - delta;
            let den = sigma * pi - delta * abs_moment;
            1.0 / (sigma - delta * num / den)
        }
    }
}

/// Per-index objective of the ∞-type adversarial problem.
pub fn adv_inf_objective(sigma: f64, pi: f64, abs_moment: f64, delta: f64, g: f64) -> f64 {
    let r = 1.0 - sigma * g;
    r * r * pi + 2.0 * delta * r.abs() * g.abs() * abs_moment + g * g * delta * delta
}

/// Closed-form minimizer of the expected worst case over `S_delta`.
pub fn adv_inf_filter(s: &SingularSystem, data: &DataLaw, delta: f64) -> Result<FilterSpec> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
    }
    check_same_len(s, data.len())?;
    let g = s
        .sigma()
        .iter()
        .zip(data.pi().iter())
        .zip(data.abs_moment().iter())
        .map(|((&sg, &p), &m)| adv_inf_coefficient(sg, p, m, delta))
        .collect();
    Ok(FilterSpec::new(
        SpectralSequence::new(g, "g_adv_inf")?,
        FilterFamily::AdvInf { delta },
        "three-branch minimizer of the S_delta adversarial risk",
    ))
}

/// Optimal denoiser weights `lambda_n = E<e,u_n>^2 / Pi_n`.
pub fn denoiser_lambda(data: &DataLaw, denoise_noise: &NoiseLaw) -> Result<SpectralSequence> {
    if denoise_noise.space() != SpaceTag::X {
        return Err(Error::InvalidParameter("denoiser noise must be given in X-coordinates".into()));
    }
    ensure_len(data.len(), denoise_noise.len())?;
    let mut out = Vec::with_capacity(data.len());
    for (n, (&p, &e)) in data.pi().iter().zip(denoise_noise.delta_seq().iter()).enumerate() {
        if p == 0.0 {
            return Err(Error::UndefinedCoefficient { index: n, reason: "Pi_n = 0".into() });
        }
        out.push(e / p);
    }
    SpectralSequence::non_negative(out, "lambda")
}

/// Spectral filter function `h_tau(s) = s / (tau - s (tau - 1))`.
pub fn h_tau(s: f64, tau: f64) -> f64 {
    s / (tau - s * (tau - 1.0))
}

/// Step-size matched weights `tau * lambda`.
///
/// Also checks that the eigenvalues `1/(1+tau lambda_n)` agree with
/// `h_tau(1/(1+lambda_n))`.
pub fn prox_scale(lambda: &SpectralSequence, tau: f64) -> Result<SpectralSequence> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
    }
    if lambda.iter().any(|&l| l < 0.0) {
        return Err(Error::InvalidParameter("lambda must be non-negative".into()));
    }
    for (n, &l) in lambda.iter().enumerate() {
        let direct = 1.0 / (1.0 + tau * l);
        let filtered = h_tau(1.0 / (1.0 + l), tau);
        if (direct - filtered).abs() > 1e-12 * direct.max(1e-300) + 1e-300 {
            return Err(Error::Numerical(format!("h_tau identity violated at index {n}: {direct} vs {filtered}")));
        }
    }
    lambda.scale(tau).map(|s| s.with_label("lambda_tau"))
}

/// Filter of the variational problem `1/2 |Ax - y|^2 + 1/2 sum lambda_n x_n^2`.
pub fn variational_filter(s: &SingularSystem, lambda: &SpectralSequence) -> Result<FilterSpec> {
    check_same_len(s, lambda.len())?;
    let g = s.sigma().iter().zip(lambda.iter()).map(|(sg, l)| sg / (sg * sg + l)).collect();
    Ok(FilterSpec::new(
        SpectralSequence::new(g, "g_variational")?,
        FilterFamily::DenoiserProx { tau: 1.0 },
        "minimizer of the quadratic variational problem sigma/(sigma^2+lambda)",
    ))
}

/// `x_n = g_n y_n` on active coordinates, zero on the null space.
pub fn apply_filter(f: &FilterSpec, s: &SingularSystem, y: &CoefficientVector) -> Result<CoefficientVector> {
    y.expect_space(SpaceTag::Y)?;
    check_same_len(s, f.len())?;
    ensure_len(s.len(), y.len())?;
    let mut out: Vec<f64> = f.g.iter().zip(y.entries()).map(|(g, y)| g * y).collect();
    out.resize(s.x_dim(), 0.0);
    CoefficientVector::x(out)
}
