//! Coefficient laws for data and noise.
//!
//! Laws are described only through per-coefficient moments: the second
//! moments `Pi_n` / `Delta_n` and, for data, the first absolute moment
//! `M_n = E|<x,u_n>|`. Coefficients are drawn independently across indices
//! from one of three symmetric families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::operators::SingularSystem;
use crate::seqspace::{CoefficientVector, SpaceTag, SpectralSequence};
use crate::special::power_tail;

const MOMENT_TOL: f64 = 1e-12;

/// Distribution family of a single coefficient, parametrized by its second moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoeffDist {
    Gaussian,
    /// Two-point law `±sqrt(Pi)`.
    RademacherScaled,
    /// Uniform on `[-sqrt(3 Pi), sqrt(3 Pi)]`.
    UniformSymmetric,
    /// Moments only (e.g. estimated from samples); cannot be sampled.
    Empirical,
}

impl CoeffDist {
    /// `E|X|` for a coefficient with `E X^2 = second_moment`.
    pub fn abs_moment(self, second_moment: f64) -> Option<f64> {
        let r = second_moment.sqrt();
        match self {
            CoeffDist::Gaussian => Some(r * (2.0 / std::f64::consts::PI).sqrt()),
            CoeffDist::RademacherScaled => Some(r),
            CoeffDist::UniformSymmetric => Some(0.5 * 3f64.sqrt() * r),
            CoeffDist::Empirical => None,
        }
    }

    pub fn draw<R: Rng + ?Sized>(self, second_moment: f64, rng: &mut R) -> Result<f64> {
        let r = second_moment.sqrt();
        match self {
            CoeffDist::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                Ok(r * z)
            }
            CoeffDist::RademacherScaled => Ok(if rng.random::<bool>() { r } else { -r }),
            CoeffDist::UniformSymmetric => Ok(3f64.sqrt() * r * rng.random_range(-1.0..=1.0)),
            CoeffDist::Empirical => Err(Error::InvalidParameter("empirical laws cannot be sampled".into())),
        }
    }

    /// `Var(X^2)` per unit `Pi^2`, used for Monte-Carlo error bands.
    pub fn fourth_moment_factor(self) -> Option<f64> {
        match self {
            CoeffDist::Gaussian => Some(3.0),
            CoeffDist::RademacherScaled => Some(1.0),
            CoeffDist::UniformSymmetric => Some(9.0 / 5.0),
            CoeffDist::Empirical => None,
        }
    }
}

/// Deterministic RNG for stream `stream` of run `seed`.
///
/// Parallel work is split into fixed streams so results never depend on the
/// number of worker threads.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DataLawRepr", into = "DataLawRepr")]
pub struct DataLaw {
    pi: SpectralSequence,
    abs_moment: SpectralSequence,
    dist: CoeffDist,
    /// Exponent `a` when `Pi_n = scale * n^{-a}` exactly.
    decay_exponent: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct DataLawRepr {
    pi: Vec<f64>,
    abs_moment: Vec<f64>,
    dist: CoeffDist,
}

impl TryFrom<DataLawRepr> for DataLaw {
    type Error = Error;
    fn try_from(r: DataLawRepr) -> Result<Self> {
        DataLaw::with_abs_moment(r.pi, r.abs_moment, r.dist)
    }
}

impl From<DataLaw> for DataLawRepr {
    fn from(l: DataLaw) -> Self {
        DataLawRepr { pi: l.pi.into_values(), abs_moment: l.abs_moment.into_values(), dist: l.dist }
    }
}

impl DataLaw {
    /// Law with second moments `pi`; absolute moments follow from `dist`.
    pub fn from_moments(pi: Vec<f64>, dist: CoeffDist) -> Result<Self> {
        let abs = pi
            .iter()
            .map(|&p| dist.abs_moment(p.max(0.0)))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::InvalidParameter("empirical laws need explicit absolute moments".into()))?;
        Self::with_abs_moment(pi, abs, dist)
    }

    /// Law with explicitly given `Pi_n` and `M_n`.
    pub fn with_abs_moment(pi: Vec<f64>, abs_moment: Vec<f64>, dist: CoeffDist) -> Result<Self> {
        ensure_len(pi.len(), abs_moment.len())?;
        let pi = SpectralSequence::non_negative(pi, "pi")?;
        let abs_moment = SpectralSequence::non_negative(abs_moment, "abs_moment")?;
        for (n, (&p, &m)) in pi.iter().zip(abs_moment.iter()).enumerate() {
            if m * m > p * (1.0 + MOMENT_TOL) + f64::MIN_POSITIVE {
                return Err(Error::InvalidParameter(format!(
                    "index {n}: M^2 = {} exceeds Pi = {p} (Cauchy-Schwarz)",
                    m * m
                )));
            }
            if (p == 0.0) != (m == 0.0) {
                return Err(Error::InvalidParameter(format!("index {n}: Pi and M must vanish together")));
            }
        }
        Ok(Self { pi, abs_moment, dist, decay_exponent: None })
    }

    /// Moment estimates `Pi_n = mean x_n^2`, `M_n = mean |x_n|` from samples.
    pub fn empirical(samples: &[CoefficientVector]) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::InvalidParameter("no samples".into()))?;
        let n = first.len();
        let mut pi = vec![0.0; n];
        let mut abs = vec![0.0; n];
        for s in samples {
            ensure_len(n, s.len())?;
            for (k, &v) in s.entries().iter().enumerate() {
                pi[k] += v * v;
                abs[k] += v.abs();
            }
        }
        let m = samples.len() as f64;
        pi.iter_mut().for_each(|p| *p /= m);
        abs.iter_mut().for_each(|a| *a /= m);
        // rounding can push the mean of |x| a hair above sqrt(mean x^2)
        for (a, &p) in abs.iter_mut().zip(&pi) {
            *a = a.min(p.sqrt());
        }
        Self::with_abs_moment(pi, abs, CoeffDist::Empirical)
    }

    pub fn pi(&self) -> &SpectralSequence {
        &self.pi
    }

    pub fn abs_moment(&self) -> &SpectralSequence {
        &self.abs_moment
    }

    pub fn dist(&self) -> CoeffDist {
        self.dist
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn decay_exponent(&self) -> Option<f64> {
        self.decay_exponent
    }

    /// Mass of `Pi` beyond the truncation when the law is an exact power law.
    pub fn tail_mass(&self) -> Option<f64> {
        let a = self.decay_exponent?;
        let scale = self.pi[0];
        Some(scale * power_tail(a, self.len()))
    }

    /// Whether the known infinite tail exceeds 1% of the truncated total.
    pub fn tail_flagged(&self) -> bool {
        self.tail_mass().is_some_and(|t| t > 0.01 * self.pi.sum())
    }

    /// Draws `count` coefficient vectors reproducibly from `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<CoefficientVector>> {
        sample_moments(self.pi.values(), self.dist, SpaceTag::X, count, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseLaw {
    delta_seq: SpectralSequence,
    dist: CoeffDist,
    space: SpaceTag,
}

impl NoiseLaw {
    pub fn new(delta_seq: Vec<f64>, dist: CoeffDist, space: SpaceTag) -> Result<Self> {
        Ok(Self { delta_seq: SpectralSequence::non_negative(delta_seq, "delta")?, dist, space })
    }

    /// Colored noise `Delta_n = delta^2 gamma_n` on the data side.
    pub fn colored(delta: f64, gamma: &[f64], dist: CoeffDist) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be >= 0, got {delta}")));
        }
        Self::new(gamma.iter().map(|g| delta * delta * g).collect(), dist, SpaceTag::Y)
    }

    /// Same moments placed directly on X, as used for denoiser training.
    pub fn in_space(mut self, space: SpaceTag) -> Self {
        self.space = space;
        self
    }

    pub fn delta_seq(&self) -> &SpectralSequence {
        &self.delta_seq
    }

    pub fn dist(&self) -> CoeffDist {
        self.dist
    }

    pub fn space(&self) -> SpaceTag {
        self.space
    }

    pub fn len(&self) -> usize {
        self.delta_seq.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `gamma_n = Delta_n / delta^2`.
    pub fn gamma(&self, delta: f64) -> Result<SpectralSequence> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter("gamma needs delta > 0".into()));
        }
        self.delta_seq.scale(1.0 / (delta * delta)).map(|s| s.with_label("gamma"))
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<CoefficientVector>> {
        sample_moments(self.delta_seq.values(), self.dist, self.space, count, seed)
    }
}

fn sample_moments(
    moments: &[f64],
    dist: CoeffDist,
    space: SpaceTag,
    count: usize,
    seed: u64,
) -> Result<Vec<CoefficientVector>> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be >= 1".into()));
    }
    let mut rng = stream_rng(seed, 0);
    (0..count)
        .map(|_| {
            let v = moments.iter().map(|&m| dist.draw(m, &mut rng)).collect::<Result<Vec<_>>>()?;
            CoefficientVector::new(v, space)
        })
        .collect()
}

/// `Pi_n = scale * n^{-a}`, `a > 1`.
pub fn law_from_decay(n: usize, a: f64, scale: f64, dist: CoeffDist) -> Result<DataLaw> {
    if !(a > 1.0) {
        return Err(Error::InvalidParameter(format!("decay exponent must exceed 1 for summability, got {a}")));
    }
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter(format!("scale must be > 0, got {scale}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    let pi = (1..=n).map(|k| scale * (k as f64).powf(-a)).collect();
    let mut law = DataLaw::from_moments(pi, dist)?;
    law.decay_exponent = Some(a);
    Ok(law)
}

/// `Pi_n = sigma_n^{4 mu} beta_n`.
pub fn law_from_source_condition(s: &SingularSystem, mu: f64, beta: &SpectralSequence, dist: CoeffDist) -> Result<DataLaw> {
    if !(mu >= 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be >= 0, got {mu}")));
    }
    ensure_len(s.len(), beta.len())?;
    if let Some(i) = beta.iter().position(|&b| b < 0.0) {
        return Err(Error::InvalidParameter(format!("beta[{i}] is negative")));
    }
    let pi = s.sigma().iter().zip(beta.iter()).map(|(sg, b)| sg.powf(4.0 * mu) * b).collect();
    DataLaw::from_moments(pi, dist)
}

/// `sum_n beta_n^{1/(1+2mu)} gamma_n^{2mu/(1+2mu)}`, the constant bounding
/// the source-condition rate.
pub fn source_condition_constant(mu: f64, beta: &[f64], gamma: &[f64]) -> Result<f64> {
    ensure_len(beta.len(), gamma.len())?;
    let p = 1.0 / (1.0 + 2.0 * mu);
    let q = 2.0 * mu / (1.0 + 2.0 * mu);
    Ok(beta.iter().zip(gamma).map(|(b, g)| b.powf(p) * g.powf(q)).sum())
}

/// `Delta_n = delta^2` for every index.
pub fn white_noise(n: usize, delta: f64) -> Result<NoiseLaw> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be >= 0, got {delta}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    NoiseLaw::new(vec![delta * delta; n], CoeffDist::Gaussian, SpaceTag::Y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLevelKind {
    /// `sqrt(sup_n Delta_n)`, compatible with white noise.
    Sup,
    /// `sqrt(sum_n Delta_n)`.
    L2,
}

pub fn noise_level(law: &NoiseLaw, kind: NoiseLevelKind) -> f64 {
    match kind {
        NoiseLevelKind::Sup => law.delta_seq.max().sqrt(),
        NoiseLevelKind::L2 => law.delta_seq.sum().sqrt(),
    }
}

/// Smallest ratio `Delta_n / (sigma_n Pi_n)` over indices with `Pi_n > 0`.
///
/// The continuity premise `Delta_n >= c sigma_n Pi_n` holds with this `c`
/// whenever it is positive.
pub fn continuity_constant(s: &SingularSystem, data: &DataLaw, noise: &NoiseLaw) -> Result<f64> {
    ensure_len(s.len(), data.len())?;
    ensure_len(s.len(), noise.len())?;
    Ok(s.sigma()
        .iter()
        .zip(data.pi().iter())
        .zip(noise.delta_seq().iter())
        .filter(|((_, &p), _)| p > 0.0)
        .map(|((sg, p), d)| d / (sg * p))
        .fold(f64::INFINITY, f64::min))
}
