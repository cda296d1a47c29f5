//! Error functionals: expected risk (closed form and Monte Carlo),
//! deterministic-signal risk and the two adversarial worst cases.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::filters::{FilterFamily, FilterSpec};
use crate::laws::{stream_rng, DataLaw, NoiseLaw};
use crate::operators::SingularSystem;
use crate::seqspace::{CoefficientVector, SpaceTag};

/// Samples per Monte-Carlo shard. Shards, not threads, own the RNG streams.
pub const MC_SHARD: usize = 4096;

const BOUND_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub bias_term: f64,
    pub noise_term: f64,
    /// Sample mean of the cross term; zero in expectation, exactly zero for closed forms.
    pub mixed_term: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskMethod {
    Analytic,
    MonteCarlo { count: usize, stderr: f64 },
    WorstCaseL2,
    WorstCaseSinf,
}

impl RiskMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RiskMethod::Analytic => "analytic",
            RiskMethod::MonteCarlo { .. } => "monte_carlo",
            RiskMethod::WorstCaseL2 => "worst_case_l2",
            RiskMethod::WorstCaseSinf => "worst_case_sinf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub value: f64,
    pub decomposition: Decomposition,
    pub method: RiskMethod,
}

impl RiskReport {
    fn closed(bias: f64, noise: f64) -> Self {
        Self {
            value: bias + noise,
            decomposition: Decomposition { bias_term: bias, noise_term: noise, mixed_term: 0.0 },
            method: RiskMethod::Analytic,
        }
    }

    pub fn stderr(&self) -> f64 {
        match self.method {
            RiskMethod::MonteCarlo { stderr, .. } => stderr,
            _ => 0.0,
        }
    }
}

fn check_instance(s: &SingularSystem, data: &DataLaw, noise: &NoiseLaw) -> Result<()> {
    ensure_len(s.len(), data.len())?;
    ensure_len(s.len(), noise.len())?;
    if noise.space() != SpaceTag::Y {
        return Err(Error::InvalidParameter("measurement noise must be given in Y-coordinates".into()));
    }
    Ok(())
}

/// Risk at the MSE-optimal filter, `sum Pi Delta / (Pi sigma^2 + Delta)`.
pub fn analytic_risk(s: &SingularSystem, data: &DataLaw, noise: &NoiseLaw) -> Result<RiskReport> {
    check_instance(s, data, noise)?;
    let (mut bias, mut var) = (0.0, 0.0);
    for ((&sg, &p), &d) in s.sigma().iter().zip(data.pi().iter()).zip(noise.delta_seq().iter()) {
        let den = p * sg * sg + d;
        if den == 0.0 {
            continue;
        }
        bias += p * d * d / (den * den);
        var += sg * sg * p * p * d / (den * den);
    }
    Ok(RiskReport::closed(bias, var))
}

/// `sum (1 - sigma g)^2 Pi + g^2 Delta` for any filter.
pub fn generic_risk(f: &FilterSpec, s: &SingularSystem, data: &DataLaw, noise: &NoiseLaw) -> Result<RiskReport> {
    check_instance(s, data, noise)?;
    ensure_len(s.len(), f.len())?;
    let (mut bias, mut var) = (0.0, 0.0);
    for (((&g, &sg), &p), &d) in f.g.iter().zip(s.sigma().iter()).zip(data.pi().iter()).zip(noise.delta_seq().iter()) {
        let r = 1.0 - sg * g;
        bias += r * r * p;
        var += g * g * d;
    }
    Ok(RiskReport::closed(bias, var))
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
    bias: f64,
    noise: f64,
    mixed: f64,
}

impl Moments {
    fn push(&mut self, bias: f64, noise: f64, mixed: f64) {
        let v = bias + noise + mixed;
        self.count += 1;
        let d = v - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (v - self.mean);
        self.bias += bias;
        self.noise += noise;
        self.mixed += mixed;
    }

    fn merge(a: Self, b: Self) -> Self {
        if a.count == 0 {
            return b;
        }
        if b.count == 0 {
            return a;
        }
        let n = (a.count + b.count) as f64;
        let d = b.mean - a.mean;
        Self {
            count: a.count + b.count,
            mean: a.mean + d * b.count as f64 / n,
            m2: a.m2 + b.m2 + d * d * a.count as f64 * b.count as f64 / n,
            bias: a.bias + b.bias,
            noise: a.noise + b.noise,
            mixed: a.mixed + b.mixed,
        }
    }
}

/// Monte-Carlo estimate of `E ||R[g](Ax + e) - A^+ A x||^2`.
///
/// Work is split into shards of [`MC_SHARD`] samples, shard `k` drawing
/// from stream `k` of `seed`; the merge order is fixed, so the result is
/// bitwise identical for every thread count.
pub fn monte_carlo_risk(
    f: &FilterSpec,
    s: &SingularSystem,
    data: &DataLaw,
    noise: &NoiseLaw,
    count: usize,
    seed: u64,
) -> Result<RiskReport> {
    check_instance(s, data, noise)?;
    ensure_len(s.len(), f.len())?;
    if count < 2 {
        return Err(Error::InvalidParameter("Monte-Carlo risk needs at least 2 samples".into()));
    }
    let shards = count.div_ceil(MC_SHARD);
    let (ddist, ndist) = (data.dist(), noise.dist());
    let g = f.coefficients();
    let sig = s.sigma().values();
    let (pi, del) = (data.pi().values(), noise.delta_seq().values());
    let parts: Vec<Moments> = (0..shards)
        .into_par_iter()
        .map(|k| -> Result<Moments> {
            let mut rng = stream_rng(seed, k as u64);
            let todo = MC_SHARD.min(count - k * MC_SHARD);
            let mut m = Moments::default();
            for _ in 0..todo {
                let (mut b, mut v, mut c) = (0.0, 0.0, 0.0);
                for n in 0..g.len() {
                    let x = ddist.draw(pi[n], &mut rng)?;
                    let e = ndist.draw(del[n], &mut rng)?;
                    let r = (sig[n] * g[n] - 1.0) * x;
                    let ge = g[n] * e;
                    b += r * r;
                    v += ge * ge;
                    c += 2.0 * r * ge;
                }
                m.push(b, v, c);
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let n = total.count as f64;
    let stderr = (total.m2 / (n - 1.0) / n).sqrt();
    Ok(RiskReport {
        value: total.mean,
        decomposition: Decomposition { bias_term: total.bias / n, noise_term: total.noise / n, mixed_term: total.mixed / n },
        method: RiskMethod::MonteCarlo { count: total.count, stderr },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterministicRisk {
    pub value: f64,
    /// `max{1, sup x_n^2 / Pi_n}`; infinite if some `Pi_n = 0` carries signal.
    pub bound_factor: f64,
    pub analytic: f64,
}

impl DeterministicRisk {
    pub fn bound(&self) -> f64 {
        self.bound_factor * self.analytic
    }
}

fn range_part<'a>(s: &SingularSystem, x: &'a CoefficientVector) -> Result<&'a [f64]> {
    x.expect_space(SpaceTag::X)?;
    if x.len() != s.len() && x.len() != s.x_dim() {
        return Err(Error::Dimension { expected: s.x_dim(), found: x.len() });
    }
    Ok(&x.entries()[..s.len()])
}

/// Risk over noise only, for a fixed signal `x`:
/// `sum (1 - sigma g)^2 x^2 + g^2 Delta`.
///
/// For the MSE filter this is checked against `bound_factor * analytic_risk`.
pub fn deterministic_x_risk(
    f: &FilterSpec,
    s: &SingularSystem,
    data: &DataLaw,
    x: &CoefficientVector,
    noise: &NoiseLaw,
) -> Result<DeterministicRisk> {
    check_instance(s, data, noise)?;
    ensure_len(s.len(), f.len())?;
    let xs = range_part(s, x)?;
    let mut value = 0.0;
    let mut factor: f64 = 1.0;
    for n in 0..s.len() {
        let (g, sg, p, d, xn) = (f.g[n], s.sigma()[n], data.pi()[n], noise.delta_seq()[n], xs[n]);
        let r = 1.0 - sg * g;
        value += r * r * xn * xn + g * g * d;
        if p > 0.0 {
            factor = factor.max(xn * xn / p);
        } else if xn != 0.0 {
            factor = f64::INFINITY;
        }
    }
    let analytic = analytic_risk(s, data, noise)?.value;
    let out = DeterministicRisk { value, bound_factor: factor, analytic };
    if f.family == FilterFamily::Mse && value > out.bound() * (1.0 + BOUND_RTOL) + f64::MIN_POSITIVE {
        return Err(Error::Numerical(format!("fixed-signal risk {value} exceeds bound {}", out.bound())));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub value: f64,
    /// Maximizing perturbation in Y-coordinates.
    pub argmax: Vec<f64>,
    /// Lagrange multiplier of the ball constraint (`l2` only).
    pub multiplier: Option<f64>,
}

/// Residual `v_n = (sigma_n g_n - 1) x_n` in X-coordinates.
pub fn residual(f: &FilterSpec, s: &SingularSystem, x: &CoefficientVector) -> Result<Vec<f64>> {
    ensure_len(s.len(), f.len())?;
    let xs = range_part(s, x)?;
    Ok(f.g.iter().zip(s.sigma().iter()).zip(xs).map(|((g, sg), xn)| (sg * g - 1.0) * xn).collect())
}

/// Maximizes `||v + G eps||^2` over `||eps|| <= delta` for diagonal `G` (per-coefficient values `g`).
///
/// Exposed separately for training, which reuses it on each sample.
pub fn l2_ball_max(g: &[f64], v: &[f64], delta: f64) -> Result<WorstCase> {
    ensure_len(g.len(), v.len())?;
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta must be >= 0, got {delta}")));
    }
    if g.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("gains and residual must be finite".into()));
    }
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let g2max = g.iter().fold(0.0f64, |m, x| m.max(x * x));
    if delta == 0.0 || g2max == 0.0 {
        return Ok(WorstCase { value: vv, argmax: vec![0.0; g.len()], multiplier: None });
    }
    let is_top = |gn: f64| gn * gn >= g2max * (1.0 - 1e-14);
    let top_j = g.iter().position(|&gn| is_top(gn)).expect("non-empty");
    let top_weight: f64 = g.iter().zip(v).filter(|(gn, _)| is_top(**gn)).map(|(gn, vn)| (gn * vn).powi(2)).sum();

    // sum over indices with t = lambda - g2max
    let phi = |t: f64| -> f64 {
        g.iter()
            .zip(v)
            .map(|(gn, vn)| {
                let den = t + g2max - gn * gn;
                if den <= 0.0 {
                    0.0
                } else {
                    (gn * vn / den).powi(2)
                }
            })
            .sum()
    };
    let eps_at = |t: f64| -> Vec<f64> {
        g.iter()
            .zip(v)
            .map(|(gn, vn)| {
                let den = t + g2max - gn * gn;
                if den <= 0.0 {
                    0.0
                } else {
                    gn * vn / den
                }
            })
            .collect()
    };
    let value_of = |eps: &[f64]| -> f64 { g.iter().zip(v).zip(eps).map(|((gn, vn), e)| (vn + gn * e).powi(2)).sum() };
    let d2 = delta * delta;

    let t_lo = 1e-14;
    let hard = top_weight == 0.0 && phi(0.0) <= d2;
    if hard || phi(t_lo) <= d2 {
        // hard case (or numerically indistinguishable from it): lambda = g2max,
        // the leftover budget goes onto one maximal index
        let mut eps = eps_at(0.0);
        let used: f64 = eps.iter().map(|e| e * e).sum();
        let rest = (d2 - used).max(0.0).sqrt();
        let sign = if g[top_j] * v[top_j] >= 0.0 { 1.0 } else { -1.0 };
        eps[top_j] += sign * rest;
        return Ok(WorstCase { value: value_of(&eps), argmax: eps, multiplier: Some(g2max) });
    }

    let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut lo = t_lo;
    let mut hi = gnorm * vv.sqrt() / delta + 1.0;
    debug_assert!(phi(hi) <= d2);
    for _ in 0..400 {
        if hi - lo <= 1e-12 * hi.max(1e-300) {
            break;
        }
        let mid = if hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if phi(mid) > d2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let mut eps = eps_at(t);
    let norm = eps.iter().map(|e| e * e).sum::<f64>().sqrt();
    if norm > 0.0 {
        eps.iter_mut().for_each(|e| *e *= delta / norm);
    }
    Ok(WorstCase { value: value_of(&eps), argmax: eps, multiplier: Some(t + g2max) })
}

/// `sup_{||eps|| <= delta} ||R[g](Ax + eps) - A^+ A x||^2`.
pub fn worst_case_l2(f: &FilterSpec, s: &SingularSystem, x: &CoefficientVector, delta: f64) -> Result<WorstCase> {
    let v = residual(f, s, x)?;
    l2_ball_max(f.coefficients(), &v, delta)
}

/// Maximizer over `S_delta = {w : |w_n| <= delta}`; coordinates decouple.
pub fn worst_case_sinf(f: &FilterSpec, s: &SingularSystem, x: &CoefficientVector, delta: f64) -> Result<WorstCase> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta must be >= 0, got {delta}")));
    }
    ensure_len(s.len(), f.len())?;
    let xs = range_part(s, x)?;
    let mut value = 0.0;
    let mut w = Vec::with_capacity(s.len());
    for n in 0..s.len() {
        let (g, sg, xn) = (f.g[n], s.sigma()[n], xs[n]);
        let r = 1.0 - sg * g;
        value += r * r * xn * xn + 2.0 * delta * (r * g * xn).abs() + g * g * delta * delta;
        w.push(if -r * g * xn >= 0.0 { delta } else { -delta });
    }
    Ok(WorstCase { value, argmax: w, multiplier: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBounds {
    pub pi_bound: f64,
    pub delta_bound: f64,
    pub split_bound: f64,
}

/// Elementary upper bounds on the optimal risk; `split_n = 0` means no
/// coordinate is inverted.
pub fn risk_bounds(s: &SingularSystem, data: &DataLaw, noise: &NoiseLaw, split_n: usize) -> Result<RiskBounds> {
    check_instance(s, data, noise)?;
    if split_n > s.len() {
        return Err(Error::IndexOutOfRange { index: split_n, len: s.len() });
    }
    let (sig, pi, del) = (s.sigma().values(), data.pi().values(), noise.delta_seq().values());
    let inv = |n: usize| del[n] / (sig[n] * sig[n]);
    let pi_bound: f64 = pi.iter().sum();
    let delta_bound: f64 = (0..s.len()).map(inv).sum();
    let split_bound: f64 = (0..split_n).map(inv).sum::<f64>() + pi[split_n..].iter().sum::<f64>();
    let risk = analytic_risk(s, data, noise)?.value;
    for (name, b) in [("pi", pi_bound), ("delta", delta_bound), ("split", split_bound)] {
        if risk > b * (1.0 + BOUND_RTOL) {
            return Err(Error::Numerical(format!("optimal risk {risk} exceeds {name} bound {b}")));
        }
    }
    Ok(RiskBounds { pi_bound, delta_bound, split_bound })
}
