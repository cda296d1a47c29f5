//! Convergence-rate experiments for the MSE filter and numerical checks of
//! the series inequalities behind the rate theorems.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::laws::{law_from_decay, law_from_source_condition, stream_rng, CoeffDist, DataLaw, NoiseLaw};
use crate::operators::{make_synthetic, Decay, SingularSystem};
use crate::risk::analytic_risk;
use crate::seqspace::{SpaceTag, SpectralSequence};
use crate::special::power_tail;

/// Geometric, strictly decreasing grid of noise levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaGrid {
    pub hi: f64,
    pub lo: f64,
    pub points: usize,
}

impl DeltaGrid {
    pub fn new(hi: f64, lo: f64, points: usize) -> Result<Self> {
        let g = Self { hi, lo, points };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 3 {
            return Err(Error::InvalidParameter(format!("delta grid needs >= 3 points, got {}", self.points)));
        }
        if !(self.lo > 0.0 && self.hi > self.lo && self.hi.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta grid needs 0 < lo < hi, got {}..{}", self.hi, self.lo)));
        }
        Ok(())
    }

    /// Parses `hi:lo:points`, e.g. `1e-1:1e-4:10`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("grid '{text}' must look like hi:lo:points")));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("grid '{text}': '{s}' ({e})")));
        let points = parts[2].trim().parse::<usize>().map_err(|e| Error::Parse(format!("grid '{text}': '{}' ({e})", parts[2])))?;
        Self::new(num(parts[0])?, num(parts[1])?, points)
    }

    /// Window of `decades` decades ending where the split index
    /// `delta^{-2/(a+b)}` reaches `N/10`, so the signal/noise crossover stays
    /// well inside the truncation over the whole grid.
    ///
    /// Falls back to `1e-1 .. 1e-4` when `b <= -1` (no crossover).
    pub fn for_decay(a: f64, b: f64, n: usize, decades: f64, points: usize) -> Result<Self> {
        if b <= -1.0 {
            return Self::new(1e-1, 1e-4, points);
        }
        let lo = (n as f64 / 10.0).powf(-(a + b) / 2.0);
        Self::new(lo * 10f64.powf(decades), lo, points)
    }

    pub fn values(&self) -> Vec<f64> {
        let (lh, ll) = (self.hi.ln(), self.lo.ln());
        (0..self.points)
            .map(|k| {
                if k == 0 {
                    self.hi
                } else if k + 1 == self.points {
                    self.lo
                } else {
                    (lh + (ll - lh) * k as f64 / (self.points - 1) as f64).exp()
                }
            })
            .collect()
    }
}

/// How `Delta_n / sigma_n^2 = delta^2 n^b` is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRealization {
    /// `sigma_n = n^{-b/2}`, `Delta_n = delta^2`; needs `b >= 0`.
    White,
    /// `sigma_n = 1/n`, `Delta_n = delta^2 sigma_n^2 n^b`.
    Colored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateKind {
    /// `Pi_n = n^{-a}` and `Delta_n / sigma_n^2 = delta^2 n^b`.
    Decay { a: f64, b: f64, noise: NoiseRealization },
    /// `sigma_n = 1/n`, `Pi_n = sigma_n^{4 mu} beta_n` with
    /// `beta_n = n^{-(1 + 2 mu + excess)}` and white noise (`gamma_n = 1`).
    Source { mu: f64, excess: f64 },
}

impl RateKind {
    pub fn decay(a: f64, b: f64) -> Self {
        let noise = if b >= 0.0 { NoiseRealization::White } else { NoiseRealization::Colored };
        RateKind::Decay { a, b, noise }
    }

    pub fn source(mu: f64) -> Self {
        RateKind::Source { mu, excess: 0.2 }
    }

    /// Exponent `p` in `risk ~ delta^p`.
    pub fn theoretical_slope(&self) -> f64 {
        match *self {
            RateKind::Decay { a, b, .. } => {
                if b > -1.0 {
                    2.0 * (a - 1.0) / (a + b)
                } else {
                    2.0
                }
            }
            RateKind::Source { mu, .. } => 4.0 * mu / (1.0 + 2.0 * mu),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            RateKind::Decay { a, b, noise } => {
                if !(a > 1.0) {
                    return Err(Error::InvalidParameter(format!("summability needs a > 1, got {a}")));
                }
                if !b.is_finite() {
                    return Err(Error::InvalidParameter("b must be finite".into()));
                }
                if noise == NoiseRealization::White && b < 0.0 {
                    return Err(Error::InvalidParameter("white-noise realization needs b >= 0".into()));
                }
            }
            RateKind::Source { mu, excess } => {
                if !(mu >= 0.0 && mu.is_finite()) {
                    return Err(Error::InvalidParameter(format!("mu must be >= 0, got {mu}")));
                }
                if !(excess > 0.0) {
                    return Err(Error::InvalidParameter("the noise-data sum diverges unless excess > 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// One concrete instance of a rate family: operator, data law and the
/// per-index noise profile `Delta_n = delta^2 gamma_n`.
#[derive(Debug, Clone)]
pub struct RateInstance {
    pub system: SingularSystem,
    pub data: DataLaw,
    pub gamma: Vec<f64>,
}

impl RateInstance {
    pub fn build(kind: RateKind, n: usize) -> Result<Self> {
        kind.validate()?;
        match kind {
            RateKind::Decay { a, b, noise } => {
                let data = law_from_decay(n, a, 1.0, CoeffDist::Gaussian)?;
                let (system, gamma) = match noise {
                    NoiseRealization::White => {
                        let sigma = (1..=n).map(|k| (k as f64).powf(-b / 2.0)).collect();
                        (SingularSystem::from_singular_values(sigma, 0)?, vec![1.0; n])
                    }
                    NoiseRealization::Colored => {
                        let s = make_synthetic(n, Decay::Polynomial(1.0), 0)?;
                        let g = s.sigma().iter().enumerate().map(|(i, sg)| sg * sg * ((i + 1) as f64).powf(b)).collect();
                        (s, g)
                    }
                };
                Ok(Self { system, data, gamma })
            }
            RateKind::Source { mu, excess } => {
                let system = make_synthetic(n, Decay::Polynomial(1.0), 0)?;
                let beta = SpectralSequence::from_fn(n, "beta", |k| (k as f64).powf(-(1.0 + 2.0 * mu + excess)))?;
                let data = law_from_source_condition(&system, mu, &beta, CoeffDist::Gaussian)?;
                Ok(Self { system, data, gamma: vec![1.0; n] })
            }
        }
    }

    pub fn noise(&self, delta: f64) -> Result<NoiseLaw> {
        NoiseLaw::new(self.gamma.iter().map(|g| delta * delta * g).collect(), CoeffDist::Gaussian, SpaceTag::Y)
    }

    /// `min_k sum_{n<=k} Delta_n/sigma_n^2 + sum_{n>k} Pi_n` over all split points.
    pub fn optimal_split_bound(&self, delta: f64) -> f64 {
        let n = self.system.len();
        let sig = self.system.sigma().values();
        let pi = self.data.pi().values();
        let mut tail: f64 = pi.iter().sum();
        let mut head = 0.0;
        let mut best = tail;
        for k in 0..n {
            head += delta * delta * self.gamma[k] / (sig[k] * sig[k]);
            tail -= pi[k];
            best = best.min(head + tail.max(0.0));
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub delta: f64,
    pub risk: f64,
    pub bound_split: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// Normal-approximation 95% interval.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Whether the largest-delta point was dropped as pre-asymptotic.
    pub dropped_largest: bool,
    pub points_used: usize,
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, Vec<f64>) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    let sse: f64 = res.iter().map(|r| r * r).sum();
    let stderr = if xs.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, intercept, stderr, res)
}

/// Least-squares slope of `log y` against `log delta`.
///
/// `points` must be ordered by decreasing delta; the first (largest) point
/// is dropped if its residual from the fit of the other points exceeds
/// three times that fit's RMSE.
pub fn fit_log_slope(deltas: &[f64], values: &[f64]) -> Result<SlopeFit> {
    ensure_len(deltas.len(), values.len())?;
    if deltas.len() < 3 {
        return Err(Error::InvalidParameter("need >= 3 points to fit a slope".into()));
    }
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Numerical("rate fit needs positive finite values".into()));
    }
    let imax = (0..deltas.len()).max_by(|&i, &j| deltas[i].total_cmp(&deltas[j])).expect("non-empty");
    let xs: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (mut slope, mut intercept, mut stderr, _) = ols(&xs, &ys);
    let mut dropped = false;
    let mut used = xs.len();
    if xs.len() > 3 {
        // judge the largest point against the fit of the remaining ones
        let keep: Vec<usize> = (0..xs.len()).filter(|&i| i != imax).collect();
        let kx: Vec<f64> = keep.iter().map(|&i| xs[i]).collect();
        let ky: Vec<f64> = keep.iter().map(|&i| ys[i]).collect();
        let (s2, i2, e2, res2) = ols(&kx, &ky);
        let rmse = (res2.iter().map(|r| r * r).sum::<f64>() / res2.len() as f64).sqrt();
        let r_max = ys[imax] - (i2 + s2 * xs[imax]);
        if r_max.abs() > 3.0 * rmse && r_max.abs() > 1e-12 {
            (slope, intercept, stderr) = (s2, i2, e2);
            dropped = true;
            used -= 1;
        }
    }
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
        ci_low: slope - 1.96 * stderr,
        ci_high: slope + 1.96 * stderr,
        dropped_largest: dropped,
        points_used: used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoublingCheck {
    pub n: usize,
    pub slope: f64,
    pub shift: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExperiment {
    pub kind: RateKind,
    pub n: usize,
    pub grid: DeltaGrid,
    pub measured: Vec<RatePoint>,
    pub fit: SlopeFit,
    pub split_fit: SlopeFit,
    pub theoretical_slope: f64,
    pub doubling: Option<DoublingCheck>,
    /// `sum_{n > N} Pi_n` of the untruncated law over the risk at the smallest delta
    /// (decay laws only).
    pub tail_fraction: Option<f64>,
}

impl RateExperiment {
    pub fn slope_error(&self) -> f64 {
        (self.fit.slope - self.theoretical_slope).abs()
    }
}

/// Maximum slope change accepted under doubling of `N`.
pub const DOUBLING_TOL: f64 = 0.05;

fn measure(kind: RateKind, n: usize, grid: &DeltaGrid) -> Result<Vec<RatePoint>> {
    let inst = RateInstance::build(kind, n)?;
    grid.values()
        .into_par_iter()
        .map(|delta| {
            let risk = analytic_risk(&inst.system, &inst.data, &inst.noise(delta)?)?.value;
            if !(risk.is_finite() && risk > 0.0) {
                return Err(Error::Numerical(format!("risk {risk} at delta {delta}")));
            }
            Ok(RatePoint { delta, risk, bound_split: inst.optimal_split_bound(delta) })
        })
        .collect()
}

pub fn run_rate_experiment(kind: RateKind, n: usize, grid: DeltaGrid, doubling: bool) -> Result<RateExperiment> {
    grid.validate()?;
    kind.validate()?;
    let measured = measure(kind, n, &grid)?;
    let ds: Vec<f64> = measured.iter().map(|p| p.delta).collect();
    let fit = fit_log_slope(&ds, &measured.iter().map(|p| p.risk).collect::<Vec<_>>())?;
    let split_fit = fit_log_slope(&ds, &measured.iter().map(|p| p.bound_split).collect::<Vec<_>>())?;
    let doubling = if doubling {
        let m2 = measure(kind, 2 * n, &grid)?;
        let f2 = fit_log_slope(&ds, &m2.iter().map(|p| p.risk).collect::<Vec<_>>())?;
        let shift = (f2.slope - fit.slope).abs();
        Some(DoublingCheck { n: 2 * n, slope: f2.slope, shift, ok: shift < DOUBLING_TOL })
    } else {
        None
    };
    let tail_fraction = match kind {
        RateKind::Decay { a, .. } => measured.last().map(|p| power_tail(a, n) / p.risk),
        RateKind::Source { .. } => None,
    };
    Ok(RateExperiment { kind, n, grid, measured, fit, split_fit, theoretical_slope: kind.theoretical_slope(), doubling, tail_fraction })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub checks: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` seen.
    pub max_ratio: f64,
    /// Up to ten violating cases, for diagnostics.
    pub examples: Vec<String>,
}

impl LemmaReport {
    fn new() -> Self {
        Self { checks: 0, violations: 0, max_ratio: 0.0, examples: Vec::new() }
    }

    fn record(&mut self, lhs: f64, rhs: f64, what: impl FnOnce() -> String) {
        self.checks += 1;
        if rhs > 0.0 {
            self.max_ratio = self.max_ratio.max(lhs / rhs);
        }
        if !(lhs <= rhs * (1.0 + 1e-12)) {
            self.violations += 1;
            if self.examples.len() < 10 {
                self.examples.push(what());
            }
        }
    }

    fn merge(&mut self, other: LemmaReport) {
        self.checks += other.checks;
        self.violations += other.violations;
        self.max_ratio = self.max_ratio.max(other.max_ratio);
        for e in other.examples {
            if self.examples.len() < 10 {
                self.examples.push(e);
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn power_sum(b: f64, n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).powf(b)).sum()
}

/// Tail and partial-sum bounds for power sequences:
/// `sum_{n>N} n^{-a} <= a/(a-1) (N+1)^{1-a}`,
/// `sum_{n<=N} n^b <= N^{1+b}/(1+b)` for `-1 < b <= 0`, and
/// `sum_{n<=N} n^b <= N^{1+b}` for `b > 0`.
pub fn lemma_validator_appendix_a(a: f64, b: f64, n_grid: &[usize]) -> Result<LemmaReport> {
    if !(a > 1.0) {
        return Err(Error::InvalidParameter(format!("a must exceed 1, got {a}")));
    }
    let mut rep = LemmaReport::new();
    for &n in n_grid {
        if n == 0 {
            return Err(Error::InvalidParameter("N must be >= 1".into()));
        }
        let nf = n as f64;
        let tail = power_tail(a, n);
        rep.record(tail, a / (a - 1.0) * (nf + 1.0).powf(1.0 - a), || format!("tail a={a} N={n}"));
        if b > -1.0 {
            let s = power_sum(b, n);
            let rhs = if b <= 0.0 { nf.powf(1.0 + b) / (1.0 + b) } else { nf.powf(1.0 + b) };
            rep.record(s, rhs, || format!("partial sum b={b} N={n}"));
        }
    }
    Ok(rep)
}

/// Randomized sweep of [`lemma_validator_appendix_a`].
pub fn lemma_a_sweep(draws: usize, seed: u64) -> LemmaReport {
    let parts: Vec<LemmaReport> = (0..draws.div_ceil(256))
        .into_par_iter()
        .map(|shard| {
            let mut rng = stream_rng(seed, shard as u64);
            let mut rep = LemmaReport::new();
            for _ in 0..256.min(draws - shard * 256) {
                let a = 1.0 + 10f64.powf(rng.random_range(-2.0..1.0));
                let b = rng.random_range(-0.999..3.0);
                let n = 10f64.powf(rng.random_range(0.0..4.0)) as usize;
                let r = lemma_validator_appendix_a(a, b, &[n.max(1)]).expect("valid parameters");
                rep.merge(r);
            }
            rep
        })
        .collect();
    let mut out = LemmaReport::new();
    for p in parts {
        out.merge(p);
    }
    out
}

/// Per-index bound `Pi Delta/(Pi sigma^2 + Delta) <= delta^{2nu/(1+nu)} beta^{1/(1+nu)} gamma^{nu/(1+nu)}`
/// with `nu = 2 mu`, and its sum against the noise-data constant.
pub fn lemma_validator_appendix_b(mu: f64, beta: &[f64], gamma: &[f64], sigma: &[f64], delta_grid: &[f64]) -> Result<LemmaReport> {
    if !(mu >= 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be >= 0, got {mu}")));
    }
    ensure_len(beta.len(), gamma.len())?;
    ensure_len(beta.len(), sigma.len())?;
    let nu = 2.0 * mu;
    let (p, q) = (1.0 / (1.0 + nu), nu / (1.0 + nu));
    let c: f64 = beta.iter().zip(gamma).map(|(b, g)| b.powf(p) * g.powf(q)).sum();
    let mut rep = LemmaReport::new();
    for &delta in delta_grid {
        let scale = (delta * delta).powf(q);
        let mut total = 0.0;
        for n in 0..beta.len() {
            let pi = sigma[n].powf(2.0 * nu) * beta[n];
            let d = delta * delta * gamma[n];
            let den = pi * sigma[n] * sigma[n] + d;
            let lhs = if den == 0.0 { 0.0 } else { pi * d / den };
            total += lhs;
            rep.record(lhs, scale * beta[n].powf(p) * gamma[n].powf(q), || format!("index {n}, mu={mu}, delta={delta}"));
        }
        rep.record(total, scale * c, || format!("sum, mu={mu}, delta={delta}"));
    }
    Ok(rep)
}

/// Randomized sweep of [`lemma_validator_appendix_b`] on single-draw instances.
pub fn lemma_b_sweep(draws: usize, seed: u64) -> LemmaReport {
    let parts: Vec<LemmaReport> = (0..draws.div_ceil(256))
        .into_par_iter()
        .map(|shard| {
            let mut rng = stream_rng(seed, shard as u64);
            let mut rep = LemmaReport::new();
            for _ in 0..256.min(draws - shard * 256) {
                let mu = if rng.random_range(0.0..1.0) < 0.1 { 0.0 } else { rng.random_range(0.0..3.0) };
                let n = rng.random_range(1..=8);
                let sigma: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-3.0..0.5))).collect();
                let beta: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-4.0..1.0))).collect();
                let gamma: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-4.0..2.0))).collect();
                let delta = 10f64.powf(rng.random_range(-5.0..0.0));
                rep.merge(lemma_validator_appendix_b(mu, &beta, &gamma, &sigma, &[delta]).expect("valid parameters"));
            }
            rep
        })
        .collect();
    let mut out = LemmaReport::new();
    for p in parts {
        out.merge(p);
    }
    out
}

/// Squared classical worst-case bound `delta^{4mu/(2mu+1)} rho^{2/(2mu+1)}`.
pub fn classical_reference_curve(mu: f64, rho: f64, delta_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if !(mu >= 0.0) || !(rho > 0.0) {
        return Err(Error::InvalidParameter("need mu >= 0 and rho > 0".into()));
    }
    let e = 4.0 * mu / (2.0 * mu + 1.0);
    let r = rho.powf(2.0 / (2.0 * mu + 1.0));
    Ok(delta_grid.iter().map(|&d| (d, d.powf(e) * r)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationPoint {
    pub delta: f64,
    pub risk: f64,
    pub surrogate: f64,
}

/// Fixed-signal risk of the MSE filter against
/// `sum max(x^2 Delta/Pi, sigma^2 Pi) Pi Delta / (Pi sigma^2 + Delta)^2`.
///
/// The exact risk equals the same sum with `max` replaced by `+`, so the
/// ratio lies in `[1, 2]`.
pub fn saturation_probe(inst: &RateInstance, x: &[f64], delta_grid: &[f64]) -> Result<Vec<SaturationPoint>> {
    let s = &inst.system;
    ensure_len(s.len(), x.len())?;
    let (sig, pi) = (s.sigma().values(), inst.data.pi().values());
    delta_grid
        .iter()
        .map(|&delta| {
            let (mut risk, mut sur) = (0.0, 0.0);
            for n in 0..s.len() {
                let d = delta * delta * inst.gamma[n];
                let den = pi[n] * sig[n] * sig[n] + d;
                if pi[n] == 0.0 {
                    return Err(Error::UndefinedCoefficient { index: n, reason: "Pi_n = 0".into() });
                }
                risk += (d * d * x[n] * x[n] + pi[n] * pi[n] * sig[n] * sig[n] * d) / (den * den);
                let w = (x[n] * x[n] * d / pi[n]).max(sig[n] * sig[n] * pi[n]);
                sur += w * pi[n] * d / (den * den);
            }
            Ok(SaturationPoint { delta, risk, surrogate: sur })
        })
        .collect()
}
