//! Adversarial training of spectral filters against an ℓ²-ball adversary,
//! plus numerical probes of the convergence statements for both
//! adversarial filters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::filters::{adv_inf_filter, FilterFamily, FilterSpec};
use crate::laws::DataLaw;
use crate::operators::SingularSystem;
use crate::risk::l2_ball_max;
use crate::seqspace::{CoefficientVector, SpectralSequence};

/// Samples per reduction chunk; fixed so sums do not depend on the thread count.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepRule {
    Fixed { eta: f64 },
    /// `eta0 / sqrt(k + 1)`.
    Diminishing { eta0: f64 },
}

impl StepRule {
    pub fn step(&self, k: usize) -> f64 {
        match *self {
            StepRule::Fixed { eta } => eta,
            StepRule::Diminishing { eta0 } => eta0 / ((k + 1) as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub sample_count: usize,
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// Project onto `[0, 1/sigma_n]` after every step.
    pub project_box: bool,
    pub seed: u64,
    /// Stop once `max_n sigma_n |g_n^{k+1} - g_n^k|` falls below this.
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            sample_count: 256,
            max_iters: 2000,
            step_rule: StepRule::Fixed { eta: 0.5 },
            project_box: true,
            seed: 0,
            tolerance: 1e-10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::InvalidParameter("sample_count must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        let eta = match self.step_rule {
            StepRule::Fixed { eta } => eta,
            StepRule::Diminishing { eta0 } => eta0,
        };
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("step size must be > 0, got {eta}")));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidParameter("tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub best_objective: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub filter: FilterSpec,
    pub objective: f64,
    pub trace: Vec<TraceRow>,
    pub iterations: usize,
    /// `false` when `max_iters` ran out before the tolerance was met.
    pub converged: bool,
    /// Whether the best iterate lies in `[0, 1/sigma_n]` (always true with projection).
    pub within_box: bool,
}

impl TrainResult {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,objective,grad_norm,step,best_objective\n");
        for r in &self.trace {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.iter, r.objective, r.grad_norm, r.step, r.best_objective
            ));
        }
        out
    }
}

/// Empirical adversarial objective `(1/m) sum_i max_{||e|| <= delta} ||v_i + g e||^2`
/// and a Danskin subgradient.
pub fn adv2_objective(g: &[f64], s: &SingularSystem, samples: &[CoefficientVector], delta: f64) -> Result<(f64, Vec<f64>)> {
    ensure_len(s.len(), g.len())?;
    if samples.is_empty() {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let sig = s.sigma().values();
    let n = g.len();
    let parts: Vec<(f64, Vec<f64>)> = samples
        .par_chunks(CHUNK)
        .map(|chunk| -> Result<(f64, Vec<f64>)> {
            let mut val = 0.0;
            let mut grad = vec![0.0; n];
            let mut v = vec![0.0; n];
            for x in chunk {
                let xs = &x.entries()[..n];
                for k in 0..n {
                    v[k] = (sig[k] * g[k] - 1.0) * xs[k];
                }
                let w = l2_ball_max(g, &v, delta)?;
                val += w.value;
                for k in 0..n {
                    let r = v[k] + g[k] * w.argmax[k];
                    grad[k] += 2.0 * r * (sig[k] * xs[k] + w.argmax[k]);
                }
            }
            Ok((val, grad))
        })
        .collect::<Result<_>>()?;
    let m = samples.len() as f64;
    let mut val = 0.0;
    let mut grad = vec![0.0; n];
    for (v, gr) in parts {
        val += v;
        grad.iter_mut().zip(gr).for_each(|(a, b)| *a += b);
    }
    grad.iter_mut().for_each(|x| *x /= m);
    Ok((val / m, grad))
}

/// Per-coordinate empirical second moments.
pub fn empirical_pi(samples: &[CoefficientVector], n: usize) -> Vec<f64> {
    let m = samples.len() as f64;
    (0..n).map(|k| samples.iter().map(|x| x.entries()[k].powi(2)).sum::<f64>() / m).collect()
}

/// Projected, diagonally preconditioned subgradient descent on a fixed sample set.
///
/// The preconditioner `2 (sigma_n^2 Pihat_n + delta^2)` bounds the
/// per-coordinate curvature of the objective.
pub fn train_on_samples(s: &SingularSystem, samples: &[CoefficientVector], delta: f64, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta must be >= 0, got {delta}")));
    }
    for x in samples {
        if x.len() < s.len() {
            return Err(Error::Dimension { expected: s.len(), found: x.len() });
        }
    }
    let n = s.len();
    let sig = s.sigma().values();
    let pihat = empirical_pi(samples, n);
    let h: Vec<f64> = (0..n)
        .map(|k| {
            let h = 2.0 * (sig[k] * sig[k] * pihat[k] + delta * delta);
            if h > 0.0 {
                h
            } else {
                1.0
            }
        })
        .collect();
    let project = |k: usize, x: f64| if cfg.project_box { x.clamp(0.0, 1.0 / sig[k]) } else { x };

    let mut g: Vec<f64> = (0..n).map(|k| 0.5 / sig[k]).collect();
    let (mut best_val, mut grad) = adv2_objective(&g, s, samples, delta)?;
    let mut best = g.clone();
    let mut trace = Vec::with_capacity(cfg.max_iters.min(10_000));
    let mut converged = false;
    let mut iterations = 0;
    trace.push(TraceRow { iter: 0, objective: best_val, best_objective: best_val, grad_norm: norm(&grad), step: 0.0 });
    for k in 0..cfg.max_iters {
        let eta = cfg.step_rule.step(k);
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let new = project(i, g[i] - eta * grad[i] / h[i]);
            moved = moved.max(sig[i] * (new - g[i]).abs());
            g[i] = new;
        }
        let (val, gr) = adv2_objective(&g, s, samples, delta)?;
        grad = gr;
        iterations = k + 1;
        if val < best_val {
            best_val = val;
            best.copy_from_slice(&g);
        }
        trace.push(TraceRow { iter: k + 1, objective: val, best_objective: best_val, grad_norm: norm(&grad), step: eta });
        if moved <= cfg.tolerance {
            converged = true;
            break;
        }
    }
    let filter = FilterSpec::new(
        SpectralSequence::new(best, "g_adv2")?,
        FilterFamily::Adv2 { delta },
        "projected subgradient minimizer of the empirical l2-adversarial objective",
    );
    let within_box = filter.within_box(s, 1e-12);
    Ok(TrainResult { filter, objective: best_val, trace, iterations, converged, within_box })
}

/// Draws `cfg.sample_count` training signals from `data` and trains on them.
pub fn train_adv2(s: &SingularSystem, data: &DataLaw, delta: f64, cfg: &TrainConfig) -> Result<TrainResult> {
    ensure_len(s.len(), data.len())?;
    cfg.validate()?;
    let samples = data.sample(cfg.sample_count, cfg.seed)?;
    train_on_samples(s, &samples, delta, cfg)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Prefix filter: `1/sigma_i` while `sum_{n <= i} 1/sigma_n^2 <= r^2`, else 0.
///
/// Returns the filter and the number of kept coordinates.
pub fn prefix_filter(s: &SingularSystem, r: f64) -> (Vec<f64>, usize) {
    let mut acc = 0.0;
    let mut kept = 0;
    let g = s
        .sigma()
        .iter()
        .map(|&sg| {
            acc += 1.0 / (sg * sg);
            if acc <= r * r {
                kept += 1;
                1.0 / sg
            } else {
                0.0
            }
        })
        .collect();
    (g, kept)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adv2ProbeRow {
    pub delta: f64,
    pub objective: f64,
    /// `2 sum (1 - sigma min(r, 1/sigma))^2 Pihat + 2 delta^2 r^2` at `r = 1/sqrt(delta)`.
    pub bound: f64,
    /// The same expression with the unsquared factor and `+ sqrt(delta)`, for comparison.
    pub bound_unsquared: f64,
    pub prefix_kept: usize,
    pub prefix_ok: bool,
    pub converged: bool,
}

/// Trains at every `delta` of a decreasing grid on one frozen sample set.
pub fn adv2_convergence_probe(s: &SingularSystem, data: &DataLaw, delta_grid: &[f64], cfg: &TrainConfig) -> Result<Vec<Adv2ProbeRow>> {
    check_grid(delta_grid)?;
    ensure_len(s.len(), data.len())?;
    cfg.validate()?;
    let samples = data.sample(cfg.sample_count, cfg.seed)?;
    let pihat = empirical_pi(&samples, s.len());
    let mut rows = Vec::with_capacity(delta_grid.len());
    for &delta in delta_grid {
        let res = train_on_samples(s, &samples, delta, cfg)?;
        let r = 1.0 / delta.sqrt();
        let (mut sq, mut unsq) = (0.0, 0.0);
        for (&sg, &p) in s.sigma().iter().zip(&pihat) {
            let f = 1.0 - sg * r.min(1.0 / sg);
            sq += f * f * p;
            unsq += f * p;
        }
        let (pg, kept) = prefix_filter(s, r);
        let recomputed: f64 = s.sigma().iter().take(kept).map(|sg| 1.0 / (sg * sg)).sum();
        let prefix_ok = recomputed <= r * r * (1.0 + 1e-12) && pg.iter().skip(kept).all(|&x| x == 0.0);
        rows.push(Adv2ProbeRow {
            delta,
            objective: res.objective,
            bound: 2.0 * sq + 2.0 * delta * delta * r * r,
            bound_unsquared: 2.0 * unsq + delta.sqrt(),
            prefix_kept: kept,
            prefix_ok,
            converged: res.converged,
        });
    }
    Ok(rows)
}

fn check_grid(delta_grid: &[f64]) -> Result<()> {
    if delta_grid.is_empty() {
        return Err(Error::InvalidParameter("empty delta grid".into()));
    }
    if delta_grid.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidParameter("delta grid must be positive".into()));
    }
    if delta_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("delta grid must be strictly decreasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvInfProbeRow {
    pub delta: f64,
    /// `E_eval sup_{S_delta} ||R[g](Ax + w) - A^+ A x||^2` for `g` trained on the other law.
    pub risk: f64,
    /// `2 sum_{delta >= M_train sigma} Pi_eval + 2 delta^2 ||g||^2`.
    pub bound: f64,
    /// Same with the index set chosen by `M_eval`.
    pub bound_eval_moment: f64,
    pub g_norm_sq: f64,
}

/// Evaluates the ∞-adversarial filter fitted on `train` under `eval`.
pub fn adv_inf_convergence_probe(s: &SingularSystem, train: &DataLaw, eval: &DataLaw, delta_grid: &[f64]) -> Result<Vec<AdvInfProbeRow>> {
    check_grid(delta_grid)?;
    ensure_len(s.len(), train.len())?;
    ensure_len(s.len(), eval.len())?;
    let mut rows = Vec::with_capacity(delta_grid.len());
    for &delta in delta_grid {
        let f = adv_inf_filter(s, train, delta)?;
        let (mut risk, mut b_tr, mut b_ev, mut gg) = (0.0, 0.0, 0.0, 0.0);
        for n in 0..s.len() {
            let (g, sg) = (f.g[n], s.sigma()[n]);
            let (p, m) = (eval.pi()[n], eval.abs_moment()[n]);
            let r = 1.0 - sg * g;
            risk += r * r * p + 2.0 * delta * (r * g).abs() * m + g * g * delta * delta;
            gg += g * g;
            if delta >= train.abs_moment()[n] * sg {
                b_tr += p;
            }
            if delta >= m * sg {
                b_ev += p;
            }
        }
        rows.push(AdvInfProbeRow {
            delta,
            risk,
            bound: 2.0 * b_tr + 2.0 * delta * delta * gg,
            bound_eval_moment: 2.0 * b_ev + 2.0 * delta * delta * gg,
            g_norm_sq: gg,
        });
    }
    Ok(rows)
}
