//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line with the runtime; exits non-zero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectral_reg::advtrain::{adv2_convergence_probe, train_adv2, train_on_samples, TrainConfig};
use spectral_reg::filters::{
    adv_inf_branch, adv_inf_coefficient, denoiser_lambda, mse_filter, tikhonov, tsvd, AdvBranch, FilterSpec,
};
use spectral_reg::frames::{
    build_dfd, dual_identity_residual, frame_bounds, frame_mc_risk, frame_moments, frame_mse_filter,
    frame_reconstruct, synthesis_bound_check, FrameSystem,
};
use spectral_reg::laws::{law_from_decay, white_noise, CoeffDist, DataLaw, NoiseLaw};
use spectral_reg::operators::{from_matrix, make_synthetic, Decay, SingularSystem};
use spectral_reg::pnp::{pnp_iterate, pnp_iterate_with, DenoiserSpec};
use spectral_reg::ratelab::{lemma_a_sweep, lemma_b_sweep, run_rate_experiment, DeltaGrid, RateKind, DOUBLING_TOL};
use spectral_reg::risk::{analytic_risk, l2_ball_max, monte_carlo_risk};
use spectral_reg::seqspace::{CoefficientVector, SpaceTag};

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict { ok, detail: detail.into() }
}

/// Per-index expected risk `(1 - sigma g)^2 Pi + g^2 Delta`.
fn index_risk(sigma: f64, pi: f64, d: f64, g: f64) -> f64 {
    (1.0 - sigma * g).powi(2) * pi + g * g * d
}

fn total_risk(sigma: &[f64], pi: &[f64], d: &[f64], g: &[f64]) -> f64 {
    (0..sigma.len()).map(|n| index_risk(sigma[n], pi[n], d[n], g[n])).sum()
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..300 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

fn c1_mse_optimality() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_margin = f64::INFINITY;
    let mut worst_coef = 0.0f64;
    for _ in 0..100 {
        let n = 32;
        let sigma: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-3.0..0.5))).collect();
        let s = SingularSystem::from_singular_values(sigma, 0).unwrap();
        let sig = s.sigma().values().to_vec();
        let pi: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-4.0..0.0))).collect();
        let dv: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-6.0..-1.0))).collect();
        let data = DataLaw::from_moments(pi.clone(), CoeffDist::Gaussian).unwrap();
        let noise = NoiseLaw::new(dv.clone(), CoeffDist::Gaussian, SpaceTag::Y).unwrap();
        let g = mse_filter(&s, &data, &noise).unwrap();
        let best = total_risk(&sig, &pi, &dv, g.coefficients());
        let lib = analytic_risk(&s, &data, &noise).unwrap().value;
        if (lib - best).abs() > 1e-12 * best {
            return verdict(false, format!("analytic risk {lib} != sum of index risks {best}"));
        }
        let mut rivals: Vec<FilterSpec> = (0..20).map(|k| tikhonov(&s, 10f64.powf(-8.0 + 9.0 * k as f64 / 19.0)).unwrap()).collect();
        rivals.extend((0..=n).map(|c| tsvd(&s, c).unwrap()));
        for _ in 0..50 {
            let gr: Vec<f64> = sig.iter().map(|sg| rng.random_range(0.0..2.0) / sg).collect();
            rivals.push(FilterSpec::custom(gr).unwrap());
        }
        for f in &rivals {
            let r = total_risk(&sig, &pi, &dv, f.coefficients());
            worst_margin = worst_margin.min((r - best) / best);
        }
        for k in 0..n {
            // search in log g on risk - Pi = g (g (sigma^2 Pi + Delta) - 2 sigma Pi), which keeps
            // full relative precision when sigma g is tiny
            let centered = |g: f64| g * (g * (sig[k] * sig[k] * pi[k] + dv[k]) - 2.0 * sig[k] * pi[k]);
            let t = golden_min(|t| centered(t.exp()), (1e-14 / sig[k]).ln(), (2.0 / sig[k]).ln());
            let gb = t.exp();
            worst_coef = worst_coef.max((gb - g.g[k]).abs() / g.g[k].abs().max(1e-300));
        }
    }
    verdict(worst_margin >= -1e-12 && worst_coef <= 1e-6, format!("min relative margin {worst_margin:.3e}, max coefficient error {worst_coef:.3e}"))
}

fn c2_risk_vs_monte_carlo() -> Verdict {
    let dists = [CoeffDist::Gaussian, CoeffDist::RademacherScaled, CoeffDist::UniformSymmetric];
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let n = 8 + i;
        let s = make_synthetic(n, Decay::Polynomial(0.5 + 0.1 * i as f64), 0).unwrap();
        let data = law_from_decay(n, 1.5 + 0.2 * i as f64, 1.0, dists[i % 3]).unwrap();
        let noise = NoiseLaw::new(vec![0.01 * (i + 1) as f64; n], dists[(i + 1) % 3], SpaceTag::Y).unwrap();
        let want = analytic_risk(&s, &data, &noise).unwrap().value;
        let f = mse_filter(&s, &data, &noise).unwrap();
        let mc = monte_carlo_risk(&f, &s, &data, &noise, 1_000_000, 7 + i as u64).unwrap();
        worst = worst.max((mc.value - want).abs() / mc.stderr());
    }
    verdict(worst <= 4.0, format!("max |MC - analytic| = {worst:.2} standard errors"))
}

fn c3_decay_rates() -> Verdict {
    let n = 10_000;
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, b) in [(1.5, 0.0), (2.0, 0.0), (2.0, 1.0), (3.0, -0.5)] {
        let grid = DeltaGrid::for_decay(a, b, n, 3.0, 10).unwrap();
        let e = run_rate_experiment(RateKind::decay(a, b), n, grid, true).unwrap();
        let d = e.doubling.unwrap();
        let pass = e.slope_error() <= 0.1 && d.shift < DOUBLING_TOL;
        ok &= pass;
        parts.push(format!(
            "(a={a},b={b}) slope {:.3} vs {:.3}, shift {:.3}, tail {:.2}",
            e.fit.slope,
            e.theoretical_slope,
            d.shift,
            e.tail_fraction.unwrap_or(0.0)
        ));
    }
    verdict(ok, parts.join("; "))
}

fn c4_source_rates() -> Verdict {
    let n = 10_000;
    let mut ok = true;
    let mut parts = Vec::new();
    for mu in [0.5, 1.0, 2.0] {
        let kind = RateKind::source(mu);
        let RateKind::Source { excess, .. } = kind else { unreachable!() };
        // noise-data sum: sum beta^{1/(1+2mu)} gamma^{2mu/(1+2mu)} with gamma = 1
        // is a p-series with p = (1 + 2mu + excess)/(1 + 2mu) > 1
        let p = (1.0 + 2.0 * mu + excess) / (1.0 + 2.0 * mu);
        let e = run_rate_experiment(kind, n, DeltaGrid::new(1e-1, 1e-4, 10).unwrap(), true).unwrap();
        let pass = p > 1.0 && e.slope_error() <= 0.1;
        ok &= pass;
        parts.push(format!("mu={mu} slope {:.3} vs {:.3} (series exponent {p:.3})", e.fit.slope, e.theoretical_slope));
    }
    verdict(ok, parts.join("; "))
}

fn c5_adv_inf_closed_form() -> Verdict {
    let s_obj = |sigma: f64, pi: f64, m: f64, delta: f64, g: f64| {
        let r = 1.0 - sigma * g;
        r * r * pi + 2.0 * delta * r.abs() * g.abs() * m + g * g * delta * delta
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts = [0usize; 3];
    let mut worst = f64::INFINITY;
    let mut mismatched = 0;
    for i in 0..10_000 {
        let sigma = 10f64.powf(rng.random_range(-2.0..1.0));
        let pi = 10f64.powf(rng.random_range(-3.0..1.0));
        let m = pi.sqrt() * rng.random_range(0.05..1.0);
        // target each branch a third of the time
        let (lo, hi) = (sigma * m, sigma * pi / m);
        let delta = match i % 3 {
            0 => hi * (1.0 + rng.random_range(0.0..2.0)),
            1 => lo * rng.random_range(0.01..1.0),
            _ => (lo.ln() + (hi.ln() - lo.ln()) * rng.random_range(0.01..0.99)).exp(),
        };
        let expected = if delta >= hi {
            AdvBranch::Zero
        } else if delta <= lo {
            AdvBranch::Full
        } else {
            AdvBranch::Interior
        };
        let got = adv_inf_branch(sigma, pi, m, delta);
        if got != expected {
            mismatched += 1;
        }
        counts[match got {
            AdvBranch::Zero => 0,
            AdvBranch::Full => 1,
            AdvBranch::Interior => 2,
        }] += 1;
        let g = adv_inf_coefficient(sigma, pi, m, delta);
        let at = s_obj(sigma, pi, m, delta, g);
        let grid_min = (0..10_000).map(|k| s_obj(sigma, pi, m, delta, k as f64 / 9_999.0 / sigma)).fold(f64::INFINITY, f64::min);
        worst = worst.min(grid_min - at);
    }
    verdict(
        worst >= -1e-9 && counts.iter().all(|&c| c >= 1000) && mismatched == 0,
        format!("min margin {worst:.3e}; branches zero/full/interior = {counts:?}; misclassified {mismatched}"),
    )
}

/// Multi-start ascent for max ||v + g e||^2 over ||e|| <= delta. Each step moves
/// to the ball point maximizing the linearization, which never decreases a convex objective.
fn ascent_oracle(g: &[f64], v: &[f64], delta: f64, rng: &mut ChaCha8Rng) -> f64 {
    let n = g.len();
    let f = |e: &[f64]| (0..n).map(|k| (v[k] + g[k] * e[k]).powi(2)).sum::<f64>();
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[k] = s * delta;
            starts.push(e);
        }
    }
    for _ in 0..8 {
        let e: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nrm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        starts.push(e.iter().map(|x| x * delta / nrm).collect());
    }
    let mut best = f64::NEG_INFINITY;
    for mut e in starts {
        let mut val = f(&e);
        for _ in 0..20_000 {
            let grad: Vec<f64> = (0..n).map(|k| g[k] * (v[k] + g[k] * e[k])).collect();
            let nrm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm == 0.0 {
                break;
            }
            let next: Vec<f64> = grad.iter().map(|x| x * delta / nrm).collect();
            let nv = f(&next);
            e = next;
            if nv - val <= 1e-15 * nv.abs() {
                val = val.max(nv);
                break;
            }
            val = nv;
        }
        best = best.max(val);
    }
    best
}

fn c6_l2_worst_case() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst = 0.0f64;
    let mut hard = 0;
    for i in 0..200 {
        let n = rng.random_range(1..=8);
        let mut g: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let delta = 10f64.powf(rng.random_range(-2.0..0.5));
        if i % 5 == 0 && n > 1 {
            // hard case: no residual on the largest gain, small residual elsewhere
            let top = (0..n).max_by(|&a, &b| g[a].abs().total_cmp(&g[b].abs())).unwrap();
            if i % 10 == 0 {
                // tied maximal gains
                let other = (top + 1) % n;
                g[other] = -g[top];
                v[other] = 0.0;
            }
            v[top] = 0.0;
            let gmax = g[top].abs();
            let gap = (0..n).filter(|&k| g[k].abs() < gmax).map(|k| gmax * gmax - g[k] * g[k]).fold(f64::INFINITY, f64::min);
            let scale = if gap.is_finite() { 0.1 * delta * gap / (gmax * 3.0) } else { 1.0 };
            v.iter_mut().for_each(|x| *x *= scale);
            let phi0: f64 = (0..n).filter(|&k| g[k].abs() < gmax).map(|k| (g[k] * v[k] / (gmax * gmax - g[k] * g[k])).powi(2)).sum();
            if phi0 < delta * delta {
                hard += 1;
            }
        }
        let w = l2_ball_max(&g, &v, delta).unwrap();
        let oracle = ascent_oracle(&g, &v, delta, &mut rng);
        let norm = w.argmax.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > delta * (1.0 + 1e-12) {
            return verdict(false, format!("maximizer leaves the ball: {norm} > {delta}"));
        }
        worst = worst.max((w.value - oracle).abs() / oracle.max(1e-300));
    }
    verdict(worst <= 1e-6 && hard >= 20, format!("max relative gap {worst:.3e}, {hard} hard cases"))
}

fn c7_adv2_training() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;

    // delta = 0: inversion on coordinates the samples excite
    let s = make_synthetic(6, Decay::Polynomial(1.0), 0).unwrap();
    let data = DataLaw::from_moments(vec![1.0, 0.5, 0.0, 0.1, 0.0, 0.02], CoeffDist::Gaussian).unwrap();
    let cfg = TrainConfig { sample_count: 64, ..Default::default() };
    let res = train_adv2(&s, &data, 0.0, &cfg).unwrap();
    let mut err0 = 0.0f64;
    for k in 0..6 {
        if data.pi()[k] > 0.0 {
            err0 = err0.max((res.filter.g[k] * s.sigma()[k] - 1.0).abs());
        }
    }
    ok &= err0 <= 1e-3;
    notes.push(format!("delta=0 rel err {err0:.1e}"));

    // N = 1 against a dense grid of the exact one-dimensional objective
    let s1 = SingularSystem::from_singular_values(vec![0.8], 0).unwrap();
    let law1 = DataLaw::from_moments(vec![1.0], CoeffDist::Gaussian).unwrap();
    let delta = 0.3;
    let cfg1 = TrainConfig { sample_count: 200, seed: 4, ..Default::default() };
    let xs = law1.sample(cfg1.sample_count, cfg1.seed).unwrap();
    let r1 = train_on_samples(&s1, &xs, delta, &cfg1).unwrap();
    let obj = |g: f64| xs.iter().map(|x| ((1.0 - 0.8 * g).abs() * x.entries()[0].abs() + g * delta).powi(2)).sum::<f64>() / xs.len() as f64;
    let grid_g = (0..=200_000).map(|k| k as f64 / 200_000.0 / 0.8).min_by(|a, b| obj(*a).total_cmp(&obj(*b))).unwrap();
    let err1 = (r1.filter.g[0] - grid_g).abs() / grid_g;
    ok &= err1 <= 1e-3;
    notes.push(format!("N=1 rel err {err1:.1e}"));

    // trace of the best iterate never increases
    let s8 = make_synthetic(20, Decay::Polynomial(1.0), 0).unwrap();
    let d8 = law_from_decay(20, 2.0, 1.0, CoeffDist::Gaussian).unwrap();
    let cfg8 = TrainConfig { sample_count: 128, seed: 8, ..Default::default() };
    let r8 = train_adv2(&s8, &d8, 0.05, &cfg8).unwrap();
    let mono = r8.trace.windows(2).all(|w| w[1].best_objective <= w[0].best_objective);
    ok &= mono;
    notes.push(format!("best trace monotone {mono}"));

    // probe along a decreasing delta grid
    let grid = DeltaGrid::new(1e-1, 1e-4, 7).unwrap().values();
    let rows = adv2_convergence_probe(&s8, &d8, &grid, &cfg8).unwrap();
    let decreasing = rows.windows(2).all(|w| w[1].objective <= w[0].objective * (1.0 + 1e-9));
    let bounded = rows.iter().all(|r| r.objective <= r.bound && r.prefix_ok);
    let shrink = rows.last().unwrap().objective / rows[0].objective;
    ok &= decreasing && bounded && shrink < 0.05;
    notes.push(format!("probe decreasing {decreasing}, within bound {bounded}, objective ratio {shrink:.2e}"));
    verdict(ok, notes.join("; "))
}

fn spd(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(d, d) * 0.5
}

fn c8_frames() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut ok = true;
    let mut notes = Vec::new();
    let systems = [
        ("orthonormal", FrameSystem::orthonormal(3).unwrap(), 1.0, 1.0),
        ("mercedes_benz", FrameSystem::mercedes_benz().unwrap(), 1.5, 1.5),
        ("doubled", FrameSystem::doubled_basis(3).unwrap(), 2.0, 2.0),
    ];
    for (name, f, a_true, b_true) in systems {
        let d = f.dim();
        let est = frame_bounds(&f, 2000, 1).unwrap();
        let bounds_ok = (f.bounds().a - a_true).abs() <= 1e-10 && (f.bounds().b - b_true).abs() <= 1e-10 && est == f.bounds();
        // reconstruction from analysis coefficients through the dual frame
        let x = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let rec = f.dual_synthesis(&f.analysis(&x).unwrap()).unwrap();
        let dual_ok = (rec - &x).amax() <= 1e-10 && dual_identity_residual(&f) <= 1e-10;
        let syn = synthesis_bound_check(&f, 2000, 2).unwrap();
        let a = DMatrix::from_fn(d, d, |i, j| if i >= j { rng.random_range(0.5..1.5) * if i == j { 1.0 } else { 0.3 } } else { 0.0 });
        let dfd = build_dfd(&a, &f).unwrap();
        // A^T psi_n = kappa_n phi_n, checked directly
        let mut cond: f64 = 0.0;
        for n in 0..dfd.len() {
            let lhs = a.transpose() * dfd.psi.vectors().row(n).transpose();
            let rhs = f.vectors().row(n).transpose() * dfd.kappa[n];
            cond = cond.max((lhs - rhs).amax());
        }
        let cond_ok = cond <= 1e-10;
        // MSE frame filter against its upper bound
        let cov_x = spd(d, &mut rng);
        let cov_e = spd(d, &mut rng) * 0.01;
        let pi = frame_moments(&f, &cov_x).unwrap();
        let dl = frame_moments(&dfd.psi, &cov_e).unwrap();
        let law = DataLaw::from_moments(pi, CoeffDist::Gaussian).unwrap();
        let noise = NoiseLaw::new(dl, CoeffDist::Gaussian, SpaceTag::Y).unwrap();
        let fm = frame_mse_filter(&dfd, &law, &noise).unwrap();
        let mc = frame_mc_risk(&dfd, &fm.filter.g, &cov_x, &cov_e, 200_000, 3).unwrap();
        let bound = fm.upper_bound * fm.frame_factor;
        let bound_ok = mc.value <= bound + 4.0 * mc.stderr();
        let pass = bounds_ok && dual_ok && syn.passed && cond_ok && bound_ok;
        ok &= pass;
        notes.push(format!("{name}: cond {cond:.1e}, MC {:.4e} <= bound {bound:.4e}", mc.value));
    }
    // orthonormal DFD built from the right singular vectors is the SVD
    let a = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0)) + DMatrix::identity(3, 3) * 2.0;
    let s = from_matrix(&a).unwrap();
    let u = s.basis_u().unwrap();
    let v = s.basis_v().unwrap();
    let phi = FrameSystem::new(u.transpose()).unwrap();
    let dfd = build_dfd(&a, &phi).unwrap();
    let mut gap: f64 = 0.0;
    for n in 0..3 {
        gap = gap.max((dfd.kappa[n] - s.sigma()[n]).abs());
        let psi = dfd.psi.vectors().row(n).transpose();
        gap = gap.max((psi - v.column(n)).amax());
    }
    let g = spectral_reg::seqspace::SpectralSequence::new(vec![0.7, 1.3, 0.2], "g").unwrap();
    let y = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
    let via_frames = frame_reconstruct(&dfd, &g, &y).unwrap();
    let c = v.transpose() * &y;
    let via_svd = u * DVector::from_fn(3, |n, _| g[n] * c[n]);
    gap = gap.max((via_frames - via_svd).amax());
    ok &= gap <= 1e-12;
    notes.push(format!("SVD path gap {gap:.1e}"));
    verdict(ok, notes.join("; "))
}

fn c9_pnp() -> Verdict {
    let n = 16;
    let s = make_synthetic(n, Decay::Polynomial(1.0), 0).unwrap();
    let data = law_from_decay(n, 2.0, 1.0, CoeffDist::Gaussian).unwrap();
    let delta = 0.05;
    let noise = white_noise(n, delta).unwrap();
    let lambda = denoiser_lambda(&data, &noise.clone().in_space(SpaceTag::X)).unwrap();
    let dn = DenoiserSpec::new(lambda).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let y = CoefficientVector::y((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    // matched noise: lambda = delta^2 / Pi, so sigma y/(sigma^2 + lambda) = sigma Pi y/(Pi sigma^2 + delta^2)
    let closed: Vec<f64> = (0..n)
        .map(|k| {
            let (sg, p) = (1.0 / (k + 1) as f64, ((k + 1) as f64).powi(-2));
            sg * p * y.entries()[k] / (p * sg * sg + delta * delta)
        })
        .collect();
    let mut fp: f64 = 0.0;
    let mut pair: f64 = 0.0;
    for tau in [0.5, 1.0, 1.9] {
        let a = pnp_iterate(&dn, &s, &y, tau, 1_000_000).unwrap();
        let b = pnp_iterate_with(&dn.filtered(tau).unwrap(), &s, &y, tau, 1_000_000).unwrap();
        if !(a.converged && b.converged) {
            return verdict(false, format!("no convergence at tau {tau}"));
        }
        for k in 0..n {
            fp = fp.max((a.x.entries()[k] - closed[k]).abs());
            pair = pair.max((a.x.entries()[k] - b.x.entries()[k]).abs());
        }
    }
    verdict(fp <= 1e-8 && pair <= 1e-8, format!("fixed point error {fp:.1e}, scaling pair gap {pair:.1e}"))
}

fn c10_lemmas() -> Verdict {
    let a = lemma_a_sweep(10_000, 10);
    let b = lemma_b_sweep(10_000, 11);
    // spot-check the tail bound against direct summation
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut direct_bad = 0;
    for _ in 0..100 {
        let ex = rng.random_range(1.2..4.0);
        let nn = rng.random_range(1..200usize);
        // partial sum plus the integral lower bound of the remainder: a lower bound on the tail
        let cut = 100_000usize;
        let tail = (nn + 1..=cut).map(|k| (k as f64).powf(-ex)).sum::<f64>() + ((cut + 1) as f64).powf(1.0 - ex) / (ex - 1.0);
        if tail > ex / (ex - 1.0) * ((nn + 1) as f64).powf(1.0 - ex) {
            direct_bad += 1;
        }
    }
    verdict(
        a.passed() && b.passed() && a.checks >= 10_000 && b.checks >= 10_000 && direct_bad == 0,
        format!(
            "power sums: {} checks, {} violations; source condition: {} checks, {} violations",
            a.checks, a.violations, b.checks, b.violations
        ),
    )
}

fn c11_reproducibility() -> Verdict {
    let exe = env!("CARGO_BIN_EXE_spectral-reg");
    let runs: [&[&str]; 7] = [
        &["risk", "--method", "monte_carlo", "--samples", "50000", "--seed", "3"],
        &["risk", "--method", "worst_case_l2", "--seed", "4"],
        &["advtrain", "--n", "10", "--iters", "300", "--seed", "5"],
        &["rates", "--kind", "decay", "--a", "2", "--b", "1"],
        &["frames", "--frame", "mercedes_benz", "--dim", "2", "--seed", "6", "--format", "json"],
        &["pnp", "--n", "12", "--seed", "7"],
        &["validate-lemmas", "--draws", "3000", "--seed", "8"],
    ];
    let mut bad = Vec::new();
    for args in runs {
        let mut outs = Vec::new();
        for threads in ["1", "2", "5", "2"] {
            let out = Command::new(exe).args(args).args(["--threads", threads]).env_remove("SPECTRAL_REG_THREADS").output().unwrap();
            if !out.status.success() {
                bad.push(format!("{} failed", args[0]));
            }
            outs.push(out.stdout);
        }
        if !outs.windows(2).all(|w| w[0] == w[1]) {
            bad.push(args.join(" "));
        }
    }
    verdict(bad.is_empty(), if bad.is_empty() { "7 commands byte-identical at 1, 2, 5 threads and on repeat".into() } else { bad.join("; ") })
}

fn main() {
    let criteria: [(&str, Option<Duration>, fn() -> Verdict); 11] = [
        ("MSE-filter optimality", Some(Duration::from_secs(10)), c1_mse_optimality),
        ("risk formula vs Monte Carlo", Some(Duration::from_secs(60)), c2_risk_vs_monte_carlo),
        ("decay-rate reproduction", Some(Duration::from_secs(30)), c3_decay_rates),
        ("source-condition rate", Some(Duration::from_secs(30)), c4_source_rates),
        ("adversarial-inf closed form", Some(Duration::from_secs(10)), c5_adv_inf_closed_form),
        ("l2 worst-case solver", Some(Duration::from_secs(30)), c6_l2_worst_case),
        ("adversarial-2 training", Some(Duration::from_secs(120)), c7_adv2_training),
        ("frames", Some(Duration::from_secs(60)), c8_frames),
        ("PnP fixed point", Some(Duration::from_secs(5)), c9_pnp),
        ("inequality validators", Some(Duration::from_secs(10)), c10_lemmas),
        ("reproducibility", None, c11_reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let v = run();
        let dt = t0.elapsed();
        let in_time = limit.is_none_or(|l| dt < l);
        let pass = v.ok && in_time;
        if !pass {
            failed += 1;
        }
        let budget = limit.map(|l| format!(" (limit {} s)", l.as_secs())).unwrap_or_default();
        println!(
            "criterion {:>2} {} {:<30} {:>8.3} s{budget}  {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            name,
            dt.as_secs_f64(),
            v.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
