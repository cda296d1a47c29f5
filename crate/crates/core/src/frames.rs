//! Finite frames, dual frames and diagonal frame decompositions (DFDs).
//!
//! A frame is stored as an `M x d` matrix whose rows are the frame vectors
//! `phi_n`. The analysis operator is `F x = (<x, phi_n>)_n` and the
//! synthesis operator its transpose.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::filters::{FilterFamily, FilterSpec};
use crate::laws::{stream_rng, DataLaw, NoiseLaw};
use crate::risk::{Decomposition, RiskMethod, RiskReport, MC_SHARD};
use crate::seqspace::SpectralSequence;

/// Relative eigenvalue threshold below which a direction is treated as missing.
pub const SPAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameBounds {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSystem {
    vectors: DMatrix<f64>,
    bounds: FrameBounds,
    /// Rows are the canonical dual frame vectors.
    dual: DMatrix<f64>,
    rank: usize,
}

impl FrameSystem {
    /// Frame for the whole space `R^d`.
    pub fn new(vectors: DMatrix<f64>) -> Result<Self> {
        let d = vectors.ncols();
        Self::for_subspace(vectors, d)
    }

    /// Frame for a `rank`-dimensional subspace of `R^d` (the span of the rows).
    pub fn for_subspace(vectors: DMatrix<f64>, rank: usize) -> Result<Self> {
        let (m, d) = vectors.shape();
        if m == 0 || d == 0 {
            return Err(Error::NotAFrame("empty system".into()));
        }
        if rank == 0 || rank > d || m < rank {
            return Err(Error::NotAFrame(format!("{m} vectors cannot span a {rank}-dimensional space")));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotAFrame("non-finite entries".into()));
        }
        let op = vectors.transpose() * &vectors;
        let eig = SymmetricEigen::new(op);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let b = eig.eigenvalues[order[0]];
        let a = eig.eigenvalues[order[rank - 1]];
        if !(b > 0.0) || a <= SPAN_TOL * b {
            return Err(Error::NotAFrame(format!("rows do not span a {rank}-dimensional space")));
        }
        if rank < d && eig.eigenvalues[order[rank]] > SPAN_TOL * b {
            return Err(Error::NotAFrame(format!("rows span more than {rank} dimensions")));
        }
        // pseudo-inverse of the frame operator on the span
        let mut pinv = DMatrix::zeros(d, d);
        for &i in &order[..rank] {
            let q = eig.eigenvectors.column(i);
            pinv += (&q * q.transpose()) / eig.eigenvalues[i];
        }
        let dual = &vectors * pinv;
        Ok(Self { vectors, bounds: FrameBounds { a, b }, dual, rank })
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn dual_vectors(&self) -> &DMatrix<f64> {
        &self.dual
    }

    pub fn bounds(&self) -> FrameBounds {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn analysis(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_len(self.dim(), x.len())?;
        Ok(&self.vectors * x)
    }

    pub fn synthesis(&self, c: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_len(self.len(), c.len())?;
        Ok(self.vectors.transpose() * c)
    }

    pub fn dual_synthesis(&self, c: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_len(self.len(), c.len())?;
        Ok(self.dual.transpose() * c)
    }

    pub fn orthonormal(d: usize) -> Result<Self> {
        Self::new(DMatrix::identity(d, d))
    }

    /// Three unit vectors in the plane at 120 degree spacing.
    pub fn mercedes_benz() -> Result<Self> {
        let h = 3f64.sqrt() / 2.0;
        Self::new(DMatrix::from_row_slice(3, 2, &[0.0, 1.0, -h, -0.5, h, -0.5]))
    }

    /// The canonical basis listed twice.
    pub fn doubled_basis(d: usize) -> Result<Self> {
        let mut v = DMatrix::zeros(2 * d, d);
        for i in 0..d {
            v[(i, i)] = 1.0;
            v[(d + i, i)] = 1.0;
        }
        Self::new(v)
    }
}

/// Frame bounds, checked against `a|x|^2 <= sum <x,phi_n>^2 <= b|x|^2` on
/// `trials` random vectors of the span.
pub fn frame_bounds(f: &FrameSystem, trials: usize, seed: u64) -> Result<FrameBounds> {
    let FrameBounds { a, b } = f.bounds;
    let mut rng = stream_rng(seed, 0);
    for _ in 0..trials {
        let c = DVector::from_fn(f.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        // random vector in the span of the frame
        let x = f.synthesis(&c)?;
        let xx = x.norm_squared();
        let e = f.analysis(&x)?.norm_squared();
        if e < a * xx * (1.0 - 1e-10) || e > b * xx * (1.0 + 1e-10) {
            return Err(Error::NotAFrame(format!("frame inequality violated: {e} outside [{}, {}]", a * xx, b * xx)));
        }
    }
    Ok(f.bounds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    /// `max |F^* c|^2 / |c|^2` over the trials.
    pub synthesis_ratio: f64,
    pub b: f64,
    /// `max |Fbar^* c|^2 / |c|^2` over the trials.
    pub dual_ratio: f64,
    pub inv_a: f64,
    /// Ratio at the top singular vector of `F^*`, which attains `b`.
    pub extremal_ratio: f64,
    pub passed: bool,
}

/// Checks `|F^* c|^2 <= b |c|^2` and `|Fbar^* c|^2 <= |c|^2 / a`.
pub fn synthesis_bound_check(f: &FrameSystem, trials: usize, seed: u64) -> Result<SynthesisReport> {
    let FrameBounds { a, b } = f.bounds;
    let mut rng = stream_rng(seed, 1);
    let (mut rs, mut rd): (f64, f64) = (0.0, 0.0);
    for _ in 0..trials {
        let c = DVector::from_fn(f.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let cc = c.norm_squared();
        rs = rs.max(f.synthesis(&c)?.norm_squared() / cc);
        rd = rd.max(f.dual_synthesis(&c)?.norm_squared() / cc);
    }
    let svd = f.vectors.clone().svd(true, false);
    let u = svd.u.ok_or_else(|| Error::Numerical("missing singular vectors".into()))?;
    let imax = svd.singular_values.imax();
    let top = u.column(imax).into_owned();
    let extremal_ratio = f.synthesis(&top)?.norm_squared() / top.norm_squared();
    let passed = rs <= b * (1.0 + 1e-10) && rd <= (1.0 / a) * (1.0 + 1e-10) && (extremal_ratio - b).abs() <= 1e-10 * b;
    Ok(SynthesisReport { synthesis_ratio: rs, b, dual_ratio: rd, inv_a: 1.0 / a, extremal_ratio, passed })
}

/// Max deviation of `Fbar^* F` and `F^* Fbar` from the identity on the span.
pub fn dual_identity_residual(f: &FrameSystem) -> f64 {
    let p1 = f.dual.transpose() * &f.vectors;
    let p2 = f.vectors.transpose() * &f.dual;
    // on the span both products are the orthogonal projector onto it
    let proj = if f.rank == f.dim() {
        DMatrix::identity(f.dim(), f.dim())
    } else {
        let svd = f.vectors.clone().svd(false, true);
        let vt = svd.v_t.expect("requested");
        let mut p = DMatrix::zeros(f.dim(), f.dim());
        for i in 0..svd.singular_values.len() {
            if svd.singular_values[i] > SPAN_TOL.sqrt() * svd.singular_values.max() {
                let r = vt.row(i).transpose();
                p += &r * r.transpose();
            }
        }
        p
    };
    (p1 - &proj).amax().max((p2 - proj).amax())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DfdSystem {
    pub phi: FrameSystem,
    pub psi: FrameSystem,
    pub kappa: SpectralSequence,
    operator: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfdExport {
    pub phi: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
    pub kappa: Vec<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl DfdSystem {
    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Max over `n` of `|A^* psi_n - kappa_n phi_n| / kappa_n`.
    pub fn condition_residual(&self) -> f64 {
        let at = self.operator.transpose();
        (0..self.len())
            .map(|n| {
                let psi = self.psi.vectors.row(n).transpose();
                let phi = self.phi.vectors.row(n).transpose();
                (&at * psi - phi * self.kappa[n]).norm() / (self.kappa[n] * self.phi.vectors.row(n).norm())
            })
            .fold(0.0, f64::max)
    }

    pub fn export(&self) -> DfdExport {
        DfdExport { phi: rows(&self.phi.vectors), psi: rows(&self.psi.vectors), kappa: self.kappa.values().to_vec() }
    }
}

/// `psi_n = kappa_n (A^*)^+ phi_n` with `kappa_n = 1/|(A^*)^+ phi_n|`, so every `psi_n` is a unit vector in `range(A)`.
pub fn build_dfd(a: &DMatrix<f64>, phi: &FrameSystem) -> Result<DfdSystem> {
    let (m, d) = a.shape();
    ensure_len(d, phi.dim())?;
    if phi.rank() != d {
        return Err(Error::InvalidParameter("phi must be a frame of the whole domain".into()));
    }
    // (A^*)^+ = A (A^T A)^{-1} for injective A
    let gram = a.transpose() * a;
    let chol = Cholesky::new(gram).ok_or_else(|| Error::Numerical("A^* is singular on the required subspace".into()))?;
    let mut psi = DMatrix::zeros(phi.len(), m);
    let mut kappa = Vec::with_capacity(phi.len());
    for n in 0..phi.len() {
        let w = a * chol.solve(&phi.vectors.row(n).transpose());
        let nw = w.norm();
        if !(nw > 0.0 && nw.is_finite()) {
            return Err(Error::Numerical(format!("degenerate preimage for frame vector {n}")));
        }
        psi.set_row(n, &(w / nw).transpose());
        kappa.push(1.0 / nw);
    }
    let psi = FrameSystem::for_subspace(psi, d)?;
    let out = DfdSystem { phi: phi.clone(), psi, kappa: SpectralSequence::positive(kappa, "kappa")?, operator: a.clone() };
    let res = out.condition_residual();
    if res > 1e-10 {
        return Err(Error::Numerical(format!("DFD condition residual {res:e}")));
    }
    Ok(out)
}

/// `x = Fbar_phi^*(g . F_psi y)`.
pub fn frame_reconstruct(dfd: &DfdSystem, g: &SpectralSequence, y: &DVector<f64>) -> Result<DVector<f64>> {
    ensure_len(dfd.len(), g.len())?;
    let c = dfd.psi.analysis(y)?;
    let scaled = DVector::from_iterator(c.len(), c.iter().zip(g.iter()).map(|(c, g)| c * g));
    dfd.phi.dual_synthesis(&scaled)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMse {
    pub filter: FilterSpec,
    /// `sum Pi Delta / (kappa^2 Pi + Delta)`, the minimum of the coefficient-domain bound.
    pub upper_bound: f64,
    /// `1/a_phi`; the risk itself is at most `upper_bound / a_phi`.
    pub frame_factor: f64,
}

/// Frame analogue of the MSE filter, `kappa Pi / (kappa^2 Pi + Delta)`.
///
/// `data` holds frame moments `E<x,phi_n>^2`, `noise` holds `E<e,psi_n>^2`.
pub fn frame_mse_filter(dfd: &DfdSystem, data: &DataLaw, noise: &NoiseLaw) -> Result<FrameMse> {
    ensure_len(dfd.len(), data.len())?;
    ensure_len(dfd.len(), noise.len())?;
    let mut g = Vec::with_capacity(dfd.len());
    let mut bound = 0.0;
    for n in 0..dfd.len() {
        let (k, p, d) = (dfd.kappa[n], data.pi()[n], noise.delta_seq()[n]);
        if p == 0.0 {
            return Err(Error::UndefinedCoefficient { index: n, reason: "Pi_n = 0".into() });
        }
        let den = k * k * p + d;
        g.push(k * p / den);
        bound += p * d / den;
    }
    let filter = FilterSpec::new(SpectralSequence::new(g, "g_mse_frame")?, FilterFamily::Mse, "frame MSE filter kappa*Pi/(kappa^2*Pi+Delta)");
    Ok(FrameMse { filter, upper_bound: bound, frame_factor: 1.0 / dfd.phi.bounds.a })
}

/// Coefficient-domain bound `sum (1 - kappa g)^2 Pi + g^2 Delta`.
pub fn frame_coefficient_risk(dfd: &DfdSystem, g: &SpectralSequence, data: &DataLaw, noise: &NoiseLaw) -> Result<f64> {
    ensure_len(dfd.len(), g.len())?;
    ensure_len(dfd.len(), data.len())?;
    ensure_len(dfd.len(), noise.len())?;
    Ok((0..dfd.len())
        .map(|n| {
            let r = 1.0 - dfd.kappa[n] * g[n];
            r * r * data.pi()[n] + g[n] * g[n] * noise.delta_seq()[n]
        })
        .sum())
}

/// Frame moments `phi_n^T C phi_n` of a covariance `C`.
pub fn frame_moments(f: &FrameSystem, cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    ensure_len(f.dim(), cov.nrows())?;
    ensure_len(f.dim(), cov.ncols())?;
    Ok((0..f.len())
        .map(|n| {
            let v = f.vectors.row(n).transpose();
            (v.transpose() * cov * &v)[(0, 0)]
        })
        .collect())
}

/// Monte-Carlo risk `E |x_rec - x|^2` with `x ~ N(0, cov_x)` and `e ~ N(0, cov_e)`.
pub fn frame_mc_risk(
    dfd: &DfdSystem,
    g: &SpectralSequence,
    cov_x: &DMatrix<f64>,
    cov_e: &DMatrix<f64>,
    count: usize,
    seed: u64,
) -> Result<RiskReport> {
    let (m, d) = dfd.operator.shape();
    ensure_len(d, cov_x.nrows())?;
    ensure_len(m, cov_e.nrows())?;
    if count < 2 {
        return Err(Error::InvalidParameter("Monte-Carlo risk needs at least 2 samples".into()));
    }
    let lx = Cholesky::new(cov_x.clone()).ok_or_else(|| Error::InvalidParameter("cov_x is not positive definite".into()))?.l();
    let le = Cholesky::new(cov_e.clone()).ok_or_else(|| Error::InvalidParameter("cov_e is not positive definite".into()))?.l();
    let a = &dfd.operator;
    let shards = count.div_ceil(MC_SHARD);
    let parts: Vec<(usize, f64, f64, [f64; 3])> = (0..shards)
        .into_par_iter()
        .map(|k| -> Result<(usize, f64, f64, [f64; 3])> {
            let mut rng = stream_rng(seed, k as u64);
            let todo = MC_SHARD.min(count - k * MC_SHARD);
            let (mut mean, mut m2) = (0.0, 0.0);
            let mut parts = [0.0; 3];
            for i in 0..todo {
                let zx = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let ze = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
                let x = &lx * zx;
                let e = &le * ze;
                let clean = frame_reconstruct(dfd, g, &(a * &x))? - &x;
                let noisy = frame_reconstruct(dfd, g, &e)?;
                let (b, v, c) = (clean.norm_squared(), noisy.norm_squared(), 2.0 * clean.dot(&noisy));
                let val = b + v + c;
                let delta = val - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (val - mean);
                parts[0] += b;
                parts[1] += v;
                parts[2] += c;
            }
            Ok((todo, mean, m2, parts))
        })
        .collect::<Result<_>>()?;
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    let mut sums = [0.0; 3];
    for (cnt, mu, q, p) in parts {
        let tot = n + cnt;
        let d = mu - mean;
        mean += d * cnt as f64 / tot as f64;
        m2 += q + d * d * n as f64 * cnt as f64 / tot as f64;
        n = tot;
        for i in 0..3 {
            sums[i] += p[i];
        }
    }
    let nf = n as f64;
    Ok(RiskReport {
        value: mean,
        decomposition: Decomposition { bias_term: sums[0] / nf, noise_term: sums[1] / nf, mixed_term: sums[2] / nf },
        method: RiskMethod::MonteCarlo { count: n, stderr: (m2 / (nf - 1.0) / nf).sqrt() },
    })
}

/// Parses a frame from CSV: one frame vector per line, `#` comments allowed.
pub fn parse_frame_csv(text: &str) -> Result<FrameSystem> {
    let mut data = Vec::new();
    let mut width = None;
    let mut count = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: '{}' ({e})", i + 1, t.trim()))))
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse(format!("line {}: expected {w} columns, found {}", i + 1, row.len())))
            }
            _ => {}
        }
        data.extend(row);
        count += 1;
    }
    let w = width.ok_or_else(|| Error::Parse("line 1: no frame vectors".into()))?;
    FrameSystem::new(DMatrix::from_row_slice(count, w, &data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::CoeffDist;
    use crate::seqspace::SpaceTag;

    fn standard_frames() -> Vec<(&'static str, FrameSystem)> {
        vec![
            ("orthonormal", FrameSystem::orthonormal(3).unwrap()),
            ("mercedes", FrameSystem::mercedes_benz().unwrap()),
            ("doubled", FrameSystem::doubled_basis(3).unwrap()),
        ]
    }

    #[test]
    fn bounds_of_standard_frames() {
        let want = [(1.0, 1.0), (1.5, 1.5), (2.0, 2.0)];
        for ((name, f), (a, b)) in standard_frames().into_iter().zip(want) {
            let fb = frame_bounds(&f, 1000, 1).unwrap();
            assert!((fb.a - a).abs() < 1e-12 && (fb.b - b).abs() < 1e-12, "{name}: {fb:?}");
            assert!(dual_identity_residual(&f) < 1e-12, "{name}");
        }
    }

    #[test]
    fn rank_deficient_rows_rejected() {
        let v = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, -1.0, 0.0]);
        assert!(matches!(FrameSystem::new(v), Err(Error::NotAFrame(_))));
    }

    #[test]
    fn synthesis_bounds() {
        for (name, f) in standard_frames() {
            let r = synthesis_bound_check(&f, 500, 2).unwrap();
            assert!(r.passed, "{name}: {r:?}");
        }
        let mb = FrameSystem::mercedes_benz().unwrap();
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert!((mb.synthesis(&e1).unwrap().norm_squared() - 1.0).abs() < 1e-15);
        let on = FrameSystem::orthonormal(4).unwrap();
        let c = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.5]);
        assert!((on.synthesis(&c).unwrap().norm() - c.norm()).abs() < 1e-15);
    }

    #[test]
    fn dfd_examples() {
        let id = DMatrix::identity(3, 3);
        let on = FrameSystem::orthonormal(3).unwrap();
        let dfd = build_dfd(&id, &on).unwrap();
        assert_eq!(dfd.kappa.values(), &[1.0, 1.0, 1.0]);
        assert!((dfd.psi.vectors() - on.vectors()).amax() < 1e-15);

        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let dfd = build_dfd(&a, &FrameSystem::orthonormal(2).unwrap()).unwrap();
        assert!((dfd.kappa[0] - 2.0).abs() < 1e-15 && (dfd.kappa[1] - 1.0).abs() < 1e-15);
        assert!((dfd.psi.vectors() - DMatrix::identity(2, 2)).amax() < 1e-15);

        let dfd = build_dfd(&a, &FrameSystem::mercedes_benz().unwrap()).unwrap();
        let fb = dfd.psi.bounds();
        // oracle: eigenvalues of the 2x2 psi frame operator in closed form
        let op = dfd.psi.vectors().transpose() * dfd.psi.vectors();
        let (t, det) = (op.trace(), op.determinant());
        let disc = (t * t / 4.0 - det).sqrt();
        assert!((fb.a - (t / 2.0 - disc)).abs() < 1e-12 && (fb.b - (t / 2.0 + disc)).abs() < 1e-12);
        assert!(fb.a > 0.0);
        assert!(dfd.condition_residual() < 1e-12);
        for n in 0..3 {
            assert!((dfd.psi.vectors().row(n).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn dfd_quasi_singular_equation() {
        let a = DMatrix::from_row_slice(4, 3, &[1.0, 0.2, 0.0, 0.0, 1.5, 0.3, 0.1, 0.0, 0.7, 0.4, -0.2, 0.1]);
        let phi = FrameSystem::mercedes_benz().unwrap();
        assert!(build_dfd(&a, &phi).is_err());
        let phi = FrameSystem::doubled_basis(3).unwrap();
        let dfd = build_dfd(&a, &phi).unwrap();
        let x = DVector::from_vec(vec![0.3, -1.2, 0.8]);
        let lhs = dfd.psi.analysis(&(&a * &x)).unwrap();
        let rhs = phi.analysis(&x).unwrap();
        for n in 0..6 {
            assert!((lhs[n] - dfd.kappa[n] * rhs[n]).abs() < 1e-12);
        }
        // inverse filter recovers x
        let inv = dfd.kappa.map(|k| 1.0 / k).unwrap();
        let rec = frame_reconstruct(&dfd, &inv, &(&a * &x)).unwrap();
        assert!((rec - &x).norm() < 1e-12);
        let zero = SpectralSequence::constant(6, 0.0, "g").unwrap();
        assert_eq!(frame_reconstruct(&dfd, &zero, &(&a * &x)).unwrap().norm(), 0.0);
    }

    #[test]
    fn frame_mse_examples() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5, 0.1]));
        let dfd = build_dfd(&a, &FrameSystem::doubled_basis(3).unwrap()).unwrap();
        let data = DataLaw::from_moments(vec![1.0, 0.5, 0.2, 1.0, 0.5, 0.2], CoeffDist::Gaussian).unwrap();
        let zero = NoiseLaw::new(vec![0.0; 6], CoeffDist::Gaussian, SpaceTag::Y).unwrap();
        let r = frame_mse_filter(&dfd, &data, &zero).unwrap();
        for n in 0..6 {
            assert!((r.filter.g[n] * dfd.kappa[n] - 1.0).abs() < 1e-15);
        }
        assert_eq!(r.frame_factor, 0.5);

        // unique minimizer of the coefficient bound, per index
        let noise = NoiseLaw::new(vec![0.1, 0.2, 0.05, 0.1, 0.3, 0.01], CoeffDist::Gaussian, SpaceTag::Y).unwrap();
        let r = frame_mse_filter(&dfd, &data, &noise).unwrap();
        for n in 0..6 {
            let (k, p, d) = (dfd.kappa[n], data.pi()[n], noise.delta_seq()[n]);
            let obj = |g: f64| (1.0 - k * g).powi(2) * p + g * g * d;
            let best = (0..=1_000_000).map(|i| i as f64 / 1_000_000.0 / k).min_by(|a, b| obj(*a).total_cmp(&obj(*b))).unwrap();
            assert!((best - r.filter.g[n]).abs() < 1e-6 / k + 1e-7);
        }
        let lhs = frame_coefficient_risk(&dfd, &r.filter.g, &data, &noise).unwrap();
        assert!((lhs - r.upper_bound).abs() < 1e-14);
    }

    #[test]
    fn moments_are_dominated_by_upper_bound() {
        let f = FrameSystem::mercedes_benz().unwrap();
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
        let total: f64 = frame_moments(&f, &c).unwrap().iter().sum();
        assert!(total <= f.bounds().b * c.trace() * (1.0 + 1e-14));
    }

    #[test]
    fn csv_and_export() {
        let f = parse_frame_csv("# mercedes\n0,1\n-0.8660254037844386,-0.5\n0.8660254037844386,-0.5\n").unwrap();
        assert!((f.bounds().a - 1.5).abs() < 1e-12);
        assert!(parse_frame_csv("1,0\n0,x\n").unwrap_err().to_string().contains("line 2"));
        assert!(parse_frame_csv("1,0\n0\n").unwrap_err().to_string().contains("line 2"));
        let dfd = build_dfd(&DMatrix::identity(2, 2), &f).unwrap();
        let js = serde_json::to_value(dfd.export()).unwrap();
        assert_eq!(js["kappa"].as_array().unwrap().len(), 3);
    }
}
