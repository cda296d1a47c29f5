//! Forward operators in diagonalized form.
//!
//! A [`SingularSystem`] stores the singular values of `A` and, when it was
//! built from an explicit matrix, the bases that map between ambient vectors
//! and singular coefficients. Synthetic systems live in canonical coordinates
//! and carry no bases.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::seqspace::{CoefficientVector, SpaceTag, SpectralSequence};

/// Singular values below `RANK_TOL * sigma_max` are treated as exact zeros.
pub const RANK_TOL: f64 = 1e-12;

/// Singular value decay of a synthetic operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum Decay {
    /// `sigma_n = n^{-p}`, `p > 0`.
    Polynomial(f64),
    /// `sigma_n = c^n`, `0 < c < 1`.
    Exponential(f64),
}

impl Decay {
    fn validate(self) -> Result<()> {
        match self {
            Decay::Polynomial(p) if !(p > 0.0 && p.is_finite()) => {
                Err(Error::InvalidParameter(format!("polynomial decay needs p > 0, got {p}")))
            }
            Decay::Exponential(c) if !(c > 0.0 && c < 1.0) => {
                Err(Error::InvalidParameter(format!("exponential decay needs c in (0,1), got {c}")))
            }
            _ => Ok(()),
        }
    }

    pub fn value(self, n: usize) -> f64 {
        match self {
            Decay::Polynomial(p) => (n as f64).powf(-p),
            Decay::Exponential(c) => c.powi(n as i32),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularSystem {
    sigma: SpectralSequence,
    /// Columns are `u_1..u_N` followed by an orthonormal basis of `N(A)`.
    basis_u: Option<DMatrix<f64>>,
    /// Columns are `v_1..v_N`.
    basis_v: Option<DMatrix<f64>>,
    null_dim: usize,
}

impl SingularSystem {
    /// Builds a system in canonical coordinates. Singular values are sorted
    /// non-increasingly and must be strictly positive.
    pub fn from_singular_values(mut sigma: Vec<f64>, null_dim: usize) -> Result<Self> {
        sigma.sort_by(|a, b| b.total_cmp(a));
        let sigma = SpectralSequence::positive(sigma, "sigma")?;
        Ok(Self { sigma, basis_u: None, basis_v: None, null_dim })
    }

    pub fn sigma(&self) -> &SpectralSequence {
        &self.sigma
    }

    /// Number of active (non-null) coordinates.
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn null_dim(&self) -> usize {
        self.null_dim
    }

    /// Length of an X-coefficient vector: active plus null coordinates.
    pub fn x_dim(&self) -> usize {
        self.sigma.len() + self.null_dim
    }

    pub fn basis_u(&self) -> Option<&DMatrix<f64>> {
        self.basis_u.as_ref()
    }

    pub fn basis_v(&self) -> Option<&DMatrix<f64>> {
        self.basis_v.as_ref()
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma[0]
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma[self.len() - 1]
    }

    /// `A† A x`: keeps the active coordinates and zeroes the null-space part.
    pub fn project_range(&self, x: &CoefficientVector) -> Result<CoefficientVector> {
        x.expect_space(SpaceTag::X)?;
        ensure_len(self.x_dim(), x.len())?;
        let mut out = x.entries().to_vec();
        out[self.len()..].iter_mut().for_each(|v| *v = 0.0);
        CoefficientVector::x(out)
    }

    /// Coefficients `<x, u_n>` of an ambient vector (including null coordinates).
    pub fn analyze_x(&self, x: &DVector<f64>) -> Result<CoefficientVector> {
        match &self.basis_u {
            Some(u) => {
                ensure_len(u.nrows(), x.len())?;
                CoefficientVector::x((u.transpose() * x).as_slice().to_vec())
            }
            None => {
                ensure_len(self.x_dim(), x.len())?;
                CoefficientVector::x(x.as_slice().to_vec())
            }
        }
    }

    pub fn synthesize_x(&self, c: &CoefficientVector) -> Result<DVector<f64>> {
        c.expect_space(SpaceTag::X)?;
        ensure_len(self.x_dim(), c.len())?;
        let c = DVector::from_column_slice(c.entries());
        Ok(match &self.basis_u {
            Some(u) => u * c,
            None => c,
        })
    }

    /// Coefficients `<y, v_n>`; components orthogonal to the range are dropped.
    pub fn analyze_y(&self, y: &DVector<f64>) -> Result<CoefficientVector> {
        match &self.basis_v {
            Some(v) => {
                ensure_len(v.nrows(), y.len())?;
                CoefficientVector::y((v.transpose() * y).as_slice().to_vec())
            }
            None => {
                ensure_len(self.len(), y.len())?;
                CoefficientVector::y(y.as_slice().to_vec())
            }
        }
    }

    pub fn synthesize_y(&self, c: &CoefficientVector) -> Result<DVector<f64>> {
        c.expect_space(SpaceTag::Y)?;
        ensure_len(self.len(), c.len())?;
        let c = DVector::from_column_slice(c.entries());
        Ok(match &self.basis_v {
            Some(v) => v * c,
            None => c,
        })
    }
}

pub fn make_synthetic(n: usize, decay: Decay, null_dim: usize) -> Result<SingularSystem> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    decay.validate()?;
    let sigma = SpectralSequence::positive((1..=n).map(|k| decay.value(k)).collect(), "sigma")?;
    Ok(SingularSystem { sigma, basis_u: None, basis_v: None, null_dim })
}

/// Computes the singular system of a dense matrix.
pub fn from_matrix(a: &DMatrix<f64>) -> Result<SingularSystem> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("matrix must be non-empty".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    // Zero rows leave singular values and right vectors unchanged, and give a
    // full n×n right basis so the null space comes for free.
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let u_left = svd.u.ok_or_else(|| Error::Numerical("missing left singular vectors".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("missing right singular vectors".into()))?;

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s_max = svd.singular_values[order[0]];
    if s_max == 0.0 {
        return Err(Error::InvalidParameter("zero operator has no active singular values".into()));
    }
    let active: Vec<usize> = order.iter().copied().filter(|&i| svd.singular_values[i] > RANK_TOL * s_max).collect();
    let rank = active.len();

    let mut basis_u = DMatrix::zeros(n, n);
    for (col, &i) in active.iter().enumerate() {
        basis_u.set_column(col, &v_t.row(i).transpose());
    }
    // null space: right vectors with dropped singular values
    let dropped: Vec<usize> = (0..v_t.nrows()).filter(|i| !active.contains(i)).collect();
    for (k, &i) in dropped.iter().enumerate() {
        basis_u.set_column(rank + k, &v_t.row(i).transpose());
    }
    if rank + dropped.len() != n {
        return Err(Error::Numerical("right singular basis is incomplete".into()));
    }

    let mut basis_v = DMatrix::zeros(m, rank);
    for (col, &i) in active.iter().enumerate() {
        basis_v.set_column(col, &u_left.column(i).rows(0, m));
    }
    let sigma = SpectralSequence::positive(active.iter().map(|&i| svd.singular_values[i]).collect(), "sigma")?;
    Ok(SingularSystem { sigma, basis_u: Some(basis_u), basis_v: Some(basis_v), null_dim: n - rank })
}

/// `y_n = sigma_n x_n` on active coordinates; null coordinates are discarded.
pub fn apply_forward(s: &SingularSystem, x: &CoefficientVector) -> Result<CoefficientVector> {
    x.expect_space(SpaceTag::X)?;
    ensure_len(s.x_dim(), x.len())?;
    CoefficientVector::y(s.sigma.iter().zip(x.entries()).map(|(s, x)| s * x).collect())
}

/// `x_n = y_n / sigma_n`; null coordinates are zero.
pub fn apply_pseudo_inverse(s: &SingularSystem, y: &CoefficientVector) -> Result<CoefficientVector> {
    y.expect_space(SpaceTag::Y)?;
    ensure_len(s.len(), y.len())?;
    let mut out: Vec<f64> = s.sigma.iter().zip(y.entries()).map(|(s, y)| y / s).collect();
    out.resize(s.x_dim(), 0.0);
    CoefficientVector::x(out)
}

/// Parses a dense row-major matrix.
///
/// The first non-comment line gives the shape as `rows,cols`. A literal
/// `rows,cols` header line followed by the numeric shape is also accepted.
/// Lines starting with `#` are ignored.
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let parse_row = |lineno: usize, line: &str| -> Result<Vec<f64>> {
        line.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {lineno}: '{}' ({e})", t.trim())))
            })
            .collect()
    };
    let (mut lineno, mut head) = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    if head.replace(' ', "").eq_ignore_ascii_case("rows,cols") {
        (lineno, head) = lines.next().ok_or_else(|| Error::Parse(format!("line {lineno}: missing shape")))?;
    }
    let shape: Vec<usize> = head
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| Error::Parse(format!("line {lineno}: bad shape ({e})"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = shape[..] else {
        return Err(Error::Parse(format!("line {lineno}: shape must be 'rows,cols'")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (lineno, line) in lines {
        let row = parse_row(lineno, line)?;
        if row.len() != cols {
            return Err(Error::Parse(format!("line {lineno}: expected {cols} columns, found {}", row.len())));
        }
        data.extend(row);
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Parse(format!("expected {rows} rows, found {seen}")));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}
