//! Truncated coefficient sequences.
//!
//! Every filter, moment and risk in this crate is a finite sequence indexed
//! by the singular (or frame) index `n = 1..N`. Internally indices are
//! zero-based; the one-based convention only shows up in [`sum_tail`] and
//! in the power-law constructors.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};

/// A finite real sequence with a provenance label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSequence {
    values: Vec<f64>,
    #[serde(default)]
    label: String,
}

impl SpectralSequence {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("sequence must have length >= 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "entry {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self { values, label: label.into() })
    }

    /// Like [`SpectralSequence::new`] but additionally requires entries `>= 0`.
    pub fn non_negative(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let s = Self::new(values, label)?;
        if let Some(i) = s.values.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "entry {i} of '{}' is negative ({})",
                s.label, s.values[i]
            )));
        }
        Ok(s)
    }

    /// Like [`SpectralSequence::new`] but additionally requires entries `> 0`.
    pub fn positive(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let s = Self::new(values, label)?;
        if let Some(i) = s.values.iter().position(|&v| v <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "entry {i} of '{}' is not positive ({})",
                s.label, s.values[i]
            )));
        }
        Ok(s)
    }

    /// `values[n-1] = f(n)` for `n = 1..=len`.
    pub fn from_fn(len: usize, label: impl Into<String>, f: impl Fn(usize) -> f64) -> Result<Self> {
        Self::new((1..=len).map(f).collect(), label)
    }

    pub fn constant(len: usize, value: f64, label: impl Into<String>) -> Result<Self> {
        Self::new(vec![value; len], label)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.values.iter()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect(), self.label.clone())
    }

    pub fn scale(&self, factor: f64) -> Result<Self> {
        self.map(|v| factor * v)
    }
}

impl std::ops::Index<usize> for SpectralSequence {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Binary operations accepted by [`elementwise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    /// Division; a zero divisor is rejected rather than producing `inf`.
    Div,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }
}

/// Applies `op` entrywise. The label of the result records both operands.
pub fn elementwise(op: BinaryOp, a: &SpectralSequence, b: &SpectralSequence) -> Result<SpectralSequence> {
    ensure_len(a.len(), b.len())?;
    let mut out = Vec::with_capacity(a.len());
    for (i, (&x, &y)) in a.values.iter().zip(&b.values).enumerate() {
        let v = match op {
            BinaryOp::Add => x + y,
            BinaryOp::Sub => x - y,
            BinaryOp::Mul => x * y,
            BinaryOp::Div => {
                if y == 0.0 {
                    return Err(Error::DivisionByZero { index: i });
                }
                x / y
            }
        };
        out.push(v);
    }
    SpectralSequence::new(out, format!("({}){}({})", a.label, op.symbol(), b.label))
}

/// Entrywise combination with an arbitrary closure.
pub fn elementwise_with(
    a: &SpectralSequence,
    b: &SpectralSequence,
    label: impl Into<String>,
    op: impl Fn(f64, f64) -> f64,
) -> Result<SpectralSequence> {
    ensure_len(a.len(), b.len())?;
    SpectralSequence::new(a.values.iter().zip(&b.values).map(|(&x, &y)| op(x, y)).collect(), label)
}

/// `sum_{n = from..=N} s_n` with one-based `from`; `from = N + 1` is the empty sum.
pub fn sum_tail(s: &SpectralSequence, from_index: usize) -> Result<f64> {
    let n = s.len();
    if from_index == 0 || from_index > n + 1 {
        return Err(Error::IndexOutOfRange { index: from_index, len: n });
    }
    Ok(s.values[from_index - 1..].iter().sum())
}

/// Which side of the operator a coefficient vector lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceTag {
    /// Coefficients `<x, u_n>` in the domain.
    X,
    /// Coefficients `<y, v_n>` in the data space.
    Y,
}

/// Coefficients of an element of X or Y in the singular basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    entries: Vec<f64>,
    space: SpaceTag,
}

impl CoefficientVector {
    pub fn new(entries: Vec<f64>, space: SpaceTag) -> Result<Self> {
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("coefficient {i} is not finite")));
        }
        Ok(Self { entries, space })
    }

    pub fn x(entries: Vec<f64>) -> Result<Self> {
        Self::new(entries, SpaceTag::X)
    }

    pub fn y(entries: Vec<f64>) -> Result<Self> {
        Self::new(entries, SpaceTag::Y)
    }

    pub fn zeros(len: usize, space: SpaceTag) -> Self {
        Self { entries: vec![0.0; len], space }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn space(&self) -> SpaceTag {
        self.space
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub(crate) fn expect_space(&self, space: SpaceTag) -> Result<()> {
        if self.space == space {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "expected {space:?}-coefficients, got {:?}-coefficients",
                self.space
            )))
        }
    }
}

impl std::ops::Index<usize> for CoefficientVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.entries[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(v: &[f64]) -> SpectralSequence {
        SpectralSequence::new(v.to_vec(), "t").unwrap()
    }

    #[test]
    fn elementwise_examples() {
        assert_eq!(elementwise(BinaryOp::Mul, &seq(&[1.0, 2.0]), &seq(&[3.0, 4.0])).unwrap().values(), &[3.0, 8.0]);
        assert_eq!(elementwise(BinaryOp::Add, &seq(&[0.0, 0.0]), &seq(&[5.0, 6.0])).unwrap().values(), &[5.0, 6.0]);
        assert_eq!(
            elementwise(BinaryOp::Div, &seq(&[1.0, 1.0]), &seq(&[0.0, 1.0])),
            Err(Error::DivisionByZero { index: 0 })
        );
        assert!(matches!(
            elementwise(BinaryOp::Add, &seq(&[1.0]), &seq(&[1.0, 2.0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn label_records_provenance() {
        let a = seq(&[1.0]).with_label("sigma");
        let b = seq(&[2.0]).with_label("pi");
        assert_eq!(elementwise(BinaryOp::Mul, &a, &b).unwrap().label(), "(sigma)*(pi)");
    }

    #[test]
    fn sum_tail_examples() {
        let s = seq(&[1.0, 2.0, 3.0]);
        assert_eq!(sum_tail(&s, 2).unwrap(), 5.0);
        assert_eq!(sum_tail(&s, 4).unwrap(), 0.0);
        assert!(sum_tail(&s, 0).is_err());
        assert!(sum_tail(&s, 5).is_err());
    }

    #[test]
    fn sum_tail_inverse_squares() {
        let s = SpectralSequence::from_fn(1000, "n^-2", |n| (n as f64).powi(-2)).unwrap();
        // independent oracle: accumulate from the small end in reverse
        let oracle: f64 = (4..=1000).rev().map(|n| 1.0 / ((n * n) as f64)).sum();
        let got = sum_tail(&s, 4).unwrap();
        assert!((got - oracle).abs() < 1e-14);
        // the truncated tail stops short of the infinite tail pi^2/6 - 1 - 1/4 - 1/9
        let infinite = std::f64::consts::PI.powi(2) / 6.0 - 1.0 - 0.25 - 1.0 / 9.0;
        assert!((infinite - 0.283823).abs() < 1e-6);
        assert!((infinite - got - 1.0 / 1000.5).abs() < 1e-6);
    }

    #[test]
    fn constructors_validate() {
        assert!(SpectralSequence::new(vec![], "e").is_err());
        assert!(SpectralSequence::new(vec![f64::NAN], "e").is_err());
        assert!(SpectralSequence::non_negative(vec![-1.0], "e").is_err());
        assert!(SpectralSequence::positive(vec![0.0], "e").is_err());
        assert!(SpectralSequence::positive(vec![1e-300], "e").is_ok());
    }

    fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3f64..1e3, len)
    }

    proptest! {
        #[test]
        fn add_mul_commute(a in finite_vec(16), b in finite_vec(16)) {
            let (a, b) = (seq(&a), seq(&b));
            for op in [BinaryOp::Add, BinaryOp::Mul] {
                let ab = elementwise(op, &a, &b).unwrap();
                let ba = elementwise(op, &b, &a).unwrap();
                prop_assert_eq!(ab.values(), ba.values());
            }
        }

        #[test]
        fn add_associates(a in finite_vec(8), b in finite_vec(8), c in finite_vec(8)) {
            let (a, b, c) = (seq(&a), seq(&b), seq(&c));
            let l = elementwise(BinaryOp::Add, &elementwise(BinaryOp::Add, &a, &b).unwrap(), &c).unwrap();
            let r = elementwise(BinaryOp::Add, &a, &elementwise(BinaryOp::Add, &b, &c).unwrap()).unwrap();
            for (x, y) in l.iter().zip(r.iter()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn prefix_plus_tail_is_total(v in prop::collection::vec(0.0f64..10.0, 1..2000), k in 1usize..2001) {
            let s = seq(&v);
            let k = k.min(s.len() + 1);
            let total = sum_tail(&s, 1).unwrap();
            let prefix: f64 = v[..k - 1].iter().sum();
            let tail = sum_tail(&s, k).unwrap();
            prop_assert!((prefix + tail - total).abs() <= 1e-12 * total.max(1.0));
        }
    }
}
