//! Dense row-major f64 tensors.
//!
//! The whole crate works at toy scale, so everything is a flat `Vec<f64>`
//! plus a shape. No broadcasting; shape agreement is checked explicitly and
//! violations surface as [`NumError`].

use std::fmt;

use serde::{Deserialize, Serialize};

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum NumError {
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    ModeOutOfRange {
        mode: usize,
        ndim: usize,
    },
    InvalidRange {
        lo: f64,
        hi: f64,
    },
    NonFinite {
        context: String,
    },
}

impl fmt::Display for NumError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumError::ShapeMismatch { op, lhs, rhs } => {
                write!(f, "{op}: shape mismatch {lhs:?} vs {rhs:?}")
            }
            NumError::ModeOutOfRange { mode, ndim } => {
                write!(f, "mode {mode} out of range for {ndim}-mode tensor")
            }
            NumError::InvalidRange { lo, hi } => {
                write!(f, "invalid range: lo={lo} must be < hi={hi}")
            }
            NumError::NonFinite { context } => write!(f, "non-finite value in {context}"),
        }
    }
}

impl std::error::Error for NumError {}

/// Dense tensor with row-major storage.
///
/// Invariant: `shape.iter().product() == data.len()`. Constructors enforce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Tensor of zeros with the given shape.
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    /// Build from a flat row-major buffer. Panics if the length does not
    /// match the shape product; callers construct shapes, not users.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        let n: usize = shape.iter().product();
        assert_eq!(
            n,
            data.len(),
            "tensor data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    /// 2-D convenience constructor from nested rows (used heavily in tests).
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Tensor::from_vec(&[r, c], data)
    }

    /// Identity matrix of extent `n`.
    pub fn eye(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Row `i` of a 2-D tensor as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        assert_eq!(self.ndim(), 2, "row() requires a 2-D tensor");
        let c = self.shape[1];
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        assert_eq!(self.ndim(), 2, "row_mut() requires a 2-D tensor");
        let c = self.shape[1];
        &mut self.data[i * c..(i + 1) * c]
    }

    /// Element access by multi-index (test convenience; hot paths index flat).
    pub fn at(&self, idx: &[usize]) -> f64 {
        self.data[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let k = self.flat_index(idx);
        self.data[k] = v;
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.shape.len());
        let mut k = 0;
        for (d, (&i, &extent)) in idx.iter().zip(&self.shape).enumerate() {
            assert!(i < extent, "index {i} out of bounds in dim {d}");
            k = k * extent + i;
        }
        k
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|x| *x *= c);
    }

    /// `self += c * other`; shapes must agree.
    pub fn axpy(&mut self, c: f64, other: &Tensor) -> Result<(), NumError> {
        if self.shape != other.shape {
            return Err(NumError::ShapeMismatch {
                op: "axpy",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64, NumError> {
        if self.shape != other.shape {
            return Err(NumError::ShapeMismatch {
                op: "dot",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Reinterpret the buffer under a new shape with the same element count.
    pub fn reshape(&self, shape: &[usize]) -> Tensor {
        let n: usize = shape.iter().product();
        assert_eq!(n, self.data.len(), "reshape must preserve element count");
        Tensor::from_vec(shape, self.data.clone())
    }

    /// Shape/data consistency check for tensors read from files.
    pub fn is_consistent(&self) -> bool {
        self.shape.iter().product::<usize>() == self.data.len()
    }
}

/// Matrix product of a `m×k` and a `k×n` tensor.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, NumError> {
    if a.ndim() != 2 || b.ndim() != 2 || a.shape[1] != b.shape[0] {
        return Err(NumError::ShapeMismatch {
            op: "matmul",
            lhs: a.shape.clone(),
            rhs: b.shape.clone(),
        });
    }
    let (m, k) = (a.shape[0], a.shape[1]);
    let n = b.shape[1];
    let mut out = Tensor::zeros(&[m, n]);
    for i in 0..m {
        let arow = &a.data[i * k..(i + 1) * k];
        let orow = &mut out.data[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(out)
}

/// Transpose of a 2-D tensor.
pub fn transpose(a: &Tensor) -> Tensor {
    assert_eq!(a.ndim(), 2);
    let (m, n) = (a.shape[0], a.shape[1]);
    let mut out = Tensor::zeros(&[n, m]);
    for i in 0..m {
        for j in 0..n {
            out.data[j * m + i] = a.data[i * n + j];
        }
    }
    out
}

/// n-mode product `t ×_mode M` with `M: J×I_mode`.
///
/// The extent of `t` along `mode` is replaced by `J`:
/// `out[.., j, ..] = Σ_i M[j, i] · t[.., i, ..]`.
pub fn n_mode_product(t: &Tensor, m: &Tensor, mode: usize) -> Result<Tensor, NumError> {
    if mode >= t.ndim() {
        return Err(NumError::ModeOutOfRange {
            mode,
            ndim: t.ndim(),
        });
    }
    if m.ndim() != 2 || m.shape[1] != t.shape[mode] {
        return Err(NumError::ShapeMismatch {
            op: "n_mode_product",
            lhs: t.shape.clone(),
            rhs: m.shape.clone(),
        });
    }
    let i_n = t.shape[mode];
    let j_n = m.shape[0];
    // Row-major layout factors as [outer, mode, inner].
    let outer: usize = t.shape[..mode].iter().product();
    let inner: usize = t.shape[mode + 1..].iter().product();

    let mut out_shape = t.shape.clone();
    out_shape[mode] = j_n;
    let mut out = Tensor::zeros(&out_shape);

    for o in 0..outer {
        let t_base = o * i_n * inner;
        let y_base = o * j_n * inner;
        for j in 0..j_n {
            let mrow = &m.data[j * i_n..(j + 1) * i_n];
            let y_off = y_base + j * inner;
            for (i, &mv) in mrow.iter().enumerate() {
                if mv == 0.0 {
                    continue;
                }
                let t_off = t_base + i * inner;
                for q in 0..inner {
                    out.data[y_off + q] += mv * t.data[t_off + q];
                }
            }
        }
    }
    Ok(out)
}
