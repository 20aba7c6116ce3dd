//! Dense N-order tensors and the multilinear primitives built on them.
//!
//! Storage is row-major (the last index varies fastest). Matricization uses the
//! Kolda–Bader column ordering: the remaining mode indices enumerate columns
//! with the lowest mode varying fastest, so that
//! `matricize(X ×ₘ Aₘ …, n) = Aₙ · matricize(X, n) · (… ⊗ Aₘ ⊗ …)ᵀ`
//! with the Kronecker factors listed from the highest mode down.
//!
//! Mode indices are zero-based throughout the crate.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense real matrix used for factors, unfoldings and membership matrices.
pub type Matrix = DMatrix<f64>;

/// An N-order dense tensor with an explicit shape and row-major data.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::InvalidShape(shape.to_vec()));
    }
    Ok(shape.iter().product())
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = check_shape(&shape)?;
        if data.len() != len {
            return Err(Error::DimensionMismatch {
                op: "DenseTensor::new",
                expected: len,
                got: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = check_shape(&shape)?;
        Ok(Self {
            shape,
            data: vec![0.0; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in storage order.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = check_shape(&shape)?;
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            increment(&mut idx, &shape);
        }
        Ok(Self { shape, data })
    }

    /// Wraps a matrix as an order-2 tensor of shape `rows × cols`.
    pub fn from_matrix(m: &Matrix) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self {
            shape: vec![r, c],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::InvalidMode {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// The n-mode product `X ×ₙ U`: `Y[.., j, ..] = Σᵢ U[j, i] · X[.., i, ..]`.
    ///
    /// `u` must have as many columns as the extent of `mode`; the result has
    /// `u.nrows()` in its place.
    pub fn mode_n_product(&self, u: &Matrix, mode: usize) -> Result<DenseTensor> {
        self.check_mode(mode)?;
        let extent = self.shape[mode];
        if u.ncols() != extent {
            return Err(Error::DimensionMismatch {
                op: "mode_n_product",
                expected: extent,
                got: u.ncols(),
            });
        }
        let outer: usize = self.shape[..mode].iter().product();
        let inner: usize = self.shape[mode + 1..].iter().product();
        let rows = u.nrows();
        let mut shape = self.shape.clone();
        shape[mode] = rows;
        check_shape(&shape)?;
        let mut data = vec![0.0; outer * rows * inner];
        for p in 0..outer {
            let src = &self.data[p * extent * inner..(p + 1) * extent * inner];
            let dst = &mut data[p * rows * inner..(p + 1) * rows * inner];
            for j in 0..rows {
                let out = &mut dst[j * inner..(j + 1) * inner];
                for i in 0..extent {
                    let w = u[(j, i)];
                    if w == 0.0 {
                        continue;
                    }
                    let row = &src[i * inner..(i + 1) * inner];
                    for (o, &x) in out.iter_mut().zip(row) {
                        *o += w * x;
                    }
                }
            }
        }
        Ok(DenseTensor { shape, data })
    }

    /// Applies several mode products; modes must be distinct.
    pub fn multi_mode_project(&self, factors: &[(usize, &Matrix)]) -> Result<DenseTensor> {
        let mut seen = vec![false; self.order()];
        for &(mode, _) in factors {
            self.check_mode(mode)?;
            if seen[mode] {
                return Err(Error::InvalidConfig(format!(
                    "mode {mode} appears twice in multi_mode_project"
                )));
            }
            seen[mode] = true;
        }
        let mut out = self.clone();
        for &(mode, u) in factors {
            out = out.mode_n_product(u, mode)?;
        }
        Ok(out)
    }

    /// Mode-`mode` unfolding: an `Iₙ × ∏_{m≠n} Iₘ` matrix, lowest remaining mode fastest.
    pub fn matricize(&self, mode: usize) -> Result<Matrix> {
        self.check_mode(mode)?;
        let rows = self.shape[mode];
        let cols = self.len() / rows;
        let strides = unfolding_strides(&self.shape, mode);
        let mut m = Matrix::zeros(rows, cols);
        let mut idx = vec![0usize; self.order()];
        for &x in &self.data {
            let col: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
            m[(idx[mode], col)] = x;
            increment(&mut idx, &self.shape);
        }
        Ok(m)
    }

    /// Inverse of [`DenseTensor::matricize`].
    pub fn fold(m: &Matrix, mode: usize, shape: &[usize]) -> Result<DenseTensor> {
        let len = check_shape(shape)?;
        if mode >= shape.len() {
            return Err(Error::InvalidMode {
                mode,
                order: shape.len(),
            });
        }
        if m.nrows() != shape[mode] || m.nrows() * m.ncols() != len {
            return Err(Error::ShapeMismatch {
                op: "fold",
                left: vec![m.nrows(), m.ncols()],
                right: shape.to_vec(),
            });
        }
        let strides = unfolding_strides(shape, mode);
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            let col: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
            data.push(m[(idx[mode], col)]);
            increment(&mut idx, shape);
        }
        Ok(DenseTensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Extracts slice `l` along the last mode as an order-(N−1) tensor.
    ///
    /// For an order-1 tensor the slice is a 1-element tensor.
    pub fn last_mode_slice(&self, l: usize) -> Result<DenseTensor> {
        let n = self.order();
        let m = self.shape[n - 1];
        if l >= m {
            return Err(Error::DimensionMismatch {
                op: "last_mode_slice",
                expected: m,
                got: l,
            });
        }
        let shape = if n == 1 {
            vec![1]
        } else {
            self.shape[..n - 1].to_vec()
        };
        let data = self.data.iter().skip(l).step_by(m).copied().collect();
        Ok(DenseTensor { shape, data })
    }

    /// Frobenius norm.
    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Sum of element-wise products; shapes must agree exactly.
    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op: "inner",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// Element-wise difference `self − other`.
    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op: "sub",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, c: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }
}

/// Stacks equally shaped tensors along a new trailing mode.
pub fn stack_last_mode(slices: &[DenseTensor]) -> Result<DenseTensor> {
    let first = slices.first().ok_or(Error::Empty("stack_last_mode"))?;
    for s in &slices[1..] {
        if s.shape != first.shape {
            return Err(Error::ShapeMismatch {
                op: "stack_last_mode",
                left: first.shape.clone(),
                right: s.shape.clone(),
            });
        }
    }
    let m = slices.len();
    let per = first.len();
    let mut data = vec![0.0; per * m];
    for (l, s) in slices.iter().enumerate() {
        for (p, &x) in s.data.iter().enumerate() {
            data[p * m + l] = x;
        }
    }
    let mut shape = first.shape.clone();
    shape.push(m);
    Ok(DenseTensor { shape, data })
}

/// Kronecker product: block `(i, j)` of the result is `a[(i, j)] · b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

fn increment(idx: &mut [usize], shape: &[usize]) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < shape[k] {
            return;
        }
        idx[k] = 0;
    }
}

fn unfolding_strides(shape: &[usize], mode: usize) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut s = 1;
    for (k, &d) in shape.iter().enumerate() {
        if k != mode {
            strides[k] = s;
            s *= d;
        }
    }
    strides
}
