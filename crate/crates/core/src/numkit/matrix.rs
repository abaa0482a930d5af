use crate::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim("Matrix::from_vec", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::dim("Matrix::from_rows", cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dim("Matrix::matvec", self.cols, x.len()));
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    /// Rows selected by index, in the given order.
    pub fn gather_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), self.cols);
        for (o, &i) in idx.iter().enumerate() {
            out.row_mut(o).copy_from_slice(self.row(i));
        }
        out
    }
}

/// `Wx + b`.
pub fn affine_forward(x: &[f64], w: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != w.rows() {
        return Err(Error::dim("affine_forward bias", w.rows(), b.len()));
    }
    let mut y = w.matvec(x)?;
    for (yi, bi) in y.iter_mut().zip(b) {
        *yi += bi;
    }
    Ok(y)
}

/// Four-accumulator dot product; the fixed reduction order keeps results
/// reproducible while letting the compiler vectorize.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Strided view used by [`gemm`].
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a> View<'a> {
    pub fn of(m: &'a Matrix) -> Self {
        Self {
            data: &m.data,
            rows: m.rows,
            cols: m.cols,
            rs: m.cols,
            cs: 1,
        }
    }

    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }

    fn max_offset(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            0
        } else {
            (self.rows - 1) * self.rs + (self.cols - 1) * self.cs
        }
    }
}

/// `c = alpha · a · b + beta · c` with `c` row-major.
pub(crate) fn gemm(alpha: f64, a: View<'_>, b: View<'_>, beta: f64, c: &mut Matrix) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension");
    assert_eq!(c.rows, a.rows, "gemm output rows");
    assert_eq!(c.cols, b.cols, "gemm output cols");
    if c.data.is_empty() {
        return;
    }
    if a.cols == 0 {
        for v in &mut c.data {
            *v *= beta;
        }
        return;
    }
    assert!(a.max_offset() < a.data.len(), "gemm lhs view out of bounds");
    assert!(b.max_offset() < b.data.len(), "gemm rhs view out of bounds");
    // SAFETY: both views were bounds-checked above and `c` is an owned,
    // exclusively borrowed row-major buffer of exactly rows × cols.
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_identity() {
        let y = affine_forward(&[3.0, -1.0], &Matrix::identity(2), &[0.0, 0.0]).unwrap();
        assert_eq!(y, vec![3.0, -1.0]);
    }

    #[test]
    fn affine_hand_multiply() {
        let w = Matrix::from_vec(2, 2, vec![1.0, 2.0, 0.0, 1.0]).unwrap();
        let y = affine_forward(&[1.0, 1.0], &w, &[1.0, 1.0]).unwrap();
        assert_eq!(y, vec![4.0, 2.0]);
    }

    #[test]
    fn affine_zero_weights() {
        let w = Matrix::zeros(1, 3);
        let y = affine_forward(&[7.0, -2.0, 1e9], &w, &[5.0]).unwrap();
        assert_eq!(y, vec![5.0]);
    }

    #[test]
    fn affine_dimension_mismatch() {
        let w = Matrix::zeros(2, 3);
        assert!(matches!(
            affine_forward(&[1.0, 2.0], &w, &[0.0, 0.0]),
            Err(Error::Dimension { .. })
        ));
        assert!(affine_forward(&[1.0, 2.0, 3.0], &w, &[0.0]).is_err());
    }

    #[test]
    fn gemm_matches_naive() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Matrix::from_vec(2, 3, vec![1.0, 0.0, -1.0, 2.0, 1.0, 0.5]).unwrap();
        // a · bᵀ
        let mut c = Matrix::zeros(2, 2);
        gemm(1.0, View::of(&a), View::of(&b).t(), 0.0, &mut c);
        assert_eq!(c.as_slice(), &[-2.0, 5.5, -2.0, 16.0]);
    }
}
