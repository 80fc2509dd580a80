use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Dense { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Build from row-major values. Rejects wrong lengths and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix construction".into()));
        }
        Ok(Dense { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn row_vector(v: &[f64]) -> Result<Self> {
        Self::from_vec(1, v.len(), v.to_vec())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
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

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self · wᵀ` where `self` is `n×k` and `w` is `m×k`; result `n×m`.
    pub fn matmul_t(&self, w: &Dense) -> Dense {
        debug_assert_eq!(self.cols, w.cols);
        let mut out = Dense::zeros(self.rows, w.rows);
        for i in 0..self.rows {
            let x = self.row(i);
            let o = out.row_mut(i);
            for (j, oj) in o.iter_mut().enumerate() {
                *oj = dot(x, w.row(j));
            }
        }
        out
    }

    /// `self · w` where `self` is `n×m` and `w` is `m×k`; result `n×k`.
    pub fn matmul(&self, w: &Dense) -> Dense {
        debug_assert_eq!(self.cols, w.rows);
        let mut out = Dense::zeros(self.rows, w.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let o = out.row_mut(i);
            for (j, &aij) in a.iter().enumerate() {
                if aij != 0.0 {
                    axpy(aij, w.row(j), o);
                }
            }
        }
        out
    }

    /// `selfᵀ · x` where `self` is `n×m` and `x` is `n×k`; result `m×k`.
    pub fn t_matmul(&self, x: &Dense) -> Dense {
        debug_assert_eq!(self.rows, x.rows);
        let mut out = Dense::zeros(self.cols, x.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let xi = x.row(i);
            for (j, &aij) in a.iter().enumerate() {
                if aij != 0.0 {
                    axpy(aij, xi, out.row_mut(j));
                }
            }
        }
        out
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hconcat(&self, other: &Dense) -> Result<Dense> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!(
                "hconcat of {} and {} rows",
                self.rows, other.rows
            )));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Dense { rows: self.rows, cols, data })
    }

    /// Split columns at `at` into `[.., at)` and `[at, ..)`.
    pub fn split_cols(&self, at: usize) -> (Dense, Dense) {
        let mut left = Dense::zeros(self.rows, at);
        let mut right = Dense::zeros(self.rows, self.cols - at);
        for i in 0..self.rows {
            let r = self.row(i);
            left.row_mut(i).copy_from_slice(&r[..at]);
            right.row_mut(i).copy_from_slice(&r[at..]);
        }
        (left, right)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Dense {
        let mut out = Dense::zeros(idx.len(), self.cols);
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        out
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (a, b) in s.iter_mut().zip(self.row(i)) {
                *a += b;
            }
        }
        s
    }

    pub fn add_assign(&mut self, other: &Dense) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
