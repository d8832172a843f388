//! Small numerical helpers shared by the modules: complex matrix aliases,
//! a compressed sparse row operator, and a few spectral utilities.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Accumulates matrix entries; duplicates are summed in insertion-independent
/// (sorted) order so that the finished operator is reproducible.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    rows: usize,
    cols: usize,
    entries: BTreeMap<(usize, usize), C64>,
}

impl TripletBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: C64) {
        debug_assert!(row < self.rows && col < self.cols);
        *self.entries.entry((row, col)).or_insert(ZERO) += value;
    }

    pub fn build(self) -> SparseOp {
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        for (&(r, col), &v) in &self.entries {
            if v == ZERO {
                continue;
            }
            row_ptr[r + 1] += 1;
            col_idx.push(col);
            values.push(v);
        }
        for r in 0..self.rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseOp {
            rows: self.rows,
            cols: self.cols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Compressed sparse row operator with complex entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseOp {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        TripletBuilder::new(rows, cols).build()
    }

    pub fn identity(dim: usize) -> Self {
        let mut b = TripletBuilder::new(dim, dim);
        for i in 0..dim {
            b.push(i, i, ONE);
        }
        b.build()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == ZERO)
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols, "sparse apply: dimension mismatch");
        (0..self.rows)
            .map(|r| {
                let mut acc = ZERO;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.values[k] * v[self.col_idx[k]];
                }
                acc
            })
            .collect()
    }

    pub fn adjoint(&self) -> SparseOp {
        let mut b = TripletBuilder::new(self.cols, self.rows);
        for (r, col, v) in self.iter() {
            b.push(col, r, v.conj());
        }
        b.build()
    }

    pub fn scaled(&self, s: C64) -> SparseOp {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &SparseOp) -> SparseOp {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut b = TripletBuilder::new(self.rows, self.cols);
        for (r, col, v) in self.iter().chain(other.iter()) {
            b.push(r, col, v);
        }
        b.build()
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.rows, self.cols);
        for (r, col, v) in self.iter() {
            m[(r, col)] += v;
        }
        m
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Eigenvalues of a hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// `max |a_ij - b_ij|`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Pauli matrices as 2×2 dense matrices.
pub mod pauli {
    use super::*;
    use nalgebra::Matrix2;

    pub type M2 = Matrix2<C64>;

    pub fn id() -> M2 {
        M2::identity()
    }
    pub fn x() -> M2 {
        M2::new(ZERO, ONE, ONE, ZERO)
    }
    pub fn y() -> M2 {
        M2::new(ZERO, -I, I, ZERO)
    }
    pub fn z() -> M2 {
        M2::new(ONE, ZERO, ZERO, -ONE)
    }
}

/// Least-squares fit `y ≈ slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_sums_duplicates_and_drops_zeros() {
        let mut b = TripletBuilder::new(2, 2);
        b.push(0, 1, c(1.0, 0.0));
        b.push(0, 1, c(2.0, 1.0));
        b.push(1, 0, c(1.0, 0.0));
        b.push(1, 0, c(-1.0, 0.0));
        let op = b.build();
        assert_eq!(op.nnz(), 1);
        assert_eq!(op.apply(&[ZERO, ONE]), vec![c(3.0, 1.0), ZERO]);
    }

    #[test]
    fn adjoint_matches_dense() {
        let mut b = TripletBuilder::new(3, 2);
        b.push(2, 1, c(0.5, -2.0));
        b.push(0, 0, c(1.0, 1.0));
        let op = b.build();
        assert_eq!(op.adjoint().to_dense(), op.to_dense().adjoint());
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let (s, b) = linear_fit(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-14 && (b + 1.0).abs() < 1e-14);
    }
}
