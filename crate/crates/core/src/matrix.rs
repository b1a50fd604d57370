//! Dense complex matrices and a compressed-row companion used for fast products.
//!
//! Storage is row-major. Only the handful of operations needed to build spin
//! operators and superoperators are provided; anything heavier belongs in tests.

use num_complex::Complex64;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row slices. Panics on ragged input.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row.iter().map(|&x| C64::new(x, 0.0)));
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        out.add_kron(ONE, self, other);
        out
    }

    /// Accumulates `coeff · (a ⊗ b)` into `self`, skipping structural zeros of `a` and `b`.
    pub fn add_kron(&mut self, coeff: C64, a: &Self, b: &Self) {
        assert_eq!(self.rows, a.rows * b.rows);
        assert_eq!(self.cols, a.cols * b.cols);
        let b_nz: Vec<(usize, usize, C64)> = b.nonzeros().collect();
        for i1 in 0..a.rows {
            for j1 in 0..a.cols {
                let av = a[(i1, j1)];
                if av == ZERO {
                    continue;
                }
                let f = coeff * av;
                for &(i2, j2, bv) in &b_nz {
                    let r = i1 * b.rows + i2;
                    let c = j1 * b.cols + j2;
                    self[(r, c)] += f * bv;
                }
            }
        }
    }

    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.data.iter().enumerate().filter_map(move |(k, &v)| {
            (v != ZERO).then_some((k / self.cols, k % self.cols, v))
        })
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `M - M^H`; infinite for non-square input.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let src = rhs.row(k);
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Compressed sparse row storage; built from a dense matrix and used only for products.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    pub fn from_dense(m: &ComplexMatrix) -> Self {
        let mut row_ptr = Vec::with_capacity(m.rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..m.rows {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != ZERO {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: m.rows,
            cols: m.cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            *yi = self.col_idx[lo..hi]
                .iter()
                .zip(&self.values[lo..hi])
                .map(|(&j, v)| v * x[j])
                .sum();
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k])] = self.values[k];
            }
        }
        m
    }
}

/// Conjugate-linear-in-the-first-argument inner product `⟨x|y⟩`.
pub fn inner(x: &[C64], y: &[C64]) -> C64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `y += a · x`
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

impl ComplexMatrix {
    /// Largest absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Matrix exponential by scaling and squaring with a Taylor series summed
    /// to machine precision.
    pub fn expm(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch("expm needs a square matrix".into()));
        }
        let nrm = self.norm_one();
        if !nrm.is_finite() {
            return Err(Error::NonFinite { context: "matrix exponential", step: 0 });
        }
        let squarings = if nrm > 0.5 { (nrm / 0.5).log2().ceil() as i32 } else { 0 };
        let scaled = self.scale_real(0.5f64.powi(squarings));
        let n = self.rows;
        let mut result = Self::identity(n);
        let mut term = Self::identity(n);
        for k in 1..=40 {
            term = (&term * &scaled).scale_real(1.0 / k as f64);
            result = &result + &term;
            if term.max_abs() <= f64::EPSILON * 1e-3 {
                break;
            }
        }
        for _ in 0..squarings {
            result = &result * &result;
        }
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_matches_block_layout() {
        let a = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let k = a.kron(&b);
        assert_eq!(k.rows(), 4);
        // block (0,1) is 2·b
        assert_eq!(k[(0, 3)], C64::new(2.0, 0.0));
        assert_eq!(k[(1, 2)], C64::new(2.0, 0.0));
        // block (1,0) is 3·b
        assert_eq!(k[(2, 1)], C64::new(3.0, 0.0));
        assert_eq!(k[(3, 3)], ZERO);
    }

    #[test]
    fn csr_agrees_with_dense() {
        let m = ComplexMatrix::from_rows(&[
            &[C64::new(1.0, 1.0), ZERO, C64::new(0.0, -2.0)],
            &[ZERO, ZERO, ZERO],
            &[C64::new(3.0, 0.0), C64::new(0.5, 0.5), ZERO],
        ]);
        let csr = CsrMatrix::from_dense(&m);
        assert_eq!(csr.nnz(), 4);
        assert_eq!(csr.to_dense(), m);
        let x = vec![C64::new(1.0, 2.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0)];
        let dense = m.matvec(&x);
        let sparse = csr.matvec(&x);
        for (a, b) in dense.iter().zip(&sparse) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn adjoint_and_hermiticity() {
        let m = ComplexMatrix::from_rows(&[&[ONE, I], &[-I, C64::new(2.0, 0.0)]]);
        assert_eq!(m.hermiticity_defect(), 0.0);
        let n = ComplexMatrix::from_rows(&[&[ONE, I], &[I, ONE]]);
        assert!((n.hermiticity_defect() - 2.0).abs() < 1e-15);
        assert_eq!(n.adjoint().adjoint(), n);
    }

    #[test]
    fn expm_of_diagonal_and_rotation() {
        let d = ComplexMatrix::from_rows(&[&[C64::new(0.3, 1.0), ZERO], &[ZERO, C64::new(-2.0, 0.0)]]);
        let e = d.expm().unwrap();
        assert!((e[(0, 0)] - C64::new(0.3, 1.0).exp()).norm() < 1e-15);
        assert!((e[(1, 1)] - C64::new(-2.0, 0.0).exp()).norm() < 1e-15);
        // exp(θ [[0,1],[-1,0]]) is a rotation by θ
        let theta = 7.3;
        let g = ComplexMatrix::from_real_rows(&[&[0.0, theta], &[-theta, 0.0]]);
        let r = g.expm().unwrap();
        assert!((r[(0, 0)].re - theta.cos()).abs() < 1e-13);
        assert!((r[(0, 1)].re - theta.sin()).abs() < 1e-13);
    }

    #[test]
    fn expm_matches_naive_oracle() {
        let a = crate::testutil::random_matrix(6, 3).scale_real(1.7);
        let fast = a.expm().unwrap();
        let slow = crate::testutil::expm_dense(&a);
        assert!(fast.max_abs_diff(&slow) < 1e-12 * slow.max_abs());
    }

    #[test]
    fn from_vec_rejects_wrong_length() {
        assert!(ComplexMatrix::from_vec(2, 2, vec![ZERO; 3]).is_err());
    }
}
