//! Brute-force oracles shared by unit tests. Deliberately naive.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::{ComplexMatrix, C64};

pub fn random_matrix(n: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    ComplexMatrix::from_vec(n, n, data).unwrap()
}

pub fn to_nalgebra(m: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let eig = SymmetricEigen::new(to_nalgebra(m));
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Integrates `v' = A v` with fixed-step classical RK4.
pub fn rk4_linear(a: &ComplexMatrix, v0: &[C64], t: f64, steps: usize) -> Vec<C64> {
    let h = t / steps as f64;
    let mut v = v0.to_vec();
    let add = |x: &[C64], k: &[C64], s: f64| -> Vec<C64> {
        x.iter().zip(k).map(|(a, b)| a + b * s).collect()
    };
    for _ in 0..steps {
        let k1 = a.matvec(&v);
        let k2 = a.matvec(&add(&v, &k1, h / 2.0));
        let k3 = a.matvec(&add(&v, &k2, h / 2.0));
        let k4 = a.matvec(&add(&v, &k3, h));
        for i in 0..v.len() {
            v[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
    }
    v
}

/// Matrix exponential via scaled Taylor series and repeated squaring.
pub fn expm_dense(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.rows();
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0;
    while norm1 / f64::powi(2.0, s) > 0.25 {
        s += 1;
    }
    let scaled = a.scale_real(f64::powi(2.0, -s));
    let mut result = ComplexMatrix::identity(n);
    let mut term = ComplexMatrix::identity(n);
    for k in 1..=24 {
        term = (&term * &scaled).scale_real(1.0 / k as f64);
        result = &result + &term;
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}
