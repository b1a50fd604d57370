//! Vectorized operators and the superoperators that evolve them.
//!
//! Operators are vectorized by stacking columns, `vec(X)[i + j·d] = X[i, j]`,
//! so that `vec(A X B) = (Bᵀ ⊗ A) vec(X)`. The evolution convention is
//! `∂ₜ vec(O) = i 𝓛 vec(O)`, which for a closed system is the Heisenberg
//! equation `∂ₜ O = i [H, O]`.

use crate::error::{Error, Result};
use crate::matrix::{norm, ComplexMatrix, CsrMatrix, C64, I, ONE};

/// Largest supported chain: `d² = 4096`.
pub const MAX_SITES: usize = 6;

/// A vectorized operator of length `d²`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorVector(pub Vec<C64>);

impl OperatorVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Rescaled copy with unit Euclidean norm.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidArgument("cannot normalize a zero or non-finite vector".into()));
        }
        Ok(Self(self.0.iter().map(|z| z / n).collect()))
    }
}

pub fn vectorize(m: &ComplexMatrix) -> Result<OperatorVector> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "vectorize needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let d = m.rows();
    let mut v = Vec::with_capacity(d * d);
    for j in 0..d {
        for i in 0..d {
            v.push(m[(i, j)]);
        }
    }
    Ok(OperatorVector(v))
}

pub fn devectorize(v: &OperatorVector) -> Result<ComplexMatrix> {
    let d = perfect_sqrt(v.len()).ok_or_else(|| {
        Error::DimensionMismatch(format!("vector length {} is not a perfect square", v.len()))
    })?;
    let mut m = ComplexMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            m[(i, j)] = v.0[i + j * d];
        }
    }
    Ok(m)
}

fn perfect_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

/// The `(1/d, …, 1/d)` operator: the all-ones matrix scaled to unit Hilbert–Schmidt norm.
pub fn uniform_seed(d: usize) -> Result<OperatorVector> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("seed dimension must be at least 2, got {d}")));
    }
    let w = C64::new(1.0 / d as f64, 0.0);
    Ok(OperatorVector(vec![w; d * d]))
}

/// A `d² × d²` generator acting on vectorized operators.
///
/// The dense matrix is kept for validation and export; products go through
/// compressed-row copies of the matrix and of its adjoint.
#[derive(Debug, Clone)]
pub struct Superoperator {
    d: usize,
    matrix: ComplexMatrix,
    forward: CsrMatrix,
    adjoint: CsrMatrix,
    hermitian: bool,
    commutator: bool,
}

impl Superoperator {
    /// Wraps an arbitrary square matrix whose side is a perfect square.
    pub fn from_matrix(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch("superoperator must be square".into()));
        }
        let d = perfect_sqrt(matrix.rows()).ok_or_else(|| {
            Error::DimensionMismatch(format!("dimension {} is not a perfect square", matrix.rows()))
        })?;
        let hermitian = matrix.hermiticity_defect() < 1e-12 * matrix.max_abs().max(1.0);
        Ok(Self::assemble(d, matrix, hermitian, false))
    }

    fn assemble(d: usize, matrix: ComplexMatrix, hermitian: bool, commutator: bool) -> Self {
        let forward = CsrMatrix::from_dense(&matrix);
        let adjoint = CsrMatrix::from_dense(&matrix.adjoint());
        Self {
            d,
            matrix,
            forward,
            adjoint,
            hermitian,
            commutator,
        }
    }

    /// Side of the operators being acted on.
    pub fn operator_dim(&self) -> usize {
        self.d
    }

    /// `d²`.
    pub fn dim(&self) -> usize {
        self.d * self.d
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Upper bound on any Krylov dimension. A commutator `[H, •]` has at most
    /// `d² − d + 1` distinct eigenvalues (all `d` diagonal gaps are zero).
    pub fn krylov_bound(&self) -> usize {
        if self.commutator {
            self.dim() - self.d + 1
        } else {
            self.dim()
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.forward.matvec(x)
    }

    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        self.forward.matvec_into(x, y)
    }

    pub fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        self.adjoint.matvec(x)
    }

    pub fn nnz(&self) -> usize {
        self.forward.nnz()
    }
}

fn check_hamiltonian(h: &ComplexMatrix) -> Result<usize> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch("Hamiltonian must be square".into()));
    }
    let d = h.rows();
    if d > 1 << MAX_SITES {
        return Err(Error::TooLarge(format!(
            "operator dimension {d} exceeds the dense limit {} (N <= {MAX_SITES})",
            1 << MAX_SITES
        )));
    }
    let defect = h.hermiticity_defect();
    if defect > 1e-12 * h.max_abs().max(1.0) {
        return Err(Error::NotHermitian { deviation: defect });
    }
    Ok(d)
}

/// `𝓛_c = I ⊗ H − Hᵀ ⊗ I`, the vectorized commutator `[H, •]`.
pub fn build_liouvillian_closed(h: &ComplexMatrix) -> Result<Superoperator> {
    let d = check_hamiltonian(h)?;
    let mut m = ComplexMatrix::zeros(d * d, d * d);
    add_commutator(&mut m, h);
    Ok(Superoperator::assemble(d, m, true, true))
}

fn add_commutator(m: &mut ComplexMatrix, h: &ComplexMatrix) {
    let id = ComplexMatrix::identity(h.rows());
    m.add_kron(ONE, &id, h);
    m.add_kron(-ONE, &h.transpose(), &id);
}

/// `𝓛_o = (I⊗H − Hᵀ⊗I) + (i/2) Σ_k [I⊗L_k†L_k + L_kᵀL_k*⊗I − 2 L_kᵀ⊗L_k†]`.
pub fn build_lindbladian(h: &ComplexMatrix, jumps: &[ComplexMatrix]) -> Result<Superoperator> {
    let d = check_hamiltonian(h)?;
    for (k, l) in jumps.iter().enumerate() {
        if l.rows() != d || l.cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "jump operator {k} is {}x{}, Hamiltonian is {d}x{d}",
                l.rows(),
                l.cols()
            )));
        }
    }
    let mut m = ComplexMatrix::zeros(d * d, d * d);
    add_commutator(&mut m, h);
    let id = ComplexMatrix::identity(d);
    let half_i = I * 0.5;
    for l in jumps {
        let ldag = l.adjoint();
        let lt = l.transpose();
        m.add_kron(half_i, &id, &(&ldag * l));
        m.add_kron(half_i, &(&lt * &l.conj()), &id);
        m.add_kron(-I, &lt, &ldag);
    }
    Ok(Superoperator::assemble(d, m, jumps.is_empty(), jumps.is_empty()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{build_jump_operators, build_tfim, pauli_matrix, ModelSpec, Pauli};
    use crate::testutil::{expm_dense, hermitian_eigenvalues, random_matrix, rk4_linear};

    #[test]
    fn column_stacking() {
        let m = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let v = vectorize(&m).unwrap();
        let re: Vec<f64> = v.0.iter().map(|z| z.re).collect();
        assert_eq!(re, vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(devectorize(&v).unwrap(), m);
    }

    #[test]
    fn vectorize_rejects_rectangular() {
        assert!(vectorize(&ComplexMatrix::zeros(2, 3)).is_err());
        assert!(devectorize(&OperatorVector(vec![ONE; 5])).is_err());
    }

    #[test]
    fn commutator_as_superoperator_product() {
        let a = random_matrix(4, 11);
        let h = &a + &a.adjoint();
        let x = random_matrix(4, 12);
        let lc = build_liouvillian_closed(&h).unwrap();
        let lhs = vectorize(&(&(&h * &x) - &(&x * &h))).unwrap();
        let rhs = lc.apply(vectorize(&x).unwrap().as_slice());
        for (p, q) in lhs.0.iter().zip(&rhs) {
            assert!((p - q).norm() < 1e-12);
        }
        // the same identity for a general (non-Hermitian) sandwich
        let b = random_matrix(4, 13);
        let kron = b.transpose().kron(&a);
        let direct = vectorize(&(&(&a * &x) * &b)).unwrap();
        let via = kron.matvec(vectorize(&x).unwrap().as_slice());
        for (p, q) in direct.0.iter().zip(&via) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn liouvillian_of_pauli_z() {
        let lc = build_liouvillian_closed(&pauli_matrix(Pauli::Z)).unwrap();
        let expected = [0.0, -2.0, 2.0, 0.0];
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { expected[i] } else { 0.0 };
                assert_eq!(lc.matrix()[(i, j)], C64::new(e, 0.0));
            }
        }
        // dense Kronecker oracle
        let id = ComplexMatrix::identity(2);
        let z = pauli_matrix(Pauli::Z);
        let oracle = &id.kron(&z) - &z.transpose().kron(&id);
        assert_eq!(lc.matrix().max_abs_diff(&oracle), 0.0);
    }

    #[test]
    fn identity_is_annihilated() {
        let h = build_tfim(&ModelSpec::new(3, -1.05, 0.5)).unwrap();
        let lc = build_liouvillian_closed(&h).unwrap();
        let v = lc.apply(vectorize(&ComplexMatrix::identity(8)).unwrap().as_slice());
        assert!(norm(&v) < 1e-14);
    }

    #[test]
    fn closed_spectrum_is_energy_differences() {
        let h = build_tfim(&ModelSpec::new(2, -1.05, 0.5)).unwrap();
        let energies = hermitian_eigenvalues(&h);
        let mut diffs: Vec<f64> = energies
            .iter()
            .flat_map(|ei| energies.iter().map(move |ej| ei - ej))
            .collect();
        diffs.sort_by(f64::total_cmp);
        let lc = build_liouvillian_closed(&h).unwrap();
        assert!(lc.is_hermitian());
        let spectrum = hermitian_eigenvalues(lc.matrix());
        for (a, b) in spectrum.iter().zip(&diffs) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn non_hermitian_hamiltonian_rejected() {
        let h = pauli_matrix(Pauli::Plus);
        assert!(matches!(
            build_liouvillian_closed(&h),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn oversized_chain_rejected() {
        let h = ComplexMatrix::identity(128);
        assert!(matches!(build_liouvillian_closed(&h), Err(Error::TooLarge(_))));
    }

    #[test]
    fn jump_dimension_mismatch() {
        let h = pauli_matrix(Pauli::Z);
        let l = ComplexMatrix::identity(4);
        assert!(matches!(
            build_lindbladian(&h, &[l]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn no_jumps_reduces_to_closed() {
        let h = build_tfim(&ModelSpec::new(2, -1.05, 0.5)).unwrap();
        let lo = build_lindbladian(&h, &[]).unwrap();
        let lc = build_liouvillian_closed(&h).unwrap();
        assert_eq!(lo.matrix().max_abs_diff(lc.matrix()), 0.0);
        assert!(lo.is_hermitian());
    }

    #[test]
    fn single_qubit_dephasing_decays_x_at_twice_gamma() {
        let gamma: f64 = 0.3;
        let l: ComplexMatrix = pauli_matrix(Pauli::Z).scale_real(gamma.sqrt());
        let lo = build_lindbladian(&ComplexMatrix::zeros(2, 2), &[l]).unwrap();
        let gen = lo.matrix().scale(I);
        let v0 = vectorize(&pauli_matrix(Pauli::X)).unwrap();
        let t = 1.7;
        let v = rk4_linear(&gen, v0.as_slice(), t, 4000);
        let factor = (-2.0 * gamma * t).exp();
        for (a, b) in v.iter().zip(v0.as_slice()) {
            assert!((a - b * factor).norm() < 1e-12);
        }
    }

    #[test]
    fn amplitude_damping_dual_is_trace_preserving() {
        let (g, h, alpha) = (0.8, 0.3, 0.2);
        let spec = ModelSpec::new(1, g, h)
            .with_dissipation(alpha, 0.0)
            .with_sites(vec![1], vec![]);
        let ham = build_tfim(&spec).unwrap();
        let lminus = pauli_matrix(Pauli::Minus).scale_real(alpha.sqrt());
        let lo = build_lindbladian(&ham, &[lminus]).unwrap();
        let gen = lo.matrix().scale(I);
        let id = vectorize(&ComplexMatrix::identity(2)).unwrap();
        // Heisenberg picture: the identity observable is stationary.
        assert!(norm(&gen.matvec(id.as_slice())) < 1e-15);
        // Schrödinger dual: e^{(i𝓛)† t} keeps tr ρ.
        let rho = ComplexMatrix::from_real_rows(&[&[0.25, 0.1], &[0.1, 0.75]]);
        let prop = expm_dense(&gen.adjoint().scale_real(2.5));
        let rho_t = devectorize(&OperatorVector(prop.matvec(vectorize(&rho).unwrap().as_slice()))).unwrap();
        assert!((rho_t.trace() - ONE).norm() < 1e-12);
        assert!(rho_t.hermiticity_defect() < 1e-12);
        // population leaks to the ground state
        assert!((rho_t[(1, 1)] - rho[(1, 1)]).norm() > 1e-3);
    }

    #[test]
    fn closed_flow_preserves_norm() {
        for n in 1..=3 {
            let h = build_tfim(&ModelSpec::new(n, -1.05, 0.5)).unwrap();
            let lc = build_liouvillian_closed(&h).unwrap();
            let gen = lc.matrix().scale(I);
            let seed = uniform_seed(1 << n).unwrap();
            let v = rk4_linear(&gen, seed.as_slice(), 2.0, 4000);
            assert!((norm(&v) - 1.0).abs() < 1e-10, "N = {n}");
        }
    }

    #[test]
    fn dissipator_is_linear_in_strengths() {
        let base = ModelSpec::new(3, -1.05, 0.5);
        let h = build_tfim(&base).unwrap();
        let lc = build_liouvillian_closed(&h).unwrap();
        let one = build_lindbladian(&h, &build_jump_operators(&base.clone().with_dissipation(0.01, 0.02)).unwrap()).unwrap();
        let two = build_lindbladian(&h, &build_jump_operators(&base.with_dissipation(0.02, 0.04)).unwrap()).unwrap();
        let d1 = one.matrix() - lc.matrix();
        let d2 = two.matrix() - lc.matrix();
        assert!(d2.max_abs_diff(&d1.scale_real(2.0)) < 1e-15);
        assert!(!one.is_hermitian());
    }

    #[test]
    fn anticommutator_terms_are_positive_semidefinite() {
        let spec = ModelSpec::new(2, -1.05, 0.5).with_dissipation(0.3, 0.2);
        let id = ComplexMatrix::identity(4);
        for l in build_jump_operators(&spec).unwrap() {
            let ldl = &l.adjoint() * &l;
            let term = &id.kron(&ldl) + &(&l.transpose() * &l.conj()).kron(&id);
            assert!(term.hermiticity_defect() < 1e-15);
            let min = hermitian_eigenvalues(&term).into_iter().fold(f64::INFINITY, f64::min);
            assert!(min > -1e-12);
        }
    }

    #[test]
    fn uniform_seed_properties() {
        let s = uniform_seed(2).unwrap();
        assert_eq!(s.0, vec![C64::new(0.5, 0.0); 4]);
        assert_eq!(s.norm(), 1.0);
        let s = uniform_seed(4).unwrap();
        assert_eq!(s.len(), 16);
        assert!((s.norm() - 1.0).abs() < 1e-15);
        let m = devectorize(&s).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m[(i, j)], C64::new(0.25, 0.0));
            }
        }
        assert!(uniform_seed(1).is_err());
    }

    #[test]
    fn sparse_products_match_dense() {
        let spec = ModelSpec::new(3, -1.05, 0.5).with_dissipation(0.01, 0.01);
        let h = build_tfim(&spec).unwrap();
        let lo = build_lindbladian(&h, &build_jump_operators(&spec).unwrap()).unwrap();
        let x = vectorize(&random_matrix(8, 5)).unwrap();
        let dense = lo.matrix().matvec(x.as_slice());
        let sparse = lo.apply(x.as_slice());
        let dense_adj = lo.matrix().adjoint().matvec(x.as_slice());
        let sparse_adj = lo.apply_adjoint(x.as_slice());
        for i in 0..x.len() {
            assert!((dense[i] - sparse[i]).norm() < 1e-13);
            assert!((dense_adj[i] - sparse_adj[i]).norm() < 1e-13);
        }
        assert!(lo.nnz() < lo.dim() * lo.dim() / 4);
    }
}
