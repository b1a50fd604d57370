//! Two-sided (bi-orthogonal) Lanczos tridiagonalization and its Hermitian special case.
//!
//! For a generator `𝓛` and a pair of starting vectors with `⟨q₀|p₀⟩ = 1` the
//! recurrences build bases with `⟨q_m|p_n⟩ = δ_mn` in which
//!
//! ```text
//! 𝓛 p_n = a_n p_n + c_{n+1} p_{n+1} + b_n p_{n-1}
//! 𝓛†q_n = a_n* q_n + b_{n+1}* q_{n+1} + c_n* q_{n-1}
//! ```
//!
//! so `Q†𝓛P` is tridiagonal with `a` on the diagonal, `b` above and `c` below.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{OperatorVector, Superoperator};
use crate::matrix::{inner, norm, ComplexMatrix, C64, ZERO};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiLanczosConfig {
    /// Maximum Krylov dimension; `None` means the full space.
    pub max_iter: Option<usize>,
    /// Termination threshold relative to the largest `c_j` seen so far.
    pub breakdown_tol: f64,
    pub reorth_passes: usize,
    pub store_bases: bool,
}

impl Default for BiLanczosConfig {
    fn default() -> Self {
        Self {
            max_iter: None,
            breakdown_tol: 1e-10,
            reorth_passes: 2,
            store_bases: true,
        }
    }
}

impl BiLanczosConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.breakdown_tol >= f64::EPSILON) || !self.breakdown_tol.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "breakdown_tol must be a finite number >= {:e}, got {}",
                f64::EPSILON,
                self.breakdown_tol
            )));
        }
        if self.max_iter == Some(0) {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The residual vanished: the Krylov space is exhausted.
    Exhausted,
    /// Stopped at `max_iter` with a non-negligible residual.
    MaxIter,
    /// `⟨r|s⟩ ≈ 0` although neither residual is small.
    SeriousBreakdown,
}

/// Lanczos coefficients and, optionally, the bases that produced them.
#[derive(Debug, Clone)]
pub struct TridiagonalData {
    /// Diagonal, length `K`.
    pub a: Vec<C64>,
    /// Superdiagonal, `b[j-1] = b_j`, length `K − 1`.
    pub b: Vec<C64>,
    /// Subdiagonal, `c[j-1] = c_j`, length `K − 1`.
    pub c: Vec<C64>,
    pub p_basis: Option<Vec<Vec<C64>>>,
    pub q_basis: Option<Vec<Vec<C64>>>,
    /// `max |Q†P − I|`, when bases were kept.
    pub residual_biortho: Option<f64>,
    /// `max |Q†𝓛P − T|`, when bases were kept.
    pub residual_tridiag: Option<f64>,
    pub termination: Termination,
}

impl TridiagonalData {
    /// A chain given directly by its coefficients, with no bases.
    pub fn from_coefficients(a: Vec<C64>, b: Vec<C64>, c: Vec<C64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidArgument("a chain needs at least one site".into()));
        }
        if b.len() + 1 != a.len() || c.len() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient lengths a={}, b={}, c={} (expected K, K-1, K-1)",
                a.len(),
                b.len(),
                c.len()
            )));
        }
        let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
        if !(a.iter().all(finite) && b.iter().all(finite) && c.iter().all(finite)) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        Ok(Self {
            a,
            b,
            c,
            p_basis: None,
            q_basis: None,
            residual_biortho: None,
            residual_tridiag: None,
            termination: Termination::MaxIter,
        })
    }

    /// Krylov dimension.
    pub fn k(&self) -> usize {
        self.a.len()
    }

    /// `b₁`, or zero for a one-site chain.
    pub fn b1(&self) -> C64 {
        self.b.first().copied().unwrap_or(ZERO)
    }

    pub fn c1(&self) -> C64 {
        self.c.first().copied().unwrap_or(ZERO)
    }

    pub fn truncated(&self) -> bool {
        self.termination != Termination::Exhausted
    }

    pub fn has_bases(&self) -> bool {
        self.p_basis.is_some() && self.q_basis.is_some()
    }

    /// The first `k` sites of the chain (bases dropped).
    pub fn truncate(&self, k: usize) -> Result<Self> {
        let k = k.min(self.k());
        let mut t = Self::from_coefficients(
            self.a[..k].to_vec(),
            self.b[..k - 1].to_vec(),
            self.c[..k - 1].to_vec(),
        )?;
        t.termination = if k == self.k() { self.termination } else { Termination::MaxIter };
        Ok(t)
    }

    /// Dense `K × K` tridiagonal matrix `T`.
    pub fn matrix(&self) -> ComplexMatrix {
        let k = self.k();
        let mut t = ComplexMatrix::zeros(k, k);
        for n in 0..k {
            t[(n, n)] = self.a[n];
        }
        for n in 1..k {
            t[(n - 1, n)] = self.b[n - 1];
            t[(n, n - 1)] = self.c[n - 1];
        }
        t
    }
}

/// Subtracts from `v` its components along `right`, measured with `left`:
/// `v ← v − Σ_k right_k ⟨left_k|v⟩`.
fn project_out(v: &mut [C64], left: &[Vec<C64>], right: &[Vec<C64>]) {
    for (l, r) in left.iter().zip(right) {
        let coef = inner(l, v);
        if coef != ZERO {
            for (x, y) in v.iter_mut().zip(r) {
                *x -= coef * y;
            }
        }
    }
}

fn check_finite(values: &[C64], step: usize) -> Result<()> {
    if values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context: "bi-Lanczos recurrence", step })
    }
}

fn check_start(l: &Superoperator, v: &OperatorVector, name: &str) -> Result<()> {
    if v.len() != l.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{name} has length {}, superoperator acts on {}",
            v.len(),
            l.dim()
        )));
    }
    if !v.is_finite() {
        return Err(Error::InvalidArgument(format!("{name} has non-finite entries")));
    }
    Ok(())
}

/// Two-sided Lanczos with full reorthogonalization.
///
/// `q0` is rescaled so that `⟨q₀|p₀⟩ = 1`; starting pairs with a vanishing
/// overlap are rejected.
pub fn bilanczos(
    l: &Superoperator,
    p0: &OperatorVector,
    q0: &OperatorVector,
    cfg: &BiLanczosConfig,
) -> Result<TridiagonalData> {
    cfg.validate()?;
    check_start(l, p0, "p0")?;
    check_start(l, q0, "q0")?;
    let overlap = inner(&q0.0, &p0.0);
    if overlap.norm() < 1e-12 * p0.norm() * q0.norm() || overlap.norm() == 0.0 {
        return Err(Error::InvalidArgument("starting vectors are (nearly) orthogonal".into()));
    }
    let p = p0.0.clone();
    let scale = overlap.conj().inv();
    let q: Vec<C64> = q0.0.iter().map(|z| z * scale).collect();
    run(l, p, q, cfg, false)
}

/// Lanczos for a Hermitian generator: the one-sided recurrence with `q = p`,
/// real `b = c = ‖r‖`.
pub fn hermitian_lanczos(
    l: &Superoperator,
    v0: &OperatorVector,
    cfg: &BiLanczosConfig,
) -> Result<TridiagonalData> {
    cfg.validate()?;
    check_start(l, v0, "v0")?;
    if !l.is_hermitian() {
        return Err(Error::NotHermitian {
            deviation: l.matrix().hermiticity_defect(),
        });
    }
    let nrm = v0.norm();
    if (nrm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("v0 must have unit norm, got {nrm}")));
    }
    let p = v0.0.clone();
    run(l, p.clone(), p, cfg, true)
}

fn run(
    l: &Superoperator,
    p0: Vec<C64>,
    q0: Vec<C64>,
    cfg: &BiLanczosConfig,
    hermitian: bool,
) -> Result<TridiagonalData> {
    let dim = l.dim();
    let bound = l.krylov_bound();
    let max_iter = cfg.max_iter.unwrap_or(dim).min(bound);

    let mut ps: Vec<Vec<C64>> = vec![p0];
    let mut qs: Vec<Vec<C64>> = if hermitian { Vec::new() } else { vec![q0] };

    let mut r = l.apply(&ps[0]);
    let a0 = if hermitian { inner(&ps[0], &r) } else { inner(&qs[0], &r) };
    check_finite(&[a0], 0)?;
    for (x, p) in r.iter_mut().zip(&ps[0]) {
        *x -= a0 * p;
    }
    let mut s = if hermitian {
        Vec::new()
    } else {
        let mut s = l.apply_adjoint(&qs[0]);
        for (x, q) in s.iter_mut().zip(&qs[0]) {
            *x -= a0.conj() * q;
        }
        s
    };

    let mut a = vec![a0];
    let mut b: Vec<C64> = Vec::new();
    let mut c: Vec<C64> = Vec::new();
    let mut c_max = norm(&r).max(a0.norm()).max(f64::MIN_POSITIVE);
    let mut termination = Termination::MaxIter;

    for j in 1..max_iter {
        let (omega, r_norm, s_norm) = if hermitian {
            let rn = norm(&r);
            (C64::new(rn * rn, 0.0), rn, rn)
        } else {
            (inner(&r, &s), norm(&r), norm(&s))
        };
        check_finite(&[omega], j)?;
        let cj = omega.norm().sqrt();
        if cj <= cfg.breakdown_tol * c_max {
            let floor = cfg.breakdown_tol * c_max;
            termination = if r_norm.min(s_norm) <= floor {
                Termination::Exhausted
            } else {
                warn!(
                    "serious breakdown at step {j}: |<r|s>| = {:e} with |r| = {:e}, |s| = {:e}",
                    omega.norm(),
                    r_norm,
                    s_norm
                );
                Termination::SeriousBreakdown
            };
            break;
        }
        c_max = c_max.max(cj);
        let bj = if hermitian { C64::new(cj, 0.0) } else { omega.conj() / cj };

        let mut p: Vec<C64> = r.iter().map(|x| x / cj).collect();
        if hermitian {
            for _ in 0..cfg.reorth_passes {
                project_out(&mut p, &ps, &ps);
            }
            // keep unit norm exactly: the Hermitian basis is orthonormal
            let pn = norm(&p);
            p.iter_mut().for_each(|x| *x /= pn);
        } else {
            let inv = bj.conj().inv();
            let mut q: Vec<C64> = s.iter().map(|x| x * inv).collect();
            for _ in 0..cfg.reorth_passes {
                project_out(&mut p, &qs, &ps);
                project_out(&mut q, &ps, &qs);
            }
            check_finite(&q, j)?;
            qs.push(q);
        }
        check_finite(&p, j)?;
        ps.push(p);
        b.push(bj);
        c.push(C64::new(cj, 0.0));

        let pj = &ps[j];
        let mut r_new = l.apply(pj);
        let aj = if hermitian { inner(pj, &r_new) } else { inner(&qs[j], &r_new) };
        check_finite(&[aj], j)?;
        for ((x, p), pm) in r_new.iter_mut().zip(pj).zip(&ps[j - 1]) {
            *x -= aj * p + bj * pm;
        }
        r = r_new;
        if !hermitian {
            let qj = &qs[j];
            let mut s_new = l.apply_adjoint(qj);
            let cj_conj = C64::new(cj, 0.0);
            for ((x, q), qm) in s_new.iter_mut().zip(qj).zip(&qs[j - 1]) {
                *x -= aj.conj() * q + cj_conj * qm;
            }
            s = s_new;
        }
        a.push(aj);
        if j % 100 == 0 {
            debug!("bi-Lanczos step {j}: a = {aj}, c = {cj:e}");
        }
    }
    if a.len() == bound && termination == Termination::MaxIter {
        termination = Termination::Exhausted;
    }

    let qs = if hermitian { ps.clone() } else { qs };
    let mut tri = TridiagonalData::from_coefficients(a, b, c)?;
    tri.termination = termination;
    let (bio, tri_res) = residuals(l, &ps, &qs, &tri);
    tri.residual_biortho = Some(bio);
    tri.residual_tridiag = Some(tri_res);
    if cfg.store_bases {
        tri.p_basis = Some(ps);
        tri.q_basis = Some(qs);
    }
    Ok(tri)
}

/// `max|Q†P − I|` and `max|Q†𝓛P − T|`.
fn residuals(l: &Superoperator, ps: &[Vec<C64>], qs: &[Vec<C64>], tri: &TridiagonalData) -> (f64, f64) {
    let k = ps.len();
    let t = tri.matrix();
    let mut bio = 0.0f64;
    let mut tri_res = 0.0f64;
    for n in 0..k {
        let lp = l.apply(&ps[n]);
        for m in 0..k {
            let delta = if m == n { 1.0 } else { 0.0 };
            bio = bio.max((inner(&qs[m], &ps[n]) - delta).norm());
            tri_res = tri_res.max((inner(&qs[m], &lp) - t[(m, n)]).norm());
        }
    }
    (bio, tri_res)
}

/// Diagnostics for the dissipative pattern `b_n = c_n = |b_n|`, `a_n = i|a_n|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub n_checked: usize,
    pub max_b: f64,
    pub max_b_minus_c: f64,
    pub max_re_a: f64,
    pub max_im_a: f64,
    pub min_im_a: f64,
    /// Largest `|Im b_n|`, so that `b = c` can be told apart from `b = c = |b|`.
    pub max_im_b: f64,
    /// The diagonal is real and `b = c`: no dissipation.
    pub closed_structure: bool,
    pub verdict: bool,
}

/// Slack allowed below zero for `Im a_n` before the verdict fails.
pub const IM_A_FLOOR: f64 = 1e-10;

/// Checks the first `n_max` coefficients (all when `None`) against the
/// dissipative pattern. Differences are measured relative to the largest
/// `|b_n|` and `|Im a_n|` respectively.
pub fn check_open_structure(tri: &TridiagonalData, tol: f64, n_max: Option<usize>) -> StructureReport {
    let k = n_max.unwrap_or(tri.k()).min(tri.k());
    let a = &tri.a[..k];
    let nb = k.saturating_sub(1);
    let (b, c) = (&tri.b[..nb], &tri.c[..nb]);
    let fold_max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
    let max_b = fold_max(&mut b.iter().map(|z| z.norm()));
    let max_b_minus_c = fold_max(&mut b.iter().zip(c).map(|(x, y)| (x - y).norm()));
    let max_re_a = fold_max(&mut a.iter().map(|z| z.re.abs()));
    let max_im_a = fold_max(&mut a.iter().map(|z| z.im.abs()));
    let max_im_b = fold_max(&mut b.iter().chain(c).map(|z| z.im.abs()));
    let min_im_a = a.iter().map(|z| z.im).fold(f64::INFINITY, f64::min);
    let scale = max_b.max(f64::MIN_POSITIVE);
    let closed_structure = max_im_a <= tol * scale && max_b_minus_c <= tol * scale;
    let verdict = !closed_structure
        && max_b_minus_c <= tol * scale
        && max_im_b <= tol * scale
        && max_re_a <= tol * max_im_a
        && min_im_a >= -IM_A_FLOOR;
    StructureReport {
        n_checked: k,
        max_b,
        max_b_minus_c,
        max_re_a,
        max_im_a,
        min_im_a,
        max_im_b,
        closed_structure,
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{build_lindbladian, build_liouvillian_closed, uniform_seed};
    use crate::matrix::{ComplexMatrix, ONE};
    use crate::spin::{build_jump_operators, build_tfim, ModelSpec};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn vecr(x: &[f64]) -> OperatorVector {
        OperatorVector(x.iter().map(|&v| c(v)).collect())
    }

    /// Wraps a small matrix as a superoperator on 1×1 "operators" of an
    /// n-dimensional space by padding to a perfect-square side.
    fn superop(m: ComplexMatrix) -> Superoperator {
        Superoperator::from_matrix(m).unwrap()
    }

    fn pad_to_4(rows: &[&[f64]]) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(4, 4);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = c(*v);
            }
        }
        // decoupled block so the generator has side 4 = 2²
        m[(2, 2)] = c(7.0);
        m[(3, 3)] = c(9.0);
        m
    }

    fn tfim_open(n: usize, alpha: f64) -> Superoperator {
        let spec = ModelSpec::new(n, -1.05, 0.5).with_dissipation(alpha, alpha);
        let h = build_tfim(&spec).unwrap();
        build_lindbladian(&h, &build_jump_operators(&spec).unwrap()).unwrap()
    }

    #[test]
    fn swap_generator() {
        let l = superop(pad_to_4(&[&[0.0, 1.0], &[1.0, 0.0]]));
        let v = vecr(&[1.0, 0.0, 0.0, 0.0]);
        let tri = bilanczos(&l, &v, &v, &BiLanczosConfig::default()).unwrap();
        assert_eq!(tri.k(), 2);
        assert_eq!(tri.a, vec![c(0.0), c(0.0)]);
        assert_eq!(tri.b, vec![c(1.0)]);
        assert_eq!(tri.c, vec![c(1.0)]);
        assert_eq!(tri.termination, Termination::Exhausted);
        let t = tri.matrix();
        assert_eq!(t[(0, 1)], ONE);
        assert_eq!(t[(1, 0)], ONE);
    }

    #[test]
    fn eigenvector_start_is_immediate_breakdown() {
        let mut m = ComplexMatrix::zeros(4, 4);
        for i in 0..4 {
            m[(i, i)] = c(i as f64 + 0.5);
        }
        let l = superop(m);
        let v = vecr(&[0.0, 0.0, 1.0, 0.0]);
        let tri = bilanczos(&l, &v, &v, &BiLanczosConfig::default()).unwrap();
        assert_eq!(tri.k(), 1);
        assert_eq!(tri.a[0], c(2.5));
        assert_eq!(tri.termination, Termination::Exhausted);
        let h = hermitian_lanczos(&l, &v, &BiLanczosConfig::default()).unwrap();
        assert_eq!(h.k(), 1);
    }

    #[test]
    fn nilpotent_two_by_two() {
        let l = superop(pad_to_4(&[&[0.0, 1.0], &[0.0, 0.0]]));
        let s = 0.5f64.sqrt();
        let v = vecr(&[s, s, 0.0, 0.0]);
        let tri = bilanczos(&l, &v, &v, &BiLanczosConfig::default()).unwrap();
        assert_eq!(tri.k(), 2);
        assert!((tri.a[0] - c(0.5)).norm() < 1e-15);
        assert!((tri.c[0] - c(0.5)).norm() < 1e-15);
        assert!((tri.b[0] - c(-0.5)).norm() < 1e-15);
        assert!((tri.a[1] - c(-0.5)).norm() < 1e-15);
        // dense oracle for Q†LP
        let ps = tri.p_basis.as_ref().unwrap();
        let qs = tri.q_basis.as_ref().unwrap();
        let t = tri.matrix();
        for m in 0..2 {
            for n in 0..2 {
                let lp = l.matrix().matvec(&ps[n]);
                assert!((inner(&qs[m], &lp) - t[(m, n)]).norm() < 1e-14);
            }
        }
        assert!(tri.residual_tridiag.unwrap() < 1e-14);
    }

    #[test]
    fn q0_is_rescaled_and_orthogonal_start_rejected() {
        let l = superop(pad_to_4(&[&[0.0, 1.0], &[1.0, 0.0]]));
        let p = vecr(&[1.0, 0.0, 0.0, 0.0]);
        let q = vecr(&[3.0, 0.0, 0.0, 0.0]);
        let tri = bilanczos(&l, &p, &q, &BiLanczosConfig::default()).unwrap();
        assert!((inner(&tri.q_basis.as_ref().unwrap()[0], &p.0) - ONE).norm() < 1e-15);
        let q_bad = vecr(&[0.0, 1.0, 0.0, 0.0]);
        assert!(bilanczos(&l, &p, &q_bad, &BiLanczosConfig::default()).is_err());
    }

    #[test]
    fn hermitian_single_qubit_paths_agree() {
        let h = build_tfim(&ModelSpec::new(1, 1.0, 0.0)).unwrap();
        let l = build_liouvillian_closed(&h).unwrap();
        let v = uniform_seed(2).unwrap();
        let cfg = BiLanczosConfig::default();
        let one = hermitian_lanczos(&l, &v, &cfg).unwrap();
        let two = bilanczos(&l, &v, &v, &cfg).unwrap();
        assert_eq!(one.k(), two.k());
        for (x, y) in one.a.iter().zip(&two.a).chain(one.b.iter().zip(&two.b)).chain(one.c.iter().zip(&two.c)) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn hermitian_lanczos_rejects_open_generator() {
        let l = tfim_open(2, 0.01);
        let v = uniform_seed(4).unwrap();
        assert!(matches!(
            hermitian_lanczos(&l, &v, &BiLanczosConfig::default()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn closed_tfim_real_symmetric_structure() {
        for n in 2..=3 {
            let h = build_tfim(&ModelSpec::new(n, -1.05, 0.5)).unwrap();
            let l = build_liouvillian_closed(&h).unwrap();
            let d = 1usize << n;
            let v = uniform_seed(d).unwrap();
            let tri = hermitian_lanczos(&l, &v, &BiLanczosConfig::default()).unwrap();
            assert!(tri.k() <= d * d - d + 1, "K = {} for N = {n}", tri.k());
            assert!(tri.a.iter().all(|z| z.im.abs() < 1e-10));
            for (x, y) in tri.b.iter().zip(&tri.c) {
                assert_eq!(x, y);
                assert!(x.re >= 0.0 && x.im == 0.0);
            }
            let rep = check_open_structure(&tri, 1e-6, None);
            assert!(rep.closed_structure);
            assert!(!rep.verdict);
            assert!(tri.residual_biortho.unwrap() < 1e-10);
        }
    }

    #[test]
    fn hermitian_reduction_matches_two_sided_run() {
        let h = build_tfim(&ModelSpec::new(2, -1.05, 0.5)).unwrap();
        let l = build_liouvillian_closed(&h).unwrap();
        let v = uniform_seed(4).unwrap();
        let cfg = BiLanczosConfig::default();
        let one = hermitian_lanczos(&l, &v, &cfg).unwrap();
        let two = bilanczos(&l, &v, &v, &cfg).unwrap();
        assert_eq!(one.k(), two.k());
        let pairs = one.a.iter().zip(&two.a).chain(one.b.iter().zip(&two.b)).chain(one.c.iter().zip(&two.c));
        for (x, y) in pairs {
            assert!((x - y).norm() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn biorthogonality_and_tridiagonal_reconstruction() {
        let l = tfim_open(3, 0.01);
        let tri = bilanczos(&l, &uniform_seed(8).unwrap(), &uniform_seed(8).unwrap(), &BiLanczosConfig::default()).unwrap();
        assert!(tri.k() > 10);
        assert!(tri.residual_biortho.unwrap() < 1e-10, "{:?}", tri.residual_biortho);
        assert!(tri.residual_tridiag.unwrap() < 1e-8, "{:?}", tri.residual_tridiag);
    }

    #[test]
    fn third_reorthogonalization_pass_is_idle() {
        let l = tfim_open(2, 0.05);
        let v = uniform_seed(4).unwrap();
        let tri = bilanczos(&l, &v, &v, &BiLanczosConfig::default()).unwrap();
        let ps = tri.p_basis.as_ref().unwrap();
        let qs = tri.q_basis.as_ref().unwrap();
        for j in 1..tri.k() {
            let mut p = ps[j].clone();
            let mut q = qs[j].clone();
            project_out(&mut p, &qs[..j], &ps[..j]);
            project_out(&mut q, &ps[..j], &qs[..j]);
            let dp: Vec<C64> = p.iter().zip(&ps[j]).map(|(x, y)| x - y).collect();
            let dq: Vec<C64> = q.iter().zip(&qs[j]).map(|(x, y)| x - y).collect();
            assert!(norm(&dp) < 1e-12 && norm(&dq) < 1e-12, "step {j}");
        }
    }

    #[test]
    fn max_iter_truncates() {
        let l = tfim_open(2, 0.01);
        let v = uniform_seed(4).unwrap();
        let cfg = BiLanczosConfig {
            max_iter: Some(5),
            ..Default::default()
        };
        let tri = bilanczos(&l, &v, &v, &cfg).unwrap();
        assert_eq!(tri.k(), 5);
        assert_eq!(tri.termination, Termination::MaxIter);
        assert!(tri.truncated());
    }

    #[test]
    fn bases_can_be_dropped() {
        let l = tfim_open(2, 0.01);
        let v = uniform_seed(4).unwrap();
        let cfg = BiLanczosConfig {
            store_bases: false,
            ..Default::default()
        };
        let tri = bilanczos(&l, &v, &v, &cfg).unwrap();
        assert!(!tri.has_bases());
        assert!(tri.residual_biortho.is_some());
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = BiLanczosConfig {
            breakdown_tol: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hand_built_dissipative_chain_passes() {
        let i = |x: f64| C64::new(0.0, x);
        let tri = TridiagonalData::from_coefficients(vec![i(0.1), i(0.2)], vec![c(0.7)], vec![c(0.7)]).unwrap();
        let rep = check_open_structure(&tri, 1e-6, None);
        assert!(rep.verdict);
        assert!(!rep.closed_structure);
    }

    #[test]
    fn mismatched_coefficient_lengths_rejected() {
        assert!(TridiagonalData::from_coefficients(vec![ONE; 3], vec![ONE], vec![ONE]).is_err());
        assert!(TridiagonalData::from_coefficients(vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn open_tfim_leading_coefficients_have_dissipative_shape() {
        let l = tfim_open(3, 0.01);
        let v = uniform_seed(8).unwrap();
        let tri = bilanczos(&l, &v, &v, &BiLanczosConfig::default()).unwrap();
        let rep = check_open_structure(&tri, 1e-6, Some(10));
        assert!(rep.max_b_minus_c < 1e-6 * rep.max_b);
        assert!(rep.max_re_a < 1e-6 * rep.max_im_a);
    }

    #[test]
    fn open_tfim_four_sites_is_not_dissipative_over_fifty() {
        let l = tfim_open(4, 0.01);
        let v = uniform_seed(16).unwrap();
        let tri = bilanczos(&l, &v, &v, &BiLanczosConfig::default()).unwrap();
        let rep = check_open_structure(&tri, 1e-6, Some(50));
        assert!(!rep.verdict);
        assert!(rep.min_im_a < -1e-6 * rep.max_im_a);
    }
}
