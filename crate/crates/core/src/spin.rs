//! Pauli algebra on a chain of spin-1/2 sites, the transverse-field Ising
//! Hamiltonian, and the jump operators coupling the chain to its environment.
//!
//! Tensor ordering: site 1 is the leftmost Kronecker factor, so the state
//! index bit of site `k` has weight `2^(N-k)`. Vectorized operators in
//! [`crate::lindblad`] depend on this convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, I, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
    /// Raising operator `(X + iY)/2`.
    Plus,
    /// Lowering operator `(X - iY)/2`.
    Minus,
}

pub fn pauli_matrix(kind: Pauli) -> ComplexMatrix {
    match kind {
        Pauli::I => ComplexMatrix::identity(2),
        Pauli::X => ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]),
        Pauli::Y => ComplexMatrix::from_rows(&[&[ZERO, -I], &[I, ZERO]]),
        Pauli::Z => ComplexMatrix::from_rows(&[&[ONE, ZERO], &[ZERO, -ONE]]),
        Pauli::Plus => ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ZERO, ZERO]]),
        Pauli::Minus => ComplexMatrix::from_rows(&[&[ZERO, ZERO], &[ONE, ZERO]]),
    }
}

/// Embeds a single-site operator at `site` (1-based) of an `n_sites` chain.
pub fn site_operator(op: &ComplexMatrix, site: usize, n_sites: usize) -> Result<ComplexMatrix> {
    if op.rows() != 2 || op.cols() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "single-site operator must be 2x2, got {}x{}",
            op.rows(),
            op.cols()
        )));
    }
    if site == 0 || site > n_sites {
        return Err(Error::SiteOutOfRange { site, n_sites });
    }
    let left = ComplexMatrix::identity(1 << (site - 1));
    let right = ComplexMatrix::identity(1 << (n_sites - site));
    Ok(left.kron(op).kron(&right))
}

/// Chain size, couplings, and where each kind of jump operator acts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n_sites: usize,
    pub g: f64,
    pub h: f64,
    /// Strength of the boundary raising/lowering channels.
    #[serde(default)]
    pub alpha: f64,
    /// Strength of the bulk dephasing channels.
    #[serde(default)]
    pub gamma: f64,
    /// Sites carrying `σ⁺`/`σ⁻` jumps. Defaults to `{1, N}`.
    #[serde(default)]
    pub boundary_sites: Option<Vec<usize>>,
    /// Sites carrying `σᶻ` jumps. Defaults to `{2, …, N-1}`.
    #[serde(default)]
    pub bulk_sites: Option<Vec<usize>>,
    /// Permit a site to appear in both sets.
    #[serde(default)]
    pub allow_overlap: bool,
}

impl ModelSpec {
    pub fn new(n_sites: usize, g: f64, h: f64) -> Self {
        Self {
            n_sites,
            g,
            h,
            alpha: 0.0,
            gamma: 0.0,
            boundary_sites: None,
            bulk_sites: None,
            allow_overlap: false,
        }
    }

    pub fn with_dissipation(mut self, alpha: f64, gamma: f64) -> Self {
        self.alpha = alpha;
        self.gamma = gamma;
        self
    }

    pub fn with_sites(mut self, boundary: Vec<usize>, bulk: Vec<usize>) -> Self {
        self.boundary_sites = Some(boundary);
        self.bulk_sites = Some(bulk);
        self
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn boundary(&self) -> Vec<usize> {
        self.boundary_sites.clone().unwrap_or_else(|| {
            let mut v = vec![1];
            if self.n_sites > 1 {
                v.push(self.n_sites);
            }
            v
        })
    }

    pub fn bulk(&self) -> Vec<usize> {
        self.bulk_sites
            .clone()
            .unwrap_or_else(|| (2..self.n_sites).collect())
    }

    pub fn is_closed(&self) -> bool {
        self.alpha == 0.0 && self.gamma == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::InvalidModel("n_sites must be at least 1".into()));
        }
        if self.n_sites > 16 {
            return Err(Error::TooLarge(format!("{} sites", self.n_sites)));
        }
        for (name, v) in [("g", self.g), ("h", self.h), ("alpha", self.alpha), ("gamma", self.gamma)] {
            if !v.is_finite() {
                return Err(Error::InvalidModel(format!("{name} must be finite")));
            }
        }
        if self.alpha < 0.0 || self.gamma < 0.0 {
            return Err(Error::InvalidModel(format!(
                "jump strengths must be non-negative (alpha = {}, gamma = {})",
                self.alpha, self.gamma
            )));
        }
        let boundary = self.boundary();
        let bulk = self.bulk();
        for &s in boundary.iter().chain(&bulk) {
            if s == 0 || s > self.n_sites {
                return Err(Error::SiteOutOfRange {
                    site: s,
                    n_sites: self.n_sites,
                });
            }
        }
        if !self.allow_overlap {
            if let Some(s) = boundary.iter().find(|s| bulk.contains(s)) {
                return Err(Error::InvalidModel(format!(
                    "site {s} is both boundary and bulk; set allow_overlap to permit this"
                )));
            }
        }
        Ok(())
    }
}

/// `H = -Σ Z_j Z_{j+1} - g Σ X_j - h Σ Z_j` with open boundaries.
pub fn build_tfim(spec: &ModelSpec) -> Result<ComplexMatrix> {
    spec.validate()?;
    let n = spec.n_sites;
    let x = pauli_matrix(Pauli::X);
    let z = pauli_matrix(Pauli::Z);
    let zs: Vec<ComplexMatrix> = (1..=n).map(|k| site_operator(&z, k, n)).collect::<Result<_>>()?;

    let mut hamiltonian = ComplexMatrix::zeros(spec.dim(), spec.dim());
    for j in 0..n.saturating_sub(1) {
        hamiltonian = &hamiltonian - &(&zs[j] * &zs[j + 1]);
    }
    for (k, zk) in zs.iter().enumerate() {
        let xk = site_operator(&x, k + 1, n)?;
        hamiltonian = &hamiltonian - &xk.scale_real(spec.g);
        hamiltonian = &hamiltonian - &zk.scale_real(spec.h);
    }
    Ok(hamiltonian)
}

/// `√α σ⁺_k, √α σ⁻_k` on boundary sites followed by `√γ σᶻ_k` on bulk sites.
/// Channels with zero strength are omitted.
pub fn build_jump_operators(spec: &ModelSpec) -> Result<Vec<ComplexMatrix>> {
    spec.validate()?;
    let n = spec.n_sites;
    let mut jumps = Vec::new();
    if spec.alpha > 0.0 {
        let s = spec.alpha.sqrt();
        for k in spec.boundary() {
            jumps.push(site_operator(&pauli_matrix(Pauli::Plus), k, n)?.scale_real(s));
            jumps.push(site_operator(&pauli_matrix(Pauli::Minus), k, n)?.scale_real(s));
        }
    }
    if spec.gamma > 0.0 {
        let s = spec.gamma.sqrt();
        for k in spec.bulk() {
            jumps.push(site_operator(&pauli_matrix(Pauli::Z), k, n)?.scale_real(s));
        }
    }
    Ok(jumps)
}
