//! Dispersion bound on the growth of Krylov complexity.
//!
//! `|Ṗ C − Ċ|² ≤ 4|b₁|² (M₂ − C²)`, which for a closed system (`P ≡ 1`) is
//! `Ċ² ≤ 4 b₁² ΔK²`, equivalently `τ_K b₁ ≥ 1/2` with `τ_K = ΔK / |Ċ|`.

use serde::{Deserialize, Serialize};

use crate::bilanczos::TridiagonalData;
use crate::chain::{finite_diff, MomentSeries};
use crate::error::{Error, Result};
use crate::matrix::C64;

/// Where `Ċ` and `Ṗ` come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Derivatives {
    /// The chain right-hand sides carried by the moment series.
    #[default]
    Exact,
    /// Central differences of the sampled `C` and `P`.
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub t: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `rhs − lhs`.
    pub margin: Vec<f64>,
    /// Samples with `margin < −tol · max(rhs)`.
    pub violations: Vec<usize>,
    /// Samples with a negative margin inside the noise allowance.
    pub noise_violations: Vec<usize>,
    /// `ΔK / |Ċ|`; NaN where `Ċ = 0`.
    pub tau_k: Vec<f64>,
    /// `lhs / rhs`; NaN where `rhs = 0`.
    pub saturation_ratio: Vec<f64>,
    pub dc: Vec<f64>,
    pub tol: f64,
}

/// Digest written next to the bound table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub samples: usize,
    pub max_rhs: f64,
    /// Largest `lhs − rhs` (zero when the bound holds everywhere).
    pub max_violation: f64,
    /// `max_violation / max_rhs`.
    pub relative_violation: f64,
    pub violations: usize,
    pub noise_violations: usize,
    pub saturation_ratio_range: Option<(f64, f64)>,
    pub verdict: bool,
}

impl BoundReport {
    pub fn max_rhs(&self) -> f64 {
        self.rhs.iter().copied().fold(0.0, f64::max)
    }

    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> BoundSummary {
        let max_rhs = self.max_rhs();
        let max_violation = self.margin.iter().map(|m| -m).fold(0.0, f64::max);
        BoundSummary {
            samples: self.t.len(),
            max_rhs,
            max_violation,
            relative_violation: if max_rhs > 0.0 { max_violation / max_rhs } else { max_violation },
            violations: self.violations.len(),
            noise_violations: self.noise_violations.len(),
            saturation_ratio_range: self.saturation_range(0..self.t.len()),
            verdict: self.holds(),
        }
    }

    /// `(min, max)` of the finite saturation ratios among the given samples.
    pub fn saturation_range(&self, range: std::ops::Range<usize>) -> Option<(f64, f64)> {
        let finite: Vec<f64> = self.saturation_ratio[range]
            .iter()
            .copied()
            .filter(|r| r.is_finite())
            .collect();
        if finite.is_empty() {
            return None;
        }
        Some((
            finite.iter().copied().fold(f64::INFINITY, f64::min),
            finite.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ))
    }
}

fn derivatives(m: &MomentSeries, source: Derivatives) -> Result<(Vec<f64>, Vec<f64>)> {
    match source {
        Derivatives::Exact => Ok((m.dc.clone(), m.dp.clone())),
        Derivatives::FiniteDifference => Ok((finite_diff(&m.c, &m.t)?, finite_diff(&m.p, &m.t)?)),
    }
}

fn assemble(m: &MomentSeries, b1: C64, tol: f64, lhs: Vec<f64>, dc: Vec<f64>) -> BoundReport {
    let b1sq = b1.norm_sqr();
    let rhs: Vec<f64> = m.m2.iter().zip(&m.c).map(|(m2, c)| 4.0 * b1sq * (m2 - c * c)).collect();
    let margin: Vec<f64> = rhs.iter().zip(&lhs).map(|(r, l)| r - l).collect();
    let max_rhs = rhs.iter().copied().fold(0.0, f64::max);
    let mut violations = Vec::new();
    let mut noise_violations = Vec::new();
    for (i, &mg) in margin.iter().enumerate() {
        if mg < -tol * max_rhs {
            violations.push(i);
        } else if mg < 0.0 {
            noise_violations.push(i);
        }
    }
    let tau_k = m
        .m2
        .iter()
        .zip(&m.c)
        .zip(&dc)
        .map(|((m2, c), d)| {
            let spread = (m2 - c * c).max(0.0).sqrt();
            if *d == 0.0 {
                f64::NAN
            } else {
                spread / d.abs()
            }
        })
        .collect();
    let saturation_ratio = lhs
        .iter()
        .zip(&rhs)
        .map(|(l, r)| if *r > 0.0 { l / r } else { f64::NAN })
        .collect();
    BoundReport {
        t: m.t.clone(),
        lhs,
        rhs,
        margin,
        violations,
        noise_violations,
        tau_k,
        saturation_ratio,
        dc,
        tol,
    }
}

/// `lhs = |Ṗ C − Ċ|²`, `rhs = 4|b₁|²(M₂ − C²)`. Negative margins smaller than
/// `tol · max(rhs)` are reported as noise, larger ones as violations.
pub fn dispersion_bound_check(m: &MomentSeries, b1: C64, tol: f64, source: Derivatives) -> Result<BoundReport> {
    let (dc, dp) = derivatives(m, source)?;
    let lhs = m
        .c
        .iter()
        .zip(&dc)
        .zip(&dp)
        .map(|((c, dc), dp)| (dp * c - dc).powi(2))
        .collect();
    Ok(assemble(m, b1, tol, lhs, dc))
}

/// The same bound written with `C̃ = C / P`:
/// `lhs' = |(1 − P) Ṗ C̃ + P ∂ₜC̃|²`. Fails if `lhs'` and `lhs` differ by more
/// than `1e−8 · max(lhs, 1)`.
pub fn renormalized_bound_check(m: &MomentSeries, b1: C64, tol: f64, source: Derivatives) -> Result<BoundReport> {
    if let Some(i) = m.p.iter().position(|&p| !(p > crate::chain::P_UNDERFLOW)) {
        return Err(Error::InvalidArgument(format!("P underflows at t = {}", m.t[i])));
    }
    let (dc, dp) = derivatives(m, source)?;
    let lhs_renorm: Vec<f64> = (0..m.len())
        .map(|i| {
            let (p, ct) = (m.p[i], m.ctilde[i]);
            let dct = (dc[i] - ct * dp[i]) / p;
            ((1.0 - p) * dp[i] * ct + p * dct).powi(2)
        })
        .collect();
    let plain = dispersion_bound_check(m, b1, tol, source)?;
    for (i, (a, b)) in lhs_renorm.iter().zip(&plain.lhs).enumerate() {
        if (a - b).abs() > 1e-8 * a.max(*b).max(1.0) {
            return Err(Error::Invariant(format!(
                "renormalized lhs {a:e} differs from lhs {b:e} at t = {}",
                m.t[i]
            )));
        }
    }
    Ok(assemble(m, b1, tol, lhs_renorm, dc))
}

/// `⟨𝓛²⟩ − ⟨𝓛⟩²` on the seed. In the Krylov basis `⟨q₀|𝓛²|p₀⟩ = a₀² + b₁c₁`
/// and `⟨q₀|𝓛|p₀⟩ = a₀`.
pub fn liouvillian_variance_t0(a0: C64, b1: C64, c1: C64) -> C64 {
    let second = a0 * a0 + b1 * c1;
    second - a0 * a0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MandelstamTamm {
    /// `τ_K · b₁` per sample; NaN where excluded.
    pub product: Vec<f64>,
    pub valid: Vec<bool>,
    pub min_product: f64,
    pub verdict: bool,
}

/// `τ_K b₁ ≥ 1/2 − tol` at every sample where `|Ċ|` exceeds
/// `floor · max|Ċ|`; turning points of `C` are excluded.
pub fn mandelstam_tamm_tau(report: &BoundReport, b1: f64, floor: f64, tol: f64) -> MandelstamTamm {
    let max_dc = report.dc.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let valid: Vec<bool> = report
        .dc
        .iter()
        .map(|d| d.abs() > floor * max_dc && max_dc > 0.0)
        .collect();
    let product: Vec<f64> = report
        .tau_k
        .iter()
        .zip(&valid)
        .map(|(tau, ok)| if *ok { tau * b1 } else { f64::NAN })
        .collect();
    let min_product = product
        .iter()
        .copied()
        .filter(|x| x.is_finite())
        .fold(f64::INFINITY, f64::min);
    MandelstamTamm {
        verdict: min_product >= 0.5 - tol,
        product,
        valid,
        min_product,
    }
}

/// `b_n = √(α₀ n(n−1)/4 + γ₀ n/2)`.
pub fn saturating_b(alpha0: f64, gamma0: f64, n: usize) -> f64 {
    let n = n as f64;
    (alpha0 * n * (n - 1.0) / 4.0 + gamma0 * n / 2.0).sqrt()
}

/// A closed chain (`a = 0`, `b = c`) whose coefficients saturate the bound.
pub fn saturating_coefficients(alpha0: f64, gamma0: f64, k: usize) -> Result<TridiagonalData> {
    if !(alpha0 >= 0.0 && gamma0 >= 0.0) || !alpha0.is_finite() || !gamma0.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "alpha0 and gamma0 must be finite and non-negative, got {alpha0}, {gamma0}"
        )));
    }
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need K >= 2, got {k}")));
    }
    let b: Vec<C64> = (1..k).map(|n| C64::new(saturating_b(alpha0, gamma0, n), 0.0)).collect();
    TridiagonalData::from_coefficients(vec![C64::new(0.0, 0.0); k], b.clone(), b)
}
