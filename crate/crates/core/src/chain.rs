//! Amplitudes on the Krylov chain and the moments built from them.
//!
//! With `iⁿ φ_n(t) = (e^{iTt})_{n0}` the amplitudes obey
//!
//! ```text
//! φ̇_n = i a_n φ_n − b_{n+1} φ_{n+1} + c_n φ_{n−1}
//! ψ̇_n = i a_n ψ_n − c_{n+1} ψ_{n+1} + b_n ψ_{n−1}
//! ```
//!
//! and the complexity is `C = Σ n ψ*_n φ_n`.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::bilanczos::TridiagonalData;
use crate::error::{Error, Result};
use crate::lindblad::{OperatorVector, Superoperator};
use crate::matrix::{inner, C64, I, ZERO};

/// Largest generator dimension accepted by the direct-evolution oracle.
pub const ORACLE_MAX_DIM: usize = 4096;

/// Below this total probability the moment series is cut off.
pub const P_UNDERFLOW: f64 = 1e-300;

/// `n` uniformly spaced samples on `[0, t_max]`, endpoints included.
pub fn uniform_grid(t_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidArgument(format!("t_max must be positive, got {t_max}")));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {n}")));
    }
    let dt = t_max / (n - 1) as f64;
    Ok((0..n).map(|i| if i + 1 == n { t_max } else { i as f64 * dt }).collect())
}

fn check_grid(t: &[f64]) -> Result<()> {
    if t.is_empty() || t[0] != 0.0 {
        return Err(Error::InvalidArgument("time grid must start at 0".into()));
    }
    if t.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    /// Relative agreement required between successive step halvings.
    pub rel_tol: f64,
    /// Upper limit on the number of halvings.
    pub max_refinements: usize,
    /// `|φ_{K−1}|²` above this marks a sample as affected by truncation.
    pub tail_cutoff: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_refinements: 16,
            tail_cutoff: 1e-10,
        }
    }
}

/// Amplitudes and their time derivatives sampled on a grid.
/// Each outer entry is one time sample; inner vectors have length `K`.
#[derive(Debug, Clone)]
pub struct ChainTrajectory {
    pub t: Vec<f64>,
    pub phi: Vec<Vec<C64>>,
    pub psi: Vec<Vec<C64>>,
    pub dphi: Vec<Vec<C64>>,
    pub dpsi: Vec<Vec<C64>>,
    /// `|φ_{K−1}(t)|²`.
    pub tail_mass: Vec<f64>,
    pub tail_cutoff: f64,
    /// RK4 substeps per grid interval that met the tolerance.
    pub substeps: usize,
}

impl ChainTrajectory {
    /// Number of leading samples whose tail mass stays below the cutoff.
    pub fn trusted_len(&self) -> usize {
        self.tail_mass
            .iter()
            .position(|&m| !(m < self.tail_cutoff))
            .unwrap_or(self.t.len())
    }

    pub fn is_trusted(&self) -> bool {
        self.trusted_len() == self.t.len()
    }
}

/// The chain generator `T` in amplitude form: one `(φ, ψ)` right-hand side.
struct ChainRhs<'a> {
    a: &'a [C64],
    b: &'a [C64],
    c: &'a [C64],
}

impl ChainRhs<'_> {
    /// `out = f(x)` for the recursion with hopping `up` (to n+1) and `down` (from n−1).
    fn apply(&self, x: &[C64], out: &mut [C64], swap: bool) {
        let k = x.len();
        let (up, down) = if swap { (self.c, self.b) } else { (self.b, self.c) };
        for n in 0..k {
            let mut v = I * self.a[n] * x[n];
            if n + 1 < k {
                v -= up[n] * x[n + 1];
            }
            if n > 0 {
                v += down[n - 1] * x[n - 1];
            }
            out[n] = v;
        }
    }

    fn inf_norm(&self) -> f64 {
        let k = self.a.len();
        (0..k)
            .map(|n| {
                let mut s = self.a[n].norm();
                if n + 1 < k {
                    s += self.b[n].norm().max(self.c[n].norm());
                }
                if n > 0 {
                    s += self.b[n - 1].norm().max(self.c[n - 1].norm());
                }
                s
            })
            .fold(0.0, f64::max)
    }
}

/// Classical RK4 with a fixed number of substeps per grid interval.
fn integrate(rhs: &ChainRhs, t: &[f64], substeps: usize, swap: bool) -> Option<(Vec<Vec<C64>>, Vec<Vec<C64>>)> {
    let k = rhs.a.len();
    let mut x = vec![ZERO; k];
    x[0] = C64::new(1.0, 0.0);
    let mut k1 = vec![ZERO; k];
    let mut k2 = vec![ZERO; k];
    let mut k3 = vec![ZERO; k];
    let mut k4 = vec![ZERO; k];
    let mut tmp = vec![ZERO; k];
    let mut samples = Vec::with_capacity(t.len());
    let mut derivs = Vec::with_capacity(t.len());
    let record = |x: &[C64], samples: &mut Vec<Vec<C64>>, derivs: &mut Vec<Vec<C64>>| {
        let mut d = vec![ZERO; x.len()];
        rhs.apply(x, &mut d, swap);
        samples.push(x.to_vec());
        derivs.push(d);
    };
    record(&x, &mut samples, &mut derivs);
    for w in t.windows(2) {
        let h = (w[1] - w[0]) / substeps as f64;
        for _ in 0..substeps {
            rhs.apply(&x, &mut k1, swap);
            for n in 0..k {
                tmp[n] = x[n] + k1[n] * (0.5 * h);
            }
            rhs.apply(&tmp, &mut k2, swap);
            for n in 0..k {
                tmp[n] = x[n] + k2[n] * (0.5 * h);
            }
            rhs.apply(&tmp, &mut k3, swap);
            for n in 0..k {
                tmp[n] = x[n] + k3[n] * h;
            }
            rhs.apply(&tmp, &mut k4, swap);
            for n in 0..k {
                x[n] += (k1[n] + (k2[n] + k3[n]) * 2.0 + k4[n]) * (h / 6.0);
            }
        }
        if !x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return None;
        }
        record(&x, &mut samples, &mut derivs);
    }
    Some((samples, derivs))
}

fn complexity_series(phi: &[Vec<C64>], psi: &[Vec<C64>]) -> Vec<f64> {
    phi.iter()
        .zip(psi)
        .map(|(f, p)| {
            f.iter()
                .zip(p)
                .enumerate()
                .map(|(n, (x, y))| (y.conj() * x).re * n as f64)
                .sum()
        })
        .collect()
}

fn max_rel_change(fine: &[f64], coarse: &[f64]) -> f64 {
    let scale = fine.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    fine.iter()
        .zip(coarse)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Evolves both amplitude recursions from `δ_{n0}` over `t_grid`.
///
/// The number of RK4 substeps per grid interval starts from the step size
/// suggested by `‖T‖∞` and is doubled until the complexity and probability
/// series of two successive resolutions agree to `step.rel_tol`.
pub fn evolve_chain(tri: &TridiagonalData, t_grid: &[f64], step: &StepControl) -> Result<ChainTrajectory> {
    check_grid(t_grid)?;
    let rhs = ChainRhs {
        a: &tri.a,
        b: &tri.b,
        c: &tri.c,
    };
    let max_dt = t_grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let mut substeps = ((4.0 * max_dt * rhs.inf_norm()).ceil() as usize).max(1);

    let run = |m: usize| -> Option<_> {
        let (phi, dphi) = integrate(&rhs, t_grid, m, false)?;
        let (psi, dpsi) = integrate(&rhs, t_grid, m, true)?;
        Some((phi, psi, dphi, dpsi))
    };
    let summary = |phi: &[Vec<C64>], psi: &[Vec<C64>]| -> (Vec<f64>, Vec<f64>) {
        let c = complexity_series(phi, psi);
        let p = phi.iter().map(|f| f.iter().map(|z| z.norm_sqr()).sum()).collect();
        (c, p)
    };

    let mut current = run(substeps);
    let mut accepted = None;
    for refinement in 0..=step.max_refinements {
        let finer = run(2 * substeps);
        match (&current, &finer) {
            (Some(cur), Some(fin)) => {
                let (c0, p0) = summary(&cur.0, &cur.1);
                let (c1, p1) = summary(&fin.0, &fin.1);
                let change = max_rel_change(&c1, &c0).max(max_rel_change(&p1, &p0));
                debug!("chain refinement {refinement}: {} substeps, change {change:e}", 2 * substeps);
                if change < step.rel_tol {
                    accepted = finer;
                    substeps *= 2;
                    break;
                }
            }
            (_, None) if refinement == step.max_refinements => {
                return Err(Error::NonFinite {
                    context: "chain amplitudes",
                    step: 2 * substeps,
                })
            }
            _ => {}
        }
        substeps *= 2;
        current = finer;
    }
    let (phi, psi, dphi, dpsi) = accepted.ok_or_else(|| {
        Error::NoConvergence(format!(
            "chain evolution did not reach rel_tol {:e} within {} halvings",
            step.rel_tol, step.max_refinements
        ))
    })?;
    let tail_mass: Vec<f64> = phi.iter().map(|f| f.last().map_or(0.0, |z| z.norm_sqr())).collect();
    let traj = ChainTrajectory {
        t: t_grid.to_vec(),
        phi,
        psi,
        dphi,
        dpsi,
        tail_mass,
        tail_cutoff: step.tail_cutoff,
        substeps,
    };
    if !traj.is_trusted() && tri.truncated() {
        warn!(
            "tail mass exceeds {:e} from t = {}; later samples are affected by chain truncation",
            step.tail_cutoff,
            traj.t[traj.trusted_len()]
        );
    }
    Ok(traj)
}

/// Moments of the chain distribution and their exact time derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub t: Vec<f64>,
    /// `Re Σ n ψ*_n φ_n`.
    pub c: Vec<f64>,
    /// `Σ |φ_n|²`.
    pub p: Vec<f64>,
    /// `Σ n² |φ_n|²`.
    pub m2: Vec<f64>,
    /// `C / P`.
    pub ctilde: Vec<f64>,
    pub dc: Vec<f64>,
    pub dp: Vec<f64>,
    /// `Im Σ n ψ*_n φ_n`.
    pub c_imag: Vec<f64>,
    /// `Re Σ ψ*_n φ_n`, the bi-orthogonal norm.
    pub p_biorth: Vec<f64>,
    pub tail_mass: Vec<f64>,
}

impl MomentSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// The first `n` samples.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.len());
        let cut = |v: &Vec<f64>| v[..n].to_vec();
        Self {
            t: cut(&self.t),
            c: cut(&self.c),
            p: cut(&self.p),
            m2: cut(&self.m2),
            ctilde: cut(&self.ctilde),
            dc: cut(&self.dc),
            dp: cut(&self.dp),
            c_imag: cut(&self.c_imag),
            p_biorth: cut(&self.p_biorth),
            tail_mass: cut(&self.tail_mass),
        }
    }

    /// Largest `|P − Σψ*φ|` over the series.
    pub fn max_norm_gap(&self) -> f64 {
        self.p
            .iter()
            .zip(&self.p_biorth)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn moments(traj: &ChainTrajectory) -> MomentSeries {
    let mut out = MomentSeries {
        t: Vec::new(),
        c: Vec::new(),
        p: Vec::new(),
        m2: Vec::new(),
        ctilde: Vec::new(),
        dc: Vec::new(),
        dp: Vec::new(),
        c_imag: Vec::new(),
        p_biorth: Vec::new(),
        tail_mass: Vec::new(),
    };
    for (i, &t) in traj.t.iter().enumerate() {
        let (phi, psi) = (&traj.phi[i], &traj.psi[i]);
        let (dphi, dpsi) = (&traj.dphi[i], &traj.dpsi[i]);
        let mut cz = ZERO;
        let mut pb = ZERO;
        let (mut p, mut m2, mut dc, mut dp) = (0.0, 0.0, 0.0, 0.0);
        for n in 0..phi.len() {
            let nf = n as f64;
            let w = psi[n].conj() * phi[n];
            cz += w * nf;
            pb += w;
            let prob = phi[n].norm_sqr();
            p += prob;
            m2 += nf * nf * prob;
            dc += nf * (dpsi[n].conj() * phi[n] + psi[n].conj() * dphi[n]).re;
            dp += 2.0 * (phi[n].conj() * dphi[n]).re;
        }
        if p < P_UNDERFLOW {
            warn!("total probability underflows at t = {t}; moment series truncated");
            break;
        }
        out.t.push(t);
        out.c.push(cz.re);
        out.c_imag.push(cz.im);
        out.p.push(p);
        out.p_biorth.push(pb.re);
        out.m2.push(m2);
        out.ctilde.push(cz.re / p);
        out.dc.push(dc);
        out.dp.push(dp);
        out.tail_mass.push(traj.tail_mass[i]);
    }
    out
}

/// Evolves the seed in the full operator space and projects onto the stored
/// bases: `φ_n = (−i)ⁿ⟨q_n|v(t)⟩` with `v̇ = i𝓛v`, and `ψ*_n = iⁿ⟨p_n|v̄(t)⟩`
/// with `v̄̇ = −i𝓛†v̄`, `v̄(0) = v(0)`.
pub fn direct_evolution_oracle(
    l: &Superoperator,
    seed: &OperatorVector,
    tri: &TridiagonalData,
    t_grid: &[f64],
) -> Result<MomentSeries> {
    check_grid(t_grid)?;
    if l.dim() > ORACLE_MAX_DIM {
        return Err(Error::TooLarge(format!("oracle limited to dimension {ORACLE_MAX_DIM}")));
    }
    if seed.len() != l.dim() {
        return Err(Error::DimensionMismatch("seed length does not match the superoperator".into()));
    }
    let (ps, qs) = match (&tri.p_basis, &tri.q_basis) {
        (Some(p), Some(q)) => (p, q),
        _ => return Err(Error::MissingBases),
    };
    if ps.first().map(|v| v.len()) != Some(l.dim()) {
        return Err(Error::DimensionMismatch("stored bases do not match the superoperator".into()));
    }
    let gen = l.matrix().scale(I);
    let k = ps.len();
    let phase: Vec<C64> = (0..k).map(|n| (-I).powu(n as u32)).collect();

    let mut v = seed.0.clone();
    let mut vbar = seed.0.clone();
    let mut traj = ChainTrajectory {
        t: t_grid.to_vec(),
        phi: Vec::new(),
        psi: Vec::new(),
        dphi: Vec::new(),
        dpsi: Vec::new(),
        tail_mass: Vec::new(),
        tail_cutoff: f64::INFINITY,
        substeps: 0,
    };
    let mut last_dt = f64::NAN;
    let mut prop = gen.clone();
    for i in 0..t_grid.len() {
        if i > 0 {
            let dt = t_grid[i] - t_grid[i - 1];
            if dt != last_dt {
                prop = gen.scale_real(dt).expm()?;
                last_dt = dt;
            }
            v = prop.matvec(&v);
            // e^{−i𝓛†dt} = (e^{i𝓛 dt})†
            vbar = adjoint_matvec(&prop, &vbar);
            if !v.iter().chain(&vbar).all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite { context: "direct evolution", step: i });
            }
        }
        let dv = l.apply(&v).into_iter().map(|z| z * I).collect::<Vec<_>>();
        let dvbar = l.apply_adjoint(&vbar).into_iter().map(|z| -z * I).collect::<Vec<_>>();
        let mut phi = Vec::with_capacity(k);
        let mut psi = Vec::with_capacity(k);
        let mut dphi = Vec::with_capacity(k);
        let mut dpsi = Vec::with_capacity(k);
        for n in 0..k {
            phi.push(phase[n] * inner(&qs[n], &v));
            dphi.push(phase[n] * inner(&qs[n], &dv));
            // ψ_n = conj(iⁿ⟨p_n|v̄⟩) = (−i)ⁿ⟨v̄|p_n⟩
            psi.push(phase[n] * inner(&vbar, &ps[n]));
            dpsi.push(phase[n] * inner(&dvbar, &ps[n]));
        }
        traj.tail_mass.push(phi[k - 1].norm_sqr());
        traj.phi.push(phi);
        traj.psi.push(psi);
        traj.dphi.push(dphi);
        traj.dpsi.push(dpsi);
    }
    Ok(moments(&traj))
}

fn adjoint_matvec(m: &crate::matrix::ComplexMatrix, x: &[C64]) -> Vec<C64> {
    let mut y = vec![ZERO; m.cols()];
    for i in 0..m.rows() {
        let xi = x[i];
        if xi == ZERO {
            continue;
        }
        for (j, mij) in m.row(i).iter().enumerate() {
            y[j] += mij.conj() * xi;
        }
    }
    y
}

/// Derivative of a series sampled on a uniform grid: central differences in
/// the interior, second-order one-sided formulas at the ends.
pub fn finite_diff(series: &[f64], t_grid: &[f64]) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 3 || t_grid.len() != n {
        return Err(Error::InvalidArgument(format!(
            "finite_diff needs at least 3 samples on a matching grid (got {n} values, {} times)",
            t_grid.len()
        )));
    }
    let h = (t_grid[n - 1] - t_grid[0]) / (n - 1) as f64;
    if !(h > 0.0) || t_grid.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(Error::InvalidArgument("finite_diff needs a uniform increasing grid".into()));
    }
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * series[0] + 4.0 * series[1] - series[2]) / (2.0 * h);
    for i in 1..n - 1 {
        d[i] = (series[i + 1] - series[i - 1]) / (2.0 * h);
    }
    d[n - 1] = (3.0 * series[n - 1] - 4.0 * series[n - 2] + series[n - 3]) / (2.0 * h);
    Ok(d)
}
