//! Continuum limit of the chain: a first-order transport PDE for the amplitude
//! density with hopping profile `b(x)` and damping profile `a(x)`.
//!
//! A delta-localized initial state rides the characteristic `y = 2t`, where
//! `dx/dy = b(x)`. Along it the density decays as `exp(−2∫₀ᵗ a(x(2s)) ds)`, so
//!
//! ```text
//! P(t) = exp(−A(2t)),  A(y) = ∫₀^y a(x(y')) dy',   C(t) = x(2t) · P(t).
//! ```
//!
//! Values are carried as logarithms because `P` can underflow long before the
//! interesting part of `C` is over.

use ode_solvers::{Dop853, System, Vector2};
use serde::{Deserialize, Serialize};

use crate::bilanczos::TridiagonalData;
use crate::error::{Error, Result};
use crate::matrix::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuumCase {
    /// `a(x) = αx`
    LinearA,
    /// `a(x) = α`
    ConstantA,
}

/// `b(x) = βx + c` with one of the two damping profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuumSpec {
    pub case: ContinuumCase,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "default_offset")]
    pub c: f64,
}

fn default_offset() -> f64 {
    1.0
}

/// Largest exponent `2βt` evaluated before giving up.
pub const MAX_GROWTH_EXPONENT: f64 = 700.0;

impl ContinuumSpec {
    pub fn new(case: ContinuumCase, alpha: f64, beta: f64) -> Self {
        Self {
            case,
            alpha,
            beta,
            c: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta must be finite and > 0, got {}", self.beta)));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidArgument(format!("c must be finite and > 0, got {}", self.c)));
        }
        Ok(())
    }

    pub fn b(&self, x: f64) -> f64 {
        self.beta * x + self.c
    }

    pub fn a(&self, x: f64) -> f64 {
        match self.case {
            ContinuumCase::LinearA => self.alpha * x,
            ContinuumCase::ConstantA => self.alpha,
        }
    }
}

/// `C` and `P` at one time, with their logarithms (`ln 0 = −∞`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumValue {
    pub log_c: f64,
    pub log_p: f64,
}

impl ContinuumValue {
    pub fn c(&self) -> f64 {
        self.log_c.exp()
    }

    pub fn p(&self) -> f64 {
        self.log_p.exp()
    }
}

/// `ln((e^{2βt} − 1)/β · c)`.
fn log_growth(beta: f64, c: f64, t: f64) -> f64 {
    let z = 2.0 * beta * t;
    if z == 0.0 {
        return f64::NEG_INFINITY;
    }
    (c / beta).ln() + z + (-(-z).exp()).ln_1p()
}

/// The closed forms exactly as printed, with the offset `c` restored where
/// the printed derivation carries it.
///
/// Case `LinearA`: `C = (c/β)(e^{2βt}−1)·exp[(2αc/β)((1−e^{2βt})+5t)]`,
/// `P = exp[(2αc/β)((1−e^{−2βt})+5t)]`.
/// Case `ConstantA`: `C = (c/β)(e^{2βt}−1)e^{−2αt}`, `P = e^{−2αt}`.
pub fn analytic_c_p(spec: &ContinuumSpec, t: f64) -> Result<ContinuumValue> {
    spec.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("t must be finite and >= 0, got {t}")));
    }
    let (alpha, beta, c) = (spec.alpha, spec.beta, spec.c);
    if 2.0 * beta * t > MAX_GROWTH_EXPONENT {
        return Err(Error::TooLarge(format!("2βt = {} overflows the closed forms", 2.0 * beta * t)));
    }
    let growth = log_growth(beta, c, t);
    Ok(match spec.case {
        ContinuumCase::LinearA => {
            let k = 2.0 * alpha * c / beta;
            let e_plus = (2.0 * beta * t).exp();
            let e_minus = (-2.0 * beta * t).exp();
            ContinuumValue {
                log_c: growth + k * ((1.0 - e_plus) + 5.0 * t),
                log_p: k * ((1.0 - e_minus) + 5.0 * t),
            }
        }
        ContinuumCase::ConstantA => ContinuumValue {
            log_c: growth - 2.0 * alpha * t,
            log_p: -2.0 * alpha * t,
        },
    })
}

/// `P` for `a = αx`, `b = βx + c` obtained by integrating along the
/// characteristic by hand: `exp[(2αc/β)((1−e^{2βt})/(2β) + t)]`.
pub fn linear_a_probability(spec: &ContinuumSpec, t: f64) -> f64 {
    let k = 2.0 * spec.alpha * spec.c / spec.beta;
    (k * ((1.0 - (2.0 * spec.beta * t).exp()) / (2.0 * spec.beta) + t)).exp()
}

struct Characteristic<'a> {
    b: &'a dyn Fn(f64) -> f64,
    a: &'a dyn Fn(f64) -> f64,
}

impl System<f64, Vector2<f64>> for Characteristic<'_> {
    fn system(&self, _y: f64, state: &Vector2<f64>, d: &mut Vector2<f64>) {
        d[0] = (self.b)(state[0]);
        d[1] = (self.a)(state[0]);
    }
}

/// Transports the delta initial condition along `y = 2t`.
///
/// `x(y)` and `A(y)` are integrated together with an adaptive 8th-order
/// Dormand–Prince scheme at relative tolerance `rtol`.
pub fn characteristics_solver(
    b: &dyn Fn(f64) -> f64,
    a: &dyn Fn(f64) -> f64,
    t_grid: &[f64],
    rtol: f64,
) -> Result<Vec<ContinuumValue>> {
    if !(rtol > 0.0) {
        return Err(Error::InvalidArgument(format!("rtol must be positive, got {rtol}")));
    }
    if t_grid.first().is_some_and(|&t| t < 0.0) || t_grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidArgument("time grid must be non-negative and non-decreasing".into()));
    }
    let sys = Characteristic { b, a };
    let mut state = Vector2::new(0.0, 0.0);
    let mut y = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    for (i, &t) in t_grid.iter().enumerate() {
        let y_next = 2.0 * t;
        if y_next > y {
            let mut stepper = Dop853::new(
                Characteristic { b: sys.b, a: sys.a },
                y,
                y_next,
                y_next - y,
                state,
                rtol,
                rtol * 1e-3,
            );
            stepper
                .integrate()
                .map_err(|e| Error::NoConvergence(format!("characteristic integration failed: {e}")))?;
            let last = *stepper
                .y_out()
                .last()
                .ok_or_else(|| Error::NoConvergence("characteristic integration produced no output".into()))?;
            if !last.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { context: "characteristic", step: i });
            }
            state = last;
            y = y_next;
        }
        let (x, big_a) = (state[0], state[1]);
        let bx = b(x);
        if !(bx > 0.0) {
            return Err(Error::InvalidArgument(format!("b(x) = {bx} is not positive at x = {x}")));
        }
        if a(x) < 0.0 {
            return Err(Error::InvalidArgument(format!("a(x) = {} is negative at x = {x}", a(x))));
        }
        out.push(ContinuumValue {
            log_c: x.ln() - big_a,
            log_p: -big_a,
        });
    }
    Ok(out)
}

/// Solver run for a `ContinuumSpec`.
pub fn solve_spec(spec: &ContinuumSpec, t_grid: &[f64], rtol: f64) -> Result<Vec<ContinuumValue>> {
    spec.validate()?;
    let b = |x: f64| spec.b(x);
    let a = |x: f64| spec.a(x);
    characteristics_solver(&b, &a, t_grid, rtol)
}

/// One line of the closed-form versus characteristics comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub t: f64,
    pub c_paper: f64,
    pub p_paper: f64,
    pub c_char: f64,
    pub p_char: f64,
    pub rel_c: f64,
    pub rel_p: f64,
}

/// `|u/v − 1|` from logarithms; zero when both vanish.
pub fn log_rel_diff(log_u: f64, log_v: f64) -> f64 {
    if log_u == f64::NEG_INFINITY && log_v == f64::NEG_INFINITY {
        0.0
    } else {
        (log_u - log_v).exp_m1().abs()
    }
}

pub fn continuum_vs_paper_report(spec: &ContinuumSpec, t_grid: &[f64], rtol: f64) -> Result<Vec<ReportRow>> {
    let solved = solve_spec(spec, t_grid, rtol)?;
    t_grid
        .iter()
        .zip(&solved)
        .map(|(&t, s)| {
            let p = analytic_c_p(spec, t)?;
            Ok(ReportRow {
                t,
                c_paper: p.c(),
                p_paper: p.p(),
                c_char: s.c(),
                p_char: s.p(),
                rel_c: log_rel_diff(p.log_c, s.log_c),
                rel_p: log_rel_diff(p.log_p, s.log_p),
            })
        })
        .collect()
}

/// The chain the continuum profile was read off: `b_n = b(n)` for
/// `n = 1..k−1` and `a_n = i a(n)` for `n = 0..k−1`, with `c_n = b_n`.
/// Its complexity differs quantitatively from the continuum one; only the
/// uniform-damping factor `P = exp(−2αt)` is shared exactly.
pub fn discrete_chain(spec: &ContinuumSpec, k: usize) -> Result<TridiagonalData> {
    spec.validate()?;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need K >= 2, got {k}")));
    }
    let a = (0..k).map(|n| C64::new(0.0, spec.a(n as f64))).collect();
    let b: Vec<C64> = (1..k).map(|n| C64::new(spec.b(n as f64), 0.0)).collect();
    TridiagonalData::from_coefficients(a, b.clone(), b)
}
