//! Browser bindings: each entry point runs a small computation and returns
//! its curves as a JSON string for the page to plot.

use krylovflow::bilanczos::{bilanczos, hermitian_lanczos, BiLanczosConfig};
use krylovflow::bound::{dispersion_bound_check, saturating_coefficients, Derivatives};
use krylovflow::chain::{evolve_chain, moments, uniform_grid, StepControl};
use krylovflow::continuum::{continuum_vs_paper_report, ContinuumCase, ContinuumSpec};
use krylovflow::lindblad::{build_lindbladian, build_liouvillian_closed, uniform_seed};
use krylovflow::spin::{build_jump_operators, build_tfim, ModelSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest chain the page may request; bigger runs belong on the command line.
pub const DEMO_MAX_SITES: usize = 3;
const MAX_SAMPLES: usize = 2000;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsValue> {
    serde_json::to_string(v).map_err(js_err)
}

fn check_samples(n: usize) -> Result<(), JsValue> {
    if n > MAX_SAMPLES {
        return Err(js_err(format!("at most {MAX_SAMPLES} samples")));
    }
    Ok(())
}

#[derive(Serialize)]
struct ContinuumCurves {
    t: Vec<f64>,
    c_closed: Vec<f64>,
    p_closed: Vec<f64>,
    c_char: Vec<f64>,
    p_char: Vec<f64>,
}

/// Closed forms against the characteristics solver; `case` is
/// `"constant_a"` or `"linear_a"`.
#[wasm_bindgen]
pub fn continuum_curves(case: &str, alpha: f64, beta: f64, t_max: f64, n_samples: usize) -> Result<String, JsValue> {
    check_samples(n_samples)?;
    let case = match case {
        "constant_a" => ContinuumCase::ConstantA,
        "linear_a" => ContinuumCase::LinearA,
        other => return Err(js_err(format!("unknown case {other:?}"))),
    };
    let spec = ContinuumSpec::new(case, alpha, beta);
    let grid = uniform_grid(t_max, n_samples).map_err(js_err)?;
    let rows = continuum_vs_paper_report(&spec, &grid, 1e-12).map_err(js_err)?;
    to_json(&ContinuumCurves {
        t: rows.iter().map(|r| r.t).collect(),
        c_closed: rows.iter().map(|r| r.c_paper).collect(),
        p_closed: rows.iter().map(|r| r.p_paper).collect(),
        c_char: rows.iter().map(|r| r.c_char).collect(),
        p_char: rows.iter().map(|r| r.p_char).collect(),
    })
}

#[derive(Serialize)]
struct BoundCurves {
    t: Vec<f64>,
    c: Vec<f64>,
    p: Vec<f64>,
    lhs: Vec<f64>,
    rhs: Vec<f64>,
    trusted: usize,
}

/// Bound check on the chain `b_n = √(α₀ n(n−1)/4 + γ₀ n/2)`, cut at the
/// first sample the truncation reaches.
#[wasm_bindgen]
pub fn saturation_demo(alpha0: f64, gamma0: f64, k: usize, t_max: f64, n_samples: usize) -> Result<String, JsValue> {
    check_samples(n_samples)?;
    if k > 2000 {
        return Err(js_err("at most 2000 chain sites"));
    }
    let tri = saturating_coefficients(alpha0, gamma0, k).map_err(js_err)?;
    let grid = uniform_grid(t_max, n_samples).map_err(js_err)?;
    let traj = evolve_chain(&tri, &grid, &StepControl::default()).map_err(js_err)?;
    let trusted = traj.trusted_len();
    let m = moments(&traj).prefix(trusted);
    let report = dispersion_bound_check(&m, tri.b1(), 1e-6, Derivatives::Exact).map_err(js_err)?;
    to_json(&BoundCurves {
        t: m.t,
        c: m.c,
        p: m.p,
        lhs: report.lhs,
        rhs: report.rhs,
        trusted,
    })
}

#[derive(Serialize)]
struct TfimRun {
    k: usize,
    b_abs: Vec<f64>,
    a_im: Vec<f64>,
    curves: BoundCurves,
}

/// Coefficients, complexity and bound for a small transverse-field Ising chain.
#[wasm_bindgen]
pub fn tfim_demo(
    n_sites: usize,
    g: f64,
    h: f64,
    alpha: f64,
    gamma: f64,
    t_max: f64,
    n_samples: usize,
) -> Result<String, JsValue> {
    check_samples(n_samples)?;
    if n_sites == 0 || n_sites > DEMO_MAX_SITES {
        return Err(js_err(format!("n_sites must be between 1 and {DEMO_MAX_SITES}")));
    }
    let spec = ModelSpec::new(n_sites, g, h).with_dissipation(alpha, gamma);
    let ham = build_tfim(&spec).map_err(js_err)?;
    let seed = uniform_seed(spec.dim()).map_err(js_err)?;
    let cfg = BiLanczosConfig {
        store_bases: false,
        ..BiLanczosConfig::default()
    };
    let tri = if spec.is_closed() {
        let l = build_liouvillian_closed(&ham).map_err(js_err)?;
        hermitian_lanczos(&l, &seed, &cfg).map_err(js_err)?
    } else {
        let jumps = build_jump_operators(&spec).map_err(js_err)?;
        let l = build_lindbladian(&ham, &jumps).map_err(js_err)?;
        bilanczos(&l, &seed, &seed, &cfg).map_err(js_err)?
    };
    let grid = uniform_grid(t_max, n_samples).map_err(js_err)?;
    let traj = evolve_chain(&tri, &grid, &StepControl::default()).map_err(js_err)?;
    let trusted = traj.trusted_len();
    let m = moments(&traj);
    let report = dispersion_bound_check(&m, tri.b1(), 1e-6, Derivatives::Exact).map_err(js_err)?;
    to_json(&TfimRun {
        k: tri.k(),
        b_abs: tri.b.iter().map(|z| z.norm()).collect(),
        a_im: tri.a.iter().map(|z| z.im).collect(),
        curves: BoundCurves {
            t: m.t,
            c: m.c,
            p: m.p,
            lhs: report.lhs,
            rhs: report.rhs,
            trusted,
        },
    })
}
