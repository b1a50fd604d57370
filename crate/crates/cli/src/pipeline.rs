//! Stages behind the subcommands. A `Pipeline` keeps the coefficients and the
//! moment series of the current run in memory so that later stages reuse them.

use std::fs;
use std::path::Path;

use krylovflow::bilanczos::{
    bilanczos, check_open_structure, hermitian_lanczos, BiLanczosConfig, Termination, TridiagonalData,
};
use krylovflow::bound::{dispersion_bound_check, mandelstam_tamm_tau, saturating_coefficients, Derivatives};
use krylovflow::chain::{direct_evolution_oracle, evolve_chain, moments, uniform_grid, MomentSeries};
use krylovflow::continuum::{continuum_vs_paper_report, discrete_chain, solve_spec, ContinuumCase};
use krylovflow::filter::{remove_outliers, smooth};
use krylovflow::lindblad::{build_lindbladian, build_liouvillian_closed, uniform_seed, vectorize, OperatorVector, Superoperator};
use krylovflow::matrix::{ComplexMatrix, C64};
use krylovflow::spin::{build_jump_operators, build_tfim};
use log::{info, warn};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, SeedKind, ORACLE_MAX_SITES};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, Output};

pub const COEFFICIENTS_CSV: &str = "coefficients.csv";
pub const STRUCTURE_JSON: &str = "structure.json";
pub const MOMENTS_CSV: &str = "moments.csv";
pub const EVOLVE_JSON: &str = "evolve.json";
pub const BOUND_CSV: &str = "bound.csv";
pub const BOUND_JSON: &str = "bound.json";
pub const ORACLE_CSV: &str = "oracle.csv";
pub const ORACLE_JSON: &str = "oracle.json";
pub const CONTINUUM_CSV: &str = "continuum.csv";
pub const CONTINUUM_JSON: &str = "continuum.json";
pub const CONTINUUM_DISCRETE_CSV: &str = "continuum_discrete.csv";
pub const SATURATION_CSV: &str = "saturation.csv";
pub const SATURATION_JSON: &str = "saturation.json";
pub const FILTERED_B_CSV: &str = "filtered_b.csv";
pub const FILTERED_A_CSV: &str = "filtered_a.csv";
pub const FILTER_JSON: &str = "filter.json";

const COEFFICIENT_HEADER: [&str; 7] = ["n", "a_re", "a_im", "b_re", "b_im", "c_re", "c_im"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Lanczos,
    Evolve,
    Bound,
    Oracle,
    Continuum,
    Saturation,
    Filter,
    Full,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Lanczos => "lanczos",
            Command::Evolve => "evolve",
            Command::Bound => "bound",
            Command::Oracle => "oracle",
            Command::Continuum => "continuum",
            Command::Saturation => "saturation",
            Command::Filter => "filter",
            Command::Full => "full",
        }
    }
}

/// The generator for the configured model: the Hermitian commutator when
/// there are no jumps, the Lindbladian otherwise.
pub fn build_generator(cfg: &RunConfig) -> CliResult<Superoperator> {
    let h = build_tfim(&cfg.model)?;
    let jumps = build_jump_operators(&cfg.model)?;
    let jumps: Vec<ComplexMatrix> = jumps.into_iter().filter(|l| l.max_abs() > 0.0).collect();
    Ok(if jumps.is_empty() {
        build_liouvillian_closed(&h)?
    } else {
        build_lindbladian(&h, &jumps)?
    })
}

#[derive(Deserialize)]
struct SeedFile {
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Option<Vec<Vec<f64>>>,
}

fn load_seed(path: &Path, d: usize) -> CliResult<OperatorVector> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: SeedFile = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let shape_ok = |m: &Vec<Vec<f64>>| m.len() == d && m.iter().all(|r| r.len() == d);
    if !shape_ok(&file.re) || file.im.as_ref().is_some_and(|m| !shape_ok(m)) {
        return Err(CliError::Config(format!("{}: seed must be a {d}x{d} matrix", path.display())));
    }
    let mut m = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let im = file.im.as_ref().map_or(0.0, |x| x[i][j]);
            m[(i, j)] = C64::new(file.re[i][j], im);
        }
    }
    Ok(vectorize(&m)?.normalized()?)
}

pub fn build_seed(cfg: &RunConfig) -> CliResult<OperatorVector> {
    let d = cfg.model.dim();
    match &cfg.seed {
        SeedKind::Uniform => Ok(uniform_seed(d)?),
        SeedKind::Custom { path } => load_seed(path, d),
    }
}

/// Tridiagonalizes the configured generator and enforces the residual limits.
pub fn tridiagonalize(cfg: &RunConfig, lcfg: &BiLanczosConfig) -> CliResult<TridiagonalData> {
    let l = build_generator(cfg)?;
    let seed = build_seed(cfg)?;
    let tri = if l.is_hermitian() {
        hermitian_lanczos(&l, &seed, lcfg)?
    } else {
        bilanczos(&l, &seed, &seed, lcfg)?
    };
    check_residuals(cfg, &tri)?;
    Ok(tri)
}

fn check_residuals(cfg: &RunConfig, tri: &TridiagonalData) -> CliResult<()> {
    if let Some(r) = tri.residual_biortho {
        if !(r <= cfg.checks.max_biortho_residual) {
            return Err(krylovflow::Error::Invariant(format!(
                "bi-orthogonality residual {r:e} exceeds {:e}",
                cfg.checks.max_biortho_residual
            ))
            .into());
        }
    }
    if let Some(r) = tri.residual_tridiag {
        if !(r <= cfg.checks.max_tridiag_residual) {
            return Err(krylovflow::Error::Invariant(format!(
                "tridiagonal residual {r:e} exceeds {:e}",
                cfg.checks.max_tridiag_residual
            ))
            .into());
        }
    }
    Ok(())
}

fn coefficient_rows(tri: &TridiagonalData) -> Vec<Vec<String>> {
    (0..tri.k())
        .map(|n| {
            let mut row = vec![n.to_string(), fmt_f64(tri.a[n].re), fmt_f64(tri.a[n].im)];
            if n == 0 {
                row.extend(std::iter::repeat_n(String::new(), 4));
            } else {
                let (b, c) = (tri.b[n - 1], tri.c[n - 1]);
                row.extend([fmt_f64(b.re), fmt_f64(b.im), fmt_f64(c.re), fmt_f64(c.im)]);
            }
            row
        })
        .collect()
}

/// Reads a coefficients table written by the `lanczos` stage. Row `n` holds
/// `a_n, b_n, c_n`; the `b` and `c` fields of row 0 are blank.
pub fn read_coefficients(path: &Path) -> CliResult<TridiagonalData> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Csv {
        path: path.into(),
        message: e.to_string(),
    })?;
    let bad = |message: String| CliError::Csv {
        path: path.into(),
        message,
    };
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != COEFFICIENT_HEADER {
        return Err(bad(format!("expected header {}", COEFFICIENT_HEADER.join(","))));
    }
    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let width = if i == 0 { 2 } else { 6 };
        let v: Vec<f64> = rec
            .iter()
            .skip(1)
            .take(width)
            .map(|s| s.parse::<f64>().map_err(|e| bad(format!("row {i}: {e}"))))
            .collect::<CliResult<_>>()?;
        if v.len() != width {
            return Err(bad(format!("row {i}: expected {width} numeric fields")));
        }
        a.push(C64::new(v[0], v[1]));
        if i > 0 {
            b.push(C64::new(v[2], v[3]));
            c.push(C64::new(v[4], v[5]));
        }
    }
    Ok(TridiagonalData::from_coefficients(a, b, c)?)
}

/// `(t_peak, C_peak, C_final, (C_peak − C_final) / C_peak)`.
pub fn complexity_profile(m: &MomentSeries) -> Value {
    let Some((i_peak, &c_peak)) = m.c.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)) else {
        return Value::Null;
    };
    let c_final = *m.c.last().unwrap();
    json!({
        "t_peak": m.t[i_peak],
        "c_peak": c_peak,
        "t_final": m.t.last(),
        "c_final": c_final,
        "decay_fraction": if c_peak > 0.0 { (c_peak - c_final) / c_peak } else { 0.0 },
    })
}

/// `|x − y| / max(|y|, 1e−12 · max|y|)`.
pub fn relative_gaps(x: &[f64], y: &[f64]) -> Vec<f64> {
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max) * 1e-12;
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = (a - b).abs();
            if d == 0.0 {
                0.0
            } else {
                d / b.abs().max(scale).max(f64::MIN_POSITIVE)
            }
        })
        .collect()
}

fn termination_name(t: Termination) -> Value {
    serde_json::to_value(t).unwrap_or(Value::Null)
}

pub struct Pipeline {
    cfg: RunConfig,
    out: Output,
    echo: Value,
    tri: Option<TridiagonalData>,
    moments: Option<(MomentSeries, usize)>,
    quiet: bool,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, quiet: bool) -> CliResult<Self> {
        let echo = serde_json::to_value(&cfg).expect("config serializes");
        let out = Output::new(cfg.output_dir.clone(), echo.clone())?;
        Ok(Self {
            cfg,
            out,
            echo,
            tri: None,
            moments: None,
            quiet,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn output_dir(&self) -> &Path {
        self.out.dir()
    }

    fn report(&self, line: String) {
        if !self.quiet {
            println!("{line}");
        }
    }

    pub fn run(&mut self, cmd: Command) -> CliResult<()> {
        match cmd {
            Command::Lanczos => self.lanczos(),
            Command::Evolve => self.evolve(),
            Command::Bound => self.bound(),
            Command::Oracle => self.oracle(),
            Command::Continuum => self.continuum(),
            Command::Saturation => self.saturation(),
            Command::Filter => self.filter(),
            Command::Full => self.full(),
        }
    }

    pub fn full(&mut self) -> CliResult<()> {
        self.lanczos()?;
        self.evolve()?;
        self.bound()?;
        if self.cfg.model.n_sites <= ORACLE_MAX_SITES {
            self.oracle()?;
        } else {
            info!("skipping oracle: n_sites > {ORACLE_MAX_SITES}");
        }
        if self.cfg.continuum.is_some() {
            self.continuum()?;
        }
        self.saturation()?;
        let k = self.tri.as_ref().map_or(0, |t| t.k());
        if k > self.cfg.filter.outlier_window.max(self.cfg.filter.smooth_window) {
            self.filter()?;
        } else {
            info!("skipping filter: only {k} coefficients");
        }
        Ok(())
    }

    pub fn lanczos(&mut self) -> CliResult<()> {
        let tri = tridiagonalize(&self.cfg, &self.cfg.bilanczos)?;
        let structure = check_open_structure(&tri, self.cfg.checks.structure_tol, self.cfg.checks.structure_n);
        self.out.write_csv(COEFFICIENTS_CSV, "lanczos", &COEFFICIENT_HEADER, &coefficient_rows(&tri))?;
        let summary = json!({
            "k": tri.k(),
            "termination": termination_name(tri.termination),
            "residual_biortho": tri.residual_biortho,
            "residual_tridiag": tri.residual_tridiag,
            "b1": [tri.b1().re, tri.b1().im],
            "label": if structure.closed_structure {
                "closed structure"
            } else if structure.verdict {
                "dissipative structure"
            } else {
                "no recognized structure"
            },
            "structure": structure,
        });
        self.out.write_json(STRUCTURE_JSON, "lanczos", &summary)?;
        self.report(format!(
            "lanczos: K = {}, {}, biortho {:.1e}, tridiag {:.1e}",
            tri.k(),
            summary["label"].as_str().unwrap_or(""),
            tri.residual_biortho.unwrap_or(f64::NAN),
            tri.residual_tridiag.unwrap_or(f64::NAN)
        ));
        self.tri = Some(tri);
        self.moments = None;
        Ok(())
    }

    fn cache_matches(&self, name: &str) -> bool {
        let Some(meta) = self.out.read_meta(name) else {
            return false;
        };
        ["model", "seed", "bilanczos"]
            .iter()
            .all(|k| meta.config.get(k) == self.echo.get(k))
    }

    fn load_cached_coefficients(&self) -> Option<TridiagonalData> {
        if !self.cache_matches(COEFFICIENTS_CSV) || !self.cache_matches(STRUCTURE_JSON) {
            return None;
        }
        let mut tri = read_coefficients(&self.out.path(COEFFICIENTS_CSV)).ok()?;
        let text = fs::read_to_string(self.out.path(STRUCTURE_JSON)).ok()?;
        let summary: Value = serde_json::from_str(&text).ok()?;
        tri.termination = serde_json::from_value(summary.get("termination")?.clone()).ok()?;
        Some(tri)
    }

    /// Coefficients from memory, from a matching earlier run, or freshly computed.
    fn ensure_coefficients(&mut self) -> CliResult<()> {
        if self.tri.is_some() {
            return Ok(());
        }
        if let Some(tri) = self.load_cached_coefficients() {
            info!("reusing {}", self.out.path(COEFFICIENTS_CSV).display());
            self.tri = Some(tri);
            return Ok(());
        }
        self.lanczos()
    }

    pub fn coefficients(&mut self) -> CliResult<&TridiagonalData> {
        self.ensure_coefficients()?;
        Ok(self.tri.as_ref().expect("coefficients present"))
    }

    pub fn evolve(&mut self) -> CliResult<()> {
        self.ensure_coefficients()?;
        let tri = self.tri.as_ref().expect("coefficients present");
        let grid = uniform_grid(self.cfg.t_max, self.cfg.n_samples)?;
        let traj = evolve_chain(tri, &grid, &self.cfg.step)?;
        let trusted = traj.trusted_len();
        let m = moments(&traj);
        let drift = m.p.iter().map(|p| (p - 1.0).abs()).fold(0.0, f64::max);
        if self.cfg.model.is_closed() && drift > self.cfg.checks.max_probability_drift {
            return Err(krylovflow::Error::Invariant(format!(
                "closed run loses probability: max |P - 1| = {drift:e}"
            ))
            .into());
        }
        let rows: Vec<Vec<String>> = (0..m.len())
            .map(|i| {
                [m.t[i], m.c[i], m.p[i], m.m2[i], m.ctilde[i], m.dc[i], m.dp[i], m.c_imag[i], m.p_biorth[i], m.tail_mass[i]]
                    .iter()
                    .map(|&x| fmt_f64(x))
                    .collect()
            })
            .collect();
        self.out.write_csv(
            MOMENTS_CSV,
            "evolve",
            &["t", "C", "P", "M2", "Ctilde", "dC", "dP", "C_imag", "P_biorth", "tail_mass"],
            &rows,
        )?;
        let summary = json!({
            "samples": m.len(),
            "requested_samples": grid.len(),
            "trusted_samples": trusted,
            "substeps": traj.substeps,
            "k": tri.k(),
            "max_probability_drift": drift,
            "max_norm_gap": m.max_norm_gap(),
            "complexity": complexity_profile(&m),
        });
        self.out.write_json(EVOLVE_JSON, "evolve", &summary)?;
        if trusted < m.len() {
            warn!("chain truncation affects samples from t = {}", m.t[trusted.min(m.len() - 1)]);
        }
        self.report(format!(
            "evolve: {} samples, {} trusted, max |P-1| = {:.1e}",
            m.len(),
            trusted,
            drift
        ));
        self.moments = Some((m, trusted));
        Ok(())
    }

    pub fn moments(&mut self) -> CliResult<&MomentSeries> {
        if self.moments.is_none() {
            self.evolve()?;
        }
        Ok(&self.moments.as_ref().expect("moments present").0)
    }

    pub fn bound(&mut self) -> CliResult<()> {
        if self.moments.is_none() {
            self.evolve()?;
        }
        let tri = self.tri.as_ref().expect("coefficients present");
        let (m, trusted) = self.moments.as_ref().expect("moments present");
        let b1 = tri.b1();
        let report = dispersion_bound_check(m, b1, self.cfg.checks.bound_tol, Derivatives::Exact)?;
        let rows: Vec<Vec<String>> = (0..report.t.len())
            .map(|i| {
                [
                    report.t[i],
                    report.lhs[i],
                    report.rhs[i],
                    report.margin[i],
                    report.tau_k[i],
                    report.saturation_ratio[i],
                    report.dc[i],
                ]
                .iter()
                .map(|&x| fmt_f64(x))
                .collect()
            })
            .collect();
        self.out.write_csv(
            BOUND_CSV,
            "bound",
            &["t", "lhs", "rhs", "margin", "tau_K", "ratio", "dC"],
            &rows,
        )?;
        let mt = self.cfg.model.is_closed().then(|| {
            let mt = mandelstam_tamm_tau(&report, b1.norm(), self.cfg.checks.mt_floor, self.cfg.checks.mt_tol);
            json!({
                "min_product": mt.min_product,
                "samples_used": mt.valid.iter().filter(|v| **v).count(),
                "verdict": mt.verdict,
            })
        });
        let summary = report.summary();
        let out = json!({
            "summary": summary,
            "b1": [b1.re, b1.im],
            "trusted_samples": trusted,
            "mandelstam_tamm": mt,
            "complexity": complexity_profile(m),
        });
        self.out.write_json(BOUND_JSON, "bound", &out)?;
        self.report(format!(
            "bound: verdict {}, max violation {:.3e} (relative {:.3e}), {} violating samples",
            summary.verdict, summary.max_violation, summary.relative_violation, summary.violations
        ));
        Ok(())
    }

    pub fn oracle(&mut self) -> CliResult<()> {
        if self.cfg.model.n_sites > ORACLE_MAX_SITES {
            return Err(CliError::Usage(format!(
                "oracle is limited to n_sites <= {ORACLE_MAX_SITES}, config has {}",
                self.cfg.model.n_sites
            )));
        }
        let reuse = self.tri.as_ref().is_some_and(|t| t.has_bases());
        let fresh;
        let tri = if reuse {
            self.tri.as_ref().expect("coefficients present")
        } else {
            let lcfg = BiLanczosConfig {
                store_bases: true,
                ..self.cfg.bilanczos.clone()
            };
            fresh = tridiagonalize(&self.cfg, &lcfg)?;
            &fresh
        };
        let l = build_generator(&self.cfg)?;
        let seed = build_seed(&self.cfg)?;
        let grid = uniform_grid(self.cfg.t_max, self.cfg.n_samples)?;
        let direct = direct_evolution_oracle(&l, &seed, tri, &grid)?;
        let chain = moments(&evolve_chain(tri, &grid, &self.cfg.step)?);
        let n = chain.len().min(direct.len());
        let rel_c = relative_gaps(&chain.c[..n], &direct.c[..n]);
        let rel_p = relative_gaps(&chain.p[..n], &direct.p[..n]);
        let rows: Vec<Vec<String>> = (0..n)
            .map(|i| {
                [chain.t[i], chain.c[i], direct.c[i], chain.p[i], direct.p[i], rel_c[i], rel_p[i]]
                    .iter()
                    .map(|&x| fmt_f64(x))
                    .collect()
            })
            .collect();
        self.out.write_csv(
            ORACLE_CSV,
            "oracle",
            &["t", "C_chain", "C_direct", "P_chain", "P_direct", "relC", "relP"],
            &rows,
        )?;
        let t_window = self.cfg.checks.oracle_t_max.unwrap_or(f64::INFINITY);
        let in_window = |v: &[f64]| {
            v.iter()
                .zip(&chain.t)
                .filter(|(_, t)| **t <= t_window)
                .map(|(x, _)| *x)
                .fold(0.0, f64::max)
        };
        let (max_c, max_p) = (in_window(&rel_c), in_window(&rel_p));
        self.out.write_json(
            ORACLE_JSON,
            "oracle",
            &json!({
                "samples": n,
                "t_window": self.cfg.checks.oracle_t_max,
                "max_rel_c": max_c,
                "max_rel_p": max_p,
            }),
        )?;
        self.report(format!("oracle: max rel C {max_c:.2e}, max rel P {max_p:.2e}"));
        Ok(())
    }

    pub fn continuum(&mut self) -> CliResult<()> {
        let Some(ccfg) = self.cfg.continuum.clone() else {
            return Err(CliError::Usage("config has no [continuum] section".into()));
        };
        let spec = ccfg.spec();
        let grid = uniform_grid(ccfg.t_max, ccfg.n_samples)?;
        let rows = continuum_vs_paper_report(&spec, &grid, ccfg.rtol)?;
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                [r.t, r.c_paper, r.p_paper, r.c_char, r.p_char, r.rel_c, r.rel_p]
                    .iter()
                    .map(|&x| fmt_f64(x))
                    .collect()
            })
            .collect();
        self.out.write_csv(
            CONTINUUM_CSV,
            "continuum",
            &["t", "C_paper", "P_paper", "C_char", "P_char", "relC", "relP"],
            &table,
        )?;
        let undamped = krylovflow::continuum::ContinuumSpec { alpha: 0.0, ..spec.clone() };
        let free = solve_spec(&undamped, &grid, ccfg.rtol)?;
        let limit_gap = grid
            .iter()
            .zip(&free)
            .skip(1)
            .map(|(t, v)| {
                let exact = spec.c / spec.beta * (2.0 * spec.beta * t).exp_m1();
                (v.c() / exact - 1.0).abs().max((v.p() - 1.0).abs())
            })
            .fold(0.0, f64::max);
        let p_exact_gap = (spec.case == ContinuumCase::ConstantA).then(|| {
            rows.iter()
                .map(|r| (r.p_char - (-2.0 * spec.alpha * r.t).exp()).abs())
                .fold(0.0, f64::max)
        });
        let max = |f: fn(&krylovflow::continuum::ReportRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
        let (max_c, max_p) = (max(|r| r.rel_c), max(|r| r.rel_p));
        let discrete = match ccfg.discrete_k {
            Some(k) => {
                let traj = evolve_chain(&discrete_chain(&spec, k)?, &grid, &self.cfg.step)?;
                let trusted = traj.trusted_len();
                let m = moments(&traj);
                let table: Vec<Vec<String>> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        [r.t, r.c_char, r.p_char, m.c[i], m.p[i], m.tail_mass[i]]
                            .iter()
                            .map(|&x| fmt_f64(x))
                            .collect()
                    })
                    .collect();
                self.out.write_csv(
                    CONTINUUM_DISCRETE_CSV,
                    "continuum",
                    &["t", "C_char", "P_char", "C_chain", "P_chain", "tail_mass"],
                    &table,
                )?;
                json!({ "k": k, "trusted_samples": trusted })
            }
            None => Value::Null,
        };
        self.out.write_json(
            CONTINUUM_JSON,
            "continuum",
            &json!({
                "spec": spec,
                "samples": rows.len(),
                "max_rel_c": max_c,
                "max_rel_p": max_p,
                "alpha_zero_limit_max_rel": limit_gap,
                "p_exponential_max_abs": p_exact_gap,
                "discrete_chain": discrete,
            }),
        )?;
        self.report(format!(
            "continuum: max rel C {max_c:.2e}, max rel P {max_p:.2e}, alpha->0 limit {limit_gap:.1e}"
        ));
        Ok(())
    }

    pub fn saturation(&mut self) -> CliResult<()> {
        let s = self.cfg.saturation.clone();
        let tri = saturating_coefficients(s.alpha0, s.gamma0, s.k)?;
        let grid = uniform_grid(s.t_max, s.n_samples)?;
        let traj = evolve_chain(&tri, &grid, &self.cfg.step)?;
        let trusted = traj.trusted_len();
        let m = moments(&traj).prefix(trusted);
        let report = dispersion_bound_check(&m, tri.b1(), self.cfg.checks.bound_tol, Derivatives::Exact)?;
        let rows: Vec<Vec<String>> = (0..m.len())
            .map(|i| {
                [m.t[i], m.c[i], m.p[i], report.lhs[i], report.rhs[i], report.saturation_ratio[i], m.tail_mass[i]]
                    .iter()
                    .map(|&x| fmt_f64(x))
                    .collect()
            })
            .collect();
        self.out.write_csv(
            SATURATION_CSV,
            "saturation",
            &["t", "C", "P", "lhs", "rhs", "ratio", "tail_mass"],
            &rows,
        )?;
        let range = report.saturation_range(0..m.len());
        let verdict = range.is_some_and(|(lo, hi)| lo >= s.ratio_min && hi <= s.ratio_max);
        self.out.write_json(
            SATURATION_JSON,
            "saturation",
            &json!({
                "k": s.k,
                "samples": grid.len(),
                "trusted_samples": trusted,
                "ratio_range": range,
                "accepted": [s.ratio_min, s.ratio_max],
                "verdict": verdict,
            }),
        )?;
        let range_text = match range {
            Some((lo, hi)) => format!("[{lo:.12}, {hi:.15}]"),
            None => "n/a (rhs never positive)".to_string(),
        };
        self.report(format!(
            "saturation: {trusted}/{} trusted samples, lhs/rhs in {range_text}, verdict {verdict}",
            grid.len()
        ));
        Ok(())
    }

    pub fn filter(&mut self) -> CliResult<()> {
        let loaded;
        let tri = match &self.cfg.filter_input {
            Some(path) => {
                loaded = read_coefficients(path)?;
                &loaded
            }
            None => self.coefficients()?,
        };
        let b: Vec<f64> = tri.b.iter().map(|z| z.norm()).collect();
        let a: Vec<f64> = tri.a.iter().map(|z| z.norm()).collect();
        let fcfg = self.cfg.filter.clone();
        let mut summary = serde_json::Map::new();
        for (label, series, offset, file) in [("b", &b, 1usize, FILTERED_B_CSV), ("a", &a, 0, FILTERED_A_CSV)] {
            let (cleaned, outliers) = remove_outliers(series, &fcfg)?;
            let smoothed = smooth(&cleaned, &fcfg)?;
            let (_, second) = remove_outliers(&cleaned, &fcfg)?;
            let rows: Vec<Vec<String>> = (0..series.len())
                .map(|i| {
                    vec![
                        (i + offset).to_string(),
                        fmt_f64(series[i]),
                        fmt_f64(cleaned[i]),
                        fmt_f64(smoothed[i]),
                    ]
                })
                .collect();
            self.out.write_csv(file, "filter", &["n", "raw", "cleaned", "smoothed"], &rows)?;
            summary.insert(
                label.into(),
                json!({
                    "length": series.len(),
                    "outliers": outliers.iter().map(|i| i + offset).collect::<Vec<_>>(),
                    "second_pass_outliers": second.iter().map(|i| i + offset).collect::<Vec<_>>(),
                }),
            );
        }
        summary.insert("filter".into(), serde_json::to_value(&fcfg).expect("filter config serializes"));
        self.out.write_json(FILTER_JSON, "filter", &Value::Object(summary.clone()))?;
        self.report(format!(
            "filter: {} outliers in |b_n|, {} in |a_n|",
            summary["b"]["outliers"].as_array().map_or(0, |v| v.len()),
            summary["a"]["outliers"].as_array().map_or(0, |v| v.len())
        ));
        Ok(())
    }
}
