use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const N3: &str = r#"config_version = 1
t_max = 4.0
n_samples = 41

[model]
n_sites = 3
g = -1.05
h = 0.5
alpha = 0.01
gamma = 0.01

[saturation]
k = 120
t_max = 4.0
n_samples = 41
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_krylovflow"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let idx = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records()
        .map(|r| match &r.unwrap()[idx] {
            "" => f64::NAN,
            s => s.parse().unwrap(),
        })
        .collect()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).expect("JSON error line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn closed_lanczos_reports_closed_structure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "closed.toml",
        &N3.replace("alpha = 0.01\ngamma = 0.01\n", ""),
    );
    let out = run(&["lanczos"], &cfg, &dir.path().join("out"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = read_json(&dir.path().join("out/structure.json"));
    assert_eq!(s["label"], "closed structure");
    assert!(s["structure"]["max_im_a"].as_f64().unwrap() < 1e-10);
    let im_a = column(&dir.path().join("out/coefficients.csv"), "a_im");
    assert!(im_a.iter().all(|x| x.abs() < 1e-10));
}

#[test]
fn continuum_constant_damping_matches() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{N3}\n[continuum]\ncase = \"constant_a\"\nalpha = 3.0\nbeta = 2.0\n");
    let cfg = write_config(dir.path(), "c.toml", &text);
    let out = run(&["continuum"], &cfg, &dir.path().join("out"));
    assert!(out.status.success());
    for col in ["relC", "relP"] {
        let v = column(&dir.path().join("out/continuum.csv"), col);
        assert_eq!(v.len(), 61);
        assert!(v.iter().all(|x| *x < 1e-10), "{col}");
    }
}

#[test]
fn continuum_discrete_chain_shares_constant_damping() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{N3}\n[continuum]\ncase = \"constant_a\"\nalpha = 0.3\nbeta = 0.5\nt_max = 2.0\nn_samples = 21\ndiscrete_k = 300\n"
    );
    let cfg = write_config(dir.path(), "c.toml", &text);
    let out = run(&["continuum"], &cfg, &dir.path().join("out"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = dir.path().join("out/continuum_discrete.csv");
    let (p_char, p_chain) = (column(&table, "P_char"), column(&table, "P_chain"));
    assert_eq!(p_chain.len(), 21);
    for (u, v) in p_chain.iter().zip(&p_char) {
        assert!((u / v - 1.0).abs() < 1e-9);
    }
    let summary = read_json(&dir.path().join("out/continuum.json"));
    assert_eq!(summary["discrete_chain"]["k"], 300);
}

#[test]
fn continuum_without_section_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", N3);
    let out = run(&["continuum"], &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let outdir = dir.path().join("out");

    let unknown = Command::new(env!("CARGO_BIN_EXE_krylovflow")).arg("nonsense").output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));
    assert_eq!(stderr_json(&unknown)["error"], "usage");

    let malformed = write_config(dir.path(), "bad.toml", "config_version = 1\n[model\n");
    let out = run(&["lanczos"], &malformed, &outdir);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "config");

    let big = write_config(dir.path(), "big.toml", &N3.replace("n_sites = 3", "n_sites = 5"));
    assert_eq!(run(&["oracle"], &big, &outdir).status.code(), Some(1));

    let strict = format!("{N3}\n[checks]\nmax_biortho_residual = 0.0\n");
    let strict = write_config(dir.path(), "strict.toml", &strict);
    let out = run(&["lanczos"], &strict, &outdir);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "invariant");
    assert!(!outdir.join("coefficients.csv").exists());

    let stiff = format!("{N3}\n[step]\nrel_tol = 1e-300\nmax_refinements = 1\n");
    let stiff = write_config(dir.path(), "stiff.toml", &stiff);
    let out = run(&["evolve"], &stiff, &outdir);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "numerical");
}

#[test]
fn every_artifact_has_a_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n3.toml", N3);
    let outdir = dir.path().join("out");
    let out = run(&["full"], &cfg, &outdir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut artifacts = 0;
    for entry in fs::read_dir(&outdir).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        assert!(!name.starts_with('.'), "leftover temporary {name}");
        if name.ends_with(".meta.json") {
            continue;
        }
        artifacts += 1;
        let meta = read_json(&outdir.join(format!("{name}.meta.json")));
        assert_eq!(meta["software"], "krylovflow");
        assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(meta["config"]["model"]["n_sites"], 3);
    }
    assert!(artifacts >= 12);
    let text = fs::read_to_string(outdir.join("moments.csv")).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.starts_with("t,C,P,M2,Ctilde,"));
    let bound = fs::read_to_string(outdir.join("bound.csv")).unwrap();
    assert!(bound.starts_with("t,lhs,rhs,margin,tau_K,"));
    let coeff = fs::read_to_string(outdir.join("coefficients.csv")).unwrap();
    assert!(coeff.lines().nth(1).unwrap().ends_with(",,,,"));
}

#[test]
fn stale_coefficients_are_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let outdir = dir.path().join("out");
    let a = write_config(dir.path(), "a.toml", N3);
    assert!(run(&["lanczos"], &a, &outdir).status.success());
    let b1_a = column(&outdir.join("coefficients.csv"), "b_re")[1];

    let b = write_config(dir.path(), "b.toml", &N3.replace("h = 0.5", "h = 0.9"));
    assert!(run(&["bound"], &b, &outdir).status.success());
    let b1_b = column(&outdir.join("coefficients.csv"), "b_re")[1];
    assert!((b1_a - b1_b).abs() > 1e-3);
    let bound = read_json(&outdir.join("bound.json"));
    assert!((bound["b1"][0].as_f64().unwrap() - b1_b).abs() < 1e-15);
}

#[test]
fn cached_coefficients_give_identical_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n3.toml", N3);
    let fresh = dir.path().join("fresh");
    let cached = dir.path().join("cached");
    assert!(run(&["bound"], &cfg, &fresh).status.success());
    assert!(run(&["lanczos"], &cfg, &cached).status.success());
    assert!(run(&["bound"], &cfg, &cached).status.success());
    assert_eq!(
        fs::read(fresh.join("bound.csv")).unwrap(),
        fs::read(cached.join("bound.csv")).unwrap()
    );
}

#[test]
fn custom_uniform_seed_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let row = vec![1.0; 8];
    let seed = serde_json::json!({ "re": vec![row; 8] });
    fs::write(dir.path().join("seed.json"), seed.to_string()).unwrap();
    let custom = format!("{N3}\n[seed]\nkind = \"custom\"\npath = \"seed.json\"\n");
    let custom = write_config(dir.path(), "custom.toml", &custom);
    let plain = write_config(dir.path(), "plain.toml", N3);
    assert!(run(&["lanczos"], &custom, &dir.path().join("c")).status.success());
    assert!(run(&["lanczos"], &plain, &dir.path().join("p")).status.success());
    for col in ["a_im", "b_re"] {
        let x = column(&dir.path().join("c/coefficients.csv"), col);
        let y = column(&dir.path().join("p/coefficients.csv"), col);
        assert_eq!(x.len(), y.len());
        for (u, v) in x.iter().zip(&y).filter(|(u, v)| !(u.is_nan() && v.is_nan())) {
            assert!((u - v).abs() < 1e-9 * (1.0 + v.abs()));
        }
    }
}

#[test]
fn outlier_removal_is_idempotent_on_tfim_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("open3.toml", N3.to_string()),
        ("closed4.toml", N3.replace("n_sites = 3", "n_sites = 4").replace("alpha = 0.01\ngamma = 0.01\n", "")),
        ("open4.toml", N3.replace("n_sites = 3", "n_sites = 4")),
    ] {
        let cfg = write_config(dir.path(), name, &text);
        let outdir = dir.path().join(format!("{name}.out"));
        assert!(run(&["filter"], &cfg, &outdir).status.success());
        let f = read_json(&outdir.join("filter.json"));
        for series in ["a", "b"] {
            assert_eq!(f[series]["second_pass_outliers"].as_array().unwrap().len(), 0, "{name} {series}");
        }
        let n = column(&outdir.join("filtered_b.csv"), "n");
        assert_eq!(n[0], 1.0);
    }
}
