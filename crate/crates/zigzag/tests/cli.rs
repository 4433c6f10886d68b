use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn zigzag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zigzag")).args(args).output().expect("run zigzag")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn eigenvalues(v: &Value) -> Vec<(f64, f64, String)> {
    v["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["re"].as_f64().unwrap(), e["im"].as_f64().unwrap(), e["branch"].as_str().unwrap().to_string()))
        .collect()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn gaussian_gap() {
    let v = json_of(&zigzag(&["spectrum", "--potential", "gaussian:1"]));
    assert!((v["gap"].as_f64().unwrap() - 0.425665).abs() <= 1e-4);
    assert_eq!(v["potential"], "gaussian:1");
    assert_eq!(v["config"]["potential"], "gaussian:1");
    assert!(v["diagnostics"]["zero_present"].as_bool().unwrap());
    assert!(v["diagnostics"]["conjugate_closed"].as_bool().unwrap());
    let ev = eigenvalues(&v);
    assert_eq!((ev[0].0, ev[0].1, ev[0].2.as_str()), (0.0, 0.0, "plus"));
    assert!(ev.iter().any(|e| (e.0 + 0.425665).abs() < 1e-5 && (e.1 - 1.02295).abs() < 1e-5 && e.2 == "minus"));
}

#[test]
fn beta_plot_has_both_branches() {
    let dir = tempfile::tempdir().unwrap();
    let (svg, csv) = (path(dir.path(), "out.svg"), path(dir.path(), "out.csv"));
    let v = json_of(&zigzag(&["spectrum", "--potential", "beta:2.5", "--re-min", "-2", "--plot", &svg, "--csv", &csv]));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
    assert!(!text.contains("href"));
    let plus = text.matches("<g class=\"plus\">").count();
    let minus = text.matches("<g class=\"minus\">").count();
    assert!(plus >= 3 && minus >= 2, "{plus} {minus}");
    assert_eq!(plus + minus, eigenvalues(&v).len());
    assert!(text.contains("Σ⁺") && text.contains("Σ⁻"));
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("re,im,branch,multiplicity\n"));
    assert_eq!(table.lines().count(), eigenvalues(&v).len() + 1);
}

#[test]
fn sigma_two_halves_the_spectrum() {
    let one = json_of(&zigzag(&["spectrum", "--re-min", "-2", "--re-max", "0.1", "--im-max", "4"]));
    let two = json_of(&zigzag(&["spectrum", "--sigma", "2", "--re-min", "-1", "--re-max", "0.05", "--im-max", "2"]));
    assert_eq!(two["potential"], "gaussian:2");
    let (a, b) = (eigenvalues(&one), eigenvalues(&two));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x.0 / 2.0 - y.0).abs() <= 1e-6 && (x.1 / 2.0 - y.1).abs() <= 1e-6, "{x:?} {y:?}");
        assert_eq!(x.2, y.2);
    }
}

#[test]
fn perturbation_arrows() {
    let dir = tempfile::tempdir().unwrap();
    let svg = path(dir.path(), "p.svg");
    let v = json_of(&zigzag(&["perturb", "--re-min", "-2", "--eps", "0.1", "--plot", &svg]));
    let p = &v["perturbation"];
    assert_eq!(p["eps"], 0.1);
    let arrows = p["arrows"].as_array().unwrap();
    let zero = arrows.iter().find(|a| a["base"]["re"] == 0.0 && a["base"]["im"] == 0.0).unwrap();
    assert_eq!(zero["length"], 0.0);
    let first = arrows.iter().find(|a| a["base"]["re"].as_f64().unwrap() < 0.0).unwrap();
    assert!(first["coefficient"]["re"].as_f64().unwrap() < 0.0);
    assert!(p["gap"].as_f64().unwrap() > v["gap"].as_f64().unwrap());
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("class=\"arrow\"").count(), arrows.len() - 1);
    assert!(text.contains("stroke=\"gray\""));
}

#[test]
fn eigenfunction_is_continuous_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "f.csv");
    let v = json_of(&zigzag(&["eigfun", "--gamma", "-0.425665+1.02295i", "--csv", &csv]));
    let g = &v["gamma"];
    assert!((g["re"].as_f64().unwrap() + 0.4256652293460).abs() < 1e-10);
    assert!(v["residual"].as_f64().unwrap() <= 1e-8);
    let scale = v["sup_norm"].as_f64().unwrap();
    for side in ["plus", "minus"] {
        assert!(v["continuity"][side].as_f64().unwrap() <= 1e-9 * scale);
    }
    let table = std::fs::read_to_string(&csv).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("x,plus_re,plus_im,minus_re,minus_im"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|s| s.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 801);
    let mid = rows.iter().position(|r| r[0] == 0.0).unwrap();
    // neighbouring samples across x = 0 differ by O(dx)
    for (a, b, c) in rows[mid - 1].iter().zip(&rows[mid]).zip(&rows[mid + 1]).map(|((a, b), c)| (a, b, c)).skip(1) {
        assert!((a - b).abs() < 0.05 * scale && (c - b).abs() < 0.05 * scale);
    }
}

#[test]
fn simulation_matches_gap_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (csv1, csv2) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    let args = |csv: &str| ["simulate", "-T", "200000", "--seed", "7", "--csv", csv].map(String::from);
    let a = zigzag(&args(&csv1).iter().map(String::as_str).collect::<Vec<_>>());
    let b = zigzag(&args(&csv2).iter().map(String::as_str).collect::<Vec<_>>());
    let va = json_of(&a);
    let rel = va["relative_error"].as_f64().unwrap();
    assert!(rel < 0.2, "{rel}");
    assert!(va["chains"][0]["ks"].as_f64().unwrap() < 0.02);
    let ca = std::fs::read(&csv1).unwrap();
    assert_eq!(ca, std::fs::read(&csv2).unwrap());
    assert!(ca.starts_with(b"chain,t,x,theta\n0,0,0,1\n"));
    // output differs only through the csv path recorded in the config
    let strip = |o: &Output, p: &str| String::from_utf8_lossy(&o.stdout).replace(p, "");
    assert_eq!(strip(&a, &csv1), strip(&b, &csv2));
}

#[test]
fn chains_use_distinct_streams() {
    let v = json_of(&zigzag(&["simulate", "-T", "20000", "--chains", "3", "--max-lag", "4"]));
    let chains = v["chains"].as_array().unwrap();
    assert_eq!(chains.len(), 3);
    let switches: Vec<u64> = chains.iter().map(|c| c["switches"].as_u64().unwrap()).collect();
    assert!(switches[0] != switches[1] || switches[1] != switches[2]);
    assert_eq!(chains[2]["stream"], 2);
}

#[test]
fn short_horizon_reports_fit_error() {
    let v = json_of(&zigzag(&["simulate", "-T", "50"]));
    assert_eq!(v["chains"][0]["fit_error"]["code"], "insufficient_horizon");
    assert!(v["mean_rate"].is_null());
}

#[test]
fn outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let (svg, csv) = (path(dir.path(), "s.svg"), path(dir.path(), "s.csv"));
        let out = zigzag(&["perturb", "--potential", "beta:2.5", "--re-min", "-1.5", "--plot", &svg, "--csv", &csv]);
        assert!(out.status.success(), "{tag}");
        (out.stdout, std::fs::read(&svg).unwrap(), std::fs::read(&csv).unwrap())
    };
    assert_eq!(run("first"), run("second"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let conf = path(dir.path(), "run.conf");
    std::fs::write(&conf, "# test run\npotential=beta:2.5\nre-min=-1\nim-max=3\n").unwrap();
    let from_file = json_of(&zigzag(&["spectrum", "--config", &conf]));
    let from_flags = json_of(&zigzag(&["spectrum", "--potential", "beta:2.5", "--re-min", "-1", "--im-max", "3"]));
    assert_eq!(from_file, from_flags);
    let overridden = json_of(&zigzag(&["spectrum", "--config", &conf, "--potential", "gaussian:1"]));
    assert_eq!(overridden["config"]["potential"], "gaussian:1");
    assert_eq!(overridden["config"]["re_min"], -1.0);
}

#[test]
fn canonical_config_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = zigzag::RunConfig::default();
    cfg.apply_text("potential=gaussian:1\nsigma=0.5\nre-min=-3\ntol=1e-11\neps=0.2\nT=1e6\nseed=20240601\n").unwrap();
    let conf = path(dir.path(), "c.conf");
    std::fs::write(&conf, cfg.canonical()).unwrap();
    let again = zigzag::RunConfig::from_file(Path::new(&conf)).unwrap();
    assert_eq!(again, cfg);
    assert_eq!(again.canonical(), cfg.canonical());
}

#[test]
fn exit_codes() {
    assert_eq!(zigzag(&["--help"]).status.code(), Some(0));
    assert_eq!(zigzag(&["spectrum", "--bogus"]).status.code(), Some(1));
    assert_eq!(zigzag(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(zigzag(&["spectrum", "--potential", "cauchy:1"]).status.code(), Some(1));
    assert_eq!(zigzag(&["eigfun"]).status.code(), Some(1));
    assert_eq!(zigzag(&["spectrum", "--out", "/nonexistent/dir/x.json"]).status.code(), Some(3));
    assert_eq!(zigzag(&["spectrum", "--config", "/nonexistent/run.conf"]).status.code(), Some(3));

    let out = zigzag(&["spectrum", "--potential", "beta:1.2", "--re-min", "-3"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["code"].is_string());
    assert!(err["error"]["message"].is_string());
    assert!(out.stdout.is_empty());
}
