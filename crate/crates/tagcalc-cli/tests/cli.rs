//! CLI contract: exit codes, output formats, configuration precedence,
//! determinism of emitted files.

use std::process::{Command, Output};

fn tagcalc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tagcalc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).to_string()
}

#[test]
fn normalize_prints_the_normal_form() {
    let out = tagcalc(&["normalize", "<q|p>"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "exp(i*p*q)");

    let out = tagcalc(&["normalize", "int |q><q| dq ket(psi)"]);
    assert_eq!(stdout(&out).trim(), "int |q0> psi(q0) dq0");
}

#[test]
fn normalize_parse_error_exits_one_with_span() {
    let out = tagcalc(&["normalize", "|Ahat psi>"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("1:7"), "{}", stderr(&out));
}

#[test]
fn normalize_divergence_exits_two() {
    let out =
        tagcalc(&["normalize", "int |q> q <q| dq int |p> p <p| dp", "--step-budget", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("diverged"));
}

#[test]
fn normalize_trace_steps_emits_report() {
    let out = tagcalc(&["normalize", "<q|q'>", "--trace-steps", "--output", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["result"], "delta(q - q')");
    assert_eq!(v["report"]["steps"][0]["rule"], "contract");
}

#[test]
fn normalize_modes_agree_via_flags() {
    for mode in ["distributional", "paper-faithful"] {
        let out = tagcalc(&["normalize", "int |p> p <p| dp ket(psi)", "--mode", mode]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        assert_eq!(stdout(&out).trim(), "-int |q0> i*psi'(q0) dq0");
    }
}

#[test]
fn derive_supports_symplectic_parameters() {
    let out = tagcalc(&["derive", "symplectic", "--a", "3", "--d", "1/3"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("PASS"));
    assert!(stdout(&out).contains("symplectic: true"));

    let out = tagcalc(&["derive", "symplectic", "--a", "1", "--d", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("symplectic: false"));
    assert!(stdout(&out).contains("2*i*I"));
}

#[test]
fn derive_unknown_name_lists_known_ones() {
    let out = tagcalc(&["derive", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("qp-commutator"));
}

#[test]
fn derive_json_output_carries_boundary_counts() {
    let out = tagcalc(&["derive", "qp-commutator", "--mode", "paper-faithful", "--output", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v[0]["pass"], true);
    assert_eq!(v[0]["result"], "i*I");
    assert!(v[0]["boundary_terms_emitted"].as_u64().unwrap() >= 1);
}

#[test]
fn check_rejects_non_power_of_two_grids() {
    let out = tagcalc(&["check", "--grid-n", "96"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("power of two"));
}

#[test]
fn check_small_grid_passes_and_emits_json() {
    let out = tagcalc(&["check", "--grid-n", "128", "--grid-l", "20", "--output", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["grid_n"], 128);
    assert!(v["entries"].as_array().unwrap().len() > 20);
}

#[test]
fn check_csv_output_is_tabular() {
    let out = tagcalc(&["check", "--grid-n", "64", "--grid-l", "16", "--output", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "name,value,threshold,comparison,pass");
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 5));
}

#[test]
fn config_file_and_env_are_honored() {
    let dir = std::env::temp_dir().join(format!("tagcalc-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("tagcalc.conf");
    std::fs::write(&path, "grid.n = 96\n").unwrap();

    // via flag
    let out = tagcalc(&["--config", path.to_str().unwrap(), "check"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("power of two"));

    // via environment
    let out = Command::new(env!("CARGO_BIN_EXE_tagcalc"))
        .env("TAGCALC_CONFIG", path.to_str().unwrap())
        .args(["check"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // flags override the file
    let out = Command::new(env!("CARGO_BIN_EXE_tagcalc"))
        .env("TAGCALC_CONFIG", path.to_str().unwrap())
        .args(["check", "--grid-n", "64", "--grid-l", "16"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn wigner_writes_deterministic_csv_matching_the_analytic_oracle() {
    let dir = std::env::temp_dir().join(format!("tagcalc-wig-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p1 = dir.join("a.csv");
    let p2 = dir.join("b.csv");
    for p in [&p1, &p2] {
        let out = tagcalc(&["wigner", "fock:0", "--out", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let a = std::fs::read(&p1).unwrap();
    let b = std::fs::read(&p2).unwrap();
    assert_eq!(a, b, "wigner output is not deterministic");

    // spot-check the values against 2 exp(-q^2 - p^2)
    let text = String::from_utf8(a).unwrap();
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for line in text.lines().skip(3) {
        let cols: Vec<&str> = line.split(',').collect();
        let q: f64 = cols[0].parse().unwrap();
        let p: f64 = cols[1].parse().unwrap();
        if q.abs() > 4.0 || p.abs() > 4.0 {
            continue;
        }
        let w: f64 = cols[2].parse().unwrap();
        worst = worst.max((w - 2.0 * (-q * q - p * p).exp()).abs());
        checked += 1;
    }
    assert!(checked > 1000);
    assert!(worst < 1e-6, "worst deviation {worst}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn wigner_rejects_bad_state_specs() {
    let out = tagcalc(&["wigner", "bogus:1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unknown state spec"));
}

#[test]
fn wigner_json_format() {
    let dir = std::env::temp_dir().join(format!("tagcalc-wigj-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("w.json");
    let out = tagcalc(&[
        "wigner",
        "coherent:0.5,0.5",
        "--grid-n",
        "128",
        "--format",
        "json",
        "--out",
        p.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(v["n"], 128);
    assert_eq!(v["q"].as_array().unwrap().len(), 128);
    std::fs::remove_dir_all(&dir).ok();
}
