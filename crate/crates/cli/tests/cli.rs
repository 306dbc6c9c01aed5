use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../problems")
        .join(name)
}

fn firstint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_firstint"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = firstint(args);
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn write_problem(dir: &tempfile::TempDir, text: &str) -> String {
    let path = dir.path().join("problem.toml");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

const SCHEME: &str = r#"
kind = "scheme"
f = "(u[3]-u[1])*(u[2]-u[0])/((u[3]-u[2])*(u[1]-u[0])) - K"
omega = "(x[3]-x[1])*(x[2]-x[0])/((x[3]-x[2])*(x[1]-x[0])) - K"
order = 3

[constants]
K = 4

[[symmetries]]
name = "X1"
xi = "0"
eta = "1"

[[solutions]]
name = "a"
v = "1"
w = "1"

[[integrals]]
name = "J1a"
symmetry = "X1"
solution = "a"
"#;

#[test]
fn ode_adjoint_reduces_on_solutions() {
    let ode = fixture("third_order_ode.toml");
    let (code, out, _) = run(&["adjoint", "--problem", ode.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("F* on solutions = -v'''/u'"), "{out}");
}

#[test]
fn scheme_adjoint_prints_both_recurrences() {
    let scheme = fixture("cross_ratio_k4.toml");
    let (code, out, _) = run(&["adjoint", "--solve", "--problem", scheme.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(
        out.contains("-v[0] + (K - 1)*v[-1] + (-K + 1)*v[-2] + v[-3] = 0"),
        "{out}"
    );
    assert!(
        out.contains("-w[0] + (K - 1)*w[-1] + (-K + 1)*w[-2] + w[-3] = 0"),
        "{out}"
    );
    assert_eq!(
        out.matches("polynomial solutions: {1, m, m^2}").count(),
        2,
        "{out}"
    );
}

#[test]
fn malformed_expression_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_problem(&dir, "kind = \"ode\"\nf = \"u''' - * u\"\n");
    let (code, out, err) = run(&["adjoint", "--problem", &path]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains("column"), "{err}");
}

#[test]
fn missing_problem_file_exits_with_input_error() {
    let (code, _, err) = run(&["integrals", "--problem", "/nonexistent/problem.toml"]);
    assert_eq!(code, 2);
    assert!(err.contains("cannot read"), "{err}");
}

#[test]
fn ode_grid_has_eighteen_entries_and_rank_three() {
    let ode = fixture("third_order_ode.toml");
    let (code, out, _) = run(&["integrals", "--problem", ode.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("18 entries, 3 independent"), "{out}");
    assert!(out.contains("X1\ta\tindependent\tu''^2/(2*u'^3)"), "{out}");
}

#[test]
fn scheme_grid_has_nine_entries() {
    let scheme = fixture("cross_ratio_k4.toml");
    let (code, out, _) = run(&["integrals", "--problem", scheme.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("9 entries, 3 independent"), "{out}");
}

#[test]
fn empty_symmetry_list_gives_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_problem(&dir, "kind = \"ode\"\nf = \"u'''\"\n");
    let (code, out, _) = run(&["integrals", "--problem", &path]);
    assert_eq!(code, 0);
    assert!(out.contains("0 entries"), "{out}");
}

#[test]
fn identity_passes_and_rejects_unknown_symmetries() {
    let scheme = fixture("cross_ratio_k4.toml");
    let path = scheme.to_str().unwrap();
    let (code, out, _) = run(&["identity", "--problem", path]);
    assert_eq!(code, 0);
    assert_eq!(out.matches("symbolic residual 0").count(), 6, "{out}");
    let (code, _, err) = run(&["identity", "--problem", path, "--symmetry", "X9"]);
    assert_eq!(code, 2);
    assert!(err.contains("X9"), "{err}");
}

#[test]
fn verify_substitution_flags_non_solutions() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SCHEME}\n[[solutions]]\nname = \"cubic\"\nv = \"m^3\"\nw = \"0\"\n");
    let path = write_problem(&dir, &text);
    let (code, out, _) = run(&["verify-substitution", "--problem", &path, "--solution", "a"]);
    assert_eq!(code, 0, "{out}");
    let (code, out, _) = run(&[
        "verify-substitution",
        "--problem",
        &path,
        "--solution",
        "cubic",
    ]);
    assert_eq!(code, 1, "{out}");
    assert!(
        out.contains("cubic: v = m^3, w = 0 symbolic nonzero"),
        "{out}"
    );
}

#[test]
fn default_scheme_run_passes_and_writes_reports() {
    let scheme = fixture("cross_ratio_k4.toml");
    let out_dir = tempfile::tempdir().unwrap();
    let (code, out, _) = run(&[
        "run",
        "--problem",
        scheme.to_str().unwrap(),
        "--out",
        out_dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{out}");
    assert!(!out.contains("FAIL"), "{out}");
    assert!(out.contains("20 orbits PASS"), "{out}");
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.path().join("summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["orbits"].as_array().unwrap().len(), 20);
    let orbit = std::fs::read_to_string(out_dir.path().join("orbit_0.csv")).unwrap();
    assert!(orbit.starts_with("m,x,u\n"));
    assert_eq!(orbit.lines().count(), 1 + 103);
    let drift = std::fs::read_to_string(out_dir.path().join("drift.csv")).unwrap();
    assert!(drift.starts_with("integral,m,value,delta\n"));
}

#[test]
fn exact_rational_run_writes_fractions() {
    let scheme = fixture("cross_ratio_k4.toml");
    let out_dir = tempfile::tempdir().unwrap();
    let (code, out, _) = run(&[
        "run",
        "--problem",
        scheme.to_str().unwrap(),
        "--exact-rational",
        "--steps",
        "10",
        "--out",
        out_dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{out}");
    let orbit = std::fs::read_to_string(out_dir.path().join("orbit_0.csv")).unwrap();
    assert!(orbit.starts_with("m,x_num,x_den,u_num,u_den\n"), "{orbit}");
}

#[test]
fn perturbed_initial_data_fails_with_residual() {
    let dir = tempfile::tempdir().unwrap();
    let good = format!(
        "{SCHEME}\n[run]\nsteps = 20\ninitial = [[0, 1], [1, \"1/2\"], [2, \"1/3\"], [3, \"1/4\"]]\n"
    );
    let (code, out, _) = run(&["run", "--problem", &write_problem(&dir, &good)]);
    assert_eq!(code, 0, "{out}");
    let bad = good.replace("[3, \"1/4\"]", "[3, \"2/9\"]");
    let (code, out, _) = run(&["run", "--problem", &write_problem(&dir, &bad)]);
    assert_eq!(code, 1, "{out}");
    assert!(
        out.contains("scheme residual") && out.contains("FAIL"),
        "{out}"
    );
}

#[test]
fn ode_run_keeps_integrals_constant() {
    let ode = fixture("third_order_ode.toml");
    let (code, out, _) = run(&["run", "--problem", ode.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out.matches("PASS").count(), 4, "{out}");
}

#[test]
fn output_is_deterministic() {
    let scheme = fixture("cross_ratio_k4.toml");
    let args = [
        "run",
        "--problem",
        scheme.to_str().unwrap(),
        "--steps",
        "20",
        "--seed",
        "7",
    ];
    assert_eq!(firstint(&args).stdout, firstint(&args).stdout);
}

#[test]
fn invalid_tolerance_is_an_input_error() {
    let ode = fixture("third_order_ode.toml");
    let (code, _, err) = run(&["run", "--problem", ode.to_str().unwrap(), "--tol=-1"]);
    assert_eq!(code, 2);
    assert!(err.contains("--tol"), "{err}");
}
