use std::collections::BTreeMap;
use std::fmt::Write as _;

use firstint::adjoint_solver::{
    characteristic_polynomial, polynomial_solutions_default, verify_substitution, LinearRecurrence,
};
use firstint::continuous::{
    adjoint_check, adjoint_ode, adjoint_ode_reduced, constant_binding, drift_along,
    first_integral_continuous, identity_residual_samples, identity_residual_symbolic,
    integral_grid, integrate_rk4,
};
use firstint::discrete::{
    adjoint_forms, discrete_symmetry_check, first_integral_discrete, integral_grid_discrete,
    main_identity_samples, main_identity_symbolic,
};
use firstint::expr::{Binding, DoubleDouble, Family, RationalFunction, Scalar};
use firstint::scheme_runtime::{
    drift_csv, exactness_check, generate_orbit, integral_drift, orbit_csv, orbit_csv_exact,
    random_generic_family, reconstruct_constants, scheme_residual, Branch, DriftReport, Orbit,
    RuntimeError, SolutionFamily, Stepper, DRIFT_TOLERANCE, SCHEME_TOLERANCE,
};
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::problem::{OdeSetup, Problem, SchemeSetup};
use crate::CliError;

const DEFAULT_SEED: u64 = 1;
const DEFAULT_SAMPLES: usize = 20;
const IDENTITY_TOLERANCE: f64 = 1e-9;
const ODE_DRIFT_TOLERANCE: f64 = 1e-6;
const ROUND_TRIP_TOLERANCE: f64 = 1e-8;

/// Command-line overrides of the `[run]` table.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub exact_rational: bool,
}

/// What a command produced: text for the terminal, a JSON summary and
/// extra report files.
pub struct Report {
    pub text: String,
    pub pass: bool,
    pub summary: Value,
    pub files: Vec<(String, String)>,
}

impl Report {
    fn new(command: &str, problem: &Problem) -> Self {
        Report {
            text: String::new(),
            pass: true,
            summary: json!({ "command": command, "problem": problem.common().name }),
            files: Vec::new(),
        }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    fn set(&mut self, key: &str, value: Value) {
        self.summary[key] = value;
    }

    fn finish(mut self) -> Self {
        self.summary["pass"] = json!(self.pass);
        self
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn seed(problem: &Problem, o: &Overrides) -> u64 {
    o.seed.or(problem.common().run.seed).unwrap_or(DEFAULT_SEED)
}

fn samples(problem: &Problem) -> usize {
    problem.common().run.samples.unwrap_or(DEFAULT_SAMPLES)
}

fn f64_constants(problem: &Problem) -> Binding<f64> {
    constant_binding(
        problem
            .common()
            .constants
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_f64())),
    )
}

// ---- adjoint ----

pub fn adjoint(problem: &Problem, solve: bool) -> Result<Report, CliError> {
    let mut r = Report::new("adjoint", problem);
    match problem {
        Problem::Ode(p) => {
            let raw = adjoint_ode(&p.problem);
            let reduced = adjoint_ode_reduced(&p.problem).map_err(CliError::failed)?;
            r.line(format!("F* = {raw}"));
            r.line(format!("F* on solutions = {reduced}"));
            r.set("adjoint", json!(raw.to_string()));
            r.set("adjoint_reduced", json!(reduced.to_string()));
            if solve {
                let mut checks = Vec::new();
                for (name, v) in &p.solutions {
                    let ok = adjoint_check(&p.problem, v).map_err(CliError::failed)?;
                    r.pass &= ok;
                    r.line(format!("solution {name}: v = {v} {}", verdict(ok)));
                    checks.push(json!({ "name": name, "v": v.to_string(), "pass": ok }));
                }
                r.set("solutions", json!(checks));
            }
        }
        Problem::Scheme(p) => {
            let (fs, os) = adjoint_forms(&p.scheme);
            r.line(format!("F* = {}", fs.to_expression()));
            r.line(format!("Ω* = {}", os.to_expression()));
            let mut recs = Vec::new();
            for (label, form, family) in [("F*", &fs, Family::V), ("Ω*", &os, Family::W)] {
                let rec = LinearRecurrence::from_adjoint(&p.scheme, form, family)
                    .map_err(CliError::failed)?;
                r.line(format!("{label} on solutions: {rec}"));
                let mut entry = json!({
                    "family": family.letter().to_string(),
                    "recurrence": rec.to_string(),
                    "coefficients": rec.coefficients().iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                });
                if solve {
                    let bound = rec.bind(&p.common.constants).map_err(CliError::failed)?;
                    let chi = characteristic_polynomial(&bound);
                    let basis = polynomial_solutions_default(&bound).map_err(CliError::failed)?;
                    let elements: Vec<String> =
                        basis.elements.iter().map(|e| e.to_string()).collect();
                    r.line(format!("  characteristic polynomial: {chi}"));
                    r.line(format!(
                        "  polynomial solutions: {{{}}} (root 1 of multiplicity {})",
                        elements.join(", "),
                        basis.root_one_multiplicity
                    ));
                    entry["characteristic_polynomial"] = json!(chi.to_string());
                    entry["polynomial_solutions"] = json!(elements);
                    entry["root_one_multiplicity"] = json!(basis.root_one_multiplicity);
                }
                recs.push(entry);
            }
            r.set("adjoint", json!([fs.to_string(), os.to_string()]));
            r.set("recurrences", json!(recs));
        }
    }
    Ok(r.finish())
}

// ---- integrals ----

fn grid_row(
    r: &mut Report,
    rows: &mut Vec<Value>,
    sym: &str,
    sol: &str,
    class: String,
    integral: &RationalFunction,
) {
    let text = integral.to_expression().to_string();
    r.line(format!("{sym}\t{sol}\t{class}\t{text}"));
    rows.push(json!({ "symmetry": sym, "solution": sol, "class": class, "integral": text }));
}

pub fn integrals(problem: &Problem, o: &Overrides) -> Result<Report, CliError> {
    let mut r = Report::new("integrals", problem);
    let seed = seed(problem, o);
    let mut rows = Vec::new();
    r.line("symmetry\tsolution\tclass\tintegral");
    let symmetries = problem.common().grid_symmetries();
    let independent = match problem {
        Problem::Ode(p) if !symmetries.is_empty() && !p.solutions.is_empty() => {
            let grid = integral_grid(&p.problem, &symmetries, &p.solutions, seed)
                .map_err(CliError::failed)?;
            for e in &grid {
                let reduced = e.integral.reduced_form();
                grid_row(
                    &mut r,
                    &mut rows,
                    &e.symmetry,
                    &e.solution,
                    e.class.to_string(),
                    reduced,
                );
            }
            grid.iter()
                .filter(|e| e.class.to_string() == "independent")
                .count()
        }
        Problem::Scheme(p) if !symmetries.is_empty() && !p.solutions.is_empty() => {
            let grid = integral_grid_discrete(&p.bound, &symmetries, &p.solutions, seed)
                .map_err(CliError::failed)?;
            for e in &grid {
                let best = e.integral.best_form();
                grid_row(
                    &mut r,
                    &mut rows,
                    &e.symmetry,
                    &e.solution,
                    e.class.to_string(),
                    best,
                );
            }
            grid.iter()
                .filter(|e| e.class.to_string() == "independent")
                .count()
        }
        _ => 0,
    };
    r.line(format!("{} entries, {independent} independent", rows.len()));
    r.set("entries", json!(rows));
    r.set("independent", json!(independent));
    Ok(r.finish())
}

// ---- identity ----

pub fn identity(problem: &Problem, o: &Overrides, only: &[String]) -> Result<Report, CliError> {
    let mut r = Report::new("identity", problem);
    let common = problem.common();
    for name in only {
        if !common.symmetries.iter().any(|(n, _)| n == name) {
            return Err(CliError::Input(format!("unknown symmetry {name:?}")));
        }
    }
    let tol = o.tol.unwrap_or(IDENTITY_TOLERANCE);
    let seed = seed(problem, o);
    let samples = samples(problem);
    let constants = f64_constants(problem);
    let mut rows = Vec::new();
    for (name, sym) in &common.symmetries {
        if !only.is_empty() && !only.contains(name) {
            continue;
        }
        let (symbolic_zero, residuals) = match problem {
            Problem::Ode(p) => (
                identity_residual_symbolic(&p.problem, sym, None)
                    .map_err(CliError::failed)?
                    .is_zero(),
                identity_residual_samples(&p.problem, sym, None, &constants, samples, seed)
                    .map_err(CliError::failed)?,
            ),
            Problem::Scheme(p) => (
                main_identity_symbolic(&p.scheme, sym).is_zero(),
                main_identity_samples(&p.scheme, sym, &constants, samples, seed)
                    .map_err(CliError::failed)?,
            ),
        };
        let worst = residuals.iter().copied().fold(0.0, f64::max);
        let ok = symbolic_zero && worst <= tol;
        r.pass &= ok;
        r.line(format!(
            "{name}: symbolic residual {} numeric max {worst:e} over {} bindings {}",
            if symbolic_zero { "0" } else { "nonzero" },
            residuals.len(),
            verdict(ok)
        ));
        rows.push(json!({
            "symmetry": name,
            "symbolic_zero": symbolic_zero,
            "numeric_max": worst,
            "bindings": residuals.len(),
            "pass": ok,
        }));
    }
    r.set("tolerance", json!(tol));
    r.set("symmetries", json!(rows));
    Ok(r.finish())
}

// ---- verify-substitution ----

pub fn verify(problem: &Problem, o: &Overrides, only: &[String]) -> Result<Report, CliError> {
    let mut r = Report::new("verify-substitution", problem);
    let names: Vec<String> = match problem {
        Problem::Ode(p) => p.solutions.iter().map(|s| s.0.clone()).collect(),
        Problem::Scheme(p) => p.solutions.iter().map(|s| s.0.clone()).collect(),
    };
    for name in only {
        if !names.contains(name) {
            return Err(CliError::Input(format!("unknown solution {name:?}")));
        }
    }
    let wanted = |n: &String| only.is_empty() || only.contains(n);
    let mut rows = Vec::new();
    match problem {
        Problem::Ode(p) => {
            for (name, v) in p.solutions.iter().filter(|s| wanted(&s.0)) {
                let ok = adjoint_check(&p.problem, v).map_err(CliError::failed)?;
                r.pass &= ok;
                r.line(format!("{name}: v = {v} symbolic {}", verdict(ok)));
                rows.push(json!({ "solution": name, "symbolic": ok, "pass": ok }));
            }
        }
        Problem::Scheme(p) => {
            let samples = samples(problem);
            let seed = seed(problem, o);
            for (name, a) in p.solutions.iter().filter(|s| wanted(&s.0)) {
                let rep =
                    verify_substitution(&p.bound, a, samples, seed).map_err(CliError::failed)?;
                r.pass &= rep.pass;
                let symbolic = match rep.symbolic {
                    Some(true) => "0",
                    Some(false) => "nonzero",
                    None => "unavailable",
                };
                r.line(format!(
                    "{name}: v = {}, w = {} symbolic {symbolic} sampled max {:e} over {} windows {}",
                    a.v,
                    a.w,
                    rep.max_residual,
                    rep.windows,
                    verdict(rep.pass)
                ));
                rows.push(json!({
                    "solution": name,
                    "v": a.v.to_string(),
                    "w": a.w.to_string(),
                    "symbolic": rep.symbolic,
                    "max_residual": rep.max_residual,
                    "windows": rep.windows,
                    "pass": rep.pass,
                }));
            }
        }
    }
    r.set("solutions", json!(rows));
    Ok(r.finish())
}

// ---- run ----

pub fn run(problem: &Problem, o: &Overrides) -> Result<Report, CliError> {
    match problem {
        Problem::Ode(p) => run_ode(problem, p, o),
        Problem::Scheme(p) => run_scheme(problem, p, o),
    }
}

fn configured_integrals(
    problem: &Problem,
    mut make: impl FnMut(&str, &str) -> Result<RationalFunction, CliError>,
) -> Result<Vec<(String, RationalFunction)>, CliError> {
    problem
        .common()
        .integrals
        .iter()
        .map(|i| Ok((i.name.clone(), make(&i.symmetry, &i.solution)?)))
        .collect()
}

fn run_ode(problem: &Problem, p: &OdeSetup, o: &Overrides) -> Result<Report, CliError> {
    let mut r = Report::new("run", problem);
    let run = &p.common.run;
    let n = p.problem.order() as usize;
    let state = run
        .state
        .clone()
        .ok_or_else(|| CliError::Input("[run] needs state".into()))?;
    if state.len() != n {
        return Err(CliError::Input(format!("[run] state needs {n} values")));
    }
    let h = run.h.unwrap_or(1e-3);
    let steps = o.steps.or(run.steps).unwrap_or(1000);
    let x0 = run.x0.unwrap_or(0.0);
    let tol = o.tol.or(run.tol).unwrap_or(ODE_DRIFT_TOLERANCE);
    let constants = f64_constants(problem);
    let integrals = configured_integrals(problem, |sym, sol| {
        let j = first_integral_continuous(&p.problem, p.common.symmetry(sym), p.solution(sol));
        Ok(j.map_err(CliError::failed)?.reduced_form().clone())
    })?;
    let traj = match integrate_rk4(&p.problem, &constants, x0, &state, h, steps) {
        Ok(t) => t,
        Err(e) => {
            r.pass = false;
            r.line(format!("integration failed: {e}"));
            r.set("error", json!(e.to_string()));
            return Ok(r.finish());
        }
    };
    let mut csv = String::from("x");
    for i in 0..n {
        csv.push_str(&format!(",u{}", "'".repeat(i)));
    }
    csv.push('\n');
    for (x, s) in traj.x.iter().zip(&traj.states) {
        csv.push_str(&format!("{x:e}"));
        for v in s {
            csv.push_str(&format!(",{v:e}"));
        }
        csv.push('\n');
    }
    let mut drift_rows = String::from("integral,x,value,delta\n");
    let mut rows = Vec::new();
    for (name, form) in &integrals {
        let d = drift_along(form, &traj, &constants).map_err(CliError::failed)?;
        let ok = d.passes(tol);
        r.pass &= ok;
        r.line(format!(
            "{name}: initial {:e} max drift {:e} {}",
            d.values[0],
            d.max_drift,
            verdict(ok)
        ));
        for (k, v) in d.values.iter().enumerate() {
            let delta = if k == 0 {
                String::new()
            } else {
                format!("{:e}", v - d.values[k - 1])
            };
            let _ = writeln!(drift_rows, "{name},{:e},{v:e},{delta}", traj.x[k]);
        }
        rows.push(json!({ "integral": name, "initial": d.values[0], "max_drift": d.max_drift, "pass": ok }));
    }
    r.set("steps", json!(steps));
    r.set("h", json!(h));
    r.set("tolerance", json!(tol));
    r.set("drift", json!(rows));
    r.files.push(("trajectory.csv".into(), csv));
    r.files.push(("drift.csv".into(), drift_rows));
    Ok(r.finish())
}

fn branch_json(b: &Branch<f64>) -> Value {
    match b {
        Branch::Generic { .. } => json!({ "branch": "generic", "c": b.constants() }),
        Branch::Linear { .. } => json!({ "branch": "linear", "c": b.constants() }),
    }
}

fn describe(b: &Branch<f64>) -> String {
    let c: Vec<String> = b.constants().iter().map(|c| format!("{c:e}")).collect();
    format!(
        "{} ({})",
        if b.is_linear() { "linear" } else { "generic" },
        c.join(", ")
    )
}

fn relative_error(found: &Branch<f64>, truth: &Branch<f64>) -> f64 {
    if found.is_linear() != truth.is_linear() {
        return f64::INFINITY;
    }
    found
        .constants()
        .iter()
        .zip(truth.constants())
        .map(|(a, b)| (a - b).abs() / 1f64.max(b.abs()))
        .fold(0.0, f64::max)
}

struct OrbitOutcome {
    text: Vec<String>,
    summary: Value,
    pass: bool,
    orbit_csv: String,
    drifts: Vec<DriftReport>,
}

/// What every orbit of a scheme run shares.
struct Plan<'a> {
    setup: &'a SchemeSetup,
    stepper: Stepper,
    integrals: Vec<(String, RationalFunction)>,
    steps: usize,
    tol: f64,
}

fn run_orbit<T: Scalar>(
    plan: &Plan,
    initial: &Orbit<T>,
    truth: Option<&SolutionFamily<f64>>,
    csv: impl Fn(&Orbit<T>) -> String,
) -> OrbitOutcome {
    let Plan {
        setup: p,
        stepper,
        integrals,
        steps,
        tol,
    } = plan;
    let (steps, tol) = (*steps, *tol);
    let mut out = OrbitOutcome {
        text: Vec::new(),
        summary: json!({}),
        pass: true,
        orbit_csv: String::new(),
        drifts: Vec::new(),
    };
    let n = p.bound.order() as usize;
    let orbit = if initial.len() > n {
        // given points beyond the first window must already solve the scheme
        match scheme_residual(&p.bound, initial) {
            Ok(res) if res <= SCHEME_TOLERANCE => {
                let head = Orbit::new(initial.base, initial.points[..n].to_vec());
                generate_orbit(stepper, &head, steps.max(initial.len() - n))
            }
            Ok(res) => Err(RuntimeError::Residual {
                m: initial.base,
                residual: res,
                tolerance: SCHEME_TOLERANCE,
            }),
            Err(e) => Err(e),
        }
    } else {
        generate_orbit(stepper, initial, steps)
    };
    let orbit = match orbit {
        Ok(o) => o,
        Err(e) => {
            out.pass = false;
            out.text.push(format!("orbit FAIL: {e}"));
            out.summary = json!({ "error": e.to_string(), "pass": false });
            return out;
        }
    };
    let residual = scheme_residual(&p.bound, &orbit).unwrap_or(f64::INFINITY);
    let residual_ok = residual <= SCHEME_TOLERANCE;
    out.pass &= residual_ok;
    out.text.push(format!(
        "{} points, scheme residual {residual:e} {}",
        orbit.len(),
        verdict(residual_ok)
    ));
    let mut drift_json = Vec::new();
    let mut first_values = BTreeMap::new();
    for (name, form) in integrals {
        match integral_drift(name, form, &orbit, tol) {
            Ok(d) => {
                out.pass &= d.pass;
                out.text.push(format!(
                    "  {name}: value {:e} max relative change {:e} {}",
                    d.values[0].1,
                    d.max_relative_change,
                    verdict(d.pass)
                ));
                first_values.insert(name.clone(), d.values[0].1);
                drift_json.push(json!({
                    "integral": name,
                    "value": d.values[0].1,
                    "max_change": d.max_change,
                    "max_relative_change": d.max_relative_change,
                    "pass": d.pass,
                }));
                out.drifts.push(d);
            }
            Err(e) => {
                out.pass = false;
                out.text.push(format!("  {name}: FAIL {e}"));
                drift_json.push(json!({ "integral": name, "error": e.to_string(), "pass": false }));
            }
        }
    }
    let mut summary = json!({
        "points": orbit.len(),
        "scheme_residual": residual,
        "drift": drift_json,
    });
    if !first_values.is_empty() {
        match reconstruct_constants(&first_values) {
            Ok(found) => {
                summary["constants"] =
                    json!({ "u": branch_json(&found.u), "x": branch_json(&found.x) });
                let mut line = format!(
                    "  constants: u {}, x {}",
                    describe(&found.u),
                    describe(&found.x)
                );
                if let Some(t) = truth {
                    let err = relative_error(&found.u, &t.u).max(relative_error(&found.x, &t.x));
                    let ok = err <= ROUND_TRIP_TOLERANCE;
                    out.pass &= ok;
                    line.push_str(&format!(" round trip {err:e} {}", verdict(ok)));
                    summary["round_trip_error"] = json!(err);
                }
                out.text.push(line);
            }
            Err(e) => {
                out.text.push(format!("  constants: {e}"));
                summary["constants_error"] = json!(e.to_string());
            }
        }
    }
    if p.common.run.exactness.unwrap_or(true) {
        match exactness_check(&orbit) {
            Ok(rep) => {
                out.pass &= rep.pass;
                out.text.push(format!(
                    "  exactness deviation {:e} {}",
                    rep.deviation,
                    verdict(rep.pass)
                ));
                summary["exactness"] =
                    json!({ "deviation": rep.deviation, "linear": rep.linear, "pass": rep.pass });
            }
            Err(e) => {
                out.pass = false;
                out.text.push(format!("  exactness FAIL: {e}"));
                summary["exactness"] = json!({ "error": e.to_string(), "pass": false });
            }
        }
    }
    summary["pass"] = json!(out.pass);
    out.summary = summary;
    out.orbit_csv = csv(&orbit);
    out
}

fn run_scheme(problem: &Problem, p: &SchemeSetup, o: &Overrides) -> Result<Report, CliError> {
    let mut r = Report::new("run", problem);
    let run = &p.common.run;
    let steps = o.steps.or(run.steps).unwrap_or(100);
    let tol = o.tol.or(run.tol).unwrap_or(DRIFT_TOLERANCE);
    let stepper = Stepper::new(&p.bound).map_err(CliError::failed)?;
    let n = p.bound.order() as usize;
    let integrals = configured_integrals(problem, |sym, sol| {
        let j = first_integral_discrete(&p.bound, p.common.symmetry(sym), p.solution(sol));
        Ok(j.map_err(CliError::failed)?.best_form().clone())
    })?;
    for (name, s) in &p.common.symmetries {
        if let Ok(false) = discrete_symmetry_check(&p.bound, s) {
            r.line(format!("note: {name} is not a symmetry of the scheme"));
        }
    }

    let mut starts: Vec<(Orbit<BigRational>, Option<SolutionFamily<f64>>)> = Vec::new();
    if let Some(initial) = &run.initial {
        if initial.len() < n {
            return Err(CliError::Input(format!(
                "[run] initial needs at least {n} points"
            )));
        }
        let points = initial
            .iter()
            .map(|[x, u]| Ok((x.to_rational()?, u.to_rational()?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        starts.push((Orbit::new(run.base.unwrap_or(0), points), None));
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed(problem, o));
        for _ in 0..samples(problem) {
            let fam = random_generic_family(&mut rng);
            let init = fam
                .orbit(run.base.unwrap_or(0), n)
                .map_err(CliError::failed)?;
            starts.push((init, Some(fam.to_f64())));
        }
    }

    let plan = Plan {
        setup: p,
        stepper,
        integrals,
        steps,
        tol,
    };
    let mut orbits_json = Vec::new();
    let mut drift_reports = Vec::new();
    for (i, (init, truth)) in starts.iter().enumerate() {
        let outcome = if o.exact_rational {
            run_orbit(&plan, init, truth.as_ref(), orbit_csv_exact)
        } else {
            let init = init.map(DoubleDouble::from_rational);
            run_orbit(&plan, &init, truth.as_ref(), orbit_csv)
        };
        r.pass &= outcome.pass;
        r.line(format!("orbit {i}: {}", verdict(outcome.pass)));
        for t in &outcome.text {
            r.line(format!("  {t}"));
        }
        let mut s = outcome.summary;
        s["index"] = json!(i);
        orbits_json.push(s);
        r.files.push((format!("orbit_{i}.csv"), outcome.orbit_csv));
        for mut d in outcome.drifts {
            d.name = format!("{}@{i}", d.name);
            drift_reports.push(d);
        }
    }
    r.files
        .push(("drift.csv".into(), drift_csv(&drift_reports)));
    r.set("steps", json!(steps));
    r.set("tolerance", json!(tol));
    r.set(
        "arithmetic",
        json!(if o.exact_rational {
            "exact-rational"
        } else {
            "double-double"
        }),
    );
    r.set("orbits", json!(orbits_json));
    r.line(format!("{} orbits {}", starts.len(), verdict(r.pass)));
    Ok(r.finish())
}
