use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use firstint::continuous::{OdeProblem, PointSymmetry};
use firstint::discrete::{AdjointSolution, SchemeSystem};
use firstint::expr::{parse, Expression, Var};
use num_rational::BigRational;
use serde::Deserialize;

use crate::CliError;

/// A numeric value in a problem file: an integer, a float, or a string
/// holding an exact rational such as `"1/3"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Number {
    pub fn to_rational(&self) -> Result<BigRational, CliError> {
        match self {
            Number::Int(n) => Ok(BigRational::from_integer((*n).into())),
            Number::Float(x) => BigRational::from_float(*x)
                .ok_or_else(|| CliError::Input(format!("{x} is not a finite number"))),
            Number::Text(s) => parse(s)
                .ok()
                .and_then(|e| e.to_rational_function().ok())
                .and_then(|r| r.as_constant())
                .ok_or_else(|| CliError::Input(format!("{s:?} is not a rational number"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Ode,
    Scheme,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryEntry {
    pub name: String,
    pub xi: String,
    pub eta: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionEntry {
    pub name: String,
    pub v: String,
    #[serde(default)]
    pub w: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegralEntry {
    pub name: String,
    pub symmetry: String,
    pub solution: String,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    /// Sampled orbits or bindings for the randomized checks.
    pub samples: Option<usize>,
    /// Scheme runs: index of the first initial point.
    pub base: Option<i64>,
    /// Scheme runs: initial `(x, u)` points; when absent, orbits start on
    /// random members of the closed-form solution family.
    pub initial: Option<Vec<[Number; 2]>>,
    /// Scheme runs: check that the orbit lies on a continuous solution.
    pub exactness: Option<bool>,
    /// ODE runs: initial `x`.
    pub x0: Option<f64>,
    /// ODE runs: initial `u, u', ...`.
    pub state: Option<Vec<f64>>,
    /// ODE runs: step size.
    pub h: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub kind: Kind,
    #[serde(default)]
    pub name: Option<String>,
    pub f: String,
    #[serde(default)]
    pub omega: Option<String>,
    #[serde(default)]
    pub order: Option<u32>,
    #[serde(default)]
    pub constants: BTreeMap<String, Number>,
    #[serde(default)]
    pub symmetries: Vec<SymmetryEntry>,
    #[serde(default)]
    pub solutions: Vec<SolutionEntry>,
    #[serde(default)]
    pub integrals: Vec<IntegralEntry>,
    /// Symmetries tabulated by `integrals`; all of them when absent.
    #[serde(default)]
    pub grid: Option<Vec<String>>,
    #[serde(default)]
    pub run: RunConfig,
}

pub struct Common {
    pub name: String,
    pub constants: BTreeMap<String, BigRational>,
    pub symmetries: Vec<(String, PointSymmetry)>,
    pub integrals: Vec<IntegralEntry>,
    pub grid: Option<Vec<String>>,
    pub run: RunConfig,
}

impl Common {
    /// A symmetry by name; names are checked when the file is loaded.
    pub fn symmetry(&self, name: &str) -> &PointSymmetry {
        &self
            .symmetries
            .iter()
            .find(|(n, _)| n == name)
            .expect("known symmetry")
            .1
    }

    /// The symmetries tabulated by `integrals`.
    pub fn grid_symmetries(&self) -> Vec<(String, PointSymmetry)> {
        self.symmetries
            .iter()
            .filter(|(n, _)| self.grid.as_ref().is_none_or(|g| g.contains(n)))
            .cloned()
            .collect()
    }
}

pub struct OdeSetup {
    pub common: Common,
    pub problem: OdeProblem,
    pub solutions: Vec<(String, Expression)>,
}

pub struct SchemeSetup {
    pub common: Common,
    /// With constants kept symbolic.
    pub scheme: SchemeSystem,
    /// With constants bound to their values.
    pub bound: SchemeSystem,
    pub solutions: Vec<(String, AdjointSolution)>,
}

impl OdeSetup {
    pub fn solution(&self, name: &str) -> &Expression {
        &self
            .solutions
            .iter()
            .find(|(n, _)| n == name)
            .expect("known solution")
            .1
    }
}

impl SchemeSetup {
    pub fn solution(&self, name: &str) -> &AdjointSolution {
        &self
            .solutions
            .iter()
            .find(|(n, _)| n == name)
            .expect("known solution")
            .1
    }
}

#[allow(clippy::large_enum_variant)]
pub enum Problem {
    Ode(OdeSetup),
    Scheme(SchemeSetup),
}

impl Problem {
    pub fn common(&self) -> &Common {
        match self {
            Problem::Ode(p) => &p.common,
            Problem::Scheme(p) => &p.common,
        }
    }
}

fn input<E: std::fmt::Display>(what: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Input(format!("{what}: {e}"))
}

fn expression(what: &str, text: &str) -> Result<Expression, CliError> {
    parse(text).map_err(input(what))
}

fn unique<'a>(what: &str, names: impl Iterator<Item = &'a str>) -> Result<(), CliError> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(CliError::Input(format!("duplicate {what} name {n:?}")));
        }
    }
    Ok(())
}

fn check_constants(
    constants: &BTreeMap<String, BigRational>,
    exprs: &[(&str, &Expression)],
) -> Result<(), CliError> {
    for (what, e) in exprs {
        for v in e.vars() {
            if let Var::Const(name) = &v {
                if !constants.contains_key(&**name) {
                    return Err(CliError::Input(format!(
                        "{what} uses the constant {name}, which has no value in [constants]"
                    )));
                }
            }
        }
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<Problem, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    from_toml(&text, &path.display().to_string())
}

pub fn from_toml(text: &str, origin: &str) -> Result<Problem, CliError> {
    let file: ProblemFile = toml::from_str(text).map_err(input(origin))?;
    build(file)
}

fn build(file: ProblemFile) -> Result<Problem, CliError> {
    unique("symmetry", file.symmetries.iter().map(|s| s.name.as_str()))?;
    unique("solution", file.solutions.iter().map(|s| s.name.as_str()))?;
    unique("integral", file.integrals.iter().map(|s| s.name.as_str()))?;
    for i in &file.integrals {
        if !file.symmetries.iter().any(|s| s.name == i.symmetry) {
            return Err(CliError::Input(format!(
                "integral {} refers to unknown symmetry {:?}",
                i.name, i.symmetry
            )));
        }
        if !file.solutions.iter().any(|s| s.name == i.solution) {
            return Err(CliError::Input(format!(
                "integral {} refers to unknown solution {:?}",
                i.name, i.solution
            )));
        }
    }
    for name in file.grid.iter().flatten() {
        if !file.symmetries.iter().any(|s| &s.name == name) {
            return Err(CliError::Input(format!(
                "grid refers to unknown symmetry {name:?}"
            )));
        }
    }
    let constants = file
        .constants
        .iter()
        .map(|(k, v)| Ok((k.clone(), v.to_rational()?)))
        .collect::<Result<BTreeMap<_, _>, CliError>>()?;

    let mut symmetries = Vec::new();
    let mut checked: Vec<(String, Expression)> = Vec::new();
    for s in &file.symmetries {
        let what = format!("symmetry {}", s.name);
        let xi = expression(&what, &s.xi)?;
        let eta = expression(&what, &s.eta)?;
        checked.push((what.clone(), xi.clone()));
        checked.push((what.clone(), eta.clone()));
        symmetries.push((
            s.name.clone(),
            PointSymmetry::new(xi, eta).map_err(input(&what))?,
        ));
    }
    let f = expression("f", &file.f)?;
    checked.push(("f".into(), f.clone()));
    let common = |checked: &[(String, Expression)]| -> Result<Common, CliError> {
        let refs: Vec<(&str, &Expression)> = checked.iter().map(|(w, e)| (w.as_str(), e)).collect();
        check_constants(&constants, &refs)?;
        Ok(Common {
            name: file.name.clone().unwrap_or_else(|| "problem".into()),
            constants: constants.clone(),
            symmetries: symmetries.clone(),
            integrals: file.integrals.clone(),
            grid: file.grid.clone(),
            run: file.run.clone(),
        })
    };

    match file.kind {
        Kind::Ode => {
            if file.omega.is_some() {
                return Err(CliError::Input("an ode problem has no omega".into()));
            }
            let problem = OdeProblem::new(f).map_err(input("f"))?;
            let mut solutions = Vec::new();
            for s in &file.solutions {
                let what = format!("solution {}", s.name);
                if s.w.is_some() {
                    return Err(CliError::Input(format!("{what}: an ode problem has no w")));
                }
                let v = expression(&what, &s.v)?;
                checked.push((what, v.clone()));
                solutions.push((s.name.clone(), v));
            }
            let common = common(&checked)?;
            Ok(Problem::Ode(OdeSetup {
                common,
                problem,
                solutions,
            }))
        }
        Kind::Scheme => {
            let omega_text = file
                .omega
                .as_deref()
                .ok_or_else(|| CliError::Input("a scheme needs omega".into()))?;
            let n = file
                .order
                .ok_or_else(|| CliError::Input("a scheme needs its order".into()))?;
            let omega = expression("omega", omega_text)?;
            checked.push(("omega".into(), omega.clone()));
            let scheme = SchemeSystem::new(f, omega, n).map_err(input("scheme"))?;
            let mut solutions = Vec::new();
            for s in &file.solutions {
                let what = format!("solution {}", s.name);
                let v = expression(&what, &s.v)?;
                let w = expression(&what, s.w.as_deref().unwrap_or("0"))?;
                checked.push((what.clone(), v.clone()));
                checked.push((what.clone(), w.clone()));
                solutions.push((
                    s.name.clone(),
                    AdjointSolution::new(v, w, n).map_err(input(&what))?,
                ));
            }
            let common = common(&checked)?;
            let bound = scheme
                .bind_constants(&common.constants)
                .map_err(input("scheme"))?;
            Ok(Problem::Scheme(SchemeSetup {
                common,
                scheme,
                bound,
                solutions,
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
kind = "scheme"
f = "(u[3]-u[1])*(u[2]-u[0])/((u[3]-u[2])*(u[1]-u[0])) - K"
omega = "(x[3]-x[1])*(x[2]-x[0])/((x[3]-x[2])*(x[1]-x[0])) - K"
order = 3
"#;

    fn err(text: &str) -> String {
        match from_toml(text, "test") {
            Err(CliError::Input(msg)) => msg,
            Err(e) => panic!("unexpected error {e}"),
            Ok(_) => panic!("accepted"),
        }
    }

    #[test]
    fn constants_must_be_bound() {
        assert!(err(BASE).contains("constant K"));
        assert!(from_toml(&format!("{BASE}\n[constants]\nK = \"4\"\n"), "t").is_ok());
    }

    #[test]
    fn names_must_be_unique_and_resolved() {
        let text = format!(
            "{BASE}\n[constants]\nK = 4\n[[symmetries]]\nname = \"X1\"\nxi = \"0\"\neta = \"1\"\n\
             [[symmetries]]\nname = \"X1\"\nxi = \"0\"\neta = \"u\"\n"
        );
        assert!(err(&text).contains("duplicate symmetry"));
        let text = format!(
            "{BASE}\n[constants]\nK = 4\n[[integrals]]\nname = \"J\"\nsymmetry = \"X9\"\nsolution = \"a\"\n"
        );
        assert!(err(&text).contains("unknown symmetry"));
    }

    #[test]
    fn malformed_expressions_report_positions() {
        let text = BASE.replace("- K\"\nomega", "- * K\"\nomega");
        let msg = err(&format!("{text}\n[constants]\nK = 4\n"));
        assert!(msg.starts_with("f:") && msg.contains("column"), "{msg}");
    }
}
