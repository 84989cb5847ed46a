//! Best constants: endpoint limits and values of monotone ratio functions,
//! closed forms, and bracketed roots.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;
use thiserror::Error;

use crate::catalog::{self, CheckConfig, Verdict};
use crate::exprlang::{parse_with_vars, EvalError, Expr, ParseError, Parsed, Program};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstantError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("expected a function of one variable, found variables {0:?}")]
    NotUnivariate(Vec<String>),
    #[error("extrapolation does not settle (smallest delta {delta:e})")]
    NoLimit { delta: f64 },
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {flo}, f(hi) = {fhi}")]
    Bracket { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("`{0}` is a relation, not an expression")]
    NotExpression(String),
    #[error("unknown constant `{0}`")]
    UnknownId(String),
    #[error(transparent)]
    Catalog(#[from] catalog::CatalogError),
}

pub type Result<T> = std::result::Result<T, ConstantError>;

/// First sample point of the extrapolation sequence x_j = X0 * 2^-j.
pub const LIMIT_X0: f64 = 0.1;
pub const LIMIT_STEPS: usize = 20;
/// Extrapolations whose best delta exceeds this (relative) are rejected.
const LIMIT_ACCEPT: f64 = 1e-6;
const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantKind {
    EndpointLimit,
    EndpointValue,
    ClosedForm,
    Root,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Definition {
    /// Limit of `f` as its variable tends to 0 from above.
    Limit { f: Expr },
    Value { f: Expr, at: f64 },
    Closed { expr: Expr },
    Root { f: Expr, lo: f64, hi: f64, tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantSpec {
    pub id: String,
    pub definition: Definition,
    /// Decimal approximation given alongside the constant in the literature.
    pub paper_decimal: Option<f64>,
    pub note: String,
}

impl ConstantSpec {
    pub fn kind(&self) -> ConstantKind {
        match self.definition {
            Definition::Limit { .. } => ConstantKind::EndpointLimit,
            Definition::Value { .. } => ConstantKind::EndpointValue,
            Definition::Closed { .. } => ConstantKind::ClosedForm,
            Definition::Root { .. } => ConstantKind::Root,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantResult {
    pub id: String,
    pub value: f64,
    pub error_estimate: f64,
    pub method_trace: String,
    pub paper_decimal: Option<f64>,
}

impl ConstantResult {
    fn new(value: f64, error_estimate: f64, method_trace: String) -> Self {
        ConstantResult {
            id: String::new(),
            value,
            error_estimate,
            method_trace,
            paper_decimal: None,
        }
    }

    /// |value - paper_decimal|, when a decimal is on record.
    pub fn deviation(&self) -> Option<f64> {
        self.paper_decimal.map(|d| (self.value - d).abs())
    }
}

fn univariate(f: &Expr) -> Result<Program> {
    let vars: Vec<String> = f.free_vars().into_iter().collect();
    match vars.as_slice() {
        [] => Ok(Program::compile(f, &[])?),
        [v] => Ok(Program::compile(f, &[v.as_str()])?),
        _ => Err(ConstantError::NotUnivariate(vars)),
    }
}

fn call(p: &Program, x: f64) -> Result<f64> {
    // constant expressions compile with no slots and ignore the argument
    Ok(p.eval(&[x])?)
}

fn ulps(v: f64, n: f64) -> f64 {
    n * f64::EPSILON * v.abs().max(f64::MIN_POSITIVE)
}

/// Richardson extrapolation of f(x_j), x_j = 0.1 * 2^-j, eliminating even
/// powers of x. Stops once the diagonal deltas start growing (rounding noise
/// takes over) and returns the diagonal entry with the smallest delta.
pub fn limit_at_zero(f: &Expr) -> Result<ConstantResult> {
    let prog = univariate(f)?;
    let mut prev_row: Vec<f64> = Vec::new();
    let mut best: Option<(f64, f64, usize)> = None;
    let mut last_delta = f64::INFINITY;
    for j in 0..=LIMIT_STEPS {
        let x = LIMIT_X0 * 0.5f64.powi(j as i32);
        let mut row = vec![call(&prog, x)?];
        for k in 1..=j {
            let factor = 4f64.powi(k as i32) - 1.0;
            row.push(row[k - 1] + (row[k - 1] - prev_row[k - 1]) / factor);
        }
        if j > 0 {
            let delta = (row[j] - prev_row[j - 1]).abs();
            if !delta.is_finite() {
                break;
            }
            if best.is_none_or(|(_, d, _)| delta < d) {
                best = Some((row[j], delta, j));
            }
            if j >= 2 && delta > last_delta {
                break;
            }
            last_delta = delta;
        }
        prev_row = row;
    }
    let Some((value, delta, j)) = best else {
        return Err(ConstantError::NoLimit { delta: f64::INFINITY });
    };
    if !(delta <= LIMIT_ACCEPT * value.abs().max(1.0)) {
        return Err(ConstantError::NoLimit { delta });
    }
    Ok(ConstantResult::new(
        value,
        delta,
        format!("richardson x0={LIMIT_X0} ratio=1/2 even powers; best diagonal j={j} delta={delta:.3e}"),
    ))
}

pub fn endpoint_value(f: &Expr, at: f64) -> Result<ConstantResult> {
    let prog = univariate(f)?;
    let v = call(&prog, at)?;
    Ok(ConstantResult::new(v, ulps(v, 4.0), format!("direct evaluation at {at}")))
}

/// Bisection on [lo, hi] until the bracket is at most `tol` wide.
pub fn solve_root(f: &Expr, lo: f64, hi: f64, tol: f64) -> Result<ConstantResult> {
    if !(tol > 0.0) {
        return Err(ConstantError::Tolerance(tol));
    }
    let prog = univariate(f)?;
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (fa, fb) = (call(&prog, a)?, call(&prog, b)?);
    if !(fa.signum() * fb.signum() < 0.0) || fa == 0.0 || fb == 0.0 {
        if fa == 0.0 || fb == 0.0 {
            let r = if fa == 0.0 { a } else { b };
            return Ok(ConstantResult::new(r, 0.0, "bracket end is an exact root".into()));
        }
        return Err(ConstantError::Bracket {
            lo,
            hi,
            flo: fa,
            fhi: fb,
        });
    }
    let neg_left = fa < 0.0;
    let mut steps = 0;
    while b - a > tol && steps < MAX_BISECTIONS {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = call(&prog, m)?;
        if fm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if (fm < 0.0) == neg_left {
            a = m;
        } else {
            b = m;
        }
        steps += 1;
    }
    let root = 0.5 * (a + b);
    let residual = call(&prog, root)?.abs();
    Ok(ConstantResult::new(
        root,
        0.5 * (b - a),
        format!("bisection {steps} steps; residual {residual:.3e}"),
    ))
}

pub fn evaluate_constant(spec: &ConstantSpec) -> Result<ConstantResult> {
    let mut r = match &spec.definition {
        Definition::Limit { f } => limit_at_zero(f)?,
        Definition::Value { f, at } => endpoint_value(f, *at)?,
        Definition::Closed { expr } => {
            let v = univariate(expr)?.eval(&[])?;
            ConstantResult::new(v, ulps(v, 4.0), "closed form".into())
        }
        Definition::Root { f, lo, hi, tol } => solve_root(f, *lo, *hi, *tol)?,
    };
    r.id = spec.id.clone();
    r.paper_decimal = spec.paper_decimal;
    Ok(r)
}

/// Parses a constant-free or univariate expression in `x`.
pub fn parse_function(text: &str) -> Result<Expr> {
    match parse_with_vars(text, &["x"])? {
        Parsed::Expr(e) => Ok(e),
        Parsed::Chain(_) => Err(ConstantError::NotExpression(text.to_string())),
    }
}

pub const H1: &str = "ln(x/sin(x))/ln(cosh(x))";
pub const H2: &str = "ln(2/(cos(x)+1))/ln(sinh(x)/x)";
pub const H: &str = "ln(x/sin(x))/ln(sinh(x)/x)";
pub const LAMBDA_FN: &str = "cosh(x)^3*cos(x)^2 - 1";
pub const K_STAR: &str = "pi/2*(2 + cosh(pi/2))/sinh(pi/2)";
pub const K: &str = "pi/2*(pi + cosh(pi/2))/sinh(pi/2)";

// printed decimals are kept as printed
#[allow(clippy::approx_constant)]
pub fn builtin_constants() -> Vec<ConstantSpec> {
    let f = |t: &str| parse_function(t).expect("builtin constant expression");
    let spec = |id: &str, definition: Definition, paper_decimal: Option<f64>, note: &str| ConstantSpec {
        id: id.to_string(),
        definition,
        paper_decimal,
        note: note.to_string(),
    };
    use std::f64::consts::FRAC_PI_4;
    vec![
        spec("h1(0+)", Definition::Limit { f: f(H1) }, Some(1.0 / 3.0), "least q in sin x/x < (1/cosh x)^q"),
        spec("h1(pi/2)", Definition::Value { f: f(H1), at: FRAC_PI_2 }, Some(0.49), "greatest p in (1/cosh x)^p < sin x/x"),
        spec("h2(0+)", Definition::Limit { f: f(H2) }, Some(1.5), "p' in (sinh x/x)^p' < 2/(cos x + 1)"),
        spec("h2(pi/2)", Definition::Value { f: f(H2), at: FRAC_PI_2 }, Some(1.818), "q' in 2/(cos x + 1) < (sinh x/x)^q'"),
        spec("h(0+)", Definition::Limit { f: f(H) }, Some(1.0), "p in (sinh x/x)^p < x/sin x"),
        spec("h(pi/2)", Definition::Value { f: f(H), at: FRAC_PI_2 }, Some(1.18), "q in x/sin x < (sinh x/x)^q"),
        spec(
            "lambda",
            Definition::Root { f: f(LAMBDA_FN), lo: FRAC_PI_4, hi: FRAC_PI_2, tol: 1e-15 },
            None,
            "cosh^3 x cos^2 x = 1 on (pi/4, pi/2)",
        ),
        spec(
            "x0",
            Definition::Root { f: f("cos(x) - 1/2"), lo: 0.0, hi: FRAC_PI_2, tol: 1e-15 },
            Some(1.0471),
            "2 cos x = 1",
        ),
        spec("k*", Definition::Closed { expr: f(K_STAR) }, None, "(pi/2)(2 + cosh(pi/2))/sinh(pi/2)"),
        spec("k", Definition::Closed { expr: f(K) }, None, "(pi/2)(pi + cosh(pi/2))/sinh(pi/2)"),
    ]
}

pub fn lookup_constant(id: &str) -> Result<ConstantSpec> {
    builtin_constants()
        .into_iter()
        .find(|s| s.id == id)
        .ok_or_else(|| ConstantError::UnknownId(id.to_string()))
}

pub fn evaluate_all() -> Result<Vec<ConstantResult>> {
    builtin_constants().iter().map(evaluate_constant).collect()
}

/// The root of cosh^3 x cos^2 x = 1 in (pi/4, pi/2).
pub fn lambda() -> f64 {
    let spec = lookup_constant("lambda").expect("builtin");
    evaluate_constant(&spec).expect("lambda bracket").value
}

/// An exponent that is best possible for a one-parameter inequality: moving
/// it by any amount toward `forbidden` breaks the inequality somewhere.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub name: String,
    /// Chain in `x` and the exponent `c`.
    pub chain: String,
    pub domain: String,
    pub best: String,
    /// +1 when larger exponents are forbidden, -1 when smaller ones are.
    pub forbidden: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessResult {
    pub name: String,
    pub best: f64,
    pub perturbed: f64,
    pub best_verdict: Verdict,
    pub perturbed_verdict: Verdict,
    pub perturbed_violations: usize,
}

impl WitnessResult {
    pub fn confirms(&self) -> bool {
        self.best_verdict == Verdict::Holds && self.perturbed_verdict == Verdict::Violated
    }
}

pub fn builtin_witnesses() -> Vec<Witness> {
    let w = |name: &str, chain: &str, best: &str, forbidden: f64| Witness {
        name: name.to_string(),
        chain: chain.to_string(),
        domain: "x:(0,pi/2)".to_string(),
        best: best.to_string(),
        forbidden,
    };
    vec![
        w("q of 1/cosh", "sin(x)/x < (1/cosh(x))^c", "1/3", 1.0),
        w("p of 1/cosh", "(1/cosh(x))^c < sin(x)/x", "ln(pi/2)/ln(cosh(pi/2))", -1.0),
        w("p' of sinh/x", "(sinh(x)/x)^c < 2/(cos(x)+1)", "3/2", 1.0),
        w("q' of sinh/x", "2/(cos(x)+1) < (sinh(x)/x)^c", "ln(2)/ln(sinh(pi/2)/(pi/2))", -1.0),
        w("p of x/sin", "(sinh(x)/x)^c < x/sin(x)", "1", 1.0),
        w("q of x/sin", "x/sin(x) < (sinh(x)/x)^c", "ln(pi/2)/ln(sinh(pi/2)/(pi/2))", -1.0),
    ]
}

/// Checks the inequality at the best exponent and at best + step toward the
/// forbidden side.
pub fn check_witness(w: &Witness, step: f64, cfg: &CheckConfig) -> Result<WitnessResult> {
    let best = univariate(&parse_function(&w.best)?)?.eval(&[])?;
    let perturbed = best + w.forbidden * step.abs();
    let run = |c: f64| -> Result<catalog::CheckReport> {
        let line = format!("W\tas-printed\t{}\tc={c:e}\t{}\twitness\n", w.domain, w.chain);
        let entries = catalog::load_manifest(&line)?;
        Ok(catalog::check_entry(&entries[0], cfg)?)
    };
    let at_best = run(best)?;
    let off = run(perturbed)?;
    Ok(WitnessResult {
        name: w.name.clone(),
        best,
        perturbed,
        best_verdict: at_best.verdict,
        perturbed_verdict: off.verdict,
        perturbed_violations: off.n_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn limit(text: &str) -> ConstantResult {
        limit_at_zero(&parse_function(text).unwrap()).unwrap()
    }

    #[test]
    fn limits_of_ratio_functions() {
        assert!((limit(H1).value - 1.0 / 3.0).abs() < 1e-8);
        assert!((limit(H2).value - 1.5).abs() < 1e-8);
        assert!((limit(H).value - 1.0).abs() < 1e-8);
        assert!((limit("sin(x)/x").value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn divergent_limit_is_rejected() {
        let r = limit_at_zero(&parse_function("1/x").unwrap());
        assert!(matches!(r, Err(ConstantError::NoLimit { .. })), "{r:?}");
        let r = limit_at_zero(&parse_function("sin(1/x)").unwrap());
        assert!(r.is_err());
    }

    #[test]
    fn endpoint_values() {
        let v = endpoint_value(&parse_function(H1).unwrap(), FRAC_PI_2).unwrap();
        // mpmath: 0.490874563241302943
        assert!((v.value - 0.490874563241302943).abs() < 1e-15);
        let v = endpoint_value(&parse_function(H).unwrap(), FRAC_PI_2).unwrap();
        assert!((v.value - 1.18249109618374663594).abs() < 1e-14);
        assert!(endpoint_value(&parse_function("ln(x)").unwrap(), 0.0).is_err());
    }

    #[test]
    fn roots() {
        let r = solve_root(&parse_function(LAMBDA_FN).unwrap(), std::f64::consts::FRAC_PI_4, FRAC_PI_2, 1e-13).unwrap();
        // mpmath: 1.06752063939280527172
        assert!((r.value - 1.06752063939280527172).abs() < 1e-12);
        let r = solve_root(&parse_function("cos(x) - 1/2").unwrap(), 0.0, FRAC_PI_2, 1e-14).unwrap();
        assert!((r.value - std::f64::consts::FRAC_PI_3).abs() < 1e-14);
        let r = solve_root(&parse_function("x^2 + 1").unwrap(), 0.0, 1.0, 1e-10);
        assert!(matches!(r, Err(ConstantError::Bracket { .. })));
        assert!(solve_root(&parse_function("x").unwrap(), -1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn closed_forms_are_ordered() {
        let ks = evaluate_constant(&lookup_constant("k*").unwrap()).unwrap().value;
        let k = evaluate_constant(&lookup_constant("k").unwrap()).unwrap().value;
        assert!(3.0 < ks && ks < k && k < std::f64::consts::PI + 1.0);
        assert!((ks - 3.0778274756213633).abs() < 1e-14);
        assert!((k - 3.8570437456838938).abs() < 1e-14);
    }

    #[test]
    fn all_builtins_evaluate() {
        let all = evaluate_all().unwrap();
        assert_eq!(all.len(), builtin_constants().len());
        let q2 = all.iter().find(|r| r.id == "h2(pi/2)").unwrap();
        // mpmath: 1.81503932669793260238; the literature rounds it to 1.818
        assert!((q2.value - 1.81503932669793260238).abs() < 1e-13);
        assert!(q2.deviation().unwrap() > 2e-3);
        assert!(all.iter().all(|r| r.error_estimate >= 0.0));
    }

    #[test]
    fn rejects_two_variables() {
        let e = crate::exprlang::parse_expr("x*y").unwrap();
        assert!(matches!(limit_at_zero(&e), Err(ConstantError::NotUnivariate(_))));
    }
}
