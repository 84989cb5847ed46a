//! Inequality catalog and the sampling checker that certifies it.
//!
//! A manifest line holds tab-separated fields:
//! `ids  status  domain  params  chain  source  [correction]`.
//! `ids` may list aliases separated by `|`; `params` is `-` or a `;`-separated
//! list of grids, each either a preset name (`t`, `k`, `r`, `q`) or
//! `name=expr,expr,...`.
//!
//! Domains:
//! * `x:(lo,hi]` - one variable, brackets give open/closed ends, bounds may use parameters;
//! * `pairs` - mean-level chains in `a`, `b`;
//! * `x:(..) & y:(..) & <constraint chain>` - a two-variable region;
//! * `const` - no variables.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::exprlang::{
    parse_chain_with_vars, parse_with_vars, EvalError, Expr, ParseError, Parsed, Program, Rel, RelationChain,
};

const BUILTIN_MANIFEST: &str = include_str!("../data/catalog.tsv");

/// u-values always sampled for mean-level entries.
pub const PAIR_U_GRID: [f64; 10] = [1e-6, 1e-4, 1e-2, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999];
pub const RANDOM_PAIRS: usize = 100;
pub const DEFAULT_SEED: u64 = 20_240_917;

// Stored violations/flags per report; the totals are always counted.
const KEEP: usize = 16;
// Safety factor applied to propagated rounding-error bounds.
const ERROR_SAFETY: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error("entry {id}: {msg}")]
    Integrity { id: String, msg: String },
    #[error("unknown entry id `{0}`")]
    UnknownId(String),
    #[error("invalid check config: {0}")]
    Config(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T> = std::result::Result<T, CatalogError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    AsPrinted,
    Corrected,
    MisprintSuspected,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::AsPrinted => "as-printed",
            Status::Corrected => "corrected",
            Status::MisprintSuspected => "misprint-suspected",
        }
    }

    pub fn expected(self) -> Verdict {
        match self {
            Status::MisprintSuspected => Verdict::Violated,
            _ => Verdict::Holds,
        }
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "as-printed" => Ok(Status::AsPrinted),
            "corrected" => Ok(Status::Corrected),
            "misprint-suspected" => Ok(Status::MisprintSuspected),
            _ => Err(format!("unknown status `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interval {
    pub var: String,
    pub lo: Expr,
    pub hi: Expr,
    pub open_lo: bool,
    pub open_hi: bool,
}

impl Interval {
    /// Parses `x:(lo,hi]` against the given parameter names.
    pub fn parse(text: &str, params: &[&str]) -> std::result::Result<Interval, String> {
        let (var, rest) = text.split_once(':').ok_or("expected `var:(lo,hi)`")?;
        let var = var.trim();
        let rest = rest.trim();
        let open_lo = match rest.chars().next() {
            Some('(') => true,
            Some('[') => false,
            _ => return Err("interval must start with `(` or `[`".into()),
        };
        let open_hi = match rest.chars().last() {
            Some(')') => true,
            Some(']') => false,
            _ => return Err("interval must end with `)` or `]`".into()),
        };
        let body = &rest[1..rest.len() - 1];
        let parts = split_top(body, ',');
        if parts.len() != 2 {
            return Err(format!("interval `{rest}` needs exactly two bounds"));
        }
        let bound = |s: &str| match parse_with_vars(s, params) {
            Ok(Parsed::Expr(e)) => Ok(e),
            Ok(Parsed::Chain(_)) => Err(format!("bound `{s}` is a relation")),
            Err(e) => Err(format!("bound `{s}`: {e}")),
        };
        Ok(Interval {
            var: var.to_string(),
            lo: bound(parts[0])?,
            hi: bound(parts[1])?,
            open_lo,
            open_hi,
        })
    }

    /// Numeric bounds for one parameter assignment.
    pub fn bounds(&self, names: &[&str], values: &[f64]) -> Result<(f64, f64)> {
        let lo = Program::compile(&self.lo, names)?.eval(values)?;
        let hi = Program::compile(&self.hi, names)?.eval(values)?;
        Ok((lo, hi))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.open_lo { '(' } else { '[' };
        let r = if self.open_hi { ')' } else { ']' };
        write!(f, "{}:{l}{},{}{r}", self.var, self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Shape {
    Interval(Interval),
    Pairs,
    Region {
        x: Interval,
        y: Interval,
        constraint: RelationChain,
    },
    Const,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamGrid {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainSpec {
    pub shape: Shape,
    pub params: Vec<ParamGrid>,
}

impl DomainSpec {
    pub fn variables(&self) -> Vec<&str> {
        match &self.shape {
            Shape::Interval(i) => vec![i.var.as_str()],
            Shape::Pairs => vec!["a", "b"],
            Shape::Region { x, y, .. } => vec![x.var.as_str(), y.var.as_str()],
            Shape::Const => vec![],
        }
    }

    /// Variable names followed by parameter names: the slot order of every point.
    pub fn slots(&self) -> Vec<&str> {
        let mut s = self.variables();
        s.extend(self.params.iter().map(|p| p.name.as_str()));
        s
    }

    /// Cartesian product of the parameter grids.
    pub fn param_combos(&self) -> Vec<Vec<f64>> {
        let mut combos = vec![vec![]];
        for g in &self.params {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    g.values.iter().map(move |v| {
                        let mut c = c.clone();
                        c.push(*v);
                        c
                    })
                })
                .collect();
        }
        combos
    }

    fn text(&self) -> String {
        match &self.shape {
            Shape::Interval(i) => i.to_string(),
            Shape::Pairs => "pairs".into(),
            Shape::Region { x, y, constraint } => format!("{x} & {y} & {constraint}"),
            Shape::Const => "const".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    /// Primary id first, then aliases.
    pub ids: Vec<String>,
    pub status: Status,
    pub domain: DomainSpec,
    pub chain: RelationChain,
    pub source_note: String,
    pub correction_note: Option<String>,
}

impl CatalogEntry {
    pub fn id(&self) -> &str {
        &self.ids[0]
    }

    pub fn matches(&self, id: &str) -> bool {
        self.ids.iter().any(|i| i == id)
    }

    pub fn domain_text(&self) -> String {
        self.domain.text()
    }

    pub fn params_text(&self) -> String {
        if self.domain.params.is_empty() {
            return "-".into();
        }
        self.domain
            .params
            .iter()
            .map(|g| {
                let vals: Vec<String> = g.values.iter().map(|v| v.to_string()).collect();
                format!("{}={}", g.name, vals.join(","))
            })
            .collect::<Vec<_>>()
            .join(";")
    }
}

// ---------------------------------------------------------------------------
// manifest

/// Splits on `sep` outside parentheses.
fn split_top(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(s[start..i].trim());
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out
}

fn const_value(text: &str) -> std::result::Result<f64, String> {
    let e = match parse_with_vars(text, &[]) {
        Ok(Parsed::Expr(e)) => e,
        Ok(Parsed::Chain(_)) => return Err(format!("`{text}` is a relation")),
        Err(e) => return Err(format!("`{text}`: {e}")),
    };
    Program::compile(&e, &[])
        .and_then(|p| p.eval(&[]))
        .map_err(|e| format!("`{text}`: {e}"))
}

/// Named parameter grids shared by many entries.
pub fn preset_grid(name: &str) -> Option<Vec<f64>> {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};
    match name {
        "t" => Some(vec![0.25, 0.5, 1.0, 2.0, 4.0]),
        "k" => Some(vec![0.1, 0.5, 0.9]),
        "r" => Some(vec![FRAC_PI_6, FRAC_PI_4, FRAC_PI_2]),
        "q" => Some(vec![FRAC_PI_2.ln() / (FRAC_PI_2.sinh() / FRAC_PI_2).ln()]),
        "lam" => Some(vec![crate::constants::lambda()]),
        _ => None,
    }
}

fn parse_params(text: &str) -> std::result::Result<Vec<ParamGrid>, String> {
    if text.trim() == "-" {
        return Ok(vec![]);
    }
    let mut grids = Vec::new();
    for item in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let grid = match item.split_once('=') {
            None => ParamGrid {
                name: item.to_string(),
                values: preset_grid(item).ok_or_else(|| format!("unknown parameter preset `{item}`"))?,
            },
            Some((name, vals)) => {
                let values = split_top(vals, ',')
                    .into_iter()
                    .filter(|s| !s.is_empty())
                    .map(const_value)
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                ParamGrid {
                    name: name.trim().to_string(),
                    values,
                }
            }
        };
        if grid.values.is_empty() {
            return Err(format!("parameter `{}` has an empty grid", grid.name));
        }
        grids.push(grid);
    }
    Ok(grids)
}

fn parse_shape(text: &str, params: &[&str]) -> std::result::Result<Shape, String> {
    let text = text.trim();
    match text {
        "pairs" => return Ok(Shape::Pairs),
        "const" => return Ok(Shape::Const),
        _ => {}
    }
    let parts: Vec<&str> = text.split('&').map(str::trim).collect();
    match parts.as_slice() {
        [one] => Ok(Shape::Interval(Interval::parse(one, params)?)),
        [xs, ys, cons] => {
            let x = Interval::parse(xs, params)?;
            let y = Interval::parse(ys, params)?;
            let mut vars: Vec<&str> = vec![x.var.as_str(), y.var.as_str()];
            vars.extend_from_slice(params);
            let constraint = parse_chain_with_vars(cons, &vars).map_err(|e| format!("constraint: {e}"))?;
            Ok(Shape::Region { x, y, constraint })
        }
        _ => Err(format!("unrecognized domain `{text}`")),
    }
}

/// Parses a manifest and checks its integrity.
pub fn load_manifest(text: &str) -> Result<Vec<CatalogEntry>> {
    let mut entries = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let err = |msg: String| CatalogError::Manifest { line, msg };
        let f: Vec<&str> = raw.split('\t').collect();
        if !(6..=7).contains(&f.len()) {
            return Err(err(format!("expected 6 or 7 tab-separated fields, got {}", f.len())));
        }
        let ids: Vec<String> = f[0].split('|').map(|s| s.trim().to_string()).collect();
        let status: Status = f[1].trim().parse().map_err(err)?;
        let params = parse_params(f[3]).map_err(err)?;
        let pnames: Vec<&str> = params.iter().map(|p| p.name.as_str()).collect();
        let shape = parse_shape(f[2], &pnames).map_err(err)?;
        let domain = DomainSpec { shape, params };
        let slots = domain.slots();
        let chain = parse_chain_with_vars(f[4].trim(), &slots).map_err(|e| err(e.to_string()))?;
        let correction_note = f.get(6).map(|s| s.trim().to_string()).filter(|s| !s.is_empty());
        entries.push(CatalogEntry {
            ids,
            status,
            domain,
            chain,
            source_note: f[5].trim().to_string(),
            correction_note,
        });
    }
    check_integrity(&entries)?;
    Ok(entries)
}

fn check_integrity(entries: &[CatalogEntry]) -> Result<()> {
    let mut seen = HashSet::new();
    for e in entries {
        let bad = |msg: &str| CatalogError::Integrity {
            id: e.id().to_string(),
            msg: msg.to_string(),
        };
        for id in &e.ids {
            if !seen.insert(id.clone()) {
                return Err(bad(&format!("duplicate id `{id}`")));
            }
        }
        if e.status == Status::Corrected && e.correction_note.is_none() {
            return Err(bad("corrected entry without a correction note"));
        }
        let used = e.chain.free_vars();
        for p in &e.domain.params {
            if p.values.is_empty() {
                return Err(bad(&format!("empty grid for `{}`", p.name)));
            }
        }
        let slots = e.domain.slots();
        if let Some(v) = used.iter().find(|v| !slots.contains(&v.as_str())) {
            return Err(bad(&format!("variable `{v}` not covered by the domain")));
        }
    }
    for e in entries.iter().filter(|e| e.status == Status::MisprintSuspected) {
        let paired = e
            .id()
            .strip_suffix("-as-printed")
            .and_then(|base| entries.iter().find(|c| c.matches(base)))
            .is_some_and(|c| c.status == Status::Corrected);
        if !paired {
            return Err(CatalogError::Integrity {
                id: e.id().to_string(),
                msg: "misprint-suspected entry without a corrected counterpart".into(),
            });
        }
    }
    Ok(())
}

/// The shipped catalog.
pub fn builtin_catalog() -> Result<Vec<CatalogEntry>> {
    load_manifest(BUILTIN_MANIFEST)
}

pub fn builtin_manifest_text() -> &'static str {
    BUILTIN_MANIFEST
}

pub fn lookup<'a>(entries: &'a [CatalogEntry], id: &str) -> Result<&'a CatalogEntry> {
    entries
        .iter()
        .find(|e| e.matches(id))
        .ok_or_else(|| CatalogError::UnknownId(id.to_string()))
}

// ---------------------------------------------------------------------------
// checking

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckConfig {
    pub samples: usize,
    pub interior_margin_fraction: f64,
    pub tie_tolerance: f64,
    pub endpoint_zoom_levels: u32,
    pub normalization: Normalization,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            samples: 2001,
            interior_margin_fraction: 1e-3,
            tie_tolerance: 1e-13,
            endpoint_zoom_levels: 6,
            normalization: Normalization::Relative,
            seed: DEFAULT_SEED,
        }
    }
}

impl CheckConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CatalogError::Config(m.to_string()));
        if self.samples < 101 || self.samples.is_multiple_of(2) {
            return bad("samples must be odd and at least 101");
        }
        if !(self.interior_margin_fraction > 0.0 && self.interior_margin_fraction < 0.5) {
            return bad("interior_margin_fraction must lie in (0, 0.5)");
        }
        if !(self.tie_tolerance > 0.0) {
            return bad("tie_tolerance must be positive");
        }
        if self.endpoint_zoom_levels == 0 {
            return bad("endpoint_zoom_levels must be positive");
        }
        Ok(())
    }

    /// Same config with a different number of samples, rounded up to odd.
    pub fn with_samples(mut self, n: usize) -> Self {
        self.samples = n | 1;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Violated,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    Numeric,
    Domain,
}

pub type Assignment = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub point: Assignment,
    pub lhs: f64,
    pub rhs: f64,
    /// Index of the failing link; for domain errors, the failing chain member.
    pub relation: usize,
    pub margin: f64,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointFlag {
    pub point: Assignment,
    pub relation: usize,
    pub margin: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub entry_id: String,
    pub status: Status,
    pub n_evaluated: usize,
    /// Interior (point, link) pairs whose margin is within the tie threshold.
    pub n_ties: usize,
    pub min_margin: Option<f64>,
    pub argmin: Option<Assignment>,
    pub n_violations: usize,
    pub n_domain_errors: usize,
    pub violations: Vec<Violation>,
    pub n_endpoint_flags: usize,
    pub endpoint_flags: Vec<EndpointFlag>,
    pub verdict: Verdict,
}

impl CheckReport {
    pub fn expected(&self) -> Verdict {
        self.status.expected()
    }

    pub fn as_expected(&self) -> bool {
        self.verdict == self.expected()
    }

    pub fn flags(&self) -> String {
        let mut f = Vec::new();
        if self.n_ties > 0 {
            f.push(format!("ties={}", self.n_ties));
        }
        if self.n_endpoint_flags > 0 {
            f.push(format!("indeterminate-at-endpoint={}", self.n_endpoint_flags));
        }
        if self.n_domain_errors > 0 {
            f.push(format!("domain-errors={}", self.n_domain_errors));
        }
        if self.status == Status::MisprintSuspected {
            f.push("misprint-suspected".into());
        }
        f.join(";")
    }

    pub fn argmin_text(&self) -> String {
        match &self.argmin {
            None => String::new(),
            Some(a) => a.iter().map(|(k, v)| format!("{k}={v:e}")).collect::<Vec<_>>().join(";"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PointKind {
    Interior,
    /// Zoom points and closed endpoints: ties and evaluation failures are flagged only.
    Edge,
}

#[derive(Debug, Clone)]
pub struct Point {
    pub values: Vec<f64>,
    kind: PointKind,
}

impl Point {
    pub fn interior(values: Vec<f64>) -> Point {
        Point {
            values,
            kind: PointKind::Interior,
        }
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(move |i| if i + 1 == n { hi } else { lo + step * i as f64 })
}

fn interval_points(iv: &Interval, slots: &[&str], params: &[f64], cfg: &CheckConfig, out: &mut Vec<Point>) -> Result<()> {
    let nvars = slots.len() - params.len();
    let mut at = |x: f64, kind: PointKind| {
        let mut v = vec![x];
        v.extend_from_slice(params);
        debug_assert_eq!(v.len(), nvars + params.len());
        out.push(Point { values: v, kind });
    };
    let (lo, hi) = iv.bounds(&slots[nvars..], params)?;
    if !(lo < hi) {
        return Err(CatalogError::Integrity {
            id: iv.to_string(),
            msg: format!("empty interval [{lo}, {hi}]"),
        });
    }
    let span = hi - lo;
    let f = cfg.interior_margin_fraction;
    for x in grid(lo + f * span, hi - f * span, cfg.samples) {
        at(x, PointKind::Interior);
    }
    for j in 1..=cfg.endpoint_zoom_levels {
        let d = span * 10f64.powi(-(j as i32));
        at(lo + d, PointKind::Edge);
        at(hi - d, PointKind::Edge);
    }
    if !iv.open_lo {
        at(lo, PointKind::Edge);
    }
    if !iv.open_hi {
        at(hi, PointKind::Edge);
    }
    Ok(())
}

/// The sample points of `entry` in slot order (see [`DomainSpec::slots`]).
pub fn sample_points(entry: &CatalogEntry, cfg: &CheckConfig) -> Result<Vec<Point>> {
    let dom = &entry.domain;
    let slots = dom.slots();
    let mut out = Vec::new();
    for combo in dom.param_combos() {
        match &dom.shape {
            Shape::Const => out.push(Point::interior(combo.clone())),
            Shape::Interval(iv) => interval_points(iv, &slots, &combo, cfg, &mut out)?,
            Shape::Pairs => {
                let push = |a: f64, b: f64, out: &mut Vec<Point>| {
                    let mut v = vec![a, b];
                    v.extend_from_slice(&combo);
                    out.push(Point::interior(v));
                };
                for u in PAIR_U_GRID {
                    push(1.0 + u, 1.0 - u, &mut out);
                }
                let f = cfg.interior_margin_fraction;
                for u in grid(f, 1.0 - f, cfg.samples) {
                    push(1.0 + u, 1.0 - u, &mut out);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                for _ in 0..RANDOM_PAIRS {
                    let s: f64 = rng.gen_range(-3.0..3.0);
                    let d: f64 = rng.gen_range(-4.0..4.0);
                    push((s + d).exp(), (s - d).exp(), &mut out);
                }
            }
            Shape::Region { x, y, constraint } => {
                let nvars = 2;
                let (x0, x1) = x.bounds(&slots[nvars..], &combo)?;
                let (y0, y1) = y.bounds(&slots[nvars..], &combo)?;
                let side = ((cfg.samples as f64).sqrt().ceil() as usize).max(11);
                let f = cfg.interior_margin_fraction;
                let cons: Vec<Program> = constraint
                    .exprs
                    .iter()
                    .map(|e| Program::compile(e, &slots))
                    .collect::<std::result::Result<_, _>>()?;
                let (dx, dy) = (x1 - x0, y1 - y0);
                for xv in grid(x0 + f * dx, x1 - f * dx, side) {
                    for yv in grid(y0 + f * dy, y1 - f * dy, side) {
                        let mut v = vec![xv, yv];
                        v.extend_from_slice(&combo);
                        if satisfies(&cons, &constraint.rels, &v) {
                            out.push(Point::interior(v));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn satisfies(progs: &[Program], rels: &[Rel], v: &[f64]) -> bool {
    let vals: Option<Vec<f64>> = progs.iter().map(|p| p.eval(v).ok()).collect();
    let Some(vals) = vals else { return false };
    rels.iter().enumerate().all(|(i, r)| {
        let s = r.slack(vals[i], vals[i + 1]);
        if r.is_strict() {
            s > 0.0
        } else {
            s >= 0.0
        }
    })
}

struct Compiled<'a> {
    entry: &'a CatalogEntry,
    slots: Vec<&'a str>,
    progs: Vec<Program>,
}

impl<'a> Compiled<'a> {
    fn new(entry: &'a CatalogEntry) -> Result<Self> {
        let slots = entry.domain.slots();
        let progs = entry
            .chain
            .exprs
            .iter()
            .map(|e| Program::compile(e, &slots))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Compiled { entry, slots, progs })
    }

    fn assignment(&self, v: &[f64]) -> Assignment {
        self.slots.iter().map(|s| s.to_string()).zip(v.iter().copied()).collect()
    }
}

struct Acc {
    report: CheckReport,
}

impl Acc {
    fn new(entry: &CatalogEntry) -> Acc {
        Acc {
            report: CheckReport {
                entry_id: entry.id().to_string(),
                status: entry.status,
                n_evaluated: 0,
                n_ties: 0,
                min_margin: None,
                argmin: None,
                n_violations: 0,
                n_domain_errors: 0,
                violations: vec![],
                n_endpoint_flags: 0,
                endpoint_flags: vec![],
                verdict: Verdict::Indeterminate,
            },
        }
    }

    fn flag(&mut self, c: &Compiled, p: &Point, relation: usize, margin: f64, note: &str) {
        let r = &mut self.report;
        r.n_endpoint_flags += 1;
        if r.endpoint_flags.len() < KEEP {
            r.endpoint_flags.push(EndpointFlag {
                point: c.assignment(&p.values),
                relation,
                margin,
                note: note.to_string(),
            });
        }
    }

    fn add(&mut self, c: &Compiled, p: &Point, cfg: &CheckConfig) {
        self.report.n_evaluated += 1;
        let mut vals = Vec::with_capacity(c.progs.len());
        for (i, prog) in c.progs.iter().enumerate() {
            match prog.eval_with_error(&p.values) {
                Ok(ve) => vals.push(ve),
                Err(e) => {
                    if p.kind == PointKind::Edge {
                        self.flag(c, p, i, f64::NAN, &format!("evaluation failed: {e}"));
                    } else {
                        let r = &mut self.report;
                        r.n_domain_errors += 1;
                        if r.violations.len() < KEEP {
                            r.violations.push(Violation {
                                kind: ViolationKind::Domain,
                                point: c.assignment(&p.values),
                                lhs: f64::NAN,
                                rhs: f64::NAN,
                                relation: i,
                                margin: f64::NAN,
                                message: Some(e.to_string()),
                            });
                        }
                    }
                    return;
                }
            }
        }
        for (i, rel) in c.entry.chain.rels.iter().enumerate() {
            let ((l, el), (r, er)) = (vals[i], vals[i + 1]);
            let scale = match cfg.normalization {
                Normalization::Relative => 1f64.max(l.abs() + r.abs()),
                Normalization::Absolute => 1.0,
            };
            let margin = rel.slack(l, r) / scale;
            let tie = cfg.tie_tolerance * 1f64.max(l.abs() + r.abs()) / scale + ERROR_SAFETY * (el + er) / scale;
            if margin < -tie {
                let rep = &mut self.report;
                rep.n_violations += 1;
                if rep.min_margin.is_none_or(|m| margin < m) {
                    rep.min_margin = Some(margin);
                    rep.argmin = Some(c.assignment(&p.values));
                }
                if rep.violations.iter().filter(|v| v.kind == ViolationKind::Numeric).count() < KEEP {
                    rep.violations.push(Violation {
                        kind: ViolationKind::Numeric,
                        point: c.assignment(&p.values),
                        lhs: l,
                        rhs: r,
                        relation: i,
                        margin,
                        message: None,
                    });
                }
            } else if margin <= tie {
                match p.kind {
                    PointKind::Interior => self.report.n_ties += 1,
                    PointKind::Edge => self.flag(c, p, i, margin, "tie within rounding tolerance"),
                }
            } else if self.report.min_margin.is_none_or(|m| margin < m) {
                self.report.min_margin = Some(margin);
                self.report.argmin = Some(c.assignment(&p.values));
            }
        }
    }

    fn finish(mut self) -> CheckReport {
        let r = &mut self.report;
        r.verdict = if r.n_violations > 0 {
            Verdict::Violated
        } else if r.n_domain_errors > 0 || r.min_margin.is_none() {
            Verdict::Indeterminate
        } else {
            Verdict::Holds
        };
        self.report
    }
}

/// Checks `entry` on explicit points given in slot order.
pub fn check_on_points(entry: &CatalogEntry, points: &[Vec<f64>], cfg: &CheckConfig) -> Result<CheckReport> {
    let c = Compiled::new(entry)?;
    let mut acc = Acc::new(entry);
    for v in points {
        acc.add(&c, &Point::interior(v.clone()), cfg);
    }
    Ok(acc.finish())
}

pub fn check_entry(entry: &CatalogEntry, cfg: &CheckConfig) -> Result<CheckReport> {
    cfg.validate()?;
    let c = Compiled::new(entry)?;
    let mut acc = Acc::new(entry);
    for p in sample_points(entry, cfg)? {
        acc.add(&c, &p, cfg);
    }
    Ok(acc.finish())
}

/// Two-variable entries; the same as [`check_entry`] but rejects other shapes.
pub fn region_check_2d(entry: &CatalogEntry, cfg: &CheckConfig) -> Result<CheckReport> {
    match entry.domain.shape {
        Shape::Region { .. } => check_entry(entry, cfg),
        _ => Err(CatalogError::Integrity {
            id: entry.id().to_string(),
            msg: "not a two-variable region".into(),
        }),
    }
}

/// Per-point margins of the sampled points, for plotting.
pub fn margin_trace(entry: &CatalogEntry, cfg: &CheckConfig) -> Result<Vec<(Assignment, Option<f64>)>> {
    let c = Compiled::new(entry)?;
    let mut out = Vec::new();
    for p in sample_points(entry, cfg)? {
        let vals: std::result::Result<Vec<f64>, _> = c.progs.iter().map(|g| g.eval(&p.values)).collect();
        let m = vals.ok().map(|v| {
            entry
                .chain
                .rels
                .iter()
                .enumerate()
                .map(|(i, r)| r.slack(v[i], v[i + 1]) / 1f64.max(v[i].abs() + v[i + 1].abs()))
                .fold(f64::INFINITY, f64::min)
        });
        out.push((c.assignment(&p.values), m));
    }
    Ok(out)
}

pub fn check_all(entries: &[CatalogEntry], cfg: &CheckConfig) -> Result<Vec<CheckReport>> {
    entries.iter().map(|e| check_entry(e, cfg)).collect()
}

/// Like [`check_all`] on a rayon pool of `jobs` threads; reports stay in catalog order.
pub fn check_all_parallel(entries: &[CatalogEntry], cfg: &CheckConfig, jobs: usize) -> Result<Vec<CheckReport>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CatalogError::Config(e.to_string()))?;
    pool.install(|| entries.par_iter().map(|e| check_entry(e, cfg)).collect())
}

/// True when every report matches the verdict its status expects.
pub fn all_as_expected(reports: &[CheckReport]) -> bool {
    reports.iter().all(CheckReport::as_expected)
}

// ---------------------------------------------------------------------------
// crossings

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    /// A < B here.
    pub below: f64,
    /// A > B here.
    pub above: f64,
}

/// Scans the interior grid of `domain` for strictly opposite orderings of A and B.
/// Returns the most pronounced point of each ordering.
pub fn find_crossing(a: &Expr, b: &Expr, domain: &Interval, cfg: &CheckConfig) -> Result<Option<Crossing>> {
    cfg.validate()?;
    let var = [domain.var.as_str()];
    let pa = Program::compile(a, &var)?;
    let pb = Program::compile(b, &var)?;
    let (lo, hi) = domain.bounds(&[], &[])?;
    let f = cfg.interior_margin_fraction * (hi - lo);
    let mut below: Option<(f64, f64)> = None;
    let mut above: Option<(f64, f64)> = None;
    for x in grid(lo + f, hi - f, cfg.samples) {
        let (Ok((va, ea)), Ok((vb, eb))) = (pa.eval_with_error(&[x]), pb.eval_with_error(&[x])) else {
            continue;
        };
        let scale = 1f64.max(va.abs() + vb.abs());
        let d = (va - vb) / scale;
        let tie = cfg.tie_tolerance + ERROR_SAFETY * (ea + eb) / scale;
        if d < -tie && below.is_none_or(|(_, m)| d < m) {
            below = Some((x, d));
        }
        if d > tie && above.is_none_or(|(_, m)| d > m) {
            above = Some((x, d));
        }
    }
    Ok(match (below, above) {
        (Some((x1, _)), Some((x2, _))) => Some(Crossing { below: x1, above: x2 }),
        _ => None,
    })
}

// ---------------------------------------------------------------------------
// monotonicity / convexity

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Claim {
    Increasing,
    Decreasing,
    Convex,
    Concave,
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Claim::Increasing => "increasing",
            Claim::Decreasing => "decreasing",
            Claim::Convex => "convex",
            Claim::Concave => "concave",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedFunction {
    pub id: String,
    pub body: Expr,
    pub domain: Interval,
    pub claimed: Vec<Claim>,
    pub note: String,
}

impl NamedFunction {
    pub fn new(id: &str, body: &str, domain: &str, claimed: &[Claim], note: &str) -> Result<NamedFunction> {
        let domain = Interval::parse(domain, &[]).map_err(|msg| CatalogError::Integrity { id: id.into(), msg })?;
        let body = match parse_with_vars(body, &[domain.var.as_str()])? {
            Parsed::Expr(e) => e,
            Parsed::Chain(_) => {
                return Err(CatalogError::Integrity {
                    id: id.into(),
                    msg: "body is a relation".into(),
                })
            }
        };
        Ok(NamedFunction {
            id: id.to_string(),
            body,
            domain,
            claimed: claimed.to_vec(),
            note: note.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimResult {
    pub claim: Claim,
    pub n_violations: usize,
    pub first_violation: Option<f64>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub id: String,
    pub n_evaluated: usize,
    pub n_domain_errors: usize,
    pub claims: Vec<ClaimResult>,
    pub verdict: Verdict,
}

pub fn monotonicity_scan(func: &NamedFunction, cfg: &CheckConfig) -> Result<MonotonicityReport> {
    cfg.validate()?;
    let prog = Program::compile(&func.body, &[func.domain.var.as_str()])?;
    let (lo, hi) = func.domain.bounds(&[], &[])?;
    let f = cfg.interior_margin_fraction * (hi - lo);
    let mut pts = Vec::with_capacity(cfg.samples);
    let mut errors = 0;
    for x in grid(lo + f, hi - f, cfg.samples) {
        match prog.eval_with_error(&[x]) {
            Ok((v, e)) => pts.push((x, v, ERROR_SAFETY * e + cfg.tie_tolerance * 1f64.max(v.abs()))),
            Err(_) => errors += 1,
        }
    }
    let mut claims = Vec::new();
    for &claim in &func.claimed {
        let mut bad = Vec::new();
        match claim {
            Claim::Increasing | Claim::Decreasing => {
                let sign = if claim == Claim::Increasing { 1.0 } else { -1.0 };
                for w in pts.windows(2) {
                    let d = sign * (w[1].1 - w[0].1);
                    if !(d > -(w[0].2 + w[1].2)) {
                        bad.push(w[1].0);
                    }
                }
            }
            Claim::Convex | Claim::Concave => {
                let sign = if claim == Claim::Convex { 1.0 } else { -1.0 };
                for w in pts.windows(3) {
                    let d2 = sign * (w[2].1 - 2.0 * w[1].1 + w[0].1);
                    if !(d2 > -(w[0].2 + 2.0 * w[1].2 + w[2].2)) {
                        bad.push(w[1].0);
                    }
                }
            }
        }
        claims.push(ClaimResult {
            claim,
            n_violations: bad.len(),
            first_violation: bad.first().copied(),
            holds: bad.is_empty(),
        });
    }
    let verdict = if claims.iter().any(|c| !c.holds) {
        Verdict::Violated
    } else if errors > 0 || pts.len() < 3 {
        Verdict::Indeterminate
    } else {
        Verdict::Holds
    };
    Ok(MonotonicityReport {
        id: func.id.clone(),
        n_evaluated: pts.len() + errors,
        n_domain_errors: errors,
        claims,
        verdict,
    })
}

/// The auxiliary functions whose monotonicity or convexity the theory relies on.
pub fn builtin_functions() -> Vec<NamedFunction> {
    use Claim::*;
    let defs: &[(&str, &str, &str, &[Claim], &str)] = &[
        ("g", "sin(x)/x", "x:(0,pi/2]", &[Decreasing, Concave], "Jordan ratio"),
        ("q", "2*sin(x/2)^2/x^2", "x:(0,pi/2]", &[Decreasing, Concave], "(1 - cos x)/x^2"),
        ("f-tan-half", "tan(x/2)/x", "x:(0,pi/2]", &[Increasing, Convex], "tan(x/2)/x"),
        ("A-cot-half", "2/x - 1/tan(x/2)", "x:(0,pi/2]", &[Increasing, Convex], "2/x - cot(x/2)"),
        ("p-sin-half", "sin(x/2)/x", "x:(0,pi/2]", &[Decreasing, Concave], "sin(x/2)/x"),
        ("f-cusa", "x*(2+cos(x))/sin(x)", "x:(0,pi/2)", &[Increasing], "x(2 + cos x)/sin x"),
        ("g-cusa", "x*(4/pi + cos(x))/sin(x)", "x:(0,pi/2)", &[Decreasing], "x(4/pi + cos x)/sin x"),
        ("F-cusa", "x*(2+cosh(x))/sinh(x)", "x:(0,5]", &[Increasing], "x(2 + cosh x)/sinh x"),
        ("G-cusa", "x*(pi + cosh(x))/sinh(x)", "x:(0,pi/2)", &[Decreasing], "x(pi + cosh x)/sinh x"),
        ("k-coth", "1/tanh(x) - 1/x", "x:(0,5]", &[Increasing, Concave], "coth x - 1/x"),
        ("j", "3*x - 2*sinh(x) - sinh(x)*cos(x)", "x:(0,pi/2)", &[Convex], "3x - 2 sinh x - sinh x cos x"),
        ("h1", "ln(x/sin(x))/ln(cosh(x))", "x:(0,pi/2)", &[Increasing], "exponent ratio for 1/cosh x"),
        ("h2", "ln(2/(cos(x)+1))/ln(sinh(x)/x)", "x:(0,pi/2)", &[Increasing], "exponent ratio for 2/(cos x + 1)"),
        ("h", "ln(x/sin(x))/ln(sinh(x)/x)", "x:(0,pi/2)", &[Increasing], "exponent ratio for x/sin x"),
        ("f1", "tanh(x)/x", "x:(0,5]", &[Decreasing], "tanh x/x"),
        ("f-exp-up", "x*exp(1/x - 1)", "x:(1,10]", &[Increasing], "t e^(1/t - 1), t > 1"),
        ("f-exp-down", "x*exp(1/x - 1)", "x:(0.05,1)", &[Decreasing], "t e^(1/t - 1), 0 < t < 1"),
    ];
    defs.iter()
        .map(|(id, body, dom, claims, note)| NamedFunction::new(id, body, dom, claims, note).expect("builtin function"))
        .collect()
}

pub fn lookup_function(id: &str) -> Option<NamedFunction> {
    builtin_functions().into_iter().find(|f| f.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse_expr;

    const MINI: &str = "P2.4.3|P4.10\tas-printed\tx:(0,pi/2)\t-\tcos(x)*cosh(x) < 1\tcos x cosh x < 1\n\
X.1-as-printed\tmisprint-suspected\tx:(0,1)\t-\tx < x^2\tbad\n\
X.1\tcorrected\tx:(0,1)\t-\tx^2 < x\tgood\tsquared\n\
K\tas-printed\tx:(0,r]\tr\tsin(x) <= x\tparam bound\n\
M\tas-printed\tpairs\t-\tmean(G; a, b) <= mean(A; a, b)\tAM-GM\n";

    fn mini() -> Vec<CatalogEntry> {
        load_manifest(MINI).unwrap()
    }

    #[test]
    fn loads_and_looks_up_aliases() {
        let cat = mini();
        assert_eq!(cat.len(), 5);
        assert_eq!(lookup(&cat, "P4.10").unwrap().id(), "P2.4.3");
        assert!(matches!(lookup(&cat, "NO.SUCH"), Err(CatalogError::UnknownId(_))));
    }

    #[test]
    fn verdicts() {
        let cat = mini();
        let cfg = CheckConfig::default().with_samples(201);
        let r = check_entry(&cat[0], &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert!(r.min_margin.unwrap() > 0.0);
        let r = check_entry(&cat[1], &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert!(r.as_expected());
        let r = check_entry(&cat[3], &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        // the zoom pass reaches x ~ r 1e-6 where x - sin x underflows the tie tolerance
        assert!(r.n_endpoint_flags > 0);
        assert_eq!(check_entry(&cat[4], &cfg).unwrap().verdict, Verdict::Holds);
    }

    #[test]
    fn degenerate_pairs_are_indeterminate() {
        let cat = mini();
        let r = check_on_points(&cat[4], &[vec![1.0, 1.0]], &CheckConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Indeterminate);
        assert_eq!(r.n_ties, 1);
    }

    #[test]
    fn domain_errors_are_indeterminate() {
        let text = "D\tas-printed\tx:(0,2)\t-\tsqrt(1 - x) < 2\tdomain\n";
        let cat = load_manifest(text).unwrap();
        let r = check_entry(&cat[0], &CheckConfig::default().with_samples(101)).unwrap();
        assert_eq!(r.verdict, Verdict::Indeterminate);
        assert!(r.n_domain_errors > 0);
        assert_eq!(r.violations[0].kind, ViolationKind::Domain);
    }

    #[test]
    fn integrity_errors() {
        let empty = "E\tas-printed\tx:(0,1)\tk=\tk*x < 1\tempty\n";
        assert!(load_manifest(empty).is_err());
        let dup = "A\tas-printed\tx:(0,1)\t-\tx < 2\ta\nA\tas-printed\tx:(0,1)\t-\tx < 2\ta\n";
        assert!(matches!(load_manifest(dup), Err(CatalogError::Integrity { .. })));
        let orphan = "Z-as-printed\tmisprint-suspected\tx:(0,1)\t-\tx < 2\ta\n";
        assert!(load_manifest(orphan).is_err());
        let no_note = "Z\tcorrected\tx:(0,1)\t-\tx < 2\ta\n";
        assert!(load_manifest(no_note).is_err());
        let unknown = "Z\tas-printed\tx:(0,1)\t-\tw < 2\ta\n";
        assert!(matches!(load_manifest(unknown), Err(CatalogError::Manifest { line: 1, .. })));
    }

    #[test]
    fn regions_discard_constrained_points() {
        let text = "R\tas-printed\tx:(0,1) & y:(0,1) & y < x\t-\ty < x\tregion\n";
        let cat = load_manifest(text).unwrap();
        let r = region_check_2d(&cat[0], &CheckConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        let empty = "R\tas-printed\tx:(0,1) & y:(0,1) & x > 2\t-\ty < x\tregion\n";
        let cat = load_manifest(empty).unwrap();
        let r = region_check_2d(&cat[0], &CheckConfig::default()).unwrap();
        assert_eq!((r.verdict, r.n_evaluated), (Verdict::Indeterminate, 0));
    }

    #[test]
    fn crossing_scan() {
        let cfg = CheckConfig::default();
        let dom = Interval::parse("x:(0,pi/2)", &[]).unwrap();
        let a = parse_expr("(1-cos(x))/x").unwrap();
        let b = parse_expr("1/(pi-x)").unwrap();
        let c = find_crossing(&a, &b, &dom, &cfg).unwrap().unwrap();
        assert!(c.below < c.above);
        let dom01 = Interval::parse("x:(0,1)", &[]).unwrap();
        let none = find_crossing(&Expr::var("x"), &parse_expr("x+1").unwrap(), &dom01, &cfg).unwrap();
        assert!(none.is_none());
    }

    #[test]
    fn monotonicity_controls() {
        let cfg = CheckConfig::default();
        for f in builtin_functions() {
            let r = monotonicity_scan(&f, &cfg).unwrap();
            assert_eq!(r.verdict, Verdict::Holds, "{}: {:?}", f.id, r.claims);
        }
        let neg = NamedFunction::new("q-up", "(1-cos(x))/x^2", "x:(0,pi/2)", &[Claim::Increasing], "").unwrap();
        let r = monotonicity_scan(&neg, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert!(r.claims[0].n_violations > 1000);
    }

    #[test]
    fn config_validation() {
        let c = CheckConfig { samples: 100, ..CheckConfig::default() };
        assert!(c.validate().is_err());
        assert_eq!(CheckConfig::default().with_samples(100).samples, 101);
    }
}
