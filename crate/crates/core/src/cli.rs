//! Command-line front end. `run` returns the process exit code:
//! 0 when every requested check matches its expected verdict, 1 on an
//! unexpected verdict, 2 on usage, parse or I/O errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::catalog::{self, CatalogEntry, CheckConfig, CheckReport, Interval, Verdict};
use crate::constants;
use crate::exprlang::{eval_expr, parse_with_vars, Parsed};
use crate::means::{MeanKind, PositivePair};
use crate::seqbounds;

pub const MANIFEST_ENV: &str = "INEQFORGE_MANIFEST";
pub const REPORT_HEADER: &str = "id,verdict,min_margin,argmin,flags";
pub const BOUNDS_HEADER: &str = "n,lower,upper,gap";
pub const CONSTANTS_HEADER: &str = "id,value,error_estimate,paper_decimal,deviation";

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNEXPECTED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ineqforge", version, about = "Check catalogued inequalities for bivariate means and trigonometric/hyperbolic functions")]
pub struct Cli {
    /// Manifest file to load instead of the built-in catalog (overrides INEQFORGE_MANIFEST).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct SamplingArgs {
    /// Interior samples per entry (odd, at least 101).
    #[arg(long, default_value_t = CheckConfig::default().samples)]
    pub samples: usize,
    /// Seed for the random pairs of mean-level entries.
    #[arg(long, default_value_t = catalog::DEFAULT_SEED)]
    pub seed: u64,
}

impl SamplingArgs {
    fn config(&self) -> CheckConfig {
        CheckConfig {
            samples: self.samples,
            seed: self.seed,
            ..CheckConfig::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the catalog table.
    List,
    /// Check one entry.
    Check {
        #[arg(long)]
        id: String,
        #[command(flatten)]
        sampling: SamplingArgs,
        /// Write every sample point and its margin as CSV.
        #[arg(long)]
        dump_margins: Option<PathBuf>,
    },
    /// Check every entry.
    CheckAll {
        #[command(flatten)]
        sampling: SamplingArgs,
        /// Also write the CSV report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the full reports, violations included, as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Look for points where A < B and A > B.
    Crossing {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        lo: String,
        #[arg(long)]
        hi: String,
        #[arg(long, default_value = "x")]
        var: String,
        #[arg(long, default_value_t = CheckConfig::default().samples)]
        samples: usize,
    },
    /// Scan a named auxiliary function for its claimed monotonicity/convexity.
    Mono {
        #[arg(long = "fn")]
        name: String,
        #[arg(long, default_value_t = CheckConfig::default().samples)]
        samples: usize,
    },
    /// Print all best constants.
    Constants,
    /// Print the cube-root/linear bound sequence for L, P or T.
    Bounds {
        #[arg(long)]
        mean: MeanKind,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = 8)]
        iters: usize,
    },
    /// Evaluate one expression.
    Eval {
        #[arg(long)]
        expr: String,
        /// Bindings such as x=1,t=0.5.
        #[arg(long, default_value = "")]
        at: String,
    },
}

/// A failure that maps to exit code 2.
#[derive(Debug)]
struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

type CmdResult = Result<i32, Usage>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = if code == EXIT_OK {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

fn load_catalog(cli: &Cli) -> Result<Vec<CatalogEntry>, Usage> {
    let path = cli.manifest.clone().or_else(|| std::env::var_os(MANIFEST_ENV).map(PathBuf::from));
    match path {
        None => Ok(catalog::builtin_catalog()?),
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| Usage(format!("{}: {e}", p.display())))?;
            Ok(catalog::load_manifest(&text)?)
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match &cli.command {
        Command::List => {
            let cat = load_catalog(cli)?;
            writeln!(out, "id\tstatus\tdomain\tparams\tchain")?;
            for e in &cat {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}",
                    e.ids.join("|"),
                    e.status.as_str(),
                    e.domain_text(),
                    e.params_text(),
                    e.chain
                )?;
            }
            Ok(EXIT_OK)
        }
        Command::Check { id, sampling, dump_margins } => {
            let cat = load_catalog(cli)?;
            let entry = catalog::lookup(&cat, id)?;
            let cfg = sampling.config();
            let report = catalog::check_entry(entry, &cfg)?;
            writeln!(out, "{REPORT_HEADER}")?;
            writeln!(out, "{}", report_row(&report))?;
            if let Some(path) = dump_margins {
                write_file(path, &margins_csv(entry, &cfg)?)?;
            }
            Ok(exit_for(&[report]))
        }
        Command::CheckAll {
            sampling,
            report,
            json,
            jobs,
        } => {
            let cat = load_catalog(cli)?;
            let cfg = sampling.config();
            let reports = if *jobs > 1 {
                catalog::check_all_parallel(&cat, &cfg, *jobs)?
            } else {
                catalog::check_all(&cat, &cfg)?
            };
            let csv = reports_csv(&reports);
            out.write_all(csv.as_bytes())?;
            if let Some(path) = report {
                write_file(path, &csv)?;
            }
            if let Some(path) = json {
                write_file(path, &serde_json::to_string_pretty(&reports)?)?;
            }
            let bad: Vec<&str> = reports.iter().filter(|r| !r.as_expected()).map(|r| r.entry_id.as_str()).collect();
            if bad.is_empty() {
                writeln!(err, "{} entries, all as expected", reports.len())?;
            } else {
                writeln!(err, "{} of {} entries unexpected: {}", bad.len(), reports.len(), bad.join(" "))?;
            }
            Ok(exit_for(&reports))
        }
        Command::Crossing {
            a,
            b,
            lo,
            hi,
            var,
            samples,
        } => {
            let vars = [var.as_str()];
            let ea = expr_of(a, &vars)?;
            let eb = expr_of(b, &vars)?;
            let iv = Interval::parse(&format!("{var}:({lo},{hi})"), &[]).map_err(Usage)?;
            let cfg = CheckConfig::default().with_samples(*samples);
            match catalog::find_crossing(&ea, &eb, &iv, &cfg)? {
                Some(c) => {
                    writeln!(out, "below,above")?;
                    writeln!(out, "{},{}", c.below, c.above)?;
                    Ok(EXIT_OK)
                }
                None => {
                    writeln!(out, "no crossing")?;
                    Ok(EXIT_UNEXPECTED)
                }
            }
        }
        Command::Mono { name, samples } => {
            let func = catalog::lookup_function(name).ok_or_else(|| {
                let known: Vec<String> = catalog::builtin_functions().into_iter().map(|f| f.id).collect();
                Usage(format!("unknown function `{name}` (known: {})", known.join(", ")))
            })?;
            let cfg = CheckConfig::default().with_samples(*samples);
            let rep = catalog::monotonicity_scan(&func, &cfg)?;
            writeln!(out, "id,claim,holds,n_violations,first_violation")?;
            for c in &rep.claims {
                let first = c.first_violation.map(|x| x.to_string()).unwrap_or_default();
                writeln!(out, "{},{},{},{},{}", rep.id, c.claim, c.holds, c.n_violations, first)?;
            }
            Ok(if rep.verdict == Verdict::Holds { EXIT_OK } else { EXIT_UNEXPECTED })
        }
        Command::Constants => {
            writeln!(out, "{CONSTANTS_HEADER}")?;
            for spec in constants::builtin_constants() {
                let r = constants::evaluate_constant(&spec)?;
                let opt = |v: Option<f64>| v.map(|d| format!("{d:e}")).unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{:e},{},{}",
                    r.id,
                    r.value,
                    r.error_estimate,
                    r.paper_decimal.map(|d| d.to_string()).unwrap_or_default(),
                    opt(r.deviation())
                )?;
            }
            Ok(EXIT_OK)
        }
        Command::Bounds { mean, a, b, iters } => {
            let pair = PositivePair::new(*a, *b)?;
            let tr = seqbounds::trace(*mean, pair, *iters)?;
            writeln!(out, "{BOUNDS_HEADER}")?;
            for (n, s) in tr.steps.iter().enumerate() {
                writeln!(out, "{n},{},{},{:e}", s.lower, s.upper, s.gap())?;
            }
            Ok(EXIT_OK)
        }
        Command::Eval { expr, at } => {
            let bindings = parse_bindings(at)?;
            let names: Vec<&str> = bindings.keys().map(String::as_str).collect();
            let e = expr_of(expr, &names)?;
            let map = bindings.iter().map(|(k, v)| (k.clone(), *v)).collect();
            writeln!(out, "{}", eval_expr(&e, &map)?)?;
            Ok(EXIT_OK)
        }
    }
}

fn expr_of(text: &str, vars: &[&str]) -> Result<crate::exprlang::Expr, Usage> {
    match parse_with_vars(text, vars)? {
        Parsed::Expr(e) => Ok(e),
        Parsed::Chain(_) => Err(Usage(format!("`{text}` is a relation, expected an expression"))),
    }
}

fn parse_bindings(text: &str) -> Result<BTreeMap<String, f64>, Usage> {
    let mut out = BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Usage(format!("binding `{item}` is not name=value")))?;
        let v: f64 = v.trim().parse().map_err(|_| Usage(format!("binding `{item}`: bad number")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn write_file(path: &Path, text: &str) -> Result<(), Usage> {
    std::fs::write(path, text).map_err(|e| Usage(format!("{}: {e}", path.display())))
}

fn exit_for(reports: &[CheckReport]) -> i32 {
    if catalog::all_as_expected(reports) {
        EXIT_OK
    } else {
        EXIT_UNEXPECTED
    }
}

pub fn report_row(r: &CheckReport) -> String {
    let margin = r.min_margin.map(|m| format!("{m:e}")).unwrap_or_default();
    format!("{},{},{},{},{}", r.entry_id, r.verdict, margin, r.argmin_text(), r.flags())
}

pub fn reports_csv(reports: &[CheckReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{REPORT_HEADER}");
    for r in reports {
        let _ = writeln!(s, "{}", report_row(r));
    }
    s
}

fn margins_csv(entry: &CatalogEntry, cfg: &CheckConfig) -> Result<String, Usage> {
    let trace = catalog::margin_trace(entry, cfg)?;
    let mut s = String::new();
    let names: Vec<String> = trace.first().map(|(a, _)| a.keys().cloned().collect()).unwrap_or_default();
    let _ = writeln!(s, "{},margin", names.join(","));
    for (point, margin) in trace {
        let vals: Vec<String> = point.values().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{},{}", vals.join(","), margin.map(|m| m.to_string()).unwrap_or_default());
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["ineqforge"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn eval_prints_value() {
        let (code, out, _) = call(&["eval", "--expr", "sin(x)/x", "--at", "x=1"]);
        assert_eq!(code, 0);
        let v: f64 = out.trim().parse().unwrap();
        assert!((v - 0.8414709848078965).abs() < 1e-15);
    }

    #[test]
    fn unknown_id_is_usage_error() {
        let (code, _, err) = call(&["check", "--id", "NO.SUCH"]);
        assert_eq!(code, 2);
        assert!(err.contains("unknown entry id"), "{err}");
    }

    #[test]
    fn bad_flags_and_bindings() {
        assert_eq!(call(&["check-all", "--bogus"]).0, 2);
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&["eval", "--expr", "x+", "--at", "x=1"]).0, 2);
        assert_eq!(call(&["eval", "--expr", "x", "--at", "x"]).0, 2);
        assert_eq!(call(&["bounds", "--mean", "L", "--a", "-1", "--b", "1"]).0, 2);
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn bounds_csv() {
        let (code, out, _) = call(&["bounds", "--mean", "P", "--a", "1.5", "--b", "0.5", "--iters", "3"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], BOUNDS_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0.95318"));
    }

    #[test]
    fn bindings() {
        let b = parse_bindings("x=1, t=0.5").unwrap();
        assert_eq!(b["x"], 1.0);
        assert_eq!(b["t"], 0.5);
        assert!(parse_bindings("").unwrap().is_empty());
    }
}
