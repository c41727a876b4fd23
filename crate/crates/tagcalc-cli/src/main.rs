//! tagcalc: normalize Dirac-notation expressions, replay the canned
//! derivations, run the numeric check suite, and export Wigner maps.
//!
//! Exit codes are a stable contract: 0 success, 1 user error (parse,
//! config, unknown name), 2 divergence or threshold failure.

mod config;

use clap::{Args, Parser, Subcommand};
use config::{parse_mode, Config, OutputFormat};
use num_complex::Complex64;
use tagcalc_core::coeff::Rat;
use tagcalc_core::derive::{run_derivation, DeriveError, DeriveOptions};
use tagcalc_core::dsl::{parse, print_expr};
use tagcalc_core::rewrite::{normalize, RewriteError};
use tagcalc_core::BasisTable;
use tagcalc_numeric::checks::run_all_checks;
use tagcalc_numeric::grid::Grid;
use tagcalc_numeric::state::{coherent, hermite_gauss};
use tagcalc_numeric::wigner::wigner_of_density;

#[derive(Parser)]
#[command(name = "tagcalc", version, about = "tag/extractor calculus workbench")]
struct Cli {
    /// Configuration file (key = value); also read from TAGCALC_CONFIG.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Output format override: text or json.
    #[arg(long, global = true)]
    output: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an expression and print its normal form.
    Normalize(NormalizeArgs),
    /// Run a named derivation and compare against its expected result.
    Derive(DeriveArgs),
    /// Run the numeric oracle suite and print a pass/fail report.
    Check(CheckArgs),
    /// Compute a Wigner map for a state and write it as CSV or JSON.
    Wigner(WignerArgs),
}

#[derive(Args)]
struct NormalizeArgs {
    /// Expression in the ASCII Dirac syntax.
    expr: String,
    /// Rewrite mode: distributional or paper-faithful.
    #[arg(long)]
    mode: Option<String>,
    /// Dump the step log after the result.
    #[arg(long)]
    trace_steps: bool,
    #[arg(long)]
    step_budget: Option<usize>,
}

#[derive(Args)]
struct DeriveArgs {
    /// One of: qp-commutator, ladder-commutator, weyl-annihilation,
    /// symplectic, unitary-invariance, moments, density-trace.
    name: String,
    #[arg(long)]
    mode: Option<String>,
    /// Symplectic parameters (rationals or decimals), defaults 2, 0, 0, 1/2.
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    d: Option<String>,
    /// Dump the step logs after the results.
    #[arg(long)]
    trace_steps: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    grid_l: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct WignerArgs {
    /// State spec: `fock:N` or `coherent:RE,IM`.
    state: String,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    grid_l: Option<f64>,
    /// csv (default) or json.
    #[arg(long)]
    format: Option<String>,
    /// Output path; `-` writes to stdout.
    #[arg(long)]
    out: Option<String>,
}

/// stdout writes that exit quietly when the consumer closes the pipe.
macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write;
        if writeln!(std::io::stdout(), $($t)*).is_err() {
            std::process::exit(0);
        }
    }};
}

macro_rules! outwrite {
    ($($t:tt)*) => {{
        use std::io::Write;
        if write!(std::io::stdout(), $($t)*).is_err() {
            std::process::exit(0);
        }
    }};
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = Cli::parse();
    let mut cfg = match Config::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };
    if let Some(fmt) = &cli.output {
        if let Err(e) = cfg.set("output", fmt) {
            eprintln!("{e}");
            return 1;
        }
    }
    match cli.command {
        Command::Normalize(args) => cmd_normalize(args, cfg),
        Command::Derive(args) => cmd_derive(args, cfg),
        Command::Check(args) => cmd_check(args, cfg),
        Command::Wigner(args) => cmd_wigner(args, cfg),
    }
}

fn cmd_normalize(args: NormalizeArgs, mut cfg: Config) -> i32 {
    if let Some(m) = &args.mode {
        match parse_mode(m) {
            Ok(mode) => cfg.mode = mode,
            Err(e) => {
                eprintln!("{e}");
                return 1;
            }
        }
    }
    if let Some(b) = args.step_budget {
        cfg.step_budget = b;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("{e}");
        return 1;
    }
    let table = BasisTable::standard();
    let expr = match parse(&args.expr, &table) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };
    match normalize(&expr, &table, cfg.mode, cfg.step_budget) {
        Ok((result, report)) => {
            match cfg.output {
                OutputFormat::Text | OutputFormat::Csv => {
                    outln!("{}", print_expr(&result));
                    if args.trace_steps {
                        outln!("{}", serde_json::to_string_pretty(&report).unwrap());
                    }
                }
                OutputFormat::Json => {
                    let mut obj = serde_json::json!({
                        "result": print_expr(&result),
                        "expr": tagcalc_core::canonical_expr(&result),
                    });
                    if args.trace_steps {
                        obj["report"] = serde_json::to_value(&report).unwrap();
                    } else {
                        obj["fixpoint"] = serde_json::json!(report.fixpoint);
                    }
                    outln!("{}", serde_json::to_string_pretty(&obj).unwrap());
                }
            }
            0
        }
        Err(RewriteError::StepBudgetExceeded { budget, report }) => {
            eprintln!("step budget of {budget} exceeded; normalization diverged");
            if args.trace_steps {
                eprintln!("{}", serde_json::to_string_pretty(&report).unwrap());
            }
            2
        }
        Err(e) => {
            eprintln!("{e}");
            1
        }
    }
}

fn parse_rat(text: &str) -> Result<Rat, String> {
    if let Some((num, den)) = text.split_once('/') {
        let n: i64 = num.trim().parse().map_err(|_| format!("bad rational `{text}`"))?;
        let d: i64 = den.trim().parse().map_err(|_| format!("bad rational `{text}`"))?;
        if d == 0 {
            return Err("zero denominator".into());
        }
        return Ok(Rat::new(n.into(), d.into()));
    }
    if let Some((int, frac)) = text.split_once('.') {
        let digits = frac.len() as u32;
        let whole: i64 =
            if int.is_empty() { 0 } else { int.parse().map_err(|_| format!("bad number `{text}`"))? };
        let fpart: i64 =
            if frac.is_empty() { 0 } else { frac.parse().map_err(|_| format!("bad number `{text}`"))? };
        let scale = 10i64.pow(digits);
        let sign = if text.trim_start().starts_with('-') { -1 } else { 1 };
        return Ok(Rat::new(
            (whole * scale + sign * fpart).into(),
            scale.into(),
        ));
    }
    let n: i64 = text.trim().parse().map_err(|_| format!("bad rational `{text}`"))?;
    Ok(Rat::from_integer(n.into()))
}

fn cmd_derive(args: DeriveArgs, mut cfg: Config) -> i32 {
    if let Some(m) = &args.mode {
        match parse_mode(m) {
            Ok(mode) => cfg.mode = mode,
            Err(e) => {
                eprintln!("{e}");
                return 1;
            }
        }
    }
    let mut opts = DeriveOptions { mode: cfg.mode, budget: cfg.step_budget, ..Default::default() };
    let defaults = opts.symplectic.clone();
    let pick = |arg: &Option<String>, default: Rat| -> Result<Rat, String> {
        arg.as_deref().map(parse_rat).transpose().map(|v| v.unwrap_or(default))
    };
    opts.symplectic = match (
        pick(&args.a, defaults.0),
        pick(&args.b, defaults.1),
        pick(&args.c, defaults.2),
        pick(&args.d, defaults.3),
    ) {
        (Ok(a), Ok(b), Ok(c), Ok(d)) => (a, b, c, d),
        _ => {
            eprintln!("symplectic parameters must be rationals like 2, 1/2, or 0.5");
            return 1;
        }
    };

    let table = BasisTable::standard();
    let results = match run_derivation(&args.name, &table, &opts) {
        Ok(r) => r,
        Err(DeriveError::UnknownDerivation(name, list)) => {
            eprintln!("unknown derivation `{name}`; known: {list}");
            return 1;
        }
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };
    let all_pass = results.iter().all(|d| d.pass);
    match cfg.output {
        OutputFormat::Text | OutputFormat::Csv => {
            for d in &results {
                outln!(
                    "{}: {}  result: {}  expected{}: {}",
                    d.name,
                    if d.pass { "PASS" } else { "FAIL" },
                    print_expr(&d.result),
                    if d.expect_equal { "" } else { " (inequality)" },
                    print_expr(&d.expected),
                );
                for note in &d.notes {
                    outln!("  note: {note}");
                }
                if args.trace_steps {
                    outln!("{}", serde_json::to_string_pretty(&d.log).unwrap());
                }
            }
        }
        OutputFormat::Json => {
            let arr: Vec<serde_json::Value> = results
                .iter()
                .map(|d| {
                    serde_json::json!({
                        "name": d.name,
                        "pass": d.pass,
                        "result": print_expr(&d.result),
                        "expected": print_expr(&d.expected),
                        "expect_equal": d.expect_equal,
                        "notes": d.notes,
                        "boundary_terms_emitted": d.log.boundary_terms_emitted,
                        "boundary_terms_annihilated": d.log.boundary_terms_annihilated,
                        "steps": if args.trace_steps {
                            serde_json::to_value(&d.log.steps).unwrap()
                        } else {
                            serde_json::json!(d.log.steps_taken)
                        },
                    })
                })
                .collect();
            outln!("{}", serde_json::to_string_pretty(&arr).unwrap());
        }
    }
    if all_pass {
        0
    } else {
        2
    }
}

fn cmd_check(args: CheckArgs, mut cfg: Config) -> i32 {
    if let Some(n) = args.grid_n {
        cfg.grid_n = n;
    }
    if let Some(l) = args.grid_l {
        cfg.grid_l = l;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("{e}");
        return 1;
    }
    let report = match run_all_checks(cfg.grid_n, cfg.grid_l, cfg.seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("config error: {e}");
            return 1;
        }
    };
    match cfg.output {
        OutputFormat::Json => {
            outln!("{}", serde_json::to_string_pretty(&report).unwrap());
        }
        OutputFormat::Csv => {
            outln!("name,value,threshold,comparison,pass");
            for e in &report.entries {
                let rel = match e.comparison {
                    tagcalc_numeric::Comparison::Below => "below",
                    tagcalc_numeric::Comparison::Above => "above",
                };
                outln!("{},{:.17e},{:.3e},{},{}", e.name, e.value, e.threshold, rel, e.pass);
            }
        }
        OutputFormat::Text => {
            for e in &report.entries {
                let rel = match e.comparison {
                    tagcalc_numeric::Comparison::Below => "<",
                    tagcalc_numeric::Comparison::Above => ">",
                };
                outln!(
                    "{}: {}  ({:.3e} {} {:.3e})",
                    e.name,
                    if e.pass { "PASS" } else { "FAIL" },
                    e.value,
                    rel,
                    e.threshold
                );
            }
            outln!("overall: {}", if report.pass { "PASS" } else { "FAIL" });
        }
    }
    if report.pass {
        0
    } else {
        2
    }
}

fn cmd_wigner(args: WignerArgs, mut cfg: Config) -> i32 {
    if let Some(n) = args.grid_n {
        cfg.grid_n = n;
    }
    if let Some(l) = args.grid_l {
        cfg.grid_l = l;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("{e}");
        return 1;
    }
    let grid = match Grid::new(cfg.grid_n, cfg.grid_l) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("config error: {e}");
            return 1;
        }
    };
    let (state, label) = match parse_state_spec(&args.state, &grid) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };
    let map = wigner_of_density(&grid, &[(1.0, state)]);
    let default_format = match cfg.output {
        OutputFormat::Json => "json",
        _ => "csv",
    };
    let format = args.format.as_deref().unwrap_or(default_format);
    let content = match format {
        "csv" => map.to_csv(),
        "json" => serde_json::to_string_pretty(&map).unwrap(),
        other => {
            eprintln!("unknown wigner format `{other}` (csv or json)");
            return 1;
        }
    };
    let path = args.out.unwrap_or_else(|| format!("wigner_{label}.{format}"));
    if path == "-" {
        outwrite!("{content}");
        return 0;
    }
    if let Err(e) = std::fs::write(&path, content) {
        eprintln!("cannot write {path}: {e}");
        return 1;
    }
    outln!("wrote {path}");
    0
}

fn parse_state_spec(
    spec: &str,
    grid: &Grid,
) -> Result<(tagcalc_numeric::NumericState, String), String> {
    if let Some(n) = spec.strip_prefix("fock:") {
        let n: usize = n.parse().map_err(|_| format!("bad fock order `{n}`"))?;
        if n > 20 {
            return Err("fock orders above 20 need a wider grid".into());
        }
        return Ok((hermite_gauss(grid, n), format!("fock{n}")));
    }
    if let Some(re_im) = spec.strip_prefix("coherent:") {
        let (re, im) = re_im
            .split_once(',')
            .ok_or_else(|| "coherent spec is coherent:RE,IM".to_string())?;
        let re: f64 = re.parse().map_err(|_| format!("bad number `{re}`"))?;
        let im: f64 = im.parse().map_err(|_| format!("bad number `{im}`"))?;
        return Ok((coherent(grid, Complex64::new(re, im)), format!("coherent{re}_{im}")));
    }
    Err(format!("unknown state spec `{spec}` (fock:N or coherent:RE,IM)"))
}
