use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use weil_core::cocycle::{eta, eta_product, norm_solve, sigma_decompose, CocycleData};
use weil_core::descent::{build_splitting, default_theta_candidates};
use weil_core::sympl::parse_word;
use weil_core::{AdditiveCharacter, DilationSum, EvalOptions, Tower};
use weil_cli::config::{parse_cell, RunConfig, Suite};
use weil_cli::format::{cyclotomic_json, cyclotomic_text, element_json, function_json, function_text};
use weil_cli::parse::{parse_function, parse_operator, OpContext};
use weil_cli::suites;

/// Exact Weil representation and its rational descent, checked by computation.
#[derive(Parser)]
#[command(name = "weil", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and write a report.
    Verify(VerifyArgs),
    /// Apply an operator expression to a function.
    Compute(ComputeArgs),
    /// The unit of norm −1 used by the cocycle.
    NormSolve(FieldArgs),
    /// Write a symplectic word as p₁ τ_i p₂.
    Decompose(DecomposeArgs),
    /// The cocycle δ(σ) over the transversal and the splitting α.
    Describe(FieldArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct FieldArgs {
    /// Odd prime.
    #[arg(long, default_value_t = 3)]
    p: u64,
    /// Rank of Sp(2n).
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Depth of the tower Q(ζ_{4p^N}).
    #[arg(long = "N", default_value_t = 2)]
    depth: u32,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    field: FieldArgs,
    /// Working cell j,k (repeatable).
    #[arg(long = "cell", value_parser = parse_cell, allow_hyphen_values = true)]
    cells: Vec<(i64, i64)>,
    /// Suite to run (repeatable; default all).
    #[arg(long = "suite")]
    suites: Vec<Suite>,
    /// Random probe combinations added to the atoms of each cell.
    #[arg(long, default_value_t = 3)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random Heisenberg pairs and random (g, atom) pairs.
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    /// Random words for intertwining and the main theorem.
    #[arg(long, default_value_t = 20)]
    words: usize,
    /// Re-run the main-theorem checks at N + 1 and compare.
    #[arg(long)]
    stability: bool,
    /// Only run checks with this record name (repeatable).
    #[arg(long = "check")]
    checks: Vec<String>,
    /// Worker threads (0: one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct ComputeArgs {
    /// Operator expression, e.g. "W(tau1*unip(1/3))".
    expr: String,
    /// Function spec, e.g. "atom(0,0) + zeta(1)*atom(1/3,0)".
    function: String,
    #[command(flatten)]
    field: FieldArgs,
    /// Re-evaluate every finite sum on a wider, finer box and fail on any change.
    #[arg(long)]
    certify: bool,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Generator word, e.g. "tau1*unip(1/3)*levi(2)".
    word: String,
    #[command(flatten)]
    field: FieldArgs,
}

/// Exit status for usage errors, matching clap's.
const USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(USAGE)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

fn runtime(e: impl ToString) -> Failure {
    Failure::Runtime(e.to_string())
}

fn tower(f: &FieldArgs) -> Result<Tower, Failure> {
    if f.n == 0 {
        return Err(Failure::Usage("n must be at least 1".into()));
    }
    Tower::new(f.p, f.depth).map_err(|e| Failure::Usage(e.to_string()))
}

fn emit(f: &FieldArgs, json: Value, text: String) -> Result<(), Failure> {
    let body = match f.format {
        Format::Json => serde_json::to_string_pretty(&json).expect("serializable") + "\n",
        Format::Text => text,
    };
    match &f.out {
        Some(path) => fs::write(path, body).map_err(|e| runtime(format!("{}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn run(cmd: Command) -> Result<bool, Failure> {
    match cmd {
        Command::Verify(a) => verify(a),
        Command::Compute(a) => compute(a),
        Command::NormSolve(f) => {
            let t = tower(&f)?;
            let u = norm_solve(f.p, f.depth).map_err(runtime)?;
            let norm = eta_product(&u, &eta(t), (f.p - 1) / 2);
            let ok = norm == t.from_int(-1);
            let json = json!({ "p": f.p, "N": f.depth, "u": cyclotomic_json(&u), "norm": cyclotomic_json(&norm), "pass": ok });
            let text = format!("u = {}\nnorm = {}\n", cyclotomic_text(&u), cyclotomic_text(&norm));
            emit(&f, json, text)?;
            Ok(ok)
        }
        Command::Decompose(a) => {
            tower(&a.field)?;
            let g = parse_word(a.field.n, &a.word).map_err(Failure::Usage)?;
            let d = g.bruhat_siegel(a.field.p);
            let ok = d.product() == g;
            let json = json!({
                "g": element_json(&g),
                "p1": element_json(&d.p1),
                "rank": d.rank,
                "p2": element_json(&d.p2),
                "product_matches": ok,
            });
            let rows = |m: &weil_core::SymplecticElement| {
                m.entry_strings().iter().map(|r| format!("  [{}]\n", r.join(", "))).collect::<String>()
            };
            let text = format!("p1 =\n{}tau_{}\np2 =\n{}", rows(&d.p1), d.rank, rows(&d.p2));
            emit(&a.field, json, text)?;
            Ok(ok)
        }
        Command::Describe(f) => describe(&f),
    }
}

fn verify(a: VerifyArgs) -> Result<bool, Failure> {
    let defaults = RunConfig::default();
    let cfg = RunConfig {
        p: a.field.p,
        n: a.field.n,
        depth: a.field.depth,
        cells: if a.cells.is_empty() { defaults.cells } else { a.cells },
        random_probes: a.probes,
        seed: a.seed,
        suites: if a.suites.is_empty() { Suite::ALL.to_vec() } else { a.suites },
        pairs: a.pairs,
        words: a.words,
        stability: a.stability,
        checks: a.checks,
    };
    cfg.validate().map_err(|e| Failure::Usage(e.0))?;
    let report = suites::run(&cfg, a.jobs).map_err(|e| Failure::Usage(e.0))?;
    let body = match a.field.format {
        Format::Json => report.to_json() + "\n",
        Format::Text => report.to_text(),
    };
    match &a.field.out {
        Some(path) => fs::write(path, body).map_err(|e| runtime(format!("{}: {e}", path.display())))?,
        None => print!("{body}"),
    }
    Ok(report.all_passed())
}

fn compute(a: ComputeArgs) -> Result<bool, Failure> {
    let t = tower(&a.field)?;
    let ctx = OpContext::new(AdditiveCharacter::standard(a.field.p), a.field.n, t);
    let phi = parse_function(&a.function, t, a.field.n).map_err(|e| Failure::Usage(format!("function {e}")))?;
    let op = parse_operator(&a.expr, &ctx).map_err(|e| Failure::Usage(format!("operator {e}")))?;
    let opts = EvalOptions { certify: a.certify, ..EvalOptions::default() };
    let out = op.apply(&phi, &opts).map_err(runtime)?;
    emit(&a.field, function_json(&out), function_text(&out))?;
    Ok(true)
}

fn dilations_json(d: &DilationSum) -> Value {
    let terms: Vec<Value> = d.terms().iter().map(|(r, c)| json!({ "r": r, "c": cyclotomic_json(c) })).collect();
    json!({ "modulus": d.modulus(), "terms": terms })
}

fn dilations_text(d: &DilationSum) -> String {
    d.terms().iter().map(|(r, c)| format!("    [{r}] {}\n", cyclotomic_text(c))).collect()
}

fn describe(f: &FieldArgs) -> Result<bool, Failure> {
    let t = tower(f)?;
    let lambda = AdditiveCharacter::standard(f.p);
    let cocycle = CocycleData::new(&lambda, f.n, t).map_err(runtime)?;
    let splitting = build_splitting(&cocycle, &default_theta_candidates(t)).map_err(runtime)?;
    let mut sigmas = Vec::new();
    let mut text = format!("p = {}  n = {}  N = {}\nu = {}\n", f.p, f.n, f.depth, cyclotomic_text(cocycle.norm_solution()));
    for sigma in cocycle.transversal() {
        let dec = sigma_decompose(&sigma).map_err(runtime)?;
        let delta = cocycle.delta_dilations(&sigma).map_err(runtime)?;
        text.push_str(&format!("sigma_{} (i = {}, s = {})\n{}", sigma.exponent(), dec.i, dec.s, dilations_text(&delta)));
        sigmas.push(json!({ "exponent": sigma.exponent(), "i": dec.i, "s": dec.s, "delta": dilations_json(&delta) }));
    }
    text.push_str(&format!("theta = {}\nalpha =\n{}", cyclotomic_text(splitting.theta()), dilations_text(splitting.alpha_dilations())));
    let json = json!({
        "p": f.p,
        "n": f.n,
        "N": f.depth,
        "norm_solution": cyclotomic_json(cocycle.norm_solution()),
        "transversal": sigmas,
        "theta": cyclotomic_json(splitting.theta()),
        "averaged": dilations_json(splitting.averaged()),
        "alpha": dilations_json(splitting.alpha_dilations()),
    });
    emit(f, json, text)?;
    Ok(true)
}
