//! `vrm`: generate instances, run the online matching engine, verify it
//! against the reference oracles and sweep competitive ratios.
//!
//! Exit codes: 0 ok, 2 usage, 3 I/O, 4 parse, 5 brute force refused,
//! 6 verification failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use vrm_core::engine::EngineOptions;
use vrm_core::harness::gen::{generate, Family, GenSpec};
use vrm_core::harness::report::{compare, ratio, run_report, AuditResult, CompareRow};
use vrm_core::harness::scaling::{
    parse_m_grid, run_scaling, top_trend_non_increasing, write_csv, Baseline, ScalingConfig,
};
use vrm_core::harness::verify::{verify_suite, Check, Suite, VerifyOptions};
use vrm_core::io::{read_instance, write_instance, write_solution};
use vrm_core::oracles::{opt_bruteforce, OracleConfig};
use vrm_core::{EngineError, Gamma, Instance, Q};

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_PARSE: u8 = 4;
const EXIT_TOO_LARGE: u8 = 5;
const EXIT_VERIFY: u8 = 6;

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

fn io_fail(path: &Path, e: impl std::fmt::Display) -> Failure {
    fail(EXIT_IO, format!("{}: {e}", path.display()))
}

fn engine_fail(e: EngineError) -> Failure {
    fail(EXIT_VERIFY, format!("engine: {e}"))
}

#[derive(Parser)]
#[command(name = "vrm", version, about = "Online min-cost bipartite matching with delays on a line")]
struct Cli {
    /// Print numbers as decimals with this many fractional digits instead of exact `p/q`.
    #[arg(long, global = true, value_name = "D")]
    decimal_digits: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded instance file.
    Gen(GenArgs),
    /// Run the engine on an instance and report costs against OPT and greedy.
    Run(RunArgs),
    /// Run the property suite on seeded instances.
    Verify(VerifyArgs),
    /// Tabulate the online algorithm, the offline optimum and greedy.
    Compare(CompareArgs),
    /// Sweep m and report competitive ratios as CSV.
    Scaling(ScalingArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Uniform,
    Clustered,
    EscalatingLine,
    Poisson,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Uniform => Family::Uniform,
            FamilyArg::Clustered => Family::Clustered,
            FamilyArg::EscalatingLine => Family::EscalatingLine,
            FamilyArg::Poisson => Family::Poisson,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Arrival rate (poisson).
    #[arg(long)]
    rate: Option<String>,
    /// Escalation factor (escalating_line).
    #[arg(long)]
    factor: Option<String>,
    /// Number of clusters (clustered).
    #[arg(long)]
    clusters: Option<u32>,
    #[arg(short = 'o', long)]
    output: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "3")]
    gamma: String,
    /// Write the event trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the solution with its cost breakdown.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Include per-request φ snapshots in the trace.
    #[arg(long)]
    snapshots: bool,
    /// Skip the dual-invariant audit after each augmentation.
    #[arg(long)]
    no_audit: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Small,
    Full,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "small")]
    suite: SuiteArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Total number of instances, spread evenly over the families.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value = "3")]
    gamma: String,
    /// Write the full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "3")]
    gamma: String,
    /// Also compute OPT by enumerating all m! assignments.
    #[arg(long)]
    bruteforce: bool,
    #[arg(long, default_value_t = OracleConfig::default().max_m_bruteforce)]
    max_m_bruteforce: usize,
}

#[derive(Args)]
struct ScalingArgs {
    /// Comma-separated sizes; `4,8,...,1024` doubles from 4 up to 1024.
    #[arg(long, default_value = "4,8,...,1024")]
    m_grid: String,
    #[arg(long, default_value_t = 20)]
    per_point: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "3")]
    gamma: String,
    #[arg(short = 'o', long)]
    output: PathBuf,
    /// Fail if any maximum ratio exceeds the one recorded in this file.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Record this sweep's maximum ratios to a baseline file.
    #[arg(long)]
    record_baseline: Option<PathBuf>,
}

struct Fmt {
    digits: Option<usize>,
}

impl Fmt {
    fn q(&self, q: &Q) -> String {
        match self.digits {
            Some(d) => q.to_decimal_string(d),
            None => q.to_string(),
        }
    }

    fn opt(&self, q: &Option<Q>) -> Value {
        q.as_ref().map_or(Value::Null, |q| json!(self.q(q)))
    }
}

fn parse_gamma(text: &str) -> Result<Gamma, Failure> {
    let value = Q::parse_exact(text).map_err(|e| fail(EXIT_PARSE, format!("--gamma: {e}")))?;
    Gamma::new(value).map_err(|e| fail(EXIT_USAGE, format!("--gamma: {e}")))
}

fn parse_q(flag: &str, text: &str) -> Result<Q, Failure> {
    Q::parse_exact(text).map_err(|e| fail(EXIT_PARSE, format!("{flag}: {e}")))
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    let bytes = fs::read(path).map_err(|e| io_fail(path, e))?;
    read_instance(&bytes).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| io_fail(path, e))
}

fn print_json(v: &Value) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).map_err(|e| fail(EXIT_IO, e.to_string()))?;
    writeln!(out).map_err(|e| fail(EXIT_IO, e.to_string()))
}

fn cmd_gen(args: GenArgs) -> Result<(), Failure> {
    let mut spec = GenSpec::new(args.family.into(), args.m, args.seed);
    if let Some(rate) = &args.rate {
        spec.params.rate = parse_q("--rate", rate)?;
    }
    if let Some(factor) = &args.factor {
        spec.params.factor = parse_q("--factor", factor)?;
    }
    if let Some(c) = args.clusters {
        spec.params.clusters = c;
    }
    let inst = generate(&spec).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    write_file(&args.output, &write_instance(&inst))
}

fn cmd_run(args: RunArgs, fmt: &Fmt) -> Result<(), Failure> {
    let inst = load_instance(&args.instance)?;
    let gamma = parse_gamma(&args.gamma)?;
    let options = EngineOptions { gamma, audit: !args.no_audit, snapshots: args.snapshots, ..Default::default() };
    let out = run_report(&inst, options).map_err(engine_fail)?;
    if let Some(path) = &args.trace {
        let mut bytes = Vec::new();
        out.trace.write_jsonl(&mut bytes).map_err(|e| io_fail(path, e))?;
        write_file(path, &bytes)?;
    }
    if let Some(path) = &args.solution {
        let bytes = write_solution(&inst, &out.solution).map_err(|e| fail(EXIT_VERIFY, e.to_string()))?;
        write_file(path, &bytes)?;
    }
    let r = &out.report;
    let audit = match r.audit {
        AuditResult::Passed { augmentations } => json!({"status": "passed", "augmentations": augmentations}),
        AuditResult::Skipped => json!({"status": "skipped"}),
    };
    print_json(&json!({
        "m": r.m,
        "gamma": fmt.q(&r.gamma),
        "cost_vrm": fmt.q(&r.cost_vrm),
        "cost_opt": fmt.q(&r.cost_opt),
        "cost_greedy": fmt.q(&r.cost_greedy),
        "ratio": fmt.opt(&r.ratio),
        "phi_total": fmt.q(&r.phi_total),
        "distance_vrm": fmt.q(&r.distance_vrm),
        "audit": audit,
        "wall_time_ms": r.wall_time_ms,
    }))
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let suite = match args.suite {
        SuiteArg::Small => Suite::Small,
        SuiteArg::Full => Suite::Full,
    };
    let options = VerifyOptions { gamma: parse_gamma(&args.gamma)?, ..Default::default() };
    let report = verify_suite(suite, args.seed, args.count, &options);
    if let Some(path) = &args.report {
        let bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
        write_file(path, &bytes)?;
    }
    println!("instances {}", report.instances);
    for check in Check::ALL {
        println!("{:<14} checks {:>10}  failures {}", check.to_string(), report.count(check), report.failed(check));
    }
    for f in report.failures.iter().take(20) {
        eprintln!(
            "FAIL #{} {} m={} seed={}: {}: {}",
            f.index, f.family, f.m, f.seed, f.failure.check, f.failure.message
        );
    }
    if report.passed() {
        Ok(())
    } else {
        Err(fail(EXIT_VERIFY, format!("{} failed checks", report.failures.len())))
    }
}

fn cmd_compare(args: CompareArgs, fmt: &Fmt) -> Result<(), Failure> {
    let inst = load_instance(&args.instance)?;
    let gamma = parse_gamma(&args.gamma)?;
    let mut rows = compare(&inst, gamma).map_err(engine_fail)?;
    if args.bruteforce {
        let config = OracleConfig { max_m_bruteforce: args.max_m_bruteforce, ..Default::default() };
        let brute = opt_bruteforce(&inst, &config).map_err(|e| fail(EXIT_TOO_LARGE, e.to_string()))?;
        if brute.cost != rows[1].cost {
            return Err(fail(EXIT_VERIFY, format!("brute-force OPT {} differs from Hungarian {}", brute.cost, rows[1].cost)));
        }
        rows.push(CompareRow {
            algorithm: "opt_bruteforce",
            ratio: ratio(&brute.cost, &brute.cost),
            cost: brute.cost.clone(),
            distance: brute.cost,
            delay: Q::zero(),
        });
    }
    let mut out = io::stdout().lock();
    let w = |out: &mut io::StdoutLock, line: String| writeln!(out, "{line}").map_err(|e| fail(EXIT_IO, e.to_string()));
    w(&mut out, format!("{:<16}{:>16}{:>16}{:>16}{:>16}", "algorithm", "cost", "distance", "delay", "ratio"))?;
    for r in &rows {
        let ratio = r.ratio.as_ref().map_or("-".to_string(), |q| fmt.q(q));
        w(
            &mut out,
            format!("{:<16}{:>16}{:>16}{:>16}{:>16}", r.algorithm, fmt.q(&r.cost), fmt.q(&r.distance), fmt.q(&r.delay), ratio),
        )?;
    }
    Ok(())
}

fn cmd_scaling(args: ScalingArgs, fmt: &Fmt) -> Result<(), Failure> {
    let grid = parse_m_grid(&args.m_grid).map_err(|e| fail(EXIT_USAGE, format!("--m-grid: {e}")))?;
    let mut config = ScalingConfig::new(grid, args.per_point, args.seed);
    config.gamma = parse_gamma(&args.gamma)?;
    let baseline = match &args.baseline {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| io_fail(path, e))?;
            let b: Baseline =
                serde_json::from_slice(&bytes).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))?;
            Some(b)
        }
        None => None,
    };
    let points = run_scaling(&config).map_err(engine_fail)?;
    let mut csv = Vec::new();
    write_csv(&points, fmt.digits.unwrap_or(9), &mut csv).map_err(|e| fail(EXIT_IO, e.to_string()))?;
    write_file(&args.output, &csv)?;
    if let Some(path) = &args.record_baseline {
        let mut bytes = serde_json::to_vec_pretty(&Baseline::record(&config, &points)).expect("baseline serializes");
        bytes.push(b'\n');
        write_file(path, &bytes)?;
    }
    let mut problems = Vec::new();
    for (family, ok) in top_trend_non_increasing(&points) {
        println!("{family}: normalized ratio over the top three sizes {}", if ok { "non-increasing" } else { "INCREASING" });
        if !ok {
            problems.push(format!("{family}: normalized ratio increases"));
        }
    }
    if let Some(b) = baseline {
        problems.extend(b.regressions(&points));
    }
    for p in &problems {
        eprintln!("FAIL {p}");
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(fail(EXIT_VERIFY, format!("{} scaling checks failed", problems.len())))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let fmt = Fmt { digits: cli.decimal_digits };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a, &fmt),
        Command::Verify(a) => cmd_verify(a),
        Command::Compare(a) => cmd_compare(a, &fmt),
        Command::Scaling(a) => cmd_scaling(a, &fmt),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
