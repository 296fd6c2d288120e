//! Command-line front end: parse a kernel, run the repair loop, write the
//! repaired kernel and a JSON summary, and exit with a code describing the
//! outcome category.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use barrierfix::{
    parse, pretty_print, repair, write_summary, write_wdimacs, CannotRepairReason, LaunchConfig,
    OracleConfig, RepairConfig, RepairOutcome, RepairRun, Strategy, SummaryFile, Verdict, Verifier,
    WeightConfig,
};

const EXIT_OK: u8 = 0;
const EXIT_INPUT_ERROR: u8 = 1;
const EXIT_NOT_REPAIRABLE: u8 = 2;
const EXIT_NO_SOLUTION: u8 = 3;
const EXIT_TIMEOUT: u8 = 4;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 74;

#[derive(Parser, Debug)]
#[command(
    name = "barrierfix",
    version,
    about = "Inserts and removes synchronization barriers to eliminate data races and barrier divergence in MiniKernel GPU kernels"
)]
struct Cli {
    /// Input kernel file (.mk).
    input: PathBuf,

    /// Solve every round with the exact weighted-partial-MaxSAT solver
    /// instead of the greedy hitting-set strategy.
    #[arg(long)]
    maxsat: bool,

    /// Do not insert grid-level candidate barriers.
    #[arg(long)]
    disable_grid: bool,

    /// Leave existing programmer barriers untouched (never remove them).
    #[arg(long)]
    disable_inspect: bool,

    /// Additive weight penalty for grid-level barriers (default 12).
    #[arg(long, value_name = "INT")]
    gw: Option<u64>,

    /// Multiplicative weight base per loop-nesting level (default 10).
    #[arg(long, value_name = "INT")]
    lw: Option<u64>,

    /// Override the number of blocks in the launch configuration (1..=8).
    #[arg(long, value_name = "INT")]
    blocks: Option<u32>,

    /// Override the number of threads per block (1..=8).
    #[arg(long, value_name = "INT")]
    threads: Option<u32>,

    /// Iteration bound for `while` loops without an explicit `unroll` hint
    /// (default 2, max 64).
    #[arg(long, value_name = "INT")]
    unroll: Option<u32>,

    /// Where to write the repaired kernel (default: <input>.fixed.mk).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Where to write the JSON summary (default: <input>.summary.json).
    #[arg(long, value_name = "PATH")]
    summary: Option<PathBuf>,

    /// Dump the final constraint set in WDIMACS text format.
    #[arg(long, value_name = "PATH")]
    dump_cnf: Option<PathBuf>,

    /// Dump the last counterexample's per-thread access log as JSON lines.
    #[arg(long, value_name = "PATH")]
    dump_trace: Option<PathBuf>,

    /// Maximum number of solve/verify rounds before timing out (default 1000).
    #[arg(long, value_name = "INT", default_value_t = 1000)]
    timeout_iters: u32,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(run(&cli))
}

fn usage_error(message: &str) -> u8 {
    eprintln!("barrierfix: usage error: {message}");
    EXIT_USAGE
}

fn io_error(what: &str, path: &Path, err: &std::io::Error) -> u8 {
    eprintln!("barrierfix: {what} {}: {err}", path.display());
    EXIT_IO
}

/// `<input>.fixed.mk` / `<input>.summary.json`, replacing a `.mk` extension
/// when present: `race.mk` becomes `race.fixed.mk`, not `race.mk.fixed.mk`.
fn derived_path(input: &Path, suffix: &str) -> PathBuf {
    let stem = if input.extension().is_some_and(|e| e == "mk") {
        input.with_extension("")
    } else {
        input.to_path_buf()
    };
    let mut name = stem.into_os_string();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

fn run(cli: &Cli) -> u8 {
    if let Some(unroll) = cli.unroll {
        if !(1..=64).contains(&unroll) {
            return usage_error("--unroll must be between 1 and 64");
        }
    }

    let src = match std::fs::read_to_string(&cli.input) {
        Ok(src) => src,
        Err(e) => return io_error("cannot read", &cli.input, &e),
    };
    let input_name = cli.input.display().to_string();

    let mut kernel = match parse(&input_name, &src) {
        Ok(kernel) => kernel,
        Err(e) => {
            eprintln!("barrierfix: {e}");
            return EXIT_INPUT_ERROR;
        }
    };

    if cli.blocks.is_some() || cli.threads.is_some() {
        let blocks = cli.blocks.unwrap_or(kernel.launch.blocks);
        let threads = cli.threads.unwrap_or(kernel.launch.threads_per_block);
        kernel.launch = match LaunchConfig::new(blocks, threads) {
            Ok(launch) => launch,
            Err(msg) => return usage_error(&format!("invalid launch override: {msg}")),
        };
    }

    let cfg = RepairConfig {
        strategy: if cli.maxsat {
            Strategy::MaxSat
        } else {
            Strategy::Mhs
        },
        weights: WeightConfig {
            grid_weight: cli
                .gw
                .unwrap_or_else(|| WeightConfig::default().grid_weight),
            loop_weight: cli
                .lw
                .unwrap_or_else(|| WeightConfig::default().loop_weight),
            grid_enabled: !cli.disable_grid,
            inspect_existing: !cli.disable_inspect,
        },
        oracle: OracleConfig {
            default_unroll: cli
                .unroll
                .unwrap_or_else(|| OracleConfig::default().default_unroll),
            ..OracleConfig::default()
        },
        max_iterations: cli.timeout_iters,
        wall_timeout: None,
    };

    let run = match repair(&kernel, &cfg) {
        Ok(run) => run,
        Err(e) => {
            eprintln!("barrierfix: {input_name}: {e}");
            return EXIT_INPUT_ERROR;
        }
    };

    let summary_path = cli
        .summary
        .clone()
        .unwrap_or_else(|| derived_path(&cli.input, "summary.json"));
    let summary = SummaryFile::from_run(&input_name, &run);
    if let Err(e) = write_summary(&summary_path, &summary) {
        return io_error("cannot write summary", &summary_path, &e);
    }

    if let Some(cnf_path) = &cli.dump_cnf {
        let weights: Vec<u64> = run.instrumented.vars.iter().map(|v| v.weight).collect();
        let text = write_wdimacs(&run.constraint, &weights);
        if let Err(e) = std::fs::write(cnf_path, text) {
            return io_error("cannot write constraint dump", cnf_path, &e);
        }
    }

    if let Some(trace_path) = &cli.dump_trace {
        let text = render_trace(&run, &cfg.oracle);
        if let Err(e) = std::fs::write(trace_path, text) {
            return io_error("cannot write trace dump", trace_path, &e);
        }
    }

    report(&run, &summary);
    println!("wrote {}", summary_path.display());

    match &run.outcome {
        RepairOutcome::Repaired { kernel, .. } => {
            let out_path = cli
                .out
                .clone()
                .unwrap_or_else(|| derived_path(&cli.input, "fixed.mk"));
            if let Err(e) = std::fs::write(&out_path, pretty_print(kernel)) {
                return io_error("cannot write repaired kernel", &out_path, &e);
            }
            println!("wrote {}", out_path.display());
            EXIT_OK
        }
        RepairOutcome::CannotRepair(CannotRepairReason::NonRepairable(_)) => EXIT_NOT_REPAIRABLE,
        RepairOutcome::CannotRepair(_) => EXIT_NO_SOLUTION,
        RepairOutcome::Timeout => EXIT_TIMEOUT,
    }
}

/// The access logs of the two threads implicated by the last counterexample,
/// one JSON object per line. Empty when the run never saw a race or
/// divergence.
fn render_trace(run: &RepairRun, oracle_cfg: &OracleConfig) -> String {
    let witness = run.history.iter().rev().find_map(|record| {
        let threads = match &record.verdict {
            Verdict::Race {
                access1: Some(a1),
                access2: Some(a2),
                ..
            } => Some((a1.thread, a2.thread)),
            Verdict::Divergence { threads, .. } => Some(*threads),
            _ => None,
        };
        threads.map(|pair| (record.solution.clone(), pair))
    });
    let Some((solution, (t1, t2))) = witness else {
        return String::new();
    };
    let Ok(verifier) = Verifier::new(&run.instrumented, oracle_cfg) else {
        return String::new();
    };
    let mut out = String::new();
    for thread in [t1, t2] {
        for event in verifier.trace_events(thread, &solution) {
            out.push_str(&serde_json::to_string(&event).expect("trace events serialize"));
            out.push('\n');
        }
    }
    out
}

/// Free-form human-readable report on stdout.
fn report(run: &RepairRun, summary: &SummaryFile) {
    let stats = &run.stats;
    match &run.outcome {
        RepairOutcome::Repaired { changes, .. } if changes.is_empty() => {
            println!(
                "{}: already safe ({} iteration(s), {} verifier call(s))",
                summary.input_path, stats.iterations, stats.verifier_calls
            );
        }
        RepairOutcome::Repaired { changes, .. } => {
            println!(
                "{}: repaired with weight {} ({} iteration(s), {} verifier call(s))",
                summary.input_path,
                stats.total_weight.unwrap_or(0),
                stats.iterations,
                stats.verifier_calls
            );
            for change in changes {
                let sign = match change.action {
                    barrierfix::ChangeAction::AddBarrier => "+",
                    barrierfix::ChangeAction::RemoveBarrier => "-",
                };
                let level = match change.level {
                    barrierfix::BarrierLevel::Block => "block",
                    barrierfix::BarrierLevel::Grid => "grid",
                };
                println!(
                    "  {sign} {level} barrier at {}:{}",
                    summary.input_path, change.loc
                );
            }
        }
        RepairOutcome::CannotRepair(reason) => {
            let detail = match reason {
                CannotRepairReason::UnsatConstraints => {
                    "the accumulated constraints admit no barrier assignment".to_string()
                }
                CannotRepairReason::EmptyWitness => {
                    "a counterexample implicated no toggleable barrier".to_string()
                }
                CannotRepairReason::NonRepairable(msg) => msg.clone(),
            };
            println!(
                "{}: cannot repair: {detail} ({} iteration(s))",
                summary.input_path, stats.iterations
            );
        }
        RepairOutcome::Timeout => {
            println!(
                "{}: timed out after {} iteration(s)",
                summary.input_path, stats.iterations
            );
        }
    }
}
