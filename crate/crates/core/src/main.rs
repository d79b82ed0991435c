// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use staticflow::asm::{bind_manifest, parse_manifest, parse_program, BoundProgram};
use staticflow::bench::{self, BenchInput, BenchName, BenchReport};
use staticflow::graph::{graph_stats, validate_graph, DataflowGraph};
use staticflow::hdl::emit_netlist;
use staticflow::ops::Width;
use staticflow::sim::{run, trace_to_jsonl, SimConfig, SimResult, Termination};

const EXIT_ERROR: u8 = 1;

#[derive(Parser)]
#[command(name = "staticflow", version, about = "Static dataflow assembler, simulator, netlist emitter and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a program; prints the result as JSON.
    Run(RunArgs),
    /// Check a program and print its graph statistics.
    Validate { program: PathBuf },
    /// Run a benchmark (or `all`) against its oracle.
    Bench(BenchArgs),
    /// Write the structural VHDL netlist of a program.
    Emit {
        program: PathBuf,
        #[arg(long, value_parser = parse_width)]
        width: Option<Width>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a program and print its event trace as JSON lines.
    Trace {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    program: PathBuf,
    manifest: PathBuf,
    /// Overrides the manifest width.
    #[arg(long, value_parser = parse_width)]
    width: Option<Width>,
    /// Overrides the manifest tick budget.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_ticks: Option<u64>,
    /// Also write the trace as JSON lines to FILE.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark name, or `all`.
    name: String,
    #[arg(long, value_parser = parse_width)]
    width: Option<Width>,
    /// Scalar input (Fibonacci n or pop-count word).
    #[arg(long)]
    n: Option<i64>,
    /// Input as JSON: a number, an array, or a pair of arrays.
    #[arg(long)]
    input: Option<String>,
    /// Draw a random input from this seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_width(s: &str) -> Result<Width, String> {
    let n: i64 = s.parse().map_err(|e| format!("{e}"))?;
    Width::new(n).map_err(|e| e.to_string())
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_ERROR)
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), String> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn load_graph(path: &Path) -> Result<DataflowGraph, String> {
    let src = read(path)?;
    parse_program(&src).map_err(|e| format!("{}: {e}", path.display()))
}

fn print_diagnostics(graph: &DataflowGraph) -> bool {
    let report = validate_graph(graph);
    for d in &report.diagnostics {
        eprintln!("{d}");
    }
    report.is_ok()
}

fn load_program(args: &RunArgs) -> Result<BoundProgram, String> {
    let graph = load_graph(&args.program)?;
    if !print_diagnostics(&graph) {
        return Err(format!("{}: graph failed validation", args.program.display()));
    }
    let mut manifest =
        parse_manifest(&read(&args.manifest)?).map_err(|e| format!("{}: {e}", args.manifest.display()))?;
    if let Some(w) = args.width {
        manifest.width = w;
    }
    if let Some(t) = args.max_ticks {
        manifest.max_ticks = t;
    }
    bind_manifest(&graph, &manifest).map_err(|e| e.to_string())
}

fn termination_code(t: Termination) -> ExitCode {
    match t {
        Termination::Completed => ExitCode::SUCCESS,
        Termination::Deadlock => ExitCode::from(2),
        Termination::BudgetExhausted => ExitCode::from(3),
    }
}

fn simulate(args: &RunArgs, want_trace: bool) -> Result<(SimResult, String), String> {
    let program = load_program(args)?;
    let (result, trace) =
        run(&program, SimConfig { trace: want_trace || args.trace.is_some(), ..SimConfig::default() });
    let jsonl = trace_to_jsonl(&trace);
    if let Some(path) = &args.trace {
        fs::write(path, &jsonl).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    eprintln!("{:?} after {} ticks", result.terminated, result.ticks_elapsed);
    Ok((result, jsonl))
}

fn cmd_run(args: RunArgs) -> ExitCode {
    match simulate(&args, false) {
        Ok((result, _)) => {
            println!("{}", serde_json::to_string_pretty(&result).expect("result serializes"));
            termination_code(result.terminated)
        }
        Err(e) => fail(e),
    }
}

fn cmd_trace(args: RunArgs, out: Option<PathBuf>) -> ExitCode {
    match simulate(&args, true) {
        Ok((result, jsonl)) => match write_output(out.as_deref(), &jsonl) {
            Ok(()) => termination_code(result.terminated),
            Err(e) => fail(e),
        },
        Err(e) => fail(e),
    }
}

fn cmd_validate(program: PathBuf) -> ExitCode {
    let graph = match load_graph(&program) {
        Ok(g) => g,
        Err(e) => return fail(e),
    };
    let ok = print_diagnostics(&graph);
    println!("{}", serde_json::to_string_pretty(&graph_stats(&graph)).expect("stats serialize"));
    if ok {
        ExitCode::SUCCESS
    } else {
        fail(format!("{}: graph failed validation", program.display()))
    }
}

fn cmd_emit(program: PathBuf, width: Option<Width>, out: Option<PathBuf>) -> ExitCode {
    let graph = match load_graph(&program) {
        Ok(g) => g,
        Err(e) => return fail(e),
    };
    if !print_diagnostics(&graph) {
        return fail(format!("{}: graph failed validation", program.display()));
    }
    let text = match emit_netlist(&graph, width.unwrap_or_default()) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    match write_output(out.as_deref(), &text) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn bench_input(name: BenchName, args: &BenchArgs) -> Result<BenchInput, String> {
    if let Some(text) = &args.input {
        return serde_json::from_str(text).map_err(|e| format!("--input: {e}"));
    }
    if let Some(n) = args.n {
        return Ok(BenchInput::Scalar(n));
    }
    if let Some(seed) = args.seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ name as u64);
        return Ok(bench::random_input(name, &mut rng));
    }
    Ok(bench::default_input(name))
}

fn print_table(reports: &[BenchReport]) {
    eprintln!("{:<12} {:<12} {:>8}  {:<6} input", "benchmark", "terminated", "ticks", "match");
    for r in reports {
        eprintln!(
            "{:<12} {:<12} {:>8}  {:<6} {}",
            r.name.as_str(),
            serde_json::to_value(r.terminated).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            r.ticks,
            r.matched,
            r.input
        );
        if !r.matched {
            eprintln!("  got {:?}, oracle {:?}", r.outputs, r.oracle);
        }
    }
}

fn cmd_bench(args: BenchArgs) -> ExitCode {
    let names: Vec<BenchName> = if args.name == "all" {
        BenchName::ALL.to_vec()
    } else {
        match args.name.parse() {
            Ok(n) => vec![n],
            Err(e) => return fail(e),
        }
    };
    if names.len() > 1 && (args.input.is_some() || args.n.is_some()) {
        return fail("--input and --n need a single benchmark");
    }
    let width = args.width.unwrap_or_default();
    let want_trace = args.trace.is_some() && names.len() == 1;
    let results: Vec<Result<(BenchReport, String), String>> = std::thread::scope(|s| {
        let handles: Vec<_> = names
            .iter()
            .map(|&name| {
                let args = &args;
                s.spawn(move || {
                    let input = bench_input(name, args)?;
                    let config = SimConfig { trace: want_trace, ..SimConfig::default() };
                    let (report, trace) =
                        bench::run_benchmark_with(name, &input, width, config).map_err(|e| e.to_string())?;
                    Ok((report, trace_to_jsonl(&trace)))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("benchmark worker panicked")).collect()
    });
    let mut reports = Vec::new();
    for r in results {
        match r {
            Ok((report, jsonl)) => {
                if let (true, Some(path)) = (want_trace, &args.trace) {
                    if let Err(e) = fs::write(path, jsonl) {
                        return fail(format!("{}: {e}", path.display()));
                    }
                }
                reports.push(report);
            }
            Err(e) => return fail(e),
        }
    }
    print_table(&reports);
    let json = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0])
    } else {
        serde_json::to_string_pretty(&reports)
    }
    .expect("reports serialize");
    if let Err(e) = write_output(args.out.as_deref(), &format!("{json}\n")) {
        return fail(e);
    }
    if reports.iter().all(|r| r.matched) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ERROR)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate { program } => cmd_validate(program),
        Command::Bench(args) => cmd_bench(args),
        Command::Emit { program, width, out } => cmd_emit(program, width, out),
        Command::Trace { run, out } => cmd_trace(run, out),
    }
}
