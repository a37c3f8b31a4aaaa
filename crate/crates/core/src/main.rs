use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ura::harness::{run_ablation, run_suite, write_outputs, Ablation, RunConfig};
use ura::problems::Suite;
use ura::Error;

#[derive(Parser)]
#[command(name = "ura", version, about = "Nested CMA-ES for black-box bilevel problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one problem over several seeds and report median/IQR.
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    /// Problem index within the suite (synthetic: 0 for c = 0, otherwise c = 1).
    #[arg(long)]
    problem: usize,
    #[arg(long, default_value_t = 5)]
    dx: usize,
    #[arg(long, default_value_t = 5)]
    dy: usize,
    /// Seeds 1..=K.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 10_000_000)]
    budget: u64,
    #[arg(long, value_enum, default_value_t = Ablation::None)]
    ablate: Ablation,
    /// Record per-generation best gaps and write one trace CSV per trial.
    #[arg(long)]
    trace: bool,
    #[arg(long, default_value = "results.json")]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Evaluation(_) | Error::Numerical(_) => 3,
        Error::Io(_) => 1,
    }
}

fn failed_seed_code(errors: &[String]) -> Option<u8> {
    (!errors.is_empty()).then_some(3)
}

fn run(args: RunArgs) -> Result<u8, Error> {
    let mut config = RunConfig::new(args.suite, args.problem, args.dx, args.dy)
        .with_seeds(1..=args.seeds)
        .with_budget(args.budget);
    config.trace = args.trace;
    config.validate()?;
    config.build_problem()?;

    if args.ablate == Ablation::None {
        let report = run_suite(&config)?;
        println!("{}", report.table());
        let json = serde_json::to_value(&report).map_err(|e| Error::Io(e.to_string()))?;
        write_outputs(&args.out, &[("full", &report)], &json)?;
        let errors: Vec<String> = report.failures.iter().map(|f| f.error.clone()).collect();
        Ok(failed_seed_code(&errors).unwrap_or(0))
    } else {
        let report = run_ablation(&config, args.ablate)?;
        println!("full method\n{}\n", report.full.table());
        println!("ablated\n{}\n", report.ablated.table());
        println!("seed  full_FEs  ablated_FEs  full_conv  ablated_conv");
        for p in &report.paired {
            println!(
                "{:>4}  {:>8}  {:>11}  {:>9}  {:>12}",
                p.seed, p.full_total_fes, p.ablated_total_fes, p.full_converged, p.ablated_converged
            );
        }
        let json = serde_json::to_value(&report).map_err(|e| Error::Io(e.to_string()))?;
        write_outputs(&args.out, &[("full", &report.full), ("ablated", &report.ablated)], &json)?;
        let errors: Vec<String> = report
            .full
            .failures
            .iter()
            .chain(&report.ablated.failures)
            .map(|f| f.error.clone())
            .collect();
        Ok(failed_seed_code(&errors).unwrap_or(0))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
