use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use xapp_core::config::RunConfig;
use xapp_core::parallel::Execution;
use xapp_core::pipeline::{run_pipeline, run_stage, ReportTable, RunOptions, Stage, StageReport};
use xapp_core::Result;

#[derive(Parser)]
#[command(name = "xapp", version, about = "Train, distill and evaluate RAN control xApps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train xApp 1 and xApp 2 independently.
    TrainTeachers(Common),
    /// Deploy the teachers and fill the distillation buffer.
    Collect(Common),
    /// Train the distilled xApp from the buffer.
    Distill(Common),
    /// Evaluate the distilled xApp.
    Evaluate(Common),
    /// Evaluate the individually trained pair under mitigation, in both priority orders.
    BaselineIndividual(Common),
    /// Train and evaluate the team-learning pair.
    BaselineTeam(Common),
    /// Aggregate outage across replicates into the summary table.
    Report(Common),
    /// Run every stage in order.
    Pipeline(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Override `output_dir`.
    #[arg(long, env = "XAPP_OUT_DIR")]
    out: Option<PathBuf>,
    /// Treat artifacts produced under a different config as errors.
    #[arg(long)]
    strict: bool,
    /// Run single-threaded; outputs are identical either way.
    #[arg(long)]
    sequential: bool,
}

impl Command {
    fn split(&self) -> (Option<Stage>, &Common) {
        match self {
            Command::TrainTeachers(c) => (Some(Stage::TrainTeachers), c),
            Command::Collect(c) => (Some(Stage::Collect), c),
            Command::Distill(c) => (Some(Stage::Distill), c),
            Command::Evaluate(c) => (Some(Stage::Evaluate), c),
            Command::BaselineIndividual(c) => (Some(Stage::BaselineIndividual), c),
            Command::BaselineTeam(c) => (Some(Stage::BaselineTeam), c),
            Command::Report(c) => (Some(Stage::Report), c),
            Command::Pipeline(c) => (None, c),
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn print_table(t: &ReportTable) {
    print!("{:>10}", "thr_mbps");
    for s in &t.schemes {
        print!(" {s:>20}");
    }
    println!();
    for (thr, row) in t.thresholds_mbps.iter().zip(&t.medians) {
        print!("{thr:>10.1}");
        for v in row {
            print!(" {v:>20.3}");
        }
        println!();
    }
}

fn run(cli: &Cli) -> Result<StageReport> {
    let (stage, common) = cli.command.split();
    let cfg = load_config(common)?;
    let opts = RunOptions {
        strict: common.strict,
        exec: if common.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    match stage {
        Some(stage) => run_stage(&cfg, stage, opts),
        None => run_pipeline(&cfg, opts),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for p in &report.outputs {
                eprintln!("wrote {}", p.display());
            }
            if let Some(t) = &report.table {
                println!("median outage (%) across replicates");
                print_table(t);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
