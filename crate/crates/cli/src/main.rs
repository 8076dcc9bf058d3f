//! `enumreg`: run fixtures, register-machine programs and DNF instances
//! through selectable delay regularizers and report deterministic
//! delay/space profiles.
//!
//! Exit status: 0 on success, 1 on usage or input errors, 2 when a delay
//! bound is violated (either detected by the regularizer or by the
//! `--bound` verdict).

mod report;
mod scenario;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use enumreg_core::machine::registers::StorageStrategy;
use enumreg_core::machine::SnapshotMode;

use crate::scenario::{CliError, DnfArgs, MachineSource, RegularizerChoice, RunKnobs, Sink};

#[derive(Parser)]
#[command(name = "enumreg", version, about = "Delay regularization for steppable enumerators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one machine through one regularizer and report its profiles.
    Demo(DemoArgs),
    /// DNF model enumeration.
    Dnf {
        #[command(subcommand)]
        command: DnfCommand,
    },
    /// Run one machine through several regularizers and report side by side.
    Compare(CompareArgs),
}

#[derive(Subcommand)]
enum DnfCommand {
    /// Enumerate the models of a DIMACS-style DNF file.
    Models(ModelsArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Fixture spec, e.g. bursty:8,3 / adversary:4,100 / uniform:8,1 /
    /// scripted:1,1,5
    #[arg(long, value_name = "SPEC", conflicts_with = "ram")]
    fixture: Option<String>,
    /// Path to a register-machine assembly file.
    #[arg(long, value_name = "PATH")]
    ram: Option<std::path::PathBuf>,
    /// Input word vector for --ram, comma separated.
    #[arg(long, value_name = "W,W,..", requires = "ram")]
    input: Option<String>,
    /// Register storage strategy for --ram.
    #[arg(long, value_name = "S", default_value = "flat")]
    storage: String,
}

#[derive(Args)]
struct KnobArgs {
    /// Incremental delay bound p (move-units); measured from a solo run
    /// when omitted.
    #[arg(long)]
    p: Option<u64>,
    /// Adaptive exponent epsilon, as N or N/D.
    #[arg(long, value_name = "N[/D]", default_value = "1")]
    epsilon: String,
    /// Use the Gray-counter most-significant-bit pull test instead of exact
    /// arithmetic (adaptive only).
    #[arg(long)]
    mbit: bool,
    /// Solution count bound for the geometric variants; measured from a
    /// solo run when omitted.
    #[arg(long, value_name = "S")]
    solution_bound: Option<u64>,
    /// Budget exponent a for the polynomial-budget variant.
    #[arg(long, value_name = "A", default_value_t = 0)]
    exponent_a: u32,
    /// Retire simulations that exhausted their zones (dynamic variant).
    #[arg(long)]
    retire: bool,
    /// Snapshot mode for the dynamic variant.
    #[arg(long, value_enum, default_value_t = SnapshotArg::Lazy)]
    snapshot: SnapshotArg,
    /// Fast-forward every simulation to the first emission and rebase zones.
    #[arg(long)]
    preprocess: bool,
    /// Verdict bound in move-units; defaults to the regularizer's
    /// structural bound where one exists.
    #[arg(long)]
    bound: Option<u64>,
}

#[derive(Args)]
struct OutputArgs {
    /// Print emitted solutions to stdout.
    #[arg(long)]
    emit: bool,
    /// Report only the solution count, not the solutions.
    #[arg(long)]
    count_only: bool,
    /// Write the report to this path instead of stdout.
    #[arg(long, value_name = "PATH")]
    report: Option<std::path::PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Include wall-clock milliseconds in the report (non-deterministic).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct DemoArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Which regularizer drives the machine.
    #[arg(long, value_enum, default_value_t = RegArg::Solo)]
    regularizer: RegArg,
    #[command(flatten)]
    knobs: KnobArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Comma-separated regularizers to run, e.g. queue,geometric
    #[arg(long, value_name = "A,B,..")]
    regularizers: String,
    #[command(flatten)]
    knobs: KnobArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ModelsArgs {
    /// DIMACS-style DNF file: `p dnf <vars> <terms>` then literal lines.
    path: std::path::PathBuf,
    /// How models travel from the search to the output.
    #[arg(long, value_enum, default_value_t = PipelineArg::None)]
    pipeline: PipelineArg,
    /// Drop contradictory terms with a warning instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Override the calibrated incremental delay.
    #[arg(long)]
    p: Option<u64>,
    /// Override the calibrated path-time budget of the hybrid.
    #[arg(long, value_name = "MU")]
    path_budget: Option<u64>,
    /// Override the calibrated solution bound.
    #[arg(long, value_name = "S")]
    solution_bound: Option<u64>,
    /// Frame models as packed bytes instead of 0/1 lines.
    #[arg(long)]
    binary: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegArg {
    Solo,
    Queue,
    Adaptive,
    Geometric,
    Dynamic,
    Usualinc,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SnapshotArg {
    Eager,
    Lazy,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PipelineArg {
    None,
    Queue,
    Geometric,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Demo(args) => run_demo(args),
        Command::Dnf { command: DnfCommand::Models(args) } => run_models(args),
        Command::Compare(args) => run_compare(args),
    };
    match outcome {
        Ok(pass) => {
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("enumreg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn parse_source(args: &SourceArgs) -> Result<MachineSource, CliError> {
    MachineSource::parse(
        args.fixture.as_deref(),
        args.ram.as_deref(),
        args.input.as_deref(),
        parse_storage(&args.storage)?,
    )
}

fn parse_storage(s: &str) -> Result<StorageStrategy, CliError> {
    match s {
        "flat" => Ok(StorageStrategy::Flat),
        "directory" => Ok(StorageStrategy::ChunkDirectory),
        other => {
            if let Some(c) = other.strip_prefix("chunks:") {
                let c: u32 = c
                    .parse()
                    .map_err(|_| CliError::usage(format!("bad chunk base in {other:?}")))?;
                if c < 2 {
                    return Err(CliError::usage("chunk base must be at least 2"));
                }
                Ok(StorageStrategy::GeometricChunks(c))
            } else {
                Err(CliError::usage(format!(
                    "unknown storage {other:?}; expected flat, chunks:C or directory"
                )))
            }
        }
    }
}

fn parse_epsilon(s: &str) -> Result<(u64, u64), CliError> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let num: u64 = num
        .parse()
        .map_err(|_| CliError::usage(format!("bad epsilon {s:?}")))?;
    let den: u64 = den
        .parse()
        .map_err(|_| CliError::usage(format!("bad epsilon {s:?}")))?;
    if num == 0 || den == 0 {
        return Err(CliError::usage("epsilon must be positive"));
    }
    Ok((num, den))
}

fn knobs_of(args: &KnobArgs) -> Result<RunKnobs, CliError> {
    let (eps_num, eps_den) = parse_epsilon(&args.epsilon)?;
    Ok(RunKnobs {
        p: args.p,
        epsilon: (eps_num, eps_den),
        mbit: args.mbit,
        solution_bound: args.solution_bound,
        exponent_a: args.exponent_a,
        retire: args.retire,
        snapshot: match args.snapshot {
            SnapshotArg::Eager => SnapshotMode::Eager,
            SnapshotArg::Lazy => SnapshotMode::Lazy,
        },
        preprocess: args.preprocess,
        bound: args.bound,
    })
}

fn sink_of(output: &OutputArgs) -> Sink {
    Sink {
        emit: output.emit,
        count_only: output.count_only,
        report_path: output.report.clone(),
        csv: output.format == FormatArg::Csv,
        timing: output.timing,
    }
}

fn reg_choice(r: RegArg) -> RegularizerChoice {
    match r {
        RegArg::Solo => RegularizerChoice::Solo,
        RegArg::Queue => RegularizerChoice::Queue,
        RegArg::Adaptive => RegularizerChoice::Adaptive,
        RegArg::Geometric => RegularizerChoice::Geometric,
        RegArg::Dynamic => RegularizerChoice::Dynamic,
        RegArg::Usualinc => RegularizerChoice::UsualInc,
    }
}

fn run_demo(args: DemoArgs) -> Result<bool, CliError> {
    let source = parse_source(&args.source)?;
    let knobs = knobs_of(&args.knobs)?;
    let sink = sink_of(&args.output);
    scenario::run_machine_scenario(
        "demo",
        &source,
        &[reg_choice(args.regularizer)],
        &knobs,
        &sink,
    )
}

fn run_compare(args: CompareArgs) -> Result<bool, CliError> {
    let source = parse_source(&args.source)?;
    let knobs = knobs_of(&args.knobs)?;
    let sink = sink_of(&args.output);
    let mut choices = Vec::new();
    for name in args.regularizers.split(',') {
        let choice = match name.trim() {
            "solo" => RegularizerChoice::Solo,
            "queue" => RegularizerChoice::Queue,
            "adaptive" => RegularizerChoice::Adaptive,
            "geometric" => RegularizerChoice::Geometric,
            "dynamic" => RegularizerChoice::Dynamic,
            "usualinc" => RegularizerChoice::UsualInc,
            other => return Err(CliError::usage(format!("unknown regularizer {other:?}"))),
        };
        choices.push(choice);
    }
    if choices.is_empty() {
        return Err(CliError::usage("no regularizers given"));
    }
    scenario::run_machine_scenario("compare", &source, &choices, &knobs, &sink)
}

fn run_models(args: ModelsArgs) -> Result<bool, CliError> {
    let sink = sink_of(&args.output);
    scenario::run_dnf_scenario(DnfArgs {
        path: args.path,
        pipeline: match args.pipeline {
            PipelineArg::None => enumreg_core::dnf::Pipeline::Direct,
            PipelineArg::Queue => enumreg_core::dnf::Pipeline::Queue,
            PipelineArg::Geometric => enumreg_core::dnf::Pipeline::Geometric,
        },
        lenient: args.lenient,
        p: args.p,
        path_budget: args.path_budget,
        solution_bound: args.solution_bound,
        binary: args.binary,
        sink,
    })
}
