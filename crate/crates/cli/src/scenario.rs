//! Scenario execution: build the machine source, derive missing knobs from a
//! solo baseline, run the selected regularizers and hand results to the
//! report writer.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use enumreg_core::amortizers::{
    adaptive_regularize, geometric_regularize, geometric_regularize_dynamic, queue_regularize,
    run_solo, usualinc_regularize, AmortizeError, RegularizedRun, RegularizerConfig,
};
use enumreg_core::dnf::{
    dnf_enumerate_with, parse_dnf_with, ParseOptions, Pipeline, PipelineOptions,
};
use enumreg_core::machine::assembly::parse_program;
use enumreg_core::machine::fixtures::FixtureSpec;
use enumreg_core::machine::miniram::{MiniRam, MiniRamProgram};
use enumreg_core::machine::registers::StorageStrategy;
use enumreg_core::machine::{SnapshotMachine, SnapshotMode};

use crate::report::{self, ConfigReport, Report, RunReport, Verdict};

#[derive(Debug)]
pub struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 1 }
    }

    pub fn bound(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 2 }
    }

    pub fn exit_code(&self) -> u8 {
        self.code
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { message: e.to_string(), code: 1 }
    }
}

impl From<AmortizeError> for CliError {
    fn from(e: AmortizeError) -> Self {
        let code = match &e {
            AmortizeError::DelayBoundViolated { .. }
            | AmortizeError::SolutionBoundExceeded { .. }
            | AmortizeError::CoverageMissed { .. }
            | AmortizeError::ProgressInvariantBroken { .. } => 2,
            _ => 1,
        };
        CliError { message: e.to_string(), code }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularizerChoice {
    Solo,
    Queue,
    Adaptive,
    Geometric,
    Dynamic,
    UsualInc,
}

impl RegularizerChoice {
    pub fn name(&self) -> &'static str {
        match self {
            RegularizerChoice::Solo => "solo",
            RegularizerChoice::Queue => "queue",
            RegularizerChoice::Adaptive => "adaptive",
            RegularizerChoice::Geometric => "geometric",
            RegularizerChoice::Dynamic => "dynamic",
            RegularizerChoice::UsualInc => "usualinc",
        }
    }

    fn needs_p(&self) -> bool {
        !matches!(self, RegularizerChoice::Solo | RegularizerChoice::Adaptive)
    }

    fn needs_solution_bound(&self) -> bool {
        matches!(self, RegularizerChoice::Geometric | RegularizerChoice::UsualInc)
    }
}

/// Exactly one machine source per scenario.
pub enum MachineSource {
    Fixture(FixtureSpec),
    Ram {
        path: PathBuf,
        program: Rc<MiniRamProgram>,
        input: Vec<u64>,
        storage: StorageStrategy,
    },
}

impl MachineSource {
    pub fn parse(
        fixture: Option<&str>,
        ram: Option<&Path>,
        input: Option<&str>,
        storage: StorageStrategy,
    ) -> Result<MachineSource, CliError> {
        match (fixture, ram) {
            (Some(spec), None) => {
                let spec: FixtureSpec = spec
                    .parse()
                    .map_err(|e| CliError::usage(format!("{e}")))?;
                Ok(MachineSource::Fixture(spec))
            }
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)?;
                let program = parse_program(&text)
                    .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
                let input = match input {
                    None => Vec::new(),
                    Some(words) => words
                        .split(',')
                        .map(|w| w.trim().parse::<u64>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| CliError::usage(format!("bad --input: {e}")))?,
                };
                Ok(MachineSource::Ram {
                    path: path.to_path_buf(),
                    program: Rc::new(program),
                    input,
                    storage,
                })
            }
            (None, None) => Err(CliError::usage("exactly one of --fixture or --ram is required")),
            (Some(_), Some(_)) => {
                Err(CliError::usage("exactly one of --fixture or --ram is required"))
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            MachineSource::Fixture(spec) => format!("{spec}"),
            MachineSource::Ram { path, storage, .. } => {
                format!("{} ({storage:?})", path.display())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunKnobs {
    pub p: Option<u64>,
    pub epsilon: (u64, u64),
    pub mbit: bool,
    pub solution_bound: Option<u64>,
    pub exponent_a: u32,
    pub retire: bool,
    pub snapshot: SnapshotMode,
    pub preprocess: bool,
    pub bound: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Sink {
    pub emit: bool,
    pub count_only: bool,
    pub report_path: Option<PathBuf>,
    pub csv: bool,
    pub timing: bool,
}

fn ceil_log2(v: u64) -> u32 {
    64 - (v.max(1) - 1).leading_zeros()
}

/// Structural gap bound for the verdict, where one exists.
fn default_bound(choice: RegularizerChoice, cfg: &RegularizerConfig) -> Option<u64> {
    match choice {
        RegularizerChoice::Queue => Some(cfg.incremental_delay),
        RegularizerChoice::Geometric => cfg
            .solution_count_bound
            .map(|s| 2 * cfg.incremental_delay * (ceil_log2(s) as u64 + 1)),
        _ => None,
    }
}

struct Baseline {
    p: u64,
    solutions: u64,
}

/// Measure the solo run once when any selected regularizer needs a derived
/// knob.
fn baseline<M, F>(mut make: F) -> Result<Baseline, CliError>
where
    M: SnapshotMachine,
    F: FnMut() -> M,
{
    let solo = run_solo(make())?;
    let p = solo
        .delay
        .incremental_sup
        .map(|r| r.num.div_ceil(r.den))
        .unwrap_or(1)
        .max(1);
    Ok(Baseline {
        p,
        solutions: solo.solutions.len() as u64,
    })
}

fn drive<M, F>(
    choice: RegularizerChoice,
    mut make: F,
    knobs: &RunKnobs,
    derived: Option<&Baseline>,
) -> Result<(RegularizedRun<M::Solution>, RegularizerConfig), CliError>
where
    M: SnapshotMachine,
    F: FnMut() -> M,
{
    let mut cfg = RegularizerConfig::with_p(
        knobs
            .p
            .or(derived.map(|b| b.p))
            .unwrap_or(1),
    )
    .epsilon(knobs.epsilon.0, knobs.epsilon.1)
    .exponent(knobs.exponent_a)
    .retire(knobs.retire)
    .snapshot(knobs.snapshot)
    .preprocess(knobs.preprocess);
    if knobs.mbit {
        cfg = cfg.mbit_arithmetic();
    }
    if let Some(s) = knobs.solution_bound.or(derived.map(|b| b.solutions)) {
        cfg = cfg.solution_bound(s.max(1));
    }
    let run = match choice {
        RegularizerChoice::Solo => run_solo(make())?,
        RegularizerChoice::Queue => queue_regularize(make(), &cfg)?,
        RegularizerChoice::Adaptive => adaptive_regularize(make(), &cfg)?,
        RegularizerChoice::Geometric => geometric_regularize(&mut make, &cfg)?,
        RegularizerChoice::Dynamic => geometric_regularize_dynamic(&mut make, &cfg)?,
        RegularizerChoice::UsualInc => usualinc_regularize(&mut make, &cfg)?,
    };
    Ok((run, cfg))
}

fn run_all<M, F>(
    command: &str,
    machine: String,
    choices: &[RegularizerChoice],
    mut make: F,
    knobs: &RunKnobs,
    sink: &Sink,
    show: impl Fn(&M::Solution) -> String,
) -> Result<bool, CliError>
where
    M: SnapshotMachine,
    F: FnMut() -> M,
{
    let needs_baseline = choices.iter().any(|c| {
        (c.needs_p() && knobs.p.is_none())
            || (c.needs_solution_bound() && knobs.solution_bound.is_none())
    });
    let derived = if needs_baseline {
        Some(baseline(&mut make)?)
    } else {
        None
    };
    let mut runs = Vec::new();
    let mut all_pass = true;
    for &choice in choices {
        let started = std::time::Instant::now();
        let (run, cfg) = drive(choice, &mut make, knobs, derived.as_ref())?;
        let wall_ms = sink.timing.then(|| started.elapsed().as_millis() as u64);
        if sink.emit && !sink.count_only {
            let mut out = String::new();
            for s in &run.solutions {
                out.push_str(&show(s));
                out.push('\n');
            }
            print!("{out}");
        }
        let bound = knobs.bound.or_else(|| default_bound(choice, &cfg));
        let pass = bound.is_none_or(|b| run.delay.max_gap <= b);
        all_pass &= pass;
        runs.push(RunReport {
            regularizer: choice.name().to_string(),
            config: ConfigReport::from(&cfg),
            solutions: run.solutions.len() as u64,
            delay: enumreg_core::metrics::DelayReport::from_profile(&run.delay),
            space: run.space,
            stats: run.stats,
            verdict: Verdict {
                bound,
                max_gap: run.delay.max_gap,
                pass,
            },
            calibration: None,
            wall_ms,
        });
    }
    let printed_solutions = sink.emit && !sink.count_only;
    let show_report_on_stdout = !printed_solutions || sink.report_path.is_some();
    report::write(
        &Report {
            command: command.to_string(),
            machine,
            runs,
        },
        sink,
        show_report_on_stdout,
    )?;
    Ok(all_pass)
}

pub fn run_machine_scenario(
    command: &str,
    source: &MachineSource,
    choices: &[RegularizerChoice],
    knobs: &RunKnobs,
    sink: &Sink,
) -> Result<bool, CliError> {
    match source {
        MachineSource::Fixture(spec) => {
            spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
            run_all(
                command,
                source.describe(),
                choices,
                || spec.machine().expect("validated spec"),
                knobs,
                sink,
                |s: &u64| s.to_string(),
            )
        }
        MachineSource::Ram { program, input, storage, .. } => {
            // Validate once up front so factory reloads cannot fail.
            MiniRam::load(program, input, *storage)
                .map_err(|e| CliError::usage(e.to_string()))?;
            run_all(
                command,
                source.describe(),
                choices,
                || MiniRam::load(program, input, *storage).expect("validated program"),
                knobs,
                sink,
                |s: &Vec<u64>| {
                    s.iter()
                        .map(|w| w.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                },
            )
        }
    }
}

pub struct DnfArgs {
    pub path: PathBuf,
    pub pipeline: Pipeline,
    pub lenient: bool,
    pub p: Option<u64>,
    pub path_budget: Option<u64>,
    pub solution_bound: Option<u64>,
    pub binary: bool,
    pub sink: Sink,
}

pub fn run_dnf_scenario(args: DnfArgs) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(&args.path)?;
    let (formula, warnings) =
        parse_dnf_with(&text, ParseOptions { lenient: args.lenient })
            .map_err(|e| CliError::usage(format!("{}: {e}", args.path.display())))?;
    for w in &warnings {
        eprintln!("enumreg: warning: {w:?}");
    }
    let formula = Rc::new(formula);
    let options = PipelineOptions {
        path_time_bound: args.path_budget,
        incremental_delay: args.p,
        solution_bound: args.solution_bound,
    };
    let started = std::time::Instant::now();
    let run = dnf_enumerate_with(&formula, args.pipeline, options)
        .map_err(|e| CliError::bound(e.to_string()))?;
    let wall_ms = args.sink.timing.then(|| started.elapsed().as_millis() as u64);
    if args.sink.emit && !args.sink.count_only {
        if args.binary {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            for m in &run.models {
                out.write_all(&m.0.to_bytes())?;
            }
        } else {
            let mut out = String::new();
            for m in &run.models {
                out.push_str(&m.to_string());
                out.push('\n');
            }
            print!("{out}");
        }
    }
    let pipeline_name = match args.pipeline {
        Pipeline::Direct => "none",
        Pipeline::Queue => "queue",
        Pipeline::Geometric => "geometric",
    };
    let report = Report {
        command: "dnf models".to_string(),
        machine: format!("{} (pipeline {pipeline_name})", args.path.display()),
        runs: vec![RunReport {
            regularizer: pipeline_name.to_string(),
            config: ConfigReport::default(),
            solutions: run.models.len() as u64,
            delay: enumreg_core::metrics::DelayReport::from_profile(&run.run.delay),
            space: run.run.space,
            stats: run.run.stats,
            verdict: Verdict {
                bound: None,
                max_gap: run.run.delay.max_gap,
                pass: true,
            },
            calibration: run.calibration,
            wall_ms,
        }],
    };
    let printed_solutions = args.sink.emit && !args.sink.count_only;
    let show_report_on_stdout = !printed_solutions || args.sink.report_path.is_some();
    report::write(&report, &args.sink, show_report_on_stdout)?;
    Ok(true)
}
