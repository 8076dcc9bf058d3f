//! Report rendering. Identical invocations must produce byte-identical
//! output, so everything serializes through fixed-order structs and the
//! wall clock only appears behind `--timing`.

use serde::Serialize;

use enumreg_core::amortizers::{ArithmeticMode, RegularizerConfig};
use enumreg_core::dnf::Calibration;
use enumreg_core::machine::SnapshotMode;
use enumreg_core::metrics::{DelayReport, RunStats, SpaceProfile};

use crate::scenario::{CliError, Sink};

#[derive(Serialize)]
pub struct Report {
    pub command: String,
    pub machine: String,
    pub runs: Vec<RunReport>,
}

#[derive(Serialize)]
pub struct RunReport {
    pub regularizer: String,
    pub config: ConfigReport,
    pub solutions: u64,
    pub delay: DelayReport,
    pub space: SpaceProfile,
    pub stats: RunStats,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

#[derive(Serialize, Default)]
pub struct ConfigReport {
    pub p: u64,
    pub epsilon: String,
    pub arithmetic: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution_bound: Option<u64>,
    pub exponent_a: u32,
    pub retire: bool,
    pub snapshot: String,
    pub preprocess: bool,
}

impl From<&RegularizerConfig> for ConfigReport {
    fn from(cfg: &RegularizerConfig) -> Self {
        ConfigReport {
            p: cfg.incremental_delay,
            epsilon: cfg.epsilon.to_string(),
            arithmetic: match cfg.arithmetic_mode {
                ArithmeticMode::Exact => "exact".to_string(),
                ArithmeticMode::Mbit => "mbit".to_string(),
            },
            solution_bound: cfg.solution_count_bound,
            exponent_a: cfg.exponent_a,
            retire: cfg.retire_machines,
            snapshot: match cfg.snapshot_mode {
                SnapshotMode::Eager => "eager".to_string(),
                SnapshotMode::Lazy => "lazy".to_string(),
            },
            preprocess: cfg.preprocess_to_first,
        }
    }
}

#[derive(Serialize)]
pub struct Verdict {
    pub bound: Option<u64>,
    pub max_gap: u64,
    pub pass: bool,
}

pub fn write(report: &Report, sink: &Sink, stdout_too: bool) -> Result<(), CliError> {
    let rendered = if sink.csv {
        to_csv(report)
    } else {
        let mut s = serde_json::to_string_pretty(report)
            .expect("report serialization cannot fail");
        s.push('\n');
        s
    };
    match &sink.report_path {
        Some(path) => std::fs::write(path, &rendered)?,
        None => {
            if stdout_too {
                print!("{rendered}");
            }
        }
    }
    Ok(())
}

fn ratio_cell(r: &Option<enumreg_core::metrics::Ratio>) -> String {
    r.map(|r| r.to_string()).unwrap_or_default()
}

fn to_csv(report: &Report) -> String {
    let mut out = String::from(
        "command,machine,regularizer,solutions,preprocessing,max_gap,average_gap,\
         incremental_sup,peak_queue_len,peak_live_simulations,peak_register_cells,\
         peak_active_lazy_copies,total_moves,simulations_created,final_simulations,\
         snapshot_cells_copied,bound,pass,wall_ms\n",
    );
    for run in &report.runs {
        let d = &run.delay;
        let s = &run.space;
        let t = &run.stats;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            report.command,
            report.machine,
            run.regularizer,
            run.solutions,
            d.preprocessing,
            d.max_gap,
            ratio_cell(&d.average_gap),
            ratio_cell(&d.incremental_sup),
            s.peak_queue_len,
            s.peak_live_simulations,
            s.peak_register_cells,
            s.peak_active_lazy_copies,
            t.total_moves,
            t.simulations_created,
            t.final_simulations,
            t.snapshot_cells_copied,
            run.verdict.bound.map(|b| b.to_string()).unwrap_or_default(),
            run.verdict.pass,
            run.wall_ms.map(|w| w.to_string()).unwrap_or_default(),
        ));
    }
    out
}
