//! Deterministic instrumentation: the move-unit ledger and the profiles it
//! produces.
//!
//! A move-unit is one `step()` call on an underlying machine. Every
//! regularized run owns a [`Ledger`], records a move for each step it drives,
//! an emit for each solution it outputs, and space samples along the way;
//! [`Ledger::finalize`] turns the event stream into a [`DelayProfile`] and a
//! [`SpaceProfile`]. Ratios are kept as exact fractions so repeated runs
//! produce bit-identical reports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact non-negative fraction. Stored reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0, "ratio with zero denominator");
        let g = gcd(num.max(1), den);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn from_int(v: u64) -> Self {
        Ratio { num: v, den: 1 }
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `self <= other`, exactly.
    pub fn le(&self, other: &Ratio) -> bool {
        (self.num as u128) * (other.den as u128) <= (other.num as u128) * (self.den as u128)
    }

    pub fn max(self, other: Ratio) -> Ratio {
        if self.le(&other) {
            other
        } else {
            self
        }
    }

    /// `self * k` as an exact fraction.
    pub fn scale(&self, k: u64) -> Ratio {
        let num = (self.num as u128) * (k as u128);
        assert!(num <= u64::MAX as u128, "ratio overflow");
        Ratio::new(num as u64, self.den)
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Gap structure of a run, in move-units.
///
/// `preprocessing` is the number of moves spent before the run's declared
/// preprocessing mark (zero when the run never marks one); emissions that
/// happen during preprocessing produce no gap entries. After that, `gaps[i]`
/// is the number of moves between consecutive emissions, the first gap
/// counting from the end of preprocessing. `sum(gaps) + preprocessing` equals
/// the total move count at the last emission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayProfile {
    pub preprocessing: u64,
    pub gaps: Vec<u64>,
    pub max_gap: u64,
    /// `sum(gaps) / len(gaps)`; for runs without a preprocessing mark this is
    /// the classical average delay, total moves at last emission over the
    /// number of solutions.
    pub average_gap: Option<Ratio>,
    /// `sup_i T(i) / i` over post-preprocessing emissions, where `T(i)` is
    /// the move count at the i-th of them minus the preprocessing moves.
    pub incremental_sup: Option<Ratio>,
    pub emissions: u64,
}

/// Peak buffered state observed during a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceProfile {
    pub peak_queue_len: u64,
    pub peak_live_simulations: u64,
    pub peak_register_cells: u64,
    pub peak_active_lazy_copies: u64,
}

/// Bookkeeping beyond the two profiles: totals and one-off event counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    /// Every `step()` driven on any underlying machine.
    pub total_moves: u64,
    /// Machine instances created over the run (initial loads plus snapshots).
    pub simulations_created: u64,
    /// Simulation list length when the run stopped.
    pub final_simulations: u64,
    /// Register cells copied eagerly by snapshots (not counted as moves).
    pub snapshot_cells_copied: u64,
    pub snapshots_taken: u64,
    /// Progress-invariant checks performed / failed during the run.
    pub invariant_checks: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("finalize called on an unfinished run")]
    UnfinishedRun,
}

/// Event recorder for one run. Create, feed, `mark_finished`, `finalize`.
#[derive(Debug, Clone)]
pub struct Ledger {
    moves: u64,
    preprocessing: Option<u64>,
    emission_moves: Vec<u64>,
    peak_queue_len: u64,
    peak_live_simulations: u64,
    peak_register_cells: u64,
    peak_active_lazy_copies: u64,
    stats: RunStats,
    finished: bool,
}

impl Ledger {
    pub fn new() -> Self {
        Ledger {
            moves: 0,
            preprocessing: None,
            emission_moves: Vec::new(),
            peak_queue_len: 0,
            peak_live_simulations: 0,
            peak_register_cells: 0,
            peak_active_lazy_copies: 0,
            stats: RunStats::default(),
            finished: false,
        }
    }

    /// One `step()` executed on an underlying machine.
    pub fn record_move(&mut self) {
        self.moves += 1;
        self.stats.total_moves += 1;
    }

    /// One solution emitted by the run, at the current move count.
    pub fn record_emit(&mut self) {
        self.emission_moves.push(self.moves);
    }

    /// Declare that everything so far was preprocessing.
    pub fn mark_preprocessing_end(&mut self) {
        debug_assert!(self.preprocessing.is_none());
        self.preprocessing = Some(self.moves);
    }

    pub fn record_queue_len(&mut self, len: u64) {
        self.peak_queue_len = self.peak_queue_len.max(len);
    }

    pub fn record_live_simulations(&mut self, count: u64) {
        self.peak_live_simulations = self.peak_live_simulations.max(count);
    }

    pub fn record_register_cells(&mut self, cells: u64) {
        self.peak_register_cells = self.peak_register_cells.max(cells);
    }

    pub fn record_active_lazy_copies(&mut self, count: u64) {
        self.peak_active_lazy_copies = self.peak_active_lazy_copies.max(count);
    }

    pub fn record_simulation_created(&mut self) {
        self.stats.simulations_created += 1;
    }

    pub fn record_snapshot(&mut self, cells_copied: u64) {
        self.stats.snapshots_taken += 1;
        self.stats.snapshot_cells_copied += cells_copied;
    }

    pub fn record_invariant_check(&mut self) {
        self.stats.invariant_checks += 1;
    }

    pub fn set_final_simulations(&mut self, count: u64) {
        self.stats.final_simulations = count;
    }

    pub fn moves(&self) -> u64 {
        self.moves
    }

    pub fn emissions(&self) -> u64 {
        self.emission_moves.len() as u64
    }

    pub fn mark_finished(&mut self) {
        self.finished = true;
    }

    pub fn finalize(self) -> Result<(DelayProfile, SpaceProfile, RunStats), MetricsError> {
        if !self.finished {
            return Err(MetricsError::UnfinishedRun);
        }
        let prep = self.preprocessing.unwrap_or(0);
        let mut gaps = Vec::new();
        let mut last = prep;
        let mut incr_sup: Option<Ratio> = None;
        let mut rank = 0u64;
        for &at in &self.emission_moves {
            if at < prep || (at <= prep && self.preprocessing.is_some()) {
                // Emission inside the declared preprocessing phase.
                continue;
            }
            gaps.push(at - last);
            last = at;
            rank += 1;
            let t = Ratio::new(at - prep, rank);
            incr_sup = Some(match incr_sup {
                None => t,
                Some(cur) => cur.max(t),
            });
        }
        let max_gap = gaps.iter().copied().max().unwrap_or(0);
        let average_gap = if gaps.is_empty() {
            None
        } else {
            Some(Ratio::new(gaps.iter().sum::<u64>(), gaps.len() as u64))
        };
        let delay = DelayProfile {
            preprocessing: prep,
            max_gap,
            average_gap,
            incremental_sup: incr_sup,
            emissions: self.emission_moves.len() as u64,
            gaps,
        };
        let space = SpaceProfile {
            peak_queue_len: self.peak_queue_len,
            peak_live_simulations: self.peak_live_simulations,
            peak_register_cells: self.peak_register_cells,
            peak_active_lazy_copies: self.peak_active_lazy_copies,
        };
        Ok((delay, space, self.stats))
    }
}

impl Default for Ledger {
    fn default() -> Self {
        Ledger::new()
    }
}

/// How many gap entries a serialized report carries verbatim; longer runs get
/// a power-of-two histogram instead.
pub const GAP_ELISION_THRESHOLD: usize = 100_000;

/// Report-friendly view of a delay profile: gaps inline when short, log2
/// histogram when long.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayReport {
    pub preprocessing: u64,
    pub max_gap: u64,
    pub average_gap: Option<Ratio>,
    pub incremental_sup: Option<Ratio>,
    pub emissions: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaps: Option<Vec<u64>>,
    /// `histogram[b]` counts gaps `g` with `floor(log2(max(g,1))) == b`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_histogram: Option<Vec<u64>>,
}

impl DelayReport {
    pub fn from_profile(p: &DelayProfile) -> Self {
        let (gaps, gap_histogram) = if p.gaps.len() > GAP_ELISION_THRESHOLD {
            let mut hist = vec![0u64; 65];
            for &g in &p.gaps {
                hist[63 - g.max(1).leading_zeros() as usize] += 1;
            }
            while hist.last() == Some(&0) && hist.len() > 1 {
                hist.pop();
            }
            (None, Some(hist))
        } else {
            (Some(p.gaps.clone()), None)
        };
        DelayReport {
            preprocessing: p.preprocessing,
            max_gap: p.max_gap,
            average_gap: p.average_gap,
            incremental_sup: p.incremental_sup,
            emissions: p.emissions,
            gaps,
            gap_histogram,
        }
    }
}

/// Flat CSV row for a (delay, space, stats) triple. First line is the header.
pub fn to_csv(delay: &DelayProfile, space: &SpaceProfile, stats: &RunStats) -> String {
    let opt = |r: &Option<Ratio>| match r {
        Some(r) => format!("{}", r),
        None => String::new(),
    };
    let mut out = String::new();
    out.push_str(
        "emissions,preprocessing,max_gap,average_gap,incremental_sup,\
         peak_queue_len,peak_live_simulations,peak_register_cells,peak_active_lazy_copies,\
         total_moves,simulations_created,final_simulations,snapshot_cells_copied\n",
    );
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        delay.emissions,
        delay.preprocessing,
        delay.max_gap,
        opt(&delay.average_gap),
        opt(&delay.incremental_sup),
        space.peak_queue_len,
        space.peak_live_simulations,
        space.peak_register_cells,
        space.peak_active_lazy_copies,
        stats.total_moves,
        stats.simulations_created,
        stats.final_simulations,
        stats.snapshot_cells_copied,
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emissions_every_move_give_unit_gaps() {
        let mut l = Ledger::new();
        for _ in 0..3 {
            l.record_move();
            l.record_emit();
        }
        l.mark_finished();
        let (d, _, _) = l.finalize().unwrap();
        assert_eq!(d.gaps, vec![1, 1, 1]);
        assert_eq!(d.max_gap, 1);
        assert_eq!(d.incremental_sup, Some(Ratio::from_int(1)));
        assert_eq!(d.average_gap, Some(Ratio::from_int(1)));
    }

    #[test]
    fn finalize_requires_finished() {
        let l = Ledger::new();
        assert_eq!(l.finalize().unwrap_err(), MetricsError::UnfinishedRun);
    }

    #[test]
    fn preprocessing_mark_splits_moves() {
        let mut l = Ledger::new();
        for _ in 0..5 {
            l.record_move();
        }
        l.record_emit(); // emitted during preprocessing
        l.mark_preprocessing_end();
        for _ in 0..2 {
            l.record_move();
        }
        l.record_emit();
        l.mark_finished();
        let (d, _, _) = l.finalize().unwrap();
        assert_eq!(d.preprocessing, 5);
        assert_eq!(d.gaps, vec![2]);
        assert_eq!(d.emissions, 2);
        assert_eq!(d.preprocessing + d.gaps.iter().sum::<u64>(), 7);
    }

    #[test]
    fn invariant_gap_sum_plus_preprocessing_is_total_at_last_emit() {
        let mut l = Ledger::new();
        let schedule = [3u64, 1, 4, 1, 5];
        let mut total = 0;
        for g in schedule {
            for _ in 0..g {
                l.record_move();
            }
            total += g;
            l.record_emit();
        }
        // trailing moves after the last emission are not part of any gap
        l.record_move();
        l.record_move();
        l.mark_finished();
        let (d, _, _) = l.finalize().unwrap();
        assert_eq!(d.gaps.iter().sum::<u64>() + d.preprocessing, total);
        assert!(d.average_gap.unwrap().le(&Ratio::from_int(d.max_gap)));
        // Without preprocessing, sup T(i)/i dominates the average T(S)/S.
        assert!(d.average_gap.unwrap().le(&d.incremental_sup.unwrap()));
    }

    #[test]
    fn ratio_ordering_and_display() {
        let a = Ratio::new(33, 9);
        assert_eq!(a, Ratio { num: 11, den: 3 });
        assert!(Ratio::new(7, 2).le(&a));
        assert!(!a.le(&Ratio::new(7, 2)));
        assert_eq!(format!("{}", a), "11/3");
        assert_eq!(format!("{}", Ratio::from_int(4)), "4");
    }

    #[test]
    fn reports_are_bit_identical_across_runs() {
        let run = || {
            let mut l = Ledger::new();
            for i in 0..100u64 {
                l.record_move();
                if i % 7 == 0 {
                    l.record_emit();
                }
                l.record_queue_len(i % 13);
            }
            l.mark_finished();
            let (d, s, st) = l.finalize().unwrap();
            let json = serde_json::to_string(&DelayReport::from_profile(&d)).unwrap();
            (json, to_csv(&d, &s, &st))
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn long_runs_elide_gaps_into_histogram() {
        let mut l = Ledger::new();
        for _ in 0..(GAP_ELISION_THRESHOLD + 5) {
            l.record_move();
            l.record_emit();
        }
        l.mark_finished();
        let (d, _, _) = l.finalize().unwrap();
        let r = DelayReport::from_profile(&d);
        assert!(r.gaps.is_none());
        let hist = r.gap_histogram.unwrap();
        assert_eq!(hist[0], (GAP_ELISION_THRESHOLD + 5) as u64);
    }
}
