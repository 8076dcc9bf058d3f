//! Geometric amortization.
//!
//! `N + 1` simulations of the same computation run interleaved at staggered
//! progress. Simulation `i` owns the zone `Z_i` of emission steps, `Z_0 =
//! [1, p]` and `Z_i = [2^(i-1) p + 1, 2^i p]`: it replays the whole
//! computation but only emits solutions whose step falls in its zone. The
//! focus rotates from the highest simulation downward, each receiving a
//! budget of `2p` moves, and jumps back to the top after every emission.
//! Because the zones partition `[1, 2^N p]` and an enumerator with
//! incremental delay `p` and at most `2^N` solutions finishes within that
//! horizon, every solution is emitted exactly as often as the machine emits
//! it, no gap exceeds `2p (N+1)` moves, and only `N + 1` configurations are
//! ever live.
//!
//! Zone membership is tested in constant time per move: each simulation
//! increments a Gray-code counter every `p` moves and compares its most
//! significant bit against the zone index, arming on `mbit = i - 1` (one
//! step before entry) and leaving on `mbit = i`.
//!
//! The dynamic variant needs no solution bound: it starts with one
//! simulation plus its copy and snapshots the newest simulation exactly when
//! it arms, i.e. one step before entering its own zone, which is where the
//! next zone's owner must branch off. With retirement, a simulation is
//! dropped once it leaves its zone, and every step of the underlying
//! computation is then visited by at most two simulations.
//!
//! The polynomial-budget variant regularizes machines with incremental time
//! `t^(a+1) p` by growing the per-visit budget to `S^a (a+1) 2p` as the
//! emitted count `S` rises; its last zone is open-ended upward since the
//! total time is only bounded by `S^(a+1) p`.

use super::{AmortizeError, RegularizedRun, RegularizerConfig};
use crate::gray_counter::GrayCounter;
use crate::machine::{Machine, SnapshotMachine, SnapshotMode};
use crate::metrics::Ledger;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ZoneState {
    Before,
    Entering,
    Inside,
    After,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ZoneEvent {
    None,
    /// The simulation is one step before entering its zone; in the dynamic
    /// variant this is the spawn point for the next simulation.
    Armed,
    /// The move just processed was the last one inside the zone.
    Exited,
}

/// Constant-time zone membership for one simulation: a block counter ticking
/// every `p` moves whose most significant bit is compared against the zone
/// index.
#[derive(Debug)]
struct ZoneTracker {
    index: usize,
    p: u64,
    /// Moves to ignore before block counting starts (preprocessing rebase).
    offset: u64,
    counter: GrayCounter,
    residual: u64,
    state: ZoneState,
    open_ended: bool,
}

impl ZoneTracker {
    fn fresh(index: usize, p: u64, offset: u64, open_ended: bool) -> Self {
        ZoneTracker {
            index,
            p,
            offset,
            counter: GrayCounter::new(),
            residual: 0,
            state: if index == 0 {
                ZoneState::Inside
            } else {
                ZoneState::Before
            },
            open_ended,
        }
    }

    /// Tracker for a simulation copied at `2^(i-1) p` rebased moves, whose
    /// block counter therefore starts at `2^(i-1)`.
    fn seeded(index: usize, p: u64, offset: u64, blocks_exponent: u32) -> Self {
        ZoneTracker {
            index,
            p,
            offset,
            counter: GrayCounter::with_power_of_two(blocks_exponent),
            residual: 0,
            state: ZoneState::Before,
            open_ended: false,
        }
    }

    /// Update for one move of the owning machine, which now has taken
    /// `steps` steps. Returns whether that move was inside the zone, plus
    /// any boundary event.
    fn on_move(&mut self, steps: u64) -> (bool, ZoneEvent) {
        if steps <= self.offset {
            return (false, ZoneEvent::None);
        }
        if self.state == ZoneState::Entering {
            self.state = ZoneState::Inside;
        }
        let in_zone = self.state == ZoneState::Inside;
        let mut event = ZoneEvent::None;
        self.residual += 1;
        if self.residual == self.p {
            self.residual = 0;
            self.counter.inc();
            let mbit = self.counter.mbit();
            match self.state {
                ZoneState::Before if mbit == Some(self.index as u32 - 1) => {
                    self.state = ZoneState::Entering;
                    event = ZoneEvent::Armed;
                }
                ZoneState::Inside
                    if !self.open_ended && mbit == Some(self.index as u32) =>
                {
                    self.state = ZoneState::After;
                    event = ZoneEvent::Exited;
                }
                _ => {}
            }
        }
        (in_zone, event)
    }

    fn past_zone(&self) -> bool {
        self.state == ZoneState::After
    }
}

/// Zone `Z_i` rebased by `offset`, for reporting and the index-0 exit rule.
fn zone_bounds(index: usize, p: u64, offset: u64) -> (u64, u64) {
    if index == 0 {
        (offset + 1, offset + p)
    } else {
        (
            offset + (1u64 << (index - 1)) * p + 1,
            offset + (1u64 << index) * p,
        )
    }
}

struct Sim<M: Machine> {
    machine: M,
    tracker: ZoneTracker,
    zone_index: usize,
    /// In-zone emissions made by this simulation during the sweep phase.
    emitted: u64,
    /// Solution events observed by this simulation, in or out of zone.
    seen: u64,
    cells_cache: u64,
    lazy_cache: bool,
}

impl<M: Machine> Sim<M> {
    fn new(machine: M, tracker: ZoneTracker) -> Self {
        let cells_cache = machine.state_cells();
        let lazy_cache = machine.lazy_copy_active();
        let zone_index = tracker.index;
        Sim {
            machine,
            tracker,
            zone_index,
            emitted: 0,
            seen: 0,
            cells_cache,
            lazy_cache,
        }
    }
}

/// The interleaving engine shared by the three geometric procedures.
struct Engine<M: Machine> {
    sims: Vec<Sim<M>>,
    ledger: Ledger,
    solutions: Vec<M::Solution>,
    p: u64,
    offset: u64,
    /// Exponent `a` of the per-visit budget `max(2p, S^a (a+1) 2p)`.
    budget_exponent: u32,
    /// `offset + 2^N p` for the bound-checked static variant.
    horizon: Option<u64>,
    solution_bound: Option<u64>,
    /// Assert `steps(M[i+1]) >= 2p |S_i|` at every emission (the static
    /// variant's progress invariant).
    check_progress: bool,
    dynamic: bool,
    retire: bool,
    snapshot_mode: SnapshotMode,
    total_cells: u64,
    total_lazy: u64,
    total_emitted: u64,
}

impl<M: Machine> Engine<M> {
    fn record_sim_created(&mut self) {
        self.ledger.record_simulation_created();
        self.ledger.record_live_simulations(self.sims.len() as u64);
    }

    fn refresh_space(&mut self, at: usize) {
        let sim = &mut self.sims[at];
        let cells = sim.machine.state_cells();
        let lazy = sim.machine.lazy_copy_active();
        self.total_cells = self.total_cells - sim.cells_cache + cells;
        self.total_lazy = self.total_lazy - (sim.lazy_cache as u64) + (lazy as u64);
        sim.cells_cache = cells;
        sim.lazy_cache = lazy;
        self.ledger.record_register_cells(self.total_cells);
        self.ledger.record_active_lazy_copies(self.total_lazy);
    }

    fn emit(&mut self, sol: M::Solution) {
        self.solutions.push(sol);
        self.ledger.record_emit();
        self.total_emitted += 1;
    }

    fn budget(&self) -> u64 {
        let base = 2 * self.p;
        if self.budget_exponent == 0 {
            return base;
        }
        let s = self.total_emitted as u128;
        let grown = s
            .checked_pow(self.budget_exponent)
            .and_then(|v| v.checked_mul(self.budget_exponent as u128 + 1))
            .and_then(|v| v.checked_mul(base as u128))
            .unwrap_or(u128::MAX);
        grown.min(u64::MAX as u128).max(base as u128) as u64
    }

    /// `steps(M[i+1]) >= 2p * |solutions emitted by M[0..=i]|`, rebased.
    /// Vacuous for a finished simulation: it has swept the entire
    /// computation, which is stronger than any step bound.
    fn check_progress_invariant(&mut self) -> Result<(), AmortizeError> {
        if !self.check_progress {
            return Ok(());
        }
        let mut below = 0u64;
        for i in 0..self.sims.len().saturating_sub(1) {
            below += self.sims[i].emitted;
            if self.sims[i + 1].machine.is_done() {
                continue;
            }
            let steps = self.sims[i + 1].machine.steps_taken().saturating_sub(self.offset);
            self.ledger.record_invariant_check();
            if steps < 2 * self.p * below {
                return Err(AmortizeError::ProgressInvariantBroken {
                    detail: format!(
                        "simulation {} at {} rebased steps, but simulations 0..={} emitted {}",
                        i + 1,
                        steps,
                        i,
                        below
                    ),
                });
            }
        }
        Ok(())
    }

    /// Run every simulation to its first emission and rebase every zone
    /// past that point; the preprocessing handling for machines whose first
    /// solution arrives later than their incremental delay. Only the first
    /// simulation's arrival is emitted; the replicas fast-forward through
    /// the identical prefix so that all zones start aligned.
    fn preprocess(&mut self) -> Result<(), AmortizeError> {
        for i in 0..self.sims.len() {
            loop {
                if self.sims[i].machine.is_done() {
                    break;
                }
                let sol = self.sims[i].machine.step()?;
                self.ledger.record_move();
                self.refresh_space(i);
                if let Some(s) = sol {
                    self.sims[i].seen += 1;
                    if i == 0 {
                        self.emit(s);
                    }
                    break;
                }
            }
        }
        self.offset = self.sims[0].machine.steps_taken();
        self.ledger.mark_preprocessing_end();
        Ok(())
    }

    /// The interleaving sweep. `spawn` is supplied on the dynamic path only;
    /// the static variants pass `None` and never take the spawn branch.
    fn drive(
        &mut self,
        spawn: Option<fn(&mut Self, usize) -> Result<(), AmortizeError>>,
    ) -> Result<(), AmortizeError> {
        let mut j: isize = self.sims.len() as isize - 1;
        'sweep: while j >= 0 {
            let ji = j as usize;
            if self.sims[ji].machine.is_done() || (self.retire && self.sims[ji].tracker.past_zone())
            {
                if self.retire {
                    // Everything above ji has had its budget this sweep;
                    // keep descending.
                    let sim = self.sims.remove(ji);
                    self.total_cells -= sim.cells_cache;
                    self.total_lazy -= sim.lazy_cache as u64;
                }
                j -= 1;
                continue 'sweep;
            }
            let budget = self.budget();
            let mut moved = 0u64;
            while moved < budget {
                if self.sims[ji].machine.is_done() {
                    break;
                }
                let sol = self.sims[ji].machine.step()?;
                moved += 1;
                self.ledger.record_move();
                self.refresh_space(ji);
                let steps = self.sims[ji].machine.steps_taken();
                let (in_zone, event) = self.sims[ji].tracker.on_move(steps);
                // The spawn check precedes the emission check, so the spawn
                // step (one before the spawner's own zone) never swallows an
                // owned solution.
                if self.dynamic
                    && event == ZoneEvent::Armed
                    && ji == self.sims.len() - 1
                    && !self.sims[ji].machine.is_done()
                {
                    let spawn = spawn.expect("dynamic engine without a spawn path");
                    spawn(self, ji)?;
                    j = self.sims.len() as isize - 1;
                    continue 'sweep;
                }
                if let Some(s) = sol {
                    self.sims[ji].seen += 1;
                    if let Some(bound) = self.solution_bound {
                        if self.sims[ji].seen > bound {
                            return Err(AmortizeError::SolutionBoundExceeded {
                                bound,
                                seen: self.sims[ji].seen,
                            });
                        }
                    }
                    if let Some(horizon) = self.horizon {
                        if steps > horizon {
                            return Err(AmortizeError::CoverageMissed { step: steps, horizon });
                        }
                    }
                    if in_zone {
                        self.sims[ji].emitted += 1;
                        self.emit(s);
                        self.check_progress_invariant()?;
                        j = self.sims.len() as isize - 1;
                        continue 'sweep;
                    }
                }
                if event == ZoneEvent::Exited && self.retire {
                    // The zone is exhausted mid-budget; drop the simulation
                    // and give the rest of the sweep to the ones below.
                    let sim = self.sims.remove(ji);
                    self.total_cells -= sim.cells_cache;
                    self.total_lazy -= sim.lazy_cache as u64;
                    j -= 1;
                    continue 'sweep;
                }
            }
            j -= 1;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<RegularizedRun<M::Solution>, AmortizeError> {
        self.check_progress_invariant()?;
        self.ledger.set_final_simulations(self.sims.len() as u64);
        self.ledger.mark_finished();
        let (delay, space, stats) = self.ledger.finalize()?;
        Ok(RegularizedRun {
            solutions: self.solutions,
            delay,
            space,
            stats,
        })
    }
}

impl<M: SnapshotMachine> Engine<M> {
    /// Snapshot simulation `at` into the owner of the next zone. The copy's
    /// block counter is seeded to `2^(i-1)`, the block count at the spawn
    /// step.
    fn spawn_from(&mut self, at: usize) -> Result<(), AmortizeError> {
        let index = self.sims[at].zone_index + 1;
        let (machine, copied) = self.sims[at].machine.snapshot(self.snapshot_mode)?;
        self.ledger.record_snapshot(copied);
        let tracker = if index == 1 {
            // Born at rebased step 0, before any block has completed.
            ZoneTracker::fresh(1, self.p, self.offset, false)
        } else {
            ZoneTracker::seeded(index, self.p, self.offset, index as u32 - 2)
        };
        let sim = Sim::new(machine, tracker);
        self.total_cells += sim.cells_cache;
        self.total_lazy += sim.lazy_cache as u64;
        self.sims.push(sim);
        self.record_sim_created();
        let last = self.sims.len() - 1;
        self.refresh_space(last);
        Ok(())
    }
}

fn ceil_log2(v: u64) -> u32 {
    debug_assert!(v >= 1);
    64 - (v - 1).leading_zeros()
}

fn validated_p(cfg: &RegularizerConfig) -> Result<u64, AmortizeError> {
    if cfg.incremental_delay == 0 {
        return Err(AmortizeError::InvalidConfig("incremental delay must be positive"));
    }
    if cfg.incremental_delay > 1 << 20 {
        return Err(AmortizeError::InvalidConfig("incremental delay too large"));
    }
    Ok(cfg.incremental_delay)
}

fn build_static<M, F>(
    mut factory: F,
    cfg: &RegularizerConfig,
    open_last_zone: bool,
    budget_exponent: u32,
) -> Result<Engine<M>, AmortizeError>
where
    M: Machine,
    F: FnMut() -> M,
{
    let p = validated_p(cfg)?;
    let bound = cfg
        .solution_count_bound
        .ok_or(AmortizeError::MissingSolutionBound)?;
    if bound == 0 {
        return Err(AmortizeError::InvalidConfig("solution bound must be positive"));
    }
    let n_zones = ceil_log2(bound) as usize; // N
    if n_zones > 40 {
        return Err(AmortizeError::InvalidConfig("solution bound too large"));
    }
    let mut engine = Engine {
        sims: Vec::with_capacity(n_zones + 1),
        ledger: Ledger::new(),
        solutions: Vec::new(),
        p,
        offset: 0,
        budget_exponent,
        horizon: None,
        solution_bound: Some(bound),
        check_progress: budget_exponent == 0,
        dynamic: false,
        retire: false,
        snapshot_mode: cfg.snapshot_mode,
        total_cells: 0,
        total_lazy: 0,
        total_emitted: 0,
    };
    for _ in 0..=n_zones {
        let sim = Sim::new(factory(), ZoneTracker::fresh(0, p, 0, false));
        engine.total_cells += sim.cells_cache;
        engine.total_lazy += sim.lazy_cache as u64;
        engine.sims.push(sim);
        engine.record_sim_created();
    }
    if cfg.preprocess_to_first {
        engine.preprocess()?;
    }
    // Attach the real trackers once the rebase offset is known.
    let offset = engine.offset;
    for (i, sim) in engine.sims.iter_mut().enumerate() {
        let open = open_last_zone && i == n_zones;
        sim.tracker = ZoneTracker::fresh(i, p, offset, open);
        sim.zone_index = i;
    }
    if !open_last_zone {
        engine.horizon = Some(offset + (1u64 << n_zones) * p);
    }
    Ok(engine)
}

/// Geometric amortization with a known bound `S` on the solution count
/// (`cfg.solution_count_bound`): `ceil(log2 S) + 1` simulations, gap at most
/// `2p (ceil(log2 S) + 1)` moves.
///
/// The factory must restart the same computation from scratch; every
/// simulation replays it independently.
pub fn geometric_regularize<M, F>(
    factory: F,
    cfg: &RegularizerConfig,
) -> Result<RegularizedRun<M::Solution>, AmortizeError>
where
    M: Machine,
    F: FnMut() -> M,
{
    let mut engine = build_static(factory, cfg, false, 0)?;
    engine.drive(None)?;
    // Every zone must be fully swept: a simulation that stopped mid-zone
    // without finishing its computation would have skipped solutions.
    for sim in &engine.sims {
        if !sim.machine.is_done() && !sim.tracker.past_zone() {
            let (lo, hi) = zone_bounds(sim.zone_index, engine.p, engine.offset);
            return Err(AmortizeError::ProgressInvariantBroken {
                detail: format!(
                    "simulation {} stopped at step {} inside its zone [{lo}, {hi}]",
                    sim.zone_index,
                    sim.machine.steps_taken()
                ),
            });
        }
    }
    // Bound and horizon violations are checked live at every solution event,
    // so if some simulation saw the computation through, the whole schedule
    // was vetted. Otherwise (only possible when the declared bounds are
    // wrong) drive the deepest simulation to completion as a verification
    // tail; gaps are unaffected since no further solution is emitted.
    if !engine.sims.iter().any(|s| s.machine.is_done()) {
        let deepest = (0..engine.sims.len())
            .max_by_key(|&i| engine.sims[i].machine.steps_taken())
            .expect("at least one simulation");
        let bound = engine.solution_bound;
        let horizon = engine.horizon;
        while !engine.sims[deepest].machine.is_done() {
            let sol = engine.sims[deepest].machine.step()?;
            engine.ledger.record_move();
            if sol.is_some() {
                engine.sims[deepest].seen += 1;
                let steps = engine.sims[deepest].machine.steps_taken();
                if let Some(b) = bound {
                    if engine.sims[deepest].seen > b {
                        return Err(AmortizeError::SolutionBoundExceeded {
                            bound: b,
                            seen: engine.sims[deepest].seen,
                        });
                    }
                }
                if let Some(h) = horizon {
                    if steps > h {
                        return Err(AmortizeError::CoverageMissed { step: steps, horizon: h });
                    }
                }
            }
        }
    }
    engine.finish()
}

/// The polynomial-budget variant: regularizes machines with incremental
/// time `t^(a+1) p` by budgeting `S^a (a+1) 2p` moves per visit, where `S`
/// counts emitted solutions. With `a = 0` this is exactly
/// [`geometric_regularize`]. The last zone is open-ended upward, so the
/// simulation count stays `ceil(log2 S) + 1` while the covered horizon
/// follows the machine to completion.
pub fn usualinc_regularize<M, F>(
    factory: F,
    cfg: &RegularizerConfig,
) -> Result<RegularizedRun<M::Solution>, AmortizeError>
where
    M: Machine,
    F: FnMut() -> M,
{
    let mut engine = build_static(factory, cfg, true, cfg.exponent_a)?;
    engine.drive(None)?;
    for sim in &engine.sims {
        let covered = if sim.tracker.open_ended {
            sim.machine.is_done()
        } else {
            sim.machine.is_done() || sim.tracker.past_zone()
        };
        if !covered {
            return Err(AmortizeError::ProgressInvariantBroken {
                detail: format!(
                    "simulation {} stopped at step {} before covering its zone",
                    sim.zone_index,
                    sim.machine.steps_taken()
                ),
            });
        }
    }
    engine.finish()
}

/// Dynamic geometric amortization: no solution bound required.
///
/// Starts with one simulation and its snapshot; thereafter the newest
/// simulation is snapshotted exactly when it arrives one step before its own
/// zone (rebased step `2^(i-1) p`), the point where the next zone's owner
/// must branch off. A simulation that has already finished spawns nothing.
/// With `cfg.retire_machines`, simulations are dropped as soon as they leave
/// their zones, bounding total moves by twice the solo total.
pub fn geometric_regularize_dynamic<M, F>(
    mut factory: F,
    cfg: &RegularizerConfig,
) -> Result<RegularizedRun<M::Solution>, AmortizeError>
where
    M: SnapshotMachine,
    F: FnMut() -> M,
{
    let p = validated_p(cfg)?;
    let mut engine = Engine {
        sims: Vec::new(),
        ledger: Ledger::new(),
        solutions: Vec::new(),
        p,
        offset: 0,
        budget_exponent: 0,
        horizon: None,
        solution_bound: None,
        check_progress: false,
        dynamic: true,
        retire: cfg.retire_machines,
        snapshot_mode: cfg.snapshot_mode,
        total_cells: 0,
        total_lazy: 0,
        total_emitted: 0,
    };
    let first = Sim::new(factory(), ZoneTracker::fresh(0, p, 0, false));
    engine.total_cells += first.cells_cache;
    engine.total_lazy += first.lazy_cache as u64;
    engine.sims.push(first);
    engine.record_sim_created();
    if cfg.preprocess_to_first {
        engine.preprocess()?;
        let offset = engine.offset;
        engine.sims[0].tracker = ZoneTracker::fresh(0, p, offset, false);
    }
    // The zone-1 owner branches off at load time: index 0 has no step one
    // before its zone.
    engine.spawn_from(0)?;
    engine.drive(Some(Engine::spawn_from))?;
    engine.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amortizers::run_solo;
    use crate::machine::fixtures::{FixtureMachine, FixtureSpec};
    use proptest::prelude::*;

    fn sorted(mut v: Vec<u64>) -> Vec<u64> {
        v.sort_unstable();
        v
    }

    /// The Gray-counter zone test against the direct interval arithmetic it
    /// replaces: membership, arming one step before entry, exit on the last
    /// in-zone step.
    #[test]
    fn zone_tracker_matches_interval_arithmetic() {
        for index in 0usize..=6 {
            for p in [1u64, 3, 5] {
                for offset in [0u64, 7] {
                    let mut tracker = ZoneTracker::fresh(index, p, offset, false);
                    let (lo, hi) = zone_bounds(index, p, offset);
                    let horizon = hi + 2 * p + 3;
                    for steps in 1..=horizon {
                        let (in_zone, event) = tracker.on_move(steps);
                        assert_eq!(
                            in_zone,
                            steps >= lo && steps <= hi,
                            "index {index} p {p} offset {offset} steps {steps}"
                        );
                        let expect_armed = index > 0 && steps == lo - 1 && steps > offset;
                        assert_eq!(
                            event == ZoneEvent::Armed,
                            expect_armed,
                            "arming at {steps} (zone [{lo},{hi}])"
                        );
                        assert_eq!(
                            event == ZoneEvent::Exited,
                            steps == hi,
                            "exit at {steps} (zone [{lo},{hi}])"
                        );
                    }
                }
            }
        }
    }

    /// Seeded trackers (the dynamic variant's copies) continue exactly where
    /// an always-driven tracker of the same zone would be.
    #[test]
    fn seeded_tracker_matches_a_driven_one() {
        for index in 2usize..=5 {
            for p in [1u64, 4] {
                let born_at = (1u64 << (index - 2)) * p;
                let mut driven = ZoneTracker::fresh(index, p, 0, false);
                for steps in 1..=born_at {
                    driven.on_move(steps);
                }
                let mut seeded = ZoneTracker::seeded(index, p, 0, index as u32 - 2);
                let (lo, hi) = zone_bounds(index, p, 0);
                for steps in born_at + 1..=hi + p {
                    let a = driven.on_move(steps);
                    let b = seeded.on_move(steps);
                    assert_eq!(a, b, "index {index} p {p} steps {steps}");
                    assert_eq!(a.0, steps >= lo && steps <= hi);
                }
            }
        }
    }

    fn fixture_factory(spec: &FixtureSpec) -> impl FnMut() -> FixtureMachine + '_ {
        move || spec.machine().unwrap()
    }

    #[test]
    fn zones_partition_the_horizon() {
        for p in [1u64, 3, 16] {
            for n in 1usize..=20 {
                let mut expect_lo = 1;
                for i in 0..=n {
                    let (lo, hi) = zone_bounds(i, p, 0);
                    assert_eq!(lo, expect_lo, "zone {i} start, p={p} n={n}");
                    assert!(hi >= lo);
                    expect_lo = hi + 1;
                }
                assert_eq!(expect_lo, (1u64 << n) * p + 1, "union is [1, 2^N p]");
            }
        }
    }

    #[test]
    fn uniform_8_uses_four_simulations_over_the_expected_zones() {
        assert_eq!(zone_bounds(0, 1, 0), (1, 1));
        assert_eq!(zone_bounds(1, 1, 0), (2, 2));
        assert_eq!(zone_bounds(2, 1, 0), (3, 4));
        assert_eq!(zone_bounds(3, 1, 0), (5, 8));
        let spec = FixtureSpec::Uniform { solutions: 8, spacing: 1 };
        let cfg = RegularizerConfig::with_p(1).solution_bound(8);
        let run = geometric_regularize(fixture_factory(&spec), &cfg).unwrap();
        assert_eq!(sorted(run.solutions.clone()), (1..=8).collect::<Vec<u64>>());
        assert_eq!(run.space.peak_live_simulations, 4);
        assert!(run.delay.max_gap <= 2 * 4, "gap {}", run.delay.max_gap);
    }

    #[test]
    fn single_solution_bound_behaves_as_pass_through() {
        let spec = FixtureSpec::Uniform { solutions: 1, spacing: 3 };
        let cfg = RegularizerConfig::with_p(3).solution_bound(1);
        let run = geometric_regularize(fixture_factory(&spec), &cfg).unwrap();
        assert_eq!(run.solutions, vec![1]);
        assert_eq!(run.space.peak_live_simulations, 1);
        assert_eq!(run.stats.simulations_created, 1);
    }

    #[test]
    fn bursty_8_3_with_bound_16_stays_under_the_gap_bound() {
        let spec = FixtureSpec::Bursty { solutions: 8, stretch: 3 };
        let cfg = RegularizerConfig::with_p(4).solution_bound(16);
        let run = geometric_regularize(fixture_factory(&spec), &cfg).unwrap();
        let solo = run_solo(spec.machine().unwrap()).unwrap();
        assert_eq!(sorted(run.solutions.clone()), sorted(solo.solutions));
        // N = 4, so gaps stay within 2 * 4 * (4 + 1) = 40 moves.
        assert!(run.delay.max_gap <= 40, "gap {}", run.delay.max_gap);
        assert_eq!(run.space.peak_live_simulations, 5);
        assert!(run.stats.invariant_checks > 0);
    }

    #[test]
    fn overshooting_the_bound_only_costs_simulations() {
        let spec = FixtureSpec::Uniform { solutions: 5, spacing: 2 };
        let cfg = RegularizerConfig::with_p(2).solution_bound(4096);
        let run = geometric_regularize(fixture_factory(&spec), &cfg).unwrap();
        assert_eq!(sorted(run.solutions.clone()), (1..=5).collect::<Vec<u64>>());
        assert_eq!(run.space.peak_live_simulations, 13);
    }

    #[test]
    fn understated_solution_bound_is_detected() {
        let spec = FixtureSpec::Uniform { solutions: 8, spacing: 1 };
        let cfg = RegularizerConfig::with_p(1).solution_bound(4);
        let err = geometric_regularize(fixture_factory(&spec), &cfg).unwrap_err();
        assert!(
            matches!(err, AmortizeError::SolutionBoundExceeded { bound: 4, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn solution_past_the_horizon_is_a_coverage_error() {
        // Three solutions fit the bound, but the last lands at step 100,
        // far beyond the covered horizon 2^2 * 1 = 4.
        let spec = FixtureSpec::Adversary { solutions: 2, total: 100 };
        let cfg = RegularizerConfig::with_p(1).solution_bound(4);
        let err = geometric_regularize(fixture_factory(&spec), &cfg).unwrap_err();
        assert!(
            matches!(err, AmortizeError::CoverageMissed { step: 100, horizon: 4 }),
            "{err:?}"
        );
    }

    #[test]
    fn preprocessing_rebases_zones_past_the_first_solution() {
        // First solution at step 50, then unit gaps: incremental delay after
        // the first emission is 1, but plain zones with p=1 cannot reach
        // step 50.
        let spec = FixtureSpec::Scripted { gaps: vec![50, 1, 1, 1] };
        let plain = RegularizerConfig::with_p(1).solution_bound(4);
        assert!(geometric_regularize(fixture_factory(&spec), &plain).is_err());
        let cfg = RegularizerConfig::with_p(1).solution_bound(4).preprocess(true);
        let run = geometric_regularize(fixture_factory(&spec), &cfg).unwrap();
        assert_eq!(sorted(run.solutions.clone()), vec![1, 2, 3, 4]);
        // All three simulations fast-forward through the 50-step prefix.
        assert_eq!(run.delay.preprocessing, 150);
        // Gaps past the preprocessing mark obey the rebased bound.
        assert!(run.delay.max_gap <= 2 * 1 * 3, "gap {}", run.delay.max_gap);
    }

    #[test]
    fn dynamic_uniform_8_spawns_four_simulations() {
        let spec = FixtureSpec::Uniform { solutions: 8, spacing: 1 };
        let cfg = RegularizerConfig::with_p(1);
        let run = geometric_regularize_dynamic(fixture_factory(&spec), &cfg).unwrap();
        assert_eq!(sorted(run.solutions.clone()), (1..=8).collect::<Vec<u64>>());
        // Initial simulation plus four spawns; final list length - 1 is
        // 1 + log2(8).
        assert_eq!(run.stats.simulations_created, 5);
        assert_eq!(run.stats.final_simulations, 5);
        assert_eq!(run.stats.snapshots_taken, 4);
    }

    #[test]
    fn dynamic_single_solution_spawns_only_the_bootstrap_copy() {
        let spec = FixtureSpec::Scripted { gaps: vec![3] };
        let cfg = RegularizerConfig::with_p(4);
        let run = geometric_regularize_dynamic(fixture_factory(&spec), &cfg).unwrap();
        assert_eq!(run.solutions, vec![1]);
        assert_eq!(run.stats.simulations_created, 2);
        assert_eq!(run.stats.final_simulations, 2);
    }

    #[test]
    fn dynamic_matches_solo_multiset_with_and_without_retirement() {
        for retire in [false, true] {
            let spec = FixtureSpec::Bursty { solutions: 16, stretch: 4 };
            let cfg = RegularizerConfig::with_p(5).retire(retire);
            let run = geometric_regularize_dynamic(fixture_factory(&spec), &cfg).unwrap();
            let solo = run_solo(spec.machine().unwrap()).unwrap();
            assert_eq!(sorted(run.solutions.clone()), sorted(solo.solutions));
        }
    }

    #[test]
    fn retirement_keeps_gaps_within_the_live_sweep_size() {
        // Dropping exhausted simulations must not push extra budgets onto
        // the survivors: gaps stay within 2p moves per live simulation.
        let spec = FixtureSpec::Adversary { solutions: 32, total: 900 };
        let base = run_solo(spec.machine().unwrap()).unwrap();
        let sup = base.delay.incremental_sup.unwrap();
        let p = sup.num.div_ceil(sup.den);
        for retire in [false, true] {
            let cfg = RegularizerConfig::with_p(p).retire(retire);
            let run = geometric_regularize_dynamic(fixture_factory(&spec), &cfg).unwrap();
            // A gap window visits each simulation alive or born within it at
            // most once per sweep, so simulations_created bounds the sweep
            // width whatever the retirement schedule does.
            let bound = 2 * p * run.stats.simulations_created;
            assert!(
                run.delay.max_gap <= bound,
                "retire={retire}: gap {} > {bound}",
                run.delay.max_gap
            );
        }
    }

    #[test]
    fn retirement_bounds_total_moves_by_twice_the_solo_run() {
        let spec = FixtureSpec::Bursty { solutions: 64, stretch: 7 };
        let p = 8;
        let cfg = RegularizerConfig::with_p(p).retire(true);
        let run = geometric_regularize_dynamic(fixture_factory(&spec), &cfg).unwrap();
        let solo = run_solo(spec.machine().unwrap()).unwrap();
        assert_eq!(sorted(run.solutions.clone()), sorted(solo.solutions.clone()));
        assert!(
            run.stats.total_moves <= 2 * solo.stats.total_moves + 4 * p,
            "{} moves vs solo {}",
            run.stats.total_moves,
            solo.stats.total_moves
        );
    }

    #[test]
    fn usualinc_with_exponent_zero_matches_geometric() {
        let spec = FixtureSpec::Bursty { solutions: 8, stretch: 3 };
        let cfg = RegularizerConfig::with_p(4).solution_bound(16);
        let geo = geometric_regularize(fixture_factory(&spec), &cfg).unwrap();
        let usual = usualinc_regularize(fixture_factory(&spec), &cfg).unwrap();
        assert_eq!(geo.solutions, usual.solutions);
        assert_eq!(geo.delay.gaps, usual.delay.gaps);
    }

    #[test]
    fn usualinc_covers_quadratic_incremental_time() {
        // Emissions at steps p, 3p, 6p, 10p, ...: incremental time
        // t(t+1)/2 * p <= t^2 p, so exponent a = 1 applies.
        let p = 2u64;
        let gaps: Vec<u64> = (1..=10).map(|t| t * p).collect();
        let spec = FixtureSpec::Scripted { gaps };
        let cfg = RegularizerConfig::with_p(p).solution_bound(10).exponent(1);
        let run = usualinc_regularize(fixture_factory(&spec), &cfg).unwrap();
        assert_eq!(sorted(run.solutions.clone()), (1..=10).collect::<Vec<u64>>());
    }

    #[test]
    fn usualinc_per_gap_budget_shape() {
        // Gap before the (S+1)-th emission stays within
        // S^a (a+1) 2p (N+1) moves for a = 1.
        let spec = FixtureSpec::Uniform { solutions: 8, spacing: 1 };
        let cfg = RegularizerConfig::with_p(1).solution_bound(8).exponent(1);
        let run = usualinc_regularize(fixture_factory(&spec), &cfg).unwrap();
        assert_eq!(run.solutions.len(), 8);
        let n_plus_1 = 4u64; // ceil(log2 8) + 1
        for (i, &gap) in run.delay.gaps.iter().enumerate() {
            let s = i as u64; // solutions emitted before this gap closes
            let budget = s.max(1) * 2 * 2 * 1; // max(2p, S^a (a+1) 2p)
            assert!(
                gap <= budget * n_plus_1,
                "gap {gap} before emission {} exceeds {}",
                i + 1,
                budget * n_plus_1
            );
        }
    }

    #[test]
    fn missing_bound_is_rejected() {
        let spec = FixtureSpec::Uniform { solutions: 4, spacing: 1 };
        let err = geometric_regularize(fixture_factory(&spec), &RegularizerConfig::with_p(1))
            .unwrap_err();
        assert_eq!(err, AmortizeError::MissingSolutionBound);
    }

    proptest! {
        /// Any emission schedule, regularized with a valid delay bound,
        /// comes back as the same multiset under both geometric variants.
        #[test]
        fn random_schedules_preserve_the_multiset(
            gaps in proptest::collection::vec(1u64..=12, 1..60),
            retire in proptest::bool::ANY,
        ) {
            let spec = FixtureSpec::Scripted { gaps };
            let base = run_solo(spec.machine().unwrap()).unwrap();
            let p = base
                .delay
                .incremental_sup
                .map(|r| r.num.div_ceil(r.den))
                .unwrap()
                .max(1);
            let expected = sorted(base.solutions.clone());
            let cfg = RegularizerConfig::with_p(p).solution_bound(base.solutions.len() as u64);
            let geo = geometric_regularize(fixture_factory(&spec), &cfg).unwrap();
            prop_assert_eq!(sorted(geo.solutions), expected.clone());
            let dyn_cfg = RegularizerConfig::with_p(p).retire(retire);
            let dynamic = geometric_regularize_dynamic(fixture_factory(&spec), &dyn_cfg).unwrap();
            prop_assert_eq!(sorted(dynamic.solutions), expected);
        }
    }
}
