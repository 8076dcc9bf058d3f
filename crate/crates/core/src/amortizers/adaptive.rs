//! Adaptive amortization: regularize without knowing the incremental delay.
//!
//! The pull condition amplifies the locally observed incremental delay: a
//! solution leaves the queue once `j >= C_eps * ceil((T / (S+1))^(1+eps))`,
//! where `j` counts moves since the last pull, `T` the total moves, `S` the
//! solutions found so far, and `C_eps = ceil(1 / (1 - 2^-eps))`. Since
//! `T / (S+1)` never exceeds the machine's true incremental delay `p`, gaps
//! stay within `C_eps (p^(1+eps) + 1)` moves, and a counting argument shows
//! the queue is never empty when pulled.
//!
//! The `Mbit` mode replaces the threshold comparison by the inequality
//! `k_j >= k_eps + 1 + (1+eps)(k_M + 1 - k_S)` over the most significant
//! bits of Gray-code counters for `j`, `T` and `S`, which pulls no earlier
//! than the exact test and at most a `2 * 4^(1+eps)` factor later.

use std::collections::VecDeque;

use super::{AmortizeError, ArithmeticMode, RegularizedRun, RegularizerConfig};
use crate::gray_counter::GrayCounter;
use crate::machine::Machine;
use crate::metrics::{Ledger, Ratio};

/// `C_eps = ceil(1 / (1 - 2^-eps))`: the smallest `c` with
/// `(c-1)^d * 2^n >= c^d` for `eps = n/d`.
pub fn c_epsilon(epsilon: Ratio) -> Result<u64, AmortizeError> {
    let (n, d) = (epsilon.num as u32, epsilon.den as u32);
    if n == 0 {
        return Err(AmortizeError::InvalidConfig("epsilon must be positive"));
    }
    if d > 8 || n > 64 * d {
        return Err(AmortizeError::InvalidConfig(
            "epsilon must be a rational in (0, 64] with denominator at most 8",
        ));
    }
    let mut c = 1u128;
    loop {
        c += 1;
        let lhs = (c - 1)
            .checked_pow(d)
            .and_then(|v| v.checked_mul(1u128 << n.min(127)));
        let rhs = c.checked_pow(d);
        match (lhs, rhs) {
            (Some(l), Some(r)) if l >= r => return Ok(c as u64),
            (Some(_), Some(_)) => continue,
            // C_eps <= 1/(1 - 2^(-1/8)) + 1 < 14 for the accepted range, so
            // the search converges long before overflow.
            _ => return Err(AmortizeError::InvalidConfig("epsilon out of range")),
        }
    }
}

/// Smallest `m` with `m >= (t/q)^(1+eps)`, i.e. `m^d * q^(n+d) >= t^(n+d)`.
/// `None` when the intermediate powers leave u128 range.
fn ceil_pow_ratio(t: u64, q: u64, epsilon: Ratio) -> Option<u64> {
    let (n, d) = (epsilon.num as u32, epsilon.den as u32);
    let k = n + d;
    let t_k = (t as u128).checked_pow(k)?;
    let q_k = (q as u128).checked_pow(k)?;
    let holds = |m: u128| -> Option<bool> {
        let md = m.checked_pow(d)?;
        Some(md.checked_mul(q_k).is_none_or(|v| v >= t_k))
    };
    let mut hi = 1u128;
    while !holds(hi)? {
        hi = hi.checked_mul(2)?;
    }
    let mut lo = 0u128;
    while lo < hi {
        let mid = (lo + hi) / 2;
        if holds(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    u64::try_from(lo).ok()
}

pub fn adaptive_regularize<M: Machine>(
    mut machine: M,
    cfg: &RegularizerConfig,
) -> Result<RegularizedRun<M::Solution>, AmortizeError> {
    let c_eps = c_epsilon(cfg.epsilon)?;
    let k_eps = 63 - c_eps.leading_zeros() as i128;
    let (n, d) = (cfg.epsilon.num as i128, cfg.epsilon.den as i128);

    let mut ledger = Ledger::new();
    ledger.record_simulation_created();
    ledger.record_live_simulations(1);
    let mut queue: VecDeque<M::Solution> = VecDeque::new();
    let mut solutions = Vec::new();
    let mut found = 0u64; // S: solutions found by the simulation
    let mut since_pull = 0u64; // j

    // Mbit-mode counters; j's counter is replaced on every reset.
    let mut steps_counter = GrayCounter::new();
    let mut found_counter = GrayCounter::new();
    let mut j_counter = GrayCounter::new();

    while !machine.is_done() {
        since_pull += 1;
        let sol = machine.step()?;
        ledger.record_move();
        ledger.record_register_cells(machine.state_cells());
        if cfg.arithmetic_mode == ArithmeticMode::Mbit {
            steps_counter.inc();
            j_counter.inc();
        }
        if let Some(s) = sol {
            queue.push_back(s);
            ledger.record_queue_len(queue.len() as u64);
            found += 1;
            if cfg.arithmetic_mode == ArithmeticMode::Mbit {
                found_counter.inc();
            }
        }
        let pull = match cfg.arithmetic_mode {
            ArithmeticMode::Exact => {
                let threshold = ceil_pow_ratio(ledger.moves(), found + 1, cfg.epsilon)
                    .and_then(|m| m.checked_mul(c_eps))
                    .unwrap_or(u64::MAX);
                since_pull >= threshold
            }
            ArithmeticMode::Mbit => {
                let k_j = j_counter.mbit().map(|k| k as i128);
                let k_m = steps_counter.mbit().expect("at least one move") as i128;
                let k_s = found_counter.mbit().map_or(0, |k| k as i128);
                match k_j {
                    None => false,
                    // k_j >= k_eps + 1 + (1+eps)(k_M + 1 - k_S), scaled by d.
                    Some(k_j) => d * k_j >= d * (k_eps + 1) + (d + n) * (k_m + 1 - k_s),
                }
            }
        };
        if pull {
            match queue.pop_front() {
                Some(s) => {
                    solutions.push(s);
                    ledger.record_emit();
                }
                None => {
                    if !machine.is_done() {
                        return Err(AmortizeError::QueueInvariantBroken {
                            step: ledger.moves(),
                        });
                    }
                }
            }
            since_pull = 0;
            if cfg.arithmetic_mode == ArithmeticMode::Mbit {
                j_counter = GrayCounter::new();
            }
        }
    }
    while let Some(s) = queue.pop_front() {
        solutions.push(s);
        ledger.record_emit();
    }
    ledger.set_final_simulations(1);
    ledger.mark_finished();
    let (delay, space, stats) = ledger.finalize()?;
    Ok(RegularizedRun {
        solutions,
        delay,
        space,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amortizers::run_solo;
    use crate::machine::fixtures::FixtureSpec;

    #[test]
    fn c_epsilon_values() {
        assert_eq!(c_epsilon(Ratio::new(1, 1)).unwrap(), 2);
        // ceil(1 / (1 - 2^-0.5)) = ceil(3.414...) = 4
        assert_eq!(c_epsilon(Ratio::new(1, 2)).unwrap(), 4);
        assert_eq!(c_epsilon(Ratio::new(2, 1)).unwrap(), 2);
        assert_eq!(c_epsilon(Ratio::new(1, 4)).unwrap(), 7);
        assert!(c_epsilon(Ratio::new(0, 1)).is_err());
    }

    #[test]
    fn ceil_pow_ratio_matches_direct_computation() {
        // eps = 1: ceil((t/q)^2)
        for t in 1u64..60 {
            for q in 1u64..10 {
                let want = (t * t + q * q - 1) / (q * q);
                assert_eq!(ceil_pow_ratio(t, q, Ratio::new(1, 1)), Some(want));
            }
        }
        // eps = 1/2: m = ceil((t/q)^(3/2)), check by predicate
        let m = ceil_pow_ratio(27, 3, Ratio::new(1, 2)).unwrap();
        assert_eq!(m, 27); // (27/3)^1.5 = 27
        let m = ceil_pow_ratio(10, 1, Ratio::new(1, 2)).unwrap();
        assert_eq!(m, 32); // 10^1.5 = 31.62...
    }

    /// Reference transliteration of the adaptive loop, kept independent of
    /// the production code paths (no ledger, no configs).
    fn reference_adaptive(schedule: &[u64], epsilon: (u64, u64)) -> Vec<(u64, u64)> {
        let c_eps = c_epsilon(Ratio::new(epsilon.0, epsilon.1)).unwrap();
        let total = *schedule.last().unwrap();
        let mut queue: VecDeque<u64> = VecDeque::new();
        let mut out = Vec::new();
        let mut next = 0usize;
        let mut found = 0u64;
        let mut j = 0u64;
        for t in 1..=total {
            j += 1;
            if next < schedule.len() && schedule[next] == t {
                next += 1;
                found += 1;
                queue.push_back(found);
            }
            let thr = c_eps * ceil_pow_ratio(t, found + 1, Ratio::new(epsilon.0, epsilon.1)).unwrap();
            if j >= thr {
                let s = queue.pop_front().expect("reference pull on empty queue");
                out.push((t, s));
                j = 0;
            }
        }
        for s in queue {
            out.push((total, s));
        }
        out
    }

    #[test]
    fn exact_mode_matches_reference_trace_on_adversary() {
        let spec = FixtureSpec::Adversary {
            solutions: 4,
            total: 100,
        };
        let run = adaptive_regularize(spec.machine().unwrap(), &RegularizerConfig::default())
            .unwrap();
        assert_eq!(run.solutions, vec![1, 2, 3, 4, 5]);
        let reference = reference_adaptive(&spec.emission_steps(), (1, 1));
        assert_eq!(
            run.solutions,
            reference.iter().map(|&(_, s)| s).collect::<Vec<_>>()
        );
        // Emission move indices must agree with the reference run.
        let mut at = Vec::new();
        let mut acc = run.delay.preprocessing;
        for g in &run.delay.gaps {
            acc += g;
            at.push(acc);
        }
        assert_eq!(at, reference.iter().map(|&(t, _)| t).collect::<Vec<_>>());
    }

    #[test]
    fn exact_mode_gap_is_bounded_by_c_eps_p_squared() {
        for spec in [
            FixtureSpec::Bursty {
                solutions: 16,
                stretch: 5,
            },
            FixtureSpec::Uniform {
                solutions: 40,
                spacing: 7,
            },
            FixtureSpec::Adversary {
                solutions: 6,
                total: 90,
            },
        ] {
            let solo = run_solo(spec.machine().unwrap()).unwrap();
            let p = solo.delay.incremental_sup.unwrap();
            let run = adaptive_regularize(spec.machine().unwrap(), &RegularizerConfig::default())
                .unwrap();
            assert_eq!(run.solutions.len(), solo.solutions.len());
            // gap <= C_eps (p^2 + 1) + 2 with C_eps = 2, evaluated exactly:
            // gap * den^2 <= 2 (num^2 + den^2) + 2 den^2
            let lhs = (run.delay.max_gap as u128) * (p.den as u128) * (p.den as u128);
            let rhs = 2 * ((p.num as u128) * (p.num as u128)
                + (p.den as u128) * (p.den as u128))
                + 2 * (p.den as u128) * (p.den as u128);
            assert!(lhs <= rhs, "{spec:?}: gap {} vs p {p}", run.delay.max_gap);
        }
    }

    #[test]
    fn mbit_mode_emits_everything_with_looser_bound() {
        let spec = FixtureSpec::Bursty {
            solutions: 32,
            stretch: 3,
        };
        let solo = run_solo(spec.machine().unwrap()).unwrap();
        let cfg = RegularizerConfig::default().mbit_arithmetic();
        let run = adaptive_regularize(spec.machine().unwrap(), &cfg).unwrap();
        assert_eq!(run.solutions, solo.solutions, "order preserved");
        // gap <= 2 * 4^2 * C_eps (p^2 + 1) for eps = 1
        let p = solo.delay.incremental_sup.unwrap();
        let lhs = (run.delay.max_gap as u128) * (p.den as u128) * (p.den as u128);
        let rhs = 64
            * ((p.num as u128) * (p.num as u128) + (p.den as u128) * (p.den as u128));
        assert!(lhs <= rhs, "gap {} vs p {p}", run.delay.max_gap);
    }

    #[test]
    fn mbit_pulls_no_earlier_than_exact() {
        let spec = FixtureSpec::Adversary {
            solutions: 8,
            total: 200,
        };
        let exact = adaptive_regularize(spec.machine().unwrap(), &RegularizerConfig::default())
            .unwrap();
        let mbit = adaptive_regularize(
            spec.machine().unwrap(),
            &RegularizerConfig::default().mbit_arithmetic(),
        )
        .unwrap();
        assert_eq!(exact.solutions, mbit.solutions);
        let first_pull = |run: &RegularizedRun<u64>| run.delay.gaps[0];
        assert!(first_pull(&mbit) >= first_pull(&exact));
    }

    #[test]
    fn adaptive_gap_grows_with_adversary_total() {
        // No fixed-delay regularizer can match the incremental delay without
        // knowing the schedule; the measured gap grows with t.
        let mut last = 0;
        for t in [50u64, 100, 200, 400] {
            let spec = FixtureSpec::Adversary {
                solutions: 3,
                total: t,
            };
            let run = adaptive_regularize(spec.machine().unwrap(), &RegularizerConfig::default())
                .unwrap();
            assert!(run.delay.max_gap >= last, "t = {t}");
            last = run.delay.max_gap;
        }
        assert!(last > 0);
    }
}
