//! The freeze/thaw/crash scheduler strategy that attacks d-disagreement
//! protocols running below the process lower bound.
//!
//! The strategy drives the target protocol in fragments. It lets processes run
//! freely, but the instant one is about to output a value outside the
//! committed set, it freezes it (schedules nothing for it). Once `t+1`
//! processes are frozen it picks the most frequent pending value, commits it,
//! and thaws its group. When only one uncommitted value remains it freezes up
//! to `t` intents for it, crashes every frozen process, and lets the run
//! finish. Against an under-provisioned protocol the crashed processes were
//! the only sources of some value, so the run ends with a strict subset of the
//! target values and at most `t` crashes: a genuine resilience
//! counterexample. Against a properly provisioned protocol the wildcard
//! processes outrun the crash budget and the attack comes home empty.
//!
//! Freezing needs no kernel hook: an output intent is itself a scheduler
//! decision, so deferring every decision of a process suspends it at the
//! instant before its output.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::kernel::{Behavior, CrashRule, Decision, KernelError, RunResult, RunState};
use crate::rng::SplitMix64;
use crate::sos::{OutputSet, ValueId};

#[derive(Debug, Error)]
pub enum AdversaryError {
    /// The target protocol blocked forever before the attack could complete;
    /// the construction assumes enough processes keep producing output
    /// intents.
    #[error("target protocol stalled; blocked processes: {blocked:?}")]
    TargetProtocolStalled { blocked: BTreeSet<ProcessIdSet> },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

type ProcessIdSet = crate::kernel::ProcessId;

/// One completed fragment: who was frozen when it ended, which value the
/// adversary committed, and the size of the thawed group.
#[derive(Debug, Clone)]
pub struct FragmentReport {
    pub index: u32,
    /// Frozen processes and their pending values at the fragment boundary.
    pub frozen: Vec<(ProcessIdSet, ValueId)>,
    /// The value committed at this boundary (absent for the final fragment).
    pub committed: Option<ValueId>,
    /// Size of the thawed group; the per-fragment counting bound applies to
    /// this when the attack succeeds.
    pub quota: usize,
}

#[derive(Debug, Clone)]
pub struct AdversaryReport {
    /// The run produced a strict subset of the target values with at most `t`
    /// crashes.
    pub violated: bool,
    pub target: OutputSet,
    pub committed: Vec<ValueId>,
    pub fragments: Vec<FragmentReport>,
    pub crash_set: BTreeSet<ProcessIdSet>,
    /// The freeze phase ran out of schedulable work before reaching its
    /// quota; the adversary fell back to crashing whatever it held.
    pub stalled_early: bool,
}

#[derive(Debug)]
pub struct AdversaryRun {
    pub report: AdversaryReport,
    pub result: RunResult,
}

/// Runs the freezing adversary against a protocol whose admissible outputs
/// are exactly `values`. Deterministic per seed; distinct seeds vary the
/// free-run interleavings.
pub fn freeze_adversary<B: Behavior>(
    behaviors: &[B],
    t: u32,
    values: &[ValueId],
    seed: u64,
) -> Result<AdversaryRun, AdversaryError> {
    let d = values.len() as u32;
    let target: OutputSet = values.iter().copied().collect();
    let inputs = vec![None; behaviors.len()];
    let mut state = RunState::new(behaviors.to_vec(), t, &inputs)?;
    let mut rng = SplitMix64::new(seed);

    let mut frozen: BTreeMap<ProcessIdSet, ValueId> = BTreeMap::new();
    let mut committed: Vec<ValueId> = Vec::new();
    let mut fragments: Vec<FragmentReport> = Vec::new();
    let mut stalled_early = false;

    'fragments: loop {
        let final_fragment = committed.len() as u32 + 1 == d;
        let quota = if final_fragment { t } else { t + 1 } as usize;

        loop {
            // Intercept any process whose next decision is an output of an
            // uncommitted value. Intents appear one per step, so the frozen
            // set grows to the quota without overshooting.
            for p in (1..=state.n()).map(crate::kernel::ProcessId) {
                if let Some(v) = state.output_intent(p) {
                    if !committed.contains(&v) && !frozen.contains_key(&p) {
                        frozen.insert(p, v);
                    }
                }
            }
            if frozen.len() >= quota {
                break;
            }
            let candidates: Vec<Decision> = state
                .enabled_decisions(&CrashRule::None)
                .into_iter()
                .filter(|dec| !frozen.contains_key(&dec.process()))
                .collect();
            if candidates.is_empty() {
                stalled_early = true;
                break 'fragments;
            }
            let pick = rng.below(candidates.len());
            state.step(&candidates[pick])?;
        }

        if final_fragment {
            break;
        }

        // Commit the most frequent pending value (ties toward the smallest)
        // and thaw its group.
        let mut counts: BTreeMap<ValueId, usize> = BTreeMap::new();
        for v in frozen.values() {
            *counts.entry(*v).or_default() += 1;
        }
        let (&w, _) = counts
            .iter()
            .max_by_key(|(v, c)| (**c, std::cmp::Reverse(**v)))
            .expect("t+1 frozen processes");
        let group: Vec<ProcessIdSet> = frozen
            .iter()
            .filter(|(_, v)| **v == w)
            .map(|(p, _)| *p)
            .collect();
        fragments.push(FragmentReport {
            index: fragments.len() as u32 + 1,
            frozen: frozen.iter().map(|(p, v)| (*p, *v)).collect(),
            committed: Some(w),
            quota: group.len(),
        });
        for p in &group {
            frozen.remove(p);
        }
        committed.push(w);
    }

    // Crash everything still frozen; the quota keeps this within the bound.
    let crash_set: BTreeSet<ProcessIdSet> = frozen.keys().copied().collect();
    fragments.push(FragmentReport {
        index: fragments.len() as u32 + 1,
        frozen: frozen.iter().map(|(p, v)| (*p, *v)).collect(),
        committed: None,
        quota: frozen.len(),
    });
    for p in &crash_set {
        state.step(&Decision::Crash(*p))?;
    }

    // Let the survivors run out. Crashed senders' leftover deliveries stay
    // suppressed here; the closure phase restores the obligatory ones.
    loop {
        let candidates: Vec<Decision> = state
            .enabled_decisions(&CrashRule::None)
            .into_iter()
            .filter(|dec| {
                !matches!(dec, Decision::Deliver { sender, .. } if state.crashed().contains(sender))
            })
            .collect();
        if candidates.is_empty() {
            break;
        }
        let pick = rng.below(candidates.len());
        state.step(&candidates[pick])?;
    }

    let result = state.into_result()?;
    if !result.quiescent {
        return Err(AdversaryError::TargetProtocolStalled {
            blocked: result.blocked.clone(),
        });
    }
    let violated = result.output_set != target
        && result.output_set.is_subset(&target)
        && result.crashed.len() as u32 <= t;
    Ok(AdversaryRun {
        report: AdversaryReport {
            violated,
            target,
            committed,
            fragments,
            crash_set,
            stalled_early,
        },
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::Alg2Config;
    use crate::sos::disagreement_lower_bound;

    fn values(d: u32) -> Vec<ValueId> {
        (1..=d).map(ValueId).collect()
    }

    fn attack_relaxed(d: u32, t: u32, seed: u64) -> AdversaryRun {
        let n = disagreement_lower_bound(d, t) - 1;
        let cfg = Alg2Config::relaxed(d, &values(d), n, t).unwrap();
        freeze_adversary(&cfg.instance().behaviors, t, &values(d), seed).unwrap()
    }

    #[test]
    fn below_bound_two_values_one_crash() {
        let run = attack_relaxed(2, 1, 0);
        assert!(run.report.violated);
        assert!(run.result.output_set.is_subset(&run.report.target));
        assert_ne!(run.result.output_set, run.report.target);
        assert!(run.result.crashed.len() <= 1);
        assert!(run.result.quiescent);
    }

    #[test]
    fn below_bound_three_values() {
        let run = attack_relaxed(3, 1, 7);
        assert!(run.report.violated);
        assert!(run.result.crashed.len() <= 1);
    }

    #[test]
    fn below_bound_larger_crash_budget() {
        let run = attack_relaxed(2, 3, 11);
        assert!(run.report.violated);
        assert!(run.result.crashed.len() <= 3);
    }

    #[test]
    fn thaw_quotas_match_counting_bound() {
        for seed in 0..20 {
            let run = attack_relaxed(3, 1, seed);
            if !run.report.violated {
                continue;
            }
            let d = 3u32;
            let t = 1u32;
            for (k, fragment) in run
                .report
                .fragments
                .iter()
                .filter(|f| f.committed.is_some())
                .enumerate()
            {
                let k = k as u32 + 1;
                let bound = ((t + 1) as f64 / (d - k + 1) as f64).ceil() as usize;
                assert!(
                    fragment.quota >= bound,
                    "fragment {k} thawed {} < bound {bound}",
                    fragment.quota
                );
            }
        }
    }

    #[test]
    fn properly_sized_protocol_defends() {
        let cfg = Alg2Config::new(2, &values(2), 3, 1).unwrap();
        let instance = cfg.instance();
        for seed in 0..100 {
            let run = freeze_adversary(&instance.behaviors, 1, &values(2), seed).unwrap();
            assert!(!run.report.violated, "seed {seed} produced a violation");
            assert_eq!(run.result.output_set, run.report.target);
        }
    }

    #[test]
    fn no_crash_budget_means_no_attack() {
        let cfg = Alg2Config::new(1, &values(1), 1, 0).unwrap();
        let run = freeze_adversary(&cfg.instance().behaviors, 0, &values(1), 3).unwrap();
        assert!(!run.report.violated);
        assert_eq!(run.result.output_set, OutputSet::new([ValueId(1)]));
    }

    #[test]
    fn adversary_run_is_replayable() {
        let run = attack_relaxed(2, 1, 5);
        let n = disagreement_lower_bound(2, 1) - 1;
        let cfg = Alg2Config::relaxed(2, &values(2), n, 1).unwrap();
        let replayed = crate::kernel::replay(&cfg.instance().behaviors, &run.result).unwrap();
        assert_eq!(replayed, run.result);
    }

    /// A target that blocks forever before producing enough output intents is
    /// reported as a stall, not as a violation.
    #[test]
    fn stalled_target_is_an_error() {
        use crate::kernel::testutil::{ConstOutput, WaitForever};
        use crate::kernel::{Behavior, Effect, ProcessView};

        #[derive(Debug, Clone, PartialEq, Eq, Hash)]
        enum Target {
            Output(ConstOutput),
            Stuck(WaitForever),
        }
        impl Behavior for Target {
            fn poll(&mut self, view: &ProcessView<'_>) -> Effect {
                match self {
                    Target::Output(c) => c.poll(view),
                    Target::Stuck(w) => w.poll(view),
                }
            }
        }
        let behaviors = vec![
            Target::Output(ConstOutput::new(ValueId(1))),
            Target::Stuck(WaitForever),
        ];
        let err = freeze_adversary(&behaviors, 1, &values(2), 0).unwrap_err();
        assert!(matches!(err, AdversaryError::TargetProtocolStalled { .. }));
    }
}
