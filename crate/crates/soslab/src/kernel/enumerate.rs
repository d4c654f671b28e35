//! Exhaustive schedule exploration at desk scale.
//!
//! Depth-first search over enabled decisions in canonical order, with
//! state-fingerprint deduplication: two interleavings that reach the same
//! simulator state continue from a single representative, so commuting
//! deliveries do not multiply the tree. Every quiescence point (no enabled
//! decision left) is finalized and yields one run.

use std::collections::HashSet;

use thiserror::Error;

use super::{Behavior, CrashRule, KernelError, RunResult, RunState};
use crate::sos::ValueId;

#[derive(Debug, Clone)]
pub struct EnumerateOptions {
    /// Maximum number of distinct states to expand before giving up.
    pub max_states: usize,
    /// Crash decisions to explore (subject to the run's crash bound).
    pub crashes: CrashRule,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        Self {
            max_states: 1_000_000,
            crashes: CrashRule::None,
        }
    }
}

#[derive(Debug, Error)]
pub enum EnumerateError {
    #[error("exploration budget exceeded ({limit} states)")]
    BudgetExceeded { limit: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

struct Explorer<'a, B: Behavior, F: FnMut(&RunResult)> {
    opts: &'a EnumerateOptions,
    visited: HashSet<u128>,
    expanded: usize,
    visit: F,
    _marker: std::marker::PhantomData<B>,
}

impl<B: Behavior, F: FnMut(&RunResult)> Explorer<'_, B, F> {
    fn explore(&mut self, state: RunState<B>) -> Result<(), EnumerateError> {
        self.expanded += 1;
        if self.expanded > self.opts.max_states {
            return Err(EnumerateError::BudgetExceeded {
                limit: self.opts.max_states,
            });
        }
        let candidates = state.enabled_decisions(&self.opts.crashes);
        if candidates.is_empty() {
            let result = state.into_result()?;
            (self.visit)(&result);
            return Ok(());
        }
        for d in &candidates {
            let mut child = state.clone();
            child.step(d)?;
            if self.visited.insert(child.fingerprint()) {
                self.explore(child)?;
            }
        }
        Ok(())
    }
}

/// Explores every schedule of `behaviors` up to the budget, calling `visit`
/// once per maximal run (in canonical order of the decision sequences that
/// first reach each quiescence point).
pub fn enumerate_with<B: Behavior, F: FnMut(&RunResult)>(
    behaviors: &[B],
    t: u32,
    inputs: &[Option<ValueId>],
    opts: &EnumerateOptions,
    visit: F,
) -> Result<(), EnumerateError> {
    let root = RunState::new(behaviors.to_vec(), t, inputs)?;
    let mut explorer = Explorer {
        opts,
        visited: HashSet::new(),
        expanded: 0,
        visit,
        _marker: std::marker::PhantomData,
    };
    explorer.visited.insert(root.fingerprint());
    explorer.explore(root)
}

/// Like [`enumerate_with`], collecting the runs.
pub fn enumerate_runs<B: Behavior>(
    behaviors: &[B],
    t: u32,
    inputs: &[Option<ValueId>],
    opts: &EnumerateOptions,
) -> Result<Vec<RunResult>, EnumerateError> {
    let mut runs = Vec::new();
    enumerate_with(behaviors, t, inputs, opts, |r| runs.push(r.clone()))?;
    Ok(runs)
}
