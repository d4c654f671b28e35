//! The three reference protocols as kernel behaviors, with their canonical
//! leader/partition constructors.
//!
//! - [`Alg1Config`]: walk-following protocol implementing any connected SOS
//!   task under `t` crashes, given `n ≥ |V|·(t+1)` processes.
//! - [`Alg2Config`]: d-disagreement protocol producing exactly the values
//!   `v_1..v_d` in every run, given `n ≥ d·⌈(t+1)/2⌉ + ⌊(t+1)/2⌋`.
//! - [`Alg3Config`]: crash-free leader protocol implementing any SOS task,
//!   given `t = 0` and `n ≥ max{|o|}`.
//!
//! All selection rules are canonical-by-index: leaders are the lowest-indexed
//! processes, partition blocks take consecutive indices in canonical value
//! order, remainders join the last block. Protocols never read input values.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::kernel::{Behavior, Effect, Info, Observation, ProcessId, ProcessView, TimeoutSpec};
use crate::sos::{build_sos_graph, construct_walk, is_connected, OutputSet, Sos, SosWalk, ValueId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstantiateError {
    #[error("not enough processes: need {need}, have {have}")]
    NotEnoughProcesses { need: u32, have: u32 },
    #[error("the SOS graph is disconnected; the walk protocol needs a connected SOS")]
    DisconnectedSos,
    #[error("this protocol only tolerates t = 0, got t = {t}")]
    NonzeroT { t: u32 },
    #[error("need {d} distinct values, got {got}")]
    BadValueList { d: u32, got: usize },
}

/// A named, ready-to-run assignment of behaviors to processes.
#[derive(Debug, Clone)]
pub struct ProtocolInstance {
    pub name: String,
    pub behaviors: Vec<ProtocolBehavior>,
    /// The SOS this protocol is supposed to implement; safety checks run
    /// against it.
    pub sos: Sos,
    pub t: u32,
}

impl ProtocolInstance {
    pub fn n(&self) -> u32 {
        self.behaviors.len() as u32
    }
}

/// Behavior of one process in any of the bundled protocols.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProtocolBehavior {
    Alg1(Alg1Proc),
    Alg2Fixed(Alg2Fixed),
    Alg2Waiter(Alg2Waiter),
    Alg3(Alg3Proc),
    /// Diagnostic behavior: outputs one fixed value, then exits.
    ConstOutput { value: ValueId, phase: u8 },
}

impl Behavior for ProtocolBehavior {
    fn poll(&mut self, view: &ProcessView<'_>) -> Effect {
        match self {
            ProtocolBehavior::Alg1(p) => p.poll(view),
            ProtocolBehavior::Alg2Fixed(p) => p.poll(view),
            ProtocolBehavior::Alg2Waiter(p) => p.poll(view),
            ProtocolBehavior::Alg3(p) => p.poll(view),
            ProtocolBehavior::ConstOutput { value, phase } => match phase {
                0 => {
                    *phase = 1;
                    Effect::OutputIntent(*value)
                }
                _ => Effect::Exit,
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Walk-following protocol for connected SOS tasks
// ---------------------------------------------------------------------------

/// Instance data of the walk protocol: the covering walk, the leader group,
/// and the value partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Alg1Config {
    pub sos: Sos,
    pub walk: SosWalk,
    pub leaders: BTreeSet<ProcessId>,
    pub value_partition: BTreeMap<ValueId, BTreeSet<ProcessId>>,
    pub n: u32,
    pub t: u32,
}

impl Alg1Config {
    /// Canonical instantiation: leaders are `p1..p_{t+1}`; each value of
    /// `⋃O` (ascending) gets a block of `t+1` consecutive processes, with the
    /// remainder appended to the last block.
    pub fn new(sos: &Sos, n: u32, t: u32) -> Result<Self, InstantiateError> {
        let graph = build_sos_graph(sos);
        if !is_connected(&graph) {
            return Err(InstantiateError::DisconnectedSos);
        }
        let values: Vec<ValueId> = sos.values().into_iter().collect();
        let need = (values.len() as u32) * (t + 1);
        if n < need {
            return Err(InstantiateError::NotEnoughProcesses { need, have: n });
        }
        // Leaders must exist even for the valueless SOS {{}}.
        if n < t + 1 {
            return Err(InstantiateError::NotEnoughProcesses { need: t + 1, have: n });
        }
        let walk = construct_walk(&graph).expect("connected non-empty graph");
        let leaders: BTreeSet<ProcessId> = (1..=t + 1).map(ProcessId).collect();
        let mut value_partition = BTreeMap::new();
        for (i, v) in values.iter().enumerate() {
            let start = i as u32 * (t + 1) + 1;
            let end = if i + 1 == values.len() {
                n
            } else {
                start + t
            };
            let block: BTreeSet<ProcessId> = (start..=end).map(ProcessId).collect();
            value_partition.insert(*v, block);
        }
        Ok(Self {
            sos: sos.clone(),
            walk,
            leaders,
            value_partition,
            n,
            t,
        })
    }

    pub fn instance(&self) -> ProtocolInstance {
        let shared = Arc::new(Alg1Shared {
            walk: self.walk.steps().to_vec(),
            leaders: self.leaders.clone(),
        });
        let behaviors = (1..=self.n)
            .map(ProcessId)
            .map(|p| {
                let my_value = self
                    .value_partition
                    .iter()
                    .find(|(_, block)| block.contains(&p))
                    .map(|(v, _)| *v);
                let leader = if self.leaders.contains(&p) {
                    Alg1Leader::AtIter {
                        i: 1,
                        moved: false,
                        waiting: false,
                    }
                } else {
                    Alg1Leader::NotLeader
                };
                ProtocolBehavior::Alg1(Alg1Proc {
                    shared: shared.clone(),
                    leader,
                    out: match my_value {
                        Some(v) => Alg1Out::Watching(v),
                        None => Alg1Out::NoValue,
                    },
                })
            })
            .collect();
        ProtocolInstance {
            name: "alg1".into(),
            behaviors,
            sos: self.sos.clone(),
            t: self.t,
        }
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
struct Alg1Shared {
    walk: Vec<OutputSet>,
    leaders: BTreeSet<ProcessId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Alg1Leader {
    NotLeader,
    /// 1-based walk iteration; `moved` after communicating this iteration's
    /// MOVE (or skipping it on the last step), `waiting` once the timed wait
    /// has been entered.
    AtIter { i: usize, moved: bool, waiting: bool },
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Alg1Out {
    /// Will output this value upon observing an output set containing it.
    Watching(ValueId),
    /// Intent emitted, waiting for the release.
    Pending(ValueId),
    Finished,
    /// The SOS has no values at all; nothing to output.
    NoValue,
}

/// One process of the walk protocol. Leaders run the walk loop and then join
/// the watchers; every process watches for an output set containing its value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alg1Proc {
    shared: Arc<Alg1Shared>,
    leader: Alg1Leader,
    out: Alg1Out,
}

fn count_moves_from(log: &[Observation], iteration: u32, senders: &BTreeSet<ProcessId>) -> usize {
    senders
        .iter()
        .filter(|s| {
            log.iter()
                .any(|obs| obs.sender == **s && obs.info == Info::Move(iteration))
        })
        .count()
}

impl Alg1Proc {
    fn poll(&mut self, view: &ProcessView<'_>) -> Effect {
        loop {
            // The leader loop runs first so that the break check happens on
            // the log as of the wait resolution that unblocked it.
            if let Alg1Leader::AtIter { i, moved, waiting } = &mut self.leader {
                let walk_len = self.shared.walk.len();
                if !*moved {
                    *moved = true;
                    if *i != walk_len {
                        return Effect::Communicate(Info::Move(*i as u32 + 1));
                    }
                    continue;
                }
                if !*waiting {
                    *waiting = true;
                    return Effect::WaitTimeout(TimeoutSpec::MovesFromAll {
                        iteration: *i as u32 + 1,
                        senders: self.shared.leaders.clone(),
                    });
                }
                // Polled again only once the wait has been resolved.
                let seen = count_moves_from(view.log, *i as u32 + 1, &self.shared.leaders);
                if seen < self.shared.leaders.len() {
                    let o = self.shared.walk[*i - 1].clone();
                    self.leader = Alg1Leader::Done;
                    return Effect::Communicate(Info::OutputSet(o));
                }
                self.leader = Alg1Leader::AtIter {
                    i: *i + 1,
                    moved: false,
                    waiting: false,
                };
                continue;
            }

            return match self.out {
                Alg1Out::Watching(v) => {
                    let matched = view.log.iter().any(
                        |obs| matches!(&obs.info, Info::OutputSet(o) if o.contains(v)),
                    );
                    if matched {
                        self.out = Alg1Out::Pending(v);
                        Effect::OutputIntent(v)
                    } else {
                        Effect::Idle
                    }
                }
                Alg1Out::Pending(_) => {
                    debug_assert!(view.output.is_some());
                    self.out = Alg1Out::Finished;
                    continue;
                }
                Alg1Out::Finished | Alg1Out::NoValue => Effect::Exit,
            };
        }
    }
}

// ---------------------------------------------------------------------------
// d-disagreement protocol
// ---------------------------------------------------------------------------

/// Instance data of the d-disagreement protocol: `d` value blocks plus the
/// wildcard block whose members deduce the missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct Alg2Config {
    pub d: u32,
    pub values: Vec<ValueId>,
    /// Blocks `P_1..P_d`, index-aligned with `values`.
    pub blocks: Vec<BTreeSet<ProcessId>>,
    pub wildcard: BTreeSet<ProcessId>,
    pub n: u32,
    pub t: u32,
    pub relaxed: bool,
}

impl Alg2Config {
    /// Canonical instantiation with `|P_i| = ⌈(t+1)/2⌉` and everything else in
    /// the wildcard block. Requires `n ≥ d·⌈(t+1)/2⌉ + ⌊(t+1)/2⌋`.
    #[allow(clippy::manual_div_ceil)] // (t+1)/2 is the floor term of the bound
    pub fn new(d: u32, values: &[ValueId], n: u32, t: u32) -> Result<Self, InstantiateError> {
        Self::check_values(d, values)?;
        let s = (t + 1).div_ceil(2);
        let need = d * s + (t + 1) / 2;
        if n < need {
            return Err(InstantiateError::NotEnoughProcesses { need, have: n });
        }
        Ok(Self::with_block_size(d, values, n, t, s, false))
    }

    /// Deliberately under-provisioned variant for impossibility experiments:
    /// keeps the block structure but shrinks it to whatever `n` allows. Below
    /// `d·⌈(t+1)/2⌉` processes the blocks are filled as evenly as possible and
    /// the wildcard block is empty.
    pub fn relaxed(d: u32, values: &[ValueId], n: u32, t: u32) -> Result<Self, InstantiateError> {
        Self::check_values(d, values)?;
        let s = (t + 1).div_ceil(2);
        if n >= d * s {
            return Ok(Self::with_block_size(d, values, n, t, s, true));
        }
        let base = n / d;
        let extra = n % d;
        let mut blocks = Vec::new();
        let mut next = 1u32;
        for i in 0..d {
            let size = base + if i < extra { 1 } else { 0 };
            let block: BTreeSet<ProcessId> = (next..next + size).map(ProcessId).collect();
            next += size;
            blocks.push(block);
        }
        Ok(Self {
            d,
            values: values.to_vec(),
            blocks,
            wildcard: BTreeSet::new(),
            n,
            t,
            relaxed: true,
        })
    }

    fn check_values(d: u32, values: &[ValueId]) -> Result<(), InstantiateError> {
        let distinct: BTreeSet<ValueId> = values.iter().copied().collect();
        if values.len() != d as usize || distinct.len() != d as usize || d == 0 {
            return Err(InstantiateError::BadValueList {
                d,
                got: values.len(),
            });
        }
        Ok(())
    }

    fn with_block_size(d: u32, values: &[ValueId], n: u32, t: u32, s: u32, relaxed: bool) -> Self {
        let mut blocks = Vec::new();
        let mut next = 1u32;
        for _ in 0..d {
            let block: BTreeSet<ProcessId> = (next..next + s).map(ProcessId).collect();
            next += s;
            blocks.push(block);
        }
        let wildcard: BTreeSet<ProcessId> = (next..=n).map(ProcessId).collect();
        Self {
            d,
            values: values.to_vec(),
            blocks,
            wildcard,
            n,
            t,
            relaxed,
        }
    }

    /// The single output set `{v_1..v_d}` this protocol must produce.
    pub fn target(&self) -> OutputSet {
        self.values.iter().copied().collect()
    }

    pub fn instance(&self) -> ProtocolInstance {
        let values = Arc::new(self.values.clone());
        let behaviors = (1..=self.n)
            .map(ProcessId)
            .map(|p| {
                if let Some(i) = self.blocks.iter().position(|b| b.contains(&p)) {
                    ProtocolBehavior::Alg2Fixed(Alg2Fixed {
                        value: self.values[i],
                        phase: Alg2FixedPhase::Fresh,
                    })
                } else {
                    ProtocolBehavior::Alg2Waiter(Alg2Waiter {
                        values: values.clone(),
                        phase: Alg2WaiterPhase::Waiting,
                    })
                }
            })
            .collect();
        ProtocolInstance {
            name: if self.relaxed { "alg2-relaxed" } else { "alg2" }.into(),
            behaviors,
            sos: Sos::new([self.target()]).expect("single set"),
            t: self.t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Alg2FixedPhase {
    Fresh,
    Output,
    Announced,
}

/// Block member `p_i ∈ P_i`: outputs its block's value, announces it, exits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alg2Fixed {
    value: ValueId,
    phase: Alg2FixedPhase,
}

impl Alg2Fixed {
    fn poll(&mut self, view: &ProcessView<'_>) -> Effect {
        match self.phase {
            Alg2FixedPhase::Fresh => {
                self.phase = Alg2FixedPhase::Output;
                Effect::OutputIntent(self.value)
            }
            Alg2FixedPhase::Output => {
                debug_assert!(view.output.is_some());
                self.phase = Alg2FixedPhase::Announced;
                Effect::Communicate(Info::Output(self.value))
            }
            Alg2FixedPhase::Announced => Effect::Exit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Alg2WaiterPhase {
    Waiting,
    Pending,
}

/// Wildcard member `p_?`: waits for `d−1` distinct announced values, then
/// outputs the one value of `v_1..v_d` it has not seen.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alg2Waiter {
    values: Arc<Vec<ValueId>>,
    phase: Alg2WaiterPhase,
}

impl Alg2Waiter {
    fn poll(&mut self, view: &ProcessView<'_>) -> Effect {
        match self.phase {
            Alg2WaiterPhase::Waiting => {
                let d = self.values.len();
                // Distinct announced values in observation order; the wait
                // ends at the (d−1)-th, so later arrivals do not count.
                let mut seen: Vec<ValueId> = Vec::new();
                for obs in view.log {
                    if let Info::Output(v) = obs.info {
                        if !seen.contains(&v) {
                            seen.push(v);
                        }
                    }
                }
                if seen.len() < d - 1 {
                    return Effect::WaitObserve;
                }
                let observed = &seen[..d - 1];
                let missing: Vec<ValueId> = self
                    .values
                    .iter()
                    .copied()
                    .filter(|v| !observed.contains(v))
                    .collect();
                debug_assert_eq!(missing.len(), 1);
                self.phase = Alg2WaiterPhase::Pending;
                Effect::OutputIntent(missing[0])
            }
            Alg2WaiterPhase::Pending => {
                debug_assert!(view.output.is_some());
                Effect::Exit
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Crash-free leader protocol for arbitrary SOS tasks
// ---------------------------------------------------------------------------

/// Instance data of the crash-free protocol: one leader arbitrating the output
/// set, plus a partition into `m = max{|o|}` rank blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Alg3Config {
    pub sos: Sos,
    /// `None` only in the degenerate zero-process instance for the SOS `{{}}`.
    pub leader: Option<ProcessId>,
    /// Blocks `P_1..P_m`; the block index picks the rank a member outputs.
    pub blocks: Vec<BTreeSet<ProcessId>>,
    pub n: u32,
}

impl Alg3Config {
    /// Canonical instantiation: leader `p1`, blocks `P_i = {p_i}` with the
    /// remainder joining the last block. Requires `t = 0` and `n ≥ max{|o|}`.
    pub fn new(sos: &Sos, n: u32, t: u32) -> Result<Self, InstantiateError> {
        if t != 0 {
            return Err(InstantiateError::NonzeroT { t });
        }
        let m = sos.max_set_len() as u32;
        if n == 0 {
            // With no processes at all, only the do-nothing task is solvable.
            if sos.is_trivial() {
                return Ok(Self {
                    sos: sos.clone(),
                    leader: None,
                    blocks: Vec::new(),
                    n: 0,
                });
            }
            return Err(InstantiateError::NotEnoughProcesses {
                need: m.max(1),
                have: 0,
            });
        }
        if n < m {
            return Err(InstantiateError::NotEnoughProcesses { need: m, have: n });
        }
        let mut blocks: Vec<BTreeSet<ProcessId>> = Vec::new();
        for i in 1..=m {
            let block: BTreeSet<ProcessId> = if i == m {
                (i..=n).map(ProcessId).collect()
            } else {
                [ProcessId(i)].into_iter().collect()
            };
            blocks.push(block);
        }
        if m == 0 {
            // Valueless SOS with processes: everyone still synchronizes on the
            // leader's (empty) output set and exits without outputting.
            blocks.push((1..=n).map(ProcessId).collect());
        }
        Ok(Self {
            sos: sos.clone(),
            leader: Some(ProcessId(1)),
            blocks,
            n,
        })
    }

    pub fn instance(&self) -> ProtocolInstance {
        let shared = Arc::new(Alg3Shared {
            sets: self.sos.sets().cloned().collect(),
        });
        let behaviors = (1..=self.n)
            .map(ProcessId)
            .map(|p| {
                let block_index = self
                    .blocks
                    .iter()
                    .position(|b| b.contains(&p))
                    .expect("partition covers all processes") as u32
                    + 1;
                let phase = if self.leader == Some(p) {
                    Alg3Phase::Choices { next: 0 }
                } else {
                    Alg3Phase::AwaitOutputSet
                };
                ProtocolBehavior::Alg3(Alg3Proc {
                    shared: shared.clone(),
                    block_index,
                    phase,
                })
            })
            .collect();
        ProtocolInstance {
            name: "alg3".into(),
            behaviors,
            sos: self.sos.clone(),
            t: 0,
        }
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
struct Alg3Shared {
    /// The SOS in canonical order; the leader offers each as a choice.
    sets: Vec<OutputSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Alg3Phase {
    /// Leader: communicate CHOICE(o) for each output set.
    Choices { next: usize },
    /// Leader: wait for the first CHOICE observation.
    AwaitChoice,
    /// Everyone: wait for the leader's OUTPUTSET.
    AwaitOutputSet,
    /// Intent emitted, waiting for release.
    Pending,
}

/// One process of the crash-free protocol. The leader communicates every
/// output set as a choice, adopts the first one it observes back, and
/// announces it; every process then outputs the value of its rank.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alg3Proc {
    shared: Arc<Alg3Shared>,
    block_index: u32,
    phase: Alg3Phase,
}

impl Alg3Proc {
    fn poll(&mut self, view: &ProcessView<'_>) -> Effect {
        loop {
            match &mut self.phase {
                Alg3Phase::Choices { next } => {
                    if *next < self.shared.sets.len() {
                        let o = self.shared.sets[*next].clone();
                        *next += 1;
                        return Effect::Communicate(Info::Choice(o));
                    }
                    self.phase = Alg3Phase::AwaitChoice;
                }
                Alg3Phase::AwaitChoice => {
                    let first = view.log.iter().find_map(|obs| match &obs.info {
                        Info::Choice(o) => Some(o.clone()),
                        _ => None,
                    });
                    match first {
                        Some(o) => {
                            self.phase = Alg3Phase::AwaitOutputSet;
                            return Effect::Communicate(Info::OutputSet(o));
                        }
                        None => return Effect::WaitObserve,
                    }
                }
                Alg3Phase::AwaitOutputSet => {
                    let first = view.log.iter().find_map(|obs| match &obs.info {
                        Info::OutputSet(o) => Some(o.clone()),
                        _ => None,
                    });
                    match first {
                        Some(o) => {
                            if o.is_empty() {
                                return Effect::Exit;
                            }
                            let rank = (self.block_index as usize % o.len()) + 1;
                            let v = o.rank(rank).expect("rank within set size");
                            self.phase = Alg3Phase::Pending;
                            return Effect::OutputIntent(v);
                        }
                        None => return Effect::WaitObserve,
                    }
                }
                Alg3Phase::Pending => {
                    debug_assert!(view.output.is_some());
                    return Effect::Exit;
                }
            }
        }
    }
}
