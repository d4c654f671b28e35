//! Deterministic, replayable simulator of the asynchronous crash-prone
//! communicate/observe model.
//!
//! Processes are state machines driven one scheduler decision at a time. A
//! `communicate` fans the information out as one pending delivery per live
//! process (sender included); the scheduler picks which pending delivery,
//! timeout resolution, output release, process start, or crash happens next.
//! Between decisions a process runs its local steps to the next suspension
//! point, so crash points sit exactly at decision boundaries.
//!
//! The medium keeps the four communication properties:
//!
//! - validity: only previously communicated information is ever observed;
//! - integrity: a recipient observes a given (sender, info) pair at most once;
//! - local/global termination: [`RunState::finalize`] closes every delivery
//!   obligation toward correct processes before a run is declared over.
//!
//! Timed waits carry no clock: the scheduler resolves each wait with the
//! outcome consistent with what it has delivered so far, which is exactly the
//! freedom an asynchronous adversary has over local timeouts.

mod enumerate;
mod trace;

pub use enumerate::{enumerate_runs, enumerate_with, EnumerateError, EnumerateOptions};
pub use trace::{
    check_c_integrity, check_c_validity, check_model_properties, check_termination_closure,
    decisions_of, format_trace, parse_trace, ModelViolation, TraceRecord,
};

use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

use crate::rng::SplitMix64;
use crate::sos::{OutputSet, ValueId};

/// Process identity, 1-based (`p1 .. pn`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcessId(pub u32);

impl ProcessId {
    pub(crate) fn index(self) -> usize {
        (self.0 - 1) as usize
    }

    pub(crate) fn from_index(i: usize) -> Self {
        ProcessId(i as u32 + 1)
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// A piece of communicated information.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Info {
    /// Walk-iteration announcement carrying the next iteration number.
    Move(u32),
    /// An output set settled on by a leader.
    OutputSet(OutputSet),
    /// A candidate output set offered for first-observation arbitration.
    Choice(OutputSet),
    /// A value some process has output.
    Output(ValueId),
}

impl fmt::Display for Info {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Info::Move(i) => write!(f, "MOVE({i})"),
            Info::OutputSet(o) => write!(f, "OUTPUTSET({o})"),
            Info::Choice(o) => write!(f, "CHOICE({o})"),
            Info::Output(v) => write!(f, "OUTPUT({v})"),
        }
    }
}

/// One entry of a process's observation log.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Observation {
    pub sender: ProcessId,
    pub info: Info,
}

/// Predicate attached to a timed wait; decides which resolution of the wait is
/// consistent with the waiter's log.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TimeoutSpec {
    /// All of `senders` have had their `MOVE(iteration)` observed.
    MovesFromAll {
        iteration: u32,
        senders: BTreeSet<ProcessId>,
    },
}

impl TimeoutSpec {
    fn satisfied(&self, log: &[Observation]) -> bool {
        match self {
            TimeoutSpec::MovesFromAll { iteration, senders } => senders.iter().all(|s| {
                log.iter()
                    .any(|obs| obs.sender == *s && obs.info == Info::Move(*iteration))
            }),
        }
    }
}

/// What a process asks of the kernel at its next suspension point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    /// Disseminate information to every process, then continue.
    Communicate(Info),
    /// About to output a value; suspends until the scheduler releases it.
    OutputIntent(ValueId),
    /// Block until a new observation arrives. Starvation here is a liveness
    /// failure (the run ends non-quiescent).
    WaitObserve,
    /// Nothing to do unless a new observation arrives; compatible with the run
    /// ending (a reactive upon-handler that may never fire).
    Idle,
    /// Start a timed wait resolved by the scheduler.
    WaitTimeout(TimeoutSpec),
    /// Terminate; the process counts as correct and takes no further steps.
    Exit,
}

/// A per-process protocol state machine.
///
/// `poll` advances the machine to its next suspension point and is invoked
/// when the process starts, after each delivery while it is observe-blocked or
/// idle, after each timed-wait resolution, and after each output release. The
/// machine reads its observation log through the view, never the kernel.
pub trait Behavior: Clone + Eq + Hash + fmt::Debug {
    fn poll(&mut self, view: &ProcessView<'_>) -> Effect;
}

/// What a process can see of itself.
#[derive(Debug)]
pub struct ProcessView<'a> {
    pub me: ProcessId,
    pub n: u32,
    pub log: &'a [Observation],
    /// The value this process has output, if any.
    pub output: Option<ValueId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum ProcState {
    Ready,
    WaitObserve,
    Idle,
    Timeout { wait_id: u32, spec: TimeoutSpec },
    OutputPending(ValueId),
    Done,
    Crashed,
}

/// One scheduler decision. Variant order defines the canonical decision order
/// used by exhaustive enumeration and the deterministic finalize phase.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Decision {
    /// Run a process's initial local steps. A crash may precede this, so a
    /// process can fail before taking a single step.
    Start(ProcessId),
    /// Deliver one pending (sender, info) copy to one recipient.
    Deliver {
        recipient: ProcessId,
        sender: ProcessId,
        info: Info,
    },
    /// Resolve a timed wait. `all_arrived` must match the waiter's log.
    TimeoutResult {
        process: ProcessId,
        wait_id: u32,
        all_arrived: bool,
    },
    /// Let a process with a pending output intent actually output.
    ReleaseOutput(ProcessId),
    /// Crash a process: it takes no further steps and observes nothing more.
    /// Its already-pending outgoing deliveries stay pending.
    Crash(ProcessId),
}

impl Decision {
    /// The process a decision acts on (the recipient, for deliveries).
    pub fn process(&self) -> ProcessId {
        match self {
            Decision::Start(p)
            | Decision::ReleaseOutput(p)
            | Decision::Crash(p)
            | Decision::TimeoutResult { process: p, .. } => *p,
            Decision::Deliver { recipient, .. } => *recipient,
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Start(p) => write!(f, "start {p}"),
            Decision::Deliver {
                recipient,
                sender,
                info,
            } => write!(f, "deliver {recipient} {sender} {info}"),
            Decision::TimeoutResult {
                process,
                wait_id,
                all_arrived,
            } => write!(f, "timeout {process} w{wait_id} {all_arrived}"),
            Decision::ReleaseOutput(p) => write!(f, "output {p}"),
            Decision::Crash(p) => write!(f, "crash {p}"),
        }
    }
}

/// Which crash decisions the scheduler may take.
#[derive(Debug, Clone)]
pub enum CrashRule {
    /// No crash decisions at all.
    None,
    /// Crashes restricted to the given processes (each at most once).
    Targets(BTreeSet<ProcessId>),
    /// Any process may crash, subject to the run's crash bound.
    Any,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("decision not enabled: {decision} ({reason})")]
    DecisionNotEnabled { decision: String, reason: String },
    #[error("duplicate communication of {info} by {process}")]
    DuplicateCommunication { process: ProcessId, info: Info },
    #[error("{process} is not live")]
    LiveRequired { process: ProcessId },
    #[error("input vector has length {got}, expected n = {expected}")]
    InputLength { got: usize, expected: usize },
}

/// How a run is driven.
#[derive(Debug, Clone)]
pub enum Schedule {
    /// Uniformly random choice among enabled decisions, from a 64-bit seed.
    /// Every process in `crash_targets` is crashed at a seed-chosen point.
    Seeded {
        seed: u64,
        crash_targets: BTreeSet<ProcessId>,
    },
    /// A fixed decision sequence, e.g. recovered from a trace.
    Explicit(Vec<Decision>),
}

impl Schedule {
    pub fn seeded(seed: u64) -> Self {
        Schedule::Seeded {
            seed,
            crash_targets: BTreeSet::new(),
        }
    }
}

/// Everything a finished run exposes. Two runs of the same protocol, inputs
/// and schedule compare equal, traces included.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RunResult {
    pub n: u32,
    pub t: u32,
    pub input_vector: Vec<Option<ValueId>>,
    pub output_vector: Vec<Option<ValueId>>,
    pub output_set: OutputSet,
    pub crashed: BTreeSet<ProcessId>,
    /// Every correct process finished (exited or ran out of reactive work)
    /// after all delivery obligations were closed.
    pub quiescent: bool,
    /// Correct processes left stuck in a blocking wait, when not quiescent.
    pub blocked: BTreeSet<ProcessId>,
    pub trace: Vec<TraceRecord>,
}

/// Live simulator state, advanced one decision at a time.
#[derive(Debug, Clone)]
pub struct RunState<B: Behavior> {
    t: u32,
    behaviors: Vec<B>,
    status: Vec<ProcState>,
    logs: Vec<Vec<Observation>>,
    outputs: Vec<Option<ValueId>>,
    inputs: Vec<Option<ValueId>>,
    /// Every (sender, info) ever communicated; enforces integrity at the source.
    communicated: BTreeSet<(ProcessId, Info)>,
    /// Pending deliveries keyed canonically by (recipient, sender, info).
    pending: BTreeSet<(ProcessId, ProcessId, Info)>,
    crashed: BTreeSet<ProcessId>,
    next_wait_id: Vec<u32>,
    trace: Vec<TraceRecord>,
}

impl<B: Behavior> RunState<B> {
    pub fn new(behaviors: Vec<B>, t: u32, inputs: &[Option<ValueId>]) -> Result<Self, KernelError> {
        let n = behaviors.len();
        if inputs.len() != n {
            return Err(KernelError::InputLength {
                got: inputs.len(),
                expected: n,
            });
        }
        Ok(Self {
            t,
            behaviors,
            status: vec![ProcState::Ready; n],
            logs: vec![Vec::new(); n],
            outputs: vec![None; n],
            inputs: inputs.to_vec(),
            communicated: BTreeSet::new(),
            pending: BTreeSet::new(),
            crashed: BTreeSet::new(),
            next_wait_id: vec![0; n],
            trace: Vec::new(),
        })
    }

    pub fn n(&self) -> u32 {
        self.behaviors.len() as u32
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn crashed(&self) -> &BTreeSet<ProcessId> {
        &self.crashed
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn is_live(&self, p: ProcessId) -> bool {
        !matches!(self.status[p.index()], ProcState::Crashed)
    }

    pub fn has_exited(&self, p: ProcessId) -> bool {
        matches!(self.status[p.index()], ProcState::Done)
    }

    /// The value `p` is suspended on, if its next step is an output.
    pub fn output_intent(&self, p: ProcessId) -> Option<ValueId> {
        match self.status[p.index()] {
            ProcState::OutputPending(v) => Some(v),
            _ => None,
        }
    }

    pub fn output_of(&self, p: ProcessId) -> Option<ValueId> {
        self.outputs[p.index()]
    }

    fn processes(&self) -> impl Iterator<Item = ProcessId> {
        (0..self.behaviors.len()).map(ProcessId::from_index)
    }

    /// Enabled decisions in canonical order: starts, deliveries, timeout
    /// resolutions, output releases, crashes; each by process index.
    pub fn enabled_decisions(&self, crashes: &CrashRule) -> Vec<Decision> {
        let mut out = Vec::new();
        for p in self.processes() {
            if matches!(self.status[p.index()], ProcState::Ready) {
                out.push(Decision::Start(p));
            }
        }
        for (recipient, sender, info) in &self.pending {
            out.push(Decision::Deliver {
                recipient: *recipient,
                sender: *sender,
                info: info.clone(),
            });
        }
        for p in self.processes() {
            if let ProcState::Timeout { wait_id, spec } = &self.status[p.index()] {
                out.push(Decision::TimeoutResult {
                    process: p,
                    wait_id: *wait_id,
                    all_arrived: spec.satisfied(&self.logs[p.index()]),
                });
            }
        }
        for p in self.processes() {
            if matches!(self.status[p.index()], ProcState::OutputPending(_)) {
                out.push(Decision::ReleaseOutput(p));
            }
        }
        if (self.crashed.len() as u32) < self.t {
            for p in self.processes() {
                let allowed = match crashes {
                    CrashRule::None => false,
                    CrashRule::Targets(set) => set.contains(&p),
                    CrashRule::Any => true,
                };
                if allowed && self.is_live(p) {
                    out.push(Decision::Crash(p));
                }
            }
        }
        out
    }

    fn not_enabled(&self, d: &Decision, reason: impl Into<String>) -> KernelError {
        KernelError::DecisionNotEnabled {
            decision: d.to_string(),
            reason: reason.into(),
        }
    }

    /// Applies one scheduler decision, running the affected process's local
    /// steps to its next suspension point.
    pub fn step(&mut self, d: &Decision) -> Result<(), KernelError> {
        match d {
            Decision::Start(p) => {
                if !matches!(self.status[p.index()], ProcState::Ready) {
                    return Err(self.not_enabled(d, "process already started or crashed"));
                }
                self.trace.push(TraceRecord::Start { process: *p });
                self.poll_loop(*p)
            }
            Decision::Deliver {
                recipient,
                sender,
                info,
            } => {
                let key = (*recipient, *sender, info.clone());
                if !self.pending.contains(&key) {
                    let reason = if !self.is_live(*recipient) {
                        "recipient crashed"
                    } else {
                        "no such pending delivery"
                    };
                    return Err(self.not_enabled(d, reason));
                }
                self.pending.remove(&key);
                debug_assert!(
                    !self.logs[recipient.index()]
                        .iter()
                        .any(|o| o.sender == *sender && o.info == *info),
                    "integrity: duplicate delivery"
                );
                self.logs[recipient.index()].push(Observation {
                    sender: *sender,
                    info: info.clone(),
                });
                self.trace.push(TraceRecord::Deliver {
                    recipient: *recipient,
                    sender: *sender,
                    info: info.clone(),
                });
                match self.status[recipient.index()] {
                    ProcState::WaitObserve | ProcState::Idle => self.poll_loop(*recipient),
                    _ => Ok(()),
                }
            }
            Decision::TimeoutResult {
                process,
                wait_id,
                all_arrived,
            } => {
                match &self.status[process.index()] {
                    ProcState::Timeout { wait_id: w, spec } if w == wait_id => {
                        let actual = spec.satisfied(&self.logs[process.index()]);
                        if actual != *all_arrived {
                            return Err(self.not_enabled(
                                d,
                                format!("outcome inconsistent with log (expected {actual})"),
                            ));
                        }
                    }
                    _ => return Err(self.not_enabled(d, "no such pending wait")),
                }
                self.trace.push(TraceRecord::Timeout {
                    process: *process,
                    wait_id: *wait_id,
                    all_arrived: *all_arrived,
                });
                self.poll_loop(*process)
            }
            Decision::ReleaseOutput(p) => {
                let v = match self.status[p.index()] {
                    ProcState::OutputPending(v) => v,
                    _ => return Err(self.not_enabled(d, "no pending output intent")),
                };
                debug_assert!(self.outputs[p.index()].is_none(), "at most one output");
                self.outputs[p.index()] = Some(v);
                self.trace.push(TraceRecord::Output {
                    process: *p,
                    value: v,
                });
                self.poll_loop(*p)
            }
            Decision::Crash(p) => {
                if !self.is_live(*p) {
                    return Err(self.not_enabled(d, "already crashed"));
                }
                if self.crashed.len() as u32 >= self.t {
                    return Err(self.not_enabled(d, "crash bound reached"));
                }
                self.crashed.insert(*p);
                self.status[p.index()] = ProcState::Crashed;
                // Undelivered copies addressed to the crashed process vanish;
                // its own communicated copies stay pending.
                self.pending.retain(|(recipient, _, _)| recipient != p);
                self.trace.push(TraceRecord::Crash { process: *p });
                Ok(())
            }
        }
    }

    /// Fans `info` out to every live process, including the sender.
    pub fn communicate(&mut self, p: ProcessId, info: Info) -> Result<(), KernelError> {
        if !self.is_live(p) {
            return Err(KernelError::LiveRequired { process: p });
        }
        self.do_communicate(p, info)
    }

    fn do_communicate(&mut self, p: ProcessId, info: Info) -> Result<(), KernelError> {
        if !self.communicated.insert((p, info.clone())) {
            return Err(KernelError::DuplicateCommunication { process: p, info });
        }
        self.trace.push(TraceRecord::Communicate {
            process: p,
            info: info.clone(),
        });
        for r in self.processes() {
            if self.is_live(r) {
                self.pending.insert((r, p, info.clone()));
            }
        }
        Ok(())
    }

    /// Runs `p`'s local steps until it suspends.
    fn poll_loop(&mut self, p: ProcessId) -> Result<(), KernelError> {
        let i = p.index();
        loop {
            let effect = {
                let view = ProcessView {
                    me: p,
                    n: self.behaviors.len() as u32,
                    log: &self.logs[i],
                    output: self.outputs[i],
                };
                self.behaviors[i].poll(&view)
            };
            match effect {
                Effect::Communicate(info) => self.do_communicate(p, info)?,
                Effect::OutputIntent(v) => {
                    self.status[i] = ProcState::OutputPending(v);
                    return Ok(());
                }
                Effect::WaitObserve => {
                    self.status[i] = ProcState::WaitObserve;
                    return Ok(());
                }
                Effect::Idle => {
                    self.status[i] = ProcState::Idle;
                    return Ok(());
                }
                Effect::WaitTimeout(spec) => {
                    let wait_id = self.next_wait_id[i];
                    self.next_wait_id[i] += 1;
                    self.status[i] = ProcState::Timeout { wait_id, spec };
                    return Ok(());
                }
                Effect::Exit => {
                    self.status[i] = ProcState::Done;
                    self.trace.push(TraceRecord::Exit { process: p });
                    return Ok(());
                }
            }
        }
    }

    /// A pending delivery the closure phase must still perform: its info was
    /// communicated by a correct process, or has been observed by at least one
    /// correct process.
    fn first_obligatory_pending(&self) -> Option<Decision> {
        for (recipient, sender, info) in &self.pending {
            let obligatory = !self.crashed.contains(sender)
                || self.processes().any(|r| {
                    !self.crashed.contains(&r)
                        && self.logs[r.index()]
                            .iter()
                            .any(|o| o.sender == *sender && o.info == *info)
                });
            if obligatory {
                return Some(Decision::Deliver {
                    recipient: *recipient,
                    sender: *sender,
                    info: info.clone(),
                });
            }
        }
        None
    }

    /// Drives the run to completion: closes every delivery obligation toward
    /// correct processes, then lets all remaining protocol steps run.
    /// Deterministic; emits ordinary trace records, so a finalized trace
    /// replays as an explicit schedule.
    pub fn finalize(&mut self) -> Result<(), KernelError> {
        loop {
            if let Some(d) = self.first_obligatory_pending() {
                self.step(&d)?;
                continue;
            }
            if let Some(p) = self
                .processes()
                .find(|p| matches!(self.status[p.index()], ProcState::Ready))
            {
                self.step(&Decision::Start(p))?;
                continue;
            }
            if let Some(p) = self
                .processes()
                .find(|p| matches!(self.status[p.index()], ProcState::OutputPending(_)))
            {
                self.step(&Decision::ReleaseOutput(p))?;
                continue;
            }
            let timeout = self.processes().find_map(|p| {
                if let ProcState::Timeout { wait_id, spec } = &self.status[p.index()] {
                    Some(Decision::TimeoutResult {
                        process: p,
                        wait_id: *wait_id,
                        all_arrived: spec.satisfied(&self.logs[p.index()]),
                    })
                } else {
                    None
                }
            });
            if let Some(d) = timeout {
                self.step(&d)?;
                continue;
            }
            return Ok(());
        }
    }

    /// Finishes the run: finalize, then package the result.
    pub fn into_result(mut self) -> Result<RunResult, KernelError> {
        self.finalize()?;
        let mut blocked = BTreeSet::new();
        let mut quiescent = true;
        for p in self.processes() {
            match self.status[p.index()] {
                ProcState::Done | ProcState::Idle | ProcState::Crashed => {}
                ProcState::WaitObserve => {
                    quiescent = false;
                    blocked.insert(p);
                }
                // finalize drains these
                ProcState::Ready | ProcState::Timeout { .. } | ProcState::OutputPending(_) => {
                    unreachable!("finalize left a runnable process")
                }
            }
        }
        Ok(RunResult {
            n: self.behaviors.len() as u32,
            t: self.t,
            output_set: OutputSet::of_vector(&self.outputs),
            input_vector: self.inputs,
            output_vector: self.outputs,
            crashed: self.crashed,
            quiescent,
            blocked,
            trace: self.trace,
        })
    }

    /// Semantic fingerprint for schedule-exploration deduplication. Excludes
    /// the trace: two states reached by different interleavings compare equal
    /// when nothing a process can ever see differs.
    pub fn fingerprint(&self) -> u128 {
        let lo = self.fingerprint_half(0x5051_ab00);
        let hi = self.fingerprint_half(0x7e57_c0de);
        ((hi as u128) << 64) | lo as u128
    }

    fn fingerprint_half(&self, salt: u64) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        salt.hash(&mut h);
        self.t.hash(&mut h);
        self.behaviors.hash(&mut h);
        self.status.hash(&mut h);
        self.logs.hash(&mut h);
        self.outputs.hash(&mut h);
        self.inputs.hash(&mut h);
        self.communicated.hash(&mut h);
        self.pending.hash(&mut h);
        self.crashed.hash(&mut h);
        h.finish()
    }
}

/// Runs a protocol to completion under the given schedule. Deterministic: the
/// result (trace included) is a pure function of the arguments.
pub fn run<B: Behavior>(
    behaviors: &[B],
    t: u32,
    inputs: &[Option<ValueId>],
    schedule: &Schedule,
) -> Result<RunResult, KernelError> {
    let mut state = RunState::new(behaviors.to_vec(), t, inputs)?;
    match schedule {
        Schedule::Seeded {
            seed,
            crash_targets,
        } => {
            let mut rng = SplitMix64::new(*seed);
            let rule = CrashRule::Targets(crash_targets.clone());
            loop {
                let candidates = state.enabled_decisions(&rule);
                if candidates.is_empty() {
                    break;
                }
                let pick = rng.below(candidates.len());
                state.step(&candidates[pick])?;
            }
        }
        Schedule::Explicit(decisions) => {
            for d in decisions {
                state.step(d)?;
            }
        }
    }
    state.into_result()
}

/// Replays a finished run's trace against the same protocol and inputs.
pub fn replay<B: Behavior>(behaviors: &[B], result: &RunResult) -> Result<RunResult, KernelError> {
    run(
        behaviors,
        result.t,
        &result.input_vector,
        &Schedule::Explicit(decisions_of(&result.trace)),
    )
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    fn no_inputs(n: usize) -> Vec<Option<ValueId>> {
        vec![None; n]
    }

    #[test]
    fn communicate_fans_out_to_all() {
        let behaviors = vec![Announce::new(Info::Move(2)); 3];
        let mut state = RunState::new(behaviors, 0, &no_inputs(3)).unwrap();
        state.step(&Decision::Start(ProcessId(1))).unwrap();
        // One pending delivery per process, sender included.
        let deliveries: Vec<_> = state
            .enabled_decisions(&CrashRule::None)
            .into_iter()
            .filter(|d| matches!(d, Decision::Deliver { .. }))
            .collect();
        assert_eq!(deliveries.len(), 3);
    }

    #[test]
    fn duplicate_communication_rejected() {
        let behaviors = vec![Announce::new(Info::Move(2))];
        let mut state = RunState::new(behaviors, 0, &no_inputs(1)).unwrap();
        state.step(&Decision::Start(ProcessId(1))).unwrap();
        let err = state.communicate(ProcessId(1), Info::Move(2)).unwrap_err();
        assert!(matches!(err, KernelError::DuplicateCommunication { .. }));
    }

    #[test]
    fn distinct_senders_may_repeat_info() {
        let behaviors = vec![Announce::new(Info::Move(2)); 2];
        let mut state = RunState::new(behaviors, 0, &no_inputs(2)).unwrap();
        state.step(&Decision::Start(ProcessId(1))).unwrap();
        state.step(&Decision::Start(ProcessId(2))).unwrap();
        let deliveries = state
            .enabled_decisions(&CrashRule::None)
            .into_iter()
            .filter(|d| matches!(d, Decision::Deliver { .. }))
            .count();
        assert_eq!(deliveries, 4);
    }

    #[test]
    fn crashed_process_cannot_communicate() {
        let behaviors = vec![Announce::new(Info::Move(2)); 2];
        let mut state = RunState::new(behaviors, 1, &no_inputs(2)).unwrap();
        state.step(&Decision::Crash(ProcessId(1))).unwrap();
        let err = state.communicate(ProcessId(1), Info::Move(9)).unwrap_err();
        assert!(matches!(err, KernelError::LiveRequired { .. }));
    }

    #[test]
    fn delivery_consumed_and_not_repeatable() {
        let behaviors = vec![Announce::new(Info::Move(2)); 2];
        let mut state = RunState::new(behaviors, 0, &no_inputs(2)).unwrap();
        state.step(&Decision::Start(ProcessId(1))).unwrap();
        let d = Decision::Deliver {
            recipient: ProcessId(2),
            sender: ProcessId(1),
            info: Info::Move(2),
        };
        state.step(&d).unwrap();
        let err = state.step(&d).unwrap_err();
        assert!(matches!(err, KernelError::DecisionNotEnabled { .. }));
    }

    #[test]
    fn crash_cancels_incoming_deliveries() {
        let behaviors = vec![Announce::new(Info::Move(2)); 2];
        let mut state = RunState::new(behaviors, 1, &no_inputs(2)).unwrap();
        state.step(&Decision::Start(ProcessId(1))).unwrap();
        state.step(&Decision::Crash(ProcessId(2))).unwrap();
        let err = state
            .step(&Decision::Deliver {
                recipient: ProcessId(2),
                sender: ProcessId(1),
                info: Info::Move(2),
            })
            .unwrap_err();
        assert!(matches!(err, KernelError::DecisionNotEnabled { .. }));
        // The crashed process's own pending copy to p1 survives.
        assert!(state.enabled_decisions(&CrashRule::None).iter().any(|d| {
            matches!(d, Decision::Deliver { recipient, .. } if *recipient == ProcessId(1))
        }));
    }

    #[test]
    fn crash_bound_enforced() {
        let behaviors = vec![Announce::new(Info::Move(2)); 3];
        let mut state = RunState::new(behaviors, 1, &no_inputs(3)).unwrap();
        state.step(&Decision::Crash(ProcessId(1))).unwrap();
        let err = state.step(&Decision::Crash(ProcessId(2))).unwrap_err();
        assert!(matches!(err, KernelError::DecisionNotEnabled { .. }));
    }

    #[derive(Debug, Clone, PartialEq, Eq, Hash)]
    enum Mixed {
        Waits(u8),
        Announces(Announce),
    }

    impl Behavior for Mixed {
        fn poll(&mut self, view: &ProcessView<'_>) -> Effect {
            match self {
                Mixed::Waits(phase) => match phase {
                    0 => {
                        *phase = 1;
                        Effect::WaitTimeout(TimeoutSpec::MovesFromAll {
                            iteration: 1,
                            senders: [ProcessId(2)].into_iter().collect(),
                        })
                    }
                    _ => Effect::Exit,
                },
                Mixed::Announces(a) => a.poll(view),
            }
        }
    }

    #[test]
    fn timeout_outcome_must_match_log() {
        let behaviors = vec![Mixed::Waits(0), Mixed::Announces(Announce::new(Info::Move(1)))];
        let mut state = RunState::new(behaviors, 0, &no_inputs(2)).unwrap();
        state.step(&Decision::Start(ProcessId(1))).unwrap();
        state.step(&Decision::Start(ProcessId(2))).unwrap();
        // MOVE not delivered yet: only the not-arrived resolution is enabled.
        let err = state
            .step(&Decision::TimeoutResult {
                process: ProcessId(1),
                wait_id: 0,
                all_arrived: true,
            })
            .unwrap_err();
        assert!(matches!(err, KernelError::DecisionNotEnabled { .. }));
        state
            .step(&Decision::Deliver {
                recipient: ProcessId(1),
                sender: ProcessId(2),
                info: Info::Move(1),
            })
            .unwrap();
        state
            .step(&Decision::TimeoutResult {
                process: ProcessId(1),
                wait_id: 0,
                all_arrived: true,
            })
            .unwrap();
        assert!(state.has_exited(ProcessId(1)));
    }

    #[test]
    fn seeded_runs_are_deterministic() {
        let behaviors: Vec<ConstOutput> = (1..=4).map(|v| ConstOutput::new(ValueId(v))).collect();
        let schedule = Schedule::seeded(42);
        let a = run(&behaviors, 0, &no_inputs(4), &schedule).unwrap();
        let b = run(&behaviors, 0, &no_inputs(4), &schedule).unwrap();
        assert_eq!(a, b);
        assert!(a.quiescent);
        assert_eq!(a.output_set, OutputSet::new((1..=4).map(ValueId)));
    }

    #[test]
    fn explicit_replay_reproduces_run() {
        let behaviors: Vec<ConstOutput> = (1..=4).map(|v| ConstOutput::new(ValueId(v))).collect();
        for seed in 0..20 {
            let a = run(&behaviors, 0, &no_inputs(4), &Schedule::seeded(seed)).unwrap();
            let b = replay(&behaviors, &a).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn seeded_crash_targets_always_crash() {
        let behaviors: Vec<ConstOutput> = (1..=4).map(|v| ConstOutput::new(ValueId(v))).collect();
        for seed in 0..20 {
            let schedule = Schedule::Seeded {
                seed,
                crash_targets: [ProcessId(2)].into_iter().collect(),
            };
            let r = run(&behaviors, 1, &no_inputs(4), &schedule).unwrap();
            assert_eq!(r.crashed, [ProcessId(2)].into_iter().collect());
        }
    }

    /// Decisions touching distinct processes commute: both orders are enabled
    /// and produce identical states.
    #[test]
    fn diamond_property_on_sampled_states() {
        let behaviors: Vec<ConstOutput> = (1..=3).map(|v| ConstOutput::new(ValueId(v))).collect();
        assert_diamond_everywhere(&behaviors, 1, 0..30);
    }

    #[test]
    fn zero_process_run_is_trivially_quiescent() {
        let behaviors: Vec<ConstOutput> = Vec::new();
        let r = run(&behaviors, 0, &[], &Schedule::seeded(0)).unwrap();
        assert!(r.quiescent);
        assert!(r.output_vector.is_empty());
        assert!(r.output_set.is_empty());
    }

    /// Once any correct process observed a crashed sender's info, finalize
    /// must deliver that info to every correct process.
    #[test]
    fn finalize_closes_observed_info_of_crashed_sender() {
        let behaviors = vec![Announce::new(Info::Move(5)); 4];
        let mut state = RunState::new(behaviors, 1, &no_inputs(4)).unwrap();
        state.step(&Decision::Start(ProcessId(1))).unwrap();
        state
            .step(&Decision::Deliver {
                recipient: ProcessId(2),
                sender: ProcessId(1),
                info: Info::Move(5),
            })
            .unwrap();
        state.step(&Decision::Crash(ProcessId(1))).unwrap();
        let result = state.into_result().unwrap();
        for p in [ProcessId(2), ProcessId(3), ProcessId(4)] {
            assert!(
                result.trace.iter().any(|rec| matches!(
                    rec,
                    TraceRecord::Deliver { recipient, sender, info: Info::Move(5) }
                        if *recipient == p && *sender == ProcessId(1)
                )),
                "{p} never observed the crashed sender's info"
            );
        }
        assert!(check_termination_closure(&result).is_ok());
    }

    /// A crashed sender's info that no correct process observed may vanish:
    /// finalize drops it rather than inventing deliveries.
    #[test]
    fn finalize_drops_unobserved_info_of_crashed_sender() {
        let behaviors = vec![Announce::new(Info::Move(5)); 3];
        let mut state = RunState::new(behaviors, 1, &no_inputs(3)).unwrap();
        state.step(&Decision::Start(ProcessId(1))).unwrap();
        state.step(&Decision::Crash(ProcessId(1))).unwrap();
        let result = state.into_result().unwrap();
        assert!(result.trace.iter().all(|rec| !matches!(
            rec,
            TraceRecord::Deliver { sender, .. } if *sender == ProcessId(1)
        )));
        assert!(result.quiescent);
    }

    /// A process stuck in a blocking wait that nothing can satisfy is a
    /// reportable liveness failure, not a silent hang.
    #[test]
    fn starved_blocking_wait_reports_non_quiescence() {
        #[derive(Debug, Clone, PartialEq, Eq, Hash)]
        enum Pair {
            Blocker(WaitForever),
            Quiet(ConstOutput),
        }
        impl Behavior for Pair {
            fn poll(&mut self, view: &ProcessView<'_>) -> Effect {
                match self {
                    Pair::Blocker(b) => b.poll(view),
                    Pair::Quiet(c) => c.poll(view),
                }
            }
        }
        let behaviors = vec![
            Pair::Blocker(WaitForever),
            Pair::Quiet(ConstOutput::new(ValueId(1))),
        ];
        let r = run(&behaviors, 0, &no_inputs(2), &Schedule::seeded(4)).unwrap();
        assert!(!r.quiescent);
        assert_eq!(r.blocked, [ProcessId(1)].into_iter().collect());
    }
}
