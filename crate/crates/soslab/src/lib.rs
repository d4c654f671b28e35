//! Deterministic simulation and analysis of SOS (set-of-output-sets) distributed
//! tasks under asynchrony and crash faults.
//!
//! An SOS task is defined solely by the set `O` of distinct output-value sets its
//! executions may produce. This crate provides:
//!
//! - the task data model: output sets, SOS graphs (inclusion edges), covering
//!   walks, and the solvability decision rule ([`sos`]);
//! - a deterministic, replayable simulator of the asynchronous crash-prone
//!   communicate/observe model ([`kernel`]);
//! - the three reference protocols: the walk-following algorithm for connected
//!   SOS tasks, the d-disagreement algorithm, and the crash-free leader
//!   algorithm for arbitrary SOS tasks ([`protocols`]);
//! - the freeze/thaw/crash adversary that attacks under-provisioned
//!   d-disagreement protocols ([`adversary`]);
//! - explicit state-graph analysis: SOS valence, asynchrony/termination/
//!   resilience axioms, and critical-state detection ([`valence`]);
//! - oracles and experiment drivers: safety/completeness checks, witness
//!   schedules, crash-pattern sweeps, and campaign configs ([`harness`]).
//!
//! Every run is a pure function of its schedule: a seeded run replays
//! bit-identically from its seed, and any trace replays to the identical result.

pub mod adversary;
pub mod harness;
pub mod kernel;
pub mod protocols;
pub mod rng;
pub mod sos;
pub mod text;
pub mod valence;

pub use kernel::{
    Behavior, Decision, Info, KernelError, Observation, ProcessId, RunResult, Schedule,
    TraceRecord,
};
pub use sos::{
    build_sos_graph, construct_walk, decide_solvability, disagreement_lower_bound,
    disagreement_upper_bound_n, is_connected, ksa_sos, OutputSet, Sos, SosGraph, SosWalk, ValueId,
    Verdict, VerdictReason,
};
