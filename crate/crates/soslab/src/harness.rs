//! Oracles and experiment drivers: safety/completeness checks, lockstep
//! witness schedules for the walk protocol, crash-pattern sweeps, and
//! campaign configs that bundle them.
//!
//! Every failed check carries a replayable counterexample run.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use thiserror::Error;

use crate::kernel::{
    check_model_properties, enumerate_with, replay, run, CrashRule, Decision, EnumerateError,
    EnumerateOptions, Info, KernelError, ProcessId, RunResult, Schedule, TraceRecord,
};
use crate::protocols::{Alg1Config, Alg2Config, Alg3Config, InstantiateError, ProtocolInstance};
use crate::rng::mix;
use crate::sos::{OutputSet, Sos, SosWalk, ValueId};
use crate::text::ParseError;

/// A runnable protocol description, as named in configs and on the command
/// line.
#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolSpec {
    Alg1 {
        sos: Sos,
        n: u32,
        t: u32,
    },
    Alg2 {
        d: u32,
        values: Vec<ValueId>,
        n: u32,
        t: u32,
        relaxed: bool,
    },
    Alg3 {
        sos: Sos,
        n: u32,
    },
}

impl ProtocolSpec {
    pub fn instantiate(&self) -> Result<ProtocolInstance, InstantiateError> {
        match self {
            ProtocolSpec::Alg1 { sos, n, t } => Ok(Alg1Config::new(sos, *n, *t)?.instance()),
            ProtocolSpec::Alg2 {
                d,
                values,
                n,
                t,
                relaxed,
            } => {
                let cfg = if *relaxed {
                    Alg2Config::relaxed(*d, values, *n, *t)?
                } else {
                    Alg2Config::new(*d, values, *n, *t)?
                };
                Ok(cfg.instance())
            }
            ProtocolSpec::Alg3 { sos, n } => Ok(Alg3Config::new(sos, *n, 0)?.instance()),
        }
    }

    /// The walk-protocol config, when this spec is the walk protocol.
    pub fn alg1_config(&self) -> Option<Alg1Config> {
        match self {
            ProtocolSpec::Alg1 { sos, n, t } => Alg1Config::new(sos, *n, *t).ok(),
            _ => None,
        }
    }

    pub fn n(&self) -> u32 {
        match self {
            ProtocolSpec::Alg1 { n, .. }
            | ProtocolSpec::Alg2 { n, .. }
            | ProtocolSpec::Alg3 { n, .. } => *n,
        }
    }

    pub fn t(&self) -> u32 {
        match self {
            ProtocolSpec::Alg1 { t, .. } | ProtocolSpec::Alg2 { t, .. } => *t,
            ProtocolSpec::Alg3 { .. } => 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("run is not quiescent; blocked: {blocked:?}")]
    NonQuiescentRun { blocked: BTreeSet<ProcessId> },
    #[error("crash pattern of size {size} exceeds the crash bound t = {t}")]
    CrashPatternExceedsBudget { size: usize, t: u32 },
    #[error("walk position {i} out of range 1..={len}")]
    PositionOutOfRange { i: usize, len: usize },
    #[error("the witness strategy is only defined for the walk protocol")]
    WitnessUnsupported,
    #[error(transparent)]
    Instantiate(#[from] InstantiateError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Enumerate(#[from] EnumerateError),
}

/// Check verdict. Seeded completeness misses are inconclusive rather than
/// failed: sampling proves nothing about an existential property.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    Failed,
    Inconclusive,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Passed => f.write_str("passed"),
            Outcome::Failed => f.write_str("failed"),
            Outcome::Inconclusive => f.write_str("inconclusive"),
        }
    }
}

/// Replayable evidence for a failed check.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub explanation: String,
    pub result: RunResult,
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub outcome: Outcome,
    pub runs_examined: usize,
    pub detail: String,
    pub counterexample: Option<Counterexample>,
}

impl CheckReport {
    fn passed(name: &str, runs: usize, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            outcome: Outcome::Passed,
            runs_examined: runs,
            detail: detail.into(),
            counterexample: None,
        }
    }

    fn failed(name: &str, runs: usize, ce: Counterexample) -> Self {
        Self {
            name: name.into(),
            outcome: Outcome::Failed,
            runs_examined: runs,
            detail: ce.explanation.clone(),
            counterexample: Some(ce),
        }
    }

    pub fn is_passed(&self) -> bool {
        self.outcome == Outcome::Passed
    }
}

/// Safety per the task definition: a quiescent run's output set must be one of
/// the task's output sets.
pub fn check_safety(result: &RunResult, sos: &Sos) -> Result<CheckReport, HarnessError> {
    if !result.quiescent {
        return Err(HarnessError::NonQuiescentRun {
            blocked: result.blocked.clone(),
        });
    }
    if sos.contains(&result.output_set) {
        Ok(CheckReport::passed(
            "safety",
            1,
            format!("output set {} is in the SOS", result.output_set),
        ))
    } else {
        Ok(CheckReport::failed(
            "safety",
            1,
            Counterexample {
                explanation: format!("output set {} is not in {}", result.output_set, sos),
                result: result.clone(),
            },
        ))
    }
}

/// How completeness hunts for a run per output set.
#[derive(Debug, Clone)]
pub enum CompletenessStrategy {
    /// Constructed lockstep schedules, one per walk vertex (walk protocol
    /// only).
    Witness,
    /// Exhaustive schedule exploration up to a state budget.
    Exhaustive { max_states: usize },
    /// Seeded sampling over a seed range.
    Seeded { seeds: Range<u64> },
}

/// Completeness per the task definition: for every output set of the task,
/// some examined run produces exactly it.
pub fn check_completeness(
    spec: &ProtocolSpec,
    strategy: &CompletenessStrategy,
) -> Result<CheckReport, HarnessError> {
    let instance = spec.instantiate()?;
    let sos = instance.sos.clone();
    let mut seen: BTreeSet<OutputSet> = BTreeSet::new();
    let mut runs = 0usize;
    let sampled = match strategy {
        CompletenessStrategy::Witness => {
            let cfg = spec.alg1_config().ok_or(HarnessError::WitnessUnsupported)?;
            for (vertex, result) in witness_runs(&cfg)? {
                runs += 1;
                if result.output_set != vertex {
                    return Ok(CheckReport::failed(
                        "completeness",
                        runs,
                        Counterexample {
                            explanation: format!(
                                "witness for {vertex} produced {}",
                                result.output_set
                            ),
                            result,
                        },
                    ));
                }
                seen.insert(result.output_set.clone());
            }
            false
        }
        CompletenessStrategy::Exhaustive { max_states } => {
            let opts = EnumerateOptions {
                max_states: *max_states,
                crashes: CrashRule::None,
            };
            let inputs = vec![None; instance.behaviors.len()];
            enumerate_with(&instance.behaviors, instance.t, &inputs, &opts, |r| {
                runs += 1;
                if r.quiescent {
                    seen.insert(r.output_set.clone());
                }
            })?;
            false
        }
        CompletenessStrategy::Seeded { seeds } => {
            let inputs = vec![None; instance.behaviors.len()];
            for seed in seeds.clone() {
                runs += 1;
                let r = run(&instance.behaviors, instance.t, &inputs, &Schedule::seeded(seed))?;
                if r.quiescent {
                    seen.insert(r.output_set.clone());
                }
            }
            true
        }
    };
    let missing: Vec<&OutputSet> = sos.sets().filter(|o| !seen.contains(o)).collect();
    if missing.is_empty() {
        Ok(CheckReport::passed(
            "completeness",
            runs,
            format!("all {} output sets produced", sos.len()),
        ))
    } else {
        let detail = format!(
            "missing output sets: {}",
            missing
                .iter()
                .map(|o| o.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        );
        Ok(CheckReport {
            name: "completeness".into(),
            outcome: if sampled {
                Outcome::Inconclusive
            } else {
                Outcome::Failed
            },
            runs_examined: runs,
            detail,
            counterexample: None,
        })
    }
}

/// Builds the crash-free lockstep schedule that drives every leader to break
/// at walk position `i`: for each earlier iteration all MOVEs reach all
/// leaders before their timeouts fire; at `i` every timeout fires first.
pub fn lockstep_witness_schedule(
    cfg: &Alg1Config,
    i: usize,
) -> Result<Vec<Decision>, HarnessError> {
    let len = cfg.walk.len();
    if i < 1 || i > len {
        return Err(HarnessError::PositionOutOfRange { i, len });
    }
    let mut decisions = Vec::new();
    for p in 1..=cfg.n {
        decisions.push(Decision::Start(ProcessId(p)));
    }
    for j in 1..i {
        // All MOVE(j+1) copies reach every leader in time.
        for sender in &cfg.leaders {
            for recipient in &cfg.leaders {
                decisions.push(Decision::Deliver {
                    recipient: *recipient,
                    sender: *sender,
                    info: Info::Move(j as u32 + 1),
                });
            }
        }
        for leader in &cfg.leaders {
            decisions.push(Decision::TimeoutResult {
                process: *leader,
                wait_id: j as u32 - 1,
                all_arrived: true,
            });
        }
    }
    // At position i the waits expire before any MOVE(i+1) arrives.
    for leader in &cfg.leaders {
        decisions.push(Decision::TimeoutResult {
            process: *leader,
            wait_id: i as u32 - 1,
            all_arrived: false,
        });
    }
    Ok(decisions)
}

/// One lockstep witness run per distinct walk vertex, paired with the vertex
/// it is meant to produce.
pub fn witness_runs(cfg: &Alg1Config) -> Result<Vec<(OutputSet, RunResult)>, HarnessError> {
    let instance = cfg.instance();
    let inputs = vec![None; cfg.n as usize];
    let mut out = Vec::new();
    for vertex in cfg.walk.distinct_vertices() {
        let i = cfg.walk.first_position(vertex).expect("vertex from walk");
        let schedule = Schedule::Explicit(lockstep_witness_schedule(cfg, i)?);
        let result = run(&instance.behaviors, cfg.t, &inputs, &schedule)?;
        out.push((vertex.clone(), result));
    }
    Ok(out)
}

/// The output sets settled by leaders in a run, as witnessed by correct
/// processes: sets from leader OUTPUTSET communicates that at least one
/// correct process observed. A crashed leader's unobserved communicate never
/// influences any output, so it does not count.
pub fn leaders_output_sets(result: &RunResult, leaders: &BTreeSet<ProcessId>) -> BTreeSet<OutputSet> {
    let mut communicated: BTreeSet<(ProcessId, &OutputSet)> = BTreeSet::new();
    for rec in &result.trace {
        if let TraceRecord::Communicate {
            process,
            info: Info::OutputSet(o),
        } = rec
        {
            if leaders.contains(process) {
                communicated.insert((*process, o));
            }
        }
    }
    let mut observed = BTreeSet::new();
    for rec in &result.trace {
        if let TraceRecord::Deliver {
            recipient,
            sender,
            info: Info::OutputSet(o),
        } = rec
        {
            if !result.crashed.contains(recipient) && communicated.contains(&(*sender, o)) {
                observed.insert(o.clone());
            }
        }
    }
    observed
}

/// Structure of the leaders' settled sets: nonempty, and either a single walk
/// vertex or a pair of consecutive walk steps.
pub fn settled_sets_consecutive(walk: &SosWalk, los: &BTreeSet<OutputSet>) -> bool {
    match los.len() {
        1 => {
            let only = los.iter().next().unwrap();
            walk.steps().contains(only)
        }
        2 => {
            let pair: Vec<&OutputSet> = los.iter().collect();
            walk.steps().windows(2).any(|w| {
                (&w[0] == pair[0] && &w[1] == pair[1]) || (&w[0] == pair[1] && &w[1] == pair[0])
            })
        }
        _ => false,
    }
}

/// Union rule: the run's output set is exactly the union of the leaders'
/// settled sets.
pub fn settled_union_rule(result: &RunResult, los: &BTreeSet<OutputSet>) -> bool {
    let union = los
        .iter()
        .fold(OutputSet::empty(), |acc, o| acc.union(o));
    result.output_set == union
}

/// All crash sets over `n` processes with at most `max` members.
pub fn crash_patterns_up_to(n: u32, max: u32) -> Vec<BTreeSet<ProcessId>> {
    let mut patterns: Vec<BTreeSet<ProcessId>> = vec![BTreeSet::new()];
    for _ in 0..max {
        let mut next = Vec::new();
        for pattern in &patterns {
            let start = pattern.iter().next_back().map(|p| p.0 + 1).unwrap_or(1);
            for p in start..=n {
                let mut grown = pattern.clone();
                grown.insert(ProcessId(p));
                next.push(grown);
            }
        }
        patterns.extend(next);
    }
    patterns.sort();
    patterns.dedup();
    patterns
}

fn validate_patterns(patterns: &[BTreeSet<ProcessId>], t: u32) -> Result<(), HarnessError> {
    for p in patterns {
        if p.len() as u32 > t {
            return Err(HarnessError::CrashPatternExceedsBudget { size: p.len(), t });
        }
    }
    Ok(())
}

/// How a sweep generates schedules.
#[derive(Debug, Clone)]
pub enum SweepSource {
    /// Every schedule and every crash choice, up to the state budget.
    Exhaustive { max_states: usize },
    /// Seeded schedules; each crash pattern is injected at seed-chosen points.
    Seeded { seeds: Range<u64> },
}

/// Runs safety (and the model properties, including replay) across crash
/// patterns. Crash points fall wherever the schedule source puts them.
pub fn sweep_crash_patterns(
    spec: &ProtocolSpec,
    patterns: &[BTreeSet<ProcessId>],
    source: &SweepSource,
) -> Result<CheckReport, HarnessError> {
    let instance = spec.instantiate()?;
    validate_patterns(patterns, instance.t)?;
    let sos = instance.sos.clone();
    let inputs = vec![None; instance.behaviors.len()];
    let mut runs = 0usize;
    let mut failure: Option<Counterexample> = None;
    let mut examine = |r: &RunResult| {
        runs += 1;
        if failure.is_some() {
            return;
        }
        if !r.quiescent {
            failure = Some(Counterexample {
                explanation: format!("non-quiescent run; blocked: {:?}", r.blocked),
                result: r.clone(),
            });
            return;
        }
        if !sos.contains(&r.output_set) {
            failure = Some(Counterexample {
                explanation: format!("output set {} is not in {}", r.output_set, sos),
                result: r.clone(),
            });
        }
    };
    match source {
        SweepSource::Exhaustive { max_states } => {
            let opts = EnumerateOptions {
                max_states: *max_states,
                crashes: CrashRule::Any,
            };
            enumerate_with(&instance.behaviors, instance.t, &inputs, &opts, &mut examine)?;
        }
        SweepSource::Seeded { seeds } => {
            for seed in seeds.clone() {
                for pattern in patterns {
                    let schedule = Schedule::Seeded {
                        seed: mix(seed, pattern.iter().map(|p| p.0 as u64).sum()),
                        crash_targets: pattern.clone(),
                    };
                    let r = run(&instance.behaviors, instance.t, &inputs, &schedule)?;
                    examine(&r);
                }
            }
        }
    }
    Ok(match failure {
        None => CheckReport::passed("crash-sweep", runs, "all runs quiescent and safe"),
        Some(ce) => CheckReport::failed("crash-sweep", runs, ce),
    })
}

/// Per-run checks a campaign can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Safety,
    Completeness,
    SettledStructure,
    UnionRule,
    /// Communication-model properties plus trace replay.
    Model,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Safety => "safety",
            CheckKind::Completeness => "completeness",
            CheckKind::SettledStructure => "settled-structure",
            CheckKind::UnionRule => "union-rule",
            CheckKind::Model => "model",
        }
    }
}

/// Where a campaign's runs come from.
#[derive(Debug, Clone)]
pub enum CampaignSchedules {
    /// One run per (seed, crash pattern) pair.
    Seeded { seeds: Range<u64> },
    /// Every schedule up to the state budget; crash decisions are explored
    /// whenever any crash pattern is requested.
    Exhaustive { max_states: usize },
}

/// A batch of runs with checks: protocol, schedule source, crash patterns.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub protocol: ProtocolSpec,
    pub schedules: CampaignSchedules,
    /// Crash patterns applied to each seed. Empty means crash-free only.
    pub crash_patterns: Vec<BTreeSet<ProcessId>>,
    pub checks: Vec<CheckKind>,
    pub completeness: Option<CompletenessStrategy>,
}

#[derive(Debug)]
pub struct CampaignReport {
    pub reports: Vec<CheckReport>,
    pub runs_examined: usize,
}

impl CampaignReport {
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(|r| r.is_passed())
    }
}

/// The per-run violations a campaign's checks can raise.
fn evaluate_run(
    result: &RunResult,
    checks: &[CheckKind],
    sos: &Sos,
    alg1: Option<&Alg1Config>,
    behaviors: &[crate::protocols::ProtocolBehavior],
) -> Vec<(CheckKind, Counterexample)> {
    let mut violations = Vec::new();
    let ce = |explanation: String| Counterexample {
        explanation,
        result: result.clone(),
    };
    if !result.quiescent {
        violations.push((
            CheckKind::Safety,
            ce(format!("non-quiescent run; blocked: {:?}", result.blocked)),
        ));
        return violations;
    }
    for check in checks {
        match check {
            CheckKind::Safety => {
                if !sos.contains(&result.output_set) {
                    violations.push((
                        CheckKind::Safety,
                        ce(format!("output set {} not in {}", result.output_set, sos)),
                    ));
                }
            }
            CheckKind::SettledStructure | CheckKind::UnionRule => {
                if let Some(cfg) = alg1 {
                    let los = leaders_output_sets(result, &cfg.leaders);
                    if *check == CheckKind::SettledStructure
                        && !settled_sets_consecutive(&cfg.walk, &los)
                    {
                        violations.push((
                            CheckKind::SettledStructure,
                            ce(format!("leaders settled on {los:?}")),
                        ));
                    }
                    if *check == CheckKind::UnionRule && !settled_union_rule(result, &los) {
                        violations.push((
                            CheckKind::UnionRule,
                            ce(format!(
                                "output set {} is not the union of {los:?}",
                                result.output_set
                            )),
                        ));
                    }
                }
            }
            CheckKind::Model => {
                if let Err(violation) = check_model_properties(result) {
                    violations.push((CheckKind::Model, ce(violation.to_string())));
                } else {
                    match replay(behaviors, result) {
                        Ok(replayed) if &replayed == result => {}
                        Ok(_) => violations.push((
                            CheckKind::Model,
                            ce("replay diverged from original run".into()),
                        )),
                        Err(e) => {
                            violations.push((CheckKind::Model, ce(format!("replay failed: {e}"))))
                        }
                    }
                }
            }
            CheckKind::Completeness => {}
        }
    }
    violations
}

/// Runs a campaign. For seeded schedules, `workers > 1` fans the
/// (seed × pattern) grid over that many threads; reports are merged in grid
/// order, so the outcome is identical to a sequential run.
pub fn run_campaign(campaign: &Campaign, workers: usize) -> Result<CampaignReport, HarnessError> {
    let instance = campaign.protocol.instantiate()?;
    validate_patterns(&campaign.crash_patterns, instance.t)?;
    let sos = instance.sos.clone();
    let alg1 = campaign.protocol.alg1_config();
    let inputs = vec![None; instance.behaviors.len()];

    let mut runs_examined = 0usize;
    let mut first_violation: Vec<(CheckKind, Counterexample)> = Vec::new();
    let mut record = |violations: Vec<(CheckKind, Counterexample)>| {
        for (kind, ce) in violations {
            if !first_violation.iter().any(|(k, _)| *k == kind) {
                first_violation.push((kind, ce));
            }
        }
    };

    match &campaign.schedules {
        CampaignSchedules::Seeded { seeds } => {
            let mut patterns = campaign.crash_patterns.clone();
            if patterns.is_empty() {
                patterns.push(BTreeSet::new());
            }
            let grid: Vec<(u64, BTreeSet<ProcessId>)> = seeds
                .clone()
                .flat_map(|seed| patterns.iter().cloned().map(move |p| (seed, p)))
                .collect();

            let run_unit = |&(seed, ref pattern): &(u64, BTreeSet<ProcessId>)| {
                let schedule = Schedule::Seeded {
                    seed: mix(seed, pattern.iter().map(|p| p.0 as u64).sum()),
                    crash_targets: pattern.clone(),
                };
                run(&instance.behaviors, instance.t, &inputs, &schedule).map(|result| {
                    evaluate_run(&result, &campaign.checks, &sos, alg1.as_ref(), &instance.behaviors)
                })
            };

            let outcomes: Vec<Result<Vec<(CheckKind, Counterexample)>, KernelError>> =
                if workers > 1 && grid.len() > 1 {
                    let chunk = grid.len().div_ceil(workers);
                    std::thread::scope(|scope| {
                        let handles: Vec<_> = grid
                            .chunks(chunk)
                            .map(|slice| {
                                scope.spawn(move || {
                                    slice.iter().map(run_unit).collect::<Vec<_>>()
                                })
                            })
                            .collect();
                        handles
                            .into_iter()
                            .flat_map(|h| h.join().expect("campaign worker panicked"))
                            .collect()
                    })
                } else {
                    grid.iter().map(run_unit).collect()
                };
            for outcome in outcomes {
                runs_examined += 1;
                record(outcome?);
            }
        }
        CampaignSchedules::Exhaustive { max_states } => {
            let opts = EnumerateOptions {
                max_states: *max_states,
                crashes: if campaign.crash_patterns.is_empty() {
                    CrashRule::None
                } else {
                    CrashRule::Any
                },
            };
            enumerate_with(&instance.behaviors, instance.t, &inputs, &opts, |result| {
                runs_examined += 1;
                record(evaluate_run(
                    result,
                    &campaign.checks,
                    &sos,
                    alg1.as_ref(),
                    &instance.behaviors,
                ));
            })?;
        }
    }

    let mut reports = Vec::new();
    for check in &campaign.checks {
        if *check == CheckKind::Completeness {
            let strategy = campaign.completeness.clone().unwrap_or_else(|| {
                match &campaign.schedules {
                    CampaignSchedules::Seeded { seeds } => CompletenessStrategy::Seeded {
                        seeds: seeds.clone(),
                    },
                    CampaignSchedules::Exhaustive { max_states } => {
                        CompletenessStrategy::Exhaustive {
                            max_states: *max_states,
                        }
                    }
                }
            });
            reports.push(check_completeness(&campaign.protocol, &strategy)?);
            continue;
        }
        let report = match first_violation.iter().find(|(k, _)| k == check) {
            Some((_, ce)) => CheckReport::failed(check.name(), runs_examined, ce.clone()),
            None => CheckReport::passed(check.name(), runs_examined, "no violation"),
        };
        reports.push(report);
    }
    Ok(CampaignReport {
        reports,
        runs_examined,
    })
}

// ---------------------------------------------------------------------------
// Campaign config files
// ---------------------------------------------------------------------------

const CAMPAIGN_HEADER: &str = "soslab-campaign v1";

/// Parses a campaign config: a `soslab-campaign v1` header line followed by
/// `key = value` lines. `#` starts a comment.
///
/// Keys: `protocol` (alg1|alg2|alg2-relaxed|alg3), `sos`, `n`, `t`, `d`,
/// `values`, `seeds` (`lo..hi`), `strategy` (`seeded` or
/// `exhaustive:<states>`), `crash-patterns` (`none`, `exhaustive:<k>`, or
/// `{p1},{p2,p3}` lists), `checks` (comma-separated check names),
/// `completeness` (`witness`, `exhaustive:<states>`, `seeded`).
pub fn parse_campaign(input: &str) -> Result<Campaign, ParseError> {
    let err = |line: usize, message: String| ParseError {
        line,
        col: 1,
        message,
    };
    let mut lines = input.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((i, raw)) => {
                let text = raw.trim();
                if text.is_empty() || text.starts_with('#') {
                    continue;
                }
                break (i + 1, text);
            }
            None => return Err(err(1, "empty campaign config".into())),
        }
    };
    if header.1 != CAMPAIGN_HEADER {
        return Err(err(
            header.0,
            format!("expected header '{CAMPAIGN_HEADER}', found '{}'", header.1),
        ));
    }

    let mut protocol_name = None;
    let mut sos = None;
    let mut n = None;
    let mut t = 0u32;
    let mut d = None;
    let mut values: Option<Vec<ValueId>> = None;
    let mut seeds = 0..1u64;
    let mut strategy: Option<(usize, String)> = None;
    let mut crash_patterns: Vec<BTreeSet<ProcessId>> = Vec::new();
    let mut checks = Vec::new();
    let mut completeness = None;

    for (i, raw) in lines {
        let lineno = i + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let (key, value) = text
            .split_once('=')
            .ok_or_else(|| err(lineno, format!("expected 'key = value', found '{text}'")))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "protocol" => protocol_name = Some((lineno, value.to_string())),
            "sos" => sos = Some(crate::text::parse_sos(value).map_err(|e| ParseError {
                line: lineno,
                col: e.col,
                message: e.message,
            })?),
            "n" => {
                n = Some(value.parse::<u32>().map_err(|_| {
                    err(lineno, format!("bad n '{value}'"))
                })?)
            }
            "t" => {
                t = value
                    .parse::<u32>()
                    .map_err(|_| err(lineno, format!("bad t '{value}'")))?
            }
            "d" => {
                d = Some(value.parse::<u32>().map_err(|_| {
                    err(lineno, format!("bad d '{value}'"))
                })?)
            }
            "values" => values = Some(crate::text::parse_value_list(value).map_err(|e| ParseError {
                line: lineno,
                col: e.col,
                message: e.message,
            })?),
            "seeds" => {
                let (lo, hi) = value
                    .split_once("..")
                    .ok_or_else(|| err(lineno, format!("expected 'lo..hi', found '{value}'")))?;
                let lo = lo.trim().parse::<u64>().map_err(|_| err(lineno, "bad seed range".into()))?;
                let hi = hi.trim().parse::<u64>().map_err(|_| err(lineno, "bad seed range".into()))?;
                seeds = lo..hi;
            }
            "strategy" => strategy = Some((lineno, value.to_string())),
            "crash-patterns" => {
                if value == "none" {
                    crash_patterns.clear();
                } else if let Some(k) = value.strip_prefix("exhaustive:") {
                    let k = k
                        .trim()
                        .parse::<u32>()
                        .map_err(|_| err(lineno, "bad crash pattern size".into()))?;
                    let n = n.ok_or_else(|| err(lineno, "n must be set before crash-patterns".into()))?;
                    crash_patterns = crash_patterns_up_to(n, k);
                } else {
                    for part in value.split("},") {
                        let part = part.trim().trim_start_matches('{').trim_end_matches('}');
                        let mut pattern = BTreeSet::new();
                        for tok in part.split(',').filter(|s| !s.trim().is_empty()) {
                            let tok = tok.trim();
                            let id = tok
                                .strip_prefix('p')
                                .and_then(|r| r.parse::<u32>().ok())
                                .ok_or_else(|| err(lineno, format!("bad process '{tok}'")))?;
                            pattern.insert(ProcessId(id));
                        }
                        crash_patterns.push(pattern);
                    }
                }
            }
            "checks" => {
                for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    checks.push(match name {
                        "safety" => CheckKind::Safety,
                        "completeness" => CheckKind::Completeness,
                        "settled-structure" => CheckKind::SettledStructure,
                        "union-rule" => CheckKind::UnionRule,
                        "model" => CheckKind::Model,
                        other => return Err(err(lineno, format!("unknown check '{other}'"))),
                    });
                }
            }
            "completeness" => {
                completeness = Some(if value == "witness" {
                    CompletenessStrategy::Witness
                } else if value == "seeded" {
                    CompletenessStrategy::Seeded { seeds: seeds.clone() }
                } else if let Some(states) = value.strip_prefix("exhaustive:") {
                    CompletenessStrategy::Exhaustive {
                        max_states: states
                            .trim()
                            .parse()
                            .map_err(|_| err(lineno, "bad state budget".into()))?,
                    }
                } else {
                    return Err(err(lineno, format!("unknown completeness strategy '{value}'")));
                });
            }
            other => return Err(err(lineno, format!("unknown key '{other}'"))),
        }
    }

    let (proto_line, name) =
        protocol_name.ok_or_else(|| err(1, "missing 'protocol' key".into()))?;
    let n = n.ok_or_else(|| err(proto_line, "missing 'n' key".into()))?;
    let protocol = match name.as_str() {
        "alg1" => ProtocolSpec::Alg1 {
            sos: sos.ok_or_else(|| err(proto_line, "alg1 needs 'sos'".into()))?,
            n,
            t,
        },
        "alg2" | "alg2-relaxed" => {
            let d = d.ok_or_else(|| err(proto_line, "alg2 needs 'd'".into()))?;
            let values =
                values.unwrap_or_else(|| (1..=d).map(ValueId).collect());
            ProtocolSpec::Alg2 {
                d,
                values,
                n,
                t,
                relaxed: name == "alg2-relaxed",
            }
        }
        "alg3" => ProtocolSpec::Alg3 {
            sos: sos.ok_or_else(|| err(proto_line, "alg3 needs 'sos'".into()))?,
            n,
        },
        other => return Err(err(proto_line, format!("unknown protocol '{other}'"))),
    };
    if checks.is_empty() {
        checks.push(CheckKind::Safety);
    }
    let schedules = match strategy {
        None => CampaignSchedules::Seeded { seeds },
        Some((line, text)) => {
            if text == "seeded" {
                CampaignSchedules::Seeded { seeds }
            } else if let Some(states) = text.strip_prefix("exhaustive:") {
                CampaignSchedules::Exhaustive {
                    max_states: states
                        .trim()
                        .parse()
                        .map_err(|_| err(line, "bad state budget".into()))?,
                }
            } else {
                return Err(err(line, format!("unknown strategy '{text}'")));
            }
        }
    };
    Ok(Campaign {
        protocol,
        schedules,
        crash_patterns,
        checks,
        completeness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sos::Sos;
    use crate::text::parse_sos;

    fn connected_example() -> Sos {
        parse_sos("{{1},{3},{1,2},{1,3},{2,3}}").unwrap()
    }

    fn alg1_spec() -> ProtocolSpec {
        ProtocolSpec::Alg1 {
            sos: connected_example(),
            n: 6,
            t: 1,
        }
    }

    #[test]
    fn safety_passes_on_real_run_and_fails_on_fabricated() {
        let spec = alg1_spec();
        let instance = spec.instantiate().unwrap();
        let r = run(
            &instance.behaviors,
            1,
            &vec![None; 6],
            &Schedule::seeded(1),
        )
        .unwrap();
        let report = check_safety(&r, &instance.sos).unwrap();
        assert!(report.is_passed());

        let mut fabricated = r.clone();
        fabricated.output_set = OutputSet::new([ValueId(42)]);
        let report = check_safety(&fabricated, &instance.sos).unwrap();
        assert_eq!(report.outcome, Outcome::Failed);
        assert!(report.counterexample.is_some());
    }

    /// A failed check's counterexample is a genuine run: replaying its trace
    /// reproduces it exactly.
    #[test]
    fn counterexamples_replay() {
        let spec = ProtocolSpec::Alg2 {
            d: 2,
            values: vec![ValueId(1), ValueId(2)],
            n: 3,
            t: 1,
            relaxed: false,
        };
        let instance = spec.instantiate().unwrap();
        let result = run(&instance.behaviors, 1, &vec![None; 3], &Schedule::seeded(3)).unwrap();
        // Judged against a foreign SOS, the genuine run fails safety.
        let foreign = parse_sos("{{9}}").unwrap();
        let report = check_safety(&result, &foreign).unwrap();
        assert_eq!(report.outcome, Outcome::Failed);
        let ce = report.counterexample.unwrap();
        let replayed = replay(&instance.behaviors, &ce.result).unwrap();
        assert_eq!(replayed, ce.result);
    }

    #[test]
    fn witness_schedule_settles_each_vertex() {
        let cfg = Alg1Config::new(&connected_example(), 6, 1).unwrap();
        let witnesses = witness_runs(&cfg).unwrap();
        assert_eq!(witnesses.len(), 5);
        for (vertex, result) in &witnesses {
            assert!(result.quiescent);
            assert_eq!(&result.output_set, vertex);
            let los = leaders_output_sets(result, &cfg.leaders);
            assert_eq!(los.len(), 1);
            assert_eq!(los.iter().next().unwrap(), vertex);
        }
    }

    /// Every walk position, including repeated vertices, yields a run whose
    /// leaders settle on exactly that step.
    #[test]
    fn witness_sound_at_every_position() {
        let cfg = Alg1Config::new(&connected_example(), 6, 1).unwrap();
        let instance = cfg.instance();
        for i in 1..=cfg.walk.len() {
            let schedule = Schedule::Explicit(lockstep_witness_schedule(&cfg, i).unwrap());
            let result = run(&instance.behaviors, 1, &vec![None; 6], &schedule).unwrap();
            assert!(result.quiescent);
            let los = leaders_output_sets(&result, &cfg.leaders);
            assert_eq!(los.len(), 1, "position {i}");
            assert_eq!(los.iter().next().unwrap(), cfg.walk.step(i), "position {i}");
            assert_eq!(&result.output_set, cfg.walk.step(i));
        }
    }

    #[test]
    fn witness_replay_is_stable() {
        let cfg = Alg1Config::new(&connected_example(), 6, 1).unwrap();
        let instance = cfg.instance();
        let schedule = lockstep_witness_schedule(&cfg, 3).unwrap();
        let a = run(
            &instance.behaviors,
            1,
            &vec![None; 6],
            &Schedule::Explicit(schedule),
        )
        .unwrap();
        let b = replay(&instance.behaviors, &a).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn witness_position_out_of_range() {
        let cfg = Alg1Config::new(&connected_example(), 6, 1).unwrap();
        assert!(matches!(
            lockstep_witness_schedule(&cfg, 0),
            Err(HarnessError::PositionOutOfRange { .. })
        ));
        assert!(matches!(
            lockstep_witness_schedule(&cfg, cfg.walk.len() + 1),
            Err(HarnessError::PositionOutOfRange { .. })
        ));
    }

    #[test]
    fn completeness_witness_passes() {
        let report = check_completeness(&alg1_spec(), &CompletenessStrategy::Witness).unwrap();
        assert!(report.is_passed(), "{}", report.detail);
        assert_eq!(report.runs_examined, 5);
    }

    #[test]
    fn completeness_exhaustive_on_choice_protocol() {
        let spec = ProtocolSpec::Alg3 {
            sos: parse_sos("{{0},{1}}").unwrap(),
            n: 1,
        };
        let report = check_completeness(
            &spec,
            &CompletenessStrategy::Exhaustive { max_states: 100_000 },
        )
        .unwrap();
        assert!(report.is_passed(), "{}", report.detail);
    }

    #[test]
    fn completeness_seeded_single_set_protocol() {
        let spec = ProtocolSpec::Alg2 {
            d: 2,
            values: vec![ValueId(1), ValueId(2)],
            n: 3,
            t: 1,
            relaxed: false,
        };
        let report =
            check_completeness(&spec, &CompletenessStrategy::Seeded { seeds: 0..5 }).unwrap();
        assert!(report.is_passed());
    }

    #[test]
    fn completeness_seeded_miss_is_inconclusive() {
        // Zero seeds examine nothing, so every output set is missing.
        let report =
            check_completeness(&alg1_spec(), &CompletenessStrategy::Seeded { seeds: 0..0 }).unwrap();
        assert_eq!(report.outcome, Outcome::Inconclusive);
    }

    #[test]
    fn witness_strategy_needs_walk_protocol() {
        let spec = ProtocolSpec::Alg3 {
            sos: parse_sos("{{0},{1}}").unwrap(),
            n: 1,
        };
        assert!(matches!(
            check_completeness(&spec, &CompletenessStrategy::Witness),
            Err(HarnessError::WitnessUnsupported)
        ));
    }

    #[test]
    fn crash_pattern_enumeration() {
        let patterns = crash_patterns_up_to(3, 1);
        assert_eq!(patterns.len(), 4); // {} {p1} {p2} {p3}
        let patterns = crash_patterns_up_to(3, 2);
        assert_eq!(patterns.len(), 7);
    }

    #[test]
    fn sweep_rejects_oversized_patterns() {
        let spec = alg1_spec();
        let patterns = crash_patterns_up_to(6, 2); // t = 1
        assert!(matches!(
            sweep_crash_patterns(&spec, &patterns, &SweepSource::Seeded { seeds: 0..1 }),
            Err(HarnessError::CrashPatternExceedsBudget { .. })
        ));
    }

    #[test]
    fn sweep_rejects_crashes_when_t_zero() {
        let spec = ProtocolSpec::Alg3 {
            sos: parse_sos("{{0},{1}}").unwrap(),
            n: 2,
        };
        let patterns = vec![[ProcessId(1)].into_iter().collect()];
        assert!(matches!(
            sweep_crash_patterns(&spec, &patterns, &SweepSource::Seeded { seeds: 0..1 }),
            Err(HarnessError::CrashPatternExceedsBudget { .. })
        ));
    }

    #[test]
    fn seeded_sweep_alg2_safe() {
        let spec = ProtocolSpec::Alg2 {
            d: 2,
            values: vec![ValueId(1), ValueId(2)],
            n: 3,
            t: 1,
            relaxed: false,
        };
        let patterns = crash_patterns_up_to(3, 1);
        let report =
            sweep_crash_patterns(&spec, &patterns, &SweepSource::Seeded { seeds: 0..20 }).unwrap();
        assert!(report.is_passed(), "{}", report.detail);
        assert_eq!(report.runs_examined, 20 * 4);
    }

    #[test]
    fn campaign_runs_checks_and_replays() {
        let campaign = Campaign {
            protocol: alg1_spec(),
            schedules: CampaignSchedules::Seeded { seeds: 0..30 },
            crash_patterns: crash_patterns_up_to(6, 1),
            checks: vec![
                CheckKind::Safety,
                CheckKind::SettledStructure,
                CheckKind::UnionRule,
                CheckKind::Model,
            ],
            completeness: None,
        };
        let report = run_campaign(&campaign, 1).unwrap();
        assert!(report.all_passed());
        assert_eq!(report.runs_examined, 30 * 7);
        // A worker pool must agree with the sequential run.
        let parallel = run_campaign(&campaign, 4).unwrap();
        assert!(parallel.all_passed());
        assert_eq!(parallel.runs_examined, report.runs_examined);
    }

    #[test]
    fn exhaustive_campaign_explores_all_schedules() {
        let campaign = Campaign {
            protocol: ProtocolSpec::Alg2 {
                d: 2,
                values: vec![ValueId(1), ValueId(2)],
                n: 3,
                t: 1,
                relaxed: false,
            },
            schedules: CampaignSchedules::Exhaustive {
                max_states: 2_000_000,
            },
            crash_patterns: crash_patterns_up_to(3, 1),
            checks: vec![CheckKind::Safety, CheckKind::Completeness],
            completeness: None,
        };
        let report = run_campaign(&campaign, 1).unwrap();
        assert!(report.all_passed());
        assert!(report.runs_examined > 1);
    }

    #[test]
    fn campaign_config_round_trip() {
        let text = "\
# walk protocol sweep
soslab-campaign v1
protocol = alg1
sos = {{1},{3},{1,2},{1,3},{2,3}}
n = 6
t = 1
seeds = 0..10
crash-patterns = exhaustive:1
checks = safety, settled-structure, union-rule, model
completeness = witness
";
        let campaign = parse_campaign(text).unwrap();
        assert!(matches!(
            &campaign.schedules,
            CampaignSchedules::Seeded { seeds } if *seeds == (0..10)
        ));
        assert_eq!(campaign.crash_patterns.len(), 7);
        assert_eq!(campaign.checks.len(), 4);
        let report = run_campaign(&campaign, 1).unwrap();
        assert!(report.all_passed());
    }

    #[test]
    fn campaign_config_errors_carry_lines() {
        assert!(parse_campaign("").is_err());
        assert!(parse_campaign("not a header\n").is_err());
        let err = parse_campaign("soslab-campaign v1\nprotocol = alg1\nbogus = 1\n").unwrap_err();
        assert_eq!(err.line, 3);
    }
}
