//! Explicit state-graph analysis: SOS valence, the asynchrony / termination /
//! resilience axioms, critical-state detection, and extraction of state
//! graphs from exhaustive simulation.
//!
//! A state is a finite set of abstract events; the graph is ordered by set
//! inclusion. Output states carry the output sets they produce; the valence of
//! any other state is the union of the valences of all its strict supersets.
//! State identity is the event set alone, so interleavings that differ only in
//! order collapse into one state, and plain events are told apart only by
//! per-process indices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::kernel::{Behavior, CrashRule, Decision, EnumerateError, ProcessId, RunState};
use crate::sos::{build_sos_graph, is_connected, OutputSet, Sos, ValueId};
use crate::text::ParseError;

/// What an abstract event did, beyond advancing its process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Plain,
    Input(ValueId),
    Output(ValueId),
}

/// An action of one process. The index separates events of the same process
/// whose order can swap across executions; it is the only identity plain
/// events have.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbstractEvent {
    pub process: ProcessId,
    pub index: u32,
    pub kind: EventKind,
}

impl fmt::Display for AbstractEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.process, self.index)?;
        match self.kind {
            EventKind::Plain => Ok(()),
            EventKind::Input(v) => write!(f, ".in({v})"),
            EventKind::Output(v) => write!(f, ".out({v})"),
        }
    }
}

pub type AbstractState = BTreeSet<AbstractEvent>;

/// An explicit (states, output-states) pair, with states addressed by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateGraph {
    /// Sorted by (size, contents); deduplicated.
    states: Vec<AbstractState>,
    output: Vec<bool>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValenceError {
    #[error("state {state} has an empty valence; the graph is malformed (a maximal state is not an output state)")]
    EmptyValence { state: usize },
    #[error("no such state")]
    NoSuchState,
}

/// Axiom check outcome; `witness` is a state id when the axiom fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxiomResult {
    pub holds: bool,
    pub witness: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxiomReport {
    /// Two single-event extensions by distinct processes always have their
    /// joint extension (the diamond property).
    pub asynchrony: AxiomResult,
    /// All states finite; structural here, reported with the largest size.
    pub termination: AxiomResult,
    pub max_state_size: usize,
    /// Every non-output state extends by at least two distinct processes.
    pub resilience: AxiomResult,
}

impl StateGraph {
    pub fn new(states: impl IntoIterator<Item = (AbstractState, bool)>) -> Self {
        let mut merged: BTreeMap<AbstractState, bool> = BTreeMap::new();
        for (state, output) in states {
            *merged.entry(state).or_default() |= output;
        }
        let mut pairs: Vec<(AbstractState, bool)> = merged.into_iter().collect();
        pairs.sort_by(|a, b| (a.0.len(), &a.0).cmp(&(b.0.len(), &b.0)));
        let (states, output) = pairs.into_iter().unzip();
        Self { states, output }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, id: usize) -> &AbstractState {
        &self.states[id]
    }

    pub fn is_output(&self, id: usize) -> bool {
        self.output[id]
    }

    pub fn states(&self) -> impl Iterator<Item = (usize, &AbstractState)> {
        self.states.iter().enumerate()
    }

    pub fn find(&self, state: &AbstractState) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    /// Input states: the minimal states (no strict subset present).
    pub fn input_states(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                !(0..self.len()).any(|j| j != i && self.states[j].is_subset(&self.states[i]))
            })
            .collect()
    }

    /// Ids of states that strictly extend `id`.
    fn strict_supersets(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        let me = &self.states[id];
        (0..self.len()).filter(move |&j| {
            self.states[j].len() > me.len() && me.is_subset(&self.states[j])
        })
    }

    /// Graph well-formedness: every maximal state must be an output state.
    /// Returns the offending state ids.
    pub fn malformed_maximal_states(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| !self.output[i] && self.strict_supersets(i).next().is_none())
            .collect()
    }

    /// The output set an output state produces.
    pub fn output_set_of(&self, id: usize) -> OutputSet {
        self.states[id]
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Output(v) => Some(v),
                _ => None,
            })
            .collect()
    }

    /// SOS valence of every state: output states produce the singleton of
    /// their output set; any other state unions the valences of all its
    /// strict supersets. Memoized by decreasing state size.
    pub fn valences(&self) -> Vec<BTreeSet<OutputSet>> {
        let mut valences: Vec<BTreeSet<OutputSet>> = vec![BTreeSet::new(); self.len()];
        // states are sorted by size, so walking backwards sees supersets first
        for id in (0..self.len()).rev() {
            if self.output[id] {
                valences[id].insert(self.output_set_of(id));
            } else {
                let mut union = BTreeSet::new();
                for sup in self.strict_supersets(id) {
                    union.extend(valences[sup].iter().cloned());
                }
                valences[id] = union;
            }
        }
        valences
    }

    /// SOS valence of one state, as a task SOS. Errors when the graph is
    /// malformed and the valence comes out empty.
    pub fn compute_valence(&self, id: usize) -> Result<Sos, ValenceError> {
        if id >= self.len() {
            return Err(ValenceError::NoSuchState);
        }
        let valence = self.valences().swap_remove(id);
        Sos::new(valence).map_err(|_| ValenceError::EmptyValence { state: id })
    }

    /// States whose valence has a disconnected SOS graph.
    pub fn disconnected_states(&self) -> Vec<usize> {
        let valences = self.valences();
        (0..self.len())
            .filter(|&i| !valence_connected(&valences[i]))
            .collect()
    }

    /// Disconnected states all of whose strict extensions are connected: the
    /// places where one more event commits the run to a component.
    pub fn find_critical_states(&self) -> Vec<usize> {
        let valences = self.valences();
        (0..self.len())
            .filter(|&i| {
                !valence_connected(&valences[i])
                    && self.strict_supersets(i).all(|j| valence_connected(&valences[j]))
            })
            .collect()
    }

    /// Single-event extensions of each state, as (event, extension id) pairs.
    fn extensions(&self) -> Vec<Vec<(AbstractEvent, usize)>> {
        let mut by_size: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.states.iter().enumerate() {
            by_size.entry(s.len()).or_default().push(i);
        }
        let mut out = vec![Vec::new(); self.len()];
        for (i, s) in self.states.iter().enumerate() {
            if let Some(bigger) = by_size.get(&(s.len() + 1)) {
                for &j in bigger {
                    if s.is_subset(&self.states[j]) {
                        let event = *self.states[j]
                            .difference(s)
                            .next()
                            .expect("size difference of one");
                        out[i].push((event, j));
                    }
                }
            }
        }
        out
    }

    pub fn check_axioms(&self) -> AxiomReport {
        let index: BTreeMap<&AbstractState, usize> =
            self.states.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let extensions = self.extensions();

        let mut asynchrony = AxiomResult {
            holds: true,
            witness: None,
        };
        'async_check: for (i, exts) in extensions.iter().enumerate() {
            for (a, &(e1, _)) in exts.iter().enumerate() {
                for &(e2, _) in exts.iter().skip(a + 1) {
                    if e1.process == e2.process {
                        continue;
                    }
                    let mut joint = self.states[i].clone();
                    joint.insert(e1);
                    joint.insert(e2);
                    if !index.contains_key(&joint) {
                        asynchrony = AxiomResult {
                            holds: false,
                            witness: Some(i),
                        };
                        break 'async_check;
                    }
                }
            }
        }

        let max_state_size = self.states.iter().map(|s| s.len()).max().unwrap_or(0);
        let termination = AxiomResult {
            holds: true,
            witness: None,
        };

        let mut resilience = AxiomResult {
            holds: true,
            witness: None,
        };
        for (i, exts) in extensions.iter().enumerate() {
            if self.output[i] {
                continue;
            }
            let processes: BTreeSet<ProcessId> = exts.iter().map(|(e, _)| e.process).collect();
            if processes.len() < 2 {
                resilience = AxiomResult {
                    holds: false,
                    witness: Some(i),
                };
                break;
            }
        }

        AxiomReport {
            asynchrony,
            termination,
            max_state_size,
            resilience,
        }
    }

    /// Line-delimited text form: a header, then one `state <id> events [...]
    /// output <bool>` record per state.
    pub fn format(&self) -> String {
        let mut out = String::from("soslab-stategraph v1\n");
        for (i, s) in self.states.iter().enumerate() {
            let events: Vec<String> = s.iter().map(|e| e.to_string()).collect();
            out.push_str(&format!(
                "state {i} events [{}] output {}\n",
                events.join(" "),
                self.output[i]
            ));
        }
        out
    }

    pub fn parse(input: &str) -> Result<Self, ParseError> {
        let err = |line: usize, message: String| ParseError {
            line,
            col: 1,
            message,
        };
        let mut lines = input.lines().enumerate();
        loop {
            match lines.next() {
                Some((i, raw)) => {
                    let text = raw.trim();
                    if text.is_empty() || text.starts_with('#') {
                        continue;
                    }
                    if text != "soslab-stategraph v1" {
                        return Err(err(
                            i + 1,
                            format!("expected header 'soslab-stategraph v1', found '{text}'"),
                        ));
                    }
                    break;
                }
                None => return Err(err(1, "empty state graph".into())),
            }
        }
        let mut states = Vec::new();
        for (i, raw) in lines {
            let lineno = i + 1;
            let text = raw.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let rest = text
                .strip_prefix("state")
                .ok_or_else(|| err(lineno, format!("expected 'state', found '{text}'")))?
                .trim_start();
            let (_, rest) = rest
                .split_once(char::is_whitespace)
                .ok_or_else(|| err(lineno, "missing state id".into()))?;
            let rest = rest
                .trim_start()
                .strip_prefix("events")
                .ok_or_else(|| err(lineno, "missing 'events'".into()))?
                .trim_start();
            let open = rest
                .strip_prefix('[')
                .ok_or_else(|| err(lineno, "missing '['".into()))?;
            let (events_text, rest) = open
                .split_once(']')
                .ok_or_else(|| err(lineno, "missing ']'".into()))?;
            let mut events = BTreeSet::new();
            for tok in events_text.split_whitespace() {
                events.insert(parse_event(tok, lineno)?);
            }
            let output = match rest
                .trim_start()
                .strip_prefix("output")
                .map(str::trim)
            {
                Some("true") => true,
                Some("false") => false,
                _ => return Err(err(lineno, "missing 'output true|false'".into())),
            };
            states.push((events, output));
        }
        Ok(Self::new(states))
    }
}

fn parse_event(tok: &str, line: usize) -> Result<AbstractEvent, ParseError> {
    let err = |message: String| ParseError {
        line,
        col: 1,
        message,
    };
    let mut parts = tok.splitn(3, '.');
    let process = parts
        .next()
        .and_then(|p| p.strip_prefix('p'))
        .and_then(|p| p.parse::<u32>().ok())
        .filter(|p| *p >= 1)
        .map(ProcessId)
        .ok_or_else(|| err(format!("bad event '{tok}'")))?;
    let index = parts
        .next()
        .and_then(|i| i.parse::<u32>().ok())
        .ok_or_else(|| err(format!("bad event index in '{tok}'")))?;
    let kind = match parts.next() {
        None => EventKind::Plain,
        Some(k) => {
            let (name, payload) = k
                .split_once('(')
                .and_then(|(n, rest)| rest.strip_suffix(')').map(|p| (n, p)))
                .ok_or_else(|| err(format!("bad event kind in '{tok}'")))?;
            let value = payload
                .parse::<u32>()
                .map(ValueId)
                .map_err(|_| err(format!("bad event value in '{tok}'")))?;
            match name {
                "in" => EventKind::Input(value),
                "out" => EventKind::Output(value),
                _ => return Err(err(format!("bad event kind in '{tok}'"))),
            }
        }
    };
    Ok(AbstractEvent {
        process,
        index,
        kind,
    })
}

/// Connectivity of a valence's inclusion graph; the empty valence counts as
/// connected (degenerate case).
fn valence_connected(valence: &BTreeSet<OutputSet>) -> bool {
    match Sos::new(valence.iter().cloned()) {
        Ok(sos) => is_connected(&build_sos_graph(&sos)),
        Err(_) => true,
    }
}

/// Everything the valence analysis reports about a graph.
#[derive(Debug)]
pub struct ValenceReport {
    pub valences: Vec<BTreeSet<OutputSet>>,
    pub disconnected_states: Vec<usize>,
    pub critical_states: Vec<usize>,
    pub axioms: AxiomReport,
    pub malformed_maximal: Vec<usize>,
}

pub fn analyze(graph: &StateGraph) -> ValenceReport {
    ValenceReport {
        valences: graph.valences(),
        disconnected_states: graph.disconnected_states(),
        critical_states: graph.find_critical_states(),
        axioms: graph.check_axioms(),
        malformed_maximal: graph.malformed_maximal_states(),
    }
}

/// Extracts the state graph of a protocol by exhaustive crash-free schedule
/// exploration: every reachable prefix contributes the set of events it has
/// performed; a state is an output state when every process has exited there.
///
/// Per-process event indices count that process's decisions, so a delivery
/// swapped with a timeout yields distinct events, while cross-process
/// interleavings of the same decisions merge.
pub fn extract_state_graph<B: Behavior>(
    behaviors: &[B],
    inputs: &[Option<ValueId>],
    max_states: usize,
) -> Result<StateGraph, EnumerateError> {
    let root_state = RunState::new(behaviors.to_vec(), 0, inputs)?;
    let root_events: AbstractState = inputs
        .iter()
        .enumerate()
        .filter_map(|(i, v)| {
            v.map(|v| AbstractEvent {
                process: ProcessId::from_index(i),
                index: 0,
                kind: EventKind::Input(v),
            })
        })
        .collect();

    struct Extract {
        max_states: usize,
        expanded: usize,
        seen: std::collections::HashSet<(u128, Vec<u32>)>,
        states: Vec<(AbstractState, bool)>,
    }

    impl Extract {
        fn explore<B: Behavior>(
            &mut self,
            kernel: RunState<B>,
            events: AbstractState,
            counts: Vec<u32>,
        ) -> Result<(), EnumerateError> {
            self.expanded += 1;
            if self.expanded > self.max_states {
                return Err(EnumerateError::BudgetExceeded {
                    limit: self.max_states,
                });
            }
            let all_exited =
                (1..=kernel.n()).all(|p| kernel.has_exited(crate::kernel::ProcessId(p)));
            self.states.push((events.clone(), all_exited));
            for d in kernel.enabled_decisions(&CrashRule::None) {
                let p = d.process();
                let kind = match &d {
                    Decision::ReleaseOutput(p) => EventKind::Output(
                        kernel.output_intent(*p).expect("release implies intent"),
                    ),
                    _ => EventKind::Plain,
                };
                let mut child = kernel.clone();
                child.step(&d)?;
                let mut child_counts = counts.clone();
                child_counts[p.index()] += 1;
                if self
                    .seen
                    .insert((child.fingerprint(), child_counts.clone()))
                {
                    let mut child_events = events.clone();
                    child_events.insert(AbstractEvent {
                        process: p,
                        index: child_counts[p.index()],
                        kind,
                    });
                    self.explore(child, child_events, child_counts)?;
                }
            }
            Ok(())
        }
    }

    let mut extract = Extract {
        max_states,
        expanded: 0,
        seen: std::collections::HashSet::new(),
        states: Vec::new(),
    };
    let counts = vec![0u32; behaviors.len()];
    extract
        .seen
        .insert((root_state.fingerprint(), counts.clone()));
    extract.explore(root_state, root_events, counts)?;
    Ok(StateGraph::new(extract.states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::Alg3Config;
    use crate::text::parse_sos;

    fn ev(p: u32, i: u32) -> AbstractEvent {
        AbstractEvent {
            process: ProcessId(p),
            index: i,
            kind: EventKind::Plain,
        }
    }

    fn out_ev(p: u32, i: u32, v: u32) -> AbstractEvent {
        AbstractEvent {
            process: ProcessId(p),
            index: i,
            kind: EventKind::Output(ValueId(v)),
        }
    }

    fn os(values: &[u32]) -> OutputSet {
        values.iter().map(|&v| ValueId(v)).collect()
    }

    /// Root, one intermediate, and two output leaves producing {0} and {1}.
    fn four_state_graph() -> StateGraph {
        let root: AbstractState = BTreeSet::new();
        let mid: AbstractState = [ev(1, 1)].into_iter().collect();
        let leaf0: AbstractState = [ev(1, 1), out_ev(1, 2, 0)].into_iter().collect();
        let leaf1: AbstractState = [ev(1, 1), out_ev(2, 1, 1)].into_iter().collect();
        StateGraph::new([
            (root, false),
            (mid, false),
            (leaf0, true),
            (leaf1, true),
        ])
    }

    #[test]
    fn hand_enumerated_valences() {
        let g = four_state_graph();
        let valences = g.valences();
        let root = g.find(&BTreeSet::new()).unwrap();
        let expected: BTreeSet<OutputSet> = [os(&[0]), os(&[1])].into_iter().collect();
        assert_eq!(valences[root], expected);
        let mid = g.find(&[ev(1, 1)].into_iter().collect()).unwrap();
        assert_eq!(valences[mid], expected);
        // Output leaves hold just their own output set.
        let leaf0 = g
            .find(&[ev(1, 1), out_ev(1, 2, 0)].into_iter().collect())
            .unwrap();
        assert_eq!(
            valences[leaf0],
            [os(&[0])].into_iter().collect::<BTreeSet<_>>()
        );
        assert_eq!(
            g.compute_valence(root).unwrap(),
            Sos::new([os(&[0]), os(&[1])]).unwrap()
        );
    }

    #[test]
    fn critical_state_is_the_deepest_disconnected() {
        let g = four_state_graph();
        let mid = g.find(&[ev(1, 1)].into_iter().collect()).unwrap();
        let root = g.find(&BTreeSet::new()).unwrap();
        let disconnected = g.disconnected_states();
        assert!(disconnected.contains(&root));
        assert!(disconnected.contains(&mid));
        assert_eq!(g.find_critical_states(), vec![mid]);
    }

    /// A root whose direct children are output states for {0} and {1} is
    /// itself critical: disconnected, with only connected extensions.
    #[test]
    fn root_with_output_children_is_critical() {
        let root: AbstractState = BTreeSet::new();
        let left: AbstractState = [out_ev(1, 1, 0)].into_iter().collect();
        let right: AbstractState = [out_ev(2, 1, 1)].into_iter().collect();
        let g = StateGraph::new([(root.clone(), false), (left, true), (right, true)]);
        let root_id = g.find(&root).unwrap();
        assert_eq!(g.find_critical_states(), vec![root_id]);
    }

    #[test]
    fn all_connected_graph_has_no_critical_states() {
        let root: AbstractState = BTreeSet::new();
        let leaf: AbstractState = [out_ev(1, 1, 3)].into_iter().collect();
        let g = StateGraph::new([(root, false), (leaf, true)]);
        assert!(g.disconnected_states().is_empty());
        assert!(g.find_critical_states().is_empty());
    }

    #[test]
    fn diamond_violation_detected_with_witness() {
        // The two leaves extend the root by events of distinct processes, but
        // their union state is missing.
        let g = four_state_graph();
        let report = g.check_axioms();
        assert!(!report.asynchrony.holds);
        let mid = g.find(&[ev(1, 1)].into_iter().collect()).unwrap();
        assert_eq!(report.asynchrony.witness, Some(mid));
        assert!(report.termination.holds);
    }

    #[test]
    fn resilience_fails_on_single_extender() {
        let root: AbstractState = BTreeSet::new();
        let leaf: AbstractState = [out_ev(1, 1, 0)].into_iter().collect();
        let g = StateGraph::new([(root, false), (leaf, true)]);
        let report = g.check_axioms();
        assert!(!report.resilience.holds);
        assert_eq!(report.resilience.witness, Some(0));
    }

    #[test]
    fn extraction_of_binary_choice_protocol() {
        let sos = parse_sos("{{0},{1}}").unwrap();
        let cfg = Alg3Config::new(&sos, 1, 0).unwrap();
        let g = extract_state_graph(&cfg.instance().behaviors, &[None], 100_000).unwrap();
        assert!(g.malformed_maximal_states().is_empty());

        let inputs = g.input_states();
        assert_eq!(inputs.len(), 1);
        let valences = g.valences();
        let expected: BTreeSet<OutputSet> = [os(&[0]), os(&[1])].into_iter().collect();
        assert_eq!(valences[inputs[0]], expected);

        // Every state has a nonempty valence; monotone along inclusion;
        // disconnected states are never output states.
        for (i, _) in g.states() {
            assert!(!valences[i].is_empty());
        }
        for (i, si) in g.states() {
            for (j, sj) in g.states() {
                if i != j && si.is_subset(sj) {
                    assert!(valences[j].is_subset(&valences[i]));
                }
            }
        }
        for &i in &g.disconnected_states() {
            assert!(!g.is_output(i));
            // A disconnected valence never contains the empty output set.
            assert!(valences[i].iter().all(|o| !o.is_empty()));
            // Any connected valence inside a disconnected one sits within a
            // single component of the latter's inclusion graph.
            let sos = Sos::new(valences[i].iter().cloned()).unwrap();
            let graph = build_sos_graph(&sos);
            let components = graph.components();
            for (j, sj) in g.states() {
                if j == i || !g.state(i).is_subset(sj) {
                    continue;
                }
                if !valence_connected(&valences[j]) {
                    continue;
                }
                let hosts = components
                    .iter()
                    .filter(|component| {
                        valences[j].iter().all(|o| {
                            component.iter().any(|&v| graph.vertex(v) == o)
                        })
                    })
                    .count();
                assert!(hosts >= 1, "connected valence of {j} straddles components of {i}");
            }
        }
        assert!(!g.find_critical_states().is_empty());

        // Single process: the resilience axiom cannot hold.
        let report = g.check_axioms();
        assert!(!report.resilience.holds);
    }

    #[test]
    fn constant_protocol_valences_are_fixed() {
        use crate::protocols::ProtocolBehavior;
        let behaviors = vec![ProtocolBehavior::ConstOutput {
            value: ValueId(4),
            phase: 0,
        }];
        let g = extract_state_graph(&behaviors, &[None], 10_000).unwrap();
        let valences = g.valences();
        let singleton: BTreeSet<OutputSet> = [os(&[4])].into_iter().collect();
        for (i, _) in g.states() {
            assert_eq!(valences[i], singleton);
        }
    }

    #[test]
    fn text_form_round_trips() {
        let g = four_state_graph();
        let text = g.format();
        let parsed = StateGraph::parse(&text).unwrap();
        assert_eq!(parsed, g);
    }

    #[test]
    fn parse_rejects_malformed() {
        assert!(StateGraph::parse("").is_err());
        assert!(StateGraph::parse("wrong header\n").is_err());
        assert!(StateGraph::parse("soslab-stategraph v1\nstate 0 events [p1.x] output false\n").is_err());
        assert!(StateGraph::parse("soslab-stategraph v1\nstate 0 events [p1.1] output maybe\n").is_err());
    }

    #[test]
    fn input_events_form_the_root() {
        use crate::protocols::ProtocolBehavior;
        let behaviors = vec![ProtocolBehavior::ConstOutput {
            value: ValueId(1),
            phase: 0,
        }];
        let g = extract_state_graph(&behaviors, &[Some(ValueId(9))], 10_000).unwrap();
        let inputs = g.input_states();
        assert_eq!(inputs.len(), 1);
        let root = g.state(inputs[0]);
        assert_eq!(root.len(), 1);
        assert!(matches!(
            root.iter().next().unwrap().kind,
            EventKind::Input(ValueId(9))
        ));
    }
}
