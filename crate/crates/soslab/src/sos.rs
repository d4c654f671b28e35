//! The SOS task data model: output sets, the inclusion graph over them, covering
//! walks, the solvability decision rule, and the d-disagreement bound formulas.
//!
//! All types are immutable values with a canonical order (values ascending,
//! output sets by size then contents), so graphs, walks and traces come out
//! identical across runs.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// A value from the (finite, per-scenario) universe of output values.
///
/// The "no value" sentinel is not representable here; output vectors use
/// `Option<ValueId>` for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ValueId(pub u32);

impl fmt::Display for ValueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A finite set of output values. May be empty: a run in which no process
/// outputs has output set `{}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct OutputSet {
    values: BTreeSet<ValueId>,
}

impl OutputSet {
    pub fn new(values: impl IntoIterator<Item = ValueId>) -> Self {
        Self {
            values: values.into_iter().collect(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Output set of an output vector: the distinct non-sentinel values.
    pub fn of_vector(vector: &[Option<ValueId>]) -> Self {
        Self {
            values: vector.iter().flatten().copied().collect(),
        }
    }

    pub fn contains(&self, v: ValueId) -> bool {
        self.values.contains(&v)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ValueId> + '_ {
        self.values.iter().copied()
    }

    /// Strict inclusion in either direction is what makes two output sets
    /// compatible (adjacent in the SOS graph).
    pub fn strictly_includes(&self, other: &OutputSet) -> bool {
        self.values.len() > other.values.len() && self.values.is_superset(&other.values)
    }

    pub fn is_subset(&self, other: &OutputSet) -> bool {
        self.values.is_subset(&other.values)
    }

    pub fn union(&self, other: &OutputSet) -> OutputSet {
        OutputSet {
            values: self.values.union(&other.values).copied().collect(),
        }
    }

    /// Value at 1-based rank `r` in ascending order.
    pub fn rank(&self, r: usize) -> Option<ValueId> {
        self.values.iter().nth(r.checked_sub(1)?).copied()
    }
}

impl FromIterator<ValueId> for OutputSet {
    fn from_iter<T: IntoIterator<Item = ValueId>>(iter: T) -> Self {
        Self::new(iter)
    }
}

/// Canonical order: by size first, then lexicographically by contents.
impl Ord for OutputSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.values
            .len()
            .cmp(&other.values.len())
            .then_with(|| self.values.cmp(&other.values))
    }
}

impl PartialOrd for OutputSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for OutputSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

/// A set of output sets: the object that defines an SOS task. Non-empty by
/// construction (it may contain the empty output set).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sos {
    sets: BTreeSet<OutputSet>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SosError {
    #[error("an SOS must contain at least one output set")]
    Empty,
}

impl Sos {
    pub fn new(sets: impl IntoIterator<Item = OutputSet>) -> Result<Self, SosError> {
        let sets: BTreeSet<OutputSet> = sets.into_iter().collect();
        if sets.is_empty() {
            return Err(SosError::Empty);
        }
        Ok(Self { sets })
    }

    /// The single output set `{}`: the task solved by doing nothing.
    pub fn trivial() -> Self {
        Self {
            sets: [OutputSet::empty()].into_iter().collect(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.sets.len() == 1 && self.sets.iter().next().unwrap().is_empty()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, o: &OutputSet) -> bool {
        self.sets.contains(o)
    }

    /// Output sets in canonical order.
    pub fn sets(&self) -> impl Iterator<Item = &OutputSet> + '_ {
        self.sets.iter()
    }

    /// The union of all output sets: every value the task can ever produce.
    pub fn values(&self) -> BTreeSet<ValueId> {
        self.sets.iter().flat_map(|o| o.iter()).collect()
    }

    /// Size of the largest output set.
    pub fn max_set_len(&self) -> usize {
        self.sets.iter().map(|o| o.len()).max().unwrap_or(0)
    }
}

impl fmt::Display for Sos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, o) in self.sets.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{o}")?;
        }
        write!(f, "}}")
    }
}

/// The inclusion graph over an SOS: vertices are output sets, an edge joins two
/// sets whenever one strictly includes the other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SosGraph {
    vertices: Vec<OutputSet>,
    adjacency: Vec<BTreeSet<usize>>,
}

impl SosGraph {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[OutputSet] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &OutputSet {
        &self.vertices[i]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].contains(&j)
    }

    /// Edges as `(i, j)` index pairs with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            for &j in nbrs {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Connected components as sorted vertex-index lists, ordered by their
    /// smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.vertices.len();
        let mut seen = vec![false; n];
        let mut components = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut component = Vec::new();
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                component.push(v);
                for &w in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            component.sort_unstable();
            components.push(component);
        }
        components
    }
}

/// Builds the SOS graph of `o`, with vertices in canonical order.
pub fn build_sos_graph(o: &Sos) -> SosGraph {
    let vertices: Vec<OutputSet> = o.sets().cloned().collect();
    let mut adjacency = vec![BTreeSet::new(); vertices.len()];
    for i in 0..vertices.len() {
        for j in (i + 1)..vertices.len() {
            let (a, b) = (&vertices[i], &vertices[j]);
            if a.strictly_includes(b) || b.strictly_includes(a) {
                adjacency[i].insert(j);
                adjacency[j].insert(i);
            }
        }
    }
    SosGraph {
        vertices,
        adjacency,
    }
}

/// True iff every vertex is reachable from every other. Graphs with at most
/// one vertex count as connected.
pub fn is_connected(g: &SosGraph) -> bool {
    g.components().len() <= 1
}

/// Why a task was judged solvable or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictReason {
    ZeroCrashes,
    ConnectedGraph,
    DisconnectedGraph,
    TrivialEmptySos,
}

impl fmt::Display for VerdictReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VerdictReason::ZeroCrashes => "zero-crashes",
            VerdictReason::ConnectedGraph => "connected-graph",
            VerdictReason::DisconnectedGraph => "disconnected-graph",
            VerdictReason::TrivialEmptySos => "trivial-empty-sos",
        };
        f.write_str(s)
    }
}

/// Result of the solvability decision rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub solvable: bool,
    pub reason: VerdictReason,
    /// Connected components of the SOS graph, as output sets.
    pub components: Vec<Vec<OutputSet>>,
}

/// Decision rule: solvable iff `t = 0` or the SOS graph is connected. The
/// degenerate SOS `{{}}` is solvable for every `t`.
pub fn decide_solvability(o: &Sos, t: u32) -> Verdict {
    let graph = build_sos_graph(o);
    let components: Vec<Vec<OutputSet>> = graph
        .components()
        .into_iter()
        .map(|c| c.into_iter().map(|i| graph.vertex(i).clone()).collect())
        .collect();
    if o.is_trivial() {
        return Verdict {
            solvable: true,
            reason: VerdictReason::TrivialEmptySos,
            components,
        };
    }
    if t == 0 {
        return Verdict {
            solvable: true,
            reason: VerdictReason::ZeroCrashes,
            components,
        };
    }
    let connected = components.len() <= 1;
    Verdict {
        solvable: connected,
        reason: if connected {
            VerdictReason::ConnectedGraph
        } else {
            VerdictReason::DisconnectedGraph
        },
        components,
    }
}

/// A finite walk through an SOS graph that visits every vertex at least once.
/// Consecutive steps are adjacent; length is at most `2·|vertices| − 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SosWalk {
    steps: Vec<OutputSet>,
}

impl SosWalk {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[OutputSet] {
        &self.steps
    }

    /// 1-based step access, matching walk positions `o_1 .. o_len`.
    pub fn step(&self, i: usize) -> &OutputSet {
        &self.steps[i - 1]
    }

    /// Distinct vertices in order of first appearance.
    pub fn distinct_vertices(&self) -> Vec<&OutputSet> {
        let mut seen: BTreeSet<&OutputSet> = BTreeSet::new();
        let mut out = Vec::new();
        for o in &self.steps {
            if seen.insert(o) {
                out.push(o);
            }
        }
        out
    }

    /// First 1-based position of `o` in the walk.
    pub fn first_position(&self, o: &OutputSet) -> Option<usize> {
        self.steps.iter().position(|s| s == o).map(|i| i + 1)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WalkError {
    #[error("cannot build a covering walk of a disconnected graph")]
    DisconnectedGraph,
    #[error("cannot build a walk of an empty graph")]
    EmptyGraph,
}

/// Builds a covering walk by depth-first traversal from the canonical first
/// vertex, emitting each vertex on entry and re-emitting the parent on
/// backtrack, truncated after the last first visit.
pub fn construct_walk(g: &SosGraph) -> Result<SosWalk, WalkError> {
    let n = g.vertex_count();
    if n == 0 {
        return Err(WalkError::EmptyGraph);
    }
    if !is_connected(g) {
        return Err(WalkError::DisconnectedGraph);
    }
    let mut steps: Vec<usize> = Vec::with_capacity(2 * n);
    let mut visited = vec![false; n];
    let mut last_first_visit = 0usize;

    // Explicit stack of (vertex, neighbor iterator position) to keep the
    // emission order identical to the recursive formulation.
    fn dfs(
        g: &SosGraph,
        v: usize,
        visited: &mut [bool],
        steps: &mut Vec<usize>,
        last_first_visit: &mut usize,
    ) {
        visited[v] = true;
        steps.push(v);
        *last_first_visit = steps.len();
        for w in g.neighbors(v) {
            if !visited[w] {
                dfs(g, w, visited, steps, last_first_visit);
                steps.push(v);
            }
        }
    }
    dfs(g, 0, &mut visited, &mut steps, &mut last_first_visit);
    steps.truncate(last_first_visit);
    debug_assert!(steps.len() < 2 * n);

    Ok(SosWalk {
        steps: steps.into_iter().map(|i| g.vertex(i).clone()).collect(),
    })
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KsaError {
    #[error("k-set agreement needs a universe of at least k+1 values (k={k}, |universe|={have})")]
    UniverseTooSmall { k: u32, have: usize },
}

/// The SOS of validity-less k-set agreement: all non-empty subsets of the
/// universe with at most `k` elements.
pub fn ksa_sos(k: u32, universe: &BTreeSet<ValueId>) -> Result<Sos, KsaError> {
    if (universe.len() as u64) < k as u64 + 1 {
        return Err(KsaError::UniverseTooSmall {
            k,
            have: universe.len(),
        });
    }
    let values: Vec<ValueId> = universe.iter().copied().collect();
    let mut sets = Vec::new();
    // Subset enumeration by bitmask; universes here are small by construction.
    assert!(
        values.len() <= 20,
        "k-set agreement universe too large to enumerate"
    );
    for mask in 1u32..(1 << values.len()) {
        let size = mask.count_ones();
        if size >= 1 && size <= k {
            let subset: OutputSet = values
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, v)| *v)
                .collect();
            sets.push(subset);
        }
    }
    Ok(Sos::new(sets).expect("k >= 1 yields at least the singletons"))
}

/// Minimum number of processes below which d-disagreement is unsolvable under
/// `t` crashes: `Σ_{i=1..d} ⌈(t+1)/i⌉`.
pub fn disagreement_lower_bound(d: u32, t: u32) -> u32 {
    assert!(d >= 1);
    (1..=d).map(|i| (t + 1).div_ceil(i)).sum()
}

/// Process count at which the d-disagreement implementation is defined:
/// `d·⌈(t+1)/2⌉ + ⌊(t+1)/2⌋`.
#[allow(clippy::manual_div_ceil)] // (t+1)/2 is the floor term of the formula
pub fn disagreement_upper_bound_n(d: u32, t: u32) -> u32 {
    assert!(d >= 1);
    d * (t + 1).div_ceil(2) + (t + 1) / 2
}
