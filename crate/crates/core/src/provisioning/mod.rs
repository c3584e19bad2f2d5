//! Path provisioning for the shared 4+n scheme and the dedicated 2+1
//! scheme: topology input, the three integer programs with LP-format
//! export, a small exact solver, and the upper-bound construction that turns
//! a relaxed solution into a feasible shared-scheme solution.
//!
//! # Model reference
//!
//! Every edge `(i, j)` of the input graph is copied `factor` times. A path
//! `m` gets one binary flow variable `f` per edge copy, plus two binary arc
//! variables `x` (one per direction) with `f = x_fwd + x_rev`.
//!
//! * Primary paths are unit flows from `S_i` to `T_i`.
//! * Protection paths are unit flows from a virtual source `s` to a virtual
//!   sink `t`. `s` has zero-cost arcs to every `S` end node and every `T`
//!   end node has one to `t`; these arcs carry no disjointness constraints.
//! * "Passes through every end node" is an indicator row per end node
//!   (at least one used arc enters it). A continuous commodity flow of one unit from
//!   `s` to each end node, bounded by the used arcs, rules out detached
//!   cycles.
//!
//! Constraint groups: (1) flow conservation, (2) end-node visits,
//! (3) primaries pairwise disjoint, (4) primaries disjoint from protection
//! paths, (5) protection paths pairwise disjoint. The dedicated scheme
//! replaces (2)-(5) with disjointness inside each connection's triple.

mod solver;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use solver::{
    check_solution, compare_schemes, solve_exact, upper_bound_from_ilp3, CompareMode, CompareReport, CompareRow,
    CompareSummary,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProvisionError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("node index {0} not in graph")]
    NodeOutOfRange(usize),
    #[error("edge costs must be positive")]
    ZeroCost,
    #[error("connection endpoints must differ")]
    DegenerateConnection,
    #[error("model is infeasible")]
    Infeasible,
    #[error("node budget of {budget} exhausted")]
    BudgetExhausted { budget: u64, incumbent: Option<Box<ProvisionSolution>> },
    #[error("upper-bound construction needs an inflation factor of at least 4, got {0}")]
    FactorTooSmall(usize),
    #[error("expected a {want:?} solution, got {got:?}")]
    WrongKind { want: ModelKind, got: ModelKind },
    #[error("solution fails the feasibility check: {0}")]
    Infeasibility(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub cost: u64,
}

impl Edge {
    pub fn other(&self, v: usize) -> usize {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Undirected graph with positive integer link costs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Graph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    /// Add a node by name, returning its index; existing names are reused.
    pub fn add_node(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        self.adjacency.push(Vec::new());
        i
    }

    pub fn add_edge(&mut self, a: usize, b: usize, cost: u64) -> Result<usize, ProvisionError> {
        for v in [a, b] {
            if v >= self.names.len() {
                return Err(ProvisionError::NodeOutOfRange(v));
            }
        }
        if cost == 0 {
            return Err(ProvisionError::ZeroCost);
        }
        if a == b {
            return Err(ProvisionError::DegenerateConnection);
        }
        let e = self.edges.len();
        self.edges.push(Edge { a, b, cost });
        self.adjacency[a].push((b, e));
        self.adjacency[b].push((a, e));
        Ok(e)
    }

    pub fn node(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }
}

/// A graph and the connections to provision, as read from a topology file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Topology {
    pub graph: Graph,
    pub connections: Vec<(usize, usize)>,
}

/// Parse the topology text format:
///
/// ```text
/// # comment
/// node A
/// edge A B 12
/// connection A B
/// ```
///
/// Nodes must be declared before use.
pub fn parse_topology(text: &str) -> Result<Topology, ProvisionError> {
    let mut topo = Topology::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |message: String| ProvisionError::Parse { line, message };
        let words: Vec<&str> = body.split_whitespace().collect();
        let lookup = |name: &str| {
            topo.graph
                .node(name)
                .ok_or_else(|| err(format!("unknown node {name:?}")))
        };
        match words.as_slice() {
            ["node", name] => {
                if topo.graph.node(name).is_some() {
                    return Err(err(format!("node {name:?} declared twice")));
                }
                topo.graph.add_node(name);
            }
            ["edge", a, b, cost] => {
                let (a, b) = (lookup(a)?, lookup(b)?);
                let cost: u64 = cost.parse().map_err(|_| err(format!("bad cost {cost:?}")))?;
                topo.graph.add_edge(a, b, cost).map_err(|e| err(e.to_string()))?;
            }
            ["connection", a, b] => {
                let (a, b) = (lookup(a)?, lookup(b)?);
                if a == b {
                    return Err(err("connection endpoints must differ".into()));
                }
                topo.connections.push((a, b));
            }
            _ => return Err(err(format!("cannot parse {body:?}"))),
        }
    }
    Ok(topo)
}

/// Render a topology back to text.
pub fn format_topology(topo: &Topology) -> String {
    let g = &topo.graph;
    let mut out = String::new();
    for v in 0..g.node_count() {
        let _ = writeln!(out, "node {}", g.name(v));
    }
    for e in g.edges() {
        let _ = writeln!(out, "edge {} {} {}", g.name(e.a), g.name(e.b), e.cost);
    }
    for &(s, t) in &topo.connections {
        let _ = writeln!(out, "connection {} {}", g.name(s), g.name(t));
    }
    out
}

/// Two cliques `L0..` and `R0..` of `side` nodes each with intra-clique cost
/// `local`, joined by the bridges `Li - Ri` of cost `bridge`. Connections
/// are `(Li, Ri)` for every `i`.
pub fn dumbbell(side: usize, local: u64, bridge: u64) -> Topology {
    let mut g = Graph::new();
    let left: Vec<usize> = (0..side).map(|i| g.add_node(&format!("L{i}"))).collect();
    let right: Vec<usize> = (0..side).map(|i| g.add_node(&format!("R{i}"))).collect();
    for half in [&left, &right] {
        for i in 0..side {
            for j in i + 1..side {
                g.add_edge(half[i], half[j], local).expect("valid edge");
            }
        }
    }
    for i in 0..side {
        g.add_edge(left[i], right[i], bridge).expect("valid edge");
    }
    Topology {
        connections: (0..side).map(|i| (left[i], right[i])).collect(),
        graph: g,
    }
}

/// Approximate COST239 adjacency (11 nodes, 26 links) with synthetic costs
/// proportional to great-circle distance (about 100 km per unit). Not the
/// link costs of any published study.
pub const COST239: &str = include_str!("cost239.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Shared scheme: n primaries and four protection paths, all pairwise
    /// disjoint on the inflated graph.
    Ilp1,
    /// Dedicated scheme: three disjoint paths per connection.
    Ilp2,
    /// Relaxed shared scheme on the original graph without protection-path
    /// disjointness.
    Ilp3,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Ilp1 => "ILP1",
            ModelKind::Ilp2 => "ILP2",
            ModelKind::Ilp3 => "ILP3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintGroup {
    Conservation,
    Visit,
    PrimaryDisjoint,
    PrimaryProtectionDisjoint,
    ProtectionDisjoint,
    TripleDisjoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub name: String,
    pub group: ConstraintGroup,
    pub terms: Vec<(i64, usize)>,
    pub sense: Sense,
    pub rhs: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PathLabel {
    Primary { connection: usize },
    Protection { index: usize },
    Dedicated { connection: usize, index: usize },
}

impl fmt::Display for PathLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathLabel::Primary { connection } => write!(f, "p{connection}"),
            PathLabel::Protection { index } => write!(f, "q{index}"),
            PathLabel::Dedicated { connection, index } => write!(f, "b{connection}_{index}"),
        }
    }
}

/// The paths a model provisions, in variable order.
pub fn path_labels(kind: ModelKind, n: usize) -> Vec<PathLabel> {
    match kind {
        ModelKind::Ilp1 | ModelKind::Ilp3 => (0..n)
            .map(|connection| PathLabel::Primary { connection })
            .chain((0..if n == 0 { 0 } else { 4 }).map(|index| PathLabel::Protection { index }))
            .collect(),
        ModelKind::Ilp2 => (0..n)
            .flat_map(|connection| (0..3).map(move |index| PathLabel::Dedicated { connection, index }))
            .collect(),
    }
}

/// An integer program over binary flow variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvisionModel {
    pub kind: ModelKind,
    pub graph: Graph,
    pub connections: Vec<(usize, usize)>,
    /// Parallel copies per edge; 1 for the relaxed model.
    pub factor: usize,
    pub paths: Vec<PathLabel>,
    pub variables: Vec<String>,
    pub binaries: Vec<usize>,
    pub objective: Vec<(i64, usize)>,
    pub rows: Vec<Row>,
    pub flow_variables: usize,
}

impl ProvisionModel {
    pub fn groups(&self) -> BTreeSet<ConstraintGroup> {
        self.rows.iter().map(|r| r.group).collect()
    }

    pub fn auxiliary_variables(&self) -> usize {
        self.variables.len() - self.flow_variables
    }

    /// Distinct `S` and `T` end nodes.
    pub fn end_nodes(&self) -> (BTreeSet<usize>, BTreeSet<usize>) {
        (
            self.connections.iter().map(|c| c.0).collect(),
            self.connections.iter().map(|c| c.1).collect(),
        )
    }
}

struct Builder {
    variables: Vec<String>,
    binaries: Vec<usize>,
    rows: Vec<Row>,
}

impl Builder {
    fn var(&mut self, name: String, binary: bool) -> usize {
        let i = self.variables.len();
        self.variables.push(name);
        if binary {
            self.binaries.push(i);
        }
        i
    }

    fn row(&mut self, name: String, group: ConstraintGroup, terms: Vec<(i64, usize)>, sense: Sense, rhs: i64) {
        self.rows.push(Row {
            name,
            group,
            terms,
            sense,
            rhs,
        });
    }
}

/// Directed arc of a path's flow network. Nodes `V` and `V + 1` are the
/// virtual source and sink.
struct Arc {
    from: usize,
    to: usize,
    var: usize,
}

/// Build ILP1 (inflated, `factor` copies), ILP2 (inflated) or ILP3 (original
/// graph; pass the half set of connections).
pub fn build_model(
    kind: ModelKind,
    graph: &Graph,
    connections: &[(usize, usize)],
    factor: usize,
) -> Result<ProvisionModel, ProvisionError> {
    for &(s, t) in connections {
        for v in [s, t] {
            if v >= graph.node_count() {
                return Err(ProvisionError::NodeOutOfRange(v));
            }
        }
        if s == t {
            return Err(ProvisionError::DegenerateConnection);
        }
    }
    let factor = if kind == ModelKind::Ilp3 { 1 } else { factor.max(1) };
    let n_nodes = graph.node_count();
    let (src, sink) = (n_nodes, n_nodes + 1);
    let paths = path_labels(kind, connections.len());
    let mut b = Builder {
        variables: Vec::new(),
        binaries: Vec::new(),
        rows: Vec::new(),
    };
    let mut objective = Vec::new();

    // flow variables first so they are easy to count
    let mut f_vars: Vec<Vec<Vec<usize>>> = Vec::new(); // [path][edge][copy]
    for label in &paths {
        let per_edge = graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, edge)| {
                (0..factor)
                    .map(|c| {
                        let v = b.var(format!("f_{label}_e{e}_c{c}"), true);
                        objective.push((edge.cost as i64, v));
                        v
                    })
                    .collect()
            })
            .collect();
        f_vars.push(per_edge);
    }
    let flow_variables = b.variables.len();

    let (s_nodes, t_nodes): (BTreeSet<usize>, BTreeSet<usize>) = (
        connections.iter().map(|c| c.0).collect(),
        connections.iter().map(|c| c.1).collect(),
    );
    let ends: BTreeSet<usize> = s_nodes.union(&t_nodes).copied().collect();

    for (m, label) in paths.iter().enumerate() {
        let mut arcs = Vec::new();
        for (e, edge) in graph.edges().iter().enumerate() {
            for c in 0..factor {
                let fwd = b.var(format!("x_{label}_e{e}_c{c}_f"), true);
                let rev = b.var(format!("x_{label}_e{e}_c{c}_r"), true);
                b.row(
                    format!("link_{label}_e{e}_c{c}"),
                    ConstraintGroup::Conservation,
                    vec![(1, f_vars[m][e][c]), (-1, fwd), (-1, rev)],
                    Sense::Eq,
                    0,
                );
                arcs.push(Arc {
                    from: edge.a,
                    to: edge.b,
                    var: fwd,
                });
                arcs.push(Arc {
                    from: edge.b,
                    to: edge.a,
                    var: rev,
                });
            }
        }
        let (source, target, protection) = match *label {
            PathLabel::Primary { connection } | PathLabel::Dedicated { connection, .. } => {
                (connections[connection].0, connections[connection].1, false)
            }
            PathLabel::Protection { .. } => (src, sink, true),
        };
        if protection {
            for &v in &s_nodes {
                let var = b.var(format!("v_{label}_s_n{v}"), true);
                arcs.push(Arc { from: src, to: v, var });
            }
            for &v in &t_nodes {
                let var = b.var(format!("v_{label}_n{v}_t"), true);
                arcs.push(Arc { from: v, to: sink, var });
            }
        }
        let node_range = if protection { n_nodes + 2 } else { n_nodes };
        for v in 0..node_range {
            let mut terms = Vec::new();
            for a in &arcs {
                if a.from == v {
                    terms.push((1, a.var));
                }
                if a.to == v {
                    terms.push((-1, a.var));
                }
            }
            let rhs = if v == source {
                1
            } else if v == target {
                -1
            } else {
                0
            };
            let tag = node_tag(v, n_nodes);
            b.row(format!("flow_{label}_{tag}"), ConstraintGroup::Conservation, terms, Sense::Eq, rhs);
        }
        if protection {
            for &w in &ends {
                let terms = arcs.iter().filter(|a| a.to == w).map(|a| (1, a.var)).collect();
                b.row(format!("visit_{label}_n{w}"), ConstraintGroup::Visit, terms, Sense::Ge, 1);
                // connectivity commodity from s to w
                let h: Vec<usize> = arcs
                    .iter()
                    .enumerate()
                    .map(|(ai, _)| b.var(format!("h_{label}_w{w}_a{ai}"), false))
                    .collect();
                for (ai, a) in arcs.iter().enumerate() {
                    b.row(
                        format!("cap_{label}_w{w}_a{ai}"),
                        ConstraintGroup::Visit,
                        vec![(1, h[ai]), (-1, a.var)],
                        Sense::Le,
                        0,
                    );
                }
                for v in 0..n_nodes + 2 {
                    let mut terms = Vec::new();
                    for (ai, a) in arcs.iter().enumerate() {
                        if a.from == v {
                            terms.push((1, h[ai]));
                        }
                        if a.to == v {
                            terms.push((-1, h[ai]));
                        }
                    }
                    if terms.is_empty() {
                        continue;
                    }
                    let rhs = if v == src {
                        1
                    } else if v == w {
                        -1
                    } else {
                        0
                    };
                    let tag = node_tag(v, n_nodes);
                    b.row(
                        format!("reach_{label}_w{w}_{tag}"),
                        ConstraintGroup::Visit,
                        terms,
                        Sense::Eq,
                        rhs,
                    );
                }
            }
        }
    }

    let primaries: Vec<usize> = (0..paths.len())
        .filter(|&m| matches!(paths[m], PathLabel::Primary { .. }))
        .collect();
    let protections: Vec<usize> = (0..paths.len())
        .filter(|&m| matches!(paths[m], PathLabel::Protection { .. }))
        .collect();
    for e in 0..graph.edges().len() {
        for c in 0..factor {
            match kind {
                ModelKind::Ilp1 | ModelKind::Ilp3 => {
                    if primaries.len() > 1 {
                        let terms = primaries.iter().map(|&m| (1, f_vars[m][e][c])).collect();
                        b.row(format!("pp_e{e}_c{c}"), ConstraintGroup::PrimaryDisjoint, terms, Sense::Le, 1);
                    }
                    for &q in &protections {
                        let mut terms: Vec<(i64, usize)> = primaries.iter().map(|&m| (1, f_vars[m][e][c])).collect();
                        terms.push((1, f_vars[q][e][c]));
                        b.row(
                            format!("pq_{}_e{e}_c{c}", paths[q]),
                            ConstraintGroup::PrimaryProtectionDisjoint,
                            terms,
                            Sense::Le,
                            1,
                        );
                    }
                    if kind == ModelKind::Ilp1 && protections.len() > 1 {
                        let terms = protections.iter().map(|&m| (1, f_vars[m][e][c])).collect();
                        b.row(format!("qq_e{e}_c{c}"), ConstraintGroup::ProtectionDisjoint, terms, Sense::Le, 1);
                    }
                }
                ModelKind::Ilp2 => {
                    for conn in 0..connections.len() {
                        let terms = (0..3).map(|l| (1, f_vars[3 * conn + l][e][c])).collect();
                        b.row(
                            format!("tri_{conn}_e{e}_c{c}"),
                            ConstraintGroup::TripleDisjoint,
                            terms,
                            Sense::Le,
                            1,
                        );
                    }
                }
            }
        }
    }

    Ok(ProvisionModel {
        kind,
        graph: graph.clone(),
        connections: connections.to_vec(),
        factor,
        paths,
        variables: b.variables,
        binaries: b.binaries,
        objective,
        rows: b.rows,
        flow_variables,
    })
}

fn node_tag(v: usize, n_nodes: usize) -> String {
    if v == n_nodes {
        "s".into()
    } else if v == n_nodes + 1 {
        "t".into()
    } else {
        format!("n{v}")
    }
}

fn write_terms(out: &mut String, terms: &[(i64, usize)], names: &[String]) {
    for (k, &(coef, var)) in terms.iter().enumerate() {
        if k > 0 && k % 8 == 0 {
            out.push_str("\n   ");
        }
        let sign = if coef < 0 { "-" } else { "+" };
        if k == 0 && coef >= 0 {
            let _ = write!(out, " ");
        } else {
            let _ = write!(out, " {sign} ");
        }
        let mag = coef.unsigned_abs();
        if mag == 1 {
            let _ = write!(out, "{}", names[var]);
        } else {
            let _ = write!(out, "{mag} {}", names[var]);
        }
    }
}

/// CPLEX LP text. Deterministic for identical models.
pub fn export_lp(model: &ProvisionModel) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "\\ {} with {} connections, inflation factor {}",
        model.kind,
        model.connections.len(),
        model.factor
    );
    out.push_str("Minimize\n obj:");
    if model.objective.is_empty() {
        out.push_str(" 0");
    } else {
        write_terms(&mut out, &model.objective, &model.variables);
    }
    out.push('\n');
    if !model.rows.is_empty() {
        out.push_str("Subject To\n");
        for row in &model.rows {
            let _ = write!(out, " {}:", row.name);
            write_terms(&mut out, &row.terms, &model.variables);
            let sense = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {sense} {}", row.rhs);
        }
    }
    if !model.binaries.is_empty() {
        out.push_str("Binary\n");
        for chunk in model.binaries.chunks(8) {
            let names: Vec<&str> = chunk.iter().map(|&v| model.variables[v].as_str()).collect();
            let _ = writeln!(out, " {}", names.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

/// Where a traversal lands: edge index and parallel copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeCopy {
    pub edge: usize,
    pub copy: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutedPath {
    pub label: PathLabel,
    /// Node sequence of the walk in the original graph.
    pub walk: Vec<usize>,
    pub edges: Vec<EdgeCopy>,
    pub cost: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimality {
    Exact,
    UpperBound,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvisionSolution {
    pub kind: ModelKind,
    pub connections: Vec<(usize, usize)>,
    pub paths: Vec<RoutedPath>,
    pub cost: u64,
    pub optimality: Optimality,
    /// Branch-and-bound nodes explored.
    pub nodes_explored: u64,
}

impl ProvisionSolution {
    /// Edge multiplicities of every path in the original graph.
    pub fn usage(&self, edges: usize) -> BTreeMap<PathLabel, Vec<u8>> {
        self.paths
            .iter()
            .map(|p| {
                let mut mult = vec![0u8; edges];
                for ec in &p.edges {
                    mult[ec.edge] += 1;
                }
                (p.label, mult)
            })
            .collect()
    }
}
