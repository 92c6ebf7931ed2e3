//! Clause dependency graph: edges come from `automata__<id>_iscompleted`
//! conditions.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{AutomatonId, ConditionRef, ContractSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    /// Automaton ids in declaration order.
    pub nodes: Vec<AutomatonId>,
    /// `(dependent, dependency)` pairs as node indices.
    edges: BTreeSet<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("dependency cycle: {}", fmt_cycle(.cycle))]
pub struct CycleError {
    /// Witness cycle; the first id is repeated at the end.
    pub cycle: Vec<AutomatonId>,
}

fn fmt_cycle(cycle: &[AutomatonId]) -> String {
    cycle
        .iter()
        .map(AutomatonId::as_str)
        .collect::<Vec<_>>()
        .join(" -> ")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown focus clause `{0}`")]
pub struct UnknownFocus(pub String);

impl DependencyGraph {
    pub fn new(nodes: Vec<AutomatonId>) -> Self {
        DependencyGraph {
            nodes,
            edges: BTreeSet::new(),
        }
    }

    /// Adds `dependent` -> `dependency`. Unknown ids and self-edges are ignored.
    pub fn add_edge(&mut self, dependent: &AutomatonId, dependency: &AutomatonId) {
        if let (Some(x), Some(y)) = (self.index(dependent), self.index(dependency)) {
            if x != y {
                self.edges.insert((x, y));
            }
        }
    }

    pub fn index(&self, id: &AutomatonId) -> Option<usize> {
        self.nodes.iter().position(|n| n == id)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&AutomatonId, &AutomatonId)> {
        self.edges
            .iter()
            .map(|&(x, y)| (&self.nodes[x], &self.nodes[y]))
    }

    pub fn has_edge(&self, dependent: &str, dependency: &str) -> bool {
        self.edges()
            .any(|(x, y)| x.as_str() == dependent && y.as_str() == dependency)
    }

    /// Direct dependencies of `id`, in declaration order.
    pub fn dependencies(&self, id: &AutomatonId) -> Vec<&AutomatonId> {
        let Some(x) = self.index(id) else {
            return Vec::new();
        };
        self.edges
            .range((x, 0)..(x + 1, 0))
            .map(|&(_, y)| &self.nodes[y])
            .collect()
    }

    pub fn dependents(&self, id: &AutomatonId) -> Vec<&AutomatonId> {
        let Some(y) = self.index(id) else {
            return Vec::new();
        };
        self.edges
            .iter()
            .filter(|&&(_, d)| d == y)
            .map(|&(x, _)| &self.nodes[x])
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

pub fn build_graph(spec: &ContractSpec) -> DependencyGraph {
    let mut g = DependencyGraph::new(spec.ids().cloned().collect());
    for clause in &spec.clauses {
        for cond in clause.conditions() {
            if let ConditionRef::AutomatonCompleted(dep) = cond {
                g.add_edge(&clause.id, dep);
            }
        }
    }
    g
}

/// Dependencies first; ties broken by declaration order.
pub fn topo_order(graph: &DependencyGraph) -> Result<Vec<AutomatonId>, CycleError> {
    let n = graph.nodes.len();
    let mut pending = vec![0usize; n];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(x, y) in &graph.edges {
        pending[x] += 1;
        dependents[y].push(x);
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(next) = ready.pop_first() {
        order.push(next);
        for &d in &dependents[next] {
            pending[d] -= 1;
            if pending[d] == 0 {
                ready.insert(d);
            }
        }
    }
    if order.len() == n {
        return Ok(order.into_iter().map(|i| graph.nodes[i].clone()).collect());
    }

    // Every unplaced node has an unplaced dependency, so walking those from
    // the lowest unplaced node must revisit a node.
    let start = (0..n)
        .find(|&i| pending[i] > 0)
        .expect("stalled sort leaves a node");
    let mut path = vec![start];
    let mut cur = start;
    loop {
        let next = graph
            .edges
            .range((cur, 0)..(cur + 1, 0))
            .map(|&(_, y)| y)
            .find(|&y| pending[y] > 0)
            .expect("unplaced node has an unplaced dependency");
        if let Some(pos) = path.iter().position(|&p| p == next) {
            let mut cycle: Vec<AutomatonId> = path[pos..]
                .iter()
                .map(|&i| graph.nodes[i].clone())
                .collect();
            cycle.push(graph.nodes[next].clone());
            return Err(CycleError { cycle });
        }
        path.push(next);
        cur = next;
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Graphviz rendering. Edges point from dependency to dependent; a focused
/// clause is drawn as a cluster of its states and labelled transitions.
pub fn to_dot(
    graph: &DependencyGraph,
    spec: &ContractSpec,
    focus: Option<&AutomatonId>,
) -> Result<String, UnknownFocus> {
    let focus = match focus {
        Some(id) => Some(
            spec.clause(id)
                .filter(|_| graph.index(id).is_some())
                .ok_or_else(|| UnknownFocus(id.to_string()))?,
        ),
        None => None,
    };

    let mut out = String::new();
    writeln!(out, "digraph {} {{", quote(&spec.name)).unwrap();
    if focus.is_some() {
        writeln!(out, "    compound=true;").unwrap();
    }
    writeln!(out, "    rankdir=LR;").unwrap();
    writeln!(out, "    node [shape=box];").unwrap();

    let state_node = |clause: &AutomatonId, state: &str| quote(&format!("{clause}::{state}"));

    for id in &graph.nodes {
        let clause = spec.clause(id);
        let label = clause.map_or(id.as_str(), |c| c.name.as_str());
        match focus {
            Some(f) if &f.id == id => {
                writeln!(out, "    subgraph {} {{", quote(&format!("cluster_{id}"))).unwrap();
                writeln!(out, "        label={};", quote(label)).unwrap();
                for state in &f.states {
                    let shape = if f.is_final(state) {
                        "doublecircle"
                    } else {
                        "circle"
                    };
                    writeln!(
                        out,
                        "        {} [label={}, shape={shape}];",
                        state_node(id, state),
                        quote(state)
                    )
                    .unwrap();
                }
                for t in &f.transitions {
                    let mut edge_label = t.trigger.clone();
                    for g in &t.conditions {
                        edge_label.push_str(&format!("\n[{}]", g.token));
                    }
                    writeln!(
                        out,
                        "        {} -> {} [label={}];",
                        state_node(id, &t.source),
                        state_node(id, &t.destination),
                        quote(&edge_label)
                    )
                    .unwrap();
                }
                writeln!(out, "    }}").unwrap();
            }
            _ => writeln!(out, "    {} [label={}];", quote(id.as_str()), quote(label)).unwrap(),
        }
    }

    // Edges into or out of a cluster attach to the clause's initial state.
    let endpoint = |id: &AutomatonId| match focus {
        Some(f) if &f.id == id => (
            state_node(id, &f.initial),
            Some(quote(&format!("cluster_{id}"))),
        ),
        _ => (quote(id.as_str()), None),
    };
    for (dependent, dependency) in graph.edges() {
        let (from, ltail) = endpoint(dependency);
        let (to, lhead) = endpoint(dependent);
        let mut attrs = Vec::new();
        if let Some(t) = ltail {
            attrs.push(format!("ltail={t}"));
        }
        if let Some(h) = lhead {
            attrs.push(format!("lhead={h}"));
        }
        if attrs.is_empty() {
            writeln!(out, "    {from} -> {to};").unwrap();
        } else {
            writeln!(out, "    {from} -> {to} [{}];", attrs.join(", ")).unwrap();
        }
    }
    out.push_str("}\n");
    Ok(out)
}
