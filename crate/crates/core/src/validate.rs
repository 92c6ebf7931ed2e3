//! Specification checks run before interpretation or code generation.
//!
//! | code | severity | check |
//! |------|----------|-------|
//! | V1 | error | state names empty, duplicated or not identifiers |
//! | V2 | error | transition endpoint, initial or final state not declared |
//! | V3 | error | trigger is not an identifier |
//! | V4 | error | condition token malformed |
//! | V5 | error | completion condition names an unknown clause or its own clause |
//! | V6 | error | package call unresolvable, not boolean, takes parameters, or body ill-typed |
//! | V7 | error | two transitions share `(source, trigger)` |
//! | V8 | warning | unreachable state, no reachable final state, or final state with exits |
//! | V9 | error | clause dependency cycle |

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::depgraph::{build_graph, topo_order};
use crate::expr::{typecheck_expr, Type};
use crate::loader::{is_identifier, JsonPointer, SourceLocation};
use crate::model::{AutomatonId, ClauseAutomaton, ConditionRef, ContractSpec};
use crate::package::PackageSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
    V7,
    V8,
    V9,
}

impl Rule {
    pub fn severity(self) -> Severity {
        match self {
            Rule::V8 => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Serialize for Rule {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: Rule,
    pub severity: Severity,
    pub message: String,
    #[serde(serialize_with = "ser_clause")]
    pub clause: Option<AutomatonId>,
    pub location: Option<SourceLocation>,
}

fn ser_clause<S: Serializer>(c: &Option<AutomatonId>, s: S) -> Result<S::Ok, S::Error> {
    match c {
        Some(id) => s.serialize_str(id.as_str()),
        None => s.serialize_none(),
    }
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.severity, self.code)?;
        if let Some(c) = &self.clause {
            write!(f, " {c}")?;
        }
        write!(f, ": {}", self.message)?;
        if let Some(loc) = &self.location {
            write!(f, " ({loc})")?;
        }
        Ok(())
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

struct Sink<'a> {
    spec: &'a ContractSpec,
    out: Vec<(usize, Diagnostic)>,
}

impl Sink<'_> {
    fn push(
        &mut self,
        idx: Option<usize>,
        code: Rule,
        message: String,
        at: Option<SourceLocation>,
    ) {
        let clause = idx.map(|i| self.spec.clauses[i].id.clone());
        self.out.push((
            idx.unwrap_or(usize::MAX),
            Diagnostic {
                code,
                severity: code.severity(),
                message,
                clause,
                location: at,
            },
        ));
    }

    fn at(&self, ptr: &JsonPointer) -> Option<SourceLocation> {
        Some(SourceLocation::new(&self.spec.origin, ptr))
    }
}

/// Runs every check and returns all findings, ordered by clause, rule and
/// location.
pub fn validate(spec: &ContractSpec, packages: &PackageSet) -> Vec<Diagnostic> {
    let mut sink = Sink {
        spec,
        out: Vec::new(),
    };
    for (idx, clause) in spec.clauses.iter().enumerate() {
        check_clause(&mut sink, idx, clause, packages);
    }
    check_packages(&mut sink, packages);

    let graph = build_graph(spec);
    if let Err(cycle) = topo_order(&graph) {
        sink.push(None, Rule::V9, cycle.to_string(), None);
    }

    let mut out = sink.out;
    out.sort_by(|(ia, a), (ib, b)| (ia, a.code, &a.location).cmp(&(ib, b.code, &b.location)));
    out.into_iter().map(|(_, d)| d).collect()
}

fn check_clause(sink: &mut Sink, idx: usize, clause: &ClauseAutomaton, packages: &PackageSet) {
    let base = JsonPointer::root().key(&clause.name);
    let mut structural = true;

    // V1
    if clause.states.is_empty() {
        structural = false;
        let at = sink.at(&base.key("states"));
        sink.push(Some(idx), Rule::V1, "clause declares no states".into(), at);
    }
    let mut seen = BTreeSet::new();
    for (i, s) in clause.states.iter().enumerate() {
        let at = sink.at(&base.key("states").index(i));
        if s.is_empty() {
            structural = false;
            sink.push(Some(idx), Rule::V1, "empty state name".into(), at);
        } else if !seen.insert(s.as_str()) {
            structural = false;
            sink.push(Some(idx), Rule::V1, format!("duplicate state `{s}`"), at);
        } else if !is_identifier(s) {
            sink.push(
                Some(idx),
                Rule::V1,
                format!("state `{s}` is not an identifier"),
                at,
            );
        }
    }

    // V2
    if !clause.states.is_empty() && !clause.has_state(&clause.initial) {
        structural = false;
        let at = sink.at(&base.key("initial"));
        let msg = format!("initial state `{}` is not declared", clause.initial);
        sink.push(Some(idx), Rule::V2, msg, at);
    }
    for (i, f) in clause.finals.iter().enumerate() {
        if !clause.has_state(f) {
            let at = sink.at(&base.key("finals").index(i));
            sink.push(
                Some(idx),
                Rule::V2,
                format!("final state `{f}` is not declared"),
                at,
            );
        }
    }
    for (ti, t) in clause.transitions.iter().enumerate() {
        let tp = base.key("transitions").index(ti);
        for (key, state) in [("source", &t.source), ("destination", &t.destination)] {
            if !clause.has_state(state) {
                structural = false;
                let at = sink.at(&tp.key(key));
                sink.push(
                    Some(idx),
                    Rule::V2,
                    format!("{key} state `{state}` is not declared"),
                    at,
                );
            }
        }

        // V3
        if !is_identifier(&t.trigger) {
            let at = sink.at(&tp.key("trigger"));
            let msg = format!("trigger `{}` is not a valid identifier", t.trigger);
            sink.push(Some(idx), Rule::V3, msg, at);
        }

        for (ci, guard) in t.conditions.iter().enumerate() {
            let at = sink.at(&tp.key("conditions").index(ci));
            match &guard.parsed {
                Err(e) => sink.push(Some(idx), Rule::V4, e.to_string(), at),
                Ok(ConditionRef::AutomatonCompleted(dep)) => {
                    if dep == &clause.id {
                        let msg =
                            format!("clause `{}` is guarded on its own completion", clause.id);
                        sink.push(Some(idx), Rule::V5, msg, at);
                    } else if sink.spec.clause(dep).is_none() {
                        sink.push(
                            Some(idx),
                            Rule::V5,
                            format!("unknown automaton `{dep}`"),
                            at,
                        );
                    }
                }
                Ok(ConditionRef::PackageCall { package, function }) => {
                    let problem = match packages.get(package) {
                        None => Some(format!("unknown package `{package}`")),
                        Some(p) => match p.function(function) {
                            None => {
                                Some(format!("package `{package}` has no function `{function}`"))
                            }
                            Some(f) if f.returns != Type::Bool => Some(format!(
                                "`{package}.{function}` returns {}, conditions need bool",
                                f.returns
                            )),
                            Some(f) if !f.params.is_empty() => Some(format!(
                                "`{package}.{function}` takes parameters; conditions must take none"
                            )),
                            Some(_) => None,
                        },
                    };
                    if let Some(msg) = problem {
                        sink.push(Some(idx), Rule::V6, msg, at);
                    }
                }
            }
        }
    }

    // V7
    let mut first_seen: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for (ti, t) in clause.transitions.iter().enumerate() {
        if let Some(prev) = first_seen.insert((&t.source, &t.trigger), ti) {
            first_seen.insert((&t.source, &t.trigger), prev);
            let at = sink.at(&base.key("transitions").index(ti));
            let msg = format!(
                "transitions {prev} and {ti} both leave `{}` on trigger `{}`",
                t.source, t.trigger
            );
            sink.push(Some(idx), Rule::V7, msg, at);
        }
    }

    // V8
    if structural {
        let reach = reachable_states(clause);
        for (i, s) in clause.states.iter().enumerate() {
            if !reach.contains(s) {
                let at = sink.at(&base.key("states").index(i));
                let msg = format!(
                    "state `{s}` is unreachable from initial `{}`",
                    clause.initial
                );
                sink.push(Some(idx), Rule::V8, msg, at);
            }
        }
        if !clause.finals.iter().any(|f| reach.contains(f)) {
            let at = sink.at(&base);
            let msg = format!(
                "W_NO_COMPLETION: no final state is reachable from `{}`",
                clause.initial
            );
            sink.push(Some(idx), Rule::V8, msg, at);
        }
        if clause.explicit_finals {
            for (i, f) in clause.finals.iter().enumerate() {
                if clause.transitions.iter().any(|t| &t.source == f) {
                    let at = sink.at(&base.key("finals").index(i));
                    let msg = format!(
                        "final state `{f}` has outgoing transitions; completion can be revoked"
                    );
                    sink.push(Some(idx), Rule::V8, msg, at);
                }
            }
        }
    }
}

/// Function bodies of every loaded package must typecheck against their
/// declared return types.
fn check_packages(sink: &mut Sink, packages: &PackageSet) {
    for pkg in packages.values() {
        let vars = pkg.variable_types();
        for (fi, f) in pkg.functions.iter().enumerate() {
            let mut env = vars.clone();
            env.extend(f.params.iter().map(|p| (p.name.clone(), p.ty)));
            let ptr = JsonPointer::root().key("functions").index(fi).key("body");
            let at = Some(SourceLocation::new(&pkg.origin, &ptr));
            match typecheck_expr(&f.body, &env) {
                Ok(t) if t == f.returns => {}
                Ok(t) => {
                    let msg = format!(
                        "`{}.{}` declares {} but its body has type {t}",
                        pkg.id, f.name, f.returns
                    );
                    sink.push(None, Rule::V6, msg, at);
                }
                Err(e) => sink.push(None, Rule::V6, format!("`{}.{}`: {e}", pkg.id, f.name), at),
            }
        }
    }
}

/// Forward closure from the initial state, treating every guard as passable.
pub fn reachable_states(clause: &ClauseAutomaton) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([clause.initial.clone()]);
    seen.insert(clause.initial.clone());
    while let Some(s) = queue.pop_front() {
        for t in clause.transitions.iter().filter(|t| t.source == s) {
            if seen.insert(t.destination.clone()) {
                queue.push_back(t.destination.clone());
            }
        }
    }
    seen
}
