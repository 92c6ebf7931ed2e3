//! Reference interpreter for contract specs.
//!
//! Each clause is a state machine that advances when an external trigger
//! fires and every guard holds. Package variables change only through
//! [`ExecutionEnv::set_var`]. A contract is complete when every clause is.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{eval_expr, Value};
use crate::model::{AutomatonId, ClauseAutomaton, ConditionRef, ContractSpec};
use crate::package::PackageSet;
use crate::validate::{has_errors, validate, Diagnostic};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterpError {
    #[error("spec has {} validation error(s)", .0.iter().filter(|d| d.is_error()).count())]
    SpecNotValidated(Vec<Diagnostic>),
    #[error("unknown clause `{0}`")]
    UnknownClause(String),
    #[error("clause `{clause}` has no transition on trigger `{trigger}`")]
    UnknownTrigger { clause: String, trigger: String },
    #[error("unknown variable `{package}.{var}`")]
    UnknownVariable { package: String, var: String },
    #[error("`{package}.{var}` is {expected}, got {found}")]
    TypeMismatch {
        package: String,
        var: String,
        expected: crate::expr::Type,
        found: crate::expr::Type,
    },
    #[error("assertion failed: {0}")]
    AssertionFailed(String),
    #[error("variable `{package}.{var}` has no test_domain")]
    DomainMissing { package: String, var: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("script step {step}: {error}")]
pub struct ScriptError {
    pub step: usize,
    pub error: InterpError,
}

impl ScriptError {
    pub fn is_assertion(&self) -> bool {
        matches!(self.error, InterpError::AssertionFailed(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", content = "condition")]
pub enum RejectReason {
    NoSuchTransition,
    GuardFailed(String),
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::NoSuchTransition => f.write_str("NoSuchTransition"),
            RejectReason::GuardFailed(tok) => write!(f, "GuardFailed({tok})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransitionResult {
    Fired {
        from: String,
        to: String,
        completed: bool,
    },
    Rejected(RejectReason),
}

impl TransitionResult {
    pub fn is_fired(&self) -> bool {
        matches!(self, TransitionResult::Fired { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Fired,
    Rejected,
    VarSet,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub kind: EventKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clause: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trigger: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub package: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl TraceEvent {
    fn new(kind: EventKind) -> Self {
        TraceEvent {
            seq: 0,
            kind,
            clause: None,
            trigger: None,
            from: None,
            to: None,
            reason: None,
            package: None,
            var: None,
            value: None,
            detail: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

/// Snapshot of every clause state and package variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProductState {
    pub clauses: BTreeMap<AutomatonId, String>,
    pub variables: BTreeMap<(String, String), Value>,
}

#[derive(Debug, Clone)]
pub struct ExecutionEnv {
    spec: ContractSpec,
    packages: PackageSet,
    current: Vec<usize>,
    stores: BTreeMap<String, BTreeMap<String, Value>>,
    completion_logged: Vec<bool>,
    trace: Trace,
    next_seq: u64,
}

/// Builds an environment with every clause at its initial state. Fails if
/// the spec does not validate cleanly.
pub fn new_env(spec: &ContractSpec, packages: &PackageSet) -> Result<ExecutionEnv, InterpError> {
    let diags = validate(spec, packages);
    if has_errors(&diags) {
        return Err(InterpError::SpecNotValidated(diags));
    }
    let current: Vec<usize> = spec
        .clauses
        .iter()
        .map(|c| state_index(c, &c.initial))
        .collect();
    let completion_logged = spec
        .clauses
        .iter()
        .map(|c| c.is_final(&c.initial))
        .collect();
    Ok(ExecutionEnv {
        spec: spec.clone(),
        packages: packages.clone(),
        current,
        stores: packages
            .iter()
            .map(|(id, p)| (id.clone(), p.initial_store()))
            .collect(),
        completion_logged,
        trace: Trace::default(),
        next_seq: 0,
    })
}

fn state_index(clause: &ClauseAutomaton, state: &str) -> usize {
    clause
        .states
        .iter()
        .position(|s| s == state)
        .expect("validated spec references declared states")
}

impl ExecutionEnv {
    pub fn spec(&self) -> &ContractSpec {
        &self.spec
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    fn clause_idx(&self, clause: &str) -> Result<usize, InterpError> {
        self.spec
            .clauses
            .iter()
            .position(|c| c.id.as_str() == clause)
            .ok_or_else(|| InterpError::UnknownClause(clause.to_string()))
    }

    fn log(&mut self, mut e: TraceEvent) {
        e.seq = self.next_seq;
        self.next_seq += 1;
        self.trace.events.push(e);
    }

    pub fn state(&self, clause: &str) -> Result<&str, InterpError> {
        let i = self.clause_idx(clause)?;
        Ok(&self.spec.clauses[i].states[self.current[i]])
    }

    pub fn var(&self, package: &str, var: &str) -> Result<Value, InterpError> {
        self.stores
            .get(package)
            .and_then(|s| s.get(var))
            .copied()
            .ok_or_else(|| InterpError::UnknownVariable {
                package: package.into(),
                var: var.into(),
            })
    }

    fn completed_at(&self, i: usize) -> bool {
        let c = &self.spec.clauses[i];
        c.is_final(&c.states[self.current[i]])
    }

    pub fn is_completed(&self, clause: &str) -> Result<bool, InterpError> {
        Ok(self.completed_at(self.clause_idx(clause)?))
    }

    /// The top-level machine: complete when every clause is.
    pub fn contract_completed(&self) -> bool {
        (0..self.spec.clauses.len()).all(|i| self.completed_at(i))
    }

    pub fn set_var(&mut self, package: &str, var: &str, value: Value) -> Result<(), InterpError> {
        let slot = self
            .stores
            .get_mut(package)
            .and_then(|s| s.get_mut(var))
            .ok_or_else(|| InterpError::UnknownVariable {
                package: package.into(),
                var: var.into(),
            })?;
        if slot.ty() != value.ty() {
            return Err(InterpError::TypeMismatch {
                package: package.into(),
                var: var.into(),
                expected: slot.ty(),
                found: value.ty(),
            });
        }
        *slot = value;
        let mut e = TraceEvent::new(EventKind::VarSet);
        e.package = Some(package.into());
        e.var = Some(var.into());
        e.value = Some(value);
        self.log(e);
        Ok(())
    }

    /// Whether `cond` holds. An evaluation error (division by zero,
    /// overflow) counts as a failed guard, matching a reverted view call.
    fn holds(&self, cond: &ConditionRef) -> Result<bool, String> {
        match cond {
            ConditionRef::AutomatonCompleted(dep) => {
                let i = self.clause_idx(dep.as_str()).map_err(|e| e.to_string())?;
                Ok(self.completed_at(i))
            }
            ConditionRef::PackageCall { package, function } => {
                let f = self
                    .packages
                    .get(package)
                    .and_then(|p| p.function(function))
                    .ok_or_else(|| format!("unresolved {package}.{function}"))?;
                let store = &self.stores[package];
                match eval_expr(&f.body, store) {
                    Ok(Value::Bool(b)) => Ok(b),
                    Ok(other) => Err(format!("guard evaluated to {other}")),
                    Err(e) => Err(e.to_string()),
                }
            }
        }
    }

    pub fn fire(&mut self, clause: &str, trigger: &str) -> Result<TransitionResult, InterpError> {
        let ci = self.clause_idx(clause)?;
        let automaton = &self.spec.clauses[ci];
        if !automaton.transitions.iter().any(|t| t.trigger == trigger) {
            return Err(InterpError::UnknownTrigger {
                clause: clause.into(),
                trigger: trigger.into(),
            });
        }
        let from = automaton.states[self.current[ci]].clone();
        let transition = automaton
            .transitions
            .iter()
            .find(|t| t.source == from && t.trigger == trigger);

        let mut outcome = Err((RejectReason::NoSuchTransition, None));
        if let Some(t) = transition {
            outcome = Ok(t.destination.clone());
            for guard in &t.conditions {
                let cond = guard.condition().expect("validated spec has parsed guards");
                match self.holds(cond) {
                    Ok(true) => {}
                    Ok(false) => {
                        outcome = Err((RejectReason::GuardFailed(guard.token.clone()), None));
                        break;
                    }
                    Err(detail) => {
                        outcome =
                            Err((RejectReason::GuardFailed(guard.token.clone()), Some(detail)));
                        break;
                    }
                }
            }
        }

        let mut e = TraceEvent::new(EventKind::Fired);
        e.clause = Some(clause.into());
        e.trigger = Some(trigger.into());
        e.from = Some(from.clone());
        match outcome {
            Ok(to) => {
                let automaton = &self.spec.clauses[ci];
                self.current[ci] = state_index(automaton, &to);
                let completed = automaton.is_final(&to);
                e.to = Some(to.clone());
                self.log(e);
                if completed && !self.completion_logged[ci] {
                    self.completion_logged[ci] = true;
                    let mut c = TraceEvent::new(EventKind::Completed);
                    c.clause = Some(clause.into());
                    self.log(c);
                }
                Ok(TransitionResult::Fired {
                    from,
                    to,
                    completed,
                })
            }
            Err((reason, detail)) => {
                e.kind = EventKind::Rejected;
                e.reason = Some(reason.to_string());
                e.detail = detail;
                self.log(e);
                Ok(TransitionResult::Rejected(reason))
            }
        }
    }

    pub fn product_state(&self) -> ProductState {
        ProductState {
            clauses: self
                .spec
                .clauses
                .iter()
                .zip(&self.current)
                .map(|(c, &i)| (c.id.clone(), c.states[i].clone()))
                .collect(),
            variables: self
                .stores
                .iter()
                .flat_map(|(p, vars)| {
                    vars.iter()
                        .map(move |(v, val)| ((p.clone(), v.clone()), *val))
                })
                .collect(),
        }
    }

    /// Executes `script` and returns the events it appended.
    pub fn run_script(&mut self, script: &[ScriptStep]) -> Result<Trace, ScriptError> {
        let start = self.trace.len();
        for (step, cmd) in script.iter().enumerate() {
            self.step(cmd)
                .map_err(|error| ScriptError { step, error })?;
        }
        Ok(Trace {
            events: self.trace.events[start..].to_vec(),
        })
    }

    fn step(&mut self, cmd: &ScriptStep) -> Result<(), InterpError> {
        match cmd {
            ScriptStep::Set {
                package,
                var,
                value,
            } => self.set_var(package, var, *value),
            ScriptStep::Fire { clause, trigger } => self.fire(clause, trigger).map(|_| ()),
            ScriptStep::AssertState { clause, state } => {
                let actual = self.state(clause)?;
                if actual != state {
                    return Err(InterpError::AssertionFailed(format!(
                        "clause `{clause}` is in `{actual}`, expected `{state}`"
                    )));
                }
                Ok(())
            }
            ScriptStep::AssertCompleted { clause, value } => {
                let actual = self.is_completed(clause)?;
                if actual != *value {
                    return Err(InterpError::AssertionFailed(format!(
                        "clause `{clause}` completed = {actual}, expected {value}"
                    )));
                }
                Ok(())
            }
            ScriptStep::AssertRejected { clause, trigger } => match self.fire(clause, trigger)? {
                TransitionResult::Rejected(_) => Ok(()),
                TransitionResult::Fired { from, to, .. } => Err(InterpError::AssertionFailed(
                    format!("`{clause}.{trigger}` fired ({from} -> {to}), expected rejection"),
                )),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScriptStep {
    Set {
        package: String,
        var: String,
        value: Value,
    },
    Fire {
        clause: String,
        trigger: String,
    },
    AssertState {
        clause: String,
        state: String,
    },
    AssertCompleted {
        clause: String,
        value: bool,
    },
    AssertRejected {
        clause: String,
        trigger: String,
    },
}

impl ScriptStep {
    pub fn set(package: &str, var: &str, value: Value) -> Self {
        ScriptStep::Set {
            package: package.into(),
            var: var.into(),
            value,
        }
    }

    pub fn fire(clause: &str, trigger: &str) -> Self {
        ScriptStep::Fire {
            clause: clause.into(),
            trigger: trigger.into(),
        }
    }
}

pub fn parse_script(text: &str) -> Result<Vec<ScriptStep>, serde_json::Error> {
    serde_json::from_str(text)
}

/// Result of exhaustive exploration.
#[derive(Debug, Clone, Default)]
pub struct ReachabilitySet {
    pub states: BTreeSet<ProductState>,
    /// Clauses that sit in a final state in some reachable product state.
    pub completable: BTreeSet<AutomatonId>,
    /// Variables covered by exploration (packages referenced by the spec).
    pub variables: Vec<(String, String)>,
    witnesses: BTreeMap<ProductState, Vec<ScriptStep>>,
}

impl ReachabilitySet {
    /// Shortest event sequence reaching `state` from the initial state.
    pub fn witness(&self, state: &ProductState) -> Option<&[ScriptStep]> {
        self.witnesses.get(state).map(Vec::as_slice)
    }

    /// Restricts `state` to the explored variables.
    pub fn project(&self, state: &ProductState) -> ProductState {
        ProductState {
            clauses: state.clauses.clone(),
            variables: state
                .variables
                .iter()
                .filter(|(k, _)| self.variables.contains(k))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    pub fn contains(&self, state: &ProductState) -> bool {
        self.states.contains(&self.project(state))
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Node {
    clauses: Vec<usize>,
    vars: Vec<Value>,
}

/// Breadth-first search over clause states and package variable
/// valuations, up to `max_depth` fire or set events.
///
/// This walks the transition relation directly from the spec rather than
/// through [`ExecutionEnv`], so the two can be checked against each other.
pub fn explore(
    spec: &ContractSpec,
    packages: &PackageSet,
    max_depth: usize,
) -> Result<ReachabilitySet, InterpError> {
    let diags = validate(spec, packages);
    if has_errors(&diags) {
        return Err(InterpError::SpecNotValidated(diags));
    }

    let referenced: BTreeSet<&str> = spec
        .clauses
        .iter()
        .flat_map(|c| c.conditions())
        .filter_map(|c| match c {
            ConditionRef::PackageCall { package, .. } => Some(package.as_str()),
            _ => None,
        })
        .collect();
    let mut vars: Vec<(String, String)> = Vec::new();
    let mut domains: Vec<Vec<Value>> = Vec::new();
    let mut initial_vars = Vec::new();
    for pkg_id in &referenced {
        let pkg = &packages[*pkg_id];
        for v in &pkg.variables {
            let domain = v
                .test_domain
                .clone()
                .ok_or_else(|| InterpError::DomainMissing {
                    package: pkg.id.clone(),
                    var: v.name.clone(),
                })?;
            vars.push((pkg.id.clone(), v.name.clone()));
            domains.push(domain);
            initial_vars.push(v.initial);
        }
    }

    let guard_holds = |node: &Node, cond: &ConditionRef| -> bool {
        match cond {
            ConditionRef::AutomatonCompleted(dep) => {
                let di = spec.clause_index(dep).expect("validated");
                let c = &spec.clauses[di];
                c.is_final(&c.states[node.clauses[di]])
            }
            ConditionRef::PackageCall { package, function } => {
                let f = packages[package].function(function).expect("validated");
                let bindings: BTreeMap<String, Value> = vars
                    .iter()
                    .zip(&node.vars)
                    .filter(|((p, _), _)| p == package)
                    .map(|((_, v), val)| (v.clone(), *val))
                    .collect();
                matches!(eval_expr(&f.body, &bindings), Ok(Value::Bool(true)))
            }
        }
    };

    let start = Node {
        clauses: spec
            .clauses
            .iter()
            .map(|c| state_index(c, &c.initial))
            .collect(),
        vars: initial_vars,
    };
    let mut parent: HashMap<Node, Option<(Node, ScriptStep)>> = HashMap::new();
    parent.insert(start.clone(), None);
    let mut frontier = VecDeque::from([(start, 0usize)]);

    while let Some((node, depth)) = frontier.pop_front() {
        if depth == max_depth {
            continue;
        }
        let mut successors: Vec<(Node, ScriptStep)> = Vec::new();
        for (ci, clause) in spec.clauses.iter().enumerate() {
            let here = &clause.states[node.clauses[ci]];
            for trigger in clause.triggers() {
                let step = ScriptStep::fire(clause.id.as_str(), trigger);
                let enabled = clause.transitions.iter().find(|t| {
                    &t.source == here
                        && t.trigger == trigger
                        && t.conditions
                            .iter()
                            .all(|g| guard_holds(&node, g.condition().expect("validated")))
                });
                let mut next = node.clone();
                if let Some(t) = enabled {
                    next.clauses[ci] = state_index(clause, &t.destination);
                }
                successors.push((next, step));
            }
        }
        for (vi, (pkg, var)) in vars.iter().enumerate() {
            for &value in &domains[vi] {
                let mut next = node.clone();
                next.vars[vi] = value;
                successors.push((next, ScriptStep::set(pkg, var, value)));
            }
        }
        for (next, step) in successors {
            if !parent.contains_key(&next) {
                parent.insert(next.clone(), Some((node.clone(), step)));
                frontier.push_back((next, depth + 1));
            }
        }
    }

    let to_product = |n: &Node| ProductState {
        clauses: spec
            .clauses
            .iter()
            .zip(&n.clauses)
            .map(|(c, &i)| (c.id.clone(), c.states[i].clone()))
            .collect(),
        variables: vars.iter().cloned().zip(n.vars.iter().copied()).collect(),
    };

    let mut out = ReachabilitySet {
        variables: vars.clone(),
        ..Default::default()
    };
    for node in parent.keys() {
        let mut path = Vec::new();
        let mut cur = node;
        while let Some(Some((prev, step))) = parent.get(cur) {
            path.push(step.clone());
            cur = prev;
        }
        path.reverse();
        for (ci, clause) in spec.clauses.iter().enumerate() {
            if clause.is_final(&clause.states[node.clauses[ci]]) {
                out.completable.insert(clause.id.clone());
            }
        }
        let product = to_product(node);
        out.witnesses.insert(product.clone(), path);
        out.states.insert(product);
    }
    Ok(out)
}
