//! In-memory representation of multi-level contract specifications.
//!
//! A [`ContractSpec`] is an ordered list of clause automata. Each clause is a
//! finite state machine whose transitions are guarded by conditions that
//! either call a package function or wait for another clause to complete.

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

const PACKAGE_PREFIX: &str = "package__";
const AUTOMATON_PREFIX: &str = "automata__";
const COMPLETED_SUFFIX: &str = "iscompleted";

/// Identifier of a clause automaton (`a0`, `a1`, ... or an explicit id).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AutomatonId(pub String);

impl AutomatonId {
    pub fn new(id: impl Into<String>) -> Self {
        AutomatonId(id.into())
    }

    /// The implicit id of the clause declared at `index`.
    pub fn positional(index: usize) -> Self {
        AutomatonId(format!("a{index}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AutomatonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AutomatonId {
    fn from(s: &str) -> Self {
        AutomatonId(s.to_string())
    }
}

/// A structured transition guard.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConditionRef {
    /// `package__<pkg>_<fn>`: a zero-argument boolean package function.
    PackageCall { package: String, function: String },
    /// `automata__<aid>_iscompleted`: another clause sits in a final state.
    AutomatonCompleted(AutomatonId),
}

impl ConditionRef {
    pub fn package_call(package: impl Into<String>, function: impl Into<String>) -> Self {
        ConditionRef::PackageCall {
            package: package.into(),
            function: function.into(),
        }
    }

    pub fn completed(id: impl Into<String>) -> Self {
        ConditionRef::AutomatonCompleted(AutomatonId(id.into()))
    }
}

impl fmt::Display for ConditionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_condition_token(self))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed condition token `{token}`: {reason}")]
pub struct MalformedToken {
    pub token: String,
    pub reason: &'static str,
}

fn is_word(s: &str) -> bool {
    s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// Parses the textual condition form used in contract-spec files.
///
/// `package__<pkg>_<fn>` splits at the first underscore after the prefix, so
/// package ids never contain underscores while function names may.
pub fn parse_condition_token(token: &str) -> Result<ConditionRef, MalformedToken> {
    let bad = |reason| MalformedToken {
        token: token.to_string(),
        reason,
    };
    if token.is_empty() {
        return Err(bad("empty token"));
    }
    if let Some(rest) = token.strip_prefix(PACKAGE_PREFIX) {
        let (package, function) = rest
            .split_once('_')
            .ok_or_else(|| bad("missing `_` between package id and function name"))?;
        if package.is_empty() {
            return Err(bad("empty package id"));
        }
        if function.is_empty() {
            return Err(bad("empty function name"));
        }
        if !package.bytes().all(|b| b.is_ascii_alphanumeric()) || !is_word(function) {
            return Err(bad("invalid characters"));
        }
        Ok(ConditionRef::package_call(package, function))
    } else if let Some(rest) = token.strip_prefix(AUTOMATON_PREFIX) {
        let (id, suffix) = rest
            .split_once('_')
            .ok_or_else(|| bad("missing `_iscompleted` suffix"))?;
        if id.is_empty() {
            return Err(bad("empty automaton id"));
        }
        if suffix != COMPLETED_SUFFIX {
            return Err(bad("automaton conditions must end in `_iscompleted`"));
        }
        if !id.bytes().all(|b| b.is_ascii_alphanumeric()) {
            return Err(bad("invalid characters"));
        }
        Ok(ConditionRef::completed(id))
    } else {
        Err(bad("unknown prefix (expected `package__` or `automata__`)"))
    }
}

pub fn render_condition_token(cond: &ConditionRef) -> String {
    match cond {
        ConditionRef::PackageCall { package, function } => {
            format!("{PACKAGE_PREFIX}{package}_{function}")
        }
        ConditionRef::AutomatonCompleted(id) => {
            format!("{AUTOMATON_PREFIX}{id}_{COMPLETED_SUFFIX}")
        }
    }
}

/// A condition as written in the source document.
///
/// Loading keeps malformed tokens around so that the validator can report
/// them together with every other problem in the spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Guard {
    pub token: String,
    pub parsed: Result<ConditionRef, MalformedToken>,
}

impl Guard {
    pub fn new(token: impl Into<String>) -> Self {
        let token = token.into();
        let parsed = parse_condition_token(&token);
        Guard { token, parsed }
    }

    pub fn condition(&self) -> Option<&ConditionRef> {
        self.parsed.as_ref().ok()
    }
}

impl From<ConditionRef> for Guard {
    fn from(cond: ConditionRef) -> Self {
        Guard {
            token: render_condition_token(&cond),
            parsed: Ok(cond),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub source: String,
    pub destination: String,
    pub trigger: String,
    pub conditions: Vec<Guard>,
}

impl Transition {
    pub fn new(source: &str, destination: &str, trigger: &str) -> Self {
        Transition {
            source: source.to_string(),
            destination: destination.to_string(),
            trigger: trigger.to_string(),
            conditions: Vec::new(),
        }
    }

    pub fn guarded(mut self, cond: impl Into<Guard>) -> Self {
        self.conditions.push(cond.into());
        self
    }
}

/// One contract clause modelled as a finite state machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseAutomaton {
    pub id: AutomatonId,
    pub name: String,
    pub states: Vec<String>,
    pub initial: String,
    pub finals: Vec<String>,
    /// True when `finals` came from the document rather than the sink-state default.
    pub explicit_finals: bool,
    pub transitions: Vec<Transition>,
}

impl ClauseAutomaton {
    /// Builds a clause with default initial (first state) and default
    /// finals (states without outgoing transitions).
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        states: &[&str],
        transitions: Vec<Transition>,
    ) -> Self {
        let states: Vec<String> = states.iter().map(|s| s.to_string()).collect();
        let initial = states.first().cloned().unwrap_or_default();
        let finals = sink_states(&states, &transitions);
        ClauseAutomaton {
            id: AutomatonId(id.into()),
            name: name.into(),
            states,
            initial,
            finals,
            explicit_finals: false,
            transitions,
        }
    }

    pub fn has_state(&self, state: &str) -> bool {
        self.states.iter().any(|s| s == state)
    }

    pub fn is_final(&self, state: &str) -> bool {
        self.finals.iter().any(|s| s == state)
    }

    /// Distinct triggers in first-appearance order.
    pub fn triggers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for t in &self.transitions {
            if !out.contains(&t.trigger.as_str()) {
                out.push(&t.trigger);
            }
        }
        out
    }

    /// Parsed conditions across all transitions, in declaration order.
    pub fn conditions(&self) -> impl Iterator<Item = &ConditionRef> {
        self.transitions
            .iter()
            .flat_map(|t| t.conditions.iter().filter_map(Guard::condition))
    }
}

/// States in declaration order that have no outgoing transition.
pub fn sink_states(states: &[String], transitions: &[Transition]) -> Vec<String> {
    states
        .iter()
        .filter(|s| !transitions.iter().any(|t| &t.source == *s))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractSpec {
    pub name: String,
    /// File the spec was loaded from; used for diagnostic locations.
    pub origin: PathBuf,
    pub clauses: Vec<ClauseAutomaton>,
}

impl ContractSpec {
    pub fn new(name: impl Into<String>, clauses: Vec<ClauseAutomaton>) -> Self {
        ContractSpec {
            name: name.into(),
            origin: PathBuf::new(),
            clauses,
        }
    }

    pub fn clause(&self, id: &AutomatonId) -> Option<&ClauseAutomaton> {
        self.clauses.iter().find(|c| &c.id == id)
    }

    pub fn clause_index(&self, id: &AutomatonId) -> Option<usize> {
        self.clauses.iter().position(|c| &c.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &AutomatonId> {
        self.clauses.iter().map(|c| &c.id)
    }
}
