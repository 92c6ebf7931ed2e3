//! Solidity emission.
//!
//! A bundle holds one contract per referenced package, one per clause in
//! dependency order, and an `Orchestrator` that reports whole-contract
//! completion. `manifest.json` records deployment order and which earlier
//! unit addresses each constructor takes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::depgraph::{build_graph, topo_order};
use crate::expr::{translate_expr, Type, Value};
use crate::format::format_source;
use crate::model::{AutomatonId, ClauseAutomaton, ConditionRef, ContractSpec};
use crate::package::{PackageLibrary, PackageSet};
use crate::validate::{has_errors, validate, Diagnostic};

pub const PRAGMA: &str = "pragma solidity ^0.8.0;";
const HEADER: &str = "// SPDX-License-Identifier: UNLICENSED";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ORCHESTRATOR: &str = "Orchestrator";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Package,
    Clause,
    Orchestrator,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedUnit {
    pub kind: UnitKind,
    /// Contract name; also the file stem.
    pub id: String,
    pub file_name: String,
    pub source: String,
    /// Units whose addresses the constructor takes, in parameter order.
    pub dependencies: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestUnit {
    pub file: String,
    pub constructor_args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub order: Vec<String>,
    pub units: BTreeMap<String, ManifestUnit>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedBundle {
    pub units: Vec<GeneratedUnit>,
    pub manifest: Manifest,
}

impl GeneratedBundle {
    pub fn unit(&self, id: &str) -> Option<&GeneratedUnit> {
        self.units.iter().find(|u| u.id == id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.units.iter().position(|u| u.id == id)
    }
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("spec does not validate ({} error(s))", .0.iter().filter(|d| d.is_error()).count())]
    Invalid(Vec<Diagnostic>),
    #[error("{what} `{name}` collides with a reserved or generated Solidity name")]
    ReservedName { what: String, name: String },
}

#[derive(Debug, Error)]
#[error("{}: {source}", path.display())]
pub struct WriteError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

const KEYWORDS: &[&str] = &[
    "abstract",
    "address",
    "after",
    "alias",
    "anonymous",
    "apply",
    "as",
    "assembly",
    "auto",
    "block",
    "bool",
    "break",
    "byte",
    "bytes",
    "calldata",
    "case",
    "catch",
    "constant",
    "constructor",
    "continue",
    "contract",
    "copyof",
    "days",
    "default",
    "define",
    "delete",
    "do",
    "else",
    "emit",
    "enum",
    "error",
    "ether",
    "event",
    "external",
    "fallback",
    "false",
    "final",
    "finney",
    "fixed",
    "for",
    "from",
    "function",
    "gasleft",
    "global",
    "gwei",
    "hours",
    "if",
    "immutable",
    "implements",
    "import",
    "in",
    "indexed",
    "inline",
    "interface",
    "internal",
    "is",
    "let",
    "library",
    "macro",
    "mapping",
    "match",
    "memory",
    "minutes",
    "modifier",
    "msg",
    "mutable",
    "new",
    "now",
    "null",
    "of",
    "override",
    "partial",
    "payable",
    "pragma",
    "private",
    "promise",
    "public",
    "pure",
    "receive",
    "reference",
    "relocatable",
    "require",
    "return",
    "returns",
    "revert",
    "sealed",
    "seconds",
    "selfdestruct",
    "sizeof",
    "static",
    "storage",
    "string",
    "struct",
    "super",
    "supports",
    "switch",
    "szabo",
    "this",
    "throw",
    "true",
    "try",
    "tx",
    "type",
    "typedef",
    "typeof",
    "ufixed",
    "unchecked",
    "unicode",
    "using",
    "var",
    "view",
    "virtual",
    "weeks",
    "wei",
    "while",
    "years",
    "keccak256",
    "sha256",
    "ripemd160",
    "ecrecover",
    "addmod",
    "mulmod",
    "blockhash",
    "assert",
    "abi",
];

fn is_reserved(name: &str) -> bool {
    if KEYWORDS.contains(&name) {
        return true;
    }
    // sized elementary types: int8..int256, uint.., bytes1..bytes32
    for prefix in ["uint", "int", "bytes"] {
        if let Some(rest) = name.strip_prefix(prefix) {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                return true;
            }
        }
    }
    false
}

fn check_name(what: &str, name: &str, taken: &BTreeSet<String>) -> Result<(), GenerationError> {
    if is_reserved(name) || taken.contains(name) {
        return Err(GenerationError::ReservedName {
            what: what.to_string(),
            name: name.to_string(),
        });
    }
    Ok(())
}

pub fn package_unit_id(id: &str) -> String {
    format!("Package_{id}")
}

pub fn clause_unit_id(id: &AutomatonId) -> String {
    format!("Clause_{id}")
}

fn sol_type(t: Type) -> &'static str {
    match t {
        Type::Int => "int256",
        Type::Bool => "bool",
    }
}

fn sol_value(v: Value) -> String {
    v.to_string()
}

fn sol_string(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Validates, orders and emits the bundle. Every unit comes back formatted.
pub fn generate(
    spec: &ContractSpec,
    packages: &PackageSet,
) -> Result<GeneratedBundle, GenerationError> {
    let diags = validate(spec, packages);
    if has_errors(&diags) {
        return Err(GenerationError::Invalid(diags));
    }
    let graph = build_graph(spec);
    let order = topo_order(&graph).expect("validation rules out cycles");

    let referenced: BTreeSet<&str> = spec
        .clauses
        .iter()
        .flat_map(|c| c.conditions())
        .filter_map(|c| match c {
            ConditionRef::PackageCall { package, .. } => Some(package.as_str()),
            _ => None,
        })
        .collect();

    let mut units = Vec::new();
    for id in &referenced {
        units.push(emit_package(&packages[*id])?);
    }
    for id in &order {
        let clause = spec.clause(id).expect("ordered ids come from the spec");
        let deps: Vec<&AutomatonId> = order
            .iter()
            .filter(|o| graph.dependencies(id).contains(o))
            .collect();
        units.push(emit_clause(clause, &deps)?);
    }
    units.push(emit_orchestrator(spec, &order));

    let manifest = Manifest {
        order: units.iter().map(|u| u.id.clone()).collect(),
        units: units
            .iter()
            .map(|u| {
                (
                    u.id.clone(),
                    ManifestUnit {
                        file: u.file_name.clone(),
                        constructor_args: u.dependencies.clone(),
                    },
                )
            })
            .collect(),
    };
    Ok(GeneratedBundle { units, manifest })
}

fn emit_package(pkg: &PackageLibrary) -> Result<GeneratedUnit, GenerationError> {
    let name = package_unit_id(&pkg.id);
    let mut taken: BTreeSet<String> = ["owner", "onlyOwner", name.as_str()]
        .into_iter()
        .map(String::from)
        .collect();
    let mut claim = |what: &str, n: String| -> Result<(), GenerationError> {
        check_name(what, &n, &taken)?;
        taken.insert(n);
        Ok(())
    };
    for v in &pkg.variables {
        claim("variable", v.name.clone())?;
        claim("setter", format!("set_{}", v.name))?;
    }
    for f in &pkg.functions {
        claim("function", f.name.clone())?;
    }
    for s in &pkg.structures {
        claim("structure", s.name.clone())?;
        let mut fields = BTreeSet::new();
        for field in &s.fields {
            check_name("structure field", &field.name, &fields)?;
            fields.insert(field.name.clone());
        }
    }

    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "{PRAGMA}").unwrap();
    writeln!(out).unwrap();
    let mut title = format!("// Package `{}`", pkg.id);
    if let Some(n) = &pkg.name {
        write!(title, ": {n}").unwrap();
    }
    if let Some(v) = &pkg.version {
        write!(title, " (version {v})").unwrap();
    }
    writeln!(out, "{}", title.replace('\n', " ")).unwrap();
    writeln!(out, "contract {name} {{").unwrap();
    writeln!(out, "address public immutable owner;").unwrap();
    for v in &pkg.variables {
        writeln!(
            out,
            "{} public {} = {};",
            sol_type(v.ty),
            v.name,
            sol_value(v.initial)
        )
        .unwrap();
    }
    for s in &pkg.structures {
        writeln!(out).unwrap();
        writeln!(out, "struct {} {{", s.name).unwrap();
        for field in &s.fields {
            writeln!(out, "{} {};", sol_type(field.ty), field.name).unwrap();
        }
        writeln!(out, "}}").unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "modifier onlyOwner() {{").unwrap();
    writeln!(
        out,
        "require(msg.sender == owner, \"{name}: caller is not the owner\");"
    )
    .unwrap();
    writeln!(out, "_;").unwrap();
    writeln!(out, "}}").unwrap();
    writeln!(out).unwrap();
    writeln!(out, "constructor() {{").unwrap();
    writeln!(out, "owner = msg.sender;").unwrap();
    writeln!(out, "}}").unwrap();
    for v in &pkg.variables {
        writeln!(out).unwrap();
        writeln!(
            out,
            "function set_{}({} value) external onlyOwner {{",
            v.name,
            sol_type(v.ty)
        )
        .unwrap();
        writeln!(out, "{} = value;", v.name).unwrap();
        writeln!(out, "}}").unwrap();
    }
    for f in &pkg.functions {
        let params = f
            .params
            .iter()
            .map(|p| format!("{} {}", sol_type(p.ty), p.name))
            .collect::<Vec<_>>()
            .join(", ");
        let mutability = if f.body.variables().is_empty() {
            "pure"
        } else {
            "view"
        };
        writeln!(out).unwrap();
        writeln!(
            out,
            "function {}({params}) external {mutability} returns ({}) {{",
            f.name,
            sol_type(f.returns)
        )
        .unwrap();
        writeln!(out, "return {};", translate_expr(&f.body)).unwrap();
        writeln!(out, "}}").unwrap();
    }
    writeln!(out, "}}").unwrap();

    Ok(GeneratedUnit {
        kind: UnitKind::Package,
        file_name: format!("{name}.sol"),
        id: name,
        source: format_source(&out),
        dependencies: Vec::new(),
    })
}

fn package_field(id: &str) -> String {
    format!("pkg_{id}")
}

fn dependency_field(id: &AutomatonId) -> String {
    format!("dep_{id}")
}

fn emit_clause(
    clause: &ClauseAutomaton,
    deps: &[&AutomatonId],
) -> Result<GeneratedUnit, GenerationError> {
    let name = clause_unit_id(&clause.id);
    let packages: BTreeSet<&str> = clause
        .conditions()
        .filter_map(|c| match c {
            ConditionRef::PackageCall { package, .. } => Some(package.as_str()),
            _ => None,
        })
        .collect();

    let mut taken: BTreeSet<String> = [
        "State",
        "currentState",
        "isCompleted",
        "TransitionFired",
        "ClauseCompleted",
        name.as_str(),
    ]
    .into_iter()
    .map(String::from)
    .collect();
    taken.extend(packages.iter().map(|p| package_field(p)));
    taken.extend(packages.iter().map(|p| package_unit_id(p)));
    taken.extend(deps.iter().map(|d| dependency_field(d)));
    taken.extend(deps.iter().map(|d| clause_unit_id(d)));
    for trigger in clause.triggers() {
        check_name("trigger", trigger, &taken)?;
    }
    for state in &clause.states {
        check_name("state", state, &BTreeSet::new())?;
    }

    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "{PRAGMA}").unwrap();
    writeln!(out).unwrap();
    for p in &packages {
        let unit = package_unit_id(p);
        writeln!(out, "import {{{unit}}} from \"./{unit}.sol\";").unwrap();
    }
    for d in deps {
        let unit = clause_unit_id(d);
        writeln!(out, "import {{{unit}}} from \"./{unit}.sol\";").unwrap();
    }
    if !packages.is_empty() || !deps.is_empty() {
        writeln!(out).unwrap();
    }
    writeln!(
        out,
        "// Clause `{}` ({})",
        clause.id,
        clause.name.replace('\n', " ")
    )
    .unwrap();
    writeln!(out, "contract {name} {{").unwrap();
    writeln!(out, "enum State {{").unwrap();
    for (i, s) in clause.states.iter().enumerate() {
        let sep = if i + 1 < clause.states.len() { "," } else { "" };
        writeln!(out, "{s}{sep}").unwrap();
    }
    writeln!(out, "}}").unwrap();
    writeln!(out).unwrap();
    writeln!(
        out,
        "event TransitionFired(string clause, string trigger, string source, string destination);"
    )
    .unwrap();
    writeln!(out, "event ClauseCompleted(string clause);").unwrap();
    writeln!(out).unwrap();
    writeln!(out, "State public currentState;").unwrap();
    for p in &packages {
        writeln!(
            out,
            "{} public immutable {};",
            package_unit_id(p),
            package_field(p)
        )
        .unwrap();
    }
    for d in deps {
        writeln!(
            out,
            "{} public immutable {};",
            clause_unit_id(d),
            dependency_field(d)
        )
        .unwrap();
    }
    writeln!(out).unwrap();

    let mut params = Vec::new();
    let mut assigns = Vec::new();
    for p in &packages {
        let field = package_field(p);
        params.push(format!("{} {field}_", package_unit_id(p)));
        assigns.push(format!("{field} = {field}_;"));
    }
    for d in deps {
        let field = dependency_field(d);
        params.push(format!("{} {field}_", clause_unit_id(d)));
        assigns.push(format!("{field} = {field}_;"));
    }
    writeln!(out, "constructor({}) {{", params.join(", ")).unwrap();
    for a in &assigns {
        writeln!(out, "{a}").unwrap();
    }
    writeln!(out, "currentState = State.{};", clause.initial).unwrap();
    writeln!(out, "}}").unwrap();

    let id_lit = sol_string(clause.id.as_str());
    for trigger in clause.triggers() {
        writeln!(out).unwrap();
        writeln!(out, "function {trigger}() external {{").unwrap();
        for t in clause.transitions.iter().filter(|t| t.trigger == trigger) {
            writeln!(out, "if (currentState == State.{}) {{", t.source).unwrap();
            for guard in &t.conditions {
                let call = match guard.condition().expect("validated") {
                    ConditionRef::PackageCall { package, function } => {
                        format!("{}.{function}()", package_field(package))
                    }
                    ConditionRef::AutomatonCompleted(dep) => {
                        format!("{}.isCompleted()", dependency_field(dep))
                    }
                };
                writeln!(out, "require({call}, {});", sol_string(&guard.token)).unwrap();
            }
            writeln!(out, "currentState = State.{};", t.destination).unwrap();
            writeln!(
                out,
                "emit TransitionFired({id_lit}, {}, {}, {});",
                sol_string(trigger),
                sol_string(&t.source),
                sol_string(&t.destination)
            )
            .unwrap();
            if clause.is_final(&t.destination) {
                writeln!(out, "emit ClauseCompleted({id_lit});").unwrap();
            }
            writeln!(out, "return;").unwrap();
            writeln!(out, "}}").unwrap();
        }
        writeln!(
            out,
            "revert(\"{trigger}: no transition from current state\");"
        )
        .unwrap();
        writeln!(out, "}}").unwrap();
    }

    writeln!(out).unwrap();
    writeln!(
        out,
        "function isCompleted() external view returns (bool) {{"
    )
    .unwrap();
    let finals: Vec<String> = clause
        .states
        .iter()
        .filter(|s| clause.is_final(s))
        .map(|s| format!("currentState == State.{s}"))
        .collect();
    if finals.is_empty() {
        writeln!(out, "return false;").unwrap();
    } else {
        writeln!(out, "return {};", finals.join(" || ")).unwrap();
    }
    writeln!(out, "}}").unwrap();
    writeln!(out, "}}").unwrap();

    let mut dependencies: Vec<String> = packages.iter().map(|p| package_unit_id(p)).collect();
    dependencies.extend(deps.iter().map(|d| clause_unit_id(d)));
    Ok(GeneratedUnit {
        kind: UnitKind::Clause,
        file_name: format!("{name}.sol"),
        id: name,
        source: format_source(&out),
        dependencies,
    })
}

fn emit_orchestrator(spec: &ContractSpec, order: &[AutomatonId]) -> GeneratedUnit {
    let field = |id: &AutomatonId| format!("clause_{id}");
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "{PRAGMA}").unwrap();
    writeln!(out).unwrap();
    for id in order {
        let unit = clause_unit_id(id);
        writeln!(out, "import {{{unit}}} from \"./{unit}.sol\";").unwrap();
    }
    writeln!(out).unwrap();
    writeln!(
        out,
        "// Top-level view over `{}`: complete once every clause is.",
        spec.name.replace('\n', " ")
    )
    .unwrap();
    writeln!(out, "contract {ORCHESTRATOR} {{").unwrap();
    for id in order {
        writeln!(
            out,
            "{} public immutable {};",
            clause_unit_id(id),
            field(id)
        )
        .unwrap();
    }
    writeln!(out).unwrap();
    let params: Vec<String> = order
        .iter()
        .map(|id| format!("{} {}_", clause_unit_id(id), field(id)))
        .collect();
    writeln!(out, "constructor({}) {{", params.join(", ")).unwrap();
    for id in order {
        writeln!(out, "{0} = {0}_;", field(id)).unwrap();
    }
    writeln!(out, "}}").unwrap();
    writeln!(out).unwrap();
    writeln!(
        out,
        "function isCompleted() external view returns (bool) {{"
    )
    .unwrap();
    let all: Vec<String> = order
        .iter()
        .map(|id| format!("{}.isCompleted()", field(id)))
        .collect();
    writeln!(out, "return {};", all.join(" && ")).unwrap();
    writeln!(out, "}}").unwrap();
    writeln!(out, "}}").unwrap();

    GeneratedUnit {
        kind: UnitKind::Orchestrator,
        id: ORCHESTRATOR.to_string(),
        file_name: format!("{ORCHESTRATOR}.sol"),
        source: format_source(&out),
        dependencies: order.iter().map(clause_unit_id).collect(),
    }
}

/// Writes every unit plus `manifest.json` into `out_dir`, creating it if needed.
pub fn write_bundle(bundle: &GeneratedBundle, out_dir: &Path) -> Result<(), WriteError> {
    let err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| WriteError { path, source }
    };
    fs::create_dir_all(out_dir).map_err(err(out_dir))?;
    for unit in &bundle.units {
        let path = out_dir.join(&unit.file_name);
        fs::write(&path, &unit.source).map_err(err(&path))?;
    }
    let path = out_dir.join(MANIFEST_FILE);
    fs::write(&path, bundle.manifest.to_json()).map_err(err(&path))?;
    Ok(())
}
