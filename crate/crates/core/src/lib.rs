//! Compiler toolchain for multi-level finite-state-machine contracts.
//!
//! A contract is a set of clause automata whose transitions are guarded by
//! package functions or by the completion of other clauses. The pipeline
//! loads specs and packages, validates them, orders clauses by dependency,
//! emits one Solidity contract per package and clause plus an orchestrator,
//! and audits the result. [`interp`] executes the same specs directly.

pub mod audit;
pub mod codegen;
pub mod depgraph;
pub mod expr;
pub mod format;
pub mod interp;
pub mod loader;
pub mod model;
pub mod package;
pub mod validate;

pub use audit::{
    audit_generated, audit_sources, audit_spec, AuditFinding, AuditRule, AuditSeverity,
};
pub use codegen::{generate, write_bundle, GeneratedBundle, GenerationError, Manifest};
pub use depgraph::{build_graph, to_dot, topo_order, CycleError, DependencyGraph};
pub use expr::{eval_expr, parse_expr, translate_expr, typecheck_expr, ExprNode, Type, Value};
pub use format::format_source;
pub use interp::{explore, new_env, ExecutionEnv, ScriptStep, Trace, TransitionResult};
pub use loader::{load_contract_spec, load_package, load_package_dir, LoadError, SourceLocation};
pub use model::{
    parse_condition_token, render_condition_token, AutomatonId, ClauseAutomaton, ConditionRef,
    ContractSpec, Transition,
};
pub use package::{PackageLibrary, PackageSet};
pub use validate::{validate, Diagnostic, Rule, Severity};
