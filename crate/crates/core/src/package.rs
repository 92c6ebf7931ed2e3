//! Reusable package libraries: typed variables, expression-bodied functions
//! and record types that clause conditions and generated code draw on.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::expr::{ExprNode, Type, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct PackageVariable {
    pub name: String,
    pub ty: Type,
    pub initial: Value,
    /// Finite value set used by state-space exploration.
    pub test_domain: Option<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackageFunction {
    pub name: String,
    pub params: Vec<Param>,
    pub returns: Type,
    /// Source text of the body, kept for diagnostics.
    pub source: String,
    pub body: ExprNode,
}

impl PackageFunction {
    /// True when the function can serve as a transition condition.
    pub fn is_condition(&self) -> bool {
        self.returns == Type::Bool && self.params.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    pub name: String,
    pub fields: Vec<Param>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackageLibrary {
    pub id: String,
    pub name: Option<String>,
    pub version: Option<String>,
    pub origin: PathBuf,
    pub variables: Vec<PackageVariable>,
    pub functions: Vec<PackageFunction>,
    pub structures: Vec<Structure>,
}

impl PackageLibrary {
    pub fn function(&self, name: &str) -> Option<&PackageFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn variable(&self, name: &str) -> Option<&PackageVariable> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Storage variable types, for typechecking function bodies.
    pub fn variable_types(&self) -> BTreeMap<String, Type> {
        self.variables
            .iter()
            .map(|v| (v.name.clone(), v.ty))
            .collect()
    }

    pub fn initial_store(&self) -> BTreeMap<String, Value> {
        self.variables
            .iter()
            .map(|v| (v.name.clone(), v.initial))
            .collect()
    }
}

/// Packages keyed by id.
pub type PackageSet = BTreeMap<String, PackageLibrary>;
