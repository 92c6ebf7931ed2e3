//! Contract-spec and package-library file loading.
//!
//! Loading checks document shape only. Referential problems (undeclared
//! states, unknown packages, malformed condition tokens) load fine and are
//! reported by the validator.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::{Deserialize, Deserializer, MapAccess, Visitor};
use serde::Serialize;
use serde_json::{Map, Value as Json};
use thiserror::Error;

use crate::expr::{parse_expr, ExprParseError, Type, Value};
use crate::model::{AutomatonId, ClauseAutomaton, ContractSpec, Guard, Transition};
use crate::package::{
    PackageFunction, PackageLibrary, PackageSet, PackageVariable, Param, Structure,
};

pub const PACKAGE_SUFFIX: &str = ".pkg.json";

/// Points at an element of a loaded document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct SourceLocation {
    pub file: PathBuf,
    /// RFC 6901 JSON pointer; empty for the document root.
    pub json_pointer: String,
}

impl SourceLocation {
    pub fn new(file: &Path, pointer: &JsonPointer) -> Self {
        SourceLocation {
            file: file.to_path_buf(),
            json_pointer: pointer.0.clone(),
        }
    }
}

impl fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.json_pointer.is_empty() {
            write!(f, "{}", self.file.display())
        } else {
            write!(f, "{}#{}", self.file.display(), self.json_pointer)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JsonPointer(String);

impl JsonPointer {
    pub fn root() -> Self {
        JsonPointer(String::new())
    }

    pub fn key(&self, key: &str) -> Self {
        let escaped = key.replace('~', "~0").replace('/', "~1");
        JsonPointer(format!("{}/{}", self.0, escaped))
    }

    pub fn index(&self, i: usize) -> Self {
        JsonPointer(format!("{}/{}", self.0, i))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{}:{line}:{column}: invalid JSON: {message}", file.display())]
    Syntax {
        file: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{location}: {message}")]
    Schema {
        location: SourceLocation,
        message: String,
    },
    #[error("{location}: duplicate clause {what}")]
    DuplicateClause {
        location: SourceLocation,
        what: String,
    },
    #[error("{location}: function `{function}`: {error}")]
    ExprParse {
        location: SourceLocation,
        function: String,
        error: ExprParseError,
    },
    #[error("package id `{id}` declared in both {} and {}", first.display(), second.display())]
    DuplicatePackageId {
        id: String,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LoadError {
    pub fn file(&self) -> &Path {
        match self {
            LoadError::Syntax { file, .. } => file,
            LoadError::Schema { location, .. }
            | LoadError::DuplicateClause { location, .. }
            | LoadError::ExprParse { location, .. } => &location.file,
            LoadError::DuplicatePackageId { second, .. } => second,
            LoadError::Io { path, .. } => path,
        }
    }
}

/// Top-level object entries in document order, duplicates preserved.
struct OrderedEntries(Vec<(String, Json)>);

impl<'de> Deserialize<'de> for OrderedEntries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = OrderedEntries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<OrderedEntries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Json>()? {
                    out.push((k, v));
                }
                Ok(OrderedEntries(out))
            }
        }
        d.deserialize_map(V)
    }
}

struct Ctx<'a> {
    file: &'a Path,
}

impl Ctx<'_> {
    fn schema(&self, at: &JsonPointer, message: impl Into<String>) -> LoadError {
        LoadError::Schema {
            location: SourceLocation::new(self.file, at),
            message: message.into(),
        }
    }

    fn object<'j>(
        &self,
        v: &'j Json,
        at: &JsonPointer,
        what: &str,
    ) -> Result<&'j Map<String, Json>, LoadError> {
        v.as_object()
            .ok_or_else(|| self.schema(at, format!("{what} must be an object")))
    }

    fn array<'j>(
        &self,
        v: &'j Json,
        at: &JsonPointer,
        what: &str,
    ) -> Result<&'j Vec<Json>, LoadError> {
        v.as_array()
            .ok_or_else(|| self.schema(at, format!("{what} must be an array")))
    }

    fn string<'j>(&self, v: &'j Json, at: &JsonPointer, what: &str) -> Result<&'j str, LoadError> {
        v.as_str()
            .ok_or_else(|| self.schema(at, format!("{what} must be a string")))
    }

    fn strings(&self, v: &Json, at: &JsonPointer, what: &str) -> Result<Vec<String>, LoadError> {
        self.array(v, at, what)?
            .iter()
            .enumerate()
            .map(|(i, e)| self.string(e, &at.index(i), what).map(str::to_string))
            .collect()
    }

    fn check_keys(
        &self,
        obj: &Map<String, Json>,
        at: &JsonPointer,
        required: &[&str],
        optional: &[&str],
    ) -> Result<(), LoadError> {
        for key in required {
            if !obj.contains_key(*key) {
                return Err(self.schema(at, format!("missing required key `{key}`")));
            }
        }
        for key in obj.keys() {
            if !required.contains(&key.as_str()) && !optional.contains(&key.as_str()) {
                return Err(self.schema(&at.key(key), format!("unknown key `{key}`")));
            }
        }
        Ok(())
    }

    fn ident<'j>(&self, v: &'j Json, at: &JsonPointer, what: &str) -> Result<&'j str, LoadError> {
        let s = self.string(v, at, what)?;
        if !is_identifier(s) {
            return Err(self.schema(at, format!("{what} `{s}` is not a valid identifier")));
        }
        Ok(s)
    }

    fn ty(&self, v: &Json, at: &JsonPointer) -> Result<Type, LoadError> {
        match self.string(v, at, "type")? {
            "int" => Ok(Type::Int),
            "bool" => Ok(Type::Bool),
            other => Err(self.schema(at, format!("unknown type `{other}` (expected int or bool)"))),
        }
    }

    fn value(&self, v: &Json, ty: Type, at: &JsonPointer) -> Result<Value, LoadError> {
        match ty {
            Type::Int => v
                .as_i64()
                .map(Value::Int)
                .ok_or_else(|| self.schema(at, "expected a 64-bit integer")),
            Type::Bool => v
                .as_bool()
                .map(Value::Bool)
                .ok_or_else(|| self.schema(at, "expected a boolean")),
        }
    }
}

/// Letters, digits and underscores, starting with a letter.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Letters and digits only, starting with a letter (package and clause ids).
fn is_plain_id(s: &str) -> bool {
    is_identifier(s) && !s.contains('_')
}

fn syntax_error(file: &Path, e: serde_json::Error) -> LoadError {
    LoadError::Syntax {
        file: file.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn spec_name(origin: &Path) -> String {
    let file = origin
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = file
        .trim_end_matches(".json")
        .trim_end_matches(".spec")
        .to_string();
    if stem.is_empty() {
        "contract".to_string()
    } else {
        stem
    }
}

pub fn load_contract_spec(document: &str, origin: &Path) -> Result<ContractSpec, LoadError> {
    let ctx = Ctx { file: origin };
    let root = JsonPointer::root();
    let entries = match serde_json::from_str::<OrderedEntries>(document) {
        Ok(e) => e.0,
        Err(e) if e.is_data() => {
            return Err(ctx.schema(&root, "contract spec must be an object of clauses"))
        }
        Err(e) => return Err(syntax_error(origin, e)),
    };
    if entries.is_empty() {
        return Err(ctx.schema(&root, "contract spec declares no clauses"));
    }

    let mut names = BTreeSet::new();
    let mut ids = BTreeSet::new();
    let mut clauses = Vec::with_capacity(entries.len());
    for (index, (name, body)) in entries.iter().enumerate() {
        let at = root.key(name);
        if !names.insert(name.as_str()) {
            return Err(LoadError::DuplicateClause {
                location: SourceLocation::new(origin, &at),
                what: format!("name `{name}`"),
            });
        }
        let clause = load_clause(&ctx, index, name, body, &at)?;
        if !ids.insert(clause.id.clone()) {
            return Err(LoadError::DuplicateClause {
                location: SourceLocation::new(origin, &at),
                what: format!("id `{}`", clause.id),
            });
        }
        clauses.push(clause);
    }

    Ok(ContractSpec {
        name: spec_name(origin),
        origin: origin.to_path_buf(),
        clauses,
    })
}

fn load_clause(
    ctx: &Ctx,
    index: usize,
    name: &str,
    body: &Json,
    at: &JsonPointer,
) -> Result<ClauseAutomaton, LoadError> {
    let obj = ctx.object(body, at, "clause")?;
    ctx.check_keys(
        obj,
        at,
        &["states", "transitions"],
        &["id", "initial", "finals"],
    )?;

    let id = match obj.get("id") {
        Some(v) => {
            let at = at.key("id");
            let s = ctx.string(v, &at, "clause id")?;
            if !is_plain_id(s) {
                return Err(ctx.schema(
                    &at,
                    format!("clause id `{s}` must be letters and digits, starting with a letter"),
                ));
            }
            AutomatonId::new(s)
        }
        None => AutomatonId::positional(index),
    };

    let states = ctx.strings(&obj["states"], &at.key("states"), "states")?;
    let tat = at.key("transitions");
    let transitions = ctx
        .array(&obj["transitions"], &tat, "transitions")?
        .iter()
        .enumerate()
        .map(|(i, t)| load_transition(ctx, t, &tat.index(i)))
        .collect::<Result<Vec<_>, _>>()?;

    let initial = match obj.get("initial") {
        Some(v) => ctx.string(v, &at.key("initial"), "initial")?.to_string(),
        None => states.first().cloned().unwrap_or_default(),
    };
    let (finals, explicit_finals) = match obj.get("finals") {
        Some(v) => (ctx.strings(v, &at.key("finals"), "finals")?, true),
        None => (crate::model::sink_states(&states, &transitions), false),
    };

    Ok(ClauseAutomaton {
        id,
        name: name.to_string(),
        states,
        initial,
        finals,
        explicit_finals,
        transitions,
    })
}

fn load_transition(ctx: &Ctx, v: &Json, at: &JsonPointer) -> Result<Transition, LoadError> {
    let obj = ctx.object(v, at, "transition")?;
    ctx.check_keys(
        obj,
        at,
        &["source", "destination", "trigger", "conditions"],
        &[],
    )?;
    let field = |k: &str| ctx.string(&obj[k], &at.key(k), k).map(str::to_string);
    Ok(Transition {
        source: field("source")?,
        destination: field("destination")?,
        trigger: field("trigger")?,
        conditions: ctx
            .strings(&obj["conditions"], &at.key("conditions"), "conditions")?
            .into_iter()
            .map(Guard::new)
            .collect(),
    })
}

pub fn load_package(document: &str, origin: &Path) -> Result<PackageLibrary, LoadError> {
    let ctx = Ctx { file: origin };
    let root = JsonPointer::root();
    let doc: Json = serde_json::from_str(document).map_err(|e| syntax_error(origin, e))?;
    let obj = ctx.object(&doc, &root, "package")?;
    ctx.check_keys(
        obj,
        &root,
        &["id"],
        &["name", "version", "variables", "functions", "structures"],
    )?;

    let id_at = root.key("id");
    let id = ctx.string(&obj["id"], &id_at, "package id")?;
    if !is_plain_id(id) {
        return Err(ctx.schema(
            &id_at,
            format!("package id `{id}` must be letters and digits, starting with a letter (no underscores)"),
        ));
    }
    let opt_string = |k: &str| -> Result<Option<String>, LoadError> {
        obj.get(k)
            .map(|v| ctx.string(v, &root.key(k), k).map(str::to_string))
            .transpose()
    };
    let list = |k: &str| -> Result<&[Json], LoadError> {
        match obj.get(k) {
            Some(v) => ctx.array(v, &root.key(k), k).map(Vec::as_slice),
            None => Ok(&[]),
        }
    };

    let vat = root.key("variables");
    let variables = list("variables")?
        .iter()
        .enumerate()
        .map(|(i, v)| load_variable(&ctx, v, &vat.index(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let fat = root.key("functions");
    let functions = list("functions")?
        .iter()
        .enumerate()
        .map(|(i, v)| load_function(&ctx, v, &fat.index(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let sat = root.key("structures");
    let structures = list("structures")?
        .iter()
        .enumerate()
        .map(|(i, v)| load_structure(&ctx, v, &sat.index(i)))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(PackageLibrary {
        id: id.to_string(),
        name: opt_string("name")?,
        version: opt_string("version")?,
        origin: origin.to_path_buf(),
        variables,
        functions,
        structures,
    })
}

fn load_variable(ctx: &Ctx, v: &Json, at: &JsonPointer) -> Result<PackageVariable, LoadError> {
    let obj = ctx.object(v, at, "variable")?;
    ctx.check_keys(obj, at, &["name", "type", "value"], &["test_domain"])?;
    let name = ctx.ident(&obj["name"], &at.key("name"), "variable name")?;
    let ty = ctx.ty(&obj["type"], &at.key("type"))?;
    let initial = ctx.value(&obj["value"], ty, &at.key("value"))?;
    let test_domain = match obj.get("test_domain") {
        Some(d) => {
            let dat = at.key("test_domain");
            let values = ctx
                .array(d, &dat, "test_domain")?
                .iter()
                .enumerate()
                .map(|(i, e)| ctx.value(e, ty, &dat.index(i)))
                .collect::<Result<Vec<_>, _>>()?;
            Some(values)
        }
        None => None,
    };
    Ok(PackageVariable {
        name: name.to_string(),
        ty,
        initial,
        test_domain,
    })
}

fn load_params(ctx: &Ctx, v: &Json, at: &JsonPointer, what: &str) -> Result<Vec<Param>, LoadError> {
    ctx.array(v, at, what)?
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let at = at.index(i);
            let obj = ctx.object(p, &at, what)?;
            ctx.check_keys(obj, &at, &["name", "type"], &[])?;
            Ok(Param {
                name: ctx
                    .ident(&obj["name"], &at.key("name"), "name")?
                    .to_string(),
                ty: ctx.ty(&obj["type"], &at.key("type"))?,
            })
        })
        .collect()
}

fn load_function(ctx: &Ctx, v: &Json, at: &JsonPointer) -> Result<PackageFunction, LoadError> {
    let obj = ctx.object(v, at, "function")?;
    ctx.check_keys(obj, at, &["name", "returns", "body"], &["params"])?;
    let name = ctx.ident(&obj["name"], &at.key("name"), "function name")?;
    let params = match obj.get("params") {
        Some(p) => load_params(ctx, p, &at.key("params"), "params")?,
        None => Vec::new(),
    };
    let returns = ctx.ty(&obj["returns"], &at.key("returns"))?;
    let body_at = at.key("body");
    let source = ctx.string(&obj["body"], &body_at, "body")?;
    let parsed = parse_expr(source).map_err(|error| LoadError::ExprParse {
        location: SourceLocation::new(ctx.file, &body_at),
        function: name.to_string(),
        error,
    })?;
    let names: Vec<String> = params.iter().map(|p| p.name.clone()).collect();
    Ok(PackageFunction {
        name: name.to_string(),
        params,
        returns,
        source: source.to_string(),
        body: parsed.bind_params(&names),
    })
}

fn load_structure(ctx: &Ctx, v: &Json, at: &JsonPointer) -> Result<Structure, LoadError> {
    let obj = ctx.object(v, at, "structure")?;
    ctx.check_keys(obj, at, &["name", "fields"], &[])?;
    Ok(Structure {
        name: ctx
            .ident(&obj["name"], &at.key("name"), "structure name")?
            .to_string(),
        fields: load_params(ctx, &obj["fields"], &at.key("fields"), "fields")?,
    })
}

pub fn load_contract_spec_file(path: &Path) -> Result<ContractSpec, LoadError> {
    let text = read(path)?;
    load_contract_spec(&text, path)
}

pub fn load_package_file(path: &Path) -> Result<PackageLibrary, LoadError> {
    let text = read(path)?;
    load_package(&text, path)
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads every `*.pkg.json` file in `dir`, in file-name order.
pub fn load_package_dir(dir: &Path) -> Result<PackageSet, LoadError> {
    let io = |source| LoadError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let is_pkg = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(PACKAGE_SUFFIX));
        if is_pkg && path.is_file() {
            files.push(path);
        }
    }
    files.sort();

    let mut set = PackageSet::new();
    for path in files {
        let pkg = load_package_file(&path)?;
        if let Some(prev) = set.get(&pkg.id) {
            return Err(LoadError::DuplicatePackageId {
                id: pkg.id.clone(),
                first: prev.origin.clone(),
                second: path,
            });
        }
        set.insert(pkg.id.clone(), pkg);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConditionRef;

    const TWO_CLAUSE: &str = r#"{
        "Clause A": {
            "states": ["s0", "s2"],
            "transitions": [
                {"source": "s0", "destination": "s2", "trigger": "trigger_x",
                 "conditions": ["package__p3_c1"]}
            ]
        },
        "Clause B": {
            "states": ["s0", "s1", "s2"],
            "transitions": [
                {"source": "s0", "destination": "s2", "trigger": "trigger_a",
                 "conditions": ["automata__a0_iscompleted"]},
                {"source": "s1", "destination": "s2", "trigger": "trigger_b",
                 "conditions": ["package__p1_c2", "package__p2_c1"]}
            ]
        }
    }"#;

    fn spec(doc: &str) -> Result<ContractSpec, LoadError> {
        load_contract_spec(doc, Path::new("test.json"))
    }

    fn pkg(doc: &str) -> Result<PackageLibrary, LoadError> {
        load_package(doc, Path::new("p.pkg.json"))
    }

    fn pointer(err: LoadError) -> String {
        match err {
            LoadError::Schema { location, .. } => location.json_pointer,
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn loads_two_clause_spec() {
        let s = spec(TWO_CLAUSE).unwrap();
        assert_eq!(s.name, "test");
        assert_eq!(s.clauses.len(), 2);
        let a = &s.clauses[0];
        assert_eq!((a.id.as_str(), a.name.as_str()), ("a0", "Clause A"));
        assert_eq!(a.states, ["s0", "s2"]);
        assert_eq!(a.transitions.len(), 1);
        let b = &s.clauses[1];
        assert_eq!((b.id.as_str(), b.name.as_str()), ("a1", "Clause B"));
        assert_eq!(b.states, ["s0", "s1", "s2"]);
        assert_eq!(b.transitions.len(), 2);
        assert_eq!(b.initial, "s0");
        assert_eq!(b.finals, ["s2"]);
        assert_eq!(
            b.transitions[0].conditions[0].condition(),
            Some(&ConditionRef::completed("a0"))
        );
    }

    #[test]
    fn clause_order_follows_document() {
        let s = spec(
            r#"{"Z": {"states":["s"],"transitions":[]}, "A": {"states":["s"],"transitions":[]}}"#,
        )
        .unwrap();
        let names: Vec<_> = s.clauses.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["Z", "A"]);
        assert_eq!(s.clauses[1].id.as_str(), "a1");
    }

    #[test]
    fn empty_spec_is_schema_error() {
        assert_eq!(pointer(spec("{}").unwrap_err()), "");
        assert!(matches!(spec("[]"), Err(LoadError::Schema { .. })));
    }

    #[test]
    fn syntax_errors() {
        // trailing commas are rejected
        let err = spec(r#"{"A": {"states": ["s0"], "transitions": [],},}"#).unwrap_err();
        assert!(matches!(err, LoadError::Syntax { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn undeclared_states_still_load() {
        let s = spec(
            r#"{"A": {"states": ["s0"], "transitions": [
                {"source": "s9", "destination": "s0", "trigger": "t", "conditions": ["bogus"]}]}}"#,
        )
        .unwrap();
        assert_eq!(s.clauses[0].transitions[0].source, "s9");
        assert!(s.clauses[0].transitions[0].conditions[0].parsed.is_err());
    }

    #[test]
    fn strict_keys() {
        let err = spec(r#"{"A": {"states": ["s0"], "transitions": [], "colour": 1}}"#).unwrap_err();
        assert_eq!(pointer(err), "/A/colour");
        let err = spec(r#"{"A": {"states": ["s0"]}}"#).unwrap_err();
        assert_eq!(pointer(err), "/A");
        let err = spec(
            r#"{"A/B": {"states": ["s0"], "transitions": [{"source": "s0", "destination": "s0", "trigger": 3, "conditions": []}]}}"#,
        )
        .unwrap_err();
        assert_eq!(pointer(err), "/A~1B/transitions/0/trigger");
    }

    #[test]
    fn duplicate_clause_names() {
        let err = spec(
            r#"{"A": {"states": ["s0"], "transitions": []}, "A": {"states": ["s0"], "transitions": []}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, LoadError::DuplicateClause { .. }));
        let err = spec(
            r#"{"A": {"id": "a1", "states": ["s0"], "transitions": []}, "B": {"states": ["s0"], "transitions": []}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, LoadError::DuplicateClause { .. }));
    }

    #[test]
    fn explicit_keys() {
        let s = spec(
            r#"{"A": {"id": "c5", "initial": "s1", "finals": ["s0"], "states": ["s0", "s1"], "transitions": []}}"#,
        )
        .unwrap();
        let c = &s.clauses[0];
        assert_eq!(c.id.as_str(), "c5");
        assert_eq!(c.initial, "s1");
        assert_eq!(c.finals, ["s0"]);
        assert!(c.explicit_finals);
        assert!(spec(r#"{"A": {"id": "c_5", "states": ["s0"], "transitions": []}}"#).is_err());
    }

    #[test]
    fn loads_minimal_package() {
        let p = pkg(
            r#"{"id":"p3","variables":[{"name":"x","type":"int","value":0}],
                       "functions":[{"name":"c1","returns":"bool","body":"x >= 10"}]}"#,
        )
        .unwrap();
        assert_eq!(p.id, "p3");
        assert_eq!(p.variables.len(), 1);
        assert_eq!(p.variables[0].initial, Value::Int(0));
        let c1 = p.function("c1").unwrap();
        assert!(c1.is_condition());
        let env = p.variable_types();
        assert_eq!(crate::expr::typecheck_expr(&c1.body, &env), Ok(Type::Bool));
        for (x, want) in [(0, false), (10, true)] {
            let b = [("x".to_string(), Value::Int(x))].into();
            assert_eq!(crate::expr::eval_expr(&c1.body, &b), Ok(Value::Bool(want)));
        }
    }

    #[test]
    fn package_id_rules() {
        let err = pkg(r#"{"id":"p_1"}"#).unwrap_err();
        assert_eq!(pointer(err), "/id");
        assert!(pkg(r#"{"id":""}"#).is_err());
        assert!(pkg(r#"{"id":"p1","extra":true}"#).is_err());
    }

    #[test]
    fn int_returning_functions_load() {
        let p = pkg(r#"{"id":"p1","functions":[{"name":"f","returns":"int","body":"1 + 2"}]}"#)
            .unwrap();
        assert!(!p.functions[0].is_condition());
    }

    #[test]
    fn body_parse_errors_name_the_function() {
        let err = pkg(r#"{"id":"p1","functions":[{"name":"f","returns":"bool","body":"x >"}]}"#)
            .unwrap_err();
        match err {
            LoadError::ExprParse {
                function,
                error,
                location,
            } => {
                assert_eq!(function, "f");
                assert_eq!(error.offset, 3);
                assert_eq!(location.json_pointer, "/functions/0/body");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn variable_values_match_types() {
        assert!(
            pkg(r#"{"id":"p1","variables":[{"name":"x","type":"int","value":true}]}"#).is_err()
        );
        assert!(pkg(r#"{"id":"p1","variables":[{"name":"x","type":"bool","value":true,"test_domain":[true,false]}]}"#).is_ok());
        let err = pkg(r#"{"id":"p1","variables":[{"name":"x","type":"int","value":1,"test_domain":[1,false]}]}"#)
            .unwrap_err();
        assert_eq!(pointer(err), "/variables/0/test_domain/1");
    }

    #[test]
    fn params_shadow_variables() {
        let p = pkg(r#"{"id":"p1","variables":[{"name":"x","type":"int","value":0}],
                       "functions":[{"name":"f","params":[{"name":"x","type":"int"}],"returns":"bool","body":"x > 0"}]}"#)
        .unwrap();
        assert!(p.functions[0].body.variables().is_empty());
    }

    #[test]
    fn package_dir() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_package_dir(dir.path()).unwrap().is_empty());
        fs::write(dir.path().join("p1.pkg.json"), r#"{"id":"p1"}"#).unwrap();
        fs::write(dir.path().join("p2.pkg.json"), r#"{"id":"p2"}"#).unwrap();
        fs::write(dir.path().join("notes.json"), r#"not json"#).unwrap();
        assert_eq!(load_package_dir(dir.path()).unwrap().len(), 2);
        fs::write(dir.path().join("p3.pkg.json"), r#"{"id":"p1"}"#).unwrap();
        assert!(matches!(
            load_package_dir(dir.path()),
            Err(LoadError::DuplicatePackageId { .. })
        ));
    }

    #[test]
    fn package_dir_errors_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("bad.pkg.json"), "{").unwrap();
        let err = load_package_dir(dir.path()).unwrap_err();
        assert!(err.file().ends_with("bad.pkg.json"));
    }
}
