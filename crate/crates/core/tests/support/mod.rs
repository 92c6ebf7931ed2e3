//! Shared helpers for integration and acceptance tests: fixture access,
//! random spec and graph generators, and an arbitrary-precision reference
//! evaluator for the expression language.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::{Path, PathBuf};

use mlfsm::interp::ProductState;
use mlfsm::loader::{load_contract_spec, load_contract_spec_file, load_package};
use mlfsm::{
    load_package_dir, new_env, AutomatonId, ContractSpec, DependencyGraph, ExecutionEnv,
    PackageSet, Value,
};
use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn packages() -> PackageSet {
    load_package_dir(&fixtures().join("packages")).expect("fixture packages load")
}

pub fn spec(name: &str) -> ContractSpec {
    load_contract_spec_file(&fixtures().join("specs").join(format!("{name}.json")))
        .expect("fixture spec loads")
}

pub fn invalid_spec(name: &str) -> ContractSpec {
    load_contract_spec_file(&fixtures().join("invalid").join(format!("{name}.json")))
        .expect("fixture spec loads")
}

/// Every valid spec in the fixture corpus, by file stem.
pub fn corpus() -> Vec<(String, ContractSpec)> {
    let mut files: Vec<_> = std::fs::read_dir(fixtures().join("specs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            (stem, load_contract_spec_file(&p).unwrap())
        })
        .collect()
}

// ---------------------------------------------------------------------------
// random specs

const GUARDS: &[(&str, &str)] = &[
    ("f0", "v0"),
    ("f1", "v1 >= 2"),
    ("f2", "!v0 && v1 > 0"),
    ("f3", "v1 % 2 == 1"),
    ("f4", "v1 == 0 || v0"),
];

/// Package `q` with one bool and one int variable, both with test domains.
pub fn random_package() -> PackageSet {
    let functions: Vec<String> = GUARDS
        .iter()
        .map(|(n, b)| format!(r#"{{"name":"{n}","returns":"bool","body":"{b}"}}"#))
        .collect();
    let doc = format!(
        r#"{{"id":"q","variables":[
            {{"name":"v0","type":"bool","value":false,"test_domain":[false,true]}},
            {{"name":"v1","type":"int","value":0,"test_domain":[0,1,2]}}],
            "functions":[{}]}}"#,
        functions.join(",")
    );
    let pkg = load_package(&doc, Path::new("q.pkg.json")).unwrap();
    PackageSet::from([(pkg.id.clone(), pkg)])
}

/// A spec with up to `max_clauses` clauses of up to `max_states` states.
/// Completion guards only point at earlier clauses, so the dependency graph
/// is acyclic, and each (source, trigger) pair is unique.
pub fn random_spec<R: Rng>(rng: &mut R, max_clauses: usize, max_states: usize) -> ContractSpec {
    let n = rng.gen_range(1..=max_clauses);
    let mut clauses = Vec::new();
    for k in 0..n {
        let m = rng.gen_range(1..=max_states);
        let states: Vec<String> = (0..m).map(|i| format!("\"s{i}\"")).collect();
        let mut transitions = Vec::new();
        for s in 0..m {
            let mut triggers = ["t0", "t1", "t2"];
            triggers.shuffle(rng);
            for trig in triggers.iter().take(rng.gen_range(0..=2)) {
                let dst = rng.gen_range(0..m);
                let mut conds = Vec::new();
                if k > 0 && rng.gen_bool(0.4) {
                    conds.push(format!(
                        "\"automata__a{}_iscompleted\"",
                        rng.gen_range(0..k)
                    ));
                }
                if rng.gen_bool(0.5) {
                    conds.push(format!("\"package__q_{}\"", GUARDS.choose(rng).unwrap().0));
                }
                transitions.push(format!(
                    r#"{{"source":"s{s}","destination":"s{dst}","trigger":"{trig}","conditions":[{}]}}"#,
                    conds.join(",")
                ));
            }
        }
        clauses.push(format!(
            r#""C{k}":{{"states":[{}],"transitions":[{}]}}"#,
            states.join(","),
            transitions.join(",")
        ));
    }
    let doc = format!("{{{}}}", clauses.join(","));
    load_contract_spec(&doc, Path::new("random.json")).unwrap()
}

/// Breadth-first search that drives an [`ExecutionEnv`] through every fire
/// and set event, deduplicating on product state.
pub fn replay_closure(
    spec: &ContractSpec,
    packages: &PackageSet,
    depth: usize,
) -> BTreeSet<ProductState> {
    let root = new_env(spec, packages).unwrap();
    let mut events: Vec<(bool, String, String, Value)> = Vec::new();
    for c in &spec.clauses {
        for t in c.triggers() {
            events.push((true, c.id.as_str().into(), t.into(), Value::Bool(false)));
        }
    }
    for (pid, p) in packages {
        for v in &p.variables {
            for &val in v.test_domain.as_deref().unwrap_or(&[]) {
                events.push((false, pid.clone(), v.name.clone(), val));
            }
        }
    }
    let mut seen: HashMap<ProductState, ()> = HashMap::new();
    seen.insert(root.product_state(), ());
    let mut queue: VecDeque<(ExecutionEnv, usize)> = VecDeque::from([(root, 0)]);
    while let Some((env, d)) = queue.pop_front() {
        if d == depth {
            continue;
        }
        for (fire, a, b, val) in &events {
            let mut next = env.clone();
            if *fire {
                next.fire(a, b).unwrap();
            } else {
                next.set_var(a, b, *val).unwrap();
            }
            let ps = next.product_state();
            if seen.insert(ps, ()).is_none() {
                queue.push_back((next, d + 1));
            }
        }
    }
    seen.into_keys().collect()
}

// ---------------------------------------------------------------------------
// random graphs

pub fn random_graph<R: Rng>(rng: &mut R) -> (Vec<AutomatonId>, Vec<(usize, usize)>) {
    let n = rng.gen_range(1..=8);
    let nodes: Vec<AutomatonId> = (0..n).map(AutomatonId::positional).collect();
    let density = rng.gen_range(0.0..0.35);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(density) {
                edges.push((a, b));
            }
        }
    }
    (nodes, edges)
}

pub fn build(nodes: &[AutomatonId], edges: &[(usize, usize)]) -> DependencyGraph {
    let mut g = DependencyGraph::new(nodes.to_vec());
    for &(a, b) in edges {
        g.add_edge(&nodes[a], &nodes[b]);
    }
    g
}

/// Transitive closure by repeated squaring of the adjacency relation; a
/// graph is cyclic iff some node reaches itself.
pub fn brute_force_cyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut reach = vec![vec![false; n]; n];
    for &(a, b) in edges {
        reach[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n).any(|i| reach[i][i])
}

// ---------------------------------------------------------------------------
// random expressions with a bigint reference evaluator

#[derive(Debug, Clone)]
pub enum Gen {
    Int(i64),
    Bool(bool),
    Var(&'static str),
    Not(Box<Gen>),
    Neg(Box<Gen>),
    Bin(&'static str, Box<Gen>, Box<Gen>),
}

pub const INT_VARS: [&str; 2] = ["a", "b"];
pub const BOOL_VARS: [&str; 2] = ["p", "q"];

const INTERESTING: [i64; 10] = [
    0,
    1,
    2,
    -1,
    3,
    7,
    -7,
    i64::MAX,
    i64::MIN + 1,
    4_611_686_018_427_387_904,
];

pub fn interesting_int<R: Rng>(rng: &mut R) -> i64 {
    if rng.gen_bool(0.7) {
        *INTERESTING.choose(rng).unwrap()
    } else {
        rng.gen_range(-1000..=1000)
    }
}

pub fn gen_int<R: Rng>(rng: &mut R, depth: u32) -> Gen {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.5) {
            Gen::Int(interesting_int(rng))
        } else {
            Gen::Var(INT_VARS.choose(rng).unwrap())
        };
    }
    if rng.gen_bool(0.15) {
        return Gen::Neg(Box::new(gen_int(rng, depth - 1)));
    }
    let op = *["+", "-", "*", "/", "%"].choose(rng).unwrap();
    Gen::Bin(
        op,
        Box::new(gen_int(rng, depth - 1)),
        Box::new(gen_int(rng, depth - 1)),
    )
}

pub fn gen_bool<R: Rng>(rng: &mut R, depth: u32) -> Gen {
    if depth == 0 || rng.gen_bool(0.2) {
        return if rng.gen_bool(0.4) {
            Gen::Bool(rng.gen())
        } else {
            Gen::Var(BOOL_VARS.choose(rng).unwrap())
        };
    }
    match rng.gen_range(0..5) {
        0 => Gen::Not(Box::new(gen_bool(rng, depth - 1))),
        1 | 2 => {
            let op = *["&&", "||"].choose(rng).unwrap();
            Gen::Bin(
                op,
                Box::new(gen_bool(rng, depth - 1)),
                Box::new(gen_bool(rng, depth - 1)),
            )
        }
        3 => {
            let op = *["==", "!="].choose(rng).unwrap();
            Gen::Bin(
                op,
                Box::new(gen_bool(rng, depth - 1)),
                Box::new(gen_bool(rng, depth - 1)),
            )
        }
        _ => {
            let op = *["==", "!=", "<", "<=", ">", ">="].choose(rng).unwrap();
            Gen::Bin(
                op,
                Box::new(gen_int(rng, depth - 1)),
                Box::new(gen_int(rng, depth - 1)),
            )
        }
    }
}

fn prec(g: &Gen) -> u8 {
    match g {
        Gen::Bin(op, ..) => match *op {
            "||" => 1,
            "&&" => 2,
            "==" | "!=" | "<" | "<=" | ">" | ">=" => 3,
            "+" | "-" => 4,
            _ => 5,
        },
        Gen::Not(_) | Gen::Neg(_) => 6,
        _ => 7,
    }
}

/// Prints with only the parentheses precedence requires, plus random
/// redundant ones.
pub fn render<R: Rng>(g: &Gen, rng: &mut R) -> String {
    let wrap = |s: String, need: bool, rng: &mut R| {
        if need || rng.gen_bool(0.1) {
            format!("({s})")
        } else {
            s
        }
    };
    match g {
        Gen::Int(v) if *v < 0 => format!("(-{})", v.unsigned_abs()),
        Gen::Int(v) => v.to_string(),
        Gen::Bool(b) => b.to_string(),
        Gen::Var(n) => n.to_string(),
        Gen::Not(e) | Gen::Neg(e) => {
            let sym = if matches!(g, Gen::Not(_)) { "!" } else { "-" };
            let inner = render(e, rng);
            format!("{sym} {}", wrap(inner, prec(e) < 6, rng))
        }
        Gen::Bin(op, l, r) => {
            let p = prec(g);
            let ls = render(l, rng);
            let rs = render(r, rng);
            let l_need = prec(l) < p || (p == 3 && prec(l) == 3);
            let r_need = prec(r) <= p;
            format!("{} {op} {}", wrap(ls, l_need, rng), wrap(rs, r_need, rng))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Oracle {
    Int(i64),
    Bool(bool),
    DivisionByZero,
    Overflow,
}

fn in_range(v: BigInt) -> Result<BigInt, Oracle> {
    if v >= BigInt::from(i64::MIN) && v <= BigInt::from(i64::MAX) {
        Ok(v)
    } else {
        Err(Oracle::Overflow)
    }
}

fn oracle_int(g: &Gen, env: &BTreeMap<String, Value>) -> Result<BigInt, Oracle> {
    match g {
        Gen::Int(v) => Ok(BigInt::from(*v)),
        Gen::Var(n) => match env[*n] {
            Value::Int(v) => Ok(BigInt::from(v)),
            Value::Bool(_) => unreachable!("generator is well-typed"),
        },
        Gen::Neg(e) => in_range(-oracle_int(e, env)?),
        Gen::Bin(op, l, r) => {
            let a = oracle_int(l, env)?;
            let b = oracle_int(r, env)?;
            let zero = BigInt::from(0);
            match *op {
                "+" => in_range(a + b),
                "-" => in_range(a - b),
                "*" => in_range(a * b),
                // BigInt division truncates toward zero and the remainder
                // takes the dividend's sign
                "/" if b == zero => Err(Oracle::DivisionByZero),
                "/" => in_range(a / b),
                "%" if b == zero => Err(Oracle::DivisionByZero),
                "%" => in_range(a % b),
                _ => unreachable!(),
            }
        }
        _ => unreachable!("generator is well-typed"),
    }
}

fn oracle_bool(g: &Gen, env: &BTreeMap<String, Value>) -> Result<bool, Oracle> {
    match g {
        Gen::Bool(b) => Ok(*b),
        Gen::Var(n) => match env[*n] {
            Value::Bool(b) => Ok(b),
            Value::Int(_) => unreachable!(),
        },
        Gen::Not(e) => Ok(!oracle_bool(e, env)?),
        Gen::Bin("&&", l, r) => Ok(oracle_bool(l, env)? && oracle_bool(r, env)?),
        Gen::Bin("||", l, r) => Ok(oracle_bool(l, env)? || oracle_bool(r, env)?),
        Gen::Bin(op, l, r) => {
            let int_operands = matches!(prec(l), 4..=5) || is_int(l);
            if int_operands {
                let a = oracle_int(l, env)?;
                let b = oracle_int(r, env)?;
                Ok(match *op {
                    "==" => a == b,
                    "!=" => a != b,
                    "<" => a < b,
                    "<=" => a <= b,
                    ">" => a > b,
                    ">=" => a >= b,
                    _ => unreachable!(),
                })
            } else {
                let a = oracle_bool(l, env)?;
                let b = oracle_bool(r, env)?;
                Ok(if *op == "==" { a == b } else { a != b })
            }
        }
        _ => unreachable!(),
    }
}

pub fn is_int(g: &Gen) -> bool {
    match g {
        Gen::Int(_) | Gen::Neg(_) => true,
        Gen::Var(n) => INT_VARS.contains(n),
        Gen::Bin(op, ..) => ["+", "-", "*", "/", "%"].contains(op),
        _ => false,
    }
}

pub fn oracle(g: &Gen, env: &BTreeMap<String, Value>) -> Oracle {
    let r = if is_int(g) {
        oracle_int(g, env).map(|v| Oracle::Int(i64::try_from(v).unwrap()))
    } else {
        oracle_bool(g, env).map(Oracle::Bool)
    };
    r.unwrap_or_else(|e| e)
}

pub fn random_bindings<R: Rng>(rng: &mut R) -> BTreeMap<String, Value> {
    let mut env = BTreeMap::new();
    for v in INT_VARS {
        env.insert(v.to_string(), Value::Int(interesting_int(rng)));
    }
    for v in BOOL_VARS {
        env.insert(v.to_string(), Value::Bool(rng.gen()));
    }
    env
}

/// Runs `count` random expressions through parse, typecheck and eval and
/// compares each against the reference evaluator on `bindings_per_expr`
/// bindings. Returns the first mismatch.
pub fn expression_parity<R: Rng>(
    rng: &mut R,
    count: usize,
    bindings_per_expr: usize,
) -> Result<usize, String> {
    use mlfsm::expr::EvalError;
    use mlfsm::{eval_expr, parse_expr, typecheck_expr, Type};
    let types: BTreeMap<String, Type> = INT_VARS
        .iter()
        .map(|v| (v.to_string(), Type::Int))
        .chain(BOOL_VARS.iter().map(|v| (v.to_string(), Type::Bool)))
        .collect();
    let mut checked = 0;
    for _ in 0..count {
        let depth = rng.gen_range(1..=5);
        let g = if rng.gen_bool(0.5) {
            gen_int(rng, depth)
        } else {
            gen_bool(rng, depth)
        };
        let text = render(&g, rng);
        let ast = parse_expr(&text).map_err(|e| format!("`{text}` failed to parse: {e}"))?;
        let ty = typecheck_expr(&ast, &types)
            .map_err(|e| format!("`{text}` failed to typecheck: {e}"))?;
        let want_ty = if is_int(&g) { Type::Int } else { Type::Bool };
        if ty != want_ty {
            return Err(format!("`{text}` typed {ty}, expected {want_ty}"));
        }
        for _ in 0..bindings_per_expr {
            let env = random_bindings(rng);
            let got = match eval_expr(&ast, &env) {
                Ok(Value::Int(v)) => Oracle::Int(v),
                Ok(Value::Bool(b)) => Oracle::Bool(b),
                Err(EvalError::DivisionByZero) => Oracle::DivisionByZero,
                Err(EvalError::Overflow) => Oracle::Overflow,
                Err(e) => return Err(format!("`{text}` raised {e}")),
            };
            let want = oracle(&g, &env);
            if got != want {
                return Err(format!(
                    "`{text}` with {env:?}: got {got:?}, expected {want:?}"
                ));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Probes that only pass if `&&` and `||` skip their right operand.
pub fn short_circuit_probes() -> Result<usize, String> {
    use mlfsm::{eval_expr, parse_expr};
    let probes: &[(&str, i64, Option<bool>)] = &[
        ("false && 1 / 0 == 0", 0, Some(false)),
        ("true || 1 / 0 == 0", 0, Some(true)),
        ("x != 0 && 10 / x > 1", 0, Some(false)),
        ("x == 0 || 10 % x == 0", 0, Some(true)),
        ("!(x == 0) && x * 9223372036854775807 > 0", 0, Some(false)),
        ("true && 1 / 0 == 0", 0, None),
        ("false || 1 % x == 0", 0, None),
    ];
    for (text, x, want) in probes {
        let ast = parse_expr(text).map_err(|e| format!("{text}: {e}"))?;
        let env = BTreeMap::from([("x".to_string(), Value::Int(*x))]);
        let got = eval_expr(&ast, &env).ok().and_then(|v| v.as_bool());
        if got != *want {
            return Err(format!("`{text}`: got {got:?}, expected {want:?}"));
        }
    }
    Ok(probes.len())
}
