//! Security lints over specs and generated Solidity.
//!
//! Spec-level rules:
//!
//! | rule | severity | check |
//! |------|----------|-------|
//! | S1 | warn | clause cannot reach any final state |
//! | S2 | warn | condition function reads no variable (constant guard) |
//! | S3 | info | clause neither depends on nor is depended on by another |
//!
//! Source-level rules, applied to comment- and string-stripped text:
//!
//! | rule | severity | check |
//! |------|----------|-------|
//! | A1 | fail | `tx.origin` |
//! | A2 | fail | `delegatecall` |
//! | A3 | fail | `selfdestruct` |
//! | A4 | fail | inline `assembly` |
//! | A5 | fail | low-level `.call`, `.send(`, `.transfer(` |
//! | A6 | fail | pragma missing or not confined to `>=0.8.0 <0.9.0` |
//! | A7 | fail | state write after a non-view external call in one function |
//! | A8 | warn | `block.timestamp`, `block.number` or `blockhash` reads |
//!
//! Time manipulation, transaction ordering and denial of service have no
//! sound syntactic detector; the generator never emits time reads, loops or
//! call fan-out, and A8 flags the first of these in hand-written sources.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Serialize, Serializer};

use crate::codegen::GeneratedBundle;
use crate::depgraph::build_graph;
use crate::model::{ConditionRef, ContractSpec};
use crate::package::PackageSet;
use crate::validate::reachable_states;

pub const RULESET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AuditRule {
    S1,
    S2,
    S3,
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
    A7,
    A8,
}

impl AuditRule {
    pub fn severity(self) -> AuditSeverity {
        use AuditRule::*;
        match self {
            S1 | S2 | A8 => AuditSeverity::Warn,
            S3 => AuditSeverity::Info,
            A1 | A2 | A3 | A4 | A5 | A6 | A7 => AuditSeverity::Fail,
        }
    }
}

impl fmt::Display for AuditRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Serialize for AuditRule {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditSeverity {
    Info,
    Warn,
    Fail,
}

impl fmt::Display for AuditSeverity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AuditSeverity::Info => "info",
            AuditSeverity::Warn => "warn",
            AuditSeverity::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditFinding {
    pub rule: AuditRule,
    pub severity: AuditSeverity,
    /// Unit id for source rules, clause id for spec rules.
    pub subject: String,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

impl AuditFinding {
    fn new(rule: AuditRule, subject: &str, detail: String, line: Option<usize>) -> Self {
        AuditFinding {
            rule,
            severity: rule.severity(),
            subject: subject.to_string(),
            detail,
            line,
        }
    }

    pub fn is_fail(&self) -> bool {
        self.severity == AuditSeverity::Fail
    }
}

impl fmt::Display for AuditFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}] {}", self.severity, self.rule, self.subject)?;
        if let Some(l) = self.line {
            write!(f, ":{l}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

pub fn has_failures(findings: &[AuditFinding]) -> bool {
    findings.iter().any(AuditFinding::is_fail)
}

pub fn audit_spec(spec: &ContractSpec, packages: &PackageSet) -> Vec<AuditFinding> {
    let graph = build_graph(spec);
    let mut out = Vec::new();
    for clause in &spec.clauses {
        let subject = clause.id.as_str();
        let reach = reachable_states(clause);
        if !clause.finals.iter().any(|f| reach.contains(f)) {
            out.push(AuditFinding::new(
                AuditRule::S1,
                subject,
                format!("no final state reachable from `{}`", clause.initial),
                None,
            ));
        }
        let mut constant = BTreeSet::new();
        for cond in clause.conditions() {
            if let ConditionRef::PackageCall { package, function } = cond {
                let f = packages.get(package).and_then(|p| p.function(function));
                if let Some(f) = f {
                    if f.body.variables().is_empty() && constant.insert(cond.to_string()) {
                        out.push(AuditFinding::new(
                            AuditRule::S2,
                            subject,
                            format!("guard `{cond}` reads no package variable (`{}`)", f.source),
                            None,
                        ));
                    }
                }
            }
        }
        if graph.dependencies(&clause.id).is_empty() && graph.dependents(&clause.id).is_empty() {
            out.push(AuditFinding::new(
                AuditRule::S3,
                subject,
                "clause has no dependency links to other clauses".into(),
                None,
            ));
        }
    }
    out
}

pub fn audit_generated(bundle: &GeneratedBundle) -> Vec<AuditFinding> {
    let sources: Vec<(String, String)> = bundle
        .units
        .iter()
        .map(|u| (u.id.clone(), u.source.clone()))
        .collect();
    audit_sources(&sources)
}

/// Reads every `*.sol` file in `dir` in file-name order as `(stem, text)`.
pub fn read_source_dir(dir: &Path) -> std::io::Result<Vec<(String, String)>> {
    let mut files: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "sol"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let stem = p
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            fs::read_to_string(&p).map(|text| (stem, text))
        })
        .collect()
}

/// Audits `(unit id, source)` pairs together; view functions declared in
/// any unit are known when checking calls from the others.
pub fn audit_sources(sources: &[(String, String)]) -> Vec<AuditFinding> {
    let scanned: Vec<Scanned> = sources.iter().map(|(_, s)| Scanned::new(s)).collect();
    let mut views: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for s in &scanned {
        for c in &s.contracts {
            views
                .entry(c.name.clone())
                .or_default()
                .extend(c.views.iter().cloned());
        }
    }

    let mut out = Vec::new();
    for ((id, _), s) in sources.iter().zip(&scanned) {
        let mut unit = Vec::new();
        token_rules(id, s, &mut unit);
        pragma_rule(id, s, &mut unit);
        for c in &s.contracts {
            checks_effects_rule(id, s, c, &views, &mut unit);
        }
        unit.sort_by_key(|f| (f.rule, f.line));
        out.extend(unit);
    }
    out
}

/// Source text with comment bodies and string contents blanked out.
/// Byte offsets and line breaks are preserved.
struct Scanned {
    text: String,
    line_starts: Vec<usize>,
    contracts: Vec<ContractInfo>,
}

#[derive(Debug, Default)]
struct ContractInfo {
    name: String,
    views: BTreeSet<String>,
    /// state variable name -> declared type (first word)
    state_vars: BTreeMap<String, String>,
    /// byte ranges of function/constructor/modifier bodies (inside braces)
    bodies: Vec<(usize, usize)>,
}

fn blank(src: &str) -> String {
    let bytes = src.as_bytes();
    let mut out = bytes.to_vec();
    let mut i = 0;
    let mask = |out: &mut Vec<u8>, j: usize| {
        if out[j] != b'\n' {
            out[j] = b' ';
        }
    };
    while i < bytes.len() {
        match bytes[i] {
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    mask(&mut out, i);
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let end = src[i + 2..]
                    .find("*/")
                    .map_or(bytes.len(), |e| i + 2 + e + 2);
                for j in i..end {
                    mask(&mut out, j);
                }
                i = end;
            }
            q @ (b'"' | b'\'') => {
                i += 1;
                while i < bytes.len() && bytes[i] != q && bytes[i] != b'\n' {
                    if bytes[i] == b'\\' && i + 1 < bytes.len() {
                        mask(&mut out, i);
                        i += 1;
                    }
                    mask(&mut out, i);
                    i += 1;
                }
                i += 1;
            }
            _ => i += 1,
        }
    }
    // only ASCII bytes were replaced, and whole multi-byte sequences sit
    // inside masked regions or untouched
    String::from_utf8(out).unwrap_or_else(|e| String::from_utf8_lossy(e.as_bytes()).into_owned())
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Word(&'a str),
    Punct(u8),
}

fn tokens(text: &str, start: usize, end: usize) -> Vec<(usize, Tok<'_>)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = start;
    while i < end {
        let c = bytes[i];
        if c.is_ascii_alphanumeric() || c == b'_' || c == b'$' {
            let s = i;
            while i < end
                && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$')
            {
                i += 1;
            }
            out.push((s, Tok::Word(&text[s..i])));
        } else {
            if !c.is_ascii_whitespace() && c.is_ascii() {
                out.push((i, Tok::Punct(c)));
            }
            i += 1;
        }
    }
    out
}

fn matching(toks: &[(usize, Tok)], open_idx: usize, open: u8, close: u8) -> Option<usize> {
    let mut depth = 0;
    for (k, (_, t)) in toks.iter().enumerate().skip(open_idx) {
        match t {
            Tok::Punct(c) if *c == open => depth += 1,
            Tok::Punct(c) if *c == close => {
                depth -= 1;
                if depth == 0 {
                    return Some(k);
                }
            }
            _ => {}
        }
    }
    None
}

impl Scanned {
    fn new(src: &str) -> Self {
        let text = blank(src);
        let mut line_starts = vec![0];
        line_starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        let contracts = parse_contracts(&text);
        Scanned {
            text,
            line_starts,
            contracts,
        }
    }

    fn line_of(&self, offset: usize) -> usize {
        self.line_starts.partition_point(|&s| s <= offset)
    }
}

fn parse_contracts(text: &str) -> Vec<ContractInfo> {
    let toks = tokens(text, 0, text.len());
    let mut out = Vec::new();
    let mut k = 0;
    while k < toks.len() {
        let is_decl = matches!(toks[k].1, Tok::Word("contract" | "library" | "interface"));
        let prev_is_dot = k > 0 && toks[k - 1].1 == Tok::Punct(b'.');
        if is_decl && !prev_is_dot {
            if let Some((_, Tok::Word(name))) = toks.get(k + 1) {
                let open = (k + 2..toks.len()).find(|&j| toks[j].1 == Tok::Punct(b'{'));
                if let Some(open) = open {
                    let close = matching(&toks, open, b'{', b'}').unwrap_or(toks.len() - 1);
                    let mut info = ContractInfo {
                        name: name.to_string(),
                        ..Default::default()
                    };
                    parse_members(&toks[open + 1..close], &mut info);
                    out.push(info);
                    k = close + 1;
                    continue;
                }
            }
        }
        k += 1;
    }
    out
}

const ELEMENTARY: &[&str] = &["bool", "string", "bytes", "mapping", "byte"];

fn is_elementary(ty: &str) -> bool {
    ELEMENTARY.contains(&ty)
        || ["uint", "int", "bytes", "fixed", "ufixed"].iter().any(|p| {
            ty.strip_prefix(p)
                .is_some_and(|r| r.bytes().all(|b| b.is_ascii_digit() || b == b'x'))
        })
}

fn parse_members(toks: &[(usize, Tok)], info: &mut ContractInfo) {
    let mut start = 0;
    let mut k = 0;
    while k < toks.len() {
        match toks[k].1 {
            Tok::Punct(b';') => {
                member_statement(&toks[start..k], info);
                k += 1;
                start = k;
            }
            Tok::Punct(b'{') => {
                let close = matching(toks, k, b'{', b'}').unwrap_or(toks.len() - 1);
                let header = &toks[start..k];
                let kind = header.iter().find_map(|(_, t)| match t {
                    Tok::Word(w) => Some(*w),
                    _ => None,
                });
                if matches!(
                    kind,
                    Some("function" | "constructor" | "modifier" | "receive" | "fallback")
                ) {
                    record_function(header, info);
                    let body_start = toks[k].0 + 1;
                    let body_end = toks[close].0;
                    info.bodies.push((body_start, body_end));
                }
                k = close + 1;
                start = k;
            }
            _ => k += 1,
        }
    }
}

fn words<'a>(toks: &'a [(usize, Tok<'a>)]) -> impl Iterator<Item = &'a str> + 'a {
    toks.iter().filter_map(|(_, t)| match t {
        Tok::Word(w) => Some(*w),
        _ => None,
    })
}

fn record_function(header: &[(usize, Tok)], info: &mut ContractInfo) {
    let mut w = words(header);
    if w.next() != Some("function") {
        return;
    }
    let Some(name) = w.next() else { return };
    if words(header).any(|x| x == "view" || x == "pure") {
        info.views.insert(name.to_string());
    }
}

fn member_statement(stmt: &[(usize, Tok)], info: &mut ContractInfo) {
    let Some(first) = words(stmt).next() else {
        return;
    };
    match first {
        "function" => record_function(stmt, info),
        "event" | "error" | "using" | "pragma" | "import" => {}
        ty => {
            // cut at the initializer: a lone `=` (not `==` or `=>`)
            let mut end = stmt.len();
            for j in 0..stmt.len() {
                if stmt[j].1 == Tok::Punct(b'=') {
                    let next = stmt.get(j + 1).map(|t| &t.1);
                    let prev = j.checked_sub(1).map(|p| &stmt[p].1);
                    let compound = matches!(next, Some(Tok::Punct(b'=' | b'>')))
                        || matches!(prev, Some(Tok::Punct(b'=' | b'!' | b'<' | b'>')));
                    if !compound {
                        end = j;
                        break;
                    }
                }
            }
            let decl = &stmt[..end];
            if let Some(name) = words(decl).last() {
                if name != ty {
                    info.state_vars.insert(name.to_string(), ty.to_string());
                    if words(decl).any(|x| x == "public") {
                        info.views.insert(name.to_string());
                    }
                }
            }
        }
    }
}

fn find_words<'a>(text: &'a str, word: &'a str) -> impl Iterator<Item = usize> + 'a {
    let bytes = text.as_bytes();
    let is_ident = |b: u8| b.is_ascii_alphanumeric() || b == b'_' || b == b'$';
    text.match_indices(word).filter_map(move |(i, _)| {
        let before = i == 0 || !is_ident(bytes[i - 1]);
        let after = bytes.get(i + word.len()).is_none_or(|&b| !is_ident(b));
        (before && after).then_some(i)
    })
}

/// Offsets of `object . member` (whitespace allowed around the dot).
fn find_members<'a>(text: &'a str, object: &'a str, member: &'a str) -> Vec<usize> {
    find_words(text, object)
        .filter(|&i| {
            let rest = text[i + object.len()..].trim_start();
            rest.strip_prefix('.')
                .map(str::trim_start)
                .and_then(|r| r.strip_prefix(member))
                .is_some_and(|r| {
                    r.bytes()
                        .next()
                        .is_none_or(|b| !(b.is_ascii_alphanumeric() || b == b'_'))
                })
        })
        .collect()
}

/// Offsets of `. member` followed by `(` or `{`, with any receiver.
fn find_low_level(text: &str, member: &str) -> Vec<usize> {
    find_words(text, member)
        .filter(|&i| {
            let before = text[..i].trim_end();
            let after = text[i + member.len()..].trim_start();
            before.ends_with('.') && (after.starts_with('(') || after.starts_with('{'))
        })
        .collect()
}

fn token_rules(id: &str, s: &Scanned, out: &mut Vec<AuditFinding>) {
    let mut hit = |rule: AuditRule, offsets: Vec<usize>, what: &str| {
        for off in offsets {
            out.push(AuditFinding::new(
                rule,
                id,
                format!("uses `{what}`"),
                Some(s.line_of(off)),
            ));
        }
    };
    let t = s.text.as_str();
    hit(AuditRule::A1, find_members(t, "tx", "origin"), "tx.origin");
    hit(
        AuditRule::A2,
        find_words(t, "delegatecall").collect(),
        "delegatecall",
    );
    hit(
        AuditRule::A3,
        find_words(t, "selfdestruct").collect(),
        "selfdestruct",
    );
    hit(AuditRule::A3, find_words(t, "suicide").collect(), "suicide");
    hit(
        AuditRule::A4,
        find_words(t, "assembly").collect(),
        "assembly",
    );
    for m in ["call", "send", "transfer"] {
        hit(AuditRule::A5, find_low_level(t, m), &format!(".{m}("));
    }
    hit(
        AuditRule::A8,
        find_members(t, "block", "timestamp"),
        "block.timestamp",
    );
    hit(
        AuditRule::A8,
        find_members(t, "block", "number"),
        "block.number",
    );
    hit(
        AuditRule::A8,
        find_words(t, "blockhash").collect(),
        "blockhash",
    );
}

type Version = (u64, u64, u64);

fn parse_version(s: &str) -> Option<Version> {
    let mut parts = s.split('.').map(|p| p.parse::<u64>().ok());
    let major = parts.next()??;
    let minor = parts.next().unwrap_or(Some(0))?;
    let patch = parts.next().unwrap_or(Some(0))?;
    if parts.next().is_some() {
        return None;
    }
    Some((major, minor, patch))
}

/// True when every version admitted by `range` lies in `[0.8.0, 0.9.0)`.
pub fn pragma_pins_08(range: &str) -> bool {
    const LOW: Version = (0, 8, 0);
    const HIGH: Version = (0, 9, 0);
    if range.trim().is_empty() {
        return false;
    }
    range.split("||").all(|alt| {
        let mut low: Option<Version> = None;
        let mut high: Option<(Version, bool)> = None; // (bound, inclusive)
                                                      // glue operators to their versions: ">= 0.8.0" -> ">=0.8.0"
        let compact = alt
            .replace(">= ", ">=")
            .replace("<= ", "<=")
            .replace("> ", ">")
            .replace("< ", "<")
            .replace("^ ", "^")
            .replace("~ ", "~")
            .replace("= ", "=");
        let mut any = false;
        for part in compact.split_whitespace() {
            any = true;
            let (op, ver) = match part.find(|c: char| c.is_ascii_digit()) {
                Some(i) => part.split_at(i),
                None => return false,
            };
            let Some(v) = parse_version(ver) else {
                return false;
            };
            let raise = |low: &mut Option<Version>, v: Version| {
                *low = Some(low.map_or(v, |l| l.max(v)));
            };
            let lower = |high: &mut Option<(Version, bool)>, v: Version, incl: bool| {
                *high = Some(match *high {
                    Some((h, hi)) if (h, hi) <= (v, incl) => (h, hi),
                    _ => (v, incl),
                });
            };
            match op {
                "^" | "~" => {
                    raise(&mut low, v);
                    let cap = if op == "^" && v.0 > 0 {
                        (v.0 + 1, 0, 0)
                    } else {
                        (v.0, v.1 + 1, 0)
                    };
                    lower(&mut high, cap, false);
                }
                "" | "=" => {
                    raise(&mut low, v);
                    lower(&mut high, v, true);
                }
                ">=" => raise(&mut low, v),
                ">" => raise(&mut low, (v.0, v.1, v.2 + 1)),
                "<" => lower(&mut high, v, false),
                "<=" => lower(&mut high, v, true),
                _ => return false,
            }
        }
        let low_ok = low.is_some_and(|l| l >= LOW);
        let high_ok = match high {
            Some((h, false)) => h <= HIGH,
            Some((h, true)) => h < HIGH,
            None => false,
        };
        any && low_ok && high_ok
    })
}

fn pragma_rule(id: &str, s: &Scanned, out: &mut Vec<AuditFinding>) {
    let mut found = false;
    for off in find_words(&s.text, "pragma") {
        let rest = &s.text[off + "pragma".len()..];
        let rest_trim = rest.trim_start();
        let Some(after) = rest_trim.strip_prefix("solidity") else {
            continue;
        };
        found = true;
        let range = after.split(';').next().unwrap_or("").trim();
        if !pragma_pins_08(range) {
            out.push(AuditFinding::new(
                AuditRule::A6,
                id,
                format!("pragma `solidity {range}` is not pinned to the 0.8 series"),
                Some(s.line_of(off)),
            ));
        }
    }
    if !found {
        out.push(AuditFinding::new(
            AuditRule::A6,
            id,
            "no `pragma solidity` directive".into(),
            None,
        ));
    }
}

const GLOBALS: &[&str] = &[
    "abi", "msg", "block", "tx", "super", "type", "bytes", "string", "Math",
];

fn checks_effects_rule(
    id: &str,
    s: &Scanned,
    c: &ContractInfo,
    views: &BTreeMap<String, BTreeSet<String>>,
    out: &mut Vec<AuditFinding>,
) {
    for &(start, end) in &c.bodies {
        let toks = tokens(&s.text, start, end);
        let mut first_call: Option<usize> = None;
        for k in 0..toks.len() {
            // external call: <recv> . <fn> (
            if toks[k].1 == Tok::Punct(b'.') {
                if let (Some((_, Tok::Word(f))), Some((_, Tok::Punct(b'(' | b'{')))) =
                    (toks.get(k + 1), toks.get(k + 2))
                {
                    if first_call.is_none() && is_mutating_call(&toks, k, f, c, views) {
                        first_call = Some(toks[k].0);
                    }
                }
            }
            if let Tok::Word(w) = toks[k].1 {
                let Some(call_at) = first_call else { continue };
                if toks[k].0 < call_at || !c.state_vars.contains_key(w) {
                    continue;
                }
                if k > 0 && toks[k - 1].1 == Tok::Punct(b'.') {
                    continue;
                }
                if writes_at(&toks, k) {
                    out.push(AuditFinding::new(
                        AuditRule::A7,
                        id,
                        format!("state variable `{w}` written after an external call"),
                        Some(s.line_of(toks[k].0)),
                    ));
                    break;
                }
            }
        }
    }
}

fn is_mutating_call(
    toks: &[(usize, Tok)],
    dot: usize,
    function: &str,
    c: &ContractInfo,
    views: &BTreeMap<String, BTreeSet<String>>,
) -> bool {
    if matches!(function, "call" | "send" | "transfer" | "delegatecall") {
        return true;
    }
    if function == "staticcall" {
        return false;
    }
    let receiver_type: Option<String> = match dot.checked_sub(1).map(|p| &toks[p].1) {
        Some(Tok::Word(r)) if GLOBALS.contains(r) => return false,
        Some(Tok::Word("this")) => Some(c.name.clone()),
        Some(Tok::Word(r)) => match c.state_vars.get(*r) {
            Some(ty) if is_elementary(ty) => return false,
            Some(ty) => Some(ty.clone()),
            None => None,
        },
        Some(Tok::Punct(b')')) => {
            // cast: T(expr).f(
            let mut depth = 0;
            let mut open = None;
            for j in (0..dot).rev() {
                match toks[j].1 {
                    Tok::Punct(b')') => depth += 1,
                    Tok::Punct(b'(') => {
                        depth -= 1;
                        if depth == 0 {
                            open = Some(j);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            match open.and_then(|j| j.checked_sub(1)).map(|j| &toks[j].1) {
                Some(Tok::Word(t)) => Some(t.to_string()),
                _ => None,
            }
        }
        _ => None,
    };
    match receiver_type.and_then(|t| views.get(&t)) {
        Some(v) => !v.contains(function),
        None => true,
    }
}

/// Whether the word at `k` is the target of an assignment, compound
/// assignment, increment or `delete`.
fn writes_at(toks: &[(usize, Tok)], k: usize) -> bool {
    let punct = |i: usize| match toks.get(i) {
        Some((_, Tok::Punct(c))) => Some(*c),
        _ => None,
    };
    if k >= 2
        && matches!(
            (punct(k - 2), punct(k - 1)),
            (Some(b'+'), Some(b'+')) | (Some(b'-'), Some(b'-'))
        )
    {
        return true;
    }
    if k >= 1 && toks[k - 1].1 == Tok::Word("delete") {
        return true;
    }
    // skip index and member suffixes: x[..].y[..]
    let mut j = k + 1;
    loop {
        match punct(j) {
            Some(b'[') => match matching(toks, j, b'[', b']') {
                Some(close) => j = close + 1,
                None => return false,
            },
            Some(b'.') if matches!(toks.get(j + 1), Some((_, Tok::Word(_)))) => j += 2,
            _ => break,
        }
    }
    match (punct(j), punct(j + 1), punct(j + 2)) {
        (Some(b'='), Some(b'='), _) => false,
        (Some(b'='), _, _) => true,
        (Some(b'+' | b'-' | b'*' | b'/' | b'%' | b'|' | b'&' | b'^'), Some(b'='), _) => true,
        (Some(b'+'), Some(b'+'), _) | (Some(b'-'), Some(b'-'), _) => true,
        (Some(b'<'), Some(b'<'), Some(b'=')) | (Some(b'>'), Some(b'>'), Some(b'=')) => true,
        _ => false,
    }
}
