use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mlfsm::audit::{self, AuditFinding, AuditSeverity, RULESET_VERSION};
use mlfsm::interp::{parse_script, InterpError};
use mlfsm::loader::load_contract_spec_file;
use mlfsm::validate::Severity;
use mlfsm::{
    build_graph, generate, load_package_dir, new_env, to_dot, write_bundle, AutomatonId,
    ContractSpec, Diagnostic, GeneratedBundle, GenerationError, LoadError, PackageSet,
};
use serde_json::json;

use crate::output::{Output, Tone};

pub enum Outcome {
    Success,
    Failed,
}

pub enum Failure {
    Usage(String),
    Internal(String),
}

type CmdResult = Result<Outcome, Failure>;

/// Loaded inputs, or the reason loading stopped.
enum Loaded<T> {
    Ok(T),
    Rejected,
}

fn load_spec(out: &Output, path: &Path) -> Result<Loaded<ContractSpec>, Failure> {
    if !path.is_file() {
        return Err(Failure::Usage(format!("{}: no such file", path.display())));
    }
    match load_contract_spec_file(path) {
        Ok(s) => Ok(Loaded::Ok(s)),
        Err(LoadError::Io { path, source }) => {
            Err(Failure::Usage(format!("{}: {source}", path.display())))
        }
        Err(e) => {
            out.error(&e.to_string());
            Ok(Loaded::Rejected)
        }
    }
}

fn load_packages(out: &Output, dir: Option<&Path>) -> Result<Loaded<PackageSet>, Failure> {
    let Some(dir) = dir else {
        return Ok(Loaded::Ok(PackageSet::new()));
    };
    if !dir.is_dir() {
        return Err(Failure::Usage(format!(
            "{}: no such directory",
            dir.display()
        )));
    }
    match load_package_dir(dir) {
        Ok(p) => Ok(Loaded::Ok(p)),
        Err(LoadError::Io { path, source }) => {
            Err(Failure::Usage(format!("{}: {source}", path.display())))
        }
        Err(e) => {
            out.error(&e.to_string());
            Ok(Loaded::Rejected)
        }
    }
}

macro_rules! loaded {
    ($e:expr) => {
        match $e? {
            Loaded::Ok(v) => v,
            Loaded::Rejected => return Ok(Outcome::Failed),
        }
    };
}

fn count(diags: &[Diagnostic], sev: Severity) -> usize {
    diags.iter().filter(|d| d.severity == sev).count()
}

fn print_diags(out: &Output, diags: &[Diagnostic]) {
    for d in diags {
        out.diag(&d.to_string());
    }
}

fn print_findings(out: &Output, findings: &[AuditFinding]) {
    for f in findings {
        out.diag(&f.to_string());
    }
}

fn findings_count(findings: &[AuditFinding], sev: AuditSeverity) -> usize {
    findings.iter().filter(|f| f.severity == sev).count()
}

fn internal(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Internal(format!("{}: {e}", path.display()))
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
fn write_file_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = parent_dir(path);
    fs::create_dir_all(&dir).map_err(internal(&dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(internal(&dir))?;
    tmp.write_all(bytes).map_err(internal(path))?;
    tmp.persist(path)
        .map_err(|e| Failure::Internal(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Writes the bundle into a staging directory next to `out_dir`, then moves
/// it into place.
fn publish_bundle(bundle: &GeneratedBundle, out_dir: &Path) -> Result<(), Failure> {
    let parent = parent_dir(out_dir);
    fs::create_dir_all(&parent).map_err(internal(&parent))?;
    let stage = tempfile::Builder::new()
        .prefix(".mlfsm-stage")
        .tempdir_in(&parent)
        .map_err(internal(&parent))?;
    write_bundle(bundle, stage.path()).map_err(|e| Failure::Internal(e.to_string()))?;
    if !out_dir.exists() {
        fs::rename(stage.path(), out_dir).map_err(internal(out_dir))?;
        // the staging directory now lives at out_dir
        let _ = stage.keep();
        return Ok(());
    }
    let mut names: Vec<_> = fs::read_dir(stage.path())
        .map_err(internal(stage.path()))?
        .filter_map(|e| e.ok().map(|e| e.file_name()))
        .collect();
    names.sort();
    for name in names {
        let dst = out_dir.join(&name);
        fs::rename(stage.path().join(&name), &dst).map_err(internal(&dst))?;
    }
    Ok(())
}

pub fn validate(
    out: &Output,
    strict: bool,
    spec: &Path,
    packages: Option<&Path>,
    json: bool,
) -> CmdResult {
    let spec_path = spec;
    let spec = loaded!(load_spec(out, spec_path));
    let packages = loaded!(load_packages(out, packages));
    let diags = mlfsm::validate(&spec, &packages);
    let errors = count(&diags, Severity::Error);
    let warnings = count(&diags, Severity::Warning);
    if json {
        let report = json!({
            "spec": spec.name,
            "file": spec_path,
            "errors": errors,
            "warnings": warnings,
            "diagnostics": diags,
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        print_diags(out, &diags);
    }
    let failed = errors > 0 || (strict && warnings > 0);
    if !json {
        let tone = if failed { Tone::Error } else { Tone::Ok };
        let label = if failed { "failed" } else { "ok" };
        out.note(
            tone,
            label,
            &format!("{}: {errors} error(s), {warnings} warning(s)", spec.name),
        );
    }
    Ok(if failed {
        Outcome::Failed
    } else {
        Outcome::Success
    })
}

pub fn graph(out: &Output, spec: &Path, dot: Option<&Path>, focus: Option<&str>) -> CmdResult {
    let spec = loaded!(load_spec(out, spec));
    let graph = build_graph(&spec);
    let focus = focus.map(AutomatonId::from);
    let text = to_dot(&graph, &spec, focus.as_ref())
        .map_err(|e| Failure::Usage(format!("unknown clause `{}` for --focus", e.0)))?;
    match dot {
        Some(path) => write_file_atomic(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(Outcome::Success)
}

pub fn gen(
    out: &Output,
    strict: bool,
    spec: &Path,
    packages: Option<&Path>,
    out_dir: &Path,
) -> CmdResult {
    if out_dir.exists() && !out_dir.is_dir() {
        return Err(Failure::Usage(format!(
            "{}: not a directory",
            out_dir.display()
        )));
    }
    let spec = loaded!(load_spec(out, spec));
    let packages = loaded!(load_packages(out, packages));

    let diags = mlfsm::validate(&spec, &packages);
    print_diags(out, &diags);
    let warnings = count(&diags, Severity::Warning);
    if count(&diags, Severity::Error) > 0 {
        out.note(
            Tone::Error,
            "failed",
            "spec does not validate; nothing written",
        );
        return Ok(Outcome::Failed);
    }
    let bundle = match generate(&spec, &packages) {
        Ok(b) => b,
        Err(GenerationError::Invalid(d)) => {
            print_diags(out, &d);
            return Ok(Outcome::Failed);
        }
        Err(e) => {
            out.error(&e.to_string());
            return Ok(Outcome::Failed);
        }
    };
    let findings = audit::audit_generated(&bundle);
    print_findings(out, &findings);
    let audit_warn = findings_count(&findings, AuditSeverity::Warn);
    if audit::has_failures(&findings) {
        out.note(
            Tone::Error,
            "failed",
            "generated code fails audit; nothing written",
        );
        return Ok(Outcome::Failed);
    }
    if strict && warnings + audit_warn > 0 {
        out.note(
            Tone::Error,
            "failed",
            "warnings present under --strict; nothing written",
        );
        return Ok(Outcome::Failed);
    }

    publish_bundle(&bundle, out_dir)?;
    let width = bundle.units.iter().map(|u| u.id.len()).max().unwrap_or(0);
    for unit in &bundle.units {
        println!("{:width$}  {}", unit.id, unit.file_name);
    }
    println!(
        "wrote {} units and {} to {}",
        bundle.units.len(),
        mlfsm::codegen::MANIFEST_FILE,
        out_dir.display()
    );
    Ok(Outcome::Success)
}

pub fn simulate(
    out: &Output,
    spec: &Path,
    packages: Option<&Path>,
    script: &Path,
    trace: Option<&Path>,
) -> CmdResult {
    let spec = loaded!(load_spec(out, spec));
    let packages = loaded!(load_packages(out, packages));
    let text = fs::read_to_string(script)
        .map_err(|e| Failure::Usage(format!("{}: {e}", script.display())))?;
    let steps = parse_script(&text)
        .map_err(|e| Failure::Usage(format!("{}: malformed script: {e}", script.display())))?;

    let mut env = match new_env(&spec, &packages) {
        Ok(env) => env,
        Err(InterpError::SpecNotValidated(d)) => {
            print_diags(out, &d);
            return Ok(Outcome::Failed);
        }
        Err(e) => return Err(Failure::Internal(e.to_string())),
    };
    match env.run_script(&steps) {
        Ok(_) => {}
        Err(e) if e.is_assertion() => {
            out.note(
                Tone::Error,
                "failed",
                &format!("script step {}: {}", e.step, e.error),
            );
            return Ok(Outcome::Failed);
        }
        Err(e) => {
            return Err(Failure::Usage(format!(
                "{}: step {}: {}",
                script.display(),
                e.step,
                e.error
            )))
        }
    }

    let jsonl = env.trace().to_jsonl();
    match trace {
        Some(path) => write_file_atomic(path, jsonl.as_bytes())?,
        None => print!("{jsonl}"),
    }
    let states: Vec<String> = spec
        .clauses
        .iter()
        .map(|c| format!("{}={}", c.id, env.state(c.id.as_str()).unwrap_or("?")))
        .collect();
    out.note(
        Tone::Ok,
        "ok",
        &format!(
            "{} step(s), {} event(s); {}{}",
            steps.len(),
            env.trace().len(),
            states.join(" "),
            if env.contract_completed() {
                " (contract completed)"
            } else {
                ""
            }
        ),
    );
    Ok(Outcome::Success)
}

pub fn audit(
    out: &Output,
    strict: bool,
    target: &Path,
    packages: Option<&Path>,
    json: bool,
) -> CmdResult {
    let mut findings = Vec::new();
    let mut units = None;
    let mut invalid = false;
    if target.is_dir() {
        let sources = audit::read_source_dir(target)
            .map_err(|e| Failure::Usage(format!("{}: {e}", target.display())))?;
        units = Some(sources.len());
        findings = audit::audit_sources(&sources);
    } else if target.is_file() {
        let spec = loaded!(load_spec(out, target));
        let packages = loaded!(load_packages(out, packages));
        findings.extend(audit::audit_spec(&spec, &packages));
        match generate(&spec, &packages) {
            Ok(bundle) => {
                units = Some(bundle.units.len());
                findings.extend(audit::audit_generated(&bundle));
            }
            Err(GenerationError::Invalid(d)) => {
                print_diags(
                    out,
                    d.iter()
                        .filter(|d| d.is_error())
                        .cloned()
                        .collect::<Vec<_>>()
                        .as_slice(),
                );
                invalid = true;
            }
            Err(e) => {
                out.error(&e.to_string());
                invalid = true;
            }
        }
    } else {
        return Err(Failure::Usage(format!(
            "{}: no such file or directory",
            target.display()
        )));
    }

    let fail = findings_count(&findings, AuditSeverity::Fail);
    let warn = findings_count(&findings, AuditSeverity::Warn);
    let info = findings_count(&findings, AuditSeverity::Info);
    if json {
        let report = json!({
            "ruleset": RULESET_VERSION,
            "target": target,
            "units": units,
            "findings": findings,
            "summary": {"fail": fail, "warn": warn, "info": info},
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        print_findings(out, &findings);
    }
    if units == Some(0) {
        out.note(Tone::Info, "info", "no units found");
    }
    let failed = invalid || fail > 0 || (strict && warn > 0);
    if !json {
        let tone = if failed { Tone::Error } else { Tone::Ok };
        let label = if failed { "failed" } else { "ok" };
        out.note(
            tone,
            label,
            &format!("{fail} fail, {warn} warn, {info} info"),
        );
    }
    Ok(if failed {
        Outcome::Failed
    } else {
        Outcome::Success
    })
}
