//! Compiles a generated bundle with an external Solidity compiler and
//! replays interpreter scripts against it on an in-process EVM.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use mlfsm::interp::ScriptStep;
use mlfsm::{ContractSpec, GeneratedBundle, PackageSet, Type, Value};
use revm::context::{BlockEnv, CfgEnv, TxEnv};
use revm::context_interface::result::{ExecutionResult, Output};
use revm::database::{CacheDB, EmptyDB};
use revm::primitives::{Address, Bytes, TxKind};
use revm::{Context, ExecuteCommitEvm, Journal, MainBuilder, MainContext, MainnetEvm};
use tiny_keccak::{Hasher, Keccak};

type Db = CacheDB<EmptyDB>;
type Evm = MainnetEvm<Context<BlockEnv, TxEnv, CfgEnv, Db, Journal<Db>, ()>>;

/// `MLFSM_SOLC`, else `solc` or `solcjs` on `PATH`.
pub fn find_compiler() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("MLFSM_SOLC") {
        return Some(PathBuf::from(p));
    }
    let path = std::env::var_os("PATH")?;
    for dir in std::env::split_paths(&path) {
        for name in ["solc", "solcjs"] {
            let candidate = dir.join(name);
            if candidate.is_file() {
                return Some(candidate);
            }
        }
    }
    None
}

pub struct Compiled {
    pub version: String,
    pub bytecode: BTreeMap<String, Vec<u8>>,
}

/// Compiles every `.sol` file in `src_dir`. Fails on any compiler error.
pub fn compile(solc: &Path, src_dir: &Path, units: &[String]) -> Result<Compiled, String> {
    let version = Command::new(solc)
        .arg("--version")
        .output()
        .map_err(|e| format!("{}: {e}", solc.display()))?;
    let version = String::from_utf8_lossy(&version.stdout)
        .lines()
        .last()
        .unwrap_or_default()
        .trim()
        .to_string();

    let out_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let files: Vec<PathBuf> = units
        .iter()
        .map(|u| src_dir.join(format!("{u}.sol")))
        .collect();
    let output = Command::new(solc)
        .arg("--bin")
        .arg("--base-path")
        .arg(src_dir)
        .arg("-o")
        .arg(out_dir.path())
        .args(&files)
        .output()
        .map_err(|e| e.to_string())?;
    let stderr = String::from_utf8_lossy(&output.stderr);
    if !output.status.success() || stderr.contains("Error") {
        return Err(format!("compiler failed: {stderr}"));
    }

    let mut bytecode = BTreeMap::new();
    let produced: Vec<String> = std::fs::read_dir(out_dir.path())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    for unit in units {
        // solc writes `Unit.bin`, solcjs writes `Unit_sol_Unit.bin`
        let name = produced
            .iter()
            .find(|f| **f == format!("{unit}.bin") || f.ends_with(&format!("_sol_{unit}.bin")))
            .ok_or_else(|| format!("no bytecode for {unit} in {produced:?}"))?;
        let text = std::fs::read_to_string(out_dir.path().join(name)).map_err(|e| e.to_string())?;
        let code = hex::decode(text.trim()).map_err(|e| format!("{name}: {e}"))?;
        bytecode.insert(unit.clone(), code);
    }
    Ok(Compiled { version, bytecode })
}

fn selector(signature: &str) -> [u8; 4] {
    let mut k = Keccak::v256();
    k.update(signature.as_bytes());
    let mut out = [0u8; 32];
    k.finalize(&mut out);
    [out[0], out[1], out[2], out[3]]
}

fn word_int(v: i64) -> [u8; 32] {
    let mut w = if v < 0 { [0xff; 32] } else { [0; 32] };
    w[24..].copy_from_slice(&v.to_be_bytes());
    w
}

fn word_address(a: Address) -> [u8; 32] {
    let mut w = [0; 32];
    w[12..].copy_from_slice(a.as_slice());
    w
}

/// Deployed bundle on a fresh chain.
pub struct Chain {
    evm: Evm,
    caller: Address,
    nonce: u64,
    pub addresses: BTreeMap<String, Address>,
}

impl Chain {
    pub fn deploy(bundle: &GeneratedBundle, compiled: &Compiled) -> Result<Self, String> {
        let mut chain = Chain {
            evm: Context::mainnet().with_db(Db::default()).build_mainnet(),
            caller: Address::repeat_byte(0x11),
            nonce: 0,
            addresses: BTreeMap::new(),
        };
        for id in &bundle.manifest.order {
            let mut code = compiled.bytecode[id].clone();
            for arg in &bundle.manifest.units[id].constructor_args {
                code.extend(word_address(chain.addresses[arg]));
            }
            match chain.send(TxKind::Create, code) {
                ExecutionResult::Success {
                    output: Output::Create(_, Some(addr)),
                    ..
                } => {
                    chain.addresses.insert(id.clone(), addr);
                }
                other => return Err(format!("deploying {id}: {other:?}")),
            }
        }
        Ok(chain)
    }

    fn send(&mut self, kind: TxKind, data: Vec<u8>) -> ExecutionResult {
        let tx = TxEnv::builder()
            .caller(self.caller)
            .kind(kind)
            .data(Bytes::from(data))
            .nonce(self.nonce)
            .gas_limit(10_000_000)
            .build()
            .expect("transaction fields are complete");
        self.nonce += 1;
        self.evm.transact_commit(tx).expect("transaction is valid")
    }

    /// Calls `signature` on `unit`; returns the output on success, `None`
    /// on revert.
    pub fn call(&mut self, unit: &str, signature: &str, args: &[[u8; 32]]) -> Option<Vec<u8>> {
        let mut data = selector(signature).to_vec();
        for a in args {
            data.extend(a);
        }
        let to = self.addresses[unit];
        match self.send(TxKind::Call(to), data) {
            ExecutionResult::Success { output, .. } => Some(output.into_data().to_vec()),
            _ => None,
        }
    }

    fn word(&mut self, unit: &str, signature: &str) -> u8 {
        let out = self.call(unit, signature, &[]).expect("view call succeeds");
        out[31]
    }

    pub fn clause_state<'s>(&mut self, spec: &'s ContractSpec, clause: &str) -> &'s str {
        let idx = self.word(&format!("Clause_{clause}"), "currentState()");
        let c = spec.clause(&clause.into()).expect("known clause");
        &c.states[idx as usize]
    }

    pub fn clause_completed(&mut self, clause: &str) -> bool {
        self.word(&format!("Clause_{clause}"), "isCompleted()") == 1
    }

    pub fn contract_completed(&mut self) -> bool {
        self.word("Orchestrator", "isCompleted()") == 1
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct Observed {
    pub states: BTreeMap<String, String>,
    pub completed: BTreeMap<String, bool>,
    pub contract_completed: bool,
    /// Outcome of each fire step: true when it took effect.
    pub fires: Vec<bool>,
}

/// Replays `script` on the chain and reports final clause states and
/// per-fire outcomes. Assertion steps are checked on-chain as well.
pub fn replay(
    chain: &mut Chain,
    spec: &ContractSpec,
    packages: &PackageSet,
    script: &[ScriptStep],
) -> Result<Observed, String> {
    let mut fires = Vec::new();
    for (i, step) in script.iter().enumerate() {
        match step {
            ScriptStep::Set {
                package,
                var,
                value,
            } => {
                let ty = packages[package]
                    .variable(var)
                    .ok_or("unknown variable")?
                    .ty;
                let (sig, word) = match (ty, value) {
                    (Type::Int, Value::Int(v)) => ("int256", word_int(*v)),
                    (Type::Bool, Value::Bool(b)) => ("bool", word_int(*b as i64)),
                    _ => return Err(format!("step {i}: ill-typed set")),
                };
                chain
                    .call(
                        &format!("Package_{package}"),
                        &format!("set_{var}({sig})"),
                        &[word],
                    )
                    .ok_or(format!("step {i}: setter reverted"))?;
            }
            ScriptStep::Fire { clause, trigger } => {
                let before = chain.clause_state(spec, clause).to_string();
                let ok = chain
                    .call(&format!("Clause_{clause}"), &format!("{trigger}()"), &[])
                    .is_some();
                if !ok && chain.clause_state(spec, clause) != before {
                    return Err(format!("step {i}: reverted fire changed state"));
                }
                fires.push(ok);
            }
            ScriptStep::AssertState { clause, state } => {
                let got = chain.clause_state(spec, clause);
                if got != state {
                    return Err(format!("step {i}: on-chain state {got}, expected {state}"));
                }
            }
            ScriptStep::AssertCompleted { clause, value } => {
                if chain.clause_completed(clause) != *value {
                    return Err(format!("step {i}: on-chain completion differs"));
                }
            }
            ScriptStep::AssertRejected { clause, trigger } => {
                let before = chain.clause_state(spec, clause).to_string();
                if chain
                    .call(&format!("Clause_{clause}"), &format!("{trigger}()"), &[])
                    .is_some()
                {
                    return Err(format!("step {i}: expected revert"));
                }
                if chain.clause_state(spec, clause) != before {
                    return Err(format!("step {i}: reverted fire changed state"));
                }
                fires.push(false);
            }
        }
    }
    let mut states = BTreeMap::new();
    let mut completed = BTreeMap::new();
    for c in &spec.clauses {
        let id = c.id.as_str();
        states.insert(id.to_string(), chain.clause_state(spec, id).to_string());
        completed.insert(id.to_string(), chain.clause_completed(id));
    }
    Ok(Observed {
        states,
        completed,
        contract_completed: chain.contract_completed(),
        fires,
    })
}
