//! External-process harness protocol: newline-delimited JSON over standard
//! streams.
//!
//! Request:  `{"method": <name>, "args": [{"t": <type-expr>, "v": <payload>}]}`
//! Response: `{"blocks": [<id>], "branches": [{"e": <id>, "n": <hits>}],
//!            "outcome": "ok"|"exception"|"crash", "log": <text>}`
//!
//! Null arguments are encoded as `{"t": ..., "v": null}`. A response must
//! arrive within the configured timeout; a timeout, a dead child, or a
//! malformed response classifies the test as a crash and the child is
//! respawned for the next test, so one misbehaving test never ends a
//! campaign.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::coverage::{BlockId, BranchId, ExecutionResult, Outcome};
use crate::encoding;
use crate::service::ServiceDescriptor;

use super::{Call, SyntheticService, Target, TargetError};

/// How long to wait for a response before classifying the test as a crash.
pub const DEFAULT_WIRE_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Serialize, Deserialize)]
struct RequestDto {
    method: String,
    args: Vec<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct BranchHitDto {
    e: String,
    n: u64,
}

#[derive(Serialize, Deserialize)]
struct ResponseDto {
    blocks: Vec<String>,
    branches: Vec<BranchHitDto>,
    outcome: String,
    log: String,
}

fn response_to_result(dto: ResponseDto, duration_ms: u64) -> Result<ExecutionResult, String> {
    let outcome = Outcome::parse(&dto.outcome)
        .ok_or_else(|| format!("unknown outcome `{}`", dto.outcome))?;
    let mut branch_hits = BTreeMap::new();
    for b in dto.branches {
        if b.n == 0 {
            return Err(format!("branch `{}` reported zero hits", b.e));
        }
        *branch_hits.entry(BranchId(b.e)).or_insert(0) += b.n;
    }
    Ok(ExecutionResult {
        covered_blocks: dto.blocks.into_iter().map(BlockId).collect::<BTreeSet<_>>(),
        branch_hits,
        outcome,
        log: dto.log,
        duration_ms,
    })
}

fn result_to_response(res: &ExecutionResult) -> ResponseDto {
    ResponseDto {
        blocks: res.covered_blocks.iter().map(|b| b.0.clone()).collect(),
        branches: res
            .branch_hits
            .iter()
            .map(|(e, n)| BranchHitDto { e: e.0.clone(), n: *n })
            .collect(),
        outcome: res.outcome.as_str().to_string(),
        log: res.log.clone(),
    }
}

struct ChildHandle {
    process: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl ChildHandle {
    fn spawn(cmd: &[String]) -> Result<Self, TargetError> {
        let (program, args) = cmd
            .split_first()
            .ok_or_else(|| TargetError::Wire("empty harness command".into()))?;
        let mut process = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| TargetError::Wire(format!("failed to spawn `{program}`: {e}")))?;
        let stdin = process.stdin.take().expect("stdin was piped");
        let stdout = process.stdout.take().expect("stdout was piped");
        let (tx, lines) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ChildHandle { process, stdin, lines })
    }

    fn kill(mut self) {
        let _ = self.process.kill();
        let _ = self.process.wait();
    }
}

/// Drives an external harness process over the wire protocol.
pub struct WireTarget {
    descriptor: ServiceDescriptor,
    command: Vec<String>,
    timeout: Duration,
    child: Option<ChildHandle>,
}

impl WireTarget {
    /// `command` is the program plus its arguments. The descriptor comes from
    /// the target definition file; the protocol itself carries no signatures.
    pub fn new(
        descriptor: ServiceDescriptor,
        command: Vec<String>,
        timeout: Duration,
    ) -> Result<Self, TargetError> {
        descriptor
            .validate()
            .map_err(|e| TargetError::Validation(e.to_string()))?;
        if command.is_empty() {
            return Err(TargetError::Wire("empty harness command".into()));
        }
        Ok(WireTarget { descriptor, command, timeout, child: None })
    }

    fn request_line(&self, call: &Call) -> Result<String, TargetError> {
        let sig = self.descriptor.method(call.method).ok_or_else(|| {
            TargetError::Wire(format!("call references unknown method id {}", call.method))
        })?;
        let dto = RequestDto {
            method: sig.name.clone(),
            args: call.inputs.iter().map(encoding::typed_value_to_json).collect(),
        };
        serde_json::to_string(&dto).map_err(|e| TargetError::Wire(e.to_string()))
    }

    fn round_trip(&mut self, line: &str) -> Result<String, String> {
        if self.child.is_none() {
            self.child = Some(ChildHandle::spawn(&self.command).map_err(|e| e.to_string())?);
        }
        let child = self.child.as_mut().expect("child was just spawned");
        if let Err(e) = writeln!(child.stdin, "{line}").and_then(|_| child.stdin.flush()) {
            return Err(format!("write to harness failed: {e}"));
        }
        match child.lines.recv_timeout(self.timeout) {
            Ok(Ok(response)) => Ok(response),
            Ok(Err(e)) => Err(format!("read from harness failed: {e}")),
            Err(RecvTimeoutError::Timeout) => Err(format!(
                "harness did not respond within {:?}",
                self.timeout
            )),
            Err(RecvTimeoutError::Disconnected) => Err("harness exited".into()),
        }
    }

    fn discard_child(&mut self) {
        if let Some(child) = self.child.take() {
            child.kill();
        }
    }
}

impl Drop for WireTarget {
    fn drop(&mut self) {
        self.discard_child();
    }
}

impl Target for WireTarget {
    fn descriptor(&self) -> &ServiceDescriptor {
        &self.descriptor
    }

    fn execute_call(&mut self, call: &Call) -> ExecutionResult {
        let line = match self.request_line(call) {
            Ok(line) => line,
            Err(e) => return ExecutionResult::empty(Outcome::Crash, e.to_string()),
        };
        let started = Instant::now();
        let response = match self.round_trip(&line) {
            Ok(r) => r,
            Err(log) => {
                self.discard_child();
                return ExecutionResult::empty(Outcome::Crash, log);
            }
        };
        let duration_ms = started.elapsed().as_millis() as u64;
        let parsed: Result<ResponseDto, _> = serde_json::from_str(&response);
        match parsed {
            Ok(dto) => match response_to_result(dto, duration_ms) {
                Ok(res) => res,
                Err(msg) => {
                    self.discard_child();
                    ExecutionResult::empty(Outcome::Crash, format!("malformed response: {msg}"))
                }
            },
            Err(e) => {
                self.discard_child();
                ExecutionResult::empty(Outcome::Crash, format!("malformed response: {e}"))
            }
        }
    }
}

/// Serves a synthetic service over the wire protocol until input ends.
/// Unparseable requests and unresolvable methods get an `exception` response;
/// the loop itself never aborts on bad input.
pub fn serve<R: BufRead, W: Write>(
    svc: &SyntheticService,
    input: R,
    mut output: W,
) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = handle_request(svc, &line);
        serde_json::to_writer(&mut output, &result_to_response(&response))?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

fn handle_request(svc: &SyntheticService, line: &str) -> ExecutionResult {
    let dto: RequestDto = match serde_json::from_str(line) {
        Ok(dto) => dto,
        Err(e) => {
            return ExecutionResult::empty(
                Outcome::HandledException,
                format!("bad request: {e}"),
            )
        }
    };
    let args = match dto
        .args
        .iter()
        .map(encoding::typed_value_from_json)
        .collect::<Result<Vec<_>, _>>()
    {
        Ok(args) => args,
        Err(e) => {
            return ExecutionResult::empty(
                Outcome::HandledException,
                format!("bad argument: {e}"),
            )
        }
    };
    let arg_types: Vec<_> = args.iter().map(|v| v.value_type()).collect();
    // Overloads resolve by name plus exact argument types; the lowest id wins.
    let sig = svc
        .list_methods()
        .methods
        .iter()
        .filter(|m| m.name == dto.method && m.params == arg_types)
        .min_by_key(|m| m.id);
    match sig {
        Some(sig) => svc.execute(&Call { method: sig.id, inputs: args }),
        None => ExecutionResult::empty(
            Outcome::HandledException,
            format!("no method `{}` with matching argument types", dto.method),
        ),
    }
}
