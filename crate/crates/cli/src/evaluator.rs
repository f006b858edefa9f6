//! Out-of-process objectives.
//!
//! The child receives `{"parameters": {...}}` on stdin and must print
//! `{"objective": <number>, "sem": <number, optional>}` on stdout and exit
//! with status 0. Anything else fails the trial with one of the fault kinds
//! below.

use std::io::{Read, Write};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use gpbo::{Arm, EvalFault, Evaluator, Observation};
use serde::Deserialize;

pub const FAULT_SPAWN: &str = "spawn_failed";
pub const FAULT_IO: &str = "io_error";
pub const FAULT_TIMEOUT: &str = "timeout";
pub const FAULT_EXIT: &str = "nonzero_exit";
pub const FAULT_OUTPUT: &str = "malformed_output";

const POLL: Duration = Duration::from_millis(2);

#[derive(Debug, Clone, PartialEq)]
pub struct CommandSpec {
    pub program: String,
    pub args: Vec<String>,
    pub timeout: Duration,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Response {
    objective: f64,
    #[serde(default)]
    sem: Option<f64>,
}

/// Parses an evaluator's stdout.
pub fn parse_response(stdout: &[u8]) -> Result<Observation, EvalFault> {
    let r: Response = serde_json::from_slice(stdout)
        .map_err(|e| EvalFault::new(FAULT_OUTPUT, format!("bad evaluator output: {e}")))?;
    let obs = match r.sem {
        Some(s) => Observation::with_sem(r.objective, s),
        None => Observation::new(r.objective),
    };
    if !obs.is_valid() {
        return Err(EvalFault::new(
            FAULT_OUTPUT,
            format!("objective must be finite and sem non-negative, got {obs:?}"),
        ));
    }
    Ok(obs)
}

/// Runs the command once for `arm`.
pub fn subprocess_evaluate(cmd: &CommandSpec, arm: &Arm) -> Result<Observation, EvalFault> {
    let request = serde_json::json!({ "parameters": &arm.values });
    let mut command = Command::new(&cmd.program);
    command
        .args(&cmd.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        command.process_group(0);
    }
    let mut child = command
        .spawn()
        .map_err(|e| EvalFault::new(FAULT_SPAWN, format!("{}: {e}", cmd.program)))?;

    let mut stdin = child.stdin.take().expect("stdin is piped");
    let payload = request.to_string();
    let writer = thread::spawn(move || {
        // a child that never reads stdin closes the pipe; that is its business
        match stdin.write_all(payload.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e),
            _ => Ok(()),
        }
    });
    let mut stdout = child.stdout.take().expect("stdout is piped");
    let reader = thread::spawn(move || {
        let mut buf = Vec::new();
        stdout.read_to_end(&mut buf).map(|_| buf)
    });

    let started = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if started.elapsed() >= cmd.timeout => {
                kill_tree(&mut child);
                let _ = child.wait();
                return Err(EvalFault::new(
                    FAULT_TIMEOUT,
                    format!("no result after {:.3} s", cmd.timeout.as_secs_f64()),
                ));
            }
            Ok(None) => thread::sleep(POLL),
            Err(e) => {
                kill_tree(&mut child);
                return Err(EvalFault::new(FAULT_IO, e.to_string()));
            }
        }
    };

    let io = |e: std::io::Error| EvalFault::new(FAULT_IO, e.to_string());
    writer
        .join()
        .map_err(|_| EvalFault::new(FAULT_IO, "stdin writer panicked"))?
        .map_err(io)?;
    let out = reader
        .join()
        .map_err(|_| EvalFault::new(FAULT_IO, "stdout reader panicked"))?
        .map_err(io)?;
    if !status.success() {
        return Err(EvalFault::new(
            FAULT_EXIT,
            format!("evaluator exited with {status}"),
        ));
    }
    parse_response(&out)
}

/// Kills the child and anything it spawned.
fn kill_tree(child: &mut Child) {
    #[cfg(unix)]
    if let Ok(pid) = libc::pid_t::try_from(child.id()) {
        // SAFETY: signalling the process group created for this child
        unsafe {
            libc::kill(-pid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
}

/// [`Evaluator`] that shells out to a command for every trial.
#[derive(Debug, Clone)]
pub struct CommandEvaluator {
    pub spec: CommandSpec,
}

impl Evaluator for CommandEvaluator {
    fn evaluate(&mut self, arm: &Arm) -> Result<Observation, EvalFault> {
        subprocess_evaluate(&self.spec, arm)
    }

    fn records_elapsed(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_parsing() {
        assert_eq!(
            parse_response(br#"{"objective": 1.5}"#).unwrap(),
            Observation::new(1.5)
        );
        assert_eq!(
            parse_response(
                br#" {"objective": 1, "sem": 0.1}
"#
            )
            .unwrap(),
            Observation::with_sem(1.0, 0.1)
        );
        for bad in [
            &br#"{"objective": "x"}"#[..],
            br#"{"objective": 1, "extra": 2}"#,
            br#"{"sem": 1}"#,
            br#"{"objective": 1, "sem": -1}"#,
            b"",
            b"1.0",
        ] {
            assert_eq!(parse_response(bad).unwrap_err().kind, FAULT_OUTPUT);
        }
    }
}
