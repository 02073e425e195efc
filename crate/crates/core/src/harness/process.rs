//! Subject-process backend: spawns one runner per pair and speaks the JSON
//! stdin/stdout protocol.

use std::io::{Read, Write};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::{Backend, BackendError, ExecLimits, Isolation, PairJob, RunnerResponse};
use crate::model::{FailCause, PairStatus, STDERR_EXCERPT_MAX};

/// Largest raw trace accepted from a runner.
pub const MAX_TRACE_BYTES: usize = 8 * 1024 * 1024;

/// Stdout allowance beyond the trace for the JSON envelope and escaping.
const STDOUT_SLACK: usize = 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ProcessBackend {
    /// Runner command line, e.g. `["python3", "runner.py"]`.
    pub command: Vec<String>,
    /// Extra wall time granted past the request timeout before killing.
    pub grace: Duration,
}

impl ProcessBackend {
    pub fn new(command: Vec<String>) -> Self {
        ProcessBackend {
            command,
            grace: Duration::from_millis(500),
        }
    }

    fn argv(&self, limits: &ExecLimits) -> Result<Vec<String>, BackendError> {
        let argv: Vec<String> = match limits.isolation {
            Isolation::Process => self.command.clone(),
            Isolation::Container => limits
                .container_command
                .iter()
                .map(|a| {
                    a.replace("{memory_mb}", &limits.memory_mb.to_string())
                        .replace("{timeout_s}", &limits.wall_timeout_s.to_string())
                })
                .collect(),
        };
        if argv.is_empty() {
            return Err(BackendError::Unavailable("empty runner command".into()));
        }
        Ok(argv)
    }

    fn spawn(&self, argv: &[String], limits: &ExecLimits) -> Result<Child, BackendError> {
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if limits.isolation == Isolation::Process {
            apply_memory_limit(&mut cmd, limits.memory_mb);
        }
        cmd.spawn()
            .map_err(|e| BackendError::Unavailable(format!("cannot spawn {}: {e}", argv[0])))
    }
}

#[cfg(unix)]
fn apply_memory_limit(cmd: &mut Command, memory_mb: u64) {
    use std::os::unix::process::CommandExt;
    let bytes = memory_mb.saturating_mul(1024 * 1024) as libc::rlim_t;
    // SAFETY: setrlimit is async-signal-safe and only touches the child.
    unsafe {
        cmd.pre_exec(move || {
            let lim = libc::rlimit {
                rlim_cur: bytes,
                rlim_max: bytes,
            };
            if libc::setrlimit(libc::RLIMIT_AS, &lim) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            Ok(())
        });
    }
}

#[cfg(not(unix))]
fn apply_memory_limit(_cmd: &mut Command, _memory_mb: u64) {}

/// Reads at most `cap` bytes, then drains the rest so the writer never
/// blocks. Returns the kept bytes and whether anything was dropped.
fn read_capped(mut r: impl Read, cap: usize) -> (Vec<u8>, bool) {
    let mut kept = Vec::new();
    let mut buf = [0u8; 64 * 1024];
    let mut dropped = false;
    loop {
        match r.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(k) => {
                let room = cap.saturating_sub(kept.len());
                kept.extend_from_slice(&buf[..k.min(room)]);
                if k > room {
                    dropped = true;
                }
            }
        }
    }
    (kept, dropped)
}

fn verdict(status: PairStatus, cause: FailCause, ms: u64, stderr: &str) -> RunnerResponse {
    RunnerResponse {
        status,
        cause: Some(cause),
        raw_trace: None,
        duration_ms: ms,
        stderr_excerpt: (!stderr.is_empty())
            .then(|| crate::util::truncate_bytes(stderr, STDERR_EXCERPT_MAX)),
    }
}

impl Backend for ProcessBackend {
    fn name(&self) -> &str {
        "subject-process"
    }

    fn run(&self, job: &PairJob<'_>) -> Result<RunnerResponse, BackendError> {
        let argv = self.argv(job.limits)?;
        let payload = serde_json::to_vec(&job.request())
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        let started = Instant::now();
        let mut child = self.spawn(&argv, job.limits)?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = thread::spawn(move || {
            let _ = stdin.write_all(&payload);
        });
        let stdout = child.stdout.take().expect("piped stdout");
        let out_reader = thread::spawn(move || read_capped(stdout, MAX_TRACE_BYTES + STDOUT_SLACK));
        let stderr = child.stderr.take().expect("piped stderr");
        let err_reader = thread::spawn(move || read_capped(stderr, STDERR_EXCERPT_MAX));

        let deadline = Duration::from_secs_f64(job.limits.wall_timeout_s.max(0.0)) + self.grace;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if started.elapsed() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                Ok(None) => thread::sleep(Duration::from_millis(5)),
                Err(e) => {
                    let _ = child.kill();
                    return Err(BackendError::Unavailable(e.to_string()));
                }
            }
        };
        let elapsed_ms = started.elapsed().as_millis() as u64;
        let _ = writer.join();
        let (out, out_dropped) = out_reader.join().unwrap_or_default();
        let (err, _) = err_reader.join().unwrap_or_default();
        let err_text = String::from_utf8_lossy(&err).into_owned();

        let Some(status) = status else {
            return Ok(verdict(PairStatus::Fail, FailCause::Timeout, elapsed_ms, &err_text));
        };
        if out_dropped {
            return Err(BackendError::TraceOverflow);
        }
        if !status.success() {
            return Err(BackendError::RunnerExit {
                code: status.code().unwrap_or(-1),
                stderr: crate::util::truncate_bytes(&err_text, STDERR_EXCERPT_MAX),
            });
        }
        let mut resp: RunnerResponse = serde_json::from_slice(&out)
            .map_err(|e| BackendError::Protocol(format!("bad runner response: {e}")))?;
        if resp.raw_trace.as_ref().is_some_and(|t| t.len() > MAX_TRACE_BYTES) {
            return Err(BackendError::TraceOverflow);
        }
        if resp.stderr_excerpt.is_none() && !err_text.is_empty() {
            resp.stderr_excerpt = Some(err_text);
        }
        if let Some(s) = resp.stderr_excerpt.take() {
            resp.stderr_excerpt = Some(crate::util::truncate_bytes(&s, STDERR_EXCERPT_MAX));
        }
        Ok(resp)
    }
}
