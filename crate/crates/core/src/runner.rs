//! Metric plugins: running one executable against a project tree and
//! reading its stdout protocol.
//!
//! A plugin is any executable. It is invoked as `<script> <project_root>`
//! with the working directory set to the project root and `SMF_PROJECT`
//! and `SMF_SHA` in its environment. Every stdout line containing `#>>`
//! reports one value as `#>> NAME=VALUE`; everything else is ignored.
//! Stderr is diagnostics only. Exit status 0 means success.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{serde_ts, Clock, Timestamp};
use crate::registry::is_executable;
use crate::vcs::Sha;

pub const MARKER: &str = "#>>";
pub const DEFAULT_TIMEOUT_SECONDS: u64 = 300;
pub const ENV_PROJECT: &str = "SMF_PROJECT";
pub const ENV_SHA: &str = "SMF_SHA";

const POLL: Duration = Duration::from_millis(10);
/// How long to wait for a killed process group to release its pipes.
const KILL_GRACE: Duration = Duration::from_millis(500);

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("{0} is not an executable file")]
    ScriptNotExecutable(PathBuf),
    #[error("invalid metric name {0:?}: expected [A-Za-z0-9_.-]+")]
    InvalidName(String),
    #[error("metric value {0} is not finite")]
    NonFiniteValue(f64),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot run {path}: {source}")]
    Spawn { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Ok,
    Timeout,
    ScriptError,
    ProtocolEmpty,
}

impl SampleStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleStatus::Ok => "ok",
            SampleStatus::Timeout => "timeout",
            SampleStatus::ScriptError => "script_error",
            SampleStatus::ProtocolEmpty => "protocol_empty",
        }
    }
}

impl std::str::FromStr for SampleStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ok" => Ok(SampleStatus::Ok),
            "timeout" => Ok(SampleStatus::Timeout),
            "script_error" => Ok(SampleStatus::ScriptError),
            "protocol_empty" => Ok(SampleStatus::ProtocolEmpty),
            other => Err(format!("unknown sample status {other:?}")),
        }
    }
}

/// One observation. Non-ok samples carry no value, and their
/// `metric_name` is the script id so failures stay attributable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub project_key: String,
    pub sha: Sha,
    pub metric_name: String,
    pub value: Option<f64>,
    pub script_id: String,
    pub status: SampleStatus,
    pub purity_violation: bool,
    #[serde(with = "serde_ts")]
    pub recorded_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub repo_base: PathBuf,
    pub no_compile: bool,
    pub project_filter: Option<String>,
    pub sha_filter: Option<String>,
    pub timeout_seconds: u64,
    pub verbosity: u8,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            repo_base: PathBuf::from("repos"),
            no_compile: false,
            project_filter: None,
            sha_filter: None,
            timeout_seconds: DEFAULT_TIMEOUT_SECONDS,
            verbosity: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunnerError> {
        if self.timeout_seconds < 1 {
            return Err(RunnerError::InvalidConfig("timeout must be at least 1 second".into()));
        }
        if self.verbosity > 3 {
            return Err(RunnerError::InvalidConfig(format!(
                "verbosity {} is outside 0..=3",
                self.verbosity
            )));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_seconds)
    }
}

pub fn is_valid_metric_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-'))
}

/// Shortest decimal text that parses back to exactly `value`.
pub fn render_value(value: f64) -> String {
    format!("{value}")
}

/// A line that carried the marker but could not be read as `NAME=VALUE`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolWarning {
    pub line: String,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedOutput {
    pub pairs: Vec<(String, f64)>,
    pub warnings: Vec<ProtocolWarning>,
}

/// Greps `lines` for the marker and splits `NAME=VALUE` after its first
/// occurrence. Malformed marker lines become warnings.
pub fn parse_metric_output<I, S>(lines: I) -> ParsedOutput
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = ParsedOutput::default();
    for line in lines {
        let line = line.as_ref();
        let Some(pos) = line.find(MARKER) else {
            continue;
        };
        let payload = line[pos + MARKER.len()..].trim();
        let warn = |reason| ProtocolWarning {
            line: line.to_string(),
            reason,
        };
        let Some((name, value)) = payload.split_once('=') else {
            out.warnings.push(warn("missing `=`"));
            continue;
        };
        let name = name.trim();
        if name.is_empty() {
            out.warnings.push(warn("empty metric name"));
            continue;
        }
        if !is_valid_metric_name(name) {
            out.warnings
                .push(warn("metric name has characters outside [A-Za-z0-9_.-]"));
            continue;
        }
        match value.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => out.pairs.push((name.to_string(), v)),
            _ => out.warnings.push(warn("value is not a finite number")),
        }
    }
    out
}

/// `#>> NAME=VALUE`, the inverse of [`parse_metric_output`].
pub fn format_metric_line(name: &str, value: f64) -> Result<String, RunnerError> {
    if !is_valid_metric_name(name) {
        return Err(RunnerError::InvalidName(name.to_string()));
    }
    if !value.is_finite() {
        return Err(RunnerError::NonFiniteValue(value));
    }
    Ok(format!("{MARKER} {name}={}", render_value(value)))
}

/// Who a metric run is for and where its diagnostics go.
#[derive(Debug, Clone)]
pub struct MetricContext {
    pub project_key: String,
    pub sha: Sha,
    pub timeout: Duration,
    /// Receives the script's stderr; discarded when `None`.
    pub log_path: Option<PathBuf>,
    pub clock: Clock,
}

fn script_id(script: &Path) -> String {
    script
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| script.display().to_string())
}

fn kill_group(child: &Child) {
    // The child leads its own process group, so this reaches helpers it forked.
    unsafe {
        libc::killpg(child.id() as libc::pid_t, libc::SIGKILL);
    }
}

/// Spawns with a retry on ETXTBSY, which a script freshly written by
/// another thread can trigger while that thread forks.
pub(crate) fn spawn(cmd: &mut Command, path: &Path) -> Result<Child, RunnerError> {
    let mut attempts = 0;
    loop {
        match cmd.spawn() {
            Ok(child) => return Ok(child),
            Err(e) if e.raw_os_error() == Some(libc::ETXTBSY) && attempts < 50 => {
                attempts += 1;
                thread::sleep(POLL);
            }
            Err(e) if e.kind() == io::ErrorKind::PermissionDenied => {
                return Err(RunnerError::ScriptNotExecutable(path.to_path_buf()))
            }
            Err(source) => {
                return Err(RunnerError::Spawn {
                    path: path.to_path_buf(),
                    source,
                })
            }
        }
    }
}

enum Finish {
    Exited(ExitStatus, Vec<String>),
    TimedOut,
}

fn read_lines<R: Read>(reader: R) -> Vec<String> {
    BufReader::new(reader)
        .split(b'\n')
        .map_while(Result::ok)
        .map(|mut bytes| {
            if bytes.last() == Some(&b'\r') {
                bytes.pop();
            }
            String::from_utf8_lossy(&bytes).into_owned()
        })
        .collect()
}

/// Waits for `child` and its stdout, killing the whole process group once
/// `deadline` passes.
fn supervise(mut child: Child, deadline: Instant) -> io::Result<Finish> {
    let stdout = child.stdout.take().expect("stdout is piped");
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let _ = tx.send(read_lines(stdout));
    });

    let status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if Instant::now() >= deadline {
            break None;
        }
        thread::sleep(POLL);
    };

    let Some(status) = status else {
        kill_group(&child);
        let _ = child.wait();
        let _ = rx.recv_timeout(KILL_GRACE);
        return Ok(Finish::TimedOut);
    };

    // A background helper may still hold stdout open after the leader exits.
    let remaining = deadline.saturating_duration_since(Instant::now());
    let lines = match rx.recv_timeout(remaining) {
        Ok(lines) => lines,
        Err(_) => {
            kill_group(&child);
            let _ = rx.recv_timeout(KILL_GRACE);
            return Ok(Finish::TimedOut);
        }
    };
    kill_group(&child);
    Ok(Finish::Exited(status, lines))
}

/// Runs `script <project_root>` and turns its output into samples.
///
/// Exit 0 yields one `ok` sample per reported pair, or a single
/// `protocol_empty` sample when nothing parsed. A nonzero exit yields one
/// `script_error` sample and any values it printed are discarded. Running
/// past the timeout kills the process group and yields one `timeout` sample.
pub fn execute_metric(
    script: &Path,
    project_root: &Path,
    ctx: &MetricContext,
) -> Result<Vec<MetricSample>, RunnerError> {
    use std::os::unix::process::CommandExt;

    if !is_executable(script) {
        return Err(RunnerError::ScriptNotExecutable(script.to_path_buf()));
    }
    let id = script_id(script);
    let stderr = match &ctx.log_path {
        Some(path) => match File::create(path) {
            Ok(f) => Stdio::from(f),
            Err(e) => {
                warn!("cannot create {}: {e}; discarding stderr", path.display());
                Stdio::null()
            }
        },
        None => Stdio::null(),
    };
    let mut cmd = Command::new(script);
    cmd.arg(project_root)
        .current_dir(project_root)
        .env(ENV_PROJECT, &ctx.project_key)
        .env(ENV_SHA, ctx.sha.as_str())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(stderr)
        .process_group(0);
    debug!("{} {}", script.display(), project_root.display());

    let started = Instant::now();
    let child = spawn(&mut cmd, script)?;
    let finish = supervise(child, started + ctx.timeout).map_err(|source| RunnerError::Spawn {
        path: script.to_path_buf(),
        source,
    })?;
    let recorded_at = ctx.clock.now();
    let sample = |metric_name: String, value, status| MetricSample {
        project_key: ctx.project_key.clone(),
        sha: ctx.sha.clone(),
        metric_name,
        value,
        script_id: id.clone(),
        status,
        purity_violation: false,
        recorded_at,
    };

    let samples = match finish {
        Finish::TimedOut => {
            warn!("{id} killed after {:?}", ctx.timeout);
            vec![sample(id.clone(), None, SampleStatus::Timeout)]
        }
        Finish::Exited(status, _) if !status.success() => {
            warn!("{id} failed with {status}");
            vec![sample(id.clone(), None, SampleStatus::ScriptError)]
        }
        Finish::Exited(_, lines) => {
            let parsed = parse_metric_output(&lines);
            for w in &parsed.warnings {
                warn!("{id}: ignoring protocol line {:?}: {}", w.line, w.reason);
            }
            if parsed.pairs.is_empty() {
                vec![sample(id.clone(), None, SampleStatus::ProtocolEmpty)]
            } else {
                parsed
                    .pairs
                    .into_iter()
                    .map(|(name, value)| sample(name, Some(value), SampleStatus::Ok))
                    .collect()
            }
        }
    };
    debug!("{id} finished in {:?}", started.elapsed());
    Ok(samples)
}
