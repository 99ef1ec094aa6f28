//! One version's lifecycle:
//!
//! ```text
//! checkout → prebuild → build → postbuild → metric:1 … metric:n → clean → cleanup
//! ```
//!
//! Hooks run only when configured; `build` and `clean` are skipped under
//! `no_compile`. A failing build skips the metrics, a failing prebuild or
//! postbuild hook aborts the remaining pre-metric stages, and a failing
//! metric never stops the lifecycle. `cleanup` is attempted exactly once
//! whenever checkout succeeded.

use std::fmt;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use thiserror::Error;

use crate::clock::Clock;
use crate::kv::Section;
use crate::registry::{Hook, ProjectRecord};
use crate::runner::{self, MetricContext, MetricSample, RunConfig, RunnerError, ENV_PROJECT, ENV_SHA};
use crate::vcs::{self, Sha, VcsError};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("working copy {0} has modified tracked files")]
    DirtyWorkspace(PathBuf),
    #[error("checkout of {target:?} failed: {source}")]
    CheckoutFailed { target: String, source: VcsError },
    #[error(transparent)]
    Runner(#[from] RunnerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildStatus {
    Built,
    SkippedBuildFailed,
    SkippedHookFailed,
    NotCompiled,
}

impl BuildStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            BuildStatus::Built => "built",
            BuildStatus::SkippedBuildFailed => "skipped_build_failed",
            BuildStatus::SkippedHookFailed => "skipped_hook_failed",
            BuildStatus::NotCompiled => "not_compiled",
        }
    }
}

impl fmt::Display for BuildStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub name: String,
    pub exit_code: i32,
    pub duration: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutcome {
    pub sha: Sha,
    pub status: BuildStatus,
    pub stage_log: Vec<StageRecord>,
}

impl BuildOutcome {
    pub fn stage_names(&self) -> Vec<&str> {
        self.stage_log.iter().map(|s| s.name.as_str()).collect()
    }

    /// The `outcome` summary file, in the registry's key=value format.
    pub fn to_section(&self, project_key: &str) -> Section {
        let mut s = Section::new("outcome", project_key);
        s.push("sha", self.sha.as_str()).push("status", self.status.as_str());
        for stage in &self.stage_log {
            s.push(
                "stage",
                format!("{} {} {:.3}", stage.name, stage.exit_code, stage.duration.as_secs_f64()),
            );
        }
        s
    }
}

/// Where a lifecycle finds its hooks and writes its logs.
#[derive(Debug, Clone, Default)]
pub struct LifecycleEnv {
    /// Base for relative hook paths: the registry file's directory.
    pub registry_dir: PathBuf,
    /// `runs/<run id>`; per-stage logs go to `<project>/<sha>/<stage>.log`
    /// below it. No logs are kept when `None`.
    pub run_dir: Option<PathBuf>,
    pub clock: Clock,
}

struct Stages<'a> {
    root: &'a Path,
    project: &'a ProjectRecord,
    sha: &'a Sha,
    log_dir: Option<PathBuf>,
    log: Vec<StageRecord>,
}

impl Stages<'_> {
    fn log_file(&self, stage: &str) -> Option<PathBuf> {
        self.log_dir
            .as_ref()
            .map(|d| d.join(format!("{}.log", stage.replace(':', "-"))))
    }

    fn record(&mut self, name: &str, exit_code: i32, duration: Duration) {
        debug!("stage {name} exited {exit_code} after {duration:?}");
        self.log.push(StageRecord {
            name: name.to_string(),
            exit_code,
            duration,
        });
    }

    /// Runs a stage command to completion with stdout and stderr in the
    /// stage log. Returns the exit code (128+signal when killed, 127 when
    /// it could not be started).
    fn run(&mut self, name: &str, mut cmd: Command) -> i32 {
        cmd.current_dir(self.root)
            .env(ENV_PROJECT, &self.project.key)
            .env(ENV_SHA, self.sha.as_str())
            .stdin(Stdio::null());
        let (out, err) = match self.log_file(name).map(File::create) {
            Some(Ok(f)) => match f.try_clone() {
                Ok(f2) => (Stdio::from(f), Stdio::from(f2)),
                Err(_) => (Stdio::from(f), Stdio::null()),
            },
            Some(Err(e)) => {
                warn!("cannot create log for stage {name}: {e}");
                (Stdio::null(), Stdio::null())
            }
            None => (Stdio::null(), Stdio::null()),
        };
        cmd.stdout(out).stderr(err);
        debug!("stage {name}: {cmd:?}");
        let started = Instant::now();
        let program = PathBuf::from(cmd.get_program());
        let code = match runner::spawn(&mut cmd, &program).and_then(|mut child| {
            child.wait().map_err(|source| RunnerError::Spawn {
                path: program.clone(),
                source,
            })
        }) {
            Ok(status) => status.code().unwrap_or_else(|| {
                use std::os::unix::process::ExitStatusExt;
                128 + status.signal().unwrap_or(0)
            }),
            Err(e) => {
                warn!("stage {name} could not start: {e}");
                127
            }
        };
        self.record(name, code, started.elapsed());
        code
    }

    fn run_shell(&mut self, name: &str, command_line: &str) -> i32 {
        let mut cmd = Command::new("/bin/sh");
        cmd.arg("-c").arg(command_line);
        self.run(name, cmd)
    }

    fn run_hook(&mut self, hook: Hook, path: &Path) -> i32 {
        let mut cmd = Command::new(path);
        cmd.arg(self.root);
        self.run(hook.stage(), cmd)
    }
}

/// Runs the full lifecycle for one revision of `project` in the working
/// copy `root`. Failures inside the lifecycle are reported through the
/// outcome; only problems before anything ran are errors.
pub fn run_lifecycle(
    project: &ProjectRecord,
    root: &Path,
    ref_or_sha: &str,
    scripts: &[PathBuf],
    config: &RunConfig,
    env: &LifecycleEnv,
) -> Result<(BuildOutcome, Vec<MetricSample>), BuildError> {
    config.validate()?;
    for script in scripts {
        if !crate::registry::is_executable(script) {
            return Err(RunnerError::ScriptNotExecutable(script.clone()).into());
        }
    }

    // Scripts run inside the root and also receive it as an argument.
    let root = &std::path::absolute(root).unwrap_or_else(|_| root.to_path_buf());
    let started = Instant::now();
    let sha = match vcs::checkout(root, ref_or_sha) {
        Ok(sha) => sha,
        Err(VcsError::DirtyWorkspace(p)) => return Err(BuildError::DirtyWorkspace(p)),
        Err(source) => {
            return Err(BuildError::CheckoutFailed {
                target: ref_or_sha.to_string(),
                source,
            })
        }
    };
    let log_dir = env.run_dir.as_ref().map(|d| d.join(&project.key).join(sha.as_str()));
    if let Some(dir) = &log_dir {
        if let Err(e) = fs::create_dir_all(dir) {
            warn!("cannot create {}: {e}", dir.display());
        }
    }
    let mut stages = Stages {
        root,
        project,
        sha: &sha,
        log_dir,
        log: Vec::new(),
    };
    stages.record("checkout", 0, started.elapsed());
    let hook_path = |hook| project.resolve_hook(hook, &env.registry_dir);

    let mut status = if config.no_compile {
        BuildStatus::NotCompiled
    } else {
        BuildStatus::Built
    };
    let mut build_attempted = false;

    if let Some(path) = hook_path(Hook::Prebuild) {
        if stages.run_hook(Hook::Prebuild, &path) != 0 {
            status = BuildStatus::SkippedHookFailed;
        }
    }
    if status != BuildStatus::SkippedHookFailed && !config.no_compile {
        build_attempted = true;
        if stages.run_shell("build", &project.build_command) != 0 {
            status = BuildStatus::SkippedBuildFailed;
        }
    }
    if matches!(status, BuildStatus::Built | BuildStatus::NotCompiled) {
        if let Some(path) = hook_path(Hook::Postbuild) {
            if stages.run_hook(Hook::Postbuild, &path) != 0 {
                status = BuildStatus::SkippedHookFailed;
            }
        }
    }

    let mut samples = Vec::new();
    if matches!(status, BuildStatus::Built | BuildStatus::NotCompiled) {
        for (i, script) in scripts.iter().enumerate() {
            let name = format!("metric:{}", i + 1);
            let ctx = MetricContext {
                project_key: project.key.clone(),
                sha: sha.clone(),
                timeout: config.timeout(),
                log_path: stages.log_file(&name),
                clock: env.clock,
            };
            let t = Instant::now();
            let mut produced = match runner::execute_metric(script, root, &ctx) {
                Ok(s) => s,
                Err(e) => {
                    warn!("{name} ({}) could not run: {e}", script.display());
                    stages.record(&name, 127, t.elapsed());
                    continue;
                }
            };
            let code = match produced.first().map(|s| s.status) {
                Some(runner::SampleStatus::Ok | runner::SampleStatus::ProtocolEmpty) => 0,
                _ => 1,
            };
            stages.record(&name, code, t.elapsed());
            if !vcs::is_clean(root).unwrap_or(false) {
                warn!(
                    "{} modified tracked files in {}; restoring",
                    script.display(),
                    root.display()
                );
                for s in &mut produced {
                    s.purity_violation = true;
                }
                if let Err(e) = vcs::restore_tracked(root) {
                    warn!("could not restore {}: {e}", root.display());
                }
            }
            samples.extend(produced);
        }
    }

    if build_attempted {
        stages.run_shell("clean", &project.clean_command);
    }
    if let Some(path) = hook_path(Hook::Cleanup) {
        stages.run_hook(Hook::Cleanup, &path);
    }

    let outcome = BuildOutcome {
        sha: sha.clone(),
        status,
        stage_log: stages.log,
    };
    if let Some(dir) = &stages.log_dir {
        if let Err(e) = fs::write(dir.join("outcome"), outcome.to_section(&project.key).render()) {
            warn!("cannot write outcome file: {e}");
        }
    }
    info!(
        "{} {} {}: {} samples",
        project.key,
        sha.short(),
        outcome.status,
        samples.len()
    );
    Ok((outcome, samples))
}
