use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use log::{debug, info, warn};
use smf_core::builder::{run_lifecycle, LifecycleEnv};
use smf_core::clock::parse_timestamp;
use smf_core::registry::{self, ProjectRecord, Registry, RegistryError};
use smf_core::store::{ExportFilter, ProjectData, RunId, Store, StoreError};
use smf_core::trackers::{self, FixtureTransport, HttpTransport, RecordingTransport, Transport};
use smf_core::{analysis, map_versions, vcs, Clock, RunConfig, SampleStatus};

use crate::args::{self, Format, TrackerSource};

/// Environment variable that pins every timestamp, for reproducible runs.
pub const ENV_FIXED_TIME: &str = "SMF_FIXED_TIME";

pub struct Failure {
    pub code: i32,
    pub message: String,
}

pub type Outcome = Result<(), Failure>;

fn fail(code: i32, message: impl Display) -> Failure {
    Failure {
        code,
        message: message.to_string(),
    }
}

pub struct Globals {
    pub registry: PathBuf,
    pub store: PathBuf,
    pub verbosity: u8,
}

fn clock() -> Result<Clock, Failure> {
    match std::env::var(ENV_FIXED_TIME) {
        Ok(raw) => parse_timestamp(&raw)
            .map(Clock::Fixed)
            .ok_or_else(|| fail(2, format!("{ENV_FIXED_TIME}={raw:?} is not an ISO-8601 timestamp"))),
        Err(_) => Ok(Clock::System),
    }
}

fn load_registry(path: &Path) -> Result<Registry, Failure> {
    Registry::load(path).map_err(|e| fail(1, e))
}

fn project<'a>(registry: &'a Registry, key: &str) -> Result<&'a ProjectRecord, Failure> {
    registry.get(key).map_err(|_| {
        fail(
            2,
            format!("unknown project {key:?}; registered in {}", registry.path().display()),
        )
    })
}

fn open_store(dir: &Path) -> Result<Store, Failure> {
    Store::open(dir).map_err(|e| fail(1, e))
}

fn open_store_read_only(dir: &Path) -> Result<Store, Failure> {
    Store::open_read_only(dir).map_err(|e| match e {
        StoreError::StoreMissing(_) => fail(3, e),
        other => fail(1, other),
    })
}

fn write_output(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| fail(1, format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| fail(1, format!("cannot write to stdout: {e}")))
        }
    }
}

fn transport(source: &TrackerSource) -> Result<Box<dyn Transport>, Failure> {
    if let Some(dir) = &source.fixtures {
        let t = FixtureTransport::open(dir)
            .map_err(|e| fail(4, format!("cannot open tracker fixtures in {}: {e}", dir.display())))?;
        return Ok(Box::new(t));
    }
    let http = HttpTransport::new(Duration::from_secs(source.http_timeout));
    match &source.record_fixtures {
        Some(dir) => {
            let t = RecordingTransport::new(Box::new(http), dir).map_err(|e| fail(4, e))?;
            Ok(Box::new(t))
        }
        None => Ok(Box::new(http)),
    }
}

pub fn add_project(g: &Globals, a: args::AddProject) -> Outcome {
    let mut record = ProjectRecord::new(a.key, a.repo_url, a.tracker_kind.into(), a.tracker_url, a.tracker_key);
    let absolute = |p: Option<PathBuf>| p.map(|p| std::path::absolute(&p).unwrap_or(p));
    record.prebuild_script = absolute(a.prebuild_script);
    record.postbuild_script = absolute(a.postbuild_script);
    record.cleanup_script = absolute(a.cleanup_script);
    if let Some(cmd) = a.build_command {
        record.build_command = cmd;
    }
    if let Some(cmd) = a.clean_command {
        record.clean_command = cmd;
    }
    let key = registry::add_project(record, &g.registry).map_err(|e| match e {
        RegistryError::DuplicateKey(_) | RegistryError::InvalidRecord(_) => fail(2, e),
        other => fail(1, other),
    })?;
    info!("registered {key} in {}", g.registry.display());
    Ok(())
}

pub fn validate_project(g: &Globals, a: args::ValidateProject) -> Outcome {
    let registry = load_registry(&g.registry)?;
    let record = project(&registry, &a.key)?;
    let tracker = transport(&a.tracker)?;
    let workdir = a.workdir.unwrap_or_else(std::env::temp_dir);
    let mut violations = registry::validate_project(record, &workdir, tracker.as_ref());
    if let Err(e) = record.check_hooks(&registry.base_dir()) {
        warn!("{e}");
    }
    violations.sort_by_key(|v| v.name());
    let mut out = String::new();
    for v in &violations {
        out.push_str(&format!("{v}\n"));
    }
    write_output(None, &out)?;
    if violations.is_empty() {
        info!("{} meets every admission criterion", a.key);
        Ok(())
    } else {
        Err(fail(
            5,
            format!("{} fails {} admission criteria", a.key, violations.len()),
        ))
    }
}

pub fn fetch_project(g: &Globals, a: args::FetchProject) -> Outcome {
    let registry = load_registry(&g.registry)?;
    let record = project(&registry, &a.key)?.clone();
    let tracker = transport(&a.tracker)?;

    info!("updating {} from {}", record.key, record.repo_url);
    let local = vcs::clone_or_update(&record.repo_url, &a.git_repo_base, &record.key).map_err(|e| fail(3, e))?;
    let refs = vcs::list_refs(&local).map_err(|e| fail(3, e))?;
    debug!("{} refs in {}", refs.len(), local.display());

    info!(
        "fetching {} tracker data for {}",
        record.tracker_kind, record.tracker_project_key
    );
    let issues = trackers::fetch_issues(&record, tracker.as_ref()).map_err(|e| fail(4, e))?;
    let versions = trackers::fetch_versions(&record, tracker.as_ref()).map_err(|e| fail(4, e))?;
    let mappings = map_versions(&versions, &refs, &record.key);

    let mut summary = format!(
        "{}: {} issues, {} versions, {} refs\n",
        record.key,
        issues.len(),
        versions.len(),
        refs.len()
    );
    for m in &mappings {
        match &m.git_ref {
            Some(r) => summary.push_str(&format!(
                "  {} -> {} {} ({}, {})\n",
                m.version_name,
                r.name,
                r.target_sha.short(),
                m.method,
                smf_core::runner::render_value(m.score)
            )),
            None => summary.push_str(&format!("  {} unmatched\n", m.version_name)),
        }
    }

    let mut store = open_store(&g.store)?;
    store
        .put_project_data(ProjectData {
            project: record,
            issues,
            versions,
            mappings,
        })
        .map_err(|e| fail(1, e))?;
    write_output(None, &summary)
}

/// Commits to visit for one project: the `--sha` target, or every mapped
/// version's commit once, in tracker order.
fn targets(store: &Store, key: &str, sha: Option<&str>) -> Result<Vec<(String, String)>, String> {
    if let Some(sha) = sha {
        return Ok(vec![(sha.to_string(), sha.to_string())]);
    }
    let data = store
        .project_data(key)
        .ok_or_else(|| format!("{key} has not been fetched; run fetch-project {key} or pass --sha"))?;
    let mut seen = std::collections::HashSet::new();
    Ok(data
        .mappings
        .iter()
        .filter_map(|m| {
            m.git_ref
                .as_ref()
                .map(|r| (m.version_name.clone(), r.target_sha.to_string()))
        })
        .filter(|(_, sha)| seen.insert(sha.clone()))
        .collect())
}

pub fn run_metric(g: &Globals, a: args::RunMetric) -> Outcome {
    let mut scripts = Vec::new();
    for s in &a.scripts {
        let path = std::path::absolute(s).unwrap_or_else(|_| s.clone());
        if !path.is_file() {
            return Err(fail(2, format!("metric script {} does not exist", s.display())));
        }
        scripts.push(path);
    }
    let registry = load_registry(&g.registry)?;
    let selected: Vec<&ProjectRecord> = match &a.project {
        Some(key) => registry.projects().filter(|p| &p.key == key).collect(),
        None => registry.projects().collect(),
    };
    if selected.is_empty() {
        return Err(fail(
            3,
            match &a.project {
                Some(key) => format!("no project {key:?} in {}", g.registry.display()),
                None => format!("no projects in {}", g.registry.display()),
            },
        ));
    }

    let config = RunConfig {
        repo_base: a.git_repo_base.clone(),
        no_compile: a.no_compile,
        project_filter: a.project.clone(),
        sha_filter: a.sha.clone(),
        timeout_seconds: a.timeout,
        verbosity: g.verbosity,
    };
    config.validate().map_err(|e| fail(2, e))?;
    let clock = clock()?;
    let mut store = open_store(&g.store)?;
    let run = store.begin_run(config.clone(), &clock).map_err(|e| fail(1, e))?;
    let env = LifecycleEnv {
        registry_dir: registry.base_dir(),
        run_dir: store.run_dir(&run),
        clock,
    };
    info!("run {run}: {} scripts over {} projects", scripts.len(), selected.len());

    let mut summary = format!("run {run}\n");
    let mut errors = 0;
    for record in selected {
        let root = a.git_repo_base.join(&record.key);
        let targets = match targets(&store, &record.key, a.sha.as_deref()) {
            Ok(t) => t,
            Err(e) => {
                log::error!("{e}");
                errors += 1;
                continue;
            }
        };
        if targets.is_empty() {
            warn!("{} has no mapped versions", record.key);
        }
        for (label, target) in targets {
            info!("{} {label}", record.key);
            match run_lifecycle(record, &root, &target, &scripts, &config, &env) {
                Ok((outcome, samples)) => {
                    let ok = samples.iter().filter(|s| s.status == SampleStatus::Ok).count();
                    summary.push_str(&format!(
                        "{} {label} {} {} {ok}/{} ok\n",
                        record.key,
                        outcome.sha.short(),
                        outcome.status,
                        samples.len()
                    ));
                    for s in samples {
                        store.record(&run, s).map_err(|e| fail(1, e))?;
                    }
                }
                Err(e) => {
                    log::error!("{} {label}: {e}", record.key);
                    errors += 1;
                }
            }
        }
    }
    store.close_run(&run).map_err(|e| fail(1, e))?;
    write_output(None, &summary)?;
    if errors > 0 {
        return Err(fail(1, format!("run {run} finished with {errors} errors")));
    }
    Ok(())
}

pub fn export(g: &Globals, a: args::Export) -> Outcome {
    let store = open_store_read_only(&g.store)?;
    let filter = ExportFilter {
        project: a.project,
        metric: a.metric,
        run: a.run.map(RunId::new),
    };
    let csv = store.export_csv(&filter).map_err(|e| fail(1, e))?;
    write_output(a.output.as_deref(), &csv)
}

pub fn analyze(g: &Globals, a: args::Analyze) -> Outcome {
    let store = open_store_read_only(&g.store)?;
    let report = analysis::correlate_report(&store, &a.project);
    for w in &report.warnings {
        warn!("{w}");
    }
    let text = match a.format {
        Format::Csv => report.to_csv(),
        Format::Text => report.to_string(),
    };
    write_output(a.output.as_deref(), &text)
}

pub fn dump(g: &Globals, a: args::Dump) -> Outcome {
    let store = open_store_read_only(&g.store)?;
    write_output(a.output.as_deref(), &store.dump_portable())
}

pub fn load(g: &Globals, a: args::Load) -> Outcome {
    let text = fs::read_to_string(&a.input).map_err(|e| fail(1, format!("cannot read {}: {e}", a.input.display())))?;
    let store = Store::load_portable(&text, Some(&g.store)).map_err(|e| fail(1, e))?;
    info!(
        "loaded {} projects and {} runs into {}",
        store.projects().count(),
        store.runs().count(),
        g.store.display()
    );
    Ok(())
}
