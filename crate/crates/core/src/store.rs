//! Persistence for ingested tracker data, mappings, runs and samples.
//!
//! A store directory holds `records.log`, an append-only log of
//! [`kv`](crate::kv) sections, and `runs/` with per-lifecycle logs. Opening
//! a store replays the log into memory. Samples are never rewritten; a new
//! `[ingest:KEY]` section supersedes the project's previous tracker data.
//!
//! [`Store::dump_portable`] writes everything as one versioned JSON
//! document that [`Store::load_portable`] reads back into any store.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{format_timestamp, parse_timestamp, serde_ts, Clock, Timestamp};
use crate::kv::{self, Section};
use crate::lock::WriteLock;
use crate::mapper::{MatchMethod, RefMapping};
use crate::registry::ProjectRecord;
use crate::runner::{is_valid_metric_name, render_value, MetricSample, RunConfig, SampleStatus};
use crate::trackers::{Issue, TrackerVersion};
use crate::vcs::{Ref, RefKind, Sha};

pub const LOG_FILE: &str = "records.log";
pub const LOCK_FILE: &str = ".lock";
pub const RUNS_DIR: &str = "runs";
pub const DUMP_SCHEMA: &str = "smf-dump/1";
pub const CSV_HEADER: [&str; 7] = ["project", "sha", "version", "metric", "value", "status", "recorded_at"];

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("run {0} is closed")]
    RunClosed(RunId),
    #[error("no run {0} in this store")]
    UnknownRun(RunId),
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("no store at {0}")]
    StoreMissing(PathBuf),
    #[error("store opened read-only")]
    ReadOnly,
    #[error("store storage at {path}: {source}")]
    StorageError { path: PathBuf, source: io::Error },
    #[error("corrupt store log: {0}")]
    Corrupt(String),
    #[error("dump schema {found:?} is not {DUMP_SCHEMA:?}")]
    SchemaVersionMismatch { found: String },
    #[error("malformed dump: {0}")]
    MalformedDump(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RunId(String);

impl RunId {
    pub fn new(id: impl Into<String>) -> Self {
        RunId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RunId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub id: RunId,
    pub started_at: Timestamp,
    pub config: RunConfig,
    pub closed: bool,
    pub samples: Vec<MetricSample>,
}

/// The latest tracker ingest for one project.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectData {
    pub project: ProjectRecord,
    pub issues: Vec<Issue>,
    pub versions: Vec<TrackerVersion>,
    pub mappings: Vec<RefMapping>,
}

impl ProjectData {
    /// Smallest tracker version name mapped to `sha`, if any.
    pub fn version_for(&self, sha: &Sha) -> Option<&str> {
        self.mappings
            .iter()
            .filter(|m| m.git_ref.as_ref().is_some_and(|r| &r.target_sha == sha))
            .map(|m| m.version_name.as_str())
            .min()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExportFilter {
    pub project: Option<String>,
    pub metric: Option<String>,
    pub run: Option<RunId>,
}

#[derive(Debug)]
struct Log {
    file: File,
    path: PathBuf,
    empty: bool,
}

#[derive(Debug, Default)]
pub struct Store {
    dir: Option<PathBuf>,
    log: Option<Log>,
    read_only: bool,
    _lock: Option<WriteLock>,
    projects: BTreeMap<String, ProjectData>,
    runs: BTreeMap<RunId, RunRecord>,
}

fn storage(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::StorageError {
        path: path.to_path_buf(),
        source,
    }
}

impl Store {
    /// A store with no backing files.
    pub fn in_memory() -> Self {
        Store::default()
    }

    /// Opens (creating if needed) the store in `dir` for writing. Holds the
    /// store's write lock until dropped.
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(dir).map_err(storage(dir))?;
        let lock_path = dir.join(LOCK_FILE);
        let lock = WriteLock::acquire(&lock_path).map_err(storage(&lock_path))?;
        let log_path = dir.join(LOG_FILE);
        let mut store = Store::replay(dir, &log_path)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(storage(&log_path))?;
        let empty = file.metadata().map(|m| m.len() == 0).unwrap_or(true);
        store.log = Some(Log {
            file,
            path: log_path,
            empty,
        });
        store._lock = Some(lock);
        Ok(store)
    }

    /// Opens an existing store without taking the lock; writes fail.
    pub fn open_read_only(dir: &Path) -> Result<Self, StoreError> {
        let log_path = dir.join(LOG_FILE);
        if !log_path.is_file() {
            return Err(StoreError::StoreMissing(dir.to_path_buf()));
        }
        let mut store = Store::replay(dir, &log_path)?;
        store.read_only = true;
        Ok(store)
    }

    fn replay(dir: &Path, log_path: &Path) -> Result<Self, StoreError> {
        let mut store = Store {
            dir: Some(dir.to_path_buf()),
            ..Store::default()
        };
        let text = match fs::read_to_string(log_path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(storage(log_path)(e)),
        };
        let doc = kv::parse(&text).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        let mut sections = doc.sections.into_iter().peekable();
        while let Some(section) = sections.next() {
            match section.kind.as_str() {
                "ingest" => {
                    let project = ProjectRecord::from_section(&section)
                        .map_err(|e| StoreError::Corrupt(format!("ingest {}: {e}", section.name)))?;
                    let mut data = ProjectData {
                        project,
                        issues: Vec::new(),
                        versions: Vec::new(),
                        mappings: Vec::new(),
                    };
                    while let Some(next) = sections.next_if(|s| {
                        matches!(s.kind.as_str(), "issue" | "version" | "mapping") && s.name == section.name
                    }) {
                        match next.kind.as_str() {
                            "issue" => data.issues.push(decode_issue(&next)?),
                            "version" => data.versions.push(decode_version(&next)?),
                            _ => data.mappings.push(decode_mapping(&next)?),
                        }
                    }
                    store.projects.insert(section.name.clone(), data);
                }
                "run" => {
                    let run = decode_run(&section)?;
                    store.runs.insert(run.id.clone(), run);
                }
                "sample" => {
                    let sample = decode_sample(&section)?;
                    let run = store
                        .runs
                        .get_mut(&RunId::new(section.name.clone()))
                        .ok_or_else(|| StoreError::Corrupt(format!("sample for unknown run {}", section.name)))?;
                    run.samples.push(sample);
                }
                "close" => {
                    let run = store
                        .runs
                        .get_mut(&RunId::new(section.name.clone()))
                        .ok_or_else(|| StoreError::Corrupt(format!("close of unknown run {}", section.name)))?;
                    run.closed = true;
                }
                other => return Err(StoreError::Corrupt(format!("unexpected section kind {other:?}"))),
            }
        }
        Ok(store)
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// `runs/<run id>` below the store directory.
    pub fn run_dir(&self, run: &RunId) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(RUNS_DIR).join(run.as_str()))
    }

    fn append(&mut self, sections: &[Section]) -> Result<(), StoreError> {
        if self.read_only {
            return Err(StoreError::ReadOnly);
        }
        let Some(log) = self.log.as_mut() else {
            return Ok(());
        };
        let mut text = String::new();
        for s in sections {
            if !log.empty || !text.is_empty() {
                text.push('\n');
            }
            text.push_str(&s.render());
        }
        log.file.write_all(text.as_bytes()).map_err(storage(&log.path))?;
        log.empty = false;
        Ok(())
    }

    fn sync(&mut self) -> Result<(), StoreError> {
        if let Some(log) = self.log.as_mut() {
            log.file.sync_data().map_err(storage(&log.path))?;
        }
        Ok(())
    }

    /// Replaces the project's tracker data with a fresh ingest.
    pub fn put_project_data(&mut self, data: ProjectData) -> Result<(), StoreError> {
        let key = data.project.key.clone();
        let mut head = data.project.to_section();
        head.kind = "ingest".into();
        let mut sections = vec![head];
        sections.extend(data.issues.iter().map(|i| encode_issue(&key, i)));
        sections.extend(data.versions.iter().map(|v| encode_version(&key, v)));
        sections.extend(data.mappings.iter().map(|m| encode_mapping(&key, m)));
        self.append(&sections)?;
        self.sync()?;
        self.projects.insert(key, data);
        Ok(())
    }

    pub fn project_data(&self, key: &str) -> Option<&ProjectData> {
        self.projects.get(key)
    }

    pub fn projects(&self) -> impl Iterator<Item = &ProjectData> {
        self.projects.values()
    }

    /// Opens a new run stamped with `clock`; ids are unique per store.
    pub fn begin_run(&mut self, config: RunConfig, clock: &Clock) -> Result<RunId, StoreError> {
        let started_at = clock.now();
        let base = started_at.format("%Y%m%dT%H%M%S%.3fZ").to_string();
        let mut id = RunId::new(base.clone());
        let mut n = 2;
        while self.runs.contains_key(&id) {
            id = RunId::new(format!("{base}-{n}"));
            n += 1;
        }
        self.insert_run(RunRecord {
            id: id.clone(),
            started_at,
            config,
            closed: false,
            samples: Vec::new(),
        })?;
        Ok(id)
    }

    fn insert_run(&mut self, run: RunRecord) -> Result<(), StoreError> {
        self.append(&[encode_run(&run)])?;
        self.runs.insert(run.id.clone(), run);
        Ok(())
    }

    /// Appends `sample` to the open run `run`.
    pub fn record(&mut self, run: &RunId, sample: MetricSample) -> Result<(), StoreError> {
        check_sample(&sample)?;
        match self.runs.get(run) {
            None => return Err(StoreError::UnknownRun(run.clone())),
            Some(r) if r.closed => return Err(StoreError::RunClosed(run.clone())),
            Some(_) => {}
        }
        self.append(&[encode_sample(run, &sample)])?;
        self.runs.get_mut(run).expect("checked above").samples.push(sample);
        Ok(())
    }

    pub fn close_run(&mut self, run: &RunId) -> Result<(), StoreError> {
        match self.runs.get(run) {
            None => return Err(StoreError::UnknownRun(run.clone())),
            Some(r) if r.closed => return Err(StoreError::RunClosed(run.clone())),
            Some(_) => {}
        }
        self.append(&[Section::new("close", run.as_str())])?;
        self.sync()?;
        self.runs.get_mut(run).expect("checked above").closed = true;
        Ok(())
    }

    pub fn runs(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.values()
    }

    pub fn run(&self, id: &RunId) -> Option<&RunRecord> {
        self.runs.get(id)
    }

    pub fn samples(&self) -> impl Iterator<Item = &MetricSample> {
        self.runs.values().flat_map(|r| r.samples.iter())
    }

    /// CSV with header `project,sha,version,metric,value,status,recorded_at`,
    /// rows sorted by project, sha, metric and time, independent of the
    /// order samples were recorded in.
    pub fn export_csv(&self, filter: &ExportFilter) -> Result<String, StoreError> {
        let mut rows: Vec<[String; 7]> = Vec::new();
        for run in self.runs.values() {
            if filter.run.as_ref().is_some_and(|r| r != &run.id) {
                continue;
            }
            for s in &run.samples {
                if filter.project.as_ref().is_some_and(|p| p != &s.project_key)
                    || filter.metric.as_ref().is_some_and(|m| m != &s.metric_name)
                {
                    continue;
                }
                let version = self
                    .projects
                    .get(&s.project_key)
                    .and_then(|d| d.version_for(&s.sha))
                    .unwrap_or_default();
                rows.push([
                    s.project_key.clone(),
                    s.sha.to_string(),
                    version.to_string(),
                    s.metric_name.clone(),
                    s.value.map(render_value).unwrap_or_default(),
                    s.status.as_str().to_string(),
                    format_timestamp(&s.recorded_at),
                ]);
            }
        }
        rows.sort_by(|a, b| {
            (&a[0], &a[1], &a[3], &a[6], &a[5], &a[4], &a[2]).cmp(&(&b[0], &b[1], &b[3], &b[6], &b[5], &b[4], &b[2]))
        });
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let csv_err = |e: csv::Error| StoreError::StorageError {
            path: PathBuf::from("<csv>"),
            source: io::Error::other(e),
        };
        writer.write_record(CSV_HEADER).map_err(csv_err)?;
        for row in &rows {
            writer.write_record(row).map_err(csv_err)?;
        }
        let bytes = writer.into_inner().map_err(|e| csv_err(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 fields is utf-8"))
    }

    /// Every entity in one self-describing JSON document.
    pub fn dump_portable(&self) -> String {
        let mut doc = DumpDoc {
            schema: DUMP_SCHEMA.to_string(),
            projects: Vec::new(),
            issues: Vec::new(),
            versions: Vec::new(),
            mappings: Vec::new(),
            runs: Vec::new(),
            samples: Vec::new(),
        };
        for (key, data) in &self.projects {
            doc.projects.push(data.project.clone());
            doc.issues.extend(data.issues.iter().map(|i| tagged(key, i)));
            doc.versions.extend(data.versions.iter().map(|v| tagged(key, v)));
            doc.mappings.extend(data.mappings.iter().map(|m| tagged(key, m)));
        }
        for run in self.runs.values() {
            doc.runs.push(DumpRun {
                id: run.id.clone(),
                started_at: run.started_at,
                closed: run.closed,
                config: run.config.clone(),
            });
            doc.samples.extend(run.samples.iter().cloned().map(|item| DumpSample {
                run: run.id.clone(),
                item,
            }));
        }
        let mut text = serde_json::to_string_pretty(&doc).expect("dump serializes");
        text.push('\n');
        text
    }

    /// Rebuilds a store from a dump, in memory or in the empty directory `dir`.
    pub fn load_portable(document: &str, dir: Option<&Path>) -> Result<Self, StoreError> {
        let value: serde_json::Value =
            serde_json::from_str(document).map_err(|e| StoreError::MalformedDump(e.to_string()))?;
        match value.get("schema").and_then(|s| s.as_str()) {
            Some(DUMP_SCHEMA) => {}
            Some(other) => {
                return Err(StoreError::SchemaVersionMismatch {
                    found: other.to_string(),
                })
            }
            None => return Err(StoreError::MalformedDump("missing schema id".into())),
        }
        let doc: DumpDoc = serde_json::from_value(value).map_err(|e| StoreError::MalformedDump(e.to_string()))?;

        let mut store = match dir {
            Some(dir) => {
                if dir.join(LOG_FILE).metadata().is_ok_and(|m| m.len() > 0) {
                    return Err(StoreError::MalformedDump(format!(
                        "refusing to load into non-empty store {}",
                        dir.display()
                    )));
                }
                Store::open(dir)?
            }
            None => Store::in_memory(),
        };

        let mut grouped: BTreeMap<String, ProjectData> = BTreeMap::new();
        for project in doc.projects {
            project.check().map_err(|e| StoreError::MalformedDump(e.to_string()))?;
            let key = project.key.clone();
            let data = ProjectData {
                project,
                issues: Vec::new(),
                versions: Vec::new(),
                mappings: Vec::new(),
            };
            if grouped.insert(key.clone(), data).is_some() {
                return Err(StoreError::MalformedDump(format!("project {key} appears twice")));
            }
        }
        let owner = |project: &str, what: &str| {
            let known = grouped.contains_key(project);
            if known {
                Ok(())
            } else {
                Err(StoreError::MalformedDump(format!(
                    "{what} for unknown project {project}"
                )))
            }
        };
        for t in &doc.issues {
            owner(&t.project, "issue")?;
        }
        for t in &doc.versions {
            owner(&t.project, "version")?;
        }
        for t in &doc.mappings {
            owner(&t.project, "mapping")?;
        }
        for t in doc.issues {
            grouped.get_mut(&t.project).expect("checked").issues.push(t.item);
        }
        for t in doc.versions {
            grouped.get_mut(&t.project).expect("checked").versions.push(t.item);
        }
        for t in doc.mappings {
            grouped.get_mut(&t.project).expect("checked").mappings.push(t.item);
        }
        for data in grouped.into_values() {
            store.put_project_data(data)?;
        }

        let mut closed = Vec::new();
        for run in doc.runs {
            if store.runs.contains_key(&run.id) {
                return Err(StoreError::MalformedDump(format!("run {} appears twice", run.id)));
            }
            if run.closed {
                closed.push(run.id.clone());
            }
            store.insert_run(RunRecord {
                id: run.id,
                started_at: run.started_at,
                config: run.config,
                closed: false,
                samples: Vec::new(),
            })?;
        }
        for s in doc.samples {
            if !store.runs.contains_key(&s.run) {
                return Err(StoreError::MalformedDump(format!("sample for unknown run {}", s.run)));
            }
            store
                .record(&s.run, s.item)
                .map_err(|e| StoreError::MalformedDump(e.to_string()))?;
        }
        for id in closed {
            store.close_run(&id)?;
        }
        Ok(store)
    }
}

fn check_sample(s: &MetricSample) -> Result<(), StoreError> {
    let bad = |m: String| Err(StoreError::InvalidSample(m));
    match (s.status, s.value) {
        (SampleStatus::Ok, Some(v)) if v.is_finite() => {
            if !is_valid_metric_name(&s.metric_name) {
                return bad(format!("metric name {:?}", s.metric_name));
            }
        }
        (SampleStatus::Ok, _) => return bad("ok sample without a finite value".into()),
        (_, Some(_)) => return bad(format!("{} sample carries a value", s.status.as_str())),
        (_, None) => {}
    }
    if s.project_key.is_empty() || s.metric_name.contains(['\n', '\r']) {
        return bad("empty project or multi-line metric name".into());
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct DumpDoc {
    schema: String,
    projects: Vec<ProjectRecord>,
    issues: Vec<Tagged<Issue>>,
    versions: Vec<Tagged<TrackerVersion>>,
    mappings: Vec<Tagged<RefMapping>>,
    runs: Vec<DumpRun>,
    samples: Vec<DumpSample>,
}

#[derive(Serialize, Deserialize)]
struct Tagged<T> {
    project: String,
    #[serde(flatten)]
    item: T,
}

fn tagged<T: Clone>(project: &str, item: &T) -> Tagged<T> {
    Tagged {
        project: project.to_string(),
        item: item.clone(),
    }
}

#[derive(Serialize, Deserialize)]
struct DumpRun {
    id: RunId,
    #[serde(with = "serde_ts")]
    started_at: Timestamp,
    closed: bool,
    config: RunConfig,
}

#[derive(Serialize, Deserialize)]
struct DumpSample {
    run: RunId,
    #[serde(flatten)]
    item: MetricSample,
}

// Log section codecs.

fn field<'a>(s: &'a Section, name: &str) -> Result<&'a str, StoreError> {
    s.get(name)
        .ok_or_else(|| StoreError::Corrupt(format!("[{}:{}] lacks {name}", s.kind, s.name)))
}

fn parsed<T: std::str::FromStr>(s: &Section, name: &str) -> Result<T, StoreError> {
    let raw = field(s, name)?;
    raw.parse()
        .map_err(|_| StoreError::Corrupt(format!("[{}:{}] bad {name} {raw:?}", s.kind, s.name)))
}

fn timestamp(s: &Section, name: &str) -> Result<Timestamp, StoreError> {
    let raw = field(s, name)?;
    parse_timestamp(raw).ok_or_else(|| StoreError::Corrupt(format!("[{}:{}] bad {name} {raw:?}", s.kind, s.name)))
}

fn encode_issue(key: &str, i: &Issue) -> Section {
    let mut s = Section::new("issue", key);
    s.push("id", i.id.clone())
        .push("summary", i.summary.clone())
        .push("created", format_timestamp(&i.created))
        .push_opt("resolved", i.resolved.as_ref().map(format_timestamp))
        .push("status", i.status.clone());
    for v in &i.affected_versions {
        s.push("affected_version", v.clone());
    }
    for v in &i.fix_versions {
        s.push("fix_version", v.clone());
    }
    s
}

fn decode_issue(s: &Section) -> Result<Issue, StoreError> {
    Ok(Issue {
        id: field(s, "id")?.to_string(),
        summary: s.get("summary").unwrap_or_default().to_string(),
        created: timestamp(s, "created")?,
        resolved: match s.get("resolved") {
            Some(_) => Some(timestamp(s, "resolved")?),
            None => None,
        },
        status: s.get("status").unwrap_or_default().to_string(),
        affected_versions: s.get_all("affected_version").map(str::to_string).collect(),
        fix_versions: s.get_all("fix_version").map(str::to_string).collect(),
    })
}

fn encode_version(key: &str, v: &TrackerVersion) -> Section {
    let mut s = Section::new("version", key);
    s.push("name", v.name.clone())
        .push_opt("release_date", v.release_date.map(|d| d.format("%Y-%m-%d").to_string()))
        .push("released", v.released.to_string());
    s
}

fn decode_version(s: &Section) -> Result<TrackerVersion, StoreError> {
    Ok(TrackerVersion {
        name: field(s, "name")?.to_string(),
        release_date: match s.get("release_date") {
            Some(_) => Some(parsed(s, "release_date")?),
            None => None,
        },
        released: parsed(s, "released")?,
    })
}

fn encode_mapping(key: &str, m: &RefMapping) -> Section {
    let mut s = Section::new("mapping", key);
    s.push("version", m.version_name.clone())
        .push("method", m.method.as_str())
        .push("score", render_value(m.score));
    if let Some(r) = &m.git_ref {
        s.push("ref", r.name.clone())
            .push("ref_kind", r.kind.as_str())
            .push("ref_sha", r.target_sha.as_str());
    }
    s
}

fn decode_mapping(s: &Section) -> Result<RefMapping, StoreError> {
    let git_ref = match s.get("ref") {
        Some(name) => Some(Ref {
            name: name.to_string(),
            kind: parsed::<RefKind>(s, "ref_kind")?,
            target_sha: parsed(s, "ref_sha")?,
        }),
        None => None,
    };
    Ok(RefMapping {
        version_name: field(s, "version")?.to_string(),
        git_ref,
        method: parsed::<MatchMethod>(s, "method")?,
        score: parsed(s, "score")?,
    })
}

fn encode_run(run: &RunRecord) -> Section {
    let c = &run.config;
    let mut s = Section::new("run", run.id.as_str());
    s.push("started_at", format_timestamp(&run.started_at))
        .push("repo_base", c.repo_base.to_string_lossy())
        .push("no_compile", c.no_compile.to_string())
        .push_opt("project_filter", c.project_filter.clone())
        .push_opt("sha_filter", c.sha_filter.clone())
        .push("timeout_seconds", c.timeout_seconds.to_string())
        .push("verbosity", c.verbosity.to_string());
    s
}

fn decode_run(s: &Section) -> Result<RunRecord, StoreError> {
    Ok(RunRecord {
        id: RunId::new(s.name.clone()),
        started_at: timestamp(s, "started_at")?,
        config: RunConfig {
            repo_base: PathBuf::from(field(s, "repo_base")?),
            no_compile: parsed(s, "no_compile")?,
            project_filter: s.get("project_filter").map(str::to_string),
            sha_filter: s.get("sha_filter").map(str::to_string),
            timeout_seconds: parsed(s, "timeout_seconds")?,
            verbosity: parsed(s, "verbosity")?,
        },
        closed: false,
        samples: Vec::new(),
    })
}

fn encode_sample(run: &RunId, m: &MetricSample) -> Section {
    let mut s = Section::new("sample", run.as_str());
    s.push("project", m.project_key.clone())
        .push("sha", m.sha.as_str())
        .push("metric", m.metric_name.clone())
        .push_opt("value", m.value.map(render_value))
        .push("script", m.script_id.clone())
        .push("status", m.status.as_str())
        .push("purity_violation", m.purity_violation.to_string())
        .push("recorded_at", format_timestamp(&m.recorded_at));
    s
}

fn decode_sample(s: &Section) -> Result<MetricSample, StoreError> {
    Ok(MetricSample {
        project_key: field(s, "project")?.to_string(),
        sha: parsed(s, "sha")?,
        metric_name: field(s, "metric")?.to_string(),
        value: match s.get("value") {
            Some(_) => Some(parsed(s, "value")?),
            None => None,
        },
        script_id: field(s, "script")?.to_string(),
        status: parsed(s, "status")?,
        purity_violation: parsed(s, "purity_violation")?,
        recorded_at: timestamp(s, "recorded_at")?,
    })
}
