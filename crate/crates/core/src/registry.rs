//! Project definitions and the corpus admission checks.
//!
//! Projects live in one plain-text file, one `[project:KEY]` section each
//! (see [`crate::kv`] for the layout). Field names the code does not know
//! are carried through a rewrite untouched.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kv::{self, Section};
use crate::lock::{sibling_lock_path, WriteLock};
use crate::trackers::{self, Transport};
use crate::vcs;

pub const DEFAULT_BUILD_COMMAND: &str = "mvn --batch-mode -DskipTests package";
pub const DEFAULT_CLEAN_COMMAND: &str = "mvn clean";
pub const SECTION_KIND: &str = "project";

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("project {0} is already registered")]
    DuplicateKey(String),
    #[error("invalid project record: {0}")]
    InvalidRecord(String),
    #[error("unknown project {0}")]
    UnknownProject(String),
    #[error("registry {path}: {source}")]
    Parse { path: PathBuf, source: kv::ParseError },
    #[error("registry storage at {path}: {source}")]
    StorageError { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackerKind {
    Jira,
    Bugzilla,
}

impl TrackerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TrackerKind::Jira => "jira",
            TrackerKind::Bugzilla => "bugzilla",
        }
    }
}

impl fmt::Display for TrackerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrackerKind {
    type Err = RegistryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jira" => Ok(TrackerKind::Jira),
            "bugzilla" => Ok(TrackerKind::Bugzilla),
            other => Err(RegistryError::InvalidRecord(format!(
                "tracker_kind must be jira or bugzilla, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hook {
    Prebuild,
    Postbuild,
    Cleanup,
}

impl Hook {
    pub const ALL: [Hook; 3] = [Hook::Prebuild, Hook::Postbuild, Hook::Cleanup];

    /// Stage name in lifecycle logs.
    pub fn stage(self) -> &'static str {
        match self {
            Hook::Prebuild => "prebuild",
            Hook::Postbuild => "postbuild",
            Hook::Cleanup => "cleanup",
        }
    }

    pub fn field(self) -> &'static str {
        match self {
            Hook::Prebuild => "prebuild_script",
            Hook::Postbuild => "postbuild_script",
            Hook::Cleanup => "cleanup_script",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectRecord {
    pub key: String,
    pub repo_url: String,
    pub tracker_kind: TrackerKind,
    pub tracker_base_url: String,
    pub tracker_project_key: String,
    /// Hook paths are relative to the registry file's directory unless absolute.
    pub prebuild_script: Option<PathBuf>,
    pub postbuild_script: Option<PathBuf>,
    pub cleanup_script: Option<PathBuf>,
    pub build_command: String,
    pub clean_command: String,
    /// Fields this version does not understand, in file order.
    #[serde(default)]
    pub extra: Vec<(String, String)>,
}

const KNOWN_FIELDS: [&str; 9] = [
    "repo_url",
    "tracker_kind",
    "tracker_base_url",
    "tracker_project_key",
    "prebuild_script",
    "postbuild_script",
    "cleanup_script",
    "build_command",
    "clean_command",
];

impl ProjectRecord {
    pub fn new(
        key: impl Into<String>,
        repo_url: impl Into<String>,
        tracker_kind: TrackerKind,
        tracker_base_url: impl Into<String>,
        tracker_project_key: impl Into<String>,
    ) -> Self {
        ProjectRecord {
            key: key.into(),
            repo_url: repo_url.into(),
            tracker_kind,
            tracker_base_url: tracker_base_url.into(),
            tracker_project_key: tracker_project_key.into(),
            prebuild_script: None,
            postbuild_script: None,
            cleanup_script: None,
            build_command: DEFAULT_BUILD_COMMAND.to_string(),
            clean_command: DEFAULT_CLEAN_COMMAND.to_string(),
            extra: Vec::new(),
        }
    }

    pub fn hook(&self, hook: Hook) -> Option<&Path> {
        match hook {
            Hook::Prebuild => self.prebuild_script.as_deref(),
            Hook::Postbuild => self.postbuild_script.as_deref(),
            Hook::Cleanup => self.cleanup_script.as_deref(),
        }
    }

    fn hook_mut(&mut self, hook: Hook) -> &mut Option<PathBuf> {
        match hook {
            Hook::Prebuild => &mut self.prebuild_script,
            Hook::Postbuild => &mut self.postbuild_script,
            Hook::Cleanup => &mut self.cleanup_script,
        }
    }

    /// Absolute location of a hook, resolved against the registry directory.
    pub fn resolve_hook(&self, hook: Hook, registry_dir: &Path) -> Option<PathBuf> {
        self.hook(hook).map(|p| registry_dir.join(p))
    }

    /// Checks the field invariants that do not depend on the filesystem.
    pub fn check(&self) -> Result<(), RegistryError> {
        let invalid = |msg: String| Err(RegistryError::InvalidRecord(msg));
        if !is_valid_key(&self.key) {
            return invalid(format!("key {:?} must match [A-Z0-9_]{{1,32}}", self.key));
        }
        let repo = self.repo_url.trim();
        if repo.is_empty() || repo != self.repo_url {
            return invalid(format!("repo_url {:?} must be a nonempty URL or path", self.repo_url));
        }
        if repo.starts_with("svn:") || repo.starts_with("svn+") {
            return invalid(format!("repo_url {repo:?}: only git repositories are supported"));
        }
        match url::Url::parse(&self.tracker_base_url) {
            Ok(u) if matches!(u.scheme(), "http" | "https") && u.host().is_some() => {}
            _ => {
                return invalid(format!(
                    "tracker_base_url {:?} must be an absolute http(s) URL",
                    self.tracker_base_url
                ))
            }
        }
        if self.tracker_project_key.trim().is_empty() {
            return invalid("tracker_project_key is empty".into());
        }
        if self.build_command.trim().is_empty() {
            return invalid("build_command is empty".into());
        }
        if self.clean_command.trim().is_empty() {
            return invalid("clean_command is empty".into());
        }
        for (name, value) in self.string_fields() {
            if value.contains(['\n', '\r']) {
                return invalid(format!("{name} contains a line break"));
            }
        }
        for (name, _) in &self.extra {
            if KNOWN_FIELDS.contains(&name.as_str()) || !is_valid_field_name(name) {
                return invalid(format!("bad extra field name {name:?}"));
            }
        }
        Ok(())
    }

    fn string_fields(&self) -> Vec<(&str, String)> {
        let mut fields = vec![
            ("repo_url", self.repo_url.clone()),
            ("tracker_base_url", self.tracker_base_url.clone()),
            ("tracker_project_key", self.tracker_project_key.clone()),
            ("build_command", self.build_command.clone()),
            ("clean_command", self.clean_command.clone()),
        ];
        for hook in Hook::ALL {
            if let Some(p) = self.hook(hook) {
                fields.push((hook.field(), p.to_string_lossy().into_owned()));
            }
        }
        fields
    }

    /// Every declared hook must name an executable file.
    pub fn check_hooks(&self, registry_dir: &Path) -> Result<(), RegistryError> {
        for hook in Hook::ALL {
            if let Some(path) = self.resolve_hook(hook, registry_dir) {
                if !is_executable(&path) {
                    return Err(RegistryError::InvalidRecord(format!(
                        "{} {} is not an executable file",
                        hook.field(),
                        path.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_section(&self) -> Section {
        let mut s = Section::new(SECTION_KIND, self.key.clone());
        s.push("repo_url", self.repo_url.clone())
            .push("tracker_kind", self.tracker_kind.as_str())
            .push("tracker_base_url", self.tracker_base_url.clone())
            .push("tracker_project_key", self.tracker_project_key.clone());
        for hook in Hook::ALL {
            s.push_opt(hook.field(), self.hook(hook).map(|p| p.to_string_lossy().into_owned()));
        }
        s.push("build_command", self.build_command.clone());
        if self.clean_command != DEFAULT_CLEAN_COMMAND {
            s.push("clean_command", self.clean_command.clone());
        }
        for (k, v) in &self.extra {
            s.push(k.clone(), v.clone());
        }
        s
    }

    /// Parses a section's fields; the section kind is not checked.
    pub fn from_section(section: &Section) -> Result<Self, RegistryError> {
        let required = |name: &str| {
            section
                .get(name)
                .map(str::to_string)
                .ok_or_else(|| RegistryError::InvalidRecord(format!("project {}: missing {name}", section.name)))
        };
        let mut record = ProjectRecord::new(
            section.name.clone(),
            required("repo_url")?,
            required("tracker_kind")?.parse()?,
            required("tracker_base_url")?,
            required("tracker_project_key")?,
        );
        for hook in Hook::ALL {
            *record.hook_mut(hook) = section.get(hook.field()).filter(|v| !v.is_empty()).map(PathBuf::from);
        }
        if let Some(cmd) = section.get("build_command") {
            record.build_command = cmd.to_string();
        }
        if let Some(cmd) = section.get("clean_command") {
            record.clean_command = cmd.to_string();
        }
        let mut seen_extra = Vec::<&str>::new();
        for (k, v) in &section.fields {
            if !KNOWN_FIELDS.contains(&k.as_str()) {
                // Repeated unknown fields keep their last value, like known ones.
                if let Some(pos) = seen_extra.iter().position(|s| *s == k) {
                    record.extra[pos].1 = v.clone();
                } else {
                    seen_extra.push(k);
                    record.extra.push((k.clone(), v.clone()));
                }
            }
        }
        record.check()?;
        Ok(record)
    }
}

pub fn is_valid_key(key: &str) -> bool {
    (1..=32).contains(&key.len()) && key.bytes().all(|b| matches!(b, b'A'..=b'Z' | b'0'..=b'9' | b'_'))
}

fn is_valid_field_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-' || b == b'.')
}

pub(crate) fn is_executable(path: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    fs::metadata(path)
        .map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0)
        .unwrap_or(false)
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    path: PathBuf,
    preamble: Vec<String>,
    projects: BTreeMap<String, ProjectRecord>,
}

impl Registry {
    /// Reads the registry at `path`; a missing file is an empty registry.
    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(source) => {
                return Err(RegistryError::StorageError {
                    path: path.to_path_buf(),
                    source,
                })
            }
        };
        let mut registry = Self::parse(&text).map_err(|e| match e {
            RegistryError::Parse { source, .. } => RegistryError::Parse {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })?;
        registry.path = path.to_path_buf();
        Ok(registry)
    }

    pub fn parse(text: &str) -> Result<Self, RegistryError> {
        let doc = kv::parse(text).map_err(|source| RegistryError::Parse {
            path: PathBuf::new(),
            source,
        })?;
        let mut projects = BTreeMap::new();
        for section in &doc.sections {
            if section.kind != SECTION_KIND {
                return Err(RegistryError::InvalidRecord(format!(
                    "unexpected section [{}:{}]",
                    section.kind, section.name
                )));
            }
            let record = ProjectRecord::from_section(section)?;
            if projects.contains_key(&record.key) {
                return Err(RegistryError::DuplicateKey(record.key));
            }
            projects.insert(record.key.clone(), record);
        }
        Ok(Registry {
            path: PathBuf::new(),
            preamble: doc.preamble,
            projects,
        })
    }

    /// Sections in key order, preceded by any leading comment block.
    pub fn render(&self) -> String {
        let sections: Vec<Section> = self.projects.values().map(ProjectRecord::to_section).collect();
        kv::render(&self.preamble, &sections)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Directory hook paths are resolved against.
    /// Absolute directory that relative hook paths are resolved against.
    pub fn base_dir(&self) -> PathBuf {
        let dir = registry_dir(&self.path);
        std::path::absolute(&dir).unwrap_or(dir)
    }

    pub fn get(&self, key: &str) -> Result<&ProjectRecord, RegistryError> {
        self.projects
            .get(key)
            .ok_or_else(|| RegistryError::UnknownProject(key.to_string()))
    }

    pub fn projects(&self) -> impl Iterator<Item = &ProjectRecord> {
        self.projects.values()
    }

    pub fn len(&self) -> usize {
        self.projects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projects.is_empty()
    }

    fn save(&self) -> Result<(), RegistryError> {
        let storage = |source| RegistryError::StorageError {
            path: self.path.clone(),
            source,
        };
        let tmp = self.path.with_extension("tmp");
        fs::write(&tmp, self.render()).map_err(storage)?;
        fs::rename(&tmp, &self.path).map_err(storage)
    }
}

fn registry_dir(registry_path: &Path) -> PathBuf {
    match registry_path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Stores hook paths relative to `dir` when they live underneath it.
fn relativize_hooks(record: &mut ProjectRecord, dir: &Path) {
    let Ok(base) = dir.canonicalize() else { return };
    for hook in Hook::ALL {
        let slot = record.hook_mut(hook);
        if let Some(path) = slot.as_ref().filter(|p| p.is_absolute()) {
            let canonical = path.canonicalize().unwrap_or_else(|_| path.clone());
            if let Ok(rel) = canonical.strip_prefix(&base) {
                *slot = Some(rel.to_path_buf());
            }
        }
    }
}

/// Adds `record` to the registry file at `registry_path`, creating the file
/// if needed. Holds the registry's write lock for the read-modify-write.
pub fn add_project(mut record: ProjectRecord, registry_path: &Path) -> Result<String, RegistryError> {
    record.check()?;
    let dir = registry_dir(registry_path);
    relativize_hooks(&mut record, &dir);
    record.check_hooks(&dir)?;

    let lock_path = sibling_lock_path(registry_path);
    let _lock = WriteLock::acquire(&lock_path).map_err(|source| RegistryError::StorageError {
        path: lock_path.clone(),
        source,
    })?;
    let mut registry = Registry::load(registry_path)?;
    if registry.projects.contains_key(&record.key) {
        return Err(RegistryError::DuplicateKey(record.key));
    }
    let key = record.key.clone();
    registry.projects.insert(key.clone(), record);
    registry.save()?;
    Ok(key)
}

/// One failed corpus admission criterion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NotGitReachable(String),
    NoPomAtRoot,
    TrackerUnreachable(String),
}

impl Violation {
    pub fn name(&self) -> &'static str {
        match self {
            Violation::NotGitReachable(_) => "NotGitReachable",
            Violation::NoPomAtRoot => "NoPomAtRoot",
            Violation::TrackerUnreachable(_) => "TrackerUnreachable",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotGitReachable(d) => write!(f, "NotGitReachable: {d}"),
            Violation::NoPomAtRoot => write!(f, "NoPomAtRoot: no pom.xml at the repository root"),
            Violation::TrackerUnreachable(d) => write!(f, "TrackerUnreachable: {d}"),
        }
    }
}

/// Checks the admission criteria: a reachable git repository, a `pom.xml`
/// at the root of its default branch, and a tracker that answers. An empty
/// list means the project is admissible.
///
/// The repository is inspected through a throwaway bare clone under
/// `workdir`; nothing else is written.
pub fn validate_project(record: &ProjectRecord, workdir: &Path, tracker: &dyn Transport) -> Vec<Violation> {
    let mut violations = Vec::new();
    match vcs::is_reachable(&record.repo_url) {
        Err(detail) => violations.push(Violation::NotGitReachable(detail)),
        Ok(()) => match has_root_pom(&record.repo_url, workdir) {
            Ok(true) => {}
            Ok(false) => violations.push(Violation::NoPomAtRoot),
            Err(detail) => violations.push(Violation::NotGitReachable(detail)),
        },
    }
    if let Err(e) = trackers::probe(record, tracker) {
        violations.push(Violation::TrackerUnreachable(e.to_string()));
    }
    violations
}

fn has_root_pom(repo_url: &str, workdir: &Path) -> Result<bool, String> {
    fs::create_dir_all(workdir).map_err(|e| e.to_string())?;
    let scratch = tempfile::Builder::new()
        .prefix("smf-validate-")
        .tempdir_in(workdir)
        .map_err(|e| e.to_string())?;
    let bare = scratch.path().join("probe.git");
    let out = std::process::Command::new("git")
        .args(["clone", "--quiet", "--bare", "--no-tags", "--", repo_url])
        .arg(&bare)
        .env("GIT_TERMINAL_PROMPT", "0")
        .stdin(std::process::Stdio::null())
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).trim().to_string());
    }
    // An empty repository has no HEAD tree and therefore no pom.xml.
    let entries = vcs::root_entries(&bare, "HEAD").unwrap_or_default();
    Ok(entries.iter().any(|e| e == "pom.xml"))
}
