use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use log::debug;

use super::TrackerError;

/// Name of the file mapping each request to its recorded response file.
pub const INDEX_FILE: &str = "index.json";

pub trait Transport: Send + Sync {
    /// GETs `request` (path and query relative to `base_url`) and returns
    /// the response body.
    fn get(&self, base_url: &str, request: &str) -> Result<String, TrackerError>;
}

fn join_url(base_url: &str, request: &str) -> String {
    format!("{}/{}", base_url.trim_end_matches('/'), request.trim_start_matches('/'))
}

/// Anonymous HTTP(S) access to a live tracker.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        HttpTransport {
            agent: ureq::AgentBuilder::new()
                .timeout(timeout)
                .user_agent(concat!("smf/", env!("CARGO_PKG_VERSION")))
                .build(),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        HttpTransport::new(Duration::from_secs(60))
    }
}

impl Transport for HttpTransport {
    fn get(&self, base_url: &str, request: &str) -> Result<String, TrackerError> {
        let url = join_url(base_url, request);
        debug!("GET {url}");
        match self.agent.get(&url).set("Accept", "application/json").call() {
            Ok(resp) => resp.into_string().map_err(|e| TrackerError::TrackerUnreachable {
                url,
                detail: format!("reading body: {e}"),
            }),
            Err(ureq::Error::Status(401 | 403, _)) => Err(TrackerError::AuthRequired { url }),
            Err(ureq::Error::Status(code, _)) => Err(TrackerError::TrackerUnreachable {
                url,
                detail: format!("HTTP {code}"),
            }),
            Err(e) => Err(TrackerError::TrackerUnreachable {
                url,
                detail: e.to_string(),
            }),
        }
    }
}

/// Replays recorded responses. Never opens a socket.
#[derive(Debug)]
pub struct FixtureTransport {
    dir: PathBuf,
    index: BTreeMap<String, String>,
}

impl FixtureTransport {
    pub fn open(dir: &Path) -> Result<Self, TrackerError> {
        let index_path = dir.join(INDEX_FILE);
        let raw = fs::read_to_string(&index_path)?;
        let index = serde_json::from_str(&raw).map_err(|e| {
            TrackerError::malformed(index_path.display().to_string(), format!("bad fixture index: {e}"))
        })?;
        Ok(FixtureTransport {
            dir: dir.to_path_buf(),
            index,
        })
    }
}

impl Transport for FixtureTransport {
    fn get(&self, _base_url: &str, request: &str) -> Result<String, TrackerError> {
        let file = self.index.get(request).ok_or_else(|| TrackerError::FixtureMissing {
            request: request.to_string(),
            dir: self.dir.display().to_string(),
        })?;
        debug!("fixture {request} -> {file}");
        Ok(fs::read_to_string(self.dir.join(file))?)
    }
}

/// Builds a fixture directory: one verbatim response file per request,
/// named by a slug of the request, plus the index.
#[derive(Debug)]
pub struct FixtureWriter {
    dir: PathBuf,
    index: BTreeMap<String, String>,
}

impl FixtureWriter {
    /// Starts from the existing index in `dir`, if any.
    pub fn new(dir: &Path) -> Result<Self, TrackerError> {
        fs::create_dir_all(dir)?;
        let index = match fs::read_to_string(dir.join(INDEX_FILE)) {
            Ok(raw) => serde_json::from_str(&raw)
                .map_err(|e| TrackerError::malformed(INDEX_FILE, format!("bad fixture index: {e}")))?,
            Err(_) => BTreeMap::new(),
        };
        Ok(FixtureWriter {
            dir: dir.to_path_buf(),
            index,
        })
    }

    pub fn add(&mut self, request: &str, body: &str) -> Result<(), TrackerError> {
        let file = match self.index.get(request) {
            Some(existing) => existing.clone(),
            None => {
                let base = slug(request);
                let mut name = format!("{base}.json");
                let mut n = 2;
                while self.index.values().any(|v| *v == name) {
                    name = format!("{base}-{n}.json");
                    n += 1;
                }
                name
            }
        };
        fs::write(self.dir.join(&file), body)?;
        self.index.insert(request.to_string(), file);
        self.save()
    }

    fn save(&self) -> Result<(), TrackerError> {
        let mut text = serde_json::to_string_pretty(&self.index).expect("string map serializes");
        text.push('\n');
        fs::write(self.dir.join(INDEX_FILE), text)?;
        Ok(())
    }
}

fn slug(request: &str) -> String {
    let mut out = String::new();
    for c in request.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    let trimmed = out.trim_matches('-');
    trimmed
        .chars()
        .take(100)
        .collect::<String>()
        .trim_end_matches('-')
        .to_string()
}

/// Live access that also records every response as a fixture.
pub struct RecordingTransport {
    inner: Box<dyn Transport>,
    writer: Mutex<FixtureWriter>,
}

impl RecordingTransport {
    pub fn new(inner: Box<dyn Transport>, dir: &Path) -> Result<Self, TrackerError> {
        Ok(RecordingTransport {
            inner,
            writer: Mutex::new(FixtureWriter::new(dir)?),
        })
    }
}

impl Transport for RecordingTransport {
    fn get(&self, base_url: &str, request: &str) -> Result<String, TrackerError> {
        let body = self.inner.get(base_url, request)?;
        self.writer
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .add(request, &body)?;
        Ok(body)
    }
}
