//! Bug-tracker ingestion (JIRA and Bugzilla REST) with an offline fixture mode.
//!
//! Every request goes through a [`Transport`]: [`HttpTransport`] talks to the
//! live service, [`FixtureTransport`] replays recorded responses from a
//! directory without touching the network, and [`RecordingTransport`] does
//! the former while writing the latter.

mod bugzilla;
mod jira;
mod json;
mod transport;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{serde_ts, Timestamp};
use crate::registry::{ProjectRecord, TrackerKind};

pub use bugzilla::bug_request as bugzilla_bug_request;
pub use jira::{search_request as jira_search_request, versions_request as jira_versions_request};
pub use transport::{FixtureTransport, FixtureWriter, HttpTransport, RecordingTransport, Transport, INDEX_FILE};

/// Issues requested per page. Servers may return fewer; the clients advance
/// by what they actually receive.
pub const PAGE_SIZE: usize = 50;

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("tracker unreachable at {url}: {detail}")]
    TrackerUnreachable { url: String, detail: String },
    #[error("tracker at {url} requires authentication")]
    AuthRequired { url: String },
    #[error("malformed tracker response at `{path}`: {detail}")]
    MalformedResponse { path: String, detail: String },
    #[error("no recorded response for {request:?} in {dir}")]
    FixtureMissing { request: String, dir: String },
    #[error("fixture i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl TrackerError {
    pub(crate) fn malformed(path: impl Into<String>, detail: impl Into<String>) -> Self {
        TrackerError::MalformedResponse {
            path: path.into(),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub id: String,
    pub summary: String,
    #[serde(with = "serde_ts")]
    pub created: Timestamp,
    #[serde(with = "serde_ts::option")]
    pub resolved: Option<Timestamp>,
    pub status: String,
    pub affected_versions: Vec<String>,
    pub fix_versions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackerVersion {
    pub name: String,
    pub release_date: Option<NaiveDate>,
    pub released: bool,
}

/// All bug-type issues for the project's tracker key, every page, ordered
/// by id (numeric suffixes compare numerically, so `X-9` < `X-10`).
pub fn fetch_issues(project: &ProjectRecord, transport: &dyn Transport) -> Result<Vec<Issue>, TrackerError> {
    let mut issues = match project.tracker_kind {
        TrackerKind::Jira => jira::fetch_issues(project, transport)?,
        TrackerKind::Bugzilla => bugzilla::fetch_issues(project, transport)?,
    };
    issues.sort_by(|a, b| issue_order(&a.id).cmp(&issue_order(&b.id)));
    // Pages can overlap if the tracker changes between requests.
    issues.dedup_by(|a, b| a.id == b.id);
    Ok(issues)
}

/// Released and unreleased versions. Bugzilla products yield an empty list.
pub fn fetch_versions(project: &ProjectRecord, transport: &dyn Transport) -> Result<Vec<TrackerVersion>, TrackerError> {
    let versions = match project.tracker_kind {
        TrackerKind::Jira => jira::fetch_versions(project, transport)?,
        TrackerKind::Bugzilla => Vec::new(),
    };
    let mut seen = std::collections::HashSet::new();
    for (i, v) in versions.iter().enumerate() {
        if !seen.insert(v.name.as_str()) {
            return Err(TrackerError::malformed(
                format!("[{i}].name"),
                format!("duplicate version name {:?}", v.name),
            ));
        }
    }
    Ok(versions)
}

/// Cheapest request that proves the tracker answers for this project.
pub fn probe(project: &ProjectRecord, transport: &dyn Transport) -> Result<(), TrackerError> {
    match project.tracker_kind {
        TrackerKind::Jira => jira::fetch_versions(project, transport).map(|_| ()),
        TrackerKind::Bugzilla => bugzilla::probe(project, transport),
    }
}

fn issue_order(id: &str) -> (&str, u64, &str) {
    let digits = id.len() - id.bytes().rev().take_while(u8::is_ascii_digit).count();
    let (prefix, number) = id.split_at(digits);
    (prefix, number.parse().unwrap_or(0), id)
}

fn check_issue(issue: &Issue, path: &str) -> Result<(), TrackerError> {
    if issue.id.is_empty() {
        return Err(TrackerError::malformed(format!("{path}.id"), "empty issue id"));
    }
    if let Some(resolved) = issue.resolved {
        if resolved < issue.created {
            return Err(TrackerError::malformed(
                format!("{path}.resolved"),
                format!("{} resolved before it was created", issue.id),
            ));
        }
    }
    Ok(())
}
