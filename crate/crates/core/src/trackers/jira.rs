//! JIRA REST v2 subset: bug search and the project version list.

use chrono::NaiveDate;
use url::form_urlencoded;

use super::json::{parse_body, Node};
use super::{check_issue, Issue, TrackerError, TrackerVersion, Transport, PAGE_SIZE};
use crate::registry::ProjectRecord;

/// `rest/api/2/search?jql=project=KEY AND issuetype=Bug&startAt=N&maxResults=M`, encoded.
pub fn search_request(project_key: &str, start_at: usize, max_results: usize) -> String {
    let query = form_urlencoded::Serializer::new(String::new())
        .append_pair("jql", &format!("project={project_key} AND issuetype=Bug"))
        .append_pair("startAt", &start_at.to_string())
        .append_pair("maxResults", &max_results.to_string())
        .finish();
    format!("rest/api/2/search?{query}")
}

pub fn versions_request(project_key: &str) -> String {
    let key: String = form_urlencoded::byte_serialize(project_key.as_bytes()).collect();
    format!("rest/api/2/project/{key}/versions")
}

pub(super) fn fetch_issues(project: &ProjectRecord, transport: &dyn Transport) -> Result<Vec<Issue>, TrackerError> {
    let mut issues = Vec::new();
    let mut start_at = 0;
    loop {
        let request = search_request(&project.tracker_project_key, start_at, PAGE_SIZE);
        let body = transport.get(&project.tracker_base_url, &request)?;
        let value = parse_body(&body)?;
        let page = Node::root(&value);
        let total = page.field("total")?.u64()? as usize;
        let items = page.field("issues")?.array()?;
        let received = items.len();
        for (i, item) in items.iter().enumerate() {
            let issue = parse_issue(item)?;
            check_issue(&issue, &format!("issues[{i}]"))?;
            issues.push(issue);
        }
        start_at += received;
        if received == 0 || start_at >= total {
            break;
        }
    }
    Ok(issues)
}

fn names(node: Option<Node<'_>>) -> Result<Vec<String>, TrackerError> {
    let Some(node) = node else {
        return Ok(Vec::new());
    };
    node.array()?
        .iter()
        .map(|v| v.field("name").and_then(|n| n.str().map(str::to_string)))
        .collect()
}

fn parse_issue(item: &Node<'_>) -> Result<Issue, TrackerError> {
    let fields = item.field("fields")?;
    Ok(Issue {
        id: item.field("key")?.str()?.to_string(),
        summary: fields.field("summary")?.str()?.to_string(),
        created: fields.field("created")?.timestamp()?,
        resolved: fields.opt_field("resolutiondate").map(|n| n.timestamp()).transpose()?,
        status: fields.field("status")?.field("name")?.str()?.to_string(),
        affected_versions: names(fields.opt_field("versions"))?,
        fix_versions: names(fields.opt_field("fixVersions"))?,
    })
}

pub(super) fn fetch_versions(
    project: &ProjectRecord,
    transport: &dyn Transport,
) -> Result<Vec<TrackerVersion>, TrackerError> {
    let body = transport.get(
        &project.tracker_base_url,
        &versions_request(&project.tracker_project_key),
    )?;
    let value = parse_body(&body)?;
    let mut versions = Vec::new();
    for item in Node::root(&value).array()? {
        let name = item.field("name")?.str()?.to_string();
        if name.is_empty() {
            return Err(TrackerError::malformed(
                format!("{}.name", item.path()),
                "empty version name",
            ));
        }
        let release_date = match item.opt_field("releaseDate") {
            Some(d) => {
                let raw = d.str()?;
                Some(
                    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                        .map_err(|_| TrackerError::malformed(d.path(), format!("bad date {raw:?}")))?,
                )
            }
            None => None,
        };
        let released = match item.opt_field("released") {
            Some(r) => r.bool()?,
            None => false,
        };
        versions.push(TrackerVersion {
            name,
            release_date,
            released,
        });
    }
    Ok(versions)
}
