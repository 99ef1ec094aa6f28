//! Bugzilla REST subset: `rest/bug?product=KEY`, paged with limit/offset.

use url::form_urlencoded;

use super::json::{parse_body, Node};
use super::{check_issue, Issue, TrackerError, Transport, PAGE_SIZE};
use crate::registry::ProjectRecord;

pub fn bug_request(product: &str, offset: usize, limit: usize) -> String {
    let query = form_urlencoded::Serializer::new(String::new())
        .append_pair("product", product)
        .append_pair("limit", &limit.to_string())
        .append_pair("offset", &offset.to_string())
        .finish();
    format!("rest/bug?{query}")
}

pub(super) fn probe(project: &ProjectRecord, transport: &dyn Transport) -> Result<(), TrackerError> {
    let body = transport.get(
        &project.tracker_base_url,
        &bug_request(&project.tracker_project_key, 0, 1),
    )?;
    let value = parse_body(&body)?;
    Node::root(&value).field("bugs")?.array().map(|_| ())
}

/// Bugzilla reports no total, so paging stops at the first empty page.
pub(super) fn fetch_issues(project: &ProjectRecord, transport: &dyn Transport) -> Result<Vec<Issue>, TrackerError> {
    let mut issues = Vec::new();
    let mut offset = 0;
    loop {
        let request = bug_request(&project.tracker_project_key, offset, PAGE_SIZE);
        let body = transport.get(&project.tracker_base_url, &request)?;
        let value = parse_body(&body)?;
        let bugs = Node::root(&value).field("bugs")?.array()?;
        if bugs.is_empty() {
            break;
        }
        offset += bugs.len();
        for (i, bug) in bugs.iter().enumerate() {
            let issue = parse_bug(bug)?;
            check_issue(&issue, &format!("bugs[{i}]"))?;
            issues.push(issue);
        }
    }
    Ok(issues)
}

/// `version` may be a string or a list depending on the server's version.
fn string_or_list(node: Option<Node<'_>>) -> Result<Vec<String>, TrackerError> {
    let Some(node) = node else {
        return Ok(Vec::new());
    };
    let raw: Vec<String> = if node.value.is_array() {
        node.array()?
            .iter()
            .map(|n| n.str().map(str::to_string))
            .collect::<Result<_, _>>()?
    } else {
        vec![node.str()?.to_string()]
    };
    Ok(raw
        .into_iter()
        .filter(|v| !v.is_empty() && v != "---" && v != "unspecified")
        .collect())
}

fn parse_bug(bug: &Node<'_>) -> Result<Issue, TrackerError> {
    let id = bug.field("id")?;
    let id = match id.value.as_u64() {
        Some(n) => n.to_string(),
        None => id.str()?.to_string(),
    };
    Ok(Issue {
        id,
        summary: bug.field("summary")?.str()?.to_string(),
        created: bug.field("creation_time")?.timestamp()?,
        resolved: bug.opt_field("cf_last_resolved").map(|n| n.timestamp()).transpose()?,
        status: bug.field("status")?.str()?.to_string(),
        affected_versions: string_or_list(bug.opt_field("version"))?,
        fix_versions: string_or_list(bug.opt_field("target_milestone"))?,
    })
}
