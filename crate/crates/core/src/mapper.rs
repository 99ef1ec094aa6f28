//! Matching tracker version names ("4.5.2") to git refs ("rel/v4.5.2").
//!
//! Each version is resolved by the first rule that finds a candidate:
//! exact name equality, equality of normalized tokens, then a fuzzy match
//! on the normalized strings with edit distance at most one. Ties go to
//! tags over branches, then to the lexicographically smallest ref name, so
//! the input order of refs never matters.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::trackers::TrackerVersion;
use crate::vcs::Ref;

/// Largest edit distance accepted by the fuzzy rule.
pub const MAX_FUZZY_DISTANCE: usize = 1;

const SEPARATORS: [char; 3] = ['.', '-', '_'];
const PREFIXES: [&str; 3] = ["release", "rel", "v"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMethod {
    Exact,
    Normalized,
    Fuzzy,
    Unmatched,
}

impl MatchMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchMethod::Exact => "exact",
            MatchMethod::Normalized => "normalized",
            MatchMethod::Fuzzy => "fuzzy",
            MatchMethod::Unmatched => "unmatched",
        }
    }
}

impl fmt::Display for MatchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MatchMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(MatchMethod::Exact),
            "normalized" => Ok(MatchMethod::Normalized),
            "fuzzy" => Ok(MatchMethod::Fuzzy),
            "unmatched" => Ok(MatchMethod::Unmatched),
            other => Err(format!("unknown match method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefMapping {
    pub version_name: String,
    pub git_ref: Option<Ref>,
    pub method: MatchMethod,
    pub score: f64,
}

impl RefMapping {
    fn unmatched(version_name: &str) -> Self {
        RefMapping {
            version_name: version_name.to_string(),
            git_ref: None,
            method: MatchMethod::Unmatched,
            score: 0.0,
        }
    }
}

/// Strips `prefix` from the front of `s` when it stands alone, i.e. is
/// followed by the end, a digit or a separator.
fn strip_word<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    if prefix.is_empty() {
        return None;
    }
    let rest = s.strip_prefix(prefix)?;
    match rest.chars().next() {
        None => Some(rest),
        Some(c) if c.is_ascii_digit() || SEPARATORS.contains(&c) => Some(rest),
        Some(_) => None,
    }
}

/// Lowercases, keeps the last `/` segment, strips leading project key and
/// `v`/`rel`/`release` prefixes, and splits on `.`, `-` and `_`.
pub fn normalize(name: &str, project_key: &str) -> Vec<String> {
    let lower = name.to_lowercase();
    let key = project_key.to_lowercase();
    let mut rest = lower.rsplit('/').next().unwrap_or("");
    loop {
        let before = rest;
        rest = rest.trim_start_matches(SEPARATORS);
        if let Some(r) = strip_word(rest, &key) {
            rest = r;
        } else if let Some(r) = PREFIXES.iter().find_map(|p| strip_word(rest, p)) {
            rest = r;
        }
        if rest == before {
            break;
        }
    }
    rest.split(SEPARATORS)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Ordering of candidate refs for the same rule: tags first, then name,
/// then commit id so duplicates with different targets still order totally.
fn ref_preference(a: &Ref, b: &Ref) -> Ordering {
    a.kind
        .cmp(&b.kind)
        .then_with(|| a.name.cmp(&b.name))
        .then_with(|| a.target_sha.cmp(&b.target_sha))
}

/// One mapping per version, in input order.
pub fn map_versions(versions: &[TrackerVersion], refs: &[Ref], project_key: &str) -> Vec<RefMapping> {
    let normalized: Vec<(String, Vec<String>)> = refs
        .iter()
        .map(|r| {
            let tokens = normalize(&r.name, project_key);
            (tokens.join("."), tokens)
        })
        .collect();
    versions
        .iter()
        .map(|v| map_one(&v.name, refs, &normalized, project_key))
        .collect()
}

fn map_one(version: &str, refs: &[Ref], normalized: &[(String, Vec<String>)], project_key: &str) -> RefMapping {
    let found = |git_ref: &Ref, method, score| RefMapping {
        version_name: version.to_string(),
        git_ref: Some(git_ref.clone()),
        method,
        score,
    };

    if let Some(r) = refs
        .iter()
        .filter(|r| r.name == version)
        .min_by(|a, b| ref_preference(a, b))
    {
        return found(r, MatchMethod::Exact, 1.0);
    }

    let tokens = normalize(version, project_key);
    if tokens.is_empty() {
        return RefMapping::unmatched(version);
    }
    if let Some(r) = refs
        .iter()
        .zip(normalized)
        .filter(|(_, (_, t))| *t == tokens)
        .map(|(r, _)| r)
        .min_by(|a, b| ref_preference(a, b))
    {
        return found(r, MatchMethod::Normalized, 1.0);
    }

    let joined = tokens.join(".");
    let best = refs
        .iter()
        .zip(normalized)
        .filter(|(_, (s, _))| !s.is_empty())
        .map(|(r, (s, _))| (strsim::levenshtein(&joined, s), s.chars().count(), r))
        .filter(|(d, _, _)| *d <= MAX_FUZZY_DISTANCE)
        .min_by(|a, b| a.0.cmp(&b.0).then_with(|| ref_preference(a.2, b.2)));
    match best {
        Some((distance, len, r)) => {
            let longest = len.max(joined.chars().count()) as f64;
            found(r, MatchMethod::Fuzzy, 1.0 - distance as f64 / longest)
        }
        None => RefMapping::unmatched(version),
    }
}
