//! Git working copies, driven through the `git` executable's plumbing output.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::str::FromStr;

use chrono::{TimeZone, Utc};
use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Timestamp;

/// Shortest abbreviated commit id accepted by [`checkout`].
pub const MIN_ABBREV: usize = 6;

#[derive(Debug, Error)]
pub enum VcsError {
    #[error("cannot clone {url}: {detail}")]
    CloneFailed { url: String, detail: String },
    #[error("{0} is not a git working copy")]
    NotAGitRepo(PathBuf),
    #[error("{0} is a clone of {1}, not {2}")]
    ForeignClone(PathBuf, String, String),
    #[error("working copy {0} has modified tracked files")]
    DirtyWorkspace(PathBuf),
    #[error("unknown ref or commit {0:?}")]
    UnknownRef(String),
    #[error("prefix {prefix:?} matches {} commits", candidates.len())]
    AmbiguousPrefix { prefix: String, candidates: Vec<Sha> },
    #[error("`{command}` failed: {detail}")]
    Git { command: String, detail: String },
    #[error("cannot run git: {0}")]
    Io(#[from] std::io::Error),
}

/// A full 40-character lowercase hex commit id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Sha(String);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("not a 40-hex commit id: {0:?}")]
pub struct InvalidSha(pub String);

impl Sha {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn short(&self) -> &str {
        &self.0[..10]
    }
}

impl FromStr for Sha {
    type Err = InvalidSha;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == 40 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            Ok(Sha(s.to_string()))
        } else {
            Err(InvalidSha(s.to_string()))
        }
    }
}

impl TryFrom<String> for Sha {
    type Error = InvalidSha;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Sha> for String {
    fn from(s: Sha) -> String {
        s.0
    }
}

impl fmt::Display for Sha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Revision {
    pub sha: Sha,
    pub author: String,
    pub author_time: Timestamp,
    pub message: String,
}

/// Tags order before branches, which is the mapper's preference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefKind {
    Tag,
    Branch,
}

impl RefKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RefKind::Tag => "tag",
            RefKind::Branch => "branch",
        }
    }
}

impl FromStr for RefKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tag" => Ok(RefKind::Tag),
            "branch" => Ok(RefKind::Branch),
            other => Err(format!("unknown ref kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ref {
    pub name: String,
    pub kind: RefKind,
    pub target_sha: Sha,
}

fn git_command(dir: Option<&Path>, args: &[&str]) -> Command {
    let mut cmd = Command::new("git");
    if let Some(dir) = dir {
        cmd.current_dir(dir);
    }
    cmd.args(args)
        .env("GIT_TERMINAL_PROMPT", "0")
        .env("GIT_ASKPASS", "true")
        .stdin(Stdio::null());
    debug!(
        "git {}{}",
        args.join(" "),
        dir.map(|d| format!(" (in {})", d.display())).unwrap_or_default()
    );
    cmd
}

fn run_git(dir: Option<&Path>, args: &[&str]) -> Result<Output, VcsError> {
    Ok(git_command(dir, args).output()?)
}

/// Runs git and returns stdout, turning a nonzero exit into [`VcsError::Git`].
fn git_ok(dir: &Path, args: &[&str]) -> Result<String, VcsError> {
    let out = run_git(Some(dir), args)?;
    if !out.status.success() {
        return Err(VcsError::Git {
            command: format!("git {}", args.join(" ")),
            detail: String::from_utf8_lossy(&out.stderr).trim().to_string(),
        });
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// Fails unless `local` is the top level of a git working copy.
fn ensure_repo(local: &Path) -> Result<(), VcsError> {
    let not_repo = || VcsError::NotAGitRepo(local.to_path_buf());
    if !local.is_dir() {
        return Err(not_repo());
    }
    let out = run_git(Some(local), &["rev-parse", "--show-toplevel"])?;
    if !out.status.success() {
        return Err(not_repo());
    }
    let top = PathBuf::from(String::from_utf8_lossy(&out.stdout).trim());
    let same = match (top.canonicalize(), local.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if same {
        Ok(())
    } else {
        Err(not_repo())
    }
}

/// Clones `repo_url` into `<repo_base>/<key>`, or fetches if that clone
/// already exists. Either way the working copy ends up at the tip of the
/// remote's default branch.
pub fn clone_or_update(repo_url: &str, repo_base: &Path, key: &str) -> Result<PathBuf, VcsError> {
    let local = repo_base.join(key);
    if local.exists() {
        ensure_repo(&local)?;
        let origin = git_ok(&local, &["config", "--get", "remote.origin.url"])
            .map(|s| s.trim().to_string())
            .unwrap_or_default();
        if origin != repo_url {
            return Err(VcsError::ForeignClone(local, origin, repo_url.to_string()));
        }
        let out = run_git(
            Some(&local),
            &["fetch", "--quiet", "--prune", "--tags", "--force", "origin"],
        )?;
        if !out.status.success() {
            return Err(VcsError::CloneFailed {
                url: repo_url.to_string(),
                detail: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        // An empty remote has no default branch to move to.
        let _ = run_git(Some(&local), &["remote", "set-head", "origin", "--auto"]);
        if let Ok(tip) = resolve_name(&local, "refs/remotes/origin/HEAD") {
            if tip != head(&local)? {
                if !is_clean(&local)? {
                    return Err(VcsError::DirtyWorkspace(local));
                }
                git_ok(&local, &["checkout", "--quiet", "--detach", tip.as_str()])?;
            }
        }
        return Ok(local);
    }

    if let Err(e) = std::fs::create_dir_all(repo_base) {
        return Err(VcsError::CloneFailed {
            url: repo_url.to_string(),
            detail: e.to_string(),
        });
    }
    let target = local.to_string_lossy().into_owned();
    let out = run_git(None, &["clone", "--quiet", "--", repo_url, &target])?;
    if !out.status.success() {
        return Err(VcsError::CloneFailed {
            url: repo_url.to_string(),
            detail: String::from_utf8_lossy(&out.stderr).trim().to_string(),
        });
    }
    Ok(local)
}

/// Whether `repo_url` answers `git ls-remote`.
pub fn is_reachable(repo_url: &str) -> Result<(), String> {
    let out = run_git(None, &["ls-remote", "--quiet", "--", repo_url]).map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).trim().to_string())
    }
}

/// All tags plus local and remote-tracking branches, deduplicated by
/// `(kind, name)` and sorted by name then kind. Remote branches win over
/// stale local ones of the same name. Annotated tags are peeled to the
/// commit they point at.
pub fn list_refs(local: &Path) -> Result<Vec<Ref>, VcsError> {
    ensure_repo(local)?;
    let out = git_ok(
        local,
        &[
            "for-each-ref",
            "--format=%(refname)%00%(objectname)%00%(*objectname)",
            "refs/tags",
            "refs/heads",
            "refs/remotes",
        ],
    )?;
    let mut found: std::collections::BTreeMap<(String, RefKind), (bool, Sha)> = Default::default();
    for line in out.lines() {
        let mut parts = line.split('\0');
        let (Some(refname), Some(object), peeled) = (parts.next(), parts.next(), parts.next()) else {
            continue;
        };
        let target = match peeled.filter(|p| !p.is_empty()) {
            Some(p) => p,
            None => object,
        };
        let Ok(sha) = target.parse::<Sha>() else {
            continue;
        };
        let (name, kind, remote) = if let Some(n) = refname.strip_prefix("refs/tags/") {
            (n.to_string(), RefKind::Tag, false)
        } else if let Some(n) = refname.strip_prefix("refs/heads/") {
            (n.to_string(), RefKind::Branch, false)
        } else if let Some(rest) = refname.strip_prefix("refs/remotes/") {
            match rest.split_once('/') {
                Some((_, "HEAD")) | None => continue,
                Some((_, n)) => (n.to_string(), RefKind::Branch, true),
            }
        } else {
            continue;
        };
        if name.is_empty() {
            continue;
        }
        match found.get(&(name.clone(), kind)) {
            Some((true, _)) if !remote => {}
            _ => {
                found.insert((name, kind), (remote, sha));
            }
        }
    }
    Ok(found
        .into_iter()
        .map(|((name, kind), (_, target_sha))| Ref { name, kind, target_sha })
        .collect())
}

pub fn head(local: &Path) -> Result<Sha, VcsError> {
    resolve_name(local, "HEAD")
}

fn resolve_name(local: &Path, name: &str) -> Result<Sha, VcsError> {
    let spec = format!("{name}^{{commit}}");
    let out = run_git(Some(local), &["rev-parse", "--verify", "--quiet", &spec])?;
    if !out.status.success() {
        return Err(VcsError::UnknownRef(name.to_string()));
    }
    String::from_utf8_lossy(&out.stdout)
        .trim()
        .parse()
        .map_err(|_| VcsError::UnknownRef(name.to_string()))
}

fn looks_like_hex(s: &str) -> bool {
    !s.is_empty() && s.len() <= 40 && s.bytes().all(|b| b.is_ascii_hexdigit())
}

/// Picks the unique commit among `candidates` that starts with `prefix`.
pub fn resolve_prefix<'a, I>(prefix: &str, candidates: I) -> Result<Sha, VcsError>
where
    I: IntoIterator<Item = &'a Sha>,
{
    let prefix_lc = prefix.to_ascii_lowercase();
    if prefix_lc.len() < MIN_ABBREV || !looks_like_hex(&prefix_lc) {
        return Err(VcsError::UnknownRef(prefix.to_string()));
    }
    let mut hits: Vec<Sha> = candidates
        .into_iter()
        .filter(|s| s.as_str().starts_with(&prefix_lc))
        .cloned()
        .collect();
    hits.sort();
    hits.dedup();
    match hits.len() {
        0 => Err(VcsError::UnknownRef(prefix.to_string())),
        1 => Ok(hits.remove(0)),
        _ => Err(VcsError::AmbiguousPrefix {
            prefix: prefix.to_string(),
            candidates: hits,
        }),
    }
}

fn all_commits(local: &Path) -> Result<Vec<Sha>, VcsError> {
    let out = git_ok(local, &["rev-list", "--all"])?;
    Ok(out.lines().filter_map(|l| l.trim().parse().ok()).collect())
}

/// Resolves a ref name, full sha, or abbreviated sha (at least
/// [`MIN_ABBREV`] hex digits) without touching the working copy.
pub fn resolve(local: &Path, ref_or_sha: &str) -> Result<Sha, VcsError> {
    ensure_repo(local)?;
    if let Ok(sha) = ref_or_sha.parse::<Sha>() {
        return resolve_name(local, sha.as_str());
    }
    let refs = list_refs(local)?;
    if let Some(r) = refs.iter().filter(|r| r.name == ref_or_sha).min_by_key(|r| r.kind) {
        return Ok(r.target_sha.clone());
    }
    if looks_like_hex(ref_or_sha) && ref_or_sha.len() >= MIN_ABBREV {
        return resolve_prefix(ref_or_sha, &all_commits(local)?);
    }
    if looks_like_hex(ref_or_sha) {
        return Err(VcsError::UnknownRef(ref_or_sha.to_string()));
    }
    resolve_name(local, ref_or_sha)
}

/// Detaches HEAD at `ref_or_sha` and returns the full commit id.
pub fn checkout(local: &Path, ref_or_sha: &str) -> Result<Sha, VcsError> {
    ensure_repo(local)?;
    if !is_clean(local)? {
        return Err(VcsError::DirtyWorkspace(local.to_path_buf()));
    }
    let sha = resolve(local, ref_or_sha)?;
    if head(local).ok().as_ref() != Some(&sha) || !is_detached(local)? {
        git_ok(local, &["checkout", "--quiet", "--detach", sha.as_str()])?;
    }
    Ok(sha)
}

fn is_detached(local: &Path) -> Result<bool, VcsError> {
    let out = run_git(Some(local), &["symbolic-ref", "--quiet", "HEAD"])?;
    Ok(!out.status.success())
}

/// First-parent history of HEAD, newest first.
pub fn log(local: &Path) -> Result<Vec<Revision>, VcsError> {
    ensure_repo(local)?;
    if head(local).is_err() {
        return Ok(Vec::new());
    }
    let out = run_git(
        Some(local),
        &["log", "-z", "--first-parent", "--format=%H%n%an%n%at%n%B"],
    )?;
    if !out.status.success() {
        return Err(VcsError::Git {
            command: "git log".into(),
            detail: String::from_utf8_lossy(&out.stderr).trim().to_string(),
        });
    }
    let mut revisions = Vec::new();
    for record in out.stdout.split(|&b| b == 0).filter(|r| !r.is_empty()) {
        let text = String::from_utf8_lossy(record);
        let mut parts = text.splitn(4, '\n');
        let (Some(sha), Some(author), Some(time), message) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            continue;
        };
        let Ok(sha) = sha.parse::<Sha>() else { continue };
        let secs: i64 = time.trim().parse().unwrap_or_default();
        let Some(author_time) = Utc.timestamp_opt(secs, 0).single() else {
            continue;
        };
        revisions.push(Revision {
            sha,
            author: author.to_string(),
            author_time,
            message: message.unwrap_or_default().to_string(),
        });
    }
    Ok(revisions)
}

/// True iff no tracked file is modified or deleted and nothing is staged.
/// Untracked files, such as build output, do not count.
pub fn is_clean(local: &Path) -> Result<bool, VcsError> {
    ensure_repo(local)?;
    let out = git_ok(
        local,
        &[
            "status",
            "--porcelain=v1",
            "--untracked-files=no",
            "--ignore-submodules",
        ],
    )?;
    Ok(out.trim().is_empty())
}

/// Throws away modifications to tracked files, keeping untracked artifacts.
pub fn restore_tracked(local: &Path) -> Result<(), VcsError> {
    git_ok(local, &["reset", "--quiet", "--hard", "HEAD"]).map(|_| ())
}

/// Names of the entries at the root of `rev`'s tree.
pub fn root_entries(local: &Path, rev: &str) -> Result<Vec<String>, VcsError> {
    let out = git_ok(local, &["ls-tree", "--name-only", rev])?;
    Ok(out.lines().map(str::to_string).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sha(prefix: &str) -> Sha {
        format!("{prefix:0<40}").parse().unwrap()
    }

    #[test]
    fn sha_validation() {
        assert!("0123456789abcdef0123456789abcdef01234567".parse::<Sha>().is_ok());
        assert!("0123456789ABCDEF0123456789abcdef01234567".parse::<Sha>().is_err());
        assert!("abc".parse::<Sha>().is_err());
    }

    #[test]
    fn prefix_resolution() {
        let pool = [sha("3aeb27"), sha("3aeb28"), sha("3aeb2711")];
        assert!(matches!(
            resolve_prefix("3aeb27", &pool),
            Err(VcsError::AmbiguousPrefix { ref candidates, .. }) if candidates.len() == 2
        ));
        assert_eq!(resolve_prefix("3aeb28", &pool).unwrap(), pool[1]);
        assert_eq!(resolve_prefix("3AEB28", &pool).unwrap(), pool[1]);
        assert!(matches!(resolve_prefix("3aeb2", &pool), Err(VcsError::UnknownRef(_))));
        assert!(matches!(resolve_prefix("ffffff", &pool), Err(VcsError::UnknownRef(_))));
    }

    #[test]
    fn tags_sort_before_branches() {
        assert!(RefKind::Tag < RefKind::Branch);
    }
}
