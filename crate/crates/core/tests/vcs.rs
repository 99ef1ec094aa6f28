use std::collections::HashMap;
use std::fs;
use std::os::unix::fs::PermissionsExt;

use smf_core::fixtures::GitFixture;
use smf_core::vcs::{self, Ref, RefKind, Sha, VcsError};
use tempfile::TempDir;

fn three_commits(dir: &TempDir) -> (GitFixture, Vec<Sha>) {
    let mut repo = GitFixture::init(dir.path().join("upstream")).unwrap();
    let mut shas = Vec::new();
    for i in 1..=3 {
        repo.write("pom.xml", &format!("<project>{i}</project>\n")).unwrap();
        shas.push(repo.commit(&format!("commit {i}\n")).unwrap());
    }
    (repo, shas)
}

#[test]
fn clone_lands_on_upstream_tip() {
    let tmp = TempDir::new().unwrap();
    let (repo, shas) = three_commits(&tmp);
    let base = tmp.path().join("repos");
    let local = vcs::clone_or_update(&repo.url(), &base, "HC").unwrap();
    assert_eq!(local, base.join("HC"));
    assert_eq!(vcs::head(&local).unwrap(), shas[2]);
}

#[test]
fn second_clone_fetches_new_commits() {
    let tmp = TempDir::new().unwrap();
    let (mut repo, _) = three_commits(&tmp);
    let base = tmp.path().join("repos");
    let first = vcs::clone_or_update(&repo.url(), &base, "HC").unwrap();
    fs::write(first.join("marker-untracked"), "x").unwrap();
    repo.write("extra.txt", "more\n").unwrap();
    let tip = repo.commit("fourth\n").unwrap();
    let second = vcs::clone_or_update(&repo.url(), &base, "HC").unwrap();
    assert_eq!(first, second);
    assert_eq!(vcs::head(&second).unwrap(), tip);
    // A re-clone would have lost the untracked file.
    assert!(second.join("marker-untracked").exists());
}

#[test]
fn unwritable_repo_base_is_clone_failed() {
    let tmp = TempDir::new().unwrap();
    let (repo, _) = three_commits(&tmp);
    let file = tmp.path().join("not-a-dir");
    fs::write(&file, "").unwrap();
    let err = vcs::clone_or_update(&repo.url(), &file.join("repos"), "HC").unwrap_err();
    assert!(matches!(err, VcsError::CloneFailed { .. }), "{err:?}");

    let ro = tmp.path().join("ro");
    fs::create_dir(&ro).unwrap();
    fs::set_permissions(&ro, fs::Permissions::from_mode(0o555)).unwrap();
    let probe = fs::write(ro.join("probe"), "");
    if probe.is_err() {
        let err = vcs::clone_or_update(&repo.url(), &ro, "HC").unwrap_err();
        assert!(matches!(err, VcsError::CloneFailed { .. }), "{err:?}");
    }
    fs::set_permissions(&ro, fs::Permissions::from_mode(0o755)).unwrap();
}

#[test]
fn missing_remote_is_clone_failed() {
    let tmp = TempDir::new().unwrap();
    let url = tmp.path().join("nothing-here").to_string_lossy().into_owned();
    let err = vcs::clone_or_update(&url, &tmp.path().join("repos"), "HC").unwrap_err();
    assert!(matches!(err, VcsError::CloneFailed { .. }));
}

#[test]
fn existing_non_clone_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let (repo, _) = three_commits(&tmp);
    let base = tmp.path().join("repos");
    fs::create_dir_all(base.join("HC")).unwrap();
    let err = vcs::clone_or_update(&repo.url(), &base, "HC").unwrap_err();
    assert!(matches!(err, VcsError::NotAGitRepo(_)), "{err:?}");

    let other = GitFixture::init(tmp.path().join("other")).unwrap();
    vcs::clone_or_update(&other.url(), &base, "OTHER").unwrap();
    fs::rename(base.join("OTHER"), base.join("HC2")).unwrap();
    let err = vcs::clone_or_update(&repo.url(), &base, "HC2").unwrap_err();
    assert!(matches!(err, VcsError::ForeignClone(..)), "{err:?}");
}

#[test]
fn refs_include_tags_and_default_branch() {
    let tmp = TempDir::new().unwrap();
    let (repo, shas) = three_commits(&tmp);
    repo.git(&["tag", "4.5.1", shas[0].as_str()]).unwrap();
    repo.annotated_tag("4.5.2", "release 4.5.2").unwrap();
    let refs = vcs::list_refs(repo.path()).unwrap();
    let tags: Vec<&Ref> = refs.iter().filter(|r| r.kind == RefKind::Tag).collect();
    assert_eq!(tags.len(), 2);
    assert_eq!(tags[0].name, "4.5.1");
    assert_eq!(tags[0].target_sha, shas[0]);
    // Annotated tags point at their commit, not the tag object.
    assert_eq!(tags[1].target_sha, shas[2]);
    assert!(refs.iter().any(|r| r.kind == RefKind::Branch && r.name == "main"));
}

#[test]
fn fresh_repo_has_only_the_default_branch() {
    let tmp = TempDir::new().unwrap();
    let mut repo = GitFixture::init(tmp.path().join("r")).unwrap();
    let sha = repo.commit("only\n").unwrap();
    let local = vcs::clone_or_update(&repo.url(), &tmp.path().join("repos"), "R").unwrap();
    let refs = vcs::list_refs(&local).unwrap();
    assert_eq!(
        refs,
        vec![Ref {
            name: "main".into(),
            kind: RefKind::Branch,
            target_sha: sha
        }]
    );
}

#[test]
fn non_repo_directory_is_not_a_git_repo() {
    let tmp = TempDir::new().unwrap();
    assert!(matches!(vcs::list_refs(tmp.path()), Err(VcsError::NotAGitRepo(_))));
    assert!(matches!(vcs::log(tmp.path()), Err(VcsError::NotAGitRepo(_))));
    assert!(matches!(vcs::is_clean(tmp.path()), Err(VcsError::NotAGitRepo(_))));
    // A subdirectory of a working copy is not its top level either.
    let (repo, _) = three_commits(&tmp);
    fs::create_dir(repo.path().join("sub")).unwrap();
    assert!(matches!(
        vcs::list_refs(&repo.path().join("sub")),
        Err(VcsError::NotAGitRepo(_))
    ));
}

#[test]
fn checkout_by_six_char_prefix() {
    let tmp = TempDir::new().unwrap();
    let (repo, shas) = three_commits(&tmp);
    let prefix = &shas[0].as_str()[..6];
    assert_eq!(vcs::checkout(repo.path(), prefix).unwrap(), shas[0]);
    assert_eq!(vcs::head(repo.path()).unwrap(), shas[0]);
    assert_eq!(
        fs::read_to_string(repo.path().join("pom.xml")).unwrap(),
        "<project>1</project>\n"
    );
    // Uppercase hex and the full id resolve the same way.
    assert_eq!(vcs::checkout(repo.path(), &prefix.to_uppercase()).unwrap(), shas[0]);
    assert_eq!(vcs::checkout(repo.path(), shas[1].as_str()).unwrap(), shas[1]);
    assert_eq!(vcs::checkout(repo.path(), "main").unwrap(), shas[2]);
}

#[test]
fn checkout_of_head_is_a_no_op() {
    let tmp = TempDir::new().unwrap();
    let (repo, shas) = three_commits(&tmp);
    let head = vcs::head(repo.path()).unwrap();
    assert_eq!(vcs::checkout(repo.path(), head.as_str()).unwrap(), shas[2]);
    assert_eq!(vcs::checkout(repo.path(), head.as_str()).unwrap(), shas[2]);
    assert!(vcs::is_clean(repo.path()).unwrap());
}

#[test]
fn unknown_refs_and_short_prefixes() {
    let tmp = TempDir::new().unwrap();
    let (repo, shas) = three_commits(&tmp);
    assert!(matches!(
        vcs::checkout(repo.path(), "no-such-tag"),
        Err(VcsError::UnknownRef(_))
    ));
    assert!(matches!(
        vcs::checkout(repo.path(), &shas[0].as_str()[..5]),
        Err(VcsError::UnknownRef(_))
    ));
    let absent = "0".repeat(40);
    assert!(vcs::checkout(repo.path(), &absent).is_err());
}

#[test]
fn checkout_refuses_dirty_workspace() {
    let tmp = TempDir::new().unwrap();
    let (repo, shas) = three_commits(&tmp);
    fs::write(repo.path().join("pom.xml"), "edited").unwrap();
    assert!(matches!(
        vcs::checkout(repo.path(), shas[0].as_str()),
        Err(VcsError::DirtyWorkspace(_))
    ));
}

/// Raw commit object with an empty tree, as git would hash it.
fn commit_object(tree: &str, n: u32) -> Vec<u8> {
    format!(
        "tree {tree}\nauthor Fixture <fixture@example.com> 1600000000 +0000\n\
         committer Fixture <fixture@example.com> 1600000000 +0000\n\ncollision {n}\n"
    )
    .into_bytes()
}

fn object_id(kind: &str, body: &[u8]) -> String {
    let mut h = sha1_smol::Sha1::new();
    h.update(format!("{kind} {}\0", body.len()).as_bytes());
    h.update(body);
    h.digest().to_string()
}

#[test]
fn prefix_shared_by_two_commits_is_ambiguous() {
    let tmp = TempDir::new().unwrap();
    let (repo, _) = three_commits(&tmp);
    let tree = repo.git(&["hash-object", "-t", "tree", "-w", "/dev/null"]).unwrap();
    let tree = tree.trim();
    assert_eq!(tree, object_id("tree", b""));

    // Birthday search over 24-bit prefixes; a few thousand hashes suffice.
    let mut seen: HashMap<String, u32> = HashMap::new();
    let (a, b) = (0..200_000)
        .find_map(|n| {
            let id = object_id("commit", &commit_object(tree, n));
            seen.insert(id[..6].to_string(), n).map(|m| (m, n))
        })
        .expect("collision within range");

    let mut written = Vec::new();
    for (n, branch) in [(a, "twin-a"), (b, "twin-b")] {
        let body = commit_object(tree, n);
        let path = tmp.path().join(format!("obj-{n}"));
        fs::write(&path, &body).unwrap();
        let id = repo
            .git(&["hash-object", "-t", "commit", "-w", &path.to_string_lossy()])
            .unwrap();
        assert_eq!(id.trim(), object_id("commit", &body));
        repo.git(&["branch", branch, id.trim()]).unwrap();
        written.push(id.trim().to_string());
    }
    let prefix = &written[0][..6];
    assert_eq!(prefix, &written[1][..6]);
    match vcs::checkout(repo.path(), prefix) {
        Err(VcsError::AmbiguousPrefix { prefix: p, candidates }) => {
            assert_eq!(p, prefix);
            let mut expected: Vec<Sha> = written.iter().map(|s| s.parse().unwrap()).collect();
            expected.sort();
            assert_eq!(candidates, expected);
        }
        other => panic!("expected AmbiguousPrefix, got {other:?}"),
    }
    // One more digit may or may not separate them; the full ids always do.
    assert_eq!(vcs::resolve(repo.path(), &written[1]).unwrap().as_str(), written[1]);
}

#[test]
fn log_is_newest_first_with_messages_intact() {
    let tmp = TempDir::new().unwrap();
    let (mut repo, mut shas) = three_commits(&tmp);
    let message = "Subject line\n\n  indented body\n\ttab\n\n\ntrailing blank lines kept\n";
    shas.push(repo.commit(message).unwrap());
    let log = vcs::log(repo.path()).unwrap();
    assert_eq!(log.len(), 4);
    let ids: Vec<&Sha> = log.iter().map(|r| &r.sha).collect();
    assert_eq!(ids, shas.iter().rev().collect::<Vec<_>>());
    assert_eq!(log[0].message, message);
    assert_eq!(log[3].message, "commit 1\n");
    assert_eq!(log[0].author, "Fixture Author");
    assert!(log[0].author_time > log[1].author_time);
}

#[test]
fn single_commit_log() {
    let tmp = TempDir::new().unwrap();
    let mut repo = GitFixture::init(tmp.path().join("r")).unwrap();
    repo.commit("one\n").unwrap();
    assert_eq!(vcs::log(repo.path()).unwrap().len(), 1);
}

#[test]
fn cleanliness_ignores_untracked_artifacts() {
    let tmp = TempDir::new().unwrap();
    let (repo, _) = three_commits(&tmp);
    assert!(vcs::is_clean(repo.path()).unwrap());
    fs::create_dir_all(repo.path().join("target/classes")).unwrap();
    fs::write(repo.path().join("target/classes/Foo.class"), [0xca, 0xfe]).unwrap();
    assert!(vcs::is_clean(repo.path()).unwrap());
    fs::write(repo.path().join("pom.xml"), "changed").unwrap();
    assert!(!vcs::is_clean(repo.path()).unwrap());
    vcs::restore_tracked(repo.path()).unwrap();
    assert!(vcs::is_clean(repo.path()).unwrap());
    assert!(repo.path().join("target/classes/Foo.class").exists());
    repo.remove("pom.xml").unwrap();
    assert!(!vcs::is_clean(repo.path()).unwrap());
}

#[test]
fn fixtures_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (_, a) = three_commits(&tmp);
    let tmp2 = TempDir::new().unwrap();
    let (_, b) = three_commits(&tmp2);
    assert_eq!(a, b);
}
