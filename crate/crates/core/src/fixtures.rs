//! Deterministic git repositories for tests and demos.
//!
//! Author, committer and dates are pinned and the user's git configuration
//! is ignored, so the same sequence of calls always yields the same commit
//! ids on any machine.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use crate::vcs::Sha;

const EPOCH: i64 = 1_600_000_000;

pub struct GitFixture {
    dir: PathBuf,
    tick: i64,
}

impl GitFixture {
    /// `git init -b main` in `dir`, creating it if needed.
    pub fn init(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let fixture = GitFixture { dir, tick: 0 };
        fixture.git(&["init", "--quiet", "-b", "main"])?;
        Ok(fixture)
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    /// Local path usable as a project's `repo_url`; git clones it directly.
    pub fn url(&self) -> String {
        self.dir.to_string_lossy().into_owned()
    }

    pub fn write(&self, rel: &str, contents: &str) -> io::Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, contents)
    }

    pub fn write_executable(&self, rel: &str, contents: &str) -> io::Result<()> {
        use std::os::unix::fs::PermissionsExt;
        self.write(rel, contents)?;
        fs::set_permissions(self.dir.join(rel), fs::Permissions::from_mode(0o755))
    }

    pub fn remove(&self, rel: &str) -> io::Result<()> {
        fs::remove_file(self.dir.join(rel))
    }

    /// Stages everything and commits with `message` kept verbatim.
    pub fn commit(&mut self, message: &str) -> io::Result<Sha> {
        self.git(&["add", "--all"])?;
        let msg_file = self.dir.join(".git").join("FIXTURE_MSG");
        fs::write(&msg_file, message)?;
        let msg_path = msg_file.to_string_lossy().into_owned();
        self.tick += 1;
        self.git(&[
            "commit",
            "--quiet",
            "--allow-empty",
            "--cleanup=verbatim",
            "-F",
            &msg_path,
        ])?;
        self.head()
    }

    pub fn tag(&self, name: &str) -> io::Result<()> {
        self.git(&["tag", name]).map(|_| ())
    }

    pub fn annotated_tag(&self, name: &str, message: &str) -> io::Result<()> {
        self.git(&["tag", "-a", name, "-m", message]).map(|_| ())
    }

    pub fn branch(&self, name: &str) -> io::Result<()> {
        self.git(&["branch", name]).map(|_| ())
    }

    pub fn head(&self) -> io::Result<Sha> {
        let out = self.git(&["rev-parse", "HEAD"])?;
        out.trim()
            .parse()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{e}")))
    }

    /// Runs git in the fixture with the pinned identity and dates.
    pub fn git(&self, args: &[&str]) -> io::Result<String> {
        let date = format!("{} +0000", EPOCH + self.tick * 60);
        let out = Command::new("git")
            .current_dir(&self.dir)
            .args([
                "-c",
                "commit.gpgsign=false",
                "-c",
                "tag.gpgsign=false",
                "-c",
                "core.autocrlf=false",
            ])
            .args(args)
            .env("GIT_CONFIG_NOSYSTEM", "1")
            .env("GIT_CONFIG_GLOBAL", "/dev/null")
            .env("GIT_AUTHOR_NAME", "Fixture Author")
            .env("GIT_AUTHOR_EMAIL", "author@example.org")
            .env("GIT_COMMITTER_NAME", "Fixture Committer")
            .env("GIT_COMMITTER_EMAIL", "committer@example.org")
            .env("GIT_AUTHOR_DATE", &date)
            .env("GIT_COMMITTER_DATE", &date)
            .stdin(Stdio::null())
            .output()?;
        if !out.status.success() {
            return Err(io::Error::other(format!(
                "git {}: {}",
                args.join(" "),
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }
}

/// Writes an executable shell script, for fake hooks, builds and metrics.
pub fn write_script(path: &Path, body: &str) -> io::Result<PathBuf> {
    use std::os::unix::fs::PermissionsExt;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, format!("#!/bin/sh\n{body}\n"))?;
    fs::set_permissions(path, fs::Permissions::from_mode(0o755))?;
    Ok(path.to_path_buf())
}
