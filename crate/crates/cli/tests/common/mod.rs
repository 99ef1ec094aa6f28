//! A throwaway working directory with a synthetic upstream repository, the
//! bundled tracker recording and a registry, driven through the `smf`
//! binary.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use smf_core::fixtures::{write_script, GitFixture};
use smf_core::vcs::Sha;
use tempfile::TempDir;

pub const FIXED_TIME: &str = "2024-05-01T12:00:00.000Z";
pub const KEY: &str = "HTTPCLIENT";

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn tracker_fixture() -> PathBuf {
    fixtures_dir().join("httpclient-jira")
}

pub struct Workspace {
    pub tmp: TempDir,
    pub upstream: GitFixture,
    /// Commits tagged 4.5.1, rel/v4.5.2 and v5.0, then the untagged tip.
    pub commits: Vec<Sha>,
}

/// Deterministic metric: line and file counts of `src/`.
pub const COUNT_METRIC: &str = r##"set -e
cd "$1"
files=$(find src -name '*.java' | wc -l)
lines=$(cat $(find src -name '*.java' | sort) | wc -l)
echo "scanning $1"
echo "#>> LOC=$lines"
echo "#>> FILES=$files""##;

impl Workspace {
    pub fn new() -> Self {
        let tmp = TempDir::new().unwrap();
        let mut upstream = GitFixture::init(tmp.path().join("upstream")).unwrap();
        let mut commits = Vec::new();
        let classes = ["Client", "Pool", "Route", "Redirect", "Cookie", "Auth"];
        for (i, tag) in ["4.5.1", "rel/v4.5.2", "v5.0", ""].iter().enumerate() {
            upstream
                .write("pom.xml", &format!("<project><version>{}</version></project>\n", i + 1))
                .unwrap();
            for (j, class) in classes.iter().take(i + 3).enumerate() {
                let body: String = (0..(i + 1) * (j + 2)).map(|k| format!("    int f{k};\n")).collect();
                upstream
                    .write(
                        &format!("src/main/java/{class}.java"),
                        &format!("class {class} {{\n{body}}}\n"),
                    )
                    .unwrap();
            }
            commits.push(upstream.commit(&format!("step {}\n", i + 1)).unwrap());
            if !tag.is_empty() {
                upstream.tag(tag).unwrap();
            }
        }
        let ws = Workspace { tmp, upstream, commits };
        ws.script("bin/count-metric", COUNT_METRIC);
        ws
    }

    pub fn path(&self) -> &Path {
        self.tmp.path()
    }

    pub fn script(&self, rel: &str, body: &str) -> PathBuf {
        let path = self.path().join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        write_script(&path, body).unwrap()
    }

    pub fn trace(&self) -> Vec<String> {
        fs::read_to_string(self.path().join("trace.log"))
            .unwrap_or_default()
            .lines()
            .map(str::to_string)
            .collect()
    }

    pub fn smf(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_smf"))
            .args(args)
            .current_dir(self.path())
            .env("SMF_FIXED_TIME", FIXED_TIME)
            .env_remove("SMF_REPO_BASE")
            .env_remove("RUST_LOG")
            .output()
            .unwrap()
    }

    /// Runs `smf` and panics with its stderr unless it exits 0.
    pub fn ok(&self, args: &[&str]) -> String {
        let out = self.smf(args);
        assert!(
            out.status.success(),
            "smf {args:?} exited {:?}\n{}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    /// Registers the project with a fake build tool that logs to
    /// `trace.log`; `hooks` adds three logging hook scripts.
    pub fn register(&self, hooks: bool, build_command: &str) {
        let url = self.upstream.url();
        let mut args = vec![
            "add-project",
            KEY,
            "--repo-url",
            &url,
            "--tracker-kind",
            "jira",
            "--tracker-url",
            "https://issues.example.org/jira",
            "--tracker-key",
            KEY,
            "--build-command",
            build_command,
            "--clean-command",
            "echo clean >> ../../trace.log; rm -rf target",
        ];
        if hooks {
            for stage in ["prebuild", "postbuild", "cleanup"] {
                self.script(
                    &format!("hooks/{stage}.sh"),
                    &format!("echo {stage} >> \"$1/../../trace.log\""),
                );
            }
            args.extend([
                "--prebuild-script",
                "hooks/prebuild.sh",
                "--postbuild-script",
                "hooks/postbuild.sh",
                "--cleanup-script",
                "hooks/cleanup.sh",
            ]);
        }
        self.ok(&args);
    }

    pub fn fetch(&self) -> String {
        let fixtures = tracker_fixture();
        self.ok(&["fetch-project", KEY, "--fixtures", fixtures.to_str().unwrap()])
    }
}

/// Build tool stand-in: records the call and leaves an artifact behind.
pub const FAKE_BUILD: &str = "echo build >> ../../trace.log && mkdir -p target && echo jar > target/app.jar";
