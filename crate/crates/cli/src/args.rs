use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use smf_core::runner::DEFAULT_TIMEOUT_SECONDS;
use smf_core::TrackerKind;

#[derive(Debug, Parser)]
#[command(
    name = "smf",
    version,
    about = "Collect software metrics across released versions and relate them to bug counts"
)]
pub struct Cli {
    /// Project registry file
    #[arg(long, global = true, default_value = "smf.registry", value_name = "PATH")]
    pub registry: PathBuf,

    /// Store directory for tracker data, runs and samples
    #[arg(long, global = true, default_value = "smf-store", value_name = "DIR")]
    pub store: PathBuf,

    /// Verbosity level; 0=errors only, 1=normal output, 2=verbose output, 3=very verbose output
    #[arg(short, long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=3))]
    pub verbosity: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Register a project
    #[command(alias = "add_project")]
    AddProject(AddProject),
    /// Check a project against the admission criteria
    #[command(alias = "validate_project")]
    ValidateProject(ValidateProject),
    /// Clone or update a project, ingest its tracker data and map versions to refs
    #[command(alias = "fetch_project")]
    FetchProject(FetchProject),
    /// Build each version and run metric scripts on it
    #[command(alias = "run_metric")]
    RunMetric(RunMetric),
    /// Write samples as CSV
    Export(Export),
    /// Correlate each metric with per-version bug counts
    Analyze(Analyze),
    /// Write the whole store as a portable JSON document
    Dump(Dump),
    /// Rebuild an empty store from a dump
    Load(Load),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Tracker {
    Jira,
    Bugzilla,
}

impl From<Tracker> for TrackerKind {
    fn from(t: Tracker) -> Self {
        match t {
            Tracker::Jira => TrackerKind::Jira,
            Tracker::Bugzilla => TrackerKind::Bugzilla,
        }
    }
}

#[derive(Debug, Args)]
pub struct AddProject {
    /// Project key, [A-Z0-9_]{1,32}
    pub key: String,
    /// Git URL or local path of the repository
    #[arg(long, value_name = "URL")]
    pub repo_url: String,
    #[arg(long, value_enum)]
    pub tracker_kind: Tracker,
    /// Base URL of the tracker, e.g. https://issues.apache.org/jira
    #[arg(long, value_name = "URL")]
    pub tracker_url: String,
    /// Project key or product name on the tracker
    #[arg(long, value_name = "KEY")]
    pub tracker_key: String,
    /// Executable run before the build
    #[arg(long, value_name = "PATH")]
    pub prebuild_script: Option<PathBuf>,
    /// Executable run after a successful build
    #[arg(long, value_name = "PATH")]
    pub postbuild_script: Option<PathBuf>,
    /// Executable run at the end of every lifecycle
    #[arg(long, value_name = "PATH")]
    pub cleanup_script: Option<PathBuf>,
    /// Shell command that builds the project
    #[arg(long, value_name = "CMD")]
    pub build_command: Option<String>,
    /// Shell command that removes build output
    #[arg(long, value_name = "CMD")]
    pub clean_command: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrackerSource {
    /// Replay tracker responses from this fixture directory instead of the network
    #[arg(long, value_name = "DIR", conflicts_with = "record_fixtures")]
    pub fixtures: Option<PathBuf>,
    /// Query the live tracker and record every response into this directory
    #[arg(long, value_name = "DIR")]
    pub record_fixtures: Option<PathBuf>,
    /// Seconds before a tracker request is abandoned
    #[arg(long, default_value_t = 60, value_name = "SECONDS")]
    pub http_timeout: u64,
}

#[derive(Debug, Args)]
pub struct ValidateProject {
    pub key: String,
    /// Scratch directory for the temporary clone
    #[arg(long, value_name = "DIR")]
    pub workdir: Option<PathBuf>,
    #[command(flatten)]
    pub tracker: TrackerSource,
}

#[derive(Debug, Args)]
pub struct FetchProject {
    pub key: String,
    /// Directory that holds the project working copies
    #[arg(long, env = "SMF_REPO_BASE", default_value = "repos", value_name = "REPO_BASE")]
    pub git_repo_base: PathBuf,
    #[command(flatten)]
    pub tracker: TrackerSource,
}

#[derive(Debug, Args)]
#[command(after_help = "Each script is called with the project root as its only argument. \
Its standard output is searched for lines of the form '#>> NAME=VALUE'; every such line becomes a sample. \
A script that runs longer than --timeout is killed together with its children.")]
pub struct RunMetric {
    /// Metric executables, run in the given order
    #[arg(required = true, value_name = "SHELL_SCRIPT")]
    pub scripts: Vec<PathBuf>,
    /// Directory that holds the project working copies
    #[arg(long, env = "SMF_REPO_BASE", default_value = "repos", value_name = "REPO_BASE")]
    pub git_repo_base: PathBuf,
    /// Do not compile projects before calling the metrics
    #[arg(long)]
    pub no_compile: bool,
    /// Run only on this project; all registered projects if omitted
    #[arg(long, value_name = "PROJECT")]
    pub project: Option<String>,
    /// Run only on this commit (full id, prefix of at least 6 digits, or ref name);
    /// all mapped versions if omitted
    #[arg(long, value_name = "SHA")]
    pub sha: Option<String>,
    /// Seconds a metric script may run before it is killed
    #[arg(long, default_value_t = DEFAULT_TIMEOUT_SECONDS, value_name = "SECONDS",
          value_parser = clap::value_parser!(u64).range(1..))]
    pub timeout: u64,
}

#[derive(Debug, Args)]
pub struct Export {
    /// Write here instead of standard output
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
    #[arg(long, value_name = "PROJECT")]
    pub project: Option<String>,
    #[arg(long, value_name = "NAME")]
    pub metric: Option<String>,
    /// Only samples of this run id
    #[arg(long, value_name = "RUN")]
    pub run: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Text,
}

#[derive(Debug, Args)]
pub struct Analyze {
    #[arg(long, value_name = "PROJECT")]
    pub project: String,
    /// Write here instead of standard output
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct Dump {
    /// Write here instead of standard output
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Load {
    /// Dump document to read
    pub input: PathBuf,
}
