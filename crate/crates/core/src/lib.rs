//! Core of the smf software-metric pipeline.
//!
//! Two legs feed a shared store:
//!
//! ```text
//! source ──► build ──► metric plugins ──► samples ─┐
//!                                                  ├─► CSV ──► analysis
//! source + tracker ──► versions ──► ref mapping ───┘
//! ```
//!
//! [`registry`] holds project definitions, [`vcs`] and [`trackers`] ingest
//! history and bug data, [`mapper`] joins tracker versions to git refs,
//! [`builder`] drives one version's build lifecycle and invokes the
//! [`runner`] for each metric executable, [`store`] persists everything and
//! exports CSV, and [`analysis`] correlates metric values with bug counts.

pub mod analysis;
pub mod builder;
pub mod clock;
pub mod fixtures;
pub mod kv;
pub mod lock;
pub mod mapper;
pub mod registry;
pub mod runner;
pub mod store;
pub mod trackers;
pub mod vcs;

pub use analysis::{bugs_per_version, correlate_report, spearman, AnalysisError, Report, VersionStat};
pub use builder::{run_lifecycle, BuildError, BuildOutcome, BuildStatus, LifecycleEnv, StageRecord};
pub use clock::{Clock, Timestamp};
pub use mapper::{map_versions, normalize, MatchMethod, RefMapping};
pub use registry::{add_project, validate_project, ProjectRecord, Registry, RegistryError, TrackerKind, Violation};
pub use runner::{
    execute_metric, format_metric_line, parse_metric_output, MetricContext, MetricSample, RunConfig, RunnerError,
    SampleStatus,
};
pub use store::{ExportFilter, RunId, Store, StoreError};
pub use trackers::{fetch_issues, fetch_versions, Issue, TrackerError, TrackerVersion, Transport};
pub use vcs::{Ref, RefKind, Revision, Sha, VcsError};
