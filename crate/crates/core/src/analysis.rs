//! Per-version bug counts joined with metric values, and Spearman rank
//! correlation of each metric against the bug count.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::clock::Timestamp;
use crate::runner::{render_value, SampleStatus};
use crate::store::Store;
use crate::trackers::{Issue, TrackerVersion};
use crate::vcs::Sha;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("InsufficientData")]
    InsufficientData,
    #[error("ConstantInput")]
    ConstantInput,
    #[error("NonFiniteInput")]
    NonFiniteInput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VersionStat {
    pub version_name: String,
    pub bug_count: u64,
    pub metric_values: BTreeMap<String, f64>,
}

/// Bugs per version, counted by affected version. Issues naming a version
/// that is not in `versions` are left out; each such name is returned once
/// in the warnings.
pub fn bugs_per_version(issues: &[Issue], versions: &[TrackerVersion]) -> (BTreeMap<String, u64>, Vec<String>) {
    let mut counts: BTreeMap<String, u64> = versions.iter().map(|v| (v.name.clone(), 0)).collect();
    let mut unknown = BTreeSet::new();
    for issue in issues {
        let named: BTreeSet<&str> = issue.affected_versions.iter().map(String::as_str).collect();
        for name in named {
            match counts.get_mut(name) {
                Some(n) => *n += 1,
                None => {
                    unknown.insert(name.to_string());
                }
            }
        }
    }
    let warnings = unknown
        .into_iter()
        .map(|v| format!("issues name unknown version {v:?}"))
        .collect();
    (counts, warnings)
}

/// Ranks starting at 1, ties sharing the mean of the positions they span.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: the Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, AnalysisError> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(AnalysisError::InsufficientData);
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFiniteInput);
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    // Both rank vectors have mean (n+1)/2.
    let mean = (xs.len() as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mean, b - mean);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub metric: String,
    pub n: usize,
    pub rho: Result<f64, AnalysisError>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub project_key: String,
    pub versions: Vec<VersionStat>,
    pub rows: Vec<ReportRow>,
    pub warnings: Vec<String>,
}

impl Report {
    /// `metric,n,rho`; the rho cell holds the reason when there is none.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,n,rho\n");
        for row in &self.rows {
            let rho = match &row.rho {
                Ok(r) => render_value(*r),
                Err(e) => e.to_string(),
            };
            let _ = writeln!(out, "{},{},{}", row.metric, row.n, rho);
        }
        out
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "project {}: {} mapped versions",
            self.project_key,
            self.versions.len()
        )?;
        for v in &self.versions {
            writeln!(
                f,
                "  {:<16} bugs {:>5}  metrics {}",
                v.version_name,
                v.bug_count,
                v.metric_values.len()
            )?;
        }
        if self.rows.is_empty() {
            writeln!(f, "no metrics")?;
        }
        for row in &self.rows {
            match &row.rho {
                Ok(r) => writeln!(f, "{:<24} n={:<4} rho={r:+.4}", row.metric, row.n)?,
                Err(e) => writeln!(f, "{:<24} n={:<4} {e}", row.metric, row.n)?,
            }
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

/// Correlates every metric recorded for `project_key` with bug counts over
/// the project's mapped versions. A version's metric value is the most
/// recent ok sample at the version's commit.
pub fn correlate_report(store: &Store, project_key: &str) -> Report {
    let mut report = Report {
        project_key: project_key.to_string(),
        ..Report::default()
    };
    let Some(data) = store.project_data(project_key) else {
        report
            .warnings
            .push(format!("project {project_key} has not been fetched"));
        return report;
    };
    let (counts, warnings) = bugs_per_version(&data.issues, &data.versions);
    report.warnings = warnings;

    let mut latest: BTreeMap<(&Sha, &str), (Timestamp, f64)> = BTreeMap::new();
    for s in store.samples().filter(|s| s.project_key == project_key) {
        let (SampleStatus::Ok, Some(value)) = (s.status, s.value) else {
            continue;
        };
        let slot = latest
            .entry((&s.sha, s.metric_name.as_str()))
            .or_insert((s.recorded_at, value));
        if s.recorded_at >= slot.0 {
            *slot = (s.recorded_at, value);
        }
    }

    let mut metrics = BTreeSet::new();
    for m in &data.mappings {
        let Some(git_ref) = &m.git_ref else { continue };
        let Some(&bug_count) = counts.get(&m.version_name) else {
            continue;
        };
        let metric_values: BTreeMap<String, f64> = latest
            .range((&git_ref.target_sha, "")..)
            .take_while(|((sha, _), _)| *sha == &git_ref.target_sha)
            .map(|((_, name), (_, v))| (name.to_string(), *v))
            .collect();
        metrics.extend(metric_values.keys().cloned());
        report.versions.push(VersionStat {
            version_name: m.version_name.clone(),
            bug_count,
            metric_values,
        });
    }

    for metric in metrics {
        let (xs, ys): (Vec<f64>, Vec<f64>) = report
            .versions
            .iter()
            .filter_map(|v| v.metric_values.get(&metric).map(|x| (*x, v.bug_count as f64)))
            .unzip();
        report.rows.push(ReportRow {
            n: xs.len(),
            rho: spearman(&xs, &ys),
            metric,
        });
    }
    report
}
