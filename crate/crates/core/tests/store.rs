use std::collections::HashSet;
use std::fs;

use chrono::{Duration, TimeZone, Utc};
use smf_core::mapper::{MatchMethod, RefMapping};
use smf_core::registry::{ProjectRecord, TrackerKind};
use smf_core::runner::{MetricSample, RunConfig, SampleStatus};
use smf_core::store::{ExportFilter, ProjectData, Store, StoreError, DUMP_SCHEMA};
use smf_core::trackers::{Issue, TrackerVersion};
use smf_core::vcs::{Ref, RefKind, Sha};
use smf_core::{Clock, Timestamp};
use tempfile::TempDir;

fn t(secs: i64) -> Timestamp {
    Utc.timestamp_opt(1_650_000_000, 0).unwrap() + Duration::milliseconds(secs * 1000 + 250)
}

fn sha(n: u32) -> Sha {
    format!("{n:040x}").parse().unwrap()
}

fn sample(project: &str, sha_n: u32, metric: &str, value: Option<f64>, at: i64) -> MetricSample {
    MetricSample {
        project_key: project.into(),
        sha: sha(sha_n),
        metric_name: metric.into(),
        value,
        script_id: "m.sh".into(),
        status: if value.is_some() {
            SampleStatus::Ok
        } else {
            SampleStatus::ScriptError
        },
        purity_violation: false,
        recorded_at: t(at),
    }
}

fn project_data(key: &str) -> ProjectData {
    let mut project = ProjectRecord::new(
        key,
        format!("/repos/{key}"),
        TrackerKind::Jira,
        "https://j.example/",
        key,
    );
    project.prebuild_script = Some("hooks/pre.sh".into());
    project.extra.push(("owner".into(), "team = a, \"b\"".into()));
    let versions = vec![
        TrackerVersion {
            name: "4.5.1".into(),
            release_date: chrono::NaiveDate::from_ymd_opt(2015, 9, 11),
            released: true,
        },
        TrackerVersion {
            name: "Future".into(),
            release_date: None,
            released: false,
        },
    ];
    let issues = vec![Issue {
        id: format!("{key}-1"),
        summary: "multi\nline, \"quoted\" summary \\ with backslash".into(),
        created: t(0),
        resolved: Some(t(60)),
        status: "Closed".into(),
        affected_versions: vec!["4.5.1".into(), "Future".into()],
        fix_versions: vec!["4.5.2".into()],
    }];
    let mappings = vec![
        RefMapping {
            version_name: "4.5.1".into(),
            git_ref: Some(Ref {
                name: "rel/v4.5.1".into(),
                kind: RefKind::Tag,
                target_sha: sha(1),
            }),
            method: MatchMethod::Normalized,
            score: 1.0,
        },
        RefMapping {
            version_name: "Future".into(),
            git_ref: None,
            method: MatchMethod::Unmatched,
            score: 0.0,
        },
    ];
    ProjectData {
        project,
        issues,
        versions,
        mappings,
    }
}

fn populated(dir: Option<&std::path::Path>) -> Store {
    let mut store = match dir {
        Some(d) => Store::open(d).unwrap(),
        None => Store::in_memory(),
    };
    store.put_project_data(project_data("HC")).unwrap();
    store.put_project_data(project_data("ANT")).unwrap();
    let clock = Clock::Fixed(t(100));
    let run = store.begin_run(RunConfig::default(), &clock).unwrap();
    store.record(&run, sample("HC", 1, "LOC", Some(42.0), 5)).unwrap();
    store.record(&run, sample("HC", 1, "IC-RFC", Some(8690.0), 5)).unwrap();
    store.record(&run, sample("ANT", 2, "LOC", Some(0.1 + 0.2), 6)).unwrap();
    store.record(&run, sample("ANT", 2, "m.sh", None, 6)).unwrap();
    store.close_run(&run).unwrap();
    let open = store
        .begin_run(
            RunConfig {
                no_compile: true,
                sha_filter: Some("3aeb27".into()),
                ..RunConfig::default()
            },
            &clock,
        )
        .unwrap();
    store.record(&open, sample("HC", 1, "LOC", Some(-1e-7), 9)).unwrap();
    store
}

#[test]
fn one_sample_one_row() {
    let mut store = Store::in_memory();
    let run = store.begin_run(RunConfig::default(), &Clock::Fixed(t(0))).unwrap();
    store.record(&run, sample("HC", 1, "LOC", Some(1.0), 0)).unwrap();
    let csv = store.export_csv(&ExportFilter::default()).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn ten_thousand_appends_survive_reopen() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("store");
    {
        let mut store = Store::open(&dir).unwrap();
        let run = store.begin_run(RunConfig::default(), &Clock::Fixed(t(0))).unwrap();
        for i in 0..10_000u32 {
            store
                .record(
                    &run,
                    sample("HC", i % 97, &format!("M{}", i / 97), Some(i as f64), i as i64),
                )
                .unwrap();
        }
        store.close_run(&run).unwrap();
    }
    let store = Store::open_read_only(&dir).unwrap();
    let csv = store.export_csv(&ExportFilter::default()).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 10_000);
    assert_eq!(rows.iter().collect::<HashSet<_>>().len(), 10_000);
}

#[test]
fn closed_run_refuses_more_samples_after_reopen() {
    let tmp = TempDir::new().unwrap();
    let run = {
        let mut store = Store::open(tmp.path()).unwrap();
        let run = store.begin_run(RunConfig::default(), &Clock::Fixed(t(0))).unwrap();
        store.close_run(&run).unwrap();
        run
    };
    let mut store = Store::open(tmp.path()).unwrap();
    assert!(matches!(
        store.record(&run, sample("HC", 1, "LOC", Some(1.0), 0)),
        Err(StoreError::RunClosed(_))
    ));
    assert!(matches!(
        store.record(&smf_core::RunId::new("nope"), sample("HC", 1, "LOC", Some(1.0), 0)),
        Err(StoreError::UnknownRun(_))
    ));
}

#[test]
fn read_only_store_rejects_writes_and_missing_store_is_reported() {
    let tmp = TempDir::new().unwrap();
    assert!(matches!(
        Store::open_read_only(&tmp.path().join("none")),
        Err(StoreError::StoreMissing(_))
    ));
    drop(Store::open(tmp.path()).unwrap());
    let mut store = Store::open_read_only(tmp.path()).unwrap();
    assert!(matches!(
        store.begin_run(RunConfig::default(), &Clock::Fixed(t(0))),
        Err(StoreError::ReadOnly)
    ));
}

#[test]
fn export_sorts_and_renders() {
    let store = populated(None);
    let csv = store.export_csv(&ExportFilter::default()).unwrap();
    let expected = format!(
        "project,sha,version,metric,value,status,recorded_at\n\
         ANT,{s2},,LOC,0.30000000000000004,ok,2022-04-15T05:20:06.250Z\n\
         ANT,{s2},,m.sh,,script_error,2022-04-15T05:20:06.250Z\n\
         HC,{s1},4.5.1,IC-RFC,8690,ok,2022-04-15T05:20:05.250Z\n\
         HC,{s1},4.5.1,LOC,42,ok,2022-04-15T05:20:05.250Z\n\
         HC,{s1},4.5.1,LOC,-0.0000001,ok,2022-04-15T05:20:09.250Z\n",
        s1 = sha(1),
        s2 = sha(2)
    );
    assert_eq!(csv, expected);
}

#[test]
fn export_filters() {
    let store = populated(None);
    let only_hc = store
        .export_csv(&ExportFilter {
            project: Some("HC".into()),
            ..ExportFilter::default()
        })
        .unwrap();
    assert_eq!(only_hc.lines().count(), 4);
    assert!(only_hc.lines().skip(1).all(|l| l.starts_with("HC,")));
    let loc = store
        .export_csv(&ExportFilter {
            metric: Some("LOC".into()),
            ..ExportFilter::default()
        })
        .unwrap();
    assert_eq!(loc.lines().count(), 4);
    let first_run = store.runs().next().unwrap().id.clone();
    let by_run = store
        .export_csv(&ExportFilter {
            run: Some(first_run),
            ..ExportFilter::default()
        })
        .unwrap();
    assert_eq!(by_run.lines().count(), 5);
}

#[test]
fn export_does_not_depend_on_insertion_order() {
    let samples = [
        sample("HC", 3, "LOC", Some(1.0), 3),
        sample("AB", 1, "LOC", Some(2.0), 1),
        sample("HC", 1, "A", Some(3.0), 2),
        sample("HC", 1, "A", Some(4.0), 1),
    ];
    let export = |order: &[usize]| {
        let mut store = Store::in_memory();
        let run = store.begin_run(RunConfig::default(), &Clock::Fixed(t(0))).unwrap();
        for &i in order {
            store.record(&run, samples[i].clone()).unwrap();
        }
        store.export_csv(&ExportFilter::default()).unwrap()
    };
    assert_eq!(export(&[0, 1, 2, 3]), export(&[3, 2, 1, 0]));
    assert_eq!(export(&[0, 1, 2, 3]), export(&[2, 0, 3, 1]));
}

#[test]
fn log_replay_restores_everything() {
    let tmp = TempDir::new().unwrap();
    let before = populated(Some(tmp.path()));
    let dump = before.dump_portable();
    drop(before);
    let after = Store::open(tmp.path()).unwrap();
    assert_eq!(after.dump_portable(), dump);
    assert_eq!(after.project_data("HC").unwrap(), &project_data("HC"));
}

#[test]
fn reingest_replaces_project_data() {
    let tmp = TempDir::new().unwrap();
    {
        let mut store = populated(Some(tmp.path()));
        let mut fresh = project_data("HC");
        fresh.issues.clear();
        store.put_project_data(fresh).unwrap();
    }
    let store = Store::open(tmp.path()).unwrap();
    assert!(store.project_data("HC").unwrap().issues.is_empty());
    assert_eq!(store.project_data("ANT").unwrap().issues.len(), 1);
}

#[test]
fn dump_load_dump_is_a_fixpoint() {
    let store = populated(None);
    let first = store.dump_portable();
    let loaded = Store::load_portable(&first, None).unwrap();
    assert_eq!(loaded.dump_portable(), first);
    assert_eq!(
        loaded.export_csv(&ExportFilter::default()).unwrap(),
        store.export_csv(&ExportFilter::default()).unwrap()
    );
    let value: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(value["schema"], DUMP_SCHEMA);
    assert_eq!(value["runs"].as_array().unwrap().len(), 2);
    assert_eq!(value["runs"][1]["closed"], false);
}

#[test]
fn load_into_a_directory_persists() {
    let tmp = TempDir::new().unwrap();
    let dump = populated(None).dump_portable();
    drop(Store::load_portable(&dump, Some(tmp.path())).unwrap());
    let reopened = Store::open(tmp.path()).unwrap();
    assert_eq!(reopened.dump_portable(), dump);
    // A second load into the now populated store is refused.
    drop(reopened);
    assert!(matches!(
        Store::load_portable(&dump, Some(tmp.path())),
        Err(StoreError::MalformedDump(_))
    ));
}

#[test]
fn broken_dumps_are_rejected() {
    let dump = populated(None).dump_portable();
    let mut value: serde_json::Value = serde_json::from_str(&dump).unwrap();
    value["samples"][0]["run"] = "missing-run".into();
    assert!(matches!(
        Store::load_portable(&value.to_string(), None),
        Err(StoreError::MalformedDump(_))
    ));
    let mut value: serde_json::Value = serde_json::from_str(&dump).unwrap();
    value["issues"][0]["project"] = "ZZZ".into();
    assert!(matches!(
        Store::load_portable(&value.to_string(), None),
        Err(StoreError::MalformedDump(_))
    ));
    let mut value: serde_json::Value = serde_json::from_str(&dump).unwrap();
    value["samples"][0]["value"] = serde_json::Value::Null;
    assert!(matches!(
        Store::load_portable(&value.to_string(), None),
        Err(StoreError::MalformedDump(_))
    ));
    let mut value: serde_json::Value = serde_json::from_str(&dump).unwrap();
    value["schema"] = "smf-dump/2".into();
    assert!(matches!(
        Store::load_portable(&value.to_string(), None),
        Err(StoreError::SchemaVersionMismatch { .. })
    ));
}

#[test]
fn corrupt_log_is_reported() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("records.log"), "[sample:nowhere]\nproject = HC\n").unwrap();
    assert!(matches!(Store::open(tmp.path()), Err(StoreError::Corrupt(_))));
}
