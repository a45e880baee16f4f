use std::collections::BTreeMap;

use shiftkit::config::Protocol;
use shiftkit::report::{accuracy_csv, delta_csv, emit_report, ExperimentReport, Record, ReportFormat, Status};

fn rec(method: &str, s: usize, t: usize, seed: u64, acc: Option<f64>) -> Record {
    Record {
        method: method.into(),
        sources: vec![s],
        target: t,
        seed,
        status: if acc.is_some() { Status::Ok } else { Status::Failed },
        accuracy: acc,
        error: acc.is_none().then(|| "diverged".to_string()),
        diagnostics: BTreeMap::new(),
    }
}

fn grid() -> ExperimentReport {
    let records = vec![
        rec("target_only", 0, 0, 0, Some(0.9)),
        rec("target_only", 0, 0, 1, Some(0.8)),
        rec("target_only", 1, 1, 0, Some(1.0)),
        rec("source_only", 0, 1, 0, Some(0.5)),
        rec("source_only", 0, 1, 1, None),
        rec("source_only", 1, 0, 0, Some(0.75)),
        rec("source_only", 1, 0, 1, Some(0.25)),
        rec("otda", 0, 1, 0, None),
        rec("otda", 0, 1, 1, None),
        rec("otda", 1, 0, 0, Some(0.875)),
    ];
    ExperimentReport::new(Protocol::Pairwise, 0.7, vec![0, 1], vec!["a".into(), "b".into()], records)
}

#[test]
fn empty_report_has_only_a_header() {
    let r = ExperimentReport::new(Protocol::Pairwise, 0.7, vec![0], vec!["a".into(), "b".into()], vec![]);
    assert_eq!(accuracy_csv(&r), "method,source,a,b\n");
    assert_eq!(delta_csv(&r), "method,source,a,b\n");
    assert!(r.summary.is_empty());
}

#[test]
fn two_by_two_fixture() {
    let r = grid();
    let expected = "\
method,source,a,b
target_only,a,0.850000,
target_only,b,,1.000000
source_only,a,,0.500000
source_only,b,0.500000,
otda,a,,failed
otda,b,0.875000,
";
    assert_eq!(accuracy_csv(&r), expected);
    assert_eq!(delta_csv(&r), "method,source,a,b\notda,a,,failed\notda,b,0.375000,\n");
}

#[test]
fn aggregates_skip_failures_but_count_them() {
    let r = grid();
    let so = r.aggregates.iter().find(|a| a.method == "source_only" && a.target == 1).unwrap();
    assert_eq!((so.n_ok, so.n_failed, so.mean, so.std), (1, 1, Some(0.5), Some(0.0)));
    let s = r.summary_for("source_only").unwrap();
    assert_eq!((s.cells, s.n_failed, s.mean), (2, 1, Some(0.5)));
    let otda = r.summary_for("otda").unwrap();
    assert_eq!((otda.cells, otda.n_failed, otda.mean), (2, 2, Some(0.875)));
}

#[test]
fn json_round_trip() {
    let mut r = grid();
    r.records[0].diagnostics.insert("mmd_rbf".into(), 0.125);
    let back = ExperimentReport::from_json(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
    assert_eq!(back.to_json().unwrap(), r.to_json().unwrap());
}

#[test]
fn multi_source_rows_are_labelled_others() {
    let records = vec![Record { sources: vec![1, 2], ..rec("wbt", 0, 0, 0, Some(0.5)) }];
    let r = ExperimentReport::new(Protocol::MultiSource, 0.7, vec![0], vec!["x".into(), "y".into(), "z".into()], records);
    assert_eq!(accuracy_csv(&r), "method,source,x,y,z\nwbt,others,0.500000,,\n");
}

#[test]
fn emit_writes_the_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let r = grid();
    let csv = emit_report(&r, ReportFormat::Csv, dir.path()).unwrap();
    assert_eq!(csv, vec![dir.path().join("accuracy.csv"), dir.path().join("delta.csv")]);
    let json = emit_report(&r, ReportFormat::Json, &dir.path().join("nested")).unwrap();
    let text = std::fs::read_to_string(&json[0]).unwrap();
    assert_eq!(ExperimentReport::from_json(&text).unwrap(), r);
}

#[test]
fn unwritable_path_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    assert!(emit_report(&grid(), ReportFormat::Json, &file.join("sub")).is_err());
}
