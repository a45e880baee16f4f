use std::fs;

use shiftkit::core::data::{RawRun, N_VARS};
use shiftkit::core::Matrix;
use shiftkit::te_csv::{load_te_csv, load_te_dir, write_te_csv, HEADER};
use shiftkit::Error;

fn run(run_id: u32, steps: usize, period: f64) -> RawRun {
    RawRun {
        series: Matrix::from_fn(steps, N_VARS, |t, v| (t as f64 * 0.37 + v as f64).sin() * 1e3 / (v + 1) as f64 + 1.0 / 3.0),
        mode: 2,
        fault_class: 5,
        run_id,
        sample_period_h: period,
    }
}

fn row(v: f64) -> String {
    vec![v.to_string(); N_VARS].join(",")
}

#[test]
fn empty_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.csv");
    fs::write(&p, "").unwrap();
    let loaded = load_te_csv(&p).unwrap();
    assert!(loaded.runs.is_empty());
    assert_eq!(loaded.dropped, 0);
}

#[test]
fn one_complete_run() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("one.csv");
    // 30 h at 6 h per step: 5 steps per window, 10 in total.
    let mut text = format!("{}\n3,1,17,6\n", HEADER.join(","));
    for t in 0..10 {
        text.push_str(&row(t as f64));
        text.push('\n');
    }
    fs::write(&p, text).unwrap();
    let loaded = load_te_csv(&p).unwrap();
    assert_eq!(loaded.runs.len(), 1);
    let r = &loaded.runs[0];
    assert_eq!(r.series.shape(), (10, 34));
    assert_eq!((r.mode, r.fault_class, r.run_id, r.sample_period_h), (3, 1, 17, 6.0));
    assert_eq!(r.series[(7, 33)], 7.0);
}

#[test]
fn round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("rt.csv");
    let runs = vec![run(0, 12, 5.0), run(1, 20, 3.0)];
    write_te_csv(&p, &runs).unwrap();
    let back = load_te_csv(&p).unwrap();
    assert_eq!(back.dropped, 0);
    assert_eq!(back.runs.len(), 2);
    for (a, b) in back.runs.iter().zip(&runs) {
        assert_eq!(a.series.shape(), b.series.shape());
        assert!((&a.series - &b.series).amax() <= 1e-9);
        assert_eq!((a.mode, a.fault_class, a.run_id, a.sample_period_h), (b.mode, b.fault_class, b.run_id, b.sample_period_h));
    }
    let p2 = dir.path().join("rt2.csv");
    write_te_csv(&p2, &back.runs).unwrap();
    assert_eq!(fs::read_to_string(&p).unwrap(), fs::read_to_string(&p2).unwrap());
}

#[test]
fn malformed_row_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    let mut bad = row(1.0);
    bad.replace_range(0..3, "abc");
    let text = format!("{}\n3,1,17,6\n{}\n{}\n", HEADER.join(","), row(0.0), bad);
    fs::write(&p, text).unwrap();
    match load_te_csv(&p) {
        Err(Error::Row { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected a row error, got {other:?}"),
    }

    let text = format!("{}\n3,1,17,6\n1,2,3\n", HEADER.join(","));
    fs::write(&p, text).unwrap();
    assert!(matches!(load_te_csv(&p), Err(Error::Row { line: 3, .. })));
}

#[test]
fn missing_column_is_a_file_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("nohdr.csv");
    fs::write(&p, format!("mode,fault_class,run_id\n3,1,17\n{}\n", row(0.0))).unwrap();
    match load_te_csv(&p) {
        Err(Error::File { msg, .. }) => assert!(msg.contains("sample_period_h"), "{msg}"),
        other => panic!("expected a file error, got {other:?}"),
    }
}

#[test]
fn short_runs_are_dropped_and_counted() {
    let dir = tempfile::tempdir().unwrap();
    let runs = [run(0, 10, 6.0), run(1, 9, 6.0), run(2, 3, 6.0)];
    write_te_csv(&dir.path().join("a.csv"), &runs[..2]).unwrap();
    write_te_csv(&dir.path().join("b.csv"), &runs[2..]).unwrap();
    let loaded = load_te_dir(dir.path()).unwrap();
    assert_eq!(loaded.runs.len(), 1);
    assert_eq!(loaded.runs[0].run_id, 0);
    assert_eq!(loaded.dropped, 2);
}

#[test]
fn wrong_width_is_refused_on_write() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = run(0, 10, 6.0);
    r.series = Matrix::zeros(10, 3);
    assert!(write_te_csv(&dir.path().join("w.csv"), &[r]).is_err());
}
