//! End-to-end tests of the `optmc` binary: exit codes, output files,
//! format switching and run-to-run determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn optmc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optmc"))
        .args(args)
        .args(["--out-dir", dir.to_str().unwrap()])
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

const QUOTES: &str = "\
contract,underlying,expiration,type,strike,style,bid,bid_size,ask,ask_size,volume,open_interest,quote_date,delta,gamma,theta,vega,implied_volatility
AAA1,AAA,2026-12-18,call,90,american,12.1,10,12.5,12,150,500,2026-08-14,0.71,0.02,-0.04,0.18,0.24
AAA2,AAA,2026-12-18,call,95,american,8.4,14,8.8,9,210,500,2026-08-14,0.62,0.025,-0.045,0.21,0.235
AAA3,AAA,2026-12-18,call,100,american,5.3,22,5.6,18,340,500,2026-08-14,0.51,0.028,-0.05,0.23,0.23
AAA4,AAA,2026-12-18,call,105,american,3.1,18,3.4,20,280,500,2026-08-14,0.4,0.026,-0.048,0.22,0.228
AAA5,AAA,2026-12-18,call,110,american,1.7,25,1.9,24,190,500,2026-08-14,0.29,0.022,-0.042,0.19,0.231
AAA6,AAA,2026-12-18,put,90,american,1.2,16,1.4,15,120,500,2026-08-14,-0.27,0.02,-0.035,0.17,0.25
AAA7,AAA,2026-12-18,put,95,american,2.2,19,2.4,17,180,500,2026-08-14,-0.37,0.024,-0.04,0.2,0.242
AAA8,AAA,2026-12-18,put,100,american,3.9,21,4.2,20,260,500,2026-08-14,-0.49,0.028,-0.046,0.23,0.236
AAA9,AAA,2026-12-18,put,105,american,6.3,15,6.7,13,200,500,2026-08-14,-0.6,0.026,-0.044,0.21,0.233
AAA10,AAA,2026-12-18,put,110,american,9.6,11,10.1,10,140,500,2026-08-14,-0.7,0.021,-0.038,0.18,0.237
AAA11,AAA,2027-03-19,call,95,american,10.2,9,10.7,8,90,500,2026-08-14,0.63,0.02,-0.035,0.27,0.245
AAA12,AAA,2027-03-19,call,105,american,4.9,12,5.3,11,110,500,2026-08-14,0.42,0.022,-0.037,0.29,0.24
AAA13,AAA,2027-03-19,put,95,american,3.4,13,3.7,12,100,500,2026-08-14,-0.36,0.019,-0.031,0.26,0.248
AAA14,AAA,2027-03-19,put,105,american,8.1,10,8.6,9,95,500,2026-08-14,-0.57,0.021,-0.034,0.28,0.243
";

#[test]
fn sweep_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "sweep", "--spots", "90,110", "--vols", "0.3", "--maturities", "0.5",
        "--paths", "600", "--steps", "5",
    ];
    let mut outputs = Vec::new();
    for (name, threads) in [("a.csv", "1"), ("b.csv", "4"), ("c.csv", "8"), ("d.csv", "4")] {
        let status = optmc(
            dir.path(),
            &[&base[..], &["--threads", threads, "--out", name]].concat(),
        );
        assert!(status.status.success(), "{:?}", status);
        outputs.push(read(dir.path(), name));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    assert_eq!(outputs[0], outputs[3]);
    assert!(outputs[0].starts_with("spot,vol,maturity,estimator,price,std_error\n"));
    assert_eq!(outputs[0].lines().count(), 3);
}

#[test]
fn sweep_rejects_invalid_inputs_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_vol = optmc(dir.path(), &["sweep", "--vols", "-0.2"]);
    assert_eq!(bad_vol.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_vol.stderr).contains("vols"));

    let bad_estimator = optmc(dir.path(), &["sweep", "--estimator", "kriging"]);
    assert_eq!(bad_estimator.status.code(), Some(2));

    let conf = dir.path().join("sweep.conf");
    fs::write(&conf, "paths=400\nspline=3\n").unwrap();
    let bad_key = optmc(dir.path(), &["sweep", "--config", conf.to_str().unwrap()]);
    assert_eq!(bad_key.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_key.stderr).contains("spline"));
}

#[test]
fn sweep_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("sweep.conf");
    fs::write(
        &conf,
        "# grid\nestimator=knn\nk=25\nspots=100\nvols=0.3\nmaturities=1\npaths=600\nsteps=4\n",
    )
    .unwrap();
    let out = optmc(
        dir.path(),
        &["sweep", "--config", conf.to_str().unwrap(), "--k", "5"],
    );
    assert!(out.status.success());
    assert!(read(dir.path(), "sweep.csv").contains("knn(k=5)"));
}

#[test]
fn sweep_table_format_writes_aligned_text() {
    let dir = tempfile::tempdir().unwrap();
    let out = optmc(
        dir.path(),
        &[
            "sweep", "--spots", "100", "--vols", "0.3", "--maturities", "1",
            "--paths", "600", "--steps", "4", "--format", "table",
        ],
    );
    assert!(out.status.success());
    let text = read(dir.path(), "sweep.txt");
    assert!(text.starts_with("spot"));
    assert!(!text.lines().next().unwrap().contains(','));
    assert!(text.lines().next().unwrap().contains("  "));
}

#[test]
fn sweep_emit_timing_appends_positive_elapsed() {
    let dir = tempfile::tempdir().unwrap();
    let out = optmc(
        dir.path(),
        &[
            "sweep", "--spots", "100", "--vols", "0.3", "--maturities", "1",
            "--paths", "600", "--steps", "4", "--emit-timing",
        ],
    );
    assert!(out.status.success());
    let text = read(dir.path(), "sweep.csv");
    let mut lines = text.lines();
    assert!(lines.next().unwrap().ends_with(",elapsed_ms"));
    let elapsed: f64 = lines.next().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(elapsed > 0.0, "elapsed_ms {elapsed}");
}

#[test]
fn compare_lists_every_method_with_na_for_lattice_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = optmc(
        dir.path(),
        &["compare", "--paths", "500", "--steps", "4", "--lattice-steps", "200"],
    );
    assert!(out.status.success(), "{out:?}");
    let text = read(dir.path(), "compare.csv");
    let methods: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        methods,
        ["polynomial", "knn", "tree", "forest", "boost", "logistic", "binomial", "european_mc"]
    );
    let binomial_row: Vec<&str> = text
        .lines()
        .find(|l| l.starts_with("binomial"))
        .unwrap()
        .split(',')
        .collect();
    assert_eq!(binomial_row[2], "NA");
}

#[test]
fn metrics_writes_report_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("preds.csv");
    fs::write(
        &data,
        "score,label\n0.9,1\n0.8,1\n0.7,0\n0.4,1\n0.3,0\n0.2,0\n",
    )
    .unwrap();
    let out = optmc(dir.path(), &["metrics", data.to_str().unwrap()]);
    assert!(out.status.success());
    let report = read(dir.path(), "metrics_report.csv");
    assert!(report.starts_with("threshold,accuracy,precision,recall,f1,roc_auc,pr_auc\n"));
    assert!(read(dir.path(), "roc_curve.csv").starts_with("fpr,tpr\n"));
    assert!(read(dir.path(), "pr_curve.csv").starts_with("recall,precision\n"));
}

#[test]
fn metrics_single_class_reports_na_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("preds.csv");
    fs::write(&data, "score,label\n0.9,1\n0.8,1\n0.7,1\n").unwrap();
    let out = optmc(dir.path(), &["metrics", data.to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    let report = read(dir.path(), "metrics_report.csv");
    let fields: Vec<&str> = report.lines().nth(1).unwrap().split(',').collect();
    // Without a negative example the ROC sweep is undefined; the PR curve
    // still exists (constant precision 1).
    assert_eq!(fields[5], "NA", "{report}");
    assert_eq!(fields[6], "1", "{report}");
}

#[test]
fn metrics_missing_column_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("preds.csv");
    fs::write(&data, "proba,label\n0.9,1\n0.2,0\n").unwrap();
    let out = optmc(dir.path(), &["metrics", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("score"));
}

#[test]
fn correlate_marks_constant_columns_na() {
    let dir = tempfile::tempdir().unwrap();
    let quotes = dir.path().join("quotes.csv");
    fs::write(&quotes, QUOTES).unwrap();
    let out = optmc(
        dir.path(),
        &["correlate", quotes.to_str().unwrap(), "--columns", "bid,ask,open_interest"],
    );
    assert!(out.status.success(), "{out:?}");
    let matrix = read(dir.path(), "correlation.csv");
    assert!(matrix.starts_with("column,bid,ask,open_interest\n"));
    // open_interest is constant in the fixture, so its correlations are
    // undefined while the diagonal convention elsewhere stays 1.
    assert!(matrix.lines().nth(3).unwrap().contains("NA"));
    assert!(matrix.lines().nth(1).unwrap().starts_with("bid,1,"));
}

#[test]
fn correlate_unknown_column_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let quotes = dir.path().join("quotes.csv");
    fs::write(&quotes, QUOTES).unwrap();
    let out = optmc(
        dir.path(),
        &["correlate", quotes.to_str().unwrap(), "--columns", "bid,midprice"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_writes_history_model_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let quotes = dir.path().join("quotes.csv");
    fs::write(&quotes, QUOTES).unwrap();
    let out = optmc(
        dir.path(),
        &[
            "train", quotes.to_str().unwrap(), "--epochs", "3", "--hidden", "4",
            "--batch-size", "8", "--cell", "gru",
        ],
    );
    assert!(out.status.success(), "{out:?}");
    let history = read(dir.path(), "history_gru.csv");
    assert!(history.starts_with("epoch,train_mse,val_mse\n"));
    assert_eq!(history.lines().count(), 4);
    assert!(read(dir.path(), "model_gru.txt").contains("cell gru"));
    let metrics = read(dir.path(), "train_metrics.csv");
    assert!(metrics.starts_with("cell,target,epochs,n_train,n_val,"));
    assert!(metrics.lines().nth(1).unwrap().starts_with("gru,bid,3,"));
}

#[test]
fn train_zero_epochs_yields_header_only_history() {
    let dir = tempfile::tempdir().unwrap();
    let quotes = dir.path().join("quotes.csv");
    fs::write(&quotes, QUOTES).unwrap();
    let out = optmc(
        dir.path(),
        &["train", quotes.to_str().unwrap(), "--epochs", "0", "--hidden", "3"],
    );
    assert!(out.status.success(), "{out:?}");
    assert_eq!(read(dir.path(), "history_gru.csv"), "epoch,train_mse,val_mse\n");
}

#[test]
fn train_rejects_unknown_target_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let quotes = dir.path().join("quotes.csv");
    fs::write(&quotes, QUOTES).unwrap();
    let out = optmc(
        dir.path(),
        &["train", quotes.to_str().unwrap(), "--target", "midprice"],
    );
    assert_eq!(out.status.code(), Some(2));
}
