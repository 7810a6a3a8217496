use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use irlv::channel::FeatureVector;
use irlv::geometry::RegionLabel;
use irlv::io::read_dataset_csv;

fn irlv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irlv")).args(args).output().expect("run irlv")
}

fn ok(args: &[&str]) -> Output {
    let o = irlv(args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn rows(p: &Path) -> Vec<FeatureVector> {
    read_dataset_csv(fs::File::open(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ring_config(model: &str, n_points: usize, extra: &str) -> String {
    format!(
        "schema_version = 1\nseed = 5\n[scenario]\nkind = \"ring\"\n[channel]\nsigma_s_db = 0.0\n[model]\n{model}\n[training]\nn_points = {n_points}\n{extra}\n[eval]\nn_test = 2000\n"
    )
}

const NP: &str = "kind = \"np\"\nlikelihood = \"fading\"";

#[test]
fn simulate_is_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "run.toml", &ring_config(NP, 500, ""));
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(&["simulate", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["simulate", "--config", s(&cfg), "--out", s(&b)]);
    for f in ["train.csv", "val.csv", "test.csv", "manifest.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest = fs::read_to_string(a.join("manifest.toml")).unwrap();
    assert!(manifest.contains("hash = "));
    assert!(manifest.contains("n_points = 500"));
    assert_eq!(rows(&a.join("train.csv")).len() + rows(&a.join("val.csv")).len(), 500);
    assert_eq!(rows(&a.join("test.csv")).len(), 4000);
}

#[test]
fn zero_points_fail_before_writing() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "run.toml", &ring_config(NP, 0, ""));
    let out = t.path().join("out");
    let o = irlv(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n_points"));
    assert!(!out.exists());
    let bad = write(t.path(), "bad.toml", &ring_config(NP, 10, "typo = 1"));
    assert_eq!(code(&irlv(&["simulate", "--config", s(&bad), "--out", s(&out)])), 2);
}

#[test]
fn refuses_to_overwrite() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "run.toml", &ring_config(NP, 50, ""));
    let out = t.path().join("out");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    let before = fs::read(out.join("train.csv")).unwrap();
    let o = irlv(&["simulate", "--config", s(&cfg), "--out", s(&out), "--map", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--force"));
    assert_eq!(fs::read(out.join("train.csv")).unwrap(), before);
    ok(&["simulate", "--config", s(&cfg), "--out", s(&out), "--map", "1", "--force"]);
    assert_ne!(fs::read(out.join("train.csv")).unwrap(), before);
}

#[test]
fn ring_label_ratio_matches_area_ratio() {
    let t = tempfile::tempdir().unwrap();
    let n = 5000;
    let cfg = write(t.path(), "run.toml", &ring_config(NP, n, ""));
    let out = t.path().join("out");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    let all: Vec<FeatureVector> = rows(&out.join("train.csv")).into_iter().chain(rows(&out.join("val.csv"))).collect();
    let h0 = all.iter().filter(|r| r.label == Some(RegionLabel::H0)).count() as f64;
    let p = (2.0f64.powi(2) - 0.1f64.powi(2)) / (10.0f64.powi(2) - 0.1f64.powi(2));
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    assert!((h0 / n as f64 - p).abs() < 3.0 * sd, "{} vs {p}", h0 / n as f64);
}

fn residual(report: &str) -> f64 {
    let tail = report.split("solver residual ").nth(1).expect("residual in report");
    tail.split(',').next().unwrap().trim().parse().unwrap()
}

#[test]
fn lssvm_training_reports_residual() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "run.toml", &ring_config("kind = \"lssvm\"", 2000, ""));
    let data = t.path().join("data");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&data)]);
    let m = t.path().join("m");
    ok(&["train", "--config", s(&cfg), "--data", s(&data.join("train.csv")), "--out", s(&m)]);
    let report = fs::read_to_string(m.join("report.txt")).unwrap();
    assert!(residual(&report) <= 1e-8, "{report}");
    let e = t.path().join("e");
    ok(&["evaluate", "--config", s(&cfg), "--model", s(&m.join("model.txt")), "--data", s(&data.join("test.csv")), "--out", s(&e)]);
    assert!(fs::read_to_string(e.join("roc.csv")).unwrap().starts_with("threshold,p_fa,p_md"));
}

#[test]
fn mlp_training_is_reproducible() {
    let t = tempfile::tempdir().unwrap();
    let model = "kind = \"mlp-ce\"\nhidden = [4]\nepochs = 5";
    let cfg = write(t.path(), "run.toml", &ring_config(model, 800, ""));
    let data = t.path().join("data");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&data)]);
    let train = data.join("train.csv");
    ok(&["train", "--config", s(&cfg), "--data", s(&train), "--out", s(&t.path().join("m1"))]);
    ok(&["train", "--config", s(&cfg), "--data", s(&train), "--out", s(&t.path().join("m2"))]);
    let a = fs::read(t.path().join("m1/model.txt")).unwrap();
    assert_eq!(a, fs::read(t.path().join("m2/model.txt")).unwrap());
    assert!(fs::read_to_string(t.path().join("m1/report.txt")).unwrap().contains("loss_trace"));
}

#[test]
fn one_class_kinds_reject_h1_rows() {
    let t = tempfile::tempdir().unwrap();
    let two = write(t.path(), "two.toml", &ring_config(NP, 400, ""));
    let data = t.path().join("data");
    ok(&["simulate", "--config", s(&two), "--out", s(&data)]);
    let oc = write(t.path(), "oc.toml", &ring_config("kind = \"oclssvm\"", 400, ""));
    let train = data.join("train.csv");
    let o = irlv(&["train", "--config", s(&oc), "--data", s(&train), "--out", s(&t.path().join("m"))]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("h1-rows-present"));
    ok(&["train", "--config", s(&oc), "--data", s(&train), "--out", s(&t.path().join("m")), "--drop-h1-rows"]);

    // Simulating for a one-class kind yields H0 rows only.
    let ae = write(t.path(), "ae.toml", &format!("{URBAN}[model]\nkind = \"autoencoder\"\nepochs = 3\n[training]\nn_points = 300\n[eval]\nn_test = 50\n"));
    let h0 = t.path().join("h0");
    ok(&["simulate", "--config", s(&ae), "--out", s(&h0)]);
    assert!(rows(&h0.join("train.csv")).iter().all(|r| r.label == Some(RegionLabel::H0)));
    ok(&["train", "--config", s(&ae), "--data", s(&h0.join("train.csv")), "--out", s(&t.path().join("ae"))]);
}

#[test]
fn calibrated_fa_is_near_target() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "run.toml", &ring_config(NP, 20_000, "").replace("n_test = 2000", "n_test = 5000\ntarget_fa = [0.1]"));
    let data = t.path().join("data");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&data)]);
    let m = t.path().join("m");
    ok(&["train", "--config", s(&cfg), "--data", s(&data.join("train.csv")), "--out", s(&m)]);
    let e = t.path().join("e");
    let val = data.join("val.csv");
    ok(&["evaluate", "--config", s(&cfg), "--model", s(&m.join("model.txt")), "--data", s(&data.join("test.csv")), "--calibration", s(&val), "--out", s(&e)]);
    let n_cal = rows(&val).iter().filter(|r| r.label == Some(RegionLabel::H0)).count();
    let text = fs::read_to_string(e.join("operating.csv")).unwrap();
    let line: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    let p_fa = line[3];
    let sd = (0.09 / n_cal as f64).sqrt() + (0.09f64 / 5000.0).sqrt();
    assert!((p_fa - 0.1).abs() < 3.0 * sd, "p_fa {p_fa} with {n_cal} calibration rows");
}

const URBAN: &str = "schema_version = 1\nseed = 2\n[scenario]\nkind = \"urban\"\naps = [1, 2, 3, 4, 5]\n";

#[test]
fn ingest_round_trip_and_split() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "run.toml", &format!("{URBAN}[model]\nkind = \"lssvm\"\n[training]\nn_points = 300\n[eval]\nn_test = 100\n"));
    let data = t.path().join("data");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&data)]);
    let grid = data.join("test.csv");
    let original = rows(&grid);
    let out = t.path().join("ingested");
    ok(&["ingest", "--grid", s(&grid), "--roi", "50,50,200,200", "--n-train", "150", "--seed", "4", "--out", s(&out)]);
    let (train, test) = (rows(&out.join("train.csv")), rows(&out.join("test.csv")));
    assert_eq!((train.len(), test.len()), (150, 50));
    let mut back: Vec<&FeatureVector> = train.iter().chain(&test).collect();
    back.sort_by(|a, b| a.position.unwrap().x.total_cmp(&b.position.unwrap().x));
    let mut orig: Vec<&FeatureVector> = original.iter().collect();
    orig.sort_by(|a, b| a.position.unwrap().x.total_cmp(&b.position.unwrap().x));
    for (a, b) in orig.iter().zip(&back) {
        assert_eq!(a.position, b.position);
        assert_eq!(a.label, b.label);
        for (x, y) in a.to_db().iter().zip(b.to_db()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn ingest_errors() {
    let t = tempfile::tempdir().unwrap();
    let grid = write(t.path(), "grid.csv", "x,y,ap_1,ap_2\n0,0,70,80\n50,0,71,79\n0,50,72,78\n50,50,73,77\n");
    let o = irlv(&["ingest", "--grid", s(&grid), "--roi", "1000,1000,1100,1100", "--n-train", "2", "--out", s(&t.path().join("a"))]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("empty-class"));
    ok(&["ingest", "--grid", s(&grid), "--roi", "-10,-10,10,10", "--n-train", "2", "--out", s(&t.path().join("b"))]);
    let ragged = write(t.path(), "ragged.csv", "x,y,ap_1,ap_2\n0,0,70,80\n50,0,71\n");
    assert_eq!(code(&irlv(&["ingest", "--grid", s(&ragged), "--roi", "0,0,1,1", "--n-train", "1", "--out", s(&t.path().join("c"))])), 3);
    let nonfinite = write(t.path(), "nan.csv", "x,y,ap_1\n0,0,NaN\n");
    assert_eq!(code(&irlv(&["ingest", "--grid", s(&nonfinite), "--roi", "0,0,1,1", "--n-train", "1", "--out", s(&t.path().join("d"))])), 3);
}

#[test]
fn roc_command_writes_curves() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "run.toml", &ring_config(NP, 200, "").replace("n_test = 2000", "n_test = 500\nn_maps = 2"));
    let out = t.path().join("roc");
    ok(&["roc", "--config", s(&cfg), "--out", s(&out)]);
    for f in ["roc_map000.csv", "roc_map001.csv", "roc_average.csv", "operating.csv", "summary.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
}

#[test]
fn eda_is_dominated_by_lssvm() {
    let t = tempfile::tempdir().unwrap();
    let base = format!("{URBAN}[training]\nn_points = 2000\nfading = false\n[eval]\nn_test = 400\n");
    let svm = write(t.path(), "svm.toml", &format!("{base}[model]\nkind = \"lssvm\"\ntune_bandwidths = [0.5, 1.0, 2.0, 4.0]\n"));
    let eda = write(t.path(), "eda.toml", &format!("{base}[model]\nkind = \"eda\"\n"));
    let data = t.path().join("data");
    ok(&["simulate", "--config", s(&svm), "--out", s(&data)]);
    let auc = |cfg: &Path, name: &str| {
        let m = t.path().join(format!("m-{name}"));
        ok(&["train", "--config", s(cfg), "--data", s(&data.join("train.csv")), "--valid", s(&data.join("val.csv")), "--out", s(&m)]);
        let e = t.path().join(format!("e-{name}"));
        ok(&["evaluate", "--config", s(cfg), "--model", s(&m.join("model.txt")), "--data", s(&data.join("test.csv")), "--out", s(&e)]);
        let manifest = fs::read_to_string(e.join("manifest.toml")).unwrap();
        let tail = manifest.split("AUC ").nth(1).unwrap();
        tail.split('"').next().unwrap().parse::<f64>().unwrap()
    };
    let (a_svm, a_eda) = (auc(&svm, "svm"), auc(&eda, "eda"));
    assert!(a_svm > a_eda, "lssvm {a_svm} vs eda {a_eda}");
}

#[test]
fn quick_figures_run() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("fig11");
    ok(&["--jobs", "1", "reproduce-figure", "fig11", "--quick", "--out", s(&out)]);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(out.join("lssvm.csv").exists() && out.join("mlp-ce.csv").exists());
    let out5 = t.path().join("fig5");
    ok(&["reproduce-figure", "fig5", "--quick", "--out", s(&out5)]);
    assert_eq!(fs::read_to_string(out5.join("summary.csv")).unwrap().lines().count(), 5);
    assert_eq!(code(&irlv(&["reproduce-figure", "fig3", "--out", s(&t.path().join("x"))])), 2);
}
