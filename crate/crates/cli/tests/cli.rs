use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use skullnet::data::{LABEL_NAMES, N_LABELS};
use skullnet::metrics::report_keys;
use skullnet::{Architecture, ModelParams32, Rng};
use skullnet_cli::knn_file::load_knn;
use skullnet_cli::model_file::save_model;

fn skullnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skullnet"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn random_model(dir: &Path) -> PathBuf {
    let path = dir.join("model.skn");
    let model = ModelParams32::build(&Architecture::skullnet(), 0.01, &mut Rng::new(11)).unwrap();
    save_model(&path, &model).unwrap();
    path
}

fn synth(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let out = dir.join(format!("data_{n}_{seed}"));
    let o = skullnet(&["synth", "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn synth_writes_images_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), 10, 1);
    let pngs = fs::read_dir(&a)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png"))
        .count();
    assert_eq!(pngs, 10);
    let b = dir.path().join("again");
    assert_eq!(code(&skullnet(&["synth", "--n", "10", "--seed", "1", "--out", s(&b)])), 0);
    assert_eq!(fs::read(a.join("labels.csv")).unwrap(), fs::read(b.join("labels.csv")).unwrap());
}

#[test]
fn argument_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = skullnet(&["synth", "--n", "0", "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--n"));
    assert_eq!(code(&skullnet(&["synth", "--bogus"])), 2);
    assert_eq!(code(&skullnet(&[])), 2);
    assert_eq!(code(&skullnet(&["--help"])), 0);
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_skullnet"))
            .args(["synth", "--n", "2", "--out", s(&dir.path().join(v))])
            .env("SKULLNET_THREADS", v)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("1")), 0);
    assert_eq!(code(&run("0")), 0);
    assert_eq!(code(&run("many")), 2);
}

#[test]
fn train_writes_history_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 10, 2);
    let cfg = dir.path().join("train.cfg");
    fs::write(&cfg, "epochs=5\nbatch_size=4\nearly_stop_patience=none\n").unwrap();
    let mut histories = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("m{run}.skn"));
        let o = skullnet(&["train", "--data", s(&data), "--config", s(&cfg), "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let history = fs::read_to_string(dir.path().join(format!("m{run}.history.csv"))).unwrap();
        let lines: Vec<&str> = history.lines().collect();
        assert_eq!(lines[0], "epoch,train_loss,val_loss");
        assert_eq!(lines.len(), 6);
        assert!(dir.path().join(format!("m{run}.split.csv")).exists());
        histories.push(history);
    }
    assert_eq!(histories[0], histories[1]);
    assert_eq!(
        fs::read(dir.path().join("m0.skn")).unwrap(),
        fs::read(dir.path().join("m1.skn")).unwrap()
    );
}

#[test]
fn train_failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 6, 3);
    let out = dir.path().join("m.skn");
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "epochs=two\n").unwrap();
    assert_eq!(code(&skullnet(&["train", "--data", s(&data), "--config", s(&bad), "--out", s(&out)])), 2);
    let missing = dir.path().join("nowhere");
    assert_eq!(code(&skullnet(&["train", "--data", s(&missing), "--out", s(&out)])), 3);

    let wild = dir.path().join("wild.cfg");
    fs::write(&wild, "epochs=3\noptimizer=sgd\nlearning_rate=1e30\nbatch_size=2\n").unwrap();
    let o = skullnet(&["train", "--data", s(&data), "--config", s(&wild), "--out", s(&out)]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn extract_fit_predict_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 10, 4);
    let model = random_model(dir.path());
    let feats = dir.path().join("f.csv");

    let o = skullnet(&["extract", "--model", s(&model), "--data", s(&data), "--out", s(&feats)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&feats).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 11);
    assert!(lines.iter().all(|l| l.split(',').count() == 36865));

    let again = dir.path().join("g.csv");
    assert_eq!(code(&skullnet(&["extract", "--model", s(&model), "--data", s(&data), "--out", s(&again)])), 0);
    assert_eq!(text, fs::read_to_string(&again).unwrap());

    let knn = dir.path().join("k.skk");
    let labels = data.join("labels.csv");
    let o = skullnet(&["fit-knn", "--features", s(&feats), "--labels", s(&labels), "--out", s(&knn)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(load_knn(&knn).unwrap().config.k, 3);

    let image = data.join("synth_00003.png");
    let o = skullnet(&["predict", "--model", s(&model), "--knn", s(&knn), "--image", s(&image)]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = stdout.lines().map(|l| l.split(' ').collect()).collect();
    assert_eq!(rows.len(), N_LABELS);
    for (row, name) in rows.iter().zip(LABEL_NAMES) {
        assert_eq!(row[0], name);
        assert!(row[1] == "0" || row[1] == "1");
        assert_eq!(row[2].split('.').nth(1).unwrap().len(), 6);
        let c: f64 = row[2].parse().unwrap();
        assert!(c > 0.0 && c < 1.0);
    }
    let o2 = skullnet(&["predict", "--model", s(&model), "--knn", s(&knn), "--image", s(&image)]);
    assert_eq!(stdout, String::from_utf8(o2.stdout).unwrap());

    let missing = data.join("nope.png");
    assert_eq!(code(&skullnet(&["predict", "--model", s(&model), "--knn", s(&knn), "--image", s(&missing)])), 3);

    let report = dir.path().join("report");
    let o = skullnet(&[
        "evaluate", "--model", s(&model), "--knn", s(&knn), "--data", s(&data), "--report-dir", s(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let keys: Vec<String> = fs::read_to_string(report.join("report.txt"))
        .unwrap()
        .lines()
        .map(|l| l.split_once('=').unwrap().0.to_string())
        .collect();
    assert_eq!(keys, report_keys(&LABEL_NAMES));

    for file in ["roc.csv", "pr.csv"] {
        let text = fs::read_to_string(report.join(file)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("label,threshold,x,y"));
        let mut last: Option<(String, f64)> = None;
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f.len(), 4);
            let x: f64 = f[2].parse().unwrap();
            let _: f64 = f[3].parse().unwrap();
            if let Some((label, prev)) = &last {
                if label == f[0] {
                    assert!(x >= *prev, "{file}: {line}");
                }
            }
            last = Some((f[0].to_string(), x));
        }
    }
    let confusion = fs::read_to_string(report.join("confusion.csv")).unwrap();
    assert_eq!(confusion.lines().next(), Some("label,tp,fp,tn,fn"));
    assert_eq!(confusion.lines().count(), 1 + N_LABELS);
}

#[test]
fn evaluate_memorized_training_set_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 30, 5);
    let model = random_model(dir.path());
    let feats = dir.path().join("f.csv");
    let knn = dir.path().join("k.skk");
    assert_eq!(code(&skullnet(&["extract", "--model", s(&model), "--data", s(&data), "--out", s(&feats)])), 0);
    let labels = data.join("labels.csv");
    assert_eq!(
        code(&skullnet(&["fit-knn", "--features", s(&feats), "--labels", s(&labels), "--k", "1", "--out", s(&knn)])),
        0
    );
    let report = dir.path().join("r");
    let o = skullnet(&[
        "evaluate", "--model", s(&model), "--knn", s(&knn), "--data", s(&data), "--report-dir", s(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(report.join("report.txt")).unwrap();
    assert!(text.lines().any(|l| l == "subset_accuracy=1.000000"), "{text}");
}

#[test]
fn degenerate_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let model = random_model(dir.path());
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = dir.path().join("f.csv");
    assert_eq!(code(&skullnet(&["extract", "--model", s(&model), "--data", s(&empty), "--out", s(&out)])), 2);

    // three rows cannot support k = 3
    let data = synth(dir.path(), 3, 6);
    assert_eq!(code(&skullnet(&["extract", "--model", s(&model), "--data", s(&data), "--out", s(&out)])), 0);
    let knn = dir.path().join("k.skk");
    let labels = data.join("labels.csv");
    assert_eq!(
        code(&skullnet(&["fit-knn", "--features", s(&out), "--labels", s(&labels), "--out", s(&knn)])),
        2
    );

    let corrupt = dir.path().join("corrupt.skn");
    let mut bytes = fs::read(&model).unwrap();
    bytes[100] ^= 0xff;
    fs::write(&corrupt, bytes).unwrap();
    assert_eq!(code(&skullnet(&["extract", "--model", s(&corrupt), "--data", s(&data), "--out", s(&out)])), 3);
}
