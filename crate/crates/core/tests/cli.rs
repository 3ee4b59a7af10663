use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;

use taxoflat::bundle::{Bundle, MODELS_FILE};
use taxoflat::cli::{self, EvaluateArgs};
use taxoflat::pipeline::{Method, RunConfig};
use taxoflat::synth::SynthConfig;
use taxoflat::taxonomy::Taxonomy;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_taxoflat"))
}

fn status(args: &[&str]) -> i32 {
    bin().args(args).output().unwrap().status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_synth(dir: &Path) -> taxoflat::synth::PlantedData {
    let cfg = SynthConfig {
        seed: 2,
        train_per_class: 15,
        test_per_class: 5,
        ..SynthConfig::default()
    };
    cli::cmd_synth(&cfg, dir).unwrap()
}

#[test]
fn reloaded_predictions_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("synth");
    let d = small_synth(&s);
    for m in [Method::Tdlr, Method::GlobalInf, Method::FlatLr, Method::Ecoc, Method::Blf] {
        let mut cfg = RunConfig::new(m);
        cfg.c_grid = vec![1.0, 10.0];
        let out = dir.path().join(m.name());
        let run = cli::cmd_train(&cfg, &s.join("hierarchy.txt"), &s.join("train.svm"), &out).unwrap();
        let in_memory = cli::format_predictions(&run.predictor.predict_all(&d.test));
        let pf = dir.path().join(format!("{}.txt", m.name()));
        cli::cmd_predict(&out, &s.join("test.svm"), &pf).unwrap();
        assert_eq!(fs::read_to_string(&pf).unwrap(), in_memory, "{m}");
        if m.is_flat() {
            assert!(in_memory.lines().all(|l| {
                let (leaf, path) = l.split_once('\t').unwrap();
                leaf == path
            }));
        }
    }
}

#[test]
fn tdlr_bundle_has_one_model_per_non_root_node() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    let d = small_synth(&s);
    let out = dir.path().join("m");
    let code = status(&[
        "train",
        "--hierarchy",
        p(&s.join("hierarchy.txt")),
        "--train",
        p(&s.join("train.svm")),
        "--c-grid",
        "1,10",
        "--jobs",
        "2",
        "--out",
        p(&out),
    ]);
    assert_eq!(code, 0);
    let models = fs::read_to_string(out.join(MODELS_FILE)).unwrap();
    let ids: Vec<u32> = models
        .lines()
        .filter(|l| l.starts_with("node "))
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(ids, d.taxonomy.non_root_nodes().collect::<Vec<_>>());
    let meta = fs::read_to_string(out.join("meta.txt")).unwrap();
    for key in ["method=TDLR", "seed=0", "split_ratio=0.9", "c_grid=1,10"] {
        assert!(meta.lines().any(|l| l == key), "{key}");
    }
}

#[test]
fn large_psi_removes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    let d = small_synth(&s);
    let out = dir.path().join("m");
    let mut cfg = RunConfig::new(Method::GlobalInf);
    cfg.psi = Some(10.0);
    cli::cmd_train(&cfg, &s.join("hierarchy.txt"), &s.join("train.svm"), &out).unwrap();
    let report = fs::read_to_string(out.join(cli::REPORT_FILE)).unwrap();
    assert!(report.lines().skip(1).all(|l| l.ends_with(",no")));
    assert_eq!(Bundle::load(&out).unwrap().taxonomy, d.taxonomy);
    assert!(!out.join(cli::SWEEP_FILE).exists());
}

#[test]
fn swept_global_inf_reports_the_planted_node() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    cli::cmd_synth(&SynthConfig::default(), &s).unwrap();
    let out = dir.path().join("m");
    let code = status(&[
        "train",
        "--hierarchy",
        p(&s.join("hierarchy.txt")),
        "--train",
        p(&s.join("train.svm")),
        "--method",
        "GlobalINF",
        "--c-grid",
        "10",
        "--out",
        p(&out),
    ]);
    assert_eq!(code, 0);
    let report = fs::read_to_string(out.join(cli::REPORT_FILE)).unwrap();
    assert!(report.lines().any(|l| l.starts_with("11,") && l.ends_with(",yes")), "{report}");
    let curve = fs::read_to_string(out.join(cli::SWEEP_FILE)).unwrap();
    assert_eq!(curve.lines().count(), 32);
    let bundle = Bundle::load(&out).unwrap();
    assert!(!bundle.taxonomy.contains(11));
}

#[test]
fn flatten_and_sweep_commands() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    small_synth(&s);
    let h = s.join("hierarchy.txt");
    let t = s.join("train.svm");
    let out = dir.path().join("f");
    let args = |cmd: &'static str, method: &'static str, out: &Path| {
        vec![
            cmd.to_string(),
            "--hierarchy".into(),
            p(&h).into(),
            "--train".into(),
            p(&t).into(),
            "--method".into(),
            method.into(),
            "--c-grid".into(),
            "10".into(),
            "--psi-grid".into(),
            "0,0.5,1".into(),
            "--out".into(),
            p(out).into(),
        ]
    };
    let run = |a: Vec<String>| bin().args(a).output().unwrap().status.code().unwrap();
    assert_eq!(run(args("flatten", "LevelINF", &out)), 0);
    for f in [cli::REPORT_FILE, "thresholds.txt", "flattened_taxonomy.txt", cli::SWEEP_FILE] {
        assert!(out.join(f).exists(), "{f}");
    }
    let th = fs::read_to_string(out.join("thresholds.txt")).unwrap();
    assert_eq!(th.lines().count(), 3);
    assert!(th.starts_with("level_1 "));
    let flat = Taxonomy::parse(&fs::read_to_string(out.join("flattened_taxonomy.txt")).unwrap()).unwrap();
    assert_eq!(flat.leaves().len(), 16);

    let out = dir.path().join("sw");
    assert_eq!(run(args("sweep", "GlobalINF", &out)), 0);
    let curve = fs::read_to_string(out.join(cli::SWEEP_FILE)).unwrap();
    assert_eq!(curve.lines().next(), Some("psi,validation_macro_f1"));
    assert_eq!(curve.lines().count(), 4);

    let out = dir.path().join("tlf");
    assert_eq!(run(args("flatten", "TLF", &out)), 0);
    let flat = Taxonomy::parse(&fs::read_to_string(out.join("flattened_taxonomy.txt")).unwrap()).unwrap();
    assert_eq!(flat.depth(), 2);
    assert_eq!(run(args("sweep", "TDLR", &dir.path().join("x"))), 1);
}

#[test]
fn empty_test_file_gives_empty_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    small_synth(&s);
    let out = dir.path().join("m");
    let mut cfg = RunConfig::new(Method::Tdlr);
    cfg.c_grid = vec![1.0];
    cli::cmd_train(&cfg, &s.join("hierarchy.txt"), &s.join("train.svm"), &out).unwrap();
    let empty = dir.path().join("empty.svm");
    fs::write(&empty, "").unwrap();
    let pf = dir.path().join("pred.txt");
    let code = status(&["predict", "--bundle", p(&out), "--test", p(&empty), "--out", p(&pf)]);
    assert_eq!(code, 0);
    assert_eq!(fs::read_to_string(&pf).unwrap(), "");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    small_synth(&s);
    let h = s.join("hierarchy.txt");
    let t = s.join("train.svm");
    assert_eq!(status(&[]), 1);
    assert_eq!(status(&["train", "--hierarchy", p(&h)]), 1);
    assert_eq!(status(&["frobnicate"]), 1);
    assert_eq!(status(&["--help"]), 0);
    // bad method and bad ratio are configuration errors
    let base = ["train", "--hierarchy", p(&h), "--train", p(&t), "--out", p(dir.path())];
    assert_eq!(status(&[&base[..], &["--method", "SVM"]].concat()), 1);
    assert_eq!(status(&[&base[..], &["--split", "1.5"]].concat()), 1);
    assert_eq!(status(&[&base[..], &["--method", "ECOC", "--codeword-bits", "4"]].concat()), 1);
    // unreadable or malformed data
    let missing = dir.path().join("missing.txt");
    assert_eq!(
        status(&["train", "--hierarchy", p(&missing), "--train", p(&t), "--out", p(dir.path())]),
        2
    );
    let cyclic = dir.path().join("cyclic.txt");
    fs::write(&cyclic, "1 2\n2 1\n").unwrap();
    assert_eq!(
        status(&["train", "--hierarchy", p(&cyclic), "--train", p(&t), "--out", p(dir.path())]),
        2
    );
    // a test vector wider than the model
    let out = dir.path().join("m");
    let mut cfg = RunConfig::new(Method::Tdlr);
    cfg.c_grid = vec![1.0];
    cli::cmd_train(&cfg, &h, &t, &out).unwrap();
    let wide = dir.path().join("wide.svm");
    fs::write(&wide, "100 1:0.5 99:1\n").unwrap();
    let pf = dir.path().join("pred.txt");
    assert_eq!(status(&["predict", "--bundle", p(&out), "--test", p(&wide), "--out", p(&pf)]), 2);
    assert!(!pf.exists());
    // a corrupt bundle
    fs::write(out.join(MODELS_FILE), "node 1 C x nnz 0\n\n").unwrap();
    assert_eq!(status(&["predict", "--bundle", p(&out), "--test", p(&t), "--out", p(&pf)]), 2);
}

#[test]
fn gzip_training_data() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    small_synth(&s);
    let gz = dir.path().join("train.svm.gz");
    let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    enc.write_all(&fs::read(s.join("train.svm")).unwrap()).unwrap();
    fs::write(&gz, enc.finish().unwrap()).unwrap();
    let mut cfg = RunConfig::new(Method::Tdlr);
    cfg.c_grid = vec![1.0];
    let a = cli::cmd_train(&cfg, &s.join("hierarchy.txt"), &gz, &dir.path().join("a")).unwrap();
    let b = cli::cmd_train(&cfg, &s.join("hierarchy.txt"), &s.join("train.svm"), &dir.path().join("b")).unwrap();
    assert_eq!(a.predictor, b.predictor);
}

// Four-example metrics case, entirely through files.
#[test]
fn toy_evaluation_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // root 0 → {1, 2}; 1 → {3, 4}; 2 → {5, 6}
    fs::write(d.join("h.txt"), "0 1\n0 2\n1 3\n1 4\n2 5\n2 6\n").unwrap();
    fs::write(d.join("truth.svm"), "3 1:1\n4 1:1\n5 1:1\n6 1:1\n").unwrap();
    fs::write(d.join("pred.txt"), "5\t0 2 5\n3\t0 1 3\n5\t0 2 5\n6\t0 2 6\n").unwrap();
    let out = d.join("eval");
    let code = status(&[
        "evaluate",
        "--predictions",
        p(&d.join("pred.txt")),
        "--test",
        p(&d.join("truth.svm")),
        "--hierarchy",
        p(&d.join("h.txt")),
        "--out",
        p(&out),
    ]);
    assert_eq!(code, 0);

    // independent arithmetic: classes 3,4,5,6 with tp = (0,0,1,1),
    // fp = (1,0,1,0), fn = (1,1,0,0)
    let f1 = |tp: f64, fp: f64, fneg: f64| if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fneg) };
    let macro_f1 = (f1(0.0, 1.0, 1.0) + f1(0.0, 0.0, 1.0) + f1(1.0, 1.0, 0.0) + f1(1.0, 0.0, 0.0)) / 4.0;
    // ancestor overlaps: {3,1}/{5,2} → 0, {4,1}/{3,1} → 1, {5,2} → 2, {6,2} → 2
    let hf1 = 2.0 * 5.0 / (8.0 + 8.0);
    // tree distances 4, 2, 0, 0
    let te = 6.0 / 4.0;
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    let get = |k: &str| -> f64 {
        summary
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{k}=")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert_eq!(get("micro_f1"), 0.5);
    assert!((get("macro_f1") - macro_f1).abs() < 1e-15);
    assert!((get("hf1") - hf1).abs() < 1e-15);
    assert_eq!(get("te"), te);
    // first errors: example 1 at level 1, example 2 at level 2
    let lw = fs::read_to_string(out.join("levelwise.csv")).unwrap();
    let rows: Vec<Vec<f64>> = lw
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows[0], vec![1.0, 0.25, 0.25, 1.0]);
    assert_eq!(rows[1][0], 2.0);
    assert!((rows[1][1] - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!((rows[1][2], rows[1][3]), (0.25, 2.0));

    // misaligned inputs and unknown labels are data errors
    fs::write(d.join("short.txt"), "5\t0 2 5\n").unwrap();
    let args = |pred: &Path| {
        status(&[
            "evaluate",
            "--predictions",
            p(pred),
            "--test",
            p(&d.join("truth.svm")),
            "--hierarchy",
            p(&d.join("h.txt")),
            "--out",
            p(&out),
        ])
    };
    assert_eq!(args(&d.join("short.txt")), 2);
    fs::write(d.join("bad.txt"), "9\t9\n3\t3\n5\t5\n6\t6\n").unwrap();
    assert_eq!(args(&d.join("bad.txt")), 2);

    // a separate evaluation hierarchy changes the hierarchical measures only
    fs::write(d.join("h2.txt"), "0 3\n0 4\n0 5\n0 6\n").unwrap();
    let r = cli::cmd_evaluate(&EvaluateArgs {
        predictions: &d.join("pred.txt"),
        truth: &d.join("truth.svm"),
        hierarchy: &d.join("h.txt"),
        eval_hierarchy: Some(&d.join("h2.txt")),
        model_hierarchy: None,
        out: &d.join("eval2"),
    })
    .unwrap();
    assert_eq!(r.micro_f1, 0.5);
    assert_eq!(r.hf1, 0.5);
    assert_eq!(r.te, 1.0);
}
