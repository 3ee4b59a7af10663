//! File-level commands behind the `taxoflat` binary.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;

use crate::bundle::Bundle;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inf::{self, SweepResult, ThresholdScope, ThresholdSpec};
use crate::metrics::{self, EvaluationReport};
use crate::pipeline::{self, Prediction, RunConfig, TrainRun};
use crate::synth::{self, SynthConfig};
use crate::taxonomy::{NodeId, Taxonomy};

pub const PREDICTIONS_FILE: &str = "predictions.txt";
pub const REPORT_FILE: &str = "flattening_report.csv";
pub const SWEEP_FILE: &str = "sweep_curve.csv";

/// Reads a text file, decompressing gzip input (by `.gz` extension or
/// magic bytes).
pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let gz = path.extension().is_some_and(|e| e == "gz") || bytes.starts_with(&[0x1f, 0x8b]);
    if !gz {
        return String::from_utf8(bytes).map_err(|e| Error::parse(0, format!("{}: {e}", path.display())));
    }
    let mut s = String::new();
    MultiGzDecoder::new(&bytes[..])
        .read_to_string(&mut s)
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

pub fn read_taxonomy(path: impl AsRef<Path>) -> Result<Taxonomy> {
    Taxonomy::parse(&read_text(path)?)
}

/// Training data must be nonempty; test data may be empty.
pub fn read_dataset(path: impl AsRef<Path>, allow_empty: bool) -> Result<Dataset> {
    let text = read_text(path)?;
    if allow_empty {
        Dataset::parse_svmlight_lenient(&text, None)
    } else {
        Dataset::parse_svmlight(&text, None)
    }
}

fn write(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for (name, text) in files {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        out.push(p);
    }
    Ok(out)
}

fn thresholds_text(specs: &[ThresholdSpec]) -> String {
    let mut s = String::new();
    for t in specs {
        let scope = match t.scope {
            ThresholdScope::Global => "global".to_string(),
            ThresholdScope::PerLevel(k) => format!("level_{k}"),
        };
        let _ = writeln!(
            s,
            "{scope} mean={} std={} psi={} tau={}",
            t.mean, t.std, t.psi, t.tau
        );
    }
    s
}

/// Trains, then writes the bundle, the flattening report and (when ψ was
/// swept) the sweep curve into `out`.
pub fn cmd_train(cfg: &RunConfig, hierarchy: &Path, train: &Path, out: &Path) -> Result<TrainRun> {
    let tax = read_taxonomy(hierarchy)?;
    let data = read_dataset(train, false)?;
    let mut run = pipeline::run_train(cfg, &tax, &data)?;
    run.meta.insert("hierarchy_path".into(), hierarchy.display().to_string());
    run.meta.insert("train_path".into(), train.display().to_string());
    run.meta.insert("features".into(), "as_given".into());

    let bundle = Bundle::from_run(&run);
    let mut files: Vec<(&str, String)> = bundle.render().into_iter().collect();
    files.push((REPORT_FILE, inf::flattening_report_csv(&run.plan)));
    if let Some(s) = &run.sweep {
        files.push((SWEEP_FILE, inf::sweep_curve_csv(&s.curve)));
    }
    write(out, &files)?;
    Ok(run)
}

/// `leaf<TAB>path`, one line per example; the path is space-separated.
pub fn format_predictions(preds: &[Prediction]) -> String {
    let mut s = String::new();
    for p in preds {
        let path: Vec<String> = p.path.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(s, "{}\t{}", p.leaf, path.join(" "));
    }
    s
}

pub fn parse_predictions(text: &str) -> Result<Vec<Prediction>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let (leaf, path) = l.split_once('\t').unwrap_or((l, ""));
            let leaf: NodeId = leaf
                .trim()
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad leaf id {leaf:?}")))?;
            let path = path
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::parse(i + 1, format!("bad path node {t:?}"))))
                .collect::<Result<Vec<NodeId>>>()?;
            Ok(Prediction {
                leaf,
                path: if path.is_empty() { vec![leaf] } else { path },
            })
        })
        .collect()
}

/// Predictions of a loaded bundle on `data`.
pub fn predict_bundle(bundle: &Bundle, data: &Dataset) -> Result<Vec<Prediction>> {
    let dim = bundle.predictor.dim();
    if let Some(e) = data.examples.iter().find(|e| e.x.max_index() > dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: e.x.max_index(),
        });
    }
    Ok(bundle.predictor.predict_all(data))
}

pub fn cmd_predict(bundle_dir: &Path, test: &Path, out: &Path) -> Result<Vec<Prediction>> {
    let bundle = Bundle::load(bundle_dir)?;
    let data = read_dataset(test, true)?;
    let preds = predict_bundle(&bundle, &data)?;
    let text = format_predictions(&preds);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(out, text).map_err(|e| Error::io(out, e))?;
    Ok(preds)
}

/// Inputs of [`cmd_evaluate`].
#[derive(Debug, Clone)]
pub struct EvaluateArgs<'a> {
    pub predictions: &'a Path,
    pub truth: &'a Path,
    pub hierarchy: &'a Path,
    /// Defaults to `hierarchy`.
    pub eval_hierarchy: Option<&'a Path>,
    /// Taxonomy the decision paths were produced in; defaults to `hierarchy`.
    pub model_hierarchy: Option<&'a Path>,
    pub out: &'a Path,
}

/// Scores predictions against a labelled file. Level-wise errors are
/// reported when the predictions carry top-down decision paths.
pub fn evaluate_predictions(
    preds: &[Prediction],
    truth: &[NodeId],
    eval_tax: &Taxonomy,
    model_tax: &Taxonomy,
) -> Result<EvaluationReport> {
    if preds.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: preds.len(),
        });
    }
    let leaves: Vec<NodeId> = preds.iter().map(|p| p.leaf).collect();
    let paths: Vec<Vec<NodeId>> = preds.iter().map(|p| p.path.clone()).collect();
    let top_down = !paths.is_empty() && paths.iter().all(|p| p.first() == Some(&model_tax.root()));
    let levelwise = if top_down {
        Some((paths.as_slice(), model_tax))
    } else {
        None
    };
    metrics::evaluate(truth, &leaves, eval_tax, levelwise)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<EvaluationReport> {
    let preds = parse_predictions(&read_text(args.predictions)?)?;
    let truth = read_dataset(args.truth, true)?.labels();
    let original = read_taxonomy(args.hierarchy)?;
    let eval_tax = match args.eval_hierarchy {
        Some(p) => read_taxonomy(p)?,
        None => original.clone(),
    };
    let model_tax = match args.model_hierarchy {
        Some(p) => read_taxonomy(p)?,
        None => original,
    };
    let report = evaluate_predictions(&preds, &truth, &eval_tax, &model_tax)?;
    let mut files = vec![
        ("summary.txt", report.summary_text()),
        ("per_class.csv", report.per_class_csv()),
    ];
    if !report.levelwise.is_empty() {
        files.push(("levelwise.csv", report.levelwise_csv()));
    }
    write(args.out, &files)?;
    Ok(report)
}

/// Report-only selection: writes the flattening report, the thresholds and
/// the restructured taxonomy, without retraining.
pub fn cmd_flatten(cfg: &RunConfig, hierarchy: &Path, train: &Path, out: &Path) -> Result<Taxonomy> {
    let tax = read_taxonomy(hierarchy)?;
    let data = read_dataset(train, false)?;
    let (plan, specs, sweep) = pipeline::run_flatten_report(cfg, &tax, &data)?;
    let flat = tax.flatten(&plan)?;
    let mut files = vec![
        (REPORT_FILE, inf::flattening_report_csv(&plan)),
        ("thresholds.txt", thresholds_text(&specs)),
        ("flattened_taxonomy.txt", flat.to_edge_text()),
    ];
    if let Some(s) = sweep {
        files.push((SWEEP_FILE, inf::sweep_curve_csv(&s.curve)));
    }
    write(out, &files)?;
    Ok(flat)
}

pub fn cmd_sweep(cfg: &RunConfig, hierarchy: &Path, train: &Path, out: &Path) -> Result<SweepResult> {
    let tax = read_taxonomy(hierarchy)?;
    let data = read_dataset(train, false)?;
    let s = pipeline::run_sweep(cfg, &tax, &data)?;
    write(out, &[(SWEEP_FILE, inf::sweep_curve_csv(&s.curve))])?;
    Ok(s)
}

/// Writes `hierarchy.txt` (corrupted), `clean_hierarchy.txt`, `train.svm`,
/// `test.svm` and `planted.txt`.
pub fn cmd_synth(cfg: &SynthConfig, out: &Path) -> Result<synth::PlantedData> {
    let d = synth::planted(cfg)?;
    let planted = format!(
        "corrupted_node={}\nmoved_leaf={}\nseed={}\ntrain_per_class={}\ntest_per_class={}\nnoise={}\n",
        d.corrupted_node, d.moved_leaf, cfg.seed, cfg.train_per_class, cfg.test_per_class, cfg.noise
    );
    write(
        out,
        &[
            ("hierarchy.txt", d.taxonomy.to_edge_text()),
            ("clean_hierarchy.txt", d.clean_taxonomy.to_edge_text()),
            ("train.svm", d.train.to_svmlight()),
            ("test.svm", d.test.to_svmlight()),
            ("planted.txt", planted),
        ],
    )?;
    Ok(d)
}
