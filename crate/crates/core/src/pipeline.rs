//! End-to-end training runs: split, optional restructuring, retraining, and
//! prediction dispatch for every supported method.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::data::{split_train_validation, Dataset, SparseVector};
use crate::ecoc::{self, CodeBook, EcocModel};
use crate::error::{Error, Result};
use crate::inf::{self, SweepResult, ThresholdSpec};
use crate::linreg::{TrainConfig, WeightVector};
use crate::metrics;
use crate::taxonomy::{FlattenMethod, FlatteningPlan, NodeId, Taxonomy};
use crate::topdown::{self, HierModel, HierTrainOptions, DEFAULT_C_GRID};

/// Weights smaller than this in magnitude are dropped from final models.
pub const PRUNE_BELOW: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Tdlr,
    Tlf,
    Blf,
    Mlf,
    LevelInf,
    GlobalInf,
    FlatLr,
    Ecoc,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Tdlr,
        Method::Tlf,
        Method::Blf,
        Method::Mlf,
        Method::LevelInf,
        Method::GlobalInf,
        Method::FlatLr,
        Method::Ecoc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tdlr => "TDLR",
            Method::Tlf => "TLF",
            Method::Blf => "BLF",
            Method::Mlf => "MLF",
            Method::LevelInf => "LevelINF",
            Method::GlobalInf => "GlobalINF",
            Method::FlatLr => "FlatLR",
            Method::Ecoc => "ECOC",
        }
    }

    pub fn is_inf(self) -> bool {
        matches!(self, Method::LevelInf | Method::GlobalInf)
    }

    /// Flat methods ignore the hierarchy at prediction time.
    pub fn is_flat(self) -> bool {
        matches!(self, Method::FlatLr | Method::Ecoc)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub method: Method,
    pub c_grid: Vec<f64>,
    /// Fixed ψ for INF methods; when absent the grid is swept.
    pub psi: Option<f64>,
    pub psi_grid: Vec<f64>,
    pub seed: u64,
    pub split_ratio: f64,
    pub jobs: Option<usize>,
    pub codeword_bits: Option<usize>,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl RunConfig {
    pub fn new(method: Method) -> Self {
        let base = TrainConfig::default();
        RunConfig {
            method,
            c_grid: DEFAULT_C_GRID.to_vec(),
            psi: None,
            psi_grid: inf::default_psi_grid(),
            seed: 0,
            split_ratio: 0.9,
            jobs: None,
            codeword_bits: if method == Method::Ecoc { Some(64) } else { None },
            grad_tol: base.grad_tol,
            max_iter: base.max_iter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_grid.is_empty() || self.c_grid.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Config("C grid must be nonempty and positive".into()));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::InvalidRatio(self.split_ratio));
        }
        if self.method.is_inf() {
            if let Some(p) = self.psi {
                if p.is_nan() || p < 0.0 {
                    return Err(Error::Config(format!("psi must be nonnegative, got {p}")));
                }
            } else if self.psi_grid.is_empty() || self.psi_grid.iter().any(|p| p.is_nan() || *p < 0.0) {
                return Err(Error::Config("psi grid must be nonempty and nonnegative".into()));
            }
        }
        if self.method == Method::Ecoc {
            match self.codeword_bits {
                Some(b) if (ecoc::MIN_BITS..=ecoc::MAX_BITS).contains(&b) => {}
                Some(b) => {
                    return Err(Error::Config(format!(
                        "codeword length {b} outside {}..={}",
                        ecoc::MIN_BITS,
                        ecoc::MAX_BITS
                    )))
                }
                None => return Err(Error::Config("ECOC needs a codeword length".into())),
            }
        }
        Ok(())
    }

    fn hier_options(&self, refit: bool) -> HierTrainOptions {
        HierTrainOptions {
            c_grid: self.c_grid.clone(),
            grad_tol: self.grad_tol,
            max_iter: self.max_iter,
            refit,
            jobs: self.jobs,
        }
    }

    /// `key=value` pairs describing the configuration.
    pub fn describe(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("method".into(), self.method.name().into());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("split_ratio".into(), self.split_ratio.to_string());
        m.insert("c_grid".into(), join(&self.c_grid));
        m.insert("c_selection".into(), "binary_f1_on_validation".into());
        m.insert("grad_tol".into(), self.grad_tol.to_string());
        m.insert("max_iter".into(), self.max_iter.to_string());
        if self.method.is_inf() {
            match self.psi {
                Some(p) => m.insert("psi_fixed".into(), p.to_string()),
                None => m.insert("psi_grid".into(), join(&self.psi_grid)),
            };
            m.insert("psi_selection".into(), "validation_macro_f1".into());
        }
        if let Some(b) = self.codeword_bits.filter(|_| self.method == Method::Ecoc) {
            m.insert("codeword_bits".into(), b.to_string());
        }
        m
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// A trained predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    /// Top-down descent over a (possibly restructured) hierarchy.
    TopDown(HierModel),
    /// One-vs-rest over leaves; the model's taxonomy is root → leaves.
    Flat(HierModel),
    Ecoc {
        model: EcocModel,
        book: CodeBook,
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub leaf: NodeId,
    /// Decision path from the root for top-down models; just the leaf for
    /// flat ones.
    pub path: Vec<NodeId>,
}

impl Predictor {
    pub fn dim(&self) -> usize {
        match self {
            Predictor::TopDown(h) | Predictor::Flat(h) => h.dim,
            Predictor::Ecoc { dim, .. } => *dim,
        }
    }

    pub fn predict(&self, x: &SparseVector) -> Prediction {
        match self {
            Predictor::TopDown(h) => {
                let path = h.predict_path(x);
                Prediction {
                    leaf: *path.last().expect("path holds the root"),
                    path,
                }
            }
            Predictor::Flat(h) => {
                // every leaf of a trained hierarchy has a model
                let leaf = topdown::predict_flat(&h.leaf_models(), x).expect("leaf models");
                Prediction { leaf, path: vec![leaf] }
            }
            Predictor::Ecoc { model, book, .. } => {
                let leaf = ecoc::ecoc_predict(model, book, x);
                Prediction { leaf, path: vec![leaf] }
            }
        }
    }

    pub fn predict_all(&self, ds: &Dataset) -> Vec<Prediction> {
        ds.examples.iter().map(|e| self.predict(&e.x)).collect()
    }

    /// Sets weights with magnitude below [`PRUNE_BELOW`] to zero, so that
    /// in-memory and persisted models score identically.
    pub fn prune(&mut self) {
        let prune = |w: &mut WeightVector| {
            for v in w.0.iter_mut() {
                if v.abs() < PRUNE_BELOW {
                    *v = 0.0;
                }
            }
        };
        match self {
            Predictor::TopDown(h) | Predictor::Flat(h) => {
                h.models.values_mut().for_each(|m| prune(&mut m.weights))
            }
            Predictor::Ecoc { model, .. } => model.bit_models.iter_mut().for_each(prune),
        }
    }
}

/// Everything a training run decided.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub config: RunConfig,
    pub original: Taxonomy,
    pub predictor: Predictor,
    /// Taxonomy the predictor uses.
    pub taxonomy: Taxonomy,
    pub plan: FlatteningPlan,
    pub thresholds: Vec<ThresholdSpec>,
    pub sweep: Option<SweepResult>,
    pub psi: Option<f64>,
    pub meta: BTreeMap<String, String>,
}

/// Macro F1 over the leaves of `tax`.
fn validation_macro_f1(p: &Predictor, valid: &Dataset, tax: &Taxonomy) -> Result<f64> {
    let pred: Vec<NodeId> = p.predict_all(valid).into_iter().map(|p| p.leaf).collect();
    metrics::macro_f1(&valid.labels(), &pred, tax.leaves())
}

/// Base model for INF selection: train-only fits with f* attached.
pub fn inf_base_model(
    cfg: &RunConfig,
    tax: &Taxonomy,
    train: &Dataset,
    valid: &Dataset,
) -> Result<HierModel> {
    let mut base = topdown::train_hierarchy(tax, train, valid, &cfg.hier_options(false))?;
    inf::compute_fstars(&mut base, valid)?;
    Ok(base)
}

/// Removal plan for an INF method at one ψ (shared by every level for
/// Level-INF).
pub fn inf_plan(
    method: Method,
    base: &HierModel,
    psi: f64,
) -> Result<(FlatteningPlan, Vec<ThresholdSpec>)> {
    match method {
        Method::GlobalInf => inf::select_global_inf(base, psi).map(|(p, s)| (p, vec![s])),
        Method::LevelInf => inf::select_level_inf(base, &inf::uniform_psi(&base.taxonomy, psi)),
        m => Err(Error::Config(format!("{m} does not select nodes by threshold"))),
    }
}

/// Validation macro F1 per ψ. Grid points that remove the same node set
/// share one retrained model.
pub fn sweep(
    cfg: &RunConfig,
    base: &HierModel,
    train: &Dataset,
    valid: &Dataset,
) -> Result<SweepResult> {
    let tax = &base.taxonomy;
    let mut seen: HashMap<BTreeSet<NodeId>, f64> = HashMap::new();
    inf::sweep_psi(&cfg.psi_grid, |psi| {
        let (plan, _) = inf_plan(cfg.method, base, psi)?;
        if let Some(&s) = seen.get(&plan.removed) {
            return Ok(s);
        }
        let s = if plan.is_empty() {
            validation_macro_f1(&Predictor::TopDown(base.clone()), valid, tax)?
        } else {
            let flat = tax.flatten(&plan)?;
            let hm = topdown::train_hierarchy(&flat, train, valid, &cfg.hier_options(false))?;
            validation_macro_f1(&Predictor::TopDown(hm), valid, tax)?
        };
        seen.insert(plan.removed, s);
        Ok(s)
    })
}

fn train_ecoc(
    cfg: &RunConfig,
    tax: &Taxonomy,
    train: &Dataset,
    valid: &Dataset,
    meta: &mut BTreeMap<String, String>,
) -> Result<Predictor> {
    let bits = cfg
        .codeword_bits
        .ok_or_else(|| Error::Config("ECOC needs a codeword length".into()))?;
    let book = CodeBook::random(tax.leaves(), bits, cfg.seed)?;
    let dim = train.dim.max(valid.dim);
    let train = Dataset::new(train.examples.clone(), dim);
    let mut grid = cfg.c_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut best: Option<(f64, f64)> = None;
    for &c in &grid {
        let tc = TrainConfig {
            c,
            grad_tol: cfg.grad_tol,
            max_iter: cfg.max_iter,
        };
        let model = ecoc::ecoc_train(&train, &book, &tc, cfg.jobs)?;
        let p = Predictor::Ecoc { model, book: book.clone(), dim };
        let s = validation_macro_f1(&p, valid, tax)?;
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((c, s));
        }
    }
    let (c, _) = best.expect("grid is nonempty");
    meta.insert("ecoc_c".into(), c.to_string());
    let tc = TrainConfig {
        c,
        grad_tol: cfg.grad_tol,
        max_iter: cfg.max_iter,
    };
    let model = ecoc::ecoc_train(&train.concat(valid), &book, &tc, cfg.jobs)?;
    Ok(Predictor::Ecoc { model, book, dim })
}

/// Runs the full training protocol for `cfg.method` on `data`.
///
/// `data` is split into train and validation; validation picks per-node C
/// (and ψ for INF methods), and final models are refit on all of `data`.
pub fn run_train(cfg: &RunConfig, tax: &Taxonomy, data: &Dataset) -> Result<TrainRun> {
    cfg.validate()?;
    topdown::check_labels(tax, data)?;
    let (train, valid) = split_train_validation(data, cfg.split_ratio, cfg.seed)?;
    let mut meta = cfg.describe();
    let mut thresholds = Vec::new();
    let mut sweep_result = None;
    let mut psi = None;

    let plan = match cfg.method {
        Method::Tdlr | Method::FlatLr | Method::Ecoc => FlatteningPlan::new(FlattenMethod::Manual, []),
        Method::Tlf => tax.tlf_plan()?,
        Method::Blf => tax.blf_plan()?,
        Method::Mlf => tax.mlf_plan()?,
        Method::LevelInf | Method::GlobalInf => {
            let base = inf_base_model(cfg, tax, &train, &valid)?;
            let chosen = match cfg.psi {
                Some(p) => p,
                None => {
                    let s = sweep(cfg, &base, &train, &valid)?;
                    let p = s.best_psi;
                    meta.insert("psi_validation_macro_f1".into(), s.best_score.to_string());
                    sweep_result = Some(s);
                    p
                }
            };
            psi = Some(chosen);
            meta.insert("psi".into(), chosen.to_string());
            let (plan, specs) = inf_plan(cfg.method, &base, chosen)?;
            thresholds = specs;
            plan
        }
    };

    let model_tax = match cfg.method {
        Method::FlatLr | Method::Ecoc => topdown::flat_taxonomy(tax)?,
        _ => tax.flatten(&plan)?,
    };
    let mut predictor = match cfg.method {
        Method::Ecoc => train_ecoc(cfg, tax, &train, &valid, &mut meta)?,
        Method::FlatLr => Predictor::Flat(topdown::train_hierarchy(
            &model_tax,
            &train,
            &valid,
            &cfg.hier_options(true),
        )?),
        _ => Predictor::TopDown(topdown::train_hierarchy(
            &model_tax,
            &train,
            &valid,
            &cfg.hier_options(true),
        )?),
    };
    predictor.prune();

    meta.insert("dim".into(), predictor.dim().to_string());
    meta.insert("train_examples".into(), train.len().to_string());
    meta.insert("validation_examples".into(), valid.len().to_string());
    meta.insert(
        "removed_nodes".into(),
        plan.removed.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
    );
    for t in &thresholds {
        let key = match t.scope {
            inf::ThresholdScope::Global => "tau".to_string(),
            inf::ThresholdScope::PerLevel(k) => format!("tau_level_{k}"),
        };
        meta.insert(key, t.tau.to_string());
    }
    Ok(TrainRun {
        config: cfg.clone(),
        original: tax.clone(),
        predictor,
        taxonomy: model_tax,
        plan,
        thresholds,
        sweep: sweep_result,
        psi,
        meta,
    })
}

/// Selection only: trains the base model, computes f*, and returns the
/// removal plan at `cfg.psi` (or the swept ψ) without retraining.
pub fn run_flatten_report(
    cfg: &RunConfig,
    tax: &Taxonomy,
    data: &Dataset,
) -> Result<(FlatteningPlan, Vec<ThresholdSpec>, Option<SweepResult>)> {
    cfg.validate()?;
    match cfg.method {
        Method::Tlf => return Ok((tax.tlf_plan()?, Vec::new(), None)),
        Method::Blf => return Ok((tax.blf_plan()?, Vec::new(), None)),
        Method::Mlf => return Ok((tax.mlf_plan()?, Vec::new(), None)),
        m if !m.is_inf() => {
            return Err(Error::Config(format!("{m} does not restructure the hierarchy")))
        }
        _ => {}
    }
    let (train, valid) = split_train_validation(data, cfg.split_ratio, cfg.seed)?;
    let base = inf_base_model(cfg, tax, &train, &valid)?;
    let (psi, s) = match cfg.psi {
        Some(p) => (p, None),
        None => {
            let s = sweep(cfg, &base, &train, &valid)?;
            (s.best_psi, Some(s))
        }
    };
    let (plan, specs) = inf_plan(cfg.method, &base, psi)?;
    Ok((plan, specs, s))
}

/// ψ sweep only, for plotting validation macro F1 against ψ.
pub fn run_sweep(cfg: &RunConfig, tax: &Taxonomy, data: &Dataset) -> Result<SweepResult> {
    cfg.validate()?;
    if !cfg.method.is_inf() {
        return Err(Error::Config(format!("{} has no psi to sweep", cfg.method)));
    }
    let (train, valid) = split_train_validation(data, cfg.split_ratio, cfg.seed)?;
    let base = inf_base_model(cfg, tax, &train, &valid)?;
    sweep(cfg, &base, &train, &valid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Example;

    fn toy() -> (Taxonomy, Dataset) {
        let tax = Taxonomy::from_edges(&[(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6)]).unwrap();
        let centers = [(3, [4.0, 0.0]), (4, [0.0, 4.0]), (5, [-4.0, 0.0]), (6, [0.0, -4.0])];
        let mut ex = Vec::new();
        for i in 0..12 {
            for &(l, c) in &centers {
                let j = (i as f64 - 6.0) * 0.1;
                ex.push(Example {
                    x: SparseVector::from_dense(&[c[0] + j, c[1] - j, 1.0]),
                    label: l,
                });
            }
        }
        (tax, Dataset::new(ex, 3))
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn tdlr_has_a_model_per_non_root_node() {
        let (tax, ds) = toy();
        let run = run_train(&RunConfig::new(Method::Tdlr), &tax, &ds).unwrap();
        let Predictor::TopDown(h) = &run.predictor else { panic!() };
        let nodes: Vec<NodeId> = h.models.keys().copied().collect();
        assert_eq!(nodes, tax.non_root_nodes().collect::<Vec<_>>());
        assert!(run.plan.is_empty());
    }

    #[test]
    fn huge_psi_keeps_the_hierarchy() {
        let (tax, ds) = toy();
        let mut cfg = RunConfig::new(Method::GlobalInf);
        cfg.psi = Some(10.0);
        let run = run_train(&cfg, &tax, &ds).unwrap();
        assert!(run.plan.is_empty());
        assert_eq!(run.taxonomy, tax);
        assert_eq!(run.meta["removed_nodes"], "");
    }

    #[test]
    fn every_method_trains_and_predicts_leaves() {
        let (tax, ds) = toy();
        for m in Method::ALL {
            if m == Method::Mlf {
                // depth 2 has no middle level
                assert!(run_train(&RunConfig::new(m), &tax, &ds).is_err());
                continue;
            }
            let run = run_train(&RunConfig::new(m), &tax, &ds).unwrap();
            for p in run.predictor.predict_all(&ds) {
                assert!(tax.is_leaf(p.leaf), "{m}");
                if m.is_flat() {
                    assert_eq!(p.path, vec![p.leaf]);
                } else {
                    assert_eq!(p.path[0], 0);
                }
            }
        }
    }

    #[test]
    fn config_checks() {
        let mut c = RunConfig::new(Method::Ecoc);
        c.codeword_bits = None;
        assert!(c.validate().is_err());
        c.codeword_bits = Some(8);
        assert!(c.validate().is_err());
        let mut c = RunConfig::new(Method::GlobalInf);
        c.psi = Some(-1.0);
        assert!(c.validate().is_err());
        let mut c = RunConfig::new(Method::Tdlr);
        c.split_ratio = 1.0;
        assert!(matches!(c.validate(), Err(Error::InvalidRatio(_))));
    }

    #[test]
    fn pruning_zeroes_tiny_weights() {
        let (tax, ds) = toy();
        let run = run_train(&RunConfig::new(Method::Tdlr), &tax, &ds).unwrap();
        let Predictor::TopDown(h) = &run.predictor else { panic!() };
        assert!(h
            .models
            .values()
            .flat_map(|m| m.weights.iter())
            .all(|w| *w == 0.0 || w.abs() >= PRUNE_BELOW));
    }
}
