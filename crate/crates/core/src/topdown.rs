//! Hierarchical one-vs-rest training under the inclusive policy, and the
//! top-down and flat predictors.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::data::{Dataset, SparseVector};
use crate::error::{Error, Result};
use crate::linreg::{self, TrainConfig, WeightVector};
use crate::taxonomy::{NodeId, Taxonomy};

/// Penalty grid searched per node by default.
pub const DEFAULT_C_GRID: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];

#[derive(Debug, Clone, PartialEq)]
pub struct NodeModel {
    pub node: NodeId,
    pub weights: WeightVector,
    pub c_used: f64,
    /// Objective of the node model on held-out validation data.
    pub fstar: Option<f64>,
    /// The node saw only one binary class; weights are zero.
    pub untrainable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierModel {
    pub taxonomy: Taxonomy,
    pub models: BTreeMap<NodeId, NodeModel>,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct HierTrainOptions {
    pub c_grid: Vec<f64>,
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Refit every node on train ∪ validation with its selected C.
    pub refit: bool,
    /// Worker threads; `None` uses the global rayon pool.
    pub jobs: Option<usize>,
}

impl Default for HierTrainOptions {
    fn default() -> Self {
        let base = TrainConfig::default();
        HierTrainOptions {
            c_grid: DEFAULT_C_GRID.to_vec(),
            grad_tol: base.grad_tol,
            max_iter: base.max_iter,
            refit: true,
            jobs: None,
        }
    }
}

impl HierTrainOptions {
    fn config(&self, c: f64) -> TrainConfig {
        TrainConfig {
            c,
            grad_tol: self.grad_tol,
            max_iter: self.max_iter,
        }
    }
}

/// Runs `f` on a dedicated pool of `jobs` threads, or on the global pool.
pub(crate) fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Inclusive-policy labels for node `n`: `+1` when the example's leaf lies
/// in the subtree of `n`, `−1` otherwise.
pub fn binary_labels(tax: &Taxonomy, labels: &[NodeId], n: NodeId) -> Result<Vec<f64>> {
    if n == tax.root() {
        return Err(Error::RootModel);
    }
    if !tax.contains(n) {
        return Err(Error::UnknownNode(n));
    }
    let positive: BTreeSet<NodeId> = tax.descendant_leaves(n).into_iter().collect();
    Ok(labels
        .iter()
        .map(|y| if positive.contains(y) { 1.0 } else { -1.0 })
        .collect())
}

/// F1 of the positive class for ±1 labels and predictions (0 when undefined).
pub fn binary_f1(truth: &[f64], pred: &[f64]) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&t, &p) in truth.iter().zip(pred) {
        match (t > 0.0, p > 0.0) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fneg) as f64
}

/// Checks the dataset against the taxonomy's leaf set.
pub fn check_labels(tax: &Taxonomy, ds: &Dataset) -> Result<()> {
    for e in &ds.examples {
        if !tax.is_leaf(e.label) {
            return Err(Error::NotALeaf(e.label));
        }
    }
    Ok(())
}

struct NodeFit {
    model: NodeModel,
}

/// Trains one binary model per non-root node.
///
/// For every node the penalty is chosen from `opts.c_grid` by binary F1 on
/// `valid` (ties go to the smaller C). With `opts.refit` the node is then
/// refit on `train ∪ valid`; otherwise the train-only fit is kept, which is
/// what validation-objective scoring needs.
pub fn train_hierarchy(
    tax: &Taxonomy,
    train: &Dataset,
    valid: &Dataset,
    opts: &HierTrainOptions,
) -> Result<HierModel> {
    if opts.c_grid.is_empty() {
        return Err(Error::EmptyInput("C grid"));
    }
    check_labels(tax, train)?;
    check_labels(tax, valid)?;
    let counts = train.class_counts();
    if let Some(&leaf) = tax.leaves().iter().find(|l| !counts.contains_key(l)) {
        return Err(Error::LeafWithoutExamples(leaf));
    }
    let mut grid = opts.c_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let dim = train.dim.max(valid.dim);
    let xs_train = train.vectors();
    let xs_valid = valid.vectors();
    let both = train.concat(valid);
    let xs_both = both.vectors();
    let y_train = train.labels();
    let y_valid = valid.labels();
    let y_both = both.labels();

    let nodes: Vec<NodeId> = tax.non_root_nodes().collect();
    let fits = with_jobs(opts.jobs, || {
        nodes
            .par_iter()
            .map(|&n| {
                let yt = binary_labels(tax, &y_train, n)?;
                let yv = binary_labels(tax, &y_valid, n)?;
                fit_node(n, &xs_train, &yt, &xs_valid, &yv, dim, &grid, opts).and_then(|fit| {
                    if !opts.refit || valid.is_empty() || fit.model.untrainable {
                        return Ok(fit);
                    }
                    let yb = binary_labels(tax, &y_both, n)?;
                    let out = linreg::train(
                        &xs_both,
                        &yb,
                        dim,
                        &opts.config(fit.model.c_used),
                        Some(&fit.model.weights),
                    )?;
                    Ok(NodeFit {
                        model: NodeModel {
                            weights: out.weights,
                            ..fit.model
                        },
                    })
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;

    Ok(HierModel {
        taxonomy: tax.clone(),
        models: fits.into_iter().map(|f| (f.model.node, f.model)).collect(),
        dim,
    })
}

#[allow(clippy::too_many_arguments)]
fn fit_node(
    node: NodeId,
    xs_train: &[&SparseVector],
    y_train: &[f64],
    xs_valid: &[&SparseVector],
    y_valid: &[f64],
    dim: usize,
    grid: &[f64],
    opts: &HierTrainOptions,
) -> Result<NodeFit> {
    if y_train.iter().all(|&y| y == y_train[0]) {
        return Ok(NodeFit {
            model: NodeModel {
                node,
                weights: WeightVector::zeros(dim),
                c_used: grid[0],
                fstar: None,
                untrainable: true,
            },
        });
    }
    let mut best: Option<(f64, f64, WeightVector)> = None;
    let mut warm: Option<WeightVector> = None;
    for &c in grid {
        let out = linreg::train(xs_train, y_train, dim, &opts.config(c), warm.as_ref())?;
        let f1 = if grid.len() == 1 {
            0.0
        } else {
            let pred: Vec<f64> = xs_valid
                .iter()
                .map(|x| if x.dot(&out.weights) >= 0.0 { 1.0 } else { -1.0 })
                .collect();
            binary_f1(y_valid, &pred)
        };
        if best.as_ref().is_none_or(|(_, b, _)| f1 > *b) {
            best = Some((c, f1, out.weights.clone()));
        }
        warm = Some(out.weights);
    }
    let (c, _, weights) = best.expect("grid is nonempty");
    Ok(NodeFit {
        model: NodeModel {
            node,
            weights,
            c_used: c,
            fstar: None,
            untrainable: false,
        },
    })
}

impl HierModel {
    pub fn weights(&self, n: NodeId) -> Option<&WeightVector> {
        self.models.get(&n).map(|m| &m.weights)
    }

    fn score(&self, n: NodeId, x: &SparseVector) -> f64 {
        self.models.get(&n).map_or(0.0, |m| x.dot(&m.weights))
    }

    /// Greedy descent from the root; returns the decision path `root, …, leaf`.
    pub fn predict_path(&self, x: &SparseVector) -> Vec<NodeId> {
        let tax = &self.taxonomy;
        let mut p = tax.root();
        let mut path = vec![p];
        loop {
            let children = tax.children(p);
            let Some((&first, rest)) = children.split_first() else {
                return path;
            };
            let mut best = (first, self.score(first, x));
            // children ascend by id, so strict > keeps the lowest id on ties
            for &q in rest {
                let s = self.score(q, x);
                if s > best.1 {
                    best = (q, s);
                }
            }
            p = best.0;
            path.push(p);
        }
    }

    pub fn predict_topdown(&self, x: &SparseVector) -> NodeId {
        *self.predict_path(x).last().expect("path holds the root")
    }

    /// Models of the current leaves, for flat prediction.
    pub fn leaf_models(&self) -> BTreeMap<NodeId, WeightVector> {
        self.taxonomy
            .leaves()
            .iter()
            .filter_map(|&l| self.models.get(&l).map(|m| (l, m.weights.clone())))
            .collect()
    }
}

pub fn predict_topdown(hm: &HierModel, x: &SparseVector) -> NodeId {
    hm.predict_topdown(x)
}

/// Arg-max over one-vs-rest leaf scores, lowest id on ties. `None` when
/// `models` is empty.
pub fn predict_flat(models: &BTreeMap<NodeId, WeightVector>, x: &SparseVector) -> Option<NodeId> {
    let mut best: Option<(NodeId, f64)> = None;
    for (&leaf, w) in models {
        let s = x.dot(w);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((leaf, s));
        }
    }
    best.map(|(l, _)| l)
}

/// A taxonomy with every internal node removed: root → leaves.
pub fn flat_taxonomy(tax: &Taxonomy) -> Result<Taxonomy> {
    let removed: BTreeSet<NodeId> = tax.internal_nodes().collect();
    tax.flatten(&crate::taxonomy::FlatteningPlan::manual(removed))
}
