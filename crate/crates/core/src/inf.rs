//! Inconsistent-node identification.
//!
//! Every node model is scored on held-out validation data with the same
//! regularised logistic objective it was trained on (`f*`). Nodes whose
//! score exceeds `τ = µ + ψ·σ` are flagged, either with one threshold per
//! level ([`select_level_inf`]) or one threshold for the whole hierarchy
//! ([`select_global_inf`]). Leaves take part in the statistics but are never
//! flagged.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linreg;
use crate::taxonomy::{FlattenMethod, FlatteningPlan, NodeId, NodeProvenance, Taxonomy};
use crate::topdown::{binary_labels, HierModel, NodeModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdScope {
    PerLevel(usize),
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSpec {
    pub scope: ThresholdScope,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub psi: f64,
    pub tau: f64,
}

/// `ψ ∈ {0.0, 0.1, …, 3.0}`.
pub fn default_psi_grid() -> Vec<f64> {
    (0..=30).map(|i| i as f64 / 10.0).collect()
}

/// Validation objective of one node model.
pub fn fstar(model: &NodeModel, valid: &Dataset, tax: &Taxonomy) -> Result<f64> {
    if valid.is_empty() {
        return Err(Error::EmptyInput("validation set"));
    }
    let ys = binary_labels(tax, &valid.labels(), model.node)?;
    linreg::objective(&model.weights, &valid.vectors(), &ys, model.c_used)
}

/// Fills `fstar` on every node model of `hm`.
pub fn compute_fstars(hm: &mut HierModel, valid: &Dataset) -> Result<()> {
    let tax = &hm.taxonomy;
    let values = hm
        .models
        .par_iter()
        .map(|(&n, m)| fstar(m, valid, tax).map(|v| (n, v)))
        .collect::<Result<Vec<_>>>()?;
    for (n, v) in values {
        if let Some(m) = hm.models.get_mut(&n) {
            m.fstar = Some(v);
        }
    }
    Ok(())
}

/// Mean, population standard deviation and `τ = µ + ψσ` of `values`.
pub fn threshold(values: &[f64], psi: f64) -> Result<ThresholdSpec> {
    if values.is_empty() {
        return Err(Error::EmptyInput("threshold values"));
    }
    if psi.is_nan() || psi < 0.0 {
        return Err(Error::Config(format!("psi must be nonnegative, got {psi}")));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    // keeps ψ = ∞ well defined when σ = 0
    let tau = if std == 0.0 { mean } else { mean + psi * std };
    Ok(ThresholdSpec {
        scope: ThresholdScope::Global,
        mean,
        std,
        psi,
        tau,
    })
}

fn fstar_of(hm: &HierModel, n: NodeId) -> Result<f64> {
    hm.models
        .get(&n)
        .and_then(|m| m.fstar)
        .ok_or_else(|| Error::Config(format!("node {n} has no validation objective")))
}

/// Same ψ for every level of `tax`.
pub fn uniform_psi(tax: &Taxonomy, psi: f64) -> BTreeMap<usize, f64> {
    (1..=tax.depth()).map(|k| (k, psi)).collect()
}

/// Level-wise selection. `psi_per_level` must cover every level from 1 to
/// the taxonomy depth.
pub fn select_level_inf(
    hm: &HierModel,
    psi_per_level: &BTreeMap<usize, f64>,
) -> Result<(FlatteningPlan, Vec<ThresholdSpec>)> {
    let tax = &hm.taxonomy;
    let mut plan = FlatteningPlan::new(FlattenMethod::LevelInf, []);
    let mut specs = Vec::new();
    for k in 1..=tax.depth() {
        let psi = *psi_per_level
            .get(&k)
            .ok_or_else(|| Error::Config(format!("no psi for level {k}")))?;
        let nodes: Vec<NodeId> = tax.nodes_at_level(k).collect();
        let values = nodes
            .iter()
            .map(|&n| fstar_of(hm, n))
            .collect::<Result<Vec<_>>>()?;
        let mut spec = threshold(&values, psi)?;
        spec.scope = ThresholdScope::PerLevel(k);
        for (&n, &f) in nodes.iter().zip(&values) {
            let flagged = f > spec.tau && !tax.is_leaf(n);
            if flagged {
                plan.removed.insert(n);
            }
            plan.provenance.insert(
                n,
                NodeProvenance {
                    level: k,
                    fstar: f,
                    tau: spec.tau,
                    flagged,
                },
            );
        }
        specs.push(spec);
    }
    Ok((plan, specs))
}

/// One threshold over all non-root nodes.
pub fn select_global_inf(hm: &HierModel, psi: f64) -> Result<(FlatteningPlan, ThresholdSpec)> {
    let tax = &hm.taxonomy;
    let nodes: Vec<NodeId> = tax.non_root_nodes().collect();
    let values = nodes
        .iter()
        .map(|&n| fstar_of(hm, n))
        .collect::<Result<Vec<_>>>()?;
    let spec = threshold(&values, psi)?;
    let mut plan = FlatteningPlan::new(FlattenMethod::GlobalInf, []);
    for (&n, &f) in nodes.iter().zip(&values) {
        let flagged = f > spec.tau && !tax.is_leaf(n);
        if flagged {
            plan.removed.insert(n);
        }
        plan.provenance.insert(
            n,
            NodeProvenance {
                level: tax.level(n).unwrap_or(0),
                fstar: f,
                tau: spec.tau,
                flagged,
            },
        );
    }
    Ok((plan, spec))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub best_psi: f64,
    pub best_score: f64,
    /// `(ψ, score)` in ascending ψ.
    pub curve: Vec<(f64, f64)>,
}

/// Evaluates `score(ψ)` for each grid value and keeps the maximiser; ties
/// go to the smaller ψ.
pub fn sweep_psi<F>(grid: &[f64], mut score: F) -> Result<SweepResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if grid.is_empty() {
        return Err(Error::EmptyInput("psi grid"));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut curve = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for psi in grid {
        let s = score(psi)?;
        curve.push((psi, s));
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((psi, s));
        }
    }
    let (best_psi, best_score) = best.expect("grid is nonempty");
    Ok(SweepResult {
        best_psi,
        best_score,
        curve,
    })
}

/// CSV with one row per node considered: `node,level,fstar,tau,flagged`.
pub fn flattening_report_csv(plan: &FlatteningPlan) -> String {
    let mut s = String::from("node,level,fstar,tau,flagged\n");
    for (n, p) in &plan.provenance {
        let _ = writeln!(
            s,
            "{n},{},{:.17e},{:.17e},{}",
            p.level,
            p.fstar,
            p.tau,
            if p.flagged { "yes" } else { "no" }
        );
    }
    s
}

pub fn sweep_curve_csv(curve: &[(f64, f64)]) -> String {
    let mut s = String::from("psi,validation_macro_f1\n");
    for (psi, v) in curve {
        let _ = writeln!(s, "{psi},{v}");
    }
    s
}
