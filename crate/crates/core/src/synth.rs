//! Synthetic hierarchy with one planted inconsistent node.
//!
//! Sixteen leaf classes sit at evenly spaced angles on a circle in the
//! plane, with Gaussian noise. Four groups of four consecutive leaves form
//! level 1, pairs of consecutive leaves form level 2, and the leaves are
//! level 3. On this layout every contiguous arc of leaves is linearly
//! separable from the rest, so the clean hierarchy is learnable at every
//! node.
//!
//! The corruption moves one leaf of the second group under a level-2 node
//! of the first group. That node's positives are no longer a contiguous arc
//! and cannot be separated by a hyperplane; the same holds for its parent.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, Example, SparseVector};
use crate::error::{Error, Result};
use crate::taxonomy::{NodeId, Taxonomy};

const GROUPS: u32 = 4;
const LEAVES: u32 = 16;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub radius: f64,
    pub noise: f64,
    /// Extra pure-noise features appended after the informative ones.
    pub noise_dims: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            train_per_class: 40,
            test_per_class: 40,
            radius: 10.0,
            noise: 0.6,
            noise_dims: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedData {
    /// The corrupted hierarchy the classifier is given.
    pub taxonomy: Taxonomy,
    /// The hierarchy the data was generated from.
    pub clean_taxonomy: Taxonomy,
    pub corrupted_node: NodeId,
    pub moved_leaf: NodeId,
    pub train: Dataset,
    pub test: Dataset,
}

pub fn group_id(g: u32) -> NodeId {
    1 + g
}

pub fn mid_id(g: u32, m: u32) -> NodeId {
    10 + 2 * g + m
}

pub fn leaf_id(i: u32) -> NodeId {
    100 + i
}

fn clean_edges() -> Vec<(NodeId, NodeId)> {
    let mut edges = Vec::new();
    for g in 0..GROUPS {
        edges.push((0, group_id(g)));
        for m in 0..2 {
            edges.push((group_id(g), mid_id(g, m)));
            for k in 0..2 {
                edges.push((mid_id(g, m), leaf_id(4 * g + 2 * m + k)));
            }
        }
    }
    edges
}

fn sample(
    cfg: &SynthConfig,
    per_class: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::Config(e.to_string()))?;
    let dim = 3 + cfg.noise_dims;
    let mut examples = Vec::with_capacity(per_class * LEAVES as usize);
    for _ in 0..per_class {
        for i in 0..LEAVES {
            let theta = std::f64::consts::TAU * (i as f64 + 0.5) / LEAVES as f64;
            let mut v = Vec::with_capacity(dim);
            v.push(cfg.radius * theta.cos() + noise.sample(rng));
            v.push(cfg.radius * theta.sin() + noise.sample(rng));
            v.push(1.0);
            v.extend((0..cfg.noise_dims).map(|_| noise.sample(rng)));
            examples.push(Example {
                x: SparseVector::from_dense(&v),
                label: leaf_id(i),
            });
        }
    }
    Ok(Dataset::new(examples, dim))
}

/// Generates train and test sets plus the corrupted hierarchy.
pub fn planted(cfg: &SynthConfig) -> Result<PlantedData> {
    let clean_taxonomy = Taxonomy::from_edges(&clean_edges())?;
    // leaf 7 belongs to group 1; hang it under the second pair of group 0
    let moved_leaf = leaf_id(7);
    let corrupted_node = mid_id(0, 1);
    let edges: Vec<(NodeId, NodeId)> = clean_edges()
        .into_iter()
        .map(|(p, c)| if c == moved_leaf { (corrupted_node, c) } else { (p, c) })
        .collect();
    let taxonomy = Taxonomy::from_edges(&edges)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let train = sample(cfg, cfg.train_per_class, &mut rng)?;
    let test = sample(cfg, cfg.test_per_class, &mut rng)?;
    Ok(PlantedData {
        taxonomy,
        clean_taxonomy,
        corrupted_node,
        moved_leaf,
        train,
        test,
    })
}

/// Leaf counts per class, for quick sanity checks.
pub fn class_sizes(ds: &Dataset) -> BTreeMap<NodeId, usize> {
    ds.class_counts()
}
