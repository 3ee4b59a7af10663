//! Error-correcting output codes over the leaf classes.
//!
//! Each class gets a random binary codeword; one logistic model is trained
//! per bit and a test point is assigned to the class whose codeword is
//! nearest in Hamming distance to the thresholded bit predictions.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, SparseVector};
use crate::error::{Error, Result};
use crate::linreg::{self, TrainConfig, WeightVector};
use crate::taxonomy::NodeId;
use crate::topdown::with_jobs;

pub const MIN_BITS: usize = 32;
pub const MAX_BITS: usize = 1024;
const MAX_REGENERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeBook {
    /// One row per class, `bits.len()` rows by `width` columns.
    bits: Vec<Vec<bool>>,
    class_ids: Vec<NodeId>,
    seed: u64,
}

impl CodeBook {
    /// Random codewords with i.i.d. fair bits. Classes are sorted; a
    /// codebook with a repeated row is redrawn.
    pub fn random(classes: &BTreeSet<NodeId>, width: usize, seed: u64) -> Result<Self> {
        if !(MIN_BITS..=MAX_BITS).contains(&width) {
            return Err(Error::Codebook(format!(
                "codeword length {width} outside [{MIN_BITS}, {MAX_BITS}]"
            )));
        }
        if classes.is_empty() {
            return Err(Error::EmptyInput("class set"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_REGENERATIONS {
            let bits: Vec<Vec<bool>> = classes
                .iter()
                .map(|_| (0..width).map(|_| rng.random_bool(0.5)).collect())
                .collect();
            let distinct: BTreeSet<&Vec<bool>> = bits.iter().collect();
            if distinct.len() == bits.len() {
                return Ok(CodeBook {
                    bits,
                    class_ids: classes.iter().copied().collect(),
                    seed,
                });
            }
        }
        Err(Error::Codebook(format!(
            "no collision-free codebook after {MAX_REGENERATIONS} draws"
        )))
    }

    /// One-hot rows; reduces ECOC to flat one-vs-rest.
    pub fn identity(classes: &BTreeSet<NodeId>) -> Self {
        let k = classes.len();
        CodeBook {
            bits: (0..k).map(|i| (0..k).map(|j| i == j).collect()).collect(),
            class_ids: classes.iter().copied().collect(),
            seed: 0,
        }
    }

    /// Explicit matrix; rows must be distinct and of equal width.
    pub fn from_rows(class_ids: Vec<NodeId>, bits: Vec<Vec<bool>>, seed: u64) -> Result<Self> {
        if class_ids.len() != bits.len() || bits.is_empty() {
            return Err(Error::Codebook("row count does not match class count".into()));
        }
        let width = bits[0].len();
        if width == 0 || bits.iter().any(|r| r.len() != width) {
            return Err(Error::Codebook("ragged codeword rows".into()));
        }
        let distinct: BTreeSet<&Vec<bool>> = bits.iter().collect();
        if distinct.len() != bits.len() {
            return Err(Error::Codebook("duplicate codewords".into()));
        }
        let ids: BTreeSet<NodeId> = class_ids.iter().copied().collect();
        if ids.len() != class_ids.len() {
            return Err(Error::Codebook("duplicate class ids".into()));
        }
        Ok(CodeBook {
            bits,
            class_ids,
            seed,
        })
    }

    pub fn width(&self) -> usize {
        self.bits.first().map_or(0, Vec::len)
    }

    pub fn class_ids(&self) -> &[NodeId] {
        &self.class_ids
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn codeword(&self, class: NodeId) -> Option<&[bool]> {
        self.class_ids
            .iter()
            .position(|&c| c == class)
            .map(|i| self.bits[i].as_slice())
    }

    /// Class at minimum Hamming distance from `bits`, lowest id on ties.
    pub fn decode(&self, bits: &[bool]) -> NodeId {
        let mut best: Option<(NodeId, usize)> = None;
        for (row, &c) in self.bits.iter().zip(&self.class_ids) {
            let d = row.iter().zip(bits).filter(|(a, b)| a != b).count();
            let better = match best {
                None => true,
                Some((bc, bd)) => d < bd || (d == bd && c < bc),
            };
            if better {
                best = Some((c, d));
            }
        }
        best.expect("codebook has rows").0
    }

    /// `seed`, `bits` and `classes` header lines followed by one
    /// `class 0101…` row per class.
    pub fn to_text(&self) -> String {
        let mut s = format!("seed {}\nbits {}\nclasses {}\n", self.seed, self.width(), self.class_ids.len());
        for (row, c) in self.bits.iter().zip(&self.class_ids) {
            let word: String = row.iter().map(|&b| if b { '1' } else { '0' }).collect();
            let _ = writeln!(s, "{c} {word}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut header = |key: &str| -> Result<u64> {
            let line = lines
                .next()
                .ok_or_else(|| Error::CorruptBundle(format!("codebook: missing `{key}`")))?;
            let (k, v) = line
                .split_once(' ')
                .ok_or_else(|| Error::CorruptBundle(format!("codebook: bad line `{line}`")))?;
            if k != key {
                return Err(Error::CorruptBundle(format!("codebook: expected `{key}`, got `{k}`")));
            }
            v.trim()
                .parse()
                .map_err(|_| Error::CorruptBundle(format!("codebook: bad `{key}` value")))
        };
        let seed = header("seed")?;
        let width = header("bits")? as usize;
        let n = header("classes")? as usize;
        let mut ids = Vec::with_capacity(n);
        let mut bits = Vec::with_capacity(n);
        for line in lines {
            let (c, word) = line
                .split_once(' ')
                .ok_or_else(|| Error::CorruptBundle(format!("codebook: bad row `{line}`")))?;
            ids.push(
                c.parse()
                    .map_err(|_| Error::CorruptBundle(format!("codebook: bad class `{c}`")))?,
            );
            let row = word
                .trim()
                .chars()
                .map(|ch| match ch {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(Error::CorruptBundle("codebook: non-binary digit".into())),
                })
                .collect::<Result<Vec<bool>>>()?;
            if row.len() != width {
                return Err(Error::CorruptBundle("codebook: row width mismatch".into()));
            }
            bits.push(row);
        }
        if ids.len() != n {
            return Err(Error::CorruptBundle("codebook: row count mismatch".into()));
        }
        CodeBook::from_rows(ids, bits, seed).map_err(|e| Error::CorruptBundle(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcocModel {
    pub bit_models: Vec<WeightVector>,
    /// Bit columns that were constant over the training classes.
    pub degenerate: Vec<bool>,
    pub c_used: Vec<f64>,
}

/// Trains one binary model per codeword bit.
pub fn ecoc_train(
    ds: &Dataset,
    book: &CodeBook,
    cfg: &TrainConfig,
    jobs: Option<usize>,
) -> Result<EcocModel> {
    let rows = ds
        .examples
        .iter()
        .map(|e| {
            book.codeword(e.label)
                .ok_or_else(|| Error::Codebook(format!("class {} has no codeword", e.label)))
        })
        .collect::<Result<Vec<_>>>()?;
    let xs = ds.vectors();
    let fits = with_jobs(jobs, || {
        (0..book.width())
            .into_par_iter()
            .map(|b| {
                let ys: Vec<f64> = rows.iter().map(|r| if r[b] { 1.0 } else { -1.0 }).collect();
                if ys.iter().all(|&y| y == ys[0]) {
                    return Ok((WeightVector::zeros(ds.dim), true));
                }
                linreg::train(&xs, &ys, ds.dim, cfg, None).map(|o| (o.weights, false))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let (bit_models, degenerate) = fits.into_iter().unzip();
    Ok(EcocModel {
        bit_models,
        degenerate,
        c_used: vec![cfg.c; book.width()],
    })
}

/// Thresholds each bit score at zero and decodes.
pub fn ecoc_predict(model: &EcocModel, book: &CodeBook, x: &SparseVector) -> NodeId {
    let bits: Vec<bool> = model.bit_models.iter().map(|w| x.dot(w) >= 0.0).collect();
    book.decode(&bits)
}
