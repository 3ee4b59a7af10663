//! Sparse examples, svmlight-style ingestion, tf-idf weighting and
//! train/validation splitting.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::taxonomy::NodeId;

/// Sparse feature vector with 1-based, strictly ascending indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
    dim: usize,
}

impl SparseVector {
    /// Builds a vector from `(index, value)` pairs. Zero values are dropped.
    pub fn new(entries: Vec<(u32, f64)>, dim: usize) -> Result<Self> {
        let mut prev = 0u32;
        for &(i, v) in &entries {
            if i == 0 || i <= prev {
                return Err(Error::Config(format!(
                    "sparse indices must be 1-based and strictly ascending (saw {i} after {prev})"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Config(format!("non-finite value at index {i}")));
            }
            prev = i;
        }
        if prev as usize > dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: prev as usize,
            });
        }
        let entries = entries.into_iter().filter(|&(_, v)| v != 0.0).collect();
        Ok(SparseVector { entries, dim })
    }

    /// Dense input, index `i` of the slice becoming feature `i + 1`.
    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, &v)| (i as u32 + 1, v))
            .collect();
        SparseVector {
            entries,
            dim: values.len(),
        }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_index(&self) -> usize {
        self.entries.last().map_or(0, |&(i, _)| i as usize)
    }

    /// Widens the declared dimension; indices are untouched.
    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = self.dim.max(dim);
        self
    }

    /// Inner product with a dense weight vector (`w[0]` pairs with index 1).
    /// Indices beyond `w.len()` contribute nothing.
    #[inline]
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.entries
            .iter()
            .filter_map(|&(i, v)| w.get(i as usize - 1).map(|wi| wi * v))
            .sum()
    }

    /// `out += scale * self`.
    #[inline]
    pub fn axpy(&self, scale: f64, out: &mut [f64]) {
        for &(i, v) in &self.entries {
            if let Some(o) = out.get_mut(i as usize - 1) {
                *o += scale * v;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> SparseVector {
        SparseVector {
            entries: self
                .entries
                .iter()
                .map(|&(i, v)| (i, v * s))
                .filter(|&(_, v)| v != 0.0)
                .collect(),
            dim: self.dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: SparseVector,
    pub label: NodeId,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub dim: usize,
}

impl Dataset {
    pub fn new(examples: Vec<Example>, dim: usize) -> Self {
        let dim = examples.iter().map(|e| e.x.max_index()).fold(dim, usize::max);
        let examples = examples
            .into_iter()
            .map(|e| Example {
                x: e.x.with_dim(dim),
                label: e.label,
            })
            .collect();
        Dataset { examples, dim }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<NodeId> {
        self.examples.iter().map(|e| e.label).collect()
    }

    pub fn vectors(&self) -> Vec<&SparseVector> {
        self.examples.iter().map(|e| &e.x).collect()
    }

    /// Examples per label, ascending by label.
    pub fn class_counts(&self) -> BTreeMap<NodeId, usize> {
        let mut m = BTreeMap::new();
        for e in &self.examples {
            *m.entry(e.label).or_insert(0) += 1;
        }
        m
    }

    /// Concatenation of two datasets.
    pub fn concat(&self, other: &Dataset) -> Dataset {
        let mut examples = self.examples.clone();
        examples.extend(other.examples.iter().cloned());
        Dataset::new(examples, self.dim.max(other.dim))
    }

    /// Parses svmlight text. An input without any example is an error.
    pub fn parse_svmlight(text: &str, dim_hint: Option<usize>) -> Result<Dataset> {
        let ds = Self::parse_svmlight_lenient(text, dim_hint)?;
        if ds.is_empty() {
            return Err(Error::EmptyFile);
        }
        Ok(ds)
    }

    /// Like [`Dataset::parse_svmlight`] but accepts an input with no examples.
    pub fn parse_svmlight_lenient(text: &str, dim_hint: Option<usize>) -> Result<Dataset> {
        let mut examples = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            examples.push(parse_line(line, i + 1)?);
        }
        Ok(Dataset::new(examples, dim_hint.unwrap_or(0)))
    }

    pub fn to_svmlight(&self) -> String {
        let mut s = String::new();
        for e in &self.examples {
            let _ = write!(s, "{}", e.label);
            for &(i, v) in e.x.entries() {
                let _ = write!(s, " {i}:{v}");
            }
            s.push('\n');
        }
        s
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<Example> {
    let mut tokens = line.split_whitespace();
    let label_tok = tokens.next().ok_or_else(|| Error::parse(lineno, "missing label"))?;
    let label: NodeId = label_tok
        .parse()
        .map_err(|_| Error::parse(lineno, format!("bad label `{label_tok}`")))?;
    let mut entries = Vec::new();
    let mut prev = 0u32;
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| Error::parse(lineno, format!("expected idx:val, got `{tok}`")))?;
        let idx: u32 = idx
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad index `{idx}`")))?;
        let val: f64 = val
            .parse()
            .map_err(|_| Error::parse(lineno, format!("non-numeric value `{val}`")))?;
        if idx == 0 {
            return Err(Error::parse(lineno, "feature indices are 1-based"));
        }
        if idx <= prev {
            return Err(Error::parse(
                lineno,
                format!("indices not ascending ({idx} after {prev})"),
            ));
        }
        if !val.is_finite() {
            return Err(Error::parse(lineno, format!("non-finite value at index {idx}")));
        }
        prev = idx;
        if val != 0.0 {
            entries.push((idx, val));
        }
    }
    let dim = prev as usize;
    Ok(Example {
        x: SparseVector { entries, dim },
        label,
    })
}

/// tf-idf with natural-log idf `ln(N / df)` followed by per-row l2
/// normalisation. Rows that end up all-zero stay all-zero.
pub fn tfidf_l2(ds: &Dataset) -> Result<Dataset> {
    if ds.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let mut df: BTreeMap<u32, usize> = BTreeMap::new();
    for e in &ds.examples {
        for &(i, v) in e.x.entries() {
            if v < 0.0 {
                return Err(Error::NegativeCount { index: i, value: v });
            }
            *df.entry(i).or_insert(0) += 1;
        }
    }
    let n = ds.len() as f64;
    let examples = ds
        .examples
        .iter()
        .map(|e| {
            let weighted: Vec<(u32, f64)> = e
                .x
                .entries()
                .iter()
                .map(|&(i, c)| (i, c * (n / df[&i] as f64).ln()))
                .filter(|&(_, v)| v != 0.0)
                .collect();
            let norm = weighted.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            let entries = if norm > 0.0 {
                weighted.into_iter().map(|(i, v)| (i, v / norm)).collect()
            } else {
                Vec::new()
            };
            Example {
                x: SparseVector {
                    entries,
                    dim: e.x.dim(),
                },
                label: e.label,
            }
        })
        .collect();
    Ok(Dataset {
        examples,
        dim: ds.dim,
    })
}

/// Seeded stratified split.
///
/// A label with a single example always goes to the training side. A label
/// with `n ≥ 2` examples sends `round((1 - ratio) · n)` of them to
/// validation, clamped to `1..=n-1`. Relative example order is kept on
/// both sides.
pub fn split_train_validation(ds: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidRatio(ratio));
    }
    if ds.len() < 2 {
        return Err(Error::EmptyInput("dataset with at least two examples"));
    }
    let mut by_class: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (i, e) in ds.examples.iter().enumerate() {
        by_class.entry(e.label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_valid = vec![false; ds.len()];
    for idx in by_class.values_mut() {
        let n = idx.len();
        if n < 2 {
            continue;
        }
        let n_valid = (((1.0 - ratio) * n as f64).round() as usize).clamp(1, n - 1);
        idx.shuffle(&mut rng);
        for &i in &idx[..n_valid] {
            in_valid[i] = true;
        }
    }
    let (mut train, mut valid) = (Vec::new(), Vec::new());
    for (e, &v) in ds.examples.iter().zip(&in_valid) {
        if v {
            valid.push(e.clone());
        } else {
            train.push(e.clone());
        }
    }
    Ok((
        Dataset {
            examples: train,
            dim: ds.dim,
        },
        Dataset {
            examples: valid,
            dim: ds.dim,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ex(label: NodeId, entries: Vec<(u32, f64)>) -> Example {
        let dim = entries.last().map_or(1, |e| e.0 as usize);
        Example {
            x: SparseVector::new(entries, dim).unwrap(),
            label,
        }
    }

    #[test]
    fn parse_one_line() {
        let ds = Dataset::parse_svmlight("3 1:0.5 7:0.25", None).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.examples[0].label, 3);
        assert_eq!(ds.examples[0].x.nnz(), 2);
        assert!(ds.dim >= 7);
        let hinted = Dataset::parse_svmlight("3 1:0.5 7:0.25", Some(100)).unwrap();
        assert_eq!(hinted.dim, 100);
        assert_eq!(hinted.examples[0].x.dim(), 100);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            Dataset::parse_svmlight("3 7:0.25 1:0.5", None),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Dataset::parse_svmlight("3 1:0.5 1:0.25", None),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            Dataset::parse_svmlight("3 1:abc", None),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(Dataset::parse_svmlight("", None), Err(Error::EmptyFile)));
        assert!(matches!(
            Dataset::parse_svmlight("# only a comment\n\n", None),
            Err(Error::EmptyFile)
        ));
        assert!(Dataset::parse_svmlight_lenient("", None).unwrap().is_empty());
    }

    #[test]
    fn tfidf_single_doc_is_zero() {
        let ds = Dataset::new(vec![ex(1, vec![(1, 3.0), (2, 1.0)])], 2);
        let t = tfidf_l2(&ds).unwrap();
        assert_eq!(t.examples[0].x.nnz(), 0);
    }

    #[test]
    fn tfidf_two_docs() {
        let ds = Dataset::new(
            vec![ex(1, vec![(1, 1.0)]), ex(2, vec![(1, 1.0), (2, 1.0)])],
            2,
        );
        let t = tfidf_l2(&ds).unwrap();
        assert_eq!(t.examples[0].x.nnz(), 0);
        assert_eq!(t.examples[1].x.entries(), &[(2, 1.0)]);
    }

    #[test]
    fn tfidf_rejects_negative() {
        let ds = Dataset::new(vec![ex(1, vec![(1, -1.0)])], 1);
        assert!(matches!(tfidf_l2(&ds), Err(Error::NegativeCount { .. })));
    }

    #[test]
    fn split_proportions() {
        let ds = Dataset::new(
            (0..10).map(|i| ex(1, vec![(1, i as f64 + 1.0)])).collect(),
            1,
        );
        let (tr, va) = split_train_validation(&ds, 0.9, 7).unwrap();
        assert_eq!((tr.len(), va.len()), (9, 1));

        let mut examples = ds.examples.clone();
        examples.push(ex(2, vec![(1, 99.0)]));
        let ds = Dataset::new(examples, 1);
        for seed in 0..20 {
            let (tr, va) = split_train_validation(&ds, 0.9, seed).unwrap();
            assert!(va.examples.iter().all(|e| e.label != 2));
            assert!(tr.examples.iter().any(|e| e.label == 2));
        }
        assert!(matches!(
            split_train_validation(&ds, 1.0, 0),
            Err(Error::InvalidRatio(_))
        ));
        assert!(matches!(
            split_train_validation(&ds, 0.0, 0),
            Err(Error::InvalidRatio(_))
        ));
    }

    #[test]
    fn split_is_seeded() {
        let ds = Dataset::new(
            (0..50)
                .map(|i| ex(i % 3, vec![(1, i as f64 + 1.0)]))
                .collect(),
            1,
        );
        let a = split_train_validation(&ds, 0.9, 11).unwrap();
        let b = split_train_validation(&ds, 0.9, 11).unwrap();
        assert_eq!(a, b);
        let distinct: std::collections::BTreeSet<Vec<String>> = (0..5)
            .map(|s| {
                let (_, va) = split_train_validation(&ds, 0.9, s).unwrap();
                va.examples.iter().map(|e| format!("{:?}", e.x)).collect()
            })
            .collect();
        assert!(distinct.len() > 1);
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        let row = (
            0u32..5,
            prop::collection::btree_map(1u32..40, 0.01f64..100.0, 0..8),
        );
        prop::collection::vec(row, 2..40).prop_map(|rows| {
            Dataset::new(
                rows.into_iter()
                    .map(|(l, m)| ex(l, m.into_iter().collect()))
                    .collect(),
                40,
            )
        })
    }

    proptest! {
        #[test]
        fn svmlight_round_trip(ds in arb_dataset()) {
            let text = ds.to_svmlight();
            let back = Dataset::parse_svmlight(&text, Some(ds.dim)).unwrap();
            prop_assert_eq!(back, ds);
        }

        #[test]
        fn tfidf_rows_unit_or_zero(ds in arb_dataset(), scale in 0.1f64..50.0) {
            let t = tfidf_l2(&ds).unwrap();
            for e in &t.examples {
                let n = e.x.norm();
                prop_assert!(n.abs() < 1e-12 || (n - 1.0).abs() < 1e-12);
            }
            // scaling one document's counts leaves its row unchanged
            let mut scaled = ds.clone();
            scaled.examples[0].x = scaled.examples[0].x.scaled(scale);
            let t2 = tfidf_l2(&scaled).unwrap();
            for (a, b) in t.examples[0].x.entries().iter().zip(t2.examples[0].x.entries()) {
                prop_assert_eq!(a.0, b.0);
                prop_assert!((a.1 - b.1).abs() < 1e-12);
            }
        }

        #[test]
        fn split_partitions(ds in arb_dataset(), seed in any::<u64>()) {
            let (tr, va) = split_train_validation(&ds, 0.9, seed).unwrap();
            prop_assert_eq!(tr.len() + va.len(), ds.len());
            let mut all: Vec<String> = tr.examples.iter().chain(&va.examples)
                .map(|e| format!("{e:?}")).collect();
            let mut orig: Vec<String> = ds.examples.iter().map(|e| format!("{e:?}")).collect();
            all.sort();
            orig.sort();
            prop_assert_eq!(all, orig);
        }
    }
}
