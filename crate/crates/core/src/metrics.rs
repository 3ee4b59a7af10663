//! Flat and hierarchical evaluation measures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::taxonomy::{NodeId, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierScores {
    pub hp: f64,
    pub hr: f64,
    pub hf1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelError {
    pub level: usize,
    /// First-time misclassifications at this level over examples still on
    /// the right path when entering it.
    pub error: f64,
    /// First-time misclassifications at this level over all examples.
    pub unconditional: f64,
    /// First-time misclassifications at this level or above.
    pub cum_misclassified: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub hp: f64,
    pub hr: f64,
    pub hf1: f64,
    pub te: f64,
    pub per_class: BTreeMap<NodeId, ClassScores>,
    pub levelwise: Vec<LevelError>,
}

fn check_lengths(truth: &[NodeId], pred: &[NodeId]) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("label list"));
    }
    Ok(())
}

/// Harmonic mean of `hit/pred` and `hit/truth`, in count form so that
/// equal precision and recall give back exactly that value.
fn f1_counts(hit: usize, pred: usize, truth: usize) -> f64 {
    ratio(2 * hit, pred + truth)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `(tp, fp, fn)` per class in `classes`.
fn confusion(
    truth: &[NodeId],
    pred: &[NodeId],
    classes: &BTreeSet<NodeId>,
) -> BTreeMap<NodeId, (usize, usize, usize)> {
    let mut m: BTreeMap<NodeId, (usize, usize, usize)> =
        classes.iter().map(|&c| (c, (0, 0, 0))).collect();
    for (&t, &p) in truth.iter().zip(pred) {
        if t == p {
            if let Some(e) = m.get_mut(&t) {
                e.0 += 1;
            }
        } else {
            if let Some(e) = m.get_mut(&p) {
                e.1 += 1;
            }
            if let Some(e) = m.get_mut(&t) {
                e.2 += 1;
            }
        }
    }
    m
}

/// Micro-averaged F1 over `classes`.
pub fn micro_f1(truth: &[NodeId], pred: &[NodeId], classes: &BTreeSet<NodeId>) -> Result<f64> {
    check_lengths(truth, pred)?;
    let (tp, fp, fneg) = confusion(truth, pred, classes)
        .values()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    Ok(f1_counts(tp, tp + fp, tp + fneg))
}

pub fn per_class(
    truth: &[NodeId],
    pred: &[NodeId],
    classes: &BTreeSet<NodeId>,
) -> Result<BTreeMap<NodeId, ClassScores>> {
    check_lengths(truth, pred)?;
    Ok(confusion(truth, pred, classes)
        .into_iter()
        .map(|(c, (tp, fp, fneg))| {
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fneg);
            (
                c,
                ClassScores {
                    precision,
                    recall,
                    f1: f1_counts(tp, tp + fp, tp + fneg),
                    support: tp + fneg,
                },
            )
        })
        .collect())
}

/// Macro-averaged F1: the mean of per-class F1 over all of `classes`,
/// including classes that never occur.
pub fn macro_f1(truth: &[NodeId], pred: &[NodeId], classes: &BTreeSet<NodeId>) -> Result<f64> {
    if classes.is_empty() {
        return Err(Error::EmptyInput("class set"));
    }
    let pc = per_class(truth, pred, classes)?;
    Ok(pc.values().map(|s| s.f1).sum::<f64>() / classes.len() as f64)
}

fn check_leaf(tax: &Taxonomy, n: NodeId) -> Result<()> {
    if tax.contains(n) {
        Ok(())
    } else {
        Err(Error::UnknownNode(n))
    }
}

/// Hierarchical precision, recall and F1 over ancestor sets (label
/// included, root excluded).
pub fn hier_f1(truth: &[NodeId], pred: &[NodeId], tax: &Taxonomy) -> Result<HierScores> {
    check_lengths(truth, pred)?;
    let (mut overlap, mut n_pred, mut n_true) = (0usize, 0usize, 0usize);
    for (&t, &p) in truth.iter().zip(pred) {
        check_leaf(tax, t)?;
        check_leaf(tax, p)?;
        let at = tax.ancestors(t)?;
        let ap = tax.ancestors(p)?;
        // both are root paths, so the intersection is their common prefix
        overlap += at.iter().zip(&ap).take_while(|(a, b)| a == b).count();
        n_pred += ap.len();
        n_true += at.len();
    }
    let hp = ratio(overlap, n_pred);
    let hr = ratio(overlap, n_true);
    Ok(HierScores {
        hp,
        hr,
        hf1: f1_counts(overlap, n_pred, n_true),
    })
}

/// Mean tree distance between predicted and true labels.
pub fn tree_error(truth: &[NodeId], pred: &[NodeId], tax: &Taxonomy) -> Result<f64> {
    check_lengths(truth, pred)?;
    let mut total = 0usize;
    for (&t, &p) in truth.iter().zip(pred) {
        total += tax.distance(t, p)?;
    }
    Ok(total as f64 / truth.len() as f64)
}

/// First-error attribution along top-down decision paths.
///
/// `pred_paths[i]` is the sequence of nodes visited for example `i`,
/// starting at the root of `tax`. Levels run from 1 to the taxonomy depth.
pub fn levelwise_error(
    truth: &[NodeId],
    pred_paths: &[Vec<NodeId>],
    tax: &Taxonomy,
) -> Result<Vec<LevelError>> {
    if truth.len() != pred_paths.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: pred_paths.len(),
        });
    }
    let depth = tax.depth();
    let mut first_error = vec![0usize; depth + 1];
    for (&t, path) in truth.iter().zip(pred_paths) {
        if path.first() != Some(&tax.root()) {
            return Err(Error::Config("decision path does not start at the root".into()));
        }
        let true_path = tax.path_from_root(t)?;
        let wrong_at = (1..path.len().max(true_path.len()))
            .find(|&k| path.get(k) != true_path.get(k));
        if let Some(k) = wrong_at {
            if k <= depth {
                first_error[k] += 1;
            }
        }
    }
    let n = truth.len();
    let mut out = Vec::with_capacity(depth);
    let mut cum = 0usize;
    for (k, &errs) in first_error.iter().enumerate().skip(1) {
        let entering = n - cum;
        cum += errs;
        out.push(LevelError {
            level: k,
            error: ratio(errs, entering),
            unconditional: ratio(errs, n),
            cum_misclassified: cum,
        });
    }
    Ok(out)
}

/// Flat and hierarchical measures over the leaves of `eval_tax`. Level-wise
/// errors, when decision paths are given, are measured in the taxonomy the
/// paths were produced in.
pub fn evaluate(
    truth: &[NodeId],
    pred: &[NodeId],
    eval_tax: &Taxonomy,
    paths: Option<(&[Vec<NodeId>], &Taxonomy)>,
) -> Result<EvaluationReport> {
    check_lengths(truth, pred)?;
    for &l in truth.iter().chain(pred) {
        if !eval_tax.is_leaf(l) {
            return Err(Error::NotALeaf(l));
        }
    }
    let classes = eval_tax.leaves().clone();
    let pc = per_class(truth, pred, &classes)?;
    let h = hier_f1(truth, pred, eval_tax)?;
    let levelwise = match paths {
        Some((p, tax)) => levelwise_error(truth, p, tax)?,
        None => Vec::new(),
    };
    Ok(EvaluationReport {
        micro_f1: micro_f1(truth, pred, &classes)?,
        macro_f1: pc.values().map(|s| s.f1).sum::<f64>() / classes.len() as f64,
        hp: h.hp,
        hr: h.hr,
        hf1: h.hf1,
        te: tree_error(truth, pred, eval_tax)?,
        per_class: pc,
        levelwise,
    })
}

impl EvaluationReport {
    /// `key=value` summary.
    pub fn summary_text(&self) -> String {
        format!(
            "micro_f1={}\nmacro_f1={}\nhp={}\nhr={}\nhf1={}\nte={}\n",
            self.micro_f1, self.macro_f1, self.hp, self.hr, self.hf1, self.te
        )
    }

    pub fn per_class_csv(&self) -> String {
        let mut s = String::from("class,precision,recall,f1,support\n");
        for (c, v) in &self.per_class {
            let _ = writeln!(s, "{c},{},{},{},{}", v.precision, v.recall, v.f1, v.support);
        }
        s
    }

    pub fn levelwise_csv(&self) -> String {
        let mut s = String::from("level,error,unconditional_error,cum_misclassified\n");
        for l in &self.levelwise {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                l.level, l.error, l.unconditional, l.cum_misclassified
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn set(v: &[NodeId]) -> BTreeSet<NodeId> {
        v.iter().copied().collect()
    }

    #[test]
    fn micro_examples() {
        let c = set(&[1, 2]);
        assert_eq!(micro_f1(&[1, 2, 2], &[1, 2, 2], &c).unwrap(), 1.0);
        assert_relative_eq!(micro_f1(&[1, 1, 2, 2], &[1, 2, 2, 2], &c).unwrap(), 0.75);
        assert!(micro_f1(&[1], &[1, 2], &c).is_err());
    }

    #[test]
    fn macro_examples() {
        let c = set(&[1, 2]);
        assert_relative_eq!(macro_f1(&[1, 1, 1], &[1, 1, 1], &set(&[1])).unwrap(), 1.0);
        // class 1 perfect, class 2 entirely wrong (predicted as 3)
        assert_relative_eq!(
            macro_f1(&[1, 2], &[1, 3], &set(&[1, 2, 3])).unwrap(),
            (1.0 + 0.0 + 0.0) / 3.0
        );
        assert_relative_eq!(macro_f1(&[1, 2], &[1, 1], &c).unwrap(), (2.0 / 3.0) / 2.0);
        let m = macro_f1(&[1, 1, 2, 3], &[1, 1, 2, 2], &set(&[1, 2, 3])).unwrap();
        assert_relative_eq!(m, 5.0 / 9.0, max_relative = 1e-15);
        assert!(macro_f1(&[1], &[1], &BTreeSet::new()).is_err());
    }

    #[test]
    fn macro_two_classes_one_wrong() {
        // class 2 is mispredicted as a label outside the class set
        let m = macro_f1(&[1, 2], &[1, 9], &set(&[1, 2])).unwrap();
        assert_relative_eq!(m, 0.5);
    }

    #[test]
    fn hier_examples() {
        let t = Taxonomy::from_edges(&[(0, 1), (1, 2), (1, 3), (0, 4), (4, 5), (5, 6), (5, 7)]).unwrap();
        let h = hier_f1(&[2], &[2], &t).unwrap();
        assert_eq!(h.hf1, 1.0);
        let h = hier_f1(&[2], &[3], &t).unwrap();
        assert_eq!((h.hp, h.hr, h.hf1), (0.5, 0.5, 0.5));
        let h = hier_f1(&[2], &[6], &t).unwrap();
        assert_eq!(h.hf1, 0.0);
        assert!(hier_f1(&[2], &[99], &t).is_err());
    }

    #[test]
    fn tree_error_examples() {
        let t = Taxonomy::from_edges(&[(0, 1), (1, 2), (1, 3), (0, 4), (4, 5), (5, 6), (5, 7)]).unwrap();
        assert_eq!(tree_error(&[2], &[2], &t).unwrap(), 0.0);
        assert_eq!(tree_error(&[6], &[7], &t).unwrap(), 2.0);
        // depth-3 leaf 6 vs depth-2 leaf 2 under another root child
        assert_eq!(tree_error(&[6], &[2], &t).unwrap(), 5.0);
        assert_eq!(tree_error(&[6, 2], &[7, 2], &t).unwrap(), 1.0);
    }

    #[test]
    fn levelwise_examples() {
        // root 0 → {1, 2}; 1 → {3, 4}; 2 → {5, 6}
        let t = Taxonomy::from_edges(&[(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6)]).unwrap();
        let truth = [3, 4, 5, 6];
        let ok: Vec<Vec<NodeId>> = truth.iter().map(|&l| t.path_from_root(l).unwrap()).collect();
        let r = levelwise_error(&truth, &ok, &t).unwrap();
        assert!(r.iter().all(|l| l.error == 0.0 && l.cum_misclassified == 0));

        let paths = vec![vec![0, 2, 5], vec![0, 1, 3], ok[2].clone(), ok[3].clone()];
        let r = levelwise_error(&truth, &paths, &t).unwrap();
        assert_relative_eq!(r[0].error, 0.25);
        assert_relative_eq!(r[1].error, 1.0 / 3.0);
        assert_eq!((r[0].cum_misclassified, r[1].cum_misclassified), (1, 2));
        assert_relative_eq!(r[1].unconditional, 0.25);

        let r = levelwise_error(&[3], &[vec![0, 2, 6]], &t).unwrap();
        assert_eq!((r[0].cum_misclassified, r[1].cum_misclassified), (1, 1));
        assert!(levelwise_error(&[3], &[vec![1, 3]], &t).is_err());
    }

    #[test]
    fn perfect_report() {
        let t = Taxonomy::from_edges(&[(0, 1), (0, 2), (1, 3), (1, 4)]).unwrap();
        let truth = [3, 4, 2, 3];
        let r = evaluate(&truth, &truth, &t, None).unwrap();
        assert_eq!((r.micro_f1, r.macro_f1, r.hf1, r.te), (1.0, 1.0, 1.0, 0.0));
        assert!(r.summary_text().contains("macro_f1=1\n"));
        assert_eq!(r.per_class_csv().lines().count(), 4);
        assert!(matches!(evaluate(&[1], &[3], &t, None), Err(Error::NotALeaf(1))));
    }
}
