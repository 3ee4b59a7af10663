//! Binary l2-regularised logistic regression.
//!
//! The primal objective for labels `y ∈ {−1, +1}` is
//!
//! ```text
//! f(w) = C · Σ ln(1 + exp(−y·⟨w, x⟩)) + ½‖w‖²
//! ```
//!
//! It is strictly convex, so [`train`] runs a truncated Newton method
//! (conjugate gradient on Hessian-vector products) with Armijo
//! backtracking until the gradient norm drops below a relative tolerance.

use std::ops::Deref;

use crate::data::SparseVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Misclassification penalty.
    pub c: f64,
    /// Stop when `‖∇f(w)‖ ≤ grad_tol · max(1, ‖∇f(0)‖)`.
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl TrainConfig {
    pub fn with_c(c: f64) -> Self {
        TrainConfig {
            c,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("C must be positive, got {}", self.c)));
        }
        if self.grad_tol.is_nan() || self.grad_tol <= 0.0 || self.max_iter == 0 {
            return Err(Error::Config("grad_tol and max_iter must be positive".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            grad_tol: 1e-4,
            max_iter: 1000,
        }
    }
}

/// Dense weight vector; entry `j` pairs with feature index `j + 1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn zeros(dim: usize) -> Self {
        WeightVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

impl Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for WeightVector {
    fn from(v: Vec<f64>) -> Self {
        WeightVector(v)
    }
}

/// `ln(1 + exp(z))` without overflow.
#[inline]
pub fn log1p_exp(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check(w: &[f64], xs: &[&SparseVector], ys: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    for &y in ys {
        if y != 1.0 && y != -1.0 {
            return Err(Error::InvalidBinaryLabel(y));
        }
    }
    for x in xs {
        if x.max_index() > w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                found: x.max_index(),
            });
        }
    }
    Ok(())
}

fn objective_unchecked(w: &[f64], xs: &[&SparseVector], ys: &[f64], c: f64) -> f64 {
    let loss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| log1p_exp(-y * x.dot(w)))
        .sum();
    c * loss + 0.5 * w.iter().map(|v| v * v).sum::<f64>()
}

fn gradient_unchecked(w: &[f64], xs: &[&SparseVector], ys: &[f64], c: f64) -> Vec<f64> {
    let mut g = w.to_vec();
    for (x, &y) in xs.iter().zip(ys) {
        let m = y * x.dot(w);
        x.axpy(-c * y * sigmoid(-m), &mut g);
    }
    g
}

/// Regularised logistic objective at `w`.
pub fn objective(w: &[f64], xs: &[&SparseVector], ys: &[f64], c: f64) -> Result<f64> {
    check(w, xs, ys)?;
    Ok(objective_unchecked(w, xs, ys, c))
}

/// Gradient `w − C·Σ yᵢ·σ(−yᵢ⟨w,xᵢ⟩)·xᵢ`.
pub fn gradient(w: &[f64], xs: &[&SparseVector], ys: &[f64], c: f64) -> Result<WeightVector> {
    check(w, xs, ys)?;
    Ok(WeightVector(gradient_unchecked(w, xs, ys, c)))
}

pub fn score(w: &[f64], x: &SparseVector) -> Result<f64> {
    if x.max_index() > w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: x.max_index(),
        });
    }
    Ok(x.dot(w))
}

/// Probability of the positive class.
pub fn prob(w: &[f64], x: &SparseVector) -> Result<f64> {
    score(w, x).map(sigmoid)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: WeightVector,
    pub iterations: usize,
    /// Objective value at the start and after every accepted step.
    pub objective_history: Vec<f64>,
    pub converged: bool,
    /// All labels were identical. The minimiser is still well defined, but
    /// callers training node models treat such data as untrainable.
    pub single_class: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Fits the model on `xs`, `ys` of dimension `dim`.
pub fn train(
    xs: &[&SparseVector],
    ys: &[f64],
    dim: usize,
    cfg: &TrainConfig,
    warm_start: Option<&WeightVector>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut w = match warm_start {
        Some(ws) if ws.dim() == dim => ws.0.clone(),
        Some(ws) => {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: ws.dim(),
            })
        }
        None => vec![0.0; dim],
    };
    check(&w, xs, ys)?;

    let single_class = ys.iter().all(|&y| y == ys[0]);

    let c = cfg.c;
    let g0 = norm(&gradient_unchecked(&vec![0.0; dim], xs, ys, c));
    let stop = cfg.grad_tol * g0.max(1.0);

    let mut f = objective_unchecked(&w, xs, ys, c);
    let mut history = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    let mut curvature = vec![0.0; xs.len()];

    while iterations < cfg.max_iter {
        let mut g = w.clone();
        for ((x, &y), d) in xs.iter().zip(ys).zip(curvature.iter_mut()) {
            let s = sigmoid(-y * x.dot(&w));
            x.axpy(-c * y * s, &mut g);
            *d = c * s * (1.0 - s);
        }
        let gnorm = norm(&g);
        if gnorm <= stop {
            converged = true;
            break;
        }
        iterations += 1;

        let step = newton_direction(xs, &curvature, &g, gnorm);
        let slope = dot(&g, &step);
        if slope.is_nan() || slope >= 0.0 {
            return Err(Error::Numerical("Newton direction is not a descent direction".into()));
        }

        let mut alpha = 1.0;
        let mut accepted = false;
        let mut trial = vec![0.0; dim];
        for _ in 0..60 {
            for ((t, wi), si) in trial.iter_mut().zip(&w).zip(&step) {
                *t = wi + alpha * si;
            }
            let ft = objective_unchecked(&trial, xs, ys, c);
            if ft <= f + 1e-4 * alpha * slope {
                accepted = true;
                w.copy_from_slice(&trial);
                f = ft;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // no representable decrease left: we are at the floating-point floor
            break;
        }
        history.push(f);
    }

    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite weights".into()));
    }
    Ok(TrainOutcome {
        weights: WeightVector(w),
        iterations,
        objective_history: history,
        converged,
        single_class,
    })
}

/// Approximately solves `H d = −g` by conjugate gradient, where
/// `H = I + Σ Dᵢ xᵢ xᵢᵀ`.
fn newton_direction(xs: &[&SparseVector], curvature: &[f64], g: &[f64], gnorm: f64) -> Vec<f64> {
    let dim = g.len();
    let hess_vec = |v: &[f64], out: &mut [f64]| {
        out.copy_from_slice(v);
        for (x, &d) in xs.iter().zip(curvature) {
            if d > 0.0 {
                let xv = x.dot(v);
                x.axpy(d * xv, out);
            }
        }
    };

    let tol = (0.1f64).min(gnorm.sqrt()) * gnorm;
    let mut d = vec![0.0; dim];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut p = r.clone();
    let mut hp = vec![0.0; dim];
    let mut rr = dot(&r, &r);
    for _ in 0..dim.clamp(10, 250) {
        if rr.sqrt() <= tol {
            break;
        }
        hess_vec(&p, &mut hp);
        let php = dot(&p, &hp);
        if php <= 0.0 {
            break;
        }
        let alpha = rr / php;
        for i in 0..dim {
            d[i] += alpha * p[i];
            r[i] -= alpha * hp[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..dim {
            p[i] = r[i] + beta * p[i];
        }
    }
    if d.iter().all(|v| *v == 0.0) {
        // H ⪰ I, so −g is always a descent direction
        d = g.iter().map(|v| -v).collect();
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(i: u32, v: f64, dim: usize) -> SparseVector {
        SparseVector::new(vec![(i, v)], dim).unwrap()
    }

    // Naive term-by-term oracle with compensated summation.
    fn objective_oracle(w: &[f64], xs: &[&SparseVector], ys: &[f64], c: f64) -> f64 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        let mut add = |v: f64| {
            let y = v - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        };
        for (x, &y) in xs.iter().zip(ys) {
            let mut m = 0.0;
            for &(i, v) in x.entries() {
                m += w[i as usize - 1] * v;
            }
            let z = -y * m;
            let l = if z > 30.0 { z + (-z).exp() } else { (1.0 + z.exp()).ln() };
            add(c * l);
        }
        for wi in w {
            add(0.5 * wi * wi);
        }
        sum
    }

    fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<SparseVector>, Vec<f64>, f64) {
        let dim = rng.random_range(1..=20);
        let n = rng.random_range(1..=50);
        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let xs = (0..n)
            .map(|_| {
                let dense: Vec<f64> = (0..dim)
                    .map(|_| {
                        if rng.random_bool(0.5) {
                            rng.random_range(-1.5..1.5)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                SparseVector::from_dense(&dense)
            })
            .collect();
        let ys = (0..n)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let c = 10f64.powf(rng.random_range(-2.0..2.0));
        (w, xs, ys, c)
    }

    #[test]
    fn objective_at_zero() {
        let xs: Vec<SparseVector> = (1..=4).map(|i| e(1, i as f64, 1)).collect();
        let refs: Vec<&SparseVector> = xs.iter().collect();
        let ys = [1.0, -1.0, 1.0, 1.0];
        let f = objective(&[0.0], &refs, &ys, 1.0).unwrap();
        assert_relative_eq!(f, 4.0 * 2f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(
            objective(&[0.0], &refs, &ys, 3.5).unwrap(),
            3.5 * 4.0 * 2f64.ln(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn objective_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let (w, xs, ys, c) = random_instance(&mut rng);
            let refs: Vec<&SparseVector> = xs.iter().collect();
            let f = objective(&w, &refs, &ys, c).unwrap();
            assert_relative_eq!(f, objective_oracle(&w, &refs, &ys, c), max_relative = 1e-10);
        }
    }

    #[test]
    fn objective_no_overflow() {
        let x = e(1, 1.0, 1);
        let f = objective(&[1e6], &[&x], &[-1.0], 1.0).unwrap();
        assert!(f.is_finite());
        assert_relative_eq!(f, 1e6 + 0.5e12, max_relative = 1e-12);
    }

    #[test]
    fn objective_errors() {
        let x = e(3, 1.0, 3);
        assert!(matches!(
            objective(&[0.0, 0.0], &[&x], &[1.0], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            objective(&[0.0; 3], &[&x], &[0.0], 1.0),
            Err(Error::InvalidBinaryLabel(_))
        ));
    }

    #[test]
    fn gradient_examples() {
        let x = e(1, 1.0, 2);
        let g = gradient(&[0.0, 0.0], &[&x], &[1.0], 1.0).unwrap();
        assert_eq!(g.0, vec![-0.5, 0.0]);
        let g = gradient(&[0.0, 0.0], &[&x, &x], &[1.0, -1.0], 1.0).unwrap();
        assert_eq!(g.0, vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let (w, xs, ys, c) = random_instance(&mut rng);
            let refs: Vec<&SparseVector> = xs.iter().collect();
            let g = gradient(&w, &refs, &ys, c).unwrap();
            let h = 1e-5;
            let fd: Vec<f64> = (0..w.len())
                .map(|j| {
                    let mut wp = w.clone();
                    let mut wm = w.clone();
                    wp[j] += h;
                    wm[j] -= h;
                    (objective_oracle(&wp, &refs, &ys, c) - objective_oracle(&wm, &refs, &ys, c))
                        / (2.0 * h)
                })
                .collect();
            let diff = norm(&g.iter().zip(&fd).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(diff / norm(&fd).max(1.0) < 1e-6, "rel err {}", diff / norm(&fd));
        }
    }

    #[test]
    fn score_and_prob() {
        let x = SparseVector::new(vec![(1, 0.5), (2, 1.0)], 2).unwrap();
        assert_eq!(score(&[2.0, -1.0], &x).unwrap(), 0.0);
        assert_eq!(prob(&[2.0, -1.0], &x).unwrap(), 0.5);
        assert_eq!(prob(&[0.0, 0.0], &x).unwrap(), 0.5);
        for s in [-40.0, -3.0, 0.1, 7.0, 800.0] {
            assert_relative_eq!(sigmoid(s) + sigmoid(-s), 1.0, epsilon = 1e-15);
        }
        assert!(matches!(score(&[1.0], &x), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn one_dimensional_fixed_point() {
        // w* solves w = σ(−w); bisection oracle
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid - sigmoid(-mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let x = e(1, 1.0, 1);
        let out = train(&[&x], &[1.0], 1, &TrainConfig::default(), None).unwrap();
        assert!(out.converged);
        assert!((out.weights[0] - lo).abs() < 1e-4, "{:?} vs {lo}", out);
        assert!((lo - 0.401_058_137_541_546_8).abs() < 1e-12);
    }

    #[test]
    fn tiny_c_gives_near_zero() {
        let x = e(1, 1.0, 1);
        let out = train(&[&x], &[1.0], 1, &TrainConfig::with_c(1e-8), None).unwrap();
        assert!(out.weights[0].abs() < 1e-7);
    }

    #[test]
    fn antisymmetric_data_aligns_with_x() {
        let x = SparseVector::from_dense(&[1.0, -2.0, 0.5]);
        let nx = x.scaled(-1.0);
        let out = train(&[&x, &nx], &[1.0, -1.0], 3, &TrainConfig::default(), None).unwrap();
        // along x the problem is min_t 2·ln(1+exp(−t‖x‖²)) + ½t²‖x‖²
        let xx = x.norm().powi(2);
        let dphi = |t: f64| -2.0 * xx * sigmoid(-t * xx) + t * xx;
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dphi(mid) > 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        let expected: Vec<f64> = [1.0, -2.0, 0.5].iter().map(|v| v * lo).collect();
        for (a, b) in out.weights.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
        assert!(lo > 0.0);
    }

    #[test]
    fn degenerate_labels() {
        let x = e(1, 1.0, 2);
        let out = train(&[&x, &x], &[1.0, 1.0], 2, &TrainConfig::default(), None).unwrap();
        assert!(out.single_class);
        assert!(out.converged);
        // two positives on e1: w = 2σ(−w) along e1
        assert!((out.weights[0] - 2.0 * sigmoid(-out.weights[0])).abs() < 1e-4);
        assert_eq!(out.weights[1], 0.0);
    }

    #[test]
    fn monotone_and_converged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (_, xs, mut ys, c) = random_instance(&mut rng);
            let refs: Vec<&SparseVector> = xs.iter().collect();
            ys[0] = 1.0;
            if ys.len() > 1 {
                ys[1] = -1.0;
            }
            let dim = xs[0].dim();
            let cfg = TrainConfig::with_c(c);
            let out = train(&refs, &ys, dim, &cfg, None).unwrap();
            for pair in out.objective_history.windows(2) {
                assert!(pair[1] <= pair[0]);
            }
            let g = gradient(&out.weights, &refs, &ys, c).unwrap();
            let g0 = gradient(&vec![0.0; dim], &refs, &ys, c).unwrap();
            assert!(norm(&g) <= cfg.grad_tol * norm(&g0).max(1.0) || !out.converged);
            assert!(out.converged);
        }
    }

    #[test]
    fn warm_start_dim_checked() {
        let x = e(1, 1.0, 2);
        let ws = WeightVector::zeros(3);
        assert!(train(&[&x, &x], &[1.0, -1.0], 2, &TrainConfig::default(), Some(&ws)).is_err());
    }
}
