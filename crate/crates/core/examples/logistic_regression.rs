//! L2-regularized logistic regression on a noisy 2-D problem: objective
//! trace, a finite-difference gradient check, and warm starting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taxoflat::data::SparseVector;
use taxoflat::linreg::{self, TrainConfig, WeightVector};

fn main() -> taxoflat::error::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for _ in 0..200 {
        let (a, b): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let noisy = a + 0.5 * b + rng.random_range(-0.8..0.8);
        xs.push(SparseVector::from_dense(&[a, b, 1.0]));
        ys.push(if noisy > 0.3 { 1.0 } else { -1.0 });
    }
    let refs: Vec<&SparseVector> = xs.iter().collect();

    for c in [0.01, 1.0, 100.0] {
        let out = linreg::train(&refs, &ys, 3, &TrainConfig::with_c(c), None)?;
        println!(
            "C = {c:>6}: {} Newton steps, objective {:.4} -> {:.4}, w = {:.3?}",
            out.iterations,
            out.objective_history[0],
            out.objective_history.last().unwrap(),
            out.weights.0
        );
    }

    // analytic gradient against central differences at a random point
    let w = WeightVector(vec![0.3, -0.2, 0.1]);
    let g = linreg::gradient(&w, &refs, &ys, 1.0)?;
    let h = 1e-6;
    for i in 0..3 {
        let (mut p, mut m) = (w.clone(), w.clone());
        p.0[i] += h;
        m.0[i] -= h;
        let fd = (linreg::objective(&p, &refs, &ys, 1.0)? - linreg::objective(&m, &refs, &ys, 1.0)?) / (2.0 * h);
        println!("grad[{i}] analytic {:+.8} numeric {:+.8}", g[i], fd);
    }

    let cold = linreg::train(&refs, &ys, 3, &TrainConfig::with_c(10.0), None)?;
    let first = linreg::train(&refs, &ys, 3, &TrainConfig::with_c(1.0), None)?;
    let warm = linreg::train(&refs, &ys, 3, &TrainConfig::with_c(10.0), Some(&first.weights))?;
    println!("C = 10 from zero: {} steps, warm-started from C = 1: {} steps", cold.iterations, warm.iterations);
    let p = linreg::prob(&cold.weights, &SparseVector::from_dense(&[1.0, 1.0, 1.0]))?;
    println!("P(y = +1 | x = (1, 1)) = {p:.3}");
    Ok(())
}
