//! Flat and hierarchical measures on a four-example case, plus first-error
//! level attribution along decision paths.

use taxoflat::metrics;
use taxoflat::taxonomy::Taxonomy;

fn main() -> taxoflat::error::Result<()> {
    // root 0 → {1, 2}; 1 → {3, 4}; 2 → {5, 6}
    let tax = Taxonomy::from_edges(&[(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6)])?;
    let truth = [3, 4, 5, 6];
    let paths = vec![vec![0, 2, 5], vec![0, 1, 3], vec![0, 2, 5], vec![0, 2, 6]];
    let pred: Vec<u32> = paths.iter().map(|p| *p.last().unwrap()).collect();

    let report = metrics::evaluate(&truth, &pred, &tax, Some((&paths, &tax)))?;
    print!("{}", report.summary_text());
    print!("{}", report.per_class_csv());
    print!("{}", report.levelwise_csv());

    println!("distance 3 ↔ 6 = {}", tax.distance(3, 6)?);
    println!("hierarchical scores: {:?}", metrics::hier_f1(&truth, &pred, &tax)?);
    Ok(())
}
