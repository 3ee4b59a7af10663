//! Trains one-vs-rest models for every node of a clean hierarchy and
//! compares greedy top-down descent with flat arg-max over the leaves.

use taxoflat::metrics;
use taxoflat::synth::{self, SynthConfig};
use taxoflat::topdown::{self, HierTrainOptions};

fn main() -> taxoflat::error::Result<()> {
    let d = synth::planted(&SynthConfig {
        seed: 1,
        train_per_class: 30,
        test_per_class: 30,
        ..Default::default()
    })?;
    let (train, valid) = taxoflat::data::split_train_validation(&d.train, 0.9, 1)?;
    let opts = HierTrainOptions {
        c_grid: vec![1.0, 10.0, 100.0],
        jobs: Some(4),
        ..Default::default()
    };

    for (name, tax) in [("clean", &d.clean_taxonomy), ("corrupted", &d.taxonomy)] {
        let hm = topdown::train_hierarchy(tax, &train, &valid, &opts)?;
        let leaf_models = hm.leaf_models();
        let truth = d.test.labels();
        let td: Vec<u32> = d.test.examples.iter().map(|e| hm.predict_topdown(&e.x)).collect();
        let flat: Vec<u32> = d
            .test
            .examples
            .iter()
            .map(|e| topdown::predict_flat(&leaf_models, &e.x).unwrap())
            .collect();
        let agree = td.iter().zip(&flat).filter(|(a, b)| a == b).count();
        println!(
            "{name:>9} hierarchy: top-down µF1 {:.3}, flat µF1 {:.3}, agreement {agree}/{}",
            metrics::micro_f1(&truth, &td, tax.leaves())?,
            metrics::micro_f1(&truth, &flat, tax.leaves())?,
            truth.len()
        );
        let chosen: Vec<String> = hm.models.values().take(6).map(|m| format!("{}:C={}", m.node, m.c_used)).collect();
        println!("          selected C (first nodes): {}", chosen.join(" "));
    }
    let x = &d.test.examples[7 * 30].x;
    let hm = topdown::train_hierarchy(&d.taxonomy, &train, &valid, &opts)?;
    println!("decision path for a leaf-107 example: {:?}", hm.predict_path(x));
    Ok(())
}
