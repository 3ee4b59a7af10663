//! Every method on the planted-inconsistency synthetic: test µF1, MF1,
//! hierarchical F1, tree error and the nodes each method removed.

use taxoflat::cli::evaluate_predictions;
use taxoflat::pipeline::{run_train, Method, RunConfig};
use taxoflat::synth::{self, SynthConfig};

fn main() -> taxoflat::error::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let d = synth::planted(&SynthConfig {
        seed,
        ..Default::default()
    })?;
    println!("planted node {}, seed {seed}", d.corrupted_node);
    println!("{:<10} {:>6} {:>6} {:>6} {:>6}  removed", "method", "µF1", "MF1", "hF1", "TE");
    for method in Method::ALL {
        let mut cfg = RunConfig::new(method);
        cfg.seed = seed;
        cfg.c_grid = vec![10.0];
        let run = match run_train(&cfg, &d.taxonomy, &d.train) {
            Ok(r) => r,
            Err(e) => {
                println!("{:<10} n/a ({e})", method.name());
                continue;
            }
        };
        let preds = run.predictor.predict_all(&d.test);
        let r = evaluate_predictions(&preds, &d.test.labels(), &d.taxonomy, &run.taxonomy)?;
        println!(
            "{:<10} {:>6.3} {:>6.3} {:>6.3} {:>6.3}  {:?}",
            method.name(),
            r.micro_f1,
            r.macro_f1,
            r.hf1,
            r.te,
            run.plan.removed
        );
    }
    Ok(())
}
