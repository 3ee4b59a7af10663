//! Error-correcting output codes as a flat baseline, for a few code lengths.
//!
//! Classes here sit on a ring, so a random bipartition of them is rarely
//! linearly separable and each bit learner is weak; longer codes recover
//! some of the loss.

use taxoflat::ecoc::{self, CodeBook};
use taxoflat::linreg::TrainConfig;
use taxoflat::metrics;
use taxoflat::synth::{self, SynthConfig};

fn main() -> taxoflat::error::Result<()> {
    let d = synth::planted(&SynthConfig {
        seed: 4,
        ..Default::default()
    })?;
    let classes = d.taxonomy.leaves();
    let truth = d.test.labels();
    for bits in [32, 64, 256] {
        let book = CodeBook::random(classes, bits, 4)?;
        let model = ecoc::ecoc_train(&d.train, &book, &TrainConfig::with_c(10.0), None)?;
        let pred: Vec<u32> = d.test.examples.iter().map(|e| ecoc::ecoc_predict(&model, &book, &e.x)).collect();
        let degenerate = model.degenerate.iter().filter(|&&b| b).count();
        println!(
            "{bits:>4} bits: µF1 {:.3} MF1 {:.3} ({degenerate} constant columns)",
            metrics::micro_f1(&truth, &pred, classes)?,
            metrics::macro_f1(&truth, &pred, classes)?
        );
    }
    let book = CodeBook::random(classes, 32, 4)?;
    let text = book.to_text();
    println!("codebook header:\n{}", text.lines().take(4).collect::<Vec<_>>().join("\n"));
    assert_eq!(CodeBook::parse(&text)?, book);
    Ok(())
}
