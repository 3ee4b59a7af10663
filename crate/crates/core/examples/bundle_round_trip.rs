//! Saves a trained model bundle, reloads it and checks that predictions
//! match the in-memory model exactly.

use taxoflat::bundle::Bundle;
use taxoflat::pipeline::{run_train, Method, RunConfig};
use taxoflat::synth::{self, SynthConfig};

fn main() -> taxoflat::error::Result<()> {
    let d = synth::planted(&SynthConfig {
        train_per_class: 20,
        test_per_class: 10,
        ..Default::default()
    })?;
    let dir = std::env::temp_dir().join(format!("taxoflat-bundle-{}", std::process::id()));
    for method in [Method::Tdlr, Method::Ecoc] {
        let run = run_train(&RunConfig::new(method), &d.taxonomy, &d.train)?;
        let bundle = Bundle::from_run(&run);
        let path = dir.join(method.name());
        bundle.save(&path)?;
        let back = Bundle::load(&path)?;
        let same = d
            .test
            .examples
            .iter()
            .all(|e| back.predictor.predict(&e.x) == run.predictor.predict(&e.x));
        let files: Vec<&str> = bundle.render().keys().copied().collect();
        println!("{method}: {files:?}, identical predictions after reload: {same}");
    }
    let models = std::fs::read_to_string(dir.join("TDLR").join("models.txt")).unwrap_or_default();
    println!("{}", models.lines().take(2).collect::<Vec<_>>().join("\n"));
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}
