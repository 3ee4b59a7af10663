use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use taxoflat::bundle::TAXONOMY_FILE;
use taxoflat::cli::{self, EvaluateArgs};
use taxoflat::error::Error;
use taxoflat::pipeline::{Method, RunConfig};
use taxoflat::synth::SynthConfig;

/// Top-down hierarchical classification with inconsistent-node flattening.
#[derive(Parser)]
#[command(name = "taxoflat", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a model bundle.
    Train(RunArgs),
    /// Predict with a saved bundle.
    Predict {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Predictions file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predictions file.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        /// Labelled data the predictions were made on.
        #[arg(long)]
        test: PathBuf,
        /// Original hierarchy.
        #[arg(long)]
        hierarchy: PathBuf,
        /// Hierarchy for hierarchical measures (defaults to --hierarchy).
        #[arg(long)]
        eval_hierarchy: Option<PathBuf>,
        /// Bundle whose taxonomy produced the decision paths.
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select inconsistent nodes and write the report without retraining.
    Flatten(RunArgs),
    /// Validation macro F1 over the psi grid.
    Sweep(RunArgs),
    /// Write the planted-inconsistency synthetic dataset.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        train_per_class: usize,
        #[arg(long, default_value_t = 40)]
        test_per_class: usize,
        #[arg(long, default_value_t = 0.6)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    hierarchy: PathBuf,
    #[arg(long)]
    train: PathBuf,
    /// TDLR, TLF, BLF, MLF, LevelINF, GlobalINF, FlatLR or ECOC.
    #[arg(long, default_value = "TDLR")]
    method: String,
    /// Fixed psi for INF methods (skips the sweep).
    #[arg(long)]
    psi: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    psi_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    c_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train fraction of the train/validation split.
    #[arg(long, default_value_t = 0.9)]
    split: f64,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    codeword_bits: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let method: Method = self.method.parse()?;
        let mut cfg = RunConfig::new(method);
        cfg.psi = self.psi;
        if let Some(g) = &self.psi_grid {
            cfg.psi_grid = g.clone();
        }
        if let Some(g) = &self.c_grid {
            cfg.c_grid = g.clone();
        }
        cfg.seed = self.seed;
        cfg.split_ratio = self.split;
        cfg.jobs = self.jobs;
        if self.codeword_bits.is_some() {
            cfg.codeword_bits = self.codeword_bits;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cmd: Cmd) -> Result<(), Error> {
    match cmd {
        Cmd::Train(a) => {
            let run = cli::cmd_train(&a.config()?, &a.hierarchy, &a.train, &a.out)?;
            println!(
                "trained {} ({} nodes removed) -> {}",
                run.config.method,
                run.plan.removed.len(),
                a.out.display()
            );
        }
        Cmd::Predict { bundle, test, out } => {
            let preds = cli::cmd_predict(&bundle, &test, &out)?;
            println!("{} predictions -> {}", preds.len(), out.display());
        }
        Cmd::Evaluate {
            predictions,
            test,
            hierarchy,
            eval_hierarchy,
            bundle,
            out,
        } => {
            let model_hierarchy = bundle.map(|b| b.join(TAXONOMY_FILE));
            let report = cli::cmd_evaluate(&EvaluateArgs {
                predictions: &predictions,
                truth: &test,
                hierarchy: &hierarchy,
                eval_hierarchy: eval_hierarchy.as_deref(),
                model_hierarchy: model_hierarchy.as_deref(),
                out: &out,
            })?;
            print!("{}", report.summary_text());
        }
        Cmd::Flatten(a) => {
            let flat = cli::cmd_flatten(&a.config()?, &a.hierarchy, &a.train, &a.out)?;
            println!("flattened taxonomy has {} nodes -> {}", flat.len(), a.out.display());
        }
        Cmd::Sweep(a) => {
            let s = cli::cmd_sweep(&a.config()?, &a.hierarchy, &a.train, &a.out)?;
            println!("best psi {} (validation macro F1 {})", s.best_psi, s.best_score);
        }
        Cmd::Synth {
            seed,
            train_per_class,
            test_per_class,
            noise,
            out,
        } => {
            let cfg = SynthConfig {
                seed,
                train_per_class,
                test_per_class,
                noise,
                ..SynthConfig::default()
            };
            let d = cli::cmd_synth(&cfg, &out)?;
            println!("planted node {} -> {}", d.corrupted_node, out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("taxoflat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
