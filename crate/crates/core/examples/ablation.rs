// Trains the clip-only, clip+phase, single-space and full variants from one
// seed and prints the comparison table.
//
// cargo run --release --example ablation

use hecvl::cli::{ablate, render_ablation, RunConfig};
use hecvl::corpus::generate_synthetic;

pub fn run_example() -> hecvl::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.train.cycles = 20;
    let corpus = generate_synthetic(&cfg.generator)?;
    let (train, test) = corpus.split_holdout(cfg.eval.holdout)?;
    let results = ablate(&cfg.train, &train, &test, &cfg.prompts()?)?;
    let rows: Vec<_> = results.into_iter().map(|(row, _)| row).collect();
    print!("{}", render_ablation(&rows));
    Ok(())
}

#[allow(dead_code)]
fn main() -> hecvl::Result<()> {
    run_example()
}
