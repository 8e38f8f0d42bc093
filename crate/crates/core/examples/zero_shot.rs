// End to end: train on 75% of the default synthetic corpus and classify the
// clips of the held-out videos by their nearest class prompt.
//
// cargo run --release --example zero_shot

use hecvl::corpus::{generate_synthetic, synthetic_prompts, GeneratorConfig};
use hecvl::rng::substream;
use hecvl::trainer::{TrainConfig, Trainer};
use hecvl::zeroshot::{evaluate, PromptSet};

pub fn run_example() -> hecvl::Result<()> {
    let gen = GeneratorConfig::default();
    let corpus = generate_synthetic(&gen)?;
    let (train, test) = corpus.split_holdout(0.25)?;
    let prompts = PromptSet::from_pairs(synthetic_prompts(&gen, 2, 6, &mut substream(0, "prompts"))?)?;

    let cfg = TrainConfig::default();
    let mut trainer = Trainer::new(cfg.clone())?;
    let r = evaluate(trainer.params(), &test, &prompts, cfg.k_clip)?;
    println!("untrained: accuracy {:.3}, macro F1 {:.3}", r.accuracy, r.macro_f1);

    let per_cycle = cfg.batches_per_cycle();
    for cycle in 1..=cfg.cycles {
        trainer.run_until(&train, cycle * per_cycle, |_| {})?;
        if cycle % 10 == 0 {
            let r = evaluate(trainer.params(), &test, &prompts, cfg.k_clip)?;
            println!(
                "cycle {cycle:>2}: accuracy {:.3}, macro F1 {:.3}",
                r.accuracy, r.macro_f1
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> hecvl::Result<()> {
    run_example()
}
