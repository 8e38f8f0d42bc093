// Interrupts a training run, saves a checkpoint to disk, resumes it, and
// compares against the uninterrupted run.
//
// cargo run --example checkpoint_resume

use hecvl::corpus::{generate_synthetic, GeneratorConfig};
use hecvl::trainer::{load_checkpoint, save_checkpoint, TrainConfig, Trainer};

pub fn run_example() -> hecvl::Result<()> {
    let corpus = generate_synthetic(&GeneratorConfig {
        videos: 12,
        ..GeneratorConfig::default()
    })?;
    let cfg = TrainConfig {
        m: 5,
        n: 3,
        l: 10,
        cycles: 4,
        ..TrainConfig::default()
    };
    let total = cfg.total_batches();

    let mut straight = Trainer::new(cfg.clone())?;
    straight.run_until(&corpus, total, |_| {})?;

    let mut first = Trainer::new(cfg)?;
    first.run_until(&corpus, total / 2, |_| {})?;
    let path = std::env::temp_dir().join(format!("hecvl-example-{}.hecv", std::process::id()));
    save_checkpoint(&first.checkpoint(), &path)?;
    let ckpt = load_checkpoint(&path)?;
    std::fs::remove_file(&path)?;
    println!("checkpoint {} at batch {}", ckpt.id()?, ckpt.batch_index);

    let mut resumed = Trainer::from_checkpoint(ckpt)?;
    let tail = resumed.run_until(&corpus, total, |e| {
        if e.batch % 18 == 17 {
            println!("batch {:>3} {:<5} loss {:.4}", e.batch, e.level, e.loss);
        }
    })?;
    println!("resumed {} batches", tail.len());
    assert_eq!(resumed.params().digest(), straight.params().digest());
    println!("parameters match the uninterrupted run: {}", resumed.params().digest());
    Ok(())
}

#[allow(dead_code)]
fn main() -> hecvl::Result<()> {
    run_example()
}
