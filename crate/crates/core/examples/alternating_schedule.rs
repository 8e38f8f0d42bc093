// The fine-to-coarse batch schedule and the alternative training modes.
//
// cargo run --example alternating_schedule

use hecvl::trainer::{schedule_level, Levels, TrainConfig, TrainMode};
use hecvl::Level;

fn runs(cfg: &TrainConfig) -> Vec<(Level, u64)> {
    let mut out: Vec<(Level, u64)> = Vec::new();
    for i in 0..cfg.total_batches() {
        let level = cfg.level_at(i);
        match out.last_mut() {
            Some((l, n)) if *l == level => *n += 1,
            _ => out.push((level, 1)),
        }
    }
    out
}

pub fn run_example() -> hecvl::Result<()> {
    let period: Vec<Level> = (0..155).map(|i| schedule_level(i, 25, 15, 115)).collect();
    let count = |l| period.iter().filter(|x| **x == l).count();
    println!(
        "one period: {} clip, {} phase, {} video",
        count(Level::Clip),
        count(Level::Phase),
        count(Level::Video)
    );

    let base = TrainConfig {
        cycles: 2,
        ..TrainConfig::default()
    };
    println!("hecvl:      {:?}", runs(&base));
    let seq = TrainConfig {
        mode: TrainMode::Sequential,
        ..base.clone()
    };
    println!("sequential: {:?}", runs(&seq));
    let clip_phase = TrainConfig {
        levels: Levels {
            clip: true,
            phase: true,
            video: false,
        },
        ..base.clone()
    };
    println!("clip+phase: {:?}", runs(&clip_phase));
    let single = TrainConfig {
        mode: TrainMode::Single,
        ..base
    };
    println!("single:     {:?}", runs(&single));
    Ok(())
}

#[allow(dead_code)]
fn main() -> hecvl::Result<()> {
    run_example()
}
