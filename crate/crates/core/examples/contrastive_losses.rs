// Evaluates the clip, phase, video and single-space contrastive losses on
// batches sampled from a synthetic corpus.
//
// cargo run --example contrastive_losses

use hecvl::corpus::{
    generate_synthetic, sample_clip_batch, sample_phase_batch, sample_video_batch, GeneratorConfig,
};
use hecvl::encoders::{ModelConfig, ModelParams};
use hecvl::objectives::{compute_loss, two_term_loss_from_similarities, LossInput, Temperature};
use hecvl::rng::substream;
use hecvl::numerics::Matrix;

pub fn run_example() -> hecvl::Result<()> {
    let corpus = generate_synthetic(&GeneratorConfig {
        videos: 6,
        ..GeneratorConfig::default()
    })?;
    let params = ModelParams::init(&ModelConfig::default(), &mut substream(0, "init"))?;
    let tau = Temperature::default();
    let mut rng = substream(0, "batches");

    let clip = sample_clip_batch(&corpus, 8, 4, &mut rng)?;
    let phase = sample_phase_batch(&corpus, 4, 8, &mut rng)?;
    let video = sample_video_batch(&corpus, 3, 16, &mut rng)?;
    let single = LossInput::Single {
        clip: &clip,
        phase: &phase,
        video: &video,
    };
    for input in [
        LossInput::Clip(&clip),
        LossInput::Phase(&phase),
        LossInput::Video(&video),
        single,
    ] {
        let v = compute_loss(input, &params, tau)?;
        println!(
            "{:<6} loss {:>8.4}  matched cos {:>6.3}  unmatched cos {:>6.3}",
            input.level(),
            v.loss,
            v.pos_sim,
            v.neg_sim
        );
    }

    // Identical similarities everywhere: each softmax is uniform.
    let flat = Matrix::filled(4, 4, 0.3);
    let l = two_term_loss_from_similarities(&flat, &flat, tau)?;
    println!("uniform 4x4 similarities: {l:.6} (-ln(2/4) = {:.6})", -(0.5f64).ln());
    assert!((l + (0.5f64).ln()).abs() < 1e-12);
    Ok(())
}

#[allow(dead_code)]
fn main() -> hecvl::Result<()> {
    run_example()
}
