// Generates a small hierarchical corpus, inspects one video, and round-trips
// it through the JSON Lines format.
//
// cargo run --example synthetic_corpus

use hecvl::corpus::{generate_synthetic, read_corpus, write_corpus, GeneratorConfig};

pub fn run_example() -> hecvl::Result<()> {
    let cfg = GeneratorConfig {
        videos: 6,
        phase_classes: 4,
        clips_per_phase: 3,
        ..GeneratorConfig::default()
    };
    let corpus = generate_synthetic(&cfg)?;
    let counts = corpus.pair_counts();
    println!(
        "{} videos: {} clip pairs, {} phase pairs, {} video pairs",
        corpus.videos.len(),
        counts.clip,
        counts.phase,
        counts.video
    );
    assert_eq!((counts.clip, counts.phase, counts.video), (72, 24, 6));

    let video = &corpus.videos[0];
    for phase in &video.phases {
        println!(
            "video {} clips [{}, {}) class {} concept {:?}",
            video.video_id,
            phase.start,
            phase.end,
            phase.class,
            phase.concept.ids()
        );
    }

    let mut buf = Vec::new();
    write_corpus(&corpus, &mut buf)?;
    let back = read_corpus(buf.as_slice())?;
    assert_eq!(back, corpus);
    println!("{} bytes of JSON Lines, round trip exact", buf.len());

    let (train, test) = corpus.split_holdout(0.25)?;
    println!("train videos {}, held-out videos {}", train.videos.len(), test.videos.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> hecvl::Result<()> {
    run_example()
}
