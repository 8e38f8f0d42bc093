use proptest::prelude::*;

use hecvl::corpus::{generate_synthetic, read_corpus, write_corpus, GeneratorConfig};
use hecvl::encoders::{ModelConfig, ModelParams};
use hecvl::numerics::{softmax_rows, Matrix};
use hecvl::rng::substream;
use hecvl::trainer::{schedule_level, TrainConfig, Trainer};
use hecvl::zeroshot::compute_metrics;
use hecvl::Level;

fn matrix() -> impl Strategy<Value = Matrix> {
    (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
        prop::collection::vec(-50.0f64..50.0, r * c)
            .prop_map(move |v| Matrix::from_vec(r, c, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn softmax_rows_are_distributions(m in matrix(), tau in 0.01f64..2.0) {
        let s = softmax_rows(&m, tau).unwrap();
        for r in 0..s.rows() {
            let row = s.row(r);
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn schedule_counts_per_cycle(m in 0u64..30, n in 0u64..30, l in 0u64..30, cycle in 0u64..5) {
        prop_assume!(m + n + l > 0);
        let period = m + n + l;
        let mut counts = [0u64; 3];
        for i in cycle * period..(cycle + 1) * period {
            match schedule_level(i, m, n, l) {
                Level::Clip => counts[0] += 1,
                Level::Phase => counts[1] += 1,
                Level::Video => counts[2] += 1,
                Level::Single => prop_assert!(false),
            }
        }
        prop_assert_eq!(counts, [m, n, l]);
    }

    #[test]
    fn confusion_rows_sum_to_support(
        pairs in prop::collection::vec((0usize..5, 0usize..5), 1..60)
    ) {
        let (truth, pred): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let classes: Vec<usize> = (0..5).collect();
        let r = compute_metrics(&pred, &truth, &classes).unwrap();
        for (row, class) in r.confusion.iter().zip(&r.per_class) {
            prop_assert_eq!(row.iter().sum::<u64>(), class.support);
        }
        prop_assert_eq!(r.confusion.iter().flatten().sum::<u64>(), r.samples);
        prop_assert!((0.0..=1.0).contains(&r.macro_f1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn corpus_survives_jsonl_roundtrip(seed in any::<u64>(), videos in 1usize..5) {
        let corpus = generate_synthetic(&GeneratorConfig { videos, seed, ..GeneratorConfig::default() }).unwrap();
        let mut buf = Vec::new();
        write_corpus(&corpus, &mut buf).unwrap();
        prop_assert_eq!(read_corpus(&buf[..]).unwrap(), corpus);
    }

    #[test]
    fn checkpoint_survives_byte_roundtrip(seed in any::<u64>(), steps in 0u64..4) {
        let corpus = generate_synthetic(&GeneratorConfig { videos: 6, seed, ..GeneratorConfig::default() }).unwrap();
        let cfg = TrainConfig { seed, m: 1, n: 1, l: 1, cycles: 2, batch_clip: 2, batch_phase: 2, batch_video: 2, ..TrainConfig::default() };
        let mut trainer = Trainer::new(cfg).unwrap();
        trainer.run_until(&corpus, steps, |_| {}).unwrap();
        let ckpt = trainer.checkpoint();
        let back = hecvl::trainer::Checkpoint::from_bytes(&ckpt.to_bytes().unwrap()).unwrap();
        prop_assert_eq!(&back, &ckpt);
        prop_assert_eq!(back.id().unwrap(), ckpt.id().unwrap());
    }

    #[test]
    fn init_is_seed_deterministic(seed in any::<u64>()) {
        let cfg = ModelConfig::default();
        let a = ModelParams::init(&cfg, &mut substream(seed, "init")).unwrap();
        let b = ModelParams::init(&cfg, &mut substream(seed, "init")).unwrap();
        prop_assert_eq!(a, b);
    }
}
