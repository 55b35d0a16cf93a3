use motif_core::metrics::{variant_distance, variant_proportion};
use motif_core::synth::{random_phrase, PhraseConfig};
use motif_core::{Clip, MotifLabel, VariantLabel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn corpus(seed: u64, n: usize) -> Vec<Clip> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_phrase(&mut rng, &PhraseConfig { variant_rate: 0.8, ..PhraseConfig::default() })).collect()
}

fn shift_regions(c: &Clip, by: u32) -> Clip {
    let motifs = c.motif_labels().iter().map(|m| MotifLabel::new(m.start + by, m.end + by)).collect();
    let variants = c.variant_labels().iter().map(|v| VariantLabel::new(v.kind, v.start + by, v.end + by)).collect();
    Clip::with_bars(c.bars() + by.div_ceil(16), c.melody().to_vec(), vec![], motifs, variants).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn proportions_sum_to_one(seed in any::<u64>()) {
        let c = corpus(seed, 5);
        if let Ok(vp) = variant_proportion(&c) {
            prop_assert!((vp.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn distance_is_translation_invariant(seed in any::<u64>(), by in 0u32..64) {
        let c = corpus(seed, 3);
        let moved: Vec<Clip> = c.iter().map(|x| shift_regions(x, by)).collect();
        prop_assert_eq!(variant_distance(&c).ok(), variant_distance(&moved).ok());
    }

    #[test]
    fn duplicating_the_corpus_changes_nothing(seed in any::<u64>()) {
        let c = corpus(seed, 4);
        let doubled: Vec<Clip> = c.iter().chain(c.iter()).cloned().collect();
        prop_assert_eq!(variant_proportion(&c).ok(), variant_proportion(&doubled).ok());
        let (a, b) = (variant_distance(&c).ok(), variant_distance(&doubled).ok());
        let close = match (a, b) {
            (Some(x), Some(y)) => (x - y).abs() < 1e-12,
            (None, None) => true,
            _ => false,
        };
        prop_assert!(close);
    }
}
