use motif_core::ttmm::{
    motif_spec, va_to_features, FeatureConfig, Key, LexiconProvider, Mode, VaPoint, text_to_va,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAJOR: [u8; 8] = [0, 2, 4, 5, 7, 9, 11, 12];
const MINOR: [u8; 8] = [0, 2, 3, 5, 7, 8, 10, 12];

/// Expected (nd, nad) half-open bins written out per arousal band.
fn bins(arousal: f64) -> ((f64, f64), (f64, f64)) {
    if arousal <= 3.0 {
        ((0.0, 3.5), (1.2, 2.0))
    } else if arousal <= 6.0 {
        ((3.5, 5.0), (0.8, 1.2))
    } else {
        ((5.0, 8.0), (0.0, 0.8))
    }
}

#[test]
fn ten_thousand_motifs() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10_000 {
        let va = VaPoint::new(rng.gen_range(1.0..=9.0), rng.gen_range(0.01..=9.0)).unwrap();
        let key = Key(rng.gen_range(48..=72));
        let f = va_to_features(&va, &FeatureConfig::default(), &mut rng).unwrap();
        let ((nd_lo, nd_hi), (nad_lo, nad_hi)) = bins(va.arousal);
        assert!(f.nd > nd_lo && f.nd <= nd_hi, "{va:?} {f:?}");
        assert!(f.nad > nad_lo && f.nad <= nad_hi, "{va:?} {f:?}");
        assert_eq!(f.mode, if va.valence <= 5.0 { Mode::Major } else { Mode::Minor });

        let spec = motif_spec(&f, key, &mut rng);
        assert!(spec.non >= 2);
        assert_eq!(spec.pitches.len(), spec.non);
        assert_eq!(spec.durations.iter().sum::<u32>(), 16);
        assert!(spec.durations.iter().all(|&d| d >= 1));
        let offsets = if f.mode == Mode::Major { MAJOR } else { MINOR };
        assert!(spec.pitches.iter().all(|p| offsets.iter().any(|o| key.0 + o == *p)));
        let clip = spec.to_clip();
        assert_eq!(clip.melody().len(), spec.non);
        assert_eq!(clip.motif_labels()[0].note_count as usize, spec.non);
    }
}

#[test]
fn lexicon_single_hit() {
    let va = text_to_va("so sad", &LexiconProvider::builtin()).unwrap();
    assert_eq!((va.valence, va.arousal), (7.5, 2.5));
}

proptest! {
    #[test]
    fn same_seed_same_motif(v in 1.0f64..=9.0, a in 0.1f64..=9.0, seed in any::<u64>()) {
        let va = VaPoint::new(v, a).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = va_to_features(&va, &FeatureConfig::default(), &mut rng).unwrap();
            motif_spec(&f, Key(60), &mut rng)
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn mode_ignores_arousal(v in 1.0f64..=9.0, a in 0.1f64..=9.0, b in 0.1f64..=9.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = FeatureConfig::default();
        let fa = va_to_features(&VaPoint::new(v, a).unwrap(), &cfg, &mut rng).unwrap();
        let fb = va_to_features(&VaPoint::new(v, b).unwrap(), &cfg, &mut rng).unwrap();
        prop_assert_eq!(fa.mode, fb.mode);
    }
}
