//! Seeded training material: fragment pairs for the branches and phrase
//! examples with ground-truth variants in the encoder input.

use motif_core::clip::TICKS_PER_BAR;
use motif_core::synth::{apply, random_motif, random_phrase, transform_pair, MotifShape, PhraseConfig, Transform};
use motif_core::{Clip, NoteEvent, Token, VariantType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::branch::{fragment_bars, fragment_content, fragment_tokens, region_notes};
use crate::phrase::PhraseExample;
use crate::MgmError;

pub type FragmentPair = (Vec<Token>, Vec<Token>);

/// One-bar motif/variant fragment pairs built by `transform`.
pub fn pairs_with(
    seed: u64,
    n: usize,
    mut transform: impl FnMut(&mut ChaCha8Rng) -> Transform,
) -> Result<Vec<FragmentPair>, MgmError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let tr = transform(&mut rng);
            let (m, v) = transform_pair(&mut rng, tr, MotifShape::default());
            Ok((fragment_tokens(&m, 1)?, fragment_tokens(&v, 1)?))
        })
        .collect()
}

/// Pairs for the branch of one type, transform parameters randomized.
pub fn branch_pairs(seed: u64, kind: VariantType, n: usize) -> Result<Vec<FragmentPair>, MgmError> {
    pairs_with(seed, n, |rng| Transform::random_for(kind, rng))
}

/// Fragment pairs for every labeled variant in `clips`, grouped by type.
pub fn pairs_from_clips(clips: &[Clip]) -> Result<[Vec<FragmentPair>; 5], MgmError> {
    let mut out: [Vec<FragmentPair>; 5] = Default::default();
    for clip in clips {
        let Some(m) = clip.motif_labels().first() else { continue };
        let motif = fragment_tokens(&region_notes(clip, m.start, m.end), fragment_bars(m.end - m.start))?;
        for v in clip.variant_labels() {
            let variant = fragment_tokens(&region_notes(clip, v.start, v.end), fragment_bars(v.end - v.start))?;
            out[v.kind.index()].push((motif.clone(), variant));
        }
    }
    Ok(out)
}

/// A labeled phrase whose encoder input carries one ground-truth variant of
/// every type; the phrase itself uses a random subset of them.
pub fn oracle_phrase(rng: &mut ChaCha8Rng, config: &PhraseConfig) -> Result<(Clip, PhraseExample), MgmError> {
    let clip = random_phrase(rng, config);
    let ex = PhraseExample::from_clip(&clip)?;
    let motif = region_notes(&clip, 0, TICKS_PER_BAR);
    let mut contents: [Vec<Token>; 5] = Default::default();
    for j in VariantType::ALL {
        let present = clip.variant_labels().iter().find(|v| v.kind == j);
        let notes: Vec<NoteEvent> = match present {
            Some(v) => region_notes(&clip, v.start, v.end),
            None => apply(Transform::random_for(j, rng), &motif, rng),
        };
        contents[j.index()] = fragment_content(&fragment_tokens(&notes, 1)?).to_vec();
    }
    let motif_content = fragment_content(&fragment_tokens(&motif, 1)?).to_vec();
    let ex = PhraseExample::new(&motif_content, contents.each_ref().map(|c| c.as_slice()), ex.target)?;
    Ok((clip, ex))
}

/// `n` oracle phrases; examples whose regions outgrow the length bound are
/// skipped.
pub fn oracle_phrases(seed: u64, n: usize, config: &PhraseConfig) -> Vec<(Clip, PhraseExample)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < 10 * n + 10 {
        attempts += 1;
        if let Ok(x) = oracle_phrase(&mut rng, config) {
            out.push(x);
        }
    }
    out
}

/// A single one-bar motif fragment.
pub fn random_motif_fragment(rng: &mut impl Rng) -> Result<Vec<Token>, MgmError> {
    fragment_tokens(&random_motif(rng, MotifShape::default()), 1)
}
