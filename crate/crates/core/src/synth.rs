//! Seeded synthetic material: one-bar motifs and canonical development
//! transforms, each constructed so the labeler's rules type it unambiguously.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clip::{
    ChordEvent, ChordQuality, Clip, MotifLabel, NoteEvent, VariantLabel, VariantType, DEFAULT_VELOCITY, MAX_MOTIF_TICKS,
    TICKS_PER_BAR,
};

pub const LOW_PITCH: u8 = 55;
pub const HIGH_PITCH: u8 = 76;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    Copy,
    /// Shift every pitch by a nonzero number of semitones.
    Transpose(i8),
    /// Same rhythm, some trends kept and some changed (TMR in [0.2, 0.6)).
    Perturb,
    /// One extra onset between two motif notes.
    Expand,
    /// First or last note dropped.
    Compress,
    /// Mirror every interval around the first pitch.
    Invert,
}

impl Transform {
    pub fn variant_type(self) -> VariantType {
        match self {
            Transform::Copy => VariantType::Repetition,
            Transform::Transpose(_) => VariantType::Progression,
            Transform::Perturb => VariantType::Transformation,
            Transform::Expand | Transform::Compress => VariantType::ExpansionCompression,
            Transform::Invert => VariantType::Inversion,
        }
    }

    /// A transform of the given type with randomized parameters.
    pub fn random_for<R: Rng + ?Sized>(kind: VariantType, rng: &mut R) -> Transform {
        match kind {
            VariantType::Repetition => Transform::Copy,
            VariantType::Progression => {
                let s = rng.gen_range(1..=5i8);
                Transform::Transpose(if rng.gen_bool(0.5) { s } else { -s })
            }
            VariantType::Transformation => Transform::Perturb,
            VariantType::ExpansionCompression => {
                if rng.gen_bool(0.5) {
                    Transform::Expand
                } else {
                    Transform::Compress
                }
            }
            VariantType::Inversion => Transform::Invert,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifShape {
    pub min_notes: usize,
    pub max_notes: usize,
}

impl Default for MotifShape {
    fn default() -> Self {
        Self { min_notes: 3, max_notes: 6 }
    }
}

/// A one-bar motif on the eighth grid starting on the downbeat, with no
/// repeated adjacent pitches.
pub fn random_motif<R: Rng + ?Sized>(rng: &mut R, shape: MotifShape) -> Vec<NoteEvent> {
    let n = rng.gen_range(shape.min_notes..=shape.max_notes.min(8));
    let mut slots: Vec<u32> = (1..8).map(|i| i * 2).collect();
    slots.shuffle(rng);
    let mut onsets: Vec<u32> = std::iter::once(0).chain(slots.into_iter().take(n - 1)).collect();
    onsets.sort_unstable();

    let mut pitches = Vec::with_capacity(n);
    let mut p = rng.gen_range(LOW_PITCH + 4..=HIGH_PITCH - 4);
    for _ in 0..n {
        pitches.push(p);
        loop {
            let step = rng.gen_range(1..=4u8);
            let up = rng.gen_bool(0.5);
            let next = if up { p.saturating_add(step) } else { p.saturating_sub(step) };
            if (LOW_PITCH..=HIGH_PITCH).contains(&next) {
                p = next;
                break;
            }
        }
    }
    onsets
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let next = onsets.get(i + 1).copied().unwrap_or(TICKS_PER_BAR);
            let dur = if rng.gen_bool(0.25) && next - s > 1 { next - s - 1 } else { next - s };
            NoteEvent::new(s, dur, pitches[i])
        })
        .collect()
}

/// Applies a transform to a motif given relative to tick 0. The result is
/// also relative to tick 0 and fits in one bar.
pub fn apply<R: Rng + ?Sized>(transform: Transform, motif: &[NoteEvent], rng: &mut R) -> Vec<NoteEvent> {
    match transform {
        Transform::Copy => motif.to_vec(),
        Transform::Transpose(shift) => motif
            .iter()
            .map(|n| NoteEvent { pitch: (n.pitch as i16 + shift as i16).clamp(0, 127) as u8, ..*n })
            .collect(),
        Transform::Invert => {
            let axis = motif[0].pitch as i16;
            motif.iter().map(|n| NoteEvent { pitch: (2 * axis - n.pitch as i16).clamp(0, 127) as u8, ..*n }).collect()
        }
        Transform::Perturb => perturb(motif, rng),
        Transform::Expand => {
            let gaps: Vec<usize> = (0..motif.len())
                .filter(|&i| {
                    let next = motif.get(i + 1).map_or(TICKS_PER_BAR, |n| n.start);
                    next - motif[i].start >= 2
                })
                .collect();
            let i = gaps[rng.gen_range(0..gaps.len())];
            let mut out = motif.to_vec();
            out[i].duration = 1;
            let next = motif.get(i + 1).map_or(TICKS_PER_BAR, |n| n.start);
            let start = motif[i].start + 1;
            out.insert(i + 1, NoteEvent::new(start, next - start, motif[i].pitch));
            out
        }
        Transform::Compress => {
            assert!(motif.len() >= 3, "compression needs at least three notes");
            let mut out = motif.to_vec();
            if rng.gen_bool(0.5) {
                out.remove(0);
            } else {
                out.pop();
            }
            out
        }
    }
}

fn perturb<R: Rng + ?Sized>(motif: &[NoteEvent], rng: &mut R) -> Vec<NoteEvent> {
    let trends: Vec<i8> =
        motif.windows(2).map(|w| (w[1].pitch as i16 - w[0].pitch as i16).signum() as i8).collect();
    let m = trends.len();
    let keep_count = ((0.4 * m as f64).floor() as usize).max(1);
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(rng);
    let keep: Vec<bool> = (0..m).map(|i| idx[..keep_count].contains(&i)).collect();

    let mut out = motif.to_vec();
    let mut p = motif[0].pitch as i16;
    for i in 0..m {
        let sign = if keep[i] {
            trends[i]
        } else {
            let choices: Vec<i8> = [-1, 0, 1].into_iter().filter(|&s| s != trends[i]).collect();
            choices[rng.gen_range(0..choices.len())]
        };
        p += sign as i16 * rng.gen_range(1..=3);
        out[i + 1].pitch = p.clamp(0, 127) as u8;
    }
    out
}

fn shifted(notes: &[NoteEvent], by: u32) -> impl Iterator<Item = NoteEvent> + '_ {
    notes.iter().map(move |n| NoteEvent { start: n.start + by, ..*n })
}

/// Two bars: the motif (labeled) followed by its variant (labeled with the
/// transform's type).
pub fn pair_clip(motif: &[NoteEvent], variant: &[NoteEvent], kind: VariantType) -> Clip {
    let notes = shifted(motif, 0).chain(shifted(variant, TICKS_PER_BAR)).collect();
    Clip::with_bars(
        2,
        notes,
        vec![],
        vec![MotifLabel::new(0, TICKS_PER_BAR)],
        vec![VariantLabel::new(kind, TICKS_PER_BAR, 2 * TICKS_PER_BAR)],
    )
    .expect("motif and variant occupy separate bars")
}

/// Motif-variant pair (both relative to tick 0) for one transform.
pub fn transform_pair<R: Rng + ?Sized>(
    rng: &mut R,
    transform: Transform,
    shape: MotifShape,
) -> (Vec<NoteEvent>, Vec<NoteEvent>) {
    let shape = if transform == Transform::Compress { MotifShape { min_notes: shape.min_notes.max(3), ..shape } } else { shape };
    let motif = random_motif(rng, shape);
    let variant = apply(transform, &motif, rng);
    (motif, variant)
}

/// A bar of unrelated material on the sixteenth grid.
pub fn random_bar<R: Rng + ?Sized>(rng: &mut R) -> Vec<NoteEvent> {
    let n = rng.gen_range(1..=6);
    let mut slots: Vec<u32> = (0..TICKS_PER_BAR).collect();
    slots.shuffle(rng);
    let mut onsets: Vec<u32> = slots.into_iter().take(n).collect();
    onsets.sort_unstable();
    onsets
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let next = onsets.get(i + 1).copied().unwrap_or(TICKS_PER_BAR);
            NoteEvent::new(s, next - s, rng.gen_range(LOW_PITCH..=HIGH_PITCH))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhraseConfig {
    pub bars: u32,
    /// Probability that a bar after the motif holds a variant.
    pub variant_rate: f64,
    /// At most one region per variant type.
    pub distinct_types: bool,
}

impl Default for PhraseConfig {
    fn default() -> Self {
        Self { bars: 8, variant_rate: 0.6, distinct_types: true }
    }
}

/// A phrase: motif in bar 0, then variants of random types and free bars,
/// labeled by construction.
pub fn random_phrase<R: Rng + ?Sized>(rng: &mut R, config: &PhraseConfig) -> Clip {
    let motif = random_motif(rng, MotifShape::default());
    let mut notes: Vec<NoteEvent> = motif.clone();
    let mut variants = Vec::new();
    let mut unused: Vec<VariantType> = VariantType::ALL.to_vec();
    unused.shuffle(rng);
    for bar in 1..config.bars {
        let offset = bar * TICKS_PER_BAR;
        let pick = if rng.gen_bool(config.variant_rate) {
            if config.distinct_types {
                unused.pop()
            } else {
                Some(VariantType::ALL[rng.gen_range(0..5)])
            }
        } else {
            None
        };
        match pick {
            Some(kind) => {
                let v = apply(Transform::random_for(kind, rng), &motif, rng);
                notes.extend(shifted(&v, offset));
                variants.push(VariantLabel::new(kind, offset, offset + TICKS_PER_BAR));
            }
            None => notes.extend(shifted(&random_bar(rng), offset)),
        }
    }
    Clip::with_bars(config.bars, notes, vec![], vec![MotifLabel::new(0, TICKS_PER_BAR)], variants)
        .expect("bars are filled independently")
}

/// An unlabeled-variant clip for stressing the labeler: a motif of random
/// length and offset, followed by bars that are either transforms of it,
/// shifted copies, or unrelated material.
pub fn stress_clip<R: Rng + ?Sized>(rng: &mut R, bars: u32) -> Clip {
    let motif_len = [4u32, 8, 12, 16][rng.gen_range(0..4)];
    let full = random_motif(rng, MotifShape { min_notes: 3, max_notes: 6 });
    let motif: Vec<NoteEvent> = full
        .iter()
        .filter(|n| n.start < motif_len)
        .map(|n| NoteEvent { duration: n.duration.min(motif_len - n.start), ..*n })
        .collect();
    let motif = if motif.len() < 2 {
        vec![NoteEvent::new(0, 1, 60), NoteEvent::new(1, 1, 62)]
    } else {
        motif
    };
    let mut notes: Vec<NoteEvent> = motif.clone();
    let mut t = motif_len;
    let end = bars * TICKS_PER_BAR;
    while t < end {
        let choice = rng.gen_range(0..8);
        let chunk: Vec<NoteEvent> = match choice {
            0..=4 => {
                let kind = VariantType::ALL[choice];
                let tr = Transform::random_for(kind, rng);
                let no_room = tr == Transform::Expand
                    && !(0..motif.len()).any(|i| motif.get(i + 1).map_or(motif_len, |n| n.start) - motif[i].start >= 2);
                if (tr == Transform::Compress && motif.len() < 3) || no_room {
                    motif.clone()
                } else {
                    apply(tr, &motif, rng)
                        .into_iter()
                        .filter(|n| n.start < motif_len)
                        .map(|n| NoteEvent { duration: n.duration.min(motif_len - n.start).max(1), ..n })
                        .collect()
                }
            }
            5 => random_bar(rng).into_iter().filter(|n| n.start < motif_len).collect(),
            _ => Vec::new(),
        };
        let span = if choice == 6 { rng.gen_range(1..=motif_len) } else { motif_len };
        let span = span.min(end - t);
        notes.extend(
            chunk
                .into_iter()
                .filter(|n| n.start < span)
                .map(|n| NoteEvent { start: n.start + t, duration: n.duration.min(span - n.start), ..n }),
        );
        t += span;
    }
    Clip::with_bars(bars, notes, vec![], vec![MotifLabel::new(0, motif_len)], vec![])
        .expect("chunks are laid out back to back")
}

/// Shape of an arbitrary valid clip from [`random_clip`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipShape {
    pub max_bars: u32,
    pub chords: bool,
    pub labels: bool,
    /// Random velocities instead of the default.
    pub velocities: bool,
}

impl Default for ClipShape {
    fn default() -> Self {
        Self { max_bars: 8, chords: true, labels: true, velocities: false }
    }
}

/// An arbitrary valid clip: monophonic melody over the full pitch range,
/// non-overlapping chords, and disjoint motif/variant regions, every event
/// at most two bars long.
pub fn random_clip<R: Rng + ?Sized>(rng: &mut R, shape: ClipShape) -> Clip {
    let bars = rng.gen_range(1..=shape.max_bars.max(1));
    let span = bars * TICKS_PER_BAR;
    let spans = |rng: &mut R, max_gap: u32| {
        let mut out = Vec::new();
        let mut t = rng.gen_range(0..=max_gap);
        while t < span {
            let len = rng.gen_range(1..=(span - t).min(MAX_MOTIF_TICKS));
            out.push((t, len));
            t += len + rng.gen_range(0..=max_gap);
        }
        out
    };
    let melody: Vec<NoteEvent> = spans(rng, 4)
        .into_iter()
        .map(|(s, d)| {
            let velocity = if shape.velocities { rng.gen_range(1..=127) } else { DEFAULT_VELOCITY };
            NoteEvent { start: s, duration: d, pitch: rng.gen_range(0..=127), velocity }
        })
        .collect();
    let chords: Vec<ChordEvent> = if shape.chords {
        spans(rng, 8)
            .into_iter()
            .map(|(s, d)| ChordEvent {
                start: s,
                duration: d,
                root: rng.gen_range(0..12),
                quality: ChordQuality::ALL[rng.gen_range(0..ChordQuality::ALL.len())],
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut motifs = Vec::new();
    let mut variants = Vec::new();
    if shape.labels {
        for (s, d) in spans(rng, 16) {
            match rng.gen_range(0..6) {
                0 => motifs.push(MotifLabel::new(s, s + d)),
                j => variants.push(VariantLabel::new(VariantType::ALL[j - 1], s, s + d)),
            }
        }
    }
    Clip::with_bars(bars, melody, chords, motifs, variants).expect("generated events are disjoint and in span")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeler::{label_variants, LabelerConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn motifs_are_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let m = random_motif(&mut rng, MotifShape::default());
            assert_eq!(m[0].start, 0);
            assert!(m.windows(2).all(|w| w[0].end() <= w[1].start && w[0].pitch != w[1].pitch));
            assert!(m.last().unwrap().end() <= TICKS_PER_BAR);
        }
    }

    #[test]
    fn every_transform_is_labeled_as_built() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for kind in VariantType::ALL {
            for _ in 0..100 {
                let tr = Transform::random_for(kind, &mut rng);
                let (m, v) = transform_pair(&mut rng, tr, MotifShape::default());
                let clip = pair_clip(&m, &v, kind);
                let got = label_variants(&clip, &clip.motif_labels()[0], &LabelerConfig::default()).unwrap();
                assert_eq!(got.len(), 1, "{tr:?}");
                assert_eq!(got[0].kind, kind, "{tr:?} {m:?} {v:?}");
            }
        }
    }

    #[test]
    fn phrases_use_distinct_types() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let c = random_phrase(&mut rng, &PhraseConfig::default());
            let mut kinds: Vec<_> = c.variant_labels().iter().map(|v| v.kind).collect();
            let n = kinds.len();
            kinds.dedup();
            kinds.sort();
            kinds.dedup();
            assert_eq!(kinds.len(), n);
        }
    }

    #[test]
    fn stress_clips_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let c = stress_clip(&mut rng, 8);
            assert_eq!(c.bars(), 8);
            assert!(c.motif_labels()[0].note_count >= 2);
        }
    }
}
