//! Quantized melody clips and their motif/variant annotations.
//!
//! All times are integer ticks on a sixteenth-note grid (4 ticks per beat,
//! 16 ticks per 4/4 bar). A [`Clip`] is immutable once built; every
//! constructor sorts and validates its contents.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TICKS_PER_BEAT: u32 = 4;
pub const BEATS_PER_BAR: u32 = 4;
pub const TICKS_PER_BAR: u32 = TICKS_PER_BEAT * BEATS_PER_BAR;
/// Motifs span at most two bars.
pub const MAX_MOTIF_TICKS: u32 = 2 * TICKS_PER_BAR;
pub const DEFAULT_VELOCITY: u8 = 100;
/// Only 4/4 material is supported.
pub const TIME_SIGNATURE: (u8, u8) = (4, 4);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NoteEvent {
    pub start: u32,
    pub duration: u32,
    pub pitch: u8,
    pub velocity: u8,
}

impl NoteEvent {
    pub fn new(start: u32, duration: u32, pitch: u8) -> Self {
        Self { start, duration, pitch, velocity: DEFAULT_VELOCITY }
    }

    pub fn end(&self) -> u32 {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChordQuality {
    Major,
    Minor,
    Diminished,
    Augmented,
    Dominant7,
    Major7,
    Minor7,
    Sus4,
}

impl ChordQuality {
    pub const ALL: [ChordQuality; 8] = [
        ChordQuality::Major,
        ChordQuality::Minor,
        ChordQuality::Diminished,
        ChordQuality::Augmented,
        ChordQuality::Dominant7,
        ChordQuality::Major7,
        ChordQuality::Minor7,
        ChordQuality::Sus4,
    ];

    /// Semitone offsets above the root, root position.
    pub fn intervals(self) -> &'static [u8] {
        match self {
            ChordQuality::Major => &[0, 4, 7],
            ChordQuality::Minor => &[0, 3, 7],
            ChordQuality::Diminished => &[0, 3, 6],
            ChordQuality::Augmented => &[0, 4, 8],
            ChordQuality::Dominant7 => &[0, 4, 7, 10],
            ChordQuality::Major7 => &[0, 4, 7, 11],
            ChordQuality::Minor7 => &[0, 3, 7, 10],
            ChordQuality::Sus4 => &[0, 5, 7],
        }
    }

    pub fn from_intervals(intervals: &[u8]) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.intervals() == intervals)
    }

    pub fn name(self) -> &'static str {
        match self {
            ChordQuality::Major => "maj",
            ChordQuality::Minor => "min",
            ChordQuality::Diminished => "dim",
            ChordQuality::Augmented => "aug",
            ChordQuality::Dominant7 => "7",
            ChordQuality::Major7 => "maj7",
            ChordQuality::Minor7 => "min7",
            ChordQuality::Sus4 => "sus4",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChordEvent {
    pub start: u32,
    pub duration: u32,
    /// Pitch class of the root, 0 = C.
    pub root: u8,
    pub quality: ChordQuality,
}

impl ChordEvent {
    pub fn end(&self) -> u32 {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MotifLabel {
    pub start: u32,
    pub end: u32,
    /// Melody notes whose onset lies in `[start, end)`. Recomputed by [`Clip`].
    pub note_count: u32,
}

impl MotifLabel {
    pub fn new(start: u32, end: u32) -> Self {
        Self { start, end, note_count: 0 }
    }

    pub fn len(&self) -> u32 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// The five motif development types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum VariantType {
    Repetition = 1,
    Progression = 2,
    Transformation = 3,
    ExpansionCompression = 4,
    Inversion = 5,
}

impl VariantType {
    pub const ALL: [VariantType; 5] = [
        VariantType::Repetition,
        VariantType::Progression,
        VariantType::Transformation,
        VariantType::ExpansionCompression,
        VariantType::Inversion,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(j: u8) -> Option<Self> {
        match j {
            1 => Some(VariantType::Repetition),
            2 => Some(VariantType::Progression),
            3 => Some(VariantType::Transformation),
            4 => Some(VariantType::ExpansionCompression),
            5 => Some(VariantType::Inversion),
            _ => None,
        }
    }

    /// Zero-based slot, convenient for `[T; 5]` tables.
    pub fn index(self) -> usize {
        self as usize - 1
    }
}

impl From<VariantType> for u8 {
    fn from(v: VariantType) -> u8 {
        v.number()
    }
}

impl TryFrom<u8> for VariantType {
    type Error = String;

    fn try_from(j: u8) -> Result<Self, Self::Error> {
        VariantType::from_number(j).ok_or_else(|| format!("variant type {j} is not in 1..=5"))
    }
}

impl fmt::Display for VariantType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            VariantType::Repetition => "repetition",
            VariantType::Progression => "progression",
            VariantType::Transformation => "transformation",
            VariantType::ExpansionCompression => "expansion/compression",
            VariantType::Inversion => "inversion",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VariantLabel {
    pub start: u32,
    pub end: u32,
    pub kind: VariantType,
}

impl VariantLabel {
    pub fn new(kind: VariantType, start: u32, end: u32) -> Self {
        Self { start, end, kind }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ClipError {
    #[error("note {0:?} is invalid (duration >= 1, pitch <= 127, velocity 1..=127)")]
    InvalidNote(NoteEvent),
    #[error("melody is polyphonic; overlapping notes: {}", format_overlaps(.0))]
    Polyphonic(Vec<(NoteEvent, NoteEvent)>),
    #[error("chord {0:?} is invalid")]
    InvalidChord(ChordEvent),
    #[error("chord track overlaps at tick {0}")]
    OverlappingChords(u32),
    #[error("label [{start}, {end}) is empty or outside the clip span of {span} ticks")]
    LabelOutOfSpan { start: u32, end: u32, span: u32 },
    #[error("content ends at tick {end} but the clip has only {bars} bars")]
    ContentPastEnd { end: u32, bars: u32 },
}

fn format_overlaps(pairs: &[(NoteEvent, NoteEvent)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("[{}+{} p{}] / [{}+{} p{}]", a.start, a.duration, a.pitch, b.start, b.duration, b.pitch))
        .collect::<Vec<_>>()
        .join(", ")
}

/// A monophonic melody with an optional chord track and label regions.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Clip {
    bars: u32,
    melody: Vec<NoteEvent>,
    chords: Vec<ChordEvent>,
    motif_labels: Vec<MotifLabel>,
    variant_labels: Vec<VariantLabel>,
}

impl Clip {
    /// Builds a clip just long enough to hold all of its content.
    pub fn new(
        melody: Vec<NoteEvent>,
        chords: Vec<ChordEvent>,
        motif_labels: Vec<MotifLabel>,
        variant_labels: Vec<VariantLabel>,
    ) -> Result<Self, ClipError> {
        let end = content_end(&melody, &chords, &motif_labels, &variant_labels);
        Self::with_bars(end.div_ceil(TICKS_PER_BAR), melody, chords, motif_labels, variant_labels)
    }

    pub fn with_bars(
        bars: u32,
        mut melody: Vec<NoteEvent>,
        mut chords: Vec<ChordEvent>,
        mut motif_labels: Vec<MotifLabel>,
        mut variant_labels: Vec<VariantLabel>,
    ) -> Result<Self, ClipError> {
        melody.sort();
        chords.sort();
        motif_labels.sort();
        variant_labels.sort();

        for n in &melody {
            if n.duration == 0 || n.pitch > 127 || n.velocity == 0 || n.velocity > 127 {
                return Err(ClipError::InvalidNote(*n));
            }
        }
        let overlaps: Vec<_> = melody
            .windows(2)
            .filter(|w| w[1].start < w[0].end())
            .map(|w| (w[0], w[1]))
            .collect();
        if !overlaps.is_empty() {
            return Err(ClipError::Polyphonic(overlaps));
        }
        for c in &chords {
            if c.duration == 0 || c.root >= 12 {
                return Err(ClipError::InvalidChord(*c));
            }
        }
        if let Some(w) = chords.windows(2).find(|w| w[1].start < w[0].end()) {
            return Err(ClipError::OverlappingChords(w[1].start));
        }

        let span = bars * TICKS_PER_BAR;
        let end = content_end(&melody, &chords, &[], &[]);
        if end > span {
            return Err(ClipError::ContentPastEnd { end, bars });
        }
        let label_spans = motif_labels
            .iter()
            .map(|m| (m.start, m.end))
            .chain(variant_labels.iter().map(|v| (v.start, v.end)));
        for (start, end) in label_spans {
            if end <= start || end > span {
                return Err(ClipError::LabelOutOfSpan { start, end, span });
            }
        }
        for m in &mut motif_labels {
            m.note_count = count_onsets(&melody, m.start, m.end) as u32;
        }

        Ok(Self { bars, melody, chords, motif_labels, variant_labels })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn bars(&self) -> u32 {
        self.bars
    }

    /// Length in ticks.
    pub fn span(&self) -> u32 {
        self.bars * TICKS_PER_BAR
    }

    pub fn melody(&self) -> &[NoteEvent] {
        &self.melody
    }

    pub fn chords(&self) -> &[ChordEvent] {
        &self.chords
    }

    pub fn motif_labels(&self) -> &[MotifLabel] {
        &self.motif_labels
    }

    pub fn variant_labels(&self) -> &[VariantLabel] {
        &self.variant_labels
    }

    pub fn is_empty(&self) -> bool {
        self.bars == 0
    }

    /// Melody notes with onset in `[start, end)`.
    pub fn notes_in(&self, start: u32, end: u32) -> &[NoteEvent] {
        let lo = self.melody.partition_point(|n| n.start < start);
        let hi = self.melody.partition_point(|n| n.start < end);
        &self.melody[lo..hi.max(lo)]
    }

    /// Same musical content with a different label set.
    pub fn relabeled(
        &self,
        motif_labels: Vec<MotifLabel>,
        variant_labels: Vec<VariantLabel>,
    ) -> Result<Self, ClipError> {
        Self::with_bars(self.bars, self.melody.clone(), self.chords.clone(), motif_labels, variant_labels)
    }

    /// Same musical content with no labels.
    pub fn unlabeled(&self) -> Self {
        Self { motif_labels: Vec::new(), variant_labels: Vec::new(), ..self.clone() }
    }
}

fn content_end(
    melody: &[NoteEvent],
    chords: &[ChordEvent],
    motifs: &[MotifLabel],
    variants: &[VariantLabel],
) -> u32 {
    melody
        .iter()
        .map(NoteEvent::end)
        .chain(chords.iter().map(ChordEvent::end))
        .chain(motifs.iter().map(|m| m.end))
        .chain(variants.iter().map(|v| v.end))
        .max()
        .unwrap_or(0)
}

fn count_onsets(melody: &[NoteEvent], start: u32, end: u32) -> usize {
    melody.iter().filter(|n| n.start >= start && n.start < end).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_and_counts_motif_notes() {
        let clip = Clip::new(
            vec![NoteEvent::new(4, 4, 62), NoteEvent::new(0, 4, 60)],
            vec![],
            vec![MotifLabel::new(0, 16)],
            vec![],
        )
        .unwrap();
        assert_eq!(clip.melody()[0].pitch, 60);
        assert_eq!(clip.motif_labels()[0].note_count, 2);
        assert_eq!(clip.bars(), 1);
    }

    #[test]
    fn rejects_overlapping_melody() {
        let err = Clip::new(vec![NoteEvent::new(0, 5, 60), NoteEvent::new(4, 4, 62)], vec![], vec![], vec![])
            .unwrap_err();
        match err {
            ClipError::Polyphonic(pairs) => assert_eq!(pairs.len(), 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_label_outside_span() {
        let err = Clip::with_bars(1, vec![NoteEvent::new(0, 4, 60)], vec![], vec![MotifLabel::new(0, 20)], vec![])
            .unwrap_err();
        assert!(matches!(err, ClipError::LabelOutOfSpan { .. }));
    }

    #[test]
    fn notes_in_window() {
        let clip = Clip::new((0..8).map(|i| NoteEvent::new(i * 4, 4, 60 + i as u8)).collect(), vec![], vec![], vec![])
            .unwrap();
        let w = clip.notes_in(4, 12);
        assert_eq!(w.iter().map(|n| n.pitch).collect::<Vec<_>>(), vec![61, 62]);
        assert!(clip.notes_in(40, 50).is_empty());
    }

    #[test]
    fn variant_type_numbers() {
        for j in 1..=5u8 {
            assert_eq!(VariantType::from_number(j).unwrap().number(), j);
        }
        assert!(VariantType::from_number(0).is_none());
        assert!(VariantType::from_number(6).is_none());
    }
}
