//! Snapping raw (fractional-tick) material onto the sixteenth grid.

use crate::clip::{ChordEvent, ChordQuality, Clip, MotifLabel, NoteEvent, VariantLabel, VariantType, TICKS_PER_BAR};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawNote {
    pub start: f64,
    pub duration: f64,
    pub pitch: u8,
    pub velocity: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawChord {
    pub start: f64,
    pub duration: f64,
    pub root: u8,
    pub quality: ChordQuality,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRegion {
    pub start: f64,
    pub end: f64,
}

/// Clip content in fractional ticks, as read from a MIDI file with an
/// arbitrary pulse resolution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawClip {
    /// Last event time of the source, in ticks.
    pub end: f64,
    pub melody: Vec<RawNote>,
    pub chords: Vec<RawChord>,
    pub motifs: Vec<RawRegion>,
    pub variants: Vec<(VariantType, RawRegion)>,
}

impl From<&Clip> for RawClip {
    fn from(clip: &Clip) -> Self {
        RawClip {
            end: clip.span() as f64,
            melody: clip
                .melody()
                .iter()
                .map(|n| RawNote {
                    start: n.start as f64,
                    duration: n.duration as f64,
                    pitch: n.pitch,
                    velocity: n.velocity,
                })
                .collect(),
            chords: clip
                .chords()
                .iter()
                .map(|c| RawChord {
                    start: c.start as f64,
                    duration: c.duration as f64,
                    root: c.root,
                    quality: c.quality,
                })
                .collect(),
            motifs: clip
                .motif_labels()
                .iter()
                .map(|m| RawRegion { start: m.start as f64, end: m.end as f64 })
                .collect(),
            variants: clip
                .variant_labels()
                .iter()
                .map(|v| (v.kind, RawRegion { start: v.start as f64, end: v.end as f64 }))
                .collect(),
        }
    }
}

fn snap(t: f64) -> u32 {
    t.max(0.0).round() as u32
}

fn snap_len(d: f64) -> u32 {
    snap(d).max(1)
}

fn snap_region(r: RawRegion) -> (u32, u32) {
    let start = snap(r.start);
    (start, snap(r.end).max(start + 1))
}

/// Rounds every onset and length to the nearest tick (lengths at least one
/// tick) and restores monophony by cutting a note at the next onset. When two
/// notes share an onset the higher one is kept.
pub fn quantize_clip(raw: &RawClip) -> Clip {
    let mut melody: Vec<NoteEvent> = raw
        .melody
        .iter()
        .map(|n| NoteEvent {
            start: snap(n.start),
            duration: snap_len(n.duration),
            pitch: n.pitch.min(127),
            velocity: n.velocity.clamp(1, 127),
        })
        .collect();
    melody.sort_by_key(|n| (n.start, n.pitch));
    let melody = truncate_overlaps(melody, |n| n.start, |n| &mut n.duration);

    let mut chords: Vec<ChordEvent> = raw
        .chords
        .iter()
        .map(|c| ChordEvent {
            start: snap(c.start),
            duration: snap_len(c.duration),
            root: c.root % 12,
            quality: c.quality,
        })
        .collect();
    chords.sort_by_key(|c| c.start);
    let chords = truncate_overlaps(chords, |c| c.start, |c| &mut c.duration);

    let motifs: Vec<MotifLabel> = raw
        .motifs
        .iter()
        .map(|&r| {
            let (s, e) = snap_region(r);
            MotifLabel::new(s, e)
        })
        .collect();
    let variants: Vec<VariantLabel> = raw
        .variants
        .iter()
        .map(|&(kind, r)| {
            let (s, e) = snap_region(r);
            VariantLabel::new(kind, s, e)
        })
        .collect();

    let end = melody
        .iter()
        .map(NoteEvent::end)
        .chain(chords.iter().map(ChordEvent::end))
        .chain(motifs.iter().map(|m| m.end))
        .chain(variants.iter().map(|v| v.end))
        .chain(std::iter::once(snap(raw.end)))
        .max()
        .unwrap_or(0);
    Clip::with_bars(end.div_ceil(TICKS_PER_BAR), melody, chords, motifs, variants)
        .expect("quantized content satisfies clip invariants")
}

fn truncate_overlaps<T>(
    sorted: Vec<T>,
    start: impl Fn(&T) -> u32,
    duration: impl Fn(&mut T) -> &mut u32,
) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(sorted.len());
    for item in sorted {
        let onset = start(&item);
        if let Some(prev) = out.last_mut() {
            let prev_start = start(prev);
            if prev_start == onset {
                out.pop();
            } else {
                let d = duration(prev);
                if prev_start + *d > onset {
                    *d = onset - prev_start;
                }
            }
        }
        out.push(item);
    }
    out
}
