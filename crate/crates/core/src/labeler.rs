//! Automatic variant labeling against a hand-labeled motif.
//!
//! A window as long as the motif slides over the melody, starting where the
//! motif ends and advancing one bar at a time. A window becomes a variant when
//! its relative onset list equals the motif's, or when one onset list is a
//! proper ordered subsequence of the other. Equal-onset windows are typed by
//! pitch match ratio (PMR) and pitch-trend match ratio (TMR); sub/superset
//! windows whose trend lists nest the same way are expansions/compressions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clip::{Clip, MotifLabel, NoteEvent, VariantLabel, VariantType, MAX_MOTIF_TICKS, TICKS_PER_BAR, TICKS_PER_BEAT};

pub const HIGH_RATIO: f64 = 0.6;
pub const LOW_RATIO: f64 = 0.2;

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("a pitch trend needs at least 2 pitches, got {0}")]
    TooFewPitches(usize),
    #[error("motif [{start}, {end}) covers {notes} note(s); at least 2 are required")]
    MotifTooShort { start: u32, end: u32, notes: usize },
    #[error("start-time lists differ ({motif} vs {window} onsets); ratios are undefined")]
    StartTimesDiffer { motif: usize, window: usize },
}

/// Sign of each successive interval: +1 up, 0 repeated, -1 down.
pub fn pitch_trend(pitches: &[u8]) -> Result<Vec<i8>, LabelError> {
    if pitches.len() < 2 {
        return Err(LabelError::TooFewPitches(pitches.len()));
    }
    Ok(pitches.windows(2).map(|w| (w[1] as i16 - w[0] as i16).signum() as i8).collect())
}

fn trend_of(pitches: &[u8]) -> Vec<i8> {
    pitch_trend(pitches).unwrap_or_default()
}

/// Onsets, pitches and trends of the notes starting inside a window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowView {
    pub win_start: u32,
    pub win_len: u32,
    /// Onsets relative to `win_start`, strictly increasing.
    pub starts: Vec<u32>,
    pub pitches: Vec<u8>,
    pub trend: Vec<i8>,
}

impl WindowView {
    pub fn of(clip: &Clip, win_start: u32, win_len: u32) -> Self {
        Self::from_notes(clip.notes_in(win_start, win_start + win_len), win_start, win_len)
    }

    pub fn from_notes(notes: &[NoteEvent], win_start: u32, win_len: u32) -> Self {
        let pitches: Vec<u8> = notes.iter().map(|n| n.pitch).collect();
        Self {
            win_start,
            win_len,
            starts: notes.iter().map(|n| n.start - win_start).collect(),
            trend: trend_of(&pitches),
            pitches,
        }
    }

    pub fn note_count(&self) -> usize {
        self.starts.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchRatios {
    pub pmr: f64,
    pub tmr: f64,
}

fn proportion_equal<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

/// Positional pitch and trend agreement between a motif and an equal-onset window.
pub fn match_ratios(motif: &WindowView, window: &WindowView) -> Result<MatchRatios, LabelError> {
    if motif.starts != window.starts {
        return Err(LabelError::StartTimesDiffer { motif: motif.note_count(), window: window.note_count() });
    }
    Ok(MatchRatios {
        pmr: proportion_equal(&motif.pitches, &window.pitches),
        tmr: proportion_equal(&motif.trend, &window.trend),
    })
}

/// Threshold cascade for equal-onset windows.
pub fn classify_ratios(r: MatchRatios) -> VariantType {
    if r.tmr >= HIGH_RATIO {
        if r.pmr >= HIGH_RATIO {
            VariantType::Repetition
        } else {
            VariantType::Progression
        }
    } else if r.tmr >= LOW_RATIO {
        VariantType::Transformation
    } else {
        VariantType::Inversion
    }
}

/// True when `short` can be obtained from `long` by deleting elements.
pub fn is_subsequence<T: PartialEq>(short: &[T], long: &[T]) -> bool {
    let mut it = long.iter();
    short.iter().all(|x| it.any(|y| y == x))
}

fn is_proper_subsequence<T: PartialEq>(short: &[T], long: &[T]) -> bool {
    short.len() < long.len() && is_subsequence(short, long)
}

/// Variant type of a window relative to a motif, or `None` when the window
/// is not a variant.
pub fn classify_window(motif: &WindowView, window: &WindowView) -> Option<VariantType> {
    if window.note_count() < 2 {
        return None;
    }
    if motif.starts == window.starts {
        return match_ratios(motif, window).ok().map(classify_ratios);
    }
    let expansion = is_proper_subsequence(&motif.starts, &window.starts) && is_subsequence(&motif.trend, &window.trend);
    let compression =
        is_proper_subsequence(&window.starts, &motif.starts) && is_subsequence(&window.trend, &motif.trend);
    (expansion || compression).then_some(VariantType::ExpansionCompression)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WindowStep {
    #[default]
    Bar,
    HalfBar,
}

impl WindowStep {
    pub fn ticks(self) -> u32 {
        match self {
            WindowStep::Bar => TICKS_PER_BAR,
            WindowStep::HalfBar => TICKS_PER_BAR / 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelerConfig {
    pub step: WindowStep,
}

fn overlaps(a_start: u32, a_end: u32, b_start: u32, b_end: u32) -> bool {
    a_start < b_end && b_start < a_end
}

/// Scans the clip after `motif` and types every matching window.
pub fn label_variants(clip: &Clip, motif: &MotifLabel, config: &LabelerConfig) -> Result<Vec<VariantLabel>, LabelError> {
    let mut out = Vec::new();
    scan(clip, motif, config, &[], &mut out)?;
    Ok(out)
}

/// Labels every motif of a clip in order. Windows never overlap a motif
/// label or an earlier variant.
pub fn label_clip(clip: &Clip, config: &LabelerConfig) -> Result<Vec<VariantLabel>, LabelError> {
    let mut out = Vec::new();
    let blocked: Vec<(u32, u32)> = clip.motif_labels().iter().map(|m| (m.start, m.end)).collect();
    for motif in clip.motif_labels() {
        scan(clip, motif, config, &blocked, &mut out)?;
    }
    out.sort();
    Ok(out)
}

fn scan(
    clip: &Clip,
    motif: &MotifLabel,
    config: &LabelerConfig,
    blocked: &[(u32, u32)],
    out: &mut Vec<VariantLabel>,
) -> Result<(), LabelError> {
    let win_len = motif.end - motif.start;
    let motif_view = WindowView::of(clip, motif.start, win_len);
    if motif_view.note_count() < 2 {
        return Err(LabelError::MotifTooShort { start: motif.start, end: motif.end, notes: motif_view.note_count() });
    }
    let step = config.step.ticks();
    let mut win_start = motif.end;
    while win_start + win_len <= clip.span() {
        let win_end = win_start + win_len;
        let taken = out.iter().any(|v| overlaps(v.start, v.end, win_start, win_end))
            || blocked.iter().any(|&(s, e)| overlaps(s, e, win_start, win_end));
        if !taken {
            let window = WindowView::of(clip, win_start, win_len);
            if let Some(kind) = classify_window(&motif_view, &window) {
                out.push(VariantLabel::new(kind, win_start, win_end));
            }
        }
        win_start += step;
    }
    Ok(())
}

/// Every other place in the clip where the motif recurs note for note
/// (same relative onsets, durations and pitches), at any tick offset.
pub fn detect_repetitions(clip: &Clip, motif: &MotifLabel) -> Vec<MotifLabel> {
    let len = motif.end - motif.start;
    let reference: Vec<(u32, u32, u8)> =
        clip.notes_in(motif.start, motif.end).iter().map(|n| (n.start - motif.start, n.duration, n.pitch)).collect();
    if reference.is_empty() || clip.span() < len {
        return Vec::new();
    }
    let mut found = Vec::new();
    for s in 0..=clip.span() - len {
        if s == motif.start {
            continue;
        }
        let notes = clip.notes_in(s, s + len);
        if notes.len() == reference.len()
            && notes.iter().zip(&reference).all(|(n, &(rs, d, p))| n.start - s == rs && n.duration == d && n.pitch == p)
        {
            let mut label = MotifLabel::new(s, s + len);
            label.note_count = notes.len() as u32;
            found.push(label);
        }
    }
    found
}

/// Motif annotation heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifCriteria {
    pub note_count: usize,
    pub within_two_bars: bool,
    /// Some onset falls on a beat.
    pub has_stressed_note: bool,
}

impl MotifCriteria {
    pub fn check(clip: &Clip, motif: &MotifLabel) -> Self {
        let notes = clip.notes_in(motif.start, motif.end);
        Self {
            note_count: notes.len(),
            within_two_bars: motif.end - motif.start <= MAX_MOTIF_TICKS,
            has_stressed_note: notes.iter().any(|n| n.start % TICKS_PER_BEAT == 0),
        }
    }

    pub fn is_satisfied(&self) -> bool {
        self.note_count >= 2 && self.within_two_bars && self.has_stressed_note
    }
}
