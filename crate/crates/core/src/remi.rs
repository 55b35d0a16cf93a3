//! REMI event tokens extended with motif/variant region markers.
//!
//! Layout of one bar: `Bar`, then for every tick that carries an event a
//! single `Position(p)` followed by, in order, a closing `MotifEnd`, an
//! opening `[Type(j)] MotifStart`, `Chord Duration` and `Pitch Duration`.
//! Regions that open on a bar's first tick are opened right after `Bar`,
//! before `Position(1)`; regions that close on a bar line are closed before
//! the next `Bar` (or `EOS`).
//!
//! A `MotifEnd` directly after a `Position` closes the region at that
//! position; anywhere else it closes at the end of the current bar.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::clip::{
    ChordEvent, ChordQuality, Clip, ClipError, MotifLabel, NoteEvent, VariantLabel, VariantType, TICKS_PER_BAR,
};

pub const POSITIONS: u8 = TICKS_PER_BAR as u8;
pub const MAX_DURATION: u8 = 32;
pub const DEFAULT_MAX_LEN: usize = 1024;
pub const VOCAB_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Bos,
    Eos,
    Bar,
    MotifStart,
    MotifEnd,
    Type(VariantType),
    /// 1-based position within the bar.
    Position(u8),
    Pitch(u8),
    /// Ticks, 1..=32.
    Duration(u8),
    Chord { root: u8, quality: ChordQuality },
}

const TYPE_BASE: usize = 5;
const POSITION_BASE: usize = TYPE_BASE + 5;
const PITCH_BASE: usize = POSITION_BASE + POSITIONS as usize;
const DURATION_BASE: usize = PITCH_BASE + 128;
const CHORD_BASE: usize = DURATION_BASE + MAX_DURATION as usize;
pub const VOCAB_SIZE: usize = CHORD_BASE + 12 * ChordQuality::ALL.len();

impl Token {
    pub fn index(self) -> usize {
        match self {
            Token::Bos => 0,
            Token::Eos => 1,
            Token::Bar => 2,
            Token::MotifStart => 3,
            Token::MotifEnd => 4,
            Token::Type(j) => TYPE_BASE + j.index(),
            Token::Position(p) => POSITION_BASE + p as usize - 1,
            Token::Pitch(p) => PITCH_BASE + p as usize,
            Token::Duration(d) => DURATION_BASE + d as usize - 1,
            Token::Chord { root, quality } => {
                let q = ChordQuality::ALL.iter().position(|&x| x == quality).unwrap();
                CHORD_BASE + root as usize * ChordQuality::ALL.len() + q
            }
        }
    }

    pub fn from_index(i: usize) -> Option<Token> {
        Some(match i {
            0 => Token::Bos,
            1 => Token::Eos,
            2 => Token::Bar,
            3 => Token::MotifStart,
            4 => Token::MotifEnd,
            i if i < POSITION_BASE => Token::Type(VariantType::from_number((i - TYPE_BASE + 1) as u8)?),
            i if i < PITCH_BASE => Token::Position((i - POSITION_BASE + 1) as u8),
            i if i < DURATION_BASE => Token::Pitch((i - PITCH_BASE) as u8),
            i if i < CHORD_BASE => Token::Duration((i - DURATION_BASE + 1) as u8),
            i if i < VOCAB_SIZE => {
                let k = i - CHORD_BASE;
                let n = ChordQuality::ALL.len();
                Token::Chord { root: (k / n) as u8, quality: ChordQuality::ALL[k % n] }
            }
            _ => return None,
        })
    }

    /// Column pair used in the vocabulary file.
    fn kind_arg(self) -> (&'static str, String) {
        match self {
            Token::Bos => ("BOS", "-".into()),
            Token::Eos => ("EOS", "-".into()),
            Token::Bar => ("Bar", "-".into()),
            Token::MotifStart => ("MotifStart", "-".into()),
            Token::MotifEnd => ("MotifEnd", "-".into()),
            Token::Type(j) => ("Type", j.number().to_string()),
            Token::Position(p) => ("Position", p.to_string()),
            Token::Pitch(p) => ("Pitch", p.to_string()),
            Token::Duration(d) => ("Duration", d.to_string()),
            Token::Chord { root, quality } => ("Chord", format!("{root}:{}", quality.name())),
        }
    }

    fn from_kind_arg(kind: &str, arg: &str) -> Option<Token> {
        let num = || arg.parse::<u8>().ok();
        let tok = match kind {
            "BOS" => Token::Bos,
            "EOS" => Token::Eos,
            "Bar" => Token::Bar,
            "MotifStart" => Token::MotifStart,
            "MotifEnd" => Token::MotifEnd,
            "Type" => Token::Type(VariantType::from_number(num()?)?),
            "Position" => Token::Position(num().filter(|p| (1..=POSITIONS).contains(p))?),
            "Pitch" => Token::Pitch(num().filter(|p| *p <= 127)?),
            "Duration" => Token::Duration(num().filter(|d| (1..=MAX_DURATION).contains(d))?),
            "Chord" => {
                let (r, q) = arg.split_once(':')?;
                let root = r.parse::<u8>().ok().filter(|r| *r < 12)?;
                Token::Chord { root, quality: ChordQuality::from_name(q)? }
            }
            _ => return None,
        };
        Some(tok)
    }

    pub fn is_region_marker(self) -> bool {
        matches!(self, Token::MotifStart | Token::MotifEnd | Token::Type(_))
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (k, a) = self.kind_arg();
        if a == "-" {
            write!(f, "{k}")
        } else {
            write!(f, "{k}({a})")
        }
    }
}

/// Every vocabulary entry in index order.
pub fn vocabulary() -> Vec<Token> {
    (0..VOCAB_SIZE).map(|i| Token::from_index(i).expect("index within vocabulary")).collect()
}

#[derive(Debug, Error, PartialEq)]
pub enum VocabError {
    #[error("missing or unsupported vocabulary header (expected `# remi-vocab {VOCAB_VERSION}`)")]
    Header,
    #[error("vocabulary line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("vocabulary has {0} entries, expected {VOCAB_SIZE}")]
    Size(usize),
}

/// Tab-separated `index kind argument` listing with a version header.
pub fn vocabulary_text() -> String {
    let mut s = format!("# remi-vocab {VOCAB_VERSION}\n");
    for (i, tok) in vocabulary().into_iter().enumerate() {
        let (k, a) = tok.kind_arg();
        s.push_str(&format!("{i}\t{k}\t{a}\n"));
    }
    s
}

/// Checks that a vocabulary file agrees entry by entry with this codec.
pub fn check_vocabulary_text(text: &str) -> Result<(), VocabError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == format!("# remi-vocab {VOCAB_VERSION}") => {}
        _ => return Err(VocabError::Header),
    }
    let mut count = 0;
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| VocabError::Line { line: n + 1, reason: reason.to_string() };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(bad("expected three tab-separated columns"));
        }
        let idx: usize = cols[0].parse().map_err(|_| bad("bad index"))?;
        let tok = Token::from_kind_arg(cols[1], cols[2]).ok_or_else(|| bad("unknown token"))?;
        if tok.index() != idx {
            return Err(bad(&format!("{tok} has index {} in this codec", tok.index())));
        }
        count += 1;
    }
    if count != VOCAB_SIZE {
        return Err(VocabError::Size(count));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq(pub Vec<Token>);

impl TokenSeq {
    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.0.iter().map(|t| t.index()).collect()
    }

    pub fn from_ids(ids: &[usize]) -> Option<Self> {
        ids.iter().map(|&i| Token::from_index(i)).collect::<Option<Vec<_>>>().map(TokenSeq)
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|t| t.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

impl FromStr for Token {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = match s.split_once('(') {
            Some((k, rest)) => (k, rest.strip_suffix(')').ok_or_else(|| format!("bad token `{s}`"))?),
            None => (s, "-"),
        };
        Token::from_kind_arg(kind, arg).ok_or_else(|| format!("bad token `{s}`"))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("note at tick {start} lasts {duration} ticks; durations must be 1..={MAX_DURATION}")]
    NoteDuration { start: u32, duration: u32 },
    #[error("chord at tick {start} lasts {duration} ticks; durations must be 1..={MAX_DURATION}")]
    ChordDuration { start: u32, duration: u32 },
    #[error("label regions [{0}, {1}) and [{2}, {3}) overlap; regions cannot nest")]
    OverlappingLabels(u32, u32, u32, u32),
    #[error("bars {first}..{last} cannot be split below {max_len} tokens without cutting a label region")]
    Unsplittable { first: u32, last: u32, max_len: usize },
}

#[derive(Debug, Clone, Copy)]
struct Region {
    start: u32,
    end: u32,
    kind: Option<VariantType>,
}

fn regions_of(clip: &Clip) -> Result<Vec<Region>, EncodeError> {
    let mut regions: Vec<Region> = clip
        .motif_labels()
        .iter()
        .map(|m| Region { start: m.start, end: m.end, kind: None })
        .chain(clip.variant_labels().iter().map(|v| Region { start: v.start, end: v.end, kind: Some(v.kind) }))
        .collect();
    regions.sort_by_key(|r| (r.start, r.end));
    for w in regions.windows(2) {
        if w[1].start < w[0].end {
            return Err(EncodeError::OverlappingLabels(w[0].start, w[0].end, w[1].start, w[1].end));
        }
    }
    Ok(regions)
}

fn open_region(out: &mut Vec<Token>, r: &Region) {
    if let Some(j) = r.kind {
        out.push(Token::Type(j));
    }
    out.push(Token::MotifStart);
}

/// Encodes a quantized clip as `BOS … EOS`.
pub fn encode(clip: &Clip) -> Result<TokenSeq, EncodeError> {
    for n in clip.melody() {
        if n.duration > MAX_DURATION as u32 {
            return Err(EncodeError::NoteDuration { start: n.start, duration: n.duration });
        }
    }
    for c in clip.chords() {
        if c.duration > MAX_DURATION as u32 {
            return Err(EncodeError::ChordDuration { start: c.start, duration: c.duration });
        }
    }
    let regions = regions_of(clip)?;

    let mut out = vec![Token::Bos];
    let (mut ni, mut ci) = (0, 0);
    let notes = clip.melody();
    let chords = clip.chords();
    for bar in 0..clip.bars() {
        let bar_start = bar * TICKS_PER_BAR;
        if regions.iter().any(|r| r.end == bar_start) {
            out.push(Token::MotifEnd);
        }
        out.push(Token::Bar);
        if let Some(r) = regions.iter().find(|r| r.start == bar_start) {
            open_region(&mut out, r);
        }
        for off in 0..TICKS_PER_BAR {
            let t = bar_start + off;
            let note = notes.get(ni).filter(|n| n.start == t);
            let chord = chords.get(ci).filter(|c| c.start == t);
            let (ending, starting) = if off == 0 {
                (None, None)
            } else {
                (regions.iter().find(|r| r.end == t), regions.iter().find(|r| r.start == t))
            };
            if note.is_none() && chord.is_none() && ending.is_none() && starting.is_none() {
                continue;
            }
            out.push(Token::Position(off as u8 + 1));
            if ending.is_some() {
                out.push(Token::MotifEnd);
            }
            if let Some(r) = starting {
                open_region(&mut out, r);
            }
            if let Some(c) = chord {
                out.push(Token::Chord { root: c.root, quality: c.quality });
                out.push(Token::Duration(c.duration as u8));
                ci += 1;
            }
            if let Some(n) = note {
                out.push(Token::Pitch(n.pitch));
                out.push(Token::Duration(n.duration as u8));
                ni += 1;
            }
        }
    }
    if regions.iter().any(|r| r.end == clip.span() && clip.bars() > 0) {
        out.push(Token::MotifEnd);
    }
    out.push(Token::Eos);
    Ok(TokenSeq(out))
}

#[derive(Debug, Error, PartialEq)]
pub enum DecodeErrorKind {
    #[error("sequence must start with BOS")]
    MissingBos,
    #[error("sequence must end with EOS")]
    MissingEos,
    #[error("token after EOS")]
    TrailingTokens,
    #[error("MotifStart is never closed")]
    DanglingMotifStart,
    #[error("MotifEnd outside any region")]
    UnopenedMotifEnd,
    #[error("MotifStart inside an open region")]
    NestedRegion,
    #[error("Type token not followed by MotifStart")]
    DanglingType,
    #[error("Pitch or Chord without a following Duration")]
    MissingDuration,
    #[error("Duration without a preceding Pitch or Chord")]
    StrayDuration,
    #[error("event before the first Bar")]
    BeforeFirstBar,
    #[error("Position does not advance within the bar")]
    PositionOrder,
    #[error("event token not preceded by a Position in this bar")]
    MissingPosition,
    #[error("unexpected {0}")]
    Unexpected(String),
    #[error("decoded material is not a valid clip: {0}")]
    Clip(ClipError),
}

#[derive(Debug, Error, PartialEq)]
#[error("decode error at token {index}: {kind}")]
pub struct DecodeError {
    pub index: usize,
    pub kind: DecodeErrorKind,
}

fn derr(index: usize, kind: DecodeErrorKind) -> DecodeError {
    DecodeError { index, kind }
}

/// One label region located inside a token sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionSpan {
    /// `None` for the motif, `Some(j)` for a variant region.
    pub kind: Option<VariantType>,
    /// Index of the `Type` token, if any.
    pub type_index: Option<usize>,
    /// Index of `MotifStart`.
    pub start: usize,
    /// Index of `MotifEnd` (inclusive).
    pub end: usize,
}

impl RegionSpan {
    /// Region type number: 0 for the motif, j for a type-j variant.
    pub fn type_number(&self) -> usize {
        self.kind.map_or(0, |k| k.number() as usize)
    }

    /// Tokens from MotifStart through MotifEnd.
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Structural check of region markers only; returns the regions in order.
pub fn region_spans(tokens: &[Token]) -> Result<Vec<RegionSpan>, DecodeError> {
    let mut spans = Vec::new();
    let mut open: Option<(Option<VariantType>, Option<usize>, usize)> = None;
    let mut pending_type: Option<(VariantType, usize)> = None;
    for (i, &tok) in tokens.iter().enumerate() {
        if let Some((_, ti)) = pending_type {
            if tok != Token::MotifStart {
                return Err(derr(ti, DecodeErrorKind::DanglingType));
            }
        }
        match tok {
            Token::Type(j) => {
                if open.is_some() {
                    return Err(derr(i, DecodeErrorKind::NestedRegion));
                }
                pending_type = Some((j, i));
            }
            Token::MotifStart => {
                if open.is_some() {
                    return Err(derr(i, DecodeErrorKind::NestedRegion));
                }
                let (kind, ti) = pending_type.take().map_or((None, None), |(j, ti)| (Some(j), Some(ti)));
                open = Some((kind, ti, i));
            }
            Token::MotifEnd => {
                let (kind, type_index, start) = open.take().ok_or_else(|| derr(i, DecodeErrorKind::UnopenedMotifEnd))?;
                spans.push(RegionSpan { kind, type_index, start, end: i });
            }
            _ => {}
        }
    }
    if let Some((_, ti)) = pending_type {
        return Err(derr(ti, DecodeErrorKind::DanglingType));
    }
    if open.is_some() {
        return Err(derr(tokens.len().saturating_sub(1), DecodeErrorKind::DanglingMotifStart));
    }
    Ok(spans)
}

#[derive(Debug, Clone, Copy)]
enum Pending {
    Note(u32, u8),
    Chord(u32, u8, ChordQuality),
}

/// Decodes `BOS … EOS` back into a clip. Velocities are not tokenized and
/// come back as [`crate::clip::DEFAULT_VELOCITY`].
pub fn decode(seq: &TokenSeq) -> Result<Clip, DecodeError> {
    let toks = seq.tokens();
    if toks.first() != Some(&Token::Bos) {
        return Err(derr(0, DecodeErrorKind::MissingBos));
    }
    let eos = toks
        .iter()
        .position(|&t| t == Token::Eos)
        .ok_or_else(|| derr(toks.len().saturating_sub(1), DecodeErrorKind::MissingEos))?;

    let mut bars: u32 = 0;
    let mut bar_start: u32 = 0;
    let mut cursor: u32 = 0;
    let mut last_position: Option<u8> = None;
    let mut pending: Option<(Pending, usize)> = None;
    let mut pending_type: Option<(VariantType, usize)> = None;
    let mut open: Option<(Option<VariantType>, u32, usize)> = None;
    let mut notes = Vec::new();
    let mut chords = Vec::new();
    let mut motifs = Vec::new();
    let mut variants = Vec::new();

    for (i, &tok) in toks.iter().enumerate().skip(1) {
        if let Some((_, pi)) = pending {
            if !matches!(tok, Token::Duration(_)) {
                return Err(derr(pi, DecodeErrorKind::MissingDuration));
            }
        }
        if let Some((_, ti)) = pending_type {
            if tok != Token::MotifStart {
                return Err(derr(ti, DecodeErrorKind::DanglingType));
            }
        }
        let needs_bar = !matches!(tok, Token::Bar | Token::Eos);
        if needs_bar && bars == 0 {
            return Err(derr(i, DecodeErrorKind::BeforeFirstBar));
        }
        match tok {
            Token::Bos => return Err(derr(i, DecodeErrorKind::Unexpected("BOS".into()))),
            Token::Eos => {
                if open.is_some() {
                    return Err(derr(i, DecodeErrorKind::DanglingMotifStart));
                }
            }
            Token::Bar => {
                bar_start = bars * TICKS_PER_BAR;
                cursor = bar_start;
                bars += 1;
                last_position = None;
            }
            Token::Position(p) => {
                if last_position.is_some_and(|lp| p <= lp) {
                    return Err(derr(i, DecodeErrorKind::PositionOrder));
                }
                last_position = Some(p);
                cursor = bar_start + p as u32 - 1;
            }
            Token::Type(j) => {
                if open.is_some() {
                    return Err(derr(i, DecodeErrorKind::NestedRegion));
                }
                pending_type = Some((j, i));
            }
            Token::MotifStart => {
                if open.is_some() {
                    return Err(derr(i, DecodeErrorKind::NestedRegion));
                }
                let kind = pending_type.take().map(|(j, _)| j);
                open = Some((kind, cursor, i));
            }
            Token::MotifEnd => {
                let (kind, start, _) = open.take().ok_or_else(|| derr(i, DecodeErrorKind::UnopenedMotifEnd))?;
                let end = if matches!(toks[i - 1], Token::Position(_)) { cursor } else { bar_start + TICKS_PER_BAR };
                match kind {
                    None => motifs.push(MotifLabel::new(start, end)),
                    Some(j) => variants.push(VariantLabel::new(j, start, end)),
                }
            }
            Token::Pitch(p) => {
                if last_position.is_none() {
                    return Err(derr(i, DecodeErrorKind::MissingPosition));
                }
                pending = Some((Pending::Note(cursor, p), i));
            }
            Token::Chord { root, quality } => {
                if last_position.is_none() {
                    return Err(derr(i, DecodeErrorKind::MissingPosition));
                }
                pending = Some((Pending::Chord(cursor, root, quality), i));
            }
            Token::Duration(d) => match pending.take() {
                Some((Pending::Note(start, pitch), _)) => notes.push(NoteEvent::new(start, d as u32, pitch)),
                Some((Pending::Chord(start, root, quality), _)) => {
                    chords.push(ChordEvent { start, duration: d as u32, root, quality })
                }
                None => return Err(derr(i, DecodeErrorKind::StrayDuration)),
            },
        }
        if i == eos {
            break;
        }
    }
    if eos + 1 < toks.len() {
        return Err(derr(eos + 1, DecodeErrorKind::TrailingTokens));
    }
    Clip::with_bars(bars, notes, chords, motifs, variants).map_err(|e| derr(eos, DecodeErrorKind::Clip(e)))
}

/// Splits a clip into whole-bar pieces whose encodings fit `max_len`.
/// Cuts are only made on bar lines that no label region crosses.
pub fn split_at_bars(clip: &Clip, max_len: usize) -> Result<Vec<Clip>, EncodeError> {
    let full = encode(clip)?;
    if full.len() <= max_len {
        return Ok(vec![clip.clone()]);
    }
    let regions = regions_of(clip)?;
    let cuttable = |bar: u32| {
        let t = bar * TICKS_PER_BAR;
        !regions.iter().any(|r| r.start < t && t < r.end)
    };

    let mut pieces = Vec::new();
    let mut first = 0;
    while first < clip.bars() {
        let mut best: Option<Clip> = None;
        let mut end = first + 1;
        while end <= clip.bars() {
            if end == clip.bars() || cuttable(end) {
                let piece = slice_bars(clip, first, end);
                if encode(&piece)?.len() <= max_len {
                    best = Some(piece);
                } else {
                    break;
                }
            }
            end += 1;
        }
        let piece = best.ok_or(EncodeError::Unsplittable { first, last: end.min(clip.bars()), max_len })?;
        first += piece.bars();
        pieces.push(piece);
    }
    Ok(pieces)
}

/// Bars `[first, end)` of a clip, shifted to start at tick 0.
pub fn slice_bars(clip: &Clip, first: u32, end: u32) -> Clip {
    let lo = first * TICKS_PER_BAR;
    let hi = end * TICKS_PER_BAR;
    let inside = |s: u32, e: u32| s >= lo && e <= hi;
    let melody = clip
        .melody()
        .iter()
        .filter(|n| n.start >= lo && n.start < hi)
        .map(|n| NoteEvent { start: n.start - lo, duration: n.duration.min(hi - n.start), ..*n })
        .collect();
    let chords = clip
        .chords()
        .iter()
        .filter(|c| c.start >= lo && c.start < hi)
        .map(|c| ChordEvent { start: c.start - lo, duration: c.duration.min(hi - c.start), ..*c })
        .collect();
    let motifs = clip
        .motif_labels()
        .iter()
        .filter(|m| inside(m.start, m.end))
        .map(|m| MotifLabel::new(m.start - lo, m.end - lo))
        .collect();
    let variants = clip
        .variant_labels()
        .iter()
        .filter(|v| inside(v.start, v.end))
        .map(|v| VariantLabel::new(v.kind, v.start - lo, v.end - lo))
        .collect();
    Clip::with_bars(end - first, melody, chords, motifs, variants).expect("a bar slice of a valid clip is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use Token::*;

    fn one_note() -> Clip {
        Clip::new(vec![NoteEvent::new(0, 4, 60)], vec![], vec![], vec![]).unwrap()
    }

    #[test]
    fn single_note_encoding() {
        let seq = encode(&one_note()).unwrap();
        assert_eq!(seq.0, vec![Bos, Bar, Position(1), Pitch(60), Duration(4), Eos]);
        assert_eq!(decode(&seq).unwrap(), one_note());
    }

    #[test]
    fn motif_region_wraps_bar() {
        let clip = one_note().relabeled(vec![MotifLabel::new(0, 16)], vec![]).unwrap();
        let seq = encode(&clip).unwrap();
        assert_eq!(seq.0, vec![Bos, Bar, MotifStart, Position(1), Pitch(60), Duration(4), MotifEnd, Eos]);
        assert_eq!(decode(&seq).unwrap(), clip);
    }

    #[test]
    fn variant_region_gets_type_token() {
        let notes = vec![NoteEvent::new(0, 4, 60), NoteEvent::new(16, 4, 62)];
        let clip = Clip::new(notes, vec![], vec![], vec![VariantLabel::new(VariantType::Progression, 16, 32)]).unwrap();
        let seq = encode(&clip).unwrap();
        assert_eq!(
            seq.0,
            vec![
                Bos, Bar, Position(1), Pitch(60), Duration(4), Bar, Type(VariantType::Progression), MotifStart,
                Position(1), Pitch(62), Duration(4), MotifEnd, Eos
            ]
        );
        assert_eq!(decode(&seq).unwrap(), clip);
    }

    #[test]
    fn mid_bar_boundaries_use_positions() {
        let notes = vec![NoteEvent::new(2, 2, 60), NoteEvent::new(6, 4, 62), NoteEvent::new(20, 2, 64)];
        let clip = Clip::new(
            notes,
            vec![],
            vec![MotifLabel::new(2, 10)],
            vec![VariantLabel::new(VariantType::Inversion, 10, 16), VariantLabel::new(VariantType::Repetition, 16, 27)],
        )
        .unwrap();
        let seq = encode(&clip).unwrap();
        assert_eq!(decode(&seq).unwrap(), clip, "{seq}");
    }

    #[test]
    fn missing_motif_end_fails_at_eos() {
        let seq = TokenSeq(vec![Bos, Bar, MotifStart, Position(1), Pitch(60), Duration(4), Eos]);
        let err = decode(&seq).unwrap_err();
        assert_eq!(err, DecodeError { index: 6, kind: DecodeErrorKind::DanglingMotifStart });
    }

    #[test]
    fn pitch_without_duration() {
        let seq = TokenSeq(vec![Bos, Bar, Position(1), Pitch(60), Position(2), Eos]);
        assert_eq!(decode(&seq).unwrap_err().index, 3);
    }

    #[test]
    fn overlapping_labels_are_rejected() {
        let clip = one_note()
            .relabeled(vec![MotifLabel::new(0, 8)], vec![VariantLabel::new(VariantType::Repetition, 4, 12)])
            .unwrap();
        assert!(matches!(encode(&clip).unwrap_err(), EncodeError::OverlappingLabels(..)));
    }

    #[test]
    fn long_notes_are_rejected() {
        let clip = Clip::new(vec![NoteEvent::new(0, 40, 60)], vec![], vec![], vec![]).unwrap();
        assert!(matches!(encode(&clip).unwrap_err(), EncodeError::NoteDuration { .. }));
    }

    #[test]
    fn vocabulary_is_a_bijection() {
        for i in 0..VOCAB_SIZE {
            let tok = Token::from_index(i).unwrap();
            assert_eq!(tok.index(), i);
            assert_eq!(tok.to_string().parse::<Token>().unwrap(), tok);
        }
        assert!(Token::from_index(VOCAB_SIZE).is_none());
    }

    #[test]
    fn vocabulary_file_checks() {
        let text = vocabulary_text();
        check_vocabulary_text(&text).unwrap();
        let tampered = text.replacen("\tPitch\t0", "\tPitch\t1", 1);
        assert!(check_vocabulary_text(&tampered).is_err());
        assert_eq!(check_vocabulary_text("0\tBOS\t-\n"), Err(VocabError::Header));
    }

    #[test]
    fn split_respects_regions() {
        let notes: Vec<_> = (0..32).map(|i| NoteEvent::new(i * 4, 4, 60 + (i % 7) as u8)).collect();
        let clip = Clip::new(notes, vec![], vec![MotifLabel::new(16, 48)], vec![]).unwrap();
        let pieces = split_at_bars(&clip, 40).unwrap();
        assert!(pieces.len() > 1);
        assert_eq!(pieces.iter().map(Clip::bars).sum::<u32>(), clip.bars());
        assert!(pieces.iter().any(|p| p.motif_labels().len() == 1 && p.motif_labels()[0].len() == 32));
        for p in &pieces {
            assert!(encode(p).unwrap().len() <= 40);
        }
    }

    #[test]
    fn region_spans_found() {
        let seq = TokenSeq(vec![
            Bos, Bar, MotifStart, Position(1), Pitch(60), Duration(4), MotifEnd, Bar,
            Type(VariantType::Repetition), MotifStart, Position(1), Pitch(60), Duration(4), MotifEnd, Eos,
        ]);
        let spans = region_spans(seq.tokens()).unwrap();
        assert_eq!(spans.len(), 2);
        assert_eq!((spans[0].start, spans[0].end, spans[0].type_number()), (2, 6, 0));
        assert_eq!((spans[1].type_index, spans[1].start, spans[1].end, spans[1].type_number()), (Some(8), 9, 13, 1));
    }
}
