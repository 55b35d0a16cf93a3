//! Region mask, motif/variant mask, encoder layout and aligned positions.

use motif_core::remi::{region_spans, DecodeError};
use motif_core::{Token, VariantType};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::Mat;

/// Region types: 0 is the motif, 1..=5 the variant types.
pub const REGION_TYPES: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum MaskError {
    #[error("malformed region markers: {0}")]
    Malformed(#[from] DecodeError),
    #[error("type-{region_type} region at token {start} has {len} tokens; at most {max} allowed (2*l_m - 1)")]
    RegionTooLong { region_type: usize, start: usize, len: usize, max: usize },
    #[error("type-{region_type} region appears twice (tokens {first} and {second}); mask values would repeat")]
    DuplicateType { region_type: usize, first: usize, second: usize },
    #[error("motif token length must be positive")]
    ZeroMotifLength,
    #[error("encoder input needs one motif region followed by one region of each type 1..5 in order")]
    Layout,
}

/// Sinusoidal positional encodings, precomputed so every lookup of a given
/// position returns the same bits.
#[derive(Debug, Clone, PartialEq)]
pub struct PeTable {
    table: Mat,
}

impl PeTable {
    pub fn new(max_len: usize, d_model: usize) -> Self {
        let mut table = Mat::zeros(max_len, d_model);
        for pos in 0..max_len {
            for i in 0..d_model {
                let pair = (i / 2) as f64;
                let angle = pos as f64 / 10000f64.powf(2.0 * pair / d_model as f64);
                table.data[pos * d_model + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
            }
        }
        Self { table }
    }

    pub fn max_len(&self) -> usize {
        self.table.rows
    }

    pub fn row(&self, pos: usize) -> &[f64] {
        self.table.row(pos)
    }

    pub fn rows(&self, positions: &[usize]) -> Mat {
        let d = self.table.cols;
        let mut out = Mat::zeros(positions.len(), d);
        for (i, &p) in positions.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(p));
        }
        out
    }
}

/// Per-token masks of a decoder sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSet {
    pub region: Vec<u8>,
    pub mv: Vec<u32>,
    pub l_m: usize,
}

impl MaskSet {
    pub fn gate(&self) -> Vec<f64> {
        self.region.iter().map(|&r| r as f64).collect()
    }

    /// `(j, k)` recovered from a nonzero mask value.
    pub fn decode_mv(m: u32, l_m: usize) -> Option<(usize, usize)> {
        (m > 0).then(|| {
            let v = m as usize - 1;
            (v / (2 * l_m), v % (2 * l_m))
        })
    }
}

/// Streaming view of region membership, usable on prefixes with a region
/// still open.
#[derive(Debug, Clone, Default)]
pub struct RegionTracker {
    pending_type: Option<usize>,
    open: Option<(usize, usize)>,
    index: usize,
}

/// Where one token sits relative to label regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenRegion {
    /// `(type, index within region)` for tokens from MotifStart to MotifEnd.
    pub inside: Option<(usize, usize)>,
}

impl RegionTracker {
    pub fn push(&mut self, tok: Token) -> TokenRegion {
        let i = self.index;
        self.index += 1;
        match tok {
            Token::Type(j) if self.open.is_none() => {
                self.pending_type = Some(j.number() as usize);
                TokenRegion { inside: None }
            }
            Token::MotifStart if self.open.is_none() => {
                let j = self.pending_type.take().unwrap_or(0);
                self.open = Some((j, i));
                TokenRegion { inside: Some((j, 0)) }
            }
            Token::MotifEnd => match self.open.take() {
                Some((j, s)) => TokenRegion { inside: Some((j, i - s)) },
                None => TokenRegion { inside: None },
            },
            _ => TokenRegion { inside: self.open.map(|(j, s)| (j, i - s)) },
        }
    }

    pub fn open_region(&self) -> Option<(usize, usize)> {
        self.open
    }
}

/// `r_t = 1` from MotifStart through MotifEnd of every region.
pub fn build_region_mask(tokens: &[Token]) -> Result<Vec<u8>, MaskError> {
    region_spans(tokens)?;
    let mut tracker = RegionTracker::default();
    Ok(tokens.iter().map(|&t| tracker.push(t).inside.is_some() as u8).collect())
}

/// `m = j * 2 l_m + k + 1` inside a type-j region (k counted from
/// MotifStart), 0 elsewhere.
pub fn build_mv_mask(tokens: &[Token], l_m: usize) -> Result<Vec<u32>, MaskError> {
    if l_m == 0 {
        return Err(MaskError::ZeroMotifLength);
    }
    let spans = region_spans(tokens)?;
    let max = 2 * l_m - 1;
    let mut first_of: [Option<usize>; REGION_TYPES] = [None; REGION_TYPES];
    for s in &spans {
        let j = s.type_number();
        if let Some(first) = first_of[j] {
            return Err(MaskError::DuplicateType { region_type: j, first, second: s.start });
        }
        first_of[j] = Some(s.start);
        if s.len() > max {
            return Err(MaskError::RegionTooLong { region_type: j, start: s.start, len: s.len(), max });
        }
    }
    let mut tracker = RegionTracker::default();
    Ok(tokens.iter().map(|&t| tracker.push(t).inside.map_or(0, |(j, k)| mv_value(j, k, l_m))).collect())
}

pub fn mv_value(j: usize, k: usize, l_m: usize) -> u32 {
    (j * 2 * l_m + k + 1) as u32
}

pub fn build_masks(tokens: &[Token], l_m: usize) -> Result<MaskSet, MaskError> {
    Ok(MaskSet { region: build_region_mask(tokens)?, mv: build_mv_mask(tokens, l_m)?, l_m })
}

/// Token range of one region inside the encoder input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Spans of the motif (index 0) and variants 1..=5 inside the concatenated
/// encoder input. Each span runs from MotifStart through MotifEnd; variant
/// segments are preceded by their Type token, which lies outside the span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderLayout {
    pub spans: [Span; REGION_TYPES],
}

impl EncoderLayout {
    /// Concatenates motif and variant contents (tokens between the region
    /// markers) into the encoder input.
    pub fn concat(motif: &[Token], variants: [&[Token]; 5]) -> (Vec<Token>, EncoderLayout) {
        let mut v = Vec::new();
        let mut spans = [Span { start: 0, len: 0 }; REGION_TYPES];
        for (j, content) in std::iter::once(motif).chain(variants).enumerate() {
            if j > 0 {
                v.push(Token::Type(VariantType::ALL[j - 1]));
            }
            let start = v.len();
            v.push(Token::MotifStart);
            v.extend_from_slice(content);
            v.push(Token::MotifEnd);
            spans[j] = Span { start, len: v.len() - start };
        }
        (v, EncoderLayout { spans })
    }

    /// Recovers the layout from an encoder input built by [`Self::concat`].
    pub fn from_tokens(v: &[Token]) -> Result<Self, MaskError> {
        let regions = region_spans(v)?;
        if regions.len() != REGION_TYPES || regions.iter().enumerate().any(|(j, r)| r.type_number() != j) {
            return Err(MaskError::Layout);
        }
        let mut spans = [Span { start: 0, len: 0 }; REGION_TYPES];
        for (j, r) in regions.iter().enumerate() {
            spans[j] = Span { start: r.start, len: r.len() };
        }
        Ok(Self { spans })
    }

    /// Motif token length `l_m`.
    pub fn motif_len(&self) -> usize {
        self.spans[0].len
    }

    pub fn total_len(&self) -> usize {
        self.spans[REGION_TYPES - 1].end()
    }

    pub fn is_well_ordered(&self) -> bool {
        self.spans.windows(2).all(|w| w[0].end() <= w[1].start) && self.spans.iter().all(|s| s.len >= 2)
    }
}

/// Encoder position used by MVAPE for the token `rho` steps into a type-j
/// region, or `None` when the region has run past the span.
pub fn aligned_position(layout: &EncoderLayout, j: usize, rho: usize) -> Option<usize> {
    let span = layout.spans[j];
    (rho < span.len).then_some(span.start + rho)
}

/// Positional encoding for decoder index `i` of a region of type `j` that
/// started at `t_j`; falls back to `PE(i)` (second value `true`) when the
/// region is longer than its encoder span.
pub fn mvape<'a>(pe: &'a PeTable, i: usize, t_j: usize, layout: &EncoderLayout, j: usize) -> (&'a [f64], bool) {
    match aligned_position(layout, j, i - t_j) {
        Some(p) => (pe.row(p), false),
        None => (pe.row(i), true),
    }
}

/// Positions fed to the cross-attention stream for every decoder token,
/// from its motif/variant mask value. Also returns the indices that fell
/// back to their own position.
pub fn cross_positions(mv: &[u32], l_m: usize, layout: &EncoderLayout) -> (Vec<usize>, Vec<usize>) {
    let mut fallbacks = Vec::new();
    let positions = mv
        .iter()
        .enumerate()
        .map(|(i, &m)| match MaskSet::decode_mv(m, l_m) {
            None => i,
            Some((j, k)) => aligned_position(layout, j, k).unwrap_or_else(|| {
                fallbacks.push(i);
                i
            }),
        })
        .collect();
    (positions, fallbacks)
}

/// Masks of a prefix that may end inside an open region.
pub fn prefix_masks(tokens: &[Token], l_m: usize) -> MaskSet {
    let mut tracker = RegionTracker::default();
    let mut region = Vec::with_capacity(tokens.len());
    let mut mv = Vec::with_capacity(tokens.len());
    for &t in tokens {
        let r = tracker.push(t).inside;
        region.push(r.is_some() as u8);
        mv.push(r.map_or(0, |(j, k)| mv_value(j, k, l_m)));
    }
    MaskSet { region, mv, l_m }
}

#[cfg(test)]
mod tests {
    use super::*;
    use motif_core::remi::DecodeErrorKind;

    fn seq(s: &str) -> Vec<Token> {
        s.split_whitespace().map(|t| t.parse().unwrap()).collect()
    }

    #[test]
    fn region_mask_examples() {
        let plain = seq("BOS Bar Position(1) Pitch(60) Duration(4) EOS");
        assert_eq!(build_region_mask(&plain).unwrap(), vec![0; 6]);
        let one = seq("BOS Bar Type(2) MotifStart Position(1) Pitch(60) Duration(4) MotifEnd EOS");
        assert_eq!(build_region_mask(&one).unwrap(), vec![0, 0, 0, 1, 1, 1, 1, 1, 0]);
        let bad = seq("BOS Bar MotifStart Position(1) EOS");
        assert!(matches!(
            build_region_mask(&bad),
            Err(MaskError::Malformed(DecodeError { kind: DecodeErrorKind::DanglingMotifStart, .. }))
        ));
    }

    #[test]
    fn mv_mask_examples() {
        let motif = seq("BOS Bar MotifStart Position(1) Pitch(60) MotifEnd EOS");
        assert_eq!(build_mv_mask(&motif, 4).unwrap(), vec![0, 0, 1, 2, 3, 4, 0]);
        let two = seq("BOS Bar Type(2) MotifStart Position(1) Pitch(60) MotifEnd EOS");
        assert_eq!(build_mv_mask(&two, 4).unwrap()[6], 20);
        let long = seq("BOS Bar MotifStart Position(1) Pitch(60) Duration(4) Position(5) Pitch(62) Duration(4) MotifEnd EOS");
        assert!(matches!(build_mv_mask(&long, 4), Err(MaskError::RegionTooLong { len: 8, max: 7, .. })));
        let dup = seq("BOS Bar Type(1) MotifStart MotifEnd Bar Type(1) MotifStart MotifEnd EOS");
        assert!(matches!(build_mv_mask(&dup, 4), Err(MaskError::DuplicateType { region_type: 1, .. })));
    }

    #[test]
    fn mvape_examples() {
        let pe = PeTable::new(64, 8);
        let mut spans = [Span { start: 0, len: 4 }; REGION_TYPES];
        spans[2] = Span { start: 12, len: 4 };
        let layout = EncoderLayout { spans };
        assert_eq!(mvape(&pe, 48, 48, &layout, 2), (pe.row(12), false));
        assert_eq!(mvape(&pe, 50, 48, &layout, 2), (pe.row(14), false));
        assert_eq!(mvape(&pe, 53, 48, &layout, 2), (pe.row(53), true));
    }

    #[test]
    fn concat_layout() {
        let c = seq("Position(1) Pitch(60) Duration(4)");
        let (v, layout) = EncoderLayout::concat(&c, [&c, &c, &[], &c, &c]);
        assert!(layout.is_well_ordered());
        assert_eq!(layout.spans[0], Span { start: 0, len: 5 });
        assert_eq!(layout.spans[1], Span { start: 6, len: 5 });
        assert_eq!(layout.spans[3].len, 2);
        assert_eq!(layout.total_len(), v.len());
        assert_eq!(EncoderLayout::from_tokens(&v).unwrap(), layout);
    }

    #[test]
    fn pe_rows_are_stable() {
        let pe = PeTable::new(32, 6);
        assert_eq!(pe.row(0), &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(pe.rows(&[5, 5]).row(1), pe.row(5));
    }
}
