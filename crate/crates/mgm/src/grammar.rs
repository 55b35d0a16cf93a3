//! Token-level automaton that only admits continuations which still decode
//! to a valid clip and can be finished within the length limit.

use motif_core::clip::TICKS_PER_BAR;
use motif_core::remi::{vocabulary, MAX_DURATION, POSITIONS};
use motif_core::{Token, VariantType};
use rand::Rng;

use crate::masks::REGION_TYPES;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrammarConfig {
    /// EOS needs at least this many bars.
    pub min_bars: u32,
    /// No Bar beyond this count; notes must end by then.
    pub max_bars: u32,
    /// Whether region markers may be emitted.
    pub regions: bool,
    /// Most tokens a region may hold, MotifStart through MotifEnd.
    pub region_budget: usize,
    /// Most tokens overall, BOS and EOS included.
    pub max_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct OpenRegion {
    tokens: usize,
    start_tick: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grammar {
    cfg: GrammarConfig,
    len: usize,
    bars: u32,
    /// Offset of the last Position in the current bar.
    pos: Option<u32>,
    last: Option<Token>,
    note_end: u32,
    pending_pitch: bool,
    pending_type: bool,
    region: Option<OpenRegion>,
    used: [bool; REGION_TYPES],
    /// The last region closed at the bar line; only Bar or EOS may follow.
    closed_to_bar_end: bool,
    finished: bool,
}

impl Grammar {
    pub fn new(cfg: GrammarConfig) -> Self {
        Self {
            cfg,
            len: 0,
            bars: 0,
            pos: None,
            last: None,
            note_end: 0,
            pending_pitch: false,
            pending_type: false,
            region: None,
            used: [false; REGION_TYPES],
            closed_to_bar_end: false,
            finished: false,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn in_region(&self) -> bool {
        self.region.is_some()
    }

    fn bar_start(&self) -> u32 {
        self.bars.saturating_sub(1) * TICKS_PER_BAR
    }

    fn cursor(&self) -> u32 {
        self.bar_start() + self.pos.unwrap_or(0)
    }

    fn limit(&self) -> u32 {
        self.cfg.max_bars * TICKS_PER_BAR
    }

    fn region_room(&self, extra: usize) -> bool {
        self.region.is_none_or(|r| r.tokens + extra <= self.cfg.region_budget)
    }

    /// Whether a region may open at the current point.
    fn can_open_here(&self) -> bool {
        self.cfg.regions
            && self.region.is_none()
            && !self.closed_to_bar_end
            && self.bars > 0
            && match self.last {
                Some(Token::Bar) | Some(Token::Position(_)) => true,
                Some(Token::MotifEnd) => !self.closed_to_bar_end,
                _ => false,
            }
    }

    fn pitch_ok_at(&self, tick: u32) -> bool {
        tick >= self.note_end && tick < self.limit() && self.region_room(3)
    }

    fn structurally_allows(&self, tok: Token) -> bool {
        if self.finished {
            return false;
        }
        if self.len == 0 {
            return tok == Token::Bos;
        }
        if self.pending_type {
            return tok == Token::MotifStart;
        }
        if self.pending_pitch {
            return match tok {
                Token::Duration(d) => {
                    d as u32 >= 1 && d <= MAX_DURATION && self.cursor() + d as u32 <= self.limit()
                }
                _ => false,
            };
        }
        let after_position = matches!(self.last, Some(Token::Position(_)));
        if self.closed_to_bar_end {
            return match tok {
                Token::Bar => self.bars < self.cfg.max_bars,
                Token::Eos => self.eos_ok(),
                _ => false,
            };
        }
        match tok {
            Token::Bos | Token::Duration(_) | Token::Chord { .. } => false,
            Token::Bar => self.bars < self.cfg.max_bars && !after_position && self.region_room(3),
            Token::Eos => !after_position && self.eos_ok(),
            Token::Position(p) => {
                if self.bars == 0 || after_position || !(1..=POSITIONS).contains(&p) || !self.region_room(2) {
                    return false;
                }
                let off = p as u32 - 1;
                if self.pos.is_some_and(|cur| off <= cur) {
                    return false;
                }
                let tick = self.bar_start() + off;
                let note = tick >= self.note_end && tick < self.limit() && self.region_room(4);
                let close = self.region.is_some_and(|r| tick > r.start_tick);
                let open = self.cfg.regions && self.region.is_none() && self.used.iter().any(|u| !u);
                note || close || open
            }
            Token::Pitch(_) => {
                let placed = match self.last {
                    Some(Token::Position(_)) => true,
                    Some(Token::MotifStart) | Some(Token::MotifEnd) => self.pos.is_some(),
                    _ => false,
                };
                placed && self.pitch_ok_at(self.cursor())
            }
            Token::Type(j) => self.can_open_here() && !self.used[j.number() as usize],
            Token::MotifStart => self.can_open_here() && !self.used[0],
            Token::MotifEnd => match self.region {
                None => false,
                Some(r) => match self.last {
                    Some(Token::Position(_)) => self.cursor() > r.start_tick,
                    Some(Token::Duration(_)) | Some(Token::MotifStart) => true,
                    _ => false,
                },
            },
        }
    }

    fn eos_ok(&self) -> bool {
        self.bars >= self.cfg.min_bars.max(1)
            && self.region.is_none()
            && self.note_end <= self.bars * TICKS_PER_BAR
    }

    /// Fewest tokens that still have to follow to reach EOS.
    fn min_completion(&self) -> usize {
        if self.finished {
            return 0;
        }
        let mut n = 0;
        if self.pending_pitch {
            n += 1;
        }
        let note_here = self.cursor() >= self.note_end && self.cursor() < self.limit();
        if self.pending_type {
            n += 2;
        } else if let Some(r) = self.region {
            n += match self.last {
                Some(Token::Bar) => 2,
                // the region cannot close on its own start tick: a note first
                Some(Token::Position(_)) if self.cursor() <= r.start_tick => 3,
                _ => 1,
            };
        } else if matches!(self.last, Some(Token::Position(_))) {
            // a Position must carry a note or open a region
            n += if note_here || !self.used[0] { 2 } else { 3 };
        }
        let needed_bars = self.cfg.min_bars.max(1).max(self.note_end.div_ceil(TICKS_PER_BAR));
        n += needed_bars.saturating_sub(self.bars) as usize;
        n + 1
    }

    pub fn allows(&self, tok: Token) -> bool {
        if !self.structurally_allows(tok) {
            return false;
        }
        let mut next = *self;
        next.apply(tok);
        next.len + next.min_completion() <= self.cfg.max_len
    }

    /// Allowed-token flags indexed by vocabulary id.
    pub fn allowed_mask(&self) -> Vec<bool> {
        vocabulary().into_iter().map(|t| self.allows(t)).collect()
    }

    /// Advances the state. The caller is expected to have checked
    /// [`Self::allows`].
    pub fn apply(&mut self, tok: Token) {
        let after_position = matches!(self.last, Some(Token::Position(_)));
        if let Some(r) = self.region.as_mut() {
            r.tokens += 1;
        }
        match tok {
            Token::Bar => {
                self.bars += 1;
                self.pos = None;
                self.closed_to_bar_end = false;
            }
            Token::Position(p) => self.pos = Some(p as u32 - 1),
            Token::Pitch(_) => self.pending_pitch = true,
            Token::Duration(d) => {
                self.pending_pitch = false;
                self.note_end = self.cursor() + d as u32;
            }
            Token::Type(j) => {
                self.pending_type = true;
                self.used[j.number() as usize] = true;
            }
            Token::MotifStart => {
                if !self.pending_type {
                    self.used[0] = true;
                }
                self.pending_type = false;
                self.region = Some(OpenRegion { tokens: 1, start_tick: self.cursor() });
            }
            Token::MotifEnd => {
                self.region = None;
                if !after_position {
                    self.closed_to_bar_end = true;
                }
            }
            Token::Eos => self.finished = true,
            Token::Bos | Token::Chord { .. } => {}
        }
        self.last = Some(tok);
        self.len += 1;
    }

    /// Variant types not yet used.
    pub fn unused_types(&self) -> Vec<VariantType> {
        VariantType::ALL.into_iter().filter(|j| !self.used[j.number() as usize]).collect()
    }
}

/// A uniformly random admissible walk to EOS: a seeded source of
/// well-formed sequences.
pub fn random_walk<R: Rng + ?Sized>(cfg: GrammarConfig, rng: &mut R) -> Option<Vec<Token>> {
    let vocab = vocabulary();
    let mut g = Grammar::new(cfg);
    let mut out = Vec::new();
    while !g.is_finished() {
        let allowed: Vec<Token> = vocab.iter().copied().filter(|&t| g.allows(t)).collect();
        if allowed.is_empty() {
            return None;
        }
        let t = allowed[rng.gen_range(0..allowed.len())];
        g.apply(t);
        out.push(t);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use motif_core::{decode, TokenSeq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn walk(cfg: GrammarConfig, seed: u64) -> Vec<Token> {
        random_walk(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).expect("grammar never gets stuck")
    }

    #[test]
    fn random_walks_always_decode() {
        for seed in 0..300 {
            let cfg = GrammarConfig {
                min_bars: 2,
                max_bars: 2 + (seed % 3) as u32,
                regions: true,
                region_budget: 9,
                max_len: 40 + (seed % 50) as usize,
            };
            let toks = walk(cfg, seed);
            assert!(toks.len() <= cfg.max_len);
            let clip = decode(&TokenSeq(toks.clone())).unwrap_or_else(|e| panic!("{e}: {}", TokenSeq(toks.clone())));
            assert!(clip.bars() >= 2);
            let masks = crate::masks::build_mv_mask(&toks, 5);
            assert!(masks.is_ok(), "{masks:?}");
        }
    }

    #[test]
    fn never_stuck_from_a_feasible_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20_000 {
            let l_m = rng.gen_range(2..=14);
            let bars = rng.gen_range(1..=8);
            let cfg = GrammarConfig {
                min_bars: bars,
                max_bars: bars + rng.gen_range(0..=2),
                regions: rng.gen_bool(0.8),
                region_budget: 2 * l_m - 1,
                max_len: bars as usize + 2 + rng.gen_range(0..=200),
            };
            let toks = random_walk(cfg, &mut rng).unwrap_or_else(|| panic!("stuck under {cfg:?}"));
            assert!(toks.len() <= cfg.max_len);
        }
    }

    #[test]
    fn fragments_without_regions() {
        for seed in 0..100 {
            let cfg = GrammarConfig { min_bars: 1, max_bars: 1, regions: false, region_budget: 0, max_len: 12 };
            let toks = walk(cfg, seed);
            assert!(!toks.iter().any(|t| t.is_region_marker()));
            assert_eq!(decode(&TokenSeq(toks)).unwrap().bars(), 1);
        }
    }
}
