//! One encoder-decoder per variant type, each mapping a motif fragment to a
//! variant fragment; their outputs are concatenated into the encoder input
//! of the phrase model.

use motif_core::clip::TICKS_PER_BAR;
use motif_core::remi::VOCAB_SIZE;
use motif_core::{encode, Clip, NoteEvent, Token, VariantType};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grammar::{Grammar, GrammarConfig};
use crate::masks::EncoderLayout;
use crate::model::{DecoderInput, DecoderMode, ModelConfig, Transformer};
use crate::sampling::{choose, SamplingConfig};
use crate::train::{train, Example};
use crate::MgmError;

pub fn ids(tokens: &[Token]) -> Vec<usize> {
    tokens.iter().map(|t| t.index()).collect()
}

/// Bars needed for a fragment of `len` ticks (at least one).
pub fn fragment_bars(len: u32) -> u32 {
    len.div_ceil(TICKS_PER_BAR).max(1)
}

/// Notes with onsets in `[start, end)`, moved to tick 0 and clipped to the
/// fragment's bars.
pub fn region_notes(clip: &Clip, start: u32, end: u32) -> Vec<NoteEvent> {
    let limit = fragment_bars(end - start) * TICKS_PER_BAR;
    clip.notes_in(start, end)
        .iter()
        .map(|n| {
            let s = n.start - start;
            NoteEvent { start: s, duration: n.duration.min(limit - s), ..*n }
        })
        .collect()
}

/// `BOS Bar … EOS` for notes given relative to tick 0.
pub fn fragment_tokens(notes: &[NoteEvent], bars: u32) -> Result<Vec<Token>, MgmError> {
    let clip = Clip::with_bars(bars, notes.to_vec(), vec![], vec![], vec![])
        .map_err(|e| MgmError::Example(format!("fragment is not a valid clip: {e}")))?;
    Ok(encode(&clip)?.0)
}

/// The tokens of a fragment between its first Bar and EOS.
pub fn fragment_content(tokens: &[Token]) -> &[Token] {
    let body = tokens.strip_prefix(&[Token::Bos]).unwrap_or(tokens);
    let body = body.strip_prefix(&[Token::Bar]).unwrap_or(body);
    body.strip_suffix(&[Token::Eos]).unwrap_or(body)
}

/// Motif token length of a fragment once wrapped in region markers.
pub fn motif_token_len(fragment: &[Token]) -> usize {
    fragment_content(fragment).len() + 2
}

/// Five independently parameterized branches, index `j - 1` for type j.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchModel {
    pub branches: Vec<Transformer>,
}

impl BranchModel {
    /// Untrained branches; branch j is seeded with `seed + j`.
    pub fn new(config: &ModelConfig) -> Result<Self, MgmError> {
        let branches = VariantType::ALL
            .iter()
            .map(|j| {
                let cfg = ModelConfig { seed: config.seed.wrapping_add(j.number() as u64), ..config.clone() };
                Transformer::new(cfg, DecoderMode::Standard)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { branches })
    }

    pub fn branch(&self, j: VariantType) -> &Transformer {
        &self.branches[j.index()]
    }
}

/// Teacher-forced example for one (motif, variant) fragment pair.
pub fn pair_example(motif: &[Token], variant: &[Token]) -> Example {
    Example::shifted(ids(motif), &ids(variant))
}

pub struct TrainedBranch {
    pub model: Transformer,
    /// Mean NLL per epoch.
    pub trace: Vec<f64>,
}

/// Trains one branch on fragment pairs of its type.
pub fn train_branch(
    pairs: &[(Vec<Token>, Vec<Token>)],
    config: &ModelConfig,
    on_epoch: impl FnMut(usize, f64),
    stop: impl FnMut(&Transformer, usize, f64) -> bool,
) -> Result<TrainedBranch, MgmError> {
    if pairs.is_empty() {
        return Err(MgmError::EmptyCorpus);
    }
    let examples: Vec<Example> = pairs.iter().map(|(m, v)| pair_example(m, v)).collect();
    let mut model = Transformer::new(config.clone(), DecoderMode::Standard)?;
    let trace = train(&mut model, &examples, on_epoch, stop)?;
    Ok(TrainedBranch { model, trace })
}

/// Autoregressive variant fragment for a motif fragment. The variant keeps
/// the motif's bar count and its region (markers included) stays within
/// `2 * l_m - 1` tokens; the flag reports that EOS was forced by that bound.
pub fn generate_variant(
    branch: &Transformer,
    motif: &[Token],
    temperature: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Token>, bool), MgmError> {
    let bars = motif.iter().filter(|&&t| t == Token::Bar).count().max(1) as u32;
    let l_m = motif_token_len(motif);
    // region budget 2 l_m - 1 minus the two markers, plus BOS, Bar and EOS
    let max_len = (2 * l_m - 1 - 2 + 3).min(branch.config.max_len);
    let grammar_cfg = GrammarConfig { min_bars: bars, max_bars: bars, regions: false, region_budget: 0, max_len };
    let mut grammar = Grammar::new(grammar_cfg);
    grammar.apply(Token::Bos);
    let mut out = vec![Token::Bos];

    let mut s = branch.session();
    let enc = s.encode(&ids(motif))?;
    let enc_value = s.g.value(enc).clone();
    let vocab = motif_core::remi::vocabulary();
    while !grammar.is_finished() {
        let mut s = branch.session();
        let enc = s.g.constant(enc_value.clone());
        let states = s.decode_states(enc, &DecoderInput::plain(ids(&out)))?;
        let logits = s.linear(states, "out.w", "out.b");
        let last = s.g.value(logits).row(out.len() - 1).to_vec();
        let allowed = grammar.allowed_mask();
        debug_assert_eq!(allowed.len(), VOCAB_SIZE);
        let id = choose(&last, &allowed, temperature, rng).ok_or(MgmError::Stuck(out.len()))?;
        grammar.apply(vocab[id]);
        out.push(vocab[id]);
    }
    let forced = out.len() == max_len;
    Ok((out, forced))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedVariants {
    /// Encoder input: motif and the five variants, each wrapped in markers.
    pub v: Vec<Token>,
    pub layout: EncoderLayout,
    /// Standalone `BOS … EOS` fragment per type.
    pub fragments: Vec<Vec<Token>>,
    /// Per type: generation hit the length bound.
    pub truncated: [bool; 5],
}

/// Runs every branch on the motif fragment and concatenates the results.
pub fn generate_variants(
    motif: &[Token],
    branches: &BranchModel,
    sampling: &SamplingConfig,
) -> Result<GeneratedVariants, MgmError> {
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let mut fragments = Vec::with_capacity(5);
    let mut truncated = [false; 5];
    for j in VariantType::ALL {
        let (frag, cut) = generate_variant(branches.branch(j), motif, sampling.temperature, &mut rng)?;
        truncated[j.index()] = cut;
        fragments.push(frag);
    }
    let contents: Vec<&[Token]> = fragments.iter().map(|f| fragment_content(f)).collect();
    let (v, layout) =
        EncoderLayout::concat(fragment_content(motif), [contents[0], contents[1], contents[2], contents[3], contents[4]]);
    Ok(GeneratedVariants { v, layout, fragments, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig { d_model: 16, d_ff: 32, heads: 2, max_len: 128, ..ModelConfig::desk() }
    }

    fn motif() -> Vec<Token> {
        fragment_tokens(&[NoteEvent::new(0, 4, 60), NoteEvent::new(4, 4, 62), NoteEvent::new(8, 8, 64)], 1).unwrap()
    }

    #[test]
    fn untrained_greedy_is_deterministic_and_well_formed() {
        let branches = BranchModel::new(&tiny()).unwrap();
        let cfg = SamplingConfig { seed: 3, ..SamplingConfig::default() };
        let a = generate_variants(&motif(), &branches, &cfg).unwrap();
        let b = generate_variants(&motif(), &branches, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.layout.is_well_ordered());
        assert_eq!(EncoderLayout::from_tokens(&a.v).unwrap(), a.layout);
        let l_m = a.layout.motif_len();
        for j in 1..=5 {
            assert!(a.layout.spans[j].len < 2 * l_m);
        }
        for f in &a.fragments {
            motif_core::decode(&motif_core::TokenSeq(f.clone())).unwrap();
        }
    }

    #[test]
    fn fragment_helpers() {
        let m = motif();
        assert_eq!(m.len(), 12);
        assert_eq!(fragment_content(&m).len(), 9);
        assert_eq!(fragment_content(&m)[0], Token::Position(1));
        assert_eq!(motif_token_len(&m), 11);
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(train_branch(&[], &tiny(), |_, _| {}, |_, _, _| false), Err(MgmError::EmptyCorpus)));
    }
}
