//! The gated phrase model: reads the motif and its variants, writes a melody
//! whose labeled regions attend to the aligned encoder tokens.

use motif_core::{decode, encode, Clip, Token, TokenSeq, VariantLabel, VariantType};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::branch::{fragment_bars, fragment_content, fragment_tokens, ids, region_notes};
use crate::grammar::{Grammar, GrammarConfig};
use crate::masks::{build_masks, cross_positions, prefix_masks, EncoderLayout, MaskSet};
use crate::model::{DecoderInput, DecoderMode, ModelConfig, Transformer};
use crate::sampling::{choose, SamplingConfig};
use crate::train::{train, Example};
use crate::MgmError;

/// Encoder input plus the melody the decoder should write.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseExample {
    pub v: Vec<Token>,
    pub layout: EncoderLayout,
    pub target: Vec<Token>,
    /// Teacher-forced masks over `target`.
    pub masks: MaskSet,
}

impl PhraseExample {
    /// Builds an example from a labeled clip. Chords are dropped, the first
    /// motif label is the motif, and only the first region of each variant
    /// type is kept. Region contents become the encoder input.
    pub fn from_clip(clip: &Clip) -> Result<Self, MgmError> {
        let motif = *clip.motif_labels().first().ok_or_else(|| MgmError::Example("clip has no motif label".into()))?;
        let mut seen = [false; 5];
        let variants: Vec<VariantLabel> = clip
            .variant_labels()
            .iter()
            .filter(|v| !std::mem::replace(&mut seen[v.kind.index()], true))
            .copied()
            .collect();
        let clean = Clip::with_bars(clip.bars(), clip.melody().to_vec(), vec![], vec![motif], variants.clone())
            .map_err(|e| MgmError::Example(e.to_string()))?;
        let target = encode(&clean)?.0;

        let content = |start: u32, end: u32| -> Result<Vec<Token>, MgmError> {
            let frag = fragment_tokens(&region_notes(&clean, start, end), fragment_bars(end - start))?;
            Ok(fragment_content(&frag).to_vec())
        };
        let motif_content = content(motif.start, motif.end)?;
        let mut variant_content: [Vec<Token>; 5] = Default::default();
        for v in &variants {
            variant_content[v.kind.index()] = content(v.start, v.end)?;
        }
        Self::new(&motif_content, variant_content.each_ref().map(|c| c.as_slice()), target)
    }

    /// Builds an example from explicit region contents and a target.
    pub fn new(motif: &[Token], variants: [&[Token]; 5], target: Vec<Token>) -> Result<Self, MgmError> {
        let (v, layout) = EncoderLayout::concat(motif, variants);
        let masks = build_masks(&target, layout.motif_len())?;
        Ok(Self { v, layout, target, masks })
    }

    pub fn l_m(&self) -> usize {
        self.layout.motif_len()
    }

    /// Teacher-forced decoder input: gate from the region mask, cross
    /// positions from the motif/variant mask.
    pub fn to_example(&self) -> Example {
        let n = self.target.len() - 1;
        let (positions, _) = cross_positions(&self.masks.mv[..n], self.l_m(), &self.layout);
        let gate = self.masks.region[..n].iter().map(|&r| r as f64).collect();
        let dec = DecoderInput { ids: ids(&self.target[..n]), cross_positions: positions, gate };
        let targets = self.target[1..].iter().map(|t| Some(t.index())).collect();
        Example { src: ids(&self.v), dec, targets }
    }
}

/// Trains a gated phrase model.
pub fn train_phrase(
    examples: &[PhraseExample],
    config: &ModelConfig,
    on_epoch: impl FnMut(usize, f64),
    stop: impl FnMut(&Transformer, usize, f64) -> bool,
) -> Result<(Transformer, Vec<f64>), MgmError> {
    if examples.is_empty() {
        return Err(MgmError::EmptyCorpus);
    }
    let examples: Vec<Example> = examples.iter().map(PhraseExample::to_example).collect();
    let mut model = Transformer::new(config.clone(), DecoderMode::Gated)?;
    let trace = train(&mut model, &examples, on_epoch, stop)?;
    Ok((model, trace))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseOutput {
    pub tokens: TokenSeq,
    pub clip: Clip,
    pub masks: MaskSet,
    /// Decoder indices whose region ran past its encoder span.
    pub mvape_fallbacks: Vec<usize>,
    /// EOS was forced by the length limit.
    pub truncated: bool,
}

/// Autoregressive phrase of `sampling.target_bars` bars. Every prefix is
/// admissible under the grammar, so the result always decodes.
pub fn generate_phrase(
    v: &[Token],
    layout: &EncoderLayout,
    model: &Transformer,
    sampling: &SamplingConfig,
) -> Result<PhraseOutput, MgmError> {
    if model.mode != DecoderMode::Gated {
        return Err(MgmError::Config("phrase generation needs a gated decoder".into()));
    }
    let l_m = layout.motif_len();
    let max_len = sampling.max_len.min(model.config.max_len);
    let bars = sampling.target_bars.max(1);
    let cfg = GrammarConfig { min_bars: bars, max_bars: bars, regions: true, region_budget: 2 * l_m - 1, max_len };
    let mut grammar = Grammar::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let vocab = motif_core::remi::vocabulary();

    let mut s = model.session();
    let enc = s.encode(&ids(v))?;
    let enc_value = s.g.value(enc).clone();
    drop(s);

    grammar.apply(Token::Bos);
    let mut out = vec![Token::Bos];
    let mut fallbacks = Vec::new();
    while !grammar.is_finished() {
        let masks = prefix_masks(&out, l_m);
        let (positions, fb) = cross_positions(&masks.mv, l_m, layout);
        if fb.last() == Some(&(out.len() - 1)) {
            fallbacks.push(out.len() - 1);
        }
        let dec = DecoderInput { ids: ids(&out), cross_positions: positions, gate: masks.gate() };
        let mut s = model.session();
        let enc = s.g.constant(enc_value.clone());
        let states = s.decode_states(enc, &dec)?;
        let logits = s.linear(states, "out.w", "out.b");
        let last = s.g.value(logits).row(out.len() - 1).to_vec();
        let id = choose(&last, &grammar.allowed_mask(), sampling.temperature, &mut rng)
            .ok_or(MgmError::Stuck(out.len()))?;
        grammar.apply(vocab[id]);
        out.push(vocab[id]);
    }
    let truncated = out.len() == max_len;
    let tokens = TokenSeq(out);
    let clip = decode(&tokens)?;
    let masks = build_masks(tokens.tokens(), l_m)?;
    Ok(PhraseOutput { tokens, clip, masks, mvape_fallbacks: fallbacks, truncated })
}

/// Region types present in a generated phrase, in order of appearance.
pub fn region_types(clip: &Clip) -> Vec<Option<VariantType>> {
    let mut r: Vec<(u32, Option<VariantType>)> = clip.motif_labels().iter().map(|m| (m.start, None)).collect();
    r.extend(clip.variant_labels().iter().map(|v| (v.start, Some(v.kind))));
    r.sort_by_key(|x| x.0);
    r.into_iter().map(|x| x.1).collect()
}
