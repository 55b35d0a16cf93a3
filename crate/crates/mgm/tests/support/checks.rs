//! Seeded property checks over masks and aligned positions. Region starts
//! and in-region offsets are recomputed here by scanning tokens.

use motif_core::synth::PhraseConfig;
use motif_core::Token;
use motif_mgm::data::oracle_phrases;
use motif_mgm::grammar::{random_walk, GrammarConfig};
use motif_mgm::masks::{build_mv_mask, cross_positions, EncoderLayout, PeTable};
use motif_mgm::model::{DecoderMode, ModelConfig, Transformer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(type, start index, end index)` for every MotifStart…MotifEnd pair.
pub fn scan_regions(tokens: &[Token]) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<(usize, usize)> = None;
    for (i, t) in tokens.iter().enumerate() {
        match t {
            Token::MotifStart => {
                let j = match i.checked_sub(1).map(|p| tokens[p]) {
                    Some(Token::Type(v)) => v.number() as usize,
                    _ => 0,
                };
                open = Some((j, i));
            }
            Token::MotifEnd => {
                let (j, s) = open.take().expect("MotifEnd closes a region");
                out.push((j, s, i));
            }
            _ => {}
        }
    }
    out
}

/// A random well-formed labeled sequence with its motif length.
pub fn random_sequence(rng: &mut ChaCha8Rng) -> (Vec<Token>, usize) {
    let l_m = rng.gen_range(2..=14);
    let bars = rng.gen_range(1..=8);
    let cfg = GrammarConfig {
        min_bars: bars,
        max_bars: bars + rng.gen_range(0..=2),
        regions: true,
        region_budget: 2 * l_m - 1,
        max_len: rng.gen_range(30..=300),
    };
    (random_walk(cfg, rng).expect("grammar walks finish"), l_m)
}

/// Checks that nonzero mask values are pairwise distinct and equal to
/// `j * 2 l_m + k + 1`. Returns the number of sequences holding regions.
pub fn mask_uniqueness(n: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut with_regions = 0;
    for case in 0..n {
        let (tokens, l_m) = random_sequence(&mut rng);
        let mv = build_mv_mask(&tokens, l_m).map_err(|e| format!("case {case}: {e}"))?;
        let regions = scan_regions(&tokens);
        with_regions += !regions.is_empty() as usize;
        let mut expected = vec![0u32; tokens.len()];
        for (j, s, e) in regions {
            for (k, slot) in expected[s..=e].iter_mut().enumerate() {
                *slot = (j * 2 * l_m + k + 1) as u32;
            }
        }
        if mv != expected {
            return Err(format!("case {case}: mask {mv:?} != {expected:?}"));
        }
        let mut nonzero: Vec<u32> = mv.iter().copied().filter(|&m| m != 0).collect();
        let before = nonzero.len();
        nonzero.sort_unstable();
        nonzero.dedup();
        if nonzero.len() != before {
            return Err(format!("case {case}: duplicate mask values"));
        }
    }
    Ok(with_regions)
}

/// For oracle phrases (regions copy their spans) and for random layouts
/// with random decoder sequences, every in-region cross position carries
/// exactly the encoder encoding of span token `rho`, or falls back to the
/// token's own position once `rho` passes the span. Returns the number of
/// aligned tokens checked.
pub fn mvape_alignment(n: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ModelConfig { d_model: 16, d_ff: 32, heads: 2, max_len: 512, layers_enc: 1, layers_dec: 1, ..ModelConfig::desk() };
    let model = Transformer::new(cfg.clone(), DecoderMode::Gated).map_err(|e| e.to_string())?;
    let encoder_pe = PeTable::new(cfg.max_len, cfg.d_model);
    let mut checked = 0;
    for case in 0..n {
        let (v, layout, target) = if case % 2 == 0 {
            let bars = rng.gen_range(2..=8);
            let pc = PhraseConfig { bars, variant_rate: rng.gen_range(0.3..1.0), distinct_types: true };
            let (_, ex) = oracle_phrases(rng.gen(), 1, &pc).pop().ok_or("no oracle phrase")?;
            (ex.v, ex.layout, ex.target)
        } else {
            let mut contents = Vec::new();
            for _ in 0..6 {
                let (t, _) = random_sequence(&mut rng);
                let body: Vec<Token> = t.into_iter().filter(|t| !t.is_region_marker() && !matches!(t, Token::Bos | Token::Eos)).collect();
                let len = rng.gen_range(0..=body.len().min(12));
                contents.push(body[..len].to_vec());
            }
            let (v, layout) = EncoderLayout::concat(&contents[0], [&contents[1], &contents[2], &contents[3], &contents[4], &contents[5]]);
            let l_m = layout.motif_len();
            let bars = rng.gen_range(1..=6);
            let gc = GrammarConfig { min_bars: bars, max_bars: bars, regions: true, region_budget: 2 * l_m - 1, max_len: 200 };
            (v, layout, random_walk(gc, &mut rng).ok_or("stuck")?)
        };
        let l_m = layout.motif_len();
        let mv = build_mv_mask(&target, l_m).map_err(|e| format!("case {case}: {e}"))?;
        let (positions, fallbacks) = cross_positions(&mv, l_m, &layout);
        let mut s = model.session();
        let ids: Vec<usize> = target.iter().map(|t| t.index()).collect();
        let c = s.embed(&ids, &positions);
        let src: Vec<usize> = v.iter().map(|t| t.index()).collect();
        let e = s.embed(&src, &(0..src.len()).collect::<Vec<_>>());
        let emb = model.params.get("emb");
        for (j, start, end) in scan_regions(&target) {
            let span = layout.spans[j];
            for i in start..=end {
                let rho = i - start;
                if rho >= span.len {
                    if positions[i] != i || !fallbacks.contains(&i) {
                        return Err(format!("case {case}: index {i} past span {j} did not fall back"));
                    }
                    continue;
                }
                let p = span.start + rho;
                if positions[i] != p || model.pe().row(positions[i]) != encoder_pe.row(p) {
                    return Err(format!("case {case}: index {i} (type {j}, rho {rho}) not aligned to {p}"));
                }
                let expected: Vec<f64> = emb.row(ids[i]).iter().zip(encoder_pe.row(p)).map(|(a, b)| a + b).collect();
                if s.g.value(c).row(i) != expected.as_slice() {
                    return Err(format!("case {case}: cross input at {i} differs from encoder encoding"));
                }
                if v[p] == target[i] && s.g.value(e).row(p) != s.g.value(c).row(i) {
                    return Err(format!("case {case}: same token at aligned position embeds differently"));
                }
                checked += 1;
            }
        }
        for (i, &m) in mv.iter().enumerate() {
            if m == 0 && positions[i] != i {
                return Err(format!("case {case}: ordinary token {i} moved to {}", positions[i]));
            }
        }
    }
    Ok(checked)
}
