//! Desk-scale phrase model: generated repetition regions copy the motif.

use motif_core::synth::PhraseConfig;
use motif_core::{decode, TokenSeq, VariantType};
use motif_mgm::data::oracle_phrases;
use motif_mgm::{generate_phrase, train_phrase, ModelConfig, SamplingConfig};

fn pitches(tokens: &[motif_core::Token]) -> Vec<u8> {
    tokens.iter().filter_map(|t| if let motif_core::Token::Pitch(p) = t { Some(*p) } else { None }).collect()
}

#[test]
fn repetition_regions_copy_the_motif() {
    let cfg = PhraseConfig { bars: 3, ..PhraseConfig::default() };
    let data = oracle_phrases(31, 1000, &cfg);
    let (train, test) = data.split_at(800);
    let train: Vec<_> = train.iter().map(|(_, e)| e.clone()).collect();
    let mc = ModelConfig { epochs: 12, seed: 3, max_len: 512, ..ModelConfig::desk() };
    let (model, _) = train_phrase(&train, &mc, |_, _| {}, |_, _, _| false).unwrap();
    let (mut hits, mut total) = (0, 0);
    for (i, (_, ex)) in test.iter().enumerate() {
        let s = SamplingConfig { temperature: 0.0, seed: i as u64, target_bars: 3, max_len: 512 };
        let out = generate_phrase(&ex.v, &ex.layout, &model, &s).unwrap();
        decode(&TokenSeq(out.tokens.0.clone())).unwrap();
        let motif = pitches(&ex.v[ex.layout.spans[0].start..ex.layout.spans[0].end()]);
        for v in out.clip.variant_labels().iter().filter(|v| v.kind == VariantType::Repetition) {
            total += 1;
            let got: Vec<u8> = out.clip.notes_in(v.start, v.end).iter().map(|n| n.pitch).collect();
            hits += (got == motif) as usize;
        }
    }
    eprintln!("type-1 regions {hits}/{total}");
    assert!(total > 0);
    assert!(hits as f64 >= 0.9 * total as f64);
}
