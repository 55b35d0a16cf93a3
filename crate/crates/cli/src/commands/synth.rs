use motif_core::synth::{pair_clip, random_phrase, stress_clip, transform_pair, MotifShape, PhraseConfig, Transform};
use motif_core::{Clip, VariantType};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::files::{ensure_dir, write_clip, write_json};
use crate::{usage, CliError, SynthArgs, SynthKind};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthItem {
    pub name: String,
    pub clip: Clip,
    pub transform: Option<Transform>,
}

#[derive(Debug, Clone, Serialize)]
struct ManifestItem {
    file: String,
    transform: Option<Transform>,
    expected_type: Option<VariantType>,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest {
    kind: SynthKind,
    seed: u64,
    count: usize,
    bars: u32,
    items: Vec<ManifestItem>,
}

/// Transform families for `pairs`, in output order.
pub const PAIR_FAMILIES: [&str; 6] = ["copy", "transpose", "perturb", "expand", "compress", "invert"];

fn family_transform(family: &str, rng: &mut ChaCha8Rng) -> Transform {
    match family {
        "copy" => Transform::Copy,
        "transpose" => Transform::random_for(VariantType::Progression, rng),
        "perturb" => Transform::Perturb,
        "expand" => Transform::Expand,
        "compress" => Transform::Compress,
        _ => Transform::Invert,
    }
}

/// The clips `synth-corpus` writes, in file order.
pub fn synth_items(kind: SynthKind, count: usize, bars: u32, seed: u64) -> Vec<SynthItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        SynthKind::Phrases => {
            let cfg = PhraseConfig { bars, ..PhraseConfig::default() };
            (0..count)
                .map(|i| SynthItem { name: format!("phrase_{i:05}.mid"), clip: random_phrase(&mut rng, &cfg), transform: None })
                .collect()
        }
        SynthKind::Pairs => PAIR_FAMILIES
            .iter()
            .flat_map(|family| (0..count).map(move |i| (*family, i)))
            .map(|(family, i)| {
                let tr = family_transform(family, &mut rng);
                let (m, v) = transform_pair(&mut rng, tr, MotifShape::default());
                SynthItem {
                    name: format!("pair_{family}_{i:05}.mid"),
                    clip: pair_clip(&m, &v, tr.variant_type()),
                    transform: Some(tr),
                }
            })
            .collect(),
        SynthKind::Stress => (0..count)
            .map(|i| SynthItem { name: format!("stress_{i:05}.mid"), clip: stress_clip(&mut rng, bars), transform: None })
            .collect(),
    }
}

pub fn run(a: &SynthArgs, seed: u64) -> Result<(), CliError> {
    if a.count == 0 {
        return Err(usage("--count must be positive"));
    }
    if a.kind != SynthKind::Pairs && a.bars < 2 {
        return Err(usage("--bars must be at least 2"));
    }
    ensure_dir(&a.out)?;
    let items = synth_items(a.kind, a.count, a.bars, seed);
    let mut manifest = Manifest { kind: a.kind, seed, count: a.count, bars: a.bars, items: Vec::with_capacity(items.len()) };
    for item in &items {
        write_clip(&a.out.join(&item.name), &item.clip)?;
        manifest.items.push(ManifestItem {
            file: item.name.clone(),
            transform: item.transform,
            expected_type: item.transform.map(Transform::variant_type),
        });
    }
    write_json(&a.out.join("manifest.json"), &manifest)?;
    println!("wrote {} clip(s) to {}", items.len(), a.out.display());
    Ok(())
}
