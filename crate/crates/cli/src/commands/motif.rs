use motif_core::ttmm::{motif_spec, va_to_features, FeatureConfig, Key, MotifSpec, MusicalFeatures, VaPoint};
use motif_core::Clip;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::{resolve_key, resolve_va, VaSource};
use crate::config::PipelineConfig;
use crate::files::{write_clip, write_json};
use crate::{CliError, DataContext, MotifArgs};

#[derive(Debug, Clone, Serialize)]
pub struct MotifReport {
    pub seed: u64,
    pub va: VaPoint,
    pub features: MusicalFeatures,
    pub spec: MotifSpec,
}

/// Seeded motif synthesis from a VA point.
pub fn synthesize(va: VaPoint, key: Key, cfg: &PipelineConfig, seed: u64) -> Result<(Clip, MotifReport), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features_cfg = FeatureConfig { invert_valence_mode: cfg.ttmm.invert_valence_mode };
    let features = va_to_features(&va, &features_cfg, &mut rng).data(|| "mapping VA to features".into())?;
    let spec = motif_spec(&features, key, &mut rng);
    Ok((spec.to_clip(), MotifReport { seed, va, features, spec }))
}

pub fn run(a: &MotifArgs, cfg: &PipelineConfig, seed: u64) -> Result<(), CliError> {
    let src = VaSource {
        va: a.va.as_deref(),
        text: a.text.as_deref(),
        provider: a.provider,
        lexicon: a.lexicon.as_deref(),
        va_command: a.va_command.as_deref(),
    };
    let va = resolve_va(&src, cfg)?;
    let key = resolve_key(a.key.as_deref(), cfg)?;
    let (clip, report) = synthesize(va, key, cfg, seed)?;
    write_clip(&a.out, &clip)?;
    if let Some(path) = &a.report {
        write_json(path, &report)?;
    }
    println!(
        "motif: {} notes in {} {:?} (v={:.2}, a={:.2}) -> {}",
        report.spec.non,
        key,
        report.features.mode,
        va.valence,
        va.arousal,
        a.out.display()
    );
    Ok(())
}
