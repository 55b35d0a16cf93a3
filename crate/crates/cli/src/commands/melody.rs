use std::path::PathBuf;

use motif_core::clip::TICKS_PER_BAR;
use motif_core::{Token, VariantType};
use motif_mgm::branch::{fragment_bars, fragment_tokens, region_notes};
use motif_mgm::checkpoint::{load_branches, load_model};
use motif_mgm::phrase::region_types;
use motif_mgm::{generate_phrase, generate_variants, SamplingConfig};
use serde::Serialize;

use crate::commands::label::motif_of;
use crate::commands::motif::synthesize;
use crate::commands::{resolve_key, resolve_va, VaSource};
use crate::config::PipelineConfig;
use crate::files::{read_clip, write_clip, write_json};
use crate::{usage, CliError, DataContext, MelodyArgs};

pub const BRANCHES_FILE: &str = "branches.ckpt";
pub const PHRASE_FILE: &str = "phrase.ckpt";

#[derive(Debug, Clone, Serialize)]
pub struct MelodyReport {
    pub seed: u64,
    pub bars: u32,
    pub temperature: f64,
    pub motif_tokens: usize,
    /// Token count of each generated variant fragment, types 1 to 5.
    pub variant_tokens: [usize; 5],
    /// Variant generation hit its length bound, per type.
    pub variants_truncated: [bool; 5],
    pub phrase_tokens: usize,
    /// The phrase hit the length limit before its natural end.
    pub phrase_truncated: bool,
    /// Regions in order of appearance; 0 is the motif.
    pub regions: Vec<u8>,
    /// Decoder positions that fell back to the last aligned encoder index.
    pub mvape_fallbacks: Vec<usize>,
}

pub fn run(a: &MelodyArgs, cfg: &PipelineConfig, seed: u64) -> Result<(), CliError> {
    let bars = a.bars.or(cfg.sampling.bars).unwrap_or(16);
    if bars == 0 {
        return Err(usage("--bars must be positive"));
    }
    let temperature = a.temperature.or(cfg.sampling.temperature).unwrap_or(0.0);
    if !temperature.is_finite() || temperature < 0.0 {
        return Err(usage("--temperature must be zero or positive"));
    }

    let motif_fragment: Vec<Token> = if let Some(path) = &a.motif {
        let clip = read_clip(path)?;
        let m = motif_of(&clip, 1);
        fragment_tokens(&region_notes(&clip, m.start, m.end), fragment_bars(m.end - m.start))
            .data(|| format!("motif of {}", path.display()))?
    } else {
        let src = VaSource {
            va: a.va.as_deref(),
            text: a.text.as_deref(),
            provider: a.provider,
            lexicon: a.lexicon.as_deref(),
            va_command: a.va_command.as_deref(),
        };
        let va = resolve_va(&src, cfg).map_err(|e| match e {
            CliError::Usage(_) if a.va.is_none() && a.text.is_none() => usage("give --motif FILE, --va V,A or --text TEXT"),
            e => e,
        })?;
        let key = resolve_key(a.key.as_deref(), cfg)?;
        let (clip, _) = synthesize(va, key, cfg, seed)?;
        fragment_tokens(&region_notes(&clip, 0, TICKS_PER_BAR), 1).data(|| "synthesized motif".into())?
    };

    let dir: PathBuf =
        a.checkpoints.clone().or_else(|| cfg.paths.checkpoints.clone()).unwrap_or_else(|| PathBuf::from("checkpoints"));
    let branches_path = dir.join(BRANCHES_FILE);
    let phrase_path = dir.join(PHRASE_FILE);
    let branches = load_branches(&branches_path).data(|| format!("loading {}", branches_path.display()))?;
    let phrase = load_model(&phrase_path).data(|| format!("loading {}", phrase_path.display()))?;

    let sampling = SamplingConfig { temperature, seed, target_bars: bars, max_len: phrase.config.max_len };
    let variants = generate_variants(&motif_fragment, &branches, &sampling).data(|| "generating variants".into())?;
    let out = generate_phrase(&variants.v, &variants.layout, &phrase, &sampling).data(|| "generating phrase".into())?;
    write_clip(&a.out, &out.clip)?;

    let report = MelodyReport {
        seed,
        bars,
        temperature,
        motif_tokens: motif_fragment.len(),
        variant_tokens: std::array::from_fn(|j| variants.fragments[j].len()),
        variants_truncated: variants.truncated,
        phrase_tokens: out.tokens.len(),
        phrase_truncated: out.truncated,
        regions: region_types(&out.clip).iter().map(|r| r.map_or(0, VariantType::number)).collect(),
        mvape_fallbacks: out.mvape_fallbacks.clone(),
    };
    if let Some(path) = &a.report {
        write_json(path, &report)?;
    }
    if report.phrase_truncated {
        eprintln!("warning: phrase reached the length limit of {} tokens", sampling.max_len);
    }
    println!("melody: {} bars, {} tokens, regions {:?} -> {}", bars, report.phrase_tokens, report.regions, a.out.display());
    Ok(())
}
