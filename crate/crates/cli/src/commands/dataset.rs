use std::path::Path;

use motif_core::labeler::LabelerConfig;
use motif_core::remi::{split_at_bars, vocabulary_text, VOCAB_SIZE, VOCAB_VERSION};
use motif_core::{encode, Clip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::label::relabel;
use crate::commands::{out_dir, resolve_step};
use crate::config::{normalize_split, PipelineConfig, DEFAULT_SPLIT};
use crate::files::{ensure_dir, file_name, midi_files, par_map, read_clip, write_json};
use crate::{usage, CliError, DataContext, DatasetArgs};

#[derive(Debug, Clone, Serialize)]
pub struct Sequence {
    pub file: String,
    pub piece: usize,
    pub bars: u32,
    pub tokens: Vec<usize>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SplitFiles {
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub split: [f64; 3],
    pub max_len: usize,
    pub keep_chords: bool,
    pub relabel: bool,
    pub vocab_size: usize,
    pub vocab_version: u32,
    pub files: SplitFiles,
    /// Sequences per split.
    pub sequences: [usize; 3],
}

/// Sizes of the three parts for `n` items; they always sum to `n`.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let train = ((n as f64 * ratios[0]).round() as usize).min(n);
    let valid = ((n as f64 * ratios[1]).round() as usize).min(n - train);
    [train, valid, n - train - valid]
}

/// Seeded file-level assignment: part index (0 train, 1 valid, 2 test)
/// for each of `n` items.
pub fn assign_splits(n: usize, ratios: [f64; 3], seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let [train, valid, _] = split_sizes(n, ratios);
    let mut part = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        part[i] = if rank < train {
            0
        } else if rank < train + valid {
            1
        } else {
            2
        };
    }
    part
}

fn prepare(
    path: &Path,
    relabel_with: Option<(u32, LabelerConfig)>,
    keep_chords: bool,
    max_len: usize,
) -> Result<Vec<Sequence>, CliError> {
    let mut clip = read_clip(path)?;
    if let Some((motif_bars, config)) = relabel_with {
        clip = relabel(&clip, motif_bars, &config).data(|| format!("labeling {}", path.display()))?.0;
    }
    if !keep_chords {
        clip = Clip::with_bars(
            clip.bars(),
            clip.melody().to_vec(),
            vec![],
            clip.motif_labels().to_vec(),
            clip.variant_labels().to_vec(),
        )
        .data(|| format!("{}", path.display()))?;
    }
    let pieces = split_at_bars(&clip, max_len).data(|| format!("segmenting {}", path.display()))?;
    let name = file_name(path);
    pieces
        .iter()
        .enumerate()
        .map(|(i, piece)| {
            let tokens = encode(piece).data(|| format!("encoding {}", path.display()))?;
            Ok(Sequence { file: name.clone(), piece: i, bars: piece.bars(), tokens: tokens.0.iter().map(|t| t.index()).collect() })
        })
        .collect()
}

fn jsonl(items: &[Sequence]) -> Result<String, CliError> {
    let mut out = String::new();
    for s in items {
        out.push_str(&serde_json::to_string(s).data(|| "cannot serialize sequence".into())?);
        out.push('\n');
    }
    Ok(out)
}

pub fn run(a: &DatasetArgs, cfg: &PipelineConfig, seed: u64) -> Result<(), CliError> {
    let ratios = a.split.as_deref().or(cfg.dataset.split.as_deref()).unwrap_or(&DEFAULT_SPLIT);
    let ratios = normalize_split(ratios).map_err(|e| usage(format!("--split: {e}")))?;
    let max_len = a.max_len.or(cfg.dataset.max_len).unwrap_or(1024);
    if max_len < 4 {
        return Err(usage("--max-len must be at least 4"));
    }
    let keep_chords = a.keep_chords || cfg.dataset.keep_chords;
    let relabel_with = if a.relabel {
        let motif_bars = cfg.labeler.motif_bars.unwrap_or(1);
        Some((motif_bars, LabelerConfig { step: resolve_step(None, cfg)? }))
    } else {
        None
    };
    let files = midi_files(&a.input)?;
    let out = out_dir(a.out.as_ref(), cfg, "dataset");
    ensure_dir(&out)?;

    let prepared = par_map(&files, |p| prepare(p, relabel_with, keep_chords, max_len));
    let parts = assign_splits(files.len(), ratios, seed);
    let mut seqs: [Vec<Sequence>; 3] = Default::default();
    let mut names: [Vec<String>; 3] = Default::default();
    for ((path, result), &part) in files.iter().zip(prepared).zip(&parts) {
        seqs[part].extend(result?);
        names[part].push(file_name(path));
    }

    for (part, stem) in ["train", "valid", "test"].iter().enumerate() {
        let path = out.join(format!("{stem}.jsonl"));
        std::fs::write(&path, jsonl(&seqs[part])?).data(|| format!("cannot write {}", path.display()))?;
    }
    let vocab = out.join("vocab.txt");
    std::fs::write(&vocab, vocabulary_text()).data(|| format!("cannot write {}", vocab.display()))?;
    let [train, valid, test] = names;
    let manifest = Manifest {
        seed,
        split: ratios,
        max_len,
        keep_chords,
        relabel: a.relabel,
        vocab_size: VOCAB_SIZE,
        vocab_version: VOCAB_VERSION,
        files: SplitFiles { train, valid, test },
        sequences: [seqs[0].len(), seqs[1].len(), seqs[2].len()],
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    println!(
        "{} file(s) -> {} train / {} valid / {} test sequences in {}",
        files.len(),
        manifest.sequences[0],
        manifest.sequences[1],
        manifest.sequences[2],
        out.display()
    );
    Ok(())
}
