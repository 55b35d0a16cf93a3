use std::path::{Path, PathBuf};

use motif_core::clip::TICKS_PER_BAR;
use motif_core::labeler::{detect_repetitions, label_clip, LabelerConfig};
use motif_core::{Clip, MotifLabel, VariantLabel};
use serde::Serialize;

use crate::commands::{out_dir, resolve_step};
use crate::config::PipelineConfig;
use crate::files::{ensure_dir, file_name, midi_files, par_map, read_clip, write_clip, write_json};
use crate::{usage, CliError, DataContext, LabelArgs};

#[derive(Debug, Clone, Serialize)]
pub struct FileLabels {
    pub file: String,
    pub motif: MotifLabel,
    /// Variants per type, 1 through 5.
    pub counts: [u64; 5],
    pub variants: Vec<VariantLabel>,
    /// Exact recurrences of the motif anywhere in the clip.
    pub repetitions: Vec<MotifLabel>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelReport {
    pub step: String,
    pub files: Vec<FileLabels>,
    pub totals: [u64; 5],
}

/// The clip's first motif label, or its first `motif_bars` bars.
pub fn motif_of(clip: &Clip, motif_bars: u32) -> MotifLabel {
    match clip.motif_labels().first() {
        Some(m) => *m,
        None => MotifLabel::new(0, (motif_bars * TICKS_PER_BAR).min(clip.span()).max(1)),
    }
}

/// Replaces the clip's variant labels with the labeler's. Motif labels are
/// kept; a clip without one gets its first `motif_bars` bars.
pub fn relabel(clip: &Clip, motif_bars: u32, config: &LabelerConfig) -> anyhow::Result<(Clip, MotifLabel)> {
    let motif = motif_of(clip, motif_bars);
    let motifs = if clip.motif_labels().is_empty() { vec![motif] } else { clip.motif_labels().to_vec() };
    let bare = clip.relabeled(motifs.clone(), vec![])?;
    let variants = label_clip(&bare, config)?;
    Ok((clip.relabeled(motifs, variants)?, motif))
}

fn label_file(path: &Path, motif_bars: u32, config: &LabelerConfig) -> Result<(Clip, FileLabels), CliError> {
    let clip = read_clip(path)?;
    let (labeled, motif) = relabel(&clip, motif_bars, config).data(|| format!("labeling {}", path.display()))?;
    let mut counts = [0u64; 5];
    for v in labeled.variant_labels() {
        counts[v.kind.index()] += 1;
    }
    let report = FileLabels {
        file: file_name(path),
        motif,
        counts,
        variants: labeled.variant_labels().to_vec(),
        repetitions: detect_repetitions(&labeled, &motif),
    };
    Ok((labeled, report))
}

pub fn run(a: &LabelArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let step = resolve_step(a.step, cfg)?;
    let motif_bars = a.motif_bars.or(cfg.labeler.motif_bars).unwrap_or(1);
    if !(1..=2).contains(&motif_bars) {
        return Err(usage("--motif-bars must be 1 or 2"));
    }
    let files = midi_files(&a.input)?;
    let out = out_dir(a.out.as_ref(), cfg, "labeled");
    ensure_dir(&out)?;
    let config = LabelerConfig { step };

    let results = par_map(&files, |p| label_file(p, motif_bars, &config));
    let mut reports = Vec::with_capacity(files.len());
    let mut totals = [0u64; 5];
    for (path, result) in files.iter().zip(results) {
        let (clip, report) = result?;
        let target: PathBuf = out.join(file_name(path));
        write_clip(&target, &clip)?;
        for (t, c) in totals.iter_mut().zip(report.counts) {
            *t += c;
        }
        reports.push(report);
    }
    let step = match step {
        motif_core::labeler::WindowStep::Bar => "bar",
        motif_core::labeler::WindowStep::HalfBar => "half-bar",
    };
    let report = LabelReport { step: step.into(), files: reports, totals };
    write_json(&out.join("labels.json"), &report)?;
    println!("labeled {} file(s) into {}: variants by type {:?}", report.files.len(), out.display(), totals);
    Ok(())
}
