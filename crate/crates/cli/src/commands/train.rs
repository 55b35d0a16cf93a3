use std::fmt::Write as _;

use motif_core::{Clip, VariantType};
use motif_mgm::checkpoint::{save_branches, save_model};
use motif_mgm::data::pairs_from_clips;
use motif_mgm::{train_branch, train_phrase, BranchModel, ModelConfig, PhraseExample};
use serde::Serialize;

use crate::commands::melody::{BRANCHES_FILE, PHRASE_FILE};
use crate::commands::out_dir;
use crate::config::PipelineConfig;
use crate::files::{ensure_dir, midi_files, par_map, read_clip, write_json};
use crate::{usage, CliError, DataContext, Preset, StageArg, TrainArgs};

#[derive(Debug, Clone, Serialize)]
pub struct BranchSummary {
    pub variant_type: u8,
    pub pairs: usize,
    /// Mean NLL of the last epoch; absent when the branch was left untrained.
    pub final_nll: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub seed: u64,
    pub preset: Preset,
    pub model: ModelConfig,
    pub files: usize,
    pub branches: Vec<BranchSummary>,
    pub phrase_examples: usize,
    /// Clips that could not become phrase examples, with the reason.
    pub phrase_skipped: Vec<(usize, String)>,
    pub phrase_final_nll: Option<f64>,
}

pub fn run(a: &TrainArgs, cfg: &PipelineConfig, seed: u64) -> Result<(), CliError> {
    let preset = a.preset.or(cfg.train.preset).unwrap_or_default();
    let mut model = preset.model();
    model.seed = seed;
    if let Some(e) = a.epochs.or(cfg.train.epochs) {
        model.epochs = e;
    }
    if let Some(lr) = a.lr.or(cfg.train.lr) {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(usage("--lr must be positive"));
        }
        model.lr = lr;
    }
    if let Some(b) = a.batch.or(cfg.train.batch) {
        if b == 0 {
            return Err(usage("--batch must be positive"));
        }
        model.batch = b;
    }

    let files = midi_files(&a.corpus)?;
    let clips: Vec<Clip> = par_map(&files, |p| read_clip(p)).into_iter().collect::<Result<_, _>>()?;
    let out = out_dir(a.out.as_ref(), cfg, "checkpoints");
    ensure_dir(&out)?;
    let mut log = String::new();
    let mut report = TrainReport {
        seed,
        preset,
        model: model.clone(),
        files: clips.len(),
        branches: Vec::new(),
        phrase_examples: 0,
        phrase_skipped: Vec::new(),
        phrase_final_nll: None,
    };

    if matches!(a.stage, StageArg::All | StageArg::Branches) {
        let pairs = pairs_from_clips(&clips).data(|| "extracting motif/variant pairs".into())?;
        if pairs.iter().all(Vec::is_empty) {
            return Err(CliError::Data(anyhow::anyhow!("no labeled variants in {}", a.corpus.display())));
        }
        let mut branches = BranchModel::new(&model).data(|| "building branches".into())?;
        for j in VariantType::ALL {
            let data = &pairs[j.index()];
            let name = format!("type{}", j.number());
            let mut summary = BranchSummary { variant_type: j.number(), pairs: data.len(), final_nll: None };
            if data.is_empty() {
                eprintln!("warning: no type-{} variants; branch left untrained", j.number());
            } else {
                let cfg_j = branches.branches[j.index()].config.clone();
                let trained = train_branch(data, &cfg_j, |_, _| {}, |_, _, _| false)
                    .data(|| format!("training branch {name}"))?;
                for (e, nll) in trained.trace.iter().enumerate() {
                    let _ = writeln!(log, "{e} {name} {nll:.6}");
                }
                summary.final_nll = trained.trace.last().copied();
                branches.branches[j.index()] = trained.model;
            }
            report.branches.push(summary);
        }
        let path = out.join(BRANCHES_FILE);
        save_branches(&path, &branches).data(|| format!("writing {}", path.display()))?;
    }

    if matches!(a.stage, StageArg::All | StageArg::Phrase) {
        let mut examples = Vec::new();
        for (i, clip) in clips.iter().enumerate() {
            match PhraseExample::from_clip(clip) {
                Ok(ex) if ex.target.len() <= model.max_len => examples.push(ex),
                Ok(ex) => report.phrase_skipped.push((i, format!("{} tokens exceed max_len {}", ex.target.len(), model.max_len))),
                Err(e) => report.phrase_skipped.push((i, e.to_string())),
            }
        }
        if examples.is_empty() {
            return Err(CliError::Data(anyhow::anyhow!("no clip in {} makes a phrase example", a.corpus.display())));
        }
        report.phrase_examples = examples.len();
        let (phrase, trace) =
            train_phrase(&examples, &model, |_, _| {}, |_, _, _| false).data(|| "training phrase model".into())?;
        for (e, nll) in trace.iter().enumerate() {
            let _ = writeln!(log, "{e} phrase {nll:.6}");
        }
        report.phrase_final_nll = trace.last().copied();
        let path = out.join(PHRASE_FILE);
        save_model(&path, &phrase).data(|| format!("writing {}", path.display()))?;
    }

    let log_path = out.join("loss.log");
    std::fs::write(&log_path, log).data(|| format!("cannot write {}", log_path.display()))?;
    write_json(&out.join("train.json"), &report)?;
    println!("trained on {} file(s); checkpoints in {}", report.files, out.display());
    Ok(())
}
