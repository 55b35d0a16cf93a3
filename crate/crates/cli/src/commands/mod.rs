pub mod dataset;
pub mod eval;
pub mod label;
pub mod melody;
pub mod motif;
pub mod synth;
pub mod train;

use std::path::{Path, PathBuf};

use motif_core::labeler::WindowStep;
use motif_core::ttmm::{text_to_va, CommandProvider, Key, LexiconProvider, VaPoint, VaProvider};

use crate::config::PipelineConfig;
use crate::{usage, CliError, DataContext, ProviderArg, StepArg};

/// Where valence and arousal come from for `motif` and `melody`.
pub(crate) struct VaSource<'a> {
    pub va: Option<&'a str>,
    pub text: Option<&'a str>,
    pub provider: Option<ProviderArg>,
    pub lexicon: Option<&'a Path>,
    pub va_command: Option<&'a str>,
}

pub(crate) fn resolve_va(src: &VaSource, cfg: &PipelineConfig) -> Result<VaPoint, CliError> {
    if let Some(va) = src.va {
        return va.parse().map_err(|e| usage(format!("--va: {e}")));
    }
    let Some(text) = src.text else {
        return Err(usage("give --va V,A or --text TEXT"));
    };
    let provider = match src.provider {
        Some(p) => p,
        None => match cfg.ttmm.provider.as_deref() {
            None | Some("lexicon") => ProviderArg::Lexicon,
            Some("command") => ProviderArg::Command,
            Some(other) => return Err(usage(format!("unknown VA provider `{other}` (lexicon or command)"))),
        },
    };
    let provider: Box<dyn VaProvider> = match provider {
        ProviderArg::Lexicon => match src.lexicon.map(Path::to_path_buf).or_else(|| cfg.ttmm.lexicon.clone()) {
            None => Box::new(LexiconProvider::builtin()),
            Some(path) => {
                let tsv = std::fs::read_to_string(&path).data(|| format!("cannot read lexicon {}", path.display()))?;
                Box::new(LexiconProvider::from_tsv(&tsv).data(|| format!("lexicon {}", path.display()))?)
            }
        },
        ProviderArg::Command => {
            let line = src
                .va_command
                .map(str::to_string)
                .or_else(|| cfg.ttmm.command.clone())
                .ok_or_else(|| usage("the command provider needs --va-command or [ttmm] command"))?;
            let mut words = line.split_whitespace().map(str::to_string);
            let program = words.next().ok_or_else(|| usage("empty VA command"))?;
            Box::new(CommandProvider { program, args: words.collect() })
        }
    };
    text_to_va(text, provider.as_ref()).data(|| "reading valence and arousal from text".into())
}

pub(crate) fn resolve_key(flag: Option<&str>, cfg: &PipelineConfig) -> Result<Key, CliError> {
    match flag.or(cfg.ttmm.key.as_deref()) {
        None => Ok(Key::default()),
        Some(k) => k.parse().map_err(|e| usage(format!("key: {e}"))),
    }
}

pub(crate) fn resolve_step(flag: Option<StepArg>, cfg: &PipelineConfig) -> Result<WindowStep, CliError> {
    match flag {
        Some(StepArg::Bar) => Ok(WindowStep::Bar),
        Some(StepArg::HalfBar) => Ok(WindowStep::HalfBar),
        None => match cfg.labeler.step.as_deref() {
            None | Some("bar") => Ok(WindowStep::Bar),
            Some("half-bar") => Ok(WindowStep::HalfBar),
            Some(other) => Err(usage(format!("unknown labeler step `{other}` (bar or half-bar)"))),
        },
    }
}

pub(crate) fn out_dir(flag: Option<&PathBuf>, cfg: &PipelineConfig, default: &str) -> PathBuf {
    flag.cloned().or_else(|| cfg.paths.out.clone()).unwrap_or_else(|| PathBuf::from(default))
}
