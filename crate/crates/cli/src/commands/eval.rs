use motif_core::metrics::CorpusStats;
use motif_core::Clip;

use crate::files::{midi_files, read_clip, write_json};
use crate::{CliError, EvalArgs};

pub fn run(a: &EvalArgs) -> Result<(), CliError> {
    let files = midi_files(&a.input)?;
    let clips: Vec<Clip> = files.iter().map(|p| read_clip(p)).collect::<Result<_, _>>()?;
    let stats = CorpusStats::compute(&clips);
    if stats.vp.is_none() {
        return Err(CliError::Data(anyhow::anyhow!("no variant labels in {}", a.input.display())));
    }
    print!("{}", stats.table(&a.name));
    if let Some(path) = &a.json {
        write_json(path, &stats)?;
    }
    Ok(())
}
