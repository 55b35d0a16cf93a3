//! MIDI and JSON file plumbing shared by the commands.

use std::path::{Path, PathBuf};

use motif_core::{parse_midi, write_midi, Clip};
use serde::Serialize;

use crate::{CliError, DataContext};

fn is_midi(p: &Path) -> bool {
    p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"))
}

/// The MIDI file itself, or the `.mid`/`.midi` files directly inside a
/// directory, sorted by name.
pub fn midi_files(input: &Path) -> Result<Vec<PathBuf>, CliError> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    if !input.is_dir() {
        return Err(CliError::Data(anyhow::anyhow!("{} does not exist", input.display())));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(input)
        .data(|| format!("cannot list {}", input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_midi(p))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!("no .mid files in {}", input.display())));
    }
    Ok(files)
}

pub fn read_clip(path: &Path) -> Result<Clip, CliError> {
    let bytes = std::fs::read(path).data(|| format!("cannot read {}", path.display()))?;
    parse_midi(&bytes).data(|| format!("{}", path.display()))
}

pub fn write_clip(path: &Path, clip: &Clip) -> Result<(), CliError> {
    ensure_parent(path)?;
    std::fs::write(path, write_midi(clip)).data(|| format!("cannot write {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value).data(|| "cannot serialize report".into())?;
    std::fs::write(path, text + "\n").data(|| format!("cannot write {}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).data(|| format!("cannot create {}", dir.display()))
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

pub fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Applies `f` to every item on scoped threads; results keep input order.
pub fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<U>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_keeps_order() {
        let xs: Vec<u32> = (0..1000).collect();
        assert_eq!(par_map(&xs, |x| x * 2), xs.iter().map(|x| x * 2).collect::<Vec<_>>());
        assert!(par_map(&[] as &[u32], |x| *x).is_empty());
    }
}
