//! Variant Proportion and Variant Distance over a labeled corpus.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clip::{Clip, TICKS_PER_BEAT};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("corpus contains no variant labels; proportions are undefined")]
    NoVariants,
    #[error("no clip has two or more labeled regions; distance is undefined")]
    NoPairs,
}

/// Share of each variant type among all variants, indexed by type - 1.
pub fn proportions_from_counts(counts: &[u64; 5]) -> Result<[f64; 5], MetricsError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(MetricsError::NoVariants);
    }
    Ok(counts.map(|n| n as f64 / total as f64))
}

pub fn variant_counts<'a>(corpus: impl IntoIterator<Item = &'a Clip>) -> [u64; 5] {
    let mut counts = [0u64; 5];
    for clip in corpus {
        for v in clip.variant_labels() {
            counts[v.kind.index()] += 1;
        }
    }
    counts
}

pub fn variant_proportion(corpus: &[Clip]) -> Result<[f64; 5], MetricsError> {
    proportions_from_counts(&variant_counts(corpus))
}

/// Sum of consecutive region-start gaps in beats and the number of gaps.
/// Motif starts count as regions.
fn start_gaps(clip: &Clip) -> (f64, u64) {
    let mut starts: Vec<u32> = clip
        .motif_labels()
        .iter()
        .map(|m| m.start)
        .chain(clip.variant_labels().iter().map(|v| v.start))
        .collect();
    starts.sort_unstable();
    let sum: u32 = starts.windows(2).map(|w| w[1] - w[0]).sum();
    (sum as f64 / TICKS_PER_BEAT as f64, starts.len().saturating_sub(1) as u64)
}

/// Mean gap in beats between consecutive motif/variant onsets, pooled over
/// all clips.
pub fn variant_distance(corpus: &[Clip]) -> Result<f64, MetricsError> {
    let (sum, pairs) = corpus.iter().map(start_gaps).fold((0.0, 0), |(s, n), (ds, dn)| (s + ds, n + dn));
    if pairs == 0 {
        return Err(MetricsError::NoPairs);
    }
    Ok(sum / pairs as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub samples: usize,
    pub counts: [u64; 5],
    pub pair_count: u64,
    pub vp: Option<[f64; 5]>,
    pub vd: Option<f64>,
}

impl CorpusStats {
    pub fn compute(corpus: &[Clip]) -> Self {
        let counts = variant_counts(corpus);
        Self {
            samples: corpus.len(),
            counts,
            pair_count: corpus.iter().map(|c| start_gaps(c).1).sum(),
            vp: proportions_from_counts(&counts).ok(),
            vd: variant_distance(corpus).ok(),
        }
    }

    /// Fixed-width table: VP_1..VP_5 then VD.
    pub fn table(&self, row_name: &str) -> String {
        let cell = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        let mut header = format!("{:<16}", "Model");
        let mut row = format!("{row_name:<16}");
        for i in 0..5 {
            header.push_str(&format!("{:>8}", format!("VP_{}", i + 1)));
            row.push_str(&format!("{:>8}", cell(self.vp.map(|vp| vp[i]))));
        }
        header.push_str(&format!("{:>8}", "VD"));
        row.push_str(&format!("{:>8}", cell(self.vd)));
        format!("{header}\n{row}\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clip::{MotifLabel, NoteEvent, VariantLabel, VariantType};

    fn labeled(motif_start: u32, variants: &[(VariantType, u32)]) -> Clip {
        let notes = (0..16).map(|i| NoteEvent::new(i * 4, 4, 60)).collect();
        Clip::with_bars(
            4,
            notes,
            vec![],
            vec![MotifLabel::new(motif_start, motif_start + 4)],
            variants.iter().map(|&(k, s)| VariantLabel::new(k, s, s + 4)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn reference_counts() {
        let vp = proportions_from_counts(&[2744, 1497, 1372, 6362, 499]).unwrap();
        let rounded: Vec<f64> = vp.iter().map(|x| (x * 100.0).round() / 100.0).collect();
        assert_eq!(rounded, vec![0.22, 0.12, 0.11, 0.51, 0.04]);
    }

    #[test]
    fn single_type_three() {
        let vp = variant_proportion(&[labeled(0, &[(VariantType::Transformation, 16)])]).unwrap();
        assert_eq!(vp, [0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn two_clip_hand_count() {
        let corpus = [
            labeled(0, &[(VariantType::Repetition, 16)]),
            labeled(
                0,
                &[(VariantType::Repetition, 16), (VariantType::ExpansionCompression, 32), (VariantType::ExpansionCompression, 48)],
            ),
        ];
        assert_eq!(variant_proportion(&corpus).unwrap(), [0.5, 0.0, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn no_variants_is_an_error() {
        assert_eq!(variant_proportion(&[labeled(0, &[])]), Err(MetricsError::NoVariants));
    }

    #[test]
    fn distances() {
        // starts at beats 4 and 12
        let one = labeled(16, &[(VariantType::Repetition, 48)]);
        assert_eq!(variant_distance(&[one]).unwrap(), 8.0);
        // starts at beats 0, 6, 10
        let three = labeled(0, &[(VariantType::Repetition, 24), (VariantType::Progression, 40)]);
        assert_eq!(variant_distance(&[three]).unwrap(), 5.0);
        assert_eq!(variant_distance(&[labeled(0, &[])]), Err(MetricsError::NoPairs));
    }

    #[test]
    fn table_layout() {
        let stats = CorpusStats::compute(&[labeled(0, &[(VariantType::Repetition, 16)])]);
        let t = stats.table("corpus");
        assert!(t.starts_with("Model"));
        assert!(t.contains("1.00"));
        assert!(t.lines().nth(1).unwrap().trim_end().ends_with("4.00"));
    }
}
