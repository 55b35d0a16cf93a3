//! Greedy or temperature sampling restricted to admissible tokens.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// 0 means greedy.
    pub temperature: f64,
    pub seed: u64,
    /// Phrase length in bars.
    pub target_bars: u32,
    /// Upper bound on emitted tokens, BOS and EOS included.
    pub max_len: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { temperature: 0.0, seed: 0, target_bars: 16, max_len: 1024 }
    }
}

/// Picks a token id among `allowed` from one row of logits. Greedy ties go
/// to the lowest id.
pub fn choose<R: Rng + ?Sized>(logits: &[f64], allowed: &[bool], temperature: f64, rng: &mut R) -> Option<usize> {
    let candidates: Vec<usize> = (0..logits.len()).filter(|&i| allowed[i]).collect();
    if candidates.is_empty() {
        return None;
    }
    if temperature <= 0.0 {
        let mut best = candidates[0];
        for &i in &candidates[1..] {
            if logits[i] > logits[best] {
                best = i;
            }
        }
        return Some(best);
    }
    let max = candidates.iter().map(|&i| logits[i]).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = candidates.iter().map(|&i| ((logits[i] - max) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return Some(candidates[k]);
        }
        u -= w;
    }
    candidates.last().copied()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn greedy_respects_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let logits = [5.0, 1.0, 3.0, 3.0];
        assert_eq!(choose(&logits, &[false, true, true, true], 0.0, &mut rng), Some(2));
        assert_eq!(choose(&logits, &[false; 4], 0.0, &mut rng), None);
    }

    #[test]
    fn temperature_samples_only_allowed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let logits = [0.0, 0.0, 10.0];
        for _ in 0..100 {
            assert_ne!(choose(&logits, &[true, true, false], 1.0, &mut rng), Some(2));
        }
    }
}
