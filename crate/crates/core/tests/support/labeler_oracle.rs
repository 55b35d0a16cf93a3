//! Straightforward reference labeler: recomputes everything per window from
//! the raw note list with integer arithmetic and an LCS-based subsequence
//! test. Shared with the acceptance suite.

use motif_core::{Clip, NoteEvent, VariantLabel, VariantType};

fn in_window(notes: &[NoteEvent], start: u32, len: u32) -> Vec<(u32, u8)> {
    notes.iter().filter(|n| n.start >= start && n.start < start + len).map(|n| (n.start - start, n.pitch)).collect()
}

fn trend(p: &[u8]) -> Vec<i32> {
    (1..p.len()).map(|i| (p[i] as i32 - p[i - 1] as i32).signum()).collect()
}

fn lcs<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            dp[i][j] = if a[i - 1] == b[j - 1] { dp[i - 1][j - 1] + 1 } else { dp[i - 1][j].max(dp[i][j - 1]) };
        }
    }
    dp[a.len()][b.len()]
}

fn contains<T: PartialEq>(long: &[T], short: &[T]) -> bool {
    lcs(long, short) == short.len()
}

pub fn reference_labels(clip: &Clip, motif_start: u32, motif_end: u32, step: u32) -> Vec<VariantLabel> {
    let len = motif_end - motif_start;
    let m = in_window(clip.melody(), motif_start, len);
    let st_m: Vec<u32> = m.iter().map(|x| x.0).collect();
    let p_m: Vec<u8> = m.iter().map(|x| x.1).collect();
    let tr_m = trend(&p_m);
    let mut out: Vec<VariantLabel> = Vec::new();
    let mut ws = motif_end;
    while ws + len <= clip.bars() * 16 {
        let free = out.iter().all(|v| v.end <= ws || ws + len <= v.start);
        let c = in_window(clip.melody(), ws, len);
        if free && c.len() >= 2 {
            let st_c: Vec<u32> = c.iter().map(|x| x.0).collect();
            let p_c: Vec<u8> = c.iter().map(|x| x.1).collect();
            let tr_c = trend(&p_c);
            let kind = if st_c == st_m {
                let n = p_m.len() as u64;
                let pm = p_m.iter().zip(&p_c).filter(|(a, b)| a == b).count() as u64;
                let tm = tr_m.iter().zip(&tr_c).filter(|(a, b)| a == b).count() as u64;
                let t = n - 1;
                // ratio >= 0.6  <=>  5k >= 3n ; ratio >= 0.2  <=>  5k >= n
                Some(if 5 * tm >= 3 * t {
                    if 5 * pm >= 3 * n {
                        VariantType::Repetition
                    } else {
                        VariantType::Progression
                    }
                } else if 5 * tm >= t {
                    VariantType::Transformation
                } else {
                    VariantType::Inversion
                })
            } else if (st_c.len() > st_m.len() && contains(&st_c, &st_m) && contains(&tr_c, &tr_m))
                || (st_m.len() > st_c.len() && contains(&st_m, &st_c) && contains(&tr_m, &tr_c))
            {
                Some(VariantType::ExpansionCompression)
            } else {
                None
            };
            if let Some(kind) = kind {
                out.push(VariantLabel::new(kind, ws, ws + len));
            }
        }
        ws += step;
    }
    out
}
