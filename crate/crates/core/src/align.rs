//! String-alignment kernels and bulk top-k similarity mining.
//!
//! Everything here operates on raw bytes, which covers both amino-acid
//! sequences and SMILES strings. The kernels are exact; the only accelerators
//! are the Levenshtein cutoff, the optional DP band, and the length-ratio
//! prune in [`mine_topk`] — none of which may change results.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("empty input sequence")]
    EmptyInput,
}

/// Linear-gap scoring scheme. `band` is a half-width: cells with
/// `|i - j| > band` are never opened.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AlignParams {
    pub match_score: i32,
    pub mismatch: i32,
    pub gap: i32,
    pub band: Option<usize>,
}

impl AlignParams {
    /// Defaults used for Needleman-Wunsch on SMILES: +1/-1/-1.
    pub fn nw_default() -> Self {
        AlignParams { match_score: 1, mismatch: -1, gap: -1, band: None }
    }

    /// Defaults used for Smith-Waterman on residues: +2/-1/-2.
    pub fn sw_default() -> Self {
        AlignParams { match_score: 2, mismatch: -1, gap: -2, band: None }
    }
}

impl Default for AlignParams {
    fn default() -> Self {
        Self::nw_default()
    }
}

/// Unit-cost edit distance. With a cutoff, returns `None` as soon as the
/// distance provably exceeds it (the row minimum is monotone in the row
/// index, so an early exit is exact).
pub fn levenshtein(a: &str, b: &str, cutoff: Option<usize>) -> Option<usize> {
    let a = a.as_bytes();
    let b = b.as_bytes();
    if a.is_empty() {
        return gate(b.len(), cutoff);
    }
    if b.is_empty() {
        return gate(a.len(), cutoff);
    }
    // Keep the shorter string on the row axis.
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if let Some(c) = cutoff {
        // Length difference is a lower bound on the distance.
        if long.len() - short.len() > c {
            return None;
        }
    }
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut cur = vec![0usize; short.len() + 1];
    for (i, &cl) in long.iter().enumerate() {
        cur[0] = i + 1;
        let mut row_min = cur[0];
        for (j, &cs) in short.iter().enumerate() {
            let sub = prev[j] + usize::from(cl != cs);
            let del = prev[j + 1] + 1;
            let ins = cur[j] + 1;
            let v = sub.min(del).min(ins);
            cur[j + 1] = v;
            row_min = row_min.min(v);
        }
        if let Some(c) = cutoff {
            if row_min > c {
                return None;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    gate(prev[short.len()], cutoff)
}

fn gate(d: usize, cutoff: Option<usize>) -> Option<usize> {
    match cutoff {
        Some(c) if d > c => None,
        _ => Some(d),
    }
}

/// Normalized edit distance: `lev(a, b) / max(|a|, |b|)`, in [0, 1].
pub fn seq_difference(a: &str, b: &str) -> Result<f64, AlignError> {
    if a.is_empty() || b.is_empty() {
        return Err(AlignError::EmptyInput);
    }
    let d = levenshtein(a, b, None).expect("no cutoff");
    Ok(d as f64 / a.len().max(b.len()) as f64)
}

/// Global alignment score with linear gaps.
pub fn needleman_wunsch(a: &str, b: &str, p: &AlignParams) -> i64 {
    let a = a.as_bytes();
    let b = b.as_bytes();
    let n = a.len();
    let m = b.len();
    let band = p.band.unwrap_or(usize::MAX);
    const NEG: i64 = i64::MIN / 4;
    let mut prev = vec![NEG; m + 1];
    let mut cur = vec![NEG; m + 1];
    for (j, slot) in prev.iter_mut().enumerate() {
        if j <= band {
            *slot = p.gap as i64 * j as i64;
        }
    }
    for i in 1..=n {
        for slot in cur.iter_mut() {
            *slot = NEG;
        }
        if i <= band {
            cur[0] = p.gap as i64 * i as i64;
        }
        let lo = i.saturating_sub(band).max(1);
        let hi = m.min(i.saturating_add(band));
        for j in lo..=hi {
            let s = if a[i - 1] == b[j - 1] { p.match_score } else { p.mismatch } as i64;
            let mut best = prev[j - 1] + s;
            if prev[j] > NEG {
                best = best.max(prev[j] + p.gap as i64);
            }
            if cur[j - 1] > NEG {
                best = best.max(cur[j - 1] + p.gap as i64);
            }
            cur[j] = best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// NW score normalized by `match * max(len)`, clamped to [0, 1].
pub fn nw_similarity(a: &str, b: &str, p: &AlignParams) -> Result<f64, AlignError> {
    if a.is_empty() || b.is_empty() {
        return Err(AlignError::EmptyInput);
    }
    let score = needleman_wunsch(a, b, p) as f64;
    let denom = p.match_score as f64 * a.len().max(b.len()) as f64;
    Ok((score / denom).clamp(0.0, 1.0))
}

/// Best local alignment score (DP with floor zero).
pub fn smith_waterman(a: &str, b: &str, p: &AlignParams) -> i64 {
    let a = a.as_bytes();
    let b = b.as_bytes();
    let m = b.len();
    let band = p.band.unwrap_or(usize::MAX);
    let mut prev = vec![0i64; m + 1];
    let mut cur = vec![0i64; m + 1];
    let mut best = 0i64;
    for i in 1..=a.len() {
        for slot in cur.iter_mut() {
            *slot = 0;
        }
        let lo = i.saturating_sub(band).max(1);
        let hi = m.min(i.saturating_add(band));
        for j in lo..=hi {
            let s = if a[i - 1] == b[j - 1] { p.match_score } else { p.mismatch } as i64;
            let v = (prev[j - 1] + s)
                .max(prev[j] + p.gap as i64)
                .max(cur[j - 1] + p.gap as i64)
                .max(0);
            cur[j] = v;
            best = best.max(v);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Similarity used when mining neighbors.
#[derive(Debug, Clone)]
pub enum SimilarityMetric {
    /// `1 - seq_difference`, for residue sequences.
    EditSimilarity,
    /// `nw_similarity` under the given params, for reaction strings.
    NwSimilarity(AlignParams),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopKEntry {
    pub query: String,
    /// (candidate id, similarity), similarity non-increasing, ties by id.
    pub hits: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopKTable {
    pub entries: Vec<TopKEntry>,
}

impl TopKTable {
    /// TSV layout: query_id, rank, candidate_id, similarity.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "query_id\trank\tcandidate_id\tsimilarity")?;
        for e in &self.entries {
            for (rank, (cand, sim)) in e.hits.iter().enumerate() {
                writeln!(w, "{}\t{}\t{}\t{:.6}", e.query, rank + 1, cand, sim)?;
            }
        }
        Ok(())
    }
}

/// Candidate ordering inside a heap entry: higher similarity wins, ties go to
/// the lexicographically smaller id.
fn beats(sim: f64, id: &str, other_sim: f64, other_id: &str) -> bool {
    sim > other_sim || (sim == other_sim && id < other_id)
}

/// Exact top-k most similar candidates per query. Candidates with the same id
/// as the query are skipped. With `prune` on, a candidate is skipped when the
/// length-ratio bound `min(len)/max(len)` already falls strictly below the
/// current k-th similarity; this bound holds for both metrics.
pub fn mine_topk(
    queries: &[(String, String)],
    candidates: &[(String, String)],
    metric: &SimilarityMetric,
    k: usize,
    prune: bool,
) -> TopKTable {
    assert!(k >= 1, "k must be >= 1");
    let entries: Vec<TopKEntry> = queries
        .par_iter()
        .map(|(qid, qseq)| {
            // Worst hit sits at the end of the sorted buffer.
            let mut hits: Vec<(f64, &str)> = Vec::with_capacity(k + 1);
            for (cid, cseq) in candidates {
                if cid == qid {
                    continue;
                }
                if qseq.is_empty() || cseq.is_empty() {
                    continue;
                }
                let (lmin, lmax) = if qseq.len() <= cseq.len() {
                    (qseq.len(), cseq.len())
                } else {
                    (cseq.len(), qseq.len())
                };
                let worst = hits.last().map(|&(s, _)| s);
                if prune && hits.len() == k {
                    let bound = lmin as f64 / lmax as f64;
                    if bound < worst.expect("heap full") {
                        continue;
                    }
                }
                let sim = match metric {
                    SimilarityMetric::EditSimilarity => {
                        let cutoff = if hits.len() == k {
                            // sim >= worst  <=>  d <= (1 - worst) * lmax
                            Some(((1.0 - worst.expect("heap full")) * lmax as f64).floor() as usize)
                        } else {
                            None
                        };
                        match levenshtein(qseq, cseq, cutoff) {
                            Some(d) => 1.0 - d as f64 / lmax as f64,
                            None => continue,
                        }
                    }
                    SimilarityMetric::NwSimilarity(p) => {
                        nw_similarity(qseq, cseq, p).expect("non-empty")
                    }
                };
                if hits.len() == k {
                    let (ws, wid) = *hits.last().expect("heap full");
                    if !beats(sim, cid, ws, wid) {
                        continue;
                    }
                    hits.pop();
                }
                let pos = hits
                    .partition_point(|&(s, id)| beats(s, id, sim, cid));
                hits.insert(pos, (sim, cid));
            }
            TopKEntry {
                query: qid.clone(),
                hits: hits.into_iter().map(|(s, id)| (id.to_string(), s)).collect(),
            }
        })
        .collect();
    TopKTable { entries }
}
