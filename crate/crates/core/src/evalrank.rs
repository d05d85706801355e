//! Ranking and classification evaluation over dense score matrices, the
//! local-alignment annotation-transfer baseline, and report emission.
//!
//! Ranking semantics follow a stable descending argsort: rank 1 is the
//! highest logit, ties break by original column index. Per-row statistics
//! average over ALL positives of the row (so MRR here is the mean reciprocal
//! rank over every positive, not first-hit MRR), then average over rows.
//! Rows without positives are excluded and counted.

use crate::align::{smith_waterman, AlignParams};
use crate::dataio::{Corpus, SplitManifest};
use crate::mat::Mat;
use crate::model::score::{EnzymeInput, ReactionInput};
use crate::model::{ModelError, ModelParams};
use crate::splitgen::NegativeSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("non-finite score at row {row}, col {col}")]
    NonFiniteScore { row: usize, col: usize },
    #[error("scores are {srows}x{scols} but labels are {lrows}x{lcols}")]
    DimMismatch { srows: usize, scols: usize, lrows: usize, lcols: usize },
    #[error("empty candidate pool")]
    EmptyPool,
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Dense logits: rows are queries, cols are candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    /// Row-major, len = rows * cols.
    pub values: Vec<f32>,
}

impl ScoreMatrix {
    pub fn rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.col_ids.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.values[i * self.cols() + j]
    }

    pub fn from_mat(row_ids: Vec<String>, col_ids: Vec<String>, m: &Mat) -> Self {
        assert_eq!((m.rows, m.cols), (row_ids.len(), col_ids.len()));
        ScoreMatrix { row_ids, col_ids, values: m.data.iter().map(|&v| v as f32).collect() }
    }
}

/// Sparse binary labels aligned to a ScoreMatrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Sorted positive column indices per row.
    pub positives: Vec<Vec<u32>>,
}

impl LabelMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        LabelMatrix { rows, cols, positives: vec![Vec::new(); rows] }
    }

    pub fn set(&mut self, row: usize, col: usize) {
        let v = &mut self.positives[row];
        if let Err(pos) = v.binary_search(&(col as u32)) {
            v.insert(pos, col as u32);
        }
    }

    pub fn is_positive(&self, row: usize, col: usize) -> bool {
        self.positives[row].binary_search(&(col as u32)).is_ok()
    }
}

pub const K_LIST: [usize; 8] = [1, 2, 3, 4, 5, 10, 20, 50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ks: Vec<usize>,
    pub top_acc: Vec<f64>,
    pub top_acc_n: Vec<f64>,
    pub mean_rank: f64,
    pub mrr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auroc: Option<f64>,
    /// Rows dropped for having no positives (plus, when enabled, rows with
    /// all-equal scores that carry no ranking information).
    pub excluded_rows: usize,
    pub evaluated_rows: usize,
}

impl MetricsReport {
    pub fn top_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.top_acc[i])
    }

    /// Fixed-layout TSV row mirroring the usual table columns
    /// (Top1..Top20, Top1-N..Top20-N, Mean Rank, MRR).
    pub fn write_tsv_row<W: Write>(&self, label: &str, mut w: W) -> std::io::Result<()> {
        let cols: Vec<usize> = K_LIST.iter().copied().filter(|&k| k <= 20).collect();
        write!(w, "{label}")?;
        for &k in &cols {
            let i = self.ks.iter().position(|&x| x == k).expect("k present");
            write!(w, "\t{:.4}", self.top_acc[i])?;
        }
        for &k in &cols {
            let i = self.ks.iter().position(|&x| x == k).expect("k present");
            write!(w, "\t{:.4}", self.top_acc_n[i])?;
        }
        writeln!(w, "\t{:.4}\t{:.4}", self.mean_rank, self.mrr)
    }

    pub fn tsv_header() -> String {
        let cols: Vec<usize> = K_LIST.iter().copied().filter(|&k| k <= 20).collect();
        let mut h = String::from("model");
        for k in &cols {
            h.push_str(&format!("\tTop{k}"));
        }
        for k in &cols {
            h.push_str(&format!("\tTop{k}-N"));
        }
        h.push_str("\tMean Rank\tMRR");
        h
    }
}

/// Per-row 1-indexed ranks under a stable descending argsort: rank of column
/// j is the position of j when sorting by (value desc, index asc).
pub fn rank_rows(scores: &ScoreMatrix) -> Result<Vec<Vec<u32>>, EvalError> {
    let cols = scores.cols();
    (0..scores.rows())
        .map(|i| {
            let row = &scores.values[i * cols..(i + 1) * cols];
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(EvalError::NonFiniteScore { row: i, col: j });
            }
            let mut order: Vec<u32> = (0..cols as u32).collect();
            order.sort_by(|&a, &b| {
                row[b as usize]
                    .partial_cmp(&row[a as usize])
                    .expect("finite")
                    .then_with(|| a.cmp(&b))
            });
            let mut ranks = vec![0u32; cols];
            for (pos, &col) in order.iter().enumerate() {
                ranks[col as usize] = pos as u32 + 1;
            }
            Ok(ranks)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RankingOptions {
    /// Drop rows whose scores are all equal (no ranking information); used by
    /// the alignment baseline where unmatched queries produce all-zero rows.
    pub exclude_constant_rows: bool,
}

/// Ranking metrics averaged per row over positives, then over rows.
pub fn ranking_metrics(
    scores: &ScoreMatrix,
    labels: &LabelMatrix,
    opts: RankingOptions,
) -> Result<MetricsReport, EvalError> {
    if scores.rows() != labels.rows || scores.cols() != labels.cols {
        return Err(EvalError::DimMismatch {
            srows: scores.rows(),
            scols: scores.cols(),
            lrows: labels.rows,
            lcols: labels.cols,
        });
    }
    if scores.rows() == 0 || scores.cols() == 0 {
        return Err(EvalError::EmptyPool);
    }
    let ranks = rank_rows(scores)?;
    let cols = scores.cols();
    let mut excluded = 0usize;
    let mut rows_used = 0usize;
    let mut mean_rank_sum = 0.0;
    let mut mrr_sum = 0.0;
    let mut top_hits = vec![0.0; K_LIST.len()];
    let mut top_n = vec![0.0; K_LIST.len()];
    for i in 0..scores.rows() {
        let pos = &labels.positives[i];
        if pos.is_empty() {
            excluded += 1;
            continue;
        }
        if opts.exclude_constant_rows {
            let row = &scores.values[i * cols..(i + 1) * cols];
            if row.iter().all(|&v| v == row[0]) {
                excluded += 1;
                continue;
            }
        }
        rows_used += 1;
        let n_pos = pos.len() as f64;
        let mut rank_acc = 0.0;
        let mut rr_acc = 0.0;
        for &c in pos {
            let r = ranks[i][c as usize] as f64;
            rank_acc += r;
            rr_acc += 1.0 / r;
        }
        mean_rank_sum += rank_acc / n_pos;
        mrr_sum += rr_acc / n_pos;
        for (ki, &k) in K_LIST.iter().enumerate() {
            let in_k = pos.iter().filter(|&&c| (ranks[i][c as usize] as usize) <= k).count();
            if in_k > 0 {
                top_hits[ki] += 1.0;
            }
            top_n[ki] += in_k as f64 / k as f64;
        }
    }
    if rows_used == 0 {
        // no informative rows: report zeros with everything excluded
        return Ok(MetricsReport {
            ks: K_LIST.to_vec(),
            top_acc: vec![0.0; K_LIST.len()],
            top_acc_n: vec![0.0; K_LIST.len()],
            mean_rank: 0.0,
            mrr: 0.0,
            accuracy: None,
            auroc: None,
            excluded_rows: excluded,
            evaluated_rows: 0,
        });
    }
    let n = rows_used as f64;
    Ok(MetricsReport {
        ks: K_LIST.to_vec(),
        top_acc: top_hits.into_iter().map(|v| v / n).collect(),
        top_acc_n: top_n.into_iter().map(|v| v / n).collect(),
        mean_rank: mean_rank_sum / n,
        mrr: mrr_sum / n,
        accuracy: None,
        auroc: None,
        excluded_rows: excluded,
        evaluated_rows: rows_used,
    })
}

/// Accuracy at a logit threshold plus AUROC by the Mann-Whitney rank
/// statistic with midrank tie handling. AUROC is None when only one class
/// is present.
pub fn classification_metrics(
    logits: &[f64],
    labels: &[u8],
    threshold: f64,
) -> Result<(f64, Option<f64>), EvalError> {
    if logits.is_empty() || logits.len() != labels.len() {
        return Err(EvalError::EmptyInput);
    }
    let correct = logits
        .iter()
        .zip(labels)
        .filter(|(&y, &l)| (y > threshold) == (l == 1))
        .count();
    let accuracy = correct as f64 / logits.len() as f64;

    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok((accuracy, None));
    }
    let mut order: Vec<usize> = (0..logits.len()).collect();
    order.sort_by(|&a, &b| logits[a].partial_cmp(&logits[b]).expect("finite"));
    let mut ranks = vec![0.0; logits.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && logits[order[j + 1]] == logits[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 =
        labels.iter().zip(&ranks).filter(|(&l, _)| l == 1).map(|(_, &r)| r).sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok((accuracy, Some(u / (n_pos as f64 * n_neg as f64))))
}

/// Annotation transfer by best local alignment: each query inherits the
/// reactions of its best-scoring training sequence when that score clears
/// `threshold_factor * match * min(len)`; otherwise its row stays zero.
pub fn baseline_score(
    train: &[(String, String)],
    annotations: &HashMap<String, BTreeSet<String>>,
    queries: &[(String, String)],
    col_ids: &[String],
    params: &AlignParams,
    threshold_factor: f64,
) -> ScoreMatrix {
    let col_index: HashMap<&str, usize> =
        col_ids.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let rows: Vec<Vec<f32>> = queries
        .par_iter()
        .map(|(_, qseq)| {
            let mut best: Option<(i64, &str)> = None;
            for (tid, tseq) in train {
                let score = smith_waterman(qseq, tseq, params);
                let min_len = qseq.len().min(tseq.len()) as f64;
                if score as f64 >= threshold_factor * params.match_score as f64 * min_len {
                    let better = match best {
                        None => true,
                        Some((bs, bid)) => score > bs || (score == bs && tid.as_str() < bid),
                    };
                    if better {
                        best = Some((score, tid));
                    }
                }
            }
            let mut row = vec![0.0f32; col_ids.len()];
            if let Some((_, tid)) = best {
                if let Some(reactions) = annotations.get(tid) {
                    for r in reactions {
                        if let Some(&j) = col_index.get(r.as_str()) {
                            row[j] = 1.0;
                        }
                    }
                }
            }
            row
        })
        .collect();
    ScoreMatrix {
        row_ids: queries.iter().map(|(id, _)| id.clone()).collect(),
        col_ids: col_ids.to_vec(),
        values: rows.into_iter().flatten().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Rows are test enzymes, candidates are reactions.
    EnzymeToReactions,
    /// Rows are test reactions, candidates are enzymes.
    ReactionToEnzymes,
}

/// Candidate pool for retrieval rows.
pub enum CandidatePool<'a> {
    /// Positives plus mined negatives restricted to the test set.
    WithNegatives(&'a NegativeSet),
    /// Every enzyme/reaction in the corpus.
    FullCatalog,
}

pub struct EvalOutcome {
    pub scores: ScoreMatrix,
    pub labels: LabelMatrix,
    pub report: MetricsReport,
}

/// Score the test portion of a split with the trained model and run the
/// ranking metrics in the requested direction.
pub fn evaluate_split(
    params: &ModelParams,
    corpus: &Corpus,
    manifest: &SplitManifest,
    direction: Direction,
    pool: CandidatePool,
    vocab: &crate::chemgraph::ElementVocab,
) -> Result<EvalOutcome, EvalError> {
    let test_pairs: Vec<&crate::dataio::Pair> =
        manifest.test.iter().map(|&i| &corpus.pairs.pairs[i]).collect();
    if test_pairs.is_empty() {
        return Err(EvalError::EmptyPool);
    }
    // row entities: ids in first-seen order; candidate pool per direction
    let mut row_keys: Vec<u32> = Vec::new();
    let mut seen_rows = HashSet::new();
    for p in &test_pairs {
        let key = match direction {
            Direction::EnzymeToReactions => p.enzyme,
            Direction::ReactionToEnzymes => p.reaction,
        };
        if seen_rows.insert(key) {
            row_keys.push(key);
        }
    }
    let mut col_keys: Vec<u32> = Vec::new();
    let mut seen_cols = HashSet::new();
    let add_col = |key: u32, col_keys: &mut Vec<u32>, seen: &mut HashSet<u32>| {
        if seen.insert(key) {
            col_keys.push(key);
        }
    };
    match pool {
        CandidatePool::FullCatalog => match direction {
            Direction::EnzymeToReactions => {
                for i in 0..corpus.pairs.reaction_ids.len() {
                    add_col(i as u32, &mut col_keys, &mut seen_cols);
                }
            }
            Direction::ReactionToEnzymes => {
                for i in 0..corpus.pairs.enzyme_ids.len() {
                    add_col(i as u32, &mut col_keys, &mut seen_cols);
                }
            }
        },
        CandidatePool::WithNegatives(negatives) => {
            for p in &test_pairs {
                let key = match direction {
                    Direction::EnzymeToReactions => p.reaction,
                    Direction::ReactionToEnzymes => p.enzyme,
                };
                add_col(key, &mut col_keys, &mut seen_cols);
            }
            let row_set: HashSet<u32> = row_keys.iter().copied().collect();
            for n in &negatives.negatives {
                let (row_id, col_id) = match direction {
                    Direction::EnzymeToReactions => (&n.enzyme_id, &n.reaction_id),
                    Direction::ReactionToEnzymes => (&n.reaction_id, &n.enzyme_id),
                };
                // only columns anchored on a test row matter
                let row_intern = match direction {
                    Direction::EnzymeToReactions => {
                        corpus.pairs.enzyme_ids.iter().position(|x| x == row_id)
                    }
                    Direction::ReactionToEnzymes => {
                        corpus.pairs.reaction_ids.iter().position(|x| x == row_id)
                    }
                };
                let col_intern = match direction {
                    Direction::EnzymeToReactions => {
                        corpus.pairs.reaction_ids.iter().position(|x| x == col_id)
                    }
                    Direction::ReactionToEnzymes => {
                        corpus.pairs.enzyme_ids.iter().position(|x| x == col_id)
                    }
                };
                if let (Some(r), Some(c)) = (row_intern, col_intern) {
                    if row_set.contains(&(r as u32)) {
                        add_col(c as u32, &mut col_keys, &mut seen_cols);
                    }
                }
            }
        }
    }
    if col_keys.is_empty() {
        return Err(EvalError::EmptyPool);
    }

    // model inputs per entity
    let enzyme_input = |intern: u32| -> Result<EnzymeInput, ModelError> {
        let rec = &corpus.enzymes[corpus.enzyme_of_intern[intern as usize]];
        EnzymeInput::from_record(rec, params.config.enzyme_mode)
    };
    let reaction_input = |intern: u32| -> ReactionInput {
        let rec = &corpus.reactions[corpus.reaction_of_intern[intern as usize]];
        ReactionInput::from_record(rec, &params.config)
    };
    let (enzyme_keys, reaction_keys): (Vec<u32>, Vec<u32>) = match direction {
        Direction::EnzymeToReactions => (row_keys.clone(), col_keys.clone()),
        Direction::ReactionToEnzymes => (col_keys.clone(), row_keys.clone()),
    };
    let enzymes: Vec<EnzymeInput> =
        enzyme_keys.iter().map(|&k| enzyme_input(k)).collect::<Result<_, _>>()?;
    let reactions: Vec<ReactionInput> = reaction_keys.iter().map(|&k| reaction_input(k)).collect();
    let logits =
        crate::model::score::score_matrix(params, &reactions, &enzymes, vocab)?;

    // orient rows/cols per direction
    let m = match direction {
        Direction::EnzymeToReactions => logits,
        Direction::ReactionToEnzymes => {
            let mut t = Mat::zeros(logits.cols, logits.rows);
            for i in 0..logits.rows {
                for j in 0..logits.cols {
                    t.set(j, i, logits.get(i, j));
                }
            }
            t
        }
    };
    let row_ids: Vec<String> = row_keys
        .iter()
        .map(|&k| match direction {
            Direction::EnzymeToReactions => corpus.pairs.enzyme_ids[k as usize].clone(),
            Direction::ReactionToEnzymes => corpus.pairs.reaction_ids[k as usize].clone(),
        })
        .collect();
    let col_ids: Vec<String> = col_keys
        .iter()
        .map(|&k| match direction {
            Direction::EnzymeToReactions => corpus.pairs.reaction_ids[k as usize].clone(),
            Direction::ReactionToEnzymes => corpus.pairs.enzyme_ids[k as usize].clone(),
        })
        .collect();
    let scores = ScoreMatrix::from_mat(row_ids, col_ids, &m);

    let row_pos: BTreeMap<u32, usize> =
        row_keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let col_pos: BTreeMap<u32, usize> =
        col_keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let mut labels = LabelMatrix::new(row_keys.len(), col_keys.len());
    for p in &test_pairs {
        if p.label != 1 {
            continue;
        }
        let (rk, ck) = match direction {
            Direction::EnzymeToReactions => (p.enzyme, p.reaction),
            Direction::ReactionToEnzymes => (p.reaction, p.enzyme),
        };
        if let (Some(&r), Some(&c)) = (row_pos.get(&rk), col_pos.get(&ck)) {
            labels.set(r, c);
        }
    }
    let report = ranking_metrics(&scores, &labels, RankingOptions::default())?;
    Ok(EvalOutcome { scores, labels, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn sm(rows: usize, cols: usize, values: Vec<f32>) -> ScoreMatrix {
        ScoreMatrix {
            row_ids: (0..rows).map(|i| format!("q{i}")).collect(),
            col_ids: (0..cols).map(|i| format!("c{i}")).collect(),
            values,
        }
    }

    #[test]
    fn rank_rows_examples() {
        let s = sm(3, 3, vec![3.0, 1.0, 2.0, 2.0, 2.0, 1.0, 5.0, 5.0, 5.0]);
        let r = rank_rows(&s).unwrap();
        assert_eq!(r[0], vec![1, 3, 2]);
        assert_eq!(r[1], vec![1, 2, 3]); // stable tie-break
        assert_eq!(r[2], vec![1, 2, 3]); // all equal: column order
    }

    #[test]
    fn rank_rows_rejects_nan() {
        let s = sm(1, 2, vec![1.0, f32::NAN]);
        assert!(matches!(rank_rows(&s), Err(EvalError::NonFiniteScore { row: 0, col: 1 })));
    }

    #[test]
    fn ranking_metrics_single_positive() {
        let s = sm(1, 3, vec![0.9, 0.1, 0.5]);
        let mut l = LabelMatrix::new(1, 3);
        l.set(0, 0);
        let r = ranking_metrics(&s, &l, RankingOptions::default()).unwrap();
        assert_eq!(r.mean_rank, 1.0);
        assert_eq!(r.mrr, 1.0);
        assert_eq!(r.top_at(1), Some(1.0));
    }

    #[test]
    fn ranking_metrics_multi_positive_listing_semantics() {
        let s = sm(1, 3, vec![0.9, 0.8, 0.1]);
        let mut l = LabelMatrix::new(1, 3);
        l.set(0, 1);
        l.set(0, 2);
        let r = ranking_metrics(&s, &l, RankingOptions::default()).unwrap();
        assert!((r.mean_rank - 2.5).abs() < 1e-12);
        assert!((r.mrr - 5.0 / 12.0).abs() < 1e-12);
        assert_eq!(r.top_at(1), Some(0.0));
        assert_eq!(r.top_at(2), Some(1.0));
        let i2 = r.ks.iter().position(|&k| k == 2).unwrap();
        assert!((r.top_acc_n[i2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ground_truth_scoring_single_positive_rows_all_ones() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let rows = rng.gen_range(1..8);
            let cols = rng.gen_range(2..9);
            let mut values = vec![0.0f32; rows * cols];
            let mut l = LabelMatrix::new(rows, cols);
            for i in 0..rows {
                let c = rng.gen_range(0..cols);
                l.set(i, c);
                values[i * cols + c] = 1.0;
            }
            let s = sm(rows, cols, values);
            let r = ranking_metrics(&s, &l, RankingOptions::default()).unwrap();
            assert_eq!(r.mean_rank, 1.0);
            assert_eq!(r.mrr, 1.0);
            assert_eq!(r.top_at(1), Some(1.0));
            let i1 = 0;
            assert_eq!(r.top_acc_n[i1], 1.0);
        }
    }

    #[test]
    fn zero_positive_rows_excluded_and_counted() {
        let s = sm(2, 2, vec![1.0, 0.0, 0.5, 0.4]);
        let mut l = LabelMatrix::new(2, 2);
        l.set(1, 1);
        let r = ranking_metrics(&s, &l, RankingOptions::default()).unwrap();
        assert_eq!(r.excluded_rows, 1);
        assert_eq!(r.evaluated_rows, 1);
        assert_eq!(r.mean_rank, 2.0);
    }

    #[test]
    fn constant_rows_excluded_when_requested() {
        let s = sm(2, 3, vec![0.0, 0.0, 0.0, 0.9, 0.1, 0.2]);
        let mut l = LabelMatrix::new(2, 3);
        l.set(0, 2);
        l.set(1, 0);
        let opts = RankingOptions { exclude_constant_rows: true };
        let r = ranking_metrics(&s, &l, opts).unwrap();
        assert_eq!(r.excluded_rows, 1);
        assert_eq!(r.mean_rank, 1.0);
        // all rows excluded: zeros
        let s2 = sm(1, 2, vec![0.0, 0.0]);
        let mut l2 = LabelMatrix::new(1, 2);
        l2.set(0, 0);
        let r2 = ranking_metrics(&s2, &l2, opts).unwrap();
        assert_eq!(r2.evaluated_rows, 0);
        assert_eq!(r2.top_acc, vec![0.0; K_LIST.len()]);
    }

    /// Independent ranker: rank = 1 + (# strictly greater) + (# earlier ties).
    fn brute_ranks(row: &[f32]) -> Vec<u32> {
        (0..row.len())
            .map(|j| {
                let greater = row.iter().filter(|&&v| v > row[j]).count();
                let earlier_ties = row[..j].iter().filter(|&&v| v == row[j]).count();
                (greater + earlier_ties) as u32 + 1
            })
            .collect()
    }

    #[test]
    fn rank_rows_matches_pairwise_oracle() {
        let mut rng = StdRng::seed_from_u64(10);
        for _ in 0..50 {
            let rows = rng.gen_range(1..30);
            let cols = rng.gen_range(1..60);
            // coarse values force ties
            let values: Vec<f32> =
                (0..rows * cols).map(|_| (rng.gen_range(0..8) as f32) / 4.0).collect();
            let s = sm(rows, cols, values);
            let got = rank_rows(&s).unwrap();
            for i in 0..rows {
                let want = brute_ranks(&s.values[i * cols..(i + 1) * cols]);
                assert_eq!(got[i], want);
            }
        }
    }

    #[test]
    fn ranking_invariant_under_monotone_transform() {
        let mut rng = StdRng::seed_from_u64(4);
        let rows = 6;
        let cols = 12;
        let values: Vec<f32> = (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut l = LabelMatrix::new(rows, cols);
        for i in 0..rows {
            l.set(i, rng.gen_range(0..cols));
            l.set(i, rng.gen_range(0..cols));
        }
        let s1 = sm(rows, cols, values.clone());
        // strictly monotone map: 3x + tanh(x)
        let mapped: Vec<f32> =
            values.iter().map(|&v| 3.0 * v + v.tanh()).collect();
        let s2 = sm(rows, cols, mapped);
        let r1 = ranking_metrics(&s1, &l, RankingOptions::default()).unwrap();
        let r2 = ranking_metrics(&s2, &l, RankingOptions::default()).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn classification_examples() {
        let (acc, auroc) = classification_metrics(&[0.8, 0.2], &[1, 0], 0.5).unwrap();
        assert_eq!(acc, 1.0);
        assert_eq!(auroc, Some(1.0));
        let (_, auroc) = classification_metrics(&[0.3, 0.3, 0.3, 0.3], &[1, 0, 1, 0], 0.0).unwrap();
        assert_eq!(auroc, Some(0.5));
        let (_, auroc) = classification_metrics(&[0.3, 0.4], &[1, 1], 0.0).unwrap();
        assert_eq!(auroc, None);
    }

    #[test]
    fn auroc_matches_pair_counting_oracle() {
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..20 {
            let n = rng.gen_range(10..200);
            let logits: Vec<f64> = (0..n).map(|_| (rng.gen_range(-4..5) as f64) / 2.0).collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let n_pos = labels.iter().filter(|&&l| l == 1).count();
            if n_pos == 0 || n_pos == n {
                continue;
            }
            let (_, got) = classification_metrics(&logits, &labels, 0.0).unwrap();
            let mut num = 0.0;
            for i in 0..n {
                if labels[i] != 1 {
                    continue;
                }
                for j in 0..n {
                    if labels[j] != 0 {
                        continue;
                    }
                    if logits[i] > logits[j] {
                        num += 1.0;
                    } else if logits[i] == logits[j] {
                        num += 0.5;
                    }
                }
            }
            let want = num / (n_pos * (n - n_pos)) as f64;
            assert!((got.unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn evaluate_split_directions_transpose() {
        let synth = crate::synth::separable_corpus(&crate::synth::SynthSpec {
            pairs: 40,
            families: 4,
            enzymes_per_family: 5,
            d_plm: 6,
            seed: 20,
            ..Default::default()
        });
        let corpus = &synth.corpus;
        let (_, config) = crate::synth::to_train_data(&synth, 0.0);
        let params = ModelParams::init(config, 31);
        let vocab = crate::chemgraph::ElementVocab::v1();
        // a trivial manifest: first 30 pairs train, rest test
        let n = corpus.pairs.len();
        let manifest = SplitManifest {
            split_kind: crate::dataio::SplitKind::Time,
            params: crate::dataio::SplitParamsRecord {
                seed: 0,
                boundary: None,
                threshold: None,
                test_fraction: None,
                valid_fraction: 0.0,
                normalization: None,
            },
            train: (0..n - 10).collect(),
            valid: vec![],
            test: (n - 10..n).collect(),
        };
        let a = evaluate_split(
            &params,
            corpus,
            &manifest,
            Direction::EnzymeToReactions,
            CandidatePool::FullCatalog,
            &vocab,
        )
        .unwrap();
        let b = evaluate_split(
            &params,
            corpus,
            &manifest,
            Direction::ReactionToEnzymes,
            CandidatePool::FullCatalog,
            &vocab,
        )
        .unwrap();
        // the same (enzyme, reaction) logit appears transposed
        for (i, e_id) in a.scores.row_ids.iter().enumerate() {
            for (j, r_id) in a.scores.col_ids.iter().enumerate() {
                if let (Some(bi), Some(bj)) = (
                    b.scores.row_ids.iter().position(|x| x == r_id),
                    b.scores.col_ids.iter().position(|x| x == e_id),
                ) {
                    assert_eq!(a.scores.get(i, j), b.scores.get(bi, bj));
                }
            }
        }
        assert!(a.report.mean_rank >= 1.0);
    }

    #[test]
    fn evaluate_split_single_positive_pool_is_perfect() {
        // candidate pool collapses to one positive per row: all metrics 1
        let synth = crate::synth::separable_corpus(&crate::synth::SynthSpec {
            pairs: 12,
            families: 1,
            enzymes_per_family: 6,
            d_plm: 6,
            seed: 21,
            ..Default::default()
        });
        let corpus = &synth.corpus;
        let (_, config) = crate::synth::to_train_data(&synth, 0.0);
        let params = ModelParams::init(config, 1);
        let vocab = crate::chemgraph::ElementVocab::v1();
        let positives: Vec<usize> = corpus
            .pairs
            .pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.label == 1)
            .map(|(i, _)| i)
            .collect();
        let manifest = SplitManifest {
            split_kind: crate::dataio::SplitKind::Time,
            params: crate::dataio::SplitParamsRecord {
                seed: 0,
                boundary: None,
                threshold: None,
                test_fraction: None,
                valid_fraction: 0.0,
                normalization: None,
            },
            train: vec![],
            valid: vec![],
            test: positives,
        };
        let out = evaluate_split(
            &params,
            corpus,
            &manifest,
            Direction::EnzymeToReactions,
            CandidatePool::FullCatalog,
            &vocab,
        )
        .unwrap();
        // one family: the only candidate reaction is the positive one
        assert_eq!(out.scores.cols(), 1);
        assert_eq!(out.report.mean_rank, 1.0);
        assert_eq!(out.report.mrr, 1.0);
        assert_eq!(out.report.top_at(1), Some(1.0));
    }

    #[test]
    fn baseline_identical_query_inherits_annotations() {
        let train = vec![
            ("t1".to_string(), "MKVLQWERTY".to_string()),
            ("t2".to_string(), "PPPPPPPPPP".to_string()),
        ];
        let mut ann: HashMap<String, BTreeSet<String>> = HashMap::new();
        ann.insert("t1".into(), ["r1".into(), "r3".into()].into());
        ann.insert("t2".into(), ["r2".into()].into());
        let queries = vec![
            ("q_same".to_string(), "MKVLQWERTY".to_string()),
            ("q_far".to_string(), "GGGGGGGGGG".to_string()),
        ];
        let cols: Vec<String> = vec!["r1".into(), "r2".into(), "r3".into()];
        let m = baseline_score(&train, &ann, &queries, &cols, &AlignParams::sw_default(), 0.5);
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(0, 2), 1.0);
        // dissimilar query: all-zero row
        assert!(m.values[3..6].iter().all(|&v| v == 0.0));
    }
}
