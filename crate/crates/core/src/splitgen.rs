//! Train/valid/test splits (time, enzyme similarity, reaction similarity)
//! and similarity-guided negative mining.
//!
//! Similarity splits cluster entities by single linkage under the split's
//! difference threshold, then assign whole clusters to the test side until
//! the target test fraction is reached. Below `exact_below` entities the
//! linkage graph is exact all-pairs; above it, edges come from top-k
//! candidate mining and the audit operations certify the guarantee.

use crate::align::{self, AlignParams, SimilarityMetric};
use crate::dataio::{
    Corpus, DataError, EpochDays, PairSet, SplitKind, SplitManifest, SplitParamsRecord,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("empty {0} partition")]
    EmptyPartition(&'static str),
    #[error("threshold unreachable: clustering left no {0} pairs")]
    ThresholdUnreachable(&'static str),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone)]
pub struct SplitOptions {
    pub seed: u64,
    pub valid_fraction: f64,
    pub test_fraction: f64,
    pub threshold: f64,
    /// Candidate neighbors per entity when the corpus is too large for
    /// exact all-pairs linkage.
    pub linkage_topk: usize,
    /// Below this many entities the linkage graph is exact.
    pub exact_below: usize,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            seed: 0,
            valid_fraction: 0.1,
            test_fraction: 0.05,
            threshold: 0.6,
            linkage_topk: 50,
            exact_below: 5000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeSplitReport {
    pub boundary: String,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub excluded_missing_date: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSplitReport {
    pub clusters: usize,
    /// (cluster size, how many clusters of that size)
    pub cluster_size_histogram: Vec<(usize, usize)>,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub test_fraction_achieved: f64,
}

fn sample_validation(
    pool: &[usize],
    valid_fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_valid = (pool.len() as f64 * valid_fraction).floor() as usize;
    let mut remaining: Vec<usize> = pool.to_vec();
    let mut valid = Vec::with_capacity(n_valid);
    for _ in 0..n_valid {
        let i = rng.gen_range(0..remaining.len());
        valid.push(remaining.swap_remove(i));
    }
    remaining.sort_unstable();
    valid.sort_unstable();
    (remaining, valid)
}

/// Calendar split: pairs dated on or before the boundary train, later pairs
/// test. Pairs without a date are excluded and counted.
pub fn split_time(
    pairs: &PairSet,
    boundary: EpochDays,
    seed: u64,
    valid_fraction: f64,
) -> Result<(SplitManifest, TimeSplitReport), SplitError> {
    let mut pool = Vec::new();
    let mut test = Vec::new();
    let mut excluded = 0usize;
    for (i, p) in pairs.pairs.iter().enumerate() {
        match p.date {
            None => excluded += 1,
            Some(d) if d <= boundary => pool.push(i),
            Some(_) => test.push(i),
        }
    }
    if pool.is_empty() {
        return Err(SplitError::EmptyPartition("train"));
    }
    if test.is_empty() {
        return Err(SplitError::EmptyPartition("test"));
    }
    let (train, valid) = sample_validation(&pool, valid_fraction, seed);
    let manifest = SplitManifest {
        split_kind: SplitKind::Time,
        params: SplitParamsRecord {
            seed,
            boundary: Some(crate::dataio::format_date(boundary)),
            threshold: None,
            test_fraction: None,
            valid_fraction,
            normalization: None,
        },
        train,
        valid,
        test,
    };
    manifest.validate()?;
    let report = TimeSplitReport {
        boundary: crate::dataio::format_date(boundary),
        train: manifest.train.len(),
        valid: manifest.valid.len(),
        test: manifest.test.len(),
        excluded_missing_date: excluded,
    };
    Ok((manifest, report))
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Single-linkage clusters under `linked(i, j)`. Exact all-pairs below the
/// size cutoff, top-k candidate edges above it.
fn cluster_entities<F>(
    items: &[(String, String)],
    opts: &SplitOptions,
    metric: &SimilarityMetric,
    linked: F,
) -> Vec<usize>
where
    F: Fn(&str, &str) -> bool + Sync + Send,
{
    let n = items.len();
    let mut uf = UnionFind::new(n);
    if n <= opts.exact_below {
        let linked = &linked;
        let edges: Vec<(usize, usize)> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let items = &items;
                (i + 1..n).filter_map(move |j| {
                    if linked(&items[i].1, &items[j].1) {
                        Some((i, j))
                    } else {
                        None
                    }
                })
            })
            .collect();
        for (i, j) in edges {
            uf.union(i, j);
        }
    } else {
        let table = align::mine_topk(items, items, metric, opts.linkage_topk, true);
        let index: HashMap<&str, usize> =
            items.iter().enumerate().map(|(i, (id, _))| (id.as_str(), i)).collect();
        for (i, entry) in table.entries.iter().enumerate() {
            for (cand, _) in &entry.hits {
                let j = index[cand.as_str()];
                if linked(&items[i].1, &items[j].1) {
                    uf.union(i, j);
                }
            }
        }
    }
    (0..n).map(|i| uf.find(i)).collect()
}

/// Greedy cluster-to-test assignment: smallest pair-count clusters first
/// (ties by smallest member id) until the test fraction is reached.
fn assign_clusters(
    cluster_of: &[usize],
    entity_ids: &[String],
    pair_entity: &[usize],
    opts: &SplitOptions,
    kind: SplitKind,
    threshold_field: f64,
) -> Result<(SplitManifest, SimSplitReport), SplitError> {
    let n_pairs = pair_entity.len();
    let mut pairs_per_cluster: HashMap<usize, Vec<usize>> = HashMap::new();
    for (pair_idx, &e) in pair_entity.iter().enumerate() {
        pairs_per_cluster.entry(cluster_of[e]).or_default().push(pair_idx);
    }
    let mut clusters: Vec<(usize, &Vec<usize>)> = pairs_per_cluster
        .iter()
        .map(|(&root, pairs)| (root, pairs))
        .collect();
    // smallest pair count first; ties by the smallest entity id in the cluster
    clusters.sort_by(|a, b| {
        a.1.len().cmp(&b.1.len()).then_with(|| {
            let min_id = |root: usize| {
                cluster_of
                    .iter()
                    .enumerate()
                    .filter(|(_, &r)| r == root)
                    .map(|(i, _)| entity_ids[i].as_str())
                    .min()
                    .unwrap_or("")
            };
            min_id(a.0).cmp(min_id(b.0))
        })
    });
    let target = ((n_pairs as f64 * opts.test_fraction).round() as usize).max(1);
    let mut test: Vec<usize> = Vec::new();
    let mut pool: Vec<usize> = Vec::new();
    for (_, pairs) in &clusters {
        if test.len() < target {
            test.extend(pairs.iter().copied());
        } else {
            pool.extend(pairs.iter().copied());
        }
    }
    if test.is_empty() {
        return Err(SplitError::EmptyPartition("test"));
    }
    if pool.is_empty() {
        return Err(SplitError::ThresholdUnreachable("train"));
    }
    test.sort_unstable();
    pool.sort_unstable();
    let (train, valid) = sample_validation(&pool, opts.valid_fraction, opts.seed);

    let mut size_counts: HashMap<usize, usize> = HashMap::new();
    let mut members: HashMap<usize, usize> = HashMap::new();
    for &c in cluster_of {
        *members.entry(c).or_default() += 1;
    }
    for (_, &size) in members.iter() {
        *size_counts.entry(size).or_default() += 1;
    }
    let mut histogram: Vec<(usize, usize)> = size_counts.into_iter().collect();
    histogram.sort_unstable();

    let report = SimSplitReport {
        clusters: members.len(),
        cluster_size_histogram: histogram,
        train: train.len(),
        valid: valid.len(),
        test: test.len(),
        test_fraction_achieved: test.len() as f64 / n_pairs as f64,
    };
    let manifest = SplitManifest {
        split_kind: kind,
        params: SplitParamsRecord {
            seed: opts.seed,
            boundary: None,
            threshold: Some(threshold_field),
            test_fraction: Some(opts.test_fraction),
            valid_fraction: opts.valid_fraction,
            normalization: Some("max_length".into()),
        },
        train,
        valid,
        test,
    };
    manifest.validate()?;
    Ok((manifest, report))
}

/// Enzyme-similarity split: single-linkage clusters at
/// `seq_difference < threshold`, whole clusters to test. Guarantees every
/// (test, train) enzyme pair differs by at least the threshold.
pub fn split_enzyme_sim(
    corpus: &Corpus,
    opts: &SplitOptions,
) -> Result<(SplitManifest, SimSplitReport), SplitError> {
    let items: Vec<(String, String)> =
        corpus.enzymes.iter().map(|e| (e.id.clone(), e.sequence.clone())).collect();
    let threshold = opts.threshold;
    let cluster_of = cluster_entities(
        &items,
        opts,
        &SimilarityMetric::EditSimilarity,
        |a: &str, b: &str| align::seq_difference(a, b).map(|d| d < threshold).unwrap_or(false),
    );
    let pair_entity: Vec<usize> = corpus
        .pairs
        .pairs
        .iter()
        .map(|p| corpus.enzyme_of_intern[p.enzyme as usize])
        .collect();
    let ids: Vec<String> = corpus.enzymes.iter().map(|e| e.id.clone()).collect();
    assign_clusters(&cluster_of, &ids, &pair_entity, opts, SplitKind::EnzymeSim, threshold)
}

/// Reaction-similarity split over canonical reaction strings with
/// `nw_similarity > 1 - threshold` as the linkage predicate. Identical
/// strings always land in the same cluster, so the test set shares no
/// reaction string with training.
pub fn split_reaction_sim(
    corpus: &Corpus,
    opts: &SplitOptions,
    params: &AlignParams,
) -> Result<(SplitManifest, SimSplitReport), SplitError> {
    let items: Vec<(String, String)> =
        corpus.reactions.iter().map(|r| (r.id.clone(), r.canonical_string())).collect();
    let threshold = opts.threshold;
    let p = *params;
    let cluster_of = cluster_entities(
        &items,
        opts,
        &SimilarityMetric::NwSimilarity(p),
        move |a: &str, b: &str| {
            align::nw_similarity(a, b, &p).map(|s| s > 1.0 - threshold).unwrap_or(false)
        },
    );
    let pair_entity: Vec<usize> = corpus
        .pairs
        .pairs
        .iter()
        .map(|p| corpus.reaction_of_intern[p.reaction as usize])
        .collect();
    let ids: Vec<String> = corpus.reactions.iter().map(|r| r.id.clone()).collect();
    assign_clusters(&cluster_of, &ids, &pair_entity, opts, SplitKind::ReactionSim, threshold)
}

// ---------------------------------------------------------------------------
// Leakage audits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Quantile {
    pub q: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub kind: SplitKind,
    pub threshold: f64,
    /// Minimum cross-partition difference (1 - similarity for reactions).
    pub min_cross_difference: Option<f64>,
    /// Cross-partition pairs below the threshold.
    pub violations: usize,
    /// Reaction strings present on both sides (reaction split only).
    pub shared_strings: usize,
    pub difference_quantiles: Vec<Quantile>,
    pub cross_pairs_checked: usize,
}

fn quantiles_of(mut values: Vec<f64>) -> Vec<Quantile> {
    if values.is_empty() {
        return Vec::new();
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    [0.0, 0.01, 0.05, 0.25, 0.5, 1.0]
        .iter()
        .map(|&q| {
            let idx = ((values.len() - 1) as f64 * q).round() as usize;
            Quantile { q, value: values[idx] }
        })
        .collect()
}

fn partition_entities(
    corpus: &Corpus,
    manifest: &SplitManifest,
    enzyme_side: bool,
) -> (Vec<usize>, Vec<usize>) {
    let entity_of = |pair_idx: usize| {
        let p = &corpus.pairs.pairs[pair_idx];
        if enzyme_side {
            corpus.enzyme_of_intern[p.enzyme as usize]
        } else {
            corpus.reaction_of_intern[p.reaction as usize]
        }
    };
    let mut train: BTreeSet<usize> = BTreeSet::new();
    for &i in manifest.train.iter().chain(&manifest.valid) {
        train.insert(entity_of(i));
    }
    let mut test: BTreeSet<usize> = BTreeSet::new();
    for &i in &manifest.test {
        test.insert(entity_of(i));
    }
    (train.into_iter().collect(), test.into_iter().collect())
}

/// Exhaustive certification of the enzyme split: every (test, train) pair of
/// enzymes must differ by at least the recorded threshold.
pub fn audit_enzyme_split(corpus: &Corpus, manifest: &SplitManifest) -> AuditReport {
    let threshold = manifest.params.threshold.unwrap_or(0.6);
    let (train, test) = partition_entities(corpus, manifest, true);
    let diffs: Vec<f64> = test
        .par_iter()
        .flat_map_iter(|&t| {
            let tseq = corpus.enzymes[t].sequence.as_str();
            train.iter().map(move |&tr| {
                align::seq_difference(tseq, &corpus.enzymes[tr].sequence).expect("non-empty")
            })
        })
        .collect();
    let min = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    AuditReport {
        kind: SplitKind::EnzymeSim,
        threshold,
        min_cross_difference: if diffs.is_empty() { None } else { Some(min) },
        violations: diffs.iter().filter(|&&d| d < threshold).count(),
        shared_strings: 0,
        cross_pairs_checked: diffs.len(),
        difference_quantiles: quantiles_of(diffs),
    }
}

/// Certification of the reaction split: no canonical reaction string may
/// appear on both sides; differences are 1 - nw_similarity.
pub fn audit_reaction_split(
    corpus: &Corpus,
    manifest: &SplitManifest,
    params: &AlignParams,
) -> AuditReport {
    let threshold = manifest.params.threshold.unwrap_or(0.6);
    let (train, test) = partition_entities(corpus, manifest, false);
    let train_strings: HashSet<String> =
        train.iter().map(|&i| corpus.reactions[i].canonical_string()).collect();
    let shared = test
        .iter()
        .filter(|&&i| train_strings.contains(&corpus.reactions[i].canonical_string()))
        .count();
    let diffs: Vec<f64> = test
        .par_iter()
        .flat_map_iter(|&t| {
            let ts = corpus.reactions[t].canonical_string();
            let train = &train;
            train.iter().map(move |&tr| {
                1.0 - align::nw_similarity(&ts, &corpus.reactions[tr].canonical_string(), params)
                    .expect("non-empty")
            })
        })
        .collect();
    let min = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    AuditReport {
        kind: SplitKind::ReactionSim,
        threshold,
        min_cross_difference: if diffs.is_empty() { None } else { Some(min) },
        violations: diffs.iter().filter(|&&d| d < threshold).count(),
        shared_strings: shared,
        cross_pairs_checked: diffs.len(),
        difference_quantiles: quantiles_of(diffs),
    }
}

// ---------------------------------------------------------------------------
// Negative mining
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    EnzymeNeighbor,
    ReactionNeighbor,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Provenance::EnzymeNeighbor => "enzyme_neighbor",
            Provenance::ReactionNeighbor => "reaction_neighbor",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "enzyme_neighbor" => Some(Provenance::EnzymeNeighbor),
            "reaction_neighbor" => Some(Provenance::ReactionNeighbor),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativePair {
    pub enzyme_id: String,
    pub reaction_id: String,
    pub provenance: Provenance,
    pub anchor_enzyme: String,
    pub anchor_reaction: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NegativeSet {
    pub negatives: Vec<NegativePair>,
}

impl NegativeSet {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "enzyme_id\treaction_id\tprovenance\tanchor_enzyme\tanchor_reaction")?;
        for n in &self.negatives {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                n.enzyme_id,
                n.reaction_id,
                n.provenance.as_str(),
                n.anchor_enzyme,
                n.anchor_reaction
            )?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self, DataError> {
        let mut negatives = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| DataError::Io { path: "<negatives>".into(), source: e })?;
            if lineno == 0 || line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(DataError::MalformedRow {
                    path: "<negatives>".into(),
                    line: lineno + 1,
                    msg: format!("expected 5 fields, got {}", f.len()),
                });
            }
            let provenance = Provenance::parse(f[2]).ok_or_else(|| DataError::MalformedRow {
                path: "<negatives>".into(),
                line: lineno + 1,
                msg: format!("bad provenance '{}'", f[2]),
            })?;
            negatives.push(NegativePair {
                enzyme_id: f[0].into(),
                reaction_id: f[1].into(),
                provenance,
                anchor_enzyme: f[3].into(),
                anchor_reaction: f[4].into(),
            });
        }
        Ok(NegativeSet { negatives })
    }
}

/// For each positive pair, up to k similar enzymes not annotated with the
/// reaction (and up to k similar reactions not catalyzed by the enzyme)
/// become label-0 pairs. Everything is filtered against the positive set.
pub fn mine_negatives(
    corpus: &Corpus,
    k: usize,
    nw_params: &AlignParams,
) -> NegativeSet {
    let positives: Vec<&crate::dataio::Pair> = corpus.pairs.positives().collect();
    let positive_keys = corpus.positive_keys();

    let enzyme_items: Vec<(String, String)> = corpus
        .pairs
        .enzyme_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            (id.clone(), corpus.enzymes[corpus.enzyme_of_intern[i]].sequence.clone())
        })
        .collect();
    let reaction_items: Vec<(String, String)> = corpus
        .pairs
        .reaction_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            (id.clone(), corpus.reactions[corpus.reaction_of_intern[i]].canonical_string())
        })
        .collect();

    let enzyme_index: HashMap<&str, u32> = corpus
        .pairs
        .enzyme_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i as u32))
        .collect();
    let reaction_index: HashMap<&str, u32> = corpus
        .pairs
        .reaction_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i as u32))
        .collect();

    // one neighbor table per distinct anchor entity
    let unique_pos_enzymes: BTreeSet<u32> = positives.iter().map(|p| p.enzyme).collect();
    let unique_pos_reactions: BTreeSet<u32> = positives.iter().map(|p| p.reaction).collect();
    let enzyme_queries: Vec<(String, String)> =
        unique_pos_enzymes.iter().map(|&i| enzyme_items[i as usize].clone()).collect();
    let reaction_queries: Vec<(String, String)> =
        unique_pos_reactions.iter().map(|&i| reaction_items[i as usize].clone()).collect();
    let enzyme_topk = align::mine_topk(
        &enzyme_queries,
        &enzyme_items,
        &SimilarityMetric::EditSimilarity,
        k,
        true,
    );
    let reaction_topk = align::mine_topk(
        &reaction_queries,
        &reaction_items,
        &SimilarityMetric::NwSimilarity(*nw_params),
        k,
        true,
    );
    let enzyme_neighbors: HashMap<u32, &Vec<(String, f64)>> = unique_pos_enzymes
        .iter()
        .zip(&enzyme_topk.entries)
        .map(|(&i, e)| (i, &e.hits))
        .collect();
    let reaction_neighbors: HashMap<u32, &Vec<(String, f64)>> = unique_pos_reactions
        .iter()
        .zip(&reaction_topk.entries)
        .map(|(&i, e)| (i, &e.hits))
        .collect();

    let mut seen: HashSet<(u32, u32)> = HashSet::new();
    let mut negatives = Vec::new();
    for p in &positives {
        let anchor_e = corpus.pairs.enzyme_ids[p.enzyme as usize].clone();
        let anchor_r = corpus.pairs.reaction_ids[p.reaction as usize].clone();
        if let Some(hits) = enzyme_neighbors.get(&p.enzyme) {
            for (cand, _) in hits.iter() {
                let e = enzyme_index[cand.as_str()];
                if positive_keys.contains(&(e, p.reaction)) {
                    continue;
                }
                if seen.insert((e, p.reaction)) {
                    negatives.push(NegativePair {
                        enzyme_id: cand.clone(),
                        reaction_id: anchor_r.clone(),
                        provenance: Provenance::EnzymeNeighbor,
                        anchor_enzyme: anchor_e.clone(),
                        anchor_reaction: anchor_r.clone(),
                    });
                }
            }
        }
        if let Some(hits) = reaction_neighbors.get(&p.reaction) {
            for (cand, _) in hits.iter() {
                let r = reaction_index[cand.as_str()];
                if positive_keys.contains(&(p.enzyme, r)) {
                    continue;
                }
                if seen.insert((p.enzyme, r)) {
                    negatives.push(NegativePair {
                        enzyme_id: anchor_e.clone(),
                        reaction_id: cand.clone(),
                        provenance: Provenance::ReactionNeighbor,
                        anchor_enzyme: anchor_e.clone(),
                        anchor_reaction: anchor_r.clone(),
                    });
                }
            }
        }
    }
    NegativeSet { negatives }
}
