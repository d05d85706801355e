//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its runtime (run with `--nocapture` to see them). Oracles here are
//! independent reimplementations, never calls back into the code they check.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;
use zymebench_core::align::{
    levenshtein, mine_topk, needleman_wunsch, nw_similarity, smith_waterman, AlignParams,
    SimilarityMetric,
};
use zymebench_core::chemgraph::ElementVocab;
use zymebench_core::dataio::parse_date;
use zymebench_core::encode::{frame_average, pca_frames};
use zymebench_core::evalrank::{
    baseline_score, evaluate_split, rank_rows, ranking_metrics, CandidatePool, Direction,
    LabelMatrix, RankingOptions, ScoreMatrix, K_LIST,
};
use zymebench_core::mat::Mat;
use zymebench_core::model::score::{EnzymeInput, ReactionInput};
use zymebench_core::model::train::{batch_forward, train, TrainConfig, TrainData, TrainSample};
use zymebench_core::model::{
    bce_loss, contrastive_loss, EnzymeMode, ModelConfig, ModelParams, ReactionFeatures, Tape,
};
use zymebench_core::splitgen::{
    audit_enzyme_split, audit_reaction_split, split_enzyme_sim, split_reaction_sim, split_time,
    SplitOptions,
};
use zymebench_core::synth::{self, SynthSpec};

fn pass(name: &str, t0: Instant, budget_s: f64) {
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < budget_s, "{name} took {dt:.1}s, budget {budget_s}s");
    println!("ACCEPTANCE {name}: PASS ({dt:.2}s)");
}

// ---------------------------------------------------------------------------
// 1. Metric-listing fidelity
// ---------------------------------------------------------------------------

/// Independent ranker: 1 + strictly-greater count + earlier-tie count.
fn oracle_ranks(row: &[f32]) -> Vec<f64> {
    (0..row.len())
        .map(|j| {
            let greater = row.iter().filter(|&&v| v > row[j]).count();
            let earlier = row[..j].iter().filter(|&&v| v == row[j]).count();
            (greater + earlier) as f64 + 1.0
        })
        .collect()
}

struct OracleMetrics {
    mean_rank: f64,
    mrr: f64,
    top_acc: Vec<f64>,
    top_acc_n: Vec<f64>,
}

/// Direct transcription of the evaluation listing over dense labels.
fn oracle_metrics(scores: &[Vec<f32>], labels: &[Vec<u8>]) -> OracleMetrics {
    let mut mean_rank = 0.0;
    let mut mrr = 0.0;
    let mut top_acc = vec![0.0; K_LIST.len()];
    let mut top_acc_n = vec![0.0; K_LIST.len()];
    let mut rows = 0.0;
    for (srow, lrow) in scores.iter().zip(labels) {
        let n_pos: f64 = lrow.iter().map(|&l| l as f64).sum();
        if n_pos == 0.0 {
            continue;
        }
        rows += 1.0;
        let ranks = oracle_ranks(srow);
        let mut rank_sum = 0.0;
        let mut rr_sum = 0.0;
        for (j, &l) in lrow.iter().enumerate() {
            if l == 1 {
                rank_sum += ranks[j];
                rr_sum += 1.0 / ranks[j];
            }
        }
        mean_rank += rank_sum / n_pos;
        mrr += rr_sum / n_pos;
        for (ki, &k) in K_LIST.iter().enumerate() {
            let in_k = lrow
                .iter()
                .enumerate()
                .filter(|&(j, &l)| l == 1 && ranks[j] <= k as f64)
                .count();
            if in_k > 0 {
                top_acc[ki] += 1.0;
            }
            top_acc_n[ki] += in_k as f64 / k as f64;
        }
    }
    OracleMetrics {
        mean_rank: mean_rank / rows,
        mrr: mrr / rows,
        top_acc: top_acc.iter().map(|v| v / rows).collect(),
        top_acc_n: top_acc_n.iter().map(|v| v / rows).collect(),
    }
}

#[test]
fn acceptance_metric_listing_fidelity() {
    let t0 = Instant::now();
    let mut rng = StdRng::seed_from_u64(1001);
    for case in 0..100 {
        let rows = rng.gen_range(1..=50);
        let cols = rng.gen_range(2..=80);
        // coarse grid forces ties; multi-positive rows guaranteed below
        let dense_scores: Vec<Vec<f32>> = (0..rows)
            .map(|_| (0..cols).map(|_| (rng.gen_range(-6..7) as f32) / 3.0).collect())
            .collect();
        let mut dense_labels: Vec<Vec<u8>> = (0..rows)
            .map(|_| (0..cols).map(|_| u8::from(rng.gen_bool(0.12))).collect())
            .collect();
        for row in dense_labels.iter_mut() {
            if rng.gen_bool(0.8) && row.iter().all(|&l| l == 0) {
                let j = rng.gen_range(0..cols);
                row[j] = 1;
            }
        }
        if dense_labels.iter().all(|r| r.iter().all(|&l| l == 0)) {
            dense_labels[0][0] = 1;
        }
        let scores = ScoreMatrix {
            row_ids: (0..rows).map(|i| format!("q{i}")).collect(),
            col_ids: (0..cols).map(|i| format!("c{i}")).collect(),
            values: dense_scores.iter().flatten().copied().collect(),
        };
        let mut labels = LabelMatrix::new(rows, cols);
        for (i, row) in dense_labels.iter().enumerate() {
            for (j, &l) in row.iter().enumerate() {
                if l == 1 {
                    labels.set(i, j);
                }
            }
        }
        let got = ranking_metrics(&scores, &labels, RankingOptions::default()).unwrap();
        let want = oracle_metrics(&dense_scores, &dense_labels);
        assert!((got.mean_rank - want.mean_rank).abs() < 1e-9, "case {case} mean_rank");
        assert!((got.mrr - want.mrr).abs() < 1e-9, "case {case} mrr");
        for ki in 0..K_LIST.len() {
            assert!((got.top_acc[ki] - want.top_acc[ki]).abs() < 1e-9, "case {case} top{ki}");
            assert!(
                (got.top_acc_n[ki] - want.top_acc_n[ki]).abs() < 1e-9,
                "case {case} top{ki}-n"
            );
        }
        // rank_rows itself against the independent ranker
        let ranks = rank_rows(&scores).unwrap();
        for i in 0..rows {
            let want = oracle_ranks(&dense_scores[i]);
            for j in 0..cols {
                assert_eq!(ranks[i][j] as f64, want[j]);
            }
        }
    }

    // ground-truth scoring on single-positive rows: exact ones
    for case in 0..20 {
        let rows = 1 + case % 7;
        let cols = 2 + case % 11;
        let mut values = vec![0.0f32; rows * cols];
        let mut labels = LabelMatrix::new(rows, cols);
        for i in 0..rows {
            let c = (i * 3 + case) % cols;
            values[i * cols + c] = 1.0;
            labels.set(i, c);
        }
        let scores = ScoreMatrix {
            row_ids: (0..rows).map(|i| format!("q{i}")).collect(),
            col_ids: (0..cols).map(|i| format!("c{i}")).collect(),
            values,
        };
        let r = ranking_metrics(&scores, &labels, RankingOptions::default()).unwrap();
        assert_eq!(r.mean_rank, 1.0);
        assert_eq!(r.mrr, 1.0);
        assert_eq!(r.top_acc[0], 1.0);
        assert_eq!(r.top_acc_n[0], 1.0);
    }
    pass("metric-listing fidelity", t0, 5.0);
}

// ---------------------------------------------------------------------------
// 2. Gradient correctness
// ---------------------------------------------------------------------------

fn fd_instance() -> (TrainData, ModelConfig) {
    // 3-atom reaction (C=O substrate, N product), two 2-residue enzymes
    let sub = zymebench_core::chemgraph::parse_smiles("C=O").unwrap();
    let prod = zymebench_core::chemgraph::parse_smiles("N").unwrap();
    let reaction = ReactionInput::Graphs { substrates: vec![sub], products: vec![prod] };
    let mut rng = StdRng::seed_from_u64(2002);
    let enzyme = |rng: &mut StdRng| {
        let features =
            Mat::from_vec(2, 6, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let coords = vec![
            [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)],
            [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)],
        ];
        EnzymeInput::PointCloud { features, coords }
    };
    let data = TrainData {
        reactions: vec![reaction],
        enzymes: vec![enzyme(&mut rng), enzyme(&mut rng)],
        train: vec![
            TrainSample { reaction: 0, enzyme: 0, label: 1 },
            TrainSample { reaction: 0, enzyme: 1, label: 0 },
        ],
        valid: vec![],
    };
    let config = ModelConfig {
        d_r: 8,
        d_plm: 6,
        atom_feature_width: ElementVocab::v1().feature_width(),
        gnn_layers: 1,
        psi_layers: 1,
        knn: 1,
        reaction_features: ReactionFeatures::Graph,
        enzyme_mode: EnzymeMode::FrameAveraged,
        ..ModelConfig::default()
    };
    (data, config)
}

fn loss_of(params: &ModelParams, data: &TrainData, vocab: &ElementVocab, kind: &str) -> f64 {
    let mut tape = Tape::new();
    let bound = params.set.bind(&mut tape);
    let (logits, z_r, z_e) =
        batch_forward(&mut tape, &bound, &params.config, data, &data.train, vocab).unwrap();
    let loss = match kind {
        "bce" => bce_loss(&mut tape, logits, &[1.0, 0.0]).unwrap(),
        "contrastive" => {
            let pick_row = |tape: &mut Tape, src, row: usize| {
                let sel = tape.constant(&zymebench_core::model::score::selection_matrix(&[row], 2));
                tape.matmul(sel, src)
            };
            let zr0 = pick_row(&mut tape, z_r, 0);
            let ze0 = pick_row(&mut tape, z_e, 0);
            let ze1 = pick_row(&mut tape, z_e, 1);
            contrastive_loss(&mut tape, zr0, ze0, &[ze1], 0.5).unwrap()
        }
        _ => unreachable!(),
    };
    tape.scalar(loss)
}

#[test]
fn acceptance_gradient_correctness() {
    let t0 = Instant::now();
    let (data, config) = fd_instance();
    let vocab = ElementVocab::v1();
    let h = 1e-5;
    for loss_kind in ["bce", "contrastive"] {
        let params = ModelParams::init(config.clone(), 3003);
        // analytic gradients
        let mut tape = Tape::new();
        let bound = params.set.bind(&mut tape);
        let (logits, z_r, z_e) =
            batch_forward(&mut tape, &bound, &config, &data, &data.train, &vocab).unwrap();
        let loss = match loss_kind {
            "bce" => bce_loss(&mut tape, logits, &[1.0, 0.0]).unwrap(),
            _ => {
                let pick_row = |tape: &mut Tape, src, row: usize| {
                    let sel =
                        tape.constant(&zymebench_core::model::score::selection_matrix(&[row], 2));
                    tape.matmul(sel, src)
                };
                let zr0 = pick_row(&mut tape, z_r, 0);
                let ze0 = pick_row(&mut tape, z_e, 0);
                let ze1 = pick_row(&mut tape, z_e, 1);
                contrastive_loss(&mut tape, zr0, ze0, &[ze1], 0.5).unwrap()
            }
        };
        tape.backward(loss).unwrap();
        let grads = bound.collect_grads(&tape);

        let mut group_rng = StdRng::seed_from_u64(4004);
        let mut checked_groups = 0;
        for (gi, group) in params.set.groups().iter().enumerate() {
            let n = group.data.len();
            let coords: Vec<usize> = if n <= 12 {
                (0..n).collect()
            } else {
                (0..12).map(|_| group_rng.gen_range(0..n)).collect()
            };
            for &j in &coords {
                let mut plus = params.clone();
                plus.set.groups_mut()[gi].data[j] += h;
                let mut minus = params.clone();
                minus.set.groups_mut()[gi].data[j] -= h;
                let fd =
                    (loss_of(&plus, &data, &vocab, loss_kind) - loss_of(&minus, &data, &vocab, loss_kind))
                        / (2.0 * h);
                let an = grads[gi][j];
                if an.abs() < 1e-9 && fd.abs() < 1e-9 {
                    continue;
                }
                let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-6);
                assert!(
                    rel < 1e-4,
                    "{loss_kind} group {} coord {j}: fd {fd:.3e} vs analytic {an:.3e} (rel {rel:.3e})",
                    group.name
                );
            }
            checked_groups += 1;
        }
        // every family of parameters must be present on this instance
        for prefix in ["tower.", "attn.", "psi.", "reaction_enc.", "enzyme_enc.", "decoder."] {
            assert!(
                params.set.groups().iter().any(|g| g.name.starts_with(prefix)),
                "missing group family {prefix}"
            );
        }
        assert!(checked_groups > 40, "only {checked_groups} groups checked");
    }
    pass("gradient correctness", t0, 30.0);
}

// ---------------------------------------------------------------------------
// 3. SE(3) invariance
// ---------------------------------------------------------------------------

fn random_rotation(rng: &mut StdRng) -> [[f64; 3]; 3] {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let tau = 2.0 * std::f64::consts::PI;
    let q = [
        (1.0 - u1).sqrt() * (tau * u2).sin(),
        (1.0 - u1).sqrt() * (tau * u2).cos(),
        u1.sqrt() * (tau * u3).sin(),
        u1.sqrt() * (tau * u3).cos(),
    ];
    let (x, y, z, w) = (q[0], q[1], q[2], q[3]);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

#[test]
fn acceptance_se3_invariance() {
    let t0 = Instant::now();
    let config = ModelConfig {
        d_r: 8,
        d_plm: 8,
        gnn_layers: 1,
        psi_layers: 2,
        knn: 6,
        enzyme_mode: EnzymeMode::FrameAveraged,
        ..ModelConfig::default()
    };
    let params = ModelParams::init(config, 5005);
    let vocab = ElementVocab::v1();
    let view = params.encode_view(&vocab);
    let mut rng = StdRng::seed_from_u64(6006);
    let n = 20;
    let coords: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)])
        .collect();
    let v = Mat::from_vec(n, 8, (0..n * 8).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let base = frame_average(&v, &coords, &view).unwrap();
    let base_norm = base.frob_norm();
    let base_frames = pca_frames(&coords);

    for trial in 0..100 {
        let rot = random_rotation(&mut rng);
        let t = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
        let moved: Vec<[f64; 3]> = coords
            .iter()
            .map(|p| {
                let mut out = [0.0; 3];
                for (i, o) in out.iter_mut().enumerate() {
                    *o = rot[i][0] * p[0] + rot[i][1] * p[1] + rot[i][2] * p[2] + t[i];
                }
                out
            })
            .collect();
        let out = frame_average(&v, &moved, &view).unwrap();
        let mut diff = 0.0;
        for (a, b) in base.data.iter().zip(&out.data) {
            diff += (a - b) * (a - b);
        }
        let rel = diff.sqrt() / base_norm;
        assert!(rel < 1e-5, "trial {trial}: relative change {rel:.3e}");

        let frames = pca_frames(&moved);
        for k in 0..3 {
            let scale = base_frames.eigenvalues[0].max(1.0);
            assert!(
                (frames.eigenvalues[k] - base_frames.eigenvalues[k]).abs() < 1e-8 * scale,
                "trial {trial}: eigenvalue {k} moved"
            );
        }
    }
    pass("SE(3) invariance", t0, 10.0);
}

// ---------------------------------------------------------------------------
// 4. Alignment oracles
// ---------------------------------------------------------------------------

fn lev_oracle(a: &[u8], b: &[u8]) -> usize {
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        dp[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = dp[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            dp[i][j] = sub.min(dp[i - 1][j] + 1).min(dp[i][j - 1] + 1);
        }
    }
    dp[a.len()][b.len()]
}

fn nw_oracle(a: &[u8], b: &[u8], m: i64, x: i64, g: i64) -> i64 {
    let mut dp = vec![vec![0i64; b.len() + 1]; a.len() + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = g * i as i64;
    }
    for j in 0..=b.len() {
        dp[0][j] = g * j as i64;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let s = if a[i - 1] == b[j - 1] { m } else { x };
            dp[i][j] = (dp[i - 1][j - 1] + s).max(dp[i - 1][j] + g).max(dp[i][j - 1] + g);
        }
    }
    dp[a.len()][b.len()]
}

fn sw_oracle(a: &[u8], b: &[u8], m: i64, x: i64, g: i64) -> i64 {
    let mut best = 0;
    let mut dp = vec![vec![0i64; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let s = if a[i - 1] == b[j - 1] { m } else { x };
            dp[i][j] =
                (dp[i - 1][j - 1] + s).max(dp[i - 1][j] + g).max(dp[i][j - 1] + g).max(0);
            best = best.max(dp[i][j]);
        }
    }
    best
}

#[test]
fn acceptance_alignment_oracles() {
    let t0 = Instant::now();
    let mut rng = StdRng::seed_from_u64(7007);
    let alphabet = b"ACDEFG";
    for case in 0..1000 {
        let la = rng.gen_range(0..=12);
        let lb = rng.gen_range(0..=12);
        let a: String = (0..la).map(|_| alphabet[rng.gen_range(0..6)] as char).collect();
        let b: String = (0..lb).map(|_| alphabet[rng.gen_range(0..6)] as char).collect();
        assert_eq!(
            levenshtein(&a, &b, None),
            Some(lev_oracle(a.as_bytes(), b.as_bytes())),
            "case {case} lev {a} {b}"
        );
        let m = rng.gen_range(1..4);
        let x = -rng.gen_range(0..4);
        let g = -rng.gen_range(1..4);
        let mut p = AlignParams { match_score: m, mismatch: x, gap: g, band: None };
        assert_eq!(
            needleman_wunsch(&a, &b, &p),
            nw_oracle(a.as_bytes(), b.as_bytes(), m as i64, x as i64, g as i64),
            "case {case} nw {a} {b}"
        );
        assert_eq!(
            smith_waterman(&a, &b, &p),
            sw_oracle(a.as_bytes(), b.as_bytes(), m as i64, x as i64, g as i64),
            "case {case} sw {a} {b}"
        );
        // banded with band >= max(len) is exact
        p.band = Some(la.max(lb));
        assert_eq!(
            needleman_wunsch(&a, &b, &p),
            nw_oracle(a.as_bytes(), b.as_bytes(), m as i64, x as i64, g as i64),
            "case {case} banded nw"
        );
        assert_eq!(
            smith_waterman(&a, &b, &p),
            sw_oracle(a.as_bytes(), b.as_bytes(), m as i64, x as i64, g as i64),
            "case {case} banded sw"
        );
    }

    // pruned top-k mining == brute force on a 500-string corpus
    let alphabet = b"ACDEFGHIKLMNPQRSTVWY";
    let corpus: Vec<(String, String)> = (0..500)
        .map(|i| {
            let len = rng.gen_range(5..30);
            let seq: String =
                (0..len).map(|_| alphabet[rng.gen_range(0..20)] as char).collect();
            (format!("s{i:04}"), seq)
        })
        .collect();
    for metric in [
        SimilarityMetric::EditSimilarity,
        SimilarityMetric::NwSimilarity(AlignParams::nw_default()),
    ] {
        let pruned = mine_topk(&corpus, &corpus, &metric, 10, true);
        let brute = {
            // independent: full similarity list per query, sorted by the rule
            let entries: Vec<Vec<(String, f64)>> = corpus
                .iter()
                .map(|(qid, qseq)| {
                    let mut sims: Vec<(String, f64)> = corpus
                        .iter()
                        .filter(|(cid, _)| cid != qid)
                        .map(|(cid, cseq)| {
                            let s = match &metric {
                                SimilarityMetric::EditSimilarity => {
                                    1.0 - lev_oracle(qseq.as_bytes(), cseq.as_bytes()) as f64
                                        / qseq.len().max(cseq.len()) as f64
                                }
                                SimilarityMetric::NwSimilarity(p) => {
                                    nw_similarity(qseq, cseq, p).unwrap()
                                }
                            };
                            (cid.clone(), s)
                        })
                        .collect();
                    sims.sort_by(|a, b| {
                        b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0))
                    });
                    sims.truncate(10);
                    sims
                })
                .collect();
            entries
        };
        for (entry, want) in pruned.entries.iter().zip(&brute) {
            assert_eq!(&entry.hits, want, "topk mismatch for {}", entry.query);
        }
    }
    pass("alignment oracles", t0, 20.0);
}

// ---------------------------------------------------------------------------
// 5. Split leakage audits
// ---------------------------------------------------------------------------

#[test]
fn acceptance_split_leakage() {
    let t0 = Instant::now();
    // enzyme-similarity split on a clustered corpus, exhaustively audited
    let synth = synth::separable_corpus(&SynthSpec {
        families: 60,
        enzymes_per_family: 12,
        pairs: 1440,
        cluster_sequences: true,
        seq_len: (30, 50),
        seed: 8008,
        ..Default::default()
    });
    assert_eq!(synth.corpus.enzymes.len(), 720);
    let opts = SplitOptions { seed: 1, test_fraction: 0.1, threshold: 0.6, ..Default::default() };
    let (manifest, _) = split_enzyme_sim(&synth.corpus, &opts).unwrap();
    manifest.validate().unwrap();
    let audit = audit_enzyme_split(&synth.corpus, &manifest);
    assert!(audit.cross_pairs_checked > 0);
    assert_eq!(audit.violations, 0, "audit found violations: {audit:?}");
    assert!(
        audit.min_cross_difference.unwrap() >= 0.6,
        "min cross-partition difference {:?}",
        audit.min_cross_difference
    );

    // reaction-similarity split: no reaction string crosses the boundary
    let rsynth = synth::separable_corpus(&SynthSpec {
        families: 15,
        enzymes_per_family: 10,
        pairs: 300,
        diverse_reactions: true,
        seed: 8108,
        ..Default::default()
    });
    let ropts = SplitOptions { seed: 2, test_fraction: 0.2, threshold: 0.6, ..Default::default() };
    let (rmanifest, _) =
        split_reaction_sim(&rsynth.corpus, &ropts, &AlignParams::nw_default()).unwrap();
    rmanifest.validate().unwrap();
    let raudit = audit_reaction_split(&rsynth.corpus, &rmanifest, &AlignParams::nw_default());
    assert_eq!(raudit.shared_strings, 0);
    assert_eq!(raudit.violations, 0);
    assert!(raudit.min_cross_difference.unwrap() >= 0.6);

    // time split partitions strictly at the boundary
    let dated = synth::separable_corpus(&SynthSpec {
        families: 10,
        enzymes_per_family: 20,
        pairs: 400,
        dated: true,
        seed: 9009,
        ..Default::default()
    });
    let boundary = parse_date("2010-12-31").unwrap();
    let (tmanifest, treport) = split_time(&dated.corpus.pairs, boundary, 3, 0.1).unwrap();
    tmanifest.validate().unwrap();
    for &i in tmanifest.train.iter().chain(&tmanifest.valid) {
        let d = dated.corpus.pairs.pairs[i].date.unwrap();
        assert!(d <= boundary, "train pair {i} dated after boundary");
    }
    for &i in &tmanifest.test {
        let d = dated.corpus.pairs.pairs[i].date.unwrap();
        assert!(d > boundary, "test pair {i} dated at or before boundary");
    }
    assert_eq!(treport.excluded_missing_date, 0);
    pass("split leakage audits", t0, 60.0);
}

// ---------------------------------------------------------------------------
// 6. Trainability and baseline comparison
// ---------------------------------------------------------------------------

#[test]
fn acceptance_trainability() {
    use zymebench_core::splitgen::mine_negatives;
    let t0 = Instant::now();
    let synth = synth::separable_corpus(&SynthSpec {
        families: 10,
        enzymes_per_family: 25,
        pairs: 500,
        d_plm: 16,
        seed: 11,
        ..Default::default()
    });
    let corpus = &synth.corpus;
    let vocab = ElementVocab::v1();

    // enzyme-similarity split (random sequences: clusters are tiny)
    let opts = SplitOptions { seed: 7, test_fraction: 0.1, threshold: 0.6, ..Default::default() };
    let (manifest, _) = split_enzyme_sim(corpus, &opts).unwrap();
    let audit = audit_enzyme_split(corpus, &manifest);
    assert_eq!(audit.violations, 0);

    // train on the split's train pool plus mined negatives restricted to
    // train-pool entities
    let (all_data, config) = synth::to_train_data(&synth, 0.0);
    let sample_of = |pair_idx: usize| {
        let p = &corpus.pairs.pairs[pair_idx];
        TrainSample {
            reaction: corpus.reaction_of_intern[p.reaction as usize],
            enzyme: corpus.enzyme_of_intern[p.enzyme as usize],
            label: p.label,
        }
    };
    let mined = mine_negatives(corpus, 10, &AlignParams::nw_default());
    let mut train_enzymes = std::collections::HashSet::new();
    let mut train_reactions = std::collections::HashSet::new();
    for &i in &manifest.train_pool() {
        let p = &corpus.pairs.pairs[i];
        train_enzymes.insert(corpus.enzyme_of_intern[p.enzyme as usize]);
        train_reactions.insert(corpus.reaction_of_intern[p.reaction as usize]);
    }
    let mut train_samples: Vec<TrainSample> =
        manifest.train.iter().map(|&i| sample_of(i)).collect();
    for n in &mined.negatives {
        let e = corpus.enzyme_index(&n.enzyme_id).unwrap();
        let r = corpus.reaction_index(&n.reaction_id).unwrap();
        if train_enzymes.contains(&e) && train_reactions.contains(&r) {
            train_samples.push(TrainSample { reaction: r, enzyme: e, label: 0 });
        }
    }
    let data = TrainData {
        reactions: all_data.reactions,
        enzymes: all_data.enzymes,
        train: train_samples,
        valid: manifest.valid.iter().map(|&i| sample_of(i)).collect(),
    };
    let tc = TrainConfig {
        epochs: 30,
        batch_size: 64,
        neg_per_pos: 4,
        lr: 3e-4,
        seed: 5,
        ..TrainConfig::default()
    };
    let out = train(&data, config, &tc, &vocab).unwrap();
    let last = out.log.last().unwrap();
    assert!(out.log.len() <= 50, "must converge within 50 epochs");
    assert!(
        last.train_accuracy >= 0.99,
        "classification accuracy {} after {} epochs",
        last.train_accuracy,
        out.log.len()
    );

    // retrieval over the full reaction catalog for unseen test enzymes
    let eval = evaluate_split(
        &out.best,
        corpus,
        &manifest,
        Direction::EnzymeToReactions,
        CandidatePool::FullCatalog,
        &vocab,
    )
    .unwrap();
    let model_top1 = eval.report.top_at(1).unwrap();
    assert!(model_top1 >= 0.95, "model Top1 {model_top1}");

    // alignment baseline on the same split: annotation transfer has nothing
    // to match across a 60%-difference boundary
    let train_pool: BTreeSet<usize> = manifest.train_pool().into_iter().collect();
    let mut annotations: HashMap<String, BTreeSet<String>> = HashMap::new();
    let mut train_seqs: BTreeMap<String, String> = BTreeMap::new();
    for &i in &train_pool {
        let p = &corpus.pairs.pairs[i];
        if p.label != 1 {
            continue;
        }
        let e = corpus.enzyme_of(p);
        train_seqs.insert(e.id.clone(), e.sequence.clone());
        annotations
            .entry(e.id.clone())
            .or_default()
            .insert(corpus.pairs.reaction_id(p).to_string());
    }
    let train_list: Vec<(String, String)> = train_seqs.into_iter().collect();
    let queries: Vec<(String, String)> = eval
        .scores
        .row_ids
        .iter()
        .map(|id| {
            let idx = corpus.enzyme_index(id).unwrap();
            (id.clone(), corpus.enzymes[idx].sequence.clone())
        })
        .collect();
    let baseline = baseline_score(
        &train_list,
        &annotations,
        &queries,
        &eval.scores.col_ids,
        &AlignParams::sw_default(),
        0.5,
    );
    let baseline_report = ranking_metrics(
        &baseline,
        &eval.labels,
        RankingOptions { exclude_constant_rows: true },
    )
    .unwrap();
    let baseline_top1 = baseline_report.top_at(1).unwrap();
    assert!(
        baseline_top1 < model_top1,
        "baseline Top1 {baseline_top1} vs model {model_top1}"
    );
    pass("trainability vs baseline", t0, 180.0);
}

// ---------------------------------------------------------------------------
// 7. Real-data corpus counts (conditional)
// ---------------------------------------------------------------------------

#[test]
fn acceptance_real_data_counts() {
    let t0 = Instant::now();
    let Some(dir) = std::env::var_os("ZYMEBENCH_DATA_DIR") else {
        println!("ACCEPTANCE real-data counts: SKIP (set ZYMEBENCH_DATA_DIR to run)");
        return;
    };
    let dir = std::path::PathBuf::from(dir);
    let pairs = zymebench_core::dataio::load_pairs(&dir.join("pairs.tsv")).unwrap();
    let enzymes = zymebench_core::dataio::load_fasta(&dir.join("enzymes.fasta")).unwrap();
    let reactions = zymebench_core::dataio::load_reactions(&dir.join("reactions.tsv")).unwrap();
    let corpus = zymebench_core::dataio::Corpus::resolve(enzymes, reactions, pairs).unwrap();
    let summary = corpus.summary();
    assert_eq!(summary.positive_pairs, 178_463);
    assert_eq!(summary.unique_enzymes, 178_327);
    assert_eq!(summary.unique_reactions, 7_726);

    let within = |got: usize, want: usize| {
        (got as f64 - want as f64).abs() / want as f64 <= 0.005
    };
    let boundary = parse_date("2010-12-31").unwrap();
    let (tm, _) = split_time(&corpus.pairs, boundary, 0, 0.1).unwrap();
    assert!(within(tm.train_pool().len(), 166_175), "time train {}", tm.train_pool().len());
    assert!(within(tm.test.len(), 12_287), "time test {}", tm.test.len());

    let eopts = SplitOptions { seed: 0, test_fraction: 0.05, ..Default::default() };
    let (em, _) = split_enzyme_sim(&corpus, &eopts).unwrap();
    assert!(within(em.train_pool().len(), 169_724));
    assert!(within(em.test.len(), 8_739));
    let ea = audit_enzyme_split(&corpus, &em);
    assert_eq!(ea.violations, 0);

    let ropts = SplitOptions { seed: 0, test_fraction: 0.09, ..Default::default() };
    let (rm, _) = split_reaction_sim(&corpus, &ropts, &AlignParams::nw_default()).unwrap();
    assert!(within(rm.train_pool().len(), 163_771));
    assert!(within(rm.test.len(), 14_692));
    let ra = audit_reaction_split(&corpus, &rm, &AlignParams::nw_default());
    assert_eq!(ra.shared_strings, 0);
    pass("real-data counts", t0, 3600.0);
}
