use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zymebench_bench::random_sequences;
use zymebench_core::align::{
    levenshtein, mine_topk, needleman_wunsch, smith_waterman, AlignParams, SimilarityMetric,
};
use zymebench_core::chemgraph::{circular_fingerprint, parse_smiles, ElementVocab};
use zymebench_core::encode::{frame_average, reaction_embed};
use zymebench_core::evalrank::{rank_rows, ranking_metrics, LabelMatrix, RankingOptions, ScoreMatrix};
use zymebench_core::mat::Mat;
use zymebench_core::model::{EnzymeMode, ModelConfig, ModelParams};

fn bench_alignment(c: &mut Criterion) {
    let mut group = c.benchmark_group("alignment");
    let seqs = random_sequences(2, (300, 300), 1);
    let (a, b) = (&seqs[0].1, &seqs[1].1);
    group.bench_function("levenshtein_300", |bench| {
        bench.iter(|| levenshtein(black_box(a), black_box(b), None))
    });
    group.bench_function("levenshtein_300_cutoff_30", |bench| {
        bench.iter(|| levenshtein(black_box(a), black_box(b), Some(30)))
    });
    let nw = AlignParams::nw_default();
    group.bench_function("needleman_wunsch_300", |bench| {
        bench.iter(|| needleman_wunsch(black_box(a), black_box(b), &nw))
    });
    let sw = AlignParams::sw_default();
    group.bench_function("smith_waterman_300", |bench| {
        bench.iter(|| smith_waterman(black_box(a), black_box(b), &sw))
    });
    group.finish();
}

fn bench_mine_topk(c: &mut Criterion) {
    let mut group = c.benchmark_group("mine_topk");
    group.sample_size(10);
    for n in [200usize, 400] {
        let items = random_sequences(n, (40, 80), 2);
        for prune in [false, true] {
            group.bench_with_input(
                BenchmarkId::new(format!("edit_k10_prune_{prune}"), n),
                &items,
                |bench, items| {
                    bench.iter(|| {
                        mine_topk(items, items, &SimilarityMetric::EditSimilarity, 10, prune)
                    })
                },
            );
        }
    }
    group.finish();
}

fn bench_chemgraph(c: &mut Criterion) {
    let mut group = c.benchmark_group("chemgraph");
    let smiles = "CC(=O)Oc1ccccc1C(=O)O"; // aspirin-sized input
    group.bench_function("parse_smiles", |bench| {
        bench.iter(|| parse_smiles(black_box(smiles)).unwrap())
    });
    let mol = parse_smiles(smiles).unwrap();
    group.bench_function("circular_fingerprint_r2", |bench| {
        bench.iter(|| circular_fingerprint(black_box(&mol), 2, 2048))
    });
    group.finish();
}

fn bench_encoders(c: &mut Criterion) {
    let mut group = c.benchmark_group("encoders");
    group.sample_size(20);
    let config = ModelConfig {
        d_r: 64,
        d_plm: 32,
        gnn_layers: 2,
        psi_layers: 2,
        knn: 16,
        enzyme_mode: EnzymeMode::FrameAveraged,
        ..ModelConfig::default()
    };
    let params = ModelParams::init(config, 7);
    let vocab = ElementVocab::v1();
    let view = params.encode_view(&vocab);
    let sub = parse_smiles("CC(=O)Oc1ccccc1C(=O)O").unwrap();
    let prod = parse_smiles("Oc1ccccc1C(=O)O").unwrap();
    group.bench_function("reaction_embed_20_atoms", |bench| {
        bench.iter(|| {
            reaction_embed(
                black_box(std::slice::from_ref(&sub)),
                black_box(std::slice::from_ref(&prod)),
                &view,
            )
            .unwrap()
        })
    });
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 64;
    let coords: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)])
        .collect();
    let features =
        Mat::from_vec(n, 32, (0..n * 32).map(|_| rng.gen_range(-1.0..1.0)).collect());
    group.bench_function("frame_average_64_residues", |bench| {
        bench.iter(|| frame_average(black_box(&features), black_box(&coords), &view).unwrap())
    });
    group.finish();
}

fn bench_ranking(c: &mut Criterion) {
    let mut group = c.benchmark_group("ranking");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (rows, cols) = (200usize, 1000usize);
    let scores = ScoreMatrix {
        row_ids: (0..rows).map(|i| format!("q{i}")).collect(),
        col_ids: (0..cols).map(|i| format!("c{i}")).collect(),
        values: (0..rows * cols).map(|_| rng.gen_range(-4.0..4.0)).collect(),
    };
    let mut labels = LabelMatrix::new(rows, cols);
    for i in 0..rows {
        for _ in 0..3 {
            labels.set(i, rng.gen_range(0..cols));
        }
    }
    group.bench_function("rank_rows_200x1000", |bench| {
        bench.iter(|| rank_rows(black_box(&scores)).unwrap())
    });
    group.bench_function("ranking_metrics_200x1000", |bench| {
        bench.iter(|| {
            ranking_metrics(black_box(&scores), black_box(&labels), RankingOptions::default())
                .unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_alignment,
    bench_mine_topk,
    bench_chemgraph,
    bench_encoders,
    bench_ranking
);
criterion_main!(benches);
