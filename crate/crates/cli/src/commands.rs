use crate::args::*;
use crate::runctx::{self, write_json_pretty, write_run_manifest};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;
use zymebench_core::align::AlignParams;
use zymebench_core::chemgraph::{reaction_fingerprint, ElementVocab};
use zymebench_core::dataio::{self, parse_date, TensorFile};
use zymebench_core::evalrank::{
    self, baseline_score, CandidatePool, Direction, LabelMatrix, MetricsReport, RankingOptions,
    ScoreMatrix,
};
use zymebench_core::mat::Mat;
use zymebench_core::model::score::{EnzymeInput, ReactionInput};
use zymebench_core::model::train::{train, TrainConfig, TrainData, TrainSample};
use zymebench_core::model::{EnzymeMode, ModelConfig, ModelParams, ReactionFeatures};
use zymebench_core::splitgen::{
    audit_enzyme_split, audit_reaction_split, mine_negatives, split_enzyme_sim,
    split_reaction_sim, split_time, NegativeSet, SplitOptions,
};
use zymebench_core::synth;

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::EnzymeToReactions => Direction::EnzymeToReactions,
            DirectionArg::ReactionToEnzymes => Direction::ReactionToEnzymes,
        }
    }
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let pairs = dataio::load_pairs(&args.pairs)?;
    let enzymes = dataio::load_fasta(&args.fasta)?;
    let reactions = dataio::load_reactions(&args.reactions)?;
    let corpus = dataio::Corpus::resolve(enzymes, reactions, pairs)?;

    std::fs::create_dir_all(&args.out)?;
    let mut pf = std::fs::File::create(args.out.join(runctx::PAIRS_FILE))?;
    corpus.pairs.write_tsv(&mut pf)?;
    let mut ff = std::fs::File::create(args.out.join(runctx::FASTA_FILE))?;
    for e in &corpus.enzymes {
        writeln!(ff, ">{}", e.id)?;
        writeln!(ff, "{}", e.sequence)?;
    }
    let mut rf = std::fs::File::create(args.out.join(runctx::REACTIONS_FILE))?;
    writeln!(rf, "reaction_id\tsmiles\tdate")?;
    for r in &corpus.reactions {
        let date = r.date.map(dataio::format_date).unwrap_or_default();
        writeln!(
            rf,
            "{}\t{}>>{}\t{}",
            r.id,
            r.substrate_smiles.join("."),
            r.product_smiles.join("."),
            date
        )?;
    }
    match (&args.embeddings, &args.embedding_ids) {
        (Some(emb), Some(ids)) => {
            // header sanity before copying
            let header = dataio::read_tensor_header(emb)?;
            if header.dims.len() != 2 {
                bail!("embeddings must be a rank-2 tensor, got dims {:?}", header.dims);
            }
            std::fs::copy(emb, args.out.join(runctx::EMBEDDINGS_FILE))?;
            std::fs::copy(ids, args.out.join(runctx::EMBEDDING_IDS_FILE))?;
        }
        (None, None) => {}
        _ => bail!("--embeddings and --embedding-ids must be given together"),
    }
    if let Some(dir) = &args.residue_dir {
        let dst = args.out.join(runctx::RESIDUE_DIR);
        std::fs::create_dir_all(&dst)?;
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            if entry.file_type()?.is_file() {
                std::fs::copy(entry.path(), dst.join(entry.file_name()))?;
            }
        }
    }
    let summary = corpus.summary();
    write_json_pretty(&summary, &args.out.join("summary.json"))?;
    write_run_manifest(&args.out, "ingest", &serde_json::json!({
        "pairs": args.pairs,
        "fasta": args.fasta,
        "reactions": args.reactions,
        "embeddings": args.embeddings,
        "residue_dir": args.residue_dir,
    }))?;
    println!(
        "ingested {} pairs ({} positive), {} enzymes, {} reactions",
        summary.pairs, summary.positive_pairs, summary.unique_enzymes, summary.unique_reactions
    );
    Ok(())
}

#[derive(Serialize)]
#[serde(untagged)]
enum SplitSideReport {
    Time(zymebench_core::splitgen::TimeSplitReport),
    Sim {
        clusters: zymebench_core::splitgen::SimSplitReport,
        audit: zymebench_core::splitgen::AuditReport,
    },
}

pub fn split(args: &SplitArgs) -> Result<()> {
    let corpus = runctx::load_corpus(&args.corpus, false)?;
    let opts = SplitOptions {
        seed: args.seed,
        valid_fraction: args.valid_fraction,
        test_fraction: args.test_fraction.unwrap_or(match args.kind {
            SplitKindArg::EnzymeSim => 0.05,
            SplitKindArg::ReactionSim => 0.09,
            SplitKindArg::Time => 0.0,
        }),
        threshold: args.threshold,
        ..SplitOptions::default()
    };
    let (manifest, side) = match args.kind {
        SplitKindArg::Time => {
            let boundary = parse_date(&args.boundary)
                .with_context(|| format!("bad boundary date '{}'", args.boundary))?;
            let (m, report) =
                split_time(&corpus.pairs, boundary, args.seed, args.valid_fraction)?;
            (m, SplitSideReport::Time(report))
        }
        SplitKindArg::EnzymeSim => {
            let (m, clusters) = split_enzyme_sim(&corpus, &opts)?;
            let audit = audit_enzyme_split(&corpus, &m);
            (m, SplitSideReport::Sim { clusters, audit })
        }
        SplitKindArg::ReactionSim => {
            let (m, clusters) = split_reaction_sim(&corpus, &opts, &AlignParams::nw_default())?;
            let audit = audit_reaction_split(&corpus, &m, &AlignParams::nw_default());
            (m, SplitSideReport::Sim { clusters, audit })
        }
    };
    dataio::write_manifest(&manifest, &args.out)?;
    let audit_path = args
        .audit
        .clone()
        .unwrap_or_else(|| args.out.with_extension("audit.json"));
    write_json_pretty(&side, &audit_path)?;
    write_run_manifest(&args.out, "split", &serde_json::json!({
        "kind": format!("{:?}", args.kind),
        "boundary": args.boundary,
        "threshold": args.threshold,
        "test_fraction": opts.test_fraction,
        "valid_fraction": args.valid_fraction,
        "seed": args.seed,
    }))?;
    println!(
        "split {:?}: train {} / valid {} / test {}",
        manifest.split_kind,
        manifest.train.len(),
        manifest.valid.len(),
        manifest.test.len()
    );
    Ok(())
}

pub fn mine_negatives_cmd(args: &MineNegativesArgs) -> Result<()> {
    let corpus = runctx::load_corpus(&args.corpus, false)?;
    let negatives = mine_negatives(&corpus, args.k, &AlignParams::nw_default());
    let mut f = std::fs::File::create(&args.out)?;
    negatives.write_tsv(&mut f)?;
    write_run_manifest(&args.out, "mine-negatives", &serde_json::json!({ "k": args.k }))?;
    println!("mined {} negatives", negatives.negatives.len());
    Ok(())
}

pub fn featurize(args: &FeaturizeArgs) -> Result<()> {
    let corpus = runctx::load_corpus(&args.corpus, false)?;
    let width = 2 * args.nbits;
    let mut m = Mat::zeros(corpus.reactions.len(), width);
    for (i, r) in corpus.reactions.iter().enumerate() {
        let fp = reaction_fingerprint(&r.substrates, &r.products, args.radius, args.nbits);
        for (j, v) in fp.to_f64_vec().into_iter().enumerate() {
            m.set(i, j, v);
        }
    }
    dataio::write_tensor(&TensorFile::from_mat(&m), &args.out)?;
    let ids: Vec<&str> = corpus.reactions.iter().map(|r| r.id.as_str()).collect();
    write_json_pretty(&ids, &sidecar(&args.out, "ids.json"))?;
    write_run_manifest(&args.out, "featurize", &serde_json::json!({
        "radius": args.radius,
        "nbits": args.nbits,
    }))?;
    println!("featurized {} reactions into {}-wide fingerprints", ids.len(), width);
    Ok(())
}

fn sidecar(out: &Path, suffix: &str) -> std::path::PathBuf {
    let name = format!(
        "{}.{suffix}",
        out.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default()
    );
    out.with_file_name(name)
}

#[derive(Debug, Default, Deserialize)]
struct TrainFileConfig {
    #[serde(default)]
    model: Option<ModelConfig>,
    #[serde(default)]
    train: Option<TrainConfig>,
}

/// Mined negatives become training samples only when both entities already
/// occur in the train pool, so test-side enzymes and reactions stay unseen.
fn resolve_negatives(
    corpus: &zymebench_core::Corpus,
    manifest: &zymebench_core::SplitManifest,
    negatives: &NegativeSet,
) -> Vec<TrainSample> {
    let mut train_enzymes = std::collections::HashSet::new();
    let mut train_reactions = std::collections::HashSet::new();
    for &i in &manifest.train_pool() {
        let p = &corpus.pairs.pairs[i];
        train_enzymes.insert(corpus.enzyme_of_intern[p.enzyme as usize]);
        train_reactions.insert(corpus.reaction_of_intern[p.reaction as usize]);
    }
    negatives
        .negatives
        .iter()
        .filter_map(|n| {
            let e = corpus.enzyme_index(&n.enzyme_id)?;
            let r = corpus.reaction_index(&n.reaction_id)?;
            if train_enzymes.contains(&e) && train_reactions.contains(&r) {
                Some(TrainSample { reaction: r, enzyme: e, label: 0 })
            } else {
                None
            }
        })
        .collect()
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    let corpus = runctx::load_corpus(&args.corpus, true)?;
    let manifest = runctx::read_manifest_artifact(&args.manifest)?;

    let file_cfg: TrainFileConfig = match &args.config {
        Some(path) => serde_json::from_reader(
            std::fs::File::open(path).with_context(|| format!("open {}", path.display()))?,
        )?,
        None => TrainFileConfig::default(),
    };
    let d_plm = corpus
        .enzymes
        .iter()
        .find_map(|e| e.embedding.as_ref().map(|m| m.cols))
        .context("corpus has no embeddings; re-run ingest with --embeddings")?;
    let mut model_cfg = file_cfg.model.unwrap_or_else(|| ModelConfig {
        d_r: 64,
        gnn_layers: 1,
        psi_layers: 1,
        knn: 8,
        ..ModelConfig::default()
    });
    model_cfg.d_plm = d_plm;
    model_cfg.atom_feature_width = ElementVocab::v1().feature_width();
    if let Some(mode) = args.enzyme_mode {
        model_cfg.enzyme_mode = match mode {
            EnzymeModeArg::Pooled => EnzymeMode::Pooled,
            EnzymeModeArg::FrameAveraged => EnzymeMode::FrameAveraged,
        };
    }
    if let Some(rf) = args.reaction_features {
        model_cfg.reaction_features = match rf {
            ReactionFeaturesArg::Graph => ReactionFeatures::Graph,
            ReactionFeaturesArg::Fingerprint => ReactionFeatures::Fingerprint,
        };
        if model_cfg.reaction_features == ReactionFeatures::Fingerprint {
            model_cfg.d_r = 2 * model_cfg.fingerprint_bits;
        }
    }
    let mut train_cfg = file_cfg.train.unwrap_or_default();
    if let Some(v) = args.seed {
        train_cfg.seed = v;
    }
    if let Some(v) = args.epochs {
        train_cfg.epochs = v;
    }
    if let Some(v) = args.lr {
        train_cfg.lr = v;
    }
    if let Some(v) = args.batch_size {
        train_cfg.batch_size = v;
    }

    let vocab = ElementVocab::v1();
    let reactions: Vec<ReactionInput> = corpus
        .reactions
        .iter()
        .map(|r| ReactionInput::from_record(r, &model_cfg))
        .collect();
    let enzymes: Vec<EnzymeInput> = corpus
        .enzymes
        .iter()
        .map(|e| EnzymeInput::from_record(e, model_cfg.enzyme_mode))
        .collect::<Result<_, _>>()?;
    let sample_of = |pair_idx: usize| {
        let p = &corpus.pairs.pairs[pair_idx];
        TrainSample {
            reaction: corpus.reaction_of_intern[p.reaction as usize],
            enzyme: corpus.enzyme_of_intern[p.enzyme as usize],
            label: p.label,
        }
    };
    let mut train_samples: Vec<TrainSample> =
        manifest.train.iter().map(|&i| sample_of(i)).collect();
    if let Some(neg_path) = &args.negatives {
        let file = std::fs::File::open(neg_path)
            .with_context(|| format!("open {}; run `zymebench mine-negatives` first", neg_path.display()))?;
        let negatives = NegativeSet::read_tsv(std::io::BufReader::new(file))?;
        train_samples.extend(resolve_negatives(&corpus, &manifest, &negatives));
    }
    let data = TrainData {
        reactions,
        enzymes,
        train: train_samples,
        valid: manifest.valid.iter().map(|&i| sample_of(i)).collect(),
    };
    let out = train(&data, model_cfg.clone(), &train_cfg, &vocab)?;

    std::fs::create_dir_all(&args.out)?;
    out.best.save(&args.out)?;
    let log_path = args.log.clone().unwrap_or_else(|| args.out.join("train_log.jsonl"));
    let mut log = std::fs::File::create(&log_path)?;
    for stats in &out.log {
        serde_json::to_writer(&mut log, stats)?;
        log.write_all(b"\n")?;
    }
    write_run_manifest(&args.out, "train", &serde_json::json!({
        "model": model_cfg,
        "train": train_cfg,
        "manifest": args.manifest,
        "negatives": args.negatives,
    }))?;
    let last = out.log.last().expect("at least one epoch");
    println!(
        "trained {} epochs: loss {:.4}, accuracy {:.4}{}",
        out.log.len(),
        last.train_loss,
        last.train_accuracy,
        match last.valid_accuracy {
            Some(a) => format!(", valid accuracy {a:.4}"),
            None => String::new(),
        }
    );
    Ok(())
}

fn load_negative_pool(path: &Path) -> Result<NegativeSet> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("open {}; run `zymebench mine-negatives` first", path.display()))?;
    Ok(NegativeSet::read_tsv(std::io::BufReader::new(file))?)
}

pub fn score(args: &ScoreArgs) -> Result<()> {
    let corpus = runctx::load_corpus(&args.corpus, true)?;
    let manifest = runctx::read_manifest_artifact(&args.manifest)?;
    let params = ModelParams::load(&args.ckpt)
        .with_context(|| format!("load checkpoint {}; run `zymebench train` first", args.ckpt.display()))?;
    let vocab = ElementVocab::v1();
    let negatives = args.negatives.as_deref().map(load_negative_pool).transpose()?;
    let pool = match &negatives {
        Some(n) => CandidatePool::WithNegatives(n),
        None => CandidatePool::FullCatalog,
    };
    let outcome = evalrank::evaluate_split(
        &params,
        &corpus,
        &manifest,
        args.direction.into(),
        pool,
        &vocab,
    )?;
    let m = Mat::from_vec(
        outcome.scores.rows(),
        outcome.scores.cols(),
        outcome.scores.values.iter().map(|&v| v as f64).collect(),
    );
    dataio::write_tensor(&TensorFile::from_mat(&m), &args.out)?;
    write_json_pretty(&outcome.scores.row_ids, &sidecar(&args.out, "rows.json"))?;
    write_json_pretty(&outcome.scores.col_ids, &sidecar(&args.out, "cols.json"))?;
    write_run_manifest(&args.out, "score", &serde_json::json!({
        "ckpt": args.ckpt,
        "manifest": args.manifest,
        "direction": format!("{:?}", args.direction),
        "negatives": args.negatives,
    }))?;
    println!(
        "scored {} x {} logits",
        outcome.scores.rows(),
        outcome.scores.cols()
    );
    Ok(())
}

fn test_labels_for(
    corpus: &zymebench_core::Corpus,
    manifest: &zymebench_core::SplitManifest,
    direction: Direction,
    row_ids: &[String],
    col_ids: &[String],
) -> LabelMatrix {
    let row_pos: HashMap<&str, usize> =
        row_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let col_pos: HashMap<&str, usize> =
        col_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut labels = LabelMatrix::new(row_ids.len(), col_ids.len());
    for &i in &manifest.test {
        let p = &corpus.pairs.pairs[i];
        if p.label != 1 {
            continue;
        }
        let (row_id, col_id) = match direction {
            Direction::EnzymeToReactions => {
                (corpus.pairs.enzyme_id(p), corpus.pairs.reaction_id(p))
            }
            Direction::ReactionToEnzymes => {
                (corpus.pairs.reaction_id(p), corpus.pairs.enzyme_id(p))
            }
        };
        if let (Some(&r), Some(&c)) = (row_pos.get(row_id), col_pos.get(col_id)) {
            labels.set(r, c);
        }
    }
    labels
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let corpus = runctx::load_corpus(&args.corpus, false)?;
    let manifest = runctx::read_manifest_artifact(&args.manifest)?;
    let tensor = dataio::read_tensor(&args.scores)
        .with_context(|| format!("read {}; run `zymebench score` first", args.scores.display()))?;
    let m = tensor.to_mat()?;
    let row_ids: Vec<String> = serde_json::from_reader(
        std::fs::File::open(sidecar(&args.scores, "rows.json"))
            .context("missing rows sidecar; run `zymebench score` first")?,
    )?;
    let col_ids: Vec<String> = serde_json::from_reader(
        std::fs::File::open(sidecar(&args.scores, "cols.json"))
            .context("missing cols sidecar; run `zymebench score` first")?,
    )?;
    let scores = ScoreMatrix::from_mat(row_ids, col_ids, &m);
    let direction: Direction = args.direction.into();
    let labels = test_labels_for(&corpus, &manifest, direction, &scores.row_ids, &scores.col_ids);
    let mut report = evalrank::ranking_metrics(&scores, &labels, RankingOptions::default())?;

    // classification over the scored test pairs (both labels)
    let row_pos: HashMap<&str, usize> =
        scores.row_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let col_pos: HashMap<&str, usize> =
        scores.col_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut logits = Vec::new();
    let mut labels01 = Vec::new();
    for &i in &manifest.test {
        let p = &corpus.pairs.pairs[i];
        let (row_id, col_id) = match direction {
            Direction::EnzymeToReactions => {
                (corpus.pairs.enzyme_id(p), corpus.pairs.reaction_id(p))
            }
            Direction::ReactionToEnzymes => {
                (corpus.pairs.reaction_id(p), corpus.pairs.enzyme_id(p))
            }
        };
        if let (Some(&r), Some(&c)) = (row_pos.get(row_id), col_pos.get(col_id)) {
            logits.push(scores.get(r, c) as f64);
            labels01.push(p.label);
        }
    }
    if !logits.is_empty() {
        let (acc, auroc) = evalrank::classification_metrics(&logits, &labels01, 0.0)?;
        report.accuracy = Some(acc);
        report.auroc = auroc;
    }
    write_json_pretty(&report, &args.out)?;
    let mut tsv = Vec::new();
    writeln!(tsv, "{}", MetricsReport::tsv_header())?;
    report.write_tsv_row("model", &mut tsv)?;
    std::fs::write(sidecar(&args.out, "tsv"), &tsv)?;
    write_run_manifest(&args.out, "evaluate", &serde_json::json!({
        "scores": args.scores,
        "manifest": args.manifest,
        "direction": format!("{:?}", args.direction),
    }))?;
    println!(
        "Top1 {:.4}  MRR {:.4}  MeanRank {:.2}  ({} rows, {} excluded)",
        report.top_at(1).unwrap_or(0.0),
        report.mrr,
        report.mean_rank,
        report.evaluated_rows,
        report.excluded_rows
    );
    Ok(())
}

pub fn baseline(args: &BaselineArgs) -> Result<()> {
    let corpus = runctx::load_corpus(&args.corpus, false)?;
    let manifest = runctx::read_manifest_artifact(&args.manifest)?;
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

    let mut test_enzymes: Vec<(String, String)> = Vec::new();
    let mut seen = BTreeSet::new();
    for &i in &manifest.test {
        let p = &corpus.pairs.pairs[i];
        let e = corpus.enzyme_of(p);
        if seen.insert(e.id.clone()) {
            test_enzymes.push((e.id.clone(), e.sequence.clone()));
        }
    }
    let reaction_ids: Vec<String> = corpus.reactions.iter().map(|r| r.id.clone()).collect();
    let transfer = baseline_score(
        &train_list,
        &annotations,
        &test_enzymes,
        &reaction_ids,
        &AlignParams::sw_default(),
        args.threshold_factor,
    );
    let direction: Direction = args.direction.into();
    let scores = match direction {
        Direction::EnzymeToReactions => transfer,
        Direction::ReactionToEnzymes => {
            // restrict rows to test reactions, candidates are the test enzymes
            let mut test_reactions: Vec<String> = Vec::new();
            let mut seen = BTreeSet::new();
            for &i in &manifest.test {
                let p = &corpus.pairs.pairs[i];
                let id = corpus.pairs.reaction_id(p).to_string();
                if seen.insert(id.clone()) {
                    test_reactions.push(id);
                }
            }
            let col_of: HashMap<&str, usize> = transfer
                .col_ids
                .iter()
                .enumerate()
                .map(|(i, s)| (s.as_str(), i))
                .collect();
            let mut values = vec![0.0f32; test_reactions.len() * transfer.row_ids.len()];
            for (i, rid) in test_reactions.iter().enumerate() {
                if let Some(&c) = col_of.get(rid.as_str()) {
                    for (j, _) in transfer.row_ids.iter().enumerate() {
                        values[i * transfer.row_ids.len() + j] = transfer.get(j, c);
                    }
                }
            }
            ScoreMatrix {
                row_ids: test_reactions,
                col_ids: transfer.row_ids.clone(),
                values,
            }
        }
    };
    let labels = test_labels_for(&corpus, &manifest, direction, &scores.row_ids, &scores.col_ids);
    let report = evalrank::ranking_metrics(
        &scores,
        &labels,
        RankingOptions { exclude_constant_rows: true },
    )?;
    write_json_pretty(&report, &args.out)?;
    let mut tsv = Vec::new();
    writeln!(tsv, "{}", MetricsReport::tsv_header())?;
    report.write_tsv_row("baseline", &mut tsv)?;
    std::fs::write(sidecar(&args.out, "tsv"), &tsv)?;
    write_run_manifest(&args.out, "baseline", &serde_json::json!({
        "manifest": args.manifest,
        "direction": format!("{:?}", args.direction),
        "threshold_factor": args.threshold_factor,
        "align": AlignParams::sw_default(),
    }))?;
    println!(
        "baseline Top1 {:.4}  MRR {:.4}  ({} rows evaluated, {} excluded)",
        report.top_at(1).unwrap_or(0.0),
        report.mrr,
        report.evaluated_rows,
        report.excluded_rows
    );
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let mut tsv = Vec::new();
    writeln!(tsv, "{}", MetricsReport::tsv_header())?;
    for spec in &args.input {
        let (label, path) = spec
            .split_once('=')
            .with_context(|| format!("--input needs LABEL=PATH, got '{spec}'"))?;
        let report: MetricsReport = serde_json::from_reader(
            std::fs::File::open(path).with_context(|| format!("open {path}"))?,
        )?;
        report.write_tsv_row(label, &mut tsv)?;
    }
    std::fs::write(&args.out, &tsv)?;
    print!("{}", String::from_utf8_lossy(&tsv));
    write_run_manifest(&args.out, "report", &serde_json::json!({ "inputs": args.input }))?;
    Ok(())
}

pub fn gen_corpus(args: &GenCorpusArgs) -> Result<()> {
    let spec = synth::SynthSpec {
        families: args.families,
        enzymes_per_family: args.per_family,
        pairs: args.pairs,
        d_plm: args.d_plm,
        dated: args.dated,
        cluster_sequences: args.cluster_sequences,
        diverse_reactions: args.diverse_reactions,
        seed: args.seed,
        ..synth::SynthSpec::default()
    };
    let corpus = synth::separable_corpus(&spec);
    synth::write_corpus_files(&corpus, &args.out)?;
    write_json_pretty(&corpus.corpus.summary(), &args.out.join("summary.json"))?;
    write_run_manifest(&args.out, "gen-corpus", &serde_json::json!({
        "families": args.families,
        "per_family": args.per_family,
        "pairs": args.pairs,
        "d_plm": args.d_plm,
        "seed": args.seed,
        "dated": args.dated,
        "cluster_sequences": args.cluster_sequences,
        "diverse_reactions": args.diverse_reactions,
    }))?;
    println!(
        "generated corpus: {} enzymes, {} reactions, {} pairs",
        corpus.corpus.enzymes.len(),
        corpus.corpus.reactions.len(),
        corpus.corpus.pairs.len()
    );
    Ok(())
}

/// Map an error chain onto the documented exit codes: 2 for data problems,
/// 3 for numerical failures.
pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    use zymebench_core::evalrank::EvalError;
    use zymebench_core::model::ModelError;
    for cause in err.chain() {
        if let Some(m) = cause.downcast_ref::<ModelError>() {
            return match m {
                ModelError::NanLoss { .. }
                | ModelError::ZeroVector
                | ModelError::NonScalarLoss { .. }
                | ModelError::TapeConsumed
                | ModelError::EmptyTape => 3,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<EvalError>() {
            return match e {
                EvalError::NonFiniteScore { .. } => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<dataio::DataError>().is_some()
            || cause.downcast_ref::<zymebench_core::splitgen::SplitError>().is_some()
            || cause.downcast_ref::<zymebench_core::chemgraph::SmilesError>().is_some()
        {
            return 2;
        }
    }
    2
}
