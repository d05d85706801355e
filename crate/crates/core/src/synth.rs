//! Deterministic synthetic corpora: family-structured enzymes and reactions
//! where pooled residue embeddings carry the family signal and sequences do
//! not. Used by tests, the bundled toy corpus, and smoke runs.

use crate::chemgraph::ElementVocab;
use crate::dataio::{self, Corpus, EnzymeRecord, Pair, PairSet, TensorFile};
use crate::mat::Mat;
use crate::model::score::{EnzymeInput, ReactionInput};
use crate::model::train::{TrainData, TrainSample};
use crate::model::{EnzymeMode, ModelConfig, ReactionFeatures};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub families: usize,
    pub enzymes_per_family: usize,
    /// Total labeled pairs; at most 2 per enzyme (one positive, one negative).
    pub pairs: usize,
    pub d_plm: usize,
    pub seq_len: (usize, usize),
    /// Per-coordinate embedding noise around the family pattern.
    pub noise: f64,
    /// Mutate family prototypes instead of drawing fully random sequences,
    /// giving the enzyme-similarity split real clusters to find.
    pub cluster_sequences: bool,
    /// Spread pair dates uniformly over [2005-01-01, 2016-01-01].
    pub dated: bool,
    /// Build family reactions from disjoint letter/length schemes so that
    /// cross-family NW similarity is zero (for reaction-split tests).
    pub diverse_reactions: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            families: 5,
            enzymes_per_family: 10,
            pairs: 100,
            d_plm: 16,
            seq_len: (30, 50),
            noise: 0.1,
            cluster_sequences: false,
            dated: false,
            diverse_reactions: false,
            seed: 0,
        }
    }
}

pub struct SynthCorpus {
    pub corpus: Corpus,
    pub family_of_enzyme: Vec<usize>,
    pub family_of_reaction: Vec<usize>,
    pub spec: SynthSpec,
}

const HETERO_SUB: [&str; 5] = ["O", "N", "S", "P", "F"];
const HETERO_PROD: [&str; 5] = ["N", "O", "Cl", "S", "Br"];
const AMINO: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";

/// Structurally distinct reaction per family: chain length and heteroatoms
/// both vary with the family index.
pub fn family_reaction_smiles(family: usize) -> (String, String) {
    let chain = "C".repeat(family + 2);
    let sub = format!("{}{}", chain, HETERO_SUB[family % HETERO_SUB.len()]);
    let prod = format!("{}{}(=O){}", HETERO_PROD[family % HETERO_PROD.len()], chain, if family % 2 == 0 { "O" } else { "N" });
    (sub, prod)
}

/// Reactions whose strings share nothing across families: per family a
/// distinct homo-atom chain whose length doubles with each reuse of the
/// letter, driving cross-family NW similarity to zero.
pub fn diverse_reaction_smiles(family: usize) -> (String, String) {
    const SUB_LETTERS: [&str; 5] = ["C", "N", "O", "S", "P"];
    const PROD_LETTERS: [&str; 5] = ["N", "O", "S", "P", "C"];
    let letter = family % SUB_LETTERS.len();
    let len = 4usize << (family / SUB_LETTERS.len()).min(6);
    (
        SUB_LETTERS[letter].repeat(len),
        PROD_LETTERS[letter].repeat(len),
    )
}

fn random_sequence(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| AMINO[rng.gen_range(0..AMINO.len())] as char).collect()
}

fn mutate(rng: &mut ChaCha8Rng, prototype: &str, rate: f64) -> String {
    prototype
        .bytes()
        .map(|b| {
            if rng.gen_bool(rate) {
                AMINO[rng.gen_range(0..AMINO.len())] as char
            } else {
                b as char
            }
        })
        .collect()
}

/// Family signal lives in the residue embeddings, never in the sequence.
pub fn separable_corpus(spec: &SynthSpec) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_enzymes = spec.families * spec.enzymes_per_family;
    assert!(spec.pairs <= 2 * n_enzymes, "at most 2 pairs (1 pos, 1 neg) per enzyme");
    assert!(spec.d_plm >= 2, "d_plm too small");

    let prototypes: Vec<String> = (0..spec.families)
        .map(|_| {
            let len = rng.gen_range(spec.seq_len.0..=spec.seq_len.1);
            random_sequence(&mut rng, len)
        })
        .collect();

    let mut enzymes = Vec::with_capacity(n_enzymes);
    let mut family_of_enzyme = Vec::with_capacity(n_enzymes);
    for i in 0..n_enzymes {
        // interleave families across ids so id-ordered subsets span families
        let family = i % spec.families;
        let sequence = if spec.cluster_sequences {
            mutate(&mut rng, &prototypes[family], 0.1)
        } else {
            let len = rng.gen_range(spec.seq_len.0..=spec.seq_len.1);
            random_sequence(&mut rng, len)
        };
        let residues = sequence.len();
        let mut emb = Mat::zeros(residues, spec.d_plm);
        for r in 0..residues {
            for j in 0..spec.d_plm {
                let mut v = rng.gen_range(-spec.noise..spec.noise);
                if j == family % spec.d_plm {
                    v += 1.5;
                }
                if j == (family * 7 + 3) % spec.d_plm {
                    v -= 1.0;
                }
                emb.set(r, j, v);
            }
        }
        let coords: Vec<[f64; 3]> = (0..residues)
            .map(|_| {
                [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]
            })
            .collect();
        let mut rec = EnzymeRecord::new(format!("e{i:04}"), sequence);
        rec.embedding = Some(emb);
        rec.coords = Some(coords);
        enzymes.push(rec);
        family_of_enzyme.push(family);
    }

    let mut reactions = Vec::with_capacity(spec.families);
    let mut family_of_reaction = Vec::with_capacity(spec.families);
    for f in 0..spec.families {
        let (sub, prod) = if spec.diverse_reactions {
            diverse_reaction_smiles(f)
        } else {
            family_reaction_smiles(f)
        };
        reactions.push(
            dataio::parse_reaction(format!("r{f:03}"), &sub, &prod, None)
                .expect("synthetic SMILES parse"),
        );
        family_of_reaction.push(f);
    }

    let date_lo = dataio::parse_date("2005-01-01").expect("date");
    let date_hi = dataio::parse_date("2016-01-01").expect("date");
    let mut pairs = Vec::with_capacity(spec.pairs);
    let mut used: HashSet<(u32, u32)> = HashSet::new();
    let mut enzyme_ids = Vec::new();
    let mut reaction_ids = Vec::new();
    for (i, e) in enzymes.iter().enumerate() {
        enzyme_ids.push(e.id.clone());
        let _ = i;
    }
    for r in &reactions {
        reaction_ids.push(r.id.clone());
    }
    for i in 0..spec.pairs {
        let e = (i / 2) % n_enzymes;
        let fam = family_of_enzyme[e];
        let r = if i % 2 == 0 {
            fam
        } else {
            // a wrong-family reaction
            let mut g = rng.gen_range(0..spec.families);
            if g == fam {
                g = (g + 1) % spec.families;
            }
            g
        };
        if !used.insert((e as u32, r as u32)) {
            continue;
        }
        let date = if spec.dated { Some(rng.gen_range(date_lo..date_hi)) } else { None };
        pairs.push(Pair {
            enzyme: e as u32,
            reaction: r as u32,
            label: u8::from(i % 2 == 0),
            date,
        });
    }
    let pair_set = PairSet { enzyme_ids, reaction_ids, pairs };
    let corpus = Corpus::resolve(enzymes, reactions, pair_set).expect("synthetic ids resolve");
    SynthCorpus { corpus, family_of_enzyme, family_of_reaction, spec: spec.clone() }
}

/// Corpus where the label follows a linear rule: positive exactly when the
/// enzyme carries a positive signature AND the reaction is the O-type one.
/// A linear threshold on the two signals separates it.
pub fn linear_corpus(pairs: usize, d_plm: usize, seed: u64) -> SynthCorpus {
    assert!(pairs % 2 == 0, "pairs must be even (each enzyme sees both reactions)");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_enzymes = pairs / 2;
    let mut enzymes = Vec::with_capacity(n_enzymes);
    let mut family_of_enzyme = Vec::with_capacity(n_enzymes);
    for i in 0..n_enzymes {
        let positive = i % 2 == 0;
        let len = rng.gen_range(20..30);
        let sequence = random_sequence(&mut rng, len);
        let residues = sequence.len();
        let mut emb = Mat::zeros(residues, d_plm);
        for r in 0..residues {
            for j in 0..d_plm {
                let mut v = rng.gen_range(-0.05..0.05);
                if j == 0 {
                    v += if positive { 1.5 } else { -1.5 };
                }
                emb.set(r, j, v);
            }
        }
        let mut rec = EnzymeRecord::new(format!("e{i:04}"), sequence);
        rec.embedding = Some(emb);
        enzymes.push(rec);
        family_of_enzyme.push(usize::from(positive));
    }
    let reactions = vec![
        dataio::parse_reaction("r_pos".into(), "CCCO", "OC(=O)C", None).expect("smiles"),
        dataio::parse_reaction("r_neg".into(), "CCCN", "NCC#N", None).expect("smiles"),
    ];
    let enzyme_ids: Vec<String> = enzymes.iter().map(|e| e.id.clone()).collect();
    let reaction_ids: Vec<String> = reactions.iter().map(|r| r.id.clone()).collect();
    let mut pair_list = Vec::with_capacity(pairs);
    for (i, _) in enzymes.iter().enumerate() {
        for r in 0..2u32 {
            let label = u8::from(family_of_enzyme[i] == 1 && r == 0);
            pair_list.push(Pair { enzyme: i as u32, reaction: r, label, date: None });
        }
    }
    let corpus = Corpus::resolve(
        enzymes,
        reactions,
        PairSet { enzyme_ids, reaction_ids, pairs: pair_list },
    )
    .expect("ids resolve");
    SynthCorpus {
        corpus,
        family_of_enzyme,
        family_of_reaction: vec![1, 0],
        spec: SynthSpec { pairs, d_plm, seed, ..Default::default() },
    }
}

/// Model inputs for every enzyme/reaction in the corpus plus train/valid
/// sample lists; the model config is sized for desk-scale runs.
pub fn to_train_data(synth: &SynthCorpus, valid_fraction: f64) -> (TrainData, ModelConfig) {
    let corpus = &synth.corpus;
    let reactions: Vec<ReactionInput> = corpus
        .reactions
        .iter()
        .map(|r| ReactionInput::Graphs {
            substrates: r.substrates.clone(),
            products: r.products.clone(),
        })
        .collect();
    let enzymes: Vec<EnzymeInput> = corpus
        .enzymes
        .iter()
        .map(|e| EnzymeInput::Pooled(e.embedding.as_ref().expect("embedding").mean_rows().data))
        .collect();
    let mut samples: Vec<TrainSample> = corpus
        .pairs
        .pairs
        .iter()
        .map(|p| TrainSample {
            reaction: corpus.reaction_of_intern[p.reaction as usize],
            enzyme: corpus.enzyme_of_intern[p.enzyme as usize],
            label: p.label,
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(synth.spec.seed.wrapping_add(99));
    let n_valid = (samples.len() as f64 * valid_fraction).floor() as usize;
    let mut valid = Vec::with_capacity(n_valid);
    for _ in 0..n_valid {
        let i = rng.gen_range(0..samples.len());
        valid.push(samples.swap_remove(i));
    }
    let config = ModelConfig {
        d_r: 32,
        d_plm: synth.spec.d_plm,
        atom_feature_width: ElementVocab::v1().feature_width(),
        gnn_layers: 1,
        psi_layers: 1,
        knn: 4,
        reaction_features: ReactionFeatures::Graph,
        enzyme_mode: EnzymeMode::Pooled,
        ..ModelConfig::default()
    };
    (TrainData { reactions, enzymes, train: samples, valid }, config)
}

/// Write the corpus as the on-disk artifacts the CLI consumes: pair table,
/// FASTA, reaction table, pooled embeddings tensor with an id sidecar, and a
/// per-enzyme residue directory (embedding + coords tensors).
pub fn write_corpus_files(synth: &SynthCorpus, dir: &Path) -> std::io::Result<()> {
    use std::io::Write;
    let corpus = &synth.corpus;
    std::fs::create_dir_all(dir)?;

    let mut pairs = std::fs::File::create(dir.join("pairs.tsv"))?;
    corpus.pairs.write_tsv(&mut pairs)?;

    let mut fasta = std::fs::File::create(dir.join("enzymes.fasta"))?;
    for e in &corpus.enzymes {
        writeln!(fasta, ">{}", e.id)?;
        writeln!(fasta, "{}", e.sequence)?;
    }

    let mut reactions = std::fs::File::create(dir.join("reactions.tsv"))?;
    writeln!(reactions, "reaction_id\tsmiles")?;
    for r in &corpus.reactions {
        writeln!(
            reactions,
            "{}\t{}>>{}",
            r.id,
            r.substrate_smiles.join("."),
            r.product_smiles.join(".")
        )?;
    }

    let d = synth.spec.d_plm;
    let mut pooled = Mat::zeros(corpus.enzymes.len(), d);
    for (i, e) in corpus.enzymes.iter().enumerate() {
        let mean = e.embedding.as_ref().expect("embedding").mean_rows();
        pooled.row_mut(i).copy_from_slice(&mean.data);
    }
    dataio::write_tensor(&TensorFile::from_mat(&pooled), &dir.join("embeddings.rztf"))
        .map_err(io_from_data)?;
    let ids: Vec<&str> = corpus.enzymes.iter().map(|e| e.id.as_str()).collect();
    std::fs::write(
        dir.join("embedding_ids.json"),
        serde_json::to_vec_pretty(&ids).expect("ids json"),
    )?;

    let residue_dir = dir.join("residues");
    std::fs::create_dir_all(&residue_dir)?;
    for e in &corpus.enzymes {
        let emb = e.embedding.as_ref().expect("embedding");
        dataio::write_tensor(
            &TensorFile::from_mat(emb),
            &residue_dir.join(format!("{}.embedding.rztf", e.id)),
        )
        .map_err(io_from_data)?;
        let coords = e.coords.as_ref().expect("coords");
        let mut m = Mat::zeros(coords.len(), 3);
        for (i, c) in coords.iter().enumerate() {
            m.row_mut(i).copy_from_slice(c);
        }
        dataio::write_tensor(
            &TensorFile::from_mat(&m),
            &residue_dir.join(format!("{}.coords.rztf", e.id)),
        )
        .map_err(io_from_data)?;
    }
    Ok(())
}

fn io_from_data(e: dataio::DataError) -> std::io::Error {
    std::io::Error::other(e.to_string())
}
