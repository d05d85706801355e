//! The trainable pair scorer: reverse-mode tape, encoder/decoder MLPs,
//! losses, and the training loop.

pub mod params;
pub mod score;
pub mod tape;
pub mod train;

pub use params::{BoundParams, ParamGroup, ParamSet};
pub use tape::{Tape, TensorId};

use crate::dataio::{self, DataError, TensorFile};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("width mismatch in {what}: expected {expected}, got {got}")]
    WidthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty node set on one attention side")]
    EmptyNodeSet,
    #[error("tape already consumed by backward; recompute before another pass")]
    TapeConsumed,
    #[error("backward on an empty tape")]
    EmptyTape,
    #[error("loss must be a 1x1 scalar, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("zero vector has no cosine direction")]
    ZeroVector,
    #[error("missing coordinates for frame-averaged encoding")]
    MissingCoords,
    #[error("missing residue embedding")]
    MissingEmbedding,
    #[error("contrastive loss needs at least one negative")]
    NoNegatives,
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {value}")]
    NanLoss { epoch: usize, batch: usize, value: f64 },
    #[error("unknown parameter group '{0}'")]
    UnknownParam(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// How reactions enter the model: message-passing graph tower with
/// cross-attention, or fixed hashed fingerprints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionFeatures {
    Graph,
    Fingerprint,
}

/// How enzymes enter the model: pooled residue embeddings, or embeddings
/// refined by the frame-averaged point-cloud network first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnzymeMode {
    Pooled,
    FrameAveraged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Reaction embedding width (graph tower and ReactionEnc input).
    pub d_r: usize,
    /// Residue embedding width (EnzymeEnc input).
    pub d_plm: usize,
    /// Atom feature width consumed by the graph tower input projection.
    pub atom_feature_width: usize,
    pub gnn_layers: usize,
    pub psi_layers: usize,
    pub knn: usize,
    pub ln_eps: f64,
    /// The decoder equation carries no bias on its last linear layer; this
    /// switch adds one for comparison runs.
    pub decoder_final_bias: bool,
    pub reaction_features: ReactionFeatures,
    pub enzyme_mode: EnzymeMode,
    /// Hashed-fingerprint settings, used when `reaction_features` is
    /// Fingerprint; d_r must equal 2 * fingerprint_bits in that mode.
    pub fingerprint_radius: usize,
    pub fingerprint_bits: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_r: 256,
            d_plm: 1280,
            atom_feature_width: crate::chemgraph::ElementVocab::v1().feature_width(),
            gnn_layers: 2,
            psi_layers: 2,
            knn: 16,
            ln_eps: 1e-5,
            decoder_final_bias: false,
            reaction_features: ReactionFeatures::Graph,
            enzyme_mode: EnzymeMode::Pooled,
            fingerprint_radius: 2,
            fingerprint_bits: 128,
        }
    }
}

/// Encoder MLP widths after the input layer, shared by ReactionEnc and
/// EnzymeEnc: in -> 512 -> 256 -> 256 -> 256.
pub const ENC_WIDTHS: [usize; 4] = [512, 256, 256, 256];
/// Decoder widths: 512 -> 256 -> 128 -> 64 -> 1.
pub const DEC_WIDTHS: [usize; 4] = [256, 128, 64, 1];

/// All weights of the scorer plus the encode-stage parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub set: ParamSet,
}

impl ModelParams {
    /// Deterministic Kaiming-uniform initialization, biases zero, layer-norm
    /// gain one / offset zero.
    pub fn init(config: ModelConfig, seed: u64) -> Self {
        if config.reaction_features == ReactionFeatures::Fingerprint {
            assert_eq!(
                config.d_r,
                2 * config.fingerprint_bits,
                "fingerprint mode needs d_r = 2 * fingerprint_bits"
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = ParamSet::new();
        let d_r = config.d_r;

        if config.reaction_features == ReactionFeatures::Graph {
            set.add_kaiming("tower.input", config.atom_feature_width, d_r, &mut rng);
            for l in 0..config.gnn_layers {
                set.add_kaiming(&format!("tower.l{l}.self"), d_r, d_r, &mut rng);
                for t in 0..crate::chemgraph::BondOrder::COUNT {
                    set.add_kaiming(&format!("tower.l{l}.bond{t}"), d_r, d_r, &mut rng);
                }
                set.add_zeros(&format!("tower.l{l}.bias"), 1, d_r);
                set.add_ones(&format!("tower.l{l}.ln_gain"), 1, d_r);
                set.add_zeros(&format!("tower.l{l}.ln_offset"), 1, d_r);
            }
            for side in ["s", "p"] {
                for proj in ["q", "k", "v"] {
                    set.add_kaiming(&format!("attn.{side}.{proj}"), d_r, d_r, &mut rng);
                }
            }
        }

        if config.enzyme_mode == EnzymeMode::FrameAveraged {
            let d = config.d_plm;
            for l in 0..config.psi_layers {
                set.add_kaiming(&format!("psi.l{l}.self"), d, d, &mut rng);
                set.add_kaiming(&format!("psi.l{l}.nbr"), d, d, &mut rng);
                set.add_kaiming(&format!("psi.l{l}.geo"), 3, d, &mut rng);
                set.add_zeros(&format!("psi.l{l}.bias"), 1, d);
                set.add_ones(&format!("psi.l{l}.ln_gain"), 1, d);
                set.add_zeros(&format!("psi.l{l}.ln_offset"), 1, d);
            }
        }

        let reaction_in = match config.reaction_features {
            ReactionFeatures::Graph => d_r,
            // fingerprint vectors are substrate-half + product-half
            ReactionFeatures::Fingerprint => d_r,
        };
        add_encoder_mlp(&mut set, "reaction_enc", reaction_in, &mut rng);
        add_encoder_mlp(&mut set, "enzyme_enc", config.d_plm, &mut rng);

        let mut prev = 2 * ENC_WIDTHS[3];
        for (i, &w) in DEC_WIDTHS.iter().enumerate() {
            set.add_kaiming(&format!("decoder.w{}", i + 1), prev, w, &mut rng);
            if i < DEC_WIDTHS.len() - 1 {
                set.add_zeros(&format!("decoder.b{}", i + 1), 1, w);
            }
            prev = w;
        }
        if config.decoder_final_bias {
            set.add_zeros("decoder.b4", 1, 1);
        }

        ModelParams { config, set }
    }

    /// Checkpoint bundle: one tensor file per group plus a JSON manifest.
    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        std::fs::create_dir_all(dir).map_err(|e| DataError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        let mut entries = Vec::new();
        for g in self.set.groups() {
            let file = format!("{}.rztf", g.name.replace('.', "_"));
            let t = TensorFile::new(
                vec![g.rows, g.cols],
                g.data.iter().map(|&v| v as f32).collect(),
            );
            dataio::write_tensor(&t, &dir.join(&file))?;
            entries.push(CheckpointEntry { name: g.name.clone(), rows: g.rows, cols: g.cols, file });
        }
        let manifest = CheckpointManifest { config: self.config.clone(), groups: entries };
        let f = std::fs::File::create(dir.join("manifest.json")).map_err(|e| DataError::Io {
            path: dir.join("manifest.json").display().to_string(),
            source: e,
        })?;
        serde_json::to_writer_pretty(f, &manifest).map_err(DataError::Json)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, ModelError> {
        let f = std::fs::File::open(dir.join("manifest.json")).map_err(|e| DataError::Io {
            path: dir.join("manifest.json").display().to_string(),
            source: e,
        })?;
        let manifest: CheckpointManifest =
            serde_json::from_reader(f).map_err(DataError::Json)?;
        let mut set = ParamSet::new();
        for e in &manifest.groups {
            let t = dataio::read_tensor(&dir.join(&e.file))?;
            if t.dims != vec![e.rows, e.cols] {
                return Err(ModelError::Data(DataError::BadTensor {
                    path: e.file.clone(),
                    msg: format!("dims {:?} disagree with manifest {}x{}", t.dims, e.rows, e.cols),
                }));
            }
            set.add(&e.name, e.rows, e.cols, t.payload.iter().map(|&v| v as f64).collect());
        }
        Ok(ModelParams { config: manifest.config, set })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointEntry {
    name: String,
    rows: usize,
    cols: usize,
    file: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointManifest {
    config: ModelConfig,
    groups: Vec<CheckpointEntry>,
}

fn add_encoder_mlp(set: &mut ParamSet, prefix: &str, input: usize, rng: &mut ChaCha8Rng) {
    let mut prev = input;
    for (i, &w) in ENC_WIDTHS.iter().enumerate() {
        set.add_kaiming(&format!("{prefix}.w{}", i + 1), prev, w, rng);
        set.add_zeros(&format!("{prefix}.b{}", i + 1), 1, w);
        if i < ENC_WIDTHS.len() - 1 {
            set.add_ones(&format!("{prefix}.ln{}_gain", i + 1), 1, w);
            set.add_zeros(&format!("{prefix}.ln{}_offset", i + 1), 1, w);
        }
        prev = w;
    }
}

/// Shared 4-layer encoder: three SiLU(LN(Wx + B)) blocks, then a plain
/// linear layer with bias. Input is a batch of rows.
fn encoder_mlp(
    tape: &mut Tape,
    x: TensorId,
    bound: &BoundParams,
    prefix: &str,
    ln_eps: f64,
) -> TensorId {
    let mut h = x;
    for i in 1..=3 {
        let lin = tape.matmul(h, bound.id(&format!("{prefix}.w{i}")));
        let biased = tape.add_row(lin, bound.id(&format!("{prefix}.b{i}")));
        let normed = tape.layer_norm(
            biased,
            bound.id(&format!("{prefix}.ln{i}_gain")),
            bound.id(&format!("{prefix}.ln{i}_offset")),
            ln_eps,
        );
        h = tape.silu(normed);
    }
    let lin = tape.matmul(h, bound.id(&format!("{prefix}.w4")));
    tape.add_row(lin, bound.id(&format!("{prefix}.b4")))
}

/// ReactionEnc: rows of `r` (width d_r) to rows of z_r (width 256).
pub fn reaction_enc(
    tape: &mut Tape,
    r: TensorId,
    bound: &BoundParams,
    config: &ModelConfig,
) -> Result<TensorId, ModelError> {
    let expected = bound.set().get("reaction_enc.w1")?.rows;
    let got = tape.shape(r).1;
    if got != expected {
        return Err(ModelError::WidthMismatch { what: "reaction_enc input", expected, got });
    }
    Ok(encoder_mlp(tape, r, bound, "reaction_enc", config.ln_eps))
}

/// EnzymeEnc: rows of pooled residue features (width d_plm) to z_e (256).
pub fn enzyme_enc(
    tape: &mut Tape,
    e: TensorId,
    bound: &BoundParams,
    config: &ModelConfig,
) -> Result<TensorId, ModelError> {
    let expected = bound.set().get("enzyme_enc.w1")?.rows;
    let got = tape.shape(e).1;
    if got != expected {
        return Err(ModelError::WidthMismatch { what: "enzyme_enc input", expected, got });
    }
    Ok(encoder_mlp(tape, e, bound, "enzyme_enc", config.ln_eps))
}

/// Decoder on concatenated (z_r, z_e): two SiLU blocks, one biased linear,
/// then the final projection (bias only behind `decoder_final_bias`).
pub fn decode(
    tape: &mut Tape,
    z_r: TensorId,
    z_e: TensorId,
    bound: &BoundParams,
    config: &ModelConfig,
) -> Result<TensorId, ModelError> {
    for (what, id) in [("decoder z_r input", z_r), ("decoder z_e input", z_e)] {
        let got = tape.shape(id).1;
        if got != ENC_WIDTHS[3] {
            return Err(ModelError::WidthMismatch { what, expected: ENC_WIDTHS[3], got });
        }
    }
    let h = tape.concat_cols(&[z_r, z_e]);
    let lin = tape.matmul(h, bound.id("decoder.w1"));
    let h = tape.add_row(lin, bound.id("decoder.b1"));
    let h = tape.silu(h);
    let lin = tape.matmul(h, bound.id("decoder.w2"));
    let h = tape.add_row(lin, bound.id("decoder.b2"));
    let h = tape.silu(h);
    let lin = tape.matmul(h, bound.id("decoder.w3"));
    let h = tape.add_row(lin, bound.id("decoder.b3"));
    let y = tape.matmul(h, bound.id("decoder.w4"));
    if config.decoder_final_bias {
        Ok(tape.add_row(y, bound.id("decoder.b4")))
    } else {
        Ok(y)
    }
}

/// Mean binary cross entropy over a batch of logits.
pub fn bce_loss(
    tape: &mut Tape,
    logits: TensorId,
    labels: &[f64],
) -> Result<TensorId, ModelError> {
    tape.bce_with_logits(logits, labels)
}

/// InfoNCE over cosine similarities: the positive pair against all pairs.
pub fn contrastive_loss(
    tape: &mut Tape,
    z_r: TensorId,
    z_e_pos: TensorId,
    z_e_negs: &[TensorId],
    temperature: f64,
) -> Result<TensorId, ModelError> {
    if z_e_negs.is_empty() {
        return Err(ModelError::NoNegatives);
    }
    let mut sims = Vec::with_capacity(1 + z_e_negs.len());
    sims.push(tape.cosine(z_r, z_e_pos)?);
    for &n in z_e_negs {
        sims.push(tape.cosine(z_r, n)?);
    }
    let row = tape.concat_cols(&sims);
    let scaled = tape.scale(row, 1.0 / temperature);
    let lse = tape.logsumexp_row(scaled);
    let pos = tape.pick(scaled, 0);
    let neg_pos = tape.scale(pos, -1.0);
    Ok(tape.add(lse, neg_pos))
}
