//! Batched forward passes: turn reaction/enzyme inputs into encoded
//! representations and decode pair logits, on or off a gradient tape.

use super::params::BoundParams;
use super::tape::{Tape, TensorId};
use super::{decode, enzyme_enc, reaction_enc, EnzymeMode, ModelConfig, ModelError, ModelParams};
use crate::chemgraph::{ElementVocab, MolGraph};
use crate::encode;
use crate::mat::Mat;

/// One reaction as the model consumes it.
#[derive(Debug, Clone)]
pub enum ReactionInput {
    Graphs { substrates: Vec<MolGraph>, products: Vec<MolGraph> },
    /// Fixed featurization (e.g. hashed fingerprints); width must equal d_r.
    Fixed(Vec<f64>),
}

/// One enzyme as the model consumes it.
#[derive(Debug, Clone)]
pub enum EnzymeInput {
    /// Pooled residue embedding, width d_plm.
    Pooled(Vec<f64>),
    /// Residue features plus coordinates for the frame-averaged path.
    PointCloud { features: Mat, coords: Vec<[f64; 3]> },
}

impl ReactionInput {
    pub fn from_record(rec: &crate::dataio::ReactionRecord, config: &ModelConfig) -> Self {
        match config.reaction_features {
            crate::model::ReactionFeatures::Graph => ReactionInput::Graphs {
                substrates: rec.substrates.clone(),
                products: rec.products.clone(),
            },
            crate::model::ReactionFeatures::Fingerprint => {
                let fp = crate::chemgraph::reaction_fingerprint(
                    &rec.substrates,
                    &rec.products,
                    config.fingerprint_radius,
                    config.fingerprint_bits,
                );
                ReactionInput::Fixed(fp.to_f64_vec())
            }
        }
    }
}

impl EnzymeInput {
    pub fn from_record(
        rec: &crate::dataio::EnzymeRecord,
        mode: EnzymeMode,
    ) -> Result<Self, ModelError> {
        let emb = rec.embedding.as_ref().ok_or(ModelError::MissingEmbedding)?;
        match mode {
            EnzymeMode::Pooled => Ok(EnzymeInput::Pooled(emb.mean_rows().data)),
            EnzymeMode::FrameAveraged => {
                let coords = rec.coords.as_ref().ok_or(ModelError::MissingCoords)?.clone();
                Ok(EnzymeInput::PointCloud { features: emb.clone(), coords })
            }
        }
    }
}

/// Reaction representations (rows, width d_r) on the tape.
pub fn reaction_reprs_on_tape(
    tape: &mut Tape,
    inputs: &[&ReactionInput],
    bound: &BoundParams,
    config: &ModelConfig,
    vocab: &ElementVocab,
) -> Result<TensorId, ModelError> {
    let mut rows = Vec::with_capacity(inputs.len());
    for input in inputs {
        let row = match input {
            ReactionInput::Graphs { substrates, products } => encode::reaction_embed_on_tape(
                tape, substrates, products, bound, config, vocab,
            )?,
            ReactionInput::Fixed(v) => {
                if v.len() != config.d_r {
                    return Err(ModelError::WidthMismatch {
                        what: "fixed reaction features",
                        expected: config.d_r,
                        got: v.len(),
                    });
                }
                tape.constant_row(v)
            }
        };
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    Ok(tape.concat_rows(&rows))
}

/// Enzyme representations (rows, width d_plm) on the tape.
pub fn enzyme_reprs_on_tape(
    tape: &mut Tape,
    inputs: &[&EnzymeInput],
    bound: &BoundParams,
    config: &ModelConfig,
) -> Result<TensorId, ModelError> {
    let mut rows = Vec::with_capacity(inputs.len());
    for input in inputs {
        let row = match input {
            EnzymeInput::Pooled(v) => {
                if v.len() != config.d_plm {
                    return Err(ModelError::WidthMismatch {
                        what: "pooled enzyme features",
                        expected: config.d_plm,
                        got: v.len(),
                    });
                }
                tape.constant_row(v)
            }
            EnzymeInput::PointCloud { features, coords } => {
                if config.enzyme_mode != EnzymeMode::FrameAveraged {
                    // pooled mode ignores coordinates
                    tape.constant(&features.mean_rows())
                } else {
                    let v = tape.constant(features);
                    let refined = encode::frame_average_on_tape(tape, v, coords, bound, config)?;
                    tape.mean_rows(refined)
                }
            }
        };
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    Ok(tape.concat_rows(&rows))
}

/// 0/1 selection matrix that gathers `picks[i]` rows out of `n`.
pub fn selection_matrix(picks: &[usize], n: usize) -> Mat {
    let mut m = Mat::zeros(picks.len(), n);
    for (i, &p) in picks.iter().enumerate() {
        assert!(p < n);
        m.set(i, p, 1.0);
    }
    m
}

/// Encoded 256-wide representations of distinct reactions and enzymes.
pub struct Encoded {
    pub z_r: Mat,
    pub z_e: Mat,
}

/// Encode all inputs once (values only, no gradients retained).
pub fn encode_all(
    params: &ModelParams,
    reactions: &[ReactionInput],
    enzymes: &[EnzymeInput],
    vocab: &ElementVocab,
) -> Result<Encoded, ModelError> {
    let mut tape = Tape::new();
    let bound = params.set.bind(&mut tape);
    let r_refs: Vec<&ReactionInput> = reactions.iter().collect();
    let e_refs: Vec<&EnzymeInput> = enzymes.iter().collect();
    let r = reaction_reprs_on_tape(&mut tape, &r_refs, &bound, &params.config, vocab)?;
    let z_r = reaction_enc(&mut tape, r, &bound, &params.config)?;
    let e = enzyme_reprs_on_tape(&mut tape, &e_refs, &bound, &params.config)?;
    let z_e = enzyme_enc(&mut tape, e, &bound, &params.config)?;
    Ok(Encoded { z_r: tape.value_mat(z_r), z_e: tape.value_mat(z_e) })
}

/// Decode logits for (enzyme index, reaction index) pairs against encoded
/// representations, in fixed-size chunks.
pub fn decode_pairs(
    params: &ModelParams,
    enc: &Encoded,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>, ModelError> {
    const CHUNK: usize = 4096;
    let mut out = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(CHUNK) {
        let mut tape = Tape::new();
        let bound = params.set.bind(&mut tape);
        let r_rows: Vec<usize> = chunk.iter().map(|&(_, r)| r).collect();
        let e_rows: Vec<usize> = chunk.iter().map(|&(e, _)| e).collect();
        let zr_full = tape.constant(&enc.z_r);
        let ze_full = tape.constant(&enc.z_e);
        let sel_r = tape.constant(&selection_matrix(&r_rows, enc.z_r.rows));
        let sel_e = tape.constant(&selection_matrix(&e_rows, enc.z_e.rows));
        let zr = tape.matmul(sel_r, zr_full);
        let ze = tape.matmul(sel_e, ze_full);
        let y = decode(&mut tape, zr, ze, &bound, &params.config)?;
        out.extend_from_slice(tape.value(y));
    }
    Ok(out)
}

/// Dense logit matrix, rows = enzymes, cols = reactions.
pub fn score_matrix(
    params: &ModelParams,
    reactions: &[ReactionInput],
    enzymes: &[EnzymeInput],
    vocab: &ElementVocab,
) -> Result<Mat, ModelError> {
    let enc = encode_all(params, reactions, enzymes, vocab)?;
    let pairs: Vec<(usize, usize)> = (0..enzymes.len())
        .flat_map(|e| (0..reactions.len()).map(move |r| (e, r)))
        .collect();
    let logits = decode_pairs(params, &enc, &pairs)?;
    Ok(Mat::from_vec(enzymes.len(), reactions.len(), logits))
}
