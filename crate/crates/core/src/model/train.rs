//! Adam training loop over positive pairs and mined negatives, with
//! per-epoch validation and a best-validation checkpoint.

use super::score::{
    enzyme_reprs_on_tape, reaction_reprs_on_tape, selection_matrix, EnzymeInput, ReactionInput,
};
use super::tape::{Tape, TensorId};
use super::{
    bce_loss, contrastive_loss, decode, enzyme_enc, reaction_enc, ModelConfig, ModelError,
    ModelParams,
};
use crate::chemgraph::ElementVocab;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Bce,
    /// BCE plus an InfoNCE term over in-batch enzyme negatives.
    BceContrastive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Negatives sampled per positive in each batch.
    pub neg_per_pos: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub contrastive_temperature: f64,
    pub contrastive_weight: f64,
    /// In-batch negatives used per positive by the contrastive term.
    pub contrastive_negatives: usize,
    /// Stop once train and validation accuracy both reach this level.
    pub stop_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 10,
            batch_size: 256,
            neg_per_pos: 4,
            seed: 0,
            loss: LossKind::Bce,
            contrastive_temperature: 0.5,
            contrastive_weight: 1.0,
            contrastive_negatives: 8,
            stop_accuracy: None,
        }
    }
}

/// (reaction index, enzyme index, label) into the shared input pools.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSample {
    pub reaction: usize,
    pub enzyme: usize,
    pub label: u8,
}

#[derive(Debug)]
pub struct TrainData {
    pub reactions: Vec<ReactionInput>,
    pub enzymes: Vec<EnzymeInput>,
    pub train: Vec<TrainSample>,
    pub valid: Vec<TrainSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub valid_loss: Option<f64>,
    pub valid_accuracy: Option<f64>,
}

pub struct TrainOutput {
    /// Parameters after the last epoch.
    pub params: ModelParams,
    /// Checkpoint with the best validation loss (train loss when no
    /// validation samples exist).
    pub best: ModelParams,
    pub log: Vec<EpochStats>,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    fn new(params: &ModelParams) -> Self {
        Adam {
            m: params.set.groups().iter().map(|g| vec![0.0; g.data.len()]).collect(),
            v: params.set.groups().iter().map(|g| vec![0.0; g.data.len()]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &[Vec<f64>], tc: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - tc.beta1.powi(self.t as i32);
        let bc2 = 1.0 - tc.beta2.powi(self.t as i32);
        for (gi, group) in params.set.groups_mut().iter_mut().enumerate() {
            let (m, v) = (&mut self.m[gi], &mut self.v[gi]);
            for (j, g) in grads[gi].iter().enumerate() {
                m[j] = tc.beta1 * m[j] + (1.0 - tc.beta1) * g;
                v[j] = tc.beta2 * v[j] + (1.0 - tc.beta2) * g * g;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                group.data[j] -= tc.lr * mhat / (vhat.sqrt() + tc.adam_eps);
            }
        }
    }
}

/// Record the full scorer forward for a set of samples on one tape. Distinct
/// reaction/enzyme inputs are encoded once and gathered per sample through
/// constant selection matrices. Returns the per-sample logits (n x 1) and,
/// for the contrastive term, the sample rows of z_r and z_e.
pub fn batch_forward(
    tape: &mut Tape,
    params_bound: &super::params::BoundParams,
    config: &ModelConfig,
    data: &TrainData,
    samples: &[TrainSample],
    vocab: &ElementVocab,
) -> Result<(TensorId, TensorId, TensorId), ModelError> {
    if samples.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mut r_unique: Vec<usize> = samples.iter().map(|s| s.reaction).collect();
    r_unique.sort_unstable();
    r_unique.dedup();
    let mut e_unique: Vec<usize> = samples.iter().map(|s| s.enzyme).collect();
    e_unique.sort_unstable();
    e_unique.dedup();

    let r_inputs: Vec<&ReactionInput> = r_unique.iter().map(|&i| &data.reactions[i]).collect();
    let e_inputs: Vec<&EnzymeInput> = e_unique.iter().map(|&i| &data.enzymes[i]).collect();
    let r = reaction_reprs_on_tape(tape, &r_inputs, params_bound, config, vocab)?;
    let z_r_unique = reaction_enc(tape, r, params_bound, config)?;
    let e = enzyme_reprs_on_tape(tape, &e_inputs, params_bound, config)?;
    let z_e_unique = enzyme_enc(tape, e, params_bound, config)?;

    let r_pos: Vec<usize> = samples
        .iter()
        .map(|s| r_unique.binary_search(&s.reaction).expect("present"))
        .collect();
    let e_pos: Vec<usize> = samples
        .iter()
        .map(|s| e_unique.binary_search(&s.enzyme).expect("present"))
        .collect();
    let sel_r = tape.constant(&selection_matrix(&r_pos, r_unique.len()));
    let sel_e = tape.constant(&selection_matrix(&e_pos, e_unique.len()));
    let z_r = tape.matmul(sel_r, z_r_unique);
    let z_e = tape.matmul(sel_e, z_e_unique);
    let logits = decode(tape, z_r, z_e, params_bound, config)?;
    Ok((logits, z_r, z_e))
}

fn batch_loss(
    tape: &mut Tape,
    params_bound: &super::params::BoundParams,
    config: &ModelConfig,
    data: &TrainData,
    samples: &[TrainSample],
    vocab: &ElementVocab,
    tc: &TrainConfig,
) -> Result<(TensorId, f64), ModelError> {
    let (logits, z_r, z_e) = batch_forward(tape, params_bound, config, data, samples, vocab)?;
    let labels: Vec<f64> = samples.iter().map(|s| s.label as f64).collect();
    let mut loss = bce_loss(tape, logits, &labels)?;
    if tc.loss == LossKind::BceContrastive {
        let mut terms = Vec::new();
        for (i, s) in samples.iter().enumerate() {
            if s.label != 1 {
                continue;
            }
            // in-batch negatives: other samples' enzymes
            let negs: Vec<usize> = (0..samples.len())
                .filter(|&j| j != i && samples[j].enzyme != s.enzyme)
                .take(tc.contrastive_negatives)
                .collect();
            if negs.is_empty() {
                continue;
            }
            let one_row = |tape: &mut Tape, src: TensorId, row: usize, n: usize| {
                let sel = tape.constant(&selection_matrix(&[row], n));
                tape.matmul(sel, src)
            };
            let zr_i = one_row(tape, z_r, i, samples.len());
            let ze_i = one_row(tape, z_e, i, samples.len());
            let neg_ids: Vec<TensorId> =
                negs.iter().map(|&j| one_row(tape, z_e, j, samples.len())).collect();
            terms.push(contrastive_loss(tape, zr_i, ze_i, &neg_ids, tc.contrastive_temperature)?);
        }
        if !terms.is_empty() {
            let row = tape.concat_cols(&terms);
            let summed = tape.sum_all(row);
            let scaled = tape.scale(summed, tc.contrastive_weight / terms.len() as f64);
            loss = tape.add(loss, scaled);
        }
    }
    let accuracy = {
        let lv = tape.value_mat(logits);
        let correct = samples
            .iter()
            .zip(lv.data.iter())
            .filter(|(s, &y)| (y > 0.0) == (s.label == 1))
            .count();
        correct as f64 / samples.len() as f64
    };
    Ok((loss, accuracy))
}

/// Evaluation pass: mean loss and accuracy without touching gradients.
fn eval_pass(
    params: &ModelParams,
    data: &TrainData,
    samples: &[TrainSample],
    vocab: &ElementVocab,
) -> Result<(f64, f64), ModelError> {
    let mut tape = Tape::new();
    let bound = params.set.bind(&mut tape);
    let (logits, _, _) = batch_forward(&mut tape, &bound, &params.config, data, samples, vocab)?;
    let labels: Vec<f64> = samples.iter().map(|s| s.label as f64).collect();
    let loss = bce_loss(&mut tape, logits, &labels)?;
    let lv = tape.value_mat(logits);
    let correct = samples
        .iter()
        .zip(lv.data.iter())
        .filter(|(s, &y)| (y > 0.0) == (s.label == 1))
        .count();
    Ok((tape.scalar(loss), correct as f64 / samples.len() as f64))
}

/// Deterministic Adam training. Batches hold `neg_per_pos` sampled negatives
/// per positive; aborts on a non-finite loss.
pub fn train(
    data: &TrainData,
    config: ModelConfig,
    tc: &TrainConfig,
    vocab: &ElementVocab,
) -> Result<TrainOutput, ModelError> {
    if data.train.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mut params = ModelParams::init(config.clone(), tc.seed);
    let mut adam = Adam::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed.wrapping_add(1));

    let positives: Vec<TrainSample> =
        data.train.iter().copied().filter(|s| s.label == 1).collect();
    let negatives: Vec<TrainSample> =
        data.train.iter().copied().filter(|s| s.label == 0).collect();
    // With a positive:negative ratio, batches resample negatives around the
    // positives; with neg_per_pos == 0 the labeled set is used as-is.
    let resample = tc.neg_per_pos > 0 && !negatives.is_empty();
    let pos_per_batch =
        if resample { (tc.batch_size / (1 + tc.neg_per_pos)).max(1) } else { tc.batch_size.max(1) };
    let base: &[TrainSample] = if resample { &positives } else { &data.train };

    let mut log = Vec::new();
    let mut best = params.clone();
    let mut best_key = f64::INFINITY;

    for epoch in 0..tc.epochs {
        let mut order: Vec<usize> = (0..base.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_acc = 0.0;
        let mut batches = 0usize;
        for (batch_idx, chunk) in order.chunks(pos_per_batch).enumerate() {
            let mut samples: Vec<TrainSample> = chunk.iter().map(|&i| base[i]).collect();
            if resample {
                for _ in 0..chunk.len() * tc.neg_per_pos {
                    samples.push(negatives[rng.gen_range(0..negatives.len())]);
                }
            }
            let mut tape = Tape::new();
            let bound = params.set.bind(&mut tape);
            let (loss, acc) =
                batch_loss(&mut tape, &bound, &config, data, &samples, vocab, tc)?;
            let loss_value = tape.scalar(loss);
            if !loss_value.is_finite() {
                return Err(ModelError::NanLoss { epoch, batch: batch_idx, value: loss_value });
            }
            tape.backward(loss)?;
            let grads = bound.collect_grads(&tape);
            adam.step(&mut params, &grads, tc);
            if !params.set.is_finite() {
                return Err(ModelError::NanLoss { epoch, batch: batch_idx, value: f64::NAN });
            }
            epoch_loss += loss_value;
            epoch_acc += acc;
            batches += 1;
        }
        let train_loss = epoch_loss / batches as f64;
        let train_accuracy = epoch_acc / batches as f64;
        let (valid_loss, valid_accuracy) = if data.valid.is_empty() {
            (None, None)
        } else {
            let (l, a) = eval_pass(&params, data, &data.valid, vocab)?;
            (Some(l), Some(a))
        };
        log.push(EpochStats { epoch, train_loss, train_accuracy, valid_loss, valid_accuracy });

        let key = valid_loss.unwrap_or(train_loss);
        if key < best_key {
            best_key = key;
            best = params.clone();
        }
        if let Some(target) = tc.stop_accuracy {
            let valid_ok = valid_accuracy.map_or(true, |a| a >= target);
            if train_accuracy >= target && valid_ok {
                break;
            }
        }
    }
    Ok(TrainOutput { params, best, log })
}
