//! Reaction and enzyme encoders: graph message passing, substrate/product
//! cross-attention fusion, PCA frame construction, and frame-averaged
//! point-cloud encoding.
//!
//! All encoders are pure given parameters; the `*_on_tape` variants record
//! onto a gradient tape, the plain wrappers run a throwaway tape and return
//! values.

use crate::chemgraph::{featurize_atoms, BondOrder, ElementVocab, MolGraph};
use crate::dataio::EnzymeRecord;
use crate::mat::Mat;
use crate::model::params::BoundParams;
use crate::model::tape::{Tape, TensorId};
use crate::model::{ModelConfig, ModelError};

/// Per-node feature matrix (rows = nodes).
pub type NodeStates = Mat;

/// View over everything the encoders need from a model.
pub struct EncodeParams<'a> {
    pub set: &'a crate::model::ParamSet,
    pub config: &'a ModelConfig,
    pub vocab: &'a ElementVocab,
}

impl crate::model::ModelParams {
    pub fn encode_view<'a>(&'a self, vocab: &'a ElementVocab) -> EncodeParams<'a> {
        EncodeParams { set: &self.set, config: &self.config, vocab }
    }
}

// ---------------------------------------------------------------------------
// PCA frames
// ---------------------------------------------------------------------------

/// Centroid plus three orthonormal principal axes; the eight frames are all
/// sign combinations of the axes.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub centroid: [f64; 3],
    /// Rows are u1, u2, u3, sorted by descending eigenvalue.
    pub axes: [[f64; 3]; 3],
    pub eigenvalues: [f64; 3],
}

pub const FRAME_SIGNS: [[f64; 3]; 8] = [
    [1.0, 1.0, 1.0],
    [1.0, 1.0, -1.0],
    [1.0, -1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, 1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [-1.0, -1.0, -1.0],
];

impl FrameSet {
    /// Project centered coordinates onto one signed frame: columns of the
    /// projection matrix are sign[k] * u_k.
    pub fn project(&self, centered: &[[f64; 3]], signs: &[f64; 3]) -> Mat {
        let mut out = Mat::zeros(centered.len(), 3);
        for (i, p) in centered.iter().enumerate() {
            for k in 0..3 {
                let u = &self.axes[k];
                out.set(i, k, signs[k] * (p[0] * u[0] + p[1] * u[1] + p[2] * u[2]));
            }
        }
        out
    }
}

/// Jacobi eigendecomposition of a symmetric 3x3 matrix. Returns
/// (eigenvalues, eigenvectors as rows), unsorted.
fn jacobi3(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..64 {
        // largest off-diagonal element
        let (mut p, mut q, mut max) = (0, 1, a[0][1].abs());
        for (i, j) in [(0, 2), (1, 2)] {
            if a[i][j].abs() > max {
                p = i;
                q = j;
                max = a[i][j].abs();
            }
        }
        if max < 1e-15 {
            break;
        }
        let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
        let c = 1.0 / (t * t + 1.0).sqrt();
        let s = t * c;
        let mut rot = [[0.0; 3]; 3];
        for (i, row) in rot.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        rot[p][p] = c;
        rot[q][q] = c;
        rot[p][q] = s;
        rot[q][p] = -s;
        // a = rot^T a rot ; v = v rot
        let mut an = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        acc += rot[k][i] * a[k][l] * rot[l][j];
                    }
                }
                an[i][j] = acc;
            }
        }
        a = an;
        let mut vn = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += v[i][k] * rot[k][j];
                }
                vn[i][j] = acc;
            }
        }
        v = vn;
    }
    let vals = [a[0][0], a[1][1], a[2][2]];
    // columns of v are eigenvectors; return them as rows
    let vecs = [
        [v[0][0], v[1][0], v[2][0]],
        [v[0][1], v[1][1], v[2][1]],
        [v[0][2], v[1][2], v[2][2]],
    ];
    (vals, vecs)
}

/// Centroid and principal axes of a residue point cloud. Axes are sorted by
/// descending eigenvalue (ties prefer the axis dominated by the smaller
/// canonical index) and sign-fixed to make the dominant component positive.
pub fn pca_frames(coords: &[[f64; 3]]) -> FrameSet {
    assert!(!coords.is_empty(), "pca_frames needs at least one point");
    let n = coords.len() as f64;
    let mut centroid = [0.0; 3];
    for p in coords {
        for k in 0..3 {
            centroid[k] += p[k];
        }
    }
    for c in centroid.iter_mut() {
        *c /= n;
    }
    let mut cov = [[0.0; 3]; 3];
    for p in coords {
        let d = [p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    let (vals, vecs) = jacobi3(cov);
    let dominant = |v: &[f64; 3]| -> usize {
        let mut best = 0;
        for k in 1..3 {
            if v[k].abs() > v[best].abs() + 1e-12 {
                best = k;
            }
        }
        best
    };
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| {
        vals[j]
            .partial_cmp(&vals[i])
            .unwrap()
            .then_with(|| dominant(&vecs[i]).cmp(&dominant(&vecs[j])))
    });
    let mut axes = [[0.0; 3]; 3];
    let mut eigenvalues = [0.0; 3];
    for (slot, &src) in order.iter().enumerate() {
        let mut v = vecs[src];
        let d = dominant(&v);
        if v[d] < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
        axes[slot] = v;
        eigenvalues[slot] = vals[src];
    }
    FrameSet { centroid, axes, eigenvalues }
}

// ---------------------------------------------------------------------------
// Graph message passing and cross-attention
// ---------------------------------------------------------------------------

/// Block-diagonal per-bond-type adjacency over a list of components. Message
/// passing on the stacked node set is identical to per-component passing
/// because no cross-component edges exist.
fn bond_adjacency(graphs: &[&MolGraph]) -> (usize, [Option<Mat>; BondOrder::COUNT]) {
    let n: usize = graphs.iter().map(|g| g.atom_count()).sum();
    let mut mats: [Option<Mat>; BondOrder::COUNT] = [None, None, None, None];
    let mut offset = 0;
    for g in graphs {
        for b in &g.bonds {
            let t = b.order.index();
            let m = mats[t].get_or_insert_with(|| Mat::zeros(n, n));
            m.set(offset + b.a, offset + b.b, 1.0);
            m.set(offset + b.b, offset + b.a, 1.0);
        }
        offset += g.atom_count();
    }
    (n, mats)
}

fn message_pass_layers(
    tape: &mut Tape,
    mut x: TensorId,
    adjacency: &[Option<TensorId>; BondOrder::COUNT],
    bound: &BoundParams,
    layers: usize,
    ln_eps: f64,
) -> TensorId {
    for l in 0..layers {
        let mut pre = tape.matmul(x, bound.id(&format!("tower.l{l}.self")));
        for (t, adj) in adjacency.iter().enumerate() {
            if let Some(a) = adj {
                let gathered = tape.matmul(*a, x);
                let msg = tape.matmul(gathered, bound.id(&format!("tower.l{l}.bond{t}")));
                pre = tape.add(pre, msg);
            }
        }
        let pre = tape.add_row(pre, bound.id(&format!("tower.l{l}.bias")));
        let act = tape.silu(pre);
        x = tape.layer_norm(
            act,
            bound.id(&format!("tower.l{l}.ln_gain")),
            bound.id(&format!("tower.l{l}.ln_offset")),
            ln_eps,
        );
    }
    x
}

/// Message passing over one molecular graph: per layer,
/// `LN(SiLU(X W_self + sum_t A_t X W_t + b))`. Zero layers is the identity.
pub fn message_pass(
    g: &MolGraph,
    x: &NodeStates,
    layers: usize,
    p: &EncodeParams,
) -> Result<NodeStates, ModelError> {
    if x.rows != g.atom_count() {
        return Err(ModelError::LengthMismatch { expected: g.atom_count(), got: x.rows });
    }
    if x.cols != p.config.d_r {
        return Err(ModelError::WidthMismatch {
            what: "message_pass node width",
            expected: p.config.d_r,
            got: x.cols,
        });
    }
    let mut tape = Tape::new();
    let bound = p.set.bind(&mut tape);
    let x_id = tape.constant(x);
    let (_, adj) = bond_adjacency(&[g]);
    let adj_ids = adjacency_constants(&mut tape, &adj);
    let out = message_pass_layers(&mut tape, x_id, &adj_ids, &bound, layers, p.config.ln_eps);
    Ok(tape.value_mat(out))
}

fn adjacency_constants(
    tape: &mut Tape,
    adj: &[Option<Mat>; BondOrder::COUNT],
) -> [Option<TensorId>; BondOrder::COUNT] {
    let mut out = [None; BondOrder::COUNT];
    for (t, m) in adj.iter().enumerate() {
        if let Some(m) = m {
            out[t] = Some(tape.constant(m));
        }
    }
    out
}

fn cross_attention_on_tape(
    tape: &mut Tape,
    vs: TensorId,
    vp: TensorId,
    bound: &BoundParams,
    config: &ModelConfig,
) -> Result<(TensorId, TensorId), ModelError> {
    if tape.shape(vs).0 == 0 || tape.shape(vp).0 == 0 {
        return Err(ModelError::EmptyNodeSet);
    }
    let scale = 1.0 / (config.d_r as f64).sqrt();
    let mut attend = |q_side: TensorId, kv_side: TensorId, side: &str| {
        let q = tape.matmul(q_side, bound.id(&format!("attn.{side}.q")));
        let k = tape.matmul(kv_side, bound.id(&format!("attn.{side}.k")));
        let v = tape.matmul(kv_side, bound.id(&format!("attn.{side}.v")));
        let logits = tape.matmul_nt(q, k);
        let scaled = tape.scale(logits, scale);
        let weights = tape.softmax_rows(scaled);
        tape.matmul(weights, v)
    };
    let out_s = attend(vs, vp, "s");
    let out_p = attend(vp, vs, "p");
    Ok((out_s, out_p))
}

/// Substrate nodes attend over product nodes and vice versa, with 1/sqrt(d_r)
/// scaling. Returns the attended node states for both sides.
pub fn cross_attention(
    vs: &NodeStates,
    vp: &NodeStates,
    p: &EncodeParams,
) -> Result<(NodeStates, NodeStates), ModelError> {
    if vs.cols != p.config.d_r || vp.cols != p.config.d_r {
        return Err(ModelError::WidthMismatch {
            what: "cross_attention node width",
            expected: p.config.d_r,
            got: if vs.cols != p.config.d_r { vs.cols } else { vp.cols },
        });
    }
    let mut tape = Tape::new();
    let bound = p.set.bind(&mut tape);
    let vs_id = tape.constant(vs);
    let vp_id = tape.constant(vp);
    let (s, pr) = cross_attention_on_tape(&mut tape, vs_id, vp_id, &bound, p.config)?;
    Ok((tape.value_mat(s), tape.value_mat(pr)))
}

/// Full reaction tower on a tape: featurize, input-project, message-pass each
/// side, cross-attend, mean-pool everything into a single 1 x d_r row.
pub fn reaction_embed_on_tape(
    tape: &mut Tape,
    substrates: &[MolGraph],
    products: &[MolGraph],
    bound: &BoundParams,
    config: &ModelConfig,
    vocab: &ElementVocab,
) -> Result<TensorId, ModelError> {
    if substrates.is_empty() || products.is_empty() {
        return Err(ModelError::EmptyNodeSet);
    }
    let mut side = |graphs: &[MolGraph]| -> TensorId {
        let refs: Vec<&MolGraph> = graphs.iter().collect();
        let feats: Vec<Mat> = refs.iter().map(|g| featurize_atoms(g, vocab)).collect();
        let feat_refs: Vec<&Mat> = feats.iter().collect();
        let stacked = Mat::vstack(&feat_refs);
        let f = tape.constant(&stacked);
        let x = tape.matmul(f, bound.id("tower.input"));
        let (_, adj) = bond_adjacency(&refs);
        let adj_ids = adjacency_constants(tape, &adj);
        message_pass_layers(tape, x, &adj_ids, bound, config.gnn_layers, config.ln_eps)
    };
    let vs = side(substrates);
    let vp = side(products);
    let (attended_s, attended_p) = cross_attention_on_tape(tape, vs, vp, bound, config)?;
    let all = tape.concat_rows(&[attended_s, attended_p]);
    Ok(tape.mean_rows(all))
}

/// Reaction embedding as a plain vector of width d_r.
pub fn reaction_embed(
    substrates: &[MolGraph],
    products: &[MolGraph],
    p: &EncodeParams,
) -> Result<Vec<f64>, ModelError> {
    let mut tape = Tape::new();
    let bound = p.set.bind(&mut tape);
    let id = reaction_embed_on_tape(&mut tape, substrates, products, &bound, p.config, p.vocab)?;
    Ok(tape.value(id).to_vec())
}

// ---------------------------------------------------------------------------
// Frame-averaged point-cloud encoder
// ---------------------------------------------------------------------------

/// k-NN adjacency on centered coordinates (Euclidean, ties by index) and the
/// per-node sum of edge vectors sum_j (p_i - p_j) for one projection.
fn knn_neighbors(centered: &[[f64; 3]], k: usize) -> Vec<Vec<usize>> {
    let n = centered.len();
    let k = k.min(n.saturating_sub(1));
    (0..n)
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let dx = centered[i][0] - centered[j][0];
                    let dy = centered[i][1] - centered[j][1];
                    let dz = centered[i][2] - centered[j][2];
                    (dx * dx + dy * dy + dz * dz, j)
                })
                .collect();
            d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(&b.1)));
            d.truncate(k);
            d.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

fn geo_features(projected: &Mat, neighbors: &[Vec<usize>]) -> Mat {
    let mut out = Mat::zeros(projected.rows, 3);
    for (i, nbrs) in neighbors.iter().enumerate() {
        for k in 0..3 {
            let mut acc = 0.0;
            for &j in nbrs {
                acc += projected.get(i, k) - projected.get(j, k);
            }
            out.set(i, k, acc);
        }
    }
    out
}

fn psi_layers_on_tape(
    tape: &mut Tape,
    mut x: TensorId,
    adjacency: TensorId,
    geo: TensorId,
    bound: &BoundParams,
    config: &ModelConfig,
) -> TensorId {
    for l in 0..config.psi_layers {
        let h_self = tape.matmul(x, bound.id(&format!("psi.l{l}.self")));
        let gathered = tape.matmul(adjacency, x);
        let h_nbr = tape.matmul(gathered, bound.id(&format!("psi.l{l}.nbr")));
        let h_geo = tape.matmul(geo, bound.id(&format!("psi.l{l}.geo")));
        let pre = tape.add(h_self, h_nbr);
        let pre = tape.add(pre, h_geo);
        let pre = tape.add_row(pre, bound.id(&format!("psi.l{l}.bias")));
        let act = tape.silu(pre);
        x = tape.layer_norm(
            act,
            bound.id(&format!("psi.l{l}.ln_gain")),
            bound.id(&format!("psi.l{l}.ln_offset")),
            config.ln_eps,
        );
    }
    x
}

/// Frame averaging on a tape: run the point-cloud network over all eight
/// PCA frames of the coordinates and average the results.
pub fn frame_average_on_tape(
    tape: &mut Tape,
    v: TensorId,
    coords: &[[f64; 3]],
    bound: &BoundParams,
    config: &ModelConfig,
) -> Result<TensorId, ModelError> {
    let n = tape.shape(v).0;
    if coords.len() != n {
        return Err(ModelError::LengthMismatch { expected: n, got: coords.len() });
    }
    let frames = pca_frames(coords);
    let centered: Vec<[f64; 3]> = coords
        .iter()
        .map(|p| {
            [p[0] - frames.centroid[0], p[1] - frames.centroid[1], p[2] - frames.centroid[2]]
        })
        .collect();
    let neighbors = knn_neighbors(&centered, config.knn);
    let mut adjacency = Mat::zeros(n, n);
    for (i, nbrs) in neighbors.iter().enumerate() {
        for &j in nbrs {
            adjacency.set(i, j, 1.0);
        }
    }
    let adj_id = tape.constant(&adjacency);
    let mut acc: Option<TensorId> = None;
    for signs in &FRAME_SIGNS {
        let projected = frames.project(&centered, signs);
        let geo = geo_features(&projected, &neighbors);
        let geo_id = tape.constant(&geo);
        let out = psi_layers_on_tape(tape, v, adj_id, geo_id, bound, config);
        acc = Some(match acc {
            None => out,
            Some(a) => tape.add(a, out),
        });
    }
    Ok(tape.scale(acc.expect("eight frames"), 1.0 / FRAME_SIGNS.len() as f64))
}

/// Frame-averaged node states as a plain matrix.
pub fn frame_average(
    v: &NodeStates,
    coords: &[[f64; 3]],
    p: &EncodeParams,
) -> Result<NodeStates, ModelError> {
    let mut tape = Tape::new();
    let bound = p.set.bind(&mut tape);
    let v_id = tape.constant(v);
    let out = frame_average_on_tape(&mut tape, v_id, coords, &bound, p.config)?;
    Ok(tape.value_mat(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnzymeEmbedMode {
    Pooled,
    FrameAveraged,
}

/// Pooled enzyme embedding: mean over residue rows, optionally refined by the
/// frame-averaged network first. Output width is d_plm.
pub fn enzyme_embed(
    e: &EnzymeRecord,
    mode: EnzymeEmbedMode,
    p: &EncodeParams,
) -> Result<Vec<f64>, ModelError> {
    let emb = e.embedding.as_ref().ok_or(ModelError::MissingEmbedding)?;
    match mode {
        EnzymeEmbedMode::Pooled => Ok(emb.mean_rows().data),
        EnzymeEmbedMode::FrameAveraged => {
            let coords = e.coords.as_ref().ok_or(ModelError::MissingCoords)?;
            let refined = frame_average(emb, coords, p)?;
            Ok(refined.mean_rows().data)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemgraph::parse_smiles;
    use crate::model::{ModelParams, ReactionFeatures};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            d_r: 8,
            d_plm: 6,
            atom_feature_width: ElementVocab::v1().feature_width(),
            gnn_layers: 2,
            psi_layers: 2,
            knn: 4,
            reaction_features: ReactionFeatures::Graph,
            enzyme_mode: crate::model::EnzymeMode::FrameAveraged,
            ..ModelConfig::default()
        }
    }

    fn setup() -> (ModelParams, ElementVocab) {
        (ModelParams::init(tiny_config(), 17), ElementVocab::v1())
    }

    fn random_rotation(rng: &mut StdRng) -> [[f64; 3]; 3] {
        // uniform quaternion -> rotation matrix
        let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
        let q = [
            (1.0 - u1).sqrt() * (2.0 * std::f64::consts::PI * u2).sin(),
            (1.0 - u1).sqrt() * (2.0 * std::f64::consts::PI * u2).cos(),
            u1.sqrt() * (2.0 * std::f64::consts::PI * u3).sin(),
            u1.sqrt() * (2.0 * std::f64::consts::PI * u3).cos(),
        ];
        let (x, y, z, w) = (q[0], q[1], q[2], q[3]);
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
            [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
            [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    fn apply_rigid(coords: &[[f64; 3]], rot: &[[f64; 3]; 3], t: &[f64; 3]) -> Vec<[f64; 3]> {
        coords
            .iter()
            .map(|p| {
                let mut out = [0.0; 3];
                for (i, o) in out.iter_mut().enumerate() {
                    *o = rot[i][0] * p[0] + rot[i][1] * p[1] + rot[i][2] * p[2] + t[i];
                }
                out
            })
            .collect()
    }

    #[test]
    fn message_pass_zero_layers_is_identity() {
        let (params, vocab) = setup();
        let view = params.encode_view(&vocab);
        let g = parse_smiles("CCO").unwrap();
        let x = Mat::from_vec(3, 8, (0..24).map(|i| i as f64 * 0.1).collect());
        let out = message_pass(&g, &x, 0, &view).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn message_pass_isolated_atom_is_self_affine() {
        let (params, vocab) = setup();
        let view = params.encode_view(&vocab);
        let g = parse_smiles("C").unwrap();
        let x = Mat::from_vec(1, 8, (0..8).map(|i| (i as f64 * 0.3).sin()).collect());
        let got = message_pass(&g, &x, 1, &view).unwrap();
        // by hand: LN(SiLU(x W_self + b)) with no neighbor terms
        let w = params.set.get("tower.l0.self").unwrap();
        let b = params.set.get("tower.l0.bias").unwrap();
        let gain = params.set.get("tower.l0.ln_gain").unwrap();
        let off = params.set.get("tower.l0.ln_offset").unwrap();
        let mut pre = vec![0.0; 8];
        for (j, p) in pre.iter_mut().enumerate() {
            for i in 0..8 {
                *p += x.data[i] * w.data[i * 8 + j];
            }
            *p += b.data[j];
        }
        let act: Vec<f64> = pre.iter().map(|&t| t / (1.0 + (-t).exp())).collect();
        let mean = act.iter().sum::<f64>() / 8.0;
        let var = act.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
        let inv = 1.0 / (var + 1e-5).sqrt();
        for j in 0..8 {
            let want = (act[j] - mean) * inv * gain.data[j] + off.data[j];
            assert!((got.data[j] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn message_pass_permutation_equivariant() {
        let (params, vocab) = setup();
        let view = params.encode_view(&vocab);
        let g = parse_smiles("C(=O)NCC1CCC1O").unwrap();
        let n = g.atom_count();
        let mut rng = StdRng::seed_from_u64(2);
        let x = Mat::from_vec(n, 8, (0..n * 8).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let out = message_pass(&g, &x, 2, &view).unwrap();

        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let mut inverse = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let permuted_graph = MolGraph {
            atoms: perm.iter().map(|&old| g.atoms[old].clone()).collect(),
            bonds: g
                .bonds
                .iter()
                .map(|b| crate::chemgraph::Bond { a: inverse[b.a], b: inverse[b.b], order: b.order })
                .collect(),
            coords: None,
        };
        let mut permuted_x = Mat::zeros(n, 8);
        for new in 0..n {
            permuted_x.row_mut(new).copy_from_slice(x.row(perm[new]));
        }
        let out_p = message_pass(&permuted_graph, &permuted_x, 2, &view).unwrap();
        for new in 0..n {
            for j in 0..8 {
                assert!(
                    (out_p.get(new, j) - out.get(perm[new], j)).abs() < 1e-6,
                    "row {new} col {j}"
                );
            }
        }
    }

    #[test]
    fn cross_attention_singleton_weight_is_one() {
        let (params, vocab) = setup();
        let view = params.encode_view(&vocab);
        let vs = Mat::from_vec(1, 8, (0..8).map(|i| (i as f64).cos()).collect());
        let vp = Mat::from_vec(1, 8, (0..8).map(|i| (i as f64).sin()).collect());
        let (s, p) = cross_attention(&vs, &vp, &view).unwrap();
        // with a single key, attention output is exactly the value projection
        let wv_s = params.set.get("attn.s.v").unwrap();
        for j in 0..8 {
            let want: f64 = (0..8).map(|i| vp.data[i] * wv_s.data[i * 8 + j]).sum();
            assert!((s.get(0, j) - want).abs() < 1e-12);
        }
        let wv_p = params.set.get("attn.p.v").unwrap();
        for j in 0..8 {
            let want: f64 = (0..8).map(|i| vs.data[i] * wv_p.data[i * 8 + j]).sum();
            assert!((p.get(0, j) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_attention_duplicate_keys_average() {
        let (params, vocab) = setup();
        let view = params.encode_view(&vocab);
        let vs = Mat::from_vec(1, 8, (0..8).map(|i| 0.1 * i as f64).collect());
        let row: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut two = row.clone();
        two.extend_from_slice(&row);
        let vp = Mat::from_vec(2, 8, two);
        let (s, _) = cross_attention(&vs, &vp, &view).unwrap();
        let wv_s = params.set.get("attn.s.v").unwrap();
        for j in 0..8 {
            let want: f64 = (0..8).map(|i| row[i] * wv_s.data[i * 8 + j]).sum();
            assert!((s.get(0, j) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_attention_empty_side_errors() {
        let (params, vocab) = setup();
        let view = params.encode_view(&vocab);
        let vs = Mat::zeros(0, 8);
        let vp = Mat::zeros(2, 8);
        assert!(matches!(
            cross_attention(&vs, &vp, &view),
            Err(ModelError::EmptyNodeSet)
        ));
    }

    #[test]
    fn reaction_embed_symmetric_sides_agree() {
        // identical sides and shared direction params: both attended means equal
        let (mut params, vocab) = setup();
        for proj in ["q", "k", "v"] {
            let s = params.set.get(&format!("attn.s.{proj}")).unwrap().data.clone();
            for g in params.set.groups_mut() {
                if g.name == format!("attn.p.{proj}") {
                    g.data = s.clone();
                }
            }
        }
        let view = params.encode_view(&vocab);
        let m = parse_smiles("CC(=O)O").unwrap();
        let mut tape = Tape::new();
        let bound = params.set.bind(&mut tape);
        let subs = vec![m.clone()];
        let prods = vec![m.clone()];
        let refs: Vec<&MolGraph> = subs.iter().collect();
        let feats = featurize_atoms(refs[0], &vocab);
        let _ = feats;
        let r = reaction_embed_on_tape(&mut tape, &subs, &prods, &bound, view.config, &vocab)
            .unwrap();
        // both halves of the pooled node set are equal, so the overall mean
        // equals either side's mean; just check finiteness and width here
        // and equality via the wrapper on separate towers below.
        assert_eq!(tape.shape(r), (1, 8));
        let (s, p) = {
            let f = featurize_atoms(&m, &vocab);
            let fid = tape.constant(&f);
            let x = tape.matmul(fid, bound.id("tower.input"));
            let (_, adj) = bond_adjacency(&[&m]);
            let adj_ids = adjacency_constants(&mut tape, &adj);
            let v = message_pass_layers(&mut tape, x, &adj_ids, &bound, 2, view.config.ln_eps);
            cross_attention_on_tape(&mut tape, v, v, &bound, view.config).unwrap()
        };
        let ms = tape.mean_rows(s);
        let mp = tape.mean_rows(p);
        for (a, b) in tape.value(ms).iter().zip(tape.value(mp)) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn reaction_embed_component_order_invariant() {
        let (params, vocab) = setup();
        let view = params.encode_view(&vocab);
        let a = parse_smiles("CCO").unwrap();
        let b = parse_smiles("C=O").unwrap();
        let c = parse_smiles("N").unwrap();
        let r1 = reaction_embed(&[a.clone(), b.clone()], &[c.clone()], &view).unwrap();
        let r2 = reaction_embed(&[b, a], &[c], &view).unwrap();
        for (x, y) in r1.iter().zip(&r2) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn reaction_embed_default_width_is_256() {
        let config = ModelConfig { gnn_layers: 1, ..ModelConfig::default() };
        let params = ModelParams::init(config, 3);
        let vocab = ElementVocab::v1();
        let view = params.encode_view(&vocab);
        let m = parse_smiles("CCO").unwrap();
        let r = reaction_embed(&[m.clone()], &[m], &view).unwrap();
        assert_eq!(r.len(), 256);
    }

    #[test]
    fn pca_points_on_x_axis() {
        let coords = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [5.0, 0.0, 0.0]];
        let f = pca_frames(&coords);
        assert!((f.axes[0][0].abs() - 1.0).abs() < 1e-12);
        assert!(f.axes[0][1].abs() < 1e-12 && f.axes[0][2].abs() < 1e-12);
        // remaining axes completed from the canonical basis
        assert!((f.axes[1][1].abs() - 1.0).abs() < 1e-12);
        assert!((f.axes[2][2].abs() - 1.0).abs() < 1e-12);
        assert!(f.eigenvalues[1].abs() < 1e-12 && f.eigenvalues[2].abs() < 1e-12);
    }

    #[test]
    fn pca_single_point() {
        let f = pca_frames(&[[3.0, -1.0, 2.0]]);
        assert_eq!(f.centroid, [3.0, -1.0, 2.0]);
        assert_eq!(f.axes, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn pca_rotation_property() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..50 {
            let coords: Vec<[f64; 3]> = (0..20)
                .map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0)])
                .collect();
            let f = pca_frames(&coords);
            let rot = random_rotation(&mut rng);
            let t = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let f2 = pca_frames(&apply_rigid(&coords, &rot, &t));
            for k in 0..3 {
                assert!(
                    (f.eigenvalues[k] - f2.eigenvalues[k]).abs()
                        < 1e-8 * f.eigenvalues[0].max(1.0),
                    "eigenvalue {k}"
                );
                // axes match up to sign after rotation
                let rotated: Vec<f64> = (0..3)
                    .map(|i| {
                        rot[i][0] * f.axes[k][0] + rot[i][1] * f.axes[k][1] + rot[i][2] * f.axes[k][2]
                    })
                    .collect();
                let dot: f64 = rotated.iter().zip(&f2.axes[k]).map(|(a, b)| a * b).sum();
                assert!((dot.abs() - 1.0).abs() < 1e-6, "axis {k} dot {dot}");
            }
        }
    }

    #[test]
    fn frame_average_se3_invariant() {
        let (params, vocab) = setup();
        let view = params.encode_view(&vocab);
        let mut rng = StdRng::seed_from_u64(6);
        let n = 12;
        let coords: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)])
            .collect();
        let v = Mat::from_vec(n, 6, (0..n * 6).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let base = frame_average(&v, &coords, &view).unwrap();
        for _ in 0..20 {
            let rot = random_rotation(&mut rng);
            let t = [rng.gen_range(-9.0..9.0), rng.gen_range(-9.0..9.0), rng.gen_range(-9.0..9.0)];
            let moved = apply_rigid(&coords, &rot, &t);
            let out = frame_average(&v, &moved, &view).unwrap();
            let mut diff = 0.0;
            let mut norm = 0.0;
            for (a, b) in base.data.iter().zip(&out.data) {
                diff += (a - b) * (a - b);
                norm += a * a;
            }
            assert!(
                diff.sqrt() / norm.sqrt() < 1e-5,
                "relative change {}",
                diff.sqrt() / norm.sqrt()
            );
        }
    }

    #[test]
    fn frame_average_reduces_to_psi_when_coords_ignored() {
        let (mut params, vocab) = setup();
        for g in params.set.groups_mut() {
            if g.name.contains(".geo") {
                g.data.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let view = params.encode_view(&vocab);
        let mut rng = StdRng::seed_from_u64(8);
        let n = 7;
        let coords: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let v = Mat::from_vec(n, 6, (0..n * 6).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let averaged = frame_average(&v, &coords, &view).unwrap();

        // single psi evaluation on one frame
        let mut tape = Tape::new();
        let bound = params.set.bind(&mut tape);
        let frames = pca_frames(&coords);
        let centered: Vec<[f64; 3]> = coords
            .iter()
            .map(|p| [p[0] - frames.centroid[0], p[1] - frames.centroid[1], p[2] - frames.centroid[2]])
            .collect();
        let neighbors = knn_neighbors(&centered, view.config.knn);
        let mut adjacency = Mat::zeros(n, n);
        for (i, nbrs) in neighbors.iter().enumerate() {
            for &j in nbrs {
                adjacency.set(i, j, 1.0);
            }
        }
        let adj = tape.constant(&adjacency);
        let proj = frames.project(&centered, &FRAME_SIGNS[0]);
        let geo = geo_features(&proj, &neighbors);
        let geo_id = tape.constant(&geo);
        let v_id = tape.constant(&v);
        let single = psi_layers_on_tape(&mut tape, v_id, adj, geo_id, &bound, view.config);
        for (a, b) in averaged.data.iter().zip(tape.value(single)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_average_single_residue() {
        let (params, vocab) = setup();
        let view = params.encode_view(&vocab);
        let v = Mat::from_vec(1, 6, vec![0.3, -0.2, 0.9, 0.1, -0.5, 0.4]);
        let out = frame_average(&v, &[[1.0, 2.0, 3.0]], &view).unwrap();
        assert_eq!(out.rows, 1);
        assert!(out.is_finite());
        // all eight frames see the same (zero) geometry, so the average
        // equals any single evaluation; invariance under translation:
        let out2 = frame_average(&v, &[[-7.0, 0.0, 11.0]], &view).unwrap();
        for (a, b) in out.data.iter().zip(&out2.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn enzyme_embed_modes() {
        let (params, vocab) = setup();
        let view = params.encode_view(&vocab);
        let mut rec = EnzymeRecord::new("e", "MK");
        assert!(matches!(
            enzyme_embed(&rec, EnzymeEmbedMode::Pooled, &view),
            Err(ModelError::MissingEmbedding)
        ));
        rec.embedding = Some(Mat::from_vec(2, 6, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]));
        let pooled = enzyme_embed(&rec, EnzymeEmbedMode::Pooled, &view).unwrap();
        assert_eq!(pooled, vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert!(matches!(
            enzyme_embed(&rec, EnzymeEmbedMode::FrameAveraged, &view),
            Err(ModelError::MissingCoords)
        ));
        rec.coords = Some(vec![[0.0, 0.0, 0.0], [3.8, 0.0, 0.0]]);
        let fa = enzyme_embed(&rec, EnzymeEmbedMode::FrameAveraged, &view).unwrap();
        assert_eq!(fa.len(), 6);
        assert!(fa.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn enzyme_embed_single_residue_is_identity_row() {
        let (params, vocab) = setup();
        let view = params.encode_view(&vocab);
        let mut rec = EnzymeRecord::new("e", "M");
        rec.embedding = Some(Mat::from_vec(1, 6, vec![9.0, 8.0, 7.0, 6.0, 5.0, 4.0]));
        let pooled = enzyme_embed(&rec, EnzymeEmbedMode::Pooled, &view).unwrap();
        assert_eq!(pooled, vec![9.0, 8.0, 7.0, 6.0, 5.0, 4.0]);
    }
}
