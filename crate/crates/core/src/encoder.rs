//! Graph Transformer over compiled PDE graphs: node embedding, attention
//! with shortest-path biases and connectivity masking, and readout of the
//! modulation nodes as the latent code.

use crate::autodiff::{AdError, Scalar, Tape, Tensor, Var, MASK_SENTINEL};
use crate::dag::{canonical_form, GraphFeatures, PdeGraph, PHI_CAP};
use crate::model::{Bound, ModelConfig};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncodeError {
    #[error("graph has {found} modulation nodes, the model expects {expected}")]
    MissingModulationNodes { found: usize, expected: usize },
    #[error("graph feature width {found} does not match d_f = {expected}")]
    FeatureWidth { found: usize, expected: usize },
    #[error("graph has {found} patch nodes, the model expects {expected}")]
    PatchCount { found: usize, expected: usize },
    #[error(transparent)]
    Ad(#[from] AdError),
}

/// A graph in canonical node order, flattened for the encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphInput {
    pub n: usize,
    pub types: Vec<usize>,
    /// Row-major `[n, d_f]`.
    pub features: Vec<f32>,
    /// Clamped to `max_degree`.
    pub indeg: Vec<usize>,
    pub outdeg: Vec<usize>,
    /// Row-major `[n, n]`, `phi[i * n + j]` = phi(i, j).
    pub phi: Vec<u8>,
    /// Row-major `[n, n]`, true where attention is allowed.
    pub connected: Vec<bool>,
    /// Rows of `m_1 .. m_L`.
    pub modulation_rows: Vec<usize>,
}

impl GraphInput {
    /// Nodes are reordered canonically, so any relabelling of the same graph
    /// produces the same input.
    pub fn new(graph: &PdeGraph, cfg: &ModelConfig) -> Result<Self, EncodeError> {
        if graph.d_f != cfg.d_f {
            return Err(EncodeError::FeatureWidth { found: graph.d_f, expected: cfg.d_f });
        }
        let mods = graph.modulation_ids().len();
        if mods != cfg.n_mod || graph.n_mod != cfg.n_mod {
            return Err(EncodeError::MissingModulationNodes { found: mods, expected: cfg.n_mod });
        }
        if graph.n_patch != cfg.n_patch {
            return Err(EncodeError::PatchCount { found: graph.n_patch, expected: cfg.n_patch });
        }
        let order = canonical_form(graph).order;
        let mut perm = vec![0; order.len()];
        for (k, &i) in order.iter().enumerate() {
            perm[i] = k;
        }
        let g = graph.permuted(&perm);
        let f = GraphFeatures::of(&g);
        let n = g.len();
        Ok(Self {
            n,
            types: g.nodes.iter().map(|nd| nd.ty.vocab_index(cfg.n_patch)).collect(),
            features: g.nodes.iter().flat_map(|nd| nd.feature.iter().copied()).collect(),
            indeg: f.indeg.iter().map(|&d| d.min(cfg.max_degree)).collect(),
            outdeg: f.outdeg.iter().map(|&d| d.min(cfg.max_degree)).collect(),
            phi: f.phi.iter().flatten().copied().collect(),
            connected: f.mask.iter().flatten().map(|&v| v == 0.0).collect(),
            modulation_rows: g.modulation_ids(),
        })
    }
}

/// `B[i][j] = b_out[phi(i, j)] + b_in[phi(j, i)]` for one head, `-inf`
/// where `i` and `j` are disconnected. `b_out` and `b_in` hold that head's
/// 15 entries.
pub fn attention_bias(features: &GraphFeatures, b_out: &[f32], b_in: &[f32]) -> Vec<Vec<f32>> {
    assert_eq!(b_out.len(), PHI_CAP as usize + 1);
    assert_eq!(b_in.len(), PHI_CAP as usize + 1);
    let n = features.phi.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if features.mask[i][j] == 0.0 {
                        b_out[features.phi[i][j] as usize] + b_in[features.phi[j][i] as usize]
                    } else {
                        f32::NEG_INFINITY
                    }
                })
                .collect()
        })
        .collect()
}

/// Per-head bias matrices on the tape, `[n, n]` each, with the mask folded
/// in as the sentinel.
pub fn bias_matrices<T: Scalar>(
    tape: &mut Tape<T>,
    w: &mut Bound,
    input: &GraphInput,
    heads: usize,
) -> Result<Vec<Var>, AdError> {
    let n = input.n;
    let phi_len = PHI_CAP as usize + 1;
    let b_out = w.get(tape, "enc.bias_out")?;
    let b_in = w.get(tape, "enc.bias_in")?;
    let sentinel = T::from_f64_lossy(MASK_SENTINEL);
    let mask = Tensor::new(
        vec![n, n],
        input.connected.iter().map(|&c| if c { T::zero() } else { sentinel }).collect(),
    )?;
    let mask = tape.constant(mask)?;
    let mut out = Vec::with_capacity(heads);
    for h in 0..heads {
        let fwd = (0..n * n).map(|k| h * phi_len + input.phi[k] as usize).collect();
        let bwd = (0..n * n).map(|k| h * phi_len + input.phi[(k % n) * n + k / n] as usize).collect();
        let a = tape.gather(b_out, fwd, vec![n, n])?;
        let b = tape.gather(b_in, bwd, vec![n, n])?;
        let ab = tape.add(a, b)?;
        out.push(tape.add(ab, mask)?);
    }
    Ok(out)
}

/// `h0[i] = type_emb[type(i)] + FeatEnc(f_i) + indeg_emb[deg-(i)] + outdeg_emb[deg+(i)]`.
pub fn embed_nodes<T: Scalar>(
    tape: &mut Tape<T>,
    w: &mut Bound,
    input: &GraphInput,
    cfg: &ModelConfig,
) -> Result<Var, AdError> {
    let feats = Tensor::new(vec![input.n, cfg.d_f], input.features.iter().map(|&v| T::from_f32(v).unwrap()).collect())?;
    let feats = tape.constant(feats)?;
    let enc = w.mlp(tape, "enc.feat", 3, feats)?;
    let type_emb = w.get(tape, "enc.type_emb")?;
    let indeg_emb = w.get(tape, "enc.indeg_emb")?;
    let outdeg_emb = w.get(tape, "enc.outdeg_emb")?;
    let x = tape.gather_rows(type_emb, &input.types)?;
    let zi = tape.gather_rows(indeg_emb, &input.indeg)?;
    let zo = tape.gather_rows(outdeg_emb, &input.outdeg)?;
    let h = tape.add(x, enc)?;
    let h = tape.add(h, zi)?;
    tape.add(h, zo)
}

fn layer_norm<T: Scalar>(tape: &mut Tape<T>, w: &mut Bound, prefix: &str, x: Var) -> Result<Var, AdError> {
    let g = w.get(tape, &format!("{prefix}.g"))?;
    let b = w.get(tape, &format!("{prefix}.b"))?;
    let y = tape.layer_norm(x, T::from_f64_lossy(LN_EPS))?;
    let y = tape.mul_row(y, g)?;
    tape.add_row(y, b)
}

fn attention<T: Scalar>(
    tape: &mut Tape<T>,
    w: &mut Bound,
    prefix: &str,
    x: Var,
    bias: &[Var],
    cfg: &ModelConfig,
) -> Result<Var, AdError> {
    let dh = cfg.d_e / cfg.heads;
    let q = w.linear(tape, &format!("{prefix}.q"), x)?;
    let wk = w.get(tape, &format!("{prefix}.k.w"))?;
    let k = tape.matmul(x, wk)?;
    let v = w.linear(tape, &format!("{prefix}.v"), x)?;
    let scale = T::from_f64_lossy(1.0 / (dh as f64).sqrt());
    let mut heads = Vec::with_capacity(cfg.heads);
    for (h, &b) in bias.iter().enumerate() {
        let qh = tape.slice_cols(q, h * dh, dh)?;
        let kh = tape.slice_cols(k, h * dh, dh)?;
        let vh = tape.slice_cols(v, h * dh, dh)?;
        let kt = tape.transpose(kh)?;
        let logits = tape.matmul(qh, kt)?;
        let logits = tape.scale(logits, scale)?;
        let p = tape.softmax_with_bias(logits, b)?;
        heads.push(tape.matmul(p, vh)?);
    }
    let cat = if heads.len() == 1 { heads[0] } else { tape.concat_cols(&heads)? };
    w.linear(tape, &format!("{prefix}.o"), cat)
}

/// One pre-normalized layer: attention then FFN, each with a residual.
pub fn encoder_layer<T: Scalar>(
    tape: &mut Tape<T>,
    w: &mut Bound,
    layer: usize,
    h: Var,
    bias: &[Var],
    cfg: &ModelConfig,
) -> Result<Var, AdError> {
    let pre = format!("enc.layer.{layer}");
    let x = layer_norm(tape, w, &format!("{pre}.ln1"), h)?;
    let a = attention(tape, w, &format!("{pre}.attn"), x, bias, cfg)?;
    let h = tape.add(h, a)?;
    let x = layer_norm(tape, w, &format!("{pre}.ln2"), h)?;
    let f = w.linear(tape, &format!("{pre}.ffn.0"), x)?;
    let f = tape.gelu(f)?;
    let f = w.linear(tape, &format!("{pre}.ffn.1"), f)?;
    tape.add(h, f)
}

/// Latent code `mu`, `[L, d_e]`, one row per modulation node in order.
pub fn encode<T: Scalar>(
    tape: &mut Tape<T>,
    w: &mut Bound,
    input: &GraphInput,
    cfg: &ModelConfig,
) -> Result<Var, AdError> {
    let bias = bias_matrices(tape, w, input, cfg.heads)?;
    let mut h = embed_nodes(tape, w, input, cfg)?;
    for l in 0..cfg.enc_layers {
        h = encoder_layer(tape, w, l, h, &bias, cfg)?;
    }
    if cfg.final_ln {
        h = layer_norm(tape, w, "enc.ln_f", h)?;
    }
    tape.gather_rows(h, &input.modulation_rows)
}
