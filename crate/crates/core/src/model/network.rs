//! The network: a pre-norm transformer block over eigenvalue tokens whose
//! output gates a spectral filter on the (padded) node attributes, followed
//! by fusion layers and a two-class head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use crate::encoding::eigenvalue_position_encoding;
use crate::error::{FairgeError, Result};
use crate::linalg::Matrix;
use crate::seeded_rng;
use crate::spectral::SpectralTruncation;

const INIT_STREAM: u64 = 0x696e_6974;

/// Dimensions that fix every parameter shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    /// Width of the node input matrix.
    pub d_in: usize,
    pub d_m: usize,
    pub heads: usize,
    pub hidden: usize,
    pub layers: usize,
}

impl ModelShape {
    pub fn d_k(&self) -> usize {
        self.d_m / self.heads
    }

    pub fn d_ff(&self) -> usize {
        2 * self.d_m
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || !self.d_m.is_multiple_of(self.heads) || self.d_in == 0 || self.hidden == 0 || self.layers == 0 {
            return Err(FairgeError::InvalidArgument(format!("inconsistent model shape {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Init {
    Xavier,
    Zeros,
    Ones,
}

fn layout(shape: &ModelShape) -> Vec<(String, (usize, usize), Init)> {
    let (d_m, d_k, d_ff) = (shape.d_m, shape.d_k(), shape.d_ff());
    let mut out = vec![
        ("ln1.gamma".to_string(), (1, d_m), Init::Ones),
        ("ln1.beta".to_string(), (1, d_m), Init::Zeros),
    ];
    for h in 0..shape.heads {
        for w in ["wq", "wk", "wv"] {
            out.push((format!("attn.h{h}.{w}"), (d_m, d_k), Init::Xavier));
        }
    }
    out.extend([
        ("ln2.gamma".to_string(), (1, d_m), Init::Ones),
        ("ln2.beta".to_string(), (1, d_m), Init::Zeros),
        ("ffn.w1".to_string(), (d_m, d_ff), Init::Xavier),
        ("ffn.b1".to_string(), (1, d_ff), Init::Zeros),
        ("ffn.w2".to_string(), (d_ff, d_m), Init::Xavier),
        ("ffn.b2".to_string(), (1, d_m), Init::Zeros),
    ]);
    for l in 0..shape.layers {
        let prev = if l == 0 { shape.d_in } else { shape.hidden };
        out.extend([
            (format!("layer{l}.gate.w"), (d_m, 1), Init::Xavier),
            (format!("layer{l}.gate.b"), (1, 1), Init::Zeros),
            (format!("layer{l}.fuse.w"), (prev + shape.d_in, shape.hidden), Init::Xavier),
            (format!("layer{l}.fuse.b"), (1, shape.hidden), Init::Zeros),
        ]);
    }
    out.extend([
        ("head.w".to_string(), (shape.hidden, 2), Init::Xavier),
        ("head.b".to_string(), (1, 2), Init::Zeros),
    ]);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub value: Matrix,
}

/// All trainable tensors, in a fixed order determined by the shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub shape: ModelShape,
    pub tensors: Vec<NamedTensor>,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases, unit layer-norm scales.
    pub fn init(shape: ModelShape, seed: u64) -> Result<Self> {
        shape.validate()?;
        let mut rng = seeded_rng(seed, INIT_STREAM);
        let tensors = layout(&shape)
            .into_iter()
            .map(|(name, (r, c), init)| {
                let value = match init {
                    Init::Zeros => Matrix::zeros(r, c),
                    Init::Ones => Matrix::from_vec(r, c, vec![1.0; r * c]),
                    Init::Xavier => {
                        let a = (6.0 / (r + c) as f64).sqrt();
                        Matrix::from_fn(r, c, |_, _| rng.gen_range(-a..a))
                    }
                };
                NamedTensor { name, value }
            })
            .collect();
        Ok(Self { shape, tensors })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|t| t.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.index_of(name).map(|i| &self.tensors[i].value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.index_of(name).map(move |i| &mut self.tensors[i].value)
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.value.data().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.value.is_finite())
    }

    /// Checks names and shapes against the layout implied by `self.shape`.
    pub fn validate_layout(&self) -> Result<()> {
        self.shape.validate()?;
        let expected = layout(&self.shape);
        if expected.len() != self.tensors.len() {
            return Err(FairgeError::Checkpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape, _), t) in expected.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.value.shape() {
                return Err(FairgeError::Checkpoint(format!(
                    "tensor `{}` {:?} does not match expected `{name}` {shape:?}",
                    t.name,
                    t.value.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Precomputed, parameter-independent inputs of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInputs {
    /// `m x d_m` encoded eigenvalues.
    pub e_pe: Matrix,
    /// `n x m` retained eigenvectors.
    pub p: Matrix,
    /// `m x d_in`: `P^T H`, the node inputs in the retained eigenbasis.
    pub pt_h: Matrix,
    /// `n x d_in` node inputs (zero-padded attributes, optionally with
    /// propagated copies).
    pub h0: Matrix,
    /// When false the spectral branch contributes zeros.
    pub spectral: bool,
}

impl ModelInputs {
    pub fn new(trunc: &SpectralTruncation, h0: Matrix, d_m: usize, spectral: bool) -> Result<Self> {
        if trunc.n() != h0.rows() {
            return Err(FairgeError::DimensionMismatch(format!(
                "eigenvectors have {} rows, inputs have {}",
                trunc.n(),
                h0.rows()
            )));
        }
        let e_pe = eigenvalue_position_encoding(&trunc.eigenvalues, d_m)?;
        let p = trunc.eigenvectors.clone();
        let pt_h = p.t_matmul(&h0);
        Ok(Self {
            e_pe,
            p,
            pt_h,
            h0,
            spectral,
        })
    }

    pub fn n(&self) -> usize {
        self.h0.rows()
    }

    fn check(&self, shape: &ModelShape) -> Result<()> {
        let m = self.p.cols();
        let ok = self.e_pe.shape() == (m, shape.d_m)
            && self.pt_h.shape() == (m, shape.d_in)
            && self.h0.cols() == shape.d_in
            && self.p.rows() == self.h0.rows();
        if ok {
            Ok(())
        } else {
            Err(FairgeError::DimensionMismatch(format!(
                "inputs (e_pe {:?}, P {:?}, P^T H {:?}, H {:?}) do not fit model {shape:?}",
                self.e_pe.shape(),
                self.p.shape(),
                self.pt_h.shape(),
                self.h0.shape()
            )))
        }
    }
}

/// Tape handles of one forward pass.
pub struct ForwardGraph {
    pub params: Vec<Var>,
    pub e_gt: Var,
    pub attention: Vec<Var>,
    pub logits: Var,
}

/// Single-head scaled dot-product attention on the tape; returns the output
/// and the attention weights.
pub fn attention_on_tape(t: &mut Tape, x: Var, wq: Var, wk: Var, wv: Var) -> (Var, Var) {
    let d_k = t.value(wq).cols() as f64;
    let q = t.matmul(x, wq);
    let k = t.matmul(x, wk);
    let v = t.matmul(x, wv);
    let scores = t.matmul_t(q, k);
    let scores = t.scale(scores, 1.0 / d_k.sqrt());
    let weights = t.softmax_rows(scores);
    (t.matmul(weights, v), weights)
}

struct BlockVars<'a> {
    ln1: (Var, Var),
    heads: &'a [(Var, Var, Var)],
    ln2: (Var, Var),
    ffn: (Var, Var, Var, Var),
}

fn block_on_tape(t: &mut Tape, x: Var, p: &BlockVars<'_>) -> (Var, Vec<Var>) {
    let normed = t.layer_norm(x, p.ln1.0, p.ln1.1);
    let mut weights = Vec::with_capacity(p.heads.len());
    let mut mha: Option<Var> = None;
    for &(wq, wk, wv) in p.heads {
        let (out, w) = attention_on_tape(t, normed, wq, wk, wv);
        weights.push(w);
        mha = Some(match mha {
            None => out,
            Some(acc) => t.hcat(acc, out),
        });
    }
    let mha = mha.expect("at least one head");
    let e_mha = t.add(mha, x);
    let normed = t.layer_norm(e_mha, p.ln2.0, p.ln2.1);
    let (w1, b1, w2, b2) = p.ffn;
    let hidden = t.matmul(normed, w1);
    let hidden = t.add_row(hidden, b1);
    let hidden = t.gelu(hidden);
    let out = t.matmul(hidden, w2);
    let out = t.add_row(out, b2);
    (t.add(out, e_mha), weights)
}

/// One fusion layer: `g = e_GT G + b`, `H_train = P diag(g) (P^T H)`,
/// `H_next = relu([H_prev | H_train] W + c)`.
#[allow(clippy::too_many_arguments)]
fn fuse_on_tape(
    t: &mut Tape,
    p: Var,
    pt_h: Var,
    e_gt: Var,
    h_prev: Var,
    gate_w: Var,
    gate_b: Var,
    fuse_w: Var,
    fuse_b: Var,
    spectral: bool,
) -> Var {
    let h_train = if spectral {
        let gate = t.matmul(e_gt, gate_w);
        let gate = t.add_row(gate, gate_b);
        let filtered = t.row_scale(pt_h, gate);
        t.matmul(p, filtered)
    } else {
        let (rows, cols) = (t.value(p).rows(), t.value(pt_h).cols());
        t.leaf(Matrix::zeros(rows, cols))
    };
    let joined = t.hcat(h_prev, h_train);
    let z = t.matmul(joined, fuse_w);
    let z = t.add_row(z, fuse_b);
    t.relu(z)
}

/// Records a full forward pass on `t`.
pub fn forward_on_tape(t: &mut Tape, params: &ModelParams, inputs: &ModelInputs) -> Result<ForwardGraph> {
    inputs.check(&params.shape)?;
    let vars: Vec<Var> = params.tensors.iter().map(|nt| t.leaf(nt.value.clone())).collect();
    let var = |name: &str| -> Var {
        vars[params
            .index_of(name)
            .unwrap_or_else(|| panic!("missing parameter {name}"))]
    };
    let heads: Vec<(Var, Var, Var)> = (0..params.shape.heads)
        .map(|h| {
            (
                var(&format!("attn.h{h}.wq")),
                var(&format!("attn.h{h}.wk")),
                var(&format!("attn.h{h}.wv")),
            )
        })
        .collect();
    let block = BlockVars {
        ln1: (var("ln1.gamma"), var("ln1.beta")),
        heads: &heads,
        ln2: (var("ln2.gamma"), var("ln2.beta")),
        ffn: (var("ffn.w1"), var("ffn.b1"), var("ffn.w2"), var("ffn.b2")),
    };

    let e_pe = t.leaf(inputs.e_pe.clone());
    let (e_gt, attention) = block_on_tape(t, e_pe, &block);

    let p = t.leaf(inputs.p.clone());
    let pt_h = t.leaf(inputs.pt_h.clone());
    let mut h = t.leaf(inputs.h0.clone());
    for l in 0..params.shape.layers {
        h = fuse_on_tape(
            t,
            p,
            pt_h,
            e_gt,
            h,
            var(&format!("layer{l}.gate.w")),
            var(&format!("layer{l}.gate.b")),
            var(&format!("layer{l}.fuse.w")),
            var(&format!("layer{l}.fuse.b")),
            inputs.spectral,
        );
    }
    let logits = t.matmul(h, var("head.w"));
    let logits = t.add_row(logits, var("head.b"));
    Ok(ForwardGraph {
        params: vars,
        e_gt,
        attention,
        logits,
    })
}

/// `n x 2` class logits.
pub fn forward(params: &ModelParams, inputs: &ModelInputs) -> Result<Matrix> {
    let mut t = Tape::new();
    let fg = forward_on_tape(&mut t, params, inputs)?;
    Ok(t.value(fg.logits).clone())
}

/// Self-attention `softmax(Q K^T / sqrt(d_K)) V`; returns the output and the
/// attention weights.
pub fn attention(x: &Matrix, wq: &Matrix, wk: &Matrix, wv: &Matrix) -> Result<(Matrix, Matrix)> {
    if wq.rows() != x.cols() || wk.shape() != wq.shape() || wv.rows() != x.cols() {
        return Err(FairgeError::DimensionMismatch("attention projection shapes".into()));
    }
    let mut t = Tape::new();
    let (xv, q, k, v) = (t.leaf(x.clone()), t.leaf(wq.clone()), t.leaf(wk.clone()), t.leaf(wv.clone()));
    let (out, w) = attention_on_tape(&mut t, xv, q, k, v);
    Ok((t.value(out).clone(), t.value(w).clone()))
}

/// Pre-norm transformer block applied to the encoded eigenvalues:
/// `e_MHA = MHA(LN(e_PE)) + e_PE`, `e_GT = FFN(LN(e_MHA)) + e_MHA`.
pub fn transformer_block(params: &ModelParams, e_pe: &Matrix) -> Result<Matrix> {
    if e_pe.cols() != params.shape.d_m {
        return Err(FairgeError::DimensionMismatch(format!(
            "token width {} != d_m {}",
            e_pe.cols(),
            params.shape.d_m
        )));
    }
    let mut t = Tape::new();
    let get = |t: &mut Tape, name: &str| t.leaf(params.get(name).expect("parameter").clone());
    let heads: Vec<(Var, Var, Var)> = (0..params.shape.heads)
        .map(|h| {
            (
                get(&mut t, &format!("attn.h{h}.wq")),
                get(&mut t, &format!("attn.h{h}.wk")),
                get(&mut t, &format!("attn.h{h}.wv")),
            )
        })
        .collect();
    let block = BlockVars {
        ln1: (get(&mut t, "ln1.gamma"), get(&mut t, "ln1.beta")),
        heads: &heads,
        ln2: (get(&mut t, "ln2.gamma"), get(&mut t, "ln2.beta")),
        ffn: (
            get(&mut t, "ffn.w1"),
            get(&mut t, "ffn.b1"),
            get(&mut t, "ffn.w2"),
            get(&mut t, "ffn.b2"),
        ),
    };
    let x = t.leaf(e_pe.clone());
    let (out, _) = block_on_tape(&mut t, x, &block);
    Ok(t.value(out).clone())
}

/// Explicit per-layer weights for [`fuse_layer`].
pub struct FuseWeights<'a> {
    pub gate_w: &'a Matrix,
    pub gate_b: &'a Matrix,
    pub fuse_w: &'a Matrix,
    pub fuse_b: &'a Matrix,
}

/// The spectral filter `P diag(g) P^T H` for gates `g`.
pub fn spectral_filter(p: &Matrix, gates: &[f64], h: &Matrix) -> Result<Matrix> {
    if p.cols() != gates.len() || p.rows() != h.rows() {
        return Err(FairgeError::DimensionMismatch("spectral filter shapes".into()));
    }
    let mut coeffs = p.t_matmul(h);
    for (i, g) in gates.iter().enumerate() {
        coeffs.row_mut(i).iter_mut().for_each(|v| *v *= g);
    }
    Ok(p.matmul(&coeffs))
}

/// One fusion layer evaluated outside training.
pub fn fuse_layer(p: &Matrix, e_gt: &Matrix, h_padded: &Matrix, h_prev: &Matrix, w: &FuseWeights<'_>) -> Result<Matrix> {
    let m = p.cols();
    if e_gt.rows() != m
        || w.gate_w.shape() != (e_gt.cols(), 1)
        || w.gate_b.shape() != (1, 1)
        || h_prev.rows() != h_padded.rows()
        || w.fuse_w.rows() != h_prev.cols() + h_padded.cols()
        || w.fuse_b.shape() != (1, w.fuse_w.cols())
    {
        return Err(FairgeError::DimensionMismatch("fuse layer shapes".into()));
    }
    let gates: Vec<f64> = e_gt
        .matmul(w.gate_w)
        .data()
        .iter()
        .map(|g| g + w.gate_b[(0, 0)])
        .collect();
    let h_train = spectral_filter(p, &gates, h_padded)?;
    let z = h_prev.hcat(&h_train).matmul(w.fuse_w);
    Ok(Matrix::from_fn(z.rows(), z.cols(), |i, j| (z[(i, j)] + w.fuse_b[(0, j)]).max(0.0)))
}

/// Argmax per row; ties go to class 0.
pub fn predict(logits: &Matrix) -> Vec<u8> {
    (0..logits.rows())
        .map(|i| u8::from(logits[(i, 1)] > logits[(i, 0)]))
        .collect()
}

/// Mean cross-entropy over `train_idx` and its gradient for every tensor,
/// in `params.tensors` order. `loss_scale` multiplies the loss.
pub fn loss_and_gradients(
    params: &ModelParams,
    inputs: &ModelInputs,
    labels: &[u8],
    train_idx: &[usize],
    loss_scale: f64,
) -> Result<(f64, Vec<Matrix>, Matrix)> {
    if labels.len() != inputs.n() {
        return Err(FairgeError::DimensionMismatch("labels vs nodes".into()));
    }
    if train_idx.is_empty() {
        return Err(FairgeError::InvalidArgument("empty training set".into()));
    }
    let mut t = Tape::new();
    let fg = forward_on_tape(&mut t, params, inputs)?;
    let targets = train_idx.iter().map(|&i| (i, labels[i] as usize)).collect();
    let loss = t.cross_entropy(fg.logits, targets);
    let loss = if loss_scale == 1.0 { loss } else { t.scale(loss, loss_scale) };
    let grads = t.backward(loss);
    let per_tensor = params
        .tensors
        .iter()
        .zip(&fg.params)
        .map(|(nt, v)| grads.get_or_zeros(*v, nt.value.shape()))
        .collect();
    Ok((t.value(loss)[(0, 0)], per_tensor, t.value(fg.logits).clone()))
}
