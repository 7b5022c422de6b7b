//! Minimal reverse-mode automatic differentiation over dense matrices.
//!
//! Every operation appends a node to the tape; nodes are created in
//! topological order, so the backward pass is a single reverse sweep.

use crate::linalg::Matrix;

const LN_EPS: f64 = 1e-5;

/// Handle to a value on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulT(Var, Var),
    Add(Var, Var),
    /// `a + 1 * bias` with `bias` of shape `1 x cols`
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Gelu(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        normalized: Matrix,
        inv_std: Vec<f64>,
    },
    HCat(Var, Var),
    /// `diag(g) * a`, `g` of shape `rows x 1`
    RowScale(Var, Var),
    CrossEntropy {
        logits: Var,
        targets: Vec<(usize, usize)>,
        probs: Matrix,
    },
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn erf(x: f64) -> f64 {
    libm::erf(x)
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul_t(self.value(b));
        self.push(value, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "add shape");
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p + q).collect();
        let value = Matrix::from_vec(x.rows(), x.cols(), data);
        self.push(value, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let (x, b) = (self.value(a), self.value(bias));
        assert_eq!((1, x.cols()), b.shape(), "bias shape");
        let value = Matrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] + b[(0, j)]);
        self.push(value, Op::AddRow(a, bias))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).scale(c);
        self.push(value, Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(gelu);
        self.push(value, Op::Gelu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut value = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            let row = x.row(i);
            let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            for (o, e) in value.row_mut(i).iter_mut().zip(exps) {
                *o = e / sum;
            }
        }
        self.push(value, Op::SoftmaxRows(a))
    }

    /// Row-wise layer normalization with affine `gamma`, `beta` (`1 x cols`).
    pub fn layer_norm(&mut self, a: Var, gamma: Var, beta: Var) -> Var {
        let x = self.value(a);
        let (rows, cols) = x.shape();
        let mut normalized = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for i in 0..rows {
            let row = x.row(i);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let r = 1.0 / (var + LN_EPS).sqrt();
            for (o, v) in normalized.row_mut(i).iter_mut().zip(row) {
                *o = (v - mean) * r;
            }
            inv_std.push(r);
        }
        let (g, b) = (self.value(gamma), self.value(beta));
        let value = Matrix::from_fn(rows, cols, |i, j| normalized[(i, j)] * g[(0, j)] + b[(0, j)]);
        self.push(
            value,
            Op::LayerNorm {
                x: a,
                gamma,
                beta,
                normalized,
                inv_std,
            },
        )
    }

    pub fn hcat(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).hcat(self.value(b));
        self.push(value, Op::HCat(a, b))
    }

    pub fn row_scale(&mut self, a: Var, g: Var) -> Var {
        let (x, s) = (self.value(a), self.value(g));
        assert_eq!((x.rows(), 1), s.shape(), "row scale shape");
        let value = Matrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] * s[(i, 0)]);
        self.push(value, Op::RowScale(a, g))
    }

    /// Mean two-or-more-class cross-entropy over `(row, class)` targets.
    pub fn cross_entropy(&mut self, logits: Var, targets: Vec<(usize, usize)>) -> Var {
        assert!(!targets.is_empty(), "cross-entropy over an empty batch");
        let x = self.value(logits);
        let mut probs = Matrix::zeros(x.rows(), x.cols());
        let mut loss = 0.0;
        for &(i, c) in &targets {
            let row = x.row(i);
            let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[c];
            for (p, v) in probs.row_mut(i).iter_mut().zip(row) {
                *p = (v - lse).exp();
            }
        }
        let value = Matrix::from_vec(1, 1, vec![loss / targets.len() as f64]);
        self.push(
            value,
            Op::CrossEntropy {
                logits,
                targets,
                probs,
            },
        )
    }

    /// Gradients of the scalar `output` with respect to every node.
    pub fn backward(&self, output: Var) -> Gradients {
        assert_eq!(self.value(output).shape(), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Matrix::from_vec(1, 1, vec![1.0]));

        for idx in (0..=output.0).rev() {
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = upstream.matmul_t(self.value(*b));
                    let gb = self.value(*a).t_matmul(&upstream);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    // out = a b^T: da = up b, db = up^T a
                    let ga = upstream.matmul(self.value(*b));
                    let gb = upstream.t_matmul(self.value(*a));
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, upstream.clone());
                    accumulate(&mut grads, *b, upstream.clone());
                }
                Op::AddRow(a, bias) => {
                    let gb = Matrix::from_fn(1, upstream.cols(), |_, j| {
                        (0..upstream.rows()).map(|i| upstream[(i, j)]).sum()
                    });
                    accumulate(&mut grads, *a, upstream.clone());
                    accumulate(&mut grads, *bias, gb);
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, upstream.scale(*c)),
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let g = Matrix::from_fn(x.rows(), x.cols(), |i, j| {
                        if x[(i, j)] > 0.0 {
                            upstream[(i, j)]
                        } else {
                            0.0
                        }
                    });
                    accumulate(&mut grads, *a, g);
                }
                Op::Gelu(a) => {
                    let x = self.value(*a);
                    let g = Matrix::from_fn(x.rows(), x.cols(), |i, j| upstream[(i, j)] * gelu_grad(x[(i, j)]));
                    accumulate(&mut grads, *a, g);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut g = Matrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let dotp: f64 = y.row(i).iter().zip(upstream.row(i)).map(|(p, q)| p * q).sum();
                        for j in 0..y.cols() {
                            g[(i, j)] = y[(i, j)] * (upstream[(i, j)] - dotp);
                        }
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    normalized,
                    inv_std,
                } => {
                    let gvals = self.value(*gamma);
                    let (rows, cols) = normalized.shape();
                    let mut dgamma = Matrix::zeros(1, cols);
                    let mut dbeta = Matrix::zeros(1, cols);
                    let mut dx = Matrix::zeros(rows, cols);
                    for i in 0..rows {
                        let mut dxhat = vec![0.0; cols];
                        for j in 0..cols {
                            let up = upstream[(i, j)];
                            dgamma[(0, j)] += up * normalized[(i, j)];
                            dbeta[(0, j)] += up;
                            dxhat[j] = up * gvals[(0, j)];
                        }
                        let mean_d = dxhat.iter().sum::<f64>() / cols as f64;
                        let mean_dx: f64 = dxhat
                            .iter()
                            .zip(normalized.row(i))
                            .map(|(d, xh)| d * xh)
                            .sum::<f64>()
                            / cols as f64;
                        for j in 0..cols {
                            dx[(i, j)] = inv_std[i] * (dxhat[j] - mean_d - normalized[(i, j)] * mean_dx);
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *gamma, dgamma);
                    accumulate(&mut grads, *beta, dbeta);
                }
                Op::HCat(a, b) => {
                    let ca = self.value(*a).cols();
                    let cb = self.value(*b).cols();
                    let ga = Matrix::from_fn(upstream.rows(), ca, |i, j| upstream[(i, j)]);
                    let gb = Matrix::from_fn(upstream.rows(), cb, |i, j| upstream[(i, ca + j)]);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::RowScale(a, g) => {
                    let x = self.value(*a);
                    let s = self.value(*g);
                    let ga = Matrix::from_fn(x.rows(), x.cols(), |i, j| upstream[(i, j)] * s[(i, 0)]);
                    let gg = Matrix::from_fn(x.rows(), 1, |i, _| {
                        x.row(i).iter().zip(upstream.row(i)).map(|(p, q)| p * q).sum()
                    });
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *g, gg);
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    probs,
                } => {
                    let scale = upstream[(0, 0)] / targets.len() as f64;
                    let mut g = Matrix::zeros(probs.rows(), probs.cols());
                    for &(i, c) in targets {
                        for j in 0..probs.cols() {
                            let onehot = if j == c { 1.0 } else { 0.0 };
                            g[(i, j)] += scale * (probs[(i, j)] - onehot);
                        }
                    }
                    accumulate(&mut grads, *logits, g);
                }
            }
            grads[idx] = Some(upstream);
        }
        Gradients { grads }
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient for `v`, or zeros of `shape` when `v` did not influence the
    /// output.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Matrix {
        self.grads[v.0]
            .clone()
            .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_grad(f: impl Fn(&Matrix) -> f64, x: &Matrix) -> Matrix {
        let h = 1e-6;
        let mut g = Matrix::zeros(x.rows(), x.cols());
        for k in 0..x.data().len() {
            let mut p = x.clone();
            p.data_mut()[k] += h;
            let mut m = x.clone();
            m.data_mut()[k] -= h;
            g.data_mut()[k] = (f(&p) - f(&m)) / (2.0 * h);
        }
        g
    }

    fn close(a: &Matrix, b: &Matrix, tol: f64) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())), "{x} vs {y}");
        }
    }

    #[test]
    fn layer_norm_softmax_gelu_chain() {
        let x0 = Matrix::from_fn(3, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.6);
        let gamma = Matrix::from_fn(1, 4, |_, j| 1.0 + 0.1 * j as f64);
        let beta = Matrix::from_fn(1, 4, |_, j| 0.05 * j as f64);
        let f = |x: &Matrix| {
            let mut t = Tape::new();
            let xv = t.leaf(x.clone());
            let g = t.leaf(gamma.clone());
            let b = t.leaf(beta.clone());
            let ln = t.layer_norm(xv, g, b);
            let sm = t.softmax_rows(ln);
            let ge = t.gelu(sm);
            let mixed = t.matmul_t(ge, ln);
            let logits = t.hcat(mixed, xv);
            let out = t.cross_entropy(logits, vec![(0, 1), (2, 5)]);
            (t, xv, out)
        };
        let (t, xv, out) = f(&x0);
        let analytic = t.backward(out).get_or_zeros(xv, (3, 4));
        let numeric = numeric_grad(|x| f(x).0.value(f(x).2)[(0, 0)], &x0);
        close(&analytic, &numeric, 1e-6);
    }

    #[test]
    fn row_scale_and_bias() {
        let a0 = Matrix::from_fn(3, 2, |i, j| (i as f64 - j as f64) * 0.7);
        let build = |g: &Matrix| {
            let mut t = Tape::new();
            let a = t.leaf(a0.clone());
            let gv = t.leaf(g.clone());
            let bias = t.leaf(Matrix::from_vec(1, 2, vec![0.1, -0.2]));
            let s = t.row_scale(a, gv);
            let r = t.add_row(s, bias);
            let r = t.relu(r);
            let out = t.cross_entropy(r, vec![(0, 0), (1, 1), (2, 0)]);
            (t, gv, out)
        };
        let g0 = Matrix::from_vec(3, 1, vec![0.5, -1.5, 2.0]);
        let (t, gv, out) = build(&g0);
        let analytic = t.backward(out).get_or_zeros(gv, (3, 1));
        let numeric = numeric_grad(|g| build(g).0.value(build(g).2)[(0, 0)], &g0);
        close(&analytic, &numeric, 1e-6);
    }
}
