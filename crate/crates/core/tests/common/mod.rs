#![allow(dead_code)]

use fairge::model::{node_inputs, ModelInputs, ModelParams, ModelShape};
use fairge::{top_m_eigenpairs, AttributeMatrix, Graph, SensitiveColumn};

/// Two triangles bridged by the edge 2-3, three attributes (the last one
/// sensitive), node 5's sensitive value hidden.
pub struct SixNode {
    pub graph: Graph,
    pub attrs: AttributeMatrix,
    pub sensitive: SensitiveColumn,
    pub labels: Vec<u8>,
}

pub fn six_node() -> SixNode {
    let graph = Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)]).unwrap();
    #[rustfmt::skip]
    let data = vec![
        0.9, -0.2, 1.0,
        0.4,  0.1, 1.0,
        0.3,  0.8, 0.0,
        -0.5, 0.6, 1.0,
        -0.7, 0.2, 0.0,
        -0.1, -0.9, 0.0,
    ];
    let attrs = AttributeMatrix::new(6, 3, data, 2).unwrap();
    let sensitive = SensitiveColumn::new(vec![1, 1, 0, 1, 0, 0], vec![true, true, true, true, true, false]).unwrap();
    SixNode {
        graph,
        attrs,
        sensitive,
        labels: vec![1, 1, 1, 0, 0, 0],
    }
}

pub const D_M: usize = 4;

pub fn six_node_inputs(m: usize, k_hops: usize) -> ModelInputs {
    let f = six_node();
    let trunc = top_m_eigenpairs(&f.graph, m, 1e-12, 1000).unwrap();
    let h0 = node_inputs(&f.graph, &f.attrs, &f.sensitive, k_hops, trunc.eigenvalues[0], true).unwrap();
    ModelInputs::new(&trunc, h0, D_M, true).unwrap()
}

pub fn six_node_params(inputs: &ModelInputs, hidden: usize, layers: usize, seed: u64) -> ModelParams {
    let shape = ModelShape {
        d_in: inputs.h0.cols(),
        d_m: D_M,
        heads: 2,
        hidden,
        layers,
    };
    ModelParams::init(shape, seed).unwrap()
}

/// `|a - f| / max(|a|, |f|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Random simple graph: each pair joined with probability `p`.
pub fn random_graph(n: usize, p: f64, rng: &mut impl rand::Rng) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, &edges).unwrap()
}

/// Counting oracles for the group metrics, written independently of the
/// library: each rate is recomputed by filtering the evaluation set.
pub mod oracle {
    fn members(s: &[u32], idx: &[usize], g: u32) -> Vec<usize> {
        idx.iter().copied().filter(|&i| s[i] == g).collect()
    }

    pub fn groups(s: &[u32], idx: &[usize]) -> Vec<u32> {
        let mut g: Vec<u32> = idx.iter().map(|&i| s[i]).collect();
        g.sort_unstable();
        g.dedup();
        g
    }

    pub fn positive_rate(yhat: &[u8], s: &[u32], idx: &[usize], g: u32) -> Option<f64> {
        let m = members(s, idx, g);
        let pos = m.iter().filter(|&&i| yhat[i] == 1).count();
        (!m.is_empty()).then(|| pos as f64 / m.len() as f64)
    }

    pub fn true_positive_rate(yhat: &[u8], y: &[u8], s: &[u32], idx: &[usize], g: u32) -> Option<f64> {
        let actual: Vec<usize> = members(s, idx, g).into_iter().filter(|&i| y[i] == 1).collect();
        let hit = actual.iter().filter(|&&i| yhat[i] == 1).count();
        (!actual.is_empty()).then(|| hit as f64 / actual.len() as f64)
    }

    /// Population variance via the pairwise identity
    /// `Var = sum_{i<j} (x_i - x_j)^2 / k^2`.
    pub fn pairwise_variance(x: &[f64]) -> f64 {
        let k = x.len() as f64;
        let mut acc = 0.0;
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                acc += (x[i] - x[j]) * (x[i] - x[j]);
            }
        }
        acc / (k * k)
    }
}
