//! Seeded synthetic graphs with planted sensitive groups and biased labels.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{AttributeMatrix, Dataset, LabelVector, SensitiveColumn};
use crate::error::{FairgeError, Result};
use crate::graph::Graph;
use crate::seeded_rng;

const GRAPH_STREAM: u64 = 0x6772_6170;
const NODE_STREAM: u64 = 0x6e6f_6465;

/// Graph family and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    /// Every pair joined independently with probability `p`.
    ErdosRenyi { n: usize, p: f64 },
    /// Stochastic block model: `sizes[b]` nodes in block `b`, pairs in blocks
    /// `(a, b)` joined with probability `probs[a][b]`.
    Sbm { sizes: Vec<usize>, probs: Vec<Vec<f64>> },
    /// Disjoint complete graphs of the given sizes.
    DisjointCliques { sizes: Vec<usize> },
    /// An explicit edge list.
    Custom { n: usize, edges: Vec<(usize, usize)> },
}

/// A synthetic graph plus the rules that plant node attributes.
///
/// Each node has a block (its SBM block or clique; the first or second half
/// of the ids otherwise) with class `block % 2`. The sensitive value is that
/// class, flipped with probability `1 - rho_s`; the label is that class,
/// flipped with probability `label_flip`. Features are a one-hot block
/// indicator plus uniform noise in `[-noise, noise]`, followed by the
/// sensitive value as the last column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub graph: GraphKind,
    pub rho_s: f64,
    pub label_flip: f64,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Two equal blocks with within/between edge probabilities.
    pub fn two_block_sbm(n: usize, p_in: f64, p_out: f64, seed: u64) -> Self {
        let half = n / 2;
        Self {
            graph: GraphKind::Sbm {
                sizes: vec![half, n - half],
                probs: vec![vec![p_in, p_out], vec![p_out, p_in]],
            },
            rho_s: 1.0,
            label_flip: 0.0,
            noise: 0.0,
            seed,
        }
    }

    pub fn n(&self) -> usize {
        match &self.graph {
            GraphKind::ErdosRenyi { n, .. } | GraphKind::Custom { n, .. } => *n,
            GraphKind::Sbm { sizes, .. } | GraphKind::DisjointCliques { sizes } => sizes.iter().sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let bad = |msg: &str| Err(FairgeError::InvalidArgument(msg.to_string()));
        if !prob(self.rho_s) || !prob(self.label_flip) {
            return bad("rho_s and label_flip must lie in [0, 1]");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be finite and nonnegative");
        }
        match &self.graph {
            GraphKind::ErdosRenyi { p, .. } if !prob(*p) => bad("edge probability outside [0, 1]"),
            GraphKind::Sbm { sizes, probs } => {
                let b = sizes.len();
                if b == 0 || probs.len() != b || probs.iter().any(|r| r.len() != b) {
                    return bad("block matrix must be square with one row per block");
                }
                for (a, row) in probs.iter().enumerate() {
                    for (c, &v) in row.iter().enumerate() {
                        if !prob(v) || v != probs[c][a] {
                            return bad("block matrix must be symmetric with entries in [0, 1]");
                        }
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }?;
        if self.n() == 0 {
            return Err(FairgeError::EmptyInput);
        }
        Ok(())
    }
}

fn blocks_of(spec: &SyntheticSpec) -> Vec<usize> {
    match &spec.graph {
        GraphKind::Sbm { sizes, .. } | GraphKind::DisjointCliques { sizes } => sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
            .collect(),
        GraphKind::ErdosRenyi { n, .. } | GraphKind::Custom { n, .. } => {
            (0..*n).map(|i| usize::from(2 * i >= *n)).collect()
        }
    }
}

fn sample_pairs(n: usize, rng: &mut ChaCha8Rng, prob: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < prob(i, j) {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Only the graph of `spec`.
pub fn gen_graph(spec: &SyntheticSpec) -> Result<Graph> {
    spec.validate()?;
    let n = spec.n();
    let mut rng = seeded_rng(spec.seed, GRAPH_STREAM);
    let edges = match &spec.graph {
        GraphKind::ErdosRenyi { p, .. } => sample_pairs(n, &mut rng, |_, _| *p),
        GraphKind::Sbm { probs, .. } => {
            let block = blocks_of(spec);
            sample_pairs(n, &mut rng, |i, j| probs[block[i]][block[j]])
        }
        GraphKind::DisjointCliques { .. } => {
            let block = blocks_of(spec);
            (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|&(i, j)| block[i] == block[j])
                .collect()
        }
        GraphKind::Custom { edges, .. } => edges.clone(),
    };
    Graph::from_edges(n, &edges)
}

/// Graph, attributes (sensitive column last), complete sensitive column and
/// labels for `spec`.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    let graph = gen_graph(spec)?;
    let n = graph.n();
    let block = blocks_of(spec);
    let n_blocks = block.iter().max().map_or(1, |b| b + 1);
    let mut rng = seeded_rng(spec.seed, NODE_STREAM);
    let d = n_blocks + 1;
    let mut data = vec![0.0; n * d];
    let mut sensitive = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (i, &b) in block.iter().enumerate() {
        let class = (b % 2) as u32;
        let s = if rng.gen::<f64>() < 1.0 - spec.rho_s { 1 - class } else { class };
        let y = if rng.gen::<f64>() < spec.label_flip { 1 - class } else { class };
        let row = &mut data[i * d..(i + 1) * d];
        for (j, v) in row[..n_blocks].iter_mut().enumerate() {
            let noise = if spec.noise > 0.0 { rng.gen_range(-spec.noise..=spec.noise) } else { 0.0 };
            *v = f64::from(u8::from(j == b)) + noise;
        }
        row[n_blocks] = f64::from(s);
        sensitive.push(s);
        labels.push(y as u8);
    }
    let mut names: Vec<String> = (0..n_blocks).map(|b| format!("block{b}")).collect();
    names.push("sensitive".into());
    let attributes = AttributeMatrix::with_names(n, d, data, n_blocks, names)?;
    Dataset::new(graph, attributes, SensitiveColumn::complete(sensitive), LabelVector(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::dense_eigendecomposition;

    fn spec(graph: GraphKind) -> SyntheticSpec {
        SyntheticSpec {
            graph,
            rho_s: 0.8,
            label_flip: 0.1,
            noise: 0.2,
            seed: 4,
        }
    }

    #[test]
    fn two_triangles() {
        let ds = gen_synthetic(&spec(GraphKind::DisjointCliques { sizes: vec![3, 3] })).unwrap();
        assert_eq!(ds.graph.edge_count(), 6);
        let t = dense_eigendecomposition(&ds.graph).unwrap();
        assert!((t.eigenvalues[0] - 2.0).abs() < 1e-12);
        assert!((t.eigenvalues[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn complete_er() {
        let g = gen_graph(&spec(GraphKind::ErdosRenyi { n: 50, p: 1.0 })).unwrap();
        assert_eq!(g.edge_count(), 50 * 49 / 2);
        let t = dense_eigendecomposition(&g).unwrap();
        assert!((t.eigenvalues[0] - 49.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let s = SyntheticSpec {
            rho_s: 0.7,
            label_flip: 0.2,
            noise: 0.5,
            ..SyntheticSpec::two_block_sbm(60, 0.3, 0.05, 9)
        };
        let a = gen_synthetic(&s).unwrap();
        let b = gen_synthetic(&s).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.attributes, b.attributes);
        assert_eq!(a.sensitive, b.sensitive);
        assert_eq!(a.labels, b.labels);
        let c = gen_synthetic(&SyntheticSpec { seed: 10, ..s }).unwrap();
        assert_ne!(a.graph, c.graph);
    }

    #[test]
    fn planted_correlations() {
        let mut s = SyntheticSpec::two_block_sbm(400, 0.1, 0.01, 1);
        s.rho_s = 0.9;
        s.label_flip = 0.0;
        let ds = gen_synthetic(&s).unwrap();
        let agree = (0..400)
            .filter(|&i| ds.sensitive.values()[i] == ds.labels.0[i] as u32)
            .count() as f64
            / 400.0;
        assert!((agree - 0.9).abs() < 0.05, "{agree}");
        assert_eq!(ds.attributes.sensitive_index(), 2);
        assert!(ds.graph.is_symmetric());
    }

    #[test]
    fn rejects_invalid() {
        assert!(gen_graph(&spec(GraphKind::ErdosRenyi { n: 5, p: 1.5 })).is_err());
        let asym = GraphKind::Sbm {
            sizes: vec![2, 2],
            probs: vec![vec![0.5, 0.1], vec![0.2, 0.5]],
        };
        assert!(gen_graph(&spec(asym)).is_err());
        assert!(gen_graph(&spec(GraphKind::Custom { n: 2, edges: vec![(0, 5)] })).is_err());
    }
}
