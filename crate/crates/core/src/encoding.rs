//! Attribute-side encodings: zero-padding of hidden sensitive values,
//! multi-hop propagation, cosine alignment and the sinusoidal eigenvalue
//! encoding.

use crate::data::{AttributeMatrix, SensitiveColumn};
use crate::error::{FairgeError, Result};
use crate::graph::Graph;
use crate::linalg::{dot, norm, Matrix};

/// Attribute matrix with every hidden sensitive entry replaced by zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedAttributes {
    pub matrix: Matrix,
    pub sensitive_index: usize,
    /// `padded[i]` is true when row `i`'s sensitive entry was zeroed.
    pub padded: Vec<bool>,
}

impl PaddedAttributes {
    /// Whether entry `(i, j)` was synthesized by padding rather than copied.
    pub fn is_padded(&self, i: usize, j: usize) -> bool {
        j == self.sensitive_index && self.padded[i]
    }

    pub fn sensitive_column(&self) -> Vec<f64> {
        self.matrix.column(self.sensitive_index)
    }
}

pub fn zero_pad(attrs: &AttributeMatrix, sensitive: &SensitiveColumn) -> Result<PaddedAttributes> {
    if attrs.n() != sensitive.len() {
        return Err(FairgeError::DimensionMismatch(format!(
            "{} attribute rows but {} sensitive entries",
            attrs.n(),
            sensitive.len()
        )));
    }
    let s = attrs.sensitive_index();
    let mut matrix = Matrix::from_vec(attrs.n(), attrs.d(), attrs.data().to_vec());
    let padded: Vec<bool> = sensitive.present().iter().map(|p| !p).collect();
    for (i, &hide) in padded.iter().enumerate() {
        if hide {
            matrix[(i, s)] = 0.0;
        }
    }
    Ok(PaddedAttributes {
        matrix,
        sensitive_index: s,
        padded,
    })
}

/// `A^k X`, one sparse product per hop and column. With `normalize`, every
/// column is rescaled to unit norm after each hop (directions, and therefore
/// cosines, are unchanged).
pub fn propagate_k_hop(graph: &Graph, matrix: &Matrix, k: usize, normalize: bool) -> Result<Matrix> {
    if matrix.rows() != graph.n() {
        return Err(FairgeError::DimensionMismatch(format!(
            "matrix has {} rows, graph has {} nodes",
            matrix.rows(),
            graph.n()
        )));
    }
    let mut out = matrix.clone();
    let mut buf = vec![0.0; graph.n()];
    for j in 0..matrix.cols() {
        let mut col = matrix.column(j);
        for _ in 0..k {
            graph.matvec_into(&col, &mut buf);
            std::mem::swap(&mut col, &mut buf);
            if normalize {
                let nrm = norm(&col);
                if nrm > 0.0 {
                    col.iter_mut().for_each(|v| *v /= nrm);
                }
            }
        }
        out.set_column(j, &col);
    }
    Ok(out)
}

/// Single-vector convenience wrapper over [`propagate_k_hop`].
pub fn propagate_vector(graph: &Graph, x: &[f64], k: usize, normalize: bool) -> Result<Vec<f64>> {
    let m = Matrix::from_vec(x.len(), 1, x.to_vec());
    Ok(propagate_k_hop(graph, &m, k, normalize)?.into_vec())
}

/// `x.y / (|x| |y|)`, clamped to `[-1, 1]`.
pub fn cosine_alignment(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(FairgeError::DimensionMismatch(format!(
            "cosine of vectors with lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(FairgeError::Degenerate(
            "cosine alignment of a zero vector".into(),
        ));
    }
    Ok((dot(x, y) / (nx * ny)).clamp(-1.0, 1.0))
}

/// Sinusoidal embedding of each eigenvalue: row `i`, channel `2j` is
/// `sin(lambda_i / 10000^(2j/d_m))` and channel `2j+1` the matching cosine.
pub fn eigenvalue_position_encoding(eigenvalues: &[f64], d_m: usize) -> Result<Matrix> {
    if d_m < 2 || !d_m.is_multiple_of(2) {
        return Err(FairgeError::InvalidArgument(format!(
            "encoding width {d_m} must be even and at least 2"
        )));
    }
    let mut out = Matrix::zeros(eigenvalues.len(), d_m);
    for (i, &lam) in eigenvalues.iter().enumerate() {
        for j in 0..d_m / 2 {
            let angle = lam / 10000f64.powf(2.0 * j as f64 / d_m as f64);
            out[(i, 2 * j)] = angle.sin();
            out[(i, 2 * j + 1)] = angle.cos();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::load_edge_list;

    fn k3() -> Graph {
        load_edge_list("0 1\n1 2\n2 0").unwrap()
    }

    fn k3_attrs() -> AttributeMatrix {
        // columns: feature, sensitive
        AttributeMatrix::new(3, 2, vec![0.1, 1.0, 0.2, 0.0, 0.3, 1.0], 1).unwrap()
    }

    #[test]
    fn pad_identity_when_complete() {
        let attrs = k3_attrs();
        let p = zero_pad(&attrs, &SensitiveColumn::complete(vec![1, 0, 1])).unwrap();
        assert_eq!(p.matrix.data(), attrs.data());
        assert!(!p.padded.iter().any(|x| *x));
    }

    #[test]
    fn pad_masked_node() {
        let sens = SensitiveColumn::new(vec![1, 0, 1], vec![true, true, false]).unwrap();
        let p = zero_pad(&k3_attrs(), &sens).unwrap();
        assert_eq!(p.sensitive_column(), vec![1.0, 0.0, 0.0]);
        assert!(p.is_padded(2, 1));
        assert!(!p.is_padded(2, 0));
        assert_eq!(p.matrix.column(0), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn pad_all_masked() {
        let sens = SensitiveColumn::new(vec![1, 0, 1], vec![false; 3]).unwrap();
        let p = zero_pad(&k3_attrs(), &sens).unwrap();
        assert_eq!(p.sensitive_column(), vec![0.0; 3]);
        assert_eq!(p.matrix.column(0), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn pad_dimension_mismatch() {
        assert!(zero_pad(&k3_attrs(), &SensitiveColumn::complete(vec![0, 1])).is_err());
    }

    #[test]
    fn hops_on_k3() {
        let g = k3();
        let h = [1.0, 0.0, 1.0];
        assert_eq!(propagate_vector(&g, &h, 0, false).unwrap(), h.to_vec());
        assert_eq!(propagate_vector(&g, &h, 1, false).unwrap(), vec![1.0, 2.0, 1.0]);
        assert_eq!(propagate_vector(&g, &h, 2, false).unwrap(), vec![3.0, 2.0, 3.0]);
        let far = propagate_vector(&g, &h, 50, true).unwrap();
        let target = 1.0 / 3f64.sqrt();
        for v in far {
            assert!((v - target).abs() < 1e-9);
        }
    }

    #[test]
    fn cosine_examples() {
        let x = [0.3, -1.2, 4.0];
        assert!((cosine_alignment(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let c = cosine_alignment(&[1.0, 2.0, 1.0], &[1.0, 0.0, 1.0]).unwrap();
        assert!((c - 2.0 / 12f64.sqrt()).abs() < 1e-15);
        assert!((c - 0.57735).abs() < 1e-5);
        let p1 = [1.0 / 3f64.sqrt(); 3];
        let c = cosine_alignment(&p1, &[1.0, 0.0, 1.0]).unwrap();
        assert!((c - 2.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            cosine_alignment(&[0.0; 3], &x),
            Err(FairgeError::Degenerate(_))
        ));
    }

    #[test]
    fn position_encoding_examples() {
        let pe = eigenvalue_position_encoding(&[0.0, 2.0], 4).unwrap();
        assert_eq!(pe.row(0), &[0.0, 1.0, 0.0, 1.0]);
        assert!((pe[(1, 0)] - 0.90930).abs() < 1e-5);
        assert!((pe[(1, 1)] + 0.41615).abs() < 1e-5);
        assert!(eigenvalue_position_encoding(&[1.0], 3).is_err());
        assert!(eigenvalue_position_encoding(&[1.0], 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn encoding_in_unit_range(lams in proptest::collection::vec(-1e6f64..1e6, 1..8), half in 1usize..6) {
            let pe = eigenvalue_position_encoding(&lams, 2 * half).unwrap();
            proptest::prop_assert!(pe.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        }

        #[test]
        fn cosine_scale_invariant(x in proptest::collection::vec(-5.0f64..5.0, 4), y in proptest::collection::vec(-5.0f64..5.0, 4), a in 0.01f64..100.0, b in 0.01f64..100.0) {
            proptest::prop_assume!(norm(&x) > 1e-3 && norm(&y) > 1e-3);
            let base = cosine_alignment(&x, &y).unwrap();
            let xs: Vec<f64> = x.iter().map(|v| v * a).collect();
            let ys: Vec<f64> = y.iter().map(|v| v * b).collect();
            proptest::prop_assert!((cosine_alignment(&xs, &ys).unwrap() - base).abs() < 1e-12);
        }

        #[test]
        fn normalized_hops_preserve_cosine(seed in 0u64..200, k in 0usize..30) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 12;
            let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|_| rng.gen_bool(0.3)).collect();
            let g = Graph::from_edges(n, &edges).unwrap();
            let h: Vec<f64> = (0..n).map(|i| (i % 2) as f64 + 0.5).collect();
            let raw = propagate_vector(&g, &h, k, false).unwrap();
            let normed = propagate_vector(&g, &h, k, true).unwrap();
            proptest::prop_assume!(norm(&raw) > 0.0);
            let a = cosine_alignment(&raw, &h).unwrap();
            let b = cosine_alignment(&normed, &h).unwrap();
            proptest::prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
