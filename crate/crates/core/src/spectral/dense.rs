use nalgebra::{DMatrix, SymmetricEigen};

use super::{sort_pairs, truncation_from_pairs, SpectralTruncation};
use crate::error::{FairgeError, Result};
use crate::graph::Graph;

pub const DEFAULT_ORACLE_CAP: usize = 512;

/// Full spectrum of `A` by dense symmetric QR, with the same ordering and
/// sign conventions as [`super::top_m_eigenpairs`].
pub fn dense_eigendecomposition(graph: &Graph) -> Result<SpectralTruncation> {
    dense_eigendecomposition_capped(graph, DEFAULT_ORACLE_CAP)
}

pub fn dense_eigendecomposition_capped(graph: &Graph, cap: usize) -> Result<SpectralTruncation> {
    let n = graph.n();
    if n > cap {
        return Err(FairgeError::OracleCap { n, cap });
    }
    let a = DMatrix::from_row_slice(n, n, &graph.to_dense());
    let eig = SymmetricEigen::new(a);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect()))
        .collect();
    sort_pairs(&mut pairs);
    Ok(truncation_from_pairs(n, pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::load_edge_list;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn k3_spectrum() {
        let g = load_edge_list("0 1\n1 2\n2 0").unwrap();
        let t = dense_eigendecomposition(&g).unwrap();
        assert!(close(&t.eigenvalues, &[2.0, -1.0, -1.0]));
        let p1 = t.vector(0);
        assert!(close(&p1, &[1.0 / 3f64.sqrt(); 3]));
    }

    #[test]
    fn c4_spectrum() {
        let g = load_edge_list("0 1\n1 2\n2 3\n3 0").unwrap();
        let t = dense_eigendecomposition(&g).unwrap();
        assert!(close(&t.eigenvalues, &[2.0, -2.0, 0.0, 0.0]));
    }

    #[test]
    fn edgeless() {
        let t = dense_eigendecomposition(&Graph::empty(3)).unwrap();
        assert!(close(&t.eigenvalues, &[0.0; 3]));
        let vtv = t.eigenvectors.t_matmul(&t.eigenvectors);
        for i in 0..3 {
            for j in 0..3 {
                assert!((vtv[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cap_enforced() {
        assert!(matches!(
            dense_eigendecomposition_capped(&Graph::empty(10), 5),
            Err(FairgeError::OracleCap { n: 10, cap: 5 })
        ));
    }
}
