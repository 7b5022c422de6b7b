//! Largest-magnitude adjacency eigenpairs.
//!
//! [`top_m_eigenpairs`] is the production path (restarted Lanczos with full
//! reorthogonalization); [`dense_eigendecomposition`] is an independent dense
//! route used as a verification oracle.

mod dense;
mod lanczos;

pub use dense::{dense_eigendecomposition, dense_eigendecomposition_capped, DEFAULT_ORACLE_CAP};
pub use lanczos::{top_m_eigenpairs, top_m_eigenpairs_with, LanczosOptions};

use serde::{Deserialize, Serialize};

use crate::error::{FairgeError, Result};
use crate::linalg::Matrix;

/// Relative tolerance under which two eigenvalue magnitudes count as tied.
pub const MAGNITUDE_TIE_TOL: f64 = 1e-9;

/// The `m` largest-magnitude eigenvalues of `A` with orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralTruncation {
    /// Ordered by descending magnitude; ties put positive values first.
    pub eigenvalues: Vec<f64>,
    /// `n x m`; column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: Matrix,
}

impl SpectralTruncation {
    pub fn m(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n(&self) -> usize {
        self.eigenvectors.rows()
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.eigenvectors.column(i)
    }

    /// Keeps only the first `m` pairs.
    pub fn truncate(&self, m: usize) -> SpectralTruncation {
        let m = m.min(self.m());
        SpectralTruncation {
            eigenvalues: self.eigenvalues[..m].to_vec(),
            eigenvectors: Matrix::from_fn(self.n(), m, |i, j| self.eigenvectors[(i, j)]),
        }
    }

    /// Number of leading eigenvalues whose magnitude ties `|lambda_1|`.
    pub fn dominant_multiplicity(&self) -> usize {
        match self.eigenvalues.first() {
            None => 0,
            Some(&first) => self
                .eigenvalues
                .iter()
                .take_while(|v| magnitudes_tied(first, **v))
                .count(),
        }
    }
}

pub(crate) fn magnitudes_tied(a: f64, b: f64) -> bool {
    let (a, b) = (a.abs(), b.abs());
    (a - b).abs() <= MAGNITUDE_TIE_TOL * a.max(b).max(1.0)
}

/// Index of the entry with the largest magnitude, taking the first index
/// among entries equal to it up to rounding.
pub(crate) fn dominant_index(v: &[f64]) -> usize {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    v.iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-9))
        .unwrap_or(0)
}

/// Flips `v` so its dominant entry is positive.
pub(crate) fn normalize_sign(v: &mut [f64]) {
    let idx = dominant_index(v);
    if v.get(idx).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Sorts eigenpairs by descending magnitude. Within a magnitude tie,
/// positive eigenvalues come first, then pairs whose dominant entry has the
/// smaller index.
pub(crate) fn sort_pairs(pairs: &mut [(f64, Vec<f64>)]) {
    for (_, v) in pairs.iter_mut() {
        normalize_sign(v);
    }
    pairs.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && magnitudes_tied(pairs[start].0, pairs[end].0) {
            end += 1;
        }
        pairs[start..end].sort_by(|a, b| {
            let key = |p: &(f64, Vec<f64>)| (p.0 < 0.0, dominant_index(&p.1));
            key(a).cmp(&key(b)).then(b.0.total_cmp(&a.0))
        });
        start = end;
    }
}

pub(crate) fn truncation_from_pairs(n: usize, pairs: Vec<(f64, Vec<f64>)>) -> SpectralTruncation {
    let eigenvalues = pairs.iter().map(|p| p.0).collect();
    let columns: Vec<Vec<f64>> = pairs.into_iter().map(|p| p.1).collect();
    let eigenvectors = if columns.is_empty() {
        Matrix::zeros(n, 0)
    } else {
        Matrix::from_columns(&columns)
    };
    SpectralTruncation {
        eigenvalues,
        eigenvectors,
    }
}

/// `|lambda_2| / |lambda_1|`.
pub fn spectral_gap(trunc: &SpectralTruncation) -> Result<f64> {
    if trunc.m() < 2 {
        return Err(FairgeError::InvalidArgument(
            "spectral gap needs at least two eigenvalues".into(),
        ));
    }
    let l1 = trunc.eigenvalues[0].abs();
    if l1 == 0.0 {
        return Err(FairgeError::Degenerate("dominant eigenvalue is zero".into()));
    }
    Ok(trunc.eigenvalues[1].abs() / l1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::load_edge_list;

    #[test]
    fn gap_examples() {
        let k3 = load_edge_list("0 1\n1 2\n2 0").unwrap();
        let t = dense_eigendecomposition(&k3).unwrap();
        assert!((spectral_gap(&t).unwrap() - 0.5).abs() < 1e-12);

        let two = load_edge_list("0 1\n1 2\n2 0\n3 4\n4 5\n5 3").unwrap();
        let t = dense_eigendecomposition(&two).unwrap();
        assert!((spectral_gap(&t).unwrap() - 1.0).abs() < 1e-12);

        let star = load_edge_list("0 1\n0 2\n0 3").unwrap();
        let t = dense_eigendecomposition(&star).unwrap();
        assert!((t.eigenvalues[0] - 3f64.sqrt()).abs() < 1e-12);
        assert!((t.eigenvalues[1] + 3f64.sqrt()).abs() < 1e-12);
        assert!((spectral_gap(&t).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gap_errors() {
        let k3 = load_edge_list("0 1\n1 2\n2 0").unwrap();
        let t = dense_eigendecomposition(&k3).unwrap().truncate(1);
        assert!(spectral_gap(&t).is_err());
        let empty = crate::graph::Graph::empty(3);
        let t = dense_eigendecomposition(&empty).unwrap();
        assert!(matches!(spectral_gap(&t), Err(FairgeError::Degenerate(_))));
    }

    #[test]
    fn tie_rule_prefers_positive() {
        let mut pairs = vec![(-2.0, vec![0.5, -0.5, 0.5, -0.5]), (2.0, vec![0.5; 4])];
        sort_pairs(&mut pairs);
        assert_eq!(pairs[0].0, 2.0);
        assert_eq!(pairs[1].1[0], 0.5);
    }
}
