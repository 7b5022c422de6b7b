//! Undirected simple graphs in compressed sparse row form.

use std::fmt::Write as _;

use crate::error::{FairgeError, Result};

/// Symmetric, unweighted adjacency matrix without self-loops.
///
/// Every undirected edge `{u, v}` is stored twice, once in each row, and
/// each row's neighbor list is sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Duplicates (in either
    /// orientation) are collapsed and self-loops dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(FairgeError::InvalidArgument(format!(
                    "edge ({u}, {v}) out of range for n={n}"
                )));
            }
            if u == v {
                continue;
            }
            rows[u].push(v);
            rows[v].push(u);
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            col_indices.extend_from_slice(&row);
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            n,
            row_offsets,
            col_indices,
        })
    }

    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            row_offsets: vec![0; n + 1],
            col_indices: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.col_indices.len() / 2
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    /// Iterates each undirected edge once as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// Checks pairwise neighbor containment, sortedness and absence of
    /// self-loops.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let row = self.neighbors(i);
            row.windows(2).all(|w| w[0] < w[1])
                && row
                    .iter()
                    .all(|&j| j != i && self.neighbors(j).binary_search(&i).is_ok())
        })
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(FairgeError::DimensionMismatch(format!(
                "vector length {} != node count {}",
                x.len(),
                self.n
            )));
        }
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    /// Unchecked `y = A x`; both slices must have length `n`.
    pub(crate) fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.neighbors(i).iter().map(|&j| x[j]).sum();
        }
    }

    /// Dense row-major copy of the adjacency matrix.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.n * self.n];
        for (u, v) in self.edges() {
            a[u * self.n + v] = 1.0;
            a[v * self.n + u] = 1.0;
        }
        a
    }

    /// Serializes to the edge-list text format, always writing the
    /// `# n=<N>` header so isolated trailing nodes survive a round trip.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# n={}\n", self.n);
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }
}

/// Parses the whitespace-separated edge-list format.
///
/// Lines beginning with `#` are comments, except `# n=<N>` which fixes the
/// node count. Without the header, `n` is one more than the largest id seen.
pub fn load_edge_list(text: &str) -> Result<Graph> {
    let mut edges = Vec::new();
    let mut declared_n: Option<usize> = None;
    let mut max_id: Option<usize> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(value) = comment.trim().strip_prefix("n=") {
                let n = value.trim().parse::<usize>().map_err(|e| FairgeError::Parse {
                    line: line_no,
                    message: format!("bad node-count header: {e}"),
                })?;
                declared_n = Some(n);
            }
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut next_id = |what: &str| -> Result<usize> {
            let tok = fields.next().ok_or_else(|| FairgeError::Parse {
                line: line_no,
                message: format!("missing {what} endpoint"),
            })?;
            tok.parse::<usize>().map_err(|e| FairgeError::Parse {
                line: line_no,
                message: format!("`{tok}` is not a node id: {e}"),
            })
        };
        let u = next_id("first")?;
        let v = next_id("second")?;
        if fields.next().is_some() {
            return Err(FairgeError::Parse {
                line: line_no,
                message: "expected exactly two fields".into(),
            });
        }
        max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
        edges.push((u, v));
    }

    let inferred = max_id.map(|m| m + 1);
    let n = match (declared_n, inferred) {
        (None, None) => return Err(FairgeError::EmptyInput),
        (Some(d), Some(i)) if i > d => {
            return Err(FairgeError::InvalidArgument(format!(
                "node id {} exceeds declared n={d}",
                i - 1
            )))
        }
        (Some(d), _) => d,
        (None, Some(i)) => i,
    };
    if n == 0 {
        return Err(FairgeError::EmptyInput);
    }
    Graph::from_edges(n, &edges)
}
