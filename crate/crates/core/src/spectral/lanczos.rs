//! Thick-restart Lanczos with full reorthogonalization.
//!
//! Each cycle grows an orthonormal Krylov basis to at most
//! `min(n, 4 * want + 20)` vectors, solves the projected eigenproblem, and
//! restarts from the leading Ritz vectors plus their common residual
//! direction. A Krylov space built from one start vector holds a single
//! vector per eigenspace, so after the main solve the locked pairs are
//! deflated and a fresh seeded start is run to pick up any missed copy of a
//! repeated eigenvalue.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{magnitudes_tied, sort_pairs, truncation_from_pairs, SpectralTruncation};
use crate::error::{FairgeError, Result};
use crate::graph::Graph;
use crate::linalg::{axpy, dot, jacobi_eigen, norm, Matrix};
use crate::seeded_rng;

const LANCZOS_STREAM: u64 = 0x6c61_6e63;
const BREAKDOWN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Bound on `||A p - lambda p||` for every returned pair.
    pub tol: f64,
    /// Maximum number of restart cycles across all deflation rounds.
    pub max_iter: usize,
    /// Seed for start vectors injected after breakdown or during deflation.
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1000,
            seed: 0,
        }
    }
}

/// The `m` largest-magnitude eigenpairs of the adjacency matrix.
pub fn top_m_eigenpairs(graph: &Graph, m: usize, tol: f64, max_iter: usize) -> Result<SpectralTruncation> {
    top_m_eigenpairs_with(
        graph,
        m,
        &LanczosOptions {
            tol,
            max_iter,
            ..LanczosOptions::default()
        },
    )
}

pub fn top_m_eigenpairs_with(graph: &Graph, m: usize, opts: &LanczosOptions) -> Result<SpectralTruncation> {
    let n = graph.n();
    if n == 0 {
        return Err(FairgeError::EmptyInput);
    }
    if m == 0 || m > n {
        return Err(FairgeError::InvalidArgument(format!(
            "need 1 <= m <= n, got m={m}, n={n}"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(FairgeError::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }

    let mut solver = Solver {
        graph,
        tol: opts.tol,
        budget: opts.max_iter,
        rng: seeded_rng(opts.seed, LANCZOS_STREAM),
    };

    let ones = vec![1.0 / (n as f64).sqrt(); n];
    let mut locked = solver.solve(&[], ones, m)?;
    sort_pairs(&mut locked);

    while locked.len() < n {
        let locked_vecs: Vec<Vec<f64>> = locked.iter().map(|p| p.1.clone()).collect();
        let start = solver.random_vector(n);
        let want = 2.min(n - locked.len());
        let extra = solver.solve(&locked_vecs, start, want)?;
        let boundary = locked[m - 1].0;
        let before = locked.len();
        locked.extend(extra.into_iter().filter(|(mu, _)| outranks(*mu, boundary)));
        if locked.len() == before {
            break;
        }
        log::debug!("deflation recovered {} missed eigenpair(s)", locked.len() - before);
        sort_pairs(&mut locked);
        locked.truncate(m);
    }
    Ok(truncation_from_pairs(n, locked))
}

/// Whether eigenvalue `candidate` belongs ahead of `boundary` in the ordering.
fn outranks(candidate: f64, boundary: f64) -> bool {
    if magnitudes_tied(candidate, boundary) {
        candidate >= 0.0 && boundary < 0.0
    } else {
        candidate.abs() > boundary.abs()
    }
}

/// Indices of `theta` by descending magnitude, positive first within ties.
fn ritz_order(theta: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..theta.len()).collect();
    idx.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()));
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && magnitudes_tied(theta[idx[start]], theta[idx[end]]) {
            end += 1;
        }
        idx[start..end].sort_by(|&a, &b| theta[b].total_cmp(&theta[a]));
        start = end;
    }
    idx
}

struct Solver<'a> {
    graph: &'a Graph,
    tol: f64,
    budget: usize,
    rng: ChaCha8Rng,
}

impl Solver<'_> {
    fn random_vector(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.rng.gen_range(-1.0..1.0)).collect()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.graph.matvec_into(x, &mut y);
        y
    }

    /// Orthonormalizes `x` against `locked` and `basis` (two Gram-Schmidt
    /// passes), replacing it with a random direction on breakdown.
    fn orthonormalize(&mut self, mut x: Vec<f64>, locked: &[Vec<f64>], basis: &[Vec<f64>]) -> Result<Vec<f64>> {
        for attempt in 0..16 {
            let before = norm(&x);
            if before > 0.0 {
                for _ in 0..2 {
                    for q in locked.iter().chain(basis) {
                        let c = dot(q, &x);
                        axpy(-c, q, &mut x);
                    }
                }
                let after = norm(&x);
                if after > BREAKDOWN_TOL * before {
                    x.iter_mut().for_each(|v| *v /= after);
                    return Ok(x);
                }
            }
            log::trace!("Krylov breakdown (attempt {attempt}); injecting a random direction");
            x = self.random_vector(x.len());
        }
        Err(FairgeError::Degenerate(
            "could not extend the Krylov basis".into(),
        ))
    }

    /// Top-`want` eigenpairs of `A` restricted to the complement of `locked`.
    fn solve(&mut self, locked: &[Vec<f64>], start: Vec<f64>, want: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        let n = self.graph.n();
        let available = n - locked.len();
        let max_dim = available.min(4 * want + 20);
        let keep = ((want + max_dim) / 2).clamp(want, max_dim.saturating_sub(1).max(want));

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
        let mut images: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
        let mut candidate = start;

        loop {
            while basis.len() < max_dim {
                let v = self.orthonormalize(candidate, locked, &basis)?;
                let av = self.apply(&v);
                candidate = av.clone();
                basis.push(v);
                images.push(av);
            }

            let k = basis.len();
            let h = Matrix::from_fn(k, k, |i, j| dot(&basis[i], &images[j]));
            let (theta, s) = jacobi_eigen(&h);
            let order = ritz_order(&theta);
            let kept = if k == available { want } else { keep };

            let mut ritz = Vec::with_capacity(kept);
            for &idx in order.iter().take(kept) {
                let mut y = vec![0.0; n];
                let mut ay = vec![0.0; n];
                for j in 0..k {
                    let c = s[(j, idx)];
                    axpy(c, &basis[j], &mut y);
                    axpy(c, &images[j], &mut ay);
                }
                let mut r = ay.clone();
                axpy(-theta[idx], &y, &mut r);
                for q in locked {
                    let c = dot(q, &r);
                    axpy(-c, q, &mut r);
                }
                ritz.push((theta[idx], y, ay, r));
            }

            let residuals: Vec<f64> = ritz.iter().take(want).map(|p| norm(&p.3)).collect();
            if residuals.iter().all(|&r| r <= self.tol) {
                return Ok(ritz
                    .into_iter()
                    .take(want)
                    .map(|(lam, mut y, _, _)| {
                        let nrm = norm(&y);
                        y.iter_mut().for_each(|v| *v /= nrm);
                        (lam, y)
                    })
                    .collect());
            }
            if k == available || self.budget == 0 {
                return Err(FairgeError::NoConvergence {
                    iterations: k,
                    residuals,
                });
            }
            self.budget -= 1;

            let (restart_dir, _) = ritz
                .iter()
                .map(|p| (&p.3, norm(&p.3)))
                .fold((None, -1.0), |best, (r, nr)| if nr > best.1 { (Some(r), nr) } else { best });
            candidate = restart_dir.cloned().unwrap_or_else(|| self.random_vector(n));
            basis.clear();
            images.clear();
            for (_, y, ay, _) in ritz {
                basis.push(y);
                images.push(ay);
            }
        }
    }
}
