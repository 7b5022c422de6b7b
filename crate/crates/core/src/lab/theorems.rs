//! Alignment of multi-hop propagated sensitive vectors with the original,
//! their predicted limits, decay rates and the repeated-eigenvalue bound.
//!
//! Notation: `H` is the complete sensitive column, `H'` the observed one with
//! hidden entries set to zero. Every cosine sequence is computed with
//! per-hop unit rescaling, which leaves cosines unchanged and never
//! overflows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::SensitiveColumn;
use crate::encoding::cosine_alignment;
use crate::error::{FairgeError, Result};
use crate::graph::Graph;
use crate::linalg::{dot, norm};
use crate::spectral::{
    dense_eigendecomposition, magnitudes_tied, top_m_eigenpairs, SpectralTruncation,
};

/// Residuals at or below this are indistinguishable from rounding noise.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// Slack allowed in the repeated-eigenvalue inequality.
pub const BOUND_SLACK: f64 = 1e-8;

const EIG_TOL: f64 = 1e-12;
const EIG_MAX_ITER: usize = 2000;

/// Which alignment statement to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `cos(A^k H, H) -> cos(p1, H)`.
    Lemma1,
    /// `cos(A^k H', H') -> cos(p1, H')`.
    Thm1,
    /// `cos(A^k H, H') -> cos(p1, H')`.
    Thm2,
    /// `cos(A^k H', H)` and `cos(A^k H, H)` share their limit.
    Thm3,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Lemma1, Variant::Thm1, Variant::Thm2, Variant::Thm3];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Lemma1 => "lemma1",
            Variant::Thm1 => "thm1",
            Variant::Thm2 => "thm2",
            Variant::Thm3 => "thm3",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = FairgeError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| FairgeError::InvalidArgument(format!("unknown variant `{s}`")))
    }
}

/// Even/odd subsequence limits for graphs whose spectrum is symmetric at the
/// top (`lambda_n = -lambda_1`), where the sequence never settles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oscillation {
    pub even_limit: f64,
    pub odd_limit: f64,
}

/// A second sequence checked against the first (the complete-data series of
/// [`Variant::Thm3`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Companion {
    pub cos_k: Vec<f64>,
    pub limit: f64,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSeries {
    pub variant: Variant,
    pub k: Vec<usize>,
    pub cos_k: Vec<f64>,
    /// Predicted limit (the even-hop limit when oscillating).
    pub limit: f64,
    /// `|cos_k - limit|`, using the parity-matched limit when oscillating.
    pub residuals: Vec<f64>,
    pub oscillation: Option<Oscillation>,
    pub companion: Option<Companion>,
    /// Leading eigenvalues used for the prediction.
    pub eigenvalues: Vec<f64>,
    /// Projections of the propagated vector on the matching eigenvectors.
    pub projections: Vec<f64>,
}

impl AlignmentSeries {
    pub fn k_max(&self) -> usize {
        *self.k.last().expect("series has at least k = 0")
    }

    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("non-empty series")
    }

    /// `|cos_k - companion_k|` at the last hop, if there is a companion.
    pub fn final_gap(&self) -> Option<f64> {
        self.companion
            .as_ref()
            .map(|c| (self.cos_k.last().unwrap() - c.cos_k.last().unwrap()).abs())
    }
}

/// `cos(A^k x, y)` for `k = 0..=k_max` with per-hop unit rescaling.
pub fn alignment_cosines(graph: &Graph, x: &[f64], y: &[f64], k_max: usize) -> Result<Vec<f64>> {
    let n = graph.n();
    if x.len() != n || y.len() != n {
        return Err(FairgeError::DimensionMismatch(format!(
            "vectors must have length {n}"
        )));
    }
    let nx = norm(x);
    if nx == 0.0 {
        return Err(FairgeError::Degenerate("propagated vector is zero".into()));
    }
    let mut v: Vec<f64> = x.iter().map(|a| a / nx).collect();
    let mut next = vec![0.0; n];
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(cosine_alignment(&v, y)?);
    for k in 1..=k_max {
        graph.matvec_into(&v, &mut next);
        let nv = norm(&next);
        if nv == 0.0 {
            return Err(FairgeError::Degenerate(format!("A^{k} x vanishes")));
        }
        next.iter_mut().for_each(|a| *a /= nv);
        std::mem::swap(&mut v, &mut next);
        out.push(cosine_alignment(&v, y)?);
    }
    Ok(out)
}

/// Directions that `A^k x / |A^k x|` approaches along even and odd `k`.
struct LimitDirections {
    even: Vec<f64>,
    odd: Vec<f64>,
    oscillates: bool,
}

fn limit_directions(trunc: &SpectralTruncation, x: &[f64]) -> Result<LimitDirections> {
    let lambda1 = trunc.eigenvalues[0];
    if lambda1 == 0.0 {
        return Err(FairgeError::Degenerate("graph has no edges".into()));
    }
    let tied: Vec<usize> = (0..trunc.m())
        .take_while(|&i| magnitudes_tied(lambda1, trunc.eigenvalues[i]))
        .collect();
    let positive = tied.iter().filter(|&&i| trunc.eigenvalues[i] > 0.0).count();
    if positive > 1 {
        return Err(FairgeError::RepeatedDominant { multiplicity: positive });
    }
    let n = trunc.n();
    let (mut even, mut odd) = (vec![0.0; n], vec![0.0; n]);
    let mut oscillates = false;
    for &i in &tied {
        let p = trunc.vector(i);
        let c = dot(&p, x);
        let sign = if trunc.eigenvalues[i] > 0.0 {
            1.0
        } else {
            oscillates = true;
            -1.0
        };
        for r in 0..n {
            even[r] += c * p[r];
            odd[r] += sign * c * p[r];
        }
    }
    let scale = norm(x);
    if norm(&even) <= 1e-10 * scale || norm(&odd) <= 1e-10 * scale {
        return Err(FairgeError::Degenerate(
            "propagated vector has no component on the dominant eigenvector".into(),
        ));
    }
    Ok(LimitDirections { even, odd, oscillates })
}

struct SeriesCore {
    cos_k: Vec<f64>,
    even_limit: f64,
    odd_limit: f64,
    oscillates: bool,
    residuals: Vec<f64>,
}

fn series_core(graph: &Graph, trunc: &SpectralTruncation, x: &[f64], y: &[f64], k_max: usize) -> Result<SeriesCore> {
    if norm(y) == 0.0 {
        return Err(FairgeError::Degenerate("target vector is zero".into()));
    }
    let cos_k = alignment_cosines(graph, x, y, k_max)?;
    let dirs = limit_directions(trunc, x)?;
    let even_limit = cosine_alignment(&dirs.even, y)?;
    let odd_limit = cosine_alignment(&dirs.odd, y)?;
    let residuals = cos_k
        .iter()
        .enumerate()
        .map(|(k, c)| (c - if k % 2 == 0 { even_limit } else { odd_limit }).abs())
        .collect();
    Ok(SeriesCore {
        cos_k,
        even_limit,
        odd_limit,
        oscillates: dirs.oscillates,
        residuals,
    })
}

/// Leading eigenpairs used for limit predictions: enough to see a tie at
/// the top of the spectrum.
pub fn leading_pairs(graph: &Graph) -> Result<SpectralTruncation> {
    top_m_eigenpairs(graph, graph.n().min(4), EIG_TOL, EIG_MAX_ITER)
}

/// [`limit_check`] on explicit vectors: `h` complete, `h_obs` observed with
/// hidden entries zeroed.
pub fn limit_check_vectors(
    variant: Variant,
    graph: &Graph,
    h: &[f64],
    h_obs: &[f64],
    k_max: usize,
) -> Result<AlignmentSeries> {
    let trunc = leading_pairs(graph)?;
    limit_check_with(variant, graph, &trunc, h, h_obs, k_max)
}

/// As [`limit_check_vectors`] with precomputed leading eigenpairs.
pub fn limit_check_with(
    variant: Variant,
    graph: &Graph,
    trunc: &SpectralTruncation,
    h: &[f64],
    h_obs: &[f64],
    k_max: usize,
) -> Result<AlignmentSeries> {
    if trunc.m() < 2 && graph.n() >= 2 {
        return Err(FairgeError::InvalidArgument(
            "limit predictions need at least two eigenpairs".into(),
        ));
    }
    let (x, y) = match variant {
        Variant::Lemma1 => (h, h),
        Variant::Thm1 => (h_obs, h_obs),
        Variant::Thm2 => (h, h_obs),
        Variant::Thm3 => (h_obs, h),
    };
    let core = series_core(graph, trunc, x, y, k_max)?;
    let companion = if variant == Variant::Thm3 {
        let c = series_core(graph, trunc, h, h, k_max)?;
        Some(Companion {
            cos_k: c.cos_k,
            limit: c.even_limit,
            residuals: c.residuals,
        })
    } else {
        None
    };
    let projections = (0..trunc.m()).map(|i| dot(&trunc.vector(i), x)).collect();
    Ok(AlignmentSeries {
        variant,
        k: (0..=k_max).collect(),
        cos_k: core.cos_k,
        limit: core.even_limit,
        residuals: core.residuals,
        oscillation: core.oscillates.then_some(Oscillation {
            even_limit: core.even_limit,
            odd_limit: core.odd_limit,
        }),
        companion,
        eigenvalues: trunc.eigenvalues.clone(),
        projections,
    })
}

/// `(H, H')` as real vectors: ground-truth values, and values with hidden
/// entries replaced by zero.
pub fn sensitive_vectors(sensitive: &SensitiveColumn) -> (Vec<f64>, Vec<f64>) {
    let h: Vec<f64> = sensitive.values().iter().map(|&v| f64::from(v)).collect();
    let h_obs = h
        .iter()
        .zip(sensitive.present())
        .map(|(&v, &p)| if p { v } else { 0.0 })
        .collect();
    (h, h_obs)
}

/// Cosine sequence of `variant` for `k = 0..=k_max` with its predicted limit
/// and per-hop residuals.
pub fn limit_check(variant: Variant, graph: &Graph, sensitive: &SensitiveColumn, k_max: usize) -> Result<AlignmentSeries> {
    if sensitive.len() != graph.n() {
        return Err(FairgeError::DimensionMismatch(format!(
            "{} sensitive entries for {} nodes",
            sensitive.len(),
            graph.n()
        )));
    }
    let (h, h_obs) = sensitive_vectors(sensitive);
    limit_check_vectors(variant, graph, &h, &h_obs, k_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRate {
    /// Geometric mean of successive residual ratios over the fitted window.
    pub empirical: f64,
    /// `|lambda_2 / lambda_1|`.
    pub predicted: f64,
    /// First and last hop of the fitted window.
    pub window: (usize, usize),
    /// `log10` of the largest over the smallest residual in the usable run.
    pub decades: f64,
}

impl DecayRate {
    pub fn relative_error(&self) -> f64 {
        (self.empirical - self.predicted).abs() / self.predicted
    }
}

/// Fits the geometric decay of `series.residuals`. The usable run is the
/// longest stretch of consecutive residuals above [`RESIDUAL_FLOOR`]; the
/// rate is fitted over its second half, where the leading term dominates.
pub fn estimate_decay_rate(series: &AlignmentSeries, trunc: &SpectralTruncation) -> Result<DecayRate> {
    if trunc.m() < 2 || trunc.eigenvalues[0] == 0.0 {
        return Err(FairgeError::InvalidArgument(
            "decay prediction needs two eigenvalues and a nonzero dominant one".into(),
        ));
    }
    let predicted = (trunc.eigenvalues[1] / trunc.eigenvalues[0]).abs();
    let r = &series.residuals;
    let (mut best, mut start) = ((0, 0), None);
    for (i, &v) in r.iter().enumerate() {
        if v > RESIDUAL_FLOOR {
            let s = *start.get_or_insert(i);
            if i + 1 - s > best.1 - best.0 {
                best = (s, i + 1);
            }
        } else {
            start = None;
        }
    }
    let (lo, hi) = best;
    if hi - lo < 5 {
        return Err(FairgeError::NotEstimable(format!(
            "only {} consecutive residuals above {RESIDUAL_FLOOR:e}",
            hi - lo
        )));
    }
    let run = &r[lo..hi];
    let max = run.iter().cloned().fold(f64::MIN, f64::max);
    let min = run.iter().cloned().fold(f64::MAX, f64::min);
    let first = lo + (hi - lo) / 2;
    let first = first.min(hi - 5);
    let last = hi - 1;
    let empirical = (r[last] / r[first]).powf(1.0 / (last - first) as f64);
    Ok(DecayRate {
        empirical,
        predicted,
        window: (series.k[first], series.k[last]),
        decades: (max / min).log10(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityBound {
    /// Number of eigenvalues equal to the dominant one.
    pub multiplicity: usize,
    /// `cos(A^k H', H')` at `k = k_max`.
    pub lhs: f64,
    /// Exact limit of the left side: the norm of the projection of `H'` on
    /// the dominant eigenspace over `|H'|`.
    pub lhs_limit: f64,
    /// `(1 / sqrt(j)) * sum_i cos(H', p_i)` over the dominant eigenvectors.
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `lim cos(A^k H', H') >= (1/sqrt(j)) sum_{i<=j} cos(H', p_i)` for a
/// graph whose dominant eigenvalue has multiplicity `j >= 2`, using the dense
/// decomposition for the eigenspace basis.
pub fn multiplicity_bound_check(graph: &Graph, h_obs: &[f64], k_max: usize) -> Result<MultiplicityBound> {
    let dense = dense_eigendecomposition(graph)?;
    let j = dense.dominant_multiplicity();
    if dense.eigenvalues[..j].iter().any(|&l| l <= 0.0) {
        return Err(FairgeError::InvalidArgument(
            "dominant magnitude is shared by a negative eigenvalue; the sequence oscillates".into(),
        ));
    }
    if j < 2 {
        return Err(FairgeError::InvalidArgument(
            "dominant eigenvalue is simple; use limit_check".into(),
        ));
    }
    let h_norm = norm(h_obs);
    if h_norm == 0.0 {
        return Err(FairgeError::Degenerate("sensitive vector is zero".into()));
    }
    let gammas: Vec<f64> = (0..j).map(|i| dot(&dense.vector(i), h_obs)).collect();
    let captured = norm(&gammas);
    if captured <= 1e-10 * h_norm {
        return Err(FairgeError::Degenerate(
            "sensitive vector is orthogonal to the dominant eigenspace; inconclusive".into(),
        ));
    }
    let lhs = *alignment_cosines(graph, h_obs, h_obs, k_max)?.last().unwrap();
    let rhs = gammas.iter().sum::<f64>() / (h_norm * (j as f64).sqrt());
    Ok(MultiplicityBound {
        multiplicity: j,
        lhs,
        lhs_limit: captured / h_norm,
        rhs,
        holds: lhs >= rhs - BOUND_SLACK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn k3_thm1_values() {
        let s = SensitiveColumn::complete(vec![1, 0, 1]);
        let series = limit_check(Variant::Thm1, &k3(), &s, 30).unwrap();
        assert!((series.cos_k[1] - 0.57735).abs() < 1e-5);
        assert!((series.cos_k[2] - 0.90453).abs() < 1e-5);
        assert!((series.limit - 2.0 / 6f64.sqrt()).abs() < 1e-12);
        assert!(series.final_residual() <= 1e-8);
        assert!(series.oscillation.is_none());
    }

    #[test]
    fn k3_thm3_masked() {
        let s = SensitiveColumn::new(vec![1, 0, 1], vec![true, true, false]).unwrap();
        let series = limit_check(Variant::Thm3, &k3(), &s, 30).unwrap();
        let c = series.companion.as_ref().unwrap();
        assert!((series.limit - 0.81650).abs() < 1e-5);
        assert!((c.limit - 0.81650).abs() < 1e-5);
        assert!(series.final_gap().unwrap() <= 1e-8);
    }

    #[test]
    fn eigenvector_is_fixed_point() {
        let g = k3();
        let p1 = vec![1.0 / 3f64.sqrt(); 3];
        let series = limit_check_vectors(Variant::Lemma1, &g, &p1, &p1, 10).unwrap();
        assert!(series.cos_k.iter().all(|c| (c - 1.0).abs() < 1e-15));
        let trunc = leading_pairs(&g).unwrap();
        assert!(matches!(
            estimate_decay_rate(&series, &trunc),
            Err(FairgeError::NotEstimable(_))
        ));
    }

    #[test]
    fn k3_decay_rate() {
        let g = k3();
        let s = SensitiveColumn::complete(vec![1, 0, 1]);
        let series = limit_check(Variant::Thm1, &g, &s, 40).unwrap();
        let rate = estimate_decay_rate(&series, &leading_pairs(&g).unwrap()).unwrap();
        assert!((rate.predicted - 0.5).abs() < 1e-12);
        assert!(rate.relative_error() < 0.05, "{rate:?}");
    }

    #[test]
    fn repeated_dominant_redirects() {
        let two = Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        let s = SensitiveColumn::complete(vec![1, 1, 1, 0, 0, 0]);
        assert!(matches!(
            limit_check(Variant::Thm1, &two, &s, 20),
            Err(FairgeError::RepeatedDominant { multiplicity: 2 })
        ));
        let b = multiplicity_bound_check(&two, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0], 40).unwrap();
        assert_eq!(b.multiplicity, 2);
        assert!(b.holds);
        assert!((b.lhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bipartite_oscillates() {
        let path = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let h = [1.0, 0.0, 0.0, 0.0];
        let series = limit_check_vectors(Variant::Lemma1, &path, &h, &h, 60).unwrap();
        let osc = series.oscillation.unwrap();
        assert!((osc.even_limit - osc.odd_limit).abs() > 1e-3);
        assert!(series.final_residual() < 1e-8);
    }

    #[test]
    fn degenerate_inputs() {
        let g = k3();
        let zero = [0.0; 3];
        let h = [1.0, 0.0, 1.0];
        assert!(matches!(
            limit_check_vectors(Variant::Thm1, &g, &h, &zero, 5),
            Err(FairgeError::Degenerate(_))
        ));
        // Orthogonal to p1: no dominant component.
        let orth = [1.0, -1.0, 0.0];
        assert!(matches!(
            limit_check_vectors(Variant::Lemma1, &g, &orth, &orth, 5),
            Err(FairgeError::Degenerate(_))
        ));
        assert_eq!("THM2".parse::<Variant>().unwrap(), Variant::Thm2);
        assert!("thm9".parse::<Variant>().is_err());
    }

    #[test]
    fn simple_dominant_rejected_by_bound_check() {
        assert!(multiplicity_bound_check(&k3(), &[1.0, 0.0, 1.0], 10).is_err());
    }
}
