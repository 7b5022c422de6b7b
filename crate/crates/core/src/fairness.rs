//! Group fairness and utility metrics, computed by exact counting over an
//! evaluation index set using ground-truth sensitive values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{FairgeError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct GroupCounts {
    total: usize,
    predicted_positive: usize,
    actual_positive: usize,
    true_positive: usize,
}

impl GroupCounts {
    fn positive_rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.predicted_positive as f64 / self.total as f64)
    }

    fn true_positive_rate(&self) -> Option<f64> {
        (self.actual_positive > 0).then(|| self.true_positive as f64 / self.actual_positive as f64)
    }
}

fn check_lengths(yhat: &[u8], s_true: &[u32], y: Option<&[u8]>, eval_idx: &[usize]) -> Result<()> {
    let n = yhat.len();
    if s_true.len() != n || y.is_some_and(|y| y.len() != n) {
        return Err(FairgeError::DimensionMismatch(
            "predictions, labels and sensitive values differ in length".into(),
        ));
    }
    if let Some(&bad) = eval_idx.iter().find(|&&i| i >= n) {
        return Err(FairgeError::InvalidArgument(format!("eval index {bad} out of range")));
    }
    Ok(())
}

fn count_groups(yhat: &[u8], y: Option<&[u8]>, s_true: &[u32], eval_idx: &[usize]) -> BTreeMap<u32, GroupCounts> {
    let mut groups: BTreeMap<u32, GroupCounts> = BTreeMap::new();
    for &i in eval_idx {
        let g = groups.entry(s_true[i]).or_default();
        let pred = yhat[i] == 1;
        g.total += 1;
        g.predicted_positive += usize::from(pred);
        if let Some(y) = y {
            if y[i] == 1 {
                g.actual_positive += 1;
                g.true_positive += usize::from(pred);
            }
        }
    }
    groups
}

fn binary_groups(groups: &BTreeMap<u32, GroupCounts>) -> Result<(GroupCounts, GroupCounts)> {
    if let Some(other) = groups.keys().find(|&&k| k > 1) {
        return Err(FairgeError::InvalidArgument(format!(
            "binary metric given sensitive class {other}; use the multi-class variance metrics"
        )));
    }
    Ok((
        groups.get(&0).copied().unwrap_or_default(),
        groups.get(&1).copied().unwrap_or_default(),
    ))
}

/// `|P(yhat=1 | s=0) - P(yhat=1 | s=1)|` over `eval_idx`, as a fraction.
pub fn statistical_parity(yhat: &[u8], s_true: &[u32], eval_idx: &[usize]) -> Result<f64> {
    check_lengths(yhat, s_true, None, eval_idx)?;
    let (g0, g1) = binary_groups(&count_groups(yhat, None, s_true, eval_idx))?;
    match (g0.positive_rate(), g1.positive_rate()) {
        (Some(a), Some(b)) => Ok((a - b).abs()),
        _ => Err(FairgeError::UndefinedMetric(
            "statistical parity needs both sensitive groups in the evaluation set".into(),
        )),
    }
}

/// `|TPR(s=0) - TPR(s=1)|` over `eval_idx`, as a fraction.
pub fn equal_opportunity(yhat: &[u8], y: &[u8], s_true: &[u32], eval_idx: &[usize]) -> Result<f64> {
    check_lengths(yhat, s_true, Some(y), eval_idx)?;
    let (g0, g1) = binary_groups(&count_groups(yhat, Some(y), s_true, eval_idx))?;
    match (g0.true_positive_rate(), g1.true_positive_rate()) {
        (Some(a), Some(b)) => Ok((a - b).abs()),
        _ => Err(FairgeError::UndefinedMetric(
            "equal opportunity needs a positive label in both sensitive groups".into(),
        )),
    }
}

/// Population variance.
pub fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64
}

/// Multi-group parity: population variance of the per-group positive
/// prediction rates and of the per-group true positive rates. Groups with no
/// members (or no positives, for the TPR) are left out.
pub fn multiclass_variance_metrics(yhat: &[u8], y: &[u8], s_true: &[u32], eval_idx: &[usize]) -> Result<(f64, f64)> {
    check_lengths(yhat, s_true, Some(y), eval_idx)?;
    let groups = count_groups(yhat, Some(y), s_true, eval_idx);
    let rates: Vec<f64> = groups.values().filter_map(GroupCounts::positive_rate).collect();
    let tprs: Vec<f64> = groups.values().filter_map(GroupCounts::true_positive_rate).collect();
    if tprs.len() < groups.len() {
        log::warn!(
            "{} sensitive group(s) without positive labels left out of the TPR variance",
            groups.len() - tprs.len()
        );
    }
    if rates.len() < 2 || tprs.len() < 2 {
        return Err(FairgeError::UndefinedMetric(format!(
            "variance metrics need two usable groups ({} with members, {} with positives)",
            rates.len(),
            tprs.len()
        )));
    }
    Ok((population_variance(&rates), population_variance(&tprs)))
}

pub fn accuracy(yhat: &[u8], y: &[u8], eval_idx: &[usize]) -> Result<f64> {
    if yhat.len() != y.len() {
        return Err(FairgeError::DimensionMismatch(
            "predictions and labels differ in length".into(),
        ));
    }
    if eval_idx.is_empty() {
        return Err(FairgeError::UndefinedMetric("empty evaluation set".into()));
    }
    let correct = eval_idx.iter().filter(|&&i| yhat[i] == y[i]).count();
    Ok(correct as f64 / eval_idx.len() as f64)
}

/// Per-group rates as reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRate {
    pub group: u32,
    pub count: usize,
    pub positive_rate: Option<f64>,
    pub true_positive_rate: Option<f64>,
}

pub fn group_rates(yhat: &[u8], y: &[u8], s_true: &[u32], eval_idx: &[usize]) -> Result<Vec<GroupRate>> {
    check_lengths(yhat, s_true, Some(y), eval_idx)?;
    Ok(count_groups(yhat, Some(y), s_true, eval_idx)
        .into_iter()
        .map(|(group, c)| GroupRate {
            group,
            count: c.total,
            positive_rate: c.positive_rate(),
            true_positive_rate: c.true_positive_rate(),
        })
        .collect())
}

/// Accuracy plus the parity gaps. Binary sensitive attributes use the
/// absolute differences; more than two groups switch to the variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessMetrics {
    pub accuracy: f64,
    pub delta_sp: f64,
    pub delta_eo: f64,
    pub group_rates: Vec<GroupRate>,
}

pub fn evaluate(yhat: &[u8], y: &[u8], s_true: &[u32], eval_idx: &[usize]) -> Result<FairnessMetrics> {
    let group_rates = group_rates(yhat, y, s_true, eval_idx)?;
    let binary = group_rates.iter().all(|g| g.group <= 1);
    let (delta_sp, delta_eo) = if binary {
        (
            statistical_parity(yhat, s_true, eval_idx)?,
            equal_opportunity(yhat, y, s_true, eval_idx)?,
        )
    } else {
        multiclass_variance_metrics(yhat, y, s_true, eval_idx)?
    };
    Ok(FairnessMetrics {
        accuracy: accuracy(yhat, y, eval_idx)?,
        delta_sp,
        delta_eo,
        group_rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_by_hand() {
        let yhat = [1, 1, 0, 0, 1, 0, 0, 0];
        let s = [0, 0, 0, 0, 1, 1, 1, 1];
        let idx: Vec<usize> = (0..8).collect();
        assert_eq!(statistical_parity(&yhat, &s, &idx).unwrap(), 0.25);
        assert_eq!(statistical_parity(&[1; 8], &s, &idx).unwrap(), 0.0);
        assert!(matches!(
            statistical_parity(&yhat, &[0; 8], &idx),
            Err(FairgeError::UndefinedMetric(_))
        ));
    }

    #[test]
    fn opportunity_by_hand() {
        // group0 positives predicted (1,1), group1 positives predicted (1,0)
        let yhat = [1, 1, 0, 1, 0, 1];
        let y = [1, 1, 0, 1, 1, 0];
        let s = [0, 0, 0, 1, 1, 1];
        let idx: Vec<usize> = (0..6).collect();
        assert_eq!(equal_opportunity(&yhat, &y, &s, &idx).unwrap(), 0.5);
        assert_eq!(equal_opportunity(&y, &y, &s, &idx).unwrap(), 0.0);
        assert_eq!(equal_opportunity(&[0; 6], &y, &s, &idx).unwrap(), 0.0);
        assert!(equal_opportunity(&yhat, &[1, 1, 0, 0, 0, 0], &s, &idx).is_err());
    }

    #[test]
    fn variance_by_hand() {
        assert_eq!(population_variance(&[0.5, 0.25]), 0.015625);
        assert!((population_variance(&[1.0, 0.0, 0.5]) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(population_variance(&[0.3, 0.3, 0.3]), 0.0);
    }

    #[test]
    fn multiclass_two_groups_match_binary() {
        let yhat = [1, 1, 0, 0, 1, 0, 0, 0];
        let y = [1, 0, 1, 0, 1, 1, 0, 0];
        let s = [0, 0, 0, 0, 1, 1, 1, 1];
        let idx: Vec<usize> = (0..8).collect();
        let (v_sp, v_eo) = multiclass_variance_metrics(&yhat, &y, &s, &idx).unwrap();
        let sp = statistical_parity(&yhat, &s, &idx).unwrap();
        let eo = equal_opportunity(&yhat, &y, &s, &idx).unwrap();
        assert!((v_sp - (sp / 2.0).powi(2)).abs() < 1e-15);
        assert!((v_eo - (eo / 2.0).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn multiclass_needs_two_groups() {
        let idx: Vec<usize> = (0..3).collect();
        assert!(multiclass_variance_metrics(&[1, 0, 1], &[1, 1, 0], &[2, 2, 2], &idx).is_err());
    }

    #[test]
    fn accuracy_by_hand() {
        let idx: Vec<usize> = (0..4).collect();
        assert_eq!(accuracy(&[1, 0, 1, 1], &[1, 0, 1, 1], &idx).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1, 0, 0], &[1, 0, 1, 1], &idx).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 0, 1, 0], &[1, 0, 1, 1], &idx).unwrap(), 0.75);
    }

    #[test]
    fn binary_metric_rejects_multiclass() {
        assert!(statistical_parity(&[1, 0, 1], &[0, 1, 2], &[0, 1, 2]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn swap_and_permutation_invariance(
            cells in proptest::collection::vec((0u8..2, 0u8..2, 0u32..2), 4..40),
            rot in 0usize..40,
        ) {
            let yhat: Vec<u8> = cells.iter().map(|c| c.0).collect();
            let y: Vec<u8> = cells.iter().map(|c| c.1).collect();
            let s: Vec<u32> = cells.iter().map(|c| c.2).collect();
            let idx: Vec<usize> = (0..cells.len()).collect();
            let swapped: Vec<u32> = s.iter().map(|v| 1 - v).collect();
            if let Ok(a) = statistical_parity(&yhat, &s, &idx) {
                proptest::prop_assert_eq!(a, statistical_parity(&yhat, &swapped, &idx).unwrap());
                let mut order = idx.clone();
                order.rotate_left(rot % cells.len());
                proptest::prop_assert_eq!(a, statistical_parity(&yhat, &s, &order).unwrap());
            }
            if let Ok(a) = equal_opportunity(&yhat, &y, &s, &idx) {
                proptest::prop_assert_eq!(a, equal_opportunity(&yhat, &y, &swapped, &idx).unwrap());
            }
        }
    }
}
