//! End-to-end run: mask, split, spectral truncation, training and
//! evaluation on the held-out test quarter.

use std::time::Instant;

use crate::config::TrainConfig;
use crate::data::{apply_missing_mask, make_split, Dataset, SensitiveColumn, Split};
use crate::error::{FairgeError, Result};
use crate::fairness::evaluate;
use crate::model::{forward, node_inputs, predict, train, ModelInputs, ModelParams, ModelShape, TrainHistory, TrainOptions};
use crate::report::FairnessReport;
use crate::spectral::{top_m_eigenpairs_with, LanczosOptions, SpectralTruncation};

/// Everything produced by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct Experiment {
    pub params: ModelParams,
    pub history: TrainHistory,
    pub report: FairnessReport,
    pub split: Split,
    pub truncation: SpectralTruncation,
    /// The sensitive column as the model saw it.
    pub observed: SensitiveColumn,
    pub predictions: Vec<u8>,
}

/// Observed sensitive column: the explicit `mask` when given, otherwise a
/// seeded mask at `config.missing_rate`.
pub fn observed_sensitive(dataset: &Dataset, config: &TrainConfig, mask: Option<&[usize]>) -> Result<SensitiveColumn> {
    let observed = match mask {
        Some(ids) => dataset.sensitive.with_missing(ids)?,
        None => apply_missing_mask(&dataset.sensitive, config.missing_rate, config.seed)?,
    };
    observed.ensure_any_present()?;
    Ok(observed)
}

/// Trains on `dataset` and evaluates fairness on the test split using the
/// ground-truth sensitive values.
pub fn run_experiment(dataset: &Dataset, name: &str, config: &TrainConfig, mask: Option<&[usize]>) -> Result<Experiment> {
    config.validate()?;
    let start = Instant::now();
    let n = dataset.graph.n();
    let observed = observed_sensitive(dataset, config, mask)?;
    let remainder = n - 2 * (n / 4);
    let split = make_split(n, config.train_size.unwrap_or(remainder), config.seed)?;
    if split.train.is_empty() || split.test.is_empty() {
        return Err(FairgeError::InvalidArgument(format!(
            "{n} nodes are too few for a train/validation/test split"
        )));
    }

    let truncation = top_m_eigenpairs_with(
        &dataset.graph,
        config.m.min(n),
        &LanczosOptions {
            tol: config.eig_tol,
            max_iter: config.eig_max_iter,
            seed: config.seed,
        },
    )?;
    let h0 = node_inputs(
        &dataset.graph,
        &dataset.attributes,
        &observed,
        config.k_hops,
        truncation.eigenvalues[0],
        config.sensitive_in_features,
    )?;
    if h0.cols() == 0 {
        return Err(FairgeError::InvalidArgument("no input features remain".into()));
    }
    let inputs = ModelInputs::new(&truncation, h0, config.d_m, config.spectral)?;
    let shape = ModelShape {
        d_in: inputs.h0.cols(),
        d_m: config.d_m,
        heads: config.heads,
        hidden: config.hidden,
        layers: config.layers,
    };
    let mut params = ModelParams::init(shape, config.seed)?;
    let labels = &dataset.labels.0;
    let history = train(
        &mut params,
        &inputs,
        labels,
        &split.train,
        &split.val,
        &TrainOptions {
            lr: config.lr,
            weight_decay: config.weight_decay,
            epochs: config.epochs,
        },
    )?;
    let logits = forward(&params, &inputs)?;
    if !logits.is_finite() {
        return Err(FairgeError::Divergence {
            epoch: config.epochs,
            loss: f64::NAN,
        });
    }
    let predictions = predict(&logits);
    let metrics = evaluate(&predictions, labels, dataset.sensitive.values(), &split.test)?;
    let report = FairnessReport::new(name, config, metrics, start.elapsed().as_secs_f64());
    Ok(Experiment {
        params,
        history,
        report,
        split,
        truncation,
        observed,
        predictions,
    })
}
