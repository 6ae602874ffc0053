//! Pairwise mini-batch training with early stopping on validation MAP.

use std::io::Write;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adadelta::{AdadeltaConfig, AdadeltaState};
use super::features::{GatingInput, QueryFeatures};
use super::histogram::HistogramConfig;
use super::model::DrmmModel;
use super::network::{accumulate_pair_gradient, ModelParams};
use super::pairs::sample_pairs;
use crate::error::{Error, Result};
use crate::eval::{average_precision, Qrels};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Pairs per mini-batch.
    pub batch_size: usize,
    /// Negatives sampled per relevant unit.
    pub negatives: usize,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub hidden: Vec<usize>,
    pub adadelta: AdadeltaConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            negatives: 4,
            max_epochs: 50,
            patience: 5,
            hidden: vec![5, 5],
            adadelta: AdadeltaConfig::default(),
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.negatives == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "batch_size, negatives and max_epochs must be positive".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        let AdadeltaConfig { rho, epsilon } = self.adadelta;
        if !(0.0..1.0).contains(&rho) || epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::Config("adadelta needs 0 <= rho < 1 and epsilon > 0".into()));
        }
        Ok(())
    }
}

/// Input layout of the model being trained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub histogram: HistogramConfig,
    pub gating_input: GatingInput,
    pub gating_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// `None` for epoch 0, the untrained model.
    pub mean_loss: Option<f64>,
    #[serde(rename = "val_MAP")]
    pub val_map: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_map: f64,
    pub pairs_per_epoch: usize,
    pub skipped_queries: Vec<String>,
}

impl TrainingLog {
    /// One JSON object per line, epochs in order.
    pub fn write_jsonl(&self, w: &mut impl Write) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n").map_err(|e| Error::io("<training log>", e))?;
        }
        Ok(())
    }

    pub fn initial_val_map(&self) -> f64 {
        self.records.first().map_or(0.0, |r| r.val_map)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: DrmmModel,
    pub log: TrainingLog,
}

/// MAP over the queries that have at least one relevant judgment, ranking
/// documents by their best unit.
pub fn mean_average_precision(
    params: &ModelParams,
    queries: &[QueryFeatures],
    qrels: &Qrels,
) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for q in queries {
        let relevant = qrels.relevant(&q.query_id);
        if relevant.is_empty() {
            continue;
        }
        let ranked = q.rank_documents(params)?;
        let ids: Vec<&str> = ranked.iter().map(|(d, _)| d.as_str()).collect();
        total += average_precision(&ids, &relevant);
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { total / n as f64 })
}

fn init_params(spec: ModelSpec, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> ModelParams {
    ModelParams::init(spec.histogram.num_bins, &cfg.hidden, spec.gating_dim, rng)
}

/// The parameters [`train`] starts from for this seed, i.e. the untrained
/// baseline.
pub fn initial_params(spec: ModelSpec, cfg: &TrainConfig) -> ModelParams {
    init_params(spec, cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}

/// Train on `train`, select the epoch with the best MAP on `validation`.
///
/// Sequential and deterministic for a given `cfg.seed`.
pub fn train(
    train: &[QueryFeatures],
    validation: &[QueryFeatures],
    qrels: &Qrels,
    spec: ModelSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    spec.histogram.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init_params(spec, cfg, &mut rng);
    let mut optimizer = AdadeltaState::new(cfg.adadelta, &params);

    let initial_map = mean_average_precision(&params, validation, qrels)?;
    let mut log = TrainingLog {
        records: vec![EpochRecord {
            epoch: 0,
            mean_loss: None,
            val_map: initial_map,
        }],
        best_epoch: 0,
        best_val_map: initial_map,
        ..Default::default()
    };
    let mut best = params.clone();
    let mut stale = 0usize;

    for epoch in 1..=cfg.max_epochs {
        let mut sample = sample_pairs(train, qrels, cfg.negatives, &mut rng);
        if sample.pairs.is_empty() {
            return Err(Error::NoTrainingPairs);
        }
        if epoch == 1 {
            log.pairs_per_epoch = sample.pairs.len();
            log.skipped_queries = std::mem::take(&mut sample.skipped_queries);
        }
        sample.pairs.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut grads = params.zeros_like();
        for batch in sample.pairs.chunks(cfg.batch_size) {
            grads.scale(0.0);
            let weight = 1.0 / batch.len() as f64;
            for pair in batch {
                loss_sum += accumulate_pair_gradient(&params, &pair.input(train), weight, &mut grads)?;
            }
            if !loss_sum.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("loss became {loss_sum}"),
                });
            }
            optimizer.step(&mut params, &grads)?;
            if !params.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: "non-finite parameter after update".into(),
                });
            }
        }
        let mean_loss = loss_sum / sample.pairs.len() as f64;
        let val_map = mean_average_precision(&params, validation, qrels)?;
        debug!("epoch {epoch}: loss {mean_loss:.5} val MAP {val_map:.4}");
        log.records.push(EpochRecord {
            epoch,
            mean_loss: Some(mean_loss),
            val_map,
        });
        if val_map > log.best_val_map {
            log.best_val_map = val_map;
            log.best_epoch = epoch;
            best = params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    info!(
        "training done: best epoch {} of {}, val MAP {:.4}",
        log.best_epoch,
        log.records.len() - 1,
        log.best_val_map
    );

    let model = DrmmModel {
        histogram: spec.histogram,
        gating_input: spec.gating_input,
        gating_dim: spec.gating_dim,
        params: best,
    };
    model.validate()?;
    Ok(TrainOutcome { model, log })
}
