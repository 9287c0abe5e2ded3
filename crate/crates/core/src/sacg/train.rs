use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::SacgModel;
use crate::autodiff::{OptimizerState, UpdateRule};
use crate::classifier::{Classifier, Example};
use crate::error::{Error, Result};
use crate::eval::{self_bleu, transfer_accuracy};
use crate::syntax::{opposite, Style};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacgEpochRecord {
    pub epoch: usize,
    pub temperature: f64,
    pub loss: f64,
    pub loss_rec: f64,
    pub loss_cla: f64,
    pub val_accuracy: f64,
    pub val_self_bleu: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SacgLog {
    pub epochs: Vec<SacgEpochRecord>,
}

/// Trains the generator against a frozen classifier for the configured
/// number of epochs, calling `on_epoch` after each one.
pub fn train_sacg(
    model: &mut SacgModel,
    classifier: &Classifier,
    train: &[Example],
    dev: &[Example],
    mut on_epoch: impl FnMut(&SacgEpochRecord),
) -> Result<SacgLog> {
    if !classifier.is_frozen() {
        return Err(Error::NotFrozen);
    }
    if train.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    let cfg = model.config.clone();
    let mut opt = OptimizerState::new(cfg.learning_rate, UpdateRule::default())?.with_clip_norm(cfg.clip_norm);
    let mut rng = StdRng::seed_from_u64(cfg.seed.wrapping_add(0x5acc));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = SacgLog::default();
    for epoch in 1..=cfg.epochs {
        let temperature = (cfg.temperature * cfg.temperature_decay.powi(epoch as i32 - 1)).max(cfg.min_temperature);
        order.shuffle(&mut rng);
        let (mut loss, mut rec, mut cla) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train[i]).collect();
            let r = model.train_step(classifier, &batch, &mut opt, temperature, &mut rng)?;
            let w = batch.len() as f64;
            loss += r.loss * w;
            rec += r.loss_rec * w;
            cla += r.loss_cla * w;
        }
        let n = train.len() as f64;
        let (val_accuracy, val_self_bleu) = if dev.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            validate(model, classifier, dev)?
        };
        let record = SacgEpochRecord {
            epoch,
            temperature,
            loss: loss / n,
            loss_rec: rec / n,
            loss_cla: cla / n,
            val_accuracy,
            val_self_bleu,
        };
        on_epoch(&record);
        log.epochs.push(record);
    }
    Ok(log)
}

/// Transfer accuracy and self-BLEU of greedy transfers toward the opposite
/// style.
pub fn validate(model: &SacgModel, classifier: &Classifier, examples: &[Example]) -> Result<(f64, f64)> {
    let targets: Vec<Style> = examples.iter().map(|e| opposite(e.style)).collect();
    let outputs = model.transfer_corpus(examples, &targets)?;
    let acc = transfer_accuracy(classifier, &outputs, &targets, &model.grammar)?;
    let sources: Vec<Vec<String>> = examples.iter().map(|e| model.words(&e.ids)).collect();
    Ok((acc, self_bleu(&outputs, &sources)?))
}
