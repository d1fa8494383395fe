//! Minibatch SGD with momentum on softmax cross-entropy, with an optional
//! first stage that trains only the head.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::VisionError;
use crate::imaging::LabeledImage;
use crate::model::ClassifierModel;
use crate::split::DatasetSplit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    pub freeze_backbone_epochs: usize,
    /// Compute batch gradients on the rayon pool. Results are identical
    /// either way.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            seed: 0,
            freeze_backbone_epochs: 0,
            parallel: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), VisionError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(VisionError::Config("epochs and batch_size must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(VisionError::Config(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(VisionError::Config(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    /// Accuracy on the training batches seen during each epoch.
    pub train_curve: Vec<f64>,
    /// Accuracy on the validation set after each epoch (empty without one).
    pub val_curve: Vec<f64>,
    pub loss_curve: Vec<f64>,
}

pub fn accuracy(model: &ClassifierModel, images: &[LabeledImage]) -> Result<f64, VisionError> {
    if images.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for img in images {
        correct += (model.predict(img)?.label == img.label) as usize;
    }
    Ok(correct as f64 / images.len() as f64)
}

pub fn train(model: &mut ClassifierModel, data: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainReport, VisionError> {
    train_on(model, &data.train, &data.val, cfg)
}

pub fn train_on(
    model: &mut ClassifierModel,
    train: &[LabeledImage],
    val: &[LabeledImage],
    cfg: &TrainConfig,
) -> Result<TrainReport, VisionError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(VisionError::Dataset("training set is empty".into()));
    }
    for img in train.iter().chain(val) {
        model.check_input(img)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut velocity = vec![0.0; model.n_params()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = TrainReport::default();
    for epoch in 0..cfg.epochs {
        let frozen = epoch < cfg.freeze_backbone_epochs;
        model.frozen_backbone = frozen;
        let first = if frozen { model.backbone_len() } else { 0 };
        order.shuffle(&mut rng);
        let (mut correct, mut loss_sum) = (0usize, 0.0);
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let tensors: Vec<Vec<f64>> = idx.iter().map(|&i| train[i].tensor()).collect();
            let batch: Vec<(&[f64], usize)> =
                tensors.iter().zip(idx).map(|(t, &i)| (t.as_slice(), train[i].label.index())).collect();
            let g = model.loss_and_gradient(&batch, !frozen, cfg.parallel);
            let grad_norm = g.gradient.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !g.loss.is_finite() || !grad_norm.is_finite() {
                return Err(VisionError::NonFinite { epoch, batch: b, grad_norm });
            }
            correct += g.correct;
            loss_sum += g.loss * idx.len() as f64;
            let params = model.params_mut();
            for i in first..params.len() {
                velocity[i] = cfg.momentum * velocity[i] - cfg.learning_rate * g.gradient[i];
                params[i] += velocity[i];
            }
        }
        report.train_curve.push(correct as f64 / train.len() as f64);
        report.loss_curve.push(loss_sum / train.len() as f64);
        if !val.is_empty() {
            report.val_curve.push(accuracy(model, val)?);
        }
        log::info!(
            "epoch {epoch}: loss {:.4} train {:.4} val {:?}",
            report.loss_curve[epoch],
            report.train_curve[epoch],
            report.val_curve.last()
        );
    }
    model.frozen_backbone = false;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Architecture;
    use crate::synth::generate_synthetic_leaf;
    use aerogh_core::simcore::DiseaseClass;

    fn small() -> Architecture {
        Architecture { input_width: 64, input_height: 64, channels: vec![2, 2, 2], kernel: 3, hidden: 8 }
    }

    fn few() -> Vec<LabeledImage> {
        (0..6).map(|i| generate_synthetic_leaf(DiseaseClass::ALL[i % 3], i as u64)).collect()
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let mut m = ClassifierModel::new(small(), 1).unwrap();
        let before = m.clone();
        let cfg = TrainConfig { epochs: 3, batch_size: 4, learning_rate: 0.0, ..TrainConfig::default() };
        train_on(&mut m, &few(), &[], &cfg).unwrap();
        assert_eq!(m.params(), before.params());
    }

    #[test]
    fn frozen_stage_keeps_backbone_bits() {
        let mut m = ClassifierModel::new(small(), 1).unwrap();
        let before = m.params()[..m.backbone_len()].to_vec();
        let cfg = TrainConfig { epochs: 2, batch_size: 4, freeze_backbone_epochs: 2, ..TrainConfig::default() };
        train_on(&mut m, &few(), &[], &cfg).unwrap();
        assert_eq!(&m.params()[..m.backbone_len()], &before[..]);
        let head_changed = m.params()[m.backbone_len()..] != ClassifierModel::new(small(), 1).unwrap().params()[m.backbone_len()..];
        assert!(head_changed);
    }

    #[test]
    fn single_sample_overfits() {
        let mut m = ClassifierModel::new(small(), 2).unwrap();
        let one = vec![generate_synthetic_leaf(DiseaseClass::Drought, 7)];
        let cfg = TrainConfig { epochs: 50, batch_size: 1, ..TrainConfig::default() };
        let r = train_on(&mut m, &one, &[], &cfg).unwrap();
        assert_eq!(*r.train_curve.last().unwrap(), 1.0);
    }

    #[test]
    fn same_seed_same_weights() {
        let cfg = TrainConfig { epochs: 2, batch_size: 4, seed: 5, ..TrainConfig::default() };
        let mut a = ClassifierModel::new(small(), 1).unwrap();
        let mut b = ClassifierModel::new(small(), 1).unwrap();
        let ra = train_on(&mut a, &few(), &few(), &cfg).unwrap();
        let rb = train_on(&mut b, &few(), &few(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut m = ClassifierModel::new(small(), 1).unwrap();
        let n = m.n_params();
        m.params_mut()[n - 1] = f64::NAN;
        let cfg = TrainConfig { epochs: 1, batch_size: 4, ..TrainConfig::default() };
        assert!(matches!(train_on(&mut m, &few(), &[], &cfg), Err(VisionError::NonFinite { epoch: 0, batch: 0, .. })));
    }
}
