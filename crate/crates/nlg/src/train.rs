use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use taskcorpus_tensor::TensorError;

use crate::error::{NlgError, Result};
use crate::loss::{loss, loss_and_gradient};
use crate::model::{EncodedPair, NlgModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
    /// Global gradient-norm ceiling; `0` or negative disables clipping.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 100,
            batch_size: 8,
            rng_seed: 0,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NlgError::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(NlgError::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Training-set mean token loss after each epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub epochs: Vec<f64>,
}

impl LossTrace {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.epochs.last().copied()
    }

    /// Two tab-separated columns: 1-based epoch, mean loss.
    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "epoch\tmean_loss")?;
        for (i, l) in self.epochs.iter().enumerate() {
            writeln!(w, "{}\t{l:.17e}", i + 1)?;
        }
        Ok(())
    }
}

/// Mini-batch gradient descent with global-norm clipping. Batches are
/// reshuffled every epoch from `rng_seed`. Calls `on_epoch(epoch, loss)`
/// after each epoch; returning `false` stops early.
pub fn train_with(
    model: &mut NlgModel,
    pairs: &[EncodedPair],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64) -> bool,
) -> Result<LossTrace> {
    if pairs.is_empty() {
        return Err(NlgError::EmptyTrainingSet);
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut trace = LossTrace::default();
    let mut batch = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| pairs[i].clone()));
            let (l, mut grads) = loss_and_gradient(model, &batch).map_err(|e| non_finite(e, epoch, b))?;
            if !l.is_finite() || !grads.is_finite() {
                return Err(NlgError::NonFiniteLoss { epoch, batch: b });
            }
            if config.clip_norm > 0.0 {
                let norm = grads.l2_norm();
                if norm > config.clip_norm {
                    grads.scale(config.clip_norm / norm);
                }
            }
            model.params.add_scaled(-config.learning_rate, &grads);
        }
        let batches = order.len().div_ceil(config.batch_size);
        let l = loss(model, pairs).map_err(|e| non_finite(e, epoch, batches))?;
        if !l.is_finite() {
            return Err(NlgError::NonFiniteLoss { epoch, batch: batches });
        }
        trace.epochs.push(l);
        if !on_epoch(epoch, l) {
            break;
        }
    }
    Ok(trace)
}

fn non_finite(e: NlgError, epoch: usize, batch: usize) -> NlgError {
    match e {
        NlgError::Tensor(TensorError::NonFinite(_)) => NlgError::NonFiniteLoss { epoch, batch },
        e => e,
    }
}

pub fn train(model: &mut NlgModel, pairs: &[EncodedPair], config: &TrainConfig) -> Result<LossTrace> {
    train_with(model, pairs, config, |_, _| true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::vocab::Vocab;

    fn setup() -> (NlgModel, Vec<EncodedPair>) {
        let cfg = ModelConfig {
            embed_dim: 4,
            hidden: 4,
            decoder_hidden: 4,
            ..ModelConfig::default()
        };
        let m = NlgModel::new(cfg, Vocab::from_tokens(["a", "b"]), Vocab::from_tokens(["x", "y"]), 1).unwrap();
        let pairs = vec![
            EncodedPair {
                input: vec![4, 2],
                target: vec![4, 5, 2],
            },
            EncodedPair {
                input: vec![5, 2],
                target: vec![5, 2],
            },
        ];
        (m, pairs)
    }

    #[test]
    fn zero_epochs_is_identity() {
        let (mut m, pairs) = setup();
        let before = m.clone();
        let trace = train(
            &mut m,
            &pairs,
            &TrainConfig {
                epochs: 0,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        assert!(trace.is_empty());
        assert_eq!(m, before);
    }

    #[test]
    fn deterministic_and_decreasing() {
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 2,
            learning_rate: 0.3,
            ..TrainConfig::default()
        };
        let (mut a, pairs) = setup();
        let (mut b, _) = setup();
        let ta = train(&mut a, &pairs, &cfg).unwrap();
        let tb = train(&mut b, &pairs, &cfg).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(a, b);
        assert!(ta.last().unwrap() < ta.epochs[0]);
        for w in ta.epochs.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?}", ta.epochs);
        }
    }

    #[test]
    fn rejects_empty_and_bad_config() {
        let (mut m, pairs) = setup();
        assert!(matches!(
            train(&mut m, &[], &TrainConfig::default()),
            Err(NlgError::EmptyTrainingSet)
        ));
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(train(&mut m, &pairs, &bad).is_err());
    }

    #[test]
    fn huge_learning_rate_without_clipping_reports_non_finite() {
        let (mut m, pairs) = setup();
        let cfg = TrainConfig {
            learning_rate: 1e300,
            clip_norm: 0.0,
            epochs: 5,
            ..TrainConfig::default()
        };
        let r = train(&mut m, &pairs, &cfg);
        assert!(matches!(r, Err(NlgError::NonFiniteLoss { .. })), "{r:?}");
    }

    #[test]
    fn trace_file_has_two_columns() {
        let trace = LossTrace {
            epochs: vec![1.5, 0.25],
        };
        let mut buf = Vec::new();
        trace.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1\t1.5"));
        assert!(lines[2].split('\t').count() == 2);
    }
}
