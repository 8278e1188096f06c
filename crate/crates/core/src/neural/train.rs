use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{accumulate_gradient, argmax, forward_pass, CnnBank, CnnModel, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::scenario::{derive_seed, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainHyper {
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            momentum: 0.9,
            batch: 32,
            epochs: 100,
            seed: 1,
        }
    }
}

/// One image with the optimal EC of every flow row (`None` = uncached).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub image: Vec<f64>,
    pub labels: Vec<Option<usize>>,
}

impl From<&Sample> for TrainSample {
    fn from(s: &Sample) -> Self {
        Self {
            image: s.image.clone(),
            labels: s.label.placement.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelReport {
    /// Entry 0 is the loss before training; entry `i` the mean over epoch `i`.
    pub train_loss: Vec<f64>,
    /// Held-out loss before training and after every epoch.
    pub test_loss: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Samples skipped because the flow is uncached in the optimum.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub hyper: Option<TrainHyper>,
    pub models: Vec<ModelReport>,
}

impl TrainReport {
    pub fn mean_test_accuracy(&self) -> f64 {
        self.models.iter().map(|m| m.test_accuracy).sum::<f64>() / self.models.len().max(1) as f64
    }
}

fn labelled(samples: &[TrainSample], row: usize) -> Vec<(&[f64], usize)> {
    samples
        .iter()
        .filter_map(|s| s.labels.get(row).copied().flatten().map(|e| (s.image.as_slice(), e)))
        .collect()
}

fn evaluate(model: &CnnModel, data: &[(&[f64], usize)]) -> (f64, f64) {
    if data.is_empty() {
        return (0.0, 0.0);
    }
    let layout = model.arch.layout();
    let mut loss = 0.0;
    let mut hits = 0usize;
    for &(img, label) in data {
        let p = forward_pass(&layout, &model.params, img).probs;
        loss -= p[label].max(PROB_FLOOR).ln();
        hits += usize::from(argmax(&p) == label);
    }
    let n = data.len() as f64;
    (loss / n, hits as f64 / n)
}

/// Trains one model on flow row `row` with momentum SGD.
pub fn train_model(model: &mut CnnModel, row: usize, train: &[TrainSample], test: &[TrainSample], hyper: &TrainHyper) -> ModelReport {
    let data = labelled(train, row);
    let held = labelled(test, row);
    for &(img, _) in data.iter().chain(&held) {
        assert_eq!(img.len(), model.arch.pixels(), "image shape does not match the model");
    }
    let layout = model.arch.layout();
    let mut report = ModelReport {
        skipped: train.len() - data.len(),
        ..Default::default()
    };
    report.train_loss.push(evaluate(model, &data).0);
    report.test_loss.push(evaluate(model, &held).0);

    let mut velocity = vec![0.0; layout.params];
    let mut grad = vec![0.0; layout.params];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let batch = hyper.batch.max(1);
    for epoch in 0..hyper.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(hyper.seed, (row as u64) << 32 | epoch as u64));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            grad.fill(0.0);
            for &i in chunk {
                let (img, label) = data[i];
                epoch_loss += accumulate_gradient(&layout, &model.params, img, label, &mut grad);
            }
            let scale = hyper.lr / chunk.len() as f64;
            for ((p, v), g) in model.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = hyper.momentum * *v - scale * g;
                *p += *v;
            }
        }
        report.train_loss.push(if data.is_empty() { 0.0 } else { epoch_loss / data.len() as f64 });
        report.test_loss.push(evaluate(model, &held).0);
    }
    report.train_accuracy = evaluate(model, &data).1;
    report.test_accuracy = evaluate(model, &held).1;
    report
}

/// Trains every model of the bank on its own flow's labels, models in
/// parallel. Deterministic for a given seed regardless of thread count.
pub fn train_bank(bank: &CnnBank, train: &[TrainSample], test: &[TrainSample], hyper: &TrainHyper) -> Result<(CnnBank, TrainReport)> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let pixels = bank.arch.pixels();
    if let Some(bad) = train.iter().chain(test).find(|s| s.image.len() != pixels) {
        return Err(Error::ShapeMismatch(format!(
            "sample image has {} entries, bank expects {pixels}",
            bad.image.len()
        )));
    }
    let mut out = bank.clone();
    let reports: Vec<ModelReport> = out
        .models
        .par_iter_mut()
        .enumerate()
        .map(|(row, model)| train_model(model, row, train, test, hyper))
        .collect();
    out.epoch += hyper.epochs;
    Ok((
        out,
        TrainReport {
            hyper: Some(*hyper),
            models: reports,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{init_bank, Architecture};
    use rand::Rng;

    fn tiny() -> Architecture {
        Architecture {
            input_rows: 2,
            input_cols: 5,
            conv_channels: vec![2],
            hidden: vec![8],
            outputs: 3,
        }
    }

    fn random_samples(n: usize, seed: u64) -> Vec<TrainSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| TrainSample {
                image: (0..10).map(|_| rng.gen_range(0.0..1.0)).collect(),
                labels: vec![Some(rng.gen_range(0..3)), None],
            })
            .collect()
    }

    #[test]
    fn zero_epochs_leave_bank_unchanged() {
        let bank = init_bank(&tiny(), 2, 4).unwrap();
        let data = random_samples(5, 1);
        let hyper = TrainHyper {
            epochs: 0,
            ..Default::default()
        };
        let (trained, report) = train_bank(&bank, &data, &[], &hyper).unwrap();
        assert_eq!(trained, bank);
        assert_eq!(report.models[0].train_loss.len(), 1);
        assert!(report.models[0].train_loss[0] > 0.0);
        assert_eq!(report.models[1].skipped, 5);
    }

    #[test]
    fn empty_dataset_rejected() {
        let bank = init_bank(&tiny(), 2, 4).unwrap();
        assert!(matches!(train_bank(&bank, &[], &[], &TrainHyper::default()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn memorises_a_single_sample() {
        let bank = init_bank(&tiny(), 1, 4).unwrap();
        let data = random_samples(1, 2);
        let hyper = TrainHyper {
            epochs: 500,
            lr: 0.05,
            ..Default::default()
        };
        let (trained, report) = train_bank(&bank, &data, &[], &hyper).unwrap();
        assert!(*report.models[0].train_loss.last().unwrap() < 0.01);
        let p = trained.models[0].forward(&data[0].image).unwrap();
        assert_eq!(Some(argmax(&p)), data[0].labels[0]);
    }

    #[test]
    fn training_is_deterministic() {
        let bank = init_bank(&tiny(), 2, 4).unwrap();
        let data = random_samples(40, 3);
        let hyper = TrainHyper {
            epochs: 3,
            batch: 8,
            ..Default::default()
        };
        let a = train_bank(&bank, &data, &data[..5], &hyper).unwrap();
        let b = train_bank(&bank, &data, &data[..5], &hyper).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.epoch, 3);
    }
}
