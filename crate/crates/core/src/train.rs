//! Minibatch training loop with optional DCT augmentation and a per-epoch
//! CSV log.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{DatasetKind, RunConfig};
use crate::data::{self, channel_mean, split_validation, Dataset, TrainTest};
use crate::dct::augment_batch;
use crate::error::{Error, Result};
use crate::metrics::accuracy;
use crate::model::Model;
use crate::network::{softmax_cross_entropy, Network};
use crate::optim::{Schedule, Sgd};
use crate::tensor::Tensor;

pub const LOG_HEADER: [&str; 5] = ["epoch", "split", "loss", "top1", "lr"];

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub split: &'static str,
    pub loss: f64,
    pub top1: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<LogRow>,
    pub test_top1: f64,
}

/// Loads the configured dataset with its limits applied.
pub fn load_data(cfg: &RunConfig) -> Result<TrainTest> {
    let dir = cfg.data.dir();
    let full = match cfg.data.dataset {
        DatasetKind::Mnist => data::load_mnist(&dir)?,
        DatasetKind::Cifar10 => data::load_cifar10(&dir)?,
    };
    Ok(TrainTest {
        train: full.train.limit(cfg.data.train_limit),
        test: full.test.limit(cfg.data.test_limit),
    })
}

/// Mean loss and top-1 of `model` on `ds`.
pub fn evaluate(model: &Model, ds: &Dataset) -> Result<(f64, f64)> {
    let logits = model.logits(&ds.images)?;
    let loss = softmax_cross_entropy(&logits, &ds.labels)?.value;
    let preds = (0..logits.batch()).map(|i| crate::network::argmax(logits.item(i))).collect::<Vec<_>>();
    Ok((loss, accuracy(&preds, &ds.labels)?))
}

/// Trains a fresh network per `cfg` on `data`. Validation is carved out of
/// the training split when `val_fraction > 0`.
pub fn train(cfg: &RunConfig, data: &TrainTest, mut progress: impl FnMut(&LogRow)) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (train_set, val_set) = if cfg.data.val_fraction > 0.0 {
        let (t, v) = split_validation(&data.train, cfg.data.val_fraction, cfg.seed)?;
        (t, Some(v))
    } else {
        (data.train.clone(), None)
    };
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mean = channel_mean(&train_set.images);
    let net = Network::preset(
        cfg.net.preset()?,
        cfg.activation.spec()?,
        train_set.image_shape(),
        train_set.classes,
        cfg.net.widths(),
        cfg.seed,
    )?;
    let mut model = Model::new(net, mean)?;
    let mut opt = Sgd::new(
        cfg.optim.lr,
        cfg.optim.momentum,
        cfg.optim.l2,
        Schedule {
            milestones: cfg.optim.schedule.clone(),
        },
    )?;
    let policy = cfg.augment_policy();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut log = Vec::new();

    for epoch in 0..cfg.optim.epochs {
        let lr = opt.start_epoch(epoch);
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for batch_idx in order.chunks(cfg.optim.batch) {
            let mut x = train_set.images.select(batch_idx);
            if cfg.augment.dct {
                x = augment_batch(&x, batch_idx, &policy, epoch)?;
            }
            let x = model.prepare(&x)?;
            let labels: Vec<usize> = batch_idx.iter().map(|&i| train_set.labels[i]).collect();
            let logits = model.net.forward(&x)?;
            let loss = softmax_cross_entropy(&logits, &labels)?;
            if !loss.value.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
            }
            loss_sum += loss.value * labels.len() as f64;
            hits += (0..labels.len())
                .filter(|&i| crate::network::argmax(logits.item(i)) == labels[i])
                .count();
            model.net.backward(&loss)?;
            opt.step(&mut model.net)?;
        }
        let n = train_set.len() as f64;
        let row = LogRow {
            epoch,
            split: "train",
            loss: loss_sum / n,
            top1: hits as f64 / n,
            lr,
        };
        progress(&row);
        log.push(row);
        if let Some(val) = &val_set {
            let (loss, top1) = evaluate(&model, val)?;
            let row = LogRow {
                epoch,
                split: "val",
                loss,
                top1,
                lr,
            };
            progress(&row);
            log.push(row);
        }
    }
    let (loss, test_top1) = evaluate(&model, &data.test)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("test loss".into()));
    }
    let row = LogRow {
        epoch: cfg.optim.epochs - 1,
        split: "test",
        loss,
        top1: test_top1,
        lr: opt.lr(),
    };
    progress(&row);
    log.push(row);
    Ok(TrainOutcome { model, log, test_top1 })
}

pub fn write_log(rows: &[LogRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOG_HEADER)?;
    for r in rows {
        w.write_record([
            r.epoch.to_string(),
            r.split.to_string(),
            format!("{:.9}", r.loss),
            format!("{:.6}", r.top1),
            format!("{:.9}", r.lr),
        ])?;
    }
    w.flush().map_err(|e| Error::io("log", e))?;
    Ok(())
}

/// Writes `config.toml`, `model.lprl` and `train_log.csv` into `dir`.
pub fn save_run(dir: &Path, cfg: &RunConfig, outcome: &TrainOutcome) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, cfg.to_toml()).map_err(|e| Error::io(&cfg_path, e))?;
    outcome.model.save(dir.join("model.lprl"))?;
    let log_path = dir.join("train_log.csv");
    let file = std::fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    write_log(&outcome.log, file)
}

/// Dataset of `N×C×H×W` images in `[0, 1]` built in memory.
pub fn dataset_from(images: Tensor, labels: Vec<usize>, classes: usize) -> Result<Dataset> {
    Dataset::new(images, labels, classes, data::Split::Train)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::ActivationKind;
    use rand::Rng;

    // Two Gaussian blobs in 4-D, linearly separable.
    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let shift = if c == 0 { 0.3 } else { 0.7 };
            for _ in 0..4 {
                data.push(shift + rng.random_range(-0.1..0.1));
            }
            labels.push(c);
        }
        dataset_from(Tensor::new([n, 1, 2, 2], data).unwrap(), labels, 2).unwrap()
    }

    fn toy_config(kind: ActivationKind) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.net.preset = "mlp".into();
        cfg.net.hidden = 8;
        cfg.activation.kind = kind;
        cfg.optim.epochs = 5;
        cfg.optim.batch = 16;
        cfg.optim.lr = 0.05;
        cfg.optim.schedule.clear();
        cfg.data.val_fraction = 0.0;
        cfg
    }

    #[test]
    fn loss_decreases_on_separable_toy() {
        let data = TrainTest {
            train: blobs(200, 1),
            test: blobs(50, 2),
        };
        let mut cfg = toy_config(ActivationKind::Relu);
        cfg.optim.epochs = 100;
        cfg.optim.batch = 200;
        let out = train(&cfg, &data, |_| {}).unwrap();
        let losses: Vec<f64> = out.log.iter().filter(|r| r.split == "train").map(|r| r.loss).collect();
        assert_eq!(losses.len(), 100);
        assert!(losses[99] < losses[0] * 0.5, "{} -> {}", losses[0], losses[99]);
        assert!(out.test_top1 > 0.95);
    }

    #[test]
    fn identical_seed_is_bit_identical() {
        let data = TrainTest {
            train: blobs(64, 3),
            test: blobs(16, 4),
        };
        let cfg = toy_config(ActivationKind::LpRelu2);
        let a = train(&cfg, &data, |_| {}).unwrap();
        let b = train(&cfg, &data, |_| {}).unwrap();
        let ra = crate::checkpoint::network_records(&a.model.net);
        let rb = crate::checkpoint::network_records(&b.model.net);
        assert_eq!(ra, rb);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn log_has_expected_header() {
        let mut buf = Vec::new();
        write_log(
            &[LogRow {
                epoch: 0,
                split: "train",
                loss: 1.0,
                top1: 0.5,
                lr: 0.1,
            }],
            &mut buf,
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epoch,split,loss,top1,lr\n"));
    }
}
