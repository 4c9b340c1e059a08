use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::{class_counts, encode_all, lr_schedule, make_batches, pad_length, upsample_conflict, upsample_target};
use super::{TrainConfig, TrainError, Upsample};
use crate::ingest::{PolarityLabel, ReviewInstance};
use crate::model::{backward, forward, predict, AtpParams, EncodedInstance, Pretrained, Vocab};
use crate::nn::ParamSet;
use crate::Result;

/// Accuracy figures for one labelled set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Recall of each class; `None` for classes absent from the data.
    pub per_class: [Option<f64>; 4],
    /// Mean of the defined per-class accuracies.
    pub macro_accuracy: f64,
    /// `confusion[gold][predicted]`.
    pub confusion: [[usize; 4]; 4],
}

impl Evaluation {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (PolarityLabel, PolarityLabel)>) -> Self {
        let mut confusion = [[0usize; 4]; 4];
        for (gold, pred) in pairs {
            confusion[gold.code()][pred.code()] += 1;
        }
        let total: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..4).map(|k| confusion[k][k]).sum();
        let per_class: [Option<f64>; 4] = std::array::from_fn(|k| {
            let row: usize = confusion[k].iter().sum();
            (row > 0).then(|| confusion[k][k] as f64 / row as f64)
        });
        let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
        Evaluation {
            total,
            correct,
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            per_class,
            macro_accuracy: if defined.is_empty() {
                0.0
            } else {
                defined.iter().sum::<f64>() / defined.len() as f64
            },
            confusion,
        }
    }
}

pub fn evaluate_encoded(params: &AtpParams, data: &[EncodedInstance]) -> Result<Evaluation> {
    let pairs = data
        .iter()
        .map(|e| Ok((e.label, predict(params, e)?.label)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation::from_pairs(pairs))
}

pub fn evaluate(params: &AtpParams, config: &TrainConfig, data: &[ReviewInstance]) -> Result<Evaluation> {
    let enc = encode_all(params.vocab(), data, config, 0)?;
    evaluate_encoded(params, &enc)
}

/// Accuracy on `eval` of always predicting the most frequent class of `train`.
pub fn majority_baseline(train: &[ReviewInstance], eval: &[ReviewInstance]) -> f64 {
    let counts = class_counts(train);
    let mut best = 0;
    for k in 1..4 {
        if counts[k] > counts[best] {
            best = k;
        }
    }
    if eval.is_empty() {
        return 0.0;
    }
    eval.iter().filter(|i| i.label.code() == best).count() as f64 / eval.len() as f64
}

/// One line of training progress.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    /// `None` when there is no dev set.
    pub dev_accuracy: Option<f64>,
    /// Per-class accuracy on the dev set, or on the training set without one.
    pub per_class: [Option<f64>; 4],
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the best dev epoch, or of the last epoch without a dev set.
    pub params: AtpParams,
    pub reports: Vec<EpochReport>,
    pub best_epoch: usize,
}

/// Trains from scratch. Identical inputs and seed give bit-identical parameters.
pub fn train(
    config: &TrainConfig,
    train: &[ReviewInstance],
    dev: &[ReviewInstance],
    pretrained: Option<&Pretrained>,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyTrainingSet.into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let conflicts = class_counts(train)[PolarityLabel::Conflict.code()];
    let upsampled = match upsample_target(train, config.upsample) {
        Some(t) if config.upsample == Upsample::Auto && (conflicts == 0 || t < conflicts) => {
            warn!("auto upsampling skipped: {conflicts} conflict instances, target {t}");
            train.to_vec()
        }
        Some(t) => upsample_conflict(train, t, &mut rng)?,
        None => train.to_vec(),
    };
    info!(
        "training on {} instances (class counts {:?}), dev {}",
        upsampled.len(),
        class_counts(&upsampled),
        dev.len()
    );

    let vocab = Vocab::build(train, config.lowercase);
    let mut params = AtpParams::new(vocab, config.dims(), config.init_scale, &mut rng)?;
    if let Some(pre) = pretrained {
        let hits = params.word.load_pretrained(pre)?;
        info!("pretrained vectors for {hits} of {} words", params.vocab().len());
    }

    let pad_to = pad_length(config.max_len, train.iter().chain(dev))?;
    let train_enc = encode_all(params.vocab(), &upsampled, config, pad_to)?;
    let clean_train_enc = encode_all(params.vocab(), train, config, pad_to)?;
    let dev_enc = encode_all(params.vocab(), dev, config, pad_to)?;
    let dropout = config.dropout_config();

    let mut reports = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, AtpParams)> = None;
    for epoch in 0..config.epochs {
        let lr = lr_schedule(config.lr, config.lr_factor, config.lr_patience, epoch);
        let opt = config.optimizer(lr);
        let mut loss_sum = 0.0;
        for (b, batch) in make_batches(&train_enc, config.batch_size, &mut rng).into_iter().enumerate() {
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for enc in batch.iter() {
                let tr = forward(&params, enc, &dropout, true, &mut rng)?;
                batch_loss += backward(&mut params, &tr, enc.label, scale);
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::DivergenceDetected {
                    epoch,
                    batch: b,
                    loss: batch_loss,
                }
                .into());
            }
            loss_sum += batch_loss;
            for (name, p) in params.params_mut() {
                if config.freeze_embeddings && name == "word" {
                    p.zero_grad();
                } else {
                    opt.step(p);
                }
            }
            if let Some((name, _)) = params.params().into_iter().find(|(_, p)| !p.value.is_finite()) {
                warn!("parameter block {name} became non-finite");
                return Err(TrainError::DivergenceDetected {
                    epoch,
                    batch: b,
                    loss: f64::NAN,
                }
                .into());
            }
        }

        let train_eval = evaluate_encoded(&params, &clean_train_enc)?;
        let dev_eval = if dev_enc.is_empty() {
            None
        } else {
            Some(evaluate_encoded(&params, &dev_enc)?)
        };
        let report = EpochReport {
            epoch,
            train_loss: loss_sum / train_enc.len() as f64,
            train_accuracy: train_eval.accuracy,
            dev_accuracy: dev_eval.as_ref().map(|e| e.accuracy),
            per_class: dev_eval.as_ref().unwrap_or(&train_eval).per_class,
            lr,
        };
        on_epoch(&report);

        let score = report.dev_accuracy.unwrap_or(f64::NEG_INFINITY);
        let improved = match &best {
            None => true,
            Some((s, _, _)) => dev_eval.is_none() || score > *s,
        };
        if improved {
            best = Some((score, epoch, params.clone()));
        }
        reports.push(report);
    }

    let (params, best_epoch) = match best {
        Some((_, e, p)) => (p, e),
        None => (params, 0),
    };
    Ok(TrainOutcome {
        params,
        reports,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{DepTree, Span};

    #[test]
    fn evaluation_bookkeeping() {
        use PolarityLabel::*;
        let e = Evaluation::from_pairs([
            (Positive, Positive),
            (Positive, Negative),
            (Negative, Negative),
            (Neutral, Positive),
        ]);
        assert_eq!(e.total, 4);
        assert_eq!(e.accuracy, 0.5);
        assert_eq!(e.per_class, [Some(0.5), Some(1.0), Some(0.0), None]);
        assert_eq!(e.macro_accuracy, 0.5);
        let rows: Vec<usize> = e.confusion.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(rows, vec![2, 1, 1, 0]);

        let perfect = Evaluation::from_pairs([(Conflict, Conflict), (Neutral, Neutral)]);
        assert_eq!(perfect.accuracy, 1.0);
        let majority = Evaluation::from_pairs([(Positive, Positive), (Negative, Positive)]);
        assert_eq!(majority.accuracy, 0.5);
    }

    fn tiny_corpus() -> Vec<ReviewInstance> {
        let mk = |id: &str, forms: &[&str], label| {
            let tree = DepTree::from_heads(forms, &[2, 0, 2]).unwrap();
            ReviewInstance::new(id, tree, Span::single(1), label).unwrap()
        };
        vec![
            mk("a", &["food", "was", "good"], PolarityLabel::Positive),
            mk("b", &["food", "was", "bad"], PolarityLabel::Negative),
            mk("c", &["staff", "was", "good"], PolarityLabel::Positive),
            mk("d", &["staff", "was", "bad"], PolarityLabel::Negative),
        ]
    }

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            d_e: 6,
            d_h: 4,
            d_p: 3,
            d_w: 4,
            epochs: 12,
            batch_size: 2,
            lr: 0.02,
            upsample: Upsample::None,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_is_deterministic_and_reports_each_epoch() {
        let data = tiny_corpus();
        let cfg = tiny_config();
        let mut seen = 0;
        let a = train(&cfg, &data, &data[..2], None, |_| seen += 1).unwrap();
        let b = train(&cfg, &data, &data[..2], None, |_| {}).unwrap();
        assert_eq!(seen, 12);
        assert_eq!(a.params, b.params);
        assert_eq!(a.reports, b.reports);
        assert!(a.reports.iter().all(|r| (0.0..=1.0).contains(&r.train_accuracy)));
        let best = a.reports[a.best_epoch].dev_accuracy.unwrap();
        assert!(a.reports.iter().all(|r| r.dev_accuracy.unwrap() <= best));
    }

    #[test]
    fn evaluation_is_pure() {
        let data = tiny_corpus();
        let cfg = TrainConfig {
            epochs: 2,
            ..tiny_config()
        };
        let out = train(&cfg, &data, &[], None, |_| {}).unwrap();
        assert_eq!(out.best_epoch, 1);
        assert!(out.reports[0].dev_accuracy.is_none());
        let e1 = evaluate(&out.params, &cfg, &data).unwrap();
        let e2 = evaluate(&out.params, &cfg, &data).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn divergence_is_reported() {
        let data = tiny_corpus();
        let cfg = TrainConfig {
            init_scale: 1e300,
            ..tiny_config()
        };
        let err = train(&cfg, &data, &[], None, |_| {}).unwrap_err();
        assert!(err.is_numeric(), "{err}");
    }

    #[test]
    fn empty_training_set_rejected() {
        assert!(matches!(
            train(&tiny_config(), &[], &[], None, |_| {}),
            Err(crate::Error::Train(TrainError::EmptyTrainingSet))
        ));
    }

    #[test]
    fn majority_baseline_counts() {
        let data = tiny_corpus();
        assert_eq!(majority_baseline(&data[..1], &data), 0.5);
        assert_eq!(majority_baseline(&data, &[]), 0.0);
    }
}
