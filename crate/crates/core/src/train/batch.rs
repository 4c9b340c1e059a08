use rand::seq::SliceRandom;
use rand::Rng;

use super::{TrainConfig, TrainError, Upsample};
use crate::ingest::{PolarityLabel, ReviewInstance};
use crate::model::{EncodedInstance, Vocab};
use crate::Result;

pub fn class_counts(data: &[ReviewInstance]) -> [usize; 4] {
    let mut c = [0; 4];
    for inst in data {
        c[inst.label.code()] += 1;
    }
    c
}

/// Target conflict count for `mode`, or `None` when nothing should change.
pub fn upsample_target(data: &[ReviewInstance], mode: Upsample) -> Option<usize> {
    match mode {
        Upsample::None => None,
        Upsample::Target(n) => Some(n),
        Upsample::Auto => {
            let c = class_counts(data);
            let mut others = [c[0], c[1], c[2]];
            others.sort_unstable();
            Some(others[1])
        }
    }
}

/// Duplicates conflict instances, drawn with replacement, until there are
/// `target` of them, then shuffles the whole set.
pub fn upsample_conflict(
    data: &[ReviewInstance],
    target: usize,
    rng: &mut impl Rng,
) -> Result<Vec<ReviewInstance>, TrainError> {
    let conflict: Vec<&ReviewInstance> = data
        .iter()
        .filter(|i| i.label == PolarityLabel::Conflict)
        .collect();
    if conflict.is_empty() && target > 0 {
        return Err(TrainError::NoConflictInstances { target });
    }
    if target < conflict.len() {
        return Err(TrainError::TargetBelowCount {
            target,
            current: conflict.len(),
        });
    }
    let extra = target - conflict.len();
    let mut out = data.to_vec();
    out.reserve(extra);
    for _ in 0..extra {
        out.push(conflict[rng.gen_range(0..conflict.len())].clone());
    }
    out.shuffle(rng);
    Ok(out)
}

/// Splits off a seeded random `fraction` of `data` as a dev set.
pub fn split_dev(
    data: &[ReviewInstance],
    fraction: f64,
    rng: &mut impl Rng,
) -> (Vec<ReviewInstance>, Vec<ReviewInstance>) {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(rng);
    let n_dev = (data.len() as f64 * fraction).round() as usize;
    let (dev, train) = idx.split_at(n_dev.min(data.len()));
    let mut train = train.to_vec();
    let mut dev = dev.to_vec();
    train.sort_unstable();
    dev.sort_unstable();
    (
        train.iter().map(|&i| data[i].clone()).collect(),
        dev.iter().map(|&i| data[i].clone()).collect(),
    )
}

/// Padded length for a run: `max_len` when set, else the longest sentence.
pub fn pad_length<'a>(
    max_len: usize,
    data: impl IntoIterator<Item = &'a ReviewInstance>,
) -> Result<usize, TrainError> {
    let mut longest = 1;
    for inst in data {
        let n = inst.tree.len();
        if max_len > 0 && n > max_len {
            return Err(TrainError::SentenceTooLong {
                sentence_id: inst.sentence_id.clone(),
                len: n,
                max: max_len,
            });
        }
        longest = longest.max(n);
    }
    Ok(if max_len > 0 { max_len } else { longest })
}

/// Encodes every instance padded to `pad_to` with the configured position
/// kind and aspect pooling.
pub fn encode_all(
    vocab: &Vocab,
    data: &[ReviewInstance],
    config: &TrainConfig,
    pad_to: usize,
) -> Result<Vec<EncodedInstance>> {
    data.iter()
        .map(|inst| {
            let pv = config.position.compute(inst, config.d_max)?;
            EncodedInstance::new(vocab, inst, &pv, config.aspect_pooling, pad_to.max(inst.tree.len()))
        })
        .collect()
}

/// Shuffles and chunks the data; the last batch may be short.
pub fn make_batches<'a>(
    data: &'a [EncodedInstance],
    batch_size: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<&'a EncodedInstance>> {
    let mut order: Vec<&EncodedInstance> = data.iter().collect();
    order.shuffle(rng);
    order.chunks(batch_size.max(1)).map(<[_]>::to_vec).collect()
}

/// Step decay: `lr0 · factor^⌊epoch / patience⌋`.
pub fn lr_schedule(lr0: f64, factor: f64, patience: usize, epoch: usize) -> f64 {
    lr0 * factor.powi((epoch / patience.max(1)) as i32)
}
