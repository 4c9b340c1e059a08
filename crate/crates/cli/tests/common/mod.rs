#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use atp_core::ingest::{DepTree, PolarityLabel, ReviewInstance, Span};
use atp_core::train::{TrainConfig, Upsample};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn atp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atp"))
        .args(args)
        .env("ATP_LOG", "error")
        .output()
        .expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Random tree on `n` tokens: a random attachment order relabelled by a
/// random permutation.
pub fn random_tree(n: usize, rng: &mut impl Rng) -> DepTree {
    let mut perm: Vec<usize> = (1..=n).collect();
    perm.shuffle(rng);
    let mut heads = vec![0; n];
    for k in 1..n {
        let parent = perm[rng.gen_range(0..k)];
        heads[perm[k] - 1] = parent;
    }
    let forms: Vec<String> = (1..=n).map(|i| format!("w{}", rng.gen_range(0..20) + i % 3)).collect();
    DepTree::from_heads(&forms, &heads).expect("valid tree")
}

const ASPECTS: [&str; 4] = ["food", "service", "price", "staff"];
const FILLERS: [&str; 10] = ["was", "really", "at", "this", "place", "we", "found", "it", "today", "and"];
const CUES: [(PolarityLabel, [&str; 3]); 3] = [
    (PolarityLabel::Positive, ["great", "superb", "lovely"]),
    (PolarityLabel::Negative, ["awful", "terrible", "bland"]),
    (PolarityLabel::Neutral, ["average", "standard", "usual"]),
];

/// Sentences whose label is set by one cue word. The cue is the only tree
/// neighbour of the aspect (position 2) and sits at least 4 words after it.
/// Position 3 holds a cue of another class that is far from the aspect in
/// the tree, so word order alone points the wrong way.
/// Returns the instances and the 1-based position of each cue.
pub fn cue_corpus(count: usize, seed: u64) -> (Vec<ReviewInstance>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut cues = Vec::new();
    for k in 0..count {
        let (label, words) = CUES[k % CUES.len()];
        let cue = 6 + rng.gen_range(0..3);
        let tail = rng.gen_range(0..3);
        let n = cue + tail;
        let mut forms = vec!["the".to_string(), ASPECTS.choose(&mut rng).unwrap().to_string()];
        let mut heads = vec![3, 0];
        let (_, decoy) = CUES[(k + 1 + rng.gen_range(0..2)) % CUES.len()];
        forms.push(decoy.choose(&mut rng).unwrap().to_string());
        heads.push(4);
        for i in 4..cue {
            forms.push(FILLERS.choose(&mut rng).unwrap().to_string());
            heads.push(i + 1);
        }
        forms.push(words.choose(&mut rng).unwrap().to_string());
        heads.push(2);
        for _ in 0..tail {
            forms.push(FILLERS.choose(&mut rng).unwrap().to_string());
            heads.push(cue);
        }
        assert_eq!(forms.len(), n);
        let tree = DepTree::from_heads(&forms, &heads).expect("valid tree");
        out.push(ReviewInstance::new(format!("syn{k}"), tree, Span::single(2), label).unwrap());
        cues.push(cue);
    }
    (out, cues)
}

pub fn small_config() -> TrainConfig {
    TrainConfig {
        d_e: 16,
        d_h: 16,
        d_p: 8,
        d_w: 16,
        lr: 0.01,
        lr_patience: 1000,
        batch_size: 8,
        dropout: 0.0,
        recurrent_dropout: false,
        epochs: 200,
        seed: 5,
        upsample: Upsample::None,
        dev_fraction: 0.0,
        ..TrainConfig::default()
    }
}
