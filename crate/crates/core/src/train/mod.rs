//! Noise-contrastive SGD over sampled paths.
//!
//! Each epoch shuffles the corpus, samples paths from every tree by random
//! walks, draws noise for each path and applies one sparse step. Learning
//! rates decay linearly to 10% of their initial values over the expected
//! number of steps.
//!
//! With `workers > 1` the workers share one parameter store and update it
//! without locks; updates may race. Runs are bit-reproducible only with
//! `workers == 1` and a fixed seed.

mod step;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dcs::{enumerate_paths, DcsTree};
use crate::model::{AtomicParams, ModelParams, Param};
use crate::vocab::{IndexedTree, Vocabulary};

pub use step::{
    clip, log_sigmoid, make_noise, nce_loss, regularizer_grad_inverse, regularizer_grad_matrix, regularizer_grads,
    regularizer_penalty, sigmoid, slot_field, slot_param, step, step_gradients, NoisedExample, StepGradients,
    StepParams,
};

/// Matrix learning rates above this tend to diverge.
pub const LR_MAT_WARN: f64 = 0.0005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Full,
    /// Matrices fixed to the identity.
    NoMatrix,
    /// No inverse regularizer (`gamma = 0`).
    NoInverse,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Mode::Full),
            "no_matrix" => Ok(Mode::NoMatrix),
            "no_inverse" => Ok(Mode::NoInverse),
            _ => Err(format!("unknown mode {s:?} (expected full, no_matrix or no_inverse)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::NoMatrix => "no_matrix",
            Mode::NoInverse => "no_inverse",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub lr_vec: f64,
    pub lr_mat: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub noise_per_example: usize,
    pub clip_norm_vec: f64,
    pub clip_norm_mat: f64,
    pub epochs: usize,
    pub seed: u64,
    pub workers: usize,
    pub mode: Mode,
    /// Linear decay to 10% when true, constant rates otherwise.
    pub lr_decay: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 250,
            lr_vec: 0.1,
            lr_mat: 0.0005,
            gamma: 0.001,
            kappa: 0.0001,
            noise_per_example: 1,
            clip_norm_vec: 1.0,
            clip_norm_mat: 0.1,
            epochs: 5,
            seed: 0,
            workers: 1,
            mode: Mode::Full,
            lr_decay: true,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, TrainError> {
    value
        .trim()
        .parse()
        .map_err(|_| TrainError::InvalidConfig(format!("bad value {value:?} for {key}")))
}

impl TrainConfig {
    /// Keys accepted by [`TrainConfig::set`].
    pub const KEYS: [&'static str; 13] = [
        "dim",
        "lr_vec",
        "lr_mat",
        "gamma",
        "kappa",
        "noise_per_example",
        "clip_norm_vec",
        "clip_norm_mat",
        "epochs",
        "seed",
        "workers",
        "mode",
        "lr_decay",
    ];

    /// Set one option by name. Returns `Ok(false)` for unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, TrainError> {
        match key {
            "dim" => self.dim = parse_value(key, value)?,
            "lr_vec" => self.lr_vec = parse_value(key, value)?,
            "lr_mat" => self.lr_mat = parse_value(key, value)?,
            "gamma" => self.gamma = parse_value(key, value)?,
            "kappa" => self.kappa = parse_value(key, value)?,
            "noise_per_example" | "k_noise" => self.noise_per_example = parse_value(key, value)?,
            "clip_norm_vec" => self.clip_norm_vec = parse_value(key, value)?,
            "clip_norm_mat" => self.clip_norm_mat = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "workers" => self.workers = parse_value(key, value)?,
            "mode" => self.mode = value.trim().parse().map_err(TrainError::InvalidConfig)?,
            "lr_decay" => self.lr_decay = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if self.dim < 2 {
            return bad("dim must be at least 2");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.noise_per_example == 0 {
            return bad("noise_per_example must be at least 1");
        }
        if !(self.gamma >= 0.0 && self.kappa >= 0.0) {
            return bad("gamma and kappa must be non-negative");
        }
        if !(self.lr_vec >= 0.0 && self.lr_mat >= 0.0) {
            return bad("learning rates must be non-negative");
        }
        if !(self.clip_norm_vec > 0.0 && self.clip_norm_mat > 0.0) {
            return bad("clip norms must be positive");
        }
        Ok(())
    }

    /// Step settings at a fraction `progress` of the schedule.
    pub fn step_params(&self, progress: f64) -> StepParams {
        let scale = if self.lr_decay { 1.0 - 0.9 * progress.clamp(0.0, 1.0) } else { 1.0 };
        StepParams {
            lr_vec: self.lr_vec * scale,
            lr_mat: self.lr_mat * scale,
            gamma: if self.mode == Mode::NoInverse { 0.0 } else { self.gamma },
            kappa: self.kappa,
            clip_vec: self.clip_norm_vec,
            clip_mat: self.clip_norm_mat,
            update_matrices: self.mode != Mode::NoMatrix,
        }
    }
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, TrainError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| TrainError::InvalidConfig(format!("config line {}: expected key=value", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite gradient for {param:?} at epoch {epoch}, step {step}; lower the learning rates")]
    NonFiniteGradient { param: Param, epoch: usize, step: u64 },
    #[error("no trainable trees in corpus")]
    EmptyCorpus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Steps taken so far, all epochs.
    pub step: u64,
    pub mean_loss: f64,
    pub examples_per_sec: f64,
}

impl EpochStats {
    /// `epoch<TAB>step<TAB>mean_loss<TAB>examples_per_sec`
    pub fn log_line(&self) -> String {
        format!("{}\t{}\t{:.6}\t{:.1}", self.epoch, self.step, self.mean_loss, self.examples_per_sec)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainStats {
    pub epochs: Vec<EpochStats>,
    pub trees: usize,
    pub skipped_trees: usize,
    pub steps: u64,
}

/// Expected number of sampled paths per epoch over all trees.
pub fn expected_paths<'a>(trees: impl IntoIterator<Item = &'a DcsTree>) -> f64 {
    trees
        .into_iter()
        .map(|t| enumerate_paths(t).iter().map(|p| p.weight).sum::<f64>())
        .sum()
}

pub fn train(corpus: &[DcsTree], vocab: &Vocabulary, config: &TrainConfig) -> Result<(ModelParams, TrainStats), TrainError> {
    train_with(corpus, vocab, config, |_| {})
}

/// Train from a fresh initialization, calling `on_epoch` after each epoch.
pub fn train_with(
    corpus: &[DcsTree],
    vocab: &Vocabulary,
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<(ModelParams, TrainStats), TrainError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::init(config.dim, vocab.num_words(), vocab.num_fields(), &mut rng);
    if config.mode == Mode::NoMatrix {
        params.set_identity_matrices();
    }
    train_from(params, corpus, vocab, config, &mut rng, on_epoch)
}

/// Continue training existing parameters.
pub fn train_from(
    params: ModelParams,
    corpus: &[DcsTree],
    vocab: &Vocabulary,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(ModelParams, TrainStats), TrainError> {
    config.validate()?;
    if config.lr_mat > LR_MAT_WARN && config.mode != Mode::NoMatrix {
        log::warn!("lr_mat {} exceeds {LR_MAT_WARN}; training may diverge", config.lr_mat);
    }
    let mut stats = TrainStats { trees: corpus.len(), ..Default::default() };
    let mut indexed = Vec::with_capacity(corpus.len());
    let mut kept = Vec::with_capacity(corpus.len());
    for t in corpus {
        match IndexedTree::new(t, vocab) {
            Some(it) if it.len() >= 2 => {
                indexed.push(it);
                kept.push(t);
            }
            _ => stats.skipped_trees += 1,
        }
    }
    if stats.skipped_trees > 0 {
        log::warn!("skipped {} of {} trees", stats.skipped_trees, corpus.len());
    }
    if config.epochs == 0 {
        return Ok((params, stats));
    }
    if indexed.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let scheduled = (config.epochs as f64 * expected_paths(kept)).max(1.0);
    let shared = AtomicParams::from_params(&params);
    drop(params);
    let global_step = AtomicU64::new(0);
    let stop = AtomicBool::new(false);
    let mut order: Vec<usize> = (0..indexed.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(rng);
        let seeds: Vec<u64> = (0..config.workers).map(|_| rng.next_u64()).collect();
        let started = Instant::now();
        let worker = |w: usize| -> Result<(f64, u64), TrainError> {
            let mut wrng = ChaCha8Rng::seed_from_u64(seeds[w]);
            let mut store = &shared;
            let (mut loss_sum, mut count) = (0.0, 0u64);
            let mut samples = Vec::new();
            for &t in order.iter().skip(w).step_by(config.workers) {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let tree = &indexed[t];
                samples.clear();
                tree.walk(&mut wrng, |nodes| samples.push(tree.sample_of(nodes)));
                for pos in &samples {
                    let noises = make_noise(pos, vocab, &mut wrng, config.noise_per_example);
                    let s = global_step.fetch_add(1, Ordering::Relaxed);
                    let sp = config.step_params(s as f64 / scheduled);
                    match step(&mut store, pos, &noises, &sp) {
                        Ok(loss) => {
                            loss_sum += loss;
                            count += 1;
                        }
                        Err(param) => {
                            stop.store(true, Ordering::Relaxed);
                            return Err(TrainError::NonFiniteGradient { param, epoch, step: s });
                        }
                    }
                }
            }
            Ok((loss_sum, count))
        };
        let results: Vec<Result<(f64, u64), TrainError>> = if config.workers == 1 {
            vec![worker(0)]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..config.workers).map(|w| scope.spawn(move || worker(w))).collect();
                handles.into_iter().map(|h| h.join().expect("training worker panicked")).collect()
            })
        };
        let (mut loss_sum, mut count) = (0.0, 0u64);
        for r in results {
            let (l, c) = r?;
            loss_sum += l;
            count += c;
        }
        let secs = started.elapsed().as_secs_f64().max(1e-9);
        let es = EpochStats {
            epoch,
            step: global_step.load(Ordering::Relaxed),
            mean_loss: if count > 0 { loss_sum / count as f64 } else { f64::NAN },
            examples_per_sec: count as f64 / secs,
        };
        log::info!("{}", es.log_line());
        on_epoch(&es);
        stats.epochs.push(es);
    }
    stats.steps = global_step.load(Ordering::Relaxed);
    Ok((shared.to_params(), stats))
}
