//! Minibatch training in baseline, standard and BAGG modes.
//!
//! Minibatch size is counted in sampling units: texts for baseline and
//! standard, whole groups for BAGG.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledCorpus;
use crate::model::{self, Dims, EncodedGroup, ModelParams, Objective, PoolSpace};
use crate::seed;
use crate::textproc::{encode, tokenize, Vocab};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Originals only.
    Baseline,
    /// Every text is an independent example.
    Standard,
    /// One pooled prediction and loss per group.
    Bagg,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Baseline, Mode::Standard, Mode::Bagg];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Standard => "standard",
            Mode::Bagg => "bagg",
        }
    }

    /// Default minibatch size in this mode's sampling units.
    pub fn default_batch_size(&self) -> usize {
        match self {
            Mode::Bagg => 8,
            Mode::Baseline | Mode::Standard => 32,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "standard" => Ok(Mode::Standard),
            "bagg" => Ok(Mode::Bagg),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (baseline|standard|bagg)"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: Mode,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub pool_space: PoolSpace,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Standard loss only: divide each group by its augmented count instead
    /// of its size.
    pub raw_normalizer: bool,
}

impl TrainConfig {
    pub fn new(mode: Mode) -> Self {
        TrainConfig {
            mode,
            epochs: 30,
            batch_size: mode.default_batch_size(),
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            seed: 0,
            pool_space: PoolSpace::Prob,
            embed_dim: model::DEFAULT_EMBED,
            hidden_dim: model::DEFAULT_HIDDEN,
            raw_normalizer: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    fn objective(&self) -> Objective {
        match self.mode {
            Mode::Bagg => Objective::Bagg {
                pool_space: self.pool_space,
            },
            Mode::Baseline | Mode::Standard => Objective::Standard {
                raw_normalizer: self.raw_normalizer,
            },
        }
    }
}

/// First-order optimiser over a flat parameter buffer.
pub trait Optimizer {
    fn step(&mut self, params: &mut [f64], grads: &[f64]);
}

pub struct Sgd {
    pub learning_rate: f64,
}

impl Optimizer for Sgd {
    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        for (p, g) in params.iter_mut().zip(grads) {
            *p -= self.learning_rate * g;
        }
    }
}

/// Adam with bias correction.
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, learning_rate: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            learning_rate,
            beta1,
            beta2,
            eps,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

impl Optimizer for Adam {
    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

fn build_optimizer(config: &TrainConfig, len: usize) -> Box<dyn Optimizer> {
    match config.optimizer {
        OptimizerKind::Sgd => Box::new(Sgd {
            learning_rate: config.learning_rate,
        }),
        OptimizerKind::Adam { beta1, beta2, eps } => {
            Box::new(Adam::new(len, config.learning_rate, beta1, beta2, eps))
        }
    }
}

/// Tokenizes and encodes every text of every observation.
pub fn encode_corpus(corpus: &LabeledCorpus, vocab: &Vocab) -> Vec<EncodedGroup> {
    corpus
        .observations
        .iter()
        .map(|o| {
            EncodedGroup::new(
                o.texts().map(|t| encode(&tokenize(t), vocab)).collect(),
                o.label,
            )
        })
        .collect()
}

/// Splits the training data into minibatches of `batch_size` sampling units.
///
/// Baseline keeps each group's original text only; standard flattens every
/// text into a singleton group; BAGG keeps groups whole.
pub fn make_batches(
    groups: &[EncodedGroup],
    mode: Mode,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<EncodedGroup>> {
    let mut units: Vec<EncodedGroup> = match mode {
        Mode::Baseline => groups
            .iter()
            .map(|g| EncodedGroup::singleton(g.texts[0].clone(), g.label))
            .collect(),
        Mode::Standard => groups
            .iter()
            .flat_map(|g| {
                g.texts
                    .iter()
                    .map(|t| EncodedGroup::singleton(t.clone(), g.label))
            })
            .collect(),
        Mode::Bagg => groups.to_vec(),
    };
    units.shuffle(rng);
    units
        .chunks(batch_size.max(1))
        .map(<[EncodedGroup]>::to_vec)
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub vocab: Vocab,
    pub config: TrainConfig,
    /// Mean minibatch loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Loss of every optimisation step, in order.
    pub step_losses: Vec<f64>,
}

impl TrainedModel {
    /// Writes the checkpoint to `path` and the vocabulary, one token per
    /// line in id order, to `path` with `.vocab` appended.
    pub fn save(&self, path: &Path) -> Result<()> {
        model::save_checkpoint(
            path,
            &self.params,
            self.config.pool_space,
            &self.vocab.content_hash(),
        )?;
        let vocab_path = vocab_path(path);
        std::fs::write(&vocab_path, self.vocab.tokens().join("\n") + "\n")
            .map_err(|e| Error::io(&vocab_path, e))
    }

    pub fn predict_text(&self, text: &str) -> Result<usize> {
        Ok(model::predict(&encode(&tokenize(text), &self.vocab), &self.params)?.1)
    }
}

pub fn vocab_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".vocab");
    PathBuf::from(s)
}

/// Trains a fresh model on `corpus`. The result depends only on the corpus,
/// vocabulary and config.
pub fn train(corpus: &LabeledCorpus, vocab: &Vocab, config: &TrainConfig) -> Result<TrainedModel> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Invalid("cannot train on an empty corpus".into()));
    }
    let dims = Dims::new(
        vocab.len(),
        config.embed_dim,
        config.hidden_dim,
        corpus.num_categories(),
    );
    let mut params = ModelParams::init(dims, &mut seed::stream(config.seed, &["init".into()]))?;
    let mut optimizer = build_optimizer(config, params.len());
    let groups = encode_corpus(corpus, vocab);
    let objective = config.objective();

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut step_losses = Vec::new();
    for epoch in 0..config.epochs {
        let mut rng = seed::stream(config.seed, &["epoch".into(), epoch.into()]);
        let batches = make_batches(&groups, config.mode, config.batch_size, &mut rng);
        let mut total = 0.0;
        for (b, batch) in batches.iter().enumerate() {
            let (loss, grads) = match objective.evaluate(batch, &params) {
                Err(Error::NonFinite(_)) => return Err(Error::NonFiniteLoss { epoch, batch: b }),
                other => other?,
            };
            optimizer.step(params.as_mut_slice(), grads.as_slice());
            if !params.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            total += loss;
            step_losses.push(loss);
        }
        epoch_losses.push(total / batches.len() as f64);
    }
    Ok(TrainedModel {
        params,
        vocab: vocab.clone(),
        config: config.clone(),
        epoch_losses,
        step_losses,
    })
}

/// Fraction of test observations whose original text is classified
/// correctly. Augmented texts are never consulted.
pub fn evaluate(model: &TrainedModel, test: &LabeledCorpus) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Invalid(
            "cannot evaluate on an empty test corpus".into(),
        ));
    }
    let classes = model.params.dims().classes;
    let mut correct = 0usize;
    for o in &test.observations {
        if o.label >= classes {
            return Err(Error::Invalid(format!(
                "test label {} outside the model's {classes} classes",
                o.label
            )));
        }
        if model.predict_text(&o.original)? == o.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}
