//! Classifier `h(x) = g(f(x))` with a pooling layer over groups.
//!
//! - `f`: mean of token embeddings, then an affine map and `tanh`
//! - `g`: affine map to class logits, then softmax
//! - pooling: arithmetic mean of the group members' class distributions
//!   (or of their logits, see [`PoolSpace`])
//!
//! All parameters live in one flat `f64` buffer in declaration order:
//! embedding (V×d), hidden weights (d×H), hidden bias (H), output weights
//! (H×C), output bias (C). The pooling layer has no parameters.

mod checkpoint;
mod loss;

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader, MAGIC,
};
pub use loss::{
    check_gradients, cross_entropy, loss_bagg, loss_standard, per_text_losses, Objective,
};

pub const DEFAULT_EMBED: usize = 64;
pub const DEFAULT_HIDDEN: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Dims {
    pub fn new(vocab: usize, embed: usize, hidden: usize, classes: usize) -> Self {
        Dims {
            vocab,
            embed,
            hidden,
            classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab == 0 || self.embed == 0 || self.hidden == 0 || self.classes == 0 {
            return Err(Error::Config(format!(
                "all model dimensions must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layout().b_out.end
    }

    fn layout(&self) -> Layout {
        let Dims {
            vocab: v,
            embed: d,
            hidden: h,
            classes: c,
        } = *self;
        let embedding = 0..v * d;
        let w_hidden = embedding.end..embedding.end + d * h;
        let b_hidden = w_hidden.end..w_hidden.end + h;
        let w_out = b_hidden.end..b_hidden.end + h * c;
        let b_out = w_out.end..w_out.end + c;
        Layout {
            embedding,
            w_hidden,
            b_hidden,
            w_out,
            b_out,
        }
    }
}

#[derive(Debug, Clone)]
struct Layout {
    embedding: Range<usize>,
    w_hidden: Range<usize>,
    b_hidden: Range<usize>,
    w_out: Range<usize>,
    b_out: Range<usize>,
}

/// Where the pooling mean is taken.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolSpace {
    /// Average the per-text probability vectors.
    #[default]
    Prob,
    /// Average the per-text logits, then apply softmax.
    Logit,
}

impl std::str::FromStr for PoolSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prob" => Ok(PoolSpace::Prob),
            "logit" => Ok(PoolSpace::Logit),
            other => Err(Error::Config(format!(
                "unknown pool space `{other}` (prob|logit)"
            ))),
        }
    }
}

impl std::fmt::Display for PoolSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PoolSpace::Prob => "prob",
            PoolSpace::Logit => "logit",
        })
    }
}

/// Encoder, head and (empty) pooling parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dims: Dims,
    data: Vec<f64>,
}

/// Named tensors in declaration order.
pub const TENSOR_NAMES: [&str; 5] = ["embedding", "w_hidden", "b_hidden", "w_out", "b_out"];

impl ModelParams {
    pub fn zeros(dims: Dims) -> Result<Self> {
        dims.validate()?;
        Ok(ModelParams {
            dims,
            data: vec![0.0; dims.num_params()],
        })
    }

    pub fn from_vec(dims: Dims, data: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        if data.len() != dims.num_params() {
            return Err(Error::Invalid(format!(
                "expected {} parameters, got {}",
                dims.num_params(),
                data.len()
            )));
        }
        Ok(ModelParams { dims, data })
    }

    /// Embeddings uniform in ±0.05; weight matrices Glorot-uniform; biases 0.
    pub fn init(dims: Dims, rng: &mut impl Rng) -> Result<Self> {
        let mut p = ModelParams::zeros(dims)?;
        let l = dims.layout();
        for x in &mut p.data[l.embedding] {
            *x = rng.gen_range(-0.05..0.05);
        }
        let glorot = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();
        let a = glorot(dims.embed, dims.hidden);
        for x in &mut p.data[l.w_hidden] {
            *x = rng.gen_range(-a..a);
        }
        let a = glorot(dims.hidden, dims.classes);
        for x in &mut p.data[l.w_out] {
            *x = rng.gen_range(-a..a);
        }
        Ok(p)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `(name, values)` for every tensor, in declaration order. The pooling
    /// parameter set is empty and therefore not listed.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let l = self.dims.layout();
        let ranges = [l.embedding, l.w_hidden, l.b_hidden, l.w_out, l.b_out];
        TENSOR_NAMES
            .iter()
            .zip(ranges)
            .map(|(n, r)| (*n, &self.data[r]))
            .collect()
    }

    pub fn pooling_params(&self) -> &[f64] {
        &[]
    }

    fn embedding_row(&self, id: usize) -> &[f64] {
        let d = self.dims.embed;
        &self.data[id * d..(id + 1) * d]
    }

    fn forward(&self, ids: &[usize]) -> Result<Forward> {
        let Dims {
            vocab,
            embed: d,
            hidden: h,
            classes: c,
        } = self.dims;
        let l = self.dims.layout();
        let mut mean = vec![0.0; d];
        for &id in ids {
            if id >= vocab {
                return Err(Error::TokenOutOfRange { id, vocab });
            }
            for (m, e) in mean.iter_mut().zip(self.embedding_row(id)) {
                *m += e;
            }
        }
        if !ids.is_empty() {
            let inv = 1.0 / ids.len() as f64;
            mean.iter_mut().for_each(|m| *m *= inv);
        }

        let w1 = &self.data[l.w_hidden];
        let mut hidden = self.data[l.b_hidden].to_vec();
        for (i, &m) in mean.iter().enumerate() {
            if m != 0.0 {
                for (acc, w) in hidden.iter_mut().zip(&w1[i * h..(i + 1) * h]) {
                    *acc += m * w;
                }
            }
        }
        hidden.iter_mut().for_each(|x| *x = x.tanh());

        let w2 = &self.data[l.w_out];
        let mut logits = self.data[l.b_out].to_vec();
        for (j, &hj) in hidden.iter().enumerate() {
            for (acc, w) in logits.iter_mut().zip(&w2[j * c..(j + 1) * c]) {
                *acc += hj * w;
            }
        }
        Ok(Forward {
            mean,
            hidden,
            logits,
        })
    }

    /// Accumulates `dlogits` back through head and encoder into `grads`.
    fn backward(&self, ids: &[usize], fwd: &Forward, dlogits: &[f64], grads: &mut Gradients) {
        let Dims {
            embed: d,
            hidden: h,
            classes: c,
            ..
        } = self.dims;
        let l = self.dims.layout();
        let w2 = &self.data[l.w_out.clone()];
        let w1 = &self.data[l.w_hidden.clone()];
        let g = &mut grads.data;

        for (k, dz) in dlogits.iter().enumerate() {
            g[l.b_out.start + k] += dz;
        }
        let mut dpre = vec![0.0; h];
        for j in 0..h {
            let hj = fwd.hidden[j];
            let row = l.w_out.start + j * c;
            let mut dh = 0.0;
            for k in 0..c {
                g[row + k] += hj * dlogits[k];
                dh += w2[j * c + k] * dlogits[k];
            }
            dpre[j] = dh * (1.0 - hj * hj);
        }
        for (j, dp) in dpre.iter().enumerate() {
            g[l.b_hidden.start + j] += dp;
        }
        let mut dmean = vec![0.0; d];
        for i in 0..d {
            let row = l.w_hidden.start + i * h;
            let m = fwd.mean[i];
            let mut acc = 0.0;
            for j in 0..h {
                g[row + j] += m * dpre[j];
                acc += w1[i * h + j] * dpre[j];
            }
            dmean[i] = acc;
        }
        if !ids.is_empty() {
            let inv = 1.0 / ids.len() as f64;
            for &id in ids {
                let row = l.embedding.start + id * d;
                for (gi, dm) in g[row..row + d].iter_mut().zip(&dmean) {
                    *gi += dm * inv;
                }
            }
        }
    }
}

struct Forward {
    mean: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

/// Gradient buffer congruent with [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    dims: Dims,
    data: Vec<f64>,
}

impl Gradients {
    pub fn zeros(dims: Dims) -> Self {
        Gradients {
            dims,
            data: vec![0.0; dims.num_params()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Element-wise sum, for combining partial gradients.
    pub fn add_assign(&mut self, other: &Gradients) {
        assert_eq!(self.dims, other.dims, "gradient shapes differ");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// A probability vector over classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution(Vec<f64>);

impl ClassDistribution {
    /// Accepts a vector with non-negative entries summing to 1 ± 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.is_empty()
            || probs.iter().any(|p| !(0.0..=1.0).contains(p))
            || (sum - 1.0).abs() > 1e-9
        {
            return Err(Error::Invalid(format!(
                "not a probability vector: {probs:?}"
            )));
        }
        Ok(ClassDistribution(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Encoder `f`: mean embedding, affine map, `tanh`. Empty input gives
/// `tanh(bias)`.
pub fn encode_text(ids: &[usize], params: &ModelParams) -> Result<Vec<f64>> {
    Ok(params.forward(ids)?.hidden)
}

/// Head `g`: softmax of an affine map of the hidden vector.
pub fn head(hidden: &[f64], params: &ModelParams) -> Result<ClassDistribution> {
    Ok(ClassDistribution(softmax(&head_logits(hidden, params)?)))
}

pub fn head_logits(hidden: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    let Dims {
        hidden: h,
        classes: c,
        ..
    } = params.dims;
    if hidden.len() != h {
        return Err(Error::Invalid(format!(
            "hidden vector has {} entries, expected {h}",
            hidden.len()
        )));
    }
    let l = params.dims.layout();
    let w2 = &params.data[l.w_out];
    let mut logits = params.data[l.b_out].to_vec();
    for (j, &hj) in hidden.iter().enumerate() {
        for (acc, w) in logits.iter_mut().zip(&w2[j * c..(j + 1) * c]) {
            *acc += hj * w;
        }
    }
    Ok(logits)
}

/// Arithmetic mean of class distributions.
pub fn pool(outputs: &[ClassDistribution]) -> Result<ClassDistribution> {
    let first = outputs
        .first()
        .ok_or_else(|| Error::Invalid("cannot pool an empty group".into()))?;
    let c = first.num_classes();
    if outputs.iter().any(|o| o.num_classes() != c) {
        return Err(Error::Invalid(
            "pooled distributions differ in length".into(),
        ));
    }
    let m = outputs.len() as f64;
    let mut mean = vec![0.0; c];
    for o in outputs {
        for (acc, p) in mean.iter_mut().zip(o.probs()) {
            *acc += p;
        }
    }
    mean.iter_mut().for_each(|x| *x /= m);
    Ok(ClassDistribution(mean))
}

/// Softmax of the mean logit vector.
pub fn pool_logits(logits: &[Vec<f64>]) -> Result<ClassDistribution> {
    let first = logits
        .first()
        .ok_or_else(|| Error::Invalid("cannot pool an empty group".into()))?;
    let c = first.len();
    if logits.iter().any(|z| z.len() != c) {
        return Err(Error::Invalid(
            "pooled logit vectors differ in length".into(),
        ));
    }
    let m = logits.len() as f64;
    let mut mean = vec![0.0; c];
    for z in logits {
        for (acc, v) in mean.iter_mut().zip(z) {
            *acc += v / m;
        }
    }
    Ok(ClassDistribution(softmax(&mean)))
}

/// Single-text prediction: distribution and argmax label.
pub fn predict(ids: &[usize], params: &ModelParams) -> Result<(ClassDistribution, usize)> {
    let fwd = params.forward(ids)?;
    let dist = ClassDistribution(softmax(&fwd.logits));
    let label = dist.argmax();
    Ok((dist, label))
}

/// Token ids of every text in a group, with the group's label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedGroup {
    pub texts: Vec<Vec<usize>>,
    pub label: usize,
}

impl EncodedGroup {
    pub fn new(texts: Vec<Vec<usize>>, label: usize) -> Self {
        EncodedGroup { texts, label }
    }

    pub fn singleton(ids: Vec<usize>, label: usize) -> Self {
        EncodedGroup {
            texts: vec![ids],
            label,
        }
    }

    pub fn size(&self) -> usize {
        self.texts.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;

    fn tiny() -> ModelParams {
        ModelParams::init(Dims::new(6, 4, 5, 3), &mut seed::stream(1, &[])).unwrap()
    }

    #[test]
    fn layout_is_contiguous() {
        let dims = Dims::new(6, 4, 5, 3);
        assert_eq!(dims.num_params(), 24 + 20 + 5 + 15 + 3);
        let p = ModelParams::zeros(dims).unwrap();
        let lens: Vec<usize> = p.tensors().iter().map(|(_, t)| t.len()).collect();
        assert_eq!(lens, [24, 20, 5, 15, 3]);
        assert!(p.pooling_params().is_empty());
        assert!(ModelParams::zeros(Dims::new(0, 1, 1, 1)).is_err());
    }

    #[test]
    fn encoder_cases() {
        let p = tiny();
        let l = p.dims.layout();
        let empty = encode_text(&[], &p).unwrap();
        let expect: Vec<f64> = p.data[l.b_hidden.clone()]
            .iter()
            .map(|b| b.tanh())
            .collect();
        assert_eq!(empty, expect);

        // single token: tanh(W·E[id] + b)
        let e = p.embedding_row(3).to_vec();
        let w1 = &p.data[l.w_hidden.clone()];
        let manual: Vec<f64> = (0..5)
            .map(|j| {
                (p.data[l.b_hidden.start + j] + (0..4).map(|i| e[i] * w1[i * 5 + j]).sum::<f64>())
                    .tanh()
            })
            .collect();
        let got = encode_text(&[3], &p).unwrap();
        for (a, b) in got.iter().zip(&manual) {
            assert!((a - b).abs() < 1e-15);
        }

        let a = encode_text(&[1, 2, 5, 5], &p).unwrap();
        let b = encode_text(&[5, 2, 5, 1], &p).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(matches!(
            encode_text(&[6], &p),
            Err(Error::TokenOutOfRange { id: 6, vocab: 6 })
        ));
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax(&[0.0, 0.0]), [0.5, 0.5]);
        let s = softmax(&[1000.0, 0.0]);
        assert!((s[0] - 1.0).abs() < 1e-12 && s[1] >= 0.0 && s[1] < 1e-300);
        let zero_head = ModelParams::zeros(Dims::new(2, 2, 3, 2)).unwrap();
        assert_eq!(
            head(&[0.3, -1.0, 2.0], &zero_head).unwrap().probs(),
            [0.5, 0.5]
        );
    }

    #[test]
    fn pool_cases() {
        let d = ClassDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let p = pool(&[d.clone(), d.clone(), d.clone()]).unwrap();
        for (a, b) in p.probs().iter().zip(d.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
        let a = ClassDistribution::new(vec![1.0, 0.0]).unwrap();
        let b = ClassDistribution::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(pool(&[a, b]).unwrap().probs(), [0.5, 0.5]);
        assert!(pool(&[]).is_err());
        assert!(pool_logits(&[]).is_err());
    }

    #[test]
    fn predict_tie_break() {
        assert_eq!(
            ClassDistribution::new(vec![1.0 / 3.0; 3]).unwrap().argmax(),
            0
        );
        assert_eq!(
            ClassDistribution::new(vec![0.1, 0.7, 0.2])
                .unwrap()
                .argmax(),
            1
        );
        let p = ModelParams::zeros(Dims::new(4, 2, 2, 3)).unwrap();
        assert_eq!(predict(&[1, 2], &p).unwrap().1, 0);
        let p = tiny();
        assert_eq!(
            predict(&[1, 2, 4], &p).unwrap(),
            predict(&[4, 1, 2], &p).unwrap()
        );
    }

    proptest! {
        #[test]
        fn head_outputs_are_distributions(hidden in prop::collection::vec(-1.0f64..1.0, 5), s in 0u64..1000) {
            let p = ModelParams::init(Dims::new(3, 2, 5, 4), &mut seed::stream(s, &[])).unwrap();
            let d = head(&hidden, &p).unwrap();
            let sum: f64 = d.probs().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(d.probs().iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
}
