//! Per-text (standard) and per-observation (BAGG) cross-entropy losses
//! with analytic gradients, plus a finite-difference checker.

use super::{
    log_softmax, log_sum_exp, softmax, ClassDistribution, EncodedGroup, Forward, Gradients,
    ModelParams, PoolSpace,
};
use crate::{Error, Result};

/// `-ln p_y`.
pub fn cross_entropy(dist: &ClassDistribution, label: usize) -> f64 {
    -dist.probs()[label].ln()
}

/// Which loss to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Every text is its own term, weighted `1/(n·m_i)`. With `raw_normalizer`
    /// the inner weight is `1/n_i` (augmented count, floored at 1) instead of
    /// the group size `m_i = n_i + 1`.
    Standard { raw_normalizer: bool },
    /// One term per group on the pooled prediction, weighted `1/n`.
    Bagg { pool_space: PoolSpace },
}

impl Objective {
    pub fn evaluate(
        &self,
        batch: &[EncodedGroup],
        params: &ModelParams,
    ) -> Result<(f64, Gradients)> {
        match *self {
            Objective::Standard { raw_normalizer } => standard(batch, params, raw_normalizer),
            Objective::Bagg { pool_space } => loss_bagg(batch, params, pool_space),
        }
    }
}

fn check_batch(batch: &[EncodedGroup], params: &ModelParams) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let c = params.dims().classes;
    for g in batch {
        if g.texts.is_empty() {
            return Err(Error::Invalid("group without texts".into()));
        }
        if g.label >= c {
            return Err(Error::Invalid(format!(
                "label {} out of range for {c} classes",
                g.label
            )));
        }
    }
    Ok(())
}

fn finite(loss: f64, grads: Gradients) -> Result<(f64, Gradients)> {
    if loss.is_finite() && grads.is_finite() {
        Ok((loss, grads))
    } else {
        Err(Error::NonFinite(format!("loss = {loss}")))
    }
}

/// `J = (1/n) Σ_i (1/m_i) Σ_j CE(h(x_ij), y_i)`, `m_i` the group size.
pub fn loss_standard(batch: &[EncodedGroup], params: &ModelParams) -> Result<(f64, Gradients)> {
    standard(batch, params, false)
}

fn standard(
    batch: &[EncodedGroup],
    params: &ModelParams,
    raw_normalizer: bool,
) -> Result<(f64, Gradients)> {
    check_batch(batch, params)?;
    let n = batch.len() as f64;
    let mut grads = Gradients::zeros(params.dims());
    let mut loss = 0.0;
    for group in batch {
        let m = if raw_normalizer {
            (group.size() - 1).max(1)
        } else {
            group.size()
        } as f64;
        let weight = 1.0 / (n * m);
        for ids in &group.texts {
            let fwd = params.forward(ids)?;
            let logp = log_softmax(&fwd.logits);
            loss -= weight * logp[group.label];
            let mut dz: Vec<f64> = logp.iter().map(|lp| weight * lp.exp()).collect();
            dz[group.label] -= weight;
            params.backward(ids, &fwd, &dz, &mut grads);
        }
    }
    finite(loss, grads)
}

/// `J' = (1/n) Σ_i CE(pool({h(x_ij)}_j), y_i)` over whole groups, original
/// included.
pub fn loss_bagg(
    batch: &[EncodedGroup],
    params: &ModelParams,
    pool_space: PoolSpace,
) -> Result<(f64, Gradients)> {
    check_batch(batch, params)?;
    let n = batch.len() as f64;
    let c = params.dims().classes;
    let mut grads = Gradients::zeros(params.dims());
    let mut loss = 0.0;
    for group in batch {
        let y = group.label;
        let fwds: Vec<Forward> = group
            .texts
            .iter()
            .map(|ids| params.forward(ids))
            .collect::<Result<_>>()?;
        let m = fwds.len() as f64;
        match pool_space {
            PoolSpace::Prob => {
                // log P_y = logsumexp_j log p_jy - ln m, computed in log space
                let logps: Vec<Vec<f64>> = fwds.iter().map(|f| log_softmax(&f.logits)).collect();
                let log_py: Vec<f64> = logps.iter().map(|lp| lp[y]).collect();
                let lse = log_sum_exp(&log_py);
                loss -= (lse - m.ln()) / n;
                // dL/dz_j = (1/n) r_j (p_j - e_y), r_j = p_jy / Σ_j' p_j'y
                for ((ids, fwd), lp) in group.texts.iter().zip(&fwds).zip(&logps) {
                    let r = (lp[y] - lse).exp() / n;
                    let mut dz: Vec<f64> = lp.iter().map(|l| r * l.exp()).collect();
                    dz[y] -= r;
                    params.backward(ids, fwd, &dz, &mut grads);
                }
            }
            PoolSpace::Logit => {
                let mut mean = vec![0.0; c];
                for f in &fwds {
                    for (acc, z) in mean.iter_mut().zip(&f.logits) {
                        *acc += z / m;
                    }
                }
                loss -= log_softmax(&mean)[y] / n;
                let mut dz = softmax(&mean);
                dz[y] -= 1.0;
                dz.iter_mut().for_each(|g| *g /= n * m);
                for (ids, fwd) in group.texts.iter().zip(&fwds) {
                    params.backward(ids, fwd, &dz, &mut grads);
                }
            }
        }
    }
    finite(loss, grads)
}

/// Cross-entropy of every text in a group, evaluated independently.
pub fn per_text_losses(group: &EncodedGroup, params: &ModelParams) -> Result<Vec<f64>> {
    group
        .texts
        .iter()
        .map(|ids| Ok(-log_softmax(&params.forward(ids)?.logits)[group.label]))
        .collect()
}

/// Largest relative error between analytic gradients and central finite
/// differences over every parameter.
///
/// The relative error of one coordinate is `|a - f| / max(|a|, |f|)`; when
/// both magnitudes are below `1e-10` the absolute difference is used. An
/// `epsilon` of zero is no perturbation at all and yields 0.
pub fn check_gradients(
    params: &ModelParams,
    batch: &[EncodedGroup],
    epsilon: f64,
    objective: Objective,
) -> Result<f64> {
    let (_, analytic) = objective.evaluate(batch, params)?;
    if epsilon == 0.0 {
        return Ok(0.0);
    }
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let orig = probe.data[i];
        probe.data[i] = orig + epsilon;
        let (plus, _) = objective.evaluate(batch, &probe)?;
        probe.data[i] = orig - epsilon;
        let (minus, _) = objective.evaluate(batch, &probe)?;
        probe.data[i] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic.data[i];
        let scale = a.abs().max(numeric.abs());
        let err = if scale < 1e-10 {
            (a - numeric).abs()
        } else {
            (a - numeric).abs() / scale
        };
        worst = worst.max(err);
    }
    Ok(worst)
}
