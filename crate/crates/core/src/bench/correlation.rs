//! Empirical correlation of per-text losses within and across groups.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::LabeledCorpus;
use crate::model::{per_text_losses, ModelParams};
use crate::textproc::Vocab;
use crate::trainer::encode_corpus;
use crate::{Error, Result};

pub const MIN_GROUPS: usize = 50;
pub const MIN_GROUP_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// Pearson r over all intra-group pairs; `None` when degenerate.
    pub within_group_corr: Option<f64>,
    /// Pearson r over as many random inter-group pairs.
    pub cross_group_corr: Option<f64>,
    /// One-sided Fisher-z p-value for `within_group_corr > 0`.
    pub within_p_value: Option<f64>,
    /// One-sided p-value for `within_group_corr > cross_group_corr`.
    pub difference_p_value: Option<f64>,
    pub within_pairs: usize,
    pub cross_pairs: usize,
    pub groups: usize,
    pub mean_texts_per_group: f64,
    /// Set when a loss sample has zero variance.
    pub degenerate: bool,
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn fisher_z(r: f64) -> f64 {
    // keep atanh finite at |r| = 1
    r.clamp(-1.0 + 1e-15, 1.0 - 1e-15).atanh()
}

fn upper_tail(z: f64) -> f64 {
    1.0 - Normal::new(0.0, 1.0).expect("standard normal").cdf(z)
}

/// Correlation report from per-text losses grouped by origin.
///
/// Pairs are entered in both orders so the coefficient is symmetric; the
/// pair count used for significance is the number of unordered pairs.
pub fn correlation_from_losses(
    losses: &[Vec<f64>],
    rng: &mut impl Rng,
) -> Result<CorrelationReport> {
    let eligible = losses.iter().filter(|g| g.len() >= MIN_GROUP_SIZE).count();
    if eligible < MIN_GROUPS {
        return Err(Error::Invalid(format!(
            "correlation study needs at least {MIN_GROUPS} groups of size >= {MIN_GROUP_SIZE}, found {eligible}"
        )));
    }
    let (mut wx, mut wy) = (Vec::new(), Vec::new());
    for g in losses {
        for a in 0..g.len() {
            for b in a + 1..g.len() {
                wx.extend([g[a], g[b]]);
                wy.extend([g[b], g[a]]);
            }
        }
    }
    let within_pairs = wx.len() / 2;

    let nonempty: Vec<&Vec<f64>> = losses.iter().filter(|g| !g.is_empty()).collect();
    let (mut cx, mut cy) = (Vec::new(), Vec::new());
    for _ in 0..within_pairs {
        let i = rng.gen_range(0..nonempty.len());
        let mut k = rng.gen_range(0..nonempty.len() - 1);
        if k >= i {
            k += 1;
        }
        let a = nonempty[i][rng.gen_range(0..nonempty[i].len())];
        let b = nonempty[k][rng.gen_range(0..nonempty[k].len())];
        cx.extend([a, b]);
        cy.extend([b, a]);
    }

    let within = pearson(&wx, &wy);
    let cross = pearson(&cx, &cy);
    let degenerate = within.is_none() || cross.is_none();
    let se = 1.0 / ((within_pairs as f64) - 3.0).sqrt();
    let within_p_value = within.map(|r| upper_tail(fisher_z(r) / se));
    let difference_p_value = match (within, cross) {
        (Some(w), Some(c)) => Some(upper_tail((fisher_z(w) - fisher_z(c)) / (se * 2f64.sqrt()))),
        _ => None,
    };
    let texts: usize = losses.iter().map(Vec::len).sum();
    Ok(CorrelationReport {
        within_group_corr: within,
        cross_group_corr: cross,
        within_p_value,
        difference_p_value,
        within_pairs,
        cross_pairs: within_pairs,
        groups: losses.len(),
        mean_texts_per_group: texts as f64 / losses.len() as f64,
        degenerate,
    })
}

/// Per-text losses of every augmented group under `params`, then
/// [`correlation_from_losses`].
pub fn correlation_study(
    corpus: &LabeledCorpus,
    vocab: &Vocab,
    params: &ModelParams,
    rng: &mut impl Rng,
) -> Result<CorrelationReport> {
    let losses: Vec<Vec<f64>> = encode_corpus(corpus, vocab)
        .iter()
        .map(|g| per_text_losses(g, params))
        .collect::<Result<_>>()?;
    correlation_from_losses(&losses, rng)
}
