//! Augmented-text generation.
//!
//! An [`AugmentationPlan`] lists the methods applied to each original text
//! and how many variants each produces. Every variant draws from its own
//! random stream keyed by (master seed, origin id, method, variant index),
//! so output does not depend on processing order and can be cached.

mod eda;
mod translate;

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AugmentedText, Observation};
use crate::seed;
use crate::{Error, Result};

pub use eda::{
    eda_variant, edit_count, random_delete, random_insert, random_swap, synonym_replace, EdaOp,
    Thesaurus,
};
pub use translate::{
    back_translate, HttpTranslator, IdentityTranslator, MockTranslator, Translator, ROUTES_A,
    ROUTES_B, SOURCE_LANGUAGE,
};

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_COUNT: usize = 4;

/// Thesaurus shipped with the crate (small, for tests and demos).
pub const BUILTIN_THESAURUS: &str = include_str!("../../data/thesaurus.tsv");
/// Stopword list shipped with the crate.
pub const BUILTIN_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

#[derive(Debug, Clone, PartialEq)]
pub enum AugMethod {
    Eda { alpha: f64 },
    BackTranslate { routes: Vec<String> },
}

impl AugMethod {
    pub fn eda(alpha: f64) -> Self {
        AugMethod::Eda { alpha }
    }

    pub fn back_translate<S: Into<String>>(routes: impl IntoIterator<Item = S>) -> Self {
        AugMethod::BackTranslate {
            routes: routes.into_iter().map(Into::into).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AugMethod::Eda { alpha } if !(*alpha > 0.0 && *alpha < 1.0) => Err(Error::Config(
                format!("EDA alpha must lie in (0, 1), got {alpha}"),
            )),
            AugMethod::BackTranslate { routes } if routes.is_empty() => Err(Error::Config(
                "back-translation needs at least one route".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Identifier written to cache records, e.g. `eda` or `bt:fr,pt,es,it`.
    pub fn id(&self) -> String {
        match self {
            AugMethod::Eda { .. } => "eda".to_string(),
            AugMethod::BackTranslate { routes } => format!("bt:{}", routes.join(",")),
        }
    }
}

impl std::str::FromStr for AugMethod {
    type Err = Error;

    /// Inverse of [`AugMethod::id`]; EDA gets the default alpha.
    fn from_str(id: &str) -> Result<Self> {
        let method = match id {
            "eda" => AugMethod::eda(DEFAULT_ALPHA),
            _ => match id.strip_prefix("bt:") {
                Some(routes) => {
                    AugMethod::back_translate(routes.split(',').filter(|r| !r.is_empty()))
                }
                None => return Err(Error::Config(format!("unknown augmentation method `{id}`"))),
            },
        };
        method.validate()?;
        Ok(method)
    }
}

impl fmt::Display for AugMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// One cached augmented text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugRecord {
    pub origin_id: String,
    pub method: String,
    pub variant_index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry {
    pub method: AugMethod,
    pub count: usize,
}

/// Methods and per-method counts that make up a group. The original text is
/// always part of the group.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AugmentationPlan {
    pub methods: Vec<PlanEntry>,
}

impl AugmentationPlan {
    pub fn new(methods: impl IntoIterator<Item = (AugMethod, usize)>) -> Result<Self> {
        let plan = AugmentationPlan {
            methods: methods
                .into_iter()
                .map(|(method, count)| PlanEntry { method, count })
                .collect(),
        };
        plan.validate()?;
        Ok(plan)
    }

    /// No augmentation: groups are the originals alone.
    pub fn none() -> Self {
        AugmentationPlan::default()
    }

    /// Plan implied by a record cache: one entry per method in order of first
    /// appearance, with count one past the highest variant index seen.
    pub fn from_records(records: &[AugRecord]) -> Result<Self> {
        let mut counts: Vec<(String, usize)> = Vec::new();
        for r in records {
            match counts.iter_mut().find(|(m, _)| *m == r.method) {
                Some((_, c)) => *c = (*c).max(r.variant_index + 1),
                None => counts.push((r.method.clone(), r.variant_index + 1)),
            }
        }
        let methods = counts
            .into_iter()
            .map(|(m, c)| Ok((m.parse::<AugMethod>()?, c)))
            .collect::<Result<Vec<_>>>()?;
        AugmentationPlan::new(methods)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for entry in &self.methods {
            entry.method.validate()?;
            if entry.count == 0 {
                return Err(Error::Config(format!(
                    "{}: count must be >= 1",
                    entry.method
                )));
            }
            if !ids.insert(entry.method.id()) {
                return Err(Error::Config(format!("{} listed twice", entry.method)));
            }
        }
        Ok(())
    }

    pub const fn includes_original(&self) -> bool {
        true
    }

    /// `1 + Σ n_j`.
    pub fn group_size(&self) -> usize {
        1 + self.methods.iter().map(|e| e.count).sum::<usize>()
    }

    pub fn method_ids(&self) -> Vec<String> {
        self.methods.iter().map(|e| e.method.id()).collect()
    }

    pub fn count_for(&self, method_id: &str) -> Option<usize> {
        self.methods
            .iter()
            .find(|e| e.method.id() == method_id)
            .map(|e| e.count)
    }
}

/// Shared resources for augmentation.
#[derive(Clone, Copy)]
pub struct AugmentDeps<'a> {
    pub thesaurus: &'a Thesaurus,
    pub stopwords: &'a HashSet<String>,
    pub translator: Option<&'a dyn Translator>,
    pub master_seed: u64,
    pub retries: usize,
}

/// A labelled original text before augmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceText {
    pub id: String,
    pub text: String,
    pub label: usize,
}

/// Builds the group for one original text: the original plus `n_j` variants
/// per plan method, each with its provenance record.
///
/// Back-translation variants that fail after retries, or that come back
/// empty, are skipped with a warning; the group shrinks but the original is
/// always kept.
pub fn augment_observation(
    original: &SourceText,
    plan: &AugmentationPlan,
    deps: &AugmentDeps<'_>,
) -> Result<(Observation, Vec<AugRecord>)> {
    plan.validate()?;
    let mut augmented = Vec::new();
    let mut records = Vec::new();
    for entry in &plan.methods {
        let method_id = entry.method.id();
        for variant_index in 0..entry.count {
            let text = match &entry.method {
                AugMethod::Eda { alpha } => {
                    let mut rng = seed::stream(
                        deps.master_seed,
                        &[
                            "aug".into(),
                            (&original.id).into(),
                            (&method_id).into(),
                            variant_index.into(),
                        ],
                    );
                    Some(eda_variant(
                        &original.text,
                        variant_index,
                        *alpha,
                        deps.thesaurus,
                        deps.stopwords,
                        &mut rng,
                    ))
                }
                AugMethod::BackTranslate { routes } => {
                    let client = deps.translator.ok_or_else(|| {
                        Error::Config("back-translation requested without a translator".into())
                    })?;
                    let route = &routes[variant_index % routes.len()];
                    match back_translate(&original.text, route, client, &original.id, deps.retries)
                    {
                        Ok(t) if t.trim().is_empty() => {
                            log::warn!(
                                "{}: empty back-translation via {route}, skipped",
                                original.id
                            );
                            None
                        }
                        Ok(t) => Some(t),
                        Err(e) => {
                            log::warn!("{e}; variant {variant_index} skipped");
                            None
                        }
                    }
                }
            };
            if let Some(text) = text {
                augmented.push(AugmentedText {
                    method: method_id.clone(),
                    text: text.clone(),
                });
                records.push(AugRecord {
                    origin_id: original.id.clone(),
                    method: method_id.clone(),
                    variant_index,
                    text,
                });
            }
        }
    }
    let obs = Observation {
        id: original.id.clone(),
        original: original.text.clone(),
        augmented,
        label: original.label,
    };
    Ok((obs, records))
}

/// Augments every text in parallel; records come back in input order.
pub fn augment_corpus(
    originals: &[SourceText],
    plan: &AugmentationPlan,
    deps: &AugmentDeps<'_>,
) -> Result<Vec<AugRecord>> {
    let per_obs: Vec<Vec<AugRecord>> = originals
        .par_iter()
        .map(|o| augment_observation(o, plan, deps).map(|(_, r)| r))
        .collect::<Result<_>>()?;
    Ok(per_obs.into_iter().flatten().collect())
}

/// Writes records as JSON lines.
pub fn write_records(path: &Path, records: &[AugRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a JSON-lines cache, rejecting malformed lines and repeated
/// `(origin_id, method, variant_index)` keys.
pub fn read_records(path: &Path) -> Result<Vec<AugRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AugRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if !seen.insert((rec.origin_id.clone(), rec.method.clone(), rec.variant_index)) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!(
                    "duplicate record ({}, {}, {})",
                    rec.origin_id, rec.method, rec.variant_index
                ),
            });
        }
        out.push(rec);
    }
    Ok(out)
}
