//! Grouped observations, corpus ingestion, stratified sampling and the
//! repeated 80/20 split protocol.
//!
//! The sampling unit is the observation: an original text, the texts
//! augmented from it, and one shared label.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{AugRecord, AugmentationPlan, SourceText};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedText {
    pub method: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub id: String,
    pub original: String,
    pub augmented: Vec<AugmentedText>,
    pub label: usize,
}

impl Observation {
    pub fn new(id: impl Into<String>, original: impl Into<String>, label: usize) -> Self {
        Observation {
            id: id.into(),
            original: original.into(),
            augmented: Vec::new(),
            label,
        }
    }

    /// Original plus augmented texts.
    pub fn group_size(&self) -> usize {
        1 + self.augmented.len()
    }

    /// The original first, then the augmented texts in order.
    pub fn texts(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.original.as_str())
            .chain(self.augmented.iter().map(|a| a.text.as_str()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    pub filters: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledCorpus {
    pub observations: Vec<Observation>,
    pub categories: Vec<String>,
    pub provenance: Provenance,
}

impl LabeledCorpus {
    /// Validates labels and category names.
    pub fn new(
        observations: Vec<Observation>,
        categories: Vec<String>,
        provenance: Provenance,
    ) -> Result<Self> {
        let unique: HashSet<&String> = categories.iter().collect();
        if unique.len() != categories.len() {
            return Err(Error::Invalid("category names must be unique".into()));
        }
        if let Some(o) = observations.iter().find(|o| o.label >= categories.len()) {
            return Err(Error::Invalid(format!(
                "observation `{}` has label {} but only {} categories exist",
                o.id,
                o.label,
                categories.len()
            )));
        }
        Ok(LabeledCorpus {
            observations,
            categories,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    /// Members per category, indexed by label.
    pub fn category_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.categories.len()];
        for o in &self.observations {
            counts[o.label] += 1;
        }
        counts
    }

    pub fn total_texts(&self) -> usize {
        self.observations.iter().map(Observation::group_size).sum()
    }

    pub fn source_texts(&self) -> Vec<SourceText> {
        self.observations
            .iter()
            .map(|o| SourceText {
                id: o.id.clone(),
                text: o.original.clone(),
                label: o.label,
            })
            .collect()
    }

    fn subset(&self, mut indices: Vec<usize>, filter: String) -> LabeledCorpus {
        indices.sort_unstable();
        let mut provenance = self.provenance.clone();
        provenance.filters.push(filter);
        LabeledCorpus {
            observations: indices
                .into_iter()
                .map(|i| self.observations[i].clone())
                .collect(),
            categories: self.categories.clone(),
            provenance,
        }
    }

    fn members_by_category(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.categories.len()];
        for (i, o) in self.observations.iter().enumerate() {
            members[o.label].push(i);
        }
        members
    }

    /// Writes the corpus (originals only) as `{"id","text","label"}` lines.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for o in &self.observations {
            let row = Row {
                id: o.id.clone(),
                text: o.original.clone(),
                label: self.categories[o.label].clone(),
            };
            serde_json::to_writer(&mut w, &row)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    id: String,
    text: String,
    label: String,
}

#[derive(Default)]
struct CorpusBuilder {
    observations: Vec<Observation>,
    categories: Vec<String>,
    label_index: HashMap<String, usize>,
    ids: HashSet<String>,
}

impl CorpusBuilder {
    fn push(&mut self, row: Row) -> Result<()> {
        if !self.ids.insert(row.id.clone()) {
            return Err(Error::DuplicateId(row.id));
        }
        let next = self.categories.len();
        let label = *self
            .label_index
            .entry(row.label.clone())
            .or_insert_with(|| {
                self.categories.push(row.label.clone());
                next
            });
        self.observations
            .push(Observation::new(row.id, row.text, label));
        Ok(())
    }

    fn finish(self, source: &Path) -> LabeledCorpus {
        LabeledCorpus {
            observations: self.observations,
            categories: self.categories,
            provenance: Provenance {
                source: source.display().to_string(),
                filters: Vec::new(),
            },
        }
    }
}

/// Loads `{"id": .., "text": .., "label": ..}` lines. Labels get indices in
/// order of first appearance; unknown fields are ignored.
pub fn load_jsonl(path: &Path) -> Result<LabeledCorpus> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut builder = CorpusBuilder::default();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        builder.push(row)?;
    }
    Ok(builder.finish(path))
}

/// Loads a CSV file with header `id,text,label` (RFC 4180 quoting).
pub fn import_csv(path: &Path) -> Result<LabeledCorpus> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut builder = CorpusBuilder::default();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message: e.to_string(),
        })?;
        builder.push(row)?;
    }
    Ok(builder.finish(path))
}

/// Keeps the `k` most populous categories (ties by name) and relabels them
/// `0..k` in that order.
pub fn select_categories(corpus: &LabeledCorpus, k: usize) -> Result<LabeledCorpus> {
    if k > corpus.num_categories() {
        return Err(Error::Invalid(format!(
            "requested {k} categories but the corpus has {}",
            corpus.num_categories()
        )));
    }
    let counts = corpus.category_counts();
    let mut order: Vec<usize> = (0..corpus.num_categories()).collect();
    order.sort_by(|&a, &b| {
        counts[b]
            .cmp(&counts[a])
            .then_with(|| corpus.categories[a].cmp(&corpus.categories[b]))
    });
    order.truncate(k);
    let relabel: HashMap<usize, usize> = order
        .iter()
        .enumerate()
        .map(|(new, &old)| (old, new))
        .collect();
    let observations = corpus
        .observations
        .iter()
        .filter_map(|o| {
            relabel
                .get(&o.label)
                .map(|&label| Observation { label, ..o.clone() })
        })
        .collect();
    let mut provenance = corpus.provenance.clone();
    provenance.filters.push(format!("top-{k} categories"));
    Ok(LabeledCorpus {
        observations,
        categories: order
            .iter()
            .map(|&c| corpus.categories[c].clone())
            .collect(),
        provenance,
    })
}

/// Per-category quotas summing to `n`.
///
/// Each category gets `⌊n/C⌋`, the remainder goes to the largest categories
/// (ties by name), and any shortfall of a small category is redistributed
/// over the rest by the same rule.
pub fn stratified_quotas(counts: &[usize], names: &[String], n: usize) -> Result<Vec<usize>> {
    let total: usize = counts.iter().sum();
    if n > total {
        return Err(Error::Invalid(format!(
            "cannot sample {n} observations from a corpus of {total}"
        )));
    }
    let mut order: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    order.sort_by(|&a, &b| {
        counts[b]
            .cmp(&counts[a])
            .then_with(|| names[a].cmp(&names[b]))
    });

    let mut quota = vec![0usize; counts.len()];
    let mut remaining = n;
    let mut active = order;
    while remaining > 0 {
        let k = active.len();
        let (base, extra) = (remaining / k, remaining % k);
        for (rank, &c) in active.iter().enumerate() {
            let want = base + usize::from(rank < extra);
            let give = want.min(counts[c] - quota[c]);
            quota[c] += give;
            remaining -= give;
        }
        active.retain(|&c| quota[c] < counts[c]);
    }
    Ok(quota)
}

/// Draws exactly `n` observations, stratified by category.
pub fn stratified_sample(
    corpus: &LabeledCorpus,
    n: usize,
    rng: &mut impl Rng,
) -> Result<LabeledCorpus> {
    let quotas = stratified_quotas(&corpus.category_counts(), &corpus.categories, n)?;
    let mut chosen = Vec::with_capacity(n);
    for (members, quota) in corpus.members_by_category().into_iter().zip(quotas) {
        chosen.extend(members.choose_multiple(rng, quota).copied());
    }
    Ok(corpus.subset(chosen, format!("stratified sample n={n}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub sample_size: usize,
    pub num_categories: usize,
    pub repetition_seed: u64,
}

impl SplitSpec {
    pub fn new(sample_size: usize, num_categories: usize, repetition_seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train_fraction: 0.8,
            sample_size,
            num_categories,
            repetition_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.sample_size < self.num_categories {
            return Err(Error::Config(format!(
                "sample size {} is smaller than the category count {}",
                self.sample_size, self.num_categories
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: LabeledCorpus,
    pub test: LabeledCorpus,
    pub warnings: Vec<String>,
}

/// Stratified train/test partition for repetition `rep_index`.
///
/// Each category of size `k >= 2` sends `round((1 - f)·k)` members to test,
/// clamped to `1..=k-1`. Smaller categories go wholly to train with a
/// warning.
pub fn split(corpus: &LabeledCorpus, spec: &SplitSpec, rep_index: usize) -> Result<Split> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(Error::Invalid("cannot split an empty corpus".into()));
    }
    let mut rng = seed::stream(spec.repetition_seed, &["split".into(), rep_index.into()]);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut warnings = Vec::new();
    for (label, mut members) in corpus.members_by_category().into_iter().enumerate() {
        let k = members.len();
        if k == 0 {
            continue;
        }
        if k < 2 {
            let msg = format!(
                "category `{}` has {k} member(s); placed in train only",
                corpus.categories[label]
            );
            log::warn!("{msg}");
            warnings.push(msg);
            train.extend(members);
            continue;
        }
        members.shuffle(&mut rng);
        let n_test = (((1.0 - spec.train_fraction) * k as f64).round() as usize).clamp(1, k - 1);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    Ok(Split {
        train: corpus.subset(train, format!("train rep={rep_index}")),
        test: corpus.subset(test, format!("test rep={rep_index}")),
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct Attached {
    pub corpus: LabeledCorpus,
    pub warnings: Vec<String>,
}

/// Gives each observation of a training corpus its augmented texts.
///
/// Only records whose method is in `plan` (and whose variant index is below
/// that method's count) are used, ordered by plan method then variant.
/// Records naming ids absent from the corpus are ignored with a warning.
/// Never call this on a test corpus: evaluation uses originals only.
pub fn attach_augmentations(
    corpus: &LabeledCorpus,
    records: &[AugRecord],
    plan: &AugmentationPlan,
) -> Attached {
    let method_rank: HashMap<String, (usize, usize)> = plan
        .methods
        .iter()
        .enumerate()
        .map(|(rank, e)| (e.method.id(), (rank, e.count)))
        .collect();
    let ids: HashSet<&str> = corpus.observations.iter().map(|o| o.id.as_str()).collect();

    let mut by_origin: HashMap<&str, Vec<(usize, usize, &AugRecord)>> = HashMap::new();
    let mut orphans: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        if !ids.contains(r.origin_id.as_str()) {
            *orphans.entry(r.origin_id.as_str()).or_default() += 1;
            continue;
        }
        if let Some(&(rank, count)) = method_rank.get(&r.method) {
            if r.variant_index < count {
                by_origin
                    .entry(r.origin_id.as_str())
                    .or_default()
                    .push((rank, r.variant_index, r));
            }
        }
    }

    let warnings: Vec<String> = orphans
        .iter()
        .map(|(id, n)| format!("{n} augmentation record(s) reference unknown id `{id}`"))
        .collect();
    if !warnings.is_empty() {
        log::debug!("{} orphan origin id(s) ignored", warnings.len());
    }

    let observations = corpus
        .observations
        .iter()
        .map(|o| {
            let mut recs = by_origin.remove(o.id.as_str()).unwrap_or_default();
            recs.sort_by_key(|&(rank, v, _)| (rank, v));
            Observation {
                augmented: recs
                    .into_iter()
                    .map(|(_, _, r)| AugmentedText {
                        method: r.method.clone(),
                        text: r.text.clone(),
                    })
                    .collect(),
                ..o.clone()
            }
        })
        .collect();
    let mut provenance = corpus.provenance.clone();
    provenance
        .filters
        .push(format!("augmented: [{}]", plan.method_ids().join(" ")));
    Attached {
        corpus: LabeledCorpus {
            observations,
            categories: corpus.categories.clone(),
            provenance,
        },
        warnings,
    }
}
