//! Experiment harness: repeated stratified subsampling and 80/20 splits over
//! a grid of sample sizes, category counts, modes and augmentation methods,
//! with Markdown/CSV/SVG reporting and the loss-correlation study.
//!
//! Within one (sample size, category count) cell every mode and method sees
//! the same subsamples, splits and initial weights; only the mode and the
//! attached augmentations differ.

mod chart;
mod correlation;
mod report;
mod synthetic;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{
    read_records, AugMethod, AugRecord, AugmentationPlan, DEFAULT_ALPHA, DEFAULT_COUNT, ROUTES_A,
    ROUTES_B,
};
use crate::dataset::{
    attach_augmentations, select_categories, split, stratified_sample, LabeledCorpus, SplitSpec,
};
use crate::seed::{self, derive_seed};
use crate::textproc::{build_vocab, tokenize, TokenSeq, Vocab};
use crate::trainer::{evaluate, train, Mode, TrainConfig};
use crate::{Error, Result};

pub use chart::{render_chart, write_chart, PLOT_HEIGHT};
pub use correlation::{
    correlation_from_losses, correlation_study, pearson, CorrelationReport, MIN_GROUPS,
    MIN_GROUP_SIZE,
};
pub use report::{
    compare_methods, format_table, method_label, parse_csv, percent, read_results, Column, Grid,
    ResultRow, ResultTable, SkippedCell, TableFormat, CSV_HEADER, MISSING, NO_METHOD,
};
pub use synthetic::{
    class_name, keyword, keyword_class, majority_signature, make_synthetic_corpus, noise_word,
    synthetic_thesaurus, SyntheticConfig, KEYWORDS_PER_CLASS,
};

/// Single augmentation methods; `combined` joins all three in one group.
pub const METHODS: [&str; 4] = ["eda", "bt_a", "bt_b", "combined"];

/// The augmentation plan behind a bench method name.
pub fn plan_for(method: &str) -> Result<AugmentationPlan> {
    let eda = (AugMethod::eda(DEFAULT_ALPHA), DEFAULT_COUNT);
    let bt_a = (AugMethod::back_translate(ROUTES_A), DEFAULT_COUNT);
    let bt_b = (AugMethod::back_translate(ROUTES_B), DEFAULT_COUNT);
    match method {
        "eda" => AugmentationPlan::new([eda]),
        "bt_a" => AugmentationPlan::new([bt_a]),
        "bt_b" => AugmentationPlan::new([bt_b]),
        "combined" => AugmentationPlan::new([eda, bt_a, bt_b]),
        other => Err(Error::Config(format!(
            "unknown method `{other}` (eda|bt_a|bt_b|combined)"
        ))),
    }
}

/// Cached augmentation records per single method.
#[derive(Debug, Clone, Default)]
pub struct AugmentationSource {
    records: BTreeMap<String, Vec<AugRecord>>,
}

impl AugmentationSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, method: &str, records: Vec<AugRecord>) {
        self.records.insert(method.to_string(), records);
    }

    /// Reads `eda.jsonl`, `bt_a.jsonl` and `bt_b.jsonl` where present.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut src = Self::new();
        for method in ["eda", "bt_a", "bt_b"] {
            let path = dir.join(format!("{method}.jsonl"));
            if path.exists() {
                src.insert(method, read_records(&path)?);
            }
        }
        Ok(src)
    }

    /// Records usable for `method`; `combined` needs all three sources.
    pub fn records_for(&self, method: &str) -> Option<Vec<AugRecord>> {
        if method == "combined" {
            let mut all = Vec::new();
            for m in ["eda", "bt_a", "bt_b"] {
                all.extend(self.records.get(m)?.iter().cloned());
            }
            Some(all)
        } else {
            self.records.get(method).cloned()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sample_sizes: Vec<usize>,
    pub num_categories: Vec<usize>,
    pub methods: Vec<String>,
    pub modes: Vec<Mode>,
    pub repetitions: usize,
    pub master_seed: u64,
    /// Template for every run; mode, batch size and seed are set per run.
    pub trainer: TrainConfig,
    /// Minibatch size in texts (baseline, standard).
    pub text_batch_size: usize,
    /// Minibatch size in groups (BAGG).
    pub group_batch_size: usize,
    pub min_count: usize,
    /// Completed cells are cached here when set.
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sample_sizes: vec![100, 200],
            num_categories: vec![8, 12],
            methods: METHODS.iter().map(|m| m.to_string()).collect(),
            modes: Mode::ALL.to_vec(),
            repetitions: 25,
            master_seed: 0,
            trainer: TrainConfig::new(Mode::Standard),
            text_batch_size: Mode::Standard.default_batch_size(),
            group_batch_size: Mode::Bagg.default_batch_size(),
            min_count: 1,
            cache_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        for m in &self.methods {
            plan_for(m)?;
        }
        self.trainer.validate()
    }

    /// Run config for one (mode, repetition) of a cell.
    pub fn train_config(&self, mode: Mode, cell_seed: u64, rep: usize) -> TrainConfig {
        let mut tc = self.trainer.clone();
        tc.mode = mode;
        tc.batch_size = match mode {
            Mode::Bagg => self.group_batch_size,
            Mode::Baseline | Mode::Standard => self.text_batch_size,
        };
        tc.seed = derive_seed(cell_seed, &["train".into(), rep.into()]);
        tc
    }
}

/// Seed shared by every mode and method of a (sample size, category count)
/// cell.
pub fn cell_seed(master_seed: u64, sample_size: usize, num_categories: usize) -> u64 {
    derive_seed(
        master_seed,
        &["cell".into(), sample_size.into(), num_categories.into()],
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct CellKey {
    sample_size: usize,
    num_categories: usize,
    mode: Mode,
    method: String,
}

struct Cell {
    key: CellKey,
    seed: u64,
    plan: AugmentationPlan,
    records: Vec<AugRecord>,
    cache_file: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct CachedCell {
    accuracies: Vec<f64>,
}

fn corpus_fingerprint(corpus: &LabeledCorpus) -> String {
    let mut buf = String::new();
    for o in &corpus.observations {
        buf.push_str(
            &serde_json::json!([o.id, o.original, corpus.categories[o.label]]).to_string(),
        );
        buf.push('\n');
    }
    seed::hex_digest(buf.as_bytes())
}

fn records_fingerprint(records: &[AugRecord]) -> String {
    let joined: Vec<String> = records
        .iter()
        .map(|r| serde_json::to_string(r).unwrap_or_default())
        .collect();
    seed::hex_digest(joined.join("\n").as_bytes())
}

fn feasibility(
    corpus: &LabeledCorpus,
    n: usize,
    c: usize,
) -> std::result::Result<LabeledCorpus, String> {
    if c == 0 || c > corpus.num_categories() {
        return Err(format!(
            "corpus has {} categories, cell needs {c}",
            corpus.num_categories()
        ));
    }
    if n <= c {
        return Err(format!(
            "sample size {n} leaves no test observations for {c} categories"
        ));
    }
    let selected = select_categories(corpus, c).map_err(|e| e.to_string())?;
    if n > selected.len() {
        return Err(format!(
            "only {} observations in the top {c} categories",
            selected.len()
        ));
    }
    Ok(selected)
}

/// Tokenized texts of a corpus, augmented texts included.
pub fn corpus_tokens(corpus: &LabeledCorpus) -> Vec<TokenSeq> {
    corpus
        .observations
        .iter()
        .flat_map(|o| o.texts().map(tokenize).collect::<Vec<_>>())
        .collect()
}

fn run_rep(
    config: &ExperimentConfig,
    selected: &LabeledCorpus,
    cell: &Cell,
    rep: usize,
) -> Result<f64> {
    let key = &cell.key;
    let mut rng = seed::stream(cell.seed, &["sample".into(), rep.into()]);
    let sample = stratified_sample(selected, key.sample_size, &mut rng)?;
    let spec = SplitSpec {
        train_fraction: 0.8,
        sample_size: key.sample_size,
        num_categories: key.num_categories,
        repetition_seed: cell.seed,
    };
    let parts = split(&sample, &spec, rep)?;
    let train_corpus = if key.mode == Mode::Baseline {
        parts.train
    } else {
        attach_augmentations(&parts.train, &cell.records, &cell.plan).corpus
    };
    let vocab: Vocab = build_vocab(&corpus_tokens(&train_corpus), config.min_count)?;
    let tc = config.train_config(key.mode, cell.seed, rep);
    let model = train(&train_corpus, &vocab, &tc)?;
    evaluate(&model, &parts.test)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Runs the full grid and aggregates per-repetition accuracies.
///
/// Infeasible cells are skipped with a reason. With a cache directory,
/// finished cells are stored under a hash of everything that determines
/// their result and reused on later runs.
pub fn run_experiment(
    config: &ExperimentConfig,
    corpus: &LabeledCorpus,
    augmentations: &AugmentationSource,
) -> Result<ResultTable> {
    config.validate()?;
    if let Some(dir) = &config.cache_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let corpus_fp = corpus_fingerprint(corpus);
    let mut skipped = Vec::new();
    let mut cells: Vec<Cell> = Vec::new();
    let mut selected: HashMap<(usize, usize), LabeledCorpus> = HashMap::new();

    for &n in &config.sample_sizes {
        for &c in &config.num_categories {
            let mut wanted: Vec<(Mode, String)> = Vec::new();
            for &mode in &config.modes {
                if mode == Mode::Baseline {
                    wanted.push((mode, NO_METHOD.to_string()));
                } else {
                    wanted.extend(config.methods.iter().map(|m| (mode, m.clone())));
                }
            }
            let skip = |mode: Mode, method: &str, reason: &str| SkippedCell {
                sample_size: n,
                num_categories: c,
                mode,
                method: method.to_string(),
                reason: reason.to_string(),
            };
            let sel = match feasibility(corpus, n, c) {
                Ok(sel) => sel,
                Err(reason) => {
                    log::warn!("skipping n={n}, C={c}: {reason}");
                    skipped.extend(
                        wanted
                            .iter()
                            .map(|(mode, method)| skip(*mode, method, &reason)),
                    );
                    continue;
                }
            };
            selected.insert((n, c), sel);
            let seed = cell_seed(config.master_seed, n, c);
            for (mode, method) in wanted {
                let (plan, records) = if mode == Mode::Baseline {
                    (AugmentationPlan::none(), Vec::new())
                } else {
                    match augmentations.records_for(&method) {
                        Some(r) => (plan_for(&method)?, r),
                        None => {
                            let reason = format!("no augmentation records for `{method}`");
                            log::warn!("skipping n={n}, C={c}, {mode}/{method}: {reason}");
                            skipped.push(skip(mode, &method, &reason));
                            continue;
                        }
                    }
                };
                let key = CellKey {
                    sample_size: n,
                    num_categories: c,
                    mode,
                    method,
                };
                let cache_file = config.cache_dir.as_ref().map(|dir| {
                    let fingerprint = serde_json::json!({
                        "version": 1,
                        "corpus": corpus_fp,
                        "records": records_fingerprint(&records),
                        "config": config,
                        "cell": [key.sample_size, key.num_categories, key.mode.as_str(), key.method],
                    });
                    dir.join(format!("{}.json", seed::hex_digest(fingerprint.to_string().as_bytes())))
                });
                cells.push(Cell {
                    key,
                    seed,
                    plan,
                    records,
                    cache_file,
                });
            }
        }
    }

    let mut results: Vec<Option<Vec<f64>>> = cells
        .iter()
        .map(|cell| {
            let path = cell.cache_file.as_ref()?;
            let text = std::fs::read_to_string(path).ok()?;
            let cached: CachedCell = serde_json::from_str(&text).ok()?;
            (cached.accuracies.len() == config.repetitions).then_some(cached.accuracies)
        })
        .collect();

    let tasks: Vec<(usize, usize)> = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_none())
        .flat_map(|(i, _)| (0..config.repetitions).map(move |rep| (i, rep)))
        .collect();
    let accuracies: Vec<f64> = tasks
        .par_iter()
        .map(|&(i, rep)| {
            let cell = &cells[i];
            let sel = &selected[&(cell.key.sample_size, cell.key.num_categories)];
            run_rep(config, sel, cell, rep)
        })
        .collect::<Result<_>>()?;

    for (&(i, _), acc) in tasks.iter().zip(accuracies) {
        results[i].get_or_insert_with(Vec::new).push(acc);
    }

    let mut rows = Vec::with_capacity(cells.len());
    for (cell, accs) in cells.iter().zip(results) {
        let accs = accs.expect("every cell has results");
        if let Some(path) = &cell.cache_file {
            let body = serde_json::to_vec(&CachedCell {
                accuracies: accs.clone(),
            })?;
            write_atomic(path, &body)?;
        }
        let k = &cell.key;
        rows.push(ResultRow::from_accuracies(
            k.sample_size,
            k.num_categories,
            k.mode,
            &k.method,
            cell.seed,
            accs,
        ));
    }
    let mut table = ResultTable { rows, skipped };
    table.rows = table.sorted_rows().into_iter().cloned().collect();
    Ok(table)
}

/// Settings for [`run_correlation_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct CorrStudyConfig {
    /// Standard-mode epochs before losses are measured.
    pub epochs: usize,
    pub seed: u64,
    pub trainer: TrainConfig,
    pub min_count: usize,
}

impl CorrStudyConfig {
    pub fn new(epochs: usize, seed: u64) -> Self {
        CorrStudyConfig {
            epochs,
            seed,
            trainer: TrainConfig::new(Mode::Standard),
            min_count: 1,
        }
    }
}

/// Trains in standard mode on an augmented corpus for a few epochs, then
/// measures within- and cross-group loss correlation.
pub fn run_correlation_study(
    corpus: &LabeledCorpus,
    config: &CorrStudyConfig,
) -> Result<CorrelationReport> {
    let vocab = build_vocab(&corpus_tokens(corpus), config.min_count)?;
    let mut tc = config.trainer.clone();
    tc.mode = Mode::Standard;
    tc.epochs = config.epochs;
    tc.seed = derive_seed(config.seed, &["corr-train".into()]);
    let model = train(corpus, &vocab, &tc)?;
    correlation_study(
        corpus,
        &vocab,
        &model.params,
        &mut seed::stream(config.seed, &["corr-pairs".into()]),
    )
}
