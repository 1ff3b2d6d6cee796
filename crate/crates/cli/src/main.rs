use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use bagg::augment::{
    augment_corpus, read_records, write_records, AugMethod, AugmentDeps, AugmentationPlan,
    HttpTranslator, IdentityTranslator, MockTranslator, Thesaurus, Translator, BUILTIN_STOPWORDS,
    BUILTIN_THESAURUS, DEFAULT_ALPHA, DEFAULT_COUNT, ROUTES_B,
};
use bagg::bench::{
    corpus_tokens, format_table, make_synthetic_corpus, plan_for, read_results,
    run_correlation_study, run_experiment, synthetic_thesaurus, write_chart, AugmentationSource,
    CorrStudyConfig, ExperimentConfig, SyntheticConfig, TableFormat, METHODS,
};
use bagg::dataset::{attach_augmentations, import_csv, load_jsonl, LabeledCorpus};
use bagg::model::PoolSpace;
use bagg::seed;
use bagg::textproc::{build_vocab, load_word_list, parse_word_list};
use bagg::trainer::{train, Mode, OptimizerKind, TrainConfig};

#[derive(Parser)]
#[command(
    name = "bagg",
    version,
    about = "Text classification with batch-aggregated augmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate augmented texts for a corpus and write them as JSONL records.
    Augment(AugmentArgs),
    /// Train one model and write a checkpoint.
    Train(TrainArgs),
    /// Run the repeated-split benchmark grid.
    Bench(BenchArgs),
    /// Render a results file as Markdown, CSV or SVG.
    Report(ReportArgs),
    /// Measure within- versus cross-group loss correlation.
    CorrStudy(CorrArgs),
    /// Convert a `text,label` CSV into corpus JSONL.
    ImportCsv(ImportArgs),
    /// Write a synthetic corpus, optionally with EDA augmentations.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Eda,
    Bt,
}

#[derive(Clone, Copy, ValueEnum)]
enum MockArg {
    Deterministic,
    Identity,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, default_value_t = DEFAULT_COUNT)]
    count: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pivot languages for back-translation.
    #[arg(long, value_delimiter = ',', default_values_t = ROUTES_B.map(String::from))]
    routes: Vec<String>,
    #[arg(long, env = "BAGG_BT_ENDPOINT", conflicts_with = "bt_mock")]
    bt_endpoint: Option<String>,
    #[arg(long, value_enum)]
    bt_mock: Option<MockArg>,
    /// Per-request timeout in seconds.
    #[arg(long, env = "BAGG_BT_TIMEOUT", default_value_t = 30)]
    bt_timeout: u64,
    #[arg(long, env = "BAGG_BT_RETRIES", default_value_t = 3)]
    bt_retries: usize,
    /// Tab-separated thesaurus; the built-in list is used otherwise.
    #[arg(long)]
    thesaurus: Option<PathBuf>,
    /// One stopword per line; the built-in list is used otherwise.
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Augmentation records to attach (ignored in baseline mode).
    #[arg(long)]
    aug: Option<PathBuf>,
    #[arg(long, default_value = "bagg")]
    mode: Mode,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Groups per batch in bagg mode, texts per batch otherwise.
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "prob")]
    pool: PoolSpace,
    #[arg(long)]
    sgd: bool,
    #[arg(long, default_value_t = 1)]
    min_count: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    data: PathBuf,
    /// Directory holding eda.jsonl, bt_a.jsonl and bt_b.jsonl.
    #[arg(long)]
    aug_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = Mode::ALL)]
    modes: Vec<Mode>,
    #[arg(long, value_delimiter = ',', default_values_t = METHODS.map(String::from))]
    methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = [100, 200])]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [8, 12])]
    cats: Vec<usize>,
    #[arg(long, default_value_t = 25)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value = "prob")]
    pool: PoolSpace,
    /// Reuse finished cells from this directory.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Md,
    Csv,
    Svg,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long, value_enum, default_value = "md")]
    format: FormatArg,
    /// Written to stdout when omitted (md and csv only).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorrArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    aug: PathBuf,
    /// Standard-mode training epochs before losses are measured.
    #[arg(long, default_value_t = 5)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    classes: usize,
    #[arg(long, default_value_t = 800)]
    size: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0.3)]
    dropout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write EDA records built with the synthetic thesaurus.
    #[arg(long)]
    eda_out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_COUNT)]
    count: usize,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Augment(a) => augment(a),
        Command::Train(a) => train_cmd(a),
        Command::Bench(a) => bench(a),
        Command::Report(a) => report(a),
        Command::CorrStudy(a) => corr_study(a),
        Command::ImportCsv(a) => {
            let corpus = import_csv(&a.input)?;
            corpus.write_jsonl(&a.out)?;
            log::info!("wrote {} observations to {}", corpus.len(), a.out.display());
            Ok(())
        }
        Command::Synth(a) => synth(a),
    }
}

fn augment(a: AugmentArgs) -> Result<()> {
    let corpus = load_jsonl(&a.input)?;
    let method = match a.method {
        MethodArg::Eda => AugMethod::eda(a.alpha),
        MethodArg::Bt => AugMethod::back_translate(a.routes.clone()),
    };
    let plan = AugmentationPlan::new([(method, a.count)])?;
    let thesaurus = match &a.thesaurus {
        Some(p) => Thesaurus::load(p)?,
        None => Thesaurus::parse(BUILTIN_THESAURUS)?,
    };
    let stopwords: HashSet<String> = match &a.stopwords {
        Some(p) => load_word_list(p)?,
        None => parse_word_list(BUILTIN_STOPWORDS),
    };
    let translator: Option<Box<dyn Translator>> = match (a.method, &a.bt_endpoint, a.bt_mock) {
        (MethodArg::Eda, _, _) => None,
        (MethodArg::Bt, Some(url), _) => Some(Box::new(HttpTranslator::new(
            url.clone(),
            Duration::from_secs(a.bt_timeout),
        )?)),
        (MethodArg::Bt, None, Some(MockArg::Identity)) => Some(Box::new(IdentityTranslator)),
        (MethodArg::Bt, None, Some(MockArg::Deterministic)) => {
            Some(Box::new(MockTranslator::new(a.seed)))
        }
        (MethodArg::Bt, None, None) => bail!("back-translation needs --bt-endpoint or --bt-mock"),
    };
    let deps = AugmentDeps {
        thesaurus: &thesaurus,
        stopwords: &stopwords,
        translator: translator.as_deref(),
        master_seed: a.seed,
        retries: a.bt_retries,
    };
    let records = augment_corpus(&corpus.source_texts(), &plan, &deps)?;
    write_records(&a.out, &records)?;
    let expected = corpus.len() * a.count;
    if records.len() < expected {
        log::warn!(
            "{} of {expected} variants could not be produced",
            expected - records.len()
        );
    }
    log::info!("wrote {} records to {}", records.len(), a.out.display());
    Ok(())
}

fn with_augmentations(corpus: LabeledCorpus, aug: Option<&Path>) -> Result<LabeledCorpus> {
    let Some(path) = aug else { return Ok(corpus) };
    let records = read_records(path)?;
    let plan = AugmentationPlan::from_records(&records)?;
    let attached = attach_augmentations(&corpus, &records, &plan);
    for w in &attached.warnings {
        log::warn!("{w}");
    }
    Ok(attached.corpus)
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let corpus = load_jsonl(&a.data)?;
    let corpus = match a.mode {
        Mode::Baseline => corpus,
        _ => with_augmentations(corpus, a.aug.as_deref())?,
    };
    let vocab = build_vocab(&corpus_tokens(&corpus), a.min_count)?;
    let mut config = TrainConfig::new(a.mode);
    config.epochs = a.epochs;
    config.learning_rate = a.lr;
    config.batch_size = a.batch.unwrap_or(a.mode.default_batch_size());
    config.seed = a.seed;
    config.pool_space = a.pool;
    if a.sgd {
        config.optimizer = OptimizerKind::Sgd;
    }
    let model = train(&corpus, &vocab, &config)?;
    model.save(&a.out)?;
    log::info!(
        "trained {} epochs on {} observations ({} texts), final loss {:.4}; wrote {}",
        config.epochs,
        corpus.len(),
        corpus.total_texts(),
        model.epoch_losses.last().copied().unwrap_or(f64::NAN),
        a.out.display()
    );
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let corpus = load_jsonl(&a.data)?;
    let source = match &a.aug_dir {
        Some(dir) => AugmentationSource::from_dir(dir)?,
        None => AugmentationSource::new(),
    };
    for m in &a.methods {
        plan_for(m)?;
    }
    let mut config = ExperimentConfig {
        sample_sizes: a.n,
        num_categories: a.cats,
        methods: a.methods,
        modes: a.modes,
        repetitions: a.reps,
        master_seed: a.seed,
        cache_dir: a.cache_dir,
        ..ExperimentConfig::default()
    };
    config.trainer.epochs = a.epochs;
    config.trainer.learning_rate = a.lr;
    config.trainer.pool_space = a.pool;
    let table = run_experiment(&config, &corpus, &source)?;
    for s in &table.skipped {
        log::warn!(
            "skipped n={}, C={}, {}/{}: {}",
            s.sample_size,
            s.num_categories,
            s.mode,
            s.method,
            s.reason
        );
    }
    write_text(&a.out, &format_table(&table, TableFormat::Csv)?)?;
    log::info!("wrote {} rows to {}", table.rows.len(), a.out.display());
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let table = read_results(&a.results)?;
    let text = match a.format {
        FormatArg::Md => format_table(&table, TableFormat::Markdown)?,
        FormatArg::Csv => format_table(&table, TableFormat::Csv)?,
        FormatArg::Svg => {
            let out = a.out.context("--out is required for svg output")?;
            write_chart(&table, &out)?;
            return Ok(());
        }
    };
    match a.out {
        Some(out) => write_text(&out, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn corr_study(a: CorrArgs) -> Result<()> {
    let corpus = with_augmentations(load_jsonl(&a.data)?, Some(&a.aug))?;
    let report = run_correlation_study(&corpus, &CorrStudyConfig::new(a.steps, a.seed))?;
    write_text(&a.out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    log::info!(
        "within {:?} vs cross {:?} over {} within-group pairs",
        report.within_group_corr,
        report.cross_group_corr,
        report.within_pairs
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let config = SyntheticConfig {
        noise_level: a.noise,
        dropout: a.dropout,
        ..SyntheticConfig::new(a.classes, a.size)
    };
    let corpus = make_synthetic_corpus(&config, &mut seed::stream(a.seed, &["corpus".into()]))?;
    corpus.write_jsonl(&a.out)?;
    if let Some(eda_out) = &a.eda_out {
        let thesaurus = synthetic_thesaurus(config.classes, config.noise_vocab);
        let deps = AugmentDeps {
            thesaurus: &thesaurus,
            stopwords: &HashSet::new(),
            translator: None,
            master_seed: a.seed,
            retries: 0,
        };
        let plan = AugmentationPlan::new([(AugMethod::eda(DEFAULT_ALPHA), a.count)])?;
        write_records(
            eda_out,
            &augment_corpus(&corpus.source_texts(), &plan, &deps)?,
        )?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
