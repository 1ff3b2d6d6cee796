mod common;

use bagg::bench::{
    format_table, parse_csv, read_results, render_chart, run_experiment, AugmentationSource,
    ExperimentConfig, ResultRow, ResultTable, SyntheticConfig, TableFormat, CSV_HEADER, MISSING,
    PLOT_HEIGHT,
};
use bagg::trainer::Mode;
use proptest::prelude::*;

fn row(n: usize, c: usize, mode: Mode, method: &str, acc: f64) -> ResultRow {
    ResultRow::from_accuracies(n, c, mode, method, 7, vec![acc])
}

fn table(rows: Vec<ResultRow>) -> ResultTable {
    ResultTable {
        rows,
        skipped: Vec::new(),
    }
}

#[test]
fn markdown_marks_missing_cells() {
    let t = table(vec![
        row(100, 8, Mode::Baseline, "none", 0.338),
        row(100, 8, Mode::Bagg, "eda", 0.472),
        row(200, 8, Mode::Baseline, "none", 0.375),
    ]);
    let md = format_table(&t, TableFormat::Markdown).unwrap();
    let lines: Vec<&str> = md.lines().collect();
    assert_eq!(
        lines[0],
        "| Sample Size | Categories | Baseline | BAGG EDA |"
    );
    assert_eq!(lines[1], "|---:|---:|---:|---:|");
    assert_eq!(lines[2], "| 100 | 8 | 33.80% | 47.20% |");
    assert_eq!(lines[3], format!("| 200 | 8 | 37.50% | {MISSING} |"));
}

#[test]
fn csv_layout_is_fixed() {
    let t = table(vec![
        row(100, 8, Mode::Standard, "eda", 0.5),
        row(100, 8, Mode::Baseline, "none", 0.25),
    ]);
    let csv = format_table(&t, TableFormat::Csv).unwrap();
    assert_eq!(
        csv,
        format!("{CSV_HEADER}\n100,8,baseline,none,0.250000,0.000000,1,7\n100,8,standard,eda,0.500000,0.000000,1,7\n")
    );
}

#[test]
fn empty_table_is_rejected() {
    assert!(format_table(&table(vec![]), TableFormat::Csv).is_err());
    assert!(render_chart(&table(vec![])).is_err());
}

#[test]
fn results_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    let t = table(vec![row(100, 12, Mode::Bagg, "combined", 0.502)]);
    std::fs::write(&path, format_table(&t, TableFormat::Csv).unwrap()).unwrap();
    let back = read_results(&path).unwrap();
    assert_eq!(back.rows.len(), 1);
    assert_eq!(back.rows[0].method, "combined");
    assert_eq!(back.rows[0].mean_accuracy, 0.502);
}

#[test]
fn chart_bars_match_accuracies() {
    let t = table(vec![
        row(100, 8, Mode::Baseline, "none", 0.338),
        row(100, 8, Mode::Standard, "eda", 0.418),
        row(100, 8, Mode::Bagg, "eda", 0.472),
        row(200, 12, Mode::Baseline, "none", 0.333),
        row(200, 12, Mode::Bagg, "eda", 0.399),
    ]);
    let svg = render_chart(&t).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let bars: Vec<_> = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("bar"))
        .collect();
    assert_eq!(bars.len(), 5);
    for bar in bars {
        let acc: f64 = bar.attribute("data-accuracy").unwrap().parse().unwrap();
        let h: f64 = bar.attribute("height").unwrap().parse().unwrap();
        assert!(
            (h - acc * PLOT_HEIGHT).abs() <= 0.5,
            "height {h} for accuracy {acc}"
        );
    }
}

#[test]
fn single_row_chart_has_one_bar() {
    let svg = render_chart(&table(vec![row(100, 8, Mode::Bagg, "eda", 0.9)])).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(
        doc.descendants()
            .filter(|n| n.attribute("class") == Some("bar"))
            .count(),
        1
    );
}

fn small_grid() -> (
    bagg::dataset::LabeledCorpus,
    AugmentationSource,
    ExperimentConfig,
) {
    let synth = SyntheticConfig::new(6, 150);
    let (corpus, source) = common::synthetic_with_eda(&synth, 3);
    let mut config = ExperimentConfig {
        sample_sizes: vec![40],
        num_categories: vec![4, 6],
        methods: vec!["eda".into()],
        repetitions: 2,
        master_seed: 3,
        ..ExperimentConfig::default()
    };
    config.trainer.epochs = 2;
    config.trainer.embed_dim = 8;
    config.trainer.hidden_dim = 8;
    (corpus, source, config)
}

#[test]
fn one_row_per_mode_and_method() {
    let (corpus, source, mut config) = small_grid();
    config.num_categories = vec![4];
    config.repetitions = 1;
    let t = run_experiment(&config, &corpus, &source).unwrap();
    let keys: Vec<(Mode, &str)> = t.rows.iter().map(|r| (r.mode, r.method.as_str())).collect();
    assert_eq!(
        keys,
        vec![
            (Mode::Baseline, "none"),
            (Mode::Standard, "eda"),
            (Mode::Bagg, "eda")
        ]
    );
    assert!(t
        .rows
        .iter()
        .all(|r| r.repetitions == 1 && (0.0..=1.0).contains(&r.mean_accuracy)));
}

#[test]
fn cells_do_not_share_random_streams() {
    let (corpus, source, config) = small_grid();
    let full = run_experiment(&config, &corpus, &source).unwrap();
    let mut reduced = config.clone();
    reduced.num_categories = vec![6];
    let part = run_experiment(&reduced, &corpus, &source).unwrap();
    let six: Vec<_> = full
        .rows
        .iter()
        .filter(|r| r.num_categories == 6)
        .cloned()
        .collect();
    assert_eq!(six, part.rows);
}

#[test]
fn infeasible_cells_are_skipped() {
    let (corpus, source, mut config) = small_grid();
    config.num_categories = vec![4, 9];
    config.methods = vec!["eda".into(), "bt_a".into()];
    let t = run_experiment(&config, &corpus, &source).unwrap();
    assert!(t
        .rows
        .iter()
        .all(|r| r.num_categories == 4 && r.method != "bt_a"));
    // C=9: baseline + 2 methods x 2 modes; C=4: bt_a for two modes
    assert_eq!(t.skipped.len(), 5 + 2);
    assert!(t.skipped.iter().any(|s| s.reason.contains("categories")));
}

#[test]
fn cache_is_reused() {
    let (corpus, source, mut config) = small_grid();
    let dir = tempfile::tempdir().unwrap();
    config.cache_dir = Some(dir.path().to_path_buf());
    let first = run_experiment(&config, &corpus, &source).unwrap();
    let files = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(files, first.rows.len());
    // a sentinel no real run can produce proves the cell was read back
    let entry = std::fs::read_dir(dir.path())
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    std::fs::write(&entry, r#"{"accuracies":[0.123456,0.123456]}"#).unwrap();
    let second = run_experiment(&config, &corpus, &source).unwrap();
    assert_eq!(
        second
            .rows
            .iter()
            .filter(|r| r.mean_accuracy == 0.123456)
            .count(),
        1
    );
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), files);
}

proptest! {
    #[test]
    fn csv_round_trip(accs in proptest::collection::vec(0.0f64..=1.0, 1..6), seed in any::<u64>()) {
        let methods = ["none", "eda", "bt_a", "bt_b", "combined", "google"];
        let rows: Vec<ResultRow> = accs
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let mode = if i == 0 { Mode::Baseline } else { Mode::Bagg };
                ResultRow::from_accuracies(100, 8, mode, methods[i], seed, vec![a, 1.0 - a])
            })
            .collect();
        let t = table(rows);
        let back = parse_csv(&format_table(&t, TableFormat::Csv).unwrap()).unwrap();
        prop_assert_eq!(back.rows.len(), t.rows.len());
        for (a, b) in t.sorted_rows().into_iter().zip(&back.rows) {
            prop_assert_eq!((a.sample_size, a.num_categories, a.mode, &a.method, a.seed), (b.sample_size, b.num_categories, b.mode, &b.method, b.seed));
            prop_assert!((a.mean_accuracy - b.mean_accuracy).abs() <= 5e-7);
            prop_assert!((a.std_dev - b.std_dev).abs() <= 5e-7);
        }
    }
}
