use std::path::Path;
use std::process::{Command, Output};

fn bagg(args: &[&str], dir: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_bagg"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    out
}

fn ok(args: &[&str], dir: &Path) -> Output {
    let out = bagg(args, dir);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth(dir: &Path) {
    ok(
        &[
            "synth",
            "--classes",
            "4",
            "--size",
            "120",
            "--seed",
            "3",
            "--out",
            "corpus.jsonl",
            "--eda-out",
            "aug/eda.jsonl",
        ],
        dir,
    );
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("aug")).unwrap();
    synth(dir.path());
    dir
}

#[test]
fn bench_is_reproducible_and_reports_render() {
    let dir = setup();
    let d = dir.path();
    let bench = |out: &str| {
        ok(
            &[
                "bench",
                "--data",
                "corpus.jsonl",
                "--aug-dir",
                "aug",
                "--methods",
                "eda",
                "--n",
                "40",
                "--cats",
                "4",
                "--reps",
                "2",
                "--epochs",
                "2",
                "--seed",
                "9",
                "--out",
                out,
            ],
            d,
        )
    };
    bench("a.csv");
    bench("b.csv");
    let a = std::fs::read(d.join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with(
        "sample_size,num_categories,mode,method,mean_accuracy,std_dev,repetitions,seed\n"
    ));
    assert_eq!(text.lines().count(), 4);

    let md = ok(&["report", "--results", "a.csv", "--format", "md"], d);
    let md = String::from_utf8(md.stdout).unwrap();
    assert!(md.starts_with("| Sample Size | Categories | Baseline | Standard EDA | BAGG EDA |"));
    ok(
        &[
            "report",
            "--results",
            "a.csv",
            "--format",
            "svg",
            "--out",
            "chart.svg",
        ],
        d,
    );
    assert!(std::fs::read_to_string(d.join("chart.svg"))
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn augment_train_and_corr_study() {
    let dir = setup();
    let d = dir.path();
    ok(
        &[
            "augment",
            "--input",
            "corpus.jsonl",
            "--out",
            "bt.jsonl",
            "--method",
            "bt",
            "--bt-mock",
            "deterministic",
            "--seed",
            "1",
        ],
        d,
    );
    let lines = std::fs::read_to_string(d.join("bt.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 120 * 4);
    assert!(lines.contains("\"method\":\"bt:fr,pt,es,it\""));

    ok(
        &[
            "augment",
            "--input",
            "corpus.jsonl",
            "--out",
            "eda.jsonl",
            "--method",
            "eda",
            "--count",
            "2",
        ],
        d,
    );
    assert_eq!(
        std::fs::read_to_string(d.join("eda.jsonl"))
            .unwrap()
            .lines()
            .count(),
        240
    );

    ok(
        &[
            "train",
            "--data",
            "corpus.jsonl",
            "--aug",
            "bt.jsonl",
            "--mode",
            "bagg",
            "--epochs",
            "2",
            "--out",
            "model.bin",
        ],
        d,
    );
    assert!(d.join("model.bin").exists() && d.join("model.bin.vocab").exists());

    ok(
        &[
            "corr-study",
            "--data",
            "corpus.jsonl",
            "--aug",
            "aug/eda.jsonl",
            "--steps",
            "2",
            "--out",
            "corr.json",
        ],
        d,
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("corr.json")).unwrap()).unwrap();
    assert_eq!(report["within_pairs"], 120 * 10);
}

#[test]
fn bad_invocations_fail_cleanly() {
    let dir = setup();
    let d = dir.path();
    let out = bagg(
        &[
            "augment",
            "--input",
            "corpus.jsonl",
            "--out",
            "x.jsonl",
            "--method",
            "bt",
        ],
        d,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--bt-endpoint"));
    let out = bagg(&["train", "--data", "missing.jsonl", "--out", "m.bin"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.jsonl"));
}

#[test]
fn csv_import() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("in.csv"),
        "id,text,label\n1,good film,pos\n2,\"bad, slow\",neg\n",
    )
    .unwrap();
    ok(
        &["import-csv", "--input", "in.csv", "--out", "out.jsonl"],
        d,
    );
    let text = std::fs::read_to_string(d.join("out.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.contains("bad, slow"));
}
