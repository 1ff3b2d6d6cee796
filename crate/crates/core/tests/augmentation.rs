use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use bagg::augment::{
    augment_observation, back_translate, eda_variant, random_swap, read_records, write_records,
    AugMethod, AugmentDeps, AugmentationPlan, HttpTranslator, SourceText, Thesaurus, Translator,
    BUILTIN_STOPWORDS, BUILTIN_THESAURUS,
};
use bagg::seed;
use bagg::textproc::{parse_word_list, tokenize, TokenSeq};
use bagg::Error;
use proptest::prelude::*;

/// Minimal HTTP/1.1 server answering each POST with `respond(body)`.
fn serve<F>(respond: F) -> (String, Arc<AtomicUsize>)
where
    F: Fn(&serde_json::Value) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/translate", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap_or(0);
                    }
                }
            }
            let mut body = vec![0u8; length];
            if reader.read_exact(&mut body).is_err() {
                continue;
            }
            counter.fetch_add(1, Ordering::SeqCst);
            let request: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
            let (status, payload) = respond(&request);
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
        }
    });
    (url, hits)
}

#[test]
fn http_translator_speaks_the_json_protocol() {
    let (url, hits) = serve(|req| {
        let text = req["text"].as_str().unwrap_or_default();
        let out = format!(
            "{} [{}>{}]",
            text.to_uppercase(),
            req["source"].as_str().unwrap(),
            req["target"].as_str().unwrap()
        );
        (200, serde_json::json!({ "text": out }).to_string())
    });
    let client = HttpTranslator::new(url, Duration::from_secs(5)).unwrap();
    assert_eq!(
        client.translate("hello", "en", "fr").unwrap(),
        "HELLO [en>fr]"
    );
    let round = back_translate("good movie", "de", &client, "obs1", 0).unwrap();
    assert_eq!(round, "GOOD MOVIE [EN>DE] [de>en]");
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn http_failures_are_retried_then_reported() {
    let (url, hits) = serve(|_| (503, "{}".to_string()));
    let client = HttpTranslator::new(url, Duration::from_secs(5)).unwrap();
    let err = back_translate("text", "fr", &client, "obs9", 2).unwrap_err();
    assert_eq!(hits.load(Ordering::SeqCst), 3);
    match err {
        Error::Translation {
            route, origin_id, ..
        } => {
            assert_eq!(route, "fr");
            assert_eq!(origin_id, "obs9");
        }
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn failed_variants_shrink_the_group() {
    let (url, _) = serve(|req| {
        if req["target"] == "ja" {
            (500, "{}".into())
        } else {
            (200, serde_json::json!({ "text": req["text"] }).to_string())
        }
    });
    let client = HttpTranslator::new(url, Duration::from_secs(5)).unwrap();
    let thesaurus = Thesaurus::default();
    let stopwords = HashSet::new();
    let deps = AugmentDeps {
        thesaurus: &thesaurus,
        stopwords: &stopwords,
        translator: Some(&client),
        master_seed: 0,
        retries: 0,
    };
    let plan =
        AugmentationPlan::new([(AugMethod::back_translate(["zh", "ja", "ko", "hi"]), 4)]).unwrap();
    let original = SourceText {
        id: "x".into(),
        text: "a short text".into(),
        label: 0,
    };
    let (obs, records) = augment_observation(&original, &plan, &deps).unwrap();
    assert_eq!(obs.group_size(), 4);
    assert_eq!(
        records.iter().map(|r| r.variant_index).collect::<Vec<_>>(),
        vec![0, 2, 3]
    );
}

#[test]
fn record_cache_round_trip_and_duplicates() {
    let thesaurus = Thesaurus::parse(BUILTIN_THESAURUS).unwrap();
    let stopwords = parse_word_list(BUILTIN_STOPWORDS);
    let deps = AugmentDeps {
        thesaurus: &thesaurus,
        stopwords: &stopwords,
        translator: None,
        master_seed: 11,
        retries: 0,
    };
    let plan = AugmentationPlan::new([(AugMethod::eda(0.1), 4)]).unwrap();
    let originals: Vec<SourceText> = ["the movie was good and the plot was quick", "a bad film"]
        .iter()
        .enumerate()
        .map(|(i, t)| SourceText {
            id: format!("o{i}"),
            text: t.to_string(),
            label: 0,
        })
        .collect();
    let records = bagg::augment::augment_corpus(&originals, &plan, &deps).unwrap();
    assert_eq!(records.len(), 8);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eda.jsonl");
    write_records(&path, &records).unwrap();
    assert_eq!(read_records(&path).unwrap(), records);

    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str(&(serde_json::to_string(&records[0]).unwrap() + "\n"));
    std::fs::write(&path, text).unwrap();
    let err = read_records(&path).unwrap_err().to_string();
    assert!(err.contains("9"), "{err}");
}

#[test]
fn augmentation_is_order_independent() {
    let thesaurus = Thesaurus::parse(BUILTIN_THESAURUS).unwrap();
    let stopwords = parse_word_list(BUILTIN_STOPWORDS);
    let deps = AugmentDeps {
        thesaurus: &thesaurus,
        stopwords: &stopwords,
        translator: None,
        master_seed: 5,
        retries: 0,
    };
    let plan = AugmentationPlan::new([(AugMethod::eda(0.2), 4)]).unwrap();
    let originals: Vec<SourceText> = (0..40)
        .map(|i| SourceText {
            id: format!("id{i}"),
            text: format!("good movie number {i} with a quick bad plot"),
            label: 0,
        })
        .collect();
    let forward = bagg::augment::augment_corpus(&originals, &plan, &deps).unwrap();
    let mut reversed_input = originals.clone();
    reversed_input.reverse();
    let mut backward = bagg::augment::augment_corpus(&reversed_input, &plan, &deps).unwrap();
    backward.sort_by(|a, b| {
        (a.origin_id[2..].parse::<usize>().unwrap(), a.variant_index)
            .cmp(&(b.origin_id[2..].parse::<usize>().unwrap(), b.variant_index))
    });
    assert_eq!(forward, backward);
}

#[test]
fn plan_is_recovered_from_records() {
    let plan = AugmentationPlan::new([
        (AugMethod::eda(0.1), 4),
        (AugMethod::back_translate(["fr", "pt", "es", "it"]), 4),
    ])
    .unwrap();
    let records: Vec<_> = plan
        .method_ids()
        .into_iter()
        .flat_map(|m| {
            (0..4).map(move |v| bagg::augment::AugRecord {
                origin_id: "a".into(),
                method: m.clone(),
                variant_index: v,
                text: "t".into(),
            })
        })
        .collect();
    let back = AugmentationPlan::from_records(&records).unwrap();
    assert_eq!(back.method_ids(), plan.method_ids());
    assert_eq!(back.group_size(), 9);
}

proptest! {
    #[test]
    fn swap_preserves_multiset(words in proptest::collection::vec("[a-z]{1,5}", 0..30), n in 0usize..10, s in any::<u64>()) {
        let seq = TokenSeq::new(words.clone());
        let out = random_swap(&seq, n, &mut seed::stream(s, &[]));
        let mut a = words;
        let mut b = out.into_tokens();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn eda_variants_are_reproducible(text in "[a-z ]{0,60}", idx in 0usize..8, s in any::<u64>()) {
        let thesaurus = Thesaurus::parse(BUILTIN_THESAURUS).unwrap();
        let stopwords = parse_word_list(BUILTIN_STOPWORDS);
        let a = eda_variant(&text, idx, 0.1, &thesaurus, &stopwords, &mut seed::stream(s, &[]));
        let b = eda_variant(&text, idx, 0.1, &thesaurus, &stopwords, &mut seed::stream(s, &[]));
        prop_assert_eq!(&a, &b);
        if !tokenize(&text).is_empty() {
            prop_assert!(!tokenize(&a).is_empty());
        }
    }
}
