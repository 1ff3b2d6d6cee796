#![allow(dead_code)]

use std::collections::HashSet;

use bagg::augment::{augment_corpus, AugmentDeps, MockTranslator};
use bagg::bench::{
    make_synthetic_corpus, plan_for, synthetic_thesaurus, AugmentationSource, SyntheticConfig,
};
use bagg::dataset::LabeledCorpus;
use bagg::model::EncodedGroup;
use bagg::seed;
use rand::Rng;

/// Synthetic corpus plus EDA records built with its own thesaurus.
pub fn synthetic_with_eda(
    config: &SyntheticConfig,
    master: u64,
) -> (LabeledCorpus, AugmentationSource) {
    let corpus =
        make_synthetic_corpus(config, &mut seed::stream(master, &["corpus".into()])).unwrap();
    let mut source = AugmentationSource::new();
    source.insert("eda", records_for(&corpus, config, "eda", master));
    (corpus, source)
}

/// Records for a bench method (`eda`, `bt_a` or `bt_b`) on a synthetic corpus.
pub fn records_for(
    corpus: &LabeledCorpus,
    config: &SyntheticConfig,
    method: &str,
    master: u64,
) -> Vec<bagg::augment::AugRecord> {
    let thesaurus = synthetic_thesaurus(config.classes, config.noise_vocab);
    let stopwords = HashSet::new();
    let mock = MockTranslator::new(master);
    let deps = AugmentDeps {
        thesaurus: &thesaurus,
        stopwords: &stopwords,
        translator: Some(&mock),
        master_seed: master,
        retries: 0,
    };
    augment_corpus(&corpus.source_texts(), &plan_for(method).unwrap(), &deps).unwrap()
}

/// Groups of the given sizes with random token ids below `vocab` and labels
/// below `classes`.
pub fn random_batch(
    rng: &mut impl Rng,
    sizes: &[usize],
    vocab: usize,
    classes: usize,
) -> Vec<EncodedGroup> {
    sizes
        .iter()
        .map(|&m| {
            let texts = (0..m)
                .map(|_| {
                    (0..rng.gen_range(1..=6))
                        .map(|_| rng.gen_range(0..vocab))
                        .collect()
                })
                .collect();
            EncodedGroup::new(texts, rng.gen_range(0..classes))
        })
        .collect()
}
