//! Synthetic curricula and lexicons for simulation, tests and benchmarks.

use std::collections::BTreeSet;

use crate::graph::{Feature, FeatureKind, LanguageModel};
use crate::rng::SplitMix64;
use crate::selector::{ContentItem, ContentKind, Lexicon};

const KINDS: [FeatureKind; 5] = [
    FeatureKind::Grapheme,
    FeatureKind::Phoneme,
    FeatureKind::Morphology,
    FeatureKind::Syntax,
    FeatureKind::Vocabulary,
];

fn feature(id: String, year: u32, kind: FeatureKind, prerequisites: BTreeSet<String>) -> Feature {
    Feature {
        label: format!("feature {id}"),
        id,
        kind,
        year,
        prerequisites,
    }
}

/// `len` features `f00 -> f01 -> ...`, all introduced in `year`.
pub fn chain(len: usize, year: u32) -> LanguageModel {
    let features = (0..len)
        .map(|i| {
            let prereqs = if i == 0 {
                BTreeSet::new()
            } else {
                BTreeSet::from([format!("f{:02}", i - 1)])
            };
            feature(format!("f{i:02}"), year, KINDS[i % KINDS.len()], prereqs)
        })
        .collect();
    LanguageModel::new("en", 7.5, features).expect("chain is well-formed")
}

/// A random DAG on `n` features. Node `i` draws up to `max_prereqs`
/// prerequisites among earlier nodes; ids are a seeded permutation so id
/// order and creation order differ. Years never decrease along an edge.
pub fn random_dag(n: usize, max_prereqs: usize, seed: u64) -> LanguageModel {
    let mut rng = SplitMix64::new(seed);
    let mut labels: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        labels.swap(i, j);
    }
    let id = |i: usize| format!("f{:02}", labels[i]);

    let mut years = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n);
    for i in 0..n {
        let mut prereqs = BTreeSet::new();
        if i > 0 {
            let k = rng.below(max_prereqs as u64 + 1) as usize;
            for _ in 0..k {
                prereqs.insert(rng.below(i as u64) as usize);
            }
        }
        let base = prereqs.iter().map(|&p| years[p]).max().unwrap_or(1);
        let year = (base + rng.below(2) as u32).min(4);
        years.push(year);
        features.push(feature(
            id(i),
            year,
            KINDS[rng.below(KINDS.len() as u64) as usize],
            prereqs.into_iter().map(id).collect(),
        ));
    }
    LanguageModel::new("en", 7.5, features).expect("generated DAG is well-formed")
}

/// `per_feature` single-feature words for every feature, plus one sentence
/// per feature that also exercises a prerequisite when there is one.
pub fn covering_lexicon(model: &LanguageModel, per_feature: usize) -> Lexicon {
    let mut items = Vec::new();
    for (n, f) in model.features.values().enumerate() {
        for k in 0..per_feature {
            items.push(ContentItem {
                text: format!("{}-w{k}", f.id),
                kind: ContentKind::Word,
                features: BTreeSet::from([f.id.clone()]),
                difficulty: (1 + (k % 5)) as u8,
            });
        }
        let mut features = BTreeSet::from([f.id.clone()]);
        features.extend(f.prerequisites.iter().next().cloned());
        items.push(ContentItem {
            text: format!("{} sentence", f.id),
            kind: ContentKind::Sentence,
            features,
            difficulty: (1 + n % 5) as u8,
        });
    }
    Lexicon {
        language: model.language.clone(),
        items,
    }
}
