//! Synthetic fixtures shared by the benchmarks.

use indexmap::IndexMap;

use ieforge::negatives::{build_hard_neg_dict, HardNegativeDictionary, SimilarityConfig};
use ieforge::{Annotations, LabelSet, Language, Split, TaskKind, Triple, UnifiedSample};

/// RE label set of `n` labels whose names share tokens, so the lexical
/// dictionary is non-trivial.
pub fn re_labels(n: usize) -> LabelSet {
    let names: Vec<String> = (0..n)
        .map(|i| format!("relation group{} kind{}", i % 7, i))
        .collect();
    LabelSet::plain(TaskKind::Re, &names).expect("unique labels")
}

pub fn dictionary(labels: &LabelSet) -> HardNegativeDictionary {
    let sim = SimilarityConfig {
        lexical_threshold: 0.3,
        ..Default::default()
    };
    build_hard_neg_dict(labels, &sim).expect("valid label set")
}

/// `count` samples, each with `positives` triples drawn round-robin from `labels`.
pub fn re_samples(labels: &LabelSet, count: usize, positives: usize) -> Vec<UnifiedSample> {
    let names: Vec<&str> = labels.names().collect();
    (0..count)
        .map(|i| UnifiedSample {
            id: format!("s{i}"),
            dataset: "bench".into(),
            split: Split::Train,
            language: Language::En,
            text: format!("Sample sentence {i} with head{i} and tail{i} mentioned in it."),
            annotations: Annotations::Re(
                (0..positives)
                    .map(|k| Triple {
                        relation: names[(i + k * 5) % names.len()].to_string(),
                        head: format!("head{i}"),
                        tail: format!("tail{i}"),
                    })
                    .collect(),
            ),
        })
        .collect()
}

pub fn ner_annotations(labels: &[&str], mention: &str) -> Annotations {
    let mut m = IndexMap::new();
    for l in labels {
        m.insert(l.to_string(), vec![mention.to_string()]);
    }
    Annotations::Ner(m)
}
