//! Hard-negative schema dictionary and per-sample schema pools.
//!
//! The dictionary maps every label of a dataset to the labels it is easily
//! confused with. A sample's pool is its positive labels, the dictionary
//! neighbours of those positives, and a few randomly drawn other labels,
//! shuffled with a per-sample RNG stream.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{positive_labels, LabelSet, TaskKind, UnifiedSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    CuratedOnly,
    Lexical,
    #[default]
    LexicalPlusCurated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityConfig {
    pub mode: SimilarityMode,
    pub lexical_threshold: f64,
    pub max_neighbors_per_key: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curated_overrides: Option<IndexMap<String, Vec<String>>>,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            mode: SimilarityMode::LexicalPlusCurated,
            lexical_threshold: 0.5,
            max_neighbors_per_key: 5,
            curated_overrides: None,
        }
    }
}

/// Label -> confusable labels, for one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardNegativeDictionary {
    pub task: TaskKind,
    pub entries: IndexMap<String, Vec<String>>,
}

impl HardNegativeDictionary {
    pub fn neighbors(&self, label: &str) -> &[String] {
        self.entries.get(label).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Read a curated dictionary file: one JSON object of label -> labels.
pub fn load_curated(path: &Path) -> Result<IndexMap<String, Vec<String>>> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&body)?)
}

fn label_tokens(label: &str) -> HashSet<String> {
    label
        .split(|c: char| c.is_whitespace() || c == '_')
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Jaccard similarity over lowercased whitespace/underscore tokens.
pub fn lexical_similarity(a: &str, b: &str) -> f64 {
    let (ta, tb) = (label_tokens(a), label_tokens(b));
    let union = ta.union(&tb).count();
    if union == 0 {
        return 0.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

pub fn build_hard_neg_dict(
    label_set: &LabelSet,
    sim: &SimilarityConfig,
) -> Result<HardNegativeDictionary> {
    if !(0.0..=1.0).contains(&sim.lexical_threshold) {
        return Err(Error::Config(format!(
            "lexical_threshold {} outside [0,1]",
            sim.lexical_threshold
        )));
    }
    let names: Vec<&str> = label_set.names().collect();
    let mut entries: IndexMap<String, Vec<String>> =
        names.iter().map(|n| (n.to_string(), Vec::new())).collect();

    if sim.mode != SimilarityMode::CuratedOnly {
        for key in &names {
            let mut scored: Vec<(f64, usize, &str)> = names
                .iter()
                .enumerate()
                .filter(|(_, other)| *other != key)
                .map(|(pos, other)| (lexical_similarity(key, other), pos, *other))
                .filter(|(score, _, _)| *score > 0.0 && *score >= sim.lexical_threshold)
                .collect();
            // higher similarity first, label-set order breaks ties
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            scored.truncate(sim.max_neighbors_per_key);
            entries[*key] = scored.into_iter().map(|(_, _, l)| l.to_string()).collect();
        }
    }

    if sim.mode != SimilarityMode::Lexical {
        if let Some(overrides) = &sim.curated_overrides {
            for (key, values) in overrides {
                if !label_set.contains(key) {
                    return Err(Error::Config(format!(
                        "curated dictionary key `{key}` is not a label"
                    )));
                }
                for v in values {
                    if !label_set.contains(v) {
                        return Err(Error::Config(format!(
                            "curated dictionary value `{v}` (under `{key}`) is not a label"
                        )));
                    }
                    if v == key {
                        return Err(Error::Config(format!(
                            "curated dictionary lists `{key}` under itself"
                        )));
                    }
                    let list = &mut entries[key.as_str()];
                    if !list.contains(v) {
                        list.push(v.clone());
                    }
                }
            }
        }
    }

    Ok(HardNegativeDictionary {
        task: label_set.task(),
        entries,
    })
}

/// Deterministic RNG stream for one sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub dataset: String,
    pub sample_id: String,
}

impl RngStream {
    pub fn new(seed: u64, dataset: &str, sample_id: &str) -> Self {
        RngStream {
            seed,
            dataset: dataset.to_string(),
            sample_id: sample_id.to_string(),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update((self.dataset.len() as u64).to_le_bytes());
        h.update(self.dataset.as_bytes());
        h.update(self.sample_id.as_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}

/// Positive, hard-negative and sampled-other labels of one sample, plus
/// the shuffled pool built from them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemaPartition {
    pub positive: Vec<String>,
    pub hard_negative: Vec<String>,
    pub other_negative_sampled: Vec<String>,
    pub pool: Vec<String>,
}

fn in_label_order(label_set: &LabelSet, mut labels: Vec<String>) -> Vec<String> {
    labels.sort_by_key(|l| label_set.position(l).unwrap_or(usize::MAX));
    labels
}

pub fn assemble_schema_pool(
    sample: &UnifiedSample,
    label_set: &LabelSet,
    dict: &HardNegativeDictionary,
    split_num: usize,
    stream: &RngStream,
) -> SchemaPartition {
    let positives = positive_labels(sample);
    let positive = in_label_order(label_set, positives.iter().cloned().collect());

    let mut hard: Vec<String> = Vec::new();
    for p in &positive {
        for n in dict.neighbors(p) {
            if !positives.contains(n) && !hard.contains(n) {
                hard.push(n.clone());
            }
        }
    }
    let hard_negative = in_label_order(label_set, hard);

    let others: Vec<&str> = label_set
        .names()
        .filter(|l| !positives.contains(*l) && !hard_negative.iter().any(|h| h == l))
        .collect();

    let mut rng = stream.rng();
    let amount = split_num.min(others.len());
    let mut picked = index::sample(&mut rng, others.len(), amount).into_vec();
    picked.sort_unstable();
    let other_negative_sampled: Vec<String> =
        picked.into_iter().map(|i| others[i].to_string()).collect();

    let mut pool: Vec<String> = positive
        .iter()
        .chain(&hard_negative)
        .chain(&other_negative_sampled)
        .cloned()
        .collect();
    pool.shuffle(&mut rng);

    SchemaPartition {
        positive,
        hard_negative,
        other_negative_sampled,
        pool,
    }
}
