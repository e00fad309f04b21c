//! Dataset cleaning: within-split deduplication, cross-split leakage
//! removal and three heuristic quality rules, always applied in that order.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Language, Split, UnifiedSample};
use crate::text::is_letter;

pub const ENGLISH_STOPWORDS: &[&str] = &[
    "a",
    "about",
    "above",
    "after",
    "again",
    "against",
    "all",
    "am",
    "an",
    "and",
    "any",
    "are",
    "as",
    "at",
    "be",
    "because",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "but",
    "by",
    "can",
    "did",
    "do",
    "does",
    "doing",
    "down",
    "during",
    "each",
    "few",
    "for",
    "from",
    "further",
    "had",
    "has",
    "have",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "how",
    "i",
    "if",
    "in",
    "into",
    "is",
    "it",
    "its",
    "itself",
    "just",
    "me",
    "more",
    "most",
    "my",
    "myself",
    "no",
    "nor",
    "not",
    "now",
    "of",
    "off",
    "on",
    "once",
    "only",
    "or",
    "other",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "same",
    "she",
    "should",
    "so",
    "some",
    "such",
    "than",
    "that",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "through",
    "to",
    "too",
    "under",
    "until",
    "up",
    "very",
    "was",
    "we",
    "were",
    "what",
    "when",
    "where",
    "which",
    "while",
    "who",
    "whom",
    "why",
    "will",
    "with",
    "would",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningConfig {
    pub non_alpha_threshold: f64,
    pub min_text_chars: usize,
    pub stopword_threshold: f64,
    /// Per-language stopword lists. English defaults to [`ENGLISH_STOPWORDS`].
    pub stopwords: BTreeMap<Language, Vec<String>>,
    pub keep_first_on_consistent_duplicate: bool,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        let mut stopwords = BTreeMap::new();
        stopwords.insert(
            Language::En,
            ENGLISH_STOPWORDS.iter().map(|s| s.to_string()).collect(),
        );
        CleaningConfig {
            non_alpha_threshold: 0.8,
            min_text_chars: 5,
            stopword_threshold: 0.8,
            stopwords,
            keep_first_on_consistent_duplicate: true,
        }
    }
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("non_alpha_threshold", self.non_alpha_threshold),
            ("stopword_threshold", self.stopword_threshold),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1], got {v}")));
            }
        }
        if self.min_text_chars < 1 {
            return Err(Error::Config("min_text_chars must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    InconsistentDuplicate,
    CrossSplitLeak,
    RuleNonAlpha,
    RuleShortUnlabeled,
    RuleStopword,
    ConsistentDuplicateCollapsed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub sample_id: String,
    pub split: Split,
    pub reason: RemovalReason,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalCounts {
    pub inconsistent_duplicate: usize,
    pub cross_split_leak: usize,
    pub rule_non_alpha: usize,
    pub rule_short_unlabeled: usize,
    pub rule_stopword: usize,
    pub consistent_duplicate_collapsed: usize,
}

impl RemovalCounts {
    fn bump(&mut self, reason: RemovalReason) {
        let slot = match reason {
            RemovalReason::InconsistentDuplicate => &mut self.inconsistent_duplicate,
            RemovalReason::CrossSplitLeak => &mut self.cross_split_leak,
            RemovalReason::RuleNonAlpha => &mut self.rule_non_alpha,
            RemovalReason::RuleShortUnlabeled => &mut self.rule_short_unlabeled,
            RemovalReason::RuleStopword => &mut self.rule_stopword,
            RemovalReason::ConsistentDuplicateCollapsed => &mut self.consistent_duplicate_collapsed,
        };
        *slot += 1;
    }

    /// Every removed or collapsed sample.
    pub fn total(&self) -> usize {
        self.inconsistent_duplicate
            + self.cross_split_leak
            + self.rule_non_alpha
            + self.rule_short_unlabeled
            + self.rule_stopword
            + self.consistent_duplicate_collapsed
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input_count: usize,
    pub output_count: usize,
    pub counts: RemovalCounts,
    pub rejections: Vec<Rejection>,
}

impl CleaningReport {
    fn reject(&mut self, sample: &UnifiedSample, reason: RemovalReason) {
        self.counts.bump(reason);
        self.rejections.push(Rejection {
            sample_id: sample.id.clone(),
            split: sample.split,
            reason,
        });
    }

    pub fn is_conserved(&self) -> bool {
        self.input_count == self.output_count + self.counts.total()
    }
}

/// Within one split: texts repeated with differing annotations lose every
/// copy; texts repeated with equal annotations keep one copy.
pub fn dedup_within_split(
    samples: Vec<UnifiedSample>,
    config: &CleaningConfig,
) -> (Vec<UnifiedSample>, CleaningReport) {
    let mut report = CleaningReport {
        input_count: samples.len(),
        ..Default::default()
    };
    let mut groups: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, s) in samples.iter().enumerate() {
        groups.entry(s.normalized_text()).or_default().push(i);
    }

    let mut fate: Vec<Option<RemovalReason>> = vec![None; samples.len()];
    for members in groups.values().filter(|m| m.len() > 1) {
        let first_key = samples[members[0]].annotations.canonical_key();
        let consistent = members[1..]
            .iter()
            .all(|&i| samples[i].annotations.canonical_key() == first_key);
        if consistent {
            let keep = if config.keep_first_on_consistent_duplicate {
                members[0]
            } else {
                *members.last().unwrap()
            };
            for &i in members.iter().filter(|&&i| i != keep) {
                fate[i] = Some(RemovalReason::ConsistentDuplicateCollapsed);
            }
        } else {
            for &i in members {
                fate[i] = Some(RemovalReason::InconsistentDuplicate);
            }
        }
    }

    let mut kept = Vec::with_capacity(samples.len());
    for (s, f) in samples.into_iter().zip(fate) {
        match f {
            Some(reason) => report.reject(&s, reason),
            None => kept.push(s),
        }
    }
    report.output_count = kept.len();
    (kept, report)
}

/// Drop train/val samples whose normalized text also occurs in test.
pub fn remove_cross_split_leakage(
    train: Vec<UnifiedSample>,
    val: Vec<UnifiedSample>,
    test: &[UnifiedSample],
) -> (Vec<UnifiedSample>, Vec<UnifiedSample>, CleaningReport) {
    let test_texts: HashSet<String> = test.iter().map(UnifiedSample::normalized_text).collect();
    let mut report = CleaningReport {
        input_count: train.len() + val.len(),
        ..Default::default()
    };
    let mut filter = |split: Vec<UnifiedSample>| -> Vec<UnifiedSample> {
        split
            .into_iter()
            .filter(|s| {
                let leaked = test_texts.contains(&s.normalized_text());
                if leaked {
                    report.reject(s, RemovalReason::CrossSplitLeak);
                }
                !leaked
            })
            .collect()
    };
    let train = filter(train);
    let val = filter(val);
    report.output_count = train.len() + val.len();
    (train, val, report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Reject(RemovalReason),
}

/// Fraction of non-whitespace characters that are not letters.
pub fn non_letter_fraction(text: &str) -> f64 {
    let (mut total, mut non_letters) = (0usize, 0usize);
    for c in text.chars().filter(|c| !c.is_whitespace()) {
        total += 1;
        if !is_letter(c) {
            non_letters += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        non_letters as f64 / total as f64
    }
}

/// Fraction of whitespace tokens that are stopwords, or `None` when the
/// rule does not apply (fewer than two tokens, i.e. unsegmented text).
pub fn stopword_fraction(text: &str, stopwords: &HashSet<String>) -> Option<f64> {
    let tokens: Vec<String> = text
        .split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.len() < 2 {
        return None;
    }
    let hits = tokens
        .iter()
        .filter(|t| stopwords.contains(t.as_str()))
        .count();
    Some(hits as f64 / tokens.len() as f64)
}

pub fn quality_filter(sample: &UnifiedSample, config: &CleaningConfig) -> Verdict {
    let text = sample.normalized_text();
    if non_letter_fraction(&text) > config.non_alpha_threshold {
        return Verdict::Reject(RemovalReason::RuleNonAlpha);
    }
    if text.chars().count() < config.min_text_chars && sample.annotations.is_empty() {
        return Verdict::Reject(RemovalReason::RuleShortUnlabeled);
    }
    if let Some(list) = config.stopwords.get(&sample.language) {
        let set: HashSet<String> = list.iter().map(|w| w.to_lowercase()).collect();
        if stopword_fraction(&text, &set).is_some_and(|f| f > config.stopword_threshold) {
            return Verdict::Reject(RemovalReason::RuleStopword);
        }
    }
    Verdict::Keep
}

pub fn apply_quality_filter(
    samples: Vec<UnifiedSample>,
    config: &CleaningConfig,
) -> (Vec<UnifiedSample>, CleaningReport) {
    let mut report = CleaningReport {
        input_count: samples.len(),
        ..Default::default()
    };
    let kept: Vec<UnifiedSample> = samples
        .into_iter()
        .filter(|s| match quality_filter(s, config) {
            Verdict::Keep => true,
            Verdict::Reject(reason) => {
                report.reject(s, reason);
                false
            }
        })
        .collect();
    report.output_count = kept.len();
    (kept, report)
}

/// The three splits of one dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetSplits {
    pub train: Vec<UnifiedSample>,
    pub val: Vec<UnifiedSample>,
    pub test: Vec<UnifiedSample>,
}

impl DatasetSplits {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, split: Split) -> &[UnifiedSample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &UnifiedSample> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }
}

/// Full cleaning pipeline for one dataset.
pub fn clean_dataset(
    splits: DatasetSplits,
    config: &CleaningConfig,
) -> (DatasetSplits, CleaningReport) {
    let mut report = CleaningReport {
        input_count: splits.len(),
        ..Default::default()
    };

    let mut dedup = |samples: Vec<UnifiedSample>| {
        let (kept, delta) = dedup_within_split(samples, config);
        report.counts.inconsistent_duplicate += delta.counts.inconsistent_duplicate;
        report.counts.consistent_duplicate_collapsed += delta.counts.consistent_duplicate_collapsed;
        report.rejections.extend(delta.rejections);
        kept
    };
    let train = dedup(splits.train);
    let val = dedup(splits.val);
    let test = dedup(splits.test);

    let (train, val, leak) = remove_cross_split_leakage(train, val, &test);
    report.counts.cross_split_leak += leak.counts.cross_split_leak;
    report.rejections.extend(leak.rejections);

    let mut filter = |samples: Vec<UnifiedSample>| {
        let (kept, delta) = apply_quality_filter(samples, config);
        report.counts.rule_non_alpha += delta.counts.rule_non_alpha;
        report.counts.rule_short_unlabeled += delta.counts.rule_short_unlabeled;
        report.counts.rule_stopword += delta.counts.rule_stopword;
        report.rejections.extend(delta.rejections);
        kept
    };
    let out = DatasetSplits {
        train: filter(train),
        val: filter(val),
        test: filter(test),
    };
    report.output_count = out.len();
    (out, report)
}
