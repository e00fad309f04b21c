//! Adapters that turn raw dataset files into unified samples.
//!
//! Three input shapes are understood: the unified interchange format
//! itself, CoNLL-style token/tag columns (NER only), and line-delimited
//! JSON with configurable field paths.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{
    validate_sample, Annotations, LabelSet, Language, Split, TaskKind, UnifiedSample,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum AdapterFormat {
    /// Lines already in the unified interchange format.
    Unified,
    /// Whitespace-separated columns, one token per line, blank line between
    /// sentences. BIO / IOB2 / BIOES tags.
    Conll {
        #[serde(default)]
        token_column: usize,
        /// Defaults to the last column.
        #[serde(default)]
        tag_column: Option<usize>,
    },
    /// Line-delimited JSON objects with dotted field paths.
    JsonFields {
        #[serde(default)]
        id: Option<String>,
        text: String,
        #[serde(default)]
        annotations: Option<String>,
    },
}

/// Declarative adapter entry from the pipeline config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterDescriptor {
    pub task: TaskKind,
    pub language: Language,
    #[serde(flatten)]
    pub format: AdapterFormat,
    /// Raw label -> label-set label (e.g. `ORG` -> `organization`).
    #[serde(default)]
    pub label_map: BTreeMap<String, String>,
}

impl AdapterDescriptor {
    fn map_label(&self, raw: &str) -> String {
        self.label_map
            .get(raw)
            .cloned()
            .unwrap_or_else(|| raw.to_string())
    }
}

/// A record that could not be turned into a valid sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdapterIssue {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct UnifyOutcome {
    pub samples: Vec<UnifiedSample>,
    pub issues: Vec<AdapterIssue>,
}

/// Convert one raw file body into validated samples. Records that cannot be
/// mapped or fail validation are skipped and reported with their index.
pub fn unify(
    input: &str,
    adapter: &AdapterDescriptor,
    dataset: &str,
    split: Split,
    label_set: &LabelSet,
) -> UnifyOutcome {
    let mut out = UnifyOutcome::default();
    let raw: Vec<(usize, Result<UnifiedSample, String>)> = match &adapter.format {
        AdapterFormat::Unified => json_lines(input)
            .map(|(i, line)| (i, unified_record(line, adapter, dataset, split)))
            .collect(),
        AdapterFormat::Conll {
            token_column,
            tag_column,
        } => conll_sentences(input)
            .into_iter()
            .enumerate()
            .map(|(i, rows)| {
                (
                    i,
                    conll_record(
                        i,
                        &rows,
                        *token_column,
                        *tag_column,
                        adapter,
                        dataset,
                        split,
                    ),
                )
            })
            .collect(),
        AdapterFormat::JsonFields {
            id,
            text,
            annotations,
        } => json_lines(input)
            .map(|(i, line)| {
                (
                    i,
                    json_fields_record(
                        i,
                        line,
                        id.as_deref(),
                        text,
                        annotations.as_deref(),
                        adapter,
                        dataset,
                        split,
                    ),
                )
            })
            .collect(),
    };
    for (index, rec) in raw {
        match rec {
            Ok(sample) => {
                let violations = validate_sample(&sample, label_set);
                if violations.is_empty() {
                    out.samples.push(sample);
                } else {
                    let message = violations
                        .iter()
                        .map(ToString::to_string)
                        .collect::<Vec<_>>()
                        .join("; ");
                    log::warn!("{dataset}/{split} record {index}: {message}");
                    out.issues.push(AdapterIssue { index, message });
                }
            }
            Err(message) => {
                log::warn!("{dataset}/{split} record {index}: {message}");
                out.issues.push(AdapterIssue { index, message });
            }
        }
    }
    out
}

fn json_lines(input: &str) -> impl Iterator<Item = (usize, &str)> {
    input.lines().filter(|l| !l.trim().is_empty()).enumerate()
}

fn unified_record(
    line: &str,
    adapter: &AdapterDescriptor,
    dataset: &str,
    split: Split,
) -> Result<UnifiedSample, String> {
    let mut s = UnifiedSample::from_json_line(line).map_err(|e| e.to_string())?;
    if s.task() != adapter.task {
        return Err(format!(
            "record task {} differs from adapter task {}",
            s.task(),
            adapter.task
        ));
    }
    s.dataset = dataset.to_string();
    s.split = split;
    s.annotations = relabel(s.annotations, adapter);
    Ok(s)
}

fn relabel(ann: Annotations, adapter: &AdapterDescriptor) -> Annotations {
    if adapter.label_map.is_empty() {
        return ann;
    }
    match ann {
        Annotations::Ner(map) => {
            let mut out: IndexMap<String, Vec<String>> = IndexMap::new();
            for (k, v) in map {
                out.entry(adapter.map_label(&k)).or_default().extend(v);
            }
            Annotations::Ner(out)
        }
        Annotations::Re(mut triples) => {
            for t in &mut triples {
                t.relation = adapter.map_label(&t.relation);
            }
            Annotations::Re(triples)
        }
        Annotations::Ee(mut events) => {
            for e in &mut events {
                e.event_type = adapter.map_label(&e.event_type);
            }
            Annotations::Ee(events)
        }
    }
}

fn conll_sentences(input: &str) -> Vec<Vec<&str>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for line in input.lines() {
        let line = line.trim();
        if line.is_empty() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else if !line.starts_with("-DOCSTART-") {
            cur.push(line);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn conll_record(
    index: usize,
    rows: &[&str],
    token_column: usize,
    tag_column: Option<usize>,
    adapter: &AdapterDescriptor,
    dataset: &str,
    split: Split,
) -> Result<UnifiedSample, String> {
    if adapter.task != TaskKind::Ner {
        return Err("conll adapter only produces NER samples".into());
    }
    let mut tokens = Vec::with_capacity(rows.len());
    let mut mentions: IndexMap<String, Vec<String>> = IndexMap::new();
    let mut open: Option<(String, Vec<&str>)> = None;

    fn close(open: &mut Option<(String, Vec<&str>)>, mentions: &mut IndexMap<String, Vec<String>>) {
        if let Some((ty, toks)) = open.take() {
            mentions.entry(ty).or_default().push(toks.join(" "));
        }
    }

    for (row_no, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split_whitespace().collect();
        let tag_col = tag_column.unwrap_or(cols.len().saturating_sub(1));
        if cols.len() < 2 || token_column >= cols.len() || tag_col >= cols.len() {
            return Err(format!("row {row_no} has {} column(s)", cols.len()));
        }
        let (token, tag) = (cols[token_column], cols[tag_col]);
        tokens.push(token);
        if tag == "O" {
            close(&mut open, &mut mentions);
            continue;
        }
        let Some((prefix, raw_ty)) = tag.split_once('-') else {
            return Err(format!("row {row_no}: malformed tag `{tag}`"));
        };
        let ty = adapter.map_label(raw_ty);
        match prefix {
            "B" | "S" => {
                close(&mut open, &mut mentions);
                open = Some((ty, vec![token]));
            }
            "I" | "E" => match &mut open {
                Some((open_ty, toks)) if *open_ty == ty => toks.push(token),
                // a stray I- starts a new mention
                _ => {
                    close(&mut open, &mut mentions);
                    open = Some((ty, vec![token]));
                }
            },
            _ => return Err(format!("row {row_no}: unknown tag prefix `{prefix}`")),
        }
        if prefix == "S" || prefix == "E" {
            close(&mut open, &mut mentions);
        }
    }
    close(&mut open, &mut mentions);

    Ok(UnifiedSample {
        id: format!("{dataset}-{split}-{index}"),
        dataset: dataset.to_string(),
        split,
        language: adapter.language,
        text: tokens.join(" "),
        annotations: Annotations::Ner(mentions),
    })
}

fn lookup<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(v, |cur, key| cur.get(key))
}

#[allow(clippy::too_many_arguments)]
fn json_fields_record(
    index: usize,
    line: &str,
    id_path: Option<&str>,
    text_path: &str,
    ann_path: Option<&str>,
    adapter: &AdapterDescriptor,
    dataset: &str,
    split: Split,
) -> Result<UnifiedSample, String> {
    let v: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let text = lookup(&v, text_path)
        .and_then(Value::as_str)
        .ok_or_else(|| format!("missing text field `{text_path}`"))?;
    let id = match id_path {
        Some(p) => match lookup(&v, p) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(format!("missing id field `{p}`")),
        },
        None => format!("{dataset}-{split}-{index}"),
    };
    let annotations = match ann_path.and_then(|p| lookup(&v, p)) {
        None | Some(Value::Null) => Annotations::empty(adapter.task),
        Some(raw) => Annotations::from_value(adapter.task, raw.clone())
            .map_err(|e| format!("annotations: {e}"))?,
    };
    Ok(UnifiedSample {
        id,
        dataset: dataset.to_string(),
        split,
        language: adapter.language,
        text: text.to_string(),
        annotations: relabel(annotations, adapter),
    })
}
