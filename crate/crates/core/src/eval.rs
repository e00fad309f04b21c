//! Parsing model completions back into extraction tuples and span-based
//! micro-F1 scoring.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::{Annotations, ExtractionTuple, Facet, ScoreReport, TaskKind, UnifiedSample};
use crate::text::normalize;

pub type TupleSet = BTreeSet<ExtractionTuple>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseStatus {
    Clean,
    Recovered,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseOutcome {
    pub tuples: TupleSet,
    pub status: ParseStatus,
    pub diagnostics: Vec<String>,
}

fn parse_object(text: &str) -> Option<Map<String, Value>> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(m)) => Some(m),
        _ => None,
    }
}

fn outermost_braces(raw: &str) -> Option<&str> {
    let start = raw.find('{')?;
    let end = raw.rfind('}')?;
    (end > start).then(|| &raw[start..=end])
}

/// Parse a completion. `queried` restricts accepted labels to the schema
/// batch the instruction asked for; `None` accepts every label.
pub fn parse_prediction(task: TaskKind, queried: Option<&[String]>, raw: &str) -> ParseOutcome {
    let (object, status) = match parse_object(raw.trim()) {
        Some(o) => (o, ParseStatus::Clean),
        None => match outermost_braces(raw).and_then(parse_object) {
            Some(o) => (o, ParseStatus::Recovered),
            None => {
                return ParseOutcome {
                    tuples: TupleSet::new(),
                    status: ParseStatus::Failed,
                    diagnostics: vec!["no JSON object found in completion".into()],
                }
            }
        },
    };

    let mut tuples = TupleSet::new();
    let mut diagnostics = Vec::new();
    for (label, value) in &object {
        if let Some(q) = queried {
            if !q.iter().any(|l| normalize(l) == normalize(label)) {
                diagnostics.push(format!("label `{label}` was not queried; discarded"));
                continue;
            }
        }
        let items: Vec<&Value> = match value {
            Value::Array(a) => a.iter().collect(),
            Value::Null => Vec::new(),
            other => vec![other],
        };
        for item in items {
            match task {
                TaskKind::Ner => match item {
                    Value::String(m) => tuples.extend(ExtractionTuple::entity(label, m)),
                    other => {
                        diagnostics.push(format!("`{label}`: mention is not a string: {other}"))
                    }
                },
                TaskKind::Re => {
                    let head = item.get("head").and_then(Value::as_str);
                    let tail = item.get("tail").and_then(Value::as_str);
                    match (head, tail) {
                        (Some(h), Some(t)) => tuples.extend(ExtractionTuple::relation(label, h, t)),
                        _ => diagnostics.push(format!("`{label}`: relation item lacks head/tail")),
                    }
                }
                TaskKind::Ee => {
                    if !item.is_object() {
                        diagnostics.push(format!("`{label}`: event item is not an object"));
                        continue;
                    }
                    if let Some(trigger) = item.get("trigger").and_then(Value::as_str) {
                        tuples.extend(ExtractionTuple::trigger(label, trigger));
                    }
                    if let Some(args) = item.get("arguments").and_then(Value::as_object) {
                        for (role, v) in args {
                            for value in argument_values(v) {
                                tuples.extend(ExtractionTuple::argument(label, role, value));
                            }
                        }
                    }
                }
            }
        }
    }
    ParseOutcome {
        tuples,
        status,
        diagnostics,
    }
}

fn argument_values(v: &Value) -> Vec<&str> {
    match v {
        Value::String(s) => vec![s.as_str()],
        Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
        _ => Vec::new(),
    }
}

/// Every gold tuple of an annotation set, all facets together.
pub fn tuples_of_annotations(annotations: &Annotations) -> TupleSet {
    let mut out = TupleSet::new();
    match annotations {
        Annotations::Ner(map) => {
            for (ty, mentions) in map {
                out.extend(
                    mentions
                        .iter()
                        .filter_map(|m| ExtractionTuple::entity(ty, m)),
                );
            }
        }
        Annotations::Re(triples) => {
            out.extend(
                triples
                    .iter()
                    .filter_map(|t| ExtractionTuple::relation(&t.relation, &t.head, &t.tail)),
            );
        }
        Annotations::Ee(events) => {
            for e in events {
                out.extend(ExtractionTuple::trigger(&e.event_type, &e.trigger));
                for (role, values) in &e.arguments {
                    out.extend(
                        values
                            .iter()
                            .filter_map(|v| ExtractionTuple::argument(&e.event_type, role, v)),
                    );
                }
            }
        }
    }
    out
}

pub fn tuples_of_gold(sample: &UnifiedSample, facet: Facet) -> TupleSet {
    restrict(&tuples_of_annotations(&sample.annotations), facet)
}

/// Keep only the tuples of one facet.
pub fn restrict(tuples: &TupleSet, facet: Facet) -> TupleSet {
    tuples
        .iter()
        .filter(|t| t.facet() == facet)
        .cloned()
        .collect()
}

/// Span-based micro-F1 over per-sample tuple sets. A sample missing from
/// `pred` counts as an empty prediction; a prediction for an unknown
/// sample is an alignment error.
pub fn micro_f1<T: Ord>(
    gold: &BTreeMap<String, BTreeSet<T>>,
    pred: &BTreeMap<String, BTreeSet<T>>,
) -> Result<ScoreReport> {
    if let Some(id) = pred.keys().find(|id| !gold.contains_key(*id)) {
        return Err(Error::Alignment(format!(
            "prediction for unknown sample `{id}`"
        )));
    }
    let empty = BTreeSet::new();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (id, g) in gold {
        let p = pred.get(id).unwrap_or(&empty);
        let hit = g.intersection(p).count();
        tp += hit;
        fp += p.len() - hit;
        fn_ += g.len() - hit;
    }
    Ok(ScoreReport::from_counts(tp, fp, fn_))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    pub task: TaskKind,
    /// Unified-format gold samples.
    pub gold: PathBuf,
    /// Lines of `{"sample_id", "batch_index", "completion"}`.
    pub predictions: PathBuf,
    /// Optional sidecar metadata giving the schema batch of each instance.
    #[serde(default)]
    pub schema_meta: Option<PathBuf>,
    #[serde(default)]
    pub facets: Option<Vec<Facet>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalManifest {
    pub benchmark: String,
    pub datasets: Vec<ManifestEntry>,
}

impl EvalManifest {
    /// Load a TOML manifest; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: EvalManifest = toml::from_str(&body)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut m.datasets {
            for p in [&mut d.gold, &mut d.predictions] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
            if let Some(p) = d.schema_meta.as_mut().filter(|p| p.is_relative()) {
                *p = base.join(&*p);
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetScores {
    pub dataset: String,
    pub task: TaskKind,
    pub facets: BTreeMap<Facet, ScoreReport>,
    pub parse_status: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub benchmark: String,
    pub datasets: Vec<DatasetScores>,
    /// Unweighted mean F1 over datasets, per facet.
    pub avg: BTreeMap<Facet, f64>,
}

#[derive(Deserialize)]
struct PredictionLine {
    sample_id: String,
    #[serde(default)]
    batch_index: usize,
    completion: String,
}

#[derive(Deserialize)]
struct MetaLine {
    sample_id: String,
    batch_index: usize,
    schema_batch: Vec<String>,
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(body
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn parse_line<T: serde::de::DeserializeOwned>(
    path: &Path,
    line_no: usize,
    line: &str,
) -> Result<T> {
    serde_json::from_str(line).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: line_no,
        message: e.to_string(),
    })
}

pub fn score_dataset(entry: &ManifestEntry) -> Result<DatasetScores> {
    let mut gold_tuples: BTreeMap<String, TupleSet> = BTreeMap::new();
    for (n, line) in read_lines(&entry.gold)? {
        let s: UnifiedSample = parse_line(&entry.gold, n, &line)?;
        if s.task() != entry.task {
            return Err(Error::Config(format!(
                "{}: gold sample `{}` is {}, expected {}",
                entry.name,
                s.id,
                s.task(),
                entry.task
            )));
        }
        gold_tuples
            .entry(s.id.clone())
            .or_default()
            .extend(tuples_of_annotations(&s.annotations));
    }

    let mut batches: HashMap<(String, usize), Vec<String>> = HashMap::new();
    if let Some(meta) = &entry.schema_meta {
        for (n, line) in read_lines(meta)? {
            let m: MetaLine = parse_line(meta, n, &line)?;
            batches.insert((m.sample_id, m.batch_index), m.schema_batch);
        }
    }

    let mut pred_tuples: BTreeMap<String, TupleSet> = BTreeMap::new();
    let mut parse_status: BTreeMap<String, usize> = BTreeMap::new();
    for (n, line) in read_lines(&entry.predictions)? {
        let p: PredictionLine = parse_line(&entry.predictions, n, &line)?;
        let queried = if entry.schema_meta.is_some() {
            let key = (p.sample_id.clone(), p.batch_index);
            let batch = batches.get(&key).ok_or_else(|| {
                Error::Alignment(format!(
                    "{}: no schema batch for ({}, {})",
                    entry.name, p.sample_id, p.batch_index
                ))
            })?;
            Some(batch.as_slice())
        } else {
            None
        };
        let outcome = parse_prediction(entry.task, queried, &p.completion);
        for d in &outcome.diagnostics {
            log::debug!("{} {}#{}: {d}", entry.name, p.sample_id, p.batch_index);
        }
        let status = serde_json::to_value(outcome.status)?
            .as_str()
            .unwrap_or_default()
            .to_string();
        *parse_status.entry(status).or_insert(0) += 1;
        pred_tuples
            .entry(p.sample_id)
            .or_default()
            .extend(outcome.tuples);
    }

    let facets = entry
        .facets
        .clone()
        .unwrap_or_else(|| entry.task.facets().to_vec());
    let mut reports = BTreeMap::new();
    for facet in facets {
        if !entry.task.facets().contains(&facet) {
            return Err(Error::Config(format!(
                "{}: facet {facet} does not apply to {}",
                entry.name, entry.task
            )));
        }
        let by_facet = |m: &BTreeMap<String, TupleSet>| -> BTreeMap<String, TupleSet> {
            m.iter()
                .map(|(k, v)| (k.clone(), restrict(v, facet)))
                .collect()
        };
        let report = micro_f1(&by_facet(&gold_tuples), &by_facet(&pred_tuples))
            .map_err(|e| Error::Alignment(format!("{}: {e}", entry.name)))?;
        reports.insert(facet, report);
    }
    Ok(DatasetScores {
        dataset: entry.name.clone(),
        task: entry.task,
        facets: reports,
        parse_status,
    })
}

/// Score every dataset of a manifest. Fails without a partial report if any
/// referenced file is missing or any dataset fails.
pub fn run_manifest(manifest: &EvalManifest) -> Result<EvalReport> {
    for d in &manifest.datasets {
        for p in [Some(&d.gold), Some(&d.predictions), d.schema_meta.as_ref()]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "referenced file not found"),
                ));
            }
        }
    }
    let datasets = manifest
        .datasets
        .iter()
        .map(score_dataset)
        .collect::<Result<Vec<_>>>()?;
    let avg = average_f1(&datasets);
    Ok(EvalReport {
        benchmark: manifest.benchmark.clone(),
        datasets,
        avg,
    })
}

pub fn average_f1(datasets: &[DatasetScores]) -> BTreeMap<Facet, f64> {
    let mut sums: BTreeMap<Facet, (f64, usize)> = BTreeMap::new();
    for d in datasets {
        for (facet, r) in &d.facets {
            let e = sums.entry(*facet).or_insert((0.0, 0));
            e.0 += r.f1;
            e.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(f, (s, n))| (f, s / n as f64))
        .collect()
}

/// Fixed-width text table of per-dataset F1 plus the averages.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = format!(
        "{:<24} {:<4} {:<9} {:>8} {:>8} {:>8}\n",
        "dataset", "task", "facet", "P", "R", "F1"
    );
    for d in &report.datasets {
        for (facet, r) in &d.facets {
            out.push_str(&format!(
                "{:<24} {:<4} {:<9} {:>8.4} {:>8.4} {:>8.4}\n",
                d.dataset, d.task, facet, r.precision, r.recall, r.f1
            ));
        }
    }
    for (facet, f1) in &report.avg {
        out.push_str(&format!(
            "{:<24} {:<4} {:<9} {:>8} {:>8} {:>8.4}\n",
            "Avg", "", facet, "", "", f1
        ));
    }
    out
}
