//! Shared data model: samples, label sets, instances, records and
//! extraction tuples, plus validation over them.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::text::normalize;

/// Sentinel rendered for event roles without an argument.
pub const MISSING_ARGUMENT: &str = "NAN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "NER")]
    Ner,
    #[serde(rename = "RE")]
    Re,
    #[serde(rename = "EE")]
    Ee,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Ner, TaskKind::Re, TaskKind::Ee];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Ner => "NER",
            TaskKind::Re => "RE",
            TaskKind::Ee => "EE",
        }
    }

    /// Scoring facets that apply to this task.
    pub fn facets(self) -> &'static [Facet] {
        match self {
            TaskKind::Ner => &[Facet::Entity],
            TaskKind::Re => &[Facet::Relation],
            TaskKind::Ee => &[Facet::Trigger, Facet::Argument],
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NER" => Ok(TaskKind::Ner),
            "RE" => Ok(TaskKind::Re),
            "EE" => Ok(TaskKind::Ee),
            _ => Err(Error::Config(format!(
                "unknown task `{s}` (expected NER, RE or EE)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Zh,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Zh => "zh",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One relation triple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Triple {
    pub relation: String,
    pub head: String,
    pub tail: String,
}

/// One annotated event. Each role maps to its argument texts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub event_type: String,
    #[serde(default)]
    pub trigger: String,
    #[serde(default, deserialize_with = "one_or_many_map")]
    pub arguments: IndexMap<String, Vec<String>>,
}

fn one_or_many_map<'de, D>(d: D) -> std::result::Result<IndexMap<String, Vec<String>>, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }
    let raw = IndexMap::<String, OneOrMany>::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|(k, v)| {
            let vals = match v {
                OneOrMany::One(s) => vec![s],
                OneOrMany::Many(v) => v,
            };
            (k, vals)
        })
        .collect())
}

/// Gold annotations, shaped per task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Annotations {
    /// entity type -> mention texts
    Ner(IndexMap<String, Vec<String>>),
    Re(Vec<Triple>),
    Ee(Vec<Event>),
}

impl Annotations {
    pub fn empty(task: TaskKind) -> Self {
        match task {
            TaskKind::Ner => Annotations::Ner(IndexMap::new()),
            TaskKind::Re => Annotations::Re(Vec::new()),
            TaskKind::Ee => Annotations::Ee(Vec::new()),
        }
    }

    pub fn task(&self) -> TaskKind {
        match self {
            Annotations::Ner(_) => TaskKind::Ner,
            Annotations::Re(_) => TaskKind::Re,
            Annotations::Ee(_) => TaskKind::Ee,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Annotations::Ner(m) => m.values().all(|v| v.is_empty()),
            Annotations::Re(v) => v.is_empty(),
            Annotations::Ee(v) => v.is_empty(),
        }
    }

    pub fn from_value(task: TaskKind, value: Value) -> Result<Self> {
        let ann = match task {
            TaskKind::Ner => Annotations::Ner(serde_json::from_value(value)?),
            TaskKind::Re => Annotations::Re(serde_json::from_value(value)?),
            TaskKind::Ee => Annotations::Ee(serde_json::from_value(value)?),
        };
        Ok(ann)
    }

    pub fn to_value(&self) -> Value {
        match self {
            Annotations::Ner(m) => serde_json::to_value(m),
            Annotations::Re(v) => serde_json::to_value(v),
            Annotations::Ee(v) => serde_json::to_value(v),
        }
        .expect("annotations serialize")
    }

    /// Order-insensitive, normalization-aware identity of the annotation
    /// set. Two annotation sets are "consistent" iff their keys are equal.
    pub fn canonical_key(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        match self {
            Annotations::Ner(m) => {
                for (ty, mentions) in m {
                    for mention in mentions {
                        out.insert(crate::canonical::to_string(&[
                            normalize(ty),
                            normalize(mention),
                        ]));
                    }
                }
            }
            Annotations::Re(triples) => {
                for t in triples {
                    out.insert(crate::canonical::to_string(&[
                        normalize(&t.relation),
                        normalize(&t.head),
                        normalize(&t.tail),
                    ]));
                }
            }
            Annotations::Ee(events) => {
                for e in events {
                    let args: BTreeMap<String, BTreeSet<String>> = e
                        .arguments
                        .iter()
                        .map(|(role, vals)| {
                            (
                                normalize(role),
                                vals.iter()
                                    .map(|v| normalize(v))
                                    .filter(|v| v != MISSING_ARGUMENT)
                                    .collect(),
                            )
                        })
                        .filter(|(_, vals): &(String, BTreeSet<String>)| !vals.is_empty())
                        .collect();
                    out.insert(crate::canonical::to_string(&(
                        normalize(&e.event_type),
                        normalize(&e.trigger),
                        args,
                    )));
                }
            }
        }
        out
    }
}

/// One annotated text in the unified interchange format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SampleRecord", into = "SampleRecord")]
pub struct UnifiedSample {
    pub id: String,
    pub dataset: String,
    pub split: Split,
    pub language: Language,
    pub text: String,
    pub annotations: Annotations,
}

impl UnifiedSample {
    pub fn task(&self) -> TaskKind {
        self.annotations.task()
    }

    pub fn normalized_text(&self) -> String {
        normalize(&self.text)
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        Ok(serde_json::from_str(line)?)
    }

    pub fn to_json_line(&self) -> String {
        crate::canonical::to_string(self)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    id: String,
    dataset: String,
    split: Split,
    language: Language,
    task: TaskKind,
    text: String,
    annotations: Value,
}

impl TryFrom<SampleRecord> for UnifiedSample {
    type Error = Error;

    fn try_from(r: SampleRecord) -> Result<Self> {
        let annotations = if r.annotations.is_null() {
            Annotations::empty(r.task)
        } else {
            Annotations::from_value(r.task, r.annotations)?
        };
        Ok(UnifiedSample {
            id: r.id,
            dataset: r.dataset,
            split: r.split,
            language: r.language,
            text: r.text,
            annotations,
        })
    }
}

impl From<UnifiedSample> for SampleRecord {
    fn from(s: UnifiedSample) -> Self {
        SampleRecord {
            task: s.task(),
            annotations: s.annotations.to_value(),
            id: s.id,
            dataset: s.dataset,
            split: s.split,
            language: s.language,
            text: s.text,
        }
    }
}

/// An event type with its argument roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSchema {
    pub event_type: String,
    #[serde(default = "default_true")]
    pub trigger: bool,
    #[serde(default)]
    pub arguments: Vec<String>,
}

fn default_true() -> bool {
    true
}

impl EventSchema {
    pub fn new(event_type: &str, roles: &[&str]) -> Self {
        EventSchema {
            event_type: event_type.to_string(),
            trigger: true,
            arguments: roles.iter().map(|r| r.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Labels {
    Plain(Vec<String>),
    Events(Vec<EventSchema>),
}

/// The predefined schema space of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    task: TaskKind,
    labels: Labels,
    index: IndexSet<String>,
}

impl LabelSet {
    pub fn plain<S: AsRef<str>>(task: TaskKind, labels: &[S]) -> Result<Self> {
        if task == TaskKind::Ee {
            return Err(Error::Config("EE label sets need event schemas".into()));
        }
        let labels: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        Self::build(task, Labels::Plain(labels))
    }

    pub fn events(schemas: Vec<EventSchema>) -> Result<Self> {
        for s in &schemas {
            let mut seen = HashSet::new();
            for role in &s.arguments {
                if !seen.insert(role.as_str()) {
                    return Err(Error::Config(format!(
                        "duplicate role `{role}` in event schema `{}`",
                        s.event_type
                    )));
                }
            }
        }
        Self::build(TaskKind::Ee, Labels::Events(schemas))
    }

    fn build(task: TaskKind, labels: Labels) -> Result<Self> {
        let names: Vec<&str> = match &labels {
            Labels::Plain(v) => v.iter().map(String::as_str).collect(),
            Labels::Events(v) => v.iter().map(|e| e.event_type.as_str()).collect(),
        };
        if names.is_empty() {
            return Err(Error::Config(format!("empty {task} label set")));
        }
        let mut index = IndexSet::new();
        for n in names {
            if n.trim().is_empty() {
                return Err(Error::Config("empty label name".into()));
            }
            if !index.insert(n.to_string()) {
                return Err(Error::Config(format!("duplicate label `{n}`")));
            }
        }
        Ok(LabelSet {
            task,
            labels,
            index,
        })
    }

    /// Parse a label-set file body: a JSON list of names (NER/RE) or of
    /// event schemas (EE).
    pub fn from_json(task: TaskKind, body: &str) -> Result<Self> {
        match task {
            TaskKind::Ee => Self::events(serde_json::from_str(body)?),
            _ => {
                let names: Vec<String> = serde_json::from_str(body)?;
                Self::plain(task, &names)
            }
        }
    }

    pub fn to_value(&self) -> Value {
        match &self.labels {
            Labels::Plain(v) => serde_json::to_value(v),
            Labels::Events(v) => serde_json::to_value(v),
        }
        .expect("labels serialize")
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    /// Label names in label-set order (event types for EE).
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.index.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains(label)
    }

    /// Position of a label in label-set order.
    pub fn position(&self, label: &str) -> Option<usize> {
        self.index.get_index_of(label)
    }

    pub fn event(&self, event_type: &str) -> Option<&EventSchema> {
        match &self.labels {
            Labels::Events(v) => self.position(event_type).map(|i| &v[i]),
            Labels::Plain(_) => None,
        }
    }
}

/// A single problem found by [`validate_sample`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    TaskMismatch {
        sample: TaskKind,
        label_set: TaskKind,
    },
    EmptyText,
    UnknownLabel {
        label: String,
    },
    UnknownRole {
        event_type: String,
        role: String,
    },
    EmptyComponent {
        label: String,
        component: String,
    },
    DuplicateTriple {
        relation: String,
        head: String,
        tail: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TaskMismatch { sample, label_set } => {
                write!(
                    f,
                    "sample task {sample} does not match label set task {label_set}"
                )
            }
            Violation::EmptyText => f.write_str("empty text"),
            Violation::UnknownLabel { label } => write!(f, "unknown label `{label}`"),
            Violation::UnknownRole { event_type, role } => {
                write!(f, "unknown role `{role}` for event `{event_type}`")
            }
            Violation::EmptyComponent { label, component } => {
                write!(f, "empty {component} under `{label}`")
            }
            Violation::DuplicateTriple {
                relation,
                head,
                tail,
            } => {
                write!(f, "duplicate triple ({relation}, {head}, {tail})")
            }
        }
    }
}

/// Collect every invariant violation of `sample` against `label_set`.
/// An empty list means the sample is valid.
pub fn validate_sample(sample: &UnifiedSample, label_set: &LabelSet) -> Vec<Violation> {
    let mut out = Vec::new();
    if sample.task() != label_set.task() {
        out.push(Violation::TaskMismatch {
            sample: sample.task(),
            label_set: label_set.task(),
        });
        return out;
    }
    if normalize(&sample.text).is_empty() {
        out.push(Violation::EmptyText);
    }
    let unknown = |label: &str, out: &mut Vec<Violation>| {
        if !label_set.contains(label) {
            out.push(Violation::UnknownLabel {
                label: label.to_string(),
            });
        }
    };
    let empty = |label: &str, component: &str, value: &str, out: &mut Vec<Violation>| {
        if normalize(value).is_empty() {
            out.push(Violation::EmptyComponent {
                label: label.to_string(),
                component: component.to_string(),
            });
        }
    };
    match &sample.annotations {
        Annotations::Ner(map) => {
            for (ty, mentions) in map {
                unknown(ty, &mut out);
                for m in mentions {
                    empty(ty, "mention", m, &mut out);
                }
            }
        }
        Annotations::Re(triples) => {
            let mut seen = HashSet::new();
            for t in triples {
                unknown(&t.relation, &mut out);
                empty(&t.relation, "head", &t.head, &mut out);
                empty(&t.relation, "tail", &t.tail, &mut out);
                let key = (
                    normalize(&t.relation),
                    normalize(&t.head),
                    normalize(&t.tail),
                );
                if !seen.insert(key) {
                    out.push(Violation::DuplicateTriple {
                        relation: t.relation.clone(),
                        head: t.head.clone(),
                        tail: t.tail.clone(),
                    });
                }
            }
        }
        Annotations::Ee(events) => {
            for e in events {
                let Some(schema) = label_set.event(&e.event_type) else {
                    unknown(&e.event_type, &mut out);
                    continue;
                };
                if schema.trigger {
                    empty(&e.event_type, "trigger", &e.trigger, &mut out);
                }
                for (role, vals) in &e.arguments {
                    if !schema.arguments.contains(role) {
                        out.push(Violation::UnknownRole {
                            event_type: e.event_type.clone(),
                            role: role.clone(),
                        });
                    }
                    for v in vals {
                        empty(&e.event_type, "argument", v, &mut out);
                    }
                }
            }
        }
    }
    out
}

/// Distinct labels occurring in the annotations, in first-occurrence order.
pub fn positive_labels(sample: &UnifiedSample) -> IndexSet<String> {
    match &sample.annotations {
        Annotations::Ner(map) => map
            .iter()
            .filter(|(_, mentions)| !mentions.is_empty())
            .map(|(ty, _)| ty.clone())
            .collect(),
        Annotations::Re(triples) => triples.iter().map(|t| t.relation.clone()).collect(),
        Annotations::Ee(events) => events.iter().map(|e| e.event_type.clone()).collect(),
    }
}

/// One serialized instruction/output pair plus provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionInstance {
    pub dataset: String,
    pub sample_id: String,
    pub task: TaskKind,
    pub language: Language,
    pub instruction: String,
    pub output: String,
    pub schema_batch: Vec<String>,
    pub batch_index: usize,
}

/// Per-dataset audit summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub dataset: String,
    pub domain: String,
    pub task: TaskKind,
    pub schema_count: usize,
    pub schema_details: Value,
    pub sample_count: usize,
    pub split_num: usize,
    pub instruction_count: usize,
    /// Inclusive bounds of the allowed batch-size range.
    pub split_range: (usize, usize),
    pub split_size_histogram: BTreeMap<usize, usize>,
    pub token_count: usize,
}

/// The scoring facet a tuple belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Facet {
    Entity,
    Relation,
    Trigger,
    Argument,
}

impl Facet {
    pub fn as_str(self) -> &'static str {
        match self {
            Facet::Entity => "entity",
            Facet::Relation => "relation",
            Facet::Trigger => "trigger",
            Facet::Argument => "argument",
        }
    }
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A scorable unit. Components are always normalized.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "facet", rename_all = "lowercase")]
pub enum ExtractionTuple {
    Entity {
        entity_type: String,
        mention: String,
    },
    Relation {
        relation: String,
        head: String,
        tail: String,
    },
    Trigger {
        event_type: String,
        trigger: String,
    },
    Argument {
        event_type: String,
        role: String,
        value: String,
    },
}

impl ExtractionTuple {
    /// Build a normalized tuple; `None` when any component is empty or an
    /// argument value is the missing-argument sentinel.
    pub fn entity(entity_type: &str, mention: &str) -> Option<Self> {
        let (t, m) = (normalize(entity_type), normalize(mention));
        (!t.is_empty() && !m.is_empty()).then_some(ExtractionTuple::Entity {
            entity_type: t,
            mention: m,
        })
    }

    pub fn relation(relation: &str, head: &str, tail: &str) -> Option<Self> {
        let (r, h, t) = (normalize(relation), normalize(head), normalize(tail));
        (!r.is_empty() && !h.is_empty() && !t.is_empty()).then_some(ExtractionTuple::Relation {
            relation: r,
            head: h,
            tail: t,
        })
    }

    pub fn trigger(event_type: &str, trigger: &str) -> Option<Self> {
        let (e, t) = (normalize(event_type), normalize(trigger));
        (!e.is_empty() && !t.is_empty()).then_some(ExtractionTuple::Trigger {
            event_type: e,
            trigger: t,
        })
    }

    pub fn argument(event_type: &str, role: &str, value: &str) -> Option<Self> {
        let (e, r, v) = (normalize(event_type), normalize(role), normalize(value));
        (!e.is_empty() && !r.is_empty() && !v.is_empty() && v != MISSING_ARGUMENT).then_some(
            ExtractionTuple::Argument {
                event_type: e,
                role: r,
                value: v,
            },
        )
    }

    pub fn facet(&self) -> Facet {
        match self {
            ExtractionTuple::Entity { .. } => Facet::Entity,
            ExtractionTuple::Relation { .. } => Facet::Relation,
            ExtractionTuple::Trigger { .. } => Facet::Trigger,
            ExtractionTuple::Argument { .. } => Facet::Argument,
        }
    }

    /// The schema label this tuple answers to.
    pub fn label(&self) -> &str {
        match self {
            ExtractionTuple::Entity { entity_type, .. } => entity_type,
            ExtractionTuple::Relation { relation, .. } => relation,
            ExtractionTuple::Trigger { event_type, .. }
            | ExtractionTuple::Argument { event_type, .. } => event_type,
        }
    }

    /// Re-normalize every component.
    pub fn normalized(&self) -> Self {
        match self {
            ExtractionTuple::Entity {
                entity_type,
                mention,
            } => ExtractionTuple::Entity {
                entity_type: normalize(entity_type),
                mention: normalize(mention),
            },
            ExtractionTuple::Relation {
                relation,
                head,
                tail,
            } => ExtractionTuple::Relation {
                relation: normalize(relation),
                head: normalize(head),
                tail: normalize(tail),
            },
            ExtractionTuple::Trigger {
                event_type,
                trigger,
            } => ExtractionTuple::Trigger {
                event_type: normalize(event_type),
                trigger: normalize(trigger),
            },
            ExtractionTuple::Argument {
                event_type,
                role,
                value,
            } => ExtractionTuple::Argument {
                event_type: normalize(event_type),
                role: normalize(role),
                value: normalize(value),
            },
        }
    }
}

/// Micro-averaged counts and derived scores.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ScoreReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let recall = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ScoreReport {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}
