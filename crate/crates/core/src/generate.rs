//! Batched instruction generation and dataset records.

use std::collections::{BTreeMap, HashSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::canonical;
use crate::error::{Error, Result};
use crate::model::{
    Annotations, DatasetRecord, InstructionInstance, LabelSet, Language, TaskKind, UnifiedSample,
    MISSING_ARGUMENT,
};
use crate::negatives::{assemble_schema_pool, HardNegativeDictionary, RngStream};
use crate::text::{count_tokens, normalize, TokenCounter};

pub const NER_TEMPLATE_EN: &str = "You are an expert in named entity recognition. Please extract entities that match the schema definition from the input. Return an empty list if the entity type does not exist. Please respond in the format of a JSON string.";
pub const RE_TEMPLATE_EN: &str = "You are an expert in relationship extraction. Please extract relationship triples that match the schema definition from the input. Return an empty list for relationships that do not exist. Please respond in the format of a JSON string.";
pub const EE_TEMPLATE_EN: &str = "You are an expert in event extraction. Please extract events from the input that conform to the schema definition. Return an empty list for events that do not exist, and return NAN for arguments that do not exist. If an argument has multiple values, please return a list. Respond in the format of a JSON string.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    #[default]
    HardNegative,
    /// Every label of the set is queried, in label-set order.
    TraditionalFullSchema,
}

impl std::str::FromStr for GenerationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard_negative" => Ok(GenerationMode::HardNegative),
            "traditional" | "traditional_full_schema" => Ok(GenerationMode::TraditionalFullSchema),
            _ => Err(Error::Config(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitNums {
    #[serde(rename = "NER")]
    pub ner: usize,
    #[serde(rename = "RE")]
    pub re: usize,
    #[serde(rename = "EE")]
    pub ee: usize,
}

impl Default for SplitNums {
    fn default() -> Self {
        SplitNums {
            ner: 6,
            re: 4,
            ee: 4,
        }
    }
}

impl SplitNums {
    pub fn get(&self, task: TaskKind) -> usize {
        match task {
            TaskKind::Ner => self.ner,
            TaskKind::Re => self.re,
            TaskKind::Ee => self.ee,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub split_num: SplitNums,
    pub mode: GenerationMode,
    /// Task descriptions keyed by task then language. English entries fall
    /// back to the bundled defaults when absent.
    pub templates: BTreeMap<TaskKind, BTreeMap<Language, String>>,
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        for task in TaskKind::ALL {
            if self.split_num.get(task) == 0 {
                return Err(Error::Config(format!("split_num for {task} must be >= 1")));
            }
        }
        for (task, by_lang) in &self.templates {
            for (lang, text) in by_lang {
                if text.trim().is_empty() {
                    return Err(Error::Config(format!("empty template for {task}/{lang}")));
                }
            }
        }
        Ok(())
    }

    pub fn template(&self, task: TaskKind, language: Language) -> Result<&str> {
        if let Some(t) = self.templates.get(&task).and_then(|m| m.get(&language)) {
            return Ok(t);
        }
        match (task, language) {
            (TaskKind::Ner, Language::En) => Ok(NER_TEMPLATE_EN),
            (TaskKind::Re, Language::En) => Ok(RE_TEMPLATE_EN),
            (TaskKind::Ee, Language::En) => Ok(EE_TEMPLATE_EN),
            _ => Err(Error::MissingTemplate {
                task: task.to_string(),
                language: language.to_string(),
            }),
        }
    }
}

/// Inclusive bounds on batch sizes for a given split_num.
pub fn batch_size_range(split_num: usize) -> (usize, usize) {
    (split_num / 2, split_num + split_num / 2)
}

/// Cut `pool` into sequential chunks of `split_num`; a trailing chunk
/// shorter than `split_num / 2` is folded into the one before it.
pub fn split_batches<T: Clone>(pool: &[T], split_num: usize) -> Vec<Vec<T>> {
    assert!(split_num >= 1, "split_num must be >= 1");
    let mut batches: Vec<Vec<T>> = pool.chunks(split_num).map(<[T]>::to_vec).collect();
    if batches.len() >= 2 && batches.last().is_some_and(|b| b.len() < split_num / 2) {
        let tail = batches.pop().unwrap();
        batches.last_mut().unwrap().extend(tail);
    }
    batches
}

fn schema_value(task: TaskKind, batch: &[String], label_set: &LabelSet) -> Result<Value> {
    if task != TaskKind::Ee {
        return Ok(json!(batch));
    }
    let mut items = Vec::with_capacity(batch.len());
    for label in batch {
        let schema = label_set.event(label).ok_or_else(|| {
            Error::Config(format!("event type `{label}` is not in the label set"))
        })?;
        items.push(serde_json::to_value(schema)?);
    }
    Ok(Value::Array(items))
}

/// Render the instruction payload: `instruction`, `schema`, `input`.
pub fn render_instruction(
    task: TaskKind,
    language: Language,
    batch: &[String],
    label_set: &LabelSet,
    text: &str,
    config: &GenerationConfig,
) -> Result<String> {
    let template = config.template(task, language)?;
    let mut obj = Map::new();
    obj.insert("instruction".into(), Value::String(template.to_string()));
    obj.insert("schema".into(), schema_value(task, batch, label_set)?);
    obj.insert("input".into(), Value::String(text.to_string()));
    Ok(canonical::to_string(&Value::Object(obj)))
}

fn push_unique(list: &mut Vec<Value>, seen: &mut HashSet<String>, value: Value) {
    if seen.insert(canonical::to_string(&value)) {
        list.push(value);
    }
}

/// Render the expected output: one key per queried label, in batch order.
pub fn render_output(batch: &[String], annotations: &Annotations, label_set: &LabelSet) -> String {
    let mut obj = Map::new();
    for label in batch {
        let mut items = Vec::new();
        let mut seen = HashSet::new();
        match annotations {
            Annotations::Ner(map) => {
                if let Some(mentions) = map.get(label) {
                    for m in mentions {
                        push_unique(&mut items, &mut seen, Value::String(normalize(m)));
                    }
                }
            }
            Annotations::Re(triples) => {
                for t in triples.iter().filter(|t| &t.relation == label) {
                    push_unique(
                        &mut items,
                        &mut seen,
                        json!({"head": normalize(&t.head), "tail": normalize(&t.tail)}),
                    );
                }
            }
            Annotations::Ee(events) => {
                let schema = label_set.event(label);
                for e in events.iter().filter(|e| &e.event_type == label) {
                    let mut roles: Vec<&str> = schema
                        .map(|s| s.arguments.iter().map(String::as_str).collect())
                        .unwrap_or_default();
                    for r in e.arguments.keys() {
                        if !roles.contains(&r.as_str()) {
                            roles.push(r);
                        }
                    }
                    let mut args = Map::new();
                    for role in roles {
                        args.insert(role.to_string(), argument_value(e.arguments.get(role)));
                    }
                    let mut ev = Map::new();
                    if schema.is_none_or(|s| s.trigger) {
                        ev.insert("trigger".into(), Value::String(normalize(&e.trigger)));
                    }
                    ev.insert("arguments".into(), Value::Object(args));
                    push_unique(&mut items, &mut seen, Value::Object(ev));
                }
            }
        }
        obj.insert(label.clone(), Value::Array(items));
    }
    canonical::to_string(&Value::Object(obj))
}

fn argument_value(values: Option<&Vec<String>>) -> Value {
    let mut distinct: Vec<String> = Vec::new();
    for v in values.into_iter().flatten() {
        let v = normalize(v);
        if !v.is_empty() && v != MISSING_ARGUMENT && !distinct.contains(&v) {
            distinct.push(v);
        }
    }
    match distinct.len() {
        0 => Value::String(MISSING_ARGUMENT.into()),
        1 => Value::String(distinct.pop().unwrap()),
        _ => json!(distinct),
    }
}

/// Turn one sample into its instruction instances.
pub fn generate_instances(
    sample: &UnifiedSample,
    label_set: &LabelSet,
    dict: &HardNegativeDictionary,
    config: &GenerationConfig,
    stream: &RngStream,
) -> Result<Vec<InstructionInstance>> {
    let task = sample.task();
    let split_num = config.split_num.get(task);
    let pool: Vec<String> = match config.mode {
        GenerationMode::HardNegative => {
            assemble_schema_pool(sample, label_set, dict, split_num, stream).pool
        }
        GenerationMode::TraditionalFullSchema => label_set.names().map(String::from).collect(),
    };
    split_batches(&pool, split_num)
        .into_iter()
        .enumerate()
        .map(|(batch_index, batch)| {
            Ok(InstructionInstance {
                dataset: sample.dataset.clone(),
                sample_id: sample.id.clone(),
                task,
                language: sample.language,
                instruction: render_instruction(
                    task,
                    sample.language,
                    &batch,
                    label_set,
                    &sample.text,
                    config,
                )?,
                output: render_output(&batch, &sample.annotations, label_set),
                schema_batch: batch,
                batch_index,
            })
        })
        .collect()
}

/// One corpus line: `{"instruction": ..., "output": ...}`.
pub fn corpus_line(instance: &InstructionInstance) -> String {
    let mut obj = IndexMap::new();
    obj.insert("instruction", &instance.instruction);
    obj.insert("output", &instance.output);
    canonical::to_string(&obj)
}

/// Sidecar line keyed by (dataset, sample_id, batch_index).
pub fn metadata_line(instance: &InstructionInstance) -> String {
    canonical::to_string(&json!({
        "dataset": instance.dataset,
        "sample_id": instance.sample_id,
        "batch_index": instance.batch_index,
        "task": instance.task,
        "language": instance.language,
        "schema_batch": instance.schema_batch,
    }))
}

/// Canonical ordering: dataset, then sample id, then batch index.
pub fn sort_canonical(instances: &mut [InstructionInstance]) {
    instances.sort_by(|a, b| {
        (&a.dataset, &a.sample_id, a.batch_index).cmp(&(&b.dataset, &b.sample_id, b.batch_index))
    });
}

pub fn build_dataset_record(
    dataset: &str,
    domain: &str,
    label_set: &LabelSet,
    samples: &[UnifiedSample],
    instances: &[InstructionInstance],
    config: &GenerationConfig,
    counter: &dyn TokenCounter,
) -> DatasetRecord {
    let split_num = config.split_num.get(label_set.task());
    let mut histogram = BTreeMap::new();
    for inst in instances {
        *histogram.entry(inst.schema_batch.len()).or_insert(0) += 1;
    }
    let payloads: Vec<&str> = instances
        .iter()
        .flat_map(|i| [i.instruction.as_str(), i.output.as_str()])
        .collect();
    DatasetRecord {
        dataset: dataset.to_string(),
        domain: domain.to_string(),
        task: label_set.task(),
        schema_count: label_set.len(),
        schema_details: label_set.to_value(),
        sample_count: samples.len(),
        split_num,
        instruction_count: instances.len(),
        split_range: batch_size_range(split_num),
        split_size_histogram: histogram,
        token_count: count_tokens(&payloads, counter),
    }
}
