//! Config-driven orchestration of the build, audit and dictionary stages.
//!
//! Artifacts are written to a staging directory next to the output
//! directory and moved into place only once every dataset succeeded.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::canonical;
use crate::clean::{clean_dataset, CleaningConfig, CleaningReport, DatasetSplits};
use crate::error::{Error, Result};
use crate::generate::{
    build_dataset_record, corpus_line, generate_instances, metadata_line, sort_canonical,
    GenerationConfig, GenerationMode,
};
use crate::ingest::{unify, AdapterDescriptor, AdapterFormat, AdapterIssue};
use crate::model::{
    DatasetRecord, InstructionInstance, LabelSet, Language, Split, TaskKind, UnifiedSample,
};
use crate::negatives::{
    build_hard_neg_dict, load_curated, HardNegativeDictionary, RngStream, SimilarityConfig,
};
use crate::text::WhitespaceCjkCounter;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterSpec {
    #[serde(flatten)]
    pub format: AdapterFormat,
    #[serde(default)]
    pub label_map: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    #[serde(default)]
    pub domain: String,
    pub task: TaskKind,
    pub language: Language,
    pub label_set: PathBuf,
    #[serde(default)]
    pub curated_dict: Option<PathBuf>,
    pub adapter: AdapterSpec,
    /// Input file per split; absent splits are empty.
    pub files: BTreeMap<Split, PathBuf>,
}

impl DatasetEntry {
    pub fn adapter(&self) -> AdapterDescriptor {
        AdapterDescriptor {
            task: self.task,
            language: self.language,
            format: self.adapter.format.clone(),
            label_map: self.adapter.label_map.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub cleaning: CleaningConfig,
    #[serde(default)]
    pub similarity: SimilarityConfig,
    #[serde(default)]
    pub generation: GenerationConfig,
    pub datasets: Vec<DatasetEntry>,
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub datasets: Option<Vec<String>>,
    pub mode: Option<GenerationMode>,
}

impl PipelineConfig {
    /// Load a TOML config. Relative paths resolve against the config's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&body).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.output_dir);
        for d in &mut cfg.datasets {
            resolve(&mut d.label_set);
            if let Some(p) = d.curated_dict.as_mut() {
                resolve(p);
            }
            d.files.values_mut().for_each(resolve);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.cleaning.validate()?;
        self.generation.validate()?;
        let mut names = std::collections::HashSet::new();
        for d in &self.datasets {
            if d.name.is_empty() || d.name.contains(['/', '\\']) || d.name.starts_with('.') {
                return Err(Error::Config(format!("invalid dataset name `{}`", d.name)));
            }
            if !names.insert(&d.name) {
                return Err(Error::Config(format!("duplicate dataset `{}`", d.name)));
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.output_dir {
            self.output_dir = out.clone();
        }
        if let Some(mode) = o.mode {
            self.generation.mode = mode;
        }
        if let Some(keep) = &o.datasets {
            if let Some(missing) = keep
                .iter()
                .find(|k| !self.datasets.iter().any(|d| &d.name == *k))
            {
                return Err(Error::Config(format!("unknown dataset `{missing}`")));
            }
            self.datasets.retain(|d| keep.contains(&d.name));
        }
        Ok(())
    }
}

/// A dataset after ingest and cleaning.
#[derive(Debug, Clone)]
pub struct CleanedDataset {
    pub label_set: LabelSet,
    pub raw_count: usize,
    pub splits: DatasetSplits,
    pub report: CleaningReport,
    pub adapter_issues: BTreeMap<Split, Vec<AdapterIssue>>,
}

pub fn load_label_set(entry: &DatasetEntry) -> Result<LabelSet> {
    let body = fs::read_to_string(&entry.label_set).map_err(|e| Error::io(&entry.label_set, e))?;
    LabelSet::from_json(entry.task, &body)
        .map_err(|e| Error::Config(format!("{}: {e}", entry.label_set.display())))
}

pub fn ingest_and_clean(entry: &DatasetEntry, cleaning: &CleaningConfig) -> Result<CleanedDataset> {
    let label_set = load_label_set(entry)?;
    let adapter = entry.adapter();
    let mut splits = DatasetSplits::default();
    let mut adapter_issues = BTreeMap::new();
    for (split, path) in &entry.files {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let out = unify(&body, &adapter, &entry.name, *split, &label_set);
        let slot = match split {
            Split::Train => &mut splits.train,
            Split::Val => &mut splits.val,
            Split::Test => &mut splits.test,
        };
        *slot = out.samples;
        if !out.issues.is_empty() {
            adapter_issues.insert(*split, out.issues);
        }
    }
    let raw_count = splits.len();
    let (splits, report) = clean_dataset(splits, cleaning);
    Ok(CleanedDataset {
        label_set,
        raw_count,
        splits,
        report,
        adapter_issues,
    })
}

pub fn dataset_dictionary(
    entry: &DatasetEntry,
    label_set: &LabelSet,
    sim: &SimilarityConfig,
) -> Result<HardNegativeDictionary> {
    let mut sim = sim.clone();
    if let Some(path) = &entry.curated_dict {
        let curated = load_curated(path)?;
        let merged = sim.curated_overrides.get_or_insert_with(Default::default);
        for (k, v) in curated {
            merged.entry(k).or_default().extend(v);
        }
    }
    build_hard_neg_dict(label_set, &sim).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", entry.name)),
        other => other,
    })
}

/// Generate instances for one split. Test samples always query the full
/// label set so the pool never reveals which labels are gold.
pub fn generate_split(
    samples: &[UnifiedSample],
    split: Split,
    label_set: &LabelSet,
    dict: &HardNegativeDictionary,
    generation: &GenerationConfig,
    seed: u64,
) -> Result<Vec<InstructionInstance>> {
    let mut cfg = generation.clone();
    if split == Split::Test {
        cfg.mode = GenerationMode::TraditionalFullSchema;
    }
    let per_sample: Vec<Vec<InstructionInstance>> = samples
        .par_iter()
        .map(|s| {
            generate_instances(
                s,
                label_set,
                dict,
                &cfg,
                &RngStream::new(seed, &s.dataset, &s.id),
            )
        })
        .collect::<Result<_>>()?;
    let mut all: Vec<InstructionInstance> = per_sample.into_iter().flatten().collect();
    sort_canonical(&mut all);
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetSummary {
    pub dataset: String,
    pub samples_in: usize,
    pub samples_out: usize,
    pub instances: usize,
    pub tokens: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub datasets: Vec<DatasetSummary>,
}

struct Staging {
    dir: PathBuf,
    done: bool,
}

impl Staging {
    fn new(out: &Path) -> Result<Self> {
        let name = out
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        let dir = out.with_file_name(format!(".{name}.partial"));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Staging { dir, done: false })
    }

    fn write(&self, rel: &str, body: &str) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, body).map_err(|e| Error::io(&path, e))
    }

    fn commit(mut self, out: &Path) -> Result<()> {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let entries = fs::read_dir(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&self.dir, e))?;
            let target = out.join(entry.file_name());
            if target.is_dir() {
                fs::remove_dir_all(&target).map_err(|e| Error::io(&target, e))?;
            } else if target.exists() {
                fs::remove_file(&target).map_err(|e| Error::io(&target, e))?;
            }
            fs::rename(entry.path(), &target).map_err(|e| Error::io(&target, e))?;
        }
        fs::remove_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        self.done = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.done {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

fn jsonl<T, F: Fn(&T) -> String>(items: &[T], f: F) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&f(item));
        out.push('\n');
    }
    out
}

fn write_cleaned(stage: &Staging, name: &str, cleaned: &CleanedDataset) -> Result<()> {
    for split in Split::ALL {
        stage.write(
            &format!("{name}/clean/{split}.jsonl"),
            &jsonl(cleaned.splits.get(split), UnifiedSample::to_json_line),
        )?;
    }
    let report = json!({
        "dataset": name,
        "raw_count": cleaned.raw_count,
        "cleaning": cleaned.report,
        "adapter_issues": cleaned.adapter_issues,
    });
    stage.write(
        &format!("{name}/cleaning_report.json"),
        &canonical::to_string(&report),
    )
}

/// Full pipeline: ingest, clean, dictionary, generate, record.
pub fn build(config: &PipelineConfig) -> Result<RunSummary> {
    let stage = Staging::new(&config.output_dir)?;
    let mut summary = RunSummary {
        output_dir: config.output_dir.clone(),
        datasets: Vec::new(),
    };
    for entry in &config.datasets {
        log::info!("building {}", entry.name);
        let cleaned = ingest_and_clean(entry, &config.cleaning)?;
        write_cleaned(&stage, &entry.name, &cleaned)?;

        let dict = dataset_dictionary(entry, &cleaned.label_set, &config.similarity)?;
        stage.write(
            &format!("{}/hard_negatives.json", entry.name),
            &canonical::to_string(&dict),
        )?;

        let mut corpus_samples = Vec::new();
        let mut corpus_instances = Vec::new();
        let mut total_instances = 0;
        for split in Split::ALL {
            let samples = cleaned.splits.get(split);
            let instances = generate_split(
                samples,
                split,
                &cleaned.label_set,
                &dict,
                &config.generation,
                config.seed,
            )?;
            stage.write(
                &format!("{}/corpus/{split}.jsonl", entry.name),
                &jsonl(&instances, corpus_line),
            )?;
            stage.write(
                &format!("{}/corpus/{split}.meta.jsonl", entry.name),
                &jsonl(&instances, metadata_line),
            )?;
            total_instances += instances.len();
            if split != Split::Test {
                corpus_samples.extend_from_slice(samples);
                corpus_instances.extend(instances);
            }
        }

        let record = build_dataset_record(
            &entry.name,
            &entry.domain,
            &cleaned.label_set,
            &corpus_samples,
            &corpus_instances,
            &config.generation,
            &WhitespaceCjkCounter,
        );
        stage.write(
            &format!("{}/record.json", entry.name),
            &canonical::to_string(&record),
        )?;
        summary.datasets.push(DatasetSummary {
            dataset: entry.name.clone(),
            samples_in: cleaned.raw_count,
            samples_out: cleaned.splits.len(),
            instances: total_instances,
            tokens: record.token_count,
        });
    }
    stage.commit(&config.output_dir)?;
    Ok(summary)
}

/// Ingest, clean and record without generating instructions.
pub fn audit(config: &PipelineConfig) -> Result<RunSummary> {
    let stage = Staging::new(&config.output_dir)?;
    let mut summary = RunSummary {
        output_dir: config.output_dir.clone(),
        datasets: Vec::new(),
    };
    for entry in &config.datasets {
        log::info!("auditing {}", entry.name);
        let cleaned = ingest_and_clean(entry, &config.cleaning)?;
        write_cleaned(&stage, &entry.name, &cleaned)?;
        let samples: Vec<UnifiedSample> = cleaned
            .splits
            .train
            .iter()
            .chain(&cleaned.splits.val)
            .cloned()
            .collect();
        let record = audit_record(entry, &cleaned.label_set, &samples, &config.generation);
        stage.write(
            &format!("{}/record.json", entry.name),
            &canonical::to_string(&record),
        )?;
        summary.datasets.push(DatasetSummary {
            dataset: entry.name.clone(),
            samples_in: cleaned.raw_count,
            samples_out: cleaned.splits.len(),
            instances: 0,
            tokens: 0,
        });
    }
    stage.commit(&config.output_dir)?;
    Ok(summary)
}

fn audit_record(
    entry: &DatasetEntry,
    label_set: &LabelSet,
    samples: &[UnifiedSample],
    generation: &GenerationConfig,
) -> DatasetRecord {
    build_dataset_record(
        &entry.name,
        &entry.domain,
        label_set,
        samples,
        &[],
        generation,
        &WhitespaceCjkCounter,
    )
}

/// Build and dump only the hard-negative dictionaries.
pub fn dictionaries(config: &PipelineConfig) -> Result<RunSummary> {
    let stage = Staging::new(&config.output_dir)?;
    let mut summary = RunSummary {
        output_dir: config.output_dir.clone(),
        datasets: Vec::new(),
    };
    for entry in &config.datasets {
        let label_set = load_label_set(entry)?;
        let dict = dataset_dictionary(entry, &label_set, &config.similarity)?;
        stage.write(
            &format!("{}/hard_negatives.json", entry.name),
            &canonical::to_string(&dict),
        )?;
        summary.datasets.push(DatasetSummary {
            dataset: entry.name.clone(),
            samples_in: 0,
            samples_out: 0,
            instances: 0,
            tokens: 0,
        });
    }
    stage.commit(&config.output_dir)?;
    Ok(summary)
}
