//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or exceeds its time budget.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use ieforge::clean::{
    clean_dataset, dedup_within_split, quality_filter, remove_cross_split_leakage, CleaningConfig,
    DatasetSplits, RemovalReason, Verdict,
};
use ieforge::eval::{micro_f1, parse_prediction};
use ieforge::generate::{
    batch_size_range, build_dataset_record, generate_instances, render_instruction, render_output,
    split_batches, GenerationConfig, GenerationMode,
};
use ieforge::negatives::{assemble_schema_pool, HardNegativeDictionary, RngStream};
use ieforge::pipeline::{build, PipelineConfig};
use ieforge::text::WhitespaceCjkCounter;
use ieforge::{
    positive_labels, Annotations, Event, EventSchema, ExtractionTuple, InstructionInstance,
    LabelSet, Language, ScoreReport, Split, TaskKind, Triple, UnifiedSample,
};

type Check = Result<String, String>;
type Criterion = (&'static str, &'static str, Duration, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn sample(id: &str, text: &str, annotations: Annotations) -> UnifiedSample {
    UnifiedSample {
        id: id.into(),
        dataset: "fixture".into(),
        split: Split::Train,
        language: Language::En,
        text: text.into(),
        annotations,
    }
}

fn re_triples(relations: &[&str]) -> Annotations {
    Annotations::Re(
        relations
            .iter()
            .map(|r| Triple {
                relation: r.to_string(),
                head: format!("{r} head"),
                tail: format!("{r} tail"),
            })
            .collect(),
    )
}

/// |L| = 48, two positives whose dictionary neighbours give four hard negatives.
fn a1_fixture() -> (LabelSet, HardNegativeDictionary, UnifiedSample) {
    let names: Vec<String> = (0..48).map(|i| format!("relation {i:02}")).collect();
    let ls = LabelSet::plain(TaskKind::Re, &names).unwrap();
    let mut entries: IndexMap<String, Vec<String>> =
        names.iter().map(|n| (n.clone(), Vec::new())).collect();
    entries["relation 00"] = vec![
        "relation 10".into(),
        "relation 11".into(),
        "relation 01".into(),
    ];
    entries["relation 01"] = vec![
        "relation 12".into(),
        "relation 13".into(),
        "relation 10".into(),
    ];
    let dict = HardNegativeDictionary {
        task: TaskKind::Re,
        entries,
    };
    let s = sample(
        "a1",
        "fixture text for the forty-eight label case",
        re_triples(&["relation 00", "relation 01"]),
    );
    (ls, dict, s)
}

fn a1() -> Check {
    let (ls, dict, s) = a1_fixture();
    let stream = RngStream::new(7, "fixture", "a1");
    let p = assemble_schema_pool(&s, &ls, &dict, 4, &stream);
    ensure!(
        (
            p.positive.len(),
            p.hard_negative.len(),
            p.other_negative_sampled.len(),
            p.pool.len()
        ) == (2, 4, 4, 10),
        "partition sizes {:?}",
        (
            p.positive.len(),
            p.hard_negative.len(),
            p.other_negative_sampled.len(),
            p.pool.len()
        )
    );
    let cfg = GenerationConfig::default();
    ensure!(
        cfg.split_num.get(TaskKind::Re) == 4,
        "RE split_num default is not 4"
    );
    let hard = generate_instances(&s, &ls, &dict, &cfg, &stream).map_err(|e| e.to_string())?;
    let trad_cfg = GenerationConfig {
        mode: GenerationMode::TraditionalFullSchema,
        ..cfg
    };
    let trad = generate_instances(&s, &ls, &dict, &trad_cfg, &stream).map_err(|e| e.to_string())?;
    ensure!(
        hard.len() == 3,
        "hard-negative mode emitted {} instances",
        hard.len()
    );
    ensure!(
        trad.len() == 12,
        "traditional mode emitted {} instances",
        trad.len()
    );
    Ok(format!(
        "hard_negative={} traditional={}",
        hard.len(),
        trad.len()
    ))
}

fn a2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA2);
    for case in 0..1000 {
        let split_num = *[4usize, 6].choose(&mut rng).unwrap();
        let n = rng.gen_range(1..=60);
        let mut pool: Vec<u32> = (0..n as u32).collect();
        pool.shuffle(&mut rng);
        let batches = split_batches(&pool, split_num);
        let (lo, hi) = batch_size_range(split_num);
        let lone_undersized = n < lo && batches.len() == 1;
        for b in &batches {
            ensure!(
                lone_undersized || (lo..=hi).contains(&b.len()),
                "case {case}: batch size {} outside [{lo},{hi}] (pool {n}, split_num {split_num})",
                b.len()
            );
        }
        let flat: Vec<u32> = batches.iter().flatten().copied().collect();
        ensure!(
            flat == pool,
            "case {case}: batches do not concatenate to the pool"
        );
        let distinct: BTreeSet<u32> = flat.iter().copied().collect();
        ensure!(distinct.len() == flat.len(), "case {case}: batches overlap");
    }
    Ok("1000 cases".into())
}

fn event_schemas() -> Vec<EventSchema> {
    vec![
        EventSchema::new("pardon", &["defendant"]),
        EventSchema::new("extradite", &["person", "agent", "destination", "origin"]),
        EventSchema::new("sue", &["place", "plaintiff"]),
        EventSchema::new("start position", &["person", "entity", "place"]),
        EventSchema::new("end position", &["person", "entity", "place"]),
        EventSchema::new("attack", &["attacker", "target", "place"]),
        EventSchema::new("meet", &["entity", "place"]),
    ]
}

/// Random sample of the given task over `ls`.
fn random_sample(rng: &mut ChaCha8Rng, idx: usize, ls: &LabelSet) -> UnifiedSample {
    let names: Vec<String> = ls.names().map(String::from).collect();
    let k = rng.gen_range(0..=names.len().min(3));
    let picked: Vec<&String> = names.choose_multiple(rng, k).collect();
    let annotations = match ls.task() {
        TaskKind::Ner => Annotations::Ner(
            picked
                .iter()
                .map(|l| ((*l).clone(), vec![format!("{l} mention {idx}")]))
                .collect(),
        ),
        TaskKind::Re => Annotations::Re(
            picked
                .iter()
                .map(|l| Triple {
                    relation: (*l).clone(),
                    head: format!("h{idx}"),
                    tail: format!("t{idx}"),
                })
                .collect(),
        ),
        TaskKind::Ee => Annotations::Ee(
            picked
                .iter()
                .map(|l| {
                    let schema = ls.event(l).unwrap();
                    let mut args = IndexMap::new();
                    for role in &schema.arguments {
                        match rng.gen_range(0..3) {
                            0 => {}
                            1 => {
                                args.insert(role.clone(), vec![format!("{role} {idx}")]);
                            }
                            _ => {
                                args.insert(
                                    role.clone(),
                                    vec![format!("{role} a{idx}"), format!("{role} b{idx}")],
                                );
                            }
                        }
                    }
                    Event {
                        event_type: (*l).clone(),
                        trigger: format!("trigger {idx}"),
                        arguments: args,
                    }
                })
                .collect(),
        ),
    };
    sample(
        &format!("s{idx}"),
        &format!("random text number {idx}"),
        annotations,
    )
}

fn check_instance_output(
    inst: &InstructionInstance,
    s: &UnifiedSample,
    ls: &LabelSet,
) -> Result<(), String> {
    let out: Value = serde_json::from_str(&inst.output).map_err(|e| e.to_string())?;
    let obj = out.as_object().ok_or("output is not an object")?;
    let keys: Vec<&String> = obj.keys().collect();
    let batch: Vec<&String> = inst.schema_batch.iter().collect();
    ensure!(
        keys == batch,
        "{}#{}: keys {:?} != batch {:?}",
        inst.sample_id,
        inst.batch_index,
        keys,
        batch
    );
    let positives = positive_labels(s);
    for (label, v) in obj {
        let items = v.as_array().ok_or("value is not a list")?;
        if !positives.contains(label) {
            ensure!(
                items.is_empty(),
                "negative `{label}` has a non-empty answer"
            );
            continue;
        }
        if let (Annotations::Ee(events), Some(schema)) = (&s.annotations, ls.event(label)) {
            for (item, event) in items
                .iter()
                .zip(events.iter().filter(|e| &e.event_type == label))
            {
                let args = item["arguments"]
                    .as_object()
                    .ok_or("EE item lacks arguments")?;
                for role in &schema.arguments {
                    let expect_nan = event.arguments.get(role).is_none_or(Vec::is_empty);
                    let got = args.get(role).ok_or(format!("role `{role}` missing"))?;
                    if expect_nan {
                        ensure!(got == "NAN", "missing role `{role}` rendered as {got}");
                    } else {
                        ensure!(got != "NAN", "present role `{role}` rendered as NAN");
                    }
                }
            }
        }
    }
    Ok(())
}

fn a3() -> Check {
    let mut checked = 0;
    // the A1 fixture in both modes
    let (ls, dict, s) = a1_fixture();
    for mode in [
        GenerationMode::HardNegative,
        GenerationMode::TraditionalFullSchema,
    ] {
        let cfg = GenerationConfig {
            mode,
            ..Default::default()
        };
        for inst in generate_instances(&s, &ls, &dict, &cfg, &RngStream::new(7, "fixture", "a1"))
            .map_err(|e| e.to_string())?
        {
            check_instance_output(&inst, &s, &ls)?;
            checked += 1;
        }
    }
    // randomized samples over all three tasks, split_num 4 and 6
    let mut rng = ChaCha8Rng::seed_from_u64(0xA3);
    let ner_names: Vec<String> = (0..18).map(|i| format!("type{i}")).collect();
    let re_names: Vec<String> = (0..24).map(|i| format!("rel {i}")).collect();
    let sets = [
        LabelSet::plain(TaskKind::Ner, &ner_names).unwrap(),
        LabelSet::plain(TaskKind::Re, &re_names).unwrap(),
        LabelSet::events(event_schemas()).unwrap(),
    ];
    for idx in 0..1000 {
        let ls = &sets[idx % 3];
        let names: Vec<String> = ls.names().map(String::from).collect();
        let mut entries: IndexMap<String, Vec<String>> = IndexMap::new();
        for n in &names {
            let k = rng.gen_range(0..3);
            entries.insert(
                n.clone(),
                names
                    .iter()
                    .filter(|m| *m != n)
                    .cloned()
                    .collect::<Vec<_>>()
                    .choose_multiple(&mut rng, k)
                    .cloned()
                    .collect(),
            );
        }
        let dict = HardNegativeDictionary {
            task: ls.task(),
            entries,
        };
        let s = random_sample(&mut rng, idx, ls);
        let split_num = *[4usize, 6].choose(&mut rng).unwrap();
        let mut cfg = GenerationConfig::default();
        cfg.split_num.ner = split_num;
        cfg.split_num.re = split_num;
        cfg.split_num.ee = split_num;
        cfg.mode = if rng.gen_bool(0.5) {
            GenerationMode::HardNegative
        } else {
            GenerationMode::TraditionalFullSchema
        };
        let instances = generate_instances(
            &s,
            ls,
            &dict,
            &cfg,
            &RngStream::new(idx as u64, "fixture", &s.id),
        )
        .map_err(|e| e.to_string())?;
        let mut seen = BTreeSet::new();
        for inst in &instances {
            check_instance_output(inst, &s, ls)?;
            for l in &inst.schema_batch {
                ensure!(
                    seen.insert(l.clone()),
                    "label `{l}` queried twice for {}",
                    s.id
                );
            }
            checked += 1;
        }
        for p in positive_labels(&s) {
            ensure!(
                seen.contains(&p),
                "positive `{p}` never queried for {}",
                s.id
            );
        }
    }
    Ok(format!("{checked} instances"))
}

const NER_INSTRUCTION: &str = r#"{"instruction": "You are an expert in named entity recognition. Please extract entities that match the schema definition from the input. Return an empty list if the entity type does not exist. Please respond in the format of a JSON string.", "schema": ["location", "else", "organization", "person"], "input": "The objective of the Basic Course on War is to provide for combatants of the EPR basic military knowledge for the armed conflict against the police and military apparatus of the bourgeoisie."}"#;
const NER_OUTPUT: &str = r#"{"location": [], "else": [], "organization": ["EPR"], "person": []}"#;
const RE_INSTRUCTION: &str = r#"{"instruction": "You are an expert in relationship extraction. Please extract relationship triples that match the schema definition from the input. Return an empty list for relationships that do not exist. Please respond in the format of a JSON string.", "schema": ["place of birth", "country capital", "country of administrative divisions", "company"], "input": "Born on May 1 , 1927 , in Brichevo , Bessarabia in the present-day Republic of Moldova , Mr. Bertini emigrated to Palestine with his family as a child and pursued musical studies there , in Milan , and in Paris , where he worked with Nadia Boulanger and Arthur Honegger."}"#;
const RE_OUTPUT: &str = r#"{"place of birth": [{"head": "Mr. Bertini", "tail": "Paris"}], "country capital": [], "country of administrative divisions": [], "company": []}"#;
const EE_INSTRUCTION: &str = r#"{"instruction": "You are an expert in event extraction. Please extract events from the input that conform to the schema definition. Return an empty list for events that do not exist, and return NAN for arguments that do not exist. If an argument has multiple values, please return a list. Respond in the format of a JSON string.", "schema": [{"event_type": "pardon", "trigger": true, "arguments": ["defendant"]}, {"event_type": "extradite", "trigger": true, "arguments": ["person", "agent", "destination", "origin"]}, {"event_type": "sue", "trigger": true, "arguments": ["place", "plaintiff"]}, {"event_type": "start position", "trigger": true, "arguments": ["person", "entity", "place"]}], "input": "Ethical and legal issues in hiring Marinello"}"#;
const EE_OUTPUT: &str = r#"{"pardon": [], "extradite": [], "sue": [], "start position": [{"trigger": "hiring", "arguments": {"person": "Marinello", "entity": "NAN", "place": "NAN"}}]}"#;

fn a4() -> Check {
    let cfg = GenerationConfig::default();
    let strings = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();

    let ner_batch = strings(&["location", "else", "organization", "person"]);
    let ner_ls = LabelSet::plain(TaskKind::Ner, &ner_batch).unwrap();
    let ner_text = "The objective of the Basic Course on War is to provide for combatants of the EPR basic military knowledge for the armed conflict against the police and military apparatus of the bourgeoisie.";
    let mut m = IndexMap::new();
    m.insert("organization".to_string(), vec!["EPR".to_string()]);
    let ner_ann = Annotations::Ner(m);

    let re_batch = strings(&[
        "place of birth",
        "country capital",
        "country of administrative divisions",
        "company",
    ]);
    let re_ls = LabelSet::plain(TaskKind::Re, &re_batch).unwrap();
    let re_text = "Born on May 1 , 1927 , in Brichevo , Bessarabia in the present-day Republic of Moldova , Mr. Bertini emigrated to Palestine with his family as a child and pursued musical studies there , in Milan , and in Paris , where he worked with Nadia Boulanger and Arthur Honegger.";
    let re_ann = Annotations::Re(vec![Triple {
        relation: "place of birth".into(),
        head: "Mr. Bertini".into(),
        tail: "Paris".into(),
    }]);

    let ee_batch = strings(&["pardon", "extradite", "sue", "start position"]);
    let ee_ls = LabelSet::events(event_schemas()).unwrap();
    let mut args = IndexMap::new();
    args.insert("person".to_string(), vec!["Marinello".to_string()]);
    let ee_ann = Annotations::Ee(vec![Event {
        event_type: "start position".into(),
        trigger: "hiring".into(),
        arguments: args,
    }]);
    let ee_text = "Ethical and legal issues in hiring Marinello";

    let cases = [
        (
            "NER",
            TaskKind::Ner,
            &ner_batch,
            &ner_ls,
            ner_text,
            &ner_ann,
            NER_INSTRUCTION,
            NER_OUTPUT,
        ),
        (
            "RE",
            TaskKind::Re,
            &re_batch,
            &re_ls,
            re_text,
            &re_ann,
            RE_INSTRUCTION,
            RE_OUTPUT,
        ),
        (
            "EE",
            TaskKind::Ee,
            &ee_batch,
            &ee_ls,
            ee_text,
            &ee_ann,
            EE_INSTRUCTION,
            EE_OUTPUT,
        ),
    ];
    for (name, task, batch, ls, text, ann, want_ins, want_out) in cases {
        let ins = render_instruction(task, Language::En, batch, ls, text, &cfg)
            .map_err(|e| e.to_string())?;
        ensure!(
            ins.as_bytes() == want_ins.as_bytes(),
            "{name} instruction differs:\n got {ins}\nwant {want_ins}"
        );
        let out = render_output(batch, ann, ls);
        ensure!(
            out.as_bytes() == want_out.as_bytes(),
            "{name} output differs:\n got {out}\nwant {want_out}"
        );
    }
    Ok("NER, RE, EE byte-exact".into())
}

fn ner_sample(id: &str, split: Split, text: &str, labelled: bool) -> UnifiedSample {
    let mut m = IndexMap::new();
    if labelled {
        m.insert("person".to_string(), vec!["X".to_string()]);
    }
    UnifiedSample {
        split,
        ..sample(id, text, Annotations::Ner(m))
    }
}

fn a5() -> Check {
    let cfg = CleaningConfig::default();
    let verdict = |text: &str, labelled: bool| {
        quality_filter(&ner_sample("q", Split::Train, text, labelled), &cfg)
    };
    let rule_cases = [
        ("a####", true, Verdict::Keep),
        ("a#####", true, Verdict::Reject(RemovalReason::RuleNonAlpha)),
        (
            "abcd",
            false,
            Verdict::Reject(RemovalReason::RuleShortUnlabeled),
        ),
        ("abcde", false, Verdict::Keep),
        ("the to of the cat", true, Verdict::Keep),
        (
            "the to of the to cat",
            true,
            Verdict::Reject(RemovalReason::RuleStopword),
        ),
    ];
    for (text, labelled, want) in rule_cases {
        let got = verdict(text, labelled);
        ensure!(got == want, "`{text}` -> {got:?}, want {want:?}");
    }

    let (kept, r) = dedup_within_split(
        vec![
            ner_sample("1", Split::Train, "shared text here", true),
            ner_sample("2", Split::Train, "shared text here", false),
            ner_sample("3", Split::Train, "unique text here", false),
        ],
        &cfg,
    );
    ensure!(
        kept.len() == 1 && kept[0].id == "3",
        "inconsistent duplicates kept: {:?}",
        kept.iter().map(|s| &s.id).collect::<Vec<_>>()
    );
    ensure!(
        r.counts.inconsistent_duplicate == 2,
        "inconsistent count {}",
        r.counts.inconsistent_duplicate
    );

    let test = vec![ner_sample("t", Split::Test, "leaked text here", false)];
    let (train, val, r) = remove_cross_split_leakage(
        vec![
            ner_sample("a", Split::Train, "leaked text here", false),
            ner_sample("b", Split::Train, "fine text here", false),
        ],
        vec![ner_sample("c", Split::Val, "leaked text here ", false)],
        &test,
    );
    ensure!(
        train.len() == 1 && val.is_empty() && r.counts.cross_split_leak == 2,
        "leak removal wrong"
    );

    let splits = DatasetSplits {
        train: vec![
            ner_sample("1", Split::Train, "shared text here", true),
            ner_sample("2", Split::Train, "shared text here", false),
            ner_sample("3", Split::Train, "same again text", true),
            ner_sample("4", Split::Train, "same again text", true),
            ner_sample("5", Split::Train, "leaked text here", false),
            ner_sample("6", Split::Train, "a#####", true),
            ner_sample("7", Split::Train, "abcd", false),
            ner_sample("8", Split::Train, "the to of the to cat", true),
        ],
        val: vec![ner_sample("9", Split::Val, "validation text", true)],
        test: test.clone(),
    };
    let (out, r) = clean_dataset(splits, &cfg);
    ensure!(r.is_conserved(), "count conservation violated: {:?}", r);
    ensure!(out.len() == 3, "expected 3 survivors, got {}", out.len());
    ensure!(out.test == test, "test split modified");
    Ok(format!(
        "in={} out={} removed={}",
        r.input_count,
        r.output_count,
        r.counts.total()
    ))
}

/// Pairwise enumeration over raw lists, independent of the set-based scorer.
fn brute_force(
    gold: &[Vec<ExtractionTuple>],
    pred: &[Vec<ExtractionTuple>],
) -> (usize, usize, usize) {
    let dedup = |v: &Vec<ExtractionTuple>| {
        let mut out: Vec<ExtractionTuple> = Vec::new();
        for t in v {
            if !out.iter().any(|o| o == t) {
                out.push(t.clone());
            }
        }
        out
    };
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        let (g, p) = (dedup(g), dedup(p));
        for pt in &p {
            if g.iter().any(|gt| gt == pt) {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        for gt in &g {
            if !p.iter().any(|pt| pt == gt) {
                fn_ += 1;
            }
        }
    }
    (tp, fp, fn_)
}

fn random_tuple(rng: &mut ChaCha8Rng, facet: usize) -> ExtractionTuple {
    let label = ["a", "b", "c"][rng.gen_range(0..3)];
    let text = ["x", "y", "z", " x ", "w"][rng.gen_range(0..5)];
    let other = ["p", "q"][rng.gen_range(0..2)];
    match facet {
        0 => ExtractionTuple::entity(label, text),
        1 => ExtractionTuple::relation(label, text, other),
        2 => ExtractionTuple::trigger(label, text),
        _ => ExtractionTuple::argument(label, other, text),
    }
    .unwrap()
}

fn a6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA6);
    for facet in 0..4 {
        for trial in 0..500 {
            let n_samples = rng.gen_range(1..=4);
            let mut gold_lists = Vec::new();
            let mut pred_lists = Vec::new();
            let mut gold = BTreeMap::new();
            let mut pred = BTreeMap::new();
            for s in 0..n_samples {
                let g: Vec<ExtractionTuple> = (0..rng.gen_range(0..=10))
                    .map(|_| random_tuple(&mut rng, facet))
                    .collect();
                let p: Vec<ExtractionTuple> = (0..rng.gen_range(0..=10))
                    .map(|_| random_tuple(&mut rng, facet))
                    .collect();
                gold.insert(format!("s{s}"), g.iter().cloned().collect::<BTreeSet<_>>());
                // some samples have no prediction line at all
                if !p.is_empty() || rng.gen_bool(0.5) {
                    pred.insert(format!("s{s}"), p.iter().cloned().collect::<BTreeSet<_>>());
                }
                gold_lists.push(g);
                pred_lists.push(p);
            }
            let got = micro_f1(&gold, &pred).map_err(|e| e.to_string())?;
            let (tp, fp, fn_) = brute_force(&gold_lists, &pred_lists);
            let want = ScoreReport::from_counts(tp, fp, fn_);
            ensure!(
                got == want,
                "facet {facet} trial {trial}: {got:?} != {want:?}"
            );
        }
    }
    let gold = BTreeMap::from([("s".to_string(), BTreeSet::from(["t1", "t2"]))]);
    let pred = BTreeMap::from([("s".to_string(), BTreeSet::from(["t1", "t3"]))]);
    let r = micro_f1(&gold, &pred).map_err(|e| e.to_string())?;
    ensure!(
        (r.tp, r.fp, r.fn_) == (1, 1, 1),
        "hand fixture counts {:?}",
        (r.tp, r.fp, r.fn_)
    );
    ensure!(
        r.precision == 0.5 && r.recall == 0.5 && r.f1 == 0.5,
        "hand fixture scores {r:?}"
    );

    // clean serialization round-trips through the parser
    let ls = LabelSet::events(event_schemas()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA61);
    for idx in 0..200 {
        let s = random_sample(&mut rng, idx, &ls);
        let batch: Vec<String> = ls.names().map(String::from).collect();
        let parsed = parse_prediction(
            TaskKind::Ee,
            Some(&batch),
            &render_output(&batch, &s.annotations, &ls),
        );
        ensure!(
            parsed.tuples == ieforge::eval::tuples_of_annotations(&s.annotations),
            "round trip lost tuples for {}",
            s.id
        );
    }
    Ok("4 facets x 500 trials exact; hand fixture P=R=F1=0.5".into())
}

fn a7() -> Check {
    let (dir, config) = common::workspace();
    let mut cfg = PipelineConfig::load(&config).map_err(|e| e.to_string())?;
    let out_a = dir.path().join("run_a");
    let out_b = dir.path().join("run_b");
    let out_c = dir.path().join("run_c");
    cfg.output_dir = out_a.clone();
    build(&cfg).map_err(|e| e.to_string())?;
    cfg.output_dir = out_b.clone();
    build(&cfg).map_err(|e| e.to_string())?;
    let (da, db) = (common::digest_tree(&out_a), common::digest_tree(&out_b));
    ensure!(
        da == db,
        "same seed produced different digests {da} vs {db}"
    );

    cfg.output_dir = out_c.clone();
    cfg.seed ^= 0x5EED;
    build(&cfg).map_err(|e| e.to_string())?;

    for ds in ["conll", "nyt", "ace"] {
        let path = |root: &std::path::Path, f: &str| root.join(ds).join(f);
        // inputs to generation are seed-independent
        for f in [
            "clean/train.jsonl",
            "clean/val.jsonl",
            "clean/test.jsonl",
            "hard_negatives.json",
            "corpus/test.jsonl",
        ] {
            ensure!(
                std::fs::read(path(&out_a, f)).unwrap() == std::fs::read(path(&out_c, f)).unwrap(),
                "{ds}/{f} changed with the seed"
            );
        }
        let answers = |root: &std::path::Path| -> BTreeMap<String, BTreeMap<String, Value>> {
            let corpus = common::read_jsonl(&path(root, "corpus/train.jsonl"));
            let meta = common::read_jsonl(&path(root, "corpus/train.meta.jsonl"));
            let mut per_sample: BTreeMap<String, BTreeMap<String, Value>> = BTreeMap::new();
            for (c, m) in corpus.iter().zip(&meta) {
                let out: Value = serde_json::from_str(c["output"].as_str().unwrap()).unwrap();
                let entry = per_sample
                    .entry(m["sample_id"].as_str().unwrap().to_string())
                    .or_default();
                for (k, v) in out.as_object().unwrap() {
                    if v.as_array().is_some_and(|a| !a.is_empty()) {
                        entry.insert(k.clone(), v.clone());
                    }
                }
            }
            per_sample
        };
        let (pa, pc) = (answers(&out_a), answers(&out_c));
        ensure!(pa == pc, "{ds}: positive answers differ between seeds");
        let samples = common::read_jsonl(&path(&out_a, "clean/train.jsonl"));
        for s in samples {
            let sample: UnifiedSample = serde_json::from_value(s).unwrap();
            let pos = positive_labels(&sample);
            let covered: BTreeSet<&String> = pa
                .get(&sample.id)
                .map(|m| m.keys().collect())
                .unwrap_or_default();
            ensure!(
                pos.iter().collect::<BTreeSet<_>>() == covered,
                "{ds}/{}: positive coverage {covered:?} != {pos:?}",
                sample.id
            );
        }
    }
    ensure!(
        da != common::digest_tree(&out_c),
        "a different seed produced an identical corpus"
    );
    Ok(format!("digest {}", &da[..16]))
}

const ONTONOTES: [&str; 18] = [
    "PERSON",
    "NORP",
    "FAC",
    "ORG",
    "GPE",
    "LOC",
    "PRODUCT",
    "EVENT",
    "WORK_OF_ART",
    "LAW",
    "LANGUAGE",
    "DATE",
    "TIME",
    "PERCENT",
    "MONEY",
    "QUANTITY",
    "ORDINAL",
    "CARDINAL",
];

fn a8() -> Check {
    let ls = LabelSet::plain(TaskKind::Ner, &ONTONOTES).unwrap();
    let dict = ieforge::negatives::build_hard_neg_dict(&ls, &Default::default())
        .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xA8);
    let samples: Vec<UnifiedSample> = (0..50).map(|i| random_sample(&mut rng, i, &ls)).collect();
    let mut instances = Vec::new();
    for mode in [
        GenerationMode::HardNegative,
        GenerationMode::TraditionalFullSchema,
    ] {
        let cfg = GenerationConfig {
            mode,
            ..Default::default()
        };
        for s in &samples {
            instances.extend(
                generate_instances(s, &ls, &dict, &cfg, &RngStream::new(1, "ontonotes", &s.id))
                    .map_err(|e| e.to_string())?,
            );
        }
    }
    let rec = build_dataset_record(
        "ontonotes",
        "general",
        &ls,
        &samples,
        &instances,
        &GenerationConfig::default(),
        &WhitespaceCjkCounter,
    );
    ensure!(rec.schema_count == 18, "schema_count {}", rec.schema_count);
    let total: usize = rec.split_size_histogram.values().sum();
    ensure!(
        total == rec.instruction_count,
        "histogram sums to {total}, instruction_count {}",
        rec.instruction_count
    );
    ensure!(
        rec.split_num == 6 && rec.split_range == (3, 9),
        "split_num {} range {:?}",
        rec.split_num,
        rec.split_range
    );
    Ok(format!(
        "schema_count=18 instructions={} histogram={:?}",
        rec.instruction_count, rec.split_size_histogram
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("A1", "hard-negative economy", Duration::from_secs(1), a1),
        (
            "A2",
            "batch bounds and coverage",
            Duration::from_secs(5),
            a2,
        ),
        ("A3", "output-key fidelity", Duration::from_secs(5), a3),
        ("A4", "golden payloads", Duration::from_secs(1), a4),
        ("A5", "cleaning rules", Duration::from_secs(1), a5),
        (
            "A6",
            "scorer oracle equivalence",
            Duration::from_secs(10),
            a6,
        ),
        ("A7", "determinism", Duration::from_secs(30), a7),
        ("A8", "record fidelity", Duration::from_secs(1), a8),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > budget => {
                Err(format!("{detail}; took {elapsed:?}, budget {budget:?}"))
            }
            other => other,
        };
        match result {
            Ok(detail) => println!(
                "{id} PASS {name} ({:.1} ms): {detail}",
                elapsed.as_secs_f64() * 1e3
            ),
            Err(why) => {
                failed += 1;
                println!(
                    "{id} FAIL {name} ({:.1} ms): {why}",
                    elapsed.as_secs_f64() * 1e3
                );
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
