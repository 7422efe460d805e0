use rayon::prelude::*;

use crate::config::RunConfig;
use crate::corpus::{stratified_split, Dataset, Domain};
use crate::embeddings::{ContextualProvider, EmbeddingTable};
use crate::error::{Error, Result};
use crate::experiments::reference;
use crate::experiments::report::{misclassified_of, ExperimentReport, RunResult};
use crate::models::{
    evaluate, train, Classifier, Model, Model1, Model2, ModelKind, TrainHistory,
};

/// The four evaluation protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    MultiDomain,
    CrossDomain,
    LeaveOneDomainOut,
    PerDomain,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::MultiDomain => "multi_domain",
            ProtocolKind::CrossDomain => "cross_domain",
            ProtocolKind::LeaveOneDomainOut => "leave_one_domain_out",
            ProtocolKind::PerDomain => "per_domain",
        }
    }

    pub fn parse(s: &str) -> Option<ProtocolKind> {
        match s {
            "multi_domain" => Some(ProtocolKind::MultiDomain),
            "cross_domain" => Some(ProtocolKind::CrossDomain),
            "leave_one_domain_out" => Some(ProtocolKind::LeaveOneDomainOut),
            "per_domain" => Some(ProtocolKind::PerDomain),
            _ => None,
        }
    }
}

fn embedding_table(cfg: &RunConfig) -> Result<EmbeddingTable> {
    match &cfg.vectors_path {
        Some(path) => EmbeddingTable::load_pretrained(
            std::path::Path::new(path),
            cfg.embedding_dim,
            cfg.hash_seed,
        ),
        None => EmbeddingTable::with_config(
            cfg.embedding_dim,
            cfg.bucket_count,
            cfg.ngram_min,
            cfg.ngram_max,
            cfg.hash_seed,
        ),
    }
}

fn contextual_provider(cfg: &RunConfig) -> Result<ContextualProvider> {
    match &cfg.contextual_path {
        Some(path) => ContextualProvider::load_file(std::path::Path::new(path)),
        None => Ok(ContextualProvider::fallback(embedding_table(cfg)?)),
    }
}

/// Provenance label of the provider the configuration selects (reports must
/// say which provider produced a Model 2 number).
pub fn provider_label(cfg: &RunConfig) -> Result<Option<String>> {
    Ok(match cfg.model {
        ModelKind::Model1 => None,
        ModelKind::Model2 => Some(contextual_provider(cfg)?.label().to_string()),
    })
}

/// Builds a fresh model of the configured kind and trains it on the given
/// splits.
pub fn build_and_train(
    dataset: &Dataset,
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &RunConfig,
    seed: u64,
) -> Result<(Model, TrainHistory)> {
    let train_cfg = cfg.train_config(seed);
    match cfg.model {
        ModelKind::Model1 => {
            let table = embedding_table(cfg)?;
            let mut vocab_idx = train_idx.to_vec();
            vocab_idx.extend_from_slice(val_idx);
            let vocab = dataset.vocabulary(&vocab_idx);
            let mut model = Model1::new(
                table,
                &vocab,
                cfg.model_dims(),
                cfg.topic_cap,
                cfg.body_cap,
                cfg.train_buckets,
                cfg.train_words,
                cfg.dropout_p,
                seed,
            )?;
            let history = train(&mut model, dataset, train_idx, val_idx, &train_cfg)?;
            Ok((Model::One(model), history))
        }
        ModelKind::Model2 => {
            let provider = contextual_provider(cfg)?;
            let mut model = Model2::new(provider, cfg.merge, cfg.dropout_p, seed)?;
            let history = train(&mut model, dataset, train_idx, val_idx, &train_cfg)?;
            Ok((Model::Two(model), history))
        }
    }
}

fn assert_no_leakage(
    dataset: &Dataset,
    train_idx: &[usize],
    val_idx: &[usize],
    test_idx: &[usize],
) -> Result<()> {
    let seen: std::collections::BTreeSet<&str> = train_idx
        .iter()
        .chain(val_idx)
        .map(|&i| dataset.examples[i].id.as_str())
        .collect();
    for &i in test_idx {
        if seen.contains(dataset.examples[i].id.as_str()) {
            return Err(Error::Data(format!(
                "test example {:?} appears in training or validation",
                dataset.examples[i].id
            )));
        }
    }
    Ok(())
}

fn eval_run<M: Classifier + ?Sized>(
    model: &M,
    dataset: &Dataset,
    test_idx: &[usize],
    seed: u64,
    label: String,
    sizes: (usize, usize),
    history: &TrainHistory,
) -> Result<RunResult> {
    let eval = evaluate(model, dataset, test_idx)?;
    Ok(RunResult {
        seed,
        label,
        train_size: sizes.0,
        val_size: sizes.1,
        test_size: test_idx.len(),
        accuracy: eval.accuracy,
        in_domain_accuracy: None,
        best_epoch: history.best_epoch,
        epochs_run: history.epochs.len(),
        misclassified_ids: misclassified_of(&eval.predictions),
        predictions: eval.predictions,
    })
}

fn dataset_name(ds: &Dataset) -> Result<String> {
    let kinds: std::collections::BTreeSet<_> =
        ds.examples.iter().map(|e| e.dataset).collect();
    match kinds.len() {
        0 => Err(Error::Data("empty dataset".into())),
        1 => Ok(kinds.into_iter().next().unwrap().as_str().to_string()),
        _ => Ok("mixed".to_string()),
    }
}

/// Trains and evaluates on a seeded stratified split of one dataset, once
/// per seed, and reports against the published multi-domain numbers.
pub fn run_multi_domain(dataset: &Dataset, cfg: &RunConfig, seeds: &[u64]) -> Result<ExperimentReport> {
    let name = dataset_name(dataset)?;
    let runs: Vec<RunResult> = seeds
        .par_iter()
        .map(|&seed| {
            let split = stratified_split(dataset, &cfg.split_plan(seed))?;
            assert_no_leakage(dataset, &split.train, &split.validation, &split.test)?;
            let (model, history) = build_and_train(dataset, &split.train, &split.validation, cfg, seed)?;
            eval_run(
                model.as_classifier(),
                dataset,
                &split.test,
                seed,
                format!("seed {seed}"),
                (split.train.len(), split.validation.len()),
                &history,
            )
        })
        .collect::<Result<_>>()?;
    ExperimentReport::assemble(
        ProtocolKind::MultiDomain.as_str(),
        cfg.model,
        name.clone(),
        None,
        provider_label(cfg)?,
        cfg.fingerprint(),
        cfg.canonical_lines(),
        seeds.to_vec(),
        runs,
        reference::rows_with_prefix(&format!("multi_domain.{name}")),
        vec!["leakage checked: test ids never occur in train or validation".into()],
    )
}

/// Trains on one dataset, tests on the whole other dataset (and on the
/// source's held-out split, so the in-domain drop is visible in the same
/// report).
pub fn run_cross_domain(
    source: &Dataset,
    target: &Dataset,
    cfg: &RunConfig,
    seeds: &[u64],
) -> Result<ExperimentReport> {
    let source_name = dataset_name(source)?;
    let target_name = dataset_name(target)?;
    let source_ids: std::collections::BTreeSet<&str> =
        source.examples.iter().map(|e| e.id.as_str()).collect();
    for e in &target.examples {
        if source_ids.contains(e.id.as_str()) {
            return Err(Error::Data(format!(
                "example id {:?} occurs in both datasets",
                e.id
            )));
        }
    }
    let target_idx: Vec<usize> = (0..target.len()).collect();
    let runs: Vec<RunResult> = seeds
        .par_iter()
        .map(|&seed| {
            let split = stratified_split(source, &cfg.split_plan(seed))?;
            assert_no_leakage(source, &split.train, &split.validation, &split.test)?;
            let (model, history) = build_and_train(source, &split.train, &split.validation, cfg, seed)?;
            let classifier = model.as_classifier();
            let in_domain = evaluate(classifier, source, &split.test)?;
            let mut run = eval_run(
                classifier,
                target,
                &target_idx,
                seed,
                format!("seed {seed}: {source_name} -> {target_name}"),
                (split.train.len(), split.validation.len()),
                &history,
            )?;
            run.in_domain_accuracy = Some(in_domain.accuracy);
            Ok(run)
        })
        .collect::<Result<_>>()?;
    let direction = format!("{source_name}_to_{target_name}");
    ExperimentReport::assemble(
        ProtocolKind::CrossDomain.as_str(),
        cfg.model,
        source_name,
        Some(target_name),
        provider_label(cfg)?,
        cfg.fingerprint(),
        cfg.canonical_lines(),
        seeds.to_vec(),
        runs,
        reference::rows_with_prefix(&format!("cross_domain.{direction}")),
        vec![
            "accuracy column is on the full target dataset; in_domain_accuracy is the source test split".into(),
            "dataset id overlap checked: none".into(),
        ],
    )
}

/// Six runs, one per held-out domain: train on the other five, test on the
/// held-out one.
pub fn run_leave_one_out(dataset: &Dataset, cfg: &RunConfig, seed: u64) -> Result<ExperimentReport> {
    let name = dataset_name(dataset)?;
    let runs: Vec<RunResult> = Domain::AMT_DOMAINS
        .par_iter()
        .map(|&held_out| {
            let (train_part, test_part) = dataset.domain_partition(held_out)?;
            // Carve validation from the five training domains; the plan's
            // test share goes back into training.
            let split = stratified_split(&train_part, &cfg.split_plan(seed))?;
            let mut train_idx = split.train.clone();
            train_idx.extend_from_slice(&split.test);
            train_idx.sort_unstable();
            let (model, history) =
                build_and_train(&train_part, &train_idx, &split.validation, cfg, seed)?;
            let test_idx: Vec<usize> = (0..test_part.len()).collect();
            // Domain partition guarantees disjoint ids; re-check anyway.
            let train_ids: std::collections::BTreeSet<&str> = train_part
                .examples
                .iter()
                .map(|e| e.id.as_str())
                .collect();
            if test_part.examples.iter().any(|e| train_ids.contains(e.id.as_str())) {
                return Err(Error::Data("held-out domain overlaps training ids".into()));
            }
            eval_run(
                model.as_classifier(),
                &test_part,
                &test_idx,
                seed,
                format!("held-out {}", held_out.as_str()),
                (train_idx.len(), split.validation.len()),
                &history,
            )
        })
        .collect::<Result<_>>()?;
    ExperimentReport::assemble(
        ProtocolKind::LeaveOneDomainOut.as_str(),
        cfg.model,
        name,
        None,
        provider_label(cfg)?,
        cfg.fingerprint(),
        cfg.canonical_lines(),
        vec![seed],
        runs,
        reference::rows_with_prefix("leave_one_domain_out."),
        vec!["leakage checked: held-out domain ids never occur in training".into()],
    )
}

/// Six runs training and testing inside a single domain, on a stratified
/// split of its examples.
pub fn run_per_domain(dataset: &Dataset, cfg: &RunConfig, seed: u64) -> Result<ExperimentReport> {
    let name = dataset_name(dataset)?;
    let runs: Vec<RunResult> = Domain::AMT_DOMAINS
        .par_iter()
        .map(|&domain| {
            let examples: Vec<_> = dataset
                .examples
                .iter()
                .filter(|e| e.domain == domain)
                .cloned()
                .collect();
            if examples.is_empty() {
                return Err(Error::Data(format!(
                    "domain {} absent from dataset",
                    domain.as_str()
                )));
            }
            let part = Dataset::new(examples, format!("{name}:{}", domain.as_str()));
            let split = stratified_split(&part, &cfg.split_plan(seed))?;
            assert_no_leakage(&part, &split.train, &split.validation, &split.test)?;
            let (model, history) =
                build_and_train(&part, &split.train, &split.validation, cfg, seed)?;
            // Every example in this run belongs to one domain by
            // construction.
            debug_assert!(part.examples.iter().all(|e| e.domain == domain));
            eval_run(
                model.as_classifier(),
                &part,
                &split.test,
                seed,
                format!("domain {}", domain.as_str()),
                (split.train.len(), split.validation.len()),
                &history,
            )
        })
        .collect::<Result<_>>()?;
    let quantization: Vec<String> = runs
        .iter()
        .map(|r| {
            format!(
                "{}: test set of {} examples quantizes accuracy to steps of {:.2} points",
                r.label,
                r.test_size,
                100.0 / r.test_size as f64
            )
        })
        .collect();
    ExperimentReport::assemble(
        ProtocolKind::PerDomain.as_str(),
        cfg.model,
        name,
        None,
        provider_label(cfg)?,
        cfg.fingerprint(),
        cfg.canonical_lines(),
        vec![seed],
        runs,
        reference::rows_with_prefix("per_domain."),
        quantization,
    )
}
