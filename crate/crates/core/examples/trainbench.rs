//! Quick timing/accuracy probe: trains each model on the synthetic corpus
//! the way the multi-domain protocol does, printing per-epoch progress.

use std::time::Instant;

use fnd_core::config::RunConfig;
use fnd_core::corpus::{generate_fakenews_amt, stratified_split, DEFAULT_FIXTURE_SEED};
use fnd_core::experiments::build_and_train;
use fnd_core::models::{evaluate, ModelKind};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let model = if args.iter().any(|a| a == "model2") {
        ModelKind::Model2
    } else {
        ModelKind::Model1
    };
    let seed: u64 = args
        .iter()
        .position(|a| a == "--seed")
        .and_then(|i| args.get(i + 1))
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);

    let ds = generate_fakenews_amt(DEFAULT_FIXTURE_SEED);
    let mut cfg = RunConfig::default();
    cfg.model = model;
    if let Some(p) = args
        .iter()
        .position(|a| a == "--patience")
        .and_then(|i| args.get(i + 1))
        .and_then(|s| s.parse().ok())
    {
        cfg.patience = p;
    }
    if args.iter().any(|a| a == "--no-dropout") {
        cfg.dropout_enabled = false;
    }
    if let Some(lr) = args
        .iter()
        .position(|a| a == "--lr")
        .and_then(|i| args.get(i + 1))
        .and_then(|s| s.parse().ok())
    {
        cfg.learning_rate = lr;
    }
    let split = stratified_split(&ds, &cfg.split_plan(seed)).unwrap();
    eprintln!(
        "dataset {} examples, split {}/{}/{}",
        ds.len(),
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    let t0 = Instant::now();
    let (model, history) =
        build_and_train(&ds, &split.train, &split.validation, &cfg, seed).unwrap();
    let train_time = t0.elapsed();
    for e in &history.epochs {
        eprintln!(
            "epoch {:>2} loss {:.4} val {:.4}",
            e.epoch, e.mean_train_loss, e.val_accuracy
        );
    }
    let eval = evaluate(model.as_classifier(), &ds, &split.test).unwrap();
    eprintln!(
        "seed {seed}: {} epochs in {:.1?} ({:.1?}/epoch), test accuracy {:.4}",
        history.epochs.len(),
        train_time,
        train_time / history.epochs.len() as u32,
        eval.accuracy
    );
}
