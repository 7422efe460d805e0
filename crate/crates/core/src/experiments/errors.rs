use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Domain, Label};
use crate::error::{Error, Result};
use crate::experiments::report::ExperimentReport;

/// One misclassified instance with its raw text, for inspection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorCase {
    pub id: String,
    pub domain: Domain,
    pub gold: Label,
    pub predicted: Label,
    /// Probability the model put on its wrong answer.
    pub confidence: f32,
    pub raw_topic: String,
    pub raw_body: String,
}

/// Per-domain misclassification counts plus the highest-confidence errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorDossier {
    pub total_errors: usize,
    pub per_domain: Vec<(Domain, usize)>,
    pub top: Vec<ErrorCase>,
}

impl ErrorDossier {
    pub fn render(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "misclassified instances: {}", self.total_errors);
        for (domain, count) in &self.per_domain {
            let _ = writeln!(out, "  {:<14} {}", domain.as_str(), count);
        }
        for case in &self.top {
            let _ = writeln!(
                out,
                "-- {} [{}] gold {} predicted {} (confidence {:.3})\n   topic: {}",
                case.id,
                case.domain.as_str(),
                case.gold.as_str(),
                case.predicted.as_str(),
                case.confidence,
                case.raw_topic
            );
        }
        out
    }
}

/// Collects misclassifications across all runs of a report: event counts per
/// domain, and the `k` distinct examples the model got wrong with the most
/// confidence, with their raw text attached.
pub fn extract_errors(report: &ExperimentReport, dataset: &Dataset, k: usize) -> Result<ErrorDossier> {
    let by_id: std::collections::BTreeMap<&str, &crate::corpus::NewsExample> = dataset
        .examples
        .iter()
        .map(|e| (e.id.as_str(), e))
        .collect();
    let mut per_domain: std::collections::BTreeMap<Domain, usize> = Default::default();
    let mut best: std::collections::BTreeMap<&str, ErrorCase> = Default::default();
    let mut total = 0usize;
    for run in &report.runs {
        for p in &run.predictions {
            if p.correct() {
                continue;
            }
            total += 1;
            *per_domain.entry(p.domain).or_insert(0) += 1;
            let example = by_id.get(p.id.as_str()).ok_or_else(|| {
                Error::Lookup(format!(
                    "report references example {:?} absent from the dataset",
                    p.id
                ))
            })?;
            let case = ErrorCase {
                id: p.id.clone(),
                domain: p.domain,
                gold: p.gold,
                predicted: p.predicted,
                confidence: p.confidence(),
                raw_topic: example.raw_topic.clone(),
                raw_body: example.raw_body.clone(),
            };
            best.entry(example.id.as_str())
                .and_modify(|existing| {
                    if case.confidence > existing.confidence {
                        *existing = case.clone();
                    }
                })
                .or_insert(case);
        }
    }
    let mut top: Vec<ErrorCase> = best.into_values().collect();
    top.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap()
            .then_with(|| a.id.cmp(&b.id))
    });
    top.truncate(k);
    Ok(ErrorDossier {
        total_errors: total,
        per_domain: per_domain.into_iter().collect(),
        top,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generate_mini;
    use crate::experiments::report::{misclassified_of, RunResult};
    use crate::models::{ModelKind, PredRecord};

    fn fake_report(dataset: &Dataset, wrong: &dyn Fn(usize) -> bool) -> ExperimentReport {
        let predictions: Vec<PredRecord> = dataset
            .examples
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let predicted = if wrong(i) {
                    match e.label {
                        Label::Fake => Label::Legit,
                        Label::Legit => Label::Fake,
                    }
                } else {
                    e.label
                };
                PredRecord {
                    id: e.id.clone(),
                    domain: e.domain,
                    gold: e.label,
                    predicted,
                    prob_fake: if predicted == Label::Fake { 0.9 } else { 0.1 },
                    prob_legit: if predicted == Label::Legit { 0.9 } else { 0.1 },
                }
            })
            .collect();
        let correct = predictions.iter().filter(|p| p.correct()).count();
        let run = RunResult {
            seed: 0,
            label: "test".into(),
            train_size: 0,
            val_size: 0,
            test_size: predictions.len(),
            accuracy: correct as f64 / predictions.len() as f64,
            in_domain_accuracy: None,
            best_epoch: 0,
            epochs_run: 1,
            misclassified_ids: misclassified_of(&predictions),
            predictions,
        };
        ExperimentReport::assemble(
            "multi_domain",
            ModelKind::Model1,
            "fakenews_amt".into(),
            None,
            None,
            "0".repeat(16),
            vec![],
            vec![0],
            vec![run],
            vec![],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn perfect_model_gives_empty_dossier() {
        let ds = generate_mini(31);
        let report = fake_report(&ds, &|_| false);
        let dossier = extract_errors(&report, &ds, 5).unwrap();
        assert_eq!(dossier.total_errors, 0);
        assert!(dossier.top.is_empty());
    }

    #[test]
    fn always_wrong_model_fills_dossier() {
        let ds = generate_mini(32);
        let report = fake_report(&ds, &|_| true);
        let dossier = extract_errors(&report, &ds, 7).unwrap();
        assert_eq!(dossier.total_errors, ds.len());
        assert_eq!(dossier.top.len(), 7.min(ds.len()));
        assert!(!dossier.top[0].raw_topic.is_empty());
    }

    #[test]
    fn per_domain_counts_sum_to_total() {
        let ds = generate_mini(33);
        let report = fake_report(&ds, &|i| i % 3 == 0);
        let dossier = extract_errors(&report, &ds, 3).unwrap();
        let sum: usize = dossier.per_domain.iter().map(|(_, c)| c).sum();
        assert_eq!(sum, dossier.total_errors);
        assert!(dossier.total_errors > 0);
    }
}
