use serde::{Deserialize, Serialize};

use crate::corpus::{Domain, Label};
use crate::error::{Error, Result};
use crate::experiments::reference::ReferenceRow;
use crate::models::{ModelKind, PredRecord};

/// One training/evaluation run inside a protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    /// What distinguishes this run: "seed 3", "held-out education", a
    /// transfer direction, and so on.
    pub label: String,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub accuracy: f64,
    /// In-domain test accuracy of the same trained model, for runs whose
    /// headline accuracy is measured somewhere else (cross-dataset runs).
    pub in_domain_accuracy: Option<f64>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub predictions: Vec<PredRecord>,
    pub misclassified_ids: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainRow {
    pub domain: Domain,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    /// Accuracy over all test predictions of all runs pooled together; the
    /// per-domain rows weight-average exactly to this.
    pub pooled_accuracy: f64,
}

/// Machine-readable outcome of one protocol execution. Serialization is
/// byte-deterministic for a fixed seed list; wall-clock information lives
/// outside this structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub protocol: String,
    pub model: ModelKind,
    pub dataset: String,
    pub secondary_dataset: Option<String>,
    pub provider: Option<String>,
    pub config_fingerprint: String,
    pub config_settings: Vec<String>,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunResult>,
    pub summary: Summary,
    pub per_domain: Vec<DomainRow>,
    /// Pooled confusion counts indexed `[gold][predicted]` with fake = 0.
    pub confusion: [[usize; 2]; 2],
    pub references: Vec<ReferenceRow>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    /// Derives summary, per-domain, and confusion blocks from the runs.
    pub fn assemble(
        protocol: &str,
        model: ModelKind,
        dataset: String,
        secondary_dataset: Option<String>,
        provider: Option<String>,
        fingerprint: String,
        settings: Vec<String>,
        seeds: Vec<u64>,
        runs: Vec<RunResult>,
        references: Vec<ReferenceRow>,
        notes: Vec<String>,
    ) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Usage("report needs at least one run".into()));
        }
        let n = runs.len() as f64;
        let mean = runs.iter().map(|r| r.accuracy).sum::<f64>() / n;
        let var = runs
            .iter()
            .map(|r| (r.accuracy - mean).powi(2))
            .sum::<f64>()
            / n;
        let mut domain_counts: std::collections::BTreeMap<Domain, (usize, usize)> =
            Default::default();
        let mut confusion = [[0usize; 2]; 2];
        let mut correct = 0usize;
        let mut total = 0usize;
        for run in &runs {
            for p in &run.predictions {
                let slot = domain_counts.entry(p.domain).or_insert((0, 0));
                slot.1 += 1;
                if p.correct() {
                    slot.0 += 1;
                    correct += 1;
                }
                total += 1;
                confusion[p.gold.class_index()][p.predicted.class_index()] += 1;
            }
        }
        let per_domain = domain_counts
            .into_iter()
            .map(|(domain, (c, t))| DomainRow {
                domain,
                correct: c,
                total: t,
                accuracy: c as f64 / t as f64,
            })
            .collect();
        Ok(ExperimentReport {
            protocol: protocol.to_string(),
            model,
            dataset,
            secondary_dataset,
            provider,
            config_fingerprint: fingerprint,
            config_settings: settings,
            seeds,
            runs,
            summary: Summary {
                mean_accuracy: mean,
                std_accuracy: var.sqrt(),
                pooled_accuracy: correct as f64 / total as f64,
            },
            per_domain,
            confusion,
            references,
            notes,
        })
    }

    /// Weighted average of the per-domain accuracies; equals the pooled
    /// accuracy up to floating-point rounding.
    pub fn weighted_domain_accuracy(&self) -> f64 {
        let total: usize = self.per_domain.iter().map(|d| d.total).sum();
        self.per_domain
            .iter()
            .map(|d| d.accuracy * d.total as f64)
            .sum::<f64>()
            / total as f64
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Data(format!("report serialization failed: {e}")))
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    /// Human-readable summary table.
    pub fn render(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "protocol {} | model {} | dataset {}{}",
            self.protocol,
            self.model.as_str(),
            self.dataset,
            self.secondary_dataset
                .as_deref()
                .map(|d| format!(" -> {d}"))
                .unwrap_or_default()
        );
        if let Some(p) = &self.provider {
            let _ = writeln!(out, "provider: {p}");
        }
        let _ = writeln!(out, "config fingerprint: {}", self.config_fingerprint);
        let _ = writeln!(out, "{:<28} {:>9} {:>9}", "run", "accuracy", "test_n");
        for r in &self.runs {
            let _ = writeln!(
                out,
                "{:<28} {:>8.2}% {:>9}",
                r.label,
                100.0 * r.accuracy,
                r.test_size
            );
        }
        let _ = writeln!(
            out,
            "mean {:.2}% +/- {:.2}% (pooled {:.2}%)",
            100.0 * self.summary.mean_accuracy,
            100.0 * self.summary.std_accuracy,
            100.0 * self.summary.pooled_accuracy
        );
        if self.per_domain.len() > 1 {
            for d in &self.per_domain {
                let _ = writeln!(
                    out,
                    "  domain {:<14} {:>6.2}% ({}/{})",
                    d.domain.as_str(),
                    100.0 * d.accuracy,
                    d.correct,
                    d.total
                );
            }
        }
        let _ = writeln!(out, "reference values (percent):");
        for r in &self.references {
            let _ = writeln!(out, "  {:<46} {:>6.2}  {}", r.key, r.percent, r.description);
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

/// Misclassification counts must partition by domain, predictions must be
/// marked, and ids must match; used by tests and protocol assembly.
pub fn misclassified_of(predictions: &[PredRecord]) -> Vec<String> {
    predictions
        .iter()
        .filter(|p| !p.correct())
        .map(|p| p.id.clone())
        .collect()
}

/// Confusion helper for tests.
pub fn confusion_totals(report: &ExperimentReport) -> (usize, usize) {
    let correct = report.confusion[Label::Fake.class_index()][Label::Fake.class_index()]
        + report.confusion[Label::Legit.class_index()][Label::Legit.class_index()];
    let total: usize = report.confusion.iter().flatten().sum();
    (correct, total)
}
