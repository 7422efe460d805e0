//! The four evaluation protocols, their reports, attention heatmap export,
//! and misclassification extraction.

mod errors;
mod heatmap;
mod protocols;
pub mod reference;
mod report;

pub use errors::{extract_errors, ErrorCase, ErrorDossier};
pub use heatmap::{
    render_html, render_text, traces_from_prediction, write_heatmap, AttentionTrace, HeatmapMode,
};
pub use protocols::{
    build_and_train, provider_label, run_cross_domain, run_leave_one_out, run_multi_domain,
    run_per_domain, ProtocolKind,
};
pub use report::{confusion_totals, misclassified_of, DomainRow, ExperimentReport, RunResult, Summary};
