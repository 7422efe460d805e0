use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, NewsExample};
use crate::error::{Error, Result};
use crate::models::Prediction;

/// Tokens of one field with their aligned attention weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttentionTrace {
    pub example_id: String,
    pub field: String,
    pub tokens: Vec<String>,
    pub weights: Vec<f32>,
    pub predicted: Label,
    pub gold: Label,
}

impl AttentionTrace {
    pub fn validate(&self) -> Result<()> {
        if self.tokens.len() != self.weights.len() {
            return Err(Error::Data(format!(
                "attention trace integrity: {} tokens but {} weights for {} {}",
                self.tokens.len(),
                self.weights.len(),
                self.example_id,
                self.field
            )));
        }
        Ok(())
    }
}

/// Extracts the topic and body traces of a Model 1 prediction.
pub fn traces_from_prediction(
    example: &NewsExample,
    prediction: &Prediction,
) -> Result<Vec<AttentionTrace>> {
    let mut traces = Vec::new();
    for (field, attention) in [
        ("topic", &prediction.topic_attention),
        ("body", &prediction.body_attention),
    ] {
        let Some((tokens, weights)) = attention else {
            return Err(Error::Usage(format!(
                "prediction for {:?} carries no {field} attention trace (only the recurrent model produces traces)",
                example.id
            )));
        };
        let trace = AttentionTrace {
            example_id: example.id.clone(),
            field: field.to_string(),
            tokens: tokens.clone(),
            weights: weights.clone(),
            predicted: prediction.label,
            gold: example.label,
        };
        trace.validate()?;
        traces.push(trace);
    }
    Ok(traces)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapMode {
    Html,
    Text,
}

impl HeatmapMode {
    pub fn parse(s: &str) -> Option<HeatmapMode> {
        match s {
            "html" => Some(HeatmapMode::Html),
            "text" => Some(HeatmapMode::Text),
            _ => None,
        }
    }
}

fn escape_html(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Self-contained HTML document: each token's background opacity is its
/// weight scaled by the trace's maximum weight.
pub fn render_html(traces: &[AttentionTrace]) -> Result<String> {
    let mut out = String::from(
        "<!doctype html>\n<html><head><meta charset=\"utf-8\">\n\
         <title>word-level attention</title>\n<style>\n\
         body { font-family: sans-serif; margin: 2em; }\n\
         .tokens { line-height: 2.1; max-width: 60em; }\n\
         .tok { padding: 2px 4px; margin: 1px; border-radius: 3px; }\n\
         h2 { margin-bottom: 0.2em; }\n\
         .meta { color: #555; margin-bottom: 0.8em; }\n\
         </style></head><body>\n<h1>word-level attention</h1>\n",
    );
    for trace in traces {
        trace.validate()?;
        let max = trace.weights.iter().cloned().fold(0.0f32, f32::max);
        let _ = writeln!(
            out,
            "<h2>{} &mdash; {}</h2>\n<div class=\"meta\">predicted {}, gold {}</div>\n<div class=\"tokens\">",
            escape_html(&trace.example_id),
            escape_html(&trace.field),
            trace.predicted.as_str(),
            trace.gold.as_str()
        );
        for (tok, &w) in trace.tokens.iter().zip(&trace.weights) {
            let opacity = if max > 0.0 { w / max } else { 0.0 };
            let _ = write!(
                out,
                "<span class=\"tok\" style=\"background: rgba(214,69,49,{opacity:.3})\" title=\"{w:.4}\">{}</span> ",
                escape_html(tok)
            );
        }
        out.push_str("\n</div>\n");
    }
    out.push_str("</body></html>\n");
    Ok(out)
}

const SHADE_LEVELS: usize = 5;

fn shade_bucket(weight: f32, max: f32) -> usize {
    if max <= 0.0 {
        return 0;
    }
    let ratio = (weight / max).clamp(0.0, 1.0);
    // Five buckets: [0, 0.2) .. [0.8, 1.0].
    ((ratio * SHADE_LEVELS as f32) as usize).min(SHADE_LEVELS - 1)
}

/// Plain-text rendering with five shading buckets per token.
pub fn render_text(traces: &[AttentionTrace]) -> Result<String> {
    let mut out = String::new();
    for trace in traces {
        trace.validate()?;
        let max = trace.weights.iter().cloned().fold(0.0f32, f32::max);
        let _ = writeln!(
            out,
            "== {} / {} (predicted {}, gold {})",
            trace.example_id,
            trace.field,
            trace.predicted.as_str(),
            trace.gold.as_str()
        );
        for (tok, &w) in trace.tokens.iter().zip(&trace.weights) {
            let level = shade_bucket(w, max);
            let _ = writeln!(out, "[{:<4}] {:>8.4}  {}", "#".repeat(level), w, tok);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_heatmap(traces: &[AttentionTrace], path: &Path, mode: HeatmapMode) -> Result<()> {
    let doc = match mode {
        HeatmapMode::Html => render_html(traces)?,
        HeatmapMode::Text => render_text(traces)?,
    };
    std::fs::write(path, doc)?;
    Ok(())
}
