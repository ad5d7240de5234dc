//! Run reports: the summary emitted after a mining run, in stable text or
//! JSON form.
//!
//! Wall-clock runtime is tracked but deliberately kept out of both rendered
//! forms so that repeated runs with the same inputs produce byte-identical
//! artifacts; the CLI prints runtime to stderr instead.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::mining::MineOutcome;

/// Summary of one mining run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub model_size: usize,
    pub acceptance_ratio: f64,
    pub base_acceptance_ratio: f64,
    pub iterations: usize,
    pub below_threshold: bool,
    /// Completed flow instances observed during the final evaluation, keyed
    /// by sequence length.
    pub length_histogram: BTreeMap<usize, u64>,
    /// Excluded from rendered output to keep reports reproducible.
    #[serde(skip)]
    pub runtime_seconds: f64,
}

impl RunReport {
    pub fn from_outcome(outcome: &MineOutcome, runtime_seconds: f64) -> RunReport {
        RunReport {
            model_size: outcome.model.size(),
            acceptance_ratio: outcome.eval.acceptance_ratio,
            base_acceptance_ratio: outcome.base_ar,
            iterations: outcome.iterations,
            below_threshold: outcome.below_threshold,
            length_histogram: outcome.eval.completed_lengths.clone(),
            runtime_seconds,
        }
    }

    /// Stable text rendering.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model-size: {}", self.model_size);
        let _ = writeln!(out, "acceptance-ratio: {:.6}", self.acceptance_ratio);
        let _ = writeln!(
            out,
            "base-acceptance-ratio: {:.6}",
            self.base_acceptance_ratio
        );
        let _ = writeln!(out, "iterations: {}", self.iterations);
        let _ = writeln!(out, "below-threshold: {}", self.below_threshold);
        out.push_str("length-histogram:\n");
        for (len, count) in &self.length_histogram {
            let _ = writeln!(out, "  {len}: {count}");
        }
        out
    }

    /// Stable JSON rendering (runtime omitted by serde skip).
    pub fn render_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
