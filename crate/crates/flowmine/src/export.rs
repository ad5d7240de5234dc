//! Stable-format artifact writers: DOT renderings of the causality graph
//! and mined flows, the structured-text model export, and its parser (used
//! by the diff subcommand).

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::causality::CausalityGraph;
use crate::error::{Error, Result};
use crate::mining::{FlowModel, Path};
use crate::model::{MessageDictionary, MsgId};

fn node_label(dict: &MessageDictionary, id: MsgId) -> String {
    match dict.message(id) {
        Some(m) => format!("{id}: {}", m.quadruple()),
        None => format!("{id}"),
    }
}

/// Renders the causality graph as a DOT digraph. Node labels are
/// `id: src:dest:cmd:type`; edge labels carry forward confidence, backward
/// confidence, and support to three decimals.
pub fn graph_to_dot(graph: &CausalityGraph, dict: &MessageDictionary) -> String {
    let mut out = String::from("digraph causality {\n  rankdir=LR;\n");
    for &n in &graph.nodes {
        let mut attrs = format!("label=\"{}\"", node_label(dict, n));
        if graph.roots.contains(&n) {
            attrs.push_str(", shape=box");
        } else if graph.terminals.contains(&n) {
            attrs.push_str(", shape=doublecircle");
        }
        let _ = writeln!(out, "  n{n} [{attrs}];");
    }
    for &(h, t) in &graph.edges {
        let f = graph.forward_conf.get(&(h, t)).copied().unwrap_or(0.0);
        let b = graph.backward_conf.get(&(h, t)).copied().unwrap_or(0.0);
        let s = graph.edge_support.get(&(h, t)).copied().unwrap_or(0);
        let _ = writeln!(
            out,
            "  n{h} -> n{t} [label=\"f={f:.3}, b={b:.3}, s={s:.3}\"];"
        );
    }
    out.push_str("}\n");
    out
}

/// Renders each mined path as its own DOT digraph (one flow per digraph),
/// concatenated into a single document.
pub fn model_to_dot(model: &FlowModel, dict: &MessageDictionary) -> String {
    let mut out = String::new();
    for (i, path) in model.paths.iter().enumerate() {
        let _ = writeln!(out, "digraph flow_{i} {{\n  rankdir=LR;");
        let mut seen: BTreeSet<MsgId> = BTreeSet::new();
        for &m in &path.sequence {
            if seen.insert(m) {
                let _ = writeln!(out, "  n{m} [label=\"{}\"];", node_label(dict, m));
            }
        }
        for w in path.sequence.windows(2) {
            let _ = writeln!(out, "  n{} -> n{};", w[0], w[1]);
        }
        out.push_str("}\n");
    }
    out
}

/// Serializes the model in the structured-text format consumed by
/// [`parse_model_export`]:
///
/// ```text
/// model-size: 3
/// acceptance-ratio: 0.928571
/// path: 1 5 6 2
///   quadruples: (cpu0:dcache0:rd:req) ...
///   scores: forward=0.500000 backward=0.500000 essential=3 final=0.850000
/// ```
pub fn serialize_model(
    model: &FlowModel,
    dict: &MessageDictionary,
    acceptance_ratio: f64,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model-size: {}", model.size());
    let _ = writeln!(out, "acceptance-ratio: {acceptance_ratio:.6}");
    for path in &model.paths {
        let ids: Vec<String> = path.sequence.iter().map(|m| m.to_string()).collect();
        let _ = writeln!(out, "path: {}", ids.join(" "));
        let quads: Vec<String> = path
            .sequence
            .iter()
            .map(|&m| match dict.message(m) {
                Some(msg) => format!("({})", msg.quadruple()),
                None => "(?)".to_string(),
            })
            .collect();
        let _ = writeln!(out, "  quadruples: {}", quads.join(" "));
        let _ = writeln!(
            out,
            "  scores: forward={:.6} backward={:.6} essential={} final={:.6}",
            path.forward_score, path.backward_score, path.essential_count, path.score
        );
    }
    out
}

/// A model export read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelExport {
    pub model: FlowModel,
    pub acceptance_ratio: f64,
}

/// Parses the [`serialize_model`] format. Quadruple and score lines are
/// optional; only the id sequences and the header fields are load-bearing.
pub fn parse_model_export(text: &str) -> Result<ModelExport> {
    let mut size: Option<usize> = None;
    let mut acceptance_ratio: Option<f64> = None;
    let mut model = FlowModel::default();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::Malformed {
            line: lineno,
            reason,
        };
        if let Some(rest) = line.strip_prefix("model-size:") {
            size = Some(
                rest.trim()
                    .parse()
                    .map_err(|_| malformed(format!("invalid model size `{}`", rest.trim())))?,
            );
        } else if let Some(rest) = line.strip_prefix("acceptance-ratio:") {
            acceptance_ratio = Some(
                rest.trim()
                    .parse()
                    .map_err(|_| malformed(format!("invalid ratio `{}`", rest.trim())))?,
            );
        } else if let Some(rest) = line.strip_prefix("path:") {
            let mut sequence = Vec::new();
            for tok in rest.split_whitespace() {
                let id: u32 = tok
                    .parse()
                    .map_err(|_| malformed(format!("invalid message id `{tok}`")))?;
                sequence.push(MsgId(id));
            }
            if sequence.is_empty() {
                return Err(malformed("empty path".into()));
            }
            model.push(Path {
                sequence,
                forward_score: 0.0,
                backward_score: 0.0,
                essential_count: 0,
                score: 0.0,
            });
        } else if line.starts_with("quadruples:") || line.starts_with("scores:") {
            // descriptive payload, ignored on read-back
        } else {
            return Err(malformed(format!("unrecognized line `{line}`")));
        }
    }

    let size = size.ok_or(Error::Malformed {
        line: 1,
        reason: "missing model-size header".into(),
    })?;
    if size != model.size() {
        return Err(Error::Malformed {
            line: 1,
            reason: format!("header says {size} paths, found {}", model.size()),
        });
    }
    Ok(ModelExport {
        model,
        acceptance_ratio: acceptance_ratio.unwrap_or(0.0),
    })
}

/// Difference between two model exports.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDiff {
    pub only_in_a: Vec<Vec<MsgId>>,
    pub only_in_b: Vec<Vec<MsgId>>,
    pub ar_a: f64,
    pub ar_b: f64,
    /// Ids appearing in paths present on one side only.
    pub implicated: BTreeSet<MsgId>,
}

impl ModelDiff {
    pub fn is_empty(&self) -> bool {
        self.only_in_a.is_empty() && self.only_in_b.is_empty()
    }
}

pub fn diff_models(a: &ModelExport, b: &ModelExport) -> ModelDiff {
    let seqs_a: BTreeSet<Vec<MsgId>> = a.model.sequences().map(<[_]>::to_vec).collect();
    let seqs_b: BTreeSet<Vec<MsgId>> = b.model.sequences().map(<[_]>::to_vec).collect();
    let only_in_a: Vec<Vec<MsgId>> = seqs_a.difference(&seqs_b).cloned().collect();
    let only_in_b: Vec<Vec<MsgId>> = seqs_b.difference(&seqs_a).cloned().collect();
    let implicated = only_in_a
        .iter()
        .chain(&only_in_b)
        .flatten()
        .copied()
        .collect();
    ModelDiff {
        only_in_a,
        only_in_b,
        ar_a: a.acceptance_ratio,
        ar_b: b.acceptance_ratio,
        implicated,
    }
}

/// Human-readable diff report, stable for golden tests.
pub fn render_diff(diff: &ModelDiff) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "acceptance-ratio: a={:.6} b={:.6}",
        diff.ar_a, diff.ar_b
    );
    if diff.is_empty() {
        out.push_str("models are identical\n");
        return out;
    }
    let section = |out: &mut String, title: &str, seqs: &[Vec<MsgId>]| {
        let _ = writeln!(out, "{title}: {}", seqs.len());
        for s in seqs {
            let ids: Vec<String> = s.iter().map(|m| m.to_string()).collect();
            let _ = writeln!(out, "  path: {}", ids.join(" "));
        }
    };
    section(&mut out, "only-in-a", &diff.only_in_a);
    section(&mut out, "only-in-b", &diff.only_in_b);
    let ids: Vec<String> = diff.implicated.iter().map(|m| m.to_string()).collect();
    let _ = writeln!(out, "implicated-ids: {}", ids.join(" "));
    out
}
