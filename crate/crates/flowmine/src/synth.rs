//! Synthetic trace generation: seeded interleaving of ground-truth flow
//! executions, with optional message dropping for fault-injection
//! experiments. Generation is single-threaded; determinism outranks speed
//! at this scale.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::causality::Edge;
use crate::error::{Error, Result};
use crate::essential::EssentialFlow;
use crate::mining::{evaluate, FlowModel};
use crate::model::{
    parse_message_definitions, MessageDictionary, MsgId, Trace, TraceSet,
};

/// A ground-truth flow: a rooted DAG whose maximal paths end at terminals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSpec {
    pub name: String,
    pub edges: BTreeSet<Edge>,
    pub initial: MsgId,
    pub terminals: BTreeSet<MsgId>,
}

impl FlowSpec {
    pub fn nodes(&self) -> BTreeSet<MsgId> {
        self.edges.iter().flat_map(|&(h, t)| [h, t]).collect()
    }

    /// All root-to-terminal paths, in lexicographic order.
    pub fn paths(&self) -> Vec<Vec<MsgId>> {
        let mut out = Vec::new();
        let mut prefix = vec![self.initial];
        self.walk(&mut prefix, &mut out);
        out.sort();
        out
    }

    fn walk(&self, prefix: &mut Vec<MsgId>, out: &mut Vec<Vec<MsgId>>) {
        let last = *prefix.last().unwrap();
        if self.terminals.contains(&last) {
            out.push(prefix.clone());
            return;
        }
        for &(h, t) in self
            .edges
            .range((last, MsgId(0))..=(last, MsgId(u32::MAX)))
        {
            debug_assert_eq!(h, last);
            prefix.push(t);
            self.walk(prefix, out);
            prefix.pop();
        }
    }
}

/// Parameters for one generation run.
#[derive(Debug, Clone)]
pub struct GenerationConfig {
    pub flows: Vec<FlowSpec>,
    pub instances_per_flow: usize,
    pub interleave_seed: u64,
    pub max_concurrent: usize,
    /// `(message id, probability)`: each emission of the id is dropped with
    /// the given probability.
    pub drop_rule: Option<(MsgId, f64)>,
    /// Traces to emit; every trace schedules `instances_per_flow` executions
    /// of each flow.
    pub num_traces: usize,
}

impl GenerationConfig {
    pub fn new(flows: Vec<FlowSpec>, instances_per_flow: usize, seed: u64) -> Self {
        GenerationConfig {
            flows,
            instances_per_flow,
            interleave_seed: seed,
            max_concurrent: 8,
            drop_rule: None,
            num_traces: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.flows.is_empty() {
            return Err(Error::InvalidParameter("no flows to generate from".into()));
        }
        if self.instances_per_flow == 0 || self.max_concurrent == 0 || self.num_traces == 0 {
            return Err(Error::InvalidParameter(
                "instance, concurrency, and trace counts must be at least 1".into(),
            ));
        }
        if let Some((_, p)) = self.drop_rule {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "drop probability must lie in [0,1], got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Interleaves seeded executions of the configured flows.
///
/// Each execution walks one randomly chosen root-to-terminal path of its
/// flow. The scheduler keeps up to `max_concurrent` executions live and
/// repeatedly emits the next message of a uniformly chosen one. The ground
/// truth is the model of all root-to-terminal paths of all flows. The same
/// config always yields byte-identical output.
pub fn generate(config: &GenerationConfig) -> Result<(TraceSet, FlowModel)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.interleave_seed);
    let flow_paths: Vec<Vec<Vec<MsgId>>> = config.flows.iter().map(FlowSpec::paths).collect();

    let mut traces = Vec::with_capacity(config.num_traces);
    for _ in 0..config.num_traces {
        // pick a concrete path for every scheduled execution
        let mut pending: Vec<Vec<MsgId>> = Vec::new();
        for paths in &flow_paths {
            for _ in 0..config.instances_per_flow {
                let pick = rng.gen_range(0..paths.len());
                pending.push(paths[pick].clone());
            }
        }
        pending.shuffle(&mut rng);
        pending.reverse(); // pop from the back admits in shuffled order

        let mut live: Vec<(Vec<MsgId>, usize)> = Vec::new();
        let mut events = Vec::new();
        while !pending.is_empty() || !live.is_empty() {
            while live.len() < config.max_concurrent {
                match pending.pop() {
                    Some(path) => live.push((path, 0)),
                    None => break,
                }
            }
            let idx = rng.gen_range(0..live.len());
            let (path, cursor) = &mut live[idx];
            let msg = path[*cursor];
            *cursor += 1;
            let dropped = match config.drop_rule {
                Some((id, p)) if id == msg => rng.gen::<f64>() < p,
                _ => false,
            };
            if !dropped {
                events.push(msg);
            }
            if *cursor == path.len() {
                live.swap_remove(idx);
            }
        }
        traces.push(Trace::new(events));
    }

    let mut sequences = Vec::new();
    for paths in &flow_paths {
        sequences.extend(paths.iter().cloned());
    }
    Ok((TraceSet::new(traces), FlowModel::from_sequences(sequences)))
}

/// Closed-loop oracle: acceptance ratio of the ground-truth model over the
/// generated traces. Expected to be exactly 1.0 for drop-free generation.
pub fn project_ground_truth_ar(
    traces: &TraceSet,
    ground_truth: &FlowModel,
    dict: &MessageDictionary,
) -> Result<f64> {
    if traces.traces.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    let no_emf: Option<&[EssentialFlow]> = None;
    Ok(evaluate(traces, dict, ground_truth, no_emf).acceptance_ratio)
}

/// Parses a flow file: message definitions and `initial`/`terminal`
/// directives in the message-definition syntax, plus named flow blocks:
///
/// ```text
/// flow cpu0_rd
/// 1 -> 2
/// 1 -> 5
/// end
/// ```
pub fn parse_flow_file(text: &str) -> Result<(MessageDictionary, Vec<FlowSpec>)> {
    let mut dict_lines = String::new();
    let mut flows: Vec<(String, Vec<(usize, String)>)> = Vec::new();
    let mut current: Option<(String, Vec<(usize, String)>)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix("flow ") {
            if current.is_some() {
                return Err(Error::Malformed {
                    line: lineno,
                    reason: "nested flow block".into(),
                });
            }
            current = Some((name.trim().to_string(), Vec::new()));
        } else if line == "end" {
            match current.take() {
                Some(block) => flows.push(block),
                None => {
                    return Err(Error::Malformed {
                        line: lineno,
                        reason: "`end` outside a flow block".into(),
                    })
                }
            }
        } else if let Some((_, edges)) = current.as_mut() {
            edges.push((lineno, line.to_string()));
        } else {
            dict_lines.push_str(line);
            dict_lines.push('\n');
        }
    }
    if current.is_some() {
        return Err(Error::Malformed {
            line: text.lines().count(),
            reason: "unterminated flow block".into(),
        });
    }

    let dict = parse_message_definitions(&dict_lines)?;
    let mut specs = Vec::new();
    for (name, edge_lines) in flows {
        let mut edges = BTreeSet::new();
        for (lineno, line) in edge_lines {
            let (h, t) = line.split_once("->").ok_or_else(|| Error::Malformed {
                line: lineno,
                reason: "expected `h -> t` edge".into(),
            })?;
            let parse_id = |s: &str| -> Result<MsgId> {
                let id: u32 = s.trim().parse().map_err(|_| Error::Malformed {
                    line: lineno,
                    reason: format!("invalid message id `{}`", s.trim()),
                })?;
                let id = MsgId(id);
                if !dict.messages.contains_key(&id) {
                    return Err(Error::UnknownId {
                        line: lineno,
                        column: 1,
                        id,
                    });
                }
                Ok(id)
            };
            edges.insert((parse_id(h)?, parse_id(t)?));
        }
        specs.push(build_flow_spec(name, edges, &dict)?);
    }
    Ok((dict, specs))
}

fn build_flow_spec(
    name: String,
    edges: BTreeSet<Edge>,
    dict: &MessageDictionary,
) -> Result<FlowSpec> {
    let invalid = |reason: String| Error::InvalidParameter(format!("flow `{name}`: {reason}"));
    if edges.is_empty() {
        return Err(invalid("no edges".into()));
    }
    let nodes: BTreeSet<MsgId> = edges.iter().flat_map(|&(h, t)| [h, t]).collect();
    let with_incoming: BTreeSet<MsgId> = edges.iter().map(|&(_, t)| t).collect();
    let roots: Vec<MsgId> = nodes.difference(&with_incoming).copied().collect();
    let [root] = roots[..] else {
        return Err(invalid(format!("expected exactly one root, found {roots:?}")));
    };
    if !dict.is_initial(root) {
        return Err(invalid(format!("root {root} is not an initial message")));
    }
    let with_outgoing: BTreeSet<MsgId> = edges.iter().map(|&(h, _)| h).collect();
    let terminals: BTreeSet<MsgId> = nodes.difference(&with_outgoing).copied().collect();
    for &t in &terminals {
        if !dict.is_terminal(t) {
            return Err(invalid(format!("sink {t} is not a terminal message")));
        }
    }
    for &t in &dict.terminal {
        if with_outgoing.contains(&t) {
            return Err(invalid(format!("terminal {t} has outgoing edges")));
        }
    }
    // acyclicity: every node must be reachable from the root in finite walks
    let spec = FlowSpec {
        name,
        edges,
        initial: root,
        terminals,
    };
    if has_cycle(&spec) {
        return Err(Error::InvalidParameter(format!(
            "flow `{}` contains a cycle",
            spec.name
        )));
    }
    Ok(spec)
}

fn has_cycle(spec: &FlowSpec) -> bool {
    let nodes: Vec<MsgId> = spec.nodes().into_iter().collect();
    let mut indegree: BTreeMap<MsgId, usize> = nodes.iter().map(|&n| (n, 0)).collect();
    for &(_, t) in &spec.edges {
        *indegree.get_mut(&t).unwrap() += 1;
    }
    let mut ready: Vec<MsgId> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&n, _)| n)
        .collect();
    let mut seen = 0;
    while let Some(n) = ready.pop() {
        seen += 1;
        for &(h, t) in spec.edges.range((n, MsgId(0))..=(n, MsgId(u32::MAX))) {
            debug_assert_eq!(h, n);
            let d = indegree.get_mut(&t).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.push(t);
            }
        }
    }
    seen != nodes.len()
}

/// The shipped 10-flow SoC fixture used by the desk-scale presets.
pub const SOC10_FLOWS: &str = include_str!("../fixtures/soc10.flows");

/// Desk-scale preset corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// The four CPU-initiated data flows, 20 instances each.
    Small20,
    /// All ten flows, 10 instances each.
    Large10,
    /// All ten flows, 20 instances each.
    Large20,
}

impl Preset {
    pub fn from_name(name: &str) -> Option<Preset> {
        match name {
            "small-20" => Some(Preset::Small20),
            "large-10" => Some(Preset::Large10),
            "large-20" => Some(Preset::Large20),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Small20 => "small-20",
            Preset::Large10 => "large-10",
            Preset::Large20 => "large-20",
        }
    }

    /// Builds the generation config for this preset. Trace and instance
    /// counts are tuned so the expected corpus sizes land near the
    /// reference totals (3680 / 4360 / 10900 messages).
    pub fn config(self, seed: u64) -> (MessageDictionary, GenerationConfig) {
        let (dict, flows) = parse_flow_file(SOC10_FLOWS).expect("fixture parses");
        let (flows, instances, num_traces) = match self {
            Preset::Small20 => (flows.into_iter().take(4).collect::<Vec<_>>(), 20, 15),
            Preset::Large10 => (flows, 10, 13),
            Preset::Large20 => (flows, 20, 16),
        };
        let mut cfg = GenerationConfig::new(flows, instances, seed);
        cfg.num_traces = num_traces;
        (dict, cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (MessageDictionary, Vec<FlowSpec>) {
        parse_flow_file(SOC10_FLOWS).unwrap()
    }

    #[test]
    fn fixture_parses_into_ten_flows() {
        let (dict, flows) = fixture();
        assert_eq!(flows.len(), 10);
        assert_eq!(dict.initial.len(), 10);
        assert_eq!(dict.terminal.len(), 10);
        for f in &flows {
            assert!(dict.is_initial(f.initial));
            for t in &f.terminals {
                assert!(dict.is_terminal(*t));
            }
        }
    }

    #[test]
    fn branching_flow_has_two_paths() {
        let (_, flows) = fixture();
        let cpu0_rd = flows.iter().find(|f| f.name == "cpu0_rd").unwrap();
        let paths = cpu0_rd.paths();
        assert_eq!(paths.len(), 2);
        assert!(paths.contains(&vec![MsgId(1), MsgId(2)]));
        assert!(paths.contains(&vec![MsgId(1), MsgId(5), MsgId(6), MsgId(2)]));
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let (_, flows) = fixture();
        let cfg = GenerationConfig::new(flows, 3, 7);
        let (a, _) = generate(&cfg).unwrap();
        let (b, _) = generate(&cfg).unwrap();
        assert_eq!(a, b);
        let cfg2 = GenerationConfig::new(cfg.flows.clone(), 3, 8);
        let (c, _) = generate(&cfg2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn max_concurrent_one_concatenates_whole_flows() {
        let (dict, flows) = fixture();
        let mut cfg = GenerationConfig::new(flows.clone(), 2, 3);
        cfg.max_concurrent = 1;
        let (traces, gt) = generate(&cfg).unwrap();
        // trace must decompose into whole ground-truth paths back to back
        let events = &traces.traces[0].events;
        let mut pos = 0;
        while pos < events.len() {
            let matched = gt
                .sequences()
                .find(|s| events[pos..].starts_with(s))
                .map(|s| s.len());
            let len = matched.expect("prefix must be a whole flow path");
            pos += len;
        }
        let _ = dict;
    }

    #[test]
    fn conservation_without_drops() {
        let (_, flows) = fixture();
        let cfg = GenerationConfig::new(flows, 5, 11);
        let (traces, _) = generate(&cfg).unwrap();
        // every execution contributes its whole path
        let total = traces.total_messages();
        assert!(total >= 10 * 5 * 2); // at least the shortest paths
        // legality: per flow path structure is checked by the closed loop
        // oracle below
    }

    #[test]
    fn drop_rule_removes_all_instances_at_p1() {
        let (_, flows) = fixture();
        let mut cfg = GenerationConfig::new(flows, 5, 11);
        cfg.drop_rule = Some((MsgId(5), 1.0));
        let (traces, _) = generate(&cfg).unwrap();
        assert!(!traces.traces[0].events.contains(&MsgId(5)));
    }

    #[test]
    fn ground_truth_accepts_drop_free_output() {
        let (dict, flows) = fixture();
        let cfg = GenerationConfig::new(flows, 4, 17);
        let (traces, gt) = generate(&cfg).unwrap();
        let ar = project_ground_truth_ar(&traces, &gt, &dict).unwrap();
        assert_eq!(ar, 1.0);
    }

    #[test]
    fn dropped_midflow_message_breaks_closure() {
        let (dict, flows) = fixture();
        let mut cfg = GenerationConfig::new(flows, 4, 17);
        cfg.drop_rule = Some((MsgId(5), 1.0));
        let (traces, gt) = generate(&cfg).unwrap();
        let ar = project_ground_truth_ar(&traces, &gt, &dict).unwrap();
        assert!(ar < 1.0);
    }

    #[test]
    fn empty_trace_set_is_an_error() {
        let (dict, flows) = fixture();
        let gt = FlowModel::from_sequences(flows[0].paths());
        assert!(matches!(
            project_ground_truth_ar(&TraceSet::new(vec![]), &gt, &dict),
            Err(Error::EmptyTraceSet)
        ));
    }

    #[test]
    fn cyclic_flow_rejected() {
        let text = "\
1 (a:b:x:req)
2 (b:b:x:req)
3 (b:c:x:resp)
initial = {1}
terminal = {3}
flow bad
1 -> 2
2 -> 2
2 -> 3
end
";
        assert!(parse_flow_file(text).is_err());
    }

    #[test]
    fn preset_sizes_are_near_reference_totals() {
        for (preset, reference) in [
            (Preset::Small20, 3680usize),
            (Preset::Large10, 4360),
            (Preset::Large20, 10900),
        ] {
            let (_, cfg) = preset.config(1);
            let (traces, _) = generate(&cfg).unwrap();
            let total = traces.total_messages() as f64;
            let lo = reference as f64 * 0.8;
            let hi = reference as f64 * 1.2;
            assert!(
                total >= lo && total <= hi,
                "{}: {total} outside [{lo}, {hi}]",
                preset.name()
            );
        }
    }
}
