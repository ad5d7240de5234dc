//! Structural-causality graph construction, trace statistics, and pruning.
//!
//! The graph is a DAG over the unique messages observed in the traces.
//! Edges are structural-causality candidates annotated with supports and
//! forward/backward confidences averaged across traces; pruning removes
//! edges whose combined confidence falls below a threshold.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::model::{MessageDictionary, MsgId, Trace, TraceSet};

pub type Edge = (MsgId, MsgId);

/// DAG over observed messages with per-edge statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalityGraph {
    pub nodes: BTreeSet<MsgId>,
    pub roots: BTreeSet<MsgId>,
    pub terminals: BTreeSet<MsgId>,
    pub edges: BTreeSet<Edge>,
    /// Summed over all traces; diagnostics only.
    pub node_support: BTreeMap<MsgId, u64>,
    /// Summed over all traces; diagnostics only.
    pub edge_support: BTreeMap<Edge, u64>,
    pub forward_conf: BTreeMap<Edge, f64>,
    pub backward_conf: BTreeMap<Edge, f64>,
}

impl CausalityGraph {
    pub fn successors(&self, id: MsgId) -> impl Iterator<Item = MsgId> + '_ {
        self.edges
            .range((id, MsgId(0))..=(id, MsgId(u32::MAX)))
            .map(|&(_, t)| t)
    }

    /// Mean of forward and backward confidence, the pruning criterion.
    pub fn combined_conf(&self, edge: Edge) -> f64 {
        let f = self.forward_conf.get(&edge).copied().unwrap_or(0.0);
        let b = self.backward_conf.get(&edge).copied().unwrap_or(0.0);
        (f + b) / 2.0
    }
}

/// A causality graph after threshold pruning. Essential edges are exempt.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedGraph {
    pub graph: CausalityGraph,
    pub theta: f64,
    pub essential_edges: BTreeSet<Edge>,
}

/// How a trace with zero support for an edge endpoint contributes to the
/// confidence mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroSupportPolicy {
    /// The trace contributes 0 to the mean: a flow absent from a trace is
    /// evidence of weak causality.
    #[default]
    CountAsZero,
    /// The trace is excluded from the mean.
    Skip,
}

/// Number of instances of `m` in the trace.
pub fn node_support(trace: &Trace, m: MsgId) -> u64 {
    trace.events.iter().filter(|&&e| e == m).count() as u64
}

/// Count of `t` instances each matched to a distinct earlier `h` instance.
///
/// Matching policy: scan `t` instances in trace order and match each to the
/// nearest earlier unmatched `h` instance. For this precedence structure the
/// greedy count equals the maximum bipartite matching (asserted against a
/// brute-force oracle in tests).
pub fn edge_support(trace: &Trace, h: MsgId, t: MsgId) -> u64 {
    let mut free_heads: BTreeSet<usize> = BTreeSet::new();
    let mut count = 0u64;
    for (pos, &ev) in trace.events.iter().enumerate() {
        // check tail first so h == t instances prefer consuming a predecessor
        if ev == t {
            if let Some(&head) = free_heads.range(..pos).next_back() {
                free_heads.remove(&head);
                count += 1;
            }
        }
        if ev == h {
            free_heads.insert(pos);
        }
    }
    count
}

/// Per-trace forward confidence: edge support over head support.
pub fn forward_confidence(trace: &Trace, h: MsgId, t: MsgId) -> f64 {
    let ns = node_support(trace, h);
    if ns == 0 {
        0.0
    } else {
        edge_support(trace, h, t) as f64 / ns as f64
    }
}

/// Per-trace backward confidence: edge support over tail support.
pub fn backward_confidence(trace: &Trace, h: MsgId, t: MsgId) -> f64 {
    let ns = node_support(trace, t);
    if ns == 0 {
        0.0
    } else {
        edge_support(trace, h, t) as f64 / ns as f64
    }
}

/// Builds the graph structure from the traces: a root per observed initial
/// message, breadth-first expansion over structural causality restricted to
/// observed messages, stopping at terminals. Edges that would close a cycle
/// are omitted at insertion time; insertion order is breadth-first from each
/// root (ascending), candidates by ascending tail id, so the result is
/// deterministic.
pub fn construct_causality_graph(
    traces: &TraceSet,
    dict: &MessageDictionary,
) -> Result<CausalityGraph> {
    let observed: BTreeSet<MsgId> = traces
        .traces
        .iter()
        .flat_map(|t| t.events.iter().copied())
        .collect();
    let roots: BTreeSet<MsgId> = dict.initial.intersection(&observed).copied().collect();
    if roots.is_empty() {
        return Err(Error::EmptyModel);
    }

    let mut edges: BTreeSet<Edge> = BTreeSet::new();
    let mut visited: BTreeSet<MsgId> = BTreeSet::new();
    for &root in &roots {
        let mut queue = VecDeque::new();
        if visited.insert(root) {
            queue.push_back(root);
        } else {
            // already expanded while processing an earlier root, but edges
            // out of this root may still be missing
            queue.push_back(root);
        }
        while let Some(h) = queue.pop_front() {
            if dict.is_terminal(h) {
                continue;
            }
            for &t in &observed {
                if !dict.causal_ids(h, t) || edges.contains(&(h, t)) {
                    continue;
                }
                if h == t || reaches(&edges, t, h) {
                    continue; // would close a cycle
                }
                edges.insert((h, t));
                if visited.insert(t) {
                    queue.push_back(t);
                }
            }
        }
    }

    let mut nodes: BTreeSet<MsgId> = roots.clone();
    for &(h, t) in &edges {
        nodes.insert(h);
        nodes.insert(t);
    }
    let terminals: BTreeSet<MsgId> = dict.terminal.intersection(&nodes).copied().collect();

    Ok(CausalityGraph {
        nodes,
        roots,
        terminals,
        edges,
        node_support: BTreeMap::new(),
        edge_support: BTreeMap::new(),
        forward_conf: BTreeMap::new(),
        backward_conf: BTreeMap::new(),
    })
}

fn reaches(edges: &BTreeSet<Edge>, from: MsgId, to: MsgId) -> bool {
    let mut stack = vec![from];
    let mut seen = BTreeSet::new();
    while let Some(n) = stack.pop() {
        if n == to {
            return true;
        }
        if !seen.insert(n) {
            continue;
        }
        for &(h, t) in edges.range((n, MsgId(0))..=(n, MsgId(u32::MAX))) {
            debug_assert_eq!(h, n);
            stack.push(t);
        }
    }
    false
}

/// Fills in supports (summed over traces) and confidences (means of the
/// per-trace ratios) for every node and edge of the graph.
pub fn aggregate_statistics(traces: &TraceSet, graph: &CausalityGraph) -> CausalityGraph {
    aggregate_statistics_with_policy(traces, graph, ZeroSupportPolicy::CountAsZero)
}

pub fn aggregate_statistics_with_policy(
    traces: &TraceSet,
    graph: &CausalityGraph,
    policy: ZeroSupportPolicy,
) -> CausalityGraph {
    let mut out = graph.clone();
    for &n in &out.nodes {
        let total: u64 = traces.traces.iter().map(|t| node_support(t, n)).sum();
        out.node_support.insert(n, total);
    }
    for &(h, t) in &out.edges {
        let mut es_total = 0u64;
        let mut f_sum = 0.0;
        let mut f_n = 0usize;
        let mut b_sum = 0.0;
        let mut b_n = 0usize;
        for trace in &traces.traces {
            let es = edge_support(trace, h, t);
            es_total += es;
            let ns_h = node_support(trace, h);
            let ns_t = node_support(trace, t);
            match (ns_h, policy) {
                (0, ZeroSupportPolicy::Skip) => {}
                (0, ZeroSupportPolicy::CountAsZero) => {
                    f_sum += 0.0;
                    f_n += 1;
                }
                (ns, _) => {
                    f_sum += es as f64 / ns as f64;
                    f_n += 1;
                }
            }
            match (ns_t, policy) {
                (0, ZeroSupportPolicy::Skip) => {}
                (0, ZeroSupportPolicy::CountAsZero) => {
                    b_sum += 0.0;
                    b_n += 1;
                }
                (ns, _) => {
                    b_sum += es as f64 / ns as f64;
                    b_n += 1;
                }
            }
        }
        out.edge_support.insert((h, t), es_total);
        out.forward_conf
            .insert((h, t), if f_n == 0 { 0.0 } else { f_sum / f_n as f64 });
        out.backward_conf
            .insert((h, t), if b_n == 0 { 0.0 } else { b_sum / b_n as f64 });
    }
    out
}

/// Removes every non-essential edge whose combined confidence is below
/// `theta`, then drops nodes no longer on any root-to-terminal path.
pub fn prune(
    graph: &CausalityGraph,
    theta: f64,
    essential: &BTreeSet<Edge>,
) -> Result<PrunedGraph> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!(
            "theta must lie in [0,1], got {theta}"
        )));
    }
    let retained: BTreeSet<Edge> = graph
        .edges
        .iter()
        .copied()
        .filter(|&e| essential.contains(&e) || graph.combined_conf(e) >= theta)
        .collect();

    // forward reachability from roots
    let mut fwd: BTreeSet<MsgId> = BTreeSet::new();
    let mut stack: Vec<MsgId> = graph.roots.iter().copied().collect();
    while let Some(n) = stack.pop() {
        if !fwd.insert(n) {
            continue;
        }
        for &(_, t) in retained.range((n, MsgId(0))..=(n, MsgId(u32::MAX))) {
            stack.push(t);
        }
    }
    // backward reachability from terminals
    let rev: BTreeSet<Edge> = retained.iter().map(|&(h, t)| (t, h)).collect();
    let mut bwd: BTreeSet<MsgId> = BTreeSet::new();
    let mut stack: Vec<MsgId> = graph.terminals.iter().copied().collect();
    while let Some(n) = stack.pop() {
        if !bwd.insert(n) {
            continue;
        }
        for &(_, t) in rev.range((n, MsgId(0))..=(n, MsgId(u32::MAX))) {
            stack.push(t);
        }
    }

    let nodes: BTreeSet<MsgId> = fwd.intersection(&bwd).copied().collect();
    let roots: BTreeSet<MsgId> = graph.roots.intersection(&nodes).copied().collect();
    let terminals: BTreeSet<MsgId> = graph.terminals.intersection(&nodes).copied().collect();
    if roots.is_empty() || terminals.is_empty() {
        return Err(Error::OverPruned { theta });
    }
    let edges: BTreeSet<Edge> = retained
        .into_iter()
        .filter(|&(h, t)| nodes.contains(&h) && nodes.contains(&t))
        .collect();

    let keep_edge = |m: &BTreeMap<Edge, u64>| -> BTreeMap<Edge, u64> {
        m.iter()
            .filter(|(e, _)| edges.contains(*e))
            .map(|(&e, &v)| (e, v))
            .collect()
    };
    let keep_conf = |m: &BTreeMap<Edge, f64>| -> BTreeMap<Edge, f64> {
        m.iter()
            .filter(|(e, _)| edges.contains(*e))
            .map(|(&e, &v)| (e, v))
            .collect()
    };

    Ok(PrunedGraph {
        graph: CausalityGraph {
            node_support: graph
                .node_support
                .iter()
                .filter(|(n, _)| nodes.contains(*n))
                .map(|(&n, &v)| (n, v))
                .collect(),
            edge_support: keep_edge(&graph.edge_support),
            forward_conf: keep_conf(&graph.forward_conf),
            backward_conf: keep_conf(&graph.backward_conf),
            nodes,
            roots,
            terminals,
            edges,
        },
        theta,
        essential_edges: essential
            .iter()
            .copied()
            .filter(|e| graph.edges.contains(e))
            .collect(),
    })
}

/// Topological order of the graph nodes; `None` if a cycle slipped in.
pub fn topological_sort(graph: &CausalityGraph) -> Option<Vec<MsgId>> {
    let mut indegree: BTreeMap<MsgId, usize> = graph.nodes.iter().map(|&n| (n, 0)).collect();
    for &(_, t) in &graph.edges {
        *indegree.get_mut(&t)? += 1;
    }
    let mut ready: VecDeque<MsgId> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&n, _)| n)
        .collect();
    let mut order = Vec::with_capacity(graph.nodes.len());
    while let Some(n) = ready.pop_front() {
        order.push(n);
        for t in graph.successors(n) {
            let d = indegree.get_mut(&t).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.push_back(t);
            }
        }
    }
    (order.len() == graph.nodes.len()).then_some(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_message_definitions, parse_traces};

    fn fig2() -> (MessageDictionary, TraceSet) {
        let dict = parse_message_definitions(crate::testdata::FIG2_DEFS).unwrap();
        let traces = parse_traces(crate::testdata::EXAMPLE_TRACE, &dict).unwrap();
        (dict, traces)
    }

    /// Brute-force maximum precedence-constrained bipartite matching between
    /// h-instances and t-instances. Independent of the streaming matcher.
    pub(crate) fn edge_support_oracle(trace: &Trace, h: MsgId, t: MsgId) -> u64 {
        let heads: Vec<usize> = trace
            .events
            .iter()
            .enumerate()
            .filter(|(_, &e)| e == h)
            .map(|(p, _)| p)
            .collect();
        let tails: Vec<usize> = trace
            .events
            .iter()
            .enumerate()
            .filter(|(_, &e)| e == t)
            .map(|(p, _)| p)
            .collect();
        fn go(tails: &[usize], heads: &[usize], used: &mut Vec<bool>) -> u64 {
            match tails.split_first() {
                None => 0,
                Some((&tp, rest)) => {
                    let mut best = go(rest, heads, used);
                    for (i, &hp) in heads.iter().enumerate() {
                        if !used[i] && hp < tp {
                            used[i] = true;
                            best = best.max(1 + go(rest, heads, used));
                            used[i] = false;
                        }
                    }
                    best
                }
            }
        }
        let mut used = vec![false; heads.len()];
        go(&tails, &heads, &mut used)
    }

    #[test]
    fn node_supports_on_worked_trace() {
        let (_, traces) = fig2();
        let t = &traces.traces[0];
        assert_eq!(node_support(t, MsgId(1)), 3);
        assert_eq!(node_support(t, MsgId(5)), 2);
        assert_eq!(node_support(&Trace::new(vec![]), MsgId(1)), 0);
    }

    #[test]
    fn edge_supports_on_worked_trace() {
        let (_, traces) = fig2();
        let t = &traces.traces[0];
        assert_eq!(edge_support(t, MsgId(1), MsgId(2)), 3);
        assert_eq!(edge_support(t, MsgId(3), MsgId(2)), 1);
        assert_eq!(edge_support(t, MsgId(1), MsgId(4)), 1);
        assert_eq!(edge_support(t, MsgId(6), MsgId(4)), 1);
        assert_eq!(edge_support(t, MsgId(3), MsgId(5)), 1);
        let rev = Trace::new(vec![MsgId(2), MsgId(1)]);
        assert_eq!(edge_support(&rev, MsgId(1), MsgId(2)), 0);
    }

    #[test]
    fn streaming_matcher_agrees_with_oracle_on_worked_trace() {
        let (_, traces) = fig2();
        let t = &traces.traces[0];
        for h in 1..=6u32 {
            for tt in 1..=6u32 {
                assert_eq!(
                    edge_support(t, MsgId(h), MsgId(tt)),
                    edge_support_oracle(t, MsgId(h), MsgId(tt)),
                    "edge ({h},{tt})"
                );
            }
        }
    }

    #[test]
    fn confidences_on_worked_trace() {
        let (_, traces) = fig2();
        let t = &traces.traces[0];
        assert_eq!(forward_confidence(t, MsgId(1), MsgId(2)), 1.0);
        assert!((forward_confidence(t, MsgId(1), MsgId(4)) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(backward_confidence(t, MsgId(1), MsgId(2)), 1.0);
        assert!((backward_confidence(t, MsgId(3), MsgId(2)) - 1.0 / 3.0).abs() < 1e-12);
        // absent head: zero support, zero confidence
        assert_eq!(forward_confidence(t, MsgId(9), MsgId(2)), 0.0);
        assert_eq!(backward_confidence(t, MsgId(1), MsgId(9)), 0.0);
    }

    #[test]
    fn construction_matches_worked_example() {
        let (dict, traces) = fig2();
        let g = construct_causality_graph(&traces, &dict).unwrap();
        assert_eq!(g.nodes.len(), 6);
        assert_eq!(g.roots, [MsgId(1), MsgId(3)].into_iter().collect());
        assert_eq!(g.terminals, [MsgId(2), MsgId(4)].into_iter().collect());
        let expect: BTreeSet<Edge> = [
            (1, 2),
            (1, 4),
            (1, 5),
            (3, 2),
            (3, 4),
            (3, 5),
            (5, 6),
            (6, 2),
            (6, 4),
        ]
        .into_iter()
        .map(|(a, b)| (MsgId(a), MsgId(b)))
        .collect();
        assert_eq!(g.edges, expect);
        assert!(topological_sort(&g).is_some());
    }

    #[test]
    fn minimal_flow_graph() {
        let dict = parse_message_definitions(crate::testdata::FIG2_DEFS).unwrap();
        let traces = parse_traces("1 2\n", &dict).unwrap();
        let g = construct_causality_graph(&traces, &dict).unwrap();
        assert_eq!(g.nodes, [MsgId(1), MsgId(2)].into_iter().collect());
        assert_eq!(g.edges, [(MsgId(1), MsgId(2))].into_iter().collect());
    }

    #[test]
    fn no_initial_in_traces_is_empty_model() {
        let dict = parse_message_definitions(crate::testdata::FIG2_DEFS).unwrap();
        let traces = parse_traces("5 6\n", &dict).unwrap();
        assert!(matches!(
            construct_causality_graph(&traces, &dict),
            Err(Error::EmptyModel)
        ));
    }

    #[test]
    fn aggregation_means_over_traces() {
        let dict = parse_message_definitions(crate::testdata::FIG2_DEFS).unwrap();
        let traces = parse_traces("1 2\n1 1 2\n", &dict).unwrap();
        let g = construct_causality_graph(&traces, &dict).unwrap();
        let g = aggregate_statistics(&traces, &g);
        let f = g.forward_conf[&(MsgId(1), MsgId(2))];
        assert!((f - 0.75).abs() < 1e-12, "got {f}");
        // single-trace set: aggregate equals per-trace
        let single = parse_traces("1 2\n", &dict).unwrap();
        let gs = construct_causality_graph(&single, &dict).unwrap();
        let gs = aggregate_statistics(&single, &gs);
        assert_eq!(gs.forward_conf[&(MsgId(1), MsgId(2))], 1.0);
    }

    #[test]
    fn pruning_matches_worked_example() {
        let (dict, traces) = fig2();
        let g = construct_causality_graph(&traces, &dict).unwrap();
        let g = aggregate_statistics(&traces, &g);
        let pg = prune(&g, 0.45, &BTreeSet::new()).unwrap();
        assert!(!pg.graph.edges.contains(&(MsgId(1), MsgId(4))));
        assert!(!pg.graph.edges.contains(&(MsgId(3), MsgId(2))));
        assert!(pg.graph.edges.contains(&(MsgId(3), MsgId(5))));
        assert!(pg.graph.edges.contains(&(MsgId(6), MsgId(4))));
        assert_eq!(pg.graph.edges.len(), 7);
        // theta = 0 keeps every edge
        let pg0 = prune(&g, 0.0, &BTreeSet::new()).unwrap();
        assert_eq!(pg0.graph.edges, g.edges);
    }

    #[test]
    fn essential_edges_survive_any_theta() {
        let (dict, traces) = fig2();
        let g = construct_causality_graph(&traces, &dict).unwrap();
        let g = aggregate_statistics(&traces, &g);
        let essential: BTreeSet<Edge> = [(MsgId(1), MsgId(4))].into_iter().collect();
        let pg = prune(&g, 1.0, &essential).unwrap();
        assert!(pg.graph.edges.contains(&(MsgId(1), MsgId(4))));
    }

    #[test]
    fn over_pruning_is_an_error() {
        let dict = parse_message_definitions(crate::testdata::FIG2_DEFS).unwrap();
        let traces = parse_traces("1 5 2\n", &dict).unwrap();
        let g = construct_causality_graph(&traces, &dict).unwrap();
        let mut g = aggregate_statistics(&traces, &g);
        // force every confidence below threshold
        for v in g.forward_conf.values_mut() {
            *v = 0.0;
        }
        for v in g.backward_conf.values_mut() {
            *v = 0.0;
        }
        assert!(matches!(
            prune(&g, 0.9, &BTreeSet::new()),
            Err(Error::OverPruned { .. })
        ));
    }

    #[test]
    fn skip_policy_excludes_empty_traces_from_mean() {
        let dict = parse_message_definitions(crate::testdata::FIG2_DEFS).unwrap();
        let traces = parse_traces("1 2\n3 4\n", &dict).unwrap();
        let g = construct_causality_graph(&traces, &dict).unwrap();
        let zero = aggregate_statistics(&traces, &g);
        let skip = aggregate_statistics_with_policy(&traces, &g, ZeroSupportPolicy::Skip);
        assert_eq!(zero.forward_conf[&(MsgId(1), MsgId(2))], 0.5);
        assert_eq!(skip.forward_conf[&(MsgId(1), MsgId(2))], 1.0);
    }
}
