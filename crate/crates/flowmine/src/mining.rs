//! The mining pipeline: path enumeration over the pruned causality graph,
//! base-model selection, acceptance-ratio evaluation against the traces, and
//! score-driven refinement until a target accuracy is reached.

use std::collections::{BTreeMap, BTreeSet};

use crate::acceptor::{compile_acceptor, FlowAcceptor, StateId};
use crate::causality::{
    self, aggregate_statistics_with_policy, construct_causality_graph, prune, CausalityGraph,
    PrunedGraph, ZeroSupportPolicy,
};
use crate::error::{Error, Result};
use crate::essential::{
    derive_flows, extract_essential, remove_emfs_counting, EssentialFlow, EssentialSet,
};
use crate::model::{MessageDictionary, MsgId, TraceSet};

/// Live instances allowed per trace during evaluation. Exceeding the cap
/// fails the trace's remaining messages as unaccepted.
pub const MAX_LIVE_INSTANCES: usize = 10_000;

/// One root-to-terminal message sequence with its scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub sequence: Vec<MsgId>,
    pub forward_score: f64,
    pub backward_score: f64,
    pub essential_count: usize,
    pub score: f64,
}

/// The mined specification: an ordered, duplicate-free set of paths.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowModel {
    pub paths: Vec<Path>,
}

impl FlowModel {
    pub fn from_sequences(seqs: Vec<Vec<MsgId>>) -> Self {
        let mut model = FlowModel::default();
        for sequence in seqs {
            model.push(Path {
                sequence,
                forward_score: 0.0,
                backward_score: 0.0,
                essential_count: 0,
                score: 0.0,
            });
        }
        model
    }

    /// Number of message sequences in the model.
    pub fn size(&self) -> usize {
        self.paths.len()
    }

    pub fn contains_sequence(&self, seq: &[MsgId]) -> bool {
        self.paths.iter().any(|p| p.sequence == seq)
    }

    /// Adds a path unless an identical sequence is already present.
    pub fn push(&mut self, path: Path) -> bool {
        if self.contains_sequence(&path.sequence) {
            return false;
        }
        self.paths.push(path);
        true
    }

    pub fn sequences(&self) -> impl Iterator<Item = &[MsgId]> {
        self.paths.iter().map(|p| p.sequence.as_slice())
    }
}

/// Result of evaluating a model against a trace set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    /// Mean of the per-trace ratios.
    pub acceptance_ratio: f64,
    pub per_trace_ratios: Vec<f64>,
    pub unaccepted_counts: BTreeMap<MsgId, u64>,
    /// Acceptor transitions never fired during this evaluation.
    pub unused_edges: BTreeSet<(StateId, MsgId)>,
    /// Completed flow instances keyed by sequence length (EMF removals
    /// included), for the sequence-length histogram.
    pub completed_lengths: BTreeMap<usize, u64>,
    pub live_cap_exceeded: bool,
}

/// Paths enumerated from a pruned graph, flagged when the per-root cut
/// truncated the enumeration.
#[derive(Debug, Clone)]
pub struct PathSet {
    pub paths: Vec<Path>,
    pub truncated: bool,
}

/// Scores a sequence against the pruned graph's statistics.
///
/// Forward/backward scores are the means of the edge confidences; the base
/// score divides their sum by the message count, and each essential edge
/// adds `w_essential / edge_count` on top.
pub fn path_score(
    sequence: &[MsgId],
    graph: &PrunedGraph,
    essential: &EssentialSet,
    w_essential: f64,
) -> Path {
    let edge_count = sequence.len().saturating_sub(1).max(1);
    let mut f_sum = 0.0;
    let mut b_sum = 0.0;
    let mut essential_count = 0usize;
    for w in sequence.windows(2) {
        let edge = (w[0], w[1]);
        f_sum += graph.graph.forward_conf.get(&edge).copied().unwrap_or(0.0);
        b_sum += graph.graph.backward_conf.get(&edge).copied().unwrap_or(0.0);
        if essential.contains(edge) {
            essential_count += 1;
        }
    }
    let forward_score = f_sum / edge_count as f64;
    let backward_score = b_sum / edge_count as f64;
    let base = (forward_score + backward_score) / sequence.len() as f64;
    let score = base + w_essential * essential_count as f64 / edge_count as f64;
    Path {
        sequence: sequence.to_vec(),
        forward_score,
        backward_score,
        essential_count,
        score,
    }
}

/// Enumerates all root-to-terminal paths of length at most `max_len`, in
/// deterministic order (root id, then lexicographic sequence). When more
/// than `max_paths` paths exist the enumeration is cut per root, keeping the
/// highest-scoring ones.
pub fn enumerate_paths(
    graph: &PrunedGraph,
    max_len: usize,
    max_paths: usize,
) -> Result<PathSet> {
    if max_len < 2 {
        return Err(Error::InvalidParameter(format!(
            "max_len must be at least 2, got {max_len}"
        )));
    }
    let hard_stop = max_paths.saturating_mul(2).max(max_paths);
    let mut per_root: Vec<(MsgId, Vec<Vec<MsgId>>)> = Vec::new();
    let mut total = 0usize;
    let mut hit_stop = false;
    for &root in &graph.graph.roots {
        let mut found = Vec::new();
        let mut prefix = vec![root];
        dfs_paths(
            graph,
            max_len,
            hard_stop,
            &mut total,
            &mut prefix,
            &mut found,
            &mut hit_stop,
        );
        per_root.push((root, found));
    }
    let total_found: usize = per_root.iter().map(|(_, v)| v.len()).sum();
    if total_found == 0 {
        return Err(Error::EmptyModel);
    }

    let empty_essential = EssentialSet::default();
    let truncated = hit_stop || total_found > max_paths;
    let mut paths = Vec::new();
    if truncated {
        let quota = (max_paths / per_root.len()).max(1);
        for (_, seqs) in &mut per_root {
            let mut scored: Vec<Path> = seqs
                .iter()
                .map(|s| path_score(s, graph, &empty_essential, 0.0))
                .collect();
            scored.sort_by(|a, b| {
                b.score
                    .partial_cmp(&a.score)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| a.sequence.cmp(&b.sequence))
            });
            scored.truncate(quota);
            scored.sort_by(|a, b| a.sequence.cmp(&b.sequence));
            paths.extend(scored);
        }
    } else {
        for (_, seqs) in &per_root {
            for s in seqs {
                paths.push(path_score(s, graph, &empty_essential, 0.0));
            }
        }
    }
    Ok(PathSet { paths, truncated })
}

fn dfs_paths(
    graph: &PrunedGraph,
    max_len: usize,
    hard_stop: usize,
    total: &mut usize,
    prefix: &mut Vec<MsgId>,
    found: &mut Vec<Vec<MsgId>>,
    hit_stop: &mut bool,
) {
    if *total >= hard_stop {
        *hit_stop = true;
        return;
    }
    let last = *prefix.last().unwrap();
    if graph.graph.terminals.contains(&last) && prefix.len() >= 2 {
        found.push(prefix.clone());
        *total += 1;
        return; // flows end at their terminal message
    }
    if prefix.len() >= max_len {
        return;
    }
    let succs: Vec<MsgId> = graph.graph.successors(last).collect();
    for t in succs {
        if prefix.contains(&t) {
            continue; // acyclic by construction, but cheap to keep the walk finite
        }
        prefix.push(t);
        dfs_paths(graph, max_len, hard_stop, total, prefix, found, hit_stop);
        prefix.pop();
    }
}

/// How the base-model selector ranks candidate paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionStrategy {
    /// Most uncovered messages first, then length, then essential edges.
    #[default]
    CoverageFirst,
    /// Longest first among paths adding coverage, then uncovered count,
    /// then essential edges.
    LengthFirst,
}

/// Picks a base model that covers every message of the pruned graph, one
/// path per initial message per round, until coverage is complete or no
/// candidate adds coverage.
pub fn select_base_model(
    graph: &PrunedGraph,
    essential: &EssentialSet,
    max_len: usize,
    max_paths: usize,
    w_essential: f64,
    strategy: SelectionStrategy,
) -> Result<FlowModel> {
    let candidates = enumerate_paths(graph, max_len, max_paths)?;
    let scored: Vec<Path> = candidates
        .paths
        .iter()
        .map(|p| path_score(&p.sequence, graph, essential, w_essential))
        .collect();

    let mut model = FlowModel::default();
    let mut covered: BTreeSet<MsgId> = BTreeSet::new();
    loop {
        let mut progress = false;
        for &root in &graph.graph.roots {
            let mut best: Option<(&Path, (usize, usize, usize))> = None;
            for path in scored.iter().filter(|p| p.sequence[0] == root) {
                let uncovered = path
                    .sequence
                    .iter()
                    .filter(|m| !covered.contains(m))
                    .count();
                if uncovered == 0 {
                    continue;
                }
                let key = match strategy {
                    SelectionStrategy::CoverageFirst => {
                        (uncovered, path.sequence.len(), path.essential_count)
                    }
                    SelectionStrategy::LengthFirst => {
                        (path.sequence.len(), uncovered, path.essential_count)
                    }
                };
                let better = match &best {
                    None => true,
                    Some((cur, cur_key)) => {
                        key > *cur_key
                            || (key == *cur_key && path.sequence < cur.sequence)
                    }
                };
                if better {
                    best = Some((path, key));
                }
            }
            if let Some((path, _)) = best {
                covered.extend(path.sequence.iter().copied());
                model.push(path.clone());
                progress = true;
            }
        }
        if covered.is_superset(&graph.graph.nodes) || !progress {
            break;
        }
    }
    Ok(model)
}

struct TraceEval {
    ratio: f64,
    unaccepted: BTreeMap<MsgId, u64>,
    fired: BTreeSet<(StateId, MsgId)>,
    completed: BTreeMap<usize, u64>,
    cap_exceeded: bool,
}

/// A trace with EMF removal already applied. Reduction depends only on the
/// EMF set, not the model, so refinement prepares once and re-evaluates the
/// reduced events against each candidate model.
#[derive(Debug, Clone)]
pub struct PreparedTrace {
    events: Vec<MsgId>,
    orig_len: usize,
    pre_accepted: u64,
    pre_completed: BTreeMap<usize, u64>,
}

/// Applies EMF removal (when given) to every trace.
pub fn prepare_traces(traces: &TraceSet, emf: Option<&[EssentialFlow]>) -> Vec<PreparedTrace> {
    traces
        .traces
        .iter()
        .map(|trace| match emf {
            Some(flows) => {
                let (reduced, removed, counts) = remove_emfs_counting(trace, flows);
                PreparedTrace {
                    events: reduced.events,
                    orig_len: trace.len(),
                    pre_accepted: removed as u64,
                    pre_completed: counts,
                }
            }
            None => PreparedTrace {
                events: trace.events.clone(),
                orig_len: trace.len(),
                pre_accepted: 0,
                pre_completed: BTreeMap::new(),
            },
        })
        .collect()
}

fn eval_trace(trace: &PreparedTrace, dict: &MessageDictionary, acceptor: &FlowAcceptor) -> TraceEval {
    let mut accepted = trace.pre_accepted;
    let mut completed = trace.pre_completed.clone();
    let mut unaccepted: BTreeMap<MsgId, u64> = BTreeMap::new();
    let mut fired: BTreeSet<(StateId, MsgId)> = BTreeSet::new();
    let mut cap_exceeded = false;

    // live instances indexed two ways: id -> current state (ids ascend in
    // creation order, so the minimum id is the oldest instance), and
    // symbol -> ids able to consume it next
    let mut state_of: BTreeMap<u64, StateId> = BTreeMap::new();
    let mut waiting: BTreeMap<MsgId, BTreeSet<u64>> = BTreeMap::new();
    let mut next_id: u64 = 0;
    let enroll = |waiting: &mut BTreeMap<MsgId, BTreeSet<u64>>, id: u64, q: StateId| {
        for (sym, _) in acceptor.outgoing(q) {
            waiting.entry(sym).or_default().insert(id);
        }
    };
    let unenroll = |waiting: &mut BTreeMap<MsgId, BTreeSet<u64>>, id: u64, q: StateId| {
        for (sym, _) in acceptor.outgoing(q) {
            if let Some(set) = waiting.get_mut(&sym) {
                set.remove(&id);
            }
        }
    };

    let mut iter = trace.events.iter();
    while let Some(&m) = iter.next() {
        if state_of.len() >= MAX_LIVE_INSTANCES {
            cap_exceeded = true;
            *unaccepted.entry(m).or_insert(0) += 1;
            for &rest in iter {
                *unaccepted.entry(rest).or_insert(0) += 1;
            }
            break;
        }
        if dict.is_initial(m) {
            // an initial message always starts a fresh flow instance
            match acceptor.successor(acceptor.q0, m) {
                Some(q1) => {
                    accepted += 1;
                    fired.insert((acceptor.q0, m));
                    if acceptor.is_accepting(q1) {
                        *completed.entry(acceptor.depth(q1)).or_insert(0) += 1;
                    }
                    if !(acceptor.is_accepting(q1) && acceptor.is_leaf(q1)) {
                        let id = next_id;
                        next_id += 1;
                        state_of.insert(id, q1);
                        enroll(&mut waiting, id, q1);
                    }
                }
                None => *unaccepted.entry(m).or_insert(0) += 1,
            }
            continue;
        }
        // oldest instance with an enabled transition wins
        let oldest = waiting
            .get(&m)
            .and_then(|set| set.first().copied());
        match oldest {
            Some(id) => {
                let q = state_of[&id];
                let q2 = acceptor.successor(q, m).unwrap();
                accepted += 1;
                fired.insert((q, m));
                if acceptor.is_accepting(q2) {
                    *completed.entry(acceptor.depth(q2)).or_insert(0) += 1;
                }
                unenroll(&mut waiting, id, q);
                if acceptor.is_accepting(q2) && acceptor.is_leaf(q2) {
                    state_of.remove(&id);
                } else {
                    state_of.insert(id, q2);
                    enroll(&mut waiting, id, q2);
                }
            }
            None => *unaccepted.entry(m).or_insert(0) += 1,
        }
    }

    let ratio = if trace.orig_len == 0 {
        1.0
    } else {
        accepted as f64 / trace.orig_len as f64
    };
    TraceEval {
        ratio,
        unaccepted,
        fired,
        completed,
        cap_exceeded,
    }
}

/// Evaluates the model against every trace: acceptance ratio, per-message
/// unaccepted counts, and the acceptor transitions that never fired. EMF
/// removal, when given, runs per trace first and its deleted messages count
/// as accepted; ratios are always over the original trace length.
pub fn evaluate(
    traces: &TraceSet,
    dict: &MessageDictionary,
    model: &FlowModel,
    emf: Option<&[EssentialFlow]>,
) -> EvaluationResult {
    evaluate_with_jobs(traces, dict, model, emf, 1)
}

/// Like [`evaluate`] but splits the per-trace work over `jobs` threads.
/// Per-trace evaluation is pure, and the merge is an ordered reduction over
/// trace index, so the result is identical for any job count.
pub fn evaluate_with_jobs(
    traces: &TraceSet,
    dict: &MessageDictionary,
    model: &FlowModel,
    emf: Option<&[EssentialFlow]>,
    jobs: usize,
) -> EvaluationResult {
    let filtered = emf.map(|flows| model_emfs(model, flows));
    evaluate_prepared(
        &prepare_traces(traces, filtered.as_deref()),
        dict,
        model,
        jobs,
    )
}

/// EMF removal must stay an accelerator, not a semantic change, so only
/// flows the model itself contains may be deleted up front; anything else
/// has to face the acceptor.
pub fn model_emfs(model: &FlowModel, flows: &[EssentialFlow]) -> Vec<EssentialFlow> {
    flows
        .iter()
        .filter(|f| model.contains_sequence(&f.sequence))
        .cloned()
        .collect()
}

/// Evaluation over traces whose EMF removal is already done; the fast path
/// for refinement, which re-evaluates many models against fixed traces.
pub fn evaluate_prepared(
    prepared: &[PreparedTrace],
    dict: &MessageDictionary,
    model: &FlowModel,
    jobs: usize,
) -> EvaluationResult {
    let acceptor = compile_acceptor(model);
    let jobs = jobs.max(1).min(prepared.len().max(1));

    let evals: Vec<TraceEval> = if jobs <= 1 {
        prepared
            .iter()
            .map(|t| eval_trace(t, dict, &acceptor))
            .collect()
    } else {
        let chunk = prepared.len().div_ceil(jobs);
        std::thread::scope(|scope| {
            let handles: Vec<_> = prepared
                .chunks(chunk)
                .map(|part| {
                    let acceptor = &acceptor;
                    scope.spawn(move || {
                        part.iter()
                            .map(|t| eval_trace(t, dict, acceptor))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("evaluation worker panicked"))
                .collect()
        })
    };

    let mut per_trace_ratios = Vec::with_capacity(evals.len());
    let mut unaccepted_counts: BTreeMap<MsgId, u64> = BTreeMap::new();
    let mut completed_lengths: BTreeMap<usize, u64> = BTreeMap::new();
    let mut unused_edges: BTreeSet<(StateId, MsgId)> =
        acceptor.transitions.keys().copied().collect();
    let mut live_cap_exceeded = false;
    for ev in evals {
        per_trace_ratios.push(ev.ratio);
        for (m, c) in ev.unaccepted {
            *unaccepted_counts.entry(m).or_insert(0) += c;
        }
        for (l, c) in ev.completed {
            *completed_lengths.entry(l).or_insert(0) += c;
        }
        for t in ev.fired {
            unused_edges.remove(&t);
        }
        live_cap_exceeded |= ev.cap_exceeded;
    }
    let acceptance_ratio = if per_trace_ratios.is_empty() {
        0.0
    } else {
        per_trace_ratios.iter().sum::<f64>() / per_trace_ratios.len() as f64
    };
    EvaluationResult {
        acceptance_ratio,
        per_trace_ratios,
        unaccepted_counts,
        unused_edges,
        completed_lengths,
        live_cap_exceeded,
    }
}

/// Output of [`refine`] and [`mine`].
#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub model: FlowModel,
    pub eval: EvaluationResult,
    pub iterations: usize,
    /// True when candidates ran out before the accuracy target was met; the
    /// returned model is the best seen across iterations.
    pub below_threshold: bool,
}

/// Iteratively improves the model: drop paths whose transitions never fire,
/// add the best-scoring candidate containing the most-unaccepted message,
/// re-evaluate. Stops at the accuracy target or when candidates are
/// exhausted, returning the best model seen.
#[allow(clippy::too_many_arguments)]
pub fn refine(
    model: &FlowModel,
    traces: &TraceSet,
    dict: &MessageDictionary,
    graph: &PrunedGraph,
    essential: &EssentialSet,
    emf: Option<&[EssentialFlow]>,
    accuracy: f64,
    max_len: usize,
    max_paths: usize,
    w_essential: f64,
    jobs: usize,
) -> Result<RefineOutcome> {
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(Error::InvalidParameter(format!(
            "accuracy must lie in [0,1], got {accuracy}"
        )));
    }
    let mut candidates: Vec<Path> = enumerate_paths(graph, max_len, max_paths)?
        .paths
        .iter()
        .map(|p| path_score(&p.sequence, graph, essential, w_essential))
        .collect();
    candidates.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.sequence.cmp(&b.sequence))
    });

    let mut model = model.clone();
    let mut best: Option<(FlowModel, EvaluationResult)> = None;
    let mut iterations = 0usize;
    // re-prepare only when the model's EMF subset changes; most iterations
    // add non-essential candidates and reuse the reduced traces
    let mut active_emfs = emf.map(|flows| model_emfs(&model, flows));
    let mut prepared = prepare_traces(traces, active_emfs.as_deref());
    loop {
        if let Some(flows) = emf {
            let subset = model_emfs(&model, flows);
            if active_emfs.as_deref() != Some(&subset[..]) {
                prepared = prepare_traces(traces, Some(&subset));
                active_emfs = Some(subset);
            }
        }
        let eval = evaluate_prepared(&prepared, dict, &model, jobs);
        let better = match &best {
            None => true,
            Some((_, b)) => eval.acceptance_ratio > b.acceptance_ratio,
        };
        if better {
            best = Some((model.clone(), eval.clone()));
        }
        if eval.acceptance_ratio >= accuracy {
            return Ok(RefineOutcome {
                model,
                eval,
                iterations,
                below_threshold: false,
            });
        }
        if candidates.is_empty() {
            break;
        }
        iterations += 1;

        // drop model paths with transitions that never fired
        let acceptor = compile_acceptor(&model);
        model.paths.retain(|p| {
            let mut state = acceptor.q0;
            for &sym in &p.sequence {
                if eval.unused_edges.contains(&(state, sym)) {
                    return false;
                }
                state = match acceptor.successor(state, sym) {
                    Some(next) => next,
                    None => return false,
                };
            }
            true
        });

        // highest unaccepted count, ties to the smallest id
        let target = eval
            .unaccepted_counts
            .iter()
            .max_by(|(ida, ca), (idb, cb)| ca.cmp(cb).then_with(|| idb.cmp(ida)))
            .map(|(&id, _)| id);
        let Some(target) = target else { break };
        let Some(pos) = candidates
            .iter()
            .position(|p| p.sequence.contains(&target))
        else {
            break; // no candidate can explain the worst message
        };
        let path = candidates.remove(pos);
        model.push(path);
    }

    let (model, eval) = best.expect("at least one evaluation ran");
    let below_threshold = eval.acceptance_ratio < accuracy;
    Ok(RefineOutcome {
        model,
        eval,
        iterations,
        below_threshold,
    })
}

/// Tunable parameters of the full pipeline.
#[derive(Debug, Clone)]
pub struct MineConfig {
    pub accuracy: f64,
    pub theta: f64,
    pub max_len: usize,
    pub max_paths: usize,
    pub w_essential: f64,
    pub emf: bool,
    pub jobs: usize,
    pub strategy: SelectionStrategy,
    pub zero_support: ZeroSupportPolicy,
}

impl Default for MineConfig {
    fn default() -> Self {
        MineConfig {
            accuracy: 0.9,
            theta: 0.45,
            max_len: 10,
            max_paths: 100_000,
            w_essential: 1.0,
            emf: true,
            jobs: 1,
            strategy: SelectionStrategy::CoverageFirst,
            zero_support: ZeroSupportPolicy::CountAsZero,
        }
    }
}

/// Everything the pipeline produced, for reporting and export.
#[derive(Debug, Clone)]
pub struct MineOutcome {
    pub model: FlowModel,
    pub eval: EvaluationResult,
    pub base_ar: f64,
    pub iterations: usize,
    pub below_threshold: bool,
    pub graph: CausalityGraph,
    pub pruned: PrunedGraph,
    pub essential: EssentialSet,
    pub emf_flows: Vec<EssentialFlow>,
    pub truncated: bool,
}

/// Runs the whole pipeline: causality graph, statistics, essential
/// causalities, pruning, base model, evaluation, and refinement when the
/// base model misses the accuracy target. Deterministic for fixed inputs.
pub fn mine(traces: &TraceSet, dict: &MessageDictionary, cfg: &MineConfig) -> Result<MineOutcome> {
    if traces.traces.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    if !(0.0..=1.0).contains(&cfg.accuracy) {
        return Err(Error::InvalidParameter(format!(
            "accuracy must lie in [0,1], got {}",
            cfg.accuracy
        )));
    }

    let graph = construct_causality_graph(traces, dict)?;
    let graph = aggregate_statistics_with_policy(traces, &graph, cfg.zero_support);
    let essential = extract_essential(traces, dict);
    let pruned = prune(&graph, cfg.theta, &essential.pairs)?;
    let truncated = enumerate_paths(&pruned, cfg.max_len, cfg.max_paths)?.truncated;
    let base = select_base_model(
        &pruned,
        &essential,
        cfg.max_len,
        cfg.max_paths,
        cfg.w_essential,
        cfg.strategy,
    )?;
    let emf_flows = if cfg.emf {
        derive_flows(&essential, dict, cfg.max_len)
    } else {
        Vec::new()
    };
    let emf = cfg.emf.then_some(emf_flows.as_slice());

    let base_eval = evaluate_with_jobs(traces, dict, &base, emf, cfg.jobs);
    let base_ar = base_eval.acceptance_ratio;
    let outcome = if base_ar >= cfg.accuracy {
        RefineOutcome {
            model: base,
            eval: base_eval,
            iterations: 0,
            below_threshold: false,
        }
    } else {
        refine(
            &base,
            traces,
            dict,
            &pruned,
            &essential,
            emf,
            cfg.accuracy,
            cfg.max_len,
            cfg.max_paths,
            cfg.w_essential,
            cfg.jobs,
        )?
    };

    let _ = causality::topological_sort(&graph);
    Ok(MineOutcome {
        model: outcome.model,
        eval: outcome.eval,
        base_ar,
        iterations: outcome.iterations,
        below_threshold: outcome.below_threshold,
        graph,
        pruned,
        essential,
        emf_flows,
        truncated,
    })
}
