//! Essential causalities and essential message flow (EMF) removal.
//!
//! A causality is essential for a message instance when exactly one
//! unconsumed earlier message can structurally cause it. Chains of essential
//! causalities from an initial to a terminal message that appear contiguously
//! in a trace are essential message flows; they can be deleted up front and
//! counted as accepted, which shrinks the evaluation workload.

use std::collections::{BTreeMap, BTreeSet};

use crate::causality::Edge;
use crate::model::{MessageDictionary, MsgId, Trace, TraceSet};

/// Cause-effect pairs with an unambiguous structural cause somewhere in the
/// traces.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EssentialSet {
    pub pairs: BTreeSet<Edge>,
}

impl EssentialSet {
    pub fn contains(&self, edge: Edge) -> bool {
        self.pairs.contains(&edge)
    }

    /// Text export: one `cause -> effect` line per pair, ascending.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for &(c, e) in &self.pairs {
            out.push_str(&format!("{c} -> {e}\n"));
        }
        out
    }
}

/// An initial-to-terminal chain whose every link is essential.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EssentialFlow {
    pub sequence: Vec<MsgId>,
}

/// Scans each trace for messages with exactly one structural-cause candidate.
///
/// Every message consumes its nearest unconsumed structural cause, mirroring
/// the edge-support matching discipline; the pair is recorded as essential
/// only when the candidate cause is unique by value. Consuming on every
/// match (not just unique ones) keeps repeated flow instances from shadowing
/// each other's causes.
pub fn extract_essential(traces: &TraceSet, dict: &MessageDictionary) -> EssentialSet {
    let mut pairs = BTreeSet::new();
    for trace in &traces.traces {
        extract_from_trace(trace, dict, &mut pairs);
    }
    EssentialSet { pairs }
}

fn extract_from_trace(trace: &Trace, dict: &MessageDictionary, pairs: &mut BTreeSet<Edge>) {
    let mut consumed = vec![false; trace.events.len()];
    for i in 1..trace.events.len() {
        let effect = trace.events[i];
        let mut values: BTreeSet<MsgId> = BTreeSet::new();
        let mut nearest: Option<usize> = None;
        for (j, &cause) in trace.events[..i].iter().enumerate() {
            if consumed[j] {
                continue;
            }
            if dict.causal_ids(cause, effect) {
                values.insert(cause);
                nearest = Some(j);
            }
        }
        if let Some(j) = nearest {
            consumed[j] = true;
            if values.len() == 1 {
                pairs.insert((trace.events[j], effect));
            }
        }
    }
}

/// Assembles EMFs: chains over essential pairs starting at an initial
/// message, ending at a terminal one, with no interior initial/terminal
/// messages and no repeated message.
pub fn derive_flows(
    essential: &EssentialSet,
    dict: &MessageDictionary,
    max_len: usize,
) -> Vec<EssentialFlow> {
    let mut flows = Vec::new();
    for &root in &dict.initial {
        let mut chain = vec![root];
        walk(essential, dict, max_len, &mut chain, &mut flows);
    }
    // longest first, then ascending sequence, the matching order for removal
    flows.sort_by(|a, b| {
        b.sequence
            .len()
            .cmp(&a.sequence.len())
            .then_with(|| a.sequence.cmp(&b.sequence))
    });
    flows
}

fn walk(
    essential: &EssentialSet,
    dict: &MessageDictionary,
    max_len: usize,
    chain: &mut Vec<MsgId>,
    flows: &mut Vec<EssentialFlow>,
) {
    let last = *chain.last().unwrap();
    for &(c, e) in essential
        .pairs
        .range((last, MsgId(0))..=(last, MsgId(u32::MAX)))
    {
        debug_assert_eq!(c, last);
        if chain.contains(&e) {
            continue;
        }
        if dict.is_terminal(e) {
            let mut seq = chain.clone();
            seq.push(e);
            flows.push(EssentialFlow { sequence: seq });
            continue;
        }
        if dict.is_initial(e) || chain.len() + 1 >= max_len {
            continue;
        }
        chain.push(e);
        walk(essential, dict, max_len, chain, flows);
        chain.pop();
    }
}

/// Deletes every contiguous occurrence of the given flows from the trace.
///
/// Flows are tried longest first; matches are removed left to right and the
/// scan repeats until no flow matches. Returns the reduced trace and how
/// many messages were deleted; `original len = reduced len + removed`.
pub fn remove_emfs(trace: &Trace, flows: &[EssentialFlow]) -> (Trace, usize) {
    let (reduced, removed, _) = remove_emfs_counting(trace, flows);
    (reduced, removed)
}

/// Like [`remove_emfs`] but also reports how many flow instances of each
/// length were deleted, for the sequence-length histogram.
pub fn remove_emfs_counting(
    trace: &Trace,
    flows: &[EssentialFlow],
) -> (Trace, usize, BTreeMap<usize, u64>) {
    let mut events = trace.events.clone();
    let mut ordered: Vec<&EssentialFlow> = flows.iter().collect();
    ordered.sort_by(|a, b| {
        b.sequence
            .len()
            .cmp(&a.sequence.len())
            .then_with(|| a.sequence.cmp(&b.sequence))
    });
    let mut removed = 0usize;
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    let mut changed = true;
    while changed {
        changed = false;
        for flow in &ordered {
            let pat = &flow.sequence;
            if pat.is_empty() || pat.len() > events.len() {
                continue;
            }
            let mut pos = 0;
            while pos + pat.len() <= events.len() {
                if events[pos..pos + pat.len()] == pat[..] {
                    events.drain(pos..pos + pat.len());
                    removed += pat.len();
                    *counts.entry(pat.len()).or_insert(0) += 1;
                    changed = true;
                    // a new match may have formed just before the cut
                    pos = pos.saturating_sub(pat.len());
                } else {
                    pos += 1;
                }
            }
        }
    }
    (Trace::new(events), removed, counts)
}
