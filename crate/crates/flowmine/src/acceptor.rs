//! Prefix-tree finite-state acceptor compiled from a flow model.
//!
//! Paths sharing a prefix share states, so every `(state, symbol)` pair has
//! at most one successor and instance tracking during evaluation stays
//! deterministic.

use std::collections::{BTreeMap, BTreeSet};

use crate::mining::FlowModel;
use crate::model::MsgId;

pub type StateId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowAcceptor {
    pub q0: StateId,
    pub alphabet: BTreeSet<MsgId>,
    pub accepting: BTreeSet<StateId>,
    pub transitions: BTreeMap<(StateId, MsgId), StateId>,
    /// Trie depth of each state; equals the message count consumed to reach it.
    depth: Vec<u32>,
    out_degree: Vec<u32>,
}

impl FlowAcceptor {
    pub fn num_states(&self) -> usize {
        self.depth.len()
    }

    pub fn successor(&self, state: StateId, symbol: MsgId) -> Option<StateId> {
        self.transitions.get(&(state, symbol)).copied()
    }

    /// Outgoing transitions of a state, ascending by symbol.
    pub fn outgoing(&self, state: StateId) -> impl Iterator<Item = (MsgId, StateId)> + '_ {
        self.transitions
            .range((state, MsgId(0))..=(state, MsgId(u32::MAX)))
            .map(|(&(_, sym), &to)| (sym, to))
    }

    pub fn is_accepting(&self, state: StateId) -> bool {
        self.accepting.contains(&state)
    }

    /// A leaf has no outgoing transitions; instances retire there.
    pub fn is_leaf(&self, state: StateId) -> bool {
        self.out_degree[state as usize] == 0
    }

    pub fn depth(&self, state: StateId) -> usize {
        self.depth[state as usize] as usize
    }
}

/// Builds the prefix-tree acceptor. State ids are assigned in insertion
/// order over the model's path list, so compilation is idempotent for a
/// given model.
pub fn compile_acceptor(model: &FlowModel) -> FlowAcceptor {
    let mut transitions: BTreeMap<(StateId, MsgId), StateId> = BTreeMap::new();
    let mut accepting: BTreeSet<StateId> = BTreeSet::new();
    let mut alphabet: BTreeSet<MsgId> = BTreeSet::new();
    let mut depth: Vec<u32> = vec![0];
    let mut out_degree: Vec<u32> = vec![0];

    for path in &model.paths {
        let mut state: StateId = 0;
        for &sym in &path.sequence {
            alphabet.insert(sym);
            state = match transitions.get(&(state, sym)) {
                Some(&next) => next,
                None => {
                    let next = depth.len() as StateId;
                    depth.push(depth[state as usize] + 1);
                    out_degree.push(0);
                    out_degree[state as usize] += 1;
                    transitions.insert((state, sym), next);
                    next
                }
            };
        }
        accepting.insert(state);
    }

    FlowAcceptor {
        q0: 0,
        alphabet,
        accepting,
        transitions,
        depth,
        out_degree,
    }
}
