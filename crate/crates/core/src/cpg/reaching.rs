//! Forward may-analysis computing reaching definitions per function, from
//! which the DfgReaches edges are derived.
//!
//! A definition is (node, key). Definite whole-object writes kill other
//! definitions of the same key and of keys they cover (writing a struct
//! rewrites its members); weak and maybe writes kill nothing.

use super::{CodePropertyGraph, EdgeKind, NodeId};
use crate::frontend::VarKey;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

type DefSet = BTreeSet<(NodeId, VarKey)>;

pub(super) fn compute_function_dfg(g: &mut CodePropertyGraph, function: &str) {
    let Some(ids) = g.function_nodes.get(function).cloned() else { return };
    let Some(&entry) = g.function_index.get(function) else { return };

    let mut out_sets: BTreeMap<NodeId, DefSet> = BTreeMap::new();
    let mut in_sets: BTreeMap<NodeId, DefSet> = BTreeMap::new();
    for &id in &ids {
        out_sets.insert(id, DefSet::new());
        in_sets.insert(id, DefSet::new());
    }

    let mut worklist: VecDeque<NodeId> = ids.iter().copied().collect();
    let mut queued: BTreeSet<NodeId> = ids.iter().copied().collect();
    let _ = entry;

    while let Some(id) = worklist.pop_front() {
        queued.remove(&id);
        let mut input = DefSet::new();
        for &p in g.cfg_predecessors(id) {
            if let Some(s) = out_sets.get(&p) {
                input.extend(s.iter().cloned());
            }
        }

        let node = g.node(id);
        let kills: Vec<VarKey> = node.killing_defs().cloned().collect();
        let mut output: DefSet = input
            .iter()
            .filter(|(_, k)| !kills.iter().any(|killer| covers(killer, k)))
            .cloned()
            .collect();
        for (k, _) in node.all_defs() {
            output.insert((id, k.clone()));
        }

        if in_sets.get(&id) != Some(&input) || out_sets.get(&id) != Some(&output) {
            in_sets.insert(id, input);
            let changed = out_sets.get(&id) != Some(&output);
            out_sets.insert(id, output);
            if changed {
                for (succ, _) in g.cfg_successors(id).to_vec() {
                    if queued.insert(succ) {
                        worklist.push_back(succ);
                    }
                }
            }
        }
    }

    // Derive one DfgReaches edge per (reaching def, matching use).
    let mut new_edges: Vec<(NodeId, NodeId, VarKey)> = Vec::new();
    for &id in &ids {
        let node = g.node(id);
        if node.uses.is_empty() {
            continue;
        }
        let input = &in_sets[&id];
        for use_key in &node.uses {
            for (def_node, def_key) in input {
                if def_key.flows_to(use_key) {
                    new_edges.push((*def_node, id, use_key.clone()));
                }
            }
        }
    }
    new_edges.sort();
    new_edges.dedup();
    for (src, dst, var) in new_edges {
        g.add_edge(EdgeKind::DfgReaches(var), src, dst);
    }
}

/// A definite write of `killer` kills a definition of `victim` when the
/// killer names the same key or a prefix of it (whole-object overwrite).
fn covers(killer: &VarKey, victim: &VarKey) -> bool {
    killer.base == victim.base
        && killer.chain.len() <= victim.chain.len()
        && victim.chain[..killer.chain.len()] == killer.chain[..]
}
