//! Control-flow corridors spanning a data-flow path, and the security
//! mechanisms sitting on them.
//!
//! Between each adjacent pair of data-flow nodes the corridor holds every
//! loop-free control-flow sequence, split at call boundaries since a
//! function is entered at its entry node and left through a return or its
//! end. A condition on a sequence whose operands derive from the segment's
//! overarching variable is a candidate security check; it is aborting when
//! exactly one branch can continue toward the sink and the other leaves
//! with return/exit-style evidence.

use crate::cpg::{AssignValue, Branch, CodePropertyGraph, NodeId, NodeKind};
use crate::frontend::{ExprKind, UnaryOp, VarKey};
use crate::interproc::CallGraph;
use crate::taint::DataFlowPath;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone)]
pub struct CorridorSegment {
    /// Index of the source-side hop of the pair this segment spans.
    pub from_hop: usize,
    pub sequences: Vec<Vec<NodeId>>,
}

#[derive(Debug, Clone)]
pub struct ControlFlowCorridor {
    pub path: DataFlowPath,
    pub segments: Vec<CorridorSegment>,
    pub total_enumerated: usize,
    pub truncated: bool,
}

impl ControlFlowCorridor {
    /// All nodes appearing on any segment sequence.
    pub fn node_set(&self) -> BTreeSet<NodeId> {
        self.segments
            .iter()
            .flat_map(|s| s.sequences.iter())
            .flat_map(|seq| seq.iter().copied())
            .collect()
    }

    /// The shortest sequence per segment, concatenated and deduplicated;
    /// synthetic entry/exit nodes dropped. Segment endpoints coincide with
    /// the data-flow hops, so every hop statement appears exactly once.
    pub fn shortest_concatenation(&self, graph: &CodePropertyGraph) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = Vec::new();
        for seg in &self.segments {
            if let Some(seq) = seg.sequences.iter().min_by_key(|s| s.len()) {
                for &n in seq {
                    if matches!(graph.node(n).kind, NodeKind::Entry | NodeKind::Exit) {
                        continue;
                    }
                    if out.last() != Some(&n) {
                        out.push(n);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardClass {
    AbortingCheck,
    NonAbortingCheck,
    UnrecognizedMechanism,
    Sanitization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortEvidence {
    ReturnStmt,
    ExitCall,
    ErrorValueSet,
    SignalRaise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    MustBeFalseToPass,
    MustBeTrueToPass,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GuardSite {
    pub condition_node: NodeId,
    /// The overarching variable of the segment the condition sits on.
    pub guarded_var: VarKey,
    pub classification: GuardClass,
    pub abort_evidence: BTreeSet<AbortEvidence>,
    pub polarity: Polarity,
    /// The corridor node execution must reach for the flow to continue.
    pub continuation: NodeId,
}

/// Enumerate the control-flow sequences between each adjacent hop pair.
pub fn enumerate_corridor(
    graph: &CodePropertyGraph,
    cg: &CallGraph,
    path: &DataFlowPath,
    limit: usize,
) -> ControlFlowCorridor {
    let mut segments = Vec::new();
    let mut total = 0usize;
    let mut truncated = false;

    for i in 0..path.hops.len().saturating_sub(1) {
        let a = path.hops[i];
        let b = path.hops[i + 1];
        let fa = graph.node(a).function.clone();
        let fb = graph.node(b).function.clone();
        let mut sequences: Vec<Vec<NodeId>> = Vec::new();

        if fa == fb {
            let (paths, t) = graph.cfg_paths_between(a, b, limit);
            truncated |= t;
            sequences.extend(paths);
        } else if calls_into(cg, b, &fa) {
            // Execution leaves fa through its exit and resumes at b.
            if let Some(&exit) = graph.function_exit.get(&fa) {
                let (paths, t) = graph.cfg_paths_between(a, exit, limit);
                truncated |= t;
                sequences.extend(paths);
            } else {
                sequences.push(vec![a]);
            }
            sequences.push(vec![b]);
        } else if calls_into(cg, a, &fb) {
            // Execution enters fb at its entry point.
            sequences.push(vec![a]);
            if let Some(&entry) = graph.function_index.get(&fb) {
                let (paths, t) = graph.cfg_paths_between(entry, b, limit);
                truncated |= t;
                sequences.extend(paths);
            } else {
                sequences.push(vec![b]);
            }
        } else {
            sequences.push(vec![a]);
            sequences.push(vec![b]);
        }
        total += sequences.len();
        segments.push(CorridorSegment { from_hop: i, sequences });
    }

    ControlFlowCorridor { path: path.clone(), segments, total_enumerated: total, truncated }
}

fn calls_into(cg: &CallGraph, call_site: NodeId, callee_fn: &str) -> bool {
    cg.edges.iter().any(|e| e.call_site == call_site && e.callee == callee_fn)
}

/// Condition nodes on the corridor whose operands derive from the segment's
/// overarching variable. Classification is filled by [`classify_guard`].
pub fn find_security_mechanisms(
    graph: &CodePropertyGraph,
    corridor: &ControlFlowCorridor,
) -> Vec<GuardSite> {
    let path = &corridor.path;
    let mut found: BTreeSet<(NodeId, VarKey, NodeId)> = BTreeSet::new();

    for seg in &corridor.segments {
        let Some(var_a) = path.hop_vars.get(seg.from_hop) else { continue };
        let hop_a_fn = &graph.node(path.hops[seg.from_hop]).function;
        let var_b =
            path.hop_vars.get(seg.from_hop + 1).cloned().unwrap_or_else(|| var_a.clone());

        for seq in &seg.sequences {
            if seq.is_empty() {
                continue;
            }
            let seq_fn = &graph.node(seq[0]).function;
            let var = if seq_fn == hop_a_fn { var_a.clone() } else { var_b.clone() };
            let continuation = *seq.last().unwrap();

            // Forward pass tracking data derived from the overarching
            // variable within this sequence.
            let mut derived: BTreeSet<VarKey> = BTreeSet::new();
            derived.insert(var.clone());
            for &n in seq {
                let node = graph.node(n);
                let reads_derived =
                    node.uses.iter().any(|u| derived.iter().any(|d| d.flows_to(u)));
                if node.kind == NodeKind::Condition && reads_derived {
                    found.insert((n, var.clone(), continuation));
                }
                if reads_derived {
                    for (k, _) in node.all_defs() {
                        derived.insert(k.clone());
                    }
                }
            }
        }
    }

    found
        .into_iter()
        .map(|(condition_node, guarded_var, continuation)| GuardSite {
            condition_node,
            guarded_var,
            classification: GuardClass::UnrecognizedMechanism,
            abort_evidence: BTreeSet::new(),
            polarity: Polarity::Unknown,
            continuation,
        })
        .collect()
}

/// Fill in classification, polarity, and abort evidence for a found site.
pub fn classify_guard(graph: &CodePropertyGraph, site: &GuardSite) -> GuardSite {
    let mut out = site.clone();
    let succs = graph.cfg_successors(site.condition_node);
    let t_target = succs.iter().find(|(_, tag)| *tag == Some(Branch::True)).map(|(n, _)| *n);
    let f_target = succs.iter().find(|(_, tag)| *tag == Some(Branch::False)).map(|(n, _)| *n);
    let (Some(t), Some(f)) = (t_target, f_target) else {
        // Switch dispatch or degenerate condition.
        out.classification = GuardClass::UnrecognizedMechanism;
        return out;
    };

    let cont = site.continuation;
    let t_reaches = reaches_avoiding(graph, t, cont, site.condition_node);
    let f_reaches = reaches_avoiding(graph, f, cont, site.condition_node);
    match (t_reaches, f_reaches) {
        (true, true) => {
            out.classification = GuardClass::NonAbortingCheck;
            out.polarity = Polarity::Unknown;
        }
        (true, false) => {
            out.polarity = Polarity::MustBeTrueToPass;
            out.abort_evidence = abort_evidence(graph, f, site.condition_node);
            out.classification = GuardClass::AbortingCheck;
        }
        (false, true) => {
            out.polarity = Polarity::MustBeFalseToPass;
            out.abort_evidence = abort_evidence(graph, t, site.condition_node);
            out.classification = GuardClass::AbortingCheck;
        }
        (false, false) => {
            out.classification = GuardClass::UnrecognizedMechanism;
            out.polarity = Polarity::Unknown;
        }
    }
    if out.classification == GuardClass::AbortingCheck && out.abort_evidence.is_empty() {
        // The classification is tied to observable abort evidence.
        out.classification = GuardClass::UnrecognizedMechanism;
    }
    out
}

/// Reachability along CFG edges without re-entering the condition itself.
fn reaches_avoiding(graph: &CodePropertyGraph, from: NodeId, to: NodeId, avoid: NodeId) -> bool {
    if from == to {
        return true;
    }
    let mut seen = BTreeSet::new();
    let mut stack = vec![from];
    while let Some(n) = stack.pop() {
        if n == to {
            return true;
        }
        if n == avoid || !seen.insert(n) {
            continue;
        }
        for (next, _) in graph.cfg_successors(n) {
            stack.push(*next);
        }
    }
    false
}

/// Evidence that the branch starting at `from` aborts the flow: returns,
/// exit-style calls, error-value stores, or signal raises.
fn abort_evidence(graph: &CodePropertyGraph, from: NodeId, avoid: NodeId) -> BTreeSet<AbortEvidence> {
    let mut evidence = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut stack = vec![from];
    let mut has_return = false;
    let mut reaches_exit = false;
    let mut error_store = false;

    while let Some(n) = stack.pop() {
        if n == avoid || !seen.insert(n) {
            continue;
        }
        let node = graph.node(n);
        match node.kind {
            NodeKind::ReturnStmt => has_return = true,
            NodeKind::Exit => reaches_exit = true,
            _ => {}
        }
        if node.terminal {
            evidence.insert(AbortEvidence::ExitCall);
        }
        for call in &node.calls {
            if let Some(name) = &call.callee {
                if matches!(name.as_str(), "raise" | "longjmp" | "abort") {
                    evidence.insert(AbortEvidence::SignalRaise);
                }
            }
        }
        for a in &node.assigns {
            let negish = match &a.value {
                AssignValue::Expr(e) | AssignValue::Compound(e) => is_negative_constant(e),
                AssignValue::SelfRef => false,
            };
            let named_error = {
                let b = a.lhs.base.to_ascii_lowercase();
                b.contains("err") || b.contains("fail") || b.contains("status")
            };
            if negish || named_error {
                error_store = true;
            }
        }
        for (next, _) in graph.cfg_successors(n) {
            stack.push(*next);
        }
    }

    if has_return || reaches_exit {
        // Falling off the function end is the implicit return.
        evidence.insert(AbortEvidence::ReturnStmt);
        if error_store {
            evidence.insert(AbortEvidence::ErrorValueSet);
        }
    }
    evidence
}

fn is_negative_constant(e: &crate::frontend::Expr) -> bool {
    match &e.kind {
        ExprKind::Unary { op: UnaryOp::Neg, operand } => {
            matches!(operand.kind, ExprKind::IntLit(_))
        }
        ExprKind::IntLit(v) => *v < 0,
        _ => false,
    }
}

/// Null-byte truncation: a store of constant zero into an indexed position
/// of a buffer that the corridor overarches. Recorded, never instrumented.
pub fn detect_sanitizations(
    graph: &CodePropertyGraph,
    corridor: &ControlFlowCorridor,
) -> Vec<GuardSite> {
    let path = &corridor.path;
    let mut found: BTreeSet<(NodeId, VarKey)> = BTreeSet::new();

    for seg in &corridor.segments {
        let Some(var) = path.hop_vars.get(seg.from_hop) else { continue };
        for seq in &seg.sequences {
            for &n in seq {
                let node = graph.node(n);
                for a in &node.assigns {
                    let zero_store = matches!(
                        &a.value,
                        AssignValue::Expr(e) if matches!(e.kind, ExprKind::IntLit(0))
                            || matches!(e.kind, ExprKind::CharLit(0))
                    );
                    if a.indexed && zero_store && a.lhs.flows_to(var) {
                        found.insert((n, a.lhs.clone()));
                    }
                }
            }
        }
    }
    found
        .into_iter()
        .map(|(n, key)| GuardSite {
            condition_node: n,
            guarded_var: key,
            classification: GuardClass::Sanitization,
            abort_evidence: BTreeSet::new(),
            polarity: Polarity::Unknown,
            continuation: n,
        })
        .collect()
}

/// Property check used by tests: the site's condition lies on at least one
/// corridor sequence.
pub fn guard_on_corridor(site: &GuardSite, corridor: &ControlFlowCorridor) -> bool {
    corridor.node_set().contains(&site.condition_node)
}
