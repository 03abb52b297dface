//! Interprocedural enablement: call graph, analysis order, per-function
//! parameter-modification summaries, function-pointer over-approximation,
//! and external-library summaries loaded from a file.
//!
//! Functions are summarized callees-first so a caller's data flow can be
//! augmented with the effects of its subfunctions. Static analysis cannot
//! always decide whether a parameter is modified, so summaries carry a
//! `Maybe` state between `Yes` and `No`.

mod summary_file;

pub use summary_file::{parse_summaries, LoadedSummaries, SummaryParseError};

use crate::cpg::{AssignValue, CodePropertyGraph, NodeId, NodeKind};
use crate::frontend::{arg_binding_key, collect_calls, Expr, ExprKind, UnaryOp, VarKey};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// The bundled standard-library summaries.
pub const DEFAULT_SUMMARIES: &str = include_str!("../../../../summaries/glibc.summ");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum ParamMod {
    Yes,
    #[default]
    No,
    Maybe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    File,
    Network,
    Argv,
    Stdin,
    Env,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::File => "file",
            SourceKind::Network => "network",
            SourceKind::Argv => "argv",
            SourceKind::Stdin => "stdin",
            SourceKind::Env => "env",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VulnClass {
    BufferLength,
    FormatString,
    AllocSize,
    OutboundLeak,
}

impl VulnClass {
    pub fn as_str(self) -> &'static str {
        match self {
            VulnClass::BufferLength => "buffer_length",
            VulnClass::FormatString => "format_string",
            VulnClass::AllocSize => "alloc_size",
            VulnClass::OutboundLeak => "outbound_leak",
        }
    }

    pub fn parse(s: &str) -> Option<VulnClass> {
        match s {
            "buffer_length" => Some(VulnClass::BufferLength),
            "format_string" => Some(VulnClass::FormatString),
            "alloc_size" => Some(VulnClass::AllocSize),
            "outbound_leak" => Some(VulnClass::OutboundLeak),
            _ => None,
        }
    }
}

/// Which value slot of a call carries something: an argument or the return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArgSlot {
    Param(usize),
    ReturnValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransferFrom {
    Param(usize),
    ReturnValue,
}

/// Behavior of arguments past the declared parameter list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariadicSpec {
    pub modified: ParamMod,
    pub source: Option<SourceKind>,
    pub sink: Option<VulnClass>,
    pub transfer_to: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummaryOrigin {
    /// Derived by analyzing the function body.
    Internal,
    /// Loaded from a summary file; never overwritten by analysis.
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSummary {
    pub name: String,
    pub param_modified: Vec<ParamMod>,
    /// Data moved from one argument into another (`to` gets `from`'s data).
    pub param_transfers: Vec<(TransferFrom, usize)>,
    /// Parameter indices whose data flows into the return value.
    pub returns_param_data: BTreeSet<usize>,
    /// Slots this function fills with user-controlled data.
    pub sources: Vec<(ArgSlot, SourceKind)>,
    /// (sensitive parameter index, vulnerability class) pairs.
    pub sink_specs: Vec<(usize, VulnClass)>,
    pub variadic: Option<VariadicSpec>,
    /// Calls never return (exit-style).
    pub terminal: bool,
    pub origin: SummaryOrigin,
}

impl FunctionSummary {
    pub fn external(name: &str) -> Self {
        FunctionSummary {
            name: name.to_string(),
            param_modified: Vec::new(),
            param_transfers: Vec::new(),
            returns_param_data: BTreeSet::new(),
            sources: Vec::new(),
            sink_specs: Vec::new(),
            variadic: None,
            terminal: false,
            origin: SummaryOrigin::External,
        }
    }

    pub fn internal(name: &str, param_count: usize) -> Self {
        FunctionSummary {
            name: name.to_string(),
            param_modified: vec![ParamMod::No; param_count],
            param_transfers: Vec::new(),
            returns_param_data: BTreeSet::new(),
            sources: Vec::new(),
            sink_specs: Vec::new(),
            variadic: None,
            terminal: false,
            origin: SummaryOrigin::Internal,
        }
    }

    /// Modification status of argument position `i`, counting the variadic
    /// tail when the declared list is shorter.
    pub fn modified_at(&self, i: usize) -> ParamMod {
        if i < self.param_modified.len() {
            self.param_modified[i]
        } else if let Some(v) = &self.variadic {
            v.modified
        } else {
            ParamMod::No
        }
    }

    /// Source kind controlling argument position `i`, if any.
    pub fn source_at(&self, i: usize) -> Option<SourceKind> {
        for (slot, kind) in &self.sources {
            if *slot == ArgSlot::Param(i) {
                return Some(*kind);
            }
        }
        if i >= self.param_modified.len() {
            if let Some(v) = &self.variadic {
                return v.source;
            }
        }
        None
    }

    pub fn return_source(&self) -> Option<SourceKind> {
        self.sources
            .iter()
            .find_map(|(slot, kind)| (*slot == ArgSlot::ReturnValue).then_some(*kind))
    }
}

/// Read external summaries from a file. Duplicates within one file: last
/// wins with a warning.
pub fn load_external_summaries(path: &Path) -> Result<LoadedSummaries, SummaryParseError> {
    let text = std::fs::read_to_string(path).map_err(|e| SummaryParseError {
        line: 0,
        message: format!("cannot read {}: {}", path.display(), e),
    })?;
    parse_summaries(&text)
}

/// The bundled default summaries, parsed. The bundled file is covered by the
/// test suite, so this cannot fail at runtime.
pub fn default_summaries() -> BTreeMap<String, FunctionSummary> {
    parse_summaries(DEFAULT_SUMMARIES).expect("bundled summaries parse").map
}

// ---------------------------------------------------------------------
// Call graph
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CallEdge {
    pub caller: String,
    pub callee: String,
    /// Call-site node in the CPG; synthetic for generated test graphs.
    pub call_site: NodeId,
    /// The callee has no body in the corpus.
    pub external: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrokenEdge {
    pub caller: String,
    pub callee: String,
    /// Members of the strongly connected component at break time.
    pub scc: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct CallGraph {
    /// Every function name, with or without a body.
    pub nodes: BTreeSet<String>,
    /// Names defined in the corpus.
    pub corpus: BTreeSet<String>,
    pub edges: Vec<CallEdge>,
    pub broken_edges: Vec<BrokenEdge>,
}

impl CallGraph {
    /// Build a synthetic call graph from (caller, callee) pairs; every name
    /// is treated as a corpus function. Used by property tests.
    pub fn from_edges(pairs: &[(&str, &str)]) -> CallGraph {
        let mut cg = CallGraph::default();
        for (i, (a, b)) in pairs.iter().enumerate() {
            cg.nodes.insert(a.to_string());
            cg.nodes.insert(b.to_string());
            cg.corpus.insert(a.to_string());
            cg.corpus.insert(b.to_string());
            cg.edges.push(CallEdge {
                caller: a.to_string(),
                callee: b.to_string(),
                call_site: NodeId(i as u32),
                external: false,
            });
        }
        cg.break_cycles();
        cg
    }

    /// Total number of call sites in a function's body.
    pub fn call_count(&self, name: &str) -> usize {
        self.edges.iter().filter(|e| e.caller == name).count()
    }

    /// Distinct caller-to-callee dependencies minus the broken ones.
    pub fn dependency_pairs(&self) -> BTreeSet<(String, String)> {
        let broken: BTreeSet<(String, String)> =
            self.broken_edges.iter().map(|b| (b.caller.clone(), b.callee.clone())).collect();
        self.edges
            .iter()
            .map(|e| (e.caller.clone(), e.callee.clone()))
            .filter(|p| !broken.contains(p))
            .collect()
    }

    /// Remove dependency edges until the graph is acyclic. Within each
    /// strongly connected component the member making the fewest calls
    /// (ties: lexicographic) loses one outgoing in-component edge at a time.
    pub fn break_cycles(&mut self) {
        loop {
            let pairs = self.dependency_pairs();
            let sccs = strongly_connected_components(&self.nodes, &pairs);
            let mut broke_any = false;
            for scc in sccs {
                let is_cycle = scc.len() > 1
                    || (scc.len() == 1 && pairs.contains(&(scc[0].clone(), scc[0].clone())));
                if !is_cycle {
                    continue;
                }
                let member = scc
                    .iter()
                    .min_by_key(|name| (self.call_count(name), (*name).clone()))
                    .unwrap()
                    .clone();
                let target = scc
                    .iter()
                    .filter(|callee| pairs.contains(&(member.clone(), (*callee).clone())))
                    .min()
                    .cloned();
                if let Some(target) = target {
                    self.broken_edges.push(BrokenEdge {
                        caller: member,
                        callee: target,
                        scc: scc.clone(),
                    });
                    broke_any = true;
                }
            }
            if !broke_any {
                return;
            }
        }
    }
}

/// Tarjan's algorithm, iterative, deterministic over sorted names.
fn strongly_connected_components(
    nodes: &BTreeSet<String>,
    pairs: &BTreeSet<(String, String)>,
) -> Vec<Vec<String>> {
    let names: Vec<&String> = nodes.iter().collect();
    let index_of: BTreeMap<&String, usize> =
        names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); names.len()];
    for (a, b) in pairs {
        if let (Some(&i), Some(&j)) = (index_of.get(a), index_of.get(b)) {
            succs[i].push(j);
        }
    }
    for s in &mut succs {
        s.sort_unstable();
        s.dedup();
    }

    let n = names.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut result: Vec<Vec<String>> = Vec::new();

    for start in 0..n {
        if index[start] != usize::MAX {
            continue;
        }
        let mut call_stack: Vec<(usize, usize)> = vec![(start, 0)];
        while let Some(frame) = call_stack.last_mut() {
            let (v, si) = (frame.0, frame.1);
            if si == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if si < succs[v].len() {
                frame.1 += 1;
                let w = succs[v][si];
                if index[w] == usize::MAX {
                    call_stack.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(names[w].clone());
                        if w == v {
                            break;
                        }
                    }
                    comp.sort();
                    result.push(comp);
                }
                call_stack.pop();
                if let Some(parent) = call_stack.last() {
                    let p = parent.0;
                    low[p] = low[p].min(low[v]);
                }
            }
        }
    }
    result
}

/// Resolve direct calls by name and indirect calls by over-approximation,
/// then break cycles so the graph is usable for ordering.
pub fn build_call_graph(graph: &CodePropertyGraph) -> CallGraph {
    let mut cg = CallGraph {
        corpus: graph.function_index.keys().cloned().collect(),
        ..CallGraph::default()
    };
    cg.nodes = cg.corpus.clone();
    let fp = resolve_function_pointers(graph);

    for node in &graph.nodes {
        for call in &node.calls {
            if let Some(callee) = &call.callee {
                let external = !cg.corpus.contains(callee);
                cg.nodes.insert(callee.clone());
                cg.edges.push(CallEdge {
                    caller: node.function.clone(),
                    callee: callee.clone(),
                    call_site: node.id,
                    external,
                });
            } else {
                for candidate in fp.get(&node.id).into_iter().flatten() {
                    cg.edges.push(CallEdge {
                        caller: node.function.clone(),
                        callee: candidate.clone(),
                        call_site: node.id,
                        external: false,
                    });
                }
            }
        }
    }
    cg.break_cycles();
    cg
}

/// Candidate callees for every indirect call site: any corpus function whose
/// name is taken (assigned, passed, or stored) anywhere in the corpus.
pub fn resolve_function_pointers(graph: &CodePropertyGraph) -> BTreeMap<NodeId, BTreeSet<String>> {
    let mut out = BTreeMap::new();
    let candidates = graph.address_taken.clone();
    for node in &graph.nodes {
        if node.calls.iter().any(|c| c.indirect) {
            out.insert(node.id, candidates.clone());
        }
    }
    out
}

/// Callee-before-caller order over all call-graph nodes; externals come out
/// first since they call nothing. Ties break lexicographically.
pub fn topological_order(cg: &CallGraph) -> Vec<String> {
    let pairs = cg.dependency_pairs();
    let mut remaining: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut callers_of: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for n in &cg.nodes {
        remaining.insert(n.clone(), BTreeSet::new());
    }
    for (a, b) in &pairs {
        if a == b {
            continue;
        }
        remaining.get_mut(a).unwrap().insert(b.clone());
        callers_of.entry(b.clone()).or_default().insert(a.clone());
    }

    let mut emitted: BTreeSet<String> = BTreeSet::new();
    let mut ready: BTreeSet<String> = remaining
        .iter()
        .filter(|(_, deps)| deps.is_empty())
        .map(|(n, _)| n.clone())
        .collect();
    let mut out = Vec::new();
    while let Some(next) = ready.iter().next().cloned() {
        ready.remove(&next);
        emitted.insert(next.clone());
        out.push(next.clone());
        for caller in callers_of.get(&next).cloned().unwrap_or_default() {
            if let Some(deps) = remaining.get_mut(&caller) {
                deps.remove(&next);
                if deps.is_empty() && !emitted.contains(&caller) {
                    ready.insert(caller);
                }
            }
        }
    }
    for (n, _) in remaining {
        if !emitted.contains(&n) {
            out.push(n);
        }
    }
    out
}

// ---------------------------------------------------------------------
// Parameter summarization and data-flow augmentation
// ---------------------------------------------------------------------

#[derive(Debug, Default)]
pub struct Summaries {
    pub map: BTreeMap<String, FunctionSummary>,
    pub warnings: Vec<String>,
}

impl Summaries {
    pub fn get(&self, name: &str) -> Option<&FunctionSummary> {
        self.map.get(name)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum MaybeOrigin {
    /// From an external summary or an unknown callee: counts toward the
    /// caller's own parameter status.
    ExternalOrUnknown,
    /// From a derived summary of a corpus function: augments the data flow
    /// but does not cascade into the caller's parameter status.
    Internal,
}

/// Process functions in topological order: augment each caller's data flow
/// with callee effects, then derive the caller's own summary. Functions in
/// broken cycles see conservative defaults on the first pass and are
/// refined once afterwards.
pub fn summarize_parameters(
    graph: &mut CodePropertyGraph,
    cg: &CallGraph,
    order: &[String],
    externals: &BTreeMap<String, FunctionSummary>,
) -> Summaries {
    let fp = resolve_function_pointers(graph);
    let mut summaries = Summaries::default();
    for (name, s) in externals {
        summaries.map.insert(name.clone(), s.clone());
    }

    let mut needs_refinement: Vec<String> = Vec::new();
    let corpus_order: Vec<String> =
        order.iter().filter(|n| cg.corpus.contains(*n)).cloned().collect();

    for name in &corpus_order {
        if process_function(graph, &fp, &mut summaries, name) {
            needs_refinement.push(name.clone());
        }
    }
    for name in &needs_refinement {
        process_function(graph, &fp, &mut summaries, name);
    }
    summaries.warnings.sort();
    summaries.warnings.dedup();
    summaries
}

/// Augment one function's DFG from callee summaries and derive its summary.
/// Returns true when a missing summary forced a conservative default.
fn process_function(
    graph: &mut CodePropertyGraph,
    fp: &BTreeMap<NodeId, BTreeSet<String>>,
    summaries: &mut Summaries,
    name: &str,
) -> bool {
    let mut used_default = false;
    let mut maybe_origins: BTreeMap<(NodeId, VarKey), MaybeOrigin> = BTreeMap::new();

    // --- Augmentation ---------------------------------------------------
    let node_ids = graph.function_nodes.get(name).cloned().unwrap_or_default();
    for &id in &node_ids {
        let calls = graph.node(id).calls.clone();
        if calls.is_empty() {
            continue;
        }
        let mut aug_defs: Vec<VarKey> = Vec::new();
        let mut aug_weak: Vec<VarKey> = Vec::new();
        let mut aug_maybe: Vec<(VarKey, MaybeOrigin)> = Vec::new();
        let mut resolved: Vec<VarKey> = Vec::new();

        for call in &calls {
            match callee_effect(summaries, fp, id, call, &mut used_default) {
                CalleeEffect::Known { summary_mods, external } => {
                    for (k, arg) in call.args.iter().enumerate() {
                        let Some((key, addr_of)) = arg_key_and_addr(arg) else { continue };
                        if addr_of {
                            resolved.push(key.clone());
                        }
                        match summary_mods.get(k).copied().unwrap_or(ParamMod::No) {
                            ParamMod::Yes if addr_of => aug_defs.push(key),
                            ParamMod::Yes => aug_weak.push(key),
                            ParamMod::Maybe => aug_maybe.push((
                                key,
                                if external {
                                    MaybeOrigin::ExternalOrUnknown
                                } else {
                                    MaybeOrigin::Internal
                                },
                            )),
                            ParamMod::No => {}
                        }
                    }
                }
                CalleeEffect::Unknown => {
                    for arg in &call.args {
                        if let Some((key, _)) = arg_key_and_addr(arg) {
                            aug_maybe.push((key, MaybeOrigin::ExternalOrUnknown));
                        }
                    }
                }
            }
        }

        let node = graph.node_mut(id);
        node.aug_defs.clear();
        node.aug_weak_defs.clear();
        node.aug_maybe_defs.clear();
        node.resolved_maybe.clear();
        node.aug_defs.extend(aug_defs);
        node.aug_weak_defs.extend(aug_weak);
        for (k, origin) in aug_maybe {
            node.aug_maybe_defs.insert(k.clone());
            maybe_origins.insert((id, k), origin);
        }
        // A known summary supersedes the conservative address-of marking
        // from graph construction.
        node.resolved_maybe.extend(resolved);
    }
    graph.recompute_dfg(name);

    // --- Derive this function's summary ---------------------------------
    let Some(meta) = graph.fn_meta.get(name).cloned() else { return used_default };
    let params: Vec<String> = meta.params.iter().map(|(n, _)| n.clone()).collect();
    let mut summary = FunctionSummary::internal(name, params.len());

    for (i, pname) in params.iter().enumerate() {
        if pname.is_empty() {
            continue;
        }
        let mut definite_nodes: Vec<NodeId> = Vec::new();
        let mut any_event = false;
        for &id in &node_ids {
            let node = graph.node(id);
            let writes_definitely =
                node.assigns.iter().any(|a| a.weak && &a.lhs.base == pname)
                    || node
                        .aug_defs
                        .iter()
                        .chain(node.aug_weak_defs.iter())
                        .any(|k| &k.base == pname);
            if writes_definitely {
                definite_nodes.push(id);
                any_event = true;
                continue;
            }
            let maybe_hit = node.aug_maybe_defs.iter().any(|k| {
                &k.base == pname
                    && maybe_origins.get(&(id, k.clone())).copied() != Some(MaybeOrigin::Internal)
            }) || node
                .maybe_defs
                .iter()
                .any(|k| &k.base == pname && !node.resolved_maybe.contains(k));
            if maybe_hit {
                any_event = true;
            }
        }
        summary.param_modified[i] =
            if !definite_nodes.is_empty() && write_on_all_paths(graph, name, &definite_nodes) {
                ParamMod::Yes
            } else if any_event {
                ParamMod::Maybe
            } else {
                ParamMod::No
            };
    }

    // Which parameters feed the return value.
    let return_ids = graph.function_returns.get(name).cloned().unwrap_or_default();
    for rid in &return_ids {
        let ret_expr = graph.node(*rid).ret_expr.clone();
        if let Some(e) = ret_expr {
            let origins = param_origins_of_expr(graph, summaries, name, *rid, &e);
            summary.returns_param_data.extend(origins);
        }
    }

    // Parameter-to-parameter transfers: a write through parameter `j` whose
    // value originates in parameter `i` moves i's data into j.
    for &id in &node_ids {
        let node = graph.node(id);
        let records: Vec<(VarKey, Expr)> = node
            .assigns
            .iter()
            .filter(|a| a.weak && params.contains(&a.lhs.base))
            .filter_map(|a| match &a.value {
                AssignValue::Expr(e) | AssignValue::Compound(e) => Some((a.lhs.clone(), e.clone())),
                AssignValue::SelfRef => None,
            })
            .collect();
        for (lhs, rhs) in records {
            let j = params.iter().position(|p| p == &lhs.base).unwrap();
            for i in param_origins_of_expr(graph, summaries, name, id, &rhs) {
                if i != j && !summary.param_transfers.contains(&(TransferFrom::Param(i), j)) {
                    summary.param_transfers.push((TransferFrom::Param(i), j));
                }
            }
        }
        let calls = graph.node(id).calls.clone();
        for call in &calls {
            let Some(callee) = &call.callee else { continue };
            let Some(cs) = summaries.map.get(callee).cloned() else { continue };
            for (from, to) in &cs.param_transfers {
                let TransferFrom::Param(from_idx) = from else { continue };
                let (Some(src_arg), Some(dst_arg)) = (call.args.get(*from_idx), call.args.get(*to))
                else {
                    continue;
                };
                let Some(dst_key) = arg_binding_key(dst_arg) else { continue };
                let Some(j) = params.iter().position(|p| p == &dst_key.base) else { continue };
                for i in param_origins_of_expr(graph, summaries, name, id, src_arg) {
                    if i != j && !summary.param_transfers.contains(&(TransferFrom::Param(i), j)) {
                        summary.param_transfers.push((TransferFrom::Param(i), j));
                    }
                }
            }
        }
    }
    summary.param_transfers.sort_by_key(|(f, t)| {
        (
            match f {
                TransferFrom::Param(i) => *i as i64,
                TransferFrom::ReturnValue => -1,
            },
            *t,
        )
    });

    summaries.map.insert(name.to_string(), summary);
    used_default
}

enum CalleeEffect {
    Known { summary_mods: Vec<ParamMod>, external: bool },
    Unknown,
}

fn callee_effect(
    summaries: &mut Summaries,
    fp: &BTreeMap<NodeId, BTreeSet<String>>,
    node: NodeId,
    call: &crate::cpg::CallInfo,
    used_default: &mut bool,
) -> CalleeEffect {
    let argc = call.args.len();
    match &call.callee {
        Some(name) => match summaries.map.get(name) {
            Some(s) => CalleeEffect::Known {
                summary_mods: (0..argc).map(|i| s.modified_at(i)).collect(),
                external: s.origin == SummaryOrigin::External,
            },
            None => {
                *used_default = true;
                summaries.warnings.push(format!(
                    "no summary for `{}`; treating arguments as maybe-modified",
                    name
                ));
                CalleeEffect::Unknown
            }
        },
        None => {
            let candidates = fp.get(&node).cloned().unwrap_or_default();
            if candidates.is_empty() {
                summaries.warnings.push(
                    "indirect call with empty candidate set and no external summary; \
                     treating arguments as maybe-modified"
                        .to_string(),
                );
                return CalleeEffect::Unknown;
            }
            let mut merged: Option<Vec<ParamMod>> = None;
            let mut any_missing = false;
            for cand in &candidates {
                match summaries.map.get(cand) {
                    Some(s) => {
                        let mods: Vec<ParamMod> = (0..argc).map(|i| s.modified_at(i)).collect();
                        merged = Some(match merged {
                            None => mods,
                            Some(prev) => prev
                                .into_iter()
                                .zip(mods)
                                .map(|(a, b)| if a == b { a } else { ParamMod::Maybe })
                                .collect(),
                        });
                    }
                    None => any_missing = true,
                }
            }
            if any_missing {
                *used_default = true;
            }
            match merged {
                Some(mods) if !any_missing => {
                    CalleeEffect::Known { summary_mods: mods, external: false }
                }
                _ => CalleeEffect::Unknown,
            }
        }
    }
}

/// True when every entry-to-exit path passes through one of `nodes`.
fn write_on_all_paths(graph: &CodePropertyGraph, function: &str, nodes: &[NodeId]) -> bool {
    let Some(&entry) = graph.function_index.get(function) else { return false };
    let Some(&exit) = graph.function_exit.get(function) else { return false };
    let blocked: BTreeSet<NodeId> = nodes.iter().copied().collect();
    if blocked.contains(&entry) || blocked.contains(&exit) {
        return true;
    }
    let mut seen = BTreeSet::new();
    let mut stack = vec![entry];
    while let Some(n) = stack.pop() {
        if n == exit {
            return false;
        }
        if !seen.insert(n) || blocked.contains(&n) {
            continue;
        }
        for (next, _) in graph.cfg_successors(n) {
            if !blocked.contains(next) {
                stack.push(*next);
            }
        }
    }
    true
}

/// Parameter indices of `function` whose data can feed `expr` evaluated at
/// `node`, following reaching definitions, assignments, and call transfers
/// within this one function.
pub(crate) fn param_origins_of_expr(
    graph: &CodePropertyGraph,
    summaries: &Summaries,
    function: &str,
    node: NodeId,
    expr: &Expr,
) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let mut visited: BTreeSet<(NodeId, VarKey)> = BTreeSet::new();
    let mut stack: Vec<(NodeId, VarKey)> = Vec::new();
    seed_expr_items(graph, summaries, function, node, expr, &mut stack);

    while let Some((n, key)) = stack.pop() {
        if !visited.insert((n, key.clone())) {
            continue;
        }
        let nd = graph.node(n);
        if nd.kind == NodeKind::Parameter && nd.param_name.as_deref() == Some(key.base.as_str()) {
            if let Some(i) = nd.param_index {
                out.insert(i);
            }
            continue;
        }
        let mut matched = false;
        for a in nd.assigns.clone() {
            if !a.lhs.flows_to(&key) {
                continue;
            }
            matched = true;
            match &a.value {
                AssignValue::Expr(e) => seed_expr_items(graph, summaries, function, n, e, &mut stack),
                AssignValue::Compound(e) => {
                    seed_expr_items(graph, summaries, function, n, e, &mut stack);
                    push_reaching(graph, n, &key, &mut stack);
                }
                AssignValue::SelfRef => push_reaching(graph, n, &key, &mut stack),
            }
        }
        for call in nd.calls.clone() {
            for (k, arg) in call.args.iter().enumerate() {
                let Some(arg_key) = arg_binding_key(arg) else { continue };
                if !arg_key.flows_to(&key) {
                    continue;
                }
                match call.callee.as_deref().and_then(|c| summaries.map.get(c)) {
                    Some(cs) => {
                        for (from, to) in &cs.param_transfers {
                            if *to != k {
                                continue;
                            }
                            if let TransferFrom::Param(from_idx) = from {
                                if let Some(src) = call.args.get(*from_idx) {
                                    matched = true;
                                    seed_expr_items(graph, summaries, function, n, src, &mut stack);
                                }
                            }
                        }
                    }
                    None => {
                        matched = true;
                        for other in &call.args {
                            seed_expr_items(graph, summaries, function, n, other, &mut stack);
                        }
                    }
                }
            }
        }
        if !matched {
            push_reaching(graph, n, &key, &mut stack);
        }
    }
    out
}

fn push_reaching(
    graph: &CodePropertyGraph,
    node: NodeId,
    key: &VarKey,
    stack: &mut Vec<(NodeId, VarKey)>,
) {
    for (pred, var) in graph.dfg_into(node) {
        if var == key {
            stack.push((*pred, var.clone()));
        }
    }
}

/// Push the definition items feeding `expr` at `node`: reaching definitions
/// of its variables plus call-return transfers.
fn seed_expr_items(
    graph: &CodePropertyGraph,
    summaries: &Summaries,
    function: &str,
    node: NodeId,
    expr: &Expr,
    stack: &mut Vec<(NodeId, VarKey)>,
) {
    let nd = graph.node(node);
    let mut vars = Vec::new();
    let known = |name: &str| {
        graph.function_index.contains_key(name)
            || !graph
                .fn_meta
                .get(function)
                .map(|m| m.declared_names.iter().any(|d| d == name))
                .unwrap_or(false)
    };
    crate::frontend::collect_read_keys(expr, &known, &mut vars);
    for v in vars {
        if nd.kind == NodeKind::Parameter && nd.param_name.as_deref() == Some(v.base.as_str()) {
            stack.push((node, v.clone()));
            continue;
        }
        push_reaching(graph, node, &v, stack);
    }
    let mut calls = Vec::new();
    collect_calls(expr, &mut calls);
    for c in calls {
        let ExprKind::Call { callee, args } = &c.kind else { continue };
        let callee_name = match &callee.kind {
            ExprKind::Ident(n) => Some(n.clone()),
            _ => None,
        };
        match callee_name.as_deref().and_then(|n| summaries.map.get(n)) {
            Some(cs) => {
                for i in &cs.returns_param_data {
                    if let Some(arg) = args.get(*i) {
                        seed_expr_items(graph, summaries, function, node, arg, stack);
                    }
                }
            }
            None => {
                if let Some(name) = callee_name.as_deref() {
                    if graph.function_index.contains_key(name) {
                        continue;
                    }
                }
                for arg in args {
                    seed_expr_items(graph, summaries, function, node, arg, stack);
                }
            }
        }
    }
}

/// The argument's bound variable plus whether it was passed by address-of.
pub(crate) fn arg_key_and_addr(arg: &Expr) -> Option<(VarKey, bool)> {
    match &arg.kind {
        ExprKind::Unary { op: UnaryOp::AddrOf, operand } => {
            crate::frontend::lvalue_key(operand).map(|(k, _)| (k, true))
        }
        ExprKind::Cast { operand, .. } => arg_key_and_addr(operand),
        _ => crate::frontend::lvalue_key(arg).map(|(k, _)| (k, false)),
    }
}
