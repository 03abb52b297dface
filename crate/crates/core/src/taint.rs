//! Sensitive-sink discovery and backward tracing to user-controlled sources.
//!
//! Tracing runs a breadth-first search backward from a sink's sensitive
//! variable over the definition tree: each visited (node, variable) item is
//! expanded according to how the node produced the value (increment,
//! arithmetic right-hand side, call return, call-argument modification, or
//! parameter binding), renaming the tracked variable across call boundaries.
//! Expansion of an already-visited item is skipped but its tree edge is
//! kept, so shared sub-flows multiply into distinct paths at reconstruction.

use crate::cpg::{AssignValue, CallInfo, CodePropertyGraph, CpgNode, NodeId, NodeKind};
use crate::frontend::{collect_calls, Expr, ExprKind, VarKey};
use crate::interproc::{arg_key_and_addr, ArgSlot, CallGraph, SourceKind, Summaries, VulnClass};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SinkSite {
    pub call_node: NodeId,
    pub callee: String,
    pub sensitive_arg_index: usize,
    pub vuln_class: VulnClass,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SourceSite {
    /// The call node, or the parameter node for argv-style sources.
    pub call_node: NodeId,
    pub callee: String,
    pub source_kind: SourceKind,
    pub controlled_arg: ArgSlot,
}

/// The five ways a traced value crosses from one definition to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HopCase {
    IncrementDecrement,
    ArithmeticRhs,
    CallReturn,
    CallArgument,
    ParameterBinding,
}

pub type TreeItem = (NodeId, VarKey);

/// Backward search structure: every visited item maps to the items that
/// supply its data, each edge labeled with the hop case.
#[derive(Debug, Default, Clone)]
pub struct DefinitionTree {
    pub root: Option<NodeId>,
    pub children: BTreeMap<TreeItem, BTreeSet<(TreeItem, HopCase)>>,
}

#[derive(Debug, Clone)]
pub struct DataFlowPath {
    pub sink: SinkSite,
    pub source: SourceSite,
    /// Node sequence in source-to-sink order.
    pub hops: Vec<NodeId>,
    /// Variable label per adjacent hop pair; `hop_vars[i]` carries the data
    /// from `hops[i]` into `hops[i+1]`, named in `hops[i]`'s function scope.
    pub hop_vars: Vec<VarKey>,
    pub hop_cases: Vec<HopCase>,
    pub crossed_functions: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SourceSinkPair {
    pub source: SourceSite,
    pub sink: SinkSite,
    pub paths: Vec<DataFlowPath>,
}

#[derive(Debug, Clone)]
pub struct TraceConfig {
    /// Interprocedural hops allowed per traced item chain.
    pub max_depth: usize,
    /// Paths reconstructed per sink before flagging truncation.
    pub max_paths: usize,
    /// Skip re-expanding visited (node, variable) items.
    pub use_memoization: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig { max_depth: 64, max_paths: 256, use_memoization: true }
    }
}

#[derive(Debug, Default)]
pub struct TraceOutcome {
    pub tree: DefinitionTree,
    pub paths: Vec<DataFlowPath>,
    /// Search or reconstruction hit a configured budget; results partial.
    pub budget_exhausted: bool,
    /// Variables with no reaching definition and no parameter origin.
    pub dangling: Vec<TreeItem>,
}

/// Every call site whose callee summary declares a sensitive parameter.
/// Format-string sinks require a non-literal argument.
pub fn find_sensitive_sinks(graph: &CodePropertyGraph, summaries: &Summaries) -> Vec<SinkSite> {
    let mut out = Vec::new();
    for node in &graph.nodes {
        for call in &node.calls {
            let Some(callee) = &call.callee else { continue };
            let Some(s) = summaries.get(callee) else { continue };
            for (idx, class) in &s.sink_specs {
                let Some(arg) = call.args.get(*idx) else { continue };
                if *class == VulnClass::FormatString && matches!(arg.kind, ExprKind::StrLit(_)) {
                    continue;
                }
                out.push(SinkSite {
                    call_node: node.id,
                    callee: callee.clone(),
                    sensitive_arg_index: *idx,
                    vuln_class: *class,
                });
            }
            if let Some(v) = &s.variadic {
                if let Some(class) = v.sink {
                    for idx in s.param_modified.len()..call.args.len() {
                        out.push(SinkSite {
                            call_node: node.id,
                            callee: callee.clone(),
                            sensitive_arg_index: idx,
                            vuln_class: class,
                        });
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Every call site whose callee summary declares a source slot, plus the
/// argv/envp parameters of `main`.
pub fn find_user_controlled_sources(
    graph: &CodePropertyGraph,
    summaries: &Summaries,
) -> Vec<SourceSite> {
    let mut out = Vec::new();
    for node in &graph.nodes {
        for call in &node.calls {
            let Some(callee) = &call.callee else { continue };
            let Some(s) = summaries.get(callee) else { continue };
            for (slot, kind) in &s.sources {
                match slot {
                    ArgSlot::Param(i) if *i < call.args.len() => out.push(SourceSite {
                        call_node: node.id,
                        callee: callee.clone(),
                        source_kind: *kind,
                        controlled_arg: ArgSlot::Param(*i),
                    }),
                    ArgSlot::ReturnValue => out.push(SourceSite {
                        call_node: node.id,
                        callee: callee.clone(),
                        source_kind: *kind,
                        controlled_arg: ArgSlot::ReturnValue,
                    }),
                    _ => {}
                }
            }
            if let Some(v) = &s.variadic {
                if let Some(kind) = v.source {
                    for idx in s.param_modified.len()..call.args.len() {
                        out.push(SourceSite {
                            call_node: node.id,
                            callee: callee.clone(),
                            source_kind: kind,
                            controlled_arg: ArgSlot::Param(idx),
                        });
                    }
                }
            }
        }
    }
    for (i, pid) in main_argv_params(graph) {
        out.push(SourceSite {
            call_node: pid,
            callee: "main".to_string(),
            source_kind: SourceKind::Argv,
            controlled_arg: ArgSlot::Param(i),
        });
    }
    out.sort();
    out.dedup();
    out
}

fn main_argv_params(graph: &CodePropertyGraph) -> Vec<(usize, NodeId)> {
    let mut out = Vec::new();
    if let Some(params) = graph.function_params.get("main") {
        for &pid in params {
            let idx = graph.node(pid).param_index.unwrap_or(0);
            if idx == 1 || idx == 2 {
                out.push((idx, pid));
            }
        }
    }
    out
}

/// Group traced paths by (source call node, sink site); the group count is
/// the unique source-sink combination metric.
pub fn group_pairs(paths: &[DataFlowPath]) -> Vec<SourceSinkPair> {
    let mut groups: BTreeMap<(NodeId, SinkSite), Vec<DataFlowPath>> = BTreeMap::new();
    for p in paths {
        groups.entry((p.source.call_node, p.sink.clone())).or_default().push(p.clone());
    }
    groups
        .into_iter()
        .map(|((_, sink), paths)| SourceSinkPair { source: paths[0].source.clone(), sink, paths })
        .collect()
}

// ---------------------------------------------------------------------
// The tracer
// ---------------------------------------------------------------------

struct Tracer<'a> {
    graph: &'a CodePropertyGraph,
    summaries: &'a Summaries,
    cg: &'a CallGraph,
    config: &'a TraceConfig,
    tree: DefinitionTree,
    visited: BTreeSet<TreeItem>,
    queue: VecDeque<(TreeItem, usize)>,
    hits: BTreeMap<TreeItem, SourceSite>,
    dangling: Vec<TreeItem>,
    budget_exhausted: bool,
}

/// Trace one sink backward to every reachable user-controlled source.
pub fn trace_to_sources(
    graph: &CodePropertyGraph,
    summaries: &Summaries,
    cg: &CallGraph,
    sink: &SinkSite,
    config: &TraceConfig,
) -> TraceOutcome {
    let mut tracer = Tracer {
        graph,
        summaries,
        cg,
        config,
        tree: DefinitionTree { root: Some(sink.call_node), children: BTreeMap::new() },
        visited: BTreeSet::new(),
        queue: VecDeque::new(),
        hits: BTreeMap::new(),
        dangling: Vec::new(),
        budget_exhausted: false,
    };

    // Seed with the variables of the sensitive argument expression.
    let node = graph.node(sink.call_node);
    let mut roots: Vec<TreeItem> = Vec::new();
    for call in &node.calls {
        if call.callee.as_deref() != Some(sink.callee.as_str()) {
            continue;
        }
        if let Some(arg) = call.args.get(sink.sensitive_arg_index) {
            for v in expr_vars(graph, node, arg) {
                let item = (sink.call_node, v);
                if !roots.contains(&item) {
                    roots.push(item.clone());
                    tracer.queue.push_back((item, 0));
                }
            }
        }
    }

    while let Some((item, depth)) = tracer.queue.pop_front() {
        if !tracer.visited.insert(item.clone()) {
            continue;
        }
        tracer.expand(item, depth);
    }

    let paths = tracer.reconstruct(sink, &roots);
    TraceOutcome {
        tree: tracer.tree,
        paths,
        budget_exhausted: tracer.budget_exhausted,
        dangling: tracer.dangling,
    }
}

impl<'a> Tracer<'a> {
    fn add_edge(&mut self, parent: TreeItem, child: TreeItem, case: HopCase, depth: usize) {
        if child == parent {
            return;
        }
        self.tree.children.entry(parent).or_default().insert((child.clone(), case));
        if depth > self.config.max_depth {
            self.budget_exhausted = true;
            return;
        }
        self.queue.push_back((child, depth));
    }

    /// Does `node` produce `var` straight from a user-controlled source?
    fn source_event(&self, node: &CpgNode, var: &VarKey) -> Option<SourceSite> {
        for call in &node.calls {
            let Some(callee) = &call.callee else { continue };
            let Some(s) = self.summaries.get(callee) else { continue };
            for (slot, kind) in &s.sources {
                if let ArgSlot::Param(i) = slot {
                    if let Some((key, _)) = call.args.get(*i).and_then(arg_key_and_addr) {
                        if key.flows_to(var) {
                            return Some(SourceSite {
                                call_node: node.id,
                                callee: callee.clone(),
                                source_kind: *kind,
                                controlled_arg: ArgSlot::Param(*i),
                            });
                        }
                    }
                }
            }
            if let Some(v) = &s.variadic {
                if let Some(kind) = v.source {
                    for idx in s.param_modified.len()..call.args.len() {
                        if let Some((key, _)) = call.args.get(idx).and_then(arg_key_and_addr) {
                            if key.flows_to(var) {
                                return Some(SourceSite {
                                    call_node: node.id,
                                    callee: callee.clone(),
                                    source_kind: kind,
                                    controlled_arg: ArgSlot::Param(idx),
                                });
                            }
                        }
                    }
                }
            }
            // Return-value sources: `v = getenv(...)`, possibly nested.
            if let Some(kind) = s.return_source() {
                for a in &node.assigns {
                    if !a.lhs.flows_to(var) {
                        continue;
                    }
                    if let AssignValue::Expr(e) | AssignValue::Compound(e) = &a.value {
                        if expr_contains_call_to(e, callee) {
                            return Some(SourceSite {
                                call_node: node.id,
                                callee: callee.clone(),
                                source_kind: kind,
                                controlled_arg: ArgSlot::ReturnValue,
                            });
                        }
                    }
                }
            }
        }
        if node.kind == NodeKind::Parameter
            && node.function == "main"
            && matches!(node.param_index, Some(1) | Some(2))
            && node.param_name.as_deref() == Some(var.base.as_str())
        {
            return Some(SourceSite {
                call_node: node.id,
                callee: "main".to_string(),
                source_kind: SourceKind::Argv,
                controlled_arg: ArgSlot::Param(node.param_index.unwrap()),
            });
        }
        None
    }

    fn expand(&mut self, item: TreeItem, depth: usize) {
        let (node_id, var) = item.clone();
        let node = self.graph.node(node_id);

        // Tracing stops where the variable is produced by a source.
        if let Some(site) = self.source_event(node, &var) {
            self.hits.insert(item, site);
            return;
        }

        let mut produced = false;

        // Assignment records matching the traced variable.
        for a in &node.assigns.clone() {
            if !a.lhs.flows_to(&var) {
                continue;
            }
            produced = true;
            match &a.value {
                AssignValue::Expr(e) => {
                    self.seed_value_edges(node_id, e, item.clone(), depth, HopCase::ArithmeticRhs);
                }
                AssignValue::Compound(e) => {
                    self.seed_value_edges(node_id, e, item.clone(), depth, HopCase::ArithmeticRhs);
                    self.push_defs_of(node_id, &var, item.clone(), depth);
                }
                AssignValue::SelfRef => {
                    self.push_defs_of(node_id, &var, item.clone(), depth);
                }
            }
        }

        // The variable was written here as a modified call argument.
        for call in &node.calls.clone() {
            for (k, arg) in call.args.iter().enumerate() {
                let Some((key, _)) = arg_key_and_addr(arg) else { continue };
                if !key.flows_to(&var) {
                    continue;
                }
                if !self.call_modifies_arg(call, k) {
                    continue;
                }
                produced = true;
                self.expand_call_argument(node_id, call, k, item.clone(), depth);
            }
        }

        // Parameter binding: resume at every call site of this function.
        if node.kind == NodeKind::Parameter && node.param_name.as_deref() == Some(var.base.as_str())
        {
            produced = true;
            let fname = node.function.clone();
            let idx = node.param_index.unwrap_or(0);
            let mut seen_sites = BTreeSet::new();
            let call_sites: Vec<NodeId> = self
                .cg
                .edges
                .iter()
                .filter(|e| e.callee == fname)
                .map(|e| e.call_site)
                .filter(|s| seen_sites.insert(*s))
                .collect();
            for call_site in call_sites {
                let calls = self.graph.node(call_site).calls.clone();
                for call in calls {
                    let matches = match &call.callee {
                        Some(n) => n == &fname,
                        None => self.graph.address_taken.contains(&fname),
                    };
                    if !matches {
                        continue;
                    }
                    if let Some(arg) = call.args.get(idx) {
                        self.seed_arg_edges(call_site, arg, item.clone(), depth + 1);
                    }
                }
            }
        }

        if !produced {
            // Plain consumer: walk to the reaching definitions.
            let preds: Vec<(NodeId, VarKey)> = self
                .graph
                .dfg_into(node_id)
                .iter()
                .filter(|(_, label)| *label == var)
                .map(|(p, l)| (*p, l.clone()))
                .collect();
            if preds.is_empty() {
                self.dangling.push(item);
                return;
            }
            for (pred, label) in preds {
                let case = self.classify_def(pred, &label);
                self.add_edge(item.clone(), (pred, label), case, depth);
            }
        }
    }

    /// Push the reaching definitions of `var` into `node` as children.
    fn push_defs_of(&mut self, node: NodeId, var: &VarKey, parent: TreeItem, depth: usize) {
        let preds: Vec<(NodeId, VarKey)> = self
            .graph
            .dfg_into(node)
            .iter()
            .filter(|(_, label)| label == var)
            .map(|(p, l)| (*p, l.clone()))
            .collect();
        for (pred, label) in preds {
            let case = self.classify_def(pred, &label);
            self.add_edge(parent.clone(), (pred, label), case, depth);
        }
    }

    /// How does `def_node` produce `var`? Labels the tree edge.
    fn classify_def(&self, def_node: NodeId, var: &VarKey) -> HopCase {
        let node = self.graph.node(def_node);
        if node.kind == NodeKind::Parameter {
            return HopCase::ParameterBinding;
        }
        for a in &node.assigns {
            if a.lhs.flows_to(var) {
                return match &a.value {
                    AssignValue::SelfRef => HopCase::IncrementDecrement,
                    AssignValue::Expr(e) | AssignValue::Compound(e) => {
                        if matches!(strip_casts(e).kind, ExprKind::Call { .. }) {
                            HopCase::CallReturn
                        } else {
                            HopCase::ArithmeticRhs
                        }
                    }
                };
            }
        }
        for call in &node.calls {
            for arg in &call.args {
                if let Some((key, _)) = arg_key_and_addr(arg) {
                    if key.flows_to(var) {
                        return HopCase::CallArgument;
                    }
                }
            }
        }
        HopCase::ArithmeticRhs
    }

    fn call_modifies_arg(&self, call: &CallInfo, k: usize) -> bool {
        match &call.callee {
            Some(name) => match self.summaries.get(name) {
                Some(s) => s.modified_at(k) != crate::interproc::ParamMod::No,
                None => true,
            },
            None => true,
        }
    }

    /// Case: the traced variable was assigned as a modified argument of a
    /// call. For corpus callees resume at the callee's writes through that
    /// parameter; for externals follow the data-transfer table.
    fn expand_call_argument(
        &mut self,
        node_id: NodeId,
        call: &CallInfo,
        k: usize,
        parent: TreeItem,
        depth: usize,
    ) {
        match &call.callee {
            Some(callee) if self.graph.function_index.contains_key(callee) => {
                self.expand_corpus_callee_write(callee.clone(), k, parent, depth);
            }
            Some(callee) => {
                if let Some(s) = self.summaries.get(callee) {
                    let transfers = s.param_transfers.clone();
                    let variadic_to: Vec<usize> =
                        s.variadic.as_ref().map(|v| v.transfer_to.clone()).unwrap_or_default();
                    let declared = s.param_modified.len();
                    for (from, to) in transfers {
                        if to != k {
                            continue;
                        }
                        if let crate::interproc::TransferFrom::Param(i) = from {
                            if let Some(src) = call.args.get(i) {
                                self.seed_value_edges(
                                    node_id,
                                    &src.clone(),
                                    parent.clone(),
                                    depth,
                                    HopCase::CallArgument,
                                );
                            }
                        }
                    }
                    if variadic_to.contains(&k) {
                        for src in call.args.iter().skip(declared) {
                            self.seed_value_edges(
                                node_id,
                                &src.clone(),
                                parent.clone(),
                                depth,
                                HopCase::CallArgument,
                            );
                        }
                    }
                } else {
                    // Unknown external: any argument may feed the write.
                    for src in &call.args {
                        self.seed_value_edges(
                            node_id,
                            &src.clone(),
                            parent.clone(),
                            depth,
                            HopCase::CallArgument,
                        );
                    }
                }
            }
            None => {
                for cand in self.graph.address_taken.clone() {
                    if self.graph.function_index.contains_key(&cand) {
                        self.expand_corpus_callee_write(cand, k, parent.clone(), depth);
                    }
                }
            }
        }
    }

    fn expand_corpus_callee_write(
        &mut self,
        callee: String,
        k: usize,
        parent: TreeItem,
        depth: usize,
    ) {
        let Some(meta) = self.graph.fn_meta.get(&callee) else { return };
        let Some((pname, _)) = meta.params.get(k) else { return };
        if pname.is_empty() {
            return;
        }
        let pname = pname.clone();
        let ids = self.graph.function_nodes.get(&callee).cloned().unwrap_or_default();
        for id in ids {
            let n = self.graph.node(id);
            let mut keys: BTreeSet<VarKey> = BTreeSet::new();
            for a in &n.assigns {
                if a.weak && a.lhs.base == pname {
                    keys.insert(a.lhs.clone());
                }
            }
            for key in
                n.aug_defs.iter().chain(n.aug_weak_defs.iter()).chain(n.aug_maybe_defs.iter())
            {
                if key.base == pname {
                    keys.insert(key.clone());
                }
            }
            for key in keys {
                self.add_edge(parent.clone(), (id, key), HopCase::CallArgument, depth + 1);
            }
        }
    }

    /// Children for the constituents of a value expression evaluated at
    /// `node`: reaching defs of its variables plus call-return flows.
    fn seed_value_edges(
        &mut self,
        node_id: NodeId,
        expr: &Expr,
        parent: TreeItem,
        depth: usize,
        case: HopCase,
    ) {
        let mut guard = Vec::new();
        self.seed_value_edges_guarded(node_id, expr, parent, depth, case, &mut guard);
    }

    fn seed_value_edges_guarded(
        &mut self,
        node_id: NodeId,
        expr: &Expr,
        parent: TreeItem,
        depth: usize,
        case: HopCase,
        guard: &mut Vec<String>,
    ) {
        let node = self.graph.node(node_id);
        for v in expr_vars(self.graph, node, expr) {
            let preds: Vec<(NodeId, VarKey)> = self
                .graph
                .dfg_into(node_id)
                .iter()
                .filter(|(_, label)| *label == v)
                .map(|(p, l)| (*p, l.clone()))
                .collect();
            if preds.is_empty() {
                // Constants aside, an unfed variable is a dangling origin.
                if !v.base.is_empty() {
                    self.dangling.push((node_id, v.clone()));
                }
                continue;
            }
            for (pred, label) in preds {
                let edge_case = if case == HopCase::ArithmeticRhs {
                    self.classify_def(pred, &label)
                } else {
                    case
                };
                self.add_edge(parent.clone(), (pred, label), edge_case, depth);
            }
        }
        let mut calls = Vec::new();
        collect_calls(expr, &mut calls);
        for c in calls {
            let ExprKind::Call { args, .. } = &c.kind else { continue };
            // The graph already classified this call site (direct name vs.
            // call through a function-valued expression).
            let info = node.calls.iter().find(|ci| ci.span == c.span);
            let (callee_name, indirect) = match info {
                Some(ci) => (ci.callee.clone(), ci.indirect),
                None => match &c.kind {
                    ExprKind::Call { callee, .. } => match &callee.kind {
                        ExprKind::Ident(n) => (Some(n.clone()), false),
                        _ => (None, true),
                    },
                    _ => (None, true),
                },
            };
            if indirect {
                for cand in self.graph.address_taken.clone() {
                    self.expand_callee_returns(cand, parent.clone(), depth, guard);
                }
                continue;
            }
            let Some(name) = callee_name else { continue };
            if self.graph.function_index.contains_key(&name) {
                self.expand_callee_returns(name, parent.clone(), depth, guard);
            } else if let Some(s) = self.summaries.get(&name) {
                if s.return_source().is_some() {
                    // Terminated by source_event at the parent node.
                    continue;
                }
                for i in s.returns_param_data.clone() {
                    if let Some(arg) = args.get(i) {
                        self.seed_value_edges_guarded(
                            node_id,
                            &arg.clone(),
                            parent.clone(),
                            depth,
                            HopCase::CallReturn,
                            guard,
                        );
                    }
                }
            } else {
                for arg in args {
                    self.seed_value_edges_guarded(
                        node_id,
                        &arg.clone(),
                        parent.clone(),
                        depth,
                        HopCase::CallReturn,
                        guard,
                    );
                }
            }
        }
    }

    /// Resume the trace at a corpus callee's return statements. The guard
    /// keeps mutual recursion over variable-free returns bounded.
    fn expand_callee_returns(
        &mut self,
        callee: String,
        parent: TreeItem,
        depth: usize,
        guard: &mut Vec<String>,
    ) {
        if guard.contains(&callee) || depth > self.config.max_depth {
            if depth > self.config.max_depth {
                self.budget_exhausted = true;
            }
            return;
        }
        guard.push(callee.clone());
        let rets = self.graph.function_returns.get(&callee).cloned().unwrap_or_default();
        for r in rets {
            let ret_expr = self.graph.node(r).ret_expr.clone();
            let Some(re) = ret_expr else { continue };
            let rnode = self.graph.node(r);
            let vars = expr_vars(self.graph, rnode, &re);
            for w in vars {
                self.add_edge(parent.clone(), (r, w), HopCase::CallReturn, depth + 1);
            }
            // Nested calls carry the returned value onward regardless of
            // whether the expression also reads variables directly.
            let mut nested = Vec::new();
            collect_calls(&re, &mut nested);
            if !nested.is_empty() {
                self.seed_value_edges_guarded(
                    r,
                    &re,
                    parent.clone(),
                    depth + 1,
                    HopCase::CallReturn,
                    guard,
                );
            }
        }
        guard.pop();
    }

    /// Children for an argument expression at a call site reached through a
    /// parameter binding: the call site itself becomes a hop.
    fn seed_arg_edges(&mut self, call_site: NodeId, arg: &Expr, parent: TreeItem, depth: usize) {
        let caller_node = self.graph.node(call_site);
        for v in expr_vars(self.graph, caller_node, arg) {
            self.add_edge(parent.clone(), (call_site, v), HopCase::ParameterBinding, depth);
        }
        let mut calls = Vec::new();
        collect_calls(arg, &mut calls);
        if !calls.is_empty() {
            self.seed_value_edges(call_site, arg, parent, depth, HopCase::ParameterBinding);
        }
    }

    /// Enumerate all root-to-hit routes in the definition tree, reversed
    /// into source-to-sink order, up to the path budget.
    fn reconstruct(&mut self, sink: &SinkSite, roots: &[TreeItem]) -> Vec<DataFlowPath> {
        let mut out = Vec::new();
        for root in roots {
            if out.len() >= self.config.max_paths {
                self.budget_exhausted = true;
                break;
            }
            let mut stack_path = vec![root.clone()];
            let mut case_path = Vec::new();
            self.walk_paths(sink, root, &mut stack_path, &mut case_path, &mut out);
        }
        out.sort_by(|a, b| (&a.hops, &a.hop_vars).cmp(&(&b.hops, &b.hop_vars)));
        out.dedup_by(|a, b| a.hops == b.hops && a.hop_vars == b.hop_vars);
        out
    }

    fn walk_paths(
        &mut self,
        sink: &SinkSite,
        item: &TreeItem,
        stack_path: &mut Vec<TreeItem>,
        case_path: &mut Vec<HopCase>,
        out: &mut Vec<DataFlowPath>,
    ) {
        if out.len() >= self.config.max_paths {
            self.budget_exhausted = true;
            return;
        }
        if let Some(site) = self.hits.get(item).cloned() {
            // stack_path runs sink -> source; reverse it.
            let items: Vec<TreeItem> = stack_path.iter().rev().cloned().collect();
            let mut hops: Vec<NodeId> = Vec::new();
            let mut hop_vars: Vec<VarKey> = Vec::new();
            let mut hop_cases: Vec<HopCase> = Vec::new();
            let cases: Vec<HopCase> = case_path.iter().rev().copied().collect();
            for (i, (n, v)) in items.iter().enumerate() {
                if hops.last() == Some(n) {
                    continue;
                }
                hops.push(*n);
                if i + 1 < items.len() {
                    hop_vars.push(v.clone());
                    hop_cases.push(*cases.get(i).copied().get_or_insert(HopCase::ArithmeticRhs));
                }
            }
            while hop_vars.len() >= hops.len() && !hop_vars.is_empty() {
                hop_vars.pop();
                hop_cases.pop();
            }
            let mut crossed = Vec::new();
            for n in &hops {
                let f = self.graph.node(*n).function.clone();
                if crossed.last() != Some(&f) {
                    crossed.push(f);
                }
            }
            out.push(DataFlowPath {
                sink: sink.clone(),
                source: site,
                hops,
                hop_vars,
                hop_cases,
                crossed_functions: crossed,
            });
            return;
        }
        let children = match self.tree.children.get(item) {
            Some(c) => c.clone(),
            None => return,
        };
        for (child, case) in children {
            if stack_path.contains(&child) {
                continue;
            }
            stack_path.push(child.clone());
            case_path.push(case);
            self.walk_paths(sink, &child, stack_path, case_path, out);
            case_path.pop();
            stack_path.pop();
        }
    }
}

fn strip_casts(e: &Expr) -> &Expr {
    match &e.kind {
        ExprKind::Cast { operand, .. } => strip_casts(operand),
        _ => e,
    }
}

fn expr_contains_call_to(e: &Expr, name: &str) -> bool {
    let mut calls = Vec::new();
    collect_calls(e, &mut calls);
    calls.iter().any(|c| c.direct_callee() == Some(name))
}

/// Variable keys read by `expr` in the context of `node`'s function.
fn expr_vars(graph: &CodePropertyGraph, node: &CpgNode, expr: &Expr) -> Vec<VarKey> {
    let fname = &node.function;
    let known = |name: &str| {
        graph.function_index.contains_key(name)
            || !graph
                .fn_meta
                .get(fname)
                .map(|m| m.declared_names.iter().any(|d| d == name))
                .unwrap_or(false)
    };
    let mut vars = Vec::new();
    crate::frontend::collect_read_keys(expr, &known, &mut vars);
    vars.sort();
    vars.dedup();
    vars
}

/// Re-check that every adjacent hop pair of a path is connected by a data
/// or binding edge in the augmented graph. Used by tests and debug checks.
pub fn check_path_connectivity(
    graph: &CodePropertyGraph,
    cg: &CallGraph,
    path: &DataFlowPath,
) -> bool {
    for i in 0..path.hops.len().saturating_sub(1) {
        let a = path.hops[i];
        let b = path.hops[i + 1];
        if a == b {
            continue;
        }
        let na = graph.node(a);
        let nb = graph.node(b);
        let direct_dfg = graph.dfg_out_of(a).iter().any(|(dst, _)| *dst == b)
            || graph.dfg_into(b).iter().any(|(src, _)| *src == a);
        if direct_dfg {
            continue;
        }
        if na.function != nb.function {
            let linked = cg.edges.iter().any(|e| {
                (e.call_site == a && e.callee == nb.function)
                    || (e.call_site == b && e.callee == na.function)
            });
            if linked {
                continue;
            }
            return false;
        }
        return false;
    }
    true
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::cpg::build_cpg;
    use crate::frontend::parse_unit;
    use crate::interproc::{
        build_call_graph, default_summaries, summarize_parameters, topological_order,
    };
    use std::path::Path;

    pub(crate) fn setup(src: &str) -> (CodePropertyGraph, CallGraph, Summaries) {
        let tu = parse_unit(src, Path::new("test.c"));
        let mut g = build_cpg(vec![tu]);
        let cg = build_call_graph(&g);
        let order = topological_order(&cg);
        let externals = default_summaries();
        let s = summarize_parameters(&mut g, &cg, &order, &externals);
        (g, cg, s)
    }

    fn trace_all(
        g: &CodePropertyGraph,
        cg: &CallGraph,
        s: &Summaries,
        config: &TraceConfig,
    ) -> Vec<DataFlowPath> {
        let mut all = Vec::new();
        for sink in find_sensitive_sinks(g, s) {
            all.extend(trace_to_sources(g, s, cg, &sink, config).paths);
        }
        all
    }

    #[test]
    fn running_example_has_one_buffer_length_sink() {
        let (g, _, s) = setup(crate::fixtures::RUNNING_EXAMPLE);
        let sinks = find_sensitive_sinks(&g, &s);
        assert_eq!(sinks.len(), 1, "{:?}", sinks);
        assert_eq!(sinks[0].callee, "memcpy");
        assert_eq!(sinks[0].sensitive_arg_index, 2);
        assert_eq!(sinks[0].vuln_class, VulnClass::BufferLength);
    }

    #[test]
    fn running_example_has_one_file_source() {
        let (g, _, s) = setup(crate::fixtures::RUNNING_EXAMPLE);
        let sources = find_user_controlled_sources(&g, &s);
        assert_eq!(sources.len(), 1, "{:?}", sources);
        assert_eq!(sources[0].callee, "fread");
        assert_eq!(sources[0].source_kind, SourceKind::File);
        assert_eq!(sources[0].controlled_arg, ArgSlot::Param(0));
    }

    #[test]
    fn running_example_yields_four_paths_one_pair() {
        let (g, cg, s) = setup(crate::fixtures::RUNNING_EXAMPLE);
        let sinks = find_sensitive_sinks(&g, &s);
        let outcome = trace_to_sources(&g, &s, &cg, &sinks[0], &TraceConfig::default());
        assert!(!outcome.budget_exhausted);
        assert_eq!(outcome.paths.len(), 4, "{:#?}", outcome.paths);
        for p in &outcome.paths {
            assert_eq!(p.source.callee, "fread");
            assert_eq!(*p.hops.last().unwrap(), sinks[0].call_node);
            assert_eq!(p.hop_vars.len(), p.hops.len() - 1);
            assert!(check_path_connectivity(&g, &cg, p), "{:?}", p);
        }
        let pairs = group_pairs(&outcome.paths);
        assert_eq!(pairs.len(), 1);
        let through_wrapper = outcome
            .paths
            .iter()
            .filter(|p| p.crossed_functions.contains(&"wrapper".to_string()))
            .count();
        assert_eq!(through_wrapper, 2);
    }

    #[test]
    fn constant_sink_argument_yields_no_paths() {
        let (g, cg, s) = setup("void f(char *d, char *s) { memcpy(d, s, 16); }");
        let sinks = find_sensitive_sinks(&g, &s);
        assert_eq!(sinks.len(), 1);
        let outcome = trace_to_sources(&g, &s, &cg, &sinks[0], &TraceConfig::default());
        assert!(outcome.paths.is_empty());
    }

    #[test]
    fn three_deep_call_chain_renames() {
        let src = r#"
int level1(FILE *f) { int a; fread((char *)&a, 4, 1, f); return a; }
int level2(FILE *f) { int b = level1(f); return b; }
int level3(FILE *f) { int c = level2(f); return c; }
void top(FILE *f, char *dst, char *src) {
  int n = level3(f);
  memcpy(dst, src, n);
}
"#;
        let (g, cg, s) = setup(src);
        let sinks = find_sensitive_sinks(&g, &s);
        assert_eq!(sinks.len(), 1);
        let outcome = trace_to_sources(&g, &s, &cg, &sinks[0], &TraceConfig::default());
        assert_eq!(outcome.paths.len(), 1, "{:#?}", outcome.paths);
        let p = &outcome.paths[0];
        assert_eq!(p.crossed_functions, vec!["level1", "level2", "level3", "top"]);
        let bases: Vec<String> = p.hop_vars.iter().map(|v| v.base.clone()).collect();
        for name in ["a", "b", "c"] {
            assert!(bases.iter().any(|b| b == name), "missing {} in {:?}", name, bases);
        }
        assert!(check_path_connectivity(&g, &cg, p));
    }

    #[test]
    fn argv_of_main_is_a_source() {
        let src = r#"
int main(int argc, char **argv) {
  char local[64];
  strcpy(local, argv[1]);
  return 0;
}
"#;
        let (g, cg, s) = setup(src);
        let sources = find_user_controlled_sources(&g, &s);
        assert!(sources.iter().any(|s| s.source_kind == SourceKind::Argv));
        let sinks = find_sensitive_sinks(&g, &s);
        assert_eq!(sinks.len(), 1, "{:?}", sinks);
        let outcome = trace_to_sources(&g, &s, &cg, &sinks[0], &TraceConfig::default());
        assert_eq!(outcome.paths.len(), 1, "{:#?}", outcome);
        assert_eq!(outcome.paths[0].source.source_kind, SourceKind::Argv);
    }

    #[test]
    fn format_string_sink_requires_non_literal() {
        let src = r#"
void log_it(char *buf, int n) {
  printf("%d", n);
  printf(buf);
}
"#;
        let (g, _, s) = setup(src);
        let sinks = find_sensitive_sinks(&g, &s);
        assert_eq!(sinks.len(), 1, "{:?}", sinks);
        assert_eq!(sinks[0].vuln_class, VulnClass::FormatString);
    }

    #[test]
    fn group_pairs_of_nothing_is_empty() {
        assert!(group_pairs(&[]).is_empty());
    }

    #[test]
    fn no_io_corpus_has_no_sources() {
        let (g, _, s) = setup("int add(int a, int b) { return a + b; }");
        assert!(find_user_controlled_sources(&g, &s).is_empty());
        assert!(find_sensitive_sinks(&g, &s).is_empty());
    }

    #[test]
    fn group_pairs_counts_distinct_sources_per_sink() {
        let src = r#"
void two(FILE *f, int sock, char *d, char *s) {
  int a;
  int b;
  fread((char *)&a, 4, 1, f);
  recv(sock, (char *)&b, 4, 0);
  memcpy(d, s, a + b);
  memcpy(s, d, a);
}
"#;
        let (g, cg, s) = setup(src);
        let paths = trace_all(&g, &cg, &s, &TraceConfig::default());
        let pairs = group_pairs(&paths);
        // First length mixes both sources; the second reaches only one.
        assert_eq!(pairs.len(), 3, "{:#?}", pairs);
    }

    #[test]
    fn memoization_transparency() {
        let (g, cg, s) = setup(crate::fixtures::RUNNING_EXAMPLE);
        let sinks = find_sensitive_sinks(&g, &s);
        let with = trace_to_sources(
            &g,
            &s,
            &cg,
            &sinks[0],
            &TraceConfig { use_memoization: true, ..Default::default() },
        );
        let without = trace_to_sources(
            &g,
            &s,
            &cg,
            &sinks[0],
            &TraceConfig { use_memoization: false, ..Default::default() },
        );
        let key = |p: &DataFlowPath| (p.hops.clone(), p.hop_vars.clone());
        let a: BTreeSet<_> = with.paths.iter().map(key).collect();
        let b: BTreeSet<_> = without.paths.iter().map(key).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn dangling_definition_recorded() {
        let (g, cg, s) = setup("void f(char *d, char *s) { int n; memcpy(d, s, n); }");
        let sinks = find_sensitive_sinks(&g, &s);
        let outcome = trace_to_sources(&g, &s, &cg, &sinks[0], &TraceConfig::default());
        assert!(outcome.paths.is_empty());
        assert_eq!(outcome.dangling.len(), 1);
        assert_eq!(outcome.dangling[0].1, VarKey::new("n"));
    }

    #[test]
    fn struct_member_flow_is_field_sensitive() {
        let src = r#"
struct header { int len; int kind; };
void run(FILE *f, char *d, char *s) {
  struct header h;
  fread((char *)&h.len, 4, 1, f);
  h.kind = 7;
  memcpy(d, s, h.len);
}
"#;
        let (g, cg, s) = setup(src);
        let sinks = find_sensitive_sinks(&g, &s);
        assert_eq!(sinks.len(), 1);
        let outcome = trace_to_sources(&g, &s, &cg, &sinks[0], &TraceConfig::default());
        assert_eq!(outcome.paths.len(), 1, "{:#?}", outcome.paths);
        assert_eq!(outcome.paths[0].source.callee, "fread");
    }

    #[test]
    fn depth_budget_flags_truncation() {
        let (g, cg, s) = setup(crate::fixtures::RUNNING_EXAMPLE);
        let sinks = find_sensitive_sinks(&g, &s);
        let outcome = trace_to_sources(
            &g,
            &s,
            &cg,
            &sinks[0],
            &TraceConfig { max_depth: 0, ..Default::default() },
        );
        assert!(outcome.budget_exhausted);
        assert!(outcome.paths.len() < 4);
    }

    #[test]
    fn source_passthrough_only_stops_for_controlled_arg() {
        // The stream argument of fread is not the controlled slot; tracing
        // the stream variable continues past the source call.
        let src = r#"
void pick(FILE *a, char *d, char *s) {
  int n;
  FILE *f = a;
  fread((char *)&n, 4, 1, f);
  memcpy(d, s, n);
}
"#;
        let (g, cg, s) = setup(src);
        let sinks = find_sensitive_sinks(&g, &s);
        let outcome = trace_to_sources(&g, &s, &cg, &sinks[0], &TraceConfig::default());
        assert_eq!(outcome.paths.len(), 1);
        assert_eq!(outcome.paths[0].source.controlled_arg, ArgSlot::Param(0));
    }
}
