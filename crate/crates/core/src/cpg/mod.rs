//! Code property graph: AST nodes plus intraprocedural control-flow and
//! data-flow edges over one or more translation units.
//!
//! The graph is built once, augmented by the interprocedural stage, and then
//! queried read-only by every later stage. Node ids are assigned in a fixed
//! traversal order so identical inputs produce identical graphs.

mod build;
mod reaching;

pub use build::{build_cpg, CpgWarning};

use crate::frontend::{Expr, SourceSpan, VarKey};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Statement,
    Condition,
    CallSite,
    Parameter,
    ReturnStmt,
    Entry,
    Exit,
    Opaque,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Statement => "statement",
            NodeKind::Condition => "condition",
            NodeKind::CallSite => "callsite",
            NodeKind::Parameter => "parameter",
            NodeKind::ReturnStmt => "return",
            NodeKind::Entry => "entry",
            NodeKind::Exit => "exit",
            NodeKind::Opaque => "opaque",
        }
    }
}

/// Which way a conditional edge leaves its condition node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Branch {
    True,
    False,
    Case(u32),
    Default,
}

/// One call expression occurring inside a node's statement.
#[derive(Debug, Clone)]
pub struct CallInfo {
    /// Plain-identifier callee name; `None` for calls through expressions.
    pub callee: Option<String>,
    /// True when the callee is a function-valued expression or a variable.
    pub indirect: bool,
    pub args: Vec<Expr>,
    pub span: SourceSpan,
}

/// How a node wrote a variable: the right-hand side it took the value from.
#[derive(Debug, Clone)]
pub enum AssignValue {
    /// `lhs = rhs`
    Expr(Expr),
    /// `lhs op= rhs`: reads both the rhs and the lhs itself.
    Compound(Expr),
    /// `lhs++` / `--lhs`: reads only itself.
    SelfRef,
}

#[derive(Debug, Clone)]
pub struct AssignRecord {
    pub lhs: VarKey,
    /// Weak writes (through pointers or indices) do not kill other defs.
    pub weak: bool,
    /// The lvalue goes through an array subscript.
    pub indexed: bool,
    pub value: AssignValue,
}

#[derive(Debug, Clone)]
pub struct CpgNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub function: String,
    pub span: SourceSpan,
    /// Span of the enclosing full statement (for conditions: the whole
    /// `if`/`while`/`for` statement); equals `span` otherwise.
    pub stmt_span: SourceSpan,
    /// Definite whole-object writes derived from the AST; these kill other
    /// definitions of the same (or covered) key.
    pub defs: BTreeSet<VarKey>,
    /// Definite writes through a pointer or index; no kill.
    pub weak_defs: BTreeSet<VarKey>,
    /// Uncertain writes (address-of call arguments before augmentation).
    pub maybe_defs: BTreeSet<VarKey>,
    pub uses: BTreeSet<VarKey>,
    /// Writes added by interprocedural augmentation (callee effects).
    pub aug_defs: BTreeSet<VarKey>,
    pub aug_weak_defs: BTreeSet<VarKey>,
    pub aug_maybe_defs: BTreeSet<VarKey>,
    /// `maybe_defs` entries superseded by a known callee summary.
    pub resolved_maybe: BTreeSet<VarKey>,
    pub calls: Vec<CallInfo>,
    pub assigns: Vec<AssignRecord>,
    /// Condition expression for `Condition` nodes.
    pub cond: Option<Expr>,
    /// Parameter position and name for `Parameter` nodes.
    pub param_index: Option<usize>,
    pub param_name: Option<String>,
    pub ret_expr: Option<Expr>,
    pub opaque_reason: Option<String>,
    /// Enclosing AST block and statement position, when addressable.
    pub block: Option<(BlockId, usize)>,
    /// Calls that never return (exit-style); sole CFG successor is Exit.
    pub terminal: bool,
}

impl CpgNode {
    /// All written keys with a flag for definite (vs. maybe) writes.
    pub fn all_defs(&self) -> impl Iterator<Item = (&VarKey, bool)> {
        self.defs
            .iter()
            .chain(self.weak_defs.iter())
            .chain(self.aug_defs.iter())
            .chain(self.aug_weak_defs.iter())
            .map(|k| (k, true))
            .chain(
                self.maybe_defs
                    .iter()
                    .filter(|k| !self.resolved_maybe.contains(*k))
                    .map(|k| (k, false)),
            )
            .chain(self.aug_maybe_defs.iter().map(|k| (k, false)))
    }

    /// Keys whose definitions kill earlier definitions.
    pub fn killing_defs(&self) -> impl Iterator<Item = &VarKey> {
        self.defs.iter().chain(self.aug_defs.iter())
    }

    pub fn defines(&self, key: &VarKey) -> bool {
        self.all_defs().any(|(k, _)| k == key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockId(pub u32);

/// An AST compound block, used when relocating statements.
#[derive(Debug, Clone)]
pub struct BlockInfo {
    pub id: BlockId,
    pub function: String,
    /// Brace-inclusive span.
    pub span: SourceSpan,
    /// Condition node and branch when this block is an `if` branch body.
    pub branch_of: Option<(NodeId, bool)>,
    /// All CPG nodes inside the block, including nested ones.
    pub node_ids: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EdgeKind {
    AstChild,
    CfgNext(Option<Branch>),
    DfgReaches(VarKey),
    CallsTo,
    ArgToParam(usize),
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub kind: EdgeKind,
    pub src: NodeId,
    pub dst: NodeId,
}

/// Per-function metadata kept alongside the graph.
#[derive(Debug, Clone)]
pub struct FnMeta {
    pub name: String,
    /// (name, declared C type) per parameter, in order.
    pub params: Vec<(String, String)>,
    pub variadic: bool,
    pub span: SourceSpan,
    pub body_span: SourceSpan,
    /// The physical file the function's bytes live in.
    pub unit_path: PathBuf,
    /// Names declared in the outermost block (plus parameters).
    pub top_level_names: Vec<String>,
    pub declared_names: Vec<String>,
}

#[derive(Debug, Default)]
pub struct CodePropertyGraph {
    pub nodes: Vec<CpgNode>,
    pub edges: Vec<Edge>,
    cfg_out: Vec<Vec<(NodeId, Option<Branch>)>>,
    cfg_in: Vec<Vec<NodeId>>,
    dfg_in: Vec<Vec<(NodeId, VarKey)>>,
    dfg_out: Vec<Vec<(NodeId, VarKey)>>,
    /// Function name -> entry node.
    pub function_index: BTreeMap<String, NodeId>,
    pub function_exit: BTreeMap<String, NodeId>,
    pub function_nodes: BTreeMap<String, Vec<NodeId>>,
    pub function_params: BTreeMap<String, Vec<NodeId>>,
    pub function_returns: BTreeMap<String, Vec<NodeId>>,
    pub fn_meta: BTreeMap<String, FnMeta>,
    pub blocks: Vec<BlockInfo>,
    /// Corpus function names whose value is taken outside a call position.
    pub address_taken: BTreeSet<String>,
    /// Physical source text per unit path.
    pub sources: BTreeMap<PathBuf, String>,
    pub warnings: Vec<CpgWarning>,
}

impl CodePropertyGraph {
    pub fn node(&self, id: NodeId) -> &CpgNode {
        &self.nodes[id.index()]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut CpgNode {
        &mut self.nodes[id.index()]
    }

    pub fn cfg_successors(&self, id: NodeId) -> &[(NodeId, Option<Branch>)] {
        &self.cfg_out[id.index()]
    }

    pub fn cfg_predecessors(&self, id: NodeId) -> &[NodeId] {
        &self.cfg_in[id.index()]
    }

    /// Reaching definitions into `id`: (defining node, variable label).
    pub fn dfg_into(&self, id: NodeId) -> &[(NodeId, VarKey)] {
        &self.dfg_in[id.index()]
    }

    pub fn dfg_out_of(&self, id: NodeId) -> &[(NodeId, VarKey)] {
        &self.dfg_out[id.index()]
    }

    pub fn source_of(&self, function: &str) -> Option<&str> {
        let meta = self.fn_meta.get(function)?;
        self.sources.get(&meta.unit_path).map(|s| s.as_str())
    }

    pub fn span_text(&self, node: NodeId) -> &str {
        let n = self.node(node);
        match self.source_of(&n.function) {
            Some(src) => n.span.slice(src),
            None => "",
        }
    }

    pub(crate) fn add_edge(&mut self, kind: EdgeKind, src: NodeId, dst: NodeId) {
        match &kind {
            EdgeKind::CfgNext(tag) => {
                if !self.cfg_out[src.index()].iter().any(|(d, t)| *d == dst && t == tag) {
                    self.cfg_out[src.index()].push((dst, *tag));
                    self.cfg_in[dst.index()].push(src);
                }
            }
            EdgeKind::DfgReaches(var) => {
                self.dfg_out[src.index()].push((dst, var.clone()));
                self.dfg_in[dst.index()].push((src, var.clone()));
            }
            _ => {}
        }
        self.edges.push(Edge { kind, src, dst });
    }

    /// Remove all DfgReaches edges touching nodes of `function` so they can
    /// be recomputed after augmentation.
    pub(crate) fn clear_dfg_for(&mut self, function: &str) {
        let ids: BTreeSet<NodeId> =
            self.function_nodes.get(function).into_iter().flatten().copied().collect();
        self.edges.retain(|e| {
            !(matches!(e.kind, EdgeKind::DfgReaches(_)) && ids.contains(&e.src))
        });
        for id in &ids {
            self.dfg_out[id.index()].clear();
            self.dfg_in[id.index()].retain(|(src, _)| !ids.contains(src));
        }
    }

    /// Recompute reaching-definition edges for one function, taking the
    /// augmentation overlays into account.
    pub fn recompute_dfg(&mut self, function: &str) {
        self.clear_dfg_for(function);
        reaching::compute_function_dfg(self, function);
    }

    /// Finalize adjacency ordering so queries are deterministic.
    pub(crate) fn normalize(&mut self) {
        for v in &mut self.cfg_out {
            v.sort();
            v.dedup();
        }
        for v in &mut self.cfg_in {
            v.sort();
            v.dedup();
        }
        for v in &mut self.dfg_in {
            v.sort();
            v.dedup();
        }
        for v in &mut self.dfg_out {
            v.sort();
            v.dedup();
        }
    }

    /// Enumerate loop-free control-flow paths (each CFG edge used at most
    /// once per path) from `from` to `to`, in lexicographic node-id order,
    /// up to `limit`. Returns the paths and whether the search truncated.
    pub fn cfg_paths_between(
        &self,
        from: NodeId,
        to: NodeId,
        limit: usize,
    ) -> (Vec<Vec<NodeId>>, bool) {
        let mut paths = Vec::new();
        let mut truncated = false;
        let mut used: BTreeSet<(NodeId, NodeId, Option<Branch>)> = BTreeSet::new();
        let mut path = vec![from];
        self.paths_dfs(from, to, limit, &mut used, &mut path, &mut paths, &mut truncated);
        (paths, truncated)
    }

    fn paths_dfs(
        &self,
        cur: NodeId,
        to: NodeId,
        limit: usize,
        used: &mut BTreeSet<(NodeId, NodeId, Option<Branch>)>,
        path: &mut Vec<NodeId>,
        out: &mut Vec<Vec<NodeId>>,
        truncated: &mut bool,
    ) {
        if out.len() >= limit {
            *truncated = true;
            return;
        }
        if cur == to {
            out.push(path.clone());
            return;
        }
        let succs = self.cfg_successors(cur).to_vec();
        for (next, tag) in succs {
            let key = (cur, next, tag);
            if used.contains(&key) {
                continue;
            }
            used.insert(key);
            path.push(next);
            self.paths_dfs(next, to, limit, used, path, out, truncated);
            path.pop();
            used.remove(&key);
            if out.len() >= limit {
                *truncated = true;
                return;
            }
        }
    }

    /// Is `to` reachable from `from` along CFG edges?
    pub fn cfg_reachable(&self, from: NodeId, to: NodeId) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if !seen.insert(n) {
                continue;
            }
            for (next, _) in self.cfg_successors(n) {
                stack.push(*next);
            }
        }
        false
    }

    /// All nodes reachable from `from` along CFG edges, including `from`.
    pub fn cfg_reachable_set(&self, from: NodeId) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            for (next, _) in self.cfg_successors(n) {
                stack.push(*next);
            }
        }
        seen
    }

    /// Line-oriented text export for debugging and oracle comparison.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            out.push_str(&format!(
                "node {} {} {}:{}\n",
                n.id,
                n.kind.as_str(),
                n.span.file.display(),
                n.span.start_line
            ));
        }
        let mut lines: Vec<String> = self
            .edges
            .iter()
            .map(|e| match &e.kind {
                EdgeKind::AstChild => format!("edge ast {} {}", e.src, e.dst),
                EdgeKind::CfgNext(_) => format!("edge cfg {} {}", e.src, e.dst),
                EdgeKind::DfgReaches(v) => format!("edge dfg {} {} {}", e.src, e.dst, v),
                EdgeKind::CallsTo => format!("edge call {} {}", e.src, e.dst),
                EdgeKind::ArgToParam(i) => format!("edge argparam {} {} {}", e.src, e.dst, i),
            })
            .collect();
        lines.sort();
        lines.dedup();
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }
}
