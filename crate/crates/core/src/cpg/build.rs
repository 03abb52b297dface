//! Graph construction: one pass per function building CFG nodes and edges,
//! followed by a reaching-definitions pass that adds the data-flow edges.

use super::reaching;
use super::{
    AssignRecord, AssignValue, Branch, BlockId, BlockInfo, CallInfo, CodePropertyGraph, CpgNode,
    EdgeKind, FnMeta, NodeId, NodeKind,
};
use crate::frontend::{
    arg_binding_key, lvalue_key, collect_read_keys, Expr, ExprKind, FunctionAst, SourceSpan, Stmt,
    StmtKind, TranslationUnit, UnaryOp, VarKey,
};
use std::collections::BTreeSet;

/// Function names whose calls never return.
pub(crate) const TERMINAL_CALLS: &[&str] = &["exit", "abort", "_exit", "_Exit"];

#[derive(Debug, Clone, PartialEq)]
pub enum CpgWarning {
    /// Same function name defined with a body twice; the first wins.
    DuplicateDefinition { name: String, span: SourceSpan },
}

impl std::fmt::Display for CpgWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CpgWarning::DuplicateDefinition { name, span } => {
                write!(f, "duplicate definition of `{}` at {} (first definition wins)", name, span)
            }
        }
    }
}

/// Build the code property graph for a set of parsed units.
pub fn build_cpg(units: Vec<TranslationUnit>) -> CodePropertyGraph {
    let mut g = CodePropertyGraph::default();

    let mut corpus_fns: BTreeSet<String> = BTreeSet::new();
    let mut global_vars: BTreeSet<String> = BTreeSet::new();
    for u in &units {
        for f in &u.functions {
            corpus_fns.insert(f.name.clone());
        }
        for gd in &u.globals {
            if !gd.is_prototype && !gd.is_typedef {
                global_vars.extend(gd.names.iter().cloned());
            }
        }
    }

    for u in &units {
        g.sources.insert(u.path.clone(), u.source.clone());
    }
    for u in &units {
        for f in &u.functions {
            if g.function_index.contains_key(&f.name) {
                g.warnings.push(CpgWarning::DuplicateDefinition {
                    name: f.name.clone(),
                    span: f.span.clone(),
                });
                continue;
            }
            let mut b = FnBuilder {
                g: &mut g,
                func: f,
                corpus_fns: &corpus_fns,
                global_vars: &global_vars,
                break_stack: Vec::new(),
                continue_stack: Vec::new(),
                block_stack: Vec::new(),
                ast_parents: Vec::new(),
                exit: NodeId(0),
            };
            b.build(u);
        }
    }

    // Call edges between corpus functions (direct calls by name).
    let mut call_edges = Vec::new();
    for n in &g.nodes {
        for call in &n.calls {
            if let Some(callee) = &call.callee {
                if let Some(&entry) = g.function_index.get(callee) {
                    call_edges.push((n.id, entry, callee.clone(), call.args.len()));
                }
            }
        }
    }
    for (src, entry, callee, argc) in call_edges {
        g.add_edge(EdgeKind::CallsTo, src, entry);
        let params = g.function_params.get(&callee).cloned().unwrap_or_default();
        for (i, p) in params.iter().enumerate().take(argc) {
            g.add_edge(EdgeKind::ArgToParam(i), src, *p);
        }
    }

    g.normalize();
    let names: Vec<String> = g.function_index.keys().cloned().collect();
    for name in names {
        reaching::compute_function_dfg(&mut g, &name);
    }
    g.normalize();
    g
}

type Preds = Vec<(NodeId, Option<Branch>)>;

enum ContinueTarget {
    Node(NodeId),
    /// `for (;;)` without a step: collect and wire to the body start later.
    Collect(Preds),
}

struct FnBuilder<'a> {
    g: &'a mut CodePropertyGraph,
    func: &'a FunctionAst,
    corpus_fns: &'a BTreeSet<String>,
    global_vars: &'a BTreeSet<String>,
    break_stack: Vec<Preds>,
    continue_stack: Vec<ContinueTarget>,
    block_stack: Vec<usize>,
    ast_parents: Vec<NodeId>,
    exit: NodeId,
}

impl<'a> FnBuilder<'a> {
    fn treat_as_function(&self, name: &str) -> bool {
        self.corpus_fns.contains(name)
            || !(self.func.declared_names.iter().any(|n| n == name)
                || self.global_vars.contains(name))
    }

    fn build(&mut self, unit: &TranslationUnit) {
        let func = self.func;
        let fname = func.name.clone();
        let body_span = func.body_span.clone();

        let entry_span = one_byte_span(&body_span, body_span.byte_start);
        let exit_span = one_byte_span(&body_span, body_span.byte_end.saturating_sub(1));

        let entry = self.add_node(NodeKind::Entry, entry_span, Effects::default(), None);
        self.g.function_index.insert(fname.clone(), entry);
        self.ast_parents.push(entry);

        let mut preds: Preds = vec![(entry, None)];
        let mut param_ids = Vec::new();
        for (i, p) in func.parameters.iter().enumerate() {
            if p.name.is_empty() {
                continue;
            }
            let mut eff = Effects::default();
            eff.defs.insert(VarKey::new(p.name.clone()));
            let id = self.add_node(NodeKind::Parameter, p.span.clone(), eff, None);
            self.g.node_mut(id).param_index = Some(i);
            self.g.node_mut(id).param_name = Some(p.name.clone());
            self.connect(&preds, id);
            preds = vec![(id, None)];
            param_ids.push(id);
        }
        self.g.function_params.insert(fname.clone(), param_ids);

        let exit = self.add_node(NodeKind::Exit, exit_span, Effects::default(), None);
        self.exit = exit;
        self.g.function_exit.insert(fname.clone(), exit);

        // Outermost block.
        let block = self.push_block(body_span.clone(), None);
        let mut p = preds;
        for (idx, s) in func.body.iter().enumerate() {
            p = self.build_stmt(s, p, Some((block, idx)), None);
        }
        self.pop_block();
        self.connect(&p, exit);
        self.ast_parents.pop();

        self.g.fn_meta.insert(
            fname.clone(),
            FnMeta {
                name: fname,
                params: func
                    .parameters
                    .iter()
                    .map(|p| (p.name.clone(), p.ctype.clone()))
                    .collect(),
                variadic: func.variadic,
                span: func.span.clone(),
                body_span,
                unit_path: unit.path.clone(),
                top_level_names: func.top_level_names.clone(),
                declared_names: func.declared_names.clone(),
            },
        );
    }

    fn push_block(&mut self, span: SourceSpan, branch_of: Option<(NodeId, bool)>) -> BlockId {
        let id = BlockId(self.g.blocks.len() as u32);
        self.g.blocks.push(BlockInfo {
            id,
            function: self.func.name.clone(),
            span,
            branch_of,
            node_ids: Vec::new(),
        });
        self.block_stack.push(id.0 as usize);
        id
    }

    fn pop_block(&mut self) {
        self.block_stack.pop();
    }

    fn add_node(
        &mut self,
        kind: NodeKind,
        span: SourceSpan,
        eff: Effects,
        slot: Option<(BlockId, usize)>,
    ) -> NodeId {
        let id = NodeId(self.g.nodes.len() as u32);
        let terminal = eff
            .calls
            .iter()
            .any(|c| c.callee.as_deref().is_some_and(|n| TERMINAL_CALLS.contains(&n)));
        let kind = if kind == NodeKind::Statement && !eff.calls.is_empty() {
            NodeKind::CallSite
        } else {
            kind
        };
        self.g.nodes.push(CpgNode {
            id,
            kind,
            function: self.func.name.clone(),
            stmt_span: span.clone(),
            span,
            defs: eff.defs,
            weak_defs: eff.weak_defs,
            maybe_defs: eff.maybe_defs,
            uses: eff.uses,
            aug_defs: BTreeSet::new(),
            aug_weak_defs: BTreeSet::new(),
            aug_maybe_defs: BTreeSet::new(),
            resolved_maybe: BTreeSet::new(),
            calls: eff.calls,
            assigns: eff.assigns,
            cond: None,
            param_index: None,
            param_name: None,
            ret_expr: None,
            opaque_reason: None,
            block: slot,
            terminal,
        });
        self.g.cfg_out.push(Vec::new());
        self.g.cfg_in.push(Vec::new());
        self.g.dfg_in.push(Vec::new());
        self.g.dfg_out.push(Vec::new());
        self.g.function_nodes.entry(self.func.name.clone()).or_default().push(id);
        for &b in &self.block_stack {
            self.g.blocks[b].node_ids.push(id);
        }
        if let Some(&parent) = self.ast_parents.last() {
            if parent != id {
                self.g.add_edge(EdgeKind::AstChild, parent, id);
            }
        }
        id
    }

    fn connect(&mut self, preds: &Preds, to: NodeId) {
        for (p, tag) in preds {
            self.g.add_edge(EdgeKind::CfgNext(*tag), *p, to);
        }
    }

    fn effects_of_expr(&self, e: &Expr) -> Effects {
        let treat = |n: &str| self.treat_as_function(n);
        let mut eff = Effects::default();
        let mut reads = Vec::new();
        collect_read_keys(e, &treat, &mut reads);
        eff.uses = reads.into_iter().collect();
        walk_writes(e, &treat, &mut eff);
        collect_taken_fn_names(e, self.corpus_fns, &mut eff.fn_names_taken);
        eff
    }

    fn build_stmt(
        &mut self,
        s: &Stmt,
        preds: Preds,
        slot: Option<(BlockId, usize)>,
        branch_ctx: Option<(NodeId, bool)>,
    ) -> Preds {
        match &s.kind {
            StmtKind::Empty | StmtKind::CaseLabel(_) => preds,
            StmtKind::Decl(ds) => {
                let mut eff = Effects::default();
                let treat = |n: &str| self.treat_as_function(n);
                let mut any_init = false;
                for d in ds {
                    if let Some(init) = &d.init {
                        any_init = true;
                        eff.defs.insert(VarKey::new(d.name.clone()));
                        let mut reads = Vec::new();
                        collect_read_keys(init, &treat, &mut reads);
                        eff.uses.extend(reads);
                        walk_writes(init, &treat, &mut eff);
                        collect_taken_fn_names(init, self.corpus_fns, &mut eff.fn_names_taken);
                        eff.assigns.push(AssignRecord {
                            lhs: VarKey::new(d.name.clone()),
                            weak: false,
                            indexed: false,
                            value: AssignValue::Expr(init.clone()),
                        });
                    }
                }
                if !any_init {
                    return preds;
                }
                self.note_taken(&eff);
                let id = self.add_node(NodeKind::Statement, s.span.clone(), eff, slot);
                self.connect(&preds, id);
                self.after_node(id)
            }
            StmtKind::Expr(e) => {
                let eff = self.effects_of_expr(e);
                self.note_taken(&eff);
                let id = self.add_node(NodeKind::Statement, s.span.clone(), eff, slot);
                self.connect(&preds, id);
                self.after_node(id)
            }
            StmtKind::Return(value) => {
                let eff = value.as_ref().map(|e| self.effects_of_expr(e)).unwrap_or_default();
                self.note_taken(&eff);
                let id = self.add_node(NodeKind::ReturnStmt, s.span.clone(), eff, slot);
                self.g.node_mut(id).ret_expr = value.clone();
                self.connect(&preds, id);
                let exit = self.exit;
                self.connect(&vec![(id, None)], exit);
                self.g.function_returns.entry(self.func.name.clone()).or_default().push(id);
                Vec::new()
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                let eff = self.effects_of_expr(cond);
                self.note_taken(&eff);
                let id = self.add_node(NodeKind::Condition, cond.span.clone(), eff, slot);
                self.g.node_mut(id).cond = Some(cond.clone());
                self.g.node_mut(id).stmt_span = s.span.clone();
                self.connect(&preds, id);
                self.ast_parents.push(id);
                let mut out =
                    self.build_stmt(then_branch, vec![(id, Some(Branch::True))], None, Some((id, true)));
                match else_branch {
                    Some(e) => {
                        let else_out =
                            self.build_stmt(e, vec![(id, Some(Branch::False))], None, Some((id, false)));
                        out.extend(else_out);
                    }
                    None => out.push((id, Some(Branch::False))),
                }
                self.ast_parents.pop();
                out
            }
            StmtKind::While { cond, body } => {
                let eff = self.effects_of_expr(cond);
                self.note_taken(&eff);
                let id = self.add_node(NodeKind::Condition, cond.span.clone(), eff, slot);
                self.g.node_mut(id).cond = Some(cond.clone());
                self.g.node_mut(id).stmt_span = s.span.clone();
                self.connect(&preds, id);
                self.ast_parents.push(id);
                self.break_stack.push(Vec::new());
                self.continue_stack.push(ContinueTarget::Node(id));
                let body_out = self.build_stmt(body, vec![(id, Some(Branch::True))], None, None);
                self.connect(&body_out, id);
                self.continue_stack.pop();
                let breaks = self.break_stack.pop().unwrap();
                self.ast_parents.pop();
                let mut out = vec![(id, Some(Branch::False))];
                out.extend(breaks);
                out
            }
            StmtKind::DoWhile { body, cond } => {
                let eff = self.effects_of_expr(cond);
                self.note_taken(&eff);
                let cond_id = self.add_node(NodeKind::Condition, cond.span.clone(), eff, None);
                self.g.node_mut(cond_id).cond = Some(cond.clone());
                self.g.node_mut(cond_id).stmt_span = s.span.clone();
                self.ast_parents.push(cond_id);
                self.break_stack.push(Vec::new());
                self.continue_stack.push(ContinueTarget::Node(cond_id));
                let watermark = self.g.nodes.len();
                let body_out = self.build_stmt(body, preds, slot, None);
                self.connect(&body_out, cond_id);
                let first_body = if self.g.nodes.len() > watermark {
                    NodeId(watermark as u32)
                } else {
                    cond_id
                };
                self.g.add_edge(EdgeKind::CfgNext(Some(Branch::True)), cond_id, first_body);
                self.continue_stack.pop();
                let breaks = self.break_stack.pop().unwrap();
                self.ast_parents.pop();
                let mut out = vec![(cond_id, Some(Branch::False))];
                out.extend(breaks);
                out
            }
            StmtKind::For { init, cond, step, body } => {
                let mut p = preds;
                if let Some(init) = init {
                    p = self.build_stmt(init, p, None, None);
                }
                let cond_id = cond.as_ref().map(|c| {
                    let eff = self.effects_of_expr(c);
                    self.note_taken(&eff);
                    let id = self.add_node(NodeKind::Condition, c.span.clone(), eff, slot);
                    self.g.node_mut(id).cond = Some(c.clone());
                    self.g.node_mut(id).stmt_span = s.span.clone();
                    id
                });
                let step_id = step.as_ref().map(|st| {
                    let eff = self.effects_of_expr(st);
                    self.note_taken(&eff);
                    self.add_node(NodeKind::Statement, st.span.clone(), eff, None)
                });
                if let Some(c) = cond_id {
                    self.connect(&p, c);
                    self.ast_parents.push(c);
                }
                let body_entry: Preds = match cond_id {
                    Some(c) => vec![(c, Some(Branch::True))],
                    None => p.clone(),
                };
                self.break_stack.push(Vec::new());
                self.continue_stack.push(match (step_id, cond_id) {
                    (Some(st), _) => ContinueTarget::Node(st),
                    (None, Some(c)) => ContinueTarget::Node(c),
                    (None, None) => ContinueTarget::Collect(Vec::new()),
                });
                let watermark = self.g.nodes.len();
                let body_out = self.build_stmt(body, body_entry, None, None);
                let first_body =
                    (self.g.nodes.len() > watermark).then(|| NodeId(watermark as u32));
                // Wire body exit through step back to the condition (or body).
                let back_target = cond_id.or(first_body);
                match step_id {
                    Some(st) => {
                        self.connect(&body_out, st);
                        if let Some(t) = back_target {
                            self.g.add_edge(EdgeKind::CfgNext(None), st, t);
                        }
                    }
                    None => {
                        if let Some(t) = back_target {
                            self.connect(&body_out, t);
                        }
                    }
                }
                let cont = self.continue_stack.pop().unwrap();
                if let ContinueTarget::Collect(pending) = cont {
                    if let Some(fb) = first_body {
                        self.connect(&pending, fb);
                    }
                }
                let breaks = self.break_stack.pop().unwrap();
                if cond_id.is_some() {
                    self.ast_parents.pop();
                }
                let mut out: Preds = Vec::new();
                if let Some(c) = cond_id {
                    out.push((c, Some(Branch::False)));
                }
                out.extend(breaks);
                out
            }
            StmtKind::Switch { scrutinee, body } => {
                let eff = self.effects_of_expr(scrutinee);
                self.note_taken(&eff);
                let dispatch = self.add_node(NodeKind::Condition, scrutinee.span.clone(), eff, slot);
                self.g.node_mut(dispatch).cond = Some(scrutinee.clone());
                self.g.node_mut(dispatch).stmt_span = s.span.clone();
                self.connect(&preds, dispatch);
                self.ast_parents.push(dispatch);
                self.break_stack.push(Vec::new());
                let block = self.push_block(s.span.clone(), None);

                let mut pending: Vec<Branch> = Vec::new();
                let mut case_counter: u32 = 0;
                let mut saw_default = false;
                let mut flow: Preds = Vec::new();
                for (idx, item) in body.iter().enumerate() {
                    match &item.kind {
                        StmtKind::CaseLabel(Some(_)) => {
                            pending.push(Branch::Case(case_counter));
                            case_counter += 1;
                        }
                        StmtKind::CaseLabel(None) => {
                            pending.push(Branch::Default);
                            saw_default = true;
                        }
                        _ => {
                            let watermark = self.g.nodes.len();
                            flow = self.build_stmt(item, flow, Some((block, idx)), None);
                            if self.g.nodes.len() > watermark && !pending.is_empty() {
                                let first = NodeId(watermark as u32);
                                for b in pending.drain(..) {
                                    self.g.add_edge(EdgeKind::CfgNext(Some(b)), dispatch, first);
                                }
                            }
                        }
                    }
                }
                self.pop_block();
                let breaks = self.break_stack.pop().unwrap();
                self.ast_parents.pop();
                let mut out = flow;
                out.extend(breaks);
                for b in pending {
                    out.push((dispatch, Some(b)));
                }
                if !saw_default {
                    out.push((dispatch, Some(Branch::Default)));
                }
                out
            }
            StmtKind::Break => {
                if let Some(frame) = self.break_stack.last_mut() {
                    frame.extend(preds);
                }
                Vec::new()
            }
            StmtKind::Continue => {
                match self.continue_stack.last_mut() {
                    Some(ContinueTarget::Node(t)) => {
                        let t = *t;
                        self.connect(&preds, t);
                    }
                    Some(ContinueTarget::Collect(pend)) => pend.extend(preds),
                    None => {}
                }
                Vec::new()
            }
            StmtKind::Compound(inner) => {
                let block = self.push_block(s.span.clone(), branch_ctx);
                let mut p = preds;
                for (idx, st) in inner.iter().enumerate() {
                    p = self.build_stmt(st, p, Some((block, idx)), None);
                }
                self.pop_block();
                p
            }
            StmtKind::Opaque { reason, referenced } => {
                let mut eff = Effects::default();
                for r in referenced {
                    eff.uses.insert(VarKey::new(r.clone()));
                }
                let id = self.add_node(NodeKind::Opaque, s.span.clone(), eff, slot);
                self.g.node_mut(id).opaque_reason = Some(reason.clone());
                self.connect(&preds, id);
                self.after_node(id)
            }
        }
    }

    /// Successor preds after a plain node: terminal calls divert to Exit.
    fn after_node(&mut self, id: NodeId) -> Preds {
        if self.g.node(id).terminal {
            let exit = self.exit;
            self.g.add_edge(EdgeKind::CfgNext(None), id, exit);
            Vec::new()
        } else {
            vec![(id, None)]
        }
    }

    fn note_taken(&mut self, eff: &Effects) {
        for n in &eff.fn_names_taken {
            self.g.address_taken.insert(n.clone());
        }
    }
}

fn one_byte_span(parent: &SourceSpan, at: usize) -> SourceSpan {
    let at = at.min(parent.byte_end.saturating_sub(1)).max(parent.byte_start);
    SourceSpan {
        file: parent.file.clone(),
        start_line: parent.start_line,
        start_col: parent.start_col,
        end_line: parent.start_line,
        end_col: parent.start_col,
        byte_start: at,
        byte_end: at + 1,
    }
}

#[derive(Default)]
pub(crate) struct Effects {
    pub defs: BTreeSet<VarKey>,
    pub weak_defs: BTreeSet<VarKey>,
    pub maybe_defs: BTreeSet<VarKey>,
    pub uses: BTreeSet<VarKey>,
    pub assigns: Vec<AssignRecord>,
    pub calls: Vec<CallInfo>,
    pub fn_names_taken: Vec<String>,
}

/// Record writes, assignment structure, and calls found anywhere in `e`.
fn walk_writes(e: &Expr, treat_as_fn: &dyn Fn(&str) -> bool, eff: &mut Effects) {
    match &e.kind {
        ExprKind::Assign { op, lhs, rhs } => {
            if let Some((key, weak)) = lvalue_key(lhs) {
                if weak {
                    eff.weak_defs.insert(key.clone());
                } else {
                    eff.defs.insert(key.clone());
                }
                let value = if *op == crate::frontend::AssignOp::Assign {
                    AssignValue::Expr((**rhs).clone())
                } else {
                    AssignValue::Compound((**rhs).clone())
                };
                eff.assigns.push(AssignRecord {
                    lhs: key,
                    weak,
                    indexed: lvalue_is_indexed(lhs),
                    value,
                });
            }
            walk_writes(lhs, treat_as_fn, eff);
            walk_writes(rhs, treat_as_fn, eff);
        }
        ExprKind::Unary { op, operand }
            if matches!(
                op,
                UnaryOp::PreInc | UnaryOp::PreDec | UnaryOp::PostInc | UnaryOp::PostDec
            ) =>
        {
            if let Some((key, weak)) = lvalue_key(operand) {
                if weak {
                    eff.weak_defs.insert(key.clone());
                } else {
                    eff.defs.insert(key.clone());
                }
                eff.assigns.push(AssignRecord {
                    lhs: key,
                    weak,
                    indexed: lvalue_is_indexed(operand),
                    value: AssignValue::SelfRef,
                });
            }
            walk_writes(operand, treat_as_fn, eff);
        }
        ExprKind::Call { callee, args } => {
            let (name, indirect) = match &callee.kind {
                ExprKind::Ident(n) if treat_as_fn(n) => (Some(n.clone()), false),
                ExprKind::Ident(_) => (None, true),
                _ => (None, true),
            };
            // Address-of arguments are conservatively maybe-written here;
            // interprocedural summaries refine this later.
            for a in args {
                if matches!(&a.kind, ExprKind::Unary { op: UnaryOp::AddrOf, .. })
                    || matches!(&a.kind, ExprKind::Cast { operand, .. }
                        if matches!(&operand.kind, ExprKind::Unary { op: UnaryOp::AddrOf, .. }))
                {
                    if let Some(key) = arg_binding_key(a) {
                        eff.maybe_defs.insert(key);
                    }
                }
            }
            eff.calls.push(CallInfo {
                callee: name,
                indirect,
                args: args.clone(),
                span: e.span.clone(),
            });
            walk_writes(callee, treat_as_fn, eff);
            for a in args {
                walk_writes(a, treat_as_fn, eff);
            }
        }
        ExprKind::Unary { operand, .. } => walk_writes(operand, treat_as_fn, eff),
        ExprKind::Binary { lhs, rhs, .. } | ExprKind::Comma { lhs, rhs } => {
            walk_writes(lhs, treat_as_fn, eff);
            walk_writes(rhs, treat_as_fn, eff);
        }
        ExprKind::Ternary { cond, then_val, else_val } => {
            walk_writes(cond, treat_as_fn, eff);
            walk_writes(then_val, treat_as_fn, eff);
            walk_writes(else_val, treat_as_fn, eff);
        }
        ExprKind::Index { base, index } => {
            walk_writes(base, treat_as_fn, eff);
            walk_writes(index, treat_as_fn, eff);
        }
        ExprKind::Member { base, .. } | ExprKind::Cast { operand: base, .. } => {
            walk_writes(base, treat_as_fn, eff)
        }
        ExprKind::SizeofExpr(inner) => walk_writes(inner, treat_as_fn, eff),
        ExprKind::BracedInit(items) => {
            for i in items {
                walk_writes(i, treat_as_fn, eff);
            }
        }
        _ => {}
    }
}

/// Corpus function names used outside a direct-call position ("taken"):
/// assigned, passed as arguments, or address-of'd.
fn collect_taken_fn_names(e: &Expr, corpus_fns: &BTreeSet<String>, out: &mut Vec<String>) {
    match &e.kind {
        ExprKind::Ident(n) => {
            if corpus_fns.contains(n) {
                out.push(n.clone());
            }
        }
        ExprKind::Call { callee, args } => {
            // The direct callee is a call, not a taken name.
            if !matches!(&callee.kind, ExprKind::Ident(_)) {
                collect_taken_fn_names(callee, corpus_fns, out);
            }
            for a in args {
                collect_taken_fn_names(a, corpus_fns, out);
            }
        }
        ExprKind::Unary { operand, .. } => collect_taken_fn_names(operand, corpus_fns, out),
        ExprKind::Binary { lhs, rhs, .. } | ExprKind::Comma { lhs, rhs } => {
            collect_taken_fn_names(lhs, corpus_fns, out);
            collect_taken_fn_names(rhs, corpus_fns, out);
        }
        ExprKind::Assign { lhs, rhs, .. } => {
            collect_taken_fn_names(lhs, corpus_fns, out);
            collect_taken_fn_names(rhs, corpus_fns, out);
        }
        ExprKind::Ternary { cond, then_val, else_val } => {
            collect_taken_fn_names(cond, corpus_fns, out);
            collect_taken_fn_names(then_val, corpus_fns, out);
            collect_taken_fn_names(else_val, corpus_fns, out);
        }
        ExprKind::Index { base, index } => {
            collect_taken_fn_names(base, corpus_fns, out);
            collect_taken_fn_names(index, corpus_fns, out);
        }
        ExprKind::Member { base, .. } | ExprKind::Cast { operand: base, .. } => {
            collect_taken_fn_names(base, corpus_fns, out)
        }
        ExprKind::SizeofExpr(inner) => collect_taken_fn_names(inner, corpus_fns, out),
        ExprKind::BracedInit(items) => {
            for i in items {
                collect_taken_fn_names(i, corpus_fns, out);
            }
        }
        _ => {}
    }
}

/// Does the lvalue path go through an array subscript?
fn lvalue_is_indexed(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Index { .. } => true,
        ExprKind::Member { base, .. } | ExprKind::Cast { operand: base, .. } => {
            lvalue_is_indexed(base)
        }
        ExprKind::Unary { operand, .. } => lvalue_is_indexed(operand),
        _ => false,
    }
}
