//! Source rewriting: decide whether a security mechanism is understood well
//! enough to disable, enumerate the applicable rewrite classes, pick one
//! with a seeded RNG, and splice the bytes.
//!
//! Rewrites are conservative: a site is only touched when every element of
//! the condition is inside the supported subset, and a rewrite that fails
//! to re-parse is rolled back and its variant blacklisted.

use crate::cpg::{CodePropertyGraph, NodeId};
use crate::frontend::{self, BinaryOp, Expr, ExprKind, SourceSpan, UnaryOp};
use crate::guards::{ControlFlowCorridor, GuardClass, GuardSite, Polarity};
use crate::interproc::VulnClass;
use crate::taint::{DataFlowPath, SinkSite, SourceSinkPair};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::PathBuf;
use thiserror::Error;

/// Fixed magic constants for always-false comparisons.
pub const MAGIC_CONSTANTS: &[&str] = &["0xDEADC0DE", "0xCAFEBABE", "0x5EED5EED"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstrClass {
    RemoveMechanism,
    SurroundAlwaysFalse,
    SurroundAlwaysTrue,
    ArithmeticInfluence,
    MoveToUnrelatedPath,
    SwapCheckAndSink,
    IntegerOverflowAntiPattern,
    /// Sink-side anti-pattern: drop a `"%s"` format in favor of the raw
    /// argument. Not part of the guard-disabling classes.
    FormatStringAntiPattern,
}

impl InstrClass {
    pub fn as_str(self) -> &'static str {
        match self {
            InstrClass::RemoveMechanism => "remove_mechanism",
            InstrClass::SurroundAlwaysFalse => "surround_always_false",
            InstrClass::SurroundAlwaysTrue => "surround_always_true",
            InstrClass::ArithmeticInfluence => "arithmetic_influence",
            InstrClass::MoveToUnrelatedPath => "move_to_unrelated_path",
            InstrClass::SwapCheckAndSink => "swap_check_and_sink",
            InstrClass::IntegerOverflowAntiPattern => "integer_overflow_anti_pattern",
            InstrClass::FormatStringAntiPattern => "format_string_anti_pattern",
        }
    }

    pub fn parse(s: &str) -> Option<InstrClass> {
        Some(match s {
            "remove_mechanism" => InstrClass::RemoveMechanism,
            "surround_always_false" => InstrClass::SurroundAlwaysFalse,
            "surround_always_true" => InstrClass::SurroundAlwaysTrue,
            "arithmetic_influence" => InstrClass::ArithmeticInfluence,
            "move_to_unrelated_path" => InstrClass::MoveToUnrelatedPath,
            "swap_check_and_sink" => InstrClass::SwapCheckAndSink,
            "integer_overflow_anti_pattern" => InstrClass::IntegerOverflowAntiPattern,
            "format_string_anti_pattern" => InstrClass::FormatStringAntiPattern,
            _ => return None,
        })
    }
}

/// One byte splice: replace `[byte_start, byte_end)` of `file` with
/// `replacement`. `original` snapshots the bytes being replaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rewrite {
    pub file: PathBuf,
    pub byte_start: usize,
    pub byte_end: usize,
    pub original: String,
    pub replacement: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstrumentationPlan {
    pub class: InstrClass,
    pub variant_id: usize,
    pub rewrites: Vec<Rewrite>,
    pub rng_seed: u64,
}

/// Why a site is not eligible for instrumentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// The alternative path does not abort, so disabling it adds nothing.
    NotSecurityCritical,
    UnknownPolarity,
    /// The condition uses constructs outside what the rewriters model.
    NotUnderstood,
    /// Sanitizations are recorded but never rewritten.
    SanitizationNotCovered,
}

impl std::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SkipReason::NotSecurityCritical => "not_security_critical",
            SkipReason::UnknownPolarity => "unknown_polarity",
            SkipReason::NotUnderstood => "not_understood",
            SkipReason::SanitizationNotCovered => "sanitization_not_covered",
        };
        write!(f, "{}", s)
    }
}

#[derive(Debug, Error)]
pub enum InstrumentError {
    #[error("file bytes changed since analysis at {file}:{byte_start}")]
    SpanMismatch { file: PathBuf, byte_start: usize },
    #[error("rewrite produced unparseable code ({0})")]
    ReparseFailure(String),
    #[error("no applicable instrumentation variant survives")]
    NoViableVariant,
    #[error("not applicable: {0}")]
    NotApplicable(String),
}

/// True (with no reason) only when the mechanism is an aborting check with
/// known polarity whose condition stays inside the supported subset.
pub fn is_bugdoorable(graph: &CodePropertyGraph, site: &GuardSite) -> Result<(), SkipReason> {
    match site.classification {
        GuardClass::Sanitization => return Err(SkipReason::SanitizationNotCovered),
        GuardClass::NonAbortingCheck => return Err(SkipReason::NotSecurityCritical),
        GuardClass::UnrecognizedMechanism => return Err(SkipReason::NotUnderstood),
        GuardClass::AbortingCheck => {}
    }
    if site.polarity == Polarity::Unknown {
        return Err(SkipReason::UnknownPolarity);
    }
    let node = graph.node(site.condition_node);
    let Some(cond) = &node.cond else { return Err(SkipReason::NotUnderstood) };
    if !condition_understood(graph, cond) {
        return Err(SkipReason::NotUnderstood);
    }
    Ok(())
}

/// The condition must consist of subset constructs with no side effects and
/// no calls to functions the analysis knows nothing about.
fn condition_understood(graph: &CodePropertyGraph, e: &Expr) -> bool {
    match &e.kind {
        ExprKind::IntLit(_) | ExprKind::CharLit(_) | ExprKind::Ident(_) | ExprKind::StrLit(_) => {
            true
        }
        ExprKind::FloatLit(_) => true,
        ExprKind::Unary { op, operand } => match op {
            UnaryOp::PreInc | UnaryOp::PreDec | UnaryOp::PostInc | UnaryOp::PostDec => false,
            _ => condition_understood(graph, operand),
        },
        ExprKind::Binary { lhs, rhs, .. } => {
            condition_understood(graph, lhs) && condition_understood(graph, rhs)
        }
        ExprKind::Assign { .. } => false,
        ExprKind::Comma { .. } => false,
        ExprKind::Ternary { cond, then_val, else_val } => {
            condition_understood(graph, cond)
                && condition_understood(graph, then_val)
                && condition_understood(graph, else_val)
        }
        ExprKind::Call { callee, args } => {
            let known = match &callee.kind {
                ExprKind::Ident(name) => graph.function_index.contains_key(name),
                _ => false,
            };
            known && args.iter().all(|a| condition_understood(graph, a))
        }
        ExprKind::Index { base, index } => {
            condition_understood(graph, base) && condition_understood(graph, index)
        }
        ExprKind::Member { base, .. } => condition_understood(graph, base),
        ExprKind::Cast { operand, .. } => condition_understood(graph, operand),
        ExprKind::SizeofType(_) | ExprKind::SizeofExpr(_) => true,
        ExprKind::BracedInit(_) => false,
    }
}

/// A concrete variant within a class, carrying what the applier needs.
#[derive(Debug, Clone)]
enum Variant {
    RemoveWhole,
    RemoveGate,
    SurroundFalse { magic_idx: usize },
    SurroundTrue { magic_idx: usize },
    ArithReplaceConstant,
    ArithScaledConstantText,
    ArithScaleVariable,
    ArithNarrowingCast,
    ArithConjoinMagic { magic_idx: usize },
    MoveToBlock { block_idx: usize },
    Swap { sink_node: NodeId },
    OverflowCastDown,
}

#[derive(Debug, Clone)]
pub struct ApplicableSet {
    variants: Vec<(InstrClass, Variant)>,
}

impl ApplicableSet {
    /// (class, variant count) pairs, the public enumeration shape.
    pub fn summary(&self) -> Vec<(InstrClass, usize)> {
        let mut out: Vec<(InstrClass, usize)> = Vec::new();
        for (class, _) in &self.variants {
            match out.iter_mut().find(|(c, _)| c == class) {
                Some((_, n)) => *n += 1,
                None => out.push((*class, 1)),
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn retain_classes(&mut self, allowed: &BTreeSet<InstrClass>) {
        self.variants.retain(|(c, _)| allowed.contains(c));
    }
}

/// Enumerate the rewrites that can disable this mechanism. Empty when the
/// surrounding shape rules one out (no comparison for arithmetic influence,
/// no adjacent sink for swapping, no disjoint branch for relocation).
pub fn applicable_instrumentations(
    graph: &CodePropertyGraph,
    site: &GuardSite,
    corridor: &ControlFlowCorridor,
) -> ApplicableSet {
    let mut variants: Vec<(InstrClass, Variant)> = Vec::new();
    if is_bugdoorable(graph, site).is_err() {
        return ApplicableSet { variants };
    }
    let node = graph.node(site.condition_node);
    let cond = node.cond.clone().expect("bugdoorable site has a condition");

    match site.polarity {
        Polarity::MustBeFalseToPass => {
            variants.push((InstrClass::RemoveMechanism, Variant::RemoveWhole));
            for i in 0..MAGIC_CONSTANTS.len() {
                variants.push((InstrClass::SurroundAlwaysFalse, Variant::SurroundFalse { magic_idx: i }));
            }
        }
        Polarity::MustBeTrueToPass => {
            variants.push((InstrClass::RemoveMechanism, Variant::RemoveGate));
            for i in 0..MAGIC_CONSTANTS.len() {
                variants.push((InstrClass::SurroundAlwaysTrue, Variant::SurroundTrue { magic_idx: i }));
            }
        }
        Polarity::Unknown => return ApplicableSet { variants: Vec::new() },
    }

    // Arithmetic influence needs a relational comparison against an integer
    // literal.
    if let Some(cmp) = find_int_comparison(&cond) {
        variants.push((InstrClass::ArithmeticInfluence, Variant::ArithReplaceConstant));
        variants.push((InstrClass::ArithmeticInfluence, Variant::ArithScaledConstantText));
        variants.push((InstrClass::ArithmeticInfluence, Variant::ArithScaleVariable));
        if cmp.constant.unsigned_abs() > 127 {
            variants.push((InstrClass::ArithmeticInfluence, Variant::ArithNarrowingCast));
        }
        for i in 0..MAGIC_CONSTANTS.len() {
            variants.push((InstrClass::ArithmeticInfluence, Variant::ArithConjoinMagic { magic_idx: i }));
        }
    }

    // Relocation targets: if-branch blocks disjoint from the corridor, in
    // the same function, with the condition's names in function scope.
    if scope_is_function_wide(graph, site) {
        let corridor_nodes = corridor.node_set();
        for (i, block) in graph.blocks.iter().enumerate() {
            if block.function != node.function || block.branch_of.is_none() {
                continue;
            }
            if block.span.contains(&node.stmt_span) || node.stmt_span.contains(&block.span) {
                continue;
            }
            if block.node_ids.iter().any(|n| corridor_nodes.contains(n)) {
                continue;
            }
            if block
                .branch_of
                .map(|(c, _)| corridor_nodes.contains(&c) || c == site.condition_node)
                .unwrap_or(false)
            {
                continue;
            }
            variants.push((InstrClass::MoveToUnrelatedPath, Variant::MoveToBlock { block_idx: i }));
        }
    }

    // Swapping requires the guard and the sink to be adjacent statements in
    // one block with no intervening writes to the guarded variable.
    if site.polarity == Polarity::MustBeFalseToPass {
        let sink_node = corridor.path.sink.call_node;
        let sn = graph.node(sink_node);
        if let (Some((gb, gi)), Some((sb, si))) = (node.block, sn.block) {
            if gb == sb && si == gi + 1 {
                variants.push((InstrClass::SwapCheckAndSink, Variant::Swap { sink_node }));
            }
        }
    }

    // Overflow-check anti-pattern: `a + b < a` shapes.
    if overflow_check_shape(&cond) {
        variants.push((InstrClass::IntegerOverflowAntiPattern, Variant::OverflowCastDown));
    }

    ApplicableSet { variants }
}

/// The guard's identifiers must live at function scope so the statement can
/// be relocated without breaking name resolution.
fn scope_is_function_wide(graph: &CodePropertyGraph, site: &GuardSite) -> bool {
    let node = graph.node(site.condition_node);
    let Some(meta) = graph.fn_meta.get(&node.function) else { return false };
    let Some(cond) = &node.cond else { return false };
    let mut idents = Vec::new();
    frontend::collect_idents(cond, &mut idents);
    idents.iter().all(|name| {
        meta.top_level_names.iter().any(|n| n == name)
            || graph.function_index.contains_key(name)
            || !meta.declared_names.iter().any(|n| n == name)
    })
}

struct IntComparison {
    op: BinaryOp,
    constant: i64,
    const_span: SourceSpan,
    var_span: SourceSpan,
    const_on_left: bool,
}

fn find_int_comparison(e: &Expr) -> Option<IntComparison> {
    match &e.kind {
        ExprKind::Binary { op, lhs, rhs } if op.is_relational() => {
            if let Some(c) = rhs.as_int_lit() {
                return Some(IntComparison {
                    op: *op,
                    constant: c,
                    const_span: rhs.span.clone(),
                    var_span: lhs.span.clone(),
                    const_on_left: false,
                });
            }
            if let Some(c) = lhs.as_int_lit() {
                return Some(IntComparison {
                    op: *op,
                    constant: c,
                    const_span: lhs.span.clone(),
                    var_span: rhs.span.clone(),
                    const_on_left: true,
                });
            }
            None
        }
        ExprKind::Binary { lhs, rhs, .. } => {
            find_int_comparison(lhs).or_else(|| find_int_comparison(rhs))
        }
        ExprKind::Unary { operand, .. } | ExprKind::Cast { operand, .. } => {
            find_int_comparison(operand)
        }
        _ => None,
    }
}

/// `a + b < a`-style overflow checks (sum relationally compared against one
/// of its operands).
fn overflow_check_shape(e: &Expr) -> bool {
    fn text_eq(a: &Expr, b: &Expr) -> bool {
        // Structural identity on simple operand shapes.
        match (&a.kind, &b.kind) {
            (ExprKind::Ident(x), ExprKind::Ident(y)) => x == y,
            (ExprKind::Member { base: ba, field: fa, .. }, ExprKind::Member { base: bb, field: fb, .. }) => {
                fa == fb && text_eq(ba, bb)
            }
            _ => false,
        }
    }
    match &e.kind {
        ExprKind::Binary { op, lhs, rhs } if op.is_relational() => {
            let sum_vs = |sum: &Expr, other: &Expr| match &sum.kind {
                ExprKind::Binary { op: BinaryOp::Add, lhs: a, rhs: b } => {
                    text_eq(a, other) || text_eq(b, other)
                }
                _ => false,
            };
            sum_vs(lhs, rhs) || sum_vs(rhs, lhs)
        }
        ExprKind::Binary { lhs, rhs, .. } => overflow_check_shape(lhs) || overflow_check_shape(rhs),
        ExprKind::Unary { operand, .. } | ExprKind::Cast { operand, .. } => {
            overflow_check_shape(operand)
        }
        _ => false,
    }
}

/// Candidate identifiers for magic-constant comparisons: the guarded value
/// first, then pointer or integer parameters of the enclosing function.
fn magic_identifier_candidates(graph: &CodePropertyGraph, site: &GuardSite) -> Vec<String> {
    let node = graph.node(site.condition_node);
    let mut out = vec![site.guarded_var.to_string()];
    if let Some(meta) = graph.fn_meta.get(&node.function) {
        for (name, ctype) in &meta.params {
            if name.is_empty() {
                continue;
            }
            let t = ctype.to_ascii_lowercase();
            if t.contains("struct") || t.contains("union") {
                continue;
            }
            if !out.contains(name) {
                out.push(name.clone());
            }
        }
    }
    out
}

/// Choose uniformly over the flattened (class, variant) set with the seeded
/// generator and build the rewrite plan. Pure with respect to the seed.
pub fn choose_plan(
    graph: &CodePropertyGraph,
    site: &GuardSite,
    candidates: &ApplicableSet,
    seed: u64,
) -> Result<InstrumentationPlan, InstrumentError> {
    if candidates.variants.is_empty() {
        return Err(InstrumentError::NoViableVariant);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = rng.random_range(0..candidates.variants.len());
    build_plan(graph, site, candidates, idx, seed, &mut rng)
}

/// Build the plan for one specific flattened variant index.
pub fn build_plan(
    graph: &CodePropertyGraph,
    site: &GuardSite,
    candidates: &ApplicableSet,
    variant_id: usize,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<InstrumentationPlan, InstrumentError> {
    let (class, variant) = candidates
        .variants
        .get(variant_id)
        .cloned()
        .ok_or(InstrumentError::NoViableVariant)?;
    let node = graph.node(site.condition_node);
    let Some(meta) = graph.fn_meta.get(&node.function) else {
        return Err(InstrumentError::NotApplicable("function metadata missing".into()));
    };
    let file = meta.unit_path.clone();
    let src = graph
        .sources
        .get(&file)
        .ok_or_else(|| InstrumentError::NotApplicable("source text missing".into()))?;

    let stmt_span = node.stmt_span.clone();
    let cond_span = node.span.clone();
    let stmt_text = stmt_span.slice(src).to_string();
    let cond_text = cond_span.slice(src).to_string();
    let mk = |byte_start: usize, byte_end: usize, replacement: String| Rewrite {
        file: file.clone(),
        byte_start,
        byte_end,
        original: src[byte_start..byte_end].to_string(),
        replacement,
    };

    let rewrites = match variant {
        Variant::RemoveWhole => {
            vec![mk(stmt_span.byte_start, stmt_span.byte_end, blank_preserving_newlines(&stmt_text))]
        }
        Variant::RemoveGate => {
            // Blank from the statement start through the `)` closing the
            // condition, keeping the guarded body.
            let close = find_close_paren(src, cond_span.byte_end)
                .ok_or_else(|| InstrumentError::NotApplicable("no closing paren".into()))?;
            let head = &src[stmt_span.byte_start..close + 1];
            vec![mk(stmt_span.byte_start, close + 1, blank_preserving_newlines(head))]
        }
        Variant::SurroundFalse { magic_idx } => {
            let ident = draw_ident(graph, site, rng);
            let magic = MAGIC_CONSTANTS[magic_idx];
            let body = flatten_to_one_line(&stmt_text);
            vec![mk(
                stmt_span.byte_start,
                stmt_span.byte_end,
                format!("if ((long)({}) == {}) {{ {} }}", ident, magic, body),
            )]
        }
        Variant::SurroundTrue { magic_idx } => {
            let ident = draw_ident(graph, site, rng);
            let magic = MAGIC_CONSTANTS[magic_idx];
            vec![mk(
                cond_span.byte_start,
                cond_span.byte_end,
                format!("({}) || (long)({}) != {}", cond_text, ident, magic),
            )]
        }
        Variant::ArithReplaceConstant | Variant::ArithScaledConstantText => {
            let cmp = find_int_comparison(node.cond.as_ref().unwrap())
                .ok_or_else(|| InstrumentError::NotApplicable("no integer comparison".into()))?;
            let widen = site.polarity == Polarity::MustBeTrueToPass;
            let grow = constant_should_grow(cmp.op, cmp.const_on_left, widen);
            let replacement = match variant {
                Variant::ArithReplaceConstant => {
                    let value = if grow { cmp.constant.saturating_mul(2) } else { cmp.constant / 2 };
                    format!("{}", value)
                }
                _ => {
                    let text = cmp.const_span.slice(src);
                    if grow {
                        format!("{}*2", text)
                    } else {
                        format!("{}/2", text)
                    }
                }
            };
            vec![mk(cmp.const_span.byte_start, cmp.const_span.byte_end, replacement)]
        }
        Variant::ArithScaleVariable => {
            let cmp = find_int_comparison(node.cond.as_ref().unwrap())
                .ok_or_else(|| InstrumentError::NotApplicable("no integer comparison".into()))?;
            let widen = site.polarity == Polarity::MustBeTrueToPass;
            // Scaling the variable side moves the effective threshold the
            // opposite way from scaling the constant.
            let grow_const = constant_should_grow(cmp.op, cmp.const_on_left, widen);
            let var_text = cmp.var_span.slice(src);
            let replacement = if grow_const {
                format!("({})/2", var_text)
            } else {
                format!("({})*2", var_text)
            };
            vec![mk(cmp.var_span.byte_start, cmp.var_span.byte_end, replacement)]
        }
        Variant::ArithNarrowingCast => {
            let cmp = find_int_comparison(node.cond.as_ref().unwrap())
                .ok_or_else(|| InstrumentError::NotApplicable("no integer comparison".into()))?;
            let var_text = cmp.var_span.slice(src);
            vec![mk(cmp.var_span.byte_start, cmp.var_span.byte_end, format!("(char)({})", var_text))]
        }
        Variant::ArithConjoinMagic { magic_idx } => {
            let ident = draw_ident(graph, site, rng);
            let magic = MAGIC_CONSTANTS[magic_idx];
            let replacement = match site.polarity {
                Polarity::MustBeFalseToPass => {
                    format!("(long)({}) == {} && ({})", ident, magic, cond_text)
                }
                _ => format!("({}) || (long)({}) != {}", cond_text, ident, magic),
            };
            vec![mk(cond_span.byte_start, cond_span.byte_end, replacement)]
        }
        Variant::MoveToBlock { block_idx } => {
            let block = &graph.blocks[block_idx];
            let insert_at = block.span.byte_start;
            if &src[insert_at..insert_at + 1] != "{" {
                return Err(InstrumentError::NotApplicable("destination is not a block".into()));
            }
            vec![
                mk(stmt_span.byte_start, stmt_span.byte_end, blank_preserving_newlines(&stmt_text)),
                mk(insert_at, insert_at + 1, format!("{{ {} ", flatten_to_one_line(&stmt_text))),
            ]
        }
        Variant::Swap { sink_node } => {
            let sink_span = graph.node(sink_node).stmt_span.clone();
            let sink_text = sink_span.slice(src).to_string();
            vec![
                mk(stmt_span.byte_start, stmt_span.byte_end, sink_text),
                mk(sink_span.byte_start, sink_span.byte_end, stmt_text.clone()),
            ]
        }
        Variant::OverflowCastDown => {
            // Narrow both sides of the overflow check so it stops firing on
            // the widths that matter.
            vec![mk(cond_span.byte_start, cond_span.byte_end, format!("(char)({})", cond_text))]
        }
    };

    let mut rewrites = rewrites;
    rewrites.sort_by_key(|r| r.byte_start);
    for w in rewrites.windows(2) {
        if w[0].byte_end > w[1].byte_start {
            return Err(InstrumentError::NotApplicable("overlapping rewrite spans".into()));
        }
    }
    Ok(InstrumentationPlan { class, variant_id, rewrites, rng_seed: seed })
}

fn draw_ident(graph: &CodePropertyGraph, site: &GuardSite, rng: &mut ChaCha8Rng) -> String {
    let candidates = magic_identifier_candidates(graph, site);
    candidates[rng.random_range(0..candidates.len())].clone()
}

/// Should the comparison constant grow to move the check the desired way?
/// `widen` asks for a larger true-region (gates); otherwise the true-region
/// shrinks (abort checks fire less).
fn constant_should_grow(op: BinaryOp, const_on_left: bool, widen: bool) -> bool {
    // For `x < C` (const right): larger C widens. For `x > C`: larger C
    // narrows. Mirrored when the constant is on the left.
    let larger_widens = match (op, const_on_left) {
        (BinaryOp::Lt | BinaryOp::Le, false) => true,
        (BinaryOp::Gt | BinaryOp::Ge, false) => false,
        (BinaryOp::Lt | BinaryOp::Le, true) => false,
        (BinaryOp::Gt | BinaryOp::Ge, true) => true,
        _ => false,
    };
    larger_widens == widen
}

fn blank_preserving_newlines(text: &str) -> String {
    text.chars().map(|c| if c == '\n' { '\n' } else { ' ' }).collect()
}

fn flatten_to_one_line(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last_space = false;
    for c in text.chars() {
        let c = if c == '\n' || c == '\t' { ' ' } else { c };
        if c == ' ' && last_space {
            continue;
        }
        last_space = c == ' ';
        out.push(c);
    }
    out
}

fn find_close_paren(src: &str, from: usize) -> Option<usize> {
    src[from..].find(')').map(|i| from + i)
}

/// Replace `printf("%s", buf)`-style calls with `printf(buf)`.
pub fn format_string_antipattern(
    graph: &CodePropertyGraph,
    sink: &SinkSite,
) -> Result<InstrumentationPlan, InstrumentError> {
    let node = graph.node(sink.call_node);
    let meta = graph
        .fn_meta
        .get(&node.function)
        .ok_or_else(|| InstrumentError::NotApplicable("function metadata missing".into()))?;
    let src = graph
        .sources
        .get(&meta.unit_path)
        .ok_or_else(|| InstrumentError::NotApplicable("source text missing".into()))?;

    for call in &node.calls {
        if call.callee.as_deref() != Some(sink.callee.as_str()) {
            continue;
        }
        // The format slot is fixed per family; the site may instead name
        // the formatted data argument (the slot the taint trace follows).
        let fmt_idx = match sink.callee.as_str() {
            "printf" => 0,
            "fprintf" => 1,
            _ => sink.sensitive_arg_index,
        };
        let Some(fmt_arg) = call.args.get(fmt_idx) else { continue };
        let ExprKind::StrLit(lit) = &fmt_arg.kind else {
            return Err(InstrumentError::NotApplicable("format is not a literal".into()));
        };
        if lit != "%s" {
            return Err(InstrumentError::NotApplicable(
                "format is not a plain string pass-through".into(),
            ));
        }
        let Some(data_arg) = call.args.get(fmt_idx + 1) else {
            return Err(InstrumentError::NotApplicable("no argument after the format".into()));
        };
        if call.args.len() != fmt_idx + 2 {
            return Err(InstrumentError::NotApplicable("more than one formatted argument".into()));
        }
        let start = fmt_arg.span.byte_start;
        let end = data_arg.span.byte_start;
        return Ok(InstrumentationPlan {
            class: InstrClass::FormatStringAntiPattern,
            variant_id: 0,
            rewrites: vec![Rewrite {
                file: meta.unit_path.clone(),
                byte_start: start,
                byte_end: end,
                original: src[start..end].to_string(),
                replacement: String::new(),
            }],
            rng_seed: 0,
        });
    }
    Err(InstrumentError::NotApplicable("no matching call at the sink node".into()))
}

/// Apply a plan to file contents, verifying the recorded original bytes.
pub fn apply_plan(plan: &InstrumentationPlan, text: &str) -> Result<String, InstrumentError> {
    let mut rewrites = plan.rewrites.clone();
    rewrites.sort_by_key(|r| r.byte_start);
    let mut out = String::with_capacity(text.len());
    let mut pos = 0usize;
    for r in &rewrites {
        if r.byte_end > text.len() || &text[r.byte_start..r.byte_end] != r.original {
            return Err(InstrumentError::SpanMismatch {
                file: r.file.clone(),
                byte_start: r.byte_start,
            });
        }
        out.push_str(&text[pos..r.byte_start]);
        out.push_str(&r.replacement);
        pos = r.byte_end;
    }
    out.push_str(&text[pos..]);
    Ok(out)
}

/// The full ground-truth provenance of one inserted bug.
#[derive(Debug, Clone)]
pub struct GroundTruthRecord {
    pub pair: SourceSinkPair,
    pub chosen_path: DataFlowPath,
    pub guard: Option<GuardSite>,
    pub plan: InstrumentationPlan,
    pub original_snippet: String,
    pub rewritten_snippet: String,
    pub vuln_class: VulnClass,
}

/// Choose with the seeded RNG, apply, and re-parse; on re-parse failure the
/// variant is blacklisted and another is drawn. No partial writes: returns
/// the rewritten text for the one affected file.
pub fn choose_and_apply(
    graph: &CodePropertyGraph,
    site: &GuardSite,
    candidates: &ApplicableSet,
    seed: u64,
    pair: &SourceSinkPair,
    chosen_path: &DataFlowPath,
) -> Result<(GroundTruthRecord, PathBuf, String), InstrumentError> {
    is_bugdoorable(graph, site).map_err(|r| {
        InstrumentError::NotApplicable(format!("site is not eligible: {}", r))
    })?;
    let mut blacklist: BTreeSet<usize> = BTreeSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    loop {
        let open: Vec<usize> =
            (0..candidates.len()).filter(|i| !blacklist.contains(i)).collect();
        if open.is_empty() {
            return Err(InstrumentError::NoViableVariant);
        }
        let variant_id = open[rng.random_range(0..open.len())];
        let plan = match build_plan(graph, site, candidates, variant_id, seed, &mut rng) {
            Ok(p) => p,
            Err(_) => {
                blacklist.insert(variant_id);
                continue;
            }
        };
        let file = plan.rewrites[0].file.clone();
        let Some(text) = graph.sources.get(&file) else {
            return Err(InstrumentError::NotApplicable("source text missing".into()));
        };
        let rewritten = apply_plan(&plan, text)?;

        // Re-parse closure: the rewritten unit must parse with no new
        // skipped or opaque constructs.
        let before = frontend::supported_subset_report(&frontend::parse_unit(text, &file)).len();
        let reparsed = frontend::parse_unit(&rewritten, &file);
        let after = frontend::supported_subset_report(&reparsed).len();
        if after > before {
            blacklist.insert(variant_id);
            continue;
        }

        let original_snippet =
            plan.rewrites.iter().map(|r| r.original.as_str()).collect::<Vec<_>>().join("\n");
        let rewritten_snippet =
            plan.rewrites.iter().map(|r| r.replacement.as_str()).collect::<Vec<_>>().join("\n");
        let record = GroundTruthRecord {
            pair: pair.clone(),
            chosen_path: chosen_path.clone(),
            guard: Some(site.clone()),
            plan,
            original_snippet,
            rewritten_snippet,
            vuln_class: pair.sink.vuln_class,
        };
        return Ok((record, file, rewritten));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guards::{classify_guard, enumerate_corridor, find_security_mechanisms};
    use crate::taint::{find_sensitive_sinks, group_pairs, trace_to_sources, TraceConfig};

    struct Analysis {
        graph: CodePropertyGraph,
        site: GuardSite,
        corridor: ControlFlowCorridor,
        pair: SourceSinkPair,
    }

    fn analyze_first_guard(src: &str) -> Analysis {
        let (g, cg, s) = crate::taint::tests::setup(src);
        let sinks = find_sensitive_sinks(&g, &s);
        let outcome = trace_to_sources(&g, &s, &cg, &sinks[0], &TraceConfig::default());
        let pairs = group_pairs(&outcome.paths);
        let path = outcome.paths[0].clone();
        let corridor = enumerate_corridor(&g, &cg, &path, 1000);
        let site = find_security_mechanisms(&g, &corridor)
            .iter()
            .map(|x| classify_guard(&g, x))
            .next()
            .expect("one guard");
        Analysis { graph: g, site, corridor, pair: pairs[0].clone() }
    }

    const GUARDED: &str = r#"void f(FILE *fp, char *d, char *s) {
  int len;
  fread((char *)&len, 4, 1, fp);
  if (len > 256) {
    printf("too big\n");
    exit(1);
  }
  memcpy(d, s, len);
}
"#;

    #[test]
    fn running_guard_is_bugdoorable() {
        let a = analyze_first_guard(crate::fixtures::RUNNING_EXAMPLE);
        assert!(is_bugdoorable(&a.graph, &a.site).is_ok());
    }

    #[test]
    fn non_aborting_guard_is_not_security_critical() {
        let src = r#"
void f(FILE *fp, char *d, char *s) {
  int n;
  fread((char *)&n, 4, 1, fp);
  if (n > 100) { n = 100; }
  memcpy(d, s, n);
}
"#;
        let a = analyze_first_guard(src);
        assert_eq!(is_bugdoorable(&a.graph, &a.site), Err(SkipReason::NotSecurityCritical));
        let set = applicable_instrumentations(&a.graph, &a.site, &a.corridor);
        assert!(set.is_empty());
    }

    #[test]
    fn out_of_corpus_call_in_condition_is_not_understood() {
        let src = r#"
void f(FILE *fp, char *d, char *s) {
  int len;
  fread((char *)&len, 4, 1, fp);
  if (check(len)) { exit(1); }
  memcpy(d, s, len);
}
"#;
        let a = analyze_first_guard(src);
        assert_eq!(is_bugdoorable(&a.graph, &a.site), Err(SkipReason::NotUnderstood));
        assert!(applicable_instrumentations(&a.graph, &a.site, &a.corridor).is_empty());
    }

    #[test]
    fn guarded_copy_has_expected_classes() {
        let a = analyze_first_guard(GUARDED);
        let set = applicable_instrumentations(&a.graph, &a.site, &a.corridor);
        let classes: Vec<InstrClass> = set.summary().iter().map(|(c, _)| *c).collect();
        assert!(classes.contains(&InstrClass::RemoveMechanism));
        assert!(classes.contains(&InstrClass::SurroundAlwaysFalse));
        assert!(classes.contains(&InstrClass::ArithmeticInfluence));
        // At least classes plus their variant multiplicity.
        assert!(set.len() >= 1 + 3 + 4);
    }

    #[test]
    fn adjacent_guard_and_sink_allow_swapping() {
        let src = r#"void f(FILE *fp, char *d, char *s) {
  int n;
  fread((char *)&n, 4, 1, fp);
  if (n > 256) exit(1);
  memcpy(d, s, n);
}
"#;
        let a = analyze_first_guard(src);
        let set = applicable_instrumentations(&a.graph, &a.site, &a.corridor);
        let classes: Vec<InstrClass> = set.summary().iter().map(|(c, _)| *c).collect();
        assert!(classes.contains(&InstrClass::SwapCheckAndSink), "{:?}", classes);

        // Apply the swap and verify the sink now precedes the check.
        let swap_idx = set
            .variants
            .iter()
            .position(|(c, _)| *c == InstrClass::SwapCheckAndSink)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let plan = build_plan(&a.graph, &a.site, &set, swap_idx, 7, &mut rng).unwrap();
        let text = a.graph.sources.values().next().unwrap();
        let rewritten = apply_plan(&plan, text).unwrap();
        let memcpy_pos = rewritten.find("memcpy").unwrap();
        let check_pos = rewritten.find("if (n > 256)").unwrap();
        assert!(memcpy_pos < check_pos, "{}", rewritten);
    }

    #[test]
    fn remove_mechanism_preserves_byte_length() {
        let a = analyze_first_guard(GUARDED);
        let set = applicable_instrumentations(&a.graph, &a.site, &a.corridor);
        let idx = set
            .variants
            .iter()
            .position(|(c, _)| *c == InstrClass::RemoveMechanism)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plan = build_plan(&a.graph, &a.site, &set, idx, 1, &mut rng).unwrap();
        let text = a.graph.sources.values().next().unwrap();
        let rewritten = apply_plan(&plan, text).unwrap();
        assert_eq!(rewritten.len(), text.len());
        assert_eq!(rewritten.lines().count(), text.lines().count());
        assert!(!rewritten.contains("len > 256"));
    }

    #[test]
    fn conjoin_magic_matches_expected_shape() {
        let a = analyze_first_guard(GUARDED);
        let set = applicable_instrumentations(&a.graph, &a.site, &a.corridor);
        let idx = set
            .variants
            .iter()
            .position(|(c, v)| {
                *c == InstrClass::ArithmeticInfluence
                    && matches!(v, Variant::ArithConjoinMagic { magic_idx: 0 })
            })
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let plan = build_plan(&a.graph, &a.site, &set, idx, 3, &mut rng).unwrap();
        let text = a.graph.sources.values().next().unwrap();
        let rewritten = apply_plan(&plan, text).unwrap();
        assert!(rewritten.contains("== 0xDEADC0DE && (len > 256)"), "{}", rewritten);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = analyze_first_guard(GUARDED);
        let set = applicable_instrumentations(&a.graph, &a.site, &a.corridor);
        let path = a.pair.paths[0].clone();
        let run = || {
            let (rec, _, text) =
                choose_and_apply(&a.graph, &a.site, &set, 42, &a.pair, &path).unwrap();
            (rec.plan.class, rec.plan.variant_id, text)
        };
        let (c1, v1, t1) = run();
        let (c2, v2, t2) = run();
        assert_eq!(c1, c2);
        assert_eq!(v1, v2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn rewritten_output_reparses_cleanly() {
        let a = analyze_first_guard(GUARDED);
        let set = applicable_instrumentations(&a.graph, &a.site, &a.corridor);
        let path = a.pair.paths[0].clone();
        for seed in 0..24u64 {
            let (rec, file, text) =
                choose_and_apply(&a.graph, &a.site, &set, seed, &a.pair, &path).unwrap();
            let tu = frontend::parse_unit(&text, &file);
            assert!(
                frontend::supported_subset_report(&tu).is_empty(),
                "seed {} class {:?}: {}",
                seed,
                rec.plan.class,
                text
            );
        }
    }

    #[test]
    fn span_mismatch_detected() {
        let a = analyze_first_guard(GUARDED);
        let set = applicable_instrumentations(&a.graph, &a.site, &a.corridor);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plan = build_plan(&a.graph, &a.site, &set, 0, 1, &mut rng).unwrap();
        let mut text = a.graph.sources.values().next().unwrap().clone();
        text.insert(0, ' ');
        assert!(matches!(apply_plan(&plan, &text), Err(InstrumentError::SpanMismatch { .. })));
    }

    #[test]
    fn format_string_antipattern_rewrites() {
        let src = r#"void f(char *buf) {
  gets(buf);
  printf("%s", buf);
}
"#;
        let (g, _, s) = crate::taint::tests::setup(src);
        // Construct the candidate sink by hand: the printf call's format
        // slot, which the sink finder skips for literal formats.
        let node = g
            .nodes
            .iter()
            .find(|n| n.calls.iter().any(|c| c.callee.as_deref() == Some("printf")))
            .unwrap();
        let sink = SinkSite {
            call_node: node.id,
            callee: "printf".into(),
            sensitive_arg_index: 0,
            vuln_class: VulnClass::FormatString,
        };
        let plan = format_string_antipattern(&g, &sink).unwrap();
        let text = g.sources.values().next().unwrap();
        let rewritten = apply_plan(&plan, text).unwrap();
        assert!(rewritten.contains("printf(buf)"), "{}", rewritten);
        let _ = s;
    }

    #[test]
    fn format_string_antipattern_rejects_non_passthrough() {
        let src = r#"void f(int n) { printf("%d", n); }"#;
        let (g, _, _) = crate::taint::tests::setup(src);
        let node = g
            .nodes
            .iter()
            .find(|n| n.calls.iter().any(|c| c.callee.as_deref() == Some("printf")))
            .unwrap();
        let sink = SinkSite {
            call_node: node.id,
            callee: "printf".into(),
            sensitive_arg_index: 0,
            vuln_class: VulnClass::FormatString,
        };
        assert!(format_string_antipattern(&g, &sink).is_err());
    }

    #[test]
    fn fprintf_family_supported() {
        let src = r#"void f(FILE *err, char *buf) {
  gets(buf);
  fprintf(err, "%s", buf);
}
"#;
        let (g, _, _) = crate::taint::tests::setup(src);
        let node = g
            .nodes
            .iter()
            .find(|n| n.calls.iter().any(|c| c.callee.as_deref() == Some("fprintf")))
            .unwrap();
        let sink = SinkSite {
            call_node: node.id,
            callee: "fprintf".into(),
            sensitive_arg_index: 1,
            vuln_class: VulnClass::FormatString,
        };
        let plan = format_string_antipattern(&g, &sink).unwrap();
        let text = g.sources.values().next().unwrap();
        let rewritten = apply_plan(&plan, text).unwrap();
        assert!(rewritten.contains("fprintf(err, buf)"), "{}", rewritten);
    }

    #[test]
    fn move_to_unrelated_path_requires_disjoint_block() {
        // The destination branch sits before the source, so no corridor
        // sequence can pass through it.
        let src = r#"void f(FILE *fp, char *d, char *s, int mode) {
  int len;
  int x;
  x = 0;
  if (mode) { x = 1; }
  fread((char *)&len, 4, 1, fp);
  if (len > 256) { exit(1); }
  memcpy(d, s, len);
}
"#;
        let a = analyze_first_guard(src);
        let set = applicable_instrumentations(&a.graph, &a.site, &a.corridor);
        let has_move =
            set.summary().iter().any(|(c, _)| *c == InstrClass::MoveToUnrelatedPath);
        assert!(has_move, "{:?}", set.summary());
        let idx = set
            .variants
            .iter()
            .position(|(c, _)| *c == InstrClass::MoveToUnrelatedPath)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let plan = build_plan(&a.graph, &a.site, &set, idx, 5, &mut rng).unwrap();
        let text = a.graph.sources.values().next().unwrap();
        let rewritten = apply_plan(&plan, text).unwrap();
        assert!(
            rewritten.contains("if (mode) { if (len > 256) { exit(1); }"),
            "{}",
            rewritten
        );
        let tu = frontend::parse_unit(&rewritten, std::path::Path::new("t.c"));
        assert!(frontend::supported_subset_report(&tu).is_empty());

        // A branch between source and sink is on the corridor and is never
        // chosen as a destination.
        let on_corridor = r#"void f(FILE *fp, char *d, char *s, int mode) {
  int len;
  int x;
  x = 0;
  fread((char *)&len, 4, 1, fp);
  if (mode) { x = 1; }
  if (len > 256) { exit(1); }
  memcpy(d, s, len);
}
"#;
        let b = analyze_first_guard(on_corridor);
        let set_b = applicable_instrumentations(&b.graph, &b.site, &b.corridor);
        assert!(
            !set_b.summary().iter().any(|(c, _)| *c == InstrClass::MoveToUnrelatedPath),
            "{:?}",
            set_b.summary()
        );
    }

    #[test]
    fn overflow_check_shape_detected() {
        let src = r#"void f(FILE *fp, char *d, char *s) {
  int a;
  int b;
  fread((char *)&a, 4, 1, fp);
  b = 16;
  if (a + b < a) { exit(1); }
  memcpy(d, s, a);
}
"#;
        let a = analyze_first_guard(src);
        let set = applicable_instrumentations(&a.graph, &a.site, &a.corridor);
        assert!(set
            .summary()
            .iter()
            .any(|(c, _)| *c == InstrClass::IntegerOverflowAntiPattern));
    }
}
