//! Frontend: parse preprocessed C translation units of the supported subset
//! into per-function ASTs with byte-exact source locations.
//!
//! Constructs outside the subset never fail a file. Top-level oddities become
//! skipped regions, statement-level oddities become `Opaque` statement nodes,
//! and a file whose delimiters cannot be matched at all becomes one big
//! skipped region with an empty function list.

mod ast;
mod lexer;
mod parser;

pub use ast::{
    arg_binding_key, collect_calls, collect_idents, collect_read_keys, lvalue_key, AssignOp,
    BinaryOp, Declarator, Expr, ExprKind, FunctionAst, GlobalDecl, Param, SkippedRegion,
    SourceSpan, Stmt, StmtKind, TranslationUnit, UnaryOp, VarKey,
};

use std::path::Path;

/// Parse one preprocessed translation unit. Pure: the result depends only on
/// `source_text` and `path`, and the returned unit is immutable.
pub fn parse_unit(source_text: &str, path: &Path) -> TranslationUnit {
    parser::parse_unit(source_text, path)
}

/// Read a source file as UTF-8, falling back to a Latin-1 interpretation for
/// byte sequences that are not valid UTF-8.
pub fn read_source(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(match String::from_utf8(bytes) {
        Ok(s) => s,
        Err(e) => e.into_bytes().iter().map(|&b| b as char).collect(),
    })
}

/// Enumerate every skipped or opaque construct in the unit with its reason.
/// An empty result means the file is fully covered by the subset.
pub fn supported_subset_report(unit: &TranslationUnit) -> Vec<(SourceSpan, String)> {
    let mut out: Vec<(SourceSpan, String)> = unit
        .skipped_regions
        .iter()
        .map(|s| (s.span.clone(), s.reason.clone()))
        .collect();
    for f in &unit.functions {
        collect_opaque(&f.body, &mut out);
    }
    out.sort_by_key(|(s, _)| (s.byte_start, s.byte_end));
    out
}

fn collect_opaque(stmts: &[Stmt], out: &mut Vec<(SourceSpan, String)>) {
    for s in stmts {
        match &s.kind {
            StmtKind::Opaque { reason, .. } => out.push((s.span.clone(), reason.clone())),
            StmtKind::Compound(inner) | StmtKind::Switch { body: inner, .. } => {
                collect_opaque(inner, out)
            }
            StmtKind::If { then_branch, else_branch, .. } => {
                collect_opaque(std::slice::from_ref(then_branch), out);
                if let Some(e) = else_branch {
                    collect_opaque(std::slice::from_ref(e), out);
                }
            }
            StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } => {
                collect_opaque(std::slice::from_ref(body), out)
            }
            StmtKind::For { init, body, .. } => {
                if let Some(i) = init {
                    collect_opaque(std::slice::from_ref(i), out);
                }
                collect_opaque(std::slice::from_ref(body), out);
            }
            _ => {}
        }
    }
}

/// Walk all statements of a function depth-first, in source order.
pub fn visit_stmts<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for s in stmts {
        f(s);
        match &s.kind {
            StmtKind::Compound(inner) | StmtKind::Switch { body: inner, .. } => {
                visit_stmts(inner, f)
            }
            StmtKind::If { then_branch, else_branch, .. } => {
                visit_stmts(std::slice::from_ref(then_branch), f);
                if let Some(e) = else_branch {
                    visit_stmts(std::slice::from_ref(e), f);
                }
            }
            StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } => {
                visit_stmts(std::slice::from_ref(body), f)
            }
            StmtKind::For { init, body, .. } => {
                if let Some(i) = init {
                    visit_stmts(std::slice::from_ref(i), f);
                }
                visit_stmts(std::slice::from_ref(body), f);
            }
            _ => {}
        }
    }
}
