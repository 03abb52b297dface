//! Recursive-descent parser for the supported C subset.
//!
//! The parser never hard-fails on a whole file: top-level constructs it
//! cannot handle become skipped regions, and statements outside the subset
//! become `Opaque` nodes so the surrounding function still parses.

use super::ast::*;
use super::lexer::{lex, TokKind, Token};
use std::collections::BTreeSet;
use std::path::Path;

const TYPE_KEYWORDS: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "struct",
    "union", "enum", "const", "volatile", "static", "extern", "register", "inline", "typedef",
    "auto", "_Bool",
];

const STMT_KEYWORDS: &[&str] = &[
    "if", "else", "while", "do", "for", "switch", "case", "default", "return", "break",
    "continue", "goto", "sizeof",
];

fn is_type_keyword(name: &str) -> bool {
    TYPE_KEYWORDS.contains(&name)
}

fn is_reserved(name: &str) -> bool {
    is_type_keyword(name) || STMT_KEYWORDS.contains(&name)
}

struct ParseError {
    reason: String,
}

fn err(reason: impl Into<String>) -> ParseError {
    ParseError { reason: reason.into() }
}

type PResult<T> = Result<T, ParseError>;

pub struct Parser<'a> {
    toks: Vec<Token>,
    i: usize,
    src: &'a str,
    typedefs: BTreeSet<String>,
    skipped: Vec<SkippedRegion>,
}

/// Parse one preprocessed translation unit. Unsupported constructs are
/// recorded in `skipped_regions`; the call itself always succeeds.
pub fn parse_unit(source: &str, path: &Path) -> TranslationUnit {
    let lexed = lex(source, path);
    let mut skipped = lexed.skipped;

    if lexed.unbalanced {
        let span = whole_file_span(source, path);
        skipped.push(SkippedRegion {
            span,
            reason: "unbalanced delimiters: file could not be matched at file granularity".into(),
        });
        return TranslationUnit {
            path: path.to_path_buf(),
            functions: Vec::new(),
            globals: Vec::new(),
            skipped_regions: skipped,
            source: source.to_string(),
        };
    }

    let mut p = Parser {
        toks: lexed.tokens,
        i: 0,
        src: source,
        typedefs: BTreeSet::new(),
        skipped,
    };

    let mut functions: Vec<FunctionAst> = Vec::new();
    let mut globals = Vec::new();
    while !p.eof() {
        let start = p.i;
        match p.parse_external() {
            Ok(External::Function(f)) => {
                functions.push(f);
            }
            Ok(External::Global(g)) => globals.push(g),
            Err(e) => {
                p.i = start;
                let span = p.recover_top_level();
                p.skipped.push(SkippedRegion { span, reason: e.reason });
            }
        }
    }

    // Drop skipped regions that ended up inside a parsed function body
    // (directive residue handled by the lexer stays; overlaps with bodies
    // are not allowed by the unit invariants).
    let bodies: Vec<SourceSpan> = functions.iter().map(|f| f.body_span.clone()).collect();
    p.skipped.retain(|s| !bodies.iter().any(|b| b.overlaps(&s.span)));

    TranslationUnit {
        path: path.to_path_buf(),
        functions,
        globals,
        skipped_regions: p.skipped,
        source: source.to_string(),
    }
}

fn whole_file_span(source: &str, path: &Path) -> SourceSpan {
    let lines = source.lines().count().max(1) as u32;
    SourceSpan {
        file: path.to_path_buf(),
        start_line: 1,
        start_col: 1,
        end_line: lines,
        end_col: 1,
        byte_start: 0,
        byte_end: source.len(),
    }
}

enum External {
    Function(FunctionAst),
    Global(GlobalDecl),
}

impl<'a> Parser<'a> {
    fn eof(&self) -> bool {
        self.i >= self.toks.len()
    }

    fn cur(&self) -> Option<&Token> {
        self.toks.get(self.i)
    }

    fn peek(&self, n: usize) -> Option<&Token> {
        self.toks.get(self.i + n)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.i).cloned();
        if t.is_some() {
            self.i += 1;
        }
        t
    }

    fn text(&self, t: &Token) -> &'a str {
        &self.src[t.span.byte_start..t.span.byte_end]
    }

    fn at_punct(&self, p: &str) -> bool {
        self.cur().map(|t| t.is_punct(p)).unwrap_or(false)
    }

    fn at_ident(&self, name: &str) -> bool {
        self.cur().map(|t| t.is_ident(name)).unwrap_or(false)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Token> {
        if self.at_punct(p) {
            Ok(self.bump().unwrap())
        } else {
            Err(err(format!(
                "expected `{}`, found `{}`",
                p,
                self.cur().map(|t| self.text(t).to_string()).unwrap_or_else(|| "<eof>".into())
            )))
        }
    }

    fn span_of(&self, tok_idx: usize) -> SourceSpan {
        self.toks[tok_idx.min(self.toks.len() - 1)].span.clone()
    }

    fn span_between(&self, start_idx: usize, end_idx_exclusive: usize) -> SourceSpan {
        let last = end_idx_exclusive.saturating_sub(1).max(start_idx);
        self.span_of(start_idx).cover(&self.span_of(last))
    }

    fn is_typename_ident(&self, name: &str) -> bool {
        self.typedefs.contains(name) || name.ends_with("_t") || name == "FILE"
    }

    // ---------------------------------------------------------------
    // Top level
    // ---------------------------------------------------------------

    fn parse_external(&mut self) -> PResult<External> {
        let start = self.i;
        if self.eat_punct(";") {
            return Ok(External::Global(GlobalDecl {
                names: Vec::new(),
                is_prototype: false,
                is_typedef: false,
                span: self.span_between(start, self.i),
            }));
        }

        let spec = self.parse_specifiers()?;
        if spec.text.is_empty() {
            return Err(err(format!(
                "unsupported top-level construct starting at `{}`",
                self.cur().map(|t| self.text(t).to_string()).unwrap_or_default()
            )));
        }

        // Bare `struct X { ... };` or `enum E { ... };`
        if self.at_punct(";") {
            self.bump();
            return Ok(External::Global(GlobalDecl {
                names: Vec::new(),
                is_prototype: false,
                is_typedef: spec.is_typedef,
                span: self.span_between(start, self.i),
            }));
        }

        let decl = self.parse_declarator(false)?;

        if decl.is_function && self.at_punct("{") {
            if spec.is_typedef {
                return Err(err("typedef with a function body"));
            }
            return self.parse_function_def(start, &spec, decl).map(External::Function);
        }
        if decl.is_function && !self.at_punct(";") && !self.at_punct(",") && !self.at_punct("=") {
            return Err(err("K&R-style declarations are not supported"));
        }

        // Variable / prototype / typedef declaration list.
        let mut names = vec![decl.name.clone()];
        let mut is_prototype = decl.is_function;
        if self.at_punct("=") {
            self.bump();
            let _ = self.parse_initializer()?;
        }
        while self.eat_punct(",") {
            let d = self.parse_declarator(false)?;
            is_prototype = is_prototype || d.is_function;
            names.push(d.name);
            if self.at_punct("=") {
                self.bump();
                let _ = self.parse_initializer()?;
            }
        }
        self.expect_punct(";")?;
        if spec.is_typedef {
            for n in &names {
                self.typedefs.insert(n.clone());
            }
        }
        Ok(External::Global(GlobalDecl {
            names,
            is_prototype,
            is_typedef: spec.is_typedef,
            span: self.span_between(start, self.i),
        }))
    }

    /// Skip to a top-level synchronization point and return the skipped span.
    fn recover_top_level(&mut self) -> SourceSpan {
        let start = self.i;
        let mut depth = 0usize;
        while let Some(t) = self.cur() {
            match &t.kind {
                TokKind::Punct("{") | TokKind::Punct("(") | TokKind::Punct("[") => depth += 1,
                TokKind::Punct("}") => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        self.bump();
                        // A following `;` belongs to the same construct.
                        self.eat_punct(";");
                        break;
                    }
                }
                TokKind::Punct(")") | TokKind::Punct("]") => depth = depth.saturating_sub(1),
                TokKind::Punct(";") if depth == 0 => {
                    self.bump();
                    break;
                }
                _ => {}
            }
            self.bump();
        }
        if self.i == start {
            self.bump();
        }
        self.span_between(start, self.i)
    }

    // ---------------------------------------------------------------
    // Specifiers and declarators
    // ---------------------------------------------------------------

    fn parse_specifiers(&mut self) -> PResult<Specifiers> {
        let start = self.i;
        let mut is_typedef = false;
        let mut saw_type = false;
        loop {
            let Some(t) = self.cur() else { break };
            match &t.kind {
                TokKind::Ident(name) if is_type_keyword(name) => {
                    if name == "typedef" {
                        is_typedef = true;
                    }
                    let tag = matches!(name.as_str(), "struct" | "union" | "enum");
                    saw_type = saw_type
                        || !matches!(
                            name.as_str(),
                            "const" | "volatile" | "static" | "extern" | "register" | "inline"
                                | "typedef" | "auto"
                        );
                    self.bump();
                    if tag {
                        // Optional tag name and optional body.
                        if matches!(self.cur().map(|t| &t.kind), Some(TokKind::Ident(n)) if !is_reserved(n))
                        {
                            self.bump();
                        }
                        if self.at_punct("{") {
                            self.skip_balanced("{", "}")?;
                        }
                    }
                }
                TokKind::Ident(name)
                    if !saw_type && !is_reserved(name) && self.is_typename_ident(name) =>
                {
                    saw_type = true;
                    self.bump();
                }
                TokKind::Ident(name)
                    if !saw_type && !is_reserved(name) && self.looks_like_type_use() =>
                {
                    let _ = name;
                    saw_type = true;
                    self.bump();
                }
                _ => break,
            }
        }
        let text = if self.i > start {
            self.src[self.span_of(start).byte_start..self.span_of(self.i - 1).byte_end].to_string()
        } else {
            String::new()
        };
        Ok(Specifiers { text, is_typedef })
    }

    /// Structural heuristic: an unknown identifier acts as a type name when
    /// followed by `*`s and another identifier, as in `FILE *f`.
    fn looks_like_type_use(&self) -> bool {
        let mut j = self.i + 1;
        while matches!(self.toks.get(j).map(|t| &t.kind), Some(TokKind::Punct("*"))) {
            j += 1;
        }
        match self.toks.get(j).map(|t| &t.kind) {
            Some(TokKind::Ident(n)) if !is_reserved(n) => j > self.i + 1 || {
                // `a b` with no star: only a declaration shape if what follows
                // the second identifier is a declarator continuation.
                matches!(
                    self.toks.get(j + 1).map(|t| &t.kind),
                    Some(TokKind::Punct(";"))
                        | Some(TokKind::Punct(","))
                        | Some(TokKind::Punct("="))
                        | Some(TokKind::Punct("["))
                        | Some(TokKind::Punct("("))
                        | Some(TokKind::Punct(")"))
                )
            },
            Some(TokKind::Punct("(")) if j > self.i + 1 => true,
            Some(TokKind::Punct(")")) if j > self.i + 1 => true,
            _ => false,
        }
    }

    fn skip_balanced(&mut self, open: &str, close: &str) -> PResult<()> {
        self.expect_punct(open)?;
        let mut depth = 1usize;
        while depth > 0 {
            let Some(t) = self.bump() else {
                return Err(err(format!("unterminated `{}`", open)));
            };
            if t.is_punct(open) {
                depth += 1;
            } else if t.is_punct(close) {
                depth -= 1;
            }
        }
        Ok(())
    }

    fn parse_declarator(&mut self, allow_abstract: bool) -> PResult<DeclInfo> {
        let start = self.i;
        let mut stars = String::new();
        while self.at_punct("*") || self.at_ident("const") || self.at_ident("volatile") {
            if self.at_punct("*") {
                stars.push('*');
            }
            self.bump();
        }

        // Function-pointer form: ( * name ) ( params )
        if self.at_punct("(") && matches!(self.peek(1).map(|t| &t.kind), Some(TokKind::Punct("*"))) {
            self.bump();
            while self.eat_punct("*") {}
            let name = match self.cur().map(|t| t.kind.clone()) {
                Some(TokKind::Ident(n)) if !is_reserved(&n) => {
                    self.bump();
                    n
                }
                _ if allow_abstract => String::new(),
                _ => return Err(err("expected identifier in function-pointer declarator")),
            };
            // Possible array-of-fn-ptr suffix before the closing paren.
            while self.at_punct("[") {
                self.skip_balanced("[", "]")?;
            }
            self.expect_punct(")")?;
            if self.at_punct("(") {
                self.skip_balanced("(", ")")?;
            }
            return Ok(DeclInfo {
                name,
                stars,
                is_function: false,
                is_array: false,
                params: Vec::new(),
                variadic: false,
                span: self.span_between(start, self.i),
            });
        }

        let name = match self.cur().map(|t| t.kind.clone()) {
            Some(TokKind::Ident(n)) if !is_reserved(&n) => {
                self.bump();
                n
            }
            _ if allow_abstract => String::new(),
            _ => {
                return Err(err(format!(
                    "expected declarator name, found `{}`",
                    self.cur().map(|t| self.text(t).to_string()).unwrap_or_else(|| "<eof>".into())
                )))
            }
        };

        let mut is_function = false;
        let mut is_array = false;
        let mut params = Vec::new();
        let mut variadic = false;
        if self.at_punct("(") {
            is_function = true;
            let (ps, va) = self.parse_param_list()?;
            params = ps;
            variadic = va;
        }
        while self.at_punct("[") {
            is_array = true;
            self.skip_balanced("[", "]")?;
        }
        Ok(DeclInfo {
            name,
            stars,
            is_function,
            is_array,
            params,
            variadic,
            span: self.span_between(start, self.i),
        })
    }

    fn parse_param_list(&mut self) -> PResult<(Vec<Param>, bool)> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        let mut variadic = false;
        if self.eat_punct(")") {
            return Ok((params, variadic));
        }
        loop {
            if self.at_punct("...") {
                self.bump();
                variadic = true;
                self.expect_punct(")")?;
                break;
            }
            let pstart = self.i;
            let spec = self.parse_specifiers()?;
            if spec.text == "void" && self.at_punct(")") {
                self.bump();
                break;
            }
            if spec.text.is_empty() {
                // Old-style identifier list or something unsupported.
                return Err(err("parameter without a type"));
            }
            let d = self.parse_declarator(true)?;
            let span = self.span_between(pstart, self.i);
            let ctype = format!("{}{}", spec.text, d.stars);
            params.push(Param { name: d.name, ctype, span });
            if self.eat_punct(",") {
                continue;
            }
            self.expect_punct(")")?;
            break;
        }
        Ok((params, variadic))
    }

    fn parse_function_def(
        &mut self,
        start: usize,
        spec: &Specifiers,
        decl: DeclInfo,
    ) -> PResult<FunctionAst> {
        if decl.name.is_empty() {
            return Err(err("function definition without a name"));
        }
        let mut seen = BTreeSet::new();
        for p in &decl.params {
            if !p.name.is_empty() && !seen.insert(p.name.clone()) {
                return Err(err(format!("duplicate parameter name `{}`", p.name)));
            }
        }
        let body_start = self.i;
        let body = self.parse_compound()?;
        let body_span = self.span_between(body_start, self.i);
        let span = self.span_between(start, self.i);

        let stmts = match body.kind {
            StmtKind::Compound(stmts) => stmts,
            _ => unreachable!("parse_compound returns Compound"),
        };
        let mut top_level_names: Vec<String> =
            decl.params.iter().map(|p| p.name.clone()).filter(|n| !n.is_empty()).collect();
        for s in &stmts {
            if let StmtKind::Decl(ds) = &s.kind {
                top_level_names.extend(ds.iter().map(|d| d.name.clone()));
            }
        }
        let mut declared = top_level_names.clone();
        collect_declared_names(&stmts, &mut declared);

        Ok(FunctionAst {
            name: decl.name,
            parameters: decl.params,
            return_type: format!("{}{}", spec.text, decl.stars),
            variadic: decl.variadic,
            body: stmts,
            span,
            body_span,
            top_level_names,
            declared_names: declared,
        })
    }

    // ---------------------------------------------------------------
    // Statements
    // ---------------------------------------------------------------

    fn parse_compound(&mut self) -> PResult<Stmt> {
        let start = self.i;
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.at_punct("}") {
            if self.eof() {
                return Err(err("unterminated block"));
            }
            stmts.push(self.parse_stmt_robust());
        }
        self.expect_punct("}")?;
        Ok(Stmt { kind: StmtKind::Compound(stmts), span: self.span_between(start, self.i) })
    }

    /// Parse one statement; on failure, swallow the construct into an
    /// `Opaque` node instead of failing the function.
    fn parse_stmt_robust(&mut self) -> Stmt {
        let start = self.i;
        match self.parse_stmt() {
            Ok(s) => s,
            Err(e) => {
                self.i = start;
                self.opaque_recover(e.reason)
            }
        }
    }

    fn opaque_recover(&mut self, reason: String) -> Stmt {
        let start = self.i;
        let mut depth = 0usize;
        let mut referenced = Vec::new();
        while let Some(t) = self.cur() {
            match &t.kind {
                TokKind::Punct("{") | TokKind::Punct("(") | TokKind::Punct("[") => {
                    depth += 1;
                }
                TokKind::Punct("}") if depth == 0 => break,
                TokKind::Punct("}") | TokKind::Punct(")") | TokKind::Punct("]") => {
                    let closes_block = t.is_punct("}");
                    depth = depth.saturating_sub(1);
                    if depth == 0 && closes_block {
                        self.bump();
                        break;
                    }
                }
                TokKind::Punct(";") if depth == 0 => {
                    self.bump();
                    break;
                }
                TokKind::Ident(n) if !is_reserved(n) => referenced.push(n.clone()),
                _ => {}
            }
            self.bump();
        }
        if self.i == start {
            self.bump();
        }
        referenced.sort();
        referenced.dedup();
        Stmt {
            kind: StmtKind::Opaque { reason, referenced },
            span: self.span_between(start, self.i),
        }
    }

    fn parse_stmt(&mut self) -> PResult<Stmt> {
        let start = self.i;
        let Some(t) = self.cur() else { return Err(err("unexpected end of input")) };
        match &t.kind {
            TokKind::Punct("{") => self.parse_compound(),
            TokKind::Punct(";") => {
                self.bump();
                Ok(Stmt { kind: StmtKind::Empty, span: self.span_between(start, self.i) })
            }
            TokKind::Ident(kw) => match kw.as_str() {
                "if" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.parse_expr()?;
                    self.expect_punct(")")?;
                    let then_branch = Box::new(self.parse_stmt()?);
                    let else_branch = if self.at_ident("else") {
                        self.bump();
                        Some(Box::new(self.parse_stmt()?))
                    } else {
                        None
                    };
                    Ok(Stmt {
                        kind: StmtKind::If { cond, then_branch, else_branch },
                        span: self.span_between(start, self.i),
                    })
                }
                "while" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.parse_expr()?;
                    self.expect_punct(")")?;
                    let body = Box::new(self.parse_stmt()?);
                    Ok(Stmt {
                        kind: StmtKind::While { cond, body },
                        span: self.span_between(start, self.i),
                    })
                }
                "do" => {
                    self.bump();
                    let body = Box::new(self.parse_stmt()?);
                    if !self.at_ident("while") {
                        return Err(err("expected `while` after do-body"));
                    }
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.parse_expr()?;
                    self.expect_punct(")")?;
                    self.expect_punct(";")?;
                    Ok(Stmt {
                        kind: StmtKind::DoWhile { body, cond },
                        span: self.span_between(start, self.i),
                    })
                }
                "for" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let init = if self.at_punct(";") {
                        self.bump();
                        None
                    } else if self.at_decl_start() {
                        Some(Box::new(self.parse_decl_stmt()?))
                    } else {
                        let e = self.parse_expr()?;
                        let espan = e.span.clone();
                        self.expect_punct(";")?;
                        Some(Box::new(Stmt { kind: StmtKind::Expr(e), span: espan }))
                    };
                    let cond =
                        if self.at_punct(";") { None } else { Some(self.parse_expr()?) };
                    self.expect_punct(";")?;
                    let step = if self.at_punct(")") { None } else { Some(self.parse_expr()?) };
                    self.expect_punct(")")?;
                    let body = Box::new(self.parse_stmt()?);
                    Ok(Stmt {
                        kind: StmtKind::For { init, cond, step, body },
                        span: self.span_between(start, self.i),
                    })
                }
                "switch" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let scrutinee = self.parse_expr()?;
                    self.expect_punct(")")?;
                    let body = self.parse_compound()?;
                    let stmts = match body.kind {
                        StmtKind::Compound(s) => s,
                        _ => unreachable!(),
                    };
                    Ok(Stmt {
                        kind: StmtKind::Switch { scrutinee, body: stmts },
                        span: self.span_between(start, self.i),
                    })
                }
                "case" => {
                    self.bump();
                    let value = self.parse_ternary()?;
                    self.expect_punct(":")?;
                    Ok(Stmt {
                        kind: StmtKind::CaseLabel(Some(value)),
                        span: self.span_between(start, self.i),
                    })
                }
                "default" => {
                    self.bump();
                    self.expect_punct(":")?;
                    Ok(Stmt {
                        kind: StmtKind::CaseLabel(None),
                        span: self.span_between(start, self.i),
                    })
                }
                "return" => {
                    self.bump();
                    let value = if self.at_punct(";") { None } else { Some(self.parse_expr()?) };
                    self.expect_punct(";")?;
                    Ok(Stmt {
                        kind: StmtKind::Return(value),
                        span: self.span_between(start, self.i),
                    })
                }
                "break" => {
                    self.bump();
                    self.expect_punct(";")?;
                    Ok(Stmt { kind: StmtKind::Break, span: self.span_between(start, self.i) })
                }
                "continue" => {
                    self.bump();
                    self.expect_punct(";")?;
                    Ok(Stmt { kind: StmtKind::Continue, span: self.span_between(start, self.i) })
                }
                "goto" => {
                    self.bump();
                    let mut referenced = Vec::new();
                    if let Some(TokKind::Ident(label)) = self.cur().map(|t| t.kind.clone()) {
                        referenced.push(label);
                        self.bump();
                    }
                    self.expect_punct(";")?;
                    Ok(Stmt {
                        kind: StmtKind::Opaque {
                            reason: "goto: modeled as opaque CFG edge".into(),
                            referenced,
                        },
                        span: self.span_between(start, self.i),
                    })
                }
                "asm" | "__asm" | "__asm__" => {
                    self.bump();
                    while self.at_ident("volatile") || self.at_ident("__volatile__") {
                        self.bump();
                    }
                    let mut referenced = Vec::new();
                    if self.at_punct("(") {
                        let open = self.i;
                        self.skip_balanced("(", ")")?;
                        for t in &self.toks[open..self.i] {
                            if let TokKind::Ident(n) = &t.kind {
                                if !is_reserved(n) {
                                    referenced.push(n.clone());
                                }
                            }
                        }
                    }
                    self.expect_punct(";")?;
                    referenced.sort();
                    referenced.dedup();
                    Ok(Stmt {
                        kind: StmtKind::Opaque {
                            reason: "inline assembly: treated as reading its operands".into(),
                            referenced,
                        },
                        span: self.span_between(start, self.i),
                    })
                }
                _ => {
                    // Label in front of a statement: `name: stmt`
                    if !is_reserved(kw)
                        && matches!(self.peek(1).map(|t| &t.kind), Some(TokKind::Punct(":")))
                        && !matches!(self.peek(2).map(|t| &t.kind), None)
                    {
                        self.bump();
                        self.bump();
                        return self.parse_stmt();
                    }
                    if self.at_decl_start() {
                        self.parse_decl_stmt()
                    } else {
                        let e = self.parse_expr()?;
                        self.expect_punct(";")?;
                        Ok(Stmt {
                            kind: StmtKind::Expr(e),
                            span: self.span_between(start, self.i),
                        })
                    }
                }
            },
            _ => {
                let e = self.parse_expr()?;
                self.expect_punct(";")?;
                Ok(Stmt { kind: StmtKind::Expr(e), span: self.span_between(start, self.i) })
            }
        }
    }

    fn at_decl_start(&self) -> bool {
        let Some(t) = self.cur() else { return false };
        match &t.kind {
            TokKind::Ident(name) if is_type_keyword(name) => true,
            TokKind::Ident(name) if !is_reserved(name) => {
                self.is_typename_ident(name) && self.decl_shape_follows(self.i + 1)
                    || self.looks_like_type_use()
            }
            _ => false,
        }
    }

    /// After a type name, a declaration continues with `*`s and a fresh
    /// identifier (or a function-pointer declarator).
    fn decl_shape_follows(&self, mut j: usize) -> bool {
        while matches!(self.toks.get(j).map(|t| &t.kind), Some(TokKind::Punct("*"))) {
            j += 1;
        }
        matches!(self.toks.get(j).map(|t| &t.kind), Some(TokKind::Ident(n)) if !is_reserved(n))
            || matches!(self.toks.get(j).map(|t| &t.kind), Some(TokKind::Punct("(")))
    }

    fn parse_decl_stmt(&mut self) -> PResult<Stmt> {
        let start = self.i;
        let spec = self.parse_specifiers()?;
        if spec.text.is_empty() {
            return Err(err("expected declaration specifiers"));
        }
        let mut declarators = Vec::new();
        if !self.at_punct(";") {
            loop {
                let dstart = self.i;
                let d = self.parse_declarator(false)?;
                let init = if self.at_punct("=") {
                    self.bump();
                    Some(self.parse_initializer()?)
                } else {
                    None
                };
                declarators.push(Declarator {
                    name: d.name,
                    ctype: format!("{}{}", spec.text, d.stars),
                    is_array: d.is_array,
                    init,
                    span: self.span_between(dstart, self.i),
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(";")?;
        if spec.is_typedef {
            for d in &declarators {
                self.typedefs.insert(d.name.clone());
            }
        }
        Ok(Stmt { kind: StmtKind::Decl(declarators), span: self.span_between(start, self.i) })
    }

    fn parse_initializer(&mut self) -> PResult<Expr> {
        if self.at_punct("{") {
            let start = self.i;
            self.bump();
            let mut items = Vec::new();
            while !self.at_punct("}") {
                if self.eof() {
                    return Err(err("unterminated initializer"));
                }
                items.push(self.parse_initializer()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct("}")?;
            Ok(Expr {
                kind: ExprKind::BracedInit(items),
                span: self.span_between(start, self.i),
            })
        } else {
            self.parse_assign()
        }
    }

    // ---------------------------------------------------------------
    // Expressions
    // ---------------------------------------------------------------

    fn parse_expr(&mut self) -> PResult<Expr> {
        let start = self.i;
        let mut e = self.parse_assign()?;
        while self.at_punct(",") {
            self.bump();
            let rhs = self.parse_assign()?;
            e = Expr {
                kind: ExprKind::Comma { lhs: Box::new(e), rhs: Box::new(rhs) },
                span: self.span_between(start, self.i),
            };
        }
        Ok(e)
    }

    fn parse_assign(&mut self) -> PResult<Expr> {
        let start = self.i;
        let lhs = self.parse_ternary()?;
        let op = match self.cur().map(|t| &t.kind) {
            Some(TokKind::Punct("=")) => Some(AssignOp::Assign),
            Some(TokKind::Punct("+=")) => Some(AssignOp::Add),
            Some(TokKind::Punct("-=")) => Some(AssignOp::Sub),
            Some(TokKind::Punct("*=")) => Some(AssignOp::Mul),
            Some(TokKind::Punct("/=")) => Some(AssignOp::Div),
            Some(TokKind::Punct("%=")) => Some(AssignOp::Rem),
            Some(TokKind::Punct("<<=")) => Some(AssignOp::Shl),
            Some(TokKind::Punct(">>=")) => Some(AssignOp::Shr),
            Some(TokKind::Punct("&=")) => Some(AssignOp::And),
            Some(TokKind::Punct("|=")) => Some(AssignOp::Or),
            Some(TokKind::Punct("^=")) => Some(AssignOp::Xor),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let rhs = self.parse_assign()?;
            return Ok(Expr {
                kind: ExprKind::Assign { op, lhs: Box::new(lhs), rhs: Box::new(rhs) },
                span: self.span_between(start, self.i),
            });
        }
        Ok(lhs)
    }

    fn parse_ternary(&mut self) -> PResult<Expr> {
        let start = self.i;
        let cond = self.parse_binary(0)?;
        if self.at_punct("?") {
            self.bump();
            let then_val = self.parse_expr()?;
            self.expect_punct(":")?;
            let else_val = self.parse_ternary()?;
            return Ok(Expr {
                kind: ExprKind::Ternary {
                    cond: Box::new(cond),
                    then_val: Box::new(then_val),
                    else_val: Box::new(else_val),
                },
                span: self.span_between(start, self.i),
            });
        }
        Ok(cond)
    }

    fn binop_at(&self, level: usize) -> Option<BinaryOp> {
        let t = self.cur()?;
        let p = match &t.kind {
            TokKind::Punct(p) => *p,
            _ => return None,
        };
        let (op, lv) = match p {
            "||" => (BinaryOp::LogOr, 0),
            "&&" => (BinaryOp::LogAnd, 1),
            "|" => (BinaryOp::BitOr, 2),
            "^" => (BinaryOp::BitXor, 3),
            "&" => (BinaryOp::BitAnd, 4),
            "==" => (BinaryOp::Eq, 5),
            "!=" => (BinaryOp::Ne, 5),
            "<" => (BinaryOp::Lt, 6),
            ">" => (BinaryOp::Gt, 6),
            "<=" => (BinaryOp::Le, 6),
            ">=" => (BinaryOp::Ge, 6),
            "<<" => (BinaryOp::Shl, 7),
            ">>" => (BinaryOp::Shr, 7),
            "+" => (BinaryOp::Add, 8),
            "-" => (BinaryOp::Sub, 8),
            "*" => (BinaryOp::Mul, 9),
            "/" => (BinaryOp::Div, 9),
            "%" => (BinaryOp::Rem, 9),
            _ => return None,
        };
        (lv == level).then_some(op)
    }

    fn parse_binary(&mut self, level: usize) -> PResult<Expr> {
        if level > 9 {
            return self.parse_cast();
        }
        let start = self.i;
        let mut lhs = self.parse_binary(level + 1)?;
        while let Some(op) = self.binop_at(level) {
            self.bump();
            let rhs = self.parse_binary(level + 1)?;
            lhs = Expr {
                kind: ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) },
                span: self.span_between(start, self.i),
            };
        }
        Ok(lhs)
    }

    /// Detect `( type-name )` at the current `(`.
    fn cast_typename_ahead(&self) -> bool {
        if !self.at_punct("(") {
            return false;
        }
        let mut j = self.i + 1;
        let Some(t) = self.toks.get(j) else { return false };
        match &t.kind {
            TokKind::Ident(n) if is_type_keyword(n) && !matches!(n.as_str(), "sizeof") => true,
            TokKind::Ident(n) if !is_reserved(n) => {
                if self.is_typename_ident(n) {
                    // `(name)` alone is ambiguous; require `*` or `)` next.
                    j += 1;
                    loop {
                        match self.toks.get(j).map(|t| &t.kind) {
                            Some(TokKind::Punct("*")) => j += 1,
                            Some(TokKind::Punct(")")) => return true,
                            Some(TokKind::Punct("[")) => return true,
                            _ => return false,
                        }
                    }
                } else {
                    // Unknown name: type only in the `(Name * ... )` shape.
                    j += 1;
                    let mut stars = 0;
                    loop {
                        match self.toks.get(j).map(|t| &t.kind) {
                            Some(TokKind::Punct("*")) => {
                                stars += 1;
                                j += 1;
                            }
                            Some(TokKind::Punct(")")) => return stars > 0,
                            _ => return false,
                        }
                    }
                }
            }
            _ => false,
        }
    }

    fn parse_typename(&mut self) -> PResult<String> {
        let start = self.i;
        let spec = self.parse_specifiers()?;
        if spec.text.is_empty() {
            // Unknown identifier acting as a type name.
            match self.cur().map(|t| t.kind.clone()) {
                Some(TokKind::Ident(n)) if !is_reserved(&n) => {
                    self.bump();
                }
                _ => return Err(err("expected type name")),
            }
        }
        let mut depth = 0usize;
        while let Some(t) = self.cur() {
            match &t.kind {
                TokKind::Punct("*") => {
                    self.bump();
                }
                TokKind::Ident(n) if n == "const" || n == "volatile" => {
                    self.bump();
                }
                TokKind::Punct("[") => {
                    depth += 1;
                    self.bump();
                }
                TokKind::Punct("]") if depth > 0 => {
                    depth -= 1;
                    self.bump();
                }
                TokKind::Int(_) if depth > 0 => {
                    self.bump();
                }
                _ => break,
            }
        }
        let end = self.i.max(start + 1);
        Ok(self.src[self.span_of(start).byte_start..self.span_of(end - 1).byte_end].to_string())
    }

    fn parse_cast(&mut self) -> PResult<Expr> {
        let start = self.i;
        if self.cast_typename_ahead() {
            self.bump(); // (
            let ctype = self.parse_typename()?;
            self.expect_punct(")")?;
            // `(type){...}` compound literals are outside the subset.
            if self.at_punct("{") {
                return Err(err("compound literal"));
            }
            let operand = self.parse_cast()?;
            return Ok(Expr {
                kind: ExprKind::Cast { ctype, operand: Box::new(operand) },
                span: self.span_between(start, self.i),
            });
        }
        self.parse_unary()
    }

    fn parse_unary(&mut self) -> PResult<Expr> {
        let start = self.i;
        let Some(t) = self.cur() else { return Err(err("unexpected end of expression")) };
        let mk = |p: &mut Self, op: UnaryOp, operand: Expr| Expr {
            kind: ExprKind::Unary { op, operand: Box::new(operand) },
            span: p.span_between(start, p.i),
        };
        match &t.kind {
            TokKind::Punct("++") => {
                self.bump();
                let e = self.parse_unary()?;
                Ok(mk(self, UnaryOp::PreInc, e))
            }
            TokKind::Punct("--") => {
                self.bump();
                let e = self.parse_unary()?;
                Ok(mk(self, UnaryOp::PreDec, e))
            }
            TokKind::Punct("&") => {
                self.bump();
                let e = self.parse_cast()?;
                Ok(mk(self, UnaryOp::AddrOf, e))
            }
            TokKind::Punct("*") => {
                self.bump();
                let e = self.parse_cast()?;
                Ok(mk(self, UnaryOp::Deref, e))
            }
            TokKind::Punct("-") => {
                self.bump();
                let e = self.parse_cast()?;
                Ok(mk(self, UnaryOp::Neg, e))
            }
            TokKind::Punct("+") => {
                self.bump();
                let e = self.parse_cast()?;
                Ok(mk(self, UnaryOp::Plus, e))
            }
            TokKind::Punct("!") => {
                self.bump();
                let e = self.parse_cast()?;
                Ok(mk(self, UnaryOp::Not, e))
            }
            TokKind::Punct("~") => {
                self.bump();
                let e = self.parse_cast()?;
                Ok(mk(self, UnaryOp::BitNot, e))
            }
            TokKind::Ident(kw) if kw == "sizeof" => {
                self.bump();
                if self.at_punct("(") && self.cast_typename_ahead() {
                    self.bump();
                    let ctype = self.parse_typename()?;
                    self.expect_punct(")")?;
                    Ok(Expr {
                        kind: ExprKind::SizeofType(ctype),
                        span: self.span_between(start, self.i),
                    })
                } else {
                    let e = self.parse_unary()?;
                    Ok(Expr {
                        kind: ExprKind::SizeofExpr(Box::new(e)),
                        span: self.span_between(start, self.i),
                    })
                }
            }
            _ => self.parse_postfix(),
        }
    }

    fn parse_postfix(&mut self) -> PResult<Expr> {
        let start = self.i;
        let mut e = self.parse_primary()?;
        loop {
            let Some(t) = self.cur() else { break };
            match &t.kind {
                TokKind::Punct("[") => {
                    self.bump();
                    let index = self.parse_expr()?;
                    self.expect_punct("]")?;
                    e = Expr {
                        kind: ExprKind::Index { base: Box::new(e), index: Box::new(index) },
                        span: self.span_between(start, self.i),
                    };
                }
                TokKind::Punct("(") => {
                    self.bump();
                    let mut args = Vec::new();
                    if !self.at_punct(")") {
                        loop {
                            args.push(self.parse_assign()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                    e = Expr {
                        kind: ExprKind::Call { callee: Box::new(e), args },
                        span: self.span_between(start, self.i),
                    };
                }
                TokKind::Punct(".") => {
                    self.bump();
                    let field = match self.cur().map(|t| t.kind.clone()) {
                        Some(TokKind::Ident(n)) => {
                            self.bump();
                            n
                        }
                        _ => return Err(err("expected field name after `.`")),
                    };
                    e = Expr {
                        kind: ExprKind::Member { base: Box::new(e), field, arrow: false },
                        span: self.span_between(start, self.i),
                    };
                }
                TokKind::Punct("->") => {
                    self.bump();
                    let field = match self.cur().map(|t| t.kind.clone()) {
                        Some(TokKind::Ident(n)) => {
                            self.bump();
                            n
                        }
                        _ => return Err(err("expected field name after `->`")),
                    };
                    e = Expr {
                        kind: ExprKind::Member { base: Box::new(e), field, arrow: true },
                        span: self.span_between(start, self.i),
                    };
                }
                TokKind::Punct("++") => {
                    self.bump();
                    e = Expr {
                        kind: ExprKind::Unary { op: UnaryOp::PostInc, operand: Box::new(e) },
                        span: self.span_between(start, self.i),
                    };
                }
                TokKind::Punct("--") => {
                    self.bump();
                    e = Expr {
                        kind: ExprKind::Unary { op: UnaryOp::PostDec, operand: Box::new(e) },
                        span: self.span_between(start, self.i),
                    };
                }
                _ => break,
            }
        }
        Ok(e)
    }

    fn parse_primary(&mut self) -> PResult<Expr> {
        let start = self.i;
        let Some(t) = self.cur().cloned() else { return Err(err("unexpected end of expression")) };
        match t.kind {
            TokKind::Int(v) => {
                self.bump();
                Ok(Expr { kind: ExprKind::IntLit(v), span: self.span_between(start, self.i) })
            }
            TokKind::Float(v) => {
                self.bump();
                Ok(Expr { kind: ExprKind::FloatLit(v), span: self.span_between(start, self.i) })
            }
            TokKind::Char(v) => {
                self.bump();
                Ok(Expr { kind: ExprKind::CharLit(v), span: self.span_between(start, self.i) })
            }
            TokKind::Str(s) => {
                self.bump();
                let mut full = s;
                while let Some(TokKind::Str(next)) = self.cur().map(|t| t.kind.clone()) {
                    full.push_str(&next);
                    self.bump();
                }
                Ok(Expr {
                    kind: ExprKind::StrLit(full),
                    span: self.span_between(start, self.i),
                })
            }
            TokKind::Ident(name) => {
                if is_reserved(&name) && name != "sizeof" {
                    return Err(err(format!("unexpected keyword `{}` in expression", name)));
                }
                self.bump();
                Ok(Expr { kind: ExprKind::Ident(name), span: self.span_between(start, self.i) })
            }
            TokKind::Punct("(") => {
                self.bump();
                let e = self.parse_expr()?;
                self.expect_punct(")")?;
                Ok(Expr { kind: e.kind, span: self.span_between(start, self.i) })
            }
            _ => Err(err(format!("unexpected token `{}` in expression", self.text(&t)))),
        }
    }
}

struct Specifiers {
    text: String,
    is_typedef: bool,
}

struct DeclInfo {
    name: String,
    stars: String,
    is_function: bool,
    #[allow(dead_code)]
    is_array: bool,
    params: Vec<Param>,
    variadic: bool,
    #[allow(dead_code)]
    span: SourceSpan,
}

fn collect_declared_names(stmts: &[Stmt], out: &mut Vec<String>) {
    for s in stmts {
        match &s.kind {
            StmtKind::Decl(ds) => out.extend(ds.iter().map(|d| d.name.clone())),
            StmtKind::Compound(inner) | StmtKind::Switch { body: inner, .. } => {
                collect_declared_names(inner, out)
            }
            StmtKind::If { then_branch, else_branch, .. } => {
                collect_declared_names(std::slice::from_ref(then_branch), out);
                if let Some(e) = else_branch {
                    collect_declared_names(std::slice::from_ref(e), out);
                }
            }
            StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } => {
                collect_declared_names(std::slice::from_ref(body), out)
            }
            StmtKind::For { init, body, .. } => {
                if let Some(i) = init {
                    collect_declared_names(std::slice::from_ref(i), out);
                }
                collect_declared_names(std::slice::from_ref(body), out);
            }
            _ => {}
        }
    }
}
