//! AST types for the supported C subset.
//!
//! Every node carries a [`SourceSpan`] whose byte range indexes the original
//! input text exactly, so that later rewriting stages can splice bytes without
//! re-printing the tree.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// A half-open byte range into one source file, plus 1-based line/column
/// positions. When preprocessor line markers are present, `file` and the
/// line numbers refer to the mapped (pre-preprocessing) location while the
/// byte offsets always index the physical input text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file: PathBuf,
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
    pub byte_start: usize,
    pub byte_end: usize,
}

impl SourceSpan {
    /// Extract the spanned bytes from the original text.
    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.byte_start..self.byte_end]
    }

    /// Merge two spans into the smallest span covering both.
    pub fn cover(&self, other: &SourceSpan) -> SourceSpan {
        let (sl, sc, bs) = if self.byte_start <= other.byte_start {
            (self.start_line, self.start_col, self.byte_start)
        } else {
            (other.start_line, other.start_col, other.byte_start)
        };
        let (el, ec, be) = if self.byte_end >= other.byte_end {
            (self.end_line, self.end_col, self.byte_end)
        } else {
            (other.end_line, other.end_col, other.byte_end)
        };
        SourceSpan {
            file: self.file.clone(),
            start_line: sl,
            start_col: sc,
            end_line: el,
            end_col: ec,
            byte_start: bs,
            byte_end: be,
        }
    }

    pub fn contains(&self, other: &SourceSpan) -> bool {
        self.byte_start <= other.byte_start && other.byte_end <= self.byte_end
    }

    pub fn overlaps(&self, other: &SourceSpan) -> bool {
        self.byte_start < other.byte_end && other.byte_start < self.byte_end
    }
}

impl std::fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.file.display(), self.start_line, self.start_col)
    }
}

/// A region the parser skipped, with a human-readable reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRegion {
    pub span: SourceSpan,
    pub reason: String,
}

/// One parsed translation unit: the functions and globals of the supported
/// subset, plus everything that was skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationUnit {
    pub path: PathBuf,
    pub functions: Vec<FunctionAst>,
    pub globals: Vec<GlobalDecl>,
    pub skipped_regions: Vec<SkippedRegion>,
    /// The physical text the unit was parsed from.
    pub source: String,
}

/// A top-level declaration that is not a function definition: variable
/// declarations, prototypes, typedefs, struct/union/enum definitions.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalDecl {
    pub names: Vec<String>,
    pub is_prototype: bool,
    pub is_typedef: bool,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ctype: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionAst {
    pub name: String,
    pub parameters: Vec<Param>,
    pub return_type: String,
    pub variadic: bool,
    pub body: Vec<Stmt>,
    /// Span of the whole definition, return type through closing brace.
    pub span: SourceSpan,
    /// Span of the body's braces, inclusive of `{` and `}`.
    pub body_span: SourceSpan,
    /// Names declared directly in the body's outermost block (plus params),
    /// used for scope checks when relocating code.
    pub top_level_names: Vec<String>,
    /// All names declared anywhere in the function, including params.
    pub declared_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    /// One declaration statement; may declare several names.
    Decl(Vec<Declarator>),
    Expr(Expr),
    If {
        cond: Expr,
        then_branch: Box<Stmt>,
        else_branch: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    DoWhile {
        body: Box<Stmt>,
        cond: Expr,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        step: Option<Expr>,
        body: Box<Stmt>,
    },
    Switch {
        scrutinee: Expr,
        body: Vec<Stmt>,
    },
    /// `case expr:` (Some) or `default:` (None); only inside switch bodies.
    CaseLabel(Option<Expr>),
    Return(Option<Expr>),
    Break,
    Continue,
    Compound(Vec<Stmt>),
    Empty,
    /// A construct outside the subset (goto, inline asm, ...). Control flow
    /// falls through to the next statement; data flow treats it as reading
    /// the listed identifiers and writing nothing.
    Opaque {
        reason: String,
        referenced: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Declarator {
    pub name: String,
    pub ctype: String,
    pub is_array: bool,
    pub init: Option<Expr>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Plus,
    Not,
    BitNot,
    Deref,
    AddrOf,
    PreInc,
    PreDec,
    PostInc,
    PostDec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Shl,
    Shr,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitXor,
    BitOr,
    LogAnd,
    LogOr,
}

impl BinaryOp {
    pub fn is_relational(self) -> bool {
        matches!(self, BinaryOp::Lt | BinaryOp::Gt | BinaryOp::Le | BinaryOp::Ge)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
            BinaryOp::Lt => "<",
            BinaryOp::Gt => ">",
            BinaryOp::Le => "<=",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::BitAnd => "&",
            BinaryOp::BitXor => "^",
            BinaryOp::BitOr => "|",
            BinaryOp::LogAnd => "&&",
            BinaryOp::LogOr => "||",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Assign,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Shl,
    Shr,
    And,
    Or,
    Xor,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    IntLit(i64),
    FloatLit(f64),
    CharLit(u32),
    StrLit(String),
    Ident(String),
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Assign {
        op: AssignOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Ternary {
        cond: Box<Expr>,
        then_val: Box<Expr>,
        else_val: Box<Expr>,
    },
    Call {
        callee: Box<Expr>,
        args: Vec<Expr>,
    },
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    Member {
        base: Box<Expr>,
        field: String,
        arrow: bool,
    },
    Cast {
        ctype: String,
        operand: Box<Expr>,
    },
    SizeofType(String),
    SizeofExpr(Box<Expr>),
    Comma {
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// Brace-enclosed initializer; identifiers inside are collected as reads.
    BracedInit(Vec<Expr>),
}

impl Expr {
    /// The callee name when this is a direct call through a plain identifier.
    pub fn direct_callee(&self) -> Option<&str> {
        if let ExprKind::Call { callee, .. } = &self.kind {
            if let ExprKind::Ident(name) = &callee.kind {
                return Some(name);
            }
        }
        None
    }

    pub fn as_int_lit(&self) -> Option<i64> {
        match &self.kind {
            ExprKind::IntLit(v) => Some(*v),
            _ => None,
        }
    }

    /// True when the expression contains no identifiers at all
    /// (literals and arithmetic over literals).
    pub fn is_constant(&self) -> bool {
        let mut ids = Vec::new();
        collect_idents(self, &mut ids);
        ids.is_empty()
    }
}

/// Collect every identifier occurring anywhere in the expression.
pub fn collect_idents(expr: &Expr, out: &mut Vec<String>) {
    match &expr.kind {
        ExprKind::Ident(name) => out.push(name.clone()),
        ExprKind::Unary { operand, .. } => collect_idents(operand, out),
        ExprKind::Binary { lhs, rhs, .. } | ExprKind::Comma { lhs, rhs } => {
            collect_idents(lhs, out);
            collect_idents(rhs, out);
        }
        ExprKind::Assign { lhs, rhs, .. } => {
            collect_idents(lhs, out);
            collect_idents(rhs, out);
        }
        ExprKind::Ternary { cond, then_val, else_val } => {
            collect_idents(cond, out);
            collect_idents(then_val, out);
            collect_idents(else_val, out);
        }
        ExprKind::Call { callee, args } => {
            collect_idents(callee, out);
            for a in args {
                collect_idents(a, out);
            }
        }
        ExprKind::Index { base, index } => {
            collect_idents(base, out);
            collect_idents(index, out);
        }
        ExprKind::Member { base, .. } => collect_idents(base, out),
        ExprKind::Cast { operand, .. } => collect_idents(operand, out),
        ExprKind::SizeofExpr(e) => collect_idents(e, out),
        ExprKind::BracedInit(items) => {
            for e in items {
                collect_idents(e, out);
            }
        }
        ExprKind::IntLit(_)
        | ExprKind::FloatLit(_)
        | ExprKind::CharLit(_)
        | ExprKind::StrLit(_)
        | ExprKind::SizeofType(_) => {}
    }
}

/// Collect every call expression (including nested ones) in evaluation order.
pub fn collect_calls<'a>(expr: &'a Expr, out: &mut Vec<&'a Expr>) {
    match &expr.kind {
        ExprKind::Call { callee, args } => {
            collect_calls(callee, out);
            for a in args {
                collect_calls(a, out);
            }
            out.push(expr);
        }
        ExprKind::Unary { operand, .. } => collect_calls(operand, out),
        ExprKind::Binary { lhs, rhs, .. } | ExprKind::Comma { lhs, rhs } => {
            collect_calls(lhs, out);
            collect_calls(rhs, out);
        }
        ExprKind::Assign { lhs, rhs, .. } => {
            collect_calls(lhs, out);
            collect_calls(rhs, out);
        }
        ExprKind::Ternary { cond, then_val, else_val } => {
            collect_calls(cond, out);
            collect_calls(then_val, out);
            collect_calls(else_val, out);
        }
        ExprKind::Index { base, index } => {
            collect_calls(base, out);
            collect_calls(index, out);
        }
        ExprKind::Member { base, .. } => collect_calls(base, out),
        ExprKind::Cast { operand, .. } => collect_calls(operand, out),
        ExprKind::SizeofExpr(e) => collect_calls(e, out),
        ExprKind::BracedInit(items) => {
            for e in items {
                collect_calls(e, out);
            }
        }
        _ => {}
    }
}

/// A dotted access path rooted at a named variable: `s`, `s.f`, `s.f.g`.
/// Array indexing and pointer dereference collapse onto the base, `->` and
/// `.` both extend the chain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarKey {
    pub base: String,
    pub chain: Vec<String>,
}

impl VarKey {
    pub fn new(base: impl Into<String>) -> Self {
        VarKey { base: base.into(), chain: Vec::new() }
    }

    pub fn with_chain(base: impl Into<String>, chain: Vec<String>) -> Self {
        VarKey { base: base.into(), chain }
    }

    /// True when a definition of `self` can supply data read through `other`:
    /// the keys are equal, or one access path is a prefix of the other
    /// (whole-struct writes feed member reads and vice versa).
    pub fn flows_to(&self, other: &VarKey) -> bool {
        if self.base != other.base {
            return false;
        }
        let n = self.chain.len().min(other.chain.len());
        self.chain[..n] == other.chain[..n]
    }
}

impl std::fmt::Display for VarKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.base)?;
        for part in &self.chain {
            write!(f, ".{}", part)?;
        }
        Ok(())
    }
}

/// Reduce an lvalue-shaped expression to the variable key it writes or
/// names. Returns the key and whether the write goes through a dereference
/// or index (a weak update that must not kill other definitions).
pub fn lvalue_key(expr: &Expr) -> Option<(VarKey, bool)> {
    match &expr.kind {
        ExprKind::Ident(name) => Some((VarKey::new(name.clone()), false)),
        ExprKind::Member { base, field, arrow } => {
            let (mut key, weak) = lvalue_key(base)?;
            key.chain.push(field.clone());
            // `p->f` stores through the pointer; `s.f` overwrites in place.
            Some((key, weak || *arrow))
        }
        ExprKind::Index { base, .. } => {
            let (key, _) = lvalue_key(base)?;
            Some((key, true))
        }
        ExprKind::Unary { op: UnaryOp::Deref, operand } => {
            let (key, _) = lvalue_key(operand)?;
            Some((key, true))
        }
        ExprKind::Cast { operand, .. } => lvalue_key(operand),
        _ => None,
    }
}

/// The variable key named by an argument expression, looking through a
/// leading `&` and casts: `&len` and `(char *)&s.len` both yield their
/// underlying key. Used when binding caller variables to callee parameters.
pub fn arg_binding_key(expr: &Expr) -> Option<VarKey> {
    match &expr.kind {
        ExprKind::Unary { op: UnaryOp::AddrOf, operand } => lvalue_key(operand).map(|(k, _)| k),
        ExprKind::Cast { operand, .. } => arg_binding_key(operand),
        _ => lvalue_key(expr).map(|(k, _)| k),
    }
}

/// Collect the value-bearing variable keys read by an expression: member
/// chains stay precise, everything else collapses to its base variable.
/// Identifiers in `skip_callees` (direct callee positions) are not reads.
pub fn collect_read_keys(expr: &Expr, known_functions: &dyn Fn(&str) -> bool, out: &mut Vec<VarKey>) {
    match &expr.kind {
        ExprKind::Ident(name) => {
            if !known_functions(name) {
                out.push(VarKey::new(name.clone()));
            }
        }
        ExprKind::Member { .. } => {
            if let Some((key, _)) = lvalue_key(expr) {
                out.push(key);
            } else if let ExprKind::Member { base, .. } = &expr.kind {
                collect_read_keys(base, known_functions, out);
            }
        }
        ExprKind::Index { base, index } => {
            collect_read_keys(base, known_functions, out);
            collect_read_keys(index, known_functions, out);
        }
        ExprKind::Unary { operand, .. } => collect_read_keys(operand, known_functions, out),
        ExprKind::Binary { lhs, rhs, .. } | ExprKind::Comma { lhs, rhs } => {
            collect_read_keys(lhs, known_functions, out);
            collect_read_keys(rhs, known_functions, out);
        }
        ExprKind::Assign { lhs, rhs, op } => {
            if *op != AssignOp::Assign {
                collect_read_keys(lhs, known_functions, out);
            } else if let Some((key, true)) = lvalue_key(lhs) {
                // Writing through a pointer or index also reads the base.
                out.push(key);
            } else if lvalue_key(lhs).is_none() {
                collect_read_keys(lhs, known_functions, out);
            }
            // Index expressions inside the lvalue are reads either way.
            collect_lvalue_index_reads(lhs, known_functions, out);
            collect_read_keys(rhs, known_functions, out);
        }
        ExprKind::Ternary { cond, then_val, else_val } => {
            collect_read_keys(cond, known_functions, out);
            collect_read_keys(then_val, known_functions, out);
            collect_read_keys(else_val, known_functions, out);
        }
        ExprKind::Call { callee, args } => {
            match &callee.kind {
                ExprKind::Ident(name) if known_functions(name) => {}
                _ => collect_read_keys(callee, known_functions, out),
            }
            for a in args {
                collect_read_keys(a, known_functions, out);
            }
        }
        ExprKind::Cast { operand, .. } => collect_read_keys(operand, known_functions, out),
        ExprKind::SizeofExpr(_) | ExprKind::SizeofType(_) => {}
        ExprKind::BracedInit(items) => {
            for e in items {
                collect_read_keys(e, known_functions, out);
            }
        }
        ExprKind::IntLit(_) | ExprKind::FloatLit(_) | ExprKind::CharLit(_) | ExprKind::StrLit(_) => {}
    }
}

fn collect_lvalue_index_reads(
    expr: &Expr,
    known_functions: &dyn Fn(&str) -> bool,
    out: &mut Vec<VarKey>,
) {
    match &expr.kind {
        ExprKind::Index { base, index } => {
            collect_read_keys(index, known_functions, out);
            collect_lvalue_index_reads(base, known_functions, out);
        }
        ExprKind::Member { base, .. } | ExprKind::Cast { operand: base, .. } => {
            collect_lvalue_index_reads(base, known_functions, out)
        }
        ExprKind::Unary { operand, .. } => collect_lvalue_index_reads(operand, known_functions, out),
        _ => {}
    }
}
