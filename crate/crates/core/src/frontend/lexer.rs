//! Tokenizer for preprocessed C.
//!
//! Consumes `# <n> "file"` line markers for location mapping, records any
//! other residual directive as a skipped region, and tracks both physical
//! byte offsets and mapped line numbers per token.

use super::ast::{SkippedRegion, SourceSpan};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum TokKind {
    Ident(String),
    Int(i64),
    Float(f64),
    Char(u32),
    Str(String),
    Punct(&'static str),
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokKind,
    pub span: SourceSpan,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        matches!(&self.kind, TokKind::Punct(q) if *q == p)
    }

    pub fn is_ident(&self, name: &str) -> bool {
        matches!(&self.kind, TokKind::Ident(i) if i == name)
    }

}

const PUNCTS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "(", ")", "[", "]", "{", "}", ";", ",", ".", "?",
    ":", "~", "!", "=", "<", ">", "+", "-", "*", "/", "%", "&", "|", "^",
];

pub struct LexOutput {
    pub tokens: Vec<Token>,
    pub skipped: Vec<SkippedRegion>,
    /// Set when braces/parens/brackets cannot be matched at file granularity.
    pub unbalanced: bool,
}

struct Lexer<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// Physical 1-based line and column of `pos`.
    line: u32,
    col: u32,
    /// Mapped location state from line markers.
    map_file: PathBuf,
    /// mapped_line = map_base + (physical_line - map_anchor)
    map_base: i64,
    map_anchor: i64,
    unit_path: PathBuf,
}

pub fn lex(source: &str, path: &Path) -> LexOutput {
    let mut lx = Lexer {
        bytes: source.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
        map_file: path.to_path_buf(),
        map_base: 1,
        map_anchor: 1,
        unit_path: path.to_path_buf(),
    };
    let mut tokens = Vec::new();
    let mut skipped = Vec::new();

    loop {
        lx.skip_ws_and_comments(&mut skipped);
        if lx.pos >= lx.bytes.len() {
            break;
        }
        let start = lx.mark();
        let b = lx.bytes[lx.pos];
        let kind = if b == b'_' || b.is_ascii_alphabetic() {
            Some(lx.lex_ident())
        } else if b.is_ascii_digit() || (b == b'.' && lx.peek2_digit()) {
            Some(lx.lex_number())
        } else if b == b'"' {
            Some(lx.lex_string())
        } else if b == b'\'' {
            Some(lx.lex_char())
        } else {
            lx.lex_punct()
        };
        match kind {
            Some(kind) => {
                let span = lx.span_from(&start);
                tokens.push(Token { kind, span });
            }
            None => {
                // Unknown byte: record a one-byte skip and move on.
                lx.advance(1);
                let span = lx.span_from(&start);
                skipped.push(SkippedRegion {
                    span,
                    reason: "unrecognized byte outside the supported token set".into(),
                });
            }
        }
    }

    let unbalanced = !check_balance(&tokens);
    LexOutput { tokens, skipped, unbalanced }
}

/// Verify that (), [], {} nest properly over the whole token stream.
fn check_balance(tokens: &[Token]) -> bool {
    let mut stack: Vec<&'static str> = Vec::new();
    for t in tokens {
        if let TokKind::Punct(p) = &t.kind {
            match *p {
                "(" | "[" | "{" => stack.push(p),
                ")" => {
                    if stack.pop() != Some("(") {
                        return false;
                    }
                }
                "]" => {
                    if stack.pop() != Some("[") {
                        return false;
                    }
                }
                "}" => {
                    if stack.pop() != Some("{") {
                        return false;
                    }
                }
                _ => {}
            }
        }
    }
    stack.is_empty()
}

struct Mark {
    pos: usize,
    col: u32,
    map_file: PathBuf,
    mapped_line: i64,
}

impl<'a> Lexer<'a> {
    fn mark(&self) -> Mark {
        Mark {
            pos: self.pos,
            col: self.col,
            map_file: self.map_file.clone(),
            mapped_line: self.mapped_line(self.line),
        }
    }

    fn mapped_line(&self, physical: u32) -> i64 {
        self.map_base + (physical as i64 - self.map_anchor)
    }

    fn span_from(&self, m: &Mark) -> SourceSpan {
        SourceSpan {
            file: m.map_file.clone(),
            start_line: m.mapped_line.max(1) as u32,
            start_col: m.col,
            end_line: self.mapped_line(self.line).max(1) as u32,
            end_col: self.col,
            byte_start: m.pos,
            byte_end: self.pos,
        }
    }

    fn advance(&mut self, n: usize) {
        for _ in 0..n {
            if self.pos >= self.bytes.len() {
                break;
            }
            if self.bytes[self.pos] == b'\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
            self.pos += 1;
        }
    }

    fn peek2_digit(&self) -> bool {
        self.pos + 1 < self.bytes.len() && self.bytes[self.pos + 1].is_ascii_digit()
    }

    fn at_line_start(&self) -> bool {
        let mut i = self.pos;
        while i > 0 {
            let b = self.bytes[i - 1];
            if b == b'\n' {
                return true;
            }
            if b != b' ' && b != b'\t' {
                return false;
            }
            i -= 1;
        }
        true
    }

    fn skip_ws_and_comments(&mut self, skipped: &mut Vec<SkippedRegion>) {
        loop {
            if self.pos >= self.bytes.len() {
                return;
            }
            let b = self.bytes[self.pos];
            if b == b' ' || b == b'\t' || b == b'\r' || b == b'\n' {
                self.advance(1);
            } else if b == b'\\'
                && self.pos + 1 < self.bytes.len()
                && (self.bytes[self.pos + 1] == b'\n'
                    || (self.bytes[self.pos + 1] == b'\r'
                        && self.bytes.get(self.pos + 2) == Some(&b'\n')))
            {
                self.advance(2);
            } else if b == b'/' && self.bytes.get(self.pos + 1) == Some(&b'/') {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.advance(1);
                }
            } else if b == b'/' && self.bytes.get(self.pos + 1) == Some(&b'*') {
                self.advance(2);
                while self.pos < self.bytes.len() {
                    if self.bytes[self.pos] == b'*' && self.bytes.get(self.pos + 1) == Some(&b'/') {
                        self.advance(2);
                        break;
                    }
                    self.advance(1);
                }
            } else if b == b'#' && self.at_line_start() {
                self.consume_directive(skipped);
            } else {
                return;
            }
        }
    }

    /// Handle a preprocessor residue line starting at `#`. Line markers
    /// update the location map; everything else becomes a skipped region.
    fn consume_directive(&mut self, skipped: &mut Vec<SkippedRegion>) {
        let start = self.mark();
        let line_start = self.pos;
        // Consume the full logical line, honoring backslash continuations.
        let mut end = self.pos;
        let mut continued = true;
        while end < self.bytes.len() {
            if self.bytes[end] == b'\n' {
                if end > line_start && self.bytes[end - 1] == b'\\' {
                    end += 1;
                    continue;
                }
                continued = false;
                break;
            }
            end += 1;
        }
        let _ = continued;
        let text = std::str::from_utf8(&self.bytes[line_start..end]).unwrap_or("");
        let marker = parse_line_marker(text);
        let physical_line = self.line;
        while self.pos < end {
            self.advance(1);
        }
        match marker {
            Some((num, file)) => {
                self.map_base = num as i64;
                self.map_anchor = physical_line as i64 + 1;
                self.map_file = file.map(PathBuf::from).unwrap_or_else(|| self.unit_path.clone());
            }
            None => {
                let span = self.span_from(&start);
                let head: String = text.chars().take(24).collect();
                skipped.push(SkippedRegion {
                    span,
                    reason: format!("residual preprocessor directive: {}", head.trim_end()),
                });
            }
        }
    }

    fn lex_ident(&mut self) -> TokKind {
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'_' || b.is_ascii_alphanumeric() {
                self.advance(1);
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("").to_string();
        // Wide string/char literal prefixes.
        if text == "L" && self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'"' => return self.lex_string(),
                b'\'' => return self.lex_char(),
                _ => {}
            }
        }
        TokKind::Ident(text)
    }

    fn lex_number(&mut self) -> TokKind {
        let start = self.pos;
        let bytes = self.bytes;
        let mut i = self.pos;
        let mut is_float = false;
        if bytes[i] == b'0' && i + 1 < bytes.len() && (bytes[i + 1] | 0x20) == b'x' {
            i += 2;
            while i < bytes.len() && bytes[i].is_ascii_hexdigit() {
                i += 1;
            }
        } else {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                is_float = true;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] | 0x20) == b'e' {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    is_float = true;
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
        }
        let digits_end = i;
        // Suffixes.
        while i < bytes.len() {
            match bytes[i] | 0x20 {
                b'u' | b'l' => i += 1,
                b'f' if is_float => i += 1,
                _ => break,
            }
        }
        let text = std::str::from_utf8(&bytes[start..digits_end]).unwrap_or("0");
        let n = i - self.pos;
        self.advance(n);
        if is_float {
            TokKind::Float(text.parse::<f64>().unwrap_or(0.0))
        } else {
            let value = if let Some(hex) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
                i64::from_str_radix(hex, 16).unwrap_or_else(|_| {
                    u64::from_str_radix(hex, 16).map(|v| v as i64).unwrap_or(0)
                })
            } else if text.len() > 1 && text.starts_with('0') {
                i64::from_str_radix(&text[1..], 8).unwrap_or(0)
            } else {
                text.parse::<i64>().unwrap_or_else(|_| {
                    text.parse::<u64>().map(|v| v as i64).unwrap_or(0)
                })
            };
            TokKind::Int(value)
        }
    }

    fn lex_string(&mut self) -> TokKind {
        // self.pos is at the opening quote.
        self.advance(1);
        let mut value = String::new();
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'\\' && self.pos + 1 < self.bytes.len() {
                value.push(decode_escape(self.bytes[self.pos + 1]));
                self.advance(2);
            } else if b == b'"' {
                self.advance(1);
                break;
            } else {
                value.push(b as char);
                self.advance(1);
            }
        }
        TokKind::Str(value)
    }

    fn lex_char(&mut self) -> TokKind {
        self.advance(1);
        let mut value: u32 = 0;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'\\' && self.pos + 1 < self.bytes.len() {
                value = decode_escape(self.bytes[self.pos + 1]) as u32;
                self.advance(2);
            } else if b == b'\'' {
                self.advance(1);
                break;
            } else {
                value = b as u32;
                self.advance(1);
            }
        }
        TokKind::Char(value)
    }

    fn lex_punct(&mut self) -> Option<TokKind> {
        let rest = &self.bytes[self.pos..];
        for p in PUNCTS {
            if rest.starts_with(p.as_bytes()) {
                self.advance(p.len());
                return Some(TokKind::Punct(p));
            }
        }
        None
    }
}

fn decode_escape(b: u8) -> char {
    match b {
        b'n' => '\n',
        b't' => '\t',
        b'r' => '\r',
        b'0' => '\0',
        b'\\' => '\\',
        b'\'' => '\'',
        b'"' => '"',
        other => other as char,
    }
}

/// Parse `# 12 "file.c" [flags]` or `#line 12 "file.c"`.
fn parse_line_marker(text: &str) -> Option<(u32, Option<String>)> {
    let rest = text.strip_prefix('#')?.trim_start();
    let rest = rest.strip_prefix("line").map(str::trim_start).unwrap_or(rest);
    let digits_end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
    if digits_end == 0 {
        return None;
    }
    let num: u32 = rest[..digits_end].parse().ok()?;
    let tail = rest[digits_end..].trim_start();
    let file = if let Some(stripped) = tail.strip_prefix('"') {
        let end = stripped.find('"')?;
        Some(stripped[..end].to_string())
    } else if tail.is_empty() {
        None
    } else {
        return None;
    };
    Some((num, file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn kinds(src: &str) -> Vec<TokKind> {
        lex(src, Path::new("t.c")).tokens.into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn punctuation_longest_match() {
        assert_eq!(
            kinds("a <<= b >> c"),
            vec![
                TokKind::Ident("a".into()),
                TokKind::Punct("<<="),
                TokKind::Ident("b".into()),
                TokKind::Punct(">>"),
                TokKind::Ident("c".into()),
            ]
        );
    }

    #[test]
    fn numbers() {
        assert_eq!(kinds("0x100 017 42"), vec![TokKind::Int(256), TokKind::Int(15), TokKind::Int(42)]);
        assert_eq!(kinds("3735929054u"), vec![TokKind::Int(0xDEADC0DE_u32 as i64)]);
    }

    #[test]
    fn line_marker_updates_mapping() {
        let src = "# 10 \"orig.c\"\nint x;\n";
        let out = lex(src, Path::new("t.c"));
        assert!(out.skipped.is_empty());
        let t = &out.tokens[0];
        assert_eq!(t.span.start_line, 10);
        assert_eq!(t.span.file, Path::new("orig.c"));
        // Byte offsets still index the physical text.
        assert_eq!(&src[t.span.byte_start..t.span.byte_end], "int");
    }

    #[test]
    fn other_directives_become_skips() {
        let out = lex("#pragma pack(1)\nint x;\n", Path::new("t.c"));
        assert_eq!(out.skipped.len(), 1);
        assert!(out.skipped[0].reason.contains("pragma"));
        assert_eq!(out.tokens.len(), 3);
    }

    #[test]
    fn unbalanced_detection() {
        assert!(lex("int f() { {", Path::new("t.c")).unbalanced);
        assert!(!lex("int f() { }", Path::new("t.c")).unbalanced);
    }

    #[test]
    fn strings_and_chars() {
        assert_eq!(
            kinds("\"a\\nb\" 'x'"),
            vec![TokKind::Str("a\nb".into()), TokKind::Char('x' as u32)]
        );
    }
}
