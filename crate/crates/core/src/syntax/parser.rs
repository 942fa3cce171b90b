//! Recursive-descent parser for a small indentation-structured language:
//!
//! ```text
//! module     := (NEWLINE | statement)+
//! statement  := funcdef | if_stmt | simple NEWLINE
//! funcdef    := "def" NAME "(" [NAME ("," NAME)*] ")" ":" block
//! if_stmt    := "if" expr ":" block ["else" ":" block]
//! block      := NEWLINE INDENT statement+ DEDENT
//! simple     := "return" [expr] | NAME "=" expr | expr
//! expr       := arith [CMP arith]
//! arith      := term (("+" | "-") term)*
//! term       := unary (("*" | "/" | "%") unary)*
//! unary      := "-" unary | postfix
//! postfix    := atom ("(" [expr ("," expr)*] ")")*
//! atom       := NAME | NUMBER | STRING | "(" expr ")"
//! ```

use super::ast::AstNode;
use crate::error::{Error, Result};

const KEYWORDS: &[&str] = &["def", "return", "if", "else"];
const COMPARISONS: &[&str] = &["==", "!=", "<=", ">=", "<", ">"];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Keyword(String),
    Integer(String),
    Float(String),
    Str(String),
    Op(String),
    Punct(String),
    Newline,
    Indent,
    Dedent,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Name(s) => format!("identifier `{s}`"),
            Tok::Keyword(s) | Tok::Op(s) | Tok::Punct(s) => format!("`{s}`"),
            Tok::Integer(s) | Tok::Float(s) => format!("number `{s}`"),
            Tok::Str(s) => format!("string {s}"),
            Tok::Newline => "newline".into(),
            Tok::Indent => "indent".into(),
            Tok::Dedent => "dedent".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    start: usize,
    end: usize,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out: Vec<Token> = Vec::new();
    let mut indents = vec![0usize];
    let mut i = 0;
    let mut line = 1;
    let mut line_start = 0;
    let mut at_line_start = true;
    let mut depth = 0usize; // parenthesis nesting; newlines inside are ignored

    let err = |line: usize, column: usize, expected: &[&str], found: String| Error::Syntax {
        line,
        column,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found,
    };

    while i < bytes.len() {
        if at_line_start && depth == 0 {
            let mut width = 0;
            let mut j = i;
            while j < bytes.len() && (bytes[j] == b' ' || bytes[j] == b'\t') {
                width += if bytes[j] == b'\t' { 4 } else { 1 };
                j += 1;
            }
            if j >= bytes.len() || bytes[j] == b'\n' || bytes[j] == b'\r' {
                // blank line
                i = j;
                if i < bytes.len() {
                    if bytes[i] == b'\r' {
                        i += 1;
                    }
                    if i < bytes.len() && bytes[i] == b'\n' {
                        i += 1;
                    }
                    line += 1;
                    line_start = i;
                }
                continue;
            }
            let column = j - line_start + 1;
            let current = *indents.last().unwrap();
            if width > current {
                indents.push(width);
                out.push(Token { tok: Tok::Indent, start: j, end: j, line, column });
            } else {
                while width < *indents.last().unwrap() {
                    indents.pop();
                    out.push(Token { tok: Tok::Dedent, start: j, end: j, line, column });
                }
                if width != *indents.last().unwrap() {
                    return Err(err(line, column, &["consistent indentation"], format!("indent of {width}")));
                }
            }
            i = j;
            at_line_start = false;
            continue;
        }

        let c = bytes[i] as char;
        let column = i - line_start + 1;
        let start = i;
        let push = |out: &mut Vec<Token>, tok: Tok, end: usize| out.push(Token { tok, start, end, line, column });
        match c {
            ' ' | '\t' => i += 1,
            '\r' => i += 1,
            '\n' => {
                if depth == 0 {
                    push(&mut out, Tok::Newline, i);
                    at_line_start = true;
                }
                i += 1;
                line += 1;
                line_start = i;
            }
            '"' | '\'' => {
                let mut j = i + 1;
                while j < bytes.len() && bytes[j] as char != c {
                    if bytes[j] == b'\\' {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j] == b'\n' {
                        return Err(err(line, column, &["closing quote"], "newline".into()));
                    }
                    j += 1;
                }
                if j >= bytes.len() {
                    return Err(err(line, column, &["closing quote"], "end of input".into()));
                }
                push(&mut out, Tok::Str(src[i..=j].to_string()), j + 1);
                i = j + 1;
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                let mut float = false;
                if j + 1 < bytes.len() && bytes[j] == b'.' && bytes[j + 1].is_ascii_digit() {
                    float = true;
                    j += 1;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                let text = src[i..j].to_string();
                push(&mut out, if float { Tok::Float(text) } else { Tok::Integer(text) }, j);
                i = j;
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < src.len() {
                    let ch = src[j..].chars().next().unwrap();
                    if ch.is_alphanumeric() || ch == '_' {
                        j += ch.len_utf8();
                    } else {
                        break;
                    }
                }
                let word = src[i..j].to_string();
                let tok = if KEYWORDS.contains(&word.as_str()) { Tok::Keyword(word) } else { Tok::Name(word) };
                push(&mut out, tok, j);
                i = j;
            }
            _ => {
                let two = src.get(i..i + 2).unwrap_or("");
                if COMPARISONS.contains(&two) {
                    push(&mut out, Tok::Op(two.to_string()), i + 2);
                    i += 2;
                    continue;
                }
                let tok = match c {
                    '+' | '-' | '*' | '/' | '%' | '=' | '<' | '>' => Tok::Op(c.to_string()),
                    '(' => {
                        depth += 1;
                        Tok::Punct("(".into())
                    }
                    ')' => {
                        depth = depth.saturating_sub(1);
                        Tok::Punct(")".into())
                    }
                    ',' | ':' => Tok::Punct(c.to_string()),
                    other => return Err(err(line, column, &["token"], format!("character `{other}`"))),
                };
                push(&mut out, tok, i + c.len_utf8());
                i += c.len_utf8();
            }
        }
    }
    let column = i - line_start + 1;
    let end_tok = |tok| Token { tok, start: i, end: i, line, column };
    if !matches!(out.last().map(|t| &t.tok), None | Some(Tok::Newline) | Some(Tok::Dedent)) {
        out.push(end_tok(Tok::Newline));
    }
    while indents.len() > 1 {
        indents.pop();
        out.push(end_tok(Tok::Dedent));
    }
    out.push(end_tok(Tok::Eof));
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

fn span_of(children: &[AstNode]) -> Option<(usize, usize)> {
    let s = children.iter().find_map(|c| c.span)?.0;
    let e = children.iter().rev().find_map(|c| c.span)?.1;
    Some((s, e))
}

fn node(kind: &str, children: Vec<AstNode>) -> AstNode {
    let span = span_of(&children);
    AstNode { kind: kind.into(), text: None, children, span }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn error(&self, expected: &[&str]) -> Error {
        let t = &self.toks[self.pos];
        Error::Syntax {
            line: t.line,
            column: t.column,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.describe(),
        }
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn leaf_from(&mut self, kind: &str) -> AstNode {
        let t = self.bump();
        let text = match t.tok {
            Tok::Name(s)
            | Tok::Keyword(s)
            | Tok::Integer(s)
            | Tok::Float(s)
            | Tok::Str(s)
            | Tok::Op(s)
            | Tok::Punct(s) => s,
            other => other.describe(),
        };
        AstNode::leaf(kind, text).with_span(t.start, t.end)
    }

    fn expect_punct(&mut self, p: &str) -> Result<AstNode> {
        if *self.peek() == Tok::Punct(p.into()) {
            Ok(self.leaf_from("punctuation"))
        } else {
            Err(self.error(&[&format!("`{p}`")]))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[what]))
        }
    }

    fn module(&mut self) -> Result<AstNode> {
        let mut stmts = Vec::new();
        loop {
            match self.peek() {
                Tok::Newline => {
                    self.bump();
                }
                Tok::Eof => break,
                _ => stmts.push(self.statement()?),
            }
        }
        if stmts.is_empty() {
            return Err(self.error(&["statement"]));
        }
        Ok(node("module", stmts))
    }

    fn statement(&mut self) -> Result<AstNode> {
        match self.peek() {
            Tok::Keyword(k) if k == "def" => self.funcdef(),
            Tok::Keyword(k) if k == "if" => self.if_stmt(),
            _ => {
                let s = self.simple()?;
                match self.peek() {
                    Tok::Newline => {
                        self.bump();
                    }
                    Tok::Eof | Tok::Dedent => {}
                    _ => return Err(self.error(&["newline"])),
                }
                Ok(s)
            }
        }
    }

    fn funcdef(&mut self) -> Result<AstNode> {
        let kw = self.leaf_from("keyword");
        if !matches!(self.peek(), Tok::Name(_)) {
            return Err(self.error(&["function name"]));
        }
        let name = self.leaf_from("identifier");
        let mut params = vec![self.expect_punct("(")?];
        if matches!(self.peek(), Tok::Name(_)) {
            params.push(self.leaf_from("identifier"));
            while *self.peek() == Tok::Punct(",".into()) {
                params.push(self.leaf_from("punctuation"));
                if !matches!(self.peek(), Tok::Name(_)) {
                    return Err(self.error(&["parameter name"]));
                }
                params.push(self.leaf_from("identifier"));
            }
        }
        params.push(self.expect_punct(")").map_err(|_| self.error(&["`)`", "`,`", "parameter name"]))?);
        let colon = self.expect_punct(":")?;
        let body = self.block()?;
        Ok(node("function_definition", vec![kw, name, node("parameters", params), colon, body]))
    }

    fn if_stmt(&mut self) -> Result<AstNode> {
        let kw = self.leaf_from("keyword");
        let cond = self.expr()?;
        let colon = self.expect_punct(":")?;
        let body = self.block()?;
        let mut children = vec![kw, cond, colon, body];
        if matches!(self.peek(), Tok::Keyword(k) if k == "else") {
            let ekw = self.leaf_from("keyword");
            let ecolon = self.expect_punct(":")?;
            let ebody = self.block()?;
            children.push(node("else_clause", vec![ekw, ecolon, ebody]));
        }
        Ok(node("if_statement", children))
    }

    fn block(&mut self) -> Result<AstNode> {
        self.expect(Tok::Newline, "newline")?;
        self.expect(Tok::Indent, "indented block")?;
        let mut stmts = Vec::new();
        loop {
            match self.peek() {
                Tok::Dedent => {
                    self.bump();
                    break;
                }
                Tok::Eof => break,
                Tok::Newline => {
                    self.bump();
                }
                _ => stmts.push(self.statement()?),
            }
        }
        if stmts.is_empty() {
            return Err(self.error(&["statement"]));
        }
        Ok(node("block", stmts))
    }

    fn simple(&mut self) -> Result<AstNode> {
        match self.peek() {
            Tok::Keyword(k) if k == "return" => {
                let kw = self.leaf_from("keyword");
                let mut children = vec![kw];
                if !matches!(self.peek(), Tok::Newline | Tok::Eof | Tok::Dedent) {
                    children.push(self.expr()?);
                }
                Ok(node("return_statement", children))
            }
            Tok::Name(_) if *self.peek_at(1) == Tok::Op("=".into()) => {
                let target = self.leaf_from("identifier");
                let eq = self.leaf_from("operator");
                let value = self.expr()?;
                Ok(node("assignment", vec![target, eq, value]))
            }
            _ => {
                let e = self.expr()?;
                Ok(node("expression_statement", vec![e]))
            }
        }
    }

    fn expr(&mut self) -> Result<AstNode> {
        let lhs = self.arith()?;
        match self.peek() {
            Tok::Op(op) if COMPARISONS.contains(&op.as_str()) => {
                let op = self.leaf_from("operator");
                let rhs = self.arith()?;
                Ok(node("comparison_operator", vec![lhs, op, rhs]))
            }
            _ => Ok(lhs),
        }
    }

    fn arith(&mut self) -> Result<AstNode> {
        let mut lhs = self.term()?;
        while matches!(self.peek(), Tok::Op(op) if op == "+" || op == "-") {
            let op = self.leaf_from("operator");
            let rhs = self.term()?;
            lhs = node("binary_operator", vec![lhs, op, rhs]);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<AstNode> {
        let mut lhs = self.unary()?;
        while matches!(self.peek(), Tok::Op(op) if op == "*" || op == "/" || op == "%") {
            let op = self.leaf_from("operator");
            let rhs = self.unary()?;
            lhs = node("binary_operator", vec![lhs, op, rhs]);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<AstNode> {
        if *self.peek() == Tok::Op("-".into()) {
            let op = self.leaf_from("operator");
            let operand = self.unary()?;
            return Ok(node("unary_operator", vec![op, operand]));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<AstNode> {
        let mut e = self.atom()?;
        while *self.peek() == Tok::Punct("(".into()) {
            let mut args = vec![self.leaf_from("punctuation")];
            if *self.peek() != Tok::Punct(")".into()) {
                args.push(self.expr()?);
                while *self.peek() == Tok::Punct(",".into()) {
                    args.push(self.leaf_from("punctuation"));
                    args.push(self.expr()?);
                }
            }
            args.push(self.expect_punct(")").map_err(|_| self.error(&["`)`", "`,`"]))?);
            e = node("call", vec![e, node("argument_list", args)]);
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<AstNode> {
        match self.peek() {
            Tok::Name(_) => Ok(self.leaf_from("identifier")),
            Tok::Integer(_) => Ok(self.leaf_from("integer")),
            Tok::Float(_) => Ok(self.leaf_from("float")),
            Tok::Str(_) => Ok(self.leaf_from("string")),
            Tok::Punct(p) if p == "(" => {
                let open = self.leaf_from("punctuation");
                let inner = self.expr()?;
                let close = self.expect_punct(")")?;
                Ok(node("parenthesized_expression", vec![open, inner, close]))
            }
            _ => Err(self.error(&["identifier", "number", "string", "`(`", "`-`"])),
        }
    }
}

/// Parses mini-language source into a tree rooted at a `module` node.
pub fn parse(source: &str) -> Result<AstNode> {
    let toks = lex(source)?;
    let mut p = Parser { toks, pos: 0 };
    p.module()
}
