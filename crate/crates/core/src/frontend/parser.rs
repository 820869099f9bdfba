//! Recursive-descent parser for single C function definitions.
//!
//! Supported: declarations (with pointers, arrays and initializer lists),
//! expression statements, `if`/`else`, `while`, `for`, `return`, `break`,
//! `continue`, calls, casts, `sizeof`, member access and the usual unary,
//! binary, conditional and assignment operators. Preprocessor directives,
//! function pointers, `switch`, `goto` and `do` are rejected.

use super::ast::{NodeKind, RawAst, RawNode};
use super::clex::{tokenize, Token, TokenKind};
use super::ParseError;

const TYPE_WORDS: &[&str] = &[
    "void",
    "char",
    "short",
    "int",
    "long",
    "float",
    "double",
    "signed",
    "unsigned",
    "const",
    "volatile",
    "static",
    "extern",
    "inline",
    "register",
    "struct",
    "union",
    "enum",
    "_Bool",
    "bool",
    "size_t",
    "ssize_t",
    "ptrdiff_t",
    "FILE",
    "int8_t",
    "int16_t",
    "int32_t",
    "int64_t",
    "uint8_t",
    "uint16_t",
    "uint32_t",
    "uint64_t",
    "uintptr_t",
    "intptr_t",
];

const REJECTED: &[&str] = &["switch", "case", "default", "goto", "do", "typedef", "asm"];

const ASSIGN_OPS: &[&str] = &[
    "=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=",
];

fn binary_precedence(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 1,
        "&&" => 2,
        "|" => 3,
        "^" => 4,
        "&" => 5,
        "==" | "!=" => 6,
        "<" | ">" | "<=" | ">=" => 7,
        "<<" | ">>" => 8,
        "+" | "-" => 9,
        "*" | "/" | "%" => 10,
        _ => return None,
    })
}

/// Parses one function definition into a [`RawAst`].
pub fn parse(source: &str) -> Result<RawAst, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        nodes: Vec::new(),
    };
    let root = p.function()?;
    if !p.at_eof() {
        return Err(p.error("expected end of input after the function body"));
    }
    Ok(RawAst {
        nodes: p.nodes,
        root,
    })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    nodes: Vec<RawNode>,
}

impl Parser {
    fn peek_kind(&self, ahead: usize) -> &TokenKind {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek_kind(0), TokenKind::Eof)
    }

    fn is_punct(&self, ahead: usize, p: &str) -> bool {
        matches!(self.peek_kind(ahead), TokenKind::Punct(q) if *q == p)
    }

    fn is_word(&self, ahead: usize, w: &str) -> bool {
        matches!(self.peek_kind(ahead), TokenKind::Ident(s) if s == w)
    }

    fn ident_at(&self, ahead: usize) -> Option<&str> {
        match self.peek_kind(ahead) {
            TokenKind::Ident(s) => Some(s.as_str()),
            _ => None,
        }
    }

    fn advance(&mut self) -> TokenKind {
        let k = self.tokens[self.pos].kind.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        k
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let t = &self.tokens[self.pos];
        ParseError {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), ParseError> {
        if self.is_punct(0, p) {
            self.advance();
            Ok(())
        } else {
            Err(self.error(format!(
                "expected `{p}`, found {}",
                describe(self.peek_kind(0))
            )))
        }
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is_punct(0, p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn identifier(&mut self) -> Result<String, ParseError> {
        match self.peek_kind(0).clone() {
            TokenKind::Ident(s) if !is_type_word(&s) && !is_keyword(&s) => {
                self.advance();
                Ok(s)
            }
            other => Err(self.error(format!("expected identifier, found {}", describe(&other)))),
        }
    }

    fn add(&mut self, kind: NodeKind, label: impl Into<String>, children: Vec<usize>) -> usize {
        self.add_with_detail(kind, label, children, None)
    }

    fn add_with_detail(
        &mut self,
        kind: NodeKind,
        label: impl Into<String>,
        children: Vec<usize>,
        detail: Option<String>,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(RawNode {
            id,
            label: label.into(),
            kind,
            children,
            detail,
        });
        id
    }

    /// Does a type start at `ahead`? Known type words always do; an unknown
    /// identifier does when followed by another identifier, or by `*` and an
    /// identifier that is then followed by `=`, `;`, `,` , `[` or `)`.
    fn type_starts_at(&self, ahead: usize) -> bool {
        let Some(word) = self.ident_at(ahead) else {
            return false;
        };
        if is_type_word(word) {
            return true;
        }
        if is_keyword(word) {
            return false;
        }
        if let Some(next) = self.ident_at(ahead + 1) {
            return !is_keyword(next);
        }
        if self.is_punct(ahead + 1, "*") {
            let mut i = ahead + 1;
            while self.is_punct(i, "*") {
                i += 1;
            }
            return self.ident_at(i).is_some()
                && [";", "=", ",", "[", ")"]
                    .iter()
                    .any(|p| self.is_punct(i + 1, p));
        }
        false
    }

    /// Declaration specifiers, e.g. `static const unsigned int` or `struct node`.
    fn base_type(&mut self) -> Result<String, ParseError> {
        let mut words: Vec<String> = Vec::new();
        let mut has_base = false;
        while let Some(word) = self.ident_at(0).map(str::to_string) {
            if matches!(word.as_str(), "struct" | "union" | "enum") {
                self.advance();
                let tag = self.identifier()?;
                words.push(format!("{word} {tag}"));
                has_base = true;
            } else if is_type_word(&word) {
                self.advance();
                if !matches!(
                    word.as_str(),
                    "const" | "volatile" | "static" | "extern" | "inline" | "register"
                ) {
                    has_base = true;
                }
                words.push(word);
            } else if !has_base && !is_keyword(&word) {
                // user typedef name
                self.advance();
                words.push(word);
                has_base = true;
            } else {
                break;
            }
        }
        if words.is_empty() {
            return Err(self.error("expected a type"));
        }
        Ok(words.join(" "))
    }

    /// Pointer stars and qualifiers between the base type and the name.
    fn pointer_part(&mut self) -> String {
        let mut s = String::new();
        loop {
            if self.eat("*") {
                s.push('*');
            } else if self.is_word(0, "const") && s.ends_with('*') {
                self.advance();
                s.push_str(" const ");
            } else {
                break;
            }
        }
        s
    }

    /// Declarator pattern for `base`, with `@` in place of the name.
    fn declarator(&mut self, base: &str) -> Result<(String, String), ParseError> {
        let stars = self.pointer_part();
        if self.is_punct(0, "(") {
            return Err(self.error("function pointers are not supported"));
        }
        let name = self.identifier()?;
        let mut arrays = String::new();
        while self.eat("[") {
            arrays.push('[');
            if !self.is_punct(0, "]") {
                let size = self.conditional()?;
                arrays.push_str(
                    &RawAst {
                        nodes: self.nodes.clone(),
                        root: size,
                    }
                    .text_of(size),
                );
                self.discard_subtree(size);
            }
            self.expect("]")?;
            arrays.push(']');
        }
        let pattern = if stars.is_empty() {
            format!("{base} @{arrays}")
        } else {
            format!("{base} {stars}@{arrays}")
        };
        Ok((name, pattern))
    }

    /// Drops nodes created for an array bound; they are kept only as text.
    fn discard_subtree(&mut self, from: usize) {
        let min = self.min_id(from);
        self.nodes.truncate(min);
    }

    fn min_id(&self, id: usize) -> usize {
        self.nodes[id]
            .children
            .iter()
            .map(|&c| self.min_id(c))
            .min()
            .unwrap_or(id)
            .min(id)
    }

    fn function(&mut self) -> Result<usize, ParseError> {
        let base = self.base_type()?;
        let (name, pattern) = self.declarator(&base)?;
        self.expect("(")?;
        let mut children = Vec::new();
        if self.is_word(0, "void") && self.is_punct(1, ")") {
            self.advance();
        }
        if !self.is_punct(0, ")") {
            loop {
                if self.is_punct(0, "...") {
                    return Err(self.error("variadic functions are not supported"));
                }
                let pbase = self.base_type()?;
                let (pname, ppattern) = self.declarator(&pbase)?;
                children.push(self.add_with_detail(
                    NodeKind::ParmDecl,
                    pname,
                    Vec::new(),
                    Some(ppattern),
                ));
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        if !self.is_punct(0, "{") {
            return Err(self.error("expected a function body"));
        }
        children.push(self.compound()?);
        Ok(self.add_with_detail(NodeKind::FunctionDecl, name, children, Some(pattern)))
    }

    fn compound(&mut self) -> Result<usize, ParseError> {
        self.expect("{")?;
        let mut children = Vec::new();
        while !self.is_punct(0, "}") {
            if self.at_eof() {
                return Err(self.error("unbalanced braces: expected `}`"));
            }
            children.push(self.statement()?);
        }
        self.expect("}")?;
        Ok(self.add(NodeKind::Compound, "Compound", children))
    }

    fn statement(&mut self) -> Result<usize, ParseError> {
        if self.is_punct(0, "{") {
            return self.compound();
        }
        if self.eat(";") {
            return Ok(self.add(NodeKind::NullStmt, "NullStmt", Vec::new()));
        }
        if let Some(word) = self.ident_at(0) {
            if REJECTED.contains(&word) {
                return Err(self.error(format!("unsupported construct `{word}`")));
            }
            match word {
                "if" => return self.if_stmt(),
                "while" => return self.while_stmt(),
                "for" => return self.for_stmt(),
                "return" => {
                    self.advance();
                    let mut children = Vec::new();
                    if !self.is_punct(0, ";") {
                        children.push(self.expression()?);
                    }
                    self.expect(";")?;
                    return Ok(self.add(NodeKind::Return, "Return", children));
                }
                "break" | "continue" => {
                    let (kind, label) = if word == "break" {
                        (NodeKind::Break, "Break")
                    } else {
                        (NodeKind::Continue, "Continue")
                    };
                    self.advance();
                    self.expect(";")?;
                    return Ok(self.add(kind, label, Vec::new()));
                }
                _ => {}
            }
            if self.type_starts_at(0) {
                let decl = self.declaration()?;
                self.expect(";")?;
                return Ok(decl);
            }
        }
        let e = self.expression()?;
        self.expect(";")?;
        Ok(e)
    }

    /// `base declarator [= init] {, declarator [= init]}` without the trailing `;`.
    fn declaration(&mut self) -> Result<usize, ParseError> {
        let base = self.base_type()?;
        let mut decls = Vec::new();
        loop {
            let (name, pattern) = self.declarator(&base)?;
            let mut children = Vec::new();
            if self.eat("=") {
                children.push(self.initializer()?);
            }
            decls.push(self.add_with_detail(NodeKind::VarDecl, name, children, Some(pattern)));
            if !self.eat(",") {
                break;
            }
        }
        Ok(self.add(NodeKind::DeclStmt, "DeclStmt", decls))
    }

    fn initializer(&mut self) -> Result<usize, ParseError> {
        if self.eat("{") {
            let mut items = Vec::new();
            while !self.is_punct(0, "}") {
                items.push(self.initializer()?);
                if !self.eat(",") {
                    break;
                }
            }
            self.expect("}")?;
            return Ok(self.add(NodeKind::InitList, "InitList", items));
        }
        self.assignment()
    }

    fn condition(&mut self) -> Result<usize, ParseError> {
        self.expect("(")?;
        let c = self.expression()?;
        self.expect(")")?;
        Ok(c)
    }

    fn if_stmt(&mut self) -> Result<usize, ParseError> {
        self.advance();
        let cond = self.condition()?;
        let then = self.statement()?;
        let mut children = vec![cond, then];
        if self.is_word(0, "else") {
            self.advance();
            children.push(self.statement()?);
        }
        Ok(self.add(NodeKind::If, "If", children))
    }

    fn while_stmt(&mut self) -> Result<usize, ParseError> {
        self.advance();
        let cond = self.condition()?;
        let body = self.statement()?;
        Ok(self.add(NodeKind::While, "While", vec![cond, body]))
    }

    fn for_stmt(&mut self) -> Result<usize, ParseError> {
        self.advance();
        self.expect("(")?;
        let init = if self.is_punct(0, ";") {
            self.add(NodeKind::NullStmt, "NullStmt", Vec::new())
        } else if self.type_starts_at(0) {
            self.declaration()?
        } else {
            self.expression()?
        };
        self.expect(";")?;
        let cond = if self.is_punct(0, ";") {
            self.add(NodeKind::NullStmt, "NullStmt", Vec::new())
        } else {
            self.expression()?
        };
        self.expect(";")?;
        let step = if self.is_punct(0, ")") {
            self.add(NodeKind::NullStmt, "NullStmt", Vec::new())
        } else {
            self.expression()?
        };
        self.expect(")")?;
        let body = self.statement()?;
        Ok(self.add(NodeKind::For, "For", vec![init, cond, step, body]))
    }

    fn binary(&mut self, op: &str, l: usize, r: usize) -> usize {
        self.add(
            NodeKind::BinaryOperator,
            format!("BinaryOperator:{op}"),
            vec![l, r],
        )
    }

    /// Comma-separated expression.
    fn expression(&mut self) -> Result<usize, ParseError> {
        let mut lhs = self.assignment()?;
        while self.eat(",") {
            let rhs = self.assignment()?;
            lhs = self.binary(",", lhs, rhs);
        }
        Ok(lhs)
    }

    fn assignment(&mut self) -> Result<usize, ParseError> {
        let lhs = self.conditional()?;
        if let TokenKind::Punct(op) = self.peek_kind(0) {
            if ASSIGN_OPS.contains(op) {
                let op = *op;
                self.advance();
                let rhs = self.assignment()?;
                return Ok(self.binary(op, lhs, rhs));
            }
        }
        Ok(lhs)
    }

    fn conditional(&mut self) -> Result<usize, ParseError> {
        let cond = self.binary_expr(1)?;
        if self.eat("?") {
            let a = self.expression()?;
            self.expect(":")?;
            let b = self.conditional()?;
            return Ok(self.add(NodeKind::Conditional, "Conditional", vec![cond, a, b]));
        }
        Ok(cond)
    }

    fn binary_expr(&mut self, min_prec: u8) -> Result<usize, ParseError> {
        let mut lhs = self.unary()?;
        while let TokenKind::Punct(op) = self.peek_kind(0) {
            let op = *op;
            let Some(prec) = binary_precedence(op) else {
                break;
            };
            if prec < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary_expr(prec + 1)?;
            lhs = self.binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    /// Is there a parenthesized type name at the cursor (a cast or `sizeof(T)`)?
    fn paren_type_ahead(&self) -> bool {
        if !self.is_punct(0, "(") {
            return false;
        }
        match self.ident_at(1) {
            Some(w) if is_type_word(w) => true,
            Some(w) if !is_keyword(w) => {
                let mut i = 2;
                while self.is_punct(i, "*") {
                    i += 1;
                }
                i > 2 && self.is_punct(i, ")")
            }
            _ => false,
        }
    }

    fn type_name(&mut self) -> Result<String, ParseError> {
        self.expect("(")?;
        let base = self.base_type()?;
        let stars = self.pointer_part();
        self.expect(")")?;
        Ok(if stars.is_empty() {
            base
        } else {
            format!("{base} {}", stars.trim_end())
        })
    }

    fn unary(&mut self) -> Result<usize, ParseError> {
        if let TokenKind::Punct(op) = self.peek_kind(0) {
            let op = *op;
            if matches!(op, "++" | "--" | "+" | "-" | "!" | "~" | "*" | "&") {
                self.advance();
                let operand = self.unary()?;
                return Ok(self.add(
                    NodeKind::UnaryOperator,
                    format!("UnaryOperator:{op}"),
                    vec![operand],
                ));
            }
            if op == "(" && self.paren_type_ahead() {
                let ty = self.type_name()?;
                let operand = self.unary()?;
                return Ok(self.add_with_detail(NodeKind::Cast, "Cast", vec![operand], Some(ty)));
            }
        }
        if self.is_word(0, "sizeof") {
            self.advance();
            if self.paren_type_ahead() {
                let ty = self.type_name()?;
                return Ok(self.add_with_detail(
                    NodeKind::SizeofType,
                    format!("sizeof({ty})"),
                    Vec::new(),
                    Some(ty),
                ));
            }
            let operand = self.unary()?;
            return Ok(self.add(
                NodeKind::UnaryOperator,
                "UnaryOperator:sizeof",
                vec![operand],
            ));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<usize, ParseError> {
        let mut e = self.primary()?;
        loop {
            if self.eat("(") {
                let mut children = vec![e];
                if !self.is_punct(0, ")") {
                    loop {
                        children.push(self.assignment()?);
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.expect(")")?;
                e = self.add(NodeKind::Call, "Call", children);
            } else if self.eat("[") {
                let idx = self.expression()?;
                self.expect("]")?;
                e = self.add(NodeKind::ArraySubscript, "ArraySubscript", vec![e, idx]);
            } else if self.is_punct(0, ".") || self.is_punct(0, "->") {
                let TokenKind::Punct(access) = self.advance() else {
                    unreachable!()
                };
                let field = self.identifier()?;
                e = self.add(
                    NodeKind::MemberExpr,
                    format!("MemberExpr:{access}{field}"),
                    vec![e],
                );
            } else if self.is_punct(0, "++") || self.is_punct(0, "--") {
                let TokenKind::Punct(op) = self.advance() else {
                    unreachable!()
                };
                e = self.add(
                    NodeKind::UnaryOperator,
                    format!("UnaryOperator:post{op}"),
                    vec![e],
                );
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<usize, ParseError> {
        match self.peek_kind(0).clone() {
            TokenKind::Ident(name) => {
                if is_keyword(&name) || is_type_word(&name) {
                    return Err(self.error(format!("unexpected keyword `{name}`")));
                }
                self.advance();
                Ok(self.add(NodeKind::DeclRef, name, Vec::new()))
            }
            TokenKind::Number(text) | TokenKind::Char(text) => {
                self.advance();
                Ok(self.add(NodeKind::Literal, text, Vec::new()))
            }
            TokenKind::Str(first) => {
                self.advance();
                let mut text = first;
                while let TokenKind::Str(next) = self.peek_kind(0).clone() {
                    self.advance();
                    text.pop();
                    text.push_str(&next[1..]);
                }
                Ok(self.add(NodeKind::Literal, text, Vec::new()))
            }
            TokenKind::Punct("(") => {
                self.advance();
                let e = self.expression()?;
                self.expect(")")?;
                Ok(e)
            }
            other => Err(self.error(format!(
                "expected an expression, found {}",
                describe(&other)
            ))),
        }
    }
}

fn is_type_word(w: &str) -> bool {
    TYPE_WORDS.contains(&w)
}

fn is_keyword(w: &str) -> bool {
    matches!(
        w,
        "if" | "else"
            | "while"
            | "for"
            | "return"
            | "break"
            | "continue"
            | "sizeof"
            | "switch"
            | "case"
            | "default"
            | "goto"
            | "do"
            | "typedef"
            | "asm"
    )
}

fn describe(kind: &TokenKind) -> String {
    match kind {
        TokenKind::Ident(s) | TokenKind::Number(s) | TokenKind::Char(s) | TokenKind::Str(s) => {
            format!("`{s}`")
        }
        TokenKind::Punct(p) => format!("`{p}`"),
        TokenKind::Eof => "end of input".into(),
    }
}
