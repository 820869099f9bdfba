//! Untransformed syntax tree produced by the parser, and a printer back to C.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    FunctionDecl,
    ParmDecl,
    VarDecl,
    DeclStmt,
    Compound,
    If,
    While,
    For,
    Return,
    Break,
    Continue,
    NullStmt,
    Call,
    BinaryOperator,
    UnaryOperator,
    Conditional,
    Cast,
    MemberExpr,
    ArraySubscript,
    InitList,
    SizeofType,
    DeclRef,
    Literal,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::FunctionDecl => "FunctionDecl",
            NodeKind::ParmDecl => "ParmDecl",
            NodeKind::VarDecl => "VarDecl",
            NodeKind::DeclStmt => "DeclStmt",
            NodeKind::Compound => "Compound",
            NodeKind::If => "If",
            NodeKind::While => "While",
            NodeKind::For => "For",
            NodeKind::Return => "Return",
            NodeKind::Break => "Break",
            NodeKind::Continue => "Continue",
            NodeKind::NullStmt => "NullStmt",
            NodeKind::Call => "Call",
            NodeKind::BinaryOperator => "BinaryOperator",
            NodeKind::UnaryOperator => "UnaryOperator",
            NodeKind::Conditional => "Conditional",
            NodeKind::Cast => "Cast",
            NodeKind::MemberExpr => "MemberExpr",
            NodeKind::ArraySubscript => "ArraySubscript",
            NodeKind::InitList => "InitList",
            NodeKind::SizeofType => "SizeofType",
            NodeKind::DeclRef => "DeclRef",
            NodeKind::Literal => "Literal",
        }
    }

    pub fn is_statement(self) -> bool {
        matches!(
            self,
            NodeKind::DeclStmt
                | NodeKind::Compound
                | NodeKind::If
                | NodeKind::While
                | NodeKind::For
                | NodeKind::Return
                | NodeKind::Break
                | NodeKind::Continue
                | NodeKind::NullStmt
        )
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One syntax node.
///
/// Labels follow three rules: declarations carry the declared name, leaves
/// carry their source text, and other nodes carry their kind name, suffixed
/// with the operator (`BinaryOperator:<`) or member (`MemberExpr:->next`)
/// where there is one. `detail` keeps the declarator pattern of declarations
/// (`const char *@[4]`, with `@` standing for the name) and the target type
/// of casts, so that the tree can be printed back as C.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawNode {
    pub id: usize,
    pub label: String,
    pub kind: NodeKind,
    pub children: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Syntax tree with arbitrary arity; node ids equal their index in `nodes`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAst {
    pub nodes: Vec<RawNode>,
    pub root: usize,
}

/// Operator spelling for operator nodes (`BinaryOperator:<=` gives `<=`).
pub fn operator_of(label: &str) -> &str {
    label.split_once(':').map_or("", |(_, op)| op)
}

impl RawAst {
    pub fn node(&self, id: usize) -> &RawNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn kinds(&self) -> impl Iterator<Item = NodeKind> + '_ {
        self.nodes.iter().map(|n| n.kind)
    }

    /// Whether some node of kind `ancestor` has a descendant of kind `descendant`.
    pub fn has_nested(&self, ancestor: NodeKind, descendant: NodeKind) -> bool {
        self.nodes.iter().filter(|n| n.kind == ancestor).any(|n| {
            self.descendants(n.id)
                .any(|d| self.nodes[d].kind == descendant)
        })
    }

    fn descendants(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        let mut stack: Vec<usize> = self.nodes[id].children.clone();
        std::iter::from_fn(move || {
            let next = stack.pop()?;
            stack.extend(self.nodes[next].children.iter().copied());
            Some(next)
        })
    }

    /// Checks the tree invariants: one root, every child id valid, and every
    /// non-root node listed in exactly one parent.
    pub fn validate(&self) -> Result<(), String> {
        if self.root >= self.nodes.len() {
            return Err(format!("root {} out of range", self.root));
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(format!("node at index {i} has id {}", n.id));
            }
            for &c in &n.children {
                if c >= self.nodes.len() {
                    return Err(format!("node {i} references missing child {c}"));
                }
                parents[c] += 1;
            }
        }
        for (i, &p) in parents.iter().enumerate() {
            let expected = usize::from(i != self.root);
            if p != expected {
                return Err(format!("node {i} has {p} parents, expected {expected}"));
            }
        }
        // Single parents plus a parentless root rule out cycles only if
        // everything is reachable from the root.
        let reachable = 1 + self.descendants(self.root).count();
        if reachable != self.nodes.len() {
            return Err("tree is not connected".into());
        }
        Ok(())
    }

    /// Same shape, kinds, labels and details, ignoring node numbering.
    pub fn isomorphic(&self, other: &RawAst) -> bool {
        fn same(a: &RawAst, x: usize, b: &RawAst, y: usize) -> bool {
            let (n, m) = (&a.nodes[x], &b.nodes[y]);
            n.kind == m.kind
                && n.label == m.label
                && n.detail == m.detail
                && n.children.len() == m.children.len()
                && n.children
                    .iter()
                    .zip(&m.children)
                    .all(|(&c, &d)| same(a, c, b, d))
        }
        same(self, self.root, other, other.root)
    }

    /// Prints the whole tree as C source.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        Printer {
            ast: self,
            out: &mut out,
        }
        .node(self.root, 0);
        out
    }

    /// One-line C text of a statement (with its `;`) or expression.
    pub fn text_of(&self, id: usize) -> String {
        let n = &self.nodes[id];
        let mut out = String::new();
        let mut p = Printer {
            ast: self,
            out: &mut out,
        };
        match n.kind {
            NodeKind::DeclStmt | NodeKind::Return | NodeKind::Break | NodeKind::Continue => {
                p.stmt(id, 0)
            }
            k if k.is_statement() => p.out.push_str(k.name()),
            _ => p.expr(id, true),
        }
        out
    }

    /// In-order leaf labels; binarization must preserve this sequence.
    pub fn leaf_labels(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            if n.children.is_empty() {
                out.push(n.label.as_str());
            }
            stack.extend(n.children.iter().rev());
        }
        out
    }
}

struct Printer<'a> {
    ast: &'a RawAst,
    out: &'a mut String,
}

impl Printer<'_> {
    fn n(&self, id: usize) -> &RawNode {
        &self.ast.nodes[id]
    }

    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.out.push_str("    ");
        }
    }

    fn node(&mut self, id: usize, depth: usize) {
        if self.n(id).kind == NodeKind::FunctionDecl {
            self.function(id, depth);
        } else {
            self.stmt(id, depth);
        }
    }

    fn declarator(&mut self, id: usize) {
        let n = self.n(id);
        let pattern = n.detail.clone().unwrap_or_else(|| "int @".into());
        let label = n.label.clone();
        self.out.push_str(&pattern.replacen('@', &label, 1));
    }

    fn function(&mut self, id: usize, depth: usize) {
        let n = self.n(id).clone();
        self.indent(depth);
        self.declarator(id);
        self.out.push('(');
        let (params, body) = n.children.split_at(n.children.len().saturating_sub(1));
        for (i, &p) in params.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            self.declarator(p);
        }
        self.out.push_str(") ");
        if let Some(&b) = body.first() {
            self.block(b, depth);
        }
        self.out.push('\n');
    }

    fn block(&mut self, id: usize, depth: usize) {
        let children = self.n(id).children.clone();
        self.out.push_str("{\n");
        for c in children {
            self.stmt(c, depth + 1);
            self.out.push('\n');
        }
        self.indent(depth);
        self.out.push('}');
    }

    /// Body of if/while/for: blocks stay inline, anything else goes on its own line.
    fn sub_stmt(&mut self, id: usize, depth: usize) {
        if self.n(id).kind == NodeKind::Compound {
            self.block(id, depth);
        } else {
            self.out.push('\n');
            self.stmt(id, depth + 1);
        }
    }

    fn decl_stmt(&mut self, id: usize) {
        let decls = self.n(id).children.clone();
        for (i, &d) in decls.iter().enumerate() {
            let n = self.n(d).clone();
            let pattern = n.detail.clone().unwrap_or_else(|| "int @".into());
            if i == 0 {
                self.out.push_str(&pattern.replacen('@', &n.label, 1));
            } else {
                let cut = pattern.find(['*', '@']).unwrap_or(0);
                self.out.push_str(", ");
                self.out
                    .push_str(&pattern[cut..].replacen('@', &n.label, 1));
            }
            if let Some(&init) = n.children.first() {
                self.out.push_str(" = ");
                self.expr(init, true);
            }
        }
        self.out.push(';');
    }

    fn stmt(&mut self, id: usize, depth: usize) {
        let n = self.n(id).clone();
        self.indent(depth);
        match n.kind {
            NodeKind::Compound => self.block(id, depth),
            NodeKind::DeclStmt => self.decl_stmt(id),
            NodeKind::If => {
                self.out.push_str("if (");
                self.expr(n.children[0], true);
                self.out.push_str(") ");
                self.sub_stmt(n.children[1], depth);
                if let Some(&e) = n.children.get(2) {
                    self.out.push('\n');
                    self.indent(depth);
                    self.out.push_str("else ");
                    self.sub_stmt(e, depth);
                }
            }
            NodeKind::While => {
                self.out.push_str("while (");
                self.expr(n.children[0], true);
                self.out.push_str(") ");
                self.sub_stmt(n.children[1], depth);
            }
            NodeKind::For => {
                self.out.push_str("for (");
                let init = n.children[0];
                match self.n(init).kind {
                    NodeKind::NullStmt => self.out.push(';'),
                    NodeKind::DeclStmt => self.decl_stmt(init),
                    _ => {
                        self.expr(init, true);
                        self.out.push(';');
                    }
                }
                let (cond, step) = (n.children[1], n.children[2]);
                if self.n(cond).kind != NodeKind::NullStmt {
                    self.out.push(' ');
                    self.expr(cond, true);
                }
                self.out.push(';');
                if self.n(step).kind != NodeKind::NullStmt {
                    self.out.push(' ');
                    self.expr(step, true);
                }
                self.out.push_str(") ");
                self.sub_stmt(n.children[3], depth);
            }
            NodeKind::Return => {
                self.out.push_str("return");
                if let Some(&e) = n.children.first() {
                    self.out.push(' ');
                    self.expr(e, true);
                }
                self.out.push(';');
            }
            NodeKind::Break => self.out.push_str("break;"),
            NodeKind::Continue => self.out.push_str("continue;"),
            NodeKind::NullStmt => self.out.push(';'),
            _ => {
                self.expr(id, true);
                self.out.push(';');
            }
        }
    }

    /// Expressions are printed fully parenthesized, except at the top level.
    fn expr(&mut self, id: usize, top: bool) {
        let n = self.n(id).clone();
        let (open, close) = if top { ("", "") } else { ("(", ")") };
        match n.kind {
            NodeKind::DeclRef | NodeKind::Literal => self.out.push_str(&n.label),
            NodeKind::BinaryOperator => {
                self.out.push_str(open);
                self.expr(n.children[0], false);
                let op = operator_of(&n.label);
                if op == "," {
                    self.out.push_str(", ");
                } else {
                    self.out.push(' ');
                    self.out.push_str(op);
                    self.out.push(' ');
                }
                self.expr(n.children[1], false);
                self.out.push_str(close);
            }
            NodeKind::UnaryOperator => {
                let op = operator_of(&n.label);
                self.out.push_str(open);
                if let Some(post) = op.strip_prefix("post") {
                    self.expr(n.children[0], false);
                    self.out.push_str(post);
                } else {
                    self.out.push_str(op);
                    if op == "sizeof" {
                        self.out.push(' ');
                    }
                    self.expr(n.children[0], false);
                }
                self.out.push_str(close);
            }
            NodeKind::Conditional => {
                self.out.push_str(open);
                self.expr(n.children[0], false);
                self.out.push_str(" ? ");
                self.expr(n.children[1], false);
                self.out.push_str(" : ");
                self.expr(n.children[2], false);
                self.out.push_str(close);
            }
            NodeKind::Cast => {
                self.out.push_str(open);
                self.out.push('(');
                self.out.push_str(n.detail.as_deref().unwrap_or("int"));
                self.out.push_str(") ");
                self.expr(n.children[0], false);
                self.out.push_str(close);
            }
            NodeKind::Call => {
                self.expr(n.children[0], false);
                self.out.push('(');
                for (i, &a) in n.children[1..].iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.expr(a, true);
                }
                self.out.push(')');
            }
            NodeKind::ArraySubscript => {
                self.expr(n.children[0], false);
                self.out.push('[');
                self.expr(n.children[1], true);
                self.out.push(']');
            }
            NodeKind::MemberExpr => {
                self.expr(n.children[0], false);
                self.out.push_str(operator_of(&n.label));
            }
            NodeKind::InitList => {
                self.out.push('{');
                for (i, &a) in n.children.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.expr(a, true);
                }
                self.out.push('}');
            }
            NodeKind::SizeofType => {
                self.out.push_str("sizeof(");
                self.out.push_str(n.detail.as_deref().unwrap_or("int"));
                self.out.push(')');
            }
            _ => self.out.push_str(n.kind.name()),
        }
    }
}
