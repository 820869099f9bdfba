//! Statement-level control-flow graphs.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::ModalityError;
use crate::frontend::ast::operator_of;
use crate::frontend::{NodeKind, RawAst};

/// Largest simplified graph kept for training.
pub const MAX_CFG_VERTICES: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatementKind {
    Entry,
    Exit,
    Decl,
    Assign,
    Call,
    Return,
    BranchCond,
    LoopCond,
}

impl StatementKind {
    pub const ALL: [StatementKind; 8] = [
        StatementKind::Entry,
        StatementKind::Exit,
        StatementKind::Decl,
        StatementKind::Assign,
        StatementKind::Call,
        StatementKind::Return,
        StatementKind::BranchCond,
        StatementKind::LoopCond,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            StatementKind::Entry => "entry",
            StatementKind::Exit => "exit",
            StatementKind::Decl => "decl",
            StatementKind::Assign => "assign",
            StatementKind::Call => "call",
            StatementKind::Return => "return",
            StatementKind::BranchCond => "branch-cond",
            StatementKind::LoopCond => "loop-cond",
        }
    }
}

/// Edge labels. Graphs store forward edges only; the graph encoder derives a
/// reverse edge of the mirrored type for each one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeType {
    Seq,
    BranchTrue,
    BranchFalse,
    LoopBack,
    SeqRev,
    BranchTrueRev,
    BranchFalseRev,
    LoopBackRev,
}

impl EdgeType {
    pub const ALL: [EdgeType; 8] = [
        EdgeType::Seq,
        EdgeType::BranchTrue,
        EdgeType::BranchFalse,
        EdgeType::LoopBack,
        EdgeType::SeqRev,
        EdgeType::BranchTrueRev,
        EdgeType::BranchFalseRev,
        EdgeType::LoopBackRev,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_reverse(self) -> bool {
        self.index() >= 4
    }

    pub fn reverse(self) -> EdgeType {
        EdgeType::ALL[(self.index() + 4) % 8]
    }

    pub fn name(self) -> &'static str {
        match self {
            EdgeType::Seq => "seq",
            EdgeType::BranchTrue => "branch-true",
            EdgeType::BranchFalse => "branch-false",
            EdgeType::LoopBack => "loop-back",
            EdgeType::SeqRev => "seq-rev",
            EdgeType::BranchTrueRev => "branch-true-rev",
            EdgeType::BranchFalseRev => "branch-false-rev",
            EdgeType::LoopBackRev => "loop-back-rev",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfgVertex {
    pub id: usize,
    pub kind: StatementKind,
    pub text: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CfgEdge {
    pub source: usize,
    pub target: usize,
    #[serde(rename = "type")]
    pub edge_type: EdgeType,
}

/// Control-flow graph; vertex ids equal their index in `vertices`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cfg {
    pub vertices: Vec<CfgVertex>,
    pub edges: Vec<CfgEdge>,
    pub entry: usize,
    pub exit: usize,
}

impl Cfg {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.source == v).count()
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.target == v).count()
    }

    pub fn has_edge(&self, source: usize, target: usize, edge_type: EdgeType) -> bool {
        self.edges
            .iter()
            .any(|e| e.source == source && e.target == target && e.edge_type == edge_type)
    }

    /// Vertex with exactly this statement text, if any.
    pub fn find(&self, text: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.text == text)
    }

    /// Vertices reachable from `entry` along forward edges.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.vertices.len()];
        let mut queue = VecDeque::from([self.entry]);
        seen[self.entry] = true;
        while let Some(v) = queue.pop_front() {
            for e in self.edges.iter().filter(|e| e.source == v) {
                if !std::mem::replace(&mut seen[e.target], true) {
                    queue.push_back(e.target);
                }
            }
        }
        seen
    }

    /// Whether the graph has a directed cycle.
    pub fn has_cycle(&self) -> bool {
        let n = self.vertices.len();
        let mut indegree = vec![0usize; n];
        for e in &self.edges {
            indegree[e.target] += 1;
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut removed = 0;
        while let Some(v) = queue.pop_front() {
            removed += 1;
            for e in self.edges.iter().filter(|e| e.source == v) {
                indegree[e.target] -= 1;
                if indegree[e.target] == 0 {
                    queue.push_back(e.target);
                }
            }
        }
        removed < n
    }

    /// Checks the invariants of a simplified graph.
    pub fn validate(&self) -> Result<(), String> {
        if self.vertices.len() > MAX_CFG_VERTICES {
            return Err(format!("{} vertices exceed the cap", self.vertices.len()));
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if v.id != i {
                return Err(format!("vertex at {i} has id {}", v.id));
            }
            let special = i == self.entry || i == self.exit;
            if !special && v.text.trim().is_empty() {
                return Err(format!("vertex {i} has no statement"));
            }
        }
        let mut texts = HashSet::new();
        for v in &self.vertices {
            if v.id != self.entry && v.id != self.exit && !texts.insert(v.text.as_str()) {
                return Err(format!("duplicate statement `{}`", v.text));
            }
        }
        for e in &self.edges {
            if e.source >= self.len() || e.target >= self.len() {
                return Err(format!("edge {e:?} has a missing endpoint"));
            }
            if e.edge_type.is_reverse() {
                return Err(format!("stored reverse edge {e:?}"));
            }
        }
        if self.in_degree(self.entry) != 0 {
            return Err("entry has incoming edges".into());
        }
        Ok(())
    }
}

type Exit = (usize, EdgeType);

struct LoopContext {
    continue_target: usize,
    breaks: Vec<Exit>,
}

struct Builder<'a> {
    ast: &'a RawAst,
    vertices: Vec<CfgVertex>,
    edges: Vec<CfgEdge>,
    edge_set: HashSet<CfgEdge>,
    exit: usize,
}

impl Builder<'_> {
    fn vertex(&mut self, kind: StatementKind, text: String) -> usize {
        let id = self.vertices.len();
        self.vertices.push(CfgVertex { id, kind, text });
        id
    }

    fn edge(&mut self, source: usize, target: usize, edge_type: EdgeType) {
        let e = CfgEdge {
            source,
            target,
            edge_type,
        };
        if self.edge_set.insert(e) {
            self.edges.push(e);
        }
    }

    fn connect(&mut self, pending: &[Exit], target: usize) {
        for &(s, t) in pending {
            self.edge(s, target, t);
        }
    }

    /// Back edges into a loop head: plain fall-through becomes `loop-back`,
    /// branch edges keep their type.
    fn connect_back(&mut self, pending: &[Exit], head: usize) {
        for &(s, t) in pending {
            let t = if t == EdgeType::Seq {
                EdgeType::LoopBack
            } else {
                t
            };
            self.edge(s, head, t);
        }
    }

    fn classify(&self, expr: usize) -> StatementKind {
        let n = self.ast.node(expr);
        let op = operator_of(&n.label);
        match n.kind {
            NodeKind::BinaryOperator
                if op.ends_with('=') && !matches!(op, "==" | "!=" | "<=" | ">=") =>
            {
                StatementKind::Assign
            }
            NodeKind::UnaryOperator if op.contains("++") || op.contains("--") => {
                StatementKind::Assign
            }
            NodeKind::Call => StatementKind::Call,
            _ if self.contains_call(expr) => StatementKind::Call,
            _ => StatementKind::Assign,
        }
    }

    fn contains_call(&self, id: usize) -> bool {
        let n = self.ast.node(id);
        n.kind == NodeKind::Call || n.children.iter().any(|&c| self.contains_call(c))
    }

    fn simple(&mut self, id: usize, pending: Vec<Exit>) -> Vec<Exit> {
        let n = self.ast.node(id);
        let (kind, text) = if n.kind == NodeKind::DeclStmt {
            (StatementKind::Decl, self.ast.text_of(id))
        } else {
            (self.classify(id), format!("{};", self.ast.text_of(id)))
        };
        let v = self.vertex(kind, text);
        self.connect(&pending, v);
        vec![(v, EdgeType::Seq)]
    }

    fn stmt(
        &mut self,
        id: usize,
        pending: Vec<Exit>,
        ctx: &mut Option<&mut LoopContext>,
    ) -> Result<Vec<Exit>, ModalityError> {
        let node = self.ast.node(id);
        let unsupported = |what: &str| ModalityError::UnsupportedConstruct(what.to_string());
        Ok(match node.kind {
            NodeKind::Compound => {
                let mut pending = pending;
                for &c in &node.children {
                    pending = self.stmt(c, pending, ctx)?;
                }
                pending
            }
            NodeKind::NullStmt => pending,
            NodeKind::Return => {
                let v = self.vertex(StatementKind::Return, self.ast.text_of(id));
                self.connect(&pending, v);
                self.edge(v, self.exit, EdgeType::Seq);
                Vec::new()
            }
            NodeKind::If => {
                let c = self.vertex(
                    StatementKind::BranchCond,
                    self.ast.text_of(node.children[0]),
                );
                self.connect(&pending, c);
                let mut out = self.stmt(node.children[1], vec![(c, EdgeType::BranchTrue)], ctx)?;
                match node.children.get(2) {
                    Some(&e) => out.extend(self.stmt(e, vec![(c, EdgeType::BranchFalse)], ctx)?),
                    None => out.push((c, EdgeType::BranchFalse)),
                }
                out
            }
            NodeKind::While => {
                let c = self.vertex(StatementKind::LoopCond, self.ast.text_of(node.children[0]));
                self.connect(&pending, c);
                let mut inner = LoopContext {
                    continue_target: c,
                    breaks: Vec::new(),
                };
                let body = self.stmt(
                    node.children[1],
                    vec![(c, EdgeType::BranchTrue)],
                    &mut Some(&mut inner),
                )?;
                self.connect_back(&body, c);
                let mut out = vec![(c, EdgeType::BranchFalse)];
                out.extend(inner.breaks);
                out
            }
            NodeKind::For => {
                let [init, cond, step, body] = node.children[..] else {
                    return Err(unsupported("malformed for"));
                };
                let pending = if self.ast.node(init).kind == NodeKind::NullStmt {
                    pending
                } else {
                    self.simple(init, pending)
                };
                let cond_text = if self.ast.node(cond).kind == NodeKind::NullStmt {
                    "1".to_string()
                } else {
                    self.ast.text_of(cond)
                };
                let c = self.vertex(StatementKind::LoopCond, cond_text);
                self.connect(&pending, c);
                let step_vertex = (self.ast.node(step).kind != NodeKind::NullStmt).then(|| {
                    let kind = self.classify(step);
                    self.vertex(kind, format!("{};", self.ast.text_of(step)))
                });
                let mut inner = LoopContext {
                    continue_target: step_vertex.unwrap_or(c),
                    breaks: Vec::new(),
                };
                let body_exits =
                    self.stmt(body, vec![(c, EdgeType::BranchTrue)], &mut Some(&mut inner))?;
                match step_vertex {
                    Some(s) => {
                        self.connect(&body_exits, s);
                        self.edge(s, c, EdgeType::LoopBack);
                    }
                    None => self.connect_back(&body_exits, c),
                }
                let mut out = vec![(c, EdgeType::BranchFalse)];
                out.extend(inner.breaks);
                out
            }
            NodeKind::Break => {
                let lc = ctx
                    .as_mut()
                    .ok_or_else(|| unsupported("break outside a loop"))?;
                lc.breaks.extend(pending);
                Vec::new()
            }
            NodeKind::Continue => {
                let target = ctx
                    .as_ref()
                    .ok_or_else(|| unsupported("continue outside a loop"))?
                    .continue_target;
                self.connect_back(&pending, target);
                Vec::new()
            }
            NodeKind::DeclStmt => self.simple(id, pending),
            NodeKind::FunctionDecl | NodeKind::ParmDecl | NodeKind::VarDecl => {
                return Err(unsupported(node.kind.name()))
            }
            _ => self.simple(id, pending),
        })
    }
}

/// Builds the statement-level CFG of a parsed function.
///
/// Every statement or condition becomes one vertex; `entry` and `exit` have
/// empty text. Statements that cannot be reached from `entry` (for example,
/// code after a `return`) are dropped.
pub fn build_cfg(ast: &RawAst) -> Result<Cfg, ModalityError> {
    let root = ast.node(ast.root);
    if root.kind != NodeKind::FunctionDecl {
        return Err(ModalityError::UnsupportedConstruct(format!(
            "expected a function definition, found {}",
            root.kind
        )));
    }
    let body = *root
        .children
        .last()
        .filter(|&&b| ast.node(b).kind == NodeKind::Compound)
        .ok_or_else(|| ModalityError::UnsupportedConstruct("function without a body".into()))?;

    let mut b = Builder {
        ast,
        vertices: Vec::new(),
        edges: Vec::new(),
        edge_set: HashSet::new(),
        exit: 1,
    };
    let entry = b.vertex(StatementKind::Entry, String::new());
    let exit = b.vertex(StatementKind::Exit, String::new());
    let tail = b.stmt(body, vec![(entry, EdgeType::Seq)], &mut None)?;
    b.connect(&tail, exit);

    let cfg = Cfg {
        vertices: b.vertices,
        edges: b.edges,
        entry,
        exit,
    };
    let mut keep = cfg.reachable();
    keep[exit] = true;
    Ok(retain(cfg, &keep))
}

/// Keeps the flagged vertices, renumbering them in order, and the edges between them.
fn retain(cfg: Cfg, keep: &[bool]) -> Cfg {
    let mut map = vec![usize::MAX; cfg.vertices.len()];
    let mut vertices = Vec::new();
    for v in cfg.vertices {
        if keep[v.id] {
            map[v.id] = vertices.len();
            vertices.push(CfgVertex {
                id: vertices.len(),
                ..v
            });
        }
    }
    let edges = cfg
        .edges
        .into_iter()
        .filter(|e| keep[e.source] && keep[e.target])
        .map(|e| CfgEdge {
            source: map[e.source],
            target: map[e.target],
            edge_type: e.edge_type,
        })
        .collect();
    Cfg {
        vertices,
        edges,
        entry: map[cfg.entry],
        exit: map[cfg.exit],
    }
}

/// Removes statement-less vertices and collapses duplicated statements.
///
/// A vertex without text (other than entry/exit) is deleted and each of its
/// predecessors is linked to each of its successors, the new edge keeping the
/// predecessor's edge type. For vertices sharing the same text, the first one
/// is kept and the edges of the later ones are re-attached to it. Fails with
/// [`ModalityError::TooLarge`] when more than [`MAX_CFG_VERTICES`] remain.
#[allow(clippy::needless_range_loop)]
pub fn simplify_cfg(cfg: &Cfg) -> Result<Cfg, ModalityError> {
    let n = cfg.vertices.len();
    let special = |v: usize| v == cfg.entry || v == cfg.exit;
    let mut edges: Vec<CfgEdge> = cfg.edges.clone();
    let mut keep = vec![true; n];

    for v in 0..n {
        if special(v) || !cfg.vertices[v].text.trim().is_empty() {
            continue;
        }
        let incoming: Vec<CfgEdge> = edges
            .iter()
            .filter(|e| e.target == v && e.source != v)
            .copied()
            .collect();
        let successors: Vec<usize> = edges
            .iter()
            .filter(|e| e.source == v && e.target != v)
            .map(|e| e.target)
            .collect();
        edges.retain(|e| e.source != v && e.target != v);
        for inc in &incoming {
            for &s in &successors {
                edges.push(CfgEdge {
                    source: inc.source,
                    target: s,
                    edge_type: inc.edge_type,
                });
            }
        }
        keep[v] = false;
    }

    let mut first: HashMap<&str, usize> = HashMap::new();
    let mut redirect: Vec<usize> = (0..n).collect();
    for v in 0..n {
        if !keep[v] || special(v) {
            continue;
        }
        match first.get(cfg.vertices[v].text.as_str()) {
            Some(&k) => {
                redirect[v] = k;
                keep[v] = false;
            }
            None => {
                first.insert(cfg.vertices[v].text.as_str(), v);
            }
        }
    }
    let mut seen = HashSet::new();
    let merged: Vec<CfgEdge> = edges
        .into_iter()
        .filter_map(|e| {
            let moved = CfgEdge {
                source: redirect[e.source],
                target: redirect[e.target],
                edge_type: e.edge_type,
            };
            let new_self_loop = moved.source == moved.target && e.source != e.target;
            (!new_self_loop).then_some(moved)
        })
        .filter(|e| seen.insert(*e))
        .collect();

    let out = retain(
        Cfg {
            vertices: cfg.vertices.clone(),
            edges: merged,
            entry: cfg.entry,
            exit: cfg.exit,
        },
        &keep,
    );
    if out.len() > MAX_CFG_VERTICES {
        return Err(ModalityError::TooLarge {
            vertices: out.len(),
        });
    }
    Ok(out)
}
