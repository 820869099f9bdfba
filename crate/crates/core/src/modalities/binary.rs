//! Binarized syntax trees.

use serde::{Deserialize, Serialize};

use crate::frontend::RawAst;

/// Separator used when a single-child chain is collapsed into one node.
pub const MERGE_SEPARATOR: &str = "+";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryNode {
    pub id: usize,
    pub label: String,
    #[serde(default)]
    pub left: Option<usize>,
    #[serde(default)]
    pub right: Option<usize>,
}

impl BinaryNode {
    pub fn children(&self) -> impl Iterator<Item = usize> {
        self.left.into_iter().chain(self.right)
    }

    pub fn arity(&self) -> usize {
        self.children().count()
    }
}

/// Tree with at most two children per node; ids equal indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryAst {
    pub nodes: Vec<BinaryNode>,
    pub root: usize,
}

impl BinaryAst {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node ids ordered so that children come before their parent.
    pub fn post_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                out.push(id);
                continue;
            }
            stack.push((id, true));
            let n = &self.nodes[id];
            if let Some(r) = n.right {
                stack.push((r, false));
            }
            if let Some(l) = n.left {
                stack.push((l, false));
            }
        }
        out
    }

    /// In-order (left to right) labels of the leaves.
    pub fn leaf_labels(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            if n.arity() == 0 {
                out.push(n.label.as_str());
            }
            if let Some(r) = n.right {
                stack.push(r);
            }
            if let Some(l) = n.left {
                stack.push(l);
            }
        }
        out
    }

    /// Single root, valid child ids, every node reached exactly once.
    pub fn validate(&self) -> Result<(), String> {
        if self.root >= self.nodes.len() {
            return Err("root out of range".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if id >= self.nodes.len() {
                return Err(format!("child id {id} out of range"));
            }
            if std::mem::replace(&mut seen[id], true) {
                return Err(format!("node {id} reached twice"));
            }
            if self.nodes[id].id != id {
                return Err(format!("node at {id} has id {}", self.nodes[id].id));
            }
            stack.extend(self.nodes[id].children());
        }
        if seen.iter().any(|s| !s) {
            return Err("unreachable nodes".into());
        }
        Ok(())
    }
}

/// Converts an arbitrary-arity tree into a binary one in two passes.
///
/// First, top-down, every node with more than two children keeps its leftmost
/// child and gets a fresh right child (carrying the same label) that adopts
/// the remaining children; this repeats until no node has more than two.
/// Second, every node with exactly one child is merged with that child, the
/// labels joined by `+`.
pub fn binarize(ast: &RawAst) -> BinaryAst {
    let mut labels: Vec<String> = ast.nodes.iter().map(|n| n.label.clone()).collect();
    let mut children: Vec<Vec<usize>> = ast.nodes.iter().map(|n| n.children.clone()).collect();

    let mut queue = std::collections::VecDeque::from([ast.root]);
    while let Some(id) = queue.pop_front() {
        if children[id].len() > 2 {
            let rest = children[id].split_off(1);
            let fresh = labels.len();
            labels.push(labels[id].clone());
            children.push(rest);
            children[id].push(fresh);
        }
        queue.extend(children[id].iter().copied());
    }

    let mut out = BinaryAst {
        nodes: Vec::with_capacity(labels.len()),
        root: 0,
    };
    emit(ast.root, &labels, &children, &mut out);
    out
}

/// Emits `id` (after collapsing single-child chains) in pre-order, iteratively.
fn emit(root: usize, labels: &[String], children: &[Vec<usize>], out: &mut BinaryAst) {
    // (source node, parent output id, is right child)
    let mut stack: Vec<(usize, Option<(usize, bool)>)> = vec![(root, None)];
    while let Some((mut id, parent)) = stack.pop() {
        let mut label = labels[id].clone();
        while children[id].len() == 1 {
            id = children[id][0];
            label.push_str(MERGE_SEPARATOR);
            label.push_str(&labels[id]);
        }
        let out_id = out.nodes.len();
        out.nodes.push(BinaryNode {
            id: out_id,
            label,
            left: None,
            right: None,
        });
        match parent {
            Some((p, false)) => out.nodes[p].left = Some(out_id),
            Some((p, true)) => out.nodes[p].right = Some(out_id),
            None => out.root = out_id,
        }
        let kids = &children[id];
        if kids.len() == 2 {
            stack.push((kids[1], Some((out_id, true))));
        }
        if let Some(&l) = kids.first() {
            stack.push((l, Some((out_id, false))));
        }
    }
}
