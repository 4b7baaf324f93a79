//! Binary-tree generation state.
//!
//! A sentence is produced by filling the root with a word, then recursively
//! filling the left subtree (words to its left) and the right subtree (words
//! to its right). `<end>` marks an empty subtree. Slots are filled strictly in
//! FIFO order, so the sequence of actions taken is the level-order traversal
//! of the tree and the in-order traversal (with `<end>` removed) is the
//! sentence.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of `<end>` in the action space. Vocabulary token ids start at 1.
pub const END_INDEX: usize = 0;

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// An element of the action set: a vocabulary token or `<end>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    End,
    Token(TokenId),
}

impl Action {
    /// Position in a dense distribution over the action set.
    pub fn index(self) -> usize {
        match self {
            Action::End => END_INDEX,
            Action::Token(t) => t.index(),
        }
    }

    pub fn from_index(index: usize) -> Self {
        if index == END_INDEX {
            Action::End
        } else {
            Action::Token(TokenId(index as u32))
        }
    }

    pub fn is_end(self) -> bool {
        matches!(self, Action::End)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::End => f.write_str("<end>"),
            Action::Token(t) => write!(f, "#{}", t.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Step {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Empty,
    Filled(Action),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub slot: Slot,
    pub parent: Option<NodeId>,
    pub left: Option<NodeId>,
    pub right: Option<NodeId>,
    pub depth: usize,
    pub path: Vec<Step>,
    /// Position of this node in the fill order (`None` while empty).
    pub fill_order: Option<usize>,
}

impl TreeNode {
    pub fn action(&self) -> Option<Action> {
        match self.slot {
            Slot::Filled(a) => Some(a),
            Slot::Empty => None,
        }
    }

    fn is_token(&self) -> bool {
        matches!(self.slot, Slot::Filled(Action::Token(_)))
    }
}

/// Arena of nodes plus the FIFO frontier of empty slots.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialTree {
    nodes: Vec<TreeNode>,
    frontier: VecDeque<NodeId>,
    trace: Vec<Action>,
    filled: Vec<NodeId>,
}

impl Default for PartialTree {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialTree {
    /// The initial state: a single empty root slot.
    pub fn new() -> Self {
        let root = TreeNode {
            slot: Slot::Empty,
            parent: None,
            left: None,
            right: None,
            depth: 0,
            path: Vec::new(),
            fill_order: None,
        };
        PartialTree {
            nodes: vec![root],
            frontier: VecDeque::from([0]),
            trace: Vec::new(),
            filled: Vec::new(),
        }
    }

    /// Rebuild a tree by applying `actions` to a fresh tree.
    pub fn replay(actions: &[Action]) -> Result<Self> {
        let mut tree = Self::new();
        for &a in actions {
            tree.apply_action(a)?;
        }
        Ok(tree)
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn frontier(&self) -> &VecDeque<NodeId> {
        &self.frontier
    }

    /// The slot the next action fills.
    pub fn front_slot(&self) -> Option<NodeId> {
        self.frontier.front().copied()
    }

    pub fn is_complete(&self) -> bool {
        self.frontier.is_empty()
    }

    /// Actions taken so far, in fill order.
    pub fn trace(&self) -> &[Action] {
        &self.trace
    }

    /// Filled node ids, in fill order (parallel to [`trace`](Self::trace)).
    pub fn filled_nodes(&self) -> &[NodeId] {
        &self.filled
    }

    /// The level-order action sequence the policy consumes.
    pub fn level_order_trace(&self) -> Vec<Action> {
        self.trace.clone()
    }

    pub fn filled_count(&self) -> usize {
        self.filled.len()
    }

    pub fn end_count(&self) -> usize {
        self.trace.iter().filter(|a| a.is_end()).count()
    }

    pub fn token_count(&self) -> usize {
        self.filled_count() - self.end_count()
    }

    /// Fill the front slot with `action`. A token opens a left and a right
    /// child slot (appended to the frontier in that order); `<end>` makes a
    /// leaf. Returns the filled node.
    pub fn apply_action(&mut self, action: Action) -> Result<NodeId> {
        let slot = self.frontier.pop_front().ok_or(Error::ApplyToCompleteTree)?;
        self.fill(slot, action);
        if let Action::Token(_) = action {
            let (l, r) = self.open_children(slot);
            self.frontier.push_back(l);
            self.frontier.push_back(r);
        }
        Ok(slot)
    }

    /// Fill an arbitrary empty slot without touching the frontier. Used to
    /// assemble seed trees; the caller owns the frontier afterwards.
    pub(crate) fn fill_detached(&mut self, id: NodeId, action: Action) -> (NodeId, NodeId) {
        self.frontier.retain(|&f| f != id);
        self.fill(id, action);
        self.open_children(id)
    }

    pub(crate) fn set_frontier(&mut self, frontier: VecDeque<NodeId>) {
        self.frontier = frontier;
    }

    fn fill(&mut self, id: NodeId, action: Action) {
        let node = &mut self.nodes[id];
        node.slot = Slot::Filled(action);
        node.fill_order = Some(self.trace.len());
        self.trace.push(action);
        self.filled.push(id);
    }

    fn open_children(&mut self, parent: NodeId) -> (NodeId, NodeId) {
        let child = |tree: &mut Self, step: Step| {
            let p = &tree.nodes[parent];
            let mut path = p.path.clone();
            path.push(step);
            let node = TreeNode {
                slot: Slot::Empty,
                parent: Some(parent),
                left: None,
                right: None,
                depth: p.depth + 1,
                path,
                fill_order: None,
            };
            tree.nodes.push(node);
            tree.nodes.len() - 1
        };
        let l = child(self, Step::Left);
        let r = child(self, Step::Right);
        self.nodes[parent].left = Some(l);
        self.nodes[parent].right = Some(r);
        (l, r)
    }

    /// Node ids of the complete tree in in-order (left, node, right),
    /// including `<end>` leaves.
    pub fn in_order_nodes(&self) -> Result<Vec<NodeId>> {
        if !self.is_complete() {
            return Err(Error::IncompleteTree(self.frontier.len()));
        }
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = Vec::new();
        let mut cur = Some(self.root());
        while cur.is_some() || !stack.is_empty() {
            while let Some(id) = cur {
                stack.push(id);
                cur = self.nodes[id].left;
            }
            let id = stack.pop().expect("stack is non-empty");
            out.push(id);
            cur = self.nodes[id].right;
        }
        Ok(out)
    }

    /// The generated sentence: in-order traversal with `<end>` removed.
    pub fn in_order_sentence(&self) -> Result<Vec<TokenId>> {
        Ok(self
            .in_order_nodes()?
            .into_iter()
            .filter_map(|id| match self.nodes[id].slot {
                Slot::Filled(Action::Token(t)) => Some(t),
                _ => None,
            })
            .collect())
    }

    /// Mean number of token children over token nodes that have at least one
    /// token child. 1.0 for a chain, 2.0 for a full binary tree; `None` when
    /// no such node exists.
    pub fn average_span(&self) -> Result<Option<f64>> {
        if !self.is_complete() {
            return Err(Error::IncompleteTree(self.frontier.len()));
        }
        let (mut internal, mut children) = (0usize, 0usize);
        for node in self.nodes.iter().filter(|n| n.is_token()) {
            let k = [node.left, node.right]
                .iter()
                .flatten()
                .filter(|&&c| self.nodes[c].is_token())
                .count();
            if k > 0 {
                internal += 1;
                children += k;
            }
        }
        Ok((internal > 0).then(|| children as f64 / internal as f64))
    }

    /// Render as a Graphviz digraph. Filled nodes are labelled with the token
    /// text and their fill index; empty slots are drawn dashed.
    pub fn to_dot(&self, label: impl Fn(Action) -> String) -> String {
        let mut out = String::from("digraph tree {\n  node [shape=box, fontname=\"monospace\"];\n");
        for (id, node) in self.nodes.iter().enumerate() {
            match (node.slot, node.fill_order) {
                (Slot::Filled(a), Some(k)) => {
                    let style = if a.is_end() { ", style=dotted" } else { "" };
                    out.push_str(&format!(
                        "  n{id} [label=\"{} ({k})\"{style}];\n",
                        escape_dot(&label(a))
                    ));
                }
                _ => out.push_str(&format!("  n{id} [label=\"_\", style=dashed];\n")),
            }
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if let Some(l) = node.left {
                out.push_str(&format!("  n{id} -> n{l} [label=\"L\"];\n"));
            }
            if let Some(r) = node.right {
                out.push_str(&format!("  n{id} -> n{r} [label=\"R\"];\n"));
            }
        }
        out.push_str("}\n");
        out
    }
}

fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Root-to-node path encoding: one 2-vector per step (`[1,0]` left,
/// `[0,1]` right), zero-padded to `2 * max_depth`, with the step taken at
/// depth `d` (0-based) scaled by `p^d`.
pub fn path_encoding(path: &[Step], max_depth: usize, p: f32) -> Result<Vec<f32>> {
    let bits = path_bits(path, max_depth)?;
    Ok(bits
        .iter()
        .enumerate()
        .map(|(i, &b)| b * p.powi((i / 2) as i32))
        .collect())
}

/// Unscaled 0/1 path vector of length `2 * max_depth`.
pub fn path_bits(path: &[Step], max_depth: usize) -> Result<Vec<f32>> {
    if path.len() > max_depth {
        return Err(Error::DepthExceeded {
            depth: path.len(),
            max_depth,
        });
    }
    let mut bits = vec![0.0; 2 * max_depth];
    for (d, step) in path.iter().enumerate() {
        match step {
            Step::Left => bits[2 * d] = 1.0,
            Step::Right => bits[2 * d + 1] = 1.0,
        }
    }
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(i: u32) -> Action {
        Action::Token(TokenId(i))
    }

    const A: u32 = 1;
    const B: u32 = 2;
    const C: u32 = 3;
    const D: u32 = 4;

    /// Root b, left subtree a, right subtree c -> d (right chain).
    fn figure_one_tree() -> PartialTree {
        use Action::End;
        PartialTree::replay(&[t(B), t(A), t(C), End, End, End, t(D), End, End]).unwrap()
    }

    #[test]
    fn fresh_tree_has_root_slot() {
        let tree = PartialTree::new();
        assert_eq!(tree.frontier().len(), 1);
        assert_eq!(tree.front_slot(), Some(0));
        assert!(tree.trace().is_empty());
        assert!(tree.level_order_trace().is_empty());
    }

    #[test]
    fn end_at_root_completes_empty_sentence() {
        let mut tree = PartialTree::new();
        tree.apply_action(Action::End).unwrap();
        assert!(tree.is_complete());
        assert_eq!(tree.filled_count(), 1);
        assert_eq!(tree.in_order_sentence().unwrap(), vec![]);
        assert_eq!(tree.average_span().unwrap(), None);
    }

    #[test]
    fn token_opens_left_then_right() {
        let mut tree = PartialTree::new();
        let root = tree.apply_action(t(B)).unwrap();
        let node = tree.node(root);
        let (l, r) = (node.left.unwrap(), node.right.unwrap());
        assert_eq!(tree.frontier().iter().copied().collect::<Vec<_>>(), vec![l, r]);
        assert_eq!(tree.node(l).path, vec![Step::Left]);
        assert_eq!(tree.node(r).path, vec![Step::Right]);
    }

    #[test]
    fn apply_to_complete_tree_fails() {
        let mut tree = PartialTree::replay(&[Action::End]).unwrap();
        assert!(matches!(tree.apply_action(t(A)), Err(Error::ApplyToCompleteTree)));
    }

    #[test]
    fn left_right_chain_reads_back() {
        use Action::End;
        let trace = [t(A), End, t(B), End, t(C), End, t(D), End, End];
        let tree = PartialTree::replay(&trace).unwrap();
        assert!(tree.is_complete());
        assert_eq!(
            tree.in_order_sentence().unwrap(),
            vec![TokenId(A), TokenId(B), TokenId(C), TokenId(D)]
        );
        assert_eq!(tree.level_order_trace(), trace.to_vec());
        assert_eq!(tree.average_span().unwrap(), Some(1.0));
    }

    #[test]
    fn figure_one_in_order_and_level_order() {
        let tree = figure_one_tree();
        assert_eq!(
            tree.in_order_sentence().unwrap(),
            vec![TokenId(A), TokenId(B), TokenId(C), TokenId(D)]
        );
        assert_eq!(&tree.level_order_trace()[..3], &[t(B), t(A), t(C)]);
        assert_eq!(tree.filled_count(), 9);
    }

    #[test]
    fn incomplete_tree_is_rejected() {
        let tree = PartialTree::replay(&[t(A)]).unwrap();
        assert!(matches!(tree.in_order_sentence(), Err(Error::IncompleteTree(2))));
        assert!(matches!(tree.average_span(), Err(Error::IncompleteTree(2))));
    }

    #[test]
    fn full_binary_tree_has_span_two() {
        use Action::End;
        let tree = PartialTree::replay(&[t(B), t(A), t(C), End, End, End, End]).unwrap();
        assert_eq!(tree.average_span().unwrap(), Some(2.0));
    }

    #[test]
    fn single_token_has_no_span() {
        let tree = PartialTree::replay(&[t(A), Action::End, Action::End]).unwrap();
        assert_eq!(tree.average_span().unwrap(), None);
    }

    #[test]
    fn path_encoding_examples() {
        assert_eq!(path_encoding(&[], 3, 0.7).unwrap(), vec![0.0; 6]);
        assert_eq!(
            path_encoding(&[Step::Left, Step::Right], 2, 0.5).unwrap(),
            vec![1.0, 0.0, 0.0, 0.5]
        );
        assert_eq!(path_encoding(&[Step::Left], 3, 1.0).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            path_encoding(&[Step::Left, Step::Left], 1, 1.0),
            Err(Error::DepthExceeded { depth: 2, max_depth: 1 })
        ));
    }

    #[test]
    fn dot_mentions_every_node() {
        let tree = figure_one_tree();
        let dot = tree.to_dot(|a| a.to_string());
        assert!(dot.starts_with("digraph tree {"));
        for id in 0..tree.nodes().len() {
            assert!(dot.contains(&format!("n{id} [")));
        }
        assert!(dot.contains("n0 -> n1 [label=\"L\"]"));
    }
}
