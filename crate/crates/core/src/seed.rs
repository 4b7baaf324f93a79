//! Seed trees for sentence completion.
//!
//! A template such as `(favorite () (food () (! () ())))` fixes some words
//! and their left/right relations; decoding fills every missing child slot.
//! Grammar: `node := "(" TOKEN child child ")" | "(" TOKEN ")"`,
//! `child := "()" | node`. `(tok)` is shorthand for `(tok () ())`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tree::{Action, NodeId, PartialTree, Slot, TokenId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedTree {
    pub token: String,
    pub left: Option<Box<SeedTree>>,
    pub right: Option<Box<SeedTree>>,
}

impl SeedTree {
    pub fn leaf(token: impl Into<String>) -> Self {
        SeedTree {
            token: token.into(),
            left: None,
            right: None,
        }
    }

    pub fn with_children(token: impl Into<String>, left: Option<SeedTree>, right: Option<SeedTree>) -> Self {
        SeedTree {
            token: token.into(),
            left: left.map(Box::new),
            right: right.map(Box::new),
        }
    }

    pub fn len(&self) -> usize {
        1 + self.left.as_ref().map_or(0, |l| l.len()) + self.right.as_ref().map_or(0, |r| r.len())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Template tokens in in-order.
    pub fn in_order_tokens(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_in_order(&mut out);
        out
    }

    fn collect_in_order<'a>(&'a self, out: &mut Vec<&'a str>) {
        if let Some(l) = &self.left {
            l.collect_in_order(out);
        }
        out.push(&self.token);
        if let Some(r) = &self.right {
            r.collect_in_order(out);
        }
    }
}

impl fmt::Display for SeedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.token)?;
        for child in [&self.left, &self.right] {
            match child {
                Some(c) => write!(f, " {c}")?,
                None => f.write_str(" ()")?,
            }
        }
        f.write_str(")")
    }
}

impl FromStr for SeedTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lexemes = lex(s);
        let mut pos = 0;
        let tree = parse_child(&lexemes, &mut pos)?
            .ok_or_else(|| Error::BadTemplate("the root may not be empty".into()))?;
        if pos != lexemes.len() {
            return Err(Error::BadTemplate(format!("trailing input after position {pos}")));
        }
        Ok(tree)
    }
}

#[derive(Debug, PartialEq)]
enum Lexeme {
    Open,
    Close,
    Word(String),
}

fn lex(s: &str) -> Vec<Lexeme> {
    let mut out = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut Vec<Lexeme>| {
        if !word.is_empty() {
            out.push(Lexeme::Word(std::mem::take(word)));
        }
    };
    for ch in s.chars() {
        match ch {
            '(' => {
                flush(&mut word, &mut out);
                out.push(Lexeme::Open);
            }
            ')' => {
                flush(&mut word, &mut out);
                out.push(Lexeme::Close);
            }
            c if c.is_whitespace() => flush(&mut word, &mut out),
            c => word.push(c),
        }
    }
    flush(&mut word, &mut out);
    out
}

fn parse_child(lx: &[Lexeme], pos: &mut usize) -> Result<Option<SeedTree>> {
    let bad = |msg: &str, at: usize| Error::BadTemplate(format!("{msg} at position {at}"));
    if lx.get(*pos) != Some(&Lexeme::Open) {
        return Err(bad("expected `(`", *pos));
    }
    *pos += 1;
    let token = match lx.get(*pos) {
        Some(Lexeme::Close) => {
            *pos += 1;
            return Ok(None);
        }
        Some(Lexeme::Word(w)) => w.clone(),
        _ => return Err(bad("expected a token", *pos)),
    };
    *pos += 1;
    if lx.get(*pos) == Some(&Lexeme::Close) {
        *pos += 1;
        return Ok(Some(SeedTree::leaf(token)));
    }
    let left = parse_child(lx, pos)?;
    let right = parse_child(lx, pos)?;
    if lx.get(*pos) != Some(&Lexeme::Close) {
        return Err(bad("expected `)`", *pos));
    }
    *pos += 1;
    Ok(Some(SeedTree::with_children(token, left, right)))
}

/// Build the partial tree for a template. Filled nodes are created in
/// breadth-first order; every missing child becomes a frontier slot, also in
/// breadth-first order.
pub fn build_seed_tree(template: &SeedTree, lookup: impl Fn(&str) -> Option<TokenId>) -> Result<PartialTree> {
    let mut tree = PartialTree::new();
    let mut frontier = VecDeque::new();
    let mut queue: VecDeque<(NodeId, Option<&SeedTree>)> = VecDeque::from([(tree.root(), Some(template))]);
    while let Some((id, seed)) = queue.pop_front() {
        match seed {
            Some(node) => {
                let tok = lookup(&node.token).ok_or_else(|| Error::UnknownToken(node.token.clone()))?;
                let (l, r) = tree.fill_detached(id, Action::Token(tok));
                queue.push_back((l, node.left.as_deref()));
                queue.push_back((r, node.right.as_deref()));
            }
            None => frontier.push_back(id),
        }
    }
    tree.set_frontier(frontier);
    Ok(tree)
}

/// Seed-token positions in a completed tree's sentence, keyed by filled node.
pub fn seed_positions(tree: &PartialTree, seed_nodes: &[NodeId]) -> Result<Vec<usize>> {
    let order = tree.in_order_nodes()?;
    let mut sentence_pos = vec![usize::MAX; tree.nodes().len()];
    let mut k = 0;
    for id in order {
        if let Slot::Filled(Action::Token(_)) = tree.node(id).slot {
            sentence_pos[id] = k;
            k += 1;
        }
    }
    Ok(seed_nodes.iter().map(|&id| sentence_pos[id]).collect())
}

/// Check that a completed tree honours its seed: the first `seed_len` filled
/// nodes are the seed, and every seed node sits left (right) of each seed
/// ancestor it descends from on the left (right). Returns the number of
/// violated pairs.
pub fn seed_order_violations(tree: &PartialTree, seed_len: usize) -> Result<usize> {
    let seed_nodes = &tree.filled_nodes()[..seed_len.min(tree.filled_count())];
    let pos = seed_positions(tree, seed_nodes)?;
    let mut is_seed = vec![None; tree.nodes().len()];
    for (k, &id) in seed_nodes.iter().enumerate() {
        is_seed[id] = Some(pos[k]);
    }
    let mut violations = 0;
    for (k, &id) in seed_nodes.iter().enumerate() {
        let mut child = id;
        let mut parent = tree.node(id).parent;
        while let Some(anc) = parent {
            if let Some(anc_pos) = is_seed[anc] {
                let went_left = tree.node(anc).left == Some(child);
                if went_left != (pos[k] < anc_pos) {
                    violations += 1;
                }
            }
            child = anc;
            parent = tree.node(anc).parent;
        }
    }
    Ok(violations)
}
