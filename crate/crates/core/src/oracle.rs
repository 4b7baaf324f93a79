//! Oracle policies.
//!
//! Every frontier slot carries a half-open span of the target sequence: the
//! words that must appear in that subtree. An oracle only puts mass on words
//! inside the span (or on `<end>` when the span is empty), so any rollout that
//! follows it rebuilds the target exactly. Committing a word splits the span
//! around one of its occurrences.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{Action, NodeId, PartialTree, TokenId, END_INDEX};

/// Tolerance for sum-to-one checks.
pub const PROB_TOL: f32 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    LeftRight,
    Uniform,
    Coaching,
    Annealed,
}

impl OracleKind {
    pub const ALL: [OracleKind; 4] = [
        OracleKind::LeftRight,
        OracleKind::Uniform,
        OracleKind::Coaching,
        OracleKind::Annealed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OracleKind::LeftRight => "leftright",
            OracleKind::Uniform => "uniform",
            OracleKind::Coaching => "coaching",
            OracleKind::Annealed => "annealed",
        }
    }

    /// Whether the oracle's distribution depends on the learner's policy.
    pub fn uses_policy(self) -> bool {
        matches!(self, OracleKind::Coaching | OracleKind::Annealed)
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OracleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leftright" | "left-right" => Ok(OracleKind::LeftRight),
            "uniform" => Ok(OracleKind::Uniform),
            "coaching" => Ok(OracleKind::Coaching),
            "annealed" => Ok(OracleKind::Annealed),
            other => Err(Error::UnknownOracle(other.to_string())),
        }
    }
}

/// How a committed word that occurs more than once in a span is split.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRule {
    /// Uniformly random occurrence, drawn from the caller's RNG.
    #[default]
    Random,
    /// Always the leftmost occurrence.
    Leftmost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Span {
    pub lo: usize,
    pub hi: usize,
}

impl Span {
    pub fn new(lo: usize, hi: usize) -> Self {
        debug_assert!(lo <= hi);
        Span { lo, hi }
    }

    pub fn len(self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(self) -> bool {
        self.lo == self.hi
    }
}

/// Sparse distribution over the action set, sorted by action index.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleDist {
    entries: Vec<(Action, f32)>,
}

impl OracleDist {
    fn from_map(map: BTreeMap<usize, f32>) -> Self {
        OracleDist {
            entries: map
                .into_iter()
                .filter(|&(_, p)| p > 0.0)
                .map(|(i, p)| (Action::from_index(i), p))
                .collect(),
        }
    }

    pub fn one_hot(action: Action) -> Self {
        OracleDist {
            entries: vec![(action, 1.0)],
        }
    }

    pub fn entries(&self) -> &[(Action, f32)] {
        &self.entries
    }

    pub fn prob(&self, action: Action) -> f32 {
        self.entries
            .iter()
            .find(|(a, _)| *a == action)
            .map_or(0.0, |&(_, p)| p)
    }

    pub fn support(&self) -> impl Iterator<Item = Action> + '_ {
        self.entries.iter().map(|&(a, _)| a)
    }

    pub fn total(&self) -> f32 {
        self.entries.iter().map(|&(_, p)| p).sum()
    }

    /// Dense vector over an action set of `n` entries.
    pub fn to_dense(&self, n: usize) -> Result<Vec<f32>> {
        let mut out = vec![0.0; n];
        for &(a, p) in &self.entries {
            let slot = out.get_mut(a.index()).ok_or_else(|| {
                Error::DimensionMismatch(format!("action {} outside an action set of {n}", a.index()))
            })?;
            *slot = p;
        }
        Ok(out)
    }

    /// Most probable action; ties go to the lowest index.
    pub fn argmax(&self) -> Action {
        let mut best = self.entries[0];
        for &e in &self.entries[1..] {
            if e.1 > best.1 {
                best = e;
            }
        }
        best.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Action {
        let total = self.total();
        let mut u = rng.gen::<f32>() * total;
        for &(a, p) in &self.entries {
            if u < p {
                return a;
            }
            u -= p;
        }
        self.entries.last().expect("distribution has support").0
    }
}

/// Per-slot spans over the target sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleState {
    target: Vec<TokenId>,
    spans: BTreeMap<NodeId, Span>,
}

impl OracleState {
    /// The state at the empty tree: the root slot owns the whole target.
    pub fn new(target: Vec<TokenId>) -> Result<Self> {
        if let Some(pos) = target.iter().position(|t| t.index() == END_INDEX) {
            return Err(Error::EmptyVocabToken(pos));
        }
        let root = Span::new(0, target.len());
        Ok(OracleState {
            target,
            spans: BTreeMap::from([(0, root)]),
        })
    }

    pub fn target(&self) -> &[TokenId] {
        &self.target
    }

    pub fn span(&self, slot: NodeId) -> Result<Span> {
        self.spans.get(&slot).copied().ok_or(Error::UnknownSlot(slot))
    }

    pub fn spans(&self) -> &BTreeMap<NodeId, Span> {
        &self.spans
    }

    /// Words of the slot's span.
    pub fn words(&self, slot: NodeId) -> Result<&[TokenId]> {
        let s = self.span(slot)?;
        Ok(&self.target[s.lo..s.hi])
    }

    pub fn is_valid(&self, slot: NodeId, action: Action) -> Result<bool> {
        let words = self.words(slot)?;
        Ok(match action {
            Action::End => words.is_empty(),
            Action::Token(t) => words.contains(&t),
        })
    }

    /// Uniform over the distinct words in the span; `<end>` with
    /// probability one when the span is empty.
    pub fn uniform_dist(&self, slot: NodeId) -> Result<OracleDist> {
        let words = self.words(slot)?;
        if words.is_empty() {
            return Ok(OracleDist::one_hot(Action::End));
        }
        let mut unique: Vec<usize> = words.iter().map(|t| t.index()).collect();
        unique.sort_unstable();
        unique.dedup();
        let p = 1.0 / unique.len() as f32;
        Ok(OracleDist::from_map(unique.into_iter().map(|i| (i, p)).collect()))
    }

    /// Probability one on the first word of the span (or `<end>`).
    pub fn leftright_dist(&self, slot: NodeId) -> Result<OracleDist> {
        let words = self.words(slot)?;
        Ok(OracleDist::one_hot(match words.first() {
            Some(&t) => Action::Token(t),
            None => Action::End,
        }))
    }

    /// Commit `action` at `slot`: removes the slot's span and returns the
    /// spans of its left and right children (`None` for `<end>`).
    pub fn split<R: Rng + ?Sized>(
        &mut self,
        slot: NodeId,
        action: Action,
        rule: SplitRule,
        rng: &mut R,
    ) -> Result<Option<(Span, Span)>> {
        let span = self.span(slot)?;
        if !self.is_valid(slot, action)? {
            return Err(Error::InvalidAction(action.to_string()));
        }
        self.spans.remove(&slot);
        let Action::Token(tok) = action else {
            return Ok(None);
        };
        let occurrences: Vec<usize> = (span.lo..span.hi).filter(|&i| self.target[i] == tok).collect();
        let i = match rule {
            SplitRule::Leftmost => occurrences[0],
            SplitRule::Random if occurrences.len() == 1 => occurrences[0],
            SplitRule::Random => occurrences[rng.gen_range(0..occurrences.len())],
        };
        Ok(Some((Span::new(span.lo, i), Span::new(i + 1, span.hi))))
    }

    /// Split at the tree's front slot, apply the action to the tree, and
    /// hand the child spans to the new child slots.
    pub fn commit<R: Rng + ?Sized>(
        &mut self,
        tree: &mut PartialTree,
        action: Action,
        rule: SplitRule,
        rng: &mut R,
    ) -> Result<NodeId> {
        let slot = tree.front_slot().ok_or(Error::ApplyToCompleteTree)?;
        let children = self.split(slot, action, rule, rng)?;
        let id = tree.apply_action(action)?;
        if let Some((ls, rs)) = children {
            let node = tree.node(id);
            let (l, r) = (node.left.expect("token opens children"), node.right.expect("token opens children"));
            self.spans.insert(l, ls);
            self.spans.insert(r, rs);
        }
        Ok(id)
    }
}

/// Product of the uniform oracle and the policy, renormalised. Falls back to
/// the uniform oracle when the policy puts no mass on any valid action.
pub fn coaching_dist(uniform: &OracleDist, policy: &[f32]) -> Result<OracleDist> {
    let mut map = BTreeMap::new();
    let mut total = 0.0f32;
    for &(a, p) in uniform.entries() {
        let q = *policy.get(a.index()).ok_or_else(|| {
            Error::DimensionMismatch(format!(
                "oracle action {} outside a policy of {} actions",
                a.index(),
                policy.len()
            ))
        })?;
        let w = p * q;
        total += w;
        map.insert(a.index(), w);
    }
    if total <= 0.0 || !total.is_finite() {
        return Ok(uniform.clone());
    }
    for w in map.values_mut() {
        *w /= total;
    }
    Ok(OracleDist::from_map(map))
}

/// `beta * uniform + (1 - beta) * coaching`.
pub fn annealed_dist(uniform: &OracleDist, coaching: &OracleDist, beta: f32) -> Result<OracleDist> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::BetaOutOfRange(beta));
    }
    let mut map = BTreeMap::new();
    for &(a, p) in uniform.entries() {
        *map.entry(a.index()).or_insert(0.0) += beta * p;
    }
    for &(a, p) in coaching.entries() {
        *map.entry(a.index()).or_insert(0.0) += (1.0 - beta) * p;
    }
    Ok(OracleDist::from_map(map))
}

/// The oracle distribution of `kind` at `slot`. `policy` is the learner's
/// dense distribution over the action set (needed by coaching and annealed).
pub fn oracle_dist(
    kind: OracleKind,
    state: &OracleState,
    slot: NodeId,
    policy: Option<&[f32]>,
    beta: f32,
) -> Result<OracleDist> {
    match kind {
        OracleKind::LeftRight => state.leftright_dist(slot),
        OracleKind::Uniform => state.uniform_dist(slot),
        OracleKind::Coaching | OracleKind::Annealed => {
            let uniform = state.uniform_dist(slot)?;
            let policy = policy.ok_or_else(|| Error::DimensionMismatch(format!("{kind} oracle needs a policy")))?;
            let coaching = coaching_dist(&uniform, policy)?;
            if kind == OracleKind::Coaching {
                Ok(coaching)
            } else {
                annealed_dist(&uniform, &coaching, beta)
            }
        }
    }
}
