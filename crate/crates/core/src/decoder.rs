//! Tree decoding from a trained policy.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::trainer::derive_seed;
use crate::tree::{Action, PartialTree, TokenId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    Greedy,
    Sample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub mode: DecodeMode,
    pub temperature: f32,
    pub top_k: Option<usize>,
    /// `<end>` threshold for models with the `<end>` head.
    pub tau: f32,
    pub max_nodes: usize,
    pub max_depth: usize,
    pub seed: u64,
    /// Only allow tokens still unused from the source bag.
    pub strict_permutation: bool,
    /// Keep the policy distribution at every decoded node.
    pub record_dists: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            mode: DecodeMode::Sample,
            temperature: 1.0,
            top_k: None,
            tau: 0.5,
            max_nodes: 101,
            max_depth: 50,
            seed: 0,
            strict_permutation: false,
            record_dists: false,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_nodes == 0 {
            return Err(Error::Config("max_nodes must be at least 1".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::BadTemperature(self.temperature));
        }
        if self.top_k == Some(0) {
            return Err(Error::BadTopK);
        }
        Ok(())
    }
}

/// Policy distribution at one decoded node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeDist {
    pub depth: usize,
    pub dist: Vec<f32>,
}

#[derive(Clone, Debug)]
pub struct Decoded {
    pub tree: PartialTree,
    pub sentence: Vec<TokenId>,
    /// A node or depth cap forced `<end>` somewhere.
    pub cap_hit: bool,
    pub dists: Vec<NodeDist>,
}

/// Decode one tree with the RNG seeded from `config.seed`.
pub fn decode(
    policy: &Policy,
    config: &DecodeConfig,
    context: Option<&[TokenId]>,
    start: Option<&PartialTree>,
) -> Result<Decoded> {
    decode_with_rng(policy, config, context, start, &mut ChaCha8Rng::seed_from_u64(config.seed))
}

fn pick<R: Rng + ?Sized>(mode: DecodeMode, dist: &[f32], rng: &mut R) -> Option<usize> {
    if dist.iter().all(|&p| p <= 0.0) {
        return None;
    }
    Some(match mode {
        DecodeMode::Greedy => {
            let mut best = 0;
            for (i, &p) in dist.iter().enumerate() {
                if p > dist[best] {
                    best = i;
                }
            }
            best
        }
        DecodeMode::Sample => WeightedIndex::new(dist).ok()?.sample(rng),
    })
}

/// Decode one tree. Filled nodes of `start` (a seed tree or a replayed
/// prefix) are fed to the policy in fill order before decoding the frontier.
pub fn decode_with_rng<R: Rng + ?Sized>(
    policy: &Policy,
    config: &DecodeConfig,
    context: Option<&[TokenId]>,
    start: Option<&PartialTree>,
    rng: &mut R,
) -> Result<Decoded> {
    config.validate()?;
    let mut s = match context {
        Some(bag) => policy.conditional_session(bag)?,
        None => policy.session(),
    };
    let mut tree = start.cloned().unwrap_or_default();
    for &id in tree.filled_nodes() {
        let node = tree.node(id);
        s.step(node.action().expect("filled node"), &node.path)?;
    }
    let mut remaining: Option<HashMap<TokenId, usize>> = match (config.strict_permutation, context) {
        (true, Some(bag)) => {
            let mut m: HashMap<TokenId, usize> = HashMap::new();
            for &t in bag {
                *m.entry(t).or_insert(0) += 1;
            }
            for a in tree.trace() {
                if let Action::Token(t) = a {
                    if let Some(c) = m.get_mut(t) {
                        *c = c.saturating_sub(1);
                    }
                }
            }
            Some(m)
        }
        _ => None,
    };
    let mut cap_hit = false;
    let mut dists = Vec::new();
    while let Some(slot) = tree.front_slot() {
        let depth = tree.node(slot).depth;
        let room = tree.filled_count() + tree.frontier().len() + 2 <= config.max_nodes;
        let heads = s.heads()?;
        if config.record_dists {
            dists.push(NodeDist {
                depth,
                dist: s.full_dist(heads),
            });
        }
        let chosen = if heads.end_logit.is_some() && s.end_prob(heads)? >= config.tau {
            Action::End
        } else {
            let mut dist = s.action_dist(heads, config.temperature, config.top_k)?;
            if let Some(left) = &remaining {
                for (i, p) in dist.iter_mut().enumerate().skip(1) {
                    if left.get(&TokenId(i as u32)).copied().unwrap_or(0) == 0 {
                        *p = 0.0;
                    }
                }
            }
            match pick(config.mode, &dist, rng) {
                Some(i) => Action::from_index(i),
                None => Action::End,
            }
        };
        // a cap only counts as hit when it overrides a token
        let action = if chosen.is_end() || (room && depth < config.max_depth) {
            chosen
        } else {
            cap_hit = true;
            Action::End
        };
        if let (Some(left), Action::Token(t)) = (remaining.as_mut(), action) {
            if let Some(c) = left.get_mut(&t) {
                *c -= 1;
            }
        }
        let path = tree.node(slot).path.clone();
        tree.apply_action(action)?;
        if !tree.is_complete() {
            s.step(action, &path)?;
        }
    }
    let sentence = tree.in_order_sentence()?;
    Ok(Decoded {
        tree,
        sentence,
        cap_hit,
        dists,
    })
}

/// The partial tree a left-to-right rollout reaches after placing `prefix`:
/// each word followed by an `<end>` in its left slot, leaving the last
/// word's right slot open.
pub fn leftright_prefix(prefix: &[TokenId]) -> Result<PartialTree> {
    let trace: Vec<Action> = prefix.iter().flat_map(|&t| [Action::Token(t), Action::End]).collect();
    PartialTree::replay(&trace)
}

/// `n` independent decodes; sample `i` uses a stream derived from
/// `(config.seed, i)`.
pub fn batch_sample(
    policy: &Policy,
    n: usize,
    config: &DecodeConfig,
    context: Option<&[TokenId]>,
    start: Option<&PartialTree>,
) -> Result<Vec<Decoded>> {
    if n == 0 {
        return Err(Error::Config("number of samples must be at least 1".into()));
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, i as u64, 0));
            decode_with_rng(policy, config, context, start, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;
    use crate::policy::PolicyConfig;

    fn policy(aux: bool) -> Policy {
        let cfg = PolicyConfig {
            d_emb: 8,
            d_hidden: 8,
            aux_end: aux,
            ..PolicyConfig::new(7)
        };
        Policy::new(cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap()
    }

    /// Bias the head so `<end>` always wins.
    fn always_end(aux: bool) -> Policy {
        let mut p = policy(aux);
        let prm = p.params_mut();
        prm.get_mut("head.weight").unwrap().scale_in_place(0.0);
        if aux {
            prm.insert("end.bias", Tensor::vector(vec![50.0]));
        } else {
            let mut b = vec![0.0; 7];
            b[0] = 50.0;
            prm.insert("head.bias", Tensor::vector(b));
        }
        p
    }

    #[test]
    fn end_policy_gives_empty_sentence() {
        for aux in [false, true] {
            let cfg = DecodeConfig {
                mode: DecodeMode::Greedy,
                ..DecodeConfig::default()
            };
            let d = decode(&always_end(aux), &cfg, None, None).unwrap();
            assert_eq!(d.tree.filled_count(), 1);
            assert!(d.sentence.is_empty());
        }
    }

    #[test]
    fn greedy_is_deterministic() {
        let p = policy(false);
        let cfg = DecodeConfig {
            mode: DecodeMode::Greedy,
            max_nodes: 21,
            ..DecodeConfig::default()
        };
        let a = decode(&p, &cfg, None, None).unwrap();
        let b = decode(&p, &cfg, None, None).unwrap();
        assert_eq!(a.tree.trace(), b.tree.trace());
    }

    #[test]
    fn node_cap_is_respected() {
        let p = policy(false);
        for max_nodes in [1, 2, 3, 7, 15] {
            let cfg = DecodeConfig {
                max_nodes,
                ..DecodeConfig::default()
            };
            for d in batch_sample(&p, 20, &cfg, None, None).unwrap() {
                assert!(d.tree.filled_count() <= max_nodes.max(1));
                assert!(d.tree.is_complete());
            }
        }
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(batch_sample(&policy(false), 0, &DecodeConfig::default(), None, None).is_err());
    }

    #[test]
    fn fixed_seed_repeats_samples() {
        let p = policy(true);
        let cfg = DecodeConfig {
            seed: 9,
            max_nodes: 31,
            ..DecodeConfig::default()
        };
        let a: Vec<_> = batch_sample(&p, 8, &cfg, None, None).unwrap().into_iter().map(|d| d.sentence).collect();
        let b: Vec<_> = batch_sample(&p, 8, &cfg, None, None).unwrap().into_iter().map(|d| d.sentence).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_configs() {
        let p = policy(false);
        for cfg in [
            DecodeConfig { max_nodes: 0, ..DecodeConfig::default() },
            DecodeConfig { tau: 1.0, ..DecodeConfig::default() },
            DecodeConfig { temperature: 0.0, ..DecodeConfig::default() },
            DecodeConfig { top_k: Some(0), ..DecodeConfig::default() },
        ] {
            assert!(decode(&p, &cfg, None, None).is_err());
        }
    }
}
