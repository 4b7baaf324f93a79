//! Training by imitation of an oracle.
//!
//! Each example is rolled in with the oracle from the empty tree. At every
//! step the loss compares the oracle's distribution with the policy's; the
//! episode loss is the mean over all `2|Y| + 1` steps. Batches are processed
//! in parallel with one tape and one RNG stream per example, and gradients
//! are summed in example order so results do not depend on thread count.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{decode, DecodeConfig, DecodeMode};
use crate::error::{Error, Result};
use crate::metrics::bleu;
use crate::numerics::{clip_global_norm, step_decay, Adam, Params, Tensor, Var};
use crate::oracle::{coaching_dist, oracle_dist, OracleDist, OracleKind, OracleState, SplitRule};
use crate::policy::{Policy, PolicySession};
use crate::tree::{Action, NodeId, PartialTree, TokenId};

/// Floor applied to policy probabilities inside the KL term.
pub const PROB_FLOOR: f32 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RollIn {
    Greedy,
    Stochastic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub oracle: OracleKind,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f32,
    pub lr_halving_every: usize,
    pub clip_norm: f32,
    pub beta_burn_in: usize,
    pub beta_rate: f64,
    /// How coaching picks roll-in actions. `None` means greedy for
    /// conditional models and stochastic otherwise.
    pub coaching_rollin: Option<RollIn>,
    pub split_rule: SplitRule,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            oracle: OracleKind::Annealed,
            batch_size: 32,
            epochs: 100,
            lr: 0.001,
            lr_halving_every: 20,
            clip_norm: 1.0,
            beta_burn_in: 20,
            beta_rate: 0.05,
            coaching_rollin: None,
            split_rule: SplitRule::Random,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be non-negative");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip norm must be positive");
        }
        if !(self.beta_rate > 0.0 && self.beta_rate.is_finite()) {
            return bad("beta rate must be positive");
        }
        Ok(())
    }

    pub fn rollin_for(&self, conditional: bool) -> RollIn {
        self.coaching_rollin.unwrap_or(if conditional {
            RollIn::Greedy
        } else {
            RollIn::Stochastic
        })
    }

    pub fn lr_at(&self, epoch: usize) -> f32 {
        step_decay(self.lr, 0.5, self.lr_halving_every, epoch)
    }

    pub fn beta_at(&self, epoch: usize) -> f32 {
        beta_schedule(epoch, self.beta_burn_in, self.beta_rate)
    }
}

/// 1 during burn-in, then a linear decay to 0.
pub fn beta_schedule(epoch: usize, burn_in: usize, rate: f64) -> f32 {
    if epoch < burn_in {
        return 1.0;
    }
    (1.0 - rate * (epoch - burn_in) as f64).max(0.0) as f32
}

/// One training pair. `source` is the bag for conditional models.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub target: Vec<TokenId>,
    pub source: Option<Vec<TokenId>>,
}

impl Example {
    pub fn unconditional(target: Vec<TokenId>) -> Self {
        Example { target, source: None }
    }

    pub fn bag(target: Vec<TokenId>) -> Self {
        let mut source = target.clone();
        source.sort_unstable();
        Example {
            target,
            source: Some(source),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RolloutStep {
    pub slot: NodeId,
    pub action: Action,
    /// Policy distribution over the whole action set.
    pub policy: Vec<f32>,
    pub oracle: OracleDist,
    /// The step chose `<end>`; excluded from the token KL under the `<end>` head.
    pub masked: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct EpisodeOpts {
    pub oracle: OracleKind,
    pub beta: f32,
    pub rollin: RollIn,
    pub split: SplitRule,
    pub grads: bool,
}

impl EpisodeOpts {
    pub fn new(oracle: OracleKind) -> Self {
        EpisodeOpts {
            oracle,
            beta: 1.0,
            rollin: RollIn::Stochastic,
            split: SplitRule::Random,
            grads: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Episode {
    pub loss: f32,
    pub grads: Option<Params>,
    pub steps: Vec<RolloutStep>,
    pub tree: PartialTree,
}

fn choose<R: Rng + ?Sized>(
    opts: &EpisodeOpts,
    state: &OracleState,
    slot: NodeId,
    oracle: &OracleDist,
    policy: &[f32],
    rng: &mut R,
) -> Result<Action> {
    let pick = |d: &OracleDist, rng: &mut R| match opts.rollin {
        RollIn::Greedy => d.argmax(),
        RollIn::Stochastic => d.sample(rng),
    };
    Ok(match opts.oracle {
        OracleKind::LeftRight | OracleKind::Uniform => oracle.sample(rng),
        OracleKind::Coaching => pick(oracle, rng),
        OracleKind::Annealed => {
            let uniform = state.uniform_dist(slot)?;
            if rng.gen::<f32>() < opts.beta {
                uniform.sample(rng)
            } else {
                pick(&coaching_dist(&uniform, policy)?, rng)
            }
        }
    })
}

/// `KL(q || softmax(logits))` on the tape, with the policy's log-probability
/// floored. `q` is dense over the head's outputs.
fn kl_term(s: &mut PolicySession<'_>, logits: Var, q: Vec<f32>) -> Result<Var> {
    let neg_entropy: f32 = q.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum();
    let tape = s.tape_mut();
    let lp = tape.log_softmax(logits)?;
    let lp = tape.floor(lp, PROB_FLOOR.ln())?;
    let qv = tape.constant(q);
    let cross = tape.mul(qv, lp)?;
    let cross = tape.sum(cross)?;
    let cross = tape.scale(cross, -1.0)?;
    let c = tape.leaf(Tensor::scalar(neg_entropy));
    tape.add(cross, c)
}

/// Binary cross-entropy of `sigmoid(z)` against target `y`.
fn bce_term(s: &mut PolicySession<'_>, z: Var, y: f32) -> Result<Var> {
    let tape = s.tape_mut();
    let pos = tape.log_sigmoid(z)?;
    let nz = tape.scale(z, -1.0)?;
    let neg = tape.log_sigmoid(nz)?;
    let pos = tape.scale(pos, -y)?;
    let neg = tape.scale(neg, -(1.0 - y))?;
    let both = tape.add(pos, neg)?;
    tape.sum(both)
}

/// Roll the oracle in on one example and build its loss.
pub fn run_episode<R: Rng + ?Sized>(policy: &Policy, ex: &Example, opts: &EpisodeOpts, rng: &mut R) -> Result<Episode> {
    let cfg = policy.config();
    let mut s = match &ex.source {
        Some(bag) => policy.conditional_session(bag)?,
        None => policy.session(),
    };
    let mut state = OracleState::new(ex.target.clone())?;
    let mut tree = PartialTree::new();
    let mut steps = Vec::with_capacity(2 * ex.target.len() + 1);
    let mut kl_terms = Vec::new();
    let mut bce_terms = Vec::new();
    while let Some(slot) = tree.front_slot() {
        let heads = s.heads()?;
        let pol = s.full_dist(heads);
        let oracle = oracle_dist(opts.oracle, &state, slot, Some(&pol), opts.beta)?;
        let action = choose(opts, &state, slot, &oracle, &pol, rng)?;
        let masked = action.is_end();
        match heads.end_logit {
            None => {
                let q = oracle.to_dense(cfg.vocab_size)?;
                kl_terms.push(kl_term(&mut s, heads.logits, q)?);
            }
            Some(z) => {
                bce_terms.push(bce_term(&mut s, z, oracle.prob(Action::End))?);
                if !masked {
                    let mut q = vec![0.0; cfg.head_size()];
                    for &(a, p) in oracle.entries() {
                        if let Some(i) = s.head_index(a) {
                            q[i] = p;
                        }
                    }
                    kl_terms.push(kl_term(&mut s, heads.logits, q)?);
                }
            }
        }
        let path = tree.node(slot).path.clone();
        state.commit(&mut tree, action, opts.split, rng)?;
        if !tree.is_complete() {
            s.step(action, &path)?;
        }
        steps.push(RolloutStep {
            slot,
            action,
            policy: pol,
            oracle,
            masked,
        });
    }
    debug_assert_eq!(tree.in_order_sentence()?, ex.target);

    let mean = |s: &mut PolicySession<'_>, terms: &[Var]| -> Result<Option<Var>> {
        if terms.is_empty() {
            return Ok(None);
        }
        let total = s.tape_mut().add_all(terms)?;
        Ok(Some(s.tape_mut().scale(total, 1.0 / terms.len() as f32)?))
    };
    let loss = match (mean(&mut s, &bce_terms)?, mean(&mut s, &kl_terms)?) {
        (Some(b), Some(k)) => s.tape_mut().add(b, k)?,
        (Some(v), None) | (None, Some(v)) => v,
        (None, None) => return Err(Error::EmptyRollout),
    };
    let value = s.tape().value(loss).item();
    let grads = if opts.grads {
        let g = s.tape().backward(loss)?;
        Some(s.param_grads(&g))
    } else {
        None
    };
    Ok(Episode {
        loss: value,
        grads,
        steps,
        tree,
    })
}

/// Numeric KL of one step, for reporting.
pub fn step_kl(oracle: &OracleDist, policy: &[f32]) -> f32 {
    oracle
        .entries()
        .iter()
        .map(|&(a, q)| q * (q.ln() - policy[a.index()].max(PROB_FLOOR).ln()))
        .sum()
}

/// Seed for an independent RNG stream (splitmix64 over the inputs).
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed;
    for v in [a, b] {
        x = x.wrapping_add(v.wrapping_add(0x9E37_79B9_7F4A_7C15));
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
    }
    x
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f32,
    pub beta: f32,
    pub lr: f32,
    pub val_bleu: Option<f64>,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "epoch={} loss={:.6} beta={} lr={}", self.epoch, self.loss, self.beta, self.lr)?;
        if let Some(b) = self.val_bleu {
            write!(f, " val_bleu={b:.4}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub logs: Vec<EpochLog>,
    /// Epoch whose parameters were kept.
    pub selected_epoch: Option<usize>,
}

/// Greedy-decode BLEU of a conditional model on `valid`.
pub fn validation_bleu(policy: &Policy, valid: &[Example], dcfg: &DecodeConfig) -> Result<f64> {
    let hyps: Vec<Vec<TokenId>> = valid
        .par_iter()
        .map(|ex| decode(policy, dcfg, ex.source.as_deref(), None).map(|d| d.sentence))
        .collect::<Result<_>>()?;
    let refs: Vec<Vec<Vec<TokenId>>> = valid.iter().map(|ex| vec![ex.target.clone()]).collect();
    Ok(bleu(&hyps, &refs, 4)?.score)
}

/// Train in place. `on_epoch` sees each epoch's log after its updates.
///
/// Conditional models with a validation set keep the parameters of the epoch
/// with the best validation BLEU; otherwise the final parameters are kept.
pub fn train(
    policy: &mut Policy,
    data: &[Example],
    valid: Option<&[Example]>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Config("no training examples".into()));
    }
    let conditional = policy.config().conditional;
    if conditional != data.iter().all(|e| e.source.is_some()) {
        return Err(Error::Config("conditional models need a source bag for every example".into()));
    }
    let max_len = data.iter().map(|e| e.target.len()).max().unwrap_or(0);
    let mut adam = Adam::default();
    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Params)> = None;
    let select = conditional && valid.is_some_and(|v| !v.is_empty());
    let dcfg = DecodeConfig {
        mode: DecodeMode::Greedy,
        max_nodes: 2 * max_len + 1,
        ..DecodeConfig::default()
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        let beta = cfg.beta_at(epoch);
        let lr = cfg.lr_at(epoch);
        let opts = EpisodeOpts {
            oracle: cfg.oracle,
            beta,
            rollin: cfg.rollin_for(conditional),
            split: cfg.split_rule,
            grads: true,
        };
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, epoch as u64, u64::MAX)));
        let mut loss_sum = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            let shared: &Policy = policy;
            let results: Vec<(f32, Params)> = batch
                .par_iter()
                .map(|&k| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, epoch as u64, k as u64));
                    let ep = run_episode(shared, &data[k], &opts, &mut rng)?;
                    Ok((ep.loss, ep.grads.expect("requested gradients")))
                })
                .collect::<Result<_>>()?;
            let mut total = Params::new();
            for (loss, g) in &results {
                loss_sum += f64::from(*loss);
                total.add_assign(g)?;
            }
            total.scale(1.0 / batch.len() as f32);
            clip_global_norm(&mut total, cfg.clip_norm);
            adam.step(policy.params_mut(), &total, lr)?;
            if policy.params().values().any(|t| !t.all_finite()) {
                return Err(Error::NonFinite("parameters after update"));
            }
        }
        let val_bleu = match (select, valid) {
            (true, Some(v)) => Some(validation_bleu(policy, v, &dcfg)?),
            _ => None,
        };
        if let Some(b) = val_bleu {
            if best.as_ref().map_or(true, |(bb, _, _)| b > *bb) {
                best = Some((b, epoch, policy.params().clone()));
            }
        }
        let log = EpochLog {
            epoch,
            loss: (loss_sum / data.len() as f64) as f32,
            beta,
            lr,
            val_bleu,
        };
        on_epoch(&log);
        logs.push(log);
    }
    let selected_epoch = match best {
        Some((_, epoch, params)) => {
            *policy.params_mut() = params;
            Some(epoch)
        }
        None => cfg.epochs.checked_sub(1),
    };
    Ok(TrainReport { logs, selected_epoch })
}
