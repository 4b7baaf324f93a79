//! LSTM generation policy.
//!
//! The policy reads the level-order action trace one action at a time. Its
//! top hidden state feeds a softmax head over actions and, optionally, a
//! separate Bernoulli `<end>` head. When the `<end>` head is on, the softmax
//! covers vocabulary tokens only.
//!
//! Parameter names:
//!
//! | name | shape |
//! |------|-------|
//! | `embed` | `[A, E]` |
//! | `lstm.{l}.weight` | `[4H, in_l + H]`, gate order i, f, g, o |
//! | `lstm.{l}.bias` | `[4H]` |
//! | `head.weight`, `head.bias` | `[O, H]`, `[O]` |
//! | `end.weight`, `end.bias` | `[1, H]`, `[1]` |
//! | `tree.p` | scalar |
//! | `enc.embed` | `[A, E]` |
//! | `enc.proj.weight`, `enc.proj.bias` | `[H, E]`, `[H]` |
//! | `init.{l}.weight`, `init.{l}.bias` | `[H, H]`, `[H]` |
//!
//! `A` is the action-set size (`<end>` included) and `O` is `A`, or `A - 1`
//! with the `<end>` head.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{init, Grads, Params, Tape, Tensor, Var};
use crate::tree::{path_bits, Action, Step, TokenId, END_INDEX};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Size of the action set, `<end>` included.
    pub vocab_size: usize,
    pub d_emb: usize,
    pub d_hidden: usize,
    pub n_layers: usize,
    pub aux_end: bool,
    pub tree_enc: bool,
    /// Deepest node the tree encoding can describe.
    pub max_depth: usize,
    pub conditional: bool,
}

impl PolicyConfig {
    pub fn new(vocab_size: usize) -> Self {
        PolicyConfig {
            vocab_size,
            d_emb: 64,
            d_hidden: 64,
            n_layers: 1,
            aux_end: false,
            tree_enc: false,
            max_depth: 32,
            conditional: false,
        }
    }

    /// Number of outputs of the softmax head.
    pub fn head_size(&self) -> usize {
        self.vocab_size - usize::from(self.aux_end)
    }

    fn input_size(&self, layer: usize) -> usize {
        match layer {
            0 if self.tree_enc => self.d_emb + 2 * self.max_depth,
            0 => self.d_emb,
            _ => self.d_hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 || self.d_emb == 0 || self.d_hidden == 0 || self.n_layers == 0 {
            return Err(Error::Config(format!("degenerate model sizes: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    config: PolicyConfig,
    params: Params,
}

impl Policy {
    pub fn new<R: Rng + ?Sized>(config: PolicyConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (a, e, h) = (config.vocab_size, config.d_emb, config.d_hidden);
        let mut p = Params::new();
        p.insert("embed", init::normal(a, e, 0.1, rng));
        for l in 0..config.n_layers {
            let fan_in = config.input_size(l) + h;
            p.insert(format!("lstm.{l}.weight"), init::xavier_uniform(4 * h, fan_in, rng));
            p.insert(format!("lstm.{l}.bias"), Tensor::zeros(&[4 * h]));
        }
        p.insert("head.weight", init::xavier_uniform(config.head_size(), h, rng));
        p.insert("head.bias", Tensor::zeros(&[config.head_size()]));
        if config.aux_end {
            p.insert("end.weight", init::xavier_uniform(1, h, rng));
            p.insert("end.bias", Tensor::zeros(&[1]));
        }
        if config.tree_enc {
            p.insert("tree.p", Tensor::scalar(0.9));
        }
        if config.conditional {
            p.insert("enc.embed", init::normal(a, e, 0.1, rng));
            p.insert("enc.proj.weight", init::xavier_uniform(h, e, rng));
            p.insert("enc.proj.bias", Tensor::zeros(&[h]));
            for l in 0..config.n_layers {
                p.insert(format!("init.{l}.weight"), init::xavier_uniform(h, h, rng));
                p.insert(format!("init.{l}.bias"), Tensor::zeros(&[h]));
            }
        }
        Ok(Policy { config, params: p })
    }

    /// Rebuild a policy from stored tensors, checking every expected tensor
    /// is present with the right shape and nothing else is.
    pub fn from_params(config: PolicyConfig, params: Params) -> Result<Self> {
        config.validate()?;
        let expected = Policy::new(config.clone(), &mut ChaCha8Rng::seed_from_u64(0))?;
        for (name, t) in expected.params.iter() {
            let got = params.require(name)?;
            if got.shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    got.shape(),
                    t.shape()
                )));
            }
        }
        if let Some(extra) = params.names().find(|n| !expected.params.contains(n)) {
            return Err(Error::Checkpoint(format!("unexpected tensor {extra}")));
        }
        Ok(Policy { config, params })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    /// Overwrite embedding rows (both the policy's and the encoder's) with
    /// pretrained vectors. Returns how many rows were set.
    pub fn set_embeddings(&mut self, rows: &[(TokenId, Vec<f32>)]) -> Result<usize> {
        let e = self.config.d_emb;
        let mut set = 0;
        for name in ["embed", "enc.embed"] {
            let Some(table) = self.params.get_mut(name) else { continue };
            for (tok, v) in rows {
                if v.len() != e {
                    return Err(Error::Embeddings(format!("vector of size {} for a model with d_emb {e}", v.len())));
                }
                let i = tok.index();
                if i >= self.config.vocab_size {
                    continue;
                }
                table.data_mut()[i * e..(i + 1) * e].copy_from_slice(v);
                if name == "embed" {
                    set += 1;
                }
            }
        }
        Ok(set)
    }

    pub fn session(&self) -> PolicySession<'_> {
        PolicySession::new(self)
    }

    /// A session whose initial state is derived from a bag of source tokens.
    pub fn conditional_session(&self, bag: &[TokenId]) -> Result<PolicySession<'_>> {
        let mut s = PolicySession::new(self);
        let ctx = s.encode_bag(bag)?;
        s.init_state(Some(ctx))?;
        Ok(s)
    }
}

/// Read a whitespace-separated embedding file (`token v1 v2 ...` per line).
/// The dimension comes from the first line; tokens unknown to `lookup` are
/// skipped.
pub fn load_embeddings(path: &Path, lookup: impl Fn(&str) -> Option<TokenId>) -> Result<Vec<(TokenId, Vec<f32>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut dim = None;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(tok) = fields.next() else { continue };
        let v: Vec<f32> = fields
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Embeddings(format!("line {}: {e}", n + 1)))?;
        let d = *dim.get_or_insert(v.len());
        if v.len() != d || d == 0 {
            return Err(Error::Embeddings(format!("line {}: expected {d} values, got {}", n + 1, v.len())));
        }
        if let Some(id) = lookup(tok) {
            out.push((id, v));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
struct LayerVars {
    weight: Var,
    bias: Var,
}

#[derive(Clone, Debug)]
struct ParamVars {
    embed: Var,
    lstm: Vec<LayerVars>,
    head: LayerVars,
    end: Option<LayerVars>,
    tree_p: Option<Var>,
    enc_embed: Option<Var>,
    enc_proj: Option<LayerVars>,
    init: Vec<LayerVars>,
}

/// Output heads at the current state.
#[derive(Clone, Copy, Debug)]
pub struct Heads {
    /// Softmax logits over the head's outputs.
    pub logits: Var,
    /// `<end>` logit when the auxiliary head is on.
    pub end_logit: Option<Var>,
}

/// One pass of the policy over a trace, recorded on its own tape.
pub struct PolicySession<'a> {
    policy: &'a Policy,
    tape: Tape,
    vars: ParamVars,
    h: Vec<Var>,
    c: Vec<Var>,
}

impl<'a> PolicySession<'a> {
    fn new(policy: &'a Policy) -> Self {
        let mut tape = Tape::new();
        let cfg = &policy.config;
        let p = &policy.params;
        let mut leaf = |name: &str| tape.leaf(p.get(name).expect("policy owns its tensors").clone());
        let mut layer = |prefix: &str| LayerVars {
            weight: leaf(&format!("{prefix}.weight")),
            bias: leaf(&format!("{prefix}.bias")),
        };
        let vars = ParamVars {
            lstm: (0..cfg.n_layers).map(|l| layer(&format!("lstm.{l}"))).collect(),
            head: layer("head"),
            end: cfg.aux_end.then(|| layer("end")),
            enc_proj: cfg.conditional.then(|| layer("enc.proj")),
            init: if cfg.conditional {
                (0..cfg.n_layers).map(|l| layer(&format!("init.{l}"))).collect()
            } else {
                Vec::new()
            },
            embed: tape.leaf(p.get("embed").expect("policy owns its tensors").clone()),
            tree_p: cfg
                .tree_enc
                .then(|| tape.leaf(p.get("tree.p").expect("policy owns its tensors").clone())),
            enc_embed: cfg
                .conditional
                .then(|| tape.leaf(p.get("enc.embed").expect("policy owns its tensors").clone())),
        };
        let zeros = tape.leaf(Tensor::zeros(&[cfg.d_hidden]));
        PolicySession {
            policy,
            tape,
            vars,
            h: vec![zeros; cfg.n_layers],
            c: vec![zeros; cfg.n_layers],
        }
    }

    pub fn policy(&self) -> &'a Policy {
        self.policy
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn tape_mut(&mut self) -> &mut Tape {
        &mut self.tape
    }

    /// Mean of the projected encoder embeddings of `bag`.
    pub fn encode_bag(&mut self, bag: &[TokenId]) -> Result<Var> {
        let (Some(table), Some(proj)) = (self.vars.enc_embed, self.vars.enc_proj.clone()) else {
            return Err(Error::NotConditional);
        };
        if bag.is_empty() {
            return Err(Error::EmptyBag);
        }
        // sorted, so float summation order cannot depend on bag order
        let mut ids: Vec<usize> = bag.iter().map(|t| t.index()).collect();
        ids.sort_unstable();
        self.check_ids(&ids)?;
        // the projection is affine, so projecting the mean equals the mean of
        // the projections
        let rows = self.tape.embedding(table, &ids)?;
        let mean = self.tape.mean_rows(rows)?;
        let z = self.tape.matvec(proj.weight, mean)?;
        self.tape.add_bias(z, proj.bias)
    }

    /// Reset the recurrent state: zeros without context, otherwise
    /// `h_l = tanh(W_l ctx + b_l)` and zero cells.
    pub fn init_state(&mut self, context: Option<Var>) -> Result<()> {
        let cfg = &self.policy.config;
        let zeros = self.tape.leaf(Tensor::zeros(&[cfg.d_hidden]));
        self.c = vec![zeros; cfg.n_layers];
        match context {
            None => self.h = vec![zeros; cfg.n_layers],
            Some(ctx) => {
                if self.vars.init.is_empty() {
                    return Err(Error::NotConditional);
                }
                if self.tape.shape(ctx) != [cfg.d_hidden] {
                    return Err(Error::DimensionMismatch(format!(
                        "context of shape {:?}, expected [{}]",
                        self.tape.shape(ctx),
                        cfg.d_hidden
                    )));
                }
                for l in 0..cfg.n_layers {
                    let lv = self.vars.init[l].clone();
                    let z = self.tape.matvec(lv.weight, ctx)?;
                    let z = self.tape.add_bias(z, lv.bias)?;
                    self.h[l] = self.tape.tanh(z)?;
                }
            }
        }
        Ok(())
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        let n = self.policy.config.vocab_size;
        match ids.iter().find(|&&i| i >= n) {
            Some(i) => Err(Error::InvalidAction(format!("action index {i} outside an action set of {n}"))),
            None => Ok(()),
        }
    }

    /// Consume one action. `path` is the root path of the node the action
    /// filled; it is ignored unless the model uses tree encodings.
    pub fn step(&mut self, action: Action, path: &[Step]) -> Result<()> {
        let cfg = self.policy.config.clone();
        self.check_ids(&[action.index()])?;
        let emb = self.tape.embedding_row(self.vars.embed, action.index())?;
        let mut x = match self.vars.tree_p {
            Some(p) => {
                let bits = path_bits(path, cfg.max_depth)?;
                let pos = self.tape.geom_scale(bits, p)?;
                self.tape.concat(&[emb, pos])?
            }
            None => emb,
        };
        let h = cfg.d_hidden;
        for l in 0..cfg.n_layers {
            let lv = self.vars.lstm[l].clone();
            let xh = self.tape.concat(&[x, self.h[l]])?;
            let z = self.tape.matvec(lv.weight, xh)?;
            let z = self.tape.add_bias(z, lv.bias)?;
            let i = self.tape.slice(z, 0, h)?;
            let f = self.tape.slice(z, h, h)?;
            let g = self.tape.slice(z, 2 * h, h)?;
            let o = self.tape.slice(z, 3 * h, h)?;
            let i = self.tape.sigmoid(i)?;
            let f = self.tape.sigmoid(f)?;
            let g = self.tape.tanh(g)?;
            let o = self.tape.sigmoid(o)?;
            let fc = self.tape.mul(f, self.c[l])?;
            let ig = self.tape.mul(i, g)?;
            let c = self.tape.add(fc, ig)?;
            let tc = self.tape.tanh(c)?;
            let hn = self.tape.mul(o, tc)?;
            self.c[l] = c;
            self.h[l] = hn;
            x = hn;
        }
        Ok(())
    }

    /// Top-layer hidden state.
    pub fn top(&self) -> Var {
        *self.h.last().expect("at least one layer")
    }

    /// Hidden vectors of every layer, bottom first.
    pub fn hidden(&self) -> Vec<Vec<f32>> {
        self.h.iter().map(|&v| self.tape.value(v).data().to_vec()).collect()
    }

    pub fn heads(&mut self) -> Result<Heads> {
        let top = self.top();
        let head = self.vars.head.clone();
        let z = self.tape.matvec(head.weight, top)?;
        let logits = self.tape.add_bias(z, head.bias)?;
        let end_logit = match self.vars.end.clone() {
            Some(end) => {
                let z = self.tape.matvec(end.weight, top)?;
                Some(self.tape.add_bias(z, end.bias)?)
            }
            None => None,
        };
        Ok(Heads { logits, end_logit })
    }

    /// Distribution over the whole action set. With the `<end>` head the
    /// `<end>` probability is its sigmoid and tokens share the rest.
    pub fn full_dist(&self, heads: Heads) -> Vec<f32> {
        let probs = crate::numerics::tensor::softmax(self.tape.value(heads.logits).data());
        match heads.end_logit {
            None => probs,
            Some(e) => {
                let pe = crate::numerics::tensor::sigmoid(self.tape.value(e).item());
                std::iter::once(pe).chain(probs.into_iter().map(|p| (1.0 - pe) * p)).collect()
            }
        }
    }

    /// Tempered, optionally top-k truncated softmax of the head, laid out
    /// over the whole action set (`<end>` gets zero with the `<end>` head).
    pub fn action_dist(&self, heads: Heads, temperature: f32, top_k: Option<usize>) -> Result<Vec<f32>> {
        let logits = self.tape.value(heads.logits).data();
        let probs = tempered(logits, temperature, top_k)?;
        Ok(match heads.end_logit {
            None => probs,
            Some(_) => std::iter::once(0.0).chain(probs).collect(),
        })
    }

    pub fn end_prob(&self, heads: Heads) -> Result<f32> {
        let e = heads.end_logit.ok_or(Error::AuxHeadDisabled)?;
        Ok(crate::numerics::tensor::sigmoid(self.tape.value(e).item()))
    }

    /// Log-probabilities of the head's softmax.
    pub fn log_probs(&mut self, heads: Heads) -> Result<Var> {
        self.tape.log_softmax(heads.logits)
    }

    /// Head output index of an action, or `None` for `<end>` under the
    /// `<end>` head.
    pub fn head_index(&self, action: Action) -> Option<usize> {
        match (self.policy.config.aux_end, action) {
            (true, Action::End) => None,
            (true, Action::Token(t)) => Some(t.index() - 1),
            (false, a) => Some(a.index()),
        }
    }

    /// Named parameter gradients from a backward pass over this session.
    pub fn param_grads(&self, grads: &Grads) -> Params {
        let v = &self.vars;
        let mut out = Params::new();
        let mut put = |name: String, var: Var| {
            out.insert(name, grads.get(var));
        };
        put("embed".into(), v.embed);
        for (l, lv) in v.lstm.iter().enumerate() {
            put(format!("lstm.{l}.weight"), lv.weight);
            put(format!("lstm.{l}.bias"), lv.bias);
        }
        put("head.weight".into(), v.head.weight);
        put("head.bias".into(), v.head.bias);
        if let Some(e) = &v.end {
            put("end.weight".into(), e.weight);
            put("end.bias".into(), e.bias);
        }
        if let Some(p) = v.tree_p {
            put("tree.p".into(), p);
        }
        if let Some(t) = v.enc_embed {
            put("enc.embed".into(), t);
        }
        if let Some(e) = &v.enc_proj {
            put("enc.proj.weight".into(), e.weight);
            put("enc.proj.bias".into(), e.bias);
        }
        for (l, lv) in v.init.iter().enumerate() {
            put(format!("init.{l}.weight"), lv.weight);
            put(format!("init.{l}.bias"), lv.bias);
        }
        out
    }
}

/// `softmax(logits / temperature)`, restricted to the `top_k` largest logits
/// (ties broken by lower index) and renormalised.
pub fn tempered(logits: &[f32], temperature: f32, top_k: Option<usize>) -> Result<Vec<f32>> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::BadTemperature(temperature));
    }
    let scaled: Vec<f32> = logits.iter().map(|x| x / temperature).collect();
    match top_k {
        Some(0) => Err(Error::BadTopK),
        Some(k) if k < scaled.len() => {
            let mut order: Vec<usize> = (0..scaled.len()).collect();
            order.sort_by(|&a, &b| scaled[b].total_cmp(&scaled[a]).then(a.cmp(&b)));
            let mut masked = vec![f32::NEG_INFINITY; scaled.len()];
            for &i in &order[..k] {
                masked[i] = scaled[i];
            }
            Ok(crate::numerics::tensor::softmax(&masked))
        }
        _ => Ok(crate::numerics::tensor::softmax(&scaled)),
    }
}

/// Look up table for `load_embeddings`.
pub fn token_lookup(tokens: &[String]) -> impl Fn(&str) -> Option<TokenId> + '_ {
    let map: HashMap<&str, u32> = tokens
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != END_INDEX)
        .map(|(i, t)| (t.as_str(), i as u32))
        .collect();
    move |s| map.get(s).map(|&i| TokenId(i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn policy(cfg: PolicyConfig) -> Policy {
        Policy::new(cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap()
    }

    fn small() -> PolicyConfig {
        PolicyConfig {
            d_emb: 8,
            d_hidden: 6,
            ..PolicyConfig::new(6)
        }
    }

    #[test]
    fn unconditional_state_starts_at_zero() {
        let p = policy(small());
        let s = p.session();
        assert!(s.hidden().iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn step_is_deterministic() {
        let p = policy(small());
        let run = || {
            let mut s = p.session();
            s.step(Action::Token(TokenId(2)), &[]).unwrap();
            s.hidden()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn dist_sums_to_one() {
        for aux in [false, true] {
            let p = policy(PolicyConfig { aux_end: aux, ..small() });
            let mut s = p.session();
            s.step(Action::Token(TokenId(3)), &[]).unwrap();
            let h = s.heads().unwrap();
            assert_abs_diff_eq!(s.full_dist(h).iter().sum::<f32>(), 1.0, epsilon = 1e-6);
            assert_abs_diff_eq!(s.action_dist(h, 0.7, Some(2)).unwrap().iter().sum::<f32>(), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn end_prob_needs_the_head() {
        let p = policy(small());
        let mut s = p.session();
        let h = s.heads().unwrap();
        assert!(matches!(s.end_prob(h), Err(Error::AuxHeadDisabled)));
    }

    #[test]
    fn zero_end_head_gives_half() {
        let mut p = policy(PolicyConfig { aux_end: true, ..small() });
        p.params_mut().get_mut("end.weight").unwrap().scale_in_place(0.0);
        let mut s = p.session();
        s.step(Action::Token(TokenId(1)), &[]).unwrap();
        let h = s.heads().unwrap();
        assert_eq!(s.end_prob(h).unwrap(), 0.5);
    }

    #[test]
    fn tempered_edge_cases() {
        let logits = [0.3, 2.0, -1.0, 0.5];
        assert!(tempered(&logits, 0.0, None).is_err());
        assert!(tempered(&logits, 1.0, Some(0)).is_err());
        assert_eq!(tempered(&logits, 1.0, Some(1)).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(tempered(&logits, 1.0, Some(4)).unwrap(), tempered(&logits, 1.0, None).unwrap());
    }

    #[test]
    fn conditional_initial_state_is_projected_context() {
        let p = policy(PolicyConfig { conditional: true, ..small() });
        let bag = [TokenId(2), TokenId(4)];
        let s = p.conditional_session(&bag).unwrap();
        // recompute by hand
        let prm = p.params();
        let (e, h) = (8, 6);
        let emb = prm.get("enc.embed").unwrap().data();
        let mean: Vec<f32> = (0..e).map(|j| (emb[2 * e + j] + emb[4 * e + j]) / 2.0).collect();
        let affine = |w: &Tensor, b: &Tensor, x: &[f32]| -> Vec<f32> {
            let cols = x.len();
            (0..b.len())
                .map(|i| b.data()[i] + (0..cols).map(|j| w.data()[i * cols + j] * x[j]).sum::<f32>())
                .collect()
        };
        let ctx = affine(prm.get("enc.proj.weight").unwrap(), prm.get("enc.proj.bias").unwrap(), &mean);
        let h0: Vec<f32> = affine(prm.get("init.0.weight").unwrap(), prm.get("init.0.bias").unwrap(), &ctx)
            .into_iter()
            .map(f32::tanh)
            .collect();
        assert_eq!(h0.len(), h);
        for (a, b) in s.hidden()[0].iter().zip(&h0) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn bag_encoding_errors() {
        let p = policy(small());
        assert!(matches!(p.conditional_session(&[TokenId(1)]), Err(Error::NotConditional)));
        let p = policy(PolicyConfig { conditional: true, ..small() });
        assert!(matches!(p.conditional_session(&[]), Err(Error::EmptyBag)));
    }

    #[test]
    fn from_params_checks_shapes() {
        let p = policy(small());
        assert!(Policy::from_params(small(), p.params().clone()).is_ok());
        let mut bad = p.params().clone();
        bad.insert("head.bias", Tensor::zeros(&[3]));
        assert!(Policy::from_params(small(), bad).is_err());
        let mut extra = p.params().clone();
        extra.insert("stray", Tensor::zeros(&[1]));
        assert!(Policy::from_params(small(), extra).is_err());
    }
}
