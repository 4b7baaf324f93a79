use std::collections::HashSet;

use nmgen::checkpoint::Checkpoint;
use nmgen::metrics::{bleu, token_f1};
use nmgen::numerics::tensor::{log_softmax, softmax};
use nmgen::numerics::{clip_global_norm, global_norm, Params, Tensor};
use nmgen::oracle::{oracle_dist, OracleKind, OracleState, SplitRule};
use nmgen::policy::{Policy, PolicyConfig};
use nmgen::tree::{Action, PartialTree, TokenId};
use nmgen::vocab::Vocab;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn target() -> impl Strategy<Value = Vec<TokenId>> {
    prop::collection::vec(1u32..12, 0..14).prop_map(|v| v.into_iter().map(TokenId).collect())
}

fn oracle_kind() -> impl Strategy<Value = OracleKind> {
    prop::sample::select(OracleKind::ALL.to_vec())
}

/// Oracle rollout that checks span bookkeeping after every action.
fn rollout(kind: OracleKind, beta: f32, y: &[TokenId], split: SplitRule, seed: u64) -> PartialTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = OracleState::new(y.to_vec()).unwrap();
    let mut tree = PartialTree::new();
    while let Some(slot) = tree.front_slot() {
        let pol: Vec<f32> = (0..12).map(|_| rng.gen::<f32>() + 1e-3).collect();
        let d = oracle_dist(kind, &state, slot, Some(&pol), beta).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-5);
        for a in d.support() {
            assert!(state.is_valid(slot, a).unwrap(), "oracle proposes an invalid action");
        }
        state.commit(&mut tree, d.sample(&mut rng), split, &mut rng).unwrap();
        // open spans plus placed tokens always account for the whole target
        let open: usize = tree.frontier().iter().map(|&s| state.span(s).unwrap().len()).sum();
        assert_eq!(open + tree.token_count(), y.len());
    }
    tree
}

proptest! {
    #[test]
    fn rollouts_reconstruct_the_target(
        y in target(),
        kind in oracle_kind(),
        beta in 0.0f32..=1.0,
        leftmost in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let split = if leftmost { SplitRule::Leftmost } else { SplitRule::Random };
        let tree = rollout(kind, beta, &y, split, seed);
        prop_assert_eq!(tree.in_order_sentence().unwrap(), y.clone());
        prop_assert_eq!(tree.trace().len(), 2 * y.len() + 1);
        prop_assert_eq!(tree.end_count(), y.len() + 1);
        prop_assert_eq!(tree.nodes().len(), 2 * y.len() + 1);
    }

    #[test]
    fn replaying_a_trace_rebuilds_the_tree(y in target(), kind in oracle_kind(), seed in any::<u64>()) {
        let tree = rollout(kind, 0.5, &y, SplitRule::Random, seed);
        let again = PartialTree::replay(tree.trace()).unwrap();
        prop_assert_eq!(&again, &tree);
    }

    #[test]
    fn average_span_lies_between_chain_and_full(y in target(), seed in any::<u64>()) {
        let tree = rollout(OracleKind::Uniform, 0.0, &y, SplitRule::Random, seed);
        match tree.average_span().unwrap() {
            None => prop_assert!(y.len() <= 1),
            Some(s) => prop_assert!((1.0..=2.0).contains(&s)),
        }
    }

    #[test]
    fn leftright_rollouts_are_right_chains(y in target()) {
        let tree = rollout(OracleKind::LeftRight, 0.0, &y, SplitRule::Leftmost, 0);
        let mut want = Vec::new();
        for &t in &y {
            want.push(Action::Token(t));
            want.push(Action::End);
        }
        want.push(Action::End);
        prop_assert_eq!(tree.trace(), &want[..]);
        if y.len() > 1 {
            prop_assert_eq!(tree.average_span().unwrap(), Some(1.0));
        }
    }

    #[test]
    fn softmax_is_a_distribution(v in prop::collection::vec(-30.0f32..30.0, 1..20)) {
        let p = softmax(&v);
        prop_assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        let lp = log_softmax(&v);
        for (a, b) in p.iter().zip(&lp) {
            prop_assert!((a.ln().max(-80.0) - b.max(-80.0)).abs() < 1e-3);
        }
    }

    #[test]
    fn clipping_bounds_the_norm(v in prop::collection::vec(-10.0f32..10.0, 1..30), max in 0.1f32..5.0) {
        let mut g = Params::new();
        let half = v.len() / 2;
        g.insert("a", Tensor::vector(v[..half].to_vec()));
        g.insert("b", Tensor::vector(v[half..].to_vec()));
        let before: Vec<f32> = g.values().flat_map(|t| t.data().to_vec()).collect();
        let norm = clip_global_norm(&mut g, max);
        let after = global_norm(g.values());
        prop_assert!(after <= f64::from(max) * (1.0 + 1e-5) + 1e-9);
        if norm <= f64::from(max) {
            let same: Vec<f32> = g.values().flat_map(|t| t.data().to_vec()).collect();
            prop_assert_eq!(same, before);
        }
    }

    #[test]
    fn token_f1_is_symmetric_and_bounded(a in prop::collection::vec(0u8..6, 0..10), b in prop::collection::vec(0u8..6, 0..10)) {
        let f = token_f1(&a, &b);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f - token_f1(&b, &a)).abs() < 1e-12);
        if !a.is_empty() {
            prop_assert_eq!(token_f1(&a, &a), 1.0);
        }
    }

    #[test]
    fn bleu_is_bounded(
        pairs in prop::collection::vec(
            (prop::collection::vec(0u8..5, 1..9), prop::collection::vec(0u8..5, 1..9)),
            1..6,
        )
    ) {
        let hyps: Vec<Vec<u8>> = pairs.iter().map(|p| p.0.clone()).collect();
        let refs: Vec<Vec<Vec<u8>>> = pairs.iter().map(|p| vec![p.1.clone()]).collect();
        let b = bleu(&hyps, &refs, 4).unwrap();
        prop_assert!((0.0..=100.0 + 1e-9).contains(&b.score));
        let same = bleu(&hyps, &hyps.iter().map(|h| vec![h.clone()]).collect::<Vec<_>>(), 1).unwrap();
        prop_assert!((same.score - 100.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bag_encoding_ignores_order(bag in prop::collection::vec(2u32..9, 1..8), seed in any::<u64>()) {
        let cfg = PolicyConfig { d_emb: 6, d_hidden: 5, conditional: true, ..PolicyConfig::new(9) };
        let policy = Policy::new(cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let ids: Vec<TokenId> = bag.iter().map(|&i| TokenId(i)).collect();
        let mut shuffled = ids.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = policy.conditional_session(&ids).unwrap().hidden();
        let b = policy.conditional_session(&shuffled).unwrap().hidden();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn checkpoints_round_trip(words in prop::collection::hash_set("[a-z]{1,6}", 1..12), aux in any::<bool>(), enc in any::<bool>()) {
        let sentence: Vec<String> = words.into_iter().collect();
        let vocab = Vocab::build(&[sentence], 1);
        let cfg = PolicyConfig { d_emb: 4, d_hidden: 3, aux_end: aux, tree_enc: enc, max_depth: 3, ..PolicyConfig::new(vocab.len()) };
        let policy = Policy::new(cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let ck = Checkpoint::new(policy, vocab, 5, None).unwrap();
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &ck);
        let names: HashSet<&str> = back.policy.params().names().collect();
        prop_assert_eq!(names.contains("tree.p"), enc);
    }
}
