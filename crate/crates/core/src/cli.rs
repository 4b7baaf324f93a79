//! The `nmgen` command line.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::checkpoint::Checkpoint;
use crate::decoder::{batch_sample, decode, leftright_prefix, DecodeConfig, DecodeMode, Decoded};
use crate::error::{Error, Result};
use crate::metrics::{bleu, bleu_shared, entropy_by_depth, exact_match_rate, sample_stats, token_f1, NGramIndex};
use crate::oracle::{OracleKind, SplitRule};
use crate::policy::{load_embeddings, Policy, PolicyConfig};
use crate::seed::{build_seed_tree, seed_order_violations, SeedTree};
use crate::trainer::{run_episode, train, EpisodeOpts, Example, RollIn, TrainConfig};
use crate::tree::{PartialTree, TokenId};
use crate::vocab::{read_corpus, tokenize, Vocab};

#[derive(Debug, Parser)]
#[command(name = "nmgen", version, about = "Non-monotonic sequence generation with binary trees")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an unconditional model.
    Train(TrainArgs),
    /// Sample sentences from a model.
    Sample(SampleArgs),
    /// Complete a seed-tree template.
    Complete(CompleteArgs),
    /// Train a bag-of-words to sentence model.
    ReorderTrain(TrainArgs),
    /// Evaluate a reordering model on a corpus.
    ReorderEval(ReorderEvalArgs),
    /// Score hypotheses against references.
    Eval(EvalArgs),
    /// Show an oracle rollout for one sentence.
    InspectTree(InspectArgs),
    /// Split raw text on whitespace and punctuation.
    Tokenize(TokenizeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum OracleArg {
    Leftright,
    Uniform,
    Coaching,
    Annealed,
}

impl From<OracleArg> for OracleKind {
    fn from(o: OracleArg) -> Self {
        match o {
            OracleArg::Leftright => OracleKind::LeftRight,
            OracleArg::Uniform => OracleKind::Uniform,
            OracleArg::Coaching => OracleKind::Coaching,
            OracleArg::Annealed => OracleKind::Annealed,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum RollInArg {
    Greedy,
    Stochastic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SplitArg {
    Random,
    Leftmost,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub valid: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON training configuration; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write the epoch log here.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub oracle: Option<OracleArg>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f32>,
    #[arg(long)]
    pub lr_halving: Option<usize>,
    #[arg(long)]
    pub clip_norm: Option<f32>,
    #[arg(long = "beta-burnin")]
    pub beta_burn_in: Option<usize>,
    #[arg(long)]
    pub beta_rate: Option<f64>,
    #[arg(long, value_enum)]
    pub rollin: Option<RollInArg>,
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    #[arg(long)]
    pub aux_end: bool,
    #[arg(long)]
    pub tree_enc: bool,
    #[arg(long)]
    pub d_emb: Option<usize>,
    #[arg(long)]
    pub d_hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// Deepest node the tree encoding covers (default: longest sentence).
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    /// Pretrained embeddings, one `token v1 v2 ...` per line.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f32,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// `<end>` threshold for models with the `<end>` head.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f32,
    /// Argmax decoding instead of sampling.
    #[arg(long)]
    pub greedy: bool,
    /// Node cap (default: twice the longest training sentence plus one).
    #[arg(long)]
    pub max_nodes: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Write one DOT file per output into this directory.
    #[arg(long)]
    pub emit_trees: Option<PathBuf>,
    /// Annotate tokens with their generation index (`word@k`).
    #[arg(long)]
    pub emit_order: bool,
    /// Write outputs here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub decode: DecodeArgs,
    #[arg(short = 'n', long = "num", default_value_t = 10)]
    pub n: usize,
    /// Report sample statistics against a training and a validation corpus.
    #[arg(long, num_args = 2, value_names = ["TRAIN", "VALID"])]
    pub stats_against: Option<Vec<PathBuf>>,
    /// Decode one output per line of this file, starting from the
    /// left-to-right tree of its first `--prompt-len` words.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub prompt_len: usize,
    /// Write normalised policy entropy by depth as CSV.
    #[arg(long)]
    pub entropy_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    #[command(flatten)]
    pub decode: DecodeArgs,
    /// Seed tree, e.g. `(favorite () (food () (! () ())))`.
    #[arg(long)]
    pub template: String,
    #[arg(short = 'n', long = "num", default_value_t = 10)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct ReorderEvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Reference sentences; each is shuffled into a bag for the model.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub strict_permutation: bool,
    #[arg(long, default_value_t = 4)]
    pub bleu_n: usize,
    #[arg(long)]
    pub max_nodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub bleu_n: usize,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub input: String,
    #[arg(long, value_enum, default_value = "uniform")]
    pub oracle: OracleArg,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    /// Input file (default: stdin).
    #[arg(long)]
    pub input: Option<PathBuf>,
}

/// Training options from a config file: the training configuration plus
/// model sizes and flags.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct FileConfig {
    #[serde(flatten)]
    train: TrainConfig,
    aux_end: bool,
    tree_enc: bool,
    d_emb: Option<usize>,
    d_hidden: Option<usize>,
    n_layers: Option<usize>,
    max_depth: Option<usize>,
}

/// Run the parsed command line, writing primary output to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<()> {
    match cli.threads {
        Some(0) => return Err(Error::Config("--threads must be positive".into())),
        Some(n) => {
            // a second build in the same process (tests) keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        None => {}
    }
    match cli.command {
        Command::Train(a) => cmd_train(a, false, out),
        Command::ReorderTrain(a) => cmd_train(a, true, out),
        Command::Sample(a) => cmd_sample(a, out),
        Command::Complete(a) => cmd_complete(a, out),
        Command::ReorderEval(a) => cmd_reorder_eval(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::InspectTree(a) => cmd_inspect(a, out),
        Command::Tokenize(a) => cmd_tokenize(a, out),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<output>", e)
}

fn resolve_train_config(a: &TrainArgs) -> Result<(TrainConfig, FileConfig)> {
    let mut file = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            serde_json::from_str::<FileConfig>(&text)?
        }
        None => FileConfig::default(),
    };
    let t = &mut file.train;
    if let Some(o) = a.oracle {
        t.oracle = o.into();
    }
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = a.$flag { t.$field = v; })*
        };
    }
    set!(epochs => epochs, seed => seed, batch_size => batch_size, lr => lr,
         lr_halving => lr_halving_every, clip_norm => clip_norm,
         beta_burn_in => beta_burn_in, beta_rate => beta_rate);
    if let Some(r) = a.rollin {
        t.coaching_rollin = Some(match r {
            RollInArg::Greedy => RollIn::Greedy,
            RollInArg::Stochastic => RollIn::Stochastic,
        });
    }
    if let Some(s) = a.split {
        t.split_rule = match s {
            SplitArg::Random => SplitRule::Random,
            SplitArg::Leftmost => SplitRule::Leftmost,
        };
    }
    file.aux_end |= a.aux_end;
    file.tree_enc |= a.tree_enc;
    file.d_emb = a.d_emb.or(file.d_emb);
    file.d_hidden = a.d_hidden.or(file.d_hidden);
    file.n_layers = a.layers.or(file.n_layers);
    file.max_depth = a.max_depth.or(file.max_depth);
    let train = file.train.clone();
    train.validate()?;
    Ok((train, file))
}

fn examples(sentences: &[Vec<String>], vocab: &Vocab, conditional: bool) -> Vec<Example> {
    sentences
        .iter()
        .map(|s| {
            let ids = vocab.encode(s);
            if conditional {
                Example::bag(ids)
            } else {
                Example::unconditional(ids)
            }
        })
        .collect()
}

fn cmd_train(a: TrainArgs, conditional: bool, out: &mut dyn std::io::Write) -> Result<()> {
    let (cfg, file) = resolve_train_config(&a)?;
    let sentences = read_corpus(&a.corpus)?;
    let vocab = Vocab::build(&sentences, a.min_count);
    let data = examples(&sentences, &vocab, conditional);
    let valid = match &a.valid {
        Some(p) => Some(examples(&read_corpus(p)?, &vocab, conditional)),
        None => None,
    };
    let max_len = sentences.iter().map(Vec::len).max().unwrap_or(0);
    let defaults = PolicyConfig::new(vocab.len());
    let model = PolicyConfig {
        d_emb: file.d_emb.unwrap_or(defaults.d_emb),
        d_hidden: file.d_hidden.unwrap_or(defaults.d_hidden),
        n_layers: file.n_layers.unwrap_or(defaults.n_layers),
        aux_end: file.aux_end,
        tree_enc: file.tree_enc,
        max_depth: file.max_depth.unwrap_or(max_len.max(1)),
        conditional,
        ..defaults
    };
    let mut policy = Policy::new(model, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    if let Some(p) = &a.embeddings {
        let rows = load_embeddings(p, |t| vocab.id(t))?;
        let n = policy.set_embeddings(&rows)?;
        log::info!("initialised {n} embedding rows from {}", p.display());
    }
    let mut log_text = String::new();
    let mut write_err = None;
    train(&mut policy, &data, valid.as_deref(), &cfg, |log| {
        let _ = writeln!(log_text, "{log}");
        if let Err(e) = writeln!(out, "{log}") {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(stdout_err(e));
    }
    if let Some(p) = &a.log {
        std::fs::write(p, log_text).map_err(io_err(p))?;
    }
    Checkpoint::new(policy, vocab, max_len, Some(cfg))?.save(&a.out)
}

fn decode_config(a: &DecodeArgs, ckpt: &Checkpoint) -> DecodeConfig {
    let model = ckpt.policy.config();
    let cap = 2 * ckpt.max_train_len + 1;
    DecodeConfig {
        mode: if a.greedy { DecodeMode::Greedy } else { DecodeMode::Sample },
        temperature: a.temperature,
        top_k: a.top_k,
        tau: a.tau,
        max_nodes: a.max_nodes.unwrap_or(cap),
        max_depth: a
            .max_depth
            .unwrap_or(if model.tree_enc { model.max_depth } else { cap })
            .min(if model.tree_enc { model.max_depth } else { usize::MAX }),
        seed: a.seed,
        strict_permutation: false,
        record_dists: false,
    }
}

fn render(d: &Decoded, vocab: &Vocab, order: bool) -> Result<String> {
    if !order {
        return Ok(vocab.decode(&d.sentence).join(" "));
    }
    let words: Vec<String> = d
        .tree
        .in_order_nodes()?
        .into_iter()
        .filter_map(|id| {
            let n = d.tree.node(id);
            match n.action() {
                Some(crate::tree::Action::Token(t)) => Some(format!("{}@{}", vocab.token(t), n.fill_order.unwrap_or(0))),
                _ => None,
            }
        })
        .collect();
    Ok(words.join(" "))
}

fn emit(a: &DecodeArgs, vocab: &Vocab, decoded: &[Decoded], out: &mut dyn std::io::Write) -> Result<()> {
    let mut text = String::new();
    for d in decoded {
        text.push_str(&render(d, vocab, a.emit_order)?);
        text.push('\n');
    }
    match &a.out {
        Some(p) => std::fs::write(p, text).map_err(io_err(p))?,
        None => out.write_all(text.as_bytes()).map_err(stdout_err)?,
    }
    if let Some(dir) = &a.emit_trees {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (i, d) in decoded.iter().enumerate() {
            let p = dir.join(format!("sample_{i:05}.dot"));
            std::fs::write(&p, d.tree.to_dot(|act| vocab.action_label(act))).map_err(io_err(&p))?;
        }
    }
    let caps = decoded.iter().filter(|d| d.cap_hit).count();
    if caps > 0 {
        log::warn!("{caps} of {} outputs hit a node or depth cap", decoded.len());
    }
    Ok(())
}

fn cmd_sample(a: SampleArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let ckpt = Checkpoint::load(&a.decode.ckpt)?;
    if ckpt.policy.config().conditional {
        return Err(Error::Config("this is a conditional model; use reorder-eval".into()));
    }
    let mut cfg = decode_config(&a.decode, &ckpt);
    cfg.record_dists = a.entropy_csv.is_some();
    let decoded = match &a.prompts {
        Some(p) => {
            let prompts = read_corpus(p)?;
            let trees: Vec<PartialTree> = prompts
                .iter()
                .map(|s| leftright_prefix(&ckpt.vocab.encode(&s[..a.prompt_len.min(s.len())])))
                .collect::<Result<_>>()?;
            use rayon::prelude::*;
            trees
                .par_iter()
                .enumerate()
                .map(|(i, t)| {
                    let c = DecodeConfig {
                        seed: crate::trainer::derive_seed(cfg.seed, i as u64, 0),
                        ..cfg.clone()
                    };
                    decode(&ckpt.policy, &c, None, Some(t))
                })
                .collect::<Result<Vec<_>>>()?
        }
        None => batch_sample(&ckpt.policy, a.n, &cfg, None, None)?,
    };
    emit(&a.decode, &ckpt.vocab, &decoded, out)?;
    if let Some(p) = &a.entropy_csv {
        let rows = entropy_by_depth(decoded.iter().flat_map(|d| d.dists.iter().map(|n| (n.depth, &n.dist[..]))));
        let mut csv = String::from("depth,entropy,count\n");
        for r in rows {
            let _ = writeln!(csv, "{},{:.6},{}", r.depth, r.entropy, r.count);
        }
        std::fs::write(p, csv).map_err(io_err(p))?;
    }
    if let Some(paths) = &a.stats_against {
        let train_set: HashSet<Vec<String>> = read_corpus(&paths[0])?.into_iter().collect();
        let valid = read_corpus(&paths[1])?;
        let sentences: Vec<Vec<String>> = decoded
            .iter()
            .map(|d| ckpt.vocab.decode(&d.sentence).into_iter().map(String::from).collect())
            .collect();
        let trees: Vec<PartialTree> = decoded.iter().map(|d| d.tree.clone()).collect();
        let st = sample_stats(&sentences, &trees, &train_set)?;
        let index = NGramIndex::new(&valid, 4)?;
        let b = bleu_shared(&sentences, &index, 4)?;
        let span = st.avg_span.map_or("nan".to_string(), |s| format!("{s:.4}"));
        eprintln!(
            "pct_novel={:.2} pct_unique={:.2} avg_tokens={:.2} avg_span={span} bleu={:.2}",
            100.0 * st.frac_novel,
            100.0 * st.frac_unique,
            st.avg_tokens,
            b.score
        );
    }
    Ok(())
}

fn cmd_complete(a: CompleteArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let ckpt = Checkpoint::load(&a.decode.ckpt)?;
    let template: SeedTree = a.template.parse()?;
    let start = build_seed_tree(&template, |t| ckpt.vocab.id(t))?;
    let mut cfg = decode_config(&a.decode, &ckpt);
    // room for the template on top of the usual cap
    if a.decode.max_nodes.is_none() {
        cfg.max_nodes += 2 * template.len();
    }
    let decoded = batch_sample(&ckpt.policy, a.n, &cfg, None, Some(&start))?;
    for d in &decoded {
        let v = seed_order_violations(&d.tree, template.len())?;
        if v != 0 {
            return Err(Error::Invariant(format!("completion broke {v} template orderings")));
        }
    }
    emit(&a.decode, &ckpt.vocab, &decoded, out)
}

fn cmd_reorder_eval(a: ReorderEvalArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let ckpt = Checkpoint::load(&a.ckpt)?;
    if !ckpt.policy.config().conditional {
        return Err(Error::NotConditional);
    }
    let refs: Vec<Vec<TokenId>> = read_corpus(&a.data)?.iter().map(|s| ckpt.vocab.encode(s)).collect();
    let max_len = refs.iter().map(Vec::len).max().unwrap_or(0).max(ckpt.max_train_len);
    let cfg = DecodeConfig {
        mode: DecodeMode::Greedy,
        max_nodes: a.max_nodes.unwrap_or(2 * max_len + 1),
        strict_permutation: a.strict_permutation,
        ..DecodeConfig::default()
    };
    use rayon::prelude::*;
    let hyps: Vec<Vec<TokenId>> = refs
        .par_iter()
        .map(|r| {
            let ex = Example::bag(r.clone());
            decode(&ckpt.policy, &cfg, ex.source.as_deref(), None).map(|d| d.sentence)
        })
        .collect::<Result<_>>()?;
    if let Some(p) = &a.out {
        let text: String = hyps.iter().map(|h| ckpt.vocab.decode(h).join(" ") + "\n").collect();
        std::fs::write(p, text).map_err(io_err(p))?;
    }
    report(&hyps, &refs, a.bleu_n, out)
}

fn report<T: Clone + Eq + std::hash::Hash>(
    hyps: &[Vec<T>],
    refs: &[Vec<T>],
    bleu_n: usize,
    out: &mut dyn std::io::Write,
) -> Result<()> {
    if hyps.len() != refs.len() {
        return Err(Error::Config(format!(
            "{} hypotheses but {} references",
            hyps.len(),
            refs.len()
        )));
    }
    let ref_sets: Vec<Vec<Vec<T>>> = refs.iter().map(|r| vec![r.clone()]).collect();
    let b = bleu(hyps, &ref_sets, bleu_n)?;
    let f1 = hyps.iter().zip(refs).map(|(h, r)| token_f1(h, r)).sum::<f64>() / hyps.len() as f64;
    let em = exact_match_rate(hyps, refs);
    let mut s = String::new();
    let _ = writeln!(s, "metric     value");
    let _ = writeln!(s, "BLEU-{bleu_n:<5}{:.2}", b.score);
    let _ = writeln!(s, "BP         {:.4}", b.brevity_penalty);
    let _ = writeln!(s, "F1         {f1:.4}");
    let _ = writeln!(s, "EM         {em:.4}");
    let _ = writeln!(s, "bleu={:.6}", b.score);
    let _ = writeln!(s, "bp={:.6}", b.brevity_penalty);
    let _ = writeln!(s, "f1={f1:.6}");
    let _ = writeln!(s, "em={em:.6}");
    let _ = writeln!(s, "n={}", hyps.len());
    out.write_all(s.as_bytes()).map_err(stdout_err)
}

fn cmd_eval(a: EvalArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let hyps = read_corpus(&a.hyp)?;
    let refs = read_corpus(&a.reference)?;
    report(&hyps, &refs, a.bleu_n, out)
}

fn cmd_inspect(a: InspectArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let ckpt = Checkpoint::load(&a.ckpt)?;
    let words = tokenize(&a.input);
    let target = ckpt.vocab.encode(&words);
    let ex = if ckpt.policy.config().conditional {
        Example::bag(target)
    } else {
        Example::unconditional(target)
    };
    let opts = EpisodeOpts {
        beta: a.beta,
        ..EpisodeOpts::new(a.oracle.into())
    };
    let ep = run_episode(&ckpt.policy, &ex, &opts, &mut ChaCha8Rng::seed_from_u64(a.seed))?;
    let mut s = String::new();
    for (t, step) in ep.steps.iter().enumerate() {
        let oracle: Vec<String> = step
            .oracle
            .entries()
            .iter()
            .map(|&(act, p)| format!("{}:{p:.3}", ckpt.vocab.action_label(act)))
            .collect();
        let _ = writeln!(
            s,
            "step={t} depth={} action={} oracle={{{}}}",
            ep.tree.node(step.slot).depth,
            ckpt.vocab.action_label(step.action),
            oracle.join(",")
        );
    }
    let _ = writeln!(s, "sentence: {}", ckpt.vocab.decode(&ep.tree.in_order_sentence()?).join(" "));
    let span = ep.tree.average_span()?.map_or("undefined".into(), |v| format!("{v:.3}"));
    let _ = writeln!(s, "average_span: {span}");
    let _ = writeln!(s, "loss: {:.6}", ep.loss);
    s.push_str(&ep.tree.to_dot(|act| ckpt.vocab.action_label(act)));
    out.write_all(s.as_bytes()).map_err(stdout_err)
}

fn cmd_tokenize(a: TokenizeArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let text = match &a.input {
        Some(p) => std::fs::read_to_string(p).map_err(io_err(p))?,
        None => std::io::read_to_string(std::io::stdin()).map_err(|e| Error::io("<stdin>", e))?,
    };
    let mut s = String::new();
    for line in text.lines() {
        s.push_str(&tokenize(line).join(" "));
        s.push('\n');
    }
    out.write_all(s.as_bytes()).map_err(stdout_err)
}

/// Parse `args`, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
