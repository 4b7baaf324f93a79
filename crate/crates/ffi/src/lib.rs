//! C interface to `nmgen`.
//!
//! Models are opaque handles created by [`nmg_model_load`] and released with
//! [`nmg_model_free`]. Every fallible call returns an [`NmgStatus`]; on
//! failure [`nmg_last_error_message`] describes the error for the calling
//! thread. Strings returned through out-pointers are owned by the caller and
//! must be released with [`nmg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nmgen::checkpoint::Checkpoint;
use nmgen::decoder::{batch_sample, DecodeConfig, DecodeMode};
use nmgen::metrics::bleu;
use nmgen::oracle::OracleKind;
use nmgen::seed::{build_seed_tree, SeedTree};
use nmgen::trainer::{run_episode, EpisodeOpts, Example};
use nmgen::vocab::tokenize;
use nmgen::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result of a call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NmgStatus {
    Ok = 0,
    /// A null pointer, bad UTF-8 or an invalid option.
    InvalidArgument = 1,
    /// Unreadable or malformed input data.
    DataError = 2,
    /// An internal failure, including a caught panic.
    Internal = 3,
}

/// A loaded checkpoint.
pub struct NmgModel {
    ckpt: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> NmgStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NmgStatus::Ok,
        Ok(Err(Fail::Arg(m))) => {
            set_error(m);
            NmgStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            match e.exit_code() {
                1 => NmgStatus::InvalidArgument,
                2 => NmgStatus::DataError,
                _ => NmgStatus::Internal,
            }
        }
        Err(_) => {
            set_error("panic inside nmgen".into());
            NmgStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Arg(format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn model_arg<'a>(p: *const NmgModel) -> Result<&'a NmgModel, Fail> {
    p.as_ref().ok_or_else(|| Fail::Arg("model is null".into()))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|_| Fail::Lib(Error::Invariant("output contains a nul byte".into())))?;
    *out = c.into_raw();
    Ok(())
}

fn check_out<T>(out: *mut T) -> Result<(), Fail> {
    if out.is_null() {
        Err(Fail::Arg("output pointer is null".into()))
    } else {
        Ok(())
    }
}

/// Load a checkpoint. On success `*out` holds a handle to free with
/// [`nmg_model_free`].
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nmg_model_load(path: *const c_char, out: *mut *mut NmgModel) -> NmgStatus {
    guard(|| {
        check_out(out)?;
        let path = str_arg(path, "path")?;
        let ckpt = Checkpoint::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(NmgModel { ckpt }));
        Ok(())
    })
}

/// Release a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`nmg_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nmg_model_free(model: *mut NmgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of actions (vocabulary plus `<end>`), or 0 for a null model.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nmg_model_vocab_size(model: *const NmgModel) -> usize {
    model.as_ref().map_or(0, |m| m.ckpt.vocab.len())
}

unsafe fn decode_cfg(m: &NmgModel, seed: u64, temperature: f32, greedy: bool) -> DecodeConfig {
    let cap = 2 * m.ckpt.max_train_len + 1;
    let model = m.ckpt.policy.config();
    DecodeConfig {
        mode: if greedy { DecodeMode::Greedy } else { DecodeMode::Sample },
        temperature,
        seed,
        max_nodes: cap,
        max_depth: if model.tree_enc { model.max_depth } else { cap },
        ..DecodeConfig::default()
    }
}

unsafe fn run_sample(
    model: *const NmgModel,
    template: Option<*const c_char>,
    n: usize,
    seed: u64,
    temperature: f32,
    greedy: bool,
    out: *mut *mut c_char,
) -> NmgStatus {
    guard(|| {
        check_out(out)?;
        let m = model_arg(model)?;
        if m.ckpt.policy.config().conditional {
            return Err(Fail::Arg("conditional models need a source bag".into()));
        }
        let mut cfg = decode_cfg(m, seed, temperature, greedy);
        let start = match template {
            Some(t) => {
                let t: SeedTree = str_arg(t, "template")?.parse()?;
                cfg.max_nodes += 2 * t.len();
                Some(build_seed_tree(&t, |w| m.ckpt.vocab.id(w))?)
            }
            None => None,
        };
        let decoded = batch_sample(&m.ckpt.policy, n, &cfg, None, start.as_ref())?;
        let lines: Vec<String> = decoded.iter().map(|d| m.ckpt.vocab.decode(&d.sentence).join(" ")).collect();
        write_string(out, lines.join("\n"))
    })
}

/// Draw `n` sentences, returned newline-separated in `*out`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nmg_sample(
    model: *const NmgModel,
    n: usize,
    seed: u64,
    temperature: f32,
    greedy: bool,
    out: *mut *mut c_char,
) -> NmgStatus {
    run_sample(model, None, n, seed, temperature, greedy, out)
}

/// Complete a seed-tree template such as `(food () ())` `n` times.
///
/// # Safety
/// As for [`nmg_sample`]; `template` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nmg_complete(
    model: *const NmgModel,
    template: *const c_char,
    n: usize,
    seed: u64,
    temperature: f32,
    greedy: bool,
    out: *mut *mut c_char,
) -> NmgStatus {
    run_sample(model, Some(template), n, seed, temperature, greedy, out)
}

/// Corpus BLEU (0 to 100) of newline-separated hypotheses against
/// references, one reference per hypothesis.
///
/// # Safety
/// String arguments must be nul-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nmg_bleu(hyps: *const c_char, refs: *const c_char, max_n: usize, out: *mut f64) -> NmgStatus {
    guard(|| {
        check_out(out)?;
        let split = |s: &str| -> Vec<Vec<String>> {
            s.lines().map(|l| l.split_whitespace().map(String::from).collect()).collect()
        };
        let h = split(str_arg(hyps, "hyps")?);
        let r = split(str_arg(refs, "refs")?);
        if h.len() != r.len() {
            return Err(Fail::Arg(format!("{} hypotheses but {} references", h.len(), r.len())));
        }
        let r: Vec<Vec<Vec<String>>> = r.into_iter().map(|x| vec![x]).collect();
        *out = bleu(&h, &r, max_n)?.score;
        Ok(())
    })
}

/// Roll out `oracle` (`leftright`, `uniform`, `coaching` or `annealed`) on
/// `sentence` and write the generation trace, one action per line, to
/// `*out`.
///
/// # Safety
/// As for [`nmg_sample`]; string arguments must be nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn nmg_oracle_rollout(
    model: *const NmgModel,
    sentence: *const c_char,
    oracle: *const c_char,
    beta: f32,
    seed: u64,
    out: *mut *mut c_char,
) -> NmgStatus {
    guard(|| {
        check_out(out)?;
        let m = model_arg(model)?;
        let kind: OracleKind = str_arg(oracle, "oracle")?.parse()?;
        let target = m.ckpt.vocab.encode(&tokenize(str_arg(sentence, "sentence")?));
        let ex = if m.ckpt.policy.config().conditional {
            Example::bag(target)
        } else {
            Example::unconditional(target)
        };
        let opts = EpisodeOpts {
            beta,
            ..EpisodeOpts::new(kind)
        };
        let ep = run_episode(&m.ckpt.policy, &ex, &opts, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let trace: Vec<String> = ep.steps.iter().map(|s| m.ckpt.vocab.action_label(s.action)).collect();
        write_string(out, trace.join("\n"))
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nmg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn nmg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
