use std::ffi::{CStr, CString};
use std::ptr;

use nmgen::checkpoint::Checkpoint;
use nmgen::policy::{Policy, PolicyConfig};
use nmgen::vocab::Vocab;
use nmgen_ffi::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model_file(dir: &std::path::Path) -> CString {
    let sentences: Vec<Vec<String>> = ["the cat sat", "a dog ran !"]
        .iter()
        .map(|s| s.split_whitespace().map(String::from).collect())
        .collect();
    let vocab = Vocab::build(&sentences, 1);
    let cfg = PolicyConfig {
        d_emb: 8,
        d_hidden: 8,
        ..PolicyConfig::new(vocab.len())
    };
    let policy = Policy::new(cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let path = dir.join("m.ckpt");
    Checkpoint::new(policy, vocab, 4, None).unwrap().save(&path).unwrap();
    CString::new(path.to_str().unwrap()).unwrap()
}

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    nmg_string_free(s);
    out
}

#[test]
fn load_sample_and_free() {
    let dir = tempfile::tempdir().unwrap();
    let path = model_file(dir.path());
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(nmg_model_load(path.as_ptr(), &mut m), NmgStatus::Ok);
        assert_eq!(nmg_model_vocab_size(m), 9);
        let mut out = ptr::null_mut();
        assert_eq!(nmg_sample(m, 3, 7, 1.0, false, &mut out), NmgStatus::Ok);
        let a = take(out);
        assert_eq!(a.split('\n').count(), 3);
        assert_eq!(nmg_sample(m, 3, 7, 1.0, false, &mut out), NmgStatus::Ok);
        assert_eq!(take(out), a, "same seed, same samples");

        let tpl = CString::new("(cat () ())").unwrap();
        assert_eq!(nmg_complete(m, tpl.as_ptr(), 2, 0, 1.0, true, &mut out), NmgStatus::Ok);
        assert!(take(out).lines().all(|l| l.split(' ').any(|w| w == "cat")));

        let sent = CString::new("the cat sat").unwrap();
        let lr = CString::new("leftright").unwrap();
        assert_eq!(nmg_oracle_rollout(m, sent.as_ptr(), lr.as_ptr(), 0.0, 0, &mut out), NmgStatus::Ok);
        assert_eq!(take(out), "the\n<end>\ncat\n<end>\nsat\n<end>\n<end>");
        nmg_model_free(m);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut m = ptr::null_mut();
        let missing = CString::new("/nonexistent/model.ckpt").unwrap();
        assert_eq!(nmg_model_load(missing.as_ptr(), &mut m), NmgStatus::DataError);
        assert!(m.is_null());
        let msg = CStr::from_ptr(nmg_last_error_message()).to_str().unwrap();
        assert!(msg.contains("nonexistent"), "{msg}");

        assert_eq!(nmg_model_load(ptr::null(), &mut m), NmgStatus::InvalidArgument);
        let mut out = ptr::null_mut();
        assert_eq!(nmg_sample(ptr::null(), 1, 0, 1.0, false, &mut out), NmgStatus::InvalidArgument);
        assert_eq!(nmg_model_vocab_size(ptr::null()), 0);
        nmg_model_free(ptr::null_mut());
        nmg_string_free(ptr::null_mut());
    }
}

#[test]
fn bad_options_are_invalid_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let path = model_file(dir.path());
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(nmg_model_load(path.as_ptr(), &mut m), NmgStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(nmg_sample(m, 0, 0, 1.0, false, &mut out), NmgStatus::InvalidArgument);
        assert_eq!(nmg_sample(m, 1, 0, -1.0, false, &mut out), NmgStatus::InvalidArgument);
        let bad = CString::new("nope").unwrap();
        let s = CString::new("the cat").unwrap();
        assert_eq!(nmg_oracle_rollout(m, s.as_ptr(), bad.as_ptr(), 0.0, 0, &mut out), NmgStatus::InvalidArgument);
        nmg_model_free(m);
    }
}

#[test]
fn bleu_through_the_c_api() {
    let h = CString::new("the cat sat on the mat\na b c d").unwrap();
    let mut score = -1.0;
    unsafe {
        assert_eq!(nmg_bleu(h.as_ptr(), h.as_ptr(), 4, &mut score), NmgStatus::Ok);
        assert!((score - 100.0).abs() < 1e-9);
        let r = CString::new("one line").unwrap();
        assert_eq!(nmg_bleu(h.as_ptr(), r.as_ptr(), 4, &mut score), NmgStatus::InvalidArgument);
        assert!(nmg_last_error_message() != ptr::null());
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/nmgen.h")).unwrap();
    for sym in [
        "nmg_model_load",
        "nmg_model_free",
        "nmg_model_vocab_size",
        "nmg_sample",
        "nmg_complete",
        "nmg_bleu",
        "nmg_oracle_rollout",
        "nmg_string_free",
        "nmg_last_error_message",
        "NMG_STATUS_OK",
        "typedef struct NmgModel NmgModel",
    ] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
}
