use std::path::Path;

use dstorm::checkpoint::{problem_hash, resume, Checkpoint, VERSION};
use dstorm::runner::run_seed;
use dstorm::{parse_config_str, ExperimentSpec, HarnessError};

const BASE: &str = r#"
iterations = 100
record_every = 10

[topology]
kind = "ladder"
agents = 6

[problem]
kind = "logistic"
samples = 180
dim = 5
lambda = 1e-3

[[runs]]
method = "v2"
batch = 4
initial_batch = 8

[[runs]]
method = "v1-sg"
batch = 4
initial_batch = 8

[[runs]]
method = "v1-svrg"
batch = 4
initial_batch = 8
snapshot_period = 7

[[runs]]
method = "dsgt"
batch = 4
initial_batch = 8
"#;

fn spec(iters: usize) -> ExperimentSpec {
    parse_config_str(&BASE.replace("iterations = 100", &format!("iterations = {iters}")), Path::new(".")).unwrap()
}

fn rejected(r: dstorm::Result<impl std::fmt::Debug>) -> String {
    match r {
        Err(HarnessError::Checkpoint(m)) => m,
        other => panic!("expected rejection, got {other:?}"),
    }
}

#[test]
fn split_run_plus_resume_equals_uninterrupted_run() {
    let (full, half) = (spec(100), spec(50));
    for i in 0..full.runs.len() {
        let whole = run_seed(&full, i, 9).unwrap();
        let first = run_seed(&half, i, 9).unwrap();
        // Through the file format.
        let text = first.checkpoint.as_ref().unwrap().to_json();
        let ckpt = Checkpoint::from_json(&text).unwrap();
        assert_eq!(&ckpt, first.checkpoint.as_ref().unwrap());
        let rest = resume(&ckpt, &ckpt.spec().unwrap(), 50).unwrap();

        let expected = whole.checkpoint.unwrap();
        assert_eq!(rest.checkpoint.state, expected.state, "{}", full.runs[i].name);
        assert_eq!(rest.tau, whole.output.as_ref().map(|o| o.0));
        let mut joined = first.trace.clone();
        joined.extend(rest.trace);
        assert_eq!(joined, whole.trace);
        assert_eq!(rest.checkpoint.to_json(), expected.to_json());
    }
}

#[test]
fn resume_with_zero_iterations_is_a_no_op() {
    let s = spec(30);
    let out = run_seed(&s, 2, 1).unwrap();
    let ckpt = out.checkpoint.unwrap();
    let r = resume(&ckpt, &s, 0).unwrap();
    assert!(r.trace.is_empty());
    assert_eq!(r.checkpoint, ckpt);
    assert_eq!(r.tau, out.output.map(|o| o.0));
}

#[test]
fn checkpoint_files_round_trip() {
    let s = spec(20);
    let ckpt = run_seed(&s, 2, 4).unwrap().checkpoint.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ckpt);
    let bits = |c: &Checkpoint| c.state.d.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&ckpt));
    assert_eq!(back.spec().unwrap(), s);
}

#[test]
fn different_problem_is_rejected() {
    let s = spec(20);
    let ckpt = run_seed(&s, 0, 4).unwrap().checkpoint.unwrap();
    let other = parse_config_str(&BASE.replace("lambda = 1e-3", "lambda = 2e-3"), Path::new(".")).unwrap();
    assert_ne!(problem_hash(&s.problem, &s.mixing), problem_hash(&other.problem, &other.mixing));
    assert!(rejected(resume(&ckpt, &other, 5)).contains("problem hash mismatch"));
    let rewired = parse_config_str(&BASE.replace("\"ladder\"", "\"ring\""), Path::new(".")).unwrap();
    assert!(rejected(resume(&ckpt, &rewired, 5)).contains("problem hash mismatch"));

    let mut forged = ckpt.clone();
    forged.problem_hash = "0".repeat(64);
    assert!(rejected(forged.spec()).contains("problem hash mismatch"));
}

#[test]
fn version_mismatch_is_rejected() {
    let text = run_seed(&spec(10), 0, 0).unwrap().checkpoint.unwrap().to_json();
    let bumped = text.replacen(&format!("\"version\":{VERSION}"), "\"version\":99", 1);
    assert_ne!(bumped, text);
    let m = rejected(Checkpoint::from_json(&bumped));
    assert!(m.contains("version mismatch") && m.contains("99"), "{m}");
}

#[test]
fn corruption_is_rejected() {
    let text = run_seed(&spec(10), 1, 0).unwrap().checkpoint.unwrap().to_json();
    // Change one digit inside the payload.
    let at = text.find("\"x\":{").unwrap() + 30;
    let pos = at + text[at..].find(|c: char| c.is_ascii_digit() && c != '9').unwrap();
    let mut bytes = text.clone().into_bytes();
    bytes[pos] += 1;
    let flipped = String::from_utf8(bytes).unwrap();
    assert!(rejected(Checkpoint::from_json(&flipped)).contains("digest mismatch"));

    assert!(rejected(Checkpoint::from_json(&text[..text.len() / 2])).contains("corrupted"));
    assert!(rejected(Checkpoint::from_json("{}")).contains("corrupted"));
    let wrong = text.replacen("dstorm-checkpoint", "something-else", 1);
    assert!(rejected(Checkpoint::from_json(&wrong)).contains("format"));
}
