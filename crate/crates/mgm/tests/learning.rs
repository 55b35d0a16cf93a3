//! Desk-scale branch training: overfit a copy branch, learn a fixed
//! transposition, and stay deterministic.

use motif_core::synth::Transform;
use motif_mgm::branch::{fragment_content, pair_example, train_branch};
use motif_mgm::checkpoint::{load_branches, load_model, save_branches, save_model};
use motif_mgm::data::pairs_with;
use motif_mgm::train::token_accuracy;
use motif_mgm::{generate_variants, BranchModel, ModelConfig, SamplingConfig};

#[test]
fn copy_branch_overfits_and_reproduces_its_motifs() {
    let pairs = pairs_with(11, 50, |_| Transform::Copy).unwrap();
    let examples: Vec<_> = pairs.iter().map(|(m, v)| pair_example(m, v)).collect();
    let cfg = ModelConfig { epochs: 200, seed: 1, ..ModelConfig::desk() };
    let mut reached = None;
    let trained = train_branch(&pairs, &cfg, |_, _| {}, |m, e, _| {
        let acc = token_accuracy(m, &examples).unwrap();
        if acc >= 0.99 && reached.is_none() {
            reached = Some(e + 1);
        }
        acc == 1.0
    })
    .unwrap();
    let epochs = reached.expect("copy branch below 99% token accuracy after 200 epochs");
    assert!(epochs <= 200);
    assert_eq!(token_accuracy(&trained.model, &examples).unwrap(), 1.0);

    let trace = &trained.trace;
    assert!(trace.iter().all(|l| l.is_finite()));
    let head: f64 = trace[..5].iter().sum();
    let tail: f64 = trace[trace.len() - 5..].iter().sum();
    assert!(tail < head, "loss did not fall: {trace:?}");

    let mut branches = BranchModel::new(&cfg).unwrap();
    branches.branches[0] = trained.model;
    for (motif, _) in &pairs {
        let out = generate_variants(motif, &branches, &SamplingConfig::default()).unwrap();
        assert_eq!(fragment_content(&out.fragments[0]), fragment_content(motif));
        let span = out.layout.spans[1];
        assert_eq!(&out.v[span.start..span.end()], &out.v[..out.layout.spans[0].len]);
        assert!(!out.truncated[0]);
    }
}

#[test]
fn transposition_branch_generalizes() {
    let pairs = pairs_with(21, 600, |_| Transform::Transpose(2)).unwrap();
    let (train_pairs, rest) = pairs.split_at(500);
    let held: Vec<_> = rest
        .iter()
        .filter(|(m, _)| !train_pairs.iter().any(|(t, _)| t == m))
        .map(|(m, v)| pair_example(m, v))
        .collect();
    assert!(held.len() >= 90);
    let cfg = ModelConfig { epochs: 12, seed: 2, ..ModelConfig::desk() };
    let trained = train_branch(train_pairs, &cfg, |_, _| {}, |_, _, _| false).unwrap();
    let acc = token_accuracy(&trained.model, &held).unwrap();
    assert!(acc >= 0.9, "held-out token accuracy {acc}");
}

#[test]
fn training_is_deterministic() {
    let pairs = pairs_with(5, 12, |_| Transform::Invert).unwrap();
    let cfg = ModelConfig { epochs: 3, seed: 9, d_model: 16, d_ff: 32, ..ModelConfig::desk() };
    let a = train_branch(&pairs, &cfg, |_, _| {}, |_, _, _| false).unwrap();
    let b = train_branch(&pairs, &cfg, |_, _| {}, |_, _, _| false).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.model, b.model);
    let c = train_branch(&pairs, &ModelConfig { seed: 10, ..cfg }, |_, _| {}, |_, _, _| false).unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn checkpoints_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ModelConfig { d_model: 16, d_ff: 32, max_len: 64, seed: 4, ..ModelConfig::desk() };
    let branches = BranchModel::new(&cfg).unwrap();
    let path = dir.path().join("branches.ckpt");
    save_branches(&path, &branches).unwrap();
    let back = load_branches(&path).unwrap();
    assert_eq!(back, branches);
    assert!(load_model(&path).is_err());

    let phrase = motif_mgm::Transformer::new(cfg, motif_mgm::DecoderMode::Gated).unwrap();
    let path = dir.path().join("phrase.ckpt");
    save_model(&path, &phrase).unwrap();
    assert_eq!(load_model(&path).unwrap(), phrase);
    assert!(load_branches(&path).is_err());
}
