use std::fs;
use std::path::Path;

use proptest::prelude::*;
use taskcorpus_core::corpus::{build_seed_corpus_with, SeedCorpus};
use taskcorpus_core::metrics::novelty_rate;
use taskcorpus_core::template::{bundled_rules, bundled_templates};
use taskcorpus_core::{CyclePolicy, Lexicon};
use taskcorpus_pipeline::run::{LOCK_FILE, NOT_CONVERGED_FILE};
use taskcorpus_pipeline::{diff_corpora, run_pipeline, AcceptAll, PipelineConfig, PipelineError, ScriptedDecisions};

fn quick(out: &Path) -> PipelineConfig {
    PipelineConfig {
        scale_limit: 30,
        fresh_mrs: 10,
        epochs: 40,
        epoch_increment: 5,
        embed_dim: 12,
        hidden: 12,
        decoder_hidden: 12,
        min_novelty: 0.0,
        min_validity: 0.0,
        min_distinct_2: 0.0,
        max_outer_iterations: 0,
        output_dir: out.to_path_buf(),
        ..PipelineConfig::default()
    }
}

#[test]
fn zero_retries_with_open_thresholds_returns_first_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(dir.path());
    let art = run_pipeline(&cfg, &mut AcceptAll).unwrap();
    assert_eq!(art.iteration_log.len(), 1);
    assert!(art.iteration_log[0].passed);
    assert_eq!(art.seed.len(), 30);
    assert_eq!(art.report.corpus_size, art.generated.len());
    for f in [
        "config.txt",
        "seed.corpus",
        "seed.ledger",
        "reviewed.corpus",
        "model.bin",
        "generated.corpus",
        "report.txt",
        "report.json",
        "iteration_log.tsv",
        "iter-0/loss.tsv",
    ] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    assert!(!dir.path().join(LOCK_FILE).exists());
    assert!(!dir.path().join(NOT_CONVERGED_FILE).exists());
    let saved = SeedCorpus::load(dir.path().join("generated.corpus")).unwrap();
    assert_eq!(saved, art.generated);
    let cfg_back = PipelineConfig::from_file(&dir.path().join("config.txt")).unwrap();
    assert_eq!(cfg_back.digest(), cfg.digest());
}

#[test]
fn unreachable_novelty_reports_every_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        // An undertrained model cannot be both fully novel and fully valid.
        min_novelty: 1.0,
        min_validity: 1.0,
        fresh_mrs: 0,
        max_outer_iterations: 2,
        ..quick(dir.path())
    };
    let err = run_pipeline(&cfg, &mut AcceptAll).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let PipelineError::NotConverged { log } = &err else {
        panic!("expected non-convergence, got {err}");
    };
    assert_eq!(log.len(), 3);
    let epochs: Vec<usize> = log.iter().map(|r| r.epochs_total).collect();
    assert_eq!(epochs, [40, 45, 50]);
    assert!(log.iter().all(|r| !r.passed));
    let temps: Vec<String> = log.iter().map(|r| r.decoding.to_string()).collect();
    assert!(
        temps[0].starts_with("sample:0.8") && temps[1].starts_with("sample:1"),
        "{temps:?}"
    );
    assert!(dir.path().join(NOT_CONVERGED_FILE).is_file());
    let table = fs::read_to_string(dir.path().join("iteration_log.tsv")).unwrap();
    assert_eq!(table.lines().filter(|l| l.ends_with("\tfalse")).count(), 3);
    assert!(!dir.path().join(LOCK_FILE).exists());
}

#[test]
fn locked_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join(LOCK_FILE), "").unwrap();
    let err = run_pipeline(&quick(dir.path()), &mut AcceptAll).unwrap_err();
    assert!(matches!(err, PipelineError::Locked(_)), "{err}");
    assert!(dir.path().join(LOCK_FILE).exists());
    assert!(!dir.path().join("seed.corpus").exists());
}

#[test]
fn interrupted_review_resumes_from_the_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(dir.path());
    let mut partial = ScriptedDecisions::parse("0\taccept\n1\treject\n2\taccept\n").unwrap();
    let err = run_pipeline(&cfg, &mut partial).unwrap_err();
    assert!(matches!(err, PipelineError::Review(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
    assert!(!dir.path().join("model.bin").exists());

    let mut rest = ScriptedDecisions::parse("*\taccept\n1\taccept\n").unwrap();
    let art = run_pipeline(&cfg, &mut rest).unwrap();
    // The earlier reject stands; item 1 was not asked again.
    assert_eq!(art.seed.len(), 30);
    assert_eq!(art.seed.usable().count(), 29);
    assert!(art.seed.usable().all(|i| i.id != 1));
}

#[test]
fn diff_matches_novelty() {
    let dir = tempfile::tempdir().unwrap();
    let art = run_pipeline(&quick(dir.path()), &mut AcceptAll).unwrap();
    let generated = art.generated.token_sequences();
    let seed: Vec<Vec<String>> = art.seed.usable().map(|i| i.sentence.tokens().to_vec()).collect();
    let d = diff_corpora(&generated, &seed);
    let (only_generated, _, common) = d.counts();
    assert_eq!(only_generated + common, generated.len());
    assert!((novelty_rate(&generated, &seed) - only_generated as f64 / generated.len() as f64).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn diff_partitions_both_corpora(a_limit in 1usize..60, b_limit in 1usize..60, sa in 0u64..50, sb in 0u64..50) {
        let build = |limit, seed| {
            build_seed_corpus_with(&bundled_templates(), &Lexicon::bundled(), CyclePolicy::RoundRobin(12), Some(&bundled_rules()), limit, seed)
                .unwrap()
                .token_sequences()
        };
        let (a, b) = (build(a_limit, sa), build(b_limit, sb));
        let d = diff_corpora(&a, &b);
        let (oa, ob, common) = d.counts();
        prop_assert_eq!(oa + common, a.len());
        prop_assert_eq!(ob + common, b.len());
        prop_assert!((novelty_rate(&a, &b) - oa as f64 / a.len() as f64).abs() < 1e-12);
        let swapped = diff_corpora(&b, &a);
        prop_assert_eq!(swapped.counts(), (ob, oa, common));
    }
}
