//! The whole loop end to end.
//!
//! Output directory layout:
//!
//! ```text
//! pipeline.lock            held while a run owns the directory
//! config.txt               resolved configuration
//! seed.corpus              seed corpus, before review
//! seed.ledger              review ledger (append-only)
//! reviewed.corpus          seed corpus with the ledger applied
//! iter-<k>/model.bin       model after iteration k
//! iter-<k>/loss.tsv        loss trace of iteration k's training
//! iter-<k>/generated.corpus
//! iter-<k>/report.txt, iter-<k>/report.json
//! model.bin, generated.corpus, report.txt, report.json   final iteration
//! iteration_log.tsv        digest, seeds and per-iteration reports
//! NOT_CONVERGED            present only when the metric gate never passed
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use taskcorpus_core::corpus::{
    apply_review, build_seed_corpus_with, derive_seed, expansion_pool, export_training_pairs, ReviewLedger,
    ReviewState, SeedCorpus,
};
use taskcorpus_core::metrics::{corpus_report, vocab_coverage, MetricsReport};
use taskcorpus_core::template::{bundled_rules, bundled_templates, parse_template_file, AugmentationRuleSet};
use taskcorpus_core::{load_lexicon, Lexicon, MeaningRepresentation, Template};
use taskcorpus_nlg::{generate, save_model, train, DecodeStrategy, LossTrace, NlgModel};

use crate::config::PipelineConfig;
use crate::error::PipelineError;
use crate::review::{review_with_ledger_file, ReviewDecisionSource};

pub const LOCK_FILE: &str = "pipeline.lock";
pub const NOT_CONVERGED_FILE: &str = "NOT_CONVERGED";

/// Lexicon, templates and augmentation rules.
#[derive(Debug, Clone)]
pub struct Resources {
    pub lexicon: Lexicon,
    pub templates: Vec<Template>,
    pub rules: Option<AugmentationRuleSet>,
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    fs::write(path, contents).map_err(|e| PipelineError::io(path, e))
}

pub fn load_resources(cfg: &PipelineConfig) -> Result<Resources, PipelineError> {
    let lexicon = match &cfg.lexicon_path {
        Some(p) => load_lexicon(fs::File::open(p).map_err(|e| PipelineError::io(p, e))?)?,
        None => Lexicon::bundled(),
    };
    let templates = if cfg.template_paths.is_empty() {
        bundled_templates()
    } else {
        let mut all = Vec::new();
        for p in &cfg.template_paths {
            all.extend(parse_template_file(&read(p)?)?);
        }
        all
    };
    let rules = match (&cfg.augmentation_rules_path, cfg.augment) {
        (_, false) => None,
        (Some(p), true) => Some(AugmentationRuleSet::parse(&read(p)?)?),
        (None, true) => Some(bundled_rules()),
    };
    Ok(Resources {
        lexicon,
        templates,
        rules,
    })
}

/// Seeds for every stage, all derived from the root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSeeds {
    pub seed_corpus: u64,
    pub model_init: u64,
    pub fresh_mrs: u64,
}

impl StageSeeds {
    pub fn new(root: u64) -> Self {
        Self {
            seed_corpus: derive_seed(root, "seed-corpus"),
            model_init: derive_seed(root, "model-init"),
            fresh_mrs: derive_seed(root, "fresh-mrs"),
        }
    }

    pub fn train(root: u64, iteration: usize) -> u64 {
        derive_seed(root, &format!("train/{iteration}"))
    }
}

#[derive(Debug, Clone)]
pub struct SeedStage {
    pub corpus: SeedCorpus,
    /// `(scale_limit, vocab coverage)` of each build attempt.
    pub attempts: Vec<(usize, f64)>,
}

/// Seed corpus with the scale gate. The gate is a heuristic: while lexicon coverage stays
/// under `min_seed_coverage`, double the scale and rebuild, at most
/// `max_scale_retries` times or until the expansion pool is exhausted.
pub fn build_seed(cfg: &PipelineConfig, res: &Resources) -> Result<SeedStage, PipelineError> {
    let seeds = StageSeeds::new(cfg.rng_seed);
    let mut scale = cfg.scale_limit;
    let mut attempts = Vec::new();
    loop {
        let corpus = build_seed_corpus_with(
            &res.templates,
            &res.lexicon,
            cfg.cycle_policy,
            res.rules.as_ref(),
            scale,
            seeds.seed_corpus,
        )?;
        let coverage = vocab_coverage(&corpus.token_sequences(), &res.lexicon);
        attempts.push((scale, coverage));
        let exhausted = corpus.len() < scale;
        if coverage >= cfg.min_seed_coverage || exhausted || attempts.len() > cfg.max_scale_retries {
            return Ok(SeedStage { corpus, attempts });
        }
        scale = scale.saturating_mul(2);
    }
}

/// Generation inputs: every accepted seed MR, then up to `fresh_mrs` expansions
/// that are not in the seed corpus, sampled uniformly and kept in pool order.
pub fn generation_mrs(
    cfg: &PipelineConfig,
    res: &Resources,
    reviewed: &SeedCorpus,
) -> Result<Vec<MeaningRepresentation>, PipelineError> {
    let seeds = StageSeeds::new(cfg.rng_seed);
    let mut mrs: Vec<MeaningRepresentation> = reviewed
        .items
        .iter()
        .filter(|i| i.review == ReviewState::Accepted)
        .map(|i| i.mr.clone())
        .collect();
    if cfg.fresh_mrs == 0 {
        return Ok(mrs);
    }
    let in_seed: HashSet<Vec<String>> = reviewed.token_sequences().into_iter().collect();
    let pool = expansion_pool(
        &res.templates,
        &res.lexicon,
        cfg.cycle_policy,
        res.rules.as_ref(),
        seeds.seed_corpus,
    )?;
    let fresh: Vec<MeaningRepresentation> = pool
        .into_iter()
        .filter(|(_, s)| !in_seed.contains(s.tokens()))
        .map(|(mr, _)| mr)
        .collect();
    let take = cfg.fresh_mrs.min(fresh.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.fresh_mrs);
    let mut picks = rand::seq::index::sample(&mut rng, fresh.len(), take).into_vec();
    picks.sort_unstable();
    mrs.extend(picks.into_iter().map(|i| fresh[i].clone()));
    Ok(mrs)
}

/// One sentence per MR. Sampling seeds are derived per MR from the
/// strategy's seed and `label`; empty outputs are dropped, duplicates merged.
pub fn generate_corpus(
    model: &NlgModel,
    mrs: &[MeaningRepresentation],
    strategy: DecodeStrategy,
    max_len: usize,
    label: &str,
    provenance: &str,
) -> Result<SeedCorpus, PipelineError> {
    let mut out = Vec::with_capacity(mrs.len());
    for (i, mr) in mrs.iter().enumerate() {
        let s = match strategy {
            DecodeStrategy::Sample { temperature, rng_seed } => DecodeStrategy::Sample {
                temperature,
                rng_seed: derive_seed(rng_seed, &format!("{label}/{i}")),
            },
            other => other,
        };
        let g = generate(model, &mr.linearize(), s, max_len)?;
        if !g.sentence.is_empty() {
            out.push((mr.clone(), g.sentence));
        }
    }
    Ok(SeedCorpus::from_pairs(model.config.output_language, provenance, out))
}

/// Metric gate.
pub fn meets_thresholds(cfg: &PipelineConfig, r: &MetricsReport) -> bool {
    r.corpus_size > 0
        && r.novelty_rate >= cfg.min_novelty
        && r.validity_rate >= cfg.min_validity
        && r.distinct_2 >= cfg.min_distinct_2
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Total epochs the model has seen after this iteration.
    pub epochs_total: usize,
    pub train_seed: u64,
    pub decoding: DecodeStrategy,
    pub final_loss: Option<f64>,
    pub report: MetricsReport,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct CorpusArtifact {
    /// Seed corpus with review decisions applied.
    pub seed: SeedCorpus,
    pub model_path: PathBuf,
    pub generated: SeedCorpus,
    pub report: MetricsReport,
    pub iteration_log: Vec<IterationRecord>,
}

struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(dir.to_owned())),
            Err(e) => Err(PipelineError::io(&path, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Decoding strategy for gate iteration `iteration`.
pub fn decoding_for(cfg: &PipelineConfig, iteration: usize) -> DecodeStrategy {
    match cfg.decoding {
        DecodeStrategy::Sample { temperature, rng_seed } => DecodeStrategy::Sample {
            temperature: temperature + cfg.temperature_delta * iteration as f64,
            rng_seed: derive_seed(cfg.rng_seed, &format!("decode/{rng_seed}")),
        },
        other => other,
    }
}

fn write_report(dir: &Path, r: &MetricsReport) -> Result<(), PipelineError> {
    write(&dir.join("report.txt"), r.to_key_value())?;
    let json = serde_json::to_string_pretty(r).expect("metrics report serializes");
    write(&dir.join("report.json"), json + "\n")
}

fn write_loss(path: &Path, trace: &LossTrace) -> Result<(), PipelineError> {
    let mut buf = Vec::new();
    trace.write_to(&mut buf).map_err(|e| PipelineError::io(path, e))?;
    write(path, buf)
}

fn save_model_file(path: &Path, model: &NlgModel) -> Result<(), PipelineError> {
    let f = fs::File::create(path).map_err(|e| PipelineError::io(path, e))?;
    save_model(model, std::io::BufWriter::new(f))?;
    Ok(())
}

fn iteration_log_text(
    cfg: &PipelineConfig,
    seed: &SeedStage,
    ledger: &ReviewLedger,
    log: &[IterationRecord],
) -> String {
    let seeds = StageSeeds::new(cfg.rng_seed);
    let mut out = String::from("#taskcorpus iteration log v1\n");
    let _ = writeln!(out, "config_digest\t{}", cfg.digest());
    let _ = writeln!(out, "root_seed\t{}", cfg.rng_seed);
    let _ = writeln!(out, "seed_corpus_seed\t{}", seeds.seed_corpus);
    let _ = writeln!(out, "model_init_seed\t{}", seeds.model_init);
    let _ = writeln!(out, "fresh_mrs_seed\t{}", seeds.fresh_mrs);
    let attempts: Vec<String> = seed.attempts.iter().map(|(s, c)| format!("{s}:{c}")).collect();
    let _ = writeln!(out, "scale_attempts\t{}", attempts.join(","));
    let _ = writeln!(
        out,
        "seed_corpus\tseed.corpus\t{}\t{}",
        seed.corpus.provenance,
        seed.corpus.len()
    );
    let ledger_digest = hex::encode(Sha256::digest(ledger.to_record_string().as_bytes()));
    let _ = writeln!(out, "ledger\tseed.ledger\t{}\t{ledger_digest}", ledger.len());
    out.push_str(
        "iteration\tepochs_total\ttrain_seed\tdecoding\tfinal_loss\tdistinct_1\tdistinct_2\tnovelty_rate\tvalidity_rate\tvocab_coverage\tcorpus_size\tpassed\n",
    );
    for r in log {
        let loss = r.final_loss.map_or("-".to_owned(), |l| l.to_string());
        let m = &r.report;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{loss}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.iteration,
            r.epochs_total,
            r.train_seed,
            r.decoding,
            m.distinct_1,
            m.distinct_2,
            m.novelty_rate,
            m.validity_rate,
            m.vocab_coverage,
            m.corpus_size,
            r.passed
        );
    }
    out
}

/// Runs every stage, persisting every intermediate artifact under
/// `cfg.output_dir`. Gate retries continue training the same model for
/// `epoch_increment` more epochs and raise the sampling temperature by
/// `temperature_delta`, at most `max_outer_iterations` times.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    source: &mut dyn ReviewDecisionSource,
) -> Result<CorpusArtifact, PipelineError> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    let _lock = DirLock::acquire(&dir)?;
    write(&dir.join("config.txt"), cfg.to_text())?;

    // Seed corpus.
    let res = load_resources(cfg)?;
    let seed = build_seed(cfg, &res)?;
    let seed_path = dir.join("seed.corpus");
    let ledger_path = dir.join("seed.ledger");
    // A ledger only carries over when it was made for this exact seed corpus.
    let same_seed = SeedCorpus::load(&seed_path)
        .map(|old| old == seed.corpus)
        .unwrap_or(false);
    if !same_seed && ledger_path.exists() {
        fs::remove_file(&ledger_path).map_err(|e| PipelineError::io(&ledger_path, e))?;
    }
    seed.corpus.save(&seed_path)?;

    // Review.
    let (ledger, outcome) = review_with_ledger_file(&seed.corpus, &res.lexicon, source, &ledger_path)?;
    if !outcome.completed {
        return Err(PipelineError::Review(format!(
            "review interrupted with {} of {} items decided; rerun to resume",
            ledger.len(),
            seed.corpus.len()
        )));
    }
    let reviewed = apply_review(&seed.corpus, &ledger)?;
    reviewed.save(dir.join("reviewed.corpus"))?;

    // Training setup.
    let seeds = StageSeeds::new(cfg.rng_seed);
    let pairs = export_training_pairs(&reviewed)?;
    let mut model_cfg = cfg.model_config();
    model_cfg.output_language = res.lexicon.language();
    let mut model = NlgModel::for_pairs(model_cfg, &pairs, seeds.model_init)?;
    let encoded: Vec<_> = pairs.iter().map(|p| model.encode_pair(p)).collect();
    let mrs = generation_mrs(cfg, &res, &reviewed)?;
    let seed_tokens = reviewed
        .usable()
        .map(|i| i.sentence.tokens().to_vec())
        .collect::<Vec<_>>();

    let mut log: Vec<IterationRecord> = Vec::new();
    let mut epochs_total = 0;
    let mut last: Option<SeedCorpus> = None;
    for iteration in 0..=cfg.max_outer_iterations {
        let step = (|| -> Result<(SeedCorpus, IterationRecord), PipelineError> {
            // Train.
            let epochs = if iteration == 0 {
                cfg.epochs
            } else {
                cfg.epoch_increment
            };
            let train_seed = StageSeeds::train(cfg.rng_seed, iteration);
            let trace = train(&mut model, &encoded, &cfg.train_config(epochs, train_seed))?;
            epochs_total += epochs;
            let it_dir = dir.join(format!("iter-{iteration}"));
            fs::create_dir_all(&it_dir).map_err(|e| PipelineError::io(&it_dir, e))?;
            save_model_file(&it_dir.join("model.bin"), &model)?;
            write_loss(&it_dir.join("loss.tsv"), &trace)?;

            // Generate.
            let decoding = decoding_for(cfg, iteration);
            let provenance = hex::encode(&Sha256::digest(format!("{}/{iteration}", cfg.digest()).as_bytes())[..16]);
            let generated = generate_corpus(
                &model,
                &mrs,
                decoding,
                cfg.max_len,
                &format!("iter-{iteration}"),
                &provenance,
            )?;
            generated.save(it_dir.join("generated.corpus"))?;

            // Score against the gate.
            let report = corpus_report(&seed_tokens, &generated.token_sequences(), &res.templates, &res.lexicon);
            write_report(&it_dir, &report)?;
            let passed = meets_thresholds(cfg, &report);
            Ok((
                generated,
                IterationRecord {
                    iteration,
                    epochs_total,
                    train_seed,
                    decoding,
                    final_loss: trace.last(),
                    report,
                    passed,
                },
            ))
        })()
        .map_err(|e| e.at_iteration(iteration))?;
        let (generated, record) = step;
        let passed = record.passed;
        log.push(record);
        last = Some(generated);
        write(
            &dir.join("iteration_log.tsv"),
            iteration_log_text(cfg, &seed, &ledger, &log),
        )?;
        if passed {
            break;
        }
    }

    let generated = last.expect("at least one iteration runs");
    let final_record = log.last().expect("at least one iteration runs");
    let report = final_record.report.clone();
    let model_path = dir.join("model.bin");
    save_model_file(&model_path, &model)?;
    generated.save(dir.join("generated.corpus"))?;
    write_report(&dir, &report)?;

    let marker = dir.join(NOT_CONVERGED_FILE);
    if !final_record.passed {
        let err = PipelineError::NotConverged { log };
        write(&marker, format!("{err}\n"))?;
        return Err(err);
    }
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| PipelineError::io(&marker, e))?;
    }
    Ok(CorpusArtifact {
        seed: reviewed,
        model_path,
        generated,
        report,
        iteration_log: log,
    })
}
