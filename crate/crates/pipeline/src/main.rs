use std::io::{self, IsTerminal};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use taskcorpus_core::corpus::{apply_review, export_training_pairs, SeedCorpus};
use taskcorpus_core::metrics::corpus_report;
use taskcorpus_nlg::{load_model, train, NlgModel};
use taskcorpus_pipeline::run::{self, StageSeeds};
use taskcorpus_pipeline::{
    diff_corpora, review_with_ledger_file, AcceptAll, PipelineConfig, PipelineError, ReviewDecisionSource,
    ScriptedDecisions, TerminalReview,
};

#[derive(Parser)]
#[command(
    name = "taskcorpus",
    version,
    about = "Build task-oriented text corpora from templates and a neural generator"
)]
struct Cli {
    /// `key = value` file supplying defaults; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: ConfigFlags,
    #[command(subcommand)]
    command: Command,
}

/// Mirrors the configuration keys. Values are parsed by the config layer.
#[derive(Args, Default)]
struct ConfigFlags {
    /// Lexicon file (`bundled` for the built-in one).
    #[arg(long, global = true)]
    lexicon: Option<String>,
    /// Comma-separated template files (`bundled` for the built-in set).
    #[arg(long, global = true)]
    templates: Option<String>,
    #[arg(long, global = true)]
    augmentation_rules: Option<String>,
    /// `true` or `false`.
    #[arg(long, global = true)]
    augment: Option<String>,
    /// `full` or `round-robin:N`.
    #[arg(long, global = true)]
    cycle_policy: Option<String>,
    #[arg(long, global = true)]
    scale_limit: Option<String>,
    #[arg(long, global = true)]
    min_seed_coverage: Option<String>,
    #[arg(long, global = true)]
    max_scale_retries: Option<String>,
    #[arg(long, global = true)]
    embed_dim: Option<String>,
    #[arg(long, global = true)]
    hidden: Option<String>,
    #[arg(long, global = true)]
    decoder_hidden: Option<String>,
    /// `context` or `state+context`.
    #[arg(long, global = true)]
    logits_from: Option<String>,
    #[arg(long, global = true)]
    learning_rate: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<String>,
    #[arg(long, global = true)]
    batch_size: Option<String>,
    #[arg(long, global = true)]
    clip_norm: Option<String>,
    /// Root seed for every random choice.
    #[arg(long = "seed", global = true)]
    rng_seed: Option<String>,
    /// `greedy`, `sample:T[:SEED]` or `beam:W`.
    #[arg(long, global = true)]
    decoding: Option<String>,
    #[arg(long, global = true)]
    max_len: Option<String>,
    #[arg(long, global = true)]
    fresh_mrs: Option<String>,
    #[arg(long, global = true)]
    min_novelty: Option<String>,
    #[arg(long, global = true)]
    min_validity: Option<String>,
    #[arg(long = "min-distinct-2", global = true)]
    min_distinct_2: Option<String>,
    #[arg(long, global = true)]
    max_outer_iterations: Option<String>,
    #[arg(long, global = true)]
    temperature_delta: Option<String>,
    #[arg(long, global = true)]
    epoch_increment: Option<String>,
    /// Output directory.
    #[arg(long = "out", global = true)]
    output_dir: Option<String>,
}

impl ConfigFlags {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("lexicon", &self.lexicon),
            ("templates", &self.templates),
            ("augmentation_rules", &self.augmentation_rules),
            ("augment", &self.augment),
            ("cycle_policy", &self.cycle_policy),
            ("scale_limit", &self.scale_limit),
            ("min_seed_coverage", &self.min_seed_coverage),
            ("max_scale_retries", &self.max_scale_retries),
            ("embed_dim", &self.embed_dim),
            ("hidden", &self.hidden),
            ("decoder_hidden", &self.decoder_hidden),
            ("logits_from", &self.logits_from),
            ("learning_rate", &self.learning_rate),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("clip_norm", &self.clip_norm),
            ("rng_seed", &self.rng_seed),
            ("decoding", &self.decoding),
            ("max_len", &self.max_len),
            ("fresh_mrs", &self.fresh_mrs),
            ("min_novelty", &self.min_novelty),
            ("min_validity", &self.min_validity),
            ("min_distinct_2", &self.min_distinct_2),
            ("max_outer_iterations", &self.max_outer_iterations),
            ("temperature_delta", &self.temperature_delta),
            ("epoch_increment", &self.epoch_increment),
            ("output_dir", &self.output_dir),
        ]
    }
}

#[derive(Args)]
struct DecisionFlags {
    /// Decision script (`id<TAB>accept|reject|skip[<TAB>note]`, `*` for the default).
    #[arg(long, conflicts_with = "accept_all")]
    script: Option<PathBuf>,
    /// Accept every item without prompting.
    #[arg(long)]
    accept_all: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Expand templates into a scale-controlled seed corpus.
    SeedGen {
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Review seed items and apply the decisions.
    Review {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Where to write the corpus with decisions applied.
        #[arg(long)]
        reviewed: Option<PathBuf>,
        #[command(flatten)]
        decisions: DecisionFlags,
    },
    /// Train the generator on a reviewed corpus.
    Train {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        loss_trace: Option<PathBuf>,
    },
    /// Generate a corpus from accepted and unseen meaning representations.
    Generate {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Reviewed seed corpus supplying the seen MRs.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a corpus (diversity, novelty against a seed corpus, validity, coverage).
    Evaluate {
        corpus: PathBuf,
        #[arg(long)]
        seed_corpus: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Run every stage, retrying training and generation until the metric gate passes.
    Pipeline {
        #[command(flatten)]
        decisions: DecisionFlags,
    },
    /// Compare two corpora as sets of token sequences.
    Diff {
        a: PathBuf,
        b: PathBuf,
        /// Print the sentences in each group, not just the counts.
        #[arg(long)]
        list: bool,
    },
}

fn resolve_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    for (key, value) in cli.flags.pairs() {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn decision_source(flags: &DecisionFlags) -> Result<Box<dyn ReviewDecisionSource>, PipelineError> {
    if flags.accept_all {
        return Ok(Box::new(AcceptAll));
    }
    if let Some(p) = &flags.script {
        return Ok(Box::new(ScriptedDecisions::load(p)?));
    }
    if !io::stdin().is_terminal() {
        eprintln!("note: reading review answers from non-interactive stdin");
    }
    Ok(Box::new(TerminalReview::new(io::stdin().lock(), io::stderr())))
}

fn or_default(p: &Option<PathBuf>, cfg: &PipelineConfig, name: &str) -> PathBuf {
    p.clone().unwrap_or_else(|| cfg.output_dir.join(name))
}

fn ensure_parent(path: &Path) -> Result<(), PipelineError> {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => std::fs::create_dir_all(d).map_err(|e| PipelineError::io(d, e)),
        _ => Ok(()),
    }
}

fn execute(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::SeedGen { output } => {
            let res = run::load_resources(&cfg)?;
            let stage = run::build_seed(&cfg, &res)?;
            let out = or_default(output, &cfg, "seed.corpus");
            ensure_parent(&out)?;
            stage.corpus.save(&out)?;
            for (scale, coverage) in &stage.attempts {
                println!("scale_limit {scale}: vocab coverage {coverage:.4}");
            }
            println!("wrote {} items to {}", stage.corpus.len(), out.display());
        }
        Command::Review {
            corpus,
            ledger,
            reviewed,
            decisions,
        } => {
            let res = run::load_resources(&cfg)?;
            let corpus = SeedCorpus::load(or_default(corpus, &cfg, "seed.corpus"))?;
            let ledger_path = or_default(ledger, &cfg, "seed.ledger");
            ensure_parent(&ledger_path)?;
            let mut source = decision_source(decisions)?;
            let (ledger, outcome) = review_with_ledger_file(&corpus, &res.lexicon, source.as_mut(), &ledger_path)?;
            let applied = apply_review(&corpus, &ledger)?;
            let out = or_default(reviewed, &cfg, "reviewed.corpus");
            applied.save(&out)?;
            println!(
                "recorded {} decision(s); {} of {} items decided{}",
                outcome.recorded,
                ledger.len(),
                corpus.len(),
                if outcome.completed {
                    ""
                } else {
                    " (interrupted, rerun to resume)"
                }
            );
            println!("wrote {}", out.display());
        }
        Command::Train {
            corpus,
            model,
            loss_trace,
        } => {
            let res = run::load_resources(&cfg)?;
            let corpus = SeedCorpus::load(or_default(corpus, &cfg, "reviewed.corpus"))?;
            let pairs = export_training_pairs(&corpus)?;
            let mut model_cfg = cfg.model_config();
            model_cfg.output_language = res.lexicon.language();
            let seeds = StageSeeds::new(cfg.rng_seed);
            let mut m = NlgModel::for_pairs(model_cfg, &pairs, seeds.model_init)?;
            let encoded: Vec<_> = pairs.iter().map(|p| m.encode_pair(p)).collect();
            let trace = train(
                &mut m,
                &encoded,
                &cfg.train_config(cfg.epochs, StageSeeds::train(cfg.rng_seed, 0)),
            )?;
            let model_path = or_default(model, &cfg, "model.bin");
            ensure_parent(&model_path)?;
            let f = std::fs::File::create(&model_path).map_err(|e| PipelineError::io(&model_path, e))?;
            taskcorpus_nlg::save_model(&m, io::BufWriter::new(f))?;
            let trace_path = or_default(loss_trace, &cfg, "loss.tsv");
            let mut buf = Vec::new();
            trace
                .write_to(&mut buf)
                .map_err(|e| PipelineError::io(&trace_path, e))?;
            std::fs::write(&trace_path, buf).map_err(|e| PipelineError::io(&trace_path, e))?;
            println!(
                "trained on {} pairs for {} epochs; final loss {}",
                encoded.len(),
                trace.len(),
                trace.last().map_or("-".into(), |l| format!("{l:.6}"))
            );
            println!("wrote {} and {}", model_path.display(), trace_path.display());
        }
        Command::Generate { model, corpus, output } => {
            let res = run::load_resources(&cfg)?;
            let model_path = or_default(model, &cfg, "model.bin");
            let m = load_model(std::fs::File::open(&model_path).map_err(|e| PipelineError::io(&model_path, e))?)?;
            let reviewed = SeedCorpus::load(or_default(corpus, &cfg, "reviewed.corpus"))?;
            let mrs = run::generation_mrs(&cfg, &res, &reviewed)?;
            let generated = run::generate_corpus(
                &m,
                &mrs,
                run::decoding_for(&cfg, 0),
                cfg.max_len,
                "generate",
                &reviewed.provenance,
            )?;
            let out = or_default(output, &cfg, "generated.corpus");
            ensure_parent(&out)?;
            generated.save(&out)?;
            println!(
                "generated {} distinct sentences from {} MRs into {}",
                generated.len(),
                mrs.len(),
                out.display()
            );
        }
        Command::Evaluate {
            corpus,
            seed_corpus,
            json,
        } => {
            let res = run::load_resources(&cfg)?;
            let generated = SeedCorpus::load(corpus)?.token_sequences();
            let seed = match seed_corpus {
                Some(p) => SeedCorpus::load(p)?.token_sequences(),
                None => Vec::new(),
            };
            let report = corpus_report(&seed, &generated, &res.templates, &res.lexicon);
            if *json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("metrics report serializes")
                );
            } else {
                print!("{}", report.to_key_value());
            }
        }
        Command::Pipeline { decisions } => {
            let mut source = decision_source(decisions)?;
            let artifact = taskcorpus_pipeline::run_pipeline(&cfg, source.as_mut())?;
            for r in &artifact.iteration_log {
                println!(
                    "iteration {}: epochs {} decoding {} -> {} sentences, distinct_2 {:.4}, novelty {:.4}, validity {:.4}",
                    r.iteration,
                    r.epochs_total,
                    r.decoding,
                    r.report.corpus_size,
                    r.report.distinct_2,
                    r.report.novelty_rate,
                    r.report.validity_rate
                );
            }
            println!("converged; outputs in {}", cfg.output_dir.display());
        }
        Command::Diff { a, b, list } => {
            let ca = SeedCorpus::load(a)?;
            let cb = SeedCorpus::load(b)?;
            let d = diff_corpora(&ca.token_sequences(), &cb.token_sequences());
            let (oa, ob, common) = d.counts();
            println!("only_in_a\t{oa}\nonly_in_b\t{ob}\ncommon\t{common}");
            if *list {
                for (label, group) in [("<", &d.only_in_a), (">", &d.only_in_b), ("=", &d.common)] {
                    for s in group {
                        println!("{label} {}", s.join(" "));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Exit code for command-line usage errors. Clap's own default (2) would
/// collide with non-convergence.
const USAGE_EXIT: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE_EXIT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
