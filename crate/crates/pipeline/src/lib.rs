//! Orchestration of the full corpus-construction loop: template seed
//! generation with a scale gate, manual review, neural training, generation
//! over seen and unseen meaning representations, and a metric gate that
//! retries with more training and hotter sampling until thresholds are met.

pub mod config;
pub mod diff;
pub mod error;
pub mod noise;
pub mod review;
pub mod run;

pub use config::PipelineConfig;
pub use diff::{diff_corpora, CorpusDiff};
pub use error::PipelineError;
pub use review::{
    review_session, review_with_ledger_file, AcceptAll, GrammarReviewer, ReviewAnswer, ReviewDecisionSource,
    ReviewOutcome, ReviewPrompt, ScriptedDecisions, TerminalReview,
};
pub use run::{run_pipeline, CorpusArtifact, IterationRecord};
