use std::path::{Path, PathBuf};

use taskcorpus_core::corpus::CorpusError;
use taskcorpus_core::{LexiconError, TemplateError};
use taskcorpus_nlg::NlgError;
use thiserror::Error;

use crate::run::IterationRecord;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Nlg(#[from] NlgError),
    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("output directory {} is locked by another run (remove {} if stale)", .0.display(), .0.join(crate::run::LOCK_FILE).display())]
    Locked(PathBuf),
    #[error("review: {0}")]
    Review(String),
    #[error("no convergence after {} iteration(s); last report: {}", log.len(), last_report(log))]
    NotConverged { log: Vec<IterationRecord> },
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            e @ (Self::Iteration { .. } | Self::NotConverged { .. }) => e,
            e => Self::Iteration {
                iteration,
                source: Box::new(e),
            },
        }
    }

    /// 0 success, 1 other failure, 2 non-convergence, 3 validation/parse, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::NotConverged { .. } => 2,
            Self::Lexicon(LexiconError::Io(_))
            | Self::Corpus(CorpusError::Io(_))
            | Self::Nlg(NlgError::Io(_))
            | Self::Io { .. }
            | Self::Locked(_) => 4,
            Self::Config(_) | Self::Lexicon(_) | Self::Template(_) | Self::Corpus(_) | Self::Review(_) => 3,
            Self::Nlg(
                NlgError::CorruptFile(_)
                | NlgError::ShapeMismatch(_)
                | NlgError::Pretrained { .. }
                | NlgError::InvalidConfig(_),
            ) => 3,
            Self::Nlg(_) => 1,
            Self::Iteration { source, .. } => source.exit_code(),
        }
    }
}

fn last_report(log: &[IterationRecord]) -> String {
    log.last()
        .map(|r| r.report.to_key_value().trim_end().replace('\n', ", "))
        .unwrap_or_default()
}
