use taskcorpus_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NlgError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("token id {0} is not in the vocabulary")]
    UnknownToken(usize),
    #[error("empty input sequence")]
    EmptyInput,
    #[error("empty encoder sequence")]
    EmptyEncoding,
    #[error("no training pairs")]
    EmptyTrainingSet,
    #[error("non-finite loss at epoch {epoch}, batch {batch}: gradients exploded (try a smaller learning rate or clip norm)")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("pretrained vectors line {line}: {message}")]
    Pretrained { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NlgError>;
