use std::io::BufRead;

use rand::Rng;
use taskcorpus_tensor::Matrix;

use crate::error::{NlgError, Result};
use crate::vocab::Vocab;

/// `|vocab| × E` lookup table; row `id` is the embedding of token `id`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    matrix: Matrix,
}

impl EmbeddingTable {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        Self {
            matrix: Matrix::zeros(vocab_size, dim),
        }
    }

    pub fn from_matrix(matrix: Matrix) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }

    pub fn lookup(&self, id: usize) -> Result<&[f64]> {
        if id >= self.matrix.rows() {
            return Err(NlgError::UnknownToken(id));
        }
        Ok(self.matrix.row(id))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.matrix
    }
}

/// Source of initial input-side embeddings.
pub trait EmbeddingProvider {
    fn build(&self, vocab: &Vocab, dim: usize, rng: &mut dyn rand::RngCore) -> Result<EmbeddingTable>;

    /// Whether training may update the table.
    fn trainable(&self) -> bool;
}

/// Randomly initialized table, trained jointly with the model.
#[derive(Debug, Clone, Copy)]
pub struct LearnedEmbeddings {
    pub init_scale: f64,
}

impl Default for LearnedEmbeddings {
    fn default() -> Self {
        Self {
            init_scale: crate::model::INIT_SCALE,
        }
    }
}

impl EmbeddingProvider for LearnedEmbeddings {
    fn build(&self, vocab: &Vocab, dim: usize, rng: &mut dyn rand::RngCore) -> Result<EmbeddingTable> {
        let s = self.init_scale;
        Ok(EmbeddingTable::from_matrix(Matrix::from_fn(
            vocab.len(),
            dim,
            |_, _| rng.gen_range(-s..=s),
        )))
    }

    fn trainable(&self) -> bool {
        true
    }
}

/// Fixed vectors read from a whitespace-separated text file
/// (`token v1 v2 ... vE` per line). Tokens absent from the file get a zero row.
#[derive(Debug, Clone, Default)]
pub struct PretrainedEmbeddings {
    vectors: Vec<(String, Vec<f64>)>,
}

impl PretrainedEmbeddings {
    pub fn parse(reader: impl BufRead) -> Result<Self> {
        let mut vectors = Vec::new();
        let mut dim = None;
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let values = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| NlgError::Pretrained {
                    line: n + 1,
                    message: e.to_string(),
                })?;
            if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                return Err(NlgError::Pretrained {
                    line: n + 1,
                    message: "expected one or more finite values".into(),
                });
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(NlgError::Pretrained {
                        line: n + 1,
                        message: format!("dimension {} differs from {d}", values.len()),
                    })
                }
                _ => {}
            }
            vectors.push((token.to_owned(), values));
        }
        Ok(Self { vectors })
    }

    pub fn dim(&self) -> Option<usize> {
        self.vectors.first().map(|(_, v)| v.len())
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl EmbeddingProvider for PretrainedEmbeddings {
    fn build(&self, vocab: &Vocab, dim: usize, _rng: &mut dyn rand::RngCore) -> Result<EmbeddingTable> {
        if let Some(d) = self.dim() {
            if d != dim {
                return Err(NlgError::ShapeMismatch(format!(
                    "pretrained vectors have dimension {d}, model expects {dim}"
                )));
            }
        }
        let mut table = EmbeddingTable::zeros(vocab.len(), dim);
        for (token, values) in &self.vectors {
            if let Some(id) = vocab.get(token) {
                table.matrix.row_mut(id).copy_from_slice(values);
            }
        }
        Ok(table)
    }

    fn trainable(&self) -> bool {
        false
    }
}
