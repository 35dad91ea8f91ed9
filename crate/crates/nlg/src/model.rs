use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use taskcorpus_core::corpus::TrainingPair;
use taskcorpus_core::Language;
use taskcorpus_tensor::{concat, matvec, matvec_transposed, softmax, Matrix, TensorError, Vector};

use crate::embedding::{EmbeddingProvider, EmbeddingTable, LearnedEmbeddings};
use crate::error::{NlgError, Result};
use crate::lstm::{lstm_forward, LstmParams, LstmState, StepCache};
use crate::vocab::{Vocab, EOS};

/// Half-width of the uniform initialization interval.
pub const INIT_SCALE: f64 = 0.08;

/// What the output matrix is applied to at each decode step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogitsFrom {
    /// `W · context_k`; the decoder state only acts through attention.
    #[default]
    Context,
    /// `W · (s_k ⊕ context_k)`.
    StateContext,
}

impl fmt::Display for LogitsFrom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Context => "context",
            Self::StateContext => "state+context",
        })
    }
}

impl FromStr for LogitsFrom {
    type Err = NlgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "context" => Ok(Self::Context),
            "state+context" | "state-context" => Ok(Self::StateContext),
            other => Err(NlgError::InvalidConfig(format!(
                "logits_from must be `context` or `state+context`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// E: embedding width, shared by input and output tables.
    pub embed_dim: usize,
    /// H: hidden width of each encoder direction.
    pub hidden: usize,
    /// H_dec: decoder hidden width.
    pub decoder_hidden: usize,
    pub logits_from: LogitsFrom,
    pub output_language: Language,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            hidden: 32,
            decoder_hidden: 32,
            logits_from: LogitsFrom::Context,
            output_language: Language::Zh,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden == 0 || self.decoder_hidden == 0 {
            return Err(NlgError::InvalidConfig(format!(
                "dimensions must be positive (E={}, H={}, H_dec={})",
                self.embed_dim, self.hidden, self.decoder_hidden
            )));
        }
        Ok(())
    }

    pub fn context_dim(&self) -> usize {
        2 * self.hidden
    }

    pub fn decoder_input_dim(&self) -> usize {
        self.embed_dim + self.context_dim()
    }

    pub fn output_features(&self) -> usize {
        match self.logits_from {
            LogitsFrom::Context => self.context_dim(),
            LogitsFrom::StateContext => self.decoder_hidden + self.context_dim(),
        }
    }
}

/// Every trainable tensor. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub embed_in: EmbeddingTable,
    pub encoder_fwd: LstmParams,
    pub encoder_bwd: LstmParams,
    pub decoder: LstmParams,
    /// W: `|vocab_out| × features`.
    pub output: Matrix,
    /// 𝒲: `H_dec × 2H`.
    pub attention: Matrix,
    /// W^out: output-token embeddings fed back into the decoder.
    pub embed_out: EmbeddingTable,
}

impl Params {
    pub fn zeros(config: &ModelConfig, vocab_in: usize, vocab_out: usize) -> Self {
        Self {
            embed_in: EmbeddingTable::zeros(vocab_in, config.embed_dim),
            encoder_fwd: LstmParams::zeros(config.hidden, config.embed_dim),
            encoder_bwd: LstmParams::zeros(config.hidden, config.embed_dim),
            decoder: LstmParams::zeros(config.decoder_hidden, config.decoder_input_dim()),
            output: Matrix::zeros(vocab_out, config.output_features()),
            attention: Matrix::zeros(config.decoder_hidden, config.context_dim()),
            embed_out: EmbeddingTable::zeros(vocab_out, config.embed_dim),
        }
    }

    /// Fixed serialization / flattening order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.embed_in.matrix().as_slice()];
        out.extend(self.encoder_fwd.tensors());
        out.extend(self.encoder_bwd.tensors());
        out.extend(self.decoder.tensors());
        out.push(self.output.as_slice());
        out.push(self.attention.as_slice());
        out.push(self.embed_out.matrix().as_slice());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.embed_in.matrix_mut().as_mut_slice()];
        out.extend(self.encoder_fwd.tensors_mut());
        out.extend(self.encoder_bwd.tensors_mut());
        out.extend(self.decoder.tensors_mut());
        out.push(self.output.as_mut_slice());
        out.push(self.attention.as_mut_slice());
        out.push(self.embed_out.matrix_mut().as_mut_slice());
        out
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        let mut out = vec![self.embed_in.matrix().shape()];
        out.extend(self.encoder_fwd.shapes());
        out.extend(self.encoder_bwd.shapes());
        out.extend(self.decoder.shapes());
        out.push(self.output.shape());
        out.push(self.attention.shape());
        out.push(self.embed_out.matrix().shape());
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.len();
        if flat.len() != expected {
            return Err(TensorError::DimensionMismatch {
                op: "Params::assign_flat",
                expected,
                actual: flat.len(),
            }
            .into());
        }
        let mut off = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// `self += factor * other`, tensor by tensor.
    pub fn add_scaled(&mut self, factor: f64, other: &Params) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += factor * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            for x in t {
                *x *= factor;
            }
        }
    }
}

/// Encoder/decoder parameters plus the vocabularies they index.
#[derive(Debug, Clone, PartialEq)]
pub struct NlgModel {
    pub config: ModelConfig,
    pub vocab_in: Vocab,
    pub vocab_out: Vocab,
    pub params: Params,
    /// False when the input embeddings came from a frozen provider.
    pub embed_in_trainable: bool,
}

impl NlgModel {
    /// Learned embeddings; all parameters uniform in `[-INIT_SCALE, INIT_SCALE]`.
    pub fn new(config: ModelConfig, vocab_in: Vocab, vocab_out: Vocab, seed: u64) -> Result<Self> {
        Self::with_embeddings(config, vocab_in, vocab_out, &LearnedEmbeddings::default(), seed)
    }

    pub fn with_embeddings(
        config: ModelConfig,
        vocab_in: Vocab,
        vocab_out: Vocab,
        provider: &dyn EmbeddingProvider,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let embed_in = provider.build(&vocab_in, config.embed_dim, &mut rng)?;
        if embed_in.len() != vocab_in.len() || embed_in.dim() != config.embed_dim {
            return Err(NlgError::ShapeMismatch(format!(
                "embedding provider returned {}×{}, expected {}×{}",
                embed_in.len(),
                embed_in.dim(),
                vocab_in.len(),
                config.embed_dim
            )));
        }
        let mut params = Params::zeros(&config, vocab_in.len(), vocab_out.len());
        let s = INIT_SCALE;
        for (i, t) in params.tensors_mut().into_iter().enumerate() {
            if i == 0 {
                continue;
            }
            for x in t {
                *x = rand::Rng::gen_range(&mut rng, -s..=s);
            }
        }
        params.embed_in = embed_in;
        Ok(Self {
            config,
            vocab_in,
            vocab_out,
            params,
            embed_in_trainable: provider.trainable(),
        })
    }

    /// All-zero parameters; handy for analytic checks.
    pub fn zeros(config: ModelConfig, vocab_in: Vocab, vocab_out: Vocab) -> Result<Self> {
        config.validate()?;
        let params = Params::zeros(&config, vocab_in.len(), vocab_out.len());
        Ok(Self {
            config,
            vocab_in,
            vocab_out,
            params,
            embed_in_trainable: true,
        })
    }

    /// Vocabularies from the pairs' tokens, then [`NlgModel::new`].
    pub fn for_pairs(config: ModelConfig, pairs: &[TrainingPair], seed: u64) -> Result<Self> {
        let (vin, vout) = build_vocabs(pairs);
        Self::new(config, vin, vout, seed)
    }

    /// Encoder ids: tokens (OOV → UNK) followed by an end marker.
    pub fn input_ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        let mut ids = self.vocab_in.ids(tokens);
        ids.push(EOS);
        ids
    }

    /// Decoder targets: tokens (OOV → UNK) followed by EOS.
    pub fn target_ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        let mut ids = self.vocab_out.ids(tokens);
        ids.push(EOS);
        ids
    }

    pub fn encode_pair(&self, pair: &TrainingPair) -> EncodedPair {
        EncodedPair {
            input: self.input_ids(&pair.input),
            target: self.target_ids(&pair.output),
        }
    }

    pub fn check_shapes(&self) -> Result<()> {
        let expected = Params::zeros(&self.config, self.vocab_in.len(), self.vocab_out.len()).shapes();
        let actual = self.params.shapes();
        if expected != actual {
            let idx = expected.iter().zip(&actual).position(|(a, b)| a != b).unwrap_or(0);
            return Err(NlgError::ShapeMismatch(format!(
                "tensor {idx}: expected {:?}, found {:?}",
                expected.get(idx),
                actual.get(idx)
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }
}

/// Input and output vocabularies in first-occurrence order.
pub fn build_vocabs(pairs: &[TrainingPair]) -> (Vocab, Vocab) {
    let vin = Vocab::from_tokens(pairs.iter().flat_map(|p| p.input.iter()));
    let vout = Vocab::from_tokens(pairs.iter().flat_map(|p| p.output.iter()));
    (vin, vout)
}

/// Id sequences ready for the network, both ending in EOS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPair {
    pub input: Vec<usize>,
    pub target: Vec<usize>,
}

pub(crate) struct EncoderTrace {
    pub states: Vec<Vector>,
    pub fwd: Vec<StepCache>,
    /// Indexed by position, not by processing order.
    pub bwd: Vec<StepCache>,
}

pub(crate) fn encode_traced(model: &NlgModel, input_ids: &[usize]) -> Result<EncoderTrace> {
    if input_ids.is_empty() {
        return Err(NlgError::EmptyInput);
    }
    let p = &model.params;
    let h = model.config.hidden;
    let embedded = input_ids
        .iter()
        .map(|&id| p.embed_in.lookup(id).map(Vector::from))
        .collect::<Result<Vec<_>>>()?;

    let mut fwd = Vec::with_capacity(embedded.len());
    let mut fwd_h = Vec::with_capacity(embedded.len());
    let mut state = LstmState::zeros(h);
    for x in &embedded {
        let (next, cache) = lstm_forward(&p.encoder_fwd, &state, x)?;
        fwd_h.push(next.hidden.clone());
        fwd.push(cache);
        state = next;
    }

    let mut bwd = Vec::with_capacity(embedded.len());
    let mut bwd_h = Vec::with_capacity(embedded.len());
    let mut state = LstmState::zeros(h);
    for x in embedded.iter().rev() {
        let (next, cache) = lstm_forward(&p.encoder_bwd, &state, x)?;
        bwd_h.push(next.hidden.clone());
        bwd.push(cache);
        state = next;
    }
    bwd.reverse();
    bwd_h.reverse();

    let states = bwd_h.iter().zip(&fwd_h).map(|(b, f)| concat(b, f)).collect();
    Ok(EncoderTrace { states, fwd, bwd })
}

/// Bidirectional encoding: position `e` holds `backward_e ⊕ forward_e`.
pub fn encode(model: &NlgModel, input_ids: &[usize]) -> Result<Vec<Vector>> {
    Ok(encode_traced(model, input_ids)?.states)
}

/// Bilinear attention: `score_e = sᵀ 𝒲 ℜ_e`, softmax weights, weighted context.
pub fn attend(attention: &Matrix, s: &Vector, enc: &[Vector]) -> Result<(Vector, Vector)> {
    if enc.is_empty() {
        return Err(NlgError::EmptyEncoding);
    }
    let u = matvec_transposed(attention, s)?;
    let scores = enc
        .iter()
        .map(|r| u.dot(r))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let alpha = softmax(&Vector::from(scores))?;
    let mut context = Vector::zeros(attention.cols());
    for (a, r) in alpha.iter().zip(enc) {
        context.add_scaled(*a, r)?;
    }
    Ok((alpha, context))
}

pub(crate) fn output_features(config: &ModelConfig, hidden: &Vector, context: &Vector) -> Vector {
    match config.logits_from {
        LogitsFrom::Context => context.clone(),
        LogitsFrom::StateContext => concat(hidden, context),
    }
}

pub(crate) fn decoder_input(model: &NlgModel, prev_token: usize, prev_context: &Vector) -> Result<Vector> {
    let emb = Vector::from(model.params.embed_out.lookup(prev_token)?);
    Ok(concat(&emb, prev_context))
}

/// One decoder step: feed `W^out(prev) ⊕ context(s_{k-1})`, return the
/// output distribution and `s_k`.
pub fn decode_step(
    model: &NlgModel,
    prev_token: usize,
    prev_state: &LstmState,
    enc: &[Vector],
) -> Result<(Vector, LstmState)> {
    let p = &model.params;
    let (_, prev_context) = attend(&p.attention, &prev_state.hidden, enc)?;
    let x = decoder_input(model, prev_token, &prev_context)?;
    let (state, _) = lstm_forward(&p.decoder, prev_state, &x)?;
    let (_, context) = attend(&p.attention, &state.hidden, enc)?;
    let logits = matvec(&p.output, &output_features(&model.config, &state.hidden, &context))?;
    Ok((softmax(&logits)?, state))
}

/// Decoder state before the first step.
pub fn initial_state(model: &NlgModel) -> LstmState {
    LstmState::zeros(model.config.decoder_hidden)
}
