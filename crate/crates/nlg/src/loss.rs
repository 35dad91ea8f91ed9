use taskcorpus_tensor::{matvec, matvec_transposed, softmax, Matrix, Vector};

use crate::error::{NlgError, Result};
use crate::lstm::{lstm_backward, lstm_forward, LstmState, StepCache};
use crate::model::{
    attend, decoder_input, encode_traced, output_features, EncodedPair, EncoderTrace, LogitsFrom, NlgModel, Params,
};
use crate::vocab::BOS;

struct DecoderStep {
    cache: StepCache,
    hidden: Vector,
    alpha: Vector,
    features: Vector,
    probs: Vector,
}

struct PairTrace {
    enc: EncoderTrace,
    alpha0: Vector,
    steps: Vec<DecoderStep>,
}

fn forward(model: &NlgModel, pair: &EncodedPair) -> Result<PairTrace> {
    if pair.target.is_empty() {
        return Err(NlgError::EmptyInput);
    }
    let p = &model.params;
    let enc = encode_traced(model, &pair.input)?;
    let mut state = LstmState::zeros(model.config.decoder_hidden);
    let (alpha0, mut context) = attend(&p.attention, &state.hidden, &enc.states)?;
    let mut prev = BOS;
    let mut steps = Vec::with_capacity(pair.target.len());
    for &y in &pair.target {
        let x = decoder_input(model, prev, &context)?;
        let (next, cache) = lstm_forward(&p.decoder, &state, &x)?;
        let (alpha, ctx) = attend(&p.attention, &next.hidden, &enc.states)?;
        let features = output_features(&model.config, &next.hidden, &ctx);
        let probs = softmax(&matvec(&p.output, &features)?)?;
        steps.push(DecoderStep {
            cache,
            hidden: next.hidden.clone(),
            alpha,
            features,
            probs,
        });
        state = next;
        context = ctx;
        prev = y;
    }
    Ok(PairTrace { enc, alpha0, steps })
}

fn pair_loss(trace: &PairTrace, target: &[usize]) -> f64 {
    trace
        .steps
        .iter()
        .zip(target)
        .map(|(s, &y)| -s.probs.as_slice()[y].ln())
        .sum()
}

/// Gradient of attention output w.r.t. the query, accumulating into
/// `d_attention` and the encoder-state gradients.
fn attend_backward(
    attention: &Matrix,
    s: &Vector,
    enc: &[Vector],
    alpha: &Vector,
    d_context: &Vector,
    d_attention: &mut Matrix,
    d_enc: &mut [Vector],
) -> Result<Vector> {
    let u = matvec_transposed(attention, s)?;
    let d_alpha = enc
        .iter()
        .map(|r| d_context.dot(r))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mean: f64 = alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
    let mut du = Vector::zeros(u.dim());
    for (e, r) in enc.iter().enumerate() {
        let a = alpha.as_slice()[e];
        let d_score = a * (d_alpha[e] - mean);
        d_enc[e].add_scaled(a, d_context)?;
        d_enc[e].add_scaled(d_score, &u)?;
        du.add_scaled(d_score, r)?;
    }
    d_attention.add_outer(1.0, s, &du)?;
    Ok(matvec(attention, &du)?)
}

/// Summed token loss of one pair; adds `scale ×` its gradient into `grads`.
fn backward(model: &NlgModel, pair: &EncodedPair, trace: &PairTrace, scale: f64, grads: &mut Params) -> Result<()> {
    let p = &model.params;
    let cfg = &model.config;
    let h_dec = cfg.decoder_hidden;
    let e_dim = cfg.embed_dim;
    let two_h = cfg.context_dim();
    let enc = &trace.enc.states;
    let mut d_enc = vec![Vector::zeros(two_h); enc.len()];

    let mut dh_next = Vector::zeros(h_dec);
    let mut dc_next = Vector::zeros(h_dec);
    let mut d_ctx_carry = Vector::zeros(two_h);
    for k in (0..trace.steps.len()).rev() {
        let step = &trace.steps[k];
        let mut d_logits = step.probs.scale(scale);
        d_logits.as_mut_slice()[pair.target[k]] -= scale;
        grads.output.add_outer(1.0, &d_logits, &step.features)?;
        let d_features = matvec_transposed(&p.output, &d_logits)?;

        let mut dh = dh_next;
        let mut d_ctx = d_ctx_carry;
        match cfg.logits_from {
            LogitsFrom::Context => d_ctx.add_scaled(1.0, &d_features)?,
            LogitsFrom::StateContext => {
                let (dh_part, dc_part) = d_features.split_at(h_dec)?;
                dh.add_scaled(1.0, &dh_part)?;
                d_ctx.add_scaled(1.0, &dc_part)?;
            }
        }
        let ds = attend_backward(
            &p.attention,
            &step.hidden,
            enc,
            &step.alpha,
            &d_ctx,
            &mut grads.attention,
            &mut d_enc,
        )?;
        dh.add_scaled(1.0, &ds)?;

        let (dx, dh_prev, dc_prev) = lstm_backward(&p.decoder, &step.cache, &dh, &dc_next, &mut grads.decoder)?;
        let prev_token = if k == 0 { BOS } else { pair.target[k - 1] };
        let (d_emb, d_prev_ctx) = dx.split_at(e_dim)?;
        for (g, d) in grads
            .embed_out
            .matrix_mut()
            .row_mut(prev_token)
            .iter_mut()
            .zip(d_emb.iter())
        {
            *g += d;
        }
        d_ctx_carry = d_prev_ctx;
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    // The first step's context came from attending with the zero initial state.
    let zero = Vector::zeros(h_dec);
    attend_backward(
        &p.attention,
        &zero,
        enc,
        &trace.alpha0,
        &d_ctx_carry,
        &mut grads.attention,
        &mut d_enc,
    )?;

    let h = cfg.hidden;
    let m = enc.len();
    let mut d_x: Vec<Vector> = vec![Vector::zeros(e_dim); m];
    let halves = d_enc
        .iter()
        .map(|d| d.split_at(h))
        .collect::<std::result::Result<Vec<_>, _>>()?;

    let mut dh = Vector::zeros(h);
    let mut dc = Vector::zeros(h);
    for t in (0..m).rev() {
        let mut dh_t = dh;
        dh_t.add_scaled(1.0, &halves[t].1)?;
        let (dx, dh_prev, dc_prev) =
            lstm_backward(&p.encoder_fwd, &trace.enc.fwd[t], &dh_t, &dc, &mut grads.encoder_fwd)?;
        d_x[t].add_scaled(1.0, &dx)?;
        dh = dh_prev;
        dc = dc_prev;
    }
    let mut dh = Vector::zeros(h);
    let mut dc = Vector::zeros(h);
    for t in 0..m {
        let mut dh_t = dh;
        dh_t.add_scaled(1.0, &halves[t].0)?;
        let (dx, dh_prev, dc_prev) =
            lstm_backward(&p.encoder_bwd, &trace.enc.bwd[t], &dh_t, &dc, &mut grads.encoder_bwd)?;
        d_x[t].add_scaled(1.0, &dx)?;
        dh = dh_prev;
        dc = dc_prev;
    }
    if model.embed_in_trainable {
        for (&id, d) in pair.input.iter().zip(&d_x) {
            for (g, v) in grads.embed_in.matrix_mut().row_mut(id).iter_mut().zip(d.iter()) {
                *g += v;
            }
        }
    }
    Ok(())
}

fn token_count(pairs: &[EncodedPair]) -> Result<usize> {
    if pairs.is_empty() {
        return Err(NlgError::EmptyTrainingSet);
    }
    Ok(pairs.iter().map(|p| p.target.len()).sum())
}

/// Mean per-token cross-entropy under teacher forcing (EOS included).
pub fn loss(model: &NlgModel, pairs: &[EncodedPair]) -> Result<f64> {
    let n = token_count(pairs)?;
    let mut total = 0.0;
    for pair in pairs {
        total += pair_loss(&forward(model, pair)?, &pair.target);
    }
    Ok(total / n as f64)
}

/// Mean loss and its exact gradient with respect to every parameter.
/// Frozen input embeddings get a zero gradient.
pub fn loss_and_gradient(model: &NlgModel, pairs: &[EncodedPair]) -> Result<(f64, Params)> {
    let n = token_count(pairs)?;
    let scale = 1.0 / n as f64;
    let mut grads = Params::zeros(&model.config, model.vocab_in.len(), model.vocab_out.len());
    let mut total = 0.0;
    for pair in pairs {
        let trace = forward(model, pair)?;
        total += pair_loss(&trace, &pair.target);
        backward(model, pair, &trace, scale, &mut grads)?;
    }
    Ok((total * scale, grads))
}

/// Fraction of target tokens (EOS included) that are the argmax under
/// teacher forcing.
pub fn token_accuracy(model: &NlgModel, pairs: &[EncodedPair]) -> Result<f64> {
    let n = token_count(pairs)?;
    let mut correct = 0usize;
    for pair in pairs {
        let trace = forward(model, pair)?;
        correct += trace
            .steps
            .iter()
            .zip(&pair.target)
            .filter(|(s, &y)| s.probs.argmax() == Some(y))
            .count();
    }
    Ok(correct as f64 / n as f64)
}

/// Teacher-forced output distributions, one per target position.
pub fn teacher_forced_distributions(model: &NlgModel, pair: &EncodedPair) -> Result<Vec<Vector>> {
    Ok(forward(model, pair)?.steps.into_iter().map(|s| s.probs).collect())
}

/// Attention weights for each teacher-forced step, including the initial
/// zero-state attention first.
pub fn teacher_forced_attention(model: &NlgModel, pair: &EncodedPair) -> Result<Vec<Vector>> {
    let trace = forward(model, pair)?;
    let mut out = vec![trace.alpha0];
    out.extend(trace.steps.into_iter().map(|s| s.alpha));
    Ok(out)
}
