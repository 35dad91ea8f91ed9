use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use taskcorpus_core::Sentence;
use taskcorpus_tensor::Vector;

use crate::error::{NlgError, Result};
use crate::lstm::LstmState;
use crate::model::{decode_step, encode, initial_state, NlgModel};
use crate::vocab::{BOS, EOS, PAD};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeStrategy {
    Greedy,
    Sample { temperature: f64, rng_seed: u64 },
    Beam { width: usize },
}

impl fmt::Display for DecodeStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Greedy => f.write_str("greedy"),
            Self::Sample { temperature, rng_seed } => write!(f, "sample:{temperature}:{rng_seed}"),
            Self::Beam { width } => write!(f, "beam:{width}"),
        }
    }
}

/// `greedy`, `sample:<temperature>[:<seed>]`, `beam:<width>`.
impl FromStr for DecodeStrategy {
    type Err = NlgError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || NlgError::InvalidConfig(format!("unrecognized decoding strategy `{s}`"));
        let mut parts = s.split(':');
        match parts.next() {
            Some("greedy") if parts.next().is_none() => Ok(Self::Greedy),
            Some("sample") => {
                let temperature: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                let rng_seed = match parts.next() {
                    Some(x) => x.parse().map_err(|_| bad())?,
                    None => 0,
                };
                if parts.next().is_some() || !(temperature.is_finite() && temperature > 0.0) {
                    return Err(bad());
                }
                Ok(Self::Sample { temperature, rng_seed })
            }
            Some("beam") => {
                let width: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                if parts.next().is_some() || width == 0 {
                    return Err(bad());
                }
                Ok(Self::Beam { width })
            }
            _ => Err(bad()),
        }
    }
}

/// A decoded sentence plus decoding metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub sentence: Sentence,
    /// No EOS was produced within `max_len` tokens.
    pub truncated: bool,
    /// Natural-log probability of the emitted tokens (and EOS, when reached).
    pub log_prob: f64,
}

fn is_emittable(id: usize) -> bool {
    id != PAD && id != BOS
}

fn greedy_pick(dist: &Vector) -> usize {
    let mut best = None;
    for (id, &p) in dist.iter().enumerate() {
        if !is_emittable(id) {
            continue;
        }
        match best {
            Some((_, bp)) if p <= bp => {}
            _ => best = Some((id, p)),
        }
    }
    best.map(|(id, _)| id).unwrap_or(EOS)
}

fn sample_pick(dist: &Vector, temperature: f64, rng: &mut ChaCha8Rng) -> usize {
    let scaled: Vec<(usize, f64)> = dist
        .iter()
        .enumerate()
        .filter(|(id, _)| is_emittable(*id))
        .map(|(id, p)| (id, p.ln() / temperature))
        .collect();
    let max = scaled.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scaled.iter().map(|(_, l)| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut r = rng.gen::<f64>() * total;
    for ((id, _), w) in scaled.iter().zip(&weights) {
        if r < *w {
            return *id;
        }
        r -= w;
    }
    // Rounding left r just above the total; take the last positive weight.
    scaled
        .iter()
        .zip(&weights)
        .rev()
        .find(|(_, w)| **w > 0.0)
        .map(|((id, _), _)| *id)
        .unwrap_or(EOS)
}

/// Autoregressive decoding from BOS. At most `max_len` tokens are emitted;
/// EOS ends the sentence and is not part of it. PAD and BOS are never emitted.
pub fn generate<S: AsRef<str>>(
    model: &NlgModel,
    mr_tokens: &[S],
    strategy: DecodeStrategy,
    max_len: usize,
) -> Result<Generation> {
    if max_len == 0 {
        return Err(NlgError::InvalidConfig("max_len must be at least 1".into()));
    }
    let enc = encode(model, &model.input_ids(mr_tokens))?;
    let ids_and_meta = match strategy {
        DecodeStrategy::Greedy => step_decode(model, &enc, max_len, greedy_pick)?,
        DecodeStrategy::Sample { temperature, rng_seed } => {
            if !(temperature.is_finite() && temperature > 0.0) {
                return Err(NlgError::InvalidConfig(format!(
                    "temperature must be positive, got {temperature}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            step_decode(model, &enc, max_len, |d| sample_pick(d, temperature, &mut rng))?
        }
        DecodeStrategy::Beam { width } => {
            if width == 0 {
                return Err(NlgError::InvalidConfig("beam width must be at least 1".into()));
            }
            beam_decode(model, &enc, max_len, width)?
        }
    };
    let (ids, truncated, log_prob) = ids_and_meta;
    let tokens = ids
        .iter()
        .map(|&id| model.vocab_out.token(id).unwrap_or("<unk>").to_owned())
        .collect();
    Ok(Generation {
        sentence: Sentence::new(tokens, model.config.output_language),
        truncated,
        log_prob,
    })
}

fn step_decode(
    model: &NlgModel,
    enc: &[Vector],
    max_len: usize,
    mut pick: impl FnMut(&Vector) -> usize,
) -> Result<(Vec<usize>, bool, f64)> {
    let mut state = initial_state(model);
    let mut prev = BOS;
    let mut out = Vec::new();
    let mut log_prob = 0.0;
    // One extra step gives a max_len-token sentence the chance to end cleanly.
    for _ in 0..=max_len {
        let (dist, next) = decode_step(model, prev, &state, enc)?;
        let id = pick(&dist);
        if id == EOS {
            log_prob += dist.as_slice()[id].ln();
            return Ok((out, false, log_prob));
        }
        if out.len() == max_len {
            break;
        }
        log_prob += dist.as_slice()[id].ln();
        out.push(id);
        state = next;
        prev = id;
    }
    Ok((out, true, log_prob))
}

struct Hypothesis {
    tokens: Vec<usize>,
    state: LstmState,
    log_prob: f64,
}

fn beam_decode(model: &NlgModel, enc: &[Vector], max_len: usize, width: usize) -> Result<(Vec<usize>, bool, f64)> {
    let mut beams = vec![Hypothesis {
        tokens: Vec::new(),
        state: initial_state(model),
        log_prob: 0.0,
    }];
    let mut finished: Option<(Vec<usize>, f64)> = None;
    for _ in 0..=max_len {
        // (log_prob, beam index, token, new state)
        let mut candidates: Vec<(f64, usize, usize, LstmState)> = Vec::new();
        for (b, hyp) in beams.iter().enumerate() {
            let prev = hyp.tokens.last().copied().unwrap_or(BOS);
            let (dist, next) = decode_step(model, prev, &hyp.state, enc)?;
            let mut scored: Vec<(usize, f64)> = dist
                .iter()
                .enumerate()
                .filter(|(id, _)| is_emittable(*id))
                .map(|(id, p)| (id, hyp.log_prob + p.ln()))
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for (id, lp) in scored.into_iter().take(width) {
                candidates.push((lp, b, id, next.clone()));
            }
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut next_beams = Vec::with_capacity(width);
        for (lp, b, id, state) in candidates.into_iter().take(width) {
            if id == EOS {
                if finished.as_ref().is_none_or(|(_, best)| lp > *best) {
                    finished = Some((beams[b].tokens.clone(), lp));
                }
            } else if beams[b].tokens.len() < max_len {
                let mut tokens = beams[b].tokens.clone();
                tokens.push(id);
                next_beams.push(Hypothesis {
                    tokens,
                    state,
                    log_prob: lp,
                });
            }
        }
        // Log-probabilities only fall, so no live beam can overtake a better finished one.
        if let Some((_, best)) = &finished {
            next_beams.retain(|h| h.log_prob > *best);
        }
        if next_beams.is_empty() {
            break;
        }
        beams = next_beams;
    }
    if let Some((tokens, lp)) = finished {
        return Ok((tokens, false, lp));
    }
    let best = beams
        .into_iter()
        .max_by(|a, b| a.log_prob.total_cmp(&b.log_prob))
        .expect("beam set is never empty here");
    Ok((best.tokens, true, best.log_prob))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_parsing() {
        assert_eq!("greedy".parse::<DecodeStrategy>().unwrap(), DecodeStrategy::Greedy);
        assert_eq!(
            "sample:0.7:9".parse::<DecodeStrategy>().unwrap(),
            DecodeStrategy::Sample {
                temperature: 0.7,
                rng_seed: 9
            }
        );
        assert_eq!(
            "beam:4".parse::<DecodeStrategy>().unwrap(),
            DecodeStrategy::Beam { width: 4 }
        );
        for bad in ["", "beam:0", "sample:-1", "sample", "greedy:1", "top-k:3"] {
            assert!(bad.parse::<DecodeStrategy>().is_err(), "{bad}");
        }
        let s = DecodeStrategy::Sample {
            temperature: 0.5,
            rng_seed: 3,
        };
        assert_eq!(s.to_string().parse::<DecodeStrategy>().unwrap(), s);
    }

    #[test]
    fn greedy_pick_skips_reserved_and_breaks_ties_low() {
        let d = Vector::from(vec![0.4, 0.3, 0.1, 0.1, 0.05, 0.05]);
        assert_eq!(greedy_pick(&d), EOS);
    }
}
