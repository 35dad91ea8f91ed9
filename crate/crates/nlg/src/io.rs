//! Binary model file.
//!
//! All integers are little-endian.
//!
//! | field | type |
//! |---|---|
//! | magic | 8 bytes `TCNLGMOD` |
//! | format version | u32 (= 1) |
//! | E, H, H_dec | 3 × u32 |
//! | logits_from (0 context, 1 state+context), output language (0 zh, 1 en), input embeddings trainable (0/1), reserved 0 | 4 × u8 |
//! | input vocab size, output vocab size | 2 × u32 |
//! | tensor count N | u32 |
//! | shape table | N × (rows u32, cols u32) |
//! | parameters | f64 row-major, tensors in table order |
//! | input vocab | per token in id order: byte length u32, UTF-8 bytes |
//! | output vocab | same |
//!
//! Biases are stored as `H × 1` tensors. Nothing may follow the output vocab.

use std::io::{Read, Write};

use taskcorpus_core::Language;

use crate::error::{NlgError, Result};
use crate::model::{LogitsFrom, ModelConfig, NlgModel, Params};
use crate::vocab::Vocab;

pub const MAGIC: &[u8; 8] = b"TCNLGMOD";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| NlgError::InvalidConfig(format!("{v} does not fit the model file format")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_vocab(out: &mut Vec<u8>, vocab: &Vocab) -> Result<()> {
    for t in vocab.tokens() {
        put_u32(out, t.len())?;
        out.extend_from_slice(t.as_bytes());
    }
    Ok(())
}

pub fn model_to_bytes(model: &NlgModel) -> Result<Vec<u8>> {
    model.check_shapes()?;
    let cfg = &model.config;
    let mut out = Vec::with_capacity(64 + model.param_count() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_u32(&mut out, cfg.embed_dim)?;
    put_u32(&mut out, cfg.hidden)?;
    put_u32(&mut out, cfg.decoder_hidden)?;
    out.push(match cfg.logits_from {
        LogitsFrom::Context => 0,
        LogitsFrom::StateContext => 1,
    });
    out.push(match cfg.output_language {
        Language::Zh => 0,
        Language::En => 1,
    });
    out.push(u8::from(model.embed_in_trainable));
    out.push(0);
    put_u32(&mut out, model.vocab_in.len())?;
    put_u32(&mut out, model.vocab_out.len())?;
    let shapes = model.params.shapes();
    put_u32(&mut out, shapes.len())?;
    for (r, c) in shapes {
        put_u32(&mut out, r)?;
        put_u32(&mut out, c)?;
    }
    for t in model.params.tensors() {
        for x in t {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    put_vocab(&mut out, &model.vocab_in)?;
    put_vocab(&mut out, &model.vocab_out)?;
    Ok(out)
}

pub fn save_model(model: &NlgModel, mut sink: impl Write) -> Result<()> {
    sink.write_all(&model_to_bytes(model)?)?;
    sink.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| NlgError::CorruptFile(format!("truncated while reading {what} at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn vocab(&mut self, len: usize, what: &str) -> Result<Vocab> {
        let mut tokens = Vec::with_capacity(len.min(1 << 20));
        for _ in 0..len {
            let n = self.u32(what)?;
            let raw = self.take(n, what)?;
            let t = std::str::from_utf8(raw).map_err(|_| NlgError::CorruptFile(format!("{what}: invalid UTF-8")))?;
            tokens.push(t.to_owned());
        }
        Vocab::from_id_order(tokens)
            .ok_or_else(|| NlgError::CorruptFile(format!("{what}: reserved ids missing or duplicate tokens")))
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<NlgModel> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8, "magic")? != MAGIC {
        return Err(NlgError::CorruptFile("not a model file (bad magic)".into()));
    }
    let version = c.u32("version")?;
    if version != FORMAT_VERSION as usize {
        return Err(NlgError::CorruptFile(format!("unsupported format version {version}")));
    }
    let embed_dim = c.u32("header")?;
    let hidden = c.u32("header")?;
    let decoder_hidden = c.u32("header")?;
    let logits_from = match c.u8("header")? {
        0 => LogitsFrom::Context,
        1 => LogitsFrom::StateContext,
        x => return Err(NlgError::CorruptFile(format!("unknown logits_from code {x}"))),
    };
    let output_language = match c.u8("header")? {
        0 => Language::Zh,
        1 => Language::En,
        x => return Err(NlgError::CorruptFile(format!("unknown language code {x}"))),
    };
    let embed_in_trainable = match c.u8("header")? {
        0 => false,
        1 => true,
        x => return Err(NlgError::CorruptFile(format!("bad trainable flag {x}"))),
    };
    c.u8("header")?;
    let vin = c.u32("header")?;
    let vout = c.u32("header")?;
    let config = ModelConfig {
        embed_dim,
        hidden,
        decoder_hidden,
        logits_from,
        output_language,
    };
    config.validate().map_err(|e| NlgError::CorruptFile(e.to_string()))?;

    let count = c.u32("shape table")?;
    let mut shapes = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        shapes.push((c.u32("shape table")?, c.u32("shape table")?));
    }
    let mut params = Params::zeros(&config, vin, vout);
    let expected = params.shapes();
    if shapes != expected {
        let detail = match expected.iter().zip(&shapes).position(|(a, b)| a != b) {
            Some(i) => format!("tensor {i} is {:?} but the header implies {:?}", shapes[i], expected[i]),
            None => format!("{} tensors stored, {} expected", shapes.len(), expected.len()),
        };
        return Err(NlgError::ShapeMismatch(detail));
    }
    for t in params.tensors_mut() {
        for x in t {
            *x = c.f64("parameters")?;
        }
    }
    let vocab_in = c.vocab(vin, "input vocab")?;
    let vocab_out = c.vocab(vout, "output vocab")?;
    if c.pos != bytes.len() {
        return Err(NlgError::CorruptFile(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Ok(NlgModel {
        config,
        vocab_in,
        vocab_out,
        params,
        embed_in_trainable,
    })
}

pub fn load_model(mut source: impl Read) -> Result<NlgModel> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    model_from_bytes(&bytes)
}
