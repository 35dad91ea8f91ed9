use std::fmt;

use crate::lexicon::Language;

/// One concrete filling of a template: the "data" side of data-to-text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MeaningRepresentation {
    pub template_id: String,
    /// Slot name to chosen surface, in template slot order.
    pub bindings: Vec<(String, String)>,
}

impl MeaningRepresentation {
    pub fn new(template_id: impl Into<String>) -> Self {
        Self {
            template_id: template_id.into(),
            bindings: Vec::new(),
        }
    }

    pub fn with_binding(mut self, slot: impl Into<String>, value: impl Into<String>) -> Self {
        self.bindings.push((slot.into(), value.into()));
        self
    }

    pub fn get(&self, slot: &str) -> Option<&str> {
        self.bindings.iter().find(|(s, _)| s == slot).map(|(_, v)| v.as_str())
    }

    pub fn has_slot(&self, slot: &str) -> bool {
        self.bindings.iter().any(|(s, _)| s == slot)
    }

    /// `slot=value` tokens in binding order; the encoder input.
    pub fn linearize(&self) -> Vec<String> {
        self.bindings
            .iter()
            .map(|(slot, value)| format!("{slot}={value}"))
            .collect()
    }

    /// Inverse of [`linearize`](Self::linearize). Tokens without `=` are rejected.
    pub fn from_linearized<S: AsRef<str>>(template_id: &str, tokens: &[S]) -> Option<Self> {
        let bindings = tokens
            .iter()
            .map(|t| t.as_ref().split_once('=').map(|(s, v)| (s.to_owned(), v.to_owned())))
            .collect::<Option<Vec<_>>>()?;
        Some(Self {
            template_id: template_id.to_owned(),
            bindings,
        })
    }
}

impl fmt::Display for MeaningRepresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.template_id)?;
        for (i, (s, v)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{s}={v}")?;
        }
        f.write_str(")")
    }
}

/// A token sequence with its rendered surface string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<String>,
    surface: String,
    pub mr: Option<MeaningRepresentation>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>, language: Language) -> Self {
        let surface = language.join(&tokens);
        Self {
            tokens,
            surface,
            mr: None,
        }
    }

    pub fn with_mr(mut self, mr: MeaningRepresentation) -> Self {
        self.mr = Some(mr);
        self
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}
