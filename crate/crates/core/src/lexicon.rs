//! Category-structured word lists.
//!
//! File format (UTF-8, line based):
//!
//! ```text
//! # comment
//! @lang zh
//!
//! [who] pos=pronoun
//! 我  I
//! 你  you
//! ```
//!
//! A block starts with a `[category] pos=<tag>` header and holds one
//! `surface<TAB>gloss` entry per line (shown with spaces above); the gloss
//! is optional. Blank lines end a block. The optional `@lang` directive selects how tokens are joined into
//! a surface string (`zh`: no separator, `en`: single spaces).

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

const BASE_LEXICON: &str = include_str!("../data/base.lex");
const AUGMENT_LEXICON: &str = include_str!("../data/augment.lex");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate category `{0}`")]
    DuplicateCategory(String),
    #[error("category `{0}` has no entries")]
    EmptyCategory(String),
    #[error("category `{category}` lists `{surface}` twice")]
    DuplicateEntry { category: String, surface: String },
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("lexicon languages differ: {0} vs {1}")]
    LanguageMismatch(Language, Language),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How tokens are joined into a surface string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub enum Language {
    /// Chinese: tokens are concatenated.
    #[default]
    Zh,
    /// Space separated.
    En,
}

impl Language {
    pub fn join<S: AsRef<str>>(self, tokens: &[S]) -> String {
        let sep = match self {
            Language::Zh => "",
            Language::En => " ",
        };
        tokens.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(sep)
    }

    pub fn tag(self) -> &'static str {
        match self {
            Language::Zh => "zh",
            Language::En => "en",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Language {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zh" => Ok(Language::Zh),
            "en" => Ok(Language::En),
            other => Err(format!("unknown language tag `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PartOfSpeech {
    Noun,
    Verb,
    Adjective,
    Quantifier,
    Pronoun,
    Other,
}

impl PartOfSpeech {
    pub fn tag(self) -> &'static str {
        match self {
            PartOfSpeech::Noun => "noun",
            PartOfSpeech::Verb => "verb",
            PartOfSpeech::Adjective => "adjective",
            PartOfSpeech::Quantifier => "quantifier",
            PartOfSpeech::Pronoun => "pronoun",
            PartOfSpeech::Other => "other",
        }
    }
}

impl FromStr for PartOfSpeech {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "noun" => PartOfSpeech::Noun,
            "verb" => PartOfSpeech::Verb,
            "adjective" => PartOfSpeech::Adjective,
            "quantifier" => PartOfSpeech::Quantifier,
            "pronoun" => PartOfSpeech::Pronoun,
            "other" => PartOfSpeech::Other,
            other => return Err(format!("unknown part of speech `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LexEntry {
    pub surface: String,
    pub gloss: Option<String>,
    pub part_of_speech: PartOfSpeech,
}

impl LexEntry {
    pub fn new(surface: impl Into<String>, gloss: Option<&str>, part_of_speech: PartOfSpeech) -> Self {
        Self {
            surface: surface.into(),
            gloss: gloss.map(str::to_owned),
            part_of_speech,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub message: String,
    /// Category name, or `category/surface` for entry-level problems.
    pub location: String,
}

/// Problems found by [`validate_lexicon`]; empty when every invariant holds.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn errors(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }
}

/// Ordered mapping from category name to its entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lexicon {
    language: Language,
    categories: IndexMap<String, Vec<LexEntry>>,
}

impl Lexicon {
    pub fn new(language: Language) -> Self {
        Self {
            language,
            categories: IndexMap::new(),
        }
    }

    /// The bundled life-assistance seed lexicon (11 categories, 112 entries).
    pub fn base() -> Self {
        Self::parse(BASE_LEXICON).expect("bundled seed lexicon is valid")
    }

    /// Modifier categories used by seed augmentation.
    pub fn augmentation() -> Self {
        Self::parse(AUGMENT_LEXICON).expect("bundled augmentation lexicon is valid")
    }

    /// Seed lexicon merged with the augmentation categories.
    pub fn bundled() -> Self {
        let mut lex = Self::base();
        lex.merge(Self::augmentation())
            .expect("bundled lexicons do not overlap");
        lex
    }

    pub fn bundled_source() -> &'static str {
        BASE_LEXICON
    }

    pub fn augmentation_source() -> &'static str {
        AUGMENT_LEXICON
    }

    pub fn language(&self) -> Language {
        self.language
    }

    /// Adds a category without validating it; see [`validate_lexicon`].
    pub fn push_category(&mut self, name: impl Into<String>, entries: Vec<LexEntry>) -> Result<(), LexiconError> {
        let name = name.into();
        if self.categories.contains_key(&name) {
            return Err(LexiconError::DuplicateCategory(name));
        }
        self.categories.insert(name, entries);
        Ok(())
    }

    /// Appends every category of `other`. Category names must not collide.
    pub fn merge(&mut self, other: Lexicon) -> Result<(), LexiconError> {
        if other.language != self.language {
            return Err(LexiconError::LanguageMismatch(self.language, other.language));
        }
        if let Some(dup) = other.categories.keys().find(|k| self.categories.contains_key(*k)) {
            return Err(LexiconError::DuplicateCategory(dup.clone()));
        }
        self.categories.extend(other.categories);
        Ok(())
    }

    pub fn category_words(&self, name: &str) -> Result<&[LexEntry], LexiconError> {
        self.categories
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| LexiconError::UnknownCategory(name.to_owned()))
    }

    pub fn contains_category(&self, name: &str) -> bool {
        self.categories.contains_key(name)
    }

    pub fn categories(&self) -> impl Iterator<Item = (&str, &[LexEntry])> {
        self.categories.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn category_names(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(String::as_str)
    }

    pub fn category_count(&self) -> usize {
        self.categories.len()
    }

    pub fn total_entries(&self) -> usize {
        self.categories.values().map(Vec::len).sum()
    }

    /// First entry (in category order) whose surface equals `surface`.
    pub fn lookup(&self, surface: &str) -> Option<(&str, &LexEntry)> {
        self.categories.iter().find_map(|(name, entries)| {
            entries
                .iter()
                .find(|e| e.surface == surface)
                .map(|e| (name.as_str(), e))
        })
    }

    /// Part of speech declared for a category (taken from its first entry).
    pub fn category_pos(&self, name: &str) -> Option<PartOfSpeech> {
        self.categories
            .get(name)
            .and_then(|e| e.first())
            .map(|e| e.part_of_speech)
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::new(Language::default());
        let mut current: Option<(String, PartOfSpeech, Vec<LexEntry>, usize)> = None;

        fn close(
            lex: &mut Lexicon,
            block: Option<(String, PartOfSpeech, Vec<LexEntry>, usize)>,
        ) -> Result<(), LexiconError> {
            if let Some((name, _, entries, _)) = block {
                if entries.is_empty() {
                    return Err(LexiconError::EmptyCategory(name));
                }
                lex.push_category(name, entries)?;
            }
            Ok(())
        }

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            let parse_err = |message: String| LexiconError::Parse { line: line_no, message };
            if line.trim().is_empty() {
                close(&mut lex, current.take())?;
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('@') {
                let mut parts = rest.split_whitespace();
                match (parts.next(), parts.next(), parts.next()) {
                    (Some("lang"), Some(tag), None) => {
                        if !lex.categories.is_empty() || current.is_some() {
                            return Err(parse_err("@lang must precede all categories".into()));
                        }
                        lex.language = tag.parse().map_err(parse_err)?;
                    }
                    _ => return Err(parse_err(format!("unknown directive `{line}`"))),
                }
                continue;
            }
            if line.starts_with('[') {
                close(&mut lex, current.take())?;
                let (name, pos) = parse_header(line).map_err(parse_err)?;
                if lex.categories.contains_key(&name) {
                    return Err(LexiconError::DuplicateCategory(name));
                }
                current = Some((name, pos, Vec::new(), line_no));
                continue;
            }
            let Some((name, pos, entries, _)) = current.as_mut() else {
                return Err(parse_err("entry outside of a category block".into()));
            };
            let (surface, gloss) = match line.split_once('\t') {
                Some((s, g)) => (s, Some(g.trim()).filter(|g| !g.is_empty())),
                None => (line, None),
            };
            let surface = surface.trim();
            if surface.is_empty() {
                return Err(parse_err("empty surface form".into()));
            }
            if entries.iter().any(|e| e.surface == surface) {
                return Err(LexiconError::DuplicateEntry {
                    category: name.clone(),
                    surface: surface.to_owned(),
                });
            }
            entries.push(LexEntry::new(surface, gloss, *pos));
        }
        close(&mut lex, current.take())?;
        Ok(lex)
    }

    /// Canonical file rendering; `parse(to_file_string())` reproduces `self`.
    pub fn to_file_string(&self) -> String {
        let mut out = format!("@lang {}\n", self.language);
        for (name, entries) in &self.categories {
            let pos = entries.first().map_or(PartOfSpeech::Other, |e| e.part_of_speech);
            out.push('\n');
            out.push_str(&format!("[{name}] pos={}\n", pos.tag()));
            for e in entries {
                out.push_str(&e.surface);
                if let Some(g) = &e.gloss {
                    out.push('\t');
                    out.push_str(g);
                }
                out.push('\n');
            }
        }
        out
    }
}

fn parse_header(line: &str) -> Result<(String, PartOfSpeech), String> {
    let close = line
        .find(']')
        .ok_or_else(|| "category header is missing `]`".to_owned())?;
    let name = line[1..close].trim();
    if name.is_empty() {
        return Err("empty category name".into());
    }
    let rest = line[close + 1..].trim();
    let pos = if rest.is_empty() {
        PartOfSpeech::Other
    } else {
        let tag = rest
            .strip_prefix("pos=")
            .ok_or_else(|| format!("expected `pos=<tag>` after category name, found `{rest}`"))?;
        tag.trim().parse()?
    };
    Ok((name.to_owned(), pos))
}

pub fn load_lexicon<R: Read>(mut source: R) -> Result<Lexicon, LexiconError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    Lexicon::parse(&text)
}

/// Reports every violated invariant. Never fails.
pub fn validate_lexicon(lex: &Lexicon) -> ValidationReport {
    let mut issues = Vec::new();
    let mut error = |message: String, location: String| {
        issues.push(ValidationIssue {
            severity: Severity::Error,
            message,
            location,
        })
    };
    for (name, entries) in &lex.categories {
        if name.trim().is_empty() {
            error("category name is empty".into(), name.clone());
        }
        if entries.is_empty() {
            error(format!("category `{name}` has no entries"), name.clone());
        }
        let mut seen = std::collections::HashSet::new();
        for e in entries {
            let location = format!("{name}/{}", e.surface);
            if e.surface.is_empty() {
                error("empty surface form".into(), location.clone());
            }
            if e.surface.contains(['\n', '\r', '\t']) {
                error("surface form contains a line break or tab".into(), location.clone());
            }
            if !seen.insert(e.surface.as_str()) {
                error(format!("`{}` appears twice in `{name}`", e.surface), location);
            }
        }
    }
    for (name, entries) in &lex.categories {
        if let Some(first) = entries.first() {
            if let Some(odd) = entries.iter().find(|e| e.part_of_speech != first.part_of_speech) {
                issues.push(ValidationIssue {
                    severity: Severity::Warning,
                    message: format!(
                        "`{}` is tagged {} but the category is {}",
                        odd.surface,
                        odd.part_of_speech.tag(),
                        first.part_of_speech.tag()
                    ),
                    location: format!("{name}/{}", odd.surface),
                });
            }
        }
    }
    ValidationReport { issues }
}
