//! Seed corpus construction, scale control and manual review.

mod record;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lexicon::{Language, Lexicon};
use crate::sentence::{MeaningRepresentation, Sentence};
use crate::template::{
    augment_sentence, expand_template, templates_to_file_string, AugmentationRuleSet, CyclePolicy, Template,
    TemplateError,
};

pub use record::{escape_field, unescape_field};

/// Default cap on the seed corpus size.
pub const DEFAULT_SCALE_LIMIT: usize = 500;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("scale_limit must be at least 1")]
    ZeroScaleLimit,
    #[error("templates produced no sentences")]
    EmptyExpansion,
    #[error("ledger refers to unknown item {0}")]
    UnknownItem(u64),
    #[error("no accepted or unreviewed items to export")]
    EmptyExport,
    #[error("{kind} line {line}: {message}")]
    Parse {
        kind: &'static str,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ReviewState {
    #[default]
    Unreviewed,
    Accepted,
    Rejected,
}

impl ReviewState {
    pub fn tag(self) -> &'static str {
        match self {
            ReviewState::Unreviewed => "unreviewed",
            ReviewState::Accepted => "accepted",
            ReviewState::Rejected => "rejected",
        }
    }
}

impl FromStr for ReviewState {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unreviewed" => Ok(ReviewState::Unreviewed),
            "accepted" => Ok(ReviewState::Accepted),
            "rejected" => Ok(ReviewState::Rejected),
            other => Err(format!("unknown review state `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusItem {
    pub id: u64,
    pub sentence: Sentence,
    pub mr: MeaningRepresentation,
    pub review: ReviewState,
    pub reviewer_note: Option<String>,
}

/// A deduplicated, versioned collection of `(MR, sentence)` items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedCorpus {
    pub items: Vec<CorpusItem>,
    /// Hex digest of the generation config.
    pub provenance: String,
    pub version: u64,
    pub language: Language,
}

impl SeedCorpus {
    /// Builds a corpus from pairs, dropping later duplicates of a token sequence.
    pub fn from_pairs(
        language: Language,
        provenance: impl Into<String>,
        pairs: impl IntoIterator<Item = (MeaningRepresentation, Sentence)>,
    ) -> Self {
        let mut seen = HashSet::new();
        let mut items = Vec::new();
        for (mr, mut sentence) in pairs {
            if !seen.insert(sentence.tokens().to_vec()) {
                continue;
            }
            sentence.mr = None;
            items.push(CorpusItem {
                id: items.len() as u64,
                sentence,
                mr,
                review: ReviewState::Unreviewed,
                reviewer_note: None,
            });
        }
        Self {
            items,
            provenance: provenance.into(),
            version: 1,
            language,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, id: u64) -> Option<&CorpusItem> {
        self.items.iter().find(|i| i.id == id)
    }

    /// Items that are not rejected.
    pub fn usable(&self) -> impl Iterator<Item = &CorpusItem> {
        self.items.iter().filter(|i| i.review != ReviewState::Rejected)
    }

    pub fn token_sequences(&self) -> Vec<Vec<String>> {
        self.items.iter().map(|i| i.sentence.tokens().to_vec()).collect()
    }

    pub fn count(&self, state: ReviewState) -> usize {
        self.items.iter().filter(|i| i.review == state).count()
    }
}

/// Stable 64-bit sub-seed for `label` under `seed`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Every template expansion (optionally augmented), deduplicated, in
/// template then expansion order.
pub fn expansion_pool(
    templates: &[Template],
    lexicon: &Lexicon,
    policy: CyclePolicy,
    augmentation: Option<&AugmentationRuleSet>,
    rng_seed: u64,
) -> Result<Vec<(MeaningRepresentation, Sentence)>, CorpusError> {
    let mut seen = HashSet::new();
    let mut pool = Vec::new();
    let mut index = 0u64;
    for t in templates {
        for (mr, sentence) in expand_template(t, lexicon, policy)? {
            let variants = match augmentation {
                Some(rules) => {
                    let seed = derive_seed(rng_seed, &format!("augment/{index}"));
                    augment_sentence(&sentence, lexicon, rules, seed)
                }
                None => vec![sentence.clone()],
            };
            index += 1;
            for v in variants {
                if seen.insert(v.tokens().to_vec()) {
                    let v_mr = v.mr.clone().unwrap_or_else(|| mr.clone());
                    pool.push((v_mr, v));
                }
            }
        }
    }
    Ok(pool)
}

fn provenance_digest(
    templates: &[Template],
    lexicon: &Lexicon,
    policy: CyclePolicy,
    augmentation: Option<&AugmentationRuleSet>,
    scale_limit: usize,
    rng_seed: u64,
) -> String {
    let mut h = Sha256::new();
    h.update(templates_to_file_string(templates));
    h.update(lexicon.to_file_string());
    h.update(policy.to_string());
    if let Some(rules) = augmentation {
        h.update(rules.to_file_string());
        h.update(rules.variants.to_le_bytes());
    }
    h.update((scale_limit as u64).to_le_bytes());
    h.update(rng_seed.to_le_bytes());
    hex::encode(&h.finalize()[..16])
}

/// Expands the templates and keeps at most `scale_limit` distinct sentences,
/// sampled uniformly under `rng_seed` when the expansion is larger.
pub fn build_seed_corpus(
    templates: &[Template],
    lexicon: &Lexicon,
    cycle_policy: CyclePolicy,
    scale_limit: usize,
    rng_seed: u64,
) -> Result<SeedCorpus, CorpusError> {
    build_seed_corpus_with(templates, lexicon, cycle_policy, None, scale_limit, rng_seed)
}

/// [`build_seed_corpus`] with optional quantifier/adjective augmentation.
pub fn build_seed_corpus_with(
    templates: &[Template],
    lexicon: &Lexicon,
    cycle_policy: CyclePolicy,
    augmentation: Option<&AugmentationRuleSet>,
    scale_limit: usize,
    rng_seed: u64,
) -> Result<SeedCorpus, CorpusError> {
    if scale_limit == 0 {
        return Err(CorpusError::ZeroScaleLimit);
    }
    let pool = expansion_pool(templates, lexicon, cycle_policy, augmentation, rng_seed)?;
    if pool.is_empty() {
        return Err(CorpusError::EmptyExpansion);
    }
    let selected = if pool.len() > scale_limit {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, "scale"));
        let mut picks = rand::seq::index::sample(&mut rng, pool.len(), scale_limit).into_vec();
        picks.sort_unstable();
        let mut keep = vec![false; pool.len()];
        for p in picks {
            keep[p] = true;
        }
        pool.into_iter()
            .zip(keep)
            .filter_map(|(pair, k)| k.then_some(pair))
            .collect()
    } else {
        pool
    };
    let provenance = provenance_digest(templates, lexicon, cycle_policy, augmentation, scale_limit, rng_seed);
    Ok(SeedCorpus::from_pairs(lexicon.language(), provenance, selected))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Accept,
    Reject,
    Skip,
}

impl Decision {
    pub fn tag(self) -> &'static str {
        match self {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
            Decision::Skip => "skip",
        }
    }
}

impl FromStr for Decision {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "accept" | "a" => Ok(Decision::Accept),
            "reject" | "r" => Ok(Decision::Reject),
            "skip" | "s" => Ok(Decision::Skip),
            other => Err(format!("unknown decision `{other}`")),
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub item_id: u64,
    pub decision: Decision,
    pub timestamp: u64,
    pub note: Option<String>,
}

/// Append-only log of review decisions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReviewLedger {
    entries: Vec<LedgerEntry>,
}

impl ReviewLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Empty notes are stored as no note, matching the file format.
    pub fn append(&mut self, mut entry: LedgerEntry) {
        entry.note = entry.note.filter(|n| !n.is_empty());
        self.entries.push(entry);
    }

    pub fn record(&mut self, item_id: u64, decision: Decision, timestamp: u64, note: Option<String>) {
        self.append(LedgerEntry {
            item_id,
            decision,
            timestamp,
            note,
        });
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, item_id: u64) -> bool {
        self.entries.iter().any(|e| e.item_id == item_id)
    }
}

/// Replays `ledger` over `corpus`: accept/reject entries set the review state
/// (last one wins), skips change nothing. The version always increases.
pub fn apply_review(corpus: &SeedCorpus, ledger: &ReviewLedger) -> Result<SeedCorpus, CorpusError> {
    let mut out = corpus.clone();
    let index: std::collections::HashMap<u64, usize> =
        out.items.iter().enumerate().map(|(i, item)| (item.id, i)).collect();
    for e in ledger.entries() {
        if !index.contains_key(&e.item_id) {
            return Err(CorpusError::UnknownItem(e.item_id));
        }
    }
    for e in ledger.entries() {
        let item = &mut out.items[index[&e.item_id]];
        match e.decision {
            Decision::Accept => item.review = ReviewState::Accepted,
            Decision::Reject => item.review = ReviewState::Rejected,
            Decision::Skip => continue,
        }
        if e.note.is_some() {
            item.reviewer_note = e.note.clone();
        }
    }
    out.version += 1;
    Ok(out)
}

/// An encoder input (linearized MR) and decoder target (sentence tokens).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrainingPair {
    pub input: Vec<String>,
    pub output: Vec<String>,
}

/// Non-rejected items as `(slot=value tokens, sentence tokens)`.
pub fn export_training_pairs(corpus: &SeedCorpus) -> Result<Vec<TrainingPair>, CorpusError> {
    let pairs: Vec<TrainingPair> = corpus
        .usable()
        .map(|item| TrainingPair {
            input: item.mr.linearize(),
            output: item.sentence.tokens().to_vec(),
        })
        .collect();
    if pairs.is_empty() {
        return Err(CorpusError::EmptyExport);
    }
    Ok(pairs)
}
