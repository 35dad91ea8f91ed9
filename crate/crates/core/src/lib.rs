//! Text-side building blocks for hybrid corpus construction: the seed
//! lexicon, cycle templates and their expansion, seed-corpus curation with a
//! review ledger, and corpus quality/diversity metrics.

pub mod corpus;
pub mod gloss;
pub mod lexicon;
pub mod metrics;
pub mod sentence;
pub mod template;

pub use lexicon::{load_lexicon, validate_lexicon, Language, LexEntry, Lexicon, LexiconError, PartOfSpeech};
pub use sentence::{MeaningRepresentation, Sentence};
pub use template::{
    augment_sentence, expand_template, parse_template, validate_sentence, AugmentationRuleSet, CyclePolicy, Template,
    TemplateError,
};
