use std::collections::HashSet;

use super::expand::slot_candidates;
use super::{Element, Template};
use crate::lexicon::Lexicon;
use crate::sentence::Sentence;

enum Matcher {
    Literal(String),
    Slot { allowed: HashSet<String>, optional: bool },
}

/// Template derivability checker with the candidate sets precomputed.
///
/// A token sequence is valid when some template matches it element by
/// element, where optional slots may be left out. Templates whose categories
/// do not resolve against the lexicon never match.
pub struct SentenceValidator {
    templates: Vec<Vec<Matcher>>,
}

impl SentenceValidator {
    pub fn new(templates: &[Template], lex: &Lexicon) -> Self {
        let templates = templates
            .iter()
            .filter_map(|t| {
                t.elements()
                    .iter()
                    .map(|e| match e {
                        Element::Literal(l) => Some(Matcher::Literal(l.clone())),
                        Element::Slot(slot) => {
                            let allowed = slot_candidates(slot, lex).ok()?;
                            Some(Matcher::Slot {
                                allowed: allowed.into_iter().map(str::to_owned).collect(),
                                optional: !slot.is_required(),
                            })
                        }
                    })
                    .collect::<Option<Vec<_>>>()
            })
            .collect();
        Self { templates }
    }

    pub fn is_valid<S: AsRef<str>>(&self, tokens: &[S]) -> bool {
        !tokens.is_empty() && self.templates.iter().any(|t| matches(t, tokens))
    }
}

fn matches<S: AsRef<str>>(pattern: &[Matcher], tokens: &[S]) -> bool {
    let Some((head, rest)) = pattern.split_first() else {
        return tokens.is_empty();
    };
    match head {
        Matcher::Literal(l) => tokens.first().is_some_and(|t| t.as_ref() == l) && matches(rest, &tokens[1..]),
        Matcher::Slot { allowed, optional } => {
            let take = tokens.first().is_some_and(|t| allowed.contains(t.as_ref())) && matches(rest, &tokens[1..]);
            take || (*optional && matches(rest, tokens))
        }
    }
}

/// Whether `s` is derivable from any template in `templates`.
pub fn validate_sentence(s: &Sentence, templates: &[Template], lex: &Lexicon) -> bool {
    SentenceValidator::new(templates, lex).is_valid(s.tokens())
}
