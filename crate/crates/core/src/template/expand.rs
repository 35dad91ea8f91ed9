use std::fmt;
use std::str::FromStr;

use super::{Element, Slot, Template, TemplateError};
use crate::lexicon::{Language, Lexicon};
use crate::sentence::{MeaningRepresentation, Sentence};

/// How a template's required slots are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CyclePolicy {
    /// Every combination, last slot varying fastest.
    FullProduct,
    /// `n` sentences; sentence `i` takes entry `i mod |category|` in every slot.
    RoundRobin(usize),
}

impl fmt::Display for CyclePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CyclePolicy::FullProduct => f.write_str("full"),
            CyclePolicy::RoundRobin(n) => write!(f, "round-robin:{n}"),
        }
    }
}

impl FromStr for CyclePolicy {
    type Err = TemplateError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "full" || s == "full-product" {
            return Ok(CyclePolicy::FullProduct);
        }
        s.strip_prefix("round-robin:")
            .and_then(|n| n.trim().parse().ok())
            .map(CyclePolicy::RoundRobin)
            .ok_or_else(|| TemplateError::Policy(s.to_owned()))
    }
}

/// Candidate surfaces for a slot, honoring its restriction.
pub(crate) fn slot_candidates<'a>(slot: &'a Slot, lex: &'a Lexicon) -> Result<Vec<&'a str>, TemplateError> {
    let entries = lex
        .category_words(&slot.category)
        .map_err(|_| TemplateError::UnresolvedCategory {
            slot: slot.name.clone(),
            category: slot.category.clone(),
        })?;
    let candidates: Vec<&str> = if slot.restriction.is_empty() {
        entries.iter().map(|e| e.surface.as_str()).collect()
    } else {
        for value in &slot.restriction {
            if !entries.iter().any(|e| &e.surface == value) {
                return Err(TemplateError::UnknownRestriction {
                    slot: slot.name.clone(),
                    category: slot.category.clone(),
                    value: value.clone(),
                });
            }
        }
        slot.restriction.iter().map(String::as_str).collect()
    };
    if candidates.is_empty() {
        return Err(TemplateError::EmptyCategory {
            slot: slot.name.clone(),
        });
    }
    Ok(candidates)
}

/// Lazy stream of `(MeaningRepresentation, Sentence)` pairs for one template.
pub struct Expansion<'a> {
    template: &'a Template,
    language: Language,
    /// Candidates per required slot, in template order.
    candidates: Vec<Vec<&'a str>>,
    policy: CyclePolicy,
    /// Odometer for the full product, `None` once exhausted.
    odometer: Option<Vec<usize>>,
    emitted: usize,
}

impl<'a> Expansion<'a> {
    /// Number of pairs the stream yields in total.
    pub fn total(&self) -> usize {
        match self.policy {
            CyclePolicy::FullProduct => self.candidates.iter().map(Vec::len).product(),
            CyclePolicy::RoundRobin(n) => n,
        }
    }

    fn render(&self, choice: &[usize]) -> (MeaningRepresentation, Sentence) {
        let mut mr = MeaningRepresentation::new(self.template.id.clone());
        let mut tokens = Vec::new();
        let mut required = 0;
        for element in self.template.elements() {
            match element {
                Element::Literal(l) => tokens.push(l.clone()),
                Element::Slot(slot) if slot.is_required() => {
                    let value = self.candidates[required][choice[required]];
                    required += 1;
                    mr.bindings.push((slot.name.clone(), value.to_owned()));
                    tokens.push(value.to_owned());
                }
                Element::Slot(_) => {}
            }
        }
        let sentence = Sentence::new(tokens, self.language).with_mr(mr.clone());
        (mr, sentence)
    }
}

impl Iterator for Expansion<'_> {
    type Item = (MeaningRepresentation, Sentence);

    fn next(&mut self) -> Option<Self::Item> {
        match self.policy {
            CyclePolicy::RoundRobin(n) => {
                if self.emitted >= n {
                    return None;
                }
                let i = self.emitted;
                let choice: Vec<usize> = self.candidates.iter().map(|c| i % c.len()).collect();
                self.emitted += 1;
                Some(self.render(&choice))
            }
            CyclePolicy::FullProduct => {
                let choice = self.odometer.clone()?;
                let item = self.render(&choice);
                self.emitted += 1;
                // Advance: last slot fastest.
                let mut next = choice;
                let mut advanced = false;
                for pos in (0..next.len()).rev() {
                    next[pos] += 1;
                    if next[pos] < self.candidates[pos].len() {
                        advanced = true;
                        break;
                    }
                    next[pos] = 0;
                }
                self.odometer = advanced.then_some(next);
                Some(item)
            }
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.total() - self.emitted;
        (left, Some(left))
    }
}

/// Expands `template` against `lex`. Category problems are reported before
/// anything is yielded.
pub fn expand_template<'a>(
    template: &'a Template,
    lex: &'a Lexicon,
    policy: CyclePolicy,
) -> Result<Expansion<'a>, TemplateError> {
    let mut candidates = Vec::new();
    for slot in template.slots() {
        let c = slot_candidates(slot, lex)?;
        if slot.is_required() {
            candidates.push(c);
        }
    }
    Ok(Expansion {
        template,
        language: lex.language(),
        odometer: Some(vec![0; candidates.len()]),
        candidates,
        policy,
        emitted: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::parse_template;

    #[test]
    fn who_only() {
        let lex = Lexicon::base();
        let t = parse_template("{who:subject}").unwrap();
        let out: Vec<String> = expand_template(&t, &lex, CyclePolicy::FullProduct)
            .unwrap()
            .map(|(_, s)| s.surface().to_owned())
            .collect();
        assert_eq!(out, ["我", "你", "他", "她"]);
    }

    #[test]
    fn drink_product_is_180_in_index_order() {
        let lex = Lexicon::base();
        let t = parse_template("{who:subject} {want:predicate} {action:predicate=喝} {drink:object}").unwrap();
        let pairs: Vec<_> = expand_template(&t, &lex, CyclePolicy::FullProduct).unwrap().collect();
        assert_eq!(pairs.len(), 4 * 3 * 15);
        assert_eq!(pairs[0].1.surface(), "我想要喝水");
        assert_eq!(pairs[1].1.surface(), "我想要喝热水");
        assert_eq!(pairs[15].1.surface(), "我打算喝水");
        assert_eq!(pairs[179].1.surface(), "她不想喝绿茶");
        for (mr, s) in &pairs {
            assert_eq!(s.mr.as_ref(), Some(mr));
            assert_eq!(mr.bindings.len(), 4);
        }
    }

    #[test]
    fn round_robin_cycles_each_category() {
        let lex = Lexicon::base();
        let t = parse_template("{who:subject} {want:predicate}").unwrap();
        let out: Vec<String> = expand_template(&t, &lex, CyclePolicy::RoundRobin(5))
            .unwrap()
            .map(|(_, s)| s.surface().to_owned())
            .collect();
        assert_eq!(out, ["我想要", "你打算", "他不想", "她想要", "我打算"]);
    }

    #[test]
    fn literal_tokens_are_kept_but_not_bound() {
        let lex = Lexicon::base();
        let t = parse_template("{who:subject} 喝 {drink:object=水}").unwrap();
        let (mr, s) = expand_template(&t, &lex, CyclePolicy::FullProduct)
            .unwrap()
            .next()
            .unwrap();
        assert_eq!(s.tokens(), ["我", "喝", "水"]);
        assert_eq!(mr.linearize(), ["who=我", "drink=水"]);
    }

    #[test]
    fn category_errors() {
        let lex = Lexicon::base();
        let t = parse_template("{colour:adjective}").unwrap();
        assert!(matches!(
            expand_template(&t, &lex, CyclePolicy::FullProduct),
            Err(TemplateError::UnresolvedCategory { .. })
        ));
        let t = parse_template("{drink:object=咖喱}").unwrap();
        assert!(matches!(
            expand_template(&t, &lex, CyclePolicy::FullProduct),
            Err(TemplateError::UnknownRestriction { .. })
        ));
        let mut empty = Lexicon::new(Language::Zh);
        empty.push_category("who", vec![]).unwrap();
        let t = parse_template("{who:subject}").unwrap();
        assert!(matches!(
            expand_template(&t, &empty, CyclePolicy::FullProduct),
            Err(TemplateError::EmptyCategory { .. })
        ));
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("full".parse::<CyclePolicy>().unwrap(), CyclePolicy::FullProduct);
        assert_eq!(
            "round-robin:7".parse::<CyclePolicy>().unwrap(),
            CyclePolicy::RoundRobin(7)
        );
        assert!("round-robin:x".parse::<CyclePolicy>().is_err());
        assert_eq!(CyclePolicy::RoundRobin(3).to_string(), "round-robin:3");
    }
}
