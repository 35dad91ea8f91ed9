//! Corpus diversity and quality scores.
//!
//! Conventions for degenerate input: `distinct_n` and `novelty_rate` are 0 for
//! an empty corpus, `validity_rate` is 1 (vacuously valid), and
//! `vocab_coverage` is 0 for a lexicon without entries.

use std::collections::HashSet;

use serde::Serialize;

use crate::lexicon::Lexicon;
use crate::template::{SentenceValidator, Template};

/// Unique token n-grams over total token n-grams across the corpus.
pub fn distinct_n<S: AsRef<[String]>>(corpus: &[S], n: usize) -> f64 {
    assert!(n >= 1, "distinct_n needs n >= 1");
    let mut unique: HashSet<&[String]> = HashSet::new();
    let mut total = 0usize;
    for sentence in corpus {
        for gram in sentence.as_ref().windows(n) {
            unique.insert(gram);
            total += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        unique.len() as f64 / total as f64
    }
}

/// Fraction of generated sentences whose token sequence is not in the seed corpus.
pub fn novelty_rate<G: AsRef<[String]>, S: AsRef<[String]>>(generated: &[G], seed: &[S]) -> f64 {
    if generated.is_empty() {
        return 0.0;
    }
    let seen: HashSet<&[String]> = seed.iter().map(AsRef::as_ref).collect();
    let novel = generated.iter().filter(|g| !seen.contains(g.as_ref())).count();
    novel as f64 / generated.len() as f64
}

/// Fraction of sentences derivable from the template set.
pub fn validity_rate<S: AsRef<[String]>>(corpus: &[S], templates: &[Template], lexicon: &Lexicon) -> f64 {
    validity_rate_with(corpus, &SentenceValidator::new(templates, lexicon))
}

pub fn validity_rate_with<S: AsRef<[String]>>(corpus: &[S], validator: &SentenceValidator) -> f64 {
    if corpus.is_empty() {
        return 1.0;
    }
    let valid = corpus.iter().filter(|s| validator.is_valid(s.as_ref())).count();
    valid as f64 / corpus.len() as f64
}

/// Fraction of distinct lexicon surfaces that occur somewhere in the corpus.
pub fn vocab_coverage<S: AsRef<[String]>>(corpus: &[S], lexicon: &Lexicon) -> f64 {
    let vocab: HashSet<&str> = lexicon
        .categories()
        .flat_map(|(_, entries)| entries.iter().map(|e| e.surface.as_str()))
        .collect();
    if vocab.is_empty() {
        return 0.0;
    }
    let used: HashSet<&str> = corpus
        .iter()
        .flat_map(|s| s.as_ref().iter().map(String::as_str))
        .filter(|t| vocab.contains(t))
        .collect();
    used.len() as f64 / vocab.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub distinct_1: f64,
    pub distinct_2: f64,
    pub novelty_rate: f64,
    pub validity_rate: f64,
    pub vocab_coverage: f64,
    pub corpus_size: usize,
}

impl MetricsReport {
    /// `key=value` lines in field order.
    pub fn to_key_value(&self) -> String {
        format!(
            "distinct_1={}\ndistinct_2={}\nnovelty_rate={}\nvalidity_rate={}\nvocab_coverage={}\ncorpus_size={}\n",
            self.distinct_1,
            self.distinct_2,
            self.novelty_rate,
            self.validity_rate,
            self.vocab_coverage,
            self.corpus_size
        )
    }

    pub fn ratios(&self) -> [f64; 5] {
        [
            self.distinct_1,
            self.distinct_2,
            self.novelty_rate,
            self.validity_rate,
            self.vocab_coverage,
        ]
    }
}

/// Scores `generated` against the seed corpus and template grammar.
pub fn corpus_report<S: AsRef<[String]>, G: AsRef<[String]>>(
    seed: &[S],
    generated: &[G],
    templates: &[Template],
    lexicon: &Lexicon,
) -> MetricsReport {
    MetricsReport {
        distinct_1: distinct_n(generated, 1),
        distinct_2: distinct_n(generated, 2),
        novelty_rate: novelty_rate(generated, seed),
        validity_rate: validity_rate(generated, templates, lexicon),
        vocab_coverage: vocab_coverage(generated, lexicon),
        corpus_size: generated.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::{bundled_templates, parse_template};

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(str::to_owned).collect())
            .collect()
    }

    #[test]
    fn distinct_examples() {
        assert_eq!(distinct_n(&corpus(&["a b", "a c"]), 1), 0.75);
        assert_eq!(distinct_n(&corpus(&["a"]), 2), 0.0);
        assert_eq!(distinct_n::<Vec<String>>(&[], 1), 0.0);
        // k = 3 copies of a 4-token sentence with 3 unique tokens: 3 / 12
        let c = corpus(&["x y x z", "x y x z", "x y x z"]);
        assert_eq!(distinct_n(&c, 1), 3.0 / 12.0);
    }

    #[test]
    fn novelty_examples() {
        let seed = corpus(&["a b", "c d", "e f"]);
        assert_eq!(novelty_rate(&corpus(&["a b", "c d"]), &seed), 0.0);
        assert_eq!(novelty_rate(&corpus(&["x", "y"]), &seed), 1.0);
        let generated = corpus(&["a b", "c d", "e f", "a b", "c d", "e f", "a b", "n1", "n2", "n3"]);
        assert!((novelty_rate(&generated, &seed) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn validity_examples() {
        let lex = Lexicon::bundled();
        let templates = bundled_templates();
        let valid = corpus(&["他 想要 喝 水", "我 去 厨房"]);
        assert_eq!(validity_rate(&valid, &templates, &lex), 1.0);
        assert_eq!(validity_rate::<Vec<String>>(&[], &templates, &lex), 1.0);

        // Reversal oracle on a two-template set: no reversed sentence is derivable.
        let small = vec![
            parse_template("{who:subject} {want:predicate} {action:predicate=喝} {drink:object}").unwrap(),
            parse_template("{who:subject} {action:predicate=去} {location:object}").unwrap(),
        ];
        let reversed: Vec<Vec<String>> = valid.iter().map(|s| s.iter().rev().cloned().collect()).collect();
        assert_eq!(validity_rate(&reversed, &small, &lex), 0.0);
    }

    #[test]
    fn self_report() {
        let lex = Lexicon::bundled();
        let seed = corpus(&["他 想要 喝 水", "我 去 厨房"]);
        let r = corpus_report(&seed, &seed, &bundled_templates(), &lex);
        assert_eq!(r.novelty_rate, 0.0);
        assert_eq!(r.validity_rate, 1.0);
        assert_eq!(r.corpus_size, 2);
        assert!(r.ratios().iter().all(|x| (0.0..=1.0).contains(x)));
        assert!(r.to_key_value().contains("corpus_size=2\n"));
    }

    #[test]
    fn coverage() {
        let lex = Lexicon::parse("[a] pos=noun\nx\ny\n\n[b] pos=verb\nz\nw\n").unwrap();
        assert_eq!(vocab_coverage(&corpus(&["x z q"]), &lex), 0.5);
    }
}
