//! Corrupted seed corpora, for measuring what the review gate buys.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taskcorpus_core::corpus::SeedCorpus;
use taskcorpus_core::template::SentenceValidator;
use taskcorpus_core::{Lexicon, Sentence};

const MAX_TRIES: usize = 16;

fn corrupt(tokens: &[String], lexicon: &Lexicon, words: &[(String, String)], rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut t = tokens.to_vec();
    let n = t.len();
    match rng.gen_range(0..4) {
        0 if n >= 2 => {
            let i = rng.gen_range(0..n);
            let j = (i + rng.gen_range(1..n)) % n;
            t.swap(i, j);
        }
        1 => {
            let i = rng.gen_range(0..n);
            let own = lexicon.lookup(&t[i]).map(|(c, _)| c.to_owned());
            let foreign: Vec<&(String, String)> = words.iter().filter(|(c, _)| Some(c) != own.as_ref()).collect();
            if !foreign.is_empty() {
                t[i] = foreign[rng.gen_range(0..foreign.len())].1.clone();
            }
        }
        2 if n >= 3 => {
            t.remove(rng.gen_range(0..n));
        }
        _ => {
            let i = rng.gen_range(0..n);
            let dup = t[i].clone();
            t.insert(i, dup);
        }
    }
    t
}

/// Replaces the sentences of `round(fraction × len)` uniformly chosen items
/// with corrupted versions (token swap, wrong-category substitution,
/// deletion or duplication) that the validator rejects. MRs, ids and review
/// states are untouched. Returns the noisy corpus and the corrupted ids.
pub fn inject_noise(
    corpus: &SeedCorpus,
    lexicon: &Lexicon,
    validator: &SentenceValidator,
    fraction: f64,
    rng_seed: u64,
) -> (SeedCorpus, Vec<u64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let words: Vec<(String, String)> = lexicon
        .categories()
        .flat_map(|(c, entries)| entries.iter().map(move |e| (c.to_owned(), e.surface.clone())))
        .collect();
    let count = ((corpus.len() as f64) * fraction.clamp(0.0, 1.0)).round() as usize;
    let mut picks = rand::seq::index::sample(&mut rng, corpus.len(), count).into_vec();
    picks.sort_unstable();
    let mut out = corpus.clone();
    let mut ids = Vec::with_capacity(count);
    for p in picks {
        let item = &mut out.items[p];
        let original = item.sentence.tokens().to_vec();
        let mut noisy = original.clone();
        for _ in 0..MAX_TRIES {
            noisy = corrupt(&original, lexicon, &words, &mut rng);
            if !validator.is_valid(&noisy) {
                break;
            }
        }
        item.sentence = Sentence::new(noisy, corpus.language);
        ids.push(item.id);
    }
    (out, ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use taskcorpus_core::corpus::build_seed_corpus;
    use taskcorpus_core::template::bundled_templates;
    use taskcorpus_core::CyclePolicy;

    #[test]
    fn noisy_items_fail_validation_and_are_deterministic() {
        let lex = Lexicon::bundled();
        let templates = bundled_templates();
        let corpus = build_seed_corpus(&templates, &lex, CyclePolicy::FullProduct, 100, 3).unwrap();
        let validator = SentenceValidator::new(&templates, &lex);
        let (noisy, ids) = inject_noise(&corpus, &lex, &validator, 0.3, 11);
        assert_eq!(ids.len(), 30);
        let invalid = noisy
            .items
            .iter()
            .filter(|i| !validator.is_valid(i.sentence.tokens()))
            .count();
        assert_eq!(invalid, 30);
        assert_eq!(inject_noise(&corpus, &lex, &validator, 0.3, 11).0, noisy);
        for (a, b) in corpus.items.iter().zip(&noisy.items) {
            assert_eq!(a.mr, b.mr);
            assert_eq!(a.id, b.id);
        }
    }
}
