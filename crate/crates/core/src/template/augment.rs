use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TemplateError;
use crate::lexicon::{Lexicon, PartOfSpeech};
use crate::sentence::Sentence;

pub const DEFAULT_AUGMENT_VARIANTS: usize = 3;

/// Insert a word from `insert_category` in front of nouns of `noun_category`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationRule {
    pub noun_category: String,
    pub insert_category: String,
    pub probability: f64,
}

/// Rules in file order, plus how many random variants to draw per sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationRuleSet {
    pub rules: Vec<AugmentationRule>,
    pub variants: usize,
}

impl Default for AugmentationRuleSet {
    fn default() -> Self {
        Self {
            rules: Vec::new(),
            variants: DEFAULT_AUGMENT_VARIANTS,
        }
    }
}

impl AugmentationRuleSet {
    /// Parses `noun-category<TAB>insert-category<TAB>probability` lines.
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let mut rules = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| TemplateError::Rules { line: idx + 1, message };
            let fields: Vec<&str> = raw.trim_end_matches('\r').split('\t').map(str::trim).collect();
            let [noun, insert, prob] = fields[..] else {
                return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
            };
            let probability: f64 = prob.parse().map_err(|_| err(format!("bad probability `{prob}`")))?;
            if !(0.0..=1.0).contains(&probability) {
                return Err(err(format!("probability {probability} outside [0, 1]")));
            }
            if noun.is_empty() || insert.is_empty() {
                return Err(err("empty category name".into()));
            }
            rules.push(AugmentationRule {
                noun_category: noun.to_owned(),
                insert_category: insert.to_owned(),
                probability,
            });
        }
        Ok(Self {
            rules,
            variants: DEFAULT_AUGMENT_VARIANTS,
        })
    }

    pub fn with_variants(mut self, variants: usize) -> Self {
        self.variants = variants;
        self
    }

    pub fn to_file_string(&self) -> String {
        self.rules
            .iter()
            .map(|r| format!("{}\t{}\t{}\n", r.noun_category, r.insert_category, r.probability))
            .collect()
    }
}

/// One place where a rule may insert a word.
struct Site<'a> {
    /// Index of the noun binding in the MR.
    binding: usize,
    /// Token index of the noun.
    token: usize,
    insert_category: &'a str,
    probability: f64,
    candidates: Vec<&'a str>,
}

fn find_sites<'a>(s: &Sentence, lex: &'a Lexicon, rules: &'a AugmentationRuleSet) -> Vec<Site<'a>> {
    let Some(mr) = &s.mr else {
        return Vec::new();
    };
    // Bindings appear in token order; map each to its token position.
    let mut token_of = Vec::with_capacity(mr.bindings.len());
    let mut cursor = 0;
    for (_, value) in &mr.bindings {
        match s.tokens()[cursor..].iter().position(|t| t == value) {
            Some(off) => {
                token_of.push(Some(cursor + off));
                cursor += off + 1;
            }
            None => token_of.push(None),
        }
    }

    let mut sites = Vec::new();
    for (b, (_, value)) in mr.bindings.iter().enumerate() {
        let Some(token) = token_of[b] else { continue };
        for rule in &rules.rules {
            if lex.category_pos(&rule.noun_category) != Some(PartOfSpeech::Noun) {
                continue;
            }
            let is_noun = lex
                .category_words(&rule.noun_category)
                .map(|ws| ws.iter().any(|w| &w.surface == value))
                .unwrap_or(false);
            if !is_noun || mr.has_slot(&rule.insert_category) {
                continue;
            }
            if sites.iter().any(|st: &Site| st.insert_category == rule.insert_category) {
                continue;
            }
            let Ok(words) = lex.category_words(&rule.insert_category) else {
                continue;
            };
            sites.push(Site {
                binding: b,
                token,
                insert_category: &rule.insert_category,
                probability: rule.probability,
                candidates: words.iter().map(|w| w.surface.as_str()).collect(),
            });
        }
    }
    sites
}

/// Builds the sentence with `choices[i]` (if any) inserted at `sites[i]`.
fn apply(s: &Sentence, lex: &Lexicon, sites: &[Site], choices: &[Option<usize>]) -> Sentence {
    let mr = s.mr.as_ref().expect("sites imply an MR");
    let mut tokens = Vec::with_capacity(s.tokens().len() + sites.len());
    for (t, tok) in s.tokens().iter().enumerate() {
        for (site, choice) in sites.iter().zip(choices) {
            if let (true, Some(c)) = (site.token == t, choice) {
                tokens.push(site.candidates[*c].to_owned());
            }
        }
        tokens.push(tok.clone());
    }
    let mut new_mr = mr.clone();
    new_mr.bindings.clear();
    for (b, binding) in mr.bindings.iter().enumerate() {
        for (site, choice) in sites.iter().zip(choices) {
            if let (true, Some(c)) = (site.binding == b, choice) {
                new_mr
                    .bindings
                    .push((site.insert_category.to_owned(), site.candidates[*c].to_owned()));
            }
        }
        new_mr.bindings.push(binding.clone());
    }
    Sentence::new(tokens, lex.language()).with_mr(new_mr)
}

/// Returns the original sentence followed by up to `rules.variants` distinct
/// variants with quantifiers/adjectives inserted in front of nouns. Each rule
/// fires independently with its probability; the word is drawn uniformly.
pub fn augment_sentence(s: &Sentence, lex: &Lexicon, rules: &AugmentationRuleSet, rng_seed: u64) -> Vec<Sentence> {
    let sites = find_sites(s, lex, rules);
    let mut out = vec![s.clone()];
    if sites.is_empty() {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..rules.variants {
        let choices: Vec<Option<usize>> = sites
            .iter()
            .map(|site| {
                let fire = rng.gen_bool(site.probability);
                let pick = rng.gen_range(0..site.candidates.len());
                fire.then_some(pick)
            })
            .collect();
        if choices.iter().all(Option::is_none) {
            continue;
        }
        let candidate = apply(s, lex, &sites, &choices);
        if !out.iter().any(|o| o.tokens() == candidate.tokens()) {
            out.push(candidate);
        }
    }
    out
}

/// Every sentence reachable by augmentation, original first, in odometer order
/// over the insertion sites (no word, then each candidate in category order).
pub fn enumerate_augmentations(s: &Sentence, lex: &Lexicon, rules: &AugmentationRuleSet) -> Vec<Sentence> {
    let sites = find_sites(s, lex, rules);
    if sites.is_empty() {
        return vec![s.clone()];
    }
    let mut out = Vec::new();
    let mut choice = vec![None; sites.len()];
    loop {
        out.push(apply(s, lex, &sites, &choice));
        let mut pos = sites.len();
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            let next = match choice[pos] {
                None => Some(0),
                Some(c) if c + 1 < sites[pos].candidates.len() => Some(c + 1),
                Some(_) => None,
            };
            choice[pos] = next;
            if next.is_some() {
                break;
            }
        }
    }
}
