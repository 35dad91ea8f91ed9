//! English gloss rendering for reviewers.
//!
//! Glosses come from the lexicon's annotations. A handful of surface rules
//! turn the word-by-word gloss into readable English: a verb directly
//! following another verb takes `to`, a he/she/it subject inflects the first
//! single-word verb, and `with ...` modifiers move behind their noun.
//! Articles are not generated; compare through [`normalize_gloss`].

use crate::lexicon::{Lexicon, PartOfSpeech};

fn third_person(verb: &str) -> String {
    if verb.ends_with('s') || verb.ends_with("sh") || verb.ends_with("ch") || verb.ends_with('x') || verb.ends_with('o')
    {
        format!("{verb}es")
    } else {
        format!("{verb}s")
    }
}

/// Renders an English gloss for a token sequence.
pub fn render_gloss<S: AsRef<str>>(tokens: &[S], lex: &Lexicon) -> String {
    let words: Vec<(String, Option<PartOfSpeech>)> = tokens
        .iter()
        .map(|t| {
            let t = t.as_ref();
            match lex.lookup(t) {
                Some((_, e)) => (e.gloss.clone().unwrap_or_else(|| t.to_owned()), Some(e.part_of_speech)),
                None => (t.to_owned(), None),
            }
        })
        .collect();

    let third_singular = words
        .iter()
        .find(|(_, pos)| *pos == Some(PartOfSpeech::Pronoun))
        .is_some_and(|(g, _)| matches!(g.to_lowercase().as_str(), "he" | "she" | "it"));

    let mut out: Vec<String> = Vec::new();
    let mut pending_post: Vec<String> = Vec::new();
    let mut inflected = false;
    let mut prev_verb = false;
    for (gloss, pos) in words {
        match pos {
            Some(PartOfSpeech::Verb) => {
                if prev_verb {
                    out.push("to".into());
                }
                if third_singular && !inflected && !gloss.contains(' ') {
                    out.push(third_person(&gloss));
                } else {
                    out.push(gloss);
                }
                inflected = true;
                prev_verb = true;
                continue;
            }
            Some(PartOfSpeech::Adjective) if gloss.starts_with("with ") => {
                pending_post.push(gloss);
            }
            Some(PartOfSpeech::Noun) => {
                out.push(gloss);
                out.append(&mut pending_post);
            }
            _ => out.push(gloss),
        }
        prev_verb = false;
    }
    out.append(&mut pending_post);
    out.join(" ")
}

/// Lowercases, strips sentence punctuation and drops articles.
pub fn normalize_gloss(text: &str) -> String {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| matches!(c, '.' | ',' | '!' | '?'))
                .to_lowercase()
        })
        .filter(|w| !w.is_empty() && !matches!(w.as_str(), "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}
