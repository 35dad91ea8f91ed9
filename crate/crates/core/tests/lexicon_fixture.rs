use proptest::prelude::*;
use taskcorpus_core::{load_lexicon, validate_lexicon, Language, LexEntry, Lexicon, PartOfSpeech};

const COUNTS: [(&str, usize); 11] = [
    ("who", 4),
    ("want", 3),
    ("action", 5),
    ("number", 4),
    ("coats", 17),
    ("pants", 7),
    ("shoes", 6),
    ("decorators", 11),
    ("food", 31),
    ("drink", 15),
    ("location", 9),
];

#[test]
fn bundled_fixture_has_published_counts() {
    let lex = load_lexicon(Lexicon::bundled_source().as_bytes()).unwrap();
    assert_eq!(lex, Lexicon::base());
    assert_eq!(lex.category_count(), 11);
    let got: Vec<(&str, usize)> = lex.categories().map(|(n, e)| (n, e.len())).collect();
    assert_eq!(got, COUNTS.to_vec());
    assert_eq!(lex.total_entries(), 112);
    assert_eq!(lex.language(), Language::Zh);
    assert_eq!(validate_lexicon(&lex).error_count(), 0);
}

#[test]
fn bundled_lexicon_adds_only_modifier_categories() {
    let full = Lexicon::bundled();
    for (name, n) in COUNTS {
        assert_eq!(full.category_words(name).unwrap().len(), n);
    }
    for (name, entries) in Lexicon::augmentation().categories() {
        assert_eq!(full.category_words(name).unwrap(), entries);
        assert!(entries
            .iter()
            .all(|e| matches!(e.part_of_speech, PartOfSpeech::Adjective | PartOfSpeech::Quantifier)));
    }
}

#[test]
fn fixture_file_round_trips_byte_identically() {
    let lex = Lexicon::base();
    let once = lex.to_file_string();
    let twice = Lexicon::parse(&once).unwrap().to_file_string();
    assert_eq!(once, twice);
}

fn pos() -> impl Strategy<Value = PartOfSpeech> {
    prop_oneof![
        Just(PartOfSpeech::Noun),
        Just(PartOfSpeech::Verb),
        Just(PartOfSpeech::Pronoun),
        Just(PartOfSpeech::Adjective),
        Just(PartOfSpeech::Quantifier),
        Just(PartOfSpeech::Other),
    ]
}

fn lexicon() -> impl Strategy<Value = Lexicon> {
    let category = (
        pos(),
        prop::collection::btree_map(
            "[a-z\u{4e00}-\u{4e20}]{1,4}",
            prop::option::of("[a-z][a-z ]{0,8}[a-z]"),
            1..6,
        ),
    );
    (prop::bool::ANY, prop::collection::vec(category, 1..5)).prop_map(|(en, cats)| {
        let mut lex = Lexicon::new(if en { Language::En } else { Language::Zh });
        for (i, (p, words)) in cats.into_iter().enumerate() {
            let entries = words
                .into_iter()
                .map(|(s, g)| LexEntry::new(s, g.as_deref(), p))
                .collect();
            lex.push_category(format!("cat{i}"), entries).unwrap();
        }
        lex
    })
}

proptest! {
    #[test]
    fn random_lexicons_round_trip(lex in lexicon()) {
        let text = lex.to_file_string();
        let back = Lexicon::parse(&text).unwrap();
        prop_assert_eq!(&back, &lex);
        prop_assert_eq!(back.to_file_string(), text);
    }
}
