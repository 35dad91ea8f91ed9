//! Line-delimited corpus and ledger files.
//!
//! Corpus file:
//!
//! ```text
//! #taskcorpus corpus v1
//! #lang  zh
//! #version  <n>
//! #provenance  <hex>
//! <id>  <review>  <template_id>;<slot>=<value>;...  <token> <token> ...  <note>
//! ```
//!
//! Ledger file:
//!
//! ```text
//! #taskcorpus ledger v1
//! <item_id>  <accept|reject|skip>  <timestamp>  <note>
//! ```
//!
//! Fields are tab separated. Inside a field, `\`, tab, newline, carriage
//! return, space, `;` and `=` are escaped as `\\`, `\t`, `\n`, `\r`, `\s`,
//! `\c` and `\q`, so the raw separators never occur in field content. An
//! empty note field means no note.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{CorpusError, CorpusItem, Decision, LedgerEntry, ReviewLedger, SeedCorpus};
use crate::lexicon::Language;
use crate::sentence::{MeaningRepresentation, Sentence};

const CORPUS_MAGIC: &str = "#taskcorpus corpus v1";
const LEDGER_MAGIC: &str = "#taskcorpus ledger v1";

pub fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            ' ' => out.push_str("\\s"),
            ';' => out.push_str("\\c"),
            '=' => out.push_str("\\q"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_field(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next() {
            Some('\\') => '\\',
            Some('t') => '\t',
            Some('n') => '\n',
            Some('r') => '\r',
            Some('s') => ' ',
            Some('c') => ';',
            Some('q') => '=',
            Some(other) => return Err(format!("unknown escape `\\{other}`")),
            None => return Err("dangling `\\`".into()),
        });
    }
    Ok(out)
}

fn encode_mr(mr: &MeaningRepresentation) -> String {
    let mut out = escape_field(&mr.template_id);
    for (slot, value) in &mr.bindings {
        out.push(';');
        out.push_str(&escape_field(slot));
        out.push('=');
        out.push_str(&escape_field(value));
    }
    out
}

fn decode_mr(field: &str) -> Result<MeaningRepresentation, String> {
    let mut parts = field.split(';');
    let template_id = unescape_field(parts.next().unwrap_or_default())?;
    let mut mr = MeaningRepresentation::new(template_id);
    for part in parts {
        let (slot, value) = part
            .split_once('=')
            .ok_or_else(|| format!("binding `{part}` lacks `=`"))?;
        mr.bindings.push((unescape_field(slot)?, unescape_field(value)?));
    }
    Ok(mr)
}

fn encode_note(note: &Option<String>) -> String {
    note.as_deref().map(escape_field).unwrap_or_default()
}

fn decode_note(field: &str) -> Result<Option<String>, String> {
    if field.is_empty() {
        Ok(None)
    } else {
        unescape_field(field).map(Some)
    }
}

impl SeedCorpus {
    pub fn to_record_string(&self) -> String {
        let mut out = format!(
            "{CORPUS_MAGIC}\n#lang\t{}\n#version\t{}\n#provenance\t{}\n",
            self.language,
            self.version,
            escape_field(&self.provenance)
        );
        for item in &self.items {
            let tokens: Vec<String> = item.sentence.tokens().iter().map(|t| escape_field(t)).collect();
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                item.id,
                item.review.tag(),
                encode_mr(&item.mr),
                tokens.join(" "),
                encode_note(&item.reviewer_note)
            ));
        }
        out
    }

    pub fn parse_records(text: &str) -> Result<Self, CorpusError> {
        let err = |line: usize, message: String| CorpusError::Parse {
            kind: "corpus",
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim_end() == CORPUS_MAGIC => {}
            _ => return Err(err(1, format!("missing `{CORPUS_MAGIC}` header"))),
        }
        let mut corpus = SeedCorpus {
            items: Vec::new(),
            provenance: String::new(),
            version: 1,
            language: Language::Zh,
        };
        let mut seen_ids = std::collections::HashSet::new();
        for (idx, raw) in lines {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let (key, value) = header.split_once('\t').unwrap_or((header, ""));
                match key {
                    "lang" => corpus.language = value.parse().map_err(|e| err(line_no, e))?,
                    "version" => {
                        corpus.version = value
                            .parse()
                            .map_err(|_| err(line_no, format!("bad version `{value}`")))?
                    }
                    "provenance" => corpus.provenance = unescape_field(value).map_err(|e| err(line_no, e))?,
                    _ => {}
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [id, review, mr, tokens, note] = fields[..] else {
                return Err(err(line_no, format!("expected 5 fields, found {}", fields.len())));
            };
            let id: u64 = id.parse().map_err(|_| err(line_no, format!("bad id `{id}`")))?;
            if !seen_ids.insert(id) {
                return Err(err(line_no, format!("duplicate id {id}")));
            }
            let tokens = tokens
                .split(' ')
                .filter(|t| !t.is_empty())
                .map(unescape_field)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(line_no, e))?;
            corpus.items.push(CorpusItem {
                id,
                sentence: Sentence::new(tokens, corpus.language),
                mr: decode_mr(mr).map_err(|e| err(line_no, e))?,
                review: review.parse().map_err(|e| err(line_no, e))?,
                reviewer_note: decode_note(note).map_err(|e| err(line_no, e))?,
            });
        }
        Ok(corpus)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        fs::write(path, self.to_record_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        Self::parse_records(&fs::read_to_string(path)?)
    }
}

fn ledger_line(e: &LedgerEntry) -> String {
    format!(
        "{}\t{}\t{}\t{}\n",
        e.item_id,
        e.decision.tag(),
        e.timestamp,
        encode_note(&e.note)
    )
}

impl ReviewLedger {
    pub fn to_record_string(&self) -> String {
        let mut out = format!("{LEDGER_MAGIC}\n");
        for e in self.entries() {
            out.push_str(&ledger_line(e));
        }
        out
    }

    pub fn parse_records(text: &str) -> Result<Self, CorpusError> {
        let err = |line: usize, message: String| CorpusError::Parse {
            kind: "ledger",
            line,
            message,
        };
        let mut ledger = ReviewLedger::new();
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim_end() == LEDGER_MAGIC => {}
            None => return Ok(ledger),
            _ => return Err(err(1, format!("missing `{LEDGER_MAGIC}` header"))),
        }
        for (idx, raw) in lines {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [id, decision, ts, note] = fields[..] else {
                return Err(err(line_no, format!("expected 4 fields, found {}", fields.len())));
            };
            ledger.append(LedgerEntry {
                item_id: id.parse().map_err(|_| err(line_no, format!("bad id `{id}`")))?,
                decision: decision.parse::<Decision>().map_err(|e| err(line_no, e))?,
                timestamp: ts.parse().map_err(|_| err(line_no, format!("bad timestamp `{ts}`")))?,
                note: decode_note(note).map_err(|e| err(line_no, e))?,
            });
        }
        Ok(ledger)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        fs::write(path, self.to_record_string())?;
        Ok(())
    }

    /// Reads a ledger; a missing file is an empty ledger.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        match fs::read_to_string(path) {
            Ok(text) => Self::parse_records(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e.into()),
        }
    }

    /// Appends one entry to a ledger file, writing the header if the file is new.
    pub fn append_to_file(path: impl AsRef<Path>, entry: &LedgerEntry) -> Result<(), CorpusError> {
        let path = path.as_ref();
        let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            writeln!(f, "{LEDGER_MAGIC}")?;
        }
        f.write_all(ledger_line(entry).as_bytes())?;
        f.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_seed_corpus_with, ReviewState};
    use crate::lexicon::Lexicon;
    use crate::template::{bundled_rules, bundled_templates, CyclePolicy};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn escape_round_trips(s in any::<String>()) {
            let e = escape_field(&s);
            prop_assert!(!e.contains(['\t', '\n', '\r', ' ', ';', '=']));
            prop_assert_eq!(unescape_field(&e).unwrap(), s);
        }
    }

    #[test]
    fn corpus_file_round_trip() {
        let lex = Lexicon::bundled();
        let mut c = build_seed_corpus_with(
            &bundled_templates(),
            &lex,
            CyclePolicy::FullProduct,
            Some(&bundled_rules()),
            40,
            5,
        )
        .unwrap();
        c.items[0].review = ReviewState::Rejected;
        c.items[0].reviewer_note = Some("odd; word = wrong\tindeed".into());
        let text = c.to_record_string();
        let back = SeedCorpus::parse_records(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_record_string(), text);
    }

    #[test]
    fn ledger_round_trip_and_append() {
        let dir = std::env::temp_dir().join(format!("ledger-test-{}", std::process::id()));
        let _ = fs::remove_file(&dir);
        let a = LedgerEntry {
            item_id: 1,
            decision: Decision::Reject,
            timestamp: 10,
            note: Some("bad order".into()),
        };
        let b = LedgerEntry {
            item_id: 2,
            decision: Decision::Accept,
            timestamp: 11,
            note: None,
        };
        ReviewLedger::append_to_file(&dir, &a).unwrap();
        ReviewLedger::append_to_file(&dir, &b).unwrap();
        let ledger = ReviewLedger::load(&dir).unwrap();
        assert_eq!(ledger.entries(), &[a, b]);
        assert_eq!(ReviewLedger::parse_records(&ledger.to_record_string()).unwrap(), ledger);
        fs::remove_file(&dir).unwrap();
    }

    #[test]
    fn malformed_lines() {
        assert!(SeedCorpus::parse_records("nope\n").is_err());
        let bad = format!("{CORPUS_MAGIC}\n0\taccepted\tt;a=b\n");
        assert!(matches!(
            SeedCorpus::parse_records(&bad),
            Err(CorpusError::Parse { line: 2, .. })
        ));
        let bad = format!("{LEDGER_MAGIC}\n0\tmaybe\t1\t\n");
        assert!(ReviewLedger::parse_records(&bad).is_err());
    }
}
