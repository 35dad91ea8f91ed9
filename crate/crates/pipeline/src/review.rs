//! Presenting seed items to a reviewer and recording the verdicts.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use taskcorpus_core::corpus::{CorpusItem, Decision, LedgerEntry, ReviewLedger, SeedCorpus};
use taskcorpus_core::gloss::render_gloss;
use taskcorpus_core::template::SentenceValidator;
use taskcorpus_core::Lexicon;

use crate::error::PipelineError;

/// What the reviewer is shown for one item.
pub struct ReviewPrompt<'a> {
    pub item: &'a CorpusItem,
    pub gloss: String,
    /// 1-based position among the items presented in this session.
    pub position: usize,
    pub pending: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewAnswer {
    pub decision: Decision,
    pub note: Option<String>,
}

impl ReviewAnswer {
    pub fn new(decision: Decision) -> Self {
        Self { decision, note: None }
    }
}

/// Supplies accept/reject/skip verdicts. `None` interrupts the session;
/// everything answered so far is kept.
pub trait ReviewDecisionSource {
    fn decide(&mut self, prompt: &ReviewPrompt<'_>) -> Result<Option<ReviewAnswer>, PipelineError>;
}

/// Accepts every item.
#[derive(Debug, Clone, Copy, Default)]
pub struct AcceptAll;

impl ReviewDecisionSource for AcceptAll {
    fn decide(&mut self, _: &ReviewPrompt<'_>) -> Result<Option<ReviewAnswer>, PipelineError> {
        Ok(Some(ReviewAnswer::new(Decision::Accept)))
    }
}

/// Decisions read from a file of `id<TAB>decision[<TAB>note]` lines.
/// A `*<TAB>decision` line sets the answer for unlisted ids; without one an
/// unlisted id interrupts the session.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScriptedDecisions {
    answers: HashMap<u64, ReviewAnswer>,
    default: Option<Decision>,
}

impl ScriptedDecisions {
    pub fn new(default: Option<Decision>) -> Self {
        Self {
            answers: HashMap::new(),
            default,
        }
    }

    pub fn insert(&mut self, id: u64, answer: ReviewAnswer) {
        self.answers.insert(id, answer);
    }

    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut s = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |m: String| PipelineError::Review(format!("decision script line {}: {m}", n + 1));
            let mut fields = line.splitn(3, '\t');
            let id = fields.next().unwrap_or_default().trim();
            let decision: Decision = fields
                .next()
                .ok_or_else(|| err("expected id<TAB>decision".into()))?
                .trim()
                .parse()
                .map_err(err)?;
            let note = fields.next().map(str::to_owned).filter(|n| !n.is_empty());
            if id == "*" {
                s.default = Some(decision);
            } else {
                let id: u64 = id.parse().map_err(|_| err(format!("bad item id `{id}`")))?;
                s.answers.insert(id, ReviewAnswer { decision, note });
            }
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?)
    }
}

impl ReviewDecisionSource for ScriptedDecisions {
    fn decide(&mut self, prompt: &ReviewPrompt<'_>) -> Result<Option<ReviewAnswer>, PipelineError> {
        Ok(self
            .answers
            .get(&prompt.item.id)
            .cloned()
            .or_else(|| self.default.map(ReviewAnswer::new)))
    }
}

/// Accepts items derivable from the template grammar and rejects the rest.
/// Stands in for a human reviewer when measuring the effect of the review gate.
pub struct GrammarReviewer {
    validator: SentenceValidator,
}

impl GrammarReviewer {
    pub fn new(validator: SentenceValidator) -> Self {
        Self { validator }
    }
}

impl ReviewDecisionSource for GrammarReviewer {
    fn decide(&mut self, prompt: &ReviewPrompt<'_>) -> Result<Option<ReviewAnswer>, PipelineError> {
        Ok(Some(if self.validator.is_valid(prompt.item.sentence.tokens()) {
            ReviewAnswer::new(Decision::Accept)
        } else {
            ReviewAnswer {
                decision: Decision::Reject,
                note: Some("not derivable from the templates".into()),
            }
        }))
    }
}

/// Interactive review over any line-based input and output.
pub struct TerminalReview<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> TerminalReview<R, W> {
    pub fn new(input: R, output: W) -> Self {
        Self { input, output }
    }

    pub fn into_output(self) -> W {
        self.output
    }
}

impl<R: BufRead, W: Write> ReviewDecisionSource for TerminalReview<R, W> {
    fn decide(&mut self, prompt: &ReviewPrompt<'_>) -> Result<Option<ReviewAnswer>, PipelineError> {
        let io = |e| PipelineError::io(Path::new("<terminal>"), e);
        let item = prompt.item;
        writeln!(
            self.output,
            "\n[{}/{}] item {}\n  {}\n  {}\n  mr: {}",
            prompt.position,
            prompt.pending,
            item.id,
            item.sentence.surface(),
            prompt.gloss,
            item.mr
        )
        .map_err(io)?;
        loop {
            write!(
                self.output,
                "(a)ccept / (r)eject / (s)kip / (q)uit, optional note after a space: "
            )
            .map_err(io)?;
            self.output.flush().map_err(io)?;
            let mut line = String::new();
            if self.input.read_line(&mut line).map_err(io)? == 0 {
                return Ok(None);
            }
            let line = line.trim();
            let (cmd, note) = match line.split_once(char::is_whitespace) {
                Some((c, n)) => (c, Some(n.trim().to_owned()).filter(|n| !n.is_empty())),
                None => (line, None),
            };
            if cmd == "q" || cmd == "quit" {
                return Ok(None);
            }
            match cmd.parse::<Decision>() {
                Ok(decision) => return Ok(Some(ReviewAnswer { decision, note })),
                Err(_) => writeln!(self.output, "unrecognized answer `{cmd}`").map_err(io)?,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewOutcome {
    /// Decisions recorded in this session.
    pub recorded: usize,
    /// False when the source interrupted before every item was seen.
    pub completed: bool,
}

/// Presents every item not yet in `ledger`, in id order, appending each
/// verdict to `ledger` and passing it to `on_entry` as soon as it is made.
/// Timestamps are the ledger's running sequence number, so identical answers
/// give identical ledgers regardless of where they came from.
pub fn review_session(
    corpus: &SeedCorpus,
    lexicon: &Lexicon,
    source: &mut dyn ReviewDecisionSource,
    ledger: &mut ReviewLedger,
    mut on_entry: impl FnMut(&LedgerEntry) -> Result<(), PipelineError>,
) -> Result<ReviewOutcome, PipelineError> {
    if corpus.is_empty() {
        return Err(PipelineError::Review("nothing to review: the corpus is empty".into()));
    }
    let pending: Vec<&CorpusItem> = corpus.items.iter().filter(|i| !ledger.contains(i.id)).collect();
    let total = pending.len();
    let mut recorded = 0;
    for (n, item) in pending.into_iter().enumerate() {
        let prompt = ReviewPrompt {
            item,
            gloss: render_gloss(item.sentence.tokens(), lexicon),
            position: n + 1,
            pending: total,
        };
        let Some(answer) = source.decide(&prompt)? else {
            return Ok(ReviewOutcome {
                recorded,
                completed: false,
            });
        };
        let entry = LedgerEntry {
            item_id: item.id,
            decision: answer.decision,
            timestamp: ledger.len() as u64 + 1,
            note: answer.note,
        };
        on_entry(&entry)?;
        ledger.append(entry);
        recorded += 1;
    }
    Ok(ReviewOutcome {
        recorded,
        completed: true,
    })
}

/// [`review_session`] against a ledger file: earlier decisions are loaded
/// and skipped, new ones are appended to the file one line at a time.
pub fn review_with_ledger_file(
    corpus: &SeedCorpus,
    lexicon: &Lexicon,
    source: &mut dyn ReviewDecisionSource,
    ledger_path: &Path,
) -> Result<(ReviewLedger, ReviewOutcome), PipelineError> {
    let mut ledger = ReviewLedger::load(ledger_path)?;
    let outcome = review_session(corpus, lexicon, source, &mut ledger, |e| {
        ReviewLedger::append_to_file(ledger_path, e).map_err(Into::into)
    })?;
    Ok((ledger, outcome))
}
