//! HotpotQA-format corpus loading, validation, fact addressing and fact removal.
//!
//! A context is an ordered list of articles; every sentence in it is a "fact"
//! addressed by [`FactId`] (article title + sentence index). Contexts are
//! immutable after load; [`remove_facts`] returns edited copies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Errors raised while loading or editing corpora.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed corpus JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("record {record}: {detail}")]
    Schema { record: String, detail: String },
    #[error("record {record}: gold fact {fact} does not resolve in the context")]
    DanglingFact { record: String, fact: FactId },
    #[error("fact {0} does not resolve in the context")]
    UnknownFact(FactId),
}

/// One titled article: a title plus an ordered list of sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(String, Vec<String>)", into = "(String, Vec<String>)")]
pub struct Article {
    pub title: String,
    pub sentences: Vec<String>,
}

impl Article {
    pub fn new(title: impl Into<String>, sentences: Vec<String>) -> Self {
        Self {
            title: title.into(),
            sentences,
        }
    }
}

impl From<(String, Vec<String>)> for Article {
    fn from((title, sentences): (String, Vec<String>)) -> Self {
        Self { title, sentences }
    }
}

impl From<Article> for (String, Vec<String>) {
    fn from(a: Article) -> Self {
        (a.title, a.sentences)
    }
}

/// Address of a single sentence: article title plus sentence index.
///
/// Total ordering is (title, sent_idx); every deterministic tie-break in the
/// harness relies on it. Serializes as the two-element `[title, idx]` array
/// used by the HotpotQA distribution.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(String, usize)", into = "(String, usize)")]
pub struct FactId {
    pub title: String,
    pub sent_idx: usize,
}

impl FactId {
    pub fn new(title: impl Into<String>, sent_idx: usize) -> Self {
        Self {
            title: title.into(),
            sent_idx,
        }
    }
}

impl From<(String, usize)> for FactId {
    fn from((title, sent_idx): (String, usize)) -> Self {
        Self { title, sent_idx }
    }
}

impl From<FactId> for (String, usize) {
    fn from(f: FactId) -> Self {
        (f.title, f.sent_idx)
    }
}

impl fmt::Display for FactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.title, self.sent_idx)
    }
}

/// The ternary answer type: yes, no, or a text span from the context.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Answer {
    Yes,
    No,
    Span(String),
}

impl Answer {
    /// Maps a raw answer string: "yes"/"no" (trimmed, case-insensitive) become
    /// the ternary cases, everything else is a span.
    pub fn parse(raw: &str) -> Self {
        match raw.trim().to_lowercase().as_str() {
            "yes" => Answer::Yes,
            "no" => Answer::No,
            _ => Answer::Span(raw.to_string()),
        }
    }

    /// Renders the answer as plain text ("yes"/"no" for the ternary cases).
    pub fn as_text(&self) -> &str {
        match self {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::Span(s) => s,
        }
    }
}

/// One QA example: question, multi-article context, gold answer, gold facts.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub question: String,
    pub context: Vec<Article>,
    pub gold_answer: Answer,
    pub gold_facts: BTreeSet<FactId>,
    /// Extra record fields (`type`, `level`, ...) preserved opaquely.
    pub extra: serde_json::Map<String, Value>,
}

impl Instance {
    /// All facts of this instance's context, in enumeration order.
    pub fn facts(&self) -> Vec<FactId> {
        enumerate_facts(&self.context)
    }
}

/// Governs how dangling gold facts are handled at load time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Abort the load on the first invalid record (default).
    #[default]
    Strict,
    /// Skip invalid records, recording them in [`Corpus::skipped`].
    SkipInvalid,
}

/// A record skipped under [`Strictness::SkipInvalid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRecord {
    pub id: String,
    pub reason: String,
}

/// An ordered list of instances, immutable after load.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub instances: Vec<Instance>,
    pub skipped: Vec<SkippedRecord>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    #[serde(rename = "_id")]
    id: String,
    question: String,
    answer: String,
    supporting_facts: Vec<FactId>,
    context: Vec<Article>,
    #[serde(flatten)]
    extra: serde_json::Map<String, Value>,
}

/// Loads a HotpotQA-format JSON array from `path`.
pub fn load_corpus(path: impl AsRef<Path>, strictness: Strictness) -> Result<Corpus, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    load_corpus_str(&text, strictness)
}

/// Loads a HotpotQA-format JSON array from a string.
pub fn load_corpus_str(text: &str, strictness: Strictness) -> Result<Corpus, CorpusError> {
    let raw: Vec<Value> = serde_json::from_str(text)?;
    let mut corpus = Corpus::default();
    let mut seen_ids = BTreeSet::new();
    for (idx, value) in raw.into_iter().enumerate() {
        // Keep the record id (or position) available for error messages even
        // when field-level deserialization fails.
        let fallback_id = value
            .get("_id")
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| format!("#{idx}"));
        let record: RawRecord = serde_json::from_value(value).map_err(|e| CorpusError::Schema {
            record: fallback_id.clone(),
            detail: e.to_string(),
        })?;
        match validate_record(record) {
            Ok(instance) => {
                if !seen_ids.insert(instance.id.clone()) {
                    return Err(CorpusError::Schema {
                        record: instance.id,
                        detail: "duplicate instance id".into(),
                    });
                }
                corpus.instances.push(instance);
            }
            Err(err @ CorpusError::DanglingFact { .. })
                if strictness == Strictness::SkipInvalid =>
            {
                corpus.skipped.push(SkippedRecord {
                    id: fallback_id,
                    reason: err.to_string(),
                });
            }
            Err(err) => return Err(err),
        }
    }
    Ok(corpus)
}

fn validate_record(record: RawRecord) -> Result<Instance, CorpusError> {
    let mut titles = BTreeSet::new();
    for article in &record.context {
        if article.title.is_empty() {
            return Err(CorpusError::Schema {
                record: record.id,
                detail: "article with empty title".into(),
            });
        }
        if !titles.insert(article.title.clone()) {
            // FactId resolution is by title, so duplicates would be ambiguous.
            return Err(CorpusError::Schema {
                record: record.id.clone(),
                detail: format!("duplicate article title `{}`", article.title),
            });
        }
    }
    let gold_answer = Answer::parse(&record.answer);
    if matches!(&gold_answer, Answer::Span(s) if s.trim().is_empty()) {
        return Err(CorpusError::Schema {
            record: record.id,
            detail: "empty answer field".into(),
        });
    }
    let mut gold_facts = BTreeSet::new();
    for fact in record.supporting_facts {
        if resolve_fact(&record.context, &fact).is_none() {
            return Err(CorpusError::DanglingFact {
                record: record.id,
                fact,
            });
        }
        gold_facts.insert(fact);
    }
    Ok(Instance {
        id: record.id,
        question: record.question,
        context: record.context,
        gold_answer,
        gold_facts,
        extra: record.extra,
    })
}

/// Serializes a corpus back into the HotpotQA JSON array layout.
pub fn corpus_to_json(corpus: &Corpus) -> Value {
    let records: Vec<RawRecord> = corpus
        .instances
        .iter()
        .map(|inst| RawRecord {
            id: inst.id.clone(),
            question: inst.question.clone(),
            answer: inst.gold_answer.as_text().to_string(),
            supporting_facts: inst.gold_facts.iter().cloned().collect(),
            context: inst.context.clone(),
            extra: inst.extra.clone(),
        })
        .collect();
    serde_json::to_value(records).expect("corpus records serialize")
}

/// Writes a corpus to `path` in the HotpotQA JSON array layout.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let text = serde_json::to_string_pretty(&corpus_to_json(corpus))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Looks up the sentence text a fact points at, if it resolves.
pub fn resolve_fact<'a>(context: &'a [Article], fact: &FactId) -> Option<&'a str> {
    context
        .iter()
        .find(|a| a.title == fact.title)
        .and_then(|a| a.sentences.get(fact.sent_idx))
        .map(String::as_str)
}

/// All facts of a context in article order, then sentence order.
pub fn enumerate_facts(context: &[Article]) -> Vec<FactId> {
    context
        .iter()
        .flat_map(|article| {
            (0..article.sentences.len()).map(|i| FactId::new(article.title.clone(), i))
        })
        .collect()
}

/// Returns a copy of `context` with the victim sentences deleted.
///
/// Surviving sentences keep their relative order and are re-indexed densely
/// per article; an article whose sentences are all removed is retained with an
/// empty sentence list so its title stays visible. Fact ids into the original
/// context are invalid for the result and must be recomputed.
pub fn remove_facts(
    context: &[Article],
    victims: &BTreeSet<FactId>,
) -> Result<Vec<Article>, CorpusError> {
    for victim in victims {
        if resolve_fact(context, victim).is_none() {
            return Err(CorpusError::UnknownFact(victim.clone()));
        }
    }
    // Group victims per title for a single pass over each article.
    let mut per_title: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for victim in victims {
        per_title
            .entry(victim.title.as_str())
            .or_default()
            .insert(victim.sent_idx);
    }
    Ok(context
        .iter()
        .map(|article| {
            let doomed = per_title.get(article.title.as_str());
            let sentences = article
                .sentences
                .iter()
                .enumerate()
                .filter(|(i, _)| doomed.is_none_or(|d| !d.contains(i)))
                .map(|(_, s)| s.clone())
                .collect();
            Article {
                title: article.title.clone(),
                sentences,
            }
        })
        .collect())
}
