//! Deterministic heuristic QA models that make the coupling scores
//! exercisable end to end without any trained weights.
//!
//! The coupled mode mirrors a select-and-forget pipeline: pick the facts that
//! look relevant, drop everything else, and answer from what is left, so its
//! span answers always land inside its own explanation. The decoupled mode
//! reproduces the pathology the coupling scores are meant to expose: it
//! answers from the full context while its relevance output comes from a
//! perturbed question, so explanation and answer frequently disagree.

use std::collections::{BTreeMap, BTreeSet};

use crate::adapter::{
    canonical_rendering, slice_chars, AdapterError, ModelPrediction, QaModel, SpanLocation,
};
use crate::corpus::{enumerate_facts, remove_facts, resolve_fact, Answer, Article, FactId};
use crate::coupling::RelevancePrediction;
use crate::metrics::{multiset_overlap, normalize_answer};

/// Default fact budget for the selector; HotpotQA's gold explanations are
/// built from two articles.
pub const DEFAULT_TOP_M: usize = 2;

const YES_QUESTION_STARTERS: [&str; 7] = ["is", "are", "was", "were", "does", "do", "did"];
const MAX_ANSWER_TOKENS: usize = 8;

/// Which wiring of selector and extractor to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefMode {
    /// Select facts, forget the rest, answer from the reduced context.
    Coupled,
    /// Answer from the full context; relevance from a perturbed question.
    Decoupled,
}

impl RefMode {
    /// Reads `XQA_REF_MODE` ("coupled"/"decoupled"); anything else, including
    /// an unset variable, means coupled.
    pub fn from_env() -> Self {
        match std::env::var("XQA_REF_MODE") {
            Ok(v) if v.eq_ignore_ascii_case("decoupled") => RefMode::Decoupled,
            _ => RefMode::Coupled,
        }
    }
}

fn overlap_score(question_tokens: &[&str], sentence: &str) -> f64 {
    let normalized = normalize_answer(sentence);
    let tokens: Vec<&str> = normalized.split_whitespace().collect();
    multiset_overlap(question_tokens, &tokens) as f64 / (1.0 + tokens.len() as f64)
}

/// Scores every fact by lexical overlap with the question and marks the top
/// `m` as relevant (ties by fact id). Scores are rescaled to [0, 1] by the
/// maximum; an all-zero profile stays all-zero, in which case the relevant
/// set is simply the first `m` facts in fact-id order.
pub fn select_facts(question: &str, context: &[Article], m: usize) -> RelevancePrediction {
    let q_norm = normalize_answer(question);
    let q_tokens: Vec<&str> = q_norm.split_whitespace().collect();
    let mut scores: BTreeMap<FactId, f64> = BTreeMap::new();
    for fact in enumerate_facts(context) {
        let sentence = resolve_fact(context, &fact).expect("enumerated facts resolve");
        scores.insert(fact, overlap_score(&q_tokens, sentence));
    }
    let max = scores.values().copied().fold(0.0, f64::max);
    if max > 0.0 {
        for score in scores.values_mut() {
            *score /= max;
        }
    }
    let mut ranked: Vec<&FactId> = scores.keys().collect();
    ranked.sort_by(|a, b| {
        scores[*b]
            .partial_cmp(&scores[*a])
            .expect("scores are finite")
            .then_with(|| a.cmp(b))
    });
    let relevant: BTreeSet<FactId> = ranked.into_iter().take(m).cloned().collect();
    RelevancePrediction::new(scores, relevant).expect("selector output is well-formed")
}

/// Whitespace tokens of `s` as character ranges.
fn token_ranges(s: &str) -> Vec<(usize, usize)> {
    let mut ranges = Vec::new();
    let mut start = None;
    let mut len = 0;
    for (i, c) in s.chars().enumerate() {
        len = i + 1;
        if c.is_whitespace() {
            if let Some(st) = start.take() {
                ranges.push((st, i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(st) = start {
        ranges.push((st, len));
    }
    ranges
}

/// Extracts an answer deterministically.
///
/// Questions whose first normalized token reads like a yes/no question get
///`Yes`. Otherwise the highest-overlap sentence is chosen and the answer is
/// its longest contiguous token run (capped at [`MAX_ANSWER_TOKENS`]) that
/// contains no question token, falling back to the whole sentence when every
/// token appears in the question. A context without any sentence yields the
/// documented `Yes` sentinel with no span.
pub fn extract_answer(question: &str, context: &[Article]) -> (Answer, Option<SpanLocation>) {
    let q_norm = normalize_answer(question);
    let q_tokens: Vec<&str> = q_norm.split_whitespace().collect();
    if let Some(first) = q_tokens.first() {
        if YES_QUESTION_STARTERS.contains(first) {
            return (Answer::Yes, None);
        }
    }

    let mut best: Option<(f64, FactId, usize, usize)> = None;
    for (article_idx, article) in context.iter().enumerate() {
        for (sent_idx, sentence) in article.sentences.iter().enumerate() {
            if sentence.split_whitespace().next().is_none() {
                continue;
            }
            let score = overlap_score(&q_tokens, sentence);
            let fact = FactId::new(article.title.clone(), sent_idx);
            let better = match &best {
                None => true,
                Some((best_score, best_fact, _, _)) => {
                    score > *best_score || (score == *best_score && fact < *best_fact)
                }
            };
            if better {
                best = Some((score, fact, article_idx, sent_idx));
            }
        }
    }
    let Some((_, _, article_idx, sent_idx)) = best else {
        return (Answer::Yes, None);
    };

    let sentence = &context[article_idx].sentences[sent_idx];
    let q_set: BTreeSet<&str> = q_tokens.iter().copied().collect();
    let tokens = token_ranges(sentence);
    let is_question_token = |&(lo, hi): &(usize, usize)| {
        let raw = slice_chars(sentence, lo, hi).expect("token range is valid");
        let normalized = normalize_answer(raw);
        !normalized.is_empty() && q_set.contains(normalized.as_str())
    };

    // Maximal runs of non-question tokens; pick the one with the largest
    // capped length, earliest on ties.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut run_start = None;
    for (i, token) in tokens.iter().enumerate() {
        if is_question_token(token) {
            if let Some(st) = run_start.take() {
                runs.push((st, i));
            }
        } else if run_start.is_none() {
            run_start = Some(i);
        }
    }
    if let Some(st) = run_start {
        runs.push((st, tokens.len()));
    }
    let best_run = runs.iter().copied().max_by_key(|(lo, hi)| {
        // Reverse the start index so ties prefer the earliest run.
        ((hi - lo).min(MAX_ANSWER_TOKENS), usize::MAX - lo)
    });

    let (char_start, char_end) = match best_run {
        Some((lo, hi)) => {
            let take = (hi - lo).min(MAX_ANSWER_TOKENS);
            (tokens[lo].0, tokens[lo + take - 1].1)
        }
        // Every token appears in the question: answer the whole sentence.
        None => (0, sentence.chars().count()),
    };
    let text = slice_chars(sentence, char_start, char_end)
        .expect("answer range is valid")
        .to_string();
    let sentence_start = canonical_rendering(context)[article_idx].sentence_spans[sent_idx].0;
    let span = SpanLocation {
        article: article_idx,
        start: sentence_start + char_start,
        end: sentence_start + char_end,
    };
    (Answer::Span(text), Some(span))
}

/// The bundled deterministic model, a pure function of (question, context,
/// config); safe for unlimited concurrency.
#[derive(Debug, Clone)]
pub struct ReferenceModel {
    pub mode: RefMode,
    pub top_m: usize,
}

impl ReferenceModel {
    pub fn new(mode: RefMode) -> Self {
        Self {
            mode,
            top_m: DEFAULT_TOP_M,
        }
    }

    pub fn with_top_m(mut self, top_m: usize) -> Self {
        self.top_m = top_m.max(1);
        self
    }

    fn predict_coupled(&self, question: &str, context: &[Article]) -> ModelPrediction {
        let relevance = select_facts(question, context, self.top_m);
        let victims: BTreeSet<FactId> = enumerate_facts(context)
            .into_iter()
            .filter(|f| !relevance.relevant().contains(f))
            .collect();
        let reduced = remove_facts(context, &victims).expect("victims come from the context");
        let (answer, reduced_span) = extract_answer(question, &reduced);
        let span = reduced_span.map(|s| map_span_to_original(s, context, &reduced, &victims));
        ModelPrediction {
            answer,
            span,
            relevance,
        }
    }

    fn predict_decoupled(&self, question: &str, context: &[Article]) -> ModelPrediction {
        // Perturb the question for the selector only: reversing the string
        // character-wise destroys lexical overlap (token order alone would
        // not, since the overlap score ignores order), which is exactly the
        // explanation-unrelated-to-answer failure mode this mode reproduces.
        let perturbed: String = question.chars().rev().collect();
        let relevance = select_facts(&perturbed, context, self.top_m);
        let (answer, span) = extract_answer(question, context);
        ModelPrediction {
            answer,
            span,
            relevance,
        }
    }
}

impl QaModel for ReferenceModel {
    fn predict(
        &self,
        question: &str,
        context: &[Article],
    ) -> Result<ModelPrediction, AdapterError> {
        let prediction = match self.mode {
            RefMode::Coupled => self.predict_coupled(question, context),
            RefMode::Decoupled => self.predict_decoupled(question, context),
        };
        debug_assert_eq!(prediction.validate(context), Ok(()));
        Ok(prediction)
    }
}

/// Maps a span located in a reduced context back into the original context's
/// rendering. Article indices survive reduction (emptied articles are
/// retained); sentence positions are recovered through the survivor list.
fn map_span_to_original(
    span: SpanLocation,
    original: &[Article],
    reduced: &[Article],
    victims: &BTreeSet<FactId>,
) -> SpanLocation {
    let reduced_rendered = &canonical_rendering(reduced)[span.article];
    let reduced_sent = reduced_rendered
        .sentence_spans
        .iter()
        .position(|(lo, hi)| span.start >= *lo && span.end <= *hi)
        .expect("extractor spans lie within a single sentence");
    let offset = span.start - reduced_rendered.sentence_spans[reduced_sent].0;
    let length = span.end - span.start;

    let article = &original[span.article];
    let survivors: Vec<usize> = (0..article.sentences.len())
        .filter(|i| !victims.contains(&FactId::new(article.title.clone(), *i)))
        .collect();
    let original_sent = survivors[reduced_sent];
    let base = canonical_rendering(original)[span.article].sentence_spans[original_sent].0;
    SpanLocation {
        article: span.article,
        start: base + offset,
        end: base + offset + length,
    }
}
