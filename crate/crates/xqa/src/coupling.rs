//! The two answer-explanation coupling scores.
//!
//! FaRM probes a model by deleting the facts it claims to rely on (and, as a
//! control, the facts it claims not to), re-querying, and tracking how often
//! the answer changes. LocA checks whether the predicted answer is actually
//! located inside the predicted-relevant facts. Neither score needs gold
//! annotations.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::adapter::{canonical_rendering, AdapterError, ModelPrediction, QaModel};
use crate::corpus::{enumerate_facts, remove_facts, Answer, Article, Corpus, FactId};
use crate::metrics::normalize_answer;

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error("relevance prediction does not match the context: {0}")]
    MismatchedPrediction(String),
    #[error("cannot score an empty corpus")]
    EmptyCorpus,
    #[error("instance {instance_id}: {source}")]
    Adapter {
        instance_id: String,
        source: AdapterError,
    },
    #[error("k_max must be at least 1")]
    BadKMax,
    #[error("worker pool: {0}")]
    Scheduler(String),
}

/// A model's per-fact relevance output: scores in [0, 1] plus the binarized
/// relevant set. The scores must cover exactly the facts of the context the
/// prediction was made for.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevancePrediction {
    scores: BTreeMap<FactId, f64>,
    relevant: BTreeSet<FactId>,
}

impl RelevancePrediction {
    /// Builds a prediction from scores and an explicit relevant set.
    pub fn new(
        scores: BTreeMap<FactId, f64>,
        relevant: BTreeSet<FactId>,
    ) -> Result<Self, CouplingError> {
        for (fact, score) in &scores {
            if !(0.0..=1.0).contains(score) {
                return Err(CouplingError::MismatchedPrediction(format!(
                    "score {score} for {fact} outside [0, 1]"
                )));
            }
        }
        if let Some(stray) = relevant.iter().find(|f| !scores.contains_key(*f)) {
            return Err(CouplingError::MismatchedPrediction(format!(
                "relevant fact {stray} has no score"
            )));
        }
        Ok(Self { scores, relevant })
    }

    /// Builds a prediction from scores alone, binarizing at `threshold`.
    pub fn from_scores(
        scores: BTreeMap<FactId, f64>,
        threshold: f64,
    ) -> Result<Self, CouplingError> {
        let relevant = scores
            .iter()
            .filter(|(_, s)| **s >= threshold)
            .map(|(f, _)| f.clone())
            .collect();
        Self::new(scores, relevant)
    }

    pub fn scores(&self) -> &BTreeMap<FactId, f64> {
        &self.scores
    }

    pub fn relevant(&self) -> &BTreeSet<FactId> {
        &self.relevant
    }

    /// True when the scores cover exactly the context's facts.
    pub fn covers(&self, context: &[Article]) -> bool {
        let facts = enumerate_facts(context);
        facts.len() == self.scores.len() && facts.iter().all(|f| self.scores.contains_key(f))
    }

    fn require_covers(&self, context: &[Article]) -> Result<(), CouplingError> {
        if self.covers(context) {
            Ok(())
        } else {
            Err(CouplingError::MismatchedPrediction(
                "scores do not cover the context's facts".into(),
            ))
        }
    }
}

/// Facts predicted relevant, most relevant first (ties by fact id).
fn relevant_by_descending_score(rp: &RelevancePrediction) -> Vec<FactId> {
    let mut facts: Vec<&FactId> = rp.relevant.iter().collect();
    facts.sort_by(|a, b| {
        rp.scores[*b]
            .partial_cmp(&rp.scores[*a])
            .expect("scores are finite")
            .then_with(|| a.cmp(b))
    });
    facts.into_iter().cloned().collect()
}

/// Facts predicted irrelevant, least relevant first (ties by fact id).
fn irrelevant_by_ascending_score(context: &[Article], rp: &RelevancePrediction) -> Vec<FactId> {
    let mut facts: Vec<FactId> = enumerate_facts(context)
        .into_iter()
        .filter(|f| !rp.relevant.contains(f))
        .collect();
    facts.sort_by(|a, b| {
        rp.scores[a]
            .partial_cmp(&rp.scores[b])
            .expect("scores are finite")
            .then_with(|| a.cmp(b))
    });
    facts
}

/// Removes up to `k` facts the model predicts to be relevant, in order of
/// decreasing predicted relevance. When fewer than `k` facts are predicted
/// relevant, all of them go.
pub fn reduce_rel(
    context: &[Article],
    rp: &RelevancePrediction,
    k: usize,
) -> Result<Vec<Article>, CouplingError> {
    rp.require_covers(context)?;
    let victims: BTreeSet<FactId> = relevant_by_descending_score(rp)
        .into_iter()
        .take(k)
        .collect();
    remove_facts(context, &victims)
        .map_err(|e| CouplingError::MismatchedPrediction(e.to_string()))
}

/// Removes up to `k` facts the model predicts to be irrelevant, in order of
/// increasing predicted relevance. Same footnote semantics as [`reduce_rel`].
pub fn reduce_irr(
    context: &[Article],
    rp: &RelevancePrediction,
    k: usize,
) -> Result<Vec<Article>, CouplingError> {
    rp.require_covers(context)?;
    let victims: BTreeSet<FactId> = irrelevant_by_ascending_score(context, rp)
        .into_iter()
        .take(k)
        .collect();
    remove_facts(context, &victims)
        .map_err(|e| CouplingError::MismatchedPrediction(e.to_string()))
}

/// Fractions of changed answers per removal depth, over the same corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemovalCurve {
    pub k_max: usize,
    /// `c_rel[k]` for k = 0..=k_max; `c_rel[0]` is 0 by definition.
    pub c_rel: Vec<f64>,
    pub c_irr: Vec<f64>,
}

impl RemovalCurve {
    /// FaRM(k) for 1 <= k <= k_max.
    pub fn farm(&self, k: usize) -> f64 {
        assert!(
            (1..=self.k_max).contains(&k),
            "farm(k) needs 1 <= k <= k_max"
        );
        farm_score(self.c_rel[k], self.c_irr[k])
    }
}

/// FaRM from a pair of change fractions: c_rel / (1 + c_irr).
pub fn farm_score(c_rel: f64, c_irr: f64) -> f64 {
    c_rel / (1.0 + c_irr)
}

/// Where a predicted answer sits relative to the predicted-relevant facts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerLocation {
    /// The span lies inside a single predicted-relevant sentence.
    InRelevantFact,
    /// The span lies in the context but not inside the explanation.
    OutsideRelevantFacts,
    /// The answer text occurs only in an article title. Counted in the total
    /// but in neither the inside nor the outside bucket.
    InTitle,
    /// Yes/no answers have no span; counted like the title case.
    NoSpan,
}

/// Options for [`locate_answer`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LocateOptions {
    /// When set, a span covering several sentences counts as inside if every
    /// covered sentence is predicted relevant. Default is the strict reading:
    /// boundary-crossing spans are outside.
    pub relaxed_boundaries: bool,
}

/// Classifies a prediction's answer location.
///
/// With span offsets, containment is geometric. Without them, the fallback
/// matches the normalized answer text as a substring of normalized relevant
/// sentences, then of titles (only when no sentence anywhere contains it).
pub fn locate_answer(
    prediction: &ModelPrediction,
    context: &[Article],
    opts: &LocateOptions,
) -> AnswerLocation {
    let text = match &prediction.answer {
        Answer::Yes | Answer::No => return AnswerLocation::NoSpan,
        Answer::Span(text) => text,
    };
    let relevant = prediction.relevance.relevant();
    if let Some(span) = &prediction.span {
        let Some(article) = context.get(span.article) else {
            return AnswerLocation::OutsideRelevantFacts;
        };
        let rendered = &canonical_rendering(context)[span.article];
        let within = |(lo, hi): (usize, usize)| span.start >= lo && span.end <= hi;
        if let Some(idx) = rendered.sentence_spans.iter().position(|s| within(*s)) {
            let fact = FactId::new(article.title.clone(), idx);
            return if relevant.contains(&fact) {
                AnswerLocation::InRelevantFact
            } else {
                AnswerLocation::OutsideRelevantFacts
            };
        }
        if opts.relaxed_boundaries {
            let touched: Vec<usize> = rendered
                .sentence_spans
                .iter()
                .enumerate()
                .filter(|(_, (lo, hi))| span.start < *hi && span.end > *lo)
                .map(|(i, _)| i)
                .collect();
            if !touched.is_empty()
                && touched
                    .iter()
                    .all(|i| relevant.contains(&FactId::new(article.title.clone(), *i)))
            {
                return AnswerLocation::InRelevantFact;
            }
        }
        return AnswerLocation::OutsideRelevantFacts;
    }

    // Fallback for adapters that supply no offsets.
    let needle = normalize_answer(text);
    if needle.is_empty() {
        return AnswerLocation::OutsideRelevantFacts;
    }
    for fact in relevant {
        if let Some(sentence) = crate::corpus::resolve_fact(context, fact) {
            if normalize_answer(sentence).contains(&needle) {
                return AnswerLocation::InRelevantFact;
            }
        }
    }
    let in_any_sentence = context
        .iter()
        .flat_map(|a| a.sentences.iter())
        .any(|s| normalize_answer(s).contains(&needle));
    if !in_any_sentence
        && context
            .iter()
            .any(|a| normalize_answer(&a.title).contains(&needle))
    {
        return AnswerLocation::InTitle;
    }
    AnswerLocation::OutsideRelevantFacts
}

/// Tallies of answer locations over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LocationCounts {
    /// A: total number of answers.
    pub total: usize,
    /// I: answers inside a predicted-relevant fact.
    pub inside: usize,
    /// O: answers outside the predicted-relevant facts.
    pub outside: usize,
    pub in_title: usize,
    pub no_span: usize,
}

impl LocationCounts {
    pub fn from_locations(locations: &[AnswerLocation]) -> Self {
        let mut counts = LocationCounts {
            total: locations.len(),
            inside: 0,
            outside: 0,
            in_title: 0,
            no_span: 0,
        };
        for location in locations {
            match location {
                AnswerLocation::InRelevantFact => counts.inside += 1,
                AnswerLocation::OutsideRelevantFacts => counts.outside += 1,
                AnswerLocation::InTitle => counts.in_title += 1,
                AnswerLocation::NoSpan => counts.no_span += 1,
            }
        }
        counts
    }

    /// LocA = I / (A + O).
    pub fn loca(&self) -> Result<f64, CouplingError> {
        if self.total == 0 {
            return Err(CouplingError::EmptyCorpus);
        }
        Ok(self.inside as f64 / (self.total + self.outside) as f64)
    }
}

/// LocA from the corpus fractions I/A and O/A.
pub fn loca_from_fractions(inside_frac: f64, outside_frac: f64) -> f64 {
    inside_frac / (1.0 + outside_frac)
}

/// What to do when the model fails on a reduced context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailPolicy {
    /// Count the instance's answer as changed for that k (default).
    #[default]
    CountAsChanged,
    /// Abort the whole probe.
    Abort,
}

#[derive(Debug, Clone)]
pub struct ProbeOptions {
    pub k_max: usize,
    pub workers: usize,
    pub fail_policy: FailPolicy,
    pub locate: LocateOptions,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            k_max: 4,
            workers: 1,
            fail_policy: FailPolicy::default(),
            locate: LocateOptions::default(),
        }
    }
}

/// Per-instance audit trail of the removal probe. Fields are serialized in
/// this (alphabetical) order so reports are byte-stable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceProbe {
    /// The model's answer on the full context, as predicted.
    pub base_answer: String,
    /// Whether the answer changed after removing k predicted-irrelevant
    /// facts, for k = 1..=k_max.
    pub changed_irr: Vec<bool>,
    pub changed_rel: Vec<bool>,
    pub id: String,
    pub location: AnswerLocation,
}

/// The removal curve plus answer-location tallies and the per-instance audit
/// rows that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOutcome {
    pub curve: RemovalCurve,
    pub locations: LocationCounts,
    pub instances: Vec<InstanceProbe>,
}

fn probe_instance(
    model: &dyn QaModel,
    question: &str,
    context: &[Article],
    id: &str,
    opts: &ProbeOptions,
) -> Result<InstanceProbe, CouplingError> {
    let attach = |source: AdapterError| CouplingError::Adapter {
        instance_id: id.to_string(),
        source,
    };
    // The base query must succeed; there is no sensible "changed" reading for
    // a model that cannot answer the full context.
    let base = model.predict(question, context).map_err(attach)?;
    base.relevance.require_covers(context)?;
    let base_norm = normalize_answer(base.answer.as_text());
    let location = locate_answer(&base, context, &opts.locate);

    let mut changed_rel = Vec::with_capacity(opts.k_max);
    let mut changed_irr = Vec::with_capacity(opts.k_max);
    for k in 1..=opts.k_max {
        for (reduced, changed) in [
            (reduce_rel(context, &base.relevance, k)?, &mut changed_rel),
            (reduce_irr(context, &base.relevance, k)?, &mut changed_irr),
        ] {
            match model.predict(question, &reduced) {
                Ok(pred) => {
                    changed.push(normalize_answer(pred.answer.as_text()) != base_norm);
                }
                Err(source) => match opts.fail_policy {
                    FailPolicy::CountAsChanged => changed.push(true),
                    FailPolicy::Abort => return Err(attach(source)),
                },
            }
        }
    }
    Ok(InstanceProbe {
        base_answer: base.answer.as_text().to_string(),
        changed_irr,
        changed_rel,
        id: id.to_string(),
        location,
    })
}

/// Runs the full probe: one base query per instance, then 2·k_max re-queries
/// on reduced contexts, fanned out over at most `opts.workers` workers
/// (capped by the model's declared concurrency). Results are merged in corpus
/// order, so the outcome is identical for any worker count.
pub fn probe_corpus(
    model: &dyn QaModel,
    corpus: &Corpus,
    opts: &ProbeOptions,
) -> Result<ProbeOutcome, CouplingError> {
    if opts.k_max < 1 {
        return Err(CouplingError::BadKMax);
    }
    if corpus.is_empty() {
        return Err(CouplingError::EmptyCorpus);
    }
    let workers = opts
        .workers
        .max(1)
        .min(model.max_concurrency())
        .min(corpus.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CouplingError::Scheduler(e.to_string()))?;
    let instances: Vec<InstanceProbe> = pool.install(|| {
        corpus
            .instances
            .par_iter()
            .map(|inst| probe_instance(model, &inst.question, &inst.context, &inst.id, opts))
            .collect::<Result<_, _>>()
    })?;

    let n = instances.len() as f64;
    let mut c_rel = vec![0.0; opts.k_max + 1];
    let mut c_irr = vec![0.0; opts.k_max + 1];
    for k in 1..=opts.k_max {
        c_rel[k] = instances.iter().filter(|p| p.changed_rel[k - 1]).count() as f64 / n;
        c_irr[k] = instances.iter().filter(|p| p.changed_irr[k - 1]).count() as f64 / n;
    }
    let locations: Vec<AnswerLocation> = instances.iter().map(|p| p.location).collect();
    Ok(ProbeOutcome {
        curve: RemovalCurve {
            k_max: opts.k_max,
            c_rel,
            c_irr,
        },
        locations: LocationCounts::from_locations(&locations),
        instances,
    })
}

/// The removal curve alone, single-worker.
pub fn removal_curve(
    model: &dyn QaModel,
    corpus: &Corpus,
    k_max: usize,
) -> Result<RemovalCurve, CouplingError> {
    let opts = ProbeOptions {
        k_max,
        ..ProbeOptions::default()
    };
    Ok(probe_corpus(model, corpus, &opts)?.curve)
}
