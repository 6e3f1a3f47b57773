//! JSON wire format shared by the HTTP and subprocess transports.
//!
//! Request: `{"question": str, "context": [[title, [sentence, ...]], ...],
//! "seed": int?}`. Response: `{"answer": str, "span": {"article", "start",
//! "end"}?, "relevance": [[title, sent_idx, score], ...], "relevant":
//! [[title, sent_idx], ...]?}`. Offsets count Unicode scalar values. The
//! optional `relevant` array carries an explicit binarization; without it the
//! client thresholds the scores itself.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adapter::{ModelPrediction, SpanLocation};
use crate::corpus::{Answer, Article, FactId};
use crate::coupling::RelevancePrediction;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireRequest {
    pub question: String,
    pub context: Vec<Article>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WireSpan {
    pub article: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireResponse {
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<WireSpan>,
    pub relevance: Vec<(String, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevant: Option<Vec<FactId>>,
}

/// Error payload, used as a JSONL line by the subprocess transport and as the
/// body of non-200 HTTP responses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireError {
    pub error: String,
}

/// Serializes a prediction for the wire.
pub fn prediction_to_response(prediction: &ModelPrediction) -> WireResponse {
    WireResponse {
        answer: prediction.answer.as_text().to_string(),
        span: prediction.span.map(|s| WireSpan {
            article: s.article,
            start: s.start,
            end: s.end,
        }),
        relevance: prediction
            .relevance
            .scores()
            .iter()
            .map(|(f, s)| (f.title.clone(), f.sent_idx, *s))
            .collect(),
        relevant: Some(prediction.relevance.relevant().iter().cloned().collect()),
    }
}

/// Parses and validates a wire response against the queried context.
///
/// An answer string accompanied by a span is kept verbatim even when it reads
/// "yes"/"no": span answers are spans. Bare "yes"/"no" strings map onto the
/// ternary cases.
pub fn response_to_prediction(
    response: WireResponse,
    context: &[Article],
    threshold: f64,
) -> Result<ModelPrediction, String> {
    let span = response.span.map(|s| SpanLocation {
        article: s.article,
        start: s.start,
        end: s.end,
    });
    let answer = if span.is_some() {
        Answer::Span(response.answer)
    } else {
        Answer::parse(&response.answer)
    };
    let mut scores = BTreeMap::new();
    for (title, sent_idx, score) in response.relevance {
        if scores
            .insert(FactId::new(title.clone(), sent_idx), score)
            .is_some()
        {
            return Err(format!("duplicate relevance entry for [{title}, {sent_idx}]"));
        }
    }
    let relevance = match response.relevant {
        Some(explicit) => RelevancePrediction::new(scores, explicit.into_iter().collect()),
        None => RelevancePrediction::from_scores(scores, threshold),
    }
    .map_err(|e| e.to_string())?;
    let prediction = ModelPrediction {
        answer,
        span,
        relevance,
    };
    prediction.validate(context)?;
    Ok(prediction)
}
