//! The prediction protocol: a uniform way to ask any QA model for an answer
//! plus per-fact relevance, over in-process, subprocess or HTTP transports.
//!
//! Span offsets point into the canonical rendering of the queried context and
//! count Unicode scalar values, so they mean the same thing in every
//! transport and language.

pub mod http;
pub mod subprocess;
pub mod wire;

use std::time::Duration;

use thiserror::Error;

use crate::corpus::{Answer, Article};
use crate::coupling::RelevancePrediction;
use crate::reference::{RefMode, ReferenceModel};

/// Transport-level failures of a model call.
#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("model call timed out after {0:?}")]
    Timeout(Duration),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("protocol violation: {message}; payload: {payload}")]
    Protocol { message: String, payload: String },
}

impl AdapterError {
    pub(crate) fn protocol(message: impl Into<String>, payload: &str) -> Self {
        // Keep an excerpt of the raw payload so protocol bugs are debuggable.
        let mut excerpt: String = payload.chars().take(200).collect();
        if excerpt.len() < payload.len() {
            excerpt.push_str("...");
        }
        AdapterError::Protocol {
            message: message.into(),
            payload: excerpt,
        }
    }
}

/// A span into the canonical rendering: article index plus a character range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpanLocation {
    pub article: usize,
    pub start: usize,
    pub end: usize,
}

/// A model's output for one (question, context) query.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPrediction {
    pub answer: Answer,
    pub span: Option<SpanLocation>,
    pub relevance: RelevancePrediction,
}

impl ModelPrediction {
    /// Checks the prediction invariants against the queried context: the
    /// relevance output covers exactly the context's facts, and a span, when
    /// present, slices the canonical rendering to exactly the answer text.
    pub fn validate(&self, context: &[Article]) -> Result<(), String> {
        if !self.relevance.covers(context) {
            return Err("relevance output does not cover the context's facts".into());
        }
        if let Some(span) = &self.span {
            let text = match &self.answer {
                Answer::Span(text) => text,
                _ => return Err("span location present on a yes/no answer".into()),
            };
            let rendered = canonical_rendering(context);
            let article = rendered
                .get(span.article)
                .ok_or_else(|| format!("span article index {} out of range", span.article))?;
            let slice = slice_chars(&article.text, span.start, span.end)
                .ok_or_else(|| format!("span range {}..{} out of range", span.start, span.end))?;
            if slice != text {
                return Err(format!(
                    "span slices to {slice:?} but the answer text is {text:?}"
                ));
            }
        }
        Ok(())
    }
}

/// The model protocol. Implementations must be deterministic within one run:
/// identical (question, context) pairs yield identical predictions. The
/// removal probe's correctness depends on it.
pub trait QaModel: Send + Sync {
    fn predict(&self, question: &str, context: &[Article]) -> Result<ModelPrediction, AdapterError>;

    /// Maximum number of concurrent calls the model tolerates. The probe
    /// scheduler never exceeds it.
    fn max_concurrency(&self) -> usize {
        usize::MAX
    }
}

/// One article flattened to text, with each sentence's character range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedArticle {
    pub text: String,
    pub sentence_spans: Vec<(usize, usize)>,
}

/// Flattens each article by joining its sentences with a single space.
///
/// The offset table maps every sentence to its half-open character range in
/// the joined text; all transports agree on this rendering, which is what
/// makes span offsets portable.
pub fn canonical_rendering(context: &[Article]) -> Vec<RenderedArticle> {
    context
        .iter()
        .map(|article| {
            let mut text = String::new();
            let mut spans = Vec::with_capacity(article.sentences.len());
            let mut pos = 0usize;
            for (i, sentence) in article.sentences.iter().enumerate() {
                if i > 0 {
                    text.push(' ');
                    pos += 1;
                }
                let len = sentence.chars().count();
                spans.push((pos, pos + len));
                text.push_str(sentence);
                pos += len;
            }
            RenderedArticle {
                text,
                sentence_spans: spans,
            }
        })
        .collect()
}

/// Slices `text` by character (not byte) offsets; `None` when out of range.
pub fn slice_chars(text: &str, start: usize, end: usize) -> Option<&str> {
    let total = text.chars().count();
    if start > end || end > total {
        return None;
    }
    let byte_at = |char_pos: usize| {
        if char_pos == total {
            text.len()
        } else {
            text.char_indices().nth(char_pos).map(|(b, _)| b).unwrap()
        }
    };
    Some(&text[byte_at(start)..byte_at(end)])
}

/// How to reach a model.
#[derive(Debug, Clone, PartialEq)]
pub enum Transport {
    /// Bundled deterministic reference model.
    Reference(RefMode),
    /// `POST {endpoint}/predict` with the wire JSON.
    Http(String),
    /// A child process speaking the wire JSON as JSONL on stdin/stdout.
    Subprocess(Vec<String>),
}

/// Everything needed to build a model handle.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterDescriptor {
    pub transport: Transport,
    pub max_concurrency: usize,
    pub timeout: Duration,
    pub seed: Option<u64>,
    /// Binarization threshold applied to scores-only wire responses.
    pub relevance_threshold: f64,
    /// Fact budget for the reference model's selector.
    pub top_m: usize,
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_RELEVANCE_THRESHOLD: f64 = 0.5;

impl AdapterDescriptor {
    /// Parses an adapter spec string:
    /// `ref:coupled`, `ref:decoupled`, `http:URL` (or a full `http://...`
    /// URL), or `cmd:ARGV` with a whitespace-separated command line.
    pub fn parse(spec: &str) -> Result<Self, AdapterError> {
        let transport = if spec == "ref" {
            Transport::Reference(RefMode::from_env())
        } else if let Some(mode) = spec.strip_prefix("ref:") {
            Transport::Reference(match mode {
                "coupled" => RefMode::Coupled,
                "decoupled" => RefMode::Decoupled,
                other => {
                    return Err(AdapterError::Transport(format!(
                        "unknown reference mode `{other}` (expected coupled|decoupled)"
                    )))
                }
            })
        } else if spec.starts_with("http://") || spec.starts_with("https://") {
            Transport::Http(spec.trim_end_matches('/').to_string())
        } else if let Some(rest) = spec.strip_prefix("http:") {
            Transport::Http(format!("http://{}", rest.trim_end_matches('/')))
        } else if let Some(rest) = spec.strip_prefix("cmd:") {
            let argv: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                return Err(AdapterError::Transport("empty command".into()));
            }
            Transport::Subprocess(argv)
        } else {
            return Err(AdapterError::Transport(format!(
                "unknown adapter spec `{spec}` (expected ref:coupled|ref:decoupled|http:URL|cmd:ARGV)"
            )));
        };
        let max_concurrency = match &transport {
            Transport::Reference(_) => usize::MAX,
            Transport::Http(_) => 8,
            Transport::Subprocess(_) => 1,
        };
        Ok(AdapterDescriptor {
            transport,
            max_concurrency,
            timeout: DEFAULT_TIMEOUT,
            seed: None,
            relevance_threshold: DEFAULT_RELEVANCE_THRESHOLD,
            top_m: crate::reference::DEFAULT_TOP_M,
        })
    }

    /// Builds the model handle for this descriptor.
    pub fn build(&self) -> Result<Box<dyn QaModel>, AdapterError> {
        match &self.transport {
            Transport::Reference(mode) => {
                Ok(Box::new(ReferenceModel::new(*mode).with_top_m(self.top_m)))
            }
            Transport::Http(endpoint) => Ok(Box::new(http::HttpModel::new(
                endpoint.clone(),
                self.timeout,
                self.seed,
                self.relevance_threshold,
                self.max_concurrency,
            ))),
            Transport::Subprocess(argv) => Ok(Box::new(subprocess::SubprocessModel::spawn(
                argv,
                self.timeout,
                self.seed,
                self.relevance_threshold,
            )?)),
        }
    }
}
