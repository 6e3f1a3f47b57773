//! Batch evaluation harness for explainable question answering.
//!
//! Alongside the standard answer / supporting-fact / joint scores (EM, F1,
//! precision, recall), the harness computes two answer-explanation coupling
//! scores that need no gold annotations: FaRM, which removes the facts a
//! model predicts (ir)relevant and tracks answer changes, and LocA, which
//! checks whether answers are located inside the predicted-relevant facts.
//! Any model reachable in-process, as a subprocess, or over HTTP can be
//! probed through the [`QaModel`] protocol; a deterministic reference model
//! with coupled and decoupled modes is bundled for end-to-end runs.

pub mod adapter;
pub mod agreement;
pub mod corpus;
pub mod coupling;
pub mod fixture;
pub mod metrics;
pub mod reference;
pub mod regularizer;
pub mod report;
pub mod server;

pub use adapter::{AdapterDescriptor, AdapterError, ModelPrediction, QaModel, SpanLocation};
pub use corpus::{Answer, Article, Corpus, CorpusError, FactId, Instance, Strictness};
pub use coupling::{AnswerLocation, RelevancePrediction, RemovalCurve};
pub use metrics::Prf;
pub use reference::{RefMode, ReferenceModel};
