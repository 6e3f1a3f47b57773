//! End-to-end runs and their machine-readable reports.
//!
//! Reports serialize through a fixed-format JSON writer (floats at six
//! decimal places, struct fields in alphabetical order, maps sorted), so
//! re-running on identical inputs produces byte-identical output no matter
//! how many workers did the probing.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agreement::{order_relation, pearson, AgreementError};
use crate::corpus::{Corpus, FactId};
use crate::coupling::{
    farm_score, probe_corpus, CouplingError, InstanceProbe, LocationCounts, ProbeOptions,
    RemovalCurve,
};
use crate::metrics::{
    aggregate_scores, answer_scores_text, joint_scores, sp_scores, MetricsError, Prf,
};
use crate::QaModel;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error("prediction file: {0}")]
    Predictions(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Agreement(#[from] AgreementError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Adapter(#[from] crate::adapter::AdapterError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ReportError {
    /// CLI exit code: 2 for input problems, 3 for adapter failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Coupling(CouplingError::Adapter { .. })
            | ReportError::Coupling(CouplingError::MismatchedPrediction(_))
            | ReportError::Adapter(_) => 3,
            _ => 2,
        }
    }
}

/// The official prediction file layout: `answer` maps instance id to answer
/// string, `sp` maps instance id to `[title, sent_idx]` pairs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PredictionFile {
    pub answer: BTreeMap<String, String>,
    pub sp: BTreeMap<String, Vec<FactId>>,
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<PredictionFile, ReportError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| ReportError::Predictions(e.to_string()))
}

/// What to do when an instance has no entry in the prediction file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    /// Score the missing part as all-zero and count a warning (default).
    #[default]
    ZeroWithWarning,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreBlock {
    pub answer: Prf,
    pub joint: Prf,
    pub sp: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceScores {
    pub answer: Prf,
    pub id: String,
    pub joint: Prf,
    pub sp: Prf,
}

/// Per-instance and aggregate standard scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateReport {
    pub aggregate: ScoreBlock,
    pub instances: Vec<InstanceScores>,
    /// Instances whose answer (resp. sp) entry was missing from the file.
    pub missing_answer: usize,
    pub missing_sp: usize,
    pub num_instances: usize,
    pub skipped_records: usize,
}

pub fn run_evaluate(
    corpus: &Corpus,
    predictions: &PredictionFile,
    missing: MissingPolicy,
) -> Result<EvaluateReport, ReportError> {
    if corpus.is_empty() {
        return Err(ReportError::Input("corpus has no instances".into()));
    }
    let mut instances = Vec::with_capacity(corpus.len());
    let mut missing_answer = 0;
    let mut missing_sp = 0;
    for inst in &corpus.instances {
        let answer = match predictions.answer.get(&inst.id) {
            Some(pred) => answer_scores_text(pred, inst.gold_answer.as_text()),
            None if missing == MissingPolicy::Abort => {
                return Err(ReportError::Predictions(format!(
                    "no answer for instance {}",
                    inst.id
                )))
            }
            None => {
                missing_answer += 1;
                Prf::ZERO
            }
        };
        let sp = match predictions.sp.get(&inst.id) {
            Some(pred) => sp_scores(&pred.iter().cloned().collect(), &inst.gold_facts),
            None if missing == MissingPolicy::Abort => {
                return Err(ReportError::Predictions(format!(
                    "no supporting facts for instance {}",
                    inst.id
                )))
            }
            None => {
                missing_sp += 1;
                Prf::ZERO
            }
        };
        instances.push(InstanceScores {
            answer,
            id: inst.id.clone(),
            joint: joint_scores(&answer, &sp),
            sp,
        });
    }
    let aggregate = ScoreBlock {
        answer: aggregate_scores(&instances.iter().map(|i| i.answer).collect::<Vec<_>>())?,
        joint: aggregate_scores(&instances.iter().map(|i| i.joint).collect::<Vec<_>>())?,
        sp: aggregate_scores(&instances.iter().map(|i| i.sp).collect::<Vec<_>>())?,
    };
    Ok(EvaluateReport {
        aggregate,
        instances,
        missing_answer,
        missing_sp,
        num_instances: corpus.len(),
        skipped_records: corpus.skipped.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub c_irr: f64,
    pub c_rel: f64,
    /// c_rel / (1 + c_irr); 0 in the k = 0 row by construction.
    pub farm: f64,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocationBlock {
    pub a: usize,
    pub i: usize,
    pub in_title: usize,
    pub loca: f64,
    pub no_span: usize,
    pub o: usize,
}

/// Removal-probe report: the curve, FaRM and LocA blocks, and per-instance
/// change flags for audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub adapter: String,
    pub curve: Vec<CurveRow>,
    pub farm_kmax: f64,
    pub instances: Vec<InstanceProbe>,
    pub k_max: usize,
    pub location: LocationBlock,
    pub num_instances: usize,
}

pub fn run_probe(
    corpus: &Corpus,
    model: &dyn QaModel,
    adapter_label: &str,
    opts: &ProbeOptions,
) -> Result<ProbeReport, ReportError> {
    let outcome = probe_corpus(model, corpus, opts)?;
    let curve = curve_rows(&outcome.curve);
    let location = location_block(&outcome.locations)?;
    Ok(ProbeReport {
        adapter: adapter_label.to_string(),
        farm_kmax: outcome.curve.farm(outcome.curve.k_max),
        curve,
        instances: outcome.instances,
        k_max: outcome.curve.k_max,
        location,
        num_instances: corpus.len(),
    })
}

fn curve_rows(curve: &RemovalCurve) -> Vec<CurveRow> {
    (0..=curve.k_max)
        .map(|k| CurveRow {
            c_irr: curve.c_irr[k],
            c_rel: curve.c_rel[k],
            farm: farm_score(curve.c_rel[k], curve.c_irr[k]),
            k,
        })
        .collect()
}

fn location_block(counts: &LocationCounts) -> Result<LocationBlock, ReportError> {
    Ok(LocationBlock {
        a: counts.total,
        i: counts.inside,
        in_title: counts.in_title,
        loca: counts.loca()?,
        no_span: counts.no_span,
        o: counts.outside,
    })
}

/// The curve as CSV, one row per k.
pub fn curve_to_csv(curve: &RemovalCurve) -> String {
    let mut out = String::from("k,c_rel,c_irr,farm\n");
    for row in curve_rows(curve) {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            row.k, row.c_rel, row.c_irr, row.farm
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreeReport {
    pub models: Vec<String>,
    pub pearson: f64,
    pub relation: String,
    /// "+", "-" or blank, as in the rank-relation tables.
    pub symbol: String,
}

/// Compares two score columns keyed by model name.
pub fn run_agree(
    a: &BTreeMap<String, f64>,
    b: &BTreeMap<String, f64>,
) -> Result<AgreeReport, ReportError> {
    let relation = order_relation(a, b)?;
    // Align both columns on the (shared) sorted key order.
    let xs: Vec<f64> = a.values().copied().collect();
    let ys: Vec<f64> = b.values().copied().collect();
    let r = pearson(&xs, &ys)?;
    Ok(AgreeReport {
        models: a.keys().cloned().collect(),
        pearson: r,
        relation: relation.name().to_string(),
        symbol: relation.symbol().to_string(),
    })
}

/// Reads a `model,score` CSV column (header row optional).
pub fn load_score_column(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>, ReportError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path.as_ref())
        .map_err(|e| ReportError::Input(format!("{}: {e}", path.as_ref().display())))?;
    let mut scores = BTreeMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| ReportError::Input(e.to_string()))?;
        if record.len() < 2 {
            return Err(ReportError::Input(format!(
                "row {row}: expected `model,score`, got {} field(s)",
                record.len()
            )));
        }
        let model = record[0].trim().to_string();
        match record[1].trim().parse::<f64>() {
            Ok(score) => {
                if scores.insert(model.clone(), score).is_some() {
                    return Err(ReportError::Input(format!("duplicate model `{model}`")));
                }
            }
            // Tolerate one non-numeric row at the top: a header.
            Err(_) if row == 0 => continue,
            Err(e) => {
                return Err(ReportError::Input(format!(
                    "row {row}: bad score for `{model}`: {e}"
                )))
            }
        }
    }
    if scores.is_empty() {
        return Err(ReportError::Input("no score rows found".into()));
    }
    Ok(scores)
}

struct SixDecimals;

impl serde_json::ser::Formatter for SixDecimals {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.6}")
    }
}

/// Serializes a report with floats pinned to six decimal places. Struct
/// fields are declared in alphabetical order and all maps are sorted, so the
/// output is byte-stable.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut serializer = serde_json::Serializer::with_formatter(&mut out, SixDecimals);
    value
        .serialize(&mut serializer)
        .expect("reports serialize cleanly");
    out.push(b'\n');
    String::from_utf8(out).expect("reports are utf-8")
}
