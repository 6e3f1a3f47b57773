//! The answer-fact coupling cost and its ingredients, as pure functions over
//! probability arrays.
//!
//! The cost is a bilinear form in the answer probability `p_a` and the
//! explanation probability `p_e`: the four corners (correct/incorrect answer
//! crossed with ground-truth/non-ground-truth explanation) cost 0, c1, c2 and
//! c3, and interior points blend them with the corresponding probabilities.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RegularizerError {
    #[error("gold {which} index {index} out of range for length {len}")]
    IndexOutOfRange {
        which: &'static str,
        index: usize,
        len: usize,
    },
    #[error("{which} probabilities sum to {sum}, not 1")]
    NotNormalized { which: &'static str, sum: f64 },
    #[error("no gold facts: every label is 0")]
    NoGoldFacts,
    #[error("{name} = {value} outside its domain")]
    DomainError { name: &'static str, value: f64 },
    #[error("probability/label length mismatch: {probs} vs {labels}")]
    LengthMismatch { probs: usize, labels: usize },
}

/// The three corner costs; all non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegConfig {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl RegConfig {
    /// Tuned constants for the plain baseline model.
    pub const BASELINE: RegConfig = RegConfig {
        c1: 4.96,
        c2: 2.02,
        c3: 3.10,
    };

    /// Tuned constants for the regularized select-and-forget model.
    pub const SELECT_FORGET: RegConfig = RegConfig {
        c1: 1.18,
        c2: 0.24,
        c3: 1.61,
    };

    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self, RegularizerError> {
        for (name, value) in [("c1", c1), ("c2", c2), ("c3", c3)] {
            if !value.is_finite() || value < 0.0 {
                return Err(RegularizerError::DomainError { name, value });
            }
        }
        Ok(Self { c1, c2, c3 })
    }
}

/// Per-fact relevance probabilities paired with binary gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FactProbabilities {
    predicted: Vec<f64>,
    gold: Vec<bool>,
}

impl FactProbabilities {
    pub fn new(predicted: Vec<f64>, gold: Vec<bool>) -> Result<Self, RegularizerError> {
        if predicted.len() != gold.len() {
            return Err(RegularizerError::LengthMismatch {
                probs: predicted.len(),
                labels: gold.len(),
            });
        }
        for &p in &predicted {
            if !(0.0..=1.0).contains(&p) {
                return Err(RegularizerError::DomainError {
                    name: "relevance probability",
                    value: p,
                });
            }
        }
        Ok(Self { predicted, gold })
    }

    pub fn predicted(&self) -> &[f64] {
        &self.predicted
    }

    pub fn gold(&self) -> &[bool] {
        &self.gold
    }

    fn gold_probs(&self) -> Result<impl Iterator<Item = f64> + '_, RegularizerError> {
        if !self.gold.iter().any(|&g| g) {
            return Err(RegularizerError::NoGoldFacts);
        }
        Ok(self
            .predicted
            .iter()
            .zip(&self.gold)
            .filter(|(_, &g)| g)
            .map(|(&p, _)| p))
    }
}

fn check_distribution(which: &'static str, probs: &[f64]) -> Result<(), RegularizerError> {
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(RegularizerError::NotNormalized { which, sum });
    }
    Ok(())
}

/// Probability of the correct answer span: the product of the probabilities
/// assigned to the gold start and end positions.
pub fn p_answer(
    start_probs: &[f64],
    end_probs: &[f64],
    gold_start: usize,
    gold_end: usize,
) -> Result<f64, RegularizerError> {
    check_distribution("start", start_probs)?;
    check_distribution("end", end_probs)?;
    if gold_start >= start_probs.len() {
        return Err(RegularizerError::IndexOutOfRange {
            which: "start",
            index: gold_start,
            len: start_probs.len(),
        });
    }
    if gold_end >= end_probs.len() {
        return Err(RegularizerError::IndexOutOfRange {
            which: "end",
            index: gold_end,
            len: end_probs.len(),
        });
    }
    Ok(start_probs[gold_start] * end_probs[gold_end])
}

/// Joint explanation probability: the product of the predicted probabilities
/// over the gold facts (independence reading).
pub fn p_expl_product(fp: &FactProbabilities) -> Result<f64, RegularizerError> {
    Ok(fp.gold_probs()?.product())
}

/// Sum-form explanation probability, normalized by the number of gold facts
/// so it stays in [0, 1]; coincides with the product form for a single gold
/// fact. See [`p_expl_sum_raw`] for the unnormalized variant.
pub fn p_expl_sum(fp: &FactProbabilities) -> Result<f64, RegularizerError> {
    let gold_count = fp.gold.iter().filter(|&&g| g).count();
    Ok(fp.gold_probs()?.sum::<f64>() / gold_count as f64)
}

/// The raw, unnormalized sum over gold facts; can exceed 1.
pub fn p_expl_sum_raw(fp: &FactProbabilities) -> Result<f64, RegularizerError> {
    Ok(fp.gold_probs()?.sum())
}

fn check_unit(name: &'static str, value: f64) -> Result<(), RegularizerError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(RegularizerError::DomainError { name, value });
    }
    Ok(())
}

/// The coupling cost: p_a·(p_e·0 + (1−p_e)·c1) + (1−p_a)·(p_e·c2 + (1−p_e)·c3).
pub fn j_reg(p_a: f64, p_e: f64, cfg: &RegConfig) -> Result<f64, RegularizerError> {
    check_unit("p_a", p_a)?;
    check_unit("p_e", p_e)?;
    Ok(p_a * (1.0 - p_e) * cfg.c1 + (1.0 - p_a) * (p_e * cfg.c2 + (1.0 - p_e) * cfg.c3))
}

/// Closed-form partial derivatives of [`j_reg`] with respect to (p_a, p_e).
pub fn j_reg_grad(p_a: f64, p_e: f64, cfg: &RegConfig) -> Result<(f64, f64), RegularizerError> {
    check_unit("p_a", p_a)?;
    check_unit("p_e", p_e)?;
    let d_pa = (1.0 - p_e) * cfg.c1 - (p_e * cfg.c2 + (1.0 - p_e) * cfg.c3);
    let d_pe = -p_a * cfg.c1 + (1.0 - p_a) * (cfg.c2 - cfg.c3);
    Ok((d_pa, d_pe))
}
