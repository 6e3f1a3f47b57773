//! Standard XQA scores: answer EM/F1/P/R on normalized token overlap,
//! supporting-fact set scores, and joint scores as products of the two.
//!
//! The arithmetic deliberately mirrors the reference HotpotQA evaluation
//! script so that aggregates computed here agree with it to within float
//! reassociation noise (see the acceptance suite's independent oracle).

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Answer, FactId};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot aggregate over an empty corpus")]
    EmptyCorpus,
}

/// Exact match, F1, precision and recall. Per instance `em` is 0 or 1; in
/// aggregates it is the corpus fraction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub em: f64,
    pub f1: f64,
    #[serde(rename = "p")]
    pub precision: f64,
    #[serde(rename = "r")]
    pub recall: f64,
}

impl Prf {
    pub const ZERO: Prf = Prf {
        em: 0.0,
        f1: 0.0,
        precision: 0.0,
        recall: 0.0,
    };

    pub const PERFECT: Prf = Prf {
        em: 1.0,
        f1: 1.0,
        precision: 1.0,
        recall: 1.0,
    };
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Replaces standalone "a"/"an"/"the" with a space. Standalone means the
/// article is bounded by non-word characters (or the ends of the string),
/// matching the reference script's `\b(a|an|the)\b` substitution.
fn remove_articles(text: &str) -> String {
    const ARTICLES: [&str; 3] = ["a", "an", "the"];
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let at_boundary = i == 0 || !is_word_char(chars[i - 1]);
        if at_boundary {
            let matched = ARTICLES.iter().find(|article| {
                let len = article.chars().count();
                chars[i..].len() >= len
                    && chars[i..i + len].iter().collect::<String>() == **article
                    && chars.get(i + len).is_none_or(|c| !is_word_char(*c))
            });
            if let Some(article) = matched {
                out.push(' ');
                i += article.chars().count();
                continue;
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

/// Normalizes an answer string: lowercase, strip ASCII punctuation, drop
/// standalone articles, collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let no_punct: String = lowered
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    let no_articles = remove_articles(&no_punct);
    no_articles.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub(crate) fn multiset_overlap(left: &[&str], right: &[&str]) -> usize {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for token in left {
        *counts.entry(token).or_insert(0) += 1;
    }
    let mut overlap = 0;
    for token in right {
        if let Some(n) = counts.get_mut(token) {
            if *n > 0 {
                *n -= 1;
                overlap += 1;
            }
        }
    }
    overlap
}

/// Answer scores on raw strings, with the reference script's yes/no gate: if
/// either side normalizes to "yes"/"no"/"noanswer" and the sides differ, the
/// token scores are zero regardless of overlap.
pub fn answer_scores_text(pred: &str, gold: &str) -> Prf {
    const GATED: [&str; 3] = ["yes", "no", "noanswer"];
    let pred_norm = normalize_answer(pred);
    let gold_norm = normalize_answer(gold);
    let em = if pred_norm == gold_norm { 1.0 } else { 0.0 };
    if pred_norm != gold_norm
        && (GATED.contains(&pred_norm.as_str()) || GATED.contains(&gold_norm.as_str()))
    {
        return Prf { em, ..Prf::ZERO };
    }
    let pred_tokens: Vec<&str> = pred_norm.split_whitespace().collect();
    let gold_tokens: Vec<&str> = gold_norm.split_whitespace().collect();
    let overlap = multiset_overlap(&pred_tokens, &gold_tokens);
    if overlap == 0 {
        return Prf { em, ..Prf::ZERO };
    }
    let precision = overlap as f64 / pred_tokens.len() as f64;
    let recall = overlap as f64 / gold_tokens.len() as f64;
    Prf {
        em,
        f1: f1_of(precision, recall),
        precision,
        recall,
    }
}

/// Answer scores on ternary answers ("yes"/"no" rendered as text).
pub fn answer_scores(pred: &Answer, gold: &Answer) -> Prf {
    answer_scores_text(pred.as_text(), gold.as_text())
}

/// Supporting-fact set scores: precision/recall over the set intersection,
/// EM iff the sets are equal.
pub fn sp_scores(pred: &BTreeSet<FactId>, gold: &BTreeSet<FactId>) -> Prf {
    let hits = pred.intersection(gold).count();
    let precision = if pred.is_empty() {
        0.0
    } else {
        hits as f64 / pred.len() as f64
    };
    let recall = if gold.is_empty() {
        0.0
    } else {
        hits as f64 / gold.len() as f64
    };
    let em = if pred == gold { 1.0 } else { 0.0 };
    Prf {
        em,
        f1: f1_of(precision, recall),
        precision,
        recall,
    }
}

/// Joint scores for one instance: products of answer and SP precision and
/// recall, F1 as their harmonic mean, EM as the conjunction.
pub fn joint_scores(ans: &Prf, sp: &Prf) -> Prf {
    let precision = ans.precision * sp.precision;
    let recall = ans.recall * sp.recall;
    Prf {
        em: ans.em * sp.em,
        f1: f1_of(precision, recall),
        precision,
        recall,
    }
}

/// Arithmetic mean of each field over the corpus; `em` becomes a fraction.
pub fn aggregate_scores(per_instance: &[Prf]) -> Result<Prf, MetricsError> {
    if per_instance.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let n = per_instance.len() as f64;
    let mut total = Prf::ZERO;
    for prf in per_instance {
        total.em += prf.em;
        total.f1 += prf.f1;
        total.precision += prf.precision;
        total.recall += prf.recall;
    }
    Ok(Prf {
        em: total.em / n,
        f1: total.f1 / n,
        precision: total.precision / n,
        recall: total.recall / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fact_set(spec: &[(&str, usize)]) -> BTreeSet<FactId> {
        spec.iter().map(|(t, i)| FactId::new(*t, *i)).collect()
    }

    #[test]
    fn normalize_strips_punctuation_and_articles() {
        assert_eq!(normalize_answer("The Firth of Clyde!"), "firth of clyde");
        assert_eq!(normalize_answer(""), "");
        assert_eq!(normalize_answer("A  an the"), "");
        assert_eq!(normalize_answer("state-of-the-art"), "stateoftheart");
        // "an" embedded in a word is untouched.
        assert_eq!(normalize_answer("another theme"), "another theme");
    }

    #[test]
    fn normalize_keeps_non_ascii_letters() {
        assert_eq!(normalize_answer("Café de la Gare"), "café de la gare");
    }

    #[test]
    fn answer_exact_match() {
        let prf = answer_scores_text("Matlama FC", "Matlama FC");
        assert_eq!(prf.em, 1.0);
        assert_eq!(prf.f1, 1.0);
    }

    #[test]
    fn answer_partial_overlap() {
        let prf = answer_scores_text("Firth of Clyde Scotland", "Firth of Clyde");
        assert_abs_diff_eq!(prf.precision, 3.0 / 4.0);
        assert_abs_diff_eq!(prf.recall, 1.0);
        assert_abs_diff_eq!(prf.f1, 6.0 / 7.0, epsilon = 1e-15);
        assert_eq!(prf.em, 0.0);
    }

    #[test]
    fn answer_yes_vs_yes() {
        let prf = answer_scores(&Answer::Yes, &Answer::Yes);
        assert_eq!(prf, Prf::PERFECT);
    }

    #[test]
    fn yes_no_gate_zeroes_mixed_comparisons() {
        // A span containing "yes" among other tokens scores zero against a
        // yes gold, exactly as the reference script does.
        let prf = answer_scores(&Answer::Span("yes he did".into()), &Answer::Yes);
        assert_eq!(prf.f1, 0.0);
        assert_eq!(prf.precision, 0.0);
        assert_eq!(prf.em, 0.0);
        let prf = answer_scores(&Answer::Yes, &Answer::No);
        assert_eq!(prf, Prf::ZERO);
    }

    #[test]
    fn both_empty_normalizations_match_reference_semantics() {
        // "The" normalizes to the empty string: EM fires, token scores do not.
        let prf = answer_scores_text("The", "a");
        assert_eq!(prf.em, 1.0);
        assert_eq!(prf.f1, 0.0);
    }

    #[test]
    fn answer_swap_symmetry() {
        let cases = [
            ("Firth of Clyde Scotland", "Firth of Clyde"),
            ("john", "john likes mary"),
            ("", "x"),
            ("yes", "no"),
        ];
        for (a, b) in cases {
            let ab = answer_scores_text(a, b);
            let ba = answer_scores_text(b, a);
            assert_eq!(ab.em, ba.em);
            assert_eq!(ab.precision, ba.recall);
            assert_eq!(ab.recall, ba.precision);
            assert_eq!(ab.f1, ba.f1);
        }
    }

    #[test]
    fn sp_partial_and_exact() {
        let gold = fact_set(&[("A", 0), ("B", 1)]);
        let pred = fact_set(&[("A", 0)]);
        let prf = sp_scores(&pred, &gold);
        assert_abs_diff_eq!(prf.precision, 1.0);
        assert_abs_diff_eq!(prf.recall, 0.5);
        assert_abs_diff_eq!(prf.f1, 2.0 / 3.0, epsilon = 1e-15);

        assert_eq!(sp_scores(&gold, &gold), Prf::PERFECT);

        let pred = fact_set(&[("F", 1), ("F", 2)]);
        let gold = fact_set(&[("F", 2), ("F", 3), ("F", 4)]);
        let prf = sp_scores(&pred, &gold);
        assert_abs_diff_eq!(prf.precision, 0.5);
        assert_abs_diff_eq!(prf.recall, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(prf.f1, 0.4, epsilon = 1e-15);
    }

    #[test]
    fn sp_empty_prediction() {
        let gold = fact_set(&[("A", 0)]);
        let prf = sp_scores(&BTreeSet::new(), &gold);
        assert_eq!(prf, Prf::ZERO);
    }

    #[test]
    fn joint_products() {
        let ans = Prf {
            em: 1.0,
            f1: 1.0,
            precision: 1.0,
            recall: 1.0,
        };
        let sp = Prf {
            em: 0.0,
            f1: f1_of(1.0, 0.5),
            precision: 1.0,
            recall: 0.5,
        };
        let joint = joint_scores(&ans, &sp);
        assert_abs_diff_eq!(joint.precision, 1.0);
        assert_abs_diff_eq!(joint.recall, 0.5);
        assert_abs_diff_eq!(joint.f1, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(joint.em, 0.0);

        assert_eq!(joint_scores(&Prf::ZERO, &sp), Prf::ZERO);

        let ans = Prf {
            em: 0.0,
            f1: f1_of(0.8, 0.6),
            precision: 0.8,
            recall: 0.6,
        };
        let sp = Prf {
            em: 0.0,
            f1: f1_of(0.5, 1.0),
            precision: 0.5,
            recall: 1.0,
        };
        let joint = joint_scores(&ans, &sp);
        assert_abs_diff_eq!(joint.precision, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(joint.recall, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(joint.f1, 0.48, epsilon = 1e-15);
    }

    #[test]
    fn joint_em_from_exact_components() {
        let gold = fact_set(&[("A", 0), ("B", 0)]);
        let ans = answer_scores_text("Matlama FC", "Matlama FC");
        let sp = sp_scores(&gold, &gold);
        let joint = joint_scores(&ans, &sp);
        assert_eq!(joint, Prf::PERFECT);
    }

    #[test]
    fn aggregate_means() {
        let ones = Prf::PERFECT;
        let zeros = Prf::ZERO;
        let mean = aggregate_scores(&[ones, zeros]).unwrap();
        assert_eq!(
            mean,
            Prf {
                em: 0.5,
                f1: 0.5,
                precision: 0.5,
                recall: 0.5
            }
        );

        let single = Prf {
            em: 0.0,
            f1: 0.25,
            precision: 0.5,
            recall: 0.75,
        };
        assert_eq!(aggregate_scores(&[single]).unwrap(), single);

        let f1s = [1.0, 2.0 / 3.0, 0.0].map(|f1| Prf { f1, ..Prf::ZERO });
        assert_abs_diff_eq!(
            aggregate_scores(&f1s).unwrap().f1,
            5.0 / 9.0,
            epsilon = 1e-15
        );

        assert!(matches!(
            aggregate_scores(&[]),
            Err(MetricsError::EmptyCorpus)
        ));
    }

    #[test]
    fn harmonic_mean_bounds() {
        // min(p, r) <= f1 <= sqrt(p * r) for p, r > 0, exercised over a grid.
        for i in 1..=20 {
            for j in 1..=20 {
                let p = i as f64 / 20.0;
                let r = j as f64 / 20.0;
                let f1 = f1_of(p, r);
                assert!(f1 >= p.min(r) - 1e-12, "f1 {f1} < min({p}, {r})");
                assert!(f1 <= (p * r).sqrt() + 1e-12, "f1 {f1} > sqrt({p} * {r})");
                assert!((0.0..=1.0).contains(&f1));
            }
        }
    }
}
