//! Independent re-implementations used only as oracles by the acceptance
//! suite. They deliberately share no code with the library: normalization is
//! regex-based, set arithmetic uses hash sets, fact removal is re-derived
//! from scratch, and Pearson uses the raw-moment formula.

use std::collections::{HashMap, HashSet};

use regex::Regex;

use xqa::report::PredictionFile;
use xqa::{Answer, Article, Corpus, QaModel};

#[derive(Debug, Clone, Copy, Default)]
pub struct Block {
    pub em: f64,
    pub f1: f64,
    pub p: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct OfficialAggregates {
    pub answer: Block,
    pub sp: Block,
    pub joint: Block,
}

fn normalize(text: &str) -> String {
    let lower = text.to_lowercase();
    let no_punct: String = lower
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    let article_re = Regex::new(r"\b(a|an|the)\b").unwrap();
    let no_articles = article_re.replace_all(&no_punct, " ");
    no_articles.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn answer_f1_p_r(prediction: &str, gold: &str) -> (f64, f64, f64) {
    const GATE: [&str; 3] = ["yes", "no", "noanswer"];
    let pred_norm = normalize(prediction);
    let gold_norm = normalize(gold);
    if pred_norm != gold_norm
        && (GATE.contains(&pred_norm.as_str()) || GATE.contains(&gold_norm.as_str()))
    {
        return (0.0, 0.0, 0.0);
    }
    let pred_tokens: Vec<&str> = pred_norm.split_whitespace().collect();
    let gold_tokens: Vec<&str> = gold_norm.split_whitespace().collect();
    let mut counter: HashMap<&str, i64> = HashMap::new();
    for token in &pred_tokens {
        *counter.entry(token).or_default() += 1;
    }
    let mut num_same = 0i64;
    for token in &gold_tokens {
        if let Some(count) = counter.get_mut(token) {
            if *count > 0 {
                *count -= 1;
                num_same += 1;
            }
        }
    }
    if num_same == 0 {
        return (0.0, 0.0, 0.0);
    }
    let precision = num_same as f64 / pred_tokens.len() as f64;
    let recall = num_same as f64 / gold_tokens.len() as f64;
    let f1 = 2.0 * precision * recall / (precision + recall);
    (f1, precision, recall)
}

fn sp_em_f1_p_r(
    prediction: &[(String, usize)],
    gold: &HashSet<(String, usize)>,
) -> (f64, f64, f64, f64) {
    let pred_set: HashSet<(String, usize)> = prediction.iter().cloned().collect();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for e in &pred_set {
        if gold.contains(e) {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    for e in gold {
        if !pred_set.contains(e) {
            fn_ += 1;
        }
    }
    let p = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let r = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    let em = if fp + fn_ == 0 { 1.0 } else { 0.0 };
    (em, f1, p, r)
}

/// Corpus aggregates under the official evaluation semantics.
pub fn official_aggregates(corpus: &Corpus, predictions: &PredictionFile) -> OfficialAggregates {
    let mut answer = Block::default();
    let mut sp = Block::default();
    let mut joint = Block::default();
    for inst in &corpus.instances {
        let pred_answer = &predictions.answer[&inst.id];
        let gold_answer = inst.gold_answer.as_text();
        let a_em = if normalize(pred_answer) == normalize(gold_answer) {
            1.0
        } else {
            0.0
        };
        let (a_f1, a_p, a_r) = answer_f1_p_r(pred_answer, gold_answer);

        let pred_sp: Vec<(String, usize)> = predictions.sp[&inst.id]
            .iter()
            .map(|f| (f.title.clone(), f.sent_idx))
            .collect();
        let gold_sp: HashSet<(String, usize)> = inst
            .gold_facts
            .iter()
            .map(|f| (f.title.clone(), f.sent_idx))
            .collect();
        let (s_em, s_f1, s_p, s_r) = sp_em_f1_p_r(&pred_sp, &gold_sp);

        let j_p = a_p * s_p;
        let j_r = a_r * s_r;
        let j_f1 = if j_p + j_r > 0.0 {
            2.0 * j_p * j_r / (j_p + j_r)
        } else {
            0.0
        };
        let j_em = a_em * s_em;

        answer.em += a_em;
        answer.f1 += a_f1;
        answer.p += a_p;
        answer.r += a_r;
        sp.em += s_em;
        sp.f1 += s_f1;
        sp.p += s_p;
        sp.r += s_r;
        joint.em += j_em;
        joint.f1 += j_f1;
        joint.p += j_p;
        joint.r += j_r;
    }
    let n = corpus.len() as f64;
    for block in [&mut answer, &mut sp, &mut joint] {
        block.em /= n;
        block.f1 /= n;
        block.p /= n;
        block.r /= n;
    }
    OfficialAggregates { answer, sp, joint }
}

fn answer_text(answer: &Answer) -> &str {
    match answer {
        Answer::Yes => "yes",
        Answer::No => "no",
        Answer::Span(s) => s,
    }
}

/// Removes the given (title, sentence index) pairs from a context, keeping
/// emptied articles, without going through the library's editing code.
fn drop_sentences(context: &[Article], victims: &HashSet<(String, usize)>) -> Vec<Article> {
    context
        .iter()
        .map(|article| {
            let sentences = article
                .sentences
                .iter()
                .enumerate()
                .filter(|(i, _)| !victims.contains(&(article.title.clone(), *i)))
                .map(|(_, s)| s.clone())
                .collect();
            Article::new(article.title.clone(), sentences)
        })
        .collect()
}

/// Exhaustively recomputes the removal curve: a fresh base query per
/// instance, a fresh relevance query per (instance, k), every reduced
/// context rebuilt from scratch, sequentially.
pub fn brute_force_curve(
    model: &dyn QaModel,
    corpus: &Corpus,
    k_max: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut rel_changes = vec![0usize; k_max + 1];
    let mut irr_changes = vec![0usize; k_max + 1];
    for inst in &corpus.instances {
        let base = model.predict(&inst.question, &inst.context).unwrap();
        let base_answer = normalize(answer_text(&base.answer));
        for k in 1..=k_max {
            // Fresh relevance for each depth; the model is deterministic so
            // this only tests that the implementation's reuse is sound.
            let relevance = model
                .predict(&inst.question, &inst.context)
                .unwrap()
                .relevance;

            let mut relevant: Vec<(String, usize, f64)> = relevance
                .relevant()
                .iter()
                .map(|f| (f.title.clone(), f.sent_idx, relevance.scores()[f]))
                .collect();
            relevant.sort_by(|x, y| {
                y.2.total_cmp(&x.2)
                    .then_with(|| x.0.cmp(&y.0))
                    .then_with(|| x.1.cmp(&y.1))
            });
            let victims: HashSet<(String, usize)> = relevant
                .iter()
                .take(k)
                .map(|(t, i, _)| (t.clone(), *i))
                .collect();
            let reduced = drop_sentences(&inst.context, &victims);
            let answer = model.predict(&inst.question, &reduced).unwrap().answer;
            if normalize(answer_text(&answer)) != base_answer {
                rel_changes[k] += 1;
            }

            let mut irrelevant: Vec<(String, usize, f64)> = relevance
                .scores()
                .iter()
                .filter(|(f, _)| !relevance.relevant().contains(*f))
                .map(|(f, s)| (f.title.clone(), f.sent_idx, *s))
                .collect();
            irrelevant.sort_by(|x, y| {
                x.2.total_cmp(&y.2)
                    .then_with(|| x.0.cmp(&y.0))
                    .then_with(|| x.1.cmp(&y.1))
            });
            let victims: HashSet<(String, usize)> = irrelevant
                .iter()
                .take(k)
                .map(|(t, i, _)| (t.clone(), *i))
                .collect();
            let reduced = drop_sentences(&inst.context, &victims);
            let answer = model.predict(&inst.question, &reduced).unwrap().answer;
            if normalize(answer_text(&answer)) != base_answer {
                irr_changes[k] += 1;
            }
        }
    }
    let n = corpus.len() as f64;
    let fractions = |changes: &[usize]| changes.iter().map(|&c| c as f64 / n).collect();
    (fractions(&rel_changes), fractions(&irr_changes))
}

/// Pearson through the raw-moment formula.
pub fn pearson_brute_force(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sum_x: f64 = x.iter().sum();
    let sum_y: f64 = y.iter().sum();
    let sum_xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sum_x2: f64 = x.iter().map(|a| a * a).sum();
    let sum_y2: f64 = y.iter().map(|a| a * a).sum();
    (n * sum_xy - sum_x * sum_y)
        / ((n * sum_x2 - sum_x * sum_x) * (n * sum_y2 - sum_y * sum_y)).sqrt()
}
