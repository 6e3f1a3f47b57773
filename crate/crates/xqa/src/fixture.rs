//! Bundled synthetic corpora for offline runs and tests.
//!
//! Every instance is built so its answer lives in exactly one sentence, the
//! two gold facts have strictly ordered overlap with the question, and the
//! alphabetically first article is a pure distractor. That layout separates
//! the coupled and decoupled reference models: the coupled one answers from
//! its own selection (so removing it flips the answer), while the decoupled
//! one's relevance output degenerates to the first facts in fact-id order,
//! far away from where its answers actually come from.

use crate::corpus::{Answer, Article, Corpus, FactId, Instance};

fn payload(i: usize) -> String {
    match i % 5 {
        0 => format!("Captain Bromley{i}"),
        1 => format!("Sir Ogden-Marsh{i}"),
        2 => format!("Lady Amara{i} Quill"),
        3 => format!("Professor T. Ashcombe{i}"),
        _ => format!("Señor Ibáñez{i}"),
    }
}

fn instance(prefix: &str, i: usize) -> Instance {
    let tag = format!("Starwick{i}");
    let who = payload(i);
    let market = format!("Market {i:02}");
    let archive = format!("Archive {i:02}");
    let quarry = format!("Quarry {i:02}");
    let zephyr = format!("Zephyr {i:02}");

    // Context order is deliberately not alphabetical; fact-id order is.
    let context = vec![
        Article::new(
            &market,
            vec![
                "Traders gather near dawn.".into(),
                format!("{who} guards the old gate of {tag}."),
                "Copper pans gleam at stalls.".into(),
            ],
        ),
        Article::new(
            &archive,
            vec![
                "Dusty ledgers crowd long shelves.".into(),
                "Clerks sort brittle papers.".into(),
                "Nothing louder than whispers.".into(),
            ],
        ),
        Article::new(
            &zephyr,
            vec![
                "Sailors admire gentle winds.".into(),
                "Kites drift above white cliffs.".into(),
                "Gulls circle warm currents.".into(),
            ],
        ),
        Article::new(
            &quarry,
            vec![
                format!("Miners of {tag} dig granite."),
                "Stone blocks line deep floors.".into(),
                "Dust settles between rails.".into(),
            ],
        ),
    ];
    Instance {
        id: format!("{prefix}-{i:02}"),
        question: format!("who guards the old gate of {tag}?"),
        context,
        gold_answer: Answer::Span(who),
        gold_facts: [FactId::new(market, 1), FactId::new(quarry, 0)]
            .into_iter()
            .collect(),
        extra: Default::default(),
    }
}

/// The 20-instance fixture corpus.
pub fn fixture_corpus() -> Corpus {
    Corpus {
        instances: (0..20).map(|i| instance("fx", i)).collect(),
        skipped: vec![],
    }
}

/// The 5-instance micro fixture used by the probe equivalence checks.
pub fn micro_corpus() -> Corpus {
    Corpus {
        instances: (0..5).map(|i| instance("micro", i)).collect(),
        skipped: vec![],
    }
}
