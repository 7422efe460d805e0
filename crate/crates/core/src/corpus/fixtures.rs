//! Deterministic synthetic datasets shaped like the two news corpora.
//!
//! The real corpora are not redistributable, so the bundled fixtures are
//! generated: example counts match the published class distribution exactly,
//! per-label word/sentence means land on the published table, and the label
//! signal is carried by marker vocabulary that differs between the two
//! datasets (so in-domain training works and cross-dataset transfer degrades,
//! mirroring the real corpora).

use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, DatasetKind, Domain, Label, NewsExample};
use crate::error::Result;
use crate::numerics::derive_seed;

pub const DEFAULT_FIXTURE_SEED: u64 = 17;

const FILLERS: &[&str] = &[
    "the", "a", "of", "to", "and", "in", "that", "for", "on", "with", "as", "at", "by", "from",
    "it", "was", "were", "has", "have", "had", "said", "after", "before", "over", "under", "new",
    "report", "story", "week", "year", "people", "public", "local", "group", "plan", "move",
    "time", "day", "part", "end", "first", "last", "next", "many", "more", "most", "some", "also",
    "still", "just", "now", "when", "while", "which", "will", "would", "could", "been", "about",
];

const NUMBERS: &[&str] = &["3", "10", "25", "100", "2017"];

fn domain_pool(domain: Domain) -> &'static [&'static str] {
    match domain {
        Domain::Business => &[
            "market", "bank", "shares", "profit", "investors", "economy", "trade", "company",
            "merger", "revenue", "stocks", "ceo", "startup", "funding", "deal", "quarter",
            "growth", "tax", "industry", "finance",
        ],
        Domain::Education => &[
            "school", "students", "teachers", "university", "college", "exam", "curriculum",
            "classroom", "degree", "campus", "tuition", "learning", "grades", "scholarship",
            "literacy", "faculty", "semester", "stem", "lesson", "graduation",
        ],
        Domain::Technology => &[
            "software", "device", "internet", "data", "phone", "computer", "app", "robot",
            "chip", "network", "gadget", "code", "platform", "battery", "screen", "update",
            "privacy", "cloud", "silicon", "browser",
        ],
        Domain::Politics => &[
            "president", "senate", "congress", "election", "policy", "governor", "campaign",
            "vote", "law", "bill", "minister", "parliament", "donald", "white", "house",
            "party", "debate", "candidate", "reform", "budget",
        ],
        Domain::Entertainment => &[
            "movie", "film", "actor", "actress", "music", "album", "concert", "show", "series",
            "director", "premiere", "award", "festival", "song", "band", "theater", "drama",
            "comedy", "star", "studio",
        ],
        Domain::Sports => &[
            "team", "game", "season", "coach", "player", "league", "match", "championship",
            "goal", "score", "tournament", "stadium", "injury", "transfer", "club", "title",
            "win", "defeat", "fans", "final",
        ],
        Domain::Celebrity => &[
            "celebrity", "gossip", "romance", "wedding", "divorce", "diet", "fashion", "mansion",
            "paparazzi", "carpet", "interview", "surgery", "baby", "dating", "breakup", "yacht",
            "lifestyle", "glamour", "tabloid", "villa",
        ],
    }
}

/// Label markers. The two datasets use disjoint marker sets, which is what
/// makes models trained on one dataset transfer poorly to the other.
fn markers(dataset: DatasetKind, label: Label) -> &'static [&'static str] {
    match (dataset, label) {
        (DatasetKind::FakenewsAmt, Label::Fake) => &[
            "reportedly", "allegedly", "shocking", "rumored", "insiders", "secretly",
            "unverified", "explosive",
        ],
        (DatasetKind::FakenewsAmt, Label::Legit) => &[
            "confirmed", "statement", "officials", "spokesperson", "announced", "according",
            "documents", "verified",
        ],
        (DatasetKind::Celebrity, Label::Fake) => &[
            "whispers", "sensational", "stunning", "heartbreak", "scandalous", "unnamed",
            "frenzy", "bombshell",
        ],
        (DatasetKind::Celebrity, Label::Legit) => &[
            "publicist", "representative", "agency", "memoir", "foundation", "charity", "gala",
            "estate",
        ],
    }
}

struct Shape {
    sentences: std::ops::RangeInclusive<usize>,
    words_per_sentence: std::ops::RangeInclusive<usize>,
}

/// Sentence/word ranges whose means land on the published per-label table:
/// 132/5 and 139/5 words/sentences per example for the first dataset,
/// 399/17 and 700/33 for the second.
fn shape(dataset: DatasetKind, label: Label) -> Shape {
    match (dataset, label) {
        (DatasetKind::FakenewsAmt, Label::Fake) => Shape {
            sentences: 4..=6,
            words_per_sentence: 22..=31,
        },
        (DatasetKind::FakenewsAmt, Label::Legit) => Shape {
            sentences: 4..=6,
            words_per_sentence: 23..=33,
        },
        (DatasetKind::Celebrity, Label::Fake) => Shape {
            sentences: 15..=19,
            words_per_sentence: 20..=27,
        },
        (DatasetKind::Celebrity, Label::Legit) => Shape {
            sentences: 31..=35,
            words_per_sentence: 18..=24,
        },
    }
}

fn pick_word(rng: &mut ChaCha8Rng, domain: Domain) -> &'static str {
    let roll: f64 = rng.random();
    if roll < 0.52 {
        FILLERS.choose(rng).unwrap()
    } else if roll < 0.95 {
        domain_pool(domain).choose(rng).unwrap()
    } else {
        NUMBERS.choose(rng).unwrap()
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn make_sentence(
    rng: &mut ChaCha8Rng,
    domain: Domain,
    words: usize,
    marker: Option<&str>,
) -> String {
    let mut tokens: Vec<String> = (0..words).map(|_| pick_word(rng, domain).to_string()).collect();
    if let Some(m) = marker {
        let slot = rng.random_range(0..tokens.len());
        tokens[slot] = m.to_string();
    }
    tokens[0] = capitalize(&tokens[0]);
    tokens.join(" ") + "."
}

fn make_example(
    rng: &mut ChaCha8Rng,
    id: String,
    dataset: DatasetKind,
    domain: Domain,
    label: Label,
    shape: &Shape,
) -> NewsExample {
    let marker_pool = markers(dataset, label);

    // Topic: 5-9 words; most topics lead with two label markers the way
    // real headlines stack them ("officials confirmed ..",
    // "shocking rumored ..").
    let topic_len = rng.random_range(5..=9);
    let topic_marked = rng.random::<f64>() < 0.8;
    let mut topic_tokens: Vec<String> = (0..topic_len)
        .map(|_| {
            let roll: f64 = rng.random();
            if roll < 0.45 {
                FILLERS.choose(rng).unwrap().to_string()
            } else {
                domain_pool(domain).choose(rng).unwrap().to_string()
            }
        })
        .collect();
    if topic_marked {
        let first = rng.random_range(0..topic_tokens.len());
        topic_tokens[first] = marker_pool.choose(rng).unwrap().to_string();
        let second = (first + 1 + rng.random_range(0..topic_tokens.len() - 1)) % topic_tokens.len();
        topic_tokens[second] = marker_pool.choose(rng).unwrap().to_string();
    }
    topic_tokens[0] = capitalize(&topic_tokens[0]);
    let raw_topic = topic_tokens.join(" ");

    let n_sentences = rng.random_range(shape.sentences.clone());
    let mut sentences = Vec::with_capacity(n_sentences);
    let mut marker_used = false;
    for _ in 0..n_sentences {
        let words = rng.random_range(shape.words_per_sentence.clone());
        let marker = if rng.random::<f64>() < 0.4 {
            marker_used = true;
            Some(*marker_pool.choose(rng).unwrap())
        } else {
            None
        };
        sentences.push(make_sentence(rng, domain, words, marker));
    }
    if !marker_used {
        // Every example carries at least one body marker.
        let words = rng.random_range(shape.words_per_sentence.clone());
        let marker = Some(*marker_pool.choose(rng).unwrap());
        sentences[0] = make_sentence(rng, domain, words, marker);
    }
    let raw_body = sentences.join(" ");

    NewsExample::build(id, dataset, domain, label, raw_topic, raw_body, true)
}

fn generate(
    dataset: DatasetKind,
    domains: &[Domain],
    per_domain_per_label: usize,
    seed: u64,
    id_prefix: &str,
) -> Dataset {
    let mut examples = Vec::new();
    for (d_idx, &domain) in domains.iter().enumerate() {
        for (l_idx, label) in [Label::Fake, Label::Legit].into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                seed,
                &[d_idx as u64 + 10, l_idx as u64 + 20],
            ));
            for i in 1..=per_domain_per_label {
                let id = format!(
                    "{id_prefix}-{}-{}-{:03}",
                    domain.code(),
                    label.as_str(),
                    i
                );
                let sh = shape(dataset, label);
                examples.push(make_example(&mut rng, id, dataset, domain, label, &sh));
            }
        }
    }
    Dataset::new(examples, format!("synthetic {} (seed {seed})", dataset.as_str()))
}

/// 480 examples across the six news domains: 80 per domain, balanced
/// fake/legit.
pub fn generate_fakenews_amt(seed: u64) -> Dataset {
    generate(
        DatasetKind::FakenewsAmt,
        &Domain::AMT_DOMAINS,
        40,
        seed,
        "amt",
    )
}

/// 500 celebrity-news examples, balanced fake/legit.
pub fn generate_celebrity(seed: u64) -> Dataset {
    generate(
        DatasetKind::Celebrity,
        &[Domain::Celebrity],
        250,
        seed,
        "cel",
    )
}

/// Small six-domain dataset (72 examples) for smoke tests and demos. Bodies
/// are shorter than real examples so end-to-end runs stay fast.
pub fn generate_mini(seed: u64) -> Dataset {
    let mut examples = Vec::new();
    for (d_idx, &domain) in Domain::AMT_DOMAINS.iter().enumerate() {
        for (l_idx, label) in [Label::Fake, Label::Legit].into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                seed,
                &[d_idx as u64 + 50, l_idx as u64 + 70],
            ));
            for i in 1..=6usize {
                let id = format!("mini-{}-{}-{:03}", domain.code(), label.as_str(), i);
                let sh = Shape {
                    sentences: 3..=3,
                    words_per_sentence: 8..=12,
                };
                examples.push(make_example(
                    &mut rng,
                    id,
                    DatasetKind::FakenewsAmt,
                    domain,
                    label,
                    &sh,
                ));
            }
        }
    }
    Dataset::new(examples, format!("synthetic mini (seed {seed})"))
}

/// Writes a dataset in the directory-tree layout (`fake/` and `legit/`
/// folders, `<domain_code><index>.txt` files, topic on the first line).
pub fn write_directory_tree(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("fake"))?;
    fs::create_dir_all(dir.join("legit"))?;
    let mut counters: std::collections::BTreeMap<(Label, Domain), usize> = Default::default();
    for e in &ds.examples {
        let counter = counters.entry((e.label, e.domain)).or_insert(0);
        *counter += 1;
        let name = format!("{}{:03}.txt", e.domain.code(), counter);
        let sub = match e.label {
            Label::Fake => "fake",
            Label::Legit => "legit",
        };
        fs::write(
            dir.join(sub).join(name),
            format!("{}\n{}", e.raw_topic, e.raw_body),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{corpus_stats, ingest, IngestFormat};

    #[test]
    fn amt_counts_match_published_table() {
        let ds = generate_fakenews_amt(DEFAULT_FIXTURE_SEED);
        assert_eq!(ds.label_count(Label::Fake), 240);
        assert_eq!(ds.label_count(Label::Legit), 240);
        for domain in Domain::AMT_DOMAINS {
            let n = ds.examples.iter().filter(|e| e.domain == domain).count();
            assert_eq!(n, 80);
        }
    }

    #[test]
    fn celebrity_counts_match_published_table() {
        let ds = generate_celebrity(DEFAULT_FIXTURE_SEED);
        assert_eq!(ds.label_count(Label::Fake), 250);
        assert_eq!(ds.label_count(Label::Legit), 250);
    }

    #[test]
    fn means_land_near_published_table() {
        let amt = corpus_stats(&generate_fakenews_amt(DEFAULT_FIXTURE_SEED)).unwrap();
        let fake = amt.row(Label::Fake).unwrap();
        let legit = amt.row(Label::Legit).unwrap();
        assert!((fake.mean_words - 132.0).abs() / 132.0 < 0.10, "{}", fake.mean_words);
        assert!((fake.mean_sentences - 5.0).abs() / 5.0 < 0.10);
        assert!((legit.mean_words - 139.0).abs() / 139.0 < 0.10, "{}", legit.mean_words);

        let cel = corpus_stats(&generate_celebrity(DEFAULT_FIXTURE_SEED)).unwrap();
        let cf = cel.row(Label::Fake).unwrap();
        let cl = cel.row(Label::Legit).unwrap();
        assert!((cf.mean_words - 399.0).abs() / 399.0 < 0.10, "{}", cf.mean_words);
        assert!((cf.mean_sentences - 17.0).abs() / 17.0 < 0.10);
        assert!((cl.mean_words - 700.0).abs() / 700.0 < 0.10, "{}", cl.mean_words);
        assert!((cl.mean_sentences - 33.0).abs() / 33.0 < 0.10);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_mini(3);
        let b = generate_mini(3);
        assert_eq!(a.examples[0].raw_body, b.examples[0].raw_body);
        assert_eq!(a.examples[71].raw_topic, b.examples[71].raw_topic);
    }

    #[test]
    fn directory_tree_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_mini(DEFAULT_FIXTURE_SEED);
        write_directory_tree(&ds, dir.path()).unwrap();
        let back = ingest(
            dir.path(),
            IngestFormat::DirectoryTree(DatasetKind::FakenewsAmt),
        )
        .unwrap();
        assert_eq!(back.len(), ds.len());
        let mut original: Vec<&String> = ds.examples.iter().map(|e| &e.raw_body).collect();
        let mut reread: Vec<&String> = back.examples.iter().map(|e| &e.raw_body).collect();
        original.sort();
        reread.sort();
        assert_eq!(original, reread);
    }
}
