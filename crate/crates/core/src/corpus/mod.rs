//! Dataset ingestion, tokenization, splitting, and corpus statistics.

mod fixtures;
mod ingest;
mod split;
mod stats;
mod tokenize;

pub use fixtures::{
    generate_celebrity, generate_fakenews_amt, generate_mini, write_directory_tree,
    DEFAULT_FIXTURE_SEED,
};
pub use ingest::{
    escape_tsv_field, ingest, unescape_tsv_field, write_canonical_tsv, IngestFormat,
};
pub use split::{stratified_kfold, stratified_split, SplitIndices, SplitPlan};
pub use stats::{corpus_stats, count_sentences, CorpusStats, LabelStats};
pub use tokenize::{tokenize, tokenize_with_case};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gold label of a news item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Fake,
    Legit,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Fake => "fake",
            Label::Legit => "legit",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "fake" => Some(Label::Fake),
            "legit" => Some(Label::Legit),
            _ => None,
        }
    }

    /// Class index used by the softmax head: fake = 0, legit = 1.
    pub fn class_index(self) -> usize {
        match self {
            Label::Fake => 0,
            Label::Legit => 1,
        }
    }

    pub fn from_class_index(i: usize) -> Label {
        if i == 0 {
            Label::Fake
        } else {
            Label::Legit
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    FakenewsAmt,
    Celebrity,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::FakenewsAmt => "fakenews_amt",
            DatasetKind::Celebrity => "celebrity",
        }
    }

    pub fn parse(s: &str) -> Option<DatasetKind> {
        match s {
            "fakenews_amt" => Some(DatasetKind::FakenewsAmt),
            "celebrity" => Some(DatasetKind::Celebrity),
            _ => None,
        }
    }
}

/// News domain. FakeNews AMT items carry one of the six news domains;
/// Celebrity items always carry [`Domain::Celebrity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Business,
    Education,
    Technology,
    Politics,
    Entertainment,
    Sports,
    Celebrity,
}

impl Domain {
    pub const AMT_DOMAINS: [Domain; 6] = [
        Domain::Business,
        Domain::Education,
        Domain::Technology,
        Domain::Politics,
        Domain::Entertainment,
        Domain::Sports,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Business => "business",
            Domain::Education => "education",
            Domain::Technology => "technology",
            Domain::Politics => "politics",
            Domain::Entertainment => "entertainment",
            Domain::Sports => "sports",
            Domain::Celebrity => "celebrity",
        }
    }

    pub fn parse(s: &str) -> Option<Domain> {
        match s {
            "business" => Some(Domain::Business),
            "education" => Some(Domain::Education),
            "technology" => Some(Domain::Technology),
            "politics" => Some(Domain::Politics),
            "entertainment" => Some(Domain::Entertainment),
            "sports" => Some(Domain::Sports),
            "celebrity" => Some(Domain::Celebrity),
            _ => None,
        }
    }

    /// File-name code used in the directory-tree layout.
    pub fn code(self) -> &'static str {
        match self {
            Domain::Business => "biz",
            Domain::Education => "edu",
            Domain::Technology => "tech",
            Domain::Politics => "polit",
            Domain::Entertainment => "entmt",
            Domain::Sports => "sports",
            Domain::Celebrity => "celeb",
        }
    }

    pub fn from_code(code: &str) -> Option<Domain> {
        match code {
            "biz" => Some(Domain::Business),
            "edu" => Some(Domain::Education),
            "tech" => Some(Domain::Technology),
            "polit" => Some(Domain::Politics),
            "entmt" => Some(Domain::Entertainment),
            "sports" => Some(Domain::Sports),
            "celeb" => Some(Domain::Celebrity),
            _ => None,
        }
    }

    pub fn valid_for(self, dataset: DatasetKind) -> bool {
        match dataset {
            DatasetKind::FakenewsAmt => self != Domain::Celebrity,
            DatasetKind::Celebrity => self == Domain::Celebrity,
        }
    }
}

/// One (topic, body, label) news item with its tokenized fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewsExample {
    pub id: String,
    pub dataset: DatasetKind,
    pub domain: Domain,
    pub label: Label,
    pub topic: Vec<String>,
    pub body: Vec<String>,
    pub raw_topic: String,
    pub raw_body: String,
}

impl NewsExample {
    pub fn build(
        id: String,
        dataset: DatasetKind,
        domain: Domain,
        label: Label,
        raw_topic: String,
        raw_body: String,
        lowercase: bool,
    ) -> Self {
        NewsExample {
            id,
            dataset,
            domain,
            label,
            topic: tokenize_with_case(&raw_topic, lowercase),
            body: tokenize_with_case(&raw_body, lowercase),
            raw_topic,
            raw_body,
        }
    }
}

/// Immutable collection of validated examples.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub examples: Vec<NewsExample>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(examples: Vec<NewsExample>, provenance: impl Into<String>) -> Self {
        Dataset {
            examples,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn label_count(&self, label: Label) -> usize {
        self.examples.iter().filter(|e| e.label == label).count()
    }

    pub fn domains(&self) -> Vec<Domain> {
        let mut set = std::collections::BTreeSet::new();
        for e in &self.examples {
            set.insert(e.domain);
        }
        set.into_iter().collect()
    }

    /// Distinct tokens across topic and body of the selected examples, in
    /// sorted order.
    pub fn vocabulary(&self, indices: &[usize]) -> Vec<String> {
        let mut set = std::collections::BTreeSet::new();
        for &i in indices {
            let e = &self.examples[i];
            for t in e.topic.iter().chain(e.body.iter()) {
                set.insert(t.clone());
            }
        }
        set.into_iter().collect()
    }

    /// Restriction to the held-out domain and its complement:
    /// (train = other domains, test = held-out domain).
    pub fn domain_partition(&self, held_out: Domain) -> Result<(Dataset, Dataset)> {
        if self.examples.iter().any(|e| e.dataset != DatasetKind::FakenewsAmt) {
            return Err(Error::Usage(
                "domain_partition applies to the FakeNews AMT dataset".into(),
            ));
        }
        if !self.examples.iter().any(|e| e.domain == held_out) {
            return Err(Error::Data(format!(
                "domain {} absent from dataset",
                held_out.as_str()
            )));
        }
        let (test, train): (Vec<_>, Vec<_>) = self
            .examples
            .iter()
            .cloned()
            .partition(|e| e.domain == held_out);
        Ok((
            Dataset::new(train, format!("{} minus {}", self.provenance, held_out.as_str())),
            Dataset::new(test, format!("{} held-out {}", self.provenance, held_out.as_str())),
        ))
    }
}
