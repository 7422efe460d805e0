use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Label};
use crate::error::{Error, Result};

/// Sentences are the non-empty segments obtained by splitting on `.`, `?`
/// or `!` followed by whitespace (or end of text).
pub fn count_sentences(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let mut count = 0;
    let mut segment_has_content = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if matches!(c, '.' | '?' | '!')
            && chars.get(i + 1).is_none_or(|n| n.is_whitespace())
        {
            if segment_has_content {
                count += 1;
                segment_has_content = false;
            }
        } else if !c.is_whitespace() && !matches!(c, '.' | '?' | '!') {
            segment_has_content = true;
        }
        i += 1;
    }
    if segment_has_content {
        count += 1;
    }
    count
}

/// Per-label corpus statistics for the class-distribution table. Word
/// counts are body token counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelStats {
    pub label: Label,
    pub examples: usize,
    pub total_words: usize,
    pub mean_words: f64,
    pub mean_sentences: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusStats {
    pub dataset: String,
    pub rows: Vec<LabelStats>,
}

impl CorpusStats {
    pub fn row(&self, label: Label) -> Option<&LabelStats> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Plain table rendering for standard output.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<14} {:>6} {:>10} {:>12} {:>12}\n",
            "label", "count", "words", "words/ex", "sents/ex"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<14} {:>6} {:>10} {:>12.1} {:>12.1}\n",
                r.label.as_str(),
                r.examples,
                r.total_words,
                r.mean_words,
                r.mean_sentences
            ));
        }
        out
    }
}

pub fn corpus_stats(dataset: &Dataset) -> Result<CorpusStats> {
    if dataset.is_empty() {
        return Err(Error::Data("cannot compute stats of an empty dataset".into()));
    }
    let mut rows = Vec::new();
    for label in [Label::Fake, Label::Legit] {
        let members: Vec<_> = dataset
            .examples
            .iter()
            .filter(|e| e.label == label)
            .collect();
        if members.is_empty() {
            continue;
        }
        let total_words: usize = members.iter().map(|e| e.body.len()).sum();
        let total_sentences: usize = members.iter().map(|e| count_sentences(&e.raw_body)).sum();
        rows.push(LabelStats {
            label,
            examples: members.len(),
            total_words,
            mean_words: total_words as f64 / members.len() as f64,
            mean_sentences: total_sentences as f64 / members.len() as f64,
        });
    }
    Ok(CorpusStats {
        dataset: dataset.provenance.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DatasetKind, Domain, NewsExample};

    #[test]
    fn two_short_sentences() {
        assert_eq!(count_sentences("One. Two."), 2);
        assert_eq!(count_sentences("One. Two"), 2);
        assert_eq!(count_sentences("Just one"), 1);
        assert_eq!(count_sentences(""), 0);
        assert_eq!(count_sentences("Really?! Yes."), 2);
    }

    #[test]
    fn abbreviation_dots_inside_words_do_not_split() {
        // A period not followed by whitespace stays inside the sentence.
        assert_eq!(count_sentences("Version 2.5 shipped. Done."), 2);
    }

    #[test]
    fn single_example_stats() {
        let ds = Dataset::new(
            vec![NewsExample::build(
                "x".into(),
                DatasetKind::FakenewsAmt,
                Domain::Sports,
                Label::Fake,
                "topic".into(),
                "One. Two.".into(),
                true,
            )],
            "test",
        );
        let stats = corpus_stats(&ds).unwrap();
        let fake = stats.row(Label::Fake).unwrap();
        assert_eq!(fake.examples, 1);
        assert_eq!(fake.total_words, 2);
        assert_eq!(fake.mean_sentences, 2.0);
    }

    #[test]
    fn empty_dataset_errors() {
        let ds = Dataset::new(vec![], "test");
        assert!(corpus_stats(&ds).is_err());
    }
}
