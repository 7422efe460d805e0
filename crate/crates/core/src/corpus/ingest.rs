use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::corpus::{Dataset, DatasetKind, Domain, Label, NewsExample};
use crate::error::{Error, Result};

/// Supported input layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestFormat {
    /// Tab-separated file with header `id dataset domain label topic body`;
    /// newlines/tabs in fields escaped (see [`escape_tsv_field`]).
    CanonicalTsv,
    /// Two top-level folders `fake/` and `legit/`, files named
    /// `<domain_code><index>.txt`, first line the topic and the rest the
    /// body. The dataset tag cannot be inferred from the tree, so it is
    /// part of the format selector.
    DirectoryTree(DatasetKind),
}

pub fn escape_tsv_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out
}

pub fn unescape_tsv_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('\\') => out.push('\\'),
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

const TSV_HEADER: &str = "id\tdataset\tdomain\tlabel\ttopic\tbody";

/// Reads a dataset. Row problems are collected with their row numbers and
/// reported together; any problem aborts the ingestion.
pub fn ingest(path: &Path, format: IngestFormat) -> Result<Dataset> {
    match format {
        IngestFormat::CanonicalTsv => ingest_tsv(path),
        IngestFormat::DirectoryTree(kind) => ingest_directory_tree(path, kind),
    }
}

fn validate_example(
    errors: &mut Vec<String>,
    seen: &mut BTreeSet<String>,
    where_: &str,
    id: &str,
    dataset: DatasetKind,
    domain: Domain,
    raw_topic: &str,
    raw_body: &str,
) -> bool {
    let mut ok = true;
    if !domain.valid_for(dataset) {
        errors.push(format!(
            "{where_}: domain {} is not valid for dataset {}",
            domain.as_str(),
            dataset.as_str()
        ));
        ok = false;
    }
    if !seen.insert(id.to_string()) {
        errors.push(format!("{where_}: duplicate id {id:?}"));
        ok = false;
    }
    if raw_topic.trim().is_empty() {
        errors.push(format!("{where_}: empty topic"));
        ok = false;
    }
    if raw_body.trim().is_empty() {
        errors.push(format!("{where_}: empty body"));
        ok = false;
    }
    ok
}

fn ingest_tsv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file, expected canonical TSV header".into(),
    })?;
    if header != TSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {TSV_HEADER:?}, got {header:?}"),
        });
    }
    let mut errors = Vec::new();
    let mut seen = BTreeSet::new();
    let mut examples = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let row = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            errors.push(format!("row {row}: expected 6 columns, got {}", fields.len()));
            continue;
        }
        let id = fields[0];
        let Some(dataset) = DatasetKind::parse(fields[1]) else {
            errors.push(format!("row {row}: unknown dataset {:?}", fields[1]));
            continue;
        };
        let Some(domain) = Domain::parse(fields[2]) else {
            errors.push(format!("row {row}: unknown domain {:?}", fields[2]));
            continue;
        };
        let Some(label) = Label::parse(fields[3]) else {
            errors.push(format!("row {row}: unknown label {:?}", fields[3]));
            continue;
        };
        let raw_topic = unescape_tsv_field(fields[4]);
        let raw_body = unescape_tsv_field(fields[5]);
        if validate_example(
            &mut errors,
            &mut seen,
            &format!("row {row}"),
            id,
            dataset,
            domain,
            &raw_topic,
            &raw_body,
        ) {
            examples.push(NewsExample::build(
                id.to_string(),
                dataset,
                domain,
                label,
                raw_topic,
                raw_body,
                true,
            ));
        }
    }
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    Ok(Dataset::new(examples, path.display().to_string()))
}

/// Splits a directory-tree file stem into (domain code, index).
fn parse_stem(stem: &str) -> Option<(&str, &str)> {
    let split = stem.find(|c: char| c.is_ascii_digit())?;
    let (code, index) = stem.split_at(split);
    if index.chars().all(|c| c.is_ascii_digit()) && !code.is_empty() {
        Some((code, index))
    } else {
        None
    }
}

fn ingest_directory_tree(path: &Path, dataset: DatasetKind) -> Result<Dataset> {
    let mut errors = Vec::new();
    let mut seen = BTreeSet::new();
    let mut examples = Vec::new();
    for (label, sub) in [(Label::Fake, "fake"), (Label::Legit, "legit")] {
        let dir = path.join(sub);
        if !dir.is_dir() {
            return Err(Error::Data(format!(
                "missing {sub}/ folder under {}",
                path.display()
            )));
        }
        let mut names: Vec<String> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "txt"))
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        names.sort();
        for name in names {
            let where_ = format!("{sub}/{name}");
            let stem = name.trim_end_matches(".txt");
            let Some((code, index)) = parse_stem(stem) else {
                errors.push(format!(
                    "{where_}: file name must be <domain_code><index>.txt"
                ));
                continue;
            };
            let Some(domain) = Domain::from_code(code) else {
                errors.push(format!("{where_}: unknown domain code {code:?}"));
                continue;
            };
            let text = fs::read_to_string(dir.join(&name))?;
            let (raw_topic, raw_body) = match text.split_once('\n') {
                Some((t, b)) => (t.trim_end().to_string(), b.trim().to_string()),
                None => (text.trim().to_string(), String::new()),
            };
            let id = format!("{}-{}-{}{}", dataset.as_str(), sub, code, index);
            if validate_example(
                &mut errors,
                &mut seen,
                &where_,
                &id,
                dataset,
                domain,
                &raw_topic,
                &raw_body,
            ) {
                examples.push(NewsExample::build(
                    id, dataset, domain, label, raw_topic, raw_body, true,
                ));
            }
        }
    }
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    examples.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Dataset::new(examples, path.display().to_string()))
}

/// Writes the canonical TSV form; reading it back with
/// [`IngestFormat::CanonicalTsv`] is lossless for the raw text fields, and
/// rewriting what was read reproduces the file byte for byte.
pub fn write_canonical_tsv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(TSV_HEADER);
    out.push('\n');
    for e in &ds.examples {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            e.id,
            e.dataset.as_str(),
            e.domain.as_str(),
            e.label.as_str(),
            escape_tsv_field(&e.raw_topic),
            escape_tsv_field(&e.raw_body)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_dataset() -> Dataset {
        let examples = vec![
            NewsExample::build(
                "a1".into(),
                DatasetKind::FakenewsAmt,
                Domain::Business,
                Label::Fake,
                "Banks battle over data".into(),
                "The big banks are fighting.\nIt is a multi-line story.".into(),
                true,
            ),
            NewsExample::build(
                "a2".into(),
                DatasetKind::FakenewsAmt,
                Domain::Sports,
                Label::Legit,
                "Team wins final".into(),
                "A tab\there and a backslash \\ too.".into(),
                true,
            ),
        ];
        Dataset::new(examples, "test")
    }

    #[test]
    fn tsv_round_trip_is_lossless_and_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("one.tsv");
        let p2 = dir.path().join("two.tsv");
        let ds = sample_dataset();
        write_canonical_tsv(&ds, &p1).unwrap();
        let back = ingest(&p1, IngestFormat::CanonicalTsv).unwrap();
        assert_eq!(back.examples[0].raw_body, ds.examples[0].raw_body);
        assert_eq!(back.examples[1].raw_body, ds.examples[1].raw_body);
        write_canonical_tsv(&back, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn unknown_label_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.tsv");
        fs::write(
            &p,
            "id\tdataset\tdomain\tlabel\ttopic\tbody\nx1\tfakenews_amt\tsports\tunknown\tt\tb\n",
        )
        .unwrap();
        let err = ingest(&p, IngestFormat::CanonicalTsv).unwrap_err();
        match err {
            Error::Validation(rows) => {
                assert!(rows[0].contains("row 2") && rows[0].contains("unknown"))
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("dup.tsv");
        fs::write(
            &p,
            "id\tdataset\tdomain\tlabel\ttopic\tbody\n\
             x1\tfakenews_amt\tsports\tfake\tt\tb\n\
             x1\tfakenews_amt\tsports\tlegit\tt\tb\n",
        )
        .unwrap();
        let err = ingest(&p, IngestFormat::CanonicalTsv).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn celebrity_domain_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.tsv");
        fs::write(
            &p,
            "id\tdataset\tdomain\tlabel\ttopic\tbody\nx1\tcelebrity\tsports\tfake\tt\tb\n",
        )
        .unwrap();
        assert!(matches!(
            ingest(&p, IngestFormat::CanonicalTsv),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn directory_tree_layout() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("fake")).unwrap();
        fs::create_dir_all(dir.path().join("legit")).unwrap();
        fs::write(
            dir.path().join("fake/biz01.txt"),
            "Fake business topic\nBody of the fake story.",
        )
        .unwrap();
        fs::write(
            dir.path().join("legit/sports02.txt"),
            "Real sports topic\nBody of the real story.",
        )
        .unwrap();
        let ds = ingest(
            dir.path(),
            IngestFormat::DirectoryTree(DatasetKind::FakenewsAmt),
        )
        .unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.examples[0].domain, Domain::Business);
        assert_eq!(ds.examples[0].label, Label::Fake);
        assert_eq!(ds.examples[0].raw_topic, "Fake business topic");
        assert_eq!(ds.examples[1].domain, Domain::Sports);
    }

    #[test]
    fn directory_tree_bad_code() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("fake")).unwrap();
        fs::create_dir_all(dir.path().join("legit")).unwrap();
        fs::write(dir.path().join("fake/zzz01.txt"), "t\nb").unwrap();
        let err = ingest(
            dir.path(),
            IngestFormat::DirectoryTree(DatasetKind::FakenewsAmt),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn escape_round_trip_property() {
        use proptest::prelude::*;
        proptest!(|(s in ".*")| {
            let escaped = escape_tsv_field(&s);
            prop_assert!(!escaped.contains('\t'));
            prop_assert!(!escaped.contains('\n'));
            prop_assert_eq!(unescape_tsv_field(&escaped), s);
        });
    }
}
