//! CSV ingestion and the published-summaries JSON input.

use crate::domain::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::linmodel::AnovaTerm;
use serde::Deserialize;
use std::path::Path;

/// Maps CSV header names to the outcome, treatment, and batch columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMapping {
    pub outcome: String,
    pub treatment: String,
    pub batch: String,
    pub exclude: Option<String>,
    pub reference_level: Option<String>,
}

impl ColumnMapping {
    pub fn new(outcome: &str, treatment: &str, batch: &str) -> Result<Self> {
        if outcome == treatment || outcome == batch || treatment == batch {
            return Err(Error::Config(format!(
                "outcome, treatment, and batch columns must be distinct \
                 (got '{outcome}', '{treatment}', '{batch}')"
            )));
        }
        Ok(Self {
            outcome: outcome.to_owned(),
            treatment: treatment.to_owned(),
            batch: batch.to_owned(),
            exclude: None,
            reference_level: None,
        })
    }

    pub fn with_exclude(mut self, column: &str) -> Result<Self> {
        if [&self.outcome, &self.treatment, &self.batch]
            .iter()
            .any(|c| c.as_str() == column)
        {
            return Err(Error::Config(format!(
                "exclude column '{column}' clashes with a data column"
            )));
        }
        self.exclude = Some(column.to_owned());
        Ok(self)
    }

    pub fn with_reference(mut self, level: &str) -> Self {
        self.reference_level = Some(level.to_owned());
        self
    }
}

/// Exclude-flag values meaning "drop this row". Everything else, including
/// an empty field, means included.
fn is_excluded_flag(value: &str) -> bool {
    matches!(
        value.trim().to_ascii_lowercase().as_str(),
        "1" | "true" | "yes"
    )
}

/// Reads a comma-delimited CSV with a header row into a [`Dataset`].
///
/// Row numbers in errors are file line numbers, counting the header as
/// line 1.
pub fn parse_csv(path: &Path, mapping: &ColumnMapping) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Parse(format!("{} is empty", path.display())));
    }

    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Parse(format!(
                "missing column '{name}' (available: {})",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })
    };
    let outcome_idx = find(&mapping.outcome)?;
    let treatment_idx = find(&mapping.treatment)?;
    let batch_idx = find(&mapping.batch)?;
    let exclude_idx = mapping
        .exclude
        .as_deref()
        .map(find)
        .transpose()?;

    let mut observations = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let record = record.map_err(|e| Error::Parse(format!("row {line}: {e}")))?;
        let get = |idx: usize| -> Result<&str> {
            record
                .get(idx)
                .ok_or_else(|| Error::Parse(format!("row {line}: too few fields")))
        };
        let raw_outcome = get(outcome_idx)?;
        let outcome: f64 = raw_outcome.parse().map_err(|_| {
            Error::Parse(format!(
                "row {line}: outcome '{raw_outcome}' is not numeric"
            ))
        })?;
        let excluded = match exclude_idx {
            Some(idx) => is_excluded_flag(get(idx)?),
            None => false,
        };
        let obs = Observation::new(outcome, get(treatment_idx)?, get(batch_idx)?)
            .map_err(|e| Error::Parse(format!("row {line}: {e}")))?
            .excluded(excluded);
        observations.push(obs);
    }
    if observations.is_empty() {
        return Err(Error::Parse(format!(
            "{} has a header but no data rows",
            path.display()
        )));
    }

    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Dataset::new(name, observations)
}

#[derive(Debug, Deserialize)]
struct SummariesFile {
    n: usize,
    terms: Vec<SummaryTerm>,
}

#[derive(Debug, Deserialize)]
struct SummaryTerm {
    name: String,
    df: usize,
    ss: f64,
}

/// Maps a free-text term name onto the canonical term, tolerating the usual
/// spellings ("Site", "S×T", "Residual", ...).
fn normalize_term(name: &str) -> Result<AnovaTerm> {
    let key: String = name
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    match key.as_str() {
        "batch" | "block" | "site" => Ok(AnovaTerm::Batch),
        "treatment" => Ok(AnovaTerm::Treatment),
        "interaction" | "sxt" | "txs" | "st" | "ts" | "txb" | "bxt" | "tb" | "bt"
        | "treatmentxbatch" | "batchxtreatment" | "treatmentxblock" | "blockxtreatment"
        | "treatmentxsite" | "sitextreatment" | "treatmentbatch" | "treatmentblock"
        | "sitetreatment" | "treatmentsite" => Ok(AnovaTerm::Interaction),
        "error" | "residual" | "residuals" => Ok(AnovaTerm::Error),
        _ => Err(Error::Parse(format!(
            "unrecognised term name '{name}' (accepted: batch/block/site, treatment, \
             interaction/SxT/TxB, error/residual)"
        ))),
    }
}

/// Parses the summaries JSON input:
/// `{"n": int, "terms": [{"name": str, "df": int, "ss": number}, ...]}`.
pub fn parse_summaries(path: &Path) -> Result<(Vec<(AnovaTerm, usize, f64)>, usize)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let file: SummariesFile = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let terms = file
        .terms
        .iter()
        .map(|t| Ok((normalize_term(&t.name)?, t.df, t.ss)))
        .collect::<Result<Vec<_>>>()?;
    Ok((terms, file.n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn mapping() -> ColumnMapping {
        ColumnMapping::new("lifespan", "arm", "site").unwrap()
    }

    #[test]
    fn mapping_requires_distinct_columns() {
        assert!(ColumnMapping::new("a", "a", "b").is_err());
        assert!(ColumnMapping::new("a", "b", "b").is_err());
        assert!(mapping().with_exclude("arm").is_err());
    }

    #[test]
    fn parses_small_csv() {
        let f = write_temp(
            "lifespan,arm,site\n800,ctrl,TJL\n850,e2,TJL\n900,ctrl,UM\n910,e2,UM\n",
        );
        let d = parse_csv(f.path(), &mapping()).unwrap();
        assert_eq!(d.observations().len(), 4);
        assert_eq!(d.n_included(), 4);
        assert_eq!(d.observations()[1].treatment(), "e2");
    }

    #[test]
    fn cites_row_of_bad_outcome() {
        let f = write_temp(
            "lifespan,arm,site\n800,ctrl,TJL\n850,e2,TJL\n900,ctrl,UM\n910,e2,UM\n\
             920,ctrl,UT\nabc,e2,UT\n",
        );
        match parse_csv(f.path(), &mapping()) {
            Err(Error::Parse(msg)) => {
                assert!(msg.contains("row 7"), "{msg}");
                assert!(msg.contains("abc"), "{msg}");
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn names_missing_column() {
        let f = write_temp("y,arm,site\n1,a,b\n");
        match parse_csv(f.path(), &mapping()) {
            Err(Error::Parse(msg)) => assert!(msg.contains("lifespan"), "{msg}"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn exclude_flags() {
        let f = write_temp(
            "lifespan,arm,site,dropped\n1,a,x,yes\n2,b,x,\n3,a,y,no\n4,b,y,\n5,a,x,\n",
        );
        let m = mapping().with_exclude("dropped").unwrap();
        let d = parse_csv(f.path(), &m).unwrap();
        assert_eq!(d.n_excluded(), 1);
        assert_eq!(d.n_included(), 4);
        assert!(d.observations()[0].is_excluded());
    }

    #[test]
    fn exclude_flag_spellings() {
        for v in ["1", "true", "YES", "True", " yes "] {
            assert!(is_excluded_flag(v), "{v}");
        }
        for v in ["", "0", "no", "false", "excluded", "2"] {
            assert!(!is_excluded_flag(v), "{v}");
        }
    }

    #[test]
    fn empty_and_headerless_files() {
        let f = write_temp("");
        assert!(matches!(parse_csv(f.path(), &mapping()), Err(Error::Parse(_))));
        let f = write_temp("lifespan,arm,site\n");
        match parse_csv(f.path(), &mapping()) {
            Err(Error::Parse(msg)) => assert!(msg.contains("no data rows"), "{msg}"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn summaries_parse_and_normalize() {
        let f = write_temp(
            r#"{"n": 438, "terms": [
                {"name": "Site", "df": 2, "ss": 2399368},
                {"name": "Treatment", "df": 1, "ss": 533121},
                {"name": "S×T", "df": 2, "ss": 425825},
                {"name": "Error", "df": 432, "ss": 24434637}
            ]}"#,
        );
        let (terms, n) = parse_summaries(f.path()).unwrap();
        assert_eq!(n, 438);
        assert_eq!(terms[0].0, AnovaTerm::Batch);
        assert_eq!(terms[2].0, AnovaTerm::Interaction);
        assert_eq!(terms[3], (AnovaTerm::Error, 432, 24434637.0));
    }

    #[test]
    fn summaries_reject_unknown_term() {
        let f = write_temp(r#"{"n": 8, "terms": [{"name": "wat", "df": 1, "ss": 1}]}"#);
        match parse_summaries(f.path()) {
            Err(Error::Parse(msg)) => assert!(msg.contains("wat"), "{msg}"),
            other => panic!("unexpected: {other:?}"),
        }
    }
}
