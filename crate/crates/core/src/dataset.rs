//! Journal-year panel: the record types, CSV ingestion and the per-year /
//! per-journal views every analysis runs over.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PANEL_HEADER: [&str; 4] = ["journal_id", "year", "citations", "articles"];
pub const IMPACT_COLUMN: &str = "impact_factor";
pub const PAPER_HEADER: [&str; 4] = ["journal_id", "publication_year", "citing_year", "citations"];

/// Years outside this window are rejected as typos.
pub const YEAR_BOUNDS: (i32, i32) = (1800, 2200);

/// One journal in one year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalYearRecord {
    pub journal_id: String,
    pub year: i32,
    /// Citations received in `year` to all of the journal's papers.
    pub annual_citations: u64,
    /// Articles published in `year`.
    pub publications: u64,
    pub reported_impact_factor: Option<f64>,
}

/// Citations received in `citing_year` by one paper published in `publication_year`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperCitationRecord {
    pub journal_id: String,
    pub publication_year: i32,
    pub citing_year: i32,
    pub citations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Citations,
    Publications,
    ImpactFactor,
}

/// Validated collection of records, unique on `(journal_id, year)`.
///
/// Records are held sorted by journal id, then year.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Panel {
    records: Vec<JournalYearRecord>,
    years: Vec<i32>,
}

impl Panel {
    pub fn from_records(mut records: Vec<JournalYearRecord>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            validate_record(r, i as u64 + 1)?;
        }
        let mut seen = BTreeSet::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert((r.journal_id.as_str(), r.year)) {
                return Err(Error::DuplicateKey {
                    line: i as u64 + 1,
                    journal_id: r.journal_id.clone(),
                    year: r.year,
                });
            }
        }
        records.sort_by(|a, b| (&a.journal_id, a.year).cmp(&(&b.journal_id, b.year)));
        let years = records
            .iter()
            .map(|r| r.year)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Panel { records, years })
    }

    pub fn records(&self) -> &[JournalYearRecord] {
        &self.records
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn journal_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.records.iter().map(|r| r.journal_id.as_str()).collect();
        ids.dedup();
        ids
    }

    pub fn get(&self, journal_id: &str, year: i32) -> Option<&JournalYearRecord> {
        self.records
            .binary_search_by(|r| (r.journal_id.as_str(), r.year).cmp(&(journal_id, year)))
            .ok()
            .map(|i| &self.records[i])
    }

    /// All records of one journal, year-sorted.
    pub fn journal(&self, journal_id: &str) -> &[JournalYearRecord] {
        let start = self.records.partition_point(|r| r.journal_id.as_str() < journal_id);
        let end = self.records.partition_point(|r| r.journal_id.as_str() <= journal_id);
        &self.records[start..end]
    }

    /// Records with `year`, ordered by journal id. Empty when the year is absent.
    pub fn year_slice(&self, year: i32) -> Vec<&JournalYearRecord> {
        self.records.iter().filter(|r| r.year == year).collect()
    }

    pub fn journal_series(&self, journal_id: &str, field: Field) -> Result<Vec<(i32, f64)>> {
        let records = self.journal(journal_id);
        if records.is_empty() {
            return Err(Error::NotFound(journal_id.to_string()));
        }
        Ok(records
            .iter()
            .filter_map(|r| {
                let value = match field {
                    Field::Citations => Some(r.annual_citations as f64),
                    Field::Publications => Some(r.publications as f64),
                    Field::ImpactFactor => r.reported_impact_factor,
                };
                value.map(|v| (r.year, v))
            })
            .collect())
    }

    /// Journal-years with zero publications, where the citation rate is undefined.
    pub fn zero_publication_count(&self) -> usize {
        self.records.iter().filter(|r| r.publications == 0).count()
    }

    pub fn journals_per_year(&self) -> BTreeMap<i32, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.year).or_insert(0) += 1;
        }
        counts
    }

    /// Restricts the panel to years in `[first, last]`.
    pub fn restrict_years(&self, first: i32, last: i32) -> Panel {
        let records: Vec<_> = self
            .records
            .iter()
            .filter(|r| (first..=last).contains(&r.year))
            .cloned()
            .collect();
        let years = self.years.iter().copied().filter(|y| (first..=last).contains(y)).collect();
        Panel { records, years }
    }

    /// Writes the panel in the ingestion format. Reals use the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("journal_id,year,citations,articles,impact_factor\n");
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for r in &self.records {
            let impact = r.reported_impact_factor.map(|v| v.to_string()).unwrap_or_default();
            writer
                .write_record([
                    r.journal_id.as_str(),
                    &r.year.to_string(),
                    &r.annual_citations.to_string(),
                    &r.publications.to_string(),
                    &impact,
                ])
                .expect("writing to memory cannot fail");
        }
        let bytes = writer.into_inner().expect("writing to memory cannot fail");
        out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
        out
    }
}

fn validate_record(r: &JournalYearRecord, line: u64) -> Result<()> {
    if r.journal_id.trim().is_empty() {
        return Err(Error::Validation {
            line,
            message: "journal_id is empty".into(),
        });
    }
    if !(YEAR_BOUNDS.0..=YEAR_BOUNDS.1).contains(&r.year) {
        return Err(Error::Validation {
            line,
            message: format!(
                "year {} outside [{}, {}]",
                r.year, YEAR_BOUNDS.0, YEAR_BOUNDS.1
            ),
        });
    }
    if let Some(i) = r.reported_impact_factor {
        if !(i.is_finite() && i >= 0.0) {
            return Err(Error::Validation {
                line,
                message: format!("impact_factor must be a non-negative number, got {i}"),
            });
        }
    }
    Ok(())
}

fn csv_reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}

fn check_header(header: &csv::StringRecord, expected: &[&str], optional: Option<&str>) -> Result<()> {
    let names: Vec<&str> = header.iter().collect();
    let matches = names.len() >= expected.len()
        && names[..expected.len()] == *expected
        && match (names.len() - expected.len(), optional) {
            (0, _) => true,
            (1, Some(extra)) => names[expected.len()] == extra,
            _ => false,
        };
    if matches {
        Ok(())
    } else {
        let mut want = expected.join(",");
        if let Some(extra) = optional {
            want.push_str(&format!("[,{extra}]"));
        }
        Err(Error::Parse {
            line: 1,
            message: format!("expected header `{want}`, found `{}`", names.join(",")),
        })
    }
}

fn parse_count(field: &str, name: &str, line: u64) -> Result<u64> {
    let value: i64 = field.parse().map_err(|_| Error::Parse {
        line,
        message: format!("{name} `{field}` is not an integer"),
    })?;
    u64::try_from(value).map_err(|_| Error::Validation {
        line,
        message: format!("{name} must be non-negative, got {value}"),
    })
}

fn parse_year(field: &str, name: &str, line: u64) -> Result<i32> {
    field.parse().map_err(|_| Error::Parse {
        line,
        message: format!("{name} `{field}` is not an integer year"),
    })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Parses panel CSV with header `journal_id,year,citations,articles[,impact_factor]`.
pub fn parse_panel<R: Read>(source: R) -> Result<Panel> {
    let mut reader = csv_reader(source);
    let mut rows = reader.records();
    let Some(header) = rows.next() else {
        return Err(Error::Parse {
            line: 1,
            message: "missing header".into(),
        });
    };
    let header = header.map_err(csv_error)?;
    check_header(&header, &PANEL_HEADER, Some(IMPACT_COLUMN))?;
    let width = header.len();

    let mut records = Vec::new();
    let mut lines = Vec::new();
    for row in rows {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} columns, found {}", row.len()),
            });
        }
        let reported_impact_factor = match row.get(4) {
            None | Some("") => None,
            Some(text) => Some(text.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("impact_factor `{text}` is not a number"),
            })?),
        };
        let record = JournalYearRecord {
            journal_id: row[0].to_string(),
            year: parse_year(&row[1], "year", line)?,
            annual_citations: parse_count(&row[2], "citations", line)?,
            publications: parse_count(&row[3], "articles", line)?,
            reported_impact_factor,
        };
        validate_record(&record, line)?;
        records.push(record);
        lines.push(line);
    }

    let mut first_seen: BTreeMap<(String, i32), u64> = BTreeMap::new();
    for (record, &line) in records.iter().zip(&lines) {
        if first_seen
            .insert((record.journal_id.clone(), record.year), line)
            .is_some()
        {
            return Err(Error::DuplicateKey {
                line,
                journal_id: record.journal_id.clone(),
                year: record.year,
            });
        }
    }
    Panel::from_records(records)
}

/// Parses per-paper citation CSV with header
/// `journal_id,publication_year,citing_year,citations`.
pub fn parse_paper_citations<R: Read>(source: R) -> Result<Vec<PaperCitationRecord>> {
    let mut reader = csv_reader(source);
    let mut rows = reader.records();
    let Some(header) = rows.next() else {
        return Err(Error::Parse {
            line: 1,
            message: "missing header".into(),
        });
    };
    check_header(&header.map_err(csv_error)?, &PAPER_HEADER, None)?;

    let mut out = Vec::new();
    for row in rows {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != PAPER_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 columns, found {}", row.len()),
            });
        }
        let record = PaperCitationRecord {
            journal_id: row[0].to_string(),
            publication_year: parse_year(&row[1], "publication_year", line)?,
            citing_year: parse_year(&row[2], "citing_year", line)?,
            citations: parse_count(&row[3], "citations", line)?,
        };
        if record.journal_id.is_empty() {
            return Err(Error::Validation {
                line,
                message: "journal_id is empty".into(),
            });
        }
        if record.publication_year > record.citing_year {
            return Err(Error::Validation {
                line,
                message: format!(
                    "publication_year {} is after citing_year {}",
                    record.publication_year, record.citing_year
                ),
            });
        }
        out.push(record);
    }
    Ok(out)
}
