//! Pearson correlation between index vectors: across indices within one
//! year, and of one index with itself across a pair of years.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indices::{Index, IndexTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r_value: f64,
    /// Number of paired observations `K`.
    pub sample_size: usize,
    /// Journals dropped because one of the two values was absent.
    pub dropped: usize,
    pub pair_description: String,
}

/// Sample correlation coefficient, evaluated with mean-centred sums.
///
/// Either sequence being constant leaves the coefficient undefined (0/0) and
/// is reported as a degenerate sample.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "pearson needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let k = x.len();
    if k < 2 {
        return Err(Error::DegenerateSample(format!(
            "pearson needs at least 2 pairs, got {k}"
        )));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / k as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateSample(
            "correlation is undefined for a constant sequence".into(),
        ));
    }
    let r = sxy / (sxx * syy).sqrt();
    if !r.is_finite() {
        return Err(Error::DegenerateSample("non-finite correlation".into()));
    }
    Ok(CorrelationResult {
        r_value: r.clamp(-1.0, 1.0),
        sample_size: k,
        dropped: 0,
        pair_description: String::new(),
    })
}

fn pearson_pairs(pairs: &[(f64, f64)]) -> Result<CorrelationResult> {
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    pearson(&x, &y)
}

/// Correlation of two indices over the journals that have both in `year`.
pub fn cross_index_correlation(
    table: &IndexTable,
    a: Index,
    b: Index,
    year: i32,
) -> Result<CorrelationResult> {
    let (pairs, dropped) = table.pairs(a, b, year);
    let mut result = pearson_pairs(&pairs)?;
    result.dropped = dropped;
    result.pair_description = format!("{a}({year}) vs {b}({year})");
    Ok(result)
}

/// Correlation of one index with itself between two years, paired by journal id.
pub fn auto_correlation(
    table: &IndexTable,
    index: Index,
    first: i32,
    second: i32,
) -> Result<CorrelationResult> {
    let mut by_journal: BTreeMap<&str, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for row in &table.rows {
        if row.year == first {
            by_journal.entry(&row.journal_id).or_default().0 = row.value(index);
        }
        if row.year == second {
            by_journal.entry(&row.journal_id).or_default().1 = row.value(index);
        }
    }
    let mut pairs = Vec::new();
    let mut dropped = 0;
    for (a, b) in by_journal.values() {
        match (a, b) {
            (Some(a), Some(b)) => pairs.push((*a, *b)),
            _ => dropped += 1,
        }
    }
    let mut result = pearson_pairs(&pairs)?;
    result.dropped = dropped;
    result.pair_description = format!("{index}({first}) vs {index}({second})");
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YearPairs {
    Consecutive,
    /// First against last year.
    Extremes,
    Explicit(i32, i32),
}

impl YearPairs {
    pub fn resolve(self, years: &[i32]) -> Vec<(i32, i32)> {
        match self {
            YearPairs::Consecutive => years.windows(2).map(|w| (w[0], w[1])).collect(),
            YearPairs::Extremes => match (years.first(), years.last()) {
                (Some(&a), Some(&b)) if a != b => vec![(a, b)],
                _ => vec![],
            },
            YearPairs::Explicit(a, b) => vec![(a, b)],
        }
    }
}

impl FromStr for YearPairs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consecutive" => Ok(YearPairs::Consecutive),
            "extremes" => Ok(YearPairs::Extremes),
            other => {
                let (a, b) = other.split_once(':').ok_or_else(|| {
                    Error::Domain(format!(
                        "pairs must be consecutive, extremes or Y1:Y2, got `{other}`"
                    ))
                })?;
                let year = |t: &str| {
                    t.parse::<i32>()
                        .map_err(|_| Error::Domain(format!("bad year `{t}`")))
                };
                Ok(YearPairs::Explicit(year(a)?, year(b)?))
            }
        }
    }
}

impl fmt::Display for YearPairs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            YearPairs::Consecutive => f.write_str("consecutive"),
            YearPairs::Extremes => f.write_str("extremes"),
            YearPairs::Explicit(a, b) => write!(f, "{a}:{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoCorrelationEntry {
    pub years: (i32, i32),
    /// `None` when the pair is a degenerate sample.
    pub result: Option<CorrelationResult>,
}

/// One auto-correlation per year pair, in the order the pairs are given.
pub fn auto_correlation_table(
    table: &IndexTable,
    index: Index,
    pairs: &[(i32, i32)],
) -> Vec<AutoCorrelationEntry> {
    pairs
        .iter()
        .map(|&(a, b)| AutoCorrelationEntry {
            years: (a, b),
            result: auto_correlation(table, index, a, b).ok(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{JournalYearRecord, Panel};
    use crate::indices::index_table;
    use proptest::prelude::*;

    /// Textbook evaluation kept as an oracle.
    fn naive(x: &[f64], y: &[f64]) -> f64 {
        let k = x.len() as f64;
        let xb = x.iter().sum::<f64>() / k;
        let yb = y.iter().sum::<f64>() / k;
        let num: f64 = x.iter().zip(y).map(|(a, b)| (a - xb) * (b - yb)).sum();
        let sx: f64 = x.iter().map(|a| (a - xb).powi(2)).sum();
        let sy: f64 = y.iter().map(|b| (b - yb).powi(2)).sum();
        num / (sx * sy).sqrt()
    }

    #[test]
    fn perfect_and_anti_correlation() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap().r_value, 1.0);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap().r_value, -1.0);
    }

    #[test]
    fn hand_evaluated_example() {
        // numerator 3, denominator sqrt(2 * 42/9)
        let expected = 3.0 / (2.0_f64 * 42.0 / 9.0).sqrt();
        let got = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((got.r_value - expected).abs() < 1e-15);
        assert!((got.r_value - 0.982).abs() < 5e-4);
        assert_eq!(got.sample_size, 3);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0]), Err(Error::Shape(_))));
        assert!(matches!(pearson(&[1.0], &[1.0]), Err(Error::DegenerateSample(_))));
        assert!(matches!(
            pearson(&[2.0, 2.0, 2.0], &[5.0, 5.0, 5.0]),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn large_offsets_do_not_cancel() {
        let x: Vec<f64> = (0..100).map(|i| 1e9 + i as f64).collect();
        let y: Vec<f64> = (0..100).map(|i| 1e9 + 2.0 * i as f64 + (i % 3) as f64).collect();
        let r = pearson(&x, &y).unwrap().r_value;
        let shifted_x: Vec<f64> = x.iter().map(|v| v - 1e9).collect();
        let shifted_y: Vec<f64> = y.iter().map(|v| v - 1e9).collect();
        assert!((r - naive(&shifted_x, &shifted_y)).abs() < 1e-12);
    }

    fn panel() -> Panel {
        let mut records = Vec::new();
        for (j, (n04, n05, i04)) in [(100, 110, 200.0), (300, 280, 600.0), (50, 70, 100.0), (900, 1000, 1800.0)]
            .into_iter()
            .enumerate()
        {
            records.push(JournalYearRecord {
                journal_id: format!("j{j}"),
                year: 2004,
                annual_citations: n04,
                publications: 10,
                reported_impact_factor: Some(i04),
            });
            records.push(JournalYearRecord {
                journal_id: format!("j{j}"),
                year: 2005,
                annual_citations: n05,
                publications: 10 + j as u64,
                reported_impact_factor: (j < 1).then_some(1.0),
            });
        }
        records.push(JournalYearRecord {
            journal_id: "late".into(),
            year: 2005,
            annual_citations: 5,
            publications: 1,
            reported_impact_factor: None,
        });
        Panel::from_records(records).unwrap()
    }

    #[test]
    fn cross_index_exact_linear_relation() {
        let table = index_table(&panel(), None, None);
        let r = cross_index_correlation(&table, Index::AnnualCitations, Index::ImpactFactor, 2004)
            .unwrap();
        assert!((r.r_value - 1.0).abs() < 1e-15);
        assert_eq!((r.sample_size, r.dropped), (4, 0));
        assert_eq!(r.pair_description, "n(2004) vs I(2004)");
    }

    #[test]
    fn cross_index_with_one_complete_pair_is_degenerate() {
        let table = index_table(&panel(), None, None);
        assert!(matches!(
            cross_index_correlation(&table, Index::AnnualCitations, Index::ImpactFactor, 2005),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn auto_correlation_pairs_by_journal() {
        let table = index_table(&panel(), None, None);
        let r = auto_correlation(&table, Index::AnnualCitations, 2004, 2005).unwrap();
        let expected = naive(&[100.0, 300.0, 50.0, 900.0], &[110.0, 280.0, 70.0, 1000.0]);
        assert!((r.r_value - expected).abs() < 1e-14);
        assert_eq!((r.sample_size, r.dropped), (4, 1));
        let same = auto_correlation(&table, Index::CitationRate, 2004, 2004).unwrap();
        assert_eq!(same.r_value, 1.0);
    }

    #[test]
    fn year_pairs_resolution() {
        let years = (2004..=2013).collect::<Vec<_>>();
        assert_eq!(YearPairs::Consecutive.resolve(&years).len(), 9);
        assert_eq!(YearPairs::Extremes.resolve(&years), vec![(2004, 2013)]);
        assert_eq!("2004:2006".parse::<YearPairs>().unwrap(), YearPairs::Explicit(2004, 2006));
        assert!("2004".parse::<YearPairs>().is_err());
    }

    #[test]
    fn table_marks_degenerate_pairs_absent() {
        let table = index_table(&panel(), None, None);
        let entries = auto_correlation_table(&table, Index::ImpactFactor, &[(2004, 2005), (2004, 2004)]);
        assert_eq!(entries.len(), 2);
        assert!(entries[0].result.is_none());
        assert!(entries[1].result.is_some());
    }

    fn vectors() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..200).prop_flat_map(|k| {
            (
                proptest::collection::vec(-1e3..1e3f64, k),
                proptest::collection::vec(-1e3..1e3f64, k),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_naive_oracle_and_is_bounded((x, y) in vectors()) {
            if let Ok(r) = pearson(&x, &y) {
                prop_assert!((r.r_value - naive(&x, &y)).abs() < 1e-12);
                prop_assert!(r.r_value.abs() <= 1.0 + 1e-12);
                let back = pearson(&y, &x).unwrap();
                prop_assert_eq!(back.r_value, r.r_value);
            }
        }

        #[test]
        fn affine_invariance(
            (x, y) in vectors(),
            a in prop_oneof![-10.0..-0.1f64, 0.1..10.0f64],
            c in prop_oneof![-10.0..-0.1f64, 0.1..10.0f64],
            b in -100.0..100.0f64, d in -100.0..100.0f64,
        ) {
            if let Ok(r) = pearson(&x, &y) {
                let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                let ys: Vec<f64> = y.iter().map(|v| c * v + d).collect();
                let t = pearson(&xs, &ys).unwrap();
                prop_assert!((t.r_value - (a * c).signum() * r.r_value).abs() < 1e-12);
            }
        }

        #[test]
        fn self_correlation_is_one(x in proptest::collection::vec(-1e5..1e5f64, 2..100)) {
            if let Ok(r) = pearson(&x, &x) {
                prop_assert!((r.r_value - 1.0).abs() < 1e-12);
            }
        }
    }
}
