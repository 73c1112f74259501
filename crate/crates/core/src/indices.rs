//! The four per-journal, per-year citation measures: impact factor `I`,
//! annual citations `n`, citation rate `r = n / N` and the windowed rate
//! `r' = n / <N>`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Panel, PaperCitationRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Index {
    #[serde(rename = "n")]
    AnnualCitations,
    #[serde(rename = "I")]
    ImpactFactor,
    #[serde(rename = "r")]
    CitationRate,
    #[serde(rename = "rprime")]
    WindowedRate,
}

impl Index {
    pub const ALL: [Index; 4] = [
        Index::AnnualCitations,
        Index::ImpactFactor,
        Index::CitationRate,
        Index::WindowedRate,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Index::AnnualCitations => "n",
            Index::ImpactFactor => "I",
            Index::CitationRate => "r",
            Index::WindowedRate => "rprime",
        }
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Index {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(Index::AnnualCitations),
            "I" => Ok(Index::ImpactFactor),
            "r" => Ok(Index::CitationRate),
            "rprime" | "r'" => Ok(Index::WindowedRate),
            other => Err(Error::Domain(format!(
                "unknown index `{other}` (expected n, I, r or rprime)"
            ))),
        }
    }
}

/// Inclusive range of years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub first: i32,
    pub last: i32,
}

impl YearRange {
    pub fn new(first: i32, last: i32) -> Result<Self> {
        if first > last {
            return Err(Error::Domain(format!("empty year range {first}..{last}")));
        }
        Ok(YearRange { first, last })
    }

    pub fn single(year: i32) -> Self {
        YearRange {
            first: year,
            last: year,
        }
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.first..=self.last).contains(&year)
    }

    /// The full span of the panel's years, if any.
    pub fn of_panel(panel: &Panel) -> Option<Self> {
        Some(YearRange {
            first: *panel.years().first()?,
            last: *panel.years().last()?,
        })
    }
}

impl FromStr for YearRange {
    type Err = Error;

    /// Accepts `Y`, `Y1:Y2` or `Y1..Y2`.
    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim()
                .parse::<i32>()
                .map_err(|_| Error::Domain(format!("bad year `{t}` in range `{s}`")))
        };
        match s.split_once("..").or_else(|| s.split_once(':')) {
            Some((a, b)) => YearRange::new(parse(a)?, parse(b)?),
            None => Ok(YearRange::single(parse(s)?)),
        }
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.first, self.last)
    }
}

/// Inputs of the two-year impact factor for year `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactWindow {
    /// Year-`T` citations to papers published in `T-1`.
    pub citations_y1: u64,
    /// Year-`T` citations to papers published in `T-2`.
    pub citations_y2: u64,
    pub articles_y1: u64,
    pub articles_y2: u64,
}

pub fn impact_factor(window: &ImpactWindow) -> Result<f64> {
    let articles = window.articles_y1 + window.articles_y2;
    if articles == 0 {
        return Err(Error::UndefinedIndex(
            "impact factor needs articles in the two preceding years".into(),
        ));
    }
    Ok((window.citations_y1 + window.citations_y2) as f64 / articles as f64)
}

/// Total citations received in `year` by the journal's papers of any earlier
/// or equal publication year.
pub fn aggregate_annual_citations(
    records: &[PaperCitationRecord],
    journal_id: &str,
    year: i32,
) -> u64 {
    records
        .iter()
        .filter(|r| {
            r.journal_id == journal_id && r.citing_year == year && r.publication_year <= year
        })
        .map(|r| r.citations)
        .sum()
}

pub fn citation_rate(citations: u64, publications: u64) -> Result<f64> {
    if publications == 0 {
        return Err(Error::UndefinedIndex(
            "citation rate is undefined for a year without publications".into(),
        ));
    }
    Ok(citations as f64 / publications as f64)
}

/// Mean publications of a journal over the years it appears in within `window`.
pub fn mean_publications(panel: &Panel, journal_id: &str, window: YearRange) -> Result<f64> {
    let counts: Vec<f64> = panel
        .journal(journal_id)
        .iter()
        .filter(|r| window.contains(r.year))
        .map(|r| r.publications as f64)
        .collect();
    if counts.is_empty() {
        return Err(Error::UndefinedIndex(format!(
            "journal `{journal_id}` has no records in {window}"
        )));
    }
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    if mean == 0.0 {
        return Err(Error::UndefinedIndex(format!(
            "journal `{journal_id}` published nothing in {window}"
        )));
    }
    Ok(mean)
}

/// `n(T) / <N>` with `<N>` averaged over the journal's years inside `window`.
pub fn citation_rate_windowed(
    panel: &Panel,
    journal_id: &str,
    year: i32,
    window: YearRange,
) -> Result<f64> {
    let record = panel.get(journal_id, year).ok_or_else(|| {
        Error::UndefinedIndex(format!("journal `{journal_id}` has no record for {year}"))
    })?;
    Ok(record.annual_citations as f64 / mean_publications(panel, journal_id, window)?)
}

/// Year-`T` impact window assembled from per-paper citations and the panel's
/// publication counts. `None` when either preceding year is missing from the panel.
pub fn impact_window(
    panel: &Panel,
    papers: &[PaperCitationRecord],
    journal_id: &str,
    year: i32,
) -> Option<ImpactWindow> {
    let articles_y1 = panel.get(journal_id, year - 1)?.publications;
    let articles_y2 = panel.get(journal_id, year - 2)?.publications;
    let cited = |published: i32| -> u64 {
        papers
            .iter()
            .filter(|p| {
                p.journal_id == journal_id
                    && p.citing_year == year
                    && p.publication_year == published
            })
            .map(|p| p.citations)
            .sum()
    };
    Some(ImpactWindow {
        citations_y1: cited(year - 1),
        citations_y2: cited(year - 2),
        articles_y1,
        articles_y2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub journal_id: String,
    pub year: i32,
    pub n: u64,
    /// Reported impact factor, or the recomputed one when no report exists.
    pub impact: Option<f64>,
    /// Impact factor recomputed from per-paper window data, when available.
    pub impact_recomputed: Option<f64>,
    pub rate: Option<f64>,
    pub rate_windowed: Option<f64>,
}

impl IndexRow {
    pub fn value(&self, index: Index) -> Option<f64> {
        match index {
            Index::AnnualCitations => Some(self.n as f64),
            Index::ImpactFactor => self.impact,
            Index::CitationRate => self.rate,
            Index::WindowedRate => self.rate_windowed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UndefinedCounts {
    pub impact: usize,
    pub rate: usize,
    pub rate_windowed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexTable {
    pub window: Option<YearRange>,
    pub rows: Vec<IndexRow>,
    pub undefined: UndefinedCounts,
}

impl IndexTable {
    pub fn year_rows(&self, year: i32) -> impl Iterator<Item = &IndexRow> {
        self.rows.iter().filter(move |r| r.year == year)
    }

    pub fn years(&self) -> Vec<i32> {
        let mut years: Vec<i32> = self.rows.iter().map(|r| r.year).collect();
        years.sort_unstable();
        years.dedup();
        years
    }

    /// Values of `a` and `b` for journals with both defined in `year`, plus
    /// the number of journals dropped for missing one of them.
    pub fn pairs(&self, a: Index, b: Index, year: i32) -> (Vec<(f64, f64)>, usize) {
        let mut dropped = 0;
        let mut out = Vec::new();
        for row in self.year_rows(year) {
            match (row.value(a), row.value(b)) {
                (Some(x), Some(y)) => out.push((x, y)),
                _ => dropped += 1,
            }
        }
        (out, dropped)
    }

    pub fn values(&self, index: Index, year: i32) -> Vec<f64> {
        self.year_rows(year).filter_map(|r| r.value(index)).collect()
    }

    /// TSV `journal_id, year, n, impact, rate, rate_windowed`; absent values are `NA`.
    pub fn to_tsv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
        let mut out = String::from("journal_id\tyear\tn\timpact\trate\trate_windowed\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                r.journal_id,
                r.year,
                r.n,
                opt(r.impact),
                opt(r.rate),
                opt(r.rate_windowed)
            ));
        }
        out
    }
}

/// One row per journal-year. `window` defaults to the panel's full span;
/// `papers` enables impact-factor recomputation.
pub fn index_table(
    panel: &Panel,
    window: Option<YearRange>,
    papers: Option<&[PaperCitationRecord]>,
) -> IndexTable {
    let window = window.or_else(|| YearRange::of_panel(panel));
    let mut undefined = UndefinedCounts::default();
    let rows = panel
        .records()
        .iter()
        .map(|rec| {
            let impact_recomputed = papers
                .and_then(|p| impact_window(panel, p, &rec.journal_id, rec.year))
                .and_then(|w| impact_factor(&w).ok());
            let impact = rec.reported_impact_factor.or(impact_recomputed);
            let rate = citation_rate(rec.annual_citations, rec.publications).ok();
            let rate_windowed = window
                .and_then(|w| citation_rate_windowed(panel, &rec.journal_id, rec.year, w).ok());
            undefined.impact += usize::from(impact.is_none());
            undefined.rate += usize::from(rate.is_none());
            undefined.rate_windowed += usize::from(rate_windowed.is_none());
            IndexRow {
                journal_id: rec.journal_id.clone(),
                year: rec.year,
                n: rec.annual_citations,
                impact,
                impact_recomputed,
                rate,
                rate_windowed,
            }
        })
        .collect();
    IndexTable {
        window,
        rows,
        undefined,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_panel, JournalYearRecord};
    use proptest::prelude::*;

    fn window(c1: u64, c2: u64, a1: u64, a2: u64) -> ImpactWindow {
        ImpactWindow {
            citations_y1: c1,
            citations_y2: c2,
            articles_y1: a1,
            articles_y2: a2,
        }
    }

    #[test]
    fn impact_factor_examples() {
        assert_eq!(impact_factor(&window(150, 100, 60, 40)).unwrap(), 2.5);
        assert_eq!(impact_factor(&window(0, 0, 10, 10)).unwrap(), 0.0);
        assert!(matches!(
            impact_factor(&window(5, 5, 0, 0)),
            Err(Error::UndefinedIndex(_))
        ));
    }

    fn paper(t: i32, cy: i32, c: u64) -> PaperCitationRecord {
        PaperCitationRecord {
            journal_id: "j".into(),
            publication_year: t,
            citing_year: cy,
            citations: c,
        }
    }

    #[test]
    fn annual_citations_sum_over_citing_year() {
        let recs = [paper(2000, 2004, 3), paper(2003, 2004, 7)];
        assert_eq!(aggregate_annual_citations(&recs, "j", 2004), 10);
        assert_eq!(aggregate_annual_citations(&recs, "j", 2007), 0);
        let recs = [paper(2000, 2004, 3), paper(2003, 2005, 7), paper(2005, 2005, 1)];
        assert_eq!(aggregate_annual_citations(&recs, "j", 2005), 8);
        assert_eq!(aggregate_annual_citations(&recs, "other", 2005), 0);
    }

    #[test]
    fn citation_rate_examples() {
        assert_eq!(citation_rate(500, 100).unwrap(), 5.0);
        assert_eq!(citation_rate(0, 50).unwrap(), 0.0);
        assert!(matches!(citation_rate(500, 0), Err(Error::UndefinedIndex(_))));
    }

    fn rec(id: &str, year: i32, n: u64, pubs: u64) -> JournalYearRecord {
        JournalYearRecord {
            journal_id: id.into(),
            year,
            annual_citations: n,
            publications: pubs,
            reported_impact_factor: None,
        }
    }

    #[test]
    fn windowed_rate_examples() {
        let mut records: Vec<_> = (2004..=2013).map(|y| rec("j", y, 300, 100)).collect();
        records.push(rec("k", 2004, 0, 50));
        records.push(rec("k", 2005, 200, 150));
        records.push(rec("z", 2004, 10, 0));
        records.push(rec("z", 2005, 10, 0));
        let panel = Panel::from_records(records).unwrap();
        let decade = YearRange::new(2004, 2013).unwrap();
        assert_eq!(citation_rate_windowed(&panel, "j", 2013, decade).unwrap(), 3.0);
        assert_eq!(citation_rate_windowed(&panel, "k", 2005, decade).unwrap(), 2.0);
        assert!(matches!(
            citation_rate_windowed(&panel, "z", 2005, decade),
            Err(Error::UndefinedIndex(_))
        ));
        assert!(citation_rate_windowed(&panel, "k", 2005, YearRange::single(2010)).is_err());
    }

    #[test]
    fn index_table_rows() {
        let text = "journal_id,year,citations,articles,impact_factor\na,2004,500,100,2.0\nb,2004,40,0,\n";
        let panel = parse_panel(text.as_bytes()).unwrap();
        let table = index_table(&panel, None, None);
        let a = &table.rows[0];
        assert_eq!((a.n, a.impact, a.rate), (500, Some(2.0), Some(5.0)));
        assert_eq!(a.rate_windowed, Some(5.0));
        let b = &table.rows[1];
        assert_eq!(b.rate, None);
        assert_eq!(b.rate_windowed, None);
        assert_eq!(b.impact, None);
        assert_eq!(table.undefined.rate, 1);
        assert_eq!(table.undefined.impact, 1);
        assert!(table.to_tsv().contains("b\t2004\t40\tNA\tNA\tNA\n"));
    }

    #[test]
    fn index_table_counts_rows() {
        let records = ["a", "b", "c"]
            .iter()
            .flat_map(|id| (2004..2014).map(move |y| rec(id, y, 10, 5)))
            .collect();
        let panel = Panel::from_records(records).unwrap();
        assert_eq!(index_table(&panel, None, None).rows.len(), 30);
    }

    #[test]
    fn reported_impact_wins_and_recomputed_is_kept() {
        let mut records = vec![rec("j", 2002, 0, 60), rec("j", 2003, 0, 40)];
        let mut reported = rec("j", 2004, 400, 50);
        reported.reported_impact_factor = Some(9.0);
        records.push(reported);
        records.push(rec("j", 2005, 400, 50));
        let panel = Panel::from_records(records).unwrap();
        let papers = vec![paper(2003, 2004, 150), paper(2002, 2004, 100), paper(2001, 2004, 999)];
        let table = index_table(&panel, None, Some(&papers));
        let row = table.rows.iter().find(|r| r.year == 2004).unwrap();
        assert_eq!(row.impact, Some(9.0));
        assert_eq!(row.impact_recomputed, Some(2.5));
        // no report for 2005; recomputed from the 2004/2003 window with no citations
        let row = table.rows.iter().find(|r| r.year == 2005).unwrap();
        assert_eq!(row.impact, Some(0.0));
    }

    #[test]
    fn year_range_parsing() {
        assert_eq!(
            "2004:2013".parse::<YearRange>().unwrap(),
            YearRange::new(2004, 2013).unwrap()
        );
        assert_eq!(
            "2004..2006".parse::<YearRange>().unwrap(),
            YearRange::new(2004, 2006).unwrap()
        );
        assert_eq!("2004".parse::<YearRange>().unwrap(), YearRange::single(2004));
        assert!("2010:2004".parse::<YearRange>().is_err());
    }

    proptest! {
        #[test]
        fn rate_times_publications_recovers_citations(n in 0u64..10_000_000, pubs in 1u64..100_000) {
            let back = citation_rate(n, pubs).unwrap() * pubs as f64;
            prop_assert!((back - n as f64).abs() <= n as f64 * 2.0 * f64::EPSILON);
        }

        #[test]
        fn impact_factor_is_scale_invariant(
            c1 in 0u64..100_000, c2 in 0u64..100_000,
            a1 in 0u64..10_000, a2 in 1u64..10_000, k in 1u64..1000,
        ) {
            let base = impact_factor(&window(c1, c2, a1, a2)).unwrap();
            let scaled = impact_factor(&window(k * c1, k * c2, k * a1, k * a2)).unwrap();
            prop_assert!((base - scaled).abs() <= base * 4.0 * f64::EPSILON);
        }

        #[test]
        fn one_year_window_matches_plain_rate(
            ns in proptest::collection::vec((0u64..100_000, 1u64..1000), 1..8),
        ) {
            let records: Vec<_> = ns.iter().enumerate()
                .map(|(i, &(n, pubs))| rec("j", 2000 + i as i32, n, pubs))
                .collect();
            let panel = Panel::from_records(records).unwrap();
            for (i, &(n, pubs)) in ns.iter().enumerate() {
                let y = 2000 + i as i32;
                let windowed = citation_rate_windowed(&panel, "j", y, YearRange::single(y)).unwrap();
                prop_assert_eq!(windowed, citation_rate(n, pubs).unwrap());
            }
        }

        #[test]
        fn annual_citations_additive(
            split in 0usize..20,
            cites in proptest::collection::vec((1990i32..2010, 0u64..500), 0..20),
        ) {
            let recs: Vec<_> = cites.iter().map(|&(t, c)| paper(t, 2005.max(t), c)).collect();
            let split = split.min(recs.len());
            let (lo, hi) = recs.split_at(split);
            prop_assert_eq!(
                aggregate_annual_citations(&recs, "j", 2005),
                aggregate_annual_citations(lo, "j", 2005) + aggregate_annual_citations(hi, "j", 2005)
            );
        }
    }
}
