//! The full analysis battery over one panel, written as a bundle of
//! plot-ready TSV tables and JSON fit reports.
//!
//! The per-analysis helpers here are shared with the single-purpose CLI
//! subcommands so that any number in the bundle can be regenerated by one
//! `fit`, `correlate`, `autocorr` or `dist` call with the echoed settings.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::binfit::{
    self, BinnedSeries, BinningConfig, FitModel, PiecewisePowerLawFit, PowerLawFit,
    StretchedLogFit, StretchedLogOptions, Weighting,
};
use crate::correlation::{self, AutoCorrelationEntry, CorrelationResult, YearPairs};
use crate::dataset::{parse_panel, Panel};
use crate::distributions::{
    self, EmpiricalDistribution, ScaledDistribution, TailFit, DEFAULT_PDF_BINS_PER_DECADE,
    DEFAULT_TAIL_XMIN,
};
use crate::error::{Error, Result};
use crate::format::{opt_sig6, sig6};
use crate::indices::{index_table, Index, IndexTable, YearRange};

pub const DEFAULT_SEED: u64 = 20_140_101;
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 200;

/// Per-index lower ends of the power-tail fits, in units of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TailThresholds {
    pub impact: f64,
    pub rate: f64,
    pub rate_windowed: f64,
}

impl Default for TailThresholds {
    fn default() -> Self {
        TailThresholds {
            impact: DEFAULT_TAIL_XMIN,
            rate: DEFAULT_TAIL_XMIN,
            rate_windowed: DEFAULT_TAIL_XMIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub input: PathBuf,
    pub out_dir: PathBuf,
    /// Restricts the analysis to these years.
    pub years: Option<YearRange>,
    /// Window for the mean publication count behind `r'`; defaults to `years`.
    pub window: Option<YearRange>,
    pub binning: BinningConfig,
    pub pdf_bins_per_decade: u32,
    /// `None` searches for the breakpoint.
    pub breakpoint: Option<f64>,
    pub x_min: TailThresholds,
    pub weighted: bool,
    pub seed: u64,
    /// Bootstrap resamples for cross-check standard errors; 0 disables.
    pub bootstrap_resamples: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            input: PathBuf::new(),
            out_dir: PathBuf::from("report"),
            years: None,
            window: None,
            binning: BinningConfig::default(),
            pdf_bins_per_decade: DEFAULT_PDF_BINS_PER_DECADE,
            breakpoint: Some(binfit::DEFAULT_BREAKPOINT),
            x_min: TailThresholds::default(),
            weighted: false,
            seed: DEFAULT_SEED,
            bootstrap_resamples: 0,
        }
    }
}

impl ReportConfig {
    pub fn weighting(&self) -> Weighting {
        if self.weighted {
            Weighting::InverseVariance
        } else {
            Weighting::Unweighted
        }
    }
}

/// Loads a panel and restricts it to `years` when given.
pub fn load_panel(path: &Path, years: Option<YearRange>) -> Result<Panel> {
    let file = fs::File::open(path)?;
    let panel = parse_panel(std::io::BufReader::new(file))?;
    Ok(match years {
        Some(r) => panel.restrict_years(r.first, r.last),
        None => panel,
    })
}

/// Index table over `panel`, with `r'` windowed over `window` or the panel span.
pub fn build_index_table(panel: &Panel, window: Option<YearRange>) -> IndexTable {
    index_table(panel, window, None)
}

/// `(x, y)` scatter of two indices in one year. Stretched-log fits need
/// `x > 1`, so those points are filtered for that model.
pub fn scatter(table: &IndexTable, x: Index, y: Index, year: i32, model: FitModel) -> Vec<(f64, f64)> {
    let (pairs, _) = table.pairs(x, y, year);
    match model {
        FitModel::StretchedLog => pairs.into_iter().filter(|(x, _)| *x > 1.0).collect(),
        _ => pairs,
    }
}

/// Log-binned scatter; `bins_per_decade == 0` keeps every point as its own bin.
pub fn bin_scatter(points: &[(f64, f64)], binning: &BinningConfig) -> Result<BinnedSeries> {
    if binning.bins_per_decade == 0 {
        BinnedSeries::from_scatter(points)
    } else {
        binfit::log_bin(points, binning)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub x: Index,
    pub y: Index,
    pub year: i32,
    pub bins_per_decade: u32,
    pub min_occupancy: usize,
    pub breakpoint: Option<f64>,
    pub weighted: bool,
    pub bootstrap_resamples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelFit {
    Power(PowerLawFit),
    Piecewise(PiecewisePowerLawFit),
    StretchedLog(StretchedLogFit),
}

/// JSON report of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: FitModel,
    pub params: BTreeMap<String, f64>,
    pub ses: BTreeMap<String, f64>,
    pub bootstrap_ses: Option<BTreeMap<String, f64>>,
    pub residual_rms: f64,
    pub n_bins: usize,
    pub n_points: usize,
    pub dropped_points: usize,
    pub config: FitSettings,
    pub fit: ModelFit,
}

fn param_names(model: FitModel) -> &'static [&'static str] {
    match model {
        FitModel::Power => &["a", "xi"],
        FitModel::Piecewise => &["a1", "xi1", "a2", "xi2"],
        FitModel::StretchedLog => &["a", "b", "c"],
    }
}

/// Fits `model` to the binned scatter of `settings.y` against `settings.x`.
pub fn run_fit(table: &IndexTable, model: FitModel, settings: &FitSettings) -> Result<(FitReport, BinnedSeries)> {
    let points = scatter(table, settings.x, settings.y, settings.year, model);
    let binning = BinningConfig {
        bins_per_decade: settings.bins_per_decade,
        min_occupancy: settings.min_occupancy,
    };
    let binned = bin_scatter(&points, &binning)?;
    let weighting = if settings.weighted {
        Weighting::InverseVariance
    } else {
        Weighting::Unweighted
    };
    let (values, ses, residual_rms, fit) = match model {
        FitModel::Power => {
            let f = binfit::fit_power_law(&binned, weighting)?;
            (
                vec![f.amplitude, f.exponent],
                vec![f.amplitude_se, f.exponent_se],
                f.residual_rms,
                ModelFit::Power(f),
            )
        }
        FitModel::Piecewise => {
            let f = binfit::fit_piecewise_power_law(&binned, settings.breakpoint, weighting)?;
            let rms = ((f.low.residual_rms.powi(2) * f.low.n_bins as f64
                + f.high.residual_rms.powi(2) * f.high.n_bins as f64)
                / (f.low.n_bins + f.high.n_bins) as f64)
                .sqrt();
            (
                vec![f.low.amplitude, f.low.exponent, f.high.amplitude, f.high.exponent],
                vec![f.low.amplitude_se, f.low.exponent_se, f.high.amplitude_se, f.high.exponent_se],
                rms,
                ModelFit::Piecewise(f),
            )
        }
        FitModel::StretchedLog => {
            let f = binfit::fit_stretched_log(
                &binned,
                &StretchedLogOptions {
                    weighting,
                    fixed_b: None,
                },
            )?;
            (
                vec![f.a_coeff, f.b_expo, f.c_offset],
                vec![f.a_se, f.b_se, f.c_se],
                f.residual_rms,
                ModelFit::StretchedLog(f),
            )
        }
    };
    let names = param_names(model);
    let named = |v: &[f64]| -> BTreeMap<String, f64> {
        names.iter().map(|n| n.to_string()).zip(v.iter().copied()).collect()
    };
    let bootstrap_ses = if settings.bootstrap_resamples > 0 {
        Some(named(&binfit::bootstrap_standard_errors(
            model,
            &binned,
            settings.breakpoint,
            weighting,
            settings.bootstrap_resamples,
            settings.seed,
        )?))
    } else {
        None
    };
    let report = FitReport {
        model,
        params: named(&values),
        ses: named(&ses),
        bootstrap_ses,
        residual_rms,
        n_bins: binned.len(),
        n_points: points.len(),
        dropped_points: binned.dropped,
        config: settings.clone(),
        fit,
    };
    Ok((report, binned))
}

impl ModelFit {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ModelFit::Power(f) => f.eval(x),
            ModelFit::Piecewise(f) => {
                if x < f.breakpoint {
                    f.low.eval(x)
                } else {
                    f.high.eval(x)
                }
            }
            ModelFit::StretchedLog(f) => f.eval(x),
        }
    }
}

/// Binned data next to the fitted curve, for plotting.
pub fn fit_curve_tsv(binned: &BinnedSeries, fit: &ModelFit) -> String {
    let mut out = String::from("bin_center\tbin_mean\tcount\tsem\tfitted\n");
    for i in 0..binned.len() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            sig6(binned.bin_centers[i]),
            sig6(binned.bin_means[i]),
            binned.bin_counts[i],
            sig6(binned.bin_sems[i]),
            sig6(fit.eval(binned.bin_centers[i]))
        ));
    }
    out
}

pub fn correlation_tsv(rows: &[(String, Option<CorrelationResult>)]) -> String {
    let mut out = String::from("pair\tR\tK\tdropped\n");
    for (pair, r) in rows {
        match r {
            Some(r) => out.push_str(&format!(
                "{pair}\t{}\t{}\t{}\n",
                sig6(r.r_value),
                r.sample_size,
                r.dropped
            )),
            None => out.push_str(&format!("{pair}\tNA\tNA\tNA\n")),
        }
    }
    out
}

pub fn auto_correlation_rows(
    table: &IndexTable,
    index: Index,
    pairs: YearPairs,
) -> Vec<(String, Option<CorrelationResult>)> {
    let years = table.years();
    correlation::auto_correlation_table(table, index, &pairs.resolve(&years))
        .into_iter()
        .map(|AutoCorrelationEntry { years: (a, b), result }| (format!("{a}-{b}"), result))
        .collect()
}

/// Per-year density of one index and its mean-rescaled collapse.
#[derive(Debug, Clone)]
pub struct YearDistribution {
    pub year: i32,
    pub raw: EmpiricalDistribution,
    pub scaled: ScaledDistribution,
}

pub fn year_distributions(
    table: &IndexTable,
    index: Index,
    years: &[i32],
    bins_per_decade: u32,
) -> Result<Vec<YearDistribution>> {
    years
        .iter()
        .map(|&year| {
            let raw = distributions::empirical_pdf(&table.values(index, year), bins_per_decade)?;
            let scaled = distributions::scale_collapse(&raw, format!("{index}({year})"))?;
            Ok(YearDistribution { year, raw, scaled })
        })
        .collect()
}

pub fn distribution_tsv(dists: &[YearDistribution], scaled: bool) -> String {
    let mut out = String::from("year\tbin_lo\tbin_hi\tbin_center\tcount\tdensity");
    if scaled {
        out.push_str("\tscaled_x\tscaled_density");
    }
    out.push('\n');
    for d in dists {
        for i in 0..d.raw.counts.len() {
            let (lo, hi) = d.raw.bin_edges[i];
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}",
                d.year,
                sig6(lo),
                sig6(hi),
                sig6(d.raw.bin_centers[i]),
                d.raw.counts[i],
                sig6(d.raw.density[i])
            ));
            if scaled {
                out.push_str(&format!(
                    "\t{}\t{}",
                    sig6(d.scaled.scaled_x[i]),
                    sig6(d.scaled.scaled_density[i])
                ));
            }
            out.push('\n');
        }
    }
    out
}

pub fn pooled_tsv(pooled: &EmpiricalDistribution) -> String {
    let mut out = String::from("bin_lo\tbin_hi\tscaled_x\tcount\tscaled_density\n");
    for i in 0..pooled.counts.len() {
        let (lo, hi) = pooled.bin_edges[i];
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            sig6(lo),
            sig6(hi),
            sig6(pooled.bin_centers[i]),
            pooled.counts[i],
            sig6(pooled.density[i])
        ));
    }
    out
}

/// Pooled scaled curve of one index over the given years.
pub fn pooled_distribution(
    table: &IndexTable,
    index: Index,
    years: &[i32],
    bins_per_decade: u32,
) -> Result<EmpiricalDistribution> {
    let samples: Vec<Vec<f64>> = years.iter().map(|&y| table.values(index, y)).collect();
    distributions::pooled_scaled_pdf(&samples, bins_per_decade)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseCheck {
    /// Distance of each year's collapsed curve from the pointwise median.
    pub distance_to_median: BTreeMap<i32, f64>,
    pub max_distance: f64,
}

pub fn collapse_check(dists: &[YearDistribution]) -> Result<CollapseCheck> {
    let curves: Vec<ScaledDistribution> = dists.iter().map(|d| d.scaled.clone()).collect();
    let median = distributions::median_curve(&curves)?;
    let mut distance_to_median = BTreeMap::new();
    for d in dists {
        distance_to_median.insert(d.year, distributions::collapse_distance(&d.scaled, &median)?);
    }
    let max_distance = distance_to_median.values().copied().fold(0.0, f64::max);
    Ok(CollapseCheck {
        distance_to_median,
        max_distance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiConsistency {
    pub gamma_impact: f64,
    pub gamma_rate: f64,
    /// `(γ_r - 1) / (γ_I - 1)`.
    pub xi_rate: f64,
    pub gamma_rate_windowed: f64,
    pub xi_rate_windowed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitsBundle {
    pub lognormal_n: TailFit,
    pub power_tail_impact: TailFit,
    pub power_tail_rate: TailFit,
    pub power_tail_rate_windowed: TailFit,
    pub xi_consistency: XiConsistency,
    pub collapse: BTreeMap<Index, CollapseCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelCounts {
    pub records: usize,
    pub journals: usize,
    pub years: Vec<i32>,
    pub journals_per_year: BTreeMap<i32, usize>,
    pub zero_publication_records: usize,
}

impl PanelCounts {
    pub fn of(panel: &Panel) -> Self {
        PanelCounts {
            records: panel.len(),
            journals: panel.journal_ids().len(),
            years: panel.years().to_vec(),
            journals_per_year: panel.journals_per_year(),
            zero_publication_records: panel.zero_publication_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub panel: PanelCounts,
    pub undefined: crate::indices::UndefinedCounts,
    /// Points dropped by binning (`x <= 0`) per table and year.
    pub dropped_points: BTreeMap<String, usize>,
    pub files: Vec<String>,
    pub config: ReportConfig,
}

struct Bundle {
    files: Vec<(String, String)>,
}

impl Bundle {
    fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }
}

fn per_year<T>(
    years: &[i32],
    table: &str,
    mut f: impl FnMut(i32) -> Result<T>,
) -> Result<Vec<(i32, T)>> {
    years
        .iter()
        .map(|&y| f(y).map(|v| (y, v)).map_err(|e| e.in_analysis(format!("{table} year {y}"))))
        .collect()
}

/// Runs every analysis over the panel at `config.input` and writes the
/// bundle to `config.out_dir` atomically: files are staged in a sibling
/// temporary directory that is renamed into place only when all analyses
/// succeed.
pub fn run_report(config: &ReportConfig) -> Result<ReportSummary> {
    let panel = load_panel(&config.input, config.years).map_err(|e| e.in_analysis("load panel"))?;
    let (bundle, summary) = analyse(&panel, config)?;
    commit(&config.out_dir, &bundle)?;
    Ok(summary)
}

fn analyse(panel: &Panel, config: &ReportConfig) -> Result<(Bundle, ReportSummary)> {
    if panel.is_empty() {
        return Err(Error::EmptyData("panel has no records".into()).in_analysis("load panel"));
    }
    let years = panel.years().to_vec();
    let table = build_index_table(panel, config.window.or(config.years));
    let mut bundle = Bundle { files: vec![] };
    let mut dropped = BTreeMap::new();

    let settings = |x: Index, y: Index, year: i32| FitSettings {
        x,
        y,
        year,
        bins_per_decade: config.binning.bins_per_decade,
        min_occupancy: config.binning.min_occupancy,
        breakpoint: config.breakpoint,
        weighted: config.weighted,
        bootstrap_resamples: config.bootstrap_resamples,
        seed: config.seed,
    };

    // I = a n^xi_n
    let t1 = per_year(&years, "table1", |y| {
        run_fit(&table, FitModel::Power, &settings(Index::AnnualCitations, Index::ImpactFactor, y))
    })?;
    let mut tsv = String::from("year\ta\ta_se\txi_n\txi_n_se\tn_bins\tresidual_rms");
    if config.bootstrap_resamples > 0 {
        tsv.push_str("\ta_boot_se\txi_n_boot_se");
    }
    tsv.push('\n');
    for (y, (r, _)) in &t1 {
        tsv.push_str(&format!(
            "{y}\t{}\t{}\t{}\t{}\t{}\t{}",
            sig6(r.params["a"]),
            sig6(r.ses["a"]),
            sig6(r.params["xi"]),
            sig6(r.ses["xi"]),
            r.n_bins,
            sig6(r.residual_rms)
        ));
        if let Some(b) = &r.bootstrap_ses {
            tsv.push_str(&format!("\t{}\t{}", sig6(b["a"]), sig6(b["xi"])));
        }
        tsv.push('\n');
        dropped.insert(format!("table1/{y}"), r.dropped_points);
    }
    bundle.add("table1.tsv", tsv);

    // I = a r^xi_r in two regimes
    let t2 = per_year(&years, "table2", |y| {
        run_fit(&table, FitModel::Piecewise, &settings(Index::CitationRate, Index::ImpactFactor, y))
    })?;
    let mut tsv = String::from(
        "year\tbreakpoint\ta1\ta1_se\txi_r1\txi_r1_se\ta2\ta2_se\txi_r2\txi_r2_se\tn_bins\n",
    );
    for (y, (r, _)) in &t2 {
        let ModelFit::Piecewise(f) = &r.fit else { unreachable!("piecewise model") };
        tsv.push_str(&format!(
            "{y}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            sig6(f.breakpoint),
            sig6(f.low.amplitude),
            sig6(f.low.amplitude_se),
            sig6(f.low.exponent),
            sig6(f.low.exponent_se),
            sig6(f.high.amplitude),
            sig6(f.high.amplitude_se),
            sig6(f.high.exponent),
            sig6(f.high.exponent_se),
            r.n_bins
        ));
        dropped.insert(format!("table2/{y}"), r.dropped_points);
    }
    bundle.add("table2.tsv", tsv);

    // r = exp[c + a (ln n)^b]
    let t3 = per_year(&years, "table3", |y| {
        run_fit(&table, FitModel::StretchedLog, &settings(Index::AnnualCitations, Index::CitationRate, y))
    })?;
    let mut tsv = String::from("year\ta\ta_se\tb\tb_se\tc\tc_se\tn_bins\tresidual_rms\n");
    for (y, (r, _)) in &t3 {
        tsv.push_str(&format!(
            "{y}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            sig6(r.params["a"]),
            sig6(r.ses["a"]),
            sig6(r.params["b"]),
            sig6(r.ses["b"]),
            sig6(r.params["c"]),
            sig6(r.ses["c"]),
            r.n_bins,
            sig6(r.residual_rms)
        ));
        dropped.insert(format!("table3/{y}"), r.dropped_points);
    }
    bundle.add("table3.tsv", tsv);

    // consecutive-year auto-correlations
    let auto_indices = [Index::AnnualCitations, Index::ImpactFactor, Index::CitationRate];
    let columns: Vec<Vec<(String, Option<CorrelationResult>)>> = auto_indices
        .iter()
        .map(|&i| auto_correlation_rows(&table, i, YearPairs::Consecutive))
        .collect();
    let mut tsv = String::from("pair\tR_n\tK_n\tR_I\tK_I\tR_r\tK_r\n");
    for row in 0..columns[0].len() {
        tsv.push_str(&columns[0][row].0);
        for col in &columns {
            let r = col[row].1.as_ref();
            tsv.push_str(&format!(
                "\t{}\t{}",
                opt_sig6(r.map(|r| r.r_value)),
                r.map_or("NA".to_string(), |r| r.sample_size.to_string())
            ));
        }
        tsv.push('\n');
    }
    bundle.add("table4.tsv", tsv);

    let mut tsv = String::from("index\tpair\tR\tK\tdropped\n");
    for &i in &auto_indices {
        for (pair, r) in auto_correlation_rows(&table, i, YearPairs::Extremes) {
            match r {
                Some(r) => tsv.push_str(&format!(
                    "{i}\t{pair}\t{}\t{}\t{}\n",
                    sig6(r.r_value),
                    r.sample_size,
                    r.dropped
                )),
                None => tsv.push_str(&format!("{i}\t{pair}\tNA\tNA\tNA\n")),
            }
        }
    }
    bundle.add("extremes.tsv", tsv);

    // distributions, collapse and tail fits
    let bpd = config.pdf_bins_per_decade;
    let mut collapse = BTreeMap::new();
    let mut pooled = BTreeMap::new();
    for index in Index::ALL {
        let analysis = format!("dist_{index}");
        let dists = year_distributions(&table, index, &years, bpd)
            .map_err(|e| e.in_analysis(analysis.clone()))?;
        bundle.add(&format!("dist_{index}.tsv"), distribution_tsv(&dists, true));
        collapse.insert(index, collapse_check(&dists).map_err(|e| e.in_analysis(analysis.clone()))?);
        let p = pooled_distribution(&table, index, &years, bpd).map_err(|e| e.in_analysis(analysis))?;
        bundle.add(&format!("dist_{index}_pooled.tsv"), pooled_tsv(&p));
        pooled.insert(index, p);
    }
    let lognormal_n = distributions::fit_lognormal(&pooled[&Index::AnnualCitations], None)
        .map_err(|e| e.in_analysis("lognormal fit of pooled scaled n"))?;
    let tail = |index: Index, x_min: f64| {
        distributions::fit_power_tail(&pooled[&index], x_min)
            .map_err(|e| e.in_analysis(format!("power tail of pooled scaled {index}")))
    };
    let power_tail_impact = tail(Index::ImpactFactor, config.x_min.impact)?;
    let power_tail_rate = tail(Index::CitationRate, config.x_min.rate)?;
    let power_tail_rate_windowed = tail(Index::WindowedRate, config.x_min.rate_windowed)?;
    let gamma = |f: &TailFit| f.gamma().expect("power tail");
    let (gi, gr, grp) = (
        gamma(&power_tail_impact),
        gamma(&power_tail_rate),
        gamma(&power_tail_rate_windowed),
    );
    let xi_consistency = XiConsistency {
        gamma_impact: gi,
        gamma_rate: gr,
        xi_rate: distributions::xi_from_tail_exponents(gi, gr)?,
        gamma_rate_windowed: grp,
        xi_rate_windowed: distributions::xi_from_tail_exponents(gi, grp)?,
    };
    let fits = FitsBundle {
        lognormal_n,
        power_tail_impact,
        power_tail_rate,
        power_tail_rate_windowed,
        xi_consistency,
        collapse,
    };
    bundle.add("fits.json", serde_json::to_string_pretty(&fits)? + "\n");

    let mut files: Vec<String> = bundle.files.iter().map(|(n, _)| n.clone()).collect();
    files.push("summary.json".into());
    let summary = ReportSummary {
        panel: PanelCounts::of(panel),
        undefined: table.undefined.clone(),
        dropped_points: dropped,
        files,
        config: config.clone(),
    };
    bundle.add("summary.json", serde_json::to_string_pretty(&summary)? + "\n");
    Ok((bundle, summary))
}

fn commit(out_dir: &Path, bundle: &Bundle) -> Result<()> {
    if out_dir.exists() {
        let previous_report = out_dir.join("summary.json").is_file();
        let empty = out_dir.is_dir() && fs::read_dir(out_dir)?.next().is_none();
        if !(previous_report || empty) {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!(
                    "{} exists and is not a previous report; refusing to replace it",
                    out_dir.display()
                ),
            )));
        }
    }
    let parent = match out_dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let staging = tempfile::Builder::new()
        .prefix(".citescale-report-")
        .tempdir_in(&parent)?;
    for (name, contents) in &bundle.files {
        fs::write(staging.path().join(name), contents)?;
    }
    if out_dir.exists() {
        fs::remove_dir_all(out_dir)?;
    }
    fs::rename(staging.path(), out_dir)?;
    // the directory now lives at out_dir; nothing left to clean up
    let _ = staging.keep();
    Ok(())
}

/// Dry-run coverage summary of a panel file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub panel: PanelCounts,
    pub undefined: crate::indices::UndefinedCounts,
    pub missing_impact_factor: usize,
    pub warnings: Vec<String>,
}

pub fn validate(config: &ReportConfig) -> Result<Diagnostics> {
    let panel = load_panel(&config.input, config.years)?;
    Ok(diagnose(&panel, config.window.or(config.years)))
}

pub fn diagnose(panel: &Panel, window: Option<YearRange>) -> Diagnostics {
    let table = build_index_table(panel, window);
    let mut warnings = Vec::new();
    for r in panel.records().iter().filter(|r| r.publications == 0) {
        warnings.push(format!(
            "{} {}: zero publications, citation rate undefined",
            r.journal_id, r.year
        ));
    }
    if panel.is_empty() {
        warnings.push("panel has no records".into());
    }
    Diagnostics {
        panel: PanelCounts::of(panel),
        missing_impact_factor: panel
            .records()
            .iter()
            .filter(|r| r.reported_impact_factor.is_none())
            .count(),
        undefined: table.undefined,
        warnings,
    }
}
