//! Logarithmic binning of scatter data and the three fitted forms relating
//! the indices: a power law, a two-regime piecewise power law and the
//! stretched-log form `ln y = c + a (ln x)^b`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{self, LineFit, Residuals};
use crate::rng::SeededRng;

pub const DEFAULT_BINS_PER_DECADE: u32 = 10;
pub const DEFAULT_MIN_OCCUPANCY: usize = 3;
pub const DEFAULT_BREAKPOINT: f64 = 50.0;
/// Starting exponents of the stretched-log multi-start.
pub const STRETCH_STARTS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

// Points sitting on a bin edge up to rounding belong to the upper bin.
const EDGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningConfig {
    pub bins_per_decade: u32,
    /// Bins holding fewer points are merged into their neighbours.
    pub min_occupancy: usize,
}

impl Default for BinningConfig {
    fn default() -> Self {
        BinningConfig {
            bins_per_decade: DEFAULT_BINS_PER_DECADE,
            min_occupancy: DEFAULT_MIN_OCCUPANCY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedSeries {
    /// Geometric mean of the abscissae falling in each bin.
    pub bin_centers: Vec<f64>,
    pub bin_means: Vec<f64>,
    pub bin_counts: Vec<usize>,
    /// Standard error of the mean of `y`; zero for single-point bins.
    pub bin_sems: Vec<f64>,
    pub bin_edges: Vec<(f64, f64)>,
    /// Input points discarded for `x <= 0` or non-finite values.
    pub dropped: usize,
}

impl BinnedSeries {
    pub fn len(&self) -> usize {
        self.bin_centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_centers.is_empty()
    }

    /// Unbinned mode: every distinct abscissa is its own entry.
    pub fn from_scatter(points: &[(f64, f64)]) -> Result<Self> {
        let (mut kept, dropped) = retain_positive(points);
        if kept.is_empty() {
            return Err(Error::EmptyData("no points with x > 0".into()));
        }
        kept.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut groups: Vec<Vec<(f64, f64)>> = Vec::new();
        for p in kept {
            match groups.last_mut() {
                Some(g) if g[0].0 == p.0 => g.push(p),
                _ => groups.push(vec![p]),
            }
        }
        let mut series = BinnedSeries::empty(dropped);
        for g in groups {
            let x = g[0].0;
            series.push_group(&g, (x, x));
        }
        Ok(series)
    }

    fn empty(dropped: usize) -> Self {
        BinnedSeries {
            bin_centers: vec![],
            bin_means: vec![],
            bin_counts: vec![],
            bin_sems: vec![],
            bin_edges: vec![],
            dropped,
        }
    }

    fn push_group(&mut self, points: &[(f64, f64)], edges: (f64, f64)) {
        let k = points.len() as f64;
        let center = (points.iter().map(|p| p.0.ln()).sum::<f64>() / k).exp();
        let mean = points.iter().map(|p| p.1).sum::<f64>() / k;
        let sem = if points.len() > 1 {
            let var = points.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            0.0
        };
        self.bin_centers.push(center);
        self.bin_means.push(mean);
        self.bin_counts.push(points.len());
        self.bin_sems.push(sem);
        self.bin_edges.push(edges);
    }

    /// Bins whose centre satisfies `keep`.
    pub fn select(&self, keep: impl Fn(f64) -> bool) -> BinnedSeries {
        let mut out = BinnedSeries::empty(0);
        for i in 0..self.len() {
            if keep(self.bin_centers[i]) {
                out.bin_centers.push(self.bin_centers[i]);
                out.bin_means.push(self.bin_means[i]);
                out.bin_counts.push(self.bin_counts[i]);
                out.bin_sems.push(self.bin_sems[i]);
                out.bin_edges.push(self.bin_edges[i]);
            }
        }
        out
    }

    fn take(&self, indices: &[usize]) -> BinnedSeries {
        let mut out = BinnedSeries::empty(0);
        for &i in indices {
            out.bin_centers.push(self.bin_centers[i]);
            out.bin_means.push(self.bin_means[i]);
            out.bin_counts.push(self.bin_counts[i]);
            out.bin_sems.push(self.bin_sems[i]);
            out.bin_edges.push(self.bin_edges[i]);
        }
        out
    }

    /// Log-space weights for the chosen weighting. Inverse-variance weights
    /// use the delta-method variance `(sem / mean)^2`; bins without a usable
    /// SEM borrow the smallest positive one.
    pub fn log_weights(&self, weighting: Weighting) -> Option<Vec<f64>> {
        match weighting {
            Weighting::Unweighted => None,
            Weighting::InverseVariance => {
                let rel: Vec<f64> = self
                    .bin_sems
                    .iter()
                    .zip(&self.bin_means)
                    .map(|(s, m)| (s / m).abs())
                    .collect();
                let floor = rel
                    .iter()
                    .copied()
                    .filter(|r| *r > 0.0 && r.is_finite())
                    .fold(f64::INFINITY, f64::min);
                if !floor.is_finite() {
                    return None;
                }
                Some(
                    rel.iter()
                        .map(|&r| {
                            let r = if r > 0.0 && r.is_finite() { r } else { floor };
                            1.0 / (r * r)
                        })
                        .collect(),
                )
            }
        }
    }
}

fn retain_positive(points: &[(f64, f64)]) -> (Vec<(f64, f64)>, usize) {
    let kept: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(x, y)| *x > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    let dropped = points.len() - kept.len();
    (kept, dropped)
}

/// Geometric bins anchored at the smallest abscissa. Consecutive non-empty
/// bins are merged until each holds `min_occupancy` points; an underfull
/// remainder at the top joins the last full bin.
pub fn log_bin(points: &[(f64, f64)], config: &BinningConfig) -> Result<BinnedSeries> {
    if config.bins_per_decade == 0 {
        return Err(Error::Domain("bins_per_decade must be positive".into()));
    }
    let (kept, dropped) = retain_positive(points);
    if kept.is_empty() {
        return Err(Error::EmptyData("no points with x > 0".into()));
    }
    let origin = kept.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).log10();
    let per_decade = config.bins_per_decade as f64;
    let bin_of = |x: f64| ((x.log10() - origin) * per_decade + EDGE_SLACK).floor().max(0.0) as usize;

    let mut raw: std::collections::BTreeMap<usize, Vec<(f64, f64)>> = Default::default();
    for p in kept {
        raw.entry(bin_of(p.0)).or_default().push(p);
    }

    let min_occupancy = config.min_occupancy.max(1);
    let mut groups: Vec<(usize, usize, Vec<(f64, f64)>)> = Vec::new();
    let mut open: Option<(usize, usize, Vec<(f64, f64)>)> = None;
    for (k, pts) in raw {
        let (first, _, mut acc) = open.take().unwrap_or((k, k, Vec::new()));
        acc.extend(pts);
        if acc.len() >= min_occupancy {
            groups.push((first, k, acc));
        } else {
            open = Some((first, k, acc));
        }
    }
    if let Some((first, last, acc)) = open {
        match groups.last_mut() {
            Some(prev) => {
                prev.1 = last;
                prev.2.extend(acc);
            }
            None => groups.push((first, last, acc)),
        }
    }

    let edge = |k: usize| 10f64.powf(origin + k as f64 / per_decade);
    let mut series = BinnedSeries::empty(dropped);
    for (first, last, pts) in groups {
        series.push_group(&pts, (edge(first), edge(last + 1)));
    }
    Ok(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Unweighted,
    InverseVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub amplitude: f64,
    pub exponent: f64,
    pub amplitude_se: f64,
    pub exponent_se: f64,
    /// RMS residual of `ln y` about the fitted line.
    pub residual_rms: f64,
    /// Weighted sum of squared log residuals.
    pub ssr: f64,
    pub n_bins: usize,
}

impl PowerLawFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * x.powf(self.exponent)
    }

    fn from_line(line: &LineFit) -> Self {
        let amplitude = line.intercept.exp();
        PowerLawFit {
            amplitude,
            exponent: line.slope,
            amplitude_se: amplitude * line.intercept_se,
            exponent_se: line.slope_se,
            residual_rms: line.residual_rms,
            ssr: line.ssr,
            n_bins: line.n,
        }
    }
}

fn positive_logs(binned: &BinnedSeries) -> Result<(Vec<f64>, Vec<f64>)> {
    if let Some(m) = binned.bin_means.iter().find(|m| !(**m > 0.0)) {
        return Err(Error::Domain(format!(
            "bin mean {m} is not positive; its logarithm is undefined"
        )));
    }
    Ok((
        binned.bin_centers.iter().map(|x| x.ln()).collect(),
        binned.bin_means.iter().map(|y| y.ln()).collect(),
    ))
}

/// Straight-line fit of `ln(mean)` against `ln(center)`.
pub fn fit_power_law(binned: &BinnedSeries, weighting: Weighting) -> Result<PowerLawFit> {
    if binned.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "power-law fit needs at least 3 bins, got {}",
            binned.len()
        )));
    }
    let (lx, ly) = positive_logs(binned)?;
    let weights = binned.log_weights(weighting);
    let line = lsq::fit_line(&lx, &ly, weights.as_deref())?;
    Ok(PowerLawFit::from_line(&line))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePowerLawFit {
    /// Bins with centre below the breakpoint.
    pub low: PowerLawFit,
    pub high: PowerLawFit,
    pub breakpoint: f64,
    /// Whether the breakpoint came from the grid search.
    pub searched: bool,
}

fn split_fit(
    binned: &BinnedSeries,
    breakpoint: f64,
    weighting: Weighting,
) -> Result<(PowerLawFit, PowerLawFit)> {
    let low = binned.select(|x| x < breakpoint);
    let high = binned.select(|x| x >= breakpoint);
    if low.len() < 3 || high.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "breakpoint {breakpoint} leaves {} bins below and {} above; need 3 on each side",
            low.len(),
            high.len()
        )));
    }
    Ok((fit_power_law(&low, weighting)?, fit_power_law(&high, weighting)?))
}

/// Independent power laws below and above a breakpoint. Without a supplied
/// breakpoint every interior bin edge leaving 3 bins per side is tried and the
/// smallest total squared log residual wins (lowest edge on ties).
pub fn fit_piecewise_power_law(
    binned: &BinnedSeries,
    breakpoint: Option<f64>,
    weighting: Weighting,
) -> Result<PiecewisePowerLawFit> {
    if let Some(bp) = breakpoint {
        if !(bp > 0.0 && bp.is_finite()) {
            return Err(Error::Domain(format!("breakpoint must be positive, got {bp}")));
        }
        let (low, high) = split_fit(binned, bp, weighting)?;
        return Ok(PiecewisePowerLawFit {
            low,
            high,
            breakpoint: bp,
            searched: false,
        });
    }
    if binned.len() < 6 {
        return Err(Error::InsufficientData(format!(
            "breakpoint search needs at least 6 bins, got {}",
            binned.len()
        )));
    }
    let mut best: Option<PiecewisePowerLawFit> = None;
    for i in 3..=binned.len() - 3 {
        let candidate = binned.bin_edges[i].0;
        let Ok((low, high)) = split_fit(binned, candidate, weighting) else {
            continue;
        };
        let total = low.ssr + high.ssr;
        if best.is_none_or(|b| total < b.low.ssr + b.high.ssr) {
            best = Some(PiecewisePowerLawFit {
                low,
                high,
                breakpoint: candidate,
                searched: true,
            });
        }
    }
    best.ok_or_else(|| Error::InsufficientData("no admissible breakpoint".into()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    /// Objective at the start and after each accepted step of the winning start.
    pub objective_trace: Vec<f64>,
    pub used_simplex: bool,
    /// Starting exponent of the winning multi-start.
    pub start_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StretchedLogFit {
    pub a_coeff: f64,
    pub b_expo: f64,
    pub c_offset: f64,
    pub a_se: f64,
    pub b_se: f64,
    pub c_se: f64,
    pub residual_rms: f64,
    pub ssr: f64,
    pub n_bins: usize,
    pub diagnostics: FitDiagnostics,
}

impl StretchedLogFit {
    pub fn eval(&self, x: f64) -> f64 {
        (self.c_offset + self.a_coeff * x.ln().powf(self.b_expo)).exp()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StretchedLogOptions {
    pub weighting: Weighting,
    /// Holds the exponent fixed and fits `(a, c)` only.
    pub fixed_b: Option<f64>,
}

struct StretchedLog<'a> {
    log_x: &'a [f64],
    log_y: &'a [f64],
    sqrt_w: Vec<f64>,
    fixed_b: Option<f64>,
}

impl StretchedLog<'_> {
    /// `(a, b, c)` from the free parameter vector.
    fn unpack(&self, p: &[f64]) -> (f64, f64, f64) {
        match self.fixed_b {
            Some(b) => (p[0], b, p[1]),
            None => (p[0], p[1], p[2]),
        }
    }
}

impl Residuals for StretchedLog<'_> {
    fn n_params(&self) -> usize {
        if self.fixed_b.is_some() { 2 } else { 3 }
    }

    fn n_residuals(&self) -> usize {
        self.log_x.len()
    }

    fn residuals(&self, p: &[f64]) -> Option<DVector<f64>> {
        let (a, b, c) = self.unpack(p);
        if !(b > 0.0 && b < 20.0) || !a.is_finite() || !c.is_finite() {
            return None;
        }
        let r = DVector::from_iterator(
            self.log_x.len(),
            (0..self.log_x.len())
                .map(|i| self.sqrt_w[i] * (c + a * self.log_x[i].powf(b) - self.log_y[i])),
        );
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self, p: &[f64]) -> Option<DMatrix<f64>> {
        let (a, b, _) = self.unpack(p);
        let np = self.n_params();
        Some(DMatrix::from_fn(self.log_x.len(), np, |i, k| {
            let l = self.log_x[i];
            let lb = l.powf(b);
            let d = match (k, self.fixed_b.is_some()) {
                (0, _) => lb,
                (1, true) | (2, false) => 1.0,
                _ => a * lb * l.ln(),
            };
            self.sqrt_w[i] * d
        }))
    }
}

/// Nonlinear least squares for `ln(mean) = c + a (ln center)^b`, started
/// from a linearised fit at each exponent in [`STRETCH_STARTS`].
pub fn fit_stretched_log(
    binned: &BinnedSeries,
    options: &StretchedLogOptions,
) -> Result<StretchedLogFit> {
    let min_bins = if options.fixed_b.is_some() { 3 } else { 4 };
    if binned.len() < min_bins {
        return Err(Error::InsufficientData(format!(
            "stretched-log fit needs at least {min_bins} bins, got {}",
            binned.len()
        )));
    }
    if let Some(x) = binned.bin_centers.iter().find(|x| !(**x > 1.0)) {
        return Err(Error::Domain(format!(
            "bin centre {x} is not above 1; (ln x)^b is undefined"
        )));
    }
    if let Some(b) = options.fixed_b {
        if !(b > 0.0) {
            return Err(Error::Domain(format!("fixed exponent must be positive, got {b}")));
        }
    }
    let (lx, ly) = positive_logs(binned)?;
    let sqrt_w = binned
        .log_weights(options.weighting)
        .map(|w| w.iter().map(|v| v.sqrt()).collect())
        .unwrap_or_else(|| vec![1.0; lx.len()]);
    let problem = StretchedLog {
        log_x: &lx,
        log_y: &ly,
        sqrt_w,
        fixed_b: options.fixed_b,
    };

    let starts: Vec<f64> = match options.fixed_b {
        Some(b) => vec![b],
        None => STRETCH_STARTS.to_vec(),
    };
    let mut best: Option<(lsq::Minimum, f64)> = None;
    let mut failure: Option<Error> = None;
    for &b0 in &starts {
        let start = match options.fixed_b {
            Some(_) => vec![1.0, 0.0],
            None => {
                let transformed: Vec<f64> = lx.iter().map(|l| l.powf(b0)).collect();
                let line = lsq::fit_line(&transformed, &ly, None)?;
                vec![line.slope, b0, line.intercept]
            }
        };
        match lsq::minimize(&problem, &start) {
            Ok(min) => {
                if best.as_ref().is_none_or(|(b, _)| min.objective < b.objective) {
                    best = Some((min, b0));
                }
            }
            Err(e) => {
                let keep = match (&failure, &e) {
                    (None, _) => true,
                    (
                        Some(Error::Convergence { objective: old, .. }),
                        Error::Convergence { objective: new, .. },
                    ) => new < old,
                    (Some(Error::Convergence { .. }), _) => false,
                    (Some(_), Error::Convergence { .. }) => true,
                    _ => false,
                };
                if keep {
                    failure = Some(e);
                }
            }
        }
    }
    let Some((min, start_b)) = best else {
        return Err(failure.unwrap_or_else(|| Error::InsufficientData("no start converged".into())));
    };

    let jac = problem
        .jacobian(&min.params)
        .expect("jacobian is defined at an accepted point");
    let ses = lsq::standard_errors(&jac, min.objective);
    let (a, b, c) = problem.unpack(&min.params);
    let (a_se, b_se, c_se) = match options.fixed_b {
        Some(_) => (ses[0], 0.0, ses[1]),
        None => (ses[0], ses[1], ses[2]),
    };
    let sq: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(l, y)| (c + a * l.powf(b) - y).powi(2))
        .sum();
    Ok(StretchedLogFit {
        a_coeff: a,
        b_expo: b,
        c_offset: c,
        a_se,
        b_se,
        c_se,
        residual_rms: (sq / lx.len() as f64).sqrt(),
        ssr: min.objective,
        n_bins: lx.len(),
        diagnostics: FitDiagnostics {
            iterations: min.iterations,
            objective_trace: min.trace,
            used_simplex: min.used_simplex,
            start_b,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitModel {
    Power,
    Piecewise,
    StretchedLog,
}

impl FromStr for FitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(FitModel::Power),
            "piecewise" => Ok(FitModel::Piecewise),
            "stretchedlog" => Ok(FitModel::StretchedLog),
            other => Err(Error::Domain(format!(
                "unknown model `{other}` (expected power, piecewise or stretchedlog)"
            ))),
        }
    }
}

impl fmt::Display for FitModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitModel::Power => "power",
            FitModel::Piecewise => "piecewise",
            FitModel::StretchedLog => "stretchedlog",
        })
    }
}

/// Parameter vectors in the order reported for each model.
pub fn model_parameters(
    model: FitModel,
    binned: &BinnedSeries,
    breakpoint: Option<f64>,
    weighting: Weighting,
) -> Result<Vec<f64>> {
    Ok(match model {
        FitModel::Power => {
            let f = fit_power_law(binned, weighting)?;
            vec![f.amplitude, f.exponent]
        }
        FitModel::Piecewise => {
            let f = fit_piecewise_power_law(binned, breakpoint, weighting)?;
            vec![f.low.amplitude, f.low.exponent, f.high.amplitude, f.high.exponent]
        }
        FitModel::StretchedLog => {
            let f = fit_stretched_log(
                binned,
                &StretchedLogOptions {
                    weighting,
                    fixed_b: None,
                },
            )?;
            vec![f.a_coeff, f.b_expo, f.c_offset]
        }
    })
}

/// Bootstrap standard errors: bins are resampled with replacement and the
/// model refitted; resamples on which the fit fails are skipped.
pub fn bootstrap_standard_errors(
    model: FitModel,
    binned: &BinnedSeries,
    breakpoint: Option<f64>,
    weighting: Weighting,
    resamples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = SeededRng::new(seed);
    let mut draws: Vec<Vec<f64>> = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut idx: Vec<usize> = (0..binned.len()).map(|_| rng.below(binned.len())).collect();
        idx.sort_unstable();
        if let Ok(p) = model_parameters(model, &binned.take(&idx), breakpoint, weighting) {
            draws.push(p);
        }
    }
    if draws.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than 2 bootstrap resamples could be fitted".into(),
        ));
    }
    let k = draws.len() as f64;
    let dims = draws[0].len();
    Ok((0..dims)
        .map(|d| {
            let mean = draws.iter().map(|p| p[d]).sum::<f64>() / k;
            (draws.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exact_power(a: f64, xi: f64, xs: impl Iterator<Item = f64>) -> Vec<(f64, f64)> {
        xs.map(|x| (x, a * x.powf(xi))).collect()
    }

    #[test]
    fn single_location_is_one_bin() {
        let b = log_bin(&[(10.0, 2.0), (10.0, 4.0)], &BinningConfig::default()).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.bin_means, vec![3.0]);
        assert_eq!(b.bin_counts, vec![2]);
        assert!((b.bin_centers[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn one_decade_at_ten_per_decade_gives_ten_per_bin() {
        // bin edges sit at 10^(j/10); the points 10^(i/100), i < 100 fill each bin with 10
        let pts: Vec<_> = (0..100).map(|i| (10f64.powf(i as f64 / 100.0), 1.0)).collect();
        let b = log_bin(&pts, &BinningConfig { bins_per_decade: 10, min_occupancy: 1 }).unwrap();
        assert_eq!(b.bin_counts, vec![10; 10]);
        assert!(b.bin_centers.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn non_positive_x_is_dropped() {
        let b = log_bin(&[(0.0, 5.0), (1.0, 1.0), (2.0, 2.0), (-1.0, 3.0)], &BinningConfig::default())
            .unwrap();
        assert_eq!(b.dropped, 2);
        assert_eq!(b.bin_counts.iter().sum::<usize>(), 2);
        assert!(matches!(
            log_bin(&[(0.0, 1.0)], &BinningConfig::default()),
            Err(Error::EmptyData(_))
        ));
    }

    #[test]
    fn sparse_bins_are_merged() {
        let pts: Vec<_> = (0..20).map(|i| (10f64.powf(i as f64 / 10.0), 1.0)).collect();
        let b = log_bin(&pts, &BinningConfig { bins_per_decade: 10, min_occupancy: 3 }).unwrap();
        assert!(b.bin_counts.iter().all(|&c| c >= 3));
        assert_eq!(b.bin_counts.iter().sum::<usize>(), 20);
        // 6 full groups of 3, the remaining 2 points join the last
        assert_eq!(b.bin_counts, vec![3, 3, 3, 3, 3, 5]);
    }

    #[test]
    fn exact_power_law_recovered() {
        let pts = exact_power(2.0, 0.5, (0..20).map(|i| 10f64.powf(i as f64 / 5.0)));
        let binned = BinnedSeries::from_scatter(&pts).unwrap();
        let fit = fit_power_law(&binned, Weighting::Unweighted).unwrap();
        assert!((fit.amplitude - 2.0).abs() < 1e-10);
        assert!((fit.exponent - 0.5).abs() < 1e-10);
        assert!(fit.residual_rms < 1e-10);
    }

    #[test]
    fn power_law_error_paths() {
        let two = BinnedSeries::from_scatter(&[(1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert!(matches!(
            fit_power_law(&two, Weighting::Unweighted),
            Err(Error::InsufficientData(_))
        ));
        let neg = BinnedSeries::from_scatter(&[(1.0, 1.0), (2.0, -2.0), (3.0, 1.0)]).unwrap();
        assert!(matches!(fit_power_law(&neg, Weighting::Unweighted), Err(Error::Domain(_))));
    }

    fn two_regime_exact() -> Vec<(f64, f64)> {
        (0..40)
            .map(|i| {
                let x = 10f64.powf(0.05 + i as f64 / 10.0);
                let y = if x < 50.0 {
                    0.1 * x.powf(0.6)
                } else {
                    0.1 * 50f64.powf(0.6 - 1.1) * x.powf(1.1)
                };
                (x, y)
            })
            .collect()
    }

    #[test]
    fn piecewise_with_breakpoint_matches_independent_fits() {
        let binned = BinnedSeries::from_scatter(&two_regime_exact()).unwrap();
        let pw = fit_piecewise_power_law(&binned, Some(50.0), Weighting::Unweighted).unwrap();
        let low = fit_power_law(&binned.select(|x| x < 50.0), Weighting::Unweighted).unwrap();
        let high = fit_power_law(&binned.select(|x| x >= 50.0), Weighting::Unweighted).unwrap();
        assert_eq!(pw.low, low);
        assert_eq!(pw.high, high);
        assert!((pw.low.exponent - 0.6).abs() < 1e-10);
        assert!((pw.high.exponent - 1.1).abs() < 1e-10);
    }

    #[test]
    fn breakpoint_search_finds_exact_kink() {
        let binned = BinnedSeries::from_scatter(&two_regime_exact()).unwrap();
        let pw = fit_piecewise_power_law(&binned, None, Weighting::Unweighted).unwrap();
        assert!(pw.searched);
        let below = binned.bin_centers.iter().filter(|&&x| x < 50.0).count();
        assert!(pw.breakpoint > binned.bin_centers[below - 1]);
        assert!(pw.breakpoint <= binned.bin_centers[below]);
        assert!(pw.low.ssr + pw.high.ssr < 1e-20);
    }

    #[test]
    fn piecewise_needs_three_bins_each_side() {
        let binned = BinnedSeries::from_scatter(&two_regime_exact()).unwrap();
        assert!(matches!(
            fit_piecewise_power_law(&binned, Some(1.5), Weighting::Unweighted),
            Err(Error::InsufficientData(_))
        ));
    }

    fn stretched(a: f64, b: f64, c: f64, x: f64) -> f64 {
        (c + a * x.ln().powf(b)).exp()
    }

    #[test]
    fn stretched_log_noiseless_round_trip() {
        let pts: Vec<_> = (0..30)
            .map(|i| {
                let x = 10f64.powf(1.0 + i as f64 * 0.15);
                (x, stretched(4.32, 0.40, -6.59, x))
            })
            .collect();
        let binned = BinnedSeries::from_scatter(&pts).unwrap();
        let fit = fit_stretched_log(&binned, &StretchedLogOptions::default()).unwrap();
        assert!((fit.a_coeff - 4.32).abs() < 1e-6, "{fit:?}");
        assert!((fit.b_expo - 0.40).abs() < 1e-6);
        assert!((fit.c_offset + 6.59).abs() < 1e-6);
        let trace = &fit.diagnostics.objective_trace;
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn stretched_log_at_unit_exponent_is_a_power_law() {
        let pts: Vec<_> = (0..25)
            .map(|i| {
                let x = 10f64.powf(0.5 + i as f64 * 0.2);
                let wobble = 1.0 + 0.2 * ((i * 7) % 5) as f64 / 5.0;
                (x, 0.3 * x.powf(0.7) * wobble)
            })
            .collect();
        let binned = BinnedSeries::from_scatter(&pts).unwrap();
        let power = fit_power_law(&binned, Weighting::Unweighted).unwrap();
        let fixed = fit_stretched_log(
            &binned,
            &StretchedLogOptions { weighting: Weighting::Unweighted, fixed_b: Some(1.0) },
        )
        .unwrap();
        assert!((fixed.a_coeff - power.exponent).abs() < 1e-8);
        assert!((fixed.c_offset - power.amplitude.ln()).abs() < 1e-8);
        assert!((fixed.a_se - power.exponent_se).abs() < 1e-8);
    }

    #[test]
    fn stretched_log_domain_and_size_errors() {
        let low_x = BinnedSeries::from_scatter(&[(0.5, 1.0), (2.0, 1.0), (3.0, 1.0), (4.0, 1.0)]).unwrap();
        assert!(matches!(
            fit_stretched_log(&low_x, &StretchedLogOptions::default()),
            Err(Error::Domain(_))
        ));
        let few = BinnedSeries::from_scatter(&[(2.0, 1.0), (3.0, 1.0), (4.0, 1.0)]).unwrap();
        assert!(matches!(
            fit_stretched_log(&few, &StretchedLogOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn weighted_mode_uses_relative_sems() {
        let mut pts = Vec::new();
        for i in 0..60 {
            let x = 10f64.powf(i as f64 / 20.0);
            let jitter = if i % 2 == 0 { 1.05 } else { 0.95 };
            pts.push((x, 3.0 * x.powf(0.4) * jitter));
        }
        let binned = log_bin(&pts, &BinningConfig::default()).unwrap();
        let w = binned.log_weights(Weighting::InverseVariance).unwrap();
        assert!(w.iter().all(|v| v.is_finite() && *v > 0.0));
        let fit = fit_power_law(&binned, Weighting::InverseVariance).unwrap();
        assert!((fit.exponent - 0.4).abs() < 0.02);
    }

    #[test]
    fn bootstrap_is_seeded_and_positive() {
        let pts: Vec<_> = (0..40)
            .map(|i| {
                let x = 10f64.powf(i as f64 / 10.0);
                (x, x.powf(0.5) * (1.0 + 0.1 * ((i * 13) % 7) as f64 / 7.0))
            })
            .collect();
        let binned = BinnedSeries::from_scatter(&pts).unwrap();
        let a = bootstrap_standard_errors(FitModel::Power, &binned, None, Weighting::Unweighted, 200, 9).unwrap();
        let b = bootstrap_standard_errors(FitModel::Power, &binned, None, Weighting::Unweighted, 200, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| *s > 0.0 && s.is_finite()));
    }

    proptest! {
        #[test]
        fn binning_conserves_points(
            pts in proptest::collection::vec((-10.0..1e6f64, -5.0..5.0f64), 1..300),
            bpd in 1u32..20, occ in 1usize..6,
        ) {
            if let Ok(b) = log_bin(&pts, &BinningConfig { bins_per_decade: bpd, min_occupancy: occ }) {
                prop_assert_eq!(b.dropped + b.bin_counts.iter().sum::<usize>(), pts.len());
                prop_assert!(b.bin_centers.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(b.bin_counts.iter().all(|&c| c > 0));
            }
        }

        #[test]
        fn noiseless_power_law_any_parameters(a in 1e-3..1e3f64, xi in -2.0..3.0f64) {
            let pts = exact_power(a, xi, (0..15).map(|i| 10f64.powf(i as f64 * 0.3)));
            let fit = fit_power_law(&BinnedSeries::from_scatter(&pts).unwrap(), Weighting::Unweighted).unwrap();
            prop_assert!((fit.amplitude - a).abs() <= 1e-10 * a.max(1.0));
            prop_assert!((fit.exponent - xi).abs() < 1e-10);
            prop_assert!(fit.residual_rms < 1e-10);
        }

        #[test]
        fn power_law_rescaling_covariance(k in 0.01..100.0f64, seed in 0u64..1000) {
            let mut rng = SeededRng::new(seed);
            let pts: Vec<_> = (0..200)
                .map(|_| {
                    let x = 10f64.powf(4.0 * rng.uniform());
                    (x, 0.5 * x.powf(0.8) * rng.lognormal(0.0, 0.2))
                })
                .collect();
            let scaled: Vec<_> = pts.iter().map(|&(x, y)| (k * x, y)).collect();
            let cfg = BinningConfig::default();
            let base = fit_power_law(&log_bin(&pts, &cfg).unwrap(), Weighting::Unweighted).unwrap();
            let moved = fit_power_law(&log_bin(&scaled, &cfg).unwrap(), Weighting::Unweighted).unwrap();
            prop_assert!((moved.exponent - base.exponent).abs() < 1e-10);
            let expected = base.amplitude * k.powf(-base.exponent);
            prop_assert!((moved.amplitude - expected).abs() < 1e-10 * expected);
            prop_assert!(moved.exponent_se >= 0.0 && moved.amplitude_se.is_finite());
        }
    }
}
