//! Empirical densities of the indices on logarithmic bins, their
//! mean-rescaled collapse `X(x)<x>` against `x/<x>`, and the lognormal and
//! power-law forms fitted to them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::binfit::FitDiagnostics;
use crate::error::{Error, Result};
use crate::lsq::{self, Residuals};

pub const MIN_SAMPLE: usize = 10;
/// Default lower end of the power-tail fit, in units of the mean.
pub const DEFAULT_TAIL_XMIN: f64 = 1.0;
pub const DEFAULT_PDF_BINS_PER_DECADE: u32 = 10;

const EDGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    /// Occupied bins only.
    pub bin_edges: Vec<(f64, f64)>,
    /// Geometric centre of each bin.
    pub bin_centers: Vec<f64>,
    pub density: Vec<f64>,
    pub counts: Vec<usize>,
    /// Mean of the raw (unbinned) values.
    pub sample_mean: f64,
    pub sample_size: usize,
    /// Zero, negative or non-finite inputs discarded.
    pub dropped: usize,
    /// Sorted retained values.
    #[serde(skip)]
    pub values: Vec<f64>,
}

/// Density on bins with edges `10^(j / bins_per_decade)`.
pub fn empirical_pdf(values: &[f64], bins_per_decade: u32) -> Result<EmpiricalDistribution> {
    empirical_pdf_anchored(values, bins_per_decade, 1.0)
}

/// Density on bins with edges `anchor * 10^(j / bins_per_decade)`.
pub fn empirical_pdf_anchored(
    values: &[f64],
    bins_per_decade: u32,
    anchor: f64,
) -> Result<EmpiricalDistribution> {
    if bins_per_decade == 0 {
        return Err(Error::Domain("bins_per_decade must be positive".into()));
    }
    if !(anchor > 0.0 && anchor.is_finite()) {
        return Err(Error::Domain(format!("bin anchor must be positive, got {anchor}")));
    }
    let mut kept: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0 && v.is_finite()).collect();
    let dropped = values.len() - kept.len();
    if kept.len() < MIN_SAMPLE {
        return Err(Error::InsufficientData(format!(
            "density estimate needs at least {MIN_SAMPLE} positive values, got {}",
            kept.len()
        )));
    }
    kept.sort_by(f64::total_cmp);
    let per_decade = bins_per_decade as f64;
    let log_anchor = anchor.log10();
    let bin_of = |x: f64| ((x.log10() - log_anchor) * per_decade + EDGE_SLACK).floor() as i64;

    let mut counts: Vec<(i64, usize)> = Vec::new();
    for &v in &kept {
        let j = bin_of(v);
        match counts.last_mut() {
            Some((last, c)) if *last == j => *c += 1,
            _ => counts.push((j, 1)),
        }
    }

    let total = kept.len() as f64;
    let edge = |j: i64| 10f64.powf(log_anchor + j as f64 / per_decade);
    let mut dist = EmpiricalDistribution {
        bin_edges: Vec::with_capacity(counts.len()),
        bin_centers: Vec::with_capacity(counts.len()),
        density: Vec::with_capacity(counts.len()),
        counts: Vec::with_capacity(counts.len()),
        sample_mean: kept.iter().sum::<f64>() / total,
        sample_size: kept.len(),
        dropped,
        values: Vec::new(),
    };
    for (j, c) in counts {
        let (lo, hi) = (edge(j), edge(j + 1));
        dist.bin_edges.push((lo, hi));
        dist.bin_centers.push((lo * hi).sqrt());
        dist.density.push(c as f64 / (total * (hi - lo)));
        dist.counts.push(c);
    }
    dist.values = kept;
    Ok(dist)
}

impl EmpiricalDistribution {
    pub fn normalization(&self) -> f64 {
        self.density
            .iter()
            .zip(&self.bin_edges)
            .map(|(d, (lo, hi))| d * (hi - lo))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledDistribution {
    pub scaled_edges: Vec<(f64, f64)>,
    pub scaled_x: Vec<f64>,
    pub scaled_density: Vec<f64>,
    pub counts: Vec<usize>,
    /// The mean the curve was divided by (1 for an unscaled view).
    pub scale: f64,
    pub source_label: String,
    #[serde(skip)]
    pub values: Vec<f64>,
}

impl ScaledDistribution {
    /// The distribution as-is, for comparisons without rescaling.
    pub fn unscaled(dist: &EmpiricalDistribution, label: impl Into<String>) -> Self {
        rescale(dist, 1.0, label.into())
    }

    pub fn normalization(&self) -> f64 {
        self.scaled_density
            .iter()
            .zip(&self.scaled_edges)
            .map(|(d, (lo, hi))| d * (hi - lo))
            .sum()
    }

    /// Mean of the scaled variable estimated from the binned curve.
    pub fn binned_mean(&self) -> f64 {
        self.scaled_x
            .iter()
            .zip(&self.scaled_density)
            .zip(&self.scaled_edges)
            .map(|((x, d), (lo, hi))| x * d * (hi - lo))
            .sum()
    }
}

fn rescale(dist: &EmpiricalDistribution, mean: f64, source_label: String) -> ScaledDistribution {
    ScaledDistribution {
        scaled_edges: dist.bin_edges.iter().map(|(lo, hi)| (lo / mean, hi / mean)).collect(),
        scaled_x: dist.bin_centers.iter().map(|x| x / mean).collect(),
        scaled_density: dist.density.iter().map(|d| d * mean).collect(),
        counts: dist.counts.clone(),
        scale: mean,
        source_label,
        values: dist.values.iter().map(|v| v / mean).collect(),
    }
}

/// Maps `(x, X(x))` to `(x / <x>, X(x) <x>)`.
pub fn scale_collapse(
    dist: &EmpiricalDistribution,
    label: impl Into<String>,
) -> Result<ScaledDistribution> {
    if !(dist.sample_mean > 0.0 && dist.sample_mean.is_finite()) {
        return Err(Error::DegenerateSample(format!(
            "cannot rescale by mean {}",
            dist.sample_mean
        )));
    }
    Ok(rescale(dist, dist.sample_mean, label.into()))
}

/// Curve points `(ln x, ln density, weight)` with weight the probability per
/// unit `ln x`.
fn log_curve(xs: &[f64], density: &[f64]) -> Vec<(f64, f64, f64)> {
    xs.iter()
        .zip(density)
        .filter(|(x, d)| **d > 0.0 && **x > 0.0)
        .map(|(x, d)| (x.ln(), d.ln(), x * d))
        .collect()
}

fn interpolate(curve: &[(f64, f64, f64)], at: f64) -> Option<f64> {
    let (first, last) = (curve.first()?, curve.last()?);
    if at < first.0 || at > last.0 {
        return None;
    }
    let i = curve.partition_point(|p| p.0 < at);
    if curve[i].0 == at {
        return Some(curve[i].1);
    }
    let (a, b) = (curve[i - 1], curve[i]);
    let t = (at - a.0) / (b.0 - a.0);
    Some(a.1 + t * (b.1 - a.1))
}

/// Probability-weighted RMS difference of log densities over the overlap of
/// the two curves.
///
/// Each occupied bin of either curve lying inside the other's support
/// contributes its squared log-density difference (the other curve is
/// interpolated linearly in `ln x`), weighted by its probability per unit
/// `ln x`. Weighting keeps sparsely populated tail bins from dominating.
pub fn collapse_distance(a: &ScaledDistribution, b: &ScaledDistribution) -> Result<f64> {
    let ca = log_curve(&a.scaled_x, &a.scaled_density);
    let cb = log_curve(&b.scaled_x, &b.scaled_density);
    let mut weight = 0.0;
    let mut acc = 0.0;
    for (own, other) in [(&ca, &cb), (&cb, &ca)] {
        for &(lx, ld, w) in own.iter() {
            if let Some(od) = interpolate(other, lx) {
                weight += w;
                acc += w * (ld - od).powi(2);
            }
        }
    }
    if weight == 0.0 {
        return Err(Error::DisjointSupport(format!(
            "`{}` and `{}` do not overlap",
            a.source_label, b.source_label
        )));
    }
    Ok((acc / weight).sqrt())
}

/// Pointwise median of several collapsed curves on the union of their bin
/// centres, restricted to where every curve is defined.
pub fn median_curve(curves: &[ScaledDistribution]) -> Result<ScaledDistribution> {
    if curves.is_empty() {
        return Err(Error::EmptyData("no curves to take a median of".into()));
    }
    let logs: Vec<_> = curves
        .iter()
        .map(|c| log_curve(&c.scaled_x, &c.scaled_density))
        .collect();
    let lo = logs.iter().filter_map(|c| c.first().map(|p| p.0)).fold(f64::NEG_INFINITY, f64::max);
    let hi = logs.iter().filter_map(|c| c.last().map(|p| p.0)).fold(f64::INFINITY, f64::min);
    let mut grid: Vec<f64> = logs
        .iter()
        .flat_map(|c| c.iter().map(|p| p.0))
        .filter(|x| *x >= lo && *x <= hi)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if grid.is_empty() {
        return Err(Error::DisjointSupport("curves share no common support".into()));
    }
    let mut out = ScaledDistribution {
        scaled_edges: Vec::new(),
        scaled_x: Vec::new(),
        scaled_density: Vec::new(),
        counts: Vec::new(),
        scale: 1.0,
        source_label: "median".into(),
        values: Vec::new(),
    };
    for lx in grid {
        let mut at: Vec<f64> = logs.iter().filter_map(|c| interpolate(c, lx)).collect();
        at.sort_by(f64::total_cmp);
        let m = at.len();
        let median = if m % 2 == 1 { at[m / 2] } else { 0.5 * (at[m / 2 - 1] + at[m / 2]) };
        let x = lx.exp();
        out.scaled_edges.push((x, x));
        out.scaled_x.push(x);
        out.scaled_density.push(median.exp());
        out.counts.push(0);
    }
    Ok(out)
}

/// A binned density the tail fitters can work on.
pub trait DensityCurve {
    fn xs(&self) -> &[f64];
    fn densities(&self) -> &[f64];
    fn bin_counts(&self) -> &[usize];
    /// Raw values behind the curve, in the curve's units; may be empty.
    fn raw_values(&self) -> &[f64];
}

impl DensityCurve for EmpiricalDistribution {
    fn xs(&self) -> &[f64] {
        &self.bin_centers
    }
    fn densities(&self) -> &[f64] {
        &self.density
    }
    fn bin_counts(&self) -> &[usize] {
        &self.counts
    }
    fn raw_values(&self) -> &[f64] {
        &self.values
    }
}

impl DensityCurve for ScaledDistribution {
    fn xs(&self) -> &[f64] {
        &self.scaled_x
    }
    fn densities(&self) -> &[f64] {
        &self.scaled_density
    }
    fn bin_counts(&self) -> &[usize] {
        &self.counts
    }
    fn raw_values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailMle {
    pub gamma: f64,
    pub gamma_se: f64,
    /// Raw values at or above the threshold.
    pub tail_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TailParams {
    Lognormal {
        mu: f64,
        sigma: f64,
        mu_se: f64,
        sigma_se: f64,
        /// Mean and standard deviation of `ln x` over the raw values.
        moment_mu: Option<f64>,
        moment_sigma: Option<f64>,
    },
    Power {
        gamma: f64,
        gamma_se: f64,
        /// Maximum-likelihood cross-check over raw values.
        mle: Option<TailMle>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub params: TailParams,
    pub fit_range: (f64, f64),
    pub n_bins: usize,
    /// RMS residual of `ln density`.
    pub residual_rms: f64,
    pub diagnostics: Option<FitDiagnostics>,
}

impl TailFit {
    pub fn gamma(&self) -> Option<f64> {
        match self.params {
            TailParams::Power { gamma, .. } => Some(gamma),
            TailParams::Lognormal { .. } => None,
        }
    }

    pub fn mu_sigma(&self) -> Option<(f64, f64)> {
        match self.params {
            TailParams::Lognormal { mu, sigma, .. } => Some((mu, sigma)),
            TailParams::Power { .. } => None,
        }
    }
}

/// Curve points with positive density inside `range`.
fn select_points<C: DensityCurve + ?Sized>(
    curve: &C,
    range: (f64, f64),
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut lx = Vec::new();
    let mut ld = Vec::new();
    let mut w = Vec::new();
    let counts = curve.bin_counts();
    for (i, (&x, &d)) in curve.xs().iter().zip(curve.densities()).enumerate() {
        if d > 0.0 && x >= range.0 && x <= range.1 {
            lx.push(x.ln());
            ld.push(d.ln());
            w.push(counts.get(i).map_or(1.0, |&c| c.max(1) as f64));
        }
    }
    (lx, ld, w)
}

struct LognormalDensity<'a> {
    log_x: &'a [f64],
    log_d: &'a [f64],
    sqrt_w: Vec<f64>,
}

impl Residuals for LognormalDensity<'_> {
    fn n_params(&self) -> usize {
        2
    }

    fn n_residuals(&self) -> usize {
        self.log_x.len()
    }

    fn residuals(&self, p: &[f64]) -> Option<DVector<f64>> {
        let (mu, sigma) = (p[0], p[1]);
        if !(sigma > 0.0) || !mu.is_finite() {
            return None;
        }
        let norm = sigma.ln() + 0.5 * (2.0 * PI).ln();
        Some(DVector::from_iterator(
            self.log_x.len(),
            (0..self.log_x.len()).map(|i| {
                let u = self.log_x[i];
                let model = -u - norm - (u - mu).powi(2) / (2.0 * sigma * sigma);
                self.sqrt_w[i] * (model - self.log_d[i])
            }),
        ))
    }

    fn jacobian(&self, p: &[f64]) -> Option<DMatrix<f64>> {
        let (mu, sigma) = (p[0], p[1]);
        Some(DMatrix::from_fn(self.log_x.len(), 2, |i, k| {
            let z = self.log_x[i] - mu;
            let d = if k == 0 {
                z / (sigma * sigma)
            } else {
                -1.0 / sigma + z * z / sigma.powi(3)
            };
            self.sqrt_w[i] * d
        }))
    }
}

/// Start point from the quadratic `ln(x X) = A + B ln x + C (ln x)^2`.
fn lognormal_start(lx: &[f64], ld: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let m = lx.len();
    let design = DMatrix::from_fn(m, 3, |i, k| w[i].sqrt() * lx[i].powi(k as i32));
    let rhs = DVector::from_iterator(m, (0..m).map(|i| w[i].sqrt() * (ld[i] + lx[i])));
    let coef = design.svd(true, true).solve(&rhs, 1e-14).ok()?;
    let (b, c) = (coef[1], coef[2]);
    if !(c < 0.0) {
        return None;
    }
    let var = -1.0 / (2.0 * c);
    Some((b * var, var.sqrt()))
}

fn log_moments(values: &[f64]) -> Option<(f64, f64)> {
    if values.len() < 2 {
        return None;
    }
    let k = values.len() as f64;
    let mean = values.iter().map(|v| v.ln()).sum::<f64>() / k;
    let var = values.iter().map(|v| (v.ln() - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Some((mean, var.sqrt()))
}

/// Fits `ln X(x) = -ln x - ln(σ√(2π)) - (ln x - μ)² / (2σ²)` to the log
/// density by least squares, each bin weighted by its count. `fit_range`
/// defaults to the whole curve.
pub fn fit_lognormal<C: DensityCurve + ?Sized>(
    curve: &C,
    fit_range: Option<(f64, f64)>,
) -> Result<TailFit> {
    let range = fit_range.unwrap_or((0.0, f64::INFINITY));
    let (lx, ld, w) = select_points(curve, range);
    if lx.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "lognormal fit needs at least 4 bins in range, got {}",
            lx.len()
        )));
    }
    let moments = log_moments(curve.raw_values());
    let start = lognormal_start(&lx, &ld, &w)
        .or(moments)
        .unwrap_or_else(|| {
            let k = lx.len() as f64;
            let m = lx.iter().sum::<f64>() / k;
            (m, (lx.iter().map(|u| (u - m).powi(2)).sum::<f64>() / k).sqrt().max(0.1))
        });
    let problem = LognormalDensity {
        log_x: &lx,
        log_d: &ld,
        sqrt_w: w.iter().map(|v| v.sqrt()).collect(),
    };
    let min = lsq::minimize(&problem, &[start.0, start.1])?;
    let jac = problem.jacobian(&min.params).expect("jacobian defined at solution");
    let ses = lsq::standard_errors(&jac, min.objective);
    let (mu, sigma) = (min.params[0], min.params[1]);
    let unweighted = LognormalDensity {
        log_x: &lx,
        log_d: &ld,
        sqrt_w: vec![1.0; lx.len()],
    };
    let rms = (unweighted.objective(&min.params) / lx.len() as f64).sqrt();
    Ok(TailFit {
        params: TailParams::Lognormal {
            mu,
            sigma,
            mu_se: ses[0],
            sigma_se: ses[1],
            moment_mu: moments.map(|m| m.0),
            moment_sigma: moments.map(|m| m.1),
        },
        fit_range: (
            lx.first().copied().unwrap_or(0.0).exp(),
            lx.last().copied().unwrap_or(0.0).exp(),
        ),
        n_bins: lx.len(),
        residual_rms: rms,
        diagnostics: Some(FitDiagnostics {
            iterations: min.iterations,
            objective_trace: min.trace,
            used_simplex: min.used_simplex,
            start_b: 0.0,
        }),
    })
}

/// Continuous power-law maximum-likelihood exponent over values `>= x_min`:
/// `γ = 1 + k / Σ ln(x / x_min)` with standard error `(γ - 1) / √k`.
pub fn power_tail_mle(values: &[f64], x_min: f64) -> Result<TailMle> {
    if !(x_min > 0.0) {
        return Err(Error::Domain(format!("x_min must be positive, got {x_min}")));
    }
    let tail: Vec<f64> = values.iter().copied().filter(|v| *v >= x_min).collect();
    if tail.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "tail above {x_min} holds {} values",
            tail.len()
        )));
    }
    let k = tail.len() as f64;
    let log_sum: f64 = tail.iter().map(|v| (v / x_min).ln()).sum();
    if log_sum <= 0.0 {
        return Err(Error::DegenerateSample("all tail values equal x_min".into()));
    }
    let gamma = 1.0 + k / log_sum;
    Ok(TailMle {
        gamma,
        gamma_se: (gamma - 1.0) / k.sqrt(),
        tail_size: tail.len(),
    })
}

/// Straight-line fit of log density against log x over bins centred at or
/// above `x_min` (count-weighted), with the likelihood estimate over the raw
/// values reported alongside.
pub fn fit_power_tail<C: DensityCurve + ?Sized>(curve: &C, x_min: f64) -> Result<TailFit> {
    if !(x_min > 0.0) {
        return Err(Error::Domain(format!("x_min must be positive, got {x_min}")));
    }
    let (lx, ld, w) = select_points(curve, (x_min, f64::INFINITY));
    if lx.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "power-tail fit needs at least 3 bins at or above {x_min}, got {}",
            lx.len()
        )));
    }
    let line = lsq::fit_line(&lx, &ld, Some(&w))?;
    let gamma = -line.slope;
    if !(gamma > 1.0) {
        return Err(Error::Domain(format!(
            "fitted decay exponent {gamma} is not above 1; the tail is not integrable"
        )));
    }
    let mle = if curve.raw_values().is_empty() {
        None
    } else {
        power_tail_mle(curve.raw_values(), x_min).ok()
    };
    Ok(TailFit {
        params: TailParams::Power {
            gamma,
            gamma_se: line.slope_se,
            mle,
        },
        fit_range: (x_min, lx.last().copied().unwrap_or(0.0).exp()),
        n_bins: lx.len(),
        residual_rms: line.residual_rms,
        diagnostics: None,
    })
}

/// The exponent `ξ` relating `I ∝ r^ξ` implied by the two tails: solving
/// `-γ_I ξ + ξ - 1 = -γ_r` gives `ξ = (γ_r - 1) / (γ_I - 1)`.
pub fn xi_from_tail_exponents(gamma_i: f64, gamma_r: f64) -> Result<f64> {
    if !(gamma_i > 1.0) {
        return Err(Error::Domain(format!("gamma_I must exceed 1, got {gamma_i}")));
    }
    Ok((gamma_r - 1.0) / (gamma_i - 1.0))
}

/// Forward map `γ_r = γ_I ξ - ξ + 1`.
pub fn gamma_r_from_xi(gamma_i: f64, xi: f64) -> f64 {
    gamma_i * xi - xi + 1.0
}

/// Pools per-year samples after dividing each by its own mean, then bins the
/// pooled scaled values.
pub fn pooled_scaled_pdf(
    samples: &[Vec<f64>],
    bins_per_decade: u32,
) -> Result<EmpiricalDistribution> {
    let mut pooled = Vec::new();
    for s in samples {
        let positive: Vec<f64> = s.iter().copied().filter(|v| *v > 0.0 && v.is_finite()).collect();
        if positive.is_empty() {
            continue;
        }
        let mean = positive.iter().sum::<f64>() / positive.len() as f64;
        pooled.extend(positive.iter().map(|v| v / mean));
    }
    empirical_pdf(&pooled, bins_per_decade)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn lognormal_density(x: f64, mu: f64, sigma: f64) -> f64 {
        (-(x.ln() - mu).powi(2) / (2.0 * sigma * sigma)).exp() / (x * sigma * (2.0 * PI).sqrt())
    }

    #[test]
    fn point_mass_is_one_bin() {
        let d = empirical_pdf(&[5.0; 1000], 10).unwrap();
        assert_eq!(d.counts, vec![1000]);
        assert!((d.normalization() - 1.0).abs() < 1e-12);
        assert_eq!(d.sample_mean, 5.0);
    }

    #[test]
    fn two_decades_one_bin_each() {
        let mut v = vec![1.0; 6];
        v.extend([10.0; 6]);
        let d = empirical_pdf(&v, 1).unwrap();
        assert_eq!(d.counts, vec![6, 6]);
        assert_eq!(d.bin_edges, vec![(1.0, 10.0), (10.0, 100.0)]);
    }

    #[test]
    fn too_few_values() {
        assert!(matches!(
            empirical_pdf(&[1.0, 2.0, 0.0, -1.0], 10),
            Err(Error::InsufficientData(_))
        ));
        let mut v = vec![1.0; 10];
        v.push(0.0);
        assert_eq!(empirical_pdf(&v, 10).unwrap().dropped, 1);
    }

    #[test]
    fn lognormal_density_estimate_matches_closed_form() {
        let mut rng = SeededRng::new(2024);
        let v: Vec<f64> = (0..100_000).map(|_| rng.lognormal(0.0, 1.0)).collect();
        let d = empirical_pdf(&v, 10).unwrap();
        let mut checked = 0;
        for i in 0..d.counts.len() {
            if d.counts[i] < 100 {
                continue;
            }
            let exact = lognormal_density(d.bin_centers[i], 0.0, 1.0);
            // 5%, or 3 Poisson standard errors where that is wider
            let tol = 0.05f64.max(3.0 / (d.counts[i] as f64).sqrt());
            assert!(
                (d.density[i] / exact - 1.0).abs() < tol,
                "bin {i} at {}: {} vs {}",
                d.bin_centers[i],
                d.density[i],
                exact
            );
            checked += 1;
        }
        assert!(checked > 20);
    }

    fn sample(seed: u64, n: usize, mu: f64, sigma: f64) -> Vec<f64> {
        let mut rng = SeededRng::new(seed);
        (0..n).map(|_| rng.lognormal(mu, sigma)).collect()
    }

    #[test]
    fn unit_mean_collapse_is_identity() {
        let mut v = sample(1, 1000, 0.0, 0.5);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x /= mean);
        let d = empirical_pdf(&v, 10).unwrap();
        let s = scale_collapse(&d, "x").unwrap();
        for i in 0..d.counts.len() {
            assert!((s.scaled_x[i] - d.bin_centers[i]).abs() < 1e-12 * d.bin_centers[i]);
            assert!((s.scaled_density[i] - d.density[i]).abs() < 1e-12 * d.density[i]);
        }
    }

    #[test]
    fn scaled_copy_collapses_exactly_on_scaled_bins() {
        let v = sample(5, 20_000, 1.0, 1.2);
        let k = 10.0;
        let kv: Vec<f64> = v.iter().map(|x| k * x).collect();
        let a = scale_collapse(&empirical_pdf(&v, 10).unwrap(), "a").unwrap();
        let b = scale_collapse(&empirical_pdf_anchored(&kv, 10, k).unwrap(), "b").unwrap();
        assert!(collapse_distance(&a, &b).unwrap() < 1e-9);
        // a decade shift lines up with the default grid as well
        let b = scale_collapse(&empirical_pdf(&kv, 10).unwrap(), "b").unwrap();
        assert!(collapse_distance(&a, &b).unwrap() < 1e-9);
    }

    #[test]
    fn collapse_distance_examples() {
        let d = empirical_pdf(&sample(3, 5000, 0.0, 1.0), 10).unwrap();
        let a = scale_collapse(&d, "a").unwrap();
        assert_eq!(collapse_distance(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b.scaled_density.iter_mut().for_each(|v| *v *= std::f64::consts::E);
        assert!((collapse_distance(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let mut far = a.clone();
        far.scaled_x.iter_mut().for_each(|x| *x *= 1e6);
        assert!(matches!(collapse_distance(&a, &far), Err(Error::DisjointSupport(_))));
    }

    #[test]
    fn replicate_draws_are_close() {
        let a = scale_collapse(&empirical_pdf(&sample(10, 100_000, 0.0, 1.0), 10).unwrap(), "a").unwrap();
        let b = scale_collapse(&empirical_pdf(&sample(11, 100_000, 0.0, 1.0), 10).unwrap(), "b").unwrap();
        assert!(collapse_distance(&a, &b).unwrap() < 0.1);
    }

    #[test]
    fn tabulated_lognormal_recovered_exactly() {
        let (mu, sigma) = (-1.355, 1.573);
        let xs: Vec<f64> = (0..40).map(|i| 10f64.powf(-3.0 + i as f64 * 0.1)).collect();
        let curve = ScaledDistribution {
            scaled_edges: xs.iter().map(|&x| (x, x)).collect(),
            scaled_density: xs.iter().map(|&x| lognormal_density(x, mu, sigma)).collect(),
            scaled_x: xs,
            counts: vec![1; 40],
            scale: 1.0,
            source_label: "table".into(),
            values: vec![],
        };
        let fit = fit_lognormal(&curve, None).unwrap();
        let (m, s) = fit.mu_sigma().unwrap();
        assert!((m - mu).abs() < 1e-8 && (s - sigma).abs() < 1e-8, "{m} {s}");
    }

    #[test]
    fn lognormal_needs_four_bins() {
        let d = empirical_pdf(&[1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 3.0, 3.0, 3.0, 3.0], 10).unwrap();
        assert!(matches!(fit_lognormal(&d, None), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn power_tail_on_tabulated_density() {
        let xs: Vec<f64> = (0..20).map(|i| 10f64.powf(i as f64 * 0.1)).collect();
        let curve = ScaledDistribution {
            scaled_edges: xs.iter().map(|&x| (x, x)).collect(),
            scaled_density: xs.iter().map(|&x| 3.0 * x.powf(-2.5)).collect(),
            scaled_x: xs,
            counts: vec![10; 20],
            scale: 1.0,
            source_label: "table".into(),
            values: vec![],
        };
        let fit = fit_power_tail(&curve, 1.0).unwrap();
        assert!((fit.gamma().unwrap() - 2.5).abs() < 1e-10);
        assert!(matches!(fit.params, TailParams::Power { mle: None, .. }));
        assert!(matches!(fit_power_tail(&curve, 65.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn flat_tail_is_rejected() {
        let xs: Vec<f64> = (0..10).map(|i| 10f64.powf(i as f64 * 0.1)).collect();
        let curve = ScaledDistribution {
            scaled_edges: xs.iter().map(|&x| (x, x)).collect(),
            scaled_density: xs.iter().map(|&x| x.powf(-0.5)).collect(),
            scaled_x: xs,
            counts: vec![10; 10],
            scale: 1.0,
            source_label: "flat".into(),
            values: vec![],
        };
        assert!(matches!(fit_power_tail(&curve, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn xi_relation_examples() {
        let xi = xi_from_tail_exponents(2.92, 2.54).unwrap();
        assert!((xi - 0.802).abs() < 1e-3);
        assert_eq!(xi_from_tail_exponents(3.0, 2.0).unwrap(), 0.5);
        assert_eq!(xi_from_tail_exponents(2.2, 2.2).unwrap(), 1.0);
        assert!(matches!(xi_from_tail_exponents(1.0, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn median_of_identical_curves_is_the_curve() {
        let a = scale_collapse(&empirical_pdf(&sample(4, 5000, 0.0, 1.0), 10).unwrap(), "a").unwrap();
        let m = median_curve(&[a.clone(), a.clone(), a.clone()]).unwrap();
        assert!(collapse_distance(&a, &m).unwrap() < 1e-12);
    }

    proptest! {
        #[test]
        fn pdf_is_normalized(v in proptest::collection::vec(1e-3..1e6f64, 10..400), bpd in 1u32..25) {
            let d = empirical_pdf(&v, bpd).unwrap();
            prop_assert!((d.normalization() - 1.0).abs() < 1e-9);
            prop_assert!(d.density.iter().all(|x| *x >= 0.0));
            let s = scale_collapse(&d, "p").unwrap();
            prop_assert!((s.normalization() - d.normalization()).abs() < 1e-12);
        }

        #[test]
        fn xi_round_trip(gamma_i in 1.01..6.0f64, xi in -3.0..3.0f64) {
            let back = xi_from_tail_exponents(gamma_i, gamma_r_from_xi(gamma_i, xi)).unwrap();
            prop_assert!((back - xi).abs() < 1e-12);
        }

        #[test]
        fn scaled_mean_is_near_one(seed in 0u64..200) {
            let d = empirical_pdf(&sample(seed, 2000, 2.0, 0.8), 10).unwrap();
            let s = scale_collapse(&d, "m").unwrap();
            prop_assert!((s.binned_mean() - 1.0).abs() < 0.02);
        }
    }
}
