//! Seeded synthetic panels with known ground truth.
//!
//! Cross-sections of `ln n` are normal with persistence across years
//! (stationary AR(1)), impact factors follow `I = a n^ξ` times lognormal
//! noise, and publication counts scatter around a per-journal mean.
//!
//! Draw order is part of the contract: for each journal in id order, one
//! normal for its publication mean and one for its first-year `ln n`; then
//! for each year, one normal for the `ln n` innovation (skipped in the first
//! year), one for publication jitter and one for the coupling noise. All
//! normals are drawn even when the parameter multiplying them is zero.

use serde::{Deserialize, Serialize};

use crate::dataset::{JournalYearRecord, Panel, YEAR_BOUNDS};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const GENERATOR_VERSION: &str = "citescale-synth/1";
pub const RNG_DESCRIPTION: &str =
    "xoshiro256++ seeded by SplitMix64; uniform = (u64 >> 11) * 2^-53; normal = Box-Muller cosine branch";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalParams {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublicationModel {
    /// Median of the per-journal mean publication count.
    pub mean: f64,
    /// Log-scale spread of per-journal means across journals.
    pub spread: f64,
    /// Log-scale year-to-year jitter around the journal's mean.
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_journals: usize,
    pub n_years: usize,
    #[serde(default = "default_first_year")]
    pub first_year: i32,
    pub citation_distribution: LognormalParams,
    pub coupling_exponent: f64,
    pub coupling_amplitude: f64,
    pub noise_level: f64,
    pub publication_model: PublicationModel,
    pub yearly_persistence: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_first_year() -> i32 {
    2004
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_journals: 2000,
            n_years: 10,
            first_year: default_first_year(),
            citation_distribution: LognormalParams {
                mu: 7.0,
                sigma: 1.6,
            },
            coupling_exponent: 0.5,
            coupling_amplitude: 0.04,
            noise_level: 0.1,
            publication_model: PublicationModel {
                mean: 150.0,
                spread: 0.8,
                jitter: 0.15,
            },
            yearly_persistence: 0.97,
            seed: 2014,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n_journals == 0 || self.n_years == 0 {
            return fail("n_journals and n_years must be positive".into());
        }
        let last = self.first_year as i64 + self.n_years as i64 - 1;
        if (self.first_year as i64) < YEAR_BOUNDS.0 as i64 || last > YEAR_BOUNDS.1 as i64 {
            return fail(format!(
                "years {}..={last} leave [{}, {}]",
                self.first_year, YEAR_BOUNDS.0, YEAR_BOUNDS.1
            ));
        }
        let c = self.citation_distribution;
        if !(c.sigma > 0.0) || !c.mu.is_finite() {
            return fail(format!("citation sigma must be positive, got {}", c.sigma));
        }
        if !(self.noise_level >= 0.0) {
            return fail(format!("noise_level must be >= 0, got {}", self.noise_level));
        }
        if !(0.0..=1.0).contains(&self.yearly_persistence) {
            return fail(format!(
                "yearly_persistence must lie in [0, 1], got {}",
                self.yearly_persistence
            ));
        }
        if !(self.coupling_amplitude > 0.0) || !self.coupling_exponent.is_finite() {
            return fail("coupling_amplitude must be positive".into());
        }
        let p = self.publication_model;
        if !(p.mean > 0.0) || !(p.spread >= 0.0) || !(p.jitter >= 0.0) {
            return fail("publication mean must be positive, spread and jitter >= 0".into());
        }
        Ok(())
    }
}

/// Everything needed to check a fitter against the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub generator: String,
    pub rng: String,
    pub spec: SynthSpec,
    pub years: Vec<i32>,
    pub n_records: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub panel: Panel,
    pub truth: GroundTruth,
}

pub fn journal_id(index: usize) -> String {
    format!("J{index:06}")
}

pub fn generate(spec: &SynthSpec) -> Result<SyntheticPanel> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let (mu, sigma) = (spec.citation_distribution.mu, spec.citation_distribution.sigma);
    let rho = spec.yearly_persistence;
    let innovation = sigma * (1.0 - rho * rho).sqrt();
    let pubs = spec.publication_model;

    let mut records = Vec::with_capacity(spec.n_journals * spec.n_years);
    for j in 0..spec.n_journals {
        let id = journal_id(j);
        let journal_mean = pubs.mean * (pubs.spread * rng.standard_normal()).exp();
        let mut log_n = mu + sigma * rng.standard_normal();
        for t in 0..spec.n_years {
            if t > 0 {
                log_n += (1.0 - rho) * (mu - log_n) + innovation * rng.standard_normal();
            }
            let publications = (journal_mean * (pubs.jitter * rng.standard_normal()).exp()).round();
            let coupling_noise = (spec.noise_level * rng.standard_normal()).exp();
            let n = log_n.exp().round();
            let impact = if n > 0.0 {
                spec.coupling_amplitude * n.powf(spec.coupling_exponent) * coupling_noise
            } else {
                0.0
            };
            records.push(JournalYearRecord {
                journal_id: id.clone(),
                year: spec.first_year + t as i32,
                annual_citations: n as u64,
                publications: publications as u64,
                reported_impact_factor: Some(impact),
            });
        }
    }
    let n_records = records.len();
    let panel = Panel::from_records(records)?;
    Ok(SyntheticPanel {
        truth: GroundTruth {
            generator: GENERATOR_VERSION.into(),
            rng: RNG_DESCRIPTION.into(),
            spec: spec.clone(),
            years: panel.years().to_vec(),
            n_records,
        },
        panel,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoRegimeSpec {
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub low_exponent: f64,
    pub high_exponent: f64,
    pub breakpoint: f64,
    /// Prefactor of the low regime; the high regime is matched at the breakpoint.
    pub amplitude: f64,
    pub noise_level: f64,
    pub seed: u64,
}

/// Scatter `(x, y)` following `amplitude * x^low` below the breakpoint and the
/// continuous continuation `amplitude * bp^(low - high) * x^high` above it,
/// with `x` log-uniform and multiplicative lognormal noise on `y`.
pub fn generate_two_regime(spec: &TwoRegimeSpec) -> Result<Vec<(f64, f64)>> {
    if spec.n_points == 0 {
        return Err(Error::InvalidSpec("n_points must be positive".into()));
    }
    if !(spec.x_min > 0.0 && spec.x_max > spec.x_min) {
        return Err(Error::InvalidSpec("need 0 < x_min < x_max".into()));
    }
    if !(spec.breakpoint > spec.x_min && spec.breakpoint < spec.x_max) {
        return Err(Error::InvalidSpec("breakpoint must lie inside (x_min, x_max)".into()));
    }
    if !(spec.amplitude > 0.0) || !(spec.noise_level >= 0.0) {
        return Err(Error::InvalidSpec("amplitude must be positive, noise >= 0".into()));
    }
    let mut rng = SeededRng::new(spec.seed);
    let (lo, hi) = (spec.x_min.ln(), spec.x_max.ln());
    let matched = spec.amplitude * spec.breakpoint.powf(spec.low_exponent - spec.high_exponent);
    Ok((0..spec.n_points)
        .map(|_| {
            let x = (lo + (hi - lo) * rng.uniform()).exp();
            let noise = (spec.noise_level * rng.standard_normal()).exp();
            let y = if x < spec.breakpoint {
                spec.amplitude * x.powf(spec.low_exponent)
            } else {
                matched * x.powf(spec.high_exponent)
            };
            (x, y * noise)
        })
        .collect())
}

/// Scatter following `y = exp(c + a (ln x)^b)` with log-uniform `x` on
/// `[x_min, x_max]` and multiplicative lognormal noise.
pub fn stretched_log_scatter(
    (a, b, c): (f64, f64, f64),
    n_points: usize,
    (x_min, x_max): (f64, f64),
    noise_level: f64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if !(x_min > 1.0 && x_max > x_min) || !(b > 0.0) || !(noise_level >= 0.0) {
        return Err(Error::InvalidSpec(
            "need 1 < x_min < x_max, b > 0 and noise >= 0".into(),
        ));
    }
    let mut rng = SeededRng::new(seed);
    let (lo, hi) = (x_min.ln(), x_max.ln());
    Ok((0..n_points)
        .map(|_| {
            let x = (lo + (hi - lo) * rng.uniform()).exp();
            let noise = (noise_level * rng.standard_normal()).exp();
            (x, (c + a * x.ln().powf(b)).exp() * noise)
        })
        .collect())
}

pub fn lognormal_sample(mu: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = SeededRng::new(seed);
    (0..n).map(|_| rng.lognormal(mu, sigma)).collect()
}

/// Pareto sample with density `∝ x^(-gamma)` on `[x_min, ∞)`.
pub fn pareto_sample(gamma: f64, x_min: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = SeededRng::new(seed);
    (0..n).map(|_| rng.pareto(x_min, gamma)).collect()
}
