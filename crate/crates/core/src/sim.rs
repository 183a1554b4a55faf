//! Seedable Monte Carlo model of the pair source and coincidence counter.
//!
//! Counts are drawn from closed-form Poisson means rather than simulated
//! photon by photon. Per bin, four independent Poisson variates are drawn:
//!
//! * `true`: pairs split to opposite detectors with both photons detected,
//! * `other1`, `other2`: every remaining click on each detector
//!   (unpartnered pair photons plus dark counts),
//! * `accidental`: chance coincidences with mean `R1·R2·τ·Δt`, capped at
//!   `min(other1, other2)` since each one consumes an uncorrelated click.
//!
//! singles = true + other, coincidences = true + accidental, which makes
//! `coincidences <= min(singles1, singles2)` hold by construction.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`). The master
//! seed goes through `SeedableRng::seed_from_u64`; each (sample, power)
//! point uses stream `sample_index << 32 | power_index`, so points are
//! independent and can be simulated in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{absorption_fraction, ExperimentGeometry, ModelError, SampleSpec};
use crate::series::{Bin, Dataset, MeasurementSeries, SampleSeries, SeriesError};
use crate::units::{FluxDensity, Power, Rate, Time};

/// Largest Poisson mean for which every count is exactly representable.
const MAX_EXPECTED_COUNT: f64 = 9_007_199_254_740_992.0; // 2^53

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid source configuration: {0}")]
    Config(String),
    #[error("sample '{label}': {source}")]
    Model { label: String, source: ModelError },
    #[error("expected {expected} counts per bin overflows the count representation")]
    Overflow { expected: f64 },
    #[error("no pure-solvent reference (concentration 0) among the samples")]
    MissingReference,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub pump_powers: Vec<Power>,
    /// Pair rate reaching the cuvette per mW of pump, s⁻¹ mW⁻¹.
    pub pairs_per_mw: f64,
    pub detector_efficiency: f64,
    pub coupling_efficiency: f64,
    pub coincidence_window: Time,
    pub bin_duration: Time,
    pub bins_per_point: usize,
    pub solvent_transmission: f64,
    /// Per-detector dark count rate.
    pub dark_count_rate: Rate,
    pub rng_seed: u64,
}

impl Default for SourceConfig {
    /// 1–20 mW sweep, 9 ns window, 60 × 1 s bins. With these efficiencies
    /// 2×10⁶ pairs s⁻¹ reach the sample at 20 mW and the two detectors
    /// together report ≈ 4.9×10⁵ singles s⁻¹.
    fn default() -> Self {
        Self {
            pump_powers: (1..=20)
                .map(|mw| Power::from_milliwatts(mw as f64).expect("positive"))
                .collect(),
            pairs_per_mw: 1.25e5,
            detector_efficiency: 0.65,
            coupling_efficiency: 0.19,
            coincidence_window: Time::new(9e-9).expect("positive"),
            bin_duration: Time::new(1.0).expect("positive"),
            bins_per_point: 60,
            solvent_transmission: 0.8,
            dark_count_rate: Rate::ZERO,
            rng_seed: 0,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(SimError::Config(format!(
                    "{name} must lie in [0, 1], got {v}"
                )))
            }
        };
        unit("detector_efficiency", self.detector_efficiency)?;
        unit("coupling_efficiency", self.coupling_efficiency)?;
        if !(self.solvent_transmission > 0.0 && self.solvent_transmission <= 1.0) {
            return Err(SimError::Config(format!(
                "solvent_transmission must lie in (0, 1], got {}",
                self.solvent_transmission
            )));
        }
        if !(self.pairs_per_mw.is_finite() && self.pairs_per_mw >= 0.0) {
            return Err(SimError::Config(format!(
                "pairs_per_mw must be finite and non-negative, got {}",
                self.pairs_per_mw
            )));
        }
        if self.coincidence_window.value() <= 0.0 {
            return Err(SimError::Config(
                "coincidence_window must be positive".into(),
            ));
        }
        if self.bin_duration.value() <= 0.0 {
            return Err(SimError::Config("bin_duration must be positive".into()));
        }
        if self.bins_per_point == 0 {
            return Err(SimError::Config("bins_per_point must be at least 1".into()));
        }
        Ok(())
    }

    /// Combined per-photon detection probability η·η_c.
    pub fn detection_probability(&self) -> f64 {
        self.detector_efficiency * self.coupling_efficiency
    }

    /// Coincidence rate per mW of a pure-solvent measurement, excluding accidentals.
    pub fn true_coincidences_per_mw(&self) -> f64 {
        self.pairs_per_mw * self.solvent_transmission * 0.5 * self.detection_probability().powi(2)
    }
}

/// Linear source response k_cal·P, P in mW.
pub fn pair_rate_from_pump(power: Power, pairs_per_mw: f64) -> Rate {
    Rate::new(pairs_per_mw * power.milliwatts()).expect("non-negative pair rate")
}

/// Photon flux density at the sample (two photons per pair).
pub fn photon_flux_at_sample(
    config: &SourceConfig,
    geometry: &ExperimentGeometry,
    power: Power,
) -> FluxDensity {
    let pairs = pair_rate_from_pump(power, config.pairs_per_mw) * config.solvent_transmission;
    (pairs * 2.0) / geometry.area()
}

/// Mean rates seen by the counter, s⁻¹.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedRates {
    pub singles1: f64,
    pub singles2: f64,
    pub true_coincidences: f64,
    pub accidentals: f64,
}

impl ExpectedRates {
    pub fn coincidences(&self) -> f64 {
        self.true_coincidences + self.accidentals
    }
}

pub fn expected_rates(
    config: &SourceConfig,
    power: Power,
    sample: &SampleSpec,
    geometry: &ExperimentGeometry,
) -> Result<ExpectedRates, SimError> {
    let fraction = absorption_fraction(sample.concentration, geometry, sample.sigma_e)
        .checked()
        .map_err(|source| SimError::Model {
            label: sample.label.clone(),
            source,
        })?;
    let at_sample =
        pair_rate_from_pump(power, config.pairs_per_mw).value() * config.solvent_transmission;
    let surviving = at_sample * (1.0 - fraction);
    let p = config.detection_probability();
    // Each photon reaches either detector with probability 1/2.
    let singles = surviving * p + config.dark_count_rate.value();
    let true_coincidences = surviving * 0.5 * p * p;
    Ok(ExpectedRates {
        singles1: singles,
        singles2: singles,
        true_coincidences,
        accidentals: singles * singles * config.coincidence_window.value(),
    })
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> Result<u64, SimError> {
    if mean <= 0.0 {
        return Ok(0);
    }
    if mean.is_nan() || mean > MAX_EXPECTED_COUNT {
        return Err(SimError::Overflow { expected: mean });
    }
    let dist = Poisson::new(mean).map_err(|_| SimError::Overflow { expected: mean })?;
    Ok(dist.sample(rng) as u64)
}

/// RNG for one (sample, power) point.
pub fn point_rng(master_seed: u64, sample_index: u32, power_index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((sample_index as u64) << 32) | power_index as u64);
    rng
}

fn simulate_point(
    config: &SourceConfig,
    power: Power,
    rates: &ExpectedRates,
    rng: &mut ChaCha8Rng,
) -> Result<MeasurementSeries, SimError> {
    let dt = config.bin_duration;
    let t = dt.value();
    let other1 = (rates.singles1 - rates.true_coincidences).max(0.0) * t;
    let other2 = (rates.singles2 - rates.true_coincidences).max(0.0) * t;
    let mut bins = Vec::with_capacity(config.bins_per_point);
    for _ in 0..config.bins_per_point {
        let real = poisson(rng, rates.true_coincidences * t)?;
        let o1 = poisson(rng, other1)?;
        let o2 = poisson(rng, other2)?;
        let acc = poisson(rng, rates.accidentals * t)?.min(o1).min(o2);
        bins.push(Bin::new(dt, real + o1, real + o2, real + acc));
    }
    Ok(MeasurementSeries::new(power, bins)?)
}

/// One series per configured pump power, using sample index 0.
pub fn simulate_series(
    config: &SourceConfig,
    sample: &SampleSpec,
    geometry: &ExperimentGeometry,
) -> Result<Vec<MeasurementSeries>, SimError> {
    simulate_sample(config, 0, sample, geometry)
}

fn simulate_sample(
    config: &SourceConfig,
    sample_index: u32,
    sample: &SampleSpec,
    geometry: &ExperimentGeometry,
) -> Result<Vec<MeasurementSeries>, SimError> {
    config.validate()?;
    config
        .pump_powers
        .par_iter()
        .enumerate()
        .map(|(power_index, &power)| {
            let rates = expected_rates(config, power, sample, geometry)?;
            let mut rng = point_rng(config.rng_seed, sample_index, power_index as u32);
            simulate_point(config, power, &rates, &mut rng)
        })
        .collect()
}

/// Simulates every sample at every pump power. The first entry with zero
/// concentration is the solvent reference; further zero-concentration
/// entries are treated as ordinary samples.
pub fn run_experiment(
    config: &SourceConfig,
    samples: &[SampleSpec],
    geometry: &ExperimentGeometry,
) -> Result<Dataset, SimError> {
    config.validate()?;
    let reference = samples
        .iter()
        .position(SampleSpec::is_solvent)
        .ok_or(SimError::MissingReference)?;
    let simulated: Result<Vec<SampleSeries>, SimError> = samples
        .par_iter()
        .enumerate()
        .map(|(i, sample)| {
            Ok(SampleSeries {
                label: sample.label.clone(),
                concentration: sample.concentration,
                reference: i == reference,
                series: simulate_sample(config, i as u32, sample, geometry)?,
            })
        })
        .collect();
    Ok(Dataset {
        samples: simulated?,
    })
}
