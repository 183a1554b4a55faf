//! Cross-section estimation from coincidence-rate summaries.
//!
//! The chain is: summarize each power point, calibrate pump power against
//! the solvent coincidence rate, form `R_abs = R_solvent - R_sample`, fit
//! `R_abs` against `R_solvent` through the origin, and invert the slope
//! `c·V·N_A·σ_E/A` for σ_E.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{fit_line, fit_through_origin, FitError, FitPoint, FitResult};
use crate::model::ExperimentGeometry;
use crate::series::{Channel, MeasurementSeries, RateSummary};
use crate::units::{molar_to_number_density, Concentration, CrossSectionE, Power, Time};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("series has no bins")]
    EmptySeries,
    #[error("calibration needs at least two distinct pump powers")]
    DegenerateCalibration,
    #[error("cannot pair rates measured at {solvent_mw} mW and {sample_mw} mW")]
    Pairing { solvent_mw: f64, sample_mw: f64 },
    #[error("concentration is zero: the slope only fixes the product sigma_E*c, so sigma_E is undetermined")]
    ZeroConcentration,
    #[error("negative slope {0}: no absorption detected")]
    NegativeSlope(f64),
    #[error("no results to tabulate")]
    EmptyTable,
    #[error("duplicate concentration {0} mol/L in concentration series")]
    DuplicateConcentration(f64),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Which per-point spread is used as the fit uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Sample standard deviation of the per-bin rates.
    #[default]
    Std,
    /// Standard error of the mean, std/√n.
    Stderr,
}

impl FromStr for Weighting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "std" => Ok(Weighting::Std),
            "stderr" => Ok(Weighting::Stderr),
            other => Err(format!(
                "unknown weighting '{other}' (expected std or stderr)"
            )),
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Std => "std",
            Weighting::Stderr => "stderr",
        })
    }
}

/// Coincidence and singles statistics of one power point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSummary {
    pub pump_power: Power,
    pub coincidences: RateSummary,
    pub singles1: RateSummary,
    pub singles2: RateSummary,
    pub accidentals_subtracted: bool,
}

impl SeriesSummary {
    pub fn estimate(&self, weighting: Weighting) -> RateEstimate {
        RateEstimate {
            pump_power: self.pump_power,
            mean: self.coincidences.mean,
            sigma: match weighting {
                Weighting::Std => self.coincidences.std,
                Weighting::Stderr => self.coincidences.stderr,
            },
        }
    }
}

/// Summarizes a series. With `accidental_window = Some(τ)` every bin's
/// coincidence rate is corrected by `s1·s2·τ/Δt²` before averaging.
pub fn summarize_series(
    series: &MeasurementSeries,
    accidental_window: Option<Time>,
) -> Result<SeriesSummary, EstimatorError> {
    if series.bins().is_empty() {
        return Err(EstimatorError::EmptySeries);
    }
    let coincidences = match accidental_window {
        None => series.summary(Channel::Coincidences),
        Some(tau) => {
            let rates: Vec<(f64, f64)> = series
                .bins()
                .iter()
                .map(|b| {
                    let dt = b.duration.value();
                    let accidental = b.singles1 as f64 * b.singles2 as f64 * tau.value() / dt;
                    ((b.coincidences as f64 - accidental) / dt, dt)
                })
                .collect();
            RateSummary::from_rates(&rates).ok_or(EstimatorError::EmptySeries)?
        }
    };
    Ok(SeriesSummary {
        pump_power: series.pump_power(),
        coincidences,
        singles1: series.summary(Channel::Singles1),
        singles2: series.summary(Channel::Singles2),
        accidentals_subtracted: accidental_window.is_some(),
    })
}

/// A mean rate with its uncertainty, tagged by pump power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub pump_power: Power,
    pub mean: f64,
    pub sigma: f64,
}

/// Linear map from pump power (mW) to solvent coincidence rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub fit: FitResult,
}

impl Calibration {
    pub fn rate_at(&self, power: Power) -> f64 {
        self.fit.predict(power.milliwatts())
    }
}

/// Weighted fit of solvent rate against pump power in mW.
pub fn calibrate_pump(
    points: &[RateEstimate],
    through_origin: bool,
) -> Result<Calibration, EstimatorError> {
    let first = points
        .first()
        .ok_or(EstimatorError::DegenerateCalibration)?
        .pump_power;
    if points.iter().all(|p| p.pump_power == first) {
        return Err(EstimatorError::DegenerateCalibration);
    }
    let fit_points: Vec<FitPoint> = points
        .iter()
        .map(|p| FitPoint::new(p.pump_power.milliwatts(), p.mean, p.sigma))
        .collect();
    let fit = if through_origin {
        fit_through_origin(&fit_points)
    } else {
        fit_line(&fit_points)
    }
    .map_err(|e| match e {
        FitError::Degenerate(_) => EstimatorError::DegenerateCalibration,
        other => other.into(),
    })?;
    Ok(Calibration { fit })
}

/// Absorbed-pair rate at one pump power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorbedRate {
    pub pump_power: Power,
    pub mean: f64,
    pub sigma: f64,
}

impl AbsorbedRate {
    /// Noise can push the difference below zero; such points are kept.
    pub fn negative(&self) -> bool {
        self.mean < 0.0
    }
}

/// `R_solvent - R_sample` with uncertainties added in quadrature.
pub fn compute_r_abs(
    solvent: &RateEstimate,
    sample: &RateEstimate,
) -> Result<AbsorbedRate, EstimatorError> {
    if solvent.pump_power != sample.pump_power {
        return Err(EstimatorError::Pairing {
            solvent_mw: solvent.pump_power.milliwatts(),
            sample_mw: sample.pump_power.milliwatts(),
        });
    }
    Ok(AbsorbedRate {
        pump_power: solvent.pump_power,
        mean: solvent.mean - sample.mean,
        sigma: solvent.sigma.hypot(sample.sigma),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeEstimate {
    pub slope: f64,
    pub stderr: f64,
}

impl From<&FitResult> for SlopeEstimate {
    fn from(f: &FitResult) -> Self {
        Self {
            slope: f.slope,
            stderr: f.slope_stderr,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaEResult {
    pub sigma_e: CrossSectionE,
    pub sigma_e_uncertainty: CrossSectionE,
    pub concentration: Concentration,
    pub label: String,
}

impl SigmaEResult {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Adds a fractional geometry (A, V) uncertainty in quadrature.
    pub fn with_geometry_uncertainty(mut self, fraction: f64) -> Self {
        let extra = self.sigma_e.value() * fraction.abs();
        self.sigma_e_uncertainty =
            CrossSectionE::new(self.sigma_e_uncertainty.value().hypot(extra))
                .expect("non-negative");
        self
    }

    pub fn relative_uncertainty(&self) -> f64 {
        self.sigma_e_uncertainty.value() / self.sigma_e.value()
    }
}

/// Inverts slope = c·V·N_A·σ_E/A. Geometry is taken as exact.
pub fn sigma_e_from_slope(
    slope: SlopeEstimate,
    c: Concentration,
    geometry: &ExperimentGeometry,
) -> Result<SigmaEResult, EstimatorError> {
    if c.value() == 0.0 {
        return Err(EstimatorError::ZeroConcentration);
    }
    if slope.slope < 0.0 {
        return Err(EstimatorError::NegativeSlope(slope.slope));
    }
    let scale =
        geometry.area().value() / (molar_to_number_density(c).value() * geometry.volume().value());
    Ok(SigmaEResult {
        sigma_e: CrossSectionE::new(slope.slope * scale)
            .map_err(|_| EstimatorError::NegativeSlope(slope.slope))?,
        sigma_e_uncertainty: CrossSectionE::new(slope.stderr.abs() * scale)
            .map_err(|_| EstimatorError::NegativeSlope(slope.slope))?,
        concentration: c,
        label: String::new(),
    })
}

/// Comparison of σ_E·c between two table rows. Equal products mean equal
/// fit slopes, so such rows are indistinguishable from the slope alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductComparison {
    pub first: usize,
    pub second: usize,
    /// σ_E·c in cm² mol L⁻¹.
    pub first_product: f64,
    pub second_product: f64,
    /// |a − b| / max(a, b).
    pub relative_difference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationTable {
    pub rows: Vec<SigmaEResult>,
    pub product_diagnostics: Vec<ProductComparison>,
    /// Adjacent row pairs (i, i+1) where σ_E rises with concentration.
    pub decay_violations: Vec<(usize, usize)>,
}

impl ConcentrationTable {
    pub fn monotonic_decay(&self) -> bool {
        self.decay_violations.is_empty()
    }

    /// Diagnostic for a specific pair of rows, in either order.
    pub fn product(&self, i: usize, j: usize) -> Option<&ProductComparison> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.product_diagnostics
            .iter()
            .find(|p| p.first == a && p.second == b)
    }
}

pub fn relative_difference(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

pub fn concentration_series(
    results: Vec<SigmaEResult>,
) -> Result<ConcentrationTable, EstimatorError> {
    if results.is_empty() {
        return Err(EstimatorError::EmptyTable);
    }
    let mut rows = results;
    rows.sort_by(|a, b| a.concentration.value().total_cmp(&b.concentration.value()));
    if let Some(w) = rows
        .windows(2)
        .find(|w| w[0].concentration == w[1].concentration)
    {
        return Err(EstimatorError::DuplicateConcentration(
            w[0].concentration.value(),
        ));
    }
    let product = |r: &SigmaEResult| r.sigma_e.value() * r.concentration.value();
    let mut product_diagnostics = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (a, b) = (product(&rows[i]), product(&rows[j]));
            product_diagnostics.push(ProductComparison {
                first: i,
                second: j,
                first_product: a,
                second_product: b,
                relative_difference: relative_difference(a, b),
            });
        }
    }
    let decay_violations = (1..rows.len())
        .filter(|&i| rows[i].sigma_e > rows[i - 1].sigma_e)
        .map(|i| (i - 1, i))
        .collect();
    Ok(ConcentrationTable {
        rows,
        product_diagnostics,
        decay_violations,
    })
}
