//! Full dataset analysis: calibration, absorbed-rate fits and the
//! concentration table, driven by [`AnalysisOptions`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{
    calibrate_pump, compute_r_abs, concentration_series, sigma_e_from_slope, summarize_series,
    AbsorbedRate, Calibration, ConcentrationTable, EstimatorError, RateEstimate, SeriesSummary,
    SigmaEResult, SlopeEstimate, Weighting,
};
use crate::fit::{FitPoint, FitRegistry, FitResult};
use crate::model::ExperimentGeometry;
use crate::series::{Dataset, SampleSeries};
use crate::units::{Concentration, Power, Time};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("dataset has no solvent reference series")]
    MissingReference,
    #[error("dataset has no sample series besides the reference")]
    NoSamples,
    #[error("sample '{label}': no pump power shared with the reference")]
    NoOverlap { label: String },
    #[error("{context}: {source}")]
    Estimator {
        context: String,
        #[source]
        source: EstimatorError,
    },
}

fn ctx(context: impl Into<String>) -> impl FnOnce(EstimatorError) -> AnalysisError {
    let context = context.into();
    move |source| AnalysisError::Estimator { context, source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub weighting: Weighting,
    pub subtract_accidentals: bool,
    /// Window used for accidental subtraction.
    pub coincidence_window: Time,
    /// Name of a [`FitRegistry`] entry.
    pub fit_method: String,
    /// Fractional uncertainty of A and V added in quadrature to σ_E.
    pub geometry_uncertainty: f64,
    pub calibration_through_origin: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            weighting: Weighting::Std,
            subtract_accidentals: false,
            coincidence_window: Time::new(9e-9).expect("positive"),
            fit_method: FitRegistry::DEFAULT.to_string(),
            geometry_uncertainty: 0.0,
            calibration_through_origin: true,
        }
    }
}

/// One point of the absorbed-rate fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorptionPoint {
    /// Calibrated solvent rate at this pump power.
    pub r_solvent: f64,
    pub r_abs: AbsorbedRate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleAnalysis {
    pub label: String,
    pub concentration: Concentration,
    pub summaries: Vec<SeriesSummary>,
    pub points: Vec<AbsorptionPoint>,
    pub fit: FitResult,
    /// `Err` carries the reason σ_E could not be extracted.
    pub sigma_e: Result<SigmaEResult, EstimatorError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub options: AnalysisOptions,
    pub reference_label: String,
    pub reference_summaries: Vec<SeriesSummary>,
    pub calibration: Calibration,
    pub samples: Vec<SampleAnalysis>,
    pub table: Option<ConcentrationTable>,
    pub warnings: Vec<String>,
}

fn summarize_all(
    s: &SampleSeries,
    window: Option<Time>,
) -> Result<Vec<SeriesSummary>, AnalysisError> {
    s.series
        .iter()
        .map(|m| summarize_series(m, window).map_err(ctx(format!("sample '{}'", s.label))))
        .collect()
}

pub fn analyze(
    dataset: &Dataset,
    geometry: &ExperimentGeometry,
    options: &AnalysisOptions,
    registry: &FitRegistry,
) -> Result<Analysis, AnalysisError> {
    let method = registry
        .get(&options.fit_method)
        .map_err(|e| ctx("fit method")(EstimatorError::Fit(e)))?;
    let reference = dataset.reference().ok_or(AnalysisError::MissingReference)?;
    let window = options
        .subtract_accidentals
        .then_some(options.coincidence_window);

    let reference_summaries = summarize_all(reference, window)?;
    let calibration_points: Vec<RateEstimate> = reference_summaries
        .iter()
        .map(|s| s.estimate(options.weighting))
        .collect();
    let calibration = calibrate_pump(&calibration_points, options.calibration_through_origin)
        .map_err(ctx(format!("calibration on '{}'", reference.label)))?;

    let measured: Vec<&SampleSeries> = dataset.measured().collect();
    if measured.is_empty() {
        return Err(AnalysisError::NoSamples);
    }

    let samples: Result<Vec<SampleAnalysis>, AnalysisError> = measured
        .par_iter()
        .map(|sample| {
            let summaries = summarize_all(sample, window)?;
            let mut points = Vec::new();
            for s in &summaries {
                let Some(solvent) = reference_summaries
                    .iter()
                    .find(|r| r.pump_power == s.pump_power)
                else {
                    continue;
                };
                let r_abs = compute_r_abs(
                    &solvent.estimate(options.weighting),
                    &s.estimate(options.weighting),
                )
                .map_err(ctx(format!("sample '{}'", sample.label)))?;
                points.push(AbsorptionPoint {
                    r_solvent: calibration.rate_at(s.pump_power),
                    r_abs,
                });
            }
            if points.is_empty() {
                return Err(AnalysisError::NoOverlap {
                    label: sample.label.clone(),
                });
            }
            let fit_points: Vec<FitPoint> = points
                .iter()
                .map(|p| FitPoint::new(p.r_solvent, p.r_abs.mean, p.r_abs.sigma))
                .collect();
            let fit = method
                .fit(&fit_points)
                .map_err(|e| ctx(format!("fit for '{}'", sample.label))(e.into()))?;
            let sigma_e =
                sigma_e_from_slope(SlopeEstimate::from(&fit), sample.concentration, geometry).map(
                    |r| {
                        r.with_label(sample.label.clone())
                            .with_geometry_uncertainty(options.geometry_uncertainty)
                    },
                );
            Ok(SampleAnalysis {
                label: sample.label.clone(),
                concentration: sample.concentration,
                summaries,
                points,
                fit,
                sigma_e,
            })
        })
        .collect();
    let samples = samples?;

    let mut warnings = Vec::new();
    if !geometry.collimated() {
        warnings.push("Rayleigh range is shorter than half the path length; the cylinder approximation is poor".into());
    }
    for s in &samples {
        if let Err(e) = &s.sigma_e {
            warnings.push(format!("sample '{}': {e}", s.label));
        }
        let negative = s.points.iter().filter(|p| p.r_abs.negative()).count();
        if negative > 0 {
            warnings.push(format!(
                "sample '{}': {negative} negative R_abs point(s) kept in the fit",
                s.label
            ));
        }
        if s.fit.slope >= 1.0 {
            warnings.push(format!(
                "sample '{}': slope {} >= 1, linear absorption model broken down",
                s.label, s.fit.slope
            ));
        }
    }
    let results: Vec<SigmaEResult> = samples
        .iter()
        .filter_map(|s| s.sigma_e.clone().ok())
        .collect();
    let table = if results.is_empty() {
        None
    } else {
        match concentration_series(results) {
            Ok(t) => Some(t),
            Err(e) => {
                warnings.push(format!("concentration table: {e}"));
                None
            }
        }
    };

    Ok(Analysis {
        options: options.clone(),
        reference_label: reference.label.clone(),
        reference_summaries,
        calibration,
        samples,
        table,
        warnings,
    })
}

impl Analysis {
    pub fn sample(&self, label: &str) -> Option<&SampleAnalysis> {
        self.samples.iter().find(|s| s.label == label)
    }

    pub fn reference_at(&self, power: Power) -> Option<&SeriesSummary> {
        self.reference_summaries
            .iter()
            .find(|s| s.pump_power == power)
    }
}
