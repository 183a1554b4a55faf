//! Simulation and analysis of entangled two-photon absorption (ETPA)
//! measured by coincidence counting.
//!
//! * [`units`]: dimensioned quantities in CGS-photon units.
//! * [`model`]: interaction geometry and the linear absorption model.
//! * [`sim`]: seeded Poisson simulation of pump sweeps and coincidence counts.
//! * [`estimator`] / [`analysis`]: calibration, origin-forced fits and σ_E extraction.
//! * [`fit`]: origin-forced estimators selectable by name.
//! * [`presets`]: the published 808 nm parameters and σ_E table.

pub mod analysis;
pub mod estimator;
pub mod fit;
pub mod model;
pub mod presets;
pub mod series;
pub mod sim;
pub mod units;

pub use analysis::{analyze, Analysis, AnalysisError, AnalysisOptions, SampleAnalysis};
pub use estimator::{
    calibrate_pump, compute_r_abs, concentration_series, sigma_e_from_slope, summarize_series,
    ConcentrationTable, EstimatorError, RateEstimate, SigmaEResult, SlopeEstimate, Weighting,
};
pub use fit::{fit_through_origin, FitError, FitPoint, FitRegistry, FitResult, OriginFit};
pub use model::{
    absorbed_pair_rate, absorption_fraction, beam_area, crossover_flux, etpa_rate, rayleigh_range,
    tpa_rate, AreaModel, ExperimentGeometry, ModelError, SampleSpec,
};
pub use series::{Bin, Channel, Dataset, MeasurementSeries, SampleSeries};
pub use sim::{
    expected_rates, pair_rate_from_pump, run_experiment, simulate_series, SimError, SourceConfig,
};
