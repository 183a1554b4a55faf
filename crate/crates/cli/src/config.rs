//! Run configuration: a sectioned key-value (TOML) file.
//!
//! ```toml
//! seed = 7
//!
//! [geometry]
//! beam_waist_um = 61.0
//! wavelength_nm = 808.0
//! path_length_mm = 10.0
//! area_cm2 = 2e-4          # omit for pi*w0^2
//!
//! [source]
//! pump_powers_mw = [1, 2, 5, 10, 20]
//! pairs_per_mw = 1.25e5
//! detector_efficiency = 0.65
//! coupling_efficiency = 0.19
//! coincidence_window_ns = 9.0
//! bin_duration_s = 1.0
//! bins_per_point = 60
//! solvent_transmission = 0.8
//! dark_count_rate = 0.0
//!
//! [[sample]]
//! label = "toluene"
//! concentration_molar = 0.0
//!
//! [[sample]]
//! label = "ZnTPP-63uM"
//! concentration_molar = 63e-6
//! sigma_e_cm2 = 5.1e-18
//! delta_r_gm = 0.0
//!
//! [io]
//! dataset = "dataset.csv"
//! out_dir = "out"
//!
//! [analysis]
//! weighting = "std"             # or "stderr"
//! subtract_accidentals = false
//! fit_method = "weighted"       # any registered fit: weighted, unweighted, birge
//! geometry_uncertainty = 0.0
//! calibration_through_origin = true
//! ```

use std::path::{Path, PathBuf};

use etpa_core::analysis::AnalysisOptions;
use etpa_core::model::{AreaModel, ExperimentGeometry, SampleSpec};
use etpa_core::sim::SourceConfig;
use etpa_core::units::{
    Area, Concentration, CrossSectionE, CrossSectionR, Length, Power, Rate, Time,
};
use etpa_core::{presets, FitRegistry, Weighting};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("config [{section}] {message}")]
    Invalid {
        section: &'static str,
        message: String,
    },
}

fn invalid(section: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        section,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Analyze,
    Roundtrip,
    Demo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryBlock {
    pub beam_waist_um: f64,
    pub wavelength_nm: f64,
    pub path_length_mm: f64,
    pub area_cm2: Option<f64>,
}

impl Default for GeometryBlock {
    fn default() -> Self {
        Self {
            beam_waist_um: presets::BEAM_WAIST_UM,
            wavelength_nm: presets::PAIR_WAVELENGTH_NM,
            path_length_mm: presets::PATH_LENGTH_MM,
            area_cm2: Some(presets::QUOTED_AREA_CM2),
        }
    }
}

impl GeometryBlock {
    pub fn build(&self) -> Result<ExperimentGeometry, ConfigError> {
        let err = |e: etpa_core::units::UnitError| invalid("geometry", e.to_string());
        let area_model = match self.area_cm2 {
            Some(a) => AreaModel::Override(Area::new(a).map_err(err)?),
            None => AreaModel::Gaussian,
        };
        ExperimentGeometry::new(
            Length::from_micrometres(self.beam_waist_um).map_err(err)?,
            Length::from_nanometres(self.wavelength_nm).map_err(err)?,
            Length::from_millimetres(self.path_length_mm).map_err(err)?,
            area_model,
        )
        .map_err(err)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceBlock {
    pub pump_powers_mw: Vec<f64>,
    pub pairs_per_mw: f64,
    pub detector_efficiency: f64,
    pub coupling_efficiency: f64,
    pub coincidence_window_ns: f64,
    pub bin_duration_s: f64,
    pub bins_per_point: usize,
    pub solvent_transmission: f64,
    pub dark_count_rate: f64,
}

impl Default for SourceBlock {
    fn default() -> Self {
        let d = SourceConfig::default();
        Self {
            pump_powers_mw: (1..=20).map(f64::from).collect(),
            pairs_per_mw: d.pairs_per_mw,
            detector_efficiency: d.detector_efficiency,
            coupling_efficiency: d.coupling_efficiency,
            coincidence_window_ns: 9.0,
            bin_duration_s: d.bin_duration.value(),
            bins_per_point: d.bins_per_point,
            solvent_transmission: d.solvent_transmission,
            dark_count_rate: d.dark_count_rate.value(),
        }
    }
}

impl SourceBlock {
    pub fn build(&self, seed: u64) -> Result<SourceConfig, ConfigError> {
        let err = |e: etpa_core::units::UnitError| invalid("source", e.to_string());
        if self.pump_powers_mw.is_empty() {
            return Err(invalid("source", "pump_powers_mw is empty"));
        }
        let pump_powers = self
            .pump_powers_mw
            .iter()
            .map(|&p| Power::from_milliwatts(p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let config = SourceConfig {
            pump_powers,
            pairs_per_mw: self.pairs_per_mw,
            detector_efficiency: self.detector_efficiency,
            coupling_efficiency: self.coupling_efficiency,
            coincidence_window: Time::new(self.coincidence_window_ns / 1e9).map_err(err)?,
            bin_duration: Time::new(self.bin_duration_s).map_err(err)?,
            bins_per_point: self.bins_per_point,
            solvent_transmission: self.solvent_transmission,
            dark_count_rate: Rate::new(self.dark_count_rate).map_err(err)?,
            rng_seed: seed,
        };
        config
            .validate()
            .map_err(|e| invalid("source", e.to_string()))?;
        Ok(config)
    }

    pub fn coincidence_window(&self) -> Result<Time, ConfigError> {
        Time::positive(self.coincidence_window_ns / 1e9)
            .map_err(|e| invalid("source", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleBlock {
    pub label: String,
    pub concentration_molar: f64,
    #[serde(default)]
    pub sigma_e_cm2: f64,
    #[serde(default)]
    pub delta_r_gm: f64,
}

impl SampleBlock {
    pub fn build(&self) -> Result<SampleSpec, ConfigError> {
        let err =
            |e: etpa_core::units::UnitError| invalid("sample", format!("'{}': {e}", self.label));
        crate::dataset::check_label(&self.label).map_err(|m| invalid("sample", m))?;
        Ok(SampleSpec {
            label: self.label.clone(),
            concentration: Concentration::new(self.concentration_molar).map_err(err)?,
            sigma_e: CrossSectionE::new(self.sigma_e_cm2).map_err(err)?,
            delta_r: CrossSectionR::from_gm(self.delta_r_gm).map_err(err)?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoBlock {
    pub dataset: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisBlock {
    pub weighting: Weighting,
    pub subtract_accidentals: bool,
    pub fit_method: String,
    pub geometry_uncertainty: f64,
    pub calibration_through_origin: bool,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        let d = AnalysisOptions::default();
        Self {
            weighting: d.weighting,
            subtract_accidentals: d.subtract_accidentals,
            fit_method: d.fit_method,
            geometry_uncertainty: d.geometry_uncertainty,
            calibration_through_origin: d.calibration_through_origin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub geometry: GeometryBlock,
    pub source: SourceBlock,
    #[serde(rename = "sample")]
    pub samples: Vec<SampleBlock>,
    pub io: IoBlock,
    pub analysis: AnalysisBlock,
}

impl Default for RunConfig {
    /// Quoted geometry, default source, toluene reference plus the 63 µM ZnTPP sample.
    fn default() -> Self {
        let sample = |s: SampleSpec| SampleBlock {
            label: s.label,
            concentration_molar: s.concentration.value(),
            sigma_e_cm2: s.sigma_e.value(),
            delta_r_gm: s.delta_r.gm(),
        };
        Self {
            mode: None,
            seed: None,
            geometry: GeometryBlock::default(),
            source: SourceBlock::default(),
            samples: vec![
                sample(SampleSpec::solvent("toluene")),
                sample(presets::zntpp_63um()),
            ],
            io: IoBlock::default(),
            analysis: AnalysisBlock::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Canonical serialized form, the input of [`Self::hash`]. The output
    /// directory does not affect results and is left out.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.io.out_dir = None;
        toml::to_string(&c).expect("config serializes")
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn samples(&self) -> Result<Vec<SampleSpec>, ConfigError> {
        self.samples.iter().map(SampleBlock::build).collect()
    }

    pub fn analysis_options(&self) -> Result<AnalysisOptions, ConfigError> {
        let a = &self.analysis;
        if !(a.geometry_uncertainty.is_finite() && a.geometry_uncertainty >= 0.0) {
            return Err(invalid(
                "analysis",
                "geometry_uncertainty must be finite and non-negative",
            ));
        }
        FitRegistry::with_builtins()
            .get(&a.fit_method)
            .map_err(|e| invalid("analysis", e.to_string()))?;
        Ok(AnalysisOptions {
            weighting: a.weighting,
            subtract_accidentals: a.subtract_accidentals,
            coincidence_window: self.source.coincidence_window()?,
            fit_method: a.fit_method.clone(),
            geometry_uncertainty: a.geometry_uncertainty,
            calibration_through_origin: a.calibration_through_origin,
        })
    }

    /// Checks the blocks the given mode needs before anything runs.
    pub fn validate(&self, mode: Mode) -> Result<(), ConfigError> {
        self.geometry.build()?;
        self.analysis_options()?;
        for (name, p) in [("dataset", &self.io.dataset), ("out_dir", &self.io.out_dir)] {
            if p.as_ref().is_some_and(|p| p.as_os_str().is_empty()) {
                return Err(invalid("io", format!("{name} is empty")));
            }
        }
        match mode {
            Mode::Simulate | Mode::Roundtrip => {
                self.source.build(self.seed.unwrap_or(0))?;
                let samples = self.samples()?;
                if !samples.iter().any(SampleSpec::is_solvent) {
                    return Err(invalid(
                        "sample",
                        "no pure-solvent entry (concentration_molar = 0)",
                    ));
                }
                let mut labels: Vec<&str> = samples.iter().map(|s| s.label.as_str()).collect();
                labels.sort_unstable();
                if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
                    return Err(invalid("sample", format!("duplicate label '{}'", w[0])));
                }
            }
            Mode::Analyze | Mode::Demo => {}
        }
        Ok(())
    }
}
