//! Interaction-region geometry and the rate equations linking cross
//! sections, concentration, flux and the absorbed-pair rate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{
    constants, molar_to_number_density, Area, Concentration, CrossSectionE, CrossSectionR,
    FluxDensity, Length, Rate, UnitError, Volume,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Unit(#[from] UnitError),
    #[error("crossover flux is undefined when the random TPA cross section is zero")]
    UndefinedCrossover,
    #[error("absorption fraction {0} >= 1: the linear absorption model has broken down")]
    Breakdown(f64),
}

/// How the transverse interaction area is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum AreaModel {
    /// A = π·w0².
    Gaussian,
    /// A fixed area in cm², e.g. a quoted order-of-magnitude value.
    Override(Area),
}

/// Collimated-cylinder interaction region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentGeometry {
    beam_waist: Length,
    wavelength: Length,
    path_length: Length,
    area: Area,
    area_model: AreaModel,
}

impl ExperimentGeometry {
    pub fn new(
        beam_waist: Length,
        wavelength: Length,
        path_length: Length,
        area_model: AreaModel,
    ) -> Result<Self, UnitError> {
        let beam_waist = Length::positive(beam_waist.value())?;
        let wavelength = Length::positive(wavelength.value())?;
        let path_length = Length::positive(path_length.value())?;
        let area = match area_model {
            AreaModel::Gaussian => beam_area(beam_waist)?,
            AreaModel::Override(a) => Area::positive(a.value())?,
        };
        Ok(Self {
            beam_waist,
            wavelength,
            path_length,
            area,
            area_model,
        })
    }

    pub fn beam_waist(&self) -> Length {
        self.beam_waist
    }

    pub fn wavelength(&self) -> Length {
        self.wavelength
    }

    pub fn path_length(&self) -> Length {
        self.path_length
    }

    pub fn area(&self) -> Area {
        self.area
    }

    pub fn area_model(&self) -> AreaModel {
        self.area_model
    }

    /// V = A·L.
    pub fn volume(&self) -> Volume {
        self.area * self.path_length
    }

    pub fn rayleigh_range(&self) -> Length {
        // Inputs were validated positive at construction.
        Length::new(PI * self.beam_waist.value().powi(2) / self.wavelength.value())
            .expect("validated geometry")
    }

    /// True when the beam stays collimated over the whole path
    /// (Rayleigh range at least half the path length).
    pub fn collimated(&self) -> bool {
        self.rayleigh_range().value() >= 0.5 * self.path_length.value()
    }
}

/// One solution: solute concentration and its cross sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub label: String,
    pub concentration: Concentration,
    pub sigma_e: CrossSectionE,
    #[serde(default)]
    pub delta_r: CrossSectionR,
}

impl SampleSpec {
    pub fn new(
        label: impl Into<String>,
        concentration: Concentration,
        sigma_e: CrossSectionE,
    ) -> Self {
        Self {
            label: label.into(),
            concentration,
            sigma_e,
            delta_r: CrossSectionR::ZERO,
        }
    }

    /// A pure-solvent reference (c = 0).
    pub fn solvent(label: impl Into<String>) -> Self {
        Self::new(label, Concentration::ZERO, CrossSectionE::ZERO)
    }

    pub fn is_solvent(&self) -> bool {
        self.concentration.value() == 0.0
    }
}

/// Gaussian-beam transverse area π·w0².
pub fn beam_area(w0: Length) -> Result<Area, UnitError> {
    let w0 = Length::positive(w0.value())?;
    Area::new(PI * w0.value() * w0.value())
}

/// Rayleigh range π·w0²/λ.
pub fn rayleigh_range(w0: Length, wavelength: Length) -> Result<Length, UnitError> {
    let w0 = Length::positive(w0.value())?;
    let wavelength = Length::positive(wavelength.value())?;
    Length::new(PI * w0.value() * w0.value() / wavelength.value())
}

/// Per-molecule TPA rate σ_E·φ + δ_R·φ².
pub fn tpa_rate(flux: FluxDensity, sigma_e: CrossSectionE, delta_r: CrossSectionR) -> Rate {
    let phi = flux.value();
    Rate::new(sigma_e.value() * phi + delta_r.value() * phi * phi).expect("non-negative terms")
}

/// Per-molecule ETPA rate 2·σ_E·φ′ for a pair flux density φ′.
pub fn etpa_rate(pair_flux: FluxDensity, sigma_e: CrossSectionE) -> Rate {
    Rate::new(2.0 * sigma_e.value() * pair_flux.value()).expect("non-negative terms")
}

/// Flux at which the linear (entangled) and quadratic (random) terms are equal.
pub fn crossover_flux(
    sigma_e: CrossSectionE,
    delta_r: CrossSectionR,
) -> Result<FluxDensity, ModelError> {
    if delta_r.value() == 0.0 {
        return Err(ModelError::UndefinedCrossover);
    }
    Ok(FluxDensity::new(sigma_e.value() / delta_r.value())?)
}

/// Fraction of incident pairs absorbed, c·V·N_A·σ_E/A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorptionFraction {
    value: f64,
}

impl AbsorptionFraction {
    pub fn value(self) -> f64 {
        self.value
    }

    /// Linear model no longer meaningful (would absorb every pair or more).
    pub fn breakdown(self) -> bool {
        self.value >= 1.0
    }

    /// The fraction, or [`ModelError::Breakdown`] when flagged.
    pub fn checked(self) -> Result<f64, ModelError> {
        if self.breakdown() {
            Err(ModelError::Breakdown(self.value))
        } else {
            Ok(self.value)
        }
    }
}

pub fn absorption_fraction(
    c: Concentration,
    geometry: &ExperimentGeometry,
    sigma_e: CrossSectionE,
) -> AbsorptionFraction {
    let molecules = molar_to_number_density(c).value() * geometry.volume().value();
    AbsorptionFraction {
        value: molecules * sigma_e.value() / geometry.area().value(),
    }
}

/// Absorbed pair rate for a given detected solvent pair rate. The returned
/// fraction carries the breakdown flag.
pub fn absorbed_pair_rate(
    c: Concentration,
    geometry: &ExperimentGeometry,
    sigma_e: CrossSectionE,
    r_solvent: Rate,
) -> (Rate, AbsorptionFraction) {
    let fraction = absorption_fraction(c, geometry, sigma_e);
    (r_solvent * fraction.value(), fraction)
}

/// Molecules in the interaction volume.
pub fn molecule_count(c: Concentration, geometry: &ExperimentGeometry) -> f64 {
    c.value() / constants::CM3_PER_LITRE * constants::AVOGADRO * geometry.volume().value()
}
