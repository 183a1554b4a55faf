//! Dimensioned scalars in CGS-photon units (cm, s, photons, molecules).
//!
//! Every physical magnitude the experiment needs has its own newtype, so
//! mixing dimensions is a compile error in the typed API. [`Quantity`] is
//! the dynamically-tagged form used at configuration and serialization
//! boundaries, where mismatches are reported as [`UnitError::DimensionMismatch`].

use std::fmt;
use std::ops::{Add, Div, Mul};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Physical constants. All values are exact SI definitions.
pub mod constants {
    /// Avogadro constant, molecules per mole.
    pub const AVOGADRO: f64 = 6.022_140_76e23;
    /// One Goeppert-Mayer unit in cm⁴ s photon⁻¹ molecule⁻¹.
    pub const GM_IN_CM4_S: f64 = 1e-50;
    /// Planck constant, J s.
    pub const PLANCK: f64 = 6.626_070_15e-34;
    /// Speed of light in vacuum, m s⁻¹.
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    /// h·c in J cm, the energy-per-photon factor for wavelengths in cm.
    pub const PLANCK_C_J_CM: f64 = PLANCK * SPEED_OF_LIGHT * 100.0;
    /// Cubic centimetres per litre.
    pub const CM3_PER_LITRE: f64 = 1e3;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitError {
    #[error("{dimension} must be finite, got {value}")]
    NonFinite { dimension: Dimension, value: f64 },
    #[error("{dimension} must be non-negative, got {value}")]
    Negative { dimension: Dimension, value: f64 },
    #[error("{dimension} must be strictly positive, got {value}")]
    NonPositive { dimension: Dimension, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch {
        expected: Dimension,
        found: Dimension,
    },
}

/// The closed set of dimensions used by the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dimension {
    Power,
    Length,
    Area,
    Volume,
    Time,
    Rate,
    FluxDensity,
    Concentration,
    NumberDensity,
    CrossSectionE,
    CrossSectionR,
    Dimensionless,
}

impl Dimension {
    /// Canonical unit symbol.
    pub fn unit(self) -> &'static str {
        match self {
            Dimension::Power => "W",
            Dimension::Length => "cm",
            Dimension::Area => "cm^2",
            Dimension::Volume => "cm^3",
            Dimension::Time => "s",
            Dimension::Rate => "s^-1",
            Dimension::FluxDensity => "photons s^-1 cm^-2",
            Dimension::Concentration => "mol L^-1",
            Dimension::NumberDensity => "molecules cm^-3",
            Dimension::CrossSectionE => "cm^2 molecule^-1",
            Dimension::CrossSectionR => "cm^4 s photon^-1 molecule^-1",
            Dimension::Dimensionless => "1",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} [{}]", self, self.unit())
    }
}

fn check_magnitude(dimension: Dimension, value: f64) -> Result<f64, UnitError> {
    if !value.is_finite() {
        return Err(UnitError::NonFinite { dimension, value });
    }
    if value < 0.0 {
        return Err(UnitError::Negative { dimension, value });
    }
    Ok(value)
}

/// A value tagged with its dimension at runtime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    value: f64,
    dimension: Dimension,
}

impl Quantity {
    pub fn new(value: f64, dimension: Dimension) -> Result<Self, UnitError> {
        if dimension == Dimension::Dimensionless {
            if !value.is_finite() {
                return Err(UnitError::NonFinite { dimension, value });
            }
            return Ok(Self { value, dimension });
        }
        check_magnitude(dimension, value).map(|value| Self { value, dimension })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    fn expect(&self, other: &Quantity) -> Result<(), UnitError> {
        if self.dimension != other.dimension {
            return Err(UnitError::DimensionMismatch {
                expected: self.dimension,
                found: other.dimension,
            });
        }
        Ok(())
    }

    pub fn checked_add(self, other: Quantity) -> Result<Quantity, UnitError> {
        self.expect(&other)?;
        Quantity::new(self.value + other.value, self.dimension)
    }

    /// Subtraction; a negative physical result is rejected like any other.
    pub fn checked_sub(self, other: Quantity) -> Result<Quantity, UnitError> {
        self.expect(&other)?;
        Quantity::new(self.value - other.value, self.dimension)
    }

    /// Ratio of two like quantities.
    pub fn ratio(self, other: Quantity) -> Result<f64, UnitError> {
        self.expect(&other)?;
        Ok(self.value / other.value)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, self.dimension.unit())
    }
}

macro_rules! quantity {
    ($(#[$meta:meta])* $name:ident, $dim:expr) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
        #[serde(try_from = "f64", into = "f64")]
        pub struct $name(f64);

        impl $name {
            pub const DIMENSION: Dimension = $dim;
            pub const ZERO: $name = $name(0.0);

            /// Value in canonical units; rejects negative and non-finite input.
            pub fn new(value: f64) -> Result<Self, UnitError> {
                check_magnitude($dim, value).map($name)
            }

            /// Like [`Self::new`] but additionally rejects zero.
            pub fn positive(value: f64) -> Result<Self, UnitError> {
                let v = Self::new(value)?;
                if v.0 == 0.0 {
                    return Err(UnitError::NonPositive { dimension: $dim, value });
                }
                Ok(v)
            }

            pub fn value(self) -> f64 {
                self.0
            }
        }

        impl Add for $name {
            type Output = $name;
            fn add(self, rhs: $name) -> $name {
                $name(self.0 + rhs.0)
            }
        }

        impl Mul<f64> for $name {
            type Output = $name;
            /// Scaling by a non-negative factor.
            fn mul(self, k: f64) -> $name {
                debug_assert!(k >= 0.0, "negative scale factor");
                $name(self.0 * k)
            }
        }

        impl Div<$name> for $name {
            type Output = f64;
            fn div(self, rhs: $name) -> f64 {
                self.0 / rhs.0
            }
        }

        impl From<$name> for f64 {
            fn from(q: $name) -> f64 {
                q.0
            }
        }

        impl TryFrom<f64> for $name {
            type Error = UnitError;
            fn try_from(v: f64) -> Result<Self, UnitError> {
                $name::new(v)
            }
        }

        impl From<$name> for Quantity {
            fn from(q: $name) -> Quantity {
                Quantity { value: q.0, dimension: $dim }
            }
        }

        impl TryFrom<Quantity> for $name {
            type Error = UnitError;
            fn try_from(q: Quantity) -> Result<Self, UnitError> {
                if q.dimension != $dim {
                    return Err(UnitError::DimensionMismatch { expected: $dim, found: q.dimension });
                }
                $name::new(q.value)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{} {}", self.0, $dim.unit())
            }
        }
    };
}

quantity!(
    /// Optical power in W.
    Power,
    Dimension::Power
);
quantity!(
    /// Length in cm.
    Length,
    Dimension::Length
);
quantity!(
    /// Area in cm².
    Area,
    Dimension::Area
);
quantity!(
    /// Volume in cm³.
    Volume,
    Dimension::Volume
);
quantity!(
    /// Duration in s.
    Time,
    Dimension::Time
);
quantity!(
    /// Event rate in s⁻¹ (photons, pairs or counts per second).
    Rate,
    Dimension::Rate
);
quantity!(
    /// Photon (or pair) flux density in s⁻¹ cm⁻².
    FluxDensity,
    Dimension::FluxDensity
);
quantity!(
    /// Molar concentration in mol L⁻¹.
    Concentration,
    Dimension::Concentration
);
quantity!(
    /// Molecules per cm³.
    NumberDensity,
    Dimension::NumberDensity
);
quantity!(
    /// Entangled TPA cross section in cm² molecule⁻¹.
    CrossSectionE,
    Dimension::CrossSectionE
);
quantity!(
    /// Random (classical) TPA cross section in cm⁴ s photon⁻¹ molecule⁻¹.
    CrossSectionR,
    Dimension::CrossSectionR
);

impl Power {
    pub fn from_milliwatts(mw: f64) -> Result<Self, UnitError> {
        Power::new(mw / 1e3)
    }

    pub fn milliwatts(self) -> f64 {
        self.0 * 1e3
    }
}

impl Length {
    pub fn from_millimetres(mm: f64) -> Result<Self, UnitError> {
        Length::new(mm / 10.0)
    }

    pub fn from_micrometres(um: f64) -> Result<Self, UnitError> {
        Length::new(um / 1e4)
    }

    pub fn from_nanometres(nm: f64) -> Result<Self, UnitError> {
        Length::new(nm / 1e7)
    }

    pub fn millimetres(self) -> f64 {
        self.0 * 10.0
    }

    pub fn micrometres(self) -> f64 {
        self.0 * 1e4
    }

    pub fn nanometres(self) -> f64 {
        self.0 * 1e7
    }
}

impl Concentration {
    pub fn from_micromolar(um: f64) -> Result<Self, UnitError> {
        Concentration::new(um / 1e6)
    }

    pub fn from_millimolar(mm: f64) -> Result<Self, UnitError> {
        Concentration::new(mm / 1e3)
    }

    pub fn micromolar(self) -> f64 {
        self.0 * 1e6
    }

    pub fn millimolar(self) -> f64 {
        self.0 * 1e3
    }
}

impl CrossSectionR {
    pub fn from_gm(gm: f64) -> Result<Self, UnitError> {
        gm_to_cm4s(gm)
    }

    pub fn gm(self) -> f64 {
        cm4s_to_gm(self)
    }
}

impl Mul for Length {
    type Output = Area;
    fn mul(self, rhs: Length) -> Area {
        Area(self.0 * rhs.0)
    }
}

impl Mul<Length> for Area {
    type Output = Volume;
    fn mul(self, rhs: Length) -> Volume {
        Volume(self.0 * rhs.0)
    }
}

impl Div<Length> for Volume {
    type Output = Area;
    fn div(self, rhs: Length) -> Area {
        Area(self.0 / rhs.0)
    }
}

impl Div<Area> for Rate {
    type Output = FluxDensity;
    fn div(self, rhs: Area) -> FluxDensity {
        FluxDensity(self.0 / rhs.0)
    }
}

impl Mul<Time> for Rate {
    type Output = f64;
    /// Expected number of events in the interval.
    fn mul(self, rhs: Time) -> f64 {
        self.0 * rhs.0
    }
}

/// Converts a random TPA cross section from GM to cm⁴ s photon⁻¹ molecule⁻¹.
pub fn gm_to_cm4s(gm: f64) -> Result<CrossSectionR, UnitError> {
    check_magnitude(Dimension::CrossSectionR, gm)?;
    CrossSectionR::new(gm * constants::GM_IN_CM4_S)
}

/// Inverse of [`gm_to_cm4s`].
pub fn cm4s_to_gm(delta: CrossSectionR) -> f64 {
    delta.0 / constants::GM_IN_CM4_S
}

/// mol L⁻¹ → molecules cm⁻³.
pub fn molar_to_number_density(c: Concentration) -> NumberDensity {
    NumberDensity(c.0 / constants::CM3_PER_LITRE * constants::AVOGADRO)
}

/// molecules cm⁻³ → mol L⁻¹.
pub fn number_density_to_molar(n: NumberDensity) -> Concentration {
    Concentration(n.0 / constants::AVOGADRO * constants::CM3_PER_LITRE)
}

/// Photons per second carried by a monochromatic beam of power `power`.
pub fn power_to_photon_rate(power: Power, wavelength: Length) -> Result<Rate, UnitError> {
    if wavelength.0 <= 0.0 {
        return Err(UnitError::NonPositive {
            dimension: Dimension::Length,
            value: wavelength.0,
        });
    }
    Rate::new(power.0 * wavelength.0 / constants::PLANCK_C_J_CM)
}
