//! Published parameters of the 808 nm ZnTPP / RhB measurement.

use crate::model::{AreaModel, ExperimentGeometry, SampleSpec};
use crate::units::{Area, Concentration, CrossSectionE, Length};

pub const PUMP_WAVELENGTH_NM: f64 = 404.0;
pub const PAIR_WAVELENGTH_NM: f64 = 808.0;
pub const BEAM_WAIST_UM: f64 = 61.0;
pub const PATH_LENGTH_MM: f64 = 10.0;
pub const QUOTED_AREA_CM2: f64 = 2e-4;
pub const QUOTED_VOLUME_CM3: f64 = 2e-4;
pub const QUOTED_RAYLEIGH_MM: f64 = 14.0;
/// Total singles at maximum pump power, s⁻¹.
pub const QUOTED_SINGLES: f64 = 5e5;
/// Entangled photon flux density at the sample, photons cm⁻² s⁻¹.
pub const QUOTED_FLUX: f64 = 1e11;

/// Quoted geometry with the quoted 2×10⁻⁴ cm² area.
pub fn quoted_geometry() -> ExperimentGeometry {
    geometry(AreaModel::Override(
        Area::new(QUOTED_AREA_CM2).expect("positive"),
    ))
}

pub fn geometry(area_model: AreaModel) -> ExperimentGeometry {
    ExperimentGeometry::new(
        Length::from_micrometres(BEAM_WAIST_UM).expect("positive"),
        Length::from_nanometres(PAIR_WAVELENGTH_NM).expect("positive"),
        Length::from_millimetres(PATH_LENGTH_MM).expect("positive"),
        area_model,
    )
    .expect("valid geometry")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Molecule {
    ZnTpp,
    RhB,
}

impl Molecule {
    pub fn name(self) -> &'static str {
        match self {
            Molecule::ZnTpp => "ZnTPP",
            Molecule::RhB => "RhB",
        }
    }

    pub fn solvent(self) -> &'static str {
        match self {
            Molecule::ZnTpp => "toluene",
            Molecule::RhB => "methanol",
        }
    }
}

/// One reported σ_E measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedRow {
    pub molecule: Molecule,
    pub concentration: Concentration,
    pub sigma_e: CrossSectionE,
    pub uncertainty: CrossSectionE,
}

impl PublishedRow {
    pub fn label(&self) -> String {
        match self.molecule {
            Molecule::ZnTpp => format!(
                "{}-{}uM",
                self.molecule.name(),
                tidy(self.concentration.micromolar())
            ),
            Molecule::RhB => format!(
                "{}-{}mM",
                self.molecule.name(),
                tidy(self.concentration.millimolar())
            ),
        }
    }

    pub fn sample(&self) -> SampleSpec {
        SampleSpec::new(self.label(), self.concentration, self.sigma_e)
    }
}

/// Drops conversion round-off (119.99999999999999 -> 120) for labels.
fn tidy(x: f64) -> String {
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn row(
    molecule: Molecule,
    concentration: Concentration,
    sigma_e18: f64,
    unc_e18: f64,
) -> PublishedRow {
    PublishedRow {
        molecule,
        concentration,
        sigma_e: CrossSectionE::new(sigma_e18 * 1e-18).expect("non-negative"),
        uncertainty: CrossSectionE::new(unc_e18 * 1e-18).expect("non-negative"),
    }
}

/// σ_E (×10⁻¹⁸ cm² molecule⁻¹) against concentration for both dyes.
pub fn published_table() -> Vec<PublishedRow> {
    let um = |x| Concentration::from_micromolar(x).expect("non-negative");
    let mm = |x| Concentration::from_millimolar(x).expect("non-negative");
    use Molecule::*;
    vec![
        row(ZnTpp, um(17.0), 42.0, 5.2),
        row(ZnTpp, um(63.0), 5.1, 0.46),
        row(ZnTpp, um(120.0), 3.2, 0.20),
        row(ZnTpp, um(230.0), 1.1, 0.07),
        row(ZnTpp, um(1400.0), 0.27, 0.026),
        row(RhB, mm(0.038), 4.2, 0.34),
        row(RhB, mm(0.19), 0.80, 0.068),
        row(RhB, mm(4.5), 0.063, 0.0039),
        row(RhB, mm(58.0), 0.011, 0.00084),
        row(RhB, mm(110.0), 0.017, 0.0018),
    ]
}

pub fn published_rows(molecule: Molecule) -> Vec<PublishedRow> {
    published_table()
        .into_iter()
        .filter(|r| r.molecule == molecule)
        .collect()
}

/// The 63 µM ZnTPP sample used for the simulated round trip.
pub fn zntpp_63um() -> SampleSpec {
    published_table()[1].sample()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_tidy() {
        let labels: Vec<String> = published_table().iter().map(PublishedRow::label).collect();
        assert_eq!(labels[2], "ZnTPP-120uM");
        assert_eq!(labels[3], "ZnTPP-230uM");
        assert_eq!(labels[5], "RhB-0.038mM");
        assert_eq!(labels[9], "RhB-110mM");
    }

    #[test]
    fn quoted_geometry_volume_is_quoted() {
        assert_eq!(quoted_geometry().volume().value(), QUOTED_VOLUME_CM3);
    }
}
