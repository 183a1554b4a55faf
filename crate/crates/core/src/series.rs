//! Per-bin count records and the datasets built from them.

use thiserror::Error;

use crate::units::{Concentration, Power, Time};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("bin {index}: coincidences {coincidences} exceed min(singles1, singles2) = {limit}")]
    CoincidenceExceedsSingles {
        index: usize,
        coincidences: u64,
        limit: u64,
    },
    #[error("bin {index}: duration must be positive")]
    NonPositiveDuration { index: usize },
    #[error("series has no bins")]
    Empty,
}

/// Counts accumulated over one acquisition bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub duration: Time,
    pub singles1: u64,
    pub singles2: u64,
    pub coincidences: u64,
}

impl Bin {
    pub fn new(duration: Time, singles1: u64, singles2: u64, coincidences: u64) -> Self {
        Self {
            duration,
            singles1,
            singles2,
            coincidences,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Singles1,
    Singles2,
    Coincidences,
}

impl Channel {
    pub fn count(self, bin: &Bin) -> u64 {
        match self {
            Channel::Singles1 => bin.singles1,
            Channel::Singles2 => bin.singles2,
            Channel::Coincidences => bin.coincidences,
        }
    }
}

/// Mean rate and spread of one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSummary {
    /// Total counts over total time, s⁻¹.
    pub mean: f64,
    /// Sample standard deviation of per-bin rates, s⁻¹ (zero for a single bin).
    pub std: f64,
    /// `std / sqrt(n)`.
    pub stderr: f64,
    pub n: usize,
}

impl RateSummary {
    /// Summary statistics of per-bin rates with their durations.
    pub fn from_rates(rates: &[(f64, f64)]) -> Option<RateSummary> {
        let n = rates.len();
        if n == 0 {
            return None;
        }
        let total_time: f64 = rates.iter().map(|(_, dt)| dt).sum();
        let mean = rates.iter().map(|(r, dt)| r * dt).sum::<f64>() / total_time;
        let std = if n > 1 {
            let m = rates.iter().map(|(r, _)| r).sum::<f64>() / n as f64;
            (rates.iter().map(|(r, _)| (r - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(RateSummary {
            mean,
            std,
            stderr: std / (n as f64).sqrt(),
            n,
        })
    }
}

/// All bins recorded at one pump power.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    pump_power: Power,
    bins: Vec<Bin>,
    summary: [RateSummary; 3],
}

impl MeasurementSeries {
    pub fn new(pump_power: Power, bins: Vec<Bin>) -> Result<Self, SeriesError> {
        if bins.is_empty() {
            return Err(SeriesError::Empty);
        }
        for (index, b) in bins.iter().enumerate() {
            if b.duration.value() <= 0.0 {
                return Err(SeriesError::NonPositiveDuration { index });
            }
            let limit = b.singles1.min(b.singles2);
            if b.coincidences > limit {
                return Err(SeriesError::CoincidenceExceedsSingles {
                    index,
                    coincidences: b.coincidences,
                    limit,
                });
            }
        }
        let summary = [Channel::Singles1, Channel::Singles2, Channel::Coincidences]
            .map(|ch| channel_summary(&bins, ch));
        Ok(Self {
            pump_power,
            bins,
            summary,
        })
    }

    pub fn pump_power(&self) -> Power {
        self.pump_power
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn summary(&self, channel: Channel) -> RateSummary {
        match channel {
            Channel::Singles1 => self.summary[0],
            Channel::Singles2 => self.summary[1],
            Channel::Coincidences => self.summary[2],
        }
    }

    pub fn total_duration(&self) -> f64 {
        self.bins.iter().map(|b| b.duration.value()).sum()
    }
}

fn channel_summary(bins: &[Bin], channel: Channel) -> RateSummary {
    let rates: Vec<(f64, f64)> = bins
        .iter()
        .map(|b| {
            let dt = b.duration.value();
            (channel.count(b) as f64 / dt, dt)
        })
        .collect();
    RateSummary::from_rates(&rates).expect("non-empty")
}

/// Every power point measured for one solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    pub label: String,
    pub concentration: Concentration,
    /// Pure-solvent reference used for calibration and subtraction.
    pub reference: bool,
    pub series: Vec<MeasurementSeries>,
}

impl SampleSeries {
    pub fn at_power(&self, power: Power) -> Option<&MeasurementSeries> {
        self.series.iter().find(|s| s.pump_power() == power)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<SampleSeries>,
}

impl Dataset {
    pub fn reference(&self) -> Option<&SampleSeries> {
        self.samples.iter().find(|s| s.reference)
    }

    pub fn measured(&self) -> impl Iterator<Item = &SampleSeries> {
        self.samples.iter().filter(|s| !s.reference)
    }

    pub fn bin_count(&self) -> usize {
        self.samples
            .iter()
            .flat_map(|s| s.series.iter())
            .map(|m| m.bins().len())
            .sum()
    }

    pub fn series_count(&self) -> usize {
        self.samples.iter().map(|s| s.series.len()).sum()
    }
}
