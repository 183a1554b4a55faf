//! Per-bin dataset CSV.
//!
//! One row per bin, UTF-8, LF line endings, numbers in shortest round-trip
//! form. Writing what was read reproduces the file byte for byte.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use etpa_core::series::{Bin, Dataset, MeasurementSeries, SampleSeries, SeriesError};
use etpa_core::units::{Concentration, Power, Time};
use thiserror::Error;

pub const HEADER: [&str; 8] = [
    "sample_label",
    "concentration_molar",
    "pump_power_mW",
    "bin_index",
    "duration_s",
    "singles1",
    "singles2",
    "coincidences",
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Csv {
        line: u64,
        #[source]
        source: csv::Error,
    },
    #[error("line 1: header must be '{}', found '{found}'", HEADER.join(","))]
    Header { found: String },
    #[error("line {line}, column {column}: {message}")]
    Field {
        line: u64,
        column: &'static str,
        message: String,
    },
    #[error("dataset has no data rows")]
    Empty,
    #[error("line {line}: sample '{label}' at {power_mw} mW: {source}")]
    Series {
        line: u64,
        label: String,
        power_mw: f64,
        #[source]
        source: SeriesError,
    },
    #[error("sample '{label}': {message}")]
    Write { label: String, message: String },
}

/// Labels are written unquoted, so separators and quotes are not allowed.
pub fn check_label(label: &str) -> Result<(), String> {
    if label.is_empty() {
        return Err("label is empty".into());
    }
    if let Some(c) = label.chars().find(|c| matches!(c, ',' | '"' | '\n' | '\r')) {
        return Err(format!("label '{}' contains {c:?}", label.escape_debug()));
    }
    if label.trim() != label {
        return Err(format!(
            "label '{label}' has leading or trailing whitespace"
        ));
    }
    Ok(())
}

/// Pump power in mW, chosen so that parsing it back gives the same watts.
fn format_mw(p: Power) -> String {
    let w = p.value();
    let mut v = p.milliwatts();
    if Power::from_milliwatts(v).map(Power::value) != Ok(w) {
        // x*1e3*1e-3 is not always x; a neighbouring float of the mW value
        // maps back exactly.
        let mut candidates = [v; 8];
        let (mut up, mut down) = (v, v);
        for pair in candidates.chunks_mut(2) {
            up = up.next_up();
            down = down.next_down();
            pair[0] = up;
            pair[1] = down;
        }
        if let Some(c) = candidates
            .into_iter()
            .find(|&c| Power::from_milliwatts(c).map(Power::value) == Ok(w))
        {
            v = c;
        }
    }
    v.to_string()
}

pub fn write_dataset(dataset: &Dataset) -> Result<String, DatasetError> {
    let mut out = HEADER.join(",");
    out.push('\n');
    for sample in &dataset.samples {
        check_label(&sample.label).map_err(|message| DatasetError::Write {
            label: sample.label.clone(),
            message,
        })?;
        for series in &sample.series {
            let mw = format_mw(series.pump_power());
            for (i, b) in series.bins().iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    sample.label,
                    sample.concentration.value(),
                    mw,
                    i,
                    b.duration.value(),
                    b.singles1,
                    b.singles2,
                    b.coincidences
                )
                .expect("writing to a String");
            }
        }
    }
    Ok(out)
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), DatasetError> {
    let text = write_dataset(dataset)?;
    std::fs::write(path, text).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_dataset(file)
}

struct PendingSeries {
    power: Power,
    bins: Vec<Bin>,
    lines: Vec<u64>,
}

struct PendingSample {
    label: String,
    concentration: Concentration,
    series: Vec<PendingSeries>,
}

fn field<T>(
    line: u64,
    column: &'static str,
    raw: &str,
    parse: impl FnOnce(&str) -> Result<T, String>,
) -> Result<T, DatasetError> {
    parse(raw).map_err(|message| DatasetError::Field {
        line,
        column,
        message,
    })
}

fn parse_f64(raw: &str) -> Result<f64, String> {
    let v: f64 = raw
        .parse()
        .map_err(|_| format!("'{raw}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{raw}' is not finite"))
    }
}

fn parse_count(raw: &str) -> Result<u64, String> {
    match raw.parse::<u64>() {
        Ok(v) => Ok(v),
        Err(_) if raw.parse::<i128>().is_ok_and(|v| v < 0) => Err(format!("negative count {raw}")),
        Err(_) => Err(format!("'{raw}' is not a non-negative integer")),
    }
}

pub fn read_dataset(reader: impl Read) -> Result<Dataset, DatasetError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = csv.records();
    let csv_err = |source: csv::Error| DatasetError::Csv {
        line: source.position().map_or(0, |p| p.line()),
        source,
    };
    let header = match records.next() {
        None => return Err(DatasetError::Empty),
        Some(r) => r.map_err(csv_err)?,
    };
    if header.iter().ne(HEADER) {
        return Err(DatasetError::Header {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut samples: Vec<PendingSample> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for record in records {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != HEADER.len() {
            return Err(DatasetError::Field {
                line,
                column: HEADER[record.len().min(HEADER.len() - 1)],
                message: format!("expected {} fields, found {}", HEADER.len(), record.len()),
            });
        }
        let label = field(line, HEADER[0], &record[0], |s| {
            check_label(s).map(|_| s.to_string())
        })?;
        let concentration = field(line, HEADER[1], &record[1], |s| {
            Concentration::new(parse_f64(s)?).map_err(|e| e.to_string())
        })?;
        let power = field(line, HEADER[2], &record[2], |s| {
            let p = Power::from_milliwatts(parse_f64(s)?).map_err(|e| e.to_string())?;
            if p.value() > 0.0 {
                Ok(p)
            } else {
                Err("pump power must be positive".into())
            }
        })?;
        let bin_index = field(line, HEADER[3], &record[3], parse_count)?;
        let duration = field(line, HEADER[4], &record[4], |s| {
            Time::positive(parse_f64(s)?).map_err(|e| e.to_string())
        })?;
        let singles1 = field(line, HEADER[5], &record[5], parse_count)?;
        let singles2 = field(line, HEADER[6], &record[6], parse_count)?;
        let coincidences = field(line, HEADER[7], &record[7], parse_count)?;

        let slot = *index.entry(label.clone()).or_insert_with(|| {
            samples.push(PendingSample {
                label: label.clone(),
                concentration,
                series: Vec::new(),
            });
            samples.len() - 1
        });
        let sample = &mut samples[slot];
        if sample.concentration != concentration {
            return Err(DatasetError::Field {
                line,
                column: HEADER[1],
                message: format!(
                    "sample '{label}' was first given concentration {}",
                    sample.concentration.value()
                ),
            });
        }
        let series = match sample.series.iter().position(|s| s.power == power) {
            Some(i) => &mut sample.series[i],
            None => {
                sample.series.push(PendingSeries {
                    power,
                    bins: Vec::new(),
                    lines: Vec::new(),
                });
                sample.series.last_mut().expect("just pushed")
            }
        };
        if bin_index != series.bins.len() as u64 {
            return Err(DatasetError::Field {
                line,
                column: HEADER[3],
                message: format!(
                    "expected bin index {}, found {bin_index}",
                    series.bins.len()
                ),
            });
        }
        series
            .bins
            .push(Bin::new(duration, singles1, singles2, coincidences));
        series.lines.push(line);
    }
    if samples.is_empty() {
        return Err(DatasetError::Empty);
    }

    let mut reference_taken = false;
    let mut dataset = Dataset::default();
    for s in samples {
        let reference = !reference_taken && s.concentration.value() == 0.0;
        reference_taken |= reference;
        let series = s
            .series
            .into_iter()
            .map(|p| {
                let first_line = p.lines[0];
                let lines = p.lines;
                MeasurementSeries::new(p.power, p.bins).map_err(|source| {
                    let line = match &source {
                        SeriesError::CoincidenceExceedsSingles { index, .. }
                        | SeriesError::NonPositiveDuration { index } => lines[*index],
                        SeriesError::Empty => first_line,
                    };
                    DatasetError::Series {
                        line,
                        label: s.label.clone(),
                        power_mw: p.power.milliwatts(),
                        source,
                    }
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        dataset.samples.push(SampleSeries {
            label: s.label,
            concentration: s.concentration,
            reference,
            series,
        });
    }
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<Dataset, DatasetError> {
        read_dataset(text.as_bytes())
    }

    const HEAD: &str = "sample_label,concentration_molar,pump_power_mW,bin_index,duration_s,singles1,singles2,coincidences\n";

    #[test]
    fn reads_and_rewrites() {
        let text = format!(
            "{HEAD}tol,0,1,0,1,100,90,10\ntol,0,1,1,1,101,91,11\nzn,0.000063,1,0,1,100,90,9\n"
        );
        let d = load(&text).unwrap();
        assert_eq!(d.samples.len(), 2);
        assert!(d.samples[0].reference && !d.samples[1].reference);
        assert_eq!(d.samples[0].series[0].bins().len(), 2);
        assert_eq!(d.samples[1].concentration.value(), 63e-6);
        assert_eq!(write_dataset(&d).unwrap(), text);
    }

    #[test]
    fn mw_format_round_trips() {
        for k in 1..=2000 {
            let p = Power::from_milliwatts(k as f64 * 0.01).unwrap();
            let s = format_mw(p);
            assert_eq!(
                Power::from_milliwatts(s.parse().unwrap()).unwrap(),
                p,
                "{s}"
            );
        }
    }

    fn field_error(text: &str) -> (u64, &'static str) {
        match load(text) {
            Err(DatasetError::Field { line, column, .. }) => (line, column),
            other => panic!("expected field error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_line_and_column() {
        assert_eq!(
            field_error(&format!("{HEAD}a,0,1,0,1,10,10,-1\n")),
            (2, "coincidences")
        );
        assert_eq!(
            field_error(&format!("{HEAD}a,0,1,0,1,10,10,1\na,0,x,0,1,1,1,1\n")),
            (3, "pump_power_mW")
        );
        assert_eq!(
            field_error(&format!("{HEAD}a,0,1,0,1,10,10,1\na,0,1,2,1,1,1,1\n")),
            (3, "bin_index")
        );
        assert_eq!(
            field_error(&format!("{HEAD}a,0,1,0,0,10,10,1\n")),
            (2, "duration_s")
        );
        assert_eq!(
            field_error(&format!("{HEAD}a,0,1,0,1,10,10,1\na,0.1,2,0,1,1,1,1\n")),
            (3, "concentration_molar")
        );
        assert_eq!(field_error(&format!("{HEAD}a,0,1,0,1,10,10\n")).0, 2);
        assert_eq!(
            field_error(&format!("{HEAD}\"a,b\",0,1,0,1,10,10,1\n")),
            (2, "sample_label")
        );
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(load(""), Err(DatasetError::Empty)));
        assert!(matches!(load(HEAD), Err(DatasetError::Empty)));
        assert!(matches!(
            load("a,b,c\n1,2,3\n"),
            Err(DatasetError::Header { .. })
        ));
        match load(&format!("{HEAD}a,0,1,0,1,10,10,1\na,0,1,1,1,5,10,6\n")) {
            Err(DatasetError::Series { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unwritable_labels() {
        let series = MeasurementSeries::new(
            Power::from_milliwatts(1.0).unwrap(),
            vec![Bin::new(Time::new(1.0).unwrap(), 1, 1, 1)],
        )
        .unwrap();
        for bad in ["a,b", "q\"", "x\ny", ""] {
            let d = Dataset {
                samples: vec![SampleSeries {
                    label: bad.into(),
                    concentration: Concentration::ZERO,
                    reference: true,
                    series: vec![series.clone()],
                }],
            };
            assert!(
                matches!(write_dataset(&d), Err(DatasetError::Write { .. })),
                "{bad:?}"
            );
        }
    }
}
