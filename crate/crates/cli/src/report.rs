//! Human-readable and key=value reports plus plot-ready data files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use etpa_core::presets::PublishedRow;
use etpa_core::Analysis;
use thiserror::Error;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report is empty: nothing was analysed or checked")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    Kv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
}

/// Estimated σ_E next to the value the data were simulated with.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthComparison {
    pub label: String,
    pub true_sigma_e: f64,
    pub estimate: Option<(f64, f64)>,
}

impl TruthComparison {
    pub fn z(&self) -> Option<f64> {
        self.estimate
            .filter(|(_, u)| *u > 0.0)
            .map(|(v, u)| (v - self.true_sigma_e) / u)
    }

    pub fn within(&self, k: f64) -> bool {
        self.z().is_some_and(|z| z.abs() <= k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub provenance: Provenance,
    pub analysis: Option<Analysis>,
    pub truth: Vec<TruthComparison>,
    pub published: Vec<PublishedRow>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(provenance: Provenance) -> Self {
        Self {
            provenance,
            analysis: None,
            truth: Vec::new(),
            published: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.analysis.is_none() && self.checks.is_empty() && self.published.is_empty()
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// `x` to `n` significant figures without trailing zeros.
fn sig(x: f64, n: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (n as i32 - 1 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Value and uncertainty with the uncertainty to two significant figures.
fn with_unc(v: f64, u: f64) -> String {
    if !(u > 0.0 && u.is_finite()) {
        return sig(v, 4);
    }
    let decimals = (1 - u.log10().floor() as i32).max(0) as usize;
    format!("{v:.decimals$} ± {u:.decimals$}")
}

fn concentration(c_molar: f64) -> String {
    if c_molar < 1e-3 {
        format!("{} µM", sig(c_molar * 1e6, 4))
    } else {
        format!("{} mM", sig(c_molar * 1e3, 4))
    }
}

pub fn render_table(report: &Report) -> String {
    let mut o = String::new();
    let p = &report.provenance;
    let _ = writeln!(o, "etpa-lab {} {}", p.tool_version, p.command);
    let _ = writeln!(o, "config sha256 {}", p.config_hash);
    let _ = writeln!(o, "seed {}", p.seed);

    if !report.published.is_empty() {
        let _ = writeln!(o, "\nReference sigma_E values (x1e-18 cm^2 molecule^-1)");
        let _ = writeln!(o, "{:<10} {:<12} sigma_E", "molecule", "c");
        for r in &report.published {
            let _ = writeln!(
                o,
                "{:<10} {:<12} {}",
                r.molecule.name(),
                concentration(r.concentration.value()),
                with_unc(r.sigma_e.value() * 1e18, r.uncertainty.value() * 1e18)
            );
        }
    }

    if let Some(a) = &report.analysis {
        let cal = &a.calibration.fit;
        let _ = writeln!(
            o,
            "\nCalibration on '{}': R_solvent = {} s^-1 per mW ({}, {} points, reduced chi2 {})",
            a.reference_label,
            with_unc(cal.slope, cal.slope_stderr),
            cal.method,
            cal.n_points,
            sig(cal.chi2_reduced, 3)
        );
        let _ = writeln!(
            o,
            "weights {}, accidentals {}",
            a.options.weighting,
            if a.options.subtract_accidentals {
                "subtracted"
            } else {
                "not subtracted"
            }
        );
        let _ = writeln!(o, "\nEstimated sigma_E (x1e-18 cm^2 molecule^-1)");
        let _ = writeln!(
            o,
            "{:<16} {:<12} {:<24} {:<8} sigma_E",
            "sample", "c", "slope R_abs/R_solvent", "chi2"
        );
        for s in &a.samples {
            let sigma = match &s.sigma_e {
                Ok(r) => with_unc(
                    r.sigma_e.value() * 1e18,
                    r.sigma_e_uncertainty.value() * 1e18,
                ),
                Err(e) => format!("undetermined ({e})"),
            };
            let _ = writeln!(
                o,
                "{:<16} {:<12} {:<24} {:<8} {}",
                s.label,
                concentration(s.concentration.value()),
                with_unc(s.fit.slope, s.fit.slope_stderr),
                sig(s.fit.chi2_reduced, 3),
                sigma
            );
        }
        if let Some(t) = &a.table {
            if t.rows.len() > 1 {
                let _ = writeln!(o, "\nsigma_E*c products (relative difference)");
                for d in &t.product_diagnostics {
                    let _ = writeln!(
                        o,
                        "  {} vs {}: {:.2}%",
                        t.rows[d.first].label,
                        t.rows[d.second].label,
                        100.0 * d.relative_difference
                    );
                }
                let _ = writeln!(
                    o,
                    "sigma_E decreases with concentration: {}",
                    if t.monotonic_decay() { "yes" } else { "no" }
                );
            }
        }
    }

    if !report.truth.is_empty() {
        let _ = writeln!(
            o,
            "\nComparison with simulated truth (x1e-18 cm^2 molecule^-1)"
        );
        for t in &report.truth {
            let line = match (t.estimate, t.z()) {
                (Some((v, u)), Some(z)) => format!(
                    "{} estimated, truth {}, z = {z:.2}",
                    with_unc(v * 1e18, u * 1e18),
                    sig(t.true_sigma_e * 1e18, 4)
                ),
                _ => format!("no estimate, truth {}", sig(t.true_sigma_e * 1e18, 4)),
            };
            let _ = writeln!(o, "  {:<16} {line}", t.label);
        }
    }

    if !report.checks.is_empty() {
        let _ = writeln!(o, "\nChecks");
        for c in &report.checks {
            let _ = writeln!(
                o,
                "  [{}] {}: {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
    }

    if let Some(a) = &report.analysis {
        if !a.warnings.is_empty() {
            let _ = writeln!(o, "\nWarnings");
            for w in &a.warnings {
                let _ = writeln!(o, "  {w}");
            }
        }
    }
    o
}

pub fn render_kv(report: &Report) -> String {
    let mut o = String::new();
    let mut kv = |k: &str, v: &dyn std::fmt::Display| {
        let _ = writeln!(o, "{k}={v}");
    };
    let p = &report.provenance;
    kv("tool.version", &p.tool_version);
    kv("run.command", &p.command);
    kv("provenance.config_sha256", &p.config_hash);
    kv("provenance.seed", &p.seed);

    for (i, r) in report.published.iter().enumerate() {
        kv(&format!("published.{i}.molecule"), &r.molecule.name());
        kv(
            &format!("published.{i}.concentration_molar"),
            &r.concentration.value(),
        );
        kv(&format!("published.{i}.sigma_e_cm2"), &r.sigma_e.value());
        kv(
            &format!("published.{i}.uncertainty_cm2"),
            &r.uncertainty.value(),
        );
    }

    if let Some(a) = &report.analysis {
        kv("analysis.weighting", &a.options.weighting);
        kv(
            "analysis.subtract_accidentals",
            &a.options.subtract_accidentals,
        );
        kv("analysis.fit_method", &a.options.fit_method);
        kv("calibration.reference", &a.reference_label);
        kv("calibration.slope_per_mw", &a.calibration.fit.slope);
        kv("calibration.slope_stderr", &a.calibration.fit.slope_stderr);
        kv("calibration.chi2_reduced", &a.calibration.fit.chi2_reduced);
        kv("calibration.n_points", &a.calibration.fit.n_points);
        for (i, s) in a.samples.iter().enumerate() {
            let k = |name: &str| format!("sample.{i}.{name}");
            kv(&k("label"), &s.label);
            kv(&k("concentration_molar"), &s.concentration.value());
            kv(&k("fit.method"), &s.fit.method);
            kv(&k("fit.slope"), &s.fit.slope);
            kv(&k("fit.slope_stderr"), &s.fit.slope_stderr);
            kv(&k("fit.chi2_reduced"), &s.fit.chi2_reduced);
            kv(&k("fit.n_points"), &s.fit.n_points);
            kv(
                &k("fit.forced_through_origin"),
                &s.fit.forced_through_origin,
            );
            match &s.sigma_e {
                Ok(r) => {
                    kv(&k("sigma_e_cm2"), &r.sigma_e.value());
                    kv(
                        &k("sigma_e_uncertainty_cm2"),
                        &r.sigma_e_uncertainty.value(),
                    );
                }
                Err(e) => kv(&k("sigma_e_error"), e),
            }
        }
        if let Some(t) = &a.table {
            kv("table.rows", &t.rows.len());
            kv("table.monotonic_decay", &t.monotonic_decay());
            for d in &t.product_diagnostics {
                kv(
                    &format!(
                        "table.product.{}.{}.relative_difference",
                        t.rows[d.first].label, t.rows[d.second].label
                    ),
                    &d.relative_difference,
                );
            }
        }
        for (i, w) in a.warnings.iter().enumerate() {
            kv(&format!("warning.{i}"), w);
        }
    }

    for (i, t) in report.truth.iter().enumerate() {
        let k = |name: &str| format!("truth.{i}.{name}");
        kv(&k("label"), &t.label);
        kv(&k("sigma_e_cm2"), &t.true_sigma_e);
        if let Some(z) = t.z() {
            kv(&k("z"), &z);
        }
        kv(&k("within_3sigma"), &t.within(3.0));
    }

    for c in &report.checks {
        kv(
            &format!("check.{}", c.name),
            &if c.pass { "pass" } else { "fail" },
        );
        kv(&format!("check.{}.detail", c.name), &c.detail);
    }
    o
}

/// Tab-separated data for rate, absorption and σ_E plots, keyed by file name.
pub fn plot_files(report: &Report) -> Vec<(&'static str, String)> {
    let Some(a) = &report.analysis else {
        return Vec::new();
    };
    let w = a.options.weighting;

    let mut rates = String::from("sample\tpump_power_mW\tcoincidence_rate_s-1\tsigma_s-1\n");
    let reference = a
        .reference_summaries
        .iter()
        .map(|s| (&a.reference_label, s));
    let measured = a
        .samples
        .iter()
        .flat_map(|s| s.summaries.iter().map(move |m| (&s.label, m)));
    for (label, s) in reference.chain(measured) {
        let e = s.estimate(w);
        let _ = writeln!(
            rates,
            "{label}\t{}\t{}\t{}",
            e.pump_power.milliwatts(),
            e.mean,
            e.sigma
        );
    }

    let mut absorption = String::from("sample\tr_solvent_s-1\tr_abs_s-1\tsigma_s-1\tfit_s-1\n");
    for s in &a.samples {
        for p in &s.points {
            let _ = writeln!(
                absorption,
                "{}\t{}\t{}\t{}\t{}",
                s.label,
                p.r_solvent,
                p.r_abs.mean,
                p.r_abs.sigma,
                s.fit.predict(p.r_solvent)
            );
        }
    }

    let mut sigma = String::from("sample\tconcentration_molar\tsigma_e_cm2\tuncertainty_cm2\n");
    let rows = a
        .table
        .as_ref()
        .map(|t| t.rows.as_slice())
        .unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            sigma,
            "{}\t{}\t{}\t{}",
            r.label,
            r.concentration.value(),
            r.sigma_e.value(),
            r.sigma_e_uncertainty.value()
        );
    }

    vec![
        ("rates_vs_power.tsv", rates),
        ("absorbed_vs_solvent.tsv", absorption),
        ("sigma_e_vs_concentration.tsv", sigma),
    ]
}

pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Table => render_table(report),
        Format::Kv => render_kv(report),
    }
}

/// Writes the rendered report and plot data into `out_dir`. Returns the
/// rendered text and the files written.
pub fn emit_report(
    report: &Report,
    format: Format,
    out_dir: &Path,
) -> Result<(String, Vec<PathBuf>), ReportError> {
    if report.is_empty() {
        return Err(ReportError::Empty);
    }
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError::Io { path, source }
    };
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let text = render(report, format);
    let name = match format {
        Format::Table => "report.txt",
        Format::Kv => "report.kv",
    };
    let mut written = Vec::new();
    for (file, contents) in std::iter::once((name, text.clone())).chain(plot_files(report)) {
        let path = out_dir.join(file);
        std::fs::write(&path, contents).map_err(io(&path))?;
        written.push(path);
    }
    Ok((text, written))
}
