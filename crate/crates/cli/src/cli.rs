//! Command-line front end.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};
use etpa_core::estimator::{concentration_series, sigma_e_from_slope, SigmaEResult, SlopeEstimate};
use etpa_core::model::{absorption_fraction, crossover_flux, tpa_rate, SampleSpec};
use etpa_core::presets::{self, Molecule};
use etpa_core::sim::{expected_rates, photon_flux_at_sample, run_experiment};
use etpa_core::units::{gm_to_cm4s, CrossSectionE, CrossSectionR, FluxDensity};
use etpa_core::{analyze, Analysis, Dataset, FitRegistry, Weighting};

use crate::config::{ConfigError, Mode, RunConfig};
use crate::dataset::{load_dataset, save_dataset};
use crate::report::{
    emit_report, Check, Format, Provenance, Report, TruthComparison, TOOL_VERSION,
};

pub const SEED_ENV: &str = "ETPA_LAB_SEED";
pub const DEFAULT_OUT_DIR: &str = "etpa-out";
pub const DATASET_FILE: &str = "dataset.csv";

#[derive(Debug, Parser)]
#[command(
    name = "etpa-lab",
    version,
    about = "Simulate and analyse ETPA coincidence-counting experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// RNG seed; overrides the config file and ETPA_LAB_SEED.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory for datasets, reports and plot data.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Subtract the s1*s2*tau accidental estimate from every bin.
    #[arg(long, global = true)]
    pub subtract_accidentals: bool,
    /// Per-point fit uncertainty: std or stderr.
    #[arg(long, global = true, value_name = "std|stderr")]
    pub weights: Option<Weighting>,
    /// Origin-forced fit method (weighted, unweighted, birge).
    #[arg(long, global = true, value_name = "NAME")]
    pub fit: Option<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate a pump-power sweep and write the per-bin dataset CSV.
    Simulate,
    /// Estimate sigma_E from a dataset CSV.
    Analyze {
        /// Dataset CSV; defaults to io.dataset from the config.
        dataset: Option<PathBuf>,
    },
    /// Simulate, save, reload and analyse, comparing against the inputs.
    Roundtrip,
    /// Built-in consistency checks and a simulated concentration series.
    Demo,
}

impl Command {
    fn mode(&self) -> Mode {
        match self {
            Command::Simulate => Mode::Simulate,
            Command::Analyze { .. } => Mode::Analyze,
            Command::Roundtrip => Mode::Roundtrip,
            Command::Demo => Mode::Demo,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Result of a successful run: what to print and the exit status.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub success: bool,
}

/// `--seed` beats the config file, which beats the environment.
pub fn resolve_seed(
    flag: Option<u64>,
    config: Option<u64>,
    env: Option<&str>,
) -> Result<u64, CliError> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match env {
        None => Ok(0),
        Some(raw) => raw
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}='{raw}' is not an unsigned integer"))),
    }
}

/// Folds command-line overrides into the file configuration.
pub fn effective_config(cli: &Cli, env_seed: Option<&str>) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mode = cli.command.mode();
    if config.mode.is_some_and(|m| m != mode) {
        return Err(CliError::Usage(format!(
            "config mode {:?} does not match the '{}' command",
            config.mode.unwrap(),
            format!("{mode:?}").to_lowercase()
        )));
    }
    config.mode = Some(mode);
    config.seed = Some(resolve_seed(cli.seed, config.seed, env_seed)?);
    if let Some(out) = &cli.out {
        config.io.out_dir = Some(out.clone());
    }
    if let Command::Analyze { dataset: Some(d) } = &cli.command {
        config.io.dataset = Some(d.clone());
    }
    if cli.subtract_accidentals {
        config.analysis.subtract_accidentals = true;
    }
    if let Some(w) = cli.weights {
        config.analysis.weighting = w;
    }
    if let Some(f) = &cli.fit {
        config.analysis.fit_method = f.clone();
    }
    config.validate(mode)?;
    if mode == Mode::Analyze && config.io.dataset.is_none() {
        return Err(CliError::Usage(
            "analyze needs a dataset path (argument or io.dataset)".into(),
        ));
    }
    Ok(config)
}

struct Run {
    config: RunConfig,
    seed: u64,
    out_dir: PathBuf,
    format: Format,
    command: &'static str,
}

impl Run {
    fn provenance(&self) -> Provenance {
        Provenance {
            command: self.command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config_hash: self.config.hash(),
            seed: self.seed,
        }
    }

    fn simulate(&self) -> anyhow::Result<Dataset> {
        let geometry = self.config.geometry.build()?;
        let source = self.config.source.build(self.seed)?;
        let samples = self.config.samples()?;
        Ok(run_experiment(&source, &samples, &geometry)?)
    }

    fn analyze(&self, dataset: &Dataset) -> anyhow::Result<Analysis> {
        let geometry = self.config.geometry.build()?;
        let options = self.config.analysis_options()?;
        Ok(analyze(
            dataset,
            &geometry,
            &options,
            &FitRegistry::with_builtins(),
        )?)
    }

    fn emit(&self, report: &Report) -> anyhow::Result<Outcome> {
        let (text, files) = emit_report(report, self.format, &self.out_dir)?;
        let mut stdout = text;
        for f in files {
            stdout.push_str(&format!("wrote {}\n", f.display()));
        }
        Ok(Outcome {
            stdout,
            success: report.all_checks_pass(),
        })
    }

    fn dataset_path(&self) -> PathBuf {
        self.config
            .io
            .dataset
            .clone()
            .unwrap_or_else(|| self.out_dir.join(DATASET_FILE))
    }
}

fn write_dataset_file(dataset: &Dataset, path: &Path) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(save_dataset(dataset, path)?)
}

fn truth(samples: &[SampleSpec], analysis: &Analysis) -> Vec<TruthComparison> {
    analysis
        .samples
        .iter()
        .filter_map(|s| {
            let spec = samples.iter().find(|p| p.label == s.label)?;
            Some(TruthComparison {
                label: s.label.clone(),
                true_sigma_e: spec.sigma_e.value(),
                estimate: s
                    .sigma_e
                    .as_ref()
                    .ok()
                    .map(|r| (r.sigma_e.value(), r.sigma_e_uncertainty.value())),
            })
        })
        .collect()
}

fn simulate_cmd(run: &Run) -> anyhow::Result<Outcome> {
    let dataset = run.simulate()?;
    let path = run.dataset_path();
    write_dataset_file(&dataset, &path)?;
    Ok(Outcome {
        stdout: format!(
            "simulated {} samples, {} power points, {} bins (seed {}, config sha256 {})\nwrote {}\n",
            dataset.samples.len(),
            dataset.series_count(),
            dataset.bin_count(),
            run.seed,
            run.config.hash(),
            path.display()
        ),
        success: true,
    })
}

fn analyze_cmd(run: &Run) -> anyhow::Result<Outcome> {
    let path = run.config.io.dataset.clone().expect("validated");
    let dataset = load_dataset(&path).with_context(|| format!("loading {}", path.display()))?;
    let mut report = Report::new(run.provenance());
    report.analysis = Some(run.analyze(&dataset)?);
    run.emit(&report)
}

fn roundtrip_cmd(run: &Run) -> anyhow::Result<Outcome> {
    let dataset = run.simulate()?;
    let path = run.out_dir.join(DATASET_FILE);
    write_dataset_file(&dataset, &path)?;
    let reloaded = load_dataset(&path).with_context(|| format!("reloading {}", path.display()))?;
    anyhow::ensure!(
        reloaded == dataset,
        "dataset changed on its way through {}",
        path.display()
    );
    let analysis = run.analyze(&reloaded)?;
    let mut report = Report::new(run.provenance());
    report.truth = truth(&run.config.samples()?, &analysis);
    report.analysis = Some(analysis);
    run.emit(&report)
}

/// Relative round-off allowed when inverting a forward-computed slope.
const INVERSE_REL_TOL: f64 = 1e-9;
/// Two rows count as degenerate when their σ_E·c differ by less than this.
const DEGENERACY_REL_TOL: f64 = 0.05;
const SINGLES_REL_TOL: f64 = 0.2;
const FLUX_MAX_DECADES: f64 = 1.0;
const K_SIGMA: f64 = 3.0;

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        pass,
        detail,
    }
}

fn published_results(molecule: Molecule) -> Vec<SigmaEResult> {
    presets::published_rows(molecule)
        .into_iter()
        .map(|r| SigmaEResult {
            sigma_e: r.sigma_e,
            sigma_e_uncertainty: r.uncertainty,
            concentration: r.concentration,
            label: r.label(),
        })
        .collect()
}

fn demo_cmd(run: &Run) -> anyhow::Result<Outcome> {
    let geometry = run.config.geometry.build()?;
    let mut report = Report::new(run.provenance());
    report.published = presets::published_table();

    let mut worst = 0.0f64;
    let mut breakdown = Vec::new();
    for row in &report.published {
        let f = absorption_fraction(row.concentration, &geometry, row.sigma_e);
        if f.breakdown() {
            breakdown.push(format!("{} (slope {:.3})", row.label(), f.value()));
        }
        let back = sigma_e_from_slope(
            SlopeEstimate {
                slope: f.value(),
                stderr: 0.0,
            },
            row.concentration,
            &geometry,
        )?;
        worst = worst.max((back.sigma_e.value() / row.sigma_e.value() - 1.0).abs());
    }
    report.checks.push(check(
        "table_consistency",
        worst <= INVERSE_REL_TOL,
        format!(
            "slope -> sigma_E inversion max rel err {worst:.1e}; slope >= 1: {}",
            if breakdown.is_empty() {
                "none".to_string()
            } else {
                breakdown.join(", ")
            }
        ),
    ));

    let zn = concentration_series(published_results(Molecule::ZnTpp))?;
    let rh = concentration_series(published_results(Molecule::RhB))?;
    let pair = |t: &etpa_core::ConcentrationTable, i, j| {
        let d = t.product(i, j).expect("rows exist");
        (
            format!("{} vs {}", t.rows[i].label, t.rows[j].label),
            d.relative_difference,
        )
    };
    let degenerate = [pair(&zn, 2, 4), pair(&rh, 0, 1)];
    report.checks.push(check(
        "product_invariance",
        degenerate.iter().all(|(_, d)| *d <= DEGENERACY_REL_TOL),
        degenerate
            .iter()
            .map(|(name, d)| format!("{name}: sigma_E*c differ by {:.1}%", 100.0 * d))
            .collect::<Vec<_>>()
            .join("; "),
    ));
    report.checks.push(check(
        "decay_with_concentration",
        zn.monotonic_decay(),
        format!(
            "ZnTPP monotonic: {}; RhB monotonic: {}",
            zn.monotonic_decay(),
            rh.monotonic_decay()
        ),
    ));

    let z = geometry.rayleigh_range();
    report.checks.push(check(
        "geometry",
        geometry.collimated(),
        format!(
            "z_R = {:.2} mm over a {} mm path, A = {:e} cm^2, V = {:e} cm^3",
            z.millimetres(),
            geometry.path_length().millimetres(),
            geometry.area().value(),
            geometry.volume().value()
        ),
    ));

    let sigma = CrossSectionE::new(1e-18)?;
    let delta = gm_to_cm4s(100.0)?;
    let random = tpa_rate(FluxDensity::new(1e18)?, CrossSectionE::ZERO, delta).value();
    let entangled = tpa_rate(FluxDensity::new(1e12)?, sigma, CrossSectionR::ZERO).value();
    let cross = crossover_flux(sigma, delta)?.value();
    report.checks.push(check(
        "regime",
        entangled >= random,
        format!("per-molecule rate: random {random:e} s^-1 at 1e18, entangled {entangled:e} s^-1 at 1e12; crossover {cross:e} cm^-2 s^-1"),
    ));

    let source = run.config.source.build(run.seed)?;
    let top = *source
        .pump_powers
        .iter()
        .max_by(|a, b| a.value().total_cmp(&b.value()))
        .expect("validated");
    let rates = expected_rates(&source, top, &SampleSpec::solvent("solvent"), &geometry)?;
    let singles = rates.singles1 + rates.singles2;
    let flux = photon_flux_at_sample(&source, &geometry, top).value();
    let decades = (flux / presets::QUOTED_FLUX).log10().abs();
    report.checks.push(check(
        "source_magnitudes",
        (singles / presets::QUOTED_SINGLES - 1.0).abs() <= SINGLES_REL_TOL && decades <= FLUX_MAX_DECADES,
        format!(
            "at {} mW: singles {singles:.3e} s^-1, photon flux {flux:.2e} cm^-2 s^-1, accidentals {:.1}% of coincidences",
            top.milliwatts(),
            100.0 * rates.accidentals / rates.coincidences()
        ),
    ));

    let mut samples = vec![SampleSpec::solvent(Molecule::ZnTpp.solvent())];
    samples.extend(
        presets::published_rows(Molecule::ZnTpp)
            .iter()
            .map(|r| r.sample()),
    );
    let dataset = run_experiment(&source, &samples, &geometry)?;
    let analysis = run.analyze(&dataset)?;
    report.truth = truth(&samples, &analysis);
    let covered = report.truth.iter().filter(|t| t.within(K_SIGMA)).count();
    let monotonic = analysis.table.as_ref().is_some_and(|t| t.monotonic_decay());
    report.checks.push(check(
        "simulated_series",
        covered == report.truth.len() && monotonic,
        format!(
            "{covered}/{} ZnTPP rows recovered within 3 sigma; estimated sigma_E decreases with c: {monotonic}",
            report.truth.len()
        ),
    ));
    report.analysis = Some(analysis);
    run.emit(&report)
}

pub fn execute(cli: &Cli, env_seed: Option<&str>) -> Result<Outcome, CliError> {
    let config = effective_config(cli, env_seed)?;
    let run = Run {
        seed: config.seed.expect("resolved"),
        out_dir: config
            .io
            .out_dir
            .clone()
            .unwrap_or_else(|| DEFAULT_OUT_DIR.into()),
        format: cli.format,
        command: match cli.command {
            Command::Simulate => "simulate",
            Command::Analyze { .. } => "analyze",
            Command::Roundtrip => "roundtrip",
            Command::Demo => "demo",
        },
        config,
    };
    Ok(match cli.command {
        Command::Simulate => simulate_cmd(&run),
        Command::Analyze { .. } => analyze_cmd(&run),
        Command::Roundtrip => roundtrip_cmd(&run),
        Command::Demo => demo_cmd(&run),
    }?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some(2), Some("3")).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some(2), Some("3")).unwrap(), 2);
        assert_eq!(resolve_seed(None, None, Some("3")).unwrap(), 3);
        assert_eq!(resolve_seed(None, None, None).unwrap(), 0);
        assert!(matches!(
            resolve_seed(None, None, Some("x")),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn overrides_fold_into_config() {
        let cli = Cli::try_parse_from([
            "etpa-lab",
            "analyze",
            "data.csv",
            "--weights",
            "stderr",
            "--subtract-accidentals",
            "--fit",
            "birge",
        ])
        .unwrap();
        let c = effective_config(&cli, Some("9")).unwrap();
        assert_eq!(c.seed, Some(9));
        assert_eq!(c.io.dataset, Some(PathBuf::from("data.csv")));
        assert_eq!(c.analysis.weighting, Weighting::Stderr);
        assert!(c.analysis.subtract_accidentals);
        assert_eq!(c.analysis.fit_method, "birge");
    }

    #[test]
    fn usage_errors() {
        let cli = Cli::try_parse_from(["etpa-lab", "analyze"]).unwrap();
        assert_eq!(effective_config(&cli, None).unwrap_err().exit_code(), 2);
        let cli = Cli::try_parse_from(["etpa-lab", "demo", "--fit", "spline"]).unwrap();
        assert_eq!(effective_config(&cli, None).unwrap_err().exit_code(), 2);
        assert!(Cli::try_parse_from(["etpa-lab", "demo", "--weights", "var"]).is_err());
    }
}
