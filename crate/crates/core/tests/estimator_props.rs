use etpa_core::analysis::{analyze, AnalysisOptions};
use etpa_core::estimator::{
    calibrate_pump, compute_r_abs, summarize_series, RateEstimate, Weighting,
};
use etpa_core::fit::{fit_through_origin, FitPoint, FitRegistry, OriginFit, Unweighted};
use etpa_core::model::{absorption_fraction, SampleSpec};
use etpa_core::presets;
use etpa_core::sim::{run_experiment, SourceConfig};
use etpa_core::units::{Concentration, CrossSectionE, Power};
use proptest::prelude::*;

fn points() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.1f64..1e4, -1e3f64..1e4, 0.1f64..100.0), 2..25)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #[test]
    fn fit_scale_equivariance(pts in points(), k in 0.01f64..100.0) {
        let base: Vec<FitPoint> = pts.iter().map(|&(x, y, s)| FitPoint::new(x, y, s)).collect();
        let r = fit_through_origin(&base).unwrap();
        let ys: Vec<FitPoint> = pts.iter().map(|&(x, y, s)| FitPoint::new(x, k * y, k * s)).collect();
        let ry = fit_through_origin(&ys).unwrap();
        prop_assert!(close(ry.slope, k * r.slope, 1e-10));
        prop_assert!(close(ry.slope_stderr, k * r.slope_stderr, 1e-10));
        let xs: Vec<FitPoint> = pts.iter().map(|&(x, y, s)| FitPoint::new(k * x, y, s)).collect();
        let rx = fit_through_origin(&xs).unwrap();
        prop_assert!(close(rx.slope, r.slope / k, 1e-10));
    }

    #[test]
    fn equal_weights_match_unweighted(pts in points(), s in 0.1f64..10.0) {
        let w: Vec<FitPoint> = pts.iter().map(|&(x, y, _)| FitPoint::new(x, y, s)).collect();
        let u: Vec<FitPoint> = pts.iter().map(|&(x, y, _)| FitPoint::unweighted(x, y)).collect();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let closed = sxy / sxx;
        prop_assert!(close(fit_through_origin(&w).unwrap().slope, closed, 1e-10));
        prop_assert!(close(Unweighted.fit(&u).unwrap().slope, closed, 1e-10));
    }

    #[test]
    fn r_abs_antisymmetric(a in 0.0f64..1e5, b in 0.0f64..1e5, sa in 0.0f64..100.0, sb in 0.0f64..100.0) {
        let p = Power::from_milliwatts(3.0).unwrap();
        let x = RateEstimate { pump_power: p, mean: a, sigma: sa };
        let y = RateEstimate { pump_power: p, mean: b, sigma: sb };
        let xy = compute_r_abs(&x, &y).unwrap();
        let yx = compute_r_abs(&y, &x).unwrap();
        prop_assert_eq!(xy.mean, -yx.mean);
        prop_assert_eq!(xy.sigma, yx.sigma);
    }
}

#[test]
fn calibration_recovers_true_coincidence_slope() {
    let g = presets::quoted_geometry();
    let solvent = SampleSpec::solvent("toluene");
    let base = SourceConfig::default();
    let truth = base.true_coincidences_per_mw();
    let tau = base.coincidence_window;
    let mut covered = 0;
    for seed in 0..100 {
        let config = SourceConfig {
            rng_seed: 7000 + seed,
            ..base.clone()
        };
        let data = run_experiment(&config, std::slice::from_ref(&solvent), &g).unwrap();
        let pts: Vec<RateEstimate> = data.samples[0]
            .series
            .iter()
            .map(|m| {
                summarize_series(m, Some(tau))
                    .unwrap()
                    .estimate(Weighting::Std)
            })
            .collect();
        let cal = calibrate_pump(&pts, true).unwrap();
        if (cal.fit.slope - truth).abs() <= 3.0 * cal.fit.slope_stderr {
            covered += 1;
        }
    }
    assert!(covered >= 95, "{covered}/100");
}

#[test]
fn zntpp_slope_recovered() {
    let g = presets::quoted_geometry();
    let truth = presets::zntpp_63um();
    let slope = absorption_fraction(truth.concentration, &g, truth.sigma_e).value();
    let samples = [SampleSpec::solvent("toluene"), truth.clone()];
    let registry = FitRegistry::with_builtins();
    let mut covered = 0;
    for seed in 0..100 {
        let config = SourceConfig {
            rng_seed: 300 + seed,
            ..SourceConfig::default()
        };
        let data = run_experiment(&config, &samples, &g).unwrap();
        let a = analyze(&data, &g, &AnalysisOptions::default(), &registry).unwrap();
        let fit = &a.sample(&truth.label).unwrap().fit;
        assert!(fit.forced_through_origin && fit.weighted);
        if (fit.slope - slope).abs() <= 3.0 * fit.slope_stderr {
            covered += 1;
        }
    }
    assert!(covered >= 95, "{covered}/100");
}

fn coverage(sample: SampleSpec, options: &AnalysisOptions, seeds: u64) -> usize {
    let g = presets::quoted_geometry();
    let samples = [SampleSpec::solvent("solvent"), sample.clone()];
    let registry = FitRegistry::with_builtins();
    (0..seeds)
        .filter(|&seed| {
            let config = SourceConfig {
                rng_seed: 11_000 + seed,
                ..SourceConfig::default()
            };
            let data = run_experiment(&config, &samples, &g).unwrap();
            let a = analyze(&data, &g, options, &registry).unwrap();
            let est = a.sample(&sample.label).unwrap().sigma_e.clone().unwrap();
            (est.sigma_e.value() - sample.sigma_e.value()).abs()
                <= 3.0 * est.sigma_e_uncertainty.value()
        })
        .count()
}

#[test]
fn coverage_across_parameter_space() {
    let g = presets::quoted_geometry();
    let cases = [
        (17.0, 1.0),
        (63.0, 5.1),
        (230.0, 1.1),
        (1400.0, 0.27),
        (5.0, 2.0),
    ];
    for (c_um, s18) in cases {
        let sample = SampleSpec::new(
            format!("c{c_um}"),
            Concentration::from_micromolar(c_um).unwrap(),
            CrossSectionE::new(s18 * 1e-18).unwrap(),
        );
        let f = absorption_fraction(sample.concentration, &g, sample.sigma_e).value();
        assert!(f < 0.5);
        let n = coverage(sample, &AnalysisOptions::default(), 100);
        assert!(
            n >= 95,
            "c = {c_um} uM, sigma = {s18}e-18 (f = {f:.3}): {n}/100"
        );
    }
}

#[test]
fn stderr_weighting_with_subtraction_covers() {
    let options = AnalysisOptions {
        weighting: Weighting::Stderr,
        subtract_accidentals: true,
        ..AnalysisOptions::default()
    };
    let n = coverage(presets::zntpp_63um(), &options, 100);
    assert!(n >= 95, "{n}/100");
}

#[test]
fn every_registered_method_recovers_sigma() {
    let g = presets::quoted_geometry();
    let truth = presets::zntpp_63um();
    let data = run_experiment(
        &SourceConfig {
            rng_seed: 5,
            ..SourceConfig::default()
        },
        &[SampleSpec::solvent("toluene"), truth.clone()],
        &g,
    )
    .unwrap();
    let registry = FitRegistry::with_builtins();
    for name in registry.names() {
        let options = AnalysisOptions {
            fit_method: name.to_string(),
            ..AnalysisOptions::default()
        };
        let a = analyze(&data, &g, &options, &registry).unwrap();
        let est = a.sample(&truth.label).unwrap().sigma_e.clone().unwrap();
        let rel = (est.sigma_e.value() / truth.sigma_e.value() - 1.0).abs();
        assert!(rel < 0.05, "{name}: {rel}");
        assert_eq!(a.sample(&truth.label).unwrap().fit.method, name);
    }
    let bad = AnalysisOptions {
        fit_method: "nope".into(),
        ..AnalysisOptions::default()
    };
    assert!(analyze(&data, &g, &bad, &registry).is_err());
}

#[test]
fn blank_sample_reports_undetermined_sigma() {
    let g = presets::quoted_geometry();
    let data = run_experiment(
        &SourceConfig {
            rng_seed: 8,
            ..SourceConfig::default()
        },
        &[SampleSpec::solvent("solvent"), SampleSpec::solvent("blank")],
        &g,
    )
    .unwrap();
    let a = analyze(
        &data,
        &g,
        &AnalysisOptions::default(),
        &FitRegistry::with_builtins(),
    )
    .unwrap();
    assert!(a.sample("blank").unwrap().sigma_e.is_err());
    assert!(a.table.is_none());
    assert!(a.warnings.iter().any(|w| w.contains("blank")));
}

#[test]
fn concentration_series_from_simulation() {
    let g = presets::quoted_geometry();
    let rows = presets::published_rows(presets::Molecule::ZnTpp);
    let mut samples = vec![SampleSpec::solvent("toluene")];
    samples.extend(rows.iter().map(|r| r.sample()));
    let data = run_experiment(
        &SourceConfig {
            rng_seed: 12,
            ..SourceConfig::default()
        },
        &samples,
        &g,
    )
    .unwrap();
    let a = analyze(
        &data,
        &g,
        &AnalysisOptions::default(),
        &FitRegistry::with_builtins(),
    )
    .unwrap();
    let table = a.table.expect("table");
    assert_eq!(table.rows.len(), 5);
    assert!(table
        .rows
        .windows(2)
        .all(|w| w[0].concentration < w[1].concentration));
    assert!(table.monotonic_decay());
    for (row, published) in table.rows.iter().zip(&rows) {
        assert!(
            (row.sigma_e.value() - published.sigma_e.value()).abs()
                <= 3.0 * row.sigma_e_uncertainty.value()
        );
    }
    assert_eq!(table.product_diagnostics.len(), 10);
}
