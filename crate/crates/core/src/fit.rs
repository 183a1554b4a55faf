//! Origin-forced straight-line fits, y = b·x.
//!
//! Each estimator implements [`OriginFit`] and is looked up by name in a
//! [`FitRegistry`], so the analysis can switch estimators from
//! configuration or the command line.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate design: {0}")]
    Degenerate(&'static str),
    #[error("non-finite value in point {0}")]
    NonFinite(usize),
    #[error("unknown fit method '{name}' (available: {available})")]
    UnknownMethod { name: String, available: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPoint {
    pub x: f64,
    pub y: f64,
    /// Standard uncertainty of `y`; `None` or non-positive means unknown.
    pub sigma: Option<f64>,
}

impl FitPoint {
    pub fn new(x: f64, y: f64, sigma: f64) -> Self {
        Self {
            x,
            y,
            sigma: Some(sigma),
        }
    }

    pub fn unweighted(x: f64, y: f64) -> Self {
        Self { x, y, sigma: None }
    }

    fn weight(&self) -> Option<f64> {
        self.sigma
            .filter(|s| *s > 0.0 && s.is_finite())
            .map(|s| 1.0 / (s * s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub slope_stderr: f64,
    /// Present only for fits with a free intercept: (value, stderr).
    pub intercept: Option<(f64, f64)>,
    pub n_points: usize,
    pub chi2_reduced: f64,
    pub forced_through_origin: bool,
    /// Name of the estimator that produced this result.
    pub method: String,
    /// Weighted fits fall back to equal weights when any σ is missing.
    pub weighted: bool,
}

impl FitResult {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept.map_or(0.0, |(a, _)| a) + self.slope * x
    }
}

pub trait OriginFit: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn fit(&self, points: &[FitPoint]) -> Result<FitResult, FitError>;
}

impl fmt::Debug for dyn OriginFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OriginFit({})", self.name())
    }
}

fn check(points: &[FitPoint]) -> Result<(), FitError> {
    if points.len() < 2 {
        return Err(FitError::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    if let Some(i) = points
        .iter()
        .position(|p| !(p.x.is_finite() && p.y.is_finite()))
    {
        return Err(FitError::NonFinite(i));
    }
    if points.iter().all(|p| p.x == 0.0) {
        return Err(FitError::Degenerate("all x are zero"));
    }
    Ok(())
}

/// Equal-weight origin-forced least squares with residual-based stderr.
fn ordinary(points: &[FitPoint], method: &str) -> FitResult {
    let sxx: f64 = points.iter().map(|p| p.x * p.x).sum();
    let sxy: f64 = points.iter().map(|p| p.x * p.y).sum();
    let slope = sxy / sxx;
    let dof = (points.len() - 1) as f64;
    let s2 = points
        .iter()
        .map(|p| (p.y - slope * p.x).powi(2))
        .sum::<f64>()
        / dof;
    FitResult {
        slope,
        slope_stderr: (s2 / sxx).sqrt(),
        intercept: None,
        n_points: points.len(),
        chi2_reduced: s2,
        forced_through_origin: true,
        method: method.to_string(),
        weighted: false,
    }
}

/// Inverse-variance weighted slope, stderr `1/sqrt(Σ w x²)`.
pub fn fit_through_origin(points: &[FitPoint]) -> Result<FitResult, FitError> {
    InverseVariance.fit(points)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct InverseVariance;

impl OriginFit for InverseVariance {
    fn name(&self) -> &'static str {
        "weighted"
    }

    fn description(&self) -> &'static str {
        "inverse-variance weights 1/sigma^2; falls back to equal weights if any sigma is missing"
    }

    fn fit(&self, points: &[FitPoint]) -> Result<FitResult, FitError> {
        check(points)?;
        let weights: Option<Vec<f64>> = points.iter().map(FitPoint::weight).collect();
        let Some(w) = weights else {
            return Ok(ordinary(points, self.name()));
        };
        let swxx: f64 = points.iter().zip(&w).map(|(p, w)| w * p.x * p.x).sum();
        let swxy: f64 = points.iter().zip(&w).map(|(p, w)| w * p.x * p.y).sum();
        let slope = swxy / swxx;
        let chi2: f64 = points
            .iter()
            .zip(&w)
            .map(|(p, w)| w * (p.y - slope * p.x).powi(2))
            .sum();
        Ok(FitResult {
            slope,
            slope_stderr: 1.0 / swxx.sqrt(),
            intercept: None,
            n_points: points.len(),
            chi2_reduced: chi2 / (points.len() - 1) as f64,
            forced_through_origin: true,
            method: self.name().to_string(),
            weighted: true,
        })
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Unweighted;

impl OriginFit for Unweighted {
    fn name(&self) -> &'static str {
        "unweighted"
    }

    fn description(&self) -> &'static str {
        "equal weights; stderr from the residual scatter"
    }

    fn fit(&self, points: &[FitPoint]) -> Result<FitResult, FitError> {
        check(points)?;
        Ok(ordinary(points, self.name()))
    }
}

/// Weighted fit whose stderr is inflated by sqrt(chi2_reduced) when the
/// scatter exceeds the stated uncertainties (Birge ratio > 1).
#[derive(Debug, Default, Clone, Copy)]
pub struct BirgeScaled;

impl OriginFit for BirgeScaled {
    fn name(&self) -> &'static str {
        "birge"
    }

    fn description(&self) -> &'static str {
        "inverse-variance weights; stderr scaled by sqrt(chi2_reduced) when it exceeds 1"
    }

    fn fit(&self, points: &[FitPoint]) -> Result<FitResult, FitError> {
        let mut r = InverseVariance.fit(points)?;
        if r.weighted && r.chi2_reduced > 1.0 {
            r.slope_stderr *= r.chi2_reduced.sqrt();
        }
        r.method = self.name().to_string();
        Ok(r)
    }
}

/// Weighted straight line with a free intercept, y = a + b·x.
pub fn fit_line(points: &[FitPoint]) -> Result<FitResult, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    check(points)?;
    let w: Vec<f64> = match points
        .iter()
        .map(FitPoint::weight)
        .collect::<Option<Vec<f64>>>()
    {
        Some(w) => w,
        None => vec![1.0; points.len()],
    };
    let weighted = points.iter().all(|p| p.weight().is_some());
    let s: f64 = w.iter().sum();
    let sx: f64 = points.iter().zip(&w).map(|(p, w)| w * p.x).sum();
    let sy: f64 = points.iter().zip(&w).map(|(p, w)| w * p.y).sum();
    let sxx: f64 = points.iter().zip(&w).map(|(p, w)| w * p.x * p.x).sum();
    let sxy: f64 = points.iter().zip(&w).map(|(p, w)| w * p.x * p.y).sum();
    let det = s * sxx - sx * sx;
    if det <= 0.0 || det <= 1e-12 * s * sxx {
        return Err(FitError::Degenerate("all x are identical"));
    }
    let slope = (s * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let dof = (points.len() - 2) as f64;
    let chi2 = points
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.y - intercept - slope * p.x).powi(2))
        .sum::<f64>()
        / dof;
    // Unweighted: covariance scaled by the residual variance.
    let scale = if weighted { 1.0 } else { chi2 };
    Ok(FitResult {
        slope,
        slope_stderr: (scale * s / det).sqrt(),
        intercept: Some((intercept, (scale * sxx / det).sqrt())),
        n_points: points.len(),
        chi2_reduced: chi2,
        forced_through_origin: false,
        method: "weighted-line".to_string(),
        weighted,
    })
}

/// Named collection of origin-forced estimators.
#[derive(Clone)]
pub struct FitRegistry {
    methods: BTreeMap<&'static str, Arc<dyn OriginFit>>,
}

impl FitRegistry {
    pub const DEFAULT: &'static str = "weighted";

    pub fn empty() -> Self {
        Self {
            methods: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(InverseVariance));
        r.register(Arc::new(Unweighted));
        r.register(Arc::new(BirgeScaled));
        r
    }

    /// Adds or replaces the estimator under its own name.
    pub fn register(&mut self, method: Arc<dyn OriginFit>) {
        self.methods.insert(method.name(), method);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn OriginFit>, FitError> {
        self.methods
            .get(name)
            .cloned()
            .ok_or_else(|| FitError::UnknownMethod {
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn OriginFit>> {
        self.methods.values()
    }
}

impl Default for FitRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl fmt::Debug for FitRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.methods.keys()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_point_closed_form() {
        let pts = [FitPoint::new(1.0, 2.0, 1.0), FitPoint::new(2.0, 4.0, 1.0)];
        let r = fit_through_origin(&pts).unwrap();
        // slope = (1·2 + 2·4)/(1 + 4), stderr = 1/sqrt(5)
        assert_eq!(r.slope, 2.0);
        assert_relative_eq!(r.slope_stderr, 1.0 / 5f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(r.slope_stderr, 0.4472, max_relative = 1e-4);
        assert!(r.forced_through_origin);
        assert_eq!(r.chi2_reduced, 0.0);
    }

    #[test]
    fn noiseless_recovery() {
        let pts: Vec<FitPoint> = (1..=20)
            .map(|i| {
                let x = 150.0 * i as f64;
                FitPoint::unweighted(x, 0.1935 * x)
            })
            .collect();
        let r = fit_through_origin(&pts).unwrap();
        assert!(!r.weighted);
        assert!((r.slope - 0.1935).abs() / 0.1935 <= 1e-12);
        assert!(r.slope_stderr < 1e-12);
    }

    #[test]
    fn missing_sigma_falls_back_to_unweighted() {
        let pts = [
            FitPoint::new(1.0, 1.0, 0.1),
            FitPoint::unweighted(2.0, 3.0),
            FitPoint::new(3.0, 3.0, 0.0),
        ];
        let w = InverseVariance.fit(&pts).unwrap();
        let u = Unweighted.fit(&pts).unwrap();
        assert_eq!(w.slope, u.slope);
        assert!(!w.weighted);
    }

    #[test]
    fn degenerate_designs() {
        assert!(matches!(
            fit_through_origin(&[FitPoint::new(0.0, 1.0, 1.0), FitPoint::new(0.0, 2.0, 1.0)]),
            Err(FitError::Degenerate(_))
        ));
        assert!(matches!(
            fit_through_origin(&[FitPoint::new(1.0, 1.0, 1.0)]),
            Err(FitError::TooFewPoints { .. })
        ));
        assert!(matches!(
            fit_through_origin(&[
                FitPoint::new(1.0, f64::NAN, 1.0),
                FitPoint::new(2.0, 1.0, 1.0)
            ]),
            Err(FitError::NonFinite(0))
        ));
        let same = [
            FitPoint::new(2.0, 1.0, 1.0),
            FitPoint::new(2.0, 1.1, 1.0),
            FitPoint::new(2.0, 0.9, 1.0),
        ];
        assert!(matches!(fit_line(&same), Err(FitError::Degenerate(_))));
    }

    #[test]
    fn line_fit_recovers_intercept() {
        let pts: Vec<FitPoint> = (0..10)
            .map(|i| FitPoint::new(i as f64, 3.0 + 2.0 * i as f64, 0.5))
            .collect();
        let r = fit_line(&pts).unwrap();
        assert_relative_eq!(r.slope, 2.0, max_relative = 1e-12);
        let (a, _) = r.intercept.unwrap();
        assert_relative_eq!(a, 3.0, max_relative = 1e-12);
        assert_relative_eq!(r.predict(4.0), 11.0, max_relative = 1e-12);
        // σ_b² = S/Δ with S = 10·4, Sxx = 285·4, Sx = 45·4
        let s = 40.0;
        let det = s * 1140.0 - 180.0f64.powi(2);
        assert_relative_eq!(r.slope_stderr, (s / det).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn birge_inflates_only_overdispersed() {
        let tight = [
            FitPoint::new(1.0, 1.0, 1.0),
            FitPoint::new(2.0, 2.1, 1.0),
            FitPoint::new(3.0, 2.9, 1.0),
        ];
        let a = InverseVariance.fit(&tight).unwrap();
        let b = BirgeScaled.fit(&tight).unwrap();
        assert_eq!(a.slope_stderr, b.slope_stderr);
        let loose = [
            FitPoint::new(1.0, 1.0, 0.01),
            FitPoint::new(2.0, 2.5, 0.01),
            FitPoint::new(3.0, 2.5, 0.01),
        ];
        let a = InverseVariance.fit(&loose).unwrap();
        let b = BirgeScaled.fit(&loose).unwrap();
        assert_relative_eq!(
            b.slope_stderr,
            a.slope_stderr * a.chi2_reduced.sqrt(),
            max_relative = 1e-12
        );
        assert_eq!(b.method, "birge");
    }

    #[test]
    fn registry_lookup() {
        let reg = FitRegistry::with_builtins();
        assert_eq!(reg.names(), vec!["birge", "unweighted", "weighted"]);
        assert_eq!(reg.get("weighted").unwrap().name(), "weighted");
        let err = reg.get("lasso").unwrap_err();
        assert!(err.to_string().contains("birge, unweighted, weighted"));
    }

    #[test]
    fn registry_accepts_custom_method() {
        struct Fixed;
        impl OriginFit for Fixed {
            fn name(&self) -> &'static str {
                "fixed"
            }
            fn description(&self) -> &'static str {
                "always 1"
            }
            fn fit(&self, points: &[FitPoint]) -> Result<FitResult, FitError> {
                let mut r = Unweighted.fit(points)?;
                r.slope = 1.0;
                r.method = "fixed".into();
                Ok(r)
            }
        }
        let mut reg = FitRegistry::empty();
        reg.register(Arc::new(Fixed));
        let pts = [
            FitPoint::unweighted(1.0, 5.0),
            FitPoint::unweighted(2.0, 5.0),
        ];
        assert_eq!(reg.get("fixed").unwrap().fit(&pts).unwrap().slope, 1.0);
    }
}
