//! Central finite-difference verification of analytic gradients.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator so coordinates with
    /// near-zero gradient are judged by absolute error.
    pub floor: f64,
    /// Check only every `stride`-th coordinate.
    pub stride: usize,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-6,
            floor: 1e-6,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub worst_index: usize,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares the analytic gradient returned by `f` at `point` with central
/// differences. Relative error per coordinate is
/// `|a - n| / max(|a| + |n|, floor)`.
pub fn gradient_check<F>(f: F, point: &[f64], cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (value, analytic) = f(point)?;
    if !value.is_finite() {
        return Err(Error::NonFinite("function value".into()));
    }
    if analytic.len() != point.len() {
        return Err(Error::Shape(format!(
            "gradient has {} entries for {} coordinates",
            analytic.len(),
            point.len()
        )));
    }
    if analytic.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("analytic gradient".into()));
    }
    let mut x = point.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_index: 0,
        checked: 0,
        tolerance: cfg.tolerance,
        passed: true,
    };
    for i in (0..point.len()).step_by(cfg.stride.max(1)) {
        let orig = x[i];
        x[i] = orig + cfg.step;
        let (plus, _) = f(&x)?;
        x[i] = orig - cfg.step;
        let (minus, _) = f(&x)?;
        x[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("function value near coordinate {i}")));
        }
        let numeric = (plus - minus) / (2.0 * cfg.step);
        let abs = (analytic[i] - numeric).abs();
        let rel = abs / (analytic[i].abs() + numeric.abs()).max(cfg.floor);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
        report.max_abs_error = report.max_abs_error.max(abs);
        report.checked += 1;
    }
    report.passed = report.max_rel_error < cfg.tolerance;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_is_exact() {
        // f(x) = c . (A x), a linear functional of x.
        let a = [[1.0, -2.0, 0.5], [3.0, 0.25, -1.0]];
        let c = [0.7, -1.3];
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let ax: Vec<f64> = a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect();
            let value = ax.iter().zip(&c).map(|(p, q)| p * q).sum();
            let grad = (0..3).map(|j| (0..2).map(|i| c[i] * a[i][j]).sum()).collect();
            Ok((value, grad))
        };
        let cfg = GradCheckConfig {
            tolerance: 1e-9,
            ..GradCheckConfig::default()
        };
        let r = gradient_check(f, &[0.3, -1.2, 2.0], &cfg).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.checked, 3);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let f = |x: &[f64]| Ok((x[0] * x[0], vec![x[0]]));
        let r = gradient_check(f, &[1.5], &GradCheckConfig::default()).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn non_finite_is_an_error() {
        let f = |x: &[f64]| Ok((x[0].ln(), vec![1.0 / x[0]]));
        assert!(gradient_check(f, &[-1.0], &GradCheckConfig::default()).is_err());
    }
}
