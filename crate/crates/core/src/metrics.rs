//! Evaluation metrics and comparison tables.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Default guard for the bias relative error (meters).
pub const RE_GUARD_BIAS_M: f64 = 1.0;
/// Default guard for the drift relative error (m/s).
pub const RE_GUARD_DRIFT_MPS: f64 = 0.01;

/// Root mean square error over two equal-length traces.
pub fn rmse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() || estimate.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "rmse needs equal nonempty traces, got {} and {}",
            estimate.len(),
            truth.len()
        )));
    }
    let sq: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sq / estimate.len() as f64).sqrt())
}

/// Per-epoch relative error `|est - truth| / max(|truth|, guard)`; the guard
/// keeps the ratio meaningful where the truth crosses zero.
pub fn relative_error(estimate: &[f64], truth: &[f64], guard: f64) -> Result<Vec<f64>> {
    if estimate.len() != truth.len() {
        return Err(Error::InvalidArgument("relative_error length mismatch".into()));
    }
    Ok(estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t).abs() / t.abs().max(guard))
        .collect())
}

/// Summary for one estimator over one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorMetrics {
    pub name: String,
    pub rmse_bias_m: f64,
    pub max_abs_bias_err_m: f64,
}

/// Full report for one scenario run.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub label: String,
    pub n_epochs: usize,
    pub estimators: Vec<EstimatorMetrics>,
    /// Relative bias error trace for the robust estimator (when it ran).
    pub re_bias: Vec<f64>,
    /// Relative drift error trace for the robust estimator (when it ran).
    pub re_drift: Vec<f64>,
    /// Whether the injected attack crosses the infringement threshold.
    pub attack_compliant: bool,
}

impl MetricsReport {
    pub fn estimator(&self, name: &str) -> Option<&EstimatorMetrics> {
        self.estimators.iter().find(|e| e.name == name)
    }
}

/// Aligned text table of estimator metrics across reports, with a
/// machine-readable CSV twin.
pub fn compare_table(reports: &[MetricsReport]) -> Result<(String, String)> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("compare_table needs at least one report".into()));
    }
    let mut text = String::new();
    let mut csv = String::from("scenario,estimator,rmse_bias_m,max_abs_bias_err_m,compliant\n");
    let _ = writeln!(
        text,
        "{:<16} {:<12} {:>14} {:>20} {:>10}",
        "scenario", "estimator", "rmse_bias_m", "max_abs_bias_err_m", "compliant"
    );
    for report in reports {
        for est in &report.estimators {
            let _ = writeln!(
                text,
                "{:<16} {:<12} {:>14.3} {:>20.3} {:>10}",
                report.label, est.name, est.rmse_bias_m, est.max_abs_bias_err_m, report.attack_compliant
            );
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                report.label, est.name, est.rmse_bias_m, est.max_abs_bias_err_m, report.attack_compliant
            );
        }
    }
    Ok((text, csv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rmse_identical_is_zero() {
        let t = vec![1.0, -2.0, 3.5];
        assert_eq!(rmse(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn rmse_constant_offset() {
        let truth = vec![10.0, 20.0, 30.0, 40.0];
        let est: Vec<f64> = truth.iter().map(|v| v + 3.0).collect();
        assert_relative_eq!(rmse(&est, &truth).unwrap(), 3.0);
    }

    #[test]
    fn rmse_accepts_paper_length() {
        let truth = vec![0.0; 400];
        assert_eq!(rmse(&truth, &truth).unwrap(), 0.0);
    }

    #[test]
    fn rmse_rejects_mismatch_and_empty() {
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn rmse_reorder_invariance_and_monotonicity() {
        use rand::{seq::SliceRandom, Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let truth: Vec<f64> = (0..64).map(|_| rng.random_range(-50.0..50.0)).collect();
        let est: Vec<f64> = truth.iter().map(|v| v + rng.random_range(-5.0..5.0)).collect();
        let base = rmse(&est, &truth).unwrap();

        let mut idx: Vec<usize> = (0..truth.len()).collect();
        idx.shuffle(&mut rng);
        let est2: Vec<f64> = idx.iter().map(|&i| est[i]).collect();
        let truth2: Vec<f64> = idx.iter().map(|&i| truth[i]).collect();
        assert_relative_eq!(rmse(&est2, &truth2).unwrap(), base, max_relative = 1e-12);

        // Increasing any single |error| strictly increases the rmse.
        let mut worse = est.clone();
        worse[7] = truth[7] + (worse[7] - truth[7]).abs() + 1.0;
        assert!(rmse(&worse, &truth).unwrap() > base);
    }

    #[test]
    fn relative_error_basics() {
        let truth = vec![100.0];
        let est = vec![110.0];
        let re = relative_error(&est, &truth, RE_GUARD_BIAS_M).unwrap();
        assert_relative_eq!(re[0], 0.10);

        let same = relative_error(&truth, &truth, RE_GUARD_BIAS_M).unwrap();
        assert_eq!(same[0], 0.0);

        // Zero truth with guard 1: relative error equals absolute error.
        let re = relative_error(&[0.25], &[0.0], 1.0).unwrap();
        assert_relative_eq!(re[0], 0.25);
    }

    #[test]
    fn compare_table_shapes() {
        let report = MetricsReport {
            label: "type1".into(),
            n_epochs: 400,
            estimators: vec![EstimatorMetrics {
                name: "robust".into(),
                rmse_bias_m: 400.0,
                max_abs_bias_err_m: 8000.0,
            }],
            re_bias: vec![],
            re_drift: vec![],
            attack_compliant: true,
        };
        let (text, csv) = compare_table(std::slice::from_ref(&report)).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("type1,robust,"));

        let two = vec![report.clone(), MetricsReport { label: "type2".into(), ..report }];
        let (text, _) = compare_table(&two).unwrap();
        assert_eq!(text.lines().count(), 3);

        assert!(compare_table(&[]).is_err());
    }
}
