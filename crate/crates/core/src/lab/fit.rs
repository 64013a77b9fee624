//! Log-log least squares for convergence rates.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// `log(error) ≈ intercept + slope · log(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// 95% confidence interval for the slope; degenerate when the fit is exact.
    pub slope_ci: (f64, f64),
}

pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::Config(format!("a rate fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(&(n, e)) = points.iter().find(|(n, e)| !(*n > 0.0) || !(*e > 0.0)) {
        return Err(Error::OutOfRange {
            what: if n > 0.0 { "error value" } else { "resolution" },
            value: if n > 0.0 { e } else { n },
            range: "(0, ∞)",
        });
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("rate fit needs at least two distinct resolutions".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    let dof = m - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Config(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(RateFit {
        points: points.to_vec(),
        slope,
        intercept,
        r_squared,
        slope_ci: (slope - t * se, slope + t * se),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let pts: Vec<_> = [16.0, 32.0, 64.0, 128.0].iter().map(|&n: &f64| (n, 1.0 / n)).collect();
        let f = rate_fit(&pts).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let pts: Vec<_> = [16.0, 32.0, 64.0].iter().map(|&n: &f64| (n, 7.0 * n.powf(-0.5))).collect();
        let f = rate_fit(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(rate_fit(&[(1.0, 1.0), (2.0, 0.5)]).is_err());
        assert!(rate_fit(&[(1.0, 1.0), (2.0, 0.0), (4.0, 0.2)]).is_err());
        assert!(rate_fit(&[(2.0, 1.0), (2.0, 0.5), (2.0, 0.2)]).is_err());
    }

    #[test]
    fn interval_covers_slope() {
        let pts = [(16.0, 0.1), (32.0, 0.06), (64.0, 0.024), (128.0, 0.013)];
        let f = rate_fit(&pts).unwrap();
        assert!(f.slope_ci.0 < f.slope && f.slope < f.slope_ci.1);
    }
}
