//! Least-squares estimate of the quality scaling exponent from an MSE curve.

use crate::error::invalid;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentFit {
    /// Slope of `-log2(mse)` against `log2(snr)`.
    pub alpha: f64,
    pub stderr: f64,
    pub n_points: usize,
}

/// Fits `mse ~ snr^{-α}` over the points within `window_decades` of the
/// highest SNR. `curve` holds `(snr_db, mse)` pairs in any order.
pub fn fit_exponent(curve: &[(f64, f64)], window_decades: f64) -> Result<ExponentFit> {
    let top = curve.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let lo = top - 10.0 * window_decades - 1e-9;
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|p| p.0 >= lo)
        .map(|&(db, mse)| (db / 10.0 * std::f64::consts::LOG2_10, -mse.log2()))
        .collect();
    if pts.len() < 3 {
        return Err(invalid(format!("exponent fit needs at least 3 points in the window, got {}", pts.len())));
    }
    if pts.iter().any(|p| !p.1.is_finite()) {
        return Err(invalid("exponent fit needs finite positive MSE values"));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("exponent fit needs distinct SNR values"));
    }
    let alpha = sxy / sxx;
    let sse: f64 = pts.iter().map(|p| (p.1 - my - alpha * (p.0 - mx)).powi(2)).sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    Ok(ExponentFit { alpha, stderr, n_points: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..9).map(|i| 20.0 + 5.0 * i as f64).collect()
    }

    #[test]
    fn exact_power_law() {
        let c: Vec<_> = grid().into_iter().map(|db| (db, 3.0 * 10f64.powf(db / 10.0).powf(-0.5))).collect();
        let f = fit_exponent(&c, 1.0).unwrap();
        assert!((f.alpha - 0.5).abs() < 1e-6);
        assert!(f.stderr < 1e-6);
        assert_eq!(f.n_points, 3);
    }

    #[test]
    fn constant_curve() {
        let c: Vec<_> = grid().into_iter().map(|db| (db, 7.5)).collect();
        assert!(fit_exponent(&c, 4.0).unwrap().alpha.abs() < 1e-6);
    }

    #[test]
    fn too_few_points() {
        assert!(fit_exponent(&[(50.0, 1.0), (60.0, 0.1)], 1.0).is_err());
        let c: Vec<_> = grid().into_iter().map(|db| (db, 1.0)).collect();
        assert!(fit_exponent(&c, 0.5).is_err());
    }
}
