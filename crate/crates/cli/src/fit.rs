//! Ordinary least squares on (x, y) pairs, used to turn depth series of
//! dB transmissions into attenuation slopes.

#[derive(Debug, thiserror::Error)]
pub enum FitError {
    #[error("need at least 3 points, got {0}")]
    TooFew(usize),
    #[error("all x values are equal")]
    DegenerateX,
    #[error("non-finite input at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn attenuation_fit(points: &[(f64, f64)]) -> Result<LineFit, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFew(points.len()));
    }
    for (i, (x, y)) in points.iter().enumerate() {
        if !(x.is_finite() && y.is_finite()) {
            return Err(FitError::NonFinite(i));
        }
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::DegenerateX);
    }
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    // A constant series is fit exactly by its own mean.
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_line_recovers_slope_and_unit_r2() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 3.0 - 0.55 * i as f64)).collect();
        let fit = attenuation_fit(&pts).unwrap();
        assert_relative_eq!(fit.slope, -0.55, max_relative = 1e-12);
        assert_relative_eq!(fit.intercept, 3.0, max_relative = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn constant_series_has_zero_slope() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.5)).collect();
        let fit = attenuation_fit(&pts).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn noisy_line_reports_sub_unit_r2() {
        let pts: Vec<(f64, f64)> = (0..8)
            .map(|i| {
                let x = i as f64;
                (x, 2.0 * x + if i % 2 == 0 { 0.5 } else { -0.5 })
            })
            .collect();
        let fit = attenuation_fit(&pts).unwrap();
        assert!(fit.r_squared < 1.0);
        assert!(fit.r_squared > 0.9);
        assert_relative_eq!(fit.slope, 2.0, max_relative = 0.05);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(matches!(
            attenuation_fit(&[(0.0, 1.0), (1.0, 2.0)]),
            Err(FitError::TooFew(2))
        ));
        assert!(matches!(
            attenuation_fit(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]),
            Err(FitError::DegenerateX)
        ));
        assert!(matches!(
            attenuation_fit(&[(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0)]),
            Err(FitError::NonFinite(1))
        ));
    }
}
