//! Power-law check for degree distributions: log-log linearization and an
//! ordinary least squares fit with a two-sided t-test on the slope.
//!
//! Raw counts are fitted (no normalization to probabilities); the constant
//! only moves the intercept. Logs are base 10, which leaves slope and p-value
//! unchanged.

use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::analytics::DegreeHistogram;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogLogPoints {
    /// `(log10 degree, log10 count)`, degrees strictly increasing.
    pub points: Vec<(f64, f64)>,
}

impl LogLogPoints {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Robustness knobs, both off by default.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LogLogOptions {
    /// Drop degrees below this before fitting.
    pub min_degree: Option<usize>,
    /// Aggregate into logarithmic bins with this many bins per decade; each
    /// bin contributes its count per integer degree at the bin's geometric
    /// center.
    pub log_bins_per_decade: Option<usize>,
}

/// One point per stored degree. Degree 0 (isolated nodes) has no logarithm
/// and is skipped.
pub fn loglog_points(hist: &DegreeHistogram) -> Result<LogLogPoints> {
    loglog_points_with(hist, &LogLogOptions::default())
}

pub fn loglog_points_with(hist: &DegreeHistogram, options: &LogLogOptions) -> Result<LogLogPoints> {
    let floor = options.min_degree.unwrap_or(1).max(1);
    let kept: Vec<(usize, usize)> = hist
        .counts
        .iter()
        .filter(|&(&d, &c)| d >= floor && c > 0)
        .map(|(&d, &c)| (d, c))
        .collect();
    if kept.is_empty() {
        return Err(Error::InsufficientData("degree histogram has no positive degrees".into()));
    }
    let points = match options.log_bins_per_decade {
        None | Some(0) => kept
            .iter()
            .map(|&(d, c)| ((d as f64).log10(), (c as f64).log10()))
            .collect(),
        Some(per_decade) => log_binned(&kept, per_decade),
    };
    Ok(LogLogPoints { points })
}

fn log_binned(kept: &[(usize, usize)], per_decade: usize) -> Vec<(f64, f64)> {
    let step = 1.0 / per_decade as f64;
    let bin_of = |d: usize| ((d as f64).log10() / step + 1e-9).floor() as i64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < kept.len() {
        let bin = bin_of(kept[i].0);
        let mut total = 0usize;
        while i < kept.len() && bin_of(kept[i].0) == bin {
            total += kept[i].1;
            i += 1;
        }
        let lo = 10f64.powf(bin as f64 * step);
        let hi = 10f64.powf((bin + 1) as f64 * step);
        // integer degrees d with lo <= d < hi
        let width = ((hi - 1e-9).ceil() - lo.ceil()).max(1.0);
        let center = (lo * hi).sqrt();
        out.push((center.log10(), (total as f64 / width).log10()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLawFit {
    /// Estimate of `-k`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub std_error: f64,
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    /// Two-sided p-value for H0: slope = 0.
    pub p_value: f64,
    pub n_points: usize,
}

/// Closed-form OLS of y on x with a Student-t test of the slope.
pub fn ols_fit(points: &LogLogPoints) -> Result<PowerLawFit> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 distinct points for a slope test, got {n}"
        )));
    }
    let nf = n as f64;
    let x_mean = points.points.iter().map(|p| p.0).sum::<f64>() / nf;
    let y_mean = points.points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &points.points {
        let dx = x - x_mean;
        let dy = y - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all x values are identical".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let sse: f64 = points
        .points
        .iter()
        .map(|&(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let df = n - 2;
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    let std_error = (sse / df as f64 / sxx).sqrt();
    let (t_statistic, p_value) = if std_error == 0.0 {
        if slope == 0.0 {
            (0.0, 1.0)
        } else {
            (slope.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = slope / std_error;
        (t, (2.0 * student_t_sf(t.abs(), df)).clamp(0.0, 1.0))
    };
    Ok(PowerLawFit {
        slope,
        intercept,
        r_squared,
        std_error,
        t_statistic,
        degrees_of_freedom: df,
        p_value,
        n_points: n,
    })
}

/// Fits the log-log degree distribution of a histogram.
pub fn fit_degree_distribution(hist: &DegreeHistogram, options: &LogLogOptions) -> Result<PowerLawFit> {
    ols_fit(&loglog_points_with(hist, options)?)
}

/// `P(T > t)` for Student's t with `df` degrees of freedom, through the
/// regularized incomplete beta function.
pub fn student_t_sf(t: f64, df: usize) -> f64 {
    assert!(df >= 1, "degrees of freedom must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    if t == 0.0 {
        return 0.5;
    }
    let v = df as f64;
    let tail = if t.is_infinite() {
        0.0
    } else {
        0.5 * beta_reg(v / 2.0, 0.5, v / (v + t * t))
    };
    if t > 0.0 {
        tail
    } else {
        1.0 - tail
    }
}
