use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

pub const EXPONENT_MIN: f64 = 0.05;
pub const EXPONENT_MAX: f64 = 2.0;
pub const EXPONENT_STEP: f64 = 1e-3;

/// `y = a + b x^c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sse: f64,
    /// Set when `y` is constant and `c` carries no information.
    pub degenerate: bool,
}

impl PowerLawFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.a + self.b * x.powf(self.c)
    }
}

/// Least squares over an exponent grid with `(a, b)` solved in closed form
/// for each candidate.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 4 {
        return Err(config_err(format!("power-law fit needs at least 4 points, got {}", points.len())));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(config_err("power-law fit needs positive finite x and finite y"));
    }
    let n = points.len() as f64;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let syy: f64 = points.iter().map(|p| (p.1 - y_mean).powi(2)).sum();
    if syy <= 1e-24 * (1.0 + y_mean * y_mean) * n {
        return Ok(PowerLawFit {
            a: y_mean,
            b: 0.0,
            c: 1.0,
            sse: syy,
            degenerate: true,
        });
    }
    let steps = ((EXPONENT_MAX - EXPONENT_MIN) / EXPONENT_STEP).round() as usize;
    let mut best: Option<PowerLawFit> = None;
    for k in 0..=steps {
        let c = EXPONENT_MIN + EXPONENT_STEP * k as f64;
        let z: Vec<f64> = points.iter().map(|p| p.0.powf(c)).collect();
        let z_mean = z.iter().sum::<f64>() / n;
        let szz: f64 = z.iter().map(|v| (v - z_mean).powi(2)).sum();
        if szz <= 0.0 {
            continue;
        }
        let szy: f64 = z.iter().zip(points).map(|(v, p)| (v - z_mean) * (p.1 - y_mean)).sum();
        let b = szy / szz;
        let a = y_mean - b * z_mean;
        let sse = (syy - b * szy).max(0.0);
        if best.is_none_or(|f| sse < f.sse) {
            best = Some(PowerLawFit {
                a,
                b,
                c,
                sse,
                degenerate: false,
            });
        }
    }
    best.ok_or_else(|| config_err("power-law fit needs at least two distinct x values"))
}
