//! Bayesian observer: noisy measurement, Bayes-least-squares estimate,
//! noisy production.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::error::{config_err, numeric_err, Result};

/// Half-width of the likelihood window in measurement standard deviations.
const WINDOW_SDS: f64 = 8.5;
/// Quadrature nodes over the measurement distribution.
const MEASUREMENT_NODES: usize = 101;
/// Measurement distribution half-width in standard deviations.
const MEASUREMENT_SDS: f64 = 5.0;
pub const DEFAULT_GRID_POINTS: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverParams {
    /// Coefficient of variation of the measurement.
    pub w_m: f64,
    /// Coefficient of variation of the production.
    pub w_p: f64,
}

impl ObserverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_m.is_finite() && self.w_m > 0.0 && self.w_p.is_finite() && self.w_p > 0.0) {
            return Err(config_err(format!(
                "observer parameters must be finite and positive, got w_m={} w_p={}",
                self.w_m, self.w_p
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformPrior {
    pub t_min: f64,
    pub t_max: f64,
}

impl UniformPrior {
    pub fn new(t_min: f64, t_max: f64) -> Result<Self> {
        let p = Self { t_min, t_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_min < self.t_max && self.t_max.is_finite()) {
            return Err(config_err(format!(
                "prior needs 0 < t_min < t_max, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        Ok(())
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.t_min + self.t_max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproductionTrial {
    pub t_s: f64,
    pub t_p: f64,
}

/// Reciprocal-interval range `[u_lo, u_hi]` where the likelihood of `t_m`
/// is not negligible.
///
/// With `u = 1/t` the measurement exponent is `-(t_m u - 1)^2 / (2 w^2)`,
/// a Gaussian in `u` with mean `1/t_m` and sd `w/t_m`. The window keeps every
/// `u` whose exponent is within `WINDOW_SDS^2 / 2` of its best value inside
/// the prior.
fn likelihood_window(t_m: f64, w_m: f64, prior: &UniformPrior) -> (f64, f64) {
    let (u_min, u_max) = (1.0 / prior.t_max, 1.0 / prior.t_min);
    let center = 1.0 / t_m;
    let sd = w_m / t_m;
    let d = (center.clamp(u_min, u_max) - center).abs();
    let reach = (d * d + (WINDOW_SDS * sd).powi(2)).sqrt();
    let lo = (center - reach).max(u_min);
    let hi = (center + reach).min(u_max);
    (lo, hi.max(lo))
}

/// Log of the posterior numerator and denominator integrands over `u`,
/// up to a shared constant, and their derivatives.
///
/// The likelihood `N(t_m; t, (w t)^2)` is `u exp(q(u))` up to constants and
/// `dt = du / u^2`, so the denominator integrand is `exp(q)/u` and the
/// numerator `exp(q)/u^2`.
fn log_integrand(t_m: f64, u: f64, w_m: f64) -> (f64, f64) {
    let r = t_m * u - 1.0;
    let q = -0.5 * r * r / (w_m * w_m);
    (q - u.ln(), -t_m * r / (w_m * w_m) - 1.0 / u)
}

/// Posterior mean of the sample interval given measurement `t_m` under a
/// uniform prior on `[t_min, t_max]`.
///
/// The integrals are taken over `u = 1/t`, where the likelihood exponent is
/// exactly quadratic, by the trapezoid rule on `grid_points` uniform nodes
/// spanning the likelihood's support, with the analytic endpoint-derivative
/// correction so truncation at a prior edge stays fourth order. Weights are
/// formed in log space with the maximum subtracted.
pub fn bls_estimate(t_m: f64, w_m: f64, prior: &UniformPrior, grid_points: usize) -> Result<f64> {
    if !(w_m > 0.0 && w_m.is_finite()) || !(t_m > 0.0 && t_m.is_finite()) {
        return Err(config_err(format!("bls_estimate needs t_m > 0 and w_m > 0, got {t_m}, {w_m}")));
    }
    let n = grid_points.max(2);
    let (lo, hi) = likelihood_window(t_m, w_m, prior);
    if hi - lo <= 0.0 {
        return Ok(1.0 / lo);
    }
    let h = (hi - lo) / (n - 1) as f64;
    let node = |i: usize| if i == n - 1 { hi } else { lo + h * i as f64 };
    let logs: Vec<f64> = (0..n).map(|i| log_integrand(t_m, node(i), w_m).0).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (i, l) in logs.iter().enumerate() {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 } * (l - max).exp();
        den += w;
        num += w / node(i);
    }
    // Endpoint terms -h/12 (F'(hi) - F'(lo)) in units of the node sums.
    let slopes = |u: f64| {
        let (l, dl) = log_integrand(t_m, u, w_m);
        let f = (l - max).exp();
        (f * dl, f / u * (dl - 1.0 / u))
    };
    let ((dd_lo, dn_lo), (dd_hi, dn_hi)) = (slopes(lo), slopes(hi));
    den -= h / 12.0 * (dd_hi - dd_lo);
    num -= h / 12.0 * (dn_hi - dn_lo);
    if !(den > 0.0) || !num.is_finite() {
        return Err(numeric_err(format!("degenerate posterior for t_m={t_m}, w_m={w_m}")));
    }
    Ok((num / den).clamp(1.0 / hi, 1.0 / lo))
}

fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// Production noise with non-positive draws redrawn: a Gaussian with mean
/// `t_e` and sd `w_p t_e` truncated to `t_p > 0`.
#[derive(Clone, Copy, Debug)]
struct Production {
    w_p: f64,
    /// Mass of the untruncated Gaussian above zero.
    mass: f64,
}

impl Production {
    fn new(w_p: f64) -> Self {
        Self {
            w_p,
            mass: StdNormal::new(0.0, 1.0).expect("unit normal").cdf(1.0 / w_p),
        }
    }

    fn density(&self, t_p: f64, t_e: f64) -> f64 {
        if t_p <= 0.0 {
            return 0.0;
        }
        normal_pdf(t_p, t_e, self.w_p * t_e) / self.mass
    }

    /// Mean and second moment.
    fn moments(&self, t_e: f64) -> (f64, f64) {
        let sd = self.w_p * t_e;
        let alpha = -1.0 / self.w_p;
        let lambda = normal_pdf(alpha, 0.0, 1.0) / self.mass;
        let mean = t_e + sd * lambda;
        let var = sd * sd * (1.0 + alpha * lambda - lambda * lambda);
        (mean, var + mean * mean)
    }
}

/// Measurement quadrature for one sample interval: nodes `t_m` with
/// normalised weights and the estimate at each node.
#[derive(Clone, Debug)]
pub struct MeasurementGrid {
    pub t_s: f64,
    pub weights: Vec<f64>,
    pub estimates: Vec<f64>,
}

impl MeasurementGrid {
    /// Nodes span `t_s ± 5 w_m t_s`, truncated to positive measurements;
    /// weights are renormalised over the truncated range.
    pub fn new(t_s: f64, w_m: f64, prior: &UniformPrior) -> Result<Self> {
        let sd = w_m * t_s;
        let lo = (t_s - MEASUREMENT_SDS * sd).max(1e-9 * t_s);
        let hi = t_s + MEASUREMENT_SDS * sd;
        let n = MEASUREMENT_NODES;
        let h = (hi - lo) / (n - 1) as f64;
        let mut weights = Vec::with_capacity(n);
        let mut estimates = Vec::with_capacity(n);
        for i in 0..n {
            let t_m = lo + h * i as f64;
            let end = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            weights.push(end * normal_pdf(t_m, t_s, sd));
            estimates.push(bls_estimate(t_m, w_m, prior, DEFAULT_GRID_POINTS)?);
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(numeric_err(format!("empty measurement distribution at t_s={t_s}")));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            t_s,
            weights,
            estimates,
        })
    }

    pub fn density(&self, t_p: f64, w_p: f64) -> f64 {
        let prod = Production::new(w_p);
        self.weights
            .iter()
            .zip(&self.estimates)
            .map(|(w, &te)| w * prod.density(t_p, te))
            .sum()
    }

    /// Model mean and standard deviation of `t_p`.
    pub fn moments(&self, w_p: f64) -> (f64, f64) {
        let prod = Production::new(w_p);
        let (mut mean, mut second) = (0.0, 0.0);
        for (w, &te) in self.weights.iter().zip(&self.estimates) {
            let (m, s) = prod.moments(te);
            mean += w * m;
            second += w * s;
        }
        (mean, (second - mean * mean).max(0.0).sqrt())
    }
}

/// `p(t_p | t_s)` marginalised over the measurement.
pub fn predictive_density(t_p: f64, t_s: f64, params: &ObserverParams, prior: &UniformPrior) -> Result<f64> {
    params.validate()?;
    prior.validate()?;
    if !(t_s > 0.0) {
        return Err(config_err("t_s must be positive"));
    }
    Ok(MeasurementGrid::new(t_s, params.w_m, prior)?.density(t_p, params.w_p))
}

/// Draws trials from the three-stage generative model. Non-positive
/// measurement or production draws are redrawn.
pub fn simulate_observer(
    params: &ObserverParams,
    prior: &UniformPrior,
    sample_intervals: &[f64],
    n_per: usize,
    seed: u64,
) -> Result<Vec<ReproductionTrial>> {
    params.validate()?;
    prior.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(sample_intervals.len() * n_per);
    for &t_s in sample_intervals {
        if !(t_s > 0.0) {
            return Err(config_err("sample intervals must be positive"));
        }
        let measure = Normal::new(t_s, params.w_m * t_s).map_err(|e| config_err(e.to_string()))?;
        for _ in 0..n_per {
            let t_m = loop {
                let v = measure.sample(&mut rng);
                if v > 0.0 {
                    break v;
                }
            };
            let t_e = bls_estimate(t_m, params.w_m, prior, DEFAULT_GRID_POINTS)?;
            let produce = Normal::new(t_e, params.w_p * t_e).map_err(|e| config_err(e.to_string()))?;
            let t_p = loop {
                let v = produce.sample(&mut rng);
                if v > 0.0 {
                    break v;
                }
            };
            out.push(ReproductionTrial { t_s, t_p });
        }
    }
    Ok(out)
}
