use serde::{Deserialize, Serialize};

use super::observer::{MeasurementGrid, ObserverParams, ReproductionTrial, UniformPrior};
use super::simplex::{nelder_mead, SimplexOptions};
use crate::error::{config_err, Error, Result};
use crate::par;

/// Search box for both coefficients of variation.
pub const W_LOWER: f64 = 1e-3;
pub const W_UPPER: f64 = 1.0;
const START_GRID: [f64; 4] = [0.05, 0.1, 0.2, 0.4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ObserverParams,
    pub nll: f64,
    pub converged: bool,
    pub n_restarts_used: usize,
}

/// Trials grouped by sample interval in a canonical order so that sums do
/// not depend on the input order.
#[derive(Clone, Debug)]
pub struct TrialGroups {
    groups: Vec<(f64, Vec<f64>)>,
}

impl TrialGroups {
    pub fn new(trials: &[ReproductionTrial]) -> Result<Self> {
        let mut sorted = trials.to_vec();
        for t in &sorted {
            if !(t.t_s > 0.0 && t.t_p > 0.0 && t.t_s.is_finite() && t.t_p.is_finite()) {
                return Err(config_err(format!("trial needs positive t_s and t_p, got {t:?}")));
            }
        }
        sorted.sort_by(|a, b| a.t_s.total_cmp(&b.t_s).then(a.t_p.total_cmp(&b.t_p)));
        let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
        for t in sorted {
            match groups.last_mut() {
                Some((ts, v)) if *ts == t.t_s => v.push(t.t_p),
                _ => groups.push((t.t_s, vec![t.t_p])),
            }
        }
        Ok(Self { groups })
    }

    pub fn distinct_intervals(&self) -> usize {
        self.groups.len()
    }

    /// `Σ −log p(t_p | t_s)`.
    pub fn nll(&self, params: &ObserverParams, prior: &UniformPrior) -> Result<f64> {
        params.validate()?;
        let parts = par::map(&self.groups, |(t_s, tps)| -> Result<f64> {
            let grid = MeasurementGrid::new(*t_s, params.w_m, prior)?;
            Ok(tps.iter().map(|&tp| -grid.density(tp, params.w_p).ln()).sum())
        });
        let mut total = 0.0;
        for p in parts {
            total += p?;
        }
        Ok(total)
    }
}

/// Negative log-likelihood of the trials under the observer.
pub fn observer_nll(trials: &[ReproductionTrial], params: &ObserverParams, prior: &UniformPrior) -> Result<f64> {
    TrialGroups::new(trials)?.nll(params, prior)
}

/// Maximum-likelihood fit of `(w_m, w_p)`. The starting grid is scored
/// and simplex descent in log space runs from the best `restarts` points.
pub fn fit_observer(trials: &[ReproductionTrial], prior: &UniformPrior, restarts: usize) -> Result<FitResult> {
    prior.validate()?;
    let groups = TrialGroups::new(trials)?;
    if groups.distinct_intervals() < 2 {
        return Err(Error::Degenerate("observer fit needs at least two distinct sample intervals".into()));
    }
    let objective = |x: &[f64]| {
        let p = ObserverParams {
            w_m: x[0].exp(),
            w_p: x[1].exp(),
        };
        groups.nll(&p, prior).unwrap_or(f64::INFINITY)
    };
    let mut starts: Vec<(f64, [f64; 2])> = Vec::new();
    for &w_m in &START_GRID {
        for &w_p in &START_GRID {
            let x = [w_m.ln(), w_p.ln()];
            starts.push((objective(&x), x));
        }
    }
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n_starts = restarts.clamp(1, starts.len());
    let (lo, hi) = ([W_LOWER.ln(); 2], [W_UPPER.ln(); 2]);
    let opts = SimplexOptions::default();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut converged = false;
    for (_, x0) in starts.iter().take(n_starts) {
        let r = nelder_mead(objective, x0, &lo, &hi, &opts);
        converged |= r.converged;
        if best.as_ref().is_none_or(|(f, _)| r.f < *f) {
            best = Some((r.f, r.x));
        }
    }
    let (nll, x) = best.expect("at least one start");
    let params = ObserverParams {
        w_m: x[0].exp(),
        w_p: x[1].exp(),
    };
    Ok(FitResult {
        params,
        nll,
        converged: converged && nll.is_finite(),
        n_restarts_used: n_starts,
    })
}
