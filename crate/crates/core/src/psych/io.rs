use std::fmt::Write as _;
use std::path::Path;

use super::observer::{MeasurementGrid, ObserverParams, ReproductionTrial, UniformPrior};
use crate::error::{config_err, Result};

pub const TRIALS_CSV_HEADER: &str = "t_s,t_p";
pub const PREDICTION_CSV_HEADER: &str = "t_s,model_mean_t_p,model_sd_t_p,data_mean_t_p,data_sd_t_p,n";

/// Parses `t_s,t_p` CSV text. Blank lines are skipped.
pub fn parse_trials_csv(text: &str) -> Result<Vec<ReproductionTrial>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == TRIALS_CSV_HEADER => {}
        other => {
            return Err(config_err(format!(
                "expected header `{TRIALS_CSV_HEADER}`, got {:?}",
                other.map(|(_, l)| l)
            )))
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| config_err(format!("line {}: cannot parse `{line}`", i + 1)))
        };
        let mut cols = line.split(',');
        let t_s = parse(cols.next())?;
        let t_p = parse(cols.next())?;
        if cols.next().is_some() {
            return Err(config_err(format!("line {}: expected two columns", i + 1)));
        }
        if !(t_s > 0.0 && t_p > 0.0) {
            return Err(config_err(format!("line {}: intervals must be positive", i + 1)));
        }
        out.push(ReproductionTrial { t_s, t_p });
    }
    Ok(out)
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<ReproductionTrial>> {
    parse_trials_csv(&std::fs::read_to_string(path)?)
}

pub fn trials_csv(trials: &[ReproductionTrial]) -> String {
    let mut s = format!("{TRIALS_CSV_HEADER}\n");
    for t in trials {
        let _ = writeln!(s, "{},{}", t.t_s, t.t_p);
    }
    s
}

/// Model-predicted mean and sd of `t_p` per distinct `t_s`, next to the
/// empirical values.
pub fn prediction_csv(trials: &[ReproductionTrial], params: &ObserverParams, prior: &UniformPrior) -> Result<String> {
    let mut intervals: Vec<f64> = trials.iter().map(|t| t.t_s).collect();
    intervals.sort_by(f64::total_cmp);
    intervals.dedup();
    let mut s = format!("{PREDICTION_CSV_HEADER}\n");
    for t_s in intervals {
        let (m, sd) = MeasurementGrid::new(t_s, params.w_m, prior)?.moments(params.w_p);
        let tps: Vec<f64> = trials.iter().filter(|t| t.t_s == t_s).map(|t| t.t_p).collect();
        let n = tps.len() as f64;
        let dm = tps.iter().sum::<f64>() / n;
        let dsd = if tps.len() > 1 {
            (tps.iter().map(|v| (v - dm).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            f64::NAN
        };
        let _ = writeln!(s, "{t_s},{m},{sd},{dm},{dsd},{}", tps.len());
    }
    Ok(s)
}
