use statrs::distribution::{ContinuousCDF, StudentsT};

use super::performance::mean_and_sd;
use super::EvalRecord;

/// `(t_s, sample sd of t_p)` for every interval with at least two completed
/// trials, sorted by `t_s`.
pub fn scalar_variability(records: &[EvalRecord]) -> Vec<(f64, f64)> {
    let mut intervals: Vec<u32> = records.iter().map(|r| r.t_s).collect();
    intervals.sort_unstable();
    intervals.dedup();
    intervals
        .into_iter()
        .filter_map(|t_s| {
            let t_ps: Vec<f64> = records.iter().filter(|r| r.t_s == t_s).filter_map(|r| r.t_p.map(f64::from)).collect();
            mean_and_sd(&t_ps).1.map(|sd| (t_s as f64, sd))
        })
        .collect()
}

/// Ranks from 1 with ties given their average rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankCorrelation {
    pub rho: f64,
    /// Two-sided, from the t approximation with `n - 2` degrees of freedom.
    pub p_value: f64,
    pub n: usize,
}

/// Spearman correlation, `None` when either variable is constant or fewer
/// than three pairs are given.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<RankCorrelation> {
    let n = x.len().min(y.len());
    if n < 3 {
        return None;
    }
    let (rx, ry) = (ranks(&x[..n]), ranks(&y[..n]));
    let m = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - m) * (b - m);
        sxx += (a - m).powi(2);
        syy += (b - m).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let p_value = if n == 3 || rho.abs() >= 1.0 {
        if rho.abs() >= 1.0 && n > 3 {
            0.0
        } else {
            1.0
        }
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Some(RankCorrelation { rho, p_value, n })
}
