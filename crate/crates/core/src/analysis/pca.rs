use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::EvalRecord;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alignment {
    Ready,
    Set,
}

/// Leading principal direction of a pooled set of activation vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrincipalComponent {
    pub mean: Vec<f64>,
    /// Unit vector with non-negative loading sum.
    pub direction: Vec<f64>,
    /// Variance along `direction` (population normalisation).
    pub eigenvalue: f64,
}

impl PrincipalComponent {
    pub fn project(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.mean).zip(&self.direction).map(|((x, m), d)| (x - m) * d).sum()
    }
}

/// Leading eigenvector of the covariance of `rows`.
pub fn leading_component(rows: &[Vec<f64>]) -> Result<PrincipalComponent> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("principal component needs at least 2 frames, got {n}")));
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Degenerate("activation vectors are empty or of unequal length".into()));
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / n as f64;
    let total: f64 = cov.diagonal().iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Degenerate("activations have zero variance".into()));
    }
    let eig = SymmetricEigen::new(cov);
    let (k, &eigenvalue) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let mut direction: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    if direction.iter().sum::<f64>() < 0.0 {
        direction.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(PrincipalComponent {
        mean,
        direction,
        eigenvalue,
    })
}

/// Mean projection per frame offset from the alignment cue, for one
/// sample interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedTrace {
    pub t_s: u32,
    pub offsets: Vec<i64>,
    /// `None` where no trial covers the offset.
    pub mean: Vec<Option<f64>>,
    pub counts: Vec<usize>,
}

impl AlignedTrace {
    pub fn at(&self, offset: i64) -> Option<f64> {
        self.offsets.iter().position(|&o| o == offset).and_then(|i| self.mean[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    pub alignment: Alignment,
    pub component: PrincipalComponent,
    pub traces: Vec<AlignedTrace>,
}

fn onset(r: &EvalRecord, alignment: Alignment) -> Option<u32> {
    match alignment {
        Alignment::Ready => r.ready_onset,
        Alignment::Set => r.set_onset,
    }
}

/// Pools every recorded frame of every trial, finds the first principal
/// component, projects each frame and averages the projections per sample
/// interval at offsets `window.0..=window.1` from the chosen cue.
pub fn pca_first_component(records: &[EvalRecord], alignment: Alignment, window: (i64, i64)) -> Result<PcaSummary> {
    let rows: Vec<Vec<f64>> = records
        .iter()
        .flat_map(|r| r.hidden.iter().map(|h| h.iter().map(|&v| v as f64).collect()))
        .collect();
    if rows.is_empty() {
        return Err(Error::Degenerate("records carry no hidden-state traces".into()));
    }
    let component = leading_component(&rows)?;
    let offsets: Vec<i64> = (window.0..=window.1).collect();
    let mut intervals: Vec<u32> = records.iter().map(|r| r.t_s).collect();
    intervals.sort_unstable();
    intervals.dedup();
    let traces = intervals
        .into_iter()
        .map(|t_s| {
            let mut sums = vec![0.0; offsets.len()];
            let mut counts = vec![0; offsets.len()];
            for r in records.iter().filter(|r| r.t_s == t_s) {
                let Some(cue) = onset(r, alignment) else { continue };
                for (i, &o) in offsets.iter().enumerate() {
                    let frame = cue as i64 + o;
                    if frame >= 0 && (frame as usize) < r.hidden.len() {
                        let h: Vec<f64> = r.hidden[frame as usize].iter().map(|&v| v as f64).collect();
                        sums[i] += component.project(&h);
                        counts[i] += 1;
                    }
                }
            }
            AlignedTrace {
                t_s,
                offsets: offsets.clone(),
                mean: sums.iter().zip(&counts).map(|(s, &c)| (c > 0).then(|| s / c as f64)).collect(),
                counts,
            }
        })
        .collect();
    Ok(PcaSummary {
        alignment,
        component,
        traces,
    })
}
