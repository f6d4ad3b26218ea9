use serde::{Deserialize, Serialize};

use super::EvalRecord;

pub const RESAMPLE_POINTS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazePath {
    pub t_s: u32,
    pub trials: usize,
    pub points: Vec<[f64; 2]>,
    /// Mean gaze at the Ready and Set onsets.
    pub ready_marker: Option<[f64; 2]>,
    pub set_marker: Option<[f64; 2]>,
}

/// Linear interpolation of `path` onto `n` points evenly spaced in
/// normalised time.
pub fn resample(path: &[[f64; 2]], n: usize) -> Vec<[f64; 2]> {
    match path.len() {
        0 => return Vec::new(),
        1 => return vec![path[0]; n],
        _ => {}
    }
    let last = (path.len() - 1) as f64;
    (0..n)
        .map(|i| {
            let x = if n == 1 { 0.0 } else { last * i as f64 / (n - 1) as f64 };
            let k = (x.floor() as usize).min(path.len() - 2);
            let f = x - k as f64;
            let (a, b) = (path[k], path[k + 1]);
            [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]
        })
        .collect()
}

fn mean_point(points: impl Iterator<Item = [f64; 2]>) -> Option<[f64; 2]> {
    let (mut s, mut n) = ([0.0, 0.0], 0usize);
    for p in points {
        s[0] += p[0];
        s[1] += p[1];
        n += 1;
    }
    (n > 0).then(|| [s[0] / n as f64, s[1] / n as f64])
}

/// Mean rewarded-trial gaze trajectory per sample interval. Intervals with
/// no rewarded trial are left out with a warning.
pub fn mean_gaze_paths(records: &[EvalRecord]) -> Vec<GazePath> {
    let mut intervals: Vec<u32> = records.iter().map(|r| r.t_s).collect();
    intervals.sort_unstable();
    intervals.dedup();
    let mut out = Vec::new();
    for t_s in intervals {
        let group: Vec<&EvalRecord> = records.iter().filter(|r| r.t_s == t_s && r.rewarded && !r.gaze.is_empty()).collect();
        if group.is_empty() {
            log::warn!("no rewarded trials at t_s={t_s}; omitted from gaze paths");
            continue;
        }
        let mut points = vec![[0.0, 0.0]; RESAMPLE_POINTS];
        for r in &group {
            for (acc, p) in points.iter_mut().zip(resample(&r.gaze, RESAMPLE_POINTS)) {
                acc[0] += p[0] / group.len() as f64;
                acc[1] += p[1] / group.len() as f64;
            }
        }
        let marker = |f: fn(&EvalRecord) -> Option<u32>| {
            mean_point(group.iter().filter_map(|r| f(r).and_then(|i| r.gaze.get(i as usize).copied())))
        };
        out.push(GazePath {
            t_s,
            trials: group.len(),
            points,
            ready_marker: marker(|r| r.ready_onset),
            set_marker: marker(|r| r.set_onset),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::record::tests::synthetic;

    #[test]
    fn identical_trials_give_that_path() {
        let r = synthetic(10, Some(10), true);
        let paths = mean_gaze_paths(&[r.clone(), r.clone(), r.clone()]);
        let want = resample(&r.gaze, RESAMPLE_POINTS);
        for (a, b) in paths[0].points.iter().zip(&want) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
        assert_eq!(paths[0].ready_marker, Some(r.gaze[r.ready_onset.unwrap() as usize]));
    }

    #[test]
    fn mirror_paths_average_to_midline() {
        let mut a = synthetic(10, Some(10), true);
        let mut b = a.clone();
        a.gaze = (0..a.gaze.len()).map(|i| [0.5 + 0.01 * i as f64, 0.5 + 0.005 * i as f64]).collect();
        b.gaze = a.gaze.iter().map(|p| [p[0], 1.0 - p[1]]).collect();
        let paths = mean_gaze_paths(&[a, b]);
        assert!(paths[0].points.iter().all(|p| (p[1] - 0.5).abs() < 1e-12));
    }

    #[test]
    fn straight_line_stays_collinear() {
        let line: Vec<[f64; 2]> = (0..50).map(|i| [0.1 + 0.013 * i as f64, 0.2 + 0.007 * i as f64]).collect();
        let pts = resample(&line, 100);
        assert_eq!(pts.len(), 100);
        let (p0, p1) = (line[0], line[49]);
        for p in &pts {
            let cross = (p1[0] - p0[0]) * (p[1] - p0[1]) - (p1[1] - p0[1]) * (p[0] - p0[0]);
            assert!(cross.abs() < 1e-9);
        }
        assert_eq!(pts[0], line[0]);
        assert!((pts[99][0] - line[49][0]).abs() < 1e-12);
    }

    #[test]
    fn unrewarded_intervals_omitted() {
        let recs = vec![synthetic(10, Some(10), true), synthetic(20, Some(40), false)];
        let paths = mean_gaze_paths(&recs);
        assert_eq!(paths.iter().map(|p| p.t_s).collect::<Vec<_>>(), vec![10]);
    }

    #[test]
    fn means_stay_in_unit_square() {
        let recs: Vec<_> = (0..5)
            .map(|k| {
                let mut r = synthetic(10, Some(10), true);
                r.gaze = (0..r.gaze.len()).map(|i| [((i + k) % 7) as f64 / 6.0, ((i * k) % 5) as f64 / 4.0]).collect();
                r
            })
            .collect();
        for p in &mean_gaze_paths(&recs)[0].points {
            assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
        }
    }
}
