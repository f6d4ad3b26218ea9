//! CSV renderings of the analysis outputs. Missing values are empty cells.

use std::fmt::Write as _;

use super::gaze::GazePath;
use super::pca::PcaSummary;
use super::performance::PerformanceTable;

pub const PERFORMANCE_CSV_HEADER: &str = "t_s,held_out,trials,completed,rewarded,reward_rate,mean_t_p,std_t_p";
pub const HISTOGRAM_CSV_HEADER: &str = "t_s,held_out,bin_start,bin_end,count";
pub const PCA_CSV_HEADER: &str = "alignment,t_s,offset,mean_projection,trials";
pub const GAZE_CSV_HEADER: &str = "t_s,point,x,y";
pub const GAZE_MARKERS_CSV_HEADER: &str = "t_s,event,x,y";
pub const VARIABILITY_CSV_HEADER: &str = "t_s,std_t_p";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn performance_csv(table: &PerformanceTable) -> String {
    let mut s = format!("{PERFORMANCE_CSV_HEADER}\n");
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.t_s,
            r.held_out,
            r.trials,
            r.completed,
            r.rewarded,
            r.reward_rate,
            opt(r.mean_t_p),
            opt(r.std_t_p)
        );
    }
    s
}

pub fn histogram_csv(table: &PerformanceTable) -> String {
    let mut s = format!("{HISTOGRAM_CSV_HEADER}\n");
    for r in &table.rows {
        for (edge, count) in r.histogram.edges.iter().zip(&r.histogram.counts) {
            let _ = writeln!(s, "{},{},{},{},{}", r.t_s, r.held_out, edge, edge + r.histogram.bin_width, count);
        }
    }
    s
}

pub fn pca_csv(summary: &PcaSummary) -> String {
    let name = match summary.alignment {
        super::Alignment::Ready => "ready",
        super::Alignment::Set => "set",
    };
    let mut s = format!("{PCA_CSV_HEADER}\n");
    for t in &summary.traces {
        for ((o, m), c) in t.offsets.iter().zip(&t.mean).zip(&t.counts) {
            let _ = writeln!(s, "{name},{},{o},{},{c}", t.t_s, opt(*m));
        }
    }
    s
}

pub fn gaze_csv(paths: &[GazePath]) -> String {
    let mut s = format!("{GAZE_CSV_HEADER}\n");
    for p in paths {
        for (i, pt) in p.points.iter().enumerate() {
            let _ = writeln!(s, "{},{i},{},{}", p.t_s, pt[0], pt[1]);
        }
    }
    s
}

pub fn gaze_markers_csv(paths: &[GazePath]) -> String {
    let mut s = format!("{GAZE_MARKERS_CSV_HEADER}\n");
    for p in paths {
        for (event, m) in [("ready", p.ready_marker), ("set", p.set_marker)] {
            if let Some(m) = m {
                let _ = writeln!(s, "{},{event},{},{}", p.t_s, m[0], m[1]);
            }
        }
    }
    s
}

pub fn variability_csv(pairs: &[(f64, f64)]) -> String {
    let mut s = format!("{VARIABILITY_CSV_HEADER}\n");
    for (t, sd) in pairs {
        let _ = writeln!(s, "{t},{sd}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::performance_table;
    use crate::analysis::record::tests::synthetic;

    #[test]
    fn perfect_agent_identity_column() {
        let recs: Vec<_> = [10, 20].iter().flat_map(|&t| (0..2).map(move |_| synthetic(t, Some(t), true))).collect();
        let csv = performance_csv(&performance_table(&recs, 5, &[20]).unwrap());
        let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
        assert_eq!(rows[0], vec!["10", "false", "2", "2", "2", "1", "10", "0"]);
        assert_eq!(rows[1][1], "true");
        assert_eq!(rows[1][6], "20");
    }

    #[test]
    fn missing_sd_is_empty_cell() {
        let csv = performance_csv(&performance_table(&[synthetic(10, Some(12), false)], 5, &[]).unwrap());
        assert!(csv.lines().nth(1).unwrap().ends_with(",12,"));
    }
}
