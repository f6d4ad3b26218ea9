//! Behavioural and hidden-state analyses of evaluation records.

mod gaze;
mod pca;
mod performance;
mod plot;
mod record;
mod stats;
mod tables;

pub use gaze::{mean_gaze_paths, resample, GazePath, RESAMPLE_POINTS};
pub use pca::{leading_component, pca_first_component, AlignedTrace, Alignment, PcaSummary, PrincipalComponent};
pub use performance::{final_fraction, performance_table, Histogram, IntervalPerformance, PerformanceTable};
pub use plot::{LinePlot, Series};
pub use record::{read_records, write_records, EvalRecord};
pub use stats::{ranks, scalar_variability, spearman, RankCorrelation};
pub use tables::{
    gaze_csv, gaze_markers_csv, histogram_csv, pca_csv, performance_csv, variability_csv, GAZE_CSV_HEADER,
    GAZE_MARKERS_CSV_HEADER, HISTOGRAM_CSV_HEADER, PCA_CSV_HEADER, PERFORMANCE_CSV_HEADER, VARIABILITY_CSV_HEADER,
};
