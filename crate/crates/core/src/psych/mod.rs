//! Bayesian observer model of interval reproduction and the
//! scalar-variability power law.

mod fit;
mod io;
mod observer;
mod power_law;
mod simplex;

pub use fit::{fit_observer, observer_nll, FitResult, TrialGroups, W_LOWER, W_UPPER};
pub use io::{parse_trials_csv, prediction_csv, read_trials_csv, trials_csv, PREDICTION_CSV_HEADER, TRIALS_CSV_HEADER};
pub use observer::{
    bls_estimate, predictive_density, simulate_observer, MeasurementGrid, ObserverParams, ReproductionTrial,
    UniformPrior, DEFAULT_GRID_POINTS,
};
pub use power_law::{fit_power_law, PowerLawFit};
pub use simplex::{nelder_mead, SimplexOptions, SimplexResult};
