use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use serde::Serialize;
use timing_core::analysis::{
    final_fraction, gaze_csv, gaze_markers_csv, histogram_csv, mean_gaze_paths, pca_csv, pca_first_component,
    performance_csv, performance_table, read_records, scalar_variability, variability_csv, write_records, Alignment,
    EvalRecord, LinePlot, Series,
};
use timing_core::env::{EnvConfig, ObsMode};
use timing_core::nn::{Checkpoint, ControllerKind, ControllerSpec, NetworkSpec};
use timing_core::psych::{fit_observer, fit_power_law, prediction_csv, read_trials_csv, trials_csv, ReproductionTrial, UniformPrior};
use timing_core::selfcheck::{rl_gradient_check, vtrace_checks, CheckOutcome};
use timing_core::train::{evaluate, train, Control, EvalConfig, TrainEvent, EVAL_FILE, FINAL_CHECKPOINT};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const TRIALS_FILE: &str = "trials.csv";
pub const FIT_FILE: &str = "observer_fit.json";
pub const FIT_PREDICTION_FILE: &str = "observer_prediction.csv";

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Train,
    Eval {
        checkpoint: Option<PathBuf>,
        trials: Option<usize>,
        stochastic: bool,
    },
    Analyze {
        records: Option<PathBuf>,
    },
    FitPsych {
        trials: Option<PathBuf>,
        restarts: usize,
    },
    Check,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Eval { .. } => "eval",
            Command::Analyze { .. } => "analyze",
            Command::FitPsych { .. } => "fit-psych",
            Command::Check => "check",
        }
    }
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write(path, text)
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    command: &'a str,
    started_unix: f64,
    finished_unix: f64,
    succeeded: bool,
    package_version: &'a str,
}

/// Runs `command` under the resolved configuration. Timestamps go to a
/// separate metadata file so every other output is reproducible.
pub fn run(command: &Command, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("output_dir {} is not writable: {e}", dir.display())))?;
    write_json(&dir.join(RESOLVED_CONFIG_FILE), cfg)?;
    let started = unix_now();
    let result = match command {
        Command::Train => run_train(cfg),
        Command::Eval {
            checkpoint,
            trials,
            stochastic,
        } => run_eval(cfg, checkpoint.as_deref(), *trials, *stochastic),
        Command::Analyze { records } => run_analyze(cfg, records.as_deref()),
        Command::FitPsych { trials, restarts } => run_fit(cfg, trials.as_deref(), *restarts),
        Command::Check => run_check(),
    };
    let meta = RunMetadata {
        command: command.name(),
        started_unix: started,
        finished_unix: unix_now(),
        succeeded: result.is_ok(),
        package_version: env!("CARGO_PKG_VERSION"),
    };
    write_json(&dir.join(format!("{}_metadata.json", command.name())), &meta)?;
    result
}

fn run_train(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = train::<f32>(&cfg.setup(), Some(&cfg.output_dir), &mut |event| {
        if let TrainEvent::Eval { summary, .. } = event {
            info!(
                "frames {} version {}: greedy reward rate {:.3} over {} trials",
                summary.frames, summary.version, summary.reward_rate, summary.trials
            );
        }
        Control::Continue
    })?;
    info!("trained {} frames in {} learner steps", out.frames, out.metrics.len());
    Ok(())
}

fn run_eval(cfg: &ExperimentConfig, checkpoint: Option<&Path>, trials: Option<usize>, stochastic: bool) -> Result<(), CliError> {
    let path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.join(FINAL_CHECKPOINT));
    let params = Checkpoint::<f32>::load(&path)?.params()?;
    if params.spec != cfg.agent {
        return Err(CliError::Config(format!("checkpoint {} was trained with a different agent spec", path.display())));
    }
    let trials = trials.unwrap_or(cfg.train.eval.trials);
    let eval = EvalConfig {
        trials,
        // An undertrained policy may rarely fixate; scale the cap with the request.
        max_frames: cfg.train.eval.max_frames.max(trials as u64 * 500),
        greedy: !stochastic,
        intervals: Some(cfg.eval_intervals()),
        record_hidden: true,
        ..cfg.train.eval.clone()
    };
    let run = evaluate(&params, &cfg.env, &eval, cfg.seed, &format!("{:?}-seed{}", cfg.agent.controller.kind, cfg.seed))?;
    let file = fs::File::create(cfg.output_dir.join(RECORDS_FILE))?;
    write_records(std::io::BufWriter::new(file), &run.records)?;
    info!("{} trials, reward rate {:.3}", run.records.len(), run.reward_rate());
    Ok(())
}

fn svg(path: &Path, plot: LinePlot) -> Result<(), CliError> {
    write(path, plot.render())
}

fn learning_curve(dir: &Path) -> Option<LinePlot> {
    let text = fs::read_to_string(dir.join(EVAL_FILE)).ok()?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next()?.split(',').collect();
    let fi = header.iter().position(|h| *h == "frames")?;
    let ri = header.iter().position(|h| *h == "reward_rate")?;
    let points = lines
        .filter_map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            Some((cols.get(fi)?.parse().ok()?, cols.get(ri)?.parse().ok()?))
        })
        .collect();
    Some(LinePlot {
        title: "Greedy evaluation reward rate".into(),
        x_label: "environment frames".into(),
        y_label: "reward rate".into(),
        series: vec![Series {
            label: "eval".into(),
            points,
            scatter: false,
        }],
    })
}

fn load_records(path: &Path) -> Result<Vec<EvalRecord>, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
    let records = read_records(BufReader::new(file))?;
    if records.is_empty() {
        return Err(CliError::Runtime(format!("{} holds no records", path.display())));
    }
    Ok(records)
}

fn run_analyze(cfg: &ExperimentConfig, records: Option<&Path>) -> Result<(), CliError> {
    let dir = &cfg.output_dir;
    let path = records.map(Path::to_path_buf).unwrap_or_else(|| dir.join(RECORDS_FILE));
    let all = load_records(&path)?;
    let records = final_fraction(&all, cfg.analysis.final_fraction);
    let a = &cfg.analysis;

    let table = performance_table(records, a.bin_width, &a.held_out_intervals)?;
    write(&dir.join("performance.csv"), performance_csv(&table))?;
    write(&dir.join("histogram.csv"), histogram_csv(&table))?;
    let mean_series = |held_out: bool| Series {
        label: if held_out { "held out" } else { "trained" }.into(),
        points: table
            .rows
            .iter()
            .filter(|r| r.held_out == held_out)
            .filter_map(|r| r.mean_t_p.map(|m| (r.t_s as f64, m)))
            .collect(),
        scatter: true,
    };
    let extent = table.rows.iter().map(|r| r.t_s as f64);
    let (lo, hi) = (extent.clone().fold(f64::INFINITY, f64::min), extent.fold(0.0, f64::max));
    svg(
        &dir.join("performance.svg"),
        LinePlot {
            title: "Mean production interval".into(),
            x_label: "t_s (frames)".into(),
            y_label: "mean t_p (frames)".into(),
            series: vec![
                Series {
                    label: "identity".into(),
                    points: vec![(lo, lo), (hi, hi)],
                    scatter: false,
                },
                mean_series(false),
                mean_series(true),
            ],
        },
    )?;

    let trials: Vec<ReproductionTrial> = records
        .iter()
        .filter_map(|r| r.t_p.map(|p| ReproductionTrial { t_s: r.t_s as f64, t_p: p as f64 }))
        .filter(|t| t.t_p > 0.0)
        .collect();
    write(&dir.join(TRIALS_FILE), trials_csv(&trials))?;

    let variability = scalar_variability(records);
    write(&dir.join("scalar_variability.csv"), variability_csv(&variability))?;
    if variability.len() >= 4 {
        let fit = fit_power_law(&variability)?;
        write_json(&dir.join("power_law.json"), &fit)?;
    } else {
        warn!("power-law fit skipped: {} intervals with two or more completed trials", variability.len());
    }

    if records.iter().any(|r| !r.hidden.is_empty()) {
        for (alignment, window, name) in [
            (Alignment::Ready, a.ready_window, "ready"),
            (Alignment::Set, a.set_window, "set"),
        ] {
            let pca = pca_first_component(records, alignment, (window[0], window[1]))?;
            write(&dir.join(format!("pca_{name}.csv")), pca_csv(&pca))?;
            let series = pca
                .traces
                .iter()
                .map(|t| Series {
                    label: format!("t_s {}", t.t_s),
                    points: t.offsets.iter().zip(&t.mean).filter_map(|(o, m)| m.map(|m| (*o as f64, m))).collect(),
                    scatter: false,
                })
                .collect();
            svg(
                &dir.join(format!("pca_{name}.svg")),
                LinePlot {
                    title: format!("First principal component, {name}-aligned"),
                    x_label: format!("frames from {name}"),
                    y_label: "projection".into(),
                    series,
                },
            )?;
        }
    } else {
        warn!("records carry no hidden states; PCA skipped");
    }

    let paths = mean_gaze_paths(records);
    write(&dir.join("gaze_paths.csv"), gaze_csv(&paths))?;
    write(&dir.join("gaze_markers.csv"), gaze_markers_csv(&paths))?;
    svg(
        &dir.join("gaze_paths.svg"),
        LinePlot {
            title: "Mean gaze trajectory, rewarded trials".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: paths
                .iter()
                .map(|p| Series {
                    label: format!("t_s {}", p.t_s),
                    points: p.points.iter().map(|q| (q[0], q[1])).collect(),
                    scatter: false,
                })
                .collect(),
        },
    )?;
    if let Some(plot) = learning_curve(dir) {
        svg(&dir.join("learning_curve.svg"), plot)?;
    }
    info!("analysed {} of {} records", records.len(), all.len());
    Ok(())
}

/// Uniform prior over the training intervals.
pub fn task_prior(env: &EnvConfig) -> Result<UniformPrior, CliError> {
    let lo = *env.sample_intervals.first().expect("validated non-empty") as f64;
    let hi = *env.sample_intervals.last().expect("validated non-empty") as f64;
    Ok(UniformPrior::new(lo, hi)?)
}

fn run_fit(cfg: &ExperimentConfig, trials: Option<&Path>, restarts: usize) -> Result<(), CliError> {
    let dir = &cfg.output_dir;
    let path = trials.map(Path::to_path_buf).unwrap_or_else(|| dir.join(TRIALS_FILE));
    let data = read_trials_csv(&path)?;
    let prior = task_prior(&cfg.env)?;
    let fit = fit_observer(&data, &prior, restarts)?;
    write_json(&dir.join(FIT_FILE), &fit)?;
    write(&dir.join(FIT_PREDICTION_FILE), prediction_csv(&data, &fit.params, &prior)?)?;
    info!("w_m {:.4} w_p {:.4} nll {:.3} converged {}", fit.params.w_m, fit.params.w_p, fit.nll, fit.converged);
    if !fit.converged {
        return Err(CliError::Runtime("observer fit did not converge; best-effort parameters written".into()));
    }
    Ok(())
}

/// The numerical self-check suite: V-trace oracles and gradient checks
/// for every controller kind.
pub fn check_suite() -> Result<Vec<CheckOutcome>, CliError> {
    let mut out = vtrace_checks(1000, 0)?;
    for kind in [ControllerKind::Feedforward, ControllerKind::Lstm, ControllerKind::VanillaRnn, ControllerKind::Gru] {
        let spec = NetworkSpec::new(ControllerSpec::new(kind, 8), ObsMode::Symbolic);
        out.push(rl_gradient_check(&spec, 5, 0, 1e-4)?);
    }
    Ok(out)
}

fn run_check() -> Result<(), CliError> {
    let results = check_suite()?;
    let mut failed = 0;
    for r in &results {
        println!(
            "{} {} (cases {}, max error {:.3e}, tolerance {:.1e})",
            if r.passed() { "PASS" } else { "FAIL" },
            r.name,
            r.cases,
            r.max_error,
            r.tolerance
        );
        failed += usize::from(!r.passed());
    }
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} of {} checks failed", results.len())));
    }
    Ok(())
}
