//! Mode dispatch: validate, exact, simulate and compare.

use std::time::Instant;

use serde::Serialize;

use positivep::exact::collective_moments;
use positivep::kernels::Spin12PointFamily;
use positivep::{
    collective_estimates, evolve_exact, run_ensemble, DensityMatrix, EnsembleResult,
    InitialState, ObservableSeries, SigmaYConvention,
};

use crate::config::{Mode, RunConfig};
use crate::output;
use crate::validate;

#[derive(Debug)]
pub struct ExitSummary {
    pub exit_code: i32,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Model(#[from] positivep::ModelError),
    #[error(transparent)]
    Engine(#[from] positivep::EngineError),
    #[error(transparent)]
    Exact(#[from] positivep::ExactError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Serialize)]
struct Meta<'a> {
    version: &'static str,
    config: &'a RunConfig,
    config_file: String,
    trajectories_completed: usize,
    trajectories_aborted: usize,
    abort_reasons: Vec<String>,
    total_jumps: u64,
    fallback_jumps: u64,
    wall_seconds: f64,
    threads: usize,
    max_abs_zscore: Option<f64>,
    max_abs_zscore_fluctuations: Option<f64>,
}

pub fn run(mode: Mode, config: &RunConfig) -> Result<ExitSummary, RunError> {
    match mode {
        Mode::Validate => run_validate(config),
        Mode::Exact => run_exact(config),
        Mode::Simulate => run_simulate(config),
        Mode::Compare => run_compare(config),
    }
}

fn run_validate(config: &RunConfig) -> Result<ExitSummary, RunError> {
    let results = validate::all_suites();
    let mut report = String::new();
    for r in &results {
        let line = r.line();
        println!("{line}");
        report.push_str(&line);
        report.push('\n');
    }
    let failures = results.iter().filter(|r| !r.passed()).count();
    let message = format!("{} suites, {} failed", results.len(), failures);
    println!("{message}");
    if let Some(out) = &config.out {
        output::write_file(&out.with_extension("report.txt"), &report)?;
    }
    Ok(ExitSummary {
        exit_code: if failures == 0 { 0 } else { 1 },
        message,
    })
}

fn exact_moments(config: &RunConfig) -> Result<(Vec<f64>, Vec<[(f64, f64); 3]>), RunError> {
    let params = config.model_params()?;
    let schedule = config.schedule()?;
    let rho0 = DensityMatrix::all_x_plus(config.n);
    let states = evolve_exact(&params, &rho0, &schedule.t_out, config.exact_dt)?;
    let moments = states
        .iter()
        .map(|rho| collective_moments(rho, config.n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((schedule.t_out, moments))
}

fn run_exact(config: &RunConfig) -> Result<ExitSummary, RunError> {
    let started = Instant::now();
    let (times, moments) = exact_moments(config)?;
    let csv = output::exact_csv(&times, &moments);
    if let Some(out) = &config.out {
        output::write_file(&out.with_extension("csv"), &csv)?;
    } else {
        print!("{csv}");
    }
    Ok(ExitSummary {
        exit_code: 0,
        message: format!(
            "exact n={} over {} times in {:.1}s",
            config.n,
            times.len(),
            started.elapsed().as_secs_f64()
        ),
    })
}

fn ensemble(config: &RunConfig) -> Result<(EnsembleResult, ObservableSeries), RunError> {
    let params = config.model_params()?;
    let schedule = config.schedule()?;
    let init = match config.init.as_str() {
        "coherent-x" => InitialState::CoherentX,
        "discrete-x" => InitialState::DiscreteX,
        _ => InitialState::DiscreteSampled {
            site_rho: vec![positivep::linalg::identity(2).mapv(|v| v / 2.0)],
            family: Spin12PointFamily::new(0.0),
        },
    };
    let result = run_ensemble(&params, &schedule, &init)?;
    let convention = if config.sigma_y_printed {
        SigmaYConvention::Printed
    } else {
        SigmaYConvention::TraceDerived
    };
    let series = collective_estimates(&result, convention);
    Ok((result, series))
}

fn abort_warning(result: &EnsembleResult) {
    let fraction = result.abort_fraction();
    if fraction > 0.001 {
        eprintln!(
            "warning: {} of {} trajectories aborted ({:.3}%), estimates exclude them",
            result.aborted(),
            result.records.len(),
            100.0 * fraction
        );
    }
}

fn meta_json(
    config: &RunConfig,
    result: &EnsembleResult,
    wall: f64,
    max_z: Option<f64>,
    max_z_ds: Option<f64>,
) -> Result<String, RunError> {
    let (total_jumps, fallback_jumps) = result
        .records
        .iter()
        .flatten()
        .filter_map(|r| r.samples.last())
        .fold((0u64, 0u64), |acc, s| (acc.0 + s.jumps, acc.1 + s.fallback_jumps));
    let meta = Meta {
        version: env!("CARGO_PKG_VERSION"),
        config,
        config_file: config.to_config_file(),
        trajectories_completed: result.completed(),
        trajectories_aborted: result.aborted(),
        abort_reasons: result
            .abort_reasons
            .iter()
            .take(10)
            .map(|(k, reason)| format!("trajectory {k}: {reason}"))
            .collect(),
        total_jumps,
        fallback_jumps,
        wall_seconds: wall,
        threads: rayon::current_num_threads(),
        max_abs_zscore: max_z,
        max_abs_zscore_fluctuations: max_z_ds,
    };
    Ok(serde_json::to_string_pretty(&meta)?)
}

fn run_simulate(config: &RunConfig) -> Result<ExitSummary, RunError> {
    let started = Instant::now();
    let (result, series) = ensemble(config)?;
    abort_warning(&result);
    let csv = output::series_csv(&series);
    let wall = started.elapsed().as_secs_f64();
    if let Some(out) = &config.out {
        output::write_file(&out.with_extension("csv"), &csv)?;
        let meta = meta_json(config, &result, wall, None, None)?;
        output::write_file(&out.with_extension("meta.json"), &meta)?;
    } else {
        print!("{csv}");
    }
    Ok(ExitSummary {
        exit_code: 0,
        message: format!(
            "simulate n={} M={} ({} aborted) in {:.1}s",
            config.n,
            config.trajectories,
            result.aborted(),
            wall
        ),
    })
}

fn run_compare(config: &RunConfig) -> Result<ExitSummary, RunError> {
    let started = Instant::now();
    let (result, series) = ensemble(config)?;
    abort_warning(&result);
    let (_, moments) = exact_moments(config)?;
    let stoch_csv = output::series_csv(&series);
    let exact_csv = output::exact_csv(&series.times, &moments);
    let (z_csv, max_z, max_z_ds) = output::zscores_csv(&series, &moments);
    let wall = started.elapsed().as_secs_f64();
    if let Some(out) = &config.out {
        output::write_file(&out.with_extension("csv"), &stoch_csv)?;
        output::write_file(&out.with_extension("exact.csv"), &exact_csv)?;
        output::write_file(&out.with_extension("zscores.csv"), &z_csv)?;
        let meta = meta_json(config, &result, wall, Some(max_z), Some(max_z_ds))?;
        output::write_file(&out.with_extension("meta.json"), &meta)?;
    } else {
        print!("{z_csv}");
    }
    let verdict = if max_z <= 3.0 { "within" } else { "exceeds" };
    Ok(ExitSummary {
        exit_code: 0,
        message: format!(
            "compare n={}: max |z| = {:.2} ({verdict} 3 standard errors), fluctuations max |z| = {:.2}, in {:.1}s",
            config.n, max_z, max_z_ds, wall
        ),
    })
}
