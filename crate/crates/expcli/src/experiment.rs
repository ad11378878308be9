//! Monte Carlo sweeps and deterministic CSV emission.
//!
//! One experiment sweeps a single variable over a list of values for a list
//! of schemes; every (value, scheme) cell runs `trials` seeded solves and is
//! reported as one CSV row `sweep_value,scheme,mean_rate,std_rate,trials,
//! seed_base`. Trials run in parallel and are merged in index order, so the
//! output bytes depend only on the inputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fluidbeam::channel::sample_scenario;
use fluidbeam::config::ScenarioConfig;
use fluidbeam::solver::{run_baseline, Scheme, SolverOptions, SolverReport};
use rayon::prelude::*;
use thiserror::Error;

use crate::fmt9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    /// LBS maximum transmit power in dBm.
    Power,
    /// Region side in wavelengths, both ends (transmit side clamped to the
    /// smallest grid-packable square for its antenna count).
    Region,
    /// Angular uncertainty width in degrees.
    Delta,
    /// Outer iteration index (one solve per trial, one row per index).
    Iterations,
}

impl SweepVariable {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "power" => SweepVariable::Power,
            "region" | "size" => SweepVariable::Region,
            "delta" | "uncertainty" => SweepVariable::Delta,
            "iterations" | "iters" => SweepVariable::Iterations,
            _ => return None,
        })
    }

    pub fn file_name(self) -> &'static str {
        match self {
            SweepVariable::Power => "rate_vs_power.csv",
            SweepVariable::Region => "rate_vs_region.csv",
            SweepVariable::Delta => "rate_vs_delta.csv",
            SweepVariable::Iterations => "rate_vs_iteration.csv",
        }
    }
}

/// One experiment: sweep variable, values, schemes, output directory.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub out_dir: PathBuf,
    /// Trials per cell; 0 means "use the config's trial count".
    pub trials: usize,
    /// Base seed; trial `t` uses `base_seed + t`.
    pub seed: Option<u64>,
    /// Abort threshold on the QoS-infeasible fraction of any cell.
    pub max_infeasible: f64,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("experiment needs at least one sweep value")]
    NoValues,
    #[error("experiment needs at least one scheme")]
    NoSchemes,
    #[error("sweep value {value} yields an invalid scenario: {source}")]
    BadCell {
        value: f64,
        source: fluidbeam::config::ConfigError,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(
        "{infeasible} of {trials} trials were QoS-infeasible for scheme {scheme} at value {value} (limit {limit:.0}%)"
    )]
    TooManyInfeasible {
        scheme: &'static str,
        value: f64,
        infeasible: usize,
        trials: usize,
        limit: f64,
    },
}

/// Smallest region side (in wavelengths) that surely packs `count` antennas
/// at the configured spacing: the side of the tight uniform grid.
pub fn min_grid_side_wl(count: usize, spacing_wl: f64) -> f64 {
    let per_axis = (count as f64).sqrt().ceil();
    (per_axis - 1.0) * spacing_wl
}

/// Scenario for one sweep cell.
pub fn cell_config(
    base: &ScenarioConfig,
    variable: SweepVariable,
    value: f64,
) -> Result<ScenarioConfig, ExperimentError> {
    let mut cfg = base.clone();
    match variable {
        SweepVariable::Power => cfg.lbs_power_dbm = value,
        SweepVariable::Delta => cfg.delta_deg = value,
        SweepVariable::Region => {
            cfg.side_tx_wl = value.max(min_grid_side_wl(cfg.n_lbs, cfg.spacing_wl));
            cfg.side_rx_wl = value.max(min_grid_side_wl(cfg.n_aerial, cfg.spacing_wl));
        }
        SweepVariable::Iterations => {}
    }
    cfg.validate()
        .map_err(|source| ExperimentError::BadCell { value, source })?;
    Ok(cfg)
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct CellOutcome {
    rates: Vec<f64>,
    infeasible: usize,
}

fn run_cell(cfg: &ScenarioConfig, scheme: Scheme, trials: usize, seed: u64) -> CellOutcome {
    let reports: Vec<SolverReport> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let real = sample_scenario(cfg, seed + t);
            let opts = SolverOptions {
                seed: seed + t,
                ..Default::default()
            };
            run_baseline(scheme, &real, cfg, &opts)
        })
        .collect();
    CellOutcome {
        rates: reports.iter().map(|r| r.final_rate).collect(),
        infeasible: reports.iter().filter(|r| !r.qos_feasible).count(),
    }
}

fn iteration_sweep(
    base: &ScenarioConfig,
    spec: &ExperimentSpec,
    trials: usize,
    seed: u64,
) -> Result<String, ExperimentError> {
    let max_iter = spec
        .values
        .iter()
        .map(|&v| v.round().max(1.0) as usize)
        .max()
        .unwrap_or(10);
    let mut csv = String::from("sweep_value,scheme,mean_rate,std_rate,trials,seed_base\n");
    for &scheme in &spec.schemes {
        let traces: Vec<Vec<f64>> = (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                let real = sample_scenario(base, seed + t);
                let opts = SolverOptions {
                    seed: seed + t,
                    max_outer_iters: max_iter,
                    ..Default::default()
                };
                run_baseline(scheme, &real, base, &opts).iteration_rates
            })
            .collect();
        for &v in &spec.values {
            let idx = (v.round().max(1.0) as usize).min(max_iter) - 1;
            let rates: Vec<f64> = traces.iter().map(|tr| tr[idx]).collect();
            let (mean, std) = mean_std(&rates);
            writeln!(
                csv,
                "{},{},{},{},{},{}",
                fmt9(v),
                scheme.name(),
                fmt9(mean),
                fmt9(std),
                trials,
                seed
            )
            .unwrap();
        }
    }
    Ok(csv)
}

/// Run an experiment and write one CSV file; returns its path. Per-cell
/// infeasible-trial counts are reported through `summary` and the run fails
/// once a cell crosses the infeasibility threshold.
pub fn run_experiment(
    spec: &ExperimentSpec,
    base: &ScenarioConfig,
    mut summary: impl FnMut(&str),
) -> Result<PathBuf, ExperimentError> {
    if spec.values.is_empty() {
        return Err(ExperimentError::NoValues);
    }
    if spec.schemes.is_empty() {
        return Err(ExperimentError::NoSchemes);
    }
    let trials = if spec.trials > 0 { spec.trials } else { base.trials };
    let seed = spec.seed.unwrap_or(base.base_seed);

    let csv = if spec.variable == SweepVariable::Iterations {
        iteration_sweep(base, spec, trials, seed)?
    } else {
        let mut csv = String::from("sweep_value,scheme,mean_rate,std_rate,trials,seed_base\n");
        for &value in &spec.values {
            let cfg = cell_config(base, spec.variable, value)?;
            for &scheme in &spec.schemes {
                let outcome = run_cell(&cfg, scheme, trials, seed);
                if outcome.infeasible > 0 {
                    summary(&format!(
                        "note: {}/{} trials QoS-infeasible at {}={} scheme {}",
                        outcome.infeasible,
                        trials,
                        spec.variable.file_name(),
                        value,
                        scheme.name()
                    ));
                }
                if (outcome.infeasible as f64) > spec.max_infeasible * trials as f64 {
                    return Err(ExperimentError::TooManyInfeasible {
                        scheme: scheme.name(),
                        value,
                        infeasible: outcome.infeasible,
                        trials,
                        limit: 100.0 * spec.max_infeasible,
                    });
                }
                let (mean, std) = mean_std(&outcome.rates);
                writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    fmt9(value),
                    scheme.name(),
                    fmt9(mean),
                    fmt9(std),
                    trials,
                    seed
                )
                .unwrap();
            }
        }
        csv
    };

    std::fs::create_dir_all(&spec.out_dir).map_err(|source| ExperimentError::Io {
        path: spec.out_dir.display().to_string(),
        source,
    })?;
    let path = spec.out_dir.join(spec.variable.file_name());
    write_atomic(&path, csv.as_bytes())?;
    Ok(path)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    std::fs::write(path, bytes).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}
