//! Command-line front end: `run` (Monte Carlo sweeps), `solve` (single
//! scenario report), `pattern` (receive beampattern CSV), and `gainmap`
//! (channel power gain over the receive region).
//!
//! Exit codes: 0 on success, 1 on configuration or argument errors, 2 when
//! too many trials fail at runtime.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fluidbeam::channel::sample_scenario;
use fluidbeam::config::ScenarioConfig;
use fluidbeam::solver::{run_baseline, Scheme, SolverOptions};

use fluidbeam_cli::configfile::load_config;
use fluidbeam_cli::experiment::{run_experiment, ExperimentError, ExperimentSpec, SweepVariable};
use fluidbeam_cli::fmt9;
use fluidbeam_cli::pattern::{beampattern, channel_gain_map, grid_csv};

#[derive(Parser)]
#[command(name = "fluidbeam", about = "Robust anti-jamming fluid-antenna simulator")]
struct Cli {
    /// Scenario configuration file (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep one variable over seeded Monte Carlo trials and emit CSV.
    Run(RunArgs),
    /// Solve a single scenario and print the solver report.
    Solve(SolveArgs),
    /// Export the optimized receive beampattern as a CSV grid.
    Pattern(PatternArgs),
    /// Export the channel power gain over the receive region as a CSV grid.
    Gainmap(GainmapArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Sweep variable: power | region | delta | iterations.
    #[arg(long)]
    sweep: String,
    /// Comma-separated sweep values.
    #[arg(long)]
    values: String,
    /// Comma-separated schemes (fpbcd, fpa, tx-fas, rx-fas, fas-as, fas-pgd, fas-ao).
    #[arg(long, default_value = "fpbcd")]
    scheme: String,
    /// Output directory for the CSV file.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Trials per cell (0 = use the config's trial count).
    #[arg(long, default_value_t = 0)]
    trials: usize,
    /// Base seed (default: the config's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Abort when a cell's QoS-infeasible fraction exceeds this.
    #[arg(long, default_value_t = 0.5)]
    max_infeasible: f64,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "fpbcd")]
    scheme: String,
}

#[derive(Args)]
struct PatternArgs {
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "fpbcd")]
    scheme: String,
    /// Angular grid step in degrees.
    #[arg(long, default_value_t = 2.0)]
    step_deg: f64,
}

#[derive(Args)]
struct GainmapArgs {
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Which link to map: lbs | jammer.
    #[arg(long, default_value = "lbs")]
    link: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "fpbcd")]
    scheme: String,
}

fn parse_schemes(s: &str) -> Result<Vec<Scheme>, String> {
    s.split(',')
        .map(|part| {
            let part = part.trim();
            Scheme::parse(part).ok_or_else(|| format!("unknown scheme `{part}`"))
        })
        .collect()
}

fn parse_values(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad sweep value `{part}`"))
        })
        .collect()
}

fn load(cli_config: &Option<PathBuf>) -> Result<ScenarioConfig, String> {
    match cli_config {
        Some(path) => load_config(path).map_err(|e| e.to_string()),
        None => Ok(ScenarioConfig::default()),
    }
}

fn solve_once(cfg: &ScenarioConfig, seed: u64, scheme: Scheme) -> fluidbeam::solver::SolverReport {
    let real = sample_scenario(cfg, seed);
    let opts = SolverOptions {
        seed,
        ..Default::default()
    };
    run_baseline(scheme, &real, cfg, &opts)
}

fn cmd_run(cfg: &ScenarioConfig, args: &RunArgs) -> Result<(), (u8, String)> {
    let variable = SweepVariable::parse(&args.sweep)
        .ok_or_else(|| (1, format!("unknown sweep variable `{}`", args.sweep)))?;
    let spec = ExperimentSpec {
        variable,
        values: parse_values(&args.values).map_err(|e| (1, e))?,
        schemes: parse_schemes(&args.scheme).map_err(|e| (1, e))?,
        out_dir: args.out.clone(),
        trials: args.trials,
        seed: args.seed,
        max_infeasible: args.max_infeasible,
    };
    let path = run_experiment(&spec, cfg, |note| eprintln!("{note}")).map_err(|e| match e {
        ExperimentError::TooManyInfeasible { .. } => (2, e.to_string()),
        other => (1, other.to_string()),
    })?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_solve(cfg: &ScenarioConfig, args: &SolveArgs) -> Result<(), (u8, String)> {
    let scheme = Scheme::parse(&args.scheme)
        .ok_or_else(|| (1, format!("unknown scheme `{}`", args.scheme)))?;
    let seed = args.seed.unwrap_or(cfg.base_seed);
    let report = solve_once(cfg, seed, scheme);
    println!("scheme: {}", report.scheme.name());
    println!("seed: {}", report.seed);
    println!("worst-case aerial rate (bps/Hz): {}", fmt9(report.final_rate));
    print!("per-iteration rates:");
    for r in &report.iteration_rates {
        print!(" {}", fmt9(*r));
    }
    println!();
    if !report.final_terr_rates.is_empty() {
        print!("terrestrial rates:");
        for r in &report.final_terr_rates {
            print!(" {}", fmt9(*r));
        }
        println!();
    }
    println!("qos_feasible: {}", report.qos_feasible);
    println!(
        "receive sweeps: {} moves, {} holds, {} curvature retries",
        report.receive_sweeps.moves,
        report.receive_sweeps.no_moves,
        report.receive_sweeps.majorization_rejects
    );
    println!(
        "transmit sweeps: {} moves, {} holds, {} curvature retries",
        report.transmit_sweeps.moves,
        report.transmit_sweeps.no_moves,
        report.transmit_sweeps.majorization_rejects
    );
    println!("flags ({}):", report.flags.len());
    for f in &report.flags {
        println!("  iter {}: {:?}", f.iter, f.kind);
    }
    println!(
        "stage seconds: lbs {:.3}, tbs {:.3}, inner {:.3}, transmit {:.3}, total {:.3}",
        report.timings.lbs_beam,
        report.timings.tbs_beam,
        report.timings.inner_ao,
        report.timings.transmit_sweep,
        report.timings.total
    );
    Ok(())
}

fn cmd_pattern(cfg: &ScenarioConfig, args: &PatternArgs) -> Result<(), (u8, String)> {
    let scheme = Scheme::parse(&args.scheme)
        .ok_or_else(|| (1, format!("unknown scheme `{}`", args.scheme)))?;
    let seed = args.seed.unwrap_or(cfg.base_seed);
    let report = solve_once(cfg, seed, scheme);
    let step = args.step_deg.max(0.05);
    let thetas = step_range(-89.0, -1.0, step);
    let phis = step_range(-180.0, 179.0, step);
    let gains = beampattern(
        &report.state.v_a,
        &report.state.r_apv,
        cfg.wavelength,
        &thetas.iter().map(|d| d.to_radians()).collect::<Vec<_>>(),
        &phis.iter().map(|d| d.to_radians()).collect::<Vec<_>>(),
    );
    let csv = grid_csv("theta_deg\\phi_deg", &thetas, &phis, &gains);
    write_out(&args.out, &csv)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_gainmap(cfg: &ScenarioConfig, args: &GainmapArgs) -> Result<(), (u8, String)> {
    let scheme = Scheme::parse(&args.scheme)
        .ok_or_else(|| (1, format!("unknown scheme `{}`", args.scheme)))?;
    let seed = args.seed.unwrap_or(cfg.base_seed);
    let real = sample_scenario(cfg, seed);
    let report = solve_once(cfg, seed, scheme);
    let (link, tx_apv) = match args.link.as_str() {
        "lbs" => (&real.lbs_aerial, Some(&report.state.t_apv)),
        "jammer" => (&real.jammer_aerial, None),
        other => return Err((1, format!("unknown link `{other}` (use lbs or jammer)"))),
    };
    let region = cfg.region_rx();
    let (xs, ys, gains) = channel_gain_map(
        &region,
        cfg.wavelength / 20.0,
        link,
        tx_apv,
        cfg.wavelength,
    );
    let csv = grid_csv("y_m\\x_m", &ys, &xs, &gains);
    write_out(&args.out, &csv)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn step_range(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x = lo;
    while x <= hi + 1e-9 {
        out.push(x);
        x += step;
    }
    out
}

fn write_out(path: &PathBuf, text: &str) -> Result<(), (u8, String)> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| (1, format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, text).map_err(|e| (1, format!("cannot write {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli.config) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(&cfg, args),
        Command::Solve(args) => cmd_solve(&cfg, args),
        Command::Pattern(args) => cmd_pattern(&cfg, args),
        Command::Gainmap(args) => cmd_gainmap(&cfg, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
