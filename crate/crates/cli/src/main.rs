use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use xlris::harness::config::{CONVERGENCE_TRIALS, SWEEP_TRIALS};
use xlris::harness::{
    emit_outputs, emit_overlay, run_convergence, run_distance_sweep, run_element_sweep, run_single, Mode,
    ScenarioConfig, SweepResult,
};
use xlris::Error;

#[derive(Parser)]
#[command(name = "xlris", version, about = "Secrecy-rate Monte Carlo runs for XL-RIS aided links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML scenario file; built-in defaults when absent.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Base seed; trial t uses seed + t.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// continuous | discrete[:b] | stochastic | ff | nojam
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// 64x8 RIS and 8 BS antennas instead of the 16x4 / 4 desk setup.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Secrecy rate per AO sweep, with and without jamming.
    Converge {
        #[command(flatten)]
        common: Common,
    },
    /// Eavesdropper distance sweep, plus the far-field baseline.
    DistSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated radii in meters.
        #[arg(long, default_value = "5,7,9,11,13,15,17,19,21,23,25")]
        radii: String,
        /// Eavesdropper azimuth in degrees; scenario value when absent.
        #[arg(long)]
        eve_azimuth_deg: Option<f64>,
        /// Skip the far-field baseline.
        #[arg(long)]
        no_ff: bool,
    },
    /// RIS size sweep across modes.
    ElemSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated RIS shapes, rows x cols.
        #[arg(long, default_value = "4x4,8x4,16x4")]
        shapes: String,
        /// Comma-separated modes.
        #[arg(long, default_value = "continuous,discrete:1,discrete:2,discrete:3,stochastic")]
        modes: String,
    },
    /// Single-point run of one scheme (stochastic phases by default).
    Baseline {
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Config(String),
    AllInfeasible(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::DegenerateGeometry(_) => Failure::Config(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

fn load(common: &Common, default_trials: usize, default_mode: Mode) -> Result<ScenarioConfig, Failure> {
    let (mut cfg, file_trials) = match &common.scenario {
        Some(p) => {
            let cfg = ScenarioConfig::from_file(p, common.full_scale).map_err(|e| match e {
                Error::Io { .. } => Failure::Config(e.to_string()),
                other => other.into(),
            })?;
            let set = cfg.trials != SWEEP_TRIALS;
            (cfg, set)
        }
        None => (ScenarioConfig::from_toml_str("", common.full_scale)?, false),
    };
    if !file_trials {
        cfg.trials = default_trials;
    }
    if common.scenario.is_none() || cfg.mode == Mode::Continuous {
        cfg.mode = default_mode;
    }
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    if let Some(s) = common.seed {
        cfg.base_seed = s;
    }
    if let Some(m) = &common.mode {
        cfg.mode = m.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_list<T>(text: &str, what: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, Failure> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| f(s).ok_or_else(|| Failure::Config(format!("bad {what} '{s}'"))))
        .collect()
}

fn parse_shape(s: &str) -> Option<(usize, usize)> {
    let (r, c) = s.split_once(['x', 'X'])?;
    Some((r.trim().parse().ok()?, c.trim().parse().ok()?))
}

fn emit(results: &[&SweepResult], out: &Path) -> Result<(), Failure> {
    for r in results {
        let files = emit_outputs(r, out)?;
        println!("{}: {} rows, {} skipped", files.rows.display(), r.rows.len(), r.total_skips());
        for s in r.summary() {
            println!(
                "  {} = {:<8} median {:.4} mean {:.4} skip {:.2}",
                r.axis, s.sweep_value, s.median, s.mean, s.skip_fraction
            );
        }
    }
    if results.iter().all(|r| r.all_skipped()) {
        return Err(Failure::AllInfeasible("every trial was infeasible".into()));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Converge { common } => {
            let cfg = load(&common, CONVERGENCE_TRIALS, Mode::Continuous)?;
            let res = run_convergence(&cfg)?;
            emit(&[&res.jamming, &res.no_jamming], &common.out)?;
            emit_overlay(&common.out.join("converge.svg"), "convergence", &[&res.jamming, &res.no_jamming])?;
        }
        Command::DistSweep {
            common,
            radii,
            eve_azimuth_deg,
            no_ff,
        } => {
            let cfg = load(&common, SWEEP_TRIALS, Mode::Continuous)?;
            let radii = parse_list(&radii, "radius", |s| s.parse::<f64>().ok())?;
            let az = eve_azimuth_deg.map(f64::to_radians).unwrap_or(cfg.geometry.eve.azimuth);
            let main = run_distance_sweep(&cfg, &radii, az)?;
            let mut all = vec![main];
            if !no_ff && cfg.mode != Mode::FarField {
                let ff = ScenarioConfig {
                    mode: Mode::FarField,
                    ..cfg.clone()
                };
                all.push(run_distance_sweep(&ff, &radii, az)?);
            }
            let refs: Vec<&SweepResult> = all.iter().collect();
            emit(&refs, &common.out)?;
            emit_overlay(&common.out.join(format!("{}_overlay.svg", all[0].name)), "distance sweep", &refs)?;
        }
        Command::ElemSweep { common, shapes, modes } => {
            let cfg = load(&common, SWEEP_TRIALS, Mode::Continuous)?;
            let shapes = parse_list(&shapes, "shape", parse_shape)?;
            let modes = parse_list(&modes, "mode", |s| s.parse::<Mode>().ok())?;
            let res = run_element_sweep(&cfg, &shapes, &modes)?;
            let refs: Vec<&SweepResult> = res.iter().collect();
            emit(&refs, &common.out)?;
            emit_overlay(&common.out.join("elem_overlay.svg"), "element sweep", &refs)?;
        }
        Command::Baseline { common } => {
            let cfg = load(&common, SWEEP_TRIALS, Mode::Stochastic)?;
            let res = run_single(&cfg)?;
            emit(&[&res], &common.out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::AllInfeasible(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
