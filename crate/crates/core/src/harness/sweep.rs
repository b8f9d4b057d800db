//! Seeded Monte Carlo sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Mode, ScenarioConfig};
use crate::ao::{solve_fixed_ris, solve_no_jamming_baseline, solve_p1, AoSettings, AoSolution, AoStatus};
use crate::geometry::{realize_channels, ChannelSet, Polar};
use crate::secrecy::RisVector;
use crate::{Error, Result};

/// One emitted CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub rate_bits: f64,
    pub rate_user: f64,
    pub rate_eve: f64,
    pub iters: usize,
    pub status: String,
}

/// Per-point statistics of the secrecy rate over non-skipped trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub mean: f64,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    pub skip_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// File stem for outputs.
    pub name: String,
    pub axis: String,
    pub mode: Mode,
    pub values: Vec<f64>,
    /// Trials attempted per point.
    pub trials: usize,
    /// Skipped (infeasible) trials per point.
    pub skips: Vec<usize>,
    pub rows: Vec<TrialRow>,
}

impl SweepResult {
    pub fn rows_at(&self, point: usize) -> impl Iterator<Item = &TrialRow> {
        let v = self.values[point];
        self.rows.iter().filter(move |r| r.sweep_value == v)
    }

    fn column(&self, point: usize, f: impl Fn(&TrialRow) -> f64) -> Vec<f64> {
        self.rows_at(point).map(f).collect()
    }

    pub fn rates(&self, point: usize) -> Vec<f64> {
        self.column(point, |r| r.rate_bits)
    }

    pub fn median_rate(&self, point: usize) -> f64 {
        percentile(&self.rates(point), 0.5)
    }

    pub fn mean_user_rate(&self, point: usize) -> f64 {
        mean(&self.column(point, |r| r.rate_user))
    }

    pub fn mean_eve_rate(&self, point: usize) -> f64 {
        mean(&self.column(point, |r| r.rate_eve))
    }

    pub fn mean_iterations(&self, point: usize) -> f64 {
        mean(&self.column(point, |r| r.iters as f64))
    }

    pub fn medians(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.median_rate(i)).collect()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        (0..self.values.len())
            .map(|i| {
                let r = self.rates(i);
                SummaryRow {
                    sweep_value: self.values[i],
                    mean: mean(&r),
                    median: percentile(&r, 0.5),
                    p10: percentile(&r, 0.1),
                    p90: percentile(&r, 0.9),
                    skip_fraction: self.skips[i] as f64 / self.trials as f64,
                }
            })
            .collect()
    }

    pub fn total_skips(&self) -> usize {
        self.skips.iter().sum()
    }

    pub fn all_skipped(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Linearly interpolated quantile (`q` in [0, 1]); NaN for no data.
pub fn percentile(x: &[f64], q: f64) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// Channels for one trial. `G` and the receiver gains come first in the
/// stream so every mode and sweep point sees the same draw for a seed.
pub fn trial_channels(cfg: &ScenarioConfig, seed: u64) -> Result<(ChannelSet, ChaCha8Rng)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ch = realize_channels(&cfg.array, &cfg.geometry, &cfg.fading, cfg.mode.channel_model(), &mut rng)?;
    Ok((ch, rng))
}

/// Uniform phases on the unit circle.
pub fn random_phases<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RisVector {
    let phases: Vec<f64> = (0..n)
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect();
    RisVector::from_phases(&phases)
}

fn ao_settings(cfg: &ScenarioConfig) -> AoSettings {
    AoSettings {
        mode: cfg.mode.projection(),
        ..cfg.solver
    }
}

/// Runs one trial in the configured mode; `None` when the draw is infeasible.
pub fn run_trial(cfg: &ScenarioConfig, seed: u64) -> Result<Option<AoSolution>> {
    let (ch, mut rng) = trial_channels(cfg, seed)?;
    let settings = ao_settings(cfg);
    let out = match cfg.mode {
        Mode::Continuous | Mode::Discrete(_) | Mode::FarField => solve_p1(&ch, &cfg.limits, &settings),
        Mode::NoJamming => solve_no_jamming_baseline(&ch, &cfg.limits, &settings),
        Mode::Stochastic => {
            let theta = random_phases(ch.ris_elements(), &mut rng);
            solve_fixed_ris(&ch, &theta, &cfg.limits, &settings)
        }
    };
    match out {
        Ok(s) => Ok(Some(s)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn status_label(s: AoStatus) -> &'static str {
    match s {
        AoStatus::Converged => "converged",
        AoStatus::MaxSweeps => "max-sweeps",
    }
}

fn final_row(value: f64, trial: usize, seed: u64, s: &AoSolution) -> TrialRow {
    TrialRow {
        sweep_value: value,
        trial,
        seed,
        rate_bits: s.rates.secrecy,
        rate_user: s.rates.user,
        rate_eve: s.rates.eve,
        iters: s.trace.records.len(),
        status: status_label(s.trace.status).into(),
    }
}

/// Runs every (point, trial) pair; results come back in input order.
fn run_points(
    name: String,
    axis: &str,
    mode: Mode,
    points: Vec<(f64, ScenarioConfig)>,
) -> Result<SweepResult> {
    let trials = points.first().map(|p| p.1.trials).unwrap_or(1);
    for (_, cfg) in &points {
        cfg.validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..trials).map(move |t| (p, t))).collect();
    let outcomes: Vec<Result<Option<TrialRow>>> = jobs
        .par_iter()
        .map(|&(p, t)| {
            let (value, cfg) = &points[p];
            let seed = cfg.base_seed.wrapping_add(t as u64);
            Ok(run_trial(cfg, seed)?.map(|s| final_row(*value, t, seed, &s)))
        })
        .collect();
    let mut rows = Vec::new();
    let mut skips = vec![0; points.len()];
    for (&(p, _), out) in jobs.iter().zip(outcomes) {
        match out? {
            Some(r) => rows.push(r),
            None => skips[p] += 1,
        }
    }
    Ok(SweepResult {
        name,
        axis: axis.into(),
        mode,
        values: points.iter().map(|p| p.0).collect(),
        trials,
        skips,
        rows,
    })
}

/// Secrecy rate per AO sweep for the jamming scheme and the no-jamming
/// baseline on the same draws.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    pub jamming: SweepResult,
    pub no_jamming: SweepResult,
}

impl ConvergenceResult {
    /// Per-iteration mean over trials.
    pub fn mean_curve(result: &SweepResult) -> Vec<f64> {
        (0..result.values.len()).map(|i| mean(&result.rates(i))).collect()
    }
}

pub fn run_convergence(cfg: &ScenarioConfig) -> Result<ConvergenceResult> {
    cfg.validate()?;
    let jam_cfg = ScenarioConfig {
        mode: match cfg.mode {
            Mode::NoJamming | Mode::Stochastic => Mode::Continuous,
            m => m,
        },
        ..cfg.clone()
    };
    let nojam_cfg = ScenarioConfig {
        mode: Mode::NoJamming,
        ..cfg.clone()
    };
    let seeds: Vec<(usize, u64)> = (0..cfg.trials).map(|t| (t, cfg.base_seed.wrapping_add(t as u64))).collect();
    let run = |c: &ScenarioConfig| -> Result<Vec<Option<AoSolution>>> {
        seeds.par_iter().map(|&(_, seed)| run_trial(c, seed)).collect()
    };
    let jam = run(&jam_cfg)?;
    let nojam = run(&nojam_cfg)?;
    Ok(ConvergenceResult {
        jamming: trace_rows(format!("converge_{}", jam_cfg.mode.label()), jam_cfg.mode, &seeds, &jam),
        no_jamming: trace_rows("converge_nojam".into(), Mode::NoJamming, &seeds, &nojam),
    })
}

/// One row per (sweep index, trial); traces that stopped early are held at
/// their final value so every trial covers the same index range.
fn trace_rows(name: String, mode: Mode, seeds: &[(usize, u64)], sols: &[Option<AoSolution>]) -> SweepResult {
    let len = sols
        .iter()
        .flatten()
        .map(|s| s.trace.records.len() + 1)
        .max()
        .unwrap_or(1);
    let mut rows = Vec::new();
    let skipped = sols.iter().filter(|s| s.is_none()).count();
    for k in 0..len {
        for (&(t, seed), sol) in seeds.iter().zip(sols) {
            let Some(s) = sol else { continue };
            let tr = &s.trace;
            let (rate, user, eve) = if k == 0 {
                (tr.initial, tr.initial_user, tr.initial_eve)
            } else {
                let r = &tr.records[(k - 1).min(tr.records.len() - 1)];
                (r.secrecy, r.rate_user, r.rate_eve)
            };
            rows.push(TrialRow {
                sweep_value: k as f64,
                trial: t,
                seed,
                rate_bits: rate,
                rate_user: user,
                rate_eve: eve,
                iters: tr.records.len(),
                status: status_label(tr.status).into(),
            });
        }
    }
    SweepResult {
        name,
        axis: "iteration".into(),
        mode,
        values: (0..len).map(|k| k as f64).collect(),
        trials: seeds.len(),
        skips: vec![skipped; len],
        rows,
    }
}

/// Eavesdropper radius sweep at a fixed azimuth; user stays where the
/// scenario puts it.
pub fn run_distance_sweep(cfg: &ScenarioConfig, radii: &[f64], eve_azimuth: f64) -> Result<SweepResult> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Config("distance sweep radii must be positive".into()));
    }
    let points = radii
        .iter()
        .map(|&r| {
            let mut c = cfg.clone();
            c.geometry.eve = Polar::new(r, eve_azimuth);
            (r, c)
        })
        .collect();
    let deg = (eve_azimuth.to_degrees() * 100.0).round() / 100.0;
    run_points(format!("dist_{}_az{deg}", cfg.mode.label()), "eve_radius_m", cfg.mode, points)
}

/// RIS size sweep, one result per mode; shapes are (rows, cols).
pub fn run_element_sweep(cfg: &ScenarioConfig, shapes: &[(usize, usize)], modes: &[Mode]) -> Result<Vec<SweepResult>> {
    if shapes.is_empty() {
        return Err(Error::Config("element sweep needs at least one array shape".into()));
    }
    let mut sized = Vec::with_capacity(shapes.len());
    for &(rows, cols) in shapes {
        sized.push(((rows * cols) as f64, cfg.with_ris_shape(rows, cols)?));
    }
    modes
        .iter()
        .map(|&mode| {
            let points = sized
                .iter()
                .map(|(n, c)| (*n, ScenarioConfig { mode, ..c.clone() }))
                .collect();
            run_points(format!("elem_{}", mode.label()), "ris_elements", mode, points)
        })
        .collect()
}

/// Random phases with optimized precoders at the scenario's array size.
pub fn run_stochastic_phase_baseline(cfg: &ScenarioConfig) -> Result<SweepResult> {
    let c = ScenarioConfig {
        mode: Mode::Stochastic,
        ..cfg.clone()
    };
    let n = c.array.ris_elements() as f64;
    run_points("baseline_stochastic".into(), "ris_elements", Mode::Stochastic, vec![(n, c)])
}

/// Single-point run of the configured mode.
pub fn run_single(cfg: &ScenarioConfig) -> Result<SweepResult> {
    let n = cfg.array.ris_elements() as f64;
    run_points(format!("run_{}", cfg.mode.label()), "ris_elements", cfg.mode, vec![(n, cfg.clone())])
}
