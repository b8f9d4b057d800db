//! Alternating optimization of precoders and reflection vector.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::geometry::ChannelSet;
use crate::precoder::{default_init, solve_p2_cascaded, P2Settings, P2Status};
use crate::ris::{discrete_line_search, solve_p3, P3Settings, P3Status, PhaseAlphabet, ProjectionMode};
use crate::secrecy::{cascade, check_constraints, rates_and_secrecy, NoiseAndLimits, Precoders, Rates, RisVector};
use crate::{CVec, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AoSettings {
    pub tol_bits: f64,
    pub max_sweeps: usize,
    pub mode: ProjectionMode,
    pub p2: P2Settings,
    pub p3: P3Settings,
}

impl Default for AoSettings {
    fn default() -> Self {
        Self {
            tol_bits: 1e-3,
            max_sweeps: 100,
            mode: ProjectionMode::Continuous,
            p2: P2Settings::default(),
            p3: P3Settings::default(),
        }
    }
}

impl AoSettings {
    fn with_jamming(mut self, jamming: bool) -> Self {
        self.p2.jamming = jamming;
        self.p3.jamming = jamming;
        self
    }
}

/// One full P2 + P3 sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub sweep: usize,
    /// Clamped secrecy rate, bits.
    pub secrecy: f64,
    pub rate_user: f64,
    pub rate_eve: f64,
    pub power_slack: f64,
    pub qos_slack: f64,
    pub sic_slack: f64,
    pub p2_status: P2Status,
    pub p2_iterations: usize,
    pub p3_status: P3Status,
    pub p3_iterations: usize,
    pub p2_seconds: f64,
    pub p3_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AoStatus {
    Converged,
    MaxSweeps,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AoTrace {
    /// Clamped secrecy rate at the initial point.
    pub initial: f64,
    pub initial_user: f64,
    pub initial_eve: f64,
    pub records: Vec<SweepRecord>,
    pub status: AoStatus,
    pub ris_elements: usize,
}

impl AoTrace {
    /// Initial rate followed by the rate after every sweep.
    pub fn rates(&self) -> Vec<f64> {
        std::iter::once(self.initial).chain(self.records.iter().map(|r| r.secrecy)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoSolution {
    pub precoders: Precoders,
    pub ris: RisVector,
    pub rates: Rates,
    pub trace: AoTrace,
}

/// Runs the alternating optimization from the all-ones reflection vector.
///
/// With a discrete alphabet a second run starts from the quantized
/// continuous solution and the better of the two is kept; from the all-ones
/// start a coarse alphabet rarely leaves its initial cell.
pub fn solve_p1(channels: &ChannelSet, limits: &NoiseAndLimits, settings: &AoSettings) -> Result<AoSolution> {
    run_with_restart(channels, limits, settings)
}

/// Same pipeline with the jamming stream held at zero and SIC dropped.
pub fn solve_no_jamming_baseline(
    channels: &ChannelSet,
    limits: &NoiseAndLimits,
    settings: &AoSettings,
) -> Result<AoSolution> {
    run_with_restart(channels, limits, &settings.with_jamming(false))
}

fn run_with_restart(channels: &ChannelSet, limits: &NoiseAndLimits, settings: &AoSettings) -> Result<AoSolution> {
    let ones = RisVector::ones(channels.ris_elements());
    let direct = run(channels, limits, settings, ones)?;
    let ProjectionMode::Discrete(b) = settings.mode else {
        return Ok(direct);
    };
    let relaxed_settings = AoSettings {
        mode: ProjectionMode::Continuous,
        ..*settings
    };
    let relaxed = match run(channels, limits, &relaxed_settings, RisVector::ones(channels.ris_elements())) {
        Ok(r) => r,
        Err(_) => return Ok(direct),
    };
    let start = quantize_relaxed(channels, limits, &relaxed, &PhaseAlphabet::new(b)?);
    let restarted = match run(channels, limits, settings, start) {
        Ok(r) => r,
        Err(_) => return Ok(direct),
    };
    let feasible = |s: &AoSolution| {
        let c = cascade(channels, &s.ris).map(|c| check_constraints(&c, &s.precoders, &s.ris, limits, 1e-6));
        c.map(|r| r.power.satisfied && r.qos.satisfied && (r.sic.satisfied || !settings.p2.jamming)).unwrap_or(false)
    };
    let score = |s: &AoSolution| s.rates.user - s.rates.eve;
    if feasible(&restarted) && (!feasible(&direct) || score(&restarted) > score(&direct)) {
        Ok(restarted)
    } else {
        Ok(direct)
    }
}

/// Rounds the continuous reflection vector onto the alphabet. Without a
/// direct link the rates do not depend on a common phase of the reflection
/// vector, so the rounding is tried over a grid of common rotations and the
/// one with the best rate under the relaxed precoders is kept.
fn quantize_relaxed(
    channels: &ChannelSet,
    limits: &NoiseAndLimits,
    relaxed: &AoSolution,
    alphabet: &PhaseAlphabet,
) -> RisVector {
    let zeros = CVec::zeros(relaxed.ris.len());
    let steps = 16 * alphabet.size();
    let mut best: Option<(f64, RisVector)> = None;
    for k in 0..steps {
        let rot = C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / steps as f64);
        let v = RisVector::new(discrete_line_search(&(&relaxed.ris.v * rot), &zeros, alphabet));
        let Ok(c) = cascade(channels, &v) else { continue };
        let r = crate::secrecy::secrecy_nats(&c, &relaxed.precoders, limits);
        if best.as_ref().is_none_or(|(b, _)| r > *b) {
            best = Some((r, v));
        }
    }
    best.map(|(_, v)| v).unwrap_or_else(|| relaxed.ris.clone())
}

/// Precoders only, for a given reflection vector (random-phase baseline).
pub fn solve_fixed_ris(
    channels: &ChannelSet,
    ris: &RisVector,
    limits: &NoiseAndLimits,
    settings: &AoSettings,
) -> Result<AoSolution> {
    let cascaded = cascade(channels, ris)?;
    let init = default_init(&cascaded, limits, settings.p2.jamming)?;
    let initial = rates_and_secrecy(&cascaded, &init, limits);
    let t0 = Instant::now();
    let (p, d) = solve_p2_cascaded(&cascaded, limits, &init, &settings.p2)?;
    let p2_seconds = t0.elapsed().as_secs_f64();
    let rates = rates_and_secrecy(&cascaded, &p, limits);
    let rep = check_constraints(&cascaded, &p, ris, limits, 1e-6);
    let record = SweepRecord {
        sweep: 1,
        secrecy: rates.secrecy,
        rate_user: rates.user,
        rate_eve: rates.eve,
        power_slack: rep.power.slack,
        qos_slack: rep.qos.slack,
        sic_slack: rep.sic.slack,
        p2_status: d.status,
        p2_iterations: d.rates.len() - 1,
        p3_status: P3Status::NoImprovement,
        p3_iterations: 0,
        p2_seconds,
        p3_seconds: 0.0,
    };
    Ok(AoSolution {
        precoders: p,
        ris: ris.clone(),
        rates,
        trace: AoTrace {
            initial: initial.secrecy,
            initial_user: initial.user,
            initial_eve: initial.eve,
            records: vec![record],
            status: AoStatus::Converged,
            ris_elements: ris.len(),
        },
    })
}

fn run(channels: &ChannelSet, limits: &NoiseAndLimits, settings: &AoSettings, ris0: RisVector) -> Result<AoSolution> {
    limits.validate()?;
    let jamming = settings.p2.jamming;
    let p3_settings = P3Settings { jamming, ..settings.p3 };
    let mut ris = ris0;
    let mut cascaded = cascade(channels, &ris)?;
    let mut precoders = default_init(&cascaded, limits, jamming)?;
    let initial_rates = rates_and_secrecy(&cascaded, &precoders, limits);
    let mut unclamped = crate::secrecy::secrecy_nats(&cascaded, &precoders, limits) / std::f64::consts::LN_2;

    let mut records = Vec::new();
    let mut status = AoStatus::MaxSweeps;
    for sweep in 1..=settings.max_sweeps {
        let t0 = Instant::now();
        let (p, d2) = solve_p2_cascaded(&cascaded, limits, &precoders, &settings.p2)?;
        let p2_seconds = t0.elapsed().as_secs_f64();
        precoders = p;

        let t1 = Instant::now();
        let (v, d3) = solve_p3(channels, &precoders, limits, &ris, settings.mode, &p3_settings)?;
        let p3_seconds = t1.elapsed().as_secs_f64();
        ris = v;
        cascaded = cascade(channels, &ris)?;

        let rates = rates_and_secrecy(&cascaded, &precoders, limits);
        let rep = check_constraints(&cascaded, &precoders, &ris, limits, 1e-6);
        records.push(SweepRecord {
            sweep,
            secrecy: rates.secrecy,
            rate_user: rates.user,
            rate_eve: rates.eve,
            power_slack: rep.power.slack,
            qos_slack: rep.qos.slack,
            sic_slack: rep.sic.slack,
            p2_status: d2.status,
            p2_iterations: d2.rates.len() - 1,
            p3_status: d3.status,
            p3_iterations: d3.iterations,
            p2_seconds,
            p3_seconds,
        });
        // The clamped rate sits at zero while R_u < R_e, so progress is
        // measured on the unclamped difference.
        let now = crate::secrecy::secrecy_nats(&cascaded, &precoders, limits) / std::f64::consts::LN_2;
        let gain = now - unclamped;
        unclamped = now;
        if gain < settings.tol_bits {
            status = AoStatus::Converged;
            break;
        }
    }
    let rates = rates_and_secrecy(&cascaded, &precoders, limits);
    Ok(AoSolution {
        precoders,
        ris,
        rates,
        trace: AoTrace {
            initial: initial_rates.secrecy,
            initial_user: initial_rates.user,
            initial_eve: initial_rates.eve,
            records,
            status,
            ris_elements: channels.ris_elements(),
        },
    })
}

/// Mean wall time per sweep of each stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageCost {
    pub ris_elements: usize,
    pub sweeps: usize,
    pub p2_seconds: f64,
    pub p3_seconds: f64,
    /// P3 time divided by its ADMM iterations.
    pub p3_seconds_per_iteration: f64,
}

pub fn complexity_report(trace: &AoTrace) -> Result<StageCost> {
    if trace.records.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let k = trace.records.len() as f64;
    let p2 = trace.records.iter().map(|r| r.p2_seconds).sum::<f64>() / k;
    let p3 = trace.records.iter().map(|r| r.p3_seconds).sum::<f64>() / k;
    let p3_iters: usize = trace.records.iter().map(|r| r.p3_iterations).sum();
    let p3_total: f64 = trace.records.iter().map(|r| r.p3_seconds).sum();
    Ok(StageCost {
        ris_elements: trace.ris_elements,
        sweeps: trace.records.len(),
        p2_seconds: p2,
        p3_seconds: p3,
        p3_seconds_per_iteration: if p3_iters > 0 { p3_total / p3_iters as f64 } else { 0.0 },
    })
}

/// Least-squares exponent `b` of `y = a x^b` on log-log axes.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Numerical("need two positive points for a power-law fit".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("power-law fit needs distinct sizes".into()));
    }
    Ok(sxy / sxx)
}
