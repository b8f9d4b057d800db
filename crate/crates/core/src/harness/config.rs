//! Scenario files and run modes.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::Deserialize;

use crate::ao::AoSettings;
use crate::geometry::{ArrayConfig, ChannelModel, FadingParams, Polar, SceneGeometry, SPEED_OF_LIGHT};
use crate::precoder::EveSurrogate;
use crate::ris::{ProjectionMode, ThetaSurrogate};
use crate::secrecy::{dbm_to_watts, NoiseAndLimits};
use crate::{Error, Result};

pub const DEFAULT_DISCRETE_BITS: u32 = 3;

/// What one trial computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Continuous,
    Discrete(u32),
    /// Uniform random phases, precoders optimized.
    Stochastic,
    /// Full pipeline on planar-wave receiver channels.
    FarField,
    NoJamming,
}

impl Mode {
    pub fn channel_model(self) -> ChannelModel {
        match self {
            Mode::FarField => ChannelModel::FarField,
            _ => ChannelModel::NearField,
        }
    }

    pub fn projection(self) -> ProjectionMode {
        match self {
            Mode::Discrete(b) => ProjectionMode::Discrete(b),
            _ => ProjectionMode::Continuous,
        }
    }

    /// Short name used in file names.
    pub fn label(self) -> String {
        match self {
            Mode::Continuous => "continuous".into(),
            Mode::Discrete(b) => format!("discrete{b}"),
            Mode::Stochastic => "stochastic".into(),
            Mode::FarField => "ff".into(),
            Mode::NoJamming => "nojam".into(),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Discrete(b) => write!(f, "discrete:{b}"),
            other => f.write_str(&other.label()),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let mode = match s.as_str() {
            "continuous" => Mode::Continuous,
            "discrete" => Mode::Discrete(DEFAULT_DISCRETE_BITS),
            "stochastic" => Mode::Stochastic,
            "ff" | "far-field" => Mode::FarField,
            "nojam" | "no-jamming" => Mode::NoJamming,
            other => match other.strip_prefix("discrete:") {
                Some(b) => {
                    let bits: u32 = b
                        .parse()
                        .map_err(|_| Error::Config(format!("bad bit count in mode '{other}'")))?;
                    if !(1..=16).contains(&bits) {
                        return Err(Error::Config(format!("discrete bits {bits} outside 1..=16")));
                    }
                    Mode::Discrete(bits)
                }
                None => {
                    return Err(Error::Config(format!(
                        "unknown mode '{other}' (expected continuous, discrete[:b], stochastic, ff or nojam)"
                    )))
                }
            },
        };
        Ok(mode)
    }
}

/// Everything a Monte Carlo run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub array: ArrayConfig,
    pub carrier_hz: f64,
    pub geometry: SceneGeometry,
    pub fading: FadingParams,
    pub limits: NoiseAndLimits,
    pub mode: Mode,
    pub trials: usize,
    pub base_seed: u64,
    pub solver: AoSettings,
}

pub const FULL_SCALE_BS_ANTENNAS: usize = 8;
pub const FULL_SCALE_RIS_SHAPE: (usize, usize) = (64, 8);
pub const DESK_BS_ANTENNAS: usize = 4;
pub const DESK_RIS_SHAPE: (usize, usize) = (16, 4);
pub const CARRIER_HZ: f64 = 10e9;
pub const SWEEP_TRIALS: usize = 50;
pub const CONVERGENCE_TRIALS: usize = 10;

impl ScenarioConfig {
    /// Full-size reference scenario.
    pub fn full_scale() -> Self {
        Self::with_shape(FULL_SCALE_BS_ANTENNAS, FULL_SCALE_RIS_SHAPE)
    }

    /// Reduced array for quick runs; all other parameters as in [`full_scale`](Self::full_scale).
    pub fn desk() -> Self {
        Self::with_shape(DESK_BS_ANTENNAS, DESK_RIS_SHAPE)
    }

    fn with_shape(m: usize, (n1, n2): (usize, usize)) -> Self {
        Self {
            array: ArrayConfig::half_wavelength(m, n1, n2, CARRIER_HZ).expect("built-in array is valid"),
            carrier_hz: CARRIER_HZ,
            geometry: SceneGeometry::default(),
            fading: FadingParams::default(),
            limits: NoiseAndLimits::default(),
            mode: Mode::Continuous,
            trials: SWEEP_TRIALS,
            base_seed: 0,
            solver: AoSettings::default(),
        }
    }

    /// Same scenario with a different RIS shape (spacing unchanged).
    pub fn with_ris_shape(&self, rows: usize, cols: usize) -> Result<Self> {
        let mut out = self.clone();
        out.array = ArrayConfig::new(self.array.bs_antennas, rows, cols, self.array.spacing, self.array.wavelength)?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::Config("carrier frequency must be positive".into()));
        }
        self.array.validate()?;
        self.geometry.validate()?;
        self.fading.validate()?;
        self.limits.validate()?;
        if let Mode::Discrete(b) = self.mode {
            if !(1..=16).contains(&b) {
                return Err(Error::Config(format!("discrete bits {b} outside 1..=16")));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str, full_scale: bool) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.resolve(full_scale)
    }

    pub fn from_file(path: &Path, full_scale: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, full_scale).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScenarioFile {
    array: ArraySection,
    geometry: GeometrySection,
    fading: FadingSection,
    limits: LimitsSection,
    solver: SolverSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ArraySection {
    bs_antennas: Option<usize>,
    ris_rows: Option<usize>,
    ris_cols: Option<usize>,
    carrier_hz: Option<f64>,
    /// Meters; half a wavelength when absent.
    spacing: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GeometrySection {
    bs_position: [f64; 3],
    ris_center: [f64; 3],
    bs_broadside_offset: f64,
    user_radius: f64,
    user_azimuth: f64,
    eve_radius: f64,
    eve_azimuth: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let g = SceneGeometry::default();
        Self {
            bs_position: g.bs_position.into(),
            ris_center: g.ris_center.into(),
            bs_broadside_offset: g.bs_broadside_offset,
            user_radius: g.user.radius,
            user_azimuth: g.user.azimuth,
            eve_radius: g.eve.radius,
            eve_azimuth: g.eve.azimuth,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FadingSection {
    beta0_db: f64,
    alpha_br: f64,
    kappa_db: f64,
    zeta_mean: f64,
    zeta_std: f64,
}

impl Default for FadingSection {
    fn default() -> Self {
        Self {
            beta0_db: -30.0,
            alpha_br: 2.2,
            kappa_db: 3.0,
            zeta_mean: 1.0,
            zeta_std: 0.1,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LimitsSection {
    noise_dbm: f64,
    eve_noise_dbm: f64,
    p_max_dbm: f64,
    r_th: f64,
}

impl Default for LimitsSection {
    fn default() -> Self {
        Self {
            noise_dbm: -80.0,
            eve_noise_dbm: -80.0,
            p_max_dbm: 10.0,
            r_th: 1.0,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SolverSection {
    mode: Option<String>,
    trials: Option<usize>,
    seed: Option<u64>,
    ao_tol_bits: Option<f64>,
    ao_max_sweeps: Option<usize>,
    p2_tol_bits: Option<f64>,
    p2_max_iter: Option<usize>,
    p3_tol_residual: Option<f64>,
    p3_max_iter: Option<usize>,
    p3_mu0: Option<f64>,
    eve_surrogate: Option<EveSurrogate>,
    theta_surrogate: Option<ThetaSurrogate>,
    qcqp_eps: Option<f64>,
    qcqp_max_iter: Option<usize>,
}

impl ScenarioFile {
    fn resolve(self, full_scale: bool) -> Result<ScenarioConfig> {
        let mut cfg = if full_scale {
            ScenarioConfig::full_scale()
        } else {
            ScenarioConfig::desk()
        };

        let a = self.array;
        cfg.carrier_hz = a.carrier_hz.unwrap_or(CARRIER_HZ);
        let wavelength = SPEED_OF_LIGHT / cfg.carrier_hz;
        cfg.array = ArrayConfig::new(
            a.bs_antennas.unwrap_or(cfg.array.bs_antennas),
            a.ris_rows.unwrap_or(cfg.array.ris_rows),
            a.ris_cols.unwrap_or(cfg.array.ris_cols),
            a.spacing.unwrap_or(wavelength / 2.0),
            wavelength,
        )?;

        let g = self.geometry;
        cfg.geometry = SceneGeometry {
            bs_position: Vector3::from(g.bs_position),
            ris_center: Vector3::from(g.ris_center),
            bs_broadside_offset: g.bs_broadside_offset,
            user: Polar::new(g.user_radius, g.user_azimuth),
            eve: Polar::new(g.eve_radius, g.eve_azimuth),
        };

        let f = self.fading;
        cfg.fading = FadingParams::from_db(f.beta0_db, f.alpha_br, f.kappa_db, f.zeta_mean, f.zeta_std);

        let l = self.limits;
        cfg.limits = NoiseAndLimits {
            noise_user: dbm_to_watts(l.noise_dbm),
            noise_eve: dbm_to_watts(l.eve_noise_dbm),
            p_max: dbm_to_watts(l.p_max_dbm),
            r_th: l.r_th,
        };

        let s = self.solver;
        if let Some(m) = s.mode {
            cfg.mode = m.parse()?;
        }
        if let Some(t) = s.trials {
            cfg.trials = t;
        }
        if let Some(seed) = s.seed {
            cfg.base_seed = seed;
        }
        let ao = &mut cfg.solver;
        if let Some(v) = s.ao_tol_bits {
            ao.tol_bits = v;
        }
        if let Some(v) = s.ao_max_sweeps {
            ao.max_sweeps = v;
        }
        if let Some(v) = s.p2_tol_bits {
            ao.p2.tol_bits = v;
        }
        if let Some(v) = s.p2_max_iter {
            ao.p2.max_iter = v;
        }
        if let Some(v) = s.p3_tol_residual {
            ao.p3.tol_residual = v;
        }
        if let Some(v) = s.p3_max_iter {
            ao.p3.max_iter = v;
        }
        if let Some(v) = s.p3_mu0 {
            ao.p3.mu0 = v;
        }
        if let Some(v) = s.eve_surrogate {
            ao.p2.eve_surrogate = v;
            ao.p3.eve_surrogate = v;
        }
        if let Some(v) = s.theta_surrogate {
            ao.p3.theta_surrogate = v;
        }
        if let Some(v) = s.qcqp_eps {
            ao.p2.solver.eps_kkt = v;
            ao.p3.solver.eps_kkt = v;
        }
        if let Some(v) = s.qcqp_max_iter {
            ao.p2.solver.max_iter = v;
            ao.p3.solver.max_iter = v;
        }
        let positive = [ao.tol_bits, ao.p2.tol_bits, ao.p3.tol_residual, ao.p3.mu0, ao.p2.solver.eps_kkt];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_desk_scale_reference_setup() {
        let cfg = ScenarioConfig::from_toml_str("", false).unwrap();
        assert_eq!(cfg, ScenarioConfig::desk());
        let full = ScenarioConfig::from_toml_str("", true).unwrap();
        assert_eq!(full.array.ris_elements(), 512);
        assert_eq!(full.array.bs_antennas, 8);
        assert!((full.limits.noise_user - 1e-11).abs() < 1e-24);
        assert!((full.limits.p_max - 0.01).abs() < 1e-15);
    }

    #[test]
    fn sections_override_defaults() {
        let text = r#"
[array]
ris_rows = 8
bs_antennas = 2

[geometry]
eve_radius = 20.0
eve_azimuth = 0.5235987755982988

[solver]
mode = "discrete:2"
trials = 7
seed = 11
eve_surrogate = "standard-mmse"
"#;
        let cfg = ScenarioConfig::from_toml_str(text, false).unwrap();
        assert_eq!(cfg.array.ris_rows, 8);
        assert_eq!(cfg.array.ris_cols, 4);
        assert_eq!(cfg.array.bs_antennas, 2);
        assert_eq!(cfg.geometry.eve.radius, 20.0);
        assert_eq!(cfg.mode, Mode::Discrete(2));
        assert_eq!(cfg.trials, 7);
        assert_eq!(cfg.base_seed, 11);
        assert_eq!(cfg.solver.p3.eve_surrogate, EveSurrogate::StandardMmse);
    }

    #[test]
    fn bad_files_are_config_errors() {
        for text in [
            "[array]\nris_rows = 0",
            "[solver]\ntrials = 0",
            "[solver]\nmode = \"fast\"",
            "[geometry]\nuser_radius = -1.0",
            "[limits]\nr_th = 0.0",
            "[bogus]\nx = 1",
            "[array]\nrows = 3",
        ] {
            assert!(
                matches!(ScenarioConfig::from_toml_str(text, false), Err(Error::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("continuous".parse::<Mode>().unwrap(), Mode::Continuous);
        assert_eq!("discrete".parse::<Mode>().unwrap(), Mode::Discrete(3));
        assert_eq!("discrete:1".parse::<Mode>().unwrap(), Mode::Discrete(1));
        assert_eq!("ff".parse::<Mode>().unwrap(), Mode::FarField);
        assert_eq!("nojam".parse::<Mode>().unwrap(), Mode::NoJamming);
        assert_eq!("stochastic".parse::<Mode>().unwrap(), Mode::Stochastic);
        assert!("discrete:0".parse::<Mode>().is_err());
        assert!("discrete:x".parse::<Mode>().is_err());
        for m in [Mode::Continuous, Mode::Discrete(2), Mode::Stochastic, Mode::FarField, Mode::NoJamming] {
            assert_eq!(m.to_string().parse::<Mode>().unwrap(), m);
        }
    }
}
