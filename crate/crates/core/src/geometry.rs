//! Array responses and channel synthesis.
//!
//! The RIS lies in the yz-plane with its normal along +x. Element `(n1, n2)`
//! sits at `y = (n1 - (N1-1)/2) d`, `z = (n2 - (N2-1)/2) d` relative to the
//! RIS center, and vectors over the RIS are stored row-major in `(n1, n2)`,
//! i.e. index `n1 * N2 + n2`. This matches the Kronecker ordering of
//! [`upa_response`] so planar-wave and spherical-wave vectors are comparable.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{CMat, CVec, Error, Result, C64};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// BS antenna count, RIS shape and element spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    /// M, BS antennas.
    pub bs_antennas: usize,
    /// N1, RIS elements along y.
    pub ris_rows: usize,
    /// N2, RIS elements along z.
    pub ris_cols: usize,
    /// Element spacing in meters (shared by BS ULA and RIS UPA).
    pub spacing: f64,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
}

impl ArrayConfig {
    pub fn new(
        bs_antennas: usize,
        ris_rows: usize,
        ris_cols: usize,
        spacing: f64,
        wavelength: f64,
    ) -> Result<Self> {
        let cfg = Self {
            bs_antennas,
            ris_rows,
            ris_cols,
            spacing,
            wavelength,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Half-wavelength spacing at the given carrier frequency.
    pub fn half_wavelength(
        bs_antennas: usize,
        ris_rows: usize,
        ris_cols: usize,
        carrier_hz: f64,
    ) -> Result<Self> {
        if !(carrier_hz > 0.0) {
            return Err(Error::Config(format!("carrier frequency {carrier_hz} must be positive")));
        }
        let wavelength = SPEED_OF_LIGHT / carrier_hz;
        Self::new(bs_antennas, ris_rows, ris_cols, wavelength / 2.0, wavelength)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bs_antennas == 0 || self.ris_rows == 0 || self.ris_cols == 0 {
            return Err(Error::Config(format!(
                "array sizes must be >= 1 (M={}, N1={}, N2={})",
                self.bs_antennas, self.ris_rows, self.ris_cols
            )));
        }
        if !(self.spacing > 0.0) || !(self.wavelength > 0.0) {
            return Err(Error::Config(format!(
                "spacing ({}) and wavelength ({}) must be positive",
                self.spacing, self.wavelength
            )));
        }
        Ok(())
    }

    /// N = N1 * N2.
    pub fn ris_elements(&self) -> usize {
        self.ris_rows * self.ris_cols
    }

    /// Aperture used for the Rayleigh distance: the diagonal of the RIS.
    pub fn aperture(&self) -> f64 {
        let w = self.ris_rows as f64 * self.spacing;
        let h = self.ris_cols as f64 * self.spacing;
        w.hypot(h)
    }

    pub fn rayleigh_distance(&self) -> f64 {
        rayleigh_distance(self.aperture(), self.wavelength)
    }
}

/// Receiver location in the x-y plane, relative to the RIS center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polar {
    pub radius: f64,
    pub azimuth: f64,
}

impl Polar {
    pub fn new(radius: f64, azimuth: f64) -> Self {
        Self { radius, azimuth }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    pub bs_position: Vector3<f64>,
    pub ris_center: Vector3<f64>,
    /// Angle between the BS array broadside and the BS→RIS line. The BS ULA
    /// axis is perpendicular to that line when this is zero.
    pub bs_broadside_offset: f64,
    pub user: Polar,
    pub eve: Polar,
}

impl Default for SceneGeometry {
    fn default() -> Self {
        Self {
            bs_position: Vector3::new(100.0, -100.0, 0.0),
            ris_center: Vector3::zeros(),
            bs_broadside_offset: 0.0,
            user: Polar::new(15.0, PI / 4.0),
            eve: Polar::new(10.0, PI / 4.0),
        }
    }
}

impl SceneGeometry {
    pub fn validate(&self) -> Result<()> {
        for (who, p) in [("user", self.user), ("eavesdropper", self.eve)] {
            if !(p.radius > 0.0) {
                return Err(Error::Config(format!("{who} radius {} must be positive", p.radius)));
            }
            if !(-PI..PI).contains(&p.azimuth) {
                return Err(Error::Config(format!(
                    "{who} azimuth {} outside [-pi, pi)",
                    p.azimuth
                )));
            }
        }
        if (self.bs_position - self.ris_center).norm() == 0.0 {
            return Err(Error::DegenerateGeometry("BS coincides with the RIS center".into()));
        }
        Ok(())
    }

    pub fn position_of(&self, p: Polar) -> Vector3<f64> {
        self.ris_center + Vector3::new(p.radius * p.azimuth.cos(), p.radius * p.azimuth.sin(), 0.0)
    }

    pub fn user_position(&self) -> Vector3<f64> {
        self.position_of(self.user)
    }

    pub fn eve_position(&self) -> Vector3<f64> {
        self.position_of(self.eve)
    }

    pub fn bs_ris_distance(&self) -> f64 {
        (self.bs_position - self.ris_center).norm()
    }
}

/// Azimuth and elevation of `target` seen from the RIS center, in the RIS
/// frame used by [`upa_response`] (`sin(az) cos(el)` along y, `sin(el)` along z).
pub fn ris_angles(geometry: &SceneGeometry, target: &Vector3<f64>) -> (f64, f64) {
    let u = (target - geometry.ris_center).normalize();
    (u.y.atan2(u.x), u.z.clamp(-1.0, 1.0).asin())
}

/// ULA response `(1/sqrt(M)) exp(j 2 pi d/lambda m sin(az))`, m = 0..M-1.
pub fn ula_response(azimuth: f64, antennas: usize, spacing: f64, wavelength: f64) -> CVec {
    let k = 2.0 * PI * spacing / wavelength * azimuth.sin();
    let scale = 1.0 / (antennas as f64).sqrt();
    CVec::from_fn(antennas, |m, _| C64::from_polar(scale, k * m as f64))
}

/// UPA response: horizontal factor (phase `n1 sin(az) cos(el)`) Kronecker
/// vertical factor (phase `n2 sin(el)`), normalized by `1/sqrt(N1 N2)`.
pub fn upa_response(
    azimuth: f64,
    elevation: f64,
    rows: usize,
    cols: usize,
    spacing: f64,
    wavelength: f64,
) -> CVec {
    let k = 2.0 * PI * spacing / wavelength;
    let kh = k * azimuth.sin() * elevation.cos();
    let kv = k * elevation.sin();
    let scale = 1.0 / ((rows * cols) as f64).sqrt();
    CVec::from_fn(rows * cols, |i, _| {
        let (n1, n2) = (i / cols, i % cols);
        C64::from_polar(scale, kh * n1 as f64 + kv * n2 as f64)
    })
}

/// Positions of all RIS elements, row-major in `(n1, n2)`.
pub fn element_positions(array: &ArrayConfig, ris_center: &Vector3<f64>) -> Vec<Vector3<f64>> {
    let c1 = (array.ris_rows as f64 - 1.0) / 2.0;
    let c2 = (array.ris_cols as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(array.ris_elements());
    for n1 in 0..array.ris_rows {
        for n2 in 0..array.ris_cols {
            out.push(
                ris_center
                    + Vector3::new(
                        0.0,
                        (n1 as f64 - c1) * array.spacing,
                        (n2 as f64 - c2) * array.spacing,
                    ),
            );
        }
    }
    out
}

/// Spherical-wave steering vector `(1/sqrt(N)) exp(-j 2 pi/lambda D(n1,n2))`
/// with exact element-to-receiver distances.
pub fn nearfield_steering(
    receiver: &Vector3<f64>,
    array: &ArrayConfig,
    geometry: &SceneGeometry,
) -> Result<CVec> {
    let positions = element_positions(array, &geometry.ris_center);
    let scale = 1.0 / (positions.len() as f64).sqrt();
    let k = 2.0 * PI / array.wavelength;
    let mut out = CVec::zeros(positions.len());
    for (i, p) in positions.iter().enumerate() {
        let dist = (receiver - p).norm();
        if dist <= 1e-12 * array.spacing.max(1.0) {
            return Err(Error::DegenerateGeometry(format!(
                "receiver coincides with RIS element {i}"
            )));
        }
        out[i] = C64::from_polar(scale, -k * dist);
    }
    Ok(out)
}

/// `2 D^2 / lambda`.
pub fn rayleigh_distance(aperture: f64, wavelength: f64) -> f64 {
    2.0 * aperture * aperture / wavelength
}

/// One far-field propagation path of the BS→RIS channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarFieldPath {
    pub gain: C64,
    pub bs_azimuth: f64,
    pub ris_azimuth: f64,
    pub ris_elevation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldPathSet {
    pub paths: Vec<FarFieldPath>,
}

impl FarFieldPathSet {
    pub fn new(paths: Vec<FarFieldPath>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Config("far-field path set needs at least one path".into()));
        }
        if paths.iter().any(|p| !p.gain.re.is_finite() || !p.gain.im.is_finite()) {
            return Err(Error::Config("far-field path gains must be finite".into()));
        }
        Ok(Self { paths })
    }

    /// Single line-of-sight path from the scene geometry. The gain carries
    /// the propagation phase and a `sqrt(N M)` factor so that the LoS matrix
    /// has unit-modulus entries, matching the per-entry power of the
    /// scattering component.
    pub fn line_of_sight(array: &ArrayConfig, geometry: &SceneGeometry) -> Self {
        let (ris_azimuth, ris_elevation) = ris_angles(geometry, &geometry.bs_position);
        let d = geometry.bs_ris_distance();
        let n = array.ris_elements() as f64;
        let m = array.bs_antennas as f64;
        let gain = C64::from_polar((n * m).sqrt(), -2.0 * PI * d / array.wavelength);
        Self {
            paths: vec![FarFieldPath {
                gain,
                bs_azimuth: geometry.bs_broadside_offset,
                ris_azimuth,
                ris_elevation,
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// `sum_i alpha_i b(phi_i, eta_i) a(gamma_i)^H`.
    pub fn matrix(&self, array: &ArrayConfig) -> CMat {
        let (n, m) = (array.ris_elements(), array.bs_antennas);
        let mut g = CMat::zeros(n, m);
        for p in &self.paths {
            let b = upa_response(
                p.ris_azimuth,
                p.ris_elevation,
                array.ris_rows,
                array.ris_cols,
                array.spacing,
                array.wavelength,
            );
            let a = ula_response(p.bs_azimuth, m, array.spacing, array.wavelength);
            g += (&b * a.adjoint()) * p.gain;
        }
        g
    }
}

/// Large-scale and small-scale fading parameters (all linear).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    /// Reference path gain at 1 m.
    pub beta0: f64,
    /// BS→RIS path-loss exponent.
    pub alpha_br: f64,
    /// BS→RIS Rician factor.
    pub kappa_br: f64,
    pub zeta_mean: f64,
    pub zeta_std: f64,
}

impl Default for FadingParams {
    fn default() -> Self {
        Self::from_db(-30.0, 2.2, 3.0, 1.0, 0.1)
    }
}

impl FadingParams {
    pub fn from_db(beta0_db: f64, alpha_br: f64, kappa_db: f64, zeta_mean: f64, zeta_std: f64) -> Self {
        Self {
            beta0: db_to_linear(beta0_db),
            alpha_br,
            kappa_br: db_to_linear(kappa_db),
            zeta_mean,
            zeta_std,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta0 > 0.0) || !(self.kappa_br >= 0.0) || !(self.zeta_std >= 0.0) {
            return Err(Error::Config(format!(
                "fading parameters out of range: beta0={}, kappa={}, zeta_std={}",
                self.beta0, self.kappa_br, self.zeta_std
            )));
        }
        if !self.alpha_br.is_finite() || !self.zeta_mean.is_finite() {
            return Err(Error::Config("fading parameters must be finite".into()));
        }
        Ok(())
    }

    /// Draws the near-field gain perturbation `zeta ~ N(mean, std^2)`.
    pub fn draw_zeta<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.zeta_std == 0.0 {
            return self.zeta_mean;
        }
        // std > 0 was validated, so the distribution is well formed.
        Normal::new(self.zeta_mean, self.zeta_std)
            .map(|d| d.sample(rng))
            .unwrap_or(self.zeta_mean)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Circularly symmetric standard complex Gaussian sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * FRAC_1_SQRT_2
}

/// Rician BS→RIS channel
/// `sqrt(beta0 d^-alpha) (sqrt(k/(k+1)) G_L + sqrt(1/(k+1)) G_S)`.
pub fn synthesize_far_channel<R: Rng + ?Sized>(
    params: &FadingParams,
    paths: &FarFieldPathSet,
    array: &ArrayConfig,
    bs_ris_distance: f64,
    rng: &mut R,
) -> CMat {
    let (n, m) = (array.ris_elements(), array.bs_antennas);
    let los = paths.matrix(array);
    let scattering = CMat::from_fn(n, m, |_, _| complex_gaussian(rng));
    let k = params.kappa_br;
    let (w_los, w_nlos) = if k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
    };
    let pl = (params.beta0 * bs_ris_distance.powf(-params.alpha_br)).sqrt();
    (los * C64::from(w_los) + scattering * C64::from(w_nlos)) * C64::from(pl)
}

/// `(1+j) zeta b(r)` for a given zeta.
pub fn near_channel_with_gain(
    receiver: &Vector3<f64>,
    array: &ArrayConfig,
    geometry: &SceneGeometry,
    zeta: f64,
) -> Result<CVec> {
    Ok(nearfield_steering(receiver, array, geometry)? * (C64::new(1.0, 1.0) * zeta))
}

/// Single-path LoS spherical-wave channel with random gain `(1+j) zeta`.
pub fn synthesize_near_channel<R: Rng + ?Sized>(
    receiver: &Vector3<f64>,
    array: &ArrayConfig,
    geometry: &SceneGeometry,
    params: &FadingParams,
    rng: &mut R,
) -> Result<CVec> {
    let zeta = params.draw_zeta(rng);
    near_channel_with_gain(receiver, array, geometry, zeta)
}

/// Planar-wave steering toward the receiver's angles, carrying the
/// propagation phase of the RIS center so that it is the large-radius limit
/// of [`nearfield_steering`]. The phase profile across the RIS depends only
/// on the angles.
pub fn farfield_steering(receiver: Polar, array: &ArrayConfig, geometry: &SceneGeometry) -> CVec {
    let target = geometry.position_of(receiver);
    let (az, el) = ris_angles(geometry, &target);
    let b = upa_response(az, el, array.ris_rows, array.ris_cols, array.spacing, array.wavelength);
    // Offset of element (0,0) from the center projected on the arrival direction.
    let u = (target - geometry.ris_center).normalize();
    let c1 = (array.ris_rows as f64 - 1.0) / 2.0;
    let c2 = (array.ris_cols as f64 - 1.0) / 2.0;
    let origin_shift = -(c1 * u.y + c2 * u.z) * array.spacing;
    let k = 2.0 * PI / array.wavelength;
    b * C64::from_polar(1.0, -k * receiver.radius + k * origin_shift)
}

pub fn far_field_baseline_channel<R: Rng + ?Sized>(
    receiver: Polar,
    array: &ArrayConfig,
    geometry: &SceneGeometry,
    params: &FadingParams,
    rng: &mut R,
) -> CVec {
    let zeta = params.draw_zeta(rng);
    farfield_steering(receiver, array, geometry) * (C64::new(1.0, 1.0) * zeta)
}

/// Realized channels for one Monte Carlo draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS→RIS, N×M.
    pub g: CMat,
    /// RIS→user.
    pub h: CVec,
    /// RIS→eavesdropper.
    pub f: CVec,
}

impl ChannelSet {
    pub fn new(g: CMat, h: CVec, f: CVec) -> Result<Self> {
        if h.len() != g.nrows() || f.len() != g.nrows() {
            return Err(Error::Dimension(format!(
                "G is {}x{} but h has {} and f has {} entries",
                g.nrows(),
                g.ncols(),
                h.len(),
                f.len()
            )));
        }
        let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
        if !(g.iter().all(finite) && h.iter().all(finite) && f.iter().all(finite)) {
            return Err(Error::Numerical("non-finite channel entry".into()));
        }
        Ok(Self { g, h, f })
    }

    pub fn ris_elements(&self) -> usize {
        self.g.nrows()
    }

    pub fn bs_antennas(&self) -> usize {
        self.g.ncols()
    }
}

/// Receiver channel model: exact spherical wave or planar-wave baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelModel {
    #[default]
    NearField,
    FarField,
}

/// Draws `G`, then `zeta_user`, then `zeta_eve`, in that fixed order so
/// that draws with the same seed share `G` and gains across geometries.
pub fn realize_channels<R: Rng + ?Sized>(
    array: &ArrayConfig,
    geometry: &SceneGeometry,
    fading: &FadingParams,
    model: ChannelModel,
    rng: &mut R,
) -> Result<ChannelSet> {
    array.validate()?;
    geometry.validate()?;
    fading.validate()?;
    let paths = FarFieldPathSet::line_of_sight(array, geometry);
    let g = synthesize_far_channel(fading, &paths, array, geometry.bs_ris_distance(), rng);
    let zeta_u = fading.draw_zeta(rng);
    let zeta_e = fading.draw_zeta(rng);
    let gain = C64::new(1.0, 1.0);
    let (h, f) = match model {
        ChannelModel::NearField => (
            near_channel_with_gain(&geometry.user_position(), array, geometry, zeta_u)?,
            near_channel_with_gain(&geometry.eve_position(), array, geometry, zeta_e)?,
        ),
        ChannelModel::FarField => (
            farfield_steering(geometry.user, array, geometry) * (gain * zeta_u),
            farfield_steering(geometry.eve, array, geometry) * (gain * zeta_e),
        ),
    };
    ChannelSet::new(g, h, f)
}
