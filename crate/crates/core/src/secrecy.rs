//! Cascaded channels, achievable rates and the constraint set of the joint
//! design problem.
//!
//! Rates are reported in bits/s/Hz. Optimizers work in nats on the
//! unclamped difference `R_u - R_e`; the `[.]^+` clamp is only applied when
//! reporting.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::geometry::ChannelSet;
use crate::{inner, norm_sqr, CVec, Error, Result, C64};

/// Information beamformer `w` and jamming beamformer `w_jam`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoders {
    pub w: CVec,
    pub w_jam: CVec,
}

impl Precoders {
    pub fn new(w: CVec, w_jam: CVec) -> Result<Self> {
        if w.len() != w_jam.len() {
            return Err(Error::Dimension(format!(
                "w has {} entries, w_jam has {}",
                w.len(),
                w_jam.len()
            )));
        }
        Ok(Self { w, w_jam })
    }

    pub fn zeros(antennas: usize) -> Self {
        Self {
            w: CVec::zeros(antennas),
            w_jam: CVec::zeros(antennas),
        }
    }

    pub fn total_power(&self) -> f64 {
        norm_sqr(&self.w) + norm_sqr(&self.w_jam)
    }

    pub fn is_finite(&self) -> bool {
        self.w
            .iter()
            .chain(self.w_jam.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Diagonal of the RIS reflection matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RisVector {
    pub v: CVec,
}

impl RisVector {
    pub fn new(v: CVec) -> Self {
        Self { v }
    }

    /// All-zero phases.
    pub fn ones(n: usize) -> Self {
        Self {
            v: CVec::from_element(n, C64::new(1.0, 0.0)),
        }
    }

    pub fn from_phases(phases: &[f64]) -> Self {
        Self {
            v: CVec::from_iterator(phases.len(), phases.iter().map(|&p| C64::from_polar(1.0, p))),
        }
    }

    pub fn phases(&self) -> Vec<f64> {
        self.v.iter().map(|z| z.arg()).collect()
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// `max_n | |v_n| - 1 |`.
    pub fn modulus_error(&self) -> f64 {
        self.v.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Noise powers, transmit budget and QoS threshold, all linear (watts / ratio).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseAndLimits {
    pub noise_user: f64,
    pub noise_eve: f64,
    pub p_max: f64,
    pub r_th: f64,
}

impl Default for NoiseAndLimits {
    fn default() -> Self {
        Self {
            noise_user: dbm_to_watts(-80.0),
            noise_eve: dbm_to_watts(-80.0),
            p_max: dbm_to_watts(10.0),
            r_th: 1.0,
        }
    }
}

impl NoiseAndLimits {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.noise_user, self.noise_eve, self.p_max, self.r_th]
            .iter()
            .all(|x| x.is_finite() && *x > 0.0);
        if !ok {
            return Err(Error::Config(format!("noise, power and QoS limits must be positive: {self:?}")));
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Effective BS→receiver channels for a fixed reflection vector, stored so
/// that `h_u^H w` is the user's received amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedChannels {
    pub h_u: CVec,
    pub h_e: CVec,
}

impl CascadedChannels {
    /// Received amplitudes `(h_u^H w, h_u^H w_jam, h_e^H w, h_e^H w_jam)`.
    pub fn links(&self, p: &Precoders) -> Links {
        Links {
            user: inner(&self.h_u, &p.w),
            user_jam: inner(&self.h_u, &p.w_jam),
            eve: inner(&self.h_e, &p.w),
            eve_jam: inner(&self.h_e, &p.w_jam),
        }
    }
}

/// Scalar received amplitudes of the information and jamming streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Links {
    pub user: C64,
    pub user_jam: C64,
    pub eve: C64,
    pub eve_jam: C64,
}

/// `h_u^H = h^H diag(v) G`, `h_e^H = f^H diag(v) G`.
pub fn cascade(channels: &ChannelSet, ris: &RisVector) -> Result<CascadedChannels> {
    let n = channels.ris_elements();
    if ris.len() != n {
        return Err(Error::Dimension(format!(
            "reflection vector has {} entries, channel has {n} RIS elements",
            ris.len()
        )));
    }
    let m = channels.bs_antennas();
    let mut h_u = CVec::zeros(m);
    let mut h_e = CVec::zeros(m);
    for (i, row) in channels.g.row_iter().enumerate() {
        let cu = channels.h[i].conj() * ris.v[i];
        let ce = channels.f[i].conj() * ris.v[i];
        for (k, gk) in row.iter().enumerate() {
            h_u[k] += cu * gk;
            h_e[k] += ce * gk;
        }
    }
    // Stored as columns: h_u = (h^H diag(v) G)^H.
    h_u.iter_mut().for_each(|z| *z = z.conj());
    h_e.iter_mut().for_each(|z| *z = z.conj());
    Ok(CascadedChannels { h_u, h_e })
}

/// `|h_u^H w|^2 / sigma^2`. Jamming is removed by SIC at the user.
pub fn sinr_user(cascaded: &CascadedChannels, precoders: &Precoders, limits: &NoiseAndLimits) -> f64 {
    inner(&cascaded.h_u, &precoders.w).norm_sqr() / limits.noise_user
}

/// Rates in bits/s/Hz; `secrecy` is clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub user: f64,
    pub eve: f64,
    pub secrecy: f64,
}

/// User and eavesdropper rates in nats from received link powers.
pub fn rates_from_powers(
    user_signal: f64,
    eve_signal: f64,
    eve_jam: f64,
    noise_user: f64,
    noise_eve: f64,
) -> (f64, f64) {
    let ru = (user_signal / noise_user).ln_1p();
    let re = (eve_signal / (eve_jam + noise_eve)).ln_1p();
    (ru, re)
}

/// Unclamped `R_u - R_e` in nats; the quantity the optimizers ascend.
pub fn secrecy_nats(cascaded: &CascadedChannels, precoders: &Precoders, limits: &NoiseAndLimits) -> f64 {
    let l = cascaded.links(precoders);
    let (ru, re) = rates_from_powers(
        l.user.norm_sqr(),
        l.eve.norm_sqr(),
        l.eve_jam.norm_sqr(),
        limits.noise_user,
        limits.noise_eve,
    );
    ru - re
}

pub fn rates_and_secrecy(cascaded: &CascadedChannels, precoders: &Precoders, limits: &NoiseAndLimits) -> Rates {
    let l = cascaded.links(precoders);
    let (ru, re) = rates_from_powers(
        l.user.norm_sqr(),
        l.eve.norm_sqr(),
        l.eve_jam.norm_sqr(),
        limits.noise_user,
        limits.noise_eve,
    );
    let user = ru / LN_2;
    let eve = re / LN_2;
    Rates {
        user,
        eve,
        secrecy: (user - eve).max(0.0),
    }
}

/// Outcome of one constraint check. `slack` is the relative margin: positive
/// when the constraint holds strictly, negative by the size of the violation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintCheck {
    pub satisfied: bool,
    pub slack: f64,
}

impl ConstraintCheck {
    fn from_slack(slack: f64, tol: f64) -> Self {
        Self {
            satisfied: slack >= -tol,
            slack,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport {
    pub power: ConstraintCheck,
    pub qos: ConstraintCheck,
    pub sic: ConstraintCheck,
    pub unit_modulus: ConstraintCheck,
}

impl ConstraintReport {
    pub fn all_satisfied(&self) -> bool {
        self.power.satisfied && self.qos.satisfied && self.sic.satisfied && self.unit_modulus.satisfied
    }

    /// Constraints that only involve the transmit side (power, QoS, SIC).
    pub fn precoder_feasible(&self) -> bool {
        self.power.satisfied && self.qos.satisfied && self.sic.satisfied
    }
}

/// Checks power, QoS, SIC and unit modulus with a relative tolerance.
pub fn check_constraints(
    cascaded: &CascadedChannels,
    precoders: &Precoders,
    ris: &RisVector,
    limits: &NoiseAndLimits,
    tol: f64,
) -> ConstraintReport {
    let p = precoders.total_power();
    let power = ConstraintCheck::from_slack((limits.p_max - p) / limits.p_max, tol);

    let sinr = sinr_user(cascaded, precoders, limits);
    let qos = ConstraintCheck::from_slack((sinr - limits.r_th) / limits.r_th, tol);

    let l = cascaded.links(precoders);
    let (s, j) = (l.user.norm_sqr(), l.user_jam.norm_sqr());
    let scale = s.max(j);
    let sic_slack = if scale > 0.0 { (j - s) / scale } else { 0.0 };
    let sic = ConstraintCheck::from_slack(sic_slack, tol);

    let modulus = ris.modulus_error();
    let unit_modulus = ConstraintCheck::from_slack(-modulus, tol.max(1e-12));

    ConstraintReport {
        power,
        qos,
        sic,
        unit_modulus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::CMat;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> CVec {
        CVec::from_fn(n, |_, _| crate::geometry::complex_gaussian(rng))
    }

    fn random_channels(n: usize, m: usize, seed: u64) -> ChannelSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMat::from_fn(n, m, |_, _| crate::geometry::complex_gaussian(&mut rng));
        ChannelSet::new(g, random_vec(n, &mut rng), random_vec(n, &mut rng)).unwrap()
    }

    fn unit_limits() -> NoiseAndLimits {
        NoiseAndLimits {
            noise_user: 1.0,
            noise_eve: 1.0,
            p_max: 1.0,
            r_th: 1.0,
        }
    }

    #[test]
    fn cascade_picks_row_of_g() {
        let mut g = CMat::zeros(3, 2);
        g[(0, 0)] = C64::new(1.0, 2.0);
        g[(0, 1)] = C64::new(-0.5, 0.25);
        g[(1, 1)] = C64::new(3.0, 0.0);
        let mut h = CVec::zeros(3);
        h[0] = C64::new(0.0, 2.0);
        let ch = ChannelSet::new(g.clone(), h.clone(), h.clone()).unwrap();
        let c = cascade(&ch, &RisVector::ones(3)).unwrap();
        for k in 0..2 {
            let want = h[0].conj() * g[(0, k)];
            assert!((c.h_u[k].conj() - want).norm() < 1e-15);
        }
    }

    #[test]
    fn cascade_linear_in_reflection_vector() {
        let ch = random_channels(8, 4, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let v = random_vec(8, &mut rng);
        let w = random_vec(4, &mut rng);
        let c = cascade(&ch, &RisVector::new(v.clone())).unwrap();
        // h^H diag(v) G w evaluated directly.
        let direct: C64 = (0..8)
            .map(|n| ch.h[n].conj() * v[n] * (0..4).map(|m| ch.g[(n, m)] * w[m]).sum::<C64>())
            .sum();
        // v^T (diag(h^*) G w).
        let gw = &ch.g * &w;
        let linear: C64 = (0..8).map(|n| v[n] * ch.h[n].conj() * gw[n]).sum();
        assert!((inner(&c.h_u, &w) - direct).norm() < 1e-12);
        assert!((linear - direct).norm() < 1e-12);
    }

    #[test]
    fn cascade_dimension_mismatch() {
        let ch = random_channels(8, 4, 1);
        assert!(matches!(cascade(&ch, &RisVector::ones(7)), Err(Error::Dimension(_))));
    }

    #[test]
    fn sinr_examples() {
        let c = CascadedChannels {
            h_u: CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
            h_e: CVec::zeros(2),
        };
        let lim = NoiseAndLimits {
            noise_user: 0.25,
            ..unit_limits()
        };
        let orth = Precoders::new(
            CVec::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
            CVec::zeros(2),
        )
        .unwrap();
        assert_eq!(sinr_user(&c, &orth, &lim), 0.0);
        let unit = Precoders::new(
            CVec::from_vec(vec![C64::new(0.0, 0.5), C64::new(3.0, 0.0)]),
            CVec::zeros(2),
        )
        .unwrap();
        assert_relative_eq!(sinr_user(&c, &unit, &lim), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn rates_match_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = CascadedChannels {
            h_u: random_vec(4, &mut rng),
            h_e: random_vec(4, &mut rng),
        };
        let p = Precoders::new(random_vec(4, &mut rng), random_vec(4, &mut rng)).unwrap();
        let lim = NoiseAndLimits {
            noise_user: 0.3,
            noise_eve: 0.7,
            ..unit_limits()
        };
        let r = rates_and_secrecy(&c, &p, &lim);
        let su: C64 = (0..4).map(|i| c.h_u[i].conj() * p.w[i]).sum();
        let se: C64 = (0..4).map(|i| c.h_e[i].conj() * p.w[i]).sum();
        let je: C64 = (0..4).map(|i| c.h_e[i].conj() * p.w_jam[i]).sum();
        let ru = (1.0 + su.norm_sqr() / 0.3).log2();
        let re = (1.0 + se.norm_sqr() / (je.norm_sqr() + 0.7)).log2();
        assert!((r.user - ru).abs() < 1e-12);
        assert!((r.eve - re).abs() < 1e-12);
        assert!((r.secrecy - (ru - re).max(0.0)).abs() < 1e-12);
        // nats route agrees with the log2 route
        assert!((secrecy_nats(&c, &p, &lim) / LN_2 - (ru - re)).abs() < 1e-12);
    }

    #[test]
    fn secrecy_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h_u = random_vec(3, &mut rng);
        let p = Precoders::new(random_vec(3, &mut rng), CVec::zeros(3)).unwrap();
        let no_eve = CascadedChannels {
            h_u: h_u.clone(),
            h_e: CVec::zeros(3),
        };
        let r = rates_and_secrecy(&no_eve, &p, &unit_limits());
        assert_eq!(r.secrecy, r.user);
        let twin = CascadedChannels {
            h_u: h_u.clone(),
            h_e: h_u,
        };
        assert_eq!(rates_and_secrecy(&twin, &p, &unit_limits()).secrecy, 0.0);
    }

    #[test]
    fn constraint_boundaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = CascadedChannels {
            h_u: random_vec(3, &mut rng),
            h_e: random_vec(3, &mut rng),
        };
        let w = random_vec(3, &mut rng);
        let same = Precoders::new(w.clone(), w.clone()).unwrap();
        let ris = RisVector::ones(4);
        let rep = check_constraints(&c, &same, &ris, &unit_limits(), 0.0);
        assert!(rep.sic.satisfied);
        assert_eq!(rep.sic.slack, 0.0);

        let tol = 1e-3;
        let p = same.total_power();
        let lim = NoiseAndLimits {
            p_max: p / (1.0 + tol / 2.0),
            ..unit_limits()
        };
        assert!(!check_constraints(&c, &same, &ris, &lim, 0.0).power.satisfied);
        assert!(check_constraints(&c, &same, &ris, &lim, tol).power.satisfied);

        let bent = RisVector::new(CVec::from_element(4, C64::new(1.1, 0.0)));
        assert!(!check_constraints(&c, &same, &bent, &lim, tol).unit_modulus.satisfied);
    }

    proptest! {
        #[test]
        fn secrecy_invariant_to_common_phase(seed in 0u64..500, phase in -3.0f64..3.0) {
            let ch = random_channels(6, 3, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
            let v = RisVector::from_phases(&(0..6).map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0)).collect::<Vec<_>>());
            let p = Precoders::new(random_vec(3, &mut rng), random_vec(3, &mut rng)).unwrap();
            let rot = RisVector::new(v.v.map(|z| z * C64::from_polar(1.0, phase)));
            let a = cascade(&ch, &v).unwrap();
            let b = cascade(&ch, &rot).unwrap();
            let (za, zb) = (inner(&a.h_u, &p.w), inner(&b.h_u, &p.w));
            prop_assert!((zb - za * C64::from_polar(1.0, phase)).norm() <= 1e-10 * (1.0 + za.norm()));
            let ra = rates_and_secrecy(&a, &p, &unit_limits());
            let rb = rates_and_secrecy(&b, &p, &unit_limits());
            prop_assert!((ra.secrecy - rb.secrecy).abs() < 1e-9);
            prop_assert!(ra.secrecy >= 0.0);
        }

        #[test]
        fn rates_are_monotone(s in 0.0f64..100.0, ds in 0.0f64..10.0, e in 0.0f64..50.0, j in 0.0f64..50.0, dj in 0.0f64..10.0) {
            let (ru0, _) = rates_from_powers(s, e, j, 1.0, 1.0);
            let (ru1, _) = rates_from_powers(s + ds, e, j, 1.0, 1.0);
            prop_assert!(ru1 >= ru0);
            let (_, re0) = rates_from_powers(s, e, j, 1.0, 1.0);
            let (_, re1) = rates_from_powers(s, e, j + dj, 1.0, 1.0);
            prop_assert!(re1 <= re0);
        }
    }
}
