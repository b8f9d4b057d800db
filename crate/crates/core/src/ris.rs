//! Reflection-vector design for fixed precoders by ADMM: a relaxed update
//! of `theta` (modulus free) through a convex surrogate, a projection onto the
//! unit circle or a phase alphabet, and a scaled dual step.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::geometry::ChannelSet;
use crate::precoder::{EveSurrogate, LinkForms};
use crate::qcqp::{self, Constraint, QcqpProblem, SolverSettings, SolverStatus};
use crate::secrecy::{NoiseAndLimits, Precoders, RisVector};
use crate::{CMat, CVec, Error, Result, C64};

/// Uniform `b`-bit phase alphabet `{-pi + k 2pi / 2^b}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseAlphabet {
    bits: u32,
}

impl PhaseAlphabet {
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits > 16 {
            return Err(Error::Config(format!("phase resolution must be 1..=16 bits, got {bits}")));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn size(&self) -> usize {
        1 << self.bits
    }

    pub fn step(&self) -> f64 {
        2.0 * PI / self.size() as f64
    }

    pub fn level(&self, k: usize) -> f64 {
        -PI + k as f64 * self.step()
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.size()).map(|k| self.level(k)).collect()
    }

    /// Index of the level closest to `target` on the unit circle; ties go
    /// to the smaller phase.
    pub fn nearest(&self, target: C64) -> usize {
        let l = self.size();
        if target.norm_sqr() == 0.0 {
            return 0;
        }
        let pos = (target.arg() + PI) / self.step();
        let k0 = (pos.floor() as isize).rem_euclid(l as isize) as usize;
        let k1 = (k0 + 1) % l;
        let score = |k: usize| (C64::from_polar(1.0, -self.level(k)) * target).re;
        let (s0, s1) = (score(k0), score(k1));
        let tie = (s1 - s0).abs() <= 1e-12 * target.norm();
        if (tie && k1 < k0) || (!tie && s1 > s0) {
            k1
        } else {
            k0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "bits")]
pub enum ProjectionMode {
    #[default]
    Continuous,
    Discrete(u32),
}

/// Convexification used in the relaxed `theta` step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaSurrogate {
    /// Weighted-MSE surrogate (same machinery as the precoder step).
    Wmmse,
    /// First-order model of the true secrecy rate; the penalty term alone
    /// supplies curvature.
    #[default]
    Linearized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub theta: CVec,
    pub theta_tilde: CVec,
    pub nu: CVec,
    pub mu: f64,
    pub iteration: usize,
}

impl AdmmState {
    pub fn new(theta_tilde: CVec, mu: f64) -> Self {
        let n = theta_tilde.len();
        Self {
            theta: theta_tilde.clone(),
            theta_tilde,
            nu: CVec::zeros(n),
            mu,
            iteration: 0,
        }
    }
}

/// Per-element products with `h^H w = theta^T a_u` for the reflection vector
/// `theta`; similarly for the jamming stream and the eavesdropper.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeCoefficients {
    pub a_u: CVec,
    pub a_jam_u: CVec,
    pub a_e: CVec,
    pub a_jam_e: CVec,
}

pub fn cascade_coefficients(channels: &ChannelSet, precoders: &Precoders) -> Result<CascadeCoefficients> {
    let m = channels.bs_antennas();
    if precoders.w.len() != m || precoders.w_jam.len() != m {
        return Err(Error::Dimension(format!(
            "precoders have {} entries, channel has {m} BS antennas",
            precoders.w.len()
        )));
    }
    let gw = &channels.g * &precoders.w;
    let gj = &channels.g * &precoders.w_jam;
    let n = channels.ris_elements();
    Ok(CascadeCoefficients {
        a_u: CVec::from_fn(n, |i, _| channels.h[i].conj() * gw[i]),
        a_jam_u: CVec::from_fn(n, |i, _| channels.h[i].conj() * gj[i]),
        a_e: CVec::from_fn(n, |i, _| channels.f[i].conj() * gw[i]),
        a_jam_e: CVec::from_fn(n, |i, _| channels.f[i].conj() * gj[i]),
    })
}

impl CascadeCoefficients {
    /// Link forms over `theta` with both noises normalized to one.
    pub fn forms(&self, limits: &NoiseAndLimits) -> LinkForms {
        let su = 1.0 / limits.noise_user.sqrt();
        let se = 1.0 / limits.noise_eve.sqrt();
        let f = |a: &CVec, s: f64| a.map(|v| v.conj() * s);
        LinkForms {
            user: f(&self.a_u, su),
            user_jam: f(&self.a_jam_u, su),
            eve: f(&self.a_e, se),
            eve_jam: f(&self.a_jam_e, se),
            noise_user: 1.0,
            noise_eve: 1.0,
        }
    }
}

/// Radial projection of `theta - nu` onto the unit circle. Entries already on
/// the circle pass through; zero maps to phase 0.
pub fn project_unit_modulus(theta: &CVec, nu: &CVec) -> CVec {
    CVec::from_fn(theta.len(), |i, _| {
        let t = theta[i] - nu[i];
        let r = t.norm();
        if r == 1.0 {
            t
        } else if r == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            t / r
        }
    })
}

/// Per-element nearest level of the alphabet to `theta - nu`.
pub fn discrete_line_search(theta: &CVec, nu: &CVec, alphabet: &PhaseAlphabet) -> CVec {
    CVec::from_fn(theta.len(), |i, _| {
        C64::from_polar(1.0, alphabet.level(alphabet.nearest(theta[i] - nu[i])))
    })
}

/// `nu + theta_tilde - theta`.
pub fn dual_update(nu: &CVec, theta: &CVec, theta_tilde: &CVec) -> CVec {
    nu - theta + theta_tilde
}

fn project(mode: ProjectionMode, theta: &CVec, nu: &CVec) -> Result<CVec> {
    Ok(match mode {
        ProjectionMode::Continuous => project_unit_modulus(theta, nu),
        ProjectionMode::Discrete(b) => discrete_line_search(theta, nu, &PhaseAlphabet::new(b)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct P3Settings {
    /// Primal residual tolerance, sup norm.
    pub tol_residual: f64,
    pub tol_bits: f64,
    pub max_iter: usize,
    /// Initial penalty, relative to the gradient scale at the start point.
    pub mu0: f64,
    /// The penalty never drops below `mu0 * mu_growth^m`, so residual
    /// balancing cannot undo convergence of the two copies.
    pub mu_growth: f64,
    pub theta_surrogate: ThetaSurrogate,
    pub eve_surrogate: EveSurrogate,
    /// With `false` the SIC constraint is dropped (no jamming stream).
    pub jamming: bool,
    #[serde(skip)]
    pub solver: SolverSettings,
}

impl Default for P3Settings {
    fn default() -> Self {
        Self {
            tol_residual: 1e-4,
            tol_bits: 1e-4,
            max_iter: 200,
            mu0: 1.0,
            mu_growth: 1.05,
            theta_surrogate: ThetaSurrogate::default(),
            eve_surrogate: EveSurrogate::default(),
            jamming: true,
            solver: SolverSettings::default(),
        }
    }
}

/// Relaxed `theta` step: minimizes the chosen surrogate of `-(R_u - R_e)`
/// (built at `state.theta_tilde`) plus `mu ||theta_tilde + nu - theta||^2`,
/// with QoS and SIC linearized at `anchor`. Returns `None` when the
/// linearized constraints admit no point.
pub fn theta_update(
    state: &AdmmState,
    forms: &LinkForms,
    anchor: &CVec,
    r_th: f64,
    settings: &P3Settings,
) -> Result<Option<CVec>> {
    let n = forms.dim();
    let center = &state.theta_tilde + &state.nu;
    let mu = state.mu;
    let (mut q, mut c, mut k) = match settings.theta_surrogate {
        ThetaSurrogate::Wmmse => {
            let aux = forms.aux(&state.theta_tilde, settings.eve_surrogate);
            forms.surrogate_quadratic(&aux, settings.eve_surrogate)
        }
        ThetaSurrogate::Linearized => {
            let g = forms.neg_secrecy_gradient(&state.theta_tilde);
            let k = -crate::inner(&g, &state.theta_tilde).re;
            (CMat::zeros(n, n), g, k)
        }
    };
    for i in 0..n {
        q[(i, i)] += mu;
    }
    c -= &center * C64::from(2.0 * mu);
    k += mu * crate::norm_sqr(&center);

    let mut problem = QcqpProblem::new(q, c, k);
    problem.push(Constraint::Affine(forms.qos_linearization(anchor, r_th)));
    if settings.jamming {
        problem.push(Constraint::Quadratic(forms.sic_linearization(anchor)));
    }
    let report = qcqp::solve(&problem, Some(anchor), &settings.solver)?;
    Ok(match report.status {
        SolverStatus::Infeasible => None,
        _ => Some(report.solution),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum P3Status {
    Converged,
    MaxIter,
    /// No iterate beat the initial point.
    NoImprovement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct P3Diagnostics {
    /// Unclamped secrecy rate (bits) of the projected iterate, per iteration.
    pub rates: Vec<f64>,
    /// `||theta - theta_tilde||_inf` per iteration.
    pub primal_residuals: Vec<f64>,
    /// Rate (bits) of the returned point.
    pub best_rate: f64,
    pub initial_rate: f64,
    pub iterations: usize,
    pub accepted: usize,
    pub infeasible_steps: usize,
    pub status: P3Status,
    pub final_mu: f64,
}

fn sup_norm(v: &CVec) -> f64 {
    v.iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// Best feasible point seen so far; it doubles as the linearization anchor.
struct Incumbent {
    v: CVec,
    rate: f64,
    valid: bool,
}

impl Incumbent {
    fn offer(&mut self, v: &CVec, rate: f64, feasible: bool) -> bool {
        if feasible && (!self.valid || rate >= self.rate) {
            self.v = v.clone();
            self.rate = rate;
            self.valid = true;
            return true;
        }
        false
    }
}

/// ADMM from `start`, feeding every projected iterate to `inc`.
fn run_admm(
    forms: &LinkForms,
    start: CVec,
    inc: &mut Incumbent,
    mode: ProjectionMode,
    settings: &P3Settings,
    r_th: f64,
    diag: &mut P3Diagnostics,
) -> Result<P3Status> {
    let n = forms.dim();
    let feasible = |t: &CVec| forms.satisfies_qos_sic(t, r_th, settings.jamming, 1e-9);
    let mut anchor = if inc.valid { inc.v.clone() } else { start.clone() };

    let g0 = forms.neg_secrecy_gradient(&start);
    let grad_scale = (crate::norm_sqr(&g0) / n as f64).sqrt();
    let mu_scale = if grad_scale > 0.0 && grad_scale.is_finite() {
        grad_scale
    } else {
        1.0
    };
    let mu_start = settings.mu0 * mu_scale;
    let mut state = AdmmState::new(start, mu_start);
    let mut prev_rate = forms.secrecy_nats(&state.theta_tilde);
    let mut status = P3Status::MaxIter;

    while state.iteration < settings.max_iter {
        state.iteration += 1;
        let theta = match theta_update(&state, forms, &anchor, r_th, settings)? {
            Some(t) => t,
            None => {
                diag.infeasible_steps += 1;
                state.mu *= 2.0;
                state.nu /= C64::from(2.0);
                &state.theta_tilde + &state.nu
            }
        };
        let tilde = project(mode, &theta, &state.nu)?;
        let nu = dual_update(&state.nu, &theta, &tilde);
        let r_primal = sup_norm(&(&theta - &tilde));
        let r_dual = state.mu * sup_norm(&(&tilde - &state.theta_tilde));
        state.theta = theta;
        state.theta_tilde = tilde;
        state.nu = nu;

        let rate = forms.secrecy_nats(&state.theta_tilde);
        diag.rates.push(rate / LN_2);
        diag.primal_residuals.push(r_primal);
        if inc.offer(&state.theta_tilde, rate, feasible(&state.theta_tilde)) {
            anchor = inc.v.clone();
            diag.accepted += 1;
        }

        if r_primal < settings.tol_residual && ((rate - prev_rate) / LN_2).abs() < settings.tol_bits {
            status = P3Status::Converged;
            break;
        }
        prev_rate = rate;

        // residual balancing; the scaled dual moves inversely with mu
        if r_primal > 10.0 * r_dual {
            state.mu *= 2.0;
            state.nu /= C64::from(2.0);
        } else if r_dual > 10.0 * r_primal {
            state.mu /= 2.0;
            state.nu *= C64::from(2.0);
        }
        let floor = mu_start * settings.mu_growth.powi(state.iteration as i32);
        if state.mu < floor {
            state.nu *= C64::from(state.mu / floor);
            state.mu = floor;
        }
    }
    diag.iterations += state.iteration;
    diag.final_mu = state.mu;
    Ok(status)
}

/// ADMM over the reflection vector. The returned vector is always on the
/// unit circle (or the alphabet) and never has a lower true secrecy rate
/// than `init`.
pub fn solve_p3(
    channels: &ChannelSet,
    precoders: &Precoders,
    limits: &NoiseAndLimits,
    init: &RisVector,
    mode: ProjectionMode,
    settings: &P3Settings,
) -> Result<(RisVector, P3Diagnostics)> {
    limits.validate()?;
    let n = channels.ris_elements();
    if init.len() != n {
        return Err(Error::Dimension(format!("init has {} entries, expected {n}", init.len())));
    }
    let forms = cascade_coefficients(channels, precoders)?.forms(limits);
    let r_th = limits.r_th;
    let feasible = |t: &CVec| forms.satisfies_qos_sic(t, r_th, settings.jamming, 1e-9);

    let init_v = init.v.clone();
    let init_rate = forms.secrecy_nats(&init_v);
    let mut inc = Incumbent {
        v: init_v.clone(),
        rate: init_rate,
        valid: feasible(&init_v),
    };
    let start = project(mode, &init_v, &CVec::zeros(n))?;
    inc.offer(&start, forms.secrecy_nats(&start), feasible(&start));

    let mut diag = P3Diagnostics {
        rates: Vec::new(),
        primal_residuals: Vec::new(),
        best_rate: inc.rate / LN_2,
        initial_rate: init_rate / LN_2,
        iterations: 0,
        accepted: 0,
        infeasible_steps: 0,
        status: P3Status::MaxIter,
        final_mu: 0.0,
    };
    let status = run_admm(&forms, start, &mut inc, mode, settings, r_th, &mut diag)?;

    diag.best_rate = inc.rate / LN_2;
    diag.status = if diag.accepted == 0 && status != P3Status::Converged {
        P3Status::NoImprovement
    } else {
        status
    };
    Ok((RisVector::new(inc.v), diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::complex_gaussian;
    use crate::inner;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rvec(n: usize, rng: &mut ChaCha8Rng) -> CVec {
        CVec::from_fn(n, |_, _| C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
    }

    fn random_channels(n: usize, m: usize, rng: &mut ChaCha8Rng) -> ChannelSet {
        let amp = 1e-4;
        ChannelSet::new(
            CMat::from_fn(n, m, |_, _| complex_gaussian(rng) * amp),
            CVec::from_fn(n, |_, _| complex_gaussian(rng) * 0.3),
            CVec::from_fn(n, |_, _| complex_gaussian(rng) * 0.2),
        )
        .unwrap()
    }

    #[test]
    fn coefficients_reproduce_cascade() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = random_channels(6, 3, &mut rng);
        let p = Precoders::new(rvec(3, &mut rng), rvec(3, &mut rng)).unwrap();
        let theta = RisVector::from_phases(&(0..6).map(|_| rng.random_range(-PI..PI)).collect::<Vec<_>>());
        let co = cascade_coefficients(&ch, &p).unwrap();
        let cas = crate::secrecy::cascade(&ch, &theta).unwrap();
        let l = cas.links(&p);
        let dot = |a: &CVec| theta.v.iter().zip(a.iter()).map(|(t, x)| t * x).sum::<C64>();
        assert!((dot(&co.a_u) - l.user).norm() <= 1e-12 * l.user.norm().max(1e-300));
        assert!((dot(&co.a_jam_u) - l.user_jam).norm() <= 1e-12 * l.user_jam.norm());
        assert!((dot(&co.a_e) - l.eve).norm() <= 1e-12 * l.eve.norm());
        assert!((dot(&co.a_jam_e) - l.eve_jam).norm() <= 1e-12 * l.eve_jam.norm());

        let z = Precoders::zeros(3);
        let co0 = cascade_coefficients(&ch, &z).unwrap();
        assert!(co0.a_u.iter().all(|v| *v == C64::new(0.0, 0.0)));
    }

    #[test]
    fn single_element_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ch = random_channels(1, 2, &mut rng);
        let p = Precoders::new(rvec(2, &mut rng), rvec(2, &mut rng)).unwrap();
        let co = cascade_coefficients(&ch, &p).unwrap();
        let gw = (&ch.g * &p.w)[0];
        assert_eq!(co.a_u[0], ch.h[0].conj() * gw);
    }

    #[test]
    fn projection_examples() {
        let t = CVec::from_vec(vec![C64::from_polar(2.0, PI / 3.0), C64::from_polar(1.0, 0.4), C64::new(0.0, 0.0)]);
        let p = project_unit_modulus(&t, &CVec::zeros(3));
        assert!((p[0] - C64::from_polar(1.0, PI / 3.0)).norm() < 1e-15);
        assert_eq!(p[1], t[1]);
        assert_eq!(p[2], C64::new(1.0, 0.0));
    }

    #[test]
    fn projection_matches_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = rvec(100, &mut rng);
        let p = project_unit_modulus(&t, &CVec::zeros(100));
        for i in 0..100 {
            let best = (0..4096)
                .map(|k| C64::from_polar(1.0, -PI + 2.0 * PI * k as f64 / 4096.0))
                .min_by(|a, b| (a - t[i]).norm().total_cmp(&(b - t[i]).norm()))
                .unwrap();
            // sampled argmin lies within half a grid step of the projection
            assert!((best - p[i]).norm() <= PI / 4096.0 + 1e-12);
            assert!((p[i] - t[i]).norm() <= (best - t[i]).norm() + 1e-12);
        }
    }

    #[test]
    fn line_search_examples() {
        let a = PhaseAlphabet::new(1).unwrap();
        assert_eq!(a.levels(), vec![-PI, 0.0]);
        let t = CVec::from_element(1, C64::new(0.9, 0.1));
        let out = discrete_line_search(&t, &CVec::zeros(1), &a);
        assert!((out[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        // exactly between -pi and 0 (on the imaginary axis): smaller phase
        let tie = CVec::from_element(1, C64::new(0.0, 1.0));
        let out = discrete_line_search(&tie, &CVec::zeros(1), &a);
        assert!((out[0].arg().abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn line_search_matches_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for b in 1..=3 {
            let a = PhaseAlphabet::new(b).unwrap();
            let t = rvec(1000, &mut rng);
            let out = discrete_line_search(&t, &CVec::zeros(1000), &a);
            for i in 0..1000 {
                let mut best_k = 0;
                for k in 1..a.size() {
                    let dk = (C64::from_polar(1.0, a.level(k)) - t[i]).norm_sqr();
                    let db = (C64::from_polar(1.0, a.level(best_k)) - t[i]).norm_sqr();
                    if dk < db {
                        best_k = k;
                    }
                }
                assert_eq!(out[i], C64::from_polar(1.0, a.level(best_k)));
            }
        }
    }

    #[test]
    fn fine_alphabet_approaches_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = PhaseAlphabet::new(12).unwrap();
        let t = rvec(200, &mut rng);
        let d = discrete_line_search(&t, &CVec::zeros(200), &a);
        let c = project_unit_modulus(&t, &CVec::zeros(200));
        for i in 0..200 {
            let err = (d[i] * c[i].conj()).arg().abs();
            assert!(err <= PI / 4096.0 + 1e-12);
        }
    }

    #[test]
    fn dual_update_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let nu = rvec(4, &mut rng);
        let th = rvec(4, &mut rng);
        assert_eq!(dual_update(&nu, &th, &th), nu);
        let tt = rvec(4, &mut rng);
        assert_eq!(dual_update(&CVec::zeros(4), &th, &tt), &tt - &th);
    }

    fn forms_for(n: usize, rng: &mut ChaCha8Rng) -> LinkForms {
        let ch = random_channels(n, 2, rng);
        let p = Precoders::new(rvec(2, rng) * C64::from(0.05), rvec(2, rng) * C64::from(0.05)).unwrap();
        cascade_coefficients(&ch, &p).unwrap().forms(&NoiseAndLimits::default())
    }

    #[test]
    fn huge_penalty_returns_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let forms = forms_for(4, &mut rng);
        let tt = RisVector::from_phases(&[0.1, 0.2, -0.3, 1.0]).v;
        let mut st = AdmmState::new(tt.clone(), 1e8);
        st.nu = rvec(4, &mut rng) * C64::from(1e-3);
        let settings = P3Settings {
            jamming: false,
            ..Default::default()
        };
        // constraints linearized with r_th = 0 so that they are inactive
        let out = theta_update(&st, &forms, &tt, 0.0, &settings).unwrap().unwrap();
        let center = &tt + &st.nu;
        assert!(sup_norm(&(&out - &center)) < 1e-6);
    }

    #[test]
    fn single_element_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let forms = forms_for(1, &mut rng);
        let tt = CVec::from_element(1, C64::from_polar(1.0, 0.7));
        let mut st = AdmmState::new(tt.clone(), 3.0);
        st.nu = CVec::from_element(1, C64::new(0.1, -0.05));
        for surrogate in [ThetaSurrogate::Linearized, ThetaSurrogate::Wmmse] {
            let settings = P3Settings {
                jamming: false,
                theta_surrogate: surrogate,
                ..Default::default()
            };
            let out = theta_update(&st, &forms, &tt, 0.0, &settings).unwrap().unwrap();
            // scalar minimizer of q|x|^2 + Re{c^* x}: x = -c / (2q)
            let center = tt[0] + st.nu[0];
            let (q, c) = match surrogate {
                ThetaSurrogate::Linearized => (st.mu, forms.neg_secrecy_gradient(&tt)[0]),
                ThetaSurrogate::Wmmse => {
                    let aux = forms.aux(&tt, settings.eve_surrogate);
                    let (qm, cv, _) = forms.surrogate_quadratic(&aux, settings.eve_surrogate);
                    (qm[(0, 0)].re + st.mu, cv[0])
                }
            };
            let expect = -(c - 2.0 * st.mu * center) / (2.0 * q);
            assert!((out[0] - expect).norm() <= 1e-6 * (1.0 + expect.norm()), "{surrogate:?}");
        }
    }

    #[test]
    fn p3_safeguard_and_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let limits = NoiseAndLimits::default();
        let mut tested = 0;
        for _ in 0..10 {
            let ch = random_channels(8, 2, &mut rng);
            let init = RisVector::ones(8);
            let cas = crate::secrecy::cascade(&ch, &init).unwrap();
            let Ok(p) = crate::precoder::default_init(&cas, &limits, true) else {
                continue;
            };
            tested += 1;
            let r0 = crate::secrecy::secrecy_nats(&cas, &p, &limits);
            for mode in [ProjectionMode::Continuous, ProjectionMode::Discrete(1), ProjectionMode::Discrete(3)] {
                let (v, d) = solve_p3(&ch, &p, &limits, &init, mode, &P3Settings::default()).unwrap();
                assert!(v.modulus_error() <= 1e-12);
                let cas2 = crate::secrecy::cascade(&ch, &v).unwrap();
                let r = crate::secrecy::secrecy_nats(&cas2, &p, &limits);
                assert!(r >= r0 - 1e-9, "{mode:?}: {r} < {r0}");
                assert!((d.best_rate - r / LN_2).abs() < 1e-9);
                if let ProjectionMode::Discrete(b) = mode {
                    let a = PhaseAlphabet::new(b).unwrap();
                    for z in v.v.iter() {
                        let k = a.nearest(*z);
                        assert!((z - C64::from_polar(1.0, a.level(k))).norm() < 1e-12);
                    }
                }
            }
        }
        assert!(tested > 3);
    }

    #[test]
    fn p3_primal_residual_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let limits = NoiseAndLimits::default();
        let ch = random_channels(16, 2, &mut rng);
        let init = RisVector::ones(16);
        let cas = crate::secrecy::cascade(&ch, &init).unwrap();
        let p = crate::precoder::default_init(&cas, &limits, true).unwrap();
        let (_, d) = solve_p3(&ch, &p, &limits, &init, ProjectionMode::Continuous, &P3Settings::default()).unwrap();
        assert!(d.primal_residuals.iter().any(|r| *r < 1e-3), "{:?}", d.primal_residuals);
    }

    proptest! {
        #[test]
        fn projection_is_elementwise(seed in 0u64..1000, shift in 0usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = rvec(7, &mut rng);
            let nu = rvec(7, &mut rng) * C64::from(0.1);
            let perm: Vec<usize> = (0..7).map(|i| (i + shift) % 7).collect();
            let tp = CVec::from_fn(7, |i, _| t[perm[i]]);
            let np = CVec::from_fn(7, |i, _| nu[perm[i]]);
            let a = PhaseAlphabet::new(2).unwrap();
            let p = project_unit_modulus(&t, &nu);
            let pp = project_unit_modulus(&tp, &np);
            let d = discrete_line_search(&t, &nu, &a);
            let dp = discrete_line_search(&tp, &np, &a);
            for i in 0..7 {
                prop_assert_eq!(pp[i], p[perm[i]]);
                prop_assert_eq!(dp[i], d[perm[i]]);
                prop_assert!((p[i].norm() - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn nearest_level_is_optimal(re in -3.0f64..3.0, im in -3.0f64..3.0, bits in 1u32..6) {
            let a = PhaseAlphabet::new(bits).unwrap();
            let t = C64::new(re, im);
            let k = a.nearest(t);
            let dk = (C64::from_polar(1.0, a.level(k)) - t).norm_sqr();
            for j in 0..a.size() {
                prop_assert!(dk <= (C64::from_polar(1.0, a.level(j)) - t).norm_sqr() + 1e-12);
            }
        }
    }

    #[test]
    fn inner_matches_transpose_product() {
        // theta^T a == (conj a)^H theta, the identity the link forms rely on
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = rvec(5, &mut rng);
        let t = rvec(5, &mut rng);
        let lhs: C64 = t.iter().zip(a.iter()).map(|(x, y)| x * y).sum();
        let rhs = inner(&a.map(|v| v.conj()), &t);
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
