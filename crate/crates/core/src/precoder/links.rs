//! Link-level model shared by the precoder and reflection-vector updates.
//!
//! Both subproblems see the four received amplitudes as linear forms
//! `z_k = alpha_k^H x` of a single complex variable `x`; everything here is
//! written against that abstraction.

use serde::{Deserialize, Serialize};

use crate::qcqp::{AffineConstraint, QuadraticConstraint};
use crate::secrecy::Links;
use crate::{inner, CMat, CVec, C64, J};

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;

/// How the eavesdropper rate enters the convex surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EveSurrogate {
    /// Weighted-MSE term with the `j` factor and jamming-only denominator.
    AsPrinted,
    /// Weighted-MSE term built from the textbook MMSE receiver.
    StandardMmse,
    /// Tangent bound on `ln(S + J + n)` plus a weighted-MSE lower bound on
    /// `ln(J + n)`; a true upper bound of the eavesdropper rate.
    #[default]
    Majorized,
}

/// Receive equalizers and MSE weights. For [`EveSurrogate::Majorized`] the
/// eavesdropper pair refers to the jamming link and `eve_total` holds the
/// tangent point `S + J + n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WmmseAux {
    pub u_u: C64,
    pub rho_u: f64,
    pub u_e: C64,
    pub rho_e: f64,
    pub eve_total: f64,
    /// Set when a weight had to be clamped.
    pub clamped: bool,
}

fn guard_rho(rho: f64, clamped: &mut bool) -> f64 {
    if rho.is_nan() || rho <= 0.0 {
        *clamped = true;
        RHO_MIN
    } else if rho.is_infinite() {
        *clamped = true;
        RHO_MAX
    } else {
        rho
    }
}

/// `|u|^2 (|z|^2 + n) - 2 Re{u^* z} + 1`.
pub fn mse_user(u: C64, z: C64, noise: f64) -> f64 {
    u.norm_sqr() * (z.norm_sqr() + noise) - 2.0 * (u.conj() * z).re + 1.0
}

/// Eavesdropper MSE with the rotated cross term.
pub fn mse_eve_printed(u: C64, z_e: C64, z_je: C64, noise: f64) -> f64 {
    u.norm_sqr() * (z_e.norm_sqr() + z_je.norm_sqr() + noise) - 2.0 * (J * u.conj() * z_e).re + 1.0
}

pub fn mse_eve_standard(u: C64, z_e: C64, z_je: C64, noise: f64) -> f64 {
    u.norm_sqr() * (z_e.norm_sqr() + z_je.norm_sqr() + noise) - 2.0 * (u.conj() * z_e).re + 1.0
}

/// Evaluates the surrogate `g_u + g_e` on given link amplitudes.
pub fn surrogate_from_links(l: &Links, aux: &WmmseAux, noise_user: f64, noise_eve: f64, variant: EveSurrogate) -> f64 {
    let g_u = aux.rho_u * mse_user(aux.u_u, l.user, noise_user) - aux.rho_u.ln();
    let g_e = match variant {
        EveSurrogate::AsPrinted => {
            aux.rho_e * mse_eve_printed(aux.u_e, l.eve, l.eve_jam, noise_eve) - aux.rho_e.ln()
        }
        EveSurrogate::StandardMmse => {
            aux.rho_e * mse_eve_standard(aux.u_e, l.eve, l.eve_jam, noise_eve) - aux.rho_e.ln()
        }
        EveSurrogate::Majorized => {
            let x = l.eve.norm_sqr() + l.eve_jam.norm_sqr() + noise_eve;
            let x0 = aux.eve_total;
            x0.ln() + x / x0 - 1.0 + aux.rho_e * mse_user(aux.u_e, l.eve_jam, noise_eve) - aux.rho_e.ln() - 1.0
                - noise_eve.ln()
        }
    };
    g_u + g_e
}

/// Closed-form auxiliaries for the given link amplitudes.
pub fn aux_from_links(l: &Links, noise_user: f64, noise_eve: f64, variant: EveSurrogate) -> WmmseAux {
    let mut clamped = false;
    let u_u = l.user / (l.user.norm_sqr() + noise_user);
    // 1 / (1 - u^* z) at the MMSE equalizer, without the cancellation
    let rho_u = guard_rho(1.0 + l.user.norm_sqr() / noise_user, &mut clamped);
    let (u_e, rho_e, eve_total) = match variant {
        EveSurrogate::AsPrinted => {
            let u_e = J * l.eve / (l.eve_jam.norm_sqr() + noise_eve);
            let rho = 1.0 / (1.0 - (u_e.conj() * J * l.eve).re);
            (u_e, guard_rho(rho, &mut clamped), 0.0)
        }
        EveSurrogate::StandardMmse => {
            let u_e = l.eve / (l.eve.norm_sqr() + l.eve_jam.norm_sqr() + noise_eve);
            let rho = 1.0 + l.eve.norm_sqr() / (l.eve_jam.norm_sqr() + noise_eve);
            (u_e, guard_rho(rho, &mut clamped), 0.0)
        }
        EveSurrogate::Majorized => {
            let y = l.eve_jam.norm_sqr() + noise_eve;
            let u_z = l.eve_jam / y;
            let rho = guard_rho(y / noise_eve, &mut clamped);
            (u_z, rho, l.eve.norm_sqr() + y)
        }
    };
    WmmseAux {
        u_u,
        rho_u,
        u_e,
        rho_e,
        eve_total,
        clamped,
    }
}

/// Linear forms `alpha_k` with per-receiver noise powers.
#[derive(Debug, Clone)]
pub struct LinkForms {
    pub user: CVec,
    pub user_jam: CVec,
    pub eve: CVec,
    pub eve_jam: CVec,
    pub noise_user: f64,
    pub noise_eve: f64,
}

fn outer(a: &CVec) -> CMat {
    a * a.adjoint()
}

impl LinkForms {
    pub fn dim(&self) -> usize {
        self.user.len()
    }

    pub fn links(&self, x: &CVec) -> Links {
        Links {
            user: inner(&self.user, x),
            user_jam: inner(&self.user_jam, x),
            eve: inner(&self.eve, x),
            eve_jam: inner(&self.eve_jam, x),
        }
    }

    /// `(R_u, R_e)` in nats.
    pub fn rates(&self, x: &CVec) -> (f64, f64) {
        let l = self.links(x);
        crate::secrecy::rates_from_powers(
            l.user.norm_sqr(),
            l.eve.norm_sqr(),
            l.eve_jam.norm_sqr(),
            self.noise_user,
            self.noise_eve,
        )
    }

    pub fn secrecy_nats(&self, x: &CVec) -> f64 {
        let (ru, re) = self.rates(x);
        ru - re
    }

    pub fn aux(&self, x: &CVec, variant: EveSurrogate) -> WmmseAux {
        aux_from_links(&self.links(x), self.noise_user, self.noise_eve, variant)
    }

    pub fn surrogate_value(&self, x: &CVec, aux: &WmmseAux, variant: EveSurrogate) -> f64 {
        surrogate_from_links(&self.links(x), aux, self.noise_user, self.noise_eve, variant)
    }

    /// Surrogate as `x^H Q x + Re{c^H x} + k` for fixed auxiliaries.
    pub fn surrogate_quadratic(&self, aux: &WmmseAux, variant: EveSurrogate) -> (CMat, CVec, f64) {
        let mut q = outer(&self.user) * C64::from(aux.rho_u * aux.u_u.norm_sqr());
        let mut c = &self.user * (-2.0 * aux.rho_u * aux.u_u);
        let mut k = aux.rho_u * (aux.u_u.norm_sqr() * self.noise_user + 1.0) - aux.rho_u.ln();
        match variant {
            EveSurrogate::AsPrinted | EveSurrogate::StandardMmse => {
                let w = C64::from(aux.rho_e * aux.u_e.norm_sqr());
                q += (outer(&self.eve) + outer(&self.eve_jam)) * w;
                let coef = if variant == EveSurrogate::AsPrinted {
                    2.0 * J * aux.rho_e * aux.u_e
                } else {
                    -2.0 * aux.rho_e * aux.u_e
                };
                c += &self.eve * coef;
                k += aux.rho_e * (aux.u_e.norm_sqr() * self.noise_eve + 1.0) - aux.rho_e.ln();
            }
            EveSurrogate::Majorized => {
                let x0 = aux.eve_total;
                q += (outer(&self.eve) + outer(&self.eve_jam)) * C64::from(1.0 / x0);
                q += outer(&self.eve_jam) * C64::from(aux.rho_e * aux.u_e.norm_sqr());
                c += &self.eve_jam * (-2.0 * aux.rho_e * aux.u_e);
                k += x0.ln() + self.noise_eve / x0 - 1.0 - self.noise_eve.ln();
                k += aux.rho_e * (aux.u_e.norm_sqr() * self.noise_eve + 1.0) - aux.rho_e.ln() - 1.0;
            }
        }
        (q, c, k)
    }

    /// `c` with `-(R_u - R_e)(x + d) ~ -(R_u - R_e)(x) + Re{c^H d}`.
    pub fn neg_secrecy_gradient(&self, x: &CVec) -> CVec {
        let l = self.links(x);
        let s_u = l.user.norm_sqr() / self.noise_user;
        let s_e = l.eve.norm_sqr() / self.noise_eve;
        let j_e = l.eve_jam.norm_sqr() / self.noise_eve;
        let mut g = &self.user * (-2.0 * l.user / (self.noise_user * (1.0 + s_u)));
        let tot = self.noise_eve * (1.0 + s_e + j_e);
        g += &self.eve * (2.0 * l.eve / tot);
        g += &self.eve_jam * (2.0 * l.eve_jam / tot - 2.0 * l.eve_jam / (self.noise_eve * (1.0 + j_e)));
        g
    }

    /// `|alpha_u^H x|^2 >= r_th n` linearized at `anchor`.
    pub fn qos_linearization(&self, anchor: &CVec, r_th: f64) -> AffineConstraint {
        let z = inner(&self.user, anchor);
        AffineConstraint {
            a: &self.user * (2.0 * z),
            b: r_th * self.noise_user + z.norm_sqr(),
        }
    }

    /// `|alpha_ju^H x|^2 >= |alpha_u^H x|^2` with the right side kept and the
    /// left side linearized at `anchor`.
    pub fn sic_linearization(&self, anchor: &CVec) -> QuadraticConstraint {
        let z = inner(&self.user_jam, anchor);
        QuadraticConstraint {
            p: outer(&self.user),
            a: &self.user_jam * (2.0 * z),
            b: -z.norm_sqr(),
        }
    }

    /// True QoS and SIC with relative tolerance.
    pub fn satisfies_qos_sic(&self, x: &CVec, r_th: f64, sic: bool, tol: f64) -> bool {
        let l = self.links(x);
        let s = l.user.norm_sqr();
        let qos = s / self.noise_user >= r_th * (1.0 - tol);
        let sic_ok = !sic || l.user_jam.norm_sqr() >= s * (1.0 - tol);
        qos && sic_ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rvec(n: usize, rng: &mut ChaCha8Rng) -> CVec {
        CVec::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn forms(n: usize, rng: &mut ChaCha8Rng) -> LinkForms {
        LinkForms {
            user: rvec(n, rng) * C64::from(3.0),
            user_jam: rvec(n, rng) * C64::from(3.0),
            eve: rvec(n, rng),
            eve_jam: rvec(n, rng),
            noise_user: 0.7,
            noise_eve: 1.3,
        }
    }

    const VARIANTS: [EveSurrogate; 3] = [EveSurrogate::AsPrinted, EveSurrogate::StandardMmse, EveSurrogate::Majorized];

    #[test]
    fn quadratic_assembly_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for v in VARIANTS {
            let f = forms(5, &mut rng);
            let x0 = rvec(5, &mut rng);
            let aux = f.aux(&x0, v);
            let (q, c, k) = f.surrogate_quadratic(&aux, v);
            for _ in 0..20 {
                let x = rvec(5, &mut rng);
                let direct = f.surrogate_value(&x, &aux, v);
                let quad = inner(&x, &(&q * &x)).re + inner(&c, &x).re + k;
                assert!((direct - quad).abs() < 1e-9 * (1.0 + direct.abs()), "{v:?}: {direct} vs {quad}");
            }
        }
    }

    #[test]
    fn majorized_surrogate_bounds_negative_secrecy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let f = forms(4, &mut rng);
            let x0 = rvec(4, &mut rng);
            let aux = f.aux(&x0, EveSurrogate::Majorized);
            let tight = f.surrogate_value(&x0, &aux, EveSurrogate::Majorized);
            assert!((tight - (1.0 - f.secrecy_nats(&x0))).abs() < 1e-10);
            for _ in 0..200 {
                let x = rvec(4, &mut rng) * C64::from(rng.random_range(0.0..3.0));
                let g = f.surrogate_value(&x, &aux, EveSurrogate::Majorized);
                assert!(g >= 1.0 - f.secrecy_nats(&x) - 1e-10);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = forms(3, &mut rng);
        let x = rvec(3, &mut rng);
        let g = f.neg_secrecy_gradient(&x);
        let h = 1e-6;
        for i in 0..3 {
            for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut d = CVec::zeros(3);
                d[i] = dir;
                let fp = -f.secrecy_nats(&(&x + &d * C64::from(h)));
                let fm = -f.secrecy_nats(&(&x - &d * C64::from(h)));
                let fd = (fp - fm) / (2.0 * h);
                assert!((fd - inner(&g, &d).re).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rho_guard_clamps() {
        let mut clamped = false;
        assert_eq!(guard_rho(-2.0, &mut clamped), RHO_MIN);
        assert!(clamped);
        let mut clamped = false;
        assert_eq!(guard_rho(f64::INFINITY, &mut clamped), RHO_MAX);
        let mut clamped = false;
        assert_eq!(guard_rho(3.0, &mut clamped), 3.0);
        assert!(!clamped);
    }
}
