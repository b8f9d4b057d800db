//! Transmit precoder and jamming vector design for a fixed reflection vector.
//!
//! Each outer iteration refreshes the weighted-MSE auxiliaries, linearizes
//! the QoS and SIC constraints at the current point and solves the resulting
//! convex QCQP. Accepted iterates never lower the true secrecy rate.
//!
//! Internally the variable is `x = [w; w_jam] / sqrt(P_max)` and every link
//! is divided by its receiver noise amplitude, so the power constraint is the
//! unit ball and both noises are one.

mod links;

pub use links::{
    aux_from_links, mse_eve_printed, mse_eve_standard, mse_user, surrogate_from_links, EveSurrogate, LinkForms,
    WmmseAux,
};

use serde::{Deserialize, Serialize};

use crate::geometry::ChannelSet;
use crate::qcqp::{self, AffineConstraint, Constraint, QcqpProblem, QuadraticConstraint, SolverSettings, SolverStatus};
use crate::secrecy::{cascade, CascadedChannels, NoiseAndLimits, Precoders, RisVector};
use crate::{norm_sqr, CVec, Error, Result, C64};

/// Previous-iterate anchors for the constraint linearizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaAnchor {
    pub w: CVec,
    pub w_jam: CVec,
}

impl From<&Precoders> for ScaAnchor {
    fn from(p: &Precoders) -> Self {
        Self {
            w: p.w.clone(),
            w_jam: p.w_jam.clone(),
        }
    }
}

fn stack(w: &CVec, w_jam: &CVec) -> CVec {
    let m = w.len();
    CVec::from_fn(2 * m, |i, _| if i < m { w[i] } else { w_jam[i - m] })
}

/// Physical-unit link forms over the stacked variable `[w; w_jam]`.
fn physical_forms(cascaded: &CascadedChannels, limits: &NoiseAndLimits) -> LinkForms {
    let m = cascaded.h_u.len();
    let z = CVec::zeros(m);
    LinkForms {
        user: stack(&cascaded.h_u, &z),
        user_jam: stack(&z, &cascaded.h_u),
        eve: stack(&cascaded.h_e, &z),
        eve_jam: stack(&z, &cascaded.h_e),
        noise_user: limits.noise_user,
        noise_eve: limits.noise_eve,
    }
}

/// `g_u + g_e` at the given precoders and auxiliaries.
pub fn surrogate_objective(
    precoders: &Precoders,
    aux: &WmmseAux,
    cascaded: &CascadedChannels,
    limits: &NoiseAndLimits,
    variant: EveSurrogate,
) -> f64 {
    let l = cascaded.links(precoders);
    surrogate_from_links(&l, aux, limits.noise_user, limits.noise_eve, variant)
}

/// Closed-form auxiliary update.
pub fn update_aux(
    precoders: &Precoders,
    cascaded: &CascadedChannels,
    limits: &NoiseAndLimits,
    variant: EveSurrogate,
) -> WmmseAux {
    aux_from_links(&cascaded.links(precoders), limits.noise_user, limits.noise_eve, variant)
}

/// Linearized QoS constraint over `[w; w_jam]`:
/// `2Re{w^^H h h^H w} - |h^H w^|^2 >= r_th sigma^2`.
pub fn linearize_qos(anchor: &ScaAnchor, cascaded: &CascadedChannels, limits: &NoiseAndLimits) -> AffineConstraint {
    physical_forms(cascaded, limits).qos_linearization(&stack(&anchor.w, &anchor.w_jam), limits.r_th)
}

/// Linearized SIC constraint over `[w; w_jam]`: affine in `w_jam`, convex
/// quadratic in `w`.
pub fn linearize_sic(anchor: &ScaAnchor, cascaded: &CascadedChannels) -> QuadraticConstraint {
    let limits = NoiseAndLimits::default();
    physical_forms(cascaded, &limits).sic_linearization(&stack(&anchor.w, &anchor.w_jam))
}

/// MRT information beam and a jamming beam along the part of `h_u`
/// orthogonal to `h_e`, with equal power. Generally violates SIC; see
/// [`default_init`].
pub fn equal_split_init(cascaded: &CascadedChannels, limits: &NoiseAndLimits) -> Precoders {
    let half = (limits.p_max / 2.0).sqrt();
    let w = unit(&cascaded.h_u) * C64::from(half);
    let d = orthogonal_part(&cascaded.h_u, &cascaded.h_e);
    let dir = if norm_sqr(&d) > 1e-12 * norm_sqr(&cascaded.h_u) {
        unit(&d)
    } else {
        unit(&cascaded.h_u)
    };
    Precoders {
        w,
        w_jam: dir * C64::from(half),
    }
}

fn unit(v: &CVec) -> CVec {
    let n = norm_sqr(v).sqrt();
    if n > 0.0 {
        v / C64::from(n)
    } else {
        CVec::zeros(v.len())
    }
}

fn orthogonal_part(v: &CVec, against: &CVec) -> CVec {
    let e = norm_sqr(against);
    if e == 0.0 {
        return v.clone();
    }
    v - against * (crate::inner(against, v) / e)
}

const SIC_MARGIN: f64 = 0.99;

/// Feasible starting precoders: MRT for the information beam and a jamming
/// beam that satisfies SIC with a small margin. Two jamming directions are
/// tried (orthogonal to the eavesdropper, and along `h_u`); the better
/// feasible one is returned.
pub fn default_init(cascaded: &CascadedChannels, limits: &NoiseAndLimits, jamming: bool) -> Result<Precoders> {
    let p = limits.p_max;
    let hu2 = norm_sqr(&cascaded.h_u);
    let mrt = unit(&cascaded.h_u);
    if hu2 == 0.0 {
        return Err(Error::Infeasible("user cascaded channel is zero".into()));
    }
    let forms = physical_forms(cascaded, limits);
    let feasible = |pc: &Precoders| forms.satisfies_qos_sic(&stack(&pc.w, &pc.w_jam), limits.r_th, jamming, 1e-12);
    if !jamming {
        let pc = Precoders {
            w: mrt * C64::from(p.sqrt()),
            w_jam: CVec::zeros(cascaded.h_u.len()),
        };
        return if feasible(&pc) {
            Ok(pc)
        } else {
            Err(Error::Infeasible("QoS unreachable at full power".into()))
        };
    }

    let mut candidates = Vec::new();
    let d = orthogonal_part(&cascaded.h_u, &cascaded.h_e);
    let d2 = norm_sqr(&d);
    if d2 > 1e-12 * hu2 {
        // |h_u^H w_jam|^2 = p_j d2, |h_u^H w|^2 = p_w hu2
        let c = SIC_MARGIN * d2 / hu2;
        let p_w = p * c / (1.0 + c);
        candidates.push(Precoders {
            w: &mrt * C64::from(p_w.sqrt()),
            w_jam: unit(&d) * C64::from((p - p_w).sqrt()),
        });
    }
    let p_w = p * SIC_MARGIN / (1.0 + SIC_MARGIN);
    candidates.push(Precoders {
        w: &mrt * C64::from(p_w.sqrt()),
        w_jam: &mrt * C64::from((p - p_w).sqrt()),
    });
    candidates
        .into_iter()
        .filter(|pc| feasible(pc))
        .map(|pc| {
            let r = crate::secrecy::secrecy_nats(cascaded, &pc, limits);
            (pc, r)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(pc, _)| pc)
        .ok_or_else(|| Error::Infeasible("QoS unreachable under SIC and power limits".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct P2Settings {
    /// Stop when the true secrecy rate improves by less than this (bits).
    pub tol_bits: f64,
    pub max_iter: usize,
    pub eve_surrogate: EveSurrogate,
    /// With `false`, `w_jam` is held at zero and SIC is dropped.
    pub jamming: bool,
    #[serde(skip)]
    pub solver: SolverSettings,
}

impl Default for P2Settings {
    fn default() -> Self {
        Self {
            tol_bits: 1e-4,
            max_iter: 50,
            eve_surrogate: EveSurrogate::default(),
            jamming: true,
            solver: SolverSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum P2Status {
    Converged,
    MaxIter,
    /// The convex step stopped producing acceptable points.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct P2Diagnostics {
    /// Unclamped secrecy rate (bits) at init and after each accepted step.
    pub rates: Vec<f64>,
    pub status: P2Status,
    pub restarts: usize,
    pub damped_steps: usize,
    pub solver_iterations: usize,
    pub rho_clamped: bool,
}

/// Normalized link forms for the precoder subproblem.
pub(crate) struct PrecoderScaling {
    pub forms: LinkForms,
    pub amplitude: f64,
    pub antennas: usize,
    pub jamming: bool,
}

impl PrecoderScaling {
    pub fn new(cascaded: &CascadedChannels, limits: &NoiseAndLimits, jamming: bool) -> Self {
        let m = cascaded.h_u.len();
        let amplitude = limits.p_max.sqrt();
        let su = C64::from(amplitude / limits.noise_user.sqrt());
        let se = C64::from(amplitude / limits.noise_eve.sqrt());
        let forms = if jamming {
            let z = CVec::zeros(m);
            LinkForms {
                user: stack(&cascaded.h_u, &z) * su,
                user_jam: stack(&z, &cascaded.h_u) * su,
                eve: stack(&cascaded.h_e, &z) * se,
                eve_jam: stack(&z, &cascaded.h_e) * se,
                noise_user: 1.0,
                noise_eve: 1.0,
            }
        } else {
            LinkForms {
                user: &cascaded.h_u * su,
                user_jam: CVec::zeros(m),
                eve: &cascaded.h_e * se,
                eve_jam: CVec::zeros(m),
                noise_user: 1.0,
                noise_eve: 1.0,
            }
        };
        Self {
            forms,
            amplitude,
            antennas: m,
            jamming,
        }
    }

    pub fn to_x(&self, p: &Precoders) -> CVec {
        let s = C64::from(1.0 / self.amplitude);
        if self.jamming {
            stack(&p.w, &p.w_jam) * s
        } else {
            &p.w * s
        }
    }

    pub fn to_precoders(&self, x: &CVec) -> Precoders {
        let m = self.antennas;
        let s = C64::from(self.amplitude);
        if self.jamming {
            Precoders {
                w: x.rows(0, m).into_owned() * s,
                w_jam: x.rows(m, m).into_owned() * s,
            }
        } else {
            Precoders {
                w: x * s,
                w_jam: CVec::zeros(m),
            }
        }
    }

    fn feasible(&self, x: &CVec, r_th: f64) -> bool {
        norm_sqr(x) <= 1.0 + 1e-9 && self.forms.satisfies_qos_sic(x, r_th, self.jamming, 1e-9)
    }
}

/// Solves the precoder subproblem for the reflection vector `ris`.
pub fn solve_p2(
    channels: &ChannelSet,
    ris: &RisVector,
    limits: &NoiseAndLimits,
    init: &Precoders,
    settings: &P2Settings,
) -> Result<(Precoders, P2Diagnostics)> {
    let cascaded = cascade(channels, ris)?;
    solve_p2_cascaded(&cascaded, limits, init, settings)
}

pub fn solve_p2_cascaded(
    cascaded: &CascadedChannels,
    limits: &NoiseAndLimits,
    init: &Precoders,
    settings: &P2Settings,
) -> Result<(Precoders, P2Diagnostics)> {
    limits.validate()?;
    let sc = PrecoderScaling::new(cascaded, limits, settings.jamming);
    let r_th = limits.r_th;
    let mut restarts = 0;

    let mut x = sc.to_x(init);
    if !init.is_finite() || !sc.feasible(&x, r_th) {
        x = sc.to_x(&default_init(cascaded, limits, settings.jamming)?);
        restarts += 1;
    }
    let mut rate = sc.forms.secrecy_nats(&x);
    let mut diag = P2Diagnostics {
        rates: vec![rate / std::f64::consts::LN_2],
        status: P2Status::MaxIter,
        restarts,
        damped_steps: 0,
        solver_iterations: 0,
        rho_clamped: false,
    };

    let mut it = 0;
    while it < settings.max_iter {
        it += 1;
        let aux = sc.forms.aux(&x, settings.eve_surrogate);
        diag.rho_clamped |= aux.clamped;
        let (q, c, k) = sc.forms.surrogate_quadratic(&aux, settings.eve_surrogate);
        let mut problem = QcqpProblem::new(q, c, k);
        problem.push(Constraint::Ball { radius_sq: 1.0 });
        problem.push(Constraint::Affine(sc.forms.qos_linearization(&x, r_th)));
        if settings.jamming {
            problem.push(Constraint::Quadratic(sc.forms.sic_linearization(&x)));
        }
        let report = qcqp::solve(&problem, Some(&x), &settings.solver)?;
        diag.solver_iterations += report.iterations;
        if report.status == SolverStatus::Infeasible {
            // degenerate anchor: restart once from the default point
            if diag.restarts < 2 {
                diag.restarts += 1;
                let x0 = sc.to_x(&default_init(cascaded, limits, settings.jamming)?);
                if sc.forms.secrecy_nats(&x0) >= rate {
                    rate = sc.forms.secrecy_nats(&x0);
                }
                x = x0;
                continue;
            }
            return Err(Error::Infeasible("precoder linearization infeasible after restart".into()));
        }

        // monotone guard: damp toward the current point until the true
        // objective does not drop
        let dir = &report.solution - &x;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand = &x + &dir * C64::from(step);
            if sc.feasible(&cand, r_th) {
                let r = sc.forms.secrecy_nats(&cand);
                if r >= rate {
                    accepted = Some((cand, r));
                    break;
                }
            }
            step *= 0.5;
            diag.damped_steps += 1;
        }
        let Some((x_new, r_new)) = accepted else {
            diag.status = P2Status::Stalled;
            break;
        };
        let gain_bits = (r_new - rate) / std::f64::consts::LN_2;
        x = x_new;
        rate = r_new;
        diag.rates.push(rate / std::f64::consts::LN_2);
        if gain_bits < settings.tol_bits {
            diag.status = P2Status::Converged;
            break;
        }
    }
    Ok((sc.to_precoders(&x), diag))
}
