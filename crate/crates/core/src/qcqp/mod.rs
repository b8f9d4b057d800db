//! Small dense convex QCQP solver over complex variables.
//!
//! Problems are written as
//!
//! ```text
//! min  x^H Q x + Re{c^H x} + k
//! s.t. Re{a^H x} >= b                  (affine)
//!      x^H P x <= Re{a^H x} + b        (convex quadratic)
//!      ||x||^2 <= r                    (ball)
//! ```
//!
//! and solved by a log-barrier interior-point method on the real embedding
//! `z = [Re x; Im x]`. A feasibility phase supplies a strictly feasible start
//! when the caller has none.

mod ipm;

use nalgebra::{DMatrix, DVector};

use crate::{CMat, CVec, Error, Result, C64};
use ipm::{Hessian, IpmParams, Quadratic, RealProblem};

/// `Re{a^H x} >= b`.
#[derive(Debug, Clone)]
pub struct AffineConstraint {
    pub a: CVec,
    pub b: f64,
}

/// `x^H P x <= Re{a^H x} + b`, `P` Hermitian PSD.
#[derive(Debug, Clone)]
pub struct QuadraticConstraint {
    pub p: CMat,
    pub a: CVec,
    pub b: f64,
}

#[derive(Debug, Clone)]
pub enum Constraint {
    Affine(AffineConstraint),
    Quadratic(QuadraticConstraint),
    Ball { radius_sq: f64 },
}

#[derive(Debug, Clone)]
pub struct QcqpProblem {
    pub q: CMat,
    pub c: CVec,
    pub constant: f64,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Tolerance on the (normalized) dual residual and duality gap.
    pub eps_kkt: f64,
    pub max_iter: usize,
    /// Reject non-PSD quadratic forms before solving.
    pub check_convexity: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps_kkt: 1e-7,
            max_iter: 100,
            check_convexity: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub solution: CVec,
    pub objective: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    /// Dual residual at exit, in normalized units.
    pub kkt_residual: f64,
    pub gap: f64,
}

impl QcqpProblem {
    pub fn new(q: CMat, c: CVec, constant: f64) -> Self {
        Self {
            q,
            c,
            constant,
            constraints: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn push(&mut self, c: Constraint) -> &mut Self {
        self.constraints.push(c);
        self
    }

    pub fn objective(&self, x: &CVec) -> f64 {
        let qx = &self.q * x;
        crate::inner(x, &qx).re + crate::inner(&self.c, x).re + self.constant
    }

    /// Constraint values in `g(x) <= 0` form, unnormalized.
    pub fn constraint_values(&self, x: &CVec) -> Vec<f64> {
        self.constraints.iter().map(|c| c.value(x)).collect()
    }

    /// Largest relative violation (0 when feasible).
    pub fn max_violation(&self, x: &CVec) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.value(x).max(0.0) / c.scale().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    pub fn validate(&self, check_convexity: bool) -> Result<()> {
        let n = self.dim();
        if self.q.nrows() != n || self.q.ncols() != n {
            return Err(Error::Dimension(format!(
                "objective matrix is {}x{}, expected {n}x{n}",
                self.q.nrows(),
                self.q.ncols()
            )));
        }
        if !self.constant.is_finite()
            || self.q.iter().chain(self.c.iter()).any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::Numerical("non-finite objective data".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            match c {
                Constraint::Affine(a) => {
                    if a.a.len() != n {
                        return Err(Error::Dimension(format!("constraint {i}: vector length {}", a.a.len())));
                    }
                }
                Constraint::Quadratic(qc) => {
                    if qc.a.len() != n || qc.p.nrows() != n || qc.p.ncols() != n {
                        return Err(Error::Dimension(format!("constraint {i}: shape mismatch")));
                    }
                    if check_convexity && !is_psd(&qc.p) {
                        return Err(Error::NotConvex(format!("constraint {i} matrix is not PSD")));
                    }
                }
                Constraint::Ball { radius_sq } => {
                    if !(*radius_sq >= 0.0) {
                        return Err(Error::Config(format!("constraint {i}: negative ball radius")));
                    }
                }
            }
        }
        if check_convexity && !is_psd(&self.q) {
            return Err(Error::NotConvex("objective matrix is not PSD".into()));
        }
        Ok(())
    }

    fn to_real(&self) -> RealProblem {
        let obj = Quadratic {
            hess: real_hessian(&self.q),
            grad: embed_vector(&self.c),
            constant: self.constant,
        };
        let s0 = obj.scale();
        let objective = if s0 > 0.0 { obj.scaled(1.0 / s0) } else { obj };
        let constraints = self
            .constraints
            .iter()
            .map(|c| {
                let q = c.to_real(self.dim());
                let s = q.scale();
                if s > 0.0 {
                    q.scaled(1.0 / s)
                } else {
                    q
                }
            })
            .collect();
        RealProblem {
            objective,
            constraints,
        }
    }
}

impl Constraint {
    pub fn value(&self, x: &CVec) -> f64 {
        match self {
            Constraint::Affine(a) => a.b - crate::inner(&a.a, x).re,
            Constraint::Quadratic(q) => {
                let px = &q.p * x;
                crate::inner(x, &px).re - crate::inner(&q.a, x).re - q.b
            }
            Constraint::Ball { radius_sq } => crate::norm_sqr(x) - radius_sq,
        }
    }

    fn scale(&self) -> f64 {
        match self {
            Constraint::Affine(a) => a.a.camax().max(a.b.abs()),
            Constraint::Quadratic(q) => q.p.camax().max(q.a.camax()).max(q.b.abs()),
            Constraint::Ball { radius_sq } => radius_sq.max(1.0),
        }
    }

    fn to_real(&self, n: usize) -> Quadratic {
        match self {
            Constraint::Affine(a) => Quadratic {
                hess: Hessian::Zero,
                grad: -embed_vector(&a.a),
                constant: a.b,
            },
            Constraint::Quadratic(q) => Quadratic {
                hess: Hessian::Dense(embed_matrix(&q.p) * 2.0),
                grad: -embed_vector(&q.a),
                constant: -q.b,
            },
            Constraint::Ball { radius_sq } => Quadratic {
                hess: Hessian::ScaledIdentity(2.0),
                grad: DVector::zeros(2 * n),
                constant: -radius_sq,
            },
        }
    }
}

/// Embedded `2Q`, kept compact for multiples of the identity.
fn real_hessian(q: &CMat) -> Hessian {
    if q.nrows() == 0 {
        return Hessian::Zero;
    }
    let d = q[(0, 0)];
    let is_scaled_identity = d.im == 0.0
        && q.iter().enumerate().all(|(k, v)| {
            let (i, j) = (k % q.nrows(), k / q.nrows());
            if i == j {
                *v == d
            } else {
                *v == C64::new(0.0, 0.0)
            }
        });
    match (is_scaled_identity, d.re == 0.0) {
        (true, true) => Hessian::Zero,
        (true, false) => Hessian::ScaledIdentity(2.0 * d.re),
        _ => Hessian::Dense(embed_matrix(q) * 2.0),
    }
}

/// `Q = A + jB -> [[A, -B], [B, A]]`, so `x^H Q x = z^T Qr z` for Hermitian Q.
pub(crate) fn embed_matrix(q: &CMat) -> DMatrix<f64> {
    let n = q.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let v = q[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    })
}

/// `Re{c^H x} = [Re c; Im c]^T z`.
pub(crate) fn embed_vector(c: &CVec) -> DVector<f64> {
    let n = c.len();
    DVector::from_fn(2 * n, |i, _| if i < n { c[i].re } else { c[i - n].im })
}

pub(crate) fn unembed(z: &DVector<f64>) -> CVec {
    let n = z.len() / 2;
    CVec::from_fn(n, |i, _| C64::new(z[i], z[i + n]))
}

fn is_psd(m: &CMat) -> bool {
    let r = embed_matrix(m);
    let r = (&r + r.transpose()) * 0.5;
    let tol = 1e-9 * r.amax().max(f64::MIN_POSITIVE);
    let mut shifted = r;
    for i in 0..shifted.nrows() {
        shifted[(i, i)] += tol;
    }
    shifted.cholesky().is_some()
}

/// Margin (normalized units) the feasibility phase aims for before handing
/// over to the main iterations.
const PHASE1_MARGIN: f64 = 1e-3;
const PHASE1_PROX: f64 = 1e-6;

fn strictly_feasible(real: &RealProblem, z: &DVector<f64>) -> bool {
    real.constraints.iter().all(|c| c.value(z) < 0.0)
}

fn phase_one(real: &RealProblem, z0: &DVector<f64>, settings: &SolverSettings) -> Option<DVector<f64>> {
    let n = real.dim();
    let worst = real
        .constraints
        .iter()
        .map(|c| c.value(z0))
        .fold(f64::NEG_INFINITY, f64::max);
    if worst < -PHASE1_MARGIN {
        return Some(z0.clone());
    }
    // min s + prox*||z - z0||^2  s.t. f_i(z) <= s, s >= -1
    let mut grad = DVector::zeros(n + 1);
    grad[n] = 1.0;
    let mut h = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        h[(i, i)] = 2.0 * PHASE1_PROX;
        grad[i] = -2.0 * PHASE1_PROX * z0[i];
    }
    let objective = Quadratic {
        hess: Hessian::Dense(h),
        grad,
        constant: PHASE1_PROX * z0.norm_squared(),
    };
    let mut constraints: Vec<Quadratic> = real
        .constraints
        .iter()
        .map(|c| {
            let mut l = c.lifted();
            l.grad[n] = -1.0;
            l
        })
        .collect();
    let mut floor = DVector::zeros(n + 1);
    floor[n] = -1.0;
    constraints.push(Quadratic {
        hess: Hessian::Zero,
        grad: floor,
        constant: -1.0,
    });
    let aux = RealProblem {
        objective,
        constraints,
    };
    let mut y0 = DVector::zeros(n + 1);
    y0.rows_mut(0, n).copy_from(z0);
    y0[n] = worst.max(0.0) + 1.0;
    let stop = |y: &DVector<f64>| {
        let z = y.rows(0, n).into_owned();
        real.constraints.iter().all(|c| c.value(&z) < -PHASE1_MARGIN)
    };
    let out = aux.solve_from(
        y0,
        IpmParams {
            eps: settings.eps_kkt * 1e-2,
            max_iter: settings.max_iter.max(50),
        },
        Some(&stop),
    );
    let z = out.z.rows(0, n).into_owned();
    strictly_feasible(real, &z).then_some(z)
}

/// Finds a strictly feasible point, or `None` if the feasible set appears
/// empty (or has no interior).
pub fn feasibility_phase(problem: &QcqpProblem, start: Option<&CVec>, settings: &SolverSettings) -> Result<Option<CVec>> {
    problem.validate(settings.check_convexity)?;
    let real = problem.to_real();
    let z0 = start.map(embed_vector).unwrap_or_else(|| DVector::zeros(2 * problem.dim()));
    Ok(phase_one(&real, &z0, settings).map(|z| unembed(&z)))
}

/// Solves the problem. Infeasibility is reported through `status`; errors
/// are reserved for malformed or nonconvex input.
pub fn solve(problem: &QcqpProblem, start: Option<&CVec>, settings: &SolverSettings) -> Result<SolverReport> {
    problem.validate(settings.check_convexity)?;
    let n = problem.dim();
    let real = problem.to_real();
    let params = IpmParams {
        eps: settings.eps_kkt,
        max_iter: settings.max_iter,
    };

    if real.constraints.is_empty() {
        return solve_unconstrained(problem, &real);
    }

    // Interior unconstrained minimizer: optimal with zero multipliers.
    let mut h0 = DMatrix::zeros(2 * n, 2 * n);
    real.objective.add_hessian_to(&mut h0, 1.0);
    if let Some(ch) = h0.clone().cholesky() {
        let z = ch.solve(&(-&real.objective.grad));
        if z.iter().all(|v| v.is_finite()) && strictly_feasible(&real, &z) {
            let x = unembed(&z);
            return Ok(SolverReport {
                objective: problem.objective(&x),
                solution: x,
                status: SolverStatus::Optimal,
                iterations: 0,
                kkt_residual: real.objective.gradient(&z).amax(),
                gap: 0.0,
            });
        }
    }

    let z0 = start.map(embed_vector).unwrap_or_else(|| DVector::zeros(2 * n));
    let z_start = if strictly_feasible(&real, &z0)
        && real.constraints.iter().all(|c| c.value(&z0) < -1e-9)
    {
        z0
    } else {
        match phase_one(&real, &z0, settings) {
            Some(z) => z,
            None => {
                let x = unembed(&z0);
                return Ok(SolverReport {
                    objective: problem.objective(&x),
                    solution: x,
                    status: SolverStatus::Infeasible,
                    iterations: 0,
                    kkt_residual: f64::INFINITY,
                    gap: f64::INFINITY,
                });
            }
        }
    };
    let out = real.solve_from(z_start, params, None);
    let x = unembed(&out.z);
    Ok(SolverReport {
        objective: problem.objective(&x),
        solution: x,
        status: if out.converged {
            SolverStatus::Optimal
        } else {
            SolverStatus::MaxIter
        },
        iterations: out.iterations,
        kkt_residual: out.dual_residual,
        gap: out.gap,
    })
}

fn solve_unconstrained(problem: &QcqpProblem, real: &RealProblem) -> Result<SolverReport> {
    let n = problem.dim();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    real.objective.add_hessian_to(&mut h, 1.0);
    let rhs = -&real.objective.grad;
    let z = h
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::Numerical(e.to_string()))?
        * &rhs;
    let resid = real.objective.gradient(&z).amax();
    if resid > 1e-6 {
        return Err(Error::Numerical("objective is unbounded below".into()));
    }
    let x = unembed(&z);
    Ok(SolverReport {
        objective: problem.objective(&x),
        solution: x,
        status: SolverStatus::Optimal,
        iterations: 0,
        kkt_residual: resid,
        gap: 0.0,
    })
}
