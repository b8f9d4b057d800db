//! Log-barrier interior-point iterations for convex quadratically
//! constrained problems on real variables.

use nalgebra::{DMatrix, DVector};

/// Hessian of a quadratic function, stored compactly when possible.
#[derive(Debug, Clone)]
pub(crate) enum Hessian {
    Zero,
    ScaledIdentity(f64),
    Dense(DMatrix<f64>),
}

/// `f(z) = 1/2 z^T H z + g^T z + k`.
#[derive(Debug, Clone)]
pub(crate) struct Quadratic {
    pub hess: Hessian,
    pub grad: DVector<f64>,
    pub constant: f64,
}

impl Quadratic {
    pub fn value(&self, z: &DVector<f64>) -> f64 {
        let quad = match &self.hess {
            Hessian::Zero => 0.0,
            Hessian::ScaledIdentity(s) => 0.5 * s * z.norm_squared(),
            Hessian::Dense(h) => 0.5 * z.dot(&(h * z)),
        };
        quad + self.grad.dot(z) + self.constant
    }

    pub fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        match &self.hess {
            Hessian::Zero => self.grad.clone(),
            Hessian::ScaledIdentity(s) => z * *s + &self.grad,
            Hessian::Dense(h) => h * z + &self.grad,
        }
    }

    pub fn add_hessian_to(&self, out: &mut DMatrix<f64>, weight: f64) {
        match &self.hess {
            Hessian::Zero => {}
            Hessian::ScaledIdentity(s) => {
                for i in 0..out.nrows() {
                    out[(i, i)] += weight * s;
                }
            }
            Hessian::Dense(h) => *out += h * weight,
        }
    }

    /// Largest magnitude coefficient, used for normalization.
    pub fn scale(&self) -> f64 {
        let h = match &self.hess {
            Hessian::Zero => 0.0,
            Hessian::ScaledIdentity(s) => s.abs(),
            Hessian::Dense(h) => h.amax(),
        };
        h.max(self.grad.amax()).max(self.constant.abs())
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.hess = match self.hess {
            Hessian::Zero => Hessian::Zero,
            Hessian::ScaledIdentity(s) => Hessian::ScaledIdentity(s * factor),
            Hessian::Dense(h) => Hessian::Dense(h * factor),
        };
        self.grad *= factor;
        self.constant *= factor;
        self
    }

    /// Same function on `(z, s)` with an extra trailing coordinate it ignores.
    pub fn lifted(&self) -> Self {
        let n = self.grad.len();
        let hess = match &self.hess {
            Hessian::Zero => Hessian::Zero,
            Hessian::ScaledIdentity(s) => {
                let mut h = DMatrix::zeros(n + 1, n + 1);
                for i in 0..n {
                    h[(i, i)] = *s;
                }
                Hessian::Dense(h)
            }
            Hessian::Dense(h) => {
                let mut out = DMatrix::zeros(n + 1, n + 1);
                out.view_mut((0, 0), (n, n)).copy_from(h);
                Hessian::Dense(out)
            }
        };
        let mut grad = DVector::zeros(n + 1);
        grad.rows_mut(0, n).copy_from(&self.grad);
        Self {
            hess,
            grad,
            constant: self.constant,
        }
    }
}

/// `min f0(z) s.t. f_i(z) <= 0`.
#[derive(Debug, Clone)]
pub(crate) struct RealProblem {
    pub objective: Quadratic,
    pub constraints: Vec<Quadratic>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmParams {
    pub eps: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmOutcome {
    pub z: DVector<f64>,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

const MU: f64 = 50.0;
const ALPHA: f64 = 0.01;
const BETA: f64 = 0.5;
/// Newton decrement (squared, halved) that ends a centering step; the
/// implied error in the objective is this divided by t.
const NEWTON_TOL: f64 = 1e-7;

impl RealProblem {
    pub fn dim(&self) -> usize {
        self.objective.grad.len()
    }

    pub fn constraint_values(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.constraints.len(), self.constraints.iter().map(|c| c.value(z)))
    }

    /// Barrier weight whose centering condition `t grad f0 + grad phi = 0`
    /// is best satisfied at `z` (least squares), clamped to a sane range.
    fn initial_t(&self, z: &DVector<f64>) -> f64 {
        let g0 = self.objective.gradient(z);
        let mut gphi = DVector::zeros(z.len());
        for c in &self.constraints {
            let f = c.value(z);
            gphi.axpy(1.0 / -f, &c.gradient(z), 1.0);
        }
        let nn = g0.norm_squared();
        if nn == 0.0 {
            return 1.0;
        }
        let t = -g0.dot(&gphi) / nn;
        if t.is_finite() {
            t.clamp(1e-2, 1e3)
        } else {
            1.0
        }
    }

    fn barrier(&self, z: &DVector<f64>, t: f64) -> f64 {
        let mut phi = t * self.objective.value(z);
        for c in &self.constraints {
            let f = c.value(z);
            if f >= 0.0 {
                return f64::INFINITY;
            }
            phi -= (-f).ln();
        }
        phi
    }

    /// Barrier method from a strictly feasible `z`. `stop` is checked after
    /// every Newton step.
    pub fn solve_from(
        &self,
        mut z: DVector<f64>,
        params: IpmParams,
        stop: Option<&dyn Fn(&DVector<f64>) -> bool>,
    ) -> IpmOutcome {
        let n = self.dim();
        let m = self.constraints.len();
        debug_assert!(self.constraint_values(&z).iter().all(|v| *v < 0.0));
        let mut t = self.initial_t(&z);
        let mut iterations = 0;
        let mut converged = false;

        'outer: loop {
            // centering
            loop {
                if iterations >= params.max_iter {
                    break 'outer;
                }
                let fz = self.constraint_values(&z);
                let mut grad = self.objective.gradient(&z) * t;
                let mut hess = DMatrix::zeros(n, n);
                self.objective.add_hessian_to(&mut hess, t);
                for (i, c) in self.constraints.iter().enumerate() {
                    let gi = c.gradient(&z);
                    let inv = 1.0 / -fz[i];
                    grad.axpy(inv, &gi, 1.0);
                    c.add_hessian_to(&mut hess, inv);
                    hess.ger(inv * inv, &gi, &gi, 1.0);
                }
                let Some(dz) = solve_spd(hess, &(-&grad)) else {
                    break 'outer;
                };
                let slope = grad.dot(&dz);
                if -slope / 2.0 <= NEWTON_TOL {
                    break;
                }
                iterations += 1;
                let phi0 = self.barrier(&z, t);
                let mut s = 1.0;
                let mut z_new = &z + &dz;
                while self.barrier(&z_new, t) > phi0 + ALPHA * s * slope {
                    s *= BETA;
                    if s < 1e-12 {
                        break;
                    }
                    z_new = &z + &dz * s;
                }
                if s < 1e-12 {
                    // no measurable progress at this t
                    break;
                }
                z = z_new;
                if let Some(stop) = stop {
                    if stop(&z) {
                        break 'outer;
                    }
                }
            }
            if m == 0 || m as f64 / t <= params.eps {
                converged = true;
                break;
            }
            t *= MU;
        }

        let fz = self.constraint_values(&z);
        let lambda = fz.map(|f| 1.0 / (t * -f));
        let mut r_dual = self.objective.gradient(&z);
        for (i, c) in self.constraints.iter().enumerate() {
            r_dual.axpy(lambda[i], &c.gradient(&z), 1.0);
        }
        let dual_residual = r_dual.amax();
        let gap = -fz.dot(&lambda);
        IpmOutcome {
            z,
            dual_residual,
            gap,
            iterations,
            converged: converged && dual_residual <= params.eps.sqrt(),
        }
    }
}

/// Solves `A x = b` for symmetric positive (semi)definite `A`, regularizing
/// the diagonal if the factorization fails.
pub(crate) fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = a.diagonal().amax().max(1e-300);
    let mut reg = 0.0;
    for _ in 0..6 {
        let mut m = a.clone();
        if reg > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += reg;
            }
        }
        if let Some(ch) = m.cholesky() {
            let x = ch.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    a.lu().solve(b).filter(|x| x.iter().all(|v| v.is_finite()))
}
