//! Shared numerical kernel: finite differences, Newton iteration, dense
//! solves, explicit Runge–Kutta steppers and the Lie-group update used for
//! reconstruction.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{AlgebraVector, GroupElement, LieGroup};

/// Base step for first derivatives, scaled per coordinate by `max(1, |x_i|)`.
pub const GRADIENT_STEP: f64 = 1e-6;
/// Base step for Hessians and exterior derivatives.
pub const HESSIAN_STEP: f64 = 1e-4;
/// Determinant magnitude below which a dense system counts as singular.
pub const DET_TOL: f64 = 1e-12;

#[inline]
fn scaled_step(h0: f64, x: f64) -> f64 {
    h0 * x.abs().max(1.0)
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("finite-difference evaluation"))
    }
}

/// Central-difference gradient with componentwise step `h0 * max(1, |x_i|)`.
pub fn fd_gradient<F>(f: F, x: &DVector<f64>, h0: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut grad = DVector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let h = scaled_step(h0, x[i]);
        xp[i] = x[i] + h;
        let fp = finite(f(&xp))?;
        xp[i] = x[i] - h;
        let fm = finite(f(&xp))?;
        xp[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Nested central-difference Hessian, symmetric by construction.
pub fn fd_hessian<F>(f: F, x: &DVector<f64>, h0: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let n = x.len();
    let mut hess = DMatrix::zeros(n, n);
    let mut xp = x.clone();
    for i in 0..n {
        let hi = scaled_step(h0, x[i]);
        for j in i..n {
            let hj = scaled_step(h0, x[j]);
            let mut eval = |si: f64, sj: f64| -> Result<f64> {
                xp[i] += si * hi;
                xp[j] += sj * hj;
                let v = finite(f(&xp));
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let fpp = eval(1.0, 1.0)?;
            let fpm = eval(1.0, -1.0)?;
            let fmp = eval(-1.0, 1.0)?;
            let fmm = eval(-1.0, -1.0)?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}

/// Central-difference Jacobian of a vector-valued map.
pub fn fd_jacobian<F>(mut f: F, x: &DVector<f64>, h0: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut xp = x.clone();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = scaled_step(h0, x[i]);
        xp[i] = x[i] + h;
        let fp = f(&xp)?;
        xp[i] = x[i] - h;
        let fm = f(&xp)?;
        xp[i] = x[i];
        if fp.iter().chain(fm.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("finite-difference jacobian"));
        }
        cols.push((fp - fm) / (2.0 * h));
    }
    let rows = cols.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(rows, x.len(), |r, c| cols[c][r]))
}

/// Fourth-order central first derivative of a scalar function of one variable.
fn d1_stencil<F: FnMut(f64) -> f64>(mut f: F, h: f64) -> f64 {
    (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h)
}

/// Euler–Lagrange accelerations of an ordinary Lagrangian `L(q, q̇)`, using
/// only values of `L`.
///
/// All derivatives are fourth-order central stencils with base step `h`, so the
/// result is an independent check on any analytic or Hessian-based field.
pub fn fd_euler_lagrange<L>(
    lagrangian: L,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>>
where
    L: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let n = q.len();
    let shifted = |base: &DVector<f64>, i: usize, s: f64| {
        let mut b = base.clone();
        b[i] += s;
        b
    };
    let momentum = |qq: &DVector<f64>, vv: &DVector<f64>, i: usize| {
        let hi = scaled_step(h, vv[i]);
        d1_stencil(|s| lagrangian(qq, &shifted(vv, i, s)), hi)
    };

    let mut force = DVector::zeros(n);
    let mut mass = DMatrix::zeros(n, n);
    let mut coupling = DVector::zeros(n);
    let speed = qdot.amax().max(1.0);
    let hs = h / speed;
    for i in 0..n {
        let hi = scaled_step(h, q[i]);
        force[i] = d1_stencil(|s| lagrangian(&shifted(q, i, s), qdot), hi);
        for j in 0..n {
            let hj = scaled_step(h, qdot[j]);
            mass[(i, j)] = d1_stencil(|s| momentum(q, &shifted(qdot, j, s), i), hj);
        }
        coupling[i] = d1_stencil(|s| momentum(&(q + qdot * s), qdot, i), hs);
    }
    if force.iter().chain(mass.iter()).chain(coupling.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("euler-lagrange oracle"));
    }
    let mass = (&mass + mass.transpose()) * 0.5;
    solve_dense(&mass, &(force - coupling), "euler-lagrange mass matrix")
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>, which: &'static str) -> Result<DVector<f64>> {
    if a.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let lu = a.clone().lu();
    let det = lu.determinant();
    if !det.is_finite() || det.abs() <= DET_TOL {
        return Err(Error::Singular { which, det });
    }
    lu.solve(b).ok_or(Error::Singular { which, det })
}

/// Least-squares solution of `a x = b` through the SVD. Returns the solution
/// and the residual `|a x - b|_inf`. Fails when `a` has rank below its column count.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, which: &'static str) -> Result<(DVector<f64>, f64)> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = 1e-10 * smax.max(1.0);
    let rank = svd.rank(tol);
    if rank < a.ncols() {
        let smin = svd.singular_values.min();
        return Err(Error::Singular { which, det: smin });
    }
    let x = svd
        .solve(b, tol)
        .map_err(|_| Error::Singular { which, det: 0.0 })?;
    let res = (a * &x - b).amax();
    Ok((x, res))
}

/// Minimum-norm least-squares solution; tolerates rank deficiency.
pub fn pseudo_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let tol = 1e-10 * svd.singular_values.max().max(1.0);
    svd.solve(b, tol)
        .map_err(|_| Error::Singular { which: "pseudo-inverse", det: 0.0 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    /// Absolute tolerance on the max-norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50 }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonReport {
    pub root: DVector<f64>,
    pub iterations: usize,
    /// Residual max-norm at every iterate, starting with the seed.
    pub trace: Vec<f64>,
}

/// Newton's method with a caller-supplied Jacobian.
///
/// The trace and iteration count cover the iterates up to the first one within
/// `tol`; that iterate then receives a single polishing correction.
pub fn newton_solve<R, J>(
    mut residual: R,
    mut jacobian: J,
    seed: &DVector<f64>,
    opts: NewtonOptions,
) -> Result<NewtonReport>
where
    R: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    J: FnMut(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    let mut x = seed.clone();
    let mut trace = Vec::new();
    for iter in 0..=opts.max_iter {
        let r = residual(&x)?;
        let norm = if r.is_empty() { 0.0 } else { r.amax() };
        trace.push(norm);
        if !norm.is_finite() {
            break;
        }
        if norm <= opts.tol {
            // One more correction, kept only if it lowers the residual, so a
            // warm seed that already meets `tol` is not returned unrefined.
            if norm > 0.0 {
                if let Ok(step) = jacobian(&x).and_then(|j| solve_dense(&j, &(-&r), "newton jacobian")) {
                    let polished = &x + step;
                    if residual(&polished).is_ok_and(|r2| r2.amax() < norm) {
                        x = polished;
                    }
                }
            }
            return Ok(NewtonReport {
                root: x,
                iterations: iter,
                trace,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        let jac = jacobian(&x)?;
        let step = match solve_dense(&jac, &(-r), "newton jacobian") {
            Ok(s) => s,
            Err(_) => break,
        };
        x += step;
    }
    Err(Error::NewtonFailure {
        iterations: trace.len().saturating_sub(1),
        residual: trace.last().copied().unwrap_or(f64::NAN),
        trace,
    })
}

/// Newton's method with a central-difference Jacobian.
pub fn newton_solve_fd<R>(mut residual: R, seed: &DVector<f64>, opts: NewtonOptions) -> Result<NewtonReport>
where
    R: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let res = std::cell::RefCell::new(&mut residual);
    newton_solve(
        |x| (res.borrow_mut())(x),
        |x| fd_jacobian(|y| (res.borrow_mut())(y), x, GRADIENT_STEP),
        seed,
        opts,
    )
}

/// Time-stepping configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StepperChoice {
    Rk4 { h: f64 },
    Rkf45 {
        h_init: f64,
        atol: f64,
        rtol: f64,
        h_min: f64,
    },
}

impl Default for StepperChoice {
    fn default() -> Self {
        StepperChoice::Rk4 { h: 1e-3 }
    }
}

impl StepperChoice {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidStepper(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            StepperChoice::Rk4 { h } => positive("h", h),
            StepperChoice::Rkf45 {
                h_init,
                atol,
                rtol,
                h_min,
            } => {
                positive("h_init", h_init)?;
                positive("h_min", h_min)?;
                if atol < 1e-14 || rtol < 1e-14 {
                    return Err(Error::InvalidStepper("atol and rtol must be >= 1e-14".into()));
                }
                if h_init < h_min {
                    return Err(Error::InvalidStepper("h_init below h_min".into()));
                }
                Ok(())
            }
        }
    }
}

/// Time series of states.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &S)> {
        self.times.last().copied().zip(self.states.last())
    }

    pub fn map<T, F: FnMut(&S) -> T>(&self, f: F) -> Trajectory<T> {
        Trajectory {
            times: self.times.clone(),
            states: self.states.iter().map(f).collect(),
        }
    }

    pub fn try_map<T, F: FnMut(&S) -> Result<T>>(&self, f: F) -> Result<Trajectory<T>> {
        Ok(Trajectory {
            times: self.times.clone(),
            states: self.states.iter().map(f).collect::<Result<_>>()?,
        })
    }

    /// Largest `|g(s) - g(s_0)|` along the trajectory.
    pub fn max_drift<F: FnMut(&S) -> f64>(&self, mut g: F) -> f64 {
        let mut it = self.states.iter();
        let Some(first) = it.next() else { return 0.0 };
        let g0 = g(first);
        it.map(|s| (g(s) - g0).abs()).fold(0.0, f64::max)
    }
}

/// Column layout for CSV serialization of a state.
pub trait StateColumns {
    fn column_names(&self) -> Vec<String>;
    fn values(&self) -> Vec<f64>;
}

/// `prefix0, prefix1, …`
pub fn indexed_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

impl<S: StateColumns> Trajectory<S> {
    /// Writes `t,<columns>` with 17 significant digits per float.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let Some(first) = self.states.first() else {
            writeln!(out, "t")?;
            return Ok(());
        };
        writeln!(out, "t,{}", first.column_names().join(","))?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let row: Vec<String> = std::iter::once(*t)
                .chain(s.values())
                .map(|v| format!("{v:.16e}"))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step<F>(field: &mut F, t: f64, y: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = field(t, y)?;
    let k2 = field(t + 0.5 * h, &(y + &k1 * (0.5 * h)))?;
    let k3 = field(t + 0.5 * h, &(y + &k2 * (0.5 * h)))?;
    let k4 = field(t + h, &(y + &k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

const FEHLBERG_C: [f64; 6] = [0.0, 0.25, 0.375, 12.0 / 13.0, 1.0, 0.5];
const FEHLBERG_A: [[f64; 5]; 6] = [
    [0.0; 5],
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];
const FEHLBERG_B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0];
const FEHLBERG_B5: [f64; 6] = [
    16.0 / 135.0,
    0.0,
    6656.0 / 12825.0,
    28561.0 / 56430.0,
    -9.0 / 50.0,
    2.0 / 55.0,
];

/// One Runge–Kutta–Fehlberg 4(5) step: returns the fifth-order solution and
/// the embedded error estimate.
pub fn rkf45_step<F>(field: &mut F, t: f64, y: &DVector<f64>, h: f64) -> Result<(DVector<f64>, DVector<f64>)>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(6);
    for s in 0..6 {
        let mut ys = y.clone();
        for (j, kj) in k.iter().enumerate() {
            let a = FEHLBERG_A[s][j];
            if a != 0.0 {
                ys += kj * (a * h);
            }
        }
        k.push(field(t + FEHLBERG_C[s] * h, &ys)?);
    }
    let mut y4 = y.clone();
    let mut y5 = y.clone();
    for s in 0..6 {
        y4 += &k[s] * (FEHLBERG_B4[s] * h);
        y5 += &k[s] * (FEHLBERG_B5[s] * h);
    }
    let err = &y5 - &y4;
    Ok((y5, err))
}

/// Integrates `y' = field(t, y)` from `t = 0` to `t_end`.
///
/// Errors raised by the field are tagged with the time at which they occurred.
pub fn integrate_ode<F>(
    mut field: F,
    y0: &DVector<f64>,
    t_end: f64,
    stepper: StepperChoice,
) -> Result<Trajectory<DVector<f64>>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    stepper.validate()?;
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidStepper(format!("t_end must be non-negative, got {t_end}")));
    }
    let mut times = vec![0.0];
    let mut states = vec![y0.clone()];
    match stepper {
        StepperChoice::Rk4 { h } => {
            let n = ((t_end / h) - 1e-9).ceil().max(0.0) as usize;
            let mut y = y0.clone();
            for k in 0..n {
                let t = k as f64 * h;
                let t_next = if k + 1 == n { t_end } else { (k + 1) as f64 * h };
                y = rk4_step(&mut field, t, &y, t_next - t).map_err(|e| Error::at_time(t, e))?;
                times.push(t_next);
                states.push(y.clone());
            }
        }
        StepperChoice::Rkf45 {
            h_init,
            atol,
            rtol,
            h_min,
        } => {
            let mut t = 0.0;
            let mut y = y0.clone();
            let mut h = h_init.min(t_end.max(h_min));
            while t < t_end {
                let last = t + h >= t_end;
                let step = if last { t_end - t } else { h };
                let (y_new, err) = rkf45_step(&mut field, t, &y, step).map_err(|e| Error::at_time(t, e))?;
                let scaled = err
                    .iter()
                    .zip(y.iter().zip(y_new.iter()))
                    .map(|(e, (a, b))| e.abs() / (atol + rtol * a.abs().max(b.abs())))
                    .fold(0.0, f64::max);
                if !scaled.is_finite() {
                    return Err(Error::at_time(t, Error::NonFinite("rkf45 error estimate")));
                }
                if scaled <= 1.0 {
                    t = if last { t_end } else { t + step };
                    y = y_new;
                    times.push(t);
                    states.push(y.clone());
                }
                let factor = if scaled == 0.0 {
                    5.0
                } else {
                    (0.9 * scaled.powf(-0.2)).clamp(0.2, 5.0)
                };
                h = step * factor;
                if h < h_min && t < t_end {
                    return Err(Error::StepUnderflow { t, h });
                }
            }
        }
    }
    Ok(Trajectory { times, states })
}

/// Right-trivialized group update `g · exp(h ξ)`.
pub fn lie_step(group: &LieGroup, g: &GroupElement, xi: &AlgebraVector, h: f64) -> Result<GroupElement> {
    group.compose(g, &group.exp(xi, h)?)
}

/// Repeated [`lie_step`] with periodic re-orthonormalization of rotation payloads.
#[derive(Clone, Debug)]
pub struct GroupStepper {
    group: LieGroup,
    updates: usize,
    every: usize,
}

impl GroupStepper {
    pub const REORTHONORMALIZE_EVERY: usize = 100;

    pub fn new(group: LieGroup) -> Self {
        Self {
            group,
            updates: 0,
            every: Self::REORTHONORMALIZE_EVERY,
        }
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn step(&mut self, g: &GroupElement, xi: &AlgebraVector, h: f64) -> Result<GroupElement> {
        self.apply(g, &self.group.exp(xi, h)?, true)
    }

    /// Left-multiplies instead: `exp(h ξ) · g`.
    pub fn step_left(&mut self, g: &GroupElement, xi: &AlgebraVector, h: f64) -> Result<GroupElement> {
        self.apply(g, &self.group.exp(xi, h)?, false)
    }

    fn apply(&mut self, g: &GroupElement, incr: &GroupElement, right: bool) -> Result<GroupElement> {
        let next = if right {
            self.group.compose(g, incr)?
        } else {
            self.group.compose(incr, g)?
        };
        self.updates += 1;
        Ok(if self.updates.is_multiple_of(self.every) {
            next.reorthonormalized()
        } else {
            next
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gradient_of_half_norm_squared_is_identity() {
        let x = DVector::from_vec(vec![0.3, -1.7, 4.0]);
        let g = fd_gradient(|y| 0.5 * y.norm_squared(), &x, GRADIENT_STEP).unwrap();
        assert!((g - &x).amax() < 1e-9);
    }

    #[test]
    fn gradient_of_sin_product() {
        let x = DVector::from_vec(vec![0.0, 2.0]);
        let g = fd_gradient(|y| y[0].sin() * y[1], &x, GRADIENT_STEP).unwrap();
        assert_abs_diff_eq!(g[0], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn non_finite_evaluation_is_an_error() {
        let x = DVector::from_vec(vec![0.0]);
        let r = fd_gradient(|y| 1.0 / (y[0] - y[0]), &x, GRADIENT_STEP);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn hessian_of_quadratic() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 3.0]);
        let x = DVector::from_vec(vec![0.2, -0.4]);
        let h = fd_hessian(|y| 0.5 * (y.transpose() * &a * y)[0], &x, HESSIAN_STEP).unwrap();
        assert!((h - a).amax() < 1e-7);
    }

    #[test]
    fn newton_linear_converges_in_one_iteration() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, -1.0, 2.0]);
        let b = DVector::from_vec(vec![1.0, 4.0]);
        let rep = newton_solve(
            |x| Ok(&a * x - &b),
            |_| Ok(a.clone()),
            &DVector::zeros(2),
            NewtonOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.iterations, 1);
        assert!((&a * &rep.root - &b).amax() <= 1e-10);
    }

    // (x - 1)(x - 2)(x + 3): each seed lands in its own basin.
    #[test]
    fn newton_cubic_tracks_seed_basin() {
        let f = |x: f64| (x - 1.0) * (x - 2.0) * (x + 3.0);
        let df = |x: f64| 3.0 * x * x - 7.0 + 0.0 * x;
        // brute-force roots by sign changes on a fine grid
        let mut roots = Vec::new();
        let mut prev = f(-5.0);
        let mut x = -5.0;
        while x < 5.0 {
            let nx = x + 1e-3;
            let v = f(nx);
            if prev == 0.0 || prev.signum() != v.signum() {
                roots.push(nx);
            }
            prev = v;
            x = nx;
        }
        assert_eq!(roots.len(), 3);
        for (seed, expect) in [(-4.0, -3.0), (0.8, 1.0), (2.6, 2.0)] {
            let rep = newton_solve(
                |x| Ok(DVector::from_element(1, f(x[0]))),
                |x| Ok(DMatrix::from_element(1, 1, df(x[0]))),
                &DVector::from_element(1, seed),
                NewtonOptions::default(),
            )
            .unwrap();
            assert_abs_diff_eq!(rep.root[0], expect, epsilon = 1e-10);
            assert!(roots.iter().any(|r| (r - rep.root[0]).abs() < 2e-3));
        }
    }

    #[test]
    fn newton_trace_shows_quadratic_convergence() {
        let rep = newton_solve(
            |x| Ok(DVector::from_element(1, x[0].exp() - 2.0)),
            |x| Ok(DMatrix::from_element(1, 1, x[0].exp())),
            &DVector::from_element(1, 1.5),
            NewtonOptions { tol: 1e-14, max_iter: 50 },
        )
        .unwrap();
        let t = &rep.trace;
        assert!(t.len() >= 4);
        for k in 1..t.len() - 1 {
            if t[k] > 1e-7 {
                assert!(t[k + 1] / (t[k] * t[k]) < 10.0, "trace {t:?}");
            }
        }
    }

    #[test]
    fn newton_divergence_reports_trace() {
        let r = newton_solve_fd(
            |x| Ok(DVector::from_element(1, x[0] * x[0] + 1.0)),
            &DVector::from_element(1, 0.5),
            NewtonOptions { tol: 1e-10, max_iter: 20 },
        );
        match r {
            Err(Error::NewtonFailure { trace, .. }) => assert!(!trace.is_empty()),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn rk4_exponential() {
        let traj = integrate_ode(|_, y| Ok(y.clone()), &DVector::from_element(1, 1.0), 1.0, StepperChoice::Rk4 { h: 1e-3 })
            .unwrap();
        let (t, y) = traj.last().unwrap();
        assert_eq!(t, 1.0);
        assert_abs_diff_eq!(y[0], std::f64::consts::E, epsilon = 1e-10);
    }

    #[test]
    fn rk4_harmonic_oscillator_energy() {
        // 1000 periods of a unit oscillator, time rescaled so the period is 1e-2.
        let w = 2.0 * std::f64::consts::PI * 100.0;
        let y0 = DVector::from_vec(vec![1.0, 0.0]);
        let traj = integrate_ode(
            |_, y| Ok(DVector::from_vec(vec![y[1], -w * w * y[0]])),
            &y0,
            10.0,
            StepperChoice::Rk4 { h: 1e-5 },
        )
        .unwrap();
        let energy = |y: &DVector<f64>| 0.5 * y[1] * y[1] / (w * w) + 0.5 * y[0] * y[0];
        assert!(traj.max_drift(energy) <= 1e-9);
        let (_, y) = traj.last().unwrap();
        assert_abs_diff_eq!(y[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn rkf45_matches_closed_form() {
        let traj = integrate_ode(
            |_, y| Ok(DVector::from_vec(vec![y[1], -y[0]])),
            &DVector::from_vec(vec![1.0, 0.0]),
            10.0,
            StepperChoice::Rkf45 {
                h_init: 0.1,
                atol: 1e-12,
                rtol: 1e-12,
                h_min: 1e-10,
            },
        )
        .unwrap();
        let (t, y) = traj.last().unwrap();
        assert_eq!(t, 10.0);
        assert_abs_diff_eq!(y[0], 10f64.cos(), epsilon = 1e-9);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rkf45_underflow() {
        let r = integrate_ode(
            |_, y| Ok(DVector::from_element(1, 1.0 / (1.0 - y[0]).powi(3))),
            &DVector::from_element(1, 0.0),
            2.0,
            StepperChoice::Rkf45 {
                h_init: 0.1,
                atol: 1e-12,
                rtol: 1e-12,
                h_min: 1e-6,
            },
        );
        assert!(matches!(r, Err(Error::StepUnderflow { .. }) | Err(Error::AtTime { .. })));
    }

    #[test]
    fn stepper_validation() {
        assert!(StepperChoice::Rk4 { h: 0.0 }.validate().is_err());
        assert!(StepperChoice::Rkf45 {
            h_init: 0.1,
            atol: 1e-16,
            rtol: 1e-8,
            h_min: 1e-8
        }
        .validate()
        .is_err());
    }

    #[test]
    fn fd_euler_lagrange_pendulum() {
        let lag = |q: &DVector<f64>, v: &DVector<f64>| 0.5 * v[0] * v[0] + q[0].cos();
        let q = DVector::from_element(1, 0.7);
        let v = DVector::from_element(1, -0.3);
        let a = fd_euler_lagrange(lag, &q, &v, 1e-3).unwrap();
        assert_abs_diff_eq!(a[0], -(0.7f64).sin(), epsilon = 1e-10);
    }

    #[test]
    fn lie_step_zero_velocity_is_identity_map() {
        let g = LieGroup::so3();
        let r = GroupElement::Rotation(nalgebra::Rotation3::from_euler_angles(0.1, 0.2, 0.3).into_inner());
        let out = lie_step(&g, &r, &AlgebraVector::zeros(3), 0.1).unwrap();
        assert!(g.distance(&r, &out) < 1e-15);
    }
}
