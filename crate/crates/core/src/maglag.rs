//! Magnetic Lagrangian systems `(ε: P → Q, L, B)` in local coordinates.
//!
//! A state is `(q, v, p)` with `q ∈ ℝⁿ` base coordinates, `v = q̇` and `p ∈ ℝᵏ`
//! fibre coordinates. The Lagrangian does not depend on fibre velocities and the
//! closed 2-form `B` on `P` is given in blocks
//! `½B_QQ dq∧dq + B_QP dq∧dp + ½B_PP dp∧dp`. The equations of motion are
//!
//! ```text
//! d/dt ∂L/∂v − ∂L/∂q = B_QQ v + B_QP ṗ
//!            −∂L/∂p  = −B_QPᵀ v + B_PP ṗ
//! ```

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::numerics::{self, indexed_names, StateColumns, StepperChoice, Trajectory, GRADIENT_STEP, HESSIAN_STEP};

/// The magnetic 2-form at a point of `P`, split into blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BForm {
    qq: DMatrix<f64>,
    qp: DMatrix<f64>,
    pp: DMatrix<f64>,
}

fn exactly_antisymmetric(m: &DMatrix<f64>) -> bool {
    m.is_square() && (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| m[(i, j)] == -m[(j, i)]))
}

impl BForm {
    /// Fails with [`Error::NotAntisymmetric`] unless `qq` and `pp` are exactly antisymmetric.
    pub fn new(qq: DMatrix<f64>, qp: DMatrix<f64>, pp: DMatrix<f64>) -> Result<Self> {
        let (n, k) = (qq.nrows(), pp.nrows());
        check_dim("B_QP rows", n, qp.nrows())?;
        check_dim("B_QP columns", k, qp.ncols())?;
        if !exactly_antisymmetric(&qq) {
            return Err(Error::NotAntisymmetric("B_QQ"));
        }
        if !exactly_antisymmetric(&pp) {
            return Err(Error::NotAntisymmetric("B_PP"));
        }
        Ok(Self { qq, qp, pp })
    }

    pub fn zero(n: usize, k: usize) -> Self {
        Self {
            qq: DMatrix::zeros(n, n),
            qp: DMatrix::zeros(n, k),
            pp: DMatrix::zeros(k, k),
        }
    }

    /// Splits an antisymmetric `(n+k) × (n+k)` matrix over `(q, p)` into blocks.
    pub fn from_full(full: &DMatrix<f64>, n: usize) -> Result<Self> {
        let m = full.nrows();
        check_dim("2-form matrix columns", m, full.ncols())?;
        let k = m - n;
        Self::new(
            full.view((0, 0), (n, n)).into_owned(),
            full.view((0, n), (n, k)).into_owned(),
            full.view((n, n), (k, k)).into_owned(),
        )
    }

    /// Antisymmetrizes `full` before splitting; for numerically assembled forms.
    pub fn from_full_antisymmetrized(full: &DMatrix<f64>, n: usize) -> Result<Self> {
        let a = (full - full.transpose()) * 0.5;
        // (x - y)/2 and (y - x)/2 are exact negatives in floating point.
        Self::from_full(&a, n)
    }

    pub fn qq(&self) -> &DMatrix<f64> {
        &self.qq
    }

    pub fn qp(&self) -> &DMatrix<f64> {
        &self.qp
    }

    pub fn pp(&self) -> &DMatrix<f64> {
        &self.pp
    }

    pub fn base_dim(&self) -> usize {
        self.qq.nrows()
    }

    pub fn fibre_dim(&self) -> usize {
        self.pp.nrows()
    }

    /// The whole form as an antisymmetric matrix over `(q, p)`.
    pub fn full(&self) -> DMatrix<f64> {
        let (n, k) = (self.base_dim(), self.fibre_dim());
        let mut m = DMatrix::zeros(n + k, n + k);
        m.view_mut((0, 0), (n, n)).copy_from(&self.qq);
        m.view_mut((0, n), (n, k)).copy_from(&self.qp);
        m.view_mut((n, 0), (k, n)).copy_from(&(-self.qp.transpose()));
        m.view_mut((n, n), (k, k)).copy_from(&self.pp);
        m
    }
}

/// First derivatives of `L` and the second derivatives with one `v` slot.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianDerivatives {
    pub l_q: DVector<f64>,
    pub l_v: DVector<f64>,
    pub l_p: DVector<f64>,
    /// `∂²L/∂vⁱ∂vʲ`
    pub l_vv: DMatrix<f64>,
    /// `∂²L/∂vⁱ∂qʲ`
    pub l_vq: DMatrix<f64>,
    /// `∂²L/∂vⁱ∂pᵃ`
    pub l_vp: DMatrix<f64>,
}

/// Coordinate presentation of a magnetic Lagrangian system.
pub trait MagneticSystem: Send + Sync {
    fn base_dim(&self) -> usize;

    fn fibre_dim(&self) -> usize;

    fn lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>) -> f64;

    fn bform(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<BForm>;

    /// Central finite differences unless overridden.
    fn derivatives(&self, q: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>) -> Result<LagrangianDerivatives> {
        fd_derivatives(self, q, v, p)
    }
}

/// Finite-difference [`LagrangianDerivatives`]: gradient step `1e-6`, Hessian step `1e-4`.
pub fn fd_derivatives<S: MagneticSystem + ?Sized>(
    sys: &S,
    q: &DVector<f64>,
    v: &DVector<f64>,
    p: &DVector<f64>,
) -> Result<LagrangianDerivatives> {
    let (n, k) = (q.len(), p.len());
    let z = stack(&[q, v, p]);
    let f = |z: &DVector<f64>| {
        sys.lagrangian(
            &z.rows(0, n).into_owned(),
            &z.rows(n, n).into_owned(),
            &z.rows(2 * n, k).into_owned(),
        )
    };
    let grad = numerics::fd_gradient(f, &z, GRADIENT_STEP)?;
    let hess = numerics::fd_hessian(f, &z, HESSIAN_STEP)?;
    Ok(LagrangianDerivatives {
        l_q: grad.rows(0, n).into_owned(),
        l_v: grad.rows(n, n).into_owned(),
        l_p: grad.rows(2 * n, k).into_owned(),
        l_vv: hess.view((n, n), (n, n)).into_owned(),
        l_vq: hess.view((n, 0), (n, n)).into_owned(),
        l_vp: hess.view((n, 2 * n), (n, k)).into_owned(),
    })
}

pub(crate) fn stack(parts: &[&DVector<f64>]) -> DVector<f64> {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        out.extend_from_slice(p.as_slice());
    }
    DVector::from_vec(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MagLagState {
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    pub p: DVector<f64>,
}

impl MagLagState {
    pub fn new(q: DVector<f64>, v: DVector<f64>, p: DVector<f64>) -> Self {
        Self { q, v, p }
    }

    pub fn from_slices(q: &[f64], v: &[f64], p: &[f64]) -> Self {
        Self {
            q: DVector::from_column_slice(q),
            v: DVector::from_column_slice(v),
            p: DVector::from_column_slice(p),
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        stack(&[&self.q, &self.v, &self.p])
    }

    pub fn from_vector(y: &DVector<f64>, n: usize, k: usize) -> Result<Self> {
        check_dim("state vector", 2 * n + k, y.len())?;
        Ok(Self {
            q: y.rows(0, n).into_owned(),
            v: y.rows(n, n).into_owned(),
            p: y.rows(2 * n, k).into_owned(),
        })
    }

    fn check<S: MagneticSystem + ?Sized>(&self, sys: &S) -> Result<()> {
        check_dim("q", sys.base_dim(), self.q.len())?;
        check_dim("v", sys.base_dim(), self.v.len())?;
        check_dim("p", sys.fibre_dim(), self.p.len())?;
        if self.q.iter().chain(self.v.iter()).chain(self.p.iter()).all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("state"))
        }
    }
}

impl StateColumns for MagLagState {
    fn column_names(&self) -> Vec<String> {
        let mut out = indexed_names("q", self.q.len());
        out.extend(indexed_names("v", self.v.len()));
        out.extend(indexed_names("p", self.p.len()));
        out
    }

    fn values(&self) -> Vec<f64> {
        self.to_vector().iter().copied().collect()
    }
}

/// Right-hand side of the first-order system in `(q, v, p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldValue {
    pub qdot: DVector<f64>,
    pub vdot: DVector<f64>,
    pub pdot: DVector<f64>,
}

impl FieldValue {
    pub fn to_vector(&self) -> DVector<f64> {
        stack(&[&self.qdot, &self.vdot, &self.pdot])
    }
}

/// `∂L/∂v`.
pub fn legendre<S: MagneticSystem + ?Sized>(sys: &S, s: &MagLagState) -> Result<DVector<f64>> {
    s.check(sys)?;
    let d = sys.derivatives(&s.q, &s.v, &s.p)?;
    if d.l_v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Legendre transform"));
    }
    Ok(d.l_v)
}

/// `E = ⟨∂L/∂v, v⟩ − L`.
pub fn energy<S: MagneticSystem + ?Sized>(sys: &S, s: &MagLagState) -> Result<f64> {
    let alpha = legendre(sys, s)?;
    let e = alpha.dot(&s.v) - sys.lagrangian(&s.q, &s.v, &s.p);
    if e.is_finite() {
        Ok(e)
    } else {
        Err(Error::NonFinite("energy"))
    }
}

/// Solves the local equations of motion for `(v̇, ṗ)`.
pub fn vector_field<S: MagneticSystem + ?Sized>(sys: &S, s: &MagLagState) -> Result<FieldValue> {
    s.check(sys)?;
    let d = sys.derivatives(&s.q, &s.v, &s.p)?;
    let b = sys.bform(&s.q, &s.p)?;
    check_dim("2-form base block", sys.base_dim(), b.base_dim())?;
    check_dim("2-form fibre block", sys.fibre_dim(), b.fibre_dim())?;
    let rhs_p = b.qp.transpose() * &s.v - &d.l_p;
    let pdot = numerics::solve_dense(&b.pp, &rhs_p, "B_PP").map_err(|e| Error::regularity("fibre regularity (det B_PP)", e))?;
    let rhs_v = &d.l_q + &b.qq * &s.v + &b.qp * &pdot - &d.l_vq * &s.v - &d.l_vp * &pdot;
    let vdot = numerics::solve_dense(&d.l_vv, &rhs_v, "∂²L/∂v²")
        .map_err(|e| Error::regularity("Legendre regularity (det ∂²L/∂v²)", e))?;
    Ok(FieldValue {
        qdot: s.v.clone(),
        vdot,
        pdot,
    })
}

/// Max residuals of the two local equations at `s` for the given field value.
pub fn local_residuals<S: MagneticSystem + ?Sized>(sys: &S, s: &MagLagState, f: &FieldValue) -> Result<(f64, f64)> {
    let d = sys.derivatives(&s.q, &s.v, &s.p)?;
    let b = sys.bform(&s.q, &s.p)?;
    let ddt_lv = &d.l_vq * &s.v + &d.l_vv * &f.vdot + &d.l_vp * &f.pdot;
    let r1 = ddt_lv - &d.l_q - &b.qq * &s.v - &b.qp * &f.pdot;
    let r2 = -&d.l_p + b.qp.transpose() * &s.v - &b.pp * &f.pdot;
    let amax = |v: DVector<f64>| if v.is_empty() { 0.0 } else { v.amax() };
    Ok((amax(r1), amax(r2)))
}

/// Matrix of the 2-form `Ω^{L,B} = d(∂L/∂vⁱ) ∧ dqⁱ + B` in coordinates `(q, v, p)`,
/// so that `Ω(X, Y) = Xᵀ Ω Y`. Solutions satisfy `Ω X = ∇E`.
pub fn symplectic_matrix<S: MagneticSystem + ?Sized>(sys: &S, s: &MagLagState) -> Result<DMatrix<f64>> {
    s.check(sys)?;
    let (n, k) = (sys.base_dim(), sys.fibre_dim());
    let m = 2 * n + k;
    let d = sys.derivatives(&s.q, &s.v, &s.p)?;
    let mut grad_alpha = DMatrix::zeros(n, m);
    grad_alpha.view_mut((0, 0), (n, n)).copy_from(&d.l_vq);
    grad_alpha.view_mut((0, n), (n, n)).copy_from(&d.l_vv);
    grad_alpha.view_mut((0, 2 * n), (n, k)).copy_from(&d.l_vp);
    let mut proj = DMatrix::zeros(n, m);
    proj.view_mut((0, 0), (n, n)).fill_with_identity();
    let mut omega = grad_alpha.transpose() * &proj - proj.transpose() * &grad_alpha;
    let b = sys.bform(&s.q, &s.p)?;
    let idx: Vec<usize> = (0..n).chain(2 * n..2 * n + k).collect();
    let bf = b.full();
    for (a, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            omega[(i, j)] += bf[(a, c)];
        }
    }
    Ok(omega)
}

/// Integrates from `s0` over `[0, t_end]`.
pub fn integrate<S: MagneticSystem + ?Sized>(
    sys: &S,
    s0: &MagLagState,
    t_end: f64,
    stepper: StepperChoice,
) -> Result<Trajectory<MagLagState>> {
    s0.check(sys)?;
    let (n, k) = (sys.base_dim(), sys.fibre_dim());
    let traj = numerics::integrate_ode(
        |_, y| {
            let s = MagLagState::from_vector(y, n, k)?;
            Ok(vector_field(sys, &s)?.to_vector())
        },
        &s0.to_vector(),
        t_end,
        stepper,
    )?;
    traj.try_map(|y| MagLagState::from_vector(y, n, k))
}

/// `max_t |E(t) − E(0)|`.
pub fn energy_drift<S: MagneticSystem + ?Sized>(sys: &S, traj: &Trajectory<MagLagState>) -> Result<f64> {
    let energies = traj.states.iter().map(|s| energy(sys, s)).collect::<Result<Vec<_>>>()?;
    Ok(energies.iter().map(|e| (e - energies[0]).abs()).fold(0.0, f64::max))
}

/// Largest component of the finite-difference exterior derivative `dB` over the samples.
///
/// Differentiates the full form over `(q, p)` with central steps `fd_step·max(1, |yᵢ|)`.
/// Closed forms return values at the level of the truncation error.
pub fn check_closedness<S: MagneticSystem + ?Sized>(sys: &S, samples: &[MagLagState], fd_step: f64) -> f64 {
    let (n, k) = (sys.base_dim(), sys.fibre_dim());
    let m = n + k;
    let mut worst: f64 = 0.0;
    for s in samples {
        let y = stack(&[&s.q, &s.p]);
        let form = |y: &DVector<f64>| {
            sys.bform(&y.rows(0, n).into_owned(), &y.rows(n, k).into_owned())
                .map(|b| b.full())
        };
        let mut partials = Vec::with_capacity(m);
        for i in 0..m {
            let h = fd_step * y[i].abs().max(1.0);
            let mut yp = y.clone();
            yp[i] += h;
            let mut ym = y.clone();
            ym[i] -= h;
            match (form(&yp), form(&ym)) {
                (Ok(a), Ok(b)) => partials.push((a - b) / (2.0 * h)),
                _ => return f64::INFINITY,
            }
        }
        for i in 0..m {
            for j in i + 1..m {
                for l in j + 1..m {
                    let c = partials[i][(j, l)] + partials[j][(l, i)] + partials[l][(i, j)];
                    worst = worst.max(if c.is_finite() { c.abs() } else { f64::INFINITY });
                }
            }
        }
    }
    worst
}

type LagrangianFn = Arc<dyn Fn(&DVector<f64>, &DVector<f64>, &DVector<f64>) -> f64 + Send + Sync>;
type BFormFn = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> Result<BForm> + Send + Sync>;

/// A magnetic system given by closures, with finite-difference derivatives.
#[derive(Clone)]
pub struct ClosureSystem {
    n: usize,
    k: usize,
    lagrangian: LagrangianFn,
    bform: BFormFn,
}

impl ClosureSystem {
    pub fn new<L, B>(n: usize, k: usize, lagrangian: L, bform: B) -> Self
    where
        L: Fn(&DVector<f64>, &DVector<f64>, &DVector<f64>) -> f64 + Send + Sync + 'static,
        B: Fn(&DVector<f64>, &DVector<f64>) -> Result<BForm> + Send + Sync + 'static,
    {
        Self {
            n,
            k,
            lagrangian: Arc::new(lagrangian),
            bform: Arc::new(bform),
        }
    }

    /// An ordinary Lagrangian system on `ℝⁿ` (`k = 0`, `B = 0`).
    pub fn ordinary<L>(n: usize, lagrangian: L) -> Self
    where
        L: Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        Self::new(n, 0, move |q, v, _| lagrangian(q, v), move |_, _| Ok(BForm::zero(n, 0)))
    }
}

impl MagneticSystem for ClosureSystem {
    fn base_dim(&self) -> usize {
        self.n
    }

    fn fibre_dim(&self) -> usize {
        self.k
    }

    fn lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>) -> f64 {
        (self.lagrangian)(q, v, p)
    }

    fn bform(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<BForm> {
        (self.bform)(q, p)
    }
}

/// Unit-mass particle in the plane under a uniform field `B = c dq¹∧dq²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChargedParticle {
    pub c: f64,
}

impl MagneticSystem for ChargedParticle {
    fn base_dim(&self) -> usize {
        2
    }

    fn fibre_dim(&self) -> usize {
        0
    }

    fn lagrangian(&self, _q: &DVector<f64>, v: &DVector<f64>, _p: &DVector<f64>) -> f64 {
        0.5 * v.norm_squared()
    }

    fn bform(&self, _q: &DVector<f64>, _p: &DVector<f64>) -> Result<BForm> {
        BForm::new(
            DMatrix::from_row_slice(2, 2, &[0.0, self.c, -self.c, 0.0]),
            DMatrix::zeros(2, 0),
            DMatrix::zeros(0, 0),
        )
    }

    fn derivatives(&self, _q: &DVector<f64>, v: &DVector<f64>, _p: &DVector<f64>) -> Result<LagrangianDerivatives> {
        Ok(LagrangianDerivatives {
            l_q: DVector::zeros(2),
            l_v: v.clone(),
            l_p: DVector::zeros(0),
            l_vv: DMatrix::identity(2, 2),
            l_vq: DMatrix::zeros(2, 2),
            l_vp: DMatrix::zeros(2, 0),
        })
    }
}

/// Max-norm of `symplectic_matrix · X − ∇E`, with `∇E` by central differences.
pub fn hamiltonian_residual<S: MagneticSystem + ?Sized>(sys: &S, s: &MagLagState) -> Result<f64> {
    let (n, k) = (sys.base_dim(), sys.fibre_dim());
    let x = vector_field(sys, s)?.to_vector();
    let omega = symplectic_matrix(sys, s)?;
    let grad_e = numerics::fd_gradient(
        |y| {
            MagLagState::from_vector(y, n, k)
                .and_then(|st| energy(sys, &st))
                .unwrap_or(f64::NAN)
        },
        &s.to_vector(),
        1e-5,
    )?;
    Ok((omega * x - grad_e).amax())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{prop, prop_assert, proptest};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn free(n: usize) -> ClosureSystem {
        ClosureSystem::ordinary(n, |_, v| 0.5 * v.norm_squared())
    }

    /// q ∈ ℝ², p ∈ ℝ², mechanical with p-dependent metric, constant B.
    fn coupled() -> ClosureSystem {
        ClosureSystem::new(
            2,
            2,
            |q, v, p| {
                let m1 = 1.0 + 0.3 * p[0].sin().powi(2);
                let m2 = 2.0 + 0.1 * p[1] * p[1];
                0.5 * (m1 * v[0] * v[0] + m2 * v[1] * v[1]) + 0.2 * v[0] * v[1] - (q[0].cos() + 0.5 * p[0] * p[1] + 0.1 * q[1] * q[1])
            },
            |_, _| {
                BForm::new(
                    DMatrix::from_row_slice(2, 2, &[0.0, 0.4, -0.4, 0.0]),
                    DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, -0.2]),
                    DMatrix::from_row_slice(2, 2, &[0.0, 1.5, -1.5, 0.0]),
                )
            },
        )
    }

    #[test]
    fn legendre_of_kinetic_energy_is_velocity() {
        let s = MagLagState::from_slices(&[0.3, 1.0], &[2.0, -0.5], &[]);
        let a = legendre(&free(2), &s).unwrap();
        assert!((a - &s.v).amax() < 1e-9);
    }

    #[test]
    fn legendre_of_mechanical_type_is_metric_times_velocity() {
        let s = MagLagState::from_slices(&[0.3, 1.0], &[2.0, -0.5], &[0.7, -0.2]);
        let m1 = 1.0 + 0.3 * 0.7f64.sin().powi(2);
        let m2 = 2.0 + 0.1 * 0.04;
        let expect = v(&[m1 * 2.0 + 0.2 * -0.5, m2 * -0.5 + 0.2 * 2.0]);
        assert!((legendre(&coupled(), &s).unwrap() - expect).amax() < 1e-8);
    }

    #[test]
    fn energy_examples() {
        let sys = ClosureSystem::ordinary(1, |q, v| 0.5 * v[0] * v[0] - q[0].powi(2));
        let s = MagLagState::from_slices(&[1.5], &[0.4], &[]);
        assert_abs_diff_eq!(energy(&sys, &s).unwrap(), 0.08 + 2.25, epsilon = 1e-9);
        let s0 = MagLagState::from_slices(&[1.5], &[0.0], &[]);
        assert_abs_diff_eq!(energy(&sys, &s0).unwrap(), -sys.lagrangian(&s0.q, &s0.v, &s0.p), epsilon = 1e-12);
    }

    #[test]
    fn charged_particle_lorentz_force() {
        let c = 1.7;
        let s = MagLagState::from_slices(&[0.0, 0.0], &[0.3, -1.1], &[]);
        let f = vector_field(&ChargedParticle { c }, &s).unwrap();
        assert_eq!(f.vdot, v(&[c * -1.1, -c * 0.3]));
    }

    #[test]
    fn plain_newton_dynamics_when_not_magnetic() {
        let sys = ClosureSystem::ordinary(2, |q, v| 0.5 * v.norm_squared() - (q[0] * q[1]).sin());
        let s = MagLagState::from_slices(&[0.4, 0.9], &[1.0, 2.0], &[]);
        let f = vector_field(&sys, &s).unwrap();
        let grad_v = v(&[0.9 * (0.36f64).cos(), 0.4 * (0.36f64).cos()]);
        assert!((f.vdot + grad_v).amax() < 1e-7);
    }

    /// `L = ½(1+q₁²)v₀² + ½v₁² + 0.3 q₀v₀v₁ − q₁cos q₀` with analytic derivatives.
    struct Skewed;

    impl MagneticSystem for Skewed {
        fn base_dim(&self) -> usize {
            2
        }
        fn fibre_dim(&self) -> usize {
            0
        }
        fn lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>, _: &DVector<f64>) -> f64 {
            0.5 * (1.0 + q[1] * q[1]) * v[0] * v[0] + 0.5 * v[1] * v[1] + 0.3 * v[0] * v[1] * q[0] - q[0].cos() * q[1]
        }
        fn bform(&self, _: &DVector<f64>, _: &DVector<f64>) -> Result<BForm> {
            Ok(BForm::zero(2, 0))
        }
        fn derivatives(&self, q: &DVector<f64>, v: &DVector<f64>, _: &DVector<f64>) -> Result<LagrangianDerivatives> {
            Ok(LagrangianDerivatives {
                l_q: DVector::from_vec(vec![0.3 * v[0] * v[1] + q[0].sin() * q[1], q[1] * v[0] * v[0] - q[0].cos()]),
                l_v: DVector::from_vec(vec![(1.0 + q[1] * q[1]) * v[0] + 0.3 * v[1] * q[0], v[1] + 0.3 * v[0] * q[0]]),
                l_p: DVector::zeros(0),
                l_vv: DMatrix::from_row_slice(2, 2, &[1.0 + q[1] * q[1], 0.3 * q[0], 0.3 * q[0], 1.0]),
                l_vq: DMatrix::from_row_slice(2, 2, &[0.3 * v[1], 2.0 * q[1] * v[0], 0.3 * v[0], 0.0]),
                l_vp: DMatrix::zeros(2, 0),
            })
        }
    }

    #[test]
    fn degenerate_case_matches_euler_lagrange_oracle() {
        let sys = Skewed;
        let fd_sys = ClosureSystem::ordinary(2, |q, v| Skewed.lagrangian(q, v, &DVector::zeros(0)));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let q = v(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            let qd = v(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            let s = MagLagState::new(q.clone(), qd.clone(), DVector::zeros(0));
            let oracle = numerics::fd_euler_lagrange(|q, v| Skewed.lagrangian(q, v, &DVector::zeros(0)), &q, &qd, 1e-3).unwrap();
            let f = vector_field(&sys, &s).unwrap();
            assert!((&f.vdot - &oracle).amax() <= 1e-8);
            // the finite-difference fallback is limited by Hessian round-off
            let f = vector_field(&fd_sys, &s).unwrap();
            assert!((&f.vdot - &oracle).amax() <= 1e-6);
        }
    }

    #[test]
    fn fd_derivatives_match_analytic() {
        let s = MagLagState::from_slices(&[0.3, -0.7], &[1.1, 0.4], &[]);
        let a = Skewed.derivatives(&s.q, &s.v, &s.p).unwrap();
        let f = fd_derivatives(&Skewed, &s.q, &s.v, &s.p).unwrap();
        assert!((a.l_q - f.l_q).amax() < 1e-9);
        assert!((a.l_v - f.l_v).amax() < 1e-9);
        assert!((a.l_vv - f.l_vv).amax() < 1e-7);
        assert!((a.l_vq - f.l_vq).amax() < 1e-7);
    }

    #[test]
    fn field_is_hamiltonian_for_the_local_two_form() {
        let s = MagLagState::from_slices(&[0.3, -0.2], &[0.5, 1.0], &[]);
        let r = hamiltonian_residual(&Skewed, &s).unwrap();
        assert!(r < 1e-8, "{r}");
        let charged = ChargedParticle { c: -0.8 };
        assert!(hamiltonian_residual(&charged, &s).unwrap() < 1e-8);
    }

    #[test]
    fn local_equations_hold_after_solve() {
        let sys = coupled();
        let s = MagLagState::from_slices(&[0.3, -0.2], &[0.5, 1.0], &[0.7, -0.4]);
        let f = vector_field(&sys, &s).unwrap();
        let (r1, r2) = local_residuals(&sys, &s, &f).unwrap();
        assert!(r1 <= 1e-10 && r2 <= 1e-10, "{r1} {r2}");
    }

    #[test]
    fn singular_fibre_block_is_a_regularity_error() {
        let sys = ClosureSystem::new(1, 2, |_, v, _| 0.5 * v[0] * v[0], |_, _| {
            BForm::new(DMatrix::zeros(1, 1), DMatrix::zeros(1, 2), DMatrix::zeros(2, 2))
        });
        let s = MagLagState::from_slices(&[0.0], &[1.0], &[0.0, 0.0]);
        match vector_field(&sys, &s) {
            Err(Error::Regularity { condition, .. }) => assert!(condition.contains("B_PP")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn singular_velocity_hessian_is_a_regularity_error() {
        let sys = ClosureSystem::ordinary(1, |q, _| q[0]);
        let s = MagLagState::from_slices(&[0.0], &[1.0], &[]);
        match vector_field(&sys, &s) {
            Err(Error::Regularity { condition, .. }) => assert!(condition.contains("∂²L/∂v²")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn free_particle_moves_in_a_straight_line() {
        let s0 = MagLagState::from_slices(&[1.0, -2.0], &[0.3, 0.7], &[]);
        let traj = integrate(&free(2), &s0, 1.0, StepperChoice::Rk4 { h: 1e-3 }).unwrap();
        let (_, s) = traj.last().unwrap();
        assert!((&s.q - v(&[1.3, -1.3])).amax() <= 1e-10);
    }

    #[test]
    fn charged_particle_circles() {
        let c = 2.0;
        let sys = ChargedParticle { c };
        let s0 = MagLagState::from_slices(&[0.0, 0.0], &[1.0, 0.0], &[]);
        let period = 2.0 * PI / c;
        let traj = integrate(&sys, &s0, period, StepperChoice::Rk4 { h: 1e-3 }).unwrap();
        // a = (c v², −c v¹): clockwise circle of radius 1/c centred at (0, −1/c)
        let centre = v(&[0.0, -1.0 / c]);
        let radius = 1.0 / c;
        for s in &traj.states {
            assert!(((&s.q - &centre).norm() - radius).abs() <= 1e-6);
        }
        let (_, s) = traj.last().unwrap();
        assert!(s.q.norm() <= 1e-6);
    }

    #[test]
    fn energy_is_conserved_for_coupled_system() {
        let sys = coupled();
        let s0 = MagLagState::from_slices(&[0.3, -0.2], &[0.5, 1.0], &[0.7, -0.4]);
        let traj = integrate(&sys, &s0, 2.0, StepperChoice::Rk4 { h: 1e-2 }).unwrap();
        let e0 = energy(&sys, &s0).unwrap();
        assert!(energy_drift(&sys, &traj).unwrap() <= 1e-6 * (1.0 + e0.abs()));
    }

    #[test]
    fn closedness_examples() {
        let s = vec![
            MagLagState::from_slices(&[0.3, -0.2], &[0.0, 0.0], &[0.7, -0.4]),
            MagLagState::from_slices(&[1.3, 0.2], &[0.0, 0.0], &[-0.7, 2.4]),
        ];
        assert!(check_closedness(&coupled(), &s, 1e-4) <= 1e-8);

        // B = dθ for θ = q₁p₀² dq₀ + sin(q₀p₁) dp₀ + q₀q₁ dp₁
        let exact = ClosureSystem::new(2, 2, |_, v, _| 0.5 * v.norm_squared(), |q, p| {
            let theta = |y: &DVector<f64>| {
                v(&[y[1] * y[2] * y[2], 0.0, (y[0] * y[3]).sin(), y[0] * y[1]])
            };
            let y = stack(&[q, p]);
            let jac = numerics::fd_jacobian(|y| Ok(theta(y)), &y, 1e-5)?;
            // (dθ)_ij = ∂_i θ_j − ∂_j θ_i
            let full = jac.transpose() - &jac;
            BForm::from_full_antisymmetrized(&full, 2)
        });
        assert!(check_closedness(&exact, &s, 1e-4) <= 1e-6);

        let bad = ClosureSystem::new(2, 2, |_, v, _| 0.5 * v.norm_squared(), |q, _| {
            BForm::new(
                DMatrix::zeros(2, 2),
                DMatrix::from_row_slice(2, 2, &[q[1], 0.0, 0.0, 0.0]),
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            )
        });
        assert!(check_closedness(&bad, &s, 1e-4) >= 0.5);
    }

    #[test]
    fn csv_header_and_rows() {
        let traj = Trajectory {
            times: vec![0.0, 0.5],
            states: vec![
                MagLagState::from_slices(&[1.0], &[2.0], &[3.0, 4.0]),
                MagLagState::from_slices(&[1.0 / 3.0], &[2.0], &[3.0, 4.0]),
            ],
        };
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,q0,v0,p0,p1");
        lines.next();
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(row[1], 1.0 / 3.0);
    }

    proptest! {
        #[test]
        fn symmetric_parts_are_rejected(a in -5.0f64..5.0, s in 0.01f64..5.0) {
            let qq = DMatrix::from_row_slice(2, 2, &[0.0, a, -a + s, 0.0]);
            prop_assert!(matches!(
                BForm::new(qq, DMatrix::zeros(2, 1), DMatrix::zeros(1, 1)),
                Err(Error::NotAntisymmetric("B_QQ"))
            ));
            let pp = DMatrix::from_row_slice(2, 2, &[s, a, -a, 0.0]);
            prop_assert!(matches!(
                BForm::new(DMatrix::zeros(1, 1), DMatrix::zeros(1, 2), pp),
                Err(Error::NotAntisymmetric("B_PP"))
            ));
        }

        #[test]
        fn antisymmetrized_forms_are_accepted(x in prop::collection::vec(-5.0f64..5.0, 9)) {
            let m = DMatrix::from_row_slice(3, 3, &x);
            let b = BForm::from_full_antisymmetrized(&m, 1).unwrap();
            prop_assert!(exactly_antisymmetric(&b.full()));
        }
    }
}
