//! Reduction by stages for Lagrangians on `S × (G ⋉ V)`.
//!
//! The full group `G ⋉ V` gives a reduced system on `S × 𝒪_{(μ,a)}` with
//! Routhian `R₁` and the KKS form; reducing only by `V` gives an ordinary
//! Lagrangian system on `S × G` with Routhian `R₂`. When `G_a` is trivial and
//! `v ↦ v*a` is onto, the two are related by a compatible transformation.
//!
//! Orbit points are stored in ambient coordinates `(ν, b) ∈ 𝔤* × V*`. Group
//! coordinates on `S × G` (for `R₂`) are available when `G` is the circle.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::compat::{self, BetaMap, ConnectionOnF, PulledBackSystem, SymplecticReport, TransformationPair};
use crate::error::{check_dim, Error, Result};
use crate::lie::{pair, AlgebraVector, CoVector, GroupElement, LieGroup};
use crate::maglag::{self, stack, BForm, LagrangianDerivatives, MagLagState, MagneticSystem};
use crate::numerics::{self, NewtonOptions, StepperChoice, Trajectory, HESSIAN_STEP};
use crate::routh::{self, InvariantLagrangian, PartialLegendre, ReducedRouthSystem, ReducedState, Side};

/// An invariant Lagrangian `ℓ(x, ẋ, ξ, u)` on a semi-direct product, where the
/// algebra argument of the inner [`InvariantLagrangian`] is `(ξ, u)`.
#[derive(Clone)]
pub struct SemiDirectLagrangian {
    inner: Arc<dyn InvariantLagrangian>,
    gdim: usize,
    vdim: usize,
}

impl SemiDirectLagrangian {
    pub fn new(inner: Arc<dyn InvariantLagrangian>) -> Result<Self> {
        let group = inner.group();
        let vdim = group.vdim()?;
        let gdim = group.base()?.dim();
        Ok(Self { inner, gdim, vdim })
    }

    pub fn inner(&self) -> &Arc<dyn InvariantLagrangian> {
        &self.inner
    }

    pub fn group(&self) -> &LieGroup {
        self.inner.group()
    }

    pub fn base_group(&self) -> &LieGroup {
        self.group().base().expect("checked at construction")
    }

    pub fn shape_dim(&self) -> usize {
        self.inner.shape_dim()
    }

    pub fn gdim(&self) -> usize {
        self.gdim
    }

    pub fn vdim(&self) -> usize {
        self.vdim
    }

    pub fn value(&self, x: &DVector<f64>, xdot: &DVector<f64>, xi: &AlgebraVector, u: &DVector<f64>) -> f64 {
        self.inner.value(x, xdot, &AlgebraVector(stack(&[&xi.0, u])))
    }

    /// `(𝔽₂ℓ, 𝔽₃ℓ) = (∂ℓ/∂ξ, ∂ℓ/∂u)`.
    pub fn momenta(&self, x: &DVector<f64>, xdot: &DVector<f64>, xi: &AlgebraVector, u: &DVector<f64>) -> Result<(CoVector, CoVector)> {
        let full = routh::group_momentum(self.inner.as_ref(), x, xdot, &AlgebraVector(stack(&[&xi.0, u])))?;
        let (a, b) = full.split(self.gdim);
        Ok((a, b))
    }

    /// `(ν, b)` packed as a covector on the full algebra.
    pub fn pack(&self, nu: &CoVector, b: &CoVector) -> Result<CoVector> {
        check_dim("𝔤* component", self.gdim, nu.len())?;
        check_dim("V* component", self.vdim, b.len())?;
        Ok(nu.concat(b))
    }

    pub fn unpack(&self, full: &CoVector) -> (CoVector, CoVector) {
        full.split(self.gdim)
    }
}

/// `τ(x, ẋ, ξ, b)`: the `u` with `𝔽₃ℓ(x, ẋ, ξ, u) = b`, by Newton from `u = 0`.
pub fn solve_tau(
    l: &SemiDirectLagrangian,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
    xi: &AlgebraVector,
    b: &CoVector,
) -> Result<DVector<f64>> {
    check_dim("base algebra vector", l.gdim, xi.len())?;
    check_dim("V* component", l.vdim, b.len())?;
    let s = l.shape_dim();
    let off = 2 * s + l.gdim;
    let vd = l.vdim;
    let jet = |u: &DVector<f64>| l.inner.jet(x, xdot, &AlgebraVector(stack(&[&xi.0, u])));
    numerics::newton_solve(
        |u| Ok(jet(u)?.grad.rows(off, vd) - &b.0),
        |u| Ok(jet(u)?.hess.view((off, off), (vd, vd)).into_owned()),
        &DVector::zeros(vd),
        NewtonOptions::default(),
    )
    .map(|r| r.root)
    .map_err(|e| Error::regularity("V-regularity", e))
}

/// `(χ₁, χ₂)`: the `(ξ, u)` with `𝔽₂ℓ = ν` and `𝔽₃ℓ = b`.
pub fn solve_chi12(
    l: &SemiDirectLagrangian,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
    nu: &CoVector,
    b: &CoVector,
) -> Result<(AlgebraVector, DVector<f64>)> {
    let full = l.pack(nu, b)?;
    let chi = routh::solve_chi(l.inner.as_ref(), x, xdot, &full).map_err(|e| match e {
        Error::Regularity { source, .. } => Error::Regularity {
            condition: "GV-regularity",
            source,
        },
        e => e,
    })?;
    let (xi, u) = chi.split(l.gdim);
    Ok((xi, u.0))
}

/// `R₁(x, ẋ, ν, b) = ℓ(x, ẋ, χ₁, χ₂) − ⟨ν, χ₁⟩ − ⟨b, χ₂⟩`.
pub fn routhian_full(l: &SemiDirectLagrangian, x: &DVector<f64>, xdot: &DVector<f64>, nu: &CoVector, b: &CoVector) -> Result<f64> {
    let (xi, u) = solve_chi12(l, x, xdot, nu, b)?;
    Ok(l.value(x, xdot, &xi, &u) - pair(nu, &xi) - b.0.dot(&u))
}

/// `R₂(x, ẋ, g, ξ) = ℓ(x, ẋ, ξ, τ) − ⟨g*a, τ⟩` with `τ = τ(x, ẋ, ξ, g*a)`.
pub fn routhian_abelian(
    l: &SemiDirectLagrangian,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
    g: &GroupElement,
    xi: &AlgebraVector,
    a: &CoVector,
) -> Result<f64> {
    let b = l.group().dual_action(g, a)?;
    let u = solve_tau(l, x, xdot, xi, &b)?;
    Ok(l.value(x, xdot, xi, &u) - b.0.dot(&u))
}

/// The reduced flow on `TS × 𝒪_{(μ,a)}`, in ambient orbit coordinates.
pub fn full_reduction(l: &SemiDirectLagrangian, mu: &CoVector, a: &CoVector) -> Result<ReducedRouthSystem> {
    ReducedRouthSystem::new(l.inner.clone(), l.pack(mu, a)?, Side::Left)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageField {
    pub xdot: DVector<f64>,
    pub xddot: DVector<f64>,
    pub nudot: CoVector,
    pub bdot: CoVector,
    pub chi1: AlgebraVector,
    pub chi2: DVector<f64>,
}

/// `ν̇ = ad*_{χ₁}ν − χ₂*b`, `ḃ = χ₁*b` and the Euler–Lagrange equation of `R₁` in `x`.
pub fn reduced_field_full(l: &SemiDirectLagrangian, s: &ReducedState) -> Result<StageField> {
    let sys = ReducedRouthSystem::new(l.inner.clone(), s.nu.clone(), Side::Left)?;
    let f = sys.vector_field(s)?;
    let (nudot, bdot) = l.unpack(&f.nudot);
    let (chi1, chi2) = f.chi.split(l.gdim);
    Ok(StageField {
        xdot: f.xdot,
        xddot: f.xddot,
        nudot,
        bdot,
        chi1,
        chi2: chi2.0,
    })
}

/// Largest residual of the three stage equations at `s`, with `ad*`, `v*b`
/// and `ξ*b` taken from the base group and the representation directly.
pub fn stage_equation_residual(l: &SemiDirectLagrangian, s: &ReducedState, f: &StageField) -> Result<f64> {
    let (nu, b) = l.unpack(&s.nu);
    let group = l.group();
    let nudot = &l.base_group().inf_coadjoint(&f.chi1, &nu)? - &group.vstar(&f.chi2, &b)?;
    let bdot = group.inf_dual_action(&f.chi1, &b)?;
    let sys = ReducedRouthSystem::new(l.inner.clone(), s.nu.clone(), Side::Left)?;
    let (pl, _) = sys.routhian_jet(s, None)?;
    let n = l.shape_dim();
    let nudot_full = stack(&[&f.nudot.0, &f.bdot.0]);
    let el = pl.hess_zz.view((n, n), (n, n)) * &f.xddot + pl.hess_zz.view((n, 0), (n, n)) * &s.xdot
        + pl.hess_zb.view((n, 0), (n, nudot_full.len())) * &nudot_full
        - pl.grad_z.rows(0, n);
    let amax = |v: DVector<f64>| if v.is_empty() { 0.0 } else { v.amax() };
    Ok(amax(nudot.0 - &f.nudot.0).max(amax(bdot.0 - &f.bdot.0)).max(amax(el)))
}

/// `θ_{(μ,a)}(ν, b)(ν̇, ḃ) = ⟨ν, ξ⟩` where `ḃ = ξ*b`.
pub fn theta_form(group: &LieGroup, point: &CoVector, tangent: &CoVector) -> Result<f64> {
    let gdim = group.base()?.dim();
    check_dim("orbit point", group.dim(), point.len())?;
    check_dim("orbit tangent", group.dim(), tangent.len())?;
    let (nu, b) = point.split(gdim);
    let (_, bdot) = tangent.split(gdim);
    let m = group.inf_dual_matrix(&b)?;
    let (xi, res) = numerics::least_squares(&m, &bdot.0, "ξ ↦ ξ*b")
        .map_err(|e| Error::Hypothesis(format!("ξ not recoverable from ḃ = ξ*b: {e}")))?;
    if res > 1e-10 * bdot.0.amax().max(1.0) {
        return Err(Error::Hypothesis(format!(
            "ḃ is not of the form ξ*b (residual {res:.3e})"
        )));
    }
    Ok(nu.0.dot(&xi))
}

/// Matrix of `ζ ↦ ad*_ζ(ν, b)` on the full algebra: columns are orbit tangents.
fn generator_matrix(group: &LieGroup, point: &CoVector) -> Result<DMatrix<f64>> {
    let d = group.dim();
    let mut m = DMatrix::zeros(d, d);
    for j in 0..d {
        m.set_column(j, &group.inf_coadjoint(&AlgebraVector::basis(d, j), point)?.0);
    }
    Ok(m)
}

/// A generator `ζ` (minimum norm) with `ad*_ζ(ν, b) = tangent`.
pub fn generator_of(group: &LieGroup, point: &CoVector, tangent: &DVector<f64>) -> Result<AlgebraVector> {
    check_dim("orbit point", group.dim(), point.len())?;
    check_dim("orbit tangent", group.dim(), tangent.len())?;
    let m = generator_matrix(group, point)?;
    let zeta = numerics::pseudo_solve(&m, tangent)?;
    let res = (&m * &zeta - tangent).amax();
    if res > 1e-9 * tangent.amax().max(1.0) {
        return Err(Error::Hypothesis(format!("vector is not tangent to the orbit (residual {res:.3e})")));
    }
    Ok(AlgebraVector(zeta))
}

/// A local chart `y ↦ (ν, b)` on a coadjoint orbit.
pub trait OrbitChart: Send + Sync {
    fn dim(&self) -> usize;

    fn point(&self, y: &DVector<f64>) -> CoVector;

    /// `∂(ν, b)/∂y`, one column per chart coordinate.
    fn jacobian(&self, y: &DVector<f64>) -> DMatrix<f64>;

    /// Chart coordinates of an orbit point, where defined.
    fn coords(&self, point: &CoVector) -> Result<DVector<f64>>;
}

/// The cylinder orbit of SE(2) through `(μ, a)`: `y = (α, ν)`, `b = |a|e^{iα}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Se2CylinderChart {
    pub radius: f64,
}

impl Se2CylinderChart {
    pub fn new(a: &CoVector) -> Result<Self> {
        check_dim("SE(2) momentum a", 2, a.len())?;
        let radius = a.0.norm();
        if radius == 0.0 {
            return Err(Error::Hypothesis("dual action not onto: a = 0".into()));
        }
        Ok(Self { radius })
    }
}

impl OrbitChart for Se2CylinderChart {
    fn dim(&self) -> usize {
        2
    }

    fn point(&self, y: &DVector<f64>) -> CoVector {
        let (s, c) = y[0].sin_cos();
        CoVector::from_slice(&[y[1], self.radius * c, self.radius * s])
    }

    fn jacobian(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let (s, c) = y[0].sin_cos();
        DMatrix::from_row_slice(3, 2, &[0.0, 1.0, -self.radius * s, 0.0, self.radius * c, 0.0])
    }

    fn coords(&self, point: &CoVector) -> Result<DVector<f64>> {
        check_dim("orbit point", 3, point.len())?;
        Ok(DVector::from_column_slice(&[point[2].atan2(point[1]), point[0]]))
    }
}

/// Chart `y = (θ, ν) ↦ (ν, e^{θ}*a)` on the orbit through `(μ, a)` for a
/// semi-direct product over the circle.
#[derive(Clone, Debug)]
pub struct DualOrbitChart {
    group: LieGroup,
    a: CoVector,
}

impl DualOrbitChart {
    /// Requires `G = S¹`, `a ≠ 0` and `v ↦ v*a` onto `𝔤*`.
    pub fn new(group: &LieGroup, a: &CoVector) -> Result<Self> {
        let base = group.base()?;
        if !matches!(base.identity(), GroupElement::Circle(_)) {
            return Err(Error::Hypothesis(format!(
                "group coordinates are available only over the circle, not {}",
                base.name()
            )));
        }
        check_onto(group, a)?;
        Ok(Self {
            group: group.clone(),
            a: a.clone(),
        })
    }

    pub fn a(&self) -> &CoVector {
        &self.a
    }

    /// `g*a` for the circle element of angle `θ`.
    pub fn orbit_of_a(&self, theta: f64) -> CoVector {
        self.group
            .dual_action(&GroupElement::Circle(theta), &self.a)
            .expect("dimensions checked at construction")
    }

    /// The angle `θ` with `e^{θ}*a = b`: grid search then Newton on `½|e^{θ}*a − b|²`.
    pub fn recover_angle(&self, b: &CoVector) -> Result<f64> {
        check_dim("V* component", self.a.len(), b.len())?;
        let gen = self
            .group
            .rho_prime(&AlgebraVector::from_slice(&[1.0]))
            .expect("circle base")
            .transpose();
        let misfit = |t: f64| (self.orbit_of_a(t).0 - &b.0).norm_squared();
        let mut theta = (0..64)
            .map(|k| TAU * k as f64 / 64.0)
            .min_by(|x, y| misfit(*x).total_cmp(&misfit(*y)))
            .unwrap_or(0.0);
        for _ in 0..50 {
            let c = self.orbit_of_a(theta).0;
            let r = &c - &b.0;
            let mc = &gen * &c;
            let d1 = r.dot(&mc);
            let d2 = mc.norm_squared() + r.dot(&(&gen * &mc));
            if d2 <= 0.0 {
                break;
            }
            let step = d1 / d2;
            theta -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let res = misfit(theta).sqrt();
        if res > 1e-8 * b.0.amax().max(1.0) {
            return Err(Error::Hypothesis(format!(
                "b is not on the G-orbit of a (misfit {res:.3e})"
            )));
        }
        Ok(crate::lie::wrap_angle(theta))
    }
}

impl OrbitChart for DualOrbitChart {
    fn dim(&self) -> usize {
        2
    }

    fn point(&self, y: &DVector<f64>) -> CoVector {
        CoVector(stack(&[&DVector::from_element(1, y[1]), &self.orbit_of_a(y[0]).0]))
    }

    fn jacobian(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let b = self.orbit_of_a(y[0]);
        let db = self
            .group
            .inf_dual_action(&AlgebraVector::from_slice(&[1.0]), &b)
            .expect("circle base");
        let mut j = DMatrix::zeros(1 + b.len(), 2);
        j[(0, 1)] = 1.0;
        j.view_mut((1, 0), (b.len(), 1)).copy_from(&db.0);
        j
    }

    fn coords(&self, point: &CoVector) -> Result<DVector<f64>> {
        check_dim("orbit point", 1 + self.a.len(), point.len())?;
        let (nu, b) = point.split(1);
        Ok(DVector::from_column_slice(&[self.recover_angle(&b)?, nu[0]]))
    }
}

/// Errors unless `v ↦ v*a` maps `V` onto `𝔤*`.
pub fn check_onto(group: &LieGroup, a: &CoVector) -> Result<()> {
    let m = group.vstar_matrix(a)?;
    let gdim = m.nrows();
    let svd = m.svd(false, false);
    let tol = 1e-10 * svd.singular_values.max().max(1.0);
    if svd.rank(tol) < gdim {
        return Err(Error::Hypothesis(format!(
            "dual action not onto: v ↦ v*a has rank {} < dim 𝔤* = {gdim}",
            svd.rank(tol)
        )));
    }
    Ok(())
}

/// KKS form `⟨(ν, b), [ζ, ζ′]⟩` on two chart tangents, through their generators.
fn kks_on_chart_tangents(group: &LieGroup, point: &CoVector, t1: &DVector<f64>, t2: &DVector<f64>) -> Result<f64> {
    let z1 = generator_of(group, point, t1)?;
    let z2 = generator_of(group, point, t2)?;
    routh::kks_form(group, point, &z1, &z2)
}

/// Matrix of the KKS form in chart coordinates.
pub fn kks_chart_matrix(group: &LieGroup, chart: &dyn OrbitChart, y: &DVector<f64>) -> Result<DMatrix<f64>> {
    let point = chart.point(y);
    let jac = chart.jacobian(y);
    let k = chart.dim();
    let mut m = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i + 1..k {
            let v = kks_on_chart_tangents(group, &point, &jac.column(i).into_owned(), &jac.column(j).into_owned())?;
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
    }
    Ok(m)
}

/// Matrix of `dθ_{(μ,a)}` in chart coordinates by central differences of the
/// chart components of `θ`.
pub fn dtheta_chart_matrix(group: &LieGroup, chart: &dyn OrbitChart, y: &DVector<f64>, fd_step: f64) -> Result<DMatrix<f64>> {
    let comps = |y: &DVector<f64>| -> Result<DVector<f64>> {
        let point = chart.point(y);
        let jac = chart.jacobian(y);
        let mut c = DVector::zeros(chart.dim());
        for k in 0..chart.dim() {
            c[k] = theta_form(group, &point, &CoVector(jac.column(k).into_owned()))?;
        }
        Ok(c)
    };
    let jac = numerics::fd_jacobian(comps, y, fd_step)?;
    Ok(jac.transpose() - jac)
}

/// `max |dθ(t, t′) − ⟨(ν, b), [ζ, ζ′]⟩|` over chart samples and random
/// generator pairs, with `t = ∂y` of the orbit tangent `ad*_ζ(ν, b)`.
pub fn verify_lemma_b_equals_dtheta<R: Rng + ?Sized>(
    group: &LieGroup,
    chart: &dyn OrbitChart,
    samples: &[DVector<f64>],
    pairs: usize,
    fd_step: f64,
    rng: &mut R,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for y in samples {
        let dtheta = dtheta_chart_matrix(group, chart, y, fd_step)?;
        let point = chart.point(y);
        let jac = chart.jacobian(y);
        for _ in 0..pairs {
            let z1 = group.sample_algebra(rng, 1.0);
            let z2 = group.sample_algebra(rng, 1.0);
            let chart_tangent = |z: &AlgebraVector| -> Result<DVector<f64>> {
                let amb = group.inf_coadjoint(z, &point)?;
                Ok(numerics::least_squares(&jac, &amb.0, "orbit chart Jacobian")?.0)
            };
            let (t1, t2) = (chart_tangent(&z1)?, chart_tangent(&z2)?);
            let lhs = t1.dot(&(&dtheta * &t2));
            let rhs = routh::kks_form(group, &point, &z1, &z2)?;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// The full reduction written as a magnetic system on a chart of the orbit:
/// `q = x`, `p = y`, `L = R₁(x, ẋ, (ν, b)(y))`, `B_PP` the KKS form.
#[derive(Clone)]
pub struct OrbitChartSystem {
    reduced: ReducedRouthSystem,
    chart: Arc<dyn OrbitChart>,
}

impl OrbitChartSystem {
    pub fn new(l: &SemiDirectLagrangian, chart: Arc<dyn OrbitChart>, mu: &CoVector, a: &CoVector) -> Result<Self> {
        Ok(Self {
            reduced: full_reduction(l, mu, a)?,
            chart,
        })
    }

    pub fn chart(&self) -> &Arc<dyn OrbitChart> {
        &self.chart
    }

    fn jet(&self, q: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>) -> Result<PartialLegendre> {
        let s = ReducedState::new(q.clone(), v.clone(), self.chart.point(p));
        Ok(self.reduced.routhian_jet(&s, None)?.0)
    }

    /// Reduced state for a chart state.
    pub fn to_reduced(&self, s: &MagLagState) -> ReducedState {
        ReducedState::new(s.q.clone(), s.v.clone(), self.chart.point(&s.p))
    }

    pub fn from_reduced(&self, s: &ReducedState) -> Result<MagLagState> {
        Ok(MagLagState::new(s.x.clone(), s.xdot.clone(), self.chart.coords(&s.nu)?))
    }
}

impl MagneticSystem for OrbitChartSystem {
    fn base_dim(&self) -> usize {
        self.reduced.shape_dim()
    }

    fn fibre_dim(&self) -> usize {
        self.chart.dim()
    }

    fn lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>) -> f64 {
        self.jet(q, v, p).map_or(f64::NAN, |j| j.value)
    }

    fn bform(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<BForm> {
        let n = q.len();
        let k = self.chart.dim();
        let pp = kks_chart_matrix(self.reduced.group(), self.chart.as_ref(), p)?;
        BForm::new(DMatrix::zeros(n, n), DMatrix::zeros(n, k), pp)
    }

    fn derivatives(&self, q: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>) -> Result<LagrangianDerivatives> {
        let n = q.len();
        let pl = self.jet(q, v, p)?;
        let jac = self.chart.jacobian(p);
        Ok(LagrangianDerivatives {
            l_q: pl.grad_z.rows(0, n).into_owned(),
            l_v: pl.grad_z.rows(n, n).into_owned(),
            l_p: jac.transpose() * &pl.grad_b,
            l_vv: pl.hess_zz.view((n, n), (n, n)).into_owned(),
            l_vq: pl.hess_zz.view((n, 0), (n, n)).into_owned(),
            l_vp: pl.hess_zb.rows(n, n) * &jac,
        })
    }
}

/// The `V`-reduced system `R₂` as an ordinary Lagrangian system on `S × S¹`:
/// `q = (x, θ)`, `v = (ẋ, θ̇)`.
#[derive(Clone)]
pub struct AbelianRouthSystem {
    lagrangian: SemiDirectLagrangian,
    chart: DualOrbitChart,
}

impl AbelianRouthSystem {
    pub fn new(l: &SemiDirectLagrangian, a: &CoVector) -> Result<Self> {
        Ok(Self {
            lagrangian: l.clone(),
            chart: DualOrbitChart::new(l.group(), a)?,
        })
    }

    /// `R₂` with its partial-Legendre data over `z = (x, ẋ, θ̇)` and `b = e^{θ}*a`.
    fn jet(&self, q: &DVector<f64>, v: &DVector<f64>) -> Result<(PartialLegendre, CoVector)> {
        let l = &self.lagrangian;
        let s = l.shape_dim();
        let x = q.rows(0, s).into_owned();
        let xdot = v.rows(0, s).into_owned();
        let xi = AlgebraVector(v.rows(s, 1).into_owned());
        let b = self.chart.orbit_of_a(q[s]);
        let u = solve_tau(l, &x, &xdot, &xi, &b)?;
        let jet = l.inner.jet(&x, &xdot, &AlgebraVector(stack(&[&xi.0, &u])))?;
        Ok((PartialLegendre::from_jet(&jet, 2 * s + 1, &u, &b.0, "∂𝔽₃ℓ/∂u")?, b))
    }
}

impl MagneticSystem for AbelianRouthSystem {
    fn base_dim(&self) -> usize {
        self.lagrangian.shape_dim() + 1
    }

    fn fibre_dim(&self) -> usize {
        0
    }

    fn lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>, _: &DVector<f64>) -> f64 {
        self.jet(q, v).map_or(f64::NAN, |(j, _)| j.value)
    }

    fn bform(&self, _: &DVector<f64>, _: &DVector<f64>) -> Result<BForm> {
        Ok(BForm::zero(self.base_dim(), 0))
    }

    /// `∂R₂/∂θ = ⟨∂R/∂b, ξ₁*b⟩` with `ξ₁` the unit generator of the circle.
    fn derivatives(&self, q: &DVector<f64>, v: &DVector<f64>, _: &DVector<f64>) -> Result<LagrangianDerivatives> {
        let s = self.lagrangian.shape_dim();
        let n = s + 1;
        let (pl, b) = self.jet(q, v)?;
        let db = self
            .lagrangian
            .group()
            .inf_dual_action(&AlgebraVector::from_slice(&[1.0]), &b)?
            .0;
        // z = (x, ẋ, θ̇): reorder into q = (x, θ), v = (ẋ, θ̇)
        let mut l_q = DVector::zeros(n);
        l_q.rows_mut(0, s).copy_from(&pl.grad_z.rows(0, s));
        l_q[s] = pl.grad_b.dot(&db);
        let l_v = pl.grad_z.rows(s, s + 1).into_owned();
        let l_vv = pl.hess_zz.view((s, s), (n, n)).into_owned();
        let mut l_vq = DMatrix::zeros(n, n);
        l_vq.view_mut((0, 0), (n, s)).copy_from(&pl.hess_zz.view((s, 0), (n, s)));
        l_vq.set_column(s, &(pl.hess_zb.rows(s, n) * &db));
        Ok(LagrangianDerivatives {
            l_q,
            l_v,
            l_p: DVector::zeros(0),
            l_vv,
            l_vq,
            l_vp: DMatrix::zeros(n, 0),
        })
    }
}

/// Residuals of the equivalence between the two reductions.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StageReport {
    /// `max |R₁ − (ψ*R₂ − ⟨β, A(ψ)⟩)|`
    pub routhian_identity_residual: f64,
    /// `max |B_{(μ,a)} − d⟨β, A⟩|` on chart tangents
    pub form_identity_residual: f64,
    /// Max-norm gap between the ψ-image of the full-reduction flow and the `R₂` flow.
    pub trajectory_deviation: f64,
    pub casimir_drift: f64,
    pub nu_drift: f64,
    /// Residuals of `ψ` as a map from the orbit-chart system to `R₂`.
    pub symplectic: SymplecticReport,
}

/// Both reductions of a semi-direct Lagrangian, and the map relating them.
#[derive(Clone)]
pub struct StageEquivalence {
    pub lagrangian: SemiDirectLagrangian,
    pub mu: CoVector,
    pub a: CoVector,
    pub chart: Arc<DualOrbitChart>,
    /// `(S × 𝒪, R₁, B_{(μ,a)})` in chart coordinates `(x; θ, ν)`.
    pub orbit_system: OrbitChartSystem,
    /// `(S × G, R₂, 0)`.
    pub abelian_system: Arc<AbelianRouthSystem>,
    /// `(L₁, B₁)` obtained from `R₂` by the compatible transformation.
    pub pulled_back: PulledBackSystem,
}

/// Builds the stage equivalence for `G = S¹` with `β(x, θ, ν) = ν` and the
/// zero-curvature connection on `S × G → S`.
pub fn build_stage_equivalence(l: &SemiDirectLagrangian, mu: &CoVector, a: &CoVector) -> Result<StageEquivalence> {
    check_dim("momentum μ", l.gdim, mu.len())?;
    let chart = Arc::new(DualOrbitChart::new(l.group(), a)?);
    let abelian = Arc::new(AbelianRouthSystem::new(l, a)?);
    let s = l.shape_dim();
    let pair = TransformationPair::new(s, 1, 0, 1);
    let beta = BetaMap::new(move |w| DVector::from_element(1, w[s + 1]));
    let pulled = PulledBackSystem::new(pair, abelian.clone(), beta, ConnectionOnF::zero(pair))?;
    let orbit_system = OrbitChartSystem::new(l, chart.clone(), mu, a)?;
    Ok(StageEquivalence {
        lagrangian: l.clone(),
        mu: mu.clone(),
        a: a.clone(),
        chart,
        orbit_system,
        abelian_system: abelian,
        pulled_back: pulled,
    })
}

impl StageEquivalence {
    pub fn psi(&self, s1: &MagLagState) -> Result<MagLagState> {
        self.pulled_back.psi(s1)
    }

    /// Orbit-chart state `(x, ẋ; θ, ν)` of an ambient reduced state.
    pub fn chart_state(&self, s: &ReducedState) -> Result<MagLagState> {
        self.orbit_system.from_reduced(s)
    }

    /// Random orbit-chart states with entries in `[-scale, scale]` and `θ ∈ [0, 2π)`.
    pub fn sample_states<R: Rng + ?Sized>(&self, rng: &mut R, count: usize, scale: f64) -> Vec<MagLagState> {
        let s = self.lagrangian.shape_dim();
        (0..count)
            .map(|_| {
                let mut r = |d: usize| DVector::from_fn(d, |_, _| rng.gen_range(-scale..scale));
                let (x, xd, nu) = (r(s), r(s), r(1));
                let theta = rng.gen_range(0.0..TAU);
                MagLagState::new(x, xd, DVector::from_column_slice(&[theta, nu[0]]))
            })
            .collect()
    }

    pub fn routhian_identity_residual(&self, samples: &[MagLagState]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for s in samples {
            let r1 = self.orbit_system.lagrangian(&s.q, &s.v, &s.p);
            let l1 = self.pulled_back.lagrangian_at(s)?;
            worst = worst.max((r1 - l1).abs());
        }
        Ok(worst)
    }

    pub fn form_identity_residual(&self, samples: &[MagLagState]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for s in samples {
            let kks = self.orbit_system.bform(&s.q, &s.p)?.full();
            let b1 = self.pulled_back.bform(&s.q, &s.p)?.full();
            worst = worst.max((kks - b1).amax());
        }
        Ok(worst)
    }

    /// Integrates the full reduction from `s0`, maps the samples through the
    /// chart and `ψ`, and compares with the `R₂` flow (angles modulo 2π).
    pub fn trajectory_deviation(&self, s0: &ReducedState, t_end: f64, stepper: StepperChoice) -> Result<(f64, Trajectory<ReducedState>)> {
        let gv = full_reduction(&self.lagrangian, &self.mu, &self.a)?;
        let traj1 = gv.integrate(s0, t_end, stepper)?;
        let start = self.psi(&self.chart_state(s0)?)?;
        let traj2 = maglag::integrate(self.abelian_system.as_ref(), &start, t_end, stepper)?;
        let s = self.lagrangian.shape_dim();
        let mut worst: f64 = 0.0;
        for (r, m) in traj1.states.iter().zip(&traj2.states) {
            let mapped = self.psi(&self.chart_state(r)?)?;
            let mut d = (&mapped.to_vector() - &m.to_vector()).abs();
            d[s] = crate::lie::angle_difference(mapped.q[s], m.q[s]).abs();
            worst = worst.max(d.max());
        }
        Ok((worst, traj1))
    }

    /// Full verification: identities at random samples, `ψ` residuals with
    /// `pairs` tangent pairs per sample, and a trajectory comparison from `s0`.
    pub fn report<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        samples: usize,
        pairs: usize,
        s0: &ReducedState,
        t_end: f64,
        stepper: StepperChoice,
    ) -> Result<StageReport> {
        let pts = self.sample_states(rng, samples, 1.5);
        let routhian_identity_residual = self.routhian_identity_residual(&pts)?;
        let form_identity_residual = self.form_identity_residual(&pts)?;
        let mut symplectic = compat::symplectic_residual(
            &self.orbit_system,
            self.abelian_system.as_ref(),
            |s| self.psi(s),
            &pts,
            pairs,
            rng,
        )?;
        symplectic.max_residual_momentum = self.pulled_back.verify(&pts[..pts.len().min(10)], 1, rng)?.max_residual_momentum;
        let (trajectory_deviation, traj) = self.trajectory_deviation(s0, t_end, stepper)?;
        let group = self.lagrangian.group();
        let c0 = group.casimir(&traj.states[0].nu);
        let casimir_drift = match c0 {
            Some(c0) => traj
                .states
                .iter()
                .map(|s| group.casimir(&s.nu).map_or(f64::INFINITY, |c| (c - c0).abs()))
                .fold(0.0, f64::max),
            None => f64::NAN,
        };
        let nu0 = traj.states[0].nu.0.rows(0, self.lagrangian.gdim).into_owned();
        let nu_drift = traj.max_drift(|s| (s.nu.0.rows(0, nu0.len()) - &nu0).amax());
        Ok(StageReport {
            routhian_identity_residual,
            form_identity_residual,
            trajectory_deviation,
            casimir_drift,
            nu_drift,
            symplectic,
        })
    }
}

/// Default exterior-derivative step for the chart computations.
pub const CHART_FD_STEP: f64 = HESSIAN_STEP;
