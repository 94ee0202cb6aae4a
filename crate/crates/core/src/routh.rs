//! Routh reduction for Lagrangians on `S × G` invariant under `G`.
//!
//! With the left identification `v_g = gξ`, an invariant Lagrangian becomes a
//! function `ℓ(x, ẋ, ξ)`. Fixing the momentum `μ`, the reduced system lives on
//! `TS × 𝒪_μ`: its Lagrangian is the Routhian `R^μ = ℓ − ⟨ν, ξ⟩` evaluated at
//! `ξ = χ(ν)`, the inverse of `ξ ↦ ∂ℓ/∂ξ`, and its magnetic term is the KKS form
//! on the coadjoint orbit.

use std::cell::RefCell;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::lie::{pair, AlgebraVector, CoVector, GroupElement, LieGroup};
use crate::maglag::stack;
use crate::numerics::{
    self, indexed_names, GroupStepper, NewtonOptions, NewtonReport, StateColumns, StepperChoice, Trajectory,
    GRADIENT_STEP, HESSIAN_STEP,
};

/// Value, gradient and Hessian of a scalar function at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl Jet {
    /// Central finite differences (`1e-6` for the gradient, `1e-4` for the Hessian).
    pub fn finite_difference<F: Fn(&DVector<f64>) -> f64>(f: F, w: &DVector<f64>) -> Result<Self> {
        let value = f(w);
        if !value.is_finite() {
            return Err(Error::NonFinite("function value"));
        }
        Ok(Self {
            value,
            grad: numerics::fd_gradient(&f, w, GRADIENT_STEP)?,
            hess: numerics::fd_hessian(&f, w, HESSIAN_STEP)?,
        })
    }
}

/// Second-order data of `R(z, b) = ℓ(z, u) − ⟨b, u⟩` at the point where
/// `∂ℓ/∂u (z, u) = b`, obtained from the jet of `ℓ` at `(z, u)`:
///
/// ```text
/// R_z = ℓ_z,  R_b = −u,  R_zz = ℓ_zz − ℓ_zu ℓ_uu⁻¹ ℓ_uz,  R_zb = ℓ_zu ℓ_uu⁻¹,  R_bb = −ℓ_uu⁻¹
/// ```
#[derive(Clone, Debug)]
pub struct PartialLegendre {
    pub value: f64,
    pub grad_z: DVector<f64>,
    pub grad_b: DVector<f64>,
    pub hess_zz: DMatrix<f64>,
    pub hess_zb: DMatrix<f64>,
    pub hess_bb: DMatrix<f64>,
}

impl PartialLegendre {
    /// `jet` is the jet of `ℓ` over `(z, u)` with `z` of length `zdim`.
    pub fn from_jet(jet: &Jet, zdim: usize, u: &DVector<f64>, b: &DVector<f64>, which: &'static str) -> Result<Self> {
        let ud = u.len();
        check_dim("partial Legendre jet", zdim + ud, jet.grad.len())?;
        let l_zz = jet.hess.view((0, 0), (zdim, zdim)).into_owned();
        let l_zu = jet.hess.view((0, zdim), (zdim, ud)).into_owned();
        let l_uu = jet.hess.view((zdim, zdim), (ud, ud)).into_owned();
        let lu = l_uu.clone().lu();
        let det = lu.determinant();
        if !det.is_finite() || det.abs() <= numerics::DET_TOL {
            return Err(Error::Singular { which, det });
        }
        let inv = lu.try_inverse().ok_or(Error::Singular { which, det })?;
        let inv = (&inv + inv.transpose()) * 0.5;
        let hess_zb = &l_zu * &inv;
        Ok(Self {
            value: jet.value - b.dot(u),
            grad_z: jet.grad.rows(0, zdim).into_owned(),
            grad_b: -u,
            hess_zz: &l_zz - &hess_zb * l_zu.transpose(),
            hess_zb,
            hess_bb: -inv,
        })
    }
}

/// A `G`-invariant Lagrangian in the left identification, `ℓ(x, ẋ, ξ)`.
pub trait InvariantLagrangian: Send + Sync {
    fn shape_dim(&self) -> usize;

    fn group(&self) -> &LieGroup;

    fn value(&self, x: &DVector<f64>, xdot: &DVector<f64>, xi: &AlgebraVector) -> f64;

    /// Jet over `w = (x, ẋ, ξ)`; finite differences unless overridden.
    fn jet(&self, x: &DVector<f64>, xdot: &DVector<f64>, xi: &AlgebraVector) -> Result<Jet> {
        let s = self.shape_dim();
        let w = stack(&[x, xdot, &xi.0]);
        Jet::finite_difference(
            |w| {
                self.value(
                    &w.rows(0, s).into_owned(),
                    &w.rows(s, s).into_owned(),
                    &AlgebraVector(w.rows(2 * s, w.len() - 2 * s).into_owned()),
                )
            },
            &w,
        )
    }

    /// `V(x)` when `ℓ + V` is a quadratic form in `(ẋ, ξ)`.
    fn potential(&self, _x: &DVector<f64>) -> Option<f64> {
        None
    }
}

fn check_point<L: InvariantLagrangian + ?Sized>(l: &L, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<()> {
    check_dim("shape coordinates", l.shape_dim(), x.len())?;
    check_dim("shape velocities", l.shape_dim(), xdot.len())
}

/// `𝔽₁ℓ = ∂ℓ/∂ẋ`.
pub fn shape_momentum<L: InvariantLagrangian + ?Sized>(
    l: &L,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
    xi: &AlgebraVector,
) -> Result<DVector<f64>> {
    check_point(l, x, xdot)?;
    let s = l.shape_dim();
    Ok(l.jet(x, xdot, xi)?.grad.rows(s, s).into_owned())
}

/// `𝔽₂ℓ = ∂ℓ/∂ξ`.
pub fn group_momentum<L: InvariantLagrangian + ?Sized>(
    l: &L,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
    xi: &AlgebraVector,
) -> Result<CoVector> {
    check_point(l, x, xdot)?;
    check_dim("algebra vector", l.group().dim(), xi.len())?;
    let s = l.shape_dim();
    Ok(CoVector(l.jet(x, xdot, xi)?.grad.rows(2 * s, xi.len()).into_owned()))
}

/// `J_L = Ad*_{g⁻¹} 𝔽₂ℓ(x, ẋ, ξ)`.
pub fn momentum_map<L: InvariantLagrangian + ?Sized>(
    l: &L,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
    g: &GroupElement,
    xi: &AlgebraVector,
) -> Result<CoVector> {
    let f2 = group_momentum(l, x, xdot, xi)?;
    let group = l.group();
    group.coadjoint(&group.inverse(g)?, &f2)
}

/// Newton solve of `𝔽₂ℓ(x, ẋ, ξ) = ν` from `seed`, with the full iteration record.
pub fn solve_chi_from<L: InvariantLagrangian + ?Sized>(
    l: &L,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
    nu: &CoVector,
    seed: &AlgebraVector,
) -> Result<NewtonReport> {
    check_point(l, x, xdot)?;
    let d = l.group().dim();
    check_dim("momentum", d, nu.len())?;
    check_dim("seed", d, seed.len())?;
    let s = l.shape_dim();
    let cache = RefCell::new(None::<(DVector<f64>, Jet)>);
    let jet_at = |xi: &DVector<f64>| -> Result<Jet> {
        if let Some((key, jet)) = cache.borrow().as_ref() {
            if key == xi {
                return Ok(jet.clone());
            }
        }
        let jet = l.jet(x, xdot, &AlgebraVector(xi.clone()))?;
        *cache.borrow_mut() = Some((xi.clone(), jet.clone()));
        Ok(jet)
    };
    numerics::newton_solve(
        |xi| Ok(jet_at(xi)?.grad.rows(2 * s, d) - &nu.0),
        |xi| Ok(jet_at(xi)?.hess.view((2 * s, 2 * s), (d, d)).into_owned()),
        &seed.0,
        NewtonOptions::default(),
    )
    .map_err(|e| Error::regularity("G-regularity", e))
}

/// `χ(ν)`: the `ξ` with `𝔽₂ℓ(x, ẋ, ξ) = ν`, seeded at zero.
pub fn solve_chi<L: InvariantLagrangian + ?Sized>(
    l: &L,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
    nu: &CoVector,
) -> Result<AlgebraVector> {
    let seed = AlgebraVector::zeros(l.group().dim());
    Ok(AlgebraVector(solve_chi_from(l, x, xdot, nu, &seed)?.root))
}

/// `R^μ(x, ẋ, ν) = ℓ(x, ẋ, χ) − ⟨ν, χ⟩`.
pub fn routhian<L: InvariantLagrangian + ?Sized>(l: &L, x: &DVector<f64>, xdot: &DVector<f64>, nu: &CoVector) -> Result<f64> {
    let chi = solve_chi(l, x, xdot, nu)?;
    Ok(l.value(x, xdot, &chi) - pair(nu, &chi))
}

/// Routhian of a mechanical-type `ℓ` through `2(R + V) = ⟨𝔽₁ℓ, ẋ⟩ − ⟨𝔽₂ℓ, χ⟩`.
pub fn routhian_mechanical<L: InvariantLagrangian + ?Sized>(
    l: &L,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
    nu: &CoVector,
) -> Result<f64> {
    let v = l
        .potential(x)
        .ok_or_else(|| Error::Hypothesis("Lagrangian is not of mechanical type".into()))?;
    let chi = solve_chi(l, x, xdot, nu)?;
    let s = l.shape_dim();
    let grad = l.jet(x, xdot, &chi)?.grad;
    let f1 = grad.rows(s, s);
    let f2 = grad.rows(2 * s, chi.len());
    Ok(0.5 * (f1.dot(xdot) - f2.dot(&chi.0)) - v)
}

/// KKS pairing `⟨ν, [ξ, ξ′]⟩`.
pub fn kks_form(group: &LieGroup, nu: &CoVector, xi: &AlgebraVector, xi2: &AlgebraVector) -> Result<f64> {
    check_dim("momentum", group.dim(), nu.len())?;
    Ok(pair(nu, &group.bracket(xi, xi2)?))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Invariance under left multiplication: `ν̇ = ad*_χ ν`, `ġ = gχ`.
    #[default]
    Left,
    /// Invariance under right multiplication: `ν̇ = −ad*_χ ν`, `ġ = χg`.
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedState {
    pub x: DVector<f64>,
    pub xdot: DVector<f64>,
    pub nu: CoVector,
}

impl ReducedState {
    pub fn new(x: DVector<f64>, xdot: DVector<f64>, nu: CoVector) -> Self {
        Self { x, xdot, nu }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        stack(&[&self.x, &self.xdot, &self.nu.0])
    }

    pub fn from_vector(y: &DVector<f64>, s: usize, d: usize) -> Result<Self> {
        check_dim("reduced state vector", 2 * s + d, y.len())?;
        Ok(Self {
            x: y.rows(0, s).into_owned(),
            xdot: y.rows(s, s).into_owned(),
            nu: CoVector(y.rows(2 * s, d).into_owned()),
        })
    }
}

impl StateColumns for ReducedState {
    fn column_names(&self) -> Vec<String> {
        let mut out = indexed_names("x", self.x.len());
        out.extend(indexed_names("xdot", self.xdot.len()));
        out.extend(indexed_names("nu", self.nu.len()));
        out
    }

    fn values(&self) -> Vec<f64> {
        self.to_vector().iter().copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedField {
    pub xdot: DVector<f64>,
    pub xddot: DVector<f64>,
    pub nudot: CoVector,
    /// `χ(ν)` at the evaluated state.
    pub chi: AlgebraVector,
}

impl ReducedField {
    pub fn to_vector(&self) -> DVector<f64> {
        stack(&[&self.xdot, &self.xddot, &self.nudot.0])
    }
}

/// Maximum drift of each monitored quantity along a trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct InvariantReport {
    pub energy_drift: f64,
    /// `None` when the group has no registered Casimir.
    pub casimir_drift: Option<f64>,
}

/// The reduced system `(S × 𝒪_μ → S, R^μ, B_μ)`.
#[derive(Clone)]
pub struct ReducedRouthSystem {
    pub lagrangian: Arc<dyn InvariantLagrangian>,
    pub mu: CoVector,
    pub side: Side,
}

impl ReducedRouthSystem {
    pub fn new(lagrangian: Arc<dyn InvariantLagrangian>, mu: CoVector, side: Side) -> Result<Self> {
        check_dim("momentum level", lagrangian.group().dim(), mu.len())?;
        if mu.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("momentum level"));
        }
        Ok(Self { lagrangian, mu, side })
    }

    pub fn group(&self) -> &LieGroup {
        self.lagrangian.group()
    }

    pub fn shape_dim(&self) -> usize {
        self.lagrangian.shape_dim()
    }

    /// A state on the orbit through `μ`, with `ν = μ`.
    pub fn initial_state(&self, x: DVector<f64>, xdot: DVector<f64>) -> ReducedState {
        ReducedState::new(x, xdot, self.mu.clone())
    }

    fn check(&self, s: &ReducedState) -> Result<()> {
        check_point(self.lagrangian.as_ref(), &s.x, &s.xdot)?;
        check_dim("momentum", self.group().dim(), s.nu.len())
    }

    /// Second-order data of `R^μ` over `z = (x, ẋ)` and `ν`, together with `χ`.
    pub fn routhian_jet(&self, s: &ReducedState, seed: Option<&AlgebraVector>) -> Result<(PartialLegendre, AlgebraVector)> {
        self.check(s)?;
        let l = self.lagrangian.as_ref();
        let zero = AlgebraVector::zeros(self.group().dim());
        let chi = AlgebraVector(solve_chi_from(l, &s.x, &s.xdot, &s.nu, seed.unwrap_or(&zero))?.root);
        let jet = l.jet(&s.x, &s.xdot, &chi)?;
        let pl = PartialLegendre::from_jet(&jet, 2 * self.shape_dim(), &chi.0, &s.nu.0, "∂𝔽₂ℓ/∂ξ")?;
        Ok((pl, chi))
    }

    pub fn routhian(&self, s: &ReducedState) -> Result<f64> {
        self.check(s)?;
        routhian(self.lagrangian.as_ref(), &s.x, &s.xdot, &s.nu)
    }

    /// `E = ⟨∂R/∂ẋ, ẋ⟩ − R`.
    pub fn energy(&self, s: &ReducedState) -> Result<f64> {
        let (pl, _) = self.routhian_jet(s, None)?;
        let n = self.shape_dim();
        Ok(pl.grad_z.rows(n, n).dot(&s.xdot) - pl.value)
    }

    pub fn vector_field(&self, s: &ReducedState) -> Result<ReducedField> {
        self.vector_field_from(s, None)
    }

    /// As [`Self::vector_field`], seeding the `χ` solve (warm start).
    pub fn vector_field_from(&self, s: &ReducedState, seed: Option<&AlgebraVector>) -> Result<ReducedField> {
        let (pl, chi) = self.routhian_jet(s, seed)?;
        let n = self.shape_dim();
        let nudot = &self.group().inf_coadjoint(&chi, &s.nu)? * self.side.sign();
        let r_x = pl.grad_z.rows(0, n);
        let r_vv = pl.hess_zz.view((n, n), (n, n)).into_owned();
        let r_vx = pl.hess_zz.view((n, 0), (n, n));
        let r_vnu = pl.hess_zb.view((n, 0), (n, s.nu.len()));
        let rhs = r_x - r_vx * &s.xdot - r_vnu * &nudot.0;
        let xddot = numerics::solve_dense(&r_vv, &rhs, "∂²R/∂ẋ²")
            .map_err(|e| Error::regularity("Routhian regularity (det ∂²R/∂ẋ²)", e))?;
        Ok(ReducedField {
            xdot: s.xdot.clone(),
            xddot,
            nudot,
            chi,
        })
    }

    pub fn integrate(&self, s0: &ReducedState, t_end: f64, stepper: StepperChoice) -> Result<Trajectory<ReducedState>> {
        self.check(s0)?;
        let (n, d) = (self.shape_dim(), self.group().dim());
        // χ at the initial state must exist before stepping.
        let warm = RefCell::new(self.vector_field(s0)?.chi);
        let traj = numerics::integrate_ode(
            |_, y| {
                let s = ReducedState::from_vector(y, n, d)?;
                let seed = warm.borrow().clone();
                let f = self.vector_field_from(&s, Some(&seed))?;
                *warm.borrow_mut() = f.chi.clone();
                Ok(f.to_vector())
            },
            &s0.to_vector(),
            t_end,
            stepper,
        )?;
        traj.try_map(|y| ReducedState::from_vector(y, n, d))
    }

    pub fn monitor(&self, traj: &Trajectory<ReducedState>) -> Result<InvariantReport> {
        let energies = traj.states.iter().map(|s| self.energy(s)).collect::<Result<Vec<_>>>()?;
        let energy_drift = energies.iter().map(|e| (e - energies[0]).abs()).fold(0.0, f64::max);
        let group = self.group();
        let casimir_drift = traj.states.first().and_then(|s| group.casimir(&s.nu)).map(|c0| {
            traj.states
                .iter()
                .map(|s| group.casimir(&s.nu).map_or(f64::INFINITY, |c| (c - c0).abs()))
                .fold(0.0, f64::max)
        });
        Ok(InvariantReport {
            energy_drift,
            casimir_drift,
        })
    }

    /// `χ` along a reduced trajectory, warm-started from sample to sample.
    pub fn chi_along(&self, traj: &Trajectory<ReducedState>) -> Result<Vec<AlgebraVector>> {
        let l = self.lagrangian.as_ref();
        let mut seed = AlgebraVector::zeros(self.group().dim());
        let mut out = Vec::with_capacity(traj.len());
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let chi = AlgebraVector(
                solve_chi_from(l, &s.x, &s.xdot, &s.nu, &seed)
                    .map_err(|e| Error::at_time(*t, e))?
                    .root,
            );
            seed = chi.clone();
            out.push(chi);
        }
        Ok(out)
    }

    /// Group curve with `g(0) = g0` and `ġ = gχ` (left) or `ġ = χg` (right).
    ///
    /// Uses a fourth-order Magnus step over pairs of samples
    /// `exp(∫χ + (H²/12)[χ_a, χ_b])`, with the integral from the quadratic
    /// interpolant of the three samples.
    pub fn reconstruct(&self, traj: &Trajectory<ReducedState>, g0: &GroupElement) -> Result<Vec<GroupElement>> {
        let chis = self.chi_along(traj)?;
        reconstruct_curve(self.group(), self.side, &traj.times, &chis, g0)
    }
}

/// Integrates `ġ = gξ(t)` (or `ξ(t)g`) through the samples `ξ(tᵢ)`.
pub fn reconstruct_curve(
    group: &LieGroup,
    side: Side,
    times: &[f64],
    xis: &[AlgebraVector],
    g0: &GroupElement,
) -> Result<Vec<GroupElement>> {
    check_dim("algebra samples", times.len(), xis.len())?;
    group.validate(g0)?;
    let mut stepper = GroupStepper::new(group.clone());
    let mut out = Vec::with_capacity(times.len());
    out.push(g0.clone());
    if times.len() < 2 {
        return Ok(out);
    }
    let mut apply = |g: &GroupElement, omega: &AlgebraVector| match side {
        Side::Left => stepper.step(g, omega, 1.0),
        Side::Right => stepper.step_left(g, omega, 1.0),
    };
    let bracket_term = |a: &AlgebraVector, b: &AlgebraVector, h: f64| -> Result<AlgebraVector> {
        let br = group.bracket(a, b)?;
        Ok(match side {
            Side::Left => &br * (h * h / 12.0),
            Side::Right => &br * (-h * h / 12.0),
        })
    };
    let mut i = 0;
    while i + 1 < times.len() {
        let g = out[i].clone();
        if i + 2 < times.len() {
            let (t0, t1, t2) = (times[i], times[i + 1], times[i + 2]);
            let w = quadratic_weights([t0, t1, t2], t0, t1);
            let w_full = quadratic_weights([t0, t1, t2], t0, t2);
            let int_half = weighted(&[&xis[i], &xis[i + 1], &xis[i + 2]], &w);
            let int_full = weighted(&[&xis[i], &xis[i + 1], &xis[i + 2]], &w_full);
            let mid = &int_half + &bracket_term(&xis[i], &xis[i + 1], t1 - t0)?;
            let full = &int_full + &bracket_term(&xis[i], &xis[i + 2], t2 - t0)?;
            out.push(apply(&g, &mid)?);
            out.push(apply(&g, &full)?);
            i += 2;
        } else {
            let (t0, t1) = (times[i], times[i + 1]);
            let int = if i >= 1 {
                let w = quadratic_weights([times[i - 1], t0, t1], t0, t1);
                weighted(&[&xis[i - 1], &xis[i], &xis[i + 1]], &w)
            } else {
                &(&xis[i] + &xis[i + 1]) * (0.5 * (t1 - t0))
            };
            let omega = &int + &bracket_term(&xis[i], &xis[i + 1], t1 - t0)?;
            out.push(apply(&g, &omega)?);
            i += 1;
        }
    }
    Ok(out)
}

/// `∫_a^b ℓ_k(t) dt` for the Lagrange basis on three nodes (3-point Gauss, exact).
fn quadratic_weights(nodes: [f64; 3], a: f64, b: f64) -> [f64; 3] {
    let gauss = [(-(0.6f64).sqrt(), 5.0 / 9.0), (0.0, 8.0 / 9.0), ((0.6f64).sqrt(), 5.0 / 9.0)];
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    let mut w = [0.0; 3];
    for (x, gw) in gauss {
        let t = c + r * x;
        for k in 0..3 {
            let mut basis = 1.0;
            for j in 0..3 {
                if j != k {
                    basis *= (t - nodes[j]) / (nodes[k] - nodes[j]);
                }
            }
            w[k] += r * gw * basis;
        }
    }
    w
}

fn weighted(xs: &[&AlgebraVector], w: &[f64; 3]) -> AlgebraVector {
    let mut out = xs[0] * w[0];
    for k in 1..3 {
        out = &out + &(xs[k] * w[k]);
    }
    out
}

type ValueFn = Arc<dyn Fn(&DVector<f64>, &DVector<f64>, &AlgebraVector) -> f64 + Send + Sync>;
type PotentialFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// An invariant Lagrangian given by a closure, with finite-difference jets.
#[derive(Clone)]
pub struct ClosureInvariantLagrangian {
    shape_dim: usize,
    group: LieGroup,
    value: ValueFn,
    potential: Option<PotentialFn>,
}

impl ClosureInvariantLagrangian {
    pub fn new<F>(shape_dim: usize, group: LieGroup, value: F) -> Self
    where
        F: Fn(&DVector<f64>, &DVector<f64>, &AlgebraVector) -> f64 + Send + Sync + 'static,
    {
        Self {
            shape_dim,
            group,
            value: Arc::new(value),
            potential: None,
        }
    }

    /// Marks the Lagrangian as mechanical with the given potential.
    pub fn with_potential<V>(mut self, v: V) -> Self
    where
        V: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        self.potential = Some(Arc::new(v));
        self
    }
}

impl InvariantLagrangian for ClosureInvariantLagrangian {
    fn shape_dim(&self) -> usize {
        self.shape_dim
    }

    fn group(&self) -> &LieGroup {
        &self.group
    }

    fn value(&self, x: &DVector<f64>, xdot: &DVector<f64>, xi: &AlgebraVector) -> f64 {
        (self.value)(x, xdot, xi)
    }

    fn potential(&self, x: &DVector<f64>) -> Option<f64> {
        self.potential.as_ref().map(|v| v(x))
    }
}

/// `½ wᵀ M w − V(x)` with `w = (ẋ, ξ)` and a constant symmetric positive-definite `M`.
#[derive(Clone, Debug)]
pub struct QuadraticLagrangian {
    shape_dim: usize,
    group: LieGroup,
    metric: DMatrix<f64>,
    potential_coeffs: DVector<f64>,
}

impl QuadraticLagrangian {
    /// Potential `V(x) = Σ cᵢ (1 − cos xᵢ)`.
    pub fn new(shape_dim: usize, group: LieGroup, metric: DMatrix<f64>, potential_coeffs: DVector<f64>) -> Result<Self> {
        let m = shape_dim + group.dim();
        check_dim("metric rows", m, metric.nrows())?;
        check_dim("metric columns", m, metric.ncols())?;
        check_dim("potential coefficients", shape_dim, potential_coeffs.len())?;
        if (&metric - metric.transpose()).amax() > 0.0 {
            return Err(Error::InvalidParameters("metric must be symmetric".into()));
        }
        if metric.clone().cholesky().is_none() {
            return Err(Error::InvalidParameters("metric must be positive definite".into()));
        }
        Ok(Self {
            shape_dim,
            group,
            metric,
            potential_coeffs,
        })
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }
}

impl InvariantLagrangian for QuadraticLagrangian {
    fn shape_dim(&self) -> usize {
        self.shape_dim
    }

    fn group(&self) -> &LieGroup {
        &self.group
    }

    fn value(&self, x: &DVector<f64>, xdot: &DVector<f64>, xi: &AlgebraVector) -> f64 {
        let w = stack(&[xdot, &xi.0]);
        0.5 * w.dot(&(&self.metric * &w)) - self.potential(x).unwrap_or(0.0)
    }

    fn jet(&self, x: &DVector<f64>, xdot: &DVector<f64>, xi: &AlgebraVector) -> Result<Jet> {
        let s = self.shape_dim;
        let d = xi.len();
        let w = stack(&[xdot, &xi.0]);
        let mw = &self.metric * &w;
        let mut grad = DVector::zeros(2 * s + d);
        let mut hess = DMatrix::zeros(2 * s + d, 2 * s + d);
        for i in 0..s {
            grad[i] = -self.potential_coeffs[i] * x[i].sin();
            hess[(i, i)] = -self.potential_coeffs[i] * x[i].cos();
        }
        grad.rows_mut(s, s + d).copy_from(&mw);
        hess.view_mut((s, s), (s + d, s + d)).copy_from(&self.metric);
        Ok(Jet {
            value: 0.5 * w.dot(&mw) - self.potential(x).unwrap_or(0.0),
            grad,
            hess,
        })
    }

    fn potential(&self, x: &DVector<f64>) -> Option<f64> {
        Some(
            x.iter()
                .zip(self.potential_coeffs.iter())
                .map(|(xi, c)| c * (1.0 - xi.cos()))
                .sum(),
        )
    }
}
