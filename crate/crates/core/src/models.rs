//! Two worked systems: a rigid body carrying a rotor on its third principal
//! axis (`S¹ × SO(3)`), and two planar bodies joined at their centres of mass
//! (`S¹ × SE(2)`), each with an unreduced coordinate model to check the
//! reductions against.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{CoVector, GroupElement, LieGroup};
use crate::maglag::MagLagState;
use crate::numerics::{self, StepperChoice, Trajectory};
use crate::routh::{self, QuadraticLagrangian, ReducedRouthSystem, ReducedState, Side};
use crate::semidirect::{self, OrbitChartSystem, Se2CylinderChart, SemiDirectLagrangian, StageEquivalence};

/// Registered model names with a one-line description.
pub const MODELS: &[(&str, &str)] = &[
    ("rotor", "rigid body with a rotor on its third principal axis, S¹ × SO(3)"),
    ("beanie", "two planar rigid bodies joined at their centres of mass, S¹ × SE(2)"),
];

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameters(format!("{name} must be positive, got {v}")))
    }
}

/// Principal moments of the body `I` and of the rotor `J` (kg·m²).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotorParams {
    pub i: [f64; 3],
    pub j: [f64; 3],
}

impl Default for RotorParams {
    fn default() -> Self {
        Self {
            i: [3.0, 2.0, 1.0],
            j: [0.0, 0.0, 1.0],
        }
    }
}

impl RotorParams {
    /// `Iᵢ > 0`, `Jᵢ ≥ 0` and `J₃ > 0`.
    pub fn validate(&self) -> Result<()> {
        for (k, v) in self.i.iter().enumerate() {
            positive(&format!("I{}", k + 1), *v)?;
        }
        for (k, v) in self.j.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::InvalidParameters(format!("J{} must be non-negative, got {v}", k + 1)));
            }
        }
        positive("J3", self.j[2])
    }

    /// `λᵢ = Iᵢ + Jᵢ`
    pub fn lambda(&self) -> [f64; 3] {
        [self.i[0] + self.j[0], self.i[1] + self.j[1], self.i[2] + self.j[2]]
    }

    /// `ℓ(x, ẋ, ω) = ½(λ₁ω₁² + λ₂ω₂² + λ₃ω₃² + J₃ẋ²) + J₃ẋω₃`.
    pub fn lagrangian(&self) -> Result<QuadraticLagrangian> {
        self.validate()?;
        let l = self.lambda();
        let j3 = self.j[2];
        // order (ẋ, ω₁, ω₂, ω₃)
        #[rustfmt::skip]
        let metric = DMatrix::from_row_slice(4, 4, &[
            j3,  0.0,  0.0,  j3,
            0.0, l[0], 0.0,  0.0,
            0.0, 0.0,  l[1], 0.0,
            j3,  0.0,  0.0,  l[2],
        ]);
        QuadraticLagrangian::new(1, LieGroup::so3(), metric, DVector::zeros(1))
    }

    /// `ℓ` evaluated directly from the inertia tensors.
    pub fn lagrangian_value(&self, xdot: f64, omega: &Vector3<f64>) -> f64 {
        let l = self.lambda();
        let j3 = self.j[2];
        0.5 * (l[0] * omega[0] * omega[0] + l[1] * omega[1] * omega[1] + l[2] * omega[2] * omega[2] + j3 * xdot * xdot)
            + j3 * xdot * omega[2]
    }

    /// Body angular momentum `𝔽₂ℓ`.
    pub fn body_momentum(&self, xdot: f64, omega: &Vector3<f64>) -> Vector3<f64> {
        let l = self.lambda();
        Vector3::new(l[0] * omega[0], l[1] * omega[1], l[2] * omega[2] + self.j[2] * xdot)
    }
}

/// Reduced rotor system at momentum `m0` (left invariance on SO(3)).
pub fn rotor_reduced_system(params: &RotorParams, m0: &CoVector) -> Result<ReducedRouthSystem> {
    ReducedRouthSystem::new(Arc::new(params.lagrangian()?), m0.clone(), Side::Left)
}

/// `R = R_z(φ) R_x(θ) R_z(ψ)`.
pub fn euler_zxz_matrix(angles: &[f64]) -> Matrix3<f64> {
    let rz = |a: f64| {
        let (s, c) = a.sin_cos();
        Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    };
    let (s, c) = angles[1].sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c);
    rz(angles[0]) * rx * rz(angles[2])
}

/// Body angular velocity `ω` with `[ω]× = RᵀṘ` for Z-X-Z Euler angles.
pub fn euler_zxz_body_rates(angles: &[f64], rates: &[f64]) -> Vector3<f64> {
    let (st, ct) = angles[1].sin_cos();
    let (sp, cp) = angles[2].sin_cos();
    let (dphi, dth, dpsi) = (rates[0], rates[1], rates[2]);
    Vector3::new(
        dphi * st * sp + dth * cp,
        dphi * st * cp - dth * sp,
        dphi * ct + dpsi,
    )
}

/// Largest `|cos θ|` accepted by the Euler-angle model.
pub const EULER_CHART_LIMIT: f64 = 0.99;

/// Step of the finite-difference Euler–Lagrange oracle.
pub const ORACLE_STEP: f64 = 2e-3;

/// Unreduced rotor in coordinates `q = (φ, θ, ψ, x)` (Z-X-Z Euler angles and rotor angle).
#[derive(Clone, Copy, Debug)]
pub struct RotorEulerModel {
    pub params: RotorParams,
}

impl RotorEulerModel {
    pub fn new(params: RotorParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn lagrangian(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> f64 {
        let omega = euler_zxz_body_rates(q.as_slice(), qdot.as_slice());
        self.params.lagrangian_value(qdot[3], &omega)
    }

    fn guard(&self, q: &DVector<f64>) -> Result<()> {
        let c = q[1].cos();
        if c.abs() >= EULER_CHART_LIMIT {
            return Err(Error::ChartSingularity(format!(
                "|cos θ| = {:.4} ≥ {EULER_CHART_LIMIT}: Z-X-Z Euler angles are near gimbal lock; re-chart the state",
                c.abs()
            )));
        }
        Ok(())
    }

    /// Euler–Lagrange accelerations from values of `L` only.
    pub fn accelerations(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        self.guard(q)?;
        numerics::fd_euler_lagrange(|q, v| self.lagrangian(q, v), q, qdot, ORACLE_STEP)
    }

    /// `(x, ẋ, m)` with `m` the body angular momentum.
    pub fn project(&self, s: &MagLagState) -> (f64, f64, Vector3<f64>) {
        let omega = euler_zxz_body_rates(s.q.as_slice(), s.v.as_slice());
        (s.q[3], s.v[3], self.params.body_momentum(s.v[3], &omega))
    }

    /// Spatial angular momentum `R m`, the value of the momentum map.
    pub fn spatial_momentum(&self, s: &MagLagState) -> Vector3<f64> {
        euler_zxz_matrix(s.q.as_slice()) * self.project(s).2
    }

    /// Energy `½ wᵀMw` (no potential).
    pub fn energy(&self, s: &MagLagState) -> f64 {
        self.lagrangian(&s.q, &s.v)
    }

    /// Full state with the given orientation, rotor angle and rate, and body momentum `m`.
    pub fn state_from_momentum(&self, orientation: &[f64; 3], x: f64, xdot: f64, m: &Vector3<f64>) -> Result<MagLagState> {
        let l = self.params.lagrangian()?;
        let chi = routh::solve_chi(&l, &DVector::from_element(1, x), &DVector::from_element(1, xdot), &CoVector::from_slice(m.as_slice()))?;
        let cols: Vec<Vector3<f64>> = (0..3)
            .map(|k| {
                let mut e = [0.0; 3];
                e[k] = 1.0;
                euler_zxz_body_rates(orientation, &e)
            })
            .collect();
        let rates = numerics::solve_dense(
            &DMatrix::from_fn(3, 3, |r, c| cols[c][r]),
            &DVector::from_column_slice(chi.0.as_slice()),
            "Euler rate map",
        )
        .map_err(|_| Error::ChartSingularity("Euler rate map is singular at this orientation".into()))?;
        let q = [orientation[0], orientation[1], orientation[2], x];
        let v = [rates[0], rates[1], rates[2], xdot];
        let s = MagLagState::from_slices(&q, &v, &[]);
        self.guard(&s.q)?;
        Ok(s)
    }

    pub fn integrate(&self, s0: &MagLagState, t_end: f64, stepper: StepperChoice) -> Result<Trajectory<MagLagState>> {
        let traj = numerics::integrate_ode(
            |_, y| {
                let s = MagLagState::from_vector(y, 4, 0)?;
                let acc = self.accelerations(&s.q, &s.v)?;
                Ok(crate::maglag::stack(&[&s.v, &acc]))
            },
            &s0.to_vector(),
            t_end,
            stepper,
        )?;
        traj.try_map(|y| MagLagState::from_vector(y, 4, 0))
    }
}

/// `V(φ) = c(1 − cos φ)`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosinePotential {
    pub c: f64,
}

impl CosinePotential {
    pub fn value(&self, phi: f64) -> f64 {
        self.c * (1.0 - phi.cos())
    }

    pub fn derivative(&self, phi: f64) -> f64 {
        self.c * phi.sin()
    }
}

/// Mass `m` (kg), moments `I₁`, `I₂` (kg·m²) and the relative potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeanieParams {
    pub m: f64,
    pub i1: f64,
    pub i2: f64,
    pub potential: CosinePotential,
}

fn default_potential() -> CosinePotential {
    CosinePotential { c: 1.0 }
}

impl Default for BeanieParams {
    fn default() -> Self {
        Self {
            m: 1.0,
            i1: 2.0,
            i2: 1.0,
            potential: default_potential(),
        }
    }
}

impl BeanieParams {
    pub fn validate(&self) -> Result<()> {
        positive("m", self.m)?;
        positive("I1", self.i1)?;
        positive("I2", self.i2)?;
        if !self.potential.c.is_finite() {
            return Err(Error::InvalidParameters("potential coefficient must be finite".into()));
        }
        Ok(())
    }

    /// `ℓ(φ, φ̇, θ̇, w) = ½m|w|² + ½I₁θ̇² + ½I₂(θ̇ + φ̇)² − V(φ)` on `TS¹ × se(2)`.
    pub fn lagrangian(&self) -> Result<SemiDirectLagrangian> {
        self.validate()?;
        let (m, i1, i2) = (self.m, self.i1, self.i2);
        // order (φ̇, θ̇, u, v)
        #[rustfmt::skip]
        let metric = DMatrix::from_row_slice(4, 4, &[
            i2,  i2,      0.0, 0.0,
            i2,  i1 + i2, 0.0, 0.0,
            0.0, 0.0,     m,   0.0,
            0.0, 0.0,     0.0, m,
        ]);
        let ql = QuadraticLagrangian::new(1, LieGroup::se2(), metric, DVector::from_element(1, self.potential.c))?;
        SemiDirectLagrangian::new(Arc::new(ql))
    }

    /// `L = ½m(ẋ² + ẏ²) + ½I₁θ̇² + ½I₂(θ̇ + φ̇)² − V(φ)` in `q = (φ, θ, x, y)`.
    pub fn full_lagrangian(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> f64 {
        0.5 * self.m * (qdot[2] * qdot[2] + qdot[3] * qdot[3])
            + 0.5 * self.i1 * qdot[1] * qdot[1]
            + 0.5 * self.i2 * (qdot[1] + qdot[0]).powi(2)
            - self.potential.value(q[0])
    }
}

/// Normal form of the unreduced equations: `(φ̈, θ̈, ẍ, ÿ)`.
pub fn beanie_full_field(params: &BeanieParams, s: &MagLagState) -> DVector<f64> {
    let dv = params.potential.derivative(s.q[0]);
    DVector::from_column_slice(&[
        -(params.i1 + params.i2) / (params.i1 * params.i2) * dv,
        dv / params.i1,
        0.0,
        0.0,
    ])
}

/// `ν = (I₁ + I₂)θ̇ + I₂φ̇` and `b = e^{−iθ} m(ẋ + iẏ)` as a point of `𝔤* × V*`.
pub fn beanie_momenta(params: &BeanieParams, s: &MagLagState) -> CoVector {
    let nu = (params.i1 + params.i2) * s.v[1] + params.i2 * s.v[0];
    let (sn, cs) = s.q[1].sin_cos();
    let (px, py) = (params.m * s.v[2], params.m * s.v[3]);
    CoVector::from_slice(&[nu, cs * px + sn * py, -sn * px + cs * py])
}

/// Full state with relative angle `φ`, rate `φ̇`, pose `(θ, x, y)`, angular
/// momentum `μ` and spatial linear momentum `a`.
pub fn beanie_state_from_momentum(
    params: &BeanieParams,
    phi: f64,
    phidot: f64,
    pose: &[f64; 3],
    mu: f64,
    a: &CoVector,
) -> Result<MagLagState> {
    params.validate()?;
    crate::error::check_dim("linear momentum a", 2, a.len())?;
    let thetadot = (mu - params.i2 * phidot) / (params.i1 + params.i2);
    Ok(MagLagState::from_slices(
        &[phi, pose[0], pose[1], pose[2]],
        &[phidot, thetadot, a[0] / params.m, a[1] / params.m],
        &[],
    ))
}

/// Reduced state `(φ, φ̇, (μ, e^{−iθ}a))` matching [`beanie_state_from_momentum`].
pub fn beanie_reduced_state(phi: f64, phidot: f64, theta: f64, mu: f64, a: &CoVector) -> Result<ReducedState> {
    let b = LieGroup::se2().dual_action(&GroupElement::circle(theta), a)?;
    Ok(ReducedState::new(
        DVector::from_element(1, phi),
        DVector::from_element(1, phidot),
        CoVector::from_slice(&[mu, b[0], b[1]]),
    ))
}

/// Energy `T + V` of the unreduced beanie.
pub fn beanie_full_energy(params: &BeanieParams, s: &MagLagState) -> f64 {
    params.full_lagrangian(&s.q, &s.v) + 2.0 * params.potential.value(s.q[0])
}

pub fn integrate_beanie_full(
    params: &BeanieParams,
    s0: &MagLagState,
    t_end: f64,
    stepper: StepperChoice,
) -> Result<Trajectory<MagLagState>> {
    params.validate()?;
    let traj = numerics::integrate_ode(
        |_, y| {
            let s = MagLagState::from_vector(y, 4, 0)?;
            Ok(crate::maglag::stack(&[&s.v, &beanie_full_field(params, &s)]))
        },
        &s0.to_vector(),
        t_end,
        stepper,
    )?;
    traj.try_map(|y| MagLagState::from_vector(y, 4, 0))
}

/// The full reduction on the cylinder chart `p = (α, ν)`, `b = |a|e^{iα}`.
pub fn beanie_chart_system(params: &BeanieParams, mu: f64, a: &CoVector) -> Result<OrbitChartSystem> {
    let chart = Se2CylinderChart::new(a)?;
    OrbitChartSystem::new(&params.lagrangian()?, Arc::new(chart), &CoVector::from_slice(&[mu]), a)
}

pub fn beanie_reduced_system(params: &BeanieParams, mu: f64, a: &CoVector) -> Result<ReducedRouthSystem> {
    semidirect::check_onto(&LieGroup::se2(), a)?;
    semidirect::full_reduction(&params.lagrangian()?, &CoVector::from_slice(&[mu]), a)
}

pub fn beanie_stage_equivalence(params: &BeanieParams, mu: f64, a: &CoVector) -> Result<StageEquivalence> {
    semidirect::build_stage_equivalence(&params.lagrangian()?, &CoVector::from_slice(&[mu]), a)
}
