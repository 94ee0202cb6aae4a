//! Compatible transformations between magnetic Lagrangian systems in adapted
//! coordinates.
//!
//! Coordinates: `q` on `Q₁`, `(q, q̄)` on `Q₂`, `(q, q̄, p̄)` on `P₂` and
//! `(q, q̄, p̄, p)` on `P₁`. Given a system `L₂` on `TQ₂ ×_{Q₂} P₂`, a map `β`
//! from `P₁` to the `q̄`-momenta and a connection on `f: Q₂ → Q₁`, the map
//! `ψ(q, q̇, q̄, p̄, p) = (q, q̄, q̇, q̄̇, p̄)` fixes `q̄̇` by `∂L₂/∂q̄̇ = β`. The
//! resulting system on `TQ₁ ×_{Q₁} P₁` has
//!
//! ```text
//! L₁ = L₂∘ψ − βₐ(q̄̇ᵃ + Γᵃᵢ q̇ⁱ),   B₁ = F*B₂ + d(βₐ(dq̄ᵃ + Γᵃᵢ dqⁱ))
//! ```
//!
//! and `ψ` pulls `Ω^{L₂,B₂}` back to `Ω^{L₁,B₁}`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::maglag::{self, stack, BForm, LagrangianDerivatives, MagLagState, MagneticSystem};
use crate::numerics::{self, NewtonOptions, GRADIENT_STEP, HESSIAN_STEP};

/// Dimensions of the bundle chain `P₁ → P₂ → Q₂ → Q₁`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TransformationPair {
    /// `dim Q₁`
    pub n1: usize,
    /// Fibre dimension of `f: Q₂ → Q₁`.
    pub nbar: usize,
    /// Fibre dimension of `P₂ → Q₂`.
    pub kbar: usize,
    /// Fibre dimension of `F: P₁ → P₂`.
    pub kp: usize,
}

impl TransformationPair {
    pub fn new(n1: usize, nbar: usize, kbar: usize, kp: usize) -> Self {
        Self { n1, nbar, kbar, kp }
    }

    pub fn n2(&self) -> usize {
        self.n1 + self.nbar
    }

    pub fn k1(&self) -> usize {
        self.nbar + self.kbar + self.kp
    }

    pub fn k2(&self) -> usize {
        self.kbar
    }

    /// `2n₁ + k₁ = 2n₂ + k₂`, required for `ψ` to be a diffeomorphism.
    pub fn is_equidimensional(&self) -> bool {
        2 * self.n1 + self.k1() == 2 * self.n2() + self.k2()
    }

    /// `F`: `(q, q̄, p̄, p) ↦ (q, q̄, p̄)`.
    pub fn project_p1(&self, w: &DVector<f64>) -> DVector<f64> {
        w.rows(0, self.n1 + self.nbar + self.kbar).into_owned()
    }

    /// `f`: `(q, q̄) ↦ q`.
    pub fn project_q2(&self, q2: &DVector<f64>) -> DVector<f64> {
        q2.rows(0, self.n1).into_owned()
    }

    /// Coordinates `(q, q̄, p̄, p)` of the `P₁` point of an `L₁` state.
    pub fn p1_coords(&self, s: &MagLagState) -> DVector<f64> {
        stack(&[&s.q, &s.p])
    }

    fn split_fibre(&self, p: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        (
            p.rows(0, self.nbar).into_owned(),
            p.rows(self.nbar, self.kbar).into_owned(),
            p.rows(self.nbar + self.kbar, self.kp).into_owned(),
        )
    }
}

pub type BetaFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type ConnectionFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// `β`: `P₁` coordinates `(q, q̄, p̄, p)` to a covector on the `q̄` directions.
#[derive(Clone)]
pub struct BetaMap(pub BetaFn);

impl BetaMap {
    pub fn new<F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static>(f: F) -> Self {
        Self(Arc::new(f))
    }

    pub fn eval(&self, w: &DVector<f64>) -> DVector<f64> {
        (self.0)(w)
    }
}

/// Connection coefficients `Γᵃᵢ(q, q̄)`, a `nbar × n1` matrix, on `f`.
#[derive(Clone)]
pub struct ConnectionOnF(pub ConnectionFn);

impl ConnectionOnF {
    pub fn new<F: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static>(f: F) -> Self {
        Self(Arc::new(f))
    }

    /// `Γ ≡ 0`: the product connection `A = dq̄ ⊗ ∂/∂q̄`.
    pub fn zero(pair: TransformationPair) -> Self {
        Self::new(move |_| DMatrix::zeros(pair.nbar, pair.n1))
    }

    pub fn eval(&self, q2: &DVector<f64>) -> DMatrix<f64> {
        (self.0)(q2)
    }
}

/// `ψ` at an `L₁` state: Newton on `q̄̇ ↦ ∂L₂/∂q̄̇ − β`, seeded at `q̄̇ = 0`.
pub fn solve_psi(
    l2: &dyn MagneticSystem,
    pair: TransformationPair,
    beta: &BetaMap,
    s1: &MagLagState,
) -> Result<MagLagState> {
    solve_psi_from(l2, pair, beta, s1, &DVector::zeros(pair.nbar))
}

pub fn solve_psi_from(
    l2: &dyn MagneticSystem,
    pair: TransformationPair,
    beta: &BetaMap,
    s1: &MagLagState,
    seed: &DVector<f64>,
) -> Result<MagLagState> {
    check_shapes(l2, pair, s1)?;
    let (qbar, pbar, _) = pair.split_fibre(&s1.p);
    let target = beta.eval(&pair.p1_coords(s1));
    check_dim("β value", pair.nbar, target.len())?;
    let q2 = stack(&[&s1.q, &qbar]);
    let (n1, nb) = (pair.n1, pair.nbar);
    let deriv = |u: &DVector<f64>| l2.derivatives(&q2, &stack(&[&s1.v, u]), &pbar);
    let rep = numerics::newton_solve(
        |u| Ok(deriv(u)?.l_v.rows(n1, nb) - &target),
        |u| Ok(deriv(u)?.l_vv.view((n1, n1), (nb, nb)).into_owned()),
        seed,
        NewtonOptions::default(),
    )
    .map_err(|e| Error::regularity("f-regularity", e))?;
    Ok(MagLagState::new(q2, stack(&[&s1.v, &rep.root]), pbar))
}

fn check_shapes(l2: &dyn MagneticSystem, pair: TransformationPair, s1: &MagLagState) -> Result<()> {
    check_dim("Q₂ dimension", pair.n2(), l2.base_dim())?;
    check_dim("P₂ fibre dimension", pair.kbar, l2.fibre_dim())?;
    check_dim("Q₁ coordinates", pair.n1, s1.q.len())?;
    check_dim("Q₁ velocities", pair.n1, s1.v.len())?;
    check_dim("P₁ fibre coordinates", pair.k1(), s1.p.len())
}

/// Inverse of `ψ`: Newton on `p ↦ β(q, q̄, p̄, p) − ∂L₂/∂q̄̇`, from `p_seed`.
pub fn psi_inverse(
    l2: &dyn MagneticSystem,
    pair: TransformationPair,
    beta: &BetaMap,
    s2: &MagLagState,
    p_seed: &DVector<f64>,
) -> Result<MagLagState> {
    if !pair.is_equidimensional() {
        return Err(Error::Hypothesis("ψ is invertible only when 2n₁+k₁ = 2n₂+k₂".into()));
    }
    check_dim("P₁ fibre seed", pair.kp, p_seed.len())?;
    let (n1, nb) = (pair.n1, pair.nbar);
    let d = l2.derivatives(&s2.q, &s2.v, &s2.p)?;
    let target = d.l_v.rows(n1, nb).into_owned();
    let q = s2.q.rows(0, n1).into_owned();
    let qbar = s2.q.rows(n1, nb).into_owned();
    let w_of = |p: &DVector<f64>| stack(&[&q, &qbar, &s2.p, p]);
    let rep = numerics::newton_solve_fd(|p| Ok(beta.eval(&w_of(p)) - &target), p_seed, NewtonOptions::default())
        .map_err(|e| Error::regularity("fibrewise invertibility of β", e))?;
    Ok(MagLagState::new(
        q,
        s2.v.rows(0, n1).into_owned(),
        stack(&[&qbar, &s2.p, &rep.root]),
    ))
}

/// The system `(L₁, B₁)` on `TQ₁ ×_{Q₁} P₁` built from `L₂`, `β` and `Γ`.
#[derive(Clone)]
pub struct PulledBackSystem {
    pub pair: TransformationPair,
    pub l2: Arc<dyn MagneticSystem>,
    pub beta: BetaMap,
    pub connection: ConnectionOnF,
}

impl PulledBackSystem {
    pub fn new(pair: TransformationPair, l2: Arc<dyn MagneticSystem>, beta: BetaMap, connection: ConnectionOnF) -> Result<Self> {
        check_dim("Q₂ dimension", pair.n2(), l2.base_dim())?;
        check_dim("P₂ fibre dimension", pair.kbar, l2.fibre_dim())?;
        Ok(Self {
            pair,
            l2,
            beta,
            connection,
        })
    }

    pub fn psi(&self, s1: &MagLagState) -> Result<MagLagState> {
        solve_psi(self.l2.as_ref(), self.pair, &self.beta, s1)
    }

    pub fn psi_inverse(&self, s2: &MagLagState, p_seed: &DVector<f64>) -> Result<MagLagState> {
        psi_inverse(self.l2.as_ref(), self.pair, &self.beta, s2, p_seed)
    }

    fn q2_of(&self, w: &DVector<f64>) -> DVector<f64> {
        w.rows(0, self.pair.n2()).into_owned()
    }

    /// `L₁` at an `L₁` state.
    pub fn lagrangian_at(&self, s1: &MagLagState) -> Result<f64> {
        let s2 = self.psi(s1)?;
        let w = self.pair.p1_coords(s1);
        let beta = self.beta.eval(&w);
        let gamma = self.connection.eval(&self.q2_of(&w));
        let ubar = s2.v.rows(self.pair.n1, self.pair.nbar);
        Ok(self.l2.lagrangian(&s2.q, &s2.v, &s2.p) - beta.dot(&(ubar + gamma * &s1.v)))
    }

    /// Components of the 1-form `βₐ(dq̄ᵃ + Γᵃᵢdqⁱ)` over `(q, q̄, p̄, p)`.
    fn one_form(&self, w: &DVector<f64>) -> DVector<f64> {
        let pr = self.pair;
        let beta = self.beta.eval(w);
        let gamma = self.connection.eval(&self.q2_of(w));
        let mut c = DVector::zeros(pr.n1 + pr.k1());
        c.rows_mut(0, pr.n1).copy_from(&(gamma.transpose() * &beta));
        c.rows_mut(pr.n1, pr.nbar).copy_from(&beta);
        c
    }

    /// `d(βₐ(dq̄ᵃ + Γᵃᵢdqⁱ))` as a full antisymmetric matrix over `(q, q̄, p̄, p)`.
    pub fn exact_part(&self, w: &DVector<f64>) -> Result<DMatrix<f64>> {
        let jac = numerics::fd_jacobian(|w| Ok(self.one_form(w)), w, HESSIAN_STEP)?;
        Ok(jac.transpose() - jac)
    }

    /// `min |det ∂β/∂p|` over the given `P₁` points; zero means `β` fails to
    /// be invertible along the fibres of `F`.
    pub fn beta_fibre_regularity(&self, points: &[DVector<f64>]) -> Result<f64> {
        let pr = self.pair;
        if pr.kp != pr.nbar {
            return Ok(0.0);
        }
        let off = pr.n1 + pr.nbar + pr.kbar;
        let mut worst = f64::INFINITY;
        for w in points {
            let jac = numerics::fd_jacobian(|w| Ok(self.beta.eval(w)), w, GRADIENT_STEP)?;
            let det = jac.view((0, off), (pr.nbar, pr.kp)).into_owned().determinant();
            worst = worst.min(det.abs());
        }
        Ok(worst)
    }

    /// Verifies `ψ*Ω^{L₂,B₂} = Ω^{L₁,B₁}`, `ψ*E_{L₂} = E_{L₁}` and the momentum
    /// condition at every sample, using `pairs` random tangent pairs each.
    pub fn verify<R: Rng + ?Sized>(&self, samples: &[MagLagState], pairs: usize, rng: &mut R) -> Result<SymplecticReport> {
        let mut report = symplectic_residual(self, self.l2.as_ref(), |s| self.psi(s), samples, pairs, rng)?;
        for s in samples {
            let s2 = self.psi(s)?;
            let d = self.l2.derivatives(&s2.q, &s2.v, &s2.p)?;
            let mismatch = (d.l_v.rows(self.pair.n1, self.pair.nbar) - self.beta.eval(&self.pair.p1_coords(s))).amax();
            report.max_residual_momentum = report.max_residual_momentum.max(mismatch);
        }
        Ok(report)
    }
}

impl MagneticSystem for PulledBackSystem {
    fn base_dim(&self) -> usize {
        self.pair.n1
    }

    fn fibre_dim(&self) -> usize {
        self.pair.k1()
    }

    fn lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>) -> f64 {
        self.lagrangian_at(&MagLagState::new(q.clone(), v.clone(), p.clone()))
            .unwrap_or(f64::NAN)
    }

    fn bform(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<BForm> {
        let pr = self.pair;
        let w = stack(&[q, p]);
        let mut full = self.exact_part(&w)?;
        let (_, pbar, _) = pr.split_fibre(p);
        let q2 = self.q2_of(&w);
        let b2 = self.l2.bform(&q2, &pbar)?.full();
        let m2 = pr.n2() + pr.kbar;
        let mut view = full.view_mut((0, 0), (m2, m2));
        view += &b2;
        BForm::from_full(&full, pr.n1)
    }

    /// Chain rule through `ψ`, with `∂q̄̇/∂(·)` from the implicit function theorem.
    fn derivatives(&self, q: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>) -> Result<LagrangianDerivatives> {
        let pr = self.pair;
        let (n1, nb, kb) = (pr.n1, pr.nbar, pr.kbar);
        let s1 = MagLagState::new(q.clone(), v.clone(), p.clone());
        let s2 = self.psi(&s1)?;
        let d2 = self.l2.derivatives(&s2.q, &s2.v, &s2.p)?;
        let w = stack(&[q, p]);
        let m = n1 + pr.k1();
        let beta = self.beta.eval(&w);
        let gamma = self.connection.eval(&self.q2_of(&w));
        let ubar = s2.v.rows(n1, nb).into_owned();

        // second derivatives of L₂ with one velocity slot, laid out over (q, q̄, p̄, p)
        let mut l2_vw = DMatrix::zeros(pr.n2(), m);
        l2_vw.view_mut((0, 0), (pr.n2(), pr.n2())).copy_from(&d2.l_vq);
        l2_vw.view_mut((0, pr.n2()), (pr.n2(), kb)).copy_from(&d2.l_vp);
        let l_uu = d2.l_vv.view((n1, n1), (nb, nb)).into_owned();
        let l_qdot_u = d2.l_vv.view((0, n1), (n1, nb)).into_owned();
        let k_inv = {
            let lu = l_uu.clone().lu();
            let det = lu.determinant();
            if !det.is_finite() || det.abs() <= numerics::DET_TOL {
                return Err(Error::regularity("f-regularity", Error::Singular { which: "∂²L₂/∂q̄̇²", det }));
            }
            lu.try_inverse().ok_or(Error::Singular { which: "∂²L₂/∂q̄̇²", det })?
        };
        let j_beta = numerics::fd_jacobian(|w| Ok(self.beta.eval(w)), &w, GRADIENT_STEP)?;
        let du_dw = &k_inv * (&j_beta - l2_vw.rows(n1, nb));
        let du_dqdot = -(&k_inv * d2.l_vv.view((n1, 0), (nb, n1)));
        let j_gamma_beta = numerics::fd_jacobian(
            |w| Ok(self.connection.eval(&self.q2_of(w)).transpose() * self.beta.eval(w)),
            &w,
            GRADIENT_STEP,
        )?;

        let l_vv = d2.l_vv.view((0, 0), (n1, n1)) + &l_qdot_u * du_dqdot;
        let l_vw = l2_vw.rows(0, n1) + &l_qdot_u * &du_dw - j_gamma_beta;

        let coupling = |w: &DVector<f64>| {
            let b = self.beta.eval(w);
            let g = self.connection.eval(&self.q2_of(w));
            b.dot(&(&ubar + g * v))
        };
        let grad_coupling = numerics::fd_gradient(coupling, &w, GRADIENT_STEP)?;
        let mut grad_w = DVector::zeros(m);
        grad_w.rows_mut(0, pr.n2()).copy_from(&d2.l_q);
        grad_w.rows_mut(pr.n2(), kb).copy_from(&d2.l_p);
        grad_w -= grad_coupling;

        Ok(LagrangianDerivatives {
            l_q: grad_w.rows(0, n1).into_owned(),
            l_v: d2.l_v.rows(0, n1) - gamma.transpose() * &beta,
            l_p: grad_w.rows(n1, pr.k1()).into_owned(),
            l_vv: (&l_vv + l_vv.transpose()) * 0.5,
            l_vq: l_vw.columns(0, n1).into_owned(),
            l_vp: l_vw.columns(n1, pr.k1()).into_owned(),
        })
    }
}

/// Residuals of a candidate symplectomorphism between two magnetic systems.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SymplecticReport {
    pub samples: usize,
    /// `max |Ω₁(u, w) − Ω₂(Tψ u, Tψ w)|`
    pub max_residual_form: f64,
    /// `max |E₁ − E₂∘ψ|`
    pub max_residual_energy: f64,
    /// `max |∂L₂/∂q̄̇ ∘ ψ − β|`; zero when no momentum condition applies.
    pub max_residual_momentum: f64,
}

/// Forward step for the tangent map of `ψ`.
pub const TANGENT_STEP: f64 = 1e-6;

/// Compares `Ω^{L₁,B₁}` with the pull-back of `Ω^{L₂,B₂}` by an arbitrary map,
/// with `Tψ` from forward differences. Tangent components are uniform in `[-1, 1]`.
pub fn symplectic_residual<F, R>(
    sys1: &dyn MagneticSystem,
    sys2: &dyn MagneticSystem,
    psi: F,
    samples: &[MagLagState],
    pairs: usize,
    rng: &mut R,
) -> Result<SymplecticReport>
where
    F: Fn(&MagLagState) -> Result<MagLagState>,
    R: Rng + ?Sized,
{
    let (n1, k1) = (sys1.base_dim(), sys1.fibre_dim());
    let dim1 = 2 * n1 + k1;
    let mut report = SymplecticReport {
        samples: samples.len(),
        ..Default::default()
    };
    for s in samples {
        let omega1 = maglag::symplectic_matrix(sys1, s)?;
        let image = psi(s)?;
        let omega2 = maglag::symplectic_matrix(sys2, &image)?;
        let y = s.to_vector();
        let y2 = image.to_vector();
        let mut tpsi = DMatrix::zeros(y2.len(), dim1);
        for j in 0..dim1 {
            let h = TANGENT_STEP * y[j].abs().max(1.0);
            let mut yp = y.clone();
            yp[j] += h;
            let moved = psi(&MagLagState::from_vector(&yp, n1, k1)?)?.to_vector();
            tpsi.set_column(j, &((moved - &y2) / h));
        }
        let pulled = tpsi.transpose() * &omega2 * &tpsi;
        for _ in 0..pairs {
            let u = DVector::from_fn(dim1, |_, _| rng.gen_range(-1.0..1.0));
            let w = DVector::from_fn(dim1, |_, _| rng.gen_range(-1.0..1.0));
            let r = (u.dot(&(&omega1 * &w)) - u.dot(&(&pulled * &w))).abs();
            report.max_residual_form = report.max_residual_form.max(r);
        }
        let e1 = maglag::energy(sys1, s)?;
        let e2 = maglag::energy(sys2, &image)?;
        report.max_residual_energy = report.max_residual_energy.max((e1 - e2).abs());
    }
    Ok(report)
}
