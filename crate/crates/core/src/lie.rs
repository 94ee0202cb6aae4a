//! Lie group and algebra kernel for the registered instances S¹, SO(3), ℝⁿ
//! and semi-direct products `G ⋉ V` (SE(2) in particular).
//!
//! Algebra elements and dual elements are coordinate vectors relative to a
//! fixed basis; the pairing is the coordinate dot product. For SE(2) the basis
//! `(1; 1, i)` turns this into `μξ + Re(a w̄)`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;

use crate::error::{check_dim, Error, Result};

macro_rules! coordinate_vector {
    ($name:ident) => {
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name(pub DVector<f64>);

        impl $name {
            pub fn from_vec(v: Vec<f64>) -> Self {
                Self(DVector::from_vec(v))
            }

            pub fn from_slice(v: &[f64]) -> Self {
                Self(DVector::from_column_slice(v))
            }

            pub fn zeros(d: usize) -> Self {
                Self(DVector::zeros(d))
            }

            pub fn basis(d: usize, i: usize) -> Self {
                let mut v = DVector::zeros(d);
                v[i] = 1.0;
                Self(v)
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn coords(&self) -> &DVector<f64> {
                &self.0
            }

            pub fn into_inner(self) -> DVector<f64> {
                self.0
            }

            pub fn as_slice(&self) -> &[f64] {
                self.0.as_slice()
            }

            /// Max-norm.
            pub fn amax(&self) -> f64 {
                if self.0.is_empty() {
                    0.0
                } else {
                    self.0.amax()
                }
            }

            /// Splits into the leading `d` coordinates and the rest.
            pub fn split(&self, d: usize) -> (Self, Self) {
                let n = self.0.len();
                (Self(self.0.rows(0, d).into_owned()), Self(self.0.rows(d, n - d).into_owned()))
            }

            pub fn concat(&self, other: &Self) -> Self {
                let mut v = Vec::with_capacity(self.len() + other.len());
                v.extend_from_slice(self.as_slice());
                v.extend_from_slice(other.as_slice());
                Self::from_vec(v)
            }
        }

        impl From<DVector<f64>> for $name {
            fn from(v: DVector<f64>) -> Self {
                Self(v)
            }
        }

        impl Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl Add for &$name {
            type Output = $name;
            fn add(self, rhs: Self) -> $name {
                $name(&self.0 + &rhs.0)
            }
        }

        impl Sub for &$name {
            type Output = $name;
            fn sub(self, rhs: Self) -> $name {
                $name(&self.0 - &rhs.0)
            }
        }

        impl Mul<f64> for &$name {
            type Output = $name;
            fn mul(self, rhs: f64) -> $name {
                $name(&self.0 * rhs)
            }
        }

        impl Neg for &$name {
            type Output = $name;
            fn neg(self) -> $name {
                $name(-&self.0)
            }
        }
    };
}

coordinate_vector!(AlgebraVector);
coordinate_vector!(CoVector);

/// Natural pairing `⟨ν, ξ⟩`.
pub fn pair(nu: &CoVector, xi: &AlgebraVector) -> f64 {
    nu.0.dot(&xi.0)
}

#[derive(Clone, Debug, PartialEq)]
pub enum GroupElement {
    /// Angle in `[0, 2π)`.
    Circle(f64),
    Rotation(Matrix3<f64>),
    Translation(DVector<f64>),
    SemiDirect { base: Box<GroupElement>, v: DVector<f64> },
}

pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Difference of two angles mapped to `(-π, π]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

impl GroupElement {
    pub fn circle(angle: f64) -> Self {
        GroupElement::Circle(wrap_angle(angle))
    }

    pub fn semidirect(base: GroupElement, v: DVector<f64>) -> Self {
        GroupElement::SemiDirect { base: Box::new(base), v }
    }

    /// Re-orthonormalizes rotation payloads by modified Gram–Schmidt on the columns.
    pub fn reorthonormalized(&self) -> Self {
        match self {
            GroupElement::Rotation(r) => GroupElement::Rotation(gram_schmidt(r)),
            GroupElement::SemiDirect { base, v } => GroupElement::SemiDirect {
                base: Box::new(base.reorthonormalized()),
                v: v.clone(),
            },
            other => other.clone(),
        }
    }

    /// Flattened payload, for CSV output.
    pub fn flat(&self) -> Vec<f64> {
        match self {
            GroupElement::Circle(a) => vec![*a],
            GroupElement::Rotation(r) => r.iter().copied().collect(),
            GroupElement::Translation(v) => v.iter().copied().collect(),
            GroupElement::SemiDirect { base, v } => {
                let mut out = base.flat();
                out.extend(v.iter());
                out
            }
        }
    }

    pub fn as_rotation(&self) -> Option<&Matrix3<f64>> {
        match self {
            GroupElement::Rotation(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_semidirect(&self) -> Option<(&GroupElement, &DVector<f64>)> {
        match self {
            GroupElement::SemiDirect { base, v } => Some((base, v)),
            _ => None,
        }
    }
}

fn gram_schmidt(r: &Matrix3<f64>) -> Matrix3<f64> {
    let mut cols = [r.column(0).into_owned(), r.column(1).into_owned(), r.column(2).into_owned()];
    for i in 0..3 {
        for j in 0..i {
            let proj = cols[i].dot(&cols[j]);
            let cj = cols[j];
            cols[i] -= cj * proj;
        }
        cols[i] /= cols[i].norm();
    }
    Matrix3::from_columns(&cols)
}

fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
}

/// Rodrigues formula for `exp(ŵ)`.
pub fn rodrigues(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < 1e-4 {
        (
            1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        )
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = hat(w);
    Matrix3::identity() + k * a + k * k * b
}

pub type GroupRep = Arc<dyn Fn(&GroupElement) -> DMatrix<f64> + Send + Sync>;
pub type AlgebraRep = Arc<dyn Fn(&AlgebraVector) -> DMatrix<f64> + Send + Sync>;

struct SemiDirectData {
    base: LieGroup,
    vdim: usize,
    rho: GroupRep,
    /// `ρ′(e_j)` for each base basis vector.
    generators: Vec<DMatrix<f64>>,
    /// All generators antisymmetric, so `|b|²` is a Casimir of the dual action.
    orthogonal: bool,
}

#[derive(Clone)]
enum GroupKind {
    Circle,
    So3,
    Euclidean(usize),
    SemiDirect(Arc<SemiDirectData>),
}

/// One of the registered Lie groups together with its algebra structure.
#[derive(Clone)]
pub struct LieGroup {
    kind: GroupKind,
    name: Arc<str>,
}

impl fmt::Debug for LieGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LieGroup({}, dim {})", self.name, self.dim())
    }
}

const ELEMENT_TOL: f64 = 1e-10;

impl LieGroup {
    pub fn circle() -> Self {
        Self {
            kind: GroupKind::Circle,
            name: "S1".into(),
        }
    }

    pub fn so3() -> Self {
        Self {
            kind: GroupKind::So3,
            name: "SO3".into(),
        }
    }

    pub fn euclidean(n: usize) -> Self {
        Self {
            kind: GroupKind::Euclidean(n),
            name: format!("R{n}").into(),
        }
    }

    /// SE(2) = S¹ ⋉ ℝ², with ℝ² ≅ ℂ and `θ` acting by `e^{iθ}`.
    pub fn se2() -> Self {
        let rho: GroupRep = Arc::new(|g| match g {
            GroupElement::Circle(t) => {
                let (s, c) = t.sin_cos();
                DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
            }
            _ => DMatrix::identity(2, 2),
        });
        let rho_prime: AlgebraRep = Arc::new(|xi| DMatrix::from_row_slice(2, 2, &[0.0, -xi[0], xi[0], 0.0]));
        make_semidirect(&LieGroup::circle(), rho, rho_prime, 2)
            .expect("rotation representation is consistent")
            .with_name("SE2")
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            GroupKind::Circle => 1,
            GroupKind::So3 => 3,
            GroupKind::Euclidean(n) => *n,
            GroupKind::SemiDirect(d) => d.base.dim() + d.vdim,
        }
    }

    pub fn is_abelian(&self) -> bool {
        matches!(self.kind, GroupKind::Circle | GroupKind::Euclidean(_))
    }

    pub fn is_semidirect(&self) -> bool {
        matches!(self.kind, GroupKind::SemiDirect(_))
    }

    fn sd(&self) -> Result<&SemiDirectData> {
        match &self.kind {
            GroupKind::SemiDirect(d) => Ok(d),
            _ => Err(Error::NotSemiDirect),
        }
    }

    /// Base group `G` of a semi-direct product `G ⋉ V`.
    pub fn base(&self) -> Result<&LieGroup> {
        Ok(&self.sd()?.base)
    }

    /// Dimension of `V` for a semi-direct product.
    pub fn vdim(&self) -> Result<usize> {
        Ok(self.sd()?.vdim)
    }

    pub fn identity(&self) -> GroupElement {
        match &self.kind {
            GroupKind::Circle => GroupElement::Circle(0.0),
            GroupKind::So3 => GroupElement::Rotation(Matrix3::identity()),
            GroupKind::Euclidean(n) => GroupElement::Translation(DVector::zeros(*n)),
            GroupKind::SemiDirect(d) => GroupElement::semidirect(d.base.identity(), DVector::zeros(d.vdim)),
        }
    }

    pub fn validate(&self, g: &GroupElement) -> Result<()> {
        match (&self.kind, g) {
            (GroupKind::Circle, GroupElement::Circle(a)) => {
                if a.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidElement("non-finite angle".into()))
                }
            }
            (GroupKind::So3, GroupElement::Rotation(r)) => {
                let orth = (r.transpose() * r - Matrix3::identity()).amax();
                let det = r.determinant();
                if orth.is_nan() || orth > ELEMENT_TOL {
                    Err(Error::InvalidElement(format!("rotation not orthogonal (|RᵀR - I| = {orth:.3e})")))
                } else if det.is_nan() || (det - 1.0).abs() > ELEMENT_TOL {
                    Err(Error::InvalidElement(format!("rotation determinant {det}")))
                } else {
                    Ok(())
                }
            }
            (GroupKind::Euclidean(n), GroupElement::Translation(v)) => {
                check_dim("translation", *n, v.len())?;
                if v.iter().all(|x| x.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::InvalidElement("non-finite translation".into()))
                }
            }
            (GroupKind::SemiDirect(d), GroupElement::SemiDirect { base, v }) => {
                d.base.validate(base)?;
                check_dim("semi-direct vector part", d.vdim, v.len())?;
                if v.iter().all(|x| x.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::InvalidElement("non-finite vector part".into()))
                }
            }
            _ => Err(Error::InvalidElement(format!("payload does not belong to {}", self.name))),
        }
    }

    fn check_algebra(&self, xi: &AlgebraVector) -> Result<()> {
        check_dim("algebra vector", self.dim(), xi.len())
    }

    fn check_dual(&self, nu: &CoVector) -> Result<()> {
        check_dim("dual vector", self.dim(), nu.len())
    }

    pub fn compose(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        self.validate(g)?;
        self.validate(h)?;
        Ok(self.compose_unchecked(g, h))
    }

    fn compose_unchecked(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        match (&self.kind, g, h) {
            (GroupKind::Circle, GroupElement::Circle(a), GroupElement::Circle(b)) => GroupElement::circle(a + b),
            (GroupKind::So3, GroupElement::Rotation(a), GroupElement::Rotation(b)) => GroupElement::Rotation(a * b),
            (GroupKind::Euclidean(_), GroupElement::Translation(a), GroupElement::Translation(b)) => {
                GroupElement::Translation(a + b)
            }
            (
                GroupKind::SemiDirect(d),
                GroupElement::SemiDirect { base: g1, v: v1 },
                GroupElement::SemiDirect { base: g2, v: v2 },
            ) => {
                let base = d.base.compose_unchecked(g1, g2);
                let v = v1 + (d.rho)(g1) * v2;
                GroupElement::semidirect(base, v)
            }
            _ => unreachable!("validated payloads"),
        }
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement> {
        self.validate(g)?;
        Ok(self.inverse_unchecked(g))
    }

    fn inverse_unchecked(&self, g: &GroupElement) -> GroupElement {
        match (&self.kind, g) {
            (GroupKind::Circle, GroupElement::Circle(a)) => GroupElement::circle(-a),
            (GroupKind::So3, GroupElement::Rotation(r)) => GroupElement::Rotation(r.transpose()),
            (GroupKind::Euclidean(_), GroupElement::Translation(v)) => GroupElement::Translation(-v),
            (GroupKind::SemiDirect(d), GroupElement::SemiDirect { base, v }) => {
                let binv = d.base.inverse_unchecked(base);
                let vinv = -((d.rho)(&binv) * v);
                GroupElement::semidirect(binv, vinv)
            }
            _ => unreachable!("validated payloads"),
        }
    }

    /// `exp(t ξ)`.
    pub fn exp(&self, xi: &AlgebraVector, t: f64) -> Result<GroupElement> {
        self.check_algebra(xi)?;
        if !t.is_finite() || xi.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("exponential"));
        }
        Ok(match &self.kind {
            GroupKind::Circle => GroupElement::circle(t * xi[0]),
            GroupKind::So3 => GroupElement::Rotation(rodrigues(&Vector3::new(t * xi[0], t * xi[1], t * xi[2]))),
            GroupKind::Euclidean(_) => GroupElement::Translation(&xi.0 * t),
            GroupKind::SemiDirect(d) => {
                let bd = d.base.dim();
                let (xb, u) = xi.split(bd);
                let base = d.base.exp(&xb, t)?;
                // v(t) = ∫₀ᵗ exp(sρ′(ξ)) u ds, read off an augmented matrix exponential.
                let n = d.vdim;
                let mut aug = DMatrix::zeros(n + 1, n + 1);
                aug.view_mut((0, 0), (n, n)).copy_from(&(self.rho_prime_unchecked(&xb) * t));
                aug.view_mut((0, n), (n, 1)).copy_from(&(&u.0 * t));
                let e = aug.exp();
                let v = e.view((0, n), (n, 1)).into_owned();
                GroupElement::semidirect(base, DVector::from_column_slice(v.as_slice()))
            }
        })
    }

    /// `Ad_g` as a `d × d` matrix.
    pub fn adjoint_matrix(&self, g: &GroupElement) -> Result<DMatrix<f64>> {
        self.validate(g)?;
        Ok(self.adjoint_matrix_unchecked(g))
    }

    fn adjoint_matrix_unchecked(&self, g: &GroupElement) -> DMatrix<f64> {
        match (&self.kind, g) {
            (GroupKind::Circle, _) => DMatrix::identity(1, 1),
            (GroupKind::Euclidean(n), _) => DMatrix::identity(*n, *n),
            (GroupKind::So3, GroupElement::Rotation(r)) => DMatrix::from_column_slice(3, 3, r.as_slice()),
            (GroupKind::SemiDirect(d), GroupElement::SemiDirect { base, v }) => {
                let bd = d.base.dim();
                let n = d.vdim;
                let a = d.base.adjoint_matrix_unchecked(base);
                let mut m = DMatrix::zeros(n, bd);
                for (j, gen) in d.generators.iter().enumerate() {
                    m.set_column(j, &(gen * v));
                }
                let mut out = DMatrix::zeros(bd + n, bd + n);
                out.view_mut((0, 0), (bd, bd)).copy_from(&a);
                out.view_mut((bd, 0), (n, bd)).copy_from(&(-(m * &a)));
                out.view_mut((bd, bd), (n, n)).copy_from(&(d.rho)(base));
                out
            }
            _ => unreachable!("validated payloads"),
        }
    }

    pub fn adjoint(&self, g: &GroupElement, xi: &AlgebraVector) -> Result<AlgebraVector> {
        self.check_algebra(xi)?;
        Ok(AlgebraVector(self.adjoint_matrix(g)? * &xi.0))
    }

    /// `Ad*_g ν`, defined by `⟨Ad*_g ν, ξ⟩ = ⟨ν, Ad_g ξ⟩`. This is a right action.
    pub fn coadjoint(&self, g: &GroupElement, nu: &CoVector) -> Result<CoVector> {
        self.check_dual(nu)?;
        Ok(CoVector(self.adjoint_matrix(g)?.transpose() * &nu.0))
    }

    pub fn bracket(&self, xi: &AlgebraVector, eta: &AlgebraVector) -> Result<AlgebraVector> {
        self.check_algebra(xi)?;
        self.check_algebra(eta)?;
        Ok(self.bracket_unchecked(xi, eta))
    }

    fn bracket_unchecked(&self, xi: &AlgebraVector, eta: &AlgebraVector) -> AlgebraVector {
        match &self.kind {
            GroupKind::Circle | GroupKind::Euclidean(_) => AlgebraVector::zeros(self.dim()),
            GroupKind::So3 => {
                let a = Vector3::new(xi[0], xi[1], xi[2]);
                let b = Vector3::new(eta[0], eta[1], eta[2]);
                AlgebraVector::from_slice(a.cross(&b).as_slice())
            }
            GroupKind::SemiDirect(d) => {
                let bd = d.base.dim();
                let (x1, u1) = xi.split(bd);
                let (x2, u2) = eta.split(bd);
                let top = d.base.bracket_unchecked(&x1, &x2);
                let bottom = self.rho_prime_unchecked(&x1) * &u2.0 - self.rho_prime_unchecked(&x2) * &u1.0;
                top.concat(&AlgebraVector(bottom))
            }
        }
    }

    /// Matrix of `η ↦ [ξ, η]`.
    pub fn ad_matrix(&self, xi: &AlgebraVector) -> Result<DMatrix<f64>> {
        self.check_algebra(xi)?;
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for j in 0..d {
            m.set_column(j, &self.bracket_unchecked(xi, &AlgebraVector::basis(d, j)).0);
        }
        Ok(m)
    }

    /// `ad*_ξ ν`, with `⟨ad*_ξ ν, η⟩ = ⟨ν, [ξ, η]⟩`.
    pub fn inf_coadjoint(&self, xi: &AlgebraVector, nu: &CoVector) -> Result<CoVector> {
        self.check_dual(nu)?;
        Ok(CoVector(self.ad_matrix(xi)?.transpose() * &nu.0))
    }

    /// `ρ(g)` for `g` in the base group of a semi-direct product.
    pub fn rho(&self, g: &GroupElement) -> Result<DMatrix<f64>> {
        let d = self.sd()?;
        d.base.validate(g)?;
        Ok((d.rho)(g))
    }

    /// `ρ′(ξ)` for `ξ` in the base algebra.
    pub fn rho_prime(&self, xi: &AlgebraVector) -> Result<DMatrix<f64>> {
        let d = self.sd()?;
        check_dim("base algebra vector", d.base.dim(), xi.len())?;
        Ok(self.rho_prime_unchecked(xi))
    }

    fn rho_prime_unchecked(&self, xi: &AlgebraVector) -> DMatrix<f64> {
        let GroupKind::SemiDirect(d) = &self.kind else {
            unreachable!()
        };
        let mut m = DMatrix::zeros(d.vdim, d.vdim);
        for (j, gen) in d.generators.iter().enumerate() {
            m += gen * xi[j];
        }
        m
    }

    /// `v*a ∈ 𝔤*`, with `⟨v*a, ξ⟩ = ⟨a, ρ′(ξ) v⟩`.
    pub fn vstar(&self, v: &DVector<f64>, a: &CoVector) -> Result<CoVector> {
        let d = self.sd()?;
        check_dim("vector in V", d.vdim, v.len())?;
        check_dim("dual vector in V*", d.vdim, a.len())?;
        Ok(CoVector::from_vec(d.generators.iter().map(|gen| a.0.dot(&(gen * v))).collect()))
    }

    /// Matrix of `v ↦ v*a`, of size `dim 𝔤 × dim V`.
    pub fn vstar_matrix(&self, a: &CoVector) -> Result<DMatrix<f64>> {
        let d = self.sd()?;
        check_dim("dual vector in V*", d.vdim, a.len())?;
        let mut m = DMatrix::zeros(d.base.dim(), d.vdim);
        for (j, gen) in d.generators.iter().enumerate() {
            m.set_row(j, &(gen.transpose() * &a.0).transpose());
        }
        Ok(m)
    }

    /// Dual action `g*a = ρ(g)ᵀ a` of the base group on `V*`.
    pub fn dual_action(&self, g: &GroupElement, a: &CoVector) -> Result<CoVector> {
        let rho = self.rho(g)?;
        check_dim("dual vector in V*", rho.nrows(), a.len())?;
        Ok(CoVector(rho.transpose() * &a.0))
    }

    /// Infinitesimal dual action `ξ*b = ρ′(ξ)ᵀ b`.
    pub fn inf_dual_action(&self, xi: &AlgebraVector, b: &CoVector) -> Result<CoVector> {
        let rp = self.rho_prime(xi)?;
        check_dim("dual vector in V*", rp.nrows(), b.len())?;
        Ok(CoVector(rp.transpose() * &b.0))
    }

    /// Matrix of `ξ ↦ ξ*b`, of size `dim V × dim 𝔤`.
    pub fn inf_dual_matrix(&self, b: &CoVector) -> Result<DMatrix<f64>> {
        let d = self.sd()?;
        check_dim("dual vector in V*", d.vdim, b.len())?;
        let mut m = DMatrix::zeros(d.vdim, d.base.dim());
        for (j, gen) in d.generators.iter().enumerate() {
            m.set_column(j, &(gen.transpose() * &b.0));
        }
        Ok(m)
    }

    /// A known Casimir of the coadjoint action: `|ν|²` on so(3)*, `|b|²` for a
    /// semi-direct product with orthogonal representation.
    pub fn casimir(&self, nu: &CoVector) -> Option<f64> {
        match &self.kind {
            GroupKind::So3 if nu.len() == 3 => Some(nu.0.norm_squared()),
            GroupKind::SemiDirect(d) if d.orthogonal && nu.len() == self.dim() => {
                Some(nu.0.rows(d.base.dim(), d.vdim).norm_squared())
            }
            _ => None,
        }
    }

    /// Max-norm distance between payloads (angles compared modulo 2π).
    pub fn distance(&self, g: &GroupElement, h: &GroupElement) -> f64 {
        match (g, h) {
            (GroupElement::Circle(a), GroupElement::Circle(b)) => angle_difference(*a, *b).abs(),
            (GroupElement::Rotation(a), GroupElement::Rotation(b)) => (a - b).amax(),
            (GroupElement::Translation(a), GroupElement::Translation(b)) if a.len() == b.len() => {
                if a.is_empty() {
                    0.0
                } else {
                    (a - b).amax()
                }
            }
            (GroupElement::SemiDirect { base: b1, v: v1 }, GroupElement::SemiDirect { base: b2, v: v2 })
                if v1.len() == v2.len() =>
            {
                let dv = if v1.is_empty() { 0.0 } else { (v1 - v2).amax() };
                self.base().map_or(f64::INFINITY, |base| base.distance(b1, b2)).max(dv)
            }
            _ => f64::INFINITY,
        }
    }

    /// Random element: uniform angle, rotation of angle ≤ π about a random axis,
    /// translation entries in `[-scale, scale]`.
    pub fn sample_element<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> GroupElement {
        match &self.kind {
            GroupKind::Circle => GroupElement::circle(rng.gen_range(0.0..TAU)),
            GroupKind::So3 => {
                let w = loop {
                    let w = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
                    if w.norm() <= 1.0 {
                        break w * PI;
                    }
                };
                GroupElement::Rotation(rodrigues(&w))
            }
            GroupKind::Euclidean(n) => GroupElement::Translation(DVector::from_fn(*n, |_, _| rng.gen_range(-scale..scale))),
            GroupKind::SemiDirect(d) => GroupElement::semidirect(
                d.base.sample_element(rng, scale),
                DVector::from_fn(d.vdim, |_, _| rng.gen_range(-scale..scale)),
            ),
        }
    }

    pub fn sample_algebra<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> AlgebraVector {
        AlgebraVector(DVector::from_fn(self.dim(), |_, _| rng.gen_range(-scale..scale)))
    }

    pub fn sample_dual<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> CoVector {
        CoVector(DVector::from_fn(self.dim(), |_, _| rng.gen_range(-scale..scale)))
    }
}

/// Builds `G ⋉ V` from a representation `ρ: G → GL(V)` and its derivative `ρ′`.
///
/// Checks `ρ(e) = I` and that `ρ′(e_j)` matches the central difference of
/// `t ↦ ρ(exp t e_j)` at `t = 0` within `1e-6`, for every basis vector.
pub fn make_semidirect(base: &LieGroup, rho: GroupRep, rho_prime: AlgebraRep, vdim: usize) -> Result<LieGroup> {
    let bd = base.dim();
    let e = base.identity();
    let r0 = rho(&e);
    if r0.shape() != (vdim, vdim) {
        return Err(Error::Representation(format!(
            "ρ(e) has shape {:?}, expected ({vdim}, {vdim})",
            r0.shape()
        )));
    }
    let id_err = (&r0 - DMatrix::identity(vdim, vdim)).amax();
    if id_err > 1e-12 {
        return Err(Error::Representation(format!("ρ(e) differs from the identity by {id_err:.3e}")));
    }
    let h = 1e-5;
    let mut generators = Vec::with_capacity(bd);
    for j in 0..bd {
        let ej = AlgebraVector::basis(bd, j);
        let gen = rho_prime(&ej);
        if gen.shape() != (vdim, vdim) {
            return Err(Error::Representation(format!("ρ′(e_{j}) has the wrong shape")));
        }
        let fd = (rho(&base.exp(&ej, h)?) - rho(&base.exp(&ej, -h)?)) / (2.0 * h);
        let err = (&fd - &gen).amax();
        if vdim > 0 && err > 1e-6 {
            return Err(Error::Representation(format!(
                "ρ′(e_{j}) disagrees with the derivative of ρ by {err:.3e}"
            )));
        }
        generators.push(gen);
    }
    // ρ′ must be linear; compare on the sum of basis vectors.
    if bd > 0 && vdim > 0 {
        let ones = AlgebraVector(DVector::from_element(bd, 1.0));
        let sum = generators.iter().fold(DMatrix::zeros(vdim, vdim), |acc, g| acc + g);
        let err = (rho_prime(&ones) - sum).amax();
        if err > 1e-10 {
            return Err(Error::Representation(format!("ρ′ is not linear (error {err:.3e})")));
        }
    }
    let orthogonal = generators.iter().all(|g| (g + g.transpose()).amax() <= 1e-14);
    let name = format!("{}x|R{vdim}", base.name());
    Ok(LieGroup {
        kind: GroupKind::SemiDirect(Arc::new(SemiDirectData {
            base: base.clone(),
            vdim,
            rho,
            generators,
            orthogonal,
        })),
        name: name.into(),
    })
}

/// Semi-direct product with the trivial representation, i.e. a direct product `G × V`.
pub fn direct_product(base: &LieGroup, vdim: usize) -> Result<LieGroup> {
    make_semidirect(
        base,
        Arc::new(move |_| DMatrix::identity(vdim, vdim)),
        Arc::new(move |_| DMatrix::zeros(vdim, vdim)),
        vdim,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn registered() -> Vec<LieGroup> {
        vec![
            LieGroup::circle(),
            LieGroup::so3(),
            LieGroup::euclidean(3),
            LieGroup::se2(),
            direct_product(&LieGroup::so3(), 2).unwrap(),
        ]
    }

    fn av(v: &[f64]) -> AlgebraVector {
        AlgebraVector::from_slice(v)
    }

    fn cv(v: &[f64]) -> CoVector {
        CoVector::from_slice(v)
    }

    #[test]
    fn so3_bracket_is_cross_product() {
        let g = LieGroup::so3();
        assert_eq!(g.bracket(&av(&[1., 0., 0.]), &av(&[0., 1., 0.])).unwrap(), av(&[0., 0., 1.]));
    }

    #[test]
    fn abelian_bracket_vanishes() {
        let g = LieGroup::euclidean(2);
        assert_eq!(g.bracket(&av(&[1., 2.]), &av(&[-3., 0.5])).unwrap(), av(&[0., 0.]));
    }

    #[test]
    fn se2_bracket() {
        let g = LieGroup::se2();
        let out = g.bracket(&av(&[1., 0., 0.]), &av(&[0., 1., 0.])).unwrap();
        assert_eq!(out, av(&[0., 0., 1.]));
    }

    #[test]
    fn bracket_dimension_mismatch() {
        let g = LieGroup::so3();
        assert!(matches!(
            g.bracket(&av(&[1., 0.]), &av(&[0., 1., 0.])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn so3_inf_coadjoint_is_nu_cross_xi() {
        let g = LieGroup::so3();
        let out = g.inf_coadjoint(&av(&[1., 0., 0.]), &cv(&[0., 1., 0.])).unwrap();
        assert_eq!(out, cv(&[0., 0., -1.]));
    }

    #[test]
    fn inf_coadjoint_duality_on_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for g in registered() {
            let d = g.dim();
            let xi = g.sample_algebra(&mut rng, 2.0);
            let nu = g.sample_dual(&mut rng, 2.0);
            let ad = g.inf_coadjoint(&xi, &nu).unwrap();
            for j in 0..d {
                let e = AlgebraVector::basis(d, j);
                let rhs = pair(&nu, &g.bracket(&xi, &e).unwrap());
                assert!((ad[j] - rhs).abs() <= 1e-12, "{g:?}");
            }
        }
    }

    #[test]
    fn adjoint_examples() {
        let g = LieGroup::se2();
        let el = GroupElement::semidirect(GroupElement::circle(PI / 2.0), DVector::zeros(2));
        let out = g.adjoint(&el, &av(&[0., 1., 0.])).unwrap();
        assert!((out.0 - DVector::from_vec(vec![0., 0., 1.])).amax() < 1e-15);

        let so3 = LieGroup::so3();
        let r = so3.exp(&av(&[0., 0., PI]), 1.0).unwrap();
        let out = so3.adjoint(&r, &av(&[1., 0., 0.])).unwrap();
        assert!((out.0 - DVector::from_vec(vec![-1., 0., 0.])).amax() < 1e-15);

        for g in registered() {
            let xi = AlgebraVector::from_vec((0..g.dim()).map(|i| i as f64 + 0.5).collect());
            assert_eq!(g.adjoint(&g.identity(), &xi).unwrap(), xi);
        }
    }

    #[test]
    fn se2_adjoint_matches_complex_formula() {
        // Ad_{(θ,z)}(ξ,w) = (ξ, e^{iθ}w − iξz)
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = LieGroup::se2();
        for _ in 0..50 {
            let el = g.sample_element(&mut rng, 2.0);
            let xi = g.sample_algebra(&mut rng, 2.0);
            let (base, z) = el.as_semidirect().unwrap();
            let GroupElement::Circle(t) = base else { panic!() };
            let (s, c) = t.sin_cos();
            let (wr, wi) = (xi[1], xi[2]);
            let expect = [
                xi[0],
                c * wr - s * wi + xi[0] * z[1],
                s * wr + c * wi - xi[0] * z[0],
            ];
            let out = g.adjoint(&el, &xi).unwrap();
            for k in 0..3 {
                assert_abs_diff_eq!(out[k], expect[k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn invalid_rotation_is_rejected() {
        let g = LieGroup::so3();
        let mut r = Matrix3::identity();
        r[(0, 1)] = 1e-3;
        let bad = GroupElement::Rotation(r);
        assert!(matches!(g.adjoint(&bad, &av(&[1., 0., 0.])), Err(Error::InvalidElement(_))));
        let flip = GroupElement::Rotation(Matrix3::from_diagonal(&Vector3::new(1., 1., -1.)));
        assert!(g.validate(&flip).is_err());
    }

    #[test]
    fn se2_coadjoint_examples() {
        let g = LieGroup::se2();
        let theta = 0.7;
        let el = GroupElement::semidirect(GroupElement::circle(theta), DVector::zeros(2));
        let (mu, ax, ay) = (0.3, 1.2, -0.4);
        let out = g.coadjoint(&el, &cv(&[mu, ax, ay])).unwrap();
        // e^{-iθ} a
        let (s, c) = theta.sin_cos();
        assert_abs_diff_eq!(out[0], mu, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], c * ax + s * ay, epsilon = 1e-15);
        assert_abs_diff_eq!(out[2], -s * ax + c * ay, epsilon = 1e-15);

        let (zx, zy) = (0.5, -1.5);
        let el = GroupElement::semidirect(GroupElement::circle(0.0), DVector::from_vec(vec![zx, zy]));
        let out = g.coadjoint(&el, &cv(&[mu, ax, ay])).unwrap();
        // Re(−i a z̄) = ay·zx − ax·zy
        let zstar = ay * zx - ax * zy;
        assert_abs_diff_eq!(out[0], mu - zstar, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], ax, epsilon = 1e-15);
        assert_abs_diff_eq!(out[2], ay, epsilon = 1e-15);

        assert_eq!(g.coadjoint(&g.identity(), &cv(&[mu, ax, ay])).unwrap(), cv(&[mu, ax, ay]));
    }

    #[test]
    fn coadjoint_is_right_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in registered() {
            for _ in 0..100 {
                let a = g.sample_element(&mut rng, 2.0);
                let b = g.sample_element(&mut rng, 2.0);
                let nu = g.sample_dual(&mut rng, 2.0);
                let lhs = g.coadjoint(&a, &g.coadjoint(&b, &nu).unwrap()).unwrap();
                let rhs = g.coadjoint(&g.compose(&b, &a).unwrap(), &nu).unwrap();
                assert!((lhs.0 - rhs.0).amax() <= 1e-10, "{g:?}");
            }
        }
    }

    #[test]
    fn adjoint_is_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for g in registered() {
            for _ in 0..50 {
                let a = g.sample_element(&mut rng, 2.0);
                let b = g.sample_element(&mut rng, 2.0);
                let lhs = g.adjoint_matrix(&g.compose(&a, &b).unwrap()).unwrap();
                let rhs = g.adjoint_matrix(&a).unwrap() * g.adjoint_matrix(&b).unwrap();
                assert!((lhs - rhs).amax() <= 1e-10, "{g:?}");
            }
        }
    }

    #[test]
    fn jacobi_on_basis_triples() {
        for g in registered() {
            let d = g.dim();
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let (x, y, z) = (
                            AlgebraVector::basis(d, i),
                            AlgebraVector::basis(d, j),
                            AlgebraVector::basis(d, k),
                        );
                        let t1 = g.bracket(&x, &g.bracket(&y, &z).unwrap()).unwrap();
                        let t2 = g.bracket(&y, &g.bracket(&z, &x).unwrap()).unwrap();
                        let t3 = g.bracket(&z, &g.bracket(&x, &y).unwrap()).unwrap();
                        assert!((&(&t1 + &t2) + &t3).amax() <= 1e-10, "{g:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn vstar_examples() {
        let g = LieGroup::se2();
        let v = DVector::from_vec(vec![1.0, 0.0]);
        assert_abs_diff_eq!(g.vstar(&v, &cv(&[0., 1.])).unwrap()[0], 1.0, epsilon = 1e-15);
        let a = DVector::from_vec(vec![0.3, -0.8]);
        assert_abs_diff_eq!(g.vstar(&a, &CoVector(a.clone())).unwrap()[0], 0.0, epsilon = 1e-15);
        assert_eq!(g.vstar(&DVector::zeros(2), &cv(&[0.4, 0.2])).unwrap(), cv(&[0.0]));
        assert!(matches!(
            LieGroup::so3().vstar(&v, &cv(&[0., 1.])),
            Err(Error::NotSemiDirect)
        ));
    }

    #[test]
    fn se2_dual_actions() {
        let g = LieGroup::se2();
        let a = cv(&[0.6, 0.8]);
        let out = g.dual_action(&GroupElement::circle(0.4), &a).unwrap();
        let (s, c) = 0.4f64.sin_cos();
        assert_abs_diff_eq!(out[0], c * 0.6 + s * 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], -s * 0.6 + c * 0.8, epsilon = 1e-15);
        // ξ*a = −iξa
        let out = g.inf_dual_action(&av(&[2.0]), &a).unwrap();
        assert_abs_diff_eq!(out[0], 2.0 * 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], -2.0 * 0.6, epsilon = 1e-15);
    }

    #[test]
    fn exp_examples() {
        for g in registered() {
            let zero = AlgebraVector::zeros(g.dim());
            assert!(g.distance(&g.exp(&zero, 1.0).unwrap(), &g.identity()) == 0.0);
        }
        let so3 = LieGroup::so3();
        let r = so3.exp(&av(&[0., 0., PI]), 1.0).unwrap();
        let expect = Matrix3::new(-1., 0., 0., 0., -1., 0., 0., 0., 1.);
        assert!((r.as_rotation().unwrap() - expect).amax() < 1e-15);
    }

    #[test]
    fn se2_exp_closed_form_and_series() {
        let g = LieGroup::se2();
        let (xi, wx, wy) = (0.8, 0.3, -1.1);
        for t in [1e-3, 0.05, 1.3] {
            let el = g.exp(&av(&[xi, wx, wy]), t).unwrap();
            let (base, z) = el.as_semidirect().unwrap();
            let GroupElement::Circle(th) = base else { panic!() };
            assert_abs_diff_eq!(angle_difference(*th, xi * t), 0.0, epsilon = 1e-15);
            // z = (e^{iξt} − 1)/(iξ) · w
            let (s, c) = (xi * t).sin_cos();
            let (fr, fi) = (s / xi, (1.0 - c) / xi);
            assert_abs_diff_eq!(z[0], fr * wx - fi * wy, epsilon = 1e-13);
            assert_abs_diff_eq!(z[1], fr * wy + fi * wx, epsilon = 1e-13);
            if t < 0.1 {
                // w t + iξ w t²/2 − ξ² w t³/6 − iξ³ w t⁴/24
                let (k1, k2, k3) = (xi * t * t / 2.0, xi * xi * t.powi(3) / 6.0, xi.powi(3) * t.powi(4) / 24.0);
                let sx = t * wx - k1 * wy - k2 * wx + k3 * wy;
                let sy = t * wy + k1 * wx - k2 * wy - k3 * wx;
                assert_abs_diff_eq!(z[0], sx, epsilon = 10.0 * t.powi(5));
                assert_abs_diff_eq!(z[1], sy, epsilon = 10.0 * t.powi(5));
            }
        }
    }

    #[test]
    fn exp_one_parameter_subgroup() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for g in registered() {
            for _ in 0..20 {
                let xi = g.sample_algebra(&mut rng, 1.5);
                let (s, t) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let lhs = g.exp(&xi, s + t).unwrap();
                let rhs = g.compose(&g.exp(&xi, s).unwrap(), &g.exp(&xi, t).unwrap()).unwrap();
                assert!(g.distance(&lhs, &rhs) <= 1e-9, "{g:?}");
            }
        }
    }

    #[test]
    fn exp_derivative_at_zero_is_xi() {
        // d/dt exp(tξ)|₀ = ξ, read off through Ad: d/dt Ad_{exp tξ} η = [ξ, η]
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for g in registered() {
            let xi = g.sample_algebra(&mut rng, 1.0);
            let eta = g.sample_algebra(&mut rng, 1.0);
            let h = 1e-5;
            let fd = (g.adjoint(&g.exp(&xi, h).unwrap(), &eta).unwrap().0
                - g.adjoint(&g.exp(&xi, -h).unwrap(), &eta).unwrap().0)
                / (2.0 * h);
            let br = g.bracket(&xi, &eta).unwrap().0;
            assert!((fd - br).amax() < 1e-8, "{g:?}");
        }
    }

    #[test]
    fn inverse_composes_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for g in registered() {
            let a = g.sample_element(&mut rng, 3.0);
            let e = g.compose(&a, &g.inverse(&a).unwrap()).unwrap();
            assert!(g.distance(&e, &g.identity()) < 1e-14, "{g:?}");
        }
    }

    #[test]
    fn trivial_representation_gives_block_diagonal_bracket() {
        let g = direct_product(&LieGroup::so3(), 2).unwrap();
        let x = av(&[1., 0.5, 0., 3., 4.]);
        let y = av(&[0., 1., 2., -1., 7.]);
        let out = g.bracket(&x, &y).unwrap();
        let cross = g.base().unwrap().bracket(&av(&[1., 0.5, 0.]), &av(&[0., 1., 2.])).unwrap();
        assert_eq!(&out.as_slice()[..3], cross.as_slice());
        assert_eq!(&out.as_slice()[3..], &[0.0, 0.0]);
    }

    #[test]
    fn inconsistent_representation_is_rejected() {
        let rho: GroupRep = Arc::new(|g| match g {
            GroupElement::Circle(t) => {
                let (s, c) = t.sin_cos();
                DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
            }
            _ => unreachable!(),
        });
        let wrong: AlgebraRep = Arc::new(|xi| DMatrix::from_row_slice(2, 2, &[0.0, xi[0], -xi[0], 0.0]));
        assert!(matches!(
            make_semidirect(&LieGroup::circle(), rho, wrong, 2),
            Err(Error::Representation(_))
        ));
        let shifted: GroupRep = Arc::new(|_| DMatrix::from_element(2, 2, 1.0));
        let zero: AlgebraRep = Arc::new(|_| DMatrix::zeros(2, 2));
        assert!(make_semidirect(&LieGroup::circle(), shifted, zero, 2).is_err());
    }

    // Elements fixing (μ, a) with a ≠ 0 have trivial rotation part; the
    // translation part is confined to the line z*a = 0, i.e. z ∥ a.
    #[test]
    fn se2_coadjoint_isotropy_has_trivial_base_part() {
        let g = LieGroup::se2();
        let nu = cv(&[0.4, 1.0, 0.5]);
        let a = DVector::from_vec(vec![1.0, 0.5]);
        let n = 40;
        let mut fixed = 0;
        for i in 0..n {
            for j in 0..=n {
                for k in 0..=n {
                    let th = TAU * i as f64 / n as f64;
                    let z = DVector::from_vec(vec![-2.0 + 4.0 * j as f64 / n as f64, -2.0 + 4.0 * k as f64 / n as f64]);
                    let el = GroupElement::semidirect(GroupElement::circle(th), z.clone());
                    let out = g.coadjoint(&el, &nu).unwrap();
                    if (out.0 - &nu.0).amax() < 1e-9 {
                        fixed += 1;
                        assert_eq!(i, 0);
                        assert!(g.vstar(&z, &CoVector(a.clone())).unwrap()[0].abs() < 1e-12);
                    }
                }
            }
        }
        // grid points with z = s·(1, 0.5): s ∈ {−2, −1.8, …, 2}
        assert_eq!(fixed, 21);
        let grid_g_a: Vec<usize> = (0..n)
            .filter(|&i| {
                let out = g.dual_action(&GroupElement::circle(TAU * i as f64 / n as f64), &CoVector(a.clone())).unwrap();
                (out.0 - &a).amax() < 1e-9
            })
            .collect();
        assert_eq!(grid_g_a, vec![0]);
    }

    #[test]
    fn so3_orthogonality_after_many_steps() {
        let g = LieGroup::so3();
        let mut stepper = crate::numerics::GroupStepper::new(g.clone());
        let xi = av(&[0.3, -1.2, 0.7]);
        let mut r = g.identity();
        for _ in 0..10_000 {
            r = stepper.step(&r, &xi, 1e-2).unwrap();
        }
        let m = r.as_rotation().unwrap();
        assert!((m.transpose() * m - Matrix3::identity()).amax() <= 1e-8);
        let direct = g.exp(&xi, 100.0).unwrap();
        assert!(g.distance(&r, &direct) <= 1e-10);
    }

    #[test]
    fn casimirs() {
        assert_eq!(LieGroup::so3().casimir(&cv(&[1., 2., 2.])), Some(9.0));
        assert_eq!(LieGroup::se2().casimir(&cv(&[5., 3., 4.])), Some(25.0));
        assert_eq!(LieGroup::circle().casimir(&cv(&[1.])), None);
    }

    proptest! {
        #[test]
        fn bracket_antisymmetric_exactly(x in prop::collection::vec(-10.0f64..10.0, 3), y in prop::collection::vec(-10.0f64..10.0, 3)) {
            for g in [LieGroup::so3(), LieGroup::se2()] {
                let a = g.bracket(&av(&x), &av(&y)).unwrap();
                let b = g.bracket(&av(&y), &av(&x)).unwrap();
                prop_assert_eq!(a, -&b);
            }
        }

        #[test]
        fn vstar_is_bilinear(v in prop::collection::vec(-5.0f64..5.0, 2), w in prop::collection::vec(-5.0f64..5.0, 2),
                             a in prop::collection::vec(-5.0f64..5.0, 2), c in -3.0f64..3.0) {
            let g = LieGroup::se2();
            let (v, w) = (DVector::from_vec(v), DVector::from_vec(w));
            let a = CoVector::from_vec(a);
            let lhs = g.vstar(&(&v * c + &w), &a).unwrap()[0];
            let rhs = c * g.vstar(&v, &a).unwrap()[0] + g.vstar(&w, &a).unwrap()[0];
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
