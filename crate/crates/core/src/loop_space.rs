//! The two-dimensional equivariant cohomology H of CP¹ in the fixed-point
//! basis {φ₀, φ∞}, the loop space ℋ = H((z⁻¹)) at finite window, the
//! symplectic form Ω and the polarization ℋ = ℋ₊ ⊕ ℋ₋.
//!
//! Multiplication in H is diagonal in this basis (localization); p acts as
//! diag(ν₀, ν∞). The Poincaré pairing matrix is diag(1/ν, −1/ν), so the dual
//! basis satisfies φ⁰ = νφ₀ and φ^∞ = −νφ∞. The basis {1, P} appears only
//! at input/output boundaries.

use crate::error::EngineError;
use crate::scalar::{Coeff, ParamEnv, Scalar};
use crate::series::{SeriesVar, TruncSeries};

/// A cohomology class a·φ₀ + b·φ∞ in fixed-point coordinates.
#[derive(Clone, PartialEq, Debug)]
pub struct CohClass<S: Scalar> {
    pub c0: S,
    pub cinf: S,
}

impl<S: Scalar> CohClass<S> {
    pub fn new(c0: S, cinf: S) -> Self {
        CohClass { c0, cinf }
    }

    pub fn zero() -> Self {
        CohClass { c0: S::zero(), cinf: S::zero() }
    }

    pub fn phi0() -> Self {
        CohClass { c0: S::one(), cinf: S::zero() }
    }

    pub fn phi_inf() -> Self {
        CohClass { c0: S::zero(), cinf: S::one() }
    }

    /// The unity 1 = φ₀ + φ∞.
    pub fn unity() -> Self {
        CohClass { c0: S::one(), cinf: S::one() }
    }

    /// The hyperplane class p = ν₀φ₀ + ν∞φ∞.
    pub fn p(env: &ParamEnv<S>) -> Self {
        CohClass { c0: env.nu0.clone(), cinf: env.nuinf.clone() }
    }

    /// Dual basis vector φ⁰ = νφ₀.
    pub fn phi0_dual(env: &ParamEnv<S>) -> Self {
        CohClass { c0: env.nu.clone(), cinf: S::zero() }
    }

    /// Dual basis vector φ^∞ = −νφ∞.
    pub fn phi_inf_dual(env: &ParamEnv<S>) -> Self {
        CohClass { c0: S::zero(), cinf: env.nu.neg() }
    }

    pub fn is_zero(&self) -> bool {
        self.c0.is_zero() && self.cinf.is_zero()
    }

    pub fn add(&self, o: &Self) -> Self {
        CohClass { c0: self.c0.add(&o.c0), cinf: self.cinf.add(&o.cinf) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        CohClass { c0: self.c0.sub(&o.c0), cinf: self.cinf.sub(&o.cinf) }
    }

    pub fn neg(&self) -> Self {
        CohClass { c0: self.c0.neg(), cinf: self.cinf.neg() }
    }

    pub fn scale(&self, k: &S) -> Self {
        CohClass { c0: self.c0.mul(k), cinf: self.cinf.mul(k) }
    }

    /// Cup product, diagonal at the fixed points.
    pub fn mul(&self, o: &Self) -> Self {
        CohClass { c0: self.c0.mul(&o.c0), cinf: self.cinf.mul(&o.cinf) }
    }

    /// Equivariant Poincaré pairing (a, b) = a₀b₀/ν − a∞b∞/ν.
    pub fn pairing(&self, o: &Self, env: &ParamEnv<S>) -> Result<S, EngineError> {
        let nu_inv = env.nu.inv()?;
        Ok(self.c0.mul(&o.c0).sub(&self.cinf.mul(&o.cinf)).mul(&nu_inv))
    }

    /// Coordinates in the basis {1, p}: solves a·1 + b·p = self.
    pub fn to_unit_p_basis(&self, env: &ParamEnv<S>) -> Result<(S, S), EngineError> {
        let nu_inv = env.nu.inv()?;
        let b = self.c0.sub(&self.cinf).mul(&nu_inv);
        let a = self.c0.sub(&b.mul(&env.nu0));
        Ok((a, b))
    }
}

/// Element of ℋ at a finite z-window, stored componentwise in {φ₀, φ∞}.
#[derive(Clone, PartialEq, Debug)]
pub struct LoopVector<S: Scalar> {
    pub c0: TruncSeries<S>,
    pub cinf: TruncSeries<S>,
}

impl<S: Scalar> LoopVector<S> {
    pub fn zero() -> Self {
        LoopVector { c0: TruncSeries::zero(SeriesVar::Z), cinf: TruncSeries::zero(SeriesVar::Z) }
    }

    pub fn from_series(c0: TruncSeries<S>, cinf: TruncSeries<S>) -> Self {
        LoopVector { c0, cinf }
    }

    /// A single z-power with a cohomology coefficient.
    pub fn monomial(exp: i64, class: &CohClass<S>) -> Self {
        LoopVector {
            c0: TruncSeries::monomial(SeriesVar::Z, exp, class.c0.clone()),
            cinf: TruncSeries::monomial(SeriesVar::Z, exp, class.cinf.clone()),
        }
    }

    pub fn coeff(&self, exp: i64) -> CohClass<S> {
        CohClass { c0: self.c0.coeff(exp), cinf: self.cinf.coeff(exp) }
    }

    pub fn add(&self, o: &Self) -> Result<Self, EngineError> {
        Ok(LoopVector { c0: self.c0.add(&o.c0)?, cinf: self.cinf.add(&o.cinf)? })
    }

    pub fn sub(&self, o: &Self) -> Result<Self, EngineError> {
        Ok(LoopVector { c0: self.c0.sub(&o.c0)?, cinf: self.cinf.sub(&o.cinf)? })
    }

    pub fn neg(&self) -> Self {
        LoopVector { c0: self.c0.neg(), cinf: self.cinf.neg() }
    }

    pub fn scale(&self, k: &S) -> Self {
        LoopVector { c0: self.c0.scale(k), cinf: self.cinf.scale(k) }
    }

    pub fn scale_series(&self, k: &TruncSeries<S>) -> Result<Self, EngineError> {
        Ok(LoopVector { c0: self.c0.mul(k)?, cinf: self.cinf.mul(k)? })
    }

    pub fn is_known_zero(&self) -> bool {
        self.c0.is_known_zero() && self.cinf.is_known_zero()
    }

    /// f(−z): flip the sign of odd coefficients.
    pub fn flip_z(&self) -> Self {
        let flip = |s: &TruncSeries<S>| {
            let mut out = s.clone();
            let terms: Vec<(i64, S)> = s.terms().map(|(e, c)| (*e, c.clone())).collect();
            for (e, c) in terms {
                if e.rem_euclid(2) == 1 {
                    out.set_coeff(e, c.neg());
                }
            }
            out
        };
        LoopVector { c0: flip(&self.c0), cinf: flip(&self.cinf) }
    }

    /// Projection onto (ℋ₊, ℋ₋): exponents ≥ 0 and < 0.
    pub fn polarize(&self) -> (Self, Self) {
        let split = |s: &TruncSeries<S>| {
            let mut plus = TruncSeries::zero(SeriesVar::Z);
            let mut minus = TruncSeries::zero(SeriesVar::Z);
            for (e, c) in s.terms() {
                if *e >= 0 {
                    plus.set_coeff(*e, c.clone());
                } else {
                    minus.set_coeff(*e, c.clone());
                }
            }
            let plus = plus.restricted(s.lo.map(|l| l.max(0)), s.hi);
            let minus = minus.restricted(s.lo, s.hi.map(|h| h.min(-1)));
            (plus, minus)
        };
        let (p0, m0) = split(&self.c0);
        let (pi, mi) = split(&self.cinf);
        (LoopVector { c0: p0, cinf: pi }, LoopVector { c0: m0, cinf: mi })
    }

    /// Ω(f, g) = [z⁻¹](f(−z), g(z)): antisymmetric, with ℋ± isotropic.
    pub fn symplectic_form(&self, g: &Self, env: &ParamEnv<S>) -> Result<S, EngineError> {
        let f = self.flip_z();
        let nu_inv = env.nu.inv()?;
        let p0 = f.c0.mul(&g.c0)?;
        let pi = f.cinf.mul(&g.cinf)?;
        let paired = p0.sub(&pi)?.scale(&nu_inv);
        if !paired.knows(-1) {
            return Err(EngineError::ResidueUndecidable);
        }
        Ok(paired.coeff(-1))
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T) -> LoopVector<T> {
        LoopVector { c0: self.c0.map(&f), cinf: self.cinf.map(&f) }
    }
}
