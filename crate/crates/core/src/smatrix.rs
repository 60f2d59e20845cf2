//! The J-function and S-matrix of quantum cohomology for CP¹, the mirror
//! coordinate changes, the conjugated vertex exponents, the phase factor W,
//! the commutation exponents, and the final constant cancellation.
//!
//! S_τ = 1 + S₁z⁻¹ + … is assembled column by column from the closed form of
//! the J-operator via S_τφ_i = Σ_k φ^k(z∂_t)(Jφ_i, φ_i)·φ_k, using that
//! φ⁰(p) = p − ν∞ and φ^∞(p) = p − ν₀. The quadratic form W is generated by
//! ΣW_{kl}z^{−k}w^{−l} = (S*(w)S(z) − 1)/(z⁻¹ + w⁻¹), which is the unique
//! kernel satisfying both W₀₀ = S₁ and the telescoping relation
//! W_{k,l−1} + W_{k−1,l} = S_k*S_l − δ.

use std::collections::BTreeMap;

use crate::error::EngineError;
use crate::fock::{MatrixSeries, Sector};
use crate::loop_space::{CohClass, LoopVector};
use crate::ratfun::{LocusRat, QuadField, XPoly};
use crate::scalar::{Assignment, Coeff, ParamEnv, ParamScalar, RatScalar, Scalar};
use crate::series::{SeriesVar, TruncSeries};
use crate::vertex::{ModeFamily, ModeVector, VertexExponent};

/// Constant 2×2 matrix in the fixed-point basis.
#[derive(Clone, PartialEq, Debug)]
pub struct Mat2<S: Scalar> {
    pub a00: S,
    pub a0i: S,
    pub ai0: S,
    pub aii: S,
}

impl<S: Scalar> Mat2<S> {
    pub fn zero() -> Self {
        Mat2 { a00: S::zero(), a0i: S::zero(), ai0: S::zero(), aii: S::zero() }
    }

    pub fn identity() -> Self {
        Mat2 { a00: S::one(), a0i: S::zero(), ai0: S::zero(), aii: S::one() }
    }

    pub fn add(&self, o: &Self) -> Self {
        Mat2 {
            a00: self.a00.add(&o.a00),
            a0i: self.a0i.add(&o.a0i),
            ai0: self.ai0.add(&o.ai0),
            aii: self.aii.add(&o.aii),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Mat2 {
            a00: self.a00.sub(&o.a00),
            a0i: self.a0i.sub(&o.a0i),
            ai0: self.ai0.sub(&o.ai0),
            aii: self.aii.sub(&o.aii),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        Mat2 {
            a00: self.a00.mul(&o.a00).add(&self.a0i.mul(&o.ai0)),
            a0i: self.a00.mul(&o.a0i).add(&self.a0i.mul(&o.aii)),
            ai0: self.ai0.mul(&o.a00).add(&self.aii.mul(&o.ai0)),
            aii: self.ai0.mul(&o.a0i).add(&self.aii.mul(&o.aii)),
        }
    }

    /// Transpose w.r.t. the Poincaré pairing diag(1/ν, −1/ν).
    pub fn pairing_transpose(&self) -> Self {
        Mat2 {
            a00: self.a00.clone(),
            a0i: self.ai0.neg(),
            ai0: self.a0i.neg(),
            aii: self.aii.clone(),
        }
    }

    pub fn apply(&self, v: &CohClass<S>) -> CohClass<S> {
        CohClass {
            c0: self.a00.mul(&v.c0).add(&self.a0i.mul(&v.cinf)),
            cinf: self.ai0.mul(&v.c0).add(&self.aii.mul(&v.cinf)),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a00.is_zero() && self.a0i.is_zero() && self.ai0.is_zero() && self.aii.is_zero()
    }
}

// ---------------------------------------------------------------------------
// J-operator.
// ---------------------------------------------------------------------------

/// The diagonal J-operator: scalar series J₀(z), J∞(z) at the fixed points,
/// Novikov-truncated at degree d_max.
#[derive(Clone, Debug)]
pub struct JOperator<S: Scalar> {
    pub j0: TruncSeries<S>,
    pub jinf: TruncSeries<S>,
    pub d_max: u32,
}

/// J_i = Σ_{d≤d_max} s^d e^{(tν_i + t₀)/z} / ∏_{j=1}^d (ν_i−ν₀+jz)(ν_i−ν∞+jz),
/// expanded in z⁻¹ down to `z_lo`.
pub fn j_operator<S: Scalar>(
    d_max: u32,
    z_lo: i64,
    t0: &S,
    env: &ParamEnv<S>,
) -> Result<JOperator<S>, EngineError> {
    let build = |nu_i: &S, nu_diff: &S| -> Result<TruncSeries<S>, EngineError> {
        // nu_diff = ν_i − ν_other; the denominator factors are jz(ν_diff + jz).
        let expo = TruncSeries::monomial(
            SeriesVar::Z,
            -1,
            env.t.mul(nu_i).add(t0),
        )
        .truncated_below(z_lo);
        let prefac = expo.exp()?;
        let mut acc = TruncSeries::one(SeriesVar::Z).truncated_below(z_lo);
        let mut denom_inv = TruncSeries::one(SeriesVar::Z).truncated_below(z_lo);
        let mut s_pow = S::one();
        for d in 1..=d_max as i64 {
            s_pow = s_pow.mul(&env.s);
            let f1 = TruncSeries::monomial(SeriesVar::Z, 1, S::from_int(d)).truncated_below(z_lo);
            let f2 = TruncSeries::from_terms(
                SeriesVar::Z,
                vec![(0, nu_diff.clone()), (1, S::from_int(d))],
            )
            .truncated_below(z_lo);
            denom_inv = denom_inv.mul(&f1.recip()?)?.mul(&f2.recip()?)?;
            acc = acc.add(&denom_inv.scale(&s_pow))?;
        }
        prefac.mul(&acc)
    };
    Ok(JOperator {
        j0: build(&env.nu0, &env.nu)?,
        jinf: build(&env.nuinf, &env.nu.neg())?,
        d_max,
    })
}

/// Apply the parameter derivation z∂_t to a z-series (symbolic coefficients).
pub fn z_dt(series: &TruncSeries<ParamScalar>) -> TruncSeries<ParamScalar> {
    let mut out = series.map(|c| c.dt());
    out = out.mul_monomial(1, &<ParamScalar as Coeff>::one());
    out
}

/// z∂_{t₀} of a z-series.
pub fn z_dt0(series: &TruncSeries<ParamScalar>) -> TruncSeries<ParamScalar> {
    series.map(|c| c.dt0()).mul_monomial(1, &<ParamScalar as Coeff>::one())
}

// ---------------------------------------------------------------------------
// S-matrix.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SMatrix<S: Scalar> {
    pub mat: MatrixSeries<S>,
    pub d_max: u32,
    /// coefficients are certified for z-exponents ≥ −order
    pub order: i64,
}

/// Assemble S_τ at the locus τ = t·P (t₀ = 0) from the J-operator.
pub fn s_matrix(d_max: u32, order: i64, env: &ParamEnv<ParamScalar>) -> Result<SMatrix<ParamScalar>, EngineError> {
    let z_lo = -order - 1;
    let j = j_operator(d_max, z_lo, &<ParamScalar as Coeff>::zero(), env)?;
    let nu_inv = env.nu.inv()?;
    // (Jφ₀, φ₀) = J₀/ν, (Jφ∞, φ∞) = −J∞/ν.
    let p0 = j.j0.scale(&nu_inv);
    let pi = j.jinf.scale(&nu_inv).neg();
    // φ⁰(z∂_t) = z∂_t − ν∞, φ^∞(z∂_t) = z∂_t − ν₀.
    let col = |p: &TruncSeries<ParamScalar>| -> (TruncSeries<ParamScalar>, TruncSeries<ParamScalar>) {
        let zdt = z_dt(p);
        let comp0 = zdt.sub(&p.scale(&env.nuinf)).expect("window");
        let compi = zdt.sub(&p.scale(&env.nu0)).expect("window");
        (comp0, compi)
    };
    let (s00, si0) = col(&p0);
    let (s0i, sii) = col(&pi);
    // Novikov degree d first contributes at z^{-(2d-1)}, so coefficients are
    // complete only down to z^{-2 d_max}; bake that into the windows.
    let eff = order.min(2 * d_max as i64);
    let mat = MatrixSeries {
        a00: s00.truncated_below(-eff),
        a0i: s0i.truncated_below(-eff),
        ai0: si0.truncated_below(-eff),
        aii: sii.truncated_below(-eff),
    };
    Ok(SMatrix { mat, d_max, order: eff })
}

impl<S: Scalar> SMatrix<S> {
    /// S*(−z)S(z) − 1: must vanish on the certified window.
    pub fn unitarity_defect(&self) -> Result<MatrixSeries<S>, EngineError> {
        let star = self.mat.pairing_transpose().flip_z();
        let prod = star.mul(&self.mat)?;
        prod.sub(&MatrixSeries::identity())
    }

    /// The z^{-j} coefficient as a constant matrix.
    pub fn coeff(&self, j: i64) -> Mat2<S> {
        Mat2 {
            a00: self.mat.a00.coeff(-j),
            a0i: self.mat.a0i.coeff(-j),
            ai0: self.mat.ai0.coeff(-j),
            aii: self.mat.aii.coeff(-j),
        }
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T) -> SMatrix<T> {
        SMatrix { mat: self.mat.map_scalars(&f), d_max: self.d_max, order: self.order }
    }
}

pub fn eval_smatrix(s: &SMatrix<ParamScalar>, a: &Assignment) -> Result<SMatrix<RatScalar>, EngineError> {
    // evaluation points avoid every denominator locus, so eval cannot fail
    // on entries produced by the constructor; surface a failure explicitly.
    let out = s.map_scalars(|c| RatScalar(c.eval(a).expect("S-matrix entry evaluates")));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Mirror coordinate change.
// ---------------------------------------------------------------------------

/// The near-identity solutions of λ − νlogλ = x − νlogx + s/x + tν₀
/// (sector 0; ν ↦ −ν, tν₀ ↦ tν∞ for sector ∞), in both directions.
#[derive(Clone, Debug)]
pub struct MirrorChange<S: Scalar> {
    pub sector: Sector,
    /// x(λ) = λ(1 + a₁λ⁻¹ + …), in the variable λ.
    pub x_of_lambda: TruncSeries<S>,
    /// λ(x) = x(1 + b₁x⁻¹ + …), in the variable x.
    pub lambda_of_x: TruncSeries<S>,
}

pub fn mirror_coordinate<S: Scalar>(
    sector: Sector,
    tail_depth: u32,
    env: &ParamEnv<S>,
) -> Result<MirrorChange<S>, EngineError> {
    let (nu, tnu) = match sector {
        Sector::Zero => (env.nu.clone(), env.t.mul(&env.nu0)),
        Sector::Inf => (env.nu.neg(), env.t.mul(&env.nuinf)),
    };
    let lo = 1 - tail_depth as i64;
    let lam = TruncSeries::<S>::monomial(SeriesVar::Lambda, 1, S::one());
    let lam_inv = TruncSeries::<S>::monomial(SeriesVar::Lambda, -1, S::one());
    // x = λ(1+u): u ← [ν log(1+u) − s/(λ(1+u)) − tν_i] / λ, converging
    // one λ-order per iteration.
    let mut u: TruncSeries<S> = TruncSeries::zero(SeriesVar::Lambda).truncated_below(lo - 1);
    for _ in 0..=(tail_depth as usize + 1) {
        let one_plus = TruncSeries::one(SeriesVar::Lambda).add(&u)?;
        let log_term = one_plus.log()?.scale(&nu);
        let s_term = one_plus.recip()?.mul(&lam_inv)?.scale(&env.s);
        let num = log_term.sub(&s_term)?.sub(&TruncSeries::constant(SeriesVar::Lambda, tnu.clone()))?;
        u = num.mul(&lam_inv)?.truncated_below(lo - 1);
    }
    let x_of_lambda = lam.mul(&TruncSeries::one(SeriesVar::Lambda).add(&u)?)?.truncated_below(lo);
    let lambda_of_x = x_of_lambda.revert(SeriesVar::X)?;
    Ok(MirrorChange { sector, x_of_lambda, lambda_of_x })
}

impl<S: Scalar> MirrorChange<S> {
    /// The antiderivative identity along the change:
    /// (λ − νlogλ + s/λ) − (x − νlogx + s/x) = s/λ + tν_i, checked at the
    /// series level (the log difference is log(1+u), a genuine series).
    pub fn antiderivative_identity(&self, env: &ParamEnv<S>) -> Result<bool, EngineError> {
        let (nu, tnu) = match self.sector {
            Sector::Zero => (env.nu.clone(), env.t.mul(&env.nu0)),
            Sector::Inf => (env.nu.neg(), env.t.mul(&env.nuinf)),
        };
        let lam = TruncSeries::<S>::monomial(SeriesVar::Lambda, 1, S::one());
        let lam_inv = TruncSeries::<S>::monomial(SeriesVar::Lambda, -1, S::one());
        let x = &self.x_of_lambda;
        // log x − log λ = log(x/λ)
        let ratio = x.mul(&lam_inv)?;
        let log_ratio = ratio.log()?;
        let lhs = lam
            .sub(x)?
            .add(&log_ratio.scale(&nu))?
            .add(&lam_inv.scale(&env.s))?
            .sub(&x.recip()?.scale(&env.s))?;
        let rhs = lam_inv
            .scale(&env.s)
            .add(&TruncSeries::constant(SeriesVar::Lambda, tnu))?;
        lhs.eq_on_common_window(&rhs)
    }
}

// ---------------------------------------------------------------------------
// Bigraded series: λ-series whose coefficients are z-series, H-valued.
// ---------------------------------------------------------------------------

/// H-valued series in (λ, z): the shape of S_τ f^χ and of the mode sums.
#[derive(Clone, Debug)]
pub struct BiSeries<S: Scalar> {
    pub c0: TruncSeries<TruncSeries<S>>,
    pub cinf: TruncSeries<TruncSeries<S>>,
}

impl<S: Scalar> BiSeries<S> {
    pub fn zero() -> Self {
        BiSeries {
            c0: TruncSeries::zero(SeriesVar::Lambda),
            cinf: TruncSeries::zero(SeriesVar::Lambda),
        }
    }

    pub fn from_exponent(v: &VertexExponent<S>) -> Self {
        let mut c0: TruncSeries<TruncSeries<S>> = TruncSeries::zero(SeriesVar::Lambda)
            .truncated_below(v.lambda_lo)
            .truncated_above(v.lambda_hi);
        let mut ci = c0.clone();
        for (d, lv) in &v.terms {
            if !lv.c0.is_known_zero() {
                c0.set_coeff(*d, lv.c0.clone());
            }
            if !lv.cinf.is_known_zero() {
                ci.set_coeff(*d, lv.cinf.clone());
            }
        }
        BiSeries { c0, cinf: ci }
    }

    /// Assemble Σ_n I^{(n)}(expansion)(−z)^n from per-mode λ-series.
    pub fn from_mode_expansions(
        modes: &BTreeMap<i64, (TruncSeries<S>, TruncSeries<S>)>,
    ) -> Self {
        let mut c0: TruncSeries<TruncSeries<S>> = TruncSeries::zero(SeriesVar::Lambda);
        let mut ci = c0.clone();
        // inner z-window is bounded by the built mode range
        let n_lo = *modes.keys().next().unwrap();
        let n_hi = *modes.keys().next_back().unwrap();
        let mut lam_lo: Option<i64> = None;
        let mut lam_hi: Option<i64> = None;
        let mut acc: BTreeMap<i64, (TruncSeries<S>, TruncSeries<S>)> = BTreeMap::new();
        let max_opt = |a: Option<i64>, b: Option<i64>| match (a, b) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (Some(x), None) | (None, Some(x)) => Some(x),
            (None, None) => None,
        };
        let min_opt = |a: Option<i64>, b: Option<i64>| match (a, b) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (Some(x), None) | (None, Some(x)) => Some(x),
            (None, None) => None,
        };
        for (n, (e0, einf)) in modes {
            let sign = if n.rem_euclid(2) == 0 { 1 } else { -1 };
            lam_lo = max_opt(lam_lo, max_opt(e0.lo, einf.lo));
            lam_hi = min_opt(lam_hi, min_opt(e0.hi, einf.hi));
            for (d, c) in e0.terms() {
                let entry = acc.entry(*d).or_insert_with(|| {
                    (
                        TruncSeries::zero(SeriesVar::Z)
                            .truncated_below(n_lo)
                            .truncated_above(n_hi),
                        TruncSeries::zero(SeriesVar::Z)
                            .truncated_below(n_lo)
                            .truncated_above(n_hi),
                    )
                });
                entry.0.set_coeff(*n, c.mul_int(sign));
            }
            for (d, c) in einf.terms() {
                let entry = acc.entry(*d).or_insert_with(|| {
                    (
                        TruncSeries::zero(SeriesVar::Z)
                            .truncated_below(n_lo)
                            .truncated_above(n_hi),
                        TruncSeries::zero(SeriesVar::Z)
                            .truncated_below(n_lo)
                            .truncated_above(n_hi),
                    )
                });
                entry.1.set_coeff(*n, c.mul_int(sign));
            }
        }
        for (d, (z0, zi)) in acc {
            if !z0.is_known_zero() {
                c0.set_coeff(d, z0);
            }
            if !zi.is_known_zero() {
                ci.set_coeff(d, zi);
            }
        }
        c0.lo = lam_lo;
        c0.hi = lam_hi;
        ci.lo = lam_lo;
        ci.hi = lam_hi;
        let c0 = c0.restricted(lam_lo, lam_hi);
        let ci = ci.restricted(lam_lo, lam_hi);
        BiSeries { c0, cinf: ci }
    }

    /// Apply a z-matrix-series to the H-components, λ-coefficient-wise.
    pub fn apply_matrix(&self, m: &MatrixSeries<S>) -> Result<BiSeries<S>, EngineError> {
        let map_component = |a: &TruncSeries<S>,
                             b: &TruncSeries<S>,
                             src0: &TruncSeries<TruncSeries<S>>,
                             srci: &TruncSeries<TruncSeries<S>>|
         -> Result<TruncSeries<TruncSeries<S>>, EngineError> {
            let mut out: TruncSeries<TruncSeries<S>> = TruncSeries::zero(SeriesVar::Lambda);
            out.lo = match (src0.lo, srci.lo) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (Some(x), None) | (None, Some(x)) => Some(x),
                _ => None,
            };
            out.hi = match (src0.hi, srci.hi) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (Some(x), None) | (None, Some(x)) => Some(x),
                _ => None,
            };
            let mut keys: Vec<i64> = src0.terms().map(|(d, _)| *d).collect();
            for (d, _) in srci.terms() {
                if !keys.contains(d) {
                    keys.push(*d);
                }
            }
            for d in keys {
                let v0 = src0.coeff(d);
                let vi = srci.coeff(d);
                let val = a.mul(&v0)?.add(&b.mul(&vi)?)?;
                if !val.is_known_zero() {
                    out.set_coeff(d, val);
                }
            }
            Ok(out)
        };
        Ok(BiSeries {
            c0: map_component(&m.a00, &m.a0i, &self.c0, &self.cinf)?,
            cinf: map_component(&m.ai0, &m.aii, &self.c0, &self.cinf)?,
        })
    }

    pub fn mul_scalar_biseries(
        &self,
        f: &TruncSeries<TruncSeries<S>>,
    ) -> Result<BiSeries<S>, EngineError> {
        Ok(BiSeries { c0: self.c0.mul(f)?, cinf: self.cinf.mul(f)? })
    }

    pub fn add(&self, o: &BiSeries<S>) -> Result<BiSeries<S>, EngineError> {
        Ok(BiSeries { c0: self.c0.add(&o.c0)?, cinf: self.cinf.add(&o.cinf)? })
    }

    pub fn sub(&self, o: &BiSeries<S>) -> Result<BiSeries<S>, EngineError> {
        Ok(BiSeries { c0: self.c0.sub(&o.c0)?, cinf: self.cinf.sub(&o.cinf)? })
    }

    pub fn eq_on_common_window(&self, o: &BiSeries<S>) -> Result<bool, EngineError> {
        Ok(bis_eq(&self.c0, &o.c0)? && bis_eq(&self.cinf, &o.cinf)?)
    }
}

fn bis_eq<S: Scalar>(
    a: &TruncSeries<TruncSeries<S>>,
    b: &TruncSeries<TruncSeries<S>>,
) -> Result<bool, EngineError> {
    let lo = match (a.lo, b.lo) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (Some(x), None) | (None, Some(x)) => Some(x),
        _ => None,
    };
    let hi = match (a.hi, b.hi) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (Some(x), None) | (None, Some(x)) => Some(x),
        _ => None,
    };
    let in_win = |d: i64| lo.map_or(true, |l| d >= l) && hi.map_or(true, |h| d <= h);
    let mut keys: Vec<i64> = a.terms().map(|(d, _)| *d).collect();
    for (d, _) in b.terms() {
        if !keys.contains(d) {
            keys.push(*d);
        }
    }
    for d in keys {
        if !in_win(d) {
            continue;
        }
        let av = a.coeff(d);
        let bv = b.coeff(d);
        match av.eq_on_common_window(&bv) {
            Ok(true) => {}
            Ok(false) => return Ok(false),
            // nothing certified in common: vacuously equal here
            Err(EngineError::EmptyWindow) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

/// e^{(s/λ + tν_i)/z} as a (λ, z)-bigraded series: for each z^{-k}, a
/// λ-polynomial of degree ≥ −k in λ⁻¹.
pub fn conjugation_prefactor<S: Scalar>(
    sector: Sector,
    z_lo: i64,
    lam_lo: i64,
    env: &ParamEnv<S>,
) -> Result<TruncSeries<TruncSeries<S>>, EngineError> {
    let tnu = match sector {
        Sector::Zero => env.t.mul(&env.nu0),
        Sector::Inf => env.t.mul(&env.nuinf),
    };
    // argument: (s λ^{-1} + tν_i) z^{-1}, exp in the z-direction with
    // λ-polynomial coefficients.
    let mut arg_inner = TruncSeries::zero(SeriesVar::Lambda);
    arg_inner.set_coeff(-1, env.s.clone());
    arg_inner.set_coeff(0, tnu);
    let arg: TruncSeries<TruncSeries<S>> =
        TruncSeries::monomial(SeriesVar::Z, -1, arg_inner).truncated_below(z_lo);
    let mut acc: TruncSeries<TruncSeries<S>> =
        TruncSeries::one(SeriesVar::Z).truncated_below(z_lo);
    let mut power = acc.clone();
    let mut k: i64 = 0;
    loop {
        k += 1;
        power = power.mul(&arg)?.scale_ratio(1, k).restricted(arg.lo, arg.hi);
        if power.is_known_zero() {
            break;
        }
        acc = acc.add(&power)?;
    }
    // transpose: outer λ, inner z, and clamp the λ-window.
    transpose_bigraded(&acc, lam_lo)
}

/// Swap the grading of a (z-outer, λ-inner) series into (λ-outer, z-inner).
fn transpose_bigraded<S: Scalar>(
    zouter: &TruncSeries<TruncSeries<S>>,
    lam_lo: i64,
) -> Result<TruncSeries<TruncSeries<S>>, EngineError> {
    let mut out: TruncSeries<TruncSeries<S>> = TruncSeries::zero(SeriesVar::Lambda);
    out.lo = Some(lam_lo);
    let z_lo = zouter.lo;
    for (zk, inner) in zouter.terms() {
        for (ld, c) in inner.terms() {
            if *ld < lam_lo {
                continue;
            }
            let mut cur = out.coeff(*ld);
            if cur.is_known_zero() {
                cur = TruncSeries::zero(SeriesVar::Z);
                cur.lo = z_lo;
            }
            cur.set_coeff(*zk, c.clone());
            out.set_coeff(*ld, cur);
        }
    }
    // outer hi is exact: the prefactor has no positive λ-powers at all
    out.hi = None;
    Ok(out)
}

/// Expansions of a mode family: at λ = ∞ in the λ coordinate (`None`) or
/// composed with a coordinate series (`Some(x_of_lambda)`).
pub fn family_biseries<S: Scalar>(
    fam: &ModeFamily<S>,
    lam_lo: i64,
    compose_with: Option<&TruncSeries<S>>,
) -> Result<BiSeries<S>, EngineError> {
    let mut expansions = BTreeMap::new();
    for (n, m) in &fam.modes {
        let pair = match compose_with {
            None => {
                let (a, b) = (
                    m.c0.expand_at_infinity(SeriesVar::Lambda, lam_lo, &fam.ctx)?,
                    m.cinf.expand_at_infinity(SeriesVar::Lambda, lam_lo, &fam.ctx)?,
                );
                (a, b)
            }
            Some(g) => {
                let a = m.c0.eval_series(g, &fam.ctx)?.truncated_below(lam_lo);
                let b = m.cinf.eval_series(g, &fam.ctx)?.truncated_below(lam_lo);
                (a, b)
            }
        };
        expansions.insert(*n, pair);
    }
    Ok(BiSeries::from_mode_expansions(&expansions))
}

/// The three pipelines computing S_τ f^{χ}:
/// (a) the S-matrix applied to the descendant exponent;
/// (b) the closed form e^{(s/λ+tν₀)/z}·Σ I^{(n)}(τ,λ)(−z)^n;
/// (c) the x-side ladder composed with the mirror change x(λ).
pub struct ConjugatedPipelines<S: Scalar> {
    pub direct: BiSeries<S>,
    pub closed_form: BiSeries<S>,
    pub mirror: BiSeries<S>,
}

pub fn conjugated_exponent<S: Scalar>(
    sector: Sector,
    smat: &SMatrix<S>,
    fam: &ModeFamily<S>,
    mirror: &MirrorChange<S>,
    d_depth: u32,
    z_lo: i64,
    lam_lo: i64,
    env: &ParamEnv<S>,
) -> Result<ConjugatedPipelines<S>, EngineError> {
    let sign = 1;
    let vx = crate::vertex::descendant_exponent(sign, sector, d_depth, z_lo, env)?;
    let fam_bi = BiSeries::from_exponent(&vx);
    let direct = fam_bi.apply_matrix(&smat.mat)?;
    let prefac = conjugation_prefactor(sector, z_lo, lam_lo, env)?;
    let at_lambda = family_biseries(fam, lam_lo, None)?;
    let closed_form = at_lambda.mul_scalar_biseries(&prefac)?;
    let mirror_side = family_biseries(fam, lam_lo, Some(&mirror.x_of_lambda))?;
    Ok(ConjugatedPipelines { direct, closed_form, mirror: mirror_side })
}

/// Check the eigenrelation (−z∂_λ + ν/λ + s/λ²)·F = F for a bigraded family
/// (with s = 0 and the descendant exponent this is (−z∂_λ + ν/λ)f^χ = f^χ).
pub fn eigenrelation_holds<S: Scalar>(
    f: &BiSeries<S>,
    nu: &S,
    s: &S,
) -> Result<bool, EngineError> {
    let apply = |c: &TruncSeries<TruncSeries<S>>| -> Result<TruncSeries<TruncSeries<S>>, EngineError> {
        // −z∂_λ: term λ^d·v(z) ↦ −d·λ^{d−1}·z·v(z)
        let mut dz: TruncSeries<TruncSeries<S>> = TruncSeries::zero(SeriesVar::Lambda);
        dz.lo = c.lo.map(|l| l - 1);
        dz.hi = c.hi.map(|h| h - 1);
        for (d, v) in c.terms() {
            if *d != 0 {
                let shifted = v.mul_monomial(1, &S::one()).scale(&S::from_int(-d));
                if !shifted.is_known_zero() {
                    dz.set_coeff(d - 1, shifted);
                }
            }
        }
        // + ν/λ · c + s/λ² · c
        let mut nu_shift: TruncSeries<TruncSeries<S>> = TruncSeries::zero(SeriesVar::Lambda);
        nu_shift.set_coeff(-1, TruncSeries::constant(SeriesVar::Z, nu.clone()));
        let mut s_shift: TruncSeries<TruncSeries<S>> = TruncSeries::zero(SeriesVar::Lambda);
        s_shift.set_coeff(-2, TruncSeries::constant(SeriesVar::Z, s.clone()));
        let term2 = c.mul(&nu_shift)?;
        let term3 = if s.is_zero() {
            TruncSeries::zero(SeriesVar::Lambda)
        } else {
            c.mul(&s_shift)?
        };
        dz.add(&term2)?.add(&term3)
    };
    let l0 = apply(&f.c0)?;
    let li = apply(&f.cinf)?;
    Ok(bis_eq(&l0, &f.c0)? && bis_eq(&li, &f.cinf)?)
}

// ---------------------------------------------------------------------------
// The W kernel and phase factors.
// ---------------------------------------------------------------------------

/// W_{kl} matrices from ΣW_{kl}z^{−k}w^{−l} = (S*(w)S(z) − 1)/(z⁻¹+w⁻¹),
/// solved by W_{k,l} = N_{k+1,l} − W_{k+1,l−1} with N_{a,b} = S_b* S_a − δ.
#[derive(Clone, Debug)]
pub struct WKernel<S: Scalar> {
    pub table: BTreeMap<(i64, i64), Mat2<S>>,
    pub order: i64,
}

pub fn w_kernel<S: Scalar>(smat: &SMatrix<S>) -> WKernel<S> {
    let order = smat.order;
    let s_of = |j: i64| -> Mat2<S> {
        if j == 0 {
            Mat2::identity()
        } else {
            smat.coeff(j)
        }
    };
    // N_{a,b} = S_a* S_b − δ: the variable assignment pairing the starred
    // factor with the first kernel index is the one consistent with both
    // paper anchors and the normal-ordering scalar (see the oracle test).
    let n_of = |a: i64, b: i64| -> Mat2<S> {
        let m = s_of(a).pairing_transpose().mul(&s_of(b));
        if a == 0 && b == 0 {
            m.sub(&Mat2::identity())
        } else {
            m
        }
    };
    let mut table: BTreeMap<(i64, i64), Mat2<S>> = BTreeMap::new();
    // W_{k,l} available for k + l ≤ order − 1.
    for l in 0..order {
        for k in 0..(order - l) {
            let mut val = n_of(k + 1, l);
            if l >= 1 {
                if let Some(prev) = table.get(&(k + 1, l - 1)) {
                    val = val.sub(prev);
                }
            }
            table.insert((k, l), val);
        }
    }
    WKernel { table, order }
}

impl<S: Scalar> WKernel<S> {
    pub fn get(&self, k: i64, l: i64) -> Mat2<S> {
        self.table.get(&(k, l)).cloned().unwrap_or_else(Mat2::zero)
    }

    /// The telescoping anchor: W_{k,l−1} + W_{k−1,l} = S_k* S_l − δ_{k0}δ_{l0}.
    pub fn telescoping_holds(&self, smat: &SMatrix<S>) -> bool {
        let s_of = |j: i64| -> Mat2<S> {
            if j == 0 {
                Mat2::identity()
            } else {
                smat.coeff(j)
            }
        };
        for k in 0..self.order {
            for l in 0..=(self.order - 1 - k) {
                let mut lhs = Mat2::zero();
                if l >= 1 {
                    lhs = lhs.add(&self.get(k, l - 1));
                }
                if k >= 1 {
                    lhs = lhs.add(&self.get(k - 1, l));
                }
                if k == 0 && l == 0 {
                    continue;
                }
                let rhs = s_of(k).pairing_transpose().mul(&s_of(l));
                if !lhs.sub(&rhs).is_zero() {
                    return false;
                }
            }
        }
        true
    }
}

/// The phase W_i = W(f₊^{χ_i}, f₊^{χ_i}): the quadratic form contracted over
/// the z-coefficients of the positive part of the *unconjugated* descendant
/// exponent, i.e. Σ_{k,l≥0}(W_{kl}·J^{(l)}(λ), J^{(k)}(λ))(−1)^{k+l} with the
/// s-free descendant modes J. Returned as a λ-series.
pub fn w_phase_series<S: Scalar>(
    kernel: &WKernel<S>,
    desc: &ModeFamily<S>,
    lo: i64,
    env: &ParamEnv<S>,
) -> Result<TruncSeries<S>, EngineError> {
    let nu_inv = env.nu.inv()?;
    let (_, n_max) = desc.range();
    let k_top = n_max.min(kernel.order - 1);
    let var = SeriesVar::Lambda;
    let mut acc = TruncSeries::zero(var).truncated_below(lo);
    let mut expansions: BTreeMap<i64, (TruncSeries<S>, TruncSeries<S>)> = BTreeMap::new();
    for n in 0..=k_top {
        let m = desc.mode(n);
        expansions.insert(
            n,
            (
                m.c0.expand_at_infinity(var, lo, &desc.ctx)?,
                m.cinf.expand_at_infinity(var, lo, &desc.ctx)?,
            ),
        );
    }
    for k in 0..=k_top {
        for l in 0..=k_top {
            if k + l > kernel.order - 1 {
                continue;
            }
            let w = kernel.get(k, l);
            if w.is_zero() {
                continue;
            }
            let (l0, li) = &expansions[&l];
            let (k0, ki) = &expansions[&k];
            // (W v)_0 = w00·v0 + w0i·vi etc., then pair: (a,b) = (a0 b0 − ai bi)/ν
            let wv0 = l0.scale(&w.a00).add(&li.scale(&w.a0i))?;
            let wvi = l0.scale(&w.ai0).add(&li.scale(&w.aii))?;
            let paired = wv0.mul(k0)?.sub(&wvi.mul(ki)?)?.scale(&nu_inv);
            let sign = if (k + l).rem_euclid(2) == 0 { 1 } else { -1 };
            acc = acc.add(&paired.scale(&S::from_int(sign)))?;
        }
    }
    Ok(acc)
}

/// The pairing (I^{(0)}(λ), I^{(0)}(λ)) of the descendant zero-mode
/// −λ/(λ−ν)·φ_sec, as a rational function of λ on the s = 0 locus.
pub fn descendant_zero_mode_pairing<S: Scalar>(
    sector: Sector,
    env: &ParamEnv<S>,
) -> (LocusRat<S>, QuadField<S>) {
    let nu = match sector {
        Sector::Zero => env.nu.clone(),
        Sector::Inf => env.nu.neg(),
    };
    let ctx0 = QuadField::new(nu.clone(), S::zero());
    // (v,v) with v = −λ/(λ−ν) φ_sec: (±1/ν)·λ²/(λ−ν)² = ±λ⁴/(ν·D₀²).
    let sign = match sector {
        Sector::Zero => 1,
        Sector::Inf => -1,
    };
    let num = XPoly::x().pow(4).scale(&env.nu.inv().expect("nu invertible").mul_int(sign));
    (LocusRat::new(num, 0, 2, &ctx0), ctx0)
}

/// φ(x) = 1 − ν_sec/x − s/x² as a rational function.
pub fn phi_locus<S: Scalar>(ctx: &QuadField<S>) -> LocusRat<S> {
    LocusRat::new(ctx.d_poly(), 2, 0, ctx)
}

/// C₀ = tν₀/ν + Qe^t/ν² and C∞ = −tν∞/ν + Qe^t/ν².
pub fn phase_constant<S: Scalar>(sector: Sector, env: &ParamEnv<S>) -> S {
    let nu_inv = env.nu.inv().expect("nu invertible");
    let nu_inv2 = nu_inv.mul(&nu_inv);
    match sector {
        Sector::Zero => env.t.mul(&env.nu0).mul(&nu_inv).add(&env.s.mul(&nu_inv2)),
        Sector::Inf => env.t.mul(&env.nuinf).mul(&nu_inv).neg().add(&env.s.mul(&nu_inv2)),
    }
}

/// The closed form of the phase: C_i ± 2s/(νx) + log(λ(λ∓ν)/(x²∓νx−s))
/// along the mirror change, expanded as a series in λ with x = x(λ).
pub fn w_phase_closed_form<S: Scalar>(
    sector: Sector,
    mirror: &MirrorChange<S>,
    lo: i64,
    env: &ParamEnv<S>,
) -> Result<TruncSeries<S>, EngineError> {
    let nu_sec = match sector {
        Sector::Zero => env.nu.clone(),
        Sector::Inf => env.nu.neg(),
    };
    let c_const = phase_constant(sector, env);
    let sign2 = match sector {
        Sector::Zero => 2i64,
        Sector::Inf => -2,
    };
    let nu_inv = env.nu.inv()?;
    let x = mirror.x_of_lambda.truncated_below(lo - 3);
    let linear = x.recip()?.scale(&env.s.mul(&nu_inv).mul_int(sign2));
    // ratio λ(λ−ν_sec)/(x² − ν_sec x − s) as a unit series at λ = ∞
    let lam = TruncSeries::<S>::monomial(SeriesVar::Lambda, 1, S::one());
    let lam_minus = lam.sub(&TruncSeries::constant(SeriesVar::Lambda, nu_sec.clone()))?;
    let numer = lam.mul(&lam_minus)?;
    let denom = x
        .mul(&x)?
        .sub(&x.scale(&nu_sec))?
        .sub(&TruncSeries::constant(SeriesVar::Lambda, env.s.clone()))?;
    let ratio = numer.mul(&denom.recip()?)?;
    let log_ratio = ratio.log()?;
    TruncSeries::constant(SeriesVar::Lambda, c_const)
        .add(&linear)?
        .add(&log_ratio)
}

/// ∂_x of the phase equals
/// [−(I^{(0)}(τ,x), I^{(0)}(τ,x)) + (I^{(0)}(λ(x)), I^{(0)}(λ(x)))]·φ(x),
/// with I^{(0)}(τ,·) the full mode seed and I^{(0)}(λ) the descendant
/// zero mode evaluated along λ(x). The phase is carried from λ to x by
/// composition with the mirror change.
pub fn w_phase_derivative_identity<S: Scalar>(
    sector: Sector,
    kernel: &WKernel<S>,
    desc: &ModeFamily<S>,
    fam: &ModeFamily<S>,
    mirror: &MirrorChange<S>,
    lo: i64,
    env: &ParamEnv<S>,
) -> Result<bool, EngineError> {
    let w_lambda = w_phase_series(kernel, desc, lo, env)?;
    let w_x = w_lambda.compose(&mirror.lambda_of_x)?;
    let lhs = w_x.derivative();
    let seed = fam.mode(0);
    let pair_x = seed
        .pairing(seed, &fam.ctx, &env.nu)?
        .expand_at_infinity(SeriesVar::X, lo - 1, &fam.ctx)?;
    let (pair_lam_rat, ctx0) = descendant_zero_mode_pairing(sector, env);
    let pair_lam = pair_lam_rat
        .eval_series(&mirror.lambda_of_x.truncated_below(lo - 5), &ctx0)?;
    let phi = phi_locus(&fam.ctx).expand_at_infinity(SeriesVar::X, lo - 1, &fam.ctx)?;
    let rhs = pair_lam.sub(&pair_x)?.mul(&phi)?;
    lhs.eq_on_common_window(&rhs)
}

/// The two antiderivative identities, checked by exact differentiation at the
/// rational level.
pub fn antiderivative_identities<S: Scalar>(
    sector: Sector,
    fam: &ModeFamily<S>,
    env: &ParamEnv<S>,
) -> Result<bool, EngineError> {
    let ctx = &fam.ctx;
    // every ν in the closed forms is the sector's ν (negated for χ∞)
    let nu_sec_inv = ctx.nu.inv()?;
    // (1): d/dx[(1/ν)(−s/x + x − ν log x + ν log(x²−νx−s))]
    //      = (I⁰(τ,x), I⁰(τ,x)) φ(x).
    // derivative: (1/ν)(s/x² + 1) − 1/x + D′/D.
    let seed = fam.mode(0);
    let pair = seed.pairing(seed, ctx, &env.nu)?;
    let phi = phi_locus(ctx);
    let rhs1 = pair.mul(&phi, ctx);
    let term_a = LocusRat::new(
        XPoly::from_coeffs(vec![env.s.clone(), S::zero(), S::one()]).scale(&nu_sec_inv),
        2,
        0,
        ctx,
    );
    let term_b = LocusRat::new(XPoly::one(), 1, 0, ctx).neg();
    let term_c = LocusRat::new(ctx.d_poly().derivative(), 0, 1, ctx);
    let lhs1 = term_a.add(&term_b, ctx).add(&term_c, ctx);
    if lhs1 != rhs1 {
        return Ok(false);
    }
    // (2): d/dλ[(1/ν)(λ + ν log(λ−ν_sec))] = (I⁰(λ), I⁰(λ))(1 − ν_sec/λ)
    // on the s = 0 locus.
    let (pair0, ctx0) = descendant_zero_mode_pairing(sector, env);
    let nu_sec = ctx.nu.clone();
    let one_minus = LocusRat::new(
        XPoly::from_coeffs(vec![nu_sec.clone().neg(), S::one()]),
        1,
        0,
        &ctx0,
    );
    let rhs2 = pair0.mul(&one_minus, &ctx0);
    // d/dλ: 1/ν_sec + 1/(λ−ν_sec) = 1/ν_sec + λ/D₀ with D₀ = λ² − ν_sec λ.
    let lhs2 = LocusRat::constant(nu_sec_inv.clone()).add_auto(&LocusRat::new(
        XPoly::x(),
        0,
        1,
        &ctx0,
    ));
    Ok(lhs2 == rhs2)
}

// ---------------------------------------------------------------------------
// Commutation exponents and the final cancellation.
// ---------------------------------------------------------------------------

/// −Ω((n+1)φ₀ + nφ∞, f^{χ_sec·±}) − Ω(mφ₀ + (m+1)φ∞, f^{∓χ_sec}) as a
/// λ-series, compared against the closed form (m−n∓1)·λ/ν.
pub fn commutation_exponent<S: Scalar>(
    m: i64,
    n: i64,
    sector: Sector,
    exponent: &VertexExponent<S>,
    env: &ParamEnv<S>,
) -> Result<(TruncSeries<S>, TruncSeries<S>), EngineError> {
    assert_eq!(exponent.sector, sector);
    assert_eq!(exponent.sign, 1);
    let a1 = CohClass::<S>::phi0()
        .scale(&S::from_int(n + 1))
        .add(&CohClass::phi_inf().scale(&S::from_int(n)));
    let a2 = CohClass::<S>::phi0()
        .scale(&S::from_int(m))
        .add(&CohClass::phi_inf().scale(&S::from_int(m + 1)));
    let v1 = LoopVector::monomial(0, &a1);
    let v2 = LoopVector::monomial(0, &a2);
    let mut acc: TruncSeries<S> = TruncSeries::zero(SeriesVar::Lambda)
        .truncated_below(exponent.lambda_lo)
        .truncated_above(exponent.lambda_hi);
    for (d, lv) in &exponent.terms {
        // Sector 0 pairs Γ^{χ₀}⊗Γ^{−χ₀}: −Ω(v1, +f) − Ω(v2, −f) = o2 − o1.
        // Sector ∞ pairs Γ^{−χ∞}⊗Γ^{χ∞}: −Ω(v1, −f) − Ω(v2, +f) = o1 − o2.
        let om1 = v1.symplectic_form(lv, env);
        let om2 = v2.symplectic_form(lv, env);
        if let (Ok(o1), Ok(o2)) = (om1, om2) {
            let val = match sector {
                Sector::Zero => o2.sub(&o1),
                Sector::Inf => o1.sub(&o2),
            };
            if !val.is_zero() {
                let cur = acc.coeff(*d).add(&val);
                acc.set_coeff(*d, cur);
            }
        }
    }
    let factor = match sector {
        Sector::Zero => m - n - 1,
        Sector::Inf => m - n + 1,
    };
    let closed = TruncSeries::monomial(SeriesVar::Lambda, 1, S::from_int(factor).mul(&env.nu.inv()?))
        .truncated_below(exponent.lambda_lo)
        .truncated_above(exponent.lambda_hi);
    Ok((acc, closed))
}

/// Exponent bookkeeping at log level: coefficients of the listed symbols in
/// the exponent of a residue kernel (x-rational parts plus log x and log Q).
#[derive(Clone, PartialEq, Debug)]
pub struct LogLevelExponent<S: Scalar> {
    /// coefficient of s/x
    pub s_over_x: S,
    /// coefficient of x
    pub x: S,
    /// coefficient of log x
    pub log_x: S,
    /// coefficient of log Q
    pub log_q: S,
    /// x-free additive constant
    pub constant: S,
}

impl<S: Scalar> LogLevelExponent<S> {
    pub fn sub(&self, o: &Self) -> Self {
        LogLevelExponent {
            s_over_x: self.s_over_x.sub(&o.s_over_x),
            x: self.x.sub(&o.x),
            log_x: self.log_x.sub(&o.log_x),
            log_q: self.log_q.sub(&o.log_q),
            constant: self.constant.sub(&o.constant),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.s_over_x.is_zero()
            && self.x.is_zero()
            && self.log_x.is_zero()
            && self.log_q.is_zero()
            && self.constant.is_zero()
    }
}

/// The exponent of the first residue term after the λ → x change
/// (the ancestor kernel): 2s/(xν) + (m−1)/ν(x + s/x − νlog x + tν₀) + C₀,
/// normalized to the measure dx/x².
pub fn change_x_exponent<S: Scalar>(m: i64, env: &ParamEnv<S>) -> LogLevelExponent<S> {
    let nu_inv = env.nu.inv().expect("nu invertible");
    let m1 = S::from_int(m - 1).mul(&nu_inv);
    LogLevelExponent {
        s_over_x: nu_inv.mul_int(2).add(&m1),
        x: m1.clone(),
        log_x: S::from_int(-(m - 1)),
        log_q: S::zero(),
        constant: m1.mul(&env.t).mul(&env.nu0).add(&phase_constant(Sector::Zero, env)),
    }
}

/// The exponent of the second residue term after λ → x̄ and the substitution
/// x̄ = Qe^t/x, normalized to the measure dx/x²; also returns the overall
/// sign picked up from the measure flip.
pub fn change_xbar_exponent<S: Scalar>(m: i64, env: &ParamEnv<S>) -> (LogLevelExponent<S>, i64) {
    let nu_inv = env.nu.inv().expect("nu invertible");
    let m1 = S::from_int(m + 1).mul(&nu_inv);
    // start: −2s/(ν x̄) + (m+1)/ν (x̄ + s/x̄ + ν log x̄ + tν∞) + C∞,
    // measure dx̄/x̄², prefactor Q^{−m}; substitute x̄ = s/x with
    // s = Qe^t, log s = log Q + t, dx̄/x̄² = −dx/s = −(x²/s)·dx/x².
    // Collect every bucket in terms of {s/x, x, log x, log Q, 1}.
    let mut e = LogLevelExponent {
        s_over_x: S::zero(),
        x: S::zero(),
        log_x: S::zero(),
        log_q: S::zero(),
        constant: S::zero(),
    };
    // −2s/(ν x̄) = −2x/ν
    e.x = e.x.add(&nu_inv.mul_int(-2));
    // (m+1)/ν · x̄ = (m+1)/ν · s/x
    e.s_over_x = e.s_over_x.add(&m1);
    // (m+1)/ν · s/x̄ = (m+1)/ν · x
    e.x = e.x.add(&m1);
    // (m+1)/ν · ν log x̄ = (m+1)(log s − log x) = (m+1)(log Q + t − log x)
    e.log_q = e.log_q.add(&S::from_int(m + 1));
    e.constant = e.constant.add(&env.t.mul_int(m + 1));
    e.log_x = e.log_x.add(&S::from_int(-(m + 1)));
    // (m+1)/ν · tν∞
    e.constant = e.constant.add(&m1.mul(&env.t).mul(&env.nuinf));
    // + C∞
    e.constant = e.constant.add(&phase_constant(Sector::Inf, env));
    // Q^{−m} prefactor
    e.log_q = e.log_q.add(&S::from_int(-m));
    // measure: −(x²/s)·dx/x²: gains 2 log x − log s = 2 log x − log Q − t,
    // and an overall sign −1.
    e.log_x = e.log_x.add(&S::from_int(2));
    e.log_q = e.log_q.add(&S::from_int(-1));
    e.constant = e.constant.sub(&env.t);
    (e, -1)
}

/// The final cancellation: C₀ − C∞ − t(2ν₀/ν − 1) = 0, and the exponent of
/// the x̄-term after substitution equals the ancestor kernel exponent.
pub fn cancellation_check<S: Scalar>(env: &ParamEnv<S>) -> (bool, bool) {
    let c0 = phase_constant(Sector::Zero, env);
    let cinf = phase_constant(Sector::Inf, env);
    let nu_inv = env.nu.inv().expect("nu invertible");
    let combo = c0
        .sub(&cinf)
        .sub(&env.t.mul(&env.nu0.mul(&nu_inv).mul_int(2).sub(&S::one())));
    let constants_cancel = combo.is_zero();
    // log-level reconciliation for a few m values; the m-dependence is
    // linear, so two values pin the whole family.
    let mut kernels_match = true;
    for m in -3..=3 {
        let (bar, sign) = change_xbar_exponent(m, env);
        let direct = change_x_exponent(m, env);
        if sign != -1 || !bar.sub(&direct).is_zero() {
            kernels_match = false;
        }
    }
    (constants_cancel, kernels_match)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{Param, ParamScalar};
    use crate::vertex::mode_family;

    type S = ParamScalar;
    type P = RatScalar;

    fn env() -> ParamEnv<S> {
        ParamEnv::symbolic()
    }

    fn penv(idx: u32) -> ParamEnv<P> {
        ParamEnv::at(&Assignment::random(77, idx))
    }

    #[test]
    fn j_identity_and_leading_terms() {
        let e = env();
        // d = 0, t = 0: identity matrix (t enters only via e^{tν/z}).
        let j = j_operator(0, -4, &<S as Coeff>::zero(), &e).unwrap();
        // at t = 0 means dropping all positive t-powers:
        let drop_t = |s: &TruncSeries<S>| {
            s.map(|c| {
                // substitute t = 0 by evaluating the numerator/denominator
                // polynomials at t → 0 via the derivation trick: here just
                // check that the constant z-term is 1 and others carry t.
                c.clone()
            })
        };
        let _ = drop_t;
        assert!(j.j0.coeff(0).is_one());
        assert!(j.jinf.coeff(0).is_one());
        // z∂_{t₀} J = J with symbolic t₀.
        let t0 = ParamScalar::param(Param::T0);
        let j2 = j_operator(2, -5, &t0, &e).unwrap();
        let lhs = z_dt0(&j2.j0);
        assert!(lhs.eq_on_common_window(&j2.j0).unwrap());
        // z∂_{τ_k}J = φ_k(z∂_t)J via the chain rule:
        // z∂_{τ₀} = (z/ν)∂_t − (ν∞/ν) z∂_{t₀} must equal (z∂_t − ν∞)/ν.
        let nu_inv = e.nu.inv().unwrap();
        let lhs_tau = z_dt(&j2.j0)
            .scale(&nu_inv)
            .sub(&z_dt0(&j2.j0).scale(&e.nuinf.mul(&nu_inv)))
            .unwrap();
        let rhs_tau = z_dt(&j2.j0)
            .sub(&j2.j0.scale(&e.nuinf))
            .unwrap()
            .scale(&nu_inv);
        assert!(lhs_tau.eq_on_common_window(&rhs_tau).unwrap());
    }

    #[test]
    fn j_denominator_shape() {
        // ∏_{j=1}^d jz(ν+jz) = d!·z^d·(ν+z)⋯(ν+dz)
        let e = env();
        for d in 1..=3i64 {
            let mut lhs = TruncSeries::<S>::one(SeriesVar::Z);
            let mut rhs = TruncSeries::<S>::monomial(SeriesVar::Z, d, S::from_int((1..=d).product()));
            for j in 1..=d {
                lhs = lhs
                    .mul(&TruncSeries::monomial(SeriesVar::Z, 1, S::from_int(j)))
                    .unwrap()
                    .mul(&TruncSeries::from_terms(
                        SeriesVar::Z,
                        vec![(0, e.nu.clone()), (1, S::from_int(j))],
                    ))
                    .unwrap();
                rhs = rhs
                    .mul(&TruncSeries::from_terms(
                        SeriesVar::Z,
                        vec![(0, e.nu.clone()), (1, S::from_int(j))],
                    ))
                    .unwrap();
            }
            // rhs constructed as d! z^d ∏(ν+jz) — compare
            assert!(lhs.eq_on_common_window(&rhs).unwrap(), "d = {}", d);
        }
    }

    #[test]
    fn s_matrix_leading_and_s1_value() {
        let e = env();
        let s = s_matrix(2, 4, &e).unwrap();
        // leading term: identity
        let lead = s.coeff(0);
        assert!(lead.sub(&Mat2::identity()).is_zero());
        // (S₁φ₀, φ₀) = tν₀/ν + s/ν²  [pairing picks φ₀-component / ν]
        let s1 = s.coeff(1);
        let nu_inv = e.nu.inv().unwrap();
        let got = s1.a00.mul(&nu_inv);
        let expect = e
            .t
            .mul(&e.nu0)
            .mul(&nu_inv)
            .add(&e.s.mul(&nu_inv).mul(&nu_inv));
        assert_eq!(got, expect);
    }

    #[test]
    fn s_matrix_unitarity_symbolic_low_order() {
        let e = env();
        let s = s_matrix(2, 3, &e).unwrap();
        let defect = s.unitarity_defect().unwrap();
        for series in [&defect.a00, &defect.a0i, &defect.ai0, &defect.aii] {
            assert!(series.is_known_zero(), "unitarity defect {}", series);
        }
    }

    #[test]
    fn s_matrix_unitarity_random_points() {
        let e = env();
        let s = s_matrix(3, 6, &e).unwrap();
        for idx in 0..3 {
            let a = Assignment::random(101, idx);
            let sp = eval_smatrix(&s, &a).unwrap();
            let defect = sp.unitarity_defect().unwrap();
            for series in [&defect.a00, &defect.a0i, &defect.ai0, &defect.aii] {
                assert!(series.is_known_zero(), "unitarity defect at point {}", idx);
            }
        }
    }

    #[test]
    fn mirror_change_basics() {
        let e = penv(0);
        let m = mirror_coordinate(Sector::Zero, 6, &e).unwrap();
        // back substitution: λ(x(λ)) = λ
        let back = m.lambda_of_x.compose(&m.x_of_lambda).unwrap();
        let lam = TruncSeries::<P>::monomial(SeriesVar::Lambda, 1, P::one());
        assert!(back.eq_on_common_window(&lam).unwrap());
        // a₁ = −tν₀
        assert_eq!(m.x_of_lambda.coeff(0), e.t.mul(&e.nu0).neg());
        // antiderivative identity
        assert!(m.antiderivative_identity(&e).unwrap());
        // and s = 0, t = 0 degenerates to the identity
        let mut a0 = Assignment::random(77, 9);
        a0.values[Param::S as usize] = num_rational::BigRational::from_integer(0.into());
        a0.values[Param::T as usize] = num_rational::BigRational::from_integer(0.into());
        let e0 = ParamEnv::<P>::at(&a0);
        let m0 = mirror_coordinate(Sector::Zero, 5, &e0).unwrap();
        let x = TruncSeries::<P>::monomial(SeriesVar::Lambda, 1, P::one());
        assert!(m0.x_of_lambda.eq_on_common_window(&x).unwrap());
    }

    #[test]
    fn three_pipelines_agree_small() {
        // d ≤ 1, shallow windows, random point: the full agreement at the
        // acceptance orders runs in the acceptance suite.
        let e = penv(1);
        let s_sym = s_matrix(2, 5, &env()).unwrap();
        let s = eval_smatrix(&s_sym, &Assignment::random(77, 1)).unwrap();
        let fam = mode_family(Sector::Zero, -4, 4, &e).unwrap();
        let mirror = mirror_coordinate(Sector::Zero, 7, &e).unwrap();
        let pipes =
            conjugated_exponent(Sector::Zero, &s, &fam, &mirror, 3, -6, -4, &e).unwrap();
        assert!(
            pipes.direct.eq_on_common_window(&pipes.closed_form).unwrap(),
            "direct vs closed form"
        );
        assert!(
            pipes.direct.eq_on_common_window(&pipes.mirror).unwrap(),
            "direct vs mirror"
        );
        assert!(
            pipes.closed_form.eq_on_common_window(&pipes.mirror).unwrap(),
            "closed form vs mirror (transformation law)"
        );
    }

    #[test]
    fn eigenrelation_at_s_zero_and_generic() {
        let e = penv(2);
        // descendant exponent satisfies (−z∂_λ + ν/λ)f = f
        let vx = crate::vertex::descendant_exponent(1, Sector::Zero, 5, -8, &e).unwrap();
        let bi = BiSeries::from_exponent(&vx);
        assert!(eigenrelation_holds(&bi, &e.nu, &P::zero()).unwrap());
        // the mode family at λ satisfies the conjugated relation with s/λ²
        let fam = mode_family(Sector::Zero, -3, 3, &e).unwrap();
        let at_lambda = family_biseries(&fam, -6, None).unwrap();
        assert!(eigenrelation_holds(&at_lambda, &e.nu, &e.s).unwrap());
    }

    #[test]
    fn w_kernel_anchors() {
        let e = env();
        let s = s_matrix(2, 4, &e).unwrap();
        let k = w_kernel(&s);
        // W₀₀ = S₁
        assert!(k.get(0, 0).sub(&s.coeff(1)).is_zero());
        // telescoping relation
        assert!(k.telescoping_holds(&s));
        // (W₀₀φ₀,φ₀) = (S₁φ₀,φ₀) = C₀
        let nu_inv = e.nu.inv().unwrap();
        assert_eq!(k.get(0, 0).a00.mul(&nu_inv), phase_constant(Sector::Zero, &e));
    }

    #[test]
    fn w_phase_matches_closed_form() {
        let e = penv(3);
        let s_sym = s_matrix(3, 6, &env()).unwrap();
        let s = eval_smatrix(&s_sym, &Assignment::random(77, 3)).unwrap();
        let kernel = w_kernel(&s);
        let desc = crate::vertex::descendant_mode_family(Sector::Zero, 6, &e).unwrap();
        let fam = mode_family(Sector::Zero, -1, 6, &e).unwrap();
        let mirror = mirror_coordinate(Sector::Zero, 10, &e).unwrap();
        let series = w_phase_series(&kernel, &desc, -5, &e).unwrap();
        let closed = w_phase_closed_form(Sector::Zero, &mirror, -5, &e).unwrap();
        assert!(
            series.eq_on_common_window(&closed).unwrap(),
            "W series {} vs closed {}",
            series,
            closed
        );
        // constant term = C₀
        assert_eq!(series.coeff(0), phase_constant(Sector::Zero, &e));
        // derivative identity
        assert!(w_phase_derivative_identity(
            Sector::Zero,
            &kernel,
            &desc,
            &fam,
            &mirror,
            -4,
            &e
        )
        .unwrap());
    }

    #[test]
    fn w_phase_infinity_sector() {
        // W∞ from the switched pipeline with the x̄-ladder.
        let e = penv(4);
        let s_sym = s_matrix(3, 6, &env()).unwrap();
        let s = eval_smatrix(&s_sym, &Assignment::random(77, 4)).unwrap();
        let kernel = w_kernel(&s);
        let desc = crate::vertex::descendant_mode_family(Sector::Inf, 6, &e).unwrap();
        let fam = mode_family(Sector::Inf, -1, 6, &e).unwrap();
        let mirror = mirror_coordinate(Sector::Inf, 10, &e).unwrap();
        let series = w_phase_series(&kernel, &desc, -5, &e).unwrap();
        let closed = w_phase_closed_form(Sector::Inf, &mirror, -5, &e).unwrap();
        assert!(series.eq_on_common_window(&closed).unwrap());
        assert_eq!(series.coeff(0), phase_constant(Sector::Inf, &e));
        assert!(w_phase_derivative_identity(
            Sector::Inf,
            &kernel,
            &desc,
            &fam,
            &mirror,
            -4,
            &e
        )
        .unwrap());
    }

    #[test]
    fn antiderivative_rational_identities() {
        let e = env();
        let fam = mode_family(Sector::Zero, 0, 1, &e).unwrap();
        assert!(antiderivative_identities(Sector::Zero, &fam, &e).unwrap());
        let fam_inf = mode_family(Sector::Inf, 0, 1, &e).unwrap();
        assert!(antiderivative_identities(Sector::Inf, &fam_inf, &e).unwrap());
    }

    #[test]
    fn commutation_exponent_closed_forms() {
        let e = env();
        for sector in [Sector::Zero, Sector::Inf] {
            let vx = crate::vertex::descendant_exponent(1, sector, 4, -7, &e).unwrap();
            for m in -2..=2i64 {
                for n in -2..=2i64 {
                    let (acc, closed) = commutation_exponent(m, n, sector, &vx, &e).unwrap();
                    assert!(
                        acc.eq_on_common_window(&closed).unwrap(),
                        "sector {:?} m={} n={}: {} vs {}",
                        sector,
                        m,
                        n,
                        acc,
                        closed
                    );
                }
            }
            // m = n+1 in the zero sector gives 0
            if sector == Sector::Zero {
                let vx1 = crate::vertex::descendant_exponent(1, sector, 4, -7, &e).unwrap();
                let (acc, _) = commutation_exponent(1, 0, sector, &vx1, &e).unwrap();
                assert!(acc.is_known_zero());
            }
        }
    }

    #[test]
    fn w_kernel_matches_normal_ordering_scalar() {
        // Oracle for the kernel convention: for a positive-part vector u,
        // Σ_{k,l}(W_{kl}u_l, u_k) = −Ω((Su)₋, (Su)₊), the scalar produced by
        // normal-ordering the conjugated exponential.
        use rand::{Rng, SeedableRng};
        let s_sym = s_matrix(3, 8, &env()).unwrap();
        let a = Assignment::random(55, 0);
        let s = eval_smatrix(&s_sym, &a).unwrap();
        let e = ParamEnv::<P>::at(&a);
        let kernel = w_kernel(&s);
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(91);
        for _ in 0..5 {
            let mut u = LoopVector::<P>::zero();
            for k in 0..=2i64 {
                let c = CohClass::new(
                    P::from_int(rng.gen_range(-5i64..=5)),
                    P::from_int(rng.gen_range(-5i64..=5)),
                );
                u = u.add(&LoopVector::monomial(k, &c)).unwrap();
            }
            // W-form
            let mut w_form = P::zero();
            let nu_inv = e.nu.inv().unwrap();
            for k in 0..=2i64 {
                for l in 0..=2i64 {
                    let w = kernel.get(k, l);
                    let ul = u.coeff(l);
                    let uk = u.coeff(k);
                    let wv = w.apply(&ul);
                    let paired = wv.c0.mul(&uk.c0).sub(&wv.cinf.mul(&uk.cinf)).mul(&nu_inv);
                    w_form = w_form.add(&paired);
                }
            }
            // normal-ordering scalar
            let su = s.mat.apply(&u).unwrap();
            let (plus, minus) = su.polarize();
            let omega = minus.symplectic_form(&plus, &e).unwrap();
            assert_eq!(w_form, omega.neg(), "kernel contraction mismatch");
        }
    }

    #[test]
    fn final_cancellation() {
        let e = env();
        let (constants, kernels) = cancellation_check(&e);
        assert!(constants, "C₀ − C∞ − t(2ν₀/ν − 1) must vanish");
        assert!(kernels, "x̄-kernel exponent must match the ancestor kernel");
        // C∞ value from the paper
        let nu_inv = e.nu.inv().unwrap();
        let expect = e
            .t
            .mul(&e.nuinf)
            .mul(&nu_inv)
            .neg()
            .add(&e.s.mul(&nu_inv).mul(&nu_inv));
        assert_eq!(phase_constant(Sector::Inf, &e), expect);
    }
}
