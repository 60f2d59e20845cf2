//! Exact coefficient arithmetic.
//!
//! The coefficient field is the field of rational functions in the
//! equivariant parameters ν₀, ν∞, t, t₀, s, Q over ℚ, where s stands for
//! the combination Qe^t treated as an independent transcendental and
//! ν abbreviates ν₀ − ν∞ (always expanded before canonicalization).
//!
//! Two realizations of the same interface are provided:
//! * [`ParamScalar`] — fully symbolic fractions of multivariate polynomials,
//!   kept reduced (GCD cancelled) with a monic denominator, so equality is
//!   structural and exact.
//! * [`RatScalar`] — plain rationals obtained by substituting a random
//!   rational value for every parameter (Schwartz–Zippel style evaluation).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::EngineError;

pub const NPARAMS: usize = 6;

/// Formal parameters of the coefficient field, in canonical variable order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Param {
    Nu0 = 0,
    NuInf = 1,
    T = 2,
    T0 = 3,
    S = 4,
    Q = 5,
}

pub const PARAM_NAMES: [&str; NPARAMS] = ["nu0", "nuinf", "t", "t0", "s", "Q"];

/// Exponent vector of a monomial, ordered lexicographically.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct PExp(pub [u16; NPARAMS]);

impl PExp {
    pub const ZERO: PExp = PExp([0; NPARAMS]);

    fn add(&self, other: &PExp) -> PExp {
        let mut e = [0u16; NPARAMS];
        for i in 0..NPARAMS {
            e[i] = self.0[i] + other.0[i];
        }
        PExp(e)
    }

    fn checked_sub(&self, other: &PExp) -> Option<PExp> {
        let mut e = [0u16; NPARAMS];
        for i in 0..NPARAMS {
            e[i] = self.0[i].checked_sub(other.0[i])?;
        }
        Some(PExp(e))
    }

    fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }
}

/// Sparse multivariate polynomial over ℚ in the formal parameters.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct PPoly {
    terms: BTreeMap<PExp, BigRational>,
}

fn brat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl PPoly {
    pub fn zero() -> Self {
        PPoly { terms: BTreeMap::new() }
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = PPoly::zero();
        if !c.is_zero() {
            p.terms.insert(PExp::ZERO, c);
        }
        p
    }

    pub fn one() -> Self {
        PPoly::constant(BigRational::one())
    }

    pub fn var(p: Param) -> Self {
        let mut e = [0u16; NPARAMS];
        e[p as usize] = 1;
        let mut poly = PPoly::zero();
        poly.terms.insert(PExp(e), BigRational::one());
        poly
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms.keys().next().unwrap().is_zero())
    }

    pub fn constant_value(&self) -> Option<&BigRational> {
        if self.terms.len() == 1 {
            let (e, c) = self.terms.iter().next().unwrap();
            if e.is_zero() {
                return Some(c);
            }
        }
        if self.terms.is_empty() {
            return None;
        }
        None
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    fn insert_term(&mut self, e: PExp, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + &c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &PPoly) -> PPoly {
        let mut r = self.clone();
        for (e, c) in &other.terms {
            r.insert_term(*e, c.clone());
        }
        r
    }

    pub fn neg(&self) -> PPoly {
        PPoly { terms: self.terms.iter().map(|(e, c)| (*e, -c)).collect() }
    }

    pub fn sub(&self, other: &PPoly) -> PPoly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &PPoly) -> PPoly {
        let mut r = PPoly::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                r.insert_term(ea.add(eb), ca * cb);
            }
        }
        r
    }

    pub fn scale(&self, c: &BigRational) -> PPoly {
        if c.is_zero() {
            return PPoly::zero();
        }
        PPoly { terms: self.terms.iter().map(|(e, k)| (*e, k * c)).collect() }
    }

    pub fn pow(&self, n: u32) -> PPoly {
        let mut r = PPoly::one();
        for _ in 0..n {
            r = r.mul(self);
        }
        r
    }

    /// Degree in one variable.
    pub fn degree_in(&self, v: usize) -> u16 {
        self.terms.keys().map(|e| e.0[v]).max().unwrap_or(0)
    }

    /// Leading term in the lex order.
    fn leading(&self) -> Option<(&PExp, &BigRational)> {
        self.terms.iter().next_back()
    }

    /// Exact division; `None` if `self` is not a multiple of `d`.
    pub fn try_div_exact(&self, d: &PPoly) -> Option<PPoly> {
        if d.is_zero() {
            return None;
        }
        if let Some(c) = d.constant_value() {
            return Some(self.scale(&(BigRational::one() / c)));
        }
        let (dlead_e, dlead_c) = d.leading().unwrap();
        let dlead_e = *dlead_e;
        let dlead_c = dlead_c.clone();
        let mut rem = self.clone();
        let mut quo = PPoly::zero();
        while let Some((rlead_e, rlead_c)) = rem.leading() {
            let qe = rlead_e.checked_sub(&dlead_e)?;
            let qc = rlead_c / &dlead_c;
            let mut qterm = PPoly::zero();
            qterm.terms.insert(qe, qc);
            rem = rem.sub(&qterm.mul(d));
            quo = quo.add(&qterm);
        }
        Some(quo)
    }

    /// View as univariate in variable `v`: coefficients indexed by the degree in `v`.
    fn univariate_in(&self, v: usize) -> Vec<PPoly> {
        let deg = self.degree_in(v) as usize;
        let mut coeffs = vec![PPoly::zero(); deg + 1];
        for (e, c) in &self.terms {
            let k = e.0[v] as usize;
            let mut e2 = *e;
            e2.0[v] = 0;
            coeffs[k].insert_term(e2, c.clone());
        }
        coeffs
    }

    fn from_univariate(coeffs: &[PPoly], v: usize) -> PPoly {
        let mut r = PPoly::zero();
        for (k, c) in coeffs.iter().enumerate() {
            for (e, q) in &c.terms {
                let mut e2 = *e;
                e2.0[v] = k as u16;
                r.insert_term(e2, q.clone());
            }
        }
        r
    }

    /// Normalize so the lex-leading coefficient is 1. Returns the factor taken out.
    fn monic(&self) -> (PPoly, BigRational) {
        match self.leading() {
            None => (PPoly::zero(), BigRational::one()),
            Some((_, c)) => {
                let c = c.clone();
                (self.scale(&(BigRational::one() / &c)), c)
            }
        }
    }

    pub fn eval(&self, a: &Assignment) -> BigRational {
        let mut acc = BigRational::zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            for v in 0..NPARAMS {
                for _ in 0..e.0[v] {
                    term *= &a.values[v];
                }
            }
            acc += term;
        }
        acc
    }

    /// Apply the derivation ∂_t of the parameter ring: ∂_t t = 1, ∂_t s = s
    /// (s = Qe^t), all other generators map to 0.
    pub fn dt(&self) -> PPoly {
        let t = Param::T as usize;
        let s = Param::S as usize;
        let mut r = PPoly::zero();
        for (e, c) in &self.terms {
            if e.0[t] > 0 {
                let mut e2 = *e;
                e2.0[t] -= 1;
                r.insert_term(e2, c * BigRational::from(BigInt::from(e.0[t])));
            }
            if e.0[s] > 0 {
                r.insert_term(*e, c * BigRational::from(BigInt::from(e.0[s])));
            }
        }
        r
    }

    /// Apply ∂_{t₀}: ∂_{t₀} t₀ = 1, everything else constant.
    pub fn dt0(&self) -> PPoly {
        let t0 = Param::T0 as usize;
        let mut r = PPoly::zero();
        for (e, c) in &self.terms {
            if e.0[t0] > 0 {
                let mut e2 = *e;
                e2.0[t0] -= 1;
                r.insert_term(e2, c * BigRational::from(BigInt::from(e.0[t0])));
            }
        }
        r
    }

    /// Total degree in s and Q, the Novikov-weighted generators, of the
    /// highest such monomial. Used for structural Q-weight bookkeeping.
    pub fn novikov_degree(&self) -> u16 {
        self.terms
            .keys()
            .map(|e| e.0[Param::S as usize] + e.0[Param::Q as usize])
            .max()
            .unwrap_or(0)
    }
}

// ---------------------------------------------------------------------------
// Polynomial GCD (primitive subresultant PRS, recursive over the variables).
// ---------------------------------------------------------------------------

fn first_active_var(a: &PPoly, b: &PPoly) -> Option<usize> {
    (0..NPARAMS).find(|&v| a.degree_in(v) > 0 || b.degree_in(v) > 0)
}

/// GCD of the coefficient list (the content w.r.t. the main variable).
fn content(coeffs: &[PPoly]) -> PPoly {
    let mut g = PPoly::zero();
    for c in coeffs {
        if c.is_zero() {
            continue;
        }
        g = if g.is_zero() { c.clone() } else { poly_gcd(&g, c) };
        if g.is_constant() {
            return PPoly::one();
        }
    }
    if g.is_zero() {
        PPoly::zero()
    } else {
        g
    }
}

fn uni_degree(p: &[PPoly]) -> Option<usize> {
    p.iter().rposition(|c| !c.is_zero())
}

fn uni_scale(p: &[PPoly], m: &PPoly) -> Vec<PPoly> {
    p.iter().map(|c| c.mul(m)).collect()
}

fn uni_div_exact(p: &[PPoly], d: &PPoly) -> Vec<PPoly> {
    p.iter()
        .map(|c| c.try_div_exact(d).expect("exact division in PRS"))
        .collect()
}

/// Pseudo-remainder: lc(b)^(deg a − deg b + 1) · a ≡ prem(a,b) mod b.
fn prem(a: &[PPoly], b: &[PPoly]) -> Vec<PPoly> {
    let db = uni_degree(b).expect("prem by zero");
    let lcb = b[db].clone();
    let mut r: Vec<PPoly> = a.to_vec();
    let da = match uni_degree(&r) {
        None => return vec![],
        Some(d) => d,
    };
    let mut steps = (da as i64) - (db as i64) + 1;
    while let Some(dr) = uni_degree(&r) {
        if dr < db {
            break;
        }
        let lead = r[dr].clone();
        r = uni_scale(&r, &lcb);
        for k in 0..=db {
            let idx = dr - db + k;
            r[idx] = r[idx].sub(&lead.mul(&b[k]));
        }
        r[dr] = PPoly::zero();
        steps -= 1;
    }
    for _ in 0..steps {
        r = uni_scale(&r, &lcb);
    }
    r
}

/// GCD of two multivariate polynomials, normalized monic in the lex order.
pub fn poly_gcd(a: &PPoly, b: &PPoly) -> PPoly {
    if a.is_zero() {
        return b.monic().0;
    }
    if b.is_zero() {
        return a.monic().0;
    }
    if a == b {
        return a.monic().0;
    }
    if a.is_constant() || b.is_constant() {
        return PPoly::one();
    }
    let v = match first_active_var(a, b) {
        None => return PPoly::one(),
        Some(v) => v,
    };
    if a.degree_in(v) == 0 {
        // b genuinely involves v, a does not: gcd divides the content of b.
        let bu = b.univariate_in(v);
        return poly_gcd(a, &content(&bu)).monic().0;
    }
    if b.degree_in(v) == 0 {
        let au = a.univariate_in(v);
        return poly_gcd(b, &content(&au)).monic().0;
    }

    let mut au = a.univariate_in(v);
    let mut bu = b.univariate_in(v);
    let ca = content(&au);
    let cb = content(&bu);
    au = uni_div_exact(&au, &ca);
    bu = uni_div_exact(&bu, &cb);
    let cg = poly_gcd(&ca, &cb);

    if uni_degree(&au) < uni_degree(&bu) {
        std::mem::swap(&mut au, &mut bu);
    }
    let mut g = PPoly::one();
    let mut h = PPoly::one();
    loop {
        let da = uni_degree(&au).unwrap();
        let db = uni_degree(&bu).unwrap();
        let delta = (da - db) as u32;
        let r = prem(&au, &bu);
        match uni_degree(&r) {
            None => {
                // bu (made primitive) is the gcd of the primitive parts.
                let cb2 = content(&bu);
                let prim = uni_div_exact(&bu, &cb2);
                let result = PPoly::from_univariate(&prim, v).mul(&cg);
                return result.monic().0;
            }
            Some(0) => {
                return cg.monic().0;
            }
            Some(_) => {
                let divisor = g.mul(&h.pow(delta));
                au = bu;
                bu = uni_div_exact(&r, &divisor);
                g = au[uni_degree(&au).unwrap()].clone();
                h = if delta == 0 {
                    h
                } else {
                    g.pow(delta)
                        .try_div_exact(&h.pow(delta - 1))
                        .expect("subresultant h update")
                };
            }
        }
    }
}

// ---------------------------------------------------------------------------
// ParamScalar: reduced fraction of PPoly with monic denominator.
// ---------------------------------------------------------------------------

/// Element of ℚ(ν₀, ν∞, t, t₀, s, Q), canonically reduced.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ParamScalar {
    num: PPoly,
    den: PPoly,
}

impl ParamScalar {
    fn make(num: PPoly, den: PPoly) -> ParamScalar {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return ParamScalar { num: PPoly::zero(), den: PPoly::one() };
        }
        let (num, den) = if den.is_constant() {
            let c = den.constant_value().unwrap().clone();
            (num.scale(&(BigRational::one() / c)), PPoly::one())
        } else {
            let g = poly_gcd(&num, &den);
            if g.is_constant() {
                (num, den)
            } else {
                (
                    num.try_div_exact(&g).expect("gcd divides num"),
                    den.try_div_exact(&g).expect("gcd divides den"),
                )
            }
        };
        let (den, lead) = den.monic();
        let num = num.scale(&(BigRational::one() / lead));
        ParamScalar { num, den }
    }

    pub fn from_poly(p: PPoly) -> ParamScalar {
        ParamScalar { num: p, den: PPoly::one() }
    }

    pub fn param(p: Param) -> ParamScalar {
        ParamScalar::from_poly(PPoly::var(p))
    }

    /// ν = ν₀ − ν∞, expanded.
    pub fn nu() -> ParamScalar {
        ParamScalar::from_poly(PPoly::var(Param::Nu0).sub(&PPoly::var(Param::NuInf)))
    }

    pub fn numerator(&self) -> &PPoly {
        &self.num
    }

    pub fn denominator(&self) -> &PPoly {
        &self.den
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_constant()
    }

    /// ∂_t as a derivation on the fraction field.
    pub fn dt(&self) -> ParamScalar {
        let n = self.num.dt().mul(&self.den).sub(&self.num.mul(&self.den.dt()));
        let d = self.den.mul(&self.den);
        ParamScalar::make(n, d)
    }

    /// ∂_{t₀} as a derivation on the fraction field.
    pub fn dt0(&self) -> ParamScalar {
        let n = self.num.dt0().mul(&self.den).sub(&self.num.mul(&self.den.dt0()));
        let d = self.den.mul(&self.den);
        ParamScalar::make(n, d)
    }

    pub fn eval(&self, a: &Assignment) -> Result<BigRational, EngineError> {
        let d = self.den.eval(a);
        if d.is_zero() {
            return Err(EngineError::Degenerate("denominator vanishes at evaluation point".into()));
        }
        Ok(self.num.eval(a) / d)
    }
}

impl fmt::Display for PPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            let mag = if neg { -c.clone() } else { c.clone() };
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut parts: Vec<String> = Vec::new();
            if !mag.is_one() || e.is_zero() {
                parts.push(mag.to_string());
            }
            for v in 0..NPARAMS {
                match e.0[v] {
                    0 => {}
                    1 => parts.push(PARAM_NAMES[v].to_string()),
                    k => parts.push(format!("{}^{}", PARAM_NAMES[v], k)),
                }
            }
            write!(f, "{}", parts.join("*"))?;
        }
        Ok(())
    }
}

impl fmt::Display for ParamScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_constant() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({})/({})", self.num, self.den)
        }
    }
}

// ---------------------------------------------------------------------------
// The Scalar abstraction and the rational-point realization.
// ---------------------------------------------------------------------------

/// Ring of coefficients every series and polynomial in the engine is built
/// over. Implemented by the two scalar realizations and by series themselves
/// (stacked rings). All values are immutable; operations are pure.
pub trait Coeff: Clone + PartialEq + fmt::Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn inv(&self) -> Result<Self, EngineError>;
    /// Multiply by the rational n/d.
    fn mul_ratio(&self, n: i64, d: i64) -> Self;

    fn div(&self, rhs: &Self) -> Result<Self, EngineError> {
        Ok(self.mul(&rhs.inv()?))
    }

    fn is_one(&self) -> bool {
        *self == Self::one()
    }
}

/// A coefficient field with exact rational embeddings: the symbolic fraction
/// field or its evaluation at a rational point.
pub trait Scalar: Coeff + fmt::Display {
    fn from_int(n: i64) -> Self;
    fn from_ratio(n: i64, d: i64) -> Self;
    fn from_big(r: &BigRational) -> Self;

    fn mul_int(&self, n: i64) -> Self {
        self.mul(&Self::from_int(n))
    }

    fn div_int(&self, n: i64) -> Self {
        self.mul(&Self::from_ratio(1, n))
    }
}

impl Coeff for ParamScalar {
    fn zero() -> Self {
        ParamScalar::from_poly(PPoly::zero())
    }

    fn one() -> Self {
        ParamScalar::from_poly(PPoly::one())
    }

    fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    fn add(&self, rhs: &Self) -> Self {
        if self.den == rhs.den {
            return ParamScalar::make(self.num.add(&rhs.num), self.den.clone());
        }
        ParamScalar::make(
            self.num.mul(&rhs.den).add(&rhs.num.mul(&self.den)),
            self.den.mul(&rhs.den),
        )
    }

    fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    fn mul(&self, rhs: &Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return <ParamScalar as Coeff>::zero();
        }
        ParamScalar::make(self.num.mul(&rhs.num), self.den.mul(&rhs.den))
    }

    fn neg(&self) -> Self {
        ParamScalar { num: self.num.neg(), den: self.den.clone() }
    }

    fn inv(&self) -> Result<Self, EngineError> {
        if self.is_zero() {
            return Err(EngineError::DivisionByZero);
        }
        Ok(ParamScalar::make(self.den.clone(), self.num.clone()))
    }

    fn mul_ratio(&self, n: i64, d: i64) -> Self {
        self.mul(&<ParamScalar as Scalar>::from_ratio(n, d))
    }
}

impl Scalar for ParamScalar {
    fn from_int(n: i64) -> Self {
        ParamScalar::from_poly(PPoly::constant(BigRational::from(BigInt::from(n))))
    }

    fn from_ratio(n: i64, d: i64) -> Self {
        ParamScalar::from_poly(PPoly::constant(brat(n, d)))
    }

    fn from_big(r: &BigRational) -> Self {
        ParamScalar::from_poly(PPoly::constant(r.clone()))
    }
}

/// A rational number carrying no symbolic content; the target of parameter
/// evaluation.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RatScalar(pub BigRational);

impl fmt::Display for RatScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Coeff for RatScalar {
    fn zero() -> Self {
        RatScalar(BigRational::zero())
    }

    fn one() -> Self {
        RatScalar(BigRational::one())
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    fn add(&self, rhs: &Self) -> Self {
        RatScalar(&self.0 + &rhs.0)
    }

    fn sub(&self, rhs: &Self) -> Self {
        RatScalar(&self.0 - &rhs.0)
    }

    fn mul(&self, rhs: &Self) -> Self {
        RatScalar(&self.0 * &rhs.0)
    }

    fn neg(&self) -> Self {
        RatScalar(-self.0.clone())
    }

    fn inv(&self) -> Result<Self, EngineError> {
        if self.0.is_zero() {
            return Err(EngineError::DivisionByZero);
        }
        Ok(RatScalar(BigRational::one() / &self.0))
    }

    fn mul_ratio(&self, n: i64, d: i64) -> Self {
        RatScalar(&self.0 * brat(n, d))
    }
}

impl Scalar for RatScalar {
    fn from_int(n: i64) -> Self {
        RatScalar(BigRational::from(BigInt::from(n)))
    }

    fn from_ratio(n: i64, d: i64) -> Self {
        RatScalar(brat(n, d))
    }

    fn from_big(r: &BigRational) -> Self {
        RatScalar(r.clone())
    }
}

// ---------------------------------------------------------------------------
// Parameter environments.
// ---------------------------------------------------------------------------

/// One random rational value per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub values: [BigRational; NPARAMS],
}

impl Assignment {
    /// Deterministic random assignment; `index` selects the evaluation point.
    ///
    /// Avoids the degenerate loci ν = 0, s = 0, Q = 0 and ν² + 4s = 0 so that
    /// every denominator appearing in the calculus stays invertible.
    pub fn random(seed: u64, index: u32) -> Assignment {
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ ((index as u64) << 32 | 0x9e37_79b9));
        loop {
            let mut values: Vec<BigRational> = Vec::with_capacity(NPARAMS);
            for _ in 0..NPARAMS {
                let n = rng.gen_range(-60i64..=60);
                let d = rng.gen_range(1i64..=12);
                values.push(brat(n, d));
            }
            let a = Assignment { values: values.try_into().unwrap() };
            let nu = &a.values[Param::Nu0 as usize] - &a.values[Param::NuInf as usize];
            let s = &a.values[Param::S as usize];
            let q = &a.values[Param::Q as usize];
            let t = &a.values[Param::T as usize];
            let disc = &nu * &nu + BigRational::from(BigInt::from(4)) * s;
            if nu.is_zero() || s.is_zero() || q.is_zero() || t.is_zero() || disc.is_zero() {
                continue;
            }
            return a;
        }
    }
}

/// The parameters of the theory as elements of the active coefficient field.
#[derive(Clone, Debug)]
pub struct ParamEnv<S: Scalar> {
    pub nu0: S,
    pub nuinf: S,
    pub t: S,
    pub t0: S,
    pub s: S,
    pub q: S,
    /// ν = ν₀ − ν∞.
    pub nu: S,
}

impl ParamEnv<ParamScalar> {
    pub fn symbolic() -> Self {
        let nu0 = ParamScalar::param(Param::Nu0);
        let nuinf = ParamScalar::param(Param::NuInf);
        let nu = nu0.sub(&nuinf);
        ParamEnv {
            nu0,
            nuinf,
            t: ParamScalar::param(Param::T),
            t0: ParamScalar::param(Param::T0),
            s: ParamScalar::param(Param::S),
            q: ParamScalar::param(Param::Q),
            nu,
        }
    }
}

impl ParamEnv<RatScalar> {
    pub fn at(a: &Assignment) -> Self {
        let v = |p: Param| RatScalar(a.values[p as usize].clone());
        let nu0 = v(Param::Nu0);
        let nuinf = v(Param::NuInf);
        let nu = nu0.sub(&nuinf);
        ParamEnv {
            nu0,
            nuinf,
            t: v(Param::T),
            t0: v(Param::T0),
            s: v(Param::S),
            q: v(Param::Q),
            nu,
        }
    }
}

impl<S: Scalar> ParamEnv<S> {
    /// Swap the two fixed points: ν₀ ↔ ν∞ (hence ν ↦ −ν). The t-coordinate
    /// of τ = tP is unchanged; t₀, s, Q are symmetric.
    pub fn switched(&self) -> Self {
        ParamEnv {
            nu0: self.nuinf.clone(),
            nuinf: self.nu0.clone(),
            t: self.t.clone(),
            t0: self.t0.clone(),
            s: self.s.clone(),
            q: self.q.clone(),
            nu: self.nu.neg(),
        }
    }
}

/// Total order on BigRational pairs used by tests for stable output.
pub fn cmp_big(a: &BigRational, b: &BigRational) -> Ordering {
    a.cmp(b)
}
