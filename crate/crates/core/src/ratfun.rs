//! Univariate rational functions of the mirror coordinate whose poles lie on
//! the locus x·(x² − νx − s), partial fractions over the quadratic extension
//! adjoining a root of the critical factor, exact residues at {0, r, r̄, ∞},
//! and rational integration.
//!
//! Everything in the calculus has its poles on this locus, so rational
//! functions are stored in the factored form num / (x^a · D^b) with
//! D = x² − νx − s and reduced by exact valuation cancellation; generic
//! GCD over the coefficient field is never needed. The critical roots stay
//! symbolic (r² = νr + s, r + r̄ = ν, r·r̄ = −s), so residue computations at
//! the critical locus are exact without choosing a square-root branch.
//!
//! The χ∞ sector uses the same code with ν ↦ −ν in the context.

use crate::error::EngineError;
use crate::scalar::{Coeff, Scalar};
use crate::series::{SeriesVar, TruncSeries};

/// Dense univariate polynomial; index = degree, trailing zeros trimmed.
#[derive(Clone, PartialEq, Debug)]
pub struct XPoly<S: Scalar> {
    pub coeffs: Vec<S>,
}

impl<S: Scalar> XPoly<S> {
    pub fn zero() -> Self {
        XPoly { coeffs: vec![] }
    }

    pub fn one() -> Self {
        XPoly { coeffs: vec![S::one()] }
    }

    pub fn x() -> Self {
        XPoly { coeffs: vec![S::zero(), S::one()] }
    }

    pub fn constant(c: S) -> Self {
        let mut p = XPoly { coeffs: vec![c] };
        p.trim();
        p
    }

    pub fn from_coeffs(coeffs: Vec<S>) -> Self {
        let mut p = XPoly { coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.coeffs.last().map_or(false, |c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn coeff(&self, k: usize) -> S {
        self.coeffs.get(k).cloned().unwrap_or_else(S::zero)
    }

    pub fn leading(&self) -> Option<&S> {
        self.coeffs.last()
    }

    /// Number of trailing zero coefficients (the x-adic valuation).
    pub fn x_valuation(&self) -> usize {
        self.coeffs.iter().position(|c| !c.is_zero()).unwrap_or(0)
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        let mut c = Vec::with_capacity(n);
        for k in 0..n {
            c.push(self.coeff(k).add(&o.coeff(k)));
        }
        XPoly::from_coeffs(c)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        XPoly { coeffs: self.coeffs.iter().map(|c| c.neg()).collect() }
    }

    pub fn scale(&self, k: &S) -> Self {
        if k.is_zero() {
            return XPoly::zero();
        }
        XPoly::from_coeffs(self.coeffs.iter().map(|c| c.mul(k)).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return XPoly::zero();
        }
        let mut c = vec![S::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate() {
                c[i + j] = c[i + j].add(&a.mul(b));
            }
        }
        XPoly::from_coeffs(c)
    }

    /// Multiply by x^k.
    pub fn shift_up(&self, k: usize) -> Self {
        if self.is_zero() {
            return XPoly::zero();
        }
        let mut c = vec![S::zero(); k];
        c.extend(self.coeffs.iter().cloned());
        XPoly { coeffs: c }
    }

    /// Divide by x^k; the valuation must allow it.
    pub fn shift_down(&self, k: usize) -> Self {
        if self.is_zero() {
            return XPoly::zero();
        }
        assert!(self.x_valuation() >= k, "shift_down below valuation");
        XPoly { coeffs: self.coeffs[k..].to_vec() }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut r = XPoly::one();
        for _ in 0..n {
            r = r.mul(self);
        }
        r
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return XPoly::zero();
        }
        XPoly::from_coeffs(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(k, c)| c.mul_int(k as i64 + 1))
                .collect(),
        )
    }

    /// Euclidean division over the coefficient field.
    pub fn divrem(&self, d: &Self) -> Result<(Self, Self), EngineError> {
        let dd = d.degree().ok_or(EngineError::DivisionByZero)?;
        let lc_inv = d.leading().unwrap().inv()?;
        let mut r = self.clone();
        let mut q = XPoly::zero();
        while let Some(rd) = r.degree() {
            if rd < dd {
                break;
            }
            let factor = r.leading().unwrap().mul(&lc_inv);
            let mut term = XPoly::zero();
            term.coeffs = vec![S::zero(); rd - dd + 1];
            term.coeffs[rd - dd] = factor.clone();
            q = q.add(&term);
            r = r.sub(&term.mul(d));
        }
        Ok((q, r))
    }

    pub fn eval(&self, at: &S) -> S {
        let mut acc = S::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(at).add(c);
        }
        acc
    }

    /// Substitute a truncated series for x.
    pub fn eval_series(&self, g: &TruncSeries<S>) -> Result<TruncSeries<S>, EngineError> {
        let mut acc = TruncSeries::zero(g.var);
        let mut power = TruncSeries::one(g.var);
        for (k, c) in self.coeffs.iter().enumerate() {
            if k > 0 {
                power = power.mul(g)?;
            }
            if !c.is_zero() {
                acc = acc.add(&power.scale(c))?;
            }
        }
        Ok(acc)
    }

    /// View as an exact polynomial series in `var`.
    pub fn as_series(&self, var: SeriesVar) -> TruncSeries<S> {
        TruncSeries::from_terms(
            var,
            self.coeffs.iter().enumerate().map(|(k, c)| (k as i64, c.clone())).collect(),
        )
    }

    /// Reverse coefficients with weights: p(c/x)·x^deg(p) for a scalar c.
    fn reversed_weighted(&self, c: &S) -> XPoly<S> {
        let n = self.coeffs.len();
        let mut out = vec![S::zero(); n];
        let mut ck = S::one();
        for (k, a) in self.coeffs.iter().enumerate() {
            out[n - 1 - k] = a.mul(&ck);
            ck = ck.mul(c);
        }
        XPoly::from_coeffs(out)
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T) -> XPoly<T> {
        XPoly::from_coeffs(self.coeffs.iter().map(|c| f(c)).collect())
    }
}

// ---------------------------------------------------------------------------
// Quadratic extension by a root of x² − νx − s.
// ---------------------------------------------------------------------------

/// a + b·r with r a fixed root of x² − νx − s.
#[derive(Clone, PartialEq, Debug)]
pub struct Ext<S: Scalar> {
    pub a: S,
    pub b: S,
}

/// Arithmetic context: the sector's ν (negated for χ∞) and s = Qe^t.
#[derive(Clone, PartialEq, Debug)]
pub struct QuadField<S: Scalar> {
    pub nu: S,
    pub s: S,
}

impl<S: Scalar> Ext<S> {
    pub fn base(a: S) -> Self {
        Ext { a, b: S::zero() }
    }

    pub fn root() -> Self {
        Ext { a: S::zero(), b: S::one() }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn add(&self, o: &Self) -> Self {
        Ext { a: self.a.add(&o.a), b: self.b.add(&o.b) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Ext { a: self.a.sub(&o.a), b: self.b.sub(&o.b) }
    }

    pub fn neg(&self) -> Self {
        Ext { a: self.a.neg(), b: self.b.neg() }
    }

    pub fn scale(&self, k: &S) -> Self {
        Ext { a: self.a.mul(k), b: self.b.mul(k) }
    }
}

impl<S: Scalar> QuadField<S> {
    pub fn new(nu: S, s: S) -> Self {
        QuadField { nu, s }
    }

    /// The critical factor D = x² − νx − s.
    pub fn d_poly(&self) -> XPoly<S> {
        XPoly::from_coeffs(vec![self.s.neg(), self.nu.neg(), S::one()])
    }

    /// Context for the other fixed point (ν ↦ −ν).
    pub fn switched(&self) -> Self {
        QuadField { nu: self.nu.neg(), s: self.s.clone() }
    }

    /// (a + br)(c + dr) with r² = νr + s.
    pub fn mul(&self, x: &Ext<S>, y: &Ext<S>) -> Ext<S> {
        let bd = x.b.mul(&y.b);
        Ext {
            a: x.a.mul(&y.a).add(&bd.mul(&self.s)),
            b: x.a.mul(&y.b).add(&x.b.mul(&y.a)).add(&bd.mul(&self.nu)),
        }
    }

    /// Galois conjugate r ↦ ν − r (the other root).
    pub fn conj(&self, x: &Ext<S>) -> Ext<S> {
        Ext { a: x.a.add(&x.b.mul(&self.nu)), b: x.b.neg() }
    }

    /// Norm x·conj(x) = a² + abν − b²s.
    pub fn norm(&self, x: &Ext<S>) -> S {
        x.a.mul(&x.a).add(&x.a.mul(&x.b).mul(&self.nu)).sub(&x.b.mul(&x.b).mul(&self.s))
    }

    /// Trace x + conj(x) = 2a + bν.
    pub fn trace(&self, x: &Ext<S>) -> S {
        x.a.mul_int(2).add(&x.b.mul(&self.nu))
    }

    pub fn inv(&self, x: &Ext<S>) -> Result<Ext<S>, EngineError> {
        let n = self.norm(x);
        let n_inv = n.inv()?;
        let c = self.conj(x);
        Ok(c.scale(&n_inv))
    }

    /// Evaluate a base-field polynomial at r + u, as a u-polynomial with
    /// extension coefficients (Horner).
    pub fn shift_to_root(&self, p: &XPoly<S>) -> Vec<Ext<S>> {
        let mut acc: Vec<Ext<S>> = Vec::new();
        for c in p.coeffs.iter().rev() {
            let mut next = vec![Ext::base(S::zero()); acc.len() + 1];
            for (i, a) in acc.iter().enumerate() {
                next[i + 1] = next[i + 1].add(a);
                let ra = self.mul(&Ext::root(), a);
                next[i] = next[i].add(&ra);
            }
            if next.is_empty() {
                next.push(Ext::base(S::zero()));
            }
            next[0] = next[0].add(&Ext::base(c.clone()));
            acc = next;
        }
        while acc.last().map_or(false, |e| e.is_zero()) {
            acc.pop();
        }
        acc
    }

    /// Truncated inverse of a u-power series with extension coefficients.
    pub fn series_inv(&self, p: &[Ext<S>], depth: usize) -> Result<Vec<Ext<S>>, EngineError> {
        let c0 = p.first().cloned().unwrap_or_else(|| Ext::base(S::zero()));
        let c0_inv = self.inv(&c0)?;
        let mut out = vec![Ext::base(S::zero()); depth];
        if depth == 0 {
            return Ok(out);
        }
        out[0] = c0_inv.clone();
        for k in 1..depth {
            let mut acc = Ext::base(S::zero());
            for j in 1..=k {
                if let Some(pj) = p.get(j) {
                    acc = acc.add(&self.mul(pj, &out[k - j]));
                }
            }
            out[k] = self.mul(&c0_inv, &acc).neg();
        }
        Ok(out)
    }

    fn mul_ext_series(&self, x: &[Ext<S>], y: &[Ext<S>], depth: usize) -> Vec<Ext<S>> {
        let mut out = vec![Ext::base(S::zero()); depth];
        for i in 0..depth.min(x.len()) {
            for j in 0..depth.saturating_sub(i).min(y.len()) {
                out[i + j] = out[i + j].add(&self.mul(&x[i], &y[j]));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Rational functions on the pole locus, in factored form.
// ---------------------------------------------------------------------------

/// num / (x^xpow · D^dpow), kept reduced: x ∤ num when xpow > 0 and
/// D ∤ num when dpow > 0. Values built against a quadratic field remember it
/// so they can be used as ring coefficients; plain polynomials are
/// context-free and unify with anything.
#[derive(Clone, Debug)]
pub struct LocusRat<S: Scalar> {
    pub num: XPoly<S>,
    pub xpow: u32,
    pub dpow: u32,
    pub ctx: Option<QuadField<S>>,
}

impl<S: Scalar> PartialEq for LocusRat<S> {
    fn eq(&self, o: &Self) -> bool {
        self.num == o.num && self.xpow == o.xpow && self.dpow == o.dpow
    }
}

impl<S: Scalar> LocusRat<S> {
    pub fn zero() -> Self {
        LocusRat { num: XPoly::zero(), xpow: 0, dpow: 0, ctx: None }
    }

    pub fn one() -> Self {
        LocusRat { num: XPoly::one(), xpow: 0, dpow: 0, ctx: None }
    }

    pub fn constant(c: S) -> Self {
        LocusRat { num: XPoly::constant(c), xpow: 0, dpow: 0, ctx: None }
    }

    pub fn from_poly(p: XPoly<S>) -> Self {
        LocusRat { num: p, xpow: 0, dpow: 0, ctx: None }
    }

    pub fn new(num: XPoly<S>, xpow: u32, dpow: u32, q: &QuadField<S>) -> Self {
        let mut r = LocusRat { num, xpow, dpow, ctx: Some(q.clone()) };
        r.reduce(q);
        r
    }

    fn unified_ctx<'a>(&'a self, o: &'a LocusRat<S>) -> Option<&'a QuadField<S>> {
        match (&self.ctx, &o.ctx) {
            (Some(a), Some(b)) => {
                debug_assert!(a == b, "mixed quadratic-field contexts");
                Some(a)
            }
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Exact cancellation of x- and D-valuations shared by num and den.
    /// D-cancellations run first so the s = 0 degeneration (where x divides
    /// D) still reduces cleanly.
    pub fn reduce(&mut self, q: &QuadField<S>) {
        if self.num.is_zero() {
            self.xpow = 0;
            self.dpow = 0;
            return;
        }
        if self.dpow > 0 {
            let d = q.d_poly();
            while self.dpow > 0 {
                let (quo, rem) = self.num.divrem(&d).expect("divrem by monic quadratic");
                if rem.is_zero() {
                    self.num = quo;
                    self.dpow -= 1;
                } else {
                    break;
                }
            }
        }
        let xv = self.num.x_valuation().min(self.xpow as usize);
        if xv > 0 {
            self.num = self.num.shift_down(xv);
            self.xpow -= xv as u32;
        }
    }

    pub fn add(&self, o: &Self, q: &QuadField<S>) -> Self {
        let xp = self.xpow.max(o.xpow);
        let dp = self.dpow.max(o.dpow);
        let d = q.d_poly();
        let lift = |f: &LocusRat<S>| {
            f.num
                .shift_up((xp - f.xpow) as usize)
                .mul(&d.pow(dp - f.dpow))
        };
        LocusRat::new(lift(self).add(&lift(o)), xp, dp, q)
    }

    /// Context-inferring variants for use through the ring-coefficient trait.
    pub fn add_auto(&self, o: &Self) -> Self {
        match self.unified_ctx(o) {
            Some(q) => {
                let q = q.clone();
                self.add(o, &q)
            }
            None => LocusRat { num: self.num.add(&o.num), xpow: 0, dpow: 0, ctx: None },
        }
    }

    pub fn mul_auto(&self, o: &Self) -> Self {
        match self.unified_ctx(o) {
            Some(q) => {
                let q = q.clone();
                self.mul(o, &q)
            }
            None => LocusRat { num: self.num.mul(&o.num), xpow: 0, dpow: 0, ctx: None },
        }
    }

    pub fn sub(&self, o: &Self, q: &QuadField<S>) -> Self {
        self.add(&o.neg(), q)
    }

    pub fn neg(&self) -> Self {
        LocusRat { num: self.num.neg(), xpow: self.xpow, dpow: self.dpow, ctx: self.ctx.clone() }
    }

    pub fn scale(&self, k: &S) -> Self {
        if k.is_zero() {
            return LocusRat::zero();
        }
        LocusRat { num: self.num.scale(k), xpow: self.xpow, dpow: self.dpow, ctx: self.ctx.clone() }
    }

    pub fn mul(&self, o: &Self, q: &QuadField<S>) -> Self {
        LocusRat::new(self.num.mul(&o.num), self.xpow + o.xpow, self.dpow + o.dpow, q)
    }

    /// Division; the divisor's numerator must divide x^j·D^k for some j, k
    /// (its zeros lie on the pole locus).
    pub fn div(&self, o: &Self, q: &QuadField<S>) -> Result<Self, EngineError> {
        if o.is_zero() {
            return Err(EngineError::DivisionByZero);
        }
        let mut num = o.num.clone();
        let d = q.d_poly();
        let j = num.x_valuation();
        num = num.shift_down(j);
        // find the smallest k with num | D^k: then 1/num = quo / D^k
        let deg = num.degree().unwrap_or(0);
        let mut inv_num = XPoly::one();
        let mut k = 0u32;
        if deg > 0 {
            let mut found = false;
            let mut dk = XPoly::one();
            for kk in 1..=(deg as u32 + 1) {
                dk = dk.mul(&d);
                let (quo, rem) = dk.divrem(&num)?;
                if rem.is_zero() {
                    inv_num = quo;
                    k = kk;
                    found = true;
                    break;
                }
            }
            if !found {
                return Err(EngineError::Degenerate(
                    "division by a rational function with poles or zeros off the locus".into(),
                ));
            }
        } else {
            inv_num = XPoly::constant(num.coeff(0).inv()?);
        }
        // self / o = self.num · inv_num · x^{o.xpow} D^{o.dpow} / (x^{xpow+j} D^{dpow+k})
        let mut out = LocusRat {
            num: self
                .num
                .mul(&inv_num)
                .shift_up(o.xpow as usize)
                .mul(&d.pow(o.dpow)),
            xpow: self.xpow + j as u32,
            dpow: self.dpow + k,
            ctx: Some(q.clone()),
        };
        out.reduce(q);
        Ok(out)
    }

    pub fn derivative(&self, q: &QuadField<S>) -> Self {
        // (n / x^a D^b)' = [n' x D − n (a D + b x D')] / x^{a+1} D^{b+1}
        let d = q.d_poly();
        let dp = d.derivative();
        let term1 = self.num.derivative().mul(&XPoly::x()).mul(&d);
        let term2 = self
            .num
            .mul(&d.scale(&S::from_int(self.xpow as i64)).add(&XPoly::x().mul(&dp).scale(&S::from_int(self.dpow as i64))));
        LocusRat::new(term1.sub(&term2), self.xpow + 1, self.dpow + 1, q)
    }

    /// f(c/x) for a scalar c; lands on the locus of the switched context
    /// when c = s (the bar substitution x̄ = Qe^t/x).
    pub fn subst_scalar_over_x(&self, c: &S, q: &QuadField<S>, q_out: &QuadField<S>) -> Result<Self, EngineError> {
        // D(c/x) = (c² − νcx − sx²)/x². For c = s this is −s(x² + νx − s)/x².
        let dn = self.num.degree().unwrap_or(0);
        let num_rev = self.num.reversed_weighted(c);
        // denominator piece (c/x)^a = c^a x^{-a}
        let mut c_pow = S::one();
        for _ in 0..self.xpow {
            c_pow = c_pow.mul(c);
        }
        // D(c/x)^b: numerator polynomial E(x) := c² − νcx − sx², over x².
        let e_poly = XPoly::from_coeffs(vec![
            c.mul(c),
            q.nu.mul(c).neg(),
            q.s.neg(),
        ]);
        // f(c/x) = num_rev(x) x^{-dn} / [ c^a x^{-a} · E(x)^b x^{-2b} ]
        //        = num_rev(x) · x^{a + 2b - dn} / ( c^a · E(x)^b )
        // E must equal (unit)·D_out for the result to live on a locus.
        let d_out = q_out.d_poly();
        let lead = e_poly.coeff(2);
        if lead.is_zero() {
            return Err(EngineError::Degenerate("substitution collapses the critical factor".into()));
        }
        let unit = lead;
        if e_poly.scale(&unit.inv()?) != d_out {
            return Err(EngineError::Degenerate(
                "substitution does not map the pole locus to the target locus".into(),
            ));
        }
        let shift = self.xpow as i64 + 2 * self.dpow as i64 - dn as i64;
        let mut unit_pow = S::one();
        for _ in 0..self.dpow {
            unit_pow = unit_pow.mul(&unit);
        }
        let scalar = c_pow.mul(&unit_pow).inv()?;
        let mut out = if shift >= 0 {
            LocusRat {
                num: num_rev.shift_up(shift as usize).scale(&scalar),
                xpow: 0,
                dpow: self.dpow,
                ctx: Some(q_out.clone()),
            }
        } else {
            LocusRat {
                num: num_rev.scale(&scalar),
                xpow: (-shift) as u32,
                dpow: self.dpow,
                ctx: Some(q_out.clone()),
            }
        };
        out.reduce(q_out);
        Ok(out)
    }

    pub fn eval(&self, at: &S, q: &QuadField<S>) -> Result<S, EngineError> {
        let mut den = S::one();
        for _ in 0..self.xpow {
            den = den.mul(at);
        }
        let dv = q.d_poly().eval(at);
        for _ in 0..self.dpow {
            den = den.mul(&dv);
        }
        self.num.eval(at).div(&den)
    }

    /// Laurent expansion at x = ∞, valid down to exponent `lo`. The
    /// denominator inversion is carried deep enough that the certified
    /// window reaches `lo` regardless of the numerator degree.
    pub fn expand_at_infinity(
        &self,
        var: SeriesVar,
        lo: i64,
        q: &QuadField<S>,
    ) -> Result<TruncSeries<S>, EngineError> {
        if self.dpow == 0 && self.xpow == 0 {
            return Ok(self.num.as_series(var).truncated_below(lo));
        }
        let num = self.num.as_series(var);
        let den_poly = q.d_poly().pow(self.dpow).shift_up(self.xpow as usize);
        let den_deg = den_poly.degree().unwrap_or(0) as i64;
        let den_val = den_poly.x_valuation() as i64;
        let num_deg = self.num.degree().unwrap_or(0) as i64;
        // deep enough for the requested window, but never dropping real terms
        let cut = (lo + 2 * den_deg - num_deg - 1).min(den_val);
        let den = den_poly.as_series(var).truncated_below(cut);
        Ok(num.mul(&den.recip()?)?.truncated_below(lo))
    }

    /// Laurent expansion at x = 0, valid up to exponent `hi`; the trailing
    /// denominator coefficient must be invertible.
    pub fn expand_at_zero(
        &self,
        var: SeriesVar,
        hi: i64,
        q: &QuadField<S>,
    ) -> Result<TruncSeries<S>, EngineError> {
        if self.dpow == 0 && self.xpow == 0 {
            return Ok(self.num.as_series(var).truncated_above(hi));
        }
        let num = self.num.as_series(var);
        let den_poly = q.d_poly().pow(self.dpow).shift_up(self.xpow as usize);
        let val = den_poly.x_valuation() as i64;
        let den_deg = den_poly.degree().unwrap_or(0) as i64;
        let cut = (hi + 2 * val + 1).max(den_deg);
        let den = den_poly.as_series(var).truncated_above(cut);
        Ok(num.mul(&den.recip()?)?.truncated_above(hi))
    }

    /// Substitute a truncated series for x (series must be invertible in the
    /// direction of its truncation).
    pub fn eval_series(
        &self,
        g: &TruncSeries<S>,
        q: &QuadField<S>,
    ) -> Result<TruncSeries<S>, EngineError> {
        let n = self.num.eval_series(g)?;
        let den_poly = q.d_poly().pow(self.dpow).shift_up(self.xpow as usize);
        let d = den_poly.eval_series(g)?;
        n.mul(&d.recip()?)
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T) -> LocusRat<T> {
        LocusRat {
            num: self.num.map_scalars(&f),
            xpow: self.xpow,
            dpow: self.dpow,
            ctx: self.ctx.as_ref().map(|q| QuadField::new(f(&q.nu), f(&q.s))),
        }
    }
}

impl<S: Scalar> Coeff for LocusRat<S> {
    fn zero() -> Self {
        LocusRat::zero()
    }
    fn one() -> Self {
        LocusRat::one()
    }
    fn is_zero(&self) -> bool {
        LocusRat::is_zero(self)
    }
    fn add(&self, rhs: &Self) -> Self {
        self.add_auto(rhs)
    }
    fn sub(&self, rhs: &Self) -> Self {
        self.add_auto(&rhs.neg())
    }
    fn mul(&self, rhs: &Self) -> Self {
        self.mul_auto(rhs)
    }
    fn neg(&self) -> Self {
        LocusRat::neg(self)
    }
    fn inv(&self) -> Result<Self, EngineError> {
        match &self.ctx {
            Some(q) => {
                let q = q.clone();
                LocusRat::one().div(self, &q)
            }
            None => {
                if self.num.degree() == Some(0) {
                    Ok(LocusRat::constant(self.num.coeff(0).inv()?))
                } else if self.num.degree() == Some(1) && self.num.coeff(0).is_zero() {
                    // c·x: invert to (1/c)/x, still context-free
                    Ok(LocusRat {
                        num: XPoly::constant(self.num.coeff(1).inv()?),
                        xpow: 1,
                        dpow: 0,
                        ctx: None,
                    })
                } else {
                    Err(EngineError::Degenerate(
                        "context-free inverse of a non-monomial".into(),
                    ))
                }
            }
        }
    }
    fn mul_ratio(&self, n: i64, d: i64) -> Self {
        self.scale(&S::from_ratio(n, d))
    }
}

// ---------------------------------------------------------------------------
// Residues and integration.
// ---------------------------------------------------------------------------

/// Exact residues of f·dx at the four points of the locus.
#[derive(Clone, Debug)]
pub struct ResidueData<S: Scalar> {
    pub at_zero: S,
    pub at_root: Ext<S>,
    pub at_conj_root: Ext<S>,
    /// Res_∞ = −[x⁻¹] of the expansion at ∞.
    pub at_infinity: S,
}

impl<S: Scalar> ResidueData<S> {
    pub fn total(&self, q: &QuadField<S>) -> S {
        self.at_zero.add(&q.trace(&self.at_root)).add(&self.at_infinity)
    }
}

/// Laurent coefficients of f at the root r: coefficient of (x−r)^{j-b-ish};
/// returns the list [u^0, …, u^{depth-1}] of N(r+u)·(r+u)^{-a}·(u+Δ)^{-b},
/// so that index (b−1) is the residue numerator of f/(x−r)-structure.
fn root_series<S: Scalar>(
    f: &LocusRat<S>,
    depth: usize,
    q: &QuadField<S>,
) -> Result<Vec<Ext<S>>, EngineError> {
    let num_at = q.shift_to_root(&f.num);
    let x_at = q.shift_to_root(&XPoly::x().pow(f.xpow));
    let x_inv = q.series_inv(&x_at, depth)?;
    // (u + Δ)^b with Δ = r − r̄ = 2r − ν.
    let delta = Ext { a: q.nu.neg(), b: S::from_int(2) };
    let lin = vec![delta, Ext::base(S::one())];
    let mut dpow = vec![Ext::base(S::one())];
    for _ in 0..f.dpow {
        let mut next = vec![Ext::base(S::zero()); dpow.len() + 1];
        for (i, p) in dpow.iter().enumerate() {
            for (j, l) in lin.iter().enumerate() {
                next[i + j] = next[i + j].add(&q.mul(p, l));
            }
        }
        dpow = next;
    }
    let d_inv = q.series_inv(&dpow, depth)?;
    Ok(q.mul_ext_series(&q.mul_ext_series(&num_at, &x_inv, depth), &d_inv, depth))
}

/// Exact residues of f·dx at {0, r, r̄, ∞}.
pub fn residues<S: Scalar>(f: &LocusRat<S>, q: &QuadField<S>) -> Result<ResidueData<S>, EngineError> {
    let a = f.xpow as usize;
    let b = f.dpow as usize;
    let at_zero = if a == 0 {
        S::zero()
    } else {
        // [x^{a-1}] of num·D^{-b} at 0.
        let g = LocusRat { num: f.num.clone(), xpow: 0, dpow: f.dpow, ctx: Some(q.clone()) };
        let series = g.expand_at_zero(SeriesVar::X, a as i64 - 1, q)?;
        series.coeff(a as i64 - 1)
    };
    let (at_root, at_conj_root) = if b == 0 {
        (Ext::base(S::zero()), Ext::base(S::zero()))
    } else {
        let g = root_series(f, b, q)?;
        let res = g[b - 1].clone();
        let resc = q.conj(&res);
        (res, resc)
    };
    let at_infinity = f.expand_at_infinity(SeriesVar::X, -1, q)?.coeff(-1).neg();
    Ok(ResidueData { at_zero, at_root, at_conj_root, at_infinity })
}

/// Result of a rational integration against the pole locus.
#[derive(Clone, Debug)]
pub struct RationalIntegral<S: Scalar> {
    /// The rational antiderivative (integration constant zero).
    pub value: LocusRat<S>,
    /// Coefficient of log x.
    pub log_at_zero: S,
    /// Coefficient of log(x − r); the log(x − r̄) coefficient is conjugate.
    pub log_at_root: Ext<S>,
}

impl<S: Scalar> RationalIntegral<S> {
    pub fn is_log_free(&self) -> bool {
        self.log_at_zero.is_zero() && self.log_at_root.is_zero()
    }
}

/// γ/(x−r)^k + γ̄/(x−r̄)^k as a base-field rational function.
pub fn conjugate_pair_term<S: Scalar>(
    gamma: &Ext<S>,
    k: usize,
    q: &QuadField<S>,
) -> Result<LocusRat<S>, EngineError> {
    let rbar = Ext { a: q.nu.clone(), b: S::from_int(-1) };
    let r = Ext::root();
    let pow_lin = |c: &Ext<S>| -> Vec<Ext<S>> {
        let mut acc = vec![Ext::base(S::one())];
        for _ in 0..k {
            let mut next = vec![Ext::base(S::zero()); acc.len() + 1];
            for (i, t) in acc.iter().enumerate() {
                next[i + 1] = next[i + 1].add(t);
                next[i] = next[i].add(&q.mul(t, &c.neg()));
            }
            acc = next;
        }
        acc
    };
    let pa = pow_lin(&rbar);
    let pb = pow_lin(&r);
    let gbar = q.conj(gamma);
    let mut num_coeffs = Vec::new();
    for i in 0..pa.len() {
        let term = q.mul(gamma, &pa[i]).add(&q.mul(&gbar, &pb[i]));
        if !term.b.is_zero() {
            return Err(EngineError::Degenerate(
                "conjugate pair did not collapse to the base field".into(),
            ));
        }
        num_coeffs.push(term.a);
    }
    Ok(LocusRat::new(XPoly::from_coeffs(num_coeffs), 0, k as u32, q))
}

/// Integrate f dx in partial fractions over the quadratic extension.
pub fn integrate_rational<S: Scalar>(
    f: &LocusRat<S>,
    q: &QuadField<S>,
) -> Result<RationalIntegral<S>, EngineError> {
    let a = f.xpow as usize;
    let b = f.dpow as usize;
    let den = q.d_poly().pow(f.dpow).shift_up(a);
    let (p, n) = if den.degree() == Some(0) {
        (f.num.clone(), XPoly::zero())
    } else {
        f.num.divrem(&den)?
    };
    // ∫ polynomial part
    let p_int = XPoly::from_coeffs(
        std::iter::once(S::zero())
            .chain(p.coeffs.iter().enumerate().map(|(k, c)| c.mul_ratio(1, k as i64 + 1)))
            .collect(),
    );
    let mut value = LocusRat::from_poly(p_int);
    let proper = LocusRat { num: n, xpow: f.xpow, dpow: f.dpow, ctx: Some(q.clone()) };

    let mut log_at_zero = S::zero();
    if a > 0 && !proper.is_zero() {
        let g = LocusRat {
            num: proper.num.clone(),
            xpow: 0,
            dpow: proper.dpow,
            ctx: Some(q.clone()),
        };
        let series = g.expand_at_zero(SeriesVar::X, a as i64 - 1, q)?;
        for j in 1..=a {
            let alpha = series.coeff(a as i64 - j as i64);
            if j == 1 {
                log_at_zero = alpha;
            } else if !alpha.is_zero() {
                let term = LocusRat::new(
                    XPoly::constant(alpha.mul_ratio(1, 1 - j as i64)),
                    j as u32 - 1,
                    0,
                    q,
                );
                value = value.add(&term, q);
            }
        }
    }

    let mut log_at_root = Ext::base(S::zero());
    if b > 0 && !proper.is_zero() {
        let g = root_series(&proper, b, q)?;
        for j in 1..=b {
            let beta = g[b - j].clone();
            if j == 1 {
                log_at_root = beta;
            } else if !beta.is_zero() {
                let gamma = beta.scale(&S::from_ratio(1, 1 - j as i64));
                value = value.add(&conjugate_pair_term(&gamma, j - 1, q)?, q);
            }
        }
    }

    Ok(RationalIntegral { value, log_at_zero, log_at_root })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ParamEnv, ParamScalar};

    type S = ParamScalar;

    fn q() -> QuadField<S> {
        let env = ParamEnv::symbolic();
        QuadField::new(env.nu.clone(), env.s.clone())
    }

    #[test]
    fn locus_reduces() {
        // (x D) / (x^2 D^2) = 1/(x D)
        let qq = q();
        let num = XPoly::x().mul(&qq.d_poly());
        let f = LocusRat::new(num, 2, 2, &qq);
        assert_eq!(f.xpow, 1);
        assert_eq!(f.dpow, 1);
        assert_eq!(f.num, XPoly::one());
    }

    #[test]
    fn ext_inverse() {
        let qq = q();
        let x = Ext { a: ParamScalar::param(crate::scalar::Param::T), b: S::from_int(3) };
        let xi = qq.inv(&x).unwrap();
        let prod = qq.mul(&x, &xi);
        assert!(prod.a.is_one() && prod.b.is_zero());
    }

    #[test]
    fn root_satisfies_quadratic() {
        let qq = q();
        let r = Ext::<S>::root();
        let r2 = qq.mul(&r, &r);
        let rhs = Ext { a: qq.s.clone(), b: qq.nu.clone() };
        assert_eq!(r2, rhs);
    }

    #[test]
    fn division_by_locus_unit() {
        // (1/x) / (D/x^2) = x / D
        let qq = q();
        let f = LocusRat::new(XPoly::one(), 1, 0, &qq);
        let phi = LocusRat::new(qq.d_poly(), 2, 0, &qq); // D/x^2
        let g = f.div(&phi, &qq).unwrap();
        assert_eq!(g.num, XPoly::x());
        assert_eq!(g.xpow, 0);
        assert_eq!(g.dpow, 1);
    }

    #[test]
    fn residues_sum_to_zero() {
        // f = x^3/(x (x^2-nu x-s)^2)
        let qq = q();
        let f = LocusRat::new(XPoly::x().pow(3), 1, 2, &qq);
        let r = residues(&f, &qq).unwrap();
        assert!(r.total(&qq).is_zero(), "four-point residue sum must vanish");
        assert!(r.at_zero.is_zero());
    }

    #[test]
    fn residues_at_zero_value() {
        // f = 1/(x D): Res_0 = 1/D(0) = -1/s.
        let qq = q();
        let f = LocusRat::new(XPoly::one(), 1, 1, &qq);
        let r = residues(&f, &qq).unwrap();
        let s_inv = qq.s.inv().unwrap();
        assert_eq!(r.at_zero, s_inv.neg());
        assert!(r.total(&qq).is_zero());
    }

    #[test]
    fn integrate_then_differentiate() {
        // f = (x^2 + t)/D^2: recover f from the antiderivative and log parts.
        let env = ParamEnv::symbolic();
        let qq = q();
        let num = XPoly::from_coeffs(vec![env.t.clone(), S::zero(), S::one()]);
        let f = LocusRat::new(num, 0, 2, &qq);
        let int = integrate_rational(&f, &qq).unwrap();
        let mut back = int.value.derivative(&qq);
        if !int.log_at_zero.is_zero() {
            back = back.add(&LocusRat::new(XPoly::constant(int.log_at_zero.clone()), 1, 0, &qq), &qq);
        }
        if !int.log_at_root.is_zero() {
            back = back.add(&conjugate_pair_term(&int.log_at_root, 1, &qq).unwrap(), &qq);
        }
        assert_eq!(back, f);
    }

    #[test]
    fn integrate_with_pole_at_zero() {
        // f = (1 - nu/x - s/x^2) · 1 = (x^2 - nu x - s)/x^2 = D/x^2:
        // ∫ = x − ν log x + s/x.
        let qq = q();
        let f = LocusRat::new(qq.d_poly(), 2, 0, &qq);
        let int = integrate_rational(&f, &qq).unwrap();
        assert_eq!(int.log_at_zero, qq.nu.neg());
        assert!(int.log_at_root.is_zero());
        // value = x + s/x
        let expect = LocusRat::new(
            XPoly::from_coeffs(vec![qq.s.clone(), S::zero(), S::one()]),
            1,
            0,
            &qq,
        );
        assert_eq!(int.value, expect);
    }

    #[test]
    fn bar_substitution_maps_to_switched_locus() {
        // x ↦ s/x maps 1/D to a rational on the locus of x² + νx − s.
        let qq = q();
        let qbar = qq.switched();
        let f = LocusRat::new(XPoly::one(), 0, 1, &qq);
        let g = f.subst_scalar_over_x(&qq.s, &qq, &qbar).unwrap();
        // 1/D(s/x) = x²/(−s (x²+νx−s))
        let expect = LocusRat::new(
            XPoly::x().pow(2).scale(&qq.s.neg().inv().unwrap()),
            0,
            1,
            &qbar,
        );
        assert_eq!(g, expect);
    }

    #[test]
    fn expansion_windows_agree() {
        let qq = q();
        let f = LocusRat::new(XPoly::one(), 1, 1, &qq);
        let shallow = f.expand_at_infinity(SeriesVar::X, -4, &qq).unwrap();
        let deep = f.expand_at_infinity(SeriesVar::X, -8, &qq).unwrap();
        assert!(shallow.eq_on_common_window(&deep).unwrap());
        let z_shallow = f.expand_at_zero(SeriesVar::X, 2, &qq).unwrap();
        let z_deep = f.expand_at_zero(SeriesVar::X, 5, &qq).unwrap();
        assert!(z_shallow.eq_on_common_window(&z_deep).unwrap());
    }
}
