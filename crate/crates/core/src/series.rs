//! One-variable truncated Laurent series with exp/log, composition,
//! reversion, residues, and integration with adjoined logarithms.
//!
//! A series carries a *known region*: the set of exponents whose coefficients
//! are fully determined. `lo = None` means the series is exact below its
//! stored support (nothing was truncated there) and likewise for `hi`.
//! An expansion at ∞ is known on [L, +∞); an expansion at 0 on (−∞, H];
//! a Laurent polynomial everywhere. Arithmetic intersects known regions and
//! never silently widens them; comparisons only assert equality on the
//! intersection.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::EngineError;
use crate::scalar::Coeff;

/// The distinguished formal variable of a series.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SeriesVar {
    Z,
    Lambda,
    X,
    XBar,
    W,
    /// Critical-value coordinate Λ.
    CapLambda,
    /// Constants; unifies with any variable on binary operations.
    Any,
}

impl fmt::Display for SeriesVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SeriesVar::Z => "z",
            SeriesVar::Lambda => "lambda",
            SeriesVar::X => "x",
            SeriesVar::XBar => "xbar",
            SeriesVar::W => "w",
            SeriesVar::CapLambda => "Lambda",
            SeriesVar::Any => "_",
        };
        write!(f, "{}", s)
    }
}

fn unify_var(a: SeriesVar, b: SeriesVar) -> Result<SeriesVar, EngineError> {
    match (a, b) {
        (SeriesVar::Any, v) => Ok(v),
        (v, SeriesVar::Any) => Ok(v),
        (u, v) if u == v => Ok(u),
        (u, v) => Err(EngineError::VariableMismatch(u.to_string(), v.to_string())),
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct TruncSeries<C: Coeff> {
    pub var: SeriesVar,
    coeffs: BTreeMap<i64, C>,
    /// Known region lower end; None means exact below the support.
    pub lo: Option<i64>,
    /// Known region upper end; None means exact above the support.
    pub hi: Option<i64>,
    /// Coefficient of log(var), produced only by integration.
    pub log_coeff: Option<C>,
}

fn min_opt(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    }
}

fn max_opt(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    }
}

impl<C: Coeff> TruncSeries<C> {
    pub fn zero(var: SeriesVar) -> Self {
        TruncSeries { var, coeffs: BTreeMap::new(), lo: None, hi: None, log_coeff: None }
    }

    pub fn constant(var: SeriesVar, c: C) -> Self {
        let mut s = TruncSeries::zero(var);
        s.set_coeff(0, c);
        s
    }

    pub fn one(var: SeriesVar) -> Self {
        TruncSeries::constant(var, C::one())
    }

    pub fn monomial(var: SeriesVar, exp: i64, c: C) -> Self {
        let mut s = TruncSeries::zero(var);
        s.set_coeff(exp, c);
        s
    }

    pub fn from_terms(var: SeriesVar, terms: Vec<(i64, C)>) -> Self {
        let mut s: TruncSeries<C> = TruncSeries::zero(var);
        for (e, c) in terms {
            let cur = s.coeff(e).add(&c);
            s.set_coeff(e, cur);
        }
        s
    }

    pub fn set_coeff(&mut self, exp: i64, c: C) {
        if c.is_zero() {
            self.coeffs.remove(&exp);
        } else {
            self.coeffs.insert(exp, c);
        }
    }

    pub fn coeff(&self, exp: i64) -> C {
        self.coeffs.get(&exp).cloned().unwrap_or_else(C::zero)
    }

    /// Whether the coefficient at `exp` is certified by the known region.
    pub fn knows(&self, exp: i64) -> bool {
        self.lo.map_or(true, |l| exp >= l) && self.hi.map_or(true, |h| exp <= h)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&i64, &C)> {
        self.coeffs.iter()
    }

    pub fn support_min(&self) -> Option<i64> {
        self.coeffs.keys().next().copied()
    }

    pub fn support_max(&self) -> Option<i64> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn is_known_zero(&self) -> bool {
        self.coeffs.is_empty() && self.log_coeff.is_none()
    }

    pub fn has_log(&self) -> bool {
        self.log_coeff.is_some()
    }

    fn require_no_log(&self) -> Result<(), EngineError> {
        if self.has_log() {
            Err(EngineError::UnexpectedLogPart)
        } else {
            Ok(())
        }
    }

    /// Deliberately shrink the known region (and drop coefficients outside).
    pub fn restricted(&self, lo: Option<i64>, hi: Option<i64>) -> Self {
        let mut out = self.clone();
        out.lo = max_opt(self.lo, lo);
        out.hi = min_opt(self.hi, hi);
        out.clip();
        out
    }

    pub fn truncated_below(&self, lo: i64) -> Self {
        self.restricted(Some(lo), None)
    }

    pub fn truncated_above(&self, hi: i64) -> Self {
        self.restricted(None, Some(hi))
    }

    fn clip(&mut self) {
        let lo = self.lo;
        let hi = self.hi;
        self.coeffs.retain(|e, _| lo.map_or(true, |l| *e >= l) && hi.map_or(true, |h| *e <= h));
    }

    fn check_window(&self) -> Result<(), EngineError> {
        if let (Some(l), Some(h)) = (self.lo, self.hi) {
            if l > h {
                return Err(EngineError::EmptyWindow);
            }
        }
        Ok(())
    }

    pub fn map<D: Coeff>(&self, f: impl Fn(&C) -> D) -> TruncSeries<D> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(e, c)| (*e, f(c)))
            .filter(|(_, c)| !c.is_zero())
            .collect();
        TruncSeries {
            var: self.var,
            coeffs,
            lo: self.lo,
            hi: self.hi,
            log_coeff: self.log_coeff.as_ref().map(f),
        }
    }

    pub fn add(&self, rhs: &Self) -> Result<Self, EngineError> {
        let var = unify_var(self.var, rhs.var)?;
        let mut out = TruncSeries::zero(var);
        out.lo = max_opt(self.lo, rhs.lo);
        out.hi = min_opt(self.hi, rhs.hi);
        out.check_window()?;
        for (e, c) in &self.coeffs {
            out.set_coeff(*e, c.clone());
        }
        for (e, c) in &rhs.coeffs {
            let cur = out.coeff(*e).add(c);
            out.set_coeff(*e, cur);
        }
        out.log_coeff = match (&self.log_coeff, &rhs.log_coeff) {
            (None, None) => None,
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.clone()),
            (Some(a), Some(b)) => {
                let s = a.add(b);
                if s.is_zero() {
                    None
                } else {
                    Some(s)
                }
            }
        };
        out.clip();
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        self.map(|c| c.neg())
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, EngineError> {
        self.add(&rhs.neg())
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            let mut z = TruncSeries::zero(self.var);
            z.lo = self.lo;
            z.hi = self.hi;
            return z;
        }
        self.map(|k| k.mul(c))
    }

    pub fn scale_ratio(&self, n: i64, d: i64) -> Self {
        self.map(|k| k.mul_ratio(n, d))
    }

    /// Multiply by a single monomial c·var^k (exact shift).
    pub fn mul_monomial(&self, k: i64, c: &C) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(e, v)| (*e + k, v.mul(c)))
            .filter(|(_, v)| !v.is_zero())
            .collect();
        TruncSeries {
            var: self.var,
            coeffs,
            lo: self.lo.map(|l| l + k),
            hi: self.hi.map(|h| h + k),
            log_coeff: None,
        }
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self, EngineError> {
        self.require_no_log()?;
        rhs.require_no_log()?;
        let var = unify_var(self.var, rhs.var)?;

        // Opposite one-sided truncations leave nothing determined.
        if (self.lo.is_some() && rhs.hi.is_some() && self.hi.is_none() && rhs.lo.is_none())
            || (self.hi.is_some() && rhs.lo.is_some() && self.lo.is_none() && rhs.hi.is_none())
        {
            return Err(EngineError::EmptyWindow);
        }

        let mut lo: Option<i64> = None;
        let mut hi: Option<i64> = None;
        // Error below in self hits everything in rhs's support, and vice versa.
        if let Some(a1) = self.lo {
            if let Some(sh) = rhs.support_max() {
                lo = max_opt(lo, Some(a1 + sh));
            }
            if let Some(b1) = rhs.lo {
                lo = max_opt(lo, Some(a1 + b1 - 1));
            }
        }
        if let Some(b1) = rhs.lo {
            if let Some(sh) = self.support_max() {
                lo = max_opt(lo, Some(b1 + sh));
            }
        }
        if let Some(a2) = self.hi {
            if let Some(sl) = rhs.support_min() {
                hi = min_opt(hi, Some(a2 + sl));
            }
            if let Some(b2) = rhs.hi {
                hi = min_opt(hi, Some(a2 + b2 + 1));
            }
        }
        if let Some(b2) = rhs.hi {
            if let Some(sl) = self.support_min() {
                hi = min_opt(hi, Some(b2 + sl));
            }
        }

        let mut out: TruncSeries<C> = TruncSeries::zero(var);
        out.lo = lo;
        out.hi = hi;
        out.check_window()?;
        for (ea, ca) in &self.coeffs {
            for (eb, cb) in &rhs.coeffs {
                let e = ea + eb;
                if out.knows(e) {
                    let cur = out.coeff(e).add(&ca.mul(cb));
                    out.set_coeff(e, cur);
                }
            }
        }
        out.clip();
        Ok(out)
    }

    pub fn pow(&self, n: u32) -> Result<Self, EngineError> {
        let mut r = TruncSeries::one(self.var);
        for _ in 0..n {
            r = r.mul(self)?;
        }
        Ok(r)
    }

    /// d/d(var); consumes the log part into a 1/var term.
    pub fn derivative(&self) -> Self {
        let mut out = TruncSeries::zero(self.var);
        out.lo = self.lo.map(|l| l - 1);
        out.hi = self.hi.map(|h| h - 1);
        for (e, c) in &self.coeffs {
            if *e != 0 {
                out.set_coeff(*e - 1, c.mul_ratio(*e, 1));
            }
        }
        if let Some(lc) = &self.log_coeff {
            let cur = out.coeff(-1).add(lc);
            out.set_coeff(-1, cur);
        }
        out.clip();
        out
    }

    /// Term-wise antiderivative; the exponent −1 produces a log term.
    /// The integration constant defaults to zero.
    pub fn integrate(&self) -> Self {
        assert!(!self.has_log(), "integration of adjoined log terms is outside the ring");
        let mut out = TruncSeries::zero(self.var);
        out.lo = self.lo.map(|l| l + 1);
        out.hi = self.hi.map(|h| h + 1);
        let mut log_c: Option<C> = None;
        for (e, c) in &self.coeffs {
            if *e == -1 {
                log_c = Some(c.clone());
            } else {
                out.set_coeff(*e + 1, c.mul_ratio(1, *e + 1));
            }
        }
        out.log_coeff = log_c;
        out.clip();
        out
    }

    /// Reciprocal, expanding at the bounded end of the support.
    ///
    /// The leading coefficient (top term for ∞-type expansions, bottom term
    /// for 0-type) must be invertible. Exact Laurent polynomials must be
    /// monomials or the caller must truncate first to pick a direction.
    pub fn recip(&self) -> Result<Self, EngineError> {
        self.require_no_log()?;
        if self.coeffs.is_empty() {
            return Err(EngineError::DivisionByNonUnit);
        }
        if self.coeffs.len() == 1 {
            let (e, c) = self.coeffs.iter().next().unwrap();
            // self = c z^e (1 + u) with u the unknown tail; the tail of the
            // reciprocal is unknown past the region shifted through -2e.
            let mut out = TruncSeries::monomial(self.var, -e, c.inv()?);
            out.lo = self.lo.map(|l| l - 2 * e);
            out.hi = self.hi.map(|h| h - 2 * e);
            out.clip();
            return Ok(out);
        }
        // Pick the expansion direction from the known region.
        let at_top = match (self.lo, self.hi) {
            (Some(_), None) => true,
            (None, Some(_)) => false,
            _ => return Err(EngineError::DivisionByNonUnit),
        };
        let lead_e = if at_top { self.support_max().unwrap() } else { self.support_min().unwrap() };
        let lead_c = self.coeff(lead_e);
        let lead_inv = lead_c.inv().map_err(|_| EngineError::DivisionByNonUnit)?;
        // u = self / (lead) - 1, supported strictly on the tail side.
        let u = self.mul_monomial(-lead_e, &lead_inv);
        let tail = u.sub(&TruncSeries::one(self.var))?;
        if !tail.coeff(0).is_zero() {
            return Err(EngineError::DivisionByNonUnit);
        }
        // Geometric series sum_{k} (-tail)^k.
        let mut acc = TruncSeries::one(self.var);
        acc.lo = tail.lo;
        acc.hi = tail.hi;
        let mut power = TruncSeries::one(self.var);
        power.lo = tail.lo;
        power.hi = tail.hi;
        let neg_tail = tail.neg();
        loop {
            power = power.mul(&neg_tail)?.restricted(tail.lo, tail.hi);
            if power.is_known_zero() {
                break;
            }
            acc = acc.add(&power)?;
        }
        Ok(acc.mul_monomial(-lead_e, &lead_inv))
    }

    pub fn div(&self, rhs: &Self) -> Result<Self, EngineError> {
        self.mul(&rhs.recip()?)
    }

    fn one_signed_tail(&self) -> Result<bool, EngineError> {
        // true: support strictly positive; false: strictly negative.
        let smin = self.support_min();
        let smax = self.support_max();
        match (smin, smax) {
            (None, None) => Ok(true),
            (Some(a), Some(b)) => {
                if a >= 1 {
                    Ok(true)
                } else if b <= -1 {
                    Ok(false)
                } else {
                    Err(EngineError::NonpositiveFiltration(format!(
                        "support [{}, {}] mixes signs or has a constant term",
                        a, b
                    )))
                }
            }
            _ => unreachable!(),
        }
    }

    /// exp of a series with strictly one-signed support. The known region of
    /// the input bounds the expansion; exact inputs must be truncated first.
    pub fn exp(&self) -> Result<Self, EngineError> {
        self.require_no_log()?;
        let positive = self.one_signed_tail()?;
        if self.coeffs.is_empty() {
            let mut one = TruncSeries::one(self.var);
            one.lo = self.lo;
            one.hi = self.hi;
            return Ok(one);
        }
        if positive && (self.hi.is_none() || self.lo.is_some()) {
            return Err(EngineError::NonpositiveFiltration(
                "exp with positive support needs an upper cut and an exact lower end".into(),
            ));
        }
        if !positive && (self.lo.is_none() || self.hi.is_some()) {
            return Err(EngineError::NonpositiveFiltration(
                "exp with negative support needs a lower cut and an exact upper end".into(),
            ));
        }
        let mut acc = TruncSeries::one(self.var);
        acc.lo = self.lo;
        acc.hi = self.hi;
        let mut power = acc.clone();
        let mut k: i64 = 0;
        loop {
            k += 1;
            power = power.mul(self)?.scale_ratio(1, k).restricted(self.lo, self.hi);
            if power.is_known_zero() {
                break;
            }
            acc = acc.add(&power)?;
        }
        Ok(acc)
    }

    /// log of a series with constant term exactly 1.
    pub fn log(&self) -> Result<Self, EngineError> {
        self.require_no_log()?;
        let mut u = self.clone();
        let c0 = u.coeff(0);
        if !c0.sub(&C::one()).is_zero() {
            return Err(EngineError::LogConstantTerm(format!("{:?}", c0)));
        }
        u.set_coeff(0, C::zero());
        let positive = u.one_signed_tail()?;
        if u.coeffs.is_empty() {
            let mut z = TruncSeries::zero(self.var);
            z.lo = self.lo;
            z.hi = self.hi;
            return Ok(z);
        }
        if positive && (u.hi.is_none() || u.lo.is_some()) {
            return Err(EngineError::NonpositiveFiltration("log of untruncated series".into()));
        }
        if !positive && (u.lo.is_none() || u.hi.is_some()) {
            return Err(EngineError::NonpositiveFiltration("log of untruncated series".into()));
        }
        let mut acc = TruncSeries::zero(self.var);
        acc.lo = u.lo;
        acc.hi = u.hi;
        let mut power = TruncSeries::one(self.var);
        power.lo = acc.lo;
        power.hi = acc.hi;
        let mut k: i64 = 0;
        loop {
            k += 1;
            power = power.mul(&u)?.restricted(u.lo, u.hi);
            if power.is_known_zero() {
                break;
            }
            let sign = if k % 2 == 1 { 1 } else { -1 };
            acc = acc.add(&power.scale_ratio(sign, k))?;
        }
        Ok(acc)
    }

    /// Substitute `g` for the variable of `self`. `g` must have an
    /// invertible direction whenever `self` has negative exponents.
    pub fn compose(&self, g: &Self) -> Result<Self, EngineError> {
        self.require_no_log()?;
        g.require_no_log()?;
        // Substitution is supported for g expanded at ∞ with top exponent 1
        // (near-identity coordinate changes); self must be exact above so the
        // upper tail of the result stays determined.
        let gtop = g.support_max().unwrap_or(0);
        if gtop != 1 {
            return Err(EngineError::NotNearIdentity);
        }
        if self.hi.is_some() {
            return Err(EngineError::WindowTooShallow(
                "compose requires the outer series to be exact above".into(),
            ));
        }
        let mut acc: TruncSeries<C> = TruncSeries {
            var: g.var,
            coeffs: BTreeMap::new(),
            lo: self.lo,
            hi: None,
            log_coeff: None,
        };
        let ginv = if self.coeffs.keys().any(|e| *e < 0) { Some(g.recip()?) } else { None };
        // Cache powers.
        let mut pow_cache: BTreeMap<i64, TruncSeries<C>> = BTreeMap::new();
        pow_cache.insert(0, TruncSeries::one(g.var));
        let gp = |k: i64, cache: &mut BTreeMap<i64, TruncSeries<C>>| -> Result<TruncSeries<C>, EngineError> {
            if let Some(v) = cache.get(&k) {
                return Ok(v.clone());
            }
            let v = if k > 0 {
                let prev = if let Some(p) = cache.get(&(k - 1)) {
                    p.clone()
                } else {
                    let mut p = TruncSeries::one(g.var);
                    for _ in 0..(k - 1) {
                        p = p.mul(g)?;
                    }
                    p
                };
                prev.mul(g)?
            } else {
                let gi = ginv.as_ref().unwrap();
                let prev = if let Some(p) = cache.get(&(k + 1)) {
                    p.clone()
                } else {
                    let mut p = TruncSeries::one(g.var);
                    for _ in 0..(-k - 1) {
                        p = p.mul(gi)?;
                    }
                    p
                };
                prev.mul(gi)?
            };
            cache.insert(k, v.clone());
            Ok(v)
        };
        for (e, c) in &self.coeffs {
            let term = gp(*e, &mut pow_cache)?.scale(c);
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }

    /// Functional inverse of a near-identity series at ∞:
    /// `self = x·(1 + a₁x⁻¹ + …)` (in variable x), returns g in `out_var`
    /// with self(g(λ)) = λ to the certified depth.
    pub fn revert(&self, out_var: SeriesVar) -> Result<Self, EngineError> {
        self.require_no_log()?;
        if self.support_max() != Some(1) || !self.coeff(1).sub(&C::one()).is_zero() {
            return Err(EngineError::NotNearIdentity);
        }
        let depth = match self.lo {
            Some(l) => (1 - l).max(1),
            None => {
                return Err(EngineError::NotNearIdentity);
            }
        };
        // a(x) = self/x - 1, supported on exponents <= 0 ... -depth+1.
        let a = self.mul_monomial(-1, &C::one()).sub(&TruncSeries::one(self.var))?;
        // g = λ / (1 + a(g)), iterated.
        let lam = TruncSeries::monomial(out_var, 1, C::one());
        let mut g = lam.clone().truncated_below(1 - depth);
        for _ in 0..=depth {
            let a_at_g = a.compose(&g)?;
            let one_plus = TruncSeries::one(out_var).add(&a_at_g)?;
            g = lam.mul(&one_plus.recip()?)?.truncated_below(1 - depth);
        }
        Ok(g)
    }

    /// The formal residue in the stated convention:
    /// at ∞ with measure d(var): −[var⁻¹]; at 0: +[var⁻¹].
    pub fn residue_at(&self, at_infinity: bool) -> Result<C, EngineError> {
        if !self.knows(-1) {
            return Err(EngineError::ResidueUndecidable);
        }
        let c = self.coeff(-1);
        Ok(if at_infinity { c.neg() } else { c })
    }

    /// Equality of every coefficient on the intersection of known regions.
    /// Errors if the intersection is empty.
    pub fn eq_on_common_window(&self, other: &Self) -> Result<bool, EngineError> {
        unify_var(self.var, other.var)?;
        let lo = max_opt(self.lo, other.lo);
        let hi = min_opt(self.hi, other.hi);
        if let (Some(l), Some(h)) = (lo, hi) {
            if l > h {
                return Err(EngineError::EmptyWindow);
            }
        }
        let in_window = |e: i64| lo.map_or(true, |l| e >= l) && hi.map_or(true, |h| e <= h);
        for (e, c) in &self.coeffs {
            if in_window(*e) && !other.coeff(*e).sub(c).is_zero() {
                return Ok(false);
            }
        }
        for (e, c) in &other.coeffs {
            if in_window(*e) && !self.coeff(*e).sub(c).is_zero() {
                return Ok(false);
            }
        }
        let la = self.log_coeff.clone().unwrap_or_else(C::zero);
        let lb = other.log_coeff.clone().unwrap_or_else(C::zero);
        Ok(la.sub(&lb).is_zero())
    }

    pub fn is_zero_on_window(&self) -> bool {
        self.coeffs.is_empty() && self.log_coeff.is_none()
    }
}

impl<C: Coeff> Coeff for TruncSeries<C> {
    fn zero() -> Self {
        TruncSeries::zero(SeriesVar::Any)
    }
    fn one() -> Self {
        TruncSeries::one(SeriesVar::Any)
    }
    fn is_zero(&self) -> bool {
        self.is_known_zero()
    }
    fn add(&self, rhs: &Self) -> Self {
        TruncSeries::add(self, rhs).expect("stacked series add")
    }
    fn sub(&self, rhs: &Self) -> Self {
        TruncSeries::sub(self, rhs).expect("stacked series sub")
    }
    fn mul(&self, rhs: &Self) -> Self {
        TruncSeries::mul(self, rhs).expect("stacked series mul")
    }
    fn neg(&self) -> Self {
        TruncSeries::neg(self)
    }
    fn inv(&self) -> Result<Self, EngineError> {
        self.recip()
    }
    fn mul_ratio(&self, n: i64, d: i64) -> Self {
        self.scale_ratio(n, d)
    }
}

impl<C: Coeff> fmt::Display for TruncSeries<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() && self.log_coeff.is_none() {
            write!(f, "0")?;
        } else {
            let mut first = true;
            for (e, c) in &self.coeffs {
                if !first {
                    write!(f, " + ")?;
                }
                first = false;
                write!(f, "({:?})*{}^{}", c, self.var, e)?;
            }
            if let Some(lc) = &self.log_coeff {
                if !first {
                    write!(f, " + ")?;
                }
                write!(f, "({:?})*log({})", lc, self.var)?;
            }
        }
        match (self.lo, self.hi) {
            (Some(l), Some(h)) => write!(f, "  [known {}..{}]", l, h),
            (Some(l), None) => write!(f, "  [known {}..]", l),
            (None, Some(h)) => write!(f, "  [known ..{}]", h),
            (None, None) => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ParamScalar, RatScalar, Scalar};

    type S = ParamScalar;

    fn z_poly(terms: Vec<(i64, i64)>) -> TruncSeries<S> {
        TruncSeries::from_terms(
            SeriesVar::Z,
            terms.into_iter().map(|(e, c)| (e, S::from_int(c))).collect(),
        )
    }

    #[test]
    fn polynomial_identity() {
        // (1+z)(1-z) = 1 - z^2
        let a = z_poly(vec![(0, 1), (1, 1)]);
        let b = z_poly(vec![(0, 1), (1, -1)]);
        let p = a.mul(&b).unwrap();
        assert_eq!(p.coeff(0), S::from_int(1));
        assert_eq!(p.coeff(1), S::from_int(0));
        assert_eq!(p.coeff(2), S::from_int(-1));
        assert!(p.lo.is_none() && p.hi.is_none());
    }

    #[test]
    fn derivative_of_cube() {
        let f = z_poly(vec![(3, 1)]);
        let d = f.derivative();
        assert_eq!(d.coeff(2), S::from_int(3));
        assert_eq!(d.support_min(), Some(2));
    }

    #[test]
    fn geometric_inverse_at_infinity() {
        // 1/(nu - z) on window [-4,-1]: -z^-1 - nu z^-2 - nu^2 z^-3 - nu^3 z^-4.
        let nu = ParamScalar::nu();
        let f = TruncSeries::from_terms(
            SeriesVar::Z,
            vec![(0, nu.clone()), (1, S::from_int(-1))],
        );
        let inv = f.truncated_below(-4).recip().unwrap();
        assert_eq!(inv.coeff(-1), S::from_int(-1));
        assert_eq!(inv.coeff(-2), nu.neg());
        assert_eq!(inv.coeff(-3), nu.mul(&nu).neg());
        assert_eq!(inv.coeff(-4), nu.mul(&nu).mul(&nu).neg());
        // cross-check by multiplying back
        let back = inv.mul(&f).unwrap();
        assert_eq!(back.coeff(0), S::from_int(1));
        for e in [-1i64, -2, -3].iter() {
            assert!(back.coeff(*e).is_zero(), "residual at {}", e);
        }
    }

    #[test]
    fn exp_taylor() {
        let f = z_poly(vec![(1, 1)]).truncated_above(3);
        let e = f.exp().unwrap();
        assert_eq!(e.coeff(0), S::from_int(1));
        assert_eq!(e.coeff(1), S::from_int(1));
        assert_eq!(e.coeff(2), S::from_ratio(1, 2));
        assert_eq!(e.coeff(3), S::from_ratio(1, 6));
        assert_eq!(e.hi, Some(3));
    }

    #[test]
    fn exp_of_zero_is_one() {
        let f: TruncSeries<S> = TruncSeries::zero(SeriesVar::Z).truncated_above(5);
        let e = f.exp().unwrap();
        assert_eq!(e.coeff(0), S::from_int(1));
        assert!(e.support_max() == Some(0));
    }

    #[test]
    fn log_exp_roundtrip() {
        // log(exp(nu z + z^2)) = nu z + z^2
        let nu = ParamScalar::nu();
        let f = TruncSeries::from_terms(SeriesVar::Z, vec![(1, nu.clone()), (2, S::from_int(1))])
            .truncated_above(6);
        let e = f.exp().unwrap();
        let l = e.log().unwrap();
        assert!(l.eq_on_common_window(&f).unwrap());
    }

    #[test]
    fn exp_rejects_mixed_support() {
        let f = z_poly(vec![(-1, 1), (1, 1)]).truncated_above(3).truncated_below(-3);
        assert!(f.exp().is_err());
    }

    #[test]
    fn integrate_basics() {
        // ∫ x^2 = x^3/3
        let f = TruncSeries::<S>::monomial(SeriesVar::X, 2, S::from_int(1));
        let int = f.integrate();
        assert_eq!(int.coeff(3), S::from_ratio(1, 3));
        // ∫ nu/x = nu log x
        let nu = ParamScalar::nu();
        let g = TruncSeries::monomial(SeriesVar::X, -1, nu.clone());
        let gi = g.integrate();
        assert_eq!(gi.log_coeff, Some(nu.clone()));
        // derivative undoes it, including the log term
        let d = gi.derivative();
        assert!(d.eq_on_common_window(&g).unwrap());
    }

    #[test]
    fn integrate_mirror_antiderivative() {
        // ∫ (1 - nu/x - s/x^2) dx = x - nu log x + s/x
        let nu = ParamScalar::nu();
        let s = ParamScalar::param(crate::scalar::Param::S);
        let f = TruncSeries::from_terms(
            SeriesVar::X,
            vec![(0, S::from_int(1)), (-1, nu.neg()), (-2, s.neg())],
        );
        let int = f.integrate();
        assert_eq!(int.coeff(1), S::from_int(1));
        assert_eq!(int.log_coeff, Some(nu.neg()));
        assert_eq!(int.coeff(-1), s.clone());
    }

    #[test]
    fn residue_conventions() {
        // residue of z^3 -> 0
        let f = TruncSeries::<S>::monomial(SeriesVar::Z, 3, S::from_int(1));
        assert!(f.residue_at(true).unwrap().is_zero());
        // residue of nu/lambda at infinity with d(lambda): -nu
        let nu = ParamScalar::nu();
        let g = TruncSeries::monomial(SeriesVar::Lambda, -1, nu.clone());
        assert_eq!(g.residue_at(true).unwrap(), nu.neg());
        // shallow window cannot decide
        let h = TruncSeries::<S>::monomial(SeriesVar::Z, 2, S::from_int(1)).truncated_below(0);
        assert!(h.residue_at(true).is_err());
    }

    #[test]
    fn revert_identity_and_shift() {
        // revert(λ = x) -> x = λ
        let f = TruncSeries::<S>::monomial(SeriesVar::X, 1, S::from_int(1)).truncated_below(-4);
        let g = f.revert(SeriesVar::Lambda).unwrap();
        assert_eq!(g.coeff(1), S::from_int(1));
        assert!(g.terms().filter(|(e, _)| **e != 1).count() == 0);
        // revert(λ = x + a) -> x = λ - a
        let a = ParamScalar::param(crate::scalar::Param::T);
        let f2 = TruncSeries::from_terms(SeriesVar::X, vec![(1, S::from_int(1)), (0, a.clone())])
            .truncated_below(-4);
        let g2 = f2.revert(SeriesVar::Lambda).unwrap();
        assert_eq!(g2.coeff(1), S::from_int(1));
        assert_eq!(g2.coeff(0), a.neg());
    }

    #[test]
    fn revert_back_substitution() {
        // A nontrivial near-identity map: f(x) = x + t + nu/x + s/x^2.
        let nu = ParamScalar::nu();
        let t = ParamScalar::param(crate::scalar::Param::T);
        let s = ParamScalar::param(crate::scalar::Param::S);
        let f = TruncSeries::from_terms(
            SeriesVar::X,
            vec![(1, S::from_int(1)), (0, t), (-1, nu), (-2, s)],
        )
        .truncated_below(-5);
        let g = f.revert(SeriesVar::Lambda).unwrap();
        let back = f.compose(&g).unwrap();
        let lam = TruncSeries::<S>::monomial(SeriesVar::Lambda, 1, S::from_int(1));
        assert!(back.eq_on_common_window(&lam).unwrap());
    }

    #[test]
    fn window_intersection_on_add() {
        let a = z_poly(vec![(0, 1)]).truncated_below(-3);
        let b = z_poly(vec![(1, 1)]).truncated_below(-5);
        let sum = a.add(&b).unwrap();
        assert_eq!(sum.lo, Some(-3));
    }

    #[test]
    fn truncation_stability_mul() {
        let nu = ParamScalar::nu();
        let f = TruncSeries::from_terms(SeriesVar::Z, vec![(0, nu.clone()), (1, S::from_int(-1))]);
        let shallow = f.truncated_below(-3).recip().unwrap();
        let deep = f.truncated_below(-7).recip().unwrap();
        assert!(shallow.eq_on_common_window(&deep).unwrap());
    }

    #[test]
    fn rational_point_mode_matches_symbolic() {
        use crate::scalar::Assignment;
        let a = Assignment::random(11, 2);
        let nu_sym = ParamScalar::nu();
        let f_sym = TruncSeries::from_terms(
            SeriesVar::Z,
            vec![(0, nu_sym.clone()), (1, ParamScalar::from_int(-1))],
        )
        .truncated_below(-6)
        .recip()
        .unwrap();
        let f_pt: TruncSeries<RatScalar> = {
            let nu_pt = RatScalar(
                a.values[0].clone() - a.values[1].clone(),
            );
            TruncSeries::from_terms(
                SeriesVar::Z,
                vec![(0, nu_pt), (1, RatScalar::from_int(-1))],
            )
            .truncated_below(-6)
            .recip()
            .unwrap()
        };
        for e in -6..=-1 {
            let sym_val = f_sym.coeff(e).eval(&a).unwrap();
            assert_eq!(RatScalar(sym_val), f_pt.coeff(e));
        }
    }
}
