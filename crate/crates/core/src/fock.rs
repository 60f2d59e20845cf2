//! Truncated Fock-space elements and quantized operators.
//!
//! An asymptotical function exp(Σ_g ε^{2g−2}F_g) is stored through its
//! logarithm: a polynomial in the Darboux variables q_{k,i} (or the 2-Toda
//! times y_k, ȳ_k) whose monomials carry an explicit ε-power and a structural
//! Novikov weight tag. Operator application is exact log-surgery:
//! a derivative exponential e^{f̂₊} translates the argument by ε·(shift),
//! a multiplication exponential e^{f̂₋} adds a linear form with a 1/ε to the
//! log, and quadratic operators act through the product rule on a
//! (prefactor)·e^log pair.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::loop_space::LoopVector;
use crate::scalar::{Coeff, ParamEnv, Scalar};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum Sector {
    Zero,
    Inf,
}

impl Sector {
    pub fn other(self) -> Sector {
        match self {
            Sector::Zero => Sector::Inf,
            Sector::Inf => Sector::Zero,
        }
    }
}

/// Which family of formal variables a symbol belongs to.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum VarKind {
    /// Darboux coordinates q_{k,i}.
    Q,
    /// 2-Toda times y_k (sector 0) and ȳ_k (sector ∞).
    Y,
}

/// Tensor-factor / bilinear-change tag on a variable.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum VarCopy {
    Plain,
    Left,
    Right,
    Center,
    Offset,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Var {
    pub kind: VarKind,
    pub copy: VarCopy,
    pub sector: Sector,
    pub level: u16,
}

impl Var {
    pub fn q(level: u16, sector: Sector) -> Var {
        Var { kind: VarKind::Q, copy: VarCopy::Plain, sector, level }
    }

    pub fn y(level: u16, sector: Sector) -> Var {
        Var { kind: VarKind::Y, copy: VarCopy::Plain, sector, level }
    }

    pub fn with_copy(mut self, copy: VarCopy) -> Var {
        self.copy = copy;
        self
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.kind {
            VarKind::Q => "q",
            VarKind::Y => "y",
        };
        let sec = match self.sector {
            Sector::Zero => "0",
            Sector::Inf => "inf",
        };
        let copy = match self.copy {
            VarCopy::Plain => "",
            VarCopy::Left => "'",
            VarCopy::Right => "''",
            VarCopy::Center => "~",
            VarCopy::Offset => "!",
        };
        write!(f, "{}{}[{},{}]", base, copy, self.level, sec)
    }
}

/// Monomial: an ε-power, a doubled structural Novikov weight, and variable
/// powers sorted by variable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Mono {
    pub eps: i32,
    pub qw2: i32,
    pub vars: Vec<(Var, u32)>,
}

impl Mono {
    pub fn unit() -> Mono {
        Mono { eps: 0, qw2: 0, vars: vec![] }
    }

    pub fn eps_pow(e: i32) -> Mono {
        Mono { eps: e, qw2: 0, vars: vec![] }
    }

    pub fn var(v: Var) -> Mono {
        Mono { eps: 0, qw2: 0, vars: vec![(v, 1)] }
    }

    pub fn degree(&self) -> u32 {
        self.vars.iter().map(|(_, p)| *p).sum()
    }

    pub fn max_level(&self) -> u16 {
        self.vars.iter().map(|(v, _)| v.level).max().unwrap_or(0)
    }

    /// Sum of level·multiplicity over the variable factors.
    pub fn level_weight(&self) -> u64 {
        self.vars.iter().map(|(v, p)| v.level as u64 * *p as u64).sum()
    }

    pub fn power_of(&self, v: &Var) -> u32 {
        self.vars
            .iter()
            .find(|(w, _)| w == v)
            .map(|(_, p)| *p)
            .unwrap_or(0)
    }

    pub fn mul(&self, o: &Mono) -> Mono {
        let mut vars = self.vars.clone();
        for (v, p) in &o.vars {
            match vars.binary_search_by(|(w, _)| w.cmp(v)) {
                Ok(i) => vars[i].1 += p,
                Err(i) => vars.insert(i, (*v, *p)),
            }
        }
        Mono { eps: self.eps + o.eps, qw2: self.qw2 + o.qw2, vars }
    }

    fn without_var(&self, idx: usize) -> Mono {
        let mut vars = self.vars.clone();
        vars.remove(idx);
        Mono { eps: self.eps, qw2: self.qw2, vars }
    }
}

/// Truncation data for Fock elements and everything derived from them.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Cuts {
    /// Lowest retained ε-power (−2·genus_cut for asymptotic inputs).
    pub eps_lo: i32,
    /// Highest retained ε-power.
    pub eps_hi: i32,
    /// Total polynomial degree bound in the formal variables.
    pub q_degree: u32,
    /// Highest retained variable level k.
    pub level: u16,
    /// Structural Novikov-weight bound (whole Q-powers).
    pub novikov: u32,
}

impl Cuts {
    pub fn for_genus(genus_cut: u32, q_degree: u32, level: u16, novikov: u32) -> Cuts {
        Cuts {
            eps_lo: -2 * genus_cut as i32 - 2,
            eps_hi: 2 * genus_cut as i32,
            q_degree,
            level,
            novikov,
        }
    }

    pub fn admits(&self, m: &Mono) -> bool {
        m.eps >= self.eps_lo
            && m.eps <= self.eps_hi
            && m.degree() <= self.q_degree
            && m.max_level() <= self.level
            && m.qw2 <= 2 * self.novikov as i32
    }

    /// A strictly deeper set of cuts (for truncation-stability tests).
    pub fn deepened(&self) -> Cuts {
        Cuts {
            eps_lo: self.eps_lo - 2,
            eps_hi: self.eps_hi + 2,
            q_degree: self.q_degree + 1,
            level: self.level + 1,
            novikov: self.novikov + 1,
        }
    }
}

/// Sparse polynomial in the formal variables with ε-powers, over any
/// coefficient ring (scalars, λ-series, or locus rationals).
#[derive(Clone, PartialEq, Debug)]
pub struct FockPoly<C: Coeff> {
    pub terms: BTreeMap<Mono, C>,
}

impl<C: Coeff> FockPoly<C> {
    pub fn zero() -> Self {
        FockPoly { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        FockPoly::constant(C::one())
    }

    pub fn constant(c: C) -> Self {
        let mut p = FockPoly::zero();
        p.insert(Mono::unit(), c);
        p
    }

    pub fn monomial(m: Mono, c: C) -> Self {
        let mut p = FockPoly::zero();
        p.insert(m, c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn insert(&mut self, m: Mono, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().add(&c);
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn coeff(&self, m: &Mono) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::zero)
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.insert(m.clone(), c.clone());
        }
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        FockPoly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c.neg())).collect() }
    }

    pub fn scale(&self, k: &C) -> Self {
        if k.is_zero() {
            return FockPoly::zero();
        }
        let mut r = FockPoly::zero();
        for (m, c) in &self.terms {
            r.insert(m.clone(), c.mul(k));
        }
        r
    }

    pub fn scale_ratio(&self, n: i64, d: i64) -> Self {
        let mut r = FockPoly::zero();
        for (m, c) in &self.terms {
            r.insert(m.clone(), c.mul_ratio(n, d));
        }
        r
    }

    pub fn mul(&self, o: &Self, cuts: &Cuts) -> Self {
        let mut r = FockPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                let m = ma.mul(mb);
                if cuts.admits(&m) {
                    r.insert(m, ca.mul(cb));
                }
            }
        }
        r
    }

    pub fn mul_mono(&self, m: &Mono, c: &C) -> Self {
        let mut r = FockPoly::zero();
        for (ma, ca) in &self.terms {
            r.insert(ma.mul(m), ca.mul(c));
        }
        r
    }

    pub fn truncate(&self, cuts: &Cuts) -> Self {
        FockPoly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| cuts.admits(m))
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// ∂/∂(var).
    pub fn derivative(&self, v: &Var) -> Self {
        let mut r = FockPoly::zero();
        for (m, c) in &self.terms {
            if let Some(idx) = m.vars.iter().position(|(w, _)| w == v) {
                let p = m.vars[idx].1;
                let mut m2 = m.clone();
                if p == 1 {
                    m2 = m.without_var(idx);
                } else {
                    m2.vars[idx].1 -= 1;
                }
                r.insert(m2, c.mul_ratio(p as i64, 1));
            }
        }
        r
    }

    /// Substitute var ↦ replacement (a polynomial), expanding powers.
    pub fn substitute_var(&self, v: &Var, replacement: &FockPoly<C>, cuts: &Cuts) -> Self {
        let mut r = FockPoly::zero();
        // Cache powers of the replacement.
        let mut powers: Vec<FockPoly<C>> = vec![FockPoly::one()];
        for (m, c) in &self.terms {
            if let Some(idx) = m.vars.iter().position(|(w, _)| w == v) {
                let p = m.vars[idx].1 as usize;
                while powers.len() <= p {
                    let next = powers.last().unwrap().mul(replacement, cuts);
                    powers.push(next);
                }
                let rest = m.without_var(idx);
                for (mr, cr) in &powers[p].terms {
                    let m2 = rest.mul(mr);
                    if cuts.admits(&m2) {
                        r.insert(m2, c.mul(cr));
                    }
                }
            } else {
                r.insert(m.clone(), c.clone());
            }
        }
        r
    }

    /// All variables occurring.
    pub fn variables(&self) -> Vec<Var> {
        let mut vs: Vec<Var> = Vec::new();
        for m in self.terms.keys() {
            for (v, _) in &m.vars {
                if !vs.contains(v) {
                    vs.push(*v);
                }
            }
        }
        vs.sort();
        vs
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> FockPoly<D> {
        let mut r = FockPoly::zero();
        for (m, c) in &self.terms {
            r.insert(m.clone(), f(c));
        }
        r
    }

    /// exp of a polynomial all of whose terms are truncation-nilpotent under
    /// the cuts (each power eventually leaves the window).
    pub fn exp(&self, cuts: &Cuts) -> Result<Self, EngineError> {
        for m in self.terms.keys() {
            if m.eps == 0 && m.qw2 == 0 && m.vars.is_empty() {
                return Err(EngineError::NonpositiveFiltration(
                    "exp of a Fock polynomial with a pure constant term".into(),
                ));
            }
        }
        let mut acc = FockPoly::one();
        let mut power = FockPoly::one();
        let mut k: i64 = 0;
        // The filtration bound: every term raises degree, |eps|, or Novikov
        // weight, so the expansion stalls after finitely many steps.
        let kmax = (cuts.q_degree as i64 + 1)
            * ((cuts.eps_hi - cuts.eps_lo).unsigned_abs() as i64 + 2)
            * (cuts.novikov as i64 + 2);
        loop {
            k += 1;
            power = power.mul(self, cuts).scale_ratio(1, k);
            if power.is_zero() {
                break;
            }
            if k > kmax {
                return Err(EngineError::CutOverflow(format!(
                    "exp did not stabilize after {} steps (filtration not positive)",
                    kmax
                )));
            }
            acc = acc.add(&power);
        }
        Ok(acc)
    }
}

// ---------------------------------------------------------------------------
// Fock elements.
// ---------------------------------------------------------------------------

/// A truncated asymptotic function exp(Σ_j ε^j L_j) with polynomial L_j.
#[derive(Clone, PartialEq, Debug)]
pub struct FockElement<S: Scalar> {
    pub cuts: Cuts,
    pub log: FockPoly<S>,
}

impl<S: Scalar> FockElement<S> {
    pub fn one(cuts: Cuts) -> Self {
        FockElement { cuts, log: FockPoly::zero() }
    }

    /// Build from per-genus data F_g (ε-free polynomials).
    pub fn from_genus_data(cuts: Cuts, data: Vec<(u32, FockPoly<S>)>) -> Self {
        let mut log = FockPoly::zero();
        for (g, fg) in data {
            let eps = Mono::eps_pow(2 * g as i32 - 2);
            log = log.add(&fg.mul_mono(&eps, &S::one()));
        }
        FockElement { cuts, log: log.truncate(&cuts) }
    }

    pub fn scale_log(&self, k: &S) -> Self {
        FockElement { cuts: self.cuts, log: self.log.scale(k) }
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T) -> FockElement<T> {
        FockElement { cuts: self.cuts, log: self.log.map_coeffs(&f) }
    }
}

// ---------------------------------------------------------------------------
// Linear quantization.
// ---------------------------------------------------------------------------

/// The quantization of a linear Hamiltonian Ω(·, f):
/// f̂ = Σ (q-coords of f)·ε∂_{k,i} − Σ (p-coords of f)·q_{k,i}/ε.
#[derive(Clone, Debug)]
pub struct LinearHamOp<C: Coeff> {
    /// Coefficients of ε∂/∂q_{k,i}.
    pub deriv: Vec<(Var, C)>,
    /// Coefficients of q_{k,i}/ε (sign already folded in).
    pub mult: Vec<(Var, C)>,
}

impl<C: Coeff> LinearHamOp<C> {
    pub fn zero() -> Self {
        LinearHamOp { deriv: vec![], mult: vec![] }
    }

    pub fn neg(&self) -> Self {
        LinearHamOp {
            deriv: self.deriv.iter().map(|(v, c)| (*v, c.neg())).collect(),
            mult: self.mult.iter().map(|(v, c)| (*v, c.neg())).collect(),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut deriv = self.deriv.clone();
        for (v, c) in &o.deriv {
            if let Some((_, c0)) = deriv.iter_mut().find(|(w, _)| w == v) {
                *c0 = c0.add(c);
            } else {
                deriv.push((*v, c.clone()));
            }
        }
        let mut mult = self.mult.clone();
        for (v, c) in &o.mult {
            if let Some((_, c0)) = mult.iter_mut().find(|(w, _)| w == v) {
                *c0 = c0.add(c);
            } else {
                mult.push((*v, c.clone()));
            }
        }
        LinearHamOp { deriv, mult }
    }

    /// The multiplication part as a polynomial Σ c_v·q_v·ε^{-1}.
    pub fn mult_poly(&self) -> FockPoly<C> {
        let mut p = FockPoly::zero();
        for (v, c) in &self.mult {
            let mut m = Mono::var(*v);
            m.eps = -1;
            p.insert(m, c.clone());
        }
        p
    }
}

/// Quantize a windowed loop vector in the stated Darboux rules, producing an
/// operator on functions of the `copy`-tagged q-variables.
pub fn quantize_linear<S: Scalar>(
    f: &LoopVector<S>,
    copy: VarCopy,
    env: &ParamEnv<S>,
) -> Result<LinearHamOp<S>, EngineError> {
    let nu_inv = env.nu.inv()?;
    let mut op = LinearHamOp::zero();
    let mut handle = |series: &crate::series::TruncSeries<S>, sector: Sector| {
        for (e, c) in series.terms() {
            if *e >= 0 {
                // q-direction: φ_i z^k ↦ ε ∂_{k,i}
                let v = Var::q(*e as u16, sector).with_copy(copy);
                op.deriv.push((v, c.clone()));
            } else {
                // p-direction: φ^i (−z)^{−1−k} ↦ q_{k,i}/ε, with the stored
                // z-power carrying (−1)^{k+1} and the dual-basis conversion
                // φ⁰ = νφ₀, φ^∞ = −νφ∞.
                let k = (-1 - e) as u16;
                let sign = if k % 2 == 1 { 1 } else { -1 };
                let dual = match sector {
                    Sector::Zero => c.mul(&nu_inv),
                    Sector::Inf => c.mul(&nu_inv).neg(),
                };
                let p_coord = dual.mul_int(sign);
                let v = Var::q(k, sector).with_copy(copy);
                // f̂ = ... − p_coord · q/ε
                op.mult.push((v, p_coord.neg()));
            }
        }
    };
    handle(&f.c0, Sector::Zero);
    handle(&f.cinf, Sector::Inf);
    Ok(op)
}

/// prefactor·e^{log}: the shape produced by operators acting on a Fock
/// element.
#[derive(Clone, PartialEq, Debug)]
pub struct FockState<C: Coeff> {
    pub cuts: Cuts,
    pub log: FockPoly<C>,
    pub pre: FockPoly<C>,
}

impl<C: Coeff> FockState<C> {
    pub fn from_log(cuts: Cuts, log: FockPoly<C>) -> Self {
        FockState { cuts, log, pre: FockPoly::one() }
    }

    /// Apply the first-order operator f̂ once (not its exponential).
    pub fn apply_linear(&self, op: &LinearHamOp<C>) -> Self {
        // f̂(P e^L) = e^L [ Σ qf ε (∂P + P ∂L) + mult_poly · P ]
        let mut new_pre = self.pre.mul(&op.mult_poly(), &self.cuts);
        for (v, c) in &op.deriv {
            let dp = self.pre.derivative(v);
            let dl = self.log.derivative(v);
            let term = dp.add(&self.pre.mul(&dl, &self.cuts));
            let eps = Mono::eps_pow(1);
            new_pre = new_pre.add(&term.mul_mono(&eps, c));
        }
        FockState { cuts: self.cuts, log: self.log.clone(), pre: new_pre.truncate(&self.cuts) }
    }

    /// Apply the normal-ordered vertex exponential e^{f̂₋}e^{f̂₊}:
    /// translate the argument by ε·(deriv coefficients), then add the
    /// multiplication linear form to the log.
    pub fn apply_vertex(&self, op: &LinearHamOp<C>) -> Self {
        let mut log = self.log.clone();
        let mut pre = self.pre.clone();
        for (v, c) in &op.deriv {
            if c.is_zero() {
                continue;
            }
            // q_v ↦ q_v + ε c
            let mut repl = FockPoly::monomial(Mono::var(*v), C::one());
            repl.insert(Mono::eps_pow(1), c.clone());
            log = log.substitute_var(v, &repl, &self.cuts);
            pre = pre.substitute_var(v, &repl, &self.cuts);
        }
        log = log.add(&op.mult_poly());
        FockState { cuts: self.cuts, log: log.truncate(&self.cuts), pre }
    }

    /// Expand into a single polynomial (prefactor × exp of the log) — valid
    /// only when the log has no blocked constant/ε-negative background.
    pub fn expand(&self) -> Result<FockPoly<C>, EngineError> {
        Ok(self.pre.mul(&self.log.exp(&self.cuts)?, &self.cuts))
    }
}

// ---------------------------------------------------------------------------
// Quadratic quantization (used as a low-order cross-check only).
// ---------------------------------------------------------------------------

/// Second-order operator assembled from the rules
/// (qq)^ = qq/ε², (qp)^ = q∂, (pp)^ = ε²∂².
#[derive(Clone, Debug)]
pub struct QuadHamOp<S: Scalar> {
    pub qq: Vec<(Var, Var, S)>,
    pub qp: Vec<(Var, Var, S)>,
    pub pp: Vec<(Var, Var, S)>,
}

/// Basis vectors of the loop space used to expand quadratic Hamiltonians.
fn basis_vector<S: Scalar>(is_q: bool, k: u16, sector: Sector, env: &ParamEnv<S>) -> LoopVector<S> {
    use crate::loop_space::CohClass;
    if is_q {
        let class = match sector {
            Sector::Zero => CohClass::phi0(),
            Sector::Inf => CohClass::phi_inf(),
        };
        LoopVector::monomial(k as i64, &class)
    } else {
        // φ^i (−z)^{−1−k} = (−1)^{k+1} φ^i z^{−1−k}
        let class = match sector {
            Sector::Zero => CohClass::phi0_dual(env),
            Sector::Inf => CohClass::phi_inf_dual(env),
        };
        let sign = if k % 2 == 1 { 1 } else { -1 };
        LoopVector::monomial(-1 - k as i64, &class).scale(&S::from_int(sign))
    }
}

impl<S: Scalar> QuadHamOp<S> {
    /// Build exp-ready data from the infinitesimal loop-group element A(z)
    /// (a 2×2 matrix of z-series in the fixed-point basis) acting on vectors,
    /// through the Hamiltonian Ω(Af, f)/2. The element must be infinitesimal
    /// symplectic: Ω(Af, g) + Ω(f, Ag) = 0, verified here on the basis block.
    pub fn from_infinitesimal(
        a: &MatrixSeries<S>,
        copy: VarCopy,
        level: u16,
        env: &ParamEnv<S>,
    ) -> Result<Self, EngineError> {
        // verify infinitesimal symplectic on the retained block
        let mut basis: Vec<(bool, u16, Sector)> = Vec::new();
        for k in 0..=level {
            for sec in [Sector::Zero, Sector::Inf] {
                basis.push((true, k, sec));
                basis.push((false, k, sec));
            }
        }
        for (qu, ku, su) in &basis {
            for (qv, kv, sv) in &basis {
                let eu = basis_vector(*qu, *ku, *su, env);
                let ev = basis_vector(*qv, *kv, *sv, env);
                let aeu = a.apply(&eu)?;
                let aev = a.apply(&ev)?;
                let lhs = aeu.symplectic_form(&ev, env);
                let rhs = eu.symplectic_form(&aev, env);
                if let (Ok(l), Ok(r)) = (lhs, rhs) {
                    if !l.add(&r).is_zero() {
                        return Err(EngineError::NotTriangular(
                            "source is not infinitesimal symplectic".into(),
                        ));
                    }
                }
            }
        }
        // assemble the classical Hamiltonian h(f) = Ω(Af, f)/2 coefficients
        let mut qq: BTreeMap<(Var, Var), S> = BTreeMap::new();
        let mut qp: BTreeMap<(Var, Var), S> = BTreeMap::new();
        let mut pp: BTreeMap<(Var, Var), S> = BTreeMap::new();
        for (qu, ku, su) in &basis {
            for (qv, kv, sv) in &basis {
                let eu = basis_vector(*qu, *ku, *su, env);
                let ev = basis_vector(*qv, *kv, *sv, env);
                let aeu = a.apply(&eu)?;
                let val = match aeu.symplectic_form(&ev, env) {
                    Ok(v) => v,
                    Err(_) => continue,
                };
                if val.is_zero() {
                    continue;
                }
                let half = val.mul_ratio(1, 2);
                let vu = Var::q(*ku, *su).with_copy(copy);
                let vv = Var::q(*kv, *sv).with_copy(copy);
                match (*qu, *qv) {
                    (true, true) => {
                        let key = if vu <= vv { (vu, vv) } else { (vv, vu) };
                        let e = qq.entry(key).or_insert_with(S::zero);
                        *e = e.add(&half);
                    }
                    (true, false) => {
                        let e = qp.entry((vu, vv)).or_insert_with(S::zero);
                        *e = e.add(&half);
                    }
                    (false, true) => {
                        let e = qp.entry((vv, vu)).or_insert_with(S::zero);
                        *e = e.add(&half);
                    }
                    (false, false) => {
                        let key = if vu <= vv { (vu, vv) } else { (vv, vu) };
                        let e = pp.entry(key).or_insert_with(S::zero);
                        *e = e.add(&half);
                    }
                }
            }
        }
        Ok(QuadHamOp {
            qq: qq.into_iter().filter(|(_, c)| !c.is_zero()).map(|((a, b), c)| (a, b, c)).collect(),
            qp: qp.into_iter().filter(|(_, c)| !c.is_zero()).map(|((a, b), c)| (a, b, c)).collect(),
            pp: pp.into_iter().filter(|(_, c)| !c.is_zero()).map(|((a, b), c)| (a, b, c)).collect(),
        })
    }

    /// One application of the quantized operator to P·e^L (L fixed).
    fn apply_once(&self, state: &FockState<S>) -> FockPoly<S> {
        let cuts = &state.cuts;
        let p = &state.pre;
        let l = &state.log;
        let mut out = FockPoly::zero();
        for (u, v, c) in &self.qq {
            // q_u q_v /ε² · P
            let mut m = Mono::var(*u).mul(&Mono::var(*v));
            m.eps = -2;
            out = out.add(&p.mul_mono(&m, c));
        }
        for (u, v, c) in &self.qp {
            // q_u ∂_v (P e^L) / e^L = q_u (∂_v P + P ∂_v L)
            let dv = p.derivative(v).add(&p.mul(&l.derivative(v), cuts));
            out = out.add(&dv.mul_mono(&Mono::var(*u), c));
        }
        for (u, v, c) in &self.pp {
            // ε² ∂_u ∂_v (P e^L)/e^L
            let dv = p.derivative(v).add(&p.mul(&l.derivative(v), cuts));
            let duv = dv.derivative(u).add(&dv.mul(&l.derivative(u), cuts));
            // symmetric pair appears once in the table for u≠v: account twice
            let factor = if u == v { 1 } else { 2 };
            let mut m = Mono::unit();
            m.eps = 2;
            out = out.add(&duv.mul_mono(&m, &c.mul_int(factor)));
        }
        out.truncate(cuts)
    }

    /// exp(Â) applied to the state, expanded to the stated order.
    pub fn apply_exp(&self, state: &FockState<S>, order: u32) -> FockState<S> {
        let mut acc = state.pre.clone();
        let mut cur = state.clone();
        let mut factorial: i64 = 1;
        for k in 1..=order {
            let next = self.apply_once(&cur);
            factorial *= k as i64;
            acc = acc.add(&next.scale_ratio(1, factorial));
            cur = FockState { cuts: state.cuts, log: state.log.clone(), pre: next };
        }
        FockState { cuts: state.cuts, log: state.log.clone(), pre: acc.truncate(&state.cuts) }
    }
}

/// 2×2 matrix of z-series in the fixed-point basis.
#[derive(Clone, PartialEq, Debug)]
pub struct MatrixSeries<S: Scalar> {
    pub a00: crate::series::TruncSeries<S>,
    pub a0i: crate::series::TruncSeries<S>,
    pub ai0: crate::series::TruncSeries<S>,
    pub aii: crate::series::TruncSeries<S>,
}

impl<S: Scalar> MatrixSeries<S> {
    pub fn identity() -> Self {
        use crate::series::{SeriesVar, TruncSeries};
        MatrixSeries {
            a00: TruncSeries::one(SeriesVar::Z),
            a0i: TruncSeries::zero(SeriesVar::Z),
            ai0: TruncSeries::zero(SeriesVar::Z),
            aii: TruncSeries::one(SeriesVar::Z),
        }
    }

    pub fn apply(&self, v: &LoopVector<S>) -> Result<LoopVector<S>, EngineError> {
        Ok(LoopVector {
            c0: self.a00.mul(&v.c0)?.add(&self.a0i.mul(&v.cinf)?)?,
            cinf: self.ai0.mul(&v.c0)?.add(&self.aii.mul(&v.cinf)?)?,
        })
    }

    pub fn add(&self, o: &Self) -> Result<Self, EngineError> {
        Ok(MatrixSeries {
            a00: self.a00.add(&o.a00)?,
            a0i: self.a0i.add(&o.a0i)?,
            ai0: self.ai0.add(&o.ai0)?,
            aii: self.aii.add(&o.aii)?,
        })
    }

    pub fn sub(&self, o: &Self) -> Result<Self, EngineError> {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        MatrixSeries {
            a00: self.a00.neg(),
            a0i: self.a0i.neg(),
            ai0: self.ai0.neg(),
            aii: self.aii.neg(),
        }
    }

    pub fn mul(&self, o: &Self) -> Result<Self, EngineError> {
        Ok(MatrixSeries {
            a00: self.a00.mul(&o.a00)?.add(&self.a0i.mul(&o.ai0)?)?,
            a0i: self.a00.mul(&o.a0i)?.add(&self.a0i.mul(&o.aii)?)?,
            ai0: self.ai0.mul(&o.a00)?.add(&self.aii.mul(&o.ai0)?)?,
            aii: self.ai0.mul(&o.a0i)?.add(&self.aii.mul(&o.aii)?)?,
        })
    }

    pub fn scale(&self, k: &S) -> Self {
        MatrixSeries {
            a00: self.a00.scale(k),
            a0i: self.a0i.scale(k),
            ai0: self.ai0.scale(k),
            aii: self.aii.scale(k),
        }
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T) -> MatrixSeries<T> {
        MatrixSeries {
            a00: self.a00.map(&f),
            a0i: self.a0i.map(&f),
            ai0: self.ai0.map(&f),
            aii: self.aii.map(&f),
        }
    }

    /// Transpose with respect to the Poincaré pairing G = diag(1/ν, −1/ν):
    /// M* = G⁻¹ Mᵀ G.
    pub fn pairing_transpose(&self) -> Self {
        MatrixSeries {
            a00: self.a00.clone(),
            a0i: self.ai0.neg(),
            ai0: self.a0i.neg(),
            aii: self.aii.clone(),
        }
    }

    /// M(−z): flip signs of odd z-powers.
    pub fn flip_z(&self) -> Self {
        let flip = |s: &crate::series::TruncSeries<S>| {
            let mut out = s.clone();
            let terms: Vec<(i64, S)> = s.terms().map(|(e, c)| (*e, c.clone())).collect();
            for (e, c) in terms {
                if e.rem_euclid(2) == 1 {
                    out.set_coeff(e, c.neg());
                }
            }
            out
        };
        MatrixSeries {
            a00: flip(&self.a00),
            a0i: flip(&self.a0i),
            ai0: flip(&self.ai0),
            aii: flip(&self.aii),
        }
    }

    /// Is every entry supported on strictly negative z-powers below `head`?
    pub fn is_lower_triangular_tail(&self) -> bool {
        [&self.a00, &self.a0i, &self.ai0, &self.aii]
            .iter()
            .all(|s| s.support_max().map_or(true, |m| m <= -1))
    }
}

// ---------------------------------------------------------------------------
// Tameness and the dilaton shift.
// ---------------------------------------------------------------------------

/// t(z) = q(z) + z: the t-picture coefficient data of a log-polynomial in
/// q-variables, obtained by the exact substitution q_{1,i} = t_{1,i} − 1.
pub fn to_t_picture<S: Scalar>(log: &FockPoly<S>, cuts: &Cuts) -> FockPoly<S> {
    let mut out = log.clone();
    for sector in [Sector::Zero, Sector::Inf] {
        let v = Var::q(1, sector);
        let mut repl = FockPoly::monomial(Mono::var(v), S::one());
        repl.insert(Mono::unit(), S::from_int(-1));
        out = out.substitute_var(&v, &repl, cuts);
    }
    out
}

/// Inverse of [`to_t_picture`].
pub fn from_t_picture<S: Scalar>(log: &FockPoly<S>, cuts: &Cuts) -> FockPoly<S> {
    let mut out = log.clone();
    for sector in [Sector::Zero, Sector::Inf] {
        let v = Var::q(1, sector);
        let mut repl = FockPoly::monomial(Mono::var(v), S::one());
        repl.insert(Mono::unit(), S::one());
        out = out.substitute_var(&v, &repl, cuts);
    }
    out
}

/// Tameness: in the t-picture, every coefficient with k₁+…+k_r > 3g−3+r
/// (r counted with multiplicity) vanishes.
pub fn is_tame<S: Scalar>(t: &FockElement<S>) -> bool {
    let tlog = to_t_picture(&t.log, &t.cuts);
    for (m, c) in &tlog.terms {
        if c.is_zero() {
            continue;
        }
        // ε^{2g−2}: skip non-asymptotic powers (they cannot certify either way;
        // treat them as violations of the asymptotic shape).
        let e = m.eps;
        if e < -2 || (e + 2) % 2 != 0 {
            return false;
        }
        let g = ((e + 2) / 2) as i64;
        let r = m.degree() as i64;
        if r == 0 {
            continue;
        }
        let ksum = m.level_weight() as i64;
        if ksum > 3 * g - 3 + r {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loop_space::CohClass;
    use crate::scalar::{Assignment, ParamEnv, RatScalar};
    use crate::series::{SeriesVar, TruncSeries};
    use rand::{Rng, SeedableRng};

    type P = RatScalar;

    fn cuts() -> Cuts {
        Cuts { eps_lo: -4, eps_hi: 4, q_degree: 4, level: 3, novikov: 4 }
    }

    fn env() -> ParamEnv<P> {
        ParamEnv::at(&Assignment::random(5, 0))
    }

    fn random_loop_vector(rng: &mut impl Rng, lo: i64, hi: i64) -> LoopVector<P> {
        let mut v = LoopVector::zero();
        for e in lo..=hi {
            let c = CohClass::new(
                P::from_int(rng.gen_range(-5i64..=5)),
                P::from_int(rng.gen_range(-5i64..=5)),
            );
            v = v.add(&LoopVector::monomial(e, &c)).unwrap();
        }
        v
    }

    fn random_state(rng: &mut impl Rng) -> FockState<P> {
        let mut log = FockPoly::zero();
        for _ in 0..4 {
            let g = rng.gen_range(0u32..=1);
            let k = rng.gen_range(0u16..=2);
            let sector = if rng.gen_bool(0.5) { Sector::Zero } else { Sector::Inf };
            let mut m = Mono::var(Var::q(k, sector));
            m.eps = 2 * g as i32 - 2;
            log.insert(m, P::from_int(rng.gen_range(-3i64..=3)));
        }
        FockState::from_log(cuts(), log)
    }

    #[test]
    fn quantize_examples() {
        // quantize φ₀ (z⁰): ε ∂_{0,0}
        let e = env();
        let f = LoopVector::<P>::monomial(0, &CohClass::phi0());
        let op = quantize_linear(&f, VarCopy::Plain, &e).unwrap();
        assert_eq!(op.deriv.len(), 1);
        assert!(op.mult.is_empty());
        assert_eq!(op.deriv[0].0, Var::q(0, Sector::Zero));
        assert!(op.deriv[0].1.is_one());
        // quantize −(−z)^{−n−1}φ⁰ = q_{n,0}/ε, n = 2:
        // stored z-power: −(−1)^{n+1} ν φ₀ z^{-3} with n=2 → sign −(−1)^3 = +1.
        let n = 2u16;
        let sign = if (n + 1) % 2 == 0 { 1 } else { -1 };
        let class = CohClass::phi0_dual(&e).scale(&P::from_int(-sign));
        let f2 = LoopVector::monomial(-1 - n as i64, &class);
        let op2 = quantize_linear(&f2, VarCopy::Plain, &e).unwrap();
        assert!(op2.deriv.is_empty());
        assert_eq!(op2.mult.len(), 1);
        assert_eq!(op2.mult[0].0, Var::q(n, Sector::Zero));
        assert!(op2.mult[0].1.is_one(), "got {:?}", op2.mult[0].1);
        // quantize 0 → zero operator
        let op3 = quantize_linear(&LoopVector::<P>::zero(), VarCopy::Plain, &e).unwrap();
        assert!(op3.deriv.is_empty() && op3.mult.is_empty());
    }

    #[test]
    fn heisenberg_commutator() {
        // [f̂, ĝ] = Ω(f, g) · id on random windowed pairs and states.
        let e = env();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(17);
        for _ in 0..10 {
            let f = random_loop_vector(&mut rng, -3, 2);
            let g = random_loop_vector(&mut rng, -3, 2);
            let omega = f.symplectic_form(&g, &e).unwrap();
            let fop = quantize_linear(&f, VarCopy::Plain, &e).unwrap();
            let gop = quantize_linear(&g, VarCopy::Plain, &e).unwrap();
            let t = random_state(&mut rng);
            let fg = t.apply_linear(&gop).apply_linear(&fop);
            let gf = t.apply_linear(&fop).apply_linear(&gop);
            let commutator = fg.pre.sub(&gf.pre);
            let expect = t.pre.scale(&omega);
            assert_eq!(commutator, expect);
        }
    }

    #[test]
    fn vertex_inverse_pair() {
        // (e^f)^ then (e^{−f})^ returns T up to the recorded commutator
        // scalar exp(Σ p_v(f) q_v(f)); for f supported on one half of the
        // polarization the scalar is exp(0) = 1 and T comes back exactly.
        let e = env();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(23);
        let f = random_loop_vector(&mut rng, -3, 2);
        let op = quantize_linear(&f, VarCopy::Plain, &e).unwrap();
        let t = random_state(&mut rng);
        let round = t.apply_vertex(&op).apply_vertex(&op.neg());
        let mut scalar = P::zero();
        for (v, c) in &op.deriv {
            if let Some((_, m)) = op.mult.iter().find(|(w, _)| w == v) {
                // mult coefficient is −p_v, deriv coefficient is q_v
                scalar = scalar.add(&m.neg().mul(c));
            }
        }
        let mut expect = t.log.clone();
        expect.insert(Mono::unit(), scalar);
        assert_eq!(round.log.truncate(&t.cuts), expect.truncate(&t.cuts));
        assert_eq!(round.pre, t.pre);

        // one-sided exponent: exact inverse pair
        let (fp, _) = f.polarize();
        let opp = quantize_linear(&fp, VarCopy::Plain, &e).unwrap();
        let round2 = t.apply_vertex(&opp).apply_vertex(&opp.neg());
        assert_eq!(round2.log.truncate(&t.cuts), t.log.truncate(&t.cuts));
        assert_eq!(round2.pre, t.pre);
    }

    #[test]
    fn commutation_factor_law() {
        // e^{f̂}e^{ĝ} = e^{Ω(f,g)} e^{ĝ}e^{f̂} for normal-ordered vertex
        // exponentials, exactly at every truncation.
        let e = env();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(31);
        for _ in 0..10 {
            let f = random_loop_vector(&mut rng, -3, 2);
            let g = random_loop_vector(&mut rng, -3, 2);
            let omega = f.symplectic_form(&g, &e).unwrap();
            let fop = quantize_linear(&f, VarCopy::Plain, &e).unwrap();
            let gop = quantize_linear(&g, VarCopy::Plain, &e).unwrap();
            let t = random_state(&mut rng);
            let lhs = t.apply_vertex(&gop).apply_vertex(&fop);
            let rhs = t.apply_vertex(&fop).apply_vertex(&gop);
            // lhs = e^{Ω(f,g)} rhs: on the log side the scalar adds.
            // exp(Ω) multiplies the state; compare log difference against
            // the constant Ω(f,g) and equal prefactors.
            let diff = lhs.log.sub(&rhs.log);
            let mut expect = FockPoly::zero();
            expect.insert(Mono::unit(), omega);
            assert_eq!(diff, expect);
            assert_eq!(lhs.pre, rhs.pre);
        }
    }

    #[test]
    fn tameness_examples() {
        let c = Cuts { eps_lo: -2, eps_hi: 2, q_degree: 4, level: 5, novikov: 2 };
        // T = 1 is tame.
        let one = FockElement::<P>::one(c);
        assert!(is_tame(&one));
        // F₀ with a t_{4,0}-linear term: k₁ = 4 > 3·0 − 3 + 1 = −2 → not tame.
        // Build directly in the t-picture: use from_t_picture to get q-data.
        let mut f0 = FockPoly::zero();
        f0.insert(Mono::var(Var::q(4, Sector::Zero)), P::from_int(1));
        let qlog = from_t_picture(&f0.mul_mono(&Mono::eps_pow(-2), &P::one()), &c);
        let el = FockElement { cuts: c, log: qlog };
        assert!(!is_tame(&el));
        // F₁ with only a t_{1,0}-linear term: k₁ = 1 ≤ 3·1 − 3 + 1 = 1 → tame.
        let mut f1 = FockPoly::zero();
        f1.insert(Mono::var(Var::q(1, Sector::Zero)), P::from_int(1));
        let qlog1 = from_t_picture(&f1, &c); // ε^0 = ε^{2·1−2}
        let el1 = FockElement { cuts: c, log: qlog1 };
        assert!(is_tame(&el1));
    }

    #[test]
    fn dilaton_shift_roundtrip() {
        let c = cuts();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(41);
        let state = random_state(&mut rng);
        let t = to_t_picture(&state.log, &c);
        let back = from_t_picture(&t, &c);
        assert_eq!(back, state.log);
        // shift applied twice differs from once
        let twice = to_t_picture(&t, &c);
        assert_ne!(twice, t);
    }

    #[test]
    fn quad_toy_first_order() {
        // A = A₁ z^{-1} with A₁ = [[a, b], [−b, d]] (pairing-symmetric);
        // exp(Â) at order 1 on T = 1 gives 1 − (A₁u, u)/(2ε²) with
        // u = q_{0,0}φ₀ + q_{0,∞}φ∞:
        // (A₁u, u) = [a q₀₀² + 2b q₀₀q₀∞ − d q₀∞²]/ν.
        let e = env();
        let a_s = P::from_int(3);
        let b_s = P::from_int(5);
        let d_s = P::from_int(-2);
        let mk = |c: &P| TruncSeries::monomial(SeriesVar::Z, -1, c.clone());
        let a = MatrixSeries {
            a00: mk(&a_s),
            a0i: mk(&b_s),
            ai0: mk(&b_s.neg()),
            aii: mk(&d_s),
        };
        let op = QuadHamOp::from_infinitesimal(&a, VarCopy::Plain, 2, &e).unwrap();
        assert!(op.pp.is_empty(), "lower-triangular source has no pp part");
        let t = FockState::from_log(cuts(), FockPoly::zero());
        let res = op.apply_exp(&t, 1);
        let nu_inv = e.nu.inv().unwrap();
        let q00 = Var::q(0, Sector::Zero);
        let q0i = Var::q(0, Sector::Inf);
        let mut expect = FockPoly::one();
        let mut m1 = Mono::var(q00).mul(&Mono::var(q00));
        m1.eps = -2;
        expect.insert(m1, a_s.mul(&nu_inv).mul_ratio(-1, 2));
        let mut m2 = Mono::var(q00).mul(&Mono::var(q0i));
        m2.eps = -2;
        expect.insert(m2, b_s.mul(&nu_inv).neg());
        let mut m3 = Mono::var(q0i).mul(&Mono::var(q0i));
        m3.eps = -2;
        expect.insert(m3, d_s.mul(&nu_inv).mul_ratio(1, 2));
        assert_eq!(res.pre, expect);
    }

    #[test]
    fn projective_cocycle_is_scalar() {
        // Two classically commuting lower-triangular exponentials composed
        // both ways differ only by a scalar multiple (the cocycle), never in
        // the q-dependence. A = a·Id·z⁻¹ and B = offdiag(c) z⁻² commute as
        // loop-group elements and both quantize to nilpotent operators under
        // the cuts, so the truncated exponentials are exact.
        let e = env();
        let a = MatrixSeries {
            a00: TruncSeries::monomial(SeriesVar::Z, -1, P::from_int(3)),
            a0i: TruncSeries::zero(SeriesVar::Z),
            ai0: TruncSeries::zero(SeriesVar::Z),
            aii: TruncSeries::monomial(SeriesVar::Z, -1, P::from_int(3)),
        };
        let b = MatrixSeries {
            a00: TruncSeries::zero(SeriesVar::Z),
            a0i: TruncSeries::monomial(SeriesVar::Z, -2, P::from_int(7)),
            ai0: TruncSeries::monomial(SeriesVar::Z, -2, P::from_int(7)),
            aii: TruncSeries::zero(SeriesVar::Z),
        };
        let aop = QuadHamOp::from_infinitesimal(&a, VarCopy::Plain, 3, &e).unwrap();
        let bop = QuadHamOp::from_infinitesimal(&b, VarCopy::Plain, 3, &e).unwrap();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(43);
        let t = random_state(&mut rng);
        let ab = bop.apply_exp(&aop.apply_exp(&t, 10), 10);
        let ba = aop.apply_exp(&bop.apply_exp(&t, 10), 10);
        let c_ab = ab.pre.coeff(&Mono::unit());
        let c_ba = ba.pre.coeff(&Mono::unit());
        assert!(!c_ab.is_zero() && !c_ba.is_zero());
        let lhs = ab.pre.scale(&c_ba);
        let rhs = ba.pre.scale(&c_ab);
        assert_eq!(lhs, rhs, "cocycle must be central");
    }
}
