//! Canonical sparse multivariate polynomials over exact rationals, plus a
//! fraction layer whose denominators are parameter-only polynomials.
//!
//! Monomials are exponent vectors over an ordered symbol list fixed per
//! computation, sorted graded-lexicographically. Two polynomials over the
//! same list are equal iff their term maps are equal, which makes equality
//! of the polynomial expression subset decidable.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::expr::{self, Expr};
use super::rational::{self, Rat};
use super::symbol::Symbol;
use num_traits::{One, ToPrimitive, Zero};

/// Ordered variable list shared by every polynomial of one computation.
pub type VarSet = Arc<Vec<Symbol>>;

/// Build a variable set from symbols (sorted, deduplicated).
pub fn varset(mut syms: Vec<Symbol>) -> VarSet {
    syms.sort();
    syms.dedup();
    Arc::new(syms)
}

/// Exponent vector; ordering is graded lex with the first variable most
/// significant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mono(pub Vec<u16>);

impl Mono {
    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn is_unit(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    fn mul(&self, other: &Mono) -> Mono {
        Mono(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.checked_add(*b).expect("exponent overflow"))
                .collect(),
        )
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyForm {
    vars: VarSet,
    terms: BTreeMap<Mono, Rat>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonPolynomial {
    pub node_kind: &'static str,
}

impl core::fmt::Display for NonPolynomial {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "non-polynomial node encountered: {}", self.node_kind)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for NonPolynomial {}

impl PolyForm {
    pub fn zero(vars: &VarSet) -> Self {
        PolyForm {
            vars: vars.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: &VarSet, c: Rat) -> Self {
        let mut p = Self::zero(vars);
        if !c.is_zero() {
            p.terms.insert(Mono(alloc::vec![0; vars.len()]), c);
        }
        p
    }

    pub fn one(vars: &VarSet) -> Self {
        Self::constant(vars, rational::rat_one())
    }

    /// The polynomial `s`; panics if `s` is not in the variable list.
    pub fn var(vars: &VarSet, s: &Symbol) -> Self {
        let idx = vars
            .iter()
            .position(|v| v == s)
            .expect("symbol not in variable list");
        let mut exps = alloc::vec![0u16; vars.len()];
        exps[idx] = 1;
        let mut p = Self::zero(vars);
        p.terms.insert(Mono(exps), rational::rat_one());
        p
    }

    pub fn vars(&self) -> &VarSet {
        &self.vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Rat)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Mono::is_unit)
    }

    pub fn constant_value(&self) -> Option<Rat> {
        if self.terms.is_empty() {
            return Some(rational::rat_zero());
        }
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            if m.is_unit() {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Mono::total_degree).max().unwrap_or(0)
    }

    /// Degree in one variable.
    pub fn degree_in(&self, s: &Symbol) -> u16 {
        match self.vars.iter().position(|v| v == s) {
            Some(i) => self.terms.keys().map(|m| m.0[i]).max().unwrap_or(0),
            None => 0,
        }
    }

    fn insert_term(&mut self, m: Mono, c: Rat) {
        if c.is_zero() {
            return;
        }
        use alloc::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &PolyForm) -> PolyForm {
        debug_assert!(Arc::ptr_eq(&self.vars, &other.vars) || self.vars == other.vars);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert_term(m.clone(), c.clone());
        }
        out
    }

    pub fn add_assign(&mut self, other: &PolyForm) {
        debug_assert!(Arc::ptr_eq(&self.vars, &other.vars) || self.vars == other.vars);
        for (m, c) in &other.terms {
            self.insert_term(m.clone(), c.clone());
        }
    }

    pub fn sub_assign(&mut self, other: &PolyForm) {
        for (m, c) in &other.terms {
            self.insert_term(m.clone(), -c.clone());
        }
    }

    /// Fused `self += a * b` without materializing the product.
    pub fn add_assign_mul(&mut self, a: &PolyForm, b: &PolyForm) {
        for (ma, ca) in &a.terms {
            for (mb, cb) in &b.terms {
                self.insert_term(ma.mul(mb), ca.clone() * cb.clone());
            }
        }
    }

    pub fn sub(&self, other: &PolyForm) -> PolyForm {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> PolyForm {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = -c.clone();
        }
        out
    }

    pub fn scale(&self, k: &Rat) -> PolyForm {
        if k.is_zero() {
            return Self::zero(&self.vars);
        }
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= k.clone();
        }
        out
    }

    pub fn mul(&self, other: &PolyForm) -> PolyForm {
        debug_assert!(Arc::ptr_eq(&self.vars, &other.vars) || self.vars == other.vars);
        let mut out = Self::zero(&self.vars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.insert_term(ma.mul(mb), ca.clone() * cb.clone());
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> PolyForm {
        let mut acc = Self::one(&self.vars);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Partial derivative with respect to one variable.
    pub fn derivative(&self, s: &Symbol) -> PolyForm {
        let idx = match self.vars.iter().position(|v| v == s) {
            Some(i) => i,
            None => return Self::zero(&self.vars),
        };
        let mut out = Self::zero(&self.vars);
        for (m, c) in &self.terms {
            let e = m.0[idx];
            if e == 0 {
                continue;
            }
            let mut nm = m.clone();
            nm.0[idx] = e - 1;
            out.insert_term(nm, c.clone() * rational::rat_int(e as i64));
        }
        out
    }

    /// Coefficient of `s^k` as a polynomial in the remaining variables
    /// (same variable list, exponent of `s` zeroed by construction).
    pub fn coefficient_of(&self, s: &Symbol, k: u16) -> PolyForm {
        let idx = self
            .vars
            .iter()
            .position(|v| v == s)
            .expect("symbol not in variable list");
        let mut out = Self::zero(&self.vars);
        for (m, c) in &self.terms {
            if m.0[idx] == k {
                let mut nm = m.clone();
                nm.0[idx] = 0;
                out.insert_term(nm, c.clone());
            }
        }
        out
    }

    /// True when every monomial with a nonzero coefficient involves only
    /// variables satisfying `pred`.
    pub fn supported_on(&self, pred: impl Fn(&Symbol) -> bool) -> bool {
        self.terms.keys().all(|m| {
            m.0.iter()
                .enumerate()
                .all(|(i, &e)| e == 0 || pred(&self.vars[i]))
        })
    }

    /// Re-express over a superset variable list.
    pub fn embed(&self, vars: &VarSet) -> PolyForm {
        if Arc::ptr_eq(&self.vars, vars) || self.vars == *vars {
            let mut out = self.clone();
            out.vars = vars.clone();
            return out;
        }
        let map: Vec<usize> = self
            .vars
            .iter()
            .map(|s| {
                vars.iter()
                    .position(|v| v == s)
                    .expect("target variable list must be a superset")
            })
            .collect();
        let mut out = Self::zero(vars);
        for (m, c) in &self.terms {
            let mut nm = alloc::vec![0u16; vars.len()];
            for (i, &e) in m.0.iter().enumerate() {
                nm[map[i]] = e;
            }
            out.insert_term(Mono(nm), c.clone());
        }
        out
    }

    /// Canonical expression: monomials emitted largest-first.
    pub fn to_expr(&self) -> Expr {
        let mut terms = Vec::new();
        for (m, c) in self.terms.iter().rev() {
            let mut factors = alloc::vec![Expr::Const(c.clone())];
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    factors.push(expr::pow_int(Expr::sym(&self.vars[i]), e as i64));
                }
            }
            terms.push(expr::mul(factors));
        }
        expr::add(terms)
    }

    /// Normalize a polynomial-subset expression over an explicit list.
    pub fn from_expr(e: &Expr, vars: &VarSet) -> Result<PolyForm, NonPolynomial> {
        match e {
            Expr::Const(c) => Ok(Self::constant(vars, c.clone())),
            Expr::Sym(s) => Ok(Self::var(vars, s)),
            Expr::Sum(ts) => {
                let mut acc = Self::zero(vars);
                for t in ts {
                    acc = acc.add(&Self::from_expr(t, vars)?);
                }
                Ok(acc)
            }
            Expr::Prod(fs) => {
                let mut acc = Self::one(vars);
                for f in fs {
                    acc = acc.mul(&Self::from_expr(f, vars)?);
                }
                Ok(acc)
            }
            Expr::IntPow(b, k) => {
                if *k < 0 {
                    return Err(NonPolynomial {
                        node_kind: "negative integer power",
                    });
                }
                Ok(Self::from_expr(b, vars)?.pow(*k as u32))
            }
            other => Err(NonPolynomial {
                node_kind: other.node_kind(),
            }),
        }
    }
}

/// Normalize an expression to its canonical polynomial form, inferring the
/// variable list from the expression's free symbols.
pub fn poly_normalize(e: &Expr) -> Result<PolyForm, NonPolynomial> {
    let vars = varset(expr::free_symbols(e).into_iter().collect());
    PolyForm::from_expr(e, &vars)
}

/// Decide `a - b == 0` on the polynomial subset over a shared list.
pub fn poly_equal(a: &Expr, b: &Expr) -> Result<bool, NonPolynomial> {
    let mut syms = expr::free_symbols(a);
    syms.extend(expr::free_symbols(b));
    let vars = varset(syms.into_iter().collect());
    Ok(PolyForm::from_expr(a, &vars)?
        .sub(&PolyForm::from_expr(b, &vars)?)
        .is_zero())
}

/// Decide equality of two rational-polynomial expressions by cross
/// multiplication (denominators are nonzero parameter polynomials).
pub fn frac_equal(a: &Expr, b: &Expr) -> Result<bool, NonPolynomial> {
    let mut syms = expr::free_symbols(a);
    syms.extend(expr::free_symbols(b));
    let vars = varset(syms.into_iter().collect());
    let fa = Frac::from_expr(a, &vars)?;
    let fb = Frac::from_expr(b, &vars)?;
    Ok(fa.num.mul(&fb.den).sub(&fb.num.mul(&fa.den)).is_zero())
}

/// A polynomial divided by a nonzero parameter-only polynomial. `Frac` keeps
/// both parts over one shared variable list. Since the denominators are
/// nonzero for generic parameter values, a fraction vanishes iff its
/// numerator does; no polynomial gcd is ever needed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frac {
    pub num: PolyForm,
    pub den: PolyForm,
}

impl Frac {
    pub fn from_poly(p: PolyForm) -> Frac {
        let den = PolyForm::one(p.vars());
        Frac { num: p, den }
    }

    /// Canonical form: denominator scaled monic (leading graded-lex
    /// coefficient 1); constant denominators therefore fold away entirely.
    fn canon(mut self) -> Frac {
        debug_assert!(!self.den.is_zero());
        if let Some((_, c)) = self.den.terms.iter().next_back() {
            if !c.is_one() {
                let inv = c.clone().recip();
                self.num = self.num.scale(&inv);
                self.den = self.den.scale(&inv);
            }
        }
        self
    }

    pub fn zero(vars: &VarSet) -> Frac {
        Self::from_poly(PolyForm::zero(vars))
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn add(&self, other: &Frac) -> Frac {
        if self.den == other.den {
            return Frac {
                num: self.num.add(&other.num),
                den: self.den.clone(),
            };
        }
        Frac {
            num: self
                .num
                .mul(&other.den)
                .add(&other.num.mul(&self.den)),
            den: self.den.mul(&other.den),
        }
        .canon()
    }

    pub fn sub(&self, other: &Frac) -> Frac {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Frac {
        Frac {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &Frac) -> Frac {
        Frac {
            num: self.num.mul(&other.num),
            den: self.den.mul(&other.den),
        }
        .canon()
    }

    pub fn scale(&self, k: &Rat) -> Frac {
        Frac {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    pub fn pow(&self, k: u32) -> Frac {
        Frac {
            num: self.num.pow(k),
            den: self.den.pow(k),
        }
        .canon()
    }

    /// Divide by a nonzero parameter-only polynomial.
    pub fn div_poly(&self, d: &PolyForm) -> Frac {
        debug_assert!(!d.is_zero());
        Frac {
            num: self.num.clone(),
            den: self.den.mul(d),
        }
        .canon()
    }

    /// Like [`PolyForm::from_expr`], but also accepts negative integer
    /// powers whose denominator part ends up parameter-only.
    pub fn from_expr(e: &Expr, vars: &VarSet) -> Result<Frac, NonPolynomial> {
        use super::symbol::SymbolKind;
        match e {
            Expr::Sum(ts) => {
                let mut acc = Frac::zero(vars);
                for t in ts {
                    acc = acc.add(&Frac::from_expr(t, vars)?);
                }
                Ok(acc)
            }
            Expr::Prod(fs) => {
                let mut acc = Frac::from_poly(PolyForm::one(vars));
                for f in fs {
                    acc = acc.mul(&Frac::from_expr(f, vars)?);
                }
                Ok(acc)
            }
            Expr::IntPow(b, k) if *k < 0 => {
                let inner = Frac::from_expr(b, vars)?.pow((-*k) as u32);
                if !inner.num.supported_on(|s| s.kind() == SymbolKind::Parameter) {
                    return Err(NonPolynomial {
                        node_kind: "negative power of a non-parameter expression",
                    });
                }
                Ok(Frac {
                    num: inner.den,
                    den: inner.num,
                })
            }
            Expr::IntPow(b, k) => Ok(Frac::from_expr(b, vars)?.pow(*k as u32)),
            other => Ok(Frac::from_poly(PolyForm::from_expr(other, vars)?)),
        }
    }

    /// `num/den` as an expression (`den` rendered as a `^(-1)` factor).
    pub fn to_expr(&self) -> Expr {
        if self.den.constant_value().map(|c| c.is_one()) == Some(true) {
            return self.num.to_expr();
        }
        if let Some(c) = self.den.constant_value() {
            return self.num.scale(&c.recip()).to_expr();
        }
        expr::mul2(self.num.to_expr(), expr::pow_int(self.den.to_expr(), -1))
    }
}

/// Evaluate a polynomial under a per-variable fraction substitution
/// (identity where `map` returns `None`). This is the homomorphism used for
/// reduction modulo a solved PDE system.
///
/// Terms free of substituted variables pass through in one batch; the rest
/// are accumulated grouped by denominator, so the cost stays linear in the
/// term count times the (small) substitution blow-up.
pub fn substitute_frac(
    p: &PolyForm,
    vars: &VarSet,
    map: &dyn Fn(usize) -> Option<Frac>,
) -> Frac {
    let mapped: Vec<Option<Frac>> = (0..vars.len()).map(|i| map(i)).collect();
    let mut plain = PolyForm::zero(vars);
    // denominator -> accumulated numerator
    let mut groups: Vec<(PolyForm, PolyForm)> = Vec::new();
    for (m, c) in p.terms() {
        let active = m
            .0
            .iter()
            .enumerate()
            .any(|(i, &e)| e > 0 && mapped[i].is_some());
        if !active {
            plain.insert_term(m.clone(), c.clone());
            continue;
        }
        let mut term = Frac::from_poly(PolyForm::constant(vars, c.clone()));
        let mut rest = Mono(alloc::vec![0u16; vars.len()]);
        let mut has_rest = false;
        for (i, &e) in m.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            match &mapped[i] {
                Some(f) => term = term.mul(&f.pow(e as u32)),
                None => {
                    rest.0[i] = e;
                    has_rest = true;
                }
            }
        }
        if has_rest {
            let mut mono_poly = PolyForm::zero(vars);
            mono_poly.insert_term(rest, rational::rat_one());
            term.num = term.num.mul(&mono_poly);
        }
        match groups.iter_mut().find(|(d, _)| *d == term.den) {
            Some((_, num)) => num.add_assign(&term.num),
            None => groups.push((term.den, term.num)),
        }
    }
    let mut acc = Frac::from_poly(plain);
    for (den, num) in groups {
        acc = acc.add(&Frac { num, den }.canon());
    }
    acc
}

#[allow(unused)]
fn _keep_to_i64(r: &Rat) -> Option<i64> {
    r.numer().to_i64()
}
