//! Expression trees over exact rationals.
//!
//! The polynomial subset (constants, symbols, sums, products, nonnegative
//! integer powers) has a decidable canonical form in [`crate::exprcore::poly`].
//! The extended node set (rational powers, exp, ln, opaque function
//! applications) exists for flows and similarity ansätze; equality there is
//! structural after the local rewrite pass in [`normalize_extended`].

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::rational::{self, Rat};
use super::symbol::Symbol;
use num_traits::{One, Signed, Zero};

/// Opaque function application `name'''(arg)`; `primes` counts derivatives.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FuncApp {
    pub name: Arc<str>,
    pub primes: u32,
    pub arg: Box<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Const(Rat),
    Sym(Symbol),
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    /// Integer power with nonzero exponent.
    IntPow(Box<Expr>, i64),
    /// Rational (non-integer) power; base restricted to a symbol or a sum of
    /// symbols by construction.
    RatPow(Box<Expr>, Rat),
    Exp(Box<Expr>),
    Ln(Box<Expr>),
    Func(FuncApp),
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Const(rational::rat_zero())
    }

    pub fn one() -> Expr {
        Expr::Const(rational::rat_one())
    }

    pub fn int(n: i64) -> Expr {
        Expr::Const(rational::rat_int(n))
    }

    pub fn rat(n: i64, d: i64) -> Expr {
        Expr::Const(rational::rat(n, d))
    }

    pub fn sym(s: &Symbol) -> Expr {
        Expr::Sym(s.clone())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_one())
    }

    pub fn as_const(&self) -> Option<&Rat> {
        match self {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Kind name for error messages.
    pub fn node_kind(&self) -> &'static str {
        match self {
            Expr::Const(_) => "constant",
            Expr::Sym(_) => "symbol",
            Expr::Sum(_) => "sum",
            Expr::Prod(_) => "product",
            Expr::IntPow(..) => "integer power",
            Expr::RatPow(..) => "rational power",
            Expr::Exp(_) => "exp",
            Expr::Ln(_) => "ln",
            Expr::Func(_) => "function application",
        }
    }
}

/// Sum smart constructor: flattens nested sums, folds constants, drops zeros.
/// Term order is preserved (no sorting here; canonical order is the job of
/// the polynomial form or `normalize_extended`).
pub fn add(terms: Vec<Expr>) -> Expr {
    let mut flat = Vec::new();
    let mut konst = rational::rat_zero();
    let mut saw_const = false;
    for t in terms {
        match t {
            Expr::Sum(inner) => {
                for s in inner {
                    match s {
                        Expr::Const(c) => {
                            konst += c;
                            saw_const = true;
                        }
                        other => flat.push(other),
                    }
                }
            }
            Expr::Const(c) => {
                konst += c;
                saw_const = true;
            }
            other => flat.push(other),
        }
    }
    if saw_const && !konst.is_zero() {
        flat.push(Expr::Const(konst));
    }
    match flat.len() {
        0 => Expr::zero(),
        1 => flat.pop().unwrap(),
        _ => Expr::Sum(flat),
    }
}

pub fn add2(a: Expr, b: Expr) -> Expr {
    add(alloc::vec![a, b])
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    add2(a, neg(b))
}

/// Product smart constructor: flattens, folds the scalar prefactor to the
/// front, annihilates on zero, merges constants.
pub fn mul(factors: Vec<Expr>) -> Expr {
    let mut flat = Vec::new();
    let mut konst = rational::rat_one();
    for f in factors {
        match f {
            Expr::Prod(inner) => {
                for g in inner {
                    match g {
                        Expr::Const(c) => konst *= c,
                        other => flat.push(other),
                    }
                }
            }
            Expr::Const(c) => konst *= c,
            other => flat.push(other),
        }
    }
    if konst.is_zero() {
        return Expr::zero();
    }
    if flat.is_empty() {
        return Expr::Const(konst);
    }
    if !konst.is_one() {
        flat.insert(0, Expr::Const(konst));
    }
    if flat.len() == 1 {
        flat.pop().unwrap()
    } else {
        Expr::Prod(flat)
    }
}

pub fn mul2(a: Expr, b: Expr) -> Expr {
    mul(alloc::vec![a, b])
}

pub fn neg(e: Expr) -> Expr {
    mul2(Expr::int(-1), e)
}

/// Integer power; `k = 0` collapses to 1, `k = 1` to the base, constant
/// bases fold, nested integer powers combine.
pub fn pow_int(base: Expr, k: i64) -> Expr {
    if k == 0 {
        return Expr::one();
    }
    if k == 1 {
        return base;
    }
    match base {
        Expr::Const(c) => Expr::Const(rational::rat_pow(&c, k)),
        Expr::IntPow(b, j) => pow_int(*b, j * k),
        Expr::Exp(u) => exp_of(mul2(Expr::int(k), *u)),
        other => Expr::IntPow(Box::new(other), k),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatPowError;

/// Rational power; integer exponents fall through to [`pow_int`].
/// The base must be a symbol or a sum of symbols.
pub fn pow_rat(base: Expr, q: Rat) -> Result<Expr, RatPowError> {
    if rational::is_integer(&q) {
        use num_traits::ToPrimitive;
        return Ok(pow_int(base, q.numer().to_i64().ok_or(RatPowError)?));
    }
    let base_ok = match &base {
        Expr::Sym(_) => true,
        Expr::Sum(terms) => terms.iter().all(|t| matches!(t, Expr::Sym(_))),
        _ => false,
    };
    if !base_ok {
        return Err(RatPowError);
    }
    // x^(p/q) * x^(r/s) combination happens in normalize_extended.
    Ok(Expr::RatPow(Box::new(base), q))
}

pub fn exp_of(e: Expr) -> Expr {
    if e.is_zero() {
        return Expr::one();
    }
    Expr::Exp(Box::new(e))
}

pub fn ln_of(e: Expr) -> Expr {
    if e.is_one() {
        return Expr::zero();
    }
    Expr::Ln(Box::new(e))
}

pub fn func(name: &str, primes: u32, arg: Expr) -> Expr {
    Expr::Func(FuncApp {
        name: Arc::from(name),
        primes,
        arg: Box::new(arg),
    })
}

/// Partial derivative with respect to one symbol; every other symbol is a
/// constant. Opaque applications differentiate by the chain rule, raising
/// the prime count.
pub fn diff(e: &Expr, s: &Symbol) -> Expr {
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Sym(t) => {
            if t == s {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Sum(terms) => add(terms.iter().map(|t| diff(t, s)).collect()),
        Expr::Prod(factors) => {
            let mut terms = Vec::new();
            for (i, f) in factors.iter().enumerate() {
                let df = diff(f, s);
                if df.is_zero() {
                    continue;
                }
                let mut rest: Vec<Expr> = factors.clone();
                rest[i] = df;
                terms.push(mul(rest));
            }
            add(terms)
        }
        Expr::IntPow(b, k) => {
            let db = diff(b, s);
            if db.is_zero() {
                return Expr::zero();
            }
            mul(alloc::vec![Expr::int(*k), pow_int((**b).clone(), k - 1), db])
        }
        Expr::RatPow(b, q) => {
            let db = diff(b, s);
            if db.is_zero() {
                return Expr::zero();
            }
            let lowered = pow_rat((**b).clone(), q.clone() - rational::rat_one())
                .expect("base already validated");
            mul(alloc::vec![Expr::Const(q.clone()), lowered, db])
        }
        Expr::Exp(a) => {
            let da = diff(a, s);
            if da.is_zero() {
                return Expr::zero();
            }
            mul2(e.clone(), da)
        }
        Expr::Ln(a) => {
            let da = diff(a, s);
            if da.is_zero() {
                return Expr::zero();
            }
            mul2(pow_int((**a).clone(), -1), da)
        }
        Expr::Func(f) => {
            let da = diff(&f.arg, s);
            if da.is_zero() {
                return Expr::zero();
            }
            mul2(func(&f.name, f.primes + 1, (*f.arg).clone()), da)
        }
    }
}

/// Simultaneous (non-iterated) substitution of symbols by expressions.
pub fn substitute(e: &Expr, map: &BTreeMap<Symbol, Expr>) -> Expr {
    match e {
        Expr::Const(_) => e.clone(),
        Expr::Sym(s) => map.get(s).cloned().unwrap_or_else(|| e.clone()),
        Expr::Sum(terms) => add(terms.iter().map(|t| substitute(t, map)).collect()),
        Expr::Prod(factors) => mul(factors.iter().map(|f| substitute(f, map)).collect()),
        Expr::IntPow(b, k) => pow_int(substitute(b, map), *k),
        Expr::RatPow(b, q) => {
            let nb = substitute(b, map);
            pow_rat(nb.clone(), q.clone()).unwrap_or(Expr::RatPow(Box::new(nb), q.clone()))
        }
        Expr::Exp(a) => exp_of(substitute(a, map)),
        Expr::Ln(a) => ln_of(substitute(a, map)),
        Expr::Func(f) => func(&f.name, f.primes, substitute(&f.arg, map)),
    }
}

pub fn free_symbols(e: &Expr) -> BTreeSet<Symbol> {
    let mut out = BTreeSet::new();
    collect_symbols(e, &mut out);
    out
}

fn collect_symbols(e: &Expr, out: &mut BTreeSet<Symbol>) {
    match e {
        Expr::Const(_) => {}
        Expr::Sym(s) => {
            out.insert(s.clone());
        }
        Expr::Sum(v) | Expr::Prod(v) => v.iter().for_each(|t| collect_symbols(t, out)),
        Expr::IntPow(b, _) | Expr::RatPow(b, _) => collect_symbols(b, out),
        Expr::Exp(a) | Expr::Ln(a) => collect_symbols(a, out),
        Expr::Func(f) => collect_symbols(&f.arg, out),
    }
}

/// Fixed local rewrite pass giving a canonical shape on the extended node
/// set: children normalized recursively, products/sums flattened and sorted,
/// `exp` factors collected into one exponent, powers of equal bases combined,
/// like sum terms merged. This is not general simplification; it is exactly
/// enough to decide equality of monomial-type expressions such as flows and
/// similarity prefactors.
pub fn normalize_extended(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Sym(_) => e.clone(),
        Expr::Sum(terms) => {
            let mut parts: Vec<Expr> = Vec::new();
            for t in terms {
                match normalize_extended(t) {
                    Expr::Sum(inner) => parts.extend(inner),
                    other => parts.push(other),
                }
            }
            // Merge structurally equal terms, tracking rational multiplicity.
            let mut merged: Vec<(Expr, Rat)> = Vec::new();
            let mut konst = rational::rat_zero();
            for p in parts {
                let (coeff, core) = split_coeff(p);
                if core.is_one() {
                    konst += coeff;
                    continue;
                }
                if let Some(slot) = merged.iter_mut().find(|(c, _)| *c == core) {
                    slot.1 += coeff;
                } else {
                    merged.push((core, coeff));
                }
            }
            let mut out: Vec<Expr> = merged
                .into_iter()
                .filter(|(_, c)| !c.is_zero())
                .map(|(core, c)| mul2(Expr::Const(c), core))
                .collect();
            if !konst.is_zero() {
                out.push(Expr::Const(konst));
            }
            out.sort();
            add(out)
        }
        Expr::Prod(factors) => {
            let parts: Vec<Expr> = factors.iter().map(normalize_extended).collect();
            // Distribute over the first sum factor, if any; recursion
            // handles the rest.
            if let Some(i) = parts.iter().position(|p| matches!(p, Expr::Sum(_))) {
                let terms = match parts[i].clone() {
                    Expr::Sum(ts) => ts,
                    _ => unreachable!(),
                };
                let expanded: Vec<Expr> = terms
                    .into_iter()
                    .map(|t| {
                        let mut fs = parts.clone();
                        fs[i] = t;
                        normalize_extended(&Expr::Prod(fs))
                    })
                    .collect();
                return normalize_extended(&add(expanded));
            }
            normalize_product(parts)
        }
        Expr::IntPow(b, k) => {
            let nb = normalize_extended(b);
            match &nb {
                // Small positive powers of sums expand so that termwise
                // cancellation can happen.
                Expr::Sum(_) if (1..=8).contains(k) => {
                    let factors = alloc::vec![nb.clone(); *k as usize];
                    normalize_extended(&Expr::Prod(factors))
                }
                Expr::Prod(fs) => {
                    let spread: Vec<Expr> = fs.iter().map(|f| pow_int(f.clone(), *k)).collect();
                    normalize_product(spread)
                }
                _ => normalize_product(alloc::vec![pow_int(nb, *k)]),
            }
        }
        Expr::RatPow(b, q) => {
            let nb = normalize_extended(b);
            normalize_rat_pow(nb, q.clone())
        }
        Expr::Exp(a) => exp_of(normalize_extended(a)),
        Expr::Ln(a) => ln_of(normalize_extended(a)),
        Expr::Func(f) => func(&f.name, f.primes, normalize_extended(&f.arg)),
    }
}

/// Rational power in normalized position: distributes over products and
/// exponentials (all bases live on declared-positive domains), folds
/// constant bases with exact roots, and combines nested powers.
fn normalize_rat_pow(base: Expr, q: Rat) -> Expr {
    if rational::is_integer(&q) {
        use num_traits::ToPrimitive;
        if let Some(k) = q.numer().to_i64() {
            return normalize_extended(&pow_int(base, k));
        }
    }
    match base {
        Expr::Prod(fs) => {
            let spread: Vec<Expr> = fs
                .into_iter()
                .map(|f| normalize_rat_pow(f, q.clone()))
                .collect();
            normalize_extended(&Expr::Prod(spread))
        }
        Expr::Exp(u) => exp_of(normalize_extended(&mul2(Expr::Const(q), *u))),
        Expr::IntPow(b, k) => normalize_rat_pow(*b, q * rational::rat_int(k)),
        Expr::RatPow(b, r) => normalize_rat_pow(*b, q * r),
        Expr::Const(c) => {
            use num_traits::ToPrimitive;
            let exact = q
                .numer()
                .to_i64()
                .zip(q.denom().to_u32())
                .and_then(|(p, d)| rational::rat_root_pow(&c, p, d));
            match exact {
                Some(v) => Expr::Const(v),
                None => Expr::RatPow(Box::new(Expr::Const(c)), q),
            }
        }
        other => match pow_rat(other.clone(), q.clone()) {
            Ok(p) => p,
            Err(_) => Expr::RatPow(Box::new(other), q),
        },
    }
}

/// Split a scalar prefactor off a (normalized) term: `3/2*x*y -> (3/2, x*y)`.
fn split_coeff(e: Expr) -> (Rat, Expr) {
    match e {
        Expr::Const(c) => (c, Expr::one()),
        Expr::Prod(mut fs) => {
            if let Some(Expr::Const(_)) = fs.first() {
                let c = match fs.remove(0) {
                    Expr::Const(c) => c,
                    _ => unreachable!(),
                };
                (c, mul(fs))
            } else {
                (rational::rat_one(), mul(fs))
            }
        }
        other => (rational::rat_one(), other),
    }
}

/// Collect a normalized product: constants folded, one exp factor with a
/// normalized exponent sum, powers of equal bases added, factors sorted.
fn normalize_product(parts: Vec<Expr>) -> Expr {
    let mut konst = rational::rat_one();
    let mut exp_arg: Vec<Expr> = Vec::new();
    // base -> accumulated rational exponent
    let mut powers: Vec<(Expr, Rat)> = Vec::new();
    let mut opaque: Vec<Expr> = Vec::new();

    fn push_pow(powers: &mut Vec<(Expr, Rat)>, base: Expr, q: Rat) {
        if let Some(slot) = powers.iter_mut().find(|(b, _)| *b == base) {
            slot.1 += q;
        } else {
            powers.push((base, q));
        }
    }

    let mut stack = parts;
    while let Some(p) = stack.pop() {
        match p {
            Expr::Const(c) => konst *= c,
            Expr::Prod(fs) => stack.extend(fs),
            Expr::Exp(a) => exp_arg.push(*a),
            Expr::IntPow(b, k) => push_pow(&mut powers, *b, rational::rat_int(k)),
            Expr::RatPow(b, q) => push_pow(&mut powers, *b, q),
            Expr::Sym(_) | Expr::Sum(_) | Expr::Ln(_) => {
                push_pow(&mut powers, p, rational::rat_one())
            }
            f @ Expr::Func(_) => opaque.push(f),
        }
    }
    if konst.is_zero() {
        return Expr::zero();
    }
    let mut out: Vec<Expr> = Vec::new();
    for (base, q) in powers {
        if q.is_zero() {
            continue;
        }
        if rational::is_integer(&q) {
            use num_traits::ToPrimitive;
            out.push(pow_int(base, q.numer().to_i64().expect("small exponent")));
        } else {
            match pow_rat(base.clone(), q.clone()) {
                Ok(p) => out.push(p),
                Err(_) => out.push(Expr::RatPow(Box::new(base), q)),
            }
        }
    }
    if !exp_arg.is_empty() {
        let a = normalize_extended(&add(exp_arg));
        out.push(exp_of(a));
    }
    out.extend(opaque);
    out.sort();
    if !konst.is_one() {
        out.insert(0, Expr::Const(konst));
    }
    mul(out)
}

/// Structural equality after the local rewrite pass.
pub fn equal_extended(a: &Expr, b: &Expr) -> bool {
    normalize_extended(&sub(a.clone(), b.clone())).is_zero()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    UnboundSymbol(Symbol),
    UnboundFunction(alloc::string::String),
    NonFinite,
}

impl core::fmt::Display for EvalError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EvalError::UnboundSymbol(s) => write!(f, "unbound symbol `{s}` in numeric evaluation"),
            EvalError::UnboundFunction(n) => write!(f, "unbound function `{n}`"),
            EvalError::NonFinite => write!(f, "non-finite value during evaluation"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EvalError {}

/// Numeric evaluation; `funcs(name, primes, arg)` supplies opaque function
/// values.
pub fn eval_f64(
    e: &Expr,
    syms: &dyn Fn(&Symbol) -> Option<f64>,
    funcs: &dyn Fn(&str, u32, f64) -> Option<f64>,
) -> Result<f64, EvalError> {
    let v = match e {
        Expr::Const(c) => rational::to_f64(c),
        Expr::Sym(s) => syms(s).ok_or_else(|| EvalError::UnboundSymbol(s.clone()))?,
        Expr::Sum(terms) => {
            let mut acc = 0.0;
            for t in terms {
                acc += eval_f64(t, syms, funcs)?;
            }
            acc
        }
        Expr::Prod(factors) => {
            let mut acc = 1.0;
            for f in factors {
                acc *= eval_f64(f, syms, funcs)?;
            }
            acc
        }
        Expr::IntPow(b, k) => crate::fmath::powi(eval_f64(b, syms, funcs)?, *k),
        Expr::RatPow(b, q) => crate::fmath::pow(eval_f64(b, syms, funcs)?, rational::to_f64(q)),
        Expr::Exp(a) => crate::fmath::exp(eval_f64(a, syms, funcs)?),
        Expr::Ln(a) => crate::fmath::ln(eval_f64(a, syms, funcs)?),
        Expr::Func(f) => {
            let a = eval_f64(&f.arg, syms, funcs)?;
            funcs(&f.name, f.primes, a)
                .ok_or_else(|| EvalError::UnboundFunction(f.name.as_ref().into()))?
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite)
    }
}

impl Expr {
    /// Convenience for negative-or-positive leading constant inspection used
    /// by the printer.
    pub(crate) fn leading_const_negative(&self) -> bool {
        match self {
            Expr::Const(c) => c.is_negative(),
            Expr::Prod(fs) => matches!(fs.first(), Some(Expr::Const(c)) if c.is_negative()),
            _ => false,
        }
    }
}
