//! Characteristic method for group-invariant solutions: characteristics,
//! invariants of affine-diagonal generators, similarity ansätze, and the
//! symbolic derivation of the reduced ODE system.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::exprcore::poly::PolyForm;
use crate::exprcore::rational::{self, rat_int, rat_one, rat_zero, Rat};
use crate::exprcore::symbol::{Symbol, SymbolKind};
use crate::exprcore::{self, varset, Expr};
use crate::jet::{JetCoord, PdeSystem};
use crate::prolong::VectorField;

use num_traits::{One, Signed, ToPrimitive, Zero};

/// Characteristics `Q_α = φ_α − Σ_i ξ^i u^α_i`, linear in first-order jets.
#[derive(Debug, Clone)]
pub struct Characteristic {
    pub q: Vec<Expr>,
}

pub fn characteristic(x: &VectorField, sys: &PdeSystem) -> Characteristic {
    let ctx = sys.context();
    let n_ind = sys.independents().len();
    let q = (0..sys.n_dependents())
        .map(|alpha| {
            let mut terms = alloc::vec![x.phi[alpha].clone()];
            for i in 0..n_ind {
                let jet = JetCoord::base(alpha, n_ind).bump(i).symbol(ctx);
                terms.push(exprcore::neg(exprcore::mul2(
                    x.xi[i].clone(),
                    Expr::sym(&jet),
                )));
            }
            exprcore::add(terms)
        })
        .collect();
    Characteristic { q }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReduceError {
    /// A component is outside the affine-diagonal class; names the offender.
    OutsideAffineClass { component: String },
    /// Both ξ components vanish: nothing to reduce along.
    NoReductionDirection,
    /// Mixed scaling+translation in one coordinate (a ≠ 0 and b ≠ 0).
    UnsupportedMixedComponent { component: String },
    /// Terms of one equation do not share a single coordinate factor.
    ResidualCoordinate { equation: usize, detail: String },
    UnsupportedTerm { detail: String },
    /// Systems with other than two independent variables.
    UnsupportedSystem,
}

impl core::fmt::Display for ReduceError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ReduceError::OutsideAffineClass { component } => {
                write!(f, "component `{component}` is outside the affine-diagonal class")
            }
            ReduceError::NoReductionDirection => {
                f.write_str("both independent components vanish; no similarity variable")
            }
            ReduceError::UnsupportedMixedComponent { component } => write!(
                f,
                "component `{component}` mixes scaling and translation in one coordinate"
            ),
            ReduceError::ResidualCoordinate { equation, detail } => write!(
                f,
                "equation {equation} keeps residual coordinate dependence after cancellation: {detail}"
            ),
            ReduceError::UnsupportedTerm { detail } => write!(f, "unsupported term: {detail}"),
            ReduceError::UnsupportedSystem => {
                f.write_str("similarity reduction requires exactly two independent variables")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ReduceError {}

/// How the similarity variable combines the two independents; the data
/// needed to eliminate the second coordinate from substituted equations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimilarityShape {
    /// `s = y * x^m` (covers `s = y` at `m = 0`)
    Power { m: Rat },
    /// `s = y - k ln x`
    LogX { k: Rat },
    /// `s = x - k ln y`
    LogY { k: Rat },
    /// `s = y - t x`
    Translation { t: Rat },
    /// `s = x`
    CoordX,
}

/// Structured per-dependent prefactor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prefactor {
    One,
    PowerX(Rat),
    PowerY(Rat),
    ExpX(Rat),
    ExpY(Rat),
}

impl Prefactor {
    pub fn to_expr(&self, sys: &PdeSystem) -> Expr {
        let x = Expr::sym(&sys.independents()[0]);
        let y = Expr::sym(&sys.independents()[1]);
        match self {
            Prefactor::One => Expr::one(),
            Prefactor::PowerX(q) => exprcore::pow_rat(x, q.clone()).expect("symbol base"),
            Prefactor::PowerY(q) => exprcore::pow_rat(y, q.clone()).expect("symbol base"),
            Prefactor::ExpX(q) => exprcore::exp_of(exprcore::mul2(Expr::Const(q.clone()), x)),
            Prefactor::ExpY(q) => exprcore::exp_of(exprcore::mul2(Expr::Const(q.clone()), y)),
        }
    }
}

/// Similarity ansatz `u^α = p_α(x, y) · F_α(s(x, y))` with one independent
/// shape function per dependent.
#[derive(Debug, Clone)]
pub struct SimilarityAnsatz {
    pub s: Expr,
    pub shape: SimilarityShape,
    pub prefactors: Vec<Prefactor>,
    /// Shape function names, `F<dependent>`.
    pub shape_fns: Vec<String>,
    pub s_symbol: Symbol,
    pub domain_note: String,
}

impl SimilarityAnsatz {
    /// `u^α` as an expression in (x, y).
    pub fn dependent_expr(&self, alpha: usize, sys: &PdeSystem) -> Expr {
        exprcore::mul2(
            self.prefactors[alpha].to_expr(sys),
            exprcore::func(&self.shape_fns[alpha], 0, self.s.clone()),
        )
    }

    /// Substitution map sending every jet coordinate of the system (up to
    /// its maximum order) to the corresponding derivative of the ansatz.
    pub fn jet_substitution(&self, sys: &PdeSystem) -> BTreeMap<Symbol, Expr> {
        let ctx = sys.context();
        let mut map = BTreeMap::new();
        for jc in sys.jets_up_to(sys.max_order() + 1) {
            let mut e = self.dependent_expr(jc.dep, sys);
            for (i, &count) in jc.multi.iter().enumerate() {
                for _ in 0..count {
                    e = exprcore::diff(&e, &sys.independents()[i]);
                }
            }
            map.insert(jc.symbol(ctx), e);
        }
        map
    }
}

/// Affine data of one component: `coefficient * coordinate + offset`.
fn affine_parts(comp: &Expr, coord: &Symbol) -> Option<(Rat, Rat)> {
    for s in exprcore::free_symbols(comp) {
        if s != *coord {
            return None;
        }
    }
    let vars = varset(alloc::vec![coord.clone()]);
    let p = PolyForm::from_expr(comp, &vars).ok()?;
    if p.degree_in(coord) > 1 {
        return None;
    }
    Some((
        p.coefficient_of(coord, 1).constant_value()?,
        p.coefficient_of(coord, 0).constant_value()?,
    ))
}

/// Similarity variable and prefactors of an affine-diagonal generator:
/// `ξ¹ = a x + b`, `ξ² = c y + d`, `φ_α = λ_α u^α`.
pub fn invariants(x: &VectorField, sys: &PdeSystem) -> Result<SimilarityAnsatz, ReduceError> {
    if sys.independents().len() != 2 {
        return Err(ReduceError::UnsupportedSystem);
    }
    let xs = &sys.independents()[0];
    let ys = &sys.independents()[1];

    let (a, b) = affine_parts(&x.xi[0], xs).ok_or_else(|| ReduceError::OutsideAffineClass {
        component: alloc::format!("xi_{}", xs.name()),
    })?;
    let (c, d) = affine_parts(&x.xi[1], ys).ok_or_else(|| ReduceError::OutsideAffineClass {
        component: alloc::format!("xi_{}", ys.name()),
    })?;
    if !a.is_zero() && !b.is_zero() {
        return Err(ReduceError::UnsupportedMixedComponent {
            component: alloc::format!("xi_{}", xs.name()),
        });
    }
    if !c.is_zero() && !d.is_zero() {
        return Err(ReduceError::UnsupportedMixedComponent {
            component: alloc::format!("xi_{}", ys.name()),
        });
    }
    let mut lambdas = Vec::new();
    for (alpha, dep) in sys.dependents().iter().enumerate() {
        let (lam, offset) =
            affine_parts(&x.phi[alpha], dep).ok_or_else(|| ReduceError::OutsideAffineClass {
                component: alloc::format!("phi_{}", dep.name()),
            })?;
        if !offset.is_zero() {
            return Err(ReduceError::OutsideAffineClass {
                component: alloc::format!("phi_{}", dep.name()),
            });
        }
        lambdas.push(lam);
    }

    let x_expr = Expr::sym(xs);
    let y_expr = Expr::sym(ys);
    let s_symbol = Symbol::new("s", SymbolKind::FunctionArg);
    let shape_fns: Vec<String> = sys
        .dependents()
        .iter()
        .map(|dep| alloc::format!("F{}", dep.name()))
        .collect();

    let powers_x = |lambdas: &[Rat], a: &Rat| -> Vec<Prefactor> {
        lambdas
            .iter()
            .map(|l| {
                let q = l.clone() / a.clone();
                if q.is_zero() {
                    Prefactor::One
                } else {
                    Prefactor::PowerX(q)
                }
            })
            .collect()
    };

    let (s, shape, prefactors, domain) = if !a.is_zero() {
        let prefactors = powers_x(&lambdas, &a);
        if !c.is_zero() {
            // both scalings: s = y x^(-c/a)
            let m = -c.clone() / a.clone();
            let s = if m.is_zero() {
                y_expr
            } else {
                exprcore::mul2(
                    y_expr,
                    exprcore::pow_rat(x_expr, m.clone()).expect("symbol base"),
                )
            };
            (s, SimilarityShape::Power { m }, prefactors, "x > 0")
        } else if !d.is_zero() {
            // scaling in x, translation in y: s = y - (d/a) ln x
            let k = d.clone() / a.clone();
            let s = exprcore::sub(
                y_expr,
                exprcore::mul2(Expr::Const(k.clone()), exprcore::ln_of(x_expr)),
            );
            (s, SimilarityShape::LogX { k }, prefactors, "x > 0")
        } else {
            // pure x-scaling: invariants are y itself
            (
                y_expr,
                SimilarityShape::Power { m: rat_zero() },
                prefactors,
                "x > 0",
            )
        }
    } else if !b.is_zero() {
        let exp_x: Vec<Prefactor> = lambdas
            .iter()
            .map(|l| {
                let q = l.clone() / b.clone();
                if q.is_zero() {
                    Prefactor::One
                } else {
                    Prefactor::ExpX(q)
                }
            })
            .collect();
        if !c.is_zero() {
            // translation in x, scaling in y: s = x - (b/c) ln y
            let k = b.clone() / c.clone();
            let s = exprcore::sub(
                x_expr,
                exprcore::mul2(Expr::Const(k.clone()), exprcore::ln_of(y_expr)),
            );
            let prefactors = lambdas
                .iter()
                .map(|l| {
                    let q = l.clone() / c.clone();
                    if q.is_zero() {
                        Prefactor::One
                    } else {
                        Prefactor::PowerY(q)
                    }
                })
                .collect();
            (s, SimilarityShape::LogY { k }, prefactors, "y > 0")
        } else if !d.is_zero() {
            // both translations: s = y - (d/b) x
            let t = d.clone() / b.clone();
            let s = exprcore::sub(y_expr, exprcore::mul2(Expr::Const(t.clone()), x_expr));
            (s, SimilarityShape::Translation { t }, exp_x, "")
        } else {
            // pure x-translation: s = y
            (
                y_expr,
                SimilarityShape::Power { m: rat_zero() },
                exp_x,
                "",
            )
        }
    } else if !c.is_zero() {
        // pure y-scaling: functions of x
        let prefactors = lambdas
            .iter()
            .map(|l| {
                let q = l.clone() / c.clone();
                if q.is_zero() {
                    Prefactor::One
                } else {
                    Prefactor::PowerY(q)
                }
            })
            .collect();
        (x_expr, SimilarityShape::CoordX, prefactors, "y > 0")
    } else if !d.is_zero() {
        // pure y-translation: functions of x
        let prefactors = lambdas
            .iter()
            .map(|l| {
                let q = l.clone() / d.clone();
                if q.is_zero() {
                    Prefactor::One
                } else {
                    Prefactor::ExpY(q)
                }
            })
            .collect();
        (x_expr, SimilarityShape::CoordX, prefactors, "")
    } else {
        return Err(ReduceError::NoReductionDirection);
    };

    Ok(SimilarityAnsatz {
        s,
        shape,
        prefactors,
        shape_fns,
        s_symbol,
        domain_note: domain.to_string(),
    })
}

/// One multiplicative term of a reduced equation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OdeTerm {
    pub s_pow: Rat,
    /// parameter -> integer exponent
    pub params: BTreeMap<Symbol, i64>,
    /// (dependent index, prime count) -> multiplicity
    pub funcs: BTreeMap<(usize, u32), u32>,
    pub coeff: Rat,
}

impl OdeTerm {
    fn max_primes(&self) -> u32 {
        self.funcs.keys().map(|&(_, p)| p).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct OdeEquation {
    pub terms: Vec<OdeTerm>,
}

/// The reduced ODE system in the similarity variable.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub shape_fns: Vec<String>,
    pub s_symbol: Symbol,
    pub equations: Vec<OdeEquation>,
    /// Highest derivative order of each shape function across the system.
    pub orders: Vec<u32>,
}

impl ReducedSystem {
    pub fn equation_expr(&self, k: usize) -> Expr {
        let terms = self.equations[k]
            .terms
            .iter()
            .map(|t| {
                let mut factors = alloc::vec![Expr::Const(t.coeff.clone())];
                if !t.s_pow.is_zero() {
                    factors.push(
                        exprcore::pow_rat(Expr::sym(&self.s_symbol), t.s_pow.clone())
                            .expect("symbol base"),
                    );
                }
                for (p, e) in &t.params {
                    factors.push(exprcore::pow_int(Expr::sym(p), *e));
                }
                for (&(dep, primes), &mult) in &t.funcs {
                    let f = exprcore::func(
                        &self.shape_fns[dep],
                        primes,
                        Expr::sym(&self.s_symbol),
                    );
                    factors.push(exprcore::pow_int(f, mult as i64));
                }
                exprcore::mul(factors)
            })
            .collect();
        exprcore::add(terms)
    }
}

impl core::fmt::Display for ReducedSystem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        for k in 0..self.equations.len() {
            writeln!(f, "{} = 0", self.equation_expr(k))?;
        }
        Ok(())
    }
}

/// Working term during expansion: explicit coordinate content still
/// present.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct RawTerm {
    x_pow: Rat,
    y_pow: Rat,
    s_pow: Rat,
    exp_x: Rat,
    exp_y: Rat,
    params: BTreeMap<Symbol, i64>,
    funcs: BTreeMap<(usize, u32), u32>,
}

impl RawTerm {
    fn unit() -> Self {
        RawTerm {
            x_pow: rat_zero(),
            y_pow: rat_zero(),
            s_pow: rat_zero(),
            exp_x: rat_zero(),
            exp_y: rat_zero(),
            params: BTreeMap::new(),
            funcs: BTreeMap::new(),
        }
    }

    fn mul(&self, other: &RawTerm) -> RawTerm {
        let mut out = self.clone();
        out.x_pow += other.x_pow.clone();
        out.y_pow += other.y_pow.clone();
        out.s_pow += other.s_pow.clone();
        out.exp_x += other.exp_x.clone();
        out.exp_y += other.exp_y.clone();
        for (k, v) in &other.params {
            *out.params.entry(k.clone()).or_insert(0) += v;
            if out.params[k] == 0 {
                out.params.remove(k);
            }
        }
        for (k, v) in &other.funcs {
            *out.funcs.entry(*k).or_insert(0) += v;
        }
        out
    }
}

struct Expander<'a> {
    sys: &'a PdeSystem,
    ansatz: &'a SimilarityAnsatz,
}

impl<'a> Expander<'a> {
    /// Flatten an extended expression into (term, coefficient) pairs.
    fn expand(&self, e: &Expr) -> Result<Vec<(RawTerm, Rat)>, ReduceError> {
        let fail = |detail: String| Err(ReduceError::UnsupportedTerm { detail });
        match e {
            Expr::Const(c) => Ok(alloc::vec![(RawTerm::unit(), c.clone())]),
            Expr::Sym(s) => {
                let mut t = RawTerm::unit();
                if *s == self.sys.independents()[0] {
                    t.x_pow = rat_one();
                } else if *s == self.sys.independents()[1] {
                    t.y_pow = rat_one();
                } else if s.kind() == SymbolKind::Parameter {
                    t.params.insert(s.clone(), 1);
                } else {
                    return fail(alloc::format!("unexpected symbol `{s}`"));
                }
                Ok(alloc::vec![(t, rat_one())])
            }
            Expr::Sum(parts) => {
                let mut out = Vec::new();
                for p in parts {
                    out.extend(self.expand(p)?);
                }
                Ok(out)
            }
            Expr::Prod(parts) => {
                let mut acc = alloc::vec![(RawTerm::unit(), rat_one())];
                for p in parts {
                    let rhs = self.expand(p)?;
                    let mut next = Vec::with_capacity(acc.len() * rhs.len());
                    for (ta, ca) in &acc {
                        for (tb, cb) in &rhs {
                            next.push((ta.mul(tb), ca.clone() * cb));
                        }
                    }
                    acc = next;
                }
                Ok(acc)
            }
            Expr::IntPow(b, k) => {
                let base = self.expand(b)?;
                if *k >= 0 {
                    let mut acc = alloc::vec![(RawTerm::unit(), rat_one())];
                    for _ in 0..*k {
                        let mut next = Vec::new();
                        for (ta, ca) in &acc {
                            for (tb, cb) in &base {
                                next.push((ta.mul(tb), ca.clone() * cb));
                            }
                        }
                        acc = next;
                    }
                    Ok(acc)
                } else if base.len() == 1 && base[0].0.funcs.is_empty() {
                    let (t, c) = &base[0];
                    let mut inv = RawTerm::unit();
                    let k = rat_int(*k);
                    inv.x_pow = t.x_pow.clone() * &k;
                    inv.y_pow = t.y_pow.clone() * &k;
                    inv.s_pow = t.s_pow.clone() * &k;
                    inv.exp_x = t.exp_x.clone() * &k;
                    inv.exp_y = t.exp_y.clone() * &k;
                    let ki = k.to_integer().to_i64().unwrap_or(-1);
                    for (p, e) in &t.params {
                        inv.params.insert(p.clone(), e * ki);
                    }
                    Ok(alloc::vec![(inv, rational::rat_pow(c, ki))])
                } else {
                    fail("negative power of a composite expression".into())
                }
            }
            Expr::RatPow(b, q) => match &**b {
                Expr::Sym(s) if *s == self.sys.independents()[0] => {
                    let mut t = RawTerm::unit();
                    t.x_pow = q.clone();
                    Ok(alloc::vec![(t, rat_one())])
                }
                Expr::Sym(s) if *s == self.sys.independents()[1] => {
                    let mut t = RawTerm::unit();
                    t.y_pow = q.clone();
                    Ok(alloc::vec![(t, rat_one())])
                }
                other => fail(alloc::format!("rational power of `{other:?}`")),
            },
            Expr::Exp(arg) => {
                let inner = self.expand(arg)?;
                let mut t = RawTerm::unit();
                for (ti, ci) in inner {
                    if ti.x_pow.is_one()
                        && ti.y_pow.is_zero()
                        && ti.funcs.is_empty()
                        && ti.params.is_empty()
                    {
                        t.exp_x += ci;
                    } else if ti.y_pow.is_one()
                        && ti.x_pow.is_zero()
                        && ti.funcs.is_empty()
                        && ti.params.is_empty()
                    {
                        t.exp_y += ci;
                    } else {
                        return fail("exponential of a non-linear argument".into());
                    }
                }
                Ok(alloc::vec![(t, rat_one())])
            }
            Expr::Ln(_) => fail("logarithm outside a shape-function argument".into()),
            Expr::Func(app) => {
                if app.arg.as_ref() != &self.ansatz.s {
                    return fail(alloc::format!(
                        "shape function argument differs from the similarity variable: {}",
                        app.arg
                    ));
                }
                let dep = self
                    .ansatz
                    .shape_fns
                    .iter()
                    .position(|n| n.as_str() == app.name.as_ref())
                    .ok_or(ReduceError::UnsupportedTerm {
                        detail: alloc::format!("unknown shape function `{}`", app.name),
                    })?;
                let mut t = RawTerm::unit();
                t.funcs.insert((dep, app.primes), 1);
                Ok(alloc::vec![(t, rat_one())])
            }
        }
    }
}

/// Substitute the ansatz into every equation, eliminate the second
/// coordinate through the similarity variable, cancel the common
/// coordinate factor, and normalize the leading derivative.
pub fn reduce_system(
    sys: &PdeSystem,
    ansatz: &SimilarityAnsatz,
) -> Result<ReducedSystem, ReduceError> {
    let jet_map = ansatz.jet_substitution(sys);
    let expander = Expander { sys, ansatz };
    let mut equations = Vec::new();
    for (eq_idx, eq) in sys.equations().iter().enumerate() {
        let substituted = exprcore::substitute(eq, &jet_map);
        let mut raw = expander.expand(&substituted)?;

        // eliminate the second coordinate through s
        for (t, _) in raw.iter_mut() {
            match &ansatz.shape {
                SimilarityShape::Power { m } => {
                    // y = s x^(-m)
                    t.s_pow += t.y_pow.clone();
                    t.x_pow -= m.clone() * &t.y_pow;
                    t.y_pow = rat_zero();
                }
                SimilarityShape::CoordX => {
                    t.s_pow += t.x_pow.clone();
                    t.x_pow = rat_zero();
                }
                SimilarityShape::LogX { .. } | SimilarityShape::LogY { .. } => {}
                SimilarityShape::Translation { .. } => {}
            }
        }
        if matches!(ansatz.shape, SimilarityShape::Translation { .. }) {
            // y = s + t x with integer y-powers
            let t_slope = match &ansatz.shape {
                SimilarityShape::Translation { t } => t.clone(),
                _ => unreachable!(),
            };
            let mut expanded = Vec::new();
            for (term, coeff) in raw {
                if term.y_pow.is_zero() {
                    expanded.push((term, coeff));
                    continue;
                }
                let q = term
                    .y_pow
                    .to_integer()
                    .to_i64()
                    .filter(|_| rational::is_integer(&term.y_pow) && !term.y_pow.is_negative())
                    .ok_or(ReduceError::UnsupportedTerm {
                        detail: "fractional power of the translated coordinate".into(),
                    })?;
                let mut binom = rat_one();
                for j in 0..=q {
                    // y^q = Σ C(q,j) s^j (t x)^(q-j)
                    let mut t2 = term.clone();
                    t2.y_pow = rat_zero();
                    t2.s_pow += rat_int(j);
                    t2.x_pow += rat_int(q - j);
                    let c2 = coeff.clone()
                        * &binom
                        * rational::rat_pow(&t_slope, q - j);
                    expanded.push((t2, c2));
                    binom = binom * rat_int(q - j) / rat_int(j as i64 + 1);
                }
            }
            raw = expanded;
        }

        // merge like terms
        let mut merged: BTreeMap<RawTerm, Rat> = BTreeMap::new();
        for (t, c) in raw {
            let slot = merged.entry(t).or_insert_with(rat_zero);
            *slot += c;
        }
        merged.retain(|_, c| !c.is_zero());

        // every term must carry the same coordinate signature
        let mut terms: Vec<(RawTerm, Rat)> = merged.into_iter().collect();
        if terms.is_empty() {
            equations.push(OdeEquation { terms: Vec::new() });
            continue;
        }
        let sig = (
            terms[0].0.x_pow.clone(),
            terms[0].0.y_pow.clone(),
            terms[0].0.exp_x.clone(),
            terms[0].0.exp_y.clone(),
        );
        for (t, _) in &terms {
            if (t.x_pow.clone(), t.y_pow.clone(), t.exp_x.clone(), t.exp_y.clone()) != sig {
                return Err(ReduceError::ResidualCoordinate {
                    equation: eq_idx,
                    detail: alloc::format!(
                        "coordinate factors {:?} vs {:?}",
                        (&t.x_pow, &t.y_pow, &t.exp_x, &t.exp_y),
                        sig
                    ),
                });
            }
        }
        for (t, _) in terms.iter_mut() {
            t.x_pow = rat_zero();
            t.y_pow = rat_zero();
            t.exp_x = rat_zero();
            t.exp_y = rat_zero();
        }

        // leading derivative: highest prime order, later dependent on ties;
        // scale its rational coefficient to one
        let mut ode: Vec<OdeTerm> = terms
            .into_iter()
            .map(|(t, coeff)| OdeTerm {
                s_pow: t.s_pow,
                params: t.params,
                funcs: t.funcs,
                coeff,
            })
            .collect();
        let lead = ode
            .iter()
            .max_by_key(|t| {
                let primes = t.max_primes();
                let dep = t
                    .funcs
                    .keys()
                    .filter(|&&(_, p)| p == primes)
                    .map(|&(d, _)| d)
                    .max()
                    .unwrap_or(0);
                (primes, dep, t.params.is_empty(), t.s_pow.is_zero())
            })
            .map(|t| t.coeff.clone());
        if let Some(c) = lead {
            let inv = c.recip();
            for t in ode.iter_mut() {
                t.coeff *= inv.clone();
            }
        }
        ode.sort_by(|a, b| {
            b.max_primes()
                .cmp(&a.max_primes())
                .then_with(|| a.funcs.cmp(&b.funcs))
                .then_with(|| a.s_pow.cmp(&b.s_pow))
                .then_with(|| a.params.cmp(&b.params))
        });
        equations.push(OdeEquation { terms: ode });
    }

    let mut orders = alloc::vec![0u32; sys.n_dependents()];
    for eq in &equations {
        for t in &eq.terms {
            for &(dep, primes) in t.funcs.keys() {
                orders[dep] = orders[dep].max(primes);
            }
        }
    }
    Ok(ReducedSystem {
        shape_fns: ansatz.shape_fns.clone(),
        s_symbol: ansatz.s_symbol.clone(),
        equations,
        orders,
    })
}

/// Symbolic check that the ansatz annihilates every characteristic of the
/// generator.
pub fn verify_characteristics_vanish(
    x: &VectorField,
    ansatz: &SimilarityAnsatz,
    sys: &PdeSystem,
) -> bool {
    let jet_map = ansatz.jet_substitution(sys);
    let expander = Expander { sys, ansatz };
    for q in characteristic(x, sys).q {
        let substituted = exprcore::substitute(&q, &jet_map);
        match expander.expand(&substituted) {
            Ok(raw) => {
                let mut merged: BTreeMap<RawTerm, Rat> = BTreeMap::new();
                for (t, c) in raw {
                    let slot = merged.entry(t).or_insert_with(rat_zero);
                    *slot += c;
                }
                if merged.values().any(|c| !c.is_zero()) {
                    return false;
                }
            }
            Err(_) => return false,
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testsys;
    use exprcore::parse_expr;

    fn field(sys: &PdeSystem, xi: [&str; 2], phi: [&str; 3]) -> VectorField {
        let ctx = sys.context();
        VectorField {
            xi: xi.iter().map(|t| parse_expr(t, ctx).unwrap()).collect(),
            phi: phi.iter().map(|t| parse_expr(t, ctx).unwrap()).collect(),
        }
    }

    /// The ten reduction cases: generator components, expected similarity
    /// variable, expected prefactors.
    fn ten_cases(sys: &PdeSystem) -> Vec<(&'static str, VectorField, &'static str, [&'static str; 3])> {
        alloc::vec![
            ("X1", field(sys, ["1", "0"], ["0", "0", "0"]), "y", ["1", "1", "1"]),
            ("X2", field(sys, ["0", "1"], ["0", "0", "0"]), "x", ["1", "1", "1"]),
            ("X3", field(sys, ["x", "0"], ["u", "0", "theta"]), "y", ["x", "1", "x"]),
            (
                "X4",
                field(sys, ["2*x", "y"], ["0", "-v", "-2*theta"]),
                "y*x^(-1/2)",
                ["1", "x^(-1/2)", "x^(-1)"],
            ),
            (
                "X1+X2",
                field(sys, ["1", "1"], ["0", "0", "0"]),
                "y - x",
                ["1", "1", "1"],
            ),
            (
                "X2-X1",
                field(sys, ["-1", "1"], ["0", "0", "0"]),
                "y + x",
                ["1", "1", "1"],
            ),
            (
                "X2+X3",
                field(sys, ["x", "1"], ["u", "0", "theta"]),
                "y - ln(x)",
                ["x", "1", "x"],
            ),
            (
                "X3-X2",
                field(sys, ["x", "-1"], ["u", "0", "theta"]),
                "y + ln(x)",
                ["x", "1", "x"],
            ),
            (
                "X3+X4",
                field(sys, ["3*x", "y"], ["u", "-v", "-theta"]),
                "y*x^(-1/3)",
                ["x^(1/3)", "x^(-1/3)", "x^(-1/3)"],
            ),
            (
                "X4-X3",
                field(sys, ["x", "y"], ["-u", "-v", "-3*theta"]),
                "y*x^(-1)",
                ["x^(-1)", "x^(-1)", "x^(-3)"],
            ),
        ]
    }

    #[test]
    fn characteristics_match_hand_forms() {
        let sys = testsys::rnc();
        let ctx = sys.context();
        let x1 = field(&sys, ["1", "0"], ["0", "0", "0"]);
        let q1 = characteristic(&x1, &sys);
        for (q, expect) in q1.q.iter().zip(["-u_x", "-v_x", "-theta_x"]) {
            assert!(exprcore::poly_equal(q, &parse_expr(expect, ctx).unwrap()).unwrap());
        }
        let x3 = field(&sys, ["x", "0"], ["u", "0", "theta"]);
        let q3 = characteristic(&x3, &sys);
        for (q, expect) in q3.q.iter().zip(["u - x*u_x", "-x*v_x", "theta - x*theta_x"]) {
            assert!(exprcore::poly_equal(q, &parse_expr(expect, ctx).unwrap()).unwrap());
        }
        let x4 = field(&sys, ["2*x", "y"], ["0", "-v", "-2*theta"]);
        let q4 = characteristic(&x4, &sys);
        assert!(exprcore::poly_equal(
            &q4.q[1],
            &parse_expr("-v - 2*x*v_x - y*v_y", ctx).unwrap()
        )
        .unwrap());
    }

    #[test]
    fn ten_cases_produce_the_printed_ansatz_forms() {
        let sys = testsys::rnc();
        let ctx = sys.context();
        for (label, f, s_expect, p_expect) in ten_cases(&sys) {
            let ansatz = invariants(&f, &sys).unwrap_or_else(|e| panic!("{label}: {e}"));
            let s_want = parse_expr(s_expect, ctx).unwrap();
            assert!(
                exprcore::equal_extended(&ansatz.s, &s_want),
                "{label}: s = {} want {}",
                ansatz.s,
                s_want
            );
            for (alpha, want) in p_expect.iter().enumerate() {
                let got = ansatz.prefactors[alpha].to_expr(&sys);
                let want = parse_expr(want, ctx).unwrap();
                assert!(
                    exprcore::equal_extended(&got, &want),
                    "{label}: p[{alpha}] = {got} want {want}"
                );
            }
        }
    }

    #[test]
    fn every_ansatz_annihilates_its_characteristics() {
        let sys = testsys::rnc();
        for (label, f, _, _) in ten_cases(&sys) {
            let ansatz = invariants(&f, &sys).unwrap();
            assert!(
                verify_characteristics_vanish(&f, &ansatz, &sys),
                "{label}: Q does not vanish on the ansatz"
            );
        }
    }

    #[test]
    fn reduced_systems_are_coordinate_free() {
        let sys = testsys::rnc();
        for (label, f, _, _) in ten_cases(&sys) {
            let ansatz = invariants(&f, &sys).unwrap();
            let rs = reduce_system(&sys, &ansatz).unwrap_or_else(|e| panic!("{label}: {e}"));
            assert_eq!(rs.equations.len(), 3, "{label}");
            for k in 0..3 {
                let e = rs.equation_expr(k);
                for s in exprcore::free_symbols(&e) {
                    assert!(
                        s.kind() != SymbolKind::Independent,
                        "{label}: residual coordinate {s} in {e}"
                    );
                }
            }
        }
    }

    #[test]
    fn x4_reduction_matches_hand_derivation() {
        // continuity: -1/2 s Fu' + Fv' = 0; momentum:
        // Fu'' + 1/2 s Fu Fu' - Fv Fu' + Gr calpha Ftheta = 0
        let sys = testsys::rnc();
        let f = field(&sys, ["2*x", "y"], ["0", "-v", "-2*theta"]);
        let ansatz = invariants(&f, &sys).unwrap();
        let rs = reduce_system(&sys, &ansatz).unwrap();
        let mut ctx = crate::exprcore::SymbolContext::new();
        ctx.add_symbol("s", SymbolKind::FunctionArg);
        ctx.add_parameter("Gr");
        ctx.add_parameter("Pr");
        ctx.add_parameter("R");
        ctx.add_parameter("calpha");
        for name in ["Fu", "Fv", "Ftheta"] {
            ctx.add_function(name);
        }
        let expect_continuity = parse_expr("-1/2*s*Fu'(s) + Fv'(s)", &ctx).unwrap();
        assert!(
            exprcore::equal_extended(&rs.equation_expr(0), &expect_continuity),
            "continuity: {}",
            rs.equation_expr(0)
        );
        let expect_momentum = parse_expr(
            "Fu''(s) + 1/2*s*Fu(s)*Fu'(s) - Fv(s)*Fu'(s) + Gr*calpha*Ftheta(s)",
            &ctx,
        )
        .unwrap();
        assert!(
            exprcore::equal_extended(&rs.equation_expr(1), &expect_momentum),
            "momentum: {}",
            rs.equation_expr(1)
        );
        // energy: (1+4R) Ftheta'' = Pr (1/2 s Fu Ftheta' + Fu Ftheta - Fv Ftheta')
        // normalized on the leading rational part
        let expect_energy = parse_expr(
            "Ftheta''(s) + 4*R*Ftheta''(s) + 1/2*Pr*s*Fu(s)*Ftheta'(s) + Pr*Fu(s)*Ftheta(s) - Pr*Fv(s)*Ftheta'(s)",
            &ctx,
        )
        .unwrap();
        assert!(
            exprcore::equal_extended(&rs.equation_expr(2), &expect_energy),
            "energy: {}",
            rs.equation_expr(2)
        );
    }

    #[test]
    fn x1_and_translation_reductions() {
        let sys = testsys::rnc();
        let mut ctx = crate::exprcore::SymbolContext::new();
        ctx.add_symbol("s", SymbolKind::FunctionArg);
        for name in ["Fu", "Fv", "Ftheta"] {
            ctx.add_function(name);
        }
        // X1: all dependents functions of y; continuity becomes Fv' = 0
        let f1 = field(&sys, ["1", "0"], ["0", "0", "0"]);
        let rs1 = reduce_system(&sys, &invariants(&f1, &sys).unwrap()).unwrap();
        let expect = parse_expr("Fv'(s)", &ctx).unwrap();
        assert!(exprcore::equal_extended(&rs1.equation_expr(0), &expect));

        // X1+X2: s = y - x; continuity becomes -Fu' + Fv' = 0
        let f12 = field(&sys, ["1", "1"], ["0", "0", "0"]);
        let rs12 = reduce_system(&sys, &invariants(&f12, &sys).unwrap()).unwrap();
        let expect12 = parse_expr("-Fu'(s) + Fv'(s)", &ctx).unwrap();
        assert!(
            exprcore::equal_extended(&rs12.equation_expr(0), &expect12),
            "got {}",
            rs12.equation_expr(0)
        );
    }

    #[test]
    fn scaling_flow_preserves_the_solution_family() {
        // For scaling generators, transporting p_α F_α(s) through the flow
        // re-lands in the same family: x^q picks up e^(a q h) while s is
        // fixed, matching the generator weight exactly, so the transported
        // expression is a constant multiple of the original with the same
        // shape function.
        let sys = testsys::rnc();
        let mut ctx = sys.context().clone();
        let h = ctx.add_symbol("h", SymbolKind::GroupParam);
        for (label, f, _, _) in ten_cases(&sys) {
            if !matches!(label, "X3" | "X4" | "X3+X4" | "X4-X3") {
                continue;
            }
            let ansatz = invariants(&f, &sys).unwrap();
            let flow = crate::liealg::flow(&f, &sys, &h).unwrap();
            let mut coord_map = BTreeMap::new();
            for (coord, update) in &flow {
                coord_map.insert(coord.clone(), update.clone());
            }
            // s is invariant under the flow
            let s_moved = exprcore::substitute(&ansatz.s, &coord_map);
            assert!(
                exprcore::equal_extended(&s_moved, &ansatz.s),
                "{label}: s not invariant: {s_moved}"
            );
            // each dependent expression transforms by exactly its weight
            for (alpha, dep) in sys.dependents().iter().enumerate() {
                let expr = ansatz.dependent_expr(alpha, &sys);
                let moved = exprcore::substitute(&expr, &coord_map);
                let (lam, _) = affine_parts(&f.phi[alpha], dep).unwrap();
                let weight = exprcore::exp_of(exprcore::mul2(
                    Expr::Const(lam),
                    Expr::sym(&h),
                ));
                let expect = exprcore::mul2(weight, expr);
                assert!(
                    exprcore::equal_extended(&moved, &expect),
                    "{label}/{dep}: transported {moved}"
                );
            }
        }
    }

    #[test]
    fn class_errors_are_reported() {
        let sys = testsys::rnc();
        // shear generator: xi_y depends on x
        let shear = field(&sys, ["0", "x"], ["0", "u", "0"]);
        match invariants(&shear, &sys) {
            Err(ReduceError::OutsideAffineClass { component }) => {
                assert_eq!(component, "xi_y");
            }
            other => panic!("expected OutsideAffineClass, got {other:?}"),
        }
        // mixed scaling+translation
        let mixed = field(&sys, ["x + 1", "0"], ["0", "0", "0"]);
        assert!(matches!(
            invariants(&mixed, &sys),
            Err(ReduceError::UnsupportedMixedComponent { .. })
        ));
        // pure vertical generator
        let vert = field(&sys, ["0", "0"], ["u", "0", "0"]);
        assert!(matches!(
            invariants(&vert, &sys),
            Err(ReduceError::NoReductionDirection)
        ));
    }
}
