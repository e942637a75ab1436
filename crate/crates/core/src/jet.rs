//! Jet-space bookkeeping: derivative coordinates, total derivative
//! operators, and reduction of expressions modulo a PDE system and its
//! differential consequences.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::exprcore::poly::{substitute_frac, Frac, PolyForm, VarSet};
use crate::exprcore::symbol::{Symbol, SymbolContext, SymbolKind};
use crate::exprcore::{self, varset, Expr};

/// A derivative coordinate: dependent index plus a per-independent
/// multi-index. Order zero is the dependent variable itself.
///
/// The derived `Ord` is the reduction ranking: order first, then dependent
/// index, then reverse-lexicographic multi-index. Every substitution step
/// strictly lowers this ranking, which is what makes reduction terminate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JetCoord {
    pub dep: usize,
    pub multi: Vec<u32>,
}

impl JetCoord {
    pub fn base(dep: usize, n_indep: usize) -> Self {
        JetCoord {
            dep,
            multi: alloc::vec![0; n_indep],
        }
    }

    pub fn order(&self) -> u32 {
        self.multi.iter().sum()
    }

    /// One more derivative in direction `i`.
    pub fn bump(&self, i: usize) -> JetCoord {
        let mut multi = self.multi.clone();
        multi[i] += 1;
        JetCoord {
            dep: self.dep,
            multi,
        }
    }

    pub fn symbol(&self, ctx: &SymbolContext) -> Symbol {
        ctx.jet_symbol(self.dep, &self.multi)
    }

    pub fn from_symbol(ctx: &SymbolContext, s: &Symbol) -> Option<JetCoord> {
        match s.kind() {
            SymbolKind::Dependent => {
                let dep = ctx.dependent_index(s.name())?;
                Some(JetCoord::base(dep, ctx.independents().len()))
            }
            SymbolKind::Jet => {
                let (dep, multi) = ctx.split_jet_name(s.name())?;
                Some(JetCoord { dep, multi })
            }
            _ => None,
        }
    }

    fn revlex_key(&self) -> Vec<u32> {
        self.multi.iter().rev().copied().collect()
    }
}

impl PartialOrd for JetCoord {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for JetCoord {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.dep.cmp(&other.dep))
            .then_with(|| self.revlex_key().cmp(&other.revlex_key()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SystemError {
    Parse { equation: usize, error: exprcore::ParseError },
    NotPolynomial { equation: usize, node_kind: &'static str },
    NoDerivative { equation: usize },
    NotLinearInLeading { equation: usize, leading: String },
    NonParameterCoefficient { equation: usize, leading: String },
    DuplicateLeading { leading: String },
    CyclicRanking { leading: String },
}

impl core::fmt::Display for SystemError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SystemError::Parse { equation, error } => {
                write!(f, "equation {equation}: {error}")
            }
            SystemError::NotPolynomial { equation, node_kind } => {
                write!(f, "equation {equation} is not polynomial in jet coordinates ({node_kind})")
            }
            SystemError::NoDerivative { equation } => {
                write!(f, "equation {equation} contains no derivative coordinate")
            }
            SystemError::NotLinearInLeading { equation, leading } => {
                write!(f, "equation {equation} is not linear in its leading coordinate {leading}")
            }
            SystemError::NonParameterCoefficient { equation, leading } => write!(
                f,
                "equation {equation}: coefficient of leading coordinate {leading} involves non-parameter symbols"
            ),
            SystemError::DuplicateLeading { leading } => {
                write!(f, "two equations share the leading coordinate {leading}")
            }
            SystemError::CyclicRanking { leading } => write!(
                f,
                "solved form for {leading} does not lower the ranking (cyclic substitution)"
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SystemError {}

/// A polynomial PDE system `Δ_ν = 0` in jet coordinates.
#[derive(Debug, Clone)]
pub struct PdeSystem {
    name: String,
    ctx: SymbolContext,
    parameters: Vec<Symbol>,
    equations: Vec<Expr>,
    max_order: u32,
}

impl PdeSystem {
    pub fn new(
        name: &str,
        independents: &[&str],
        dependents: &[&str],
        parameters: &[&str],
        equations: &[&str],
        aliases: &[(&str, &str)],
    ) -> Result<PdeSystem, SystemError> {
        let mut ctx = SymbolContext::new();
        for n in independents {
            ctx.add_independent(n);
        }
        for n in dependents {
            ctx.add_dependent(n);
        }
        let params: Vec<Symbol> = parameters.iter().map(|n| ctx.add_parameter(n)).collect();
        for (a, t) in aliases {
            ctx.add_alias(a, t);
        }
        let mut eqs = Vec::new();
        let mut max_order = 0;
        for (i, text) in equations.iter().enumerate() {
            let e = exprcore::parse_expr(text, &ctx)
                .map_err(|error| SystemError::Parse { equation: i, error })?;
            // polynomial in jets, coefficients polynomial in parameters
            if let Err(np) = exprcore::poly_normalize(&e) {
                return Err(SystemError::NotPolynomial {
                    equation: i,
                    node_kind: np.node_kind,
                });
            }
            for s in exprcore::free_symbols(&e) {
                if let Some(jc) = JetCoord::from_symbol(&ctx, &s) {
                    max_order = max_order.max(jc.order());
                }
            }
            eqs.push(e);
        }
        Ok(PdeSystem {
            name: name.into(),
            ctx,
            parameters: params,
            equations: eqs,
            max_order,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn context(&self) -> &SymbolContext {
        &self.ctx
    }

    pub fn independents(&self) -> &[Symbol] {
        self.ctx.independents()
    }

    pub fn dependents(&self) -> &[Symbol] {
        self.ctx.dependents()
    }

    pub fn parameters(&self) -> &[Symbol] {
        &self.parameters
    }

    pub fn equations(&self) -> &[Expr] {
        &self.equations
    }

    /// Number of dependent variables.
    pub fn n_dependents(&self) -> usize {
        self.ctx.dependents().len()
    }

    /// Maximum derivative order appearing in the equations.
    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    /// All jet coordinates of order `<= max`, ranking order.
    pub fn jets_up_to(&self, max: u32) -> Vec<JetCoord> {
        let n = self.ctx.independents().len();
        let mut out = Vec::new();
        for dep in 0..self.n_dependents() {
            let mut stack = alloc::vec![JetCoord::base(dep, n)];
            let mut seen = alloc::collections::BTreeSet::new();
            while let Some(jc) = stack.pop() {
                if jc.order() > max || !seen.insert(jc.clone()) {
                    continue;
                }
                for i in 0..n {
                    stack.push(jc.bump(i));
                }
                out.push(jc);
            }
        }
        out.sort();
        out
    }

    /// Shared variable list for computations touching jets up to order
    /// `max`: independents, dependents, jets, parameters.
    pub fn base_varset(&self, max: u32) -> VarSet {
        let mut syms: Vec<Symbol> = self.ctx.independents().to_vec();
        syms.extend(self.ctx.dependents().iter().cloned());
        for jc in self.jets_up_to(max) {
            if jc.order() > 0 {
                syms.push(jc.symbol(&self.ctx));
            }
        }
        syms.extend(self.parameters.iter().cloned());
        varset(syms)
    }
}

/// Total derivative of an expression with respect to independent `i`:
/// `D_i e = ∂e/∂x_i + Σ u^α_{J,i} ∂e/∂u^α_J`.
pub fn total_derivative(e: &Expr, i: usize, sys: &PdeSystem) -> Expr {
    let ctx = sys.context();
    let mut terms = alloc::vec![exprcore::diff(e, &ctx.independents()[i])];
    for s in exprcore::free_symbols(e) {
        if let Some(jc) = JetCoord::from_symbol(ctx, &s) {
            let de = exprcore::diff(e, &s);
            if !de.is_zero() {
                terms.push(exprcore::mul2(Expr::sym(&jc.bump(i).symbol(ctx)), de));
            }
        }
    }
    exprcore::add(terms)
}

/// Total derivative on a canonical polynomial; the variable list must
/// already contain the bumped jet symbols.
pub fn total_derivative_poly(p: &PolyForm, i: usize, sys: &PdeSystem, vars: &VarSet) -> PolyForm {
    let ctx = sys.context();
    let mut acc = p.derivative(&ctx.independents()[i]);
    for s in vars.iter() {
        if let Some(jc) = JetCoord::from_symbol(ctx, s) {
            let dp = p.derivative(s);
            if !dp.is_zero() {
                let bumped = PolyForm::var(vars, &jc.bump(i).symbol(ctx));
                acc = acc.add(&dp.mul(&bumped));
            }
        }
    }
    acc
}

/// Substitution table mapping leading jet coordinates (and their
/// differential consequences) to solved right-hand sides. All right-hand
/// sides are fully reduced: no table key appears in any of them, so
/// reduction is a single evaluation pass.
#[derive(Debug, Clone)]
pub struct SolvedForm {
    entries: BTreeMap<JetCoord, Frac>,
    vars: VarSet,
    prolongation_order: u32,
}

impl SolvedForm {
    pub fn entries(&self) -> impl Iterator<Item = (&JetCoord, &Frac)> {
        self.entries.iter()
    }

    pub fn vars(&self) -> &VarSet {
        &self.vars
    }

    pub fn prolongation_order(&self) -> u32 {
        self.prolongation_order
    }

    pub fn get(&self, k: &JetCoord) -> Option<&Frac> {
        self.entries.get(k)
    }

    /// Reduce a polynomial over `vars` (a superset list containing this
    /// table's jet symbols) to its on-shell normal form.
    pub fn reduce_poly(&self, p: &PolyForm, sys: &PdeSystem, vars: &VarSet) -> Frac {
        let ctx = sys.context();
        let map: Vec<Option<Frac>> = vars
            .iter()
            .map(|s| {
                JetCoord::from_symbol(ctx, s)
                    .and_then(|jc| self.entries.get(&jc))
                    .map(|f| Frac {
                        num: f.num.embed(vars),
                        den: f.den.embed(vars),
                    })
            })
            .collect();
        substitute_frac(p, vars, &|i| map[i].clone())
    }
}

/// Pick the leading coordinate of one equation: highest order, ties broken
/// toward the last independent variable, then toward the later dependent.
fn pick_leading(sys: &PdeSystem, eq: &Expr) -> Option<JetCoord> {
    let ctx = sys.context();
    exprcore::free_symbols(eq)
        .iter()
        .filter_map(|s| JetCoord::from_symbol(ctx, s))
        .filter(|jc| jc.order() >= 1)
        .max_by(|a, b| {
            a.order()
                .cmp(&b.order())
                .then_with(|| a.revlex_key().cmp(&b.revlex_key()))
                .then_with(|| a.dep.cmp(&b.dep))
        })
}

/// Solve each equation for its leading coordinate and materialize the
/// differential consequences needed at prolongation order `max_order`
/// (entries up to `max_order + 1`), with every right-hand side reduced to a
/// fixpoint.
pub fn solve_leading(sys: &PdeSystem) -> Result<SolvedForm, SystemError> {
    let n = sys.max_order();
    let target = n + 1;
    let vars = sys.base_varset(target);
    let ctx = sys.context();

    let mut entries: BTreeMap<JetCoord, Frac> = BTreeMap::new();
    for (idx, eq) in sys.equations().iter().enumerate() {
        let leading = pick_leading(sys, eq).ok_or(SystemError::NoDerivative { equation: idx })?;
        let lead_sym = leading.symbol(ctx);
        let p = PolyForm::from_expr(eq, &vars).expect("validated polynomial");
        if p.degree_in(&lead_sym) != 1 {
            return Err(SystemError::NotLinearInLeading {
                equation: idx,
                leading: lead_sym.name().into(),
            });
        }
        let coeff = p.coefficient_of(&lead_sym, 1);
        if !coeff.supported_on(|s| s.kind() == SymbolKind::Parameter) {
            return Err(SystemError::NonParameterCoefficient {
                equation: idx,
                leading: lead_sym.name().into(),
            });
        }
        let rest = p.coefficient_of(&lead_sym, 0);
        let rhs = Frac::from_poly(rest.neg()).div_poly(&coeff);
        if entries.insert(leading.clone(), rhs).is_some() {
            return Err(SystemError::DuplicateLeading {
                leading: lead_sym.name().into(),
            });
        }
    }

    // Differential consequences: all derivatives of base entries up to the
    // target order. Denominators are parameter-only, so D_i acts on
    // numerators alone.
    let base: Vec<(JetCoord, Frac)> = entries.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    for (coord, frac) in base {
        let mut frontier = alloc::vec![(coord, frac)];
        while let Some((c, f)) = frontier.pop() {
            for i in 0..sys.independents().len() {
                let nc = c.bump(i);
                if nc.order() > target || entries.contains_key(&nc) {
                    continue;
                }
                let nf = Frac {
                    num: total_derivative_poly(&f.num, i, sys, &vars),
                    den: f.den.clone(),
                };
                entries.insert(nc.clone(), nf.clone());
                frontier.push((nc, nf));
            }
        }
    }

    // Reduce right-hand sides against each other until closed. Each pass
    // strictly lowers the multiset of table keys present, so this stops.
    for _pass in 0..64 {
        let snapshot = SolvedForm {
            entries: entries.clone(),
            vars: vars.clone(),
            prolongation_order: n,
        };
        let mut changed = false;
        for (_, f) in entries.iter_mut() {
            let reduced = snapshot.reduce_poly(&f.num, sys, &vars);
            let new = Frac {
                num: reduced.num,
                den: f.den.mul(&reduced.den),
            };
            if new != *f {
                *f = new;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // Closure sanity: no table key may appear in any right-hand side, and
    // every right-hand side must rank strictly below its key.
    let sf = SolvedForm {
        entries,
        vars: vars.clone(),
        prolongation_order: n,
    };
    for (k, f) in sf.entries() {
        for s in vars.iter() {
            if let Some(jc) = JetCoord::from_symbol(ctx, s) {
                if f.num.degree_in(s) > 0 && (sf.entries.contains_key(&jc) || jc >= *k) {
                    return Err(SystemError::CyclicRanking {
                        leading: k.symbol(ctx).name().into(),
                    });
                }
            }
        }
    }
    Ok(sf)
}

/// Repeated substitution of solved coordinates until none remains.
pub fn reduce_mod_system(e: &Expr, sf: &SolvedForm, sys: &PdeSystem) -> Expr {
    let mut syms: Vec<Symbol> = exprcore::free_symbols(e).into_iter().collect();
    syms.extend(sf.vars.iter().cloned());
    let vars = varset(syms);
    let frac = match Frac::from_expr(e, &vars) {
        Ok(f) => f,
        Err(_) => {
            // Extended expressions reduce by tree substitution of the table.
            let mut map = BTreeMap::new();
            for (k, f) in sf.entries() {
                map.insert(k.symbol(sys.context()), f.to_expr());
            }
            let mut cur = e.clone();
            for _ in 0..64 {
                let next = exprcore::substitute(&cur, &map);
                if next == cur {
                    break;
                }
                cur = next;
            }
            return cur;
        }
    };
    let reduced = sf.reduce_poly(&frac.num, sys, &vars);
    reduced.div_poly(&frac.den.embed(&vars)).to_expr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testsys;
    use alloc::string::ToString;
    use exprcore::{parse_expr, poly_equal};

    #[test]
    fn ranking_orders_as_specified() {
        // order first, then dependent, then reverse-lex multi-index
        let ux = JetCoord { dep: 0, multi: alloc::vec![1, 0] };
        let uy = JetCoord { dep: 0, multi: alloc::vec![0, 1] };
        let vy = JetCoord { dep: 1, multi: alloc::vec![0, 1] };
        let uyy = JetCoord { dep: 0, multi: alloc::vec![0, 2] };
        assert!(uy > ux);
        assert!(vy > uy);
        assert!(uyy > vy);
    }

    #[test]
    fn total_derivative_basics() {
        let sys = testsys::rnc();
        let ctx = sys.context();
        let v = parse_expr("v", ctx).unwrap();
        assert!(poly_equal(&total_derivative(&v, 1, &sys), &parse_expr("v_y", ctx).unwrap()).unwrap());

        let uux = parse_expr("u*u_x", ctx).unwrap();
        let expect = parse_expr("u_x^2 + u*u_xx", ctx).unwrap();
        assert!(poly_equal(&total_derivative(&uux, 0, &sys), &expect).unwrap());

        let continuity = parse_expr("u_x + v_y", ctx).unwrap();
        let expect2 = parse_expr("u_xy + v_yy", ctx).unwrap();
        assert!(poly_equal(&total_derivative(&continuity, 1, &sys), &expect2).unwrap());
    }

    #[test]
    fn rnc_solved_form_matches_equations() {
        let sys = testsys::rnc();
        let ctx = sys.context();
        let sf = solve_leading(&sys).unwrap();

        let entry = |name: &str| -> Expr {
            let jc = JetCoord::from_symbol(ctx, &ctx.resolve(name).unwrap()).unwrap();
            sf.get(&jc).expect(name).to_expr()
        };

        assert!(poly_equal(&entry("v_y"), &parse_expr("-u_x", ctx).unwrap()).unwrap());
        assert!(poly_equal(
            &entry("u_yy"),
            &parse_expr("u*u_x + v*u_y - Gr*calpha*theta", ctx).unwrap()
        )
        .unwrap());
        // theta_yy = Pr/(1+4R) * (u*theta_x + v*theta_y)
        let jc = JetCoord::from_symbol(ctx, &ctx.resolve("theta_yy").unwrap()).unwrap();
        let f = sf.get(&jc).unwrap();
        let num_expect = parse_expr("Pr*(u*theta_x + v*theta_y)", ctx).unwrap();
        let den_expect = parse_expr("1 + 4*R", ctx).unwrap();
        // den-normalized cross check: num * den_expect == num_expect * den
        let lhs = exprcore::mul2(f.num.to_expr(), den_expect);
        let rhs = exprcore::mul2(num_expect, f.den.to_expr());
        assert!(poly_equal(&lhs, &rhs).unwrap());
    }

    #[test]
    fn reduce_examples() {
        let sys = testsys::rnc();
        let ctx = sys.context();
        let sf = solve_leading(&sys).unwrap();

        let r = reduce_mod_system(&parse_expr("v_y + u_x", ctx).unwrap(), &sf, &sys);
        assert!(r.is_zero(), "got {r}");

        let r2 = reduce_mod_system(&parse_expr("v_yy", ctx).unwrap(), &sf, &sys);
        assert!(poly_equal(&r2, &parse_expr("-u_xy", ctx).unwrap()).unwrap(), "got {r2}");

        // u_yyy reduces to D_y of the momentum solved form, itself reduced.
        let r3 = reduce_mod_system(&parse_expr("u_yyy", ctx).unwrap(), &sf, &sys);
        let momentum_rhs = parse_expr("u*u_x + v*u_y - Gr*calpha*theta", ctx).unwrap();
        let oracle = reduce_mod_system(&total_derivative(&momentum_rhs, 1, &sys), &sf, &sys);
        assert!(poly_equal(&r3, &oracle).unwrap(), "got {r3} want {oracle}");
    }

    #[test]
    fn reduction_is_idempotent_and_kills_entries() {
        let sys = testsys::rnc();
        let ctx = sys.context();
        let sf = solve_leading(&sys).unwrap();
        for (k, f) in sf.entries() {
            let diff = exprcore::sub(Expr::sym(&k.symbol(ctx)), f.to_expr());
            let r = reduce_mod_system(&diff, &sf, &sys);
            assert!(r.is_zero(), "entry {} not self-consistent: {r}", k.symbol(ctx));
        }
        let e = parse_expr("u_yy*theta_yy + v_y^3 + x*u_x", ctx).unwrap();
        let once = reduce_mod_system(&e, &sf, &sys);
        let twice = reduce_mod_system(&once, &sf, &sys);
        assert!(exprcore::frac_equal(&once, &twice).unwrap());
    }

    #[test]
    fn residual_jets_form_the_expected_set() {
        let sys = testsys::rnc();
        let ctx = sys.context();
        let sf = solve_leading(&sys).unwrap();
        let allowed = [
            "u", "v", "theta", "u_x", "u_y", "v_x", "theta_x", "theta_y", "u_xx", "u_xy", "v_xx",
            "v_xy", "theta_xx", "theta_xy",
        ];
        let mut rng = crate::rng::SplitMix64::new(5);
        let jets = sys.jets_up_to(2);
        for _ in 0..40 {
            // random polynomial in second-prolongation jets
            let mut terms = alloc::vec::Vec::new();
            for _ in 0..rng.int_in(1, 6) {
                let a = &jets[rng.int_in(0, jets.len() as i64 - 1) as usize];
                let b = &jets[rng.int_in(0, jets.len() as i64 - 1) as usize];
                terms.push(exprcore::mul(alloc::vec![
                    Expr::Const(rng.small_rational()),
                    Expr::sym(&a.symbol(ctx)),
                    Expr::sym(&b.symbol(ctx)),
                ]));
            }
            let reduced = reduce_mod_system(&exprcore::add(terms), &sf, &sys);
            for s in exprcore::free_symbols(&reduced) {
                if JetCoord::from_symbol(ctx, &s).is_some() {
                    assert!(
                        allowed.contains(&s.name()),
                        "unexpected residual jet {} in {}",
                        s.name(),
                        reduced.to_string()
                    );
                }
            }
        }
    }

    #[test]
    fn total_derivatives_commute() {
        let sys = testsys::rnc();
        let ctx = sys.context();
        for text in ["u*u_x + v*theta_y", "x*u_yy + y^2*v_x", "theta*u_x*v"] {
            let e = parse_expr(text, ctx).unwrap();
            let dxy = total_derivative(&total_derivative(&e, 0, &sys), 1, &sys);
            let dyx = total_derivative(&total_derivative(&e, 1, &sys), 0, &sys);
            assert!(poly_equal(&dxy, &dyx).unwrap());
        }
    }

    #[test]
    fn heat_solved_form() {
        let sys = testsys::heat();
        let ctx = sys.context();
        let sf = solve_leading(&sys).unwrap();
        let jc = JetCoord::from_symbol(ctx, &ctx.resolve("u_xx").unwrap()).unwrap();
        let f = sf.get(&jc).unwrap();
        assert!(poly_equal(&f.to_expr(), &parse_expr("u_t", ctx).unwrap()).unwrap());
        // consequence: u_xxx -> u_xt
        let r = reduce_mod_system(&parse_expr("u_xxx", ctx).unwrap(), &sf, &sys);
        assert!(poly_equal(&r, &parse_expr("u_xt", ctx).unwrap()).unwrap());
    }
}
