//! Bounded-degree polynomial ansatz for the infinitesimals, assembly of the
//! determining equations into an exact homogeneous linear system, rational
//! nullspace computation, and canonical basis extraction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::exprcore::poly::{Mono, PolyForm};
use crate::exprcore::rational::{rat_zero, Rat};
use crate::exprcore::symbol::{Symbol, SymbolKind};
use crate::exprcore::{self, varset, Expr};
use crate::jet::{solve_leading, PdeSystem, SolvedForm, SystemError};
use crate::linalg;
use crate::prolong::{collect_linear, criterion_residuals_frac, DeterminingError, VectorField};

pub use crate::prolong::{check_generator, check_generator_with};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// Generic vector field whose components are degree-bounded polynomials in
/// the base coordinates with fresh unknown coefficients.
#[derive(Debug, Clone)]
pub struct Ansatz {
    pub degree: u32,
    /// Base-coordinate monomials of total degree `<= degree`, graded-lex
    /// ascending. Unknown `c{comp}m{k}` multiplies `monomials[k]` in
    /// component `comp` (components ordered ξ's then φ's).
    pub monomials: Vec<Expr>,
    pub unknowns: Vec<Symbol>,
    pub template: VectorField,
}

/// Enumerate exponent vectors of total degree `<= d` over `n` variables in
/// graded-lex ascending order.
fn monomial_exponents(n: usize, d: u32) -> Vec<Mono> {
    let mut out = Vec::new();
    let mut cur = alloc::vec![0u16; n];
    fn rec(out: &mut Vec<Mono>, cur: &mut Vec<u16>, pos: usize, left: u32) {
        if pos == cur.len() {
            out.push(Mono(cur.clone()));
            return;
        }
        for e in 0..=left {
            cur[pos] = e as u16;
            rec(out, cur, pos + 1, left - e);
        }
        cur[pos] = 0;
    }
    rec(&mut out, &mut cur, 0, d);
    out.sort();
    out
}

/// Build the degree-`d` ansatz for a system. Unknowns are deterministic
/// fresh parameter symbols `c{component}m{monomial}`.
pub fn build_ansatz(sys: &PdeSystem, degree: u32) -> Ansatz {
    let base: Vec<Symbol> = sys
        .independents()
        .iter()
        .chain(sys.dependents())
        .cloned()
        .collect();
    let exps = monomial_exponents(base.len(), degree);
    let monomials: Vec<Expr> = exps
        .iter()
        .map(|m| {
            let factors: Vec<Expr> = m
                .0
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| exprcore::pow_int(Expr::sym(&base[i]), e as i64))
                .collect();
            exprcore::mul(factors)
        })
        .collect();

    let n_comp = sys.independents().len() + sys.n_dependents();
    let mut unknowns = Vec::with_capacity(n_comp * monomials.len());
    let mut components = Vec::with_capacity(n_comp);
    for comp in 0..n_comp {
        let mut terms = Vec::with_capacity(monomials.len());
        for (k, mono) in monomials.iter().enumerate() {
            let c = Symbol::new(&alloc::format!("c{comp}m{k}"), SymbolKind::Parameter);
            terms.push(exprcore::mul2(Expr::sym(&c), mono.clone()));
            unknowns.push(c);
        }
        components.push(exprcore::add(terms));
    }
    let n_ind = sys.independents().len();
    Ansatz {
        degree,
        monomials,
        unknowns,
        template: VectorField {
            xi: components[..n_ind].to_vec(),
            phi: components[n_ind..].to_vec(),
        },
    }
}

/// Homogeneous linear system over the ansatz unknowns; rows are dense,
/// deduplicated, in a deterministic order.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub rows: Vec<Vec<Rat>>,
    pub ncols: usize,
}

/// Apply the symmetry criterion to the ansatz template and split the
/// residuals by monomials in coordinates, jets and parameters.
pub fn assemble_determining(
    sys: &PdeSystem,
    sf: &SolvedForm,
    ansatz: &Ansatz,
) -> Result<LinearSystem, DeterminingError> {
    let ncols = ansatz.unknowns.len();
    let pos: BTreeMap<Symbol, usize> = ansatz
        .unknowns
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    let mut seen: BTreeSet<Vec<(usize, Rat)>> = BTreeSet::new();
    for frac in criterion_residuals_frac(&ansatz.template, sys, sf) {
        for (_, row) in collect_linear(&frac.num, &pos)? {
            let mut sparse: Vec<(usize, Rat)> =
                row.into_iter().filter(|(_, c)| !c.is_zero()).collect();
            if sparse.is_empty() {
                continue;
            }
            // scale so the first coefficient is 1; rows equal up to a
            // scalar are the same constraint
            let lead = sparse[0].1.clone();
            for (_, c) in &mut sparse {
                *c /= lead.clone();
            }
            seen.insert(sparse);
        }
    }
    let rows = seen
        .into_iter()
        .map(|sparse| {
            let mut dense = alloc::vec![rat_zero(); ncols];
            for (i, c) in sparse {
                dense[i] = c;
            }
            dense
        })
        .collect();
    Ok(LinearSystem { rows, ncols })
}

/// Reduced-echelon nullspace basis (pivot entries 1, zeros above pivots),
/// computed by fraction-free elimination.
pub fn nullspace_exact(ls: &LinearSystem) -> Vec<Vec<Rat>> {
    linalg::nullspace(&ls.rows, ls.ncols)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BasisError {
    DependentInput,
    /// Component coefficients outside the rational field (parameters).
    NonRationalCoefficients,
}

impl core::fmt::Display for BasisError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BasisError::DependentInput => f.write_str("input fields are linearly dependent"),
            BasisError::NonRationalCoefficients => {
                f.write_str("field components must have rational coefficients")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for BasisError {}

/// An ordered basis of symmetry generators.
#[derive(Debug, Clone)]
pub struct GeneratorBasis {
    pub fields: Vec<VectorField>,
}

impl GeneratorBasis {
    pub fn dimension(&self) -> usize {
        self.fields.len()
    }
}

/// Coefficient vector of a field over the (component, monomial) basis of a
/// given degree; `None` if a component exceeds the degree or has
/// non-rational coefficients.
pub fn field_to_vec(f: &VectorField, sys: &PdeSystem, degree: u32) -> Option<Vec<Rat>> {
    let base: Vec<Symbol> = sys
        .independents()
        .iter()
        .chain(sys.dependents())
        .cloned()
        .collect();
    let vars = varset(base.clone());
    // map varset positions (sorted) back to system order
    let to_base: Vec<usize> = vars
        .iter()
        .map(|s| base.iter().position(|b| b == s).unwrap())
        .collect();
    let exps = monomial_exponents(base.len(), degree);
    let index: BTreeMap<&Mono, usize> = exps.iter().zip(0..).collect();
    let mut out = alloc::vec![rat_zero(); exps.len() * (base.len())];
    for (comp, e) in f.components().enumerate() {
        for s in exprcore::free_symbols(e) {
            if !base.contains(&s) {
                return None;
            }
        }
        let p = PolyForm::from_expr(e, &vars).ok()?;
        for (m, c) in p.terms() {
            let mut reordered = Mono(alloc::vec![0u16; base.len()]);
            for (i, &e) in m.0.iter().enumerate() {
                reordered.0[to_base[i]] = e;
            }
            let k = *index.get(&reordered)?;
            out[comp * exps.len() + k] = c.clone();
        }
    }
    Some(out)
}

fn max_component_degree(f: &VectorField) -> u32 {
    f.components()
        .filter_map(|e| crate::exprcore::poly_normalize(e).ok())
        .map(|p| p.total_degree())
        .max()
        .unwrap_or(0)
}

/// Scale a coefficient vector primitive: integer entries with gcd 1, first
/// nonzero entry positive.
fn normalize_vec(v: &[Rat]) -> Vec<Rat> {
    let mut lcm = BigInt::one();
    for c in v {
        if !c.is_zero() {
            lcm = lcm.lcm(c.denom());
        }
    }
    let ints: Vec<BigInt> = v.iter().map(|c| c.numer() * (&lcm / c.denom())).collect();
    let mut g = BigInt::zero();
    for c in &ints {
        g = g.gcd(c);
    }
    if g.is_zero() {
        return v.to_vec();
    }
    let first = ints.iter().find(|c| !c.is_zero()).unwrap();
    if first.is_negative() {
        g = -g;
    }
    ints.into_iter()
        .map(|c| Rat::from_integer(c / &g))
        .collect()
}

fn vec_to_field(v: &[Rat], sys: &PdeSystem, degree: u32) -> VectorField {
    let base: Vec<Symbol> = sys
        .independents()
        .iter()
        .chain(sys.dependents())
        .cloned()
        .collect();
    let exps = monomial_exponents(base.len(), degree);
    let n_ind = sys.independents().len();
    let mut comps = Vec::new();
    for comp in 0..base.len() {
        let mut terms = Vec::new();
        for (k, m) in exps.iter().enumerate() {
            let c = &v[comp * exps.len() + k];
            if c.is_zero() {
                continue;
            }
            let mut factors = alloc::vec![Expr::Const(c.clone())];
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    factors.push(exprcore::pow_int(Expr::sym(&base[i]), e as i64));
                }
            }
            terms.push(exprcore::mul(factors));
        }
        comps.push(exprcore::add(terms));
    }
    VectorField {
        xi: comps[..n_ind].to_vec(),
        phi: comps[n_ind..].to_vec(),
    }
}

/// Canonicalize an independent spanning set: each field scaled primitive
/// with positive leading coefficient, sorted by (total component degree,
/// leading coefficient position, coefficient vector).
pub fn canonical_basis(raw: &[VectorField], sys: &PdeSystem) -> Result<GeneratorBasis, BasisError> {
    if raw.is_empty() {
        return Ok(GeneratorBasis { fields: Vec::new() });
    }
    let degree = raw.iter().map(max_component_degree).max().unwrap_or(0);
    let vecs: Vec<Vec<Rat>> = raw
        .iter()
        .map(|f| field_to_vec(f, sys, degree).ok_or(BasisError::NonRationalCoefficients))
        .collect::<Result<_, _>>()?;
    let (_, pivots) = linalg::rref(&vecs);
    if pivots.len() != raw.len() {
        return Err(BasisError::DependentInput);
    }
    let mut normalized: Vec<Vec<Rat>> = vecs.iter().map(|v| normalize_vec(v)).collect();
    normalized.sort_by_key(|v| {
        let field = vec_to_field(v, sys, degree);
        let deg = max_component_degree(&field);
        let lead = v.iter().position(|c| !c.is_zero()).unwrap_or(usize::MAX);
        (deg, lead, v.clone())
    });
    Ok(GeneratorBasis {
        fields: normalized
            .iter()
            .map(|v| vec_to_field(v, sys, degree))
            .collect(),
    })
}

/// Exact span membership in coefficient space.
pub fn span_contains(basis: &[VectorField], f: &VectorField, sys: &PdeSystem) -> bool {
    let degree = basis
        .iter()
        .chain(core::iter::once(f))
        .map(max_component_degree)
        .max()
        .unwrap_or(0);
    let Some(vecs) = basis
        .iter()
        .map(|b| field_to_vec(b, sys, degree))
        .collect::<Option<Vec<_>>>()
    else {
        return false;
    };
    let Some(target) = field_to_vec(f, sys, degree) else {
        return false;
    };
    linalg::express_in_span(&vecs, &target).is_some()
}

/// Bidirectional span equality in coefficient space.
pub fn spans_equal(a: &[VectorField], b: &[VectorField], sys: &PdeSystem) -> bool {
    a.iter().all(|f| span_contains(b, f, sys)) && b.iter().all(|f| span_contains(a, f, sys))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SymmetryError {
    System(SystemError),
    Determining(DeterminingError),
    Basis(BasisError),
    /// A solver output failed the criterion re-check; indicates a bug.
    Unsound { index: usize },
}

impl core::fmt::Display for SymmetryError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SymmetryError::System(e) => write!(f, "{e}"),
            SymmetryError::Determining(e) => write!(f, "{e}"),
            SymmetryError::Basis(e) => write!(f, "{e}"),
            SymmetryError::Unsound { index } => {
                write!(f, "solver output {index} fails the symmetry criterion")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SymmetryError {}

impl From<SystemError> for SymmetryError {
    fn from(e: SystemError) -> Self {
        SymmetryError::System(e)
    }
}

impl From<DeterminingError> for SymmetryError {
    fn from(e: DeterminingError) -> Self {
        SymmetryError::Determining(e)
    }
}

impl From<BasisError> for SymmetryError {
    fn from(e: BasisError) -> Self {
        SymmetryError::Basis(e)
    }
}

/// Full pipeline: solved form, degree-`d` ansatz, determining system,
/// nullspace, canonical basis. Every output field is re-checked against the
/// criterion before being returned.
pub fn solve_symmetries(sys: &PdeSystem, degree: u32) -> Result<GeneratorBasis, SymmetryError> {
    let sf = solve_leading(sys)?;
    let ansatz = build_ansatz(sys, degree);
    let ls = assemble_determining(sys, &sf, &ansatz)?;
    let null = nullspace_exact(&ls);
    let fields: Vec<VectorField> = null
        .iter()
        .map(|v| vec_to_field(v, sys, degree))
        .collect();
    let basis = canonical_basis(&fields, sys)?;
    for (index, f) in basis.fields.iter().enumerate() {
        if !check_generator_with(f, sys, &sf) {
            return Err(SymmetryError::Unsound { index });
        }
    }
    Ok(basis)
}

/// Render a field's nonzero components with canonical keys
/// (`xi_<independent>`, `phi_<dependent>`).
pub fn field_components(f: &VectorField, sys: &PdeSystem) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (i, s) in sys.independents().iter().enumerate() {
        out.push((
            alloc::format!("xi_{}", s.name()),
            alloc::format!("{}", f.xi[i]),
        ));
    }
    for (a, s) in sys.dependents().iter().enumerate() {
        out.push((
            alloc::format!("phi_{}", s.name()),
            alloc::format!("{}", f.phi[a]),
        ));
    }
    out
}
