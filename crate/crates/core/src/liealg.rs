//! Lie brackets of vector fields, structure constants, commutator and
//! adjoint tables, exact adjoint exponentials, and one-parameter flows.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::detsolve::{field_to_vec, GeneratorBasis};
use crate::exprcore::rational::{self, rat_int, rat_one, rat_zero, Rat};
use crate::exprcore::symbol::Symbol;
use crate::exprcore::{self, Expr};
use crate::jet::PdeSystem;
use crate::linalg::{self, UniPoly};
use crate::prolong::VectorField;

use num_traits::{One, ToPrimitive, Zero};

#[derive(Debug, Clone, PartialEq)]
pub enum AlgebraError {
    /// `[X_i, X_j]` falls outside the span; the residual field is printed.
    NotClosed { i: usize, j: usize, residual: String },
    NonRationalCoefficients,
    /// Structure constants violate antisymmetry or the Jacobi identity.
    InvalidStructure,
    /// The minimal polynomial of an adjoint matrix does not split over the
    /// rationals; the offending irreducible factor is printed.
    NonSplit { direction: usize, factor: String },
    /// A flow component is outside the coordinatewise affine class.
    UnsupportedFlow { coordinate: String },
}

impl core::fmt::Display for AlgebraError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            AlgebraError::NotClosed { i, j, residual } => write!(
                f,
                "bracket [X{}, X{}] escapes the span; residual: {residual}",
                i + 1,
                j + 1
            ),
            AlgebraError::NonRationalCoefficients => {
                f.write_str("basis fields must have rational coefficients")
            }
            AlgebraError::InvalidStructure => {
                f.write_str("structure constants violate antisymmetry or Jacobi")
            }
            AlgebraError::NonSplit { direction, factor } => write!(
                f,
                "adjoint matrix of X{} has a non-split minimal polynomial (irreducible factor {factor}); use the truncated series fallback",
                direction + 1
            ),
            AlgebraError::UnsupportedFlow { coordinate } => write!(
                f,
                "component of coordinate `{coordinate}` is not affine in that coordinate"
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for AlgebraError {}

/// Commutator `[X, Y]`: componentwise `X(Y^k) - Y(X^k)` with each field
/// acting as a derivation through its ξ and φ coefficients.
pub fn bracket(x: &VectorField, y: &VectorField, sys: &PdeSystem) -> VectorField {
    let coords: Vec<Symbol> = sys
        .independents()
        .iter()
        .chain(sys.dependents())
        .cloned()
        .collect();
    let apply = |f: &VectorField, target: &Expr| -> Expr {
        let mut terms = Vec::new();
        for (c, coord) in f.components().zip(&coords) {
            if !c.is_zero() {
                terms.push(exprcore::mul2(c.clone(), exprcore::diff(target, coord)));
            }
        }
        exprcore::add(terms)
    };
    let n_ind = sys.independents().len();
    let comps: Vec<Expr> = x
        .components()
        .zip(y.components())
        .map(|(xc, yc)| exprcore::sub(apply(x, yc), apply(y, xc)))
        .collect();
    VectorField {
        xi: comps[..n_ind].to_vec(),
        phi: comps[n_ind..].to_vec(),
    }
}

/// An ordered basis closed under the bracket, with exact structure
/// constants `[X_i, X_j] = Σ_k c^k_{ij} X_k`. Antisymmetry and the Jacobi
/// identity are asserted on construction.
#[derive(Debug, Clone)]
pub struct LieAlgebra {
    pub basis: GeneratorBasis,
    pub labels: Vec<String>,
    sys: PdeSystem,
    /// `structure[i][j][k]` = c^k_{ij}
    structure: Vec<Vec<Vec<Rat>>>,
}

impl LieAlgebra {
    /// Compute structure constants of a closed basis by exact linear
    /// solves in coefficient space.
    pub fn from_basis(basis: GeneratorBasis, sys: &PdeSystem) -> Result<LieAlgebra, AlgebraError> {
        let n = basis.dimension();
        // brackets of degree-d fields have components of degree <= 2d - 1
        let mut brackets = alloc::vec![alloc::vec![VectorField::zero(sys); n]; n];
        let mut degree = 0u32;
        for (i, f) in basis.fields.iter().enumerate() {
            for c in f.components() {
                if let Ok(p) = crate::exprcore::poly_normalize(c) {
                    degree = degree.max(p.total_degree());
                }
            }
            for j in 0..n {
                if i != j {
                    brackets[i][j] = bracket(f, &basis.fields[j], sys);
                    for c in brackets[i][j].components() {
                        if let Ok(p) = crate::exprcore::poly_normalize(c) {
                            degree = degree.max(p.total_degree());
                        }
                    }
                }
            }
        }
        let vecs: Vec<Vec<Rat>> = basis
            .fields
            .iter()
            .map(|f| field_to_vec(f, sys, degree).ok_or(AlgebraError::NonRationalCoefficients))
            .collect::<Result<_, _>>()?;
        let mut structure = alloc::vec![alloc::vec![alloc::vec![rat_zero(); n]; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let br = brackets[i][j].clone();
                let target =
                    field_to_vec(&br, sys, degree).ok_or(AlgebraError::NonRationalCoefficients)?;
                match linalg::express_in_span(&vecs, &target) {
                    Some(coeffs) => structure[i][j] = coeffs,
                    None => {
                        let comps = crate::detsolve::field_components(&br, sys)
                            .into_iter()
                            .filter(|(_, v)| v != "0")
                            .map(|(k, v)| alloc::format!("{k}: {v}"))
                            .collect::<Vec<_>>()
                            .join(", ");
                        return Err(AlgebraError::NotClosed { i, j, residual: comps });
                    }
                }
            }
        }
        let labels = (1..=n).map(|k| alloc::format!("X{k}")).collect();
        let alg = LieAlgebra {
            basis,
            labels,
            sys: sys.clone(),
            structure,
        };
        alg.validate()?;
        Ok(alg)
    }

    /// Build from explicit structure constants (basis fields unused by the
    /// table machinery); mainly for algebras given abstractly.
    pub fn from_structure(
        labels: Vec<String>,
        structure: Vec<Vec<Vec<Rat>>>,
        sys: &PdeSystem,
    ) -> Result<LieAlgebra, AlgebraError> {
        let alg = LieAlgebra {
            basis: GeneratorBasis { fields: Vec::new() },
            labels,
            sys: sys.clone(),
            structure,
        };
        alg.validate()?;
        Ok(alg)
    }

    fn validate(&self) -> Result<(), AlgebraError> {
        let n = self.dim();
        let c = &self.structure;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if c[i][j][k] != -c[j][i][k].clone() {
                        return Err(AlgebraError::InvalidStructure);
                    }
                }
            }
        }
        // Jacobi: Σ_m c^m_{jk} c^l_{im} + c^m_{ij} c^l_{km} + c^m_{ki} c^l_{jm} = 0
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut acc = rat_zero();
                        for m in 0..n {
                            acc += c[j][k][m].clone() * &c[i][m][l]
                                + c[i][j][m].clone() * &c[k][m][l]
                                + c[k][i][m].clone() * &c[j][m][l];
                        }
                        if !acc.is_zero() {
                            return Err(AlgebraError::InvalidStructure);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.structure.len()
    }

    pub fn system(&self) -> &PdeSystem {
        &self.sys
    }

    /// Coefficients of `[X_i, X_j]` over the basis.
    pub fn bracket_coeffs(&self, i: usize, j: usize) -> &[Rat] {
        &self.structure[i][j]
    }

    /// Matrix of `ad_{X_i} = [X_i, ·]`: entry `(k, j)` is c^k_{ij}.
    pub fn ad_matrix(&self, i: usize) -> Vec<Vec<Rat>> {
        let n = self.dim();
        (0..n)
            .map(|k| (0..n).map(|j| self.structure[i][j][k].clone()).collect())
            .collect()
    }

    /// Render a coefficient vector as a linear combination of the labels,
    /// e.g. `X1 - 2*X3`; the zero vector prints `0`.
    pub fn combination_label(&self, coeffs: &[Rat]) -> String {
        combination_string(&self.labels, coeffs)
    }
}

/// Linear-combination rendering shared by tables and classification
/// reports. Positive terms lead, so `-X1 + X2` prints as `X2-X1`.
pub fn combination_string(labels: &[String], coeffs: &[Rat]) -> String {
    use num_traits::Signed;
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (c, l) in coeffs.iter().zip(labels) {
        if c.is_zero() {
            continue;
        }
        let mag = c.abs();
        let term = if mag.is_one() {
            l.clone()
        } else {
            alloc::format!("{}*{}", rational::fmt_rat(&mag), l)
        };
        if c.is_positive() {
            positives.push(term);
        } else {
            negatives.push(term);
        }
    }
    if positives.is_empty() && negatives.is_empty() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (k, t) in positives.iter().enumerate() {
        if k > 0 {
            out.push('+');
        }
        out.push_str(t);
    }
    for t in &negatives {
        if out.is_empty() {
            out.push('-');
        } else {
            out.push('-');
        }
        out.push_str(t);
    }
    out
}

/// A closed-form function of the group parameter: `Σ_λ p_λ(ε) e^(λ ε)`
/// with rational `λ` and rational polynomial coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpPoly {
    terms: BTreeMap<Rat, UniPoly>,
}

impl ExpPoly {
    pub fn zero() -> Self {
        ExpPoly {
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: Rat) -> Self {
        let mut t = BTreeMap::new();
        if !c.is_zero() {
            t.insert(rat_zero(), UniPoly::constant(c));
        }
        ExpPoly { terms: t }
    }

    fn insert(&mut self, lambda: Rat, p: UniPoly) {
        if p.is_zero() {
            return;
        }
        let entry = self.terms.entry(lambda).or_insert_with(UniPoly::zero);
        *entry = entry.add(&p);
        if entry.is_zero() {
            let lambda = self
                .terms
                .iter()
                .find(|(_, v)| v.is_zero())
                .map(|(k, _)| k.clone());
            if let Some(l) = lambda {
                self.terms.remove(&l);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &ExpPoly) -> ExpPoly {
        let mut out = self.clone();
        for (l, p) in &other.terms {
            out.insert(l.clone(), p.clone());
        }
        out
    }

    pub fn mul(&self, other: &ExpPoly) -> ExpPoly {
        let mut out = ExpPoly::zero();
        for (la, pa) in &self.terms {
            for (lb, pb) in &other.terms {
                out.insert(la.clone() + lb, pa.mul(pb));
            }
        }
        out
    }

    /// Substitute `ε -> -ε` (the opposite sign convention).
    pub fn negate_param(&self) -> ExpPoly {
        let mut out = ExpPoly::zero();
        for (l, p) in &self.terms {
            let flipped = UniPoly(
                p.0.iter()
                    .enumerate()
                    .map(|(k, c)| if k % 2 == 1 { -c.clone() } else { c.clone() })
                    .collect(),
            );
            out.insert(-l.clone(), flipped);
        }
        out
    }

    /// Exact value at `ε = 0` (the constant terms).
    pub fn at_zero(&self) -> Rat {
        let mut acc = rat_zero();
        for p in self.terms.values() {
            acc += p.eval(&rat_zero());
        }
        acc
    }

    /// Exact evaluation where possible: rational ε with purely polynomial
    /// entry, or ε = ln(q) with a constant polynomial and rational `q^λ`.
    pub fn eval_exact(&self, eps: &EpsValue) -> Option<Rat> {
        match eps {
            EpsValue::Rational(r) => {
                if r.is_zero() {
                    return Some(self.at_zero());
                }
                let mut acc = rat_zero();
                for (l, p) in &self.terms {
                    if !l.is_zero() {
                        return None;
                    }
                    acc += p.eval(r);
                }
                Some(acc)
            }
            EpsValue::LnRational(q) => {
                let mut acc = rat_zero();
                for (l, p) in &self.terms {
                    let c = if p.degree() == Some(0) || p.is_zero() {
                        p.eval(&rat_zero())
                    } else {
                        return None;
                    };
                    // e^(λ ln q) = q^λ
                    let lp = l.numer().to_i64()?;
                    let lq = l.denom().to_u32()?;
                    let factor = rational::rat_root_pow(q, lp, lq)?;
                    acc += c * factor;
                }
                Some(acc)
            }
        }
    }

    pub fn eval_f64(&self, eps: f64) -> f64 {
        let mut acc = 0.0;
        for (l, p) in &self.terms {
            let mut pv = 0.0;
            for c in p.0.iter().rev() {
                pv = pv * eps + rational::to_f64(c);
            }
            acc += pv * crate::fmath::exp(rational::to_f64(l) * eps);
        }
        acc
    }

    /// Taylor expansion in ε through `order`, exact.
    pub fn series(&self, order: usize) -> UniPoly {
        let mut acc = UniPoly::zero();
        for (l, p) in &self.terms {
            // e^(λε) = Σ λ^k ε^k / k!
            let mut expo = UniPoly::constant(rat_one());
            let mut fact = rat_one();
            let mut pow = rat_one();
            let mut coeffs = alloc::vec![rat_one()];
            for k in 1..=order {
                fact *= rat_int(k as i64);
                pow *= l.clone();
                coeffs.push(pow.clone() / fact.clone());
            }
            expo = expo.add(&UniPoly(coeffs)).add(&UniPoly::constant(-rat_one()));
            let mut prod = p.mul(&expo);
            prod.0.truncate(order + 1);
            acc = acc.add(&prod);
        }
        acc
    }

    /// Expression in the given parameter symbol, exp factors collected.
    pub fn to_expr(&self, eps: &Symbol) -> Expr {
        let mut terms = Vec::new();
        for (l, p) in self.terms.iter().rev() {
            let mut poly_terms = Vec::new();
            for (k, c) in p.0.iter().enumerate().rev() {
                if c.is_zero() {
                    continue;
                }
                poly_terms.push(exprcore::mul2(
                    Expr::Const(c.clone()),
                    exprcore::pow_int(Expr::sym(eps), k as i64),
                ));
            }
            let poly_expr = exprcore::add(poly_terms);
            if l.is_zero() {
                terms.push(poly_expr);
            } else {
                let exp = exprcore::exp_of(exprcore::mul2(
                    Expr::Const(l.clone()),
                    Expr::sym(eps),
                ));
                terms.push(exprcore::mul2(poly_expr, exp));
            }
        }
        exprcore::add(terms)
    }
}

/// A group-parameter value in a normalization transcript: exact rational,
/// exact logarithm of a rational, or a flagged numeric fallback.
#[derive(Debug, Clone, PartialEq)]
pub enum EpsValue {
    Rational(Rat),
    /// ε = ln(q) for rational q > 0.
    LnRational(Rat),
}

impl EpsValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            EpsValue::Rational(r) => rational::to_f64(r),
            EpsValue::LnRational(q) => crate::fmath::ln(rational::to_f64(q)),
        }
    }
}

impl core::fmt::Display for EpsValue {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EpsValue::Rational(r) => write!(f, "{}", rational::fmt_rat(r)),
            EpsValue::LnRational(q) => write!(f, "ln({})", rational::fmt_rat(q)),
        }
    }
}

/// Closed-form adjoint matrix `ε -> exp(-ε · ad_{X_i})` (the literal Lie
/// series convention `Ad(exp(εX))Y = Y - ε[X,Y] + ...`). Entry `(k, j)` is
/// the `X_k`-coefficient of the image of `X_j`.
#[derive(Debug, Clone)]
pub struct AdjointMap {
    pub direction: usize,
    pub entries: Vec<Vec<ExpPoly>>,
    /// False for the truncated-series fallback.
    pub exact: bool,
}

impl AdjointMap {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Opposite sign convention (ε negated).
    pub fn negate_param(&self) -> AdjointMap {
        AdjointMap {
            direction: self.direction,
            entries: self
                .entries
                .iter()
                .map(|row| row.iter().map(ExpPoly::negate_param).collect())
                .collect(),
            exact: self.exact,
        }
    }

    /// Exact matrix at a transcript value, when every entry evaluates
    /// exactly.
    pub fn eval_exact(&self, eps: &EpsValue) -> Option<Vec<Vec<Rat>>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|e| e.eval_exact(eps)).collect())
            .collect()
    }

    pub fn eval_f64(&self, eps: f64) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|e| e.eval_f64(eps)).collect())
            .collect()
    }

    /// Symbolic group law `M(ε₁) M(ε₂) = M(ε₁ + ε₂)`, decided exactly by
    /// expanding both sides over the basis `ε₁^a ε₂^b e^(λ₁ε₁ + λ₂ε₂)`.
    pub fn verify_group_law(&self) -> bool {
        let n = self.dim();
        // (λ₁, λ₂) -> sparse coefficient grid over (ε₁-power, ε₂-power)
        type TwoVar = BTreeMap<(Rat, Rat), BTreeMap<(usize, usize), Rat>>;

        fn insert(acc: &mut TwoVar, key: (Rat, Rat), pos: (usize, usize), v: Rat) {
            if v.is_zero() {
                return;
            }
            let grid = acc.entry(key).or_default();
            let slot = grid.entry(pos).or_insert_with(rat_zero);
            *slot += v;
            if slot.is_zero() {
                grid.remove(&pos);
            }
        }

        let lift = |e: &ExpPoly, first: bool| -> TwoVar {
            let mut out = TwoVar::new();
            for (l, p) in &e.terms {
                let key = if first {
                    (l.clone(), rat_zero())
                } else {
                    (rat_zero(), l.clone())
                };
                for (k, c) in p.0.iter().enumerate() {
                    let pos = if first { (k, 0) } else { (0, k) };
                    insert(&mut out, key.clone(), pos, c.clone());
                }
            }
            out
        };
        let mul2v = |a: &TwoVar, b: &TwoVar| -> TwoVar {
            let mut out = TwoVar::new();
            for ((la1, la2), ga) in a {
                for ((lb1, lb2), gb) in b {
                    let key = (la1.clone() + lb1, la2.clone() + lb2);
                    for ((i, j), va) in ga {
                        for ((k, m), vb) in gb {
                            insert(&mut out, key.clone(), (i + k, j + m), va.clone() * vb);
                        }
                    }
                }
            }
            out
        };
        let add2v = |mut a: TwoVar, b: TwoVar| -> TwoVar {
            for (key, g) in b {
                for (pos, v) in g {
                    insert(&mut a, key.clone(), pos, v);
                }
            }
            a
        };
        let is_zero2v =
            |a: &TwoVar| -> bool { a.values().all(|g| g.values().all(Rat::is_zero)) };

        // M(ε₁+ε₂): ε -> ε₁+ε₂ by binomial expansion, λ applied to both
        let subst_sum = |e: &ExpPoly| -> TwoVar {
            let mut out = TwoVar::new();
            for (l, p) in &e.terms {
                let key = (l.clone(), l.clone());
                for (k, c) in p.0.iter().enumerate() {
                    // (ε₁+ε₂)^k = Σ C(k,a) ε₁^a ε₂^(k-a)
                    let mut binom = rat_one();
                    for a in 0..=k {
                        insert(&mut out, key.clone(), (a, k - a), c.clone() * &binom);
                        binom =
                            binom.clone() * rat_int((k - a) as i64) / rat_int((a + 1) as i64);
                    }
                }
            }
            out
        };

        for r in 0..n {
            for c in 0..n {
                // (M(ε₁)M(ε₂))[r][c] - M(ε₁+ε₂)[r][c]
                let mut acc = TwoVar::new();
                for k in 0..n {
                    let prod = mul2v(
                        &lift(&self.entries[r][k], true),
                        &lift(&self.entries[k][c], false),
                    );
                    acc = add2v(acc, prod);
                }
                let neg: TwoVar = subst_sum(&self.entries[r][c])
                    .into_iter()
                    .map(|(key, g)| {
                        (key, g.into_iter().map(|(pos, v)| (pos, -v)).collect())
                    })
                    .collect();
                acc = add2v(acc, neg);
                if !is_zero2v(&acc) {
                    return false;
                }
            }
        }
        true
    }
}

/// Exact `exp(-ε ad_{X_i})` assembled from the rational spectral
/// decomposition: for each eigenvalue λ of multiplicity m, the projector
/// is obtained by inverting the cofactor polynomial modulo `(x-λ)^m`, and
/// the nilpotent part contributes a terminating ε-polynomial.
pub fn adjoint_exp(alg: &LieAlgebra, i: usize) -> Result<AdjointMap, AlgebraError> {
    let n = alg.dim();
    let a = linalg::mat_scale(&alg.ad_matrix(i), &-rat_one()); // A = -ad
    let p = linalg::char_poly(&a);
    let (roots, residual) = linalg::rational_roots(&p);
    if residual.degree().unwrap_or(0) > 0 {
        let factor = alloc::format!("{:?}", residual.0.iter().map(rational::fmt_rat).collect::<Vec<_>>());
        return Err(AlgebraError::NonSplit { direction: i, factor });
    }
    let mut entries = alloc::vec![alloc::vec![ExpPoly::zero(); n]; n];
    let identity = linalg::mat_identity(n);
    let mut projector_sum = alloc::vec![alloc::vec![rat_zero(); n]; n];
    for (lambda, mult) in &roots {
        // q = p / (x-λ)^m, h = q(λ+t)^{-1} mod t^m
        let mut q = p.clone();
        for _ in 0..*mult {
            q = q.deflate(lambda);
        }
        let b = q.taylor_at(lambda);
        let mut h = alloc::vec![rat_zero(); *mult];
        h[0] = b[0].clone().recip();
        for k in 1..*mult {
            let mut s = rat_zero();
            for j in 1..=k {
                if j < b.len() {
                    s += b[j].clone() * &h[k - j];
                }
            }
            h[k] = -s / b[0].clone();
        }
        // H(x) = Σ h_k (x-λ)^k expanded in the standard basis
        let shift = UniPoly(alloc::vec![-lambda.clone(), rat_one()]);
        let mut hx = UniPoly::zero();
        let mut power = UniPoly::constant(rat_one());
        for hk in &h {
            hx = hx.add(&power.scale(hk));
            power = power.mul(&shift);
        }
        let projector = linalg::mat_mul(&hx.eval_matrix(&a), &q.eval_matrix(&a));
        projector_sum = linalg::mat_add(&projector_sum, &projector);
        // e^(λε) Σ_{k<m} P (A-λI)^k ε^k / k!
        let a_shift = linalg::mat_add(&a, &linalg::mat_scale(&identity, &-lambda.clone()));
        let mut nil = projector.clone();
        let mut fact = rat_one();
        for k in 0..*mult {
            if k > 0 {
                nil = linalg::mat_mul(&nil, &a_shift);
                fact *= rat_int(k as i64);
            }
            for r in 0..n {
                for c in 0..n {
                    if nil[r][c].is_zero() {
                        continue;
                    }
                    entries[r][c].insert(
                        lambda.clone(),
                        UniPoly::monomial(nil[r][c].clone() / fact.clone(), k),
                    );
                }
            }
        }
    }
    debug_assert_eq!(projector_sum, identity, "spectral projectors must resolve the identity");
    let map = AdjointMap {
        direction: i,
        entries,
        exact: true,
    };
    debug_assert!({
        let at0 = map.eval_exact(&EpsValue::Rational(rat_zero())).unwrap();
        at0 == identity
    });
    Ok(map)
}

/// Truncated Lie series `Σ_{k<=order} (-ε ad)^k / k!`, the explicitly
/// approximate fallback when the spectrum is not rational.
pub fn adjoint_exp_truncated(alg: &LieAlgebra, i: usize, order: usize) -> AdjointMap {
    let n = alg.dim();
    let a = linalg::mat_scale(&alg.ad_matrix(i), &-rat_one());
    let mut entries = alloc::vec![alloc::vec![ExpPoly::zero(); n]; n];
    let mut power = linalg::mat_identity(n);
    let mut fact = rat_one();
    for k in 0..=order {
        if k > 0 {
            power = linalg::mat_mul(&power, &a);
            fact *= rat_int(k as i64);
        }
        for r in 0..n {
            for c in 0..n {
                if !power[r][c].is_zero() {
                    entries[r][c].insert(
                        rat_zero(),
                        UniPoly::monomial(power[r][c].clone() / fact.clone(), k),
                    );
                }
            }
        }
    }
    AdjointMap {
        direction: i,
        entries,
        exact: false,
    }
}

/// One-parameter flow of a coordinatewise-affine field: each coordinate
/// component must be `a*z + b` in that coordinate alone. Translations give
/// `z + b h`, scalings `(z + b/a) e^(a h) - b/a`.
pub fn flow(
    x: &VectorField,
    sys: &PdeSystem,
    h: &Symbol,
) -> Result<Vec<(Symbol, Expr)>, AlgebraError> {
    let coords: Vec<Symbol> = sys
        .independents()
        .iter()
        .chain(sys.dependents())
        .cloned()
        .collect();
    let mut out = Vec::new();
    for (comp, coord) in x.components().zip(&coords) {
        let bad = || AlgebraError::UnsupportedFlow {
            coordinate: coord.name().to_string(),
        };
        for s in exprcore::free_symbols(comp) {
            if s != *coord {
                return Err(bad());
            }
        }
        let vars = exprcore::varset(alloc::vec![coord.clone()]);
        let p = crate::exprcore::PolyForm::from_expr(comp, &vars).map_err(|_| bad())?;
        if p.degree_in(coord) > 1 {
            return Err(bad());
        }
        let a = p
            .coefficient_of(coord, 1)
            .constant_value()
            .ok_or_else(bad)?;
        let b = p
            .coefficient_of(coord, 0)
            .constant_value()
            .ok_or_else(bad)?;
        let z = Expr::sym(coord);
        let update = if a.is_zero() {
            exprcore::add2(z, exprcore::mul2(Expr::Const(b), Expr::sym(h)))
        } else {
            let growth = exprcore::exp_of(exprcore::mul2(Expr::Const(a.clone()), Expr::sym(h)));
            let offset = b / a;
            if offset.is_zero() {
                exprcore::mul2(z, growth)
            } else {
                exprcore::sub(
                    exprcore::mul2(
                        exprcore::add2(z, Expr::Const(offset.clone())),
                        growth,
                    ),
                    Expr::Const(offset),
                )
            }
        };
        out.push((coord.clone(), update));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detsolve::GeneratorBasis;
    use crate::jet::{reduce_mod_system, solve_leading};
    use crate::testsys;
    use exprcore::parse_expr;

    fn rnc_paper_algebra() -> (PdeSystem, LieAlgebra) {
        let sys = testsys::rnc();
        let ctx = sys.context();
        let mk = |xi: [&str; 2], phi: [&str; 3]| VectorField {
            xi: xi.iter().map(|t| parse_expr(t, ctx).unwrap()).collect(),
            phi: phi.iter().map(|t| parse_expr(t, ctx).unwrap()).collect(),
        };
        let fields = alloc::vec![
            mk(["1", "0"], ["0", "0", "0"]),
            mk(["0", "1"], ["0", "0", "0"]),
            mk(["x", "0"], ["u", "0", "theta"]),
            mk(["2*x", "y"], ["0", "-v", "-2*theta"]),
        ];
        let alg = LieAlgebra::from_basis(GeneratorBasis { fields }, &sys).unwrap();
        (sys, alg)
    }

    #[test]
    fn rnc_lie_table() {
        let (_, alg) = rnc_paper_algebra();
        let r = |n: i64| rat_int(n);
        // nonzero entries exactly {c¹₁₃=1, c¹₁₄=2, c²₂₄=1} plus antisymmetry
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let expect = match (i, j, k) {
                        (0, 2, 0) => r(1),
                        (2, 0, 0) => r(-1),
                        (0, 3, 0) => r(2),
                        (3, 0, 0) => r(-2),
                        (1, 3, 1) => r(1),
                        (3, 1, 1) => r(-1),
                        _ => r(0),
                    };
                    assert_eq!(
                        alg.bracket_coeffs(i, j)[k],
                        expect,
                        "c^{}_{}{} mismatch",
                        k + 1,
                        i + 1,
                        j + 1
                    );
                }
            }
        }
    }

    #[test]
    fn bracket_basics() {
        let sys = testsys::rnc();
        let ctx = sys.context();
        let dx = VectorField {
            xi: alloc::vec![Expr::one(), Expr::zero()],
            phi: alloc::vec![Expr::zero(); 3],
        };
        let dy = VectorField {
            xi: alloc::vec![Expr::zero(), Expr::one()],
            phi: alloc::vec![Expr::zero(); 3],
        };
        assert!(bracket(&dx, &dy, &sys).is_zero());
        let xdx = VectorField {
            xi: alloc::vec![parse_expr("x", ctx).unwrap(), Expr::zero()],
            phi: alloc::vec![Expr::zero(); 3],
        };
        let br = bracket(&dx, &xdx, &sys);
        assert!(exprcore::poly_equal(&br.xi[0], &Expr::one()).unwrap());
        assert!(br.xi[1].is_zero());
    }

    #[test]
    fn ad_matrices_match_the_table() {
        let (_, alg) = rnc_paper_algebra();
        let ad3 = alg.ad_matrix(2);
        // ad_{X3}: X1 -> [X3,X1] = -X1, everything else 0
        assert_eq!(ad3[0][0], rat_int(-1));
        for (k, row) in ad3.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if (k, j) != (0, 0) {
                    assert!(v.is_zero(), "ad3[{k}][{j}] = {v}");
                }
            }
        }
        let ad4 = alg.ad_matrix(3);
        assert_eq!(ad4[0][0], rat_int(-2));
        assert_eq!(ad4[1][1], rat_int(-1));
        // ad of an element on itself vanishes
        for i in 0..4 {
            let m = alg.ad_matrix(i);
            let mut e = alloc::vec![rat_zero(); 4];
            e[i] = rat_one();
            assert!(linalg::mat_vec(&m, &e).iter().all(Rat::is_zero));
        }
    }

    #[test]
    fn adjoint_exponentials_match_hand_series() {
        let (_, alg) = rnc_paper_algebra();
        let eps = Symbol::new("eps", crate::exprcore::SymbolKind::GroupParam);

        // Ad(exp(εX1))X3 = X3 - εX1 (series terminates)
        let m1 = adjoint_exp(&alg, 0).unwrap();
        assert_eq!(
            alloc::format!("{}", m1.entries[0][2].to_expr(&eps)),
            "-eps"
        );
        assert_eq!(
            alloc::format!("{}", m1.entries[2][2].to_expr(&eps)),
            "1"
        );
        // Ad(exp(εX1))X4 = X4 - 2εX1
        assert_eq!(
            alloc::format!("{}", m1.entries[0][3].to_expr(&eps)),
            "-2*eps"
        );

        // Ad(exp(εX3))X1 = e^ε X1 under the literal series convention
        let m3 = adjoint_exp(&alg, 2).unwrap();
        assert_eq!(
            alloc::format!("{}", m3.entries[0][0].to_expr(&eps)),
            "exp(eps)"
        );
        // paper-sign variant prints e^{-ε}
        let m3p = m3.negate_param();
        assert_eq!(
            alloc::format!("{}", m3p.entries[0][0].to_expr(&eps)),
            "exp(-eps)"
        );

        // Ad(exp(εX4)): X1 scales by e^{2ε}, X2 by e^{ε} (paper sign: e^{-2ε}, e^{-ε})
        let m4 = adjoint_exp(&alg, 3).unwrap();
        assert_eq!(
            alloc::format!("{}", m4.entries[0][0].to_expr(&eps)),
            "exp(2*eps)"
        );
        assert_eq!(
            alloc::format!("{}", m4.entries[1][1].to_expr(&eps)),
            "exp(eps)"
        );
    }

    #[test]
    fn adjoint_group_law() {
        let (_, alg) = rnc_paper_algebra();
        for i in 0..4 {
            let m = adjoint_exp(&alg, i).unwrap();
            assert!(m.verify_group_law(), "group law fails for direction {i}");
            // numeric spot check at 20 random ε pairs
            let mut rng = crate::rng::SplitMix64::new(17 + i as u64);
            for _ in 0..20 {
                let e1 = rng.f64_unit() * 2.0 - 1.0;
                let e2 = rng.f64_unit() * 2.0 - 1.0;
                let a = m.eval_f64(e1);
                let b = m.eval_f64(e2);
                let ab = m.eval_f64(e1 + e2);
                for r in 0..4 {
                    for c in 0..4 {
                        let mut acc = 0.0;
                        for k in 0..4 {
                            acc += a[r][k] * b[k][c];
                        }
                        assert!(
                            crate::fmath::abs(acc - ab[r][c]) < 1e-12,
                            "direction {i}: entry ({r},{c})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn adjoint_exp_agrees_with_truncated_series_through_order6() {
        let (_, alg) = rnc_paper_algebra();
        for i in 0..4 {
            let exact = adjoint_exp(&alg, i).unwrap();
            let truncated = adjoint_exp_truncated(&alg, i, 6);
            for r in 0..4 {
                for c in 0..4 {
                    let a = exact.entries[r][c].series(6);
                    let b = truncated.entries[r][c].series(6);
                    assert_eq!(a, b, "series mismatch direction {i} entry ({r},{c})");
                }
            }
        }
    }

    #[test]
    fn non_split_spectrum_is_reported_with_fallback() {
        // [X3,X1] = X2, [X3,X2] = 2 X1: hyperbolic action with eigenvalues
        // ±√2 on the nilradical
        let sys = testsys::rnc();
        let mut c = alloc::vec![alloc::vec![alloc::vec![rat_zero(); 3]; 3]; 3];
        c[2][0][1] = rat_one();
        c[0][2][1] = -rat_one();
        c[2][1][0] = rat_int(2);
        c[1][2][0] = rat_int(-2);
        let labels = alloc::vec!["X1".into(), "X2".into(), "X3".into()];
        let alg = LieAlgebra::from_structure(labels, c, &sys).unwrap();
        match adjoint_exp(&alg, 2) {
            Err(AlgebraError::NonSplit { direction: 2, .. }) => {}
            other => panic!("expected NonSplit, got {other:?}"),
        }
        let fallback = adjoint_exp_truncated(&alg, 2, 8);
        assert!(!fallback.exact);
        // truncated series still matches exp numerically to truncation error
        let v = fallback.eval_f64(0.1);
        let c2 = crate::fmath::exp(0.1 * crate::fmath::sqrt(2.0));
        let expect = (c2 + 1.0 / c2) / 2.0; // cosh(√2 ε)
        assert!(crate::fmath::abs(v[0][0] - expect) < 1e-9);
    }

    #[test]
    fn flows_reproduce_the_one_parameter_groups() {
        let (sys, alg) = rnc_paper_algebra();
        let mut ctx = sys.context().clone();
        let h = ctx.add_symbol("h", crate::exprcore::SymbolKind::GroupParam);
        let ctx = &ctx;
        let as_strings = |f: &VectorField| -> Vec<String> {
            flow(f, &sys, &h)
                .unwrap()
                .into_iter()
                .map(|(_, e)| alloc::format!("{e}"))
                .collect()
        };
        assert_eq!(
            as_strings(&alg.basis.fields[0]),
            alloc::vec!["x + h", "y", "u", "v", "theta"]
        );
        assert_eq!(
            as_strings(&alg.basis.fields[2]),
            alloc::vec!["x*exp(h)", "y", "u*exp(h)", "v", "theta*exp(h)"]
        );
        assert_eq!(
            as_strings(&alg.basis.fields[3]),
            alloc::vec![
                "x*exp(2*h)",
                "y*exp(h)",
                "u",
                "v*exp(-h)",
                "theta*exp(-2*h)"
            ]
        );
        // affine with offset: (z + b/a) e^{ah} - b/a
        let mixed = VectorField {
            xi: alloc::vec![parse_expr("2*x + 4", ctx).unwrap(), Expr::zero()],
            phi: alloc::vec![Expr::zero(); 3],
        };
        let updates = flow(&mixed, &sys, &h).unwrap();
        let expect = parse_expr("(x + 2)*exp(2*h) - 2", ctx).unwrap();
        assert!(exprcore::equal_extended(&updates[0].1, &expect));
        // outside the class
        let shear = VectorField {
            xi: alloc::vec![Expr::zero(), parse_expr("x", ctx).unwrap()],
            phi: alloc::vec![Expr::zero(); 3],
        };
        match flow(&shear, &sys, &h) {
            Err(AlgebraError::UnsupportedFlow { coordinate }) => assert_eq!(coordinate, "y"),
            other => panic!("expected UnsupportedFlow, got {other:?}"),
        }
    }

    #[test]
    fn flow_derivative_at_zero_recovers_components() {
        let (sys, alg) = rnc_paper_algebra();
        let mut ctx = sys.context().clone();
        let h = ctx.add_symbol("h", crate::exprcore::SymbolKind::GroupParam);
        for f in &alg.basis.fields {
            let updates = flow(f, &sys, &h).unwrap();
            for ((_, update), comp) in updates.iter().zip(f.components()) {
                let d = exprcore::diff(update, &h);
                let mut at0 = alloc::collections::BTreeMap::new();
                at0.insert(h.clone(), Expr::zero());
                let d0 = exprcore::substitute(&d, &at0);
                assert!(
                    exprcore::equal_extended(&d0, comp),
                    "d/dh at 0 gave {d0}, expected {comp}"
                );
            }
        }
    }

    #[test]
    fn flow_pullback_preserves_the_system_on_shell() {
        // For scaling generators the jets transform by integer powers of
        // E = e^h; substituting and reducing must give zero for any E > 0.
        // Sampling E rational keeps everything exact.
        let (sys, alg) = rnc_paper_algebra();
        let sf = solve_leading(&sys).unwrap();
        let base_ctx = sys.context();
        let mut rng = crate::rng::SplitMix64::new(23);
        for f in &alg.basis.fields {
            // per-coordinate affine data (a, b): exactly the flow class
            let coords: Vec<Symbol> = sys
                .independents()
                .iter()
                .chain(sys.dependents())
                .cloned()
                .collect();
            let mut weights = Vec::new();
            for (comp, coord) in f.components().zip(&coords) {
                let vars = exprcore::varset(alloc::vec![coord.clone()]);
                let p = crate::exprcore::PolyForm::from_expr(comp, &vars).unwrap();
                let a = p.coefficient_of(coord, 1).constant_value().unwrap();
                weights.push(a);
            }
            for _ in 0..10 {
                let e_value = {
                    let n = rng.int_in(1, 9);
                    let d = rng.int_in(1, 9);
                    crate::exprcore::rat(n, d)
                };
                for eq in sys.equations() {
                    let mut map = alloc::collections::BTreeMap::new();
                    for s in exprcore::free_symbols(eq) {
                        if let Some(jc) = crate::jet::JetCoord::from_symbol(base_ctx, &s) {
                            // weight of u^α_J under the flow: λ_α - Σ J_i a_i
                            let mut w = weights[sys.independents().len() + jc.dep].clone();
                            for (i, &cnt) in jc.multi.iter().enumerate() {
                                w -= rat_int(cnt as i64) * &weights[i];
                            }
                            let wi = w.to_integer().to_i64().unwrap();
                            debug_assert!(rational::is_integer(&w));
                            map.insert(
                                s.clone(),
                                exprcore::mul2(
                                    Expr::Const(rational::rat_pow(&e_value, wi)),
                                    Expr::sym(&s),
                                ),
                            );
                        }
                    }
                    let transformed = exprcore::substitute(eq, &map);
                    let reduced = reduce_mod_system(&transformed, &sf, &sys);
                    assert!(
                        reduced.is_zero(),
                        "pullback through {:?} not on-shell: {reduced}",
                        crate::detsolve::field_components(f, &sys)
                    );
                }
            }
        }
    }

    #[test]
    fn combination_labels() {
        let labels: Vec<String> = alloc::vec!["X1".into(), "X2".into(), "X3".into(), "X4".into()];
        let lbl = |v: [i64; 4]| {
            combination_string(&labels, &v.map(rat_int))
        };
        assert_eq!(lbl([0, 0, 0, 0]), "0");
        assert_eq!(lbl([1, 0, 0, 0]), "X1");
        assert_eq!(lbl([2, 0, 0, 0]), "2*X1");
        assert_eq!(lbl([-1, 1, 0, 0]), "X2-X1");
        assert_eq!(lbl([0, 0, 1, 1]), "X3+X4");
        assert_eq!(lbl([0, 0, -1, 1]), "X4-X3");
    }
}
