//! Classification of one-dimensional subalgebras under the adjoint action:
//! greedy normalization with exact transcripts, orbit invariants,
//! pairwise-inequivalence certificates, and a seeded sampling audit.
//!
//! The classifier supports four-dimensional algebras whose derived algebra
//! is the abelian span of the first two basis members, with the last two
//! acting diagonally on it: `[X_i, X_m] = w_im X_i` for `i ∈ {1,2}`,
//! `m ∈ {3,4}`, `[X_1,X_2] = [X_3,X_4] = 0`, `det w ≠ 0`. Both the
//! reference basis and the solver's canonical basis have this shape.
//!
//! Consequences used throughout (all exact):
//! - `(a_3, a_4)` is pointwise invariant under every adjoint map, since all
//!   brackets lie in `span{X_1, X_2}`.
//! - the translation move along `X_i` changes `a_i` by `-ε(w_i3 a_3 + w_i4 a_4)`
//!   and nothing else; it can kill `a_i` exactly when that weight is nonzero.
//! - the scaling move along `X_m` multiplies `a_i` by `e^(w_im ε)`, which is
//!   positive: signs of unkillable coordinates are invariant.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::exprcore::rational::{self, rat_int, rat_one, rat_zero, Rat};
use crate::liealg::{adjoint_exp, AdjointMap, EpsValue, LieAlgebra};
use crate::linalg;
use crate::rng::SplitMix64;

use num_traits::{One, Signed, Zero};

/// Coefficient vector over the algebra basis; numeric variants are flagged.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgebraElement {
    Exact(Vec<Rat>),
    Numeric(Vec<f64>),
}

impl AlgebraElement {
    pub fn exact(coeffs: Vec<Rat>) -> Self {
        AlgebraElement::Exact(coeffs)
    }

    pub fn len(&self) -> usize {
        match self {
            AlgebraElement::Exact(v) => v.len(),
            AlgebraElement::Numeric(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            AlgebraElement::Exact(v) => v.iter().map(rational::to_f64).collect(),
            AlgebraElement::Numeric(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifyError {
    /// The algebra is outside the supported structure pattern.
    UnsupportedStructure(String),
    Adjoint(crate::liealg::AlgebraError),
    ZeroElement,
}

impl core::fmt::Display for ClassifyError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ClassifyError::UnsupportedStructure(what) => {
                write!(f, "unsupported algebra structure: {what}")
            }
            ClassifyError::Adjoint(e) => write!(f, "{e}"),
            ClassifyError::ZeroElement => f.write_str("cannot normalize the zero element"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ClassifyError {}

/// Diagonal weights of the adjoint action on the nilradical:
/// `w[i][m]` with `[X_{i+1}, X_{m+3}] = w[i][m] X_{i+1}`.
#[derive(Debug, Clone)]
pub struct WeightPattern {
    pub w: [[Rat; 2]; 2],
}

impl WeightPattern {
    /// Validate the structure constants against the supported pattern.
    pub fn from_algebra(alg: &LieAlgebra) -> Result<WeightPattern, ClassifyError> {
        let fail = |what: &str| Err(ClassifyError::UnsupportedStructure(what.to_string()));
        if alg.dim() != 4 {
            return fail("dimension must be 4");
        }
        let zero = alloc::vec![rat_zero(); 4];
        if alg.bracket_coeffs(0, 1) != &zero[..] {
            return fail("[X1, X2] must vanish");
        }
        if alg.bracket_coeffs(2, 3) != &zero[..] {
            return fail("[X3, X4] must vanish");
        }
        let mut w = [[rat_zero(), rat_zero()], [rat_zero(), rat_zero()]];
        for i in 0..2 {
            for m in 0..2 {
                let c = alg.bracket_coeffs(i, m + 2);
                for (k, v) in c.iter().enumerate() {
                    if k != i && !v.is_zero() {
                        return fail("brackets with X3/X4 must be diagonal on X1/X2");
                    }
                }
                w[i][m] = c[i].clone();
            }
        }
        let det = w[0][0].clone() * &w[1][1] - w[0][1].clone() * &w[1][0];
        if det.is_zero() {
            return fail("weight matrix must be nonsingular");
        }
        Ok(WeightPattern { w })
    }

    /// Translation weight of coordinate `i` given the invariant pair
    /// `(a_3, a_4)`.
    fn tau(&self, i: usize, a3: &Rat, a4: &Rat) -> Rat {
        self.w[i][0].clone() * a3 + self.w[i][1].clone() * a4
    }
}

/// One recorded adjoint move; `eps` is exact where possible.
#[derive(Debug, Clone, PartialEq)]
pub enum EpsAmount {
    Exact(EpsValue),
    /// Numeric fallback, flagged.
    Numeric(f64),
}

impl core::fmt::Display for EpsAmount {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EpsAmount::Exact(e) => write!(f, "{e}"),
            EpsAmount::Numeric(x) => write!(f, "~{x:.6e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Move {
    pub direction: usize,
    pub eps: EpsAmount,
}

/// Normalization transcript: the overall subalgebra rescaling applied
/// first, then the adjoint moves in order.
#[derive(Debug, Clone)]
pub struct Transcript {
    pub scalar: Rat,
    pub moves: Vec<Move>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Paper,
    Derived,
}

#[derive(Debug, Clone)]
pub struct Representative {
    pub element: Vec<Rat>,
    pub label: String,
    pub provenance: Provenance,
}

/// The nine reference representatives, as exact coefficient tuples.
pub fn reference_representatives() -> Vec<(&'static str, [i64; 4])> {
    alloc::vec![
        ("X1", [1, 0, 0, 0]),
        ("X2", [0, 1, 0, 0]),
        ("X3", [0, 0, 1, 0]),
        ("X1+X2", [1, 1, 0, 0]),
        ("X2-X1", [-1, 1, 0, 0]),
        ("X2+X3", [0, 1, 1, 0]),
        ("X3-X2", [0, -1, 1, 0]),
        ("X3+X4", [0, 0, 1, 1]),
        ("X4-X3", [0, 0, -1, 1]),
    ]
}

fn is_reference(element: &[Rat]) -> Option<&'static str> {
    for (label, tuple) in reference_representatives() {
        if element
            .iter()
            .zip(tuple.iter())
            .all(|(a, &b)| *a == rat_int(b))
        {
            return Some(label);
        }
    }
    None
}

/// Apply `Ad(exp(ε X_direction))` to an element through the closed-form
/// adjoint matrix: exact whenever every entry evaluates exactly.
pub fn adjoint_apply(
    alg: &LieAlgebra,
    direction: usize,
    eps: &EpsAmount,
    a: &AlgebraElement,
) -> Result<AlgebraElement, ClassifyError> {
    let map = adjoint_exp(alg, direction).map_err(ClassifyError::Adjoint)?;
    Ok(apply_map(&map, eps, a))
}

fn apply_map(map: &AdjointMap, eps: &EpsAmount, a: &AlgebraElement) -> AlgebraElement {
    if let (EpsAmount::Exact(ev), AlgebraElement::Exact(v)) = (eps, a) {
        if let Some(m) = map.eval_exact(ev) {
            return AlgebraElement::Exact(linalg::mat_vec(&m, v));
        }
    }
    let m = map.eval_f64(match eps {
        EpsAmount::Exact(e) => e.to_f64(),
        EpsAmount::Numeric(x) => *x,
    });
    let v = a.to_f64();
    AlgebraElement::Numeric(
        m.iter()
            .map(|row| row.iter().zip(&v).map(|(c, x)| c * x).sum())
            .collect(),
    )
}

/// Exact scaling move: `ε` with `e^(w_im ε) = factor` for every affected
/// coordinate, preferring exact `ln(rational)` transcripts.
fn scaling_eps(weight: &Rat, factor: &Rat) -> EpsAmount {
    // e^(w ε) = factor  =>  ε = ln(factor) / w = ln(factor^(1/w))
    use num_traits::ToPrimitive;
    if let (Some(p), Some(q)) = (weight.numer().to_i64(), weight.denom().to_u32()) {
        // factor^(q/p) rational?
        if p != 0 {
            if let Some(r) = rational::rat_root_pow(factor, q as i64, p.unsigned_abs() as u32) {
                let r = if p < 0 { r.recip() } else { r };
                return EpsAmount::Exact(EpsValue::LnRational(r));
            }
        }
    }
    EpsAmount::Numeric(
        crate::fmath::ln(rational::to_f64(factor)) / rational::to_f64(weight),
    )
}

/// Greedy normalization following the structure pattern: rescale the
/// invariant pair, kill every translatable coordinate exactly, scale the
/// survivors to unit magnitude, and fix the residual sign freedom. The
/// returned element is always exact; numeric ε appears only in the
/// transcript (and only when a scaling target has no rational root).
pub fn normalize_element(
    alg: &LieAlgebra,
    a: &[Rat],
) -> Result<(Representative, Transcript), ClassifyError> {
    let pattern = WeightPattern::from_algebra(alg)?;
    if a.iter().all(Rat::is_zero) {
        return Err(ClassifyError::ZeroElement);
    }
    let mut moves = Vec::new();

    // overall subalgebra rescaling: pin a4 = 1, else a3 = 1, else defer
    let scalar = if !a[3].is_zero() {
        a[3].clone().recip()
    } else if !a[2].is_zero() {
        a[2].clone().recip()
    } else {
        rat_one()
    };
    let mut b: Vec<Rat> = a.iter().map(|c| c.clone() * &scalar).collect();
    let mut scalar = scalar;

    let (a3, a4) = (b[2].clone(), b[3].clone());
    if !a3.is_zero() || !a4.is_zero() {
        // translations first: they commute with nothing we still need
        for i in 0..2 {
            if b[i].is_zero() {
                continue;
            }
            let tau = pattern.tau(i, &a3, &a4);
            if !tau.is_zero() {
                let eps = b[i].clone() / tau;
                moves.push(Move {
                    direction: i,
                    eps: EpsAmount::Exact(EpsValue::Rational(eps)),
                });
                b[i] = rat_zero();
            }
        }
        // scale any surviving coordinate to magnitude one
        for i in 0..2 {
            if b[i].is_zero() || b[i].abs().is_one() {
                continue;
            }
            // pick the acting direction that does not disturb the other
            // (already-final) coordinate when possible
            let other = 1 - i;
            let mut m_choice = None;
            for m in 0..2 {
                if pattern.w[i][m].is_zero() {
                    continue;
                }
                if pattern.w[other][m].is_zero() || b[other].is_zero() {
                    m_choice = Some(m);
                    break;
                }
            }
            let Some(m) = m_choice else {
                continue; // untouchable without disturbing: leave as modulus
            };
            let factor = b[i].abs().recip();
            let eps = scaling_eps(&pattern.w[i][m], &factor);
            moves.push(Move {
                direction: m + 2,
                eps,
            });
            let sign = if b[i].is_negative() { -rat_one() } else { rat_one() };
            b[i] = sign;
        }
    } else {
        // nilpotent slice: magnitudes of both coordinates are scalable
        // (det w ≠ 0); do the coordinate whose move disturbs the other
        // first, then repair the other
        let order: Vec<usize> = if b[0].is_zero() || b[1].is_zero() {
            alloc::vec![0, 1]
        } else {
            // prefer handling i whose available direction also moves the
            // other coordinate before that other is finalized
            alloc::vec![1, 0]
        };
        for &i in &order {
            if b[i].is_zero() || b[i].abs().is_one() {
                continue;
            }
            let other = 1 - i;
            let mut m_choice = None;
            for m in 0..2 {
                if pattern.w[i][m].is_zero() {
                    continue;
                }
                if pattern.w[other][m].is_zero() || b[other].is_zero() {
                    m_choice = Some(m);
                    break;
                }
                m_choice = Some(m); // disturbing fallback
            }
            let Some(m) = m_choice else { continue };
            let factor = b[i].abs().recip();
            let eps = scaling_eps(&pattern.w[i][m], &factor);
            moves.push(Move {
                direction: m + 2,
                eps: eps.clone(),
            });
            // track the disturbance on the other coordinate exactly when
            // the ε is an exact logarithm
            if !pattern.w[other][m].is_zero() && !b[other].is_zero() {
                if let EpsAmount::Exact(EpsValue::LnRational(q)) = &eps {
                    use num_traits::ToPrimitive;
                    let wp = pattern.w[other][m].numer().to_i64().unwrap_or(0);
                    let wq = pattern.w[other][m].denom().to_u32().unwrap_or(1);
                    if let Some(f) = rational::rat_root_pow(q, wp, wq) {
                        b[other] = b[other].clone() * f;
                    }
                }
            }
            let sign = if b[i].is_negative() { -rat_one() } else { rat_one() };
            b[i] = sign;
        }
        // residual overall sign: make the highest-index nonzero coordinate
        // positive
        if let Some(k) = (0..2).rev().find(|&k| !b[k].is_zero()) {
            if b[k].is_negative() {
                scalar = -scalar;
                for c in b.iter_mut() {
                    *c = -c.clone();
                }
            }
        }
    }

    let label = crate::liealg::combination_string(&alg.labels, &b);
    let provenance = if is_reference(&b).is_some() {
        Provenance::Paper
    } else {
        Provenance::Derived
    };
    Ok((
        Representative {
            element: b,
            label,
            provenance,
        },
        Transcript { scalar, moves },
    ))
}

/// An adjoint-orbit invariant: a rational tuple constant on orbits up to
/// overall scaling of the element.
pub struct OrbitInvariant {
    pub description: String,
    pub eval: fn(&WeightPattern, &[Rat]) -> Vec<Rat>,
}

/// Canonical projective class of the invariant pair `(a_3, a_4)`:
/// `[0,0]`, `[1,0]`, or `[t,1]`.
fn projective_class(_p: &WeightPattern, a: &[Rat]) -> Vec<Rat> {
    if !a[3].is_zero() {
        alloc::vec![a[2].clone() / a[3].clone(), rat_one()]
    } else if !a[2].is_zero() {
        alloc::vec![rat_one(), rat_zero()]
    } else {
        alloc::vec![rat_zero(), rat_zero()]
    }
}

/// Per-coordinate orbit class of `(a_1, a_2)` after pinning the overall
/// scale against `(a_3, a_4)` (or against the sign convention on the
/// nilpotent slice): 9 = killable (translation weight nonzero; the value of
/// `a_i` is then no invariant at all), 0 = pinned zero, 2 ± 1 = pinned sign
/// of an unkillable coordinate.
fn coordinate_classes(p: &WeightPattern, a: &[Rat]) -> Vec<Rat> {
    let mut b: Vec<Rat> = a.to_vec();
    // pin the scale exactly as the normalizer does
    let scalar = if !b[3].is_zero() {
        b[3].clone().recip()
    } else if !b[2].is_zero() {
        b[2].clone().recip()
    } else {
        match (0..2).rev().find(|&k| !b[k].is_zero()) {
            Some(k) if b[k].is_negative() => -rat_one(),
            _ => rat_one(),
        }
    };
    for c in b.iter_mut() {
        *c = c.clone() * &scalar;
    }
    let mut out = Vec::new();
    for i in 0..2 {
        if !p.tau(i, &b[2], &b[3]).is_zero() {
            out.push(rat_int(9));
        } else if b[i].is_zero() {
            out.push(rat_zero());
        } else {
            out.push(rat_int(2) + rat_int(if b[i].is_negative() { -1 } else { 1 }));
        }
    }
    out
}

pub fn orbit_invariants() -> Vec<OrbitInvariant> {
    alloc::vec![
        OrbitInvariant {
            description: "projective class of the invariant pair (a3 : a4)".into(),
            eval: projective_class,
        },
        OrbitInvariant {
            description: "zero/killable/sign classes of (a1, a2) at pinned scale".into(),
            eval: coordinate_classes,
        },
    ]
}

/// Verify numerically that the invariants are constant along random
/// adjoint maps applied to `a` (exact rational ε, so the check is exact).
pub fn verify_invariants(
    alg: &LieAlgebra,
    a: &[Rat],
    maps: usize,
    seed: u64,
) -> Result<bool, ClassifyError> {
    let pattern = WeightPattern::from_algebra(alg)?;
    let invs = orbit_invariants();
    let expect: Vec<Vec<Rat>> = invs.iter().map(|inv| (inv.eval)(&pattern, a)).collect();
    let mut rng = SplitMix64::new(seed);
    let mut cur = a.to_vec();
    for _ in 0..maps {
        let dir = rng.int_in(0, 3) as usize;
        let eps = if dir < 2 {
            EpsValue::Rational(rng.small_rational())
        } else {
            // exact scaling: ε = ln(q), q > 0
            let mut q = rng.small_rational_nonzero();
            if q.is_negative() {
                q = -q;
            }
            EpsValue::LnRational(q)
        };
        let next = adjoint_apply(
            alg,
            dir,
            &EpsAmount::Exact(eps),
            &AlgebraElement::Exact(cur.clone()),
        )?;
        cur = match next {
            AlgebraElement::Exact(v) => v,
            AlgebraElement::Numeric(_) => return Ok(false),
        };
        for (inv, e) in invs.iter().zip(&expect) {
            if (inv.eval)(&pattern, &cur) != *e {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Why two representatives lie on different orbits, or `NotSeparated`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairVerdict {
    Distinct { invariant: String },
    NotSeparated,
}

/// Pairwise inequivalence by the exact orbit invariants, scanning both
/// signs of the subalgebra rescaling.
pub fn verify_inequivalent(
    alg: &LieAlgebra,
    reps: &[Representative],
) -> Result<Vec<(usize, usize, PairVerdict)>, ClassifyError> {
    let pattern = WeightPattern::from_algebra(alg)?;
    let mut out = Vec::new();
    for i in 0..reps.len() {
        for j in (i + 1)..reps.len() {
            out.push((i, j, pair_verdict(&pattern, &reps[i].element, &reps[j].element)));
        }
    }
    Ok(out)
}

fn pair_verdict(pattern: &WeightPattern, p: &[Rat], q: &[Rat]) -> PairVerdict {
    // subalgebra equivalence allows any nonzero rescaling of either side
    for sign in [rat_one(), -rat_one()] {
        let ps: Vec<Rat> = p.iter().map(|c| c.clone() * &sign).collect();
        if projective_class(pattern, &ps) == projective_class(pattern, q)
            && coordinate_classes(pattern, &ps) == coordinate_classes(pattern, q)
        {
            return PairVerdict::NotSeparated;
        }
    }
    if projective_class(pattern, p) != projective_class(pattern, q)
        && projective_class(pattern, &p.iter().map(|c| -c.clone()).collect::<Vec<_>>())
            != projective_class(pattern, q)
    {
        PairVerdict::Distinct {
            invariant: "projective class of (a3 : a4)".into(),
        }
    } else {
        PairVerdict::Distinct {
            invariant: "sign/zero classes of (a1, a2)".into(),
        }
    }
}

/// A discovered normal form with its sample count.
#[derive(Debug, Clone)]
pub struct Bucket {
    pub representative: Representative,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct ClassifyReport {
    pub seed: u64,
    pub samples: usize,
    pub buckets: Vec<Bucket>,
    /// Reference representatives confirmed as fixed points of the
    /// normalizer.
    pub fixed_points: Vec<(String, bool)>,
    /// Labels discovered by sampling that are not on the reference list.
    pub additions: Vec<String>,
    /// Reference labels never hit by sampling (expected for the
    /// measure-zero slices).
    pub unsampled_reference: Vec<String>,
}

/// Draw seeded random rational elements, normalize each, and bucket the
/// normal forms; also confirm every reference representative is a fixed
/// point of the normalizer.
pub fn classify(
    alg: &LieAlgebra,
    samples: usize,
    seed: u64,
) -> Result<ClassifyReport, ClassifyError> {
    let mut rng = SplitMix64::new(seed);
    let mut buckets: Vec<Bucket> = Vec::new();
    for _ in 0..samples {
        let mut a: Vec<Rat> = (0..4).map(|_| rng.small_rational()).collect();
        while a.iter().all(Rat::is_zero) {
            a = (0..4).map(|_| rng.small_rational()).collect();
        }
        let (rep, _) = normalize_element(alg, &a)?;
        match buckets
            .iter_mut()
            .find(|b| b.representative.element == rep.element)
        {
            Some(b) => b.count += 1,
            None => buckets.push(Bucket {
                representative: rep,
                count: 1,
            }),
        }
    }
    buckets.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.representative.label.cmp(&b.representative.label))
    });

    let mut fixed_points = Vec::new();
    for (label, tuple) in reference_representatives() {
        let elem: Vec<Rat> = tuple.iter().map(|&k| rat_int(k)).collect();
        let (rep, _) = normalize_element(alg, &elem)?;
        fixed_points.push((label.to_string(), rep.element == elem));
    }

    let additions: Vec<String> = buckets
        .iter()
        .filter(|b| b.representative.provenance == Provenance::Derived)
        .map(|b| b.representative.label.clone())
        .collect();
    let sampled: Vec<&str> = buckets
        .iter()
        .map(|b| b.representative.label.as_str())
        .collect();
    let unsampled_reference = reference_representatives()
        .iter()
        .map(|(l, _)| l.to_string())
        .filter(|l| !sampled.contains(&l.as_str()))
        .collect();

    Ok(ClassifyReport {
        seed,
        samples,
        buckets,
        fixed_points,
        additions,
        unsampled_reference,
    })
}

#[cfg(test)]
#[allow(dead_code)]
pub(crate) fn tests_paper_algebra() -> LieAlgebra {
    use crate::detsolve::GeneratorBasis;
    use crate::exprcore::parse_expr;
    use crate::prolong::VectorField;
    let sys = crate::testsys::rnc();
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
    LieAlgebra::from_basis(GeneratorBasis { fields }, &sys).unwrap()
}
