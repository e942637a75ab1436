//! Exact rational linear algebra: fraction-free (Bareiss) elimination,
//! reduced echelon normalization, nullspace bases, span membership, and the
//! univariate polynomial helpers behind exact matrix exponentials.

use alloc::vec::Vec;

use crate::exprcore::rational::{rat_int, rat_one, rat_zero, Rat};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

pub type Row = Vec<Rat>;

/// Clear one rational row to coprime integers (sign preserved).
fn clear_row(row: &Row) -> Vec<BigInt> {
    let mut lcm = BigInt::one();
    for c in row {
        if !c.is_zero() {
            lcm = lcm.lcm(c.denom());
        }
    }
    let mut ints: Vec<BigInt> = row
        .iter()
        .map(|c| c.numer() * (&lcm / c.denom()))
        .collect();
    let mut g = BigInt::zero();
    for v in &ints {
        g = g.gcd(v);
    }
    if !g.is_zero() && !g.is_one() {
        for v in &mut ints {
            *v /= &g;
        }
    }
    ints
}

/// Bareiss fraction-free forward elimination. Returns the echelon matrix
/// (integer rows) and the pivot column of each nonzero row. Intermediate
/// divisions are exact by construction, so no fractions ever appear.
pub fn bareiss_echelon(rows: &[Row]) -> (Vec<Vec<BigInt>>, Vec<usize>) {
    let mut m: Vec<Vec<BigInt>> = rows.iter().map(clear_row).collect();
    m.retain(|r| r.iter().any(|v| !v.is_zero()));
    if m.is_empty() {
        return (m, Vec::new());
    }
    let ncols = m[0].len();
    let mut pivots = Vec::new();
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let pivot = m[r][c].clone();
        for i in (r + 1)..m.len() {
            let factor = m[i][c].clone();
            for j in 0..ncols {
                let v = &m[i][j] * &pivot - &factor * &m[r][j];
                debug_assert!((&v % &prev).is_zero(), "Bareiss division not exact");
                m[i][j] = v / &prev;
            }
        }
        prev = pivot;
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    m.truncate(r);
    // drop rows that became all-zero during elimination
    m.retain(|row| row.iter().any(|v| !v.is_zero()));
    (m, pivots)
}

/// Reduced row echelon form: pivot entries 1, zeros above and below pivots.
/// Elimination itself is fraction-free; only the final normalization divides.
pub fn rref(rows: &[Row]) -> (Vec<Row>, Vec<usize>) {
    let (m, pivots) = bareiss_echelon(rows);
    let mut out: Vec<Row> = m
        .iter()
        .map(|r| r.iter().map(|v| Rat::from_integer(v.clone())).collect())
        .collect();
    for (r, &c) in pivots.iter().enumerate() {
        let inv = out[r][c].clone().recip();
        for v in &mut out[r] {
            *v *= inv.clone();
        }
    }
    // zeros above pivots
    for (r, &c) in pivots.iter().enumerate().rev() {
        for i in 0..r {
            if !out[i][c].is_zero() {
                let f = out[i][c].clone();
                let lower = out[r].clone();
                for (j, v) in out[i].iter_mut().enumerate() {
                    *v -= f.clone() * &lower[j];
                }
            }
        }
    }
    (out, pivots)
}

/// Basis of the solution space of the homogeneous system `rows * x = 0`
/// over `ncols` unknowns, from the reduced echelon form. Deterministic for
/// a fixed row and column order; the empty system yields the identity basis.
pub fn nullspace(rows: &[Row], ncols: usize) -> Vec<Row> {
    let (r, pivots) = rref(rows);
    let is_pivot = |c: usize| pivots.iter().position(|&p| p == c);
    let mut basis = Vec::new();
    for free in 0..ncols {
        if is_pivot(free).is_some() {
            continue;
        }
        let mut v = alloc::vec![rat_zero(); ncols];
        v[free] = rat_one();
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = -r[row][free].clone();
        }
        basis.push(v);
    }
    basis
}

/// Solve `Σ c_i basis_i = target` exactly; `None` if the target is outside
/// the span.
pub fn express_in_span(basis: &[Row], target: &Row) -> Option<Vec<Rat>> {
    if basis.is_empty() {
        return if target.iter().all(Rat::is_zero) {
            Some(Vec::new())
        } else {
            None
        };
    }
    let dim = target.len();
    // augmented columns: basis vectors | target
    let rows: Vec<Row> = (0..dim)
        .map(|i| {
            let mut row: Row = basis.iter().map(|b| b[i].clone()).collect();
            row.push(target[i].clone());
            row
        })
        .collect();
    let (r, pivots) = rref(&rows);
    // inconsistent iff a pivot lands in the augmented column
    if pivots.contains(&basis.len()) {
        return None;
    }
    let mut coeffs = alloc::vec![rat_zero(); basis.len()];
    for (row, &pc) in pivots.iter().enumerate() {
        coeffs[pc] = r[row][basis.len()].clone();
    }
    Some(coeffs)
}

pub fn mat_identity(n: usize) -> Vec<Row> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { rat_one() } else { rat_zero() })
                .collect()
        })
        .collect()
}

pub fn mat_mul(a: &[Row], b: &[Row]) -> Vec<Row> {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut acc = rat_zero();
                    for l in 0..k {
                        if !a[i][l].is_zero() && !b[l][j].is_zero() {
                            acc += a[i][l].clone() * &b[l][j];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

pub fn mat_vec(a: &[Row], v: &[Rat]) -> Vec<Rat> {
    a.iter()
        .map(|row| {
            let mut acc = rat_zero();
            for (x, y) in row.iter().zip(v) {
                if !x.is_zero() && !y.is_zero() {
                    acc += x.clone() * y;
                }
            }
            acc
        })
        .collect()
}

pub fn mat_add(a: &[Row], b: &[Row]) -> Vec<Row> {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x.clone() + y).collect())
        .collect()
}

pub fn mat_scale(a: &[Row], k: &Rat) -> Vec<Row> {
    a.iter()
        .map(|r| r.iter().map(|x| x.clone() * k).collect())
        .collect()
}

fn trace(a: &[Row]) -> Rat {
    let mut t = rat_zero();
    for (i, row) in a.iter().enumerate() {
        t += row[i].clone();
    }
    t
}

/// Dense univariate polynomial, coefficients ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniPoly(pub Vec<Rat>);

impl UniPoly {
    pub fn zero() -> Self {
        UniPoly(Vec::new())
    }

    pub fn constant(c: Rat) -> Self {
        if c.is_zero() {
            Self::zero()
        } else {
            UniPoly(alloc::vec![c])
        }
    }

    pub fn monomial(c: Rat, deg: usize) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        let mut v = alloc::vec![rat_zero(); deg + 1];
        v[deg] = c;
        UniPoly(v)
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.iter().rposition(|c| !c.is_zero())
    }

    pub fn is_zero(&self) -> bool {
        self.degree().is_none()
    }

    fn trim(mut self) -> Self {
        while matches!(self.0.last(), Some(c) if c.is_zero()) {
            self.0.pop();
        }
        self
    }

    pub fn add(&self, other: &UniPoly) -> UniPoly {
        let n = self.0.len().max(other.0.len());
        let mut out = alloc::vec![rat_zero(); n];
        for (i, c) in self.0.iter().enumerate() {
            out[i] += c.clone();
        }
        for (i, c) in other.0.iter().enumerate() {
            out[i] += c.clone();
        }
        UniPoly(out).trim()
    }

    pub fn scale(&self, k: &Rat) -> UniPoly {
        UniPoly(self.0.iter().map(|c| c.clone() * k).collect()).trim()
    }

    pub fn mul(&self, other: &UniPoly) -> UniPoly {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = alloc::vec![rat_zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a.clone() * b;
            }
        }
        UniPoly(out).trim()
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        let mut acc = rat_zero();
        for c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Synthetic division by `(x - root)`: quotient and remainder.
    pub fn div_linear(&self, root: &Rat) -> (UniPoly, Rat) {
        let mut out = alloc::vec![rat_zero(); self.0.len().saturating_sub(1)];
        let mut carry = rat_zero();
        for i in (0..self.0.len()).rev() {
            let c = self.0[i].clone() + carry.clone() * root;
            if i == 0 {
                return (UniPoly(out).trim(), c);
            }
            out[i - 1] = c.clone();
            carry = c;
        }
        (UniPoly::zero(), rat_zero())
    }

    /// Exact division by `(x - root)`; panics if not a root.
    pub fn deflate(&self, root: &Rat) -> UniPoly {
        let (q, r) = self.div_linear(root);
        assert!(r.is_zero(), "deflate by a non-root");
        q
    }

    /// Taylor coefficients around `at`: `p(x) = Σ out[k] (x - at)^k`.
    pub fn taylor_at(&self, at: &Rat) -> Vec<Rat> {
        let mut out = Vec::new();
        let mut cur = self.clone();
        while !cur.is_zero() {
            let (q, r) = cur.div_linear(at);
            out.push(r);
            cur = q;
        }
        if out.is_empty() {
            out.push(rat_zero());
        }
        out
    }

    /// Evaluate at a matrix argument.
    pub fn eval_matrix(&self, a: &[Row]) -> Vec<Row> {
        let n = a.len();
        let mut acc = alloc::vec![alloc::vec![rat_zero(); n]; n];
        let mut power = mat_identity(n);
        for c in &self.0 {
            if !c.is_zero() {
                acc = mat_add(&acc, &mat_scale(&power, c));
            }
            power = mat_mul(&power, a);
        }
        acc
    }
}

/// Characteristic polynomial (monic) by the Faddeev–LeVerrier recurrence.
pub fn char_poly(a: &[Row]) -> UniPoly {
    let n = a.len();
    let mut coeffs = alloc::vec![rat_zero(); n + 1];
    coeffs[n] = rat_one();
    let mut m = mat_identity(n);
    for k in 1..=n {
        let am = mat_mul(a, &m);
        let c = -trace(&am) / rat_int(k as i64);
        coeffs[n - k] = c.clone();
        m = mat_add(&am, &mat_scale(&mat_identity(n), &c));
    }
    UniPoly(coeffs)
}

/// All rational roots of `p` with multiplicities, plus the (rational-root
/// free) residual factor. Roots are found by the integer divisor test on
/// the cleared polynomial and returned in ascending order.
pub fn rational_roots(p: &UniPoly) -> (Vec<(Rat, usize)>, UniPoly) {
    let mut work = p.clone().trim();
    let mut roots: Vec<(Rat, usize)> = Vec::new();
    if work.is_zero() {
        return (roots, work);
    }
    // strip zero roots
    let mut zero_mult = 0;
    while work.0.first().map(|c| c.is_zero()).unwrap_or(false) {
        work.0.remove(0);
        zero_mult += 1;
    }
    if zero_mult > 0 {
        roots.push((rat_zero(), zero_mult));
    }
    loop {
        let Some(deg) = work.degree() else { break };
        if deg == 0 {
            break;
        }
        // integer-cleared coefficients for the divisor test
        let mut lcm = BigInt::one();
        for c in &work.0 {
            lcm = lcm.lcm(c.denom());
        }
        let ints: Vec<BigInt> = work.0.iter().map(|c| c.numer() * (&lcm / c.denom())).collect();
        let (Some(a0), Some(an)) = (
            ints.first().and_then(|v| v.to_i128()),
            ints.last().and_then(|v| v.to_i128()),
        ) else {
            break; // coefficients too large for the divisor search
        };
        let divisors = |v: i128| -> Vec<i128> {
            let v = v.abs().max(1);
            let mut out = Vec::new();
            let mut d = 1;
            while d * d <= v {
                if v % d == 0 {
                    out.push(d);
                    out.push(v / d);
                }
                d += 1;
            }
            out.sort_unstable();
            out.dedup();
            out
        };
        let mut found = None;
        'search: for q in divisors(an) {
            for pnum in divisors(a0) {
                for sign in [1i128, -1] {
                    let cand = Rat::new(BigInt::from(sign * pnum), BigInt::from(q));
                    if work.eval(&cand).is_zero() {
                        found = Some(cand);
                        break 'search;
                    }
                }
            }
        }
        let Some(root) = found else { break };
        let mut mult = 0;
        while work.eval(&root).is_zero() {
            work = work.deflate(&root);
            mult += 1;
            if work.degree().is_none() {
                break;
            }
        }
        roots.push((root, mult));
    }
    roots.sort_by(|a, b| a.0.cmp(&b.0));
    (roots, work)
}
