//! Exact arithmetic in `Q(β)` for a monic integer polynomial with a unique
//! real root `β > 1`.
//!
//! Elements are stored as rational coordinate vectors in the power basis
//! `1, β, …, β^{d−1}`. Multiplication reduces modulo the defining polynomial;
//! division runs the extended Euclidean algorithm in `Q[x]`. Order queries
//! (`sign`, `floor`, `approx`) evaluate the coordinate polynomial over a
//! shrinking rational enclosure of the root, so they are exact: an interval
//! is refined until it certifies the answer.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::sync::{Arc, RwLock};
use thiserror::Error;

pub type Rat = BigRational;
pub type Int = BigInt;

/// Errors from field construction and arithmetic.
#[derive(Debug, Error)]
pub enum AlgebraicError {
    #[error("polynomial must be monic with integer coefficients and degree >= 1")]
    NotMonic,
    #[error("polynomial is not squarefree (repeated roots)")]
    NotSquarefree,
    #[error("polynomial has no real root greater than 1")]
    NoRootAboveOne,
    #[error("polynomial has more than one real root greater than 1")]
    MultipleRootsAboveOne,
    #[error("element is not invertible modulo the defining polynomial (polynomial is reducible)")]
    NotInvertible,
    #[error("cannot parse polynomial: {0}")]
    Parse(String),
    #[error("the base is not a Pisot number")]
    NotPisot,
}

fn rat_int(n: i64) -> Rat {
    Rat::from_integer(Int::from(n))
}

// ---------------------------------------------------------------------------
// Dense rational polynomials, little-endian coefficient vectors.
// ---------------------------------------------------------------------------

mod poly {
    use super::Rat;
    use num::Zero;

    pub fn trim(p: &mut Vec<Rat>) {
        while p.len() > 1 && p.last().map_or(false, |c| c.is_zero()) {
            p.pop();
        }
    }

    pub fn degree(p: &[Rat]) -> usize {
        let mut d = p.len();
        while d > 1 && p[d - 1].is_zero() {
            d -= 1;
        }
        d - 1
    }

    pub fn is_zero(p: &[Rat]) -> bool {
        p.iter().all(|c| c.is_zero())
    }

    pub fn eval(p: &[Rat], x: &Rat) -> Rat {
        let mut acc = Rat::zero();
        for c in p.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn derivative(p: &[Rat]) -> Vec<Rat> {
        if p.len() <= 1 {
            return vec![Rat::zero()];
        }
        p.iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c * Rat::from_integer(i.into()))
            .collect()
    }

    /// Remainder of `a` divided by `b`; `b` must be nonzero.
    pub fn rem(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
        let db = degree(b);
        let lead = b[db].clone();
        let mut r: Vec<Rat> = a.to_vec();
        trim(&mut r);
        while !is_zero(&r) && degree(&r) >= db {
            let dr = degree(&r);
            let q = &r[dr] / &lead;
            for i in 0..=db {
                let t = &q * &b[i];
                r[dr - db + i] = &r[dr - db + i] - t;
            }
            r[dr] = Rat::zero();
            trim(&mut r);
        }
        r
    }

    /// Monic gcd of `a` and `b` over `Q[x]`.
    pub fn gcd(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
        let mut x = a.to_vec();
        let mut y = b.to_vec();
        trim(&mut x);
        trim(&mut y);
        while !is_zero(&y) {
            let r = rem(&x, &y);
            x = y;
            y = r;
        }
        let d = degree(&x);
        if !x[d].is_zero() {
            let lead = x[d].clone();
            for c in x.iter_mut() {
                *c = &*c / &lead;
            }
        }
        x
    }
}

// ---------------------------------------------------------------------------
// Rational interval arithmetic (only what Horner evaluation needs).
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct Ival {
    lo: Rat,
    hi: Rat,
}

impl Ival {
    fn point(r: Rat) -> Self {
        Ival { lo: r.clone(), hi: r }
    }

    fn add_rat(&self, r: &Rat) -> Self {
        Ival { lo: &self.lo + r, hi: &self.hi + r }
    }

    fn mul(&self, other: &Ival) -> Self {
        let a = &self.lo * &other.lo;
        let b = &self.lo * &other.hi;
        let c = &self.hi * &other.lo;
        let d = &self.hi * &other.hi;
        let mut lo = a.clone();
        let mut hi = a;
        for v in [b, c, d] {
            if v < lo {
                lo = v.clone();
            }
            if v > hi {
                hi = v;
            }
        }
        Ival { lo, hi }
    }
}

// ---------------------------------------------------------------------------
// Minimal polynomial
// ---------------------------------------------------------------------------

/// A monic integer polynomial, constant term first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinimalPolynomial {
    coeffs: Vec<Int>,
}

impl MinimalPolynomial {
    /// Build from constant-first integer coefficients; the polynomial must be
    /// monic of degree at least one.
    pub fn new(coeffs: Vec<Int>) -> Result<Self, AlgebraicError> {
        let mut c = coeffs;
        while c.len() > 1 && c.last().map_or(false, |x| x.is_zero()) {
            c.pop();
        }
        if c.len() < 2 || !c.last().unwrap().is_one() {
            return Err(AlgebraicError::NotMonic);
        }
        Ok(MinimalPolynomial { coeffs: c })
    }

    pub fn from_i64(coeffs: &[i64]) -> Result<Self, AlgebraicError> {
        Self::new(coeffs.iter().map(|&c| Int::from(c)).collect())
    }

    /// Parse either a comma-separated constant-first coefficient list
    /// (`-1,-1,1`) or a human-readable polynomial (`x^2-x-1`).
    pub fn parse(input: &str) -> Result<Self, AlgebraicError> {
        let s = input.trim();
        if s.contains('x') || s.contains('X') {
            Self::parse_symbolic(s)
        } else {
            let coeffs: Result<Vec<Int>, _> = s
                .split(',')
                .map(|t| t.trim().parse::<Int>().map_err(|e| AlgebraicError::Parse(e.to_string())))
                .collect();
            Self::new(coeffs?)
        }
    }

    fn parse_symbolic(s: &str) -> Result<Self, AlgebraicError> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(AlgebraicError::Parse("empty polynomial".into()));
        }
        // split into signed terms
        let mut terms: Vec<String> = Vec::new();
        let mut cur = String::new();
        for (i, ch) in compact.chars().enumerate() {
            if (ch == '+' || ch == '-') && i > 0 && !cur.ends_with('^') {
                terms.push(cur.clone());
                cur.clear();
            }
            cur.push(ch);
        }
        terms.push(cur);
        let mut coeffs: Vec<Int> = Vec::new();
        for t in &terms {
            let (sign, body) = match t.strip_prefix('-') {
                Some(b) => (-1i64, b),
                None => (1i64, t.strip_prefix('+').unwrap_or(t)),
            };
            let lower = body.to_ascii_lowercase();
            let (coef_str, exp) = if let Some(pos) = lower.find('x') {
                let coef = &body[..pos];
                let rest = &lower[pos + 1..];
                let exp = if rest.is_empty() {
                    1usize
                } else if let Some(e) = rest.strip_prefix('^') {
                    e.parse::<usize>().map_err(|e| AlgebraicError::Parse(e.to_string()))?
                } else {
                    return Err(AlgebraicError::Parse(format!("bad term: {t}")));
                };
                (coef, exp)
            } else {
                (body, 0usize)
            };
            let coef: Int = if coef_str.is_empty() {
                Int::one()
            } else {
                coef_str.parse().map_err(|e: num::bigint::ParseBigIntError| {
                    AlgebraicError::Parse(e.to_string())
                })?
            };
            if coeffs.len() <= exp {
                coeffs.resize(exp + 1, Int::zero());
            }
            coeffs[exp] += coef * Int::from(sign);
        }
        Self::new(coeffs)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Constant-first integer coefficients.
    pub fn coeffs(&self) -> &[Int] {
        &self.coeffs
    }

    fn rat_coeffs(&self) -> Vec<Rat> {
        self.coeffs.iter().map(|c| Rat::from_integer(c.clone())).collect()
    }

    pub fn eval_rat(&self, x: &Rat) -> Rat {
        poly::eval(&self.rat_coeffs(), x)
    }
}

impl fmt::Display for MinimalPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            match i {
                0 => write!(f, "{mag}")?,
                1 => {
                    if mag.is_one() {
                        write!(f, "x")?
                    } else {
                        write!(f, "{mag}x")?
                    }
                }
                _ => {
                    if mag.is_one() {
                        write!(f, "x^{i}")?
                    } else {
                        write!(f, "{mag}x^{i}")?
                    }
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Sturm sequences
// ---------------------------------------------------------------------------

fn sturm_chain(p: &[Rat]) -> Vec<Vec<Rat>> {
    let mut chain = vec![p.to_vec(), poly::derivative(p)];
    loop {
        let n = chain.len();
        if poly::is_zero(&chain[n - 1]) {
            chain.pop();
            break;
        }
        let mut r = poly::rem(&chain[n - 2], &chain[n - 1]);
        for c in r.iter_mut() {
            *c = -c.clone();
        }
        poly::trim(&mut r);
        if poly::is_zero(&r) {
            break;
        }
        chain.push(r);
    }
    chain
}

fn sign_changes(chain: &[Vec<Rat>], x: &Rat) -> usize {
    let mut count = 0;
    let mut last: i8 = 0;
    for p in chain {
        let v = poly::eval(p, x);
        let s: i8 = if v.is_zero() {
            0
        } else if v.is_positive() {
            1
        } else {
            -1
        };
        if s != 0 {
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
    }
    count
}

/// Number of distinct real roots of the (squarefree) polynomial in `(a, b]`.
fn roots_in(chain: &[Vec<Rat>], a: &Rat, b: &Rat) -> usize {
    sign_changes(chain, a).saturating_sub(sign_changes(chain, b))
}

// ---------------------------------------------------------------------------
// Field
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct RootEnclosure {
    lo: Rat,
    hi: Rat,
    /// Sign of the defining polynomial at `lo` (nonzero unless `exact`).
    sign_lo: i8,
    /// When the root is rational, `lo == hi` holds it exactly.
    exact: bool,
}

/// The number field `Q(β)` together with a refinable rational enclosure of
/// its distinguished root `β > 1`.
pub struct Field {
    poly: MinimalPolynomial,
    degree: usize,
    /// Power-basis expansions of `β^d, …, β^{2d−2}` used to reduce products.
    reduction: Vec<Vec<Rat>>,
    enclosure: RwLock<RootEnclosure>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Field({})", self.poly)
    }
}

pub type FieldRef = Arc<Field>;

impl Field {
    /// Validate the polynomial (monic, squarefree, exactly one real root
    /// greater than one) and isolate that root.
    pub fn new(poly: MinimalPolynomial) -> Result<FieldRef, AlgebraicError> {
        let p = poly.rat_coeffs();
        // squarefree <=> gcd(p, p') is constant
        let g = poly::gcd(&p, &poly::derivative(&p));
        if poly::degree(&g) > 0 {
            return Err(AlgebraicError::NotSquarefree);
        }
        let chain = sturm_chain(&p);
        // Cauchy bound: every root has modulus <= 1 + max |c_i|
        let bound = Rat::one()
            + poly
                .coeffs
                .iter()
                .map(|c| Rat::from_integer(c.abs()))
                .max()
                .unwrap_or_else(Rat::zero);
        let one = Rat::one();
        match roots_in(&chain, &one, &bound) {
            0 => return Err(AlgebraicError::NoRootAboveOne),
            1 => {}
            _ => return Err(AlgebraicError::MultipleRootsAboveOne),
        }
        // Isolate: find lo > =1 with p(lo) != 0, exactly one root in (lo, hi].
        let mut lo = one.clone();
        let mut hi = bound;
        if poly.eval_rat(&lo).is_zero() {
            // 1 itself is a root; step just above it, keeping the target root.
            let mut step = Rat::new(Int::one(), Int::from(2));
            loop {
                let cand = &one + &step;
                if !poly.eval_rat(&cand).is_zero() && roots_in(&chain, &cand, &hi) == 1 {
                    lo = cand;
                    break;
                }
                step /= rat_int(2);
            }
        }
        // Bisect by Sturm counts until the endpoint signs differ; detect a
        // rational root exactly.
        let mut exact = false;
        loop {
            let vlo = poly.eval_rat(&lo);
            let vhi = poly.eval_rat(&hi);
            if vhi.is_zero() {
                lo = hi.clone();
                exact = true;
                break;
            }
            if !vlo.is_zero() && vlo.is_positive() != vhi.is_positive() {
                break;
            }
            let mid = (&lo + &hi) / rat_int(2);
            if poly.eval_rat(&mid).is_zero() {
                lo = mid.clone();
                hi = mid;
                exact = true;
                break;
            }
            if roots_in(&chain, &lo, &mid) == 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let sign_lo: i8 = if exact {
            0
        } else if poly.eval_rat(&lo).is_positive() {
            1
        } else {
            -1
        };
        if exact {
            hi = lo.clone();
        }
        let degree = poly.degree();
        // reduction rows for β^d .. β^{2d-2}
        let mut reduction: Vec<Vec<Rat>> = Vec::new();
        if degree >= 1 {
            // β^d = -(c_0 + c_1 β + ... + c_{d-1} β^{d-1})
            let mut row: Vec<Rat> = poly
                .coeffs
                .iter()
                .take(degree)
                .map(|c| -Rat::from_integer(c.clone()))
                .collect();
            reduction.push(row.clone());
            for _ in 1..degree.saturating_sub(1) {
                // multiply the previous row by β and re-reduce
                let mut next = vec![Rat::zero(); degree];
                let carry = row[degree - 1].clone();
                for i in (1..degree).rev() {
                    next[i] = row[i - 1].clone();
                }
                for i in 0..degree {
                    next[i] += &carry * &reduction[0][i];
                }
                reduction.push(next.clone());
                row = next;
            }
        }
        Ok(Arc::new(Field {
            poly,
            degree,
            reduction,
            enclosure: RwLock::new(RootEnclosure { lo, hi, sign_lo, exact }),
        }))
    }

    pub fn poly(&self) -> &MinimalPolynomial {
        &self.poly
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// The element `β` itself.
    pub fn beta(self: &FieldRef) -> FieldElement {
        if self.degree == 1 {
            // root of x + c0 is -c0
            let r = -Rat::from_integer(self.poly.coeffs[0].clone());
            return self.element(vec![r]);
        }
        let mut coords = vec![Rat::zero(); self.degree];
        coords[1] = Rat::one();
        self.element(coords)
    }

    pub fn zero(self: &FieldRef) -> FieldElement {
        self.element(vec![Rat::zero(); self.degree])
    }

    pub fn one(self: &FieldRef) -> FieldElement {
        self.from_rat(Rat::one())
    }

    pub fn from_rat(self: &FieldRef, r: Rat) -> FieldElement {
        let mut coords = vec![Rat::zero(); self.degree];
        coords[0] = r;
        self.element(coords)
    }

    pub fn from_i64(self: &FieldRef, n: i64) -> FieldElement {
        self.from_rat(rat_int(n))
    }

    pub fn element(self: &FieldRef, coords: Vec<Rat>) -> FieldElement {
        assert_eq!(coords.len(), self.degree, "coordinate vector length mismatch");
        FieldElement { field: Arc::clone(self), coords }
    }

    /// Halve the width of the root enclosure once.
    fn refine(&self) {
        let mut enc = self.enclosure.write().unwrap();
        if enc.exact {
            return;
        }
        let mid = (&enc.lo + &enc.hi) / rat_int(2);
        let v = self.poly.eval_rat(&mid);
        if v.is_zero() {
            enc.lo = mid.clone();
            enc.hi = mid;
            enc.exact = true;
            enc.sign_lo = 0;
            return;
        }
        let s: i8 = if v.is_positive() { 1 } else { -1 };
        if s == enc.sign_lo {
            enc.lo = mid;
        } else {
            enc.hi = mid;
        }
    }

    /// Refine until the enclosure width is at most `eps`.
    pub fn refine_to(&self, eps: &Rat) {
        loop {
            {
                let enc = self.enclosure.read().unwrap();
                if enc.exact || &(&enc.hi - &enc.lo) <= eps {
                    return;
                }
            }
            self.refine();
        }
    }

    fn snapshot(&self) -> RootEnclosure {
        self.enclosure.read().unwrap().clone()
    }

    /// Rational enclosure `[lo, hi]` of `β` with `hi − lo ≤ 2^{−bits}`.
    pub fn root_enclosure(&self, bits: u32) -> (Rat, Rat) {
        let eps = Rat::new(Int::one(), Int::one() << bits);
        self.refine_to(&eps);
        let enc = self.snapshot();
        (enc.lo, enc.hi)
    }
}

// ---------------------------------------------------------------------------
// Field elements
// ---------------------------------------------------------------------------

/// An element of `Q(β)` in power-basis coordinates.
#[derive(Clone)]
pub struct FieldElement {
    field: FieldRef,
    coords: Vec<Rat>,
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldElement{:?}", self.coords)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        self.coords == other.coords
    }
}
impl Eq for FieldElement {}

impl FieldElement {
    pub fn field(&self) -> &FieldRef {
        &self.field
    }

    pub fn coords(&self) -> &[Rat] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    /// Exact rational value, if the element lies in `Q`.
    pub fn as_rational(&self) -> Option<Rat> {
        if self.coords[1..].iter().all(|c| c.is_zero()) {
            Some(self.coords[0].clone())
        } else {
            None
        }
    }

    pub fn add(&self, other: &FieldElement) -> FieldElement {
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a + b)
            .collect();
        self.field.element(coords)
    }

    pub fn sub(&self, other: &FieldElement) -> FieldElement {
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a - b)
            .collect();
        self.field.element(coords)
    }

    pub fn neg(&self) -> FieldElement {
        self.field.element(self.coords.iter().map(|a| -a.clone()).collect())
    }

    pub fn mul(&self, other: &FieldElement) -> FieldElement {
        let d = self.field.degree;
        if d == 1 {
            return self.field.element(vec![&self.coords[0] * &other.coords[0]]);
        }
        let mut prod = vec![Rat::zero(); 2 * d - 1];
        for (i, a) in self.coords.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coords.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                prod[i + j] += a * b;
            }
        }
        let mut out: Vec<Rat> = prod[..d].to_vec();
        for k in d..(2 * d - 1) {
            if prod[k].is_zero() {
                continue;
            }
            let row = &self.field.reduction[k - d];
            for i in 0..d {
                out[i] += &prod[k] * &row[i];
            }
        }
        self.field.element(out)
    }

    pub fn mul_rat(&self, r: &Rat) -> FieldElement {
        self.field.element(self.coords.iter().map(|c| c * r).collect())
    }

    pub fn scale_i64(&self, n: i64) -> FieldElement {
        self.mul_rat(&rat_int(n))
    }

    /// Multiplicative inverse via the extended Euclidean algorithm in `Q[x]`.
    pub fn inv(&self) -> Result<FieldElement, AlgebraicError> {
        if self.is_zero() {
            return Err(AlgebraicError::NotInvertible);
        }
        let d = self.field.degree;
        if d == 1 {
            return Ok(self.field.element(vec![self.coords[0].recip()]));
        }
        // extended gcd of a(x) and the defining polynomial m(x)
        let m = self.field.poly.rat_coeffs();
        let mut r0 = m;
        let mut r1 = self.coords.clone();
        poly::trim(&mut r1);
        let mut s0: Vec<Rat> = vec![Rat::zero()];
        let mut s1: Vec<Rat> = vec![Rat::one()];
        while !poly::is_zero(&r1) {
            // quotient and remainder of r0 / r1
            let db = poly::degree(&r1);
            let lead = r1[db].clone();
            let mut r = r0.clone();
            poly::trim(&mut r);
            let mut q = vec![Rat::zero(); poly::degree(&r).saturating_sub(db) + 1];
            while !poly::is_zero(&r) && poly::degree(&r) >= db {
                let dr = poly::degree(&r);
                let c = &r[dr] / &lead;
                q[dr - db] = c.clone();
                for i in 0..=db {
                    let t = &c * &r1[i];
                    r[dr - db + i] = &r[dr - db + i] - t;
                }
                r[dr] = Rat::zero();
                poly::trim(&mut r);
            }
            // s_{k+1} = s_{k-1} - q s_k
            let qs = {
                let mut out = vec![Rat::zero(); q.len() + s1.len()];
                for (i, a) in q.iter().enumerate() {
                    for (j, b) in s1.iter().enumerate() {
                        out[i + j] += a * b;
                    }
                }
                out
            };
            let mut s2 = vec![Rat::zero(); s0.len().max(qs.len())];
            for (i, c) in s0.iter().enumerate() {
                s2[i] += c;
            }
            for (i, c) in qs.iter().enumerate() {
                s2[i] -= c;
            }
            poly::trim(&mut s2);
            r0 = r1;
            r1 = r;
            s0 = s1;
            s1 = s2;
        }
        if poly::degree(&r0) > 0 {
            return Err(AlgebraicError::NotInvertible);
        }
        let g = r0[0].clone();
        let mut coords = vec![Rat::zero(); d];
        for (i, c) in s0.iter().enumerate() {
            if i >= d {
                // reduce any residual high-degree terms (should not occur:
                // deg s0 < deg m)
                continue;
            }
            coords[i] = c / &g;
        }
        Ok(self.field.element(coords))
    }

    pub fn div(&self, other: &FieldElement) -> Result<FieldElement, AlgebraicError> {
        Ok(self.mul(&other.inv()?))
    }

    pub fn pow(&self, mut e: u32) -> FieldElement {
        let mut base = self.clone();
        let mut acc = self.field.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    fn interval_value(&self, enc: &RootEnclosure) -> (Rat, Rat) {
        if enc.exact {
            let v = poly::eval(&self.coords, &enc.lo);
            return (v.clone(), v);
        }
        let x = Ival { lo: enc.lo.clone(), hi: enc.hi.clone() };
        let mut acc = Ival::point(Rat::zero());
        for c in self.coords.iter().rev() {
            acc = acc.mul(&x).add_rat(c);
        }
        (acc.lo, acc.hi)
    }

    /// Exact sign: −1, 0 or +1.
    pub fn sign(&self) -> i8 {
        if self.is_zero() {
            return 0;
        }
        let mut iterations = 0usize;
        loop {
            let enc = self.field.snapshot();
            let (lo, hi) = self.interval_value(&enc);
            if lo.is_positive() {
                return 1;
            }
            if hi.is_negative() {
                return -1;
            }
            if enc.exact {
                // value is exactly representable; must be zero here
                return 0;
            }
            self.field.refine();
            iterations += 1;
            assert!(
                iterations < 20_000,
                "sign query failed to converge; is the defining polynomial irreducible?"
            );
        }
    }

    pub fn is_positive(&self) -> bool {
        self.sign() > 0
    }

    pub fn cmp_exact(&self, other: &FieldElement) -> std::cmp::Ordering {
        match self.sub(other).sign() {
            1 => std::cmp::Ordering::Greater,
            -1 => std::cmp::Ordering::Less,
            _ => std::cmp::Ordering::Equal,
        }
    }

    /// Exact floor of the element.
    pub fn floor(&self) -> Int {
        // if both interval ends share a floor the answer is settled; only a
        // value sitting (near) exactly on an integer needs the exact fallback
        loop {
            let enc = self.field.snapshot();
            let (lo, hi) = self.interval_value(&enc);
            let n0 = lo.floor().to_integer();
            if n0 == hi.floor().to_integer() {
                return n0;
            }
            if &hi - &lo < Rat::new(Int::one(), Int::one() << 64) {
                for k in -1i64..=2 {
                    let n = &n0 + Int::from(k);
                    let low = self.sub(&self.field.from_rat(Rat::from_integer(n.clone())));
                    let high = self
                        .sub(&self.field.from_rat(Rat::from_integer(&n + Int::one())));
                    if low.sign() >= 0 && high.sign() < 0 {
                        return n;
                    }
                }
                unreachable!("floor candidates exhausted");
            }
            self.field.refine();
        }
    }

    /// Rational approximation with |result − value| ≤ 2^{−precision}.
    pub fn approx(&self, precision: u32) -> Rat {
        let eps = Rat::new(Int::one(), Int::one() << (precision + 1));
        loop {
            let enc = self.field.snapshot();
            let (lo, hi) = self.interval_value(&enc);
            if enc.exact || &hi - &lo <= &eps * rat_int(2) {
                return (&lo + &hi) / rat_int(2);
            }
            self.field.refine();
        }
    }

    /// `f64` approximation (for reports and sampling only).
    pub fn to_f64(&self) -> f64 {
        self.approx(80).to_f64().unwrap_or(f64::NAN)
    }

    /// Decimal rendering with the given number of fractional digits.
    pub fn to_decimal_string(&self, digits: u32) -> String {
        let bits = (digits + 2) * 4;
        let a = self.approx(bits);
        let scale = Int::from(10).pow(digits);
        let scaled = (&a * Rat::from_integer(scale.clone())).round().to_integer();
        let neg = scaled.is_negative();
        let mag = scaled.abs();
        let int_part = &mag / &scale;
        let frac_part = &mag % &scale;
        let frac_str = format!("{:0width$}", frac_part, width = digits as usize);
        format!("{}{}.{}", if neg { "-" } else { "" }, int_part, frac_str)
    }
}

// ---------------------------------------------------------------------------
// Pisot test (Schur–Cohn on the conjugate factor)
// ---------------------------------------------------------------------------

/// Test whether the distinguished root `β > 1` of the polynomial is a Pisot
/// number: all other roots lie strictly inside the unit circle.
///
/// The conjugate factor `p(x)/(x − β)` is computed by synthetic division over
/// `Q(β)` and subjected to the Schur–Cohn stability recursion, so the answer
/// is exact.
pub fn is_pisot(poly: &MinimalPolynomial) -> Result<bool, AlgebraicError> {
    let field = Field::new(poly.clone())?;
    field_is_pisot(&field)
}

/// Same as [`is_pisot`], reusing an existing field.
pub fn field_is_pisot(field: &FieldRef) -> Result<bool, AlgebraicError> {
    let d = field.degree();
    if d == 1 {
        return Ok(true);
    }
    let beta = field.beta();
    // synthetic division: q_{d-1} = 1, q_{i-1} = a_i + β q_i
    let a = field.poly().coeffs();
    let mut q: Vec<FieldElement> = vec![field.zero(); d];
    q[d - 1] = field.one();
    for i in (1..d).rev() {
        let ai = field.from_rat(Rat::from_integer(a[i].clone()));
        q[i - 1] = ai.add(&beta.mul(&q[i]));
    }
    // Schur–Cohn: all roots of q strictly inside the unit disk?
    let mut c = q;
    loop {
        // trim exact zero leading coefficients
        while c.len() > 1 && c.last().unwrap().is_zero() {
            c.pop();
        }
        let n = c.len() - 1;
        if n == 0 {
            return Ok(true);
        }
        let a0 = &c[0];
        let an = &c[n];
        let t = an.mul(an).sub(&a0.mul(a0));
        if t.sign() <= 0 {
            return Ok(false);
        }
        let mut next: Vec<FieldElement> = Vec::with_capacity(n);
        for k in 0..n {
            next.push(an.mul(&c[k + 1]).sub(&a0.mul(&c[n - 1 - k])));
        }
        c = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> FieldRef {
        Field::new(MinimalPolynomial::from_i64(&[-1, -1, 1]).unwrap()).unwrap()
    }

    #[test]
    fn parse_both_syntaxes() {
        let a = MinimalPolynomial::parse("-1,-1,1").unwrap();
        let b = MinimalPolynomial::parse("x^2-x-1").unwrap();
        assert_eq!(a, b);
        let c = MinimalPolynomial::parse("x^3 - x^2 - x - 1").unwrap();
        assert_eq!(c.coeffs(), &[Int::from(-1), Int::from(-1), Int::from(-1), Int::from(1)]);
    }

    #[test]
    fn rejects_bad_polynomials() {
        assert!(matches!(
            MinimalPolynomial::from_i64(&[-1, 2]).map(Field::new),
            Err(AlgebraicError::NotMonic)
        ));
        // x^2 - 4x + 4 = (x-2)^2
        let sq = MinimalPolynomial::from_i64(&[4, -4, 1]).unwrap();
        assert!(matches!(Field::new(sq), Err(AlgebraicError::NotSquarefree)));
        // x^2 + 1 has no real roots
        let none = MinimalPolynomial::from_i64(&[1, 0, 1]).unwrap();
        assert!(matches!(Field::new(none), Err(AlgebraicError::NoRootAboveOne)));
        // x^2 - 5x + 5 has roots (5 ± sqrt5)/2 ≈ 1.38, 3.62: two above 1
        let two = MinimalPolynomial::from_i64(&[5, -5, 1]).unwrap();
        assert!(matches!(Field::new(two), Err(AlgebraicError::MultipleRootsAboveOne)));
    }

    #[test]
    fn golden_ratio_identities() {
        let f = golden();
        let beta = f.beta();
        // β^2 = β + 1
        assert_eq!(beta.mul(&beta), beta.add(&f.one()));
        // 1/β = β - 1
        assert_eq!(beta.inv().unwrap(), beta.sub(&f.one()));
        assert_eq!(beta.floor(), Int::from(1));
        assert_eq!(beta.sign(), 1);
        let a = beta.approx(40).to_f64().unwrap();
        assert!((a - 1.618033988749895).abs() < 1e-11);
    }

    #[test]
    fn rational_field_degenerates_to_rationals() {
        let f = Field::new(MinimalPolynomial::from_i64(&[-2, 1]).unwrap()).unwrap();
        let beta = f.beta();
        assert_eq!(beta.as_rational(), Some(rat_int(2)));
        assert_eq!(beta.floor(), Int::from(2));
        assert_eq!(beta.mul(&beta).as_rational(), Some(rat_int(4)));
    }

    #[test]
    fn division_roundtrip_tribonacci() {
        let f = Field::new(MinimalPolynomial::from_i64(&[-1, -1, -1, 1]).unwrap()).unwrap();
        let beta = f.beta();
        let x = beta.mul(&beta).sub(&f.from_i64(3)).add(&beta.mul_rat(&Rat::new(
            Int::from(2),
            Int::from(7),
        )));
        let y = beta.add(&f.one());
        let q = x.div(&y).unwrap();
        assert_eq!(q.mul(&y), x);
    }

    #[test]
    fn pisot_catalog() {
        let yes: [&[i64]; 8] = [
            &[-2, 1],              // x - 2
            &[-1, -1, 1],          // golden mean
            &[-1, -2, 1],          // silver mean 1+sqrt2
            &[-1, -3, 1],          // x^2-3x-1
            &[-1, -1, -1, 1],      // tribonacci
            &[-1, -1, 0, 1],       // plastic number x^3-x-1
            &[-1, 0, -1, 1],       // x^3-x^2-1
            &[-1, -1, -1, -1, 1],  // tetranacci
        ];
        for c in yes {
            let p = MinimalPolynomial::from_i64(c).unwrap();
            assert!(is_pisot(&p).unwrap(), "{p} should be Pisot");
        }
        let no: [&[i64]; 3] = [
            &[-2, 0, 1],  // sqrt2: conjugate -sqrt2 on the unit-circle exterior
            &[-3, 0, 1],  // sqrt3
            &[-1, -2, 0, 0, 1], // x^4-2x-1: root ~1.39, has conjugate outside/on circle
        ];
        for c in no {
            let p = MinimalPolynomial::from_i64(c).unwrap();
            assert!(!is_pisot(&p).unwrap(), "{p} should not be Pisot");
        }
    }

    #[test]
    fn decimal_rendering() {
        let f = golden();
        let s = f.beta().to_decimal_string(12);
        assert_eq!(s, "1.618033988750");
    }
}
