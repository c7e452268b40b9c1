//! Greedy β-expansions with exact remainders.
//!
//! [`BetaBase`] packages a Pisot base: the field `Q(β)`, the digit alphabet
//! `Σ_β = {0,…,⌈β⌉−1}`, and the eventually periodic expansion `𝔰(β)` of `β`
//! itself (replaced by the periodic variant `β̂` when the raw expansion
//! terminates). `𝔰(β)` governs admissibility for the whole crate.

use crate::algebraic::{field_is_pisot, AlgebraicError, Field, FieldElement, FieldRef, Int, MinimalPolynomial, Rat};
use crate::automaton::Dfa;
use num::{One, Signed, ToPrimitive, Zero};
use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BetaError {
    #[error(transparent)]
    Algebraic(#[from] AlgebraicError),
    #[error("the base is not a Pisot number; pass the override flag to experiment anyway")]
    NotPisot,
    #[error("remainder cycle not found within the iteration cap (non-Pisot or pathological base)")]
    PeriodNotFound,
    #[error("value out of range: expansion requires 0 <= x < 1")]
    OutOfRange,
    #[error("digit {0} is outside the alphabet {{0..{1}}}")]
    BadDigit(u8, u8),
    #[error("word is not admissible for this base")]
    NotAdmissible,
}

/// Eventually periodic cycle report: `digits[preperiod..preperiod+period]`
/// repeats forever.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cycle {
    pub preperiod: usize,
    pub period: usize,
}

/// Result of [`BetaBase::expand`].
#[derive(Clone, Debug)]
pub struct Expansion {
    pub digits: Vec<u8>,
    pub cycle: Option<Cycle>,
}

/// A Pisot base β together with `𝔰(β)` and the digit alphabet.
pub struct BetaBase {
    field: FieldRef,
    beta: FieldElement,
    inv_beta: FieldElement,
    alphabet: u8,
    is_integer: bool,
    s_pre: Vec<u8>,
    s_period: Vec<u8>,
    /// Raw finite expansion `a₀…a_s` of β, when the greedy recurrence
    /// terminated (then `s_beta` stores the periodic variant `β̂`).
    raw_finite: Option<Vec<u8>>,
    dfa: OnceLock<Dfa>,
    /// Orbit values `T^j_β(1)` for `j = 0..m+n` (periodic beyond).
    t_orbit: OnceLock<Vec<FieldElement>>,
    /// Cached negative powers `β^0, β^{−1}, β^{−2}, …`.
    inv_powers: RwLock<Vec<FieldElement>>,
}

pub type BaseRef = Arc<BetaBase>;

impl std::fmt::Debug for BetaBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "BetaBase({}, s(beta) = {:?}({:?})^inf)",
            self.field.poly(),
            self.s_pre,
            self.s_period
        )
    }
}

const DEFAULT_ITERATION_CAP: usize = 1_000_000;

/// Build a base from its minimal polynomial, verifying the Pisot property.
pub fn make_base(poly: MinimalPolynomial) -> Result<BaseRef, BetaError> {
    make_base_with(poly, false, DEFAULT_ITERATION_CAP)
}

/// Like [`make_base`], optionally skipping the Pisot check (experimental
/// bases run under the iteration cap).
pub fn make_base_with(
    poly: MinimalPolynomial,
    allow_non_pisot: bool,
    iteration_cap: usize,
) -> Result<BaseRef, BetaError> {
    let field = Field::new(poly)?;
    if !field_is_pisot(&field)? && !allow_non_pisot {
        return Err(BetaError::NotPisot);
    }
    let beta = field.beta();
    let floor_beta = beta.floor();
    let beta_minus_floor = beta.sub(&field.from_rat(Rat::from_integer(floor_beta.clone())));
    let is_integer = beta_minus_floor.is_zero();
    let ceil_beta: Int = if is_integer { floor_beta.clone() } else { &floor_beta + Int::one() };
    let alphabet_big = ceil_beta;
    let alphabet: u8 = alphabet_big
        .to_u8()
        .expect("alphabet sizes above 255 are out of scope");

    // Greedy expansion of β: s₀ = ⌊β⌋, r₀ = {β}, s_{n+1} = ⌊βr_n⌋,
    // r_{n+1} = {βr_n}. Digits of 𝔰(β) are s₀s₁s₂…
    let mut digits: Vec<u8> = vec![floor_beta.to_u8().expect("digit fits u8")];
    let mut r = beta_minus_floor;
    let mut seen: HashMap<Vec<Rat>, usize> = HashMap::new();
    let mut s_pre: Vec<u8> = Vec::new();
    let mut s_period: Vec<u8> = Vec::new();
    let mut raw_finite: Option<Vec<u8>> = None;
    let mut found = false;
    for n in 0..iteration_cap {
        if r.is_zero() {
            // finite raw expansion a₀…a_s: 𝔰(β) = β̂ = (a₀…a_{s−1}(a_s−1))^∞
            raw_finite = Some(digits.clone());
            let mut period = digits.clone();
            let last = period.last_mut().unwrap();
            debug_assert!(*last >= 1, "greedy expansions never terminate with digit 0");
            *last -= 1;
            s_period = period;
            found = true;
            break;
        }
        if let Some(&j) = seen.get(r.coords()) {
            // remainder r_n equals r_j: digits s_{j+1}… repeat with period n−j
            s_pre = digits[..=j].to_vec();
            s_period = digits[j + 1..].to_vec();
            found = true;
            break;
        }
        seen.insert(r.coords().to_vec(), n);
        let br = beta.mul(&r);
        let digit = br.floor();
        r = br.sub(&field.from_rat(Rat::from_integer(digit.clone())));
        digits.push(digit.to_u8().expect("digit fits u8"));
    }
    if !found {
        return Err(BetaError::PeriodNotFound);
    }
    assert!(!s_period.is_empty(), "period must be nonempty");
    let inv_beta = beta.inv()?;
    let base = BetaBase {
        field,
        beta,
        inv_beta,
        alphabet,
        is_integer,
        s_pre,
        s_period,
        raw_finite,
        dfa: OnceLock::new(),
        t_orbit: OnceLock::new(),
        inv_powers: RwLock::new(Vec::new()),
    };
    for i in 0..(base.s_pre.len() + base.s_period.len()) {
        assert!(base.s_digit(i) < alphabet, "s(beta) digit outside the alphabet");
    }
    base.assert_shift_dominance();
    Ok(Arc::new(base))
}

impl BetaBase {
    pub fn field(&self) -> &FieldRef {
        &self.field
    }

    pub fn beta(&self) -> &FieldElement {
        &self.beta
    }

    pub fn inv_beta(&self) -> &FieldElement {
        &self.inv_beta
    }

    /// Alphabet size `⌈β⌉`; digits are `0..alphabet_size`.
    pub fn alphabet_size(&self) -> u8 {
        self.alphabet
    }

    pub fn max_digit(&self) -> u8 {
        self.alphabet - 1
    }

    pub fn is_integer(&self) -> bool {
        self.is_integer
    }

    /// Preperiod of `𝔰(β)` (may be empty).
    pub fn s_preperiod(&self) -> &[u8] {
        &self.s_pre
    }

    /// Period of `𝔰(β)` (nonempty).
    pub fn s_period(&self) -> &[u8] {
        &self.s_period
    }

    /// Raw finite expansion of β when the greedy recurrence terminated.
    pub fn raw_finite_expansion(&self) -> Option<&[u8]> {
        self.raw_finite.as_deref()
    }

    /// Digit `d_{i+1}` of `𝔰(β) = d₁d₂…` (0-indexed).
    pub fn s_digit(&self, i: usize) -> u8 {
        let m = self.s_pre.len();
        if i < m {
            self.s_pre[i]
        } else {
            self.s_period[(i - m) % self.s_period.len()]
        }
    }

    /// Number of canonical automaton states, `m + n`.
    pub fn s_len(&self) -> usize {
        self.s_pre.len() + self.s_period.len()
    }

    fn assert_shift_dominance(&self) {
        // T^k(𝔰(β)) ≤_lex 𝔰(β) for all k; both sequences have period n from
        // index m on, so comparing m + 2n + 2 symbols settles each shift.
        let m = self.s_pre.len();
        let n = self.s_period.len();
        let horizon = m + 2 * n + 2;
        for k in 1..=(m + n) {
            for i in 0..horizon {
                let shifted = self.s_digit(k + i);
                let orig = self.s_digit(i);
                if shifted < orig {
                    break;
                }
                assert!(
                    shifted <= orig,
                    "s(beta) is not shift-dominant; base construction is inconsistent"
                );
            }
        }
    }

    /// The canonical acceptor of `L(X_β)` (built once, cached).
    pub fn dfa(&self) -> &Dfa {
        self.dfa.get_or_init(|| crate::automaton::build_beta_dfa(self))
    }

    /// `β^{−k}` from the cache.
    pub fn inv_beta_pow(&self, k: usize) -> FieldElement {
        {
            let cache = self.inv_powers.read().unwrap();
            if k < cache.len() {
                return cache[k].clone();
            }
        }
        let mut cache = self.inv_powers.write().unwrap();
        if cache.is_empty() {
            cache.push(self.field.one());
        }
        while cache.len() <= k {
            let next = cache.last().unwrap().mul(&self.inv_beta);
            cache.push(next);
        }
        cache[k].clone()
    }

    /// Orbit value `T^j_β(1)`, exact; periodic with period `n` for `j ≥ m`.
    pub fn t_of_one(&self, j: usize) -> FieldElement {
        let m = self.s_pre.len();
        let n = self.s_period.len();
        let table = self.t_orbit.get_or_init(|| {
            // x₀ = 1, x_{j+1} = βx_j − d_{j+1}
            let mut vals = Vec::with_capacity(m + n + 1);
            let mut x = self.field.one();
            vals.push(x.clone());
            for i in 0..(m + n) {
                x = self.beta.mul(&x).sub(&self.field.from_i64(self.s_digit(i) as i64));
                vals.push(x.clone());
            }
            vals
        });
        if j <= m {
            table[j].clone()
        } else {
            table[m + (j - m - 1) % n + 1].clone()
        }
    }

    /// Exact value `⟨σ⟩_β = Σ_k σ_k β^{−(k+1)}`.
    pub fn value(&self, word: &[u8]) -> Result<FieldElement, BetaError> {
        let mut acc = self.field.zero();
        for &d in word.iter().rev() {
            if d >= self.alphabet {
                return Err(BetaError::BadDigit(d, self.max_digit()));
            }
            acc = acc.add(&self.field.from_i64(d as i64)).mul(&self.inv_beta);
        }
        Ok(acc)
    }

    /// First `count` digits of the greedy expansion of `x ∈ [0, 1)`, with a
    /// cycle report once a remainder repeats (subsequent digits are then
    /// emitted from the cycle without arithmetic).
    pub fn expand(&self, x: &FieldElement, count: usize) -> Result<Expansion, BetaError> {
        if x.sign() < 0 || x.sub(&self.field.one()).sign() >= 0 {
            return Err(BetaError::OutOfRange);
        }
        let mut digits: Vec<u8> = Vec::with_capacity(count);
        let mut r = x.clone();
        let mut seen: HashMap<Vec<Rat>, usize> = HashMap::new();
        let mut cycle: Option<Cycle> = None;
        while digits.len() < count {
            if let Some(&j) = seen.get(r.coords()) {
                let period = digits.len() - j;
                cycle = Some(Cycle { preperiod: j, period });
                // fill the rest from the detected cycle
                while digits.len() < count {
                    let i = j + (digits.len() - j) % period;
                    digits.push(digits[i]);
                }
                break;
            }
            seen.insert(r.coords().to_vec(), digits.len());
            let br = self.beta.mul(&r);
            let digit = br.floor();
            r = br.sub(&self.field.from_rat(Rat::from_integer(digit.clone())));
            let d = digit.to_u8().expect("digit fits u8");
            debug_assert!(d < self.alphabet);
            digits.push(d);
        }
        // report a cycle even if it closes exactly at the requested length
        if cycle.is_none() {
            if let Some(&j) = seen.get(r.coords()) {
                cycle = Some(Cycle { preperiod: j, period: digits.len() - j });
            }
        }
        Ok(Expansion { digits, cycle })
    }

    /// Algorithm: approximate a target `r ∈ [0, 1]` by an admissible word τ
    /// with `|⟨τ⟩_β − r| ≤ 2^{−i}`.
    ///
    /// The loop picks the greatest admissible digit whose approximate value
    /// stays below the target, with a +1 correction branch when overshooting
    /// by less than the tolerance, and stops once the approximate value is
    /// within `2^{−i−1}`; inner approximations carry error `2^{−i−2}`.
    pub fn approximate_value(&self, r: &Rat, i: u32) -> Result<Vec<u8>, BetaError> {
        if r.is_negative() || r > &Rat::one() {
            return Err(BetaError::OutOfRange);
        }
        let prec = i + 2;
        let half = Rat::new(Int::one(), Int::one() << (i + 1));
        let dfa = self.dfa();
        let mut word: Vec<u8> = Vec::new();
        let mut state = dfa.start();
        let mut v = self.field.zero();
        let cap = 16 * (i as usize + 2) + 64;
        loop {
            let approx_v = v.approx(prec);
            if (&approx_v - r).abs() <= half {
                return Ok(word);
            }
            assert!(word.len() < cap, "digit emission cap exceeded");
            let step = self.inv_beta_pow(word.len() + 1);
            // greatest admissible digit whose approximate value stays <= r
            let mut chosen: Option<(u8, FieldElement)> = None;
            let mut max_allowed: u8 = 0;
            for a in 0..self.alphabet {
                if dfa.step(state, a).is_none() {
                    break;
                }
                max_allowed = a;
                let va = v.add(&step.scale_i64(a as i64));
                if &va.approx(prec) <= r {
                    chosen = Some((a, va));
                }
            }
            let (mut b, mut vb) = chosen.unwrap_or_else(|| (0, v.add(&step.scale_i64(0))));
            // correction branch: take b+1 when it overshoots by < 2^{−i−1}
            if b < max_allowed {
                let vb1 = v.add(&step.scale_i64((b + 1) as i64));
                if &(&vb1.approx(prec) - &half) < r {
                    b += 1;
                    vb = vb1;
                }
            }
            word.push(b);
            state = dfa.step(state, b).expect("chosen digit is admissible");
            v = vb;
        }
    }

    /// Algorithm 1 entry point: approximate the dyadic rational `⟨σ⟩₂` given
    /// by the binary word σ.
    pub fn approximate_dyadic(&self, bits: &[u8], i: u32) -> Result<Vec<u8>, BetaError> {
        let mut r = Rat::zero();
        let half = Rat::new(Int::one(), Int::from(2));
        let mut w = half.clone();
        for &b in bits {
            if b > 1 {
                return Err(BetaError::BadDigit(b, 1));
            }
            if b == 1 {
                r += &w;
            }
            w *= &half;
        }
        self.approximate_value(&r, i)
    }
}

/// Non-overlapping consecutive `k`-blocks of `s`; a trailing partial block is
/// dropped.
pub fn block_view(s: &[u8], k: usize) -> Vec<&[u8]> {
    assert!(k >= 1, "block length must be positive");
    s.chunks_exact(k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebraic::MinimalPolynomial;

    pub fn base_phi() -> BaseRef {
        make_base(MinimalPolynomial::from_i64(&[-1, -1, 1]).unwrap()).unwrap()
    }

    pub fn base_2() -> BaseRef {
        make_base(MinimalPolynomial::from_i64(&[-2, 1]).unwrap()).unwrap()
    }

    pub fn base_tribonacci() -> BaseRef {
        make_base(MinimalPolynomial::from_i64(&[-1, -1, -1, 1]).unwrap()).unwrap()
    }

    #[test]
    fn s_beta_catalog() {
        let b2 = base_2();
        assert_eq!(b2.s_preperiod(), &[] as &[u8]);
        assert_eq!(b2.s_period(), &[1]);
        assert_eq!(b2.raw_finite_expansion(), Some(&[2u8][..]));

        let phi = base_phi();
        assert_eq!(phi.s_preperiod(), &[] as &[u8]);
        assert_eq!(phi.s_period(), &[1, 0]);
        assert_eq!(phi.raw_finite_expansion(), Some(&[1u8, 1][..]));

        let tri = base_tribonacci();
        assert_eq!(tri.s_preperiod(), &[] as &[u8]);
        assert_eq!(tri.s_period(), &[1, 1, 0]);
        assert_eq!(tri.raw_finite_expansion(), Some(&[1u8, 1, 1][..]));
    }

    #[test]
    fn plastic_number_period_detection() {
        // x^3 - x - 1: smallest Pisot number; 𝔰(β) found by cycle detection
        let b = make_base(MinimalPolynomial::from_i64(&[-1, -1, 0, 1]).unwrap()).unwrap();
        assert!(!b.s_period().is_empty());
        // 𝔰(β) must be shift-dominant and start with ⌊β⌋ = 1
        assert_eq!(b.s_digit(0), 1);
    }

    #[test]
    fn rejects_non_pisot() {
        let sqrt2 = MinimalPolynomial::from_i64(&[-2, 0, 1]).unwrap();
        assert!(matches!(make_base(sqrt2), Err(BetaError::NotPisot)));
    }

    #[test]
    fn expansion_of_half_in_golden_base() {
        let phi = base_phi();
        let half = phi.field().from_rat(Rat::new(Int::one(), Int::from(2)));
        let e = phi.expand(&half, 6).unwrap();
        assert_eq!(e.digits, vec![0, 1, 0, 0, 1, 0]);
        assert_eq!(e.cycle, Some(Cycle { preperiod: 0, period: 3 }));
        // value of one period must equal 1/2·(1 − β^{−3})⁻¹ consistency:
        // directly: ⟨010⟩_β + β^{−3}·(1/2) = 1/2
        let v = phi.value(&[0, 1, 0]).unwrap();
        let lhs = v.add(&phi.inv_beta_pow(3).mul(&half));
        assert_eq!(lhs, half);
    }

    #[test]
    fn expansion_of_third_in_base_2() {
        let b2 = base_2();
        let third = b2.field().from_rat(Rat::new(Int::one(), Int::from(3)));
        let e = b2.expand(&third, 4).unwrap();
        assert_eq!(e.digits, vec![0, 1, 0, 1]);
    }

    #[test]
    fn expand_zero_and_range_errors() {
        let phi = base_phi();
        let zero = phi.field().zero();
        assert_eq!(phi.expand(&zero, 5).unwrap().digits, vec![0; 5]);
        let one = phi.field().one();
        assert!(matches!(phi.expand(&one, 3), Err(BetaError::OutOfRange)));
    }

    #[test]
    fn value_examples() {
        let phi = base_phi();
        assert!(phi.value(&[]).unwrap().is_zero());
        // ⟨01⟩_φ = φ^{−2} = 2 − φ, coords (2, −1)
        let v = phi.value(&[0, 1]).unwrap();
        let expected = phi.field().from_i64(2).sub(&phi.beta().clone());
        assert_eq!(v, expected);
        let b2 = base_2();
        assert_eq!(
            b2.value(&[1, 1]).unwrap().as_rational(),
            Some(Rat::new(Int::from(3), Int::from(4)))
        );
    }

    #[test]
    fn roundtrip_random_rationals() {
        for base in [base_phi(), base_tribonacci()] {
            let f = base.field();
            for q in 1..21u32 {
                let x = f.from_rat(Rat::new(Int::from(q * 7 % 23), Int::from(23)));
                if x.sub(&f.one()).sign() >= 0 {
                    continue;
                }
                let n = 50;
                let e = base.expand(&x, n).unwrap();
                let v = base.value(&e.digits).unwrap();
                // |x − ⟨digits⟩| ≤ β^{−N}
                let diff = x.sub(&v);
                assert!(diff.sign() >= 0);
                assert!(diff.sub(&base.inv_beta_pow(n)).sign() <= 0);
            }
        }
    }

    #[test]
    fn approximate_dyadic_contract() {
        let phi = base_phi();
        for (bits, i) in [(vec![1u8], 4u32), (vec![1, 0, 1], 8), (vec![0, 1, 1, 1], 12)] {
            let tau = phi.approximate_dyadic(&bits, i).unwrap();
            assert!(phi.dfa().accepts(&tau));
            let mut target = Rat::zero();
            for (j, &b) in bits.iter().enumerate() {
                if b == 1 {
                    target += Rat::new(Int::one(), Int::one() << (j as u32 + 1));
                }
            }
            let v = phi.value(&tau).unwrap();
            let err = v.sub(&phi.field().from_rat(target));
            let bound = phi.field().from_rat(Rat::new(Int::one(), Int::one() << i));
            assert!(err.sub(&bound).sign() <= 0 && err.add(&bound).sign() >= 0);
        }
    }

    #[test]
    fn approximate_same_base_is_exact() {
        let b2 = base_2();
        let tau = b2.approximate_dyadic(&[1, 0, 1], 3).unwrap();
        let v = b2.value(&tau).unwrap().as_rational().unwrap();
        assert_eq!(v, Rat::new(Int::from(5), Int::from(8)));
    }

    #[test]
    fn block_view_examples() {
        assert_eq!(block_view(&[0, 1, 0, 0, 1, 0], 3), vec![&[0u8, 1, 0][..], &[0, 1, 0]]);
        assert_eq!(block_view(&[0, 1, 0, 0], 3), vec![&[0u8, 1, 0][..]]);
        assert_eq!(block_view(&[1, 1], 1), vec![&[1u8][..], &[1]]);
    }
}
