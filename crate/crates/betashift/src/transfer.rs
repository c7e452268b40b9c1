//! Transfer of betting capital into a premeasure on the β-shift, with
//! certified evaluation at points of the unit interval.
//!
//! A strategy `M` that is fair for the Parry measure `P` induces the set
//! function `μ(σ) = M(σ)·P(σ)` on cylinders. Its cumulative distribution
//! function can be evaluated to any requested dyadic precision: the greedy
//! expansion of the evaluation point pins the cdf between two exact partial
//! sums whose gap is the mass of one long cylinder, which the savings
//! property drives to zero. The certified number is returned together with
//! its error radius.

use crate::algebraic::{FieldElement, Int, Rat};
use crate::automaton::presentation;
use crate::beta::{BaseRef, BetaError};
use crate::martingale::{MartCursor, Martingale, MartingaleError};
use crate::measures::{EdgeParry, ParryMeasure};
#[cfg(test)]
use crate::measures::WordMeasure;
use num::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("word or point is not admissible for this base")]
    NotAdmissible,
    #[error("certified point evaluation requires the savings property")]
    NoSavingsProperty,
    #[error(transparent)]
    Beta(#[from] BetaError),
    #[error(transparent)]
    Martingale(#[from] MartingaleError),
}

/// A number known to lie within `radius` of `value`.
#[derive(Clone, Debug)]
pub struct Certified {
    pub value: Rat,
    pub radius: Rat,
}

/// Resumable cylinder walk: streaming capital cursor, Parry posterior over
/// the presentation nodes, and the cdf accumulated so far.
struct WalkState<'a> {
    cursor: Box<dyn MartCursor + 'a>,
    rho: Vec<FieldElement>,
    cdf: FieldElement,
}

/// The premeasure `μ(σ) = M(σ)·P(σ)` induced by a strategy `M` fair for the
/// Parry measure `P`, with exact cylinder arithmetic and certified cdf
/// evaluation.
///
/// `savings` asserts that `M` never falls more than a constant below its
/// running maximum (e.g. after [`crate::martingale::SavingsTransform`]);
/// point evaluation is refused without it, because only the savings property
/// makes the cdf continuous with a computable modulus. `step_bound`, when
/// supplied, is a constant `c` with `M(σa) ≤ M(σ) + c`, enabling
/// [`InducedMeasure::almost_lipschitz_bound`].
pub struct InducedMeasure<'a> {
    mart: &'a dyn Martingale,
    base: BaseRef,
    parry: ParryMeasure,
    edge: EdgeParry,
    edge_factors: Vec<FieldElement>,
    savings: bool,
    step_bound: Option<FieldElement>,
}

impl<'a> InducedMeasure<'a> {
    pub fn new(
        mart: &'a dyn Martingale,
        base: BaseRef,
        savings: bool,
        step_bound: Option<FieldElement>,
    ) -> Self {
        let parry = ParryMeasure::new(base.clone());
        let edge = EdgeParry::new(&base, presentation(&base));
        let edge_factors = (0..edge.graph().num_edges()).map(|e| edge.edge_factor(e)).collect();
        InducedMeasure { mart, base, parry, edge, edge_factors, savings, step_bound }
    }

    pub fn base(&self) -> &BaseRef {
        &self.base
    }

    pub fn parry(&self) -> &ParryMeasure {
        &self.parry
    }

    /// μ(σ) = M(σ)·P(σ), exactly.
    pub fn mu(&self, word: &[u8]) -> Result<FieldElement, TransferError> {
        Ok(self.walk(word)?.1)
    }

    /// μ(ε) = M(ε): the total mass.
    pub fn total_mass(&self) -> Result<FieldElement, TransferError> {
        Ok(self.mart.capital(&[])?)
    }

    /// Exact mass of all infinite words lexicographically below `σ·000…`:
    /// `Σ_i Σ_{b < σ_{i+1}} μ((σ↾i)·b)`.
    pub fn cdf_beta_adic(&self, word: &[u8]) -> Result<FieldElement, TransferError> {
        Ok(self.walk(word)?.0)
    }

    /// One pass along `word` computing (cdf below the word, μ(word)). The
    /// Parry mass of the running prefix is maintained as a posterior vector
    /// over the presentation nodes (pushed through the stationary edge
    /// chain), the capital through a streaming cursor, so the pass costs
    /// O(|word|·|edges|) field operations.
    fn walk(&self, word: &[u8]) -> Result<(FieldElement, FieldElement), TransferError> {
        let mut state = self.start_walk();
        for &d in word {
            self.step_walk(&mut state, d)?;
        }
        let mass = self.walk_mass(&state);
        Ok((state.cdf, mass))
    }

    fn start_walk(&self) -> WalkState<'_> {
        let nn = self.edge.graph().num_nodes();
        WalkState {
            cursor: self.mart.cursor(),
            rho: (0..nn).map(|v| self.edge.node_mass(v)).collect(),
            cdf: self.base.field().zero(),
        }
    }

    fn step_walk(&self, state: &mut WalkState<'_>, d: u8) -> Result<(), TransferError> {
        let field = self.base.field();
        let graph = self.edge.graph();
        let nn = graph.num_nodes();
        // push ρ one letter forward, split by letter
        let mut pushed: Vec<Vec<FieldElement>> = vec![vec![field.zero(); nn]; d as usize + 1];
        for u in 0..nn {
            if state.rho[u].is_zero() {
                continue;
            }
            for &e in graph.out_edges(u) {
                let edge = graph.edge(e);
                if edge.label > d {
                    continue;
                }
                let t = state.rho[u].mul(&self.edge_factors[e]);
                let cell = &pushed[edge.label as usize][edge.dest];
                pushed[edge.label as usize][edge.dest] = cell.add(&t);
            }
        }
        for b in 0..d {
            let mut mass = field.zero();
            for v in &pushed[b as usize] {
                mass = mass.add(v);
            }
            if mass.is_zero() {
                continue;
            }
            state.cdf = state.cdf.add(&state.cursor.child_capital(b)?.mul(&mass));
        }
        state.rho = pushed.pop().expect("vector has d + 1 rows");
        if state.rho.iter().all(|v| v.is_zero()) {
            return Err(TransferError::NotAdmissible);
        }
        state.cursor.advance(d)?;
        Ok(())
    }

    /// μ of the current prefix: capital times the Parry mass of the prefix.
    fn walk_mass(&self, state: &WalkState<'_>) -> FieldElement {
        let mut prefix_mass = self.base.field().zero();
        for v in &state.rho {
            prefix_mass = prefix_mass.add(v);
        }
        state.cursor.capital().mul(&prefix_mass)
    }

    /// Certified cdf at a point of the ambient field. The greedy expansion
    /// σ_D of `x` sandwiches the cdf inside
    /// `[cdf_beta_adic(σ_D), cdf_beta_adic(σ_D) + μ(σ_D)]`; the depth D grows
    /// until the gap drops below `2^{−(i+1)}`. The returned value carries
    /// radius `2^{−i}`.
    pub fn cdf_at(&self, x: &FieldElement, i: u32) -> Result<Certified, TransferError> {
        Ok(self.cdf_at_multi(x, &[i])?.pop().expect("one precision requested"))
    }

    /// Certified cdf at one point for several precisions, sharing a single
    /// cylinder walk: the value at precision `i` is emitted as soon as the
    /// sandwich gap clears `2^{−(i+1)}`, and the walk keeps deepening for the
    /// finer precisions. Results are returned in the order of `precs`.
    pub fn cdf_at_multi(
        &self,
        x: &FieldElement,
        precs: &[u32],
    ) -> Result<Vec<Certified>, TransferError> {
        if !self.savings {
            return Err(TransferError::NoSavingsProperty);
        }
        let field = self.base.field();
        let radius = |i: u32| Rat::new(Int::one(), Int::one() << i);
        if x.sign() <= 0 {
            return Ok(precs
                .iter()
                .map(|&i| Certified { value: Rat::zero(), radius: radius(i) })
                .collect());
        }
        if x.sub(&field.one()).sign() >= 0 {
            let total = self.total_mass()?;
            return Ok(precs
                .iter()
                .map(|&i| Certified { value: total.approx(i + 2), radius: radius(i) })
                .collect());
        }
        // initial depth estimate β^{−D} ≲ 2^{−(i+2)} per precision; the walk
        // deepens in place (the greedy expansion is prefix-stable) until the
        // exact sandwich width clears each gap
        let beta_f = self.base.beta().to_f64();
        let depth_for = |i: u32| {
            ((f64::from(i) + 2.0) * std::f64::consts::LN_2 / beta_f.ln()).ceil() as usize + 4
        };
        let half = Rat::new(Int::one(), Int::from(2));
        let mut order: Vec<usize> = (0..precs.len()).collect();
        order.sort_by_key(|&idx| precs[idx]);
        let mut out: Vec<Option<Certified>> = vec![None; precs.len()];
        let mut next = 0usize;
        let mut limit = depth_for(precs[order[order.len() - 1]]) + 8;
        let mut state = self.start_walk();
        let mut pos = 0usize;
        loop {
            let sigma = self.base.expand(x, limit)?.digits;
            debug_assert_eq!(sigma.len(), limit);
            while pos < sigma.len() {
                self.step_walk(&mut state, sigma[pos])?;
                pos += 1;
                while next < order.len() {
                    let idx = order[next];
                    let i = precs[idx];
                    if pos < depth_for(i) {
                        break;
                    }
                    // μ(σ_D) ≤ 2^{−(i+1)} certified through a one-sided
                    // rational bound: approx(i + 4) errs by at most 2^{−(i+5)}
                    let mass = self.walk_mass(&state);
                    let gap = Rat::new(Int::one(), Int::one() << (i + 1));
                    let slack = Rat::new(Int::one(), Int::one() << (i + 5));
                    if mass.approx(i + 4) + slack > gap {
                        break;
                    }
                    let mid = state.cdf.add(&mass.mul_rat(&half));
                    out[idx] = Some(Certified { value: mid.approx(i + 2), radius: radius(i) });
                    next += 1;
                }
                if next == order.len() {
                    return Ok(out.into_iter().map(|c| c.expect("all emitted")).collect());
                }
            }
            limit += 24;
            assert!(limit <= 20_000, "certified evaluation depth cap exceeded");
        }
    }

    /// Certified cdf at a rational point.
    pub fn cdf_dyadic(&self, p: &Rat, i: u32) -> Result<Certified, TransferError> {
        let x = self.base.field().from_rat(p.clone());
        self.cdf_at(&x, i)
    }

    /// [`InducedMeasure::cdf_at_multi`] at a rational point.
    pub fn cdf_dyadic_multi(&self, p: &Rat, precs: &[u32]) -> Result<Vec<Certified>, TransferError> {
        let x = self.base.field().from_rat(p.clone());
        self.cdf_at_multi(&x, precs)
    }

    /// Certified value of the binary-word function
    /// `N(τ) = 2^{|τ|}·(cdf(⟨τ⟩₂ + 2^{−|τ|}) − cdf(⟨τ⟩₂))`, the martingale on
    /// binary words induced through the base-2 encoding of the interval.
    pub fn binary_martingale(&self, tau: &[u8], i: u32) -> Result<Certified, TransferError> {
        let k = tau.len() as u32;
        let inner = i + 1 + k;
        let mut p1 = Rat::zero();
        let half = Rat::new(Int::one(), Int::from(2));
        let mut w = half.clone();
        for &b in tau {
            if b > 1 {
                return Err(TransferError::NotAdmissible);
            }
            if b == 1 {
                p1 += &w;
            }
            w *= &half;
        }
        let p2 = &p1 + Rat::new(Int::one(), Int::one() << k);
        let c1 = self.cdf_dyadic(&p1, inner)?;
        let c2 = self.cdf_dyadic(&p2, inner)?;
        let scale = Rat::from_integer(Int::one() << k);
        Ok(Certified {
            value: (c2.value - c1.value) * &scale,
            radius: (c1.radius + c2.radius) * scale,
        })
    }

    /// Upper bound on `cdf(x + h) − cdf(x)` valid for every `x`:
    /// `k·(1 + 2β)·h·(c·j + M(ε))` where `k` is the maximum of the Parry
    /// density, `c` the per-step capital increase bound, and `j` the least
    /// cylinder depth with `β^{−j} ≤ h`. An interval of length `h` is covered
    /// by depth-`j` cylinders of total length at most `h + 2β^{−j} ≤ (1+2β)h`,
    /// each carrying capital at most `M(ε) + c·j`.
    pub fn almost_lipschitz_bound(&self, h: &Rat) -> Result<FieldElement, TransferError> {
        let c = self.step_bound.as_ref().ok_or(TransferError::NoSavingsProperty)?;
        let field = self.base.field();
        assert!(h > &Rat::zero(), "interval length must be positive");
        let h_el = field.from_rat(h.clone());
        let (_, density_max) = self.parry.density_extremes();
        let d = density_max.mul(&field.one().add(&self.base.beta().scale_i64(2)));
        let mut j = 0usize;
        while self.base.inv_beta_pow(j).cmp_exact(&h_el).is_gt() {
            j += 1;
            assert!(j <= 10_000, "interval length too small for the bound");
        }
        let per_word = c.scale_i64(j as i64).add(&self.mart.capital(&[])?);
        Ok(d.mul(&h_el).mul(&per_word))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebraic::MinimalPolynomial;
    use crate::automaton::admissible_words;
    use crate::beta::make_base;
    use crate::martingale::{construct_case1, DfaMartingale, SavingsTransform};
    use crate::measures::parry_markov;
    use num::Signed;

    fn base_phi() -> BaseRef {
        make_base(MinimalPolynomial::from_i64(&[-1, -1, 1]).unwrap()).unwrap()
    }

    fn base_2() -> BaseRef {
        make_base(MinimalPolynomial::from_i64(&[-2, 1]).unwrap()).unwrap()
    }

    fn rat(n: i64, d: i64) -> Rat {
        Rat::new(Int::from(n), Int::from(d))
    }

    fn savings_case1(base: &BaseRef) -> SavingsTransform<DfaMartingale> {
        let p = parry_markov(base, 1).unwrap();
        SavingsTransform::new(construct_case1(&p, &[0], 1, rat(1, 2)).unwrap())
    }

    #[test]
    fn walk_mass_matches_density_route() {
        for base in [base_2(), base_phi()] {
            let field = base.field().clone();
            let mart = DfaMartingale::constant(field.clone(), base.dfa().clone());
            let induced = InducedMeasure::new(&mart, base.clone(), true, None);
            let parry = ParryMeasure::new(base.clone());
            for depth in 0..=8usize {
                for w in admissible_words(&base, depth) {
                    let via_walk = induced.mu(&w).unwrap();
                    let via_density = parry.cylinder(&w);
                    assert!(
                        via_walk.cmp_exact(&via_density).is_eq(),
                        "mass mismatch at {w:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn constant_strategy_reproduces_parry_cdf() {
        let b2 = base_2();
        let field = b2.field().clone();
        let m = DfaMartingale::constant(field.clone(), b2.dfa().clone());
        let induced = InducedMeasure::new(&m, b2.clone(), true, Some(field.zero()));
        // base 2, M ≡ 1: μ is the uniform measure, cdf(p) = p
        for p in [rat(1, 2), rat(3, 8), rat(5, 7), rat(1, 1), rat(0, 1)] {
            let c = induced.cdf_dyadic(&p, 20).unwrap();
            assert!((c.value - &p).abs() <= c.radius);
        }
        for tau in [vec![], vec![0], vec![1, 0, 1], vec![0, 0, 1, 1]] {
            let n = induced.binary_martingale(&tau, 16).unwrap();
            assert!((n.value - Rat::one()).abs() <= n.radius);
        }
    }

    #[test]
    fn beta_adic_cdf_matches_brute_force() {
        let base = base_phi();
        let mart = savings_case1(&base);
        let induced = InducedMeasure::new(&mart, base.clone(), true, None);
        let words = admissible_words(&base, 6);
        for sigma in &words {
            let mut total = induced.base.field().zero();
            for w in &words {
                if w.len() == sigma.len() && w.as_slice() < sigma.as_slice() {
                    total = total.add(&induced.mu(w).unwrap());
                }
            }
            let fast = induced.cdf_beta_adic(sigma).unwrap();
            assert!(total.cmp_exact(&fast).is_eq(), "cdf mismatch at {sigma:?}");
        }
    }

    #[test]
    fn certified_cdf_matches_deep_expansion() {
        let base = base_phi();
        let field = base.field().clone();
        let m = DfaMartingale::constant(field.clone(), base.dfa().clone());
        let induced = InducedMeasure::new(&m, base.clone(), true, Some(field.zero()));
        // oracle: 200-digit expansion pins the Parry cdf far tighter than
        // any certificate below
        for p in [rat(1, 2), rat(1, 3), rat(2, 7), rat(9, 10)] {
            let x = field.from_rat(p.clone());
            let sigma = base.expand(&x, 200).unwrap().digits;
            let oracle = induced.cdf_beta_adic(&sigma).unwrap().approx(120);
            for i in [8u32, 16, 24] {
                let c = induced.cdf_dyadic(&p, i).unwrap();
                let slack = Rat::new(Int::one(), Int::one() << 100);
                assert!((c.value - &oracle).abs() <= c.radius + slack);
            }
        }
    }

    #[test]
    fn certified_cdf_is_monotone() {
        let base = base_phi();
        let mart = savings_case1(&base);
        let induced = InducedMeasure::new(&mart, base.clone(), true, None);
        let mut prev = Rat::zero() - rat(1, 1);
        for n in 0..=16 {
            let c = induced.cdf_dyadic(&rat(n, 16), 20).unwrap();
            // true cdf is monotone; certificates may only cross by radii
            assert!(c.value.clone() + c.radius * rat(2, 1) >= prev);
            prev = c.value;
        }
    }

    #[test]
    fn binary_martingale_residuals_are_small() {
        let base = base_phi();
        let mart = savings_case1(&base);
        let induced = InducedMeasure::new(&mart, base.clone(), true, None);
        let i = 14u32;
        let tol = Rat::new(Int::from(3), Int::one() << i);
        for tau in [vec![], vec![1], vec![0, 1], vec![1, 0]] {
            let n = induced.binary_martingale(&tau, i).unwrap();
            let mut t0 = tau.clone();
            t0.push(0);
            let mut t1 = tau.clone();
            t1.push(1);
            let n0 = induced.binary_martingale(&t0, i).unwrap();
            let n1 = induced.binary_martingale(&t1, i).unwrap();
            let avg = (n0.value + n1.value) * rat(1, 2);
            assert!((n.value - avg).abs() <= tol, "fairness residual too large at {tau:?}");
        }
    }

    #[test]
    fn modulus_bounds_cdf_increments() {
        let base = base_phi();
        let field = base.field().clone();
        let mart = savings_case1(&base);
        // per-step increase of the savings transform: active capital stays
        // below 2·M(ε), the Case-I factor is 1 + δ = 3/2, so c = 2·(3/2 − 1)
        let induced = InducedMeasure::new(&mart, base.clone(), true, Some(field.one()));
        let i = 16u32;
        for j in [4u32, 6, 8] {
            let h = base.inv_beta_pow(j as usize).approx(64);
            let bound = induced.almost_lipschitz_bound(&h).unwrap().approx(64);
            for n in [1i64, 5, 11, 13] {
                let x = rat(n, 16);
                let lo = induced.cdf_dyadic(&x, i).unwrap();
                let hi = induced.cdf_dyadic(&(&x + &h), i).unwrap();
                let diff = hi.value - lo.value - lo.radius - hi.radius;
                assert!(diff <= bound, "modulus violated at x={x}, h=β^{{-{j}}}");
            }
        }
    }
}
