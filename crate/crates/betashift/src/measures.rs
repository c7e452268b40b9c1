//! Measures on shift spaces: k-step Markov measures with exact stationary
//! vectors, the interval-length function ξ of β-adic cylinders, the maximal
//! (Parry) measure computed by two independent routes, occurrence statistics,
//! seeded sampling, and the symbol×state product chain with its growth
//! exponent.

use crate::algebraic::{FieldElement, FieldRef, Rat};
use crate::automaton::{boundary_combinatorics, Dfa, LabeledGraph, Next};
use crate::beta::{BaseRef, BetaBase};
use num::{BigInt, One};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("transition chain is not irreducible")]
    NotIrreducible,
    #[error("word is not admissible / not supported")]
    NotAdmissible,
    #[error("state set is not an ergodic class")]
    NotErgodicClass,
    #[error("measure is not supported on the automaton's language")]
    NotSupported,
}

/// A probability measure on infinite words, evaluated on cylinders, with
/// values in the ambient number field.
pub trait WordMeasure {
    fn field(&self) -> &FieldRef;
    fn alphabet_size(&self) -> u8;
    /// P([word]); exactly zero outside the support language.
    fn cylinder(&self, word: &[u8]) -> FieldElement;
    /// P(word·digit | word); zero when the cylinder of `word` is null.
    fn conditional(&self, word: &[u8], digit: u8) -> FieldElement {
        let denom = self.cylinder(word);
        if denom.is_zero() {
            return self.field().zero();
        }
        let mut w = word.to_vec();
        w.push(digit);
        self.cylinder(&w).div(&denom).expect("nonzero denominator")
    }
    fn supported(&self, word: &[u8]) -> bool {
        !self.cylinder(word).is_zero()
    }
}

// ---------------------------------------------------------------------------
// exact linear algebra helpers
// ---------------------------------------------------------------------------

/// Solve for a one-dimensional nullspace of a square matrix with exact
/// entries; panics if the kernel dimension is not 1.
pub(crate) fn nullspace_vector(matrix: &[Vec<FieldElement>], field: &FieldRef) -> Vec<FieldElement> {
    let n = matrix.len();
    let mut m: Vec<Vec<FieldElement>> = matrix.to_vec();
    let mut pivot_col_of_row: Vec<usize> = Vec::new();
    let mut row = 0usize;
    for col in 0..n {
        // find pivot
        let mut pivot = None;
        for r in row..n {
            if !m[r][col].is_zero() {
                pivot = Some(r);
                break;
            }
        }
        let Some(p) = pivot else { continue };
        m.swap(row, p);
        let inv = m[row][col].inv().expect("nonzero pivot");
        for c in 0..n {
            m[row][c] = m[row][c].mul(&inv);
        }
        for r in 0..n {
            if r != row && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for c in 0..n {
                    let delta = factor.mul(&m[row][c]);
                    m[r][c] = m[r][c].sub(&delta);
                }
            }
        }
        pivot_col_of_row.push(col);
        row += 1;
        if row == n {
            break;
        }
    }
    let rank = row;
    assert_eq!(rank, n - 1, "kernel must be one-dimensional (rank {rank} of {n})");
    let free_col = (0..n)
        .find(|c| !pivot_col_of_row.contains(c))
        .expect("a free column exists");
    let mut v = vec![field.zero(); n];
    v[free_col] = field.one();
    for (r, &pc) in pivot_col_of_row.iter().enumerate() {
        v[pc] = m[r][free_col].neg();
    }
    v
}

// ---------------------------------------------------------------------------
// k-step Markov measures
// ---------------------------------------------------------------------------

/// A k-step Markov measure: blocks Θ_k with positive mass, an initial
/// distribution over Θ_k, and next-digit conditionals per block. `k = 0`
/// degenerates to a Bernoulli measure.
#[derive(Clone)]
pub struct MarkovMeasure {
    field: FieldRef,
    alphabet: u8,
    k: usize,
    blocks: Vec<Vec<u8>>,
    block_index: HashMap<Vec<u8>, usize>,
    initial: Vec<FieldElement>,
    /// `trans[i][a]` = P(next digit a | context blocks[i])
    trans: Vec<Vec<FieldElement>>,
    invariant: bool,
}

impl MarkovMeasure {
    pub fn new(
        field: FieldRef,
        alphabet: u8,
        k: usize,
        blocks: Vec<Vec<u8>>,
        initial: Vec<FieldElement>,
        trans: Vec<Vec<FieldElement>>,
    ) -> Self {
        assert_eq!(blocks.len(), initial.len());
        assert_eq!(blocks.len(), trans.len());
        let one = field.one();
        let mut total = field.zero();
        for x in &initial {
            assert!(x.sign() >= 0, "initial masses must be nonnegative");
            total = total.add(x);
        }
        assert!(total.cmp_exact(&one).is_eq(), "initial distribution must sum to 1");
        for (i, row) in trans.iter().enumerate() {
            assert_eq!(row.len(), alphabet as usize);
            let mut s = field.zero();
            for x in row {
                assert!(x.sign() >= 0, "probabilities must be nonnegative");
                s = s.add(x);
            }
            assert!(s.cmp_exact(&one).is_eq(), "row {i} must sum to 1 exactly");
        }
        let block_index = blocks.iter().cloned().enumerate().map(|(i, b)| (b, i)).collect();
        let mut m = MarkovMeasure {
            field,
            alphabet,
            k,
            blocks,
            block_index,
            initial,
            trans,
            invariant: false,
        };
        m.invariant = m.check_invariant();
        m
    }

    /// Bernoulli measure (k = 0) from next-digit probabilities.
    pub fn bernoulli(field: FieldRef, probs: Vec<FieldElement>) -> Self {
        let alphabet = probs.len() as u8;
        let init = vec![field.one()];
        Self::new(field, alphabet, 0, vec![Vec::new()], init, vec![probs])
    }

    /// Uniform Bernoulli on `alphabet` symbols.
    pub fn uniform(field: FieldRef, alphabet: u8) -> Self {
        let p = field
            .from_rat(Rat::new(BigInt::one(), BigInt::from(alphabet)));
        Self::bernoulli(field.clone(), vec![p; alphabet as usize])
    }

    /// Build from next-digit conditionals on length-k contexts, taking the
    /// stationary distribution of the induced block chain as the initial
    /// distribution. Contexts with an all-zero row are dropped from Θ_k.
    pub fn from_conditionals(
        field: FieldRef,
        alphabet: u8,
        k: usize,
        cond: impl Fn(&[u8], u8) -> FieldElement,
    ) -> Result<Self, MeasureError> {
        // enumerate candidate contexts reachable under positive conditionals
        let mut all: Vec<Vec<u8>> = vec![Vec::new()];
        for _ in 0..k {
            let mut next = Vec::new();
            for w in &all {
                for a in 0..alphabet {
                    let mut w2 = w.clone();
                    w2.push(a);
                    next.push(w2);
                }
            }
            all = next;
        }
        let blocks: Vec<Vec<u8>> = all
            .into_iter()
            .filter(|b| (0..alphabet).any(|a| !cond(b, a).is_zero()))
            .collect();
        let trans: Vec<Vec<FieldElement>> = blocks
            .iter()
            .map(|b| (0..alphabet).map(|a| cond(b, a)).collect())
            .collect();
        let uniform_init = {
            let p = field.from_rat(Rat::new(BigInt::one(), BigInt::from(blocks.len())));
            vec![p; blocks.len()]
        };
        let m = Self::new(field.clone(), alphabet, k, blocks, uniform_init, trans);
        let st = m.stationary()?;
        Ok(Self::new(field, alphabet, k, m.blocks, st, m.trans))
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn blocks(&self) -> &[Vec<u8>] {
        &self.blocks
    }

    pub fn initial(&self) -> &[FieldElement] {
        &self.initial
    }

    pub fn is_invariant(&self) -> bool {
        self.invariant
    }

    fn block_of(&self, context: &[u8]) -> Option<usize> {
        self.block_index.get(context).copied()
    }

    /// Digit conditional given a length-k context.
    pub fn digit_conditional(&self, context: &[u8], a: u8) -> FieldElement {
        assert_eq!(context.len(), self.k);
        match self.block_of(context) {
            Some(i) => self.trans[i][a as usize].clone(),
            None => self.field.zero(),
        }
    }

    /// The induced 1-step chain on Θ_k: `(index map, transition matrix)` with
    /// p_{i,j} > 0 exactly when blocks[j] = blocks[i][1..]·a and the digit
    /// conditional of a is positive.
    pub fn induced_one_step(&self) -> Vec<Vec<FieldElement>> {
        let n = self.blocks.len();
        let mut p = vec![vec![self.field.zero(); n]; n];
        for i in 0..n {
            for a in 0..self.alphabet {
                let q = self.trans[i][a as usize].clone();
                if q.is_zero() {
                    continue;
                }
                let mut succ = if self.k == 0 {
                    Vec::new()
                } else {
                    let mut s = self.blocks[i][1..].to_vec();
                    s.push(a);
                    s
                };
                if self.k == 0 {
                    succ = Vec::new();
                }
                if let Some(j) = self.block_of(&succ) {
                    p[i][j] = p[i][j].add(&q);
                }
            }
        }
        p
    }

    pub fn is_irreducible(&self) -> bool {
        let p = self.induced_one_step();
        let n = p.len();
        // strong connectivity by BFS both ways from node 0
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    let edge = if forward { !p[i][j].is_zero() } else { !p[j][i].is_zero() };
                    if edge && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|b| b)
        };
        n > 0 && reach(true) && reach(false)
    }

    /// Exact stationary distribution of the block chain (unique left
    /// eigenvector of the transition matrix for eigenvalue 1).
    pub fn stationary(&self) -> Result<Vec<FieldElement>, MeasureError> {
        if !self.is_irreducible() {
            return Err(MeasureError::NotIrreducible);
        }
        let p = self.induced_one_step();
        let n = p.len();
        // solve π (P − I) = 0  ⇔  (Pᵀ − I) πᵀ = 0
        let mut m = vec![vec![self.field.zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = p[j][i].clone();
            }
            m[i][i] = m[i][i].sub(&self.field.one());
        }
        let v = nullspace_vector(&m, &self.field);
        let mut total = self.field.zero();
        for x in &v {
            total = total.add(x);
        }
        let inv = total.inv().expect("stationary vector has nonzero mass");
        let mut pi: Vec<FieldElement> = v.iter().map(|x| x.mul(&inv)).collect();
        // fix overall sign so masses are positive
        if pi.iter().any(|x| x.sign() < 0) {
            pi = pi.iter().map(|x| x.neg()).collect();
        }
        Ok(pi)
    }

    fn check_invariant(&self) -> bool {
        let p = self.induced_one_step();
        let n = p.len();
        for j in 0..n {
            let mut s = self.field.zero();
            for i in 0..n {
                s = s.add(&self.initial[i].mul(&p[i][j]));
            }
            if !s.cmp_exact(&self.initial[j]).is_eq() {
                return false;
            }
        }
        true
    }

    /// Acceptor of the support language.
    pub fn support_dfa(&self) -> Dfa {
        // states: contexts of length < k (prefix states) plus Θ_k
        let mut states: Vec<Vec<u8>> = Vec::new();
        let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
        let add = |w: Vec<u8>, states: &mut Vec<Vec<u8>>, index: &mut HashMap<Vec<u8>, usize>| {
            if !index.contains_key(&w) {
                index.insert(w.clone(), states.len());
                states.push(w);
            }
        };
        add(Vec::new(), &mut states, &mut index);
        let mut frontier = vec![Vec::new()];
        for _ in 0..self.k {
            let mut next = Vec::new();
            for w in frontier {
                for a in 0..self.alphabet {
                    let mut w2 = w.clone();
                    w2.push(a);
                    if !self.cylinder(&w2).is_zero() {
                        add(w2.clone(), &mut states, &mut index);
                        next.push(w2);
                    }
                }
            }
            frontier = next;
        }
        let mut transitions = vec![vec![None; self.alphabet as usize]; states.len()];
        for (i, w) in states.iter().enumerate() {
            for a in 0..self.alphabet {
                let positive = if w.len() < self.k {
                    let mut w2 = w.clone();
                    w2.push(a);
                    !self.cylinder(&w2).is_zero()
                } else {
                    !self.trans[self.block_of(w).unwrap()][a as usize].is_zero()
                };
                if positive {
                    let mut w2 = w.clone();
                    w2.push(a);
                    if w2.len() > self.k {
                        w2.remove(0);
                    }
                    transitions[i][a as usize] = Some(index[&w2]);
                }
            }
        }
        Dfa::new_accepting(self.alphabet, transitions, 0)
    }

    /// Draw a length-N sequence with a seeded deterministic generator.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<u8>, MeasureError> {
        if !self.is_irreducible() {
            return Err(MeasureError::NotIrreducible);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pick = |weights: &[f64], rng: &mut ChaCha8Rng| -> usize {
            let total: f64 = weights.iter().sum();
            let mut u: f64 = rng.gen::<f64>() * total;
            for (i, w) in weights.iter().enumerate() {
                u -= w;
                if u <= 0.0 {
                    return i;
                }
            }
            weights.len() - 1
        };
        let mut out = Vec::with_capacity(n);
        // initial block per the initial distribution
        let init_w: Vec<f64> = self.initial.iter().map(|x| x.to_f64()).collect();
        let b0 = pick(&init_w, &mut rng);
        out.extend_from_slice(&self.blocks[b0]);
        out.truncate(n);
        let trans_f: Vec<Vec<f64>> = self
            .trans
            .iter()
            .map(|row| row.iter().map(|x| x.to_f64()).collect())
            .collect();
        let mut block = b0;
        while out.len() < n {
            let a = pick(&trans_f[block], &mut rng) as u8;
            out.push(a);
            if self.k > 0 {
                let mut succ = self.blocks[block][1..].to_vec();
                succ.push(a);
                block = self.block_of(&succ).ok_or(MeasureError::NotSupported)?;
            }
        }
        Ok(out)
    }
}

impl WordMeasure for MarkovMeasure {
    fn field(&self) -> &FieldRef {
        &self.field
    }

    fn alphabet_size(&self) -> u8 {
        self.alphabet
    }

    fn cylinder(&self, word: &[u8]) -> FieldElement {
        if word.len() < self.k {
            // marginal of the initial distribution
            let mut s = self.field.zero();
            for (i, b) in self.blocks.iter().enumerate() {
                if b.starts_with(word) {
                    s = s.add(&self.initial[i]);
                }
            }
            return s;
        }
        let Some(mut block) = self.block_of(&word[..self.k]) else {
            return self.field.zero();
        };
        let mut p = self.initial[block].clone();
        for i in self.k..word.len() {
            if p.is_zero() {
                return self.field.zero();
            }
            let a = word[i];
            p = p.mul(&self.trans[block][a as usize]);
            if self.k > 0 {
                let mut succ = word[i + 1 - self.k..i].to_vec();
                succ.push(a);
                match self.block_of(&succ) {
                    Some(j) => block = j,
                    None => return self.field.zero(),
                }
            }
        }
        p
    }

    fn conditional(&self, word: &[u8], digit: u8) -> FieldElement {
        if word.len() >= self.k {
            let ctx = &word[word.len() - self.k..];
            match self.block_of(ctx) {
                Some(i) => self.trans[i][digit as usize].clone(),
                None => self.field.zero(),
            }
        } else {
            let denom = self.cylinder(word);
            if denom.is_zero() {
                return self.field.zero();
            }
            let mut w = word.to_vec();
            w.push(digit);
            self.cylinder(&w).div(&denom).expect("nonzero")
        }
    }
}

// ---------------------------------------------------------------------------
// ξ: Lebesgue length of β-adic cylinder intervals
// ---------------------------------------------------------------------------

/// ξ(σ) = λ(I_σ), the length of the interval of reals whose expansion starts
/// with σ, by the closed-form case analysis:
/// prefix of 𝔰(β) → 1 − ⟨σ⟩; σ ∈ 𝓛 → β^{−|σ|}; otherwise split at N_σ into
/// ξ(σ↾N_σ)·ξ(𝔰↾(|σ|−N_σ)).
pub fn xi(base: &BetaBase, sigma: &[u8]) -> Result<FieldElement, MeasureError> {
    let field = base.field();
    if sigma.is_empty() {
        return Ok(field.one());
    }
    let b = boundary_combinatorics(base, sigma).map_err(|_| MeasureError::NotAdmissible)?;
    if b.n_sigma == 0 {
        // σ is a prefix of 𝔰(β): right endpoint of I_σ is 1
        let v = base.value(sigma).expect("admissible");
        return Ok(field.one().sub(&v));
    }
    if b.in_language_l {
        return Ok(base.inv_beta_pow(sigma.len()));
    }
    // σ = τc · 𝔰↾l with τc = σ↾N_σ, l = |σ| − N_σ ≥ 1, and τc strictly shorter
    let head = xi(base, &sigma[..b.n_sigma])?;
    let l = sigma.len() - b.n_sigma;
    // ξ(𝔰↾l) = 1 − ⟨𝔰↾l⟩ = β^{−l}·T^l(1)
    let tail = base.inv_beta_pow(l).mul(&base.t_of_one(l));
    Ok(head.mul(&tail))
}

/// Interval oracle for ξ: ⟨next(σ)⟩ − ⟨σ⟩, or 1 − ⟨σ⟩ at the right boundary.
pub fn xi_oracle(base: &BetaBase, sigma: &[u8]) -> Result<FieldElement, MeasureError> {
    let field = base.field();
    if sigma.is_empty() {
        return Ok(field.one());
    }
    let b = boundary_combinatorics(base, sigma).map_err(|_| MeasureError::NotAdmissible)?;
    let v = base.value(sigma).expect("admissible");
    Ok(match b.next {
        Next::Word(w) => base.value(&w).expect("admissible").sub(&v),
        Next::Boundary => field.one().sub(&v),
    })
}

// ---------------------------------------------------------------------------
// Parry measure: density route
// ---------------------------------------------------------------------------

/// The maximal-entropy (Parry) measure on the β-shift, evaluated through its
/// absolutely continuous density C·Σ_{n≥0} β^{−n}·1_{[0,T^n(1))}, normalized
/// to total mass 1.
pub struct ParryMeasure {
    base: BaseRef,
    /// per-orbit-index weights: β^{−j} before the period, β^{−j}/(1−β^{−n})
    /// inside it (summing the periodic tail in closed form)
    weights: Vec<FieldElement>,
    /// normalizing constant C
    norm: FieldElement,
}

impl ParryMeasure {
    pub fn new(base: BaseRef) -> Self {
        let field = base.field().clone();
        let m = base.s_preperiod().len();
        let n = base.s_period().len();
        let mut weights = Vec::with_capacity(m + n);
        // Σ_{t≥0} β^{−(j+tn)} = β^{−j}/(1−β^{−n}) for period positions
        let tail = field
            .one()
            .sub(&base.inv_beta_pow(n))
            .inv()
            .expect("β > 1 so 1−β^{−n} ≠ 0");
        for j in 0..m + n {
            let w = base.inv_beta_pow(j);
            weights.push(if j < m { w } else { w.mul(&tail) });
        }
        let mut total = field.zero();
        for (j, w) in weights.iter().enumerate() {
            total = total.add(&w.mul(&base.t_of_one(j)));
        }
        let norm = total.inv().expect("positive total mass");
        ParryMeasure { base, weights, norm }
    }

    pub fn base(&self) -> &BaseRef {
        &self.base
    }

    /// λ(I_σ ∩ [0, T^j(1))) as a function of the lexicographic comparison of
    /// σ against the expansion of T^j(1) (the digits 𝔰(β) from position j).
    fn orbit_overlap(&self, sigma: &[u8], j: usize) -> FieldElement {
        let field = self.base.field();
        for (t, &d) in sigma.iter().enumerate() {
            let s = self.base.s_digit(j + t);
            if d < s {
                // entire cylinder interval lies below T^j(1)
                return xi(&self.base, sigma).expect("admissible");
            }
            if d > s {
                return field.zero();
            }
        }
        // σ is a prefix of the orbit expansion: overlap [⟨σ⟩, T^j(1))
        self.base
            .inv_beta_pow(sigma.len())
            .mul(&self.base.t_of_one(j + sigma.len()))
    }

    /// Exact (min, max) of the piecewise-constant density over [0, 1). The
    /// density takes finitely many values, constant between consecutive
    /// orbit points T^j(1); just below each orbit point it equals
    /// C·Σ_{j: T^j(1) ≥ p} w_j.
    pub fn density_extremes(&self) -> (FieldElement, FieldElement) {
        let base = &self.base;
        let field = base.field();
        let count = base.s_preperiod().len() + base.s_period().len();
        let mut pts: Vec<FieldElement> = (0..count).map(|j| base.t_of_one(j)).collect();
        pts.sort_by(|a, b| a.cmp_exact(b));
        let mut lo: Option<FieldElement> = None;
        let mut hi: Option<FieldElement> = None;
        for p in &pts {
            let mut v = field.zero();
            for j in 0..count {
                if base.t_of_one(j).cmp_exact(p).is_ge() {
                    v = v.add(&self.weights[j]);
                }
            }
            let v = v.mul(&self.norm);
            lo = Some(match lo {
                None => v.clone(),
                Some(l) => if v.cmp_exact(&l).is_lt() { v.clone() } else { l },
            });
            hi = Some(match hi {
                None => v,
                Some(h) => if v.cmp_exact(&h).is_gt() { v } else { h },
            });
        }
        (lo.unwrap(), hi.unwrap())
    }
}

impl WordMeasure for ParryMeasure {
    fn field(&self) -> &FieldRef {
        self.base.field()
    }

    fn alphabet_size(&self) -> u8 {
        self.base.alphabet_size()
    }

    fn cylinder(&self, word: &[u8]) -> FieldElement {
        let field = self.base.field();
        if !self.base.dfa().accepts(word) {
            return field.zero();
        }
        let mut s = field.zero();
        for (j, w) in self.weights.iter().enumerate() {
            s = s.add(&w.mul(&self.orbit_overlap(word, j)));
        }
        s.mul(&self.norm)
    }
}

/// Parry cylinder mass through the density route.
pub fn parry_cylinder(parry: &ParryMeasure, sigma: &[u8]) -> Result<FieldElement, MeasureError> {
    if !parry.base.dfa().accepts(sigma) {
        return Err(MeasureError::NotAdmissible);
    }
    Ok(parry.cylinder(sigma))
}

// ---------------------------------------------------------------------------
// Parry measure: edge-Markov route
// ---------------------------------------------------------------------------

/// Max-entropy Markov measure on the edges of a presentation whose Perron
/// eigenvalue is β: right eigenvector r (Ar = βr) and left eigenvector l
/// (lA = βl) solved exactly, edge stationary mass π_e = l_{o(e)}·r_{d(e)}/β,
/// edge conditionals p_{e,e'} = r_{d(e')}/(β·r_{d(e)}).
pub struct EdgeParry {
    graph: LabeledGraph,
    field: FieldRef,
    beta: FieldElement,
    right: Vec<FieldElement>,
    left: Vec<FieldElement>,
}

impl EdgeParry {
    pub fn new(base: &BetaBase, graph: LabeledGraph) -> Self {
        let field = base.field().clone();
        let beta = base.beta().clone();
        let nn = graph.num_nodes();
        // adjacency counts
        let mut a = vec![vec![field.zero(); nn]; nn];
        for e in graph.edges() {
            a[e.origin][e.dest] = a[e.origin][e.dest].add(&field.one());
        }
        // (A − βI) r = 0
        let mut m = a.clone();
        for i in 0..nn {
            m[i][i] = m[i][i].sub(&beta);
        }
        let mut right = nullspace_vector(&m, &field);
        if right.iter().any(|x| x.sign() < 0) {
            right = right.iter().map(|x| x.neg()).collect();
        }
        assert!(
            right.iter().all(|x| x.sign() > 0),
            "Perron right eigenvector must be strictly positive"
        );
        // (Aᵀ − βI) l = 0
        let mut mt = vec![vec![field.zero(); nn]; nn];
        for i in 0..nn {
            for j in 0..nn {
                mt[i][j] = a[j][i].clone();
            }
            mt[i][i] = mt[i][i].sub(&beta);
        }
        let mut left = nullspace_vector(&mt, &field);
        if left.iter().any(|x| x.sign() < 0) {
            left = left.iter().map(|x| x.neg()).collect();
        }
        assert!(left.iter().all(|x| x.sign() > 0));
        // normalize l·r = 1
        let mut dot = field.zero();
        for i in 0..nn {
            dot = dot.add(&left[i].mul(&right[i]));
        }
        let inv = dot.inv().expect("positive inner product");
        let left = left.iter().map(|x| x.mul(&inv)).collect();
        EdgeParry { graph, field, beta, right, left }
    }

    pub fn graph(&self) -> &LabeledGraph {
        &self.graph
    }

    pub fn field(&self) -> &FieldRef {
        &self.field
    }

    /// Stationary mass of an edge.
    pub fn edge_mass(&self, e: usize) -> FieldElement {
        let edge = self.graph.edge(e);
        self.left[edge.origin]
            .mul(&self.right[edge.dest])
            .div(&self.beta)
            .expect("β ≠ 0")
    }

    /// Stationary probability of being at a node: l_v·r_v.
    pub fn node_mass(&self, v: usize) -> FieldElement {
        self.left[v].mul(&self.right[v])
    }

    /// Mass-transport factor along an edge: r_{d(e)}/(β·r_{o(e)}). Pushing a
    /// node-mass vector forward with these factors reproduces the label-word
    /// masses of [`EdgeParry::word_mass`] one letter at a time.
    pub fn edge_factor(&self, e: usize) -> FieldElement {
        let edge = self.graph.edge(e);
        self.right[edge.dest]
            .div(&self.beta.mul(&self.right[edge.origin]))
            .expect("positive eigenvector")
    }

    /// Conditional probability of following edge `e2` after edge ending at
    /// its origin.
    pub fn edge_conditional(&self, e1: usize, e2: usize) -> FieldElement {
        let d1 = self.graph.edge(e1).dest;
        let o2 = self.graph.edge(e2).origin;
        if d1 != o2 {
            return self.field.zero();
        }
        self.right[self.graph.edge(e2).dest]
            .div(&self.beta.mul(&self.right[d1]))
            .expect("positive eigenvector")
    }

    /// Minimum positive conditional edge probability over the label fiber of
    /// a word (used to scale betting margins).
    pub fn min_conditional_over_fiber(&self, word: &[u8]) -> Option<FieldElement> {
        let mut best: Option<FieldElement> = None;
        for path in self.graph.label_fiber(word) {
            for pair in path.windows(2) {
                let p = self.edge_conditional(pair[0], pair[1]);
                if p.is_zero() {
                    continue;
                }
                best = Some(match best {
                    None => p,
                    Some(b) => {
                        if p.cmp_exact(&b).is_lt() {
                            p
                        } else {
                            b
                        }
                    }
                });
            }
        }
        best
    }

    /// Minimum positive edge conditional over the whole graph.
    pub fn min_conditional(&self) -> FieldElement {
        let mut best: Option<FieldElement> = None;
        for e1 in 0..self.graph.num_edges() {
            for e2 in 0..self.graph.num_edges() {
                let p = self.edge_conditional(e1, e2);
                if p.is_zero() {
                    continue;
                }
                best = Some(match best {
                    None => p,
                    Some(b) => {
                        if p.cmp_exact(&b).is_lt() {
                            p
                        } else {
                            b
                        }
                    }
                });
            }
        }
        best.expect("graph has consecutive edges")
    }

    /// Push-forward mass of a letter word: sum of the edge-Markov measure
    /// over all edge paths carrying the word's labels.
    pub fn word_mass(&self, word: &[u8]) -> FieldElement {
        if word.is_empty() {
            return self.field.one();
        }
        // DP over (current edge) with exact values
        let ne = self.graph.num_edges();
        let mut cur = vec![self.field.zero(); ne];
        for e in 0..ne {
            if self.graph.edge(e).label == word[0] {
                cur[e] = self.edge_mass(e);
            }
        }
        for &a in &word[1..] {
            let mut next = vec![self.field.zero(); ne];
            for e in 0..ne {
                if cur[e].is_zero() {
                    continue;
                }
                for &f in self.graph.out_edges(self.graph.edge(e).dest) {
                    if self.graph.edge(f).label == a {
                        next[f] = next[f].add(&cur[e].mul(&self.edge_conditional(e, f)));
                    }
                }
            }
            cur = next;
        }
        let mut s = self.field.zero();
        for v in cur {
            s = s.add(&v);
        }
        s
    }
}

/// The edge chain as a 1-step Markov measure over the edge alphabet
/// (contexts are single edges, initial distribution is the stationary edge
/// mass).
pub fn edge_markov(edge: &EdgeParry) -> MarkovMeasure {
    let graph = edge.graph();
    let ne = graph.num_edges();
    assert!(ne <= u8::MAX as usize, "edge alphabet must fit in a byte");
    let field = edge.field().clone();
    let blocks: Vec<Vec<u8>> = (0..ne).map(|e| vec![e as u8]).collect();
    let initial: Vec<FieldElement> = (0..ne).map(|e| edge.edge_mass(e)).collect();
    let trans: Vec<Vec<FieldElement>> = (0..ne)
        .map(|e| (0..ne).map(|f| edge.edge_conditional(e, f)).collect())
        .collect();
    MarkovMeasure::new(field, ne as u8, 1, blocks, initial, trans)
}

/// Parry cylinder mass through the presentation's edge chain; must agree
/// exactly with [`parry_cylinder`].
pub fn parry_via_edges(base: &BetaBase, sigma: &[u8]) -> Result<FieldElement, MeasureError> {
    if !base.dfa().accepts(sigma) {
        return Err(MeasureError::NotAdmissible);
    }
    let graph = crate::automaton::presentation(base);
    let edge = EdgeParry::new(base, graph);
    Ok(edge.word_mass(sigma))
}

/// Express the Parry measure as a k-step Markov measure when the acceptor
/// state is a function of the last k digits (always true with
/// k = preperiod+period for these acceptors after the start-up phase is
/// quotiented away — verified here, `NotSupported` otherwise).
pub fn parry_markov(base: &BaseRef, k: usize) -> Result<MarkovMeasure, MeasureError> {
    let dfa = base.dfa();
    // verify: all admissible length-k contexts determine the acceptor state
    // regardless of the state they are read from
    let mut ctx_state: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut frontier: Vec<(Vec<u8>, usize)> =
        (0..dfa.num_states()).map(|q| (Vec::new(), q)).collect();
    for _ in 0..k {
        let mut next = Vec::new();
        for (w, q) in frontier {
            for a in dfa.allowed(q) {
                let mut w2 = w.clone();
                w2.push(a);
                next.push((w2, dfa.step(q, a).unwrap()));
            }
        }
        frontier = next;
    }
    for (w, q) in frontier {
        if *ctx_state.entry(w).or_insert(q) != q {
            return Err(MeasureError::NotSupported);
        }
    }
    let parry = ParryMeasure::new(base.clone());
    let field = base.field().clone();
    MarkovMeasure::from_conditionals(field, base.alphabet_size(), k, |ctx, a| {
        if !dfa.accepts(ctx) {
            return base.field().zero();
        }
        parry.conditional(ctx, a)
    })
}

// ---------------------------------------------------------------------------
// occurrence statistics
// ---------------------------------------------------------------------------

/// Overlapping occurrence count of τ in σ.
pub fn occ(tau: &[u8], sigma: &[u8]) -> usize {
    if tau.is_empty() || tau.len() > sigma.len() {
        return if tau.is_empty() { sigma.len() + 1 } else { 0 };
    }
    sigma.windows(tau.len()).filter(|w| *w == tau).count()
}

/// Block frequencies of a prefix with deviations against a measure.
pub struct FrequencyProfile {
    pub n: usize,
    pub k: usize,
    pub rows: Vec<FrequencyRow>,
    pub max_deviation: f64,
}

pub struct FrequencyRow {
    pub word: Vec<u8>,
    pub count: usize,
    pub ratio: f64,
    pub expected: f64,
    pub deviation: f64,
}

fn word_string(w: &[u8]) -> String {
    w.iter().map(|d| char::from_digit(*d as u32, 36).unwrap()).collect()
}

/// Tabulate occ(τ, s↾N)/N for all τ of length ≤ k against the measure's
/// cylinder values.
pub fn freq_profile(s: &[u8], k: usize, measure: &dyn WordMeasure) -> FrequencyProfile {
    let n = s.len();
    let alphabet = measure.alphabet_size();
    let mut words: Vec<Vec<u8>> = vec![Vec::new()];
    let mut rows = Vec::new();
    let mut max_dev: f64 = 0.0;
    for _ in 0..k {
        let mut next = Vec::new();
        for w in &words {
            for a in 0..alphabet {
                let mut w2 = w.clone();
                w2.push(a);
                next.push(w2);
            }
        }
        for w in &next {
            let count = occ(w, s);
            let ratio = count as f64 / n as f64;
            let expected = measure.cylinder(w).to_f64();
            let deviation = (ratio - expected).abs();
            max_dev = max_dev.max(deviation);
            rows.push(FrequencyRow { word: w.clone(), count, ratio, expected, deviation });
        }
        words = next;
    }
    FrequencyProfile { n, k, rows, max_deviation: max_dev }
}

impl FrequencyProfile {
    /// JSON deviation report.
    pub fn to_json(&self, base_label: &str) -> serde_json::Value {
        serde_json::json!({
            "base": base_label,
            "N": self.n,
            "k": self.k,
            "blocks": self.rows.iter().map(|r| serde_json::json!({
                "word": word_string(&r.word),
                "count": r.count,
                "ratio": r.ratio,
                "expected": r.expected,
                "deviation": r.deviation,
            })).collect::<Vec<_>>(),
            "max_deviation": self.max_deviation,
        })
    }
}

// ---------------------------------------------------------------------------
// symbol × state chain and growth exponent
// ---------------------------------------------------------------------------

/// The product chain on pairs (symbol read, automaton state it was read in),
/// restricted to an ergodic class of the automaton, with exact stationary
/// masses.
pub struct SymbolStateChain {
    pub states: Vec<(u8, usize)>,
    pub transition: Vec<Vec<FieldElement>>,
    pub stationary: Vec<FieldElement>,
    field: FieldRef,
}

/// Build the chain for a 1-step measure `m` over an ergodic class of `dfa`:
/// state (a, q) means digit a is read while the automaton sits in q; the
/// successor is (a', δ(q,a)) with probability P(a'|a).
pub fn symbol_state_chain(
    dfa: &Dfa,
    class: &[usize],
    m: &MarkovMeasure,
) -> Result<SymbolStateChain, MeasureError> {
    if m.order() != 1 {
        return Err(MeasureError::NotSupported);
    }
    let in_class = |q: usize| class.contains(&q);
    if class.iter().any(|&q| !dfa.is_accepting(q)) {
        return Err(MeasureError::NotErgodicClass);
    }
    // the class must be closed under transitions on supported digits
    for &q in class {
        for a in dfa.allowed(q) {
            if !in_class(dfa.step(q, a).unwrap()) {
                return Err(MeasureError::NotErgodicClass);
            }
        }
    }
    let field = m.field().clone();
    let mut states: Vec<(u8, usize)> = Vec::new();
    for &q in class {
        for a in dfa.allowed(q) {
            if !m.digit_conditional_support(a) {
                continue;
            }
            states.push((a, q));
        }
    }
    // the measure must put mass on every digit the language allows here
    for &q in class {
        for a in dfa.allowed(q) {
            if !m.digit_conditional_support(a) {
                return Err(MeasureError::NotSupported);
            }
        }
    }
    let ns = states.len();
    let mut p = vec![vec![field.zero(); ns]; ns];
    for (i, &(a, q)) in states.iter().enumerate() {
        let succ_state = dfa.step(q, a).expect("allowed digit");
        for (j, &(a2, q2)) in states.iter().enumerate() {
            if q2 != succ_state {
                continue;
            }
            if dfa.step(q2, a2).is_none() {
                continue;
            }
            p[i][j] = m.digit_conditional(&[a], a2);
        }
    }
    // stationary via nullspace of (Pᵀ − I), as in MarkovMeasure::stationary
    let mut mm = vec![vec![field.zero(); ns]; ns];
    for i in 0..ns {
        for j in 0..ns {
            mm[i][j] = p[j][i].clone();
        }
        mm[i][i] = mm[i][i].sub(&field.one());
    }
    let v = nullspace_vector(&mm, &field);
    let mut total = field.zero();
    for x in &v {
        total = total.add(x);
    }
    let inv = total.inv().expect("nonzero mass");
    let mut pi: Vec<FieldElement> = v.iter().map(|x| x.mul(&inv)).collect();
    if pi.iter().any(|x| x.sign() < 0) {
        pi = pi.iter().map(|x| x.neg()).collect();
    }
    Ok(SymbolStateChain { states, transition: p, stationary: pi, field })
}

impl MarkovMeasure {
    /// Whether some context gives the digit positive conditional mass
    /// (1-step helper used by the product chain).
    fn digit_conditional_support(&self, a: u8) -> bool {
        self.trans.iter().any(|row| !row[a as usize].is_zero())
    }
}

impl SymbolStateChain {
    /// Logarithmic growth exponent Σ κ_{(a,q)}·log₂ b(q,a) of a betting
    /// table along the chain. Exactly zero when every betting factor with
    /// positive stationary mass is 1; otherwise evaluated in floating point.
    pub fn growth_exponent(&self, betting: impl Fn(usize, u8) -> FieldElement) -> f64 {
        let one = self.field.one();
        let mut all_one = true;
        let mut sum = 0.0f64;
        for (i, &(a, q)) in self.states.iter().enumerate() {
            if self.stationary[i].is_zero() {
                continue;
            }
            let b = betting(q, a);
            if !b.cmp_exact(&one).is_eq() {
                all_one = false;
            }
            assert!(b.sign() > 0, "betting factors on supported moves must be positive");
            sum += self.stationary[i].to_f64() * b.to_f64().log2();
        }
        if all_one {
            0.0
        } else {
            sum
        }
    }
}
