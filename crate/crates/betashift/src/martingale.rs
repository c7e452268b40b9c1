//! Betting strategies generated by finite automata: exact capital
//! evaluation, fairness checking against a measure, constructive strategies
//! that succeed on frequency-deviant sequences (single-measure and sofic
//! variants), the savings transform, and supermartingale repair.

use crate::algebraic::{FieldElement, FieldRef, Rat};
use crate::automaton::{Dfa, LabeledGraph};
use crate::beta::BaseRef;
use crate::measures::{EdgeParry, MarkovMeasure, WordMeasure};
use num::{BigInt, One, Signed, Zero};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MartingaleError {
    #[error("delta out of the admissible range")]
    BadDelta,
    #[error("conditional probability is zero (or one) where a bet is placed")]
    ZeroConditional,
    #[error("delta* must lie in [0, 1)")]
    BadDeltaStar,
    #[error("word does not synchronize the presentation")]
    NotSynchronizing,
    #[error("input is not a supermartingale (negative slack)")]
    NegativeSlack,
    #[error("word is outside the strategy's domain")]
    NotAdmissible,
    #[error("operation not supported for this input")]
    NotSupported,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Martingale,
    Supermartingale,
}

/// Exact capital function on finite words.
pub trait Martingale {
    fn field(&self) -> &FieldRef;
    fn initial(&self) -> FieldElement;
    fn capital(&self, word: &[u8]) -> Result<FieldElement, MartingaleError>;
    /// Incremental evaluator: O(1)-ish capital per digit along a path.
    fn cursor(&self) -> Box<dyn MartCursor + '_>;
}

/// Walks a word digit by digit, exposing the capital at the current word and
/// at its one-digit extensions.
pub trait MartCursor {
    fn advance(&mut self, digit: u8) -> Result<(), MartingaleError>;
    fn capital(&self) -> FieldElement;
    fn child_capital(&self, digit: u8) -> Result<FieldElement, MartingaleError>;
}

// ---------------------------------------------------------------------------
// DFA-generated martingales
// ---------------------------------------------------------------------------

/// Capital evolves by per-state betting factors: reading digit a in state q
/// multiplies the capital by `betting[q][a]` and moves along the automaton.
#[derive(Clone)]
pub struct DfaMartingale {
    dfa: Dfa,
    betting: Vec<Vec<FieldElement>>,
    initial: FieldElement,
    kind: Kind,
    field: FieldRef,
}

impl DfaMartingale {
    pub fn new(
        field: FieldRef,
        dfa: Dfa,
        betting: Vec<Vec<FieldElement>>,
        initial: FieldElement,
        kind: Kind,
    ) -> Self {
        assert_eq!(betting.len(), dfa.num_states());
        for (q, row) in betting.iter().enumerate() {
            assert_eq!(row.len(), dfa.alphabet_size() as usize);
            for (a, b) in row.iter().enumerate() {
                if dfa.step(q, a as u8).is_some() {
                    assert!(b.sign() >= 0, "betting factors must be nonnegative");
                }
            }
        }
        DfaMartingale { dfa, betting, initial, kind, field }
    }

    /// Constant strategy (factor 1 everywhere) on an automaton.
    pub fn constant(field: FieldRef, dfa: Dfa) -> Self {
        let betting = vec![vec![field.one(); dfa.alphabet_size() as usize]; dfa.num_states()];
        let one = field.one();
        Self::new(field, dfa, betting, one, Kind::Martingale)
    }

    pub fn dfa(&self) -> &Dfa {
        &self.dfa
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn betting_factor(&self, state: usize, digit: u8) -> &FieldElement {
        &self.betting[state][digit as usize]
    }

    /// Distinct betting factors over pairs (q, a) with a transition.
    pub fn betting_factor_set(&self) -> Vec<FieldElement> {
        let mut out: Vec<FieldElement> = Vec::new();
        for q in 0..self.dfa.num_states() {
            for a in 0..self.dfa.alphabet_size() {
                if self.dfa.step(q, a).is_none() {
                    continue;
                }
                let b = &self.betting[q][a as usize];
                if !out.iter().any(|x| x.cmp_exact(b).is_eq()) {
                    out.push(b.clone());
                }
            }
        }
        out
    }

    pub fn evaluate(&self, word: &[u8]) -> Result<FieldElement, MartingaleError> {
        let mut state = self.dfa.start();
        let mut capital = self.initial.clone();
        for &a in word {
            capital = capital.mul(&self.betting[state][a as usize]);
            state = self.dfa.step(state, a).ok_or(MartingaleError::NotAdmissible)?;
        }
        Ok(capital)
    }

    /// Stream a long sequence, recording log₂ capital at the checkpoints.
    /// The capital is kept in factored form: an occurrence count per distinct
    /// betting factor, so the log is exact up to a final floating dot
    /// product.
    pub fn run(&self, stream: &[u8], checkpoints: &[usize]) -> Result<Trajectory, MartingaleError> {
        // map (state, digit) → distinct-factor id
        let mut factors: Vec<FieldElement> = Vec::new();
        let mut id = vec![vec![usize::MAX; self.dfa.alphabet_size() as usize]; self.dfa.num_states()];
        for q in 0..self.dfa.num_states() {
            for a in 0..self.dfa.alphabet_size() {
                let b = &self.betting[q][a as usize];
                let existing = factors.iter().position(|x| x.cmp_exact(b).is_eq());
                id[q][a as usize] = match existing {
                    Some(i) => i,
                    None => {
                        factors.push(b.clone());
                        factors.len() - 1
                    }
                };
            }
        }
        let logs: Vec<f64> = factors.iter().map(|f| f.to_f64().log2()).collect();
        let init_log = self.initial.to_f64().log2();
        let mut counts = vec![0u64; factors.len()];
        let mut state = self.dfa.start();
        let mut cps: Vec<usize> = checkpoints.to_vec();
        cps.sort_unstable();
        cps.dedup();
        let mut next_cp = 0usize;
        let mut points = Vec::new();
        let mut record = |n: usize, counts: &[u64]| {
            let log2: f64 =
                init_log + counts.iter().zip(&logs).map(|(&c, &l)| c as f64 * l).sum::<f64>();
            points.push(TrajectoryPoint { n, capital_log2: log2, rate: if n > 0 { log2 / n as f64 } else { 0.0 } });
        };
        while next_cp < cps.len() && cps[next_cp] == 0 {
            record(0, &counts);
            next_cp += 1;
        }
        for (i, &a) in stream.iter().enumerate() {
            counts[id[state][a as usize]] += 1;
            state = self.dfa.step(state, a).ok_or(MartingaleError::NotAdmissible)?;
            while next_cp < cps.len() && cps[next_cp] == i + 1 {
                record(i + 1, &counts);
                next_cp += 1;
            }
        }
        Ok(Trajectory { points })
    }
}

impl Martingale for DfaMartingale {
    fn field(&self) -> &FieldRef {
        &self.field
    }

    fn initial(&self) -> FieldElement {
        self.initial.clone()
    }

    fn capital(&self, word: &[u8]) -> Result<FieldElement, MartingaleError> {
        self.evaluate(word)
    }

    fn cursor(&self) -> Box<dyn MartCursor + '_> {
        Box::new(DfaCursor { m: self, state: self.dfa.start(), cap: self.initial.clone() })
    }
}

struct DfaCursor<'a> {
    m: &'a DfaMartingale,
    state: usize,
    cap: FieldElement,
}

impl MartCursor for DfaCursor<'_> {
    fn advance(&mut self, digit: u8) -> Result<(), MartingaleError> {
        self.cap = self.cap.mul(self.m.betting_factor(self.state, digit));
        self.state = self
            .m
            .dfa
            .step(self.state, digit)
            .ok_or(MartingaleError::NotAdmissible)?;
        Ok(())
    }

    fn capital(&self) -> FieldElement {
        self.cap.clone()
    }

    fn child_capital(&self, digit: u8) -> Result<FieldElement, MartingaleError> {
        if self.m.dfa.step(self.state, digit).is_none() {
            return Err(MartingaleError::NotAdmissible);
        }
        Ok(self.cap.mul(self.m.betting_factor(self.state, digit)))
    }
}

/// Capital log at geometric checkpoints.
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

#[derive(Clone, Copy, Debug)]
pub struct TrajectoryPoint {
    pub n: usize,
    pub capital_log2: f64,
    pub rate: f64,
}

impl Trajectory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,capital_log2,rate\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.n, p.capital_log2, p.rate));
        }
        out
    }
}

/// Geometric checkpoint schedule N = ⌈1.5^j⌉ up to `max_n`, deduplicated.
pub fn checkpoint_schedule(max_n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut x = 1.0f64;
    loop {
        let n = x.ceil() as usize;
        if n > max_n {
            break;
        }
        if out.last() != Some(&n) {
            out.push(n);
        }
        x *= 1.5;
    }
    out
}

// ---------------------------------------------------------------------------
// fairness checking
// ---------------------------------------------------------------------------

pub struct FairnessReport {
    pub words_checked: usize,
    /// exact equality Σ P(σa|σ)·f(σa) = f(σ) on every supported word
    pub is_martingale: bool,
    /// exact inequality Σ ≤ f(σ)
    pub is_supermartingale: bool,
    pub first_violation: Option<Vec<u8>>,
}

/// Verify the fairness (in)equality exactly at every measure-supported word
/// up to `depth`.
pub fn check_fairness(
    mart: &dyn Martingale,
    measure: &dyn WordMeasure,
    depth: usize,
) -> FairnessReport {
    let field = measure.field();
    let mut report = FairnessReport {
        words_checked: 0,
        is_martingale: true,
        is_supermartingale: true,
        first_violation: None,
    };
    let mut frontier: Vec<Vec<u8>> = vec![Vec::new()];
    for _ in 0..depth {
        let mut next_frontier = Vec::new();
        for w in frontier {
            let f_here = match mart.capital(&w) {
                Ok(v) => v,
                Err(_) => {
                    report.is_martingale = false;
                    report.is_supermartingale = false;
                    report.first_violation.get_or_insert(w.clone());
                    continue;
                }
            };
            let mut sum = field.zero();
            let mut children = Vec::new();
            for a in 0..measure.alphabet_size() {
                let p = measure.conditional(&w, a);
                if p.is_zero() {
                    continue;
                }
                let mut wa = w.clone();
                wa.push(a);
                match mart.capital(&wa) {
                    Ok(v) => sum = sum.add(&p.mul(&v)),
                    Err(_) => {
                        report.is_martingale = false;
                        report.is_supermartingale = false;
                        report.first_violation.get_or_insert(wa.clone());
                        continue;
                    }
                }
                children.push(wa);
            }
            report.words_checked += 1;
            match sum.cmp_exact(&f_here) {
                std::cmp::Ordering::Equal => {}
                std::cmp::Ordering::Less => {
                    if report.is_martingale {
                        report.is_martingale = false;
                        report.first_violation.get_or_insert(w.clone());
                    }
                }
                std::cmp::Ordering::Greater => {
                    report.is_martingale = false;
                    report.is_supermartingale = false;
                    report.first_violation.get_or_insert(w.clone());
                }
            }
            next_frontier.extend(children);
        }
        frontier = next_frontier;
    }
    report
}

// ---------------------------------------------------------------------------
// Case I: betting on a single deviant digit after a fixed word
// ---------------------------------------------------------------------------

fn rat_one() -> Rat {
    Rat::one()
}

/// Suffix-tracking automaton of σ over a full alphabet: state q = length of
/// the longest suffix of the input that is a prefix of σ.
fn suffix_automaton(sigma: &[u8], alphabet: u8) -> Dfa {
    let l = sigma.len();
    // failure links
    let mut fail = vec![0usize; l + 1];
    for i in 1..l {
        let mut f = fail[i];
        while f > 0 && sigma[i] != sigma[f] {
            f = fail[f];
        }
        fail[i + 1] = if sigma[i] == sigma[f] { f + 1 } else { 0 };
    }
    let mut transitions = vec![vec![None; alphabet as usize]; l + 1];
    for q in 0..=l {
        for a in 0..alphabet {
            let mut s = q;
            // a full match falls back before extending
            if s == l {
                s = fail[l];
            }
            while s > 0 && sigma[s] != a {
                s = fail[s];
            }
            let t = if s < l && sigma[s] == a { s + 1 } else { 0 };
            transitions[q][a as usize] = Some(t);
        }
    }
    Dfa::new_accepting(alphabet, transitions, 0)
}

/// Strategy that profits when digit b follows σ more often than the measure
/// predicts: factor (1+δ) on b right after σ, (1 − δp*/(1−p*)) on the other
/// digits there (p* = P(σb|σ)), 1 everywhere else.
pub fn construct_case1(
    p: &MarkovMeasure,
    sigma: &[u8],
    b: u8,
    delta: Rat,
) -> Result<DfaMartingale, MartingaleError> {
    if sigma.len() < p.order() {
        return Err(MartingaleError::NotSupported);
    }
    if p.cylinder(sigma).is_zero() {
        return Err(MartingaleError::ZeroConditional);
    }
    let field = p.field().clone();
    let p_star = p.conditional(sigma, b);
    let p_star_rat = p_star.clone();
    if p_star_rat.is_zero() {
        return Err(MartingaleError::ZeroConditional);
    }
    let one = field.one();
    if p_star_rat.cmp_exact(&one).is_ge() {
        return Err(MartingaleError::ZeroConditional);
    }
    // 0 < δ < (1−p*)/p*
    if delta.is_negative() || delta.is_zero() {
        return Err(MartingaleError::BadDelta);
    }
    let delta_el = field.from_rat(delta);
    let bound = one.sub(&p_star).div(&p_star).expect("p* > 0");
    if delta_el.cmp_exact(&bound).is_ge() {
        return Err(MartingaleError::BadDelta);
    }
    let dfa = suffix_automaton(sigma, p.alphabet_size());
    let match_state = sigma.len();
    // 1 − δp*/(1−p*)
    let off = one.sub(
        &delta_el
            .mul(&p_star)
            .div(&one.sub(&p_star))
            .expect("p* < 1"),
    );
    let on = one.add(&delta_el);
    let mut betting = vec![vec![field.one(); p.alphabet_size() as usize]; dfa.num_states()];
    for a in 0..p.alphabet_size() {
        betting[match_state][a as usize] = if a == b { on.clone() } else { off.clone() };
    }
    Ok(DfaMartingale::new(field, dfa, betting, one, Kind::Martingale))
}

// ---------------------------------------------------------------------------
// Case II: betting against a block successor, lifted to single digits
// ---------------------------------------------------------------------------

/// Strategy over length-k blocks that profits when block ρ follows block σ
/// less often than predicted: on the block alphabet the factors are (1+δ)
/// for non-ρ successors of σ and (1 − δp*/(1−p*)) for ρ, with
/// p* = 1 − P(σρ|σ); within a block the betting interpolates by conditional
/// expectation, which keeps the lift exactly fair.
pub fn construct_case2(
    p: &MarkovMeasure,
    sigma: &[u8],
    rho: &[u8],
    delta: Rat,
) -> Result<DfaMartingale, MartingaleError> {
    let k = p.order();
    if k == 0 || sigma.len() != k || rho.len() != k {
        return Err(MartingaleError::NotSupported);
    }
    let field = p.field().clone();
    let one = field.one();
    // P(ρ | prev block σ): product of digit conditionals along ρ
    let block_conditional = |prev: &[u8], tau: &[u8]| -> FieldElement {
        let mut ctx: Vec<u8> = prev.to_vec();
        let mut prob = field.one();
        for &a in tau {
            let cond = if ctx.len() >= k {
                p.digit_conditional(&ctx[ctx.len() - k..], a)
            } else {
                p.conditional(&ctx, a)
            };
            prob = prob.mul(&cond);
            ctx.push(a);
        }
        prob
    };
    let p_rho = block_conditional(sigma, rho);
    if p_rho.is_zero() {
        return Err(MartingaleError::ZeroConditional);
    }
    if p_rho.cmp_exact(&one).is_ge() {
        return Err(MartingaleError::ZeroConditional);
    }
    let p_star = one.sub(&p_rho);
    if delta.is_negative() || delta.is_zero() {
        return Err(MartingaleError::BadDelta);
    }
    let delta_el = field.from_rat(delta);
    let bound = one.sub(&p_star).div(&p_star).expect("p* > 0");
    if delta_el.cmp_exact(&bound).is_ge() {
        return Err(MartingaleError::BadDelta);
    }
    let on = one.add(&delta_el);
    let off = one.sub(&delta_el.mul(&p_star).div(&one.sub(&p_star)).expect("p* < 1"));
    // block factor given the previous block and the completed block
    let block_factor = |prev: Option<&[u8]>, tau: &[u8]| -> FieldElement {
        match prev {
            Some(pb) if pb == sigma => {
                if tau == rho {
                    off.clone()
                } else {
                    on.clone()
                }
            }
            _ => field.one(),
        }
    };
    // g(prev, γ) = E[block factor | partial γ]; betting = g(γa)/g(γ)
    let g = |prev: Option<&[u8]>, gamma: &[u8]| -> FieldElement {
        // enumerate completions τ ⊇ γ with positive conditional mass
        fn rec(
            p: &MarkovMeasure,
            k: usize,
            field: &FieldRef,
            prev: Option<&[u8]>,
            ctx: &mut Vec<u8>,
            depth_left: usize,
            tau: &mut Vec<u8>,
            factor: &dyn Fn(Option<&[u8]>, &[u8]) -> FieldElement,
        ) -> FieldElement {
            if depth_left == 0 {
                return factor(prev, tau);
            }
            let mut sum = field.zero();
            for a in 0..p.alphabet_size() {
                let cond = if ctx.len() >= k {
                    p.digit_conditional(&ctx[ctx.len() - k..], a)
                } else {
                    p.conditional(ctx, a)
                };
                if cond.is_zero() {
                    continue;
                }
                ctx.push(a);
                tau.push(a);
                let sub = rec(p, k, field, prev, ctx, depth_left - 1, tau, factor);
                sum = sum.add(&cond.mul(&sub));
                ctx.pop();
                tau.pop();
            }
            sum
        }
        let mut ctx: Vec<u8> = match prev {
            Some(pb) => {
                let mut c = pb.to_vec();
                c.extend_from_slice(gamma);
                c
            }
            None => gamma.to_vec(),
        };
        let mut tau = gamma.to_vec();
        rec(p, k, &field, prev, &mut ctx, k - gamma.len(), &mut tau, &block_factor)
    };
    // enumerate reachable states (prev block option, partial γ)
    type State = (Option<Vec<u8>>, Vec<u8>);
    let mut states: Vec<State> = Vec::new();
    let mut index: HashMap<State, usize> = HashMap::new();
    let start: State = (None, Vec::new());
    index.insert(start.clone(), 0);
    states.push(start);
    let mut queue = vec![0usize];
    let mut transitions: Vec<Vec<Option<usize>>> = Vec::new();
    let mut betting: Vec<Vec<FieldElement>> = Vec::new();
    while let Some(qi) = queue.pop() {
        while transitions.len() <= qi {
            transitions.push(vec![None; p.alphabet_size() as usize]);
            betting.push(vec![field.one(); p.alphabet_size() as usize]);
        }
        let (prev, gamma) = states[qi].clone();
        let g_here = g(prev.as_deref(), &gamma);
        for a in 0..p.alphabet_size() {
            let mut ga = gamma.clone();
            ga.push(a);
            // conditional positivity: digit must be extendable in the measure
            let cond = {
                let ctx: Vec<u8> = match &prev {
                    Some(pb) => {
                        let mut c = pb.clone();
                        c.extend_from_slice(&gamma);
                        c
                    }
                    None => gamma.clone(),
                };
                if ctx.len() >= k {
                    p.digit_conditional(&ctx[ctx.len() - k..], a)
                } else {
                    p.conditional(&ctx, a)
                }
            };
            if cond.is_zero() {
                continue;
            }
            let g_next = g(prev.as_deref(), &ga);
            if g_next.is_zero() {
                continue;
            }
            betting[qi][a as usize] = g_next.div(&g_here).expect("positive expectation");
            let next_state: State = if ga.len() == k {
                (Some(ga), Vec::new())
            } else {
                (prev.clone(), ga)
            };
            let ni = match index.get(&next_state) {
                Some(&i) => i,
                None => {
                    let i = states.len();
                    index.insert(next_state.clone(), i);
                    states.push(next_state);
                    queue.push(i);
                    i
                }
            };
            transitions[qi][a as usize] = Some(ni);
        }
    }
    while transitions.len() < states.len() {
        transitions.push(vec![None; p.alphabet_size() as usize]);
        betting.push(vec![field.one(); p.alphabet_size() as usize]);
    }
    let dfa = Dfa::new_accepting(p.alphabet_size(), transitions, 0);
    Ok(DfaMartingale::new(field.clone(), dfa, betting, field.one(), Kind::Martingale))
}

// ---------------------------------------------------------------------------
// deviant-block detection
// ---------------------------------------------------------------------------

pub struct DeviantBlock {
    pub sigma: Vec<u8>,
    pub digit: u8,
    pub ratio: f64,
    pub expected: f64,
}

/// Scan blocks σ of length 1..=k and report the digit extension whose
/// occurrence ratio exceeds (1+δ)·P(σb|σ) with the largest relative excess,
/// at this finite prefix. A None on a short prefix is inconclusive.
pub fn detect_deviant_block(
    s: &[u8],
    measure: &dyn WordMeasure,
    k: usize,
    delta: f64,
) -> Option<DeviantBlock> {
    use crate::measures::occ;
    let mut best: Option<DeviantBlock> = None;
    let mut words: Vec<Vec<u8>> = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for w in &words {
            for a in 0..measure.alphabet_size() {
                let mut w2 = w.clone();
                w2.push(a);
                next.push(w2);
            }
        }
        for sigma in &next {
            let denom = occ(sigma, s);
            if denom == 0 {
                continue;
            }
            for b in 0..measure.alphabet_size() {
                let expected = measure.conditional(sigma, b).to_f64();
                if expected <= 0.0 {
                    continue;
                }
                let mut sb = sigma.clone();
                sb.push(b);
                let ratio = occ(&sb, s) as f64 / denom as f64;
                if ratio > (1.0 + delta) * expected {
                    let excess = ratio / expected;
                    let better = match &best {
                        None => true,
                        Some(d) => excess > d.ratio / d.expected,
                    };
                    if better {
                        best = Some(DeviantBlock {
                            sigma: sigma.clone(),
                            digit: b,
                            ratio,
                            expected,
                        });
                    }
                }
            }
        }
        words = next;
    }
    best
}

// ---------------------------------------------------------------------------
// sofic constructions
// ---------------------------------------------------------------------------

/// Verify that a word sends every node of the presentation (where defined)
/// to one common node, and return it.
pub fn synchronizes_to(graph: &LabeledGraph, word: &[u8]) -> Option<usize> {
    let mut dest = None;
    let mut any = false;
    for node in 0..graph.num_nodes() {
        if let Some(d) = graph.follow_word(node, word) {
            any = true;
            match dest {
                None => dest = Some(d),
                Some(x) if x != d => return None,
                _ => {}
            }
        }
    }
    if any {
        dest
    } else {
        None
    }
}

/// Lift a strategy over the presentation's edges to letters: wait (betting 1)
/// until the synchronizing word ρ has been read — the matcher falls back to
/// progress 1 or 0 on a mismatch — then track the unique edge path and apply
/// the edge strategy's factors.
pub fn construct_sofic_sync(
    base: &BaseRef,
    graph: &LabeledGraph,
    edge_mart: &DfaMartingale,
    rho: &[u8],
) -> Result<DfaMartingale, MartingaleError> {
    let node0 = synchronizes_to(graph, rho).ok_or(MartingaleError::NotSynchronizing)?;
    if rho.is_empty() {
        return Err(MartingaleError::NotSynchronizing);
    }
    let field = edge_mart.field().clone();
    let beta_dfa = base.dfa();
    let alphabet = base.alphabet_size();
    let l = rho.len();
    // state encoding: Pre(progress, beta_state) then Prod(edge_state, node)
    let pre_count = l * beta_dfa.num_states();
    let prod_count = edge_mart.dfa().num_states() * graph.num_nodes();
    let total = pre_count + prod_count;
    let pre_idx = |prog: usize, q: usize| prog * beta_dfa.num_states() + q;
    let prod_idx =
        |eq: usize, node: usize| pre_count + eq * graph.num_nodes() + node;
    let mut transitions = vec![vec![None; alphabet as usize]; total];
    let mut betting = vec![vec![field.one(); alphabet as usize]; total];
    for prog in 0..l {
        for q in 0..beta_dfa.num_states() {
            for a in 0..alphabet {
                let Some(q2) = beta_dfa.step(q, a) else { continue };
                let next_prog = if a == rho[prog] {
                    prog + 1
                } else if a == rho[0] {
                    1
                } else {
                    0
                };
                let t = if next_prog == l {
                    prod_idx(edge_mart.dfa().start(), node0)
                } else {
                    pre_idx(next_prog, q2)
                };
                transitions[pre_idx(prog, q)][a as usize] = Some(t);
            }
        }
    }
    for eq in 0..edge_mart.dfa().num_states() {
        for node in 0..graph.num_nodes() {
            for a in 0..alphabet {
                let Some(e) = graph.follow(node, a) else { continue };
                let Some(eq2) = edge_mart.dfa().step(eq, e as u8) else { continue };
                let i = prod_idx(eq, node);
                transitions[i][a as usize] = Some(prod_idx(eq2, graph.edge(e).dest));
                betting[i][a as usize] = edge_mart.betting_factor(eq, e as u8).clone();
            }
        }
    }
    let dfa = Dfa::new_accepting(alphabet, transitions, pre_idx(0, beta_dfa.start()));
    Ok(DfaMartingale::new(
        field,
        dfa,
        betting,
        edge_mart.initial(),
        edge_mart.kind(),
    ))
}

/// Supermartingale that hedges against a synchronizing word never completing:
/// whenever the current word ends with w = α↾N_α, bet (1+δ) on every digit
/// other than c = α_{N_α+1} and (1−δ*) on c, with δ = δ*·K for K the minimum
/// positive edge conditional into a c-labeled edge. N_α (the longest prefix
/// of α assumed to keep recurring) is caller-supplied.
pub fn construct_sofic_nosync(
    base: &BaseRef,
    graph: &LabeledGraph,
    alpha: &[u8],
    n_alpha: usize,
    delta_star: Rat,
) -> Result<DfaMartingale, MartingaleError> {
    if synchronizes_to(graph, alpha).is_none() {
        return Err(MartingaleError::NotSynchronizing);
    }
    if n_alpha >= alpha.len() {
        return Err(MartingaleError::NotSupported);
    }
    if delta_star.is_negative() || delta_star >= rat_one() {
        return Err(MartingaleError::BadDeltaStar);
    }
    let field = base.field().clone();
    let one = field.one();
    let w = &alpha[..n_alpha];
    let c = alpha[n_alpha];
    // K: minimum positive conditional of a c-labeled edge (after a
    // last-letter-of-w-labeled edge when w is nonempty)
    let edge = EdgeParry::new(base, graph.clone());
    let mut k_min: Option<FieldElement> = None;
    for e1 in 0..graph.num_edges() {
        if let Some(&b_last) = w.last() {
            if graph.edge(e1).label != b_last {
                continue;
            }
        }
        for e2 in 0..graph.num_edges() {
            if graph.edge(e2).label != c {
                continue;
            }
            let p = edge.edge_conditional(e1, e2);
            if p.is_zero() {
                continue;
            }
            k_min = Some(match k_min {
                None => p,
                Some(m) => if p.cmp_exact(&m).is_lt() { p } else { m },
            });
        }
    }
    let k_min = k_min.ok_or(MartingaleError::ZeroConditional)?;
    let delta = field.from_rat(delta_star.clone()).mul(&k_min);
    let on = one.add(&delta);
    let off = one.sub(&field.from_rat(delta_star));
    // product: suffix matcher of w × language acceptor
    let matcher = suffix_automaton(w, base.alphabet_size());
    let beta_dfa = base.dfa();
    let nq = matcher.num_states() * beta_dfa.num_states();
    let idx = |mq: usize, bq: usize| mq * beta_dfa.num_states() + bq;
    let mut transitions = vec![vec![None; base.alphabet_size() as usize]; nq];
    let mut betting = vec![vec![field.one(); base.alphabet_size() as usize]; nq];
    for mq in 0..matcher.num_states() {
        for bq in 0..beta_dfa.num_states() {
            for a in 0..base.alphabet_size() {
                let Some(bq2) = beta_dfa.step(bq, a) else { continue };
                let mq2 = matcher.step(mq, a).expect("matcher is total");
                transitions[idx(mq, bq)][a as usize] = Some(idx(mq2, bq2));
                if mq == w.len() {
                    betting[idx(mq, bq)][a as usize] =
                        if a == c { off.clone() } else { on.clone() };
                }
            }
        }
    }
    let dfa = Dfa::new_accepting(
        base.alphabet_size(),
        transitions,
        idx(matcher.start(), beta_dfa.start()),
    );
    Ok(DfaMartingale::new(field.clone(), dfa, betting, field.one(), Kind::Supermartingale))
}

/// Helper for choosing N_α: the largest N such that α↾N occurs in the data.
pub fn largest_prefix_seen(alpha: &[u8], data: &[u8]) -> usize {
    for n in (1..=alpha.len()).rev() {
        if crate::measures::occ(&alpha[..n], data) > 0 {
            return n;
        }
    }
    0
}

// ---------------------------------------------------------------------------
// savings transform
// ---------------------------------------------------------------------------

/// Escrow wrapper: whenever the active capital reaches twice the initial
/// stake, half moves to an escrow account that thereafter bets factor 1.
/// The result is exactly fair whenever the inner strategy is, never drops
/// more than the active cap (2·initial) below its running max, and succeeds
/// whenever the inner strategy does.
pub struct SavingsTransform<M: Martingale> {
    inner: M,
}

impl<M: Martingale> SavingsTransform<M> {
    pub fn new(inner: M) -> Self {
        SavingsTransform { inner }
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }

    /// The savings constant c: capital can never drop more than this below
    /// any earlier value.
    pub fn savings_constant(&self) -> FieldElement {
        self.inner.initial().scale_i64(2)
    }

    /// (escrow, active) split after a word.
    pub fn split(&self, word: &[u8]) -> Result<(FieldElement, FieldElement), MartingaleError> {
        let mut cur = SavingsCursor::start(&self.inner);
        for &a in word {
            cur.advance(a)?;
        }
        let active = cur.shifted(&cur.inner.capital());
        Ok((cur.saved, active))
    }
}

struct SavingsCursor<'a> {
    inner: Box<dyn MartCursor + 'a>,
    saved: FieldElement,
    /// The active account is always `inner.capital() · 2^{−halvings}`:
    /// multiplicative updates scale both sides equally, and each escrow move
    /// halves the active share. Tracking the exponent avoids a field
    /// division on every step.
    halvings: u32,
    threshold: FieldElement,
}

impl<'a> SavingsCursor<'a> {
    fn start(inner_mart: &'a dyn Martingale) -> Self {
        SavingsCursor {
            inner: inner_mart.cursor(),
            saved: inner_mart.field().zero(),
            halvings: 0,
            threshold: inner_mart.initial().scale_i64(2),
        }
    }

    fn shifted(&self, inner_cap: &FieldElement) -> FieldElement {
        if self.halvings == 0 || inner_cap.is_zero() {
            return inner_cap.clone();
        }
        inner_cap.mul_rat(&Rat::new(BigInt::one(), BigInt::one() << self.halvings))
    }
}

impl MartCursor for SavingsCursor<'_> {
    fn advance(&mut self, digit: u8) -> Result<(), MartingaleError> {
        let inner_next = self.inner.child_capital(digit)?;
        let mut active = self.shifted(&inner_next);
        let half = Rat::new(BigInt::one(), BigInt::from(2));
        while active.cmp_exact(&self.threshold).is_ge() {
            let half_a = active.mul_rat(&half);
            self.saved = self.saved.add(&half_a);
            active = half_a;
            self.halvings += 1;
        }
        self.inner.advance(digit)
    }

    fn capital(&self) -> FieldElement {
        self.saved.add(&self.shifted(&self.inner.capital()))
    }

    fn child_capital(&self, digit: u8) -> Result<FieldElement, MartingaleError> {
        // rebalancing moves value between accounts but never changes the sum
        let inner_next = self.inner.child_capital(digit)?;
        Ok(self.saved.add(&self.shifted(&inner_next)))
    }
}

impl<M: Martingale> Martingale for SavingsTransform<M> {
    fn field(&self) -> &FieldRef {
        self.inner.field()
    }

    fn initial(&self) -> FieldElement {
        self.inner.initial()
    }

    fn capital(&self, word: &[u8]) -> Result<FieldElement, MartingaleError> {
        let (saved, active) = self.split(word)?;
        Ok(saved.add(&active))
    }

    fn cursor(&self) -> Box<dyn MartCursor + '_> {
        Box::new(SavingsCursor::start(&self.inner))
    }
}

// ---------------------------------------------------------------------------
// supermartingale repair
// ---------------------------------------------------------------------------

/// Add back the slack of a supermartingale to make it exactly fair:
/// d(σ) = f(σ) − Σ_a P(σa|σ)·f(σa) ≥ 0, repaired(σ) = f(σ) + Σ_{τ≺σ} d(τ).
pub struct RepairedMartingale<'a> {
    inner: &'a dyn Martingale,
    measure: &'a dyn WordMeasure,
}

impl<'a> RepairedMartingale<'a> {
    pub fn new(inner: &'a dyn Martingale, measure: &'a dyn WordMeasure) -> Self {
        RepairedMartingale { inner, measure }
    }

    fn slack(&self, word: &[u8]) -> Result<FieldElement, MartingaleError> {
        let field = self.measure.field();
        let f_here = self.inner.capital(word)?;
        let mut sum = field.zero();
        for a in 0..self.measure.alphabet_size() {
            let p = self.measure.conditional(word, a);
            if p.is_zero() {
                continue;
            }
            let mut wa = word.to_vec();
            wa.push(a);
            sum = sum.add(&p.mul(&self.inner.capital(&wa)?));
        }
        let d = f_here.sub(&sum);
        if d.sign() < 0 {
            return Err(MartingaleError::NegativeSlack);
        }
        Ok(d)
    }
}

impl Martingale for RepairedMartingale<'_> {
    fn field(&self) -> &FieldRef {
        self.inner.field()
    }

    fn initial(&self) -> FieldElement {
        self.inner.initial()
    }

    fn capital(&self, word: &[u8]) -> Result<FieldElement, MartingaleError> {
        let mut total = self.inner.capital(word)?;
        for i in 0..word.len() {
            total = total.add(&self.slack(&word[..i])?);
        }
        Ok(total)
    }

    fn cursor(&self) -> Box<dyn MartCursor + '_> {
        Box::new(RepairedCursor {
            inner: self.inner.cursor(),
            measure: self.measure,
            slack_sum: self.inner.field().zero(),
            word: Vec::new(),
        })
    }
}

struct RepairedCursor<'a> {
    inner: Box<dyn MartCursor + 'a>,
    measure: &'a dyn WordMeasure,
    slack_sum: FieldElement,
    word: Vec<u8>,
}

impl RepairedCursor<'_> {
    fn slack_here(&self) -> Result<FieldElement, MartingaleError> {
        let field = self.measure.field();
        let mut sum = field.zero();
        for a in 0..self.measure.alphabet_size() {
            let p = self.measure.conditional(&self.word, a);
            if p.is_zero() {
                continue;
            }
            sum = sum.add(&p.mul(&self.inner.child_capital(a)?));
        }
        let d = self.inner.capital().sub(&sum);
        if d.sign() < 0 {
            return Err(MartingaleError::NegativeSlack);
        }
        Ok(d)
    }
}

impl MartCursor for RepairedCursor<'_> {
    fn advance(&mut self, digit: u8) -> Result<(), MartingaleError> {
        let d = self.slack_here()?;
        self.slack_sum = self.slack_sum.add(&d);
        self.inner.advance(digit)?;
        self.word.push(digit);
        Ok(())
    }

    fn capital(&self) -> FieldElement {
        self.inner.capital().add(&self.slack_sum)
    }

    fn child_capital(&self, digit: u8) -> Result<FieldElement, MartingaleError> {
        let d = self.slack_here()?;
        Ok(self.inner.child_capital(digit)?.add(&self.slack_sum).add(&d))
    }
}
