//! The β-shift language `L(X_β)`: canonical acceptor, boundary
//! combinatorics of cylinders, right-resolving presentations, synchronizing
//! words, and ergodic-class decomposition.

use crate::beta::BetaBase;
use std::collections::{BTreeMap, HashMap, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutomatonError {
    #[error("word is not admissible")]
    NotAdmissible,
    #[error("graph has no synchronizing word")]
    NoSynchronizingWord,
}

/// A deterministic finite automaton with partial transitions; the missing
/// transitions point at an implicit garbage state. By default every explicit
/// state is accepting.
#[derive(Clone, Debug)]
pub struct Dfa {
    alphabet: u8,
    /// `transitions[state][digit]`
    transitions: Vec<Vec<Option<usize>>>,
    start: usize,
    accepting: Vec<bool>,
}

impl Dfa {
    pub fn new(
        alphabet: u8,
        transitions: Vec<Vec<Option<usize>>>,
        start: usize,
        accepting: Vec<bool>,
    ) -> Self {
        assert_eq!(transitions.len(), accepting.len());
        for row in &transitions {
            assert_eq!(row.len(), alphabet as usize);
        }
        assert!(start < transitions.len());
        Dfa { alphabet, transitions, start, accepting }
    }

    /// All-accepting automaton.
    pub fn new_accepting(alphabet: u8, transitions: Vec<Vec<Option<usize>>>, start: usize) -> Self {
        let n = transitions.len();
        Self::new(alphabet, transitions, start, vec![true; n])
    }

    pub fn alphabet_size(&self) -> u8 {
        self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.transitions.len()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn is_accepting(&self, state: usize) -> bool {
        self.accepting[state]
    }

    pub fn step(&self, state: usize, digit: u8) -> Option<usize> {
        self.transitions[state].get(digit as usize).copied().flatten()
    }

    /// Run from the start state; `None` means the word fell into garbage.
    pub fn run(&self, word: &[u8]) -> Option<usize> {
        self.run_from(self.start, word)
    }

    pub fn run_from(&self, mut state: usize, word: &[u8]) -> Option<usize> {
        for &d in word {
            state = self.step(state, d)?;
        }
        Some(state)
    }

    pub fn accepts(&self, word: &[u8]) -> bool {
        self.run(word).map_or(false, |q| self.accepting[q])
    }

    /// Admissible digits out of a state (for β-shift automata this is a
    /// contiguous range `0..=r`).
    pub fn allowed(&self, state: usize) -> Vec<u8> {
        (0..self.alphabet).filter(|&a| self.step(state, a).is_some()).collect()
    }

    /// GraphViz DOT rendering.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph dfa {\n  rankdir=LR;\n");
        for q in 0..self.num_states() {
            let shape = if self.accepting[q] { "doublecircle" } else { "circle" };
            out.push_str(&format!("  q{q} [shape={shape}];\n"));
        }
        out.push_str(&format!("  start [shape=point]; start -> q{};\n", self.start));
        for q in 0..self.num_states() {
            for a in 0..self.alphabet {
                if let Some(t) = self.step(q, a) {
                    out.push_str(&format!("  q{q} -> q{t} [label=\"{a}\"];\n"));
                }
            }
        }
        out.push_str("}\n");
        out
    }

    /// Transition table as JSON.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .transitions
            .iter()
            .map(|row| {
                serde_json::Value::Array(
                    row.iter()
                        .map(|t| match t {
                            Some(q) => serde_json::json!(q),
                            None => serde_json::Value::Null,
                        })
                        .collect(),
                )
            })
            .collect();
        serde_json::json!({
            "alphabet_size": self.alphabet,
            "start": self.start,
            "accepting": self.accepting,
            "transitions": rows,
        })
    }
}

/// Build the canonical acceptor of `L(X_β)`: states `0..m+n` indexed by
/// position in `𝔰(β) = d₁d₂…`, with `δ(i, d_{i+1}) = i+1` (wrapping the last
/// period position back to `m`), `δ(i, a) = 0` for `a < d_{i+1}`, garbage for
/// `a > d_{i+1}`. Correct because `𝔰(β)` is shift-dominant (asserted when the
/// base is built).
pub fn build_beta_dfa(base: &BetaBase) -> Dfa {
    let m = base.s_preperiod().len();
    let n = base.s_period().len();
    let states = m + n;
    let alphabet = base.alphabet_size();
    let mut transitions = vec![vec![None; alphabet as usize]; states];
    for i in 0..states {
        let d = base.s_digit(i);
        for a in 0..alphabet {
            transitions[i][a as usize] = match a.cmp(&d) {
                std::cmp::Ordering::Less => Some(0),
                std::cmp::Ordering::Equal => Some(if i + 1 == states { m } else { i + 1 }),
                std::cmp::Ordering::Greater => None,
            };
        }
    }
    Dfa::new_accepting(alphabet, transitions, 0)
}

/// Linear-time membership in `L(X_β)`.
pub fn is_admissible(base: &BetaBase, word: &[u8]) -> bool {
    base.dfa().accepts(word)
}

/// Marker for the lexicographically largest admissible word of its length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Next {
    Word(Vec<u8>),
    Boundary,
}

/// Boundary combinatorics of the cylinder of σ.
#[derive(Clone, Debug)]
pub struct Boundary {
    /// `Suc₁(σ) = {b : σb ∈ L}`, always a contiguous range `{0,…,r}`.
    pub suc1: Vec<u8>,
    /// `σ̄⁺ = max Suc₁(σ)`.
    pub max_successor: u8,
    /// Least same-length admissible word above σ.
    pub next: Next,
    /// `N_σ = min{n : σ_{n+1}…σ_{|σ|} is a prefix of 𝔰(β)}` (|σ| if none).
    pub n_sigma: usize,
    /// σ ∈ 𝓛 ⇔ σ = σ′b with b ≠ σ̄′⁺.
    pub in_language_l: bool,
}

/// Compute `Suc₁`, `σ̄⁺`, `next`, `N_σ` and membership in 𝓛 for an
/// admissible word.
pub fn boundary_combinatorics(base: &BetaBase, sigma: &[u8]) -> Result<Boundary, AutomatonError> {
    let dfa = base.dfa();
    let state = dfa.run(sigma).ok_or(AutomatonError::NotAdmissible)?;
    let suc1 = dfa.allowed(state);
    let max_successor = *suc1.last().expect("prolongability: some digit is always admissible");
    // next(σ): bump the last possible position, then pad with zeros
    let mut next = Next::Boundary;
    'outer: for i in (0..sigma.len()).rev() {
        let prefix_state = dfa.run(&sigma[..i]).expect("prefix of admissible word");
        for b in (sigma[i] + 1)..base.alphabet_size() {
            if dfa.step(prefix_state, b).is_some() {
                let mut w = sigma[..i].to_vec();
                w.push(b);
                w.resize(sigma.len(), 0);
                next = Next::Word(w);
                break 'outer;
            }
        }
    }
    // N_σ: least n such that σ_{n+1}…σ_{|σ|} = 𝔰(β)₁…𝔰(β)_{|σ|−n}
    let mut n_sigma = sigma.len();
    for n in 0..sigma.len() {
        if sigma[n..].iter().enumerate().all(|(j, &d)| d == base.s_digit(j)) {
            n_sigma = n;
            break;
        }
    }
    let in_language_l = if sigma.is_empty() {
        false
    } else {
        let prefix_state = dfa.run(&sigma[..sigma.len() - 1]).expect("prefix admissible");
        let prefix_max = *dfa.allowed(prefix_state).last().unwrap();
        sigma[sigma.len() - 1] != prefix_max
    };
    Ok(Boundary { suc1, max_successor, next, n_sigma, in_language_l })
}

/// A right-resolving labeled graph (sofic presentation).
#[derive(Clone, Debug)]
pub struct LabeledGraph {
    num_nodes: usize,
    edges: Vec<LabeledEdge>,
    /// outgoing edge indices per node
    out: Vec<Vec<usize>>,
    alphabet: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabeledEdge {
    pub origin: usize,
    pub dest: usize,
    pub label: u8,
}

impl LabeledGraph {
    pub fn new(num_nodes: usize, edges: Vec<LabeledEdge>, alphabet: u8) -> Self {
        let mut out = vec![Vec::new(); num_nodes];
        for (i, e) in edges.iter().enumerate() {
            out[e.origin].push(i);
        }
        let g = LabeledGraph { num_nodes, edges, out, alphabet };
        assert!(g.is_right_resolving(), "presentation must be right-resolving");
        g
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[LabeledEdge] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> &LabeledEdge {
        &self.edges[i]
    }

    pub fn alphabet_size(&self) -> u8 {
        self.alphabet
    }

    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out[node]
    }

    /// The unique edge out of `node` with the given label, if any.
    pub fn follow(&self, node: usize, label: u8) -> Option<usize> {
        self.out[node].iter().copied().find(|&i| self.edges[i].label == label)
    }

    pub fn is_right_resolving(&self) -> bool {
        for node in 0..self.num_nodes {
            let mut seen = std::collections::HashSet::new();
            for &i in &self.out[node] {
                if !seen.insert(self.edges[i].label) {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_irreducible(&self) -> bool {
        let adj: Vec<Vec<usize>> = (0..self.num_nodes)
            .map(|n| self.out[n].iter().map(|&i| self.edges[i].dest).collect())
            .collect();
        strongly_connected_components(&adj).len() == 1
    }

    /// Does the graph generate `word` as a path label from `node`?
    pub fn follow_word(&self, mut node: usize, word: &[u8]) -> Option<usize> {
        for &a in word {
            node = self.edges[self.follow(node, a)?].dest;
        }
        Some(node)
    }

    /// All edge paths labelled by `word` (the fiber `A(word) = 𝓛*⁻¹(word)`),
    /// as sequences of edge indices.
    pub fn label_fiber(&self, word: &[u8]) -> Vec<Vec<usize>> {
        let mut paths: Vec<Vec<usize>> = vec![Vec::new()];
        for &a in word {
            let mut next_paths = Vec::new();
            for p in paths {
                let node = match p.last() {
                    Some(&e) => self.edges[e].dest,
                    None => usize::MAX, // any start node
                };
                if node == usize::MAX {
                    for n in 0..self.num_nodes {
                        if let Some(e) = self.follow(n, a) {
                            next_paths.push(vec![e]);
                        }
                    }
                } else if let Some(e) = self.follow(node, a) {
                    let mut q = p.clone();
                    q.push(e);
                    next_paths.push(q);
                }
            }
            paths = next_paths;
        }
        paths
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph presentation {\n  rankdir=LR;\n");
        for n in 0..self.num_nodes {
            out.push_str(&format!("  n{n} [shape=circle];\n"));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "  n{} -> n{} [label=\"{}\"];\n",
                e.origin, e.dest, e.label
            ));
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "nodes": self.num_nodes,
            "alphabet_size": self.alphabet,
            "edges": self.edges.iter().map(|e| serde_json::json!({
                "from": e.origin, "to": e.dest, "label": e.label,
            })).collect::<Vec<_>>(),
        })
    }
}

fn strongly_connected_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    // iterative Tarjan
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut sccs: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0usize;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        // (node, next child offset)
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut ci)) = call.last_mut() {
            if *ci == 0 {
                index[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *ci < adj[v].len() {
                let w = adj[v][*ci];
                *ci += 1;
                if index[w] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    sccs.push(comp);
                }
            }
        }
    }
    sccs
}

/// The minimal right-resolving presentation of `X_β`: the canonical DFA is
/// viewed as a labeled graph, restricted to its strongly connected core and
/// minimized by follower-set partition refinement.
pub fn presentation(base: &BetaBase) -> LabeledGraph {
    let dfa = base.dfa();
    let n = dfa.num_states();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|q| (0..dfa.alphabet_size()).filter_map(|a| dfa.step(q, a)).collect())
        .collect();
    let sccs = strongly_connected_components(&adj);
    let core = sccs
        .iter()
        .find(|c| c.contains(&dfa.start()))
        .expect("start state belongs to some component")
        .clone();
    let in_core = {
        let mut v = vec![false; n];
        for &q in &core {
            v[q] = true;
        }
        v
    };
    // partition refinement over core states: states are equivalent when
    // their per-label target classes agree
    let mut class = vec![0usize; n];
    let mut num_classes = 1usize;
    loop {
        let mut signature: HashMap<Vec<Option<usize>>, usize> = HashMap::new();
        let mut next_class = vec![0usize; n];
        let mut next_num = 0usize;
        for &q in &core {
            let sig: Vec<Option<usize>> = (0..dfa.alphabet_size())
                .map(|a| {
                    dfa.step(q, a)
                        .filter(|&t| in_core[t])
                        .map(|t| class[t])
                })
                .collect();
            let mut key = sig;
            key.push(Some(class[q])); // refine within previous classes
            let id = *signature.entry(key).or_insert_with(|| {
                let id = next_num;
                next_num += 1;
                id
            });
            next_class[q] = id;
        }
        if next_num == num_classes {
            break;
        }
        class = next_class;
        num_classes = next_num;
    }
    // assemble edges between classes
    let mut edges: Vec<LabeledEdge> = Vec::new();
    let mut seen: std::collections::HashSet<(usize, u8)> = std::collections::HashSet::new();
    for &q in &core {
        for a in 0..dfa.alphabet_size() {
            if let Some(t) = dfa.step(q, a) {
                if in_core[t] && seen.insert((class[q], a)) {
                    edges.push(LabeledEdge { origin: class[q], dest: class[t], label: a });
                }
            }
        }
    }
    let g = LabeledGraph::new(num_classes, edges, dfa.alphabet_size());
    assert!(g.is_irreducible(), "presentation core must be irreducible");
    g
}

/// Result of [`synchronizing_word`].
#[derive(Clone, Debug)]
pub struct SyncWord {
    pub word: Vec<u8>,
    pub node: usize,
}

/// Shortest synchronizing word by breadth-first search over node subsets.
pub fn synchronizing_word(graph: &LabeledGraph) -> Result<SyncWord, AutomatonError> {
    assert!(graph.num_nodes() <= 64, "subset search uses 64-bit masks");
    let full: u64 = if graph.num_nodes() == 64 { !0 } else { (1u64 << graph.num_nodes()) - 1 };
    let mut prev: BTreeMap<u64, (u64, u8)> = BTreeMap::new();
    let mut queue = VecDeque::new();
    queue.push_back(full);
    prev.insert(full, (full, 0));
    while let Some(mask) = queue.pop_front() {
        if mask.count_ones() == 1 {
            // reconstruct the word
            let node = mask.trailing_zeros() as usize;
            let mut word = Vec::new();
            let mut cur = mask;
            while cur != full {
                let (p, a) = prev[&cur];
                word.push(a);
                cur = p;
            }
            word.reverse();
            return Ok(SyncWord { word, node });
        }
        for a in 0..graph.alphabet_size() {
            let mut image: u64 = 0;
            for node in 0..graph.num_nodes() {
                if mask & (1 << node) != 0 {
                    if let Some(e) = graph.follow(node, a) {
                        image |= 1 << graph.edge(e).dest;
                    }
                }
            }
            if image != 0 && !prev.contains_key(&image) {
                prev.insert(image, (mask, a));
                queue.push_back(image);
            }
        }
    }
    Err(AutomatonError::NoSynchronizingWord)
}

/// A strongly connected class of accepting states.
#[derive(Clone, Debug)]
pub struct ErgodicClass {
    pub states: Vec<usize>,
    /// Ergodic ⇔ no transition leaves the class toward another accepting
    /// state (minimal in the reachability order).
    pub ergodic: bool,
}

/// Decompose the accepting part of a DFA into communicating classes and flag
/// the ergodic (closed, minimal) ones.
pub fn ergodic_classes(dfa: &Dfa) -> Vec<ErgodicClass> {
    let n = dfa.num_states();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|q| {
            if !dfa.is_accepting(q) {
                return Vec::new();
            }
            (0..dfa.alphabet_size())
                .filter_map(|a| dfa.step(q, a))
                .filter(|&t| dfa.is_accepting(t))
                .collect()
        })
        .collect();
    let sccs = strongly_connected_components(&adj);
    let mut class_of = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for comp in sccs {
        let comp: Vec<usize> = comp.into_iter().filter(|&q| dfa.is_accepting(q)).collect();
        if comp.is_empty() {
            continue;
        }
        for &q in &comp {
            class_of[q] = classes.len();
        }
        classes.push(comp);
    }
    classes
        .into_iter()
        .map(|states| {
            let me = class_of[states[0]];
            let mut ergodic = true;
            'scan: for &q in &states {
                for t in &adj[q] {
                    if class_of[*t] != me {
                        ergodic = false;
                        break 'scan;
                    }
                }
            }
            ErgodicClass { states, ergodic }
        })
        .collect()
}

/// Direct lexicographic admissibility oracle (test reference): every suffix
/// must be ≤ the corresponding prefix of `𝔰(β)`.
pub fn admissible_oracle(base: &BetaBase, word: &[u8]) -> bool {
    for start in 0..word.len() {
        for (j, &d) in word[start..].iter().enumerate() {
            let s = base.s_digit(j);
            if d > s {
                return false;
            }
            if d < s {
                break;
            }
        }
    }
    true
}

/// Convenience: enumerate all admissible words up to `depth` (inclusive),
/// shortest first.
pub fn admissible_words(base: &BetaBase, depth: usize) -> Vec<Vec<u8>> {
    let dfa = base.dfa();
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<(Vec<u8>, usize)> = vec![(Vec::new(), dfa.start())];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (w, q) in frontier {
            for a in dfa.allowed(q) {
                let mut w2 = w.clone();
                w2.push(a);
                let t = dfa.step(q, a).unwrap();
                out.push(w2.clone());
                next.push((w2, t));
            }
        }
        frontier = next;
    }
    out
}
