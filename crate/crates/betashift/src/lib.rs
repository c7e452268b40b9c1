//! Exact computation in β-shifts over Pisot bases.
//!
//! The crate is organised around a pipeline:
//!
//! * [`algebraic`] — exact arithmetic in the number field `Q(β)` generated by
//!   a monic integer polynomial with a distinguished real root `β > 1`,
//!   including exact sign/floor/approximation queries and a Pisot test.
//! * [`beta`] — greedy β-expansions of field elements, exact evaluation of
//!   digit words, and base conversion from dyadic rationals.
//! * [`automaton`] — the canonical acceptor of the β-shift language, boundary
//!   combinatorics of cylinders, right-resolving edge presentations,
//!   synchronizing words and ergodic decomposition.
//! * [`measures`] — exact Markov measures, the Lebesgue push-forward `ξ`,
//!   the Parry (maximal entropy) measure computed by two independent routes,
//!   empirical block frequencies and seeded sampling.
//! * [`martingale`] — automaton-generated betting strategies: the deviant
//!   block constructions, sofic synchronizing/non-synchronizing variants,
//!   the savings transform and the supermartingale repair.
//! * [`transfer`] — pushing a martingale's capital measure through the
//!   β-adic/dyadic correspondence to obtain a binary martingale with
//!   certified error radii.
//!
//! All probabilities and capitals are exact elements of `Q(β)`; floating
//! point only enters in reports and in statistical summaries.

pub mod algebraic;
pub mod automaton;
pub mod beta;
pub mod martingale;
pub mod measures;
pub mod transfer;

pub use algebraic::{Field, FieldElement, MinimalPolynomial};
pub use beta::BetaBase;
