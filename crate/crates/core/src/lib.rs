//! Corralling bandit algorithms with switching-regret guarantees.
//!
//! The crate is organised bottom-up:
//!
//! - [`rng`], [`regret`]: the deterministic randomness contract and regret accounting.
//! - [`geometry`]: `l_p` / gauge norms, barrier mirror maps and their inverses, projections.
//! - [`simplex`]: the floor-constrained mirror step shared by the entropy-style learners.
//! - [`base_learner`]: the per-slot OMD learner with the randomized action decomposition.
//! - [`corral`]: the meta algorithm over `T` base slots (fixed-share weights, two loss
//!   estimators, optimistic bias injection).
//! - [`mab_recipe`]: the multi-armed bandit warm-up built from clipped Exp3 copies.
//! - [`unconstrained`]: comparator-adaptive unconstrained OCO and the linear-bandit reduction.
//! - [`environments`]: loss generators and the dynamic-programming comparator oracle.

pub mod base_learner;
pub mod corral;
pub mod environments;
mod error;
pub mod geometry;
pub mod linalg;
pub mod mab_recipe;
pub mod regret;
pub mod rng;
pub mod simplex;
pub mod unconstrained;

pub use error::{Error, Result};
pub use regret::{compute_regret, RegretReport, RoundRecord, SwitchingComparator};
pub use rng::RngStream;

/// Inner product of two equal-length slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
