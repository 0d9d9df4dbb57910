//! Computing with finite modal algebras and finite Kripke frames.
//!
//! The crate provides:
//!
//! * a modal formula language with parser and printer ([`formula`]),
//! * finite modal algebras as powerset Boolean algebras with an
//!   atom-specified diamond, together with validity checking, subdirect
//!   irreducibility, and quotients by box filters ([`algebra`]),
//! * finite Kripke frames and the finite frame/algebra duality ([`frame`]),
//! * search for stable embeddings subject to closed domain conditions
//!   ([`morphism`]),
//! * the least, greatest, Lemmon, and pre-transitive definable filtration
//!   constructions with a verifier ([`filtration`]),
//! * stable canonical rules and (m-)stable canonical formulas with
//!   semantic validity deciders ([`rules`]),
//! * bounded refutation-pattern axiomatization and its equivalence oracle
//!   ([`axiomatize`]).
//!
//! Everything is aimed at desk scale: the algorithms are exhaustive and
//! exact, guarded by explicit search budgets.

pub mod algebra;
pub mod axiomatize;
pub mod error;
pub mod filtration;
pub mod formula;
pub mod frame;
pub mod morphism;
pub mod rules;

pub use error::{Error, Result};

/// Caps for the exhaustive searches. Exceeding a cap is an error distinct
/// from a negative answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    /// Maximum number of valuations examined per validity query.
    pub max_valuations: u64,
    /// Maximum number of assignment steps per stable-embedding search.
    pub max_surjections: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_valuations: 1 << 24,
            max_surjections: 10_000_000,
        }
    }
}

impl SearchBudget {
    /// A budget with both caps set to `n`.
    pub fn uniform(n: u64) -> Self {
        SearchBudget {
            max_valuations: n,
            max_surjections: n,
        }
    }
}
