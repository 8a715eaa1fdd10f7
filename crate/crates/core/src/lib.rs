//! Deferred acceptance over arbitrary institutional choice rules, the
//! matroid-based choice rules used for reserves and distributional
//! objectives, punctual choice axioms with their extension to matchings, and
//! brute-force verifiers for the characterization results that tie them
//! together.
//!
//! Everything is exhaustive and exact: contract sets are 64-bit masks, ranks
//! are integers, and every checker either passes or returns a concrete
//! witness.

pub mod axioms;
pub mod choice;
pub mod engine;
pub mod fixtures;
pub mod generate;
pub mod instance;
pub mod matroid;
pub mod model;

use std::fmt;

pub use model::{
    AgentId, Contract, ContractId, ContractSet, InstitutionId, InstitutionSpec, Market, Matching,
    Preference, Priority, Problem, Profile,
};

/// Outcome of an exhaustive check: pass, or the first witness found in the
/// checker's canonical enumeration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Report<W> {
    Pass,
    Fail(W),
}

impl<W> Report<W> {
    pub fn is_pass(&self) -> bool {
        matches!(self, Report::Pass)
    }

    pub fn witness(&self) -> Option<&W> {
        match self {
            Report::Pass => None,
            Report::Fail(w) => Some(w),
        }
    }

    pub fn from_witness(witness: Option<W>) -> Self {
        witness.map_or(Report::Pass, Report::Fail)
    }
}

/// Explicit limits on exhaustive enumeration. Exceeding one is an error,
/// never a silent truncation.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Guards {
    /// Largest ground set for pairwise choice-rule checks (`4^n` work).
    pub max_ground: usize,
    /// Largest ground set that may be tabulated (`2^n` entries).
    pub max_tabulation: usize,
    /// Largest number of preference profiles or matchings to enumerate.
    pub max_profiles: u128,
}

impl Default for Guards {
    fn default() -> Self {
        Guards {
            max_ground: 12,
            max_tabulation: 16,
            max_profiles: 1_000_000,
        }
    }
}

/// Name of the environment variable overriding [`Guards::max_ground`].
pub const MAX_GROUND_ENV: &str = "MATCHFORGE_MAX_GROUND";

impl Guards {
    /// Defaults, with `MATCHFORGE_MAX_GROUND` applied when set to a positive
    /// integer.
    pub fn from_env() -> Result<Self, GuardError> {
        let mut g = Guards::default();
        if let Ok(raw) = std::env::var(MAX_GROUND_ENV) {
            match raw.trim().parse::<usize>() {
                Ok(n) if n > 0 => g.max_ground = n,
                _ => return Err(GuardError::BadOverride { value: raw }),
            }
        }
        Ok(g)
    }

    pub fn check_ground(&self, what: &'static str, size: usize) -> Result<(), GuardError> {
        if size > self.max_ground {
            return Err(GuardError::Exceeded {
                what,
                limit: self.max_ground as u128,
                actual: size as u128,
            });
        }
        Ok(())
    }

    pub fn check_tabulation(&self, size: usize) -> Result<(), GuardError> {
        if size > self.max_tabulation {
            return Err(GuardError::Exceeded {
                what: "tabulated ground",
                limit: self.max_tabulation as u128,
                actual: size as u128,
            });
        }
        Ok(())
    }

    pub fn check_profiles(&self, what: &'static str, count: u128) -> Result<(), GuardError> {
        if count > self.max_profiles {
            return Err(GuardError::Exceeded {
                what,
                limit: self.max_profiles,
                actual: count,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GuardError {
    #[error("{what} is {actual}, above the enumeration guard of {limit}")]
    Exceeded {
        what: &'static str,
        limit: u128,
        actual: u128,
    },
    #[error("{MAX_GROUND_ENV}={value:?} is not a positive integer")]
    BadOverride { value: String },
}

/// Formats a contract set with market names, e.g. `{a-i, b-j}`.
pub fn display_set(market: &Market, set: ContractSet) -> impl fmt::Display + '_ {
    struct D<'a>(&'a Market, ContractSet);
    impl fmt::Display for D<'_> {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("{")?;
            for (k, c) in self.1.iter().enumerate() {
                if k > 0 {
                    f.write_str(", ")?;
                }
                f.write_str(&self.0.contract_name(c))?;
            }
            f.write_str("}")
        }
    }
    D(market, set)
}
