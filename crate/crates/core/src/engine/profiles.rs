//! Enumeration of preference profiles.

use itertools::Itertools;

use crate::model::{AgentId, Market, Preference, Profile};
use crate::{GuardError, Guards};

/// Every strict order over `a`'s contracts and null, in lexicographic order
/// of the permutation over `[null, contracts ascending]`.
pub fn all_preferences(market: &Market, a: AgentId) -> Vec<Preference> {
    let items: Vec<_> = std::iter::once(None)
        .chain(market.agent_contracts(a).iter().map(Some))
        .collect();
    let n = items.len();
    items
        .into_iter()
        .permutations(n)
        .map(Preference::from_order)
        .collect()
}

/// `Π_a (|X_a| + 1)!`, saturating.
pub fn profile_count(market: &Market) -> u128 {
    market
        .agents()
        .map(|a| factorial(market.agent_contracts(a).len() as u128 + 1))
        .fold(1u128, |acc, k| acc.saturating_mul(k))
}

fn factorial(n: u128) -> u128 {
    (1..=n).fold(1u128, |acc, k| acc.saturating_mul(k))
}

/// All preference profiles of a market, addressable by a mixed-radix index
/// with agent 0 varying fastest.
#[derive(Clone, Debug)]
pub struct ProfileSpace {
    per_agent: Vec<Vec<Preference>>,
    len: usize,
}

impl ProfileSpace {
    pub fn new(market: &Market, guards: &Guards) -> Result<Self, GuardError> {
        guards.check_profiles("preference profile count", profile_count(market))?;
        let per_agent: Vec<Vec<Preference>> = market.agents().map(|a| all_preferences(market, a)).collect();
        let len = per_agent.iter().map(Vec::len).product();
        Ok(ProfileSpace { per_agent, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn preferences(&self, a: AgentId) -> &[Preference] {
        &self.per_agent[a.0]
    }

    /// Per-agent positions of profile `index`.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        self.per_agent
            .iter()
            .map(|prefs| {
                let d = index % prefs.len();
                index /= prefs.len();
                d
            })
            .collect()
    }

    /// Index of the profile with agent `a`'s digit replaced.
    pub fn with_digit(&self, index: usize, a: AgentId, digit: usize) -> usize {
        let stride: usize = self.per_agent[..a.0].iter().map(Vec::len).product();
        let current = index / stride % self.per_agent[a.0].len();
        index - current * stride + digit * stride
    }

    pub fn profile(&self, index: usize) -> Profile {
        Profile::new(
            self.digits(index)
                .into_iter()
                .zip(&self.per_agent)
                .map(|(d, prefs)| prefs[d].clone())
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn counts_and_indexing() {
        let p = fixtures::e4();
        let space = ProfileSpace::new(&p.market, &Guards::default()).unwrap();
        assert_eq!(space.len(), 36);
        assert_eq!(profile_count(&p.market), 36);
        for k in 0..space.len() {
            let prof = space.profile(k);
            for a in p.market.agents() {
                assert!(p.market.validate_preference(a, prof.get(a)).is_ok());
                let d = space.digits(k)[a.0];
                assert_eq!(space.with_digit(k, a, d), k);
            }
        }
        let distinct: std::collections::HashSet<_> = (0..space.len()).map(|k| space.profile(k)).collect();
        assert_eq!(distinct.len(), 36);
    }

    #[test]
    fn guard_applies() {
        let p = fixtures::e4();
        let guards = Guards {
            max_profiles: 10,
            ..Guards::default()
        };
        assert!(ProfileSpace::new(&p.market, &guards).is_err());
    }
}
