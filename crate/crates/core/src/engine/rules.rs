//! Matching rules and the exhaustive strategy-proofness check.

use rayon::prelude::*;
use serde::Serialize;

use super::da::run_da;
use super::profiles::ProfileSpace;
use super::EngineError;
use crate::choice::SharedRule;
use crate::model::{AgentId, ContractId, ContractSet, Market, Profile};
use crate::{Guards, Report};

/// A map from preference profiles to matchings of one market.
pub trait MatchingRule: Send + Sync {
    fn name(&self) -> &str;

    fn outcome(&self, market: &Market, profile: &Profile) -> Result<ContractSet, EngineError>;
}

/// Deferred acceptance based on a profile of choice rules.
pub struct DaRule {
    rules: Vec<SharedRule>,
}

impl DaRule {
    pub fn new(rules: Vec<SharedRule>) -> Self {
        DaRule { rules }
    }

    pub fn rules(&self) -> &[SharedRule] {
        &self.rules
    }
}

impl MatchingRule for DaRule {
    fn name(&self) -> &str {
        "deferred-acceptance"
    }

    fn outcome(&self, market: &Market, profile: &Profile) -> Result<ContractSet, EngineError> {
        Ok(run_da(market, profile, &self.rules)?.matching)
    }
}

/// Immediate acceptance: each round, every institution permanently admits
/// the highest-priority new proposals that fit in its remaining capacity.
pub struct ImmediateAcceptance;

impl MatchingRule for ImmediateAcceptance {
    fn name(&self) -> &str {
        "immediate-acceptance"
    }

    fn outcome(&self, market: &Market, profile: &Profile) -> Result<ContractSet, EngineError> {
        let lists: Vec<Vec<ContractId>> = market.agents().map(|a| profile.get(a).acceptable().collect()).collect();
        let mut admitted = ContractSet::EMPTY;
        let mut active: Vec<bool> = vec![true; lists.len()];
        for round in 0.. {
            let proposals: ContractSet = lists
                .iter()
                .enumerate()
                .filter(|&(a, _)| active[a])
                .filter_map(|(_, list)| list.get(round).copied())
                .collect();
            if proposals.is_empty() {
                break;
            }
            for i in market.institutions() {
                let own = market.institution_contracts(i);
                let spec = market.institution(i);
                let room = spec.capacity.saturating_sub((admitted & own).len());
                admitted = admitted | spec.priority.top(proposals & own, room);
            }
            for x in admitted.iter() {
                active[market.agent_of(x).0] = false;
            }
        }
        Ok(admitted)
    }
}

/// A rule given by a closure.
pub struct FnMatchingRule<F> {
    name: String,
    f: F,
}

impl<F: Fn(&Market, &Profile) -> ContractSet + Send + Sync> FnMatchingRule<F> {
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnMatchingRule { name: name.into(), f }
    }
}

impl<F: Fn(&Market, &Profile) -> ContractSet + Send + Sync> MatchingRule for FnMatchingRule<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn outcome(&self, market: &Market, profile: &Profile) -> Result<ContractSet, EngineError> {
        Ok((self.f)(market, profile))
    }
}

/// A profitable unilateral misreport.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ManipulationWitness {
    /// Index in the market's [`ProfileSpace`].
    pub profile: usize,
    pub agent: usize,
    /// Index of the reported preference among the agent's orders.
    pub deviation: usize,
    pub truthful_order: Vec<Option<ContractId>>,
    pub reported_order: Vec<Option<ContractId>>,
    pub truthful_outcome: Option<ContractId>,
    pub manipulated_outcome: Option<ContractId>,
}

/// The outcome of `rule` at every profile of `space`.
pub fn outcome_table(
    rule: &dyn MatchingRule,
    market: &Market,
    space: &ProfileSpace,
) -> Result<Vec<ContractSet>, EngineError> {
    (0..space.len())
        .into_par_iter()
        .map(|k| rule.outcome(market, &space.profile(k)))
        .collect()
}

/// Enumerates every profile and every unilateral deviation; the witness is
/// the first `(profile, agent, deviation)` in ascending order.
pub fn check_strategy_proofness(
    rule: &dyn MatchingRule,
    market: &Market,
    guards: &Guards,
) -> Result<Report<ManipulationWitness>, EngineError> {
    let space = ProfileSpace::new(market, guards)?;
    let outcomes = outcome_table(rule, market, &space)?;
    Ok(strategy_proofness_of_table(market, &space, &outcomes))
}

/// Strategy-proofness of a rule given as one outcome per profile index.
pub fn strategy_proofness_of_table(
    market: &Market,
    space: &ProfileSpace,
    outcomes: &[ContractSet],
) -> Report<ManipulationWitness> {
    debug_assert_eq!(outcomes.len(), space.len());
    let witness = (0..space.len()).into_par_iter().find_map_first(|k| {
        let digits = space.digits(k);
        market.agents().find_map(|a: AgentId| {
            let prefs = space.preferences(a);
            let truth = &prefs[digits[a.0]];
            let truthful = market.assignment(outcomes[k], a);
            (0..prefs.len()).find_map(|d| {
                let manipulated = market.assignment(outcomes[space.with_digit(k, a, d)], a);
                truth.prefers(manipulated, truthful).then(|| ManipulationWitness {
                    profile: k,
                    agent: a.0,
                    deviation: d,
                    truthful_order: truth.order().to_vec(),
                    reported_order: prefs[d].order().to_vec(),
                    truthful_outcome: truthful,
                    manipulated_outcome: manipulated,
                })
            })
        })
    });
    Report::from_witness(witness)
}
