//! Deferred acceptance over a profile of choice rules, and stability.

use std::collections::BTreeMap;

use serde::Serialize;

use super::EngineError;
use crate::choice::SharedRule;
use crate::model::{all_matchings, matching_count, ContractId, ContractSet, InstitutionId, Market, Profile};
use crate::{Guards, Report};

/// What one institution saw and did at one step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InstitutionStep {
    pub considered: ContractSet,
    pub accepted: ContractSet,
    pub rejected: ContractSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DaStep {
    /// 1-based.
    pub step: usize,
    pub proposals: ContractSet,
    /// Institutions that considered a nonempty set, by id.
    pub per_institution: BTreeMap<usize, InstitutionStep>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DaTrace {
    pub steps: Vec<DaStep>,
    pub matching: ContractSet,
}

impl DaTrace {
    /// Every contract proposed during the run.
    pub fn proposed(&self) -> ContractSet {
        self.steps.iter().fold(ContractSet::EMPTY, |acc, s| acc | s.proposals)
    }

    /// `{"trace": [...], "matching": [...]}` with institutions keyed by name.
    pub fn to_json(&self, market: &Market) -> serde_json::Value {
        let steps: Vec<serde_json::Value> = self
            .steps
            .iter()
            .map(|s| {
                let per: serde_json::Map<String, serde_json::Value> = s
                    .per_institution
                    .iter()
                    .map(|(&i, rec)| {
                        (
                            market.institution(InstitutionId(i)).name.clone(),
                            serde_json::to_value(rec).expect("step serializes"),
                        )
                    })
                    .collect();
                serde_json::json!({
                    "step": s.step,
                    "proposals": s.proposals,
                    "perInstitution": per,
                })
            })
            .collect();
        serde_json::json!({ "trace": steps, "matching": self.matching })
    }
}

fn check_rule_count(market: &Market, rules: &[SharedRule]) -> Result<(), EngineError> {
    if rules.len() != market.institution_count() {
        return Err(EngineError::RuleCount {
            expected: market.institution_count(),
            actual: rules.len(),
        });
    }
    Ok(())
}

/// Runs agent-proposing deferred acceptance with simultaneous rounds.
///
/// Every institution re-applies its rule to its held contracts plus new
/// proposals at every step; rejections are permanent. A rule returning a
/// set outside what it was offered is reported with the step index.
pub fn run_da(market: &Market, profile: &Profile, rules: &[SharedRule]) -> Result<DaTrace, EngineError> {
    check_rule_count(market, rules)?;
    let lists: Vec<Vec<ContractId>> = market.agents().map(|a| profile.get(a).acceptable().collect()).collect();
    // Next position in each agent's acceptable list.
    let mut cursor = vec![0usize; lists.len()];
    let mut proposing: Vec<bool> = vec![true; lists.len()];
    let mut held = ContractSet::EMPTY;
    let mut steps = Vec::new();

    for step in 1.. {
        let mut proposals = ContractSet::EMPTY;
        for (a, list) in lists.iter().enumerate() {
            if proposing[a] {
                if let Some(&x) = list.get(cursor[a]) {
                    proposals.insert(x);
                    cursor[a] += 1;
                }
                proposing[a] = false;
            }
        }
        let mut per_institution = BTreeMap::new();
        let mut accepted_all = ContractSet::EMPTY;
        let mut rejected_all = ContractSet::EMPTY;
        for i in market.institutions() {
            let considered = (held | proposals) & market.institution_contracts(i);
            let accepted = rules[i.0].choose(considered);
            if !accepted.is_subset_of(considered) {
                return Err(EngineError::SubsetViolation {
                    step,
                    institution: market.institution(i).name.clone(),
                    considered,
                    chosen: accepted,
                });
            }
            let rejected = considered - accepted;
            accepted_all = accepted_all | accepted;
            rejected_all = rejected_all | rejected;
            if !considered.is_empty() {
                per_institution.insert(
                    i.0,
                    InstitutionStep {
                        considered,
                        accepted,
                        rejected,
                    },
                );
            }
        }
        steps.push(DaStep {
            step,
            proposals,
            per_institution,
        });
        held = accepted_all;
        if rejected_all.is_empty() {
            break;
        }
        for x in rejected_all.iter() {
            proposing[market.agent_of(x).0] = true;
        }
    }
    Ok(DaTrace { steps, matching: held })
}

/// Which stability clause fails, and where.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "clause", rename_all = "kebab-case")]
pub enum StabilityViolation {
    /// An agent holds an unacceptable contract.
    IndividualRationality { contract: ContractId },
    /// `C_i(X_i) ≠ X_i`.
    InstitutionalRationality {
        institution: usize,
        held: ContractSet,
        chosen: ContractSet,
    },
    /// `x ∉ X`, `x P X_α(x)` and `x ∈ C_i(X_i ∪ {x})`.
    Blocking { contract: ContractId, institution: usize },
}

/// Checks the three stability clauses in order; the witness is the first
/// failure by clause, then institution or contract id.
pub fn is_stable(
    market: &Market,
    profile: &Profile,
    rules: &[SharedRule],
    matching: ContractSet,
) -> Result<Report<StabilityViolation>, EngineError> {
    check_rule_count(market, rules)?;
    if let Some(x) = matching
        .iter()
        .find(|&x| !profile.get(market.agent_of(x)).is_acceptable(x))
    {
        return Ok(Report::Fail(StabilityViolation::IndividualRationality { contract: x }));
    }
    for i in market.institutions() {
        let held = matching & market.institution_contracts(i);
        let chosen = rules[i.0].choose(held);
        if chosen != held {
            return Ok(Report::Fail(StabilityViolation::InstitutionalRationality {
                institution: i.0,
                held,
                chosen,
            }));
        }
    }
    for x in (market.universe() - matching).iter() {
        let a = market.agent_of(x);
        if !profile.get(a).prefers(Some(x), market.assignment(matching, a)) {
            continue;
        }
        let i = market.institution_of(x);
        let held = matching & market.institution_contracts(i);
        if rules[i.0].choose(held.with(x)).contains(x) {
            return Ok(Report::Fail(StabilityViolation::Blocking {
                contract: x,
                institution: i.0,
            }));
        }
    }
    Ok(Report::Pass)
}

/// All stable matchings, in the order of [`all_matchings`].
pub fn enumerate_stable(
    market: &Market,
    profile: &Profile,
    rules: &[SharedRule],
    guards: &Guards,
) -> Result<Vec<ContractSet>, EngineError> {
    guards.check_profiles("matching count", matching_count(market))?;
    let mut out = Vec::new();
    for m in all_matchings(market) {
        if is_stable(market, profile, rules, m)?.is_pass() {
            out.push(m);
        }
    }
    Ok(out)
}

/// Whether applying every rule to the whole pool of proposals made during
/// the run reproduces the outcome, institution by institution.
pub fn cumulative_offers_agree(market: &Market, rules: &[SharedRule], trace: &DaTrace) -> bool {
    let pool = trace.proposed();
    market.institutions().all(|i| {
        let own = market.institution_contracts(i);
        rules[i.0].choose(pool & own) == trace.matching & own
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::{build_rules, FnRule, RuleKind};
    use crate::fixtures;
    use crate::instance::load_instance;
    use crate::model::{AgentId, Preference};
    use std::sync::Arc;

    #[test]
    fn e4_da_outcome() {
        let p = fixtures::e4();
        let rules = build_rules(&p.market, RuleKind::Responsive).unwrap();
        let trace = run_da(&p.market, &p.profile, &rules).unwrap();
        let [_ai, aj, bi, _bj] = fixtures::E4_CONTRACTS;
        assert_eq!(trace.matching, [bi, aj].into_iter().collect());
        assert_eq!(trace.steps.len(), 2);
        assert!(cumulative_offers_agree(&p.market, &rules, &trace));
        let json = trace.to_json(&p.market);
        assert_eq!(json["matching"], serde_json::json!([1, 2]));
        assert_eq!(json["trace"][0]["perInstitution"]["i"]["rejected"], serde_json::json!([0]));
    }

    #[test]
    fn e4_stability() {
        let p = fixtures::e4();
        let rules = build_rules(&p.market, RuleKind::Responsive).unwrap();
        let [ai, aj, bi, bj] = fixtures::E4_CONTRACTS;
        let da: ContractSet = [bi, aj].into_iter().collect();
        assert!(is_stable(&p.market, &p.profile, &rules, da).unwrap().is_pass());
        assert_eq!(
            is_stable(&p.market, &p.profile, &rules, [ai, bj].into_iter().collect()).unwrap(),
            Report::Fail(StabilityViolation::Blocking {
                contract: bi,
                institution: 0
            })
        );
        assert_eq!(enumerate_stable(&p.market, &p.profile, &rules, &Guards::default()).unwrap(), vec![da]);
        assert!(!is_stable(&p.market, &p.profile, &rules, ContractSet::EMPTY).unwrap().is_pass());
    }

    #[test]
    fn nothing_acceptable_gives_empty_matching_in_one_step() {
        let p = fixtures::e4();
        let prefs = p
            .market
            .agents()
            .map(|a| Preference::from_acceptable(&[], p.market.agent_contracts(a)))
            .collect();
        let profile = Profile::new(prefs);
        let rules = build_rules(&p.market, RuleKind::Responsive).unwrap();
        let trace = run_da(&p.market, &profile, &rules).unwrap();
        assert_eq!(trace.matching, ContractSet::EMPTY);
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(
            enumerate_stable(&p.market, &profile, &rules, &Guards::default()).unwrap(),
            vec![ContractSet::EMPTY]
        );
    }

    #[test]
    fn single_agent_gets_its_contract() {
        let p = load_instance(
            br#"{"contracts": [{"id": 0, "agent": "a", "institution": "i"}],
                 "preferences": {"a": [0]},
                 "institutions": {"i": {"capacity": 1, "priority": [0], "returning": []}}}"#,
        )
        .unwrap();
        let rules = build_rules(&p.market, RuleKind::Responsive).unwrap();
        let trace = run_da(&p.market, &p.profile, &rules).unwrap();
        assert_eq!(trace.matching, ContractSet::singleton(ContractId(0)));
        assert_eq!(p.market.assignment(trace.matching, AgentId(0)), Some(ContractId(0)));
    }

    #[test]
    fn subset_violation_names_the_step() {
        let p = fixtures::e4();
        let universe = p.market.universe();
        let rules: Vec<SharedRule> = p
            .market
            .institutions()
            .map(|i| {
                let own = p.market.institution_contracts(i);
                Arc::new(FnRule::new("greedy-grab", own, move |_| own & universe)) as SharedRule
            })
            .collect();
        let err = run_da(&p.market, &p.profile, &rules).unwrap_err();
        assert!(matches!(err, EngineError::SubsetViolation { step: 1, .. }));
    }
}
