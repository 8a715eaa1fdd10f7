//! Theorem-level verifiers: pointwise characterizations, the forward
//! direction and lemma chain for DA, sampled stable selectors, and the
//! two-contract counterexample to the strengthened statement.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::da::{enumerate_stable, is_stable, run_da, StabilityViolation};
use super::profiles::ProfileSpace;
use super::rules::{
    outcome_table, strategy_proofness_of_table, DaRule, FnMatchingRule,
    ManipulationWitness, MatchingRule,
};
use super::EngineError;
use crate::axioms::{
    builtin_axioms, extend, AxiomSet, Extended, IndividualRationality, MatchingAxiom, MatchingWitness,
    SharedAxiom, TableAxiom,
};
use crate::choice::{build_rule, build_rules, check_path_independence, check_size_monotonicity, ChoiceRule, RuleKind, SharedRule, Tabulated};
use crate::fixtures;
use crate::model::{all_matchings, matching_count, AgentId, ContractId, ContractSet, InstitutionId, Market, Problem, Profile};
use crate::{Guards, Report};

/// How the allowed sets of an axiom family compare with a target rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Characterization {
    /// Every problem admits exactly the target's choice.
    Characterized,
    /// Some problem admits nothing.
    Incompatible { set: ContractSet },
    /// Some problem admits more than one choice.
    NotUnique {
        set: ContractSet,
        allowed: Vec<ContractSet>,
        target: ContractSet,
    },
    /// Some problem admits exactly one choice, and it is not the target's.
    Mismatch {
        set: ContractSet,
        allowed: ContractSet,
        target: ContractSet,
    },
}

impl Characterization {
    pub fn is_characterized(&self) -> bool {
        matches!(self, Characterization::Characterized)
    }
}

/// For every `X ⊆ ground`, enumerates `{Y ⊆ X : Y ∈ φ(X) for all φ}` and
/// compares it with `{target(X)}`. An incompatible problem anywhere takes
/// precedence over the other failures; within a kind the witness is the
/// first `X` in ascending subset order.
pub fn verify_characterization(
    axioms: &[SharedAxiom],
    target: &dyn ChoiceRule,
    guards: &Guards,
) -> Result<Characterization, EngineError> {
    let ground = target.ground();
    guards.check_tabulation(ground.len())?;
    let problems: Vec<ContractSet> = ground.subsets().collect();
    let allowed: Vec<Vec<ContractSet>> = problems
        .par_iter()
        .map(|&x| {
            x.subsets()
                .filter(|&y| axioms.iter().all(|a| a.member(x, y)))
                .collect()
        })
        .collect();
    if let Some(k) = allowed.iter().position(Vec::is_empty) {
        return Ok(Characterization::Incompatible { set: problems[k] });
    }
    for (&x, ys) in problems.iter().zip(&allowed) {
        let t = target.choose(x);
        if ys.len() > 1 {
            return Ok(Characterization::NotUnique {
                set: x,
                allowed: ys.clone(),
                target: t,
            });
        }
        if ys[0] != t {
            return Ok(Characterization::Mismatch {
                set: x,
                allowed: ys[0],
                target: t,
            });
        }
    }
    Ok(Characterization::Characterized)
}

/// Checks the named axiom set against its designed rule at institution `i`.
pub fn verify_institution(
    market: &Market,
    i: InstitutionId,
    set: AxiomSet,
    guards: &Guards,
) -> Result<Characterization, EngineError> {
    let axioms = builtin_axioms(market, i, set.members())?;
    let target = build_rule(market, i, set.target())?;
    verify_characterization(&axioms, target.as_ref(), guards)
}

/// The extension of `set` at every institution of the market.
pub fn characterizing_axioms(market: &Market, set: AxiomSet) -> Result<Extended, EngineError> {
    let mut all = Vec::new();
    for i in market.institutions() {
        all.extend(builtin_axioms(market, i, set.members())?);
    }
    Ok(Extended::new(set.name(), all))
}

/// A failure of the forward direction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ForwardWitness {
    /// The rule's outcome at `profile` violates an axiom.
    Axiom {
        profile: usize,
        matching: ContractSet,
        witness: MatchingWitness,
    },
    Manipulation(ManipulationWitness),
}

fn outcomes_checked(
    market: &Market,
    rule: &dyn MatchingRule,
    guards: &Guards,
) -> Result<(ProfileSpace, Vec<ContractSet>), EngineError> {
    let space = ProfileSpace::new(market, guards)?;
    let outcomes = outcome_table(rule, market, &space)?;
    if let Some(&set) = outcomes.iter().find(|&&m| crate::Matching::new(market, m).is_err()) {
        return Err(EngineError::NotAMatching {
            rule: rule.name().to_owned(),
            set,
        });
    }
    Ok((space, outcomes))
}

fn first_axiom_failure(
    market: &Market,
    space: &ProfileSpace,
    outcomes: &[ContractSet],
    axioms: &[&dyn MatchingAxiom],
) -> Option<ForwardWitness> {
    (0..space.len()).into_par_iter().find_map_first(|k| {
        let problem = Problem {
            market: market.clone(),
            profile: space.profile(k),
        };
        axioms.iter().find_map(|a| {
            a.check(&problem, outcomes[k]).map(|witness| ForwardWitness::Axiom {
                profile: k,
                matching: outcomes[k],
                witness,
            })
        })
    })
}

/// On every profile, `rule`'s outcome is a matching satisfying every axiom
/// in `axioms`.
pub fn check_rule_axioms(
    market: &Market,
    rule: &dyn MatchingRule,
    axioms: &[&dyn MatchingAxiom],
    guards: &Guards,
) -> Result<Report<ForwardWitness>, EngineError> {
    let (space, outcomes) = outcomes_checked(market, rule, guards)?;
    Ok(Report::from_witness(first_axiom_failure(market, &space, &outcomes, axioms)))
}

/// [`check_rule_axioms`], then strategy-proofness on the same outcomes.
pub fn verify_forward_with(
    market: &Market,
    rule: &dyn MatchingRule,
    axioms: &[&dyn MatchingAxiom],
    guards: &Guards,
) -> Result<Report<ForwardWitness>, EngineError> {
    let (space, outcomes) = outcomes_checked(market, rule, guards)?;
    if let Some(w) = first_axiom_failure(market, &space, &outcomes, axioms) {
        return Ok(Report::Fail(w));
    }
    Ok(match strategy_proofness_of_table(market, &space, &outcomes) {
        Report::Pass => Report::Pass,
        Report::Fail(w) => Report::Fail(ForwardWitness::Manipulation(w)),
    })
}

/// DA based on `kind` at every institution satisfies individual
/// rationality, the extension of the characterizing axiom set, and
/// strategy-proofness.
pub fn verify_forward(market: &Market, kind: RuleKind, guards: &Guards) -> Result<Report<ForwardWitness>, EngineError> {
    let da = DaRule::new(build_rules(market, kind)?);
    let extended = characterizing_axioms(market, AxiomSet::for_rule(kind))?;
    verify_forward_with(market, &da, &[&IndividualRationality, &extended], guards)
}

/// A break in the lemma chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LemmaWitness {
    /// A matching satisfying individual rationality and the extended axioms
    /// that is not stable.
    Unstable {
        profile: usize,
        matching: ContractSet,
        violation: StabilityViolation,
    },
    /// The DA outcome violates individual rationality or an extended axiom.
    DaViolates {
        profile: usize,
        matching: ContractSet,
        witness: MatchingWitness,
    },
}

/// For every profile: (a) every matching satisfying individual rationality
/// and the extension of the characterizing axioms is stable; (b) the DA
/// outcome satisfies both.
pub fn verify_lemma_chain(market: &Market, kind: RuleKind, guards: &Guards) -> Result<Report<LemmaWitness>, EngineError> {
    guards.check_profiles("matching count", matching_count(market))?;
    let rules = build_rules(market, kind)?;
    let extended = characterizing_axioms(market, AxiomSet::for_rule(kind))?;
    let space = ProfileSpace::new(market, guards)?;
    let matchings = all_matchings(market);
    let axioms: [&dyn MatchingAxiom; 2] = [&IndividualRationality, &extended];
    let per_profile: Vec<Result<Option<LemmaWitness>, EngineError>> = (0..space.len())
        .into_par_iter()
        .map(|k| {
            let problem = Problem {
                market: market.clone(),
                profile: space.profile(k),
            };
            let satisfies = |m: ContractSet| axioms.iter().all(|a| a.check(&problem, m).is_none());
            for &m in &matchings {
                if satisfies(m) {
                    if let Report::Fail(violation) = is_stable(market, &problem.profile, &rules, m)? {
                        return Ok(Some(LemmaWitness::Unstable {
                            profile: k,
                            matching: m,
                            violation,
                        }));
                    }
                }
            }
            let outcome = run_da(market, &problem.profile, &rules)?.matching;
            Ok(axioms.iter().find_map(|a| a.check(&problem, outcome)).map(|witness| LemmaWitness::DaViolates {
                profile: k,
                matching: outcome,
                witness,
            }))
        })
        .collect();
    for r in per_profile {
        if let Some(w) = r? {
            return Ok(Report::Fail(w));
        }
    }
    Ok(Report::Pass)
}

/// A stable-matching selector that differs from DA, and its
/// strategy-proofness report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SelectorSample {
    pub market: usize,
    /// First profile index where the selector departs from DA.
    pub differs_at: usize,
    #[serde(skip)]
    pub report: Report<ManipulationWitness>,
}

/// Draws `count` rules, each picking a stable matching at every profile and
/// departing from DA somewhere, cycling through the markets that admit such
/// a rule. Each is checked for strategy-proofness.
pub fn sample_stable_selectors(
    markets: &[Market],
    kind: RuleKind,
    count: usize,
    seed: u64,
    guards: &Guards,
) -> Result<Vec<SelectorSample>, EngineError> {
    struct Prepared {
        index: usize,
        space: ProfileSpace,
        stable: Vec<Vec<ContractSet>>,
        da: Vec<ContractSet>,
        /// Profiles with a stable matching other than DA's.
        open: Vec<usize>,
    }
    let mut prepared = Vec::new();
    for (index, market) in markets.iter().enumerate() {
        let rules = build_rules(market, kind)?;
        let space = ProfileSpace::new(market, guards)?;
        let da = outcome_table(&DaRule::new(rules.clone()), market, &space)?;
        let stable = (0..space.len())
            .into_par_iter()
            .map(|k| enumerate_stable(market, &space.profile(k), &rules, guards))
            .collect::<Result<Vec<_>, _>>()?;
        let open: Vec<usize> = (0..space.len()).filter(|&k| stable[k].iter().any(|&m| m != da[k])).collect();
        if !open.is_empty() {
            prepared.push(Prepared {
                index,
                space,
                stable,
                da,
                open,
            });
        }
    }
    if prepared.is_empty() {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for n in 0..count {
        let p = &prepared[n % prepared.len()];
        let market = &markets[p.index];
        let mut table: Vec<ContractSet> = p
            .stable
            .iter()
            .map(|ms| *ms.choose(&mut rng).expect("DA outcome is stable"))
            .collect();
        if table == p.da {
            let k = p.open[rng.gen_range(0..p.open.len())];
            let others: Vec<ContractSet> = p.stable[k].iter().copied().filter(|&m| m != p.da[k]).collect();
            table[k] = *others.choose(&mut rng).expect("open profile");
        }
        let differs_at = (0..table.len()).find(|&k| table[k] != p.da[k]).expect("selector departs from DA");
        out.push(SelectorSample {
            market: p.index,
            differs_at,
            report: strategy_proofness_of_table(market, &p.space, &table),
        });
    }
    Ok(out)
}

/// One named check of the strengthening counterexample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Assertion {
    pub name: &'static str,
    pub holds: bool,
    pub detail: String,
}

/// Builds the two-contract market where `φ_i` admits both `{x}` and `∅` at
/// `{x}`, and checks the five claims that together refute the strengthened
/// characterization: `C_i` satisfies `φ_i`; `φ_i` alone does not pin down
/// `C_i`; `C_i` is the only selection from `φ_i` with path independence and
/// size monotonicity; the rule giving `a` its contract only when both agents
/// apply satisfies individual rationality, strategy-proofness and the
/// extension of `φ_i`; and that rule is not DA.
pub fn strengthening_counterexample(guards: &Guards) -> Result<Vec<Assertion>, EngineError> {
    let problem = fixtures::two_contract();
    let market = &problem.market;
    let i = InstitutionId(0);
    let (x, y) = (ContractId(0), ContractId(1));
    let sx = ContractSet::singleton(x);
    let sy = ContractSet::singleton(y);
    let xy = sx | sy;
    let ground = market.institution_contracts(i);

    let table: BTreeMap<ContractSet, Vec<ContractSet>> = [
        (ContractSet::EMPTY, vec![ContractSet::EMPTY]),
        (sx, vec![sx, ContractSet::EMPTY]),
        (sy, vec![ContractSet::EMPTY]),
        (xy, vec![sx]),
    ]
    .into_iter()
    .collect();
    let phi = Arc::new(TableAxiom::new("phi", i, ground, table));
    let by_mask = |t: [ContractSet; 4]| Tabulated::new("selection", ground, t.to_vec());
    let c_i = by_mask([ContractSet::EMPTY, sx, ContractSet::EMPTY, sx])?;
    let mut out = Vec::new();

    let satisfied = crate::axioms::satisfies_punctual(&c_i, phi.as_ref(), guards)?;
    out.push(Assertion {
        name: "choice-rule-satisfies-axiom",
        holds: satisfied.is_pass(),
        detail: match satisfied.witness() {
            None => "C_i selects an allowed set at every subset".to_owned(),
            Some(w) => format!("violated: {w}"),
        },
    });

    let shared: Vec<SharedAxiom> = vec![phi.clone()];
    let verdict = verify_characterization(&shared, &c_i, guards)?;
    out.push(Assertion {
        name: "axiom-does-not-characterize",
        holds: matches!(&verdict, Characterization::NotUnique { set, .. } if *set == sx),
        detail: match &verdict {
            Characterization::NotUnique { set, allowed, .. } => format!(
                "at {} the axiom allows {}",
                crate::display_set(market, *set),
                allowed.iter().map(|a| crate::display_set(market, *a).to_string()).collect::<Vec<_>>().join(" and ")
            ),
            other => format!("unexpected verdict {other:?}"),
        },
    });

    // Every selection from φ_i, as a table indexed by subset mask.
    let mut survivors = Vec::new();
    for at_x in phi.allowed(sx) {
        let rule = by_mask([ContractSet::EMPTY, *at_x, ContractSet::EMPTY, sx])?;
        if check_path_independence(&rule, guards)?.is_pass() && check_size_monotonicity(&rule, guards)?.is_pass() {
            survivors.push(*at_x);
        }
    }
    out.push(Assertion {
        name: "unique-path-independent-selection",
        holds: survivors == vec![sx],
        detail: format!(
            "selections at {} passing both: {}",
            crate::display_set(market, sx),
            survivors.iter().map(|a| crate::display_set(market, *a).to_string()).collect::<Vec<_>>().join(", ")
        ),
    });

    let rule = FnMatchingRule::new("both-apply", move |_: &Market, prof: &Profile| {
        if prof.get(AgentId(0)).is_acceptable(x) && prof.get(AgentId(1)).is_acceptable(y) {
            sx
        } else {
            ContractSet::EMPTY
        }
    });
    let extended = extend(phi);
    let forward = verify_forward_with(market, &rule, &[&IndividualRationality, &extended], guards)?;
    out.push(Assertion {
        name: "rule-satisfies-ir-sp-and-extension",
        holds: forward.is_pass(),
        detail: match forward.witness() {
            None => "checked on every preference profile".to_owned(),
            Some(w) => format!("violated: {w:?}"),
        },
    });

    let c_shared: SharedRule = Arc::new(c_i);
    let da = DaRule::new(vec![c_shared]);
    let profile = Profile::new(vec![
        crate::Preference::from_acceptable(&[x], market.agent_contracts(AgentId(0))),
        crate::Preference::from_acceptable(&[], market.agent_contracts(AgentId(1))),
    ]);
    let da_a = market.assignment(da.outcome(market, &profile)?, AgentId(0));
    let rule_a = market.assignment(rule.outcome(market, &profile)?, AgentId(0));
    out.push(Assertion {
        name: "rule-differs-from-da",
        holds: da_a == Some(x) && rule_a.is_none(),
        detail: {
            let show = |c: Option<ContractId>| c.map_or("nothing".to_owned(), |c| market.contract_name(c));
            format!("when only a applies, DA gives a {} and the rule gives a {}", show(da_a), show(rule_a))
        },
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axioms::{builtin_axiom, AxiomName};
    use crate::choice::Responsive;
    use crate::instance::load_instance;

    #[test]
    fn e3_chile_characterized() {
        let p = fixtures::e3();
        let v = verify_institution(&p.market, InstitutionId(0), AxiomSet::Chile, &Guards::default()).unwrap();
        assert_eq!(v, Characterization::Characterized);
    }

    #[test]
    fn e3_greedy_and_objectives_characterized() {
        let p = fixtures::e3();
        for set in [AxiomSet::Greedy, AxiomSet::MatroidObjectives, AxiomSet::Responsive] {
            let v = verify_institution(&p.market, InstitutionId(0), set, &Guards::default()).unwrap();
            assert!(v.is_characterized(), "{}: {v:?}", set.name());
        }
    }

    #[test]
    fn non_wastefulness_alone_is_not_unique() {
        let p = load_instance(fixtures::TWO_CONTRACT_JSON.as_bytes()).unwrap();
        let i = InstitutionId(0);
        let nw = builtin_axiom(&p.market, i, AxiomName::NonWastefulness).unwrap();
        let target = Responsive::new(
            p.market.institution_contracts(i),
            1,
            p.market.institution(i).priority.clone(),
        );
        let v = verify_characterization(&[nw], &target, &Guards::default()).unwrap();
        let xy = ContractSet::first(2);
        assert_eq!(
            v,
            Characterization::NotUnique {
                set: xy,
                allowed: vec![ContractSet::singleton(ContractId(0)), ContractSet::singleton(ContractId(1))],
                target: ContractSet::singleton(ContractId(0)),
            }
        );
    }

    #[test]
    fn incompatible_takes_precedence() {
        let p = fixtures::two_contract();
        let i = InstitutionId(0);
        let ground = p.market.institution_contracts(i);
        let nothing = Arc::new(TableAxiom::new(
            "nothing-at-xy",
            i,
            ground,
            [
                (ContractSet::EMPTY, vec![ContractSet::EMPTY]),
                (ContractSet::singleton(ContractId(0)), vec![ContractSet::EMPTY, ContractSet::singleton(ContractId(0))]),
                (ContractSet::singleton(ContractId(1)), vec![ContractSet::EMPTY]),
            ]
            .into_iter()
            .collect(),
        ));
        let target = Responsive::new(ground, 1, p.market.institution(i).priority.clone());
        let v = verify_characterization(&[nothing], &target, &Guards::default()).unwrap();
        assert_eq!(v, Characterization::Incompatible { set: ground });
    }

    #[test]
    fn forward_and_lemma_chain_on_e4_and_e3() {
        let g = Guards::default();
        let e4 = fixtures::e4();
        assert!(verify_forward(&e4.market, RuleKind::Responsive, &g).unwrap().is_pass());
        assert!(verify_lemma_chain(&e4.market, RuleKind::Responsive, &g).unwrap().is_pass());
        let e3 = fixtures::e3();
        for kind in [RuleKind::GuaranteedEnrollment, RuleKind::Matroid, RuleKind::Responsive] {
            assert!(verify_forward(&e3.market, kind, &g).unwrap().is_pass(), "{kind}");
            assert!(verify_lemma_chain(&e3.market, kind, &g).unwrap().is_pass(), "{kind}");
        }
    }

    #[test]
    fn selectors_on_e4_fail() {
        let e4 = fixtures::e4();
        let samples = sample_stable_selectors(&[e4.market], RuleKind::Responsive, 10, 1, &Guards::default()).unwrap();
        assert_eq!(samples.len(), 10);
        assert!(samples.iter().all(|s| !s.report.is_pass()));
    }

    #[test]
    fn strengthening_assertions_hold() {
        let checks = strengthening_counterexample(&Guards::default()).unwrap();
        assert_eq!(checks.len(), 5);
        for c in &checks {
            assert!(c.holds, "{}: {}", c.name, c.detail);
        }
    }
}
