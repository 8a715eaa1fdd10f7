//! Matching axioms: extensions of punctual axioms through the demand set,
//! and direct checkers written out clause by clause.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{builtin_axioms, AxiomError, AxiomName, InstitutionData, SharedAxiom};
use crate::engine::profiles::ProfileSpace;
use crate::model::{all_matchings, demand, matching_count, ContractId, ContractSet, InstitutionId, Market, Problem};
use crate::{Guards, Report};

/// A concrete certificate that a matching fails an axiom.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MatchingWitness {
    pub axiom: String,
    /// `None` for agent-side axioms.
    pub institution: Option<usize>,
    pub contracts: Vec<ContractId>,
}

impl MatchingWitness {
    fn new(axiom: &str, institution: Option<InstitutionId>, contracts: &[ContractId]) -> Self {
        MatchingWitness {
            axiom: axiom.to_owned(),
            institution: institution.map(|i| i.0),
            contracts: contracts.to_vec(),
        }
    }
}

/// A requirement on matchings at a preference profile.
pub trait MatchingAxiom: Send + Sync {
    fn name(&self) -> &str;

    /// The first violation in (institution, contract) order, if any.
    /// `matching` must be a matching of `problem.market`.
    fn check(&self, problem: &Problem, matching: ContractSet) -> Option<MatchingWitness>;
}

/// `X_i ∈ φ_i(D_i(X))` for every institution `i` with an axiom in the family.
pub struct Extended {
    name: String,
    axioms: Vec<SharedAxiom>,
}

impl Extended {
    pub fn new(name: impl Into<String>, mut axioms: Vec<SharedAxiom>) -> Self {
        axioms.sort_by_key(|a| a.institution());
        Extended {
            name: name.into(),
            axioms,
        }
    }
}

/// The extension of a single institution's axiom.
pub fn extend(axiom: SharedAxiom) -> Extended {
    Extended::new(axiom.name().to_owned(), vec![axiom])
}

impl MatchingAxiom for Extended {
    fn name(&self) -> &str {
        &self.name
    }

    fn check(&self, problem: &Problem, matching: ContractSet) -> Option<MatchingWitness> {
        self.axioms.iter().find_map(|ax| {
            let i = ax.institution();
            let d = demand(&problem.market, &problem.profile, matching, i);
            let xi = matching & problem.market.institution_contracts(i);
            (!ax.member(d, xi)).then(|| MatchingWitness::new(ax.name(), Some(i), &xi.iter().collect::<Vec<_>>()))
        })
    }
}

/// Every assigned contract is acceptable to its agent.
pub struct IndividualRationality;

impl MatchingAxiom for IndividualRationality {
    fn name(&self) -> &str {
        "individual-rationality"
    }

    fn check(&self, problem: &Problem, matching: ContractSet) -> Option<MatchingWitness> {
        matching
            .iter()
            .find(|&x| !problem.profile.get(problem.market.agent_of(x)).is_acceptable(x))
            .map(|x| MatchingWitness::new(self.name(), None, &[x]))
    }
}

/// A matching axiom checked directly from its definition, for every
/// institution.
pub struct DirectAxiom {
    axiom: AxiomName,
    institutions: Vec<Arc<InstitutionData>>,
}

pub fn direct_axiom(market: &Market, axiom: AxiomName) -> Result<DirectAxiom, AxiomError> {
    let institutions = market
        .institutions()
        .map(|i| {
            let data = InstitutionData::new(market, i)?;
            if axiom.uses_reserves() {
                data.reserve_for(axiom)?;
            }
            Ok(Arc::new(data))
        })
        .collect::<Result<_, AxiomError>>()?;
    Ok(DirectAxiom { axiom, institutions })
}

/// The direct checker of every built-in axiom the market has data for, after
/// individual rationality.
pub fn matching_axiom_library(market: &Market) -> Vec<Box<dyn MatchingAxiom>> {
    let mut out: Vec<Box<dyn MatchingAxiom>> = vec![Box::new(IndividualRationality)];
    out.extend(
        AxiomName::ALL
            .into_iter()
            .filter_map(|a| direct_axiom(market, a).ok())
            .map(|d| Box::new(d) as Box<dyn MatchingAxiom>),
    );
    out
}

impl DirectAxiom {
    fn check_at(&self, problem: &Problem, matching: ContractSet, d: &InstitutionData) -> Option<MatchingWitness> {
        let market = &problem.market;
        let i = d.institution;
        let xi = matching & d.ground;
        let q = d.capacity;
        // Contracts of i whose agent strictly prefers them to the matching.
        let envious: Vec<ContractId> = d
            .ground
            .iter()
            .filter(|&x| {
                let a = market.agent_of(x);
                problem.profile.get(a).prefers(Some(x), market.assignment(matching, a))
            })
            .collect();
        let witness = |cs: &[ContractId]| Some(MatchingWitness::new(self.axiom.name(), Some(i), cs));
        let r = |s: ContractSet| match self.axiom {
            AxiomName::MaximalUtilization | AxiomName::NoJustifiedEnvyReserves => {
                d.reserve.as_ref().expect("checked at construction").rank_unchecked(s)
            }
            _ => d.objective.rank_unchecked(s),
        };
        match self.axiom {
            AxiomName::NonWastefulness => {
                if xi.len() > q {
                    return witness(&xi.iter().collect::<Vec<_>>());
                }
                if xi.len() < q {
                    if let Some(&x) = envious.first() {
                        return witness(&[x]);
                    }
                }
                None
            }
            AxiomName::NoJustifiedEnvy => envious.iter().find_map(|&x| {
                xi.iter()
                    .find(|&y| d.priority.prefers(x, y))
                    .and_then(|y| witness(&[x, y]))
            }),
            AxiomName::GuaranteedEnrollment => (d.returning - xi).iter().find_map(|x| {
                let a = market.agent_of(x);
                let better = problem.profile.get(a).prefers(market.assignment(matching, a), Some(x));
                if better {
                    None
                } else {
                    witness(&[x])
                }
            }),
            AxiomName::MaximalUtilization => {
                let rx = r(xi);
                envious.iter().find_map(|&x| {
                    if xi.len() < q && r(xi.with(x)) != rx {
                        return witness(&[x]);
                    }
                    if xi.len() == q {
                        if let Some(y) = (xi - d.returning).iter().find(|&y| r(xi.without(y).with(x)) > rx) {
                            return witness(&[x, y]);
                        }
                    }
                    None
                })
            }
            AxiomName::NoJustifiedEnvyReserves => {
                let rx = r(xi);
                envious.iter().find_map(|&x| {
                    (xi - d.returning)
                        .iter()
                        .find(|&y| d.priority.prefers(x, y) && r(xi.without(y).with(x)) >= rx)
                        .and_then(|y| witness(&[x, y]))
                })
            }
            AxiomName::Feasibility => {
                if d.objective.independent_unchecked(xi) {
                    None
                } else {
                    witness(&xi.iter().collect::<Vec<_>>())
                }
            }
            AxiomName::RankMaximality | AxiomName::MatroidalObjectives => {
                let rx = r(xi);
                envious.iter().find(|&&x| r(xi.with(x)) != rx).and_then(|&x| witness(&[x]))
            }
            AxiomName::NoJustifiedEnvyRank => {
                let rx = r(xi);
                envious.iter().find_map(|&y| {
                    xi.iter()
                        .find(|&x| d.priority.prefers(y, x) && r(xi.without(x).with(y)) >= rx)
                        .and_then(|x| witness(&[y, x]))
                })
            }
        }
    }
}

impl MatchingAxiom for DirectAxiom {
    fn name(&self) -> &str {
        self.axiom.name()
    }

    fn check(&self, problem: &Problem, matching: ContractSet) -> Option<MatchingWitness> {
        self.institutions
            .iter()
            .find_map(|d| self.check_at(problem, matching, d))
    }
}

/// A (profile, matching) pair where an extension and its direct checker
/// disagree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EquivalenceWitness {
    pub axiom: String,
    pub market: usize,
    pub profile: usize,
    pub matching: ContractSet,
    pub extension_holds: bool,
    pub direct_holds: bool,
}

/// Compares the extension of `axiom` (at every institution) with its direct
/// checker on every profile and every matching of every market.
pub fn verify_extension_equivalence(
    axiom: AxiomName,
    markets: &[Market],
    guards: &Guards,
) -> Result<Report<EquivalenceWitness>, AxiomError> {
    for (k, market) in markets.iter().enumerate() {
        guards.check_profiles("matching count", matching_count(market))?;
        let space = ProfileSpace::new(market, guards)?;
        let punctual = market
            .institutions()
            .map(|i| builtin_axioms(market, i, &[axiom]))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .flatten()
            .collect();
        let extended = Extended::new(axiom.name(), punctual);
        let direct = direct_axiom(market, axiom)?;
        let matchings = all_matchings(market);
        let witness = (0..space.len()).into_par_iter().find_map_first(|p| {
            let problem = Problem {
                market: market.clone(),
                profile: space.profile(p),
            };
            matchings.iter().find_map(|&m| {
                let e = extended.check(&problem, m).is_none();
                let d = direct.check(&problem, m).is_none();
                (e != d).then(|| EquivalenceWitness {
                    axiom: axiom.name().to_owned(),
                    market: k,
                    profile: p,
                    matching: m,
                    extension_holds: e,
                    direct_holds: d,
                })
            })
        });
        if let Some(w) = witness {
            return Ok(Report::Fail(w));
        }
    }
    Ok(Report::Pass)
}
