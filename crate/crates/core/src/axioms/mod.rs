//! Punctual choice axioms as membership predicates `Y ∈ φ(X)`, and their
//! extension to matchings through the demand set.

mod matching;

pub use matching::{
    direct_axiom, extend, matching_axiom_library, verify_extension_equivalence, DirectAxiom, EquivalenceWitness,
    Extended, IndividualRationality, MatchingAxiom, MatchingWitness,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::choice::{objective_oracle, ChoiceRule, RuleKind};
use crate::matroid::{MatroidError, RankOracle};
use crate::model::{ContractSet, Ground, InstitutionId, Market, Priority};
use crate::{GuardError, Guards, Report};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AxiomError {
    #[error(transparent)]
    Guard(#[from] GuardError),
    #[error(transparent)]
    Matroid(#[from] MatroidError),
    #[error("{axiom} needs {what} at institution {institution:?}")]
    MissingData {
        axiom: &'static str,
        institution: String,
        what: &'static str,
    },
    #[error("unknown axiom or axiom set {0:?}")]
    Unknown(String),
}

/// A choice axiom given by its correspondence `φ`.
pub trait PunctualAxiom: Send + Sync {
    fn name(&self) -> &str;

    fn institution(&self) -> InstitutionId;

    fn ground(&self) -> ContractSet;

    /// `Y ∈ φ(X)`. Callers guarantee `Y ⊆ X ⊆ ground()`.
    fn member(&self, problem: ContractSet, candidate: ContractSet) -> bool;
}

pub type SharedAxiom = Arc<dyn PunctualAxiom>;

/// The built-in axioms, by their command-line names.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxiomName {
    NonWastefulness,
    NoJustifiedEnvy,
    GuaranteedEnrollment,
    MaximalUtilization,
    NoJustifiedEnvyReserves,
    Feasibility,
    RankMaximality,
    NoJustifiedEnvyRank,
    MatroidalObjectives,
}

impl AxiomName {
    pub const ALL: [AxiomName; 9] = [
        AxiomName::NonWastefulness,
        AxiomName::NoJustifiedEnvy,
        AxiomName::GuaranteedEnrollment,
        AxiomName::MaximalUtilization,
        AxiomName::NoJustifiedEnvyReserves,
        AxiomName::Feasibility,
        AxiomName::RankMaximality,
        AxiomName::NoJustifiedEnvyRank,
        AxiomName::MatroidalObjectives,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AxiomName::NonWastefulness => "non-wastefulness",
            AxiomName::NoJustifiedEnvy => "no-justified-envy",
            AxiomName::GuaranteedEnrollment => "guaranteed-enrollment",
            AxiomName::MaximalUtilization => "maximal-utilization",
            AxiomName::NoJustifiedEnvyReserves => "no-justified-envy-reserves",
            AxiomName::Feasibility => "feasibility",
            AxiomName::RankMaximality => "rank-maximality",
            AxiomName::NoJustifiedEnvyRank => "no-justified-envy-rank",
            AxiomName::MatroidalObjectives => "matroidal-objectives",
        }
    }

    /// The axiom's name in prose, for text reports.
    pub fn title(self) -> &'static str {
        match self {
            AxiomName::NonWastefulness => "non-wastefulness",
            AxiomName::NoJustifiedEnvy => "no justified envy",
            AxiomName::GuaranteedEnrollment => "guaranteed enrollment for returning students",
            AxiomName::MaximalUtilization => "maximal utilization of reservations",
            AxiomName::NoJustifiedEnvyReserves => "no justified envy under reserves",
            AxiomName::Feasibility => "feasibility",
            AxiomName::RankMaximality => "rank maximality",
            AxiomName::NoJustifiedEnvyRank => "no justified envy under rank",
            AxiomName::MatroidalObjectives => "matroidal objectives",
        }
    }

    /// Whether the axiom reads the reserve matroid.
    fn uses_reserves(self) -> bool {
        matches!(self, AxiomName::MaximalUtilization | AxiomName::NoJustifiedEnvyReserves)
    }
}

impl fmt::Display for AxiomName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AxiomName {
    type Err = AxiomError;

    fn from_str(s: &str) -> Result<Self, AxiomError> {
        AxiomName::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| AxiomError::Unknown(s.to_owned()))
    }
}

/// Named axiom sets, each characterizing one designed rule.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum AxiomSet {
    Responsive,
    Chile,
    Greedy,
    MatroidObjectives,
}

impl AxiomSet {
    pub const ALL: [AxiomSet; 4] = [
        AxiomSet::Responsive,
        AxiomSet::Chile,
        AxiomSet::Greedy,
        AxiomSet::MatroidObjectives,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AxiomSet::Responsive => "responsive",
            AxiomSet::Chile => "chile",
            AxiomSet::Greedy => "greedy",
            AxiomSet::MatroidObjectives => "matroid-objectives",
        }
    }

    pub fn members(self) -> &'static [AxiomName] {
        use AxiomName::*;
        match self {
            AxiomSet::Responsive => &[NonWastefulness, NoJustifiedEnvy],
            AxiomSet::Chile => &[GuaranteedEnrollment, MaximalUtilization, NoJustifiedEnvyReserves, NonWastefulness],
            AxiomSet::Greedy => &[Feasibility, RankMaximality, NoJustifiedEnvyRank],
            AxiomSet::MatroidObjectives => &[MatroidalObjectives, NoJustifiedEnvyRank, NonWastefulness],
        }
    }

    /// The rule the set characterizes.
    pub fn target(self) -> RuleKind {
        match self {
            AxiomSet::Responsive => RuleKind::Responsive,
            AxiomSet::Chile => RuleKind::GuaranteedEnrollment,
            AxiomSet::Greedy => RuleKind::Greedy,
            AxiomSet::MatroidObjectives => RuleKind::Matroid,
        }
    }

    pub fn for_rule(kind: RuleKind) -> AxiomSet {
        match kind {
            RuleKind::Responsive => AxiomSet::Responsive,
            RuleKind::GuaranteedEnrollment => AxiomSet::Chile,
            RuleKind::Greedy => AxiomSet::Greedy,
            RuleKind::Matroid => AxiomSet::MatroidObjectives,
        }
    }
}

/// Parses a comma-separated list of axiom names and set names.
pub fn parse_axiom_list(s: &str) -> Result<Vec<AxiomName>, AxiomError> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let names: Vec<AxiomName> = match AxiomSet::ALL.into_iter().find(|set| set.name() == part) {
            Some(set) => set.members().to_vec(),
            None => vec![part.parse()?],
        };
        for n in names {
            if !out.contains(&n) {
                out.push(n);
            }
        }
    }
    Ok(out)
}

/// Institution data the built-in axioms read.
#[derive(Clone, Debug)]
pub struct InstitutionData {
    pub institution: InstitutionId,
    pub name: String,
    pub ground: ContractSet,
    pub capacity: usize,
    pub priority: Priority,
    pub returning: ContractSet,
    /// The reserve matroid; `None` when no reserves are declared.
    pub reserve: Option<RankOracle>,
    /// The matroid of the greedy and matroid rules.
    pub objective: RankOracle,
}

impl InstitutionData {
    pub fn new(market: &Market, i: InstitutionId) -> Result<Self, AxiomError> {
        let spec = market.institution(i);
        let ground = market.institution_contracts(i);
        let reserve = match spec.reserves {
            Some(_) => Some(spec.reserve_oracle(ground)?.with_memo()),
            None => None,
        };
        Ok(InstitutionData {
            institution: i,
            name: spec.name.clone(),
            ground,
            capacity: spec.capacity,
            priority: spec.priority.clone(),
            returning: spec.returning,
            reserve,
            objective: objective_oracle(market, i)?.with_memo(),
        })
    }

    fn reserve_for(&self, axiom: AxiomName) -> Result<&RankOracle, AxiomError> {
        self.reserve.as_ref().ok_or_else(|| AxiomError::MissingData {
            axiom: axiom.name(),
            institution: self.name.clone(),
            what: "reserves",
        })
    }

    /// The rank function `axiom` is stated in terms of.
    fn rank_for(&self, axiom: AxiomName) -> Result<&RankOracle, AxiomError> {
        if axiom.uses_reserves() {
            self.reserve_for(axiom)
        } else {
            Ok(&self.objective)
        }
    }
}

/// One of the built-in correspondences at one institution.
#[derive(Clone, Debug)]
pub struct Builtin {
    axiom: AxiomName,
    data: Arc<InstitutionData>,
    rank: Option<RankOracle>,
}

impl Builtin {
    pub fn new(axiom: AxiomName, data: Arc<InstitutionData>) -> Result<Self, AxiomError> {
        let rank = match axiom {
            AxiomName::NonWastefulness | AxiomName::NoJustifiedEnvy | AxiomName::GuaranteedEnrollment => None,
            _ => Some(data.rank_for(axiom)?.clone()),
        };
        Ok(Builtin { axiom, data, rank })
    }

    pub fn axiom(&self) -> AxiomName {
        self.axiom
    }

    fn r(&self, s: ContractSet) -> usize {
        self.rank.as_ref().expect("rank-based axiom").rank_unchecked(s)
    }
}

impl PunctualAxiom for Builtin {
    fn name(&self) -> &str {
        self.axiom.name()
    }

    fn institution(&self) -> InstitutionId {
        self.data.institution
    }

    fn ground(&self) -> ContractSet {
        self.data.ground
    }

    fn member(&self, x: ContractSet, y: ContractSet) -> bool {
        let d = &*self.data;
        let q = d.capacity;
        let rejected = x - y;
        match self.axiom {
            AxiomName::NonWastefulness => y.len() == x.len().min(q),
            AxiomName::NoJustifiedEnvy => y
                .iter()
                .all(|c| rejected.iter().all(|z| d.priority.prefers(c, z))),
            AxiomName::GuaranteedEnrollment => (x & d.returning).is_subset_of(y),
            // Both clauses are implications on |Y|; neither applies above
            // capacity.
            AxiomName::MaximalUtilization => {
                let ry = self.r(y);
                if y.len() < q {
                    rejected.iter().all(|c| self.r(y.with(c)) == ry)
                } else if y.len() == q {
                    rejected
                        .iter()
                        .all(|c| (y - d.returning).iter().all(|z| self.r(y.without(z).with(c)) <= ry))
                } else {
                    true
                }
            }
            AxiomName::NoJustifiedEnvyReserves => {
                let ry = self.r(y);
                (y - d.returning).iter().all(|c| {
                    rejected
                        .iter()
                        .all(|z| !d.priority.prefers(z, c) || self.r(y.without(c).with(z)) < ry)
                })
            }
            AxiomName::Feasibility => self.rank.as_ref().expect("rank-based axiom").independent_unchecked(y),
            AxiomName::RankMaximality | AxiomName::MatroidalObjectives => self.r(y) == self.r(x),
            AxiomName::NoJustifiedEnvyRank => {
                let ry = self.r(y);
                y.iter().all(|c| {
                    rejected
                        .iter()
                        .all(|z| !d.priority.prefers(z, c) || self.r(y.without(c).with(z)) < ry)
                })
            }
        }
    }
}

pub fn builtin_axiom(market: &Market, i: InstitutionId, axiom: AxiomName) -> Result<SharedAxiom, AxiomError> {
    let data = Arc::new(InstitutionData::new(market, i)?);
    Ok(Arc::new(Builtin::new(axiom, data)?))
}

/// The named axioms at institution `i`, sharing one copy of its data.
pub fn builtin_axioms(market: &Market, i: InstitutionId, names: &[AxiomName]) -> Result<Vec<SharedAxiom>, AxiomError> {
    let data = Arc::new(InstitutionData::new(market, i)?);
    names
        .iter()
        .map(|&n| Ok(Arc::new(Builtin::new(n, Arc::clone(&data))?) as SharedAxiom))
        .collect()
}

/// An axiom given by listing `φ(X)` for every `X`. Problems without an entry
/// allow nothing.
#[derive(Clone, Debug)]
pub struct TableAxiom {
    name: String,
    institution: InstitutionId,
    ground: ContractSet,
    allowed: BTreeMap<ContractSet, Vec<ContractSet>>,
}

impl TableAxiom {
    pub fn new(
        name: impl Into<String>,
        institution: InstitutionId,
        ground: ContractSet,
        allowed: BTreeMap<ContractSet, Vec<ContractSet>>,
    ) -> Self {
        TableAxiom {
            name: name.into(),
            institution,
            ground,
            allowed,
        }
    }

    pub fn allowed(&self, problem: ContractSet) -> &[ContractSet] {
        self.allowed.get(&problem).map_or(&[], Vec::as_slice)
    }
}

impl PunctualAxiom for TableAxiom {
    fn name(&self) -> &str {
        &self.name
    }

    fn institution(&self) -> InstitutionId {
        self.institution
    }

    fn ground(&self) -> ContractSet {
        self.ground
    }

    fn member(&self, problem: ContractSet, candidate: ContractSet) -> bool {
        self.allowed(problem).contains(&candidate)
    }
}

/// A problem where a rule's choice falls outside the axiom's correspondence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PunctualViolation {
    pub axiom: String,
    pub set: ContractSet,
    pub chosen: ContractSet,
}

impl fmt::Display for PunctualViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: C({:?}) = {:?} is not allowed", self.axiom, self.set, self.chosen)
    }
}

/// `C(X) ∈ φ(X)` for every `X ⊆ ground`; the witness is the first failing
/// `X` in ascending subset order.
pub fn satisfies_punctual(
    rule: &dyn ChoiceRule,
    axiom: &dyn PunctualAxiom,
    guards: &Guards,
) -> Result<Report<PunctualViolation>, AxiomError> {
    let ground = Ground::new(axiom.ground());
    guards.check_tabulation(ground.len())?;
    let witness = axiom.ground().subsets().find_map(|set| {
        let chosen = rule.choose(set);
        let ok = chosen.is_subset_of(set) && axiom.member(set, chosen);
        (!ok).then(|| PunctualViolation {
            axiom: axiom.name().to_owned(),
            set,
            chosen,
        })
    });
    Ok(Report::from_witness(witness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::{build_rule, combine, FnRule, Responsive, Tabulated};
    use crate::fixtures;
    use crate::instance::load_instance;
    use crate::ContractId;

    fn ids(v: &[usize]) -> ContractSet {
        v.iter().map(|&c| ContractId(c)).collect()
    }

    /// Two agents at one institution with capacity `q`, priority 0 ≻ 1.
    fn pair_market(q: usize) -> Market {
        let json = format!(
            r#"{{"contracts": [{{"id": 0, "agent": "x", "institution": "i"}}, {{"id": 1, "agent": "y", "institution": "i"}}],
                "institutions": {{"i": {{"capacity": {q}, "priority": [0, 1], "returning": []}}}}}}"#
        );
        load_instance(json.as_bytes()).unwrap().market
    }

    #[test]
    fn nw_and_ne_membership() {
        let m = pair_market(1);
        let nw = builtin_axiom(&m, InstitutionId(0), AxiomName::NonWastefulness).unwrap();
        assert!(nw.member(ids(&[0, 1]), ids(&[0])));
        assert!(!nw.member(ids(&[0, 1]), ids(&[])));
        let ne = builtin_axiom(&m, InstitutionId(0), AxiomName::NoJustifiedEnvy).unwrap();
        assert!(!ne.member(ids(&[0, 1]), ids(&[1])));
        assert!(ne.member(ids(&[0, 1]), ids(&[0])));
    }

    #[test]
    fn responsive_satisfies_nw_and_ne() {
        let m = pair_market(1);
        let g = Guards::default();
        let rule = build_rule(&m, InstitutionId(0), RuleKind::Responsive).unwrap();
        for name in [AxiomName::NonWastefulness, AxiomName::NoJustifiedEnvy] {
            let ax = builtin_axiom(&m, InstitutionId(0), name).unwrap();
            assert!(satisfies_punctual(&*rule, &*ax, &g).unwrap().is_pass());
        }
        let empty = FnRule::new("empty", m.institution_contracts(InstitutionId(0)), |_| ContractSet::EMPTY);
        let nw = builtin_axiom(&m, InstitutionId(0), AxiomName::NonWastefulness).unwrap();
        let report = satisfies_punctual(&empty, &*nw, &g).unwrap();
        assert_eq!(report.witness().unwrap().set, ids(&[0]));
    }

    #[test]
    fn chile_axioms_need_reserves() {
        let m = pair_market(1);
        assert!(matches!(
            builtin_axiom(&m, InstitutionId(0), AxiomName::MaximalUtilization),
            Err(AxiomError::MissingData { .. })
        ));
    }

    #[test]
    fn e3_axioms_intersect_to_ge() {
        let p = fixtures::e3();
        let i = InstitutionId(0);
        let axioms = builtin_axioms(&p.market, i, AxiomSet::Chile.members()).unwrap();
        let rule = build_rule(&p.market, i, RuleKind::GuaranteedEnrollment).unwrap();
        for x in p.market.institution_contracts(i).subsets() {
            let allowed: Vec<ContractSet> = x.subsets().filter(|&y| axioms.iter().all(|a| a.member(x, y))).collect();
            assert_eq!(allowed, vec![rule.choose(x)], "problem {x:?}");
        }
    }

    #[test]
    fn matroidal_objectives_equals_quantified_form() {
        let p = fixtures::e3();
        let i = InstitutionId(0);
        let mo = builtin_axiom(&p.market, i, AxiomName::MatroidalObjectives).unwrap();
        let r = objective_oracle(&p.market, i).unwrap();
        for x in p.market.institution_contracts(i).subsets() {
            for y in x.subsets() {
                let quantified = x.subsets().all(|z| r.rank(y).unwrap() >= r.rank(z).unwrap());
                assert_eq!(mo.member(x, y), quantified);
            }
        }
    }

    #[test]
    fn axiom_lists_parse() {
        assert_eq!(parse_axiom_list("chile").unwrap(), AxiomSet::Chile.members());
        assert_eq!(
            parse_axiom_list("non-wastefulness, no-justified-envy,non-wastefulness").unwrap(),
            vec![AxiomName::NonWastefulness, AxiomName::NoJustifiedEnvy]
        );
        assert!(parse_axiom_list("envy").is_err());
    }

    #[test]
    fn combination_closure_on_pair() {
        let m = pair_market(1);
        let g = Guards::default();
        let ground = m.institution_contracts(InstitutionId(0));
        let nw = builtin_axiom(&m, InstitutionId(0), AxiomName::NonWastefulness).unwrap();
        let first = Responsive::new(ground, 1, Priority::new(vec![ContractId(0), ContractId(1)]).unwrap());
        let second = Responsive::new(ground, 1, Priority::new(vec![ContractId(1), ContractId(0)]).unwrap());
        for mask in 0..16u64 {
            let c: Tabulated = combine(&first, &second, |s| mask >> s.bits() & 1 == 1, &g).unwrap();
            assert!(satisfies_punctual(&c, &*nw, &g).unwrap().is_pass());
        }
    }
}
