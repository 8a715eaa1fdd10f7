//! JSON instance files: parsing, validation and canonical serialization.
//!
//! ```json
//! {
//!   "contracts": [{"id": 0, "agent": "a", "institution": "i"}],
//!   "preferences": {"a": [0, "null"]},
//!   "institutions": {"i": {"capacity": 1, "priority": [0], "returning": []}}
//! }
//! ```
//!
//! Agents and institutions are identified by name and numbered in ascending
//! name order. A preference lists contracts best first; `"null"` marks the
//! outside option. Contracts missing from a preference are placed below
//! `"null"` in ascending id order, and a list without `"null"` is an
//! acceptable prefix. Agents with no preference entry find nothing
//! acceptable.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::matroid::{MatroidError, MatroidSpec};
use crate::model::{
    AgentId, Contract, ContractId, ContractSet, InstitutionId, InstitutionSpec, Market, Preference, Priority,
    Problem, Profile, MAX_CONTRACTS,
};

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("malformed instance: {0}")]
    Parse(String),
    #[error("contracts: {count} contracts exceed the cap of {MAX_CONTRACTS}")]
    TooManyContracts { count: usize },
    #[error("contracts: id {0} appears more than once")]
    DuplicateId(usize),
    #[error("contracts: ids must be 0..{count} but {id} is out of range")]
    NonDenseIds { id: usize, count: usize },
    #[error("contracts: ({agent}, {institution}, {label:?}) appears more than once")]
    DuplicateTriple {
        agent: String,
        institution: String,
        label: Option<String>,
    },
    #[error("contracts: institution {0:?} is not declared under institutions")]
    MissingInstitution(String),
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("unknown institution {0:?}")]
    UnknownInstitution(String),
    #[error("{field}: contract {id} does not exist or belongs elsewhere")]
    UnknownContract { field: String, id: usize },
    #[error("preferences.{agent}: not a strict order over the agent's contracts and null")]
    PreferenceNotTotal { agent: String },
    #[error("preferences.{agent}: entry {entry:?} is neither a contract id nor \"null\"")]
    BadPreferenceEntry { agent: String, entry: String },
    #[error("institutions.{institution}.priority: {detail}")]
    PriorityNotTotal { institution: String, detail: String },
    #[error("institutions.{institution}.capacity: {value} is negative")]
    NegativeCapacity { institution: String, value: i64 },
    #[error("institutions.{institution}.reserves.{ty}: {value} is negative")]
    NegativeReserve { institution: String, ty: String, value: i64 },
    #[error("institutions.{institution}.returning: {count} returning agents exceed capacity {capacity}")]
    ReturningExceedsCapacity {
        institution: String,
        count: usize,
        capacity: usize,
    },
    #[error("institutions.{institution}.{field}: type {ty:?} is not in the type universe")]
    UnknownType {
        institution: String,
        field: &'static str,
        ty: String,
    },
    #[error("institutions.{institution}: agent {agent:?} has several contracts but onePerAgent is set")]
    MultipleContractsPerPair { institution: String, agent: String },
    #[error("institutions.{institution}.matroid: {source}")]
    Matroid {
        institution: String,
        #[source]
        source: MatroidError,
    },
    #[error("matching: agent {agent:?} holds more than one contract")]
    NotAMatching { agent: String },
}

/// One contract record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractDoc {
    pub id: usize,
    pub agent: String,
    pub institution: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// A preference entry: a contract id or the string `"null"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PrefEntry {
    Contract(usize),
    Null(String),
}

impl PrefEntry {
    pub fn null() -> Self {
        PrefEntry::Null("null".into())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct InstitutionDoc {
    pub capacity: i64,
    pub priority: Vec<usize>,
    pub returning: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub types: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub traits: BTreeMap<usize, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reserves: Option<BTreeMap<String, i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matroid: Option<MatroidSpec>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub one_per_agent: bool,
}

/// The file format, before validation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub contracts: Vec<ContractDoc>,
    #[serde(default)]
    pub preferences: BTreeMap<String, Vec<PrefEntry>>,
    pub institutions: BTreeMap<String, InstitutionDoc>,
}

pub fn load_instance(bytes: &[u8]) -> Result<Problem, InstanceError> {
    let doc: InstanceDoc = serde_json::from_slice(bytes).map_err(|e| InstanceError::Parse(e.to_string()))?;
    doc.into_problem()
}

/// Canonical pretty JSON; `load_instance(save_instance(p)) == p`.
pub fn save_instance(problem: &Problem) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&InstanceDoc::from_problem(problem)).expect("instance serializes");
    out.push(b'\n');
    out
}

impl InstanceDoc {
    pub fn into_problem(self) -> Result<Problem, InstanceError> {
        let market = build_market(&self)?;
        let prefs = market
            .agents()
            .map(|a| {
                let name = market.agent_name(a);
                let entries = self.preferences.get(name).map(Vec::as_slice).unwrap_or(&[]);
                parse_preference(&market, a, entries)
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(unknown) = self.preferences.keys().find(|k| market.agent_by_name(k).is_none()) {
            return Err(InstanceError::UnknownAgent(unknown.clone()));
        }
        Ok(Problem {
            market,
            profile: Profile::new(prefs),
        })
    }

    /// Full preference orders, every institution field that is set.
    pub fn from_problem(problem: &Problem) -> Self {
        let m = &problem.market;
        let contracts = m
            .contracts()
            .iter()
            .map(|c| ContractDoc {
                id: c.id.0,
                agent: m.agent_name(c.agent).to_owned(),
                institution: m.institution(c.institution).name.clone(),
                label: c.label.clone(),
            })
            .collect();
        let preferences = m
            .agents()
            .map(|a| {
                let order = problem
                    .profile
                    .get(a)
                    .order()
                    .iter()
                    .map(|o| o.map_or_else(PrefEntry::null, |c| PrefEntry::Contract(c.0)))
                    .collect();
                (m.agent_name(a).to_owned(), order)
            })
            .collect();
        let institutions = m
            .institutions()
            .map(|i| {
                let s = m.institution(i);
                let doc = InstitutionDoc {
                    capacity: s.capacity as i64,
                    priority: s.priority.order().iter().map(|c| c.0).collect(),
                    returning: s.returning.iter().map(|c| c.0).collect(),
                    types: s.types.clone(),
                    traits: s.traits.iter().map(|(c, t)| (c.0, t.clone())).collect(),
                    reserves: s
                        .reserves
                        .as_ref()
                        .map(|r| r.iter().map(|(t, &n)| (t.clone(), n as i64)).collect()),
                    matroid: s.matroid.clone(),
                    one_per_agent: s.one_per_agent,
                };
                (s.name.clone(), doc)
            })
            .collect();
        InstanceDoc {
            contracts,
            preferences,
            institutions,
        }
    }
}

/// Validates everything except preferences and builds the market.
pub fn build_market(doc: &InstanceDoc) -> Result<Market, InstanceError> {
    let n = doc.contracts.len();
    if n > MAX_CONTRACTS {
        return Err(InstanceError::TooManyContracts { count: n });
    }
    let mut slots: Vec<Option<&ContractDoc>> = vec![None; n];
    for c in &doc.contracts {
        let slot = slots
            .get_mut(c.id)
            .ok_or(InstanceError::NonDenseIds { id: c.id, count: n })?;
        if slot.replace(c).is_some() {
            return Err(InstanceError::DuplicateId(c.id));
        }
    }
    // Every slot is filled: n distinct ids in 0..n.
    let ordered: Vec<&ContractDoc> = slots.into_iter().flatten().collect();

    let mut triples = BTreeSet::new();
    for c in &ordered {
        if !triples.insert((&c.agent, &c.institution, &c.label)) {
            return Err(InstanceError::DuplicateTriple {
                agent: c.agent.clone(),
                institution: c.institution.clone(),
                label: c.label.clone(),
            });
        }
        if !doc.institutions.contains_key(&c.institution) {
            return Err(InstanceError::MissingInstitution(c.institution.clone()));
        }
    }

    let agents: Vec<String> = ordered
        .iter()
        .map(|c| c.agent.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let inst_names: Vec<&String> = doc.institutions.keys().collect();
    let contracts: Vec<Contract> = ordered
        .iter()
        .map(|c| Contract {
            id: ContractId(c.id),
            agent: AgentId(agents.binary_search(&c.agent).expect("agent collected")),
            institution: InstitutionId(inst_names.binary_search(&&c.institution).expect("institution checked")),
            label: c.label.clone(),
        })
        .collect();

    let mut own = vec![ContractSet::EMPTY; inst_names.len()];
    for c in &contracts {
        own[c.institution.0].insert(c.id);
    }
    let institutions = doc
        .institutions
        .iter()
        .zip(&own)
        .map(|((name, idoc), &own)| institution_spec(name, idoc, own, &contracts, &agents))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Market::assemble(agents, institutions, contracts))
}

fn institution_spec(
    name: &str,
    doc: &InstitutionDoc,
    own: ContractSet,
    contracts: &[Contract],
    agents: &[String],
) -> Result<InstitutionSpec, InstanceError> {
    let owned_id = |field: &str, id: usize| {
        let c = ContractId(id);
        if id < MAX_CONTRACTS && own.contains(c) {
            Ok(c)
        } else {
            Err(InstanceError::UnknownContract {
                field: format!("institutions.{name}.{field}"),
                id,
            })
        }
    };

    if doc.capacity < 0 {
        return Err(InstanceError::NegativeCapacity {
            institution: name.into(),
            value: doc.capacity,
        });
    }
    let capacity = doc.capacity as usize;

    let order = doc
        .priority
        .iter()
        .map(|&id| owned_id("priority", id))
        .collect::<Result<Vec<_>, _>>()?;
    let priority = Priority::new(order).ok_or_else(|| InstanceError::PriorityNotTotal {
        institution: name.into(),
        detail: "a contract is listed twice".into(),
    })?;
    if let Some(missing) = (own - priority.covers()).min() {
        return Err(InstanceError::PriorityNotTotal {
            institution: name.into(),
            detail: format!("contract {missing} is not ranked"),
        });
    }

    let returning = doc
        .returning
        .iter()
        .map(|&id| owned_id("returning", id))
        .collect::<Result<ContractSet, _>>()?;
    let returning_agents: BTreeSet<AgentId> = returning.iter().map(|c| contracts[c.0].agent).collect();
    if returning_agents.len() > capacity {
        return Err(InstanceError::ReturningExceedsCapacity {
            institution: name.into(),
            count: returning_agents.len(),
            capacity,
        });
    }

    let reserves = match &doc.reserves {
        None => None,
        Some(r) => Some(
            r.iter()
                .map(|(ty, &value)| {
                    if value < 0 {
                        Err(InstanceError::NegativeReserve {
                            institution: name.into(),
                            ty: ty.clone(),
                            value,
                        })
                    } else {
                        Ok((ty.clone(), value as usize))
                    }
                })
                .collect::<Result<BTreeMap<_, _>, _>>()?,
        ),
    };

    let universe: BTreeSet<&String> = if doc.types.is_empty() {
        reserves.iter().flat_map(|r| r.keys()).collect()
    } else {
        doc.types.iter().collect()
    };
    let unknown_type = |field, ty: &String| InstanceError::UnknownType {
        institution: name.into(),
        field,
        ty: ty.clone(),
    };
    if let Some(ty) = reserves.iter().flat_map(|r| r.keys()).find(|t| !universe.contains(t)) {
        return Err(unknown_type("reserves", ty));
    }
    let mut traits = BTreeMap::new();
    for (&id, tys) in &doc.traits {
        let c = owned_id("traits", id)?;
        if let Some(ty) = tys.iter().find(|t| !universe.contains(t)) {
            return Err(unknown_type("traits", ty));
        }
        traits.insert(c, tys.clone());
    }

    if doc.one_per_agent {
        let mut seen = BTreeSet::new();
        for c in own.iter() {
            let a = contracts[c.0].agent;
            if !seen.insert(a) {
                return Err(InstanceError::MultipleContractsPerPair {
                    institution: name.into(),
                    agent: agents[a.0].clone(),
                });
            }
        }
    }

    let spec = InstitutionSpec {
        name: name.into(),
        capacity,
        priority,
        returning,
        types: doc.types.clone(),
        traits,
        reserves,
        matroid: doc.matroid.clone(),
        one_per_agent: doc.one_per_agent,
    };
    if let Some(Err(source)) = spec.objective_oracle(own) {
        return Err(InstanceError::Matroid {
            institution: name.into(),
            source,
        });
    }
    Ok(spec)
}

fn parse_preference(market: &Market, a: AgentId, entries: &[PrefEntry]) -> Result<Preference, InstanceError> {
    let agent = market.agent_name(a).to_owned();
    let own = market.agent_contracts(a);
    let mut order = Vec::with_capacity(own.len() + 1);
    for e in entries {
        match e {
            PrefEntry::Contract(id) if *id < MAX_CONTRACTS && own.contains(ContractId(*id)) => {
                order.push(Some(ContractId(*id)))
            }
            PrefEntry::Contract(id) => {
                return Err(InstanceError::UnknownContract {
                    field: format!("preferences.{agent}"),
                    id: *id,
                })
            }
            PrefEntry::Null(s) if s == "null" => order.push(None),
            PrefEntry::Null(s) => {
                return Err(InstanceError::BadPreferenceEntry {
                    agent,
                    entry: s.clone(),
                })
            }
        }
    }
    if !order.contains(&None) {
        order.push(None);
    }
    let listed: ContractSet = order.iter().flatten().copied().collect();
    order.extend((own - listed).iter().map(Some));
    let pref = Preference::from_order(order);
    market.validate_preference(a, &pref)?;
    Ok(pref)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(s: &str) -> Result<Problem, InstanceError> {
        load_instance(s.as_bytes())
    }

    const MINIMAL: &str = r#"{
        "contracts": [{"id": 0, "agent": "a", "institution": "i"}],
        "preferences": {"a": [0, "null"]},
        "institutions": {"i": {"capacity": 1, "priority": [0], "returning": []}}
    }"#;

    #[test]
    fn minimal_round_trip() {
        let p = load(MINIMAL).unwrap();
        assert_eq!(p.market.agent_count(), 1);
        assert!(p.profile.get(AgentId(0)).is_acceptable(ContractId(0)));
        let again = load_instance(&save_instance(&p)).unwrap();
        assert_eq!(again, p);
        assert_eq!(save_instance(&again), save_instance(&p));
    }

    #[test]
    fn shorthand_completes_canonically() {
        let p = load(
            r#"{
            "contracts": [
                {"id": 0, "agent": "a", "institution": "i"},
                {"id": 1, "agent": "a", "institution": "j"},
                {"id": 2, "agent": "a", "institution": "k"}
            ],
            "preferences": {"a": [2]},
            "institutions": {
                "i": {"capacity": 1, "priority": [0], "returning": []},
                "j": {"capacity": 1, "priority": [1], "returning": []},
                "k": {"capacity": 1, "priority": [2], "returning": []}
            }
        }"#,
        )
        .unwrap();
        let order = p.profile.get(AgentId(0)).order();
        assert_eq!(order, &[Some(ContractId(2)), None, Some(ContractId(0)), Some(ContractId(1))]);
    }

    #[test]
    fn returning_beyond_capacity_is_rejected() {
        let err = load(
            r#"{
            "contracts": [
                {"id": 0, "agent": "a", "institution": "i"},
                {"id": 1, "agent": "b", "institution": "i"}
            ],
            "institutions": {"i": {"capacity": 1, "priority": [0, 1], "returning": [0, 1]}}
        }"#,
        )
        .unwrap_err();
        assert!(matches!(err, InstanceError::ReturningExceedsCapacity { count: 2, capacity: 1, .. }));
        assert!(err.to_string().contains("institutions.i.returning"));
    }

    type Case = (&'static str, fn(&InstanceError) -> bool);

    #[test]
    fn distinct_diagnostics() {
        let cases: &[Case] = &[
            (
                r#"{"contracts": [{"id": 0, "agent": "a", "institution": "i"}, {"id": 0, "agent": "b", "institution": "i"}],
                    "institutions": {"i": {"capacity": 1, "priority": [0], "returning": []}}}"#,
                |e| matches!(e, InstanceError::DuplicateId(0)),
            ),
            (
                r#"{"contracts": [{"id": 0, "agent": "a", "institution": "i"}, {"id": 1, "agent": "b", "institution": "i"}],
                    "institutions": {"i": {"capacity": 1, "priority": [0], "returning": []}}}"#,
                |e| matches!(e, InstanceError::PriorityNotTotal { .. }),
            ),
            (
                r#"{"contracts": [{"id": 0, "agent": "a", "institution": "i"}],
                    "institutions": {"i": {"capacity": 1, "priority": [0, 0], "returning": []}}}"#,
                |e| matches!(e, InstanceError::PriorityNotTotal { .. }),
            ),
            (
                r#"{"contracts": [{"id": 0, "agent": "a", "institution": "i"}],
                    "institutions": {"i": {"capacity": 1, "priority": [0], "returning": [], "reserves": {"D": -1}}}}"#,
                |e| matches!(e, InstanceError::NegativeReserve { value: -1, .. }),
            ),
            (
                r#"{"contracts": [{"id": 0, "agent": "a", "institution": "i"}],
                    "institutions": {"i": {"capacity": -2, "priority": [0], "returning": []}}}"#,
                |e| matches!(e, InstanceError::NegativeCapacity { .. }),
            ),
            (
                r#"{"contracts": [{"id": 0, "agent": "a", "institution": "i"}],
                    "institutions": {"i": {"capacity": 1, "priority": [0], "returning": [], "colour": 1}}}"#,
                |e| matches!(e, InstanceError::Parse(_)),
            ),
            (
                r#"{"contracts": [{"id": 3, "agent": "a", "institution": "i"}],
                    "institutions": {"i": {"capacity": 1, "priority": [3], "returning": []}}}"#,
                |e| matches!(e, InstanceError::NonDenseIds { id: 3, .. }),
            ),
            (
                r#"{"contracts": [{"id": 0, "agent": "a", "institution": "i"}, {"id": 1, "agent": "a", "institution": "i"}],
                    "institutions": {"i": {"capacity": 1, "priority": [0, 1], "returning": []}}}"#,
                |e| matches!(e, InstanceError::DuplicateTriple { .. }),
            ),
            (
                r#"{"contracts": [{"id": 0, "agent": "a", "institution": "z"}],
                    "institutions": {}}"#,
                |e| matches!(e, InstanceError::MissingInstitution(_)),
            ),
            (
                r#"{"contracts": [{"id": 0, "agent": "a", "institution": "i"}],
                    "preferences": {"a": [0, 0]},
                    "institutions": {"i": {"capacity": 1, "priority": [0], "returning": []}}}"#,
                |e| matches!(e, InstanceError::PreferenceNotTotal { .. }),
            ),
            (
                r#"{"contracts": [{"id": 0, "agent": "a", "institution": "i"}],
                    "preferences": {"zed": []},
                    "institutions": {"i": {"capacity": 1, "priority": [0], "returning": []}}}"#,
                |e| matches!(e, InstanceError::UnknownAgent(_)),
            ),
            (
                r#"{"contracts": [{"id": 0, "agent": "a", "institution": "i"}],
                    "institutions": {"i": {"capacity": 1, "priority": [0], "returning": [], "reserves": {"D": 1}, "traits": {"0": ["H"]}}}}"#,
                |e| matches!(e, InstanceError::UnknownType { .. }),
            ),
            (
                r#"{"contracts": [{"id": 0, "agent": "a", "institution": "i", "label": "x"}, {"id": 1, "agent": "a", "institution": "i", "label": "y"}],
                    "institutions": {"i": {"capacity": 1, "priority": [0, 1], "returning": [], "onePerAgent": true}}}"#,
                |e| matches!(e, InstanceError::MultipleContractsPerPair { .. }),
            ),
            (
                r#"{"contracts": [{"id": 0, "agent": "a", "institution": "i"}, {"id": 1, "agent": "b", "institution": "i"}],
                    "institutions": {"i": {"capacity": 2, "priority": [0, 1], "returning": [],
                        "matroid": {"kind": "explicit", "independent": [[], [0], [0, 1]]}}}}"#,
                |e| matches!(e, InstanceError::Matroid { .. }),
            ),
        ];
        for (k, (json, expected)) in cases.iter().enumerate() {
            let err = load(json).unwrap_err();
            assert!(expected(&err), "case {k}: unexpected {err:?}");
        }
    }

    #[test]
    fn too_many_contracts() {
        let contracts: Vec<String> = (0..65)
            .map(|k| format!(r#"{{"id": {k}, "agent": "a{k}", "institution": "i"}}"#))
            .collect();
        let json = format!(
            r#"{{"contracts": [{}], "institutions": {{"i": {{"capacity": 1, "priority": [], "returning": []}}}}}}"#,
            contracts.join(",")
        );
        assert!(matches!(load(&json), Err(InstanceError::TooManyContracts { count: 65 })));
    }

    #[test]
    fn empty_instance_loads() {
        let p = load(r#"{"contracts": [], "institutions": {}}"#).unwrap();
        assert_eq!(p.market.universe(), ContractSet::EMPTY);
    }
}
