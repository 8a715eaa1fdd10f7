//! Small named instances used by tests, the acceptance suite and the CLI.

use std::collections::BTreeMap;

use crate::choice::Tabulated;
use crate::instance::load_instance;
use crate::matroid::TransversalMatroid;
use crate::model::{ContractId, ContractSet, Problem};

/// Two agents, two unit-capacity institutions, opposed priorities.
pub const E4_JSON: &str = r#"{
  "contracts": [
    {"id": 0, "agent": "a", "institution": "i"},
    {"id": 1, "agent": "a", "institution": "j"},
    {"id": 2, "agent": "b", "institution": "i"},
    {"id": 3, "agent": "b", "institution": "j"}
  ],
  "preferences": {
    "a": [0, 1, "null"],
    "b": [2, 3, "null"]
  },
  "institutions": {
    "i": {"capacity": 1, "priority": [2, 0], "returning": []},
    "j": {"capacity": 1, "priority": [1, 3], "returning": []}
  }
}
"#;

/// `[a-i, a-j, b-i, b-j]` in [`E4_JSON`].
pub const E4_CONTRACTS: [ContractId; 4] = [ContractId(0), ContractId(1), ContractId(2), ContractId(3)];

/// One institution with two seats, one of them reserved for type `D`;
/// `c` is returning and only `b` has the trait.
pub const E3_JSON: &str = r#"{
  "contracts": [
    {"id": 0, "agent": "a", "institution": "i"},
    {"id": 1, "agent": "b", "institution": "i"},
    {"id": 2, "agent": "c", "institution": "i"}
  ],
  "preferences": {
    "a": [0, "null"],
    "b": [1, "null"],
    "c": [2, "null"]
  },
  "institutions": {
    "i": {
      "capacity": 2,
      "priority": [0, 1, 2],
      "returning": [2],
      "types": ["D"],
      "traits": {"1": ["D"]},
      "reserves": {"D": 1},
      "onePerAgent": true
    }
  }
}
"#;

/// `[a-i, b-i, c-i]` in [`E3_JSON`].
pub const E3_CONTRACTS: [ContractId; 3] = [ContractId(0), ContractId(1), ContractId(2)];

pub fn e4() -> Problem {
    load_instance(E4_JSON.as_bytes()).expect("E4 fixture loads")
}

pub fn e3() -> Problem {
    load_instance(E3_JSON.as_bytes()).expect("E3 fixture loads")
}

/// Transversal matroid on contracts `{0, 1, 2}` with one `D` seat and one
/// `H` seat: contract 0 has `{D}`, 1 has `{D, H}`, 2 has no traits.
pub fn e1_transversal() -> TransversalMatroid {
    let reserves: BTreeMap<String, usize> = [("D".to_owned(), 1), ("H".to_owned(), 1)].into_iter().collect();
    let traits: BTreeMap<ContractId, Vec<String>> = [
        (ContractId(0), vec!["D".to_owned()]),
        (ContractId(1), vec!["D".to_owned(), "H".to_owned()]),
    ]
    .into_iter()
    .collect();
    TransversalMatroid::from_named(ContractSet::first(3), &reserves, &traits, None).expect("E1 fixture builds")
}

/// On `{x, y} = {0, 1}`: rejects `x` alone but keeps it from `{x, y}`. Fails
/// path independence at `X = {x}`, `X' = {y}`.
pub fn pi_counterexample() -> Tabulated {
    table("pi-counterexample", [0b00, 0b00, 0b00, 0b01])
}

/// On `{x, y} = {0, 1}`: keeps `x` alone but nothing from `{x, y}`. Fails
/// size monotonicity at `{x} ⊆ {x, y}`.
pub fn sm_counterexample() -> Tabulated {
    table("sm-counterexample", [0b00, 0b01, 0b00, 0b00])
}

fn table(name: &str, choices: [u64; 4]) -> Tabulated {
    Tabulated::new(name, ContractSet::first(2), choices.map(ContractSet::from_bits).to_vec()).expect("2-element table")
}

/// One institution, agents `a` and `b` with one contract each: `x = 0` for
/// `a`, `y = 1` for `b`.
pub const TWO_CONTRACT_JSON: &str = r#"{
  "contracts": [
    {"id": 0, "agent": "a", "institution": "i"},
    {"id": 1, "agent": "b", "institution": "i"}
  ],
  "preferences": {
    "a": [0, "null"],
    "b": [1, "null"]
  },
  "institutions": {
    "i": {"capacity": 1, "priority": [0, 1], "returning": []}
  }
}
"#;

pub fn two_contract() -> Problem {
    load_instance(TWO_CONTRACT_JSON.as_bytes()).expect("two-contract fixture loads")
}
