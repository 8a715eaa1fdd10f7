//! Seeded instance generators. All randomness comes from a ChaCha8 stream
//! keyed by the configured seed, so equal configurations give equal bytes.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{ContractDoc, InstanceDoc, InstanceError, InstitutionDoc, PrefEntry};
use crate::matroid::TransversalMatroid;
use crate::model::{ContractId, ContractSet, Problem};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenConfig {
    pub agents: usize,
    pub institutions: usize,
    /// Number of reserve types; zero omits traits and reserves.
    pub types: usize,
    pub seed: u64,
    /// Probability, in percent, that a contract is returning.
    pub returning_percent: u32,
    /// Capacity of every institution; drawn from `1..=agents` when `None`.
    pub capacity: Option<usize>,
}

impl GenConfig {
    pub fn new(agents: usize, institutions: usize, types: usize, seed: u64) -> Self {
        GenConfig {
            agents,
            institutions,
            types,
            seed,
            returning_percent: 25,
            capacity: None,
        }
    }
}

fn names(prefix: char, n: usize) -> Vec<String> {
    // Zero-padded so that name order is index order.
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|k| format!("{prefix}{k:0width$}")).collect()
}

/// An instance with one contract for every agent–institution pair. Contract
/// `a · institutions + i` links agent `a` to institution `i`.
pub fn generate(config: &GenConfig) -> Result<Problem, InstanceError> {
    let count = config.agents * config.institutions;
    if count > crate::model::MAX_CONTRACTS {
        return Err(InstanceError::TooManyContracts { count });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let agents = names('a', config.agents);
    let schools = names('s', config.institutions);
    let types = names('t', config.types);
    let id = |a: usize, i: usize| a * config.institutions + i;

    let contracts = (0..config.agents)
        .flat_map(|a| (0..config.institutions).map(move |i| (a, i)))
        .map(|(a, i)| ContractDoc {
            id: id(a, i),
            agent: agents[a].clone(),
            institution: schools[i].clone(),
            label: None,
        })
        .collect();

    let mut preferences = BTreeMap::new();
    for (a, name) in agents.iter().enumerate() {
        let mut order: Vec<usize> = (0..config.institutions).map(|i| id(a, i)).collect();
        order.shuffle(&mut rng);
        let cut = rng.gen_range(0..=order.len());
        let mut entries: Vec<PrefEntry> = order.iter().map(|&c| PrefEntry::Contract(c)).collect();
        entries.insert(cut, PrefEntry::null());
        preferences.insert(name.clone(), entries);
    }

    // Traits belong to agents and are shared by all of an agent's contracts.
    let agent_traits: Vec<Vec<String>> = (0..config.agents)
        .map(|_| types.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect())
        .collect();

    let mut institutions = BTreeMap::new();
    for (i, name) in schools.iter().enumerate() {
        let capacity = config
            .capacity
            .unwrap_or_else(|| rng.gen_range(1..=config.agents.max(1)));
        let mut priority: Vec<usize> = (0..config.agents).map(|a| id(a, i)).collect();
        priority.shuffle(&mut rng);
        let mut returning: Vec<usize> = (0..config.agents)
            .map(|a| id(a, i))
            .filter(|_| rng.gen_ratio(config.returning_percent.min(100), 100))
            .collect();
        returning.truncate(capacity);
        let (traits, reserves) = if types.is_empty() {
            (BTreeMap::new(), None)
        } else {
            let traits = (0..config.agents)
                .filter(|&a| !agent_traits[a].is_empty())
                .map(|a| (id(a, i), agent_traits[a].clone()))
                .collect();
            let mut left = capacity;
            let mut reserves = BTreeMap::new();
            for t in &types {
                let r = rng.gen_range(0..=left.min(2));
                left -= r;
                reserves.insert(t.clone(), r as i64);
            }
            (traits, Some(reserves))
        };
        institutions.insert(
            name.clone(),
            InstitutionDoc {
                capacity: capacity as i64,
                priority,
                returning,
                types: types.clone(),
                traits,
                reserves,
                matroid: None,
                one_per_agent: true,
            },
        );
    }

    InstanceDoc {
        contracts,
        preferences,
        institutions,
    }
    .into_problem()
}

/// A single-institution reserves instance with 3 to 8 applicants and 1 to 3
/// types.
pub fn chile_fixture(seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agents = rng.gen_range(3..=8);
    let types = rng.gen_range(1..=3);
    let mut config = GenConfig::new(agents, 1, types, rng.gen());
    config.capacity = Some(rng.gen_range(1..=agents));
    generate(&config).expect("generated sizes are within limits")
}

/// `count` instances of the given shape with seeds `seed, seed + 1, ...`.
pub fn shape_fixtures(agents: usize, institutions: usize, types: usize, seed: u64, count: usize) -> Vec<Problem> {
    (0..count as u64)
        .map(|k| generate(&GenConfig::new(agents, institutions, types, seed.wrapping_add(k))).expect("shape fits"))
        .collect()
}

/// A transversal matroid on `{0, .., n-1}` with `n` in `1..=max_ground`,
/// 1 to 3 types of 0 to 2 seats each, and random trait sets.
pub fn random_transversal(seed: u64, max_ground: usize) -> TransversalMatroid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_ground.max(1));
    let types = names('t', rng.gen_range(1..=3));
    let reserves: BTreeMap<String, usize> = types.iter().map(|t| (t.clone(), rng.gen_range(0..=2))).collect();
    let traits: BTreeMap<ContractId, Vec<String>> = (0..n)
        .map(|c| {
            let ts = types.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
            (ContractId(c), ts)
        })
        .collect();
    TransversalMatroid::from_named(ContractSet::first(n), &reserves, &traits, Some(types))
        .expect("traits drawn from the declared types")
}
