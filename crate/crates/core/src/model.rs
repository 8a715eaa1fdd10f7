//! Contracts, contract sets, preferences, and market instances.
//!
//! A [`Market`] fixes the agents, institutions, contracts and the data each
//! institution's choice rule needs. A [`Profile`] is one strict preference
//! order per agent. Together they form a [`Problem`].

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{BitAnd, BitOr, Not, Sub};

use serde::{Deserialize, Serialize};

use crate::instance::InstanceError;
use crate::matroid::{MatroidError, MatroidSpec, RankOracle, TransversalMatroid};

/// Hard cap on the number of contracts in one instance (one bitset word).
pub const MAX_CONTRACTS: usize = 64;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContractId(pub usize);

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub usize);

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstitutionId(pub usize);

impl fmt::Display for ContractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A set of contracts of one instance, stored as a 64-bit mask indexed by
/// contract id.
#[derive(Copy, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContractSet(u64);

impl ContractSet {
    pub const EMPTY: ContractSet = ContractSet(0);

    pub const fn from_bits(bits: u64) -> Self {
        ContractSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(id: ContractId) -> Self {
        debug_assert!(id.0 < MAX_CONTRACTS);
        ContractSet(1 << id.0)
    }

    /// The first `n` contract ids.
    pub fn first(n: usize) -> Self {
        debug_assert!(n <= MAX_CONTRACTS);
        if n == MAX_CONTRACTS {
            ContractSet(u64::MAX)
        } else {
            ContractSet((1u64 << n) - 1)
        }
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, id: ContractId) -> bool {
        id.0 < MAX_CONTRACTS && self.0 & (1 << id.0) != 0
    }

    pub fn with(self, id: ContractId) -> Self {
        ContractSet(self.0 | (1 << id.0))
    }

    pub fn without(self, id: ContractId) -> Self {
        ContractSet(self.0 & !(1 << id.0))
    }

    pub fn insert(&mut self, id: ContractId) {
        self.0 |= 1 << id.0;
    }

    pub fn remove(&mut self, id: ContractId) {
        self.0 &= !(1 << id.0);
    }

    pub fn is_subset_of(self, other: ContractSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Smallest contract id in the set.
    pub fn min(self) -> Option<ContractId> {
        (self.0 != 0).then(|| ContractId(self.0.trailing_zeros() as usize))
    }

    /// Contract ids in ascending order.
    pub fn iter(self) -> Iter {
        Iter(self.0)
    }

    /// Every subset of `self`, in ascending bitmask order (starting with the
    /// empty set and ending with `self`).
    pub fn subsets(self) -> Subsets {
        Subsets {
            mask: self.0,
            next: Some(0),
        }
    }

    /// Every subset of `self` that contains `floor`.
    pub fn supersets_within(self, floor: ContractSet) -> impl Iterator<Item = ContractSet> {
        debug_assert!(floor.is_subset_of(self));
        (self - floor).subsets().map(move |s| s | floor)
    }
}

impl FromIterator<ContractId> for ContractSet {
    fn from_iter<I: IntoIterator<Item = ContractId>>(iter: I) -> Self {
        let mut set = ContractSet::EMPTY;
        for id in iter {
            set.insert(id);
        }
        set
    }
}

impl BitOr for ContractSet {
    type Output = ContractSet;
    fn bitor(self, rhs: Self) -> Self {
        ContractSet(self.0 | rhs.0)
    }
}

impl BitAnd for ContractSet {
    type Output = ContractSet;
    fn bitand(self, rhs: Self) -> Self {
        ContractSet(self.0 & rhs.0)
    }
}

impl Sub for ContractSet {
    type Output = ContractSet;
    fn sub(self, rhs: Self) -> Self {
        ContractSet(self.0 & !rhs.0)
    }
}

impl Not for ContractSet {
    type Output = ContractSet;
    fn not(self) -> Self {
        ContractSet(!self.0)
    }
}

impl fmt::Debug for ContractSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|c| c.0)).finish()
    }
}

impl Serialize for ContractSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for ContractSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ids = Vec::<usize>::deserialize(deserializer)?;
        if let Some(&bad) = ids.iter().find(|&&id| id >= MAX_CONTRACTS) {
            return Err(serde::de::Error::custom(format!(
                "contract id {bad} exceeds the {MAX_CONTRACTS}-contract cap"
            )));
        }
        Ok(ids.into_iter().map(ContractId).collect())
    }
}

pub struct Iter(u64);

impl Iterator for Iter {
    type Item = ContractId;

    fn next(&mut self) -> Option<ContractId> {
        if self.0 == 0 {
            return None;
        }
        let tz = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(ContractId(tz as usize))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Iter {}

pub struct Subsets {
    mask: u64,
    next: Option<u64>,
}

impl Iterator for Subsets {
    type Item = ContractSet;

    fn next(&mut self) -> Option<ContractSet> {
        let current = self.next?;
        self.next = if current == self.mask {
            None
        } else {
            Some(current.wrapping_sub(self.mask) & self.mask)
        };
        Some(ContractSet(current))
    }
}

/// Dense indexing of the subsets of a fixed ground set, used by tabulated
/// rules and exhaustive checkers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ground {
    set: ContractSet,
    elements: Vec<ContractId>,
}

impl Ground {
    pub fn new(set: ContractSet) -> Self {
        Ground {
            set,
            elements: set.iter().collect(),
        }
    }

    pub fn set(&self) -> ContractSet {
        self.set
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[ContractId] {
        &self.elements
    }

    pub fn subset_count(&self) -> usize {
        1usize << self.elements.len()
    }

    /// Position of `subset` in `0..subset_count()`; bit `k` stands for the
    /// `k`-th smallest ground element.
    pub fn index(&self, subset: ContractSet) -> usize {
        debug_assert!(subset.is_subset_of(self.set));
        self.elements
            .iter()
            .enumerate()
            .filter(|(_, &c)| subset.contains(c))
            .fold(0, |acc, (k, _)| acc | (1 << k))
    }

    pub fn subset(&self, index: usize) -> ContractSet {
        self.elements
            .iter()
            .enumerate()
            .filter(|(k, _)| index & (1 << k) != 0)
            .map(|(_, &c)| c)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contract {
    pub id: ContractId,
    pub agent: AgentId,
    pub institution: InstitutionId,
    pub label: Option<String>,
}

/// A strict order over an agent's contracts plus the null contract (`None`).
///
/// Contracts ranked above `None` are acceptable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Preference {
    order: Vec<Option<ContractId>>,
}

impl Preference {
    /// `order` must list every contract of the agent exactly once and `None`
    /// exactly once. Validation against the market happens in
    /// [`Market::validate_preference`].
    pub fn from_order(order: Vec<Option<ContractId>>) -> Self {
        Preference { order }
    }

    /// Acceptable contracts in the given order, then null, then the
    /// remaining contracts of `own` in ascending id order.
    pub fn from_acceptable(acceptable: &[ContractId], own: ContractSet) -> Self {
        let listed: ContractSet = acceptable.iter().copied().collect();
        let order = acceptable
            .iter()
            .map(|&c| Some(c))
            .chain(std::iter::once(None))
            .chain((own - listed).iter().map(Some))
            .collect();
        Preference { order }
    }

    pub fn order(&self) -> &[Option<ContractId>] {
        &self.order
    }

    /// Position in the order; 0 is the most preferred.
    pub fn position(&self, x: Option<ContractId>) -> usize {
        self.order
            .iter()
            .position(|&o| o == x)
            .unwrap_or(usize::MAX)
    }

    /// `x R y`
    pub fn weakly_prefers(&self, x: Option<ContractId>, y: Option<ContractId>) -> bool {
        self.position(x) <= self.position(y)
    }

    /// `x P y`
    pub fn prefers(&self, x: Option<ContractId>, y: Option<ContractId>) -> bool {
        self.position(x) < self.position(y)
    }

    pub fn is_acceptable(&self, x: ContractId) -> bool {
        self.prefers(Some(x), None)
    }

    /// Acceptable contracts, best first.
    pub fn acceptable(&self) -> impl Iterator<Item = ContractId> + '_ {
        self.order.iter().map_while(|&o| o)
    }
}

/// One preference per agent, indexed by [`AgentId`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Profile {
    prefs: Vec<Preference>,
}

impl Profile {
    pub fn new(prefs: Vec<Preference>) -> Self {
        Profile { prefs }
    }

    pub fn get(&self, agent: AgentId) -> &Preference {
        &self.prefs[agent.0]
    }

    pub fn agents(&self) -> usize {
        self.prefs.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Preference> {
        self.prefs.iter()
    }

    /// `(R'_a, R_{-a})`
    pub fn with_preference(&self, agent: AgentId, pref: Preference) -> Profile {
        let mut prefs = self.prefs.clone();
        prefs[agent.0] = pref;
        Profile { prefs }
    }
}

/// A strict priority order over an institution's contracts.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Priority {
    order: Vec<ContractId>,
    rank: Vec<u8>,
}

impl Priority {
    /// `order` lists contracts highest priority first. Duplicates are
    /// rejected.
    pub fn new(order: Vec<ContractId>) -> Option<Self> {
        let mut rank = vec![u8::MAX; MAX_CONTRACTS];
        for (k, c) in order.iter().enumerate() {
            if c.0 >= MAX_CONTRACTS || rank[c.0] != u8::MAX {
                return None;
            }
            rank[c.0] = k as u8;
        }
        Some(Priority { order, rank })
    }

    pub fn order(&self) -> &[ContractId] {
        &self.order
    }

    pub fn covers(&self) -> ContractSet {
        self.order.iter().copied().collect()
    }

    /// `x ≻ y`
    pub fn prefers(&self, x: ContractId, y: ContractId) -> bool {
        self.rank[x.0] < self.rank[y.0]
    }

    /// Members of `set` from highest to lowest priority.
    pub fn ranked(&self, set: ContractSet) -> impl Iterator<Item = ContractId> + '_ {
        self.order.iter().copied().filter(move |&c| set.contains(c))
    }

    /// The `k` highest-priority members of `set` (all of them if fewer).
    pub fn top(&self, set: ContractSet, k: usize) -> ContractSet {
        self.ranked(set).take(k).collect()
    }
}

/// Everything an institution's choice rules and axioms may need.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstitutionSpec {
    pub name: String,
    pub capacity: usize,
    pub priority: Priority,
    /// Contracts of returning agents, whose enrollment is guaranteed.
    pub returning: ContractSet,
    /// Type universe; empty when the instance declares none.
    pub types: Vec<String>,
    /// Trait sets keyed by contract.
    pub traits: BTreeMap<ContractId, Vec<String>>,
    /// Reserved seats per type. `None` when the instance omits the key.
    pub reserves: Option<BTreeMap<String, usize>>,
    pub matroid: Option<MatroidSpec>,
    /// Forbid more than one contract per agent at this institution.
    pub one_per_agent: bool,
}

impl InstitutionSpec {
    /// The transversal matroid of the reserve graph: each type `t`
    /// contributes `reserves[t]` seats, and a contract may fill a seat of
    /// type `t` when its traits include `t`. Missing reserves mean no seats.
    pub fn reserve_matroid(&self, ground: ContractSet) -> Result<TransversalMatroid, MatroidError> {
        let empty = BTreeMap::new();
        let reserves = self.reserves.as_ref().unwrap_or(&empty);
        TransversalMatroid::from_named(ground, reserves, &self.traits, self.declared_types())
    }

    pub fn reserve_oracle(&self, ground: ContractSet) -> Result<RankOracle, MatroidError> {
        Ok(RankOracle::new(self.reserve_matroid(ground)?))
    }

    /// Total number of reserved seats.
    pub fn reserved_seats(&self) -> usize {
        self.reserves.iter().flat_map(|r| r.values()).sum()
    }

    /// The matroid used by the matroid-based rules and axioms: the declared
    /// matroid if any, the reserve matroid otherwise, truncated at capacity.
    /// Returns `None` when the institution declares neither.
    pub fn objective_oracle(&self, ground: ContractSet) -> Option<Result<RankOracle, MatroidError>> {
        let base = match (&self.matroid, &self.reserves) {
            (Some(spec), _) => spec.build(ground, self.declared_types()),
            (None, Some(_)) => self.reserve_oracle(ground),
            (None, None) => return None,
        };
        Some(base.map(|oracle| oracle.truncate(self.capacity)))
    }

    /// Types that traits may mention: the declared universe, or the reserve
    /// keys when no universe is declared.
    fn declared_types(&self) -> Option<Vec<String>> {
        if !self.types.is_empty() {
            Some(self.types.clone())
        } else {
            self.reserves.as_ref().map(|r| r.keys().cloned().collect())
        }
    }
}

/// Agents, institutions, contracts, and institution data. Immutable once
/// built; see [`crate::instance`] for the validated constructor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Market {
    pub(crate) agents: Vec<String>,
    pub(crate) institutions: Vec<InstitutionSpec>,
    pub(crate) contracts: Vec<Contract>,
    pub(crate) by_agent: Vec<ContractSet>,
    pub(crate) by_institution: Vec<ContractSet>,
}

impl Market {
    /// Builds the per-agent and per-institution indices. Callers are
    /// responsible for validation; [`crate::instance::build_market`] does it.
    pub(crate) fn assemble(
        agents: Vec<String>,
        institutions: Vec<InstitutionSpec>,
        contracts: Vec<Contract>,
    ) -> Self {
        let mut by_agent = vec![ContractSet::EMPTY; agents.len()];
        let mut by_institution = vec![ContractSet::EMPTY; institutions.len()];
        for c in &contracts {
            by_agent[c.agent.0].insert(c.id);
            by_institution[c.institution.0].insert(c.id);
        }
        Market {
            agents,
            institutions,
            contracts,
            by_agent,
            by_institution,
        }
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn institution_count(&self) -> usize {
        self.institutions.len()
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (0..self.agents.len()).map(AgentId)
    }

    pub fn institutions(&self) -> impl Iterator<Item = InstitutionId> {
        (0..self.institutions.len()).map(InstitutionId)
    }

    pub fn agent_name(&self, a: AgentId) -> &str {
        &self.agents[a.0]
    }

    pub fn agent_by_name(&self, name: &str) -> Option<AgentId> {
        self.agents.iter().position(|n| n == name).map(AgentId)
    }

    pub fn institution_by_name(&self, name: &str) -> Option<InstitutionId> {
        self.institutions
            .iter()
            .position(|s| s.name == name)
            .map(InstitutionId)
    }

    pub fn institution(&self, i: InstitutionId) -> &InstitutionSpec {
        &self.institutions[i.0]
    }

    pub fn contracts(&self) -> &[Contract] {
        &self.contracts
    }

    pub fn contract(&self, id: ContractId) -> &Contract {
        &self.contracts[id.0]
    }

    /// All contracts of the instance.
    pub fn universe(&self) -> ContractSet {
        ContractSet::first(self.contracts.len())
    }

    /// `𝒳_a`
    pub fn agent_contracts(&self, a: AgentId) -> ContractSet {
        self.by_agent[a.0]
    }

    /// `𝒳_i`
    pub fn institution_contracts(&self, i: InstitutionId) -> ContractSet {
        self.by_institution[i.0]
    }

    pub fn agent_of(&self, c: ContractId) -> AgentId {
        self.contracts[c.0].agent
    }

    pub fn institution_of(&self, c: ContractId) -> InstitutionId {
        self.contracts[c.0].institution
    }

    /// Human-readable contract name, e.g. `a-i` or `a-i#label`.
    pub fn contract_name(&self, id: ContractId) -> String {
        let c = &self.contracts[id.0];
        let base = format!("{}-{}", self.agents[c.agent.0], self.institutions[c.institution.0].name);
        match &c.label {
            Some(l) => format!("{base}#{l}"),
            None => base,
        }
    }

    pub fn validate_preference(&self, a: AgentId, pref: &Preference) -> Result<(), InstanceError> {
        let own = self.agent_contracts(a);
        let listed: ContractSet = pref.order().iter().flatten().copied().collect();
        let nulls = pref.order().iter().filter(|o| o.is_none()).count();
        if nulls != 1 || listed != own || pref.order().len() != own.len() + 1 {
            return Err(InstanceError::PreferenceNotTotal {
                agent: self.agents[a.0].clone(),
            });
        }
        Ok(())
    }

    /// The contract `X_a` of agent `a` in matching `x`, or `None`.
    pub fn assignment(&self, x: ContractSet, a: AgentId) -> Option<ContractId> {
        (x & self.agent_contracts(a)).min()
    }
}

/// A market together with a preference profile.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub market: Market,
    pub profile: Profile,
}

impl Problem {
    pub fn demand(&self, x: &Matching, i: InstitutionId) -> ContractSet {
        demand(&self.market, &self.profile, x.set(), i)
    }
}

/// Which side of the market to restrict to.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Party {
    Agent(AgentId),
    Institution(InstitutionId),
}

/// `X_a` or `X_i`.
pub fn restrict(market: &Market, x: ContractSet, by: Party) -> Result<ContractSet, InstanceError> {
    match by {
        Party::Agent(a) if a.0 < market.agent_count() => Ok(x & market.agent_contracts(a)),
        Party::Institution(i) if i.0 < market.institution_count() => {
            Ok(x & market.institution_contracts(i))
        }
        Party::Agent(a) => Err(InstanceError::UnknownAgent(format!("#{}", a.0))),
        Party::Institution(i) => Err(InstanceError::UnknownInstitution(format!("#{}", i.0))),
    }
}

/// The demand for `i` at `x`: contracts of `i` that their agent weakly
/// prefers to what `x` gives them.
pub fn demand(market: &Market, profile: &Profile, x: ContractSet, i: InstitutionId) -> ContractSet {
    market
        .institution_contracts(i)
        .iter()
        .filter(|&c| {
            let a = market.agent_of(c);
            profile
                .get(a)
                .weakly_prefers(Some(c), market.assignment(x, a))
        })
        .collect()
}

/// A set of contracts with at most one contract per agent.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Matching(ContractSet);

impl Matching {
    pub fn new(market: &Market, set: ContractSet) -> Result<Self, InstanceError> {
        if !set.is_subset_of(market.universe()) {
            return Err(InstanceError::UnknownContract {
                field: "matching".into(),
                id: (set - market.universe()).min().map_or(0, |c| c.0),
            });
        }
        if let Some(a) = market
            .agents()
            .find(|&a| (set & market.agent_contracts(a)).len() > 1)
        {
            return Err(InstanceError::NotAMatching {
                agent: market.agent_name(a).to_owned(),
            });
        }
        Ok(Matching(set))
    }

    pub const EMPTY: Matching = Matching(ContractSet::EMPTY);

    pub fn set(self) -> ContractSet {
        self.0
    }
}

/// Every matching of the market, in ascending mixed-radix order over agents
/// (agent 0 varies fastest; `None` before the agent's contracts).
pub fn all_matchings(market: &Market) -> Vec<ContractSet> {
    let mut out = vec![ContractSet::EMPTY];
    for a in market.agents() {
        let own = market.agent_contracts(a);
        let mut next = Vec::with_capacity(out.len() * (own.len() + 1));
        for option in std::iter::once(None).chain(own.iter().map(Some)) {
            for &m in &out {
                next.push(match option {
                    Some(c) => m.with(c),
                    None => m,
                });
            }
        }
        out = next;
    }
    out
}

/// Number of matchings, `Π_a (|X_a| + 1)`, saturating.
pub fn matching_count(market: &Market) -> u128 {
    market
        .agents()
        .map(|a| market.agent_contracts(a).len() as u128 + 1)
        .fold(1u128, |acc, k| acc.saturating_mul(k))
}
