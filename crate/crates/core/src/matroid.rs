//! Matroids over contract sets: independence oracles, rank, minors,
//! truncations, the greedy base procedure, and exhaustive checks of the
//! matroid axioms and the standard lemmas built on them.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::model::{ContractId, ContractSet, Ground, Priority};
use crate::{GuardError, Guards, Report};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatroidError {
    #[error("set {set:?} is not contained in the ground set {ground:?}")]
    Domain { set: ContractSet, ground: ContractSet },
    #[error(transparent)]
    Guard(#[from] GuardError),
    #[error("explicit independence family is not a matroid: {0}")]
    NotAMatroid(MatroidViolation),
    #[error("trait {ty:?} of contract {contract} is not in the declared type universe")]
    UnknownType { contract: ContractId, ty: String },
    #[error("contract {0} has no class in the partition matroid")]
    Unclassified(ContractId),
    #[error("class {0:?} has no quota in the partition matroid")]
    UnknownClass(String),
}

/// An independence system over a ground set of contracts.
///
/// Implementations may assume arguments are subsets of [`Matroid::ground`];
/// [`RankOracle`] performs the domain check.
pub trait Matroid: Send + Sync + fmt::Debug {
    fn ground(&self) -> ContractSet;

    fn is_independent(&self, set: ContractSet) -> bool;

    /// Size of a maximal independent subset.
    fn rank(&self, set: ContractSet) -> usize {
        greedy_rank(self, set)
    }
}

/// Rank by greedy augmentation over ascending contract ids. Correct for any
/// matroid, since every maximal independent subset has the same size.
pub fn greedy_rank<M: Matroid + ?Sized>(m: &M, set: ContractSet) -> usize {
    let mut kept = ContractSet::EMPTY;
    for c in set.iter() {
        if m.is_independent(kept.with(c)) {
            kept.insert(c);
        }
    }
    kept.len()
}

/// Every subset of size at most `rank`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniformMatroid {
    ground: ContractSet,
    rank: usize,
}

impl UniformMatroid {
    pub fn new(ground: ContractSet, rank: usize) -> Self {
        UniformMatroid { ground, rank }
    }
}

impl Matroid for UniformMatroid {
    fn ground(&self) -> ContractSet {
        self.ground
    }

    fn is_independent(&self, set: ContractSet) -> bool {
        set.len() <= self.rank
    }

    fn rank(&self, set: ContractSet) -> usize {
        set.len().min(self.rank)
    }
}

/// At most `quota[k]` elements from each class `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionMatroid {
    ground: ContractSet,
    classes: Vec<ContractSet>,
    quotas: Vec<usize>,
}

impl PartitionMatroid {
    /// `class_of` must assign every ground element to a class index below
    /// `quotas.len()`.
    pub fn new(
        ground: ContractSet,
        class_of: &BTreeMap<ContractId, usize>,
        quotas: Vec<usize>,
    ) -> Result<Self, MatroidError> {
        let mut classes = vec![ContractSet::EMPTY; quotas.len()];
        for c in ground.iter() {
            match class_of.get(&c) {
                Some(&k) if k < quotas.len() => classes[k].insert(c),
                Some(&k) => return Err(MatroidError::UnknownClass(k.to_string())),
                None => return Err(MatroidError::Unclassified(c)),
            }
        }
        let extra: ContractSet = class_of.keys().copied().collect::<ContractSet>() - ground;
        if !extra.is_empty() {
            return Err(MatroidError::Domain { set: extra, ground });
        }
        Ok(PartitionMatroid {
            ground,
            classes,
            quotas,
        })
    }
}

impl Matroid for PartitionMatroid {
    fn ground(&self) -> ContractSet {
        self.ground
    }

    fn is_independent(&self, set: ContractSet) -> bool {
        self.classes
            .iter()
            .zip(&self.quotas)
            .all(|(&class, &q)| (set & class).len() <= q)
    }

    fn rank(&self, set: ContractSet) -> usize {
        self.classes
            .iter()
            .zip(&self.quotas)
            .map(|(&class, &q)| (set & class).len().min(q))
            .sum()
    }
}

/// The transversal matroid of a reserve graph: seats on one side (type `t`
/// contributes `seats_per_type[t]` distinct seats), contracts on the other,
/// and a contract is adjacent to every seat of a type in its trait set. A
/// set is independent when its contracts can be placed on distinct adjacent
/// seats.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransversalMatroid {
    ground: ContractSet,
    /// Type index of every seat.
    seats: Vec<usize>,
    /// Trait bitmask (over type indices) per contract id.
    traits: Vec<u64>,
}

impl TransversalMatroid {
    /// `traits` maps contracts to bitmasks over type indices
    /// `0..seats_per_type.len()`; absent contracts have no traits.
    pub fn new(ground: ContractSet, seats_per_type: &[usize], traits: &BTreeMap<ContractId, u64>) -> Self {
        let seats = seats_per_type
            .iter()
            .enumerate()
            .flat_map(|(t, &n)| std::iter::repeat_n(t, n))
            .collect();
        let mut table = vec![0u64; 64];
        for (&c, &mask) in traits {
            if ground.contains(c) {
                table[c.0] = mask;
            }
        }
        TransversalMatroid {
            ground,
            seats,
            traits: table,
        }
    }

    /// Builds from named types. `universe`, when given, must contain every
    /// reserve key and every trait; otherwise the reserve keys are the
    /// universe.
    pub fn from_named(
        ground: ContractSet,
        reserves: &BTreeMap<String, usize>,
        traits: &BTreeMap<ContractId, Vec<String>>,
        universe: Option<Vec<String>>,
    ) -> Result<Self, MatroidError> {
        let universe = universe.unwrap_or_else(|| reserves.keys().cloned().collect());
        let index = |c: ContractId, ty: &str| {
            universe
                .iter()
                .position(|u| u == ty)
                .ok_or_else(|| MatroidError::UnknownType {
                    contract: c,
                    ty: ty.to_owned(),
                })
        };
        let mut seats_per_type = vec![0; universe.len()];
        for (ty, &n) in reserves {
            seats_per_type[index(ContractId(0), ty)?] = n;
        }
        let mut masks = BTreeMap::new();
        for (&c, tys) in traits {
            if !ground.contains(c) {
                return Err(MatroidError::Domain {
                    set: ContractSet::singleton(c),
                    ground,
                });
            }
            let mut mask = 0u64;
            for ty in tys {
                mask |= 1 << index(c, ty)?;
            }
            masks.insert(c, mask);
        }
        Ok(TransversalMatroid::new(ground, &seats_per_type, &masks))
    }

    pub fn seat_count(&self) -> usize {
        self.seats.len()
    }

    /// Type index of each seat.
    pub fn seats(&self) -> &[usize] {
        &self.seats
    }

    /// Trait bitmask of a contract.
    pub fn traits_of(&self, c: ContractId) -> u64 {
        self.traits[c.0]
    }

    /// Size of a maximum matching between `set` and the seats, by repeated
    /// augmenting-path search.
    pub fn max_assignment(&self, set: ContractSet) -> usize {
        let mut owner: Vec<Option<ContractId>> = vec![None; self.seats.len()];
        let mut visited = vec![false; self.seats.len()];
        let mut size = 0;
        for c in set.iter() {
            visited.fill(false);
            if self.augment(c, &mut owner, &mut visited) {
                size += 1;
            }
        }
        size
    }

    fn augment(&self, c: ContractId, owner: &mut [Option<ContractId>], visited: &mut [bool]) -> bool {
        for seat in 0..self.seats.len() {
            if visited[seat] || self.traits[c.0] & (1 << self.seats[seat]) == 0 {
                continue;
            }
            visited[seat] = true;
            let free = match owner[seat] {
                None => true,
                Some(other) => self.augment(other, owner, visited),
            };
            if free {
                owner[seat] = Some(c);
                return true;
            }
        }
        false
    }
}

impl Matroid for TransversalMatroid {
    fn ground(&self) -> ContractSet {
        self.ground
    }

    fn is_independent(&self, set: ContractSet) -> bool {
        set.len() <= self.seats.len() && self.max_assignment(set) == set.len()
    }

    fn rank(&self, set: ContractSet) -> usize {
        self.max_assignment(set)
    }
}

/// An explicitly listed independence family. Construction verifies the
/// matroid axioms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplicitMatroid {
    ground: ContractSet,
    independent: HashSet<ContractSet>,
}

impl ExplicitMatroid {
    pub fn new(ground: ContractSet, family: impl IntoIterator<Item = ContractSet>) -> Result<Self, MatroidError> {
        let m = ExplicitMatroid::new_unchecked(ground, family)?;
        match check_matroid_axioms(&m, &Guards::default())? {
            Report::Pass => Ok(m),
            Report::Fail(w) => Err(MatroidError::NotAMatroid(w)),
        }
    }

    /// Skips the axiom check. Used to exhibit non-matroids in tests and
    /// reports.
    pub fn new_unchecked(
        ground: ContractSet,
        family: impl IntoIterator<Item = ContractSet>,
    ) -> Result<Self, MatroidError> {
        let independent: HashSet<ContractSet> = family.into_iter().collect();
        if let Some(&bad) = independent.iter().find(|s| !s.is_subset_of(ground)) {
            return Err(MatroidError::Domain { set: bad, ground });
        }
        Ok(ExplicitMatroid { ground, independent })
    }
}

impl Matroid for ExplicitMatroid {
    fn ground(&self) -> ContractSet {
        self.ground
    }

    fn is_independent(&self, set: ContractSet) -> bool {
        self.independent.contains(&set)
    }

    /// Largest listed subset of `set`; does not rely on the axioms.
    fn rank(&self, set: ContractSet) -> usize {
        self.independent
            .iter()
            .filter(|s| s.is_subset_of(set))
            .map(|s| s.len())
            .max()
            .unwrap_or(0)
    }
}

/// `r(Y | fixed) = r(Y ∪ fixed) − r(fixed)` on `ground \ fixed`.
#[derive(Debug)]
struct Minor {
    inner: RankOracle,
    fixed: ContractSet,
    fixed_rank: usize,
}

impl Matroid for Minor {
    fn ground(&self) -> ContractSet {
        self.inner.ground() - self.fixed
    }

    fn is_independent(&self, set: ContractSet) -> bool {
        self.rank(set) == set.len()
    }

    fn rank(&self, set: ContractSet) -> usize {
        self.inner.rank_unchecked(set | self.fixed) - self.fixed_rank
    }
}

#[derive(Debug)]
struct Truncation {
    inner: RankOracle,
    cap: usize,
}

impl Matroid for Truncation {
    fn ground(&self) -> ContractSet {
        self.inner.ground()
    }

    fn is_independent(&self, set: ContractSet) -> bool {
        set.len() <= self.cap && self.inner.independent_unchecked(set)
    }

    fn rank(&self, set: ContractSet) -> usize {
        self.inner.rank_unchecked(set).min(self.cap)
    }
}

/// Shared handle to a matroid with domain-checked queries and an optional
/// rank memo.
#[derive(Clone)]
pub struct RankOracle {
    matroid: Arc<dyn Matroid>,
    memo: Option<Arc<RwLock<HashMap<ContractSet, usize>>>>,
}

impl fmt::Debug for RankOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RankOracle")
            .field("matroid", &self.matroid)
            .field("memo", &self.memo.is_some())
            .finish()
    }
}

impl RankOracle {
    pub fn new(m: impl Matroid + 'static) -> Self {
        RankOracle {
            matroid: Arc::new(m),
            memo: None,
        }
    }

    pub fn from_arc(m: Arc<dyn Matroid>) -> Self {
        RankOracle { matroid: m, memo: None }
    }

    /// Same matroid with a fresh rank cache.
    pub fn with_memo(&self) -> Self {
        RankOracle {
            matroid: Arc::clone(&self.matroid),
            memo: Some(Arc::default()),
        }
    }

    pub fn without_memo(&self) -> Self {
        RankOracle {
            matroid: Arc::clone(&self.matroid),
            memo: None,
        }
    }

    pub fn matroid(&self) -> &dyn Matroid {
        &*self.matroid
    }

    pub fn ground(&self) -> ContractSet {
        self.matroid.ground()
    }

    fn check_domain(&self, set: ContractSet) -> Result<(), MatroidError> {
        let ground = self.ground();
        if set.is_subset_of(ground) {
            Ok(())
        } else {
            Err(MatroidError::Domain { set, ground })
        }
    }

    pub fn is_independent(&self, set: ContractSet) -> Result<bool, MatroidError> {
        self.check_domain(set)?;
        Ok(self.independent_unchecked(set))
    }

    pub fn rank(&self, set: ContractSet) -> Result<usize, MatroidError> {
        self.check_domain(set)?;
        Ok(self.rank_unchecked(set))
    }

    pub fn independent_unchecked(&self, set: ContractSet) -> bool {
        self.matroid.is_independent(set)
    }

    pub fn rank_unchecked(&self, set: ContractSet) -> usize {
        let Some(memo) = &self.memo else {
            return self.matroid.rank(set);
        };
        if let Some(&r) = memo.read().expect("rank memo poisoned").get(&set) {
            return r;
        }
        let r = self.matroid.rank(set);
        memo.write().expect("rank memo poisoned").insert(set, r);
        r
    }

    /// Contraction by `fixed`: an oracle over `ground \ fixed` with
    /// `r'(Y) = r(Y ∪ fixed) − r(fixed)`.
    pub fn minor(&self, fixed: ContractSet) -> Result<RankOracle, MatroidError> {
        self.check_domain(fixed)?;
        let inner = self.without_memo();
        let fixed_rank = inner.rank_unchecked(fixed);
        Ok(RankOracle::new(Minor {
            inner,
            fixed,
            fixed_rank,
        }))
    }

    /// Independent sets of size at most `cap`; rank becomes `min(r, cap)`.
    pub fn truncate(&self, cap: usize) -> RankOracle {
        RankOracle::new(Truncation {
            inner: self.without_memo(),
            cap,
        })
    }
}

/// Serialized matroid description, tagged by `kind`.
///
/// Contract-keyed maps use contract ids as keys; `classes` names a class per
/// contract and `quotas` bounds each class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MatroidSpec {
    Uniform {
        rank: usize,
    },
    Partition {
        #[serde(with = "id_keys")]
        classes: BTreeMap<ContractId, String>,
        quotas: BTreeMap<String, usize>,
    },
    Transversal {
        reserves: BTreeMap<String, usize>,
        #[serde(with = "id_keys")]
        traits: BTreeMap<ContractId, Vec<String>>,
    },
    Explicit {
        independent: Vec<ContractSet>,
    },
}

/// Contract-keyed maps go through string keys: internally tagged enums
/// buffer their content, and buffered keys are never parsed as integers.
mod id_keys {
    use std::collections::BTreeMap;

    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::model::ContractId;

    pub fn serialize<V: Serialize, S: Serializer>(map: &BTreeMap<ContractId, V>, s: S) -> Result<S::Ok, S::Error> {
        let keyed: BTreeMap<String, &V> = map.iter().map(|(k, v)| (k.0.to_string(), v)).collect();
        keyed.serialize(s)
    }

    pub fn deserialize<'de, V: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<ContractId, V>, D::Error> {
        BTreeMap::<String, V>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                k.parse()
                    .map(|id| (ContractId(id), v))
                    .map_err(|_| D::Error::custom(format!("contract id key {k:?} is not a nonnegative integer")))
            })
            .collect()
    }
}

impl MatroidSpec {
    /// Builds an oracle over `ground`. `types` is the institution's type
    /// universe, used to validate transversal traits.
    pub fn build(&self, ground: ContractSet, types: Option<Vec<String>>) -> Result<RankOracle, MatroidError> {
        Ok(match self {
            MatroidSpec::Uniform { rank } => RankOracle::new(UniformMatroid::new(ground, *rank)),
            MatroidSpec::Partition { classes, quotas } => {
                let names: Vec<&String> = quotas.keys().collect();
                let mut class_of = BTreeMap::new();
                for (&c, name) in classes {
                    let k = names
                        .iter()
                        .position(|n| *n == name)
                        .ok_or_else(|| MatroidError::UnknownClass(name.clone()))?;
                    class_of.insert(c, k);
                }
                RankOracle::new(PartitionMatroid::new(ground, &class_of, quotas.values().copied().collect())?)
            }
            MatroidSpec::Transversal { reserves, traits } => {
                let universe = types.filter(|t| !t.is_empty()).map(|mut t| {
                    for k in reserves.keys() {
                        if !t.contains(k) {
                            t.push(k.clone());
                        }
                    }
                    t
                });
                RankOracle::new(TransversalMatroid::from_named(ground, reserves, traits, universe)?)
            }
            MatroidSpec::Explicit { independent } => {
                RankOracle::new(ExplicitMatroid::new(ground, independent.iter().copied())?)
            }
        })
    }
}

/// `C^g(X)`: scan `set` in priority order, keeping an element whenever the
/// kept set stays independent. The result is a base of `set`.
pub fn greedy_base(oracle: &RankOracle, set: ContractSet, priority: &Priority) -> Result<ContractSet, MatroidError> {
    oracle.check_domain(set)?;
    if !set.is_subset_of(priority.covers()) {
        return Err(MatroidError::Domain {
            set,
            ground: priority.covers(),
        });
    }
    Ok(greedy_base_unchecked(oracle, set, priority))
}

pub(crate) fn greedy_base_unchecked(oracle: &RankOracle, set: ContractSet, priority: &Priority) -> ContractSet {
    let mut kept = ContractSet::EMPTY;
    for c in priority.ranked(set) {
        if oracle.independent_unchecked(kept.with(c)) {
            kept.insert(c);
        }
    }
    kept
}

/// A failed matroid axiom or lemma, with the sets that witness it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "axiom", rename_all = "kebab-case")]
pub enum MatroidViolation {
    /// The empty set is dependent.
    EmptyDependent,
    /// `subset ⊆ superset`, `superset` independent, `subset` not.
    Hereditary { subset: ContractSet, superset: ContractSet },
    /// `|smaller| < |larger|`, both independent, no augmenting element.
    Augmentation { smaller: ContractSet, larger: ContractSet },
    /// The rank disagrees with the largest independent subset.
    RankMismatch { set: ContractSet, rank: usize, largest_independent: usize },
    /// `r(X) > |X|`.
    RankBound { set: ContractSet, rank: usize },
    Monotonicity { subset: ContractSet, superset: ContractSet },
    Submodularity { left: ContractSet, right: ContractSet },
    /// No exchange partner for `removed` between the two bases of `set`.
    BaseExchange {
        set: ContractSet,
        base: ContractSet,
        other: ContractSet,
        removed: ContractId,
    },
    /// `r(X'∪{x}) − r(X') > r(X∪{x}) − r(X)` for `X ⊆ X'`.
    SubmodularIncrement {
        subset: ContractSet,
        superset: ContractSet,
        element: ContractId,
    },
    /// `r(X∪{x}) = r(X)+1` and `Y` a base of `X`, but `Y∪{x}` is not a base
    /// of `X∪{x}`.
    RankToBase {
        set: ContractSet,
        element: ContractId,
        base: ContractSet,
    },
    /// The `position`-th best element of the greedy base is beaten by the
    /// corresponding element of another base.
    GreedyDominance {
        set: ContractSet,
        greedy: ContractSet,
        base: ContractSet,
        position: usize,
    },
    /// The greedy output is not a base.
    GreedyNotBase { set: ContractSet, greedy: ContractSet },
}

impl fmt::Display for MatroidViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatroidViolation::EmptyDependent => write!(f, "I1: the empty set is not independent"),
            MatroidViolation::Hereditary { subset, superset } => {
                write!(f, "I2: {subset:?} ⊆ {superset:?} but only the superset is independent")
            }
            MatroidViolation::Augmentation { smaller, larger } => {
                write!(f, "I3: {smaller:?} cannot be augmented from {larger:?}")
            }
            MatroidViolation::RankMismatch {
                set,
                rank,
                largest_independent,
            } => write!(
                f,
                "rank({set:?}) = {rank} but its largest independent subset has size {largest_independent}"
            ),
            MatroidViolation::RankBound { set, rank } => write!(f, "R1: rank({set:?}) = {rank}"),
            MatroidViolation::Monotonicity { subset, superset } => {
                write!(f, "R2: rank({subset:?}) > rank({superset:?})")
            }
            MatroidViolation::Submodularity { left, right } => {
                write!(f, "R3: fails for {left:?} and {right:?}")
            }
            MatroidViolation::BaseExchange {
                set,
                base,
                other,
                removed,
            } => write!(
                f,
                "B1: bases {base:?}, {other:?} of {set:?} have no exchange for {removed}"
            ),
            MatroidViolation::SubmodularIncrement {
                subset,
                superset,
                element,
            } => write!(
                f,
                "submodular increment fails for {subset:?} ⊆ {superset:?} and {element}"
            ),
            MatroidViolation::RankToBase { set, element, base } => write!(
                f,
                "{base:?} ∪ {{{element}}} is not a base of {set:?} ∪ {{{element}}}"
            ),
            MatroidViolation::GreedyDominance {
                set,
                greedy,
                base,
                position,
            } => write!(
                f,
                "greedy base {greedy:?} of {set:?} loses to {base:?} at position {position}"
            ),
            MatroidViolation::GreedyNotBase { set, greedy } => {
                write!(f, "greedy output {greedy:?} is not a base of {set:?}")
            }
        }
    }
}

/// Independence and rank of every subset of the ground, computed once.
struct Tables {
    ground: Ground,
    independent: Vec<bool>,
    rank: Vec<usize>,
}

impl Tables {
    fn build(m: &dyn Matroid, guards: &Guards) -> Result<Self, MatroidError> {
        let ground = Ground::new(m.ground());
        guards.check_tabulation(ground.len())?;
        let n = ground.subset_count();
        let mut independent = Vec::with_capacity(n);
        let mut rank = Vec::with_capacity(n);
        for k in 0..n {
            let s = ground.subset(k);
            independent.push(m.is_independent(s));
            rank.push(m.rank(s));
        }
        Ok(Tables {
            ground,
            independent,
            rank,
        })
    }

    fn indep(&self, s: ContractSet) -> bool {
        self.independent[self.ground.index(s)]
    }

    fn rank(&self, s: ContractSet) -> usize {
        self.rank[self.ground.index(s)]
    }

    /// Bases of `set`: independent subsets of size `r(set)`.
    fn bases(&self, set: ContractSet) -> Vec<ContractSet> {
        let r = self.rank(set);
        set.subsets()
            .filter(|&y| y.len() == r && self.indep(y))
            .collect()
    }
}

/// Ground sizes above this use the local form of submodularity
/// (`r(X+a) + r(X+b) ≥ r(X+a+b) + r(X)`), which is equivalent to the
/// pairwise form but avoids `4^n` pairs.
const PAIRWISE_SUBMODULARITY_LIMIT: usize = 12;

/// Exhaustively verifies I1–I3, consistency of rank with independence,
/// R1–R3, and base exchange (B1). Requires `|ground| ≤ max_tabulation`.
pub fn check_matroid_axioms(m: &dyn Matroid, guards: &Guards) -> Result<Report<MatroidViolation>, MatroidError> {
    let t = Tables::build(m, guards)?;
    Ok(Report::from_witness(axiom_witness(&t)))
}

fn axiom_witness(t: &Tables) -> Option<MatroidViolation> {
    let ground = t.ground.set();
    let all: Vec<ContractSet> = ground.subsets().collect();

    if !t.indep(ContractSet::EMPTY) {
        return Some(MatroidViolation::EmptyDependent);
    }
    for &sup in all.iter().filter(|&&s| t.indep(s)) {
        for &sub in all.iter().filter(|s| s.is_subset_of(sup)) {
            if !t.indep(sub) {
                return Some(MatroidViolation::Hereditary {
                    subset: sub,
                    superset: sup,
                });
            }
        }
    }
    // Elements that keep each independent set independent.
    let augmenting: Vec<ContractSet> = all
        .iter()
        .map(|&s| {
            if t.indep(s) {
                (ground - s).iter().filter(|&c| t.indep(s.with(c))).collect()
            } else {
                ContractSet::EMPTY
            }
        })
        .collect();
    for (k, &small) in all.iter().enumerate().filter(|(_, s)| t.indep(**s)) {
        for &large in all.iter().filter(|&&l| t.indep(l) && l.len() > small.len()) {
            if ((large - small) & augmenting[k]).is_empty() {
                return Some(MatroidViolation::Augmentation {
                    smaller: small,
                    larger: large,
                });
            }
        }
    }
    for &s in &all {
        let largest = s.subsets().filter(|&y| t.indep(y)).map(|y| y.len()).max().unwrap_or(0);
        if t.rank(s) != largest {
            return Some(MatroidViolation::RankMismatch {
                set: s,
                rank: t.rank(s),
                largest_independent: largest,
            });
        }
        if t.rank(s) > s.len() {
            return Some(MatroidViolation::RankBound { set: s, rank: t.rank(s) });
        }
    }
    for &sub in &all {
        for sup in ground.supersets_within(sub) {
            if t.rank(sub) > t.rank(sup) {
                return Some(MatroidViolation::Monotonicity {
                    subset: sub,
                    superset: sup,
                });
            }
        }
    }
    if t.ground.len() <= PAIRWISE_SUBMODULARITY_LIMIT {
        for &a in &all {
            for &b in &all {
                if t.rank(a | b) + t.rank(a & b) > t.rank(a) + t.rank(b) {
                    return Some(MatroidViolation::Submodularity { left: a, right: b });
                }
            }
        }
    } else {
        for &x in &all {
            let outside: Vec<ContractId> = (ground - x).iter().collect();
            for (k, &a) in outside.iter().enumerate() {
                for &b in &outside[k + 1..] {
                    let (xa, xb) = (x.with(a), x.with(b));
                    if t.rank(xa | xb) + t.rank(x) > t.rank(xa) + t.rank(xb) {
                        return Some(MatroidViolation::Submodularity { left: xa, right: xb });
                    }
                }
            }
        }
    }
    for &s in &all {
        let bases = t.bases(s);
        for &y in &bases {
            for &other in &bases {
                for x in (y - other).iter() {
                    let exchange = (other - y).iter().any(|z| t.indep(y.without(x).with(z)));
                    if !exchange {
                        return Some(MatroidViolation::BaseExchange {
                            set: s,
                            base: y,
                            other,
                            removed: x,
                        });
                    }
                }
            }
        }
    }
    None
}

/// For all `X ⊆ X'` and `x`: `r(X'∪{x}) − r(X') ≤ r(X∪{x}) − r(X)`.
pub fn check_submodular_increment(m: &dyn Matroid, guards: &Guards) -> Result<Report<MatroidViolation>, MatroidError> {
    let t = Tables::build(m, guards)?;
    let ground = t.ground.set();
    for sub in ground.subsets() {
        for sup in ground.supersets_within(sub) {
            for x in ground.iter() {
                let outer = t.rank(sup.with(x)) - t.rank(sup);
                let inner = t.rank(sub.with(x)) - t.rank(sub);
                if outer > inner {
                    return Ok(Report::Fail(MatroidViolation::SubmodularIncrement {
                        subset: sub,
                        superset: sup,
                        element: x,
                    }));
                }
            }
        }
    }
    Ok(Report::Pass)
}

/// Whenever `r(X∪{x}) = r(X)+1` and `Y` is a base of `X`, `Y∪{x}` is a base
/// of `X∪{x}`.
pub fn check_rank_to_base(m: &dyn Matroid, guards: &Guards) -> Result<Report<MatroidViolation>, MatroidError> {
    let t = Tables::build(m, guards)?;
    let ground = t.ground.set();
    for set in ground.subsets() {
        for x in (ground - set).iter() {
            let grown = set.with(x);
            if t.rank(grown) != t.rank(set) + 1 {
                continue;
            }
            for base in t.bases(set) {
                let y = base.with(x);
                if !(t.indep(y) && y.len() == t.rank(grown)) {
                    return Ok(Report::Fail(MatroidViolation::RankToBase { set, element: x, base }));
                }
            }
        }
    }
    Ok(Report::Pass)
}

/// For every `X` with `|X| ≤ max_subset` and every base `Y` of `X`, the
/// `k`-th highest-priority element of the greedy base weakly beats the
/// `k`-th highest of `Y`. Also checks that the greedy output is a base.
pub fn check_greedy_dominance(
    oracle: &RankOracle,
    priority: &Priority,
    max_subset: usize,
    guards: &Guards,
) -> Result<Report<MatroidViolation>, MatroidError> {
    let t = Tables::build(oracle.matroid(), guards)?;
    let plain = oracle.without_memo();
    for set in t.ground.set().subsets().filter(|s| s.len() <= max_subset) {
        let greedy = greedy_base(&plain, set, priority)?;
        if !(t.indep(greedy) && greedy.len() == t.rank(set)) {
            return Ok(Report::Fail(MatroidViolation::GreedyNotBase { set, greedy }));
        }
        let g: Vec<ContractId> = priority.ranked(greedy).collect();
        for base in t.bases(set) {
            let b: Vec<ContractId> = priority.ranked(base).collect();
            if let Some(position) = g.iter().zip(&b).position(|(&gk, &bk)| priority.prefers(bk, gk)) {
                return Ok(Report::Fail(MatroidViolation::GreedyDominance {
                    set,
                    greedy,
                    base,
                    position,
                }));
            }
        }
    }
    Ok(Report::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::e1_transversal;

    fn ids(v: &[usize]) -> ContractSet {
        v.iter().map(|&c| ContractId(c)).collect()
    }

    // E1: x_a = 0 with {D}, x_b = 1 with {D, H}, x_c = 2 with no traits; one
    // seat each for D and H.
    const XA: usize = 0;
    const XB: usize = 1;
    const XC: usize = 2;

    /// Independent-set oracle by brute-force seat assignment.
    fn brute_independent(m: &TransversalMatroid, set: ContractSet) -> bool {
        fn place(elems: &[ContractId], m: &TransversalMatroid, used: &mut Vec<bool>) -> bool {
            let Some((&c, rest)) = elems.split_first() else {
                return true;
            };
            for (s, &ty) in m.seats().iter().enumerate() {
                if !used[s] && m.traits_of(c) & (1 << ty) != 0 {
                    used[s] = true;
                    if place(rest, m, used) {
                        return true;
                    }
                    used[s] = false;
                }
            }
            false
        }
        let elems: Vec<ContractId> = set.iter().collect();
        place(&elems, m, &mut vec![false; m.seat_count()])
    }

    fn brute_rank(m: &TransversalMatroid, set: ContractSet) -> usize {
        set.subsets()
            .filter(|&s| brute_independent(m, s))
            .map(|s| s.len())
            .max()
            .unwrap()
    }

    #[test]
    fn e1_independence() {
        let m = e1_transversal();
        let o = RankOracle::new(m.clone());
        assert!(o.is_independent(ContractSet::EMPTY).unwrap());
        assert!(o.is_independent(ids(&[XA, XB])).unwrap());
        assert!(!o.is_independent(ids(&[XA, XC])).unwrap());
        for s in m.ground().subsets() {
            assert_eq!(o.is_independent(s).unwrap(), brute_independent(&m, s));
        }
    }

    #[test]
    fn e1_rank_matches_brute_force() {
        let m = e1_transversal();
        let o = RankOracle::new(m.clone());
        assert_eq!(o.rank(ContractSet::EMPTY).unwrap(), 0);
        assert_eq!(brute_rank(&m, ids(&[XA, XB, XC])), 2);
        assert_eq!(o.rank(ids(&[XA, XB, XC])).unwrap(), 2);
        assert_eq!(brute_rank(&m, ids(&[XC])), 0);
        assert_eq!(o.rank(ids(&[XC])).unwrap(), 0);
        for s in m.ground().subsets() {
            assert_eq!(m.rank(s), greedy_rank(&m, s));
        }
    }

    #[test]
    fn domain_errors() {
        let o = RankOracle::new(e1_transversal());
        assert!(matches!(o.rank(ids(&[5])), Err(MatroidError::Domain { .. })));
        assert!(o.is_independent(ids(&[XA, 7])).is_err());
        assert!(o.minor(ids(&[9])).is_err());
    }

    #[test]
    fn minor_examples() {
        let m = e1_transversal();
        let o = RankOracle::new(m.clone());
        let same = o.minor(ContractSet::EMPTY).unwrap();
        for s in o.ground().subsets() {
            assert_eq!(same.rank(s).unwrap(), o.rank(s).unwrap());
        }
        let fixed_b = o.minor(ids(&[XB])).unwrap();
        assert_eq!(fixed_b.ground(), ids(&[XA, XC]));
        assert_eq!(brute_rank(&m, ids(&[XA, XB])) - brute_rank(&m, ids(&[XB])), 1);
        assert_eq!(fixed_b.rank(ids(&[XA])).unwrap(), 1);
        let fixed_a = o.minor(ids(&[XA])).unwrap();
        assert_eq!(brute_rank(&m, ids(&[XA, XC])) - brute_rank(&m, ids(&[XA])), 0);
        assert_eq!(fixed_a.rank(ids(&[XC])).unwrap(), 0);
        assert!(fixed_b.rank(ids(&[XB])).is_err());
    }

    #[test]
    fn truncation_examples() {
        let o = RankOracle::new(e1_transversal());
        let loose = o.truncate(5);
        for s in o.ground().subsets() {
            assert_eq!(loose.rank(s).unwrap(), o.rank(s).unwrap());
        }
        let g = ids(&[0, 1, 2, 3]);
        let u3 = RankOracle::new(UniformMatroid::new(g, 3)).truncate(2);
        let u2 = UniformMatroid::new(g, 2);
        for s in g.subsets() {
            assert_eq!(u3.rank(s).unwrap(), u2.rank(s));
            assert_eq!(u3.is_independent(s).unwrap(), u2.is_independent(s));
        }
        assert_eq!(o.truncate(1).rank(ids(&[XA, XB])).unwrap(), 1);
    }

    #[test]
    fn greedy_base_examples() {
        let g = ids(&[0, 1, 2]);
        let pri = Priority::new(vec![ContractId(0), ContractId(1), ContractId(2)]).unwrap();
        let u2 = RankOracle::new(UniformMatroid::new(g, 2));
        assert_eq!(greedy_base(&u2, g, &pri).unwrap(), ids(&[0, 1]));

        let classes: BTreeMap<ContractId, usize> =
            [(ContractId(0), 0), (ContractId(1), 0), (ContractId(2), 1)].into_iter().collect();
        let part = RankOracle::new(PartitionMatroid::new(g, &classes, vec![1, 1]).unwrap());
        let got = greedy_base(&part, g, &pri).unwrap();
        // Brute force: among maximum independent subsets, the greedy one is
        // lexicographically best by priority.
        let best = g
            .subsets()
            .filter(|&s| part.is_independent(s).unwrap() && s.len() == part.rank(g).unwrap())
            .min_by_key(|&s| pri.ranked(s).map(|c| c.0).collect::<Vec<_>>())
            .unwrap();
        assert_eq!(best, ids(&[0, 2]));
        assert_eq!(got, best);

        let e1 = RankOracle::new(e1_transversal());
        assert_eq!(greedy_base(&e1, ids(&[XA, XB, XC]), &pri).unwrap(), ids(&[XA, XB]));
    }

    #[test]
    fn axiom_check_examples() {
        let g = ids(&[0, 1, 2, 3]);
        for q in 0..=4 {
            assert!(check_matroid_axioms(&UniformMatroid::new(g, q), &Guards::default())
                .unwrap()
                .is_pass());
        }
        let bad = ExplicitMatroid::new_unchecked(ids(&[0, 1]), [ids(&[]), ids(&[0]), ids(&[0, 1])]).unwrap();
        assert_eq!(
            check_matroid_axioms(&bad, &Guards::default()).unwrap(),
            Report::Fail(MatroidViolation::Hereditary {
                subset: ids(&[1]),
                superset: ids(&[0, 1]),
            })
        );
        assert!(matches!(
            ExplicitMatroid::new(ids(&[0, 1]), [ids(&[]), ids(&[0]), ids(&[0, 1])]),
            Err(MatroidError::NotAMatroid(_))
        ));
        assert!(check_matroid_axioms(&e1_transversal(), &Guards::default())
            .unwrap()
            .is_pass());
    }

    #[test]
    fn augmentation_failure_is_reported() {
        // {0} and {1,2} independent, but neither {0,1} nor {0,2} is.
        let g = ids(&[0, 1, 2]);
        let fam = [ids(&[]), ids(&[0]), ids(&[1]), ids(&[2]), ids(&[1, 2])];
        let m = ExplicitMatroid::new_unchecked(g, fam).unwrap();
        assert_eq!(
            check_matroid_axioms(&m, &Guards::default()).unwrap(),
            Report::Fail(MatroidViolation::Augmentation {
                smaller: ids(&[0]),
                larger: ids(&[1, 2]),
            })
        );
    }

    #[test]
    fn guard_rejects_large_ground() {
        let m = UniformMatroid::new(ContractSet::first(17), 3);
        assert!(matches!(
            check_matroid_axioms(&m, &Guards::default()),
            Err(MatroidError::Guard(_))
        ));
    }

    #[test]
    fn lemmas_hold_on_e1_minor_and_truncation() {
        let o = RankOracle::new(e1_transversal());
        let pri = Priority::new(vec![ContractId(2), ContractId(0), ContractId(1)]).unwrap();
        for oracle in [o.clone(), o.minor(ids(&[XB])).unwrap(), o.truncate(1)] {
            let g = Guards::default();
            assert!(check_matroid_axioms(oracle.matroid(), &g).unwrap().is_pass());
            assert!(check_submodular_increment(oracle.matroid(), &g).unwrap().is_pass());
            assert!(check_rank_to_base(oracle.matroid(), &g).unwrap().is_pass());
            assert!(check_greedy_dominance(&oracle, &pri, 10, &g).unwrap().is_pass());
        }
    }

    #[test]
    fn memo_returns_same_ranks() {
        let o = RankOracle::new(e1_transversal());
        let memo = o.with_memo();
        for _ in 0..2 {
            for s in o.ground().subsets() {
                assert_eq!(memo.rank(s).unwrap(), o.rank(s).unwrap());
            }
        }
    }

    #[test]
    fn spec_json_shapes() {
        let spec: MatroidSpec = serde_json::from_str(
            r#"{"kind":"transversal","reserves":{"D":1,"H":1},"traits":{"0":["D"],"1":["D","H"]}}"#,
        )
        .unwrap();
        let o = spec.build(ids(&[0, 1, 2]), None).unwrap();
        assert_eq!(o.rank(ids(&[0, 1, 2])).unwrap(), 2);
        let bad: Result<MatroidSpec, _> = serde_json::from_str(r#"{"kind":"uniform","rank":1,"extra":0}"#);
        assert!(bad.is_err());
        let unknown = MatroidSpec::Transversal {
            reserves: [("D".to_owned(), 1)].into_iter().collect(),
            traits: [(ContractId(0), vec!["Z".to_owned()])].into_iter().collect(),
        };
        assert!(matches!(
            unknown.build(ids(&[0]), None),
            Err(MatroidError::UnknownType { .. })
        ));
        let part: MatroidSpec = serde_json::from_str(
            r#"{"kind":"partition","classes":{"0":"t1","1":"t1","2":"t2"},"quotas":{"t1":1,"t2":1}}"#,
        )
        .unwrap();
        assert_eq!(part.build(ids(&[0, 1, 2]), None).unwrap().rank(ids(&[0, 1, 2])).unwrap(), 2);
    }
}
