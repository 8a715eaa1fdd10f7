//! Institutional choice rules and exhaustive checkers for the classical
//! choice-rule properties.
//!
//! A rule is defined on the subsets of its ground set (an institution's
//! contracts). Procedural rules compute choices on demand; [`Tabulated`]
//! rules store one choice per subset and are what the exhaustive checkers
//! run on.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matroid::{greedy_base_unchecked, MatroidError, RankOracle, UniformMatroid};
use crate::model::{ContractSet, Ground, InstitutionId, Market, Priority};
use crate::{GuardError, Guards, Report};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChoiceError {
    #[error(transparent)]
    Guard(#[from] GuardError),
    #[error(transparent)]
    Matroid(#[from] MatroidError),
    #[error("rules are defined on different grounds: {left:?} and {right:?}")]
    GroundMismatch { left: ContractSet, right: ContractSet },
    #[error("matroid has an independent set of size {rank}, above capacity {capacity}")]
    OversizedIndependent { rank: usize, capacity: usize },
    #[error("tabulated rule: {0}")]
    BadTable(String),
    #[error("unknown rule {0:?} (expected responsive, greedy, matroid or guaranteed-enrollment)")]
    UnknownRule(String),
}

/// A choice rule `C` at one institution: `C(X) ⊆ X` for every `X` within
/// [`ChoiceRule::ground`]. Tabulated and closure rules may break that
/// contract; the checkers and the DA engine report it.
pub trait ChoiceRule: Send + Sync {
    fn ground(&self) -> ContractSet;

    /// `C(X)`. Callers pass `X ⊆ ground()`.
    fn choose(&self, set: ContractSet) -> ContractSet;

    fn name(&self) -> &str;
}

pub type SharedRule = Arc<dyn ChoiceRule>;

impl fmt::Debug for dyn ChoiceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({:?})", self.name(), self.ground())
    }
}

/// `C^r`: the `q` highest-priority contracts.
#[derive(Clone, Debug)]
pub struct Responsive {
    ground: ContractSet,
    capacity: usize,
    priority: Priority,
}

impl Responsive {
    pub fn new(ground: ContractSet, capacity: usize, priority: Priority) -> Self {
        Responsive {
            ground,
            capacity,
            priority,
        }
    }
}

impl ChoiceRule for Responsive {
    fn ground(&self) -> ContractSet {
        self.ground
    }

    fn choose(&self, set: ContractSet) -> ContractSet {
        self.priority.top(set, self.capacity)
    }

    fn name(&self) -> &str {
        "responsive"
    }
}

/// `C^g`: the greedy base of `X` in priority order.
#[derive(Clone, Debug)]
pub struct Greedy {
    oracle: RankOracle,
    priority: Priority,
}

impl Greedy {
    pub fn new(oracle: RankOracle, priority: Priority) -> Self {
        Greedy { oracle, priority }
    }
}

impl ChoiceRule for Greedy {
    fn ground(&self) -> ContractSet {
        self.oracle.ground()
    }

    fn choose(&self, set: ContractSet) -> ContractSet {
        greedy_base_unchecked(&self.oracle, set, &self.priority)
    }

    fn name(&self) -> &str {
        "greedy"
    }
}

/// `C^m`: the greedy base, then the highest-priority remaining contracts up
/// to `min(|X|, q)`.
#[derive(Clone, Debug)]
pub struct NonWastefulMatroid {
    oracle: RankOracle,
    capacity: usize,
    priority: Priority,
}

impl NonWastefulMatroid {
    /// Requires every independent set to have at most `capacity` elements.
    pub fn new(oracle: RankOracle, capacity: usize, priority: Priority) -> Result<Self, ChoiceError> {
        let rank = oracle.rank_unchecked(oracle.ground());
        if rank > capacity {
            return Err(ChoiceError::OversizedIndependent { rank, capacity });
        }
        Ok(NonWastefulMatroid {
            oracle,
            capacity,
            priority,
        })
    }
}

impl ChoiceRule for NonWastefulMatroid {
    fn ground(&self) -> ContractSet {
        self.oracle.ground()
    }

    fn choose(&self, set: ContractSet) -> ContractSet {
        let base = greedy_base_unchecked(&self.oracle, set, &self.priority);
        fill(base, set, self.capacity, &self.priority)
    }

    fn name(&self) -> &str {
        "matroid"
    }
}

/// Adds the highest-priority members of `set \ chosen` until `chosen` has
/// `min(|set|, capacity)` elements.
fn fill(chosen: ContractSet, set: ContractSet, capacity: usize, priority: &Priority) -> ContractSet {
    let room = capacity.min(set.len()).saturating_sub(chosen.len());
    chosen | priority.top(set - chosen, room)
}

/// `C^ge`: returning contracts first, then contracts that raise the reserve
/// rank (at most one per reserved seat), then priority order.
#[derive(Clone, Debug)]
pub struct GuaranteedEnrollment {
    capacity: usize,
    priority: Priority,
    returning: ContractSet,
    oracle: RankOracle,
    reserved_seats: usize,
}

impl GuaranteedEnrollment {
    /// `oracle` is the reserve matroid over the institution's contracts and
    /// `reserved_seats` the total number of reserved seats.
    pub fn new(
        capacity: usize,
        priority: Priority,
        returning: ContractSet,
        oracle: RankOracle,
        reserved_seats: usize,
    ) -> Self {
        GuaranteedEnrollment {
            capacity,
            priority,
            returning,
            oracle,
            reserved_seats,
        }
    }
}

impl ChoiceRule for GuaranteedEnrollment {
    fn ground(&self) -> ContractSet {
        self.oracle.ground()
    }

    fn choose(&self, set: ContractSet) -> ContractSet {
        let q = self.capacity;
        // Step 1. More than q returning contracts only arise without the
        // one-contract-per-agent flag; the highest-priority q are kept.
        let mut chosen = self.priority.top(set & self.returning, q);
        if chosen.len() == q {
            return chosen;
        }
        // Step 2.s
        for _ in 0..self.reserved_seats {
            let r = self.oracle.rank_unchecked(chosen);
            let next = self
                .priority
                .ranked(set - chosen)
                .find(|&x| self.oracle.rank_unchecked(chosen.with(x)) == r + 1);
            let Some(x) = next else { break };
            chosen.insert(x);
            if chosen.len() == q {
                return chosen;
            }
        }
        // Step 3
        fill(chosen, set, q, &self.priority)
    }

    fn name(&self) -> &str {
        "guaranteed-enrollment"
    }
}

/// A rule given by a closure.
pub struct FnRule<F> {
    name: String,
    ground: ContractSet,
    f: F,
}

impl<F: Fn(ContractSet) -> ContractSet + Send + Sync> FnRule<F> {
    pub fn new(name: impl Into<String>, ground: ContractSet, f: F) -> Self {
        FnRule {
            name: name.into(),
            ground,
            f,
        }
    }
}

impl<F: Fn(ContractSet) -> ContractSet + Send + Sync> ChoiceRule for FnRule<F> {
    fn ground(&self) -> ContractSet {
        self.ground
    }

    fn choose(&self, set: ContractSet) -> ContractSet {
        (self.f)(set)
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// A rule stored as one choice per subset of the ground.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tabulated {
    name: String,
    ground: Ground,
    /// Indexed by [`Ground::index`].
    table: Vec<ContractSet>,
}

impl Tabulated {
    /// `table[k]` is the choice at `ground.subset(k)`.
    pub fn new(name: impl Into<String>, ground: ContractSet, table: Vec<ContractSet>) -> Result<Self, ChoiceError> {
        let ground = Ground::new(ground);
        if table.len() != ground.subset_count() {
            return Err(ChoiceError::BadTable(format!(
                "{} entries for a ground of {} elements",
                table.len(),
                ground.len()
            )));
        }
        Ok(Tabulated {
            name: name.into(),
            ground,
            table,
        })
    }

    pub fn from_rule(rule: &dyn ChoiceRule, guards: &Guards) -> Result<Self, ChoiceError> {
        let ground = Ground::new(rule.ground());
        guards.check_tabulation(ground.len())?;
        let table = (0..ground.subset_count())
            .into_par_iter()
            .map(|k| rule.choose(ground.subset(k)))
            .collect();
        Ok(Tabulated {
            name: rule.name().to_owned(),
            ground,
            table,
        })
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn ground_index(&self) -> &Ground {
        &self.ground
    }

    pub fn entries(&self) -> impl Iterator<Item = (ContractSet, ContractSet)> + '_ {
        self.table
            .iter()
            .enumerate()
            .map(|(k, &c)| (self.ground.subset(k), c))
    }

    /// Reads the JSON table format. The ground is contracts `0..groundSize`
    /// and keys are decimal bitmasks over it; missing keys are an error.
    pub fn from_json(bytes: &[u8]) -> Result<Self, ChoiceError> {
        let doc: TableDoc = serde_json::from_slice(bytes).map_err(|e| ChoiceError::BadTable(e.to_string()))?;
        if doc.ground_size > 16 {
            return Err(ChoiceError::BadTable(format!("groundSize {} exceeds 16", doc.ground_size)));
        }
        let ground = ContractSet::first(doc.ground_size);
        let mut table = vec![None; 1 << doc.ground_size];
        for (key, &value) in &doc.choices {
            let mask: u64 = key
                .parse()
                .map_err(|_| ChoiceError::BadTable(format!("key {key:?} is not a decimal bitmask")))?;
            let slot = table
                .get_mut(mask as usize)
                .filter(|_| mask < 1 << doc.ground_size)
                .ok_or_else(|| ChoiceError::BadTable(format!("key {mask} is outside the ground")))?;
            if value & !mask != 0 {
                return Err(ChoiceError::BadTable(format!("choice {value} at {mask} is not a subset")));
            }
            *slot = Some(ContractSet::from_bits(value));
        }
        let table = table
            .into_iter()
            .enumerate()
            .map(|(k, v)| v.ok_or_else(|| ChoiceError::BadTable(format!("no choice for subset {k}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Tabulated::new(doc.name.unwrap_or_else(|| "tabulated".into()), ground, table)
    }

    /// JSON with keys in ascending numeric order. Masks are over ground
    /// positions, which coincide with contract ids when the ground is
    /// `0..n`.
    pub fn to_json(&self) -> Vec<u8> {
        let choices = self
            .table
            .iter()
            .enumerate()
            .map(|(k, &c)| (k, self.ground.index(c & self.ground.set()) as u64))
            .collect::<BTreeMap<usize, u64>>();
        let doc = serde_json::json!({
            "name": self.name,
            "groundSize": self.ground.len(),
            "choices": choices.iter().map(|(k, v)| (k.to_string(), serde_json::Value::from(*v))).collect::<serde_json::Map<_, _>>(),
        });
        serde_json::to_vec_pretty(&doc).expect("table serializes")
    }
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct TableDoc {
    #[serde(default)]
    name: Option<String>,
    ground_size: usize,
    choices: BTreeMap<String, u64>,
}

impl ChoiceRule for Tabulated {
    fn ground(&self) -> ContractSet {
        self.ground.set()
    }

    fn choose(&self, set: ContractSet) -> ContractSet {
        self.table[self.ground.index(set)]
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Tabulates `rule` under the tabulation guard.
pub fn tabulate(rule: &dyn ChoiceRule, guards: &Guards) -> Result<Tabulated, ChoiceError> {
    Tabulated::from_rule(rule, guards)
}

/// The rule choosing `second(X)` where `use_second(X)` holds and `first(X)`
/// elsewhere.
pub fn combine(
    first: &dyn ChoiceRule,
    second: &dyn ChoiceRule,
    use_second: impl Fn(ContractSet) -> bool,
    guards: &Guards,
) -> Result<Tabulated, ChoiceError> {
    if first.ground() != second.ground() {
        return Err(ChoiceError::GroundMismatch {
            left: first.ground(),
            right: second.ground(),
        });
    }
    let ground = Ground::new(first.ground());
    guards.check_tabulation(ground.len())?;
    let table = (0..ground.subset_count())
        .map(|k| {
            let s = ground.subset(k);
            if use_second(s) {
                second.choose(s)
            } else {
                first.choose(s)
            }
        })
        .collect();
    Tabulated::new(format!("combine({}, {})", first.name(), second.name()), ground.set(), table)
}

/// A failed choice-rule property, with the sets that witness it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "property", rename_all = "kebab-case")]
pub enum ChoiceViolation {
    /// `C(X) ⊄ X`.
    NotSubset { set: ContractSet, chosen: ContractSet },
    /// `C(X ∪ X') ≠ C(C(X) ∪ X')`.
    PathIndependence {
        left: ContractSet,
        right: ContractSet,
        direct: ContractSet,
        via_choice: ContractSet,
    },
    /// `X ⊆ X'` but `|C(X)| > |C(X')|`.
    SizeMonotonicity {
        subset: ContractSet,
        superset: ContractSet,
        subset_choice: ContractSet,
        superset_choice: ContractSet,
    },
    /// `C(X) \ {x} ⊄ C(X \ {x})`.
    Substitutability {
        set: ContractSet,
        removed: crate::ContractId,
        chosen: ContractSet,
        after: ContractSet,
    },
    /// `x ∈ X \ C(X)` but `C(X \ {x}) ≠ C(X)`.
    IrrelevanceOfRejected {
        set: ContractSet,
        removed: crate::ContractId,
        chosen: ContractSet,
        after: ContractSet,
    },
}

impl fmt::Display for ChoiceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChoiceViolation::NotSubset { set, chosen } => write!(f, "C({set:?}) = {chosen:?} is not a subset"),
            ChoiceViolation::PathIndependence {
                left,
                right,
                direct,
                via_choice,
            } => write!(
                f,
                "X = {left:?}, X' = {right:?}: C(X ∪ X') = {direct:?} but C(C(X) ∪ X') = {via_choice:?}"
            ),
            ChoiceViolation::SizeMonotonicity {
                subset,
                superset,
                subset_choice,
                superset_choice,
            } => write!(
                f,
                "C({subset:?}) = {subset_choice:?} is larger than C({superset:?}) = {superset_choice:?}"
            ),
            ChoiceViolation::Substitutability {
                set,
                removed,
                chosen,
                after,
            } => write!(
                f,
                "C({set:?}) = {chosen:?} but removing {removed} gives {after:?}"
            ),
            ChoiceViolation::IrrelevanceOfRejected {
                set,
                removed,
                chosen,
                after,
            } => write!(
                f,
                "C({set:?}) = {chosen:?} rejects {removed}, yet removing it gives {after:?}"
            ),
        }
    }
}

/// Choice-rule properties checked exhaustively.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum ChoiceProperty {
    PathIndependence,
    SizeMonotonicity,
    Substitutability,
    IrrelevanceOfRejected,
}

impl ChoiceProperty {
    pub const ALL: [ChoiceProperty; 4] = [
        ChoiceProperty::PathIndependence,
        ChoiceProperty::SizeMonotonicity,
        ChoiceProperty::Substitutability,
        ChoiceProperty::IrrelevanceOfRejected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChoiceProperty::PathIndependence => "path-independence",
            ChoiceProperty::SizeMonotonicity => "size-monotonicity",
            ChoiceProperty::Substitutability => "substitutability",
            ChoiceProperty::IrrelevanceOfRejected => "irc",
        }
    }

    pub fn check(self, rule: &dyn ChoiceRule, guards: &Guards) -> Result<Report<ChoiceViolation>, ChoiceError> {
        match self {
            ChoiceProperty::PathIndependence => check_path_independence(rule, guards),
            ChoiceProperty::SizeMonotonicity => check_size_monotonicity(rule, guards),
            ChoiceProperty::Substitutability => check_substitutability(rule, guards),
            ChoiceProperty::IrrelevanceOfRejected => check_irc(rule, guards),
        }
    }
}

impl FromStr for ChoiceProperty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ChoiceProperty::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown choice property {s:?}"))
    }
}

/// Tabulates and checks `C(X) ⊆ X` everywhere.
fn table_for_check(rule: &dyn ChoiceRule, guards: &Guards) -> Result<Result<Tabulated, ChoiceViolation>, ChoiceError> {
    guards.check_ground("choice-rule ground", rule.ground().len())?;
    let t = tabulate(rule, guards)?;
    let bad = t.entries().find(|&(set, chosen)| !chosen.is_subset_of(set));
    Ok(match bad {
        Some((set, chosen)) => Err(ChoiceViolation::NotSubset { set, chosen }),
        None => Ok(t),
    })
}

macro_rules! tabulated_or_witness {
    ($rule:expr, $guards:expr) => {
        match table_for_check($rule, $guards)? {
            Ok(t) => t,
            Err(w) => return Ok(Report::Fail(w)),
        }
    };
}

/// `C(X ∪ X') = C(C(X) ∪ X')` for all pairs; the witness is the first pair
/// in ascending `(X, X')` subset order.
pub fn check_path_independence(rule: &dyn ChoiceRule, guards: &Guards) -> Result<Report<ChoiceViolation>, ChoiceError> {
    let t = tabulated_or_witness!(rule, guards);
    let g = t.ground_index();
    let n = g.subset_count();
    let witness = (0..n).into_par_iter().find_map_first(|k| {
        let left = g.subset(k);
        let chosen = t.choose(left);
        (0..n).find_map(|m| {
            let right = g.subset(m);
            let direct = t.choose(left | right);
            let via_choice = t.choose(chosen | right);
            (direct != via_choice).then_some(ChoiceViolation::PathIndependence {
                left,
                right,
                direct,
                via_choice,
            })
        })
    });
    Ok(Report::from_witness(witness))
}

/// `|C(X)| ≤ |C(X')|` whenever `X ⊆ X'`.
pub fn check_size_monotonicity(rule: &dyn ChoiceRule, guards: &Guards) -> Result<Report<ChoiceViolation>, ChoiceError> {
    let t = tabulated_or_witness!(rule, guards);
    let g = t.ground_index();
    let witness = (0..g.subset_count()).into_par_iter().find_map_first(|k| {
        let subset = g.subset(k);
        let subset_choice = t.choose(subset);
        g.set().supersets_within(subset).find_map(|superset| {
            let superset_choice = t.choose(superset);
            (subset_choice.len() > superset_choice.len()).then_some(ChoiceViolation::SizeMonotonicity {
                subset,
                superset,
                subset_choice,
                superset_choice,
            })
        })
    });
    Ok(Report::from_witness(witness))
}

/// `C(X) \ {x} ⊆ C(X \ {x})` for all `X` and `x ∈ X`.
pub fn check_substitutability(rule: &dyn ChoiceRule, guards: &Guards) -> Result<Report<ChoiceViolation>, ChoiceError> {
    let t = tabulated_or_witness!(rule, guards);
    let witness = t.entries().find_map(|(set, chosen)| {
        set.iter().find_map(|x| {
            let after = t.choose(set.without(x));
            (!chosen.without(x).is_subset_of(after)).then_some(ChoiceViolation::Substitutability {
                set,
                removed: x,
                chosen,
                after,
            })
        })
    });
    Ok(Report::from_witness(witness))
}

/// `C(X \ {x}) = C(X)` for all `x ∈ X \ C(X)`.
pub fn check_irc(rule: &dyn ChoiceRule, guards: &Guards) -> Result<Report<ChoiceViolation>, ChoiceError> {
    let t = tabulated_or_witness!(rule, guards);
    let witness = t.entries().find_map(|(set, chosen)| {
        (set - chosen).iter().find_map(|x| {
            let after = t.choose(set.without(x));
            (after != chosen).then_some(ChoiceViolation::IrrelevanceOfRejected {
                set,
                removed: x,
                chosen,
                after,
            })
        })
    });
    Ok(Report::from_witness(witness))
}

/// The designed rules, selectable by name.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Responsive,
    Greedy,
    Matroid,
    GuaranteedEnrollment,
}

impl RuleKind {
    pub const ALL: [RuleKind; 4] = [
        RuleKind::Responsive,
        RuleKind::Greedy,
        RuleKind::Matroid,
        RuleKind::GuaranteedEnrollment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Responsive => "responsive",
            RuleKind::Greedy => "greedy",
            RuleKind::Matroid => "matroid",
            RuleKind::GuaranteedEnrollment => "guaranteed-enrollment",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = ChoiceError;

    fn from_str(s: &str) -> Result<Self, ChoiceError> {
        RuleKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ChoiceError::UnknownRule(s.to_owned()))
    }
}

/// The matroid behind the greedy and matroid rules at `i`: the declared
/// matroid or the reserve matroid, truncated at capacity. Institutions with
/// neither use the uniform matroid of rank `q`.
pub fn objective_oracle(market: &Market, i: InstitutionId) -> Result<RankOracle, MatroidError> {
    let spec = market.institution(i);
    let ground = market.institution_contracts(i);
    spec.objective_oracle(ground)
        .unwrap_or_else(|| Ok(RankOracle::new(UniformMatroid::new(ground, spec.capacity))))
}

pub fn build_rule(market: &Market, i: InstitutionId, kind: RuleKind) -> Result<SharedRule, ChoiceError> {
    let spec = market.institution(i);
    let ground = market.institution_contracts(i);
    let priority = spec.priority.clone();
    Ok(match kind {
        RuleKind::Responsive => Arc::new(Responsive::new(ground, spec.capacity, priority)),
        RuleKind::Greedy => Arc::new(Greedy::new(objective_oracle(market, i)?.with_memo(), priority)),
        RuleKind::Matroid => Arc::new(NonWastefulMatroid::new(
            objective_oracle(market, i)?.with_memo(),
            spec.capacity,
            priority,
        )?),
        RuleKind::GuaranteedEnrollment => Arc::new(GuaranteedEnrollment::new(
            spec.capacity,
            priority,
            spec.returning,
            spec.reserve_oracle(ground)?.with_memo(),
            spec.reserved_seats(),
        )),
    })
}

/// One rule of `kind` per institution, indexed by institution id.
pub fn build_rules(market: &Market, kind: RuleKind) -> Result<Vec<SharedRule>, ChoiceError> {
    market.institutions().map(|i| build_rule(market, i, kind)).collect()
}
