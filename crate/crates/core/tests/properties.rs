use proptest::prelude::*;

use matchforge::axioms::{builtin_axioms, satisfies_punctual, AxiomName};
use matchforge::choice::{
    build_rule, build_rules, check_path_independence, check_size_monotonicity, check_substitutability, combine,
    ChoiceRule, NonWastefulMatroid, Responsive, RuleKind, Tabulated,
};
use matchforge::engine::{enumerate_stable, run_da};
use matchforge::generate::{chile_fixture, generate, random_transversal, GenConfig};
use matchforge::instance::{load_instance, save_instance};
use matchforge::matroid::{check_matroid_axioms, greedy_base, RankOracle, UniformMatroid};
use matchforge::model::{all_matchings, demand};
use matchforge::{ContractSet, Guards, InstitutionId, Priority};

fn config() -> impl Strategy<Value = GenConfig> {
    (1usize..=3, 1usize..=3, 0usize..=2, any::<u64>()).prop_map(|(a, i, t, s)| GenConfig::new(a, i, t, s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn instances_round_trip(c in config()) {
        let p = generate(&c).unwrap();
        let bytes = save_instance(&p);
        let back = load_instance(&bytes).unwrap();
        prop_assert_eq!(save_instance(&back), bytes);
        prop_assert_eq!(back, p);
    }

    #[test]
    fn matched_contracts_are_demanded(c in config()) {
        let p = generate(&c).unwrap();
        for x in all_matchings(&p.market) {
            for a in p.market.agents() {
                prop_assert!((x & p.market.agent_contracts(a)).len() <= 1);
            }
            for i in p.market.institutions() {
                let own = x & p.market.institution_contracts(i);
                prop_assert!(own.is_subset_of(demand(&p.market, &p.profile, x, i)));
            }
        }
    }

    #[test]
    fn da_terminates_and_is_stable(c in config()) {
        let p = generate(&c).unwrap();
        for kind in [RuleKind::Responsive, RuleKind::Matroid, RuleKind::GuaranteedEnrollment] {
            let rules = build_rules(&p.market, kind).unwrap();
            let trace = run_da(&p.market, &p.profile, &rules).unwrap();
            let total: usize = p.market.agents().map(|a| p.market.agent_contracts(a).len()).sum();
            prop_assert!(trace.steps.len() <= total + 1);
            let mut seen = ContractSet::EMPTY;
            for s in &trace.steps {
                prop_assert!((seen & s.proposals).is_empty());
                seen = seen | s.proposals;
            }
            let stable = enumerate_stable(&p.market, &p.profile, &rules, &Guards::default()).unwrap();
            prop_assert!(stable.contains(&trace.matching));
        }
    }

    #[test]
    fn designed_rules_are_non_wasteful_subsets(seed in any::<u64>()) {
        let p = chile_fixture(seed);
        let i = InstitutionId(0);
        let q = p.market.institution(i).capacity;
        let ground = p.market.institution_contracts(i);
        for kind in [RuleKind::Matroid, RuleKind::GuaranteedEnrollment, RuleKind::Responsive] {
            let rule = build_rule(&p.market, i, kind).unwrap();
            for x in ground.subsets() {
                let y = rule.choose(x);
                prop_assert!(y.is_subset_of(x));
                prop_assert_eq!(y.len(), x.len().min(q), "{} at {:?}", kind, x);
            }
        }
    }

    #[test]
    fn matroid_rule_with_uniform_oracle_is_responsive(n in 1usize..=7, q in 0usize..=7, seed in any::<u64>()) {
        let ground = ContractSet::first(n);
        let mut order: Vec<_> = ground.iter().collect();
        let mut s = seed;
        for k in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(k, (s >> 33) as usize % (k + 1));
        }
        let priority = Priority::new(order).unwrap();
        let r = Responsive::new(ground, q, priority.clone());
        let m = NonWastefulMatroid::new(RankOracle::new(UniformMatroid::new(ground, q)), q, priority).unwrap();
        for x in ground.subsets() {
            prop_assert_eq!(r.choose(x), m.choose(x));
        }
    }

    #[test]
    fn transversal_minors_and_truncations_are_matroids(seed in any::<u64>(), cap in 0usize..=3) {
        let g = Guards::default();
        let oracle = RankOracle::new(random_transversal(seed, 7));
        prop_assert!(check_matroid_axioms(oracle.matroid(), &g).unwrap().is_pass());
        let fixed = ContractSet::from_bits(oracle.ground().bits() & seed & 0b101);
        let minor = oracle.minor(fixed).unwrap();
        prop_assert!(check_matroid_axioms(minor.matroid(), &g).unwrap().is_pass());
        for y in minor.ground().subsets() {
            let expect = oracle.rank(y | fixed).unwrap() - oracle.rank(fixed).unwrap();
            prop_assert_eq!(minor.rank(y).unwrap(), expect);
        }
        let truncated = oracle.truncate(cap);
        prop_assert!(check_matroid_axioms(truncated.matroid(), &g).unwrap().is_pass());
        for y in oracle.ground().subsets() {
            prop_assert_eq!(truncated.rank(y).unwrap(), oracle.rank(y).unwrap().min(cap));
        }
    }

    #[test]
    fn greedy_base_is_a_base(seed in any::<u64>()) {
        let oracle = RankOracle::new(random_transversal(seed, 8));
        let mut order: Vec<_> = oracle.ground().iter().collect();
        order.reverse();
        let priority = Priority::new(order).unwrap();
        for x in oracle.ground().subsets() {
            let b = greedy_base(&oracle, x, &priority).unwrap();
            prop_assert!(b.is_subset_of(x));
            prop_assert_eq!(b.len(), oracle.rank(x).unwrap());
            prop_assert_eq!(oracle.rank(b).unwrap(), b.len());
        }
    }

    /// Mixing two rules that satisfy a punctual axiom, problem by problem,
    /// keeps the axiom.
    #[test]
    fn combination_closure(seed in any::<u64>(), selector in any::<u64>()) {
        let p = chile_fixture(seed);
        let i = InstitutionId(0);
        let g = Guards::default();
        let ge = build_rule(&p.market, i, RuleKind::GuaranteedEnrollment).unwrap();
        let m = build_rule(&p.market, i, RuleKind::Matroid).unwrap();
        let r = build_rule(&p.market, i, RuleKind::Responsive).unwrap();
        let axioms = builtin_axioms(&p.market, i, &AxiomName::ALL).unwrap();
        let rules = [ge, m, r];
        for ax in &axioms {
            let holding: Vec<&dyn ChoiceRule> = rules
                .iter()
                .map(|r| r.as_ref())
                .filter(|r| satisfies_punctual(*r, ax.as_ref(), &g).unwrap().is_pass())
                .collect();
            for a in &holding {
                for b in &holding {
                    let mixed = combine(*a, *b, |x| (selector >> (x.bits() % 64)) & 1 == 1, &g).unwrap();
                    prop_assert!(satisfies_punctual(&mixed, ax.as_ref(), &g).unwrap().is_pass(), "{}", ax.name());
                }
            }
        }
    }
}

/// Every rule on three contracts that is substitutable and size monotone is
/// path independent: all 4096 tables.
#[test]
fn substitutes_and_size_monotone_imply_path_independence() {
    let ground = ContractSet::first(3);
    let g = Guards::default();
    let masks: Vec<u64> = (0..8u64).collect();
    let mut both = 0;
    for code in 0u64..1 << 12 {
        // Each subset X takes |X| bits of `code`, spread over its members.
        let mut bits = code;
        let table: Vec<ContractSet> = masks
            .iter()
            .map(|&x| {
                let mut chosen = 0;
                for k in 0..3 {
                    if x >> k & 1 == 1 {
                        chosen |= (bits & 1) << k;
                        bits >>= 1;
                    }
                }
                ContractSet::from_bits(chosen)
            })
            .collect();
        let rule = Tabulated::new("exhaustive", ground, table).unwrap();
        if check_substitutability(&rule, &g).unwrap().is_pass() && check_size_monotonicity(&rule, &g).unwrap().is_pass() {
            both += 1;
            assert!(check_path_independence(&rule, &g).unwrap().is_pass(), "table {code}");
        }
    }
    assert!(both > 1);
}
