//! Deferred acceptance, stability, strategy-proofness and the verifiers that
//! tie the choice-level axioms to matching rules.

mod da;
pub mod profiles;
mod rules;
mod verify;

pub use da::{cumulative_offers_agree, enumerate_stable, is_stable, run_da, DaStep, DaTrace, InstitutionStep, StabilityViolation};
pub use rules::{
    check_strategy_proofness, outcome_table, strategy_proofness_of_table, DaRule, FnMatchingRule, ImmediateAcceptance,
    ManipulationWitness, MatchingRule,
};
pub use verify::{
    characterizing_axioms, check_rule_axioms, sample_stable_selectors, strengthening_counterexample, verify_characterization,
    verify_forward, verify_forward_with, verify_institution, verify_lemma_chain, Assertion, Characterization,
    ForwardWitness, LemmaWitness, SelectorSample,
};

use crate::axioms::AxiomError;
use crate::choice::ChoiceError;
use crate::matroid::MatroidError;
use crate::model::ContractSet;
use crate::GuardError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Guard(#[from] GuardError),
    #[error(transparent)]
    Choice(#[from] ChoiceError),
    #[error(transparent)]
    Axiom(#[from] AxiomError),
    #[error(transparent)]
    Matroid(#[from] MatroidError),
    #[error("step {step}: rule at {institution} chose {chosen:?} from {considered:?}")]
    SubsetViolation {
        step: usize,
        institution: String,
        considered: ContractSet,
        chosen: ContractSet,
    },
    #[error("expected {expected} choice rules, got {actual}")]
    RuleCount { expected: usize, actual: usize },
    #[error("rule {rule} returned a non-matching {set:?}")]
    NotAMatching { rule: String, set: ContractSet },
}
