//! Instruction-sequence fault laboratory.
//!
//! * [`isa`]: program syntax, fragments and substitution
//! * [`semantics`]: step-counted interpreter with configurable excess policies
//! * [`testing`]: confirmation tests, suites, specifications and the ledger
//! * [`faults`]: fault certification, repair search and adequacy checking
//! * [`views`]: linting, exhaustive verification, defect classification and
//!   process reporting

pub mod faults;
pub mod isa;
pub mod semantics;
pub mod testing;
pub mod views;

pub use faults::{
    certify_fault, check_adequacy, fault_accounting, idealized_regression_criterion,
    search_repairs, AdequacyReport, CertifiedFault, FailureRecord, FaultBudgetConfig, FaultError,
    RegressionBasis, SearchBounds,
};
pub use isa::{
    enumerate_fragments, extract, substitute, Fragment, Instruction, InstructionSequence, Register,
    Replacement,
};
pub use semantics::{
    discriminate_variant, effectuate, enumerate_variants, static_check, ExcessPolicy, MachineState,
    Outcome, SemanticsVariant, Trace,
};
pub use testing::{
    exhaustive_suite, regression_check, run_confirmation_test, run_suite, EffectuationLedger,
    Purpose, Specification, TestCase, TestResult,
};
pub use views::{classify_defects, lint, process_report, verify_exhaustive};
