//! Mechanical faults: a fragment of an instruction sequence together with a
//! replacement that passes repair confirmation and regression testing.
//!
//! The engine here certifies individual fragment/replacement pairs, searches
//! for repairs over a finite instruction alphabet, computes the idealized
//! regression criterion by brute force over an exhaustive domain, accounts
//! fault volume against the configured budgets, and looks for a chain of
//! successive repairs that ends in a failure-free sequence.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::isa::{
    enumerate_fragments, substitute, Fragment, FragmentError, Instruction, InstructionSequence,
    Method, Register, Replacement, SubstituteError,
};
use crate::semantics::{effectuate, MachineState, SemanticsVariant};
use crate::testing::{
    evaluate_suite, exhaustive_suite, regression_check, run_confirmation_test,
    RegressionVerdict, Specification, TestCase, TestResult, TestingError, Verdict,
};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FaultError {
    #[error(transparent)]
    Fragment(#[from] FragmentError),
    #[error(transparent)]
    Substitute(#[from] SubstituteError),
    #[error(transparent)]
    Testing(#[from] TestingError),
    #[error("case `{0}` passes on the sequence; there is no failure to repair")]
    StaleFailure(String),
    #[error("no failing case supplied; there is no failure to repair")]
    NoFailure,
    #[error("repair alphabet is empty")]
    EmptyAlphabet,
    #[error("faults {first} and {second} overlap")]
    Overlap { first: Fragment, second: Fragment },
    #[error("invalid budget configuration: {0}")]
    BadConfig(String),
    #[error("unknown budget profile `{0}` (expected s1 or s4)")]
    UnknownProfile(String),
}

/// Numeric bounds that make "small fragment" precise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultBudgetConfig {
    /// Largest single fault as a fraction of the sequence length.
    pub single_fault_fraction: f64,
    /// Allowed deviation of repair length from fault length, relative to the
    /// fault length.
    pub fix_length_deviation: f64,
    /// Largest total fault volume as a fraction of the initial length.
    pub total_fraction: f64,
    /// Minimum admitted fault length regardless of the fraction.
    pub length_floor: usize,
    pub enforce_minimality: bool,
}

impl Default for FaultBudgetConfig {
    fn default() -> Self {
        FaultBudgetConfig::s1()
    }
}

impl FaultBudgetConfig {
    /// 5% single fault, 50% fix deviation, 25% total.
    pub fn s1() -> Self {
        FaultBudgetConfig {
            single_fault_fraction: 0.05,
            fix_length_deviation: 0.50,
            total_fraction: 0.25,
            length_floor: 1,
            enforce_minimality: false,
        }
    }

    /// 10% single fault, 50% fix deviation, 25% total.
    pub fn s4() -> Self {
        FaultBudgetConfig {
            single_fault_fraction: 0.10,
            ..FaultBudgetConfig::s1()
        }
    }

    pub fn preset(name: &str) -> Result<Self, FaultError> {
        match name {
            "s1" => Ok(Self::s1()),
            "s4" => Ok(Self::s4()),
            _ => Err(FaultError::UnknownProfile(name.to_string())),
        }
    }

    pub fn validate(&self) -> Result<(), FaultError> {
        let in_unit = |v: f64| v > 0.0 && v <= 1.0;
        if !in_unit(self.single_fault_fraction) {
            return Err(FaultError::BadConfig("single_fault_fraction must be in (0,1]".into()));
        }
        if !in_unit(self.fix_length_deviation) {
            return Err(FaultError::BadConfig("fix_length_deviation must be in (0,1]".into()));
        }
        if !in_unit(self.total_fraction) {
            return Err(FaultError::BadConfig("total_fraction must be in (0,1]".into()));
        }
        if self.length_floor < 1 {
            return Err(FaultError::BadConfig("length_floor must be at least 1".into()));
        }
        Ok(())
    }

    /// `max(floor, ⌊fraction · len⌋)`
    pub fn max_fault_len(&self, len: usize) -> usize {
        let scaled = (self.single_fault_fraction * len as f64 + EPS).floor() as usize;
        scaled.max(self.length_floor)
    }

    /// Largest `|repair − fault|` admitted for a fault of `fault_len`.
    pub fn max_length_deviation(&self, fault_len: usize) -> usize {
        (self.fix_length_deviation * fault_len as f64 + EPS).floor() as usize
    }

    pub fn repair_len_range(&self, fault_len: usize) -> std::ops::RangeInclusive<usize> {
        let dev = self.max_length_deviation(fault_len);
        fault_len.saturating_sub(dev)..=fault_len + dev
    }

    pub fn total_limit(&self, initial_len: usize) -> f64 {
        self.total_fraction * initial_len as f64
    }
}

/// Where regression cases come from.
#[derive(Debug, Clone, Copy)]
pub enum RegressionBasis<'a> {
    Suite(&'a [TestCase]),
    Exhaustive(&'a Specification),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Suite,
    Exhaustive,
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisKind::Suite => "suite",
            BasisKind::Exhaustive => "exhaustive",
        })
    }
}

impl RegressionBasis<'_> {
    pub fn kind(&self) -> BasisKind {
        match self {
            RegressionBasis::Suite(_) => BasisKind::Suite,
            RegressionBasis::Exhaustive(_) => BasisKind::Exhaustive,
        }
    }

    pub fn cases(&self) -> Result<Vec<TestCase>, TestingError> {
        match self {
            RegressionBasis::Suite(s) => Ok(s.to_vec()),
            RegressionBasis::Exhaustive(spec) => exhaustive_suite(spec),
        }
    }
}

/// Finite instruction alphabet for candidate repairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairAlphabet {
    instructions: Vec<Instruction>,
}

impl RepairAlphabet {
    pub fn new(instructions: Vec<Instruction>) -> Self {
        RepairAlphabet { instructions }
    }

    /// Positive and negative `get` tests on each register, then `set:0`,
    /// `set:1` and `negate` on each register, then `#1..=#max_jump`, then `!`.
    pub fn standard(registers: &[Register], max_jump: u64) -> Self {
        let mut out = Vec::new();
        for r in registers {
            out.push(Instruction::PosTest(r.clone(), Method::Get));
            out.push(Instruction::NegTest(r.clone(), Method::Get));
        }
        for r in registers {
            for m in [Method::Set0, Method::Set1, Method::Negate] {
                out.push(Instruction::Basic(r.clone(), m));
            }
        }
        out.extend((1..=max_jump).map(Instruction::FwdJump));
        out.push(Instruction::Halt);
        RepairAlphabet { instructions: out }
    }

    pub fn with_backward_jumps(mut self, max_jump: u64) -> Self {
        let halt = self.instructions.iter().position(|i| *i == Instruction::Halt);
        let at = halt.unwrap_or(self.instructions.len());
        for (n, k) in (1..=max_jump).enumerate() {
            self.instructions.insert(at + n, Instruction::BwdJump(k));
        }
        self
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }
}

/// Bounds for enumerating fragments and replacements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchBounds {
    pub alphabet: RepairAlphabet,
    /// Longest instruction list per replacement part.
    pub max_part_len: usize,
    /// Most parts per fragment in fragment enumeration.
    pub max_parts: usize,
    /// Stop after this many candidate certifications.
    pub max_candidates: Option<u64>,
}

impl SearchBounds {
    pub fn new(alphabet: RepairAlphabet, max_part_len: usize) -> Self {
        SearchBounds {
            alphabet,
            max_part_len,
            max_parts: 1,
            max_candidates: Some(1_000_000),
        }
    }

    /// Standard alphabet over the registers of `x` and `spec`, with forward
    /// jumps up to `len(x)`.
    pub fn for_program(x: &InstructionSequence, spec: Option<&Specification>, max_part_len: usize) -> Self {
        let mut regs = x.registers();
        if let Some(spec) = spec {
            regs.extend(spec.domain().iter().cloned());
        }
        regs.sort();
        regs.dedup();
        SearchBounds::new(RepairAlphabet::standard(&regs, x.len() as u64), max_part_len)
    }

    pub fn with_max_parts(mut self, max_parts: usize) -> Self {
        self.max_parts = max_parts;
        self
    }
}

/// All compositions of `total` into `arity` parts, each at most `cap`, in
/// lexicographic order.
fn compositions(total: usize, arity: usize, cap: usize) -> Vec<Vec<usize>> {
    fn go(total: usize, arity: usize, cap: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if arity == 0 {
            if total == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        if total > cap * arity {
            return;
        }
        for first in 0..=total.min(cap) {
            prefix.push(first);
            go(total - first, arity - 1, cap, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(total, arity, cap, &mut Vec::new(), &mut out);
    out
}

/// Replacements for a fragment of the given arity and length, within the
/// fix-length bound: by total length ascending, then part lengths, then
/// instructions in alphabet order.
pub struct Replacements<'a> {
    alphabet: &'a [Instruction],
    shapes: std::vec::IntoIter<Vec<usize>>,
    shape: Vec<usize>,
    digits: Vec<usize>,
    fresh: bool,
}

impl<'a> Replacements<'a> {
    pub fn new(arity: usize, fault_len: usize, config: &FaultBudgetConfig, bounds: &'a SearchBounds) -> Self {
        let shapes: Vec<Vec<usize>> = config
            .repair_len_range(fault_len)
            .flat_map(|total| compositions(total, arity, bounds.max_part_len))
            .collect();
        Replacements {
            alphabet: bounds.alphabet.instructions(),
            shapes: shapes.into_iter(),
            shape: Vec::new(),
            digits: Vec::new(),
            fresh: true,
        }
    }

    fn build(&self) -> Replacement {
        let mut parts = Vec::with_capacity(self.shape.len());
        let mut d = self.digits.iter();
        for &n in &self.shape {
            parts.push(d.by_ref().take(n).map(|&i| self.alphabet[i].clone()).collect());
        }
        Replacement::new(parts)
    }
}

impl Iterator for Replacements<'_> {
    type Item = Replacement;

    fn next(&mut self) -> Option<Replacement> {
        loop {
            if self.fresh {
                self.shape = self.shapes.next()?;
                let total: usize = self.shape.iter().sum();
                if total > 0 && self.alphabet.is_empty() {
                    continue;
                }
                self.digits = vec![0; total];
                self.fresh = false;
                return Some(self.build());
            }
            // odometer, last digit fastest
            let mut i = self.digits.len();
            loop {
                if i == 0 {
                    self.fresh = true;
                    break;
                }
                i -= 1;
                self.digits[i] += 1;
                if self.digits[i] < self.alphabet.len() {
                    return Some(self.build());
                }
                self.digits[i] = 0;
            }
        }
    }
}

/// A case that fails on the sequence under repair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureRecord {
    pub case: TestCase,
    pub result: TestResult,
    pub variant: SemanticsVariant,
}

impl FailureRecord {
    /// Runs `case` on `x`; fails with [`FaultError::StaleFailure`] if it passes.
    pub fn observe(
        x: &InstructionSequence,
        case: &TestCase,
        variant: SemanticsVariant,
        budget: u64,
    ) -> Result<Self, FaultError> {
        let result = run_confirmation_test(x, case, variant, budget.max(case.step_bound))?;
        if result.passed() {
            return Err(FaultError::StaleFailure(case.name.clone()));
        }
        Ok(FailureRecord {
            case: case.clone(),
            result,
            variant,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegressionEvidence {
    pub basis: BasisKind,
    /// Names of the cases that passed before the repair and were re-run.
    pub cases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedFault {
    pub fragment: Fragment,
    pub replacement: Replacement,
    pub trigger: FailureRecord,
    pub regression: RegressionEvidence,
    pub fault_len: usize,
    pub repair_len: usize,
    /// Length of the sequence the fault was found in.
    pub sequence_len: usize,
    pub fault_fraction: f64,
    pub repaired: InstructionSequence,
}

impl fmt::Display for CertifiedFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CertifiedFault fragment={} replacement=\"{}\"", self.fragment, self.replacement)?;
        writeln!(f, "  trigger: {} ({})", self.trigger.case.name, self.trigger.result.verdict)?;
        writeln!(
            f,
            "  regression: {} basis, {} cases re-run, all pass",
            self.regression.basis,
            self.regression.cases.len()
        )?;
        writeln!(
            f,
            "  fault length {} of {} (fraction {:.3}), repair length {}",
            self.fault_len, self.sequence_len, self.fault_fraction,
            self.repair_len
        )?;
        write!(f, "  repaired: {}", self.repaired)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectionReason {
    SizeBudget { fault_len: usize, limit: usize },
    FixLength { fault_len: usize, repair_len: usize, max_deviation: usize },
    RepairConfirmation { verdict: Verdict },
    Regression { cases: Vec<String> },
    NotMinimal { fragment: Fragment, replacement: Replacement },
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectionReason::SizeBudget { fault_len, limit } => {
                write!(f, "size budget: fault length {fault_len} > {limit}")
            }
            RejectionReason::FixLength {
                fault_len,
                repair_len,
                max_deviation,
            } => write!(
                f,
                "fix length: repair length {repair_len} deviates from {fault_len} by more than {max_deviation}"
            ),
            RejectionReason::RepairConfirmation { verdict } => {
                write!(f, "repair confirmation failed: {verdict}")
            }
            RejectionReason::Regression { cases } => {
                write!(f, "regression: newly failing {}", cases.join(","))
            }
            RejectionReason::NotMinimal { fragment, replacement } => write!(
                f,
                "not minimal: sub-fragment {fragment} repairs with \"{replacement}\""
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Certification {
    Certified(Box<CertifiedFault>),
    Rejected(Vec<RejectionReason>),
}

impl Certification {
    pub fn is_certified(&self) -> bool {
        matches!(self, Certification::Certified(_))
    }

    pub fn certified(&self) -> Option<&CertifiedFault> {
        match self {
            Certification::Certified(c) => Some(c),
            Certification::Rejected(_) => None,
        }
    }
}

/// Certification context for one sequence and one triggering failure. The
/// baseline (which regression cases pass before any repair) is computed once.
pub struct Certifier<'a> {
    x: &'a InstructionSequence,
    trigger: FailureRecord,
    basis: BasisKind,
    previously_passing: Vec<TestCase>,
    variant: SemanticsVariant,
    budget: u64,
    config: FaultBudgetConfig,
    minimality: Option<&'a SearchBounds>,
}

impl<'a> Certifier<'a> {
    /// `minimality` supplies the search bounds used when
    /// `config.enforce_minimality` is set.
    pub fn new(
        x: &'a InstructionSequence,
        basis: RegressionBasis<'_>,
        failing: &FailureRecord,
        variant: SemanticsVariant,
        budget: u64,
        config: FaultBudgetConfig,
        minimality: Option<&'a SearchBounds>,
    ) -> Result<Self, FaultError> {
        config.validate()?;
        let cases = basis.cases()?;
        let budget = cases
            .iter()
            .map(|c| c.step_bound)
            .chain([failing.case.step_bound, budget])
            .max()
            .unwrap_or(budget);
        let trigger = FailureRecord::observe(x, &failing.case, variant, budget)?;
        let baseline = evaluate_suite(x, &cases, variant, budget)?;
        let previously_passing = baseline
            .results
            .into_iter()
            .filter(|(_, r)| r.passed())
            .map(|(c, _)| c)
            .collect();
        Ok(Certifier {
            x,
            trigger,
            basis: basis.kind(),
            previously_passing,
            variant,
            budget,
            config,
            minimality,
        })
    }

    pub fn trigger(&self) -> &FailureRecord {
        &self.trigger
    }

    pub fn previously_passing(&self) -> &[TestCase] {
        &self.previously_passing
    }

    pub fn certify(&self, f: &Fragment, r: &Replacement) -> Result<Certification, FaultError> {
        let (mut reasons, repaired) = self.check(f, r, true)?;
        if self.config.enforce_minimality {
            if let Some(witness) = self.smaller_repair(f)? {
                reasons.push(witness);
            }
        }
        if !reasons.is_empty() {
            return Ok(Certification::Rejected(reasons));
        }
        Ok(Certification::Certified(Box::new(CertifiedFault {
            fragment: f.clone(),
            replacement: r.clone(),
            trigger: self.trigger.clone(),
            regression: RegressionEvidence {
                basis: self.basis,
                cases: self.previously_passing.iter().map(|c| c.name.clone()).collect(),
            },
            fault_len: f.total_length(),
            repair_len: r.total_length(),
            sequence_len: self.x.len(),
            fault_fraction: f.total_length() as f64 / self.x.len() as f64,
            repaired,
        })))
    }

    /// Conditions other than minimality. With `exhaustive_reasons` unset the
    /// check stops at the first violation.
    fn check(
        &self,
        f: &Fragment,
        r: &Replacement,
        exhaustive_reasons: bool,
    ) -> Result<(Vec<RejectionReason>, InstructionSequence), FaultError> {
        f.validate_for(self.x)?;
        let mut reasons = Vec::new();
        let fault_len = f.total_length();
        let repair_len = r.total_length();

        let limit = self.config.max_fault_len(self.x.len());
        if fault_len > limit {
            reasons.push(RejectionReason::SizeBudget { fault_len, limit });
        }
        let max_deviation = self.config.max_length_deviation(fault_len);
        if repair_len.abs_diff(fault_len) > max_deviation {
            reasons.push(RejectionReason::FixLength {
                fault_len,
                repair_len,
                max_deviation,
            });
        }
        let repaired = substitute(self.x, f, r)?;
        if !reasons.is_empty() && !exhaustive_reasons {
            return Ok((reasons, repaired));
        }

        let confirmation = run_confirmation_test(&repaired, &self.trigger.case, self.variant, self.budget)?;
        if !confirmation.passed() {
            reasons.push(RejectionReason::RepairConfirmation {
                verdict: confirmation.verdict,
            });
            if !exhaustive_reasons {
                return Ok((reasons, repaired));
            }
        }

        if let RegressionVerdict::NewlyFailing(failing) =
            regression_check(&repaired, &self.previously_passing, self.variant, self.budget)?
        {
            reasons.push(RejectionReason::Regression {
                cases: failing.into_iter().map(|(c, _)| c.name).collect(),
            });
        }
        Ok((reasons, repaired))
    }

    /// First proper sub-fragment (part-wise) that admits a repair satisfying
    /// every other condition.
    fn smaller_repair(&self, f: &Fragment) -> Result<Option<RejectionReason>, FaultError> {
        let default_bounds;
        let bounds = match self.minimality {
            Some(b) => b,
            None => {
                default_bounds = SearchBounds::for_program(self.x, None, f.total_length().max(1));
                &default_bounds
            }
        };
        for g in proper_subfragments(f) {
            for r in Replacements::new(g.arity(), g.total_length(), &self.config, bounds) {
                let (reasons, _) = match self.check(&g, &r, false) {
                    Ok(v) => v,
                    Err(FaultError::Substitute(SubstituteError::EmptyResult)) => continue,
                    Err(e) => return Err(e),
                };
                if reasons.is_empty() {
                    return Ok(Some(RejectionReason::NotMinimal {
                        fragment: g,
                        replacement: r,
                    }));
                }
            }
        }
        Ok(None)
    }
}

/// Fragments obtained by shrinking or dropping parts of `f`, excluding `f`.
pub fn proper_subfragments(f: &Fragment) -> Vec<Fragment> {
    let mut out = Vec::new();
    let parts = f.parts();
    fn go(
        parts: &[(usize, usize)],
        chosen: &mut Vec<(usize, usize)>,
        original: &Fragment,
        out: &mut Vec<Fragment>,
    ) {
        let Some((&(lo, hi), rest)) = parts.split_first() else {
            if !chosen.is_empty() && chosen.as_slice() != original.parts() {
                out.push(Fragment::new(chosen.clone()).expect("sub-ranges stay sorted and disjoint"));
            }
            return;
        };
        go(rest, chosen, original, out);
        for a in lo..=hi {
            for b in a..=hi {
                chosen.push((a, b));
                go(rest, chosen, original, out);
                chosen.pop();
            }
        }
    }
    go(parts, &mut Vec::new(), f, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
/// Certifies one fragment/replacement pair against a triggering failure and
/// a regression basis.
pub fn certify_fault(
    x: &InstructionSequence,
    basis: RegressionBasis<'_>,
    failing: &FailureRecord,
    f: &Fragment,
    r: &Replacement,
    config: FaultBudgetConfig,
    variant: SemanticsVariant,
    budget: u64,
) -> Result<Certification, FaultError> {
    f.validate_for(x)?;
    Certifier::new(x, basis, failing, variant, budget, config, None)?.certify(f, r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairCandidate {
    pub replacement: Replacement,
    pub certification: Certification,
}

#[allow(clippy::too_many_arguments)]
/// Enumerates replacements for `f` and certifies each against the first
/// failure in `failing`. Certified candidates come first; order is otherwise
/// the enumeration order.
pub fn search_repairs(
    x: &InstructionSequence,
    basis: RegressionBasis<'_>,
    failing: &[FailureRecord],
    f: &Fragment,
    config: FaultBudgetConfig,
    bounds: &SearchBounds,
    variant: SemanticsVariant,
    budget: u64,
) -> Result<Vec<RepairCandidate>, FaultError> {
    let trigger = failing.first().ok_or(FaultError::NoFailure)?;
    if bounds.alphabet.is_empty() {
        return Err(FaultError::EmptyAlphabet);
    }
    f.validate_for(x)?;
    let certifier = Certifier::new(x, basis, trigger, variant, budget, config, Some(bounds))?;
    let mut certified = Vec::new();
    let mut rejected = Vec::new();
    for replacement in Replacements::new(f.arity(), f.total_length(), &config, bounds) {
        let certification = match certifier.certify(f, &replacement) {
            Ok(c) => c,
            Err(FaultError::Substitute(SubstituteError::EmptyResult)) => continue,
            Err(e) => return Err(e),
        };
        let candidate = RepairCandidate {
            replacement,
            certification,
        };
        if candidate.certification.is_certified() {
            certified.push(candidate);
        } else {
            rejected.push(candidate);
        }
    }
    certified.extend(rejected);
    Ok(certified)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdealizedVerdict {
    /// Domain states failing before the repair and passing after.
    pub fixed: Vec<MachineState>,
    /// Domain states passing before the repair and failing after.
    pub regressions: Vec<MachineState>,
}

impl IdealizedVerdict {
    pub fn holds(&self) -> bool {
        !self.fixed.is_empty() && self.regressions.is_empty()
    }
}

/// Brute force over every domain state: at least one state flips from fail
/// to pass and none flips from pass to fail.
pub fn idealized_regression_criterion(
    x: &InstructionSequence,
    repaired: &InstructionSequence,
    spec: &Specification,
    variant: SemanticsVariant,
    budget: u64,
) -> Result<IdealizedVerdict, FaultError> {
    let budget = budget.max(spec.step_bound).max(1);
    let passes = |prog: &InstructionSequence, i: usize, s: &MachineState| -> Result<bool, FaultError> {
        let (outcome, _) = effectuate(prog, s, variant, budget).map_err(TestingError::from)?;
        Ok(outcome
            .terminated_state()
            .is_some_and(|end| spec.expected(i, s).accepts(end)))
    };
    let mut verdict = IdealizedVerdict {
        fixed: Vec::new(),
        regressions: Vec::new(),
    };
    for (i, s) in spec.states()?.into_iter().enumerate() {
        match (passes(x, i, &s)?, passes(repaired, i, &s)?) {
            (false, true) => verdict.fixed.push(s),
            (true, false) => verdict.regressions.push(s),
            _ => {}
        }
    }
    Ok(verdict)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    pub count: usize,
    pub total_length: usize,
    pub total_fraction: f64,
    pub limit_fraction: f64,
    /// Total volume exceeds the limit: the repairs amount to a redesign.
    pub redesign_required: bool,
}

impl fmt::Display for BudgetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "faults={} total_length={} total_fraction={:.3} limit={:.3}{}",
            self.count,
            self.total_length,
            self.total_fraction,
            self.limit_fraction,
            if self.redesign_required { " REDESIGN-REQUIRED" } else { "" }
        )
    }
}

/// Checks pairwise disjointness and totals fault volume against the limit.
pub fn account_fragments(
    len: usize,
    fragments: &[Fragment],
    config: &FaultBudgetConfig,
) -> Result<BudgetReport, FaultError> {
    for (i, a) in fragments.iter().enumerate() {
        for b in &fragments[i + 1..] {
            if a.overlaps(b) {
                return Err(FaultError::Overlap {
                    first: a.clone(),
                    second: b.clone(),
                });
            }
        }
    }
    let total_length: usize = fragments.iter().map(Fragment::total_length).sum();
    let total_fraction = total_length as f64 / len.max(1) as f64;
    Ok(BudgetReport {
        count: fragments.len(),
        total_length,
        total_fraction,
        limit_fraction: config.total_fraction,
        redesign_required: total_fraction > config.total_fraction + EPS,
    })
}

pub fn fault_accounting(
    x: &InstructionSequence,
    faults: &[CertifiedFault],
    config: &FaultBudgetConfig,
) -> Result<BudgetReport, FaultError> {
    let fragments: Vec<Fragment> = faults.iter().map(|f| f.fragment.clone()).collect();
    account_fragments(x.len(), &fragments, config)
}

/// One step of a repair chain. `fault` is relative to the sequence at that
/// step; `original_fragment` maps it back to the initial sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainLink {
    pub fault: CertifiedFault,
    pub original_fragment: Fragment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NotAdequateReason {
    BudgetExhausted,
    SearchExhausted,
}

impl fmt::Display for NotAdequateReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NotAdequateReason::BudgetExhausted => "budget-exhausted",
            NotAdequateReason::SearchExhausted => "search-exhausted",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdequacyVerdict {
    Adequate(Vec<ChainLink>),
    NotAdequate(NotAdequateReason),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub candidates_tried: u64,
    pub certified: u64,
    pub backtracks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdequacyReport {
    pub verdict: AdequacyVerdict,
    pub total_fraction: f64,
    pub stats: SearchStats,
}

impl AdequacyReport {
    pub fn is_adequate(&self) -> bool {
        matches!(self.verdict, AdequacyVerdict::Adequate(_))
    }

    pub fn chain(&self) -> Option<&[ChainLink]> {
        match &self.verdict {
            AdequacyVerdict::Adequate(c) => Some(c),
            AdequacyVerdict::NotAdequate(_) => None,
        }
    }
}

struct AdequacySearch<'a> {
    spec: &'a Specification,
    suite: Vec<TestCase>,
    config: FaultBudgetConfig,
    bounds: &'a SearchBounds,
    variant: SemanticsVariant,
    budget: u64,
    volume_limit: f64,
    stats: SearchStats,
    volume_blocked: bool,
    candidate_limit_hit: bool,
}

impl AdequacySearch<'_> {
    fn out_of_candidates(&self) -> bool {
        self.bounds
            .max_candidates
            .is_some_and(|m| self.stats.candidates_tried >= m)
    }

    /// Depth-first over failing cases, then fragments, then replacements.
    /// `origin[i]` is the initial position of instruction `i + 1`, or `None`
    /// if an earlier repair introduced it.
    fn dfs(
        &mut self,
        current: &InstructionSequence,
        origin: &[Option<usize>],
        used: &BTreeSet<usize>,
        chain: &mut Vec<ChainLink>,
    ) -> Result<bool, FaultError> {
        let report = evaluate_suite(current, &self.suite, self.variant, self.budget)?;
        let failing: Vec<(TestCase, TestResult)> = report
            .results
            .into_iter()
            .filter(|(_, r)| !r.passed())
            .collect();
        if failing.is_empty() {
            return Ok(true);
        }
        let max_len = self.config.max_fault_len(current.len());
        for (case, result) in failing {
            let record = FailureRecord {
                case,
                result,
                variant: self.variant,
            };
            let certifier = Certifier::new(
                current,
                RegressionBasis::Exhaustive(self.spec),
                &record,
                self.variant,
                self.budget,
                self.config,
                Some(self.bounds),
            )?;
            for f in enumerate_fragments(current, max_len, self.bounds.max_parts) {
                let mapped: Option<Vec<usize>> = f
                    .positions()
                    .map(|p| origin[p - 1].filter(|o| !used.contains(o)))
                    .collect();
                let Some(mapped) = mapped else { continue };
                let volume_ok = (used.len() + mapped.len()) as f64 <= self.volume_limit + EPS;
                if !volume_ok && self.volume_blocked {
                    continue;
                }
                for r in Replacements::new(f.arity(), f.total_length(), &self.config, self.bounds) {
                    if self.out_of_candidates() {
                        self.candidate_limit_hit = true;
                        return Ok(false);
                    }
                    self.stats.candidates_tried += 1;
                    let cert = match certifier.certify(&f, &r) {
                        Ok(c) => c,
                        Err(FaultError::Substitute(SubstituteError::EmptyResult)) => continue,
                        Err(e) => return Err(e),
                    };
                    let Certification::Certified(fault) = cert else { continue };
                    self.stats.certified += 1;
                    if !volume_ok {
                        self.volume_blocked = true;
                        break;
                    }
                    let next_origin = splice_origin(origin, &f, &r);
                    let mut next_used = used.clone();
                    next_used.extend(mapped.iter().copied());
                    let repaired = fault.repaired.clone();
                    chain.push(ChainLink {
                        original_fragment: Fragment::from_positions(mapped.iter().copied())?,
                        fault: *fault,
                    });
                    if self.dfs(&repaired, &next_origin, &next_used, chain)? {
                        return Ok(true);
                    }
                    chain.pop();
                    self.stats.backtracks += 1;
                    if self.candidate_limit_hit {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(false)
    }
}

fn splice_origin(origin: &[Option<usize>], f: &Fragment, r: &Replacement) -> Vec<Option<usize>> {
    let mut out = Vec::with_capacity(origin.len() + r.total_length());
    let mut next = 1;
    for (&(lo, hi), part) in f.parts().iter().zip(r.parts()) {
        out.extend_from_slice(&origin[next - 1..lo - 1]);
        out.extend(std::iter::repeat_n(None, part.len()));
        next = hi + 1;
    }
    out.extend_from_slice(&origin[next - 1..]);
    out
}

/// Searches for a chain of disjoint certified faults, repaired in
/// succession, that yields a sequence passing every exhaustive case while
/// keeping total fault volume within `config.total_fraction`.
pub fn check_adequacy(
    x: &InstructionSequence,
    spec: &Specification,
    config: FaultBudgetConfig,
    bounds: &SearchBounds,
    variant: SemanticsVariant,
    budget: u64,
) -> Result<AdequacyReport, FaultError> {
    config.validate()?;
    if bounds.alphabet.is_empty() {
        return Err(FaultError::EmptyAlphabet);
    }
    let suite = exhaustive_suite(spec)?;
    let mut search = AdequacySearch {
        spec,
        suite,
        config,
        bounds,
        variant,
        budget: budget.max(spec.step_bound),
        volume_limit: config.total_limit(x.len()),
        stats: SearchStats::default(),
        volume_blocked: false,
        candidate_limit_hit: false,
    };
    let origin: Vec<Option<usize>> = (1..=x.len()).map(Some).collect();
    let mut chain = Vec::new();
    let found = search.dfs(x, &origin, &BTreeSet::new(), &mut chain)?;
    let fragments: Vec<Fragment> = chain.iter().map(|l| l.original_fragment.clone()).collect();
    let total_fraction = account_fragments(x.len(), &fragments, &config)?.total_fraction;
    let verdict = if found {
        AdequacyVerdict::Adequate(chain)
    } else if search.candidate_limit_hit || search.volume_blocked {
        AdequacyVerdict::NotAdequate(NotAdequateReason::BudgetExhausted)
    } else {
        AdequacyVerdict::NotAdequate(NotAdequateReason::SearchExhausted)
    };
    Ok(AdequacyReport {
        verdict,
        total_fraction,
        stats: search.stats,
    })
}
