//! Confirmation tests `(input, acceptance, step bound)`, suites, regression
//! checks, specifications over finite register domains and the
//! purpose-tagged effectuation ledger.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::isa::{InstructionSequence, Register};
use crate::semantics::{effectuate, MachineState, Outcome, OutcomeKind, SemanticsError, SemanticsVariant, Trace};

/// Step bound used when a suite line omits `k`.
pub const DEFAULT_STEP_BOUND: u64 = 64;
/// Largest exhaustive domain accepted by default (2^16 states).
pub const DEFAULT_DOMAIN_CAP: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TestingError {
    #[error("budget {budget} is below the step bound {step_bound} of case `{case}`")]
    BudgetBelowBound {
        case: String,
        budget: u64,
        step_bound: u64,
    },
    #[error("step bound must be at least 1 (case `{0}`)")]
    ZeroStepBound(String),
    #[error("domain of {registers} registers has {states} states, above the cap of {cap}")]
    DomainOverCap {
        registers: usize,
        states: u128,
        cap: usize,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("effectuation record has no purpose")]
    MissingPurpose,
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

fn format_err(line: usize, message: impl Into<String>) -> TestingError {
    TestingError::Format {
        line,
        message: message.into(),
    }
}

/// Acceptance predicate over final states: a conjunction of register
/// constraints, or the wildcard.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Acceptance {
    Any,
    All(Vec<(Register, bool)>),
}

impl Acceptance {
    pub fn accepts(&self, state: &MachineState) -> bool {
        match self {
            Acceptance::Any => true,
            Acceptance::All(constraints) => constraints.iter().all(|(r, b)| state.get(r) == *b),
        }
    }

    pub fn is_wildcard(&self) -> bool {
        matches!(self, Acceptance::Any)
    }

    /// Canonical form for comparing predicates: `None` when unsatisfiable,
    /// otherwise the sorted constraint set.
    pub fn normalized(&self) -> Option<Vec<(Register, bool)>> {
        let mut cs = match self {
            Acceptance::Any => Vec::new(),
            Acceptance::All(cs) => cs.clone(),
        };
        cs.sort();
        cs.dedup();
        if cs.windows(2).any(|w| w[0].0 == w[1].0) {
            return None;
        }
        Some(cs)
    }

    pub fn equivalent(&self, other: &Acceptance) -> bool {
        self.normalized() == other.normalized()
    }
}

impl fmt::Display for Acceptance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Acceptance::Any => f.write_str("any"),
            Acceptance::All(cs) if cs.is_empty() => f.write_str("any"),
            Acceptance::All(cs) => {
                let text = cs
                    .iter()
                    .map(|(r, b)| format!("{r}={}", u8::from(*b)))
                    .collect::<Vec<_>>()
                    .join(",");
                f.write_str(&text)
            }
        }
    }
}

impl FromStr for Acceptance {
    type Err = SemanticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "any" {
            return Ok(Acceptance::Any);
        }
        let state: MachineState = s.parse()?;
        Ok(Acceptance::All(state.iter().map(|(r, b)| (r.clone(), b)).collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub name: String,
    pub input: MachineState,
    pub accept: Acceptance,
    pub step_bound: u64,
    /// True when the bound came from [`DEFAULT_STEP_BOUND`] rather than the
    /// suite text.
    pub step_bound_defaulted: bool,
}

impl TestCase {
    pub fn new(name: impl Into<String>, input: MachineState, accept: Acceptance, step_bound: u64) -> Self {
        TestCase {
            name: name.into(),
            input,
            accept,
            step_bound,
            step_bound_defaulted: false,
        }
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let input = self
            .input
            .iter()
            .map(|(r, b)| format!("{r}={}", u8::from(b)))
            .collect::<Vec<_>>()
            .join(",");
        write!(
            f,
            "case {}: in {} ; expect {} ; k {}",
            self.name, input, self.accept, self.step_bound
        )
    }
}

/// Parses the line-oriented suite format:
/// `case NAME: in REG=BIT,... ; expect (any | REG=BIT,...) ; k NAT`.
pub fn parse_suite(text: &str) -> Result<Vec<TestCase>, TestingError> {
    let mut cases = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('%').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let rest = line
            .strip_prefix("case")
            .filter(|r| r.starts_with(char::is_whitespace))
            .ok_or_else(|| format_err(line_no, "expected `case NAME: ...`"))?;
        let (name, body) = rest
            .split_once(':')
            .ok_or_else(|| format_err(line_no, "missing `:` after case name"))?;
        let name = name.trim();
        if !crate::isa::is_identifier(name) {
            return Err(format_err(line_no, format!("invalid case name `{name}`")));
        }
        if cases.iter().any(|c: &TestCase| c.name == name) {
            return Err(format_err(line_no, format!("duplicate case `{name}`")));
        }
        let mut input = None;
        let mut accept = None;
        let mut bound = None;
        for clause in body.split(';') {
            let clause = clause.trim();
            let (key, value) = clause
                .split_once(char::is_whitespace)
                .map(|(k, v)| (k, v.trim()))
                .unwrap_or((clause, ""));
            let bad = |what: &str| format_err(line_no, format!("invalid {what} `{value}`"));
            match key {
                "in" if input.is_none() => {
                    input = Some(value.parse::<MachineState>().map_err(|_| bad("input"))?)
                }
                "expect" if accept.is_none() => {
                    accept = Some(value.parse::<Acceptance>().map_err(|_| bad("expectation"))?)
                }
                "k" if bound.is_none() => {
                    let k: u64 = value.parse().map_err(|_| bad("step bound"))?;
                    if k == 0 {
                        return Err(format_err(line_no, "step bound must be at least 1"));
                    }
                    bound = Some(k)
                }
                _ => return Err(format_err(line_no, format!("unexpected clause `{clause}`"))),
            }
        }
        let input = input.ok_or_else(|| format_err(line_no, "missing `in` clause"))?;
        let accept = accept.ok_or_else(|| format_err(line_no, "missing `expect` clause"))?;
        cases.push(TestCase {
            name: name.to_string(),
            input,
            accept,
            step_bound: bound.unwrap_or(DEFAULT_STEP_BOUND),
            step_bound_defaulted: bound.is_none(),
        });
    }
    Ok(cases)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailReason {
    TerminatedOutsideU,
    Deadlock,
    ErrorHalt,
    Livelock,
    BudgetExhaustedAfterK,
    StaticallyRejected,
}

impl FailReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailReason::TerminatedOutsideU => "terminated-outside-U",
            FailReason::Deadlock => "deadlock",
            FailReason::ErrorHalt => "error-halt",
            FailReason::Livelock => "livelock",
            FailReason::BudgetExhaustedAfterK => "budget-exhausted-after-k",
            FailReason::StaticallyRejected => "statically-rejected",
        }
    }
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Pass,
    Fail(FailReason),
}

impl Verdict {
    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => f.write_str("PASS"),
            Verdict::Fail(r) => write!(f, "FAIL({r})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestResult {
    pub verdict: Verdict,
    pub outcome: Outcome,
    pub steps_observed: u64,
    pub trace: Trace,
}

impl TestResult {
    pub fn passed(&self) -> bool {
        self.verdict.is_pass()
    }
}

/// Verdict of an outcome against an acceptance predicate.
pub fn judge(outcome: &Outcome, accept: &Acceptance) -> Verdict {
    match outcome {
        Outcome::Terminated { state, .. } if accept.accepts(state) => Verdict::Pass,
        Outcome::Terminated { .. } => Verdict::Fail(FailReason::TerminatedOutsideU),
        Outcome::ErrorHalt { .. } => Verdict::Fail(FailReason::ErrorHalt),
        Outcome::Deadlock { .. } => Verdict::Fail(FailReason::Deadlock),
        Outcome::Livelock { .. } => Verdict::Fail(FailReason::Livelock),
        Outcome::BudgetExhausted { .. } => Verdict::Fail(FailReason::BudgetExhaustedAfterK),
        Outcome::StaticallyRejected { .. } => Verdict::Fail(FailReason::StaticallyRejected),
    }
}

/// Runs one confirmation test. The budget must cover the case's step bound;
/// a run that terminates later than `k` steps but within budget may pass.
pub fn run_confirmation_test(
    x: &InstructionSequence,
    tc: &TestCase,
    v: SemanticsVariant,
    budget: u64,
) -> Result<TestResult, TestingError> {
    if tc.step_bound == 0 {
        return Err(TestingError::ZeroStepBound(tc.name.clone()));
    }
    if budget < tc.step_bound {
        return Err(TestingError::BudgetBelowBound {
            case: tc.name.clone(),
            budget,
            step_bound: tc.step_bound,
        });
    }
    let (outcome, trace) = effectuate(x, &tc.input, v, budget)?;
    Ok(TestResult {
        verdict: judge(&outcome, &tc.accept),
        steps_observed: outcome.steps(),
        outcome,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub results: Vec<(TestCase, TestResult)>,
    pub passed: usize,
    pub failed: usize,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn total(&self) -> usize {
        self.results.len()
    }
}

fn check_budget(suite: &[TestCase], budget: u64) -> Result<(), TestingError> {
    for tc in suite {
        if tc.step_bound == 0 {
            return Err(TestingError::ZeroStepBound(tc.name.clone()));
        }
        if budget < tc.step_bound {
            return Err(TestingError::BudgetBelowBound {
                case: tc.name.clone(),
                budget,
                step_bound: tc.step_bound,
            });
        }
    }
    Ok(())
}

/// Runs every case in order without touching a ledger.
pub fn evaluate_suite(
    x: &InstructionSequence,
    suite: &[TestCase],
    v: SemanticsVariant,
    budget: u64,
) -> Result<SuiteReport, TestingError> {
    check_budget(suite, budget)?;
    let mut results = Vec::with_capacity(suite.len());
    for tc in suite {
        results.push((tc.clone(), run_confirmation_test(x, tc, v, budget)?));
    }
    let passed = results.iter().filter(|(_, r)| r.passed()).count();
    Ok(SuiteReport {
        failed: results.len() - passed,
        passed,
        results,
    })
}

/// Runs the suite and appends one confirmation-test record per case.
pub fn run_suite(
    x: &InstructionSequence,
    program_id: &str,
    suite: &[TestCase],
    v: SemanticsVariant,
    budget: u64,
    ledger: &mut EffectuationLedger,
) -> Result<SuiteReport, TestingError> {
    let report = evaluate_suite(x, suite, v, budget)?;
    for (tc, result) in &report.results {
        ledger
            .record(
                RecordDraft::new(program_id, &result.outcome)
                    .purpose(Purpose::ConfirmationTest)
                    .input(tc.input.clone())
                    .coverage(x.len(), result.trace.positions())
                    .oracle(tc.accept.is_wildcard()),
            )
            .expect("purpose is set");
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegressionVerdict {
    Pass,
    NewlyFailing(Vec<(TestCase, TestResult)>),
}

impl RegressionVerdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, RegressionVerdict::Pass)
    }
}

/// Re-runs previously passing cases on a repaired sequence.
pub fn regression_check(
    repaired: &InstructionSequence,
    previously_passing: &[TestCase],
    v: SemanticsVariant,
    budget: u64,
) -> Result<RegressionVerdict, TestingError> {
    let report = evaluate_suite(repaired, previously_passing, v, budget)?;
    let failing: Vec<_> = report
        .results
        .into_iter()
        .filter(|(_, r)| !r.passed())
        .collect();
    Ok(if failing.is_empty() {
        RegressionVerdict::Pass
    } else {
        RegressionVerdict::NewlyFailing(failing)
    })
}

/// One constraint of a closed-form rule: `target` must equal `source`
/// (negated when `negated`) of the input state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CopyRule {
    pub target: Register,
    pub source: Register,
    pub negated: bool,
}

impl fmt::Display for CopyRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let neg = if self.negated { "!" } else { "" };
        write!(f, "{}={neg}{}", self.target, self.source)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Expectations {
    Rules(Vec<CopyRule>),
    /// One predicate per domain state, in domain order.
    Table(Vec<Acceptance>),
}

/// An oracle over an exhaustively enumerable register domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Specification {
    domain: Vec<Register>,
    expectations: Expectations,
    pub step_bound: u64,
    pub cap: usize,
}

impl Specification {
    pub fn from_rules(domain: Vec<Register>, rules: Vec<CopyRule>) -> Self {
        Specification {
            domain,
            expectations: Expectations::Rules(rules),
            step_bound: DEFAULT_STEP_BOUND,
            cap: DEFAULT_DOMAIN_CAP,
        }
    }

    /// `expected` maps each domain state (in [`Specification::states`]
    /// order) to its acceptance predicate.
    pub fn from_table(domain: Vec<Register>, expected: Vec<Acceptance>) -> Result<Self, TestingError> {
        let spec = Specification {
            domain,
            expectations: Expectations::Table(expected),
            step_bound: DEFAULT_STEP_BOUND,
            cap: DEFAULT_DOMAIN_CAP,
        };
        let states = spec.state_count()?;
        if let Expectations::Table(t) = &spec.expectations {
            if t.len() != states {
                return Err(format_err(0, format!("{} expectations for {states} states", t.len())));
            }
        }
        Ok(spec)
    }

    /// `o=i` over `{i, o}`.
    pub fn copy(target: &str, source: &str) -> Self {
        let t = Register::new(target).expect("register name");
        let s = Register::new(source).expect("register name");
        let mut domain = vec![s.clone(), t.clone()];
        domain.sort();
        domain.dedup();
        Specification::from_rules(
            domain,
            vec![CopyRule {
                target: t,
                source: s,
                negated: false,
            }],
        )
    }

    pub fn with_step_bound(mut self, k: u64) -> Self {
        self.step_bound = k;
        self
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn domain(&self) -> &[Register] {
        &self.domain
    }

    pub fn state_count(&self) -> Result<usize, TestingError> {
        let n = self.domain.len();
        let states: u128 = if n >= 127 { u128::MAX } else { 1u128 << n };
        if states > self.cap as u128 {
            return Err(TestingError::DomainOverCap {
                registers: n,
                states,
                cap: self.cap,
            });
        }
        Ok(states as usize)
    }

    /// Every domain state, counting in binary with the first register as
    /// the most significant bit.
    pub fn states(&self) -> Result<Vec<MachineState>, TestingError> {
        let count = self.state_count()?;
        let n = self.domain.len();
        Ok((0..count)
            .map(|bits| {
                MachineState::from_pairs(
                    self.domain
                        .iter()
                        .enumerate()
                        .map(|(i, r)| (r.clone(), bits >> (n - 1 - i) & 1 == 1)),
                )
            })
            .collect())
    }

    /// Acceptance predicate for the state at `index` in domain order.
    pub fn expected(&self, index: usize, input: &MachineState) -> Acceptance {
        match &self.expectations {
            Expectations::Rules(rules) => Acceptance::All(
                rules
                    .iter()
                    .map(|r| (r.target.clone(), input.get(&r.source) != r.negated))
                    .collect(),
            ),
            Expectations::Table(t) => t[index].clone(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, TestingError> {
        let mut domain: Option<Vec<Register>> = None;
        let mut rules = Vec::new();
        let mut table: Vec<(usize, MachineState, Acceptance)> = Vec::new();
        let mut bound = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('%').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(char::is_whitespace)
                .map(|(k, v)| (k, v.trim()))
                .unwrap_or((line, ""));
            match key {
                "domain" if domain.is_none() => {
                    let mut regs = Vec::new();
                    for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        let r = Register::new(name)
                            .ok_or_else(|| format_err(line_no, format!("invalid register `{name}`")))?;
                        if regs.contains(&r) {
                            return Err(format_err(line_no, format!("duplicate register `{name}`")));
                        }
                        regs.push(r);
                    }
                    domain = Some(regs);
                }
                "rule" => {
                    let (t, s) = value
                        .split_once('=')
                        .ok_or_else(|| format_err(line_no, "rule must read `TARGET=SOURCE`"))?;
                    let (negated, s) = match s.trim().strip_prefix('!') {
                        Some(rest) => (true, rest),
                        None => (false, s.trim()),
                    };
                    let target = Register::new(t.trim())
                        .ok_or_else(|| format_err(line_no, format!("invalid register `{t}`")))?;
                    let source = Register::new(s.trim())
                        .ok_or_else(|| format_err(line_no, format!("invalid register `{s}`")))?;
                    rules.push((line_no, CopyRule {
                        target,
                        source,
                        negated,
                    }));
                }
                "expect" => {
                    let (input, out) = value
                        .split_once("=>")
                        .ok_or_else(|| format_err(line_no, "expect must read `STATE => PREDICATE`"))?;
                    let input: MachineState = input
                        .parse()
                        .map_err(|_| format_err(line_no, format!("invalid state `{}`", input.trim())))?;
                    let out: Acceptance = out
                        .parse()
                        .map_err(|_| format_err(line_no, format!("invalid predicate `{}`", out.trim())))?;
                    table.push((line_no, input, out));
                }
                "k" if bound.is_none() => {
                    let k: u64 = value
                        .parse()
                        .ok()
                        .filter(|&k| k >= 1)
                        .ok_or_else(|| format_err(line_no, format!("invalid step bound `{value}`")))?;
                    bound = Some(k);
                }
                _ => return Err(format_err(line_no, format!("unexpected line `{line}`"))),
            }
        }
        let domain = domain.ok_or_else(|| format_err(1, "missing `domain` header"))?;
        let in_domain = |line: usize, r: &Register| {
            if domain.contains(r) {
                Ok(())
            } else {
                Err(format_err(line, format!("register `{r}` not in domain")))
            }
        };
        let mut spec = match (rules.is_empty(), table.is_empty()) {
            (false, false) => return Err(format_err(1, "mixing `rule` and `expect` lines")),
            (true, true) => return Err(format_err(1, "no `rule` or `expect` lines")),
            (false, true) => {
                for (line, rule) in &rules {
                    in_domain(*line, &rule.source)?;
                }
                Specification::from_rules(domain, rules.into_iter().map(|(_, r)| r).collect())
            }
            (true, false) => {
                let probe = Specification::from_rules(domain.clone(), Vec::new());
                let states = probe.states()?;
                let mut slots: Vec<Option<Acceptance>> = vec![None; states.len()];
                for (line, input, out) in table {
                    for (r, _) in input.iter() {
                        in_domain(line, r)?;
                    }
                    let full = MachineState::from_pairs(domain.iter().map(|r| (r.clone(), input.get(r))));
                    let idx = states.iter().position(|s| *s == full).expect("state in domain");
                    if slots[idx].replace(out).is_some() {
                        return Err(format_err(line, format!("duplicate expectation for {full}")));
                    }
                }
                if let Some(missing) = slots.iter().position(Option::is_none) {
                    return Err(format_err(1, format!("no expectation for {}", states[missing])));
                }
                Specification::from_table(domain, slots.into_iter().map(Option::unwrap).collect())?
            }
        };
        if let Some(k) = bound {
            spec.step_bound = k;
        }
        Ok(spec)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "domain {}\n",
            self.domain.iter().map(Register::as_str).collect::<Vec<_>>().join(",")
        );
        match &self.expectations {
            Expectations::Rules(rules) => {
                for r in rules {
                    out.push_str(&format!("rule {r}\n"));
                }
            }
            Expectations::Table(t) => {
                for (s, a) in self.states().unwrap_or_default().iter().zip(t) {
                    let s = s.to_string();
                    out.push_str(&format!("expect {} => {a}\n", &s[1..s.len() - 1]));
                }
            }
        }
        out.push_str(&format!("k {}\n", self.step_bound));
        out
    }
}

/// Stable case name for a domain state: `s` followed by its bits.
pub fn state_case_name(spec: &Specification, state: &MachineState) -> String {
    let bits: String = spec
        .domain()
        .iter()
        .map(|r| if state.get(r) { '1' } else { '0' })
        .collect();
    format!("s{bits}")
}

/// One test case per domain state, in domain order.
pub fn exhaustive_suite(spec: &Specification) -> Result<Vec<TestCase>, TestingError> {
    let states = spec.states()?;
    Ok(states
        .iter()
        .enumerate()
        .map(|(i, s)| TestCase::new(state_case_name(spec, s), s.clone(), spec.expected(i, s), spec.step_bound))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Purpose {
    ConfirmationTest,
    ExperimentationTest,
    Demonstration,
    PracticalUse,
}

impl Purpose {
    pub const ALL: [Purpose; 4] = [
        Purpose::ConfirmationTest,
        Purpose::ExperimentationTest,
        Purpose::Demonstration,
        Purpose::PracticalUse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Purpose::ConfirmationTest => "confirmation-test",
            Purpose::ExperimentationTest => "experimentation-test",
            Purpose::Demonstration => "demonstration",
            Purpose::PracticalUse => "practical-use",
        }
    }

    pub fn is_test(self) -> bool {
        matches!(self, Purpose::ConfirmationTest | Purpose::ExperimentationTest)
    }
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Purpose {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Purpose::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown purpose `{s}`"))
    }
}

/// Positions a run processed, relative to the program length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coverage {
    pub program_len: usize,
    pub positions: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectuationRecord {
    /// Logical timestamp: index in the ledger.
    pub seq: usize,
    pub purpose: Purpose,
    pub program_id: String,
    pub input: Option<MachineState>,
    pub outcome: OutcomeKind,
    pub steps: u64,
    pub coverage: Option<Coverage>,
    /// For test records: whether the oracle was the wildcard.
    pub wildcard_oracle: Option<bool>,
}

impl EffectuationRecord {
    /// `PURPOSE PROGRAM-ID OUTCOME STEPS`
    pub fn to_line(&self) -> String {
        format!("{} {} {} {}", self.purpose, self.program_id, self.outcome, self.steps)
    }
}

/// Record under construction; the purpose is checked when it is appended.
#[derive(Debug, Clone)]
pub struct RecordDraft {
    purpose: Option<Purpose>,
    program_id: String,
    input: Option<MachineState>,
    outcome: OutcomeKind,
    steps: u64,
    coverage: Option<Coverage>,
    wildcard_oracle: Option<bool>,
}

impl RecordDraft {
    pub fn new(program_id: &str, outcome: &Outcome) -> Self {
        RecordDraft::raw(program_id, outcome.kind(), outcome.steps())
    }

    pub fn raw(program_id: &str, outcome: OutcomeKind, steps: u64) -> Self {
        RecordDraft {
            purpose: None,
            program_id: program_id.to_string(),
            input: None,
            outcome,
            steps,
            coverage: None,
            wildcard_oracle: None,
        }
    }

    pub fn purpose(mut self, purpose: Purpose) -> Self {
        self.purpose = Some(purpose);
        self
    }

    pub fn input(mut self, input: MachineState) -> Self {
        self.input = Some(input);
        self
    }

    pub fn coverage(mut self, program_len: usize, positions: impl IntoIterator<Item = usize>) -> Self {
        self.coverage = Some(Coverage {
            program_len,
            positions: positions.into_iter().collect(),
        });
        self
    }

    pub fn oracle(mut self, wildcard: bool) -> Self {
        self.wildcard_oracle = Some(wildcard);
        self
    }
}

/// Append-only log of effectuations, each tagged with its purpose.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EffectuationLedger {
    records: Vec<EffectuationRecord>,
}

impl EffectuationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, draft: RecordDraft) -> Result<&EffectuationRecord, LedgerError> {
        let purpose = draft.purpose.ok_or(LedgerError::MissingPurpose)?;
        let seq = self.records.len();
        self.records.push(EffectuationRecord {
            seq,
            purpose,
            program_id: draft.program_id,
            input: draft.input,
            outcome: draft.outcome,
            steps: draft.steps,
            coverage: draft.coverage,
            wildcard_oracle: draft.wildcard_oracle,
        });
        Ok(&self.records[seq])
    }

    pub fn records(&self) -> &[EffectuationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.records.iter().map(|r| r.to_line() + "\n").collect()
    }

    /// Reads `PURPOSE PROGRAM-ID OUTCOME STEPS` lines.
    pub fn parse(text: &str) -> Result<Self, LedgerError> {
        let mut ledger = EffectuationLedger::new();
        for (idx, line) in text.lines().enumerate() {
            let err = |message: String| LedgerError::Format {
                line: idx + 1,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let [purpose, program, outcome, steps] = fields[..] else {
                if fields.len() == 3 {
                    return Err(LedgerError::MissingPurpose);
                }
                return Err(err(format!("expected 4 fields, found {}", fields.len())));
            };
            let purpose: Purpose = purpose.parse().map_err(err)?;
            let outcome: OutcomeKind = outcome.parse().map_err(err)?;
            let steps: u64 = steps.parse().map_err(|_| err(format!("invalid step count `{steps}`")))?;
            ledger.record(RecordDraft::raw(program, outcome, steps).purpose(purpose))?;
        }
        Ok(ledger)
    }
}

/// Appends a record, returning the extended ledger.
pub fn record_effectuation(
    mut ledger: EffectuationLedger,
    draft: RecordDraft,
) -> Result<EffectuationLedger, LedgerError> {
    ledger.record(draft)?;
    Ok(ledger)
}
