//! Non-mechanical readings of "fault": coding-rule violations, a
//! location-free incorrectness verdict, the split between specification
//! defects and sequence faults, and process indicators over the ledger.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::isa::{Instruction, InstructionSequence};
use crate::semantics::{effectuate, MachineState, Outcome, SemanticsVariant};
use crate::testing::{Acceptance, EffectuationLedger, Purpose, Specification, TestingError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ViewsError {
    #[error("unknown lint rule `{0}` (expected unreachable, oor-jump, jump-chain, no-halt, dead-store)")]
    UnknownRule(String),
    #[error("specification and intent range over different domains")]
    DomainMismatch,
    #[error(transparent)]
    Testing(#[from] TestingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleId {
    Unreachable,
    OorJump,
    JumpChain,
    NoHalt,
    DeadStore,
}

impl RuleId {
    pub const ALL: [RuleId; 5] = [
        RuleId::Unreachable,
        RuleId::OorJump,
        RuleId::JumpChain,
        RuleId::NoHalt,
        RuleId::DeadStore,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::Unreachable => "unreachable",
            RuleId::OorJump => "oor-jump",
            RuleId::JumpChain => "jump-chain",
            RuleId::NoHalt => "no-halt",
            RuleId::DeadStore => "dead-store",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            RuleId::OorJump | RuleId::NoHalt => Severity::Hazard,
            RuleId::Unreachable | RuleId::JumpChain | RuleId::DeadStore => Severity::Style,
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RuleId {
    type Err = ViewsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.as_str() == s.trim())
            .ok_or_else(|| ViewsError::UnknownRule(s.to_string()))
    }
}

/// Comma-separated rule ids.
pub fn parse_rules(text: &str) -> Result<Vec<RuleId>, ViewsError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Style,
    Hazard,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Style => "style",
            Severity::Hazard => "hazard",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: RuleId,
    pub positions: Vec<usize>,
    pub message: String,
    pub severity: Severity,
}

impl Violation {
    fn new(rule: RuleId, positions: Vec<usize>, message: String) -> Self {
        Violation {
            rule,
            positions,
            message,
            severity: rule.severity(),
        }
    }

    /// `VIOLATION <rule> <positions>`
    pub fn machine_line(&self) -> String {
        let positions = self
            .positions
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(",");
        format!("VIOLATION {} {}", self.rule, positions)
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = self
            .positions
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(",");
        write!(f, "[{}] {} at {}: {}", self.severity, self.rule, at, self.message)
    }
}

/// In-range control successors of `position` under the default variant.
fn successors(x: &InstructionSequence, position: usize) -> Vec<usize> {
    let len = x.len() as i128;
    let p = position as i128;
    let targets: Vec<i128> = match x.get(position) {
        None | Some(Instruction::Halt) => Vec::new(),
        Some(Instruction::FwdJump(0) | Instruction::BwdJump(0)) => Vec::new(),
        Some(j @ (Instruction::FwdJump(_) | Instruction::BwdJump(_))) => {
            vec![j.jump_target(position).expect("jump")]
        }
        Some(Instruction::Basic(..)) => vec![p + 1],
        Some(Instruction::PosTest(..) | Instruction::NegTest(..)) => vec![p + 1, p + 2],
    };
    targets
        .into_iter()
        .filter(|t| (1..=len).contains(t))
        .map(|t| t as usize)
        .collect()
}

/// Positions reachable from 1 in the position graph.
pub fn reachable_positions(x: &InstructionSequence) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([1]);
    let mut stack = vec![1];
    while let Some(p) = stack.pop() {
        for q in successors(x, p) {
            if seen.insert(q) {
                stack.push(q);
            }
        }
    }
    seen
}

fn dead_stores(x: &InstructionSequence) -> Vec<Violation> {
    let mut out = Vec::new();
    for (idx, ins) in x.instructions().iter().enumerate() {
        let Instruction::Basic(reg, method) = ins else { continue };
        if !method.is_store() {
            continue;
        }
        let start = idx + 1;
        // Follow the unique control path until the register is read,
        // rewritten, or control branches or stops.
        let mut visited = BTreeSet::from([start]);
        let mut p = start;
        loop {
            let succ = successors(x, p);
            let [next] = succ[..] else { break };
            if !visited.insert(next) {
                break;
            }
            let Some(candidate) = x.get(next) else { break };
            match candidate {
                Instruction::Basic(r, m) if r == reg => {
                    if m.is_store() {
                        out.push(Violation::new(
                            RuleId::DeadStore,
                            vec![start, next],
                            format!("{reg} written at {start} is overwritten at {next} before any read"),
                        ));
                    }
                    break;
                }
                Instruction::PosTest(r, m) | Instruction::NegTest(r, m) if r == reg => {
                    if m.is_store() {
                        out.push(Violation::new(
                            RuleId::DeadStore,
                            vec![start, next],
                            format!("{reg} written at {start} is overwritten at {next} before any read"),
                        ));
                    }
                    break;
                }
                Instruction::PosTest(..) | Instruction::NegTest(..) | Instruction::Halt => break,
                _ => p = next,
            }
        }
    }
    out
}

/// Applies the selected rules; results are ordered by first position, then
/// rule.
pub fn lint(x: &InstructionSequence, rules: &[RuleId]) -> Vec<Violation> {
    let rules: BTreeSet<RuleId> = rules.iter().copied().collect();
    let reachable = reachable_positions(x);
    let mut out = Vec::new();
    for rule in rules {
        match rule {
            RuleId::Unreachable => {
                for p in (1..=x.len()).filter(|p| !reachable.contains(p)) {
                    out.push(Violation::new(
                        rule,
                        vec![p],
                        format!("instruction {} cannot be reached from position 1", x.get(p).expect("in range")),
                    ));
                }
            }
            RuleId::OorJump => {
                for v in crate::semantics::static_check(x) {
                    out.push(Violation::new(
                        rule,
                        vec![v.position],
                        format!("jump target {} lies outside 1..{}", v.target, x.len()),
                    ));
                }
            }
            RuleId::JumpChain => {
                for (idx, ins) in x.instructions().iter().enumerate() {
                    let p = idx + 1;
                    let Some(t) = ins.jump_target(p) else { continue };
                    if t == p as i128 || t < 1 || t > x.len() as i128 {
                        continue;
                    }
                    let t = t as usize;
                    let target = x.get(t).expect("in range");
                    if target.is_jump() && target.jump_target(t) != Some(t as i128) {
                        out.push(Violation::new(
                            rule,
                            vec![p, t],
                            format!("jump at {p} lands on another jump ({target}) at {t}"),
                        ));
                    }
                }
            }
            RuleId::NoHalt => {
                let halts = reachable
                    .iter()
                    .any(|&p| x.get(p) == Some(&Instruction::Halt));
                if !halts {
                    out.push(Violation::new(
                        rule,
                        vec![1],
                        "no halt instruction is reachable from position 1".into(),
                    ));
                }
            }
            RuleId::DeadStore => out.extend(dead_stores(x)),
        }
    }
    out.sort_by_key(|v| (v.positions.first().copied().unwrap_or(0), v.rule));
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub input: MachineState,
    pub observed: Outcome,
    pub expected: Acceptance,
}

/// Correct or incorrect with witnesses. Never carries fault locations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IncorrectnessReport {
    Correct { states: usize },
    Incorrect { states: usize, witnesses: Vec<Witness> },
}

impl IncorrectnessReport {
    pub fn is_correct(&self) -> bool {
        matches!(self, IncorrectnessReport::Correct { .. })
    }

    pub fn witnesses(&self) -> &[Witness] {
        match self {
            IncorrectnessReport::Correct { .. } => &[],
            IncorrectnessReport::Incorrect { witnesses, .. } => witnesses,
        }
    }
}

impl fmt::Display for IncorrectnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IncorrectnessReport::Correct { states } => write!(f, "Correct ({states} states)"),
            IncorrectnessReport::Incorrect { states, witnesses } => {
                write!(f, "Incorrect ({} of {states} states)", witnesses.len())?;
                for w in witnesses {
                    write!(f, "\n  witness {}: observed {}; expected {}", w.input, w.observed, w.expected)?;
                }
                Ok(())
            }
        }
    }
}

fn satisfies(x: &InstructionSequence, input: &MachineState, accept: &Acceptance, v: SemanticsVariant, budget: u64) -> Result<(bool, Outcome), ViewsError> {
    let (outcome, _) = effectuate(x, input, v, budget).map_err(TestingError::from)?;
    let ok = outcome.terminated_state().is_some_and(|s| accept.accepts(s));
    Ok((ok, outcome))
}

/// Runs every domain state and reports all inputs that miss their
/// expectation.
pub fn verify_exhaustive(
    x: &InstructionSequence,
    spec: &Specification,
    v: SemanticsVariant,
    budget: u64,
) -> Result<IncorrectnessReport, ViewsError> {
    let budget = budget.max(spec.step_bound);
    let states = spec.states()?;
    let mut witnesses = Vec::new();
    for (i, s) in states.iter().enumerate() {
        let expected = spec.expected(i, s);
        let (ok, observed) = satisfies(x, s, &expected, v, budget)?;
        if !ok {
            witnesses.push(Witness {
                input: s.clone(),
                observed,
                expected,
            });
        }
    }
    Ok(if witnesses.is_empty() {
        IncorrectnessReport::Correct { states: states.len() }
    } else {
        IncorrectnessReport::Incorrect {
            states: states.len(),
            witnesses,
        }
    })
}

/// Per-state partition of observed discrepancies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DefectReport {
    /// Specification disagrees with intent (and the run is not a phantom).
    pub spec_defects: Vec<MachineState>,
    /// Specification agrees with intent and the sequence fails it.
    pub sequence_faults: Vec<MachineState>,
    /// Sequence fails the specification but satisfies the intent.
    pub phantom_failures: Vec<MachineState>,
}

impl fmt::Display for DefectReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[MachineState]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
        writeln!(f, "spec_defects {}: {}", self.spec_defects.len(), list(&self.spec_defects))?;
        writeln!(f, "sequence_faults {}: {}", self.sequence_faults.len(), list(&self.sequence_faults))?;
        write!(f, "phantom_failures {}: {}", self.phantom_failures.len(), list(&self.phantom_failures))
    }
}

/// Splits discrepancies between sequence, specification and intent.
pub fn classify_defects(
    x: &InstructionSequence,
    spec: &Specification,
    intent: &Specification,
    v: SemanticsVariant,
    budget: u64,
) -> Result<DefectReport, ViewsError> {
    let a: BTreeSet<_> = spec.domain().iter().collect();
    let b: BTreeSet<_> = intent.domain().iter().collect();
    if a != b || a.len() != spec.domain().len() {
        return Err(ViewsError::DomainMismatch);
    }
    let budget = budget.max(spec.step_bound).max(intent.step_bound);
    let intent_index: HashMap<MachineState, usize> = intent
        .states()?
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    let mut report = DefectReport::default();
    for (i, s) in spec.states()?.into_iter().enumerate() {
        let want_spec = spec.expected(i, &s);
        let want_intent = intent.expected(intent_index[&s], &s);
        let (meets_spec, outcome) = satisfies(x, &s, &want_spec, v, budget)?;
        let meets_intent = outcome
            .terminated_state()
            .is_some_and(|end| want_intent.accepts(end));
        if !want_spec.equivalent(&want_intent) {
            if !meets_spec && meets_intent {
                report.phantom_failures.push(s);
            } else {
                report.spec_defects.push(s);
            }
        } else if !meets_spec {
            report.sequence_faults.push(s);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessThresholds {
    /// Testing share below this is flagged.
    pub testing_share: f64,
    /// Wildcard-oracle fraction above this is flagged.
    pub wildcard_fraction: f64,
    /// Coverage at or above this with only wildcard oracles is flagged.
    pub high_coverage: f64,
}

impl Default for ProcessThresholds {
    fn default() -> Self {
        ProcessThresholds {
            testing_share: 0.50,
            wildcard_fraction: 0.50,
            high_coverage: 0.80,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProcessFlag {
    TestingShareBelowBenchmark,
    WildcardOracles,
    CoverageOnlySuite,
}

impl fmt::Display for ProcessFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProcessFlag::TestingShareBelowBenchmark => "testing-share-below-benchmark",
            ProcessFlag::WildcardOracles => "wildcard-oracles",
            ProcessFlag::CoverageOnlySuite => "coverage-only-suite",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessReport {
    pub counts: BTreeMap<Purpose, usize>,
    pub total: usize,
    pub testing_share: f64,
    /// Exercised positions over program length, summed across programs that
    /// have test records with coverage data.
    pub coverage: f64,
    pub wildcard_fraction: f64,
    pub flags: Vec<ProcessFlag>,
}

impl fmt::Display for ProcessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "effectuations {}", self.total)?;
        for p in Purpose::ALL {
            writeln!(f, "  {:<22}{}", p.as_str(), self.counts.get(&p).copied().unwrap_or(0))?;
        }
        writeln!(f, "testing_share {:.3}", self.testing_share)?;
        writeln!(f, "coverage {:.3}", self.coverage)?;
        writeln!(f, "wildcard_oracle_fraction {:.3}", self.wildcard_fraction)?;
        if self.flags.is_empty() {
            writeln!(f, "flags none")?;
        }
        for flag in &self.flags {
            writeln!(f, "FLAG {flag}")?;
        }
        write!(f, "note: understanding and competence are not mechanically measurable; only the proxies above are reported")
    }
}

pub fn process_report(ledger: &EffectuationLedger, thresholds: ProcessThresholds) -> ProcessReport {
    let records = ledger.records();
    let mut counts: BTreeMap<Purpose, usize> = Purpose::ALL.iter().map(|&p| (p, 0)).collect();
    for r in records {
        *counts.entry(r.purpose).or_default() += 1;
    }
    let total = records.len();
    let tests = records.iter().filter(|r| r.purpose.is_test());
    let testing_share = if total == 0 {
        0.0
    } else {
        tests.clone().count() as f64 / total as f64
    };

    let mut per_program: BTreeMap<&str, (usize, BTreeSet<usize>)> = BTreeMap::new();
    for r in tests.clone() {
        if let Some(c) = &r.coverage {
            let entry = per_program.entry(r.program_id.as_str()).or_default();
            entry.0 = entry.0.max(c.program_len);
            entry.1.extend(c.positions.iter().copied());
        }
    }
    let (covered, length) = per_program
        .values()
        .fold((0, 0), |(c, l), (len, pos)| (c + pos.len(), l + len));
    let coverage = if length == 0 { 0.0 } else { covered as f64 / length as f64 };

    let oracles: Vec<bool> = tests.filter_map(|r| r.wildcard_oracle).collect();
    let wildcards = oracles.iter().filter(|&&w| w).count();
    let wildcard_fraction = if oracles.is_empty() {
        0.0
    } else {
        wildcards as f64 / oracles.len() as f64
    };

    let mut flags = Vec::new();
    if testing_share < thresholds.testing_share {
        flags.push(ProcessFlag::TestingShareBelowBenchmark);
    }
    if !oracles.is_empty() && wildcard_fraction > thresholds.wildcard_fraction {
        flags.push(ProcessFlag::WildcardOracles);
    }
    if !oracles.is_empty() && wildcards == oracles.len() && coverage >= thresholds.high_coverage {
        flags.push(ProcessFlag::CoverageOnlySuite);
    }
    ProcessReport {
        counts,
        total,
        testing_share,
        coverage,
        wildcard_fraction,
        flags,
    }
}
