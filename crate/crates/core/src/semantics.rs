//! Step-counted operational semantics with configurable handling of a
//! program counter that leaves the instruction range.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::isa::{Instruction, InstructionSequence, Method, Register};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("step budget must be at least 1")]
    ZeroBudget,
    #[error("invalid variant `{0}`: expected low=<policy>,high=<policy>")]
    BadVariant(String),
    #[error("unknown excess policy `{0}`")]
    UnknownPolicy(String),
    #[error("invalid machine state `{0}`")]
    BadState(String),
    #[error("at least one probe is required")]
    NoProbes,
}

/// What happens when control leaves `1..=len` at one end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExcessPolicy {
    Deadlock,
    Livelock,
    Error,
    Terminate,
    Skip,
    StaticReject,
}

impl ExcessPolicy {
    pub const ALL: [ExcessPolicy; 6] = [
        ExcessPolicy::Deadlock,
        ExcessPolicy::Livelock,
        ExcessPolicy::Error,
        ExcessPolicy::Terminate,
        ExcessPolicy::Skip,
        ExcessPolicy::StaticReject,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExcessPolicy::Deadlock => "deadlock",
            ExcessPolicy::Livelock => "livelock",
            ExcessPolicy::Error => "error",
            ExcessPolicy::Terminate => "terminate",
            ExcessPolicy::Skip => "skip",
            ExcessPolicy::StaticReject => "reject",
        }
    }
}

impl fmt::Display for ExcessPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExcessPolicy {
    type Err = SemanticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExcessPolicy::ALL
            .into_iter()
            .find(|p| p.as_str() == s.trim())
            .ok_or_else(|| SemanticsError::UnknownPolicy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum End {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SemanticsVariant {
    pub low: ExcessPolicy,
    pub high: ExcessPolicy,
}

impl SemanticsVariant {
    pub const fn new(low: ExcessPolicy, high: ExcessPolicy) -> Self {
        SemanticsVariant { low, high }
    }

    pub fn policy(&self, end: End) -> ExcessPolicy {
        match end {
            End::Low => self.low,
            End::High => self.high,
        }
    }
}

impl Default for SemanticsVariant {
    fn default() -> Self {
        SemanticsVariant::new(ExcessPolicy::Deadlock, ExcessPolicy::Deadlock)
    }
}

impl fmt::Display for SemanticsVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "low={},high={}", self.low, self.high)
    }
}

impl FromStr for SemanticsVariant {
    type Err = SemanticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SemanticsError::BadVariant(s.to_string());
        let mut low = None;
        let mut high = None;
        for item in s.split(',') {
            let (key, value) = item.split_once('=').ok_or_else(bad)?;
            let slot = match key.trim() {
                "low" => &mut low,
                "high" => &mut high,
                _ => return Err(bad()),
            };
            if slot.replace(value.parse::<ExcessPolicy>()?).is_some() {
                return Err(bad());
            }
        }
        match (low, high) {
            (Some(low), Some(high)) => Ok(SemanticsVariant { low, high }),
            _ => Err(bad()),
        }
    }
}

/// All 36 variants, low policy major.
pub fn enumerate_variants() -> Vec<SemanticsVariant> {
    ExcessPolicy::ALL
        .into_iter()
        .flat_map(|low| {
            ExcessPolicy::ALL
                .into_iter()
                .map(move |high| SemanticsVariant { low, high })
        })
        .collect()
}

/// Single-bit registers. Unmapped registers read as 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MachineState {
    registers: BTreeMap<Register, bool>,
}

impl MachineState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (Register, bool)>,
    {
        MachineState {
            registers: pairs.into_iter().collect(),
        }
    }

    pub fn get(&self, register: &Register) -> bool {
        self.registers.get(register).copied().unwrap_or(false)
    }

    pub fn set(&mut self, register: Register, value: bool) {
        self.registers.insert(register, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Register, bool)> {
        self.registers.iter().map(|(r, &b)| (r, b))
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    /// Registers holding 1. Two states agree on every lookup iff their
    /// set registers coincide.
    pub fn ones(&self) -> Vec<Register> {
        self.registers
            .iter()
            .filter(|(_, &b)| b)
            .map(|(r, _)| r.clone())
            .collect()
    }

    /// Applies a register service call and returns its reply.
    pub fn apply(&mut self, register: &Register, method: Method) -> bool {
        match method {
            Method::Get => self.get(register),
            Method::Set0 => {
                self.set(register.clone(), false);
                true
            }
            Method::Set1 => {
                self.set(register.clone(), true);
                true
            }
            Method::Negate => {
                let flipped = !self.get(register);
                self.set(register.clone(), flipped);
                flipped
            }
        }
    }
}

impl fmt::Display for MachineState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (r, b)) in self.registers.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{r}={}", u8::from(*b))?;
        }
        f.write_str("}")
    }
}

impl FromStr for MachineState {
    type Err = SemanticsError;

    /// `REG=BIT(,REG=BIT)*`, optionally wrapped in braces; empty text is the
    /// empty state.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SemanticsError::BadState(s.to_string());
        let body = s.trim();
        let body = body
            .strip_prefix('{')
            .and_then(|b| b.strip_suffix('}'))
            .unwrap_or(body)
            .trim();
        let mut state = MachineState::new();
        if body.is_empty() {
            return Ok(state);
        }
        for item in body.split(',') {
            let (reg, bit) = item.split_once('=').ok_or_else(bad)?;
            let reg = Register::new(reg.trim()).ok_or_else(bad)?;
            let bit = match bit.trim() {
                "0" => false,
                "1" => true,
                _ => return Err(bad()),
            };
            if state.registers.insert(reg, bit).is_some() {
                return Err(bad());
            }
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Outcome {
    Terminated { state: MachineState, steps: u64 },
    ErrorHalt { state: MachineState, steps: u64 },
    Deadlock { steps: u64 },
    Livelock { detected_at_step: u64 },
    BudgetExhausted { budget: u64 },
    StaticallyRejected { position: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OutcomeKind {
    Terminated,
    ErrorHalt,
    Deadlock,
    Livelock,
    BudgetExhausted,
    StaticallyRejected,
}

impl OutcomeKind {
    pub const ALL: [OutcomeKind; 6] = [
        OutcomeKind::Terminated,
        OutcomeKind::ErrorHalt,
        OutcomeKind::Deadlock,
        OutcomeKind::Livelock,
        OutcomeKind::BudgetExhausted,
        OutcomeKind::StaticallyRejected,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::Terminated => "terminated",
            OutcomeKind::ErrorHalt => "error-halt",
            OutcomeKind::Deadlock => "deadlock",
            OutcomeKind::Livelock => "livelock",
            OutcomeKind::BudgetExhausted => "budget-exhausted",
            OutcomeKind::StaticallyRejected => "statically-rejected",
        }
    }
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutcomeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OutcomeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown outcome `{s}`"))
    }
}

impl Outcome {
    pub fn kind(&self) -> OutcomeKind {
        match self {
            Outcome::Terminated { .. } => OutcomeKind::Terminated,
            Outcome::ErrorHalt { .. } => OutcomeKind::ErrorHalt,
            Outcome::Deadlock { .. } => OutcomeKind::Deadlock,
            Outcome::Livelock { .. } => OutcomeKind::Livelock,
            Outcome::BudgetExhausted { .. } => OutcomeKind::BudgetExhausted,
            Outcome::StaticallyRejected { .. } => OutcomeKind::StaticallyRejected,
        }
    }

    /// Operational steps actually processed.
    pub fn steps(&self) -> u64 {
        match *self {
            Outcome::Terminated { steps, .. }
            | Outcome::ErrorHalt { steps, .. }
            | Outcome::Deadlock { steps } => steps,
            Outcome::Livelock { detected_at_step } => detected_at_step.saturating_sub(1),
            Outcome::BudgetExhausted { budget } => budget,
            Outcome::StaticallyRejected { .. } => 0,
        }
    }

    pub fn terminated_state(&self) -> Option<&MachineState> {
        match self {
            Outcome::Terminated { state, .. } => Some(state),
            _ => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Terminated { state, steps } => write!(f, "Terminated {state} steps={steps}"),
            Outcome::ErrorHalt { state, steps } => write!(f, "ErrorHalt {state} steps={steps}"),
            Outcome::Deadlock { steps } => write!(f, "Deadlock steps={steps}"),
            Outcome::Livelock { detected_at_step } => {
                write!(f, "Livelock detected_at_step={detected_at_step}")
            }
            Outcome::BudgetExhausted { budget } => write!(f, "BudgetExhausted budget={budget}"),
            Outcome::StaticallyRejected { position } => {
                write!(f, "StaticallyRejected position={position}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub step: u64,
    pub position: usize,
    pub instruction: Instruction,
    pub state_after: MachineState,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Distinct positions processed, ascending.
    pub fn positions(&self) -> Vec<usize> {
        let mut p: Vec<usize> = self.steps.iter().map(|s| s.position).collect();
        p.sort_unstable();
        p.dedup();
        p
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            writeln!(
                f,
                "{:>4}  @{:<3} {:<12} {}",
                s.step, s.position, s.instruction.to_string(), s.state_after
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RangeViolation {
    pub position: usize,
    pub target: i128,
    pub end: End,
}

/// Flags every jump whose static target lies outside `1..=len`.
pub fn static_check(x: &InstructionSequence) -> Vec<RangeViolation> {
    let len = x.len() as i128;
    x.instructions()
        .iter()
        .enumerate()
        .filter_map(|(i, ins)| {
            let position = i + 1;
            let target = ins.jump_target(position)?;
            let end = if target < 1 {
                End::Low
            } else if target > len {
                End::High
            } else {
                return None;
            };
            Some(RangeViolation {
                position,
                target,
                end,
            })
        })
        .collect()
}

/// Runs `x` on `input` under `variant` for at most `budget` steps.
pub fn effectuate(
    x: &InstructionSequence,
    input: &MachineState,
    variant: SemanticsVariant,
    budget: u64,
) -> Result<(Outcome, Trace), SemanticsError> {
    if budget < 1 {
        return Err(SemanticsError::ZeroBudget);
    }
    let mut trace = Trace::default();

    let rejected_ends: Vec<End> = [End::Low, End::High]
        .into_iter()
        .filter(|&e| variant.policy(e) == ExcessPolicy::StaticReject)
        .collect();
    if !rejected_ends.is_empty() {
        if let Some(v) = static_check(x)
            .into_iter()
            .find(|v| rejected_ends.contains(&v.end))
        {
            return Ok((
                Outcome::StaticallyRejected {
                    position: v.position,
                },
                trace,
            ));
        }
    }

    let len = x.len() as i128;
    let mut state = input.clone();
    let mut position: usize = 1;
    let mut steps: u64 = 0;
    let mut seen: HashSet<(usize, Vec<Register>)> = HashSet::new();

    loop {
        if steps == budget {
            return Ok((Outcome::BudgetExhausted { budget }, trace));
        }
        if !seen.insert((position, state.ones())) {
            return Ok((
                Outcome::Livelock {
                    detected_at_step: steps + 1,
                },
                trace,
            ));
        }
        steps += 1;
        let instruction = x.get(position).expect("position kept in range").clone();
        let next: i128 = match &instruction {
            Instruction::Halt => {
                trace.steps.push(TraceStep {
                    step: steps,
                    position,
                    instruction,
                    state_after: state.clone(),
                });
                return Ok((Outcome::Terminated { state, steps }, trace));
            }
            Instruction::FwdJump(0) | Instruction::BwdJump(0) => {
                trace.steps.push(TraceStep {
                    step: steps,
                    position,
                    instruction,
                    state_after: state.clone(),
                });
                return Ok((Outcome::Deadlock { steps }, trace));
            }
            Instruction::FwdJump(_) | Instruction::BwdJump(_) => {
                instruction.jump_target(position).expect("jump")
            }
            Instruction::Basic(r, m) => {
                state.apply(r, *m);
                position as i128 + 1
            }
            Instruction::PosTest(r, m) => {
                let reply = state.apply(r, *m);
                position as i128 + if reply { 1 } else { 2 }
            }
            Instruction::NegTest(r, m) => {
                let reply = state.apply(r, *m);
                position as i128 + if reply { 2 } else { 1 }
            }
        };
        trace.steps.push(TraceStep {
            step: steps,
            position,
            instruction,
            state_after: state.clone(),
        });

        if (1..=len).contains(&next) {
            position = next as usize;
            continue;
        }
        let end = if next < 1 { End::Low } else { End::High };
        let outcome = match variant.policy(end) {
            // Dynamic overflow is not caught by the static check (falling off
            // the end, or a test skipping past it); treat it as inaction.
            ExcessPolicy::Deadlock | ExcessPolicy::StaticReject => Outcome::Deadlock { steps },
            ExcessPolicy::Error => Outcome::ErrorHalt { state, steps },
            ExcessPolicy::Terminate => Outcome::Terminated { state, steps },
            // Perpetual idling outside the range: the idle configuration is
            // its own successor.
            ExcessPolicy::Livelock => Outcome::Livelock {
                detected_at_step: steps,
            },
            ExcessPolicy::Skip => {
                if position < x.len() {
                    position += 1;
                    continue;
                }
                Outcome::Terminated { state, steps }
            }
        };
        return Ok((outcome, trace));
    }
}

/// Keeps the variants whose predicted outcome equals the observed one on
/// every probe. An empty result means the observed machine is outside the
/// modelled space.
pub fn discriminate_variant<F>(
    mut oracle: F,
    probes: &[(InstructionSequence, MachineState)],
    budget: u64,
) -> Result<Vec<SemanticsVariant>, SemanticsError>
where
    F: FnMut(&InstructionSequence, &MachineState) -> Outcome,
{
    if probes.is_empty() {
        return Err(SemanticsError::NoProbes);
    }
    let observed: Vec<Outcome> = probes.iter().map(|(x, d)| oracle(x, d)).collect();
    let mut survivors = Vec::new();
    'variants: for v in enumerate_variants() {
        for ((x, d), seen) in probes.iter().zip(&observed) {
            let (predicted, _) = effectuate(x, d, v, budget)?;
            if &predicted != seen {
                continue 'variants;
            }
        }
        survivors.push(v);
    }
    Ok(survivors)
}
