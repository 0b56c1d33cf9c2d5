//! Instruction-sequence syntax: parsing, rendering, fragments and substitution.
//!
//! Program text is a list of instructions separated by `;` and/or newlines.
//! `%` starts a comment that runs to the end of the line. Tokens:
//!
//! * `!` halt
//! * `#N` forward jump, `\#N` backward jump
//! * `focus.method`, `+focus.method`, `-focus.method` for basic, positive
//!   test and negative test instructions, where `method` is one of `get`,
//!   `set:0`, `set:1`, `negate`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("program is empty")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FragmentError {
    #[error("malformed fragment `{0}`")]
    Malformed(String),
    #[error("fragment has no parts")]
    Empty,
    #[error("range {lo}-{hi} is inverted or starts at 0")]
    BadRange { lo: usize, hi: usize },
    #[error("ranges {first:?} and {second:?} overlap or are out of order")]
    Overlap {
        first: (usize, usize),
        second: (usize, usize),
    },
    #[error("range {lo}-{hi} exceeds sequence length {len}")]
    OutOfBounds { lo: usize, hi: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubstituteError {
    #[error(transparent)]
    Fragment(#[from] FragmentError),
    #[error("replacement has {replacement} parts but fragment has {fragment}")]
    ArityMismatch { fragment: usize, replacement: usize },
    #[error("substitution deletes every instruction")]
    EmptyResult,
}

/// Name of a single-bit register, `[a-z][a-z0-9_]*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Register(String);

impl Register {
    pub fn new(name: &str) -> Option<Self> {
        is_identifier(name).then(|| Register(name.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Register {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Register::new(s).ok_or_else(|| format!("invalid register name `{s}`"))
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Get,
    Set0,
    Set1,
    Negate,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Get, Method::Set0, Method::Set1, Method::Negate];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "get",
            Method::Set0 => "set:0",
            Method::Set1 => "set:1",
            Method::Negate => "negate",
        }
    }

    fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.as_str() == s)
    }

    /// True when the method writes its register without reading it first.
    pub fn is_store(self) -> bool {
        matches!(self, Method::Set0 | Method::Set1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Instruction {
    Basic(Register, Method),
    PosTest(Register, Method),
    NegTest(Register, Method),
    FwdJump(u64),
    BwdJump(u64),
    Halt,
}

impl Instruction {
    pub fn is_jump(&self) -> bool {
        matches!(self, Instruction::FwdJump(_) | Instruction::BwdJump(_))
    }

    pub fn register(&self) -> Option<&Register> {
        match self {
            Instruction::Basic(r, _) | Instruction::PosTest(r, _) | Instruction::NegTest(r, _) => {
                Some(r)
            }
            _ => None,
        }
    }

    /// Static target of a jump located at `position`. May fall outside the
    /// sequence; `None` for non-jumps.
    pub fn jump_target(&self, position: usize) -> Option<i128> {
        match *self {
            Instruction::FwdJump(k) => Some(position as i128 + k as i128),
            Instruction::BwdJump(k) => Some(position as i128 - k as i128),
            _ => None,
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Basic(r, m) => write!(f, "{r}.{}", m.as_str()),
            Instruction::PosTest(r, m) => write!(f, "+{r}.{}", m.as_str()),
            Instruction::NegTest(r, m) => write!(f, "-{r}.{}", m.as_str()),
            Instruction::FwdJump(k) => write!(f, "#{k}"),
            Instruction::BwdJump(k) => write!(f, "\\#{k}"),
            Instruction::Halt => f.write_str("!"),
        }
    }
}

impl FromStr for Instruction {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_token(s.trim(), 1, 1)
    }
}

fn parse_offset(digits: &str, line: usize, column: usize) -> Result<u64, ParseError> {
    let err = |message: String| ParseError::Syntax {
        line,
        column,
        message,
    };
    if digits.is_empty() {
        return Err(err("jump needs an offset".into()));
    }
    if digits.starts_with('-') {
        return Err(err(format!("negative jump offset `{digits}`")));
    }
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err(format!("invalid jump offset `{digits}`")));
    }
    digits
        .parse::<u64>()
        .map_err(|_| err(format!("jump offset `{digits}` does not fit in 64 bits")))
}

fn parse_token(token: &str, line: usize, column: usize) -> Result<Instruction, ParseError> {
    let err = |message: String| ParseError::Syntax {
        line,
        column,
        message,
    };
    if token == "!" {
        return Ok(Instruction::Halt);
    }
    if let Some(rest) = token.strip_prefix("\\#") {
        return parse_offset(rest, line, column).map(Instruction::BwdJump);
    }
    if let Some(rest) = token.strip_prefix('#') {
        return parse_offset(rest, line, column).map(Instruction::FwdJump);
    }
    let (sign, body) = match token.as_bytes().first() {
        Some(b'+') => (Some(true), &token[1..]),
        Some(b'-') => (Some(false), &token[1..]),
        _ => (None, token),
    };
    let Some((focus, method)) = body.split_once('.') else {
        return Err(err(format!("unrecognized instruction `{token}`")));
    };
    let Some(register) = Register::new(focus) else {
        return Err(err(format!("invalid focus `{focus}`")));
    };
    let Some(method) = Method::parse(method) else {
        return Err(err(format!("invalid method `{method}`")));
    };
    Ok(match sign {
        None => Instruction::Basic(register, method),
        Some(true) => Instruction::PosTest(register, method),
        Some(false) => Instruction::NegTest(register, method),
    })
}

/// Parses a whitespace-trimmed list of instructions, possibly empty.
pub fn parse_instructions(text: &str) -> Result<Vec<Instruction>, ParseError> {
    let mut out = Vec::new();
    for (line_idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('%').next().unwrap_or("");
        let mut offset = 0;
        for segment in line.split(';') {
            let leading = segment.len() - segment.trim_start().len();
            let token = segment.trim();
            if !token.is_empty() {
                let column = raw_line[..offset + leading].chars().count() + 1;
                out.push(parse_token(token, line_idx + 1, column)?);
            }
            offset += segment.len() + 1;
        }
    }
    Ok(out)
}

/// A finite, non-empty, 1-indexed instruction sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InstructionSequence {
    instructions: Vec<Instruction>,
}

impl InstructionSequence {
    pub fn new(instructions: Vec<Instruction>) -> Option<Self> {
        (!instructions.is_empty()).then_some(InstructionSequence { instructions })
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let instructions = parse_instructions(text)?;
        InstructionSequence::new(instructions).ok_or(ParseError::Empty)
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Instruction at 1-based `position`.
    pub fn get(&self, position: usize) -> Option<&Instruction> {
        position
            .checked_sub(1)
            .and_then(|i| self.instructions.get(i))
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    /// Registers mentioned anywhere in the sequence, sorted.
    pub fn registers(&self) -> Vec<Register> {
        let mut regs: Vec<Register> = self
            .instructions
            .iter()
            .filter_map(|i| i.register().cloned())
            .collect();
        regs.sort();
        regs.dedup();
        regs
    }

    pub fn render(&self) -> String {
        render_instructions(&self.instructions)
    }
}

impl fmt::Display for InstructionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl FromStr for InstructionSequence {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InstructionSequence::parse(s)
    }
}

pub fn render_instructions(instructions: &[Instruction]) -> String {
    instructions
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// An n-located fragment: sorted, pairwise disjoint, inclusive 1-based ranges.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fragment {
    parts: Vec<(usize, usize)>,
}

impl Fragment {
    pub fn new(parts: Vec<(usize, usize)>) -> Result<Self, FragmentError> {
        if parts.is_empty() {
            return Err(FragmentError::Empty);
        }
        for &(lo, hi) in &parts {
            if lo == 0 || hi < lo {
                return Err(FragmentError::BadRange { lo, hi });
            }
        }
        for w in parts.windows(2) {
            if w[1].0 <= w[0].1 {
                return Err(FragmentError::Overlap {
                    first: w[0],
                    second: w[1],
                });
            }
        }
        Ok(Fragment { parts })
    }

    pub fn single(position: usize) -> Result<Self, FragmentError> {
        Fragment::new(vec![(position, position)])
    }

    pub fn parts(&self) -> &[(usize, usize)] {
        &self.parts
    }

    pub fn arity(&self) -> usize {
        self.parts.len()
    }

    pub fn total_length(&self) -> usize {
        self.parts.iter().map(|&(lo, hi)| hi - lo + 1).sum()
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.parts.iter().flat_map(|&(lo, hi)| lo..=hi)
    }

    pub fn contains(&self, position: usize) -> bool {
        self.parts
            .iter()
            .any(|&(lo, hi)| (lo..=hi).contains(&position))
    }

    pub fn overlaps(&self, other: &Fragment) -> bool {
        self.parts.iter().any(|&(a, b)| {
            other
                .parts
                .iter()
                .any(|&(c, d)| a <= d && c <= b)
        })
    }

    pub fn validate_for(&self, x: &InstructionSequence) -> Result<(), FragmentError> {
        let len = x.len();
        match self.parts.last() {
            Some(&(lo, hi)) if hi > len => Err(FragmentError::OutOfBounds { lo, hi, len }),
            _ => Ok(()),
        }
    }

    /// Builds the smallest family of ranges covering a set of positions.
    pub fn from_positions(positions: impl IntoIterator<Item = usize>) -> Result<Self, FragmentError> {
        let mut sorted: Vec<usize> = positions.into_iter().collect();
        sorted.sort_unstable();
        sorted.dedup();
        let mut parts: Vec<(usize, usize)> = Vec::new();
        for p in sorted {
            match parts.last_mut() {
                Some((_, hi)) if *hi + 1 == p => *hi = p,
                _ => parts.push((p, p)),
            }
        }
        Fragment::new(parts)
    }
}

impl fmt::Display for Fragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = self
            .parts
            .iter()
            .map(|&(lo, hi)| {
                if lo == hi {
                    lo.to_string()
                } else {
                    format!("{lo}-{hi}")
                }
            })
            .collect::<Vec<_>>()
            .join(",");
        f.write_str(&text)
    }
}

impl FromStr for Fragment {
    type Err = FragmentError;

    /// `lo-hi(,lo-hi)*`, where a bare `n` means `n-n`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || FragmentError::Malformed(s.to_string());
        let mut parts = Vec::new();
        for piece in s.split(',') {
            let piece = piece.trim();
            let (lo, hi) = match piece.split_once('-') {
                Some((a, b)) => (a.trim(), b.trim()),
                None => (piece, piece),
            };
            let lo: usize = lo.parse().map_err(|_| malformed())?;
            let hi: usize = hi.parse().map_err(|_| malformed())?;
            parts.push((lo, hi));
        }
        Fragment::new(parts)
    }
}

/// Candidate repair: one instruction list per fragment part. Parts may be
/// empty, which deletes the corresponding range.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Replacement {
    parts: Vec<Vec<Instruction>>,
}

impl Replacement {
    pub fn new(parts: Vec<Vec<Instruction>>) -> Self {
        Replacement { parts }
    }

    pub fn parts(&self) -> &[Vec<Instruction>] {
        &self.parts
    }

    pub fn arity(&self) -> usize {
        self.parts.len()
    }

    pub fn total_length(&self) -> usize {
        self.parts.iter().map(Vec::len).sum()
    }

    /// Parts separated by `|`; each part is ordinary program text and may be
    /// empty.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        text.split('|')
            .map(parse_instructions)
            .collect::<Result<Vec<_>, _>>()
            .map(Replacement::new)
    }
}

impl fmt::Display for Replacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = self
            .parts
            .iter()
            .map(|p| render_instructions(p))
            .collect::<Vec<_>>()
            .join(" | ");
        f.write_str(&text)
    }
}

/// The instructions of `x` covered by `f`, part by part.
pub fn extract(x: &InstructionSequence, f: &Fragment) -> Result<Replacement, FragmentError> {
    f.validate_for(x)?;
    Ok(Replacement::new(
        f.parts()
            .iter()
            .map(|&(lo, hi)| x.instructions()[lo - 1..hi].to_vec())
            .collect(),
    ))
}

/// Splices `r` into `x` in place of `f`, part by part, left to right.
pub fn substitute(
    x: &InstructionSequence,
    f: &Fragment,
    r: &Replacement,
) -> Result<InstructionSequence, SubstituteError> {
    f.validate_for(x)?;
    if f.arity() != r.arity() {
        return Err(SubstituteError::ArityMismatch {
            fragment: f.arity(),
            replacement: r.arity(),
        });
    }
    let src = x.instructions();
    let mut out = Vec::with_capacity(src.len() + r.total_length());
    let mut next = 1;
    for (&(lo, hi), part) in f.parts().iter().zip(r.parts()) {
        out.extend_from_slice(&src[next - 1..lo - 1]);
        out.extend(part.iter().cloned());
        next = hi + 1;
    }
    out.extend_from_slice(&src[next - 1..]);
    InstructionSequence::new(out).ok_or(SubstituteError::EmptyResult)
}

/// Lazily enumerates every fragment of a sequence of length `len` with at
/// most `max_parts` parts and total length at most `max_total_len`, in
/// lexicographic order of part boundaries.
#[derive(Debug, Clone)]
pub struct Fragments {
    len: usize,
    max_total_len: usize,
    max_parts: usize,
    current: Vec<(usize, usize)>,
    started: bool,
}

impl Fragments {
    fn total(&self) -> usize {
        self.current.iter().map(|&(lo, hi)| hi - lo + 1).sum()
    }

    fn advance(&mut self) -> bool {
        if !self.started {
            self.started = true;
            if self.len == 0 || self.max_total_len == 0 || self.max_parts == 0 {
                return false;
            }
            self.current.push((1, 1));
            return true;
        }
        let total = self.total();
        // Extend with a new singleton part after the last one.
        if let Some(&(_, hi)) = self.current.last() {
            if self.current.len() < self.max_parts && total < self.max_total_len && hi < self.len {
                self.current.push((hi + 1, hi + 1));
                return true;
            }
        }
        let mut total = total;
        while let Some((lo, hi)) = self.current.pop() {
            let rest = total - (hi - lo + 1);
            if hi < self.len && total < self.max_total_len {
                self.current.push((lo, hi + 1));
                return true;
            }
            if lo < self.len {
                self.current.push((lo + 1, lo + 1));
                return true;
            }
            total = rest;
        }
        false
    }
}

impl Iterator for Fragments {
    type Item = Fragment;

    fn next(&mut self) -> Option<Fragment> {
        if self.advance() {
            Some(Fragment {
                parts: self.current.clone(),
            })
        } else {
            None
        }
    }
}

pub fn enumerate_fragments(
    x: &InstructionSequence,
    max_total_len: usize,
    max_parts: usize,
) -> Fragments {
    fragments_of_len(x.len(), max_total_len, max_parts)
}

pub fn fragments_of_len(len: usize, max_total_len: usize, max_parts: usize) -> Fragments {
    Fragments {
        len,
        max_total_len,
        max_parts,
        current: Vec::new(),
        started: false,
    }
}
