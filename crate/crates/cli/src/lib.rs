//! Batch front end for the `islab` binary.
//!
//! [`run_cli`] parses an argument vector, runs one subcommand and returns the
//! process exit code. Reports go to `out`, diagnostics to `err`.

use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use islab_core::faults::{Certifier, RejectionReason};
use islab_core::testing::{evaluate_suite, parse_suite, RecordDraft};
use islab_core::views::{parse_rules, ProcessThresholds, RuleId};
use islab_core::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_REJECTED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "islab", version, about = "Instruction-sequence fault laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Effectuate a program on one input state.
    Run(RunArgs),
    /// Run a test suite as confirmation tests.
    Test(TestArgs),
    /// Check a program against every state of a specification.
    Verify(VerifyArgs),
    /// Report rule violations.
    Lint(LintArgs),
    /// Certify one fragment/replacement pair as a fault.
    FaultCertify(CertifyArgs),
    /// Search replacements for a fragment.
    FaultSearch(SearchArgs),
    /// Decide whether the program is a fault-adequate candidate.
    Adequacy(AdequacyArgs),
    /// List the excess-policy variants.
    VariantsEnum(EnumArgs),
    /// Find the variants consistent with an oracle machine on probes.
    VariantsDiscriminate(DiscriminateArgs),
    /// Summarize an effectuation ledger.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct Exec {
    /// Excess-policy variant, e.g. low=deadlock,high=skip.
    #[arg(long, default_value = "low=deadlock,high=deadlock")]
    variant: SemanticsVariant,
    /// Step budget.
    #[arg(long, default_value_t = 10_000)]
    budget: u64,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    prog: PathBuf,
    /// Input state, e.g. i=1,o=0.
    #[arg(long = "in", default_value = "")]
    input: MachineState,
    #[command(flatten)]
    exec: Exec,
    /// Print the trace after the outcome.
    #[arg(long)]
    trace: bool,
    #[arg(long, default_value = "practical-use")]
    purpose: Purpose,
    #[arg(long)]
    ledger: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[arg(long)]
    prog: PathBuf,
    #[arg(long)]
    suite: PathBuf,
    #[command(flatten)]
    exec: Exec,
    #[arg(long)]
    ledger: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    prog: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    /// Intended behaviour; adds a defect classification.
    #[arg(long)]
    intent: Option<PathBuf>,
    #[command(flatten)]
    exec: Exec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Debug, Args)]
struct LintArgs {
    #[arg(long)]
    prog: PathBuf,
    /// Comma-separated rule ids; all rules when omitted.
    #[arg(long)]
    rules: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
struct Basis {
    /// Specification; its exhaustive suite is the regression basis.
    #[arg(long, conflicts_with = "suite", required_unless_present = "suite")]
    spec: Option<PathBuf>,
    /// Suite file used as the regression basis.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Triggering case name; defaults to the first failing case.
    #[arg(long)]
    case: Option<String>,
}

#[derive(Debug, Args)]
struct Budget {
    /// Fault budget profile: s1 or s4.
    #[arg(long, default_value = "s1")]
    profile: String,
    /// Reject faults that contain a smaller repairable part.
    #[arg(long)]
    minimal: bool,
    /// Longest replacement part in the search alphabet.
    #[arg(long, default_value_t = 1)]
    max_part_len: usize,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[arg(long)]
    prog: PathBuf,
    #[command(flatten)]
    basis: Basis,
    #[arg(long)]
    frag: Fragment,
    /// Replacement parts separated by `|`.
    #[arg(long)]
    repl: String,
    #[command(flatten)]
    budget: Budget,
    #[command(flatten)]
    exec: Exec,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long)]
    prog: PathBuf,
    #[command(flatten)]
    basis: Basis,
    #[arg(long)]
    frag: Fragment,
    /// Print at most this many certified candidates.
    #[arg(long, default_value_t = 10)]
    limit: usize,
    #[command(flatten)]
    budget: Budget,
    #[command(flatten)]
    exec: Exec,
}

#[derive(Debug, Args)]
struct AdequacyArgs {
    #[arg(long)]
    prog: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    #[command(flatten)]
    budget: Budget,
    /// Most parts per fragment.
    #[arg(long, default_value_t = 1)]
    max_parts: usize,
    #[command(flatten)]
    exec: Exec,
}

#[derive(Debug, Args)]
struct EnumArgs {
    /// Also effectuate this program under every variant.
    #[arg(long, requires = "input")]
    prog: Option<PathBuf>,
    #[arg(long = "in")]
    input: Option<MachineState>,
    #[arg(long, default_value_t = 10_000)]
    budget: u64,
}

#[derive(Debug, Args)]
struct DiscriminateArgs {
    /// Variant standing in for the observed machine.
    #[arg(long)]
    oracle: SemanticsVariant,
    /// Probe as PROGRAM[@STATE]; PROGRAM is inline text or a file path.
    #[arg(long = "probe", required = true)]
    probes: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    budget: u64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    ledger: PathBuf,
    /// Re-run this program's suite in-process to add coverage and oracle data.
    #[arg(long, requires = "suite")]
    prog: Option<PathBuf>,
    #[arg(long, requires = "prog")]
    suite: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    testing_share: f64,
    #[arg(long, default_value_t = 0.5)]
    wildcard_fraction: f64,
    #[arg(long, default_value_t = 0.8)]
    high_coverage: f64,
    #[command(flatten)]
    exec: Exec,
}

/// A failure that maps to an exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl fmt::Display) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }
}

type CmdResult = Result<i32, Failure>;

fn io_err(e: std::io::Error) -> Failure {
    Failure::usage(format!("output error: {e}"))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<InstructionSequence, Failure> {
    InstructionSequence::parse(&read(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_suite(path: &Path) -> Result<Vec<TestCase>, Failure> {
    parse_suite(&read(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_spec(path: &Path) -> Result<Specification, Failure> {
    Specification::parse(&read(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn program_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "program".to_string())
}

fn append_ledger(path: &Path, ledger: &EffectuationLedger) -> Result<(), Failure> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    file.write_all(ledger.to_text().as_bytes())
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn static_rejection(x: &InstructionSequence, v: SemanticsVariant) -> Option<usize> {
    match effectuate(x, &MachineState::new(), v, 1) {
        Ok((Outcome::StaticallyRejected { position }, _)) => Some(position),
        _ => None,
    }
}

fn cmd_run(a: RunArgs, out: &mut dyn Write) -> CmdResult {
    let x = load_program(&a.prog)?;
    let (outcome, trace) = effectuate(&x, &a.input, a.exec.variant, a.exec.budget).map_err(Failure::usage)?;
    writeln!(out, "{outcome}").map_err(io_err)?;
    if a.trace {
        writeln!(out, "{trace}").map_err(io_err)?;
    }
    if let Some(path) = &a.ledger {
        let mut ledger = EffectuationLedger::new();
        ledger
            .record(RecordDraft::new(&program_id(&a.prog), &outcome).purpose(a.purpose).input(a.input.clone()))
            .map_err(Failure::usage)?;
        append_ledger(path, &ledger)?;
    }
    Ok(match outcome {
        Outcome::Terminated { .. } => EXIT_OK,
        Outcome::StaticallyRejected { .. } => EXIT_REJECTED,
        _ => EXIT_FINDINGS,
    })
}

fn cmd_test(a: TestArgs, out: &mut dyn Write) -> CmdResult {
    let x = load_program(&a.prog)?;
    let suite = load_suite(&a.suite)?;
    let mut ledger = EffectuationLedger::new();
    let report = run_suite(&x, &program_id(&a.prog), &suite, a.exec.variant, a.exec.budget, &mut ledger)
        .map_err(Failure::usage)?;
    for (case, result) in &report.results {
        let tag = if result.passed() { "PASS" } else { "FAIL" };
        writeln!(out, "{tag} {} {} -> {}", case.name, result.verdict, result.outcome).map_err(io_err)?;
    }
    writeln!(out, "passed {} failed {} of {}", report.passed, report.failed, report.total()).map_err(io_err)?;
    if let Some(path) = &a.ledger {
        append_ledger(path, &ledger)?;
    }
    if static_rejection(&x, a.exec.variant).is_some() {
        return Ok(EXIT_REJECTED);
    }
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_FINDINGS })
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let x = load_program(&a.prog)?;
    let spec = load_spec(&a.spec)?;
    let (v, budget) = (a.exec.variant, a.exec.budget);
    let report = verify_exhaustive(&x, &spec, v, budget).map_err(Failure::usage)?;
    writeln!(out, "{report}").map_err(io_err)?;
    let mut findings = !report.is_correct();
    if let Some(intent) = &a.intent {
        let intent = load_spec(intent)?;
        let defects = classify_defects(&x, &spec, &intent, v, budget).map_err(Failure::usage)?;
        writeln!(out, "{defects}").map_err(io_err)?;
        findings |= !defects.spec_defects.is_empty() || !defects.sequence_faults.is_empty();
    }
    if static_rejection(&x, v).is_some() {
        return Ok(EXIT_REJECTED);
    }
    Ok(if findings { EXIT_FINDINGS } else { EXIT_OK })
}

fn cmd_lint(a: LintArgs, out: &mut dyn Write) -> CmdResult {
    let x = load_program(&a.prog)?;
    let rules = match &a.rules {
        Some(text) => parse_rules(text).map_err(Failure::usage)?,
        None => RuleId::ALL.to_vec(),
    };
    let violations = lint(&x, &rules);
    for v in &violations {
        match a.format {
            Format::Text => writeln!(out, "{v}"),
            Format::Machine => writeln!(out, "{}", v.machine_line()),
        }
        .map_err(io_err)?;
    }
    if a.format == Format::Text {
        writeln!(out, "{} violation(s)", violations.len()).map_err(io_err)?;
    }
    Ok(if violations.is_empty() { EXIT_OK } else { EXIT_FINDINGS })
}

fn load_config(b: &Budget) -> Result<FaultBudgetConfig, Failure> {
    let mut config = FaultBudgetConfig::preset(&b.profile).map_err(Failure::usage)?;
    config.enforce_minimality = b.minimal;
    Ok(config)
}

/// Resolved regression basis plus the triggering failure.
struct Setup {
    x: InstructionSequence,
    spec: Option<Specification>,
    suite: Option<Vec<TestCase>>,
    trigger: FailureRecord,
}

impl Setup {
    fn load(prog: &Path, b: &Basis, exec: &Exec) -> Result<Self, Failure> {
        let x = load_program(prog)?;
        let spec = b.spec.as_deref().map(load_spec).transpose()?;
        let suite = b.suite.as_deref().map(load_suite).transpose()?;
        let cases = match (&spec, &suite) {
            (Some(spec), _) => exhaustive_suite(spec).map_err(Failure::usage)?,
            (None, Some(suite)) => suite.clone(),
            (None, None) => return Err(Failure::usage("one of --spec or --suite is required")),
        };
        let chosen = match &b.case {
            Some(name) => cases
                .iter()
                .find(|c| &c.name == name)
                .ok_or_else(|| Failure::usage(format!("no case named {name}")))?
                .clone(),
            None => {
                let report = evaluate_suite(&x, &cases, exec.variant, exec.budget).map_err(Failure::usage)?;
                match report.results.into_iter().find(|(_, r)| !r.passed()) {
                    Some((case, _)) => case,
                    None => {
                        return Err(Failure {
                            code: EXIT_FINDINGS,
                            message: "no failing case: nothing to certify".into(),
                        })
                    }
                }
            }
        };
        let trigger = FailureRecord::observe(&x, &chosen, exec.variant, exec.budget).map_err(|e| Failure {
            code: EXIT_FINDINGS,
            message: e.to_string(),
        })?;
        Ok(Setup { x, spec, suite, trigger })
    }

    fn basis(&self) -> RegressionBasis<'_> {
        match (&self.spec, &self.suite) {
            (Some(spec), _) => RegressionBasis::Exhaustive(spec),
            (None, Some(suite)) => RegressionBasis::Suite(suite),
            (None, None) => unreachable!("checked in load"),
        }
    }

    fn bounds(&self, max_part_len: usize) -> SearchBounds {
        SearchBounds::for_program(&self.x, self.spec.as_ref(), max_part_len)
    }
}

fn write_rejection(out: &mut dyn Write, reasons: &[RejectionReason]) -> Result<(), Failure> {
    writeln!(out, "Rejected").map_err(io_err)?;
    for r in reasons {
        writeln!(out, "  {r}").map_err(io_err)?;
    }
    Ok(())
}

fn cmd_certify(a: CertifyArgs, out: &mut dyn Write) -> CmdResult {
    let config = load_config(&a.budget)?;
    let setup = Setup::load(&a.prog, &a.basis, &a.exec)?;
    a.frag.validate_for(&setup.x).map_err(Failure::usage)?;
    let r = Replacement::parse(&a.repl).map_err(Failure::usage)?;
    let bounds = setup.bounds(a.budget.max_part_len);
    let certifier = Certifier::new(
        &setup.x,
        setup.basis(),
        &setup.trigger,
        a.exec.variant,
        a.exec.budget,
        config,
        Some(&bounds),
    )
    .map_err(Failure::usage)?;
    match certifier.certify(&a.frag, &r).map_err(Failure::usage)? {
        faults::Certification::Certified(fault) => {
            writeln!(out, "{fault}").map_err(io_err)?;
            Ok(EXIT_OK)
        }
        faults::Certification::Rejected(reasons) => {
            write_rejection(out, &reasons)?;
            Ok(EXIT_FINDINGS)
        }
    }
}

fn cmd_search(a: SearchArgs, out: &mut dyn Write) -> CmdResult {
    let config = load_config(&a.budget)?;
    let setup = Setup::load(&a.prog, &a.basis, &a.exec)?;
    a.frag.validate_for(&setup.x).map_err(Failure::usage)?;
    let bounds = setup.bounds(a.budget.max_part_len);
    let candidates = search_repairs(
        &setup.x,
        setup.basis(),
        std::slice::from_ref(&setup.trigger),
        &a.frag,
        config,
        &bounds,
        a.exec.variant,
        a.exec.budget,
    )
    .map_err(Failure::usage)?;
    let certified: Vec<_> = candidates.iter().filter_map(|c| c.certification.certified()).collect();
    writeln!(
        out,
        "fragment {} trigger {}: {} candidate(s), {} certified",
        a.frag,
        setup.trigger.case.name,
        candidates.len(),
        certified.len()
    )
    .map_err(io_err)?;
    for fault in certified.iter().take(a.limit) {
        writeln!(out, "{fault}").map_err(io_err)?;
    }
    Ok(if certified.is_empty() { EXIT_FINDINGS } else { EXIT_OK })
}

fn cmd_adequacy(a: AdequacyArgs, out: &mut dyn Write) -> CmdResult {
    let config = load_config(&a.budget)?;
    let x = load_program(&a.prog)?;
    let spec = load_spec(&a.spec)?;
    let bounds = SearchBounds::for_program(&x, Some(&spec), a.budget.max_part_len).with_max_parts(a.max_parts);
    let report = check_adequacy(&x, &spec, config, &bounds, a.exec.variant, a.exec.budget).map_err(Failure::usage)?;
    let stats = report.stats;
    let code = match &report.verdict {
        faults::AdequacyVerdict::Adequate(chain) => {
            writeln!(out, "Adequate chain={} total_fraction={:.3}", chain.len(), report.total_fraction).map_err(io_err)?;
            for (k, link) in chain.iter().enumerate() {
                writeln!(out, "step {} original fragment {}", k + 1, link.original_fragment).map_err(io_err)?;
                writeln!(out, "{}", link.fault).map_err(io_err)?;
            }
            EXIT_OK
        }
        faults::AdequacyVerdict::NotAdequate(reason) => {
            writeln!(out, "NotAdequate({reason})").map_err(io_err)?;
            EXIT_FINDINGS
        }
    };
    writeln!(
        out,
        "candidates {} certified {} backtracks {}",
        stats.candidates_tried, stats.certified, stats.backtracks
    )
    .map_err(io_err)?;
    Ok(code)
}

fn cmd_enum(a: EnumArgs, out: &mut dyn Write) -> CmdResult {
    let program = a.prog.as_deref().map(load_program).transpose()?;
    for v in enumerate_variants() {
        match (&program, &a.input) {
            (Some(x), Some(d)) => {
                let (outcome, _) = effectuate(x, d, v, a.budget).map_err(Failure::usage)?;
                writeln!(out, "{v}\t{outcome}")
            }
            _ => writeln!(out, "{v}"),
        }
        .map_err(io_err)?;
    }
    Ok(EXIT_OK)
}

fn parse_probe(text: &str) -> Result<(InstructionSequence, MachineState), Failure> {
    let (prog, state) = match text.rsplit_once('@') {
        Some((p, s)) => (p, s.parse::<MachineState>().map_err(Failure::usage)?),
        None => (text, MachineState::new()),
    };
    let path = Path::new(prog.trim());
    let x = if path.is_file() {
        load_program(path)?
    } else {
        InstructionSequence::parse(prog).map_err(|e| Failure::usage(format!("probe {text:?}: {e}")))?
    };
    Ok((x, state))
}

fn cmd_discriminate(a: DiscriminateArgs, out: &mut dyn Write) -> CmdResult {
    let probes = a.probes.iter().map(|p| parse_probe(p)).collect::<Result<Vec<_>, _>>()?;
    let oracle = |x: &InstructionSequence, d: &MachineState| {
        effectuate(x, d, a.oracle, a.budget)
            .map(|(o, _)| o)
            .unwrap_or(Outcome::BudgetExhausted { budget: a.budget })
    };
    let consistent = discriminate_variant(oracle, &probes, a.budget).map_err(Failure::usage)?;
    for (x, d) in &probes {
        writeln!(out, "probe {x} @ {d}: {}", oracle(x, d)).map_err(io_err)?;
    }
    writeln!(out, "consistent {}", consistent.len()).map_err(io_err)?;
    for v in &consistent {
        writeln!(out, "{v}").map_err(io_err)?;
    }
    if consistent.is_empty() {
        writeln!(out, "inconsistent: no variant reproduces the observations").map_err(io_err)?;
        return Ok(EXIT_FINDINGS);
    }
    Ok(EXIT_OK)
}

fn cmd_report(a: ReportArgs, out: &mut dyn Write) -> CmdResult {
    let text = if a.ledger.exists() { read(&a.ledger)? } else { String::new() };
    let mut ledger = EffectuationLedger::parse(&text).map_err(|e| Failure::usage(format!("{}: {e}", a.ledger.display())))?;
    if let (Some(prog), Some(suite)) = (&a.prog, &a.suite) {
        let x = load_program(prog)?;
        let suite = load_suite(suite)?;
        run_suite(&x, &program_id(prog), &suite, a.exec.variant, a.exec.budget, &mut ledger).map_err(Failure::usage)?;
    }
    let thresholds = ProcessThresholds {
        testing_share: a.testing_share,
        wildcard_fraction: a.wildcard_fraction,
        high_coverage: a.high_coverage,
    };
    let report = process_report(&ledger, thresholds);
    writeln!(out, "{report}").map_err(io_err)?;
    Ok(if report.flags.is_empty() { EXIT_OK } else { EXIT_FINDINGS })
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the exit code.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let informational = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let sink: &mut dyn Write = if informational { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return if informational { EXIT_OK } else { EXIT_USAGE };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Test(a) => cmd_test(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Lint(a) => cmd_lint(a, out),
        Command::FaultCertify(a) => cmd_certify(a, out),
        Command::FaultSearch(a) => cmd_search(a, out),
        Command::Adequacy(a) => cmd_adequacy(a, out),
        Command::VariantsEnum(a) => cmd_enum(a, out),
        Command::VariantsDiscriminate(a) => cmd_discriminate(a, out),
        Command::Report(a) => cmd_report(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "islab: {}", f.message);
            f.code
        }
    }
}
