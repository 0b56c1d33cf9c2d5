//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on any FAIL.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use islab_core::faults::{
    AdequacyVerdict, Certification, Certifier, NotAdequateReason, RejectionReason, RepairAlphabet, Replacements,
};
use islab_core::isa::Method;
use islab_core::testing::{evaluate_suite, Acceptance};
use islab_core::views::RuleId;
use islab_core::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

/// Exit code, stdout, stderr and a label for one invocation.
type Captured = (i32, Vec<u8>, Vec<u8>, String);

type Criterion = (&'static str, fn() -> Check, Option<Duration>);

const BUDGET: u64 = 100;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn parse(text: &str) -> InstructionSequence {
    InstructionSequence::parse(text).expect(text)
}

fn regs(names: &[&str]) -> Vec<Register> {
    names.iter().map(|n| Register::new(n).unwrap()).collect()
}

fn random_instruction(rng: &mut ChaCha8Rng, pool: &[Register], len: usize, pos: usize, backward: bool) -> Instruction {
    let r = pool.choose(rng).unwrap().clone();
    let m = *Method::ALL.choose(rng).unwrap();
    match rng.gen_range(0..10) {
        0..=2 => Instruction::Basic(r, m),
        3 => Instruction::PosTest(r, m),
        4 => Instruction::NegTest(r, m),
        5 | 6 => Instruction::FwdJump(rng.gen_range(1..=(len + 1 - pos).max(1) as u64)),
        7 if backward && pos > 1 => Instruction::BwdJump(rng.gen_range(1..pos as u64)),
        _ => Instruction::Halt,
    }
}

fn random_program(rng: &mut ChaCha8Rng, pool: &[Register], max_len: usize, backward: bool) -> InstructionSequence {
    let len = rng.gen_range(1..=max_len);
    let ins = (1..=len).map(|p| random_instruction(rng, pool, len, p, backward)).collect();
    InstructionSequence::new(ins).unwrap()
}

fn all_states(domain: &[Register]) -> Vec<MachineState> {
    (0u32..1 << domain.len())
        .map(|bits| {
            MachineState::from_pairs(
                domain
                    .iter()
                    .enumerate()
                    .map(|(k, r)| (r.clone(), bits >> (domain.len() - 1 - k) & 1 == 1)),
            )
        })
        .collect()
}

fn criterion_1() -> Check {
    let variants = enumerate_variants();
    ensure(variants.len() == 36, || format!("{} variants", variants.len()))?;
    let unique: BTreeSet<_> = variants.iter().collect();
    ensure(unique.len() == 36, || "duplicate variants".into())?;
    let x = parse("#5; !");
    let mut kinds = BTreeSet::new();
    let mut outcomes = BTreeSet::new();
    for high in ExcessPolicy::ALL {
        let v: SemanticsVariant = format!("low=deadlock,high={high}").parse().unwrap();
        let (o, _) = effectuate(&x, &MachineState::new(), v, BUDGET).map_err(|e| e.to_string())?;
        kinds.insert(o.kind());
        outcomes.insert(o.to_string());
    }
    ensure(outcomes.len() == 6, || format!("{} distinct outcomes", outcomes.len()))?;
    Ok(format!("36 variants; 6 pairwise-distinct high-excess outcomes ({} outcome kinds, terminate and skip differ in steps)", kinds.len()))
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let variants = enumerate_variants();
    let mut accepted = 0;
    let mut drawn = 0;
    while accepted < 500 {
        drawn += 1;
        let nregs = rng.gen_range(1..=4);
        let pool = regs(&["a", "b", "c", "d"][..nregs]);
        let x = random_program(&mut rng, &pool, 12, true);
        if !static_check(&x).is_empty() {
            continue;
        }
        let states = all_states(&pool);
        let reference: Vec<Outcome> = states
            .iter()
            .map(|d| effectuate(&x, d, SemanticsVariant::default(), BUDGET).unwrap().0)
            .collect();
        if !reference.iter().all(|o| matches!(o, Outcome::Terminated { .. })) {
            continue;
        }
        accepted += 1;
        for v in &variants {
            for (d, want) in states.iter().zip(&reference) {
                let (got, _) = effectuate(&x, d, *v, BUDGET).unwrap();
                ensure(&got == want, || format!("{x} on {d} under {v}: {got} vs {want}"))?;
            }
        }
    }
    Ok(format!("500 halting in-range programs ({drawn} drawn), 0 counterexamples"))
}

fn criterion_3() -> Check {
    let x = parse("-i.get; #3; o.set:0; !; o.set:1; !");
    let spec = Specification::copy("o", "i");
    let v = SemanticsVariant::default();
    let suite = exhaustive_suite(&spec).map_err(|e| e.to_string())?;
    let before = evaluate_suite(&x, &suite, v, BUDGET).map_err(|e| e.to_string())?;
    let (case, _) = before.results.iter().find(|(_, r)| !r.passed()).ok_or("no failing case")?;
    let failing = FailureRecord::observe(&x, case, v, BUDGET).map_err(|e| e.to_string())?;
    let f: Fragment = "1".parse().unwrap();
    let r = Replacement::parse("+i.get").unwrap();
    let cert = certify_fault(&x, RegressionBasis::Exhaustive(&spec), &failing, &f, &r, FaultBudgetConfig::s4(), v, BUDGET)
        .map_err(|e| e.to_string())?;
    let fault = cert.certified().ok_or_else(|| format!("not certified: {cert:?}"))?;
    let after = evaluate_suite(&fault.repaired, &suite, v, BUDGET).map_err(|e| e.to_string())?;
    let flips = before
        .results
        .iter()
        .zip(&after.results)
        .filter(|((_, a), (_, b))| !a.passed() && b.passed())
        .count();
    ensure(flips == 4, || format!("{flips} of 4 cases flipped"))?;
    let ideal = idealized_regression_criterion(&x, &fault.repaired, &spec, v, BUDGET).map_err(|e| e.to_string())?;
    ensure(ideal.holds(), || format!("idealized criterion fails: {ideal:?}"))?;
    Ok("certified under s4; 4/4 cases Fail->Pass; idealized criterion holds".into())
}

/// Random table specification over `domain`: each state expects one random
/// output register value, or any outcome.
fn random_spec(rng: &mut ChaCha8Rng, domain: &[Register]) -> Specification {
    let table = (0..1usize << domain.len())
        .map(|_| {
            if rng.gen_bool(0.15) {
                Acceptance::Any
            } else {
                let r = domain.choose(rng).unwrap().clone();
                Acceptance::All(vec![(r, rng.gen_bool(0.5))])
            }
        })
        .collect();
    Specification::from_table(domain.to_vec(), table).unwrap()
}

fn random_edit(rng: &mut ChaCha8Rng, x: &InstructionSequence, pool: &[Register]) -> (Fragment, Replacement) {
    let len = x.len();
    let lo = rng.gen_range(1..=len);
    let hi = rng.gen_range(lo..=len.min(lo + 1));
    let f = Fragment::new(vec![(lo, hi)]).unwrap();
    let n = rng.gen_range(0..=3);
    let new_len = len - f.total_length() + n;
    let part = (0..n)
        .map(|k| random_instruction(rng, pool, new_len.max(1), lo + k, true))
        .collect();
    (f, Replacement::new(vec![part]))
}

fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let v = SemanticsVariant::default();
    let mut pairs = 0;
    let mut sub_trials = 0;
    let mut false_positives = 0;
    while pairs < 150 {
        let nregs = rng.gen_range(1..=8);
        let pool = regs(&["a", "b", "c", "d", "e", "f", "g", "h"][..nregs]);
        let spec = random_spec(&mut rng, &pool);
        let x = random_program(&mut rng, &pool, 8, true);
        let (f, r) = random_edit(&mut rng, &x, &pool);
        let Ok(y) = substitute(&x, &f, &r) else { continue };
        pairs += 1;
        let ideal = idealized_regression_criterion(&x, &y, &spec, v, BUDGET).map_err(|e| e.to_string())?;
        let suite = exhaustive_suite(&spec).map_err(|e| e.to_string())?;
        let before = evaluate_suite(&x, &suite, v, BUDGET).map_err(|e| e.to_string())?;
        let after = evaluate_suite(&y, &suite, v, BUDGET).map_err(|e| e.to_string())?;
        let passing: Vec<TestCase> = before.results.iter().filter(|(_, t)| t.passed()).map(|(c, _)| c.clone()).collect();
        let newly: Vec<MachineState> = match regression_check(&y, &passing, v, BUDGET).map_err(|e| e.to_string())? {
            testing::RegressionVerdict::Pass => Vec::new(),
            testing::RegressionVerdict::NewlyFailing(cases) => cases.into_iter().map(|(c, _)| c.input).collect(),
        };
        let fixed: Vec<MachineState> = before
            .results
            .iter()
            .zip(&after.results)
            .filter(|((_, a), (_, b))| !a.passed() && b.passed())
            .map(|((c, _), _)| c.input.clone())
            .collect();
        ensure(newly == ideal.regressions && fixed == ideal.fixed, || {
            format!("exhaustive disagreement on {x} -> {y}: suite {newly:?}/{fixed:?} vs {ideal:?}")
        })?;
        // strict sub-suites: suite-certified vs idealized, one direction only
        if suite.len() < 2 {
            continue;
        }
        for _ in 0..3 {
            let keep = rng.gen_range(1..suite.len());
            let mut sub = suite.clone();
            sub.shuffle(&mut rng);
            sub.truncate(keep);
            sub.sort_by(|a, b| a.name.cmp(&b.name));
            let sub_before = evaluate_suite(&x, &sub, v, BUDGET).map_err(|e| e.to_string())?;
            let sub_after = evaluate_suite(&y, &sub, v, BUDGET).map_err(|e| e.to_string())?;
            let pairs_ab = || sub_before.results.iter().zip(&sub_after.results);
            let flip = pairs_ab().any(|((_, a), (_, b))| !a.passed() && b.passed());
            let regress = pairs_ab().any(|((_, a), (_, b))| a.passed() && !b.passed());
            sub_trials += 1;
            // a sub-suite only sees a subset of the domain, so anything it
            // observes must also be observed by the idealized criterion
            ensure(!regress || !ideal.regressions.is_empty(), || format!("sub-suite regression unseen by oracle: {x} -> {y}"))?;
            ensure(!flip || !ideal.fixed.is_empty(), || format!("sub-suite fix unseen by oracle: {x} -> {y}"))?;
            if flip && !regress && !ideal.holds() {
                false_positives += 1;
            }
        }
    }
    Ok(format!(
        "{pairs} pairs exact on exhaustive suites; {sub_trials} sub-suite trials, {false_positives} false positives, 0 reverse"
    ))
}

fn criterion_5() -> Check {
    let spec = Specification::copy("o", "i");
    let v = SemanticsVariant::default();
    let x = parse("-i.get; #3; o.set:0; !; o.set:1; !");
    let bounds = SearchBounds::for_program(&x, Some(&spec), 1);
    let report = check_adequacy(&x, &spec, FaultBudgetConfig::s4(), &bounds, v, BUDGET).map_err(|e| e.to_string())?;
    let chain = report.chain().ok_or_else(|| format!("flipped program: {:?}", report.verdict))?;
    ensure(chain.len() == 1, || format!("chain length {}", chain.len()))?;
    let y = parse("o.set:0; !");
    let bounds = SearchBounds::for_program(&y, Some(&spec), 1);
    let report = check_adequacy(&y, &spec, FaultBudgetConfig::s4(), &bounds, v, BUDGET).map_err(|e| e.to_string())?;
    ensure(
        report.verdict == AdequacyVerdict::NotAdequate(NotAdequateReason::SearchExhausted),
        || format!("o.set:0; !: {:?}", report.verdict),
    )?;
    Ok("flipped program Adequate (chain 1); \"o.set:0; !\" NotAdequate(search-exhausted)".into())
}

fn criterion_6() -> Check {
    let x = parse("!; r.set:1");
    let violations = lint(&x, &RuleId::ALL);
    ensure(
        violations.iter().any(|w| w.rule == RuleId::Unreachable && w.positions == vec![2]),
        || format!("no unreachable violation at 2: {violations:?}"),
    )?;
    let v = SemanticsVariant::default();
    let domain = regs(&["r"]);
    // every non-trivial expectation table over {r}, so each has a failing case
    let options = [
        Acceptance::Any,
        Acceptance::All(vec![(domain[0].clone(), false)]),
        Acceptance::All(vec![(domain[0].clone(), true)]),
    ];
    let loose = FaultBudgetConfig {
        single_fault_fraction: 1.0,
        fix_length_deviation: 1.0,
        ..FaultBudgetConfig::s4()
    };
    let alphabet = RepairAlphabet::standard(&domain, 2).with_backward_jumps(2);
    let bounds = SearchBounds::new(alphabet, 2);
    let f = Fragment::single(2).unwrap();
    let mut tried = 0u64;
    for a in &options {
        for b in &options {
            let spec = Specification::from_table(domain.clone(), vec![a.clone(), b.clone()]).unwrap();
            let suite = exhaustive_suite(&spec).map_err(|e| e.to_string())?;
            for case in &suite {
                let Ok(failing) = FailureRecord::observe(&x, case, v, BUDGET) else { continue };
                let certifier = Certifier::new(&x, RegressionBasis::Exhaustive(&spec), &failing, v, BUDGET, loose, None)
                    .map_err(|e| e.to_string())?;
                for r in Replacements::new(1, 1, &loose, &bounds) {
                    tried += 1;
                    match certifier.certify(&f, &r).map_err(|e| e.to_string())? {
                        Certification::Certified(c) => return Err(format!("certified fault at 2: {c}")),
                        Certification::Rejected(reasons) => ensure(
                            reasons.iter().any(|r| matches!(r, RejectionReason::RepairConfirmation { .. })),
                            || format!("unexpected rejection {reasons:?}"),
                        )?,
                    }
                }
            }
        }
    }
    ensure(tried > 0, || "no candidates tried".into())?;
    Ok(format!("unreachable at 2; {tried} candidate repairs at 2, none certified"))
}

fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let spec = Specification::copy("o", "i");
    let suite = exhaustive_suite(&spec).map_err(|e| e.to_string())?;
    let pool = regs(&["i", "o", "r"]);
    let mut incorrect = 0;
    for _ in 0..50 {
        let x = if rng.gen_bool(0.5) {
            random_program(&mut rng, &pool, 10, true)
        } else {
            // near-correct: the copy program with at most one position redrawn
            let copy = parse("+i.get; #3; o.set:0; !; o.set:1; !");
            let p = rng.gen_range(1..=copy.len());
            if rng.gen_bool(0.3) {
                copy
            } else {
                let ins = random_instruction(&mut rng, &pool, copy.len(), p, true);
                substitute(&copy, &Fragment::single(p).unwrap(), &Replacement::new(vec![vec![ins]])).unwrap()
            }
        };
        let v = enumerate_variants()[rng.gen_range(0..36)];
        let mut ledger = EffectuationLedger::new();
        let report = run_suite(&x, "p", &suite, v, BUDGET, &mut ledger).map_err(|e| e.to_string())?;
        let verdict = verify_exhaustive(&x, &spec, v, BUDGET).map_err(|e| e.to_string())?;
        let failing: Vec<&MachineState> = report.results.iter().filter(|(_, r)| !r.passed()).map(|(c, _)| &c.input).collect();
        let witnesses: Vec<&MachineState> = verdict.witnesses().iter().map(|w| &w.input).collect();
        ensure(failing == witnesses && report.all_passed() == verdict.is_correct(), || {
            format!("{x} under {v}: suite {failing:?} vs verifier {witnesses:?}")
        })?;
        incorrect += usize::from(!verdict.is_correct());
    }
    Ok(format!("50 programs agree case-for-case ({incorrect} incorrect)"))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn invocations(ledger: &str) -> Vec<Vec<String>> {
    let fx = |name: &str| fixtures().join(name).display().to_string();
    let raw: Vec<Vec<String>> = vec![
        vec!["run".into(), "--prog".into(), fx("copy.isq"), "--in".into(), "i=1,o=0".into(), "--budget".into(), "100".into(), "--trace".into(), "--ledger".into(), ledger.into()],
        vec!["test".into(), "--prog".into(), fx("bad.isq"), "--suite".into(), fx("oi.suite"), "--ledger".into(), ledger.into()],
        vec!["verify".into(), "--prog".into(), fx("bad.isq"), "--spec".into(), fx("oi.spec"), "--intent".into(), fx("onoti.spec")],
        vec!["lint".into(), "--prog".into(), fx("unreachable.isq"), "--format".into(), "machine".into()],
        vec!["fault-certify".into(), "--prog".into(), fx("bad.isq"), "--spec".into(), fx("oi.spec"), "--frag".into(), "1".into(), "--repl".into(), "+i.get".into(), "--profile".into(), "s4".into()],
        vec!["fault-search".into(), "--prog".into(), fx("bad.isq"), "--suite".into(), fx("oi.suite"), "--frag".into(), "1".into(), "--profile".into(), "s4".into()],
        vec!["adequacy".into(), "--prog".into(), fx("bad.isq"), "--spec".into(), fx("oi.spec"), "--profile".into(), "s4".into()],
        vec!["variants-enum".into(), "--prog".into(), fx("overshoot.isq"), "--in".into(), "".into()],
        vec!["variants-discriminate".into(), "--oracle".into(), "low=error,high=skip".into(), "--probe".into(), "#5; !".into(), "--probe".into(), "\\#5; !".into()],
        vec!["report".into(), "--ledger".into(), ledger.into(), "--prog".into(), fx("copy.isq"), "--suite".into(), fx("oi.suite")],
    ];
    raw
}

fn criterion_8() -> Check {
    let bin = env!("CARGO_BIN_EXE_islab");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs: Vec<Vec<Captured>> = Vec::new();
    for round in 0..3 {
        let ledger = dir.path().join(format!("ledger{round}.txt"));
        let ledger_str = ledger.display().to_string();
        let mut results = Vec::new();
        for args in invocations(&ledger_str) {
            let output = Command::new(bin).args(&args).output().map_err(|e| e.to_string())?;
            let code = output.status.code().unwrap_or(-1);
            ensure(code != 2, || format!("{args:?}: usage error {}", String::from_utf8_lossy(&output.stderr)))?;
            let mut out = Vec::new();
            let mut err = Vec::new();
            let lib_code = islab_cli::run_cli(std::iter::once("islab".to_string()).chain(args.iter().cloned()), &mut out, &mut err);
            ensure(lib_code == code && out == output.stdout, || format!("{args:?}: binary and library differ"))?;
            results.push((code, output.stdout, output.stderr, args[0].clone()));
        }
        let ledger_text = std::fs::read_to_string(&ledger).map_err(|e| e.to_string())?;
        results.push((0, ledger_text.into_bytes(), Vec::new(), "ledger".into()));
        runs.push(results);
    }
    for round in &runs[1..] {
        for (a, b) in runs[0].iter().zip(round) {
            ensure(a.0 == b.0 && a.1 == b.1 && a.2 == b.2, || format!("{} output differs between runs", a.3))?;
        }
    }
    Ok(format!("{} subcommands byte-identical across 3 runs", runs[0].len() - 1))
}

fn criterion_9() -> Check {
    let x = parse("r.get; \\#1");
    let (o, _) = effectuate(&x, &MachineState::new(), SemanticsVariant::default(), 100).map_err(|e| e.to_string())?;
    match o {
        Outcome::Livelock { detected_at_step } if detected_at_step <= 3 => Ok(format!("Livelock detected at step {detected_at_step}")),
        other => Err(format!("got {other}")),
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("variant space", criterion_1, Some(Duration::from_secs(1))),
        ("marginal-case irrelevance", criterion_2, Some(Duration::from_secs(30))),
        ("fault certification end-to-end", criterion_3, Some(Duration::from_secs(1))),
        ("oracle equivalence", criterion_4, Some(Duration::from_secs(60))),
        ("adequacy", criterion_5, Some(Duration::from_secs(10))),
        ("violations are not mechanical faults", criterion_6, Some(Duration::from_secs(5))),
        ("verifier/harness agreement", criterion_7, Some(Duration::from_secs(10))),
        ("CLI determinism", criterion_8, None),
        ("livelock exactness", criterion_9, None),
    ];
    let mut failed = 0;
    for (k, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = match (result, limit) {
            (Ok(_), Some(limit)) if elapsed > *limit => Err(format!("took {elapsed:?}, limit {limit:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail} [{elapsed:.2?}]", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {why} [{elapsed:.2?}]", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
