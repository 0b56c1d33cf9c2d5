use std::collections::BTreeSet;

use islab_core::faults::{Certifier, RepairAlphabet, Replacements};
use islab_core::isa::{fragments_of_len, Method};
use islab_core::testing::{evaluate_suite, parse_suite, RecordDraft};
use islab_core::*;
use proptest::prelude::*;

fn register() -> impl Strategy<Value = Register> {
    prop::sample::select(vec!["i", "o", "r"]).prop_map(|n| Register::new(n).unwrap())
}

fn method() -> impl Strategy<Value = Method> {
    prop::sample::select(Method::ALL.to_vec())
}

fn instruction() -> impl Strategy<Value = Instruction> {
    prop_oneof![
        (register(), method()).prop_map(|(r, m)| Instruction::Basic(r, m)),
        (register(), method()).prop_map(|(r, m)| Instruction::PosTest(r, m)),
        (register(), method()).prop_map(|(r, m)| Instruction::NegTest(r, m)),
        (0u64..8).prop_map(Instruction::FwdJump),
        (0u64..8).prop_map(Instruction::BwdJump),
        Just(Instruction::Halt),
    ]
}

fn program(max_len: usize) -> impl Strategy<Value = InstructionSequence> {
    prop::collection::vec(instruction(), 1..=max_len)
        .prop_map(|v| InstructionSequence::new(v).unwrap())
}

fn state() -> impl Strategy<Value = MachineState> {
    (any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(i, o, r)| {
        MachineState::from_pairs([
            (Register::new("i").unwrap(), i),
            (Register::new("o").unwrap(), o),
            (Register::new("r").unwrap(), r),
        ])
    })
}

fn fragment_for(len: usize) -> impl Strategy<Value = Fragment> {
    let all: Vec<Fragment> = fragments_of_len(len, len, 3).collect();
    prop::sample::select(all)
}

/// Independent generator: every subset of positions, with every way of
/// cutting its runs into separate parts.
fn brute_force_fragments(len: usize, max_total: usize, max_parts: usize) -> BTreeSet<Vec<(usize, usize)>> {
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << len) {
        let chosen: Vec<usize> = (1..=len).filter(|p| mask >> (p - 1) & 1 == 1).collect();
        if chosen.len() > max_total {
            continue;
        }
        let joints: Vec<usize> = (0..chosen.len().saturating_sub(1))
            .filter(|&k| chosen[k] + 1 == chosen[k + 1])
            .collect();
        for cuts in 0u32..(1 << joints.len()) {
            let mut parts: Vec<(usize, usize)> = vec![(chosen[0], chosen[0])];
            for (k, &p) in chosen.iter().enumerate().skip(1) {
                let joined = joints
                    .iter()
                    .position(|&j| j == k - 1)
                    .is_some_and(|idx| cuts >> idx & 1 == 0);
                if joined {
                    parts.last_mut().unwrap().1 = p;
                } else {
                    parts.push((p, p));
                }
            }
            if parts.len() <= max_parts {
                out.insert(parts);
            }
        }
    }
    out
}

#[test]
fn fragment_enumeration_matches_brute_force() {
    for len in 1..=6 {
        for max_total in 1..=len + 1 {
            for max_parts in 1..=4 {
                let produced: Vec<Vec<(usize, usize)>> = fragments_of_len(len, max_total, max_parts)
                    .map(|f| f.parts().to_vec())
                    .collect();
                let unique: BTreeSet<_> = produced.iter().cloned().collect();
                assert_eq!(unique.len(), produced.len(), "duplicates at {len}/{max_total}/{max_parts}");
                assert_eq!(unique, brute_force_fragments(len, max_total, max_parts), "{len}/{max_total}/{max_parts}");
                // lexicographic order on part boundaries
                assert!(produced.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
    assert_eq!(brute_force_fragments(6, 2, 2).len(), 26);
}

proptest! {
    #[test]
    fn render_parse_round_trip(x in program(12)) {
        let text = x.render();
        let back = InstructionSequence::parse(&text).unwrap();
        prop_assert_eq!(&back, &x);
        prop_assert_eq!(back.render(), text);
    }

    #[test]
    fn substitution_is_local((x, f) in program(8).prop_flat_map(|x| { let n = x.len(); (Just(x), fragment_for(n)) }),
                             fill in prop::collection::vec(prop::collection::vec(instruction(), 0..3), 3)) {
        let r = Replacement::new(fill.into_iter().take(f.arity()).collect());
        match substitute(&x, &f, &r) {
            Ok(y) => {
                // independent splice: walk positions, emitting each part at its start
                let mut expected: Vec<Instruction> = Vec::new();
                for p in 1..=x.len() {
                    if let Some(k) = f.parts().iter().position(|&(lo, _)| lo == p) {
                        expected.extend(r.parts()[k].iter().cloned());
                    }
                    if !f.contains(p) {
                        expected.push(x.get(p).unwrap().clone());
                    }
                }
                prop_assert_eq!(y.instructions(), &expected[..]);
                prop_assert_eq!(y.len(), x.len() - f.total_length() + r.total_length());
            }
            Err(e) => prop_assert_eq!(e, isa::SubstituteError::EmptyResult),
        }
    }

    #[test]
    fn extraction_inverts_substitution((x, f) in program(8).prop_flat_map(|x| { let n = x.len(); (Just(x), fragment_for(n)) })) {
        let r = extract(&x, &f).unwrap();
        prop_assert_eq!(substitute(&x, &f, &r).unwrap(), x);
    }

    #[test]
    fn effectuation_is_deterministic(x in program(10), d in state(), vi in 0usize..36, budget in 1u64..200) {
        let v = enumerate_variants()[vi];
        prop_assert_eq!(effectuate(&x, &d, v, budget).unwrap(), effectuate(&x, &d, v, budget).unwrap());
    }

    #[test]
    fn trace_indices_are_consecutive(x in program(10), d in state(), vi in 0usize..36) {
        let v = enumerate_variants()[vi];
        let (_, trace) = effectuate(&x, &d, v, 100).unwrap();
        for (k, step) in trace.steps.iter().enumerate() {
            prop_assert_eq!(step.step, k as u64 + 1);
        }
    }

    #[test]
    fn terminated_steps_do_not_depend_on_budget(x in program(10), d in state(), extra in 0u64..50) {
        let v = SemanticsVariant::default();
        let (out, _) = effectuate(&x, &d, v, 500).unwrap();
        if let Outcome::Terminated { steps, .. } = out {
            let (again, _) = effectuate(&x, &d, v, steps + extra).unwrap();
            prop_assert_eq!(again, out);
        }
    }

    #[test]
    fn livelock_detected_within_state_bound(x in program(8), d in state(), vi in 0usize..36) {
        let v = enumerate_variants()[vi];
        // at most 3 registers: n * 2^3 + 1 steps suffice
        let bound = x.len() as u64 * 8 + 1;
        let (out, _) = effectuate(&x, &d, v, bound).unwrap();
        prop_assert!(!matches!(out, Outcome::BudgetExhausted { .. }), "{} on {}: {}", x, d, out);
        if let Outcome::Livelock { detected_at_step } = out {
            prop_assert!(detected_at_step <= bound);
        }
    }

    #[test]
    fn pass_is_monotone_in_budget(x in program(10), d in state(), k in 1u64..20, extra in 0u64..40) {
        let tc = TestCase::new("c", d, testing::Acceptance::Any, k);
        let v = SemanticsVariant::default();
        let small = run_confirmation_test(&x, &tc, v, k).unwrap();
        let large = run_confirmation_test(&x, &tc, v, k + extra).unwrap();
        if small.passed() {
            prop_assert!(large.passed());
            prop_assert_eq!(small.outcome, large.outcome);
        }
    }

    #[test]
    fn ledger_is_append_only(ops in prop::collection::vec((0usize..4, any::<bool>()), 0..30)) {
        let mut ledger = EffectuationLedger::new();
        let mut snapshots: Vec<Vec<testing::EffectuationRecord>> = vec![ledger.records().to_vec()];
        for (p, has_purpose) in ops {
            let mut draft = RecordDraft::new("p", &Outcome::Deadlock { steps: 1 });
            if has_purpose {
                draft = draft.purpose(Purpose::ALL[p]);
            }
            let before = ledger.len();
            let res = ledger.record(draft).map(|_| ());
            prop_assert_eq!(res.is_ok(), has_purpose);
            prop_assert_eq!(ledger.len(), before + usize::from(has_purpose));
            snapshots.push(ledger.records().to_vec());
        }
        for w in snapshots.windows(2) {
            prop_assert!(w[1].starts_with(&w[0]));
        }
    }

    #[test]
    fn suite_agrees_with_verifier(x in program(10)) {
        let spec = Specification::copy("o", "i");
        let v = SemanticsVariant::default();
        let suite = exhaustive_suite(&spec).unwrap();
        let report = evaluate_suite(&x, &suite, v, 100).unwrap();
        let verdict = verify_exhaustive(&x, &spec, v, 100).unwrap();
        prop_assert_eq!(report.all_passed(), verdict.is_correct());
        let failing: Vec<MachineState> = report.results.iter().filter(|(_, r)| !r.passed()).map(|(c, _)| c.input.clone()).collect();
        let witnesses: Vec<MachineState> = verdict.witnesses().iter().map(|w| w.input.clone()).collect();
        prop_assert_eq!(failing, witnesses);
    }

    #[test]
    fn defect_classes_partition(x in program(8), neg_spec in any::<bool>(), neg_intent in any::<bool>()) {
        let parse = |neg: bool| Specification::parse(if neg { "domain i,o\nrule o=!i" } else { "domain i,o\nrule o=i" }).unwrap();
        let (spec, intent) = (parse(neg_spec), parse(neg_intent));
        let r = classify_defects(&x, &spec, &intent, SemanticsVariant::default(), 100).unwrap();
        let mut all: Vec<MachineState> = r.spec_defects.iter().chain(&r.sequence_faults).chain(&r.phantom_failures).cloned().collect();
        let n = all.len();
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), n);
        if neg_spec == neg_intent {
            prop_assert!(r.spec_defects.is_empty() && r.phantom_failures.is_empty());
        }
    }
}

#[test]
fn marginal_cases_only() {
    // halting, statically in-range programs behave the same under all variants
    let x = InstructionSequence::parse("+i.get; #3; o.set:0; !; o.set:1; !").unwrap();
    let spec = Specification::copy("o", "i");
    for s in spec.states().unwrap() {
        let reference = effectuate(&x, &s, SemanticsVariant::default(), 100).unwrap();
        for v in enumerate_variants() {
            assert_eq!(effectuate(&x, &s, v, 100).unwrap(), reference, "{v}");
        }
    }
}

#[test]
fn certification_is_sound_and_dominated_by_oracle() {
    let spec = Specification::copy("o", "i");
    let v = SemanticsVariant::default();
    let suite = exhaustive_suite(&spec).unwrap();
    let programs = [
        "-i.get; #3; o.set:0; !; o.set:1; !",
        "o.set:0; !",
        "+i.get; #3; o.set:1; !; o.set:1; !",
        "#1; #1; o.set:0; !; o.set:0; !",
    ];
    let config = faults::FaultBudgetConfig::s4();
    for text in programs {
        let x = InstructionSequence::parse(text).unwrap();
        let bounds = faults::SearchBounds::for_program(&x, Some(&spec), 1);
        let baseline = evaluate_suite(&x, &suite, v, 100).unwrap();
        for (case, result) in baseline.results.iter().filter(|(_, r)| !r.passed()) {
            let record = FailureRecord { case: case.clone(), result: result.clone(), variant: v };
            let certifier = Certifier::new(&x, RegressionBasis::Exhaustive(&spec), &record, v, 100, config, None).unwrap();
            for f in enumerate_fragments(&x, 1, 1) {
                for r in Replacements::new(f.arity(), f.total_length(), &config, &bounds) {
                    let Ok(cert) = certifier.certify(&f, &r) else { continue };
                    let Some(fault) = cert.certified() else { continue };
                    // re-applying the repair reproduces the evidence
                    let y = substitute(&x, &f, &r).unwrap();
                    assert_eq!(y, fault.repaired);
                    assert!(run_confirmation_test(&y, case, v, 100).unwrap().passed());
                    let regress: Vec<TestCase> = suite.iter().filter(|c| fault.regression.cases.contains(&c.name)).cloned().collect();
                    assert!(regression_check(&y, &regress, v, 100).unwrap().is_pass());
                    // exhaustive basis: the idealized criterion must hold
                    let ideal = idealized_regression_criterion(&x, &y, &spec, v, 100).unwrap();
                    assert!(ideal.holds(), "{text}: {f} -> {r}");
                }
            }
        }
    }
}

#[test]
fn adequate_chains_replay() {
    let spec = Specification::copy("o", "i");
    let v = SemanticsVariant::default();
    let suite = exhaustive_suite(&spec).unwrap();
    let config = faults::FaultBudgetConfig { total_fraction: 0.5, ..faults::FaultBudgetConfig::s4() };
    for text in [
        "-i.get; #3; o.set:0; !; o.set:1; !",
        "#1; #1; o.set:0; !; o.set:0; !",
        "#1; #1; #1; !; o.set:1; !",
    ] {
        let x = InstructionSequence::parse(text).unwrap();
        let bounds = faults::SearchBounds::for_program(&x, Some(&spec), 1);
        let report = check_adequacy(&x, &spec, config, &bounds, v, 100).unwrap();
        let again = check_adequacy(&x, &spec, config, &bounds, v, 100).unwrap();
        assert_eq!(report, again, "deterministic");
        let chain = report.chain().expect(text);
        let mut current = x.clone();
        for link in chain {
            current = substitute(&current, &link.fault.fragment, &link.fault.replacement).unwrap();
            assert_eq!(current, link.fault.repaired);
        }
        assert!(evaluate_suite(&current, &suite, v, 100).unwrap().all_passed());
        assert!(report.total_fraction <= 0.5 + 1e-12);
        let originals: Vec<Fragment> = chain.iter().map(|l| l.original_fragment.clone()).collect();
        assert!(faults::account_fragments(x.len(), &originals, &config).is_ok());
    }
}

#[test]
fn search_transcripts_are_deterministic() {
    let spec = Specification::copy("o", "i");
    let v = SemanticsVariant::default();
    let x = InstructionSequence::parse("-i.get; #3; o.set:0; !; o.set:1; !").unwrap();
    let case = &parse_suite("case t: in i=1 ; expect o=1 ; k 8").unwrap()[0];
    let failing = [FailureRecord::observe(&x, case, v, 100).unwrap()];
    let alphabet = RepairAlphabet::standard(&x.registers(), 6).with_backward_jumps(2);
    let bounds = faults::SearchBounds::new(alphabet, 1);
    let f = Fragment::single(1).unwrap();
    let run = || search_repairs(&x, RegressionBasis::Exhaustive(&spec), &failing, &f, faults::FaultBudgetConfig::s4(), &bounds, v, 100).unwrap();
    assert_eq!(run(), run());
}
