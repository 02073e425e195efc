use cotforge::bank::{Bank, TestKind};
use cotforge::provider::MockProvider;
use cotforge::synthesis::{
    check_candidate, parse_signature, render_signature, synthesize_concept, validate_test_structure,
    SynthesisConfig,
};
use cotforge::{Concept, InvalidReason, MethodSpec, ParamSpec, SignatureKind, SignatureSpec, TestStructure};
use proptest::prelude::*;

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,6}".prop_map(|s| format!("v_{s}"))
}

fn type_expr() -> impl Strategy<Value = String> {
    let leaf = prop::sample::select(vec!["int", "str", "float", "bool", "None"]).prop_map(str::to_string);
    leaf.prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|t| format!("list[{t}]")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("dict[{a}, {b}]")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("tuple[{a}, {b}]")),
        ]
    })
}

fn params() -> impl Strategy<Value = Vec<ParamSpec>> {
    prop::collection::vec((ident(), type_expr()), 0..4)
        .prop_map(|ps| ps.into_iter().map(|(name, type_expr)| ParamSpec { name, type_expr }).collect())
}

fn function_spec() -> impl Strategy<Value = SignatureSpec> {
    (ident(), params(), prop::option::of(ident()), type_expr()).prop_map(|(name, params, return_name, return_type)| {
        SignatureSpec {
            kind: SignatureKind::Function,
            name,
            params,
            return_name,
            return_type,
            methods: Vec::new(),
            primary_method: None,
        }
    })
}

fn class_spec() -> impl Strategy<Value = SignatureSpec> {
    let method = (ident(), params(), type_expr()).prop_map(|(name, params, return_type)| MethodSpec {
        name,
        params,
        return_name: None,
        return_type,
    });
    (
        "[A-Z][a-z]{1,6}",
        prop::option::of(params()),
        prop::collection::vec(method, 1..4),
        any::<bool>(),
    )
        .prop_map(|(name, init, mut methods, with_compute)| {
            if with_compute {
                methods[0].name = "compute".into();
            }
            if let Some(ps) = &init {
                methods.insert(
                    0,
                    MethodSpec {
                        name: "__init__".into(),
                        params: ps.clone(),
                        return_name: None,
                        return_type: "None".into(),
                    },
                );
            }
            let primary = if with_compute { "compute".to_string() } else { methods.last().unwrap().name.clone() };
            SignatureSpec {
                kind: SignatureKind::Class,
                name: name.clone(),
                params: init.unwrap_or_default(),
                return_name: None,
                return_type: name,
                methods,
                primary_method: Some(primary),
            }
        })
}

proptest! {
    #[test]
    fn function_signatures_round_trip(spec in function_spec()) {
        let text = render_signature(&spec);
        prop_assert_eq!(parse_signature(&text).unwrap(), spec);
    }

    #[test]
    fn class_signatures_round_trip(spec in class_spec()) {
        let text = render_signature(&spec);
        prop_assert_eq!(parse_signature(&text).unwrap(), spec);
    }

    #[test]
    fn parse_never_panics(text in "(Function|Class): [ -~]{0,40}") {
        let _ = parse_signature(&text);
    }
}

#[test]
fn planned_tests_get_their_ground_truth_structure() {
    let bank = Bank::get();
    for problem in bank.problems() {
        let sig = parse_signature(problem.signature).unwrap();
        for seed in 0..8 {
            for (k, t) in bank.tests_for(problem, seed).iter().enumerate() {
                let case = validate_test_structure(&format!("x/t{k:02}"), &t.source, &sig);
                let want = match t.kind {
                    TestKind::Sound | TestKind::WrongExpected => None,
                    TestKind::AssignmentOutsideAssert => Some(InvalidReason::AssignmentOutsideAssert),
                    TestKind::MultipleAsserts => Some(InvalidReason::MultipleAsserts),
                };
                assert_eq!(case.invalid_reason, want, "{} seed {seed}:\n{}", problem.key, t.source);
                assert_eq!(case.structure == TestStructure::Invalid, want.is_some());
            }
        }
    }
}

#[test]
fn every_bank_variant_is_an_acceptable_candidate() {
    let bank = Bank::get();
    for problem in bank.problems() {
        let sig = parse_signature(problem.signature).unwrap();
        for seed in 0..4 {
            for (source, _) in bank.solutions_for(problem, seed) {
                assert_eq!(check_candidate(&source, &sig), Ok(()), "{}", problem.key);
            }
        }
    }
}

#[test]
fn mock_synthesis_yields_full_bundles() {
    let concept = Concept {
        id: "hash-maps".into(),
        text: "Hash Maps".into(),
        description: "Key-value lookup tables".into(),
        difficulty: Some(3),
        relevance: Some(5),
        source_ref: String::new(),
    };
    let config = SynthesisConfig::default();
    let (tasks, skips) = synthesize_concept(&concept, &config, &MockProvider::new(), 3);
    assert!(skips.is_empty(), "{skips:?}");
    assert_eq!(tasks.len(), config.instructions_per_concept);
    for t in &tasks {
        assert_eq!(t.solutions.len(), config.solutions_per_instruction);
        assert_eq!(t.tests.len(), config.test_suites * config.tests_per_suite);
        assert_eq!(t.tests.iter().filter(|c| c.structure == TestStructure::Invalid).count(), 2);
        assert!(t.solutions.iter().all(|s| Bank::get().identify(&s.source).is_some()));
    }
    let (again, _) = synthesize_concept(&concept, &config, &MockProvider::new(), 3);
    assert_eq!(again, tasks);
}
