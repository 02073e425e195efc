use cotforge::bank::{Bank, VariantKind};
use cotforge::trace::{check_cot_consistency, normalize_value, parse_trace, render_events, sanitize_trace};
use cotforge::TraceEventKind;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FIXTURE: &str = include_str!("fixtures/parallel_sort.raw.txt");

fn value() -> impl Strategy<Value = String> {
    prop_oneof![
        (-999i64..999).prop_map(|n| n.to_string()),
        "[a-z]{0,6}".prop_map(|s| format!("'{s}'")),
        prop::collection::vec(-50i64..50, 0..6).prop_map(|v| format!("{v:?}")),
        Just("None".to_string()),
        Just("<Thread(Thread-1, started 1407)>".to_string()),
        // value spilling onto a second line
        prop::collection::vec(0i64..9, 1..4).prop_map(|v| format!("[{},\n {}]", v[0], v.len())),
    ]
}

fn stamp() -> impl Strategy<Value = String> {
    prop_oneof![
        Just(String::new()),
        (0u32..24, 0u32..60, 0u32..60, 0u32..1_000_000).prop_map(|(h, m, s, us)| format!("{h:02}:{m:02}:{s:02}.{us:06} ")),
    ]
}

fn raw_line() -> impl Strategy<Value = String> {
    let pad = "[ ]{1,9}";
    let colour = prop::sample::select(vec!["", "\x1b[32m", "\x1b[2m", "\x1b[0m"]);
    let name = "[a-z_][a-z0-9_]{0,5}";
    prop_oneof![
        (stamp(), prop::sample::select(vec!["call", "line", "return", "exception"]), pad, 1u32..200, "[a-z(): =+]{0,20}")
            .prop_map(|(t, k, p, n, src)| format!("{t}{k}{p}{n} {src}")),
        (prop::sample::select(vec!["Starting var:..", "New var:.......", "Modified var:.."]), name, value())
            .prop_map(|(m, n, v)| format!("{m} {n} = {v}")),
        value().prop_map(|v| format!("Return value:.. {v}")),
        Just("Source path:... /tmp/x/solution.py".to_string()),
        Just("Elapsed time: 00:00:00.000164".to_string()),
        "[A-Za-z ]{0,12}",
    ]
    .prop_flat_map(move |l| (colour.clone(), Just(l)).prop_map(|(c, l)| format!("{c}{l}")))
}

fn raw_trace() -> impl Strategy<Value = String> {
    prop::collection::vec(raw_line(), 0..25).prop_map(|ls| ls.join("\n"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn sanitize_is_idempotent(raw in raw_trace()) {
        let once = sanitize_trace(&raw);
        prop_assert_eq!(sanitize_trace(&once), once.clone());
        prop_assert!(!once.contains('\x1b'));
    }

    #[test]
    fn render_then_parse_is_a_fixpoint(raw in raw_trace()) {
        if let Ok(parsed) = parse_trace(&sanitize_trace(&raw)) {
            let again = parse_trace(&render_events(&parsed.events)).map(|p| p.events).unwrap_or_default();
            prop_assert_eq!(again, parsed.events.clone());
            for (i, e) in parsed.events.iter().enumerate() {
                prop_assert_eq!(e.seq, i);
                prop_assert!(e.is_well_formed());
            }
        }
    }

    #[test]
    fn consistency_ratio_is_matched_over_checked(claims in prop::collection::vec(("[a-c]", -3i64..3), 0..8)) {
        let clean = "Starting var: a = 1\nNew var: b = 2\nModified var: b = -1\ncall 1 def f(a):\n";
        let events = parse_trace(clean).unwrap().events;
        let cot: String = claims.iter().map(|(n, v)| format!("so {n} = {v}, ")).collect();
        let r = check_cot_consistency(&cot, &events);
        prop_assert!(r.mentions_matched <= r.mentions_checked);
        prop_assert_eq!(r.mentions_checked - r.mentions_matched, r.violations.len());
        let traced = claims.iter().filter(|(n, _)| n != "c").count();
        prop_assert_eq!(r.mentions_checked, traced);
        if r.mentions_checked == 0 {
            prop_assert_eq!(r.ratio, 1.0);
        } else {
            prop_assert!((r.ratio - r.mentions_matched as f64 / r.mentions_checked as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn fixture_parses_to_one_call_and_sorted_return() {
    let clean = sanitize_trace(FIXTURE);
    assert!(!clean.contains('\x1b'));
    assert!(!clean.lines().any(|l| l.len() > 15 && l.as_bytes()[2] == b':' && l.as_bytes()[8] == b'.'));
    let events = parse_trace(&clean).unwrap().events;
    let calls = events.iter().filter(|e| e.kind == TraceEventKind::Call).count();
    let rets: Vec<&str> = events
        .iter()
        .filter(|e| e.kind == TraceEventKind::ReturnValue)
        .filter_map(|e| e.value_repr.as_deref())
        .collect();
    assert_eq!(calls, 1);
    assert_eq!(rets, ["[-2, -1, 0, 3]"]);
    let chunk = events
        .iter()
        .find(|e| e.kind == TraceEventKind::VarNew && e.var_name.as_deref() == Some("chunk_size"))
        .unwrap();
    assert_eq!(chunk.value_repr.as_deref(), Some("2"));
    assert!(events
        .iter()
        .any(|e| e.kind.is_var() && e.var_name.as_deref() == Some("chunks") && e.value_repr.as_deref() == Some("[[-2, 3], [-1, 0]]")));
    assert_eq!(parse_trace(&render_events(&events)).unwrap().events, events);
}

#[test]
fn coloured_fixture_sanitizes_identically() {
    let coloured: String = FIXTURE
        .lines()
        .map(|l| format!("\x1b[2m{l}\x1b[0m   "))
        .collect::<Vec<_>>()
        .join("\n");
    assert_eq!(sanitize_trace(&coloured), sanitize_trace(FIXTURE));
}

#[test]
fn object_addresses_do_not_matter() {
    assert_eq!(
        normalize_value("<Thread(Thread-1, started 140) at 0x7f3a2b>"),
        normalize_value("<Thread(Thread-1,started 140)>")
    );
    assert_eq!(normalize_value("[\"a\", 'b']"), "['a','b']");
}

#[test]
fn bank_traces_satisfy_event_invariants() {
    let bank = Bank::get();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for problem in bank.problems() {
        for k in 0..4 {
            let v = VariantKind::Correct(k);
            let src = problem.source(v);
            for _ in 0..10 {
                let args = (problem.random_input)(&mut rng);
                let (result, raw) = problem.trace(v, &src, &args);
                let events = parse_trace(&sanitize_trace(&raw)).unwrap().events;
                assert_eq!(events.iter().filter(|e| e.kind == TraceEventKind::Call).count(), 1);
                let ret: Vec<_> = events.iter().filter(|e| e.kind == TraceEventKind::ReturnValue).collect();
                if let Ok(out) = result {
                    assert_eq!(ret.len(), 1, "{}", problem.key);
                    assert_eq!(
                        normalize_value(ret[0].value_repr.as_deref().unwrap()),
                        normalize_value(&out.repr())
                    );
                }
                assert_eq!(parse_trace(&render_events(&events)).unwrap().events, events);
            }
        }
    }
}

#[test]
fn fixture_mentions_are_checked() {
    let events = parse_trace(&sanitize_trace(FIXTURE)).unwrap().events;
    let ok = check_cot_consistency("First `chunk_size = 2`, then chunks = [[-2, 3], [-1, 0]].", &events);
    assert_eq!((ok.mentions_checked, ok.mentions_matched), (2, 2));
    let bad = check_cot_consistency("so chunk_size = 3 and unseen = 9", &events);
    assert_eq!((bad.mentions_checked, bad.ratio), (1, 0.0));
    assert_eq!(bad.violations[0].trace_values, ["2"]);
}
