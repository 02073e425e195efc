//! The five bank problems: sources, reference semantics, traced reference
//! executions and test-input generators.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::recorder::{Recorder, TraceFault};
use super::{Eval, Fault, Problem};
use crate::pyvalue::PyValue;

fn int(n: i64) -> PyValue {
    PyValue::Int(n)
}

fn int_list(v: &[i64]) -> PyValue {
    PyValue::list(v.iter().copied().map(PyValue::Int))
}

fn type_error(what: &str) -> Fault {
    Fault::Runtime(format!("TypeError: {what}"))
}

fn ints(v: &PyValue) -> Result<Vec<i64>, Fault> {
    v.as_seq()
        .ok_or_else(|| type_error("expected a list of integers"))?
        .iter()
        .map(|x| x.as_int().ok_or_else(|| type_error("expected an integer")))
        .collect()
}

fn pairs(v: &PyValue) -> Result<Vec<(i64, i64)>, Fault> {
    v.as_seq()
        .ok_or_else(|| type_error("expected a list of intervals"))?
        .iter()
        .map(|iv| {
            let e = ints(iv)?;
            match e.as_slice() {
                [a, b] => Ok((*a, *b)),
                _ => Err(Fault::Runtime(
                    "ValueError: not enough values to unpack".into(),
                )),
            }
        })
        .collect()
}

fn strings(v: &PyValue) -> Result<Vec<String>, Fault> {
    v.as_seq()
        .ok_or_else(|| type_error("expected a list of strings"))?
        .iter()
        .map(|x| {
            x.as_str()
                .map(str::to_string)
                .ok_or_else(|| type_error("expected a string"))
        })
        .collect()
}

fn text(v: &PyValue) -> Result<String, Fault> {
    v.as_str()
        .map(str::to_string)
        .ok_or_else(|| type_error("expected a string"))
}

fn fault(f: TraceFault) -> Fault {
    Fault::Runtime(f.0)
}

const COMMENTS: [&str; 4] = [
    "",
    "    # single pass over the input",
    "    # straightforward iterative version",
    "    # all state lives in local variables",
];

// ---------------------------------------------------------------- running sum

fn rs_ref(args: &[PyValue]) -> Eval {
    let nums = ints(&args[0])?;
    let mut total = 0i64;
    Ok(int_list(
        &nums
            .iter()
            .map(|x| {
                total += x;
                total
            })
            .collect::<Vec<_>>(),
    ))
}

fn rs_bug_exclusive(args: &[PyValue]) -> Eval {
    let nums = ints(&args[0])?;
    let mut total = 0i64;
    let mut out = Vec::new();
    for x in nums {
        out.push(total);
        total += x;
    }
    Ok(int_list(&out))
}

fn rs_bug_first(args: &[PyValue]) -> Eval {
    let nums = ints(&args[0])?;
    if nums.is_empty() {
        return Err(Fault::Runtime("IndexError: list index out of range".into()));
    }
    rs_ref(args)
}

fn rs_trace(rec: &mut Recorder, args: &[PyValue]) -> Result<PyValue, TraceFault> {
    let nums = ints(&args[0]).map_err(|e| TraceFault(e.to_string()))?;
    rec.line("@result@ = []")?;
    let mut result = Vec::new();
    rec.set("@result@", &int_list(&result));
    rec.line("@total@ = 0")?;
    let mut total = 0;
    rec.set("@total@", &int(total));
    for x in nums {
        rec.line("for @x@ in nums:")?;
        rec.set("@x@", &int(x));
        rec.line("@total@ += @x@")?;
        total += x;
        rec.set("@total@", &int(total));
        rec.line("@result@.append(@total@)")?;
        result.push(total);
        rec.set("@result@", &int_list(&result));
    }
    rec.line("for @x@ in nums:")?;
    let value = int_list(&result);
    rec.ret("return @result@", &value)?;
    Ok(value)
}

fn rs_random(rng: &mut ChaCha8Rng) -> Vec<PyValue> {
    let n = rng.gen_range(0..=6);
    vec![int_list(
        &(0..n).map(|_| rng.gen_range(-9..=9)).collect::<Vec<_>>(),
    )]
}

fn rs_core() -> Vec<Vec<PyValue>> {
    vec![
        vec![int_list(&[1, 2, 3, 4])],
        vec![int_list(&[])],
        vec![int_list(&[5])],
        vec![int_list(&[-1, 2, -3])],
        vec![int_list(&[0, 0, 1])],
    ]
}

fn rs_perturb(v: &PyValue) -> PyValue {
    let mut items = v.as_seq().map(<[PyValue]>::to_vec).unwrap_or_default();
    items.push(int(0));
    PyValue::List(items)
}

// ---------------------------------------------------------- interval merging

fn iv_value(v: &[(i64, i64)]) -> PyValue {
    PyValue::list(v.iter().map(|(a, b)| int_list(&[*a, *b])))
}

fn iv_merge(mut items: Vec<(i64, i64)>, sort: bool, touching: bool) -> Vec<(i64, i64)> {
    if sort {
        items.sort();
    }
    let mut merged: Vec<(i64, i64)> = Vec::new();
    for (start, end) in items {
        match merged.last_mut() {
            Some(last) if start < last.1 || (touching && start == last.1) => {
                last.1 = last.1.max(end);
            }
            _ => merged.push((start, end)),
        }
    }
    merged
}

fn iv_ref(args: &[PyValue]) -> Eval {
    Ok(iv_value(&iv_merge(pairs(&args[0])?, true, true)))
}

fn iv_bug_strict(args: &[PyValue]) -> Eval {
    Ok(iv_value(&iv_merge(pairs(&args[0])?, true, false)))
}

fn iv_bug_unsorted(args: &[PyValue]) -> Eval {
    Ok(iv_value(&iv_merge(pairs(&args[0])?, false, true)))
}

fn iv_trace(rec: &mut Recorder, args: &[PyValue]) -> Result<PyValue, TraceFault> {
    let mut ordered = pairs(&args[0]).map_err(|e| TraceFault(e.to_string()))?;
    rec.line("@ordered@ = sorted(intervals)")?;
    ordered.sort();
    rec.set("@ordered@", &iv_value(&ordered));
    rec.line("@merged@ = []")?;
    let mut merged: Vec<(i64, i64)> = Vec::new();
    rec.set("@merged@", &iv_value(&merged));
    for &(start, end) in &ordered {
        rec.line("for @start@, @end@ in @ordered@:")?;
        rec.set("@start@", &int(start));
        rec.set("@end@", &int(end));
        rec.line("if @merged@ and @start@ <= @merged@[-1][1]:")?;
        match merged.last_mut() {
            Some(last) if start <= last.1 => {
                rec.line("@merged@[-1][1] = max(@merged@[-1][1], @end@)")?;
                last.1 = last.1.max(end);
            }
            _ => {
                rec.line("@merged@.append([@start@, @end@])")?;
                merged.push((start, end));
            }
        }
        rec.set("@merged@", &iv_value(&merged));
    }
    rec.line("for @start@, @end@ in @ordered@:")?;
    let value = iv_value(&merged);
    rec.ret("return @merged@", &value)?;
    Ok(value)
}

fn iv_random(rng: &mut ChaCha8Rng) -> Vec<PyValue> {
    let n = rng.gen_range(0..=4);
    let items: Vec<(i64, i64)> = (0..n)
        .map(|_| {
            let s = rng.gen_range(0..=9);
            (s, s + rng.gen_range(0..=3))
        })
        .collect();
    vec![iv_value(&items)]
}

fn iv_core() -> Vec<Vec<PyValue>> {
    vec![
        vec![iv_value(&[(1, 3), (2, 6), (8, 10)])],
        vec![iv_value(&[(1, 2), (2, 3)])],
        vec![iv_value(&[(5, 6), (1, 2)])],
        vec![iv_value(&[])],
        vec![iv_value(&[(1, 4), (0, 0)])],
    ]
}

fn iv_perturb(v: &PyValue) -> PyValue {
    let mut items = v.as_seq().map(<[PyValue]>::to_vec).unwrap_or_default();
    items.push(int_list(&[0, 0]));
    PyValue::List(items)
}

// ----------------------------------------------------------------------- gcd

/// Remainder with the sign of the divisor.
fn py_mod(a: i64, b: i64) -> i64 {
    let r = a % b;
    if r != 0 && ((r < 0) != (b < 0)) {
        r + b
    } else {
        r
    }
}

fn euclid(mut x: i64, mut y: i64) -> i64 {
    while y != 0 {
        let r = py_mod(x, y);
        x = y;
        y = r;
    }
    x
}

fn two_ints(args: &[PyValue]) -> Result<(i64, i64), Fault> {
    let a = args[0].as_int().ok_or_else(|| type_error("expected an integer"))?;
    let b = args[1].as_int().ok_or_else(|| type_error("expected an integer"))?;
    Ok((a, b))
}

fn gcd_ref(args: &[PyValue]) -> Eval {
    let (a, b) = two_ints(args)?;
    Ok(int(euclid(a.abs(), b.abs())))
}

fn gcd_bug_signed(args: &[PyValue]) -> Eval {
    let (a, b) = two_ints(args)?;
    Ok(int(euclid(a, b)))
}

fn gcd_bug_subtract(args: &[PyValue]) -> Eval {
    let (a, b) = two_ints(args)?;
    // x -= 0 or y -= 0 never terminates
    if (a == 0) != (b == 0) {
        return Err(Fault::Timeout);
    }
    Ok(int(euclid(a.abs(), b.abs())))
}

fn gcd_trace(rec: &mut Recorder, args: &[PyValue]) -> Result<PyValue, TraceFault> {
    let (a, b) = two_ints(args).map_err(|e| TraceFault(e.to_string()))?;
    rec.line("@x@, @y@ = abs(a), abs(b)")?;
    let (mut x, mut y) = (a.abs(), b.abs());
    rec.set("@x@", &int(x));
    rec.set("@y@", &int(y));
    loop {
        rec.line("while @y@:")?;
        if y == 0 {
            break;
        }
        rec.line("@x@, @y@ = @y@, @x@ % @y@")?;
        let r = py_mod(x, y);
        x = y;
        y = r;
        rec.set("@x@", &int(x));
        rec.set("@y@", &int(y));
    }
    let value = int(x);
    rec.ret("return @x@", &value)?;
    Ok(value)
}

fn gcd_random(rng: &mut ChaCha8Rng) -> Vec<PyValue> {
    vec![int(rng.gen_range(-30..=30)), int(rng.gen_range(-30..=30))]
}

fn gcd_core() -> Vec<Vec<PyValue>> {
    [(12, 18), (0, 5), (-12, 18), (12, -18), (0, 0), (7, 13)]
        .iter()
        .map(|&(a, b)| vec![int(a), int(b)])
        .collect()
}

fn gcd_perturb(v: &PyValue) -> PyValue {
    int(v.as_int().unwrap_or(0) + 1)
}

// ------------------------------------------------------------ bracket balance

fn opener(c: char) -> Option<char> {
    match c {
        ')' => Some('('),
        ']' => Some('['),
        '}' => Some('{'),
        _ => None,
    }
}

fn balanced(s: &str, check_leftover: bool) -> bool {
    let mut stack = Vec::new();
    for c in s.chars() {
        if "([{".contains(c) {
            stack.push(c);
        } else if let Some(o) = opener(c) {
            if stack.pop() != Some(o) {
                return false;
            }
        }
    }
    !check_leftover || stack.is_empty()
}

fn br_ref(args: &[PyValue]) -> Eval {
    Ok(PyValue::Bool(balanced(&text(&args[0])?, true)))
}

fn br_bug_leftover(args: &[PyValue]) -> Eval {
    Ok(PyValue::Bool(balanced(&text(&args[0])?, false)))
}

fn br_bug_depth(args: &[PyValue]) -> Eval {
    let s = text(&args[0])?;
    let mut depth = 0i64;
    for c in s.chars() {
        if "([{".contains(c) {
            depth += 1;
        } else if ")]}".contains(c) {
            depth -= 1;
            if depth < 0 {
                return Ok(PyValue::Bool(false));
            }
        }
    }
    Ok(PyValue::Bool(depth == 0))
}

fn br_pairs() -> PyValue {
    PyValue::Dict(
        [(")", "("), ("]", "["), ("}", "{")]
            .iter()
            .map(|(k, v)| (PyValue::str(k), PyValue::str(v)))
            .collect(),
    )
}

fn char_list(v: &[char]) -> PyValue {
    PyValue::list(v.iter().map(|c| PyValue::Str(c.to_string())))
}

fn br_trace(rec: &mut Recorder, args: &[PyValue]) -> Result<PyValue, TraceFault> {
    let s = text(&args[0]).map_err(|e| TraceFault(e.to_string()))?;
    rec.line("@pairs@ = {')': '(', ']': '[', '}': '{'}")?;
    rec.set("@pairs@", &br_pairs());
    rec.line("@stack@ = []")?;
    let mut stack: Vec<char> = Vec::new();
    rec.set("@stack@", &char_list(&stack));
    for c in s.chars() {
        rec.line("for @ch@ in s:")?;
        rec.set("@ch@", &PyValue::Str(c.to_string()));
        rec.line("if @ch@ in '([{':")?;
        if "([{".contains(c) {
            rec.line("@stack@.append(@ch@)")?;
            stack.push(c);
            rec.set("@stack@", &char_list(&stack));
            continue;
        }
        rec.line("elif @ch@ in @pairs@:")?;
        if let Some(o) = opener(c) {
            rec.line("if not @stack@ or @stack@.pop() != @pairs@[@ch@]:")?;
            let top = stack.pop();
            rec.set("@stack@", &char_list(&stack));
            if top != Some(o) {
                let value = PyValue::Bool(false);
                rec.ret("return False", &value)?;
                return Ok(value);
            }
        }
    }
    rec.line("for @ch@ in s:")?;
    let value = PyValue::Bool(stack.is_empty());
    rec.ret("return not @stack@", &value)?;
    Ok(value)
}

fn br_random(rng: &mut ChaCha8Rng) -> Vec<PyValue> {
    let alphabet: Vec<char> = "()[]{}".chars().collect();
    let n = rng.gen_range(0..=8);
    let s: String = (0..n).map(|_| *alphabet.choose(rng).unwrap()).collect();
    vec![PyValue::Str(s)]
}

fn br_core() -> Vec<Vec<PyValue>> {
    ["()[]{}", "(]", "((", "([)]", "", "{[()]}"]
        .iter()
        .map(|s| vec![PyValue::str(s)])
        .collect()
}

fn br_perturb(v: &PyValue) -> PyValue {
    PyValue::Bool(!v.truthy())
}

// --------------------------------------------------------- word frequencies

fn freq(words: &[String], fold: bool, count: bool) -> PyValue {
    let mut table: Vec<(String, i64)> = Vec::new();
    for w in words {
        let key = if fold { w.to_lowercase() } else { w.clone() };
        match table.iter_mut().find(|(k, _)| *k == key) {
            Some((_, n)) => *n = if count { *n + 1 } else { 1 },
            None => table.push((key, 1)),
        }
    }
    PyValue::Dict(
        table
            .into_iter()
            .map(|(k, n)| (PyValue::Str(k), int(n)))
            .collect(),
    )
}

fn fq_ref(args: &[PyValue]) -> Eval {
    Ok(freq(&strings(&args[0])?, false, true))
}

fn fq_bug_fold(args: &[PyValue]) -> Eval {
    Ok(freq(&strings(&args[0])?, true, true))
}

fn fq_bug_reset(args: &[PyValue]) -> Eval {
    Ok(freq(&strings(&args[0])?, false, false))
}

fn fq_trace(rec: &mut Recorder, args: &[PyValue]) -> Result<PyValue, TraceFault> {
    let words = strings(&args[0]).map_err(|e| TraceFault(e.to_string()))?;
    rec.line("@counts@ = {}")?;
    rec.set("@counts@", &PyValue::Dict(Vec::new()));
    for (i, w) in words.iter().enumerate() {
        rec.line("for @w@ in words:")?;
        rec.set("@w@", &PyValue::Str(w.clone()));
        rec.line("@counts@[@w@] = @counts@.get(@w@, 0) + 1")?;
        rec.set("@counts@", &freq(&words[..=i], false, true));
    }
    rec.line("for @w@ in words:")?;
    let value = freq(&words, false, true);
    rec.ret("return @counts@", &value)?;
    Ok(value)
}

const WORDS: [&str; 6] = ["a", "b", "Cat", "cat", "dog", "Dog"];

fn fq_random(rng: &mut ChaCha8Rng) -> Vec<PyValue> {
    let n = rng.gen_range(0..=6);
    vec![PyValue::list(
        (0..n).map(|_| PyValue::str(WORDS.choose(rng).unwrap())),
    )]
}

fn fq_core() -> Vec<Vec<PyValue>> {
    let lists: [&[&str]; 5] = [
        &["a", "b", "a"],
        &["Cat", "cat"],
        &[],
        &["dog"],
        &["Dog", "dog", "Dog"],
    ];
    lists
        .iter()
        .map(|l| vec![PyValue::list(l.iter().map(|w| PyValue::str(w)))])
        .collect()
}

fn fq_perturb(v: &PyValue) -> PyValue {
    let mut items = match v {
        PyValue::Dict(items) => items.clone(),
        _ => Vec::new(),
    };
    items.push((PyValue::str("zzz"), int(1)));
    PyValue::Dict(items)
}

pub(super) fn trace_with(problem: &Problem, rec: &mut Recorder, args: &[PyValue]) -> Result<PyValue, Fault> {
    (problem.tracer)(rec, args).map_err(fault)
}

pub static PROBLEMS: [Problem; 5] = [
    Problem {
        key: "running_sum",
        phrasings: [
            "Write a function solution(nums) that returns the running sum of a list of integers, where element i of the result is the sum of nums[0] through nums[i].",
            "Given a list of integers, compute the list of prefix totals so that each position holds the sum of all elements up to and including it; an empty list yields an empty list.",
        ],
        keywords: &["running sum", "prefix total", "cumulative"],
        signature: "Function: solution(nums: list[int]) -> list[int]",
        params: &["nums"],
        skeleton: "def solution(nums: list[int]) -> list[int]:
    @result@ = []
    @total@ = 0
    for @x@ in nums:
        @total@ += @x@
        @result@.append(@total@)
    return @result@
",
        name_sets: [
            &[("result", "result"), ("total", "total"), ("x", "x")],
            &[("result", "out"), ("total", "acc"), ("x", "value")],
            &[("result", "sums"), ("total", "running"), ("x", "num")],
            &[("result", "prefix"), ("total", "s"), ("x", "item")],
        ],
        comments: COMMENTS,
        buggy: [
            "def solution(nums: list[int]) -> list[int]:
    result = []
    total = 0
    for x in nums:
        result.append(total)
        total += x
    return result
",
            "def solution(nums: list[int]) -> list[int]:
    result = [nums[0]]
    for i in range(1, len(nums)):
        result.append(result[-1] + nums[i])
    return result
",
        ],
        scenarios: &[
            "Test basic functionality",
            "Test empty list",
            "Test single element",
            "Test negative numbers",
            "Test zeros",
        ],
        rating: "easy",
        trivial: true,
        reference: rs_ref,
        bugs: [rs_bug_exclusive, rs_bug_first],
        tracer: rs_trace,
        core_inputs: rs_core,
        random_input: rs_random,
        perturb: rs_perturb,
    },
    Problem {
        key: "merge_intervals",
        phrasings: [
            "Write a function solution(intervals) that merges all overlapping or touching closed intervals given as [start, end] pairs and returns the merged intervals sorted by start.",
            "Given an unsorted list of [start, end] intervals, merge every group of intervals that overlap or share an endpoint and return the merged intervals in ascending order.",
        ],
        keywords: &["interval"],
        signature: "Function: solution(intervals: list[list[int]]) -> list[list[int]]",
        params: &["intervals"],
        skeleton: "def solution(intervals: list[list[int]]) -> list[list[int]]:
    @ordered@ = sorted(intervals)
    @merged@ = []
    for @start@, @end@ in @ordered@:
        if @merged@ and @start@ <= @merged@[-1][1]:
            @merged@[-1][1] = max(@merged@[-1][1], @end@)
        else:
            @merged@.append([@start@, @end@])
    return @merged@
",
        name_sets: [
            &[("ordered", "ordered"), ("merged", "merged"), ("start", "start"), ("end", "end")],
            &[("ordered", "by_start"), ("merged", "result"), ("start", "lo"), ("end", "hi")],
            &[("ordered", "spans"), ("merged", "out"), ("start", "left"), ("end", "right")],
            &[("ordered", "sorted_iv"), ("merged", "acc"), ("start", "a"), ("end", "b")],
        ],
        comments: COMMENTS,
        buggy: [
            "def solution(intervals: list[list[int]]) -> list[list[int]]:
    ordered = sorted(intervals)
    merged = []
    for start, end in ordered:
        if merged and start < merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return merged
",
            "def solution(intervals: list[list[int]]) -> list[list[int]]:
    merged = []
    for start, end in intervals:
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return merged
",
        ],
        scenarios: &[
            "Test basic functionality",
            "Test touching intervals",
            "Test unsorted input",
            "Test empty input",
            "Test nested intervals",
        ],
        rating: "hard",
        trivial: false,
        reference: iv_ref,
        bugs: [iv_bug_strict, iv_bug_unsorted],
        tracer: iv_trace,
        core_inputs: iv_core,
        random_input: iv_random,
        perturb: iv_perturb,
    },
    Problem {
        key: "gcd",
        phrasings: [
            "Write a function solution(a, b) that returns the greatest common divisor of two integers, which may be negative or zero; the result is always non-negative.",
            "Compute the greatest common divisor of two possibly negative integers a and b with Euclid's algorithm, returning 0 when both are zero.",
        ],
        keywords: &["greatest common divisor", "gcd"],
        signature: "Function: solution(a: int, b: int) -> int",
        params: &["a", "b"],
        skeleton: "def solution(a: int, b: int) -> int:
    @x@, @y@ = abs(a), abs(b)
    while @y@:
        @x@, @y@ = @y@, @x@ % @y@
    return @x@
",
        name_sets: [
            &[("x", "x"), ("y", "y")],
            &[("x", "m"), ("y", "n")],
            &[("x", "big"), ("y", "small")],
            &[("x", "p"), ("y", "q")],
        ],
        comments: COMMENTS,
        buggy: [
            "def solution(a: int, b: int) -> int:
    x, y = a, b
    while y:
        x, y = y, x % y
    return x
",
            "def solution(a: int, b: int) -> int:
    x, y = abs(a), abs(b)
    while x != y:
        if x > y:
            x -= y
        else:
            y -= x
    return x
",
        ],
        scenarios: &[
            "Test basic functionality",
            "Test zero argument",
            "Test negative arguments",
            "Test coprime numbers",
            "Test both zero",
        ],
        rating: "medium",
        trivial: false,
        reference: gcd_ref,
        bugs: [gcd_bug_signed, gcd_bug_subtract],
        tracer: gcd_trace,
        core_inputs: gcd_core,
        random_input: gcd_random,
        perturb: gcd_perturb,
    },
    Problem {
        key: "balanced_brackets",
        phrasings: [
            "Write a function solution(s) that reports whether every bracket in the string s is balanced and properly nested, considering (), [] and {}.",
            "Given a string of brackets, decide whether the brackets are balanced: every opener must be closed by the matching closer in the correct order.",
        ],
        keywords: &["bracket", "parenthes"],
        signature: "Function: solution(s: str) -> bool",
        params: &["s"],
        skeleton: "def solution(s: str) -> bool:
    @pairs@ = {')': '(', ']': '[', '}': '{'}
    @stack@ = []
    for @ch@ in s:
        if @ch@ in '([{':
            @stack@.append(@ch@)
        elif @ch@ in @pairs@:
            if not @stack@ or @stack@.pop() != @pairs@[@ch@]:
                return False
    return not @stack@
",
        name_sets: [
            &[("pairs", "pairs"), ("stack", "stack"), ("ch", "ch")],
            &[("pairs", "closers"), ("stack", "pending"), ("ch", "c")],
            &[("pairs", "partner"), ("stack", "opened"), ("ch", "symbol")],
            &[("pairs", "mapping"), ("stack", "seen"), ("ch", "token")],
        ],
        comments: COMMENTS,
        buggy: [
            "def solution(s: str) -> bool:
    pairs = {')': '(', ']': '[', '}': '{'}
    stack = []
    for ch in s:
        if ch in '([{':
            stack.append(ch)
        elif ch in pairs:
            if not stack or stack.pop() != pairs[ch]:
                return False
    return True
",
            "def solution(s: str) -> bool:
    depth = 0
    for ch in s:
        if ch in '([{':
            depth += 1
        elif ch in ')]}':
            depth -= 1
            if depth < 0:
                return False
    return depth == 0
",
        ],
        scenarios: &[
            "Test basic functionality",
            "Test mismatched pair",
            "Test unclosed openers",
            "Test interleaved brackets",
            "Test empty string",
        ],
        rating: "medium",
        trivial: false,
        reference: br_ref,
        bugs: [br_bug_leftover, br_bug_depth],
        tracer: br_trace,
        core_inputs: br_core,
        random_input: br_random,
        perturb: br_perturb,
    },
    Problem {
        key: "word_frequency",
        phrasings: [
            "Write a function solution(words) that counts how many times each word occurs in a list, treating words case-sensitively, and returns a dict in first-occurrence order.",
            "Given a list of words, build a frequency table mapping each distinct word, compared case-sensitively, to its number of occurrences.",
        ],
        keywords: &["frequency", "occurrence", "how many times"],
        signature: "Function: solution(words: list[str]) -> dict[str, int]",
        params: &["words"],
        skeleton: "def solution(words: list[str]) -> dict[str, int]:
    @counts@ = {}
    for @w@ in words:
        @counts@[@w@] = @counts@.get(@w@, 0) + 1
    return @counts@
",
        name_sets: [
            &[("counts", "counts"), ("w", "w")],
            &[("counts", "freq"), ("w", "word")],
            &[("counts", "tally"), ("w", "item")],
            &[("counts", "table"), ("w", "token")],
        ],
        comments: COMMENTS,
        buggy: [
            "def solution(words: list[str]) -> dict[str, int]:
    counts = {}
    for w in words:
        counts[w.lower()] = counts.get(w.lower(), 0) + 1
    return counts
",
            "def solution(words: list[str]) -> dict[str, int]:
    counts = {}
    for w in words:
        counts[w] = 1
    return counts
",
        ],
        scenarios: &[
            "Test basic functionality",
            "Test case sensitivity",
            "Test empty list",
            "Test single word",
            "Test repeated words",
        ],
        rating: "easy",
        trivial: true,
        reference: fq_ref,
        bugs: [fq_bug_fold, fq_bug_reset],
        tracer: fq_trace,
        core_inputs: fq_core,
        random_input: fq_random,
        perturb: fq_perturb,
    },
];
