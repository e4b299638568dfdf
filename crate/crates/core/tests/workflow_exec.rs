use std::sync::Arc;

use groundflow_core::fixtures::bundled_corpus;
use groundflow_core::lecture::ncen_registry;
use groundflow_core::workflow::{
    execute, ExecError, ExecLimits, NcenBindings, ResourceKind, Value, WorkflowProgram, NCEN_API_NAMES,
};
use groundflow_core::NcenApi;
use proptest::prelude::*;

fn api() -> NcenApi {
    NcenApi::new(Arc::new(bundled_corpus()))
}

fn run(api: &NcenApi, src: &str) -> Result<groundflow_core::ExecResult, groundflow_core::workflow::ExecFailure> {
    let program = WorkflowProgram::parse(src).unwrap();
    assert_eq!(program.validate(&ncen_registry()), vec![], "{src}");
    execute(&program, &NcenBindings::new(api), ExecLimits::default())
}

#[test]
fn easy_custodian_workflow() {
    let api = api();
    let src = r#"
report = get_report("PRECIOUS METALS FUND")
block = fetch_block(report, "PRECIOUS METALS FUND")
answer = extract_entity(block, "custodian")
"#;
    let r = run(&api, src).unwrap();
    assert_eq!(r.answer, Value::strings(["U.S. BANK NATIONAL ASSOCIATION"]));
    let names: Vec<&str> = r.api_call_trace.iter().map(|t| t.name.as_str()).collect();
    assert_eq!(names, ["get_report", "fetch_block", "extract_entity"]);
}

#[test]
fn intermediate_ratio_workflow() {
    let api = api();
    let src = r#"
fund = "PROFUND VP INTERNET"
block = fetch_block(get_report(fund), fund)
answer = round(extract_value(block, "gross commission") / extract_value(block, "fund net assets"), 4)
"#;
    assert_eq!(run(&api, src).unwrap().answer, Value::Number(0.0001));
}

#[test]
fn hard_aggregation_workflow() {
    let api = api();
    let src = r#"
funds = ["MASSMUTUAL RETIRESMART BY JPMORGAN 2035 FUND", "LORD ABBETT INTERNATIONAL GROWTH FUND", "NEBRASKA TAX-FREE INCOME FUND"]
total = 0
for f in funds {
    total = total + extract_value(fetch_block(get_report(f), f), "gross commission")
}
answer = round(total, 2)
"#;
    assert_eq!(run(&api, src).unwrap().answer, Value::Number(3280.33));
}

#[test]
fn inverse_lookup_workflow() {
    let api = api();
    let src = r#"
matches = []
for r in get_all_reports() {
    for b in segment_report(r) {
        for name in extract_entity(b, "investment adviser") {
            if name == "FEDERATED HERMES (UK) LLP" { matches = append(matches, b["name"]) }
        }
    }
}
answer = sort(unique(matches))
"#;
    assert_eq!(
        run(&api, src).unwrap().answer,
        Value::strings([
            "FEDERATED HERMES GLOBAL TOTAL RETURN BOND FUND",
            "FEDERATED HERMES MANAGED VOLATILITY FUND II"
        ])
    );
}

#[test]
fn self_extending_loop_hits_the_step_budget() {
    let api = api();
    let src = "blocks = [1]\nfor b in blocks { blocks = append(blocks, b) }\nanswer = len(blocks)";
    let f = run(&api, src).unwrap_err();
    assert_eq!(f.error, ExecError::Resource { kind: ResourceKind::Steps, limit: 100_000 });
    assert_eq!(f.steps_used, 100_000);
}

#[test]
fn api_call_budget() {
    let api = api();
    let program =
        WorkflowProgram::parse("xs = [1, 2, 3, 4]\nfor x in xs { r = get_all_reports() }\nanswer = 1").unwrap();
    let limits = ExecLimits::new(100_000, 3, 1 << 20).unwrap();
    let f = execute(&program, &NcenBindings::new(&api), limits).unwrap_err();
    assert_eq!(f.error, ExecError::Resource { kind: ResourceKind::ApiCalls, limit: 3 });
    assert_eq!(f.trace.len(), 3);
}

#[test]
fn value_size_budget() {
    let api = api();
    let program = WorkflowProgram::parse("s = \"abcdefgh\"\nfor i in [1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20,21,22,23,24,25] { s = s + s }\nanswer = len(s)").unwrap();
    let limits = ExecLimits::new(10_000_000, 5_000, 16 * 1024 * 1024).unwrap();
    let f = execute(&program, &NcenBindings::new(&api), limits).unwrap_err();
    assert_eq!(f.error, ExecError::Resource { kind: ResourceKind::ValueBytes, limit: 16 * 1024 * 1024 });
}

#[test]
fn runtime_errors() {
    let api = api();
    let err = |src: &str| run(&api, src).unwrap_err().error;
    assert!(matches!(err("answer = 1 / 0"), ExecError::Arithmetic { .. }));
    assert!(matches!(err("answer = [1][3]"), ExecError::Index { .. }));
    assert!(matches!(err("answer = 1 + \"a\""), ExecError::Type { .. }));
    assert!(matches!(err("x = 1"), ExecError::NoAnswer));
    assert!(matches!(err("answer = get_report(\"PRECIOUS METALS FUND\")"), ExecError::AnswerShape(_)));
    let f =
        run(&api, "r = get_report(\"PRECIOUS METALS FUND\")\nb = fetch_block(\"PRECIOUS METALS FUND\", r)\nanswer = 1")
            .unwrap_err();
    assert!(matches!(f.error, ExecError::Api { ref name, .. } if name == "fetch_block"), "{f}");
    assert_eq!(f.trace.len(), 1, "trace prefix is kept");
    let f = run(&api, "answer = get_report(\"NO SUCH FUND ANYWHERE\")").unwrap_err();
    assert!(f.to_string().contains("get_report"), "{f}");
}

#[test]
fn unvalidated_unknown_calls_are_refused_at_runtime() {
    let api = api();
    let program = WorkflowProgram::parse("answer = read_file(\"/etc/passwd\")").unwrap();
    assert_eq!(program.validate(&ncen_registry()).len(), 1);
    let f = execute(&program, &NcenBindings::new(&api), ExecLimits::default()).unwrap_err();
    assert!(matches!(f.error, ExecError::UnknownFunction { .. }));
    assert!(f.trace.is_empty());
}

#[test]
fn last_expression_is_the_fallback_answer() {
    let api = api();
    assert_eq!(run(&api, "x = 2\nx * 3").unwrap().answer, Value::Number(6.0));
    assert_eq!(run(&api, "answer = \"a\"\n5").unwrap().answer, Value::Str("a".into()));
}

#[test]
fn execution_is_deterministic() {
    let api = api();
    let src = r#"
names = []
for r in get_all_reports() { for b in segment_report(r) { names = append(names, b["name"]) } }
answer = sort(names)
"#;
    let a = run(&api, src).unwrap();
    let b = run(&api, src).unwrap();
    assert_eq!(a, b);
    assert!(a.api_call_trace.iter().all(|t| NCEN_API_NAMES.contains(&t.name.as_str())));
}

#[derive(Debug, Clone)]
enum Arith {
    Lit(f64),
    Var(usize),
    Bin(char, Box<Arith>, Box<Arith>),
}

fn arith(vars: usize) -> impl Strategy<Value = Arith> {
    let leaf = if vars == 0 {
        (-1000i32..1000).prop_map(|n| Arith::Lit(n as f64 / 8.0)).boxed()
    } else {
        prop_oneof![(-1000i32..1000).prop_map(|n| Arith::Lit(n as f64 / 8.0)), (0..vars).prop_map(Arith::Var)].boxed()
    };
    leaf.prop_recursive(3, 12, 2, |inner| {
        (prop::sample::select(vec!['+', '-', '*', '/']), inner.clone(), inner)
            .prop_map(|(op, l, r)| Arith::Bin(op, Box::new(l), Box::new(r)))
    })
}

fn render(e: &Arith) -> String {
    match e {
        Arith::Lit(x) => format!("{x}"),
        Arith::Var(i) => format!("v{i}"),
        Arith::Bin(op, l, r) => format!("({} {op} {})", render(l), render(r)),
    }
}

/// Host evaluation; `None` on division by zero or a non-finite result.
fn host(e: &Arith, env: &[f64]) -> Option<f64> {
    let v = match e {
        Arith::Lit(x) => *x,
        Arith::Var(i) => env[*i],
        Arith::Bin(op, l, r) => {
            let (a, b) = (host(l, env)?, host(r, env)?);
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                _ if b == 0.0 => return None,
                _ => a / b,
            }
        }
    };
    v.is_finite().then_some(v)
}

fn straight_line() -> impl Strategy<Value = Vec<Arith>> {
    (1usize..6).prop_flat_map(|n| (0..n).map(arith).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn arithmetic_matches_host(exprs in straight_line()) {
        let api = api();
        let mut src = String::new();
        for (i, e) in exprs.iter().enumerate() {
            src.push_str(&format!("v{i} = {}\n", render(e)));
        }
        src.push_str(&format!("answer = v{}\n", exprs.len() - 1));
        let mut env = Vec::new();
        let mut expected = Some(0.0);
        for e in &exprs {
            match host(e, &env) {
                Some(v) => env.push(v),
                None => { expected = None; break; }
            }
        }
        let program = WorkflowProgram::parse(&src).unwrap();
        let got = execute(&program, &NcenBindings::new(&api), ExecLimits::default());
        match expected {
            Some(_) => prop_assert_eq!(got.unwrap().answer, Value::Number(*env.last().unwrap())),
            None => {
                let is_arith = matches!(got.unwrap_err().error, ExecError::Arithmetic { .. });
                prop_assert!(is_arith);
            }
        }
    }
}
