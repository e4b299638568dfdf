use std::collections::BTreeSet;
use std::sync::Arc;

use groundflow_core::corpus::canonical_fund_name;
use groundflow_core::dataset::{self, golden_workflow, Answer, DatasetError, QaItem, QuestionFamily, Tier};
use groundflow_core::evaluator::score;
use groundflow_core::fixtures;
use groundflow_core::workflow::{execute, NcenBindings};
use groundflow_core::{ExecLimits, NcenApi, Value, Verdict, WorkflowProgram};

fn api() -> NcenApi {
    NcenApi::new(Arc::new(fixtures::bundled_corpus()))
}

fn run_golden(api: &NcenApi, item: &QaItem) -> Value {
    let code = golden_workflow(item).unwrap();
    let program = WorkflowProgram::parse(&code).unwrap();
    execute(&program, &NcenBindings::new(api), ExecLimits::default())
        .unwrap_or_else(|e| panic!("{}: {e}", item.id))
        .answer
}

#[test]
fn bundled_dataset_has_thirty_per_tier_and_checks() {
    let items = fixtures::bundled_dataset();
    for tier in Tier::ALL {
        assert!(items.iter().filter(|i| i.tier == tier).count() >= 30, "{tier:?}");
    }
    let ids: BTreeSet<_> = items.iter().map(|i| &i.id).collect();
    assert_eq!(ids.len(), items.len());
    for item in &items {
        item.check().unwrap();
    }
}

#[test]
fn golden_workflows_reproduce_every_ground_truth() {
    let api = api();
    for item in fixtures::bundled_dataset() {
        let got = run_golden(&api, &item);
        assert_eq!(score(&item.answer, &got.render()), Verdict::Correct, "{}: {}", item.id, got.render());
        match (&item.answer, &got) {
            (Answer::Number { value, .. }, Value::Number(n)) => assert_eq!(n, value, "{}", item.id),
            (Answer::Entities { entities }, Value::List(xs)) => {
                let got: BTreeSet<_> = xs.iter().map(|v| v.render()).collect();
                let want: BTreeSet<_> = entities.iter().cloned().collect();
                assert_eq!(got, want, "{}", item.id);
            }
            other => panic!("{}: unexpected shapes {other:?}", item.id),
        }
    }
}

fn intermediate_for(fund: &str, label: &str) -> QaItem {
    let all = dataset::build_intermediate(&fixtures::bundled_corpus(), 36, 1).unwrap();
    all.into_iter().find(|i| i.source_funds == [fund] && i.relations[0] == label).unwrap()
}

#[test]
fn ratio_items_mirror_the_reference_figures() {
    // 4,812.66 / 41,087,235.00 = 0.000117..., first significant digit at place 4
    let item = intermediate_for("PROFUND VP INTERNET", "gross commission");
    assert_eq!(item.answer, Answer::Number { value: 0.0001, precision: 4 });
    assert_eq!(run_golden(&api(), &item), Value::Number(0.0001));

    // 38,452,116,902.55 / 5,052,311,400.00 = 7.6108...
    let item = intermediate_for("SIIT CORE FIXED INCOME FUND", "total purchase sale");
    assert_eq!(item.answer, Answer::Number { value: 7.61, precision: 2 });
    assert_eq!(run_golden(&api(), &item), Value::Number(7.61));
}

#[test]
fn every_intermediate_item_is_available_and_one_more_is_a_shortfall() {
    let corpus = fixtures::bundled_corpus();
    assert_eq!(dataset::build_intermediate(&corpus, 36, 7).unwrap().len(), 36);
    match dataset::build_intermediate(&corpus, 37, 7) {
        Err(DatasetError::Shortfall { tier, requested, available }) => {
            assert_eq!((tier, requested, available), (Tier::Intermediate, 37, 36));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn zero_items_is_empty() {
    let corpus = fixtures::bundled_corpus();
    assert!(dataset::build_easy(&corpus, 0, 3).unwrap().is_empty());
    assert!(dataset::build_hard(&corpus, 0, 3).unwrap().is_empty());
    assert!(dataset::build_all(&corpus, 0, 3).unwrap().is_empty());
}

#[test]
fn seeds_are_reproducible() {
    let corpus = fixtures::bundled_corpus();
    let a = dataset::build_all(&corpus, 12, 99).unwrap();
    assert_eq!(a, dataset::build_all(&corpus, 12, 99).unwrap());
    assert_ne!(a, dataset::build_all(&corpus, 12, 100).unwrap());
}

/// Funds whose `relation` lists `company`, found by scanning every current
/// block with the extraction API.
fn inverse_oracle(api: &NcenApi, relation: &str, company: &str) -> BTreeSet<String> {
    let index = api.corpus().index();
    api.all_blocks()
        .into_iter()
        .filter(|b| {
            index.entries.get(&canonical_fund_name(&b.fund_name)).map(|f| &f.accession_number)
                == Some(&b.source.accession_number)
        })
        .filter(|b| api.extract_entity(b, relation).iter().any(|n| n == company))
        .map(|b| b.fund_name)
        .collect()
}

#[test]
fn inverse_lookups_match_an_exhaustive_scan() {
    let api = api();
    let hard = dataset::build_hard(&fixtures::bundled_corpus(), 60, 5).unwrap();
    let mut checked = 0;
    for item in &hard {
        let QuestionFamily::Inverse { relation, company } = QuestionFamily::of(item).unwrap() else {
            continue;
        };
        let want = inverse_oracle(&api, &relation, &company);
        let Answer::Entities { entities } = &item.answer else { panic!() };
        assert_eq!(entities.iter().cloned().collect::<BTreeSet<_>>(), want, "{}", item.id);
        checked += 1;
    }
    assert!(checked >= 30, "{checked}");
}

#[test]
fn adviser_with_two_funds() {
    let api = api();
    let want: BTreeSet<String> =
        ["FEDERATED HERMES GLOBAL TOTAL RETURN BOND FUND", "FEDERATED HERMES MANAGED VOLATILITY FUND II"]
            .map(String::from)
            .into();
    assert_eq!(inverse_oracle(&api, "investment adviser", "FEDERATED HERMES (UK) LLP"), want);
}

#[test]
fn jsonl_round_trip_of_the_bundled_file() {
    let items = fixtures::bundled_dataset();
    let text = std::fs::read_to_string(fixtures::dataset_path()).unwrap();
    assert_eq!(dataset::to_jsonl(&items), text);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    dataset::save(&items, &path).unwrap();
    assert_eq!(dataset::load(&path).unwrap(), items);
}

#[test]
fn template_items_cover_every_single_fund_question_and_reproduce() {
    let api = api();
    let items = dataset::template_items(api.corpus(), fixtures::DATASET_SEED).unwrap();
    let questions: BTreeSet<_> = items.iter().map(|i| i.question.as_str()).collect();
    assert_eq!(questions.len(), items.len());
    for q in [
        "Who is the custodian for PRECIOUS METALS FUND?",
        "Who is the custodian for COLUMBIA ACORN USA?",
        "What was the gross commission for WCM SMALL CAP GROWTH FUND?",
        "What funds do the investment adviser company FEDERATED HERMES (UK) LLP manage?",
    ] {
        assert!(questions.contains(q), "{q}");
    }
    // everything the sampled set asks outside the three-fund sums is a template
    for item in fixtures::bundled_dataset() {
        if !matches!(QuestionFamily::of(&item).unwrap(), QuestionFamily::Aggregate { .. }) {
            assert!(questions.contains(item.question.as_str()), "{}", item.id);
        }
    }
    for item in &items {
        item.check().unwrap();
        assert_eq!(score(&item.answer, &run_golden(&api, item).render()), Verdict::Correct, "{}", item.id);
        assert!(!dataset::golden_summary(item).unwrap().is_empty());
    }
}
