use std::collections::HashMap;
use std::sync::Arc;

use groundflow_core::dataset::Tier;
use groundflow_core::evaluator::{
    render_table, run_bench, run_tiers, FaultInjectingBackend, FaultRates, WorkflowMethod,
};
use groundflow_core::fixtures;
use groundflow_core::lecture::ncen_registry;
use groundflow_core::llm::{Gateway, ScriptedBackend};
use groundflow_core::orchestrator::Orchestrator;
use groundflow_core::{ChatBackend, ChatParams, LectureVariant, NcenApi};

fn orchestrator(backend: Arc<dyn ChatBackend>) -> Orchestrator {
    let api = Arc::new(NcenApi::new(Arc::new(fixtures::bundled_corpus())));
    Orchestrator::new(Gateway::new(backend, ChatParams::default()), api, ncen_registry())
}

#[test]
fn golden_replay_scores_every_tier_perfectly() {
    let items = fixtures::bundled_dataset();
    let replay = ScriptedBackend::load(&fixtures::replay_dir().join("golden.jsonl")).unwrap();
    let m = WorkflowMethod::new("groundflow", orchestrator(Arc::new(replay)), LectureVariant::Full);
    let results = run_tiers(&m, &items);
    assert_eq!(results.len(), 3);
    for r in &results {
        assert!(r.total >= 30);
        assert_eq!(
            r.correct,
            r.total,
            "{:?}",
            r.per_item.iter().filter(|o| !o.verdict.is_correct()).collect::<Vec<_>>()
        );
        assert_eq!(r.accuracy, 1.0);
    }
    let table = render_table(&results);
    assert!(table.contains("| EASY | 100.0% |"), "{table}");
}

fn accuracy(variant: LectureVariant, backend: Arc<dyn ChatBackend>) -> f64 {
    let items = fixtures::bundled_dataset();
    let m = WorkflowMethod::new(variant.as_str(), orchestrator(backend), variant);
    run_bench(&m, &items, None).unwrap().accuracy
}

#[test]
fn ablations_order_like_the_lecture_components_matter() {
    let items = fixtures::bundled_dataset();
    let backend: Arc<dyn ChatBackend> = Arc::new(FaultInjectingBackend::new(&items, FaultRates::default()).unwrap());
    let acc: HashMap<_, _> = LectureVariant::ALL.iter().map(|&v| (v, accuracy(v, backend.clone()))).collect();
    let (full, nct, ba, ncp) =
        (acc[&LectureVariant::Full], acc[&LectureVariant::Nct], acc[&LectureVariant::Ba], acc[&LectureVariant::Ncp]);
    assert_eq!(full, 1.0);
    assert!(full > nct && nct > ncp, "{acc:?}");
    assert!(full > ba, "{acc:?}");
}

#[test]
fn scripted_feedback_is_counted() {
    let items: Vec<_> = fixtures::bundled_dataset().into_iter().filter(|i| i.tier == Tier::Easy).take(4).collect();
    let backend = Arc::new(FaultInjectingBackend::new(&items, FaultRates::default()).unwrap());
    let feedback = items.iter().map(|i| (i.id.clone(), "Looks right, run it again.".to_string())).collect();
    let m =
        WorkflowMethod::new("groundflow+feedback", orchestrator(backend), LectureVariant::Full).with_feedback(feedback);
    let r = run_bench(&m, &items, Some(Tier::Easy)).unwrap();
    assert_eq!(r.correct, 4);
    assert!(r.per_item.iter().all(|o| o.feedback_rounds == 1));
}

#[test]
fn scenario_questions_do_not_shadow_dataset_questions() {
    let items = fixtures::bundled_dataset();
    for s in groundflow_core::evaluator::feedback_scenarios() {
        assert!(items.iter().all(|i| i.question != s.item.question), "{}", s.name);
    }
}
