use std::collections::BTreeMap;
use std::sync::Arc;

use reportsmith_core::metrics::{HashedBagEmbedder, MetricReport};
use reportsmith_core::{
    meteor, parse_sections, render_report, report_to_json, rouge1, score, tokenize, SectionKind,
    StructuredReport,
};
use reportsmith_gateway::mock::FILLER_STEPS;
use reportsmith_gateway::{MockBackend, MockBehavior, ProviderError};
use reportsmith_harness::{
    aggregate, run_rows, synthetic_testset, EvalContext, EvalRow, Suite, TestCase, MASKABLE,
};

fn run(backend: &MockBackend, suite: Suite, cases: &[TestCase]) -> Vec<EvalRow> {
    let ctx = EvalContext::new(backend, &HashedBagEmbedder);
    run_rows(&ctx, suite, cases, 4).unwrap()
}

fn custom(f: impl Fn(&str) -> Result<String, ProviderError> + Send + Sync + 'static) -> MockBackend {
    MockBackend::new(MockBehavior::Custom(Arc::new(f)))
}

fn plain_mean(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

#[test]
fn perfect_extractor_generation_is_identity() {
    let cases = synthetic_testset(50);
    let rows = run(&MockBackend::new(MockBehavior::PerfectExtractor), Suite::Generation, &cases);
    let agg = aggregate(Suite::Generation, "mock", 0, 42, &rows);
    assert_eq!(agg.n, 50);
    assert_eq!(agg.rouge1_f_mean, 1.0);
    assert_eq!(agg.parse_failed, 0);
    let gold_pct: Vec<f64> = cases.iter().map(|c| f64::from(score(&c.gold).total) / 17.0).collect();
    assert!((agg.ctqrs_percent_mean - plain_mean(&gold_pct)).abs() < 1e-12);
    assert!((agg.embedding_similarity_mean - 1.0).abs() < 1e-12);
}

#[test]
fn non_json_answers_fail_every_row() {
    let cases = synthetic_testset(10);
    let rows = run(&MockBackend::new(MockBehavior::Fixed("I cannot help with that.".into())), Suite::Generation, &cases);
    assert!(rows.iter().all(|r| r.parse_failed && r.ctqrs_percent == 0.0 && r.metric.rouge1.f1 == 0.0));
    let agg = aggregate(Suite::Generation, "mock", 0, 42, &rows);
    assert_eq!(agg.parse_failed, 10);
    assert_eq!(
        (agg.ctqrs_percent_mean, agg.rouge1_f_mean, agg.meteor_mean, agg.embedding_similarity_mean),
        (0.0, 0.0, 0.0, 0.0)
    );
}

const DEGRADED_AR: &str = "The screen flickers briefly.";

fn degrade(input: &str) -> StructuredReport {
    let mut r = parse_sections(input);
    r.actual_result = DEGRADED_AR.into();
    r
}

#[test]
fn degraded_section_matches_hand_computed_means() {
    let cases = synthetic_testset(10);
    let backend = custom(|input| Ok(report_to_json(&degrade(input))));
    let rows = run(&backend, Suite::Generation, &cases);
    let agg = aggregate(Suite::Generation, "mock", 0, 42, &rows);

    // Metrics straight from the scripted outputs, no harness code involved.
    let mut pct = Vec::new();
    let mut f = Vec::new();
    let mut m = Vec::new();
    let mut e = Vec::new();
    for c in &cases {
        let out = degrade(&c.unstructured);
        pct.push(f64::from(score(&out).total) / 17.0);
        let metric = MetricReport::compute(&render_report(&out), &render_report(&c.gold), Some(&HashedBagEmbedder)).unwrap();
        f.push(metric.rouge1.f1);
        m.push(metric.meteor);
        e.push(metric.embedding_similarity.unwrap());
    }
    assert_eq!(agg.ctqrs_percent_mean, plain_mean(&pct));
    assert_eq!(agg.rouge1_f_mean, plain_mean(&f));
    assert_eq!(agg.meteor_mean, plain_mean(&m));
    assert_eq!(agg.embedding_similarity_mean, plain_mean(&e));
    assert!(agg.rouge1_f_mean < 1.0);
}

#[test]
fn flag_missing_detects_every_masked_section() {
    let cases = synthetic_testset(50);
    let rows = run(&MockBackend::new(MockBehavior::FlagMissing), Suite::Missing, &cases);
    let agg = aggregate(Suite::Missing, "mock", 0, 42, &rows);
    for kind in MASKABLE {
        let d = agg.detection[&kind];
        assert_eq!((d.tp, d.fp, d.fn_, d.tn), (50, 0, 0, 50), "{kind}");
        assert_eq!(d.f1, 1.0);
        assert_eq!(d.accuracy, 1.0);
    }
}

#[test]
fn hallucinate_never_flags() {
    let cases = synthetic_testset(10);
    let rows = run(&MockBackend::new(MockBehavior::Hallucinate), Suite::Missing, &cases);
    let agg = aggregate(Suite::Missing, "mock", 0, 42, &rows);
    for kind in MASKABLE {
        let d = agg.detection[&kind];
        assert_eq!((d.tp, d.fn_), (0, 10), "{kind}");
        assert_eq!(d.f1, 0.0);
    }
}

#[test]
fn scripted_confusion_gives_known_f1() {
    let cases = synthetic_testset(10);
    let titles: Vec<String> = cases.iter().map(|c| c.gold.title.clone()).collect();
    let backend = custom(move |input| {
        let mut r = parse_sections(input);
        let idx = titles.iter().position(|t| *t == r.title).expect("known title");
        let masked_steps = r.steps_to_reproduce.is_empty();
        if masked_steps && idx >= 7 {
            // a miss: invent steps instead of flagging
            r.steps_to_reproduce = FILLER_STEPS.iter().map(|s| s.to_string()).collect();
            r.missing_fields.remove(&SectionKind::StepsToReproduce);
        } else if !masked_steps && idx < 2 && r.missing_fields.is_empty() {
            // a false alarm on an intact report
            let mut v: serde_json::Value = serde_json::from_str(&report_to_json(&r)).unwrap();
            v["missing_fields"] = serde_json::json!(["steps_to_reproduce"]);
            return Ok(v.to_string());
        }
        Ok(report_to_json(&r))
    });
    let rows = run(&backend, Suite::Missing, &cases);
    let agg = aggregate(Suite::Missing, "mock", 0, 42, &rows);
    let d = agg.detection[&SectionKind::StepsToReproduce];
    assert_eq!((d.tp, d.fp, d.fn_, d.tn), (7, 2, 3, 8));
    assert!((d.f1 - 14.0 / 19.0).abs() < 1e-9);
    assert_eq!(format!("{:.4}", d.f1), "0.7368");
    assert_eq!(d.accuracy, 15.0 / 20.0);
}

#[test]
fn perfect_mapping_scores_one() {
    let cases = synthetic_testset(50);
    let rows = run(&MockBackend::new(MockBehavior::PerfectExtractor), Suite::Mapping, &cases);
    let agg = aggregate(Suite::Mapping, "mock", 0, 42, &rows);
    assert_eq!(agg.mapping.len(), 4);
    for (kind, s) in &agg.mapping {
        assert_eq!(s.rouge1_f, 1.0, "{kind}");
        assert!(s.meteor >= 0.99, "{kind} {}", s.meteor);
        assert_eq!((s.n, s.excluded), (50, 0));
    }
    assert_eq!(agg.mapping_excluded, 0);
}

#[test]
fn disjoint_actual_result_maps_to_zero() {
    let cases = synthetic_testset(10);
    let backend = custom(|input| {
        let mut r = parse_sections(input);
        r.actual_result = "Zzz qqq.".into();
        Ok(report_to_json(&r))
    });
    let agg = aggregate(Suite::Mapping, "mock", 0, 42, &run(&backend, Suite::Mapping, &cases));
    assert_eq!(agg.mapping[&SectionKind::ActualResult].rouge1_f, 0.0);
    assert_eq!(agg.mapping[&SectionKind::ActualResult].meteor, 0.0);
    for kind in [SectionKind::StepsToReproduce, SectionKind::ExpectedResult, SectionKind::AdditionalInformation] {
        assert_eq!(agg.mapping[&kind].rouge1_f, 1.0);
    }
}

#[test]
fn two_row_mapping_is_hand_averaged() {
    let cases = synthetic_testset(2);
    let outputs: BTreeMap<u64, StructuredReport> = cases
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut r = c.gold.clone();
            r.steps_to_reproduce.truncate(2 + i);
            r.expected_result = format!("{} Then it also scrolls.", r.expected_result);
            (c.bug_id, r)
        })
        .collect();
    let table: Vec<(String, String)> = cases
        .iter()
        .map(|c| (c.unstructured.clone(), report_to_json(&outputs[&c.bug_id])))
        .collect();
    let backend = MockBackend::scripted(table);
    let agg = aggregate(Suite::Mapping, "mock", 0, 42, &run(&backend, Suite::Mapping, &cases));
    for kind in SectionKind::BODY {
        let per_row: Vec<(f64, f64)> = cases
            .iter()
            .map(|c| {
                let cand = tokenize(&outputs[&c.bug_id].section_text(kind));
                let refr = tokenize(&c.gold.section_text(kind));
                (rouge1(&cand, &refr).f1, meteor(&cand, &refr))
            })
            .collect();
        let s = agg.mapping[&kind];
        assert_eq!(s.rouge1_f, (per_row[0].0 + per_row[1].0) / 2.0, "{kind}");
        assert_eq!(s.meteor, (per_row[0].1 + per_row[1].1) / 2.0, "{kind}");
    }
    assert!(agg.mapping[&SectionKind::StepsToReproduce].rouge1_f < 1.0);
}

#[test]
fn parse_failures_count_as_zero_in_mapping() {
    let cases = synthetic_testset(4);
    let backend = custom(|input| {
        if input.contains("Bookmarks") {
            Ok("not json".into())
        } else {
            Ok(report_to_json(&parse_sections(input)))
        }
    });
    let agg = aggregate(Suite::Mapping, "mock", 0, 42, &run(&backend, Suite::Mapping, &cases));
    assert_eq!(agg.parse_failed, 1);
    for s in agg.mapping.values() {
        assert_eq!((s.n, s.excluded), (4, 0));
        assert_eq!(s.rouge1_f, 0.75);
    }
}

#[test]
fn empty_generated_section_is_excluded_and_counted() {
    let cases = synthetic_testset(3);
    let backend = custom(|input| {
        let mut r = parse_sections(input);
        r.clear_section(SectionKind::AdditionalInformation);
        Ok(report_to_json(&r))
    });
    let agg = aggregate(Suite::Mapping, "mock", 0, 42, &run(&backend, Suite::Mapping, &cases));
    let ai = agg.mapping[&SectionKind::AdditionalInformation];
    assert_eq!((ai.n, ai.excluded, ai.rouge1_f), (0, 3, 0.0));
    assert_eq!(agg.mapping_excluded, 3);
}

#[test]
fn aggregates_equal_independent_sums() {
    let cases = synthetic_testset(50);
    let backend = custom(|input| {
        let mut r = parse_sections(input);
        if input.contains("tab strip") {
            r.expected_result = "It works.".into();
        }
        Ok(report_to_json(&r))
    });
    let rows = run(&backend, Suite::Generation, &cases);
    let agg = aggregate(Suite::Generation, "mock", 0, 42, &rows);
    let n = rows.len() as f64;
    let sum = |f: &dyn Fn(&EvalRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    assert!((agg.ctqrs_percent_mean - sum(&|r| r.ctqrs_percent)).abs() < 1e-12);
    assert!((agg.rouge1_f_mean - sum(&|r| r.metric.rouge1.f1)).abs() < 1e-12);
    assert!((agg.meteor_mean - sum(&|r| r.metric.meteor)).abs() < 1e-12);
    let ids: Vec<u64> = rows.iter().map(|r| r.bug_id).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
}

#[test]
fn few_shot_prompts_exclude_the_row() {
    let cases = synthetic_testset(10);
    let backend = MockBackend::new(MockBehavior::PerfectExtractor);
    let ctx = EvalContext::new(&backend, &HashedBagEmbedder).with_shots(3, 7, &cases);
    for c in &cases {
        let msgs = ctx.messages(c.bug_id, &c.unstructured);
        assert_eq!(msgs.len(), 2 + 2 * 3);
        let exemplar_inputs: Vec<&str> = msgs[1..7].iter().step_by(2).map(|m| m.content.as_str()).collect();
        assert!(exemplar_inputs.iter().all(|m| !m.ends_with(&c.unstructured)));
        assert_eq!(ctx.messages(c.bug_id, &c.unstructured), msgs);
    }
    let rows = run_rows(&ctx, Suite::Generation, &cases, 2).unwrap();
    assert!(rows.iter().all(|r| r.metric.rouge1.f1 == 1.0));
}

#[test]
fn provider_failure_returns_completed_rows() {
    let cases = synthetic_testset(10);
    let backend = custom(|input| {
        if input.contains("address bar") {
            Err(ProviderError::Unavailable("down".into()))
        } else {
            Ok(report_to_json(&parse_sections(input)))
        }
    });
    let ctx = EvalContext::new(&backend, &HashedBagEmbedder);
    let (rows, err) = run_rows(&ctx, Suite::Generation, &cases, 3).unwrap_err();
    assert_eq!(rows.len(), 9);
    assert!(matches!(err, ProviderError::Unavailable(_)));
}
