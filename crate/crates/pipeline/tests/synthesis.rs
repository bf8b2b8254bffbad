use reportsmith_core::fixtures::golden_g1;
use reportsmith_core::metrics::HashedBagEmbedder;
use reportsmith_core::render_report;
use reportsmith_gateway::{MockBackend, MockBehavior, ScriptedEmbedder};
use reportsmith_pipeline::{synthesize_unstructured, SynthesisConfig, SynthesisError};

#[test]
fn verbatim_echo_is_retained_with_perfect_scores() {
    let backend = MockBackend::new(MockBehavior::Echo);
    let out = synthesize_unstructured(&backend, &golden_g1(), &SynthesisConfig::default(), &HashedBagEmbedder)
        .unwrap();
    assert_eq!(out.embedding_similarity, 1.0);
    assert_eq!(out.cosine_tf, 1.0);
    assert_eq!(out.attempts.len(), 1);
    assert_eq!(out.text, render_report(&golden_g1()).trim());
}

#[test]
fn unrelated_text_three_times_fails_retention() {
    let backend = MockBackend::new(MockBehavior::Fixed("The weather was lovely all week.".into()));
    let err = synthesize_unstructured(&backend, &golden_g1(), &SynthesisConfig::default(), &HashedBagEmbedder)
        .unwrap_err();
    match err {
        SynthesisError::RetentionFailed { attempts } => {
            assert_eq!(attempts.len(), 3);
            assert!(attempts.iter().all(|a| !a.retained));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(backend.calls(), 3);
}

#[test]
fn embedding_exactly_at_threshold_is_rejected() {
    let original = render_report(&golden_g1());
    let candidate = format!("{} Thanks.", original.trim());
    // cosine((1,0,0,0,0), (17,10,3,1,1)) = 17 / 20
    let embedder = ScriptedEmbedder::new([
        (original.clone(), vec![1.0, 0.0, 0.0, 0.0, 0.0]),
        (candidate.clone(), vec![17.0, 10.0, 3.0, 1.0, 1.0]),
    ]);
    let backend = MockBackend::new(MockBehavior::Fixed(candidate));
    let err = synthesize_unstructured(&backend, &golden_g1(), &SynthesisConfig::default(), &embedder)
        .unwrap_err();
    let SynthesisError::RetentionFailed { attempts } = err else { panic!() };
    assert_eq!(attempts[0].embedding_similarity, 0.85);
    assert!(attempts[0].cosine_tf > 0.9);
}

#[test]
fn later_attempt_can_pass() {
    let original = render_report(&golden_g1());
    let backend = MockBackend::new(MockBehavior::Sequence(vec!["nothing alike".into(), original.clone()]));
    let out = synthesize_unstructured(&backend, &golden_g1(), &SynthesisConfig::default(), &HashedBagEmbedder)
        .unwrap();
    assert_eq!(out.attempts.len(), 2);
    assert!(!out.attempts[0].retained && out.attempts[1].retained);
}

#[test]
fn provider_failure_propagates() {
    let backend = MockBackend::new(MockBehavior::Fail(reportsmith_gateway::ProviderError::TimedOut));
    let err = synthesize_unstructured(&backend, &golden_g1(), &SynthesisConfig::default(), &HashedBagEmbedder)
        .unwrap_err();
    assert!(matches!(err, SynthesisError::Provider(_)));
}
