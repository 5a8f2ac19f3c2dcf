use solvctrl::analysis::{full_pipeline, Outcome, PipelineConfig};
use solvctrl::catalog;
use solvctrl::dynamics::SemidirectLcs;

#[test]
fn euclid_like_pipeline_completes() {
    let report = full_pipeline(&catalog::euclid_like(), &PipelineConfig::default());
    assert!(report.is_completed(), "{:?}", report.outcome);
    assert!(report.hypotheses.iter().all(|h| h.holds));
}

#[test]
fn pipeline_stops_when_n0_is_nontrivial() {
    let base = catalog::euclid_like();
    let sd = SemidirectLcs {
        derivation: catalog::diag(&[0.0, 0.0, 0.0]),
        ..base
    };
    let report = full_pipeline(&sd, &PipelineConfig::default());
    match report.outcome {
        Outcome::Stopped { ref hypothesis, .. } => assert!(hypothesis.contains("N0"), "{hypothesis}"),
        Outcome::Completed => panic!("expected a stop"),
    }
}
