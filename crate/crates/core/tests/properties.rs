//! Property tests for the classification partition, the weight-table
//! identities, and the proper-scoring direction of the reference EPCE.

use proptest::prelude::*;

use icpa_core::cohort::{
    build_risk_set, classify_scenario, EvaluationWindow, EventKind, ScenarioCode, SubjectRecord,
};
use icpa_core::metrics::{
    brier_ipcw, brier_model, epce_model, epce_reference, ipcw_labeled, model_labeled,
    naive_metrics, reference_metrics, TrueOutcome,
};
use icpa_core::model::SubjectProfile;
use icpa_core::predictor::ConstantHazardPredictor;
use icpa_core::weights::{km_censoring_survival, model_weights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn record(delta: EventKind, t_last_neg: f64, endpoint: f64) -> SubjectRecord {
    SubjectRecord {
        id: format!("{delta:?}"),
        t_last_neg,
        t_pos: (delta == EventKind::Progression).then_some(endpoint),
        t_trt: (delta == EventKind::Treatment).then_some(endpoint),
        t_cen: (delta == EventKind::Censored).then_some(endpoint),
        delta,
        age: 62.0,
        density: 0.1,
        psa: vec![],
    }
}

/// The fifteen group conditions as the weight tables print them, with
/// every boundary resolved by the half-open convention. Used as an
/// independent oracle for the classifier.
fn group_conditions(r: f64, e: f64, t: f64, end: f64) -> Vec<u8> {
    let mut hits = Vec::new();
    if e < t {
        hits.push(0); // excluded
    }
    if r < t && e >= t && e < end {
        hits.push(1);
    }
    if r >= t && r < end && e >= end {
        hits.push(2);
    }
    if r >= t && r < end && e < end && e >= t {
        hits.push(3);
    }
    if r >= end {
        hits.push(4);
    }
    if r < t && e >= end {
        hits.push(5);
    }
    hits
}

fn scenario_group(code: ScenarioCode) -> u8 {
    use ScenarioCode::*;
    match code {
        Excluded => 0,
        S1a | S1b | S1c => 1,
        S2a | S2b | S2c => 2,
        S3a | S3b | S3c => 3,
        S4a | S4b | S4c => 4,
        S5a | S5b | S5c => 5,
    }
}

/// Snap half the draws onto a coarse grid so boundary ties actually occur.
fn time_strategy() -> impl Strategy<Value = f64> {
    (0.0_f64..8.0, any::<bool>()).prop_map(|(x, snap)| {
        if snap {
            (x * 2.0).round() / 2.0
        } else {
            x
        }
    })
}

fn delta_strategy() -> impl Strategy<Value = EventKind> {
    prop_oneof![
        Just(EventKind::Censored),
        Just(EventKind::Progression),
        Just(EventKind::Treatment),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn classification_is_a_partition(
        r in time_strategy(),
        gap in 0.01_f64..6.0,
        t in time_strategy(),
        dt in 0.1_f64..4.0,
        delta in delta_strategy(),
    ) {
        let e = r + gap;
        let window = EvaluationWindow::new(t, dt).unwrap();
        let hits = group_conditions(r, e, t, window.end());
        prop_assert_eq!(hits.len(), 1, "conditions not mutually exclusive at r={} e={} t={} dt={}", r, e, t, dt);
        let code = classify_scenario(&record(delta, r, e), &window);
        prop_assert_eq!(scenario_group(code), hits[0]);
    }

    #[test]
    fn classifier_group_invariants(
        r in time_strategy(),
        gap in 0.01_f64..6.0,
        t in time_strategy(),
        dt in 0.1_f64..4.0,
        delta in delta_strategy(),
    ) {
        let e = r + gap;
        let window = EvaluationWindow::new(t, dt).unwrap();
        let code = classify_scenario(&record(delta, r, e), &window);
        if code == ScenarioCode::S3a {
            prop_assert!(r >= t && e < window.end());
        }
        if code.is_absolute_control() {
            prop_assert!(r >= window.end());
        }
        // shifting the window past the endpoint always excludes
        let later = EvaluationWindow::new(e + 0.5, dt).unwrap();
        prop_assert_eq!(classify_scenario(&record(delta, r, e), &later), ScenarioCode::Excluded);
    }

    #[test]
    fn weight_identities_hold(
        r in time_strategy(),
        gap in 0.01_f64..6.0,
        t in time_strategy(),
        dt in 0.1_f64..4.0,
        delta in delta_strategy(),
        lambda_prg in 0.01_f64..1.5,
        lambda_trt in 0.0_f64..1.0,
    ) {
        let e = r + gap;
        let window = EvaluationWindow::new(t, dt).unwrap();
        let rec = record(delta, r, e);
        let predictor = ConstantHazardPredictor::new(lambda_prg, lambda_trt);
        let w = model_weights(&rec, &window, &predictor, &SubjectProfile::baseline()).unwrap();
        prop_assert!((0.0..=1.0).contains(&w.case_w), "{:?}", w);
        prop_assert!((0.0..=1.0).contains(&w.control_w), "{:?}", w);
        match w.scenario {
            ScenarioCode::S2a | ScenarioCode::S2b | ScenarioCode::S2c => {
                if !w.degenerate {
                    prop_assert!((w.case_w + w.control_w - 1.0).abs() < 1e-10, "{:?}", w);
                }
            }
            ScenarioCode::S3a => prop_assert_eq!((w.case_w, w.control_w), (1.0, 0.0)),
            ScenarioCode::S4a | ScenarioCode::S4b | ScenarioCode::S4c => {
                prop_assert_eq!((w.case_w, w.control_w), (0.0, 1.0))
            }
            ScenarioCode::S5a | ScenarioCode::S5b | ScenarioCode::S5c => {
                prop_assert!(w.case_w + w.control_w <= 1.0 + 1e-12)
            }
            _ => {}
        }
    }
}

/// Degenerate-censoring equivalence: when every risk-set member is an
/// absolute case or absolute control and no censoring occurs, all four
/// approaches coincide.
#[test]
fn degenerate_cohort_approaches_coincide() {
    let window = EvaluationWindow::new(1.0, 3.0).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let mut records = Vec::new();
    let mut truths = Vec::new();
    let mut risks = Vec::new();
    for i in 0..60 {
        if i % 2 == 0 {
            // absolute case: interval inside the window, true time bracketed
            let last_neg = 1.0 + rng.gen_range(0.0..1.0);
            let gap_cap = (3.9_f64 - last_neg).clamp(0.2, 1.5);
            let pos = last_neg + rng.gen_range(0.1..gap_cap);
            records.push(record(EventKind::Progression, last_neg, pos.min(3.95)));
            truths.push(TrueOutcome {
                t_prg_star: (last_neg + pos.min(3.95)) / 2.0,
                t_trt_star: 50.0,
            });
        } else {
            // absolute control: risk interval entirely after the window
            let last_neg = 4.0 + rng.gen_range(0.0..2.0);
            let endpoint = last_neg + rng.gen_range(0.5..2.0);
            let delta = if i % 4 == 1 {
                EventKind::Progression
            } else {
                EventKind::Treatment
            };
            records.push(record(delta, last_neg, endpoint));
            truths.push(TrueOutcome {
                t_prg_star: if delta == EventKind::Progression {
                    (last_neg + endpoint) / 2.0
                } else {
                    60.0
                },
                t_trt_star: if delta == EventKind::Treatment {
                    endpoint
                } else {
                    70.0
                },
            });
        }
        risks.push((rng.gen_range(0.0..100.0_f64) / 100.0 * 8.0).round() / 8.0);
    }

    let rs = build_risk_set(&records, &window).unwrap();
    assert_eq!(rs.n_t(), 60);
    let predictor = ConstantHazardPredictor::new(0.2, 0.1);
    let weights: Vec<_> = rs
        .members
        .iter()
        .map(|(r, _)| model_weights(r, &window, &predictor, &SubjectProfile::baseline()).unwrap())
        .collect();
    let censoring = km_censoring_survival(&records, window.t).unwrap();

    let (_, auc_model) = model_labeled(&risks, &weights).roc_and_auc().unwrap();
    let (ipcw, dropped) = ipcw_labeled(&rs, &risks, &censoring);
    assert_eq!(dropped, 0);
    let (_, auc_ipcw) = ipcw.roc_and_auc().unwrap();
    let naive = naive_metrics(&rs, &risks).unwrap();
    let reference = reference_metrics(&truths, &risks, &window).unwrap();
    assert_eq!(reference.n_t, 60);

    assert_eq!(auc_model, auc_ipcw);
    assert_eq!(auc_model, naive.auc);
    assert_eq!(auc_model, reference.auc);

    let brier_m = brier_model(&rs, &risks, &weights).unwrap();
    let (brier_i, _) = brier_ipcw(&rs, &risks, &censoring).unwrap();
    assert!((brier_m - brier_i).abs() < 1e-12);
    assert!((brier_m - naive.brier).abs() < 1e-12);
    assert!((brier_m - reference.brier).abs() < 1e-12);
}

/// Proper-scoring sanity on one simulated replicate: the reference EPCE
/// is minimized at the data-generating hazards over a hazard-scale
/// family, and deflating the hazards raises the model-based EPCE too.
#[test]
fn epce_proper_scoring_direction_on_one_replicate() {
    use icpa_core::model::ModelParameters;
    use icpa_core::predictor::JointModelPredictor;
    use icpa_core::simulator::{generate_dataset, SimulationConfig};
    use std::collections::HashMap;

    let window = EvaluationWindow::new(1.0, 3.0).unwrap();
    let params = ModelParameters::reference();
    let mut config = SimulationConfig::new(params.clone());
    config.seed = 7;
    let subjects = generate_dataset(&config, 0).unwrap();
    let records: Vec<SubjectRecord> = subjects.iter().map(|s| s.record.clone()).collect();
    let truths: Vec<TrueOutcome> = subjects.iter().map(|s| s.truth).collect();
    let all_profiles: Vec<SubjectProfile> = subjects.iter().map(|s| s.profile).collect();
    let rs = build_risk_set(&records, &window).unwrap();
    let by_id: HashMap<&str, &SubjectProfile> = subjects
        .iter()
        .map(|s| (s.record.id.as_str(), &s.profile))
        .collect();
    let profiles: Vec<SubjectProfile> = rs
        .members
        .iter()
        .map(|(r, _)| *by_id[r.id.as_str()])
        .collect();

    let scales = [0.5, 0.75, 1.0, 1.5, 2.0];
    let ref_values: Vec<f64> = scales
        .iter()
        .map(|&k| {
            let predictor = JointModelPredictor::new(params.with_hazard_scale(k)).unwrap();
            epce_reference(&truths, &predictor, &all_profiles, &window)
                .unwrap()
                .value
        })
        .collect();
    let min_at = ref_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    assert_eq!(
        scales[min_at], 1.0,
        "reference EPCE not minimized at the true scale: {ref_values:?}"
    );

    // deflating hazards must raise the model-based EPCE as well
    let true_predictor = JointModelPredictor::new(params.clone()).unwrap();
    let deflated = JointModelPredictor::new(params.with_hazard_scale(0.5)).unwrap();
    let model_true = epce_model(&rs, &true_predictor, &profiles).unwrap().value;
    let model_dn = epce_model(&rs, &deflated, &profiles).unwrap().value;
    assert!(
        model_dn > model_true,
        "model EPCE should rise when hazards are deflated: {model_dn} vs {model_true}"
    );
}
