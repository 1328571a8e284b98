//! Case/control weights: the model-based per-scenario weight tables and
//! inverse-probability-of-censoring weights from a reverse Kaplan-Meier
//! estimator.

use crate::cohort::{EvaluationWindow, EventKind, ScenarioCode, SubjectRecord};
use crate::error::{Error, Result};
use crate::model::SubjectProfile;
use crate::predictor::RiskPredictor;

/// Ratio denominators below this are treated as degenerate: the weight
/// collapses to zero and a diagnostic is recorded instead of dividing.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;

/// Model-based case and control weights for one risk-set member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightPair {
    pub case_w: f64,
    pub control_w: f64,
    pub scenario: ScenarioCode,
    /// A ratio denominator was effectively zero and the affected weight
    /// was set to zero.
    pub degenerate: bool,
}

/// Both model-based weights for a record, sharing one predictor sweep.
///
/// All risks are conditioned at the record's last negative biopsy time,
/// exactly as the weight tables read.
pub fn model_weights(
    record: &SubjectRecord,
    window: &EvaluationWindow,
    predictor: &dyn RiskPredictor,
    profile: &SubjectProfile,
) -> Result<WeightPair> {
    use ScenarioCode::*;
    let scenario = crate::cohort::classify_scenario(record, window);
    let r = record.t_last_neg;
    let t = window.t;
    let end = window.end();
    let endpoint = record.endpoint();

    let mut degenerate = false;
    let mut ratio = |num: f64, den: f64| -> f64 {
        if den < DEGENERATE_DENOMINATOR {
            degenerate = true;
            0.0
        } else {
            num / den
        }
    };

    let (case_w, control_w) = match scenario {
        S1a => {
            let pi = predictor.cif_batch(profile, r, &[t, endpoint])?;
            (ratio(pi[1] - pi[0], pi[1]), 0.0)
        }
        S1b => {
            let pi = predictor.cif_batch(profile, r, &[t, endpoint])?;
            (pi[1] - pi[0], 0.0)
        }
        S1c => {
            let pi = predictor.cif_batch(profile, r, &[t, end])?;
            (pi[1] - pi[0], predictor.surv(profile, end, r)?)
        }
        S2a => {
            let pi = predictor.cif_batch(profile, r, &[end, endpoint])?;
            (ratio(pi[0], pi[1]), ratio(pi[1] - pi[0], pi[1]))
        }
        S2b | S2c => {
            let pi = predictor.cif(profile, end, r)?;
            (pi, 1.0 - pi)
        }
        S3a => (1.0, 0.0),
        S3b => (predictor.cif(profile, endpoint, r)?, 0.0),
        S3c => (
            predictor.cif(profile, end, r)?,
            predictor.surv(profile, end, r)?,
        ),
        S4a | S4b | S4c => (0.0, 1.0),
        S5a => {
            let pi = predictor.cif_batch(profile, r, &[t, end, endpoint])?;
            (ratio(pi[1] - pi[0], pi[2]), ratio(pi[2] - pi[1], pi[2]))
        }
        S5b | S5c => {
            let pi = predictor.cif_batch(profile, r, &[t, end])?;
            (pi[1] - pi[0], 1.0 - pi[1])
        }
        Excluded => (0.0, 0.0),
    };
    Ok(WeightPair {
        case_w: case_w.clamp(0.0, 1.0),
        control_w: control_w.clamp(0.0, 1.0),
        scenario,
        degenerate,
    })
}

pub fn model_case_weight(
    record: &SubjectRecord,
    window: &EvaluationWindow,
    predictor: &dyn RiskPredictor,
    profile: &SubjectProfile,
) -> Result<f64> {
    Ok(model_weights(record, window, predictor, profile)?.case_w)
}

pub fn model_control_weight(
    record: &SubjectRecord,
    window: &EvaluationWindow,
    predictor: &dyn RiskPredictor,
    profile: &SubjectProfile,
) -> Result<f64> {
    Ok(model_weights(record, window, predictor, profile)?.control_w)
}

/// Reverse Kaplan-Meier estimate of the censoring survival G(s | t),
/// landmarked at `t`: jumps occur at censoring times in (t, s] among
/// subjects still observed at t; event endpoints leave the risk set
/// without a jump. At tied times events precede censorings.
#[derive(Debug, Clone)]
pub struct CensoringSurvival {
    landmark: f64,
    /// (jump time, survival just after the jump, subjects at risk).
    jumps: Vec<(f64, f64, usize)>,
}

impl CensoringSurvival {
    pub fn landmark(&self) -> f64 {
        self.landmark
    }

    pub fn jumps(&self) -> &[(f64, f64, usize)] {
        &self.jumps
    }

    /// G(s | landmark); right-continuous, 1 before the first jump.
    pub fn eval(&self, s: f64) -> f64 {
        match self
            .jumps
            .iter()
            .rev()
            .find(|&&(time, _, _)| time <= s)
        {
            Some(&(_, value, _)) => value,
            None => 1.0,
        }
    }
}

pub fn km_censoring_survival(records: &[SubjectRecord], landmark: f64) -> Result<CensoringSurvival> {
    let mut members: Vec<(f64, bool)> = records
        .iter()
        .filter(|r| r.endpoint() >= landmark)
        .map(|r| (r.endpoint(), r.delta == EventKind::Censored))
        .collect();
    if members.is_empty() {
        return Err(Error::EmptyRiskSet);
    }
    members.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite endpoint times"));

    let n = members.len();
    let mut jumps = Vec::new();
    let mut surv = 1.0;
    let mut i = 0;
    while i < n {
        let time = members[i].0;
        let mut censored = 0usize;
        let mut events = 0usize;
        let mut j = i;
        while j < n && members[j].0 == time {
            if members[j].1 {
                censored += 1;
            } else {
                events += 1;
            }
            j += 1;
        }
        if time > landmark && censored > 0 {
            // events at the tied time precede the censorings
            let at_risk = (n - i) - events;
            surv *= 1.0 - censored as f64 / at_risk as f64;
            jumps.push((time, surv, at_risk));
        }
        i = j;
    }
    Ok(CensoringSurvival { landmark, jumps })
}

/// Whether a record is an absolute case for the window: detected
/// progression with the whole risk interval inside [t, t+dt).
pub fn is_absolute_case(record: &SubjectRecord, window: &EvaluationWindow) -> bool {
    record.delta == EventKind::Progression
        && record.t_last_neg >= window.t
        && record.endpoint() < window.end()
}

/// IPCW weight 1 / G(T+ | t) for an absolute case.
pub fn ipcw_case_weight(
    record: &SubjectRecord,
    censoring: &CensoringSurvival,
    window: &EvaluationWindow,
) -> Result<f64> {
    if !is_absolute_case(record, window) {
        return Err(Error::NotAbsoluteCase);
    }
    let g = censoring.eval(record.endpoint());
    if g <= 0.0 {
        return Err(Error::ZeroSurvival);
    }
    Ok(1.0 / g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::classify_scenario;
    use crate::predictor::ConstantHazardPredictor;

    const LP: f64 = 0.2;
    const LT: f64 = 0.1;

    // independent closed forms for the constant-hazard model
    fn pi(s: f64, r: f64) -> f64 {
        LP / (LP + LT) * (1.0 - (-(LP + LT) * (s - r)).exp())
    }
    fn surv(s: f64, r: f64) -> f64 {
        (-(LP + LT) * (s - r)).exp()
    }

    fn window() -> EvaluationWindow {
        EvaluationWindow::new(1.0, 3.0).unwrap()
    }

    fn record(delta: EventKind, t_last_neg: f64, endpoint: f64) -> SubjectRecord {
        SubjectRecord {
            id: "w".into(),
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

    fn weights_for(delta: EventKind, t_last_neg: f64, endpoint: f64) -> WeightPair {
        let predictor = ConstantHazardPredictor::new(LP, LT);
        model_weights(
            &record(delta, t_last_neg, endpoint),
            &window(),
            &predictor,
            &SubjectProfile::baseline(),
        )
        .unwrap()
    }

    #[test]
    fn absolute_case_weight_is_one() {
        let w = weights_for(EventKind::Progression, 1.5, 3.0);
        assert_eq!(w.scenario, ScenarioCode::S3a);
        assert_eq!(w.case_w, 1.0);
        assert_eq!(w.control_w, 0.0);
    }

    #[test]
    fn absolute_control_weight_is_one() {
        for delta in [EventKind::Progression, EventKind::Treatment, EventKind::Censored] {
            let w = weights_for(delta, 4.5, 6.0);
            assert_eq!(w.case_w, 0.0);
            assert_eq!(w.control_w, 1.0);
        }
    }

    #[test]
    fn s2b_weights_match_closed_form() {
        let w = weights_for(EventKind::Treatment, 2.0, 5.0);
        assert_eq!(w.scenario, ScenarioCode::S2b);
        let want = pi(4.0, 2.0);
        assert!((w.case_w - want).abs() < 1e-12, "{} vs {want}", w.case_w);
        assert!((w.control_w - (1.0 - want)).abs() < 1e-12);
        // frozen oracle value
        assert!((want - 0.300_792_242_603).abs() < 1e-10);
    }

    #[test]
    fn s1a_weights_match_closed_form() {
        let w = weights_for(EventKind::Progression, 0.5, 2.0);
        assert_eq!(w.scenario, ScenarioCode::S1a);
        let want = (pi(2.0, 0.5) - pi(1.0, 0.5)) / pi(2.0, 0.5);
        assert!((w.case_w - want).abs() < 1e-12);
        assert_eq!(w.control_w, 0.0);
        // frozen oracle values: pi(2|0.5) and pi(1|0.5)
        assert!((pi(2.0, 0.5) - 0.241_581_232_252).abs() < 1e-10);
        assert!((pi(1.0, 0.5) - 0.092_861_349_050).abs() < 1e-10);
        assert!((want - 0.615_610_251_739).abs() < 1e-9);
    }

    #[test]
    fn s3c_control_weight_is_survival() {
        let w = weights_for(EventKind::Censored, 1.5, 3.0);
        assert_eq!(w.scenario, ScenarioCode::S3c);
        let want = surv(4.0, 1.5);
        assert!((w.control_w - want).abs() < 1e-12);
        assert!((want - 0.472_366_552_741).abs() < 1e-10);
        // case weight for 3c is the window risk
        assert!((w.case_w - pi(4.0, 1.5)).abs() < 1e-12);
    }

    #[test]
    fn s1b_case_weight_is_risk_difference() {
        let w = weights_for(EventKind::Treatment, 0.5, 2.5);
        assert_eq!(w.scenario, ScenarioCode::S1b);
        let want = pi(2.5, 0.5) - pi(1.0, 0.5);
        assert!((w.case_w - want).abs() < 1e-12);
        assert_eq!(w.control_w, 0.0);
    }

    #[test]
    fn s2a_weights_are_complementary() {
        let w = weights_for(EventKind::Progression, 2.0, 5.5);
        assert_eq!(w.scenario, ScenarioCode::S2a);
        let case = pi(4.0, 2.0) / pi(5.5, 2.0);
        let control = (pi(5.5, 2.0) - pi(4.0, 2.0)) / pi(5.5, 2.0);
        assert!((w.case_w - case).abs() < 1e-12);
        assert!((w.control_w - control).abs() < 1e-12);
        assert!((w.case_w + w.control_w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn s5_weights_leave_sub_unit_mass() {
        let w = weights_for(EventKind::Censored, 0.5, 6.0);
        assert_eq!(w.scenario, ScenarioCode::S5c);
        let case = pi(4.0, 0.5) - pi(1.0, 0.5);
        let control = 1.0 - pi(4.0, 0.5);
        assert!((w.case_w - case).abs() < 1e-12);
        assert!((w.control_w - control).abs() < 1e-12);
        let mass = w.case_w + w.control_w;
        assert!((mass - (1.0 - pi(1.0, 0.5))).abs() < 1e-12);
        assert!(mass <= 1.0);
    }

    #[test]
    fn s5a_mass_bounded_by_one() {
        let w = weights_for(EventKind::Progression, 0.5, 6.0);
        assert_eq!(w.scenario, ScenarioCode::S5a);
        let want_case = (pi(4.0, 0.5) - pi(1.0, 0.5)) / pi(6.0, 0.5);
        let want_control = (pi(6.0, 0.5) - pi(4.0, 0.5)) / pi(6.0, 0.5);
        assert!((w.case_w - want_case).abs() < 1e-12);
        assert!((w.control_w - want_control).abs() < 1e-12);
        assert!(w.case_w + w.control_w <= 1.0 + 1e-12);
    }

    #[test]
    fn degenerate_denominator_zeroes_weight() {
        // a zero-rate predictor makes every ratio denominator vanish
        let predictor = ConstantHazardPredictor::new(0.0, 0.0);
        let w = model_weights(
            &record(EventKind::Progression, 0.5, 2.0),
            &window(),
            &predictor,
            &SubjectProfile::baseline(),
        )
        .unwrap();
        assert_eq!(w.case_w, 0.0);
        assert!(w.degenerate);
    }

    #[test]
    fn excluded_records_get_zero_weights() {
        let w = weights_for(EventKind::Censored, 0.2, 0.8);
        assert_eq!(w.scenario, ScenarioCode::Excluded);
        assert_eq!((w.case_w, w.control_w), (0.0, 0.0));
    }

    #[test]
    fn km_no_censoring_is_flat_one() {
        let records = vec![
            record(EventKind::Progression, 1.2, 2.4),
            record(EventKind::Treatment, 1.0, 3.1),
        ];
        let g = km_censoring_survival(&records, 1.0).unwrap();
        for s in [1.0, 2.5, 4.0, 10.0] {
            assert_eq!(g.eval(s), 1.0);
        }
    }

    #[test]
    fn km_single_jump_hand_computed() {
        // four at risk at t=1, one censored at 2, others end later
        let records = vec![
            record(EventKind::Censored, 1.0, 2.0),
            record(EventKind::Progression, 2.0, 3.0),
            record(EventKind::Treatment, 1.5, 3.5),
            record(EventKind::Censored, 2.0, 5.0),
        ];
        let g = km_censoring_survival(&records, 1.0).unwrap();
        assert_eq!(g.eval(1.5), 1.0);
        assert!((g.eval(3.0) - 0.75).abs() < 1e-15);
        let case = record(EventKind::Progression, 2.0, 3.0);
        let w = ipcw_case_weight(&case, &g, &window()).unwrap();
        assert!((w - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn km_right_continuity_before_late_jump() {
        let records = vec![
            record(EventKind::Progression, 1.2, 2.4),
            record(EventKind::Censored, 1.0, 6.0),
        ];
        let g = km_censoring_survival(&records, 1.0).unwrap();
        assert_eq!(g.eval(5.999), 1.0);
        assert!(g.eval(6.0) < 1.0);
    }

    #[test]
    fn km_ties_events_precede_censorings() {
        // event and censoring at the same time: the event leaves first,
        // so the censoring jump sees 2 at risk out of 3 remaining
        let records = vec![
            record(EventKind::Progression, 1.1, 3.0),
            record(EventKind::Censored, 1.2, 3.0),
            record(EventKind::Censored, 1.0, 8.0),
        ];
        let g = km_censoring_survival(&records, 1.0).unwrap();
        assert!((g.eval(3.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn km_excludes_jumps_at_landmark() {
        let records = vec![
            record(EventKind::Censored, 0.5, 1.0), // at the landmark: no jump
            record(EventKind::Censored, 1.0, 2.0),
            record(EventKind::Progression, 2.0, 4.0),
        ];
        let g = km_censoring_survival(&records, 1.0).unwrap();
        assert_eq!(g.eval(1.5), 1.0);
        assert!((g.eval(2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn km_needs_nonempty_risk_set() {
        let records = vec![record(EventKind::Censored, 0.1, 0.6)];
        assert!(matches!(
            km_censoring_survival(&records, 1.0),
            Err(Error::EmptyRiskSet)
        ));
    }

    #[test]
    fn ipcw_weight_is_one_without_jumps() {
        let records = vec![record(EventKind::Progression, 1.5, 3.0)];
        let g = km_censoring_survival(&records, 1.0).unwrap();
        let w = ipcw_case_weight(&records[0], &g, &window()).unwrap();
        assert_eq!(w, 1.0);
    }

    #[test]
    fn ipcw_rejects_non_absolute_case() {
        let records = vec![record(EventKind::Progression, 1.5, 4.5)];
        let g = km_censoring_survival(&records, 1.0).unwrap();
        assert!(matches!(
            ipcw_case_weight(&records[0], &g, &window()),
            Err(Error::NotAbsoluteCase)
        ));
        // straddling the window start also disqualifies
        let straddle = record(EventKind::Progression, 0.5, 2.0);
        assert!(matches!(
            ipcw_case_weight(&straddle, &g, &window()),
            Err(Error::NotAbsoluteCase)
        ));
    }

    #[test]
    fn ipcw_zero_survival_is_reported() {
        // the only remaining subject censors before the case endpoint
        let records = vec![
            record(EventKind::Censored, 1.0, 2.0),
            record(EventKind::Progression, 1.5, 3.0),
        ];
        let g = km_censoring_survival(&records, 1.0).unwrap();
        // at time 2 the case (endpoint 3) is still at risk: 1 censored of 1 at
        // risk after the walk passes it? -- order: endpoints 2.0 (censor, 2 at
        // risk incl. the case) -> survival 1/2, not zero. Build a true zero:
        let records = vec![
            record(EventKind::Censored, 1.0, 2.0),
            record(EventKind::Censored, 1.0, 2.0),
            record(EventKind::Progression, 1.5, 3.0),
        ];
        let g2 = km_censoring_survival(&records[..2], 1.0).unwrap();
        assert_eq!(g2.eval(3.0), 0.0);
        let case = record(EventKind::Progression, 1.5, 3.0);
        assert!(matches!(
            ipcw_case_weight(&case, &g2, &window()),
            Err(Error::ZeroSurvival)
        ));
        let _ = g;
    }

    #[test]
    fn weights_stay_in_unit_interval_across_scenarios() {
        let predictor = ConstantHazardPredictor::new(0.7, 0.4);
        let w = window();
        let scenarios = [
            (EventKind::Progression, 0.5, 2.0),
            (EventKind::Treatment, 0.5, 2.0),
            (EventKind::Censored, 0.5, 2.0),
            (EventKind::Progression, 1.5, 5.0),
            (EventKind::Treatment, 1.5, 5.0),
            (EventKind::Censored, 1.5, 5.0),
            (EventKind::Progression, 1.5, 3.0),
            (EventKind::Treatment, 1.5, 3.0),
            (EventKind::Censored, 1.5, 3.0),
            (EventKind::Progression, 4.5, 6.0),
            (EventKind::Progression, 0.5, 6.0),
            (EventKind::Treatment, 0.5, 6.0),
            (EventKind::Censored, 0.5, 6.0),
        ];
        for (delta, last_neg, end) in scenarios {
            let pair = model_weights(
                &record(delta, last_neg, end),
                &w,
                &predictor,
                &SubjectProfile::baseline(),
            )
            .unwrap();
            assert!((0.0..=1.0).contains(&pair.case_w), "{pair:?}");
            assert!((0.0..=1.0).contains(&pair.control_w), "{pair:?}");
        }
        let _ = classify_scenario(&record(EventKind::Censored, 0.5, 2.0), &w);
    }
}
