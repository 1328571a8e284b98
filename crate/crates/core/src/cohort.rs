//! Subject records, evaluation windows, and the scenario taxonomy that
//! drives case/control weighting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed event type. Encoded 0/1/2 in the file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Censored = 0,
    Progression = 1,
    Treatment = 2,
}

impl EventKind {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Censored),
            1 => Some(Self::Progression),
            2 => Some(Self::Treatment),
            _ => None,
        }
    }
}

/// One subject's observed data: the risk interval, the endpoint, baseline
/// covariates, and the longitudinal marker series (time, log2(PSA+1)).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: String,
    /// Last progression-free biopsy time (years).
    pub t_last_neg: f64,
    /// Positive biopsy time; present iff `delta == Progression`.
    pub t_pos: Option<f64>,
    /// Treatment initiation time; present iff `delta == Treatment`.
    pub t_trt: Option<f64>,
    /// Censoring time; present iff `delta == Censored`.
    pub t_cen: Option<f64>,
    pub delta: EventKind,
    /// Age at baseline (years).
    pub age: f64,
    /// PSA density at baseline (ng/ml^2).
    pub density: f64,
    /// (time, log2(PSA+1)) pairs, strictly increasing in time.
    pub psa: Vec<(f64, f64)>,
}

impl SubjectRecord {
    /// The observed endpoint time matching `delta`.
    ///
    /// Only meaningful on validated records; falls back across the
    /// endpoint fields otherwise.
    pub fn endpoint(&self) -> f64 {
        match self.delta {
            EventKind::Progression => self.t_pos,
            EventKind::Treatment => self.t_trt,
            EventKind::Censored => self.t_cen,
        }
        .unwrap_or(f64::NAN)
    }

    pub fn validate(self) -> Result<Self> {
        let (expected, field) = match self.delta {
            EventKind::Progression => (&self.t_pos, "t_pos"),
            EventKind::Treatment => (&self.t_trt, "t_trt"),
            EventKind::Censored => (&self.t_cen, "t_cen"),
        };
        if expected.is_none() {
            return Err(Error::MismatchedEndpoint { field });
        }
        let present = [
            self.t_pos.is_some(),
            self.t_trt.is_some(),
            self.t_cen.is_some(),
        ]
        .iter()
        .filter(|&&p| p)
        .count();
        if present != 1 {
            return Err(Error::MismatchedEndpoint { field: "endpoint" });
        }
        let endpoint = self.endpoint();
        if self.t_last_neg < 0.0 {
            return Err(Error::NegativeTime {
                field: "t_last_neg",
            });
        }
        if endpoint < 0.0 {
            return Err(Error::NegativeTime { field });
        }
        if self.t_last_neg >= endpoint {
            return Err(Error::NonMonotoneTimes {
                field: "t_last_neg",
            });
        }
        for pair in self.psa.windows(2) {
            if pair[0].0 >= pair[1].0 {
                return Err(Error::NonMonotoneTimes { field: "psa" });
            }
        }
        if self.psa.iter().any(|&(t, _)| t > endpoint) {
            return Err(Error::NonMonotoneTimes { field: "psa" });
        }
        Ok(self)
    }
}

/// Prediction window [t, t + dt). Comparisons against the window follow
/// the half-open convention: a time equal to `t` counts as >= t, a time
/// equal to `t + dt` counts as >= t + dt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationWindow {
    pub t: f64,
    pub dt: f64,
}

impl EvaluationWindow {
    pub fn new(t: f64, dt: f64) -> Result<Self> {
        if t < 0.0 || dt <= 0.0 || !t.is_finite() || !dt.is_finite() {
            return Err(Error::InvalidWindow);
        }
        Ok(Self { t, dt })
    }

    pub fn end(&self) -> f64 {
        self.t + self.dt
    }
}

/// Position of a subject's risk interval relative to the window.
///
/// Digit: 1 = interval straddles the window start, 2 = starts inside and
/// runs past the end, 3 = fully inside, 4 = entirely after the window,
/// 5 = spans the whole window. Letter: endpoint type (a = detected
/// progression, b = treatment, c = censoring). `Excluded` marks follow-up
/// ending before the window starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioCode {
    S1a,
    S1b,
    S1c,
    S2a,
    S2b,
    S2c,
    S3a,
    S3b,
    S3c,
    S4a,
    S4b,
    S4c,
    S5a,
    S5b,
    S5c,
    Excluded,
}

impl ScenarioCode {
    pub fn is_excluded(self) -> bool {
        self == Self::Excluded
    }

    /// Entirely-after-window group (4a/4b/4c): the absolute controls.
    pub fn is_absolute_control(self) -> bool {
        matches!(self, Self::S4a | Self::S4b | Self::S4c)
    }

    /// Risk interval fully inside the window with detected progression:
    /// the absolute cases.
    pub fn is_absolute_case(self) -> bool {
        self == Self::S3a
    }
}

pub fn classify_scenario(record: &SubjectRecord, window: &EvaluationWindow) -> ScenarioCode {
    let start = window.t;
    let end = window.end();
    let last_neg = record.t_last_neg;
    let endpoint = record.endpoint();

    if endpoint < start {
        return ScenarioCode::Excluded;
    }
    let group = if last_neg >= end {
        4
    } else if last_neg >= start {
        if endpoint < end {
            3
        } else {
            2
        }
    } else if endpoint < end {
        1
    } else {
        5
    };
    use EventKind::*;
    use ScenarioCode::*;
    match (group, record.delta) {
        (1, Progression) => S1a,
        (1, Treatment) => S1b,
        (1, Censored) => S1c,
        (2, Progression) => S2a,
        (2, Treatment) => S2b,
        (2, Censored) => S2c,
        (3, Progression) => S3a,
        (3, Treatment) => S3b,
        (3, Censored) => S3c,
        (4, Progression) => S4a,
        (4, Treatment) => S4b,
        (4, Censored) => S4c,
        (5, Progression) => S5a,
        (5, Treatment) => S5b,
        (5, Censored) => S5c,
        _ => unreachable!(),
    }
}

/// Subjects still under observation at the window start, with their
/// scenario codes.
#[derive(Debug, Clone)]
pub struct RiskSet {
    pub window: EvaluationWindow,
    pub members: Vec<(SubjectRecord, ScenarioCode)>,
}

impl RiskSet {
    pub fn n_t(&self) -> usize {
        self.members.len()
    }
}

pub fn build_risk_set(records: &[SubjectRecord], window: &EvaluationWindow) -> Result<RiskSet> {
    let members: Vec<(SubjectRecord, ScenarioCode)> = records
        .iter()
        .filter(|r| r.endpoint() >= window.t)
        .map(|r| (r.clone(), classify_scenario(r, window)))
        .collect();
    if members.is_empty() {
        return Err(Error::EmptyRiskSet);
    }
    debug_assert!(members.iter().all(|(_, s)| !s.is_excluded()));
    Ok(RiskSet {
        window: *window,
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(
        delta: EventKind,
        t_last_neg: f64,
        endpoint: f64,
    ) -> SubjectRecord {
        SubjectRecord {
            id: "x".into(),
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

    fn window() -> EvaluationWindow {
        EvaluationWindow::new(1.0, 3.0).unwrap()
    }

    #[test]
    fn validate_accepts_consistent_record() {
        let r = record(EventKind::Progression, 1.2, 2.1);
        assert!(r.validate().is_ok());
    }

    #[test]
    fn validate_rejects_missing_endpoint() {
        let mut r = record(EventKind::Progression, 1.2, 2.1);
        r.t_pos = None;
        assert!(matches!(
            r.validate(),
            Err(Error::MismatchedEndpoint { .. })
        ));
    }

    #[test]
    fn validate_rejects_extra_endpoint() {
        let mut r = record(EventKind::Progression, 1.2, 2.1);
        r.t_cen = Some(3.0);
        assert!(matches!(
            r.validate(),
            Err(Error::MismatchedEndpoint { .. })
        ));
    }

    #[test]
    fn validate_rejects_non_monotone_times() {
        let r = record(EventKind::Progression, 3.0, 2.1);
        assert!(matches!(r.validate(), Err(Error::NonMonotoneTimes { .. })));
    }

    #[test]
    fn validate_rejects_negative_time() {
        let r = record(EventKind::Progression, -0.5, 2.1);
        assert!(matches!(r.validate(), Err(Error::NegativeTime { .. })));
    }

    #[test]
    fn validate_rejects_psa_after_endpoint() {
        let mut r = record(EventKind::Censored, 1.0, 4.0);
        r.psa = vec![(0.0, 2.0), (4.5, 2.2)];
        assert!(matches!(r.validate(), Err(Error::NonMonotoneTimes { .. })));
    }

    #[test]
    fn classify_spec_examples() {
        let w = window();
        let cases = [
            (record(EventKind::Progression, 1.5, 3.0), ScenarioCode::S3a),
            (record(EventKind::Progression, 0.8, 2.0), ScenarioCode::S1a),
            (record(EventKind::Censored, 4.2, 5.0), ScenarioCode::S4c),
            (record(EventKind::Censored, 0.4, 0.9), ScenarioCode::Excluded),
        ];
        for (r, want) in cases {
            assert_eq!(classify_scenario(&r, &w), want, "{r:?}");
        }
    }

    #[test]
    fn classify_covers_all_groups() {
        let w = window();
        let grid = [
            (0.5, 2.0, 1),  // straddles start, ends inside
            (1.5, 5.0, 2),  // starts inside, ends after
            (1.5, 3.0, 3),  // fully inside
            (4.5, 6.0, 4),  // entirely after
            (0.5, 5.0, 5),  // spans the window
        ];
        use ScenarioCode::*;
        let expected = [
            [S1a, S1b, S1c],
            [S2a, S2b, S2c],
            [S3a, S3b, S3c],
            [S4a, S4b, S4c],
            [S5a, S5b, S5c],
        ];
        for (i, &(last_neg, end, _)) in grid.iter().enumerate() {
            for (j, delta) in [
                EventKind::Progression,
                EventKind::Treatment,
                EventKind::Censored,
            ]
            .into_iter()
            .enumerate()
            {
                let r = record(delta, last_neg, end);
                assert_eq!(classify_scenario(&r, &w), expected[i][j]);
            }
        }
    }

    #[test]
    fn classify_boundary_ties_are_half_open() {
        let w = window();
        // endpoint exactly at t: included, not Excluded
        let r = record(EventKind::Censored, 0.2, 1.0);
        assert_eq!(classify_scenario(&r, &w), ScenarioCode::S1c);
        // last negative biopsy exactly at t: treated as >= t (group 2/3)
        let r = record(EventKind::Progression, 1.0, 3.0);
        assert_eq!(classify_scenario(&r, &w), ScenarioCode::S3a);
        // endpoint exactly at t+dt: treated as >= t+dt (group 2, not 3)
        let r = record(EventKind::Progression, 1.5, 4.0);
        assert_eq!(classify_scenario(&r, &w), ScenarioCode::S2a);
        // last negative exactly at t+dt: group 4
        let r = record(EventKind::Censored, 4.0, 9.0);
        assert_eq!(classify_scenario(&r, &w), ScenarioCode::S4c);
    }

    #[test]
    fn window_shifted_past_endpoint_excludes() {
        let r = record(EventKind::Progression, 0.5, 2.0);
        for t in [2.1, 3.0, 50.0] {
            let w = EvaluationWindow::new(t, 3.0).unwrap();
            assert_eq!(classify_scenario(&r, &w), ScenarioCode::Excluded);
        }
    }

    #[test]
    fn risk_set_counts_and_tie_rule() {
        let w = window();
        let records = vec![
            record(EventKind::Censored, 0.4, 0.9),
            record(EventKind::Progression, 0.5, 2.0),
            record(EventKind::Censored, 0.5, 1.0), // endpoint exactly t: included
            record(EventKind::Treatment, 2.0, 5.0),
        ];
        let rs = build_risk_set(&records, &w).unwrap();
        assert_eq!(rs.n_t(), 3);
    }

    #[test]
    fn risk_set_empty_errors() {
        let w = window();
        let records = vec![record(EventKind::Censored, 0.1, 0.5)];
        assert!(matches!(
            build_risk_set(&records, &w),
            Err(Error::EmptyRiskSet)
        ));
    }
}
