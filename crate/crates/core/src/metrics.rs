//! Time-dependent accuracy metrics: ROC/AUC, Brier score, and EPCE under
//! the model-based, IPCW, naive, and censoring-free reference approaches.

use serde::{Deserialize, Serialize};

use crate::cohort::{EvaluationWindow, EventKind, RiskSet};
use crate::error::{Error, Result};
use crate::model::SubjectProfile;
use crate::predictor::RiskPredictor;
use crate::quad::QuadratureRule;
use crate::weights::{is_absolute_case, CensoringSurvival, WeightPair};

/// A subject's predicted window risk Pi(t+dt | t).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictedRisk {
    pub id: String,
    pub pi: f64,
}

/// True (latent) event times; available for simulated cohorts only.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrueOutcome {
    pub t_prg_star: f64,
    pub t_trt_star: f64,
}

/// ROC curve over the full threshold grid, thresholds descending so the
/// points run from (0, 0) to (1, 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub sens: Vec<f64>,
    pub one_minus_spec: Vec<f64>,
}

/// Evaluation approach for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Model,
    Ipcw,
    Naive,
    Reference,
}

/// Counters for subjects that could not contribute in the usual way.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Ratio weights whose denominator was effectively zero.
    pub degenerate_denominators: usize,
    /// IPCW subjects dropped because the censoring survival hit zero.
    pub dropped_zero_g: usize,
    /// EPCE subjects excluded for a zero probability contribution.
    pub epce_excluded: usize,
}

/// One approach's metric estimates on one dataset/window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub window: EvaluationWindow,
    pub approach: Approach,
    pub auc: Option<f64>,
    pub brier: Option<f64>,
    pub epce: Option<f64>,
    pub n_t: usize,
    pub case_mass: f64,
    pub control_mass: f64,
    pub diagnostics: Diagnostics,
    /// Why a metric is absent, when one is.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

/// Risks paired with case/control weights for one approach; the shared
/// input of the sensitivity/specificity/ROC machinery.
#[derive(Debug, Clone)]
pub struct LabeledRisks {
    pub pis: Vec<f64>,
    pub case_w: Vec<f64>,
    pub control_w: Vec<f64>,
}

impl LabeledRisks {
    pub fn case_mass(&self) -> f64 {
        self.case_w.iter().sum()
    }

    pub fn control_mass(&self) -> f64 {
        self.control_w.iter().sum()
    }

    /// Weighted fraction of case mass with predicted risk >= c.
    pub fn sensitivity(&self, c: f64) -> Result<f64> {
        let total = self.case_mass();
        if total <= 0.0 {
            return Err(Error::NoCaseMass);
        }
        let hit: f64 = self
            .pis
            .iter()
            .zip(&self.case_w)
            .filter(|(pi, _)| **pi >= c)
            .map(|(_, w)| w)
            .sum();
        Ok(hit / total)
    }

    /// Weighted fraction of control mass with predicted risk < c.
    pub fn specificity(&self, c: f64) -> Result<f64> {
        let total = self.control_mass();
        if total <= 0.0 {
            return Err(Error::NoControlMass);
        }
        let below: f64 = self
            .pis
            .iter()
            .zip(&self.control_w)
            .filter(|(pi, _)| **pi < c)
            .map(|(_, w)| w)
            .sum();
        Ok(below / total)
    }

    /// ROC curve over {0} + unique risks + a sentinel above 1, and the
    /// trapezoidal AUC.
    pub fn roc_and_auc(&self) -> Result<(RocCurve, f64)> {
        if self.case_mass() <= 0.0 {
            return Err(Error::NoCaseMass);
        }
        if self.control_mass() <= 0.0 {
            return Err(Error::NoControlMass);
        }
        let mut grid: Vec<f64> = self.pis.clone();
        grid.push(0.0);
        grid.sort_by(|a, b| b.partial_cmp(a).expect("finite risks"));
        grid.dedup();

        let sentinel = 1.0 + f64::EPSILON;
        let mut thresholds = Vec::with_capacity(grid.len() + 1);
        let mut sens = Vec::with_capacity(grid.len() + 1);
        let mut one_minus_spec = Vec::with_capacity(grid.len() + 1);
        thresholds.push(sentinel);
        sens.push(0.0);
        one_minus_spec.push(0.0);
        for &c in &grid {
            thresholds.push(c);
            sens.push(self.sensitivity(c)?);
            one_minus_spec.push(1.0 - self.specificity(c)?);
        }
        // the zero threshold catches everything
        let last = thresholds.len() - 1;
        sens[last] = 1.0;
        one_minus_spec[last] = 1.0;

        let mut auc = 0.0;
        for k in 1..thresholds.len() {
            auc += (one_minus_spec[k] - one_minus_spec[k - 1]) * (sens[k] + sens[k - 1]) / 2.0;
        }
        Ok((
            RocCurve {
                thresholds,
                sens,
                one_minus_spec,
            },
            auc,
        ))
    }
}

/// Model-based labeling: every risk-set member contributes with its
/// scenario weights.
pub fn model_labeled(risks: &[f64], weights: &[WeightPair]) -> LabeledRisks {
    assert_eq!(risks.len(), weights.len());
    LabeledRisks {
        pis: risks.to_vec(),
        case_w: weights.iter().map(|w| w.case_w).collect(),
        control_w: weights.iter().map(|w| w.control_w).collect(),
    }
}

/// IPCW labeling: absolute cases weighted by the inverse censoring
/// survival at their detection time, absolute controls unweighted (the
/// uniform control weights cancel). Returns the number of cases dropped
/// for a zero censoring survival.
pub fn ipcw_labeled(
    riskset: &RiskSet,
    risks: &[f64],
    censoring: &CensoringSurvival,
) -> (LabeledRisks, usize) {
    assert_eq!(risks.len(), riskset.members.len());
    let window = &riskset.window;
    let mut case_w = vec![0.0; risks.len()];
    let mut control_w = vec![0.0; risks.len()];
    let mut dropped = 0;
    for (i, (record, scenario)) in riskset.members.iter().enumerate() {
        if is_absolute_case(record, window) {
            let g = censoring.eval(record.endpoint());
            if g > 0.0 {
                case_w[i] = 1.0 / g;
            } else {
                dropped += 1;
            }
        } else if scenario.is_absolute_control() {
            control_w[i] = 1.0;
        }
    }
    (
        LabeledRisks {
            pis: risks.to_vec(),
            case_w,
            control_w,
        },
        dropped,
    )
}

/// Naive labeling: the observed progression time decides case status and
/// anyone observed past the window end is a control; interval censoring
/// is ignored.
pub fn naive_labeled(riskset: &RiskSet, risks: &[f64]) -> LabeledRisks {
    assert_eq!(risks.len(), riskset.members.len());
    let window = &riskset.window;
    let end = window.end();
    let mut case_w = vec![0.0; risks.len()];
    let mut control_w = vec![0.0; risks.len()];
    for (i, (record, _)) in riskset.members.iter().enumerate() {
        let endpoint = record.endpoint();
        let is_case = record.delta == EventKind::Progression
            && endpoint >= window.t
            && endpoint < end;
        if is_case {
            case_w[i] = 1.0;
        } else if endpoint >= end {
            control_w[i] = 1.0;
        }
    }
    LabeledRisks {
        pis: risks.to_vec(),
        case_w,
        control_w,
    }
}

/// Censoring-free labeling from the true event times. `truths` and
/// `risks` cover the whole cohort; subjects with either true event before
/// t fall outside the reference risk set. Returns the labeling and the
/// reference risk-set size.
pub fn reference_labeled(
    truths: &[TrueOutcome],
    risks: &[f64],
    window: &EvaluationWindow,
) -> (LabeledRisks, usize) {
    assert_eq!(risks.len(), truths.len());
    let end = window.end();
    let mut pis = Vec::new();
    let mut case_w = Vec::new();
    let mut control_w = Vec::new();
    for (truth, &pi) in truths.iter().zip(risks) {
        let first = truth.t_prg_star.min(truth.t_trt_star);
        if first < window.t {
            continue;
        }
        let is_case = truth.t_prg_star >= window.t
            && truth.t_prg_star < end
            && truth.t_prg_star < truth.t_trt_star;
        pis.push(pi);
        case_w.push(if is_case { 1.0 } else { 0.0 });
        control_w.push(if !is_case && first >= end { 1.0 } else { 0.0 });
    }
    let n_t = pis.len();
    (
        LabeledRisks {
            pis,
            case_w,
            control_w,
        },
        n_t,
    )
}

pub fn sensitivity_model(risks: &[f64], weights: &[WeightPair], c: f64) -> Result<f64> {
    model_labeled(risks, weights).sensitivity(c)
}

pub fn specificity_model(risks: &[f64], weights: &[WeightPair], c: f64) -> Result<f64> {
    model_labeled(risks, weights).specificity(c)
}

pub fn sensitivity_ipcw(
    riskset: &RiskSet,
    risks: &[f64],
    censoring: &CensoringSurvival,
    c: f64,
) -> Result<f64> {
    let (labeled, _) = ipcw_labeled(riskset, risks, censoring);
    labeled.sensitivity(c).map_err(|e| match e {
        Error::NoCaseMass => Error::NoAbsoluteCases,
        other => other,
    })
}

pub fn specificity_ipcw(riskset: &RiskSet, risks: &[f64], c: f64) -> Result<f64> {
    assert_eq!(risks.len(), riskset.members.len());
    let mut below = 0usize;
    let mut total = 0usize;
    for ((_, scenario), &pi) in riskset.members.iter().zip(risks) {
        if scenario.is_absolute_control() {
            total += 1;
            if pi < c {
                below += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::NoAbsoluteControls);
    }
    Ok(below as f64 / total as f64)
}

/// Model-based Brier score: squared errors against the weighted case and
/// control masses, divided by the risk-set size.
pub fn brier_model(riskset: &RiskSet, risks: &[f64], weights: &[WeightPair]) -> Result<f64> {
    assert_eq!(risks.len(), riskset.members.len());
    assert_eq!(weights.len(), riskset.members.len());
    let n_t = riskset.n_t();
    if n_t == 0 {
        return Err(Error::EmptyRiskSet);
    }
    let mut acc = 0.0;
    for (&pi, w) in risks.iter().zip(weights) {
        acc += (1.0 - pi) * (1.0 - pi) * w.case_w + pi * pi * w.control_w;
    }
    Ok(acc / n_t as f64)
}

/// IPCW Brier score: absolute cases weighted by 1/G(T+ | t), absolute
/// controls by 1/G(t+dt | t), divided by the risk-set size. Returns the
/// score and the count of subjects dropped for zero censoring survival.
pub fn brier_ipcw(
    riskset: &RiskSet,
    risks: &[f64],
    censoring: &CensoringSurvival,
) -> Result<(f64, usize)> {
    assert_eq!(risks.len(), riskset.members.len());
    let n_t = riskset.n_t();
    if n_t == 0 {
        return Err(Error::EmptyRiskSet);
    }
    let window = &riskset.window;
    let g_end = censoring.eval(window.end());
    let mut acc = 0.0;
    let mut dropped = 0usize;
    for ((record, scenario), &pi) in riskset.members.iter().zip(risks) {
        if is_absolute_case(record, window) {
            let g = censoring.eval(record.endpoint());
            if g > 0.0 {
                acc += (1.0 - pi) * (1.0 - pi) / g;
            } else {
                dropped += 1;
            }
        } else if scenario.is_absolute_control() {
            if g_end > 0.0 {
                acc += pi * pi / g_end;
            } else {
                dropped += 1;
            }
        }
    }
    Ok((acc / n_t as f64, dropped))
}

/// Output of the naive evaluation.
#[derive(Debug, Clone)]
pub struct NaiveMetrics {
    pub roc: RocCurve,
    pub auc: f64,
    pub brier: f64,
    pub n_included: usize,
    pub n_cases: usize,
    pub n_controls: usize,
}

/// Naive AUC and Brier: unweighted over the observed cases/controls, with
/// the Brier score divided by the number of included subjects.
pub fn naive_metrics(riskset: &RiskSet, risks: &[f64]) -> Result<NaiveMetrics> {
    let labeled = naive_labeled(riskset, risks);
    let (roc, auc) = labeled.roc_and_auc()?;
    let n_cases = labeled.case_w.iter().filter(|&&w| w > 0.0).count();
    let n_controls = labeled.control_w.iter().filter(|&&w| w > 0.0).count();
    let n_included = n_cases + n_controls;
    let mut acc = 0.0;
    for i in 0..labeled.pis.len() {
        let pi = labeled.pis[i];
        acc += (1.0 - pi) * (1.0 - pi) * labeled.case_w[i] + pi * pi * labeled.control_w[i];
    }
    Ok(NaiveMetrics {
        roc,
        auc,
        brier: acc / n_included as f64,
        n_included,
        n_cases,
        n_controls,
    })
}

/// Output of the censoring-free reference evaluation.
#[derive(Debug, Clone)]
pub struct ReferenceMetrics {
    pub roc: RocCurve,
    pub auc: f64,
    pub brier: f64,
    pub n_t: usize,
}

/// Reference AUC and Brier from the true event times (no censoring);
/// Brier divided by the reference risk-set size.
pub fn reference_metrics(
    truths: &[TrueOutcome],
    risks: &[f64],
    window: &EvaluationWindow,
) -> Result<ReferenceMetrics> {
    let (labeled, n_t) = reference_labeled(truths, risks, window);
    if n_t == 0 {
        return Err(Error::EmptyRiskSet);
    }
    let (roc, auc) = labeled.roc_and_auc()?;
    let mut acc = 0.0;
    for i in 0..labeled.pis.len() {
        let pi = labeled.pis[i];
        acc += (1.0 - pi) * (1.0 - pi) * labeled.case_w[i] + pi * pi * labeled.control_w[i];
    }
    Ok(ReferenceMetrics {
        roc,
        auc,
        brier: acc / n_t as f64,
        n_t,
    })
}

/// EPCE estimate with its bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct EpceEstimate {
    pub value: f64,
    pub n_t: usize,
    pub n_contributing: usize,
    pub n_excluded: usize,
}

/// Model-based EPCE over the risk set.
///
/// Each subject contributes -log p with p built from the interval factor
/// F1 (the printed time-integral of the conditional incidence over the
/// risk interval clipped to the window) and/or the survival factor
/// F2 = S(t+dt | t). Subjects whose indicators are both zero, or whose
/// p is non-positive, are excluded and counted.
pub fn epce_model(
    riskset: &RiskSet,
    predictor: &dyn RiskPredictor,
    profiles: &[SubjectProfile],
) -> Result<EpceEstimate> {
    assert_eq!(profiles.len(), riskset.members.len());
    let n_t = riskset.n_t();
    if n_t == 0 {
        return Err(Error::EmptyRiskSet);
    }
    let window = &riskset.window;
    let t = window.t;
    let end = window.end();

    let mut contributions: Vec<f64> = Vec::with_capacity(n_t);
    let mut excluded = 0usize;
    for ((record, _), profile) in riskset.members.iter().zip(profiles) {
        let endpoint = record.endpoint();
        let t1 = record.t_last_neg.max(t);
        let t2 = match record.delta {
            EventKind::Progression | EventKind::Treatment => endpoint.min(end),
            EventKind::Censored => end,
        };
        let d1 = record.t_last_neg <= end && endpoint >= t;
        let d2 = record.t_last_neg >= end && record.delta == EventKind::Censored;

        let mut p = 0.0;
        if d1 && t2 > t1 {
            p += interval_factor(predictor, profile, t, t1, t2)?;
        }
        if d2 {
            p += predictor.surv(profile, end, t)?;
        }
        if p > 0.0 {
            contributions.push(-p.ln());
        } else {
            excluded += 1;
        }
    }
    if contributions.is_empty() {
        return Err(Error::AllContributionsDegenerate);
    }
    let n_contributing = contributions.len();
    Ok(EpceEstimate {
        value: contributions.iter().sum::<f64>() / n_contributing as f64,
        n_t,
        n_contributing,
        n_excluded: excluded,
    })
}

/// F1 = int_{t1}^{t2} [cif(s | t) - cif(t1 | t)] ds, by 15-point
/// Gauss-Kronrod with one panel per year and a single batched predictor
/// sweep.
fn interval_factor(
    predictor: &dyn RiskPredictor,
    profile: &SubjectProfile,
    t: f64,
    t1: f64,
    t2: f64,
) -> Result<f64> {
    let n_panels = ((t2 - t1).ceil() as usize).max(1);
    let width = (t2 - t1) / n_panels as f64;
    let base = QuadratureRule::nodes_and_weights();
    let mut positions = Vec::with_capacity(n_panels * base.len() + 1);
    let mut weights = Vec::with_capacity(n_panels * base.len());
    for k in 0..n_panels {
        let a = t1 + width * k as f64;
        let b = if k + 1 == n_panels { t2 } else { a + width };
        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for &(x, w) in &base {
            positions.push(center + half * x);
            weights.push(w * half);
        }
    }
    positions.push(t1);
    let cifs = predictor.cif_batch(profile, t, &positions)?;
    let cif_t1 = *cifs.last().expect("t1 query present");
    let mut acc = 0.0;
    for (cif, w) in cifs.iter().zip(&weights) {
        acc += w * cif;
    }
    Ok(acc - (t2 - t1) * cif_t1)
}

/// Reference EPCE from the true event times: F1 is the conditional
/// incidence at min(T_prg*, t+dt) and F2 the conditional survival there.
pub fn epce_reference(
    truths: &[TrueOutcome],
    predictor: &dyn RiskPredictor,
    profiles: &[SubjectProfile],
    window: &EvaluationWindow,
) -> Result<EpceEstimate> {
    assert_eq!(profiles.len(), truths.len());
    let t = window.t;
    let end = window.end();
    let mut n_t = 0usize;
    let mut contributions: Vec<f64> = Vec::new();
    let mut excluded = 0usize;
    for (truth, profile) in truths.iter().zip(profiles) {
        if truth.t_prg_star.min(truth.t_trt_star) < t {
            continue;
        }
        n_t += 1;
        let t_tilde = truth.t_prg_star.min(end);
        let d1 = truth.t_prg_star >= t
            && truth.t_prg_star < end
            && truth.t_prg_star < truth.t_trt_star;
        let d2 = truth.t_prg_star >= truth.t_trt_star.min(end);
        let mut p = 0.0;
        if d1 {
            p += predictor.cif(profile, t_tilde, t)?;
        }
        if d2 {
            p += predictor.surv(profile, t_tilde, t)?;
        }
        if p > 0.0 {
            contributions.push(-p.ln());
        } else {
            excluded += 1;
        }
    }
    if n_t == 0 {
        return Err(Error::EmptyRiskSet);
    }
    if contributions.is_empty() {
        return Err(Error::AllContributionsDegenerate);
    }
    let n_contributing = contributions.len();
    Ok(EpceEstimate {
        value: contributions.iter().sum::<f64>() / n_contributing as f64,
        n_t,
        n_contributing,
        n_excluded: excluded,
    })
}
