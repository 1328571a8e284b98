//! Metric evaluation on a loaded dataset for a configured predictor.

use std::collections::BTreeSet;
use std::path::PathBuf;

use icpa_core::cohort::{build_risk_set, EvaluationWindow, RiskSet};
use icpa_core::error::Error;
use icpa_core::metrics::{
    brier_ipcw, brier_model, epce_model, epce_reference, ipcw_labeled, model_labeled,
    naive_metrics, reference_metrics, Approach, Diagnostics, MetricsReport, RocCurve,
};
use icpa_core::model::{ModelParameters, SubjectProfile};
use icpa_core::predictor::{ConstantHazardPredictor, JointModelPredictor, RiskPredictor};
use icpa_core::weights::{km_censoring_survival, model_weights, WeightPair};

use crate::io::Dataset;
use crate::{CliError, PredictorArgs};

/// A resolved predictor plus how it was configured (for reports).
pub enum Predictor {
    Joint(Box<JointModelPredictor>),
    Constant(ConstantHazardPredictor),
}

impl Predictor {
    pub fn as_risk_predictor(&self) -> &dyn RiskPredictor {
        match self {
            Predictor::Joint(p) => p.as_ref(),
            Predictor::Constant(p) => p,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Predictor::Joint(_) => "joint".to_string(),
            Predictor::Constant(p) => format!("constant({}, {})", p.lambda_prg, p.lambda_trt),
        }
    }

    pub fn needs_profiles(&self) -> bool {
        matches!(self, Predictor::Joint(_))
    }
}

pub fn resolve_predictor(args: &PredictorArgs) -> Result<Predictor, CliError> {
    match args.predictor.as_str() {
        "joint" => {
            let mut params = match &args.params {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| {
                        CliError::data(format!("cannot read {}: {e}", path.display()))
                    })?;
                    ModelParameters::from_json(&text)
                        .map_err(|e| CliError::data(e.to_string()))?
                }
                None => ModelParameters::reference(),
            };
            if args.zero_gamma {
                params = params.without_density_effect();
            }
            if let Some(scale) = args.hazard_scale {
                if scale <= 0.0 {
                    return Err(CliError::usage("--hazard-scale must be positive"));
                }
                params = params.with_hazard_scale(scale);
            }
            let predictor =
                JointModelPredictor::new(params).map_err(|e| CliError::data(e.to_string()))?;
            Ok(Predictor::Joint(Box::new(predictor)))
        }
        "constant" => {
            let mut prg = args.rate_prg;
            let mut trt = args.rate_trt;
            if let Some(scale) = args.hazard_scale {
                prg *= scale;
                trt *= scale;
            }
            Ok(Predictor::Constant(ConstantHazardPredictor::new(prg, trt)))
        }
        other => Err(CliError::usage(format!(
            "unknown predictor '{other}' (expected joint or constant)"
        ))),
    }
}

/// Which approaches to compute, parsed from a comma-separated list.
#[derive(Debug, Clone, Copy, Default)]
pub struct ApproachSet {
    pub model: bool,
    pub ipcw: bool,
    pub naive: bool,
    pub reference: bool,
    pub epce: bool,
}

impl ApproachSet {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut set = Self::default();
        let names: BTreeSet<&str> = text.split(',').map(str::trim).collect();
        for name in names {
            match name {
                "model" => set.model = true,
                "ipcw" => set.ipcw = true,
                "naive" => set.naive = true,
                "reference" => set.reference = true,
                "epce" => set.epce = true,
                "" => {}
                other => {
                    return Err(CliError::usage(format!(
                        "unknown approach '{other}' (expected model, ipcw, naive, reference, epce)"
                    )))
                }
            }
        }
        // EPCE is reported inside the model/reference reports
        if set.epce && !set.model && !set.reference {
            set.model = true;
        }
        Ok(set)
    }
}

/// Everything `evaluate` produces for one dataset.
pub struct Evaluation {
    pub reports: Vec<MetricsReport>,
    pub rocs: Vec<(Approach, RocCurve)>,
}

pub fn evaluate_dataset(
    dataset: &Dataset,
    window: EvaluationWindow,
    predictor: &Predictor,
    approaches: ApproachSet,
) -> Result<Evaluation, CliError> {
    if predictor.needs_profiles() && dataset.profiles.is_none() {
        return Err(CliError::usage(
            "the joint predictor requires --profiles (true-profile mode)",
        ));
    }
    if approaches.reference && dataset.truths.is_none() {
        return Err(CliError::usage("the reference approach requires --truth"));
    }

    let rp = predictor.as_risk_predictor();
    let riskset = build_risk_set(&dataset.records, &window).map_err(CliError::from_core)?;

    let profile_index: std::collections::HashMap<&str, usize> = dataset
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();
    let profile_of = |id: &str| -> SubjectProfile {
        match &dataset.profiles {
            Some(profiles) => profiles[profile_index[id]],
            None => SubjectProfile::baseline(),
        }
    };

    let member_profiles: Vec<SubjectProfile> = riskset
        .members
        .iter()
        .map(|(r, _)| profile_of(&r.id))
        .collect();
    let risks: Vec<f64> = riskset
        .members
        .iter()
        .zip(&member_profiles)
        .map(|((_, _), p)| rp.cif(p, window.end(), window.t))
        .collect::<Result<_, _>>()
        .map_err(CliError::from_core)?;

    let mut reports = Vec::new();
    let mut rocs = Vec::new();

    if approaches.model {
        let (report, roc) =
            model_report(&riskset, &risks, rp, &member_profiles, window, approaches.epce)?;
        if let Some(roc) = roc {
            rocs.push((Approach::Model, roc));
        }
        reports.push(report);
    }
    if approaches.ipcw {
        let (report, roc) = ipcw_report(&riskset, &risks, dataset, window)?;
        if let Some(roc) = roc {
            rocs.push((Approach::Ipcw, roc));
        }
        reports.push(report);
    }
    if approaches.naive {
        let (report, roc) = naive_report(&riskset, &risks, window)?;
        if let Some(roc) = roc {
            rocs.push((Approach::Naive, roc));
        }
        reports.push(report);
    }
    if approaches.reference {
        let truths = dataset.truths.as_ref().expect("checked above");
        let all_profiles: Vec<SubjectProfile> = dataset
            .records
            .iter()
            .map(|r| profile_of(&r.id))
            .collect();
        let all_risks: Vec<f64> = all_profiles
            .iter()
            .map(|p| rp.cif(p, window.end(), window.t))
            .collect::<Result<_, _>>()
            .map_err(CliError::from_core)?;
        let (report, roc) = reference_report(
            truths,
            &all_risks,
            rp,
            &all_profiles,
            window,
            approaches.epce,
        )?;
        if let Some(roc) = roc {
            rocs.push((Approach::Reference, roc));
        }
        reports.push(report);
    }

    Ok(Evaluation { reports, rocs })
}

fn note_for(e: &Error) -> Option<String> {
    match e {
        Error::NoCaseMass
        | Error::NoControlMass
        | Error::NoAbsoluteCases
        | Error::NoAbsoluteControls
        | Error::AllContributionsDegenerate => Some(e.to_string()),
        _ => None,
    }
}

fn model_report(
    riskset: &RiskSet,
    risks: &[f64],
    rp: &dyn RiskPredictor,
    profiles: &[SubjectProfile],
    window: EvaluationWindow,
    want_epce: bool,
) -> Result<(MetricsReport, Option<RocCurve>), CliError> {
    let weights: Vec<WeightPair> = riskset
        .members
        .iter()
        .zip(profiles)
        .map(|((r, _), p)| model_weights(r, &window, rp, p))
        .collect::<Result<_, _>>()
        .map_err(CliError::from_core)?;
    let mut diagnostics = Diagnostics {
        degenerate_denominators: weights.iter().filter(|w| w.degenerate).count(),
        ..Default::default()
    };
    let labeled = model_labeled(risks, &weights);
    let mut note = None;
    let (roc, auc) = match labeled.roc_and_auc() {
        Ok((roc, auc)) => (Some(roc), Some(auc)),
        Err(e) => {
            note = note_for(&e).or(Some(e.to_string()));
            (None, None)
        }
    };
    let brier = Some(brier_model(riskset, risks, &weights).map_err(CliError::from_core)?);
    let epce = if want_epce {
        match epce_model(riskset, rp, profiles) {
            Ok(est) => {
                diagnostics.epce_excluded = est.n_excluded;
                Some(est.value)
            }
            Err(e) => {
                note = note.or_else(|| note_for(&e).or(Some(e.to_string())));
                None
            }
        }
    } else {
        None
    };
    Ok((
        MetricsReport {
            window,
            approach: Approach::Model,
            auc,
            brier,
            epce,
            n_t: riskset.n_t(),
            case_mass: labeled.case_mass(),
            control_mass: labeled.control_mass(),
            diagnostics,
            note,
        },
        roc,
    ))
}

fn ipcw_report(
    riskset: &RiskSet,
    risks: &[f64],
    dataset: &Dataset,
    window: EvaluationWindow,
) -> Result<(MetricsReport, Option<RocCurve>), CliError> {
    let censoring =
        km_censoring_survival(&dataset.records, window.t).map_err(CliError::from_core)?;
    let (labeled, dropped) = ipcw_labeled(riskset, risks, &censoring);
    let mut diagnostics = Diagnostics {
        dropped_zero_g: dropped,
        ..Default::default()
    };
    let mut note = None;
    let (roc, auc) = match labeled.roc_and_auc() {
        Ok((roc, auc)) => (Some(roc), Some(auc)),
        Err(Error::NoCaseMass) => {
            note = Some(Error::NoAbsoluteCases.to_string());
            (None, None)
        }
        Err(Error::NoControlMass) => {
            note = Some(Error::NoAbsoluteControls.to_string());
            (None, None)
        }
        Err(e) => return Err(CliError::from_core(e)),
    };
    let (brier, brier_dropped) =
        brier_ipcw(riskset, risks, &censoring).map_err(CliError::from_core)?;
    diagnostics.dropped_zero_g = diagnostics.dropped_zero_g.max(brier_dropped);
    Ok((
        MetricsReport {
            window,
            approach: Approach::Ipcw,
            auc,
            brier: Some(brier),
            epce: None,
            n_t: riskset.n_t(),
            case_mass: labeled.case_mass(),
            control_mass: labeled.control_mass(),
            diagnostics,
            note,
        },
        roc,
    ))
}

fn naive_report(
    riskset: &RiskSet,
    risks: &[f64],
    window: EvaluationWindow,
) -> Result<(MetricsReport, Option<RocCurve>), CliError> {
    match naive_metrics(riskset, risks) {
        Ok(out) => Ok((
            MetricsReport {
                window,
                approach: Approach::Naive,
                auc: Some(out.auc),
                brier: Some(out.brier),
                epce: None,
                n_t: riskset.n_t(),
                case_mass: out.n_cases as f64,
                control_mass: out.n_controls as f64,
                diagnostics: Diagnostics::default(),
                note: None,
            },
            Some(out.roc),
        )),
        Err(e) if note_for(&e).is_some() => Ok((
            MetricsReport {
                window,
                approach: Approach::Naive,
                auc: None,
                brier: None,
                epce: None,
                n_t: riskset.n_t(),
                case_mass: 0.0,
                control_mass: 0.0,
                diagnostics: Diagnostics::default(),
                note: note_for(&e),
            },
            None,
        )),
        Err(e) => Err(CliError::from_core(e)),
    }
}

fn reference_report(
    truths: &[icpa_core::metrics::TrueOutcome],
    all_risks: &[f64],
    rp: &dyn RiskPredictor,
    all_profiles: &[SubjectProfile],
    window: EvaluationWindow,
    want_epce: bool,
) -> Result<(MetricsReport, Option<RocCurve>), CliError> {
    let mut diagnostics = Diagnostics::default();
    let mut note = None;
    let (labeled, labeled_n_t) =
        icpa_core::metrics::reference_labeled(truths, all_risks, &window);
    let (roc, auc, brier, n_t) = match reference_metrics(truths, all_risks, &window) {
        Ok(out) => (Some(out.roc), Some(out.auc), Some(out.brier), out.n_t),
        Err(e) if note_for(&e).is_some() => {
            note = note_for(&e);
            (None, None, None, labeled_n_t)
        }
        Err(e) => return Err(CliError::from_core(e)),
    };
    let epce = if want_epce {
        match epce_reference(truths, rp, all_profiles, &window) {
            Ok(est) => {
                diagnostics.epce_excluded = est.n_excluded;
                Some(est.value)
            }
            Err(e) => {
                note = note.or_else(|| note_for(&e).or(Some(e.to_string())));
                None
            }
        }
    } else {
        None
    };
    Ok((
        MetricsReport {
            window,
            approach: Approach::Reference,
            auc,
            brier,
            epce,
            n_t,
            case_mass: labeled.case_mass(),
            control_mass: labeled.control_mass(),
            diagnostics,
            note,
        },
        roc,
    ))
}

pub fn approach_file_name(approach: Approach) -> &'static str {
    match approach {
        Approach::Model => "roc_model.csv",
        Approach::Ipcw => "roc_ipcw.csv",
        Approach::Naive => "roc_naive.csv",
        Approach::Reference => "roc_reference.csv",
    }
}

pub fn run(
    dataset: &Dataset,
    window: EvaluationWindow,
    predictor: &Predictor,
    approaches: ApproachSet,
    out_dir: &PathBuf,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", out_dir.display())))?;
    let evaluation = evaluate_dataset(dataset, window, predictor, approaches)?;
    crate::io::write_json(&out_dir.join("metrics.json"), &evaluation.reports)?;
    for (approach, roc) in &evaluation.rocs {
        crate::io::write_roc_csv(&out_dir.join(approach_file_name(*approach)), roc)?;
    }
    for report in &evaluation.reports {
        let auc = report
            .auc
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "n/a".into());
        let brier = report
            .brier
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "n/a".into());
        let epce = report
            .epce
            .map(|v| format!(" epce={v:.4}"))
            .unwrap_or_default();
        println!(
            "{:?}: auc={auc} brier={brier}{epce} (n_t={})",
            report.approach, report.n_t
        );
    }
    Ok(())
}
