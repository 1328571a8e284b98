//! The `compare` subcommand: evaluate every replicate in a simulation
//! directory and summarize each approach's error against the
//! censoring-free reference.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use icpa_core::cohort::EvaluationWindow;
use icpa_core::metrics::{Approach, MetricsReport};

use crate::evaluate::{evaluate_dataset, ApproachSet, Predictor};
use crate::io::{load_dataset, Manifest};
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct ReplicateRow {
    pub index: usize,
    pub reports: Vec<MetricsReport>,
}

#[derive(Debug, Serialize)]
pub struct ApproachSummary {
    pub approach: Approach,
    pub n_evaluated: usize,
    /// Replicates where this approach's AUC was undefined.
    pub n_auc_undefined: usize,
    pub mean_auc: Option<f64>,
    pub sd_auc: Option<f64>,
    pub rmse_auc: Option<f64>,
    pub mean_brier: Option<f64>,
    pub sd_brier: Option<f64>,
    pub rmse_brier: Option<f64>,
    pub mean_epce: Option<f64>,
    pub sd_epce: Option<f64>,
    pub rmse_epce: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct CompareSummary {
    pub window: EvaluationWindow,
    pub predictor: String,
    pub schedule: String,
    pub n_replicates: usize,
    pub approaches: Vec<ApproachSummary>,
    pub replicates: Vec<ReplicateRow>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    Some(
        (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64)
            .sqrt(),
    )
}

fn rmse(pairs: &[(f64, f64)]) -> Option<f64> {
    (!pairs.is_empty()).then(|| {
        (pairs
            .iter()
            .map(|(est, reference)| (est - reference) * (est - reference))
            .sum::<f64>()
            / pairs.len() as f64)
            .sqrt()
    })
}

fn field_of(report: &MetricsReport, field: MetricField) -> Option<f64> {
    match field {
        MetricField::Auc => report.auc,
        MetricField::Brier => report.brier,
        MetricField::Epce => report.epce,
    }
}

#[derive(Clone, Copy)]
enum MetricField {
    Auc,
    Brier,
    Epce,
}

fn summarize(
    approach: Approach,
    rows: &[ReplicateRow],
) -> ApproachSummary {
    let of = |row: &ReplicateRow, which: Approach| -> Option<MetricsReport> {
        row.reports.iter().find(|r| r.approach == which).cloned()
    };
    let mut aucs = Vec::new();
    let mut briers = Vec::new();
    let mut epces = Vec::new();
    let mut auc_pairs = Vec::new();
    let mut brier_pairs = Vec::new();
    let mut epce_pairs = Vec::new();
    let mut n_evaluated = 0;
    let mut n_auc_undefined = 0;
    for row in rows {
        let Some(report) = of(row, approach) else {
            continue;
        };
        n_evaluated += 1;
        let reference = of(row, Approach::Reference);
        for (field, values, pairs) in [
            (MetricField::Auc, &mut aucs, &mut auc_pairs),
            (MetricField::Brier, &mut briers, &mut brier_pairs),
            (MetricField::Epce, &mut epces, &mut epce_pairs),
        ] {
            if let Some(value) = field_of(&report, field) {
                values.push(value);
                if approach != Approach::Reference {
                    if let Some(ref_value) =
                        reference.as_ref().and_then(|r| field_of(r, field))
                    {
                        pairs.push((value, ref_value));
                    }
                }
            }
        }
        if report.auc.is_none() {
            n_auc_undefined += 1;
        }
    }
    ApproachSummary {
        approach,
        n_evaluated,
        n_auc_undefined,
        mean_auc: mean(&aucs),
        sd_auc: sd(&aucs),
        rmse_auc: rmse(&auc_pairs),
        mean_brier: mean(&briers),
        sd_brier: sd(&briers),
        rmse_brier: rmse(&brier_pairs),
        mean_epce: mean(&epces),
        sd_epce: sd(&epces),
        rmse_epce: rmse(&epce_pairs),
    }
}

pub fn run(
    data_dir: &Path,
    window: EvaluationWindow,
    predictor: &Predictor,
    approaches: ApproachSet,
    out_dir: &Path,
) -> Result<(), CliError> {
    let manifest = Manifest::load(data_dir)?;
    if manifest.n_replicates < 2 {
        return Err(CliError::usage(
            "compare needs at least 2 replicates in the data directory",
        ));
    }
    // the reference is the RMSE target, so it is always computed
    let mut approaches = approaches;
    approaches.reference = true;

    let rows: Vec<ReplicateRow> = manifest
        .replicates
        .par_iter()
        .map(|files| {
            let dataset = load_dataset(
                &data_dir.join(&files.events),
                &data_dir.join(&files.longitudinal),
                Some(&data_dir.join(&files.truth)),
                Some(&data_dir.join(&files.profiles)),
            )?;
            if dataset.truths.is_none() {
                return Err(CliError::data("replicate is missing truth data"));
            }
            let evaluation = evaluate_dataset(&dataset, window, predictor, approaches)?;
            Ok(ReplicateRow {
                index: files.index,
                reports: evaluation.reports,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut order = Vec::new();
    if approaches.model {
        order.push(Approach::Model);
    }
    if approaches.ipcw {
        order.push(Approach::Ipcw);
    }
    if approaches.naive {
        order.push(Approach::Naive);
    }
    order.push(Approach::Reference);
    let summaries: Vec<ApproachSummary> = order
        .into_iter()
        .map(|approach| summarize(approach, &rows))
        .collect();

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", out_dir.display())))?;
    let summary = CompareSummary {
        window,
        predictor: predictor.describe(),
        schedule: manifest.schedule.clone(),
        n_replicates: manifest.n_replicates,
        approaches: summaries,
        replicates: rows,
    };
    crate::io::write_json(&out_dir.join("summary.json"), &summary)?;

    let mut table = String::from(
        "approach,rmse_auc,rmse_brier,rmse_epce,mean_auc,sd_auc,mean_brier,sd_brier,mean_epce,sd_epce,n_auc_undefined\n",
    );
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in &summary.approaches {
        table.push_str(&format!(
            "{:?},{},{},{},{},{},{},{},{},{},{}\n",
            s.approach,
            fmt(s.rmse_auc),
            fmt(s.rmse_brier),
            fmt(s.rmse_epce),
            fmt(s.mean_auc),
            fmt(s.sd_auc),
            fmt(s.mean_brier),
            fmt(s.sd_brier),
            fmt(s.mean_epce),
            fmt(s.sd_epce),
            s.n_auc_undefined,
        ));
    }
    std::fs::write(out_dir.join("summary.csv"), &table)
        .map_err(|e| CliError::data(format!("cannot write summary.csv: {e}")))?;

    for s in &summary.approaches {
        println!(
            "{:?}: rmse_auc={} rmse_brier={} mean_auc={} mean_brier={}",
            s.approach,
            fmt(s.rmse_auc),
            fmt(s.rmse_brier),
            fmt(s.mean_auc),
            fmt(s.mean_brier),
        );
    }
    Ok(())
}
