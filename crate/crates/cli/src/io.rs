//! Dataset file formats: the events/longitudinal/truth/profiles CSVs and
//! the simulation manifest.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use icpa_core::cohort::{EventKind, SubjectRecord};
use icpa_core::metrics::TrueOutcome;
use icpa_core::model::SubjectProfile;
use icpa_core::simulator::SimulatedSubject;

use crate::CliError;

#[derive(Debug, Serialize, Deserialize)]
struct EventRow {
    subject_id: String,
    t_last_neg: f64,
    t_pos: Option<f64>,
    t_trt: Option<f64>,
    t_cen: Option<f64>,
    delta: u8,
    age: f64,
    density: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LongitudinalRow {
    subject_id: String,
    time: f64,
    psa_log2: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthRow {
    subject_id: String,
    t_prg_star: f64,
    t_trt_star: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRow {
    subject_id: String,
    age: f64,
    density: f64,
    u0: f64,
    u1: f64,
    u2: f64,
    u3: f64,
}

/// A loaded dataset: validated records plus, when available, the hidden
/// truth and the generating profiles, both aligned with `records`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<SubjectRecord>,
    pub truths: Option<Vec<TrueOutcome>>,
    pub profiles: Option<Vec<SubjectProfile>>,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::data(format!("bad row in {}: {e}", path.display())))
}

pub fn load_dataset(
    events: &Path,
    longitudinal: &Path,
    truth: Option<&Path>,
    profiles: Option<&Path>,
) -> Result<Dataset, CliError> {
    let event_rows: Vec<EventRow> = read_csv(events)?;
    let mut records = Vec::with_capacity(event_rows.len());
    let mut index: HashMap<String, usize> = HashMap::with_capacity(event_rows.len());
    for row in event_rows {
        let delta = EventKind::from_code(row.delta)
            .ok_or_else(|| CliError::data(format!("invalid delta {} for {}", row.delta, row.subject_id)))?;
        if index.contains_key(&row.subject_id) {
            return Err(CliError::data(format!(
                "duplicate subject_id {}",
                row.subject_id
            )));
        }
        index.insert(row.subject_id.clone(), records.len());
        records.push(SubjectRecord {
            id: row.subject_id,
            t_last_neg: row.t_last_neg,
            t_pos: row.t_pos,
            t_trt: row.t_trt,
            t_cen: row.t_cen,
            delta,
            age: row.age,
            density: row.density,
            psa: Vec::new(),
        });
    }

    for row in read_csv::<LongitudinalRow>(longitudinal)? {
        let idx = *index.get(&row.subject_id).ok_or_else(|| {
            CliError::data(format!(
                "longitudinal row for unknown subject {}",
                row.subject_id
            ))
        })?;
        records[idx].psa.push((row.time, row.psa_log2));
    }

    let records = records
        .into_iter()
        .map(|r| {
            let id = r.id.clone();
            r.validate()
                .map_err(|e| CliError::data(format!("invalid record {id}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let truths = match truth {
        Some(path) => {
            let rows: Vec<TruthRow> = read_csv(path)?;
            let by_id: HashMap<String, TrueOutcome> = rows
                .into_iter()
                .map(|r| {
                    (
                        r.subject_id,
                        TrueOutcome {
                            t_prg_star: r.t_prg_star,
                            t_trt_star: r.t_trt_star,
                        },
                    )
                })
                .collect();
            Some(
                records
                    .iter()
                    .map(|r| {
                        by_id.get(&r.id).copied().ok_or_else(|| {
                            CliError::data(format!("no truth row for subject {}", r.id))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            )
        }
        None => None,
    };

    let profiles = match profiles {
        Some(path) => {
            let rows: Vec<ProfileRow> = read_csv(path)?;
            let by_id: HashMap<String, SubjectProfile> = rows
                .into_iter()
                .map(|r| {
                    (
                        r.subject_id,
                        SubjectProfile {
                            age: r.age,
                            density: r.density,
                            u: [r.u0, r.u1, r.u2, r.u3],
                        },
                    )
                })
                .collect();
            Some(
                records
                    .iter()
                    .map(|r| {
                        by_id.get(&r.id).copied().ok_or_else(|| {
                            CliError::data(format!("no profile row for subject {}", r.id))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            )
        }
        None => None,
    };

    Ok(Dataset {
        records,
        truths,
        profiles,
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// File names of one replicate's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateFiles {
    pub index: usize,
    pub events: String,
    pub longitudinal: String,
    pub truth: String,
    pub profiles: String,
}

impl ReplicateFiles {
    pub fn new(index: usize) -> Self {
        Self {
            index,
            events: format!("events_{index:03}.csv"),
            longitudinal: format!("longitudinal_{index:03}.csv"),
            truth: format!("truth_{index:03}.csv"),
            profiles: format!("profiles_{index:03}.csv"),
        }
    }
}

/// Written next to the replicate files by `simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub n_subjects: usize,
    pub n_replicates: usize,
    pub schedule: String,
    pub censoring_rate: f64,
    pub admin_horizon: f64,
    pub psa_interval: f64,
    pub params_sha256: String,
    pub replicates: Vec<ReplicateFiles>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::data(format!("bad manifest {}: {e}", path.display())))
    }
}

pub fn write_replicate(
    dir: &Path,
    files: &ReplicateFiles,
    subjects: &[SimulatedSubject],
) -> Result<(), CliError> {
    write_csv(
        &dir.join(&files.events),
        subjects.iter().map(|s| EventRow {
            subject_id: s.record.id.clone(),
            t_last_neg: s.record.t_last_neg,
            t_pos: s.record.t_pos,
            t_trt: s.record.t_trt,
            t_cen: s.record.t_cen,
            delta: s.record.delta.code(),
            age: s.record.age,
            density: s.record.density,
        }),
    )?;
    write_csv(
        &dir.join(&files.longitudinal),
        subjects.iter().flat_map(|s| {
            s.record.psa.iter().map(|&(time, psa_log2)| LongitudinalRow {
                subject_id: s.record.id.clone(),
                time,
                psa_log2,
            })
        }),
    )?;
    write_csv(
        &dir.join(&files.truth),
        subjects.iter().map(|s| TruthRow {
            subject_id: s.record.id.clone(),
            t_prg_star: s.truth.t_prg_star,
            t_trt_star: s.truth.t_trt_star,
        }),
    )?;
    write_csv(
        &dir.join(&files.profiles),
        subjects.iter().map(|s| ProfileRow {
            subject_id: s.record.id.clone(),
            age: s.profile.age,
            density: s.profile.density,
            u0: s.profile.u[0],
            u1: s.profile.u[1],
            u2: s.profile.u[2],
            u3: s.profile.u[3],
        }),
    )?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::data(format!("serialization failed: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

pub fn write_roc_csv(path: &PathBuf, roc: &icpa_core::metrics::RocCurve) -> Result<(), CliError> {
    let mut out = String::from("one_minus_spec,sens\n");
    for (x, y) in roc.one_minus_spec.iter().zip(&roc.sens) {
        out.push_str(&format!("{x},{y}\n"));
    }
    fs::write(path, out).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}
