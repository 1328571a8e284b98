//! The `simulate` subcommand: generate replicates and write the dataset
//! files plus a manifest.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use icpa_core::model::ModelParameters;
use icpa_core::simulator::{generate_dataset, BiopsySchedule, SimulationConfig};

use crate::io::{write_replicate, Manifest, ReplicateFiles};
use crate::CliError;

pub fn parse_schedule(text: &str) -> Result<BiopsySchedule, CliError> {
    if text.eq_ignore_ascii_case("pass") {
        return Ok(BiopsySchedule::Pass);
    }
    if let Some(range) = text.strip_prefix('u') {
        if let Some((lo, hi)) = range.split_once('-') {
            let lo: f64 = lo
                .parse()
                .map_err(|_| CliError::usage(format!("bad schedule '{text}'")))?;
            let hi: f64 = hi
                .parse()
                .map_err(|_| CliError::usage(format!("bad schedule '{text}'")))?;
            if !(0.0 < lo && lo < hi) {
                return Err(CliError::usage(format!(
                    "bad schedule '{text}': need 0 < lo < hi"
                )));
            }
            return Ok(BiopsySchedule::RandomUniform { lo, hi });
        }
    }
    Err(CliError::usage(format!(
        "unknown schedule '{text}' (expected pass or u<lo>-<hi>, e.g. u0.3-4)"
    )))
}

pub struct SimulateOptions {
    pub n_subjects: usize,
    pub n_replicates: usize,
    pub seed: u64,
    pub schedule: BiopsySchedule,
    pub censoring_rate: f64,
    pub admin_horizon: f64,
    pub psa_interval: f64,
    pub params: ModelParameters,
}

pub fn run(options: &SimulateOptions, out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", out_dir.display())))?;

    let mut config = SimulationConfig::new(options.params.clone());
    config.n_subjects = options.n_subjects;
    config.n_replicates = options.n_replicates;
    config.seed = options.seed;
    config.schedule = options.schedule;
    config.censoring_rate = options.censoring_rate;
    config.admin_horizon = options.admin_horizon;
    config.psa_interval = options.psa_interval;

    let replicates: Vec<ReplicateFiles> = (0..options.n_replicates)
        .map(ReplicateFiles::new)
        .collect();
    replicates
        .par_iter()
        .map(|files| {
            let subjects =
                generate_dataset(&config, files.index).map_err(CliError::from_core)?;
            write_replicate(out_dir, files, &subjects)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let params_json = options.params.to_json();
    let params_sha256 = format!("{:x}", Sha256::digest(params_json.as_bytes()));
    let manifest = Manifest {
        seed: options.seed,
        n_subjects: options.n_subjects,
        n_replicates: options.n_replicates,
        schedule: options.schedule.name(),
        censoring_rate: options.censoring_rate,
        admin_horizon: options.admin_horizon,
        psa_interval: options.psa_interval,
        params_sha256,
        replicates,
    };
    crate::io::write_json(&out_dir.join("manifest.json"), &manifest)?;
    println!(
        "wrote {} replicate(s) of {} subjects to {}",
        options.n_replicates,
        options.n_subjects,
        out_dir.display()
    );
    Ok(())
}
