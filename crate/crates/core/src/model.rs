//! Joint-model parameters and subject profiles.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::splines::{CubicBSplineBasis, NaturalCubicBasis};

/// Number of B-spline coefficients per event in `gamma_h0`.
pub const N_BASELINE_COEFS: usize = 12;

/// Parameters of the two-event joint model: longitudinal fixed effects,
/// random-effect covariance, residual precision, per-event log baseline
/// hazard coefficients, PSA-density coefficients, and the association
/// coefficients for the marker level and its yearly change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    /// Fixed effects: intercept, three spline coefficients, age effect.
    pub beta: [f64; 5],
    /// Random-effect covariance (4x4, symmetric positive definite).
    pub omega: [[f64; 4]; 4],
    /// Residual precision of the longitudinal errors.
    pub tau_eps: f64,
    /// Log baseline-hazard B-spline coefficients; column 0 drives
    /// progression, column 1 early treatment.
    pub gamma_h0: [[f64; 2]; N_BASELINE_COEFS],
    /// PSA-density coefficients per event.
    pub gamma: [f64; 2],
    /// Association coefficients: row 0 is the marker level, row 1 the
    /// yearly change; columns index the event.
    pub alpha: [[f64; 2]; 2],
    /// Natural-spline knots for the longitudinal mean (two boundary, two
    /// internal).
    pub ns_knots: Vec<f64>,
    /// Distinct knots of the clamped cubic baseline-hazard B-spline;
    /// `len + 2` must equal the number of rows of `gamma_h0`.
    pub bs_knots: Vec<f64>,
}

impl ModelParameters {
    /// The fitted parameter set used for simulation and true-parameter
    /// prediction.
    pub fn reference() -> Self {
        Self {
            beta: [2.34, 0.28, 0.61, 0.95, 0.02],
            omega: [
                [0.48, -0.04, -0.07, 0.02],
                [-0.04, 0.77, 0.46, -0.04],
                [-0.07, 0.46, 1.37, 1.36],
                [0.02, -0.04, 1.36, 2.54],
            ],
            tau_eps: 47.40,
            gamma_h0: [
                [-6.78, -5.76],
                [-4.72, -4.99],
                [-2.84, -4.43],
                [-1.65, -4.26],
                [-1.54, -4.36],
                [-1.79, -4.47],
                [-1.85, -4.60],
                [-1.75, -4.69],
                [-1.85, -4.78],
                [-2.04, -4.92],
                [-2.18, -5.08],
                [-2.32, -5.21],
            ],
            gamma: [0.50, 0.23],
            alpha: [[0.13, 0.42], [3.01, 2.62]],
            ns_knots: vec![0.0, 1.0, 3.0, 10.0],
            bs_knots: (0..10).map(|i| 10.0 * i as f64 / 9.0).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau_eps <= 0.0 {
            return Err(Error::InvalidParameters("tau_eps must be positive".into()));
        }
        let omega = Matrix4::from_fn(|i, j| self.omega[i][j]);
        if (omega - omega.transpose()).abs().max() > 1e-12 {
            return Err(Error::InvalidParameters("omega must be symmetric".into()));
        }
        if omega.cholesky().is_none() {
            return Err(Error::InvalidParameters(
                "omega must be positive definite".into(),
            ));
        }
        NaturalCubicBasis::new(&self.ns_knots)?;
        let bs = CubicBSplineBasis::new(&self.bs_knots)?;
        if bs.n_basis() != N_BASELINE_COEFS {
            return Err(Error::InvalidParameters(format!(
                "bs_knots yield {} basis functions, need {}",
                bs.n_basis(),
                N_BASELINE_COEFS
            )));
        }
        Ok(())
    }

    /// Lower-triangular Cholesky factor of `omega`.
    pub fn omega_cholesky(&self) -> Result<[[f64; 4]; 4]> {
        let omega = Matrix4::from_fn(|i, j| self.omega[i][j]);
        let chol = omega
            .cholesky()
            .ok_or_else(|| Error::InvalidParameters("omega must be positive definite".into()))?;
        let l = chol.l();
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..=i {
                out[i][j] = l[(i, j)];
            }
        }
        Ok(out)
    }

    /// Multiply both baseline hazards by `factor`. The basis forms a
    /// partition of unity, so shifting every coefficient by log(factor)
    /// scales the hazard exactly.
    pub fn with_hazard_scale(&self, factor: f64) -> Self {
        let shift = factor.ln();
        let mut out = self.clone();
        for row in out.gamma_h0.iter_mut() {
            row[0] += shift;
            row[1] += shift;
        }
        out
    }

    /// Drop the PSA-density effect from both hazards (emulates a model
    /// fitted without the baseline covariate).
    pub fn without_density_effect(&self) -> Self {
        let mut out = self.clone();
        out.gamma = [0.0, 0.0];
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameters serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let params: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameters(format!("bad parameter JSON: {e}")))?;
        params.validate()?;
        Ok(params)
    }
}

/// A subject as the hazard model sees it: baseline covariates plus the
/// true random effects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub age: f64,
    pub density: f64,
    pub u: [f64; 4],
}

impl SubjectProfile {
    /// Covariate-free profile at the centering age; handy for tests and
    /// predictors that ignore profiles.
    pub fn baseline() -> Self {
        Self {
            age: 62.0,
            density: 0.0,
            u: [0.0; 4],
        }
    }
}
