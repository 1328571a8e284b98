//! Spline bases for the longitudinal mean and the log baseline hazard.

use crate::error::{Error, Result};

/// Clamped cubic B-spline basis over strictly increasing distinct knots.
///
/// The boundary knots carry multiplicity four, so the basis forms a
/// partition of unity on the knot range, equals `(1, 0, ..., 0)` at the
/// left boundary and `(0, ..., 0, 1)` at the right. The number of basis
/// functions is `distinct.len() + 2`.
#[derive(Debug, Clone)]
pub struct CubicBSplineBasis {
    distinct: Vec<f64>,
    padded: Vec<f64>,
}

/// Nonzero slice of a B-spline basis evaluation: four values starting at
/// basis index `start`.
#[derive(Debug, Clone, Copy)]
pub struct LocalBasis {
    pub start: usize,
    pub values: [f64; 4],
}

impl CubicBSplineBasis {
    pub fn new(distinct: &[f64]) -> Result<Self> {
        if distinct.len() < 2 {
            return Err(Error::InvalidParameters(
                "B-spline basis needs at least 2 distinct knots".into(),
            ));
        }
        if distinct.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameters(
                "B-spline knots must be strictly increasing".into(),
            ));
        }
        let first = distinct[0];
        let last = *distinct.last().unwrap();
        let mut padded = Vec::with_capacity(distinct.len() + 6);
        padded.extend_from_slice(&[first; 3]);
        padded.extend_from_slice(distinct);
        padded.extend_from_slice(&[last; 3]);
        Ok(Self {
            distinct: distinct.to_vec(),
            padded,
        })
    }

    pub fn n_basis(&self) -> usize {
        self.distinct.len() + 2
    }

    pub fn support(&self) -> (f64, f64) {
        (self.distinct[0], *self.distinct.last().unwrap())
    }

    fn check_support(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.support();
        if !(lo..=hi).contains(&t) {
            return Err(Error::OutOfSupport { time: t });
        }
        Ok(())
    }

    /// The four nonzero cubic basis values at `t` (de Boor's algorithm).
    pub fn eval_local(&self, t: f64) -> Result<LocalBasis> {
        self.check_support(t)?;
        let knots = &self.padded;
        // span index i with knots[i] <= t < knots[i+1]; the right boundary
        // folds into the last nonempty span.
        let last_span = knots.len() - 5;
        let mut span = last_span;
        for i in 3..=last_span {
            if t < knots[i + 1] {
                span = i;
                break;
            }
        }

        let mut values = [0.0_f64; 4];
        values[0] = 1.0;
        let mut left = [0.0_f64; 4];
        let mut right = [0.0_f64; 4];
        for j in 1..=3 {
            left[j] = t - knots[span + 1 - j];
            right[j] = knots[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        Ok(LocalBasis {
            start: span - 3,
            values,
        })
    }

    /// Full cubic basis vector at `t`; zero outside the local support.
    pub fn eval_dense(&self, t: f64) -> Result<Vec<f64>> {
        let local = self.eval_local(t)?;
        let mut out = vec![0.0; self.n_basis()];
        out[local.start..local.start + 4].copy_from_slice(&local.values);
        Ok(out)
    }

    /// All basis values of the given order (1 = piecewise constant up to
    /// 4 = cubic) at `t`, by the dense Cox-de Boor recursion. Zero-width
    /// spans contribute nothing. Setup-time helper for derivative and
    /// constraint computations.
    fn eval_dense_order(&self, t: f64, order: usize) -> Result<Vec<f64>> {
        self.check_support(t)?;
        assert!((1..=4).contains(&order));
        let knots = &self.padded;
        let len = knots.len();
        // order-1 indicators, with the right boundary folded into the
        // last nonempty span
        let mut values = vec![0.0; len - 1];
        let mut span = None;
        for i in (0..len - 1).rev() {
            if knots[i] < knots[i + 1] && knots[i] <= t && (t < knots[i + 1] || span.is_none()) {
                if t < knots[i + 1] || t == *knots.last().unwrap() {
                    span = Some(i);
                }
            }
        }
        let span = span.ok_or(Error::OutOfSupport { time: t })?;
        values[span] = 1.0;
        for k in 2..=order {
            for i in 0..len - k {
                let mut acc = 0.0;
                let d1 = knots[i + k - 1] - knots[i];
                if d1 > 0.0 {
                    acc += (t - knots[i]) / d1 * values[i];
                }
                let d2 = knots[i + k] - knots[i + 1];
                if d2 > 0.0 {
                    acc += (knots[i + k] - t) / d2 * values[i + 1];
                }
                values[i] = acc;
            }
            values.truncate(len - k);
        }
        Ok(values)
    }

    /// First derivatives of all cubic basis functions at `t`.
    pub fn eval_dense_d1(&self, t: f64) -> Result<Vec<f64>> {
        let lower = self.eval_dense_order(t, 3)?;
        Ok(self.derivative_from_lower(&lower, 3.0))
    }

    /// Second derivatives of all cubic basis functions at `t`.
    pub fn eval_dense_d2(&self, t: f64) -> Result<Vec<f64>> {
        let order2 = self.eval_dense_order(t, 2)?;
        // first derivatives of the quadratic basis
        let mut quad_d1 = vec![0.0; order2.len() - 1];
        let knots = &self.padded;
        for (i, out) in quad_d1.iter_mut().enumerate() {
            let mut acc = 0.0;
            let d1 = knots[i + 2] - knots[i];
            if d1 > 0.0 {
                acc += 2.0 * order2[i] / d1;
            }
            let d2 = knots[i + 3] - knots[i + 1];
            if d2 > 0.0 {
                acc -= 2.0 * order2[i + 1] / d2;
            }
            *out = acc;
        }
        Ok(self.derivative_from_lower(&quad_d1, 3.0))
    }

    fn derivative_from_lower(&self, lower: &[f64], degree: f64) -> Vec<f64> {
        let knots = &self.padded;
        let n = self.n_basis();
        let mut out = vec![0.0; n];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            let d1 = knots[i + 3] - knots[i];
            if d1 > 0.0 {
                acc += degree * lower[i] / d1;
            }
            let d2 = knots[i + 4] - knots[i + 1];
            if d2 > 0.0 {
                acc -= degree * lower[i + 1] / d2;
            }
            *slot = acc;
        }
        out
    }
}

/// Natural cubic spline basis with 3 degrees of freedom.
///
/// Mirrors the usual regression construction: the clamped cubic B-spline
/// basis on the four knots with its intercept column dropped, projected
/// by Householder QR onto the null space of the natural constraints
/// (zero second derivative at both boundary knots). Every basis function
/// is exactly zero at the left boundary knot, so a model without an
/// intercept column anchors there, and the basis extrapolates linearly
/// outside the boundary knots.
#[derive(Debug, Clone)]
pub struct NaturalCubicBasis {
    knots: [f64; 4],
    bspline: CubicBSplineBasis,
    /// 3 x 5 projection applied to the intercept-free B-spline vector.
    proj: [[f64; 5]; 3],
    /// Slope of each basis function below the left boundary.
    left_slope: [f64; 3],
    /// Value and slope at the right boundary.
    right_value: [f64; 3],
    right_slope: [f64; 3],
}

impl NaturalCubicBasis {
    pub fn new(knots: &[f64]) -> Result<Self> {
        if knots.len() != 4 {
            return Err(Error::InvalidParameters(format!(
                "natural spline needs 4 knots, got {}",
                knots.len()
            )));
        }
        let bspline = CubicBSplineBasis::new(knots)?;
        debug_assert_eq!(bspline.n_basis(), 6);
        let (lo, hi) = bspline.support();

        // natural constraints: second derivatives vanish at the
        // boundaries (intercept column dropped)
        let c_lo = bspline.eval_dense_d2(lo)?;
        let c_hi = bspline.eval_dense_d2(hi)?;
        let cols: [[f64; 5]; 2] = [
            std::array::from_fn(|i| c_lo[i + 1]),
            std::array::from_fn(|i| c_hi[i + 1]),
        ];

        // Householder QR of the 5x2 constraint transpose; the trailing
        // rows of Q^T span the constraint null space.
        let mut a = [[0.0_f64; 2]; 5];
        for (j, col) in cols.iter().enumerate() {
            for i in 0..5 {
                a[i][j] = col[i];
            }
        }
        let mut reflectors: Vec<[f64; 5]> = Vec::with_capacity(2);
        for j in 0..2 {
            let mut v = [0.0_f64; 5];
            for i in j..5 {
                v[i] = a[i][j];
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::InvalidParameters(
                    "degenerate natural-spline constraints".into(),
                ));
            }
            let alpha = -v[j].signum() * norm;
            v[j] -= alpha;
            let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in v.iter_mut() {
                *x /= vnorm;
            }
            for col in 0..2 {
                let dot: f64 = (0..5).map(|i| v[i] * a[i][col]).sum();
                for i in 0..5 {
                    a[i][col] -= 2.0 * dot * v[i];
                }
            }
            reflectors.push(v);
        }
        // columns of the projection: (Q^T e_j) rows 2..5
        let mut proj = [[0.0_f64; 5]; 3];
        for j in 0..5 {
            let mut y = [0.0_f64; 5];
            y[j] = 1.0;
            for v in &reflectors {
                let dot: f64 = (0..5).map(|i| v[i] * y[i]).sum();
                for i in 0..5 {
                    y[i] -= 2.0 * dot * v[i];
                }
            }
            for p in 0..3 {
                proj[p][j] = y[p + 2];
            }
        }

        let mut basis = Self {
            knots: [knots[0], knots[1], knots[2], knots[3]],
            bspline,
            proj,
            left_slope: [0.0; 3],
            right_value: [0.0; 3],
            right_slope: [0.0; 3],
        };
        basis.left_slope = basis.project(&basis.bspline.eval_dense_d1(lo)?);
        basis.right_value = basis.project(&basis.bspline.eval_dense(hi)?);
        basis.right_slope = basis.project(&basis.bspline.eval_dense_d1(hi)?);
        Ok(basis)
    }

    pub fn knots(&self) -> &[f64; 4] {
        &self.knots
    }

    fn project(&self, dense6: &[f64]) -> [f64; 3] {
        std::array::from_fn(|p| {
            (0..5)
                .map(|j| self.proj[p][j] * dense6[j + 1])
                .sum::<f64>()
        })
    }

    pub fn eval(&self, t: f64) -> [f64; 3] {
        let lo = self.knots[0];
        let hi = self.knots[3];
        if t < lo {
            // value at the left boundary is zero by construction
            std::array::from_fn(|p| self.left_slope[p] * (t - lo))
        } else if t > hi {
            std::array::from_fn(|p| self.right_value[p] + self.right_slope[p] * (t - hi))
        } else {
            self.project(
                &self
                    .bspline
                    .eval_dense(t)
                    .expect("within-support evaluation"),
            )
        }
    }
}
