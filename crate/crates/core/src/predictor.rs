//! Conditional risk prediction: cause-specific hazards, cumulative
//! incidence, and overall survival, evaluated with 15-point Gauss-Kronrod
//! quadrature.

use crate::error::{Error, Result};
use crate::model::{ModelParameters, SubjectProfile};
use crate::quad::QuadratureRule;
use crate::splines::{CubicBSplineBasis, NaturalCubicBasis};

/// The two competing event causes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cause {
    Progression,
    Treatment,
}

impl Cause {
    pub const BOTH: [Cause; 2] = [Cause::Progression, Cause::Treatment];

    pub fn index(self) -> usize {
        match self {
            Cause::Progression => 0,
            Cause::Treatment => 1,
        }
    }
}

/// Spline bases derived from a parameter set.
#[derive(Debug, Clone)]
pub struct ModelBases {
    pub ns: NaturalCubicBasis,
    pub bs: CubicBSplineBasis,
}

impl ModelBases {
    pub fn new(params: &ModelParameters) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            ns: NaturalCubicBasis::new(&params.ns_knots)?,
            bs: CubicBSplineBasis::new(&params.bs_knots)?,
        })
    }
}

/// Expected log2(PSA+1) at `time` for a subject. Times below the left
/// boundary knot extrapolate linearly, which the yearly-change covariate
/// relies on during the first year.
pub fn longitudinal_mean(
    params: &ModelParameters,
    bases: &ModelBases,
    profile: &SubjectProfile,
    time: f64,
) -> f64 {
    let basis = bases.ns.eval(time);
    let mut m = params.beta[0] + profile.u[0] + params.beta[4] * (profile.age - 62.0);
    for p in 0..3 {
        m += (params.beta[p + 1] + profile.u[p + 1]) * basis[p];
    }
    m
}

/// Log baseline hazard for `cause` at `time`.
///
/// Beyond the right boundary knot the value is held constant at the
/// boundary, so the hazard stays defined over the whole simulation
/// horizon. Negative times are out of support.
pub fn bs_log_baseline(
    params: &ModelParameters,
    bases: &ModelBases,
    cause: Cause,
    time: f64,
) -> Result<f64> {
    if time < 0.0 || !time.is_finite() {
        return Err(Error::OutOfSupport { time });
    }
    let (_, hi) = bases.bs.support();
    let local = bases.bs.eval_local(time.min(hi))?;
    let k = cause.index();
    let mut acc = 0.0;
    for (offset, value) in local.values.iter().enumerate() {
        acc += value * params.gamma_h0[local.start + offset][k];
    }
    Ok(acc)
}

/// Cause-specific hazard at `time` for a subject profile.
pub fn hazard(
    params: &ModelParameters,
    bases: &ModelBases,
    profile: &SubjectProfile,
    cause: Cause,
    time: f64,
) -> Result<f64> {
    if time < 0.0 || !time.is_finite() {
        return Err(Error::OutOfSupport { time });
    }
    Ok(JointHazard {
        params,
        bases,
        profile,
    }
    .rates(time)[cause.index()])
}

/// Cause-specific hazard rates as a function of time (defined for all
/// t >= 0).
pub trait CauseHazard {
    /// Both cause rates at `t`, progression first.
    fn rates(&self, t: f64) -> [f64; 2];

    fn rate(&self, cause: Cause, t: f64) -> f64 {
        self.rates(t)[cause.index()]
    }

    fn total_rate(&self, t: f64) -> f64 {
        let [a, b] = self.rates(t);
        a + b
    }
}

/// Hazards of the joint model for one subject.
#[derive(Debug, Clone, Copy)]
pub struct JointHazard<'a> {
    pub params: &'a ModelParameters,
    pub bases: &'a ModelBases,
    pub profile: &'a SubjectProfile,
}

impl CauseHazard for JointHazard<'_> {
    fn rates(&self, t: f64) -> [f64; 2] {
        debug_assert!(t >= 0.0, "hazard evaluated at negative time {t}");
        let m = longitudinal_mean(self.params, self.bases, self.profile, t);
        let slope = m - longitudinal_mean(self.params, self.bases, self.profile, t - 1.0);
        let (_, hi) = self.bases.bs.support();
        let local = self
            .bases
            .bs
            .eval_local(t.min(hi))
            .expect("clamped time is in support");
        let mut out = [0.0; 2];
        for k in 0..2 {
            let mut log_h = self.params.gamma[k] * self.profile.density
                + self.params.alpha[0][k] * m
                + self.params.alpha[1][k] * slope;
            for (offset, value) in local.values.iter().enumerate() {
                log_h += value * self.params.gamma_h0[local.start + offset][k];
            }
            out[k] = log_h.exp();
        }
        out
    }
}

/// Constant cause-specific rates; the closed-form oracle model.
#[derive(Debug, Clone, Copy)]
pub struct ConstantRates {
    pub progression: f64,
    pub treatment: f64,
}

impl CauseHazard for ConstantRates {
    fn rates(&self, _t: f64) -> [f64; 2] {
        [self.progression, self.treatment]
    }
}

fn check_interval(r: f64, s: f64) -> Result<()> {
    if r < 0.0 || !r.is_finite() {
        return Err(Error::OutOfSupport { time: r });
    }
    if s < r || !s.is_finite() {
        return Err(Error::OutOfSupport { time: s });
    }
    Ok(())
}

/// Integrated cause-specific hazard over [r, s], one quadrature panel per
/// year.
pub fn cumulative_hazard(
    hazards: &impl CauseHazard,
    cause: Cause,
    r: f64,
    s: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    check_interval(r, s)?;
    Ok(rule.integrate_yearly(|t| hazards.rate(cause, t), r, s))
}

/// exp(-H_prg(r,s) - H_trt(r,s)): probability of staying free of both
/// events through s given event-free at r.
pub fn overall_survival_from(
    hazards: &impl CauseHazard,
    r: f64,
    s: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    check_interval(r, s)?;
    Ok((-rule.integrate_yearly(|t| hazards.total_rate(t), r, s)).exp())
}

/// Conditional cumulative incidence of `cause` at each query horizon,
/// given event-free at `r`.
///
/// Evaluates the integral of h_cause(v) * exp(-H_total(r, v)) in a single
/// sweep: segment boundaries are placed at every year mark and every
/// query point, the total cumulative hazard is accumulated across
/// segments, and only the within-segment remainder is integrated per
/// quadrature node. Queries need not be sorted.
pub fn cif_at(
    hazards: &impl CauseHazard,
    cause: Cause,
    r: f64,
    queries: &[f64],
    rule: &QuadratureRule,
) -> Result<Vec<f64>> {
    for &q in queries {
        check_interval(r, q)?;
    }
    if queries.is_empty() {
        return Ok(Vec::new());
    }
    let max_q = queries.iter().cloned().fold(r, f64::max);

    // Breakpoints: r, whole years after r, and all query points.
    let mut breaks: Vec<f64> = vec![r];
    let mut year = r + 1.0;
    while year < max_q {
        breaks.push(year);
        year += 1.0;
    }
    breaks.push(max_q);
    breaks.extend(queries.iter().cloned());
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    breaks.dedup();

    // cif value after each breakpoint
    let mut cif_at_break: Vec<f64> = Vec::with_capacity(breaks.len());
    cif_at_break.push(0.0);
    let mut cum_total = 0.0; // H_total(r, segment start)
    let mut cif_acc = 0.0;
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        cif_acc += rule.integrate(
            |v| {
                let partial = rule.integrate(|x| hazards.total_rate(x), a, v);
                hazards.rate(cause, v) * (-(cum_total + partial)).exp()
            },
            a,
            b,
        );
        cum_total += rule.integrate(|x| hazards.total_rate(x), a, b);
        cif_at_break.push(cif_acc);
    }

    let lookup = |q: f64| -> f64 {
        let idx = breaks
            .binary_search_by(|x| x.partial_cmp(&q).expect("finite breakpoints"))
            .expect("query is a breakpoint");
        cif_at_break[idx].clamp(0.0, 1.0)
    };
    Ok(queries.iter().map(|&q| lookup(q)).collect())
}

/// Conditional progression risk and overall survival for a subject.
pub trait RiskPredictor: Sync {
    /// Probability of progression by `s` (before treatment), given
    /// event-free at `r`.
    fn cif(&self, profile: &SubjectProfile, s: f64, r: f64) -> Result<f64> {
        Ok(self.cif_batch(profile, r, &[s])?[0])
    }

    /// Cumulative incidence of the competing event (treatment).
    fn cif_competing(&self, profile: &SubjectProfile, s: f64, r: f64) -> Result<f64>;

    /// Probability of remaining free of both events through `s`, given
    /// event-free at `r`.
    fn surv(&self, profile: &SubjectProfile, s: f64, r: f64) -> Result<f64>;

    /// Progression CIFs at several horizons sharing one conditioning
    /// time.
    fn cif_batch(&self, profile: &SubjectProfile, r: f64, queries: &[f64]) -> Result<Vec<f64>>;
}

/// Quadrature-backed predictor for the joint model.
#[derive(Debug, Clone)]
pub struct JointModelPredictor {
    params: ModelParameters,
    bases: ModelBases,
    rule: QuadratureRule,
}

impl JointModelPredictor {
    pub fn new(params: ModelParameters) -> Result<Self> {
        let bases = ModelBases::new(&params)?;
        Ok(Self {
            params,
            bases,
            rule: QuadratureRule::gk15(),
        })
    }

    pub fn params(&self) -> &ModelParameters {
        &self.params
    }

    pub fn bases(&self) -> &ModelBases {
        &self.bases
    }

    fn hazards<'a>(&'a self, profile: &'a SubjectProfile) -> JointHazard<'a> {
        JointHazard {
            params: &self.params,
            bases: &self.bases,
            profile,
        }
    }
}

impl RiskPredictor for JointModelPredictor {
    fn cif_competing(&self, profile: &SubjectProfile, s: f64, r: f64) -> Result<f64> {
        Ok(cif_at(&self.hazards(profile), Cause::Treatment, r, &[s], &self.rule)?[0])
    }

    fn surv(&self, profile: &SubjectProfile, s: f64, r: f64) -> Result<f64> {
        overall_survival_from(&self.hazards(profile), r, s, &self.rule)
    }

    fn cif_batch(&self, profile: &SubjectProfile, r: f64, queries: &[f64]) -> Result<Vec<f64>> {
        cif_at(&self.hazards(profile), Cause::Progression, r, queries, &self.rule)
    }
}

/// Closed-form predictor with constant cause-specific hazards; ignores
/// the subject profile. Serves as the independent oracle for the
/// quadrature path.
#[derive(Debug, Clone, Copy)]
pub struct ConstantHazardPredictor {
    pub lambda_prg: f64,
    pub lambda_trt: f64,
}

impl ConstantHazardPredictor {
    pub fn new(lambda_prg: f64, lambda_trt: f64) -> Self {
        Self {
            lambda_prg,
            lambda_trt,
        }
    }

    pub fn rates(&self) -> ConstantRates {
        ConstantRates {
            progression: self.lambda_prg,
            treatment: self.lambda_trt,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            lambda_prg: self.lambda_prg * factor,
            lambda_trt: self.lambda_trt * factor,
        }
    }

    fn cif_cause(&self, lambda_cause: f64, s: f64, r: f64) -> Result<f64> {
        check_interval(r, s)?;
        let total = self.lambda_prg + self.lambda_trt;
        if total == 0.0 {
            return Ok(0.0);
        }
        Ok(lambda_cause / total * (1.0 - (-total * (s - r)).exp()))
    }
}

impl RiskPredictor for ConstantHazardPredictor {
    fn cif(&self, _profile: &SubjectProfile, s: f64, r: f64) -> Result<f64> {
        self.cif_cause(self.lambda_prg, s, r)
    }

    fn cif_competing(&self, _profile: &SubjectProfile, s: f64, r: f64) -> Result<f64> {
        self.cif_cause(self.lambda_trt, s, r)
    }

    fn surv(&self, _profile: &SubjectProfile, s: f64, r: f64) -> Result<f64> {
        check_interval(r, s)?;
        Ok((-(self.lambda_prg + self.lambda_trt) * (s - r)).exp())
    }

    fn cif_batch(&self, profile: &SubjectProfile, r: f64, queries: &[f64]) -> Result<Vec<f64>> {
        queries.iter().map(|&s| self.cif(profile, s, r)).collect()
    }
}
