//! Fixed 15-point Gauss-Kronrod quadrature.
//!
//! All survival/incidence integrals in this crate run through this rule,
//! with long intervals split into one panel per year so the error stays
//! bounded independently of the interval length.

/// Positive Kronrod abscissae on [-1, 1] (the full node set is symmetric,
/// with 0 listed last).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

/// Kronrod weights matching `XGK`.
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// 15-point Gauss-Kronrod rule on [-1, 1], affinely mapped to arbitrary
/// intervals, with optional splitting into equal-width panels.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureRule {
    /// Panels per year of interval length used by [`integrate_yearly`].
    ///
    /// [`integrate_yearly`]: QuadratureRule::integrate_yearly
    pub panels_per_year: usize,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self { panels_per_year: 1 }
    }
}

impl QuadratureRule {
    pub const fn gk15() -> Self {
        Self { panels_per_year: 1 }
    }

    /// All 15 (node, weight) pairs expanded to the reference interval.
    pub fn nodes_and_weights() -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(15);
        for j in 0..7 {
            out.push((-XGK[j], WGK[j]));
            out.push((XGK[j], WGK[j]));
        }
        out.push((XGK[7], WGK[7]));
        out
    }

    /// Integrate `f` over a single panel [a, b].
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = WGK[7] * f(center);
        for j in 0..7 {
            let offset = half * XGK[j];
            acc += WGK[j] * (f(center - offset) + f(center + offset));
        }
        acc * half
    }

    /// Integrate `f` over [a, b] split into `n` equal panels.
    pub fn integrate_panels<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = n.max(1);
        let width = (b - a) / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let lo = a + width * i as f64;
            let hi = if i + 1 == n { b } else { a + width * (i + 1) as f64 };
            acc += self.integrate(&f, lo, hi);
        }
        acc
    }

    /// Integrate `f` over [a, b] with one panel per year of length
    /// (`panels_per_year` scales this up).
    pub fn integrate_yearly<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let len = (b - a).abs();
        let n = (len * self.panels_per_year as f64).ceil() as usize;
        self.integrate_panels(f, a, b, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let total: f64 = QuadratureRule::nodes_and_weights()
            .iter()
            .map(|(_, w)| w)
            .sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exact_for_low_degree_polynomials() {
        let rule = QuadratureRule::gk15();
        // x^7 over [0, 2]: 2^8/8 = 32
        let got = rule.integrate(|x| x.powi(7), 0.0, 2.0);
        assert!((got - 32.0).abs() < 1e-12, "got {got}");
        // mixed degree-7 polynomial over [-1, 3]
        let f = |x: f64| 3.0 * x.powi(7) - 2.0 * x.powi(4) + x - 5.0;
        let antideriv = |x: f64| 3.0 * x.powi(8) / 8.0 - 2.0 * x.powi(5) / 5.0 + x * x / 2.0 - 5.0 * x;
        let got = rule.integrate(f, -1.0, 3.0);
        let want = antideriv(3.0) - antideriv(-1.0);
        assert!((got - want).abs() < 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn exponential_within_1e8_per_panel() {
        let rule = QuadratureRule::gk15();
        for &(a, b, rate, shift) in &[
            (0.0_f64, 1.0_f64, 0.7_f64, 0.2_f64),
            (1.0, 4.0, -0.5, 1.0),
            (0.5, 8.5, 0.3, -2.0),
        ] {
            let f = |x: f64| (rate * x + shift).exp();
            let want = ((rate * b + shift).exp() - (rate * a + shift).exp()) / rate;
            let got = rule.integrate_yearly(f, a, b);
            assert!(
                (got - want).abs() < 1e-8 * (b - a).max(1.0),
                "[{a},{b}] rate={rate}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn panel_splitting_is_additive() {
        let rule = QuadratureRule::gk15();
        let f = |x: f64| (0.3 * x).exp() * x.sin().mul_add(0.1, 1.0);
        let whole = rule.integrate_panels(f, 0.0, 6.0, 6);
        let split = rule.integrate_panels(&f, 0.0, 2.5, 3) + rule.integrate_panels(&f, 2.5, 6.0, 4);
        assert!((whole - split).abs() < 1e-9);
    }
}
