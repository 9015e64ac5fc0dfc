//! Asymptotic normalisations of `f_nh(x)` under supersmooth error.
//!
//! * Deterministic: `sd ≈ A Γ(α+1) h^{λ(1+α)+λ₀-1} e^{1/(μh^λ)} (μ/λ)^{1+α} / √(2nπ²)`.
//! * Corrected: the same with the Laplace-type approximation
//!   `∫_0^1 φ_w(s) e^{s^λ/(μh^λ)} ds ≈ A Γ(α+1) (μh^λ/λ)^{1+α} e^{1/(μh^λ)}`
//!   replaced by the integral itself.
//! * Self-normalised: `√n (f_nh(x) - E f_nh(x)) / s_n` with `s_n` built
//!   from the summands `Z_j = w_h((x - X_j)/h)/h`.

use std::io::Write;

use crate::estimator::EstimatorConfig;
use crate::kernels::Kernel;
use crate::noise::ErrorModel;
use crate::quadrature::{integrate, Tolerance};
use crate::special::ln_gamma;
use crate::{Error, Real, Result};

/// Constants entering the deterministic normalisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticSpec<T> {
    pub a: T,
    pub alpha: T,
    pub lambda0: T,
    pub lambda: T,
    pub mu: T,
    pub h: T,
    pub n: usize,
    pub x: T,
}

impl<T: Real> AsymptoticSpec<T> {
    pub fn new(kernel: &Kernel<T>, noise: &ErrorModel<T>, h: T, n: usize, x: T) -> Result<Self> {
        let spec = Self {
            a: kernel.edge_constant(),
            alpha: kernel.edge_exponent(),
            lambda0: noise.lambda0(),
            lambda: noise.lambda(),
            mu: noise.mu(),
            h,
            n,
            x,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > T::zero()) {
            return Err(Error::invalid(
                "h",
                format!("must be positive, got {}", self.h),
            ));
        }
        if self.n < 2 {
            return Err(Error::invalid(
                "n",
                format!("must be at least 2, got {}", self.n),
            ));
        }
        if !(self.lambda > T::one()) {
            return Err(Error::invalid(
                "lambda",
                format!("must exceed 1, got {}", self.lambda),
            ));
        }
        if !(self.mu > T::zero()) {
            return Err(Error::invalid(
                "mu",
                format!("must be positive, got {}", self.mu),
            ));
        }
        if !(self.a > T::zero()) || !(self.alpha >= T::zero()) {
            return Err(Error::invalid(
                "kernel edge constants",
                "need A > 0 and alpha >= 0",
            ));
        }
        Ok(())
    }

    /// `1 / (μ h^λ)`.
    fn edge_exponent(&self) -> T {
        (self.mu * self.h.powf(self.lambda)).recip()
    }
}

fn checked_exp<T: Real>(log_value: T) -> Result<T> {
    let v = log_value.exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow {
            exponent: log_value.as_f64(),
        })
    }
}

/// Theoretical standard deviation of `f_nh(x)` from the deterministic
/// central limit theorem.
pub fn theoretical_sd<T: Real>(spec: &AsymptoticSpec<T>) -> Result<T> {
    spec.validate()?;
    let one = T::one();
    let rate = spec.lambda * (one + spec.alpha) + spec.lambda0 - one;
    let n = T::lit(spec.n as f64);
    let log_sd = spec.a.ln()
        + ln_gamma(spec.alpha + one)
        + rate * spec.h.ln()
        + spec.edge_exponent()
        + (one + spec.alpha) * (spec.mu / spec.lambda).ln()
        - T::lit(0.5) * (T::lit(2.0) * n * T::PI() * T::PI()).ln();
    checked_exp(log_sd)
}

/// `∫_0^1 φ_w(s) e^{E (s^λ - 1)} ds` with `E = 1/(μh^λ)`: the edge integral
/// scaled by `e^{-E}`, finite for every `h > 0`.
fn scaled_edge_integral<T: Real>(kernel: &Kernel<T>, lambda: T, e: T) -> T {
    let integrand = |s: T| kernel.fourier_transform(s) * (e * (s.powf(lambda) - T::one())).exp();
    let tol = Tolerance::new(0.0, 1e-13);
    let half = T::lit(0.5);
    integrate(integrand, T::zero(), half, tol).value
        + integrate(integrand, half, T::one(), tol).value
}

/// `I(h) = ∫_0^1 φ_w(s) exp[s^λ/(μh^λ)] ds`.
pub fn edge_integral<T: Real>(kernel: &Kernel<T>, noise: &ErrorModel<T>, h: T) -> Result<T> {
    let spec = AsymptoticSpec::new(kernel, noise, h, 2, T::zero())?;
    let e = spec.edge_exponent();
    let scale = checked_exp(e)?;
    Ok(scale * scaled_edge_integral(kernel, spec.lambda, e))
}

/// `I(h)` divided by its approximation `A Γ(α+1) (μh^λ/λ)^{1+α} e^{1/(μh^λ)}`.
pub fn approximation_ratio<T: Real>(kernel: &Kernel<T>, noise: &ErrorModel<T>, h: T) -> Result<T> {
    let spec = AsymptoticSpec::new(kernel, noise, h, 2, T::zero())?;
    let e = spec.edge_exponent();
    let one = T::one();
    // the e^E factors cancel
    let log_approx =
        spec.a.ln() + ln_gamma(spec.alpha + one) - (one + spec.alpha) * (spec.lambda * e).ln();
    Ok(scaled_edge_integral(kernel, spec.lambda, e) / log_approx.exp())
}

/// Corrected theoretical standard deviation, `theoretical_sd × approximation_ratio`;
/// equal to `I(h) / (π h √(2n))` when `λ₀ = 0`.
pub fn corrected_sd<T: Real>(
    kernel: &Kernel<T>,
    noise: &ErrorModel<T>,
    h: T,
    n: usize,
) -> Result<T> {
    let spec = AsymptoticSpec::new(kernel, noise, h, n, T::zero())?;
    let e = spec.edge_exponent();
    let scale = checked_exp(e)?;
    let j = scaled_edge_integral(kernel, spec.lambda, e);
    let nn = T::lit(n as f64);
    Ok(scale * j * h.powf(spec.lambda0 - T::one()) / (T::PI() * (T::lit(2.0) * nn).sqrt()))
}

/// `(h, ratio)` pairs; `None` where the ratio could not be evaluated.
pub fn ratio_curve<T: Real>(
    kernel: &Kernel<T>,
    noise: &ErrorModel<T>,
    bandwidths: &[T],
) -> Vec<(T, Option<T>)> {
    bandwidths
        .iter()
        .map(|&h| {
            (
                h,
                approximation_ratio(kernel, noise, h)
                    .ok()
                    .filter(|r| r.is_finite()),
            )
        })
        .collect()
}

/// Columns `h,ratio`; failed rows leave the ratio cell empty.
pub fn write_ratio_csv<T: Real, W: Write>(curve: &[(T, Option<T>)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h", "ratio"])?;
    for (h, r) in curve {
        let cell = r.map(|v| v.as_f64().to_string()).unwrap_or_default();
        w.write_record([h.as_f64().to_string(), cell])?;
    }
    w.flush()?;
    Ok(())
}

/// Choice of `s_n²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticVariant {
    /// `(1/n) Σ Z_j²`.
    Plain,
    /// Sample variance of the `Z_j`.
    SampleVariance,
}

/// The self-normalised statistic from precomputed summands `Z_j`.
pub fn fan_statistic_from_terms<T: Real>(
    terms: &[T],
    centering: T,
    variant: StatisticVariant,
) -> Result<T> {
    let n = terms.len();
    if n < 2 {
        return Err(Error::invalid(
            "data",
            format!("need at least 2 observations, got {n}"),
        ));
    }
    let nn = T::lit(n as f64);
    let mean = terms.iter().fold(T::zero(), |a, &z| a + z) / nn;
    let scale_sq = match variant {
        StatisticVariant::Plain => terms.iter().fold(T::zero(), |a, &z| a + z * z) / nn,
        StatisticVariant::SampleVariance => {
            terms
                .iter()
                .fold(T::zero(), |a, &z| a + (z - mean) * (z - mean))
                / (nn - T::one())
        }
    };
    let largest = terms.iter().fold(T::zero(), |a, &z| a.max(z.abs()));
    // identical summands leave only rounding noise in the sample variance
    let floor = T::lit(64.0) * T::epsilon() * largest;
    if !(scale_sq.sqrt() > floor) {
        return Err(Error::DegenerateScale);
    }
    Ok(nn.sqrt() * (mean - centering) / scale_sq.sqrt())
}

/// `√n (f_nh(x) - centering) / s_n`, with `centering` normally `E f_nh(x)`.
pub fn fan_statistic<T: Real>(
    config: &EstimatorConfig<T>,
    data: &[T],
    x: T,
    centering: T,
    variant: StatisticVariant,
) -> Result<T> {
    let terms = config.kernel_terms(data, x)?;
    fan_statistic_from_terms(&terms, centering, variant)
}

/// Sample variance (divisor `n - 1`) of `cos((x - X_j)/h)`; zero for a
/// single observation.
pub fn cosine_variance_stat<T: Real>(data: &[T], x: T, h: T) -> Result<T> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if !(h > T::zero()) {
        return Err(Error::invalid("h", format!("must be positive, got {h}")));
    }
    let n = data.len();
    if n == 1 {
        return Ok(T::zero());
    }
    let c: Vec<T> = data.iter().map(|&xj| ((x - xj) / h).cos()).collect();
    let nn = T::lit(n as f64);
    let mean = c.iter().fold(T::zero(), |a, &v| a + v) / nn;
    Ok(c.iter()
        .fold(T::zero(), |a, &v| a + (v - mean) * (v - mean))
        / (nn - T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn fan() -> Kernel<f64> {
        Kernel::fan()
    }

    fn noise04() -> ErrorModel<f64> {
        ErrorModel::gaussian(0.4).unwrap()
    }

    fn tsd(h: f64, n: usize) -> f64 {
        theoretical_sd(&AsymptoticSpec::new(&fan(), &noise04(), h, n, 0.0).unwrap()).unwrap()
    }

    // erfi(x) = (2/√π) Σ x^{2k+1} / (k! (2k+1))
    fn erfi(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        for k in 1..200 {
            term *= x * x / k as f64;
            let add = term / (2 * k + 1) as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        2.0 * sum / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn theoretical_sd_table_values() {
        // mpmath evaluation of the closed form
        assert_abs_diff_eq!(tsd(0.24, 50), 0.428_821_850_4, epsilon = 1e-9);
        assert_abs_diff_eq!(tsd(0.18, 50), 0.168_597_458_6, epsilon = 1e-9);
        assert_abs_diff_eq!(tsd(0.25, 50), 0.511_786_035_5, epsilon = 1e-9);
        assert_abs_diff_eq!(tsd(0.17, 100), 0.107_755_176_8, epsilon = 1e-9);
    }

    #[test]
    fn sinc_reduction() {
        let (k, m) = (Kernel::<f64>::sinc(), noise04());
        let (h, n): (f64, usize) = (0.3, 50);
        let mu = 12.5;
        let expect = h * (1.0 / (mu * h * h)).exp() * (mu / 2.0)
            / (2.0 * n as f64 * std::f64::consts::PI.powi(2)).sqrt();
        let got = theoretical_sd(&AsymptoticSpec::new(&k, &m, h, n, 0.0).unwrap()).unwrap();
        assert_relative_eq!(got, expect, max_relative = 1e-13);
    }

    #[test]
    fn edge_integral_values() {
        assert_abs_diff_eq!(
            edge_integral(&fan(), &noise04(), 0.24).unwrap(),
            0.543_880_682_271_555_3,
            epsilon = 1e-10
        );
        // μ → ∞: ∫_0^1 (1 - s²)³ ds = 16/35
        let quiet = ErrorModel::gaussian(1e-6).unwrap();
        assert_abs_diff_eq!(
            edge_integral(&fan(), &quiet, 0.24).unwrap(),
            16.0 / 35.0,
            epsilon = 1e-9
        );
        // sinc: ∫_0^1 e^{c s²} ds = √π erfi(√c) / (2√c)
        let c: f64 = 1.0 / (12.5 * 0.09);
        let oracle = std::f64::consts::PI.sqrt() * erfi(c.sqrt()) / (2.0 * c.sqrt());
        let got = edge_integral(&Kernel::sinc(), &noise04(), 0.3).unwrap();
        assert_relative_eq!(got, oracle, max_relative = 1e-10);
        assert_relative_eq!(got, 1.395_400_610_033_773, max_relative = 1e-12);
    }

    #[test]
    fn overflow_is_reported() {
        assert!(matches!(
            edge_integral(&fan(), &noise04(), 0.01),
            Err(Error::Overflow { .. })
        ));
        assert!(matches!(
            corrected_sd(&fan(), &noise04(), 0.01, 50),
            Err(Error::Overflow { .. })
        ));
        // the ratio itself stays finite
        assert!(approximation_ratio(&fan(), &noise04(), 0.01)
            .unwrap()
            .is_finite());
    }

    #[test]
    fn corrected_sd_table_values() {
        let cases = [
            (0.24, 50, 0.072_134_415_86),
            (0.18, 50, 0.113_763_429_4),
            (0.25, 50, 0.068_206_202_41),
            (0.17, 100, 0.089_786_893_33),
            (0.15, 200, 0.083_936_922_62),
        ];
        for (h, n, expect) in cases {
            assert_abs_diff_eq!(
                corrected_sd(&fan(), &noise04(), h, n).unwrap(),
                expect,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn ratio_behaviour() {
        let r = |h| approximation_ratio(&fan(), &noise04(), h).unwrap();
        assert_abs_diff_eq!(r(0.24), 0.168_215_345_8, epsilon = 1e-9);
        let dev: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&h| (r(h) - 1.0).abs())
            .collect();
        assert!(dev[0] > dev[1] && dev[1] > dev[2]);
        // the approach to 1 is from above at small h
        assert!(r(0.1) > 1.0);
        assert!((r(0.01) - 1.0).abs() < (r(0.02) - 1.0).abs());
        assert!((r(0.005) - 1.0).abs() < 0.01);
        let sinc = |h| approximation_ratio(&Kernel::sinc(), &noise04(), h).unwrap();
        assert!(sinc(0.5) < 1.0 && sinc(1.0) < 1.0);
        assert_abs_diff_eq!(sinc(0.5), 0.519_452_427_966_600_4, epsilon = 1e-10);
    }

    #[test]
    fn ratio_csv_leaves_failures_empty() {
        let curve = vec![(0.5, Some(0.25)), (0.1, None)];
        let mut buf = Vec::new();
        write_ratio_csv(&curve, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "h,ratio\n0.5,0.25\n0.1,\n");
    }

    #[test]
    fn fan_statistic_brute_force() {
        let cfg = EstimatorConfig::new(fan(), noise04(), 0.24).unwrap();
        let data = [-0.3, 0.2, 1.1];
        let (x, centering) = (0.1, 0.3);
        let z: Vec<f64> = data
            .iter()
            .map(|&xj| cfg.smoothed_kernel((x - xj) / 0.24).unwrap() / 0.24)
            .collect();
        let f = (z[0] + z[1] + z[2]) / 3.0;
        let s = ((z[0] * z[0] + z[1] * z[1] + z[2] * z[2]) / 3.0).sqrt();
        let expect = 3f64.sqrt() * (f - centering) / s;
        let got = fan_statistic(&cfg, &data, x, centering, StatisticVariant::Plain).unwrap();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
    }

    #[test]
    fn fan_statistic_degenerate() {
        let cfg = EstimatorConfig::new(fan(), noise04(), 0.24).unwrap();
        let data = [0.7; 10];
        assert!(matches!(
            fan_statistic(&cfg, &data, 0.0, 0.1, StatisticVariant::SampleVariance),
            Err(Error::DegenerateScale)
        ));
        assert!(fan_statistic(&cfg, &data, 0.0, 0.1, StatisticVariant::Plain).is_ok());
        assert!(fan_statistic(&cfg, &[0.7], 0.0, 0.1, StatisticVariant::Plain).is_err());
    }

    #[test]
    fn cosine_variance_cases() {
        assert_eq!(cosine_variance_stat(&[2.0; 5], 0.3, 0.25).unwrap(), 0.0);
        assert!(cosine_variance_stat::<f64>(&[], 0.0, 0.25).is_err());
        let data = [-1.0, 0.5, 2.0];
        let v = cosine_variance_stat(&data, 0.0, 1e6).unwrap();
        assert!(v < 1e-20);
        // brute force
        let c: Vec<f64> = data
            .iter()
            .map(|&x: &f64| ((0.3 - x) / 0.5).cos())
            .collect();
        let m = c.iter().sum::<f64>() / 3.0;
        let expect = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 2.0;
        assert_abs_diff_eq!(
            cosine_variance_stat(&data, 0.3, 0.5).unwrap(),
            expect,
            epsilon = 1e-15
        );
    }

    #[test]
    fn validation() {
        assert!(AsymptoticSpec::new(&fan(), &noise04(), 0.0, 50, 0.0).is_err());
        assert!(AsymptoticSpec::new(&fan(), &noise04(), 0.2, 1, 0.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn corrected_is_theoretical_times_ratio(h in 0.05f64..1.0, n in 2usize..5000, sd in 0.2f64..3.0) {
            for kernel in [Kernel::fan(), Kernel::sinc(), Kernel::wand()] {
                let noise = ErrorModel::gaussian(sd).unwrap();
                let spec = AsymptoticSpec::new(&kernel, &noise, h, n, 0.0).unwrap();
                let (Ok(t), Ok(c)) = (theoretical_sd(&spec), corrected_sd(&kernel, &noise, h, n)) else { continue };
                let r = approximation_ratio(&kernel, &noise, h).unwrap();
                prop_assert!(((t * r) / c - 1.0).abs() < 1e-10);
                prop_assert!(r > 0.0);
            }
        }

        #[test]
        fn theoretical_sd_scales_as_inverse_root_n(h in 0.1f64..1.0, n in 2usize..100_000) {
            prop_assert!((tsd(h, 4 * n) * 2.0 / tsd(h, n) - 1.0).abs() < 1e-13);
        }

        #[test]
        fn fan_statistic_permutation_invariant(
            data in prop::collection::vec(-3.0f64..3.0, 2..7),
            seed in any::<u64>(),
        ) {
            let cfg = EstimatorConfig::new(fan(), noise04(), 0.3).unwrap();
            let mut shuffled = data.clone();
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a = fan_statistic(&cfg, &data, 0.2, 0.25, StatisticVariant::Plain).unwrap();
            let b = fan_statistic(&cfg, &shuffled, 0.2, 0.25, StatisticVariant::Plain).unwrap();
            prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
        }
    }
}
