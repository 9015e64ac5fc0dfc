//! Deconvolution kernels: real, even Fourier transform supported on [-1, 1]
//! with `φ_w(0) = 1` and edge behaviour `φ_w(1 - t) ~ A t^α` as `t ↓ 0`.

use std::fmt;
use std::sync::Arc;

use crate::quadrature::{integrate, Tolerance};
use crate::{Error, Real, Result};

type RealFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Clone)]
enum Shape<T> {
    Sinc,
    Fan,
    Wand,
    Custom {
        fourier: RealFn<T>,
        time_domain: Option<RealFn<T>>,
    },
}

/// A kernel `w` described by its Fourier transform `φ_w` and edge constants.
#[derive(Clone)]
pub struct Kernel<T> {
    name: String,
    shape: Shape<T>,
    edge_constant: T,
    edge_exponent: T,
}

impl<T: fmt::Debug> fmt::Debug for Kernel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("A", &self.edge_constant)
            .field("alpha", &self.edge_exponent)
            .finish()
    }
}

// |x| below this uses the power series of the Fan kernel.
const FAN_SERIES_CUTOFF: f64 = 2.0;

impl<T: Real> Kernel<T> {
    /// `w(x) = sin x / (π x)`, `φ_w = 1` on [-1, 1].
    pub fn sinc() -> Self {
        Self {
            name: "sinc".into(),
            shape: Shape::Sinc,
            edge_constant: T::one(),
            edge_exponent: T::zero(),
        }
    }

    /// `φ_w(t) = (1 - t²)³` on [-1, 1].
    pub fn fan() -> Self {
        Self {
            name: "fan".into(),
            shape: Shape::Fan,
            edge_constant: T::lit(8.0),
            edge_exponent: T::lit(3.0),
        }
    }

    /// `w(x) = 3/(8π) (sin(x/4) / (x/4))⁴`, a piecewise cubic `φ_w`.
    pub fn wand() -> Self {
        Self {
            name: "wand".into(),
            shape: Shape::Wand,
            edge_constant: T::lit(2.0),
            edge_exponent: T::lit(3.0),
        }
    }

    /// Looks up a built-in kernel: `"sinc"`, `"fan"` or `"wand"`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "sinc" => Ok(Self::sinc()),
            "fan" => Ok(Self::fan()),
            "wand" => Ok(Self::wand()),
            other => Err(Error::invalid(
                "kernel",
                format!("unknown kernel `{other}` (expected sinc | fan | wand)"),
            )),
        }
    }

    /// A user-supplied kernel. The transform is checked on a grid of step
    /// 1e-3: `φ_w(0) = 1`, evenness, vanishing outside [-1, 1] and the edge
    /// ratio `φ_w(1 - t) / (A t^α)` within 5% of 1 at `t = 1e-3`.
    ///
    /// Without `time_domain`, `w` is obtained by numerical Fourier inversion.
    pub fn custom<F>(
        name: impl Into<String>,
        fourier: F,
        time_domain: Option<RealFn<T>>,
        edge_constant: T,
        edge_exponent: T,
    ) -> Result<Self>
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        let name = name.into();
        let reject = |reason: String| Error::InvalidKernel {
            name: name.clone(),
            reason,
        };
        let tol = T::lit(1e-9);

        if !(edge_exponent >= T::zero()) {
            return Err(reject("edge exponent must be >= 0".into()));
        }
        if (fourier(T::zero()) - T::one()).abs() > tol {
            return Err(reject("fourier transform at 0 must equal 1".into()));
        }
        for k in 0..=1000 {
            let t = T::lit(k as f64 * 1e-3);
            let (p, m) = (fourier(t), fourier(-t));
            if !p.is_finite() || (p - m).abs() > tol {
                return Err(reject(format!("fourier transform is not even at t = {t}")));
            }
        }
        for k in 1..=1000 {
            let t = T::one() + T::lit(k as f64 * 1e-3);
            if fourier(t) != T::zero() || fourier(-t) != T::zero() {
                return Err(reject(format!(
                    "fourier transform is nonzero at |t| = {t} > 1"
                )));
            }
        }
        let t = T::lit(1e-3);
        let ratio = fourier(T::one() - t) / (edge_constant * t.powf(edge_exponent));
        if !((ratio - T::one()).abs() <= T::lit(0.05)) {
            return Err(reject(format!(
                "edge ratio phi(1 - t)/(A t^alpha) = {ratio} at t = 1e-3 is not within 5% of 1"
            )));
        }

        Ok(Self {
            name,
            shape: Shape::Custom {
                fourier: Arc::new(fourier),
                time_domain,
            },
            edge_constant,
            edge_exponent,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Edge constant `A`.
    pub fn edge_constant(&self) -> T {
        self.edge_constant
    }

    /// Edge exponent `α`.
    pub fn edge_exponent(&self) -> T {
        self.edge_exponent
    }

    /// `φ_w(t)`; zero for `|t| > 1`.
    pub fn fourier_transform(&self, t: T) -> T {
        let a = t.abs();
        if a > T::one() {
            return T::zero();
        }
        match &self.shape {
            Shape::Sinc => T::one(),
            Shape::Fan => {
                let u = T::one() - a * a;
                u * u * u
            }
            Shape::Wand => {
                if a >= T::lit(0.5) {
                    let u = T::one() - a;
                    T::lit(2.0) * u * u * u
                } else {
                    T::lit(6.0) * a * a * a - T::lit(6.0) * a * a + T::one()
                }
            }
            Shape::Custom { fourier, .. } => fourier(t),
        }
    }

    /// The kernel `w(x)` itself.
    pub fn time_domain(&self, x: T) -> T {
        let pi = T::PI();
        match &self.shape {
            Shape::Sinc => sinc(x) / pi,
            Shape::Fan => fan_time_domain(x),
            Shape::Wand => {
                let s = sinc(x / T::lit(4.0));
                let s2 = s * s;
                T::lit(3.0) / (T::lit(8.0) * pi) * s2 * s2
            }
            Shape::Custom {
                time_domain: Some(w),
                ..
            } => w(x),
            Shape::Custom { fourier, .. } => {
                let r = integrate(
                    |t| fourier(t) * (t * x).cos(),
                    T::zero(),
                    T::one(),
                    Tolerance::new(1e-13, 1e-12),
                );
                r.value / pi
            }
        }
    }
}

/// `sin x / x` with the removable singularity filled.
pub(crate) fn sinc<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-4) {
        let x2 = x * x;
        T::one() - x2 / T::lit(6.0) + x2 * x2 / T::lit(120.0)
    } else {
        x.sin() / x
    }
}

fn fan_time_domain<T: Real>(x: T) -> T {
    let pi = T::PI();
    let ax = x.abs();
    if ax < T::lit(FAN_SERIES_CUTOFF) {
        // w(x) = (1/π) Σ_k (-1)^k x^{2k}/(2k)! ∫_0^1 t^{2k}(1-t²)³ dt
        //      = (48/π) Σ_k (-1)^k x^{2k} / ((2k)! (2k+1)(2k+3)(2k+5)(2k+7))
        let x2 = x * x;
        let mut power = T::one(); // (-1)^k x^{2k} / (2k)!
        let mut sum = T::zero();
        for k in 0..60 {
            let kk = T::lit(2.0 * k as f64);
            let moment =
                (kk + T::one()) * (kk + T::lit(3.0)) * (kk + T::lit(5.0)) * (kk + T::lit(7.0));
            let term = power / moment;
            sum = sum + term;
            if term.abs() <= T::epsilon() * sum.abs() * T::lit(1e-2) {
                break;
            }
            power = -power * x2 / ((kk + T::one()) * (kk + T::lit(2.0)));
        }
        T::lit(48.0) * sum / pi
    } else {
        let x2 = x * x;
        let x4 = x2 * x2;
        T::lit(48.0) * x.cos() / (pi * x4) * (T::one() - T::lit(15.0) / x2)
            - T::lit(144.0) * x.sin() / (pi * x4 * x) * (T::lit(2.0) - T::lit(5.0) / x2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn builtins() -> Vec<Kernel<f64>> {
        vec![Kernel::sinc(), Kernel::fan(), Kernel::wand()]
    }

    fn inversion(k: &Kernel<f64>, x: f64) -> f64 {
        // (1/π) ∫_0^1 φ_w(t) cos(tx) dt, split at 1/2 for the wand kink
        let tol = Tolerance::new(1e-14, 0.0);
        let f = |t: f64| k.fourier_transform(t) * (t * x).cos();
        (integrate(f, 0.0, 0.5, tol).value + integrate(f, 0.5, 1.0, tol).value)
            / std::f64::consts::PI
    }

    #[test]
    fn sinc_values() {
        let k = Kernel::<f64>::sinc();
        assert_eq!(k.fourier_transform(0.5), 1.0);
        assert_eq!(k.fourier_transform(1.01), 0.0);
        assert_abs_diff_eq!(
            k.time_domain(0.0),
            1.0 / std::f64::consts::PI,
            epsilon = 1e-15
        );
        assert_eq!((k.edge_constant(), k.edge_exponent()), (1.0, 0.0));
    }

    #[test]
    fn fan_values() {
        let k = Kernel::<f64>::fan();
        assert_abs_diff_eq!(k.fourier_transform(0.5), 0.421875, epsilon = 1e-15);
        let t = 1e-3;
        assert!((k.fourier_transform(1.0 - t) / (8.0 * t.powi(3)) - 1.0).abs() < 5e-3);
        // mpmath quadrature of (1/π)∫_0^1 (1-t²)³ cos(tx) dt
        let frozen = [
            (0.0, 0.145_513_090_826_875_74),
            (0.3, 0.144_787_011_858_937_59),
            (2.0, 0.115_970_663_975_464_25),
            (5.0, 0.028_091_203_127_257_144),
            (10.0, -0.000_603_452_060_243_490_7),
        ];
        for (x, w) in frozen {
            assert_abs_diff_eq!(k.time_domain(x), w, epsilon = 1e-8);
            assert_abs_diff_eq!(k.time_domain(x), w, epsilon = 1e-13);
        }
    }

    #[test]
    fn fan_branches_agree_at_cutoff() {
        let k = Kernel::<f64>::fan();
        for &x in &[1.999_999, 2.0, 2.000_001] {
            assert_abs_diff_eq!(k.time_domain(x), inversion(&k, x), epsilon = 1e-13);
        }
    }

    #[test]
    fn wand_values() {
        let k = Kernel::<f64>::wand();
        assert_abs_diff_eq!(
            k.time_domain(0.0),
            3.0 / (8.0 * std::f64::consts::PI),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(k.fourier_transform(0.75), 0.03125, epsilon = 1e-15);
        assert_abs_diff_eq!(k.fourier_transform(0.25), 0.71875, epsilon = 1e-15);
        assert_abs_diff_eq!(k.time_domain(3.0), 0.081_442_941_805_696_6, epsilon = 1e-14);
    }

    #[test]
    fn transforms_are_even_normalised_and_supported() {
        for k in builtins() {
            assert_eq!(k.fourier_transform(0.0), 1.0);
            for i in -150..=150 {
                let t = i as f64 / 100.0;
                assert_eq!(
                    k.fourier_transform(t),
                    k.fourier_transform(-t),
                    "{}",
                    k.name()
                );
                if t.abs() > 1.0 {
                    assert_eq!(k.fourier_transform(t), 0.0);
                }
            }
        }
    }

    #[test]
    fn inversion_reproduces_time_domain() {
        for k in builtins() {
            for i in -400..=400 {
                let x = i as f64 * 0.05;
                assert_abs_diff_eq!(k.time_domain(x), inversion(&k, x), epsilon = 1e-6);
                assert_eq!(k.time_domain(x), k.time_domain(-x));
            }
        }
    }

    #[test]
    fn time_domain_integrates_to_one() {
        // sinc tails decay like 1/x; stopping at 2πm + π/2 leaves an O(1/L²) tail
        let quarter = std::f64::consts::FRAC_PI_2;
        for k in builtins() {
            let steps = if k.name() == "sinc" {
                4 * 400 + 1
            } else {
                1300
            };
            let tol = Tolerance::new(1e-13, 0.0);
            let total: f64 = (0..steps)
                .map(|i| {
                    let a = i as f64 * quarter;
                    integrate(|x| k.time_domain(x), a, a + quarter, tol).value
                })
                .sum();
            assert_abs_diff_eq!(2.0 * total, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn edge_ratio_improves() {
        for k in builtins() {
            let mut prev = f64::INFINITY;
            for p in 2..=5 {
                let t = 10f64.powi(-p);
                let r =
                    k.fourier_transform(1.0 - t) / (k.edge_constant() * t.powf(k.edge_exponent()));
                let d = (r - 1.0).abs();
                // the wand transform is exactly A t^α near the edge
                assert!(d <= prev || d < 1e-9, "{} at t = {t}", k.name());
                prev = d;
            }
        }
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(Kernel::<f64>::by_name("wand").unwrap().name(), "wand");
        assert!(Kernel::<f64>::by_name("epanechnikov").is_err());
    }

    #[test]
    fn custom_kernel_validation() {
        // triweight-on-[-1,1] transform reused under a new name passes
        let ok = Kernel::<f64>::custom(
            "fan-copy",
            |t: f64| {
                if t.abs() > 1.0 {
                    0.0
                } else {
                    (1.0 - t * t).powi(3)
                }
            },
            None,
            8.0,
            3.0,
        )
        .unwrap();
        assert_abs_diff_eq!(
            ok.time_domain(2.0),
            Kernel::<f64>::fan().time_domain(2.0),
            epsilon = 1e-10
        );

        let wrong_edge = Kernel::<f64>::custom(
            "bad-edge",
            |t: f64| {
                if t.abs() > 1.0 {
                    0.0
                } else {
                    (1.0 - t * t).powi(3)
                }
            },
            None,
            4.0,
            3.0,
        );
        assert!(matches!(wrong_edge, Err(Error::InvalidKernel { .. })));

        let unbounded =
            Kernel::<f64>::custom("gauss", |t: f64| (-t * t / 2.0).exp(), None, 1.0, 0.0);
        assert!(unbounded.is_err());

        let not_normalised = Kernel::<f64>::custom(
            "half",
            |t: f64| if t.abs() > 1.0 { 0.0 } else { 0.5 },
            None,
            0.5,
            0.0,
        );
        assert!(not_normalised.is_err());
    }

    #[test]
    fn single_precision_fan() {
        let k = Kernel::<f32>::fan();
        assert!((k.time_domain(0.3) - 0.144_787_01).abs() < 1e-6);
        assert!((k.time_domain(5.0) - 0.028_091_203).abs() < 1e-6);
    }
}
