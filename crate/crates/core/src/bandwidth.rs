//! Exact MISE of the deconvolution estimator and grid-search bandwidth
//! selection.
//!
//! By Parseval, with `φ_w` supported on [-1, 1]:
//!
//! ```text
//! MISE(h) = 1/(2πn) ∫ φ_w(ht)² / |φ_k(t)|² dt
//!         + (1 - 1/n)/(2π) ∫ φ_w(ht)² |φ_f(t)|² dt
//!         - 1/π ∫ φ_w(ht) |φ_f(t)|² dt
//!         + ∫ f²
//! ```

use std::io::Write;

use rayon::prelude::*;

use crate::kernels::Kernel;
use crate::noise::ErrorModel;
use crate::quadrature::{integrate, Tolerance};
use crate::targets::TargetDensity;
use crate::{Error, Real, Result};

/// The four integrals making up the MISE; only the first depends on the
/// noise and only the combination with `n` differs across sample sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiseTerms<T> {
    /// `∫ φ_w(ht)² / |φ_k(t)|² dt`; infinite on overflow.
    pub variance_integral: T,
    /// `∫ φ_w(ht)² |φ_f(t)|² dt`.
    pub squared_kernel_integral: T,
    /// `∫ φ_w(ht) |φ_f(t)|² dt`.
    pub kernel_integral: T,
    /// `∫ f²`.
    pub target_l2: T,
}

impl<T: Real> MiseTerms<T> {
    pub fn compute(
        kernel: &Kernel<T>,
        noise: &ErrorModel<T>,
        target: &TargetDensity<T>,
        h: T,
    ) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::invalid(
                "bandwidth",
                format!("must be positive, got {h}"),
            ));
        }
        let tol = Tolerance::new(1e-15, 1e-12);
        let two_over_h = T::lit(2.0) / h;
        // symmetric integrals over |t| <= 1/h, substituted s = h t
        let over_support = |g: &dyn Fn(T) -> T| {
            let half = T::lit(0.5);
            two_over_h
                * (integrate(g, T::zero(), half, tol).value
                    + integrate(g, half, T::one(), tol).value)
        };

        let edge = T::lit(2.0) * noise.log_inverse_cf_magnitude(h.recip());
        let variance_integral = if edge > T::max_exp_arg() {
            T::infinity()
        } else {
            over_support(&|s: T| {
                let w = kernel.fourier_transform(s);
                w * w * (T::lit(2.0) * noise.log_inverse_cf_magnitude(s / h)).exp()
            })
        };
        let squared_kernel_integral = over_support(&|s: T| {
            let w = kernel.fourier_transform(s);
            w * w * target.cf_norm_sqr(s / h)
        });
        let kernel_integral =
            over_support(&|s: T| kernel.fourier_transform(s) * target.cf_norm_sqr(s / h));

        Ok(Self {
            variance_integral,
            squared_kernel_integral,
            kernel_integral,
            target_l2: target.l2_norm_sq(),
        })
    }

    pub fn mise(&self, n: usize) -> T {
        let n = T::lit(n as f64);
        let tau = T::TAU();
        self.variance_integral / (tau * n)
            + (T::one() - n.recip()) * self.squared_kernel_integral / tau
            - self.kernel_integral / T::PI()
            + self.target_l2
    }

    /// Integrated variance `(1/n)(∫φ_w²/|φ_k|² - ∫φ_w²|φ_f|²)/(2π)`.
    pub fn integrated_variance(&self, n: usize) -> T {
        (self.variance_integral - self.squared_kernel_integral) / (T::TAU() * T::lit(n as f64))
    }

    /// Integrated squared bias `∫ (w_(h) * f - f)²`.
    pub fn integrated_squared_bias(&self) -> T {
        self.squared_kernel_integral / T::TAU() - self.kernel_integral / T::PI() + self.target_l2
    }
}

/// Exact MISE; `+∞` when `1/|φ_k|²` overflows inside the support.
pub fn exact_mise<T: Real>(
    kernel: &Kernel<T>,
    noise: &ErrorModel<T>,
    target: &TargetDensity<T>,
    n: usize,
    h: T,
) -> Result<T> {
    if n == 0 {
        return Err(Error::invalid("n", "sample size must be at least 1"));
    }
    Ok(MiseTerms::compute(kernel, noise, target, h)?.mise(n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiseCurve<T> {
    pub bandwidths: Vec<T>,
    pub mise: Vec<T>,
    pub argmin_h: T,
    pub n: usize,
}

impl<T: Real> MiseCurve<T> {
    pub fn argmin_index(&self) -> usize {
        self.bandwidths
            .iter()
            .position(|&h| h == self.argmin_h)
            .expect("argmin is one of the bandwidths")
    }

    pub fn min_mise(&self) -> T {
        self.mise[self.argmin_index()]
    }

    /// Columns `h,mise`; overflowed entries are written as `inf`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["h", "mise"])?;
        for (h, m) in self.bandwidths.iter().zip(&self.mise) {
            w.write_record([h.as_f64().to_string(), m.as_f64().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `h_k = 0.01 k`, `k = 1..=100`.
pub fn default_bandwidth_grid<T: Real>() -> Vec<T> {
    (1..=100)
        .map(|k| T::lit(k as f64) / T::lit(100.0))
        .collect()
}

/// Exact MISE over `bandwidths`; the minimiser is the smallest `h` among
/// ties, and infinite entries never win.
pub fn mise_curve<T: Real>(
    kernel: &Kernel<T>,
    noise: &ErrorModel<T>,
    target: &TargetDensity<T>,
    n: usize,
    bandwidths: &[T],
) -> Result<MiseCurve<T>> {
    let mise: Vec<T> = bandwidths
        .par_iter()
        .map(|&h| exact_mise(kernel, noise, target, n, h))
        .collect::<Result<_>>()?;

    let mut best: Option<usize> = None;
    for (i, m) in mise.iter().enumerate() {
        if !m.is_finite() {
            continue;
        }
        match best {
            Some(b) if mise[b] <= *m => {}
            _ => best = Some(i),
        }
    }
    let best = best.ok_or(Error::AllInfinite)?;
    Ok(MiseCurve {
        bandwidths: bandwidths.to_vec(),
        argmin_h: bandwidths[best],
        mise,
        n,
    })
}

/// Grid search over `h = 0.01, 0.02, …, 1.00`.
pub fn mise_grid_search<T: Real>(
    kernel: &Kernel<T>,
    noise: &ErrorModel<T>,
    target: &TargetDensity<T>,
    n: usize,
) -> Result<MiseCurve<T>> {
    mise_curve(kernel, noise, target, n, &default_bandwidth_grid())
}
