//! Supersmooth measurement-error models.
//!
//! An error density `k` is supersmooth when its characteristic function
//! satisfies `φ_k(t) ~ C |t|^{λ₀} exp(-|t|^λ / μ)` with `λ > 1`, `μ > 0`,
//! and `φ_k` never vanishes. Only the Gaussian is built in; other models
//! supply their own constants.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Real, Result};

type Sampler<T> = Arc<dyn Fn(&mut dyn RngCore) -> T + Send + Sync>;

#[derive(Clone)]
enum Family<T> {
    Gaussian,
    /// Symmetric error with a real characteristic function.
    Custom {
        cf: Arc<dyn Fn(T) -> T + Send + Sync>,
        sampler: Option<Sampler<T>>,
    },
}

#[derive(Clone)]
pub struct ErrorModel<T> {
    family: Family<T>,
    sd: T,
    c: T,
    lambda0: T,
    lambda: T,
    mu: T,
}

impl<T: fmt::Debug> fmt::Debug for ErrorModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let family = match self.family {
            Family::Gaussian => "gaussian",
            Family::Custom { .. } => "custom",
        };
        f.debug_struct("ErrorModel")
            .field("family", &family)
            .field("sd", &self.sd)
            .field("C", &self.c)
            .field("lambda0", &self.lambda0)
            .field("lambda", &self.lambda)
            .field("mu", &self.mu)
            .finish()
    }
}

impl<T: Real> ErrorModel<T> {
    /// `N(0, sd²)`: `φ_k(t) = exp(-sd² t² / 2)`, so `C = 1`, `λ₀ = 0`,
    /// `λ = 2`, `μ = 2 / sd²`.
    pub fn gaussian(sd: T) -> Result<Self> {
        if !(sd > T::zero()) || !sd.is_finite() {
            return Err(Error::invalid(
                "noise sd",
                format!("must be positive and finite, got {sd}"),
            ));
        }
        Ok(Self {
            family: Family::Gaussian,
            sd,
            c: T::one(),
            lambda0: T::zero(),
            lambda: T::lit(2.0),
            mu: T::lit(2.0) / (sd * sd),
        })
    }

    /// A symmetric supersmooth error with real characteristic function `cf`.
    /// The constants `(C, λ₀, λ, μ)` are taken as given.
    pub fn supersmooth<F>(cf: F, sd: T, c: T, lambda0: T, lambda: T, mu: T) -> Result<Self>
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        if !(sd > T::zero()) {
            return Err(Error::invalid("noise sd", "must be positive"));
        }
        if !(lambda > T::one()) {
            return Err(Error::invalid(
                "lambda",
                format!("supersmooth errors need lambda > 1, got {lambda}"),
            ));
        }
        if !(mu > T::zero()) {
            return Err(Error::invalid("mu", format!("must be positive, got {mu}")));
        }
        if (cf(T::zero()) - T::one()).abs() > T::lit(1e-12) {
            return Err(Error::invalid(
                "cf",
                "characteristic function must equal 1 at 0",
            ));
        }
        Ok(Self {
            family: Family::Custom {
                cf: Arc::new(cf),
                sampler: None,
            },
            sd,
            c,
            lambda0,
            lambda,
            mu,
        })
    }

    /// Attaches a variate generator to a custom model.
    pub fn with_sampler<F>(mut self, sampler: F) -> Self
    where
        F: Fn(&mut dyn RngCore) -> T + Send + Sync + 'static,
    {
        if let Family::Custom { sampler: slot, .. } = &mut self.family {
            *slot = Some(Arc::new(sampler));
        }
        self
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.family, Family::Gaussian)
    }

    pub fn sd(&self) -> T {
        self.sd
    }

    pub fn c(&self) -> T {
        self.c
    }

    pub fn lambda0(&self) -> T {
        self.lambda0
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    /// `φ_k(t)`.
    pub fn cf(&self, t: T) -> Complex<T> {
        let re = match &self.family {
            Family::Gaussian => (-T::lit(0.5) * self.sd * self.sd * t * t).exp(),
            Family::Custom { cf, .. } => cf(t),
        };
        Complex::new(re, T::zero())
    }

    /// `ln(1 / |φ_k(t)|)`, never overflowing.
    pub fn log_inverse_cf_magnitude(&self, t: T) -> T {
        match &self.family {
            Family::Gaussian => T::lit(0.5) * self.sd * self.sd * t * t,
            Family::Custom { cf, .. } => -cf(t).abs().ln(),
        }
    }

    /// `1 / φ_k(t)`, or [`Error::Overflow`] when it is not representable.
    pub fn inverse_cf_magnitude(&self, t: T) -> Result<T> {
        let exponent = self.log_inverse_cf_magnitude(t);
        if !(exponent <= T::max_exp_arg()) {
            return Err(Error::Overflow {
                exponent: exponent.as_f64(),
            });
        }
        match &self.family {
            Family::Gaussian => Ok(exponent.exp()),
            Family::Custom { cf, .. } => {
                let v = T::one() / cf(t);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Overflow {
                        exponent: exponent.as_f64(),
                    })
                }
            }
        }
    }

    /// Draws one error variate.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<T>
    where
        StandardNormal: Distribution<T>,
    {
        match &self.family {
            Family::Gaussian => {
                let z: T = StandardNormal.sample(rng);
                Ok(self.sd * z)
            }
            Family::Custom {
                sampler: Some(s), ..
            } => {
                let mut adapter = DynRng(rng);
                Ok(s(&mut adapter))
            }
            Family::Custom { sampler: None, .. } => Err(Error::invalid(
                "noise",
                "custom error model has no sampler attached",
            )),
        }
    }
}

struct DynRng<'a, R: ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for DynRng<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}
