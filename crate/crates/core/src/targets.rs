//! Ground-truth target densities with closed-form characteristic functions.

use num_complex::Complex;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::noise::ErrorModel;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalComponent<T> {
    pub weight: T,
    pub mean: T,
    pub sd: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetDensity<T> {
    Normal {
        mean: T,
        sd: T,
    },
    /// Chi-square with three degrees of freedom.
    ChiSquare3,
    /// Finite normal mixture; weights sum to one.
    Mixture(Vec<NormalComponent<T>>),
}

fn normal_pdf<T: Real>(x: T, mean: T, sd: T) -> T {
    let z = (x - mean) / sd;
    (-T::lit(0.5) * z * z).exp() / (sd * T::TAU().sqrt())
}

fn normal_cf<T: Real>(t: T, mean: T, sd: T) -> Complex<T> {
    let modulus = (-T::lit(0.5) * sd * sd * t * t).exp();
    Complex::from_polar(modulus, mean * t)
}

impl<T: Real> TargetDensity<T> {
    /// Density #1: `N(0, 1)`.
    pub fn standard_normal() -> Self {
        TargetDensity::Normal {
            mean: T::zero(),
            sd: T::one(),
        }
    }

    /// Density #2: `χ²(3)`.
    pub fn chi_square3() -> Self {
        TargetDensity::ChiSquare3
    }

    /// Density #3: `0.6 N(-2, 1) + 0.4 N(2, 0.8²)`.
    pub fn bimodal_mixture() -> Self {
        TargetDensity::Mixture(vec![
            NormalComponent {
                weight: T::lit(0.6),
                mean: T::lit(-2.0),
                sd: T::one(),
            },
            NormalComponent {
                weight: T::lit(0.4),
                mean: T::lit(2.0),
                sd: T::lit(0.8),
            },
        ])
    }

    /// `"normal"`, `"chisq3"` or `"mixture"`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "normal" => Ok(Self::standard_normal()),
            "chisq3" => Ok(Self::chi_square3()),
            "mixture" => Ok(Self::bimodal_mixture()),
            other => Err(Error::invalid(
                "target",
                format!("unknown target `{other}` (expected normal | chisq3 | mixture)"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TargetDensity::Normal { .. } => "normal",
            TargetDensity::ChiSquare3 => "chisq3",
            TargetDensity::Mixture(_) => "mixture",
        }
    }

    pub fn pdf(&self, x: T) -> T {
        match self {
            TargetDensity::Normal { mean, sd } => normal_pdf(x, *mean, *sd),
            TargetDensity::ChiSquare3 => {
                if x <= T::zero() {
                    T::zero()
                } else {
                    x.sqrt() * (-x / T::lit(2.0)).exp() / T::TAU().sqrt()
                }
            }
            TargetDensity::Mixture(parts) => parts.iter().fold(T::zero(), |acc, c| {
                acc + c.weight * normal_pdf(x, c.mean, c.sd)
            }),
        }
    }

    /// `φ_f(t) = E e^{itY}`.
    pub fn cf(&self, t: T) -> Complex<T> {
        match self {
            TargetDensity::Normal { mean, sd } => normal_cf(t, *mean, *sd),
            TargetDensity::ChiSquare3 => {
                // (1 - 2it)^{-3/2}: arg(1 - 2it) = -atan(2t) stays inside
                // (-π/2, π/2), so the polar form is the continuous branch
                // through 1 at t = 0.
                let two_t = T::lit(2.0) * t;
                let modulus = (T::one() + two_t * two_t).powf(-T::lit(0.75));
                Complex::from_polar(modulus, T::lit(1.5) * two_t.atan())
            }
            TargetDensity::Mixture(parts) => parts
                .iter()
                .fold(Complex::new(T::zero(), T::zero()), |acc, c| {
                    acc + normal_cf(t, c.mean, c.sd) * c.weight
                }),
        }
    }

    /// `|φ_f(t)|²`.
    pub fn cf_norm_sqr(&self, t: T) -> T {
        match self {
            TargetDensity::ChiSquare3 => {
                let two_t = T::lit(2.0) * t;
                (T::one() + two_t * two_t).powf(-T::lit(1.5))
            }
            _ => self.cf(t).norm_sqr(),
        }
    }

    pub fn mean(&self) -> T {
        match self {
            TargetDensity::Normal { mean, .. } => *mean,
            TargetDensity::ChiSquare3 => T::lit(3.0),
            TargetDensity::Mixture(parts) => parts
                .iter()
                .fold(T::zero(), |acc, c| acc + c.weight * c.mean),
        }
    }

    pub fn variance(&self) -> T {
        match self {
            TargetDensity::Normal { sd, .. } => *sd * *sd,
            TargetDensity::ChiSquare3 => T::lit(6.0),
            TargetDensity::Mixture(parts) => {
                let m = self.mean();
                parts.iter().fold(T::zero(), |acc, c| {
                    acc + c.weight * (c.sd * c.sd + c.mean * c.mean)
                }) - m * m
            }
        }
    }

    /// `∫ f² = (1/2π) ∫ |φ_f|²`, in closed form.
    pub fn l2_norm_sq(&self) -> T {
        match self {
            TargetDensity::Normal { sd, .. } => T::one() / (T::lit(2.0) * *sd * T::PI().sqrt()),
            // ∫_0^∞ x e^{-x} / (2π) dx
            TargetDensity::ChiSquare3 => T::one() / T::TAU(),
            TargetDensity::Mixture(parts) => {
                let mut acc = T::zero();
                for a in parts {
                    for b in parts {
                        let s = (a.sd * a.sd + b.sd * b.sd).sqrt();
                        acc = acc + a.weight * b.weight * normal_pdf(a.mean - b.mean, T::zero(), s);
                    }
                }
                acc
            }
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> T
    where
        StandardNormal: Distribution<T>,
    {
        match self {
            TargetDensity::Normal { mean, sd } => {
                let z: T = StandardNormal.sample(rng);
                *mean + *sd * z
            }
            TargetDensity::ChiSquare3 => (0..3).fold(T::zero(), |acc, _| {
                let z: T = StandardNormal.sample(rng);
                acc + z * z
            }),
            TargetDensity::Mixture(parts) => {
                let u: f64 = rng.random();
                let mut cumulative = 0.0;
                let last = parts.len() - 1;
                let pick = parts
                    .iter()
                    .position(|c| {
                        cumulative += c.weight.as_f64();
                        u < cumulative
                    })
                    .unwrap_or(last);
                let c = &parts[pick];
                let z: T = StandardNormal.sample(rng);
                c.mean + c.sd * z
            }
        }
    }
}

/// Noise-to-signal ratio `100 · Var Z / Var Y`, in percent.
pub fn nsr<T: Real>(target: &TargetDensity<T>, noise: &ErrorModel<T>) -> Result<T> {
    let var = target.variance();
    if !(var > T::zero()) || !var.is_finite() {
        return Err(Error::invalid(
            "target",
            format!("variance must be positive, got {var}"),
        ));
    }
    Ok(T::lit(100.0) * noise.sd() * noise.sd() / var)
}

/// `n` i.i.d. draws of `Y + Z`.
pub fn sample_convolved<T, R>(
    target: &TargetDensity<T>,
    noise: &ErrorModel<T>,
    n: usize,
    rng: &mut R,
) -> Result<Vec<T>>
where
    T: Real,
    R: RngCore + ?Sized,
    StandardNormal: Distribution<T>,
{
    if n == 0 {
        return Err(Error::invalid("n", "sample size must be at least 1"));
    }
    (0..n)
        .map(|_| {
            let y = target.sample(rng);
            Ok(y + noise.sample(rng)?)
        })
        .collect()
}
