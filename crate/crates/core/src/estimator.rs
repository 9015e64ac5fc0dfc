//! The deconvolution kernel density estimator
//!
//! ```text
//! f_nh(x) = (1/2π) ∫ e^{-itx} φ_w(ht) φ_emp(t) / φ_k(t) dt
//!         = (1/(nh)) Σ_j w_h((x - X_j)/h),
//! w_h(u)  = (1/2π) ∫ e^{-itu} φ_w(t) / φ_k(t/h) dt
//! ```
//!
//! evaluated either pointwise (adaptive quadrature of `w_h`) or on a grid
//! (linear binning plus FFT).

use std::io::Write;

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::kernels::Kernel;
use crate::noise::ErrorModel;
use crate::quadrature::{integrate, Tolerance};
use crate::targets::TargetDensity;
use crate::{Error, Real, Result};

pub const DEFAULT_GRID_POINTS: usize = 1024;
const MIN_GRID_POINTS: usize = 256;
// zero padding factor for the circular convolution
const FFT_PADDING: usize = 8;

/// Evaluation grid `lo + k (hi - lo)/(num_points - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub lo: T,
    pub hi: T,
    pub num_points: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn new(lo: T, hi: T, num_points: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(
                "grid",
                format!("need finite lo < hi, got [{lo}, {hi}]"),
            ));
        }
        if num_points < MIN_GRID_POINTS || !num_points.is_power_of_two() {
            return Err(Error::invalid(
                "grid",
                format!("num_points must be a power of two >= {MIN_GRID_POINTS}, got {num_points}"),
            ));
        }
        Ok(Self { lo, hi, num_points })
    }

    /// Data range padded by `4h + 4 sd` on each side.
    pub fn around_data(data: &[T], bandwidth: T, noise_sd: T, num_points: usize) -> Result<Self> {
        let (min, max) = data_range(data)?;
        let pad = T::lit(4.0) * (bandwidth + noise_sd);
        Self::new(min - pad, max + pad, num_points)
    }

    pub fn step(&self) -> T {
        (self.hi - self.lo) / T::lit((self.num_points - 1) as f64)
    }

    pub fn points(&self) -> Vec<T> {
        let dx = self.step();
        (0..self.num_points)
            .map(|k| self.lo + dx * T::lit(k as f64))
            .collect()
    }
}

fn data_range<T: Real>(data: &[T]) -> Result<(T, T)> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut min = data[0];
    let mut max = data[0];
    for &x in data {
        if !x.is_finite() {
            return Err(Error::invalid(
                "data",
                format!("non-finite observation {x}"),
            ));
        }
        min = min.min(x);
        max = max.max(x);
    }
    Ok((min, max))
}

#[derive(Debug, Clone)]
pub struct EstimatorConfig<T> {
    pub kernel: Kernel<T>,
    pub noise: ErrorModel<T>,
    bandwidth: T,
    /// `None` selects [`GridSpec::around_data`] with the default size.
    pub grid: Option<GridSpec<T>>,
}

impl<T: Real> EstimatorConfig<T> {
    pub fn new(kernel: Kernel<T>, noise: ErrorModel<T>, bandwidth: T) -> Result<Self> {
        if !(bandwidth > T::zero()) || !bandwidth.is_finite() {
            return Err(Error::invalid(
                "bandwidth",
                format!("must be positive, got {bandwidth}"),
            ));
        }
        Ok(Self {
            kernel,
            noise,
            bandwidth,
            grid: None,
        })
    }

    pub fn with_grid(mut self, grid: GridSpec<T>) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    /// Fails with [`Error::Overflow`] if `1/φ_k` overflows inside the
    /// spectral support `|t| <= 1/h`.
    pub fn check_overflow(&self) -> Result<()> {
        self.noise
            .inverse_cf_magnitude(self.bandwidth.recip())
            .map(|_| ())
    }

    /// Spectral multiplier `φ_w(ht) / φ_k(t)`; zero for `|t| > 1/h`.
    pub fn multiplier(&self, t: T) -> Result<T> {
        let s = self.bandwidth * t;
        if s.abs() > T::one() {
            return Ok(T::zero());
        }
        Ok(self.kernel.fourier_transform(s) * self.noise.inverse_cf_magnitude(t)?)
    }

    /// `w_h(u) = (1/π) ∫_0^1 cos(su) φ_w(s) / φ_k(s/h) ds`.
    pub fn smoothed_kernel(&self, u: T) -> Result<T> {
        self.check_overflow()?;
        let h = self.bandwidth;
        let integrand = |s: T| {
            self.kernel.fourier_transform(s)
                * self.noise.log_inverse_cf_magnitude(s / h).exp()
                * (s * u).cos()
        };
        let tol = Tolerance::new(1e-10, 1e-12);
        let half = T::lit(0.5);
        // split at 1/2: the wand transform has a kink there
        let value = integrate(integrand, T::zero(), half, tol).value
            + integrate(integrand, half, T::one(), tol).value;
        Ok(value / T::PI())
    }

    /// `Z_j = (1/h) w_h((x - X_j)/h)` for every observation.
    pub fn kernel_terms(&self, data: &[T], x: T) -> Result<Vec<T>> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        let h = self.bandwidth;
        data.iter()
            .map(|&xj| Ok(self.smoothed_kernel((x - xj) / h)? / h))
            .collect()
    }

    /// `f_nh(x)` by direct quadrature. Not clipped at zero.
    pub fn estimate_at(&self, data: &[T], x: T) -> Result<T> {
        let terms = self.kernel_terms(data, x)?;
        Ok(terms.iter().fold(T::zero(), |a, &z| a + z) / T::lit(terms.len() as f64))
    }

    /// `f_nh` on the configured grid via binning and FFT.
    pub fn estimate_grid_fft(&self, data: &[T]) -> Result<EstimateGrid<T>> {
        let grid = match self.grid {
            Some(g) => g,
            None => {
                GridSpec::around_data(data, self.bandwidth, self.noise.sd(), DEFAULT_GRID_POINTS)?
            }
        };
        estimate_grid_fft(self, &grid, data)
    }
}

/// `φ_emp(t) = (1/n) Σ e^{itX_j}`.
pub fn empirical_cf<T: Real>(data: &[T], t: T) -> Result<Complex<T>> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let (re, im) = data.iter().fold((T::zero(), T::zero()), |(re, im), &x| {
        let (s, c) = (t * x).sin_cos();
        (re + c, im + s)
    });
    let n = T::lit(data.len() as f64);
    Ok(Complex::new(re / n, im / n))
}

/// Grid of estimator values and the spectral quantities behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateGrid<T> {
    pub points: Vec<T>,
    pub values: Vec<T>,
    /// Frequencies `t` with `|t| <= 1/h`, ascending.
    pub frequencies: Vec<T>,
    /// `φ_w(ht) / φ_k(t)` at `frequencies`.
    pub multipliers: Vec<T>,
}

#[derive(Serialize)]
struct GridJson {
    x: Vec<f64>,
    f: Vec<f64>,
}

impl<T: Real> EstimateGrid<T> {
    /// Trapezoid rule for `∫ g(x, f_nh(x)) dx` over the grid.
    pub fn trapezoid<G: Fn(T, T) -> T>(&self, g: G) -> T {
        let mut acc = T::zero();
        for i in 1..self.points.len() {
            let dx = self.points[i] - self.points[i - 1];
            acc = acc
                + T::lit(0.5)
                    * dx
                    * (g(self.points[i - 1], self.values[i - 1])
                        + g(self.points[i], self.values[i]));
        }
        acc
    }

    /// `∫ (f_nh - f)²` over the grid.
    pub fn integrated_squared_error<F: Fn(T) -> T>(&self, truth: F) -> T {
        self.trapezoid(|x, v| {
            let d = v - truth(x);
            d * d
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "f_nh"])?;
        for (x, v) in self.points.iter().zip(&self.values) {
            w.write_record([x.as_f64().to_string(), v.as_f64().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON object `{"x": [...], "f": [...]}`.
    pub fn to_json(&self) -> Result<String> {
        let view = GridJson {
            x: self.points.iter().map(|v| v.as_f64()).collect(),
            f: self.values.iter().map(|v| v.as_f64()).collect(),
        };
        Ok(serde_json::to_string(&view)?)
    }
}

fn estimate_grid_fft<T: Real>(
    config: &EstimatorConfig<T>,
    grid: &GridSpec<T>,
    data: &[T],
) -> Result<EstimateGrid<T>> {
    let (dmin, dmax) = data_range(data)?;
    config.check_overflow()?;
    let h = config.bandwidth;
    let m = grid.num_points;
    let dx = grid.step();
    let cutoff = h.recip();
    if cutoff >= T::PI() / dx {
        return Err(Error::invalid(
            "grid",
            format!("spacing {dx} cannot resolve frequencies up to 1/h = {cutoff}"),
        ));
    }

    // lattice index k <-> lo + k dx, extended to cover the data
    let index = |x: T| ((x - grid.lo) / dx).to_f64().unwrap_or(0.0);
    let kmin = (index(dmin).floor() as i64).min(0);
    let kmax = (index(dmax).ceil() as i64 + 1).max(m as i64 - 1);
    let span = (kmax - kmin + 1) as usize;
    let size = (FFT_PADDING * span).next_power_of_two();
    let period = dx * T::lit(size as f64);

    let frequency = |j: usize| {
        let signed = if j <= size / 2 {
            j as f64
        } else {
            j as f64 - size as f64
        };
        T::TAU() * T::lit(signed) / period
    };
    let inside = (0..size).filter(|&j| frequency(j).abs() <= cutoff).count();
    if inside < 2 {
        return Err(Error::GridTooCoarse {
            points: inside,
            cutoff: cutoff.as_f64(),
        });
    }

    // linear binning with weight 1/n per observation
    let weight = T::lit(data.len() as f64).recip();
    let mut buf = vec![Complex::new(T::zero(), T::zero()); size];
    for &x in data {
        let pos = (x - grid.lo) / dx - T::lit(kmin as f64);
        let left = pos.floor();
        let frac = pos - left;
        let i = left.to_usize().unwrap_or(0);
        buf[i].re = buf[i].re + weight * (T::one() - frac);
        if frac > T::zero() {
            buf[i + 1].re = buf[i + 1].re + weight * frac;
        }
    }

    let mut planner = FftPlanner::new();
    // Σ_k c_k e^{+2πi jk/N} approximates φ_emp(t_j) up to a common phase
    planner.plan_fft_inverse(size).process(&mut buf);

    let mut frequencies = Vec::with_capacity(inside);
    let mut multipliers = Vec::with_capacity(inside);
    for (j, b) in buf.iter_mut().enumerate() {
        let t = frequency(j);
        let mult = config.multiplier(t)?;
        if t.abs() <= cutoff {
            frequencies.push(t);
            multipliers.push(mult);
        }
        *b = *b * mult;
    }
    planner.plan_fft_forward(size).process(&mut buf);

    let scale = period.recip();
    let offset = (-kmin) as usize;
    let values: Vec<T> = (0..m).map(|k| buf[offset + k].re * scale).collect();

    let mut order: Vec<usize> = (0..frequencies.len()).collect();
    order.sort_by(|&a, &b| frequencies[a].partial_cmp(&frequencies[b]).expect("finite"));
    let frequencies = order.iter().map(|&i| frequencies[i]).collect();
    let multipliers = order.iter().map(|&i| multipliers[i]).collect();

    Ok(EstimateGrid {
        points: grid.points(),
        values,
        frequencies,
        multipliers,
    })
}

/// `E f_nh(x) = (f * w_{(h)})(x)` with `w_{(h)}(y) = w(y/h)/h`, computed in
/// the Fourier domain: `(1/(πh)) ∫_0^1 φ_w(s) Re[e^{-isx/h} φ_f(s/h)] ds`.
pub fn expected_estimate<T: Real>(
    kernel: &Kernel<T>,
    target: &TargetDensity<T>,
    bandwidth: T,
    x: T,
) -> T {
    let h = bandwidth;
    let integrand = |s: T| {
        let t = s / h;
        let phase = Complex::from_polar(T::one(), -t * x);
        kernel.fourier_transform(s) * (phase * target.cf(t)).re
    };
    let tol = Tolerance::new(1e-12, 1e-12);
    let half = T::lit(0.5);
    (integrate(integrand, T::zero(), half, tol).value
        + integrate(integrand, half, T::one(), tol).value)
        / (T::PI() * h)
}
