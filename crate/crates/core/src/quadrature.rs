//! Adaptive Gauss–Kronrod (7/15) quadrature on a finite interval.
//!
//! Globally adaptive bisection in the style of QUADPACK's QAG: the
//! subinterval with the largest error estimate is split until the summed
//! error falls below `max(abs, rel * |I|)` or the subdivision limit is hit.

#![allow(clippy::excessive_precision)]

use crate::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

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

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const DEFAULT_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<T> {
    pub abs: T,
    pub rel: T,
}

impl<T: Real> Tolerance<T> {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs: T::lit(abs),
            rel: T::lit(rel),
        }
    }

    fn target(&self, value: T) -> T {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub abs_error: T,
    pub subintervals: usize,
    /// False when the subdivision limit or the roundoff floor stopped the
    /// refinement before the tolerance was met.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn rescale_error<T: Real>(err: T, res_abs: T, res_asc: T) -> T {
    let mut err = err.abs();
    if res_asc != T::zero() && err != T::zero() {
        let scale = (T::lit(200.0) * err / res_asc).powf(T::lit(1.5));
        err = if scale < T::one() {
            res_asc * scale
        } else {
            res_asc
        };
    }
    let floor = T::lit(50.0) * T::epsilon() * res_abs;
    if res_abs > T::min_positive_value() / (T::lit(50.0) * T::epsilon()) && floor > err {
        err = floor;
    }
    err
}

fn gk15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Segment<T> {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let f_center = f(center);

    let mut res_k = f_center * T::lit(WGK[7]);
    let mut res_g = f_center * T::lit(WG[3]);
    let mut res_abs = res_k.abs();
    let mut fv1 = [T::zero(); 7];
    let mut fv2 = [T::zero(); 7];

    for j in 0..7 {
        let dx = half_len * T::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        let w = T::lit(WGK[j]);
        res_k = res_k + w * (f1 + f2);
        res_abs = res_abs + w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g = res_g + T::lit(WG[j / 2]) * (f1 + f2);
        }
    }

    let mean = res_k * half;
    let mut res_asc = T::lit(WGK[7]) * (f_center - mean).abs();
    for j in 0..7 {
        res_asc = res_asc + T::lit(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let abs_half = half_len.abs();
    let error = rescale_error(
        (res_k - res_g) * half_len,
        res_abs * abs_half,
        res_asc * abs_half,
    );
    Segment {
        a,
        b,
        value: res_k * half_len,
        error,
    }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<T, F>(f: F, a: T, b: T, tol: Tolerance<T>) -> Integral<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    integrate_with_limit(f, a, b, tol, DEFAULT_LIMIT)
}

pub fn integrate_with_limit<T, F>(f: F, a: T, b: T, tol: Tolerance<T>, limit: usize) -> Integral<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    if a == b {
        return Integral {
            value: T::zero(),
            abs_error: T::zero(),
            subintervals: 0,
            converged: true,
        };
    }

    let mut segments = vec![gk15(&f, a, b)];
    let mut value = segments[0].value;
    let mut error = segments[0].error;
    let limit = limit.max(1);

    while error > tol.target(value) {
        if segments.len() >= limit {
            return Integral {
                value,
                abs_error: error,
                subintervals: segments.len(),
                converged: false,
            };
        }
        let (worst, _) =
            segments
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |(bi, be), (i, s)| {
                    if s.error > be {
                        (i, s.error)
                    } else {
                        (bi, be)
                    }
                });
        let seg = segments.swap_remove(worst);
        let mid = T::lit(0.5) * (seg.a + seg.b);
        if mid <= seg.a.min(seg.b) || mid >= seg.a.max(seg.b) {
            // interval cannot be split further in this precision
            segments.push(seg);
            return Integral {
                value,
                abs_error: error,
                subintervals: segments.len(),
                converged: false,
            };
        }
        let left = gk15(&f, seg.a, mid);
        let right = gk15(&f, mid, seg.b);
        let new_err = left.error + right.error;
        // roundoff floor: refinement no longer reduces the local error
        let stalled =
            new_err >= seg.error && seg.error <= T::lit(100.0) * T::epsilon() * seg.value.abs();
        segments.push(left);
        segments.push(right);
        value = segments.iter().fold(T::zero(), |acc, s| acc + s.value);
        error = segments.iter().fold(T::zero(), |acc, s| acc + s.error);
        if stalled {
            return Integral {
                value,
                abs_error: error,
                subintervals: segments.len(),
                converged: error <= tol.target(value),
            };
        }
    }

    Integral {
        value,
        abs_error: error,
        subintervals: segments.len(),
        converged: true,
    }
}
