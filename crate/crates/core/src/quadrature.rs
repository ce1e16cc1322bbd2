//! Globally adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

use crate::error::{GosaError, Result};
use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights for the odd Kronrod nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy)]
struct Piece<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn kronrod<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Piece<T> {
    let center = (a + b) * T::lit(0.5);
    let half = (b - a) * T::lit(0.5);
    let fc = f(center);
    let mut k = fc * T::lit(WGK[7]);
    let mut g = fc * T::lit(WG[3]);
    for i in 0..7 {
        let dx = half * T::lit(XGK[i]);
        let pair = f(center - dx) + f(center + dx);
        k = k + pair * T::lit(WGK[i]);
        if i % 2 == 1 {
            g = g + pair * T::lit(WG[i / 2]);
        }
    }
    Piece { a, b, value: k * half, error: ((k - g) * half).abs() }
}

/// Integral of `f` over the consecutive intervals delimited by `breaks`,
/// refined until the summed error estimate is below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, breaks: &[T], rel_tol: T, abs_tol: T) -> Result<T> {
    if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(GosaError::contract("quadrature breakpoints must be strictly increasing"));
    }
    let mut pieces: Vec<Piece<T>> = breaks.windows(2).map(|w| kronrod(&f, w[0], w[1])).collect();
    loop {
        let total = pieces.iter().fold(T::zero(), |s, p| s + p.value);
        let err = pieces.iter().fold(T::zero(), |s, p| s + p.error);
        if !total.is_finite() || !err.is_finite() {
            return Err(GosaError::Numerical {
                reason: "non-finite integrand".into(),
                achieved: err.as_f64(),
            });
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(GosaError::Numerical {
                reason: format!("no convergence after {MAX_INTERVALS} subintervals"),
                achieved: (err / total.abs()).as_f64(),
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .expect("nonempty");
        let p = pieces.swap_remove(worst);
        let mid = (p.a + p.b) * T::lit(0.5);
        if !(mid > p.a && mid < p.b) {
            return Err(GosaError::Numerical {
                reason: "interval cannot be bisected further".into(),
                achieved: (err / total.abs()).as_f64(),
            });
        }
        pieces.push(kronrod(&f, p.a, mid));
        pieces.push(kronrod(&f, mid, p.b));
    }
}

/// `E g(Z^2)` for `Z ~ N(0, 1)`, i.e. the expectation of `g` against the
/// chi-squared law with one degree of freedom.
pub fn chi2_1_expectation<T: Real, G: Fn(T) -> T>(g: G, rel_tol: T) -> Result<T> {
    let norm = T::lit(2.0) / T::TAU().sqrt();
    let integrand = |z: T| norm * (-(z * z) * T::lit(0.5)).exp() * g(z * z);
    let breaks = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 13.0].map(T::lit);
    integrate(integrand, &breaks, rel_tol, T::epsilon() * T::lit(16.0))
}
