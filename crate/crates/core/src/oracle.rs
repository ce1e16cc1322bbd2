//! Closed-form index values for the built-in models.

use std::collections::BTreeMap;

use crate::error::{GosaError, Result};
use crate::quadrature::chi2_1_expectation;
use crate::scalar::Real;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Parameters within this distance of a special value use the dedicated formula.
pub const SPECIAL_BRANCH_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<T> {
    pub s1: T,
    pub s2: T,
    /// Named intermediates (features, minima, conditional terms, Sobol values).
    pub aux: BTreeMap<&'static str, T>,
}

fn open_unit<T: Real>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::one() {
        Ok(())
    } else {
        Err(GosaError::contract(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

/// Quantile of the Laplace(0, 1) law of `X1 + X2` in the first example.
pub fn example1_quantile<T: Real>(alpha: T) -> Result<T> {
    open_unit(alpha)?;
    let two = T::lit(2.0);
    Ok(if alpha < T::lit(0.5) {
        (two * alpha).ln()
    } else {
        -(T::one() - alpha).ln() - T::LN_2()
    })
}

/// Minimum of the expected pinball loss of the Laplace(0, 1) output.
fn example1_min_contrast<T: Real>(alpha: T) -> T {
    let two = T::lit(2.0);
    if alpha < T::lit(0.5) {
        alpha * (T::one() - (two * alpha).ln())
    } else {
        let c = T::one() - alpha;
        c * (T::one() - (two * c).ln())
    }
}

/// Quantile-contrast indices of the first example at level `alpha`.
pub fn example1_indices<T: Real>(alpha: T) -> Result<OracleResult<T>> {
    let quantile = example1_quantile(alpha)?;
    let min_contrast = example1_min_contrast(alpha);
    let c = T::one() - alpha;
    // Expected conditional minima: given X1 the residual is -Exp(1), given X2 it is Exp(1).
    let cond_min_x1 = -alpha * alpha.ln();
    let cond_min_x2 = -c * c.ln();
    let s1 = (min_contrast - cond_min_x1) / min_contrast;
    let s2 = (min_contrast - cond_min_x2) / min_contrast;
    let half = T::lit(0.5);
    let aux = BTreeMap::from([
        ("quantile", quantile),
        ("min_contrast", min_contrast),
        ("cond_min_x1", cond_min_x1),
        ("cond_min_x2", cond_min_x2),
        ("sobol1", half),
        ("sobol2", half),
    ]);
    Ok(OracleResult { s1, s2, aux })
}

fn near<T: Real>(a: T, target: f64) -> bool {
    (a.as_f64() - target).abs() < SPECIAL_BRANCH_TOLERANCE
}

fn check_example2<T: Real>(a: T, t: T) -> Result<()> {
    if !(a > T::zero() && a.is_finite()) {
        return Err(GosaError::contract(format!("rate a must be positive, got {a}")));
    }
    if !(t >= T::zero() && t.is_finite()) {
        return Err(GosaError::contract(format!("threshold t must be >= 0, got {t}")));
    }
    if t == T::zero() {
        return Err(GosaError::degenerate("t = 0: P(Y >= 0) = 1 and the contrast has zero variance"));
    }
    Ok(())
}

/// Which closed form to use for each term of the second example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example2Branches {
    /// Route `a` near 1, 1/2 or 2 to the dedicated formulas.
    Auto,
    /// Always use the formulas valid for generic `a` (singular at the special values).
    GenericOnly,
}

/// Excess-probability indices of `Exp(1) + Exp(a)` at threshold `t`.
pub fn example2_components<T: Real>(a: T, t: T) -> Result<OracleResult<T>> {
    example2_components_with(a, t, Example2Branches::Auto)
}

pub fn example2_components_with<T: Real>(a: T, t: T, branches: Example2Branches) -> Result<OracleResult<T>> {
    check_example2(a, t)?;
    let auto = branches == Example2Branches::Auto;
    let one = T::one();
    let two = T::lit(2.0);
    let e = |x: T| x.exp();

    let survival = if auto && near(a, 1.0) {
        (one + t) * e(-t)
    } else {
        (a * e(-t) - e(-a * t)) / (a - one)
    };

    let e1 = if auto && near(a, 1.0) {
        e(-two * t) - (one - t) * e(-t)
    } else if auto && near(a, 0.5) {
        two * e(-t / two) - (two + t) * e(-t)
    } else {
        (e(-a * t) - e(-t)) / (one - a) - (e(-two * a * t) - e(-t)) / (one - two * a)
    };

    let e2 = if auto && near(a, 1.0) {
        e(-two * t) - (one - t) * e(-t)
    } else if auto && near(a, 2.0) {
        two * e(-t) - two * (t + one) * e(-two * t)
    } else {
        a * (e(-a * t) - e(-t)) / (one - a) - a * (e(-a * t) - e(-two * t)) / (two - a)
    };

    let denominator = survival * (one - survival);
    if !(denominator.abs() >= T::lit(1e-300)) {
        return Err(GosaError::degenerate("P(Y >= t) is 0 or 1"));
    }
    let s1 = (denominator - e1) / denominator;
    let s2 = (denominator - e2) / denominator;
    let a2 = a * a;
    let aux = BTreeMap::from([
        ("survival", survival),
        ("denominator", denominator),
        ("e1", e1),
        ("e2", e2),
        ("sobol1", a2 / (one + a2)),
        ("sobol2", one / (one + a2)),
    ]);
    Ok(OracleResult { s1, s2, aux })
}

/// Maximum-likelihood indices of `theta X1 + X2` with standard normal inputs.
///
/// The chi-squared expectations are computed by adaptive quadrature with
/// relative tolerance `1e-8`; at `theta = 0` the known value
/// `E ln chi2_1 = -(gamma + ln 2)` is used directly.
pub fn gaussian_ml_indices<T: Real>(theta: T) -> Result<OracleResult<T>> {
    if !theta.is_finite() {
        return Err(GosaError::contract("theta must be finite"));
    }
    let one = T::one();
    let th2 = theta * theta;
    let norm = T::lit(EULER_GAMMA) + T::LN_2();
    let rel_tol = T::lit(1e-8).max(T::epsilon() * T::lit(64.0));
    let expect_log_affine = |c: T, slope: T| -> Result<T> {
        if c == T::zero() {
            // E ln(slope * xi) = ln slope - (gamma + ln 2)
            return Ok(slope.ln() - norm);
        }
        chi2_1_expectation(|xi| (c + slope * xi).ln(), rel_tol)
    };
    let e_log_1 = expect_log_affine(one, th2)?; // E ln(1 + theta^2 xi)
    let e_log_2 = expect_log_affine(th2, one)?; // E ln(theta^2 + xi)
    let log_var = (one + th2).ln();
    let s1 = (log_var - e_log_1) / norm;
    let s2 = (log_var - e_log_2) / norm;
    let aux = BTreeMap::from([
        ("e_log_1_plus_theta2_xi", e_log_1),
        ("e_log_theta2_plus_xi", e_log_2),
        ("normalizer", norm),
        ("sobol1", th2 / (one + th2)),
        ("sobol2", one / (one + th2)),
    ]);
    Ok(OracleResult { s1, s2, aux })
}

/// First-order Sobol indices of the Ishigami function (`a = 7`, `b = 0.1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IshigamiSobol<T> {
    /// Reference values rounded to four decimals.
    pub reference: [T; 3],
    /// Values from the analytic variance decomposition.
    pub exact: [T; 3],
}

pub fn ishigami_sobol<T: Real>() -> IshigamiSobol<T> {
    let a = T::lit(7.0);
    let b = T::lit(0.1);
    let pi4 = T::PI().powi(4);
    let half = T::lit(0.5);
    let v1 = half * (T::one() + b * pi4 / T::lit(5.0)).powi(2);
    let v2 = a * a / T::lit(8.0);
    let var = a * a / T::lit(8.0) + b * pi4 / T::lit(5.0) + b * b * pi4 * pi4 / T::lit(18.0) + half;
    IshigamiSobol {
        reference: [T::lit(0.3139), T::lit(0.4424), T::zero()],
        exact: [v1 / var, v2 / var, T::zero()],
    }
}
