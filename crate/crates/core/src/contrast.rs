//! Contrast functions `psi(y; theta)`, their pointwise minima and the direct
//! empirical estimators of the feature each contrast characterizes.
//!
//! Functional contrasts (probability tail, quantile tail, kernel density) are
//! discretized with the trapezoid rule on a caller-supplied [`Grid`]; the
//! tail integrals stop at the last grid node.

use std::cmp::Ordering;

use crate::error::{GosaError, Result};
use crate::grid::Grid;
use crate::optimize::golden_section;
use crate::scalar::{mean, Real};

/// Built-in likelihood families for the maximum-likelihood contrast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// Centered normal law with variance `theta^2 + 1`.
    GaussianLinear,
}

/// Parametric family `p_theta` searched over a compact `theta` domain.
///
/// In relaxed mode the variance map is `1 + theta * |theta|`, which extends
/// `theta^2 + 1` below 1 for negative `theta`; this lets per-sample minima
/// reach variance `y^2` for `|y| < 1`, as the closed-form Gaussian index
/// assumes. Constrained mode keeps `theta^2 + 1` on a domain with `lo >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodFamily<T> {
    kind: FamilyKind,
    lo: T,
    hi: T,
    relaxed: bool,
}

impl<T: Real> LikelihoodFamily<T> {
    /// Relaxed Gaussian linear family on `(-1, theta_max]`.
    pub fn gaussian_linear(theta_max: T) -> Result<Self> {
        let lo = -T::one() + T::epsilon().sqrt();
        Self::with_domain(FamilyKind::GaussianLinear, lo, theta_max, true)
    }

    /// Gaussian linear family restricted to `theta in [0, theta_max]`, variance `>= 1`.
    pub fn gaussian_linear_constrained(theta_max: T) -> Result<Self> {
        Self::with_domain(FamilyKind::GaussianLinear, T::zero(), theta_max, false)
    }

    pub fn with_domain(kind: FamilyKind, lo: T, hi: T, relaxed: bool) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(GosaError::contract("likelihood domain must be a finite interval lo < hi"));
        }
        if relaxed && lo <= -T::one() {
            return Err(GosaError::contract("relaxed Gaussian domain must satisfy lo > -1"));
        }
        if !relaxed && lo < T::zero() {
            return Err(GosaError::contract("constrained Gaussian domain must satisfy lo >= 0"));
        }
        Ok(LikelihoodFamily { kind, lo, hi, relaxed })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn domain(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    pub fn is_relaxed(&self) -> bool {
        self.relaxed
    }

    pub fn variance(&self, theta: T) -> T {
        match self.kind {
            FamilyKind::GaussianLinear => {
                if self.relaxed {
                    T::one() + theta * theta.abs()
                } else {
                    T::one() + theta * theta
                }
            }
        }
    }

    pub fn log_density(&self, theta: T, y: T) -> T {
        match self.kind {
            FamilyKind::GaussianLinear => -gaussian_nll(y * y, self.variance(theta)),
        }
    }

    /// Minimum over the parameter of `-log p(y)`.
    fn pointwise_min(&self, y: T) -> Result<T> {
        match self.kind {
            FamilyKind::GaussianLinear => {
                let y2 = y * y;
                if self.relaxed {
                    if y2 == T::zero() {
                        return Err(GosaError::degenerate(
                            "y = 0 has unbounded likelihood under the relaxed Gaussian family",
                        ));
                    }
                    Ok(gaussian_nll(y2, y2))
                } else {
                    let v = y2.max(self.variance(self.lo)).min(self.variance(self.hi));
                    Ok(gaussian_nll(y2, v))
                }
            }
        }
    }

    fn fit(&self, sample: &[T]) -> Result<T> {
        match self.kind {
            FamilyKind::GaussianLinear => {
                let m2 = mean(&sample.iter().map(|&y| y * y).collect::<Vec<_>>());
                let scale = self.lo.abs().max(self.hi.abs()).max(T::one());
                let tol = T::lit(1e-8).max(T::lit(8.0) * T::epsilon() * scale);
                let best = golden_section(|th| gaussian_nll(m2, self.variance(th)), self.lo, self.hi, tol)?;
                Ok(best.x)
            }
        }
    }

    fn describe(&self) -> String {
        let name = match self.kind {
            FamilyKind::GaussianLinear => "gaussian-linear",
        };
        let mode = if self.relaxed { "relaxed" } else { "constrained" };
        format!("{name}[{mode};{}:{}]", self.lo.as_f64(), self.hi.as_f64())
    }
}

/// `-log N(0, v)` density at a point with squared value `y2`.
fn gaussian_nll<T: Real>(y2: T, v: T) -> T {
    T::lit(0.5) * (y2 / v + (T::TAU() * v).ln())
}

/// The feature `theta` selected by a contrast.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValue<T> {
    Scalar(T),
    GridFunction { grid: Grid<T>, values: Vec<T> },
    Coefficients(Vec<T>),
}

impl<T: Real> FeatureValue<T> {
    pub fn as_scalar(&self) -> Option<T> {
        match self {
            FeatureValue::Scalar(v) => Some(*v),
            _ => None,
        }
    }

    fn shape(&self) -> &'static str {
        match self {
            FeatureValue::Scalar(_) => "scalar",
            FeatureValue::GridFunction { .. } => "grid function",
            FeatureValue::Coefficients(_) => "coefficients",
        }
    }
}

/// Catalog of contrasts.
///
/// Build values through the checked constructors; operations assume the
/// parameter invariants hold (see [`ContrastSpec::validate`]).
#[derive(Debug, Clone, PartialEq)]
pub enum ContrastSpec<T> {
    Mean,
    Median,
    Quantile { alpha: T },
    ExcessProb { t: T },
    ProbTail { t0: T, grid: Grid<T> },
    QuantileTail { alpha0: T, grid: Grid<T> },
    KernelDensity { bandwidth: T, grid: Grid<T> },
    BasisDensity { order: usize, support: (T, T) },
    MaxLikelihood { family: LikelihoodFamily<T> },
}

fn open_unit<T: Real>(v: T) -> bool {
    v > T::zero() && v < T::one()
}

impl<T: Real> ContrastSpec<T> {
    pub fn quantile(alpha: T) -> Result<Self> {
        let c = ContrastSpec::Quantile { alpha };
        c.validate()?;
        Ok(c)
    }

    pub fn excess(t: T) -> Result<Self> {
        let c = ContrastSpec::ExcessProb { t };
        c.validate()?;
        Ok(c)
    }

    pub fn prob_tail(t0: T, grid: Grid<T>) -> Result<Self> {
        let c = ContrastSpec::ProbTail { t0, grid };
        c.validate()?;
        Ok(c)
    }

    pub fn quantile_tail(alpha0: T, grid: Grid<T>) -> Result<Self> {
        let c = ContrastSpec::QuantileTail { alpha0, grid };
        c.validate()?;
        Ok(c)
    }

    pub fn kernel_density(bandwidth: T, grid: Grid<T>) -> Result<Self> {
        let c = ContrastSpec::KernelDensity { bandwidth, grid };
        c.validate()?;
        Ok(c)
    }

    pub fn basis_density(order: usize, support: (T, T)) -> Result<Self> {
        let c = ContrastSpec::BasisDensity { order, support };
        c.validate()?;
        Ok(c)
    }

    pub fn max_likelihood(family: LikelihoodFamily<T>) -> Self {
        ContrastSpec::MaxLikelihood { family }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ContrastSpec::Mean | ContrastSpec::Median | ContrastSpec::MaxLikelihood { .. } => Ok(()),
            ContrastSpec::Quantile { alpha } => {
                if open_unit(*alpha) {
                    Ok(())
                } else {
                    Err(GosaError::contract(format!("quantile level must lie in (0,1), got {alpha}")))
                }
            }
            ContrastSpec::ExcessProb { t } => {
                if t.is_finite() {
                    Ok(())
                } else {
                    Err(GosaError::contract("excess threshold must be finite"))
                }
            }
            ContrastSpec::ProbTail { t0, grid } => {
                if !t0.is_finite() || grid.first() < *t0 {
                    Err(GosaError::contract("probability-tail grid must start at or above t0"))
                } else {
                    Ok(())
                }
            }
            ContrastSpec::QuantileTail { alpha0, grid } => {
                if !open_unit(*alpha0) {
                    return Err(GosaError::contract("quantile-tail alpha0 must lie in (0,1)"));
                }
                if grid.first() < *alpha0 || grid.last() >= T::one() {
                    return Err(GosaError::contract("quantile-tail grid must lie in [alpha0, 1)"));
                }
                Ok(())
            }
            ContrastSpec::KernelDensity { bandwidth, .. } => {
                if *bandwidth > T::zero() && bandwidth.is_finite() {
                    Ok(())
                } else {
                    Err(GosaError::contract("kernel bandwidth must be positive"))
                }
            }
            ContrastSpec::BasisDensity { support, .. } => {
                if support.0.is_finite() && support.1.is_finite() && support.0 < support.1 {
                    Ok(())
                } else {
                    Err(GosaError::contract("basis support must be a finite interval lo < hi"))
                }
            }
        }
    }

    /// Short family identifier used in reports.
    pub fn id(&self) -> &'static str {
        match self {
            ContrastSpec::Mean => "mean",
            ContrastSpec::Median => "median",
            ContrastSpec::Quantile { .. } => "quantile",
            ContrastSpec::ExcessProb { .. } => "excess",
            ContrastSpec::ProbTail { .. } => "prob-tail",
            ContrastSpec::QuantileTail { .. } => "quantile-tail",
            ContrastSpec::KernelDensity { .. } => "kde",
            ContrastSpec::BasisDensity { .. } => "basis",
            ContrastSpec::MaxLikelihood { .. } => "ml",
        }
    }

    /// The swept scalar parameter, when the family has one.
    pub fn param(&self) -> Option<T> {
        match self {
            ContrastSpec::Quantile { alpha } => Some(*alpha),
            ContrastSpec::ExcessProb { t } => Some(*t),
            ContrastSpec::ProbTail { t0, .. } => Some(*t0),
            ContrastSpec::QuantileTail { alpha0, .. } => Some(*alpha0),
            ContrastSpec::KernelDensity { bandwidth, .. } => Some(*bandwidth),
            _ => None,
        }
    }

    /// Discretization metadata (grid, truncation, family domain).
    pub fn discretization(&self) -> String {
        match self {
            ContrastSpec::ProbTail { grid, .. }
            | ContrastSpec::QuantileTail { grid, .. }
            | ContrastSpec::KernelDensity { grid, .. } => {
                format!("trapezoid {} truncated at {}", grid.describe(), grid.last().as_f64())
            }
            ContrastSpec::BasisDensity { order, support } => {
                format!("fourier N={order} on [{}, {}]", support.0.as_f64(), support.1.as_f64())
            }
            ContrastSpec::MaxLikelihood { family } => family.describe(),
            _ => String::new(),
        }
    }

    /// True when the feature estimator is an order statistic of the sample.
    pub fn uses_order_statistics(&self) -> bool {
        matches!(
            self,
            ContrastSpec::Median | ContrastSpec::Quantile { .. } | ContrastSpec::QuantileTail { .. }
        )
    }

    fn check_scalar(&self, theta: &FeatureValue<T>) -> Result<T> {
        theta.as_scalar().ok_or_else(|| self.shape_error(theta))
    }

    fn shape_error(&self, theta: &FeatureValue<T>) -> GosaError {
        GosaError::contract(format!("{} contrast cannot use a {} feature", self.id(), theta.shape()))
    }

    fn check_grid_function<'a>(&self, grid: &Grid<T>, theta: &'a FeatureValue<T>) -> Result<&'a [T]> {
        match theta {
            FeatureValue::GridFunction { grid: g, values } if g == grid && values.len() == grid.len() => {
                Ok(values)
            }
            FeatureValue::GridFunction { .. } => {
                Err(GosaError::contract("grid function does not match the contrast grid"))
            }
            _ => Err(self.shape_error(theta)),
        }
    }

    /// `psi(y; theta)`.
    pub fn pointwise_loss(&self, y: T, theta: &FeatureValue<T>) -> Result<T> {
        match self {
            ContrastSpec::Mean => {
                let th = self.check_scalar(theta)?;
                Ok((y - th) * (y - th))
            }
            ContrastSpec::Median => {
                let th = self.check_scalar(theta)?;
                Ok(T::lit(0.5) * (y - th).abs())
            }
            ContrastSpec::Quantile { alpha } => Ok(pinball(y, self.check_scalar(theta)?, *alpha)),
            ContrastSpec::ExcessProb { t } => {
                let d = indicator::<T>(y >= *t) - self.check_scalar(theta)?;
                Ok(d * d)
            }
            ContrastSpec::ProbTail { grid, .. } => {
                let values = self.check_grid_function(grid, theta)?;
                Ok(grid.integrate(|i, t| {
                    let d = indicator::<T>(y >= t) - values[i];
                    d * d
                }))
            }
            ContrastSpec::QuantileTail { grid, .. } => {
                let values = self.check_grid_function(grid, theta)?;
                Ok(grid.integrate(|i, a| pinball(y, values[i], a)))
            }
            ContrastSpec::KernelDensity { bandwidth, grid } => {
                let values = self.check_grid_function(grid, theta)?;
                Ok(grid.integrate(|i, t| {
                    let d = gaussian_kernel(y - t, *bandwidth) - values[i];
                    d * d
                }))
            }
            ContrastSpec::BasisDensity { order, support } => {
                let coeffs = match theta {
                    FeatureValue::Coefficients(c) if c.len() == order + 1 => c,
                    FeatureValue::Coefficients(c) => {
                        return Err(GosaError::contract(format!(
                            "expected {} coefficients, got {}",
                            order + 1,
                            c.len()
                        )))
                    }
                    _ => return Err(self.shape_error(theta)),
                };
                let basis = FourierBasis::new(*support);
                basis.check(y)?;
                Ok(coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| {
                        let d = basis.eval(j, y) - c;
                        d * d
                    })
                    .fold(T::zero(), |a, b| a + b))
            }
            ContrastSpec::MaxLikelihood { family } => Ok(-family.log_density(self.check_scalar(theta)?, y)),
        }
    }

    /// `min_theta psi(y; theta)`.
    pub fn pointwise_min(&self, y: T) -> Result<T> {
        match self {
            ContrastSpec::MaxLikelihood { family } => family.pointwise_min(y),
            ContrastSpec::BasisDensity { support, .. } => {
                FourierBasis::new(*support).check(y)?;
                Ok(T::zero())
            }
            _ => Ok(T::zero()),
        }
    }

    /// Direct estimate of the feature from a sample.
    pub fn empirical_feature(&self, sample: &[T]) -> Result<FeatureValue<T>> {
        self.feature_prepared(sample, None)
    }

    /// Like [`empirical_feature`](Self::empirical_feature), reusing an ascending
    /// sorted copy of `sample` when the caller already has one.
    pub(crate) fn feature_prepared(&self, sample: &[T], sorted: Option<&[T]>) -> Result<FeatureValue<T>> {
        if sample.is_empty() {
            return Err(GosaError::contract("empirical feature of an empty sample"));
        }
        let n = sample.len();
        let feature = match self {
            ContrastSpec::Mean => FeatureValue::Scalar(mean(sample)),
            ContrastSpec::Median => FeatureValue::Scalar(order_statistic(sample, sorted, type1_rank(n, T::lit(0.5)))),
            ContrastSpec::Quantile { alpha } => {
                FeatureValue::Scalar(order_statistic(sample, sorted, type1_rank(n, *alpha)))
            }
            ContrastSpec::ExcessProb { t } => FeatureValue::Scalar(exceedance(sample, *t)),
            ContrastSpec::ProbTail { grid, .. } => FeatureValue::GridFunction {
                grid: grid.clone(),
                values: grid.nodes().iter().map(|&t| exceedance(sample, t)).collect(),
            },
            ContrastSpec::QuantileTail { grid, .. } => {
                let owned;
                let sorted = match sorted {
                    Some(s) => s,
                    None => {
                        owned = sorted_copy(sample);
                        &owned
                    }
                };
                FeatureValue::GridFunction {
                    grid: grid.clone(),
                    values: grid.nodes().iter().map(|&a| sorted[type1_rank(n, a) - 1]).collect(),
                }
            }
            ContrastSpec::KernelDensity { bandwidth, grid } => FeatureValue::GridFunction {
                grid: grid.clone(),
                values: grid
                    .nodes()
                    .iter()
                    .map(|&t| mean(&sample.iter().map(|&y| gaussian_kernel(y - t, *bandwidth)).collect::<Vec<_>>()))
                    .collect(),
            },
            ContrastSpec::BasisDensity { order, support } => {
                let basis = FourierBasis::new(*support);
                for &y in sample {
                    basis.check(y)?;
                }
                FeatureValue::Coefficients(
                    (0..=*order)
                        .map(|j| mean(&sample.iter().map(|&y| basis.eval(j, y)).collect::<Vec<_>>()))
                        .collect(),
                )
            }
            ContrastSpec::MaxLikelihood { family } => FeatureValue::Scalar(family.fit(sample)?),
        };
        Ok(feature)
    }

    /// Empirical contrast `(1/n) sum_i psi(y_i; theta)`.
    pub fn average_loss(&self, sample: &[T], theta: &FeatureValue<T>) -> Result<T> {
        if sample.is_empty() {
            return Err(GosaError::contract("average loss of an empty sample"));
        }
        let mut acc = T::zero();
        for &y in sample {
            acc = acc + self.pointwise_loss(y, theta)?;
        }
        Ok(acc / T::from_count(sample.len()))
    }

    /// Decomposition `psi(y; theta) = sum_i w_i (g_i(y) - theta_i)^2` for the
    /// quadratic contrasts, `None` otherwise.
    pub fn quadratic_form(&self) -> Option<QuadraticForm<'_, T>> {
        let weights = match self {
            ContrastSpec::Mean | ContrastSpec::ExcessProb { .. } => vec![T::one()],
            ContrastSpec::ProbTail { grid, .. } | ContrastSpec::KernelDensity { grid, .. } => {
                grid.trapezoid_weights()
            }
            ContrastSpec::BasisDensity { order, .. } => vec![T::one(); order + 1],
            _ => return None,
        };
        Some(QuadraticForm { contrast: self, weights })
    }
}

/// Quadratic embedding of a contrast; see [`ContrastSpec::quadratic_form`].
#[derive(Debug, Clone)]
pub struct QuadraticForm<'a, T> {
    contrast: &'a ContrastSpec<T>,
    weights: Vec<T>,
}

impl<T: Real> QuadraticForm<'_, T> {
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Writes `g_i(y)` for every term into `out`.
    pub fn embed(&self, y: T, out: &mut [T]) -> Result<()> {
        match self.contrast {
            ContrastSpec::Mean => out[0] = y,
            ContrastSpec::ExcessProb { t } => out[0] = indicator(y >= *t),
            ContrastSpec::ProbTail { grid, .. } => {
                for (o, &t) in out.iter_mut().zip(grid.nodes()) {
                    *o = indicator(y >= t);
                }
            }
            ContrastSpec::KernelDensity { bandwidth, grid } => {
                for (o, &t) in out.iter_mut().zip(grid.nodes()) {
                    *o = gaussian_kernel(y - t, *bandwidth);
                }
            }
            ContrastSpec::BasisDensity { support, .. } => {
                let basis = FourierBasis::new(*support);
                basis.check(y)?;
                for (j, o) in out.iter_mut().enumerate() {
                    *o = basis.eval(j, y);
                }
            }
            _ => unreachable!("quadratic form only exists for quadratic contrasts"),
        }
        Ok(())
    }
}

#[inline]
fn indicator<T: Real>(b: bool) -> T {
    if b {
        T::one()
    } else {
        T::zero()
    }
}

#[inline]
fn pinball<T: Real>(y: T, theta: T, alpha: T) -> T {
    (y - theta) * (alpha - indicator(y <= theta))
}

fn exceedance<T: Real>(sample: &[T], t: T) -> T {
    let count = sample.iter().filter(|&&y| y >= t).count();
    T::from_count(count) / T::from_count(sample.len())
}

/// `K_r(u) = K(u / r) / r` with `K` the standard Gaussian density.
pub fn gaussian_kernel<T: Real>(u: T, r: T) -> T {
    let z = u / r;
    (-(z * z) * T::lit(0.5)).exp() / (T::TAU().sqrt() * r)
}

/// 1-based rank of the type-1 empirical quantile: smallest `i` with `i / n >= alpha`.
pub fn type1_rank<T: Real>(n: usize, alpha: T) -> usize {
    let nf = T::from_count(n);
    let guess = (nf * alpha).ceil().to_usize().unwrap_or(1).clamp(1, n);
    let at_least = |i: usize| T::from_count(i) / nf >= alpha;
    let mut i = guess;
    while i > 1 && at_least(i - 1) {
        i -= 1;
    }
    while i < n && !at_least(i) {
        i += 1;
    }
    i
}

fn cmp<T: Real>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

pub(crate) fn sorted_copy<T: Real>(sample: &[T]) -> Vec<T> {
    let mut v = sample.to_vec();
    v.sort_unstable_by(cmp);
    v
}

fn order_statistic<T: Real>(sample: &[T], sorted: Option<&[T]>, rank: usize) -> T {
    match sorted {
        Some(s) => s[rank - 1],
        None => {
            let mut v = sample.to_vec();
            let (_, kth, _) = v.select_nth_unstable_by(rank - 1, cmp);
            *kth
        }
    }
}

/// Trigonometric orthonormal basis of `L^2([lo, hi])`, constant first.
#[derive(Debug, Clone, Copy)]
struct FourierBasis<T> {
    lo: T,
    hi: T,
}

impl<T: Real> FourierBasis<T> {
    fn new(support: (T, T)) -> Self {
        FourierBasis { lo: support.0, hi: support.1 }
    }

    fn check(&self, y: T) -> Result<()> {
        if y < self.lo || y > self.hi || y.is_nan() {
            Err(GosaError::domain(format!(
                "value {y} outside basis support [{}, {}]",
                self.lo, self.hi
            )))
        } else {
            Ok(())
        }
    }

    fn eval(&self, j: usize, y: T) -> T {
        let len = self.hi - self.lo;
        if j == 0 {
            return T::one() / len.sqrt();
        }
        let m = T::from_count(j.div_ceil(2));
        let arg = T::TAU() * m * (y - self.lo) / len;
        let amp = (T::lit(2.0) / len).sqrt();
        if j % 2 == 1 {
            amp * arg.cos()
        } else {
            amp * arg.sin()
        }
    }
}
