//! Double-loop Monte-Carlo estimation of contrast indices.
//!
//! For a variable subset `I`, the outer sample `X^j` gives `Y^j` and the
//! global feature; for every outer point an inner sample with the
//! coordinates `I` pinned to `X^j_I` gives the conditional feature. The
//! index is
//!
//! ```text
//!   S_I = mean_j [psi(Y^j; theta*) - psi(Y^j; theta_I(X^j_I))]
//!         / (mean_j psi(Y^j; theta*) - mean_j min_theta psi(Y^j; theta))
//! ```

use rayon::prelude::*;

use crate::contrast::{sorted_copy, ContrastSpec, FeatureValue};
use crate::error::{GosaError, Result};
use crate::model::{check_subset, ModelSpec};
use crate::sampling::{sample_rows, SampleMatrix, StreamKey};
use crate::scalar::Real;

/// Denominators below this magnitude make the index undefined.
pub const DEGENERATE_THRESHOLD: f64 = 1e-12;

/// How the inner (frozen) samples are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerMode {
    /// One inner matrix shared by every outer point (common random numbers).
    #[default]
    Shared,
    /// An independent inner matrix per outer point.
    Fresh,
    /// Outer point `j` is paired with inner row `j` only (requires `n1 == n2`)
    /// and the contrast variation is estimated by the pick-freeze covariance
    /// of the quadratic embedding. Quadratic contrasts only.
    Paired,
}

impl InnerMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            InnerMode::Shared => "shared",
            InnerMode::Fresh => "fresh-inner",
            InnerMode::Paired => "paired",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstimatorConfig {
    pub n1: usize,
    pub n2: usize,
    pub seed: u64,
    /// 0-based variable indices frozen together.
    pub subset: Vec<usize>,
    pub replicates: usize,
    pub mode: InnerMode,
}

impl EstimatorConfig {
    pub fn new(n1: usize, n2: usize, seed: u64, subset: Vec<usize>) -> Self {
        EstimatorConfig { n1, n2, seed, subset, replicates: 10, mode: InnerMode::Shared }
    }

    pub fn with_replicates(mut self, b: usize) -> Self {
        self.replicates = b;
        self
    }

    pub fn with_mode(mut self, mode: InnerMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n1 < 2 || self.n2 < 2 {
            return Err(GosaError::contract(format!(
                "sample sizes must be >= 2 (n1={}, n2={})",
                self.n1, self.n2
            )));
        }
        if self.replicates == 0 {
            return Err(GosaError::contract("at least one replicate is required"));
        }
        if self.mode == InnerMode::Paired && self.n1 != self.n2 {
            return Err(GosaError::contract("paired mode requires n1 == n2"));
        }
        check_subset(&self.subset, dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEstimate<T> {
    /// Mean of the replicate values.
    pub value: T,
    /// Mean of the replicate contrast-variation estimates.
    pub numerator: T,
    /// Mean of the replicate denominators.
    pub denominator: T,
    pub replicate_values: Vec<T>,
    /// Sample standard deviation of the replicate values over `sqrt(B)`; 0 when `B = 1`.
    pub std_error: T,
    pub config: EstimatorConfig,
    pub contrast: &'static str,
    pub contrast_param: Option<T>,
    pub discretization: String,
    pub model: String,
}

impl<T: Real> IndexEstimate<T> {
    /// True when the estimate falls outside `[0, 1]` (Monte-Carlo noise is not clipped).
    pub fn out_of_range(&self) -> bool {
        self.value < T::zero() || self.value > T::one()
    }
}

/// Estimates the index of `cfg.subset` for one contrast.
pub fn estimate_index<T: Real>(
    model: &ModelSpec<T>,
    contrast: &ContrastSpec<T>,
    cfg: &EstimatorConfig,
) -> Result<IndexEstimate<T>> {
    estimate_index_sweep(model, std::slice::from_ref(contrast), cfg)?
        .pop()
        .expect("one result per contrast")
}

/// Estimates the index for every contrast of `contrasts` from the same model
/// evaluations. Configuration errors are returned as the outer error; per
/// contrast failures (degenerate denominators, optimizer failures) occupy
/// their own slot.
pub fn estimate_index_sweep<T: Real>(
    model: &ModelSpec<T>,
    contrasts: &[ContrastSpec<T>],
    cfg: &EstimatorConfig,
) -> Result<Vec<Result<IndexEstimate<T>>>> {
    if contrasts.is_empty() {
        return Err(GosaError::contract("contrast grid is empty"));
    }
    cfg.validate(model.dim())?;
    for c in contrasts {
        c.validate()?;
    }

    let mut per_contrast: Vec<Vec<Result<(T, T)>>> = vec![Vec::with_capacity(cfg.replicates); contrasts.len()];
    for b in 0..cfg.replicates {
        let run = run_replicate(model, contrasts, cfg, b as u64)?;
        for (slot, r) in per_contrast.iter_mut().zip(run) {
            slot.push(r);
        }
    }

    Ok(contrasts
        .iter()
        .zip(per_contrast)
        .map(|(c, reps)| summarize(model, c, cfg, reps))
        .collect())
}

fn summarize<T: Real>(
    model: &ModelSpec<T>,
    contrast: &ContrastSpec<T>,
    cfg: &EstimatorConfig,
    reps: Vec<Result<(T, T)>>,
) -> Result<IndexEstimate<T>> {
    let reps: Vec<(T, T)> = reps.into_iter().collect::<Result<_>>()?;
    let b = T::from_count(reps.len());
    let values: Vec<T> = reps.iter().map(|&(n, d)| n / d).collect();
    let value = values.iter().fold(T::zero(), |a, &v| a + v) / b;
    let numerator = reps.iter().fold(T::zero(), |a, r| a + r.0) / b;
    let denominator = reps.iter().fold(T::zero(), |a, r| a + r.1) / b;
    let std_error = if reps.len() > 1 {
        let ss = values.iter().fold(T::zero(), |a, &v| a + (v - value) * (v - value));
        (ss / (b - T::one())).sqrt() / b.sqrt()
    } else {
        T::zero()
    };
    Ok(IndexEstimate {
        value,
        numerator,
        denominator,
        replicate_values: values,
        std_error,
        config: cfg.clone(),
        contrast: contrast.id(),
        contrast_param: contrast.param(),
        discretization: contrast.discretization(),
        model: model.name().to_string(),
    })
}

/// Global (unconditional) part of one contrast on the outer sample.
struct OuterPart<T> {
    /// `psi(Y^j; theta*)`
    loss_at_global: Vec<T>,
    /// `mean_j min_theta psi(Y^j; theta)`
    mean_min: T,
}

fn outer_part<T: Real>(c: &ContrastSpec<T>, y: &[T], sorted: Option<&[T]>) -> Result<OuterPart<T>> {
    let global = c.feature_prepared(y, sorted)?;
    let loss_at_global = y.iter().map(|&v| c.pointwise_loss(v, &global)).collect::<Result<Vec<_>>>()?;
    let mut min_sum = T::zero();
    for &v in y {
        min_sum = min_sum + c.pointwise_min(v)?;
    }
    Ok(OuterPart { loss_at_global, mean_min: min_sum / T::from_count(y.len()) })
}

fn checked_ratio_parts<T: Real>(numerator: T, denominator: T, what: &str) -> Result<(T, T)> {
    if !(denominator.abs() >= T::lit(DEGENERATE_THRESHOLD)) {
        return Err(GosaError::degenerate(format!(
            "{what}: denominator {} below {DEGENERATE_THRESHOLD:e}",
            denominator.as_f64()
        )));
    }
    Ok((numerator, denominator))
}

/// One replicate: `(numerator, denominator)` per contrast.
fn run_replicate<T: Real>(
    model: &ModelSpec<T>,
    contrasts: &[ContrastSpec<T>],
    cfg: &EstimatorConfig,
    b: u64,
) -> Result<Vec<Result<(T, T)>>> {
    let outer_key = StreamKey::new(cfg.seed, 2 * b);
    let inner_key = StreamKey::new(cfg.seed, 2 * b + 1);
    let outer = sample_rows(model, outer_key, 0, cfg.n1)?;
    let y: Vec<T> = (0..cfg.n1).map(|j| model.eval_unchecked(outer.row(j))).collect();

    let any_order = contrasts.iter().any(|c| c.uses_order_statistics());
    let y_sorted = any_order.then(|| sorted_copy(&y));
    let outer_parts: Vec<Result<OuterPart<T>>> =
        contrasts.iter().map(|c| outer_part(c, &y, y_sorted.as_deref())).collect();

    if cfg.mode == InnerMode::Paired {
        let inner = sample_rows(model, inner_key, 0, cfg.n2)?;
        let y_frozen: Vec<T> = (0..cfg.n1)
            .into_par_iter()
            .map_init(Vec::new, |row, j| {
                frozen_row(row, inner.row(j), outer.row(j), &cfg.subset);
                model.eval_unchecked(row)
            })
            .collect();
        return Ok(contrasts
            .iter()
            .zip(outer_parts)
            .map(|(c, part)| paired_parts(c, &y, &y_frozen, part?.mean_min))
            .collect());
    }

    let shared = match cfg.mode {
        InnerMode::Shared => Some(sample_rows(model, inner_key, 0, cfg.n2)?),
        _ => None,
    };
    let active: Vec<bool> = outer_parts.iter().map(|p| p.is_ok()).collect();
    let sort_inner =
        contrasts.iter().filter(|c| c.uses_order_statistics()).count() > 1
            || contrasts.iter().any(|c| matches!(c, ContrastSpec::QuantileTail { .. }));

    // conditional[j][c] = psi(Y^j; theta_I(X^j_I))
    let conditional: Vec<Vec<Result<T>>> = (0..cfg.n1)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::with_capacity(cfg.n2)),
            |(row, ys), j| -> Result<Vec<Result<T>>> {
                let fresh;
                let inner: &SampleMatrix<T> = match &shared {
                    Some(m) => m,
                    None => {
                        fresh = sample_rows(model, inner_key, j * cfg.n2, cfg.n2)?;
                        &fresh
                    }
                };
                ys.clear();
                for l in 0..cfg.n2 {
                    frozen_row(row, inner.row(l), outer.row(j), &cfg.subset);
                    ys.push(model.eval_unchecked(row));
                }
                let sorted = sort_inner.then(|| sorted_copy(ys));
                Ok(contrasts
                    .iter()
                    .zip(&active)
                    .map(|(c, &on)| {
                        if !on {
                            return Ok(T::nan());
                        }
                        let theta: FeatureValue<T> = c.feature_prepared(ys, sorted.as_deref())?;
                        c.pointwise_loss(y[j], &theta)
                    })
                    .collect())
            },
        )
        .collect::<Result<_>>()?;

    let n1 = T::from_count(cfg.n1);
    Ok(outer_parts
        .into_iter()
        .enumerate()
        .map(|(ci, part)| {
            let part = part?;
            let mut gain = T::zero();
            let mut global = T::zero();
            for (j, row) in conditional.iter().enumerate() {
                let cond = match &row[ci] {
                    Ok(v) => *v,
                    Err(e) => return Err(e.clone()),
                };
                gain = gain + (part.loss_at_global[j] - cond);
                global = global + part.loss_at_global[j];
            }
            checked_ratio_parts(gain / n1, global / n1 - part.mean_min, contrasts[ci].id())
        })
        .collect())
}

/// Copies `inner` into `row` and overwrites the frozen coordinates from `outer`.
#[inline]
fn frozen_row<T: Copy>(row: &mut Vec<T>, inner: &[T], outer: &[T], subset: &[usize]) {
    row.clear();
    row.extend_from_slice(inner);
    for &i in subset {
        row[i] = outer[i];
    }
}

/// `mean(a * b) - mean(a) * mean(b)`, accumulated left to right.
fn cross_moment<T: Real>(a: &[T], b: &[T]) -> T {
    let n = T::from_count(a.len());
    let mut sab = T::zero();
    let mut sa = T::zero();
    let mut sb = T::zero();
    for (&u, &v) in a.iter().zip(b) {
        sab = sab + u * v;
        sa = sa + u;
        sb = sb + v;
    }
    sab / n - (sa / n) * (sb / n)
}

fn paired_parts<T: Real>(c: &ContrastSpec<T>, y: &[T], y_frozen: &[T], mean_min: T) -> Result<(T, T)> {
    let form = c.quadratic_form().ok_or_else(|| {
        GosaError::contract(format!("paired mode needs a quadratic contrast, got {}", c.id()))
    })?;
    let terms = form.weights().len();
    let n = y.len();
    // Column-major embeddings: g[i * n + j] = g_i(y_j).
    let mut g = vec![T::zero(); terms * n];
    let mut g_frozen = vec![T::zero(); terms * n];
    let mut buf = vec![T::zero(); terms];
    for j in 0..n {
        form.embed(y[j], &mut buf)?;
        for i in 0..terms {
            g[i * n + j] = buf[i];
        }
        form.embed(y_frozen[j], &mut buf)?;
        for i in 0..terms {
            g_frozen[i * n + j] = buf[i];
        }
    }
    let mut numerator = T::zero();
    let mut denominator = T::zero();
    for (i, &w) in form.weights().iter().enumerate() {
        let gi = &g[i * n..(i + 1) * n];
        let gfi = &g_frozen[i * n..(i + 1) * n];
        numerator = numerator + w * cross_moment(gi, gfi);
        denominator = denominator + w * cross_moment(gi, gi);
    }
    checked_ratio_parts(numerator, denominator - mean_min, c.id())
}

/// Pick-freeze Monte-Carlo estimator of the first-order Sobol index of the
/// 0-based variable `k`:
/// `(mean(Y Y'_k) - mean(Y) mean(Y'_k)) / (mean(Y^2) - mean(Y)^2)`,
/// where `Y'_k` re-evaluates row `j` of the inner matrix with coordinate `k`
/// taken from row `j` of the outer matrix.
pub fn pick_freeze_sobol<T: Real>(model: &ModelSpec<T>, k: usize, n: usize, seed: u64) -> Result<T> {
    if n < 2 {
        return Err(GosaError::contract("pick-freeze needs N >= 2"));
    }
    check_subset(&[k], model.dim())?;
    let outer = sample_rows(model, StreamKey::new(seed, 0), 0, n)?;
    let inner = sample_rows(model, StreamKey::new(seed, 1), 0, n)?;
    let mut y = Vec::with_capacity(n);
    let mut y_k = Vec::with_capacity(n);
    let mut row = Vec::with_capacity(model.dim());
    for j in 0..n {
        y.push(model.eval_unchecked(outer.row(j)));
        frozen_row(&mut row, inner.row(j), outer.row(j), &[k]);
        y_k.push(model.eval_unchecked(&row));
    }
    let (num, den) = checked_ratio_parts(cross_moment(&y, &y_k), cross_moment(&y, &y), "pick-freeze")?;
    Ok(num / den)
}
