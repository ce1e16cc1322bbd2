//! Black-box models `Y = h(X_1, ..., X_d)` with independent input marginals.

use std::fmt;
use std::sync::Arc;

use crate::error::{GosaError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginalSpec<T> {
    Uniform { lo: T, hi: T },
    Exponential { rate: T },
    /// Law of `-E` with `E ~ Exp(rate)`, drawn independently of other inputs.
    NegatedExponential { rate: T },
    Normal { mean: T, sd: T },
}

impl<T: Real> MarginalSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MarginalSpec::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            MarginalSpec::Exponential { rate } | MarginalSpec::NegatedExponential { rate } => {
                rate > T::zero() && rate.is_finite()
            }
            MarginalSpec::Normal { mean, sd } => mean.is_finite() && sd > T::zero() && sd.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(GosaError::contract(format!("invalid marginal {self:?}")))
        }
    }
}

type Evaluator<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// A deterministic model with product input distribution. Cheap to clone.
#[derive(Clone)]
pub struct ModelSpec<T> {
    name: String,
    marginals: Vec<MarginalSpec<T>>,
    eval: Evaluator<T>,
}

impl<T> fmt::Debug for ModelSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("dim", &self.marginals.len())
            .finish()
    }
}

impl<T: Real> ModelSpec<T> {
    /// A model from any evaluator. The evaluator receives slices of length `marginals.len()`.
    pub fn new<F>(name: impl Into<String>, marginals: Vec<MarginalSpec<T>>, eval: F) -> Result<Self>
    where
        F: Fn(&[T]) -> T + Send + Sync + 'static,
    {
        for m in &marginals {
            m.validate()?;
        }
        Ok(ModelSpec { name: name.into(), marginals, eval: Arc::new(eval) })
    }

    /// `X1 + X2`, `X1 ~ Exp(1)`, `X2 ~ -Exp(1)`: a Laplace(0, 1) output.
    pub fn example1() -> Self {
        let m = vec![
            MarginalSpec::Exponential { rate: T::one() },
            MarginalSpec::NegatedExponential { rate: T::one() },
        ];
        Self::new("example1", m, |x| x[0] + x[1]).expect("valid built-in")
    }

    /// `X1 + X2`, `X1 ~ Exp(1)`, `X2 ~ Exp(a)`.
    pub fn example2(a: T) -> Result<Self> {
        let m = vec![MarginalSpec::Exponential { rate: T::one() }, MarginalSpec::Exponential { rate: a }];
        Self::new(format!("example2[a={}]", a.as_f64()), m, |x| x[0] + x[1])
    }

    /// `theta X1 + X2` with standard normal inputs.
    pub fn gaussian_linear(theta: T) -> Result<Self> {
        if !theta.is_finite() {
            return Err(GosaError::contract("theta must be finite"));
        }
        let n = MarginalSpec::Normal { mean: T::zero(), sd: T::one() };
        Self::new(format!("gaussian-linear[theta={}]", theta.as_f64()), vec![n, n], move |x| {
            theta * x[0] + x[1]
        })
    }

    /// `sin x1 + 7 sin^2 x2 + 0.1 x3^4 sin x1` on `[-pi, pi]^3`.
    pub fn ishigami() -> Self {
        let u = MarginalSpec::Uniform { lo: -T::PI(), hi: T::PI() };
        let a = T::lit(7.0);
        let b = T::lit(0.1);
        Self::new("ishigami", vec![u, u, u], move |x| {
            let s1 = x[0].sin();
            let s2 = x[1].sin();
            let x3sq = x[2] * x[2];
            s1 + a * s2 * s2 + b * x3sq * x3sq * s1
        })
        .expect("valid built-in")
    }

    /// Appends one Uniform(0, 1) input that the output ignores.
    pub fn dummy_augmented(base: &ModelSpec<T>) -> Self {
        let mut marginals = base.marginals.clone();
        marginals.push(MarginalSpec::Uniform { lo: T::zero(), hi: T::one() });
        let d = base.dim();
        let inner = base.eval.clone();
        ModelSpec {
            name: format!("{}+dummy", base.name),
            marginals,
            eval: Arc::new(move |x: &[T]| inner(&x[..d])),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[MarginalSpec<T>] {
        &self.marginals
    }

    pub fn evaluate(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim() {
            return Err(GosaError::contract(format!(
                "model {} expects {} inputs, got {}",
                self.name,
                self.dim(),
                x.len()
            )));
        }
        Ok((self.eval)(x))
    }

    /// Evaluator without the dimension check, for hot loops.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[T]) -> T {
        (self.eval)(x)
    }

    /// Pins the 0-based coordinates `subset` to `values`; the result takes the
    /// remaining coordinates in their original order.
    pub fn freeze(&self, subset: &[usize], values: &[T]) -> Result<Self> {
        check_subset(subset, self.dim())?;
        if subset.len() != values.len() {
            return Err(GosaError::contract("freeze needs one value per frozen coordinate"));
        }
        let d = self.dim();
        let mut pinned: Vec<Option<T>> = vec![None; d];
        for (&i, &v) in subset.iter().zip(values) {
            pinned[i] = Some(v);
        }
        let marginals = (0..d).filter(|i| pinned[*i].is_none()).map(|i| self.marginals[i]).collect();
        let inner = self.eval.clone();
        let name = format!(
            "{}|{}",
            self.name,
            subset.iter().map(|i| format!("x{}", i + 1)).collect::<Vec<_>>().join(",")
        );
        Ok(ModelSpec {
            name,
            marginals,
            eval: Arc::new(move |free: &[T]| {
                let mut it = free.iter();
                let full: Vec<T> = pinned
                    .iter()
                    .map(|p| p.unwrap_or_else(|| *it.next().expect("free coordinate")))
                    .collect();
                inner(&full)
            }),
        })
    }
}

/// Checks a 0-based index set: nonempty, in range, no duplicates.
pub(crate) fn check_subset(subset: &[usize], dim: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(GosaError::contract("variable subset must be nonempty"));
    }
    for (k, &i) in subset.iter().enumerate() {
        if i >= dim {
            return Err(GosaError::contract(format!(
                "variable index {} out of range 1..={dim}",
                i + 1
            )));
        }
        if subset[..k].contains(&i) {
            return Err(GosaError::contract(format!("variable {} repeated in subset", i + 1)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn evaluate_examples() {
        assert_eq!(ModelSpec::<f64>::example1().evaluate(&[1.0, -0.5]).unwrap(), 0.5);
        assert_eq!(ModelSpec::<f64>::ishigami().evaluate(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(ModelSpec::gaussian_linear(2.0).unwrap().evaluate(&[1.0, 1.0]).unwrap(), 3.0);
        assert!(ModelSpec::<f64>::example1().evaluate(&[1.0]).is_err());
    }

    #[test]
    fn freeze_examples() {
        let m = ModelSpec::<f64>::example1().freeze(&[0], &[2.0]).unwrap();
        assert_eq!(m.dim(), 1);
        assert_eq!(m.evaluate(&[-1.0]).unwrap(), 1.0);

        let m = ModelSpec::<f64>::ishigami().freeze(&[2], &[0.0]).unwrap();
        assert!((m.evaluate(&[PI / 2.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);

        let m = ModelSpec::example2(3.0f64).unwrap().freeze(&[0, 1], &[1.0, 1.0]).unwrap();
        assert_eq!(m.dim(), 0);
        assert_eq!(m.evaluate(&[]).unwrap(), 2.0);
    }

    #[test]
    fn freeze_rejects_bad_subsets() {
        let m = ModelSpec::<f64>::ishigami();
        assert!(m.freeze(&[3], &[0.0]).is_err());
        assert!(m.freeze(&[], &[]).is_err());
        assert!(m.freeze(&[1, 1], &[0.0, 0.0]).is_err());
        assert!(m.freeze(&[1], &[]).is_err());
    }

    #[test]
    fn invalid_marginals_rejected() {
        assert!(ModelSpec::example2(0.0f64).is_err());
        assert!(ModelSpec::new("bad", vec![MarginalSpec::Uniform { lo: 1.0, hi: 1.0 }], |x: &[f64]| x[0]).is_err());
        assert!(ModelSpec::new("bad", vec![MarginalSpec::Normal { mean: 0.0, sd: -1.0 }], |x: &[f64]| x[0]).is_err());
    }

    #[test]
    fn dummy_matches_base() {
        let base = ModelSpec::<f64>::ishigami();
        let aug = ModelSpec::dummy_augmented(&base);
        assert_eq!(aug.dim(), 4);
        let x = [0.3, -1.1, 2.0];
        assert_eq!(aug.evaluate(&[0.3, -1.1, 2.0, 0.77]).unwrap(), base.evaluate(&x).unwrap());
    }
}
