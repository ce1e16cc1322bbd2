use crate::error::{GosaError, Result};
use crate::scalar::Real;

/// Strictly increasing quadrature nodes used to discretize functional contrasts.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    nodes: Vec<T>,
}

impl<T: Real> Grid<T> {
    pub fn new(nodes: Vec<T>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(GosaError::contract(format!(
                "grid needs at least 2 nodes, got {}",
                nodes.len()
            )));
        }
        if nodes.iter().any(|v| !v.is_finite()) {
            return Err(GosaError::contract("grid nodes must be finite"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GosaError::contract("grid nodes must be strictly increasing"));
        }
        Ok(Grid { nodes })
    }

    /// `count` equally spaced nodes from `lo` to `hi` inclusive.
    pub fn uniform(lo: T, hi: T, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(GosaError::contract("uniform grid needs count >= 2"));
        }
        let step = (hi - lo) / T::from_count(count - 1);
        let mut nodes: Vec<T> = (0..count).map(|i| lo + step * T::from_count(i)).collect();
        nodes[count - 1] = hi;
        Grid::new(nodes)
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn first(&self) -> T {
        self.nodes[0]
    }

    pub fn last(&self) -> T {
        self.nodes[self.nodes.len() - 1]
    }

    /// Trapezoid weights: `sum_i w_i f(t_i)` is the composite trapezoid rule.
    pub fn trapezoid_weights(&self) -> Vec<T> {
        let n = self.nodes.len();
        let half = T::lit(0.5);
        let mut w = vec![T::zero(); n];
        for i in 0..n - 1 {
            let h = (self.nodes[i + 1] - self.nodes[i]) * half;
            w[i] = w[i] + h;
            w[i + 1] = w[i + 1] + h;
        }
        w
    }

    /// Composite trapezoid rule of `f` over the grid.
    pub fn integrate<F: FnMut(usize, T) -> T>(&self, mut f: F) -> T {
        let half = T::lit(0.5);
        let mut prev = f(0, self.nodes[0]);
        let mut acc = T::zero();
        for i in 1..self.nodes.len() {
            let cur = f(i, self.nodes[i]);
            acc = acc + (self.nodes[i] - self.nodes[i - 1]) * half * (prev + cur);
            prev = cur;
        }
        acc
    }

    /// Human-readable description recorded next to results (`lo:hi:count` when uniform).
    pub fn describe(&self) -> String {
        let n = self.nodes.len();
        let lo = self.first().as_f64();
        let hi = self.last().as_f64();
        let step = (hi - lo) / (n - 1) as f64;
        let tol = 4.0 * T::epsilon().as_f64() * (1.0 + lo.abs() + hi.abs());
        let uniform = self
            .nodes
            .iter()
            .enumerate()
            .all(|(i, v)| (v.as_f64() - (lo + step * i as f64)).abs() <= tol);
        if uniform {
            format!("{lo}:{hi}:{n}")
        } else {
            format!("nonuniform[{lo}..{hi};{n}]")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::<f64>::new(vec![1.0]).is_err());
        assert!(Grid::new(vec![0.0, 0.0]).is_err());
        assert!(Grid::new(vec![1.0, 0.5]).is_err());
        assert!(Grid::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let g = Grid::new(vec![0.0, 0.3, 1.0, 2.5]).unwrap();
        let v: f64 = g.integrate(|_, t| 2.0 * t + 1.0);
        assert!((v - (2.5 * 2.5 + 2.5)).abs() < 1e-12);
        let w = g.trapezoid_weights();
        let v2: f64 = w.iter().zip(g.nodes()).map(|(w, t)| w * (2.0 * t + 1.0)).sum();
        assert!((v - v2).abs() < 1e-12);
    }

    #[test]
    fn uniform_endpoints_exact() {
        let g = Grid::uniform(-1.0f32, 3.0, 7).unwrap();
        assert_eq!(g.first(), -1.0);
        assert_eq!(g.last(), 3.0);
        assert_eq!(g.describe(), "-1:3:7");
    }
}
