use serde::Serialize;

use crate::error::{Error, Result};

/// Log-uniform nodes on `[t_min, t_max]` with trapezoid weights for the
/// measure `dt/t`.
///
/// Node `i` owns the cell `[log t_i - h/2, log t_i + h/2]` clipped to the
/// grid range; its weight is the cell length, which is the trapezoid rule in
/// `log t`. Restricting the integral to `[a, b]` keeps the part of each cell
/// inside `[log a, log b]`, so truncations add up exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            t_min: 1e-8,
            t_max: 1e2,
            count: 400,
        }
    }
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "time grid needs 0 < t_min < t_max < inf, got [{t_min}, {t_max}]"
            )));
        }
        if count < 2 {
            return Err(Error::InvalidGrid(format!(
                "time grid needs >= 2 nodes, got {count}"
            )));
        }
        Ok(Self {
            t_min,
            t_max,
            count,
        })
    }

    fn log_step(&self) -> f64 {
        (self.t_max / self.t_min).ln() / (self.count - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            return self.t_max;
        }
        (self.t_min.ln() + i as f64 * self.log_step()).exp()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }

    /// Weight of node `i` for `∫_a^b · dt/t` (`a = 0`, `b = inf` allowed).
    pub fn weight_in(&self, i: usize, a: f64, b: f64) -> f64 {
        let h = self.log_step();
        let lo_grid = self.t_min.ln();
        let hi_grid = self.t_max.ln();
        let u = lo_grid + i as f64 * h;
        let cell_lo = (u - 0.5 * h).max(lo_grid);
        let cell_hi = (u + 0.5 * h).min(hi_grid);
        let la = if a > 0.0 { a.ln() } else { f64::NEG_INFINITY };
        let lb = if b.is_finite() { b.ln() } else { f64::INFINITY };
        (cell_hi.min(lb) - cell_lo.max(la)).max(0.0)
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| self.weight_in(i, 0.0, f64::INFINITY))
            .collect()
    }

    pub fn weights_in(&self, a: f64, b: f64) -> Vec<f64> {
        (0..self.count).map(|i| self.weight_in(i, a, b)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nodes_increase_and_weights_sum_to_log_ratio() {
        let g = TimeGrid::default();
        let nodes = g.nodes();
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        assert_relative_eq!(nodes[0], 1e-8);
        assert_relative_eq!(nodes[399], 1e2);
        let total: f64 = g.weights().iter().sum();
        assert_relative_eq!(total, (1e10f64).ln(), max_relative = 1e-12);
    }

    #[test]
    fn truncated_weights_split_exactly() {
        let g = TimeGrid::new(1e-4, 1.0, 50).unwrap();
        for a in [1e-5, 3.3e-3, 0.05, 2.0] {
            for i in 0..g.count {
                let whole = g.weight_in(i, 0.0, f64::INFINITY);
                let split = g.weight_in(i, 0.0, a) + g.weight_in(i, a, f64::INFINITY);
                assert_relative_eq!(whole, split, epsilon = 1e-14);
            }
        }
        assert!(g.weights_in(2.0, f64::INFINITY).iter().all(|&w| w == 0.0));
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(TimeGrid::new(0.0, 1.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 0.5, 10).is_err());
        assert!(TimeGrid::new(0.1, 1.0, 1).is_err());
    }
}
