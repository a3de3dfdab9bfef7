//! Uniform radial grid on `[0, 1]` and sampled profiles.

use crate::error::{Error, Result};

/// Uniform endpoint-inclusive grid `y_i = i h`, `i = 0..=N`, `h = 1/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RadialGrid {
    intervals: usize,
}

impl RadialGrid {
    /// `intervals` must be even (composite Simpson) and at least 8.
    pub fn new(intervals: usize) -> Result<Self> {
        if intervals < 8 || intervals % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "need an even number of intervals >= 8, got {intervals}"
            )));
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        1.0 / self.intervals as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.intervals as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.intervals).map(move |i| self.node(i))
    }

    /// Grid with twice the resolution.
    pub fn refined(&self) -> Self {
        Self {
            intervals: 2 * self.intervals,
        }
    }

    /// Composite Simpson weights (including the factor `h/3`).
    pub fn simpson_weights(&self) -> Vec<f64> {
        let n = self.intervals;
        let c = self.h() / 3.0;
        (0..=n)
            .map(|i| {
                if i == 0 || i == n {
                    c
                } else if i % 2 == 1 {
                    4.0 * c
                } else {
                    2.0 * c
                }
            })
            .collect()
    }
}

/// Samples of a radial profile on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: RadialGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.nodes().map(f).collect(),
        }
    }

    pub fn from_values(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> RadialGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at `y = 1`.
    pub fn boundary_value(&self) -> f64 {
        self.values[self.grid.intervals()]
    }

    /// Force the Dirichlet condition `f(1) = 0`.
    pub fn pin_dirichlet(&mut self) {
        let n = self.grid.intervals();
        self.values[n] = 0.0;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, factor: f64, other: &GridFunction) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub(crate) fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                left: self.grid.intervals(),
                right: other.grid.intervals(),
            });
        }
        Ok(())
    }
}
