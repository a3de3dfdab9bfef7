//! Gaussian-weighted radial geometry: `rho_b(y) = exp(-b y^2 / 2)`,
//! `<f, g>_b = int_0^1 f g rho_b y dy`, the associated norms, and the scaling
//! operator `Lambda = y d/dy`.
//!
//! Integrals use composite Simpson on the uniform grid; derivatives use
//! fourth-order stencils (even reflection at the origin, one-sided at `y = 1`).

use crate::error::{Error, Result};
use crate::grid::{GridFunction, RadialGrid};

/// Largest admissible `|b|` for library entry points.
pub const WEIGHT_CAP: f64 = 0.2;
/// Above this `|b|` the perturbative expansions are no longer reliable.
pub const WEIGHT_WARN: f64 = 0.05;

/// Drift / weight parameter `b`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeightParam {
    b: f64,
}

impl WeightParam {
    pub fn new(b: f64) -> Result<Self> {
        if !b.is_finite() || b.abs() >= WEIGHT_CAP {
            return Err(Error::WeightOutOfRange(b));
        }
        if b.abs() > WEIGHT_WARN {
            log::warn!(
                "weight parameter b = {b} is above {WEIGHT_WARN}; expansions may be inaccurate"
            );
        }
        Ok(Self { b })
    }

    /// No range check; for diagnostics evaluated at the running slope `a`.
    pub(crate) fn unchecked(b: f64) -> Self {
        Self { b }
    }

    /// The unweighted case `b = 0`.
    pub fn flat() -> Self {
        Self { b: 0.0 }
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn rho(&self, y: f64) -> f64 {
        (-0.5 * self.b * y * y).exp()
    }
}

/// Simpson weights times `rho_b(y) y`; the quadrature rule for `<., .>_b`.
pub fn measure(grid: RadialGrid, w: WeightParam) -> Vec<f64> {
    grid.simpson_weights()
        .into_iter()
        .zip(grid.nodes())
        .map(|(s, y)| s * w.rho(y) * y)
        .collect()
}

pub fn inner_b(f: &GridFunction, g: &GridFunction, w: WeightParam) -> Result<f64> {
    f.check_same_grid(g)?;
    let m = measure(f.grid(), w);
    Ok(dot3(&m, f.values(), g.values()))
}

pub(crate) fn dot3(m: &[f64], a: &[f64], b: &[f64]) -> f64 {
    m.iter().zip(a).zip(b).map(|((m, a), b)| m * a * b).sum()
}

pub fn l2b_norm(f: &GridFunction, w: WeightParam) -> f64 {
    let m = measure(f.grid(), w);
    dot3(&m, f.values(), f.values()).max(0.0).sqrt()
}

/// `int_0^1 f y dy`.
pub fn radial_integral(f: &GridFunction) -> f64 {
    let grid = f.grid();
    grid.simpson_weights()
        .iter()
        .zip(grid.nodes())
        .zip(f.values())
        .map(|((s, y), v)| s * y * v)
        .sum()
}

/// Fourth-order first derivative. Profiles are treated as even in `y`.
pub fn derivative(f: &GridFunction) -> GridFunction {
    let grid = f.grid();
    let n = grid.intervals();
    let v = f.values();
    let inv = 1.0 / (12.0 * grid.h());
    let mut d = vec![0.0; n + 1];
    // y = 0: odd derivative of an even profile vanishes.
    d[0] = 0.0;
    // y = h: reflect f(-h) = f(h).
    d[1] = (v[1] - 8.0 * v[0] + 8.0 * v[2] - v[3]) * inv;
    for i in 2..=n - 2 {
        d[i] = (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) * inv;
    }
    d[n - 1] = (-v[n - 4] + 6.0 * v[n - 3] - 18.0 * v[n - 2] + 10.0 * v[n - 1] + 3.0 * v[n]) * inv;
    d[n] =
        (3.0 * v[n - 4] - 16.0 * v[n - 3] + 36.0 * v[n - 2] - 48.0 * v[n - 1] + 25.0 * v[n]) * inv;
    GridFunction::from_values(grid, d).expect("same grid length")
}

/// `Lambda f = y f'(y)`.
pub fn lambda_op(f: &GridFunction) -> GridFunction {
    let mut d = derivative(f);
    let grid = d.grid();
    for (i, v) in d.values_mut().iter_mut().enumerate() {
        *v *= grid.node(i);
    }
    d
}

/// `(||f'||^2_{L^2_b} + ||f||^2_{L^2_b})^{1/2}`.
pub fn h1b_norm(f: &GridFunction, w: WeightParam) -> Result<f64> {
    let d = derivative(f);
    let m = measure(f.grid(), w);
    Ok((dot3(&m, d.values(), d.values()) + dot3(&m, f.values(), f.values())).sqrt())
}

/// `f'(1)` from the third-order one-sided stencil on the last four nodes.
pub fn boundary_slope(f: &GridFunction) -> f64 {
    let n = f.grid().intervals();
    let v = f.values();
    (11.0 * v[n] - 18.0 * v[n - 1] + 9.0 * v[n - 2] - 2.0 * v[n - 3]) / (6.0 * f.grid().h())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::{eta, j0_zeros};

    fn grid(n: usize) -> RadialGrid {
        RadialGrid::new(n).unwrap()
    }

    #[test]
    fn weight_cap_is_enforced() {
        assert!(WeightParam::new(0.19).is_ok());
        assert!(WeightParam::new(0.2).is_err());
        assert!(WeightParam::new(-0.25).is_err());
        assert!(WeightParam::new(f64::NAN).is_err());
    }

    #[test]
    fn inner_product_examples() {
        let g = grid(1024);
        let zeros = j0_zeros(2).unwrap();
        let e1 = eta(1, g, &zeros).unwrap().values;
        let one = inner_b(&e1, &e1, WeightParam::flat()).unwrap();
        assert!((one - 1.0).abs() < 1e-8, "{one}");
        let zero = GridFunction::zeros(g);
        assert_eq!(inner_b(&zero, &e1, WeightParam::flat()).unwrap(), 0.0);
        let p = GridFunction::from_fn(g, |y| 1.0 - y * y);
        // int_0^1 (1-y^2)^2 y dy = 1/6 (substitute u = y^2).
        let val = inner_b(&p, &p, WeightParam::flat()).unwrap();
        assert!((val - 1.0 / 6.0).abs() < 1e-12, "{val}");
        let other = GridFunction::zeros(grid(512));
        assert!(inner_b(&p, &other, WeightParam::flat()).is_err());
    }

    #[test]
    fn scaling_operator_examples() {
        let g = grid(256);
        let c = GridFunction::from_fn(g, |_| 3.0);
        assert!(lambda_op(&c).max_abs() < 1e-12);
        let sq = GridFunction::from_fn(g, |y| y * y);
        let l = lambda_op(&sq);
        for (y, v) in g.nodes().zip(l.values()) {
            assert!((v - 2.0 * y * y).abs() < 1e-12);
        }
        let zeros = j0_zeros(1).unwrap();
        let g = grid(1024);
        let e1 = eta(1, g, &zeros).unwrap();
        let at_one = lambda_op(&e1.values).boundary_value();
        assert!(
            (at_one + (2.0 * zeros[0].lambda).sqrt()).abs() < 1e-6,
            "{at_one}"
        );
    }

    #[test]
    fn h1_norm_examples() {
        let g = grid(1024);
        assert_eq!(
            h1b_norm(&GridFunction::zeros(g), WeightParam::flat()).unwrap(),
            0.0
        );
        let zeros = j0_zeros(1).unwrap();
        let e1 = eta(1, g, &zeros).unwrap().values;
        let n = h1b_norm(&e1, WeightParam::flat()).unwrap();
        assert!((n - (zeros[0].lambda + 1.0).sqrt()).abs() < 1e-6, "{n}");
        for b in [-0.1, 0.05, 0.15] {
            let nb = h1b_norm(&e1, WeightParam::new(b).unwrap()).unwrap();
            assert!(nb <= (b.abs() / 2.0).exp() * n + 1e-12);
        }
    }

    #[test]
    fn boundary_stencil_is_third_order() {
        let err = |n: usize| {
            let f = GridFunction::from_fn(grid(n), |y| (3.0 * y).sin());
            (boundary_slope(&f) - 3.0 * 3.0_f64.cos()).abs()
        };
        let order = (err(64) / err(128)).log2();
        assert!(order > 2.8, "order {order}");
    }

    #[test]
    fn flat_weight_matches_radial_integral() {
        let g = grid(512);
        let f = GridFunction::from_fn(g, |y| (2.0 * y).cos());
        let one = GridFunction::from_fn(g, |_| 1.0);
        let a = inner_b(&f, &one, WeightParam::flat()).unwrap();
        assert!((a - radial_integral(&f)).abs() < 1e-15);
    }
}
