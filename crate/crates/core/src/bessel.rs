//! Bessel function `J0`, its zeros, and the normalized Dirichlet eigenfunctions
//! of the radial Laplacian on the unit disk.
//!
//! `J0` and `J1` are evaluated in three regimes:
//!
//! * `x <= 8`: power series with Neumaier-compensated summation,
//! * `8 < x <= 50`: Miller backward recurrence normalized by
//!   `1 = J0 + 2 (J2 + J4 + ...)`,
//! * `x > 50`: Hankel asymptotic expansion.
//!
//! The eigenfunctions are
//!
//! ```text
//! eta_j(y) = sqrt(2) J0(r_j y) / |J0'(r_j)|,   lambda_j = r_j^2,
//! ```
//!
//! orthonormal in `L^2(y dy)` on `[0, 1]` with `eta_j(1) = 0`.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, RadialGrid};

const SERIES_LIMIT: f64 = 8.0;
const RECURRENCE_LIMIT: f64 = 50.0;
const MAX_ZEROS: usize = 64;
const NEWTON_MAX_ITER: usize = 100;

/// Running sum with Neumaier compensation.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn series_j0_j1(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let mut j0 = CompensatedSum::default();
    let mut j1 = CompensatedSum::default();
    // term0_m = (-q)^m / (m!)^2, term1_m = (-q)^m / (m! (m+1)!)
    let mut t0 = 1.0;
    let mut t1 = 1.0;
    j0.add(t0);
    j1.add(t1);
    for m in 1..60 {
        let mf = m as f64;
        t0 *= -q / (mf * mf);
        t1 *= -q / (mf * (mf + 1.0));
        j0.add(t0);
        j1.add(t1);
        if t0.abs() < 1e-18 * j0.value().abs().max(1e-300) && t1.abs() < 1e-18 {
            break;
        }
    }
    (j0.value(), 0.5 * x * j1.value())
}

fn recurrence_j0_j1(x: f64) -> (f64, f64) {
    // Start well above x so that J_m(x) is negligible.
    let start = {
        let m = (x + 30.0 + 6.0 * x.cbrt()).ceil() as usize;
        m + m % 2
    };
    let two_over_x = 2.0 / x;
    let mut next = 0.0; // J_{n+1}
    let mut cur = 1e-30; // J_n
    let mut norm = CompensatedSum::default();
    let mut j1 = 0.0;
    for n in (1..=start).rev() {
        let prev = n as f64 * two_over_x * cur - next; // J_{n-1}
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            j1 *= 1e-250;
            norm = CompensatedSum {
                sum: norm.sum * 1e-250,
                carry: norm.carry * 1e-250,
            };
        }
        // cur now holds J_{n-1}
        let order = n - 1;
        if order == 1 {
            j1 = cur;
        }
        if order > 0 && order % 2 == 0 {
            norm.add(2.0 * cur);
        }
    }
    norm.add(cur);
    let scale = norm.value();
    (cur / scale, j1 / scale)
}

fn hankel_j0_j1(x: f64) -> (f64, f64) {
    // P and Q for orders 0 and 1, mu = 4 nu^2.
    fn pq(mu: f64, x: f64) -> (f64, f64) {
        let z = 8.0 * x;
        let mut p = 1.0;
        let mut q = 0.0;
        let mut term = 1.0;
        for k in 1..=12 {
            let kf = k as f64;
            let odd = 2.0 * kf - 1.0;
            term *= (mu - odd * odd) / (kf * z);
            if k % 2 == 1 {
                // contributes to Q with alternating sign
                let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
                q += sign * term;
            } else {
                let sign = if (k / 2) % 2 == 1 { -1.0 } else { 1.0 };
                p += sign * term;
            }
        }
        (p, q)
    }
    let amp = (2.0 / (PI * x)).sqrt();
    let (p0, q0) = pq(0.0, x);
    let (p1, q1) = pq(4.0, x);
    let chi0 = x - FRAC_PI_4;
    let chi1 = x - 3.0 * FRAC_PI_4;
    (
        amp * (p0 * chi0.cos() - q0 * chi0.sin()),
        amp * (p1 * chi1.cos() - q1 * chi1.sin()),
    )
}

/// `(J0(x), J1(x))` for `x >= 0`.
pub fn j0_j1(x: f64) -> (f64, f64) {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        series_j0_j1(x)
    } else if x <= RECURRENCE_LIMIT {
        recurrence_j0_j1(x)
    } else {
        hankel_j0_j1(x)
    }
}

/// Bessel function of the first kind of order zero.
pub fn j0(x: f64) -> f64 {
    j0_j1(x).0
}

/// Bessel function of the first kind of order one.
pub fn j1(x: f64) -> f64 {
    let (_, v) = j0_j1(x);
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// `J0'(x) = -J1(x)`.
pub fn j0_prime(x: f64) -> f64 {
    -j1(x)
}

/// The `j`-th positive zero of `J0` and the matching Dirichlet eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BesselZero {
    pub index: usize,
    pub r: f64,
    pub lambda: f64,
}

fn mcmahon_guess(j: usize) -> f64 {
    let beta = (j as f64 - 0.25) * PI;
    let z = 8.0 * beta;
    beta + 1.0 / z - 124.0 / (3.0 * z * z * z)
}

fn refine_zero(j: usize) -> Result<f64> {
    let lo = (j as f64 - 0.75) * PI;
    let hi = (j as f64 + 0.25) * PI;
    let mut x = mcmahon_guess(j);
    for _ in 0..NEWTON_MAX_ITER {
        let (f, g) = j0_j1(x);
        // J0' = -J1
        let step = f / g;
        x += step;
        if !(lo..=hi).contains(&x) {
            break;
        }
        if step.abs() <= 4.0 * f64::EPSILON * x {
            return Ok(x);
        }
    }
    bisect_zero(lo, hi)
}

fn bisect_zero(mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut flo = j0(lo);
    if flo * j0(hi) > 0.0 {
        return Err(Error::NonConvergence {
            what: "J0 zero bracketing",
            iterations: 0,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = j0(mid);
        if fm == 0.0 || hi - lo <= 2.0 * f64::EPSILON * mid {
            return Ok(mid);
        }
        if fm * flo < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    Err(Error::NonConvergence {
        what: "J0 zero bisection",
        iterations: 200,
    })
}

/// First `count` positive zeros of `J0` (Newton from McMahon's expansion,
/// bisection fallback).
pub fn j0_zeros(count: usize) -> Result<Vec<BesselZero>> {
    if count == 0 || count > MAX_ZEROS {
        return Err(Error::InvalidArgument(format!(
            "zero count must be in 1..={MAX_ZEROS}, got {count}"
        )));
    }
    let mut zeros = Vec::with_capacity(count);
    for j in 1..=count {
        let r = refine_zero(j)?;
        if j0(r).abs() > 1e-12 {
            return Err(Error::NonConvergence {
                what: "J0 zero refinement",
                iterations: NEWTON_MAX_ITER,
            });
        }
        zeros.push(BesselZero {
            index: j,
            r,
            lambda: r * r,
        });
    }
    Ok(zeros)
}

/// `lambda_j` for a single index.
pub fn dirichlet_eigenvalue(j: usize) -> Result<f64> {
    if j == 0 || j > MAX_ZEROS {
        return Err(Error::IndexOutOfRange {
            index: j,
            available: MAX_ZEROS,
        });
    }
    Ok(refine_zero(j)?.powi(2))
}

/// Sampled normalized eigenfunction `eta_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenfunction {
    pub index: usize,
    pub zero: BesselZero,
    pub values: GridFunction,
    /// `d eta_j / dy (1) = (-1)^j sqrt(2 lambda_j)`.
    pub boundary_slope: f64,
}

fn normalization(zero: &BesselZero) -> f64 {
    SQRT_2 / j1(zero.r).abs()
}

fn zero_for(j: usize, zeros: &[BesselZero]) -> Result<BesselZero> {
    zeros
        .get(j.wrapping_sub(1))
        .copied()
        .ok_or(Error::IndexOutOfRange {
            index: j,
            available: zeros.len(),
        })
}

/// `eta_j` sampled on `grid`, using precomputed zeros.
pub fn eta(j: usize, grid: RadialGrid, zeros: &[BesselZero]) -> Result<Eigenfunction> {
    let zero = zero_for(j, zeros)?;
    let c = normalization(&zero);
    let mut values = GridFunction::from_fn(grid, |y| c * j0(zero.r * y));
    values.pin_dirichlet();
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    Ok(Eigenfunction {
        index: j,
        zero,
        values,
        boundary_slope: sign * (2.0 * zero.lambda).sqrt(),
    })
}

/// `Lambda eta_j = y eta_j'(y)`, evaluated analytically.
pub fn scaled_eta(j: usize, grid: RadialGrid, zeros: &[BesselZero]) -> Result<GridFunction> {
    let zero = zero_for(j, zeros)?;
    let c = normalization(&zero);
    Ok(GridFunction::from_fn(grid, |y| {
        -c * zero.r * y * j1(zero.r * y)
    }))
}

/// `<Lambda eta_k, eta_j>_0` by composite Simpson on `grid`.
pub fn scaling_coupling(k: usize, j: usize, grid: RadialGrid, zeros: &[BesselZero]) -> Result<f64> {
    let lk = scaled_eta(k, grid, zeros)?;
    let ej = eta(j, grid, zeros)?;
    let w = grid.simpson_weights();
    Ok(grid
        .nodes()
        .zip(&w)
        .zip(lk.values().iter().zip(ej.values.values()))
        .map(|((y, w), (a, b))| w * a * b * y)
        .sum())
}

/// Write `(j, r_j, lambda_j, d eta_j/dy(1))` rows.
pub fn write_zero_table(path: &Path, zeros: &[BesselZero]) -> Result<()> {
    let mut out = String::from("j,r_j,lambda_j,boundary_slope\n");
    for z in zeros {
        let sign = if z.index % 2 == 0 { 1.0 } else { -1.0 };
        out.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e}\n",
            z.index,
            z.r,
            z.lambda,
            sign * (2.0 * z.lambda).sqrt()
        ));
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}
