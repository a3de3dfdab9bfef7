//! Symmetric tridiagonal kernels: implicit-shift QL eigenvalues, pivoted
//! solves for inverse iteration, and a cached LU for symmetric positive
//! definite systems.

use crate::error::{Error, Result};

const QL_MAX_SWEEPS: usize = 60;

/// Symmetric tridiagonal matrix with diagonal `d` and off-diagonal `e`
/// (`e[i]` couples rows `i` and `i + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Result<Self> {
        if d.is_empty() || e.len() + 1 != d.len() {
            return Err(Error::InvalidArgument(format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal",
                d.len(),
                e.len()
            )));
        }
        Ok(Self { d, e })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.d[i] * x[i];
            if i > 0 {
                acc += self.e[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.e[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }

    /// All eigenvalues in ascending order (implicit-shift QL, no vectors).
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let mut d = self.d.clone();
        let mut e = self.e.clone();
        e.push(0.0);
        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > QL_MAX_SWEEPS {
                    return Err(Error::NonConvergence {
                        what: "tridiagonal QL",
                        iterations: QL_MAX_SWEEPS,
                    });
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut i = m;
                let mut deflated = false;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        d.sort_by(f64::total_cmp);
        Ok(d)
    }

    /// Solve `(T - shift I) x = rhs` by Gaussian elimination with partial
    /// pivoting. Exact singularity is nudged so inverse iteration can proceed.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let tiny = f64::EPSILON * self.d.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        // Row i holds (diag, upper, upper2) after elimination.
        let mut dl: Vec<f64> = self.e.clone();
        let mut dg: Vec<f64> = self.d.iter().map(|v| v - shift).collect();
        let mut du: Vec<f64> = self.e.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut x = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if dg[i].abs() >= dl[i].abs() {
                let piv = if dg[i] == 0.0 { tiny } else { dg[i] };
                dg[i] = piv;
                let f = dl[i] / piv;
                dl[i] = f;
                dg[i + 1] -= f * du[i];
                x[i + 1] -= f * x[i];
                if i + 2 < n {
                    du2[i] = 0.0;
                }
            } else {
                let f = dg[i] / dl[i];
                dg[i] = dl[i];
                dl[i] = f;
                let tmp = du[i];
                du[i] = dg[i + 1];
                dg[i + 1] = tmp - f * dg[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du[i + 1];
                }
                x.swap(i, i + 1);
                x[i + 1] -= f * x[i];
            }
        }
        if dg[n - 1] == 0.0 {
            dg[n - 1] = tiny;
        }
        x[n - 1] /= dg[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / dg[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / dg[i];
        }
        x
    }

    /// Eigenvector for an (approximate) eigenvalue by inverse iteration,
    /// normalized in the Euclidean norm.
    pub fn inverse_iteration(&self, lambda: f64, start: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = self.len();
        let mut x: Vec<f64> = match start {
            Some(s) => s.to_vec(),
            None => (0..n)
                .map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_034).sin())
                .collect(),
        };
        normalize(&mut x);
        let scale = self.d.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let shift = lambda + 4.0 * f64::EPSILON * scale;
        for _ in 0..8 {
            let mut y = self.solve_shifted(shift, &x);
            normalize(&mut y);
            if y.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
                y.iter_mut().for_each(|v| *v = -*v);
            }
            let change = y
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            x = y;
            if change < 1e-14 {
                return Ok(x);
            }
        }
        let ax = self.apply(&x);
        let rq: f64 = ax.iter().zip(&x).map(|(a, b)| a * b).sum();
        let res = ax
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - rq * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if res <= 1e-9 * scale {
            Ok(x)
        } else {
            Err(Error::NonConvergence {
                what: "inverse iteration",
                iterations: 8,
            })
        }
    }

    /// Rayleigh-quotient iteration from a nearby eigenvector; cubic once close.
    pub fn rayleigh_refine(&self, start: &[f64], max_iter: usize) -> Result<(f64, Vec<f64>)> {
        let mut x = start.to_vec();
        normalize(&mut x);
        let scale = self.d.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for _ in 0..max_iter {
            let ax = self.apply(&x);
            let rq: f64 = ax.iter().zip(&x).map(|(a, b)| a * b).sum();
            let res = ax
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - rq * b).powi(2))
                .sum::<f64>()
                .sqrt();
            if res <= 1e-13 * scale {
                return Ok((rq, x));
            }
            let mut y = self.solve_shifted(rq, &x);
            normalize(&mut y);
            if y.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
                y.iter_mut().for_each(|v| *v = -*v);
            }
            x = y;
        }
        let ax = self.apply(&x);
        let rq: f64 = ax.iter().zip(&x).map(|(a, b)| a * b).sum();
        let res = ax
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - rq * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if res <= 1e-10 * scale {
            Ok((rq, x))
        } else {
            Err(Error::NonConvergence {
                what: "Rayleigh quotient iteration",
                iterations: max_iter,
            })
        }
    }
}

fn normalize(x: &mut [f64]) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

/// LU factors of a symmetric positive definite tridiagonal matrix, reused
/// across many right-hand sides (no pivoting needed).
#[derive(Debug, Clone)]
pub struct SpdTridiagonalLu {
    // diagonal of U and multipliers of L
    u: Vec<f64>,
    l: Vec<f64>,
    e: Vec<f64>,
}

impl SpdTridiagonalLu {
    pub fn factor(m: &SymTridiagonal) -> Result<Self> {
        let n = m.len();
        let mut u = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        u[0] = m.d[0];
        for i in 1..n {
            if u[i - 1] <= 0.0 {
                return Err(Error::InvalidArgument(
                    "matrix is not positive definite".into(),
                ));
            }
            l[i - 1] = m.e[i - 1] / u[i - 1];
            u[i] = m.d[i] - l[i - 1] * m.e[i - 1];
        }
        if u[n - 1] <= 0.0 {
            return Err(Error::InvalidArgument(
                "matrix is not positive definite".into(),
            ));
        }
        Ok(Self {
            u,
            l,
            e: m.e.clone(),
        })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.u.len();
        for i in 1..n {
            x[i] -= self.l[i - 1] * x[i - 1];
        }
        x[n - 1] /= self.u[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (x[i] - self.e[i] * x[i + 1]) / self.u[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1]).unwrap()
    }

    #[test]
    fn ql_matches_discrete_laplacian_spectrum() {
        let n = 50;
        let ev = laplacian(n).eigenvalues().unwrap();
        for (j, v) in ev.iter().enumerate() {
            let theta = (j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64;
            let exact = 2.0 - 2.0 * theta.cos();
            assert!((v - exact).abs() < 1e-12, "{j}: {v} vs {exact}");
        }
    }

    #[test]
    fn inverse_iteration_gives_sine_modes() {
        let n = 40;
        let t = laplacian(n);
        let ev = t.eigenvalues().unwrap();
        let v = t.inverse_iteration(ev[2], None).unwrap();
        let theta = 3.0 * std::f64::consts::PI / (n + 1) as f64;
        let mut exact: Vec<f64> = (1..=n).map(|i| (i as f64 * theta).sin()).collect();
        normalize(&mut exact);
        let sign = v
            .iter()
            .zip(&exact)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .signum();
        for (a, b) in v.iter().zip(&exact) {
            assert!((sign * a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn pivoted_solve_handles_small_pivots() {
        let t = SymTridiagonal::new(vec![1e-20, 1.0, 3.0], vec![1.0, 2.0]).unwrap();
        let x = [1.0, -2.0, 0.5];
        let b = t.apply(&x);
        let got = t.solve_shifted(0.0, &b);
        for (a, b) in got.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12, "{got:?}");
        }
    }

    #[test]
    fn spd_lu_round_trip() {
        let t = SymTridiagonal::new(vec![4.0, 5.0, 6.0, 7.0], vec![1.0, -1.0, 2.0]).unwrap();
        let lu = SpdTridiagonalLu::factor(&t).unwrap();
        let x = [0.3, -1.0, 2.0, 4.0];
        let mut b = t.apply(&x);
        lu.solve_in_place(&mut b);
        for (a, b) in b.iter().zip(&x) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(
            SpdTridiagonalLu::factor(&SymTridiagonal::new(vec![1.0, 1.0], vec![2.0]).unwrap())
                .is_err()
        );
    }
}
