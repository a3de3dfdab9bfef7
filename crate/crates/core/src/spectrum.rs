//! The drifted Laplacian `H_b = -Delta + b Lambda` with Dirichlet data at
//! `y = 1`, discretized in divergence form
//!
//! ```text
//! H_b v = -(1 / (y rho_b)) (y rho_b v')'
//! ```
//!
//! with half-node fluxes. Writing `K` for the flux stiffness and `W` for the
//! lumped nodal mass `y_i h rho_b(y_i)` (with `h^2/8` at the origin), the
//! discrete operator is `W^{-1} K`. It is self-adjoint for the lumped inner
//! product and becomes a symmetric tridiagonal matrix after the similarity
//! `W^{1/2}`.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bessel::{eta, j0_zeros, scaling_coupling, BesselZero};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, RadialGrid};
use crate::tridiag::SymTridiagonal;
use crate::weighted_space::{
    boundary_slope, derivative, dot3, inner_b, l2b_norm, measure, WeightParam,
};

pub const MAX_EIGENPAIRS: usize = 12;
pub const MIN_INTERVALS: usize = 64;

/// Assembled `H_b` on the unknowns `y_0 .. y_{N-1}`.
#[derive(Debug, Clone)]
pub struct HbOperator {
    grid: RadialGrid,
    weight: WeightParam,
    k_diag: Vec<f64>,
    // K_{i,i+1}, one entry per half node i + 1/2 for i = 0..N-1 (the last one
    // couples to the eliminated Dirichlet node).
    k_off: Vec<f64>,
    mass: Vec<f64>,
}

pub fn assemble_hb(grid: RadialGrid, w: WeightParam) -> HbOperator {
    let n = grid.intervals();
    let h = grid.h();
    let flux: Vec<f64> = (0..n)
        .map(|i| {
            let y = (i as f64 + 0.5) * h;
            y * w.rho(y) / h
        })
        .collect();
    let mut k_diag = vec![0.0; n];
    for i in 0..n {
        k_diag[i] = flux[i] + if i > 0 { flux[i - 1] } else { 0.0 };
    }
    let k_off = flux.iter().map(|p| -p).collect();
    let mut mass: Vec<f64> = (0..n)
        .map(|i| grid.node(i) * h * w.rho(grid.node(i)))
        .collect();
    mass[0] = h * h / 8.0;
    HbOperator {
        grid,
        weight: w,
        k_diag,
        k_off,
        mass,
    }
}

impl HbOperator {
    pub fn grid(&self) -> RadialGrid {
        self.grid
    }

    pub fn weight(&self) -> WeightParam {
        self.weight
    }

    /// Lumped nodal mass `W_i` on the unknowns.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.mass
    }

    /// `W^{-1/2} K W^{-1/2}`.
    pub fn symmetrized(&self) -> SymTridiagonal {
        let n = self.k_diag.len();
        let d = (0..n).map(|i| self.k_diag[i] / self.mass[i]).collect();
        let e = (0..n - 1)
            .map(|i| self.k_off[i] / (self.mass[i] * self.mass[i + 1]).sqrt())
            .collect();
        SymTridiagonal::new(d, e).expect("consistent shape")
    }

    /// The flux stiffness `K` itself (symmetric).
    pub fn stiffness(&self) -> SymTridiagonal {
        let n = self.k_diag.len();
        SymTridiagonal::new(self.k_diag.clone(), self.k_off[..n - 1].to_vec())
            .expect("consistent shape")
    }

    /// `H_b v` at every node. The value at `y = 1` is extrapolated cubically
    /// from the interior.
    pub fn apply(&self, v: &GridFunction) -> Result<GridFunction> {
        if v.grid() != self.grid {
            return Err(Error::GridMismatch {
                left: self.grid.intervals(),
                right: v.grid().intervals(),
            });
        }
        let n = self.grid.intervals();
        let x = v.values();
        let mut out = vec![0.0; n + 1];
        for i in 0..n {
            let mut acc = self.k_diag[i] * x[i] + self.k_off[i] * x[i + 1];
            if i > 0 {
                acc += self.k_off[i - 1] * x[i - 1];
            }
            out[i] = acc / self.mass[i];
        }
        out[n] = 4.0 * out[n - 1] - 6.0 * out[n - 2] + 4.0 * out[n - 3] - out[n - 4];
        GridFunction::from_values(self.grid, out)
    }

    /// Lumped inner product `sum_i W_i f_i g_i` over the unknowns.
    pub fn inner_lumped(&self, f: &GridFunction, g: &GridFunction) -> f64 {
        dot3(&self.mass, f.values(), g.values())
    }

    /// Discrete Dirichlet form `<K f, f> / <W f, f>` (Rayleigh quotient).
    pub fn rayleigh_quotient(&self, f: &GridFunction) -> Result<f64> {
        let hf = self.apply(f)?;
        Ok(self.inner_lumped(&hf, f) / self.inner_lumped(f, f))
    }

    fn to_symmetric_coords(&self, f: &GridFunction) -> Vec<f64> {
        self.mass
            .iter()
            .zip(f.values())
            .map(|(m, v)| m.sqrt() * v)
            .collect()
    }

    fn from_symmetric_coords(&self, x: &[f64]) -> GridFunction {
        let mut v: Vec<f64> = x
            .iter()
            .zip(&self.mass)
            .map(|(x, m)| x / m.sqrt())
            .collect();
        v.push(0.0);
        GridFunction::from_values(self.grid, v).expect("length N+1")
    }
}

/// Eigenpair `(lambda_{b,k}, psi_{b,k})` with `||psi||_{L^2_b} = 1` and
/// `<psi, eta_k>_b > 0`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub index: usize,
    pub b: f64,
    pub lambda: f64,
    pub psi: GridFunction,
    pub boundary_slope: f64,
    /// `||H_b psi - lambda psi||` in the lumped norm, relative to `||psi||`.
    pub residual: f64,
}

fn finish_pair(
    op: &HbOperator,
    index: usize,
    lambda: f64,
    x: &[f64],
    eta_k: &GridFunction,
) -> Result<EigenPair> {
    let w = op.weight;
    let mut psi = op.from_symmetric_coords(x);
    let norm = l2b_norm(&psi, w);
    psi = psi.scaled(1.0 / norm);
    if inner_b(&psi, eta_k, w)? < 0.0 {
        psi = psi.scaled(-1.0);
    }
    let hpsi = op.apply(&psi)?;
    let n = op.grid.intervals();
    let mut r = 0.0;
    for i in 0..n {
        r += op.mass[i] * (hpsi.values()[i] - lambda * psi.values()[i]).powi(2);
    }
    let residual = (r / op.inner_lumped(&psi, &psi)).sqrt();
    Ok(EigenPair {
        index,
        b: w.b(),
        lambda,
        boundary_slope: boundary_slope(&psi),
        psi,
        residual,
    })
}

fn check_grid(grid: RadialGrid) -> Result<()> {
    if grid.intervals() < MIN_INTERVALS {
        return Err(Error::InvalidGrid(format!(
            "eigenpairs need at least {MIN_INTERVALS} intervals"
        )));
    }
    Ok(())
}

/// Smallest `count` eigenpairs of `H_b` (QL eigenvalues, inverse iteration).
pub fn eigenpairs(grid: RadialGrid, w: WeightParam, count: usize) -> Result<Vec<EigenPair>> {
    if count == 0 || count > MAX_EIGENPAIRS {
        return Err(Error::InvalidArgument(format!(
            "eigenpair count must be in 1..={MAX_EIGENPAIRS}"
        )));
    }
    check_grid(grid)?;
    let op = assemble_hb(grid, w);
    let t = op.symmetrized();
    let values = t.eigenvalues()?;
    let zeros = j0_zeros(count)?;
    let mut out = Vec::with_capacity(count);
    for k in 1..=count {
        let lambda = values[k - 1];
        let x = t.inverse_iteration(lambda, None)?;
        let e = eta(k, grid, &zeros)?.values;
        out.push(finish_pair(&op, k, lambda, &x, &e)?);
    }
    Ok(out)
}

/// Track eigenpairs to a new weight from nearby ones (Rayleigh quotient
/// iteration warm-started at the previous vectors).
pub fn refine_eigenpairs(previous: &[EigenPair], w: WeightParam) -> Result<Vec<EigenPair>> {
    let Some(first) = previous.first() else {
        return Ok(Vec::new());
    };
    let grid = first.psi.grid();
    let op = assemble_hb(grid, w);
    let t = op.symmetrized();
    let zeros = j0_zeros(previous.len())?;
    let mut out = Vec::with_capacity(previous.len());
    for (pos, pair) in previous.iter().enumerate() {
        let start = op.to_symmetric_coords(&pair.psi);
        let (lambda, x) = t.rayleigh_refine(&start, 20)?;
        // Guard against RQI jumping to a neighbouring mode.
        let lo = if pos > 0 {
            0.5 * (previous[pos - 1].lambda + pair.lambda)
        } else {
            f64::NEG_INFINITY
        };
        let hi = previous
            .get(pos + 1)
            .map_or(f64::INFINITY, |p| 0.5 * (p.lambda + pair.lambda));
        if !(lo..hi).contains(&lambda) {
            return Err(Error::NonConvergence {
                what: "eigenpair tracking",
                iterations: 20,
            });
        }
        let e = eta(pair.index, grid, &zeros)?.values;
        out.push(finish_pair(&op, pair.index, lambda, &x, &e)?);
    }
    Ok(out)
}

/// Outcome of a sweep over `b` for one mode `k`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PerturbationReport {
    pub k: usize,
    pub intervals: usize,
    pub b_values: Vec<f64>,
    /// Exact `lambda_k = r_k^2`.
    pub lambda_k: f64,
    /// `lambda_{b,k}` on the grid and on the refined grid.
    pub lambda_b: Vec<f64>,
    pub lambda_b_fine: Vec<f64>,
    /// `lambda_{-b,k}` on the grid.
    pub lambda_minus_b: Vec<f64>,
    /// Discrete `lambda_{0,k}` on the grid and on the refined grid.
    pub lambda_0: f64,
    pub lambda_0_fine: f64,
    /// Least-squares slope of `lambda_{b,k}` against `b`.
    pub slope: f64,
    /// `|lambda_{b,k} - (lambda_{0,k} - b)|` on the grid.
    pub defect: Vec<f64>,
    /// Same with Richardson-extrapolated eigenvalues against the exact `lambda_k`.
    pub defect_richardson: Vec<f64>,
    pub defect_order: f64,
    pub defect_order_richardson: f64,
    /// `|lambda_{b,k} + lambda_{-b,k} - 2 lambda_{0,k}|`.
    pub antisymmetry: Vec<f64>,
    /// `d psi_{b,k} / dy (1)` and `(-1)^k sqrt(2 lambda_k)`.
    pub boundary_slopes: Vec<f64>,
    pub boundary_slope_limit: f64,
    /// `<psi_{b,k}, eta_k>_b`.
    pub eta_overlap: Vec<f64>,
    /// Per `j < k`: coefficients of `eta_j` relative to `eta_k` in the
    /// `<.,.>_b`-projection of `psi_{b,k}` onto `span(eta_1..eta_k)`.
    pub mu_hat: Vec<Vec<f64>>,
    /// Per `j < k`: plain projections `<psi_{b,k}, eta_j>_b / <eta_j, eta_j>_b`.
    pub mu_projection: Vec<Vec<f64>>,
    /// Per `j < k`: `b <Lambda eta_k, eta_j>_0 / (lambda_k - lambda_j)` per b.
    pub mu_predicted: Vec<Vec<f64>>,
    /// Per `j < k`: centered difference `(mu_hat(b) - mu_hat(-b)) / 2b` per b.
    pub dmu_db: Vec<Vec<f64>>,
    /// Per `j < k`: `<Lambda eta_k, eta_j>_0 / (lambda_k - lambda_j)`.
    pub dmu_db_predicted: Vec<f64>,
    pub max_residual: f64,
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn log_log_order(b: &[f64], defect: &[f64]) -> f64 {
    let lx: Vec<f64> = b.iter().map(|v| v.abs().ln()).collect();
    let ly: Vec<f64> = defect.iter().map(|v| v.max(1e-300).ln()).collect();
    ls_slope(&lx, &ly)
}

/// Solve a small dense system by Gaussian elimination with partial pivoting.
/// Returns the solution and a 1-norm condition estimate.
pub(crate) fn dense_solve(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Result<(Vec<f64>, f64)> {
    let n = rhs.len();
    let norm_a = (0..n)
        .map(|j| (0..n).map(|i| a[i][j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let inv = invert(&a)?;
    let norm_inv = (0..n)
        .map(|j| (0..n).map(|i| inv[i][j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty");
        a.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (rhs[i] - s) / a[i][i];
    }
    Ok((x, norm_a * norm_inv))
}

fn invert(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .expect("nonempty");
        if m[piv][col] == 0.0 {
            return Err(Error::SingularGram {
                condition: f64::INFINITY,
            });
        }
        m.swap(col, piv);
        let p = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= p);
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[row][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Ok(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn mu_estimates(
    psi: &GridFunction,
    etas: &[GridFunction],
    w: WeightParam,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = etas.len();
    let m = measure(psi.grid(), w);
    let gram: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| dot3(&m, etas[i].values(), etas[j].values()))
                .collect()
        })
        .collect();
    let rhs: Vec<f64> = etas
        .iter()
        .map(|e| dot3(&m, psi.values(), e.values()))
        .collect();
    let projection = (0..k - 1).map(|j| rhs[j] / gram[j][j]).collect();
    let (c, _) = dense_solve(gram, rhs)?;
    let hat = (0..k - 1).map(|j| c[j] / c[k - 1]).collect();
    Ok((hat, projection))
}

/// Sweep `b` for mode `k` on `grid` and its refinement.
pub fn perturbation_sweep(
    grid: RadialGrid,
    k: usize,
    b_values: &[f64],
) -> Result<PerturbationReport> {
    if b_values.len() < 3 {
        return Err(Error::InvalidArgument(
            "perturbation sweep needs at least 3 values of b".into(),
        ));
    }
    for &b in b_values {
        if b == 0.0 || b.abs() >= 0.05 {
            return Err(Error::InvalidArgument(format!(
                "sweep values must lie in (-0.05, 0.05) \\ {{0}}, got {b}"
            )));
        }
    }
    let fine = grid.refined();
    let zeros: Vec<BesselZero> = j0_zeros(k)?;
    let lambda_k = zeros[k - 1].lambda;
    let pick = |g: RadialGrid, b: f64| -> Result<EigenPair> {
        let w = if b == 0.0 {
            WeightParam::flat()
        } else {
            WeightParam::new(b)?
        };
        Ok(eigenpairs(g, w, k)?.swap_remove(k - 1))
    };
    let lambda_0 = pick(grid, 0.0)?.lambda;
    let lambda_0_fine = pick(fine, 0.0)?.lambda;
    let etas: Vec<GridFunction> = (1..=k)
        .map(|j| eta(j, grid, &zeros).map(|e| e.values))
        .collect::<Result<_>>()?;

    let mut report = PerturbationReport {
        k,
        intervals: grid.intervals(),
        b_values: b_values.to_vec(),
        lambda_k,
        lambda_b: Vec::new(),
        lambda_b_fine: Vec::new(),
        lambda_minus_b: Vec::new(),
        lambda_0,
        lambda_0_fine,
        slope: 0.0,
        defect: Vec::new(),
        defect_richardson: Vec::new(),
        defect_order: 0.0,
        defect_order_richardson: 0.0,
        antisymmetry: Vec::new(),
        boundary_slopes: Vec::new(),
        boundary_slope_limit: if k % 2 == 0 { 1.0 } else { -1.0 } * (2.0 * lambda_k).sqrt(),
        eta_overlap: Vec::new(),
        mu_hat: vec![Vec::new(); k - 1],
        mu_projection: vec![Vec::new(); k - 1],
        mu_predicted: vec![Vec::new(); k - 1],
        dmu_db: vec![Vec::new(); k - 1],
        dmu_db_predicted: Vec::new(),
        max_residual: 0.0,
    };
    for j in 1..k {
        let c = scaling_coupling(k, j, grid, &zeros)?;
        report
            .dmu_db_predicted
            .push(c / (lambda_k - zeros[j - 1].lambda));
    }
    for &b in b_values {
        let w = WeightParam::new(b)?;
        let p = pick(grid, b)?;
        let pf = pick(fine, b)?;
        let pm = pick(grid, -b)?;
        report.max_residual = report
            .max_residual
            .max(p.residual)
            .max(pf.residual)
            .max(pm.residual);
        report.defect.push((p.lambda - (lambda_0 - b)).abs());
        let rich = (4.0 * pf.lambda - p.lambda) / 3.0;
        report.defect_richardson.push((rich - (lambda_k - b)).abs());
        report
            .antisymmetry
            .push((p.lambda + pm.lambda - 2.0 * lambda_0).abs());
        report.boundary_slopes.push(p.boundary_slope);
        report.eta_overlap.push(inner_b(&p.psi, &etas[k - 1], w)?);
        if k > 1 {
            let (hat, proj) = mu_estimates(&p.psi, &etas, w)?;
            let (hat_m, _) = mu_estimates(&pm.psi, &etas, WeightParam::new(-b)?)?;
            for j in 0..k - 1 {
                report.mu_hat[j].push(hat[j]);
                report.mu_projection[j].push(proj[j]);
                report.mu_predicted[j].push(b * report.dmu_db_predicted[j]);
                report.dmu_db[j].push((hat[j] - hat_m[j]) / (2.0 * b));
            }
        }
        report.lambda_b.push(p.lambda);
        report.lambda_b_fine.push(pf.lambda);
        report.lambda_minus_b.push(pm.lambda);
    }
    report.slope = ls_slope(b_values, &report.lambda_b);
    report.defect_order = log_log_order(b_values, &report.defect);
    report.defect_order_richardson = log_log_order(b_values, &report.defect_richardson);
    Ok(report)
}

/// Random smooth Dirichlet profile: a combination of `eta_1 .. eta_modes`
/// with decaying random coefficients.
pub fn random_profile(
    grid: RadialGrid,
    zeros: &[BesselZero],
    rng: &mut ChaCha8Rng,
) -> Result<GridFunction> {
    let mut u = GridFunction::zeros(grid);
    for m in 1..=zeros.len() {
        let c: f64 = rng.gen_range(-1.0..1.0) / m as f64;
        u.add_scaled(c, &eta(m, grid, zeros)?.values)?;
    }
    Ok(u)
}

/// `||u'||^2_{L^2_b} / ||u||^2_{L^2_b}`.
pub fn dirichlet_ratio(u: &GridFunction, w: WeightParam) -> f64 {
    let m = measure(u.grid(), w);
    let d = derivative(u);
    dot3(&m, d.values(), d.values()) / dot3(&m, u.values(), u.values())
}

const GAP_SAMPLES: usize = 32;
const GAP_MODES: usize = 16;

/// Minimum of `||u'||^2 / ||u||^2` over random `u` made `<.,.>_b`-orthogonal
/// to `psi_{b,1} .. psi_{b,k}`.
pub fn spectral_gap_check(grid: RadialGrid, w: WeightParam, k: usize, seed: u64) -> Result<f64> {
    if k == 0 || k > 8 {
        return Err(Error::InvalidArgument(format!(
            "spectral gap check needs 1 <= k <= 8, got {k}"
        )));
    }
    let pairs = eigenpairs(grid, w, k)?;
    let zeros = j0_zeros(GAP_MODES)?;
    let m = measure(grid, w);
    let gram: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| dot3(&m, pairs[i].psi.values(), pairs[j].psi.values()))
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..GAP_SAMPLES {
        let mut u = random_profile(grid, &zeros, &mut rng)?;
        let rhs: Vec<f64> = pairs
            .iter()
            .map(|p| dot3(&m, u.values(), p.psi.values()))
            .collect();
        let (c, _) = dense_solve(gram.clone(), rhs)?;
        for (p, c) in pairs.iter().zip(c) {
            u.add_scaled(-c, &p.psi)?;
        }
        best = best.min(dirichlet_ratio(&u, w));
    }
    Ok(best)
}

/// Minimum Dirichlet ratio over `samples` random profiles (no orthogonality).
pub fn rayleigh_minimum(
    grid: RadialGrid,
    w: WeightParam,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let zeros = j0_zeros(GAP_MODES)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let u = random_profile(grid, &zeros, &mut rng)?;
        best = best.min(dirichlet_ratio(&u, w));
    }
    Ok(best)
}

/// CSV rows `(b, k, lambda_bk, boundary_slope, residual)`.
pub fn write_eigen_table(path: &Path, pairs: &[EigenPair]) -> Result<()> {
    let mut out = String::from("b,k,lambda_bk,boundary_slope,residual\n");
    for p in pairs {
        out.push_str(&format!(
            "{},{},{:.15e},{:.15e},{:.3e}\n",
            p.b, p.index, p.lambda, p.boundary_slope, p.residual
        ));
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}
