//! Modal decomposition `v = sum_j b_j psi_{b,j} + eps` with
//! `<eps, psi_{b,j}>_b = 0`, and the diagnostics monitored along a run.
//!
//! For `k = 1` the weight is the first coefficient itself, found by a
//! fixed-point iteration. For `k > 1` the weight follows the adiabatic
//! schedule `b(s) = A_k e^{-lambda_k s} / (s + 1)` and eigenpairs come from a
//! precomputed [`EigenTable`].

use std::path::Path;
use std::sync::Arc;

use crate::bessel::{j0_zeros, scaling_coupling};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, RadialGrid};
use crate::solver::SimState;
use crate::spectrum::{assemble_hb, dense_solve, eigenpairs, refine_eigenpairs, EigenPair};
use crate::weighted_space::{dot3, lambda_op, measure, WeightParam};

pub const DEFAULT_AMPLITUDE: f64 = 0.02;
pub const GRAM_CONDITION_LIMIT: f64 = 1e8;
const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_MAX_ITER: usize = 50;

/// `b(s) = A_k e^{-lambda_k s} / (s + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AdiabaticSchedule {
    pub amplitude: f64,
    pub lambda_k: f64,
}

impl AdiabaticSchedule {
    pub fn b(&self, s: f64) -> f64 {
        self.amplitude * (-self.lambda_k * s).exp() / (s + 1.0)
    }

    pub fn b_s(&self, s: f64) -> f64 {
        -self.b(s) * (self.lambda_k + 1.0 / (s + 1.0))
    }
}

/// `eta_k = (lambda_k - lambda_{k-1}) / 4`, the margin in `V_j`.
pub fn trapping_margin(lambdas: &[f64], k: usize) -> f64 {
    if k < 2 {
        0.0
    } else {
        0.25 * (lambdas[k - 1] - lambdas[k - 2])
    }
}

/// The `k` profiles used for one decomposition.
#[derive(Debug, Clone)]
pub struct Basis {
    pub b: f64,
    pub lambdas: Vec<f64>,
    pub psis: Vec<GridFunction>,
}

impl Basis {
    pub fn from_pairs(b: f64, pairs: &[EigenPair]) -> Self {
        Self {
            b,
            lambdas: pairs.iter().map(|p| p.lambda).collect(),
            psis: pairs.iter().map(|p| p.psi.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.psis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psis.is_empty()
    }

    pub fn weight(&self) -> WeightParam {
        WeightParam::unchecked(self.b)
    }
}

/// Eigenpairs of `H_b` on a geometric ladder of weights
/// `b_0 r^{-n}` down to `b_min`, closed by `b = 0`; intermediate weights are
/// linearly interpolated.
#[derive(Debug, Clone)]
pub struct EigenTable {
    levels: Vec<(f64, Vec<EigenPair>)>,
}

impl EigenTable {
    pub fn build(
        grid: crate::grid::RadialGrid,
        k: usize,
        b_start: f64,
        ratio: f64,
        b_min: f64,
    ) -> Result<Self> {
        if ratio <= 1.0 || b_min <= 0.0 {
            return Err(Error::InvalidArgument(
                "eigen table needs ratio > 1 and b_min > 0".into(),
            ));
        }
        let mut levels = Vec::new();
        let mut pairs = eigenpairs(grid, WeightParam::new(b_start)?, k)?;
        let mut b = b_start;
        levels.push((b, pairs.clone()));
        while b.abs() / ratio > b_min {
            b /= ratio;
            pairs = refine_eigenpairs(&pairs, WeightParam::new(b)?)?;
            levels.push((b, pairs.clone()));
        }
        levels.push((0.0, refine_eigenpairs(&pairs, WeightParam::flat())?));
        Ok(Self { levels })
    }

    pub fn levels(&self) -> usize {
        self.levels.len()
    }

    /// Interpolated basis at weight `b` (must lie between 0 and the first level).
    pub fn basis(&self, b: f64) -> Result<Basis> {
        let top = self.levels[0].0;
        let inside = if top >= 0.0 {
            (0.0..=top).contains(&b)
        } else {
            (top..=0.0).contains(&b)
        };
        if !inside {
            return Err(Error::InvalidArgument(format!(
                "b = {b} outside the eigen table range [0, {top}]"
            )));
        }
        let pos = self
            .levels
            .iter()
            .position(|(lb, _)| lb.abs() <= b.abs())
            .unwrap_or(self.levels.len() - 1);
        if pos == 0 {
            return Ok(Basis::from_pairs(b, &self.levels[0].1));
        }
        let (b_hi, hi) = &self.levels[pos - 1];
        let (b_lo, lo) = &self.levels[pos];
        let theta = (b - b_lo) / (b_hi - b_lo);
        let lambdas = hi
            .iter()
            .zip(lo)
            .map(|(h, l)| l.lambda + theta * (h.lambda - l.lambda))
            .collect();
        let psis = hi
            .iter()
            .zip(lo)
            .map(|(h, l)| {
                let mut p = l.psi.scaled(1.0 - theta);
                p.add_scaled(theta, &h.psi).expect("same grid");
                p
            })
            .collect();
        Ok(Basis { b, lambdas, psis })
    }
}

/// Output of the Gram solve.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub coeffs: Vec<f64>,
    pub eps: GridFunction,
    pub condition: f64,
    /// `max_j |<eps, psi_j>_b|`.
    pub orthogonality: f64,
}

/// Solve `G c = (<v, psi_j>_b)` with `G_ij = <psi_i, psi_j>_b` and set
/// `eps = v - sum c_j psi_j`.
pub fn decompose(v: &GridFunction, basis: &Basis) -> Result<Decomposition> {
    let k = basis.len();
    let m = measure(v.grid(), basis.weight());
    let gram: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| dot3(&m, basis.psis[i].values(), basis.psis[j].values()))
                .collect()
        })
        .collect();
    let rhs: Vec<f64> = basis
        .psis
        .iter()
        .map(|p| dot3(&m, v.values(), p.values()))
        .collect();
    let (coeffs, condition) = dense_solve(gram, rhs)?;
    if condition > GRAM_CONDITION_LIMIT || !condition.is_finite() {
        return Err(Error::SingularGram { condition });
    }
    let mut eps = v.clone();
    for (c, p) in coeffs.iter().zip(&basis.psis) {
        eps.add_scaled(-c, p)?;
    }
    let orthogonality = basis
        .psis
        .iter()
        .map(|p| dot3(&m, eps.values(), p.values()).abs())
        .fold(0.0, f64::max);
    Ok(Decomposition {
        coeffs,
        eps,
        condition,
        orthogonality,
    })
}

/// Result of the `k = 1` fixed point, including the `|Delta b_1|` history.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub b1: f64,
    pub pair: EigenPair,
    pub increments: Vec<f64>,
}

/// Iterate `b_1 <- <v, psi_{b_1,1}>_{b_1} / <psi, psi>_{b_1}` from a previous
/// eigenpair.
pub fn self_consistent_from(v: &GridFunction, start: &EigenPair) -> Result<FixedPoint> {
    let mut pair = start.clone();
    let mut b = pair.b;
    let mut increments = Vec::new();
    for _ in 0..FIXED_POINT_MAX_ITER {
        let w = WeightParam::unchecked(b);
        let m = measure(v.grid(), w);
        let next = dot3(&m, v.values(), pair.psi.values())
            / dot3(&m, pair.psi.values(), pair.psi.values());
        let step = (next - b).abs();
        increments.push(step);
        b = next;
        pair = refine_eigenpairs(std::slice::from_ref(&pair), WeightParam::new(b)?)?.remove(0);
        if step < FIXED_POINT_TOL {
            return Ok(FixedPoint {
                b1: b,
                pair,
                increments,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "self-consistent b_1",
        iterations: FIXED_POINT_MAX_ITER,
    })
}

/// Self-consistent `b_1` of a small profile, starting from `b = 0`.
pub fn self_consistent_b1(v: &GridFunction) -> Result<f64> {
    let start = eigenpairs(v.grid(), WeightParam::flat(), 1)?.remove(0);
    Ok(self_consistent_from(v, &start)?.b1)
}

/// `||H_b eps||^2_{L^2_b}`.
pub fn energy(eps: &GridFunction, w: WeightParam) -> Result<f64> {
    let he = assemble_hb(eps.grid(), w).apply(eps)?;
    let m = measure(eps.grid(), w);
    Ok(dot3(&m, he.values(), he.values()))
}

/// Everything extracted from one state.
#[derive(Debug, Clone)]
pub struct ModulationState {
    pub k: usize,
    pub s: f64,
    pub b: f64,
    pub coeffs: Vec<f64>,
    pub eps: GridFunction,
    pub energy: f64,
    pub v_trap: Vec<f64>,
    pub orthogonality: f64,
}

/// Compact per-record history entry.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ModulationRecord {
    pub s: f64,
    pub b: f64,
    pub a: f64,
    pub coeffs: Vec<f64>,
    pub energy: f64,
    pub v_trap: Vec<f64>,
    pub eps_norm: f64,
    pub orthogonality: f64,
    /// Discrete `lambda_{b,j}`.
    pub lambda_b: Vec<f64>,
    /// `<Lambda psi_{b,k}, psi_{b,j}>_b / <psi_{b,j}, psi_{b,j}>_b`.
    pub scaling: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum ParameterMode {
    SelfConsistent,
    Adiabatic {
        schedule: AdiabaticSchedule,
        table: Arc<EigenTable>,
    },
}

/// Decomposes each observed state and keeps the history.
#[derive(Debug, Clone)]
pub struct ModulationTracker {
    k: usize,
    mode: ParameterMode,
    lambdas: Vec<f64>,
    margin: f64,
    last_pair: Option<EigenPair>,
    history: Vec<ModulationRecord>,
}

impl ModulationTracker {
    pub fn new(k: usize, mode: ParameterMode) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("mode index must be positive".into()));
        }
        if k == 1 && !matches!(mode, ParameterMode::SelfConsistent) {
            return Err(Error::InvalidArgument(
                "k = 1 uses the self-consistent weight".into(),
            ));
        }
        if k > 1 && matches!(mode, ParameterMode::SelfConsistent) {
            return Err(Error::InvalidArgument(
                "k > 1 needs an adiabatic schedule".into(),
            ));
        }
        let lambdas: Vec<f64> = j0_zeros(k)?.iter().map(|z| z.lambda).collect();
        let margin = trapping_margin(&lambdas, k);
        Ok(Self {
            k,
            mode,
            lambdas,
            margin,
            last_pair: None,
            history: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn history(&self) -> &[ModulationRecord] {
        &self.history
    }

    pub fn into_history(self) -> Vec<ModulationRecord> {
        self.history
    }

    fn basis_for(&mut self, state: &SimState) -> Result<Basis> {
        match &self.mode {
            ParameterMode::SelfConsistent => {
                let start = match self.last_pair.take() {
                    Some(p) => p,
                    None => eigenpairs(state.v.grid(), WeightParam::flat(), 1)?.remove(0),
                };
                let fp = self_consistent_from(&state.v, &start)?;
                let basis = Basis::from_pairs(fp.b1, std::slice::from_ref(&fp.pair));
                self.last_pair = Some(fp.pair);
                Ok(basis)
            }
            ParameterMode::Adiabatic { schedule, table } => table.basis(schedule.b(state.s)),
        }
    }

    pub fn observe(&mut self, state: &SimState) -> Result<ModulationState> {
        let basis = self.basis_for(state)?;
        let w = basis.weight();
        let d = decompose(&state.v, &basis)?;
        let e = energy(&d.eps, w)?;
        let growth = self.lambdas[self.k - 1] + self.margin;
        let v_trap: Vec<f64> = d.coeffs[..self.k - 1]
            .iter()
            .map(|b| b * (growth * state.s).exp())
            .collect();
        let m = measure(state.v.grid(), w);
        let lk = lambda_op(&basis.psis[self.k - 1]);
        let scaling = basis
            .psis
            .iter()
            .map(|p| dot3(&m, lk.values(), p.values()) / dot3(&m, p.values(), p.values()))
            .collect();
        let eps_norm = dot3(&m, d.eps.values(), d.eps.values()).sqrt();
        self.history.push(ModulationRecord {
            s: state.s,
            b: basis.b,
            a: state.a,
            coeffs: d.coeffs.clone(),
            energy: e,
            v_trap: v_trap.clone(),
            eps_norm,
            orthogonality: d.orthogonality,
            lambda_b: basis.lambdas.clone(),
            scaling,
        });
        Ok(ModulationState {
            k: self.k,
            s: state.s,
            b: basis.b,
            coeffs: d.coeffs,
            eps: d.eps,
            energy: e,
            v_trap,
            orthogonality: d.orthogonality,
        })
    }
}

/// Finite-difference diagnostics over a recorded history; values are
/// reported, not asserted.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct ModDiagnostics {
    /// History positions of the diagnosed states.
    pub index: Vec<usize>,
    pub s: Vec<f64>,
    /// Per state, per mode: residual of the leading modal law.
    pub residuals: Vec<Vec<f64>>,
    /// `residual / |b_1|^{5/2}` (k = 1) or `sum residual / (b |b_k|)` (k > 1).
    pub ratios: Vec<f64>,
    /// Per state: `max_j |Mod_j|`, the coefficient of `psi_{b,j}` in the
    /// modulation vector evaluated from the extracted parameters. It equals
    /// `<Psi, psi_j>_b` up to terms driven by `eps`.
    pub psi_proj: Vec<f64>,
    /// `Phi = b_s + 2 b (a - b)`.
    pub phi: Vec<f64>,
}

/// Residuals of the modal laws, with five-point centered derivatives
///
/// ```text
/// k = 1:  (b_1)_s + lambda_1 b_1 + sqrt(2 lambda_1) b_1^2
/// k > 1:  (b_k)_s + lambda_k b_k + (-1)^{k+1} sqrt(2 lambda_k) b_k^2,
///         (b_j)_s + lambda_j b_j + (-1)^k sqrt(2 lambda_k) b_k^2 <Lambda eta_k, eta_j>_0.
/// ```
///
/// The `lambda_j` are the discrete `b = 0` eigenvalues on `grid`, the grid
/// of the run, so the spatial discretization error does not enter.
pub fn modulation_residual(
    history: &[ModulationRecord],
    k: usize,
    grid: RadialGrid,
) -> Result<ModDiagnostics> {
    if history.len() < 5 {
        return Err(Error::InsufficientHistory {
            needed: 5,
            got: history.len(),
        });
    }
    let zeros = j0_zeros(k)?;
    let lam: Vec<f64> = eigenpairs(grid, WeightParam::flat(), k)?
        .iter()
        .map(|p| p.lambda)
        .collect();
    let fine = RadialGrid::new(2048)?;
    let coupling: Vec<f64> = (1..k)
        .map(|j| scaling_coupling(k, j, fine, &zeros))
        .collect::<Result<_>>()?;
    let c = (2.0 * zeros[k - 1].lambda).sqrt();
    let sign_k = if k % 2 == 0 { 1.0 } else { -1.0 };
    let mut out = ModDiagnostics::default();
    for i in 2..history.len() - 2 {
        let (pp, p, h, n, nn) = (
            &history[i - 2],
            &history[i - 1],
            &history[i],
            &history[i + 1],
            &history[i + 2],
        );
        let dsw = 6.0 * (n.s - p.s);
        let five =
            |f: &dyn Fn(&ModulationRecord) -> f64| (f(pp) - 8.0 * f(p) + 8.0 * f(n) - f(nn)) / dsw;
        let deriv = |j: usize| five(&|r: &ModulationRecord| r.coeffs[j]);
        let bk = h.coeffs[k - 1];
        let mut res = Vec::with_capacity(k);
        for j in 0..k {
            let r = if j == k - 1 {
                deriv(j) + lam[j] * bk - sign_k * c * bk * bk
            } else {
                deriv(j) + lam[j] * h.coeffs[j] + sign_k * c * bk * bk * coupling[j]
            };
            res.push(r.abs());
        }
        let total: f64 = res.iter().sum();
        let ratio = if k == 1 {
            total / bk.abs().powf(2.5)
        } else {
            total / (h.b.abs() * bk.abs())
        };
        let b_s = five(&|r: &ModulationRecord| r.b);
        let mut mod_max: f64 = 0.0;
        for j in 0..k {
            let drift = if k == 1 {
                (h.a - h.b) * h.coeffs[0]
            } else {
                h.a * bk
            };
            let m = deriv(j) + h.coeffs[j] * h.lambda_b[j] + drift * h.scaling[j];
            mod_max = mod_max.max(m.abs());
        }
        out.index.push(i);
        out.s.push(h.s);
        out.residuals.push(res);
        out.ratios.push(ratio);
        out.psi_proj.push(mod_max);
        out.phi.push(b_s + 2.0 * h.b * (h.a - h.b));
    }
    Ok(out)
}

/// `|a - (-sqrt(2 lambda_1) b_1)|` for `k = 1`, `|a - (-1)^k sqrt(2 lambda_k) b_k|`
/// for `k > 1`.
pub fn boundary_law_check(state: &SimState, ms: &ModulationState) -> Result<f64> {
    let k = ms.k;
    let lambda_k = j0_zeros(k)?[k - 1].lambda;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    Ok((state.a - sign * (2.0 * lambda_k).sqrt() * ms.coeffs[k - 1]).abs())
}

/// CSV `(s, b, b_1..b_k, E, V_1..V_{k-1}, residual_1..residual_k)`; residual
/// columns are empty where the five-point stencil does not fit.
pub fn write_modulation_csv(
    path: &Path,
    history: &[ModulationRecord],
    diag: Option<&ModDiagnostics>,
) -> Result<()> {
    let k = history.first().map_or(0, |r| r.coeffs.len());
    let mut out = String::from("s,b");
    for j in 1..=k {
        out.push_str(&format!(",b_{j}"));
    }
    out.push_str(",E");
    for j in 1..k {
        out.push_str(&format!(",V_{j}"));
    }
    for j in 1..=k {
        out.push_str(&format!(",residual_{j}"));
    }
    out.push('\n');
    for (i, r) in history.iter().enumerate() {
        out.push_str(&format!("{:.10e},{:.10e}", r.s, r.b));
        for c in &r.coeffs {
            out.push_str(&format!(",{c:.10e}"));
        }
        out.push_str(&format!(",{:.6e}", r.energy));
        for v in &r.v_trap {
            out.push_str(&format!(",{v:.6e}"));
        }
        let row = diag.and_then(|d| {
            d.index
                .iter()
                .position(|&x| x == i)
                .map(|pos| &d.residuals[pos])
        });
        for j in 0..k {
            match row {
                Some(res) => out.push_str(&format!(",{:.6e}", res[j])),
                _ => out.push(','),
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
