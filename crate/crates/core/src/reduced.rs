//! Reduced modal dynamics: the closed-form Riccati law, the truncated
//! `k`-mode system, and shooting for trapped lower modes.
//!
//! ```text
//! (b_k)_s + lambda_k b_k + sigma sqrt(2 lambda_k) b_k^2 = 0,     sigma = (-1)^{k+1}
//! (b_j)_s + lambda_j b_j + (-1)^k sqrt(2 lambda_k) b_k^2 <Lambda eta_k, eta_j>_0 = 0
//! ```

use std::ops::ControlFlow;
use std::sync::Arc;

use crate::bessel::{j0_zeros, scaling_coupling};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, RadialGrid};
use crate::modulation::{
    trapping_margin, AdiabaticSchedule, EigenTable, ModulationTracker, ParameterMode,
};
use crate::solver::{run_with, RunSettings, SimState, Stepper};

pub const MAX_INITIAL_AMPLITUDE: f64 = 0.05;
pub const SYSTEM_STEP: f64 = 1e-3;

/// Coefficients of the scalar law for mode `k`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RiccatiParams {
    pub k: usize,
    pub lambda_k: f64,
    pub sigma: f64,
    pub b0: f64,
}

impl RiccatiParams {
    pub fn new(k: usize, b0: f64) -> Result<Self> {
        if b0.abs() > MAX_INITIAL_AMPLITUDE || !b0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "|b_k(0)| must be at most {MAX_INITIAL_AMPLITUDE}, got {b0}"
            )));
        }
        let lambda_k = j0_zeros(k)?[k - 1].lambda;
        Ok(Self {
            k,
            lambda_k,
            sigma: if k % 2 == 1 { 1.0 } else { -1.0 },
            b0,
        })
    }

    fn c(&self) -> f64 {
        (2.0 * self.lambda_k).sqrt()
    }

    /// Right-hand side `b_s`.
    pub fn rhs(&self, b: f64) -> f64 {
        -self.lambda_k * b - self.sigma * self.c() * b * b
    }
}

/// `b(s) = 1 / ((1/b0 + sigma c / lambda) e^{lambda s} - sigma c / lambda)`.
pub fn riccati_exact(p: &RiccatiParams, s: f64) -> Result<f64> {
    if p.b0 == 0.0 {
        return Ok(0.0);
    }
    let q = p.sigma * p.c() / p.lambda_k;
    let w0 = 1.0 / p.b0;
    let denom = (w0 + q) * (p.lambda_k * s).exp() - q;
    if denom.signum() != w0.signum() || denom == 0.0 {
        let pole = (q / (w0 + q)).ln() / p.lambda_k;
        return Err(Error::PoleCrossing { pole });
    }
    Ok(1.0 / denom)
}

/// `lim_{s -> inf} e^{lambda s} b(s) = 1 / (1/b0 + sigma c / lambda)`.
pub fn riccati_limit(p: &RiccatiParams) -> f64 {
    if p.b0 == 0.0 {
        0.0
    } else {
        1.0 / (1.0 / p.b0 + p.sigma * p.c() / p.lambda_k)
    }
}

/// Classical RK4 on the scalar law, returning `b(s)` at `s_end`.
pub fn riccati_rk4(p: &RiccatiParams, s_end: f64, ds: f64) -> f64 {
    riccati_rk4_path(p, s_end, ds, usize::MAX)
        .last()
        .expect("nonempty")
        .1
}

/// RK4 samples `(s, b)` every `every` steps, always including both ends.
pub fn riccati_rk4_path(p: &RiccatiParams, s_end: f64, ds: f64, every: usize) -> Vec<(f64, f64)> {
    let steps = (s_end / ds).round().max(1.0) as usize;
    let h = s_end / steps as f64;
    let mut b = p.b0;
    let mut out = vec![(0.0, b)];
    for n in 1..=steps {
        b = rk4_step(|x: &[f64]| vec![p.rhs(x[0])], &[b], h)[0];
        if n % every.max(1) == 0 || n == steps {
            out.push((n as f64 * h, b));
        }
    }
    out
}

fn rk4_step(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<f64> {
    let add = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(p, q)| p + t * q).collect()
    };
    let k1 = f(x);
    let k2 = f(&add(x, &k1, 0.5 * h));
    let k3 = f(&add(x, &k2, 0.5 * h));
    let k4 = f(&add(x, &k3, h));
    (0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Truncated `k`-mode system.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalSystem {
    pub k: usize,
    pub lambdas: Vec<f64>,
    /// `<Lambda eta_k, eta_j>_0` for `j < k`.
    pub coupling: Vec<f64>,
    pub quadratic: bool,
}

impl ModalSystem {
    pub fn new(k: usize) -> Result<Self> {
        let zeros = j0_zeros(k)?;
        let grid = RadialGrid::new(2048)?;
        let coupling = (1..k)
            .map(|j| scaling_coupling(k, j, grid, &zeros))
            .collect::<Result<_>>()?;
        Ok(Self {
            k,
            lambdas: zeros.iter().map(|z| z.lambda).collect(),
            coupling,
            quadratic: true,
        })
    }

    /// Drop the quadratic terms (decoupled linear modes).
    pub fn linear(mut self) -> Self {
        self.quadratic = false;
        self
    }

    pub fn rhs(&self, b: &[f64]) -> Vec<f64> {
        let k = self.k;
        let c = (2.0 * self.lambdas[k - 1]).sqrt();
        let sign_k = if k % 2 == 0 { 1.0 } else { -1.0 };
        let q = if self.quadratic {
            c * b[k - 1] * b[k - 1]
        } else {
            0.0
        };
        (0..k)
            .map(|j| {
                if j == k - 1 {
                    -self.lambdas[j] * b[j] + sign_k * q
                } else {
                    -self.lambdas[j] * b[j] - sign_k * q * self.coupling[j]
                }
            })
            .collect()
    }
}

/// Sampled trajectory of the modal system.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Trajectory {
    pub s: Vec<f64>,
    pub b: Vec<Vec<f64>>,
}

/// RK4 with fixed step [`SYSTEM_STEP`] from `initial` to `s_max`.
pub fn integrate_system(system: &ModalSystem, initial: &[f64], s_max: f64) -> Result<Trajectory> {
    integrate_system_with_step(system, initial, s_max, SYSTEM_STEP)
}

pub fn integrate_system_with_step(
    system: &ModalSystem,
    initial: &[f64],
    s_max: f64,
    ds: f64,
) -> Result<Trajectory> {
    if initial.len() != system.k {
        return Err(Error::InvalidArgument(format!(
            "expected {} initial values, got {}",
            system.k,
            initial.len()
        )));
    }
    let steps = (s_max / ds).round().max(0.0) as usize;
    let mut traj = Trajectory {
        s: vec![0.0],
        b: vec![initial.to_vec()],
    };
    let mut x = initial.to_vec();
    for n in 1..=steps {
        x = rk4_step(|y: &[f64]| system.rhs(y), &x, ds);
        traj.s.push(n as f64 * ds);
        traj.b.push(x.clone());
    }
    Ok(traj)
}

/// Which trapping variables decide an exit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Watch {
    All,
    Mode(usize),
}

impl Watch {
    fn norm2(&self, v: &[f64]) -> f64 {
        match *self {
            Watch::All => v.iter().map(|x| x * x).sum(),
            Watch::Mode(j) => v[j - 1] * v[j - 1],
        }
    }
}

/// Outcome of one evaluation of the exit map.
#[derive(Debug, Clone, PartialEq)]
pub struct Excursion {
    /// First `s` at which the watched `sum V_j^2` reached `D^2`.
    pub exit_s: Option<f64>,
    /// Trapping variables at the exit, or at the end of the run.
    pub v_final: Vec<f64>,
    /// Largest `sum_j V_j^2` over the run (all modes).
    pub max_v2: f64,
}

/// Map from lower-mode initial data `(b_1 .. b_{k-1})(0)` to the excursion
/// of the trapping variables.
pub trait ExitMap: Sync {
    fn k(&self) -> usize;
    fn b_k0(&self) -> f64;
    fn ceiling(&self) -> f64;
    fn evaluate(&self, lower: &[f64], watch: Watch) -> Result<Excursion>;
}

/// Exit map of the truncated modal system.
#[derive(Debug, Clone)]
pub struct ReducedExitMap {
    pub system: ModalSystem,
    pub b_k0: f64,
    pub ceiling: f64,
    pub s_max: f64,
    pub ds: f64,
}

impl ExitMap for ReducedExitMap {
    fn k(&self) -> usize {
        self.system.k
    }

    fn b_k0(&self) -> f64 {
        self.b_k0
    }

    fn ceiling(&self) -> f64 {
        self.ceiling
    }

    fn evaluate(&self, lower: &[f64], watch: Watch) -> Result<Excursion> {
        let k = self.system.k;
        let growth = self.system.lambdas[k - 1] + trapping_margin(&self.system.lambdas, k);
        let mut x = lower.to_vec();
        x.push(self.b_k0);
        let steps = (self.s_max / self.ds).round() as usize;
        let mut max_v2: f64 = 0.0;
        let mut v = lower.to_vec();
        for n in 0..=steps {
            let s = n as f64 * self.ds;
            v = x[..k - 1].iter().map(|b| b * (growth * s).exp()).collect();
            max_v2 = max_v2.max(v.iter().map(|t| t * t).sum());
            if watch.norm2(&v) >= self.ceiling * self.ceiling {
                return Ok(Excursion {
                    exit_s: Some(s),
                    v_final: v,
                    max_v2,
                });
            }
            if n < steps {
                x = rk4_step(|y: &[f64]| self.system.rhs(y), &x, self.ds);
            }
        }
        Ok(Excursion {
            exit_s: None,
            v_final: v,
            max_v2,
        })
    }
}

/// Exit map of the full PDE: initial data
/// `sum_{j<k} b_j psi_{b(0),j} + b_k(0) psi_{b(0),k}`, decomposed along the
/// adiabatic weight at every record.
#[derive(Debug, Clone)]
pub struct PdeExitMap {
    pub k: usize,
    pub b_k0: f64,
    pub ceiling: f64,
    pub settings: RunSettings,
    pub schedule: AdiabaticSchedule,
    pub table: Arc<EigenTable>,
    stepper: Stepper,
}

impl PdeExitMap {
    pub fn new(
        grid: RadialGrid,
        k: usize,
        b_k0: f64,
        amplitude: f64,
        ceiling: f64,
        settings: RunSettings,
    ) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument("shooting needs k >= 2".into()));
        }
        let lambda_k = j0_zeros(k)?[k - 1].lambda;
        let table = Arc::new(EigenTable::build(grid, k, amplitude, 1.1, 1e-7)?);
        let stepper = Stepper::new(grid, settings.ds)?;
        Ok(Self {
            k,
            b_k0,
            ceiling,
            settings,
            schedule: AdiabaticSchedule {
                amplitude,
                lambda_k,
            },
            table,
            stepper,
        })
    }

    /// Initial profile for the given lower-mode data.
    pub fn initial_profile(&self, lower: &[f64]) -> Result<GridFunction> {
        let basis = self.table.basis(self.schedule.b(0.0))?;
        let mut v = basis.psis[self.k - 1].scaled(self.b_k0);
        for (b, p) in lower.iter().zip(&basis.psis) {
            v.add_scaled(*b, p)?;
        }
        Ok(v)
    }

    pub fn tracker(&self) -> Result<ModulationTracker> {
        ModulationTracker::new(
            self.k,
            ParameterMode::Adiabatic {
                schedule: self.schedule,
                table: self.table.clone(),
            },
        )
    }
}

impl ExitMap for PdeExitMap {
    fn k(&self) -> usize {
        self.k
    }

    fn b_k0(&self) -> f64 {
        self.b_k0
    }

    fn ceiling(&self) -> f64 {
        self.ceiling
    }

    fn evaluate(&self, lower: &[f64], watch: Watch) -> Result<Excursion> {
        let state = SimState::initial(self.initial_profile(lower)?)?;
        let mut tracker = self.tracker()?;
        let mut exit_s = None;
        let mut v_final = vec![0.0; self.k - 1];
        let mut max_v2: f64 = 0.0;
        let d2 = self.ceiling * self.ceiling;
        let mut observer = |st: &SimState| -> Result<ControlFlow<()>> {
            let ms = tracker.observe(st)?;
            max_v2 = max_v2.max(ms.v_trap.iter().map(|t| t * t).sum());
            v_final = ms.v_trap;
            if watch.norm2(&v_final) >= d2 {
                exit_s = Some(st.s);
                return Ok(ControlFlow::Break(()));
            }
            Ok(ControlFlow::Continue(()))
        };
        run_with(&self.stepper, &self.settings, state, &mut observer)?;
        Ok(Excursion {
            exit_s,
            v_final,
            max_v2,
        })
    }
}

/// Shooting record, serialized as the result JSON.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ShootingResult {
    pub k: usize,
    pub b_k0: f64,
    pub found_initials: Vec<f64>,
    pub exit_s: Option<f64>,
    #[serde(rename = "max_V2")]
    pub max_v2: f64,
    pub ceiling: f64,
    pub tolerance: f64,
    /// Bracket widths of the (outer) bisection, one per iteration.
    pub bracket_widths: Vec<f64>,
}

/// Bisection controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    /// Initial bracket `[-half_width, half_width]` for every lower mode.
    pub half_width: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            half_width: 0.01,
            tolerance: 1e-12,
            max_iterations: 200,
        }
    }
}

fn side(e: &Excursion, mode: usize) -> f64 {
    e.v_final[mode - 1].signum()
}

/// Bisect coordinate `mode` (1-based) with the other lower modes fixed.
/// Returns the midpoint and the widths.
fn bisect_mode<M: ExitMap>(
    map: &M,
    lower: &[f64],
    mode: usize,
    opts: &ShootingOptions,
    inner: &(dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync),
) -> Result<(Vec<f64>, Vec<f64>)> {
    let eval = |x: f64| -> Result<(Vec<f64>, Excursion)> {
        let mut l = lower.to_vec();
        l[mode - 1] = x;
        let l = inner(&l)?;
        let e = map.evaluate(&l, Watch::Mode(mode))?;
        Ok((l, e))
    };
    let (mut lo, mut hi) = (-opts.half_width, opts.half_width);
    let (a, b) = rayon::join(|| eval(lo), || eval(hi));
    let (_, e_lo) = a?;
    let (_, e_hi) = b?;
    let s_lo = side(&e_lo, mode);
    if s_lo == side(&e_hi, mode) || s_lo == 0.0 {
        return Err(Error::NoTrappedData(format!(
            "mode {mode}: both bracket ends [{lo:e}, {hi:e}] leave on the same side"
        )));
    }
    let mut widths = Vec::new();
    for _ in 0..opts.max_iterations {
        let mid = 0.5 * (lo + hi);
        let (mut best, e) = eval(mid)?;
        if side(&e, mode) == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        widths.push(hi - lo);
        if hi - lo < opts.tolerance {
            best[mode - 1] = 0.5 * (lo + hi);
            return Ok((inner(&best)?, widths));
        }
    }
    Err(Error::NoTrappedData(format!(
        "mode {mode}: bracket did not shrink below {:e}",
        opts.tolerance
    )))
}

/// Find lower-mode data whose trapping variables stay below the ceiling.
///
/// `k = 2` bisects `b_1(0)` on the sign of `V_1` at exit. `k = 3` nests: the
/// outer bisection on `b_2(0)` uses the sign of `V_2`, each outer step
/// re-solving the inner bisection on `b_1(0)`.
pub fn shoot_trapped<M: ExitMap>(map: &M, opts: &ShootingOptions) -> Result<ShootingResult> {
    let (k, b_k0, ceiling) = (map.k(), map.b_k0(), map.ceiling());
    if !(2..=3).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "shooting supports k in {{2, 3}}, got {k}"
        )));
    }
    let finish = |found: Vec<f64>, widths: Vec<f64>| -> Result<ShootingResult> {
        let e = map.evaluate(&found, Watch::All)?;
        if e.exit_s.is_some() {
            return Err(Error::NoTrappedData(format!(
                "converged data {found:?} still exits at s = {:?}",
                e.exit_s
            )));
        }
        Ok(ShootingResult {
            k,
            b_k0,
            found_initials: found,
            exit_s: e.exit_s,
            max_v2: e.max_v2,
            ceiling,
            tolerance: opts.tolerance,
            bracket_widths: widths,
        })
    };
    if b_k0 == 0.0 {
        return finish(vec![0.0; k - 1], Vec::new());
    }
    let identity = |l: &[f64]| -> Result<Vec<f64>> { Ok(l.to_vec()) };
    if k == 2 {
        let (found, widths) = bisect_mode(map, &[0.0], 1, opts, &identity)?;
        return finish(found, widths);
    }
    let inner = |l: &[f64]| -> Result<Vec<f64>> { Ok(bisect_mode(map, l, 1, opts, &identity)?.0) };
    let (found, widths) = bisect_mode(map, &[0.0, 0.0], 2, opts, &inner)?;
    finish(found, widths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riccati_closed_form_examples() {
        let p = RiccatiParams::new(1, 0.0).unwrap();
        assert_eq!(riccati_exact(&p, 3.0).unwrap(), 0.0);
        let p = RiccatiParams::new(1, 0.01).unwrap();
        let exact = riccati_exact(&p, 1.0).unwrap();
        let rk = riccati_rk4(&p, 1.0, 1e-4);
        assert!((exact - rk).abs() < 1e-10);
        let scaled = (p.lambda_k * 8.0).exp() * riccati_exact(&p, 8.0).unwrap();
        assert!((scaled - riccati_limit(&p)).abs() < 1e-12 * scaled.abs().max(1.0));
        assert!(RiccatiParams::new(1, 0.06).is_err());
    }

    #[test]
    fn pole_is_reported() {
        // Large negative data for k = 1 blows up: 1/b0 + c/lambda < 0.
        let p = RiccatiParams {
            k: 1,
            lambda_k: 5.783185962946785,
            sigma: 1.0,
            b0: -2.0,
        };
        assert!(matches!(
            riccati_exact(&p, 1.0),
            Err(Error::PoleCrossing { .. })
        ));
    }

    #[test]
    fn linear_system_decouples() {
        let sys = ModalSystem::new(3).unwrap().linear();
        let init = [0.01, -0.02, 0.005];
        let tr = integrate_system(&sys, &init, 0.5).unwrap();
        let last = tr.b.last().unwrap();
        let s = *tr.s.last().unwrap();
        for j in 0..3 {
            let e = init[j] * (-sys.lambdas[j] * s).exp();
            assert!((last[j] - e).abs() < 1e-9 * init[j].abs());
        }
    }

    #[test]
    fn top_mode_follows_riccati() {
        let sys = ModalSystem::new(2).unwrap();
        let tr = integrate_system(&sys, &[0.0, 0.01], 1.0).unwrap();
        let p = RiccatiParams::new(2, 0.01).unwrap();
        for (s, b) in tr.s.iter().zip(&tr.b).step_by(50) {
            assert!((b[1] - riccati_exact(&p, *s).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn reduced_shooting_finds_trapped_data() {
        let mut map = ReducedExitMap {
            system: ModalSystem::new(2).unwrap(),
            b_k0: 0.01,
            ceiling: 1.0,
            s_max: 0.8,
            ds: 1e-3,
        };
        let res = shoot_trapped(&map, &ShootingOptions::default()).unwrap();
        assert!(res.exit_s.is_none());
        assert!(res.found_initials[0].abs() < 0.01 * 0.01 * 10.0);
        for w in res.bracket_widths.windows(2) {
            assert!((w[1] / w[0] - 0.5).abs() < 1e-9);
        }
        let tol = res.tolerance;
        for sign in [-1.0, 1.0] {
            let e = map
                .evaluate(&[res.found_initials[0] + sign * 100.0 * tol], Watch::All)
                .unwrap();
            assert!(e.exit_s.is_some());
        }
        map.b_k0 = 0.0;
        let zero = shoot_trapped(&map, &ShootingOptions::default()).unwrap();
        assert_eq!(zero.found_initials, vec![0.0]);
    }
}
