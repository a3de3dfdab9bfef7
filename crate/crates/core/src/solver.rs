//! Time stepping of the renormalized free-boundary flow
//!
//! ```text
//! v_s = Delta v - a Lambda v,   v(s, 1) = 0,   a = v_y(s, 1),
//! lambda_s = -a lambda,         dt/ds = lambda^2.
//! ```
//!
//! Diffusion is Crank-Nicolson in the flux form of the radial Laplacian, the
//! drift `a Lambda v` is explicit with a Heun predictor-corrector, and the
//! radius is advanced multiplicatively so it stays positive.

use std::io::{Read, Write};
use std::ops::ControlFlow;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, RadialGrid};
use crate::spectrum::assemble_hb;
use crate::tridiag::{SpdTridiagonalLu, SymTridiagonal};
use crate::weighted_space::{boundary_slope, derivative, l2b_norm, radial_integral, WeightParam};

/// Largest boundary slope accepted by the stepper.
pub const MAX_SLOPE: f64 = 1.0;
pub const NORM_FLOOR: f64 = 1e-12;

/// Full renormalized state.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub s: f64,
    pub t: f64,
    pub lambda: f64,
    pub a: f64,
    pub v: GridFunction,
}

impl SimState {
    /// State at `s = t = 0`, `lambda = 1` with initial profile `v0`
    /// (the boundary value is pinned to zero).
    pub fn initial(mut v0: GridFunction) -> Result<Self> {
        if !v0.is_finite() {
            return Err(Error::InvalidArgument(
                "initial profile has non-finite samples".into(),
            ));
        }
        v0.pin_dirichlet();
        let a = boundary_slope(&v0);
        Ok(Self {
            s: 0.0,
            t: 0.0,
            lambda: 1.0,
            a,
            v: v0,
        })
    }

    /// `||v||_{L^2_a}`, the norm in the weight of the current drift.
    pub fn norm(&self) -> f64 {
        l2b_norm(&self.v, WeightParam::unchecked(self.a))
    }
}

/// `M = 2 pi lambda^2 int_0^1 v y dy + pi lambda^2`, the conserved total
/// heat plus latent area.
pub fn mass(state: &SimState) -> f64 {
    let l2 = state.lambda * state.lambda;
    std::f64::consts::PI * l2 * (2.0 * radial_integral(&state.v) + 1.0)
}

/// Fixed-step IMEX integrator on one grid.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: RadialGrid,
    ds: f64,
    couple_boundary: bool,
    stiffness: SymTridiagonal,
    lumped: Vec<f64>,
    lu: SpdTridiagonalLu,
}

impl Stepper {
    /// `ds` must satisfy the drift CFL bound `ds * MAX_SLOPE / h <= 1/2`.
    pub fn new(grid: RadialGrid, ds: f64) -> Result<Self> {
        if !(ds > 0.0) || ds * MAX_SLOPE > 0.5 * grid.h() {
            return Err(Error::InvalidArgument(format!(
                "step ds = {ds} outside (0, h/2] for h = {}",
                grid.h()
            )));
        }
        let op = assemble_hb(grid, WeightParam::flat());
        let stiffness = op.stiffness();
        let lumped = op.lumped_mass().to_vec();
        let mut lhs = stiffness.clone();
        for (d, m) in lhs.d.iter_mut().zip(&lumped) {
            *d = m + 0.5 * ds * *d;
        }
        lhs.e.iter_mut().for_each(|e| *e *= 0.5 * ds);
        let lu = SpdTridiagonalLu::factor(&lhs)?;
        Ok(Self {
            grid,
            ds,
            couple_boundary: true,
            stiffness,
            lumped,
            lu,
        })
    }

    /// Keep `a = 0` and `lambda` fixed: plain heat flow on the unit disk.
    pub fn with_fixed_boundary(mut self) -> Self {
        self.couple_boundary = false;
        self
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    pub fn grid(&self) -> RadialGrid {
        self.grid
    }

    fn drift(&self, v: &GridFunction, a: f64) -> Vec<f64> {
        if a == 0.0 {
            return vec![0.0; self.grid.intervals()];
        }
        let d = derivative(v);
        (0..self.grid.intervals())
            .map(|i| a * self.grid.node(i) * d.values()[i])
            .collect()
    }

    fn solve(&self, base: &[f64], drift: &[f64]) -> GridFunction {
        let mut rhs: Vec<f64> = base
            .iter()
            .zip(drift)
            .zip(&self.lumped)
            .map(|((b, f), m)| b - self.ds * m * f)
            .collect();
        self.lu.solve_in_place(&mut rhs);
        rhs.push(0.0);
        GridFunction::from_values(self.grid, rhs).expect("length N+1")
    }

    fn slope(&self, v: &GridFunction) -> f64 {
        if self.couple_boundary {
            boundary_slope(v)
        } else {
            0.0
        }
    }

    pub fn step(&self, state: &SimState) -> Result<SimState> {
        if state.v.grid() != self.grid {
            return Err(Error::GridMismatch {
                left: self.grid.intervals(),
                right: state.v.grid().intervals(),
            });
        }
        if !(state.lambda > 0.0) {
            return Err(Error::NonPositiveRadius {
                s: state.s,
                lambda: state.lambda,
            });
        }
        let n = self.grid.intervals();
        let a0 = self.slope(&state.v);
        if a0.abs() > MAX_SLOPE || !a0.is_finite() {
            return Err(Error::BoundaryBlowup { s: state.s, a: a0 });
        }
        // (W - ds/2 K) v_n
        let kv = self.stiffness.apply(&state.v.values()[..n]);
        let base: Vec<f64> = (0..n)
            .map(|i| self.lumped[i] * state.v.values()[i] - 0.5 * self.ds * kv[i])
            .collect();
        let f0 = self.drift(&state.v, a0);
        let predicted = self.solve(&base, &f0);
        let a_star = self.slope(&predicted);
        let f1 = self.drift(&predicted, a_star);
        let avg: Vec<f64> = f0.iter().zip(&f1).map(|(p, q)| 0.5 * (p + q)).collect();
        let v = self.solve(&base, &avg);
        let a1 = self.slope(&v);
        if a1.abs() > MAX_SLOPE || !a1.is_finite() {
            return Err(Error::BoundaryBlowup {
                s: state.s + self.ds,
                a: a1,
            });
        }
        let lambda = state.lambda * (-0.5 * self.ds * (a0 + a1)).exp();
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::NonPositiveRadius {
                s: state.s + self.ds,
                lambda,
            });
        }
        let t = state.t + 0.5 * self.ds * (state.lambda * state.lambda + lambda * lambda);
        Ok(SimState {
            s: state.s + self.ds,
            t,
            lambda,
            a: a1,
            v,
        })
    }
}

/// One sample of a run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Record {
    pub s: f64,
    pub t: f64,
    pub lambda: f64,
    pub a: f64,
    pub mass: f64,
    pub l2b_norm: f64,
}

impl Record {
    pub fn of(state: &SimState) -> Self {
        Self {
            s: state.s,
            t: state.t,
            lambda: state.lambda,
            a: state.a,
            mass: mass(state),
            l2b_norm: state.norm(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    pub records: Vec<Record>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    /// Largest `|M(s) - M(0)| / M(0)` over the records.
    pub fn max_mass_drift(&self) -> f64 {
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        self.records
            .iter()
            .map(|r| ((r.mass - first.mass) / first.mass).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,t,lambda,a,mass,l2b_norm\n");
        for r in &self.records {
            out.push_str(&format!(
                "{:.10e},{:.15e},{:.15e},{:.15e},{:.15e},{:.6e}\n",
                r.s, r.t, r.lambda, r.a, r.mass, r.l2b_norm
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (line_no, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<f64> = line
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", line_no + 1)))?;
            if f.len() != 6 {
                return Err(Error::InvalidArgument(format!(
                    "line {}: expected 6 columns",
                    line_no + 1
                )));
            }
            records.push(Record {
                s: f[0],
                t: f[1],
                lambda: f[2],
                a: f[3],
                mass: f[4],
                l2b_norm: f[5],
            });
        }
        Ok(Self { records })
    }
}

/// Integration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub ds: f64,
    pub s_max: f64,
    /// Record every this many steps.
    pub record_every: usize,
    /// Allowed `|M(s) - M(0)| / M(0)` at every record.
    pub mass_tolerance: f64,
    pub norm_floor: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            ds: 1e-4,
            s_max: 5.0,
            record_every: 10,
            mass_tolerance: 1e-6,
            norm_floor: NORM_FLOOR,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub series: TimeSeries,
    pub final_state: SimState,
    /// The run ended because `||v||` fell below the floor.
    pub reached_floor: bool,
    /// The observer asked to stop.
    pub interrupted: bool,
}

/// Integrate from `initial` until `s_max`, the norm floor, or the observer
/// breaks. The observer sees every recorded state.
pub fn run<F>(settings: &RunSettings, initial: SimState, mut observer: F) -> Result<RunOutcome>
where
    F: FnMut(&SimState) -> Result<ControlFlow<()>>,
{
    let stepper = Stepper::new(initial.v.grid(), settings.ds)?;
    run_with(&stepper, settings, initial, &mut observer)
}

/// As [`run`], reusing a prepared stepper.
pub fn run_with<F>(
    stepper: &Stepper,
    settings: &RunSettings,
    initial: SimState,
    observer: &mut F,
) -> Result<RunOutcome>
where
    F: FnMut(&SimState) -> Result<ControlFlow<()>>,
{
    let every = settings.record_every.max(1);
    let m0 = mass(&initial);
    let mut series = TimeSeries::default();
    let mut state = initial;
    let total = ((settings.s_max / stepper.ds()) - 1e-9).ceil().max(0.0) as usize;
    let mut step = 0usize;
    loop {
        if step % every == 0 || step == total {
            let rec = Record::of(&state);
            let drift = ((rec.mass - m0) / m0).abs();
            if drift > settings.mass_tolerance {
                return Err(Error::ConservationViolated {
                    s: state.s,
                    drift,
                    tolerance: settings.mass_tolerance,
                });
            }
            series.records.push(rec);
            if observer(&state)?.is_break() {
                return Ok(RunOutcome {
                    series,
                    final_state: state,
                    reached_floor: false,
                    interrupted: true,
                });
            }
            if rec.l2b_norm < settings.norm_floor {
                return Ok(RunOutcome {
                    series,
                    final_state: state,
                    reached_floor: true,
                    interrupted: false,
                });
            }
        }
        if step == total {
            break;
        }
        state = stepper.step(&state)?;
        step += 1;
    }
    Ok(RunOutcome {
        series,
        final_state: state,
        reached_floor: false,
        interrupted: false,
    })
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"STEFANCK";
const CHECKPOINT_VERSION: u64 = 1;

/// Binary checkpoint, all fields little-endian:
///
/// ```text
/// bytes 0..8    magic "STEFANCK"
/// u64           format version (1)
/// u64           number of intervals N
/// f64 x 4       s, t, lambda, a
/// f64 x (N+1)   v at y_0 .. y_N
/// ```
pub fn write_checkpoint(path: &Path, state: &SimState) -> Result<()> {
    let n = state.v.grid().intervals();
    let mut buf = Vec::with_capacity(24 + 8 * (n + 5));
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    for x in [state.s, state.t, state.lambda, state.a]
        .iter()
        .chain(state.v.values())
    {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<SimState> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    let bad = |why: &str| Error::InvalidArgument(format!("{}: {why}", path.display()));
    if buf.len() < 24 || &buf[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint"));
    }
    let word = |i: usize| -> [u8; 8] { buf[i..i + 8].try_into().expect("8 bytes") };
    if u64::from_le_bytes(word(8)) != CHECKPOINT_VERSION {
        return Err(bad("unsupported checkpoint version"));
    }
    let n = u64::from_le_bytes(word(16)) as usize;
    if buf.len() != 24 + 8 * (n + 5) {
        return Err(bad("truncated checkpoint"));
    }
    let floats: Vec<f64> = (0..n + 5)
        .map(|i| f64::from_le_bytes(word(24 + 8 * i)))
        .collect();
    let grid = RadialGrid::new(n)?;
    let v = GridFunction::from_values(grid, floats[4..].to_vec())?;
    Ok(SimState {
        s: floats[0],
        t: floats[1],
        lambda: floats[2],
        a: floats[3],
        v,
    })
}
