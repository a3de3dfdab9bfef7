//! The acceptance suite: eleven numbered criteria, each reported with its
//! measured value, limit and runtime.

use std::time::Instant;

use crate::bessel::{j0_zeros, scaling_coupling};
use crate::commands::{exit_map, shooting_options, simulate, RunArtifacts};
use crate::config::{Mode, ScenarioConfig};
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::modulation::ModulationRecord;
use crate::reduced::{
    riccati_exact, riccati_rk4_path, shoot_trapped, ExitMap, RiccatiParams, ShootingResult, Watch,
};
use crate::spectrum::perturbation_sweep;

/// One evaluated criterion.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub limit: f64,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Summary {
    pub quick: bool,
    pub criteria: Vec<CriterionResult>,
    pub seconds: f64,
}

impl Summary {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn get(&self, id: u8) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| c.id == id)
    }

    /// One line per criterion plus a total.
    pub fn table(&self) -> Vec<String> {
        let mut out: Vec<String> = self.criteria.iter().map(criterion_line).collect();
        let passed = self.criteria.iter().filter(|c| c.passed).count();
        out.push(format!(
            "{passed}/{} criteria passed in {:.1} s",
            self.criteria.len(),
            self.seconds
        ));
        out
    }
}

pub fn criterion_line(c: &CriterionResult) -> String {
    format!(
        "{} {:>2} {:<24} measured {:<11.4e} limit {:<10.3e} {:>6.2} s  {}",
        if c.passed { "PASS" } else { "FAIL" },
        c.id,
        c.name,
        c.measured,
        c.limit,
        c.seconds,
        c.detail
    )
}

/// Suite controls.
#[derive(Debug, Clone)]
pub struct SuiteOptions {
    /// Spectral and closed-form criteria only (1-4 and 11).
    pub quick: bool,
    /// Base scenario; `grid`, `seed`, `record_every`, shooting and
    /// tolerance settings are taken from it.
    pub base: ScenarioConfig,
}

impl SuiteOptions {
    pub fn from_config(cfg: &ScenarioConfig, quick: bool) -> Self {
        Self {
            quick,
            base: cfg.clone(),
        }
    }
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            quick: false,
            base: ScenarioConfig::default(),
        }
    }
}

fn timed(
    id: u8,
    name: &'static str,
    f: impl FnOnce() -> Result<(bool, f64, f64, String)>,
) -> CriterionResult {
    let t0 = Instant::now();
    let (passed, measured, limit, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, f64::NAN, f64::NAN, format!("error: {e}")),
    };
    CriterionResult {
        id,
        name,
        passed,
        measured,
        limit,
        detail,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

/// `J0(x) = pi^{-1} int_0^pi cos(x sin theta) d theta` by the trapezoid rule,
/// which converges geometrically for this periodic integrand.
fn j0_quadrature(x: f64) -> f64 {
    const M: usize = 256;
    let h = std::f64::consts::PI / M as f64;
    let mut acc = 0.5 * (1.0 + (0.0f64).cos());
    for i in 1..M {
        acc += (x * (i as f64 * h).sin()).cos();
    }
    acc * h / std::f64::consts::PI
}

/// First `count` positive zeros of `J0` by scanning and bisection.
pub fn j0_zeros_oracle(count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let step = 0.25;
    let mut x = 0.5;
    let mut fx = j0_quadrature(x);
    while out.len() < count {
        let (y, fy) = (x + step, j0_quadrature(x + step));
        if fx.signum() != fy.signum() {
            let (mut lo, mut hi, flo) = (x, y, fx);
            while hi - lo > 1e-14 * hi {
                let mid = 0.5 * (lo + hi);
                if j0_quadrature(mid).signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        x = y;
        fx = fy;
    }
    out
}

fn criterion_1() -> CriterionResult {
    timed(1, "spectral table", || {
        let t0 = Instant::now();
        let zeros = j0_zeros(9)?;
        let oracle = j0_zeros_oracle(9);
        let err = zeros[..8]
            .iter()
            .zip(&oracle)
            .map(|(z, o)| (z.r - o).abs())
            .fold(0.0, f64::max);
        let min_gap = zeros
            .windows(2)
            .map(|w| w[1].lambda - w[0].lambda)
            .fold(f64::INFINITY, f64::min);
        let secs = t0.elapsed().as_secs_f64();
        let passed = err <= 1e-10 && min_gap > 1.0 && secs < 1.0;
        Ok((
            passed,
            err,
            1e-10,
            format!("min lambda gap {min_gap:.3}, {secs:.3} s"),
        ))
    })
}

const SWEEP: [f64; 3] = [0.005, 0.01, 0.02];

fn criterion_2_3(grid: RadialGrid) -> (CriterionResult, CriterionResult) {
    use rayon::prelude::*;
    let t0 = Instant::now();
    let reports: Result<Vec<_>> = (1..=3usize)
        .into_par_iter()
        .map(|k| perturbation_sweep(grid, k, &SWEEP))
        .collect();
    let secs = t0.elapsed().as_secs_f64();
    let c2 = timed(2, "perturbation law", || {
        let reports = shared(&reports)?;
        let worst = reports
            .iter()
            .map(|r| r.defect_order.min(r.defect_order_richardson))
            .fold(f64::INFINITY, f64::min);
        let orders: Vec<String> = reports
            .iter()
            .map(|r| {
                format!(
                    "k={} {:.2}/{:.2}",
                    r.k, r.defect_order, r.defect_order_richardson
                )
            })
            .collect();
        Ok((
            worst >= 1.8 && secs < 30.0,
            worst,
            1.8,
            format!("orders grid/Richardson {}, {secs:.1} s", orders.join(", ")),
        ))
    });
    let c3 = timed(3, "boundary slopes", || {
        let t1 = Instant::now();
        let reports = shared(&reports)?;
        let mut worst: f64 = 0.0;
        let mut parts = Vec::new();
        for r in reports {
            let mut rk: f64 = 0.0;
            for (b, slope) in r.b_values.iter().zip(&r.boundary_slopes) {
                rk = rk.max((slope - r.boundary_slope_limit).abs() / b.abs());
            }
            // The sweep also holds lambda_{-b}; the slope at -b is computed here.
            for &b in &SWEEP {
                let p = crate::spectrum::eigenpairs(
                    grid,
                    crate::weighted_space::WeightParam::new(-b)?,
                    r.k,
                )?;
                rk = rk.max((p[r.k - 1].boundary_slope - r.boundary_slope_limit).abs() / b);
            }
            parts.push(format!("k={} {:.3}", r.k, rk));
            worst = worst.max(rk);
        }
        let secs3 = secs + t1.elapsed().as_secs_f64();
        Ok((
            worst <= 0.5 && secs3 < 10.0,
            worst,
            0.5,
            format!("max |slope - limit| / |b|: {}", parts.join(", ")),
        ))
    });
    (c2, c3)
}

fn criterion_4() -> CriterionResult {
    timed(4, "scaling identity", || {
        let zeros = j0_zeros(8)?;
        let grid = RadialGrid::new(4096)?;
        let mut worst: f64 = 0.0;
        for k in 1..=8 {
            worst = worst.max((scaling_coupling(k, k, grid, &zeros)? + 1.0).abs());
        }
        Ok((worst <= 1e-8, worst, 1e-8, "k = 1..8".into()))
    })
}

fn criterion_11() -> CriterionResult {
    timed(11, "Riccati oracle", || {
        let mut worst: f64 = 0.0;
        let mut cases = 0;
        for k in 1..=4 {
            for b0 in [0.001, 0.01, 0.05, -0.001, -0.01, -0.05] {
                let p = RiccatiParams::new(k, b0)?;
                for (s, b) in riccati_rk4_path(&p, 5.0, 1e-4, 50) {
                    worst = worst.max((b - riccati_exact(&p, s)?).abs());
                }
                cases += 1;
            }
        }
        Ok((
            worst <= 1e-10,
            worst,
            1e-10,
            format!("{cases} cases, s in [0, 5]"),
        ))
    })
}

/// Records with `|b_k| >= 1e-6`.
fn window(history: &[ModulationRecord], k: usize) -> Vec<&ModulationRecord> {
    history
        .iter()
        .filter(|r| r.coeffs[k - 1].abs() >= 1e-6)
        .collect()
}

/// Max relative deviation of the extracted `b_1` from the Riccati solution
/// started at the extracted `b_1(0)`.
pub fn modulation_fidelity(history: &[ModulationRecord]) -> Result<(f64, f64)> {
    let first = history
        .first()
        .ok_or(Error::InsufficientHistory { needed: 1, got: 0 })?;
    let p = RiccatiParams::new(1, first.coeffs[0])?;
    let mut worst: f64 = 0.0;
    for r in window(history, 1) {
        let exact = riccati_exact(&p, r.s)?;
        worst = worst.max(((r.coeffs[0] - exact) / exact).abs());
    }
    Ok((worst, 5.0 * first.coeffs[0].abs().sqrt()))
}

/// `(max over the first half, max over the second half)` of the bootstrap
/// ratio `E / |b_1|^3` (`k = 1`) or `E / b^2` (`k > 1`) over the window.
pub fn bootstrap_ratio(history: &[ModulationRecord], k: usize) -> Result<(f64, f64)> {
    let w = window(history, k);
    if w.len() < 4 {
        return Err(Error::InsufficientHistory {
            needed: 4,
            got: w.len(),
        });
    }
    let ratio = |r: &ModulationRecord| {
        if k == 1 {
            r.energy / r.coeffs[0].abs().powi(3)
        } else {
            r.energy / (r.b * r.b)
        }
    };
    let (s0, s1) = (w[0].s, w[w.len() - 1].s);
    let mid = 0.5 * (s0 + s1);
    let head = w
        .iter()
        .filter(|r| r.s <= mid)
        .map(|r| ratio(r))
        .fold(0.0, f64::max);
    let tail = w
        .iter()
        .filter(|r| r.s > mid)
        .map(|r| ratio(r))
        .fold(0.0, f64::max);
    Ok((head, tail))
}

struct K1Runs {
    plus: Result<(RunArtifacts, f64)>,
    minus: Result<(RunArtifacts, f64)>,
    fine: Result<RunArtifacts>,
}

struct K2Run {
    shoot: ShootingResult,
    perturbed_exits: [Option<f64>; 2],
    run: RunArtifacts,
    seconds: f64,
}

fn k1_config(base: &ScenarioConfig, b0: f64, grid: usize) -> ScenarioConfig {
    ScenarioConfig {
        mode: Mode::Run,
        k: 1,
        b_k0: Some(b0),
        grid,
        ds: None,
        s_max: 6.0,
        ..base.clone()
    }
}

fn k2_config(base: &ScenarioConfig) -> ScenarioConfig {
    let b_k0 = if base.k == 2 { base.b_k0() } else { 0.03 };
    ScenarioConfig {
        mode: Mode::Shoot,
        k: 2,
        b_k0: Some(b_k0),
        ds: None,
        s_max: 3.0,
        ..base.clone()
    }
}

fn k1_runs(base: &ScenarioConfig) -> K1Runs {
    let timed_sim = |cfg: ScenarioConfig| -> Result<(RunArtifacts, f64)> {
        let t0 = Instant::now();
        let a = simulate(&cfg, &[])?;
        Ok((a, t0.elapsed().as_secs_f64()))
    };
    let n = base.grid;
    let ((plus, minus), fine) = rayon::join(
        || {
            rayon::join(
                || timed_sim(k1_config(base, 0.01, n)),
                || timed_sim(k1_config(base, -0.01, n)),
            )
        },
        || simulate(&k1_config(base, 0.01, 2 * n), &[]),
    );
    K1Runs { plus, minus, fine }
}

fn k2_run(base: &ScenarioConfig) -> Result<K2Run> {
    let t0 = Instant::now();
    let cfg = k2_config(base);
    let map = exit_map(&cfg)?;
    let shoot = shoot_trapped(&map, &shooting_options(&cfg))?;
    let delta = 100.0 * shoot.tolerance;
    let b1 = shoot.found_initials[0];
    let (lo, hi) = rayon::join(
        || map.evaluate(&[b1 - delta], Watch::All),
        || map.evaluate(&[b1 + delta], Watch::All),
    );
    let perturbed_exits = [lo?.exit_s, hi?.exit_s];
    let run = simulate(
        &ScenarioConfig {
            mode: Mode::Run,
            ..cfg
        },
        &shoot.found_initials,
    )?;
    Ok(K2Run {
        shoot,
        perturbed_exits,
        run,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

fn shared<T>(r: &Result<T>) -> Result<&T> {
    r.as_ref().map_err(|e| Error::Scenario(e.to_string()))
}

fn dynamic_criteria(
    base: &ScenarioConfig,
    k1: &K1Runs,
    k2: &Result<K2Run>,
) -> Vec<CriterionResult> {
    let mut out = Vec::new();
    let pair =
        || -> Result<[&(RunArtifacts, f64); 2]> { Ok([shared(&k1.plus)?, shared(&k1.minus)?]) };
    let k2r = || shared(k2);
    let tol = base.tolerances.mass;

    out.push(timed(5, "conservation", || {
        let [p, m] = pair()?;
        let k2 = k2r()?;
        let fine = shared(&k1.fine)?;
        let worst =
            p.0.verdict
                .max_mass_drift
                .max(m.0.verdict.max_mass_drift)
                .max(k2.run.verdict.max_mass_drift);
        let gain = p.0.verdict.max_mass_drift / fine.verdict.max_mass_drift;
        Ok((
            worst <= tol && gain >= 3.0,
            worst,
            tol,
            format!("drift ratio N -> 2N: {gain:.2} (needs >= 3)"),
        ))
    }));
    out.push(timed(6, "terminal radius", || {
        let [p, m] = pair()?;
        let worst = p.0.verdict.terminal_defect.max(m.0.verdict.terminal_defect);
        let slow = p.1.max(m.1);
        Ok((
            worst <= 1e-4 && slow < 60.0,
            worst,
            1e-4,
            format!("k = 1, b0 = +-0.01, slowest run {slow:.1} s"),
        ))
    }));
    out.push(timed(7, "rate law k=1", || {
        let [p, m] = pair()?;
        let worst =
            p.0.verdict
                .fit
                .relative_error()
                .max(m.0.verdict.fit.relative_error());
        let parity = [&p.0, &m.0]
            .iter()
            .all(|a| a.verdict.regime_observed == a.verdict.regime_predicted);
        let r2 = p.0.verdict.fit.r_squared.min(m.0.verdict.fit.r_squared);
        Ok((
            worst <= 0.02 && parity && r2 >= 0.999,
            worst,
            0.02,
            format!(
                "b0 = +0.01 {} / -0.01 {}, parity {}, min R^2 {r2:.6}",
                p.0.verdict.regime_observed,
                m.0.verdict.regime_observed,
                if parity { "ok" } else { "violated" }
            ),
        ))
    }));
    out.push(timed(8, "rate law k=2", || {
        let k2 = k2r()?;
        let f = &k2.run.verdict.fit;
        let exits = k2.perturbed_exits.iter().all(Option::is_some);
        Ok((
            f.relative_error() <= 0.03 && exits && f.r_squared >= 0.999 && k2.seconds < 600.0,
            f.relative_error(),
            0.03,
            format!(
                "b_1(0) = {:.6e}, +-100 tol exits at s = {}, R^2 {:.6}, {:.1} s",
                k2.shoot.found_initials[0],
                k2.perturbed_exits
                    .iter()
                    .map(|e| e.map_or("never".to_string(), |s| format!("{s:.3}")))
                    .collect::<Vec<_>>()
                    .join(" / "),
                f.r_squared,
                k2.seconds
            ),
        ))
    }));
    out.push(timed(9, "modulation fidelity", || {
        let [p, m] = pair()?;
        let (ep, lp) = modulation_fidelity(&p.0.history)?;
        let (em, lm) = modulation_fidelity(&m.0.history)?;
        let ratio = (ep / lp).max(em / lm);
        Ok((
            ratio <= 1.0,
            ep.max(em),
            lp.min(lm),
            format!("relative errors {ep:.2e} / {em:.2e}"),
        ))
    }));
    out.push(timed(10, "energy bootstrap", || {
        let [p, m] = pair()?;
        let k2 = k2r()?;
        let mut worst: f64 = 0.0;
        let mut parts = Vec::new();
        for (label, h, k) in [
            ("k=1 +", &p.0.history, 1),
            ("k=1 -", &m.0.history, 1),
            ("k=2", &k2.run.history, 2),
        ] {
            let (head, tail) = bootstrap_ratio(h, k)?;
            worst = worst.max(tail / head);
            parts.push(format!("{label} {head:.2e}->{tail:.2e}"));
        }
        Ok((
            worst <= 1.0,
            worst,
            1.0,
            format!("head->tail max: {}", parts.join(", ")),
        ))
    }));
    out
}

/// Evaluate the suite. Independent groups run concurrently on the rayon pool.
pub fn run_suite(opts: &SuiteOptions) -> Result<Summary> {
    opts.base.validate()?;
    let t0 = Instant::now();
    let grid = opts.base.radial_grid()?;
    let quick = opts.quick;
    let (spectral, dynamic) = rayon::join(
        || {
            let c1 = criterion_1();
            let (c2, c3) = criterion_2_3(grid);
            vec![c1, c2, c3, criterion_4(), criterion_11()]
        },
        || {
            if quick {
                return Vec::new();
            }
            let (k1, k2) = rayon::join(|| k1_runs(&opts.base), || k2_run(&opts.base));
            if let Err(e) = &k2 {
                log::warn!("k = 2 scenario failed: {e}");
            }
            dynamic_criteria(&opts.base, &k1, &k2)
        },
    );
    let mut criteria: Vec<CriterionResult> = spectral.into_iter().chain(dynamic).collect();
    criteria.sort_by_key(|c| c.id);
    Ok(Summary {
        quick,
        criteria,
        seconds: t0.elapsed().as_secs_f64(),
    })
}
