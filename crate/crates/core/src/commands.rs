//! Command drivers behind the `stefan-lab` binary. Each returns a
//! [`CommandReport`]; the caller maps it (or the error) to an exit code.

use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::asymptotics::{
    classify_regime, decay_svg, fit_rate, predicted_terminal_radius, time_reconstruction_check,
    Regime, Verdict,
};
use crate::bessel::j0_zeros;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, RadialGrid};
use crate::modulation::{
    modulation_residual, write_modulation_csv, AdiabaticSchedule, EigenTable, ModulationRecord,
    ModulationTracker, ParameterMode,
};
use crate::reduced::{shoot_trapped, PdeExitMap, ShootingOptions, ShootingResult};
use crate::solver::{run, RunSettings, SimState, TimeSeries};
use crate::spectrum::{
    eigenpairs, perturbation_sweep, rayleigh_minimum, spectral_gap_check, write_eigen_table,
    EigenPair, PerturbationReport,
};
use crate::weighted_space::{inner_b, radial_integral, WeightParam};

/// Outcome of a command.
#[derive(Debug, Clone, Default)]
pub struct CommandReport {
    pub passed: bool,
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

impl CommandReport {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            0
        } else {
            2
        }
    }
}

fn write(path: &Path, text: &str) -> Result<PathBuf> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// One named spectral invariant.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SpectralCheck {
    pub name: String,
    pub value: f64,
    pub limit: String,
    pub passed: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SpectrumReport {
    pub b: f64,
    pub intervals: usize,
    pub checks: Vec<SpectralCheck>,
    pub sweeps: Vec<PerturbationReport>,
}

fn check(
    name: impl Into<String>,
    value: f64,
    limit: impl Into<String>,
    passed: bool,
) -> SpectralCheck {
    SpectralCheck {
        name: name.into(),
        value,
        limit: limit.into(),
        passed,
    }
}

/// Spectral invariants of `H_b` at weight `w` on `grid`.
pub fn spectral_invariants(
    grid: RadialGrid,
    w: WeightParam,
    pairs: &[EigenPair],
    seed: u64,
) -> Result<Vec<SpectralCheck>> {
    let b = w.b();
    let mut out = Vec::new();
    let ground = &pairs[0].psi;
    let min_interior = ground.values()[..grid.intervals()]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    out.push(check(
        "ground state positive on [0, 1)",
        min_interior,
        "> 0",
        min_interior > 0.0,
    ));
    let rq = rayleigh_minimum(grid, w, 100, seed)?;
    out.push(check(
        "Rayleigh minimality over 100 profiles",
        rq - pairs[0].lambda,
        ">= 0",
        rq >= pairs[0].lambda,
    ));
    let k = pairs.len().min(3);
    let gap = spectral_gap_check(grid, w, k, seed)?;
    let next = eigenpairs(grid, w, k + 1)?[k].lambda;
    out.push(check(
        format!("gap after psi_1..psi_{k}"),
        gap - next,
        ">= -1e-9 relative",
        gap >= next * (1.0 - 1e-9),
    ));
    let norm_err = pairs
        .iter()
        .map(|p| (crate::weighted_space::l2b_norm(&p.psi, w) - 1.0).abs())
        .fold(0.0, f64::max);
    out.push(check(
        "unit L2_b norm",
        norm_err,
        "<= 1e-12",
        norm_err <= 1e-12,
    ));
    let zeros = j0_zeros(pairs.len())?;
    let mut overlap_err: f64 = 0.0;
    for p in pairs {
        let e = crate::bessel::eta(p.index, grid, &zeros)?.values;
        overlap_err = overlap_err.max((inner_b(&p.psi, &e, w)? - 1.0).abs());
    }
    let overlap_limit = 10.0 * b.abs() + 1e-6;
    out.push(check(
        "<psi_k, eta_k>_b - 1",
        overlap_err,
        format!("<= {overlap_limit:.1e}"),
        overlap_err <= overlap_limit,
    ));
    let coarse = eigenpairs(grid, w, k)?;
    let fine = eigenpairs(grid.refined(), w, k)?;
    let finest = eigenpairs(grid.refined().refined(), w, k)?;
    for j in 0..k {
        let order = ((coarse[j].lambda - fine[j].lambda) / (fine[j].lambda - finest[j].lambda))
            .abs()
            .log2();
        out.push(check(
            format!("grid order lambda_{}", j + 1),
            order,
            "in [1.8, 2.2]",
            (1.8..=2.2).contains(&order),
        ));
    }
    Ok(out)
}

/// Eigen table, perturbation sweeps for `k <= 3` and the spectral invariants.
pub fn cmd_spectrum(cfg: &ScenarioConfig) -> Result<CommandReport> {
    let grid = cfg.radial_grid()?;
    ensure_dir(&cfg.out)?;
    let b = cfg.spectrum.b;
    let w = if b == 0.0 {
        WeightParam::flat()
    } else {
        WeightParam::new(b)?
    };
    let mut pairs = eigenpairs(grid, WeightParam::flat(), cfg.spectrum.count)?;
    if b != 0.0 {
        pairs.extend(eigenpairs(grid, w, cfg.spectrum.count)?);
    }
    let mut report = CommandReport::default();
    let table = cfg.out.join("eigen_table.csv");
    write_eigen_table(&table, &pairs)?;
    report.files.push(table);
    let at_b: Vec<EigenPair> = pairs.iter().filter(|p| p.b == b).cloned().collect();
    let checks = spectral_invariants(grid, w, &at_b, cfg.seed)?;
    let sweeps: Vec<PerturbationReport> = {
        use rayon::prelude::*;
        (1..=cfg.spectrum.count.min(3))
            .into_par_iter()
            .map(|k| perturbation_sweep(grid, k, &cfg.spectrum.sweep))
            .collect::<Result<_>>()?
    };
    let mut all = checks;
    for s in &sweeps {
        all.push(check(
            format!("perturbation order k={}", s.k),
            s.defect_order,
            ">= 1.8",
            s.defect_order >= 1.8,
        ));
        all.push(check(
            format!("Richardson perturbation order k={}", s.k),
            s.defect_order_richardson,
            ">= 1.8",
            s.defect_order_richardson >= 1.8,
        ));
    }
    for p in &at_b {
        report.lines.push(format!(
            "b = {:<8} k = {:<2} lambda = {:.10}",
            p.b, p.index, p.lambda
        ));
    }
    for c in &all {
        report.lines.push(format!(
            "{} {:<40} {:.3e} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.limit
        ));
    }
    report.passed = all.iter().all(|c| c.passed);
    let json = serde_json::to_string_pretty(&SpectrumReport {
        b,
        intervals: grid.intervals(),
        checks: all,
        sweeps,
    })?;
    report
        .files
        .push(write(&cfg.out.join("spectrum_report.json"), &json)?);
    Ok(report)
}

/// Initial profile `sum_{j<k} b_j psi_{A,j} + b_k0 psi_{A,k}` with
/// `A = b_k0` for `k = 1` and `A` the adiabatic amplitude otherwise.
pub fn initial_profile(
    grid: RadialGrid,
    k: usize,
    b_k0: f64,
    lower: &[f64],
    amplitude: f64,
) -> Result<GridFunction> {
    let weight = if k == 1 { b_k0 } else { amplitude };
    let pairs = eigenpairs(grid, WeightParam::new(weight)?, k)?;
    let mut v = pairs[k - 1].psi.scaled(b_k0);
    for (b, p) in lower.iter().zip(&pairs) {
        v.add_scaled(*b, &p.psi)?;
    }
    Ok(v)
}

/// Everything produced by one run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub verdict: Verdict,
    pub series: TimeSeries,
    pub history: Vec<ModulationRecord>,
    pub u0_integral: f64,
}

fn lower_modes(cfg: &ScenarioConfig) -> Result<Vec<f64>> {
    if cfg.k == 1 {
        return Ok(Vec::new());
    }
    if !cfg.initial_lower.is_empty() {
        return Ok(cfg.initial_lower.clone());
    }
    let Some(path) = &cfg.shoot_result else {
        return Err(Error::Config(format!(
            "k = {} needs initial_lower or shoot_result",
            cfg.k
        )));
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let res: ShootingResult = serde_json::from_str(&text)?;
    if res.k != cfg.k || res.b_k0 != cfg.b_k0() {
        return Err(Error::Config(format!(
            "{} holds k = {}, b_k0 = {}; the scenario has k = {}, b_k0 = {}",
            path.display(),
            res.k,
            res.b_k0,
            cfg.k,
            cfg.b_k0()
        )));
    }
    Ok(res.found_initials)
}

/// Run one scenario to the norm floor (or `s_max`) with modulation tracking
/// and fit the approach rate.
pub fn simulate(cfg: &ScenarioConfig, lower: &[f64]) -> Result<RunArtifacts> {
    let grid = cfg.radial_grid()?;
    let (k, b_k0) = (cfg.k, cfg.b_k0());
    let v0 = initial_profile(grid, k, b_k0, lower, cfg.shoot.amplitude)?;
    let u0_integral = 2.0 * std::f64::consts::PI * radial_integral(&v0);
    let lambda_inf = predicted_terminal_radius(u0_integral)?;
    let lambda_k = j0_zeros(k)?[k - 1].lambda;
    let mode = if k == 1 {
        ParameterMode::SelfConsistent
    } else {
        let table = EigenTable::build(grid, k, cfg.shoot.amplitude, 1.1, 1e-7)?;
        ParameterMode::Adiabatic {
            schedule: AdiabaticSchedule {
                amplitude: cfg.shoot.amplitude,
                lambda_k,
            },
            table: Arc::new(table),
        }
    };
    let mut tracker = ModulationTracker::new(k, mode)?;
    let settings = RunSettings {
        ds: cfg.ds(),
        s_max: cfg.s_max,
        record_every: cfg.record_every,
        mass_tolerance: cfg.tolerances.mass,
        norm_floor: cfg.tolerances.norm_floor,
    };
    let tracking_floor = 1e3 * cfg.tolerances.norm_floor;
    let out = run(&settings, SimState::initial(v0)?, |st| {
        // Below this norm the decomposition is rounding noise.
        if st.norm() > tracking_floor {
            tracker.observe(st)?;
        }
        Ok(ControlFlow::Continue(()))
    })?;
    // A horizon too short for the fit is reported as such first.
    let fit = fit_rate(&out.series, lambda_inf, lambda_k)?;
    if !out.reached_floor {
        return Err(Error::RunNotConverged {
            final_norm: out.final_state.norm(),
        });
    }
    let last = out.series.last().expect("nonempty");
    let regime_predicted = classify_regime(k, b_k0)?;
    let regime_observed = Regime::from_terminal_radius(last.lambda);
    let terminal_defect = (last.lambda - lambda_inf).abs();
    let rate_tolerance = cfg.rate_tolerance();
    let passed = regime_predicted == regime_observed
        && terminal_defect <= cfg.tolerances.terminal
        && fit.relative_error() <= rate_tolerance
        && fit.amplitude_sign
            == if regime_observed == Regime::Melting {
                -1.0
            } else {
                1.0
            };
    let verdict = Verdict {
        k,
        b_k0,
        regime_predicted,
        regime_observed,
        lambda_final: last.lambda,
        lambda_inf_predicted: lambda_inf,
        terminal_defect,
        max_mass_drift: out.series.max_mass_drift(),
        time_defect: time_reconstruction_check(&out.series),
        fit,
        rate_tolerance,
        terminal_tolerance: cfg.tolerances.terminal,
        passed,
    };
    Ok(RunArtifacts {
        verdict,
        series: out.series,
        history: tracker.into_history(),
        u0_integral,
    })
}

/// Time series CSV, modulation CSV, JSON verdict and SVG decay plot.
pub fn cmd_run(cfg: &ScenarioConfig) -> Result<CommandReport> {
    let lower = lower_modes(cfg)?;
    let art = simulate(cfg, &lower)?;
    ensure_dir(&cfg.out)?;
    let stem = format!("run_k{}", cfg.k);
    let mut report = CommandReport {
        passed: art.verdict.passed,
        ..Default::default()
    };
    let ts = cfg.out.join(format!("{stem}_timeseries.csv"));
    art.series.write_csv(&ts)?;
    report.files.push(ts);
    if art.history.len() >= 5 {
        let diag = modulation_residual(&art.history, cfg.k, cfg.radial_grid()?)?;
        let path = cfg.out.join(format!("{stem}_modulation.csv"));
        write_modulation_csv(&path, &art.history, Some(&diag))?;
        report.files.push(path);
    }
    let vj = cfg.out.join(format!("{stem}_verdict.json"));
    art.verdict.write_json(&vj)?;
    report.files.push(vj);
    report.files.push(write(
        &cfg.out.join(format!("{stem}_decay.svg")),
        &decay_svg(&art.series, &art.verdict.fit),
    )?);
    let v = &art.verdict;
    report.lines.push(format!(
        "k = {} b_k0 = {}: {} (predicted {}), lambda_final = {:.10}, predicted {:.10}",
        v.k, v.b_k0, v.regime_observed, v.regime_predicted, v.lambda_final, v.lambda_inf_predicted
    ));
    report.lines.push(format!(
        "rate {:.6} vs {:.6} ({:.3}% off, tolerance {}%), max mass drift {:.2e}",
        v.fit.rate_fitted,
        v.fit.rate_predicted,
        100.0 * v.fit.relative_error(),
        100.0 * v.rate_tolerance,
        v.max_mass_drift
    ));
    Ok(report)
}

/// Evaluation map for shooting as configured.
pub fn exit_map(cfg: &ScenarioConfig) -> Result<PdeExitMap> {
    let settings = RunSettings {
        ds: cfg.ds(),
        s_max: cfg.shoot_s_max(),
        record_every: cfg.record_every,
        mass_tolerance: cfg.tolerances.mass,
        // The trap is decided by V_j; a small |v| says nothing about it.
        norm_floor: 0.0,
    };
    PdeExitMap::new(
        cfg.radial_grid()?,
        cfg.k,
        cfg.b_k0(),
        cfg.shoot.amplitude,
        cfg.shoot.ceiling,
        settings,
    )
}

pub fn shooting_options(cfg: &ScenarioConfig) -> ShootingOptions {
    ShootingOptions {
        half_width: cfg.shoot.half_width,
        tolerance: cfg.shoot.tolerance,
        ..Default::default()
    }
}

/// Trapped lower-mode data, written as `shoot_k{k}.json`.
pub fn cmd_shoot(cfg: &ScenarioConfig) -> Result<CommandReport> {
    if !(2..=3).contains(&cfg.k) {
        return Err(Error::Config(format!(
            "shooting supports k = 2 or 3, got {}",
            cfg.k
        )));
    }
    let map = exit_map(cfg)?;
    let res = shoot_trapped(&map, &shooting_options(cfg))?;
    ensure_dir(&cfg.out)?;
    let path = cfg.out.join(format!("shoot_k{}.json", cfg.k));
    let mut report = CommandReport {
        passed: true,
        ..Default::default()
    };
    report
        .files
        .push(write(&path, &serde_json::to_string_pretty(&res)?)?);
    report.lines.push(format!(
        "k = {} b_k0 = {}: trapped lower data {:?}, max sum V_j^2 = {:.3e}",
        res.k, res.b_k0, res.found_initials, res.max_v2
    ));
    Ok(report)
}

/// Acceptance suite; see [`crate::verify`].
pub fn cmd_verify_all(cfg: &ScenarioConfig, quick: bool, json: bool) -> Result<CommandReport> {
    let summary = crate::verify::run_suite(&crate::verify::SuiteOptions::from_config(cfg, quick))?;
    ensure_dir(&cfg.out)?;
    let mut report = CommandReport {
        passed: summary.all_passed(),
        ..Default::default()
    };
    let path = cfg.out.join("verify_summary.json");
    let text = serde_json::to_string_pretty(&summary)?;
    report.files.push(write(&path, &text)?);
    if json {
        report.lines.push(text);
    } else {
        report.lines.extend(summary.table());
    }
    Ok(report)
}
