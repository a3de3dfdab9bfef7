//! Decompose a k = 1 run as `v = b_1 psi_{b_1,1} + eps` with the weight chosen
//! self-consistently, and compare `b_1(s)` with the closed-form Riccati law.
//!
//! ```text
//! cargo run --release --example modulation_tracking
//! ```

use std::ops::ControlFlow;

use stefan_lab::modulation::{
    boundary_law_check, modulation_residual, ModulationTracker, ParameterMode,
};
use stefan_lab::reduced::{riccati_exact, RiccatiParams};
use stefan_lab::solver::{run, RunSettings, SimState};
use stefan_lab::spectrum::eigenpairs;
use stefan_lab::weighted_space::WeightParam;
use stefan_lab::RadialGrid;

fn main() -> stefan_lab::Result<()> {
    let grid = RadialGrid::new(1024)?;
    let b0 = 0.01;
    let psi = eigenpairs(grid, WeightParam::new(b0)?, 1)?.remove(0).psi;
    let mut tracker = ModulationTracker::new(1, ParameterMode::SelfConsistent)?;
    let mut boundary: f64 = 0.0;
    let settings = RunSettings {
        s_max: 2.0,
        record_every: 10,
        ..RunSettings::default()
    };
    run(&settings, SimState::initial(psi.scaled(b0))?, |st| {
        let ms = tracker.observe(st)?;
        boundary = boundary.max(boundary_law_check(st, &ms)? / ms.coeffs[0].abs().powi(2));
        Ok(ControlFlow::Continue(()))
    })?;
    let history = tracker.history();
    let p = RiccatiParams::new(1, history[0].coeffs[0])?;
    let diag = modulation_residual(history, 1, grid)?;
    println!("   s      b_1(s)          Riccati         rel. err   E / |b_1|^3   residual / b_1^2");
    for (i, r) in history.iter().enumerate().step_by(20) {
        let exact = riccati_exact(&p, r.s)?;
        let ratio = diag
            .index
            .iter()
            .position(|&x| x == i)
            .map_or(f64::NAN, |pos| diag.residuals[pos][0] / r.coeffs[0].powi(2));
        println!(
            "{:6.3}  {:+.8e}  {:+.8e}  {:9.2e}  {:11.3e}  {:9.3}",
            r.s,
            r.coeffs[0],
            exact,
            (r.coeffs[0] - exact) / exact,
            r.energy / r.coeffs[0].abs().powi(3),
            ratio
        );
    }
    println!("max |a + sqrt(2 lambda_1) b_1| / b_1^2 = {boundary:.3}");
    Ok(())
}
