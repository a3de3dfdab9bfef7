//! Second-mode dynamics. The first mode is unstable relative to the second,
//! so `b_1(0)` has to be tuned by bisection for the trajectory to follow the
//! `k = 2` law; the tuned run then approaches `lambda_inf` at the rate
//! `lambda_2 / lambda_inf^2`.
//!
//! ```text
//! cargo run --release --example trapped_k2 [-- N]
//! ```

use stefan_lab::commands::{exit_map, shooting_options, simulate};
use stefan_lab::config::{Mode, ScenarioConfig};
use stefan_lab::reduced::{shoot_trapped, ExitMap, Watch};

fn main() -> stefan_lab::Result<()> {
    let grid = std::env::args()
        .nth(1)
        .map_or(Ok(1024), |a| a.parse())
        .expect("grid size");
    let cfg = ScenarioConfig {
        mode: Mode::Shoot,
        k: 2,
        grid,
        s_max: 3.0,
        ..ScenarioConfig::default()
    };
    cfg.validate()?;
    let map = exit_map(&cfg)?;
    for b1 in [-1e-3, 0.0, 1e-3] {
        let e = map.evaluate(&[b1], Watch::All)?;
        println!(
            "b_1(0) = {b1:+.0e}: V_1 leaves the unit ball at s = {:?}",
            e.exit_s
        );
    }
    let res = shoot_trapped(&map, &shooting_options(&cfg))?;
    println!(
        "trapped b_1(0) = {:+.12e} after {} bisections, max V_1^2 = {:.3e}",
        res.found_initials[0],
        res.bracket_widths.len(),
        res.max_v2
    );
    for d in [-100.0, 100.0] {
        let e = map.evaluate(&[res.found_initials[0] + d * res.tolerance], Watch::All)?;
        println!("  shifted by {d:+} tol: exit at s = {:?}", e.exit_s);
    }
    let art = simulate(
        &ScenarioConfig {
            mode: Mode::Run,
            ..cfg
        },
        &res.found_initials,
    )?;
    let v = &art.verdict;
    println!(
        "{} (parity rule says {}), lambda_final = {:.12}",
        v.regime_observed, v.regime_predicted, v.lambda_final
    );
    println!(
        "rate {:.5} predicted {:.5} ({:.2}%), R^2 {:.6}",
        v.fit.rate_fitted,
        v.fit.rate_predicted,
        100.0 * v.fit.relative_error(),
        v.fit.r_squared
    );
    Ok(())
}
