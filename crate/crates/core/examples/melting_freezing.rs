//! A small first-mode perturbation of the unit disk: positive data melts
//! (the disk grows), negative data freezes. The radius approaches
//! `lambda_inf = sqrt(1 + int u0 / pi)` at the rate `lambda_1 / lambda_inf^2`.
//!
//! ```text
//! cargo run --release --example melting_freezing [-- out_dir]
//! ```

use std::path::PathBuf;

use stefan_lab::asymptotics::decay_svg;
use stefan_lab::commands::simulate;
use stefan_lab::config::ScenarioConfig;

fn main() -> stefan_lab::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from);
    for b0 in [0.01, -0.01] {
        let cfg = ScenarioConfig {
            b_k0: Some(b0),
            ..ScenarioConfig::default()
        };
        let art = simulate(&cfg, &[])?;
        let v = &art.verdict;
        println!(
            "b_1(0) = {b0:+}: {} (parity rule says {})",
            v.regime_observed, v.regime_predicted
        );
        println!("  int u0            = {:+.6e}", art.u0_integral);
        println!("  lambda_final      = {:.12}", v.lambda_final);
        println!(
            "  lambda_inf        = {:.12}  (|diff| {:.2e})",
            v.lambda_inf_predicted, v.terminal_defect
        );
        println!(
            "  rate              = {:.6}  predicted {:.6}  ({:.3}%)",
            v.fit.rate_fitted,
            v.fit.rate_predicted,
            100.0 * v.fit.relative_error()
        );
        println!(
            "  fit window t      = [{:.3}, {:.3}], R^2 = {:.6}",
            v.fit.window.0, v.fit.window.1, v.fit.r_squared
        );
        println!(
            "  max mass drift    = {:.2e}, t(s) defect {:.2e}",
            v.max_mass_drift, v.time_defect
        );
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir).ok();
            let stem = if b0 > 0.0 { "melting" } else { "freezing" };
            art.series.write_csv(&dir.join(format!("{stem}.csv")))?;
            std::fs::write(
                dir.join(format!("{stem}.svg")),
                decay_svg(&art.series, &v.fit),
            )
            .ok();
        }
    }
    Ok(())
}
