//! Eigenvalues of the drifted Laplacian against the weight parameter `b`.
//!
//! ```text
//! cargo run --release --example spectrum_sweep
//! ```

use stefan_lab::spectrum::perturbation_sweep;
use stefan_lab::RadialGrid;

fn main() -> stefan_lab::Result<()> {
    let grid = RadialGrid::new(1024)?;
    let bs = [0.005, 0.01, 0.02];
    for k in 1..=3 {
        let r = perturbation_sweep(grid, k, &bs)?;
        println!(
            "k = {k}  lambda_k = {:.12}  discrete lambda_0 = {:.12}",
            r.lambda_k, r.lambda_0
        );
        println!("  slope d lambda / db = {:.6}", r.slope);
        println!(
            "  defect order {:.3} (grid)  {:.3} (Richardson)",
            r.defect_order, r.defect_order_richardson
        );
        for (i, b) in bs.iter().enumerate() {
            println!(
                "  b = {b:<6} lambda_b = {:.10}  defect = {:.3e}  rich = {:.3e}  anti = {:.3e}  slope(1) = {:.6} (limit {:.6})",
                r.lambda_b[i], r.defect[i], r.defect_richardson[i], r.antisymmetry[i], r.boundary_slopes[i], r.boundary_slope_limit
            );
        }
        for j in 0..k.saturating_sub(1) {
            println!(
                "  mu_{}{k}: hat {:?} projection {:?} predicted {:?} d/db {:?} vs {:.6}",
                j + 1,
                r.mu_hat[j],
                r.mu_projection[j],
                r.mu_predicted[j],
                r.dmu_db[j],
                r.dmu_db_predicted[j]
            );
        }
        println!("  max residual {:.2e}", r.max_residual);
    }
    Ok(())
}
