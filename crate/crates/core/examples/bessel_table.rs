//! Zeros of `J0`, the Dirichlet eigenvalues `lambda_j = r_j^2` of the unit
//! disk and the normalized eigenfunctions `eta_j`.
//!
//! ```text
//! cargo run --release --example bessel_table [-- zeros.csv]
//! ```

use stefan_lab::bessel::{eta, j0, j0_zeros, scaling_coupling, write_zero_table};
use stefan_lab::weighted_space::l2b_norm;
use stefan_lab::weighted_space::WeightParam;
use stefan_lab::RadialGrid;

fn main() -> stefan_lab::Result<()> {
    let zeros = j0_zeros(10)?;
    let grid = RadialGrid::new(2048)?;
    println!(" j  r_j                 lambda_j             gap      J0(r_j)    |eta_j|   d eta_j(1)   <L eta_j, eta_j>");
    for (i, z) in zeros.iter().enumerate() {
        let gap = zeros.get(i + 1).map_or(f64::NAN, |n| n.lambda - z.lambda);
        let e = eta(z.index, grid, &zeros)?;
        let norm = l2b_norm(&e.values, WeightParam::flat());
        let c = scaling_coupling(z.index, z.index, grid, &zeros)?;
        println!(
            "{:>2}  {:.15}  {:>19.14}  {:>7.3}  {:>9.1e}  {:.8}  {:>11.7}  {:.10}",
            z.index,
            z.r,
            z.lambda,
            gap,
            j0(z.r),
            norm,
            e.boundary_slope,
            c
        );
    }
    println!("off-diagonal <Lambda eta_k, eta_j>_0:");
    for k in 2..=4 {
        let row: Vec<String> = (1..k)
            .map(|j| scaling_coupling(k, j, grid, &zeros).map(|c| format!("{c:+.8}")))
            .collect::<stefan_lab::Result<_>>()?;
        println!("  k = {k}: {}", row.join("  "));
    }
    if let Some(path) = std::env::args().nth(1) {
        write_zero_table(std::path::Path::new(&path), &zeros)?;
        println!("wrote {path}");
    }
    Ok(())
}
