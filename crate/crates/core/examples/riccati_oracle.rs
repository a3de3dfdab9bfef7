//! The scalar modal law `b_s + lambda_k b + sigma sqrt(2 lambda_k) b^2 = 0`
//! in closed form against RK4, and the leading k-mode system.
//!
//! ```text
//! cargo run --release --example riccati_oracle
//! ```

use stefan_lab::reduced::{
    integrate_system, riccati_exact, riccati_limit, riccati_rk4_path, ModalSystem, RiccatiParams,
};

fn main() -> stefan_lab::Result<()> {
    println!(" k   b0       max |exact - RK4|   lim e^(lambda s) b(s)");
    for k in 1..=4 {
        for b0 in [0.05, -0.05, 0.001] {
            let p = RiccatiParams::new(k, b0)?;
            let mut worst: f64 = 0.0;
            for (s, b) in riccati_rk4_path(&p, 5.0, 1e-4, 10) {
                worst = worst.max((b - riccati_exact(&p, s)?).abs());
            }
            println!(
                "{k:>2}  {b0:+.3}   {worst:.3e}           {:+.10e}",
                riccati_limit(&p)
            );
        }
    }
    let sys = ModalSystem::new(3)?;
    println!("k = 3 system, couplings {:?}", sys.coupling);
    let tr = integrate_system(&sys, &[0.0, 0.0, 0.03], 0.3)?;
    for (s, b) in tr.s.iter().zip(&tr.b).step_by(50) {
        println!(
            "  s = {s:.2}  b = [{:+.4e}, {:+.4e}, {:+.4e}]",
            b[0], b[1], b[2]
        );
    }
    Ok(())
}
