//! The full acceptance suite, or its spectral part with `quick`.
//!
//! ```text
//! cargo run --release --example verify_all [-- quick]
//! ```

use stefan_lab::verify::{run_suite, SuiteOptions};

fn main() -> stefan_lab::Result<()> {
    let quick = std::env::args().nth(1).is_some_and(|a| a == "quick");
    let summary = run_suite(&SuiteOptions {
        quick,
        ..SuiteOptions::default()
    })?;
    for line in summary.table() {
        println!("{line}");
    }
    Ok(())
}
