use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use stefan_lab::commands::{cmd_run, cmd_shoot, cmd_spectrum, cmd_verify_all};
use stefan_lab::config::{Mode, ScenarioConfig};

/// Interior radial Stefan problem laboratory.
///
/// Exit codes: 0 pass, 1 configuration error, 2 verification failure,
/// 3 dynamics failure (boundary blowup, collapse of the radius).
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Scenario file (TOML); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Mode index k.
    #[arg(long)]
    k: Option<usize>,
    /// b_k(0); in spectrum mode, the weight b of the eigen table.
    #[arg(long, visible_alias = "b", allow_negative_numbers = true)]
    b0: Option<f64>,
    /// Grid intervals N.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    smax: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// verify-all: spectral and closed-form criteria only.
    #[arg(long)]
    quick: bool,
    /// verify-all: print the summary as JSON.
    #[arg(long)]
    json: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn scenario(cli: &Cli) -> stefan_lab::Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(m) = cli.mode {
        cfg.mode = m;
    }
    if let Some(k) = cli.k {
        cfg.k = k;
    }
    if let Some(b) = cli.b0 {
        if cfg.mode == Mode::Spectrum {
            cfg.spectrum.b = b;
        } else {
            cfg.b_k0 = Some(b);
        }
    }
    if let Some(n) = cli.grid {
        cfg.grid = n;
    }
    if let Some(s) = cli.smax {
        match cfg.mode {
            Mode::Shoot => cfg.shoot.s_max = Some(s),
            _ => cfg.s_max = s,
        }
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = scenario(&cli).and_then(|cfg| {
        if cfg.jobs > 0 {
            // Fails only if a pool already exists.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.jobs)
                .build_global();
        }
        match cfg.mode {
            Mode::Spectrum => cmd_spectrum(&cfg),
            Mode::Run => cmd_run(&cfg),
            Mode::Shoot => cmd_shoot(&cfg),
            Mode::VerifyAll => cmd_verify_all(&cfg, cli.quick, cli.json),
        }
    });
    match outcome {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            for f in &report.files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::from(report.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
