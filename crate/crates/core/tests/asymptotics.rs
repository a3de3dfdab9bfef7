use stefan_lab::asymptotics::{
    classify_regime, decay_svg, fit_rate, predicted_terminal_radius, terminal_radius,
    time_reconstruction_check, Regime,
};
use stefan_lab::commands::{exit_map, shooting_options, simulate};
use stefan_lab::config::{Mode, ScenarioConfig};
use stefan_lab::reduced::shoot_trapped;
use stefan_lab::solver::{Record, TimeSeries};
use stefan_lab::Error;

fn series(f: impl Fn(f64) -> f64, t_end: f64, n: usize) -> TimeSeries {
    let records = (0..=n)
        .map(|i| {
            let t = t_end * i as f64 / n as f64;
            Record {
                s: t,
                t,
                lambda: f(t),
                a: 0.0,
                mass: 1.0,
                l2b_norm: 1e-13,
            }
        })
        .collect();
    TimeSeries { records }
}

#[test]
fn terminal_radius_examples() {
    assert_eq!(predicted_terminal_radius(0.0).unwrap(), 1.0);
    let p = predicted_terminal_radius(-0.02 * std::f64::consts::PI).unwrap();
    assert!((p - 0.98f64.sqrt()).abs() < 1e-15 && (p - 0.98995).abs() < 1e-5);
    let flat = series(|_| 1.0, 1.0, 10);
    assert_eq!(terminal_radius(&flat, 0.0, 1e-12).unwrap(), (1.0, 1.0));
    assert!(matches!(
        terminal_radius(&flat, 0.0, 1e-14),
        Err(Error::RunNotConverged { .. })
    ));
    let grid: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.1).collect();
    let radii: Vec<f64> = grid
        .iter()
        .map(|u| predicted_terminal_radius(*u).unwrap())
        .collect();
    assert!(radii.windows(2).all(|w| w[1] > w[0]));
    assert!(predicted_terminal_radius(-4.0).is_err());
}

#[test]
fn exact_exponential_rate() {
    let lambda_inf = 1.02;
    let ts = series(|t| lambda_inf + 0.1 * (-3.0 * t).exp(), 5.0, 500);
    let fit = fit_rate(&ts, lambda_inf, 3.0 * lambda_inf * lambda_inf).unwrap();
    assert!((fit.rate_fitted - 3.0).abs() < 1e-6);
    assert!(fit.relative_error() < 1e-6 && fit.r_squared > 0.999999);
    assert_eq!(fit.amplitude_sign, 1.0);
    let svg = decay_svg(&ts, &fit);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let short = series(|t| lambda_inf + 0.1 * (-3.0 * t).exp(), 1.0, 100);
    assert!(matches!(
        fit_rate(&short, lambda_inf, 3.0),
        Err(Error::InsufficientDecay { .. })
    ));
}

#[test]
fn regime_rule() {
    assert_eq!(classify_regime(1, 0.01).unwrap(), Regime::Melting);
    assert_eq!(classify_regime(2, 0.01).unwrap(), Regime::Freezing);
    assert_eq!(classify_regime(2, -0.01).unwrap(), Regime::Melting);
    assert_eq!(classify_regime(3, -0.01).unwrap(), Regime::Freezing);
    assert!(matches!(
        classify_regime(1, 0.0),
        Err(Error::ZeroInitialMode)
    ));
}

#[test]
fn time_reconstruction() {
    let ts = series(|_| 1.0, 2.0, 40);
    assert_eq!(time_reconstruction_check(&ts), 0.0);
}

// The four scenarios k in {1, 2} with both signs of b_k(0), at N = 512.
#[test]
fn rate_and_parity_are_coherent() {
    for (k, b) in [(1, 0.01), (1, -0.01), (2, 0.03), (2, -0.03)] {
        let mut cfg = ScenarioConfig {
            k,
            b_k0: Some(b),
            grid: 512,
            ..ScenarioConfig::default()
        };
        cfg.tolerances.mass = 4e-6;
        let lower = if k == 1 {
            Vec::new()
        } else {
            let shoot = ScenarioConfig {
                mode: Mode::Shoot,
                ..cfg.clone()
            };
            shoot_trapped(&exit_map(&shoot).unwrap(), &shooting_options(&shoot))
                .unwrap()
                .found_initials
        };
        let v = simulate(&cfg, &lower).unwrap().verdict;
        assert_eq!(
            v.regime_observed,
            classify_regime(k, b).unwrap(),
            "k = {k}, b = {b}"
        );
        assert_eq!(
            v.regime_observed,
            Regime::from_terminal_radius(v.lambda_inf_predicted)
        );
        assert!(
            v.fit.relative_error() <= cfg.rate_tolerance(),
            "k = {k}, b = {b}: {}",
            v.fit.relative_error()
        );
        assert!(v.time_defect < 1e-6);
        assert!(v.passed, "k = {k}, b = {b}");
    }
}
