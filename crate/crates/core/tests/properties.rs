use proptest::prelude::*;

use stefan_lab::asymptotics::{classify_regime, predicted_terminal_radius};
use stefan_lab::config::{Mode, ScenarioConfig};
use stefan_lab::reduced::{
    riccati_exact, riccati_rk4, shoot_trapped, ModalSystem, ReducedExitMap, RiccatiParams,
    ShootingOptions,
};
use stefan_lab::weighted_space::{inner_b, WeightParam};
use stefan_lab::{GridFunction, RadialGrid};

fn profile(grid: RadialGrid, c: &[f64]) -> GridFunction {
    GridFunction::from_fn(grid, |y| {
        (1.0 - y * y)
            * c.iter()
                .enumerate()
                .map(|(i, a)| a * y.powi(i as i32))
                .sum::<f64>()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn riccati_closed_form_matches_rk4(k in 1usize..=4, b0 in -0.05f64..0.05, s in 0.0f64..5.0) {
        let p = RiccatiParams::new(k, b0).unwrap();
        let exact = riccati_exact(&p, s).unwrap();
        prop_assert!((exact - riccati_rk4(&p, s, 1e-4)).abs() <= 1e-10);
    }

    #[test]
    fn positive_k1_data_decrease_monotonically(b0 in 1e-4f64..0.05) {
        let p = RiccatiParams::new(1, b0).unwrap();
        let mut prev = b0;
        for i in 1..=100 {
            let b = riccati_exact(&p, i as f64 * 0.05).unwrap();
            prop_assert!(b > 0.0 && b < prev);
            prev = b;
        }
    }

    #[test]
    fn terminal_radius_is_increasing(u in -3.0f64..3.0, du in 1e-6f64..1.0) {
        prop_assert!(predicted_terminal_radius(u + du).unwrap() > predicted_terminal_radius(u).unwrap());
    }

    #[test]
    fn regime_flips_with_parity(k in 1usize..=7, b in prop_oneof![-0.05f64..-1e-6, 1e-6f64..0.05]) {
        prop_assert_eq!(classify_regime(k, b).unwrap(), classify_regime(k + 1, -b).unwrap());
        prop_assert_ne!(classify_regime(k, b).unwrap(), classify_regime(k, -b).unwrap());
    }

    #[test]
    fn weighted_product_is_symmetric_and_bilinear(
        f in prop::collection::vec(-1.0f64..1.0, 4),
        g in prop::collection::vec(-1.0f64..1.0, 4),
        b in -0.19f64..0.19,
        t in -2.0f64..2.0,
    ) {
        let grid = RadialGrid::new(128).unwrap();
        let w = WeightParam::new(b).unwrap();
        let (f, g) = (profile(grid, &f), profile(grid, &g));
        let fg = inner_b(&f, &g, w).unwrap();
        prop_assert!((fg - inner_b(&g, &f, w).unwrap()).abs() <= 1e-15);
        let mut h = f.clone();
        h.add_scaled(t, &g).unwrap();
        let lin = inner_b(&f, &g, w).unwrap() + t * inner_b(&g, &g, w).unwrap();
        prop_assert!((inner_b(&h, &g, w).unwrap() - lin).abs() <= 1e-13);
        prop_assert!(inner_b(&f, &f, w).unwrap() >= 0.0);
    }

    #[test]
    fn config_round_trips(
        k in 2usize..=3,
        b in 0.021f64..0.05,
        grid in (32usize..=1024).prop_map(|n| 2 * n),
        s_max in 0.1f64..10.0,
        every in 1usize..100,
        seed in any::<u64>(),
        quick_shoot in any::<bool>(),
    ) {
        let mut cfg = ScenarioConfig {
            mode: if quick_shoot { Mode::Shoot } else { Mode::Run },
            k,
            b_k0: Some(b),
            grid,
            s_max,
            record_every: every,
            seed,
            initial_lower: vec![1e-4; k - 1],
            ..ScenarioConfig::default()
        };
        cfg.shoot.s_max = Some(s_max / 10.0);
        cfg.validate().unwrap();
        let again = ScenarioConfig::parse(&cfg.to_toml()).unwrap();
        prop_assert_eq!(again, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn bisection_halves_the_bracket(b20 in prop_oneof![-0.05f64..-0.01, 0.01f64..0.05]) {
        let map = ReducedExitMap { system: ModalSystem::new(2).unwrap(), b_k0: b20, ceiling: 1.0, s_max: 0.9, ds: 1e-3 };
        let res = shoot_trapped(&map, &ShootingOptions::default()).unwrap();
        let mut prev = 2.0 * ShootingOptions::default().half_width;
        for w in &res.bracket_widths {
            prop_assert!((w - 0.5 * prev).abs() <= 1e-18);
            prev = *w;
        }
        prop_assert!(prev < 1e-12);
        prop_assert!(res.found_initials[0].abs() <= b20 * b20);
    }
}
