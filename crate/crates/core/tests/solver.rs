use std::f64::consts::PI;
use std::ops::ControlFlow;

use stefan_lab::asymptotics::{predicted_terminal_radius, time_reconstruction_check};
use stefan_lab::bessel::{eta, j0_zeros};
use stefan_lab::commands::initial_profile;
use stefan_lab::solver::{
    mass, read_checkpoint, run, write_checkpoint, RunSettings, SimState, Stepper, TimeSeries,
};
use stefan_lab::weighted_space::{l2b_norm, radial_integral, WeightParam};
use stefan_lab::{Error, GridFunction, RadialGrid};

fn settings(n: usize, s_max: f64) -> RunSettings {
    RunSettings {
        ds: 0.1 / n as f64,
        s_max,
        ..RunSettings::default()
    }
}

fn k1_state(n: usize, b0: f64) -> SimState {
    let grid = RadialGrid::new(n).unwrap();
    SimState::initial(initial_profile(grid, 1, b0, &[], 0.02).unwrap()).unwrap()
}

#[test]
fn zero_state_stays_put() {
    let grid = RadialGrid::new(256).unwrap();
    let st = SimState::initial(GridFunction::zeros(grid)).unwrap();
    assert!((mass(&st) - PI).abs() < 1e-15);
    let out = run(&settings(256, 0.5), st, |_| Ok(ControlFlow::Continue(()))).unwrap();
    for r in &out.series.records {
        assert_eq!(r.lambda, 1.0);
        assert_eq!(r.a, 0.0);
        assert!((r.mass - PI).abs() < 1e-15);
    }
    assert_eq!(out.final_state.v.max_abs(), 0.0);
}

#[test]
fn fixed_boundary_flow_decays_like_the_first_eigenvalue() {
    let grid = RadialGrid::new(512).unwrap();
    let z = j0_zeros(1).unwrap();
    let delta = 1e-3;
    let v0 = eta(1, grid, &z).unwrap().values.scaled(delta);
    let stepper = Stepper::new(grid, 1e-4).unwrap().with_fixed_boundary();
    let mut st = SimState::initial(v0).unwrap();
    for _ in 0..5000 {
        st = stepper.step(&st).unwrap();
        assert_eq!(st.v.boundary_value(), 0.0);
    }
    let n = l2b_norm(&st.v, WeightParam::flat());
    let exact = delta * (-z[0].lambda * st.s).exp();
    assert!((n / exact - 1.0).abs() < 1e-3, "{n} vs {exact}");
    assert_eq!(st.lambda, 1.0);
}

#[test]
fn step_keeps_the_dirichlet_value_and_rejects_large_slopes() {
    let st = k1_state(256, 0.01);
    let stepper = Stepper::new(st.v.grid(), 1e-4).unwrap();
    let next = stepper.step(&st).unwrap();
    assert_eq!(next.v.boundary_value(), 0.0);
    assert!(next.t > 0.0 && next.s > 0.0);
    let grid = RadialGrid::new(256).unwrap();
    let steep = SimState::initial(GridFunction::from_fn(grid, |y| 3.0 * (1.0 - y * y))).unwrap();
    assert!(matches!(
        stepper.step(&steep),
        Err(Error::BoundaryBlowup { .. })
    ));
    assert!(Stepper::new(grid, 0.01).is_err());
}

#[test]
fn melting_and_freezing_directions() {
    for (b0, grows) in [(0.01, true), (-0.01, false)] {
        let st = k1_state(256, b0);
        let u0 = 2.0 * PI * radial_integral(&st.v);
        let lambda_inf = predicted_terminal_radius(u0).unwrap();
        let a0 = st.a;
        let mut signs_ok = true;
        let out = run(&settings(256, 8.0), st, |s| {
            signs_ok &= s.a == 0.0 || s.a.signum() == a0.signum();
            Ok(ControlFlow::Continue(()))
        })
        .unwrap();
        assert!(out.reached_floor);
        assert!(signs_ok, "a changed sign for b0 = {b0}");
        let lam: Vec<f64> = out.series.records.iter().map(|r| r.lambda).collect();
        assert!(lam
            .windows(2)
            .all(|w| if grows { w[1] >= w[0] } else { w[1] <= w[0] }));
        assert_eq!(lam.last().unwrap() > &1.0, grows);
        assert!((lam.last().unwrap() - lambda_inf).abs() < 1e-4);
        assert!(out.series.max_mass_drift() < 1e-6);
        let rs = &out.series.records;
        assert!(rs.windows(2).all(|w| w[1].s > w[0].s && w[1].t > w[0].t));
    }
}

#[test]
fn nonnegative_data_stay_nonnegative() {
    let grid = RadialGrid::new(256).unwrap();
    let v0 = GridFunction::from_fn(grid, |y| 0.02 * (1.0 - y * y) * (1.0 - y).powi(2));
    let mut min: f64 = 0.0;
    run(&settings(256, 1.0), SimState::initial(v0).unwrap(), |s| {
        min = min.min(s.v.values().iter().copied().fold(f64::INFINITY, f64::min));
        Ok(ControlFlow::Continue(()))
    })
    .unwrap();
    assert!(min > -1e-14, "min {min}");
}

#[test]
fn final_radius_converges_at_second_order() {
    let lam: Vec<f64> = [128, 256, 512]
        .iter()
        .map(|&n| {
            run(&settings(n, 0.5), k1_state(n, 0.02), |_| {
                Ok(ControlFlow::Continue(()))
            })
            .unwrap()
        })
        .map(|o| o.final_state.lambda)
        .collect();
    let order = ((lam[0] - lam[1]) / (lam[1] - lam[2])).abs().log2();
    assert!(order >= 1.8, "order {order}, radii {lam:?}");
}

#[test]
fn physical_time_integrates_lambda_squared() {
    let out = run(&settings(256, 2.0), k1_state(256, 0.02), |_| {
        Ok(ControlFlow::Continue(()))
    })
    .unwrap();
    let defect = time_reconstruction_check(&out.series);
    assert!(defect < 1e-6, "defect {defect}");
}

#[test]
fn series_and_checkpoint_round_trip() {
    let out = run(&settings(128, 0.1), k1_state(128, 0.01), |_| {
        Ok(ControlFlow::Continue(()))
    })
    .unwrap();
    let back = TimeSeries::from_csv(&out.series.to_csv()).unwrap();
    assert_eq!(back.len(), out.series.len());
    assert!(out
        .series
        .to_csv()
        .starts_with("s,t,lambda,a,mass,l2b_norm\n"));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.bin");
    write_checkpoint(&path, &out.final_state).unwrap();
    let st = read_checkpoint(&path).unwrap();
    assert_eq!(st.v, out.final_state.v);
    assert_eq!(
        (st.s, st.t, st.lambda, st.a),
        (
            out.final_state.s,
            out.final_state.t,
            out.final_state.lambda,
            out.final_state.a
        )
    );
    assert!(TimeSeries::from_csv("s,t,lambda,a,mass,l2b_norm\n1,2,3\n").is_err());
}
