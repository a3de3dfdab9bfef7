use stefan_lab::bessel::{eta, j0, j0_prime, j0_zeros, scaling_coupling, write_zero_table};
use stefan_lab::spectrum::assemble_hb;
use stefan_lab::weighted_space::{
    h1b_norm, inner_b, l2b_norm, lambda_op, radial_integral, WeightParam,
};
use stefan_lab::{GridFunction, RadialGrid};

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) * flo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// Power series, fine for x <= 8.
fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let (mut term, mut sum) = (1.0, 1.0);
    for m in 1..60 {
        term *= q / (m * m) as f64;
        sum += term;
    }
    sum
}

#[test]
fn j0_values_and_zeros() {
    assert_eq!(j0(0.0), 1.0);
    assert!(j0(2.404825557695773).abs() < 1e-12);
    assert!(j0(5.520078110286311).abs() < 1e-12);
    for x in [0.3, 1.7, 4.2, 7.9] {
        assert!(
            (j0(x) - j0_series(x)).abs() <= 1e-13 * j0_series(x).abs().max(1e-3),
            "x = {x}"
        );
    }
    let r1 = bisect(j0_series, 2.0, 3.0);
    let r2 = bisect(j0_series, 5.0, 6.0);
    let z = j0_zeros(2).unwrap();
    assert!((z[0].r - r1).abs() < 1e-13);
    assert!((z[1].r - r2).abs() < 1e-13);
    assert!((z[0].lambda - 5.783185962946785).abs() < 1e-12);
    assert!((z[1].lambda - 30.471262343662087).abs() < 1e-11);
    let all = j0_zeros(64).unwrap();
    assert!(all.windows(2).all(|w| w[1].lambda - w[0].lambda > 1.0));
    assert!(j0_zeros(65).is_err());
}

#[test]
fn j0_prime_matches_richardson_difference() {
    assert_eq!(j0_prime(0.0), 0.0);
    let x = 2.404825557695773;
    let d = |h: f64| (j0(x + h) - j0(x - h)) / (2.0 * h);
    let rich = (4.0 * d(1e-3) - d(2e-3)) / 3.0;
    assert!((j0_prime(x) - rich).abs() < 1e-10);
    assert!((j0_prime(x) + 0.519147).abs() < 1e-6);
    let small = 1e-4;
    assert!((j0_prime(small) + small / 2.0).abs() < small.powi(3));
}

#[test]
fn eigenfunctions_are_orthonormal_and_alternate() {
    let grid = RadialGrid::new(1024).unwrap();
    let zeros = j0_zeros(8).unwrap();
    let flat = WeightParam::flat();
    let etas: Vec<_> = (1..=8).map(|j| eta(j, grid, &zeros).unwrap()).collect();
    assert_eq!(etas[0].values.boundary_value(), 0.0);
    assert!((etas[0].boundary_slope + 3.4009369).abs() < 1e-6);
    for (i, ei) in etas.iter().enumerate() {
        let sign = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
        assert_eq!(ei.boundary_slope.signum(), sign);
        for (j, ej) in etas.iter().enumerate() {
            let g = inner_b(&ei.values, &ej.values, flat).unwrap();
            let delta = if i == j { 1.0 } else { 0.0 };
            assert!(
                (g - delta).abs() <= 1e-8,
                "<eta_{}, eta_{}> = {g}",
                i + 1,
                j + 1
            );
        }
    }
    assert!(eta(9, grid, &zeros).is_err());
}

#[test]
fn scaling_identity_holds_for_the_first_eight_modes() {
    let grid = RadialGrid::new(2048).unwrap();
    let zeros = j0_zeros(8).unwrap();
    for k in 1..=8 {
        let c = scaling_coupling(k, k, grid, &zeros).unwrap();
        assert!((c + 1.0).abs() <= 1e-8, "k = {k}: {c}");
    }
}

#[test]
fn bessel_ode_residual_is_second_order() {
    let zeros = j0_zeros(3).unwrap();
    let residual = |n: usize| {
        let grid = RadialGrid::new(n).unwrap();
        let e = eta(3, grid, &zeros).unwrap();
        let f = e.values.values();
        let h = grid.h();
        let lambda = zeros[2].lambda;
        (1..n)
            .map(|i| {
                let y = grid.node(i);
                let d1 = (f[i + 1] - f[i - 1]) / (2.0 * h);
                let d2 = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h);
                (y * d2 + d1 + lambda * y * f[i]).abs()
            })
            .fold(0.0, f64::max)
    };
    let order = (residual(256) / residual(512)).log2();
    assert!((order - 2.0).abs() < 0.2, "order {order}");
}

#[test]
fn zero_table_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zeros.csv");
    write_zero_table(&path, &j0_zeros(4).unwrap()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn weighted_inner_product_examples() {
    let grid = RadialGrid::new(1024).unwrap();
    let zeros = j0_zeros(1).unwrap();
    let e1 = eta(1, grid, &zeros).unwrap().values;
    let flat = WeightParam::flat();
    assert!((inner_b(&e1, &e1, flat).unwrap() - 1.0).abs() < 1e-8);
    assert_eq!(inner_b(&GridFunction::zeros(grid), &e1, flat).unwrap(), 0.0);
    let p = GridFunction::from_fn(grid, |y| 1.0 - y * y);
    // The integral of (1 - y^2)^2 y over [0, 1] is 1/6.
    assert!((inner_b(&p, &p, flat).unwrap() - 1.0 / 6.0).abs() < 1e-12);
    let other = RadialGrid::new(512).unwrap();
    assert!(inner_b(&p, &GridFunction::zeros(other), flat).is_err());
    // b = 0 agrees with the plain radial integral.
    let pp = GridFunction::from_fn(grid, |y| (1.0 - y * y).powi(2));
    assert!((inner_b(&p, &p, flat).unwrap() - radial_integral(&pp)).abs() < 1e-15);
}

#[test]
fn scaling_operator_and_h1_norm() {
    let grid = RadialGrid::new(1024).unwrap();
    let zeros = j0_zeros(1).unwrap();
    let c = lambda_op(&GridFunction::from_fn(grid, |_| 3.0));
    assert!(c.max_abs() < 1e-12);
    let sq = lambda_op(&GridFunction::from_fn(grid, |y| y * y));
    for (y, v) in grid.nodes().zip(sq.values()) {
        assert!((v - 2.0 * y * y).abs() < 1e-10);
    }
    let e1 = eta(1, grid, &zeros).unwrap().values;
    let le = lambda_op(&e1);
    assert!((le.values()[grid.intervals()] + (2.0 * zeros[0].lambda).sqrt()).abs() < 1e-6);
    assert_eq!(
        h1b_norm(&GridFunction::zeros(grid), WeightParam::flat()).unwrap(),
        0.0
    );
    let n0 = h1b_norm(&e1, WeightParam::flat()).unwrap();
    assert!((n0 - (zeros[0].lambda + 1.0).sqrt()).abs() < 1e-6);
    for b in [-0.05, 0.05] {
        let nb = h1b_norm(&e1, WeightParam::new(b).unwrap()).unwrap();
        assert!(nb <= (b.abs() / 2.0).exp() * n0);
    }
}

#[test]
fn hb_is_self_adjoint_in_the_weighted_product() {
    let grid = RadialGrid::new(512).unwrap();
    let f = GridFunction::from_fn(grid, |y| (1.0 - y * y) * (1.0 + 3.0 * y));
    let g = GridFunction::from_fn(grid, |y| (1.0 - y) * (2.0 - y * y * y));
    for b in [-0.04, 0.0, 0.03] {
        let w = WeightParam::new(b).unwrap();
        let op = assemble_hb(grid, w);
        let lhs = op.inner_lumped(&op.apply(&f).unwrap(), &g);
        let rhs = op.inner_lumped(&f, &op.apply(&g).unwrap());
        let scale = l2b_norm(&f, w) * l2b_norm(&g, w);
        assert!((lhs - rhs).abs() <= 1e-8 * scale, "b = {b}");
    }
}
