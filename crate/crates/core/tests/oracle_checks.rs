use duct_pinn::pinn::relative_error_channels;
use duct_pinn::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn case(kind: ProfileKind, frequency: f64) -> FrequencyCase64 {
    let flow = MeanFlow::new(TemperatureProfile::reference(kind), InletConditions::reference()).unwrap();
    FrequencyCase::new(frequency, flow, BoundaryData::reference()).unwrap()
}

fn worst(e: (f64, f64)) -> f64 {
    e.0.max(e.1)
}

#[test]
fn shooting_matches_analytic_uniform_solution() {
    for f in [500.0, 1000.0, 1500.0, 2000.0] {
        let c = case(ProfileKind::Constant, f);
        let shot = solve_bvp_shooting(&c, 20_000, 500).unwrap();
        let exact = analytic_uniform(&c, 500).unwrap();
        let e = worst(relative_error(&shot, &exact).unwrap());
        assert!(e <= 1e-8, "{f} Hz: {e:.3e}");
    }
}

#[test]
fn rk4_error_ratio_is_fourth_order() {
    for f in [500.0, 2000.0] {
        let c = case(ProfileKind::Constant, f);
        let exact = analytic_uniform(&c, 11).unwrap();
        let coarse = worst(relative_error(&solve_bvp_shooting(&c, 100, 11).unwrap(), &exact).unwrap());
        let fine = worst(relative_error(&solve_bvp_shooting(&c, 200, 11).unwrap(), &exact).unwrap());
        let ratio = coarse / fine;
        assert!((12.0..=20.0).contains(&ratio), "{f} Hz: ratio {ratio:.3} ({coarse:.3e} / {fine:.3e})");
    }
}

#[test]
fn shooting_converges_on_gradient_profiles() {
    for kind in [ProfileKind::Linear, ProfileKind::Sinusoidal] {
        let c = case(kind, 2000.0);
        let a = solve_bvp_shooting(&c, 20_000, 101).unwrap();
        let b = solve_bvp_shooting(&c, 40_000, 101).unwrap();
        assert!(worst(relative_error(&a, &b).unwrap()) <= 1e-9, "{kind}");
    }
}

/// Fourth-order central derivative on a uniform grid, interior points only.
fn derivative(values: &[Complex64], h: f64) -> Vec<(usize, Complex64)> {
    (2..values.len() - 2)
        .map(|i| (i, (values[i - 2] - values[i - 1] * 8.0 + values[i + 1] * 8.0 - values[i + 2]) / (12.0 * h)))
        .collect()
}

/// Worst relative momentum and continuity residuals of the oracle field.
fn pair_residuals(kind: ProfileKind, f: f64) -> (f64, f64) {
    let c = case(kind, f);
    let n = 4001;
    let field = oracle_velocity(&solve_bvp_shooting(&c, 40_000, n).unwrap(), &c).unwrap();
    let u = field.velocity.as_ref().unwrap();
    let dp = field.pressure_gradient.as_ref().unwrap();
    let h = 1.0 / (n - 1) as f64;
    let (mut mom, mut cont): (f64, f64) = (0.0, 0.0);
    for (i, du) in derivative(u, h).into_iter().step_by(50) {
        let s = c.flow.sample(f, field.x[i]).unwrap();
        let m = momentum_coeffs_at(&s, 1.4, c.omega()).unwrap();
        let p = field.pressure[i];
        let terms = [m.c * u[i], m.d * dp[i], du, m.f * p, m.a * p, m.b * dp[i]];
        let scale = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
        mom = mom.max(m.momentum_residual(p, dp[i], u[i], du).norm() / scale);
        cont = cont.max(m.continuity_residual(p, dp[i], du).norm() / scale);
    }
    (mom, cont)
}

#[test]
fn uniform_oracle_field_satisfies_continuity_and_momentum() {
    for f in [500.0, 2000.0] {
        let (mom, cont) = pair_residuals(ProfileKind::Constant, f);
        assert!(mom <= 1e-9 && cont <= 1e-9, "{f} Hz: momentum {mom:.2e}, continuity {cont:.2e}");
    }
}

/// The second-order pressure equation and the first-order pair agree only
/// approximately once the medium has gradients; the gap stays near 1e-4.
#[test]
fn gradient_oracle_field_nearly_satisfies_continuity_and_momentum() {
    for kind in [ProfileKind::Linear, ProfileKind::Sinusoidal] {
        for f in [500.0, 2000.0] {
            let (mom, cont) = pair_residuals(kind, f);
            assert!(mom <= 1e-3 && cont <= 1e-3, "{kind} {f} Hz: momentum {mom:.2e}, continuity {cont:.2e}");
        }
    }
}

#[test]
fn oracle_velocity_matches_plane_wave_solution() {
    for f in [500.0, 1500.0] {
        let c = case(ProfileKind::Constant, f);
        let exact = analytic_uniform(&c, 200).unwrap();
        let derived = oracle_velocity(&exact, &c).unwrap();
        let e = relative_error_channels(derived.velocity.as_ref().unwrap(), exact.velocity.as_ref().unwrap()).unwrap();
        assert!(worst(e) <= 1e-12, "{f} Hz: {e:?}");
    }
}

#[test]
fn csv_round_trip_preserves_values() {
    let c = case(ProfileKind::Linear, 1000.0);
    let field = oracle_velocity(&solve_bvp_shooting(&c, 2_000, 50).unwrap(), &c).unwrap();
    let mut bytes = Vec::new();
    oracle::write_field_csv(&field, &mut bytes).unwrap();
    let back: FieldSolution64 = oracle::read_field_csv(bytes.as_slice(), Provenance::Shooting).unwrap();
    assert_eq!(back.x, field.x);
    assert_eq!(back.pressure, field.pressure);
    assert_eq!(back.velocity, field.velocity);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn shooting_is_linear_in_boundary_data(re in -3.0f64..3.0, im in -3.0f64..3.0, f in 200.0f64..2000.0) {
        let lambda = Complex64::new(re, im);
        prop_assume!(lambda.norm() > 1e-3);
        let base = case(ProfileKind::Linear, f);
        let mut scaled = base.clone();
        scaled.boundary = base.boundary.scaled(lambda);
        let a = solve_bvp_shooting(&base, 2_000, 41).unwrap().scaled(lambda);
        let b = solve_bvp_shooting(&scaled, 2_000, 41).unwrap();
        prop_assert!(worst(relative_error(&b, &a).unwrap()) <= 1e-12);
    }
}
