use duct_pinn::coefficients::zeta_from_parts;
use duct_pinn::*;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use proptest::prelude::*;

type Q = BigRational;

fn q(v: f64) -> Q {
    Q::from_float(v).expect("finite")
}

fn int(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

fn f(v: &Q) -> f64 {
    v.to_f64().expect("representable")
}

/// Exact complex number over the rationals.
#[derive(Clone)]
struct Cq(Q, Q);

impl Cq {
    fn to_c64(&self) -> Complex64 {
        Complex64::new(f(&self.0), f(&self.1))
    }
}

fn exact_zeta(m: f64, k: f64, alpha: f64, beta: f64, dm: f64, gamma: f64) -> [Cq; 3] {
    let (m, k, a, b, dm, g) = (q(m), q(k), q(alpha), q(beta), q(dm), q(gamma));
    let m2 = &m * &m;
    let z1 = Cq(Q::one() - &m2, -(int(2) * &m2 * &dm) / &k);
    let z2 = Cq(
        -(Q::one() - (int(3) + &g) * &m2) * &a,
        int(2) * &m * &k + &m * &b / &k - int(2) * &m * &a * &a / &k,
    );
    let z3 = Cq(
        &k * &k - (int(2) - &g) * &m2 * &b - (int(4) * &g - int(5)) * &m2 * &a * &a,
        -(int(2) + &g) * &m * &k * &a + int(2) * &g * &k * &m2 * &dm,
    );
    [z1, z2, z3]
}

fn assert_matches(actual: Complex64, exact: &Cq, what: &str) {
    let e = exact.to_c64();
    let tol = 1e-13 * (1.0 + e.norm());
    assert!((actual - e).norm() <= tol, "{what}: {actual} vs exact {e}");
}

#[test]
fn zeta_matches_exact_arithmetic_on_reference_flows() {
    for kind in [ProfileKind::Linear, ProfileKind::Sinusoidal, ProfileKind::Constant] {
        let flow = MeanFlow::new(TemperatureProfile::reference(kind), InletConditions::reference()).unwrap();
        for freq in [500.0, 1000.0, 1500.0, 2000.0] {
            for i in 0..=10 {
                let s = flow.sample(freq, i as f64 / 10.0).unwrap();
                let z = zeta_at(&s, 1.4).unwrap();
                let e = exact_zeta(s.mach, s.wavenumber, s.alpha, s.beta, s.mach_gradient, 1.4);
                assert_matches(z.zeta1, &e[0], "zeta1");
                assert_matches(z.zeta2, &e[1], "zeta2");
                assert_matches(z.zeta3, &e[2], "zeta3");
            }
        }
    }
}

#[test]
fn momentum_coefficients_match_exact_arithmetic() {
    let flow = MeanFlow::new(TemperatureProfile::reference(ProfileKind::Linear), InletConditions::reference()).unwrap();
    for freq in [500.0, 2000.0] {
        let omega = angular_frequency(freq);
        for i in 0..=4 {
            let s = flow.sample(freq, i as f64 / 4.0).unwrap();
            let c = momentum_coeffs_at(&s, 1.4, omega).unwrap();
            let (g, u, a, p, m, k, w) = (q(1.4), q(s.velocity), q(s.alpha), q(s.pressure), q(s.mach), q(s.wavenumber), q(omega));
            let flux = q(s.density) * &u;
            let m2 = &m * &m;
            let gp = &g * &p;
            let ea = Cq(-(&g * &u * &a) / &gp, -&w / &gp);
            let eb = Cq(
                (&m2 / &flux) * (Q::one() + &m2 * &a * &a / (&k * &k)),
                -(&m2 / &flux) * &m * &a / &k,
            );
            let ec = Cq(-a.clone(), -&w / &u);
            let ed = Cq(Q::one() / &flux, int(0));
            let ef = Cq(-(&m2 * &a) / &flux, int(0));
            assert_matches(c.a, &ea, "A");
            assert_matches(c.b, &eb, "B");
            assert_matches(c.c, &ec, "C");
            assert_matches(c.d, &ed, "D");
            assert_matches(c.f, &ef, "F");
        }
    }
}

#[test]
fn uniform_flow_reduces_to_convected_helmholtz() {
    let flow = MeanFlow::new(TemperatureProfile::reference(ProfileKind::Constant), InletConditions::reference()).unwrap();
    for freq in [100.0, 500.0, 1000.0, 1500.0, 2000.0] {
        for i in 0..=20 {
            let s = flow.sample(freq, i as f64 / 20.0).unwrap();
            let z = zeta_at(&s, 1.4).unwrap();
            let (m, k) = (s.mach, s.wavenumber);
            let expected = [
                Complex64::new(1.0 - m * m, 0.0),
                Complex64::new(0.0, 2.0 * k * m),
                Complex64::new(k * k, 0.0),
            ];
            for (got, want) in [z.zeta1, z.zeta2, z.zeta3].into_iter().zip(expected) {
                assert!((got - want).norm() <= 1e-12 * want.norm().max(1.0), "{got} vs {want}");
            }
        }
    }
}

proptest! {
    #[test]
    fn zeta_is_exact_for_arbitrary_states(
        m in 0.0f64..0.9,
        k in 0.1f64..60.0,
        alpha in -2.0f64..2.0,
        beta in -5.0f64..5.0,
        dm in -1.0f64..1.0,
        gamma in 1.1f64..1.7,
    ) {
        let z = zeta_from_parts(m, k, alpha, beta, dm, gamma);
        let e = exact_zeta(m, k, alpha, beta, dm, gamma);
        for (got, want) in [z.zeta1, z.zeta2, z.zeta3].into_iter().zip(e.iter()) {
            let w = want.to_c64();
            prop_assert!((got - w).norm() <= 1e-12 * (1.0 + w.norm()));
        }
    }

    #[test]
    fn zeta_residual_is_linear(re in -5.0f64..5.0, im in -5.0f64..5.0, x in 0.0f64..1.0) {
        let flow = MeanFlow::new(TemperatureProfile::reference(ProfileKind::Linear), InletConditions::reference()).unwrap();
        let z = zeta_at(&flow.sample(1000.0, x).unwrap(), 1.4).unwrap();
        let lambda = Complex64::new(re, im);
        let (p, dp, ddp) = (Complex64::new(0.3, -1.1), Complex64::new(2.0, 0.5), Complex64::new(-7.0, 3.0));
        let lhs = z.residual(lambda * p, lambda * dp, lambda * ddp);
        let rhs = lambda * z.residual(p, dp, ddp);
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }
}
