//! Fast invariant suite behind `ductpinn check`.
//!
//! Each check compares the library against an independent oracle (closed
//! forms, finite differences or the analytic uniform solution) and reports
//! the worst deviation it saw.

use std::time::Instant;

use duct_pinn::network::{forward_values, loss_value};
use duct_pinn::pinn::PressureObjective;
use duct_pinn::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<28} {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn timed(name: &'static str, body: impl FnOnce() -> Result<String, String>) -> CheckOutcome {
    let started = Instant::now();
    let (passed, detail) = match body() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CheckOutcome {
        name,
        passed,
        detail,
        seconds: started.elapsed().as_secs_f64(),
    }
}

fn reference_flow(kind: ProfileKind) -> MeanFlow64 {
    MeanFlow::new(TemperatureProfile::reference(kind), InletConditions::reference()).expect("reference flow")
}

fn reference_case(kind: ProfileKind, frequency: f64) -> FrequencyCase64 {
    FrequencyCase::new(frequency, reference_flow(kind), BoundaryData::reference()).expect("reference case")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Mass flux, perfect-gas state and the exact inlet velocity at random points.
pub fn mean_flow_closure() -> CheckOutcome {
    timed("mean-flow closure", || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut worst: f64 = 0.0;
        for kind in ProfileKind::ALL {
            let flow = reference_flow(kind);
            let flux = flow.inlet.density() * flow.inlet.velocity();
            for _ in 0..100 {
                let x: f64 = rng.random_range(0.0..=1.0);
                let s = flow.sample(500.0, x).map_err(|e| e.to_string())?;
                worst = worst
                    .max(rel(s.density * s.velocity, flux))
                    .max(rel(s.pressure, s.density * flow.inlet.gas_constant * s.temperature));
            }
        }
        let linear = reference_flow(ProfileKind::Linear);
        let exact = linear.velocity(0.0).map_err(|e| e.to_string())? == linear.inlet.velocity();
        let detail = format!("worst relative {worst:.2e}, u(0) == u0: {exact}");
        if worst <= 1e-10 && exact {
            Ok(detail)
        } else {
            Err(detail)
        }
    })
}

/// Uniform medium reduces to `(1 − M², 2jkM, k²)`.
pub fn coefficient_reduction() -> CheckOutcome {
    timed("coefficient reduction", || {
        let flow = reference_flow(ProfileKind::Constant);
        let mut worst: f64 = 0.0;
        for f in [500.0, 1000.0, 1500.0, 2000.0] {
            for i in 0..=50 {
                let s = flow.sample(f, i as f64 / 50.0).map_err(|e| e.to_string())?;
                let z = zeta_at(&s, flow.inlet.gamma).map_err(|e| e.to_string())?;
                let (m, k) = (s.mach, s.wavenumber);
                let expected = [
                    Complex64::new(1.0 - m * m, 0.0),
                    Complex64::new(0.0, 2.0 * k * m),
                    Complex64::new(k * k, 0.0),
                ];
                for (got, want) in [z.zeta1, z.zeta2, z.zeta3].into_iter().zip(expected) {
                    worst = worst.max((got - want).norm() / want.norm());
                }
            }
        }
        let detail = format!("worst relative {worst:.2e}");
        if worst <= 1e-12 {
            Ok(detail)
        } else {
            Err(detail)
        }
    })
}

/// `α`, `β` and `dM/dx` against central differences of `ρ̄` and `M`.
pub fn medium_derivatives() -> CheckOutcome {
    timed("mean-flow derivatives", || {
        let mut worst: f64 = 0.0;
        for kind in [ProfileKind::Linear, ProfileKind::Sinusoidal] {
            let flow = reference_flow(kind);
            let rho = |x: f64| flow.density(x).expect("density");
            let mach = |x: f64| flow.mach(x).expect("mach");
            for i in 1..100 {
                let x = i as f64 / 100.0;
                let s = flow.sample(1000.0, x).map_err(|e| e.to_string())?;
                let (h1, h2) = (1e-3, 1e-3);
                let d1 = |g: &dyn Fn(f64) -> f64| (g(x - 2.0 * h1) - 8.0 * g(x - h1) + 8.0 * g(x + h1) - g(x + 2.0 * h1)) / (12.0 * h1);
                let d2 = |g: &dyn Fn(f64) -> f64| {
                    (-g(x - 2.0 * h2) + 16.0 * g(x - h2) - 30.0 * g(x) + 16.0 * g(x + h2) - g(x + 2.0 * h2)) / (12.0 * h2 * h2)
                };
                let alpha = d1(&rho) / s.density;
                let beta = d2(&rho) / s.density;
                let dm = d1(&mach);
                for (got, fd) in [(s.alpha, alpha), (s.beta, beta), (s.mach_gradient, dm)] {
                    worst = worst.max((got - fd).abs() / fd.abs().max(1e-4));
                }
            }
        }
        let detail = format!("worst relative {worst:.2e}");
        if worst <= 1e-5 {
            Ok(detail)
        } else {
            Err(detail)
        }
    })
}

fn output(params: &NetworkParameters64, x: f64) -> [f64; 2] {
    let v = forward_values(params, &[x]);
    [v[[0, 0]], v[[1, 0]]]
}

/// Network jets and parameter gradients against finite differences.
pub fn autodiff() -> CheckOutcome {
    timed("autodiff soundness", || {
        let mut worst1: f64 = 0.0;
        let mut worst2: f64 = 0.0;
        for seed in 0..4 {
            let params: NetworkParameters64 = init_he(NetworkArchitecture::new(4, 20).map_err(|e| e.to_string())?, seed)
                .map_err(|e| e.to_string())?;
            for i in 1..20 {
                let x = i as f64 / 20.0;
                let jet = forward_jet(&params, x);
                let (h1, h2) = (1e-3, 1e-3);
                let at = |d: f64| output(&params, x + d);
                let (a, b, c, d, e) = (at(-2.0 * h1), at(-h1), at(h1), at(2.0 * h1), at(0.0));
                let (a2, b2, c2, d2) = (at(-2.0 * h2), at(-h2), at(h2), at(2.0 * h2));
                for ch in 0..2 {
                    let fd1 = (a[ch] - 8.0 * b[ch] + 8.0 * c[ch] - d[ch]) / (12.0 * h1);
                    let fd2 = (-a2[ch] + 16.0 * b2[ch] - 30.0 * e[ch] + 16.0 * c2[ch] - d2[ch]) / (12.0 * h2 * h2);
                    worst1 = worst1.max((jet.dx[ch] - fd1).abs() / fd1.abs().max(1e-3));
                    worst2 = worst2.max((jet.dxx[ch] - fd2).abs() / fd2.abs().max(1e-3));
                }
            }
        }
        let case = reference_case(ProfileKind::Sinusoidal, 1000.0);
        let colloc = CollocationSet::random(100, 1.0, 3).map_err(|e| e.to_string())?;
        let objective = PressureObjective::new(&case, &colloc).map_err(|e| e.to_string())?;
        let params: NetworkParameters64 =
            init_he(NetworkArchitecture::new(3, 4).map_err(|e| e.to_string())?, 7).map_err(|e| e.to_string())?;
        let (_, grad) = loss_and_param_gradient(&params, &objective).map_err(|e| e.to_string())?;
        let flat = params.to_flat();
        let h = 1e-5;
        let mut worst_g: f64 = 0.0;
        for k in 0..flat.len() {
            let eval = |delta: f64| {
                let mut v = flat.clone();
                v[k] += delta;
                loss_value(&NetworkParameters::from_flat(params.arch, 1.0, &v).expect("layout"), &objective)
                    .expect("finite loss")
            };
            let fd = (eval(-2.0 * h) - 8.0 * eval(-h) + 8.0 * eval(h) - eval(2.0 * h)) / (12.0 * h);
            worst_g = worst_g.max((grad[k] - fd).abs() / fd.abs().max(1e-3));
        }
        let detail = format!("jet d1 {worst1:.2e}, d2 {worst2:.2e}, parameter gradient {worst_g:.2e}");
        if worst1 <= 1e-6 && worst2 <= 1e-5 && worst_g <= 1e-5 {
            Ok(detail)
        } else {
            Err(detail)
        }
    })
}

/// Shooting against the analytic uniform solution, and the RK4 convergence ratio.
pub fn oracle_validity() -> CheckOutcome {
    timed("oracle validity", || {
        let mut worst: f64 = 0.0;
        let mut ratios = Vec::new();
        for f in [500.0, 2000.0] {
            let case = reference_case(ProfileKind::Constant, f);
            let err = |steps: usize, n: usize| -> Result<f64, String> {
                let shot = oracle::solve_bvp_shooting(&case, steps, n).map_err(|e| e.to_string())?;
                let exact = oracle::analytic_uniform(&case, n).map_err(|e| e.to_string())?;
                let (re, im) = relative_error(&shot, &exact).map_err(|e| e.to_string())?;
                Ok(re.max(im))
            };
            worst = worst.max(err(oracle::DEFAULT_STEPS, oracle::DEFAULT_GRID_POINTS)?);
            ratios.push(err(100, 11)? / err(200, 11)?);
        }
        let ratios_ok = ratios.iter().all(|r| (12.0..=20.0).contains(r));
        let detail = format!("shooting vs analytic {worst:.2e}, RK4 ratios {ratios:.2?}");
        if worst <= 1e-8 && ratios_ok {
            Ok(detail)
        } else {
            Err(detail)
        }
    })
}

/// Trial pressure reproduces the boundary data for random parameter vectors.
pub fn hard_boundary() -> CheckOutcome {
    timed("hard boundary", || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let arch = NetworkArchitecture::new(4, 16).map_err(|e| e.to_string())?;
        let boundary = BoundaryData::reference();
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let flat: Vec<f64> = (0..arch.parameter_count()).map(|_| rng.sample(StandardNormal)).collect();
            let params = NetworkParameters::from_flat(arch, 1.0, &flat).map_err(|e| e.to_string())?;
            let left = trial_pressure(&params, &boundary, 1.0, 0.0).value - boundary.p0;
            let right = trial_pressure(&params, &boundary, 1.0, 1.0).value - boundary.pl;
            worst = worst.max(left.re.abs()).max(left.im.abs()).max(right.re.abs()).max(right.im.abs());
        }
        let detail = format!("worst boundary deviation {worst:.2e}");
        if worst <= f64::EPSILON {
            Ok(detail)
        } else {
            Err(detail)
        }
    })
}

pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        mean_flow_closure(),
        coefficient_reduction(),
        medium_derivatives(),
        autodiff(),
        oracle_validity(),
        hard_boundary(),
    ]
}
