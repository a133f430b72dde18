use duct_pinn::pinn::{evaluation_grid, pressure_field, train_from, PressureObjective};
use duct_pinn::velocity::{train_velocity_transfer_from, velocity_scale, VelocityAnchor, VelocityObjective};
use duct_pinn::network::loss_value;
use duct_pinn::*;

fn case(kind: ProfileKind, frequency: f64) -> FrequencyCase64 {
    let flow = MeanFlow::new(TemperatureProfile::reference(kind), InletConditions::reference()).unwrap();
    FrequencyCase::new(frequency, flow, BoundaryData::reference()).unwrap()
}

fn config(iterations: usize) -> TrainingConfig {
    let mut cfg = TrainingConfig::default();
    cfg.optimizer.max_iterations = iterations;
    cfg.optimizer.memory = 50;
    cfg
}

fn small_arch() -> NetworkArchitecture {
    NetworkArchitecture::new(3, 16).unwrap()
}

#[test]
fn training_is_deterministic() {
    let c = case(ProfileKind::Linear, 500.0);
    let colloc = CollocationSet::random(300, 1.0, 4).unwrap();
    let (a, ra) = train(&c, small_arch(), &colloc, &config(60)).unwrap();
    let (b, rb) = train(&c, small_arch(), &colloc, &config(60)).unwrap();
    assert_eq!(a.to_flat(), b.to_flat());
    assert_eq!(ra.loss_history, rb.loss_history);
    assert!(ra.final_loss < ra.initial_loss);
}

#[test]
fn training_history_is_monotone() {
    let c = case(ProfileKind::Sinusoidal, 1000.0);
    let colloc = CollocationSet::random(300, 1.0, 2).unwrap();
    let (_, report) = train(&c, small_arch(), &colloc, &config(200)).unwrap();
    assert!(report.loss_history.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(report.loss_history.len(), report.iterations + 1);
}

#[test]
fn restart_from_converged_parameters_stops_immediately() {
    let c = case(ProfileKind::Constant, 500.0);
    let colloc = CollocationSet::random(300, 1.0, 6).unwrap();
    let mut cfg = config(3000);
    cfg.optimizer.gradient_tolerance = 1e-4;
    let (params, report) = train(&c, small_arch(), &colloc, &cfg).unwrap();
    assert_eq!(report.termination, Termination::GradientTolerance, "{}", report.summary());
    let (again, restart) = train_from(params.clone(), &c, &colloc, &cfg).unwrap();
    assert!(restart.iterations <= 1, "{}", restart.summary());
    assert_eq!(restart.final_loss, report.final_loss);
    assert_eq!(again.to_flat(), params.to_flat());
}

#[test]
fn trained_uniform_solution_approaches_analytic() {
    let c = case(ProfileKind::Constant, 500.0);
    let colloc = CollocationSet::random(1000, 1.0, 1).unwrap();
    let (params, report) = train(&c, small_arch(), &colloc, &config(1500)).unwrap();
    let grid = evaluation_grid(1.0, 200);
    let pinn = pressure_field(&params, &c, &grid);
    let exact = oracle::analytic_uniform_on(&c, &grid).unwrap();
    let (re, im) = relative_error(&pinn, &exact).unwrap();
    assert!(re.max(im) < 1e-3, "({re:.3e}, {im:.3e}) {}", report.summary());
}

#[test]
fn pressure_objective_matches_residual_loss() {
    let c = case(ProfileKind::Linear, 1500.0);
    let colloc = CollocationSet::random(700, 1.0, 9).unwrap();
    let p: NetworkParameters64 = init_he(small_arch(), 3).unwrap();
    let objective = PressureObjective::new(&c, &colloc).unwrap();
    let direct = residual_loss(&p, &c, &colloc).unwrap().0;
    let chunked = loss_value(&p, &objective).unwrap();
    assert!((direct - chunked).abs() <= 1e-12 * direct);
}

#[test]
fn direct_velocity_is_a_near_zero_of_the_transfer_loss() {
    let c = case(ProfileKind::Linear, 500.0);
    let colloc = CollocationSet::random(1000, 1.0, 1).unwrap();
    let (pressure, _) = train(&c, small_arch(), &colloc, &config(1500)).unwrap();
    let cu = CollocationSet::random(200, 1.0, 2).unwrap();
    let scale = velocity_scale(&c).unwrap();
    let objective = VelocityObjective::new(&pressure, &c, &cu, scale, VelocityAnchor::Free).unwrap();

    let h = 1e-5;
    let shifted = |d: f64| -> Vec<f64> { cu.points.iter().map(|x| x + d).collect() };
    let u0 = velocity_direct_field(&pressure, &c, &cu.points).unwrap().velocity;
    let up = velocity_direct_field(&pressure, &c, &shifted(h)).unwrap().velocity;
    let um = velocity_direct_field(&pressure, &c, &shifted(-h)).unwrap().velocity;
    let samples: Vec<_> = (0..u0.len()).map(|i| (u0[i], (up[i] - um[i]) / (2.0 * h))).collect();
    let (manufactured, _, _) = VelocityObjective::split_loss(&objective.residuals(&samples));

    let random: NetworkParameters64 = init_he(small_arch(), 0).unwrap();
    let initial = loss_value(&random, &objective).unwrap();
    assert!(manufactured < 1e-6 * initial, "{manufactured:.3e} vs {initial:.3e}");
}

#[test]
fn transfer_training_reduces_momentum_loss() {
    let c = case(ProfileKind::Constant, 500.0);
    let colloc = CollocationSet::random(500, 1.0, 1).unwrap();
    let (pressure, _) = train(&c, small_arch(), &colloc, &config(500)).unwrap();
    let cu = CollocationSet::random(200, 1.0, 2).unwrap();
    let start: NetworkParameters64 = init_he(small_arch(), 5).unwrap();
    let (net, report) =
        train_velocity_transfer_from(&pressure, &c, start, &cu, &config(300), VelocityAnchor::Free).unwrap();
    assert!(report.final_loss < 1e-3 * report.initial_loss, "{}", report.summary());
    assert_eq!(net.field(&[0.0, 0.5, 1.0]).velocity.len(), 3);
}
