//! Trial solutions, residual losses and training of the pressure network.
//!
//! The trial pressure blends the boundary data with the network output so
//! that the Dirichlet conditions hold for every `θ`:
//!
//! ```text
//! p̃_t(x) = ((L−x)/L) p̂₀ + (x/L) p̂_L + (x(L−x)/L²) N(x)
//! ```
//!
//! with `N = Nᴿ + jNᴵ` the two network outputs. The training loss is the sum
//! of the mean squared real and imaginary parts of `ζ₁p̃'' + ζ₂p̃' + ζ₃p̃`.

use std::ops::Range;
use std::time::Instant;

use ndarray::{ArrayView2, ArrayViewMut2};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::{angular_frequency, zeta_at, CoefficientError, ZetaCoefficients};
use crate::lbfgs::{self, LbfgsConfig, Termination};
use crate::medium::{MeanFlow, MediumError};
use crate::network::{
    forward_batch, init_he, loss_and_param_gradient, loss_value, JetObjective, NetworkArchitecture, NetworkError,
    NetworkParameters,
};
use crate::oracle::{FieldSolution, Provenance};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum PinnError {
    #[error(transparent)]
    Medium(#[from] MediumError),
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("reference field is identically zero in the {0} channel")]
    ZeroReference(&'static str),
    #[error("grids differ ({0} vs {1} points or mismatched positions)")]
    GridMismatch(usize, usize),
}

/// Dirichlet pressure data at both ends of the duct (Pa).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryData<T> {
    pub p0: Complex<T>,
    pub pl: Complex<T>,
}

impl<T: Real> BoundaryData<T> {
    pub fn new(p0: Complex<T>, pl: Complex<T>) -> Result<Self, PinnError> {
        if !(p0.re.is_finite() && p0.im.is_finite() && pl.re.is_finite() && pl.im.is_finite()) {
            return Err(PinnError::InvalidConfig("boundary data must be finite".into()));
        }
        Ok(Self { p0, pl })
    }

    /// `p̂₀ = 1 Pa`, `p̂_L = −1 Pa`.
    pub fn reference() -> Self {
        Self {
            p0: Complex::new(T::one(), T::zero()),
            pl: Complex::new(-T::one(), T::zero()),
        }
    }

    pub fn scaled(&self, factor: Complex<T>) -> Self {
        Self {
            p0: self.p0 * factor,
            pl: self.pl * factor,
        }
    }
}

/// Fixed interior collocation points drawn uniformly in `(0, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet<T> {
    pub points: Vec<T>,
    pub seed: u64,
}

impl<T: Real> CollocationSet<T> {
    pub fn random(count: usize, length: T, seed: u64) -> Result<Self, PinnError> {
        if count == 0 {
            return Err(PinnError::InvalidConfig("need at least one collocation point".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(count);
        while points.len() < count {
            let u: f64 = rng.random();
            let x = T::lit(u) * length;
            if x > T::zero() && x < length {
                points.push(x);
            }
        }
        Ok(Self { points, seed })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub optimizer: LbfgsConfig,
    /// Seed of the He initialisation.
    pub seed: u64,
    /// The network sees `input_scale · x`.
    pub input_scale: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            optimizer: LbfgsConfig::default(),
            seed: 0,
            input_scale: 1.0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), PinnError> {
        self.optimizer.validate().map_err(PinnError::InvalidConfig)?;
        if !(self.input_scale > 0.0 && self.input_scale.is_finite()) {
            return Err(PinnError::InvalidConfig("input_scale must be positive".into()));
        }
        Ok(())
    }
}

/// One frequency of one temperature profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyCase<T> {
    pub frequency: T,
    pub flow: MeanFlow<T>,
    pub boundary: BoundaryData<T>,
}

impl<T: Real> FrequencyCase<T> {
    pub fn new(frequency: T, flow: MeanFlow<T>, boundary: BoundaryData<T>) -> Result<Self, PinnError> {
        if !(frequency > T::zero() && frequency.is_finite()) {
            return Err(PinnError::InvalidConfig(format!("frequency must be positive, got {frequency}")));
        }
        Ok(Self {
            frequency,
            flow,
            boundary,
        })
    }

    pub fn length(&self) -> T {
        self.flow.length()
    }

    pub fn omega(&self) -> T {
        angular_frequency(self.frequency)
    }

    pub fn gamma(&self) -> T {
        self.flow.inlet.gamma
    }

    pub fn zeta(&self, x: T) -> Result<ZetaCoefficients<T>, PinnError> {
        let sample = self.flow.sample(self.frequency, x)?;
        Ok(zeta_at(&sample, self.gamma())?)
    }
}

/// Complex value and first two x-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexJet<T> {
    pub value: Complex<T>,
    pub dx: Complex<T>,
    pub dxx: Complex<T>,
}

/// Blending polynomial `g = x(L−x)/L²` and its derivatives.
#[inline]
fn bubble<T: Real>(x: T, length: T) -> (T, T, T) {
    let l2 = length * length;
    let two = T::lit(2.0);
    (x * (length - x) / l2, (length - two * x) / l2, -two / l2)
}

#[inline]
fn blend<T: Real>(boundary: &BoundaryData<T>, length: T, x: T, n: ComplexJet<T>) -> ComplexJet<T> {
    let (g, g1, g2) = bubble(x, length);
    let two = T::lit(2.0);
    let wl = (length - x) / length;
    let wr = x / length;
    let slope = (boundary.pl - boundary.p0) / length;
    ComplexJet {
        value: boundary.p0 * wl + boundary.pl * wr + n.value * g,
        dx: slope + n.value * g1 + n.dx * g,
        dxx: n.value * g2 + n.dx * (two * g1) + n.dxx * g,
    }
}

fn network_jet_at<T: Real>(jet: &ArrayView2<T>, batch: usize, i: usize) -> ComplexJet<T> {
    ComplexJet {
        value: Complex::new(jet[[0, i]], jet[[1, i]]),
        dx: Complex::new(jet[[0, batch + i]], jet[[1, batch + i]]),
        dxx: Complex::new(jet[[0, 2 * batch + i]], jet[[1, 2 * batch + i]]),
    }
}

/// Trial pressure and its derivatives at a single point.
pub fn trial_pressure<T: Real>(
    params: &NetworkParameters<T>,
    boundary: &BoundaryData<T>,
    length: T,
    x: T,
) -> ComplexJet<T> {
    trial_pressure_batch(params, boundary, length, &[x])[0]
}

pub fn trial_pressure_batch<T: Real>(
    params: &NetworkParameters<T>,
    boundary: &BoundaryData<T>,
    length: T,
    xs: &[T],
) -> Vec<ComplexJet<T>> {
    let jet = forward_batch(params, xs);
    let view = jet.view();
    xs.iter()
        .enumerate()
        .map(|(i, &x)| blend(boundary, length, x, network_jet_at(&view, xs.len(), i)))
        .collect()
}

/// Pressure residual objective with coefficients cached per collocation point.
pub struct PressureObjective<T> {
    points: Vec<T>,
    zetas: Vec<ZetaCoefficients<T>>,
    boundary: BoundaryData<T>,
    length: T,
}

impl<T: Real> PressureObjective<T> {
    pub fn new(case: &FrequencyCase<T>, colloc: &CollocationSet<T>) -> Result<Self, PinnError> {
        let zetas = colloc.points.iter().map(|&x| case.zeta(x)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_coefficients(colloc.points.clone(), zetas, case.boundary, case.length()))
    }

    /// Objective with explicit coefficients.
    pub fn from_coefficients(points: Vec<T>, zetas: Vec<ZetaCoefficients<T>>, boundary: BoundaryData<T>, length: T) -> Self {
        assert_eq!(points.len(), zetas.len(), "one coefficient triple per point");
        Self {
            points,
            zetas,
            boundary,
            length,
        }
    }

    /// Residuals `ζ₁p'' + ζ₂p' + ζ₃p` of a given trial jet at every point.
    pub fn residuals(&self, jets: &[ComplexJet<T>]) -> Vec<Complex<T>> {
        self.zetas
            .iter()
            .zip(jets)
            .map(|(z, j)| z.residual(j.value, j.dx, j.dxx))
            .collect()
    }

    /// `(L_d, L_dᴿ, L_dᴵ)` from residuals.
    pub fn split_loss(&self, residuals: &[Complex<T>]) -> (T, T, T) {
        let n = T::from_usize(residuals.len()).expect("count");
        let re = residuals.iter().map(|r| r.re * r.re).sum::<T>() / n;
        let im = residuals.iter().map(|r| r.im * r.im).sum::<T>() / n;
        (re + im, re, im)
    }
}

impl<T: Real> JetObjective<T> for PressureObjective<T> {
    fn points(&self) -> &[T] {
        &self.points
    }

    fn chunk(&self, range: Range<usize>, jet: ArrayView2<T>, adjoint: Option<ArrayViewMut2<T>>) -> T {
        let batch = range.len();
        let n = T::from_usize(self.points.len()).expect("count");
        let two = T::lit(2.0);
        let mut loss = T::zero();
        let mut adjoint = adjoint;
        for (i, idx) in range.enumerate() {
            let x = self.points[idx];
            let z = &self.zetas[idx];
            let p = blend(&self.boundary, self.length, x, network_jet_at(&jet, batch, i));
            let r = z.residual(p.value, p.dx, p.dxx);
            loss += (r.re * r.re + r.im * r.im) / n;
            if let Some(a) = adjoint.as_mut() {
                let gr = r * (two / n);
                let (gp, gp1, gp2) = (z.zeta3.conj() * gr, z.zeta2.conj() * gr, z.zeta1.conj() * gr);
                let (g, g1, g2) = bubble(x, self.length);
                let an = gp * g + gp1 * g1 + gp2 * g2;
                let an1 = gp1 * g + gp2 * (two * g1);
                let an2 = gp2 * g;
                a[[0, i]] = an.re;
                a[[1, i]] = an.im;
                a[[0, batch + i]] = an1.re;
                a[[1, batch + i]] = an1.im;
                a[[0, 2 * batch + i]] = an2.re;
                a[[1, 2 * batch + i]] = an2.im;
            }
        }
        loss
    }
}

/// `(L_d, L_dᴿ, L_dᴵ)` for the current parameters.
pub fn residual_loss<T: Real>(
    params: &NetworkParameters<T>,
    case: &FrequencyCase<T>,
    colloc: &CollocationSet<T>,
) -> Result<(T, T, T), PinnError> {
    let objective = PressureObjective::new(case, colloc)?;
    let jets = trial_pressure_batch(params, &case.boundary, case.length(), &colloc.points);
    let (total, re, im) = objective.split_loss(&objective.residuals(&jets));
    if !total.is_finite() {
        return Err(NetworkError::NonFiniteLoss { what: "residual loss".into() }.into());
    }
    Ok((total, re, im))
}

/// Machine-readable summary of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub final_loss: f64,
    pub loss_real: f64,
    pub loss_imag: f64,
    pub initial_loss: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    pub gradient_max: f64,
    pub wall_time_seconds: f64,
    pub seed: u64,
    pub collocation_seed: u64,
    pub collocation_points: usize,
    pub parameter_count: usize,
    pub loss_history: Vec<f64>,
}

impl TrainingReport {
    /// Short human-readable log line.
    pub fn summary(&self) -> String {
        format!(
            "loss {:.3e} (re {:.3e}, im {:.3e}) after {} iterations / {} evaluations, {} in {:.1} s",
            self.final_loss,
            self.loss_real,
            self.loss_imag,
            self.iterations,
            self.evaluations,
            self.termination,
            self.wall_time_seconds
        )
    }
}

/// Minimises a jet objective from `initial`, returning trained parameters and the optimiser outcome.
pub(crate) fn optimize<T: Real, O: JetObjective<T>>(
    initial: NetworkParameters<T>,
    objective: &O,
    config: &LbfgsConfig,
) -> Result<(NetworkParameters<T>, lbfgs::LbfgsOutcome<T>), PinnError> {
    let mut work = initial.clone();
    let outcome = lbfgs::minimize(
        |theta: &[T]| -> Result<(T, Vec<T>), NetworkError> {
            work.set_flat(theta)?;
            loss_and_param_gradient(&work, objective)
        },
        initial.to_flat(),
        config,
    )?;
    let mut params = initial;
    params.set_flat(&outcome.x)?;
    Ok((params, outcome))
}

/// Trains a fresh He-initialised pressure network on one case.
pub fn train<T: Real>(
    case: &FrequencyCase<T>,
    arch: NetworkArchitecture,
    colloc: &CollocationSet<T>,
    config: &TrainingConfig,
) -> Result<(NetworkParameters<T>, TrainingReport), PinnError> {
    config.validate()?;
    let initial = init_he::<T>(arch, config.seed)?.with_input_scale(T::lit(config.input_scale));
    train_from(initial, case, colloc, config)
}

/// Continues training from the given parameters.
pub fn train_from<T: Real>(
    initial: NetworkParameters<T>,
    case: &FrequencyCase<T>,
    colloc: &CollocationSet<T>,
    config: &TrainingConfig,
) -> Result<(NetworkParameters<T>, TrainingReport), PinnError> {
    config.validate()?;
    let started = Instant::now();
    let objective = PressureObjective::new(case, colloc)?;
    let initial_loss = loss_value(&initial, &objective)?;
    let (params, outcome) = optimize(initial, &objective, &config.optimizer)?;
    let (total, re, im) = residual_loss(&params, case, colloc)?;
    let report = TrainingReport {
        final_loss: total.f64(),
        loss_real: re.f64(),
        loss_imag: im.f64(),
        initial_loss: initial_loss.f64(),
        iterations: outcome.iterations,
        evaluations: outcome.evaluations,
        termination: outcome.termination,
        gradient_max: outcome.gradient_max.f64(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        seed: config.seed,
        collocation_seed: colloc.seed,
        collocation_points: colloc.len(),
        parameter_count: params.parameter_count(),
        loss_history: outcome.history.iter().map(|v| v.f64()).collect(),
    };
    Ok((params, report))
}

/// `N_t` linearly spaced points on `[0, L]` including both ends.
pub fn evaluation_grid<T: Real>(length: T, count: usize) -> Vec<T> {
    assert!(count >= 2, "grid needs at least two points");
    let last = T::from_usize(count - 1).expect("count");
    (0..count)
        .map(|i| {
            if i + 1 == count {
                length
            } else {
                length * T::from_usize(i).expect("index") / last
            }
        })
        .collect()
}

/// Trial pressure (and its slope) of a trained network on a grid.
pub fn pressure_field<T: Real>(params: &NetworkParameters<T>, case: &FrequencyCase<T>, grid: &[T]) -> FieldSolution<T> {
    let jets = trial_pressure_batch(params, &case.boundary, case.length(), grid);
    FieldSolution {
        x: grid.to_vec(),
        pressure: jets.iter().map(|j| j.value).collect(),
        pressure_gradient: Some(jets.iter().map(|j| j.dx).collect()),
        velocity: None,
        provenance: Provenance::Pinn,
    }
}

/// Per-channel `‖pred − truth‖₂ / ‖truth‖₂` on matching samples.
pub fn relative_error_channels<T: Real>(predicted: &[Complex<T>], truth: &[Complex<T>]) -> Result<(T, T), PinnError> {
    if predicted.len() != truth.len() {
        return Err(PinnError::GridMismatch(predicted.len(), truth.len()));
    }
    let mut num = (T::zero(), T::zero());
    let mut den = (T::zero(), T::zero());
    for (p, t) in predicted.iter().zip(truth) {
        let d = p - t;
        num.0 += d.re * d.re;
        num.1 += d.im * d.im;
        den.0 += t.re * t.re;
        den.1 += t.im * t.im;
    }
    if den.0 == T::zero() {
        return Err(PinnError::ZeroReference("real"));
    }
    if den.1 == T::zero() {
        return Err(PinnError::ZeroReference("imaginary"));
    }
    Ok(((num.0 / den.0).sqrt(), (num.1 / den.1).sqrt()))
}

/// Per-channel relative pressure error `(δᴿ, δᴵ)` between two fields on the same grid.
pub fn relative_error<T: Real>(predicted: &FieldSolution<T>, truth: &FieldSolution<T>) -> Result<(T, T), PinnError> {
    check_same_grid(predicted, truth)?;
    relative_error_channels(&predicted.pressure, &truth.pressure)
}

pub(crate) fn check_same_grid<T: Real>(a: &FieldSolution<T>, b: &FieldSolution<T>) -> Result<(), PinnError> {
    let tol = T::lit(1e-12);
    if a.x.len() != b.x.len() || a.x.iter().zip(&b.x).any(|(p, q)| (*p - *q).abs() > tol * (T::one() + q.abs())) {
        return Err(PinnError::GridMismatch(a.x.len(), b.x.len()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::{InletConditions, ProfileKind, TemperatureProfile};
    use crate::network::NetworkArchitecture;
    use approx::assert_relative_eq;

    fn case(kind: ProfileKind, f: f64) -> FrequencyCase<f64> {
        let flow = MeanFlow::new(TemperatureProfile::reference(kind), InletConditions::reference()).unwrap();
        FrequencyCase::new(f, flow, BoundaryData::reference()).unwrap()
    }

    #[test]
    fn trial_hits_boundary_data() {
        let p: NetworkParameters<f64> = init_he(NetworkArchitecture::new(3, 8).unwrap(), 4).unwrap();
        let b = BoundaryData::new(Complex::new(0.3, -1.2), Complex::new(-2.0, 0.7)).unwrap();
        assert_eq!(trial_pressure(&p, &b, 1.0, 0.0).value, b.p0);
        assert_eq!(trial_pressure(&p, &b, 1.0, 1.0).value, b.pl);
    }

    #[test]
    fn zero_network_is_linear_interpolant() {
        let p = NetworkParameters::<f64>::zeros(NetworkArchitecture::new(3, 4).unwrap()).unwrap();
        let j = trial_pressure(&p, &BoundaryData::reference(), 1.0, 0.5);
        assert_eq!(j.value, Complex::new(0.0, 0.0));
        assert_eq!(j.dx, Complex::new(-2.0, 0.0));
        assert_eq!(j.dxx, Complex::new(0.0, 0.0));
    }

    #[test]
    fn trial_jet_matches_finite_differences() {
        let p: NetworkParameters<f64> = init_he(NetworkArchitecture::new(3, 8).unwrap(), 9).unwrap();
        let b = BoundaryData::reference();
        let (x, h) = (0.37, 1e-4);
        let v = |x| trial_pressure(&p, &b, 1.0, x).value;
        let j = trial_pressure(&p, &b, 1.0, x);
        let d1 = (v(x + h) - v(x - h)) / (2.0 * h);
        let d2 = (v(x + h) - v(x) * 2.0 + v(x - h)) / (h * h);
        assert!((j.dx - d1).norm() < 1e-6 * (1.0 + j.dx.norm()));
        assert!((j.dxx - d2).norm() < 1e-4 * (1.0 + j.dxx.norm()));
    }

    #[test]
    fn collocation_is_interior_and_deterministic() {
        let a = CollocationSet::<f64>::random(500, 1.0, 3).unwrap();
        let b = CollocationSet::<f64>::random(500, 1.0, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.points.iter().all(|&x| x > 0.0 && x < 1.0));
        assert!(CollocationSet::<f64>::random(0, 1.0, 3).is_err());
    }

    #[test]
    fn loss_decomposes() {
        let c = case(ProfileKind::Linear, 500.0);
        let colloc = CollocationSet::random(64, 1.0, 1).unwrap();
        let p: NetworkParameters<f64> = init_he(NetworkArchitecture::new(3, 8).unwrap(), 2).unwrap();
        let (t, r, i) = residual_loss(&p, &c, &colloc).unwrap();
        assert!(r >= 0.0 && i >= 0.0);
        assert_eq!(t, r + i);
        let objective = PressureObjective::new(&c, &colloc).unwrap();
        assert_relative_eq!(loss_value(&p, &objective).unwrap(), t, max_relative = 1e-12);
    }

    #[test]
    fn zero_coefficients_give_zero_loss() {
        let colloc = CollocationSet::<f64>::random(40, 1.0, 1).unwrap();
        let zero = Complex::new(0.0, 0.0);
        let zetas = vec![
            ZetaCoefficients {
                zeta1: zero,
                zeta2: zero,
                zeta3: zero
            };
            40
        ];
        let objective = PressureObjective::from_coefficients(colloc.points.clone(), zetas, BoundaryData::reference(), 1.0);
        let p: NetworkParameters<f64> = init_he(NetworkArchitecture::new(3, 8).unwrap(), 2).unwrap();
        assert_eq!(loss_value(&p, &objective).unwrap(), 0.0);
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let c = case(ProfileKind::Sinusoidal, 1000.0);
        let colloc = CollocationSet::random(300, 1.0, 5).unwrap();
        let objective = PressureObjective::new(&c, &colloc).unwrap();
        let p: NetworkParameters<f64> = init_he(NetworkArchitecture::new(3, 5).unwrap(), 8).unwrap();
        let (_, g) = loss_and_param_gradient(&p, &objective).unwrap();
        let flat = p.to_flat();
        let h = 1e-6;
        for k in (0..flat.len()).step_by(3) {
            let mut a = flat.clone();
            a[k] += h;
            let mut b = flat.clone();
            b[k] -= h;
            let fa = loss_value(&NetworkParameters::from_flat(p.arch, 1.0, &a).unwrap(), &objective).unwrap();
            let fb = loss_value(&NetworkParameters::from_flat(p.arch, 1.0, &b).unwrap(), &objective).unwrap();
            let fd = (fa - fb) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * (1.0 + g[k].abs()), "coord {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn relative_error_properties() {
        let t: Vec<Complex<f64>> = (0..10).map(|i| Complex::new(i as f64 + 1.0, 2.0 - i as f64 * 0.3)).collect();
        assert_eq!(relative_error_channels(&t, &t).unwrap(), (0.0, 0.0));
        let scaled: Vec<_> = t.iter().map(|v| v * 1.01).collect();
        let (r, i) = relative_error_channels(&scaled, &t).unwrap();
        assert_relative_eq!(r, 0.01, max_relative = 1e-12);
        assert_relative_eq!(i, 0.01, max_relative = 1e-12);
        let zero = vec![Complex::new(1.0, 0.0); 3];
        assert!(matches!(
            relative_error_channels(&zero, &zero),
            Err(PinnError::ZeroReference("imaginary"))
        ));
    }

    #[test]
    fn evaluation_grid_endpoints() {
        let g = evaluation_grid(1.0f64, 500);
        assert_eq!(g.len(), 500);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[499], 1.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
