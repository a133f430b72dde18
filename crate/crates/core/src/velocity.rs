//! Particle velocity from a trained pressure network.
//!
//! Two routes:
//!
//! * direct: `û = ((A−F)/C)p̃_t + ((B−D)/C)p̃_t'` using the trial-solution jet;
//! * transfer: a second network `ũ` is trained on the momentum residual
//!   `Cũ + Dp̃_t' + ũ' + Fp̃_t` with the pressure network frozen.
//!
//! The transfer network output is multiplied by a fixed velocity scale
//! `s = max(|p̂₀|, |p̂_L|)/(ρ̄c̄)|ₓ₌₀` so that its raw outputs are O(1), and each
//! residual is divided by `s|C|` so the loss measures a relative mismatch.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{ArrayView2, ArrayViewMut2};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::coefficients::{momentum_coeffs_at, MomentumCoefficients};
use crate::network::{forward_batch, init_he, loss_value, NetworkArchitecture, NetworkParameters};
use crate::network::JetObjective;
use crate::oracle::ZERO_C_TOLERANCE;
use crate::pinn::{optimize, trial_pressure_batch, CollocationSet, FrequencyCase, PinnError, TrainingConfig, TrainingReport};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VelocityMethod {
    Direct,
    Transfer,
}

impl fmt::Display for VelocityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VelocityMethod::Direct => "direct",
            VelocityMethod::Transfer => "transfer",
        })
    }
}

impl FromStr for VelocityMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" => Ok(VelocityMethod::Direct),
            "transfer" => Ok(VelocityMethod::Transfer),
            other => Err(format!("unknown velocity method '{other}'")),
        }
    }
}

/// Complex velocity samples (m/s) with the method that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField<T> {
    pub x: Vec<T>,
    pub velocity: Vec<Complex<T>>,
    pub method: VelocityMethod,
}

fn momentum_at<T: Real>(case: &FrequencyCase<T>, x: T) -> Result<MomentumCoefficients<T>, PinnError> {
    let s = case.flow.sample(case.frequency, x)?;
    let m = momentum_coeffs_at(&s, case.gamma(), case.omega())?;
    if m.c.norm() < T::lit(ZERO_C_TOLERANCE) {
        return Err(PinnError::InvalidConfig(format!("momentum coefficient C vanishes at x = {x}")));
    }
    Ok(m)
}

/// Direct velocity at one point.
pub fn velocity_direct<T: Real>(
    pressure: &NetworkParameters<T>,
    case: &FrequencyCase<T>,
    x: T,
) -> Result<Complex<T>, PinnError> {
    Ok(velocity_direct_field(pressure, case, &[x])?.velocity[0])
}

/// Direct velocity on a grid.
pub fn velocity_direct_field<T: Real>(
    pressure: &NetworkParameters<T>,
    case: &FrequencyCase<T>,
    grid: &[T],
) -> Result<VelocityField<T>, PinnError> {
    let jets = trial_pressure_batch(pressure, &case.boundary, case.length(), grid);
    let velocity = grid
        .iter()
        .zip(&jets)
        .map(|(&x, j)| Ok(momentum_at(case, x)?.velocity(j.value, j.dx)))
        .collect::<Result<Vec<_>, PinnError>>()?;
    Ok(VelocityField {
        x: grid.to_vec(),
        velocity,
        method: VelocityMethod::Direct,
    })
}

/// Velocity scale `max(|p̂₀|, |p̂_L|)/(ρ̄c̄)` at the inlet.
pub fn velocity_scale<T: Real>(case: &FrequencyCase<T>) -> Result<T, PinnError> {
    let s = case.flow.sample(case.frequency, T::zero())?;
    let amplitude = case.boundary.p0.norm().max(case.boundary.pl.norm());
    let amplitude = if amplitude > T::zero() { amplitude } else { T::one() };
    Ok(amplitude / (s.density * s.sound_speed))
}

/// How the transfer network output becomes a velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VelocityAnchor {
    /// `ũ = s·N(x)`.
    Free,
    /// `ũ = û₀ + (x/L)·s·N(x)` with `û₀` the direct velocity at the inlet.
    Inlet,
}

/// A trained velocity network and the map from its outputs to `ũ`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityNetwork<T> {
    pub params: NetworkParameters<T>,
    pub scale: T,
    /// Inlet value `û₀` and duct length when anchored.
    pub anchor: Option<(Complex<T>, T)>,
}

#[inline]
fn anchored<T: Real>(anchor: Option<(Complex<T>, T)>, x: T, n: Complex<T>, dn: Complex<T>) -> (Complex<T>, Complex<T>) {
    match anchor {
        None => (n, dn),
        Some((u0, length)) => (u0 + n * (x / length), n / length + dn * (x / length)),
    }
}

impl<T: Real> VelocityNetwork<T> {
    /// `(ũ, ũ')` at each point.
    pub fn evaluate(&self, xs: &[T]) -> Vec<(Complex<T>, Complex<T>)> {
        let jet = forward_batch(&self.params, xs);
        let b = xs.len();
        (0..b)
            .map(|i| {
                let n = Complex::new(jet[[0, i]], jet[[1, i]]) * self.scale;
                let dn = Complex::new(jet[[0, b + i]], jet[[1, b + i]]) * self.scale;
                anchored(self.anchor, xs[i], n, dn)
            })
            .collect()
    }

    pub fn field(&self, grid: &[T]) -> VelocityField<T> {
        VelocityField {
            x: grid.to_vec(),
            velocity: self.evaluate(grid).into_iter().map(|(u, _)| u).collect(),
            method: VelocityMethod::Transfer,
        }
    }
}

struct MomentumPoint<T> {
    c: Complex<T>,
    /// `Dp̃_t' + Fp̃_t`, fixed by the frozen pressure network.
    source: Complex<T>,
    /// `1/(s|C|)`.
    weight: T,
}

/// Momentum residual objective for the velocity network.
pub struct VelocityObjective<T> {
    points: Vec<T>,
    data: Vec<MomentumPoint<T>>,
    scale: T,
    anchor: Option<(Complex<T>, T)>,
}

impl<T: Real> VelocityObjective<T> {
    pub fn new(
        pressure: &NetworkParameters<T>,
        case: &FrequencyCase<T>,
        colloc: &CollocationSet<T>,
        scale: T,
        anchor: VelocityAnchor,
    ) -> Result<Self, PinnError> {
        let jets = trial_pressure_batch(pressure, &case.boundary, case.length(), &colloc.points);
        let data = colloc
            .points
            .iter()
            .zip(&jets)
            .map(|(&x, j)| {
                let m = momentum_at(case, x)?;
                Ok(MomentumPoint {
                    c: m.c,
                    source: m.d * j.dx + m.f * j.value,
                    weight: T::one() / (scale * m.c.norm()),
                })
            })
            .collect::<Result<Vec<_>, PinnError>>()?;
        let anchor = match anchor {
            VelocityAnchor::Free => None,
            VelocityAnchor::Inlet => Some((velocity_direct(pressure, case, T::zero())?, case.length())),
        };
        Ok(Self {
            points: colloc.points.clone(),
            data,
            scale,
            anchor,
        })
    }

    /// Normalised residuals `(Cũ + ũ' + Dp̃' + Fp̃)/(s|C|)` for given velocity samples.
    pub fn residuals(&self, samples: &[(Complex<T>, Complex<T>)]) -> Vec<Complex<T>> {
        self.data
            .iter()
            .zip(samples)
            .map(|(d, (u, du))| (d.c * u + du + d.source) * d.weight)
            .collect()
    }

    /// `(L_u, L_uᴿ, L_uᴵ)` from normalised residuals.
    pub fn split_loss(residuals: &[Complex<T>]) -> (T, T, T) {
        let n = T::from_usize(residuals.len()).expect("count");
        let re = residuals.iter().map(|r| r.re * r.re).sum::<T>() / n;
        let im = residuals.iter().map(|r| r.im * r.im).sum::<T>() / n;
        (re + im, re, im)
    }
}

impl<T: Real> JetObjective<T> for VelocityObjective<T> {
    fn points(&self) -> &[T] {
        &self.points
    }

    fn chunk(&self, range: Range<usize>, jet: ArrayView2<T>, adjoint: Option<ArrayViewMut2<T>>) -> T {
        let batch = range.len();
        let n = T::from_usize(self.points.len()).expect("count");
        let two = T::lit(2.0);
        let s = self.scale;
        let mut loss = T::zero();
        let mut adjoint = adjoint;
        for (i, idx) in range.enumerate() {
            let d = &self.data[idx];
            let x = self.points[idx];
            let out = Complex::new(jet[[0, i]], jet[[1, i]]) * s;
            let dout = Complex::new(jet[[0, batch + i]], jet[[1, batch + i]]) * s;
            let (u, du) = anchored(self.anchor, x, out, dout);
            let r = (d.c * u + du + d.source) * d.weight;
            loss += (r.re * r.re + r.im * r.im) / n;
            if let Some(a) = adjoint.as_mut() {
                let gm = r * (two * d.weight / n);
                let gu = d.c.conj() * gm;
                let gdu = gm;
                let (gn, gdn) = match self.anchor {
                    None => (gu, gdu),
                    Some((_, length)) => (gu * (x / length) + gdu / length, gdu * (x / length)),
                };
                let (gn, gdn) = (gn * s, gdn * s);
                a[[0, i]] = gn.re;
                a[[1, i]] = gn.im;
                a[[0, batch + i]] = gdn.re;
                a[[1, batch + i]] = gdn.im;
                a[[0, 2 * batch + i]] = T::zero();
                a[[1, 2 * batch + i]] = T::zero();
            }
        }
        loss
    }
}

/// Trains a velocity network against the momentum residual with the pressure network frozen.
pub fn train_velocity_transfer<T: Real>(
    pressure: &NetworkParameters<T>,
    case: &FrequencyCase<T>,
    arch: NetworkArchitecture,
    colloc: &CollocationSet<T>,
    config: &TrainingConfig,
    anchor: VelocityAnchor,
) -> Result<(VelocityNetwork<T>, TrainingReport), PinnError> {
    config.validate()?;
    let initial = init_he::<T>(arch, config.seed)?.with_input_scale(T::lit(config.input_scale));
    train_velocity_transfer_from(pressure, case, initial, colloc, config, anchor)
}

/// Continues velocity training from the given parameters.
pub fn train_velocity_transfer_from<T: Real>(
    pressure: &NetworkParameters<T>,
    case: &FrequencyCase<T>,
    initial: NetworkParameters<T>,
    colloc: &CollocationSet<T>,
    config: &TrainingConfig,
    anchor: VelocityAnchor,
) -> Result<(VelocityNetwork<T>, TrainingReport), PinnError> {
    config.validate()?;
    let started = Instant::now();
    let scale = velocity_scale(case)?;
    let objective = VelocityObjective::new(pressure, case, colloc, scale, anchor)?;
    let initial_loss = loss_value(&initial, &objective)?;
    let (params, outcome) = optimize(initial, &objective, &config.optimizer)?;
    let network = VelocityNetwork {
        params,
        scale,
        anchor: objective.anchor,
    };
    let (total, re, im) = VelocityObjective::split_loss(&objective.residuals(&network.evaluate(&colloc.points)));
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
        parameter_count: network.params.parameter_count(),
        loss_history: outcome.history.iter().map(|v| v.f64()).collect(),
    };
    Ok((network, report))
}
