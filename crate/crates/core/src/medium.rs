//! Steady mean-flow field in a uniform duct with an axial temperature profile.
//!
//! The mean velocity follows from combining steady mass and momentum
//! conservation with the perfect-gas law, which yields a quadratic in `ū(x)`:
//!
//! ```text
//! a1 ū² + a2 ū + a3 T̄(x) = 0
//! a1 = ρ̄₀ū₀,  a2 = -(p̄₀ + ρ̄₀ū₀²),  a3 = p̄₀ū₀/T̄₀
//! ```
//!
//! The smaller root is the subsonic branch. Pressure, density and the
//! logarithmic density gradients `α = ρ̄'/ρ̄`, `β = ρ̄''/ρ̄` follow in closed
//! form from the analytic temperature derivatives.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// `|γM² − 1|` below this is treated as the sonic singularity of `α`.
pub const SONIC_TOLERANCE: f64 = 1e-8;

/// Relative tolerance on `|2a1ū + a2| / |a2|` for the curvature chain.
pub const DEGENERATE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MediumError {
    #[error("invalid temperature profile: {0}")]
    InvalidProfile(String),
    #[error("invalid inlet conditions: {0}")]
    InvalidInlet(String),
    #[error("no subsonic mean flow at x = {x} m (discriminant {discriminant:e})")]
    NegativeDiscriminant { x: f64, discriminant: f64 },
    #[error("non-positive mean velocity root {root} m/s at x = {x} m")]
    NonPositiveRoot { x: f64, root: f64 },
    #[error("sonic singularity at x = {x} m (M = {mach})")]
    SonicSingularity { x: f64, mach: f64 },
    #[error("degenerate denominator 2·a1·ū + a2 at x = {x} m")]
    DegenerateDenominator { x: f64 },
    #[error("x = {x} m lies outside the duct [0, {length}] m")]
    OutOfDomain { x: f64, length: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Linear,
    Sinusoidal,
    Constant,
}

impl ProfileKind {
    pub const ALL: [ProfileKind; 3] = [
        ProfileKind::Linear,
        ProfileKind::Sinusoidal,
        ProfileKind::Constant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProfileKind::Linear => "linear",
            ProfileKind::Sinusoidal => "sinusoidal",
            ProfileKind::Constant => "constant",
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProfileKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(ProfileKind::Linear),
            "sinusoidal" | "sine" => Ok(ProfileKind::Sinusoidal),
            "constant" | "uniform" => Ok(ProfileKind::Constant),
            other => Err(format!(
                "unknown profile '{other}' (expected linear, sinusoidal or constant)"
            )),
        }
    }
}

/// Analytic mean temperature `T̄(x)` on `[0, L]`.
///
/// * linear: `T̄₀ + T̄ₘx` with `T̄ₘ = -(T̄₀ - T̄_L)/L`
/// * sinusoidal: `½[T̄_d sin(5πx/(4L) + π/4) + T̄_s]`, peak `T̄₀` at `x = L/5`
/// * constant: `T̄_s/2`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureProfile<T> {
    pub kind: ProfileKind,
    /// Reference (inlet) temperature `T̄₀` in K.
    pub inlet_temperature: T,
    /// Outlet temperature `T̄_L` in K.
    pub outlet_temperature: T,
    /// Duct length in m.
    pub length: T,
}

impl<T: Real> TemperatureProfile<T> {
    pub fn new(kind: ProfileKind, t0: T, tl: T, length: T) -> Result<Self, MediumError> {
        if !(t0 > T::zero() && t0.is_finite()) || !(tl > T::zero() && tl.is_finite()) {
            return Err(MediumError::InvalidProfile(format!(
                "temperatures must be positive and finite (T0 = {t0}, TL = {tl})"
            )));
        }
        if !(length > T::zero() && length.is_finite()) {
            return Err(MediumError::InvalidProfile(format!(
                "length must be positive (L = {length})"
            )));
        }
        Ok(Self {
            kind,
            inlet_temperature: t0,
            outlet_temperature: tl,
            length,
        })
    }

    /// Reference profile: 1600 K inlet, 800 K outlet, 1 m duct.
    pub fn reference(kind: ProfileKind) -> Self {
        Self::new(kind, T::lit(1600.0), T::lit(800.0), T::one()).expect("reference profile")
    }

    fn difference(&self) -> T {
        self.inlet_temperature - self.outlet_temperature
    }

    fn sum(&self) -> T {
        self.inlet_temperature + self.outlet_temperature
    }

    fn phase(&self, x: T) -> T {
        T::lit(1.25) * T::PI() * x / self.length + T::FRAC_PI_4()
    }

    fn phase_rate(&self) -> T {
        T::lit(1.25) * T::PI() / self.length
    }

    pub fn temperature(&self, x: T) -> T {
        let half = T::lit(0.5);
        match self.kind {
            ProfileKind::Linear => {
                let slope = -self.difference() / self.length;
                self.inlet_temperature + slope * x
            }
            ProfileKind::Sinusoidal => {
                half * (self.difference() * self.phase(x).sin() + self.sum())
            }
            ProfileKind::Constant => half * self.sum(),
        }
    }

    pub fn gradient(&self, x: T) -> T {
        match self.kind {
            ProfileKind::Linear => -self.difference() / self.length,
            ProfileKind::Sinusoidal => {
                T::lit(0.5) * self.difference() * self.phase_rate() * self.phase(x).cos()
            }
            ProfileKind::Constant => T::zero(),
        }
    }

    pub fn curvature(&self, x: T) -> T {
        match self.kind {
            ProfileKind::Linear | ProfileKind::Constant => T::zero(),
            ProfileKind::Sinusoidal => {
                let w = self.phase_rate();
                -T::lit(0.5) * self.difference() * w * w * self.phase(x).sin()
            }
        }
    }

    /// Smallest temperature over `[0, L]`.
    pub fn minimum(&self) -> T {
        match self.kind {
            ProfileKind::Constant => self.temperature(T::zero()),
            _ => self.inlet_temperature.min(self.outlet_temperature).min(
                // sinusoidal profile with T0 < TL dips below both ends
                T::lit(0.5) * (self.sum() - self.difference().abs()),
            ),
        }
    }
}

/// Steady inlet state of the gas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InletConditions<T> {
    /// Mean pressure `p̄₀` in Pa.
    pub pressure: T,
    /// Mean temperature `T̄₀` in K.
    pub temperature: T,
    /// Inlet Mach number `M₀`.
    pub mach: T,
    /// Ratio of specific heats `γ`.
    pub gamma: T,
    /// Specific gas constant `R` in J/(kg·K).
    pub gas_constant: T,
}

impl<T: Real> InletConditions<T> {
    pub fn new(pressure: T, temperature: T, mach: T, gamma: T, gas_constant: T) -> Result<Self, MediumError> {
        let inlet = Self {
            pressure,
            temperature,
            mach,
            gamma,
            gas_constant,
        };
        inlet.validate()?;
        Ok(inlet)
    }

    /// Air at 1 bar, 1600 K, M = 0.2.
    pub fn reference() -> Self {
        Self::new(
            T::lit(1e5),
            T::lit(1600.0),
            T::lit(0.2),
            T::lit(1.4),
            T::lit(287.0),
        )
        .expect("reference inlet")
    }

    pub fn validate(&self) -> Result<(), MediumError> {
        let bad = |what: &str| Err(MediumError::InvalidInlet(what.to_string()));
        if !(self.pressure > T::zero() && self.pressure.is_finite()) {
            return bad("pressure must be positive");
        }
        if !(self.temperature > T::zero() && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if !(self.mach > T::zero() && self.mach < T::one()) {
            return bad("Mach number must lie in (0, 1)");
        }
        if !(self.gamma > T::one() && self.gamma.is_finite()) {
            return bad("gamma must exceed 1");
        }
        if !(self.gas_constant > T::zero() && self.gas_constant.is_finite()) {
            return bad("gas constant must be positive");
        }
        Ok(())
    }

    pub fn sound_speed(&self) -> T {
        (self.gamma * self.gas_constant * self.temperature).sqrt()
    }

    /// `ū₀ = M₀ √(γRT̄₀)`.
    pub fn velocity(&self) -> T {
        self.mach * self.sound_speed()
    }

    /// `ρ̄₀ = p̄₀ / (RT̄₀)`.
    pub fn density(&self) -> T {
        mean_density(self.pressure, self.temperature, self.gas_constant)
    }
}

/// Coefficients of the mean-velocity quadratic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityQuadratic<T> {
    pub a1: T,
    pub a2: T,
    pub a3: T,
}

impl<T: Real> VelocityQuadratic<T> {
    pub fn from_inlet(inlet: &InletConditions<T>) -> Self {
        let u0 = inlet.velocity();
        let rho0 = inlet.density();
        Self {
            a1: rho0 * u0,
            a2: -(inlet.pressure + rho0 * u0 * u0),
            a3: inlet.pressure * u0 / inlet.temperature,
        }
    }

    pub fn discriminant(&self, temperature: T) -> T {
        self.a2 * self.a2 - T::lit(4.0) * self.a1 * self.a3 * temperature
    }

    /// Both real roots `(smaller, larger)` using the cancellation-free form.
    pub fn roots(&self, temperature: T) -> Option<(T, T)> {
        let disc = self.discriminant(temperature);
        if !(disc >= T::zero()) {
            return None;
        }
        let q = -T::lit(0.5) * (self.a2 + self.a2.signum() * disc.sqrt());
        let r1 = q / self.a1;
        let r2 = self.a3 * temperature / q;
        Some((r1.min(r2), r1.max(r2)))
    }
}

/// All steady quantities at one axial position (and frequency).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFlowSample<T> {
    pub x: T,
    pub temperature: T,
    pub temperature_gradient: T,
    pub temperature_curvature: T,
    pub velocity: T,
    pub pressure: T,
    pub density: T,
    pub sound_speed: T,
    pub mach: T,
    /// `k = 2πf/c̄` in rad/m.
    pub wavenumber: T,
    /// `α = ρ̄'/ρ̄` in 1/m.
    pub alpha: T,
    /// `β = ρ̄''/ρ̄` in 1/m².
    pub beta: T,
    pub mach_gradient: T,
    pub pressure_gradient: T,
    pub pressure_curvature: T,
}

/// Mean-flow field for one temperature profile and inlet state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFlow<T> {
    pub profile: TemperatureProfile<T>,
    pub inlet: InletConditions<T>,
    pub quadratic: VelocityQuadratic<T>,
}

impl<T: Real> MeanFlow<T> {
    pub fn new(profile: TemperatureProfile<T>, inlet: InletConditions<T>) -> Result<Self, MediumError> {
        inlet.validate()?;
        if !(profile.minimum() > T::zero()) {
            return Err(MediumError::InvalidProfile(
                "temperature must stay positive over the duct".into(),
            ));
        }
        Ok(Self {
            profile,
            inlet,
            quadratic: VelocityQuadratic::from_inlet(&inlet),
        })
    }

    pub fn length(&self) -> T {
        self.profile.length
    }

    fn check_domain(&self, x: T) -> Result<(), MediumError> {
        if x >= T::zero() && x <= self.profile.length {
            Ok(())
        } else {
            Err(MediumError::OutOfDomain {
                x: x.f64(),
                length: self.profile.length.f64(),
            })
        }
    }

    /// Selected (subsonic) and rejected roots of the velocity quadratic.
    pub fn velocity_roots(&self, x: T) -> Result<(T, T), MediumError> {
        let t = self.profile.temperature(x);
        let (small, large) = self.quadratic.roots(t).ok_or(MediumError::NegativeDiscriminant {
            x: x.f64(),
            discriminant: self.quadratic.discriminant(t).f64(),
        })?;
        if !(small > T::zero()) {
            return Err(MediumError::NonPositiveRoot {
                x: x.f64(),
                root: small.f64(),
            });
        }
        // At the reference temperature the subsonic root is the inlet velocity itself.
        let inlet = &self.inlet;
        if t == inlet.temperature && inlet.gamma * inlet.mach * inlet.mach < T::one() {
            return Ok((inlet.velocity(), large));
        }
        Ok((small, large))
    }

    pub fn velocity(&self, x: T) -> Result<T, MediumError> {
        self.velocity_roots(x).map(|(u, _)| u)
    }

    pub fn pressure(&self, x: T) -> Result<T, MediumError> {
        Ok(mean_pressure(&self.inlet, self.velocity(x)?))
    }

    pub fn density(&self, x: T) -> Result<T, MediumError> {
        let p = self.pressure(x)?;
        Ok(mean_density(p, self.profile.temperature(x), self.inlet.gas_constant))
    }

    pub fn mach(&self, x: T) -> Result<T, MediumError> {
        let c = (self.inlet.gamma * self.inlet.gas_constant * self.profile.temperature(x)).sqrt();
        Ok(self.velocity(x)? / c)
    }

    fn alpha_from(&self, x: T, mach: T) -> Result<T, MediumError> {
        let denom = self.inlet.gamma * mach * mach - T::one();
        if denom.abs() < T::lit(SONIC_TOLERANCE) {
            return Err(MediumError::SonicSingularity {
                x: x.f64(),
                mach: mach.f64(),
            });
        }
        let t = self.profile.temperature(x);
        Ok(self.profile.gradient(x) / (t * denom))
    }

    /// `α = (1/(γM² − 1)) (1/T̄) dT̄/dx`.
    pub fn alpha(&self, x: T) -> Result<T, MediumError> {
        self.alpha_from(x, self.mach(x)?)
    }

    /// `dM/dx = −(Mα/2)(1 + γM²)`.
    pub fn mach_gradient(&self, x: T) -> Result<T, MediumError> {
        let m = self.mach(x)?;
        let alpha = self.alpha_from(x, m)?;
        Ok(mach_gradient(m, alpha, self.inlet.gamma))
    }

    /// `β = ρ̄''/ρ̄` from the closed-form pressure chain.
    pub fn beta(&self, x: T) -> Result<T, MediumError> {
        let m = self.mach(x)?;
        let alpha = self.alpha_from(x, m)?;
        let u = self.velocity(x)?;
        let p = mean_pressure(&self.inlet, u);
        let (_, _, beta) = self.pressure_chain(x, u, p, alpha)?;
        Ok(beta)
    }

    /// Returns `(dp̄/dx, d²p̄/dx², β)`.
    fn pressure_chain(&self, x: T, u: T, p: T, alpha: T) -> Result<(T, T, T), MediumError> {
        let VelocityQuadratic { a1, a2, a3 } = self.quadratic;
        let two = T::lit(2.0);
        let denom = two * a1 * u + a2;
        if denom.abs() < T::lit(DEGENERATE_TOLERANCE) * a2.abs() {
            return Err(MediumError::DegenerateDenominator { x: x.f64() });
        }
        let t = self.profile.temperature(x);
        let dt = self.profile.gradient(x);
        let ddt = self.profile.curvature(x);
        // ū' = −αū; differentiating the quadratic twice gives ū''.
        let du = -alpha * u;
        let ddu = -(two * a1 * du * du + a3 * ddt) / denom;
        let dp = -a1 * du;
        let ddp = -a1 * ddu;
        let lt = dt / t;
        let beta = ddp / p + two * (lt - dp / p) * lt - ddt / t;
        Ok((dp, ddp, beta))
    }

    /// Bundles every steady quantity at `x` for acoustic frequency `frequency` (Hz).
    pub fn sample(&self, frequency: T, x: T) -> Result<MeanFlowSample<T>, MediumError> {
        self.check_domain(x)?;
        let inlet = &self.inlet;
        let t = self.profile.temperature(x);
        let u = self.velocity(x)?;
        let p = mean_pressure(inlet, u);
        let rho = mean_density(p, t, inlet.gas_constant);
        let c = (inlet.gamma * inlet.gas_constant * t).sqrt();
        let mach = u / c;
        let alpha = self.alpha_from(x, mach)?;
        let (dp, ddp, beta) = self.pressure_chain(x, u, p, alpha)?;
        Ok(MeanFlowSample {
            x,
            temperature: t,
            temperature_gradient: self.profile.gradient(x),
            temperature_curvature: self.profile.curvature(x),
            velocity: u,
            pressure: p,
            density: rho,
            sound_speed: c,
            mach,
            wavenumber: T::TAU() * frequency / c,
            alpha,
            beta,
            mach_gradient: mach_gradient(mach, alpha, inlet.gamma),
            pressure_gradient: dp,
            pressure_curvature: ddp,
        })
    }
}

fn mach_gradient<T: Real>(mach: T, alpha: T, gamma: T) -> T {
    -(mach * alpha / T::lit(2.0)) * (T::one() + gamma * mach * mach)
}

/// Subsonic root of the mean-velocity quadratic at `x`.
pub fn solve_mean_velocity<T: Real>(
    profile: &TemperatureProfile<T>,
    inlet: &InletConditions<T>,
    x: T,
) -> Result<T, MediumError> {
    MeanFlow::new(*profile, *inlet)?.velocity(x)
}

/// `p̄(x) = p̄₀ + ρ̄₀ū₀(ū₀ − ū(x))`.
pub fn mean_pressure<T: Real>(inlet: &InletConditions<T>, velocity: T) -> T {
    let u0 = inlet.velocity();
    inlet.pressure + inlet.density() * u0 * (u0 - velocity)
}

/// Perfect-gas density `p̄/(RT̄)`.
pub fn mean_density<T: Real>(pressure: T, temperature: T, gas_constant: T) -> T {
    pressure / (gas_constant * temperature)
}

pub fn alpha_at<T: Real>(
    profile: &TemperatureProfile<T>,
    inlet: &InletConditions<T>,
    x: T,
) -> Result<T, MediumError> {
    MeanFlow::new(*profile, *inlet)?.alpha(x)
}

pub fn dmach_dx_at<T: Real>(
    profile: &TemperatureProfile<T>,
    inlet: &InletConditions<T>,
    x: T,
) -> Result<T, MediumError> {
    MeanFlow::new(*profile, *inlet)?.mach_gradient(x)
}

pub fn beta_at<T: Real>(
    profile: &TemperatureProfile<T>,
    inlet: &InletConditions<T>,
    x: T,
) -> Result<T, MediumError> {
    MeanFlow::new(*profile, *inlet)?.beta(x)
}

pub fn sample<T: Real>(
    profile: &TemperatureProfile<T>,
    inlet: &InletConditions<T>,
    frequency: T,
    x: T,
) -> Result<MeanFlowSample<T>, MediumError> {
    MeanFlow::new(*profile, *inlet)?.sample(frequency, x)
}
