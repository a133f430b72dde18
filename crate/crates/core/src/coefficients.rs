//! Complex coefficients of the governing acoustic equations.
//!
//! Time dependence is `e^{−jωt}`. The pressure equation reads
//! `ζ₁ p̂'' + ζ₂ p̂' + ζ₃ p̂ = 0`, and the continuity/momentum pair is
//!
//! ```text
//! A p̂ + B p̂' = û' + C û        (continuity)
//! C û + D p̂' + û' + F p̂ = 0    (momentum)
//! ```
//!
//! Terms beyond second order in the Mach number are dropped.

use num_complex::Complex;
use thiserror::Error;

use crate::medium::MeanFlowSample;
use crate::scalar::Real;

/// Mean velocities at or below this (m/s) make `C`, `D`, `F` undefined.
pub const ZERO_FLOW_TOLERANCE: f64 = 1e-12;

/// Validity ratios above this value deserve a warning.
pub const VALIDITY_WARNING: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoefficientError {
    #[error("wavenumber must be positive (k = {0})")]
    NonPositiveWavenumber(f64),
    #[error("mean velocity {0} m/s too small for the momentum coefficients")]
    ZeroMeanFlow(f64),
}

/// `ω = 2πf`.
pub fn angular_frequency<T: Real>(frequency: T) -> T {
    T::TAU() * frequency
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaCoefficients<T> {
    pub zeta1: Complex<T>,
    pub zeta2: Complex<T>,
    pub zeta3: Complex<T>,
}

impl<T: Real> ZetaCoefficients<T> {
    /// `ζ₁p'' + ζ₂p' + ζ₃p` for a pressure value and its derivatives.
    pub fn residual(&self, p: Complex<T>, dp: Complex<T>, ddp: Complex<T>) -> Complex<T> {
        self.zeta1 * ddp + self.zeta2 * dp + self.zeta3 * p
    }

    /// Coefficients with `ω → −ω`, i.e. the complex conjugates.
    pub fn conj(&self) -> Self {
        Self {
            zeta1: self.zeta1.conj(),
            zeta2: self.zeta2.conj(),
            zeta3: self.zeta3.conj(),
        }
    }
}

/// Builds `ζ₁, ζ₂, ζ₃` from the local medium state.
///
/// ```text
/// ζ₁ = 1 − M² − j(2M²/k) M'
/// ζ₂ = −(1 − (3+γ)M²)α + j(2Mk + Mβ/k − 2Mα²/k)
/// ζ₃ = k² − (2−γ)M²β − (4γ−5)M²α² − j((2+γ)Mkα − 2γkM² M')
/// ```
pub fn zeta_at<T: Real>(sample: &MeanFlowSample<T>, gamma: T) -> Result<ZetaCoefficients<T>, CoefficientError> {
    let k = sample.wavenumber;
    if !(k > T::zero()) {
        return Err(CoefficientError::NonPositiveWavenumber(k.f64()));
    }
    Ok(zeta_from_parts(
        sample.mach,
        k,
        sample.alpha,
        sample.beta,
        sample.mach_gradient,
        gamma,
    ))
}

/// Same as [`zeta_at`] from raw `(M, k, α, β, dM/dx, γ)`.
pub fn zeta_from_parts<T: Real>(m: T, k: T, alpha: T, beta: T, dm: T, gamma: T) -> ZetaCoefficients<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let m2 = m * m;

    let zeta1 = Complex::new(one - m2, -two * m2 * dm / k);

    let zeta2 = Complex::new(
        -(one - (T::lit(3.0) + gamma) * m2) * alpha,
        two * m * k + m * beta / k - two * m * alpha * alpha / k,
    );

    let zeta3 = Complex::new(
        k * k - (two - gamma) * m2 * beta - (T::lit(4.0) * gamma - T::lit(5.0)) * m2 * alpha * alpha,
        -(two + gamma) * m * k * alpha + two * gamma * k * m2 * dm,
    );

    ZetaCoefficients { zeta1, zeta2, zeta3 }
}

/// Continuity/momentum coefficients `A, B, C, D, F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumCoefficients<T> {
    pub a: Complex<T>,
    pub b: Complex<T>,
    pub c: Complex<T>,
    pub d: Complex<T>,
    pub f: Complex<T>,
}

impl<T: Real> MomentumCoefficients<T> {
    /// Momentum residual `Cû + Dp' + û' + Fp`.
    pub fn momentum_residual(&self, p: Complex<T>, dp: Complex<T>, u: Complex<T>, du: Complex<T>) -> Complex<T> {
        self.c * u + self.d * dp + du + self.f * p
    }

    /// Continuity residual `Ap + Bp' + û'`.
    pub fn continuity_residual(&self, p: Complex<T>, dp: Complex<T>, du: Complex<T>) -> Complex<T> {
        self.a * p + self.b * dp + du
    }

    /// Velocity from eliminating `û'`: `((A−F)/C)p + ((B−D)/C)p'`.
    pub fn velocity(&self, p: Complex<T>, dp: Complex<T>) -> Complex<T> {
        ((self.a - self.f) * p + (self.b - self.d) * dp) / self.c
    }
}

/// Builds `A, B, C, D, F` at angular frequency `omega` using `ū' = −ūα`.
///
/// ```text
/// A = (−jω − γūα)/(γp̄)
/// B = (M²/(ρ̄ū))(1 − jMα/k + M²α²/k²)
/// C = −jω/ū − α
/// D = 1/(ρ̄ū)
/// F = −M²α/(ρ̄ū)
/// ```
pub fn momentum_coeffs_at<T: Real>(
    sample: &MeanFlowSample<T>,
    gamma: T,
    omega: T,
) -> Result<MomentumCoefficients<T>, CoefficientError> {
    let u = sample.velocity;
    if !(u > T::lit(ZERO_FLOW_TOLERANCE)) {
        return Err(CoefficientError::ZeroMeanFlow(u.f64()));
    }
    let k = sample.wavenumber;
    if k == T::zero() || !k.is_finite() {
        return Err(CoefficientError::NonPositiveWavenumber(k.f64()));
    }
    let zero = T::zero();
    let m = sample.mach;
    let m2 = m * m;
    let alpha = sample.alpha;
    let flux = sample.density * u;

    let a = Complex::new(-gamma * u * alpha, -omega) / (gamma * sample.pressure);
    let b = Complex::new(T::one() + m2 * alpha * alpha / (k * k), -m * alpha / k) * (m2 / flux);
    let c = Complex::new(-alpha, -omega / u);
    let d = Complex::new(T::one() / flux, zero);
    let f = Complex::new(-m2 * alpha / flux, zero);
    Ok(MomentumCoefficients { a, b, c, d, f })
}

/// `|Mα|/k`, the small parameter of the derivation.
pub fn validity_check<T: Real>(sample: &MeanFlowSample<T>) -> Result<T, CoefficientError> {
    let k = sample.wavenumber;
    if !(k > T::zero()) {
        return Err(CoefficientError::NonPositiveWavenumber(k.f64()));
    }
    Ok((sample.mach * sample.alpha).abs() / k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::{InletConditions, MeanFlow, ProfileKind, TemperatureProfile};
    use approx::assert_relative_eq;

    fn sample(kind: ProfileKind, f: f64, x: f64) -> MeanFlowSample<f64> {
        MeanFlow::new(TemperatureProfile::reference(kind), InletConditions::reference())
            .unwrap()
            .sample(f, x)
            .unwrap()
    }

    #[test]
    fn uniform_reduction() {
        let s = sample(ProfileKind::Constant, 500.0, 0.3);
        let z = zeta_at(&s, 1.4).unwrap();
        let (m, k) = (s.mach, s.wavenumber);
        assert_eq!(z.zeta1, Complex::new(1.0 - m * m, 0.0));
        assert_eq!(z.zeta2, Complex::new(0.0, 2.0 * m * k));
        assert_eq!(z.zeta3, Complex::new(k * k, 0.0));
    }

    #[test]
    fn no_flow_limit() {
        let z = zeta_from_parts(0.0, 3.0, 0.7, -0.4, 0.0, 1.4);
        assert_eq!(z.zeta1, Complex::new(1.0, 0.0));
        assert_eq!(z.zeta2, Complex::new(-0.7, 0.0));
        assert_eq!(z.zeta3, Complex::new(9.0, 0.0));
    }

    #[test]
    fn imaginary_parts_vanish_linearly_in_mach() {
        let at = |m: f64| zeta_from_parts(m, 4.0, 0.5, 0.1, -0.5 * m * 0.5 * (1.0 + 1.4 * m * m), 1.4);
        let r = at(1e-4).zeta3.im / at(2e-4).zeta3.im;
        assert_relative_eq!(r, 0.5, max_relative = 1e-3);
        assert!(at(1e-4).zeta1.im.abs() < 1e-10);
    }

    #[test]
    fn momentum_coefficients_uniform() {
        let s = sample(ProfileKind::Constant, 500.0, 0.5);
        let w = angular_frequency(500.0);
        let c = momentum_coeffs_at(&s, 1.4, w).unwrap();
        assert_eq!(c.f, Complex::new(0.0, 0.0));
        assert_relative_eq!(c.c.im, -w / s.velocity, max_relative = 1e-15);
        assert_eq!(c.c.re, 0.0);
        assert_relative_eq!(c.a.im, -w / (1.4 * s.pressure), max_relative = 1e-15);
        assert_relative_eq!((c.d * s.density * s.velocity).re, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn conjugate_symmetry_under_negative_frequency() {
        let s = sample(ProfileKind::Linear, 750.0, 0.4);
        let w = angular_frequency(750.0);
        let mut neg = s;
        neg.wavenumber = -s.wavenumber;
        let p = momentum_coeffs_at(&s, 1.4, w).unwrap();
        let n = momentum_coeffs_at(&neg, 1.4, -w).unwrap();
        for (a, b) in [(p.a, n.a), (p.b, n.b), (p.c, n.c), (p.d, n.d), (p.f, n.f)] {
            assert_eq!(b, a.conj());
        }
        let z = zeta_from_parts(s.mach, s.wavenumber, s.alpha, s.beta, s.mach_gradient, 1.4);
        let zn = zeta_from_parts(s.mach, -s.wavenumber, s.alpha, s.beta, s.mach_gradient, 1.4);
        assert_eq!(zn, z.conj());
    }

    #[test]
    fn plane_wave_impedance() {
        // Uniform medium, no flow limit of the velocity relation: û = ±p/(ρ̄c̄).
        let s = sample(ProfileKind::Constant, 500.0, 0.5);
        let w = angular_frequency(500.0);
        let c = momentum_coeffs_at(&s, 1.4, w).unwrap();
        let m = s.mach;
        let k = s.wavenumber;
        let kp = k / (1.0 + m);
        let u = c.velocity(Complex::new(1.0, 0.0), Complex::new(0.0, kp));
        assert_relative_eq!(u.re, 1.0 / (s.density * s.sound_speed), max_relative = 1e-12);
        assert!(u.im.abs() < 1e-15);
    }

    #[test]
    fn validity_ratio() {
        let s = sample(ProfileKind::Linear, 500.0, 0.0);
        let mut t = s;
        t.wavenumber = 4.5244;
        t.mach = 0.2;
        t.alpha = 0.5297;
        assert_relative_eq!(validity_check(&t).unwrap(), 0.023_415, max_relative = 1e-4);
        let c = sample(ProfileKind::Constant, 500.0, 0.5);
        assert_eq!(validity_check(&c).unwrap(), 0.0);
        let s2 = sample(ProfileKind::Linear, 1000.0, 0.0);
        assert_relative_eq!(validity_check(&s2).unwrap(), 0.5 * validity_check(&s).unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn rejects_zero_flow_and_wavenumber() {
        let mut s = sample(ProfileKind::Linear, 500.0, 0.5);
        s.velocity = 0.0;
        assert!(matches!(momentum_coeffs_at(&s, 1.4, 1.0), Err(CoefficientError::ZeroMeanFlow(_))));
        let mut s = sample(ProfileKind::Linear, 500.0, 0.5);
        s.wavenumber = 0.0;
        assert!(zeta_at(&s, 1.4).is_err());
    }
}
