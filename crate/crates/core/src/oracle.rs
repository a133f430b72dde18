//! Reference solutions independent of the network.
//!
//! * Shooting by superposition: the pressure equation is linear, so two RK4
//!   initial-value integrations (`A`: `p(0) = p̂₀, p'(0) = 0`; `B`:
//!   `p(0) = 0, p'(0) = 1`) combine as `A + cB` with `c` fixed by `p(L) = p̂_L`.
//! * Closed form for a uniform medium: `p̂ = C₊e^{jκ₊x} + C₋e^{jκ₋x}` with
//!   `κ₊ = k/(1+M)`, `κ₋ = −k/(1−M)`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::{momentum_coeffs_at, CoefficientError, ZetaCoefficients};
use crate::medium::{MediumError, ProfileKind};
use crate::pinn::{evaluation_grid, FrequencyCase, PinnError};
use crate::scalar::Real;

/// `|ζ₁|` below this is treated as a singular leading coefficient.
pub const ZETA1_TOLERANCE: f64 = 1e-12;

/// Relative size of `|B(L)|` (or of the boundary determinant) treated as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// `|C|` below this makes the velocity relation singular.
pub const ZERO_C_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Medium(#[from] MediumError),
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
    #[error(transparent)]
    Pinn(#[from] PinnError),
    #[error("leading coefficient ζ₁ vanishes at x = {0} m")]
    SingularZeta1(f64),
    #[error("homogeneous shooting solution vanishes at x = L (resonant basis)")]
    DegenerateHomogeneous,
    #[error("boundary system of the exponential basis is singular")]
    DegenerateBoundarySystem,
    #[error("analytic solution requires the constant temperature profile")]
    NotUniform,
    #[error("field has no pressure gradient samples")]
    MissingGradient,
    #[error("momentum coefficient C vanishes at x = {0} m")]
    ZeroC(f64),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for OracleError {
    fn from(e: csv::Error) -> Self {
        OracleError::Csv(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Pinn,
    Shooting,
    Analytic,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Pinn => "pinn",
            Provenance::Shooting => "shooting",
            Provenance::Analytic => "analytic",
        })
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "pinn" => Ok(Provenance::Pinn),
            "shooting" => Ok(Provenance::Shooting),
            "analytic" => Ok(Provenance::Analytic),
            other => Err(format!("unknown provenance '{other}'")),
        }
    }
}

/// Complex acoustic fields sampled on a grid over `[0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution<T> {
    pub x: Vec<T>,
    pub pressure: Vec<Complex<T>>,
    pub pressure_gradient: Option<Vec<Complex<T>>>,
    pub velocity: Option<Vec<Complex<T>>>,
    pub provenance: Provenance,
}

impl<T: Real> FieldSolution<T> {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Multiplies every field by `factor`.
    pub fn scaled(&self, factor: Complex<T>) -> Self {
        let scale = |v: &Vec<Complex<T>>| v.iter().map(|z| z * factor).collect::<Vec<_>>();
        Self {
            x: self.x.clone(),
            pressure: scale(&self.pressure),
            pressure_gradient: self.pressure_gradient.as_ref().map(scale),
            velocity: self.velocity.as_ref().map(scale),
            provenance: self.provenance,
        }
    }
}

/// Default RK4 step count over `[0, L]`.
pub const DEFAULT_STEPS: usize = 20_000;

/// Default number of evaluation points.
pub const DEFAULT_GRID_POINTS: usize = 500;

type State<T> = [Complex<T>; 2];

#[inline]
fn rhs<T: Real>(z: &ZetaCoefficients<T>, y: &State<T>) -> State<T> {
    [y[1], -(z.zeta2 * y[1] + z.zeta3 * y[0]) / z.zeta1]
}

#[inline]
fn axpy<T: Real>(y: &State<T>, h: T, k: &State<T>) -> State<T> {
    [y[0] + k[0] * h, y[1] + k[1] * h]
}

struct Integration<T> {
    a: Vec<State<T>>,
    b: Vec<State<T>>,
}

fn zeta_checked<T: Real>(case: &FrequencyCase<T>, x: T) -> Result<ZetaCoefficients<T>, OracleError> {
    let x = x.max(T::zero()).min(case.length());
    let z = case.zeta(x)?;
    if z.zeta1.norm() < T::lit(ZETA1_TOLERANCE) {
        return Err(OracleError::SingularZeta1(x.f64()));
    }
    Ok(z)
}

/// Integrates both initial-value problems on `grid`, with `substeps` RK4 steps per interval.
fn integrate<T: Real>(
    case: &FrequencyCase<T>,
    grid: &[T],
    substeps: usize,
    a0: State<T>,
    b0: State<T>,
) -> Result<Integration<T>, OracleError> {
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let two = T::lit(2.0);
    let mut a = a0;
    let mut b = b0;
    let mut out = Integration {
        a: Vec::with_capacity(grid.len()),
        b: Vec::with_capacity(grid.len()),
    };
    out.a.push(a);
    out.b.push(b);
    let mut z_start = zeta_checked(case, grid[0])?;
    for w in grid.windows(2) {
        let h = (w[1] - w[0]) / T::from_usize(substeps).expect("substeps");
        for s in 0..substeps {
            let x = w[0] + h * T::from_usize(s).expect("step");
            let x_end = if s + 1 == substeps { w[1] } else { x + h };
            let z_mid = zeta_checked(case, x + half * h)?;
            let z_end = zeta_checked(case, x_end)?;
            for y in [&mut a, &mut b] {
                let k1 = rhs(&z_start, y);
                let k2 = rhs(&z_mid, &axpy(y, half * h, &k1));
                let k3 = rhs(&z_mid, &axpy(y, half * h, &k2));
                let k4 = rhs(&z_end, &axpy(y, h, &k3));
                for i in 0..2 {
                    y[i] += (k1[i] + (k2[i] + k3[i]) * two + k4[i]) * (h * sixth);
                }
            }
            z_start = z_end;
        }
        out.a.push(a);
        out.b.push(b);
    }
    Ok(out)
}

/// Shooting solution on `grid_points` linearly spaced points, `n_steps` RK4 steps in total.
pub fn solve_bvp_shooting<T: Real>(
    case: &FrequencyCase<T>,
    n_steps: usize,
    grid_points: usize,
) -> Result<FieldSolution<T>, OracleError> {
    if grid_points < 2 {
        return Err(OracleError::Invalid("need at least two grid points".into()));
    }
    let grid = evaluation_grid(case.length(), grid_points);
    solve_bvp_shooting_on(case, n_steps, &grid)
}

/// Shooting solution sampled on an increasing grid spanning `[0, L]`.
pub fn solve_bvp_shooting_on<T: Real>(
    case: &FrequencyCase<T>,
    n_steps: usize,
    grid: &[T],
) -> Result<FieldSolution<T>, OracleError> {
    if grid.len() < 2 || grid[0] != T::zero() || *grid.last().expect("non-empty") != case.length() {
        return Err(OracleError::Invalid("grid must start at 0 and end at L".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(OracleError::Invalid("grid must be strictly increasing".into()));
    }
    if n_steps == 0 {
        return Err(OracleError::Invalid("need at least one RK4 step".into()));
    }
    let substeps = n_steps.div_ceil(grid.len() - 1).max(1);
    let zero = Complex::new(T::zero(), T::zero());
    let p0 = case.boundary.p0;
    let pl = case.boundary.pl;

    let mut slope = Complex::new(T::one(), T::zero());
    let mut run = integrate(case, grid, substeps, [p0, zero], [zero, slope])?;
    let degenerate = |run: &Integration<T>| {
        let end = run.b.last().expect("non-empty")[0].norm();
        let scale = run.b.iter().fold(T::zero(), |m, s| m.max(s[0].norm()));
        !(end > T::lit(DEGENERACY_TOLERANCE) * scale)
    };
    if degenerate(&run) {
        slope = Complex::new(T::zero(), T::one());
        run = integrate(case, grid, substeps, [p0, zero], [zero, slope])?;
        if degenerate(&run) {
            return Err(OracleError::DegenerateHomogeneous);
        }
    }
    let a_end = run.a.last().expect("non-empty")[0];
    let b_end = run.b.last().expect("non-empty")[0];
    let c = (pl - a_end) / b_end;
    let pressure = run.a.iter().zip(&run.b).map(|(a, b)| a[0] + c * b[0]).collect();
    let gradient = run.a.iter().zip(&run.b).map(|(a, b)| a[1] + c * b[1]).collect();
    Ok(FieldSolution {
        x: grid.to_vec(),
        pressure,
        pressure_gradient: Some(gradient),
        velocity: None,
        provenance: Provenance::Shooting,
    })
}

/// Wavenumbers `(κ₊, κ₋) = (k/(1+M), −k/(1−M))` of the uniform-flow equation.
pub fn uniform_wavenumbers<T: Real>(k: T, mach: T) -> (T, T) {
    (k / (T::one() + mach), -k / (T::one() - mach))
}

fn cis<T: Real>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), phase.sin())
}

/// Closed-form uniform-medium solution on `grid_points` points, including `p̂'` and `û`.
pub fn analytic_uniform<T: Real>(case: &FrequencyCase<T>, grid_points: usize) -> Result<FieldSolution<T>, OracleError> {
    if grid_points < 2 {
        return Err(OracleError::Invalid("need at least two grid points".into()));
    }
    analytic_uniform_on(case, &evaluation_grid(case.length(), grid_points))
}

pub fn analytic_uniform_on<T: Real>(case: &FrequencyCase<T>, grid: &[T]) -> Result<FieldSolution<T>, OracleError> {
    if case.flow.profile.kind != ProfileKind::Constant {
        return Err(OracleError::NotUniform);
    }
    let s = case.flow.sample(case.frequency, T::zero())?;
    let (kp, km) = uniform_wavenumbers(s.wavenumber, s.mach);
    let l = case.length();
    let (ep, em) = (cis(kp * l), cis(km * l));
    let det = em - ep;
    if !(det.norm() > T::lit(DEGENERACY_TOLERANCE)) {
        return Err(OracleError::DegenerateBoundarySystem);
    }
    let (p0, pl) = (case.boundary.p0, case.boundary.pl);
    let cp = (p0 * em - pl) / det;
    let cm = (pl - p0 * ep) / det;
    let impedance = s.density * s.sound_speed;
    let j = Complex::new(T::zero(), T::one());
    let mut pressure = Vec::with_capacity(grid.len());
    let mut gradient = Vec::with_capacity(grid.len());
    let mut velocity = Vec::with_capacity(grid.len());
    for &x in grid {
        let wp = cp * cis(kp * x);
        let wm = cm * cis(km * x);
        pressure.push(wp + wm);
        gradient.push(j * (wp * kp + wm * km));
        velocity.push((wp - wm) / impedance);
    }
    Ok(FieldSolution {
        x: grid.to_vec(),
        pressure,
        pressure_gradient: Some(gradient),
        velocity: Some(velocity),
        provenance: Provenance::Analytic,
    })
}

/// Adds `û = ((A−F)/C)p̂ + ((B−D)/C)p̂'` to a field carrying exact `p̂'`.
pub fn oracle_velocity<T: Real>(field: &FieldSolution<T>, case: &FrequencyCase<T>) -> Result<FieldSolution<T>, OracleError> {
    let gradient = field.pressure_gradient.as_ref().ok_or(OracleError::MissingGradient)?;
    let omega = case.omega();
    let mut velocity = Vec::with_capacity(field.len());
    for ((&x, &p), &dp) in field.x.iter().zip(&field.pressure).zip(gradient) {
        let s = case.flow.sample(case.frequency, x)?;
        let m = momentum_coeffs_at(&s, case.gamma(), omega)?;
        if m.c.norm() < T::lit(ZERO_C_TOLERANCE) {
            return Err(OracleError::ZeroC(x.f64()));
        }
        velocity.push(m.velocity(p, dp));
    }
    let mut out = field.clone();
    out.velocity = Some(velocity);
    Ok(out)
}

/// `|p̂|²` at every grid point.
pub fn amplitude<T: Real>(field: &FieldSolution<T>) -> Vec<T> {
    field.pressure.iter().map(|p| p.norm_sqr()).collect()
}

/// Interior local maxima `(x, value)` of a sampled curve.
pub fn local_maxima<T: Real>(x: &[T], values: &[T]) -> Vec<(T, T)> {
    values
        .windows(3)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0] && w[1] >= w[2])
        .map(|(i, w)| (x[i + 1], w[1]))
        .collect()
}

/// Summary of the peak envelope of an amplitude curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakEnvelope<T> {
    pub peaks: Vec<(T, T)>,
}

impl<T: Real> PeakEnvelope<T> {
    pub fn of(x: &[T], values: &[T]) -> Self {
        Self {
            peaks: local_maxima(x, values),
        }
    }

    /// True when every peak exceeds the one before it (at least two peaks).
    pub fn is_increasing(&self) -> bool {
        self.peaks.len() >= 2 && self.peaks.windows(2).all(|w| w[1].1 > w[0].1)
    }

    /// `(max − min)/mean` of the peak heights; zero without peaks.
    pub fn relative_spread(&self) -> T {
        if self.peaks.is_empty() {
            return T::zero();
        }
        let n = T::from_usize(self.peaks.len()).expect("count");
        let max = self.peaks.iter().fold(T::neg_infinity(), |m, p| m.max(p.1));
        let min = self.peaks.iter().fold(T::infinity(), |m, p| m.min(p.1));
        let mean = self.peaks.iter().map(|p| p.1).sum::<T>() / n;
        (max - min) / mean
    }
}

pub const FIELD_CSV_HEADER: [&str; 5] = ["x [m]", "p_re [Pa]", "p_im [Pa]", "u_re [m/s]", "u_im [m/s]"];

/// Fixed 17-significant-digit formatting used in every CSV.
pub fn format_number<T: Real>(v: T) -> String {
    format!("{:.16e}", v.f64())
}

/// Writes `x, p_re, p_im, u_re, u_im`; velocity columns are empty when absent.
pub fn write_field_csv<T: Real, W: Write>(field: &FieldSolution<T>, out: W) -> Result<(), OracleError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIELD_CSV_HEADER)?;
    for i in 0..field.len() {
        let p = field.pressure[i];
        let (ure, uim) = match &field.velocity {
            Some(u) => (format_number(u[i].re), format_number(u[i].im)),
            None => (String::new(), String::new()),
        };
        w.write_record([format_number(field.x[i]), format_number(p.re), format_number(p.im), ure, uim])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field written by [`write_field_csv`] (or any tool using the same columns).
pub fn read_field_csv<T: Real, R: Read>(input: R, provenance: Provenance) -> Result<FieldSolution<T>, OracleError> {
    let mut r = csv::Reader::from_reader(input);
    let mut x = Vec::new();
    let mut pressure = Vec::new();
    let mut velocity = Vec::new();
    let mut has_velocity = true;
    let parse = |s: &str| -> Result<T, OracleError> {
        s.trim()
            .parse::<f64>()
            .map(T::lit)
            .map_err(|_| OracleError::Csv(format!("bad number '{s}'")))
    };
    for record in r.records() {
        let record = record?;
        if record.len() < 3 {
            return Err(OracleError::Csv("expected at least x, p_re, p_im".into()));
        }
        x.push(parse(&record[0])?);
        pressure.push(Complex::new(parse(&record[1])?, parse(&record[2])?));
        match (record.get(3), record.get(4)) {
            (Some(a), Some(b)) if !a.trim().is_empty() && !b.trim().is_empty() => {
                velocity.push(Complex::new(parse(a)?, parse(b)?))
            }
            _ => has_velocity = false,
        }
    }
    Ok(FieldSolution {
        x,
        pressure,
        pressure_gradient: None,
        velocity: if has_velocity && !velocity.is_empty() { Some(velocity) } else { None },
        provenance,
    })
}
