//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! The line search brackets a step satisfying the strong Wolfe conditions
//! and then zooms with safeguarded cubic interpolation. Accepted losses are
//! monotonically non-increasing; when the search fails to decrease the loss
//! the previous iterate is kept and the run stops with
//! [`Termination::LineSearchFailure`].

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when `max |∇f| ≤ gradient_tolerance`.
    pub gradient_tolerance: f64,
    /// Stop when `f ≤ loss_tolerance`.
    pub loss_tolerance: f64,
    /// Stop when a step changes the loss or the parameters by less than this.
    pub change_tolerance: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search_evaluations: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 5000,
            gradient_tolerance: 1e-9,
            loss_tolerance: 1e-300,
            change_tolerance: 1e-15,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_evaluations: 25,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.memory < 1 {
            return Err("L-BFGS memory must be at least 1".into());
        }
        if !(self.gradient_tolerance > 0.0) || !(self.loss_tolerance > 0.0) || !(self.change_tolerance > 0.0) {
            return Err("tolerances must be positive".into());
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(format!("need 0 < c1 < c2 < 1 (c1 = {}, c2 = {})", self.c1, self.c2));
        }
        if self.max_line_search_evaluations < 1 {
            return Err("line search needs at least one evaluation".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    LossTolerance,
    /// Loss or parameter change fell below `change_tolerance`.
    Stalled,
    MaxIterations,
    LineSearchFailure,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::GradientTolerance => "gradient_tolerance",
            Termination::LossTolerance => "loss_tolerance",
            Termination::Stalled => "stalled",
            Termination::MaxIterations => "max_iterations",
            Termination::LineSearchFailure => "line_search_failure",
        })
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome<T> {
    pub x: Vec<T>,
    pub loss: T,
    pub gradient_max: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Loss after each accepted iteration, starting with the initial loss.
    pub history: Vec<T>,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn max_abs<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

fn cubic_minimizer<T: Real>(x1: T, f1: T, g1: T, x2: T, f2: T, g2: T, bounds: Option<(T, T)>) -> T {
    let (lo, hi) = bounds.unwrap_or(if x1 <= x2 { (x1, x2) } else { (x2, x1) });
    let three = T::lit(3.0);
    let two = T::lit(2.0);
    let d1 = g1 + g2 - three * (f1 - f2) / (x1 - x2);
    let d2_sq = d1 * d1 - g1 * g2;
    if d2_sq >= T::zero() {
        let d2 = d2_sq.sqrt();
        let t = if x1 <= x2 {
            x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + two * d2))
        } else {
            x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + two * d2))
        };
        if t.is_finite() {
            return t.max(lo).min(hi);
        }
    }
    (lo + hi) / two
}

struct Trial<T> {
    t: T,
    f: T,
    g: Vec<T>,
    gtd: T,
}

fn evaluate_at<T: Real, E, F>(f: &mut F, x: &[T], t: T, d: &[T], evals: &mut usize) -> Result<Trial<T>, E>
where
    F: FnMut(&[T]) -> Result<(T, Vec<T>), E>,
{
    let xt: Vec<T> = x.iter().zip(d).map(|(&a, &b)| a + t * b).collect();
    let (fv, g) = f(&xt)?;
    *evals += 1;
    let fv = if fv.is_finite() { fv } else { T::infinity() };
    let gtd = dot(&g, d);
    Ok(Trial { t, f: fv, g, gtd })
}

/// Strong-Wolfe search along `d` from `x` (loss `f0`, slope `gtd0 < 0`).
fn strong_wolfe<T: Real, E, F>(
    func: &mut F,
    x: &[T],
    t0: T,
    d: &[T],
    f0: T,
    g0: &[T],
    gtd0: T,
    cfg: &LbfgsConfig,
    evals: &mut usize,
) -> Result<Trial<T>, E>
where
    F: FnMut(&[T]) -> Result<(T, Vec<T>), E>,
{
    let c1 = T::lit(cfg.c1);
    let c2 = T::lit(cfg.c2);
    let tol = T::lit(cfg.change_tolerance);
    let max_ls = cfg.max_line_search_evaluations;
    let d_norm = max_abs(d);

    let mut new = evaluate_at(func, x, t0, d, evals)?;
    let mut ls_iter = 0usize;
    let mut prev = Trial {
        t: T::zero(),
        f: f0,
        g: g0.to_vec(),
        gtd: gtd0,
    };

    let mut bracket: Vec<Trial<T>>;
    let mut done = false;
    loop {
        if ls_iter >= max_ls {
            let origin = Trial {
                t: T::zero(),
                f: f0,
                g: g0.to_vec(),
                gtd: gtd0,
            };
            bracket = vec![origin, new];
            break;
        }
        if new.f > f0 + c1 * new.t * gtd0 || (ls_iter > 1 && new.f >= prev.f) {
            bracket = vec![prev, new];
            break;
        }
        if new.gtd.abs() <= -c2 * gtd0 {
            bracket = vec![new];
            done = true;
            break;
        }
        if new.gtd >= T::zero() {
            bracket = vec![prev, new];
            break;
        }
        let min_step = new.t + T::lit(0.01) * (new.t - prev.t);
        let max_step = new.t * T::lit(10.0);
        let t = cubic_minimizer(prev.t, prev.f, prev.gtd, new.t, new.f, new.gtd, Some((min_step, max_step)));
        let next = evaluate_at(func, x, t, d, evals)?;
        prev = std::mem::replace(&mut new, next);
        ls_iter += 1;
    }

    if bracket.len() == 1 {
        return Ok(bracket.pop().expect("one entry"));
    }

    let mut insufficient = false;
    let (mut lo, mut hi) = if bracket[0].f <= bracket[1].f { (0, 1) } else { (1, 0) };
    while !done && ls_iter < max_ls {
        let (a, b) = (&bracket[0], &bracket[1]);
        if (b.t - a.t).abs() * d_norm < tol {
            break;
        }
        let mut t = cubic_minimizer(a.t, a.f, a.gtd, b.t, b.f, b.gtd, None);
        let bmax = a.t.max(b.t);
        let bmin = a.t.min(b.t);
        let eps = T::lit(0.1) * (bmax - bmin);
        if (bmax - t).min(t - bmin) < eps {
            if insufficient || t >= bmax || t <= bmin {
                t = if (t - bmax).abs() < (t - bmin).abs() { bmax - eps } else { bmin + eps };
                insufficient = false;
            } else {
                insufficient = true;
            }
        } else {
            insufficient = false;
        }
        let trial = evaluate_at(func, x, t, d, evals)?;
        ls_iter += 1;
        if trial.f > f0 + c1 * trial.t * gtd0 || trial.f >= bracket[lo].f {
            bracket[hi] = trial;
            (lo, hi) = if bracket[0].f <= bracket[1].f { (0, 1) } else { (1, 0) };
        } else {
            if trial.gtd.abs() <= -c2 * gtd0 {
                done = true;
            } else if trial.gtd * (bracket[hi].t - bracket[lo].t) >= T::zero() {
                bracket.swap(hi, lo);
            }
            bracket[lo] = trial;
        }
    }
    Ok(bracket.swap_remove(lo))
}

/// Minimises `func` from `x0`. `func` returns the loss and its gradient.
///
/// Errors returned by `func` abort the run and are passed through.
pub fn minimize<T: Real, E, F>(mut func: F, x0: Vec<T>, cfg: &LbfgsConfig) -> Result<LbfgsOutcome<T>, E>
where
    F: FnMut(&[T]) -> Result<(T, Vec<T>), E>,
{
    let n = x0.len();
    let mut x = x0;
    let (mut loss, mut g) = func(&x)?;
    let mut evaluations = 1;
    let mut history = vec![loss];
    let grad_tol = T::lit(cfg.gradient_tolerance);
    let loss_tol = T::lit(cfg.loss_tolerance);
    let change_tol = T::lit(cfg.change_tolerance);

    let finish = |x, loss, g: &[T], iterations, evaluations, termination, history| LbfgsOutcome {
        x,
        loss,
        gradient_max: max_abs(g),
        iterations,
        evaluations,
        termination,
        history,
    };

    if max_abs(&g) <= grad_tol {
        return Ok(finish(x, loss, &g, 0, evaluations, Termination::GradientTolerance, history));
    }
    if loss <= loss_tol {
        return Ok(finish(x, loss, &g, 0, evaluations, Termination::LossTolerance, history));
    }
    if cfg.max_iterations == 0 {
        return Ok(finish(x, loss, &g, 0, evaluations, Termination::MaxIterations, history));
    }

    let mut s_hist: Vec<Vec<T>> = Vec::with_capacity(cfg.memory);
    let mut y_hist: Vec<Vec<T>> = Vec::with_capacity(cfg.memory);
    let mut rho_hist: Vec<T> = Vec::with_capacity(cfg.memory);
    let mut h_diag = T::one();
    let mut alpha = vec![T::zero(); cfg.memory];
    let mut d: Vec<T> = vec![T::zero(); n];

    for iter in 1..=cfg.max_iterations {
        // Search direction by two-loop recursion.
        let mut q: Vec<T> = g.iter().map(|&v| -v).collect();
        for i in (0..s_hist.len()).rev() {
            alpha[i] = rho_hist[i] * dot(&s_hist[i], &q);
            for (qj, &yj) in q.iter_mut().zip(&y_hist[i]) {
                *qj -= alpha[i] * yj;
            }
        }
        for v in q.iter_mut() {
            *v *= h_diag;
        }
        for i in 0..s_hist.len() {
            let beta = rho_hist[i] * dot(&y_hist[i], &q);
            for (qj, &sj) in q.iter_mut().zip(&s_hist[i]) {
                *qj += (alpha[i] - beta) * sj;
            }
        }
        d.copy_from_slice(&q);

        let mut gtd = dot(&g, &d);
        if !(gtd < T::zero()) {
            // Curvature pairs produced an ascent direction; fall back to steepest descent.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            h_diag = T::one();
            for (dj, &gj) in d.iter_mut().zip(&g) {
                *dj = -gj;
            }
            gtd = dot(&g, &d);
        }

        let t0 = if iter == 1 {
            let l1 = g.iter().fold(T::zero(), |a, v| a + v.abs());
            T::one().min(T::one() / l1)
        } else {
            T::one()
        };

        let trial = strong_wolfe(&mut func, &x, t0, &d, loss, &g, gtd, cfg, &mut evaluations)?;
        if !(trial.f < loss) {
            return Ok(finish(x, loss, &g, iter - 1, evaluations, Termination::LineSearchFailure, history));
        }

        let step: Vec<T> = d.iter().map(|&v| trial.t * v).collect();
        let y: Vec<T> = trial.g.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        for (xj, &sj) in x.iter_mut().zip(&step) {
            *xj += sj;
        }
        let loss_change = loss - trial.f;
        loss = trial.f;
        g = trial.g;
        history.push(loss);

        let ys = dot(&y, &step);
        let yy = dot(&y, &y);
        if ys > T::epsilon() * (yy * dot(&step, &step)).sqrt() {
            if s_hist.len() == cfg.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            h_diag = ys / yy;
            rho_hist.push(T::one() / ys);
            s_hist.push(step.clone());
            y_hist.push(y);
        }

        if max_abs(&g) <= grad_tol {
            return Ok(finish(x, loss, &g, iter, evaluations, Termination::GradientTolerance, history));
        }
        if loss <= loss_tol {
            return Ok(finish(x, loss, &g, iter, evaluations, Termination::LossTolerance, history));
        }
        if max_abs(&step) <= change_tol || loss_change.abs() <= change_tol * loss.abs().max(T::min_positive_value()) {
            return Ok(finish(x, loss, &g, iter, evaluations, Termination::Stalled, history));
        }
    }
    let iterations = cfg.max_iterations;
    Ok(finish(x, loss, &g, iterations, evaluations, Termination::MaxIterations, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>), Infallible> {
        let mut f = 0.0;
        let mut g = vec![0.0; x.len()];
        for i in 0..x.len() - 1 {
            let a = x[i + 1] - x[i] * x[i];
            let b = 1.0 - x[i];
            f += 100.0 * a * a + b * b;
            g[i] += -400.0 * a * x[i] - 2.0 * b;
            g[i + 1] += 200.0 * a;
        }
        Ok((f, g))
    }

    #[test]
    fn rosenbrock_converges() {
        let cfg = LbfgsConfig {
            max_iterations: 500,
            ..Default::default()
        };
        let out = minimize(rosenbrock, vec![-1.2, 1.0, -0.5, 0.8], &cfg).unwrap();
        for v in &out.x {
            assert!((v - 1.0).abs() < 1e-6, "{:?} {:?}", out.x, out.termination);
        }
        assert!(out.loss < 1e-12);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadratic_terminates_by_gradient() {
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>), Infallible> {
            let w = [1.0, 10.0, 100.0];
            let f = x.iter().zip(w).map(|(v, w)| 0.5 * w * v * v).sum();
            let g = x.iter().zip(w).map(|(v, w)| w * v).collect();
            Ok((f, g))
        };
        let out = minimize(f, vec![1.0, 1.0, 1.0], &LbfgsConfig::default()).unwrap();
        assert!(matches!(
            out.termination,
            Termination::GradientTolerance | Termination::LossTolerance | Termination::Stalled
        ));
        assert!(out.gradient_max < 1e-8);
    }

    #[test]
    fn converged_start_takes_no_iterations() {
        let out = minimize(rosenbrock, vec![1.0, 1.0], &LbfgsConfig::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.termination, Termination::GradientTolerance);
    }

    #[test]
    fn max_iterations_respected() {
        let cfg = LbfgsConfig {
            max_iterations: 3,
            ..Default::default()
        };
        let out = minimize(rosenbrock, vec![-1.2, 1.0], &cfg).unwrap();
        assert_eq!(out.iterations, 3);
        assert_eq!(out.termination, Termination::MaxIterations);
        assert_eq!(out.history.len(), 4);
    }

    #[test]
    fn errors_propagate() {
        let f = |_: &[f64]| -> Result<(f64, Vec<f64>), &'static str> { Err("boom") };
        assert_eq!(minimize(f, vec![0.0], &LbfgsConfig::default()).unwrap_err(), "boom");
    }

    #[test]
    fn cubic_interpolation_finds_parabola_minimum() {
        // f = (t − 0.3)², exact for the cubic fit
        let f = |t: f64| (t - 0.3) * (t - 0.3);
        let g = |t: f64| 2.0 * (t - 0.3);
        let t = cubic_minimizer(0.0, f(0.0), g(0.0), 1.0, f(1.0), g(1.0), None);
        assert!((t - 0.3).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(LbfgsConfig::default().validate().is_ok());
        let bad = LbfgsConfig {
            c1: 0.95,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = LbfgsConfig {
            memory: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
