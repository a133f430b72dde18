//! Fully-connected network `x ↦ (p̃ᴿ, p̃ᴵ)` with exact spatial jets.
//!
//! Hidden layers apply `f_q = σ(W_q f_{q−1} + b_q)`; the last layer is linear
//! with two outputs. The forward pass carries value, first and second
//! x-derivatives together. For a batch of `B` points every layer state is
//! stored as one `width × 3B` matrix laid out `[value | d/dx | d²/dx²]`, so
//! each layer costs a single matrix product. Parameter gradients come from a
//! reverse pass over that jet computation.
//!
//! # Checkpoint format
//!
//! Plain UTF-8 text. A header of `key value` lines followed by a `data` line
//! and one parameter per line in `{:.17e}` notation:
//!
//! ```text
//! duct-pinn-checkpoint 1
//! layers 7
//! width 90
//! activation sine
//! input_scale 1.00000000000000000e0
//! seed 42
//! count 49232
//! data
//! <count values>
//! ```
//!
//! Values follow the flat parameter order: for `q = 1..m`, the entries of
//! `W_q` in row-major order, then `b_q`.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::str::FromStr;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

pub const INPUT_DIM: usize = 1;
pub const OUTPUT_DIM: usize = 2;

/// Points per work unit of the parallel loss evaluation.
pub const CHUNK_SIZE: usize = 256;

const CHECKPOINT_MAGIC: &str = "duct-pinn-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("parameter vector has length {got}, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite {what}")]
    NonFiniteLoss { what: String },
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sine,
    Tanh,
}

impl Activation {
    /// `(σ, σ', σ'', σ''')` at `z`.
    #[inline]
    fn derivatives<T: Real>(self, z: T) -> (T, T, T, T) {
        match self {
            Activation::Sine => {
                let (s, c) = z.sin_cos();
                (s, c, -s, -c)
            }
            Activation::Tanh => {
                let t = z.tanh();
                let two = T::lit(2.0);
                let d1 = T::one() - t * t;
                let d2 = -two * t * d1;
                let d3 = -two * d1 * d1 - two * t * d2;
                (t, d1, d2, d3)
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Sine => "sine",
            Activation::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sine" | "sin" => Ok(Activation::Sine),
            "tanh" => Ok(Activation::Tanh),
            other => Err(format!("unknown activation '{other}'")),
        }
    }
}

/// `layers` weight layers (`layers − 1` hidden layers of `width` neurons).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkArchitecture {
    pub layers: usize,
    pub width: usize,
    pub activation: Activation,
}

impl NetworkArchitecture {
    pub fn new(layers: usize, width: usize) -> Result<Self, NetworkError> {
        let arch = Self {
            layers,
            width,
            activation: Activation::Sine,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    /// Seven layers of 90 sine neurons.
    pub fn reference() -> Self {
        Self {
            layers: 7,
            width: 90,
            activation: Activation::Sine,
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.layers < 2 {
            return Err(NetworkError::InvalidArchitecture(format!(
                "need at least 2 layers, got {}",
                self.layers
            )));
        }
        if self.width < 1 {
            return Err(NetworkError::InvalidArchitecture("width must be at least 1".into()));
        }
        Ok(())
    }

    /// `(rows, cols)` of each weight matrix.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        (0..self.layers)
            .map(|q| {
                let rows = if q + 1 == self.layers { OUTPUT_DIM } else { self.width };
                let cols = if q == 0 { INPUT_DIM } else { self.width };
                (rows, cols)
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|&(r, c)| r * c + r).sum()
    }
}

/// Weights and biases `θ`, plus the fixed input scale `s` (the network sees `s·x`).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParameters<T> {
    pub arch: NetworkArchitecture,
    pub input_scale: T,
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

/// He-normal initialisation: `W ~ N(0, 2/fan_in)`, `b = 0`.
pub fn init_he<T: Real>(arch: NetworkArchitecture, seed: u64) -> Result<NetworkParameters<T>, NetworkError> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(arch.layers);
    let mut biases = Vec::with_capacity(arch.layers);
    for (rows, cols) in arch.layer_shapes() {
        let normal = Normal::new(0.0, (2.0 / cols as f64).sqrt()).expect("positive std");
        let w = Array2::from_shape_simple_fn((rows, cols), || T::lit(normal.sample(&mut rng)));
        weights.push(w);
        biases.push(Array1::zeros(rows));
    }
    Ok(NetworkParameters {
        arch,
        input_scale: T::one(),
        weights,
        biases,
    })
}

impl<T: Real> NetworkParameters<T> {
    /// All-zero parameters.
    pub fn zeros(arch: NetworkArchitecture) -> Result<Self, NetworkError> {
        arch.validate()?;
        let shapes = arch.layer_shapes();
        Ok(Self {
            arch,
            input_scale: T::one(),
            weights: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            biases: shapes.iter().map(|&(r, _)| Array1::zeros(r)).collect(),
        })
    }

    pub fn with_input_scale(mut self, scale: T) -> Self {
        self.input_scale = scale;
        self
    }

    pub fn parameter_count(&self) -> usize {
        self.arch.parameter_count()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[T]) -> Result<(), NetworkError> {
        let expected = self.parameter_count();
        if flat.len() != expected {
            return Err(NetworkError::ShapeMismatch {
                expected,
                got: flat.len(),
            });
        }
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in w.iter_mut() {
                *v = flat[at];
                at += 1;
            }
            for v in b.iter_mut() {
                *v = flat[at];
                at += 1;
            }
        }
        Ok(())
    }

    pub fn from_flat(arch: NetworkArchitecture, input_scale: T, flat: &[T]) -> Result<Self, NetworkError> {
        let mut params = Self::zeros(arch)?.with_input_scale(input_scale);
        params.set_flat(flat)?;
        Ok(params)
    }
}

/// Network output and its x-derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkJet<T> {
    pub value: [T; 2],
    pub dx: [T; 2],
    pub dxx: [T; 2],
}

/// Intermediate layer states kept for the reverse pass.
struct Tape<T> {
    batch: usize,
    /// Input to each weight layer (`H_{q−1}`).
    inputs: Vec<Array2<T>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Array2<T>>,
}

fn input_jet<T: Real>(xs: &[T], scale: T) -> Array2<T> {
    let b = xs.len();
    let mut h = Array2::zeros((1, 3 * b));
    for (i, &x) in xs.iter().enumerate() {
        h[[0, i]] = scale * x;
        h[[0, b + i]] = scale;
    }
    h
}

fn affine<T: Real>(w: &Array2<T>, bias: &Array1<T>, h: &Array2<T>, batch: usize) -> Array2<T> {
    let mut z = w.dot(h);
    let mut value = z.slice_mut(s![.., 0..batch]);
    value += &bias.view().insert_axis(Axis(1));
    z
}

fn activate<T: Real>(z: &Array2<T>, batch: usize, act: Activation) -> Array2<T> {
    let mut h = Array2::zeros(z.raw_dim());
    for (zr, mut hr) in z.rows().into_iter().zip(h.rows_mut()) {
        let zr = zr.as_slice().expect("standard layout");
        let hr = hr.as_slice_mut().expect("standard layout");
        for i in 0..batch {
            let (z0, z1, z2) = (zr[i], zr[batch + i], zr[2 * batch + i]);
            let (s0, s1, s2, _) = act.derivatives(z0);
            hr[i] = s0;
            hr[batch + i] = s1 * z1;
            hr[2 * batch + i] = s2 * z1 * z1 + s1 * z2;
        }
    }
    h
}

fn forward_tape<T: Real>(params: &NetworkParameters<T>, xs: &[T]) -> (Array2<T>, Tape<T>) {
    let batch = xs.len();
    let m = params.arch.layers;
    let mut tape = Tape {
        batch,
        inputs: Vec::with_capacity(m),
        pre: Vec::with_capacity(m - 1),
    };
    let mut h = input_jet(xs, params.input_scale);
    for q in 0..m - 1 {
        let z = affine(&params.weights[q], &params.biases[q], &h, batch);
        let next = activate(&z, batch, params.arch.activation);
        tape.inputs.push(h);
        tape.pre.push(z);
        h = next;
    }
    let y = affine(&params.weights[m - 1], &params.biases[m - 1], &h, batch);
    tape.inputs.push(h);
    (y, tape)
}

/// Batched jets as a `2 × 3B` matrix `[value | d/dx | d²/dx²]`.
pub fn forward_batch<T: Real>(params: &NetworkParameters<T>, xs: &[T]) -> Array2<T> {
    forward_tape(params, xs).0
}

pub fn forward_jet<T: Real>(params: &NetworkParameters<T>, x: T) -> NetworkJet<T> {
    let y = forward_batch(params, &[x]);
    NetworkJet {
        value: [y[[0, 0]], y[[1, 0]]],
        dx: [y[[0, 1]], y[[1, 1]]],
        dxx: [y[[0, 2]], y[[1, 2]]],
    }
}

/// Forward only: the network value at each point, `2 × B`.
pub fn forward_values<T: Real>(params: &NetworkParameters<T>, xs: &[T]) -> Array2<T> {
    let b = xs.len();
    forward_batch(params, xs).slice(s![.., 0..b]).to_owned()
}

fn layer_offsets(arch: &NetworkArchitecture) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(arch.layers + 1);
    let mut at = 0;
    offsets.push(at);
    for (r, c) in arch.layer_shapes() {
        at += r * c + r;
        offsets.push(at);
    }
    offsets
}

fn activation_backward<T: Real>(gh: &Array2<T>, z: &Array2<T>, batch: usize, act: Activation) -> Array2<T> {
    let two = T::lit(2.0);
    let mut gz = Array2::zeros(z.raw_dim());
    for ((zr, gr), mut out) in z.rows().into_iter().zip(gh.rows()).zip(gz.rows_mut()) {
        let zr = zr.as_slice().expect("standard layout");
        let gr = gr.as_slice().expect("standard layout");
        let out = out.as_slice_mut().expect("standard layout");
        for i in 0..batch {
            let (z0, z1, z2) = (zr[i], zr[batch + i], zr[2 * batch + i]);
            let (g0, g1, g2) = (gr[i], gr[batch + i], gr[2 * batch + i]);
            let (_, s1, s2, s3) = act.derivatives(z0);
            out[i] = g0 * s1 + g1 * s2 * z1 + g2 * (s3 * z1 * z1 + s2 * z2);
            out[batch + i] = g1 * s1 + two * g2 * s2 * z1;
            out[2 * batch + i] = g2 * s1;
        }
    }
    gz
}

/// Accumulates `∂loss/∂θ` into `grad` (flat layout) given the output adjoint `gy` (`2 × 3B`).
fn backward<T: Real>(params: &NetworkParameters<T>, tape: &Tape<T>, gy: Array2<T>, grad: &mut [T]) {
    let batch = tape.batch;
    let offsets = layer_offsets(&params.arch);
    let shapes = params.arch.layer_shapes();
    let mut gz = gy;
    for q in (0..params.arch.layers).rev() {
        let (rows, cols) = shapes[q];
        let (wslice, rest) = grad[offsets[q]..offsets[q + 1]].split_at_mut(rows * cols);
        let mut gw = ArrayViewMut2::from_shape((rows, cols), wslice).expect("weight block shape");
        general_mat_mul(T::one(), &gz, &tape.inputs[q].t(), T::one(), &mut gw);
        for (r, gb) in rest.iter_mut().enumerate() {
            *gb += gz.slice(s![r, 0..batch]).sum();
        }
        if q == 0 {
            break;
        }
        let gh = params.weights[q].t().dot(&gz);
        gz = activation_backward(&gh, &tape.pre[q - 1], batch, params.arch.activation);
    }
}

/// A scalar loss assembled chunk-by-chunk from network jets.
///
/// The total loss is the sum of all chunk contributions, evaluated in
/// ascending chunk order.
pub trait JetObjective<T: Real>: Sync {
    /// Collocation points, in metres.
    fn points(&self) -> &[T];

    /// Loss contribution of `points()[range]` given their jets (`2 × 3B`).
    /// When `adjoint` is present it receives `∂loss/∂jet` in the same layout.
    fn chunk(&self, range: Range<usize>, jet: ArrayView2<T>, adjoint: Option<ArrayViewMut2<T>>) -> T;
}

fn chunks(n: usize) -> Vec<Range<usize>> {
    (0..n.div_ceil(CHUNK_SIZE))
        .map(|c| c * CHUNK_SIZE..((c + 1) * CHUNK_SIZE).min(n))
        .collect()
}

/// Loss value only.
pub fn loss_value<T: Real, O: JetObjective<T>>(params: &NetworkParameters<T>, objective: &O) -> Result<T, NetworkError> {
    let xs = objective.points();
    let parts: Vec<T> = chunks(xs.len())
        .into_par_iter()
        .map(|r| {
            let jet = forward_batch(params, &xs[r.clone()]);
            objective.chunk(r, jet.view(), None)
        })
        .collect();
    let loss = parts.into_iter().fold(T::zero(), |a, b| a + b);
    if !loss.is_finite() {
        return Err(NetworkError::NonFiniteLoss { what: "loss".into() });
    }
    Ok(loss)
}

/// Loss and its exact gradient with respect to every entry of `θ` (flat order).
pub fn loss_and_param_gradient<T: Real, O: JetObjective<T>>(
    params: &NetworkParameters<T>,
    objective: &O,
) -> Result<(T, Vec<T>), NetworkError> {
    let xs = objective.points();
    let count = params.parameter_count();
    let parts: Vec<(T, Vec<T>)> = chunks(xs.len())
        .into_par_iter()
        .map(|r| {
            let (jet, tape) = forward_tape(params, &xs[r.clone()]);
            let mut gy = Array2::zeros(jet.raw_dim());
            let loss = objective.chunk(r, jet.view(), Some(gy.view_mut()));
            let mut grad = vec![T::zero(); count];
            backward(params, &tape, gy, &mut grad);
            (loss, grad)
        })
        .collect();
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); count];
    for (l, g) in parts {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    if !loss.is_finite() {
        return Err(NetworkError::NonFiniteLoss { what: "loss".into() });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(NetworkError::NonFiniteLoss { what: "gradient".into() });
    }
    Ok((loss, grad))
}

pub fn write_checkpoint<T: Real, W: Write>(
    params: &NetworkParameters<T>,
    seed: u64,
    mut out: W,
) -> Result<(), NetworkError> {
    let flat = params.to_flat();
    writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}")?;
    writeln!(out, "layers {}", params.arch.layers)?;
    writeln!(out, "width {}", params.arch.width)?;
    writeln!(out, "activation {}", params.arch.activation)?;
    writeln!(out, "input_scale {:.17e}", params.input_scale.f64())?;
    writeln!(out, "seed {seed}")?;
    writeln!(out, "count {}", flat.len())?;
    writeln!(out, "data")?;
    for v in flat {
        writeln!(out, "{:.17e}", v.f64())?;
    }
    Ok(())
}

/// Reads a checkpoint, returning the parameters and the recorded seed.
pub fn read_checkpoint<T: Real, R: BufRead>(input: R) -> Result<(NetworkParameters<T>, u64), NetworkError> {
    let bad = |m: &str| NetworkError::Checkpoint(m.to_string());
    let mut lines = input.lines();
    let mut next = || -> Result<String, NetworkError> {
        lines
            .next()
            .ok_or_else(|| bad("unexpected end of file"))?
            .map_err(NetworkError::from)
    };
    let magic = next()?;
    let mut it = magic.split_whitespace();
    if it.next() != Some(CHECKPOINT_MAGIC) {
        return Err(bad("missing magic line"));
    }
    let version: u32 = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("missing version"))?;
    if version != CHECKPOINT_VERSION {
        return Err(NetworkError::Checkpoint(format!("unsupported version {version}")));
    }
    let (mut layers, mut width, mut activation, mut scale, mut seed, mut count) = (None, None, None, None, None, None);
    loop {
        let line = next()?;
        let line = line.trim();
        if line == "data" {
            break;
        }
        let (key, value) = line.split_once(' ').ok_or_else(|| bad("expected `key value`"))?;
        let value = value.trim();
        let num_err = |_| NetworkError::Checkpoint(format!("bad value for {key}"));
        match key {
            "layers" => layers = Some(value.parse::<usize>().map_err(num_err)?),
            "width" => width = Some(value.parse::<usize>().map_err(num_err)?),
            "activation" => activation = Some(value.parse::<Activation>().map_err(NetworkError::Checkpoint)?),
            "input_scale" => scale = Some(value.parse::<f64>().map_err(|_| bad("bad input_scale"))?),
            "seed" => seed = Some(value.parse::<u64>().map_err(num_err)?),
            "count" => count = Some(value.parse::<usize>().map_err(num_err)?),
            _ => return Err(NetworkError::Checkpoint(format!("unknown key {key}"))),
        }
    }
    let arch = NetworkArchitecture {
        layers: layers.ok_or_else(|| bad("missing layers"))?,
        width: width.ok_or_else(|| bad("missing width"))?,
        activation: activation.unwrap_or(Activation::Sine),
    };
    arch.validate()?;
    let count = count.ok_or_else(|| bad("missing count"))?;
    let mut flat = Vec::with_capacity(count);
    for _ in 0..count {
        let line = next()?;
        let v: f64 = line.trim().parse().map_err(|_| bad("bad parameter value"))?;
        flat.push(T::lit(v));
    }
    let params = NetworkParameters::from_flat(arch, T::lit(scale.unwrap_or(1.0)), &flat)?;
    Ok((params, seed.unwrap_or(0)))
}
