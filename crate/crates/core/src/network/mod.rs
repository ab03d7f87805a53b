//! The eigensolver network: a sin-activated dense trunk fed by `x` and a
//! trainable eigenvalue neuron, with optional even/odd symmetry embedding and
//! a boundary-enforcing parametric wrap.
//!
//! Parameters live in one flat vector so that optimizers and gradient
//! buffers are plain slices. [`Layout`] maps dense layers onto it.

pub mod batch;
mod checkpoint;
mod parametric;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use parametric::{parametric_wrap, ParametricKind, ParametricSpec};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dualgrad::{Jet, Jet3, Real};
use crate::error::{contract, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryMode {
    NoSymmetry,
    Even,
    Odd,
}

impl SymmetryMode {
    pub fn flipped(self) -> Self {
        match self {
            SymmetryMode::Even => SymmetryMode::Odd,
            SymmetryMode::Odd => SymmetryMode::Even,
            SymmetryMode::NoSymmetry => SymmetryMode::NoSymmetry,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SymmetryMode::NoSymmetry => "none",
            SymmetryMode::Even => "even",
            SymmetryMode::Odd => "odd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" | "no_symmetry" => Some(SymmetryMode::NoSymmetry),
            "even" => Some(SymmetryMode::Even),
            "odd" => Some(SymmetryMode::Odd),
            _ => None,
        }
    }

    fn streams(self) -> usize {
        match self {
            SymmetryMode::NoSymmetry => 1,
            _ => 2,
        }
    }

    /// Sign applied to the mirrored stream when combining.
    fn mirror_sign(self) -> f64 {
        match self {
            SymmetryMode::Odd => -1.0,
            _ => 1.0,
        }
    }

    /// Odd outputs cannot carry a constant offset.
    fn uses_output_bias(self) -> bool {
        self != SymmetryMode::Odd
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    /// Widths of the hidden layers.
    pub hidden: Vec<usize>,
    /// Initial eigenvalue produced by the λ-neuron.
    pub lambda_start: f64,
    /// The trunk sees `input_scale · x`.
    pub input_scale: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { hidden: vec![50, 50], lambda_start: 0.0, input_scale: 1.0 }
    }
}

/// Placement of one dense layer inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dense {
    pub weight: usize,
    pub bias: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Dense {
    pub fn weight_len(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    /// Hidden layers followed by the output layer. The first layer has two
    /// input columns: `x` then `λ`.
    pub layers: Vec<Dense>,
    pub lambda_weight: usize,
    pub lambda_bias: usize,
    pub len: usize,
}

impl Layout {
    pub fn new(hidden: &[usize]) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut off = 0;
        let mut fan_in = 2;
        for &rows in hidden.iter().chain(std::iter::once(&1)) {
            let d = Dense { weight: off, bias: off + rows * fan_in, rows, cols: fan_in };
            off = d.bias + rows;
            layers.push(d);
            fan_in = rows;
        }
        Layout { layers, lambda_weight: off, lambda_bias: off + 1, len: off + 2 }
    }

    pub fn hidden(&self) -> &[Dense] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn output(&self) -> &Dense {
        self.layers.last().expect("layout always has an output layer")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenNet {
    config: NetConfig,
    layout: Layout,
    pub symmetry: SymmetryMode,
    params: Vec<f64>,
}

impl EigenNet {
    pub fn zeros(config: NetConfig, symmetry: SymmetryMode) -> Result<Self> {
        if config.hidden.is_empty() || config.hidden.iter().any(|&w| w == 0) {
            return Err(contract("network needs at least one hidden layer of nonzero width"));
        }
        if !(config.input_scale.is_finite() && config.input_scale > 0.0) {
            return Err(contract("input_scale must be positive"));
        }
        let layout = Layout::new(&config.hidden);
        let params = vec![0.0; layout.len];
        Ok(EigenNet { config, layout, symmetry, params })
    }

    /// Deterministic initialization: Glorot-uniform weights, biases uniform
    /// in `±1/sqrt(fan_in)`, and a λ-neuron producing `lambda_start`.
    pub fn init(config: NetConfig, symmetry: SymmetryMode, seed: u64) -> Result<Self> {
        let mut net = EigenNet::zeros(config, symmetry)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for d in net.layout.layers.clone() {
            let limit = (6.0 / (d.rows + d.cols) as f64).sqrt();
            for w in &mut net.params[d.weight..d.weight + d.weight_len()] {
                *w = rng.random_range(-limit..limit);
            }
            let bl = 1.0 / (d.cols as f64).sqrt();
            for b in &mut net.params[d.bias..d.bias + d.rows] {
                *b = rng.random_range(-bl..bl);
            }
        }
        net.params[net.layout.lambda_weight] = 0.0;
        net.params[net.layout.lambda_bias] = net.config.lambda_start;
        Ok(net)
    }

    pub fn from_params(config: NetConfig, symmetry: SymmetryMode, params: Vec<f64>) -> Result<Self> {
        let mut net = EigenNet::zeros(config, symmetry)?;
        if params.len() != net.layout.len {
            return Err(contract(format!(
                "expected {} parameters, got {}",
                net.layout.len,
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.layout.len
    }

    pub fn lambda(&self) -> f64 {
        self.params[self.layout.lambda_weight] + self.params[self.layout.lambda_bias]
    }

    /// Moves the λ-neuron so that it outputs `lambda`, leaving its weight alone.
    pub fn set_lambda(&mut self, lambda: f64) {
        let w = self.params[self.layout.lambda_weight];
        self.params[self.layout.lambda_bias] = lambda - w;
    }

    /// Order-sensitive FNV-1a hash of the parameter bits.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in &self.params {
            for byte in p.to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }

    /// Single-point evaluation dispatching on the symmetry mode.
    pub fn forward(&self, x: Jet3) -> (Jet3, f64) {
        let (n, lam) = forward_generic(&self.layout, &self.params, self.input_scale(), self.symmetry, x);
        (n, lam)
    }

    pub fn input_scale(&self) -> f64 {
        self.config.input_scale
    }
}

/// Plain network output `N(x, λ)` with exact `x`-derivatives, ignoring the
/// symmetry mode.
pub fn forward_raw(net: &EigenNet, x: Jet3) -> (Jet3, f64) {
    forward_generic(&net.layout, &net.params, net.input_scale(), SymmetryMode::NoSymmetry, x)
}

/// Symmetry-embedded output: the last hidden representation of `x` and `-x`
/// are added (even) or subtracted (odd) before the output layer.
pub fn forward_symmetric(net: &EigenNet, x: Jet3) -> Result<(Jet3, f64)> {
    if net.symmetry == SymmetryMode::NoSymmetry {
        return Err(contract("forward_symmetric called on a network without symmetry"));
    }
    Ok(forward_generic(&net.layout, &net.params, net.input_scale(), net.symmetry, x))
}

/// Reference forward pass over any [`Real`] scalar. With `T = Var` this
/// records the whole computation on a tape.
pub fn forward_generic<T: Real>(
    layout: &Layout,
    params: &[T],
    input_scale: f64,
    symmetry: SymmetryMode,
    x: Jet<T>,
) -> (Jet<T>, T) {
    let lam = params[layout.lambda_weight] * 1.0 + params[layout.lambda_bias];
    let hidden = layout.hidden();

    let stream = |xin: Jet<T>| -> Vec<Jet<T>> {
        let xin = xin.scale(input_scale);
        let first = &hidden[0];
        let mut h: Vec<Jet<T>> = (0..first.rows)
            .map(|j| {
                let wx = params[first.weight + 2 * j];
                let wl = params[first.weight + 2 * j + 1];
                let b = params[first.bias + j];
                let shift = lam * wl + b;
                let z = xin.scale_by(wx);
                Jet { v: z.v + shift, d1: z.d1, d2: z.d2 }.sin()
            })
            .collect();
        for d in &hidden[1..] {
            h = (0..d.rows)
                .map(|j| {
                    let row = &params[d.weight + j * d.cols..d.weight + (j + 1) * d.cols];
                    let mut z = Jet::lift_const(lam, 0.0);
                    z.v = params[d.bias + j];
                    for (w, hk) in row.iter().zip(&h) {
                        z = z.add(hk.scale_by(*w));
                    }
                    z.sin()
                })
                .collect();
        }
        h
    };

    let mut h = stream(x);
    if symmetry != SymmetryMode::NoSymmetry {
        let mirrored = stream(x.neg());
        let sign = symmetry.mirror_sign();
        for (a, b) in h.iter_mut().zip(mirrored) {
            *a = a.add(b.scale(sign));
        }
    }

    let out = layout.output();
    let mut n = Jet::lift_const(lam, 0.0);
    for (w, hk) in params[out.weight..out.weight + out.cols].iter().zip(&h) {
        n = n.add(hk.scale_by(*w));
    }
    if symmetry.uses_output_bias() {
        n.v = n.v + params[out.bias];
    }
    (n, lam)
}
