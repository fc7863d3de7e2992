//! Feed-forward networks with hand-written forward and reverse passes.
//!
//! A [`MlpNet`] is a stack of dense layers `a_out = act(W a_in + b)`. Batches
//! are row-major: one sample per row. The forward pass returns a
//! [`ForwardCache`] tied to the parameter version it was computed with;
//! [`MlpNet::backward`] refuses a cache from an older version.

mod generator;
mod presets;

pub use generator::{BaseNoise, Generator, GeneratorCache, GeneratorGrads, GeneratorKind, XI_NET_WIDTHS};
pub use presets::{BottomActivation, ConstraintCaps, DiscriminatorPreset};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::distributions::standard_normal;
use crate::linalg::Matrix;
use crate::math;
use crate::rng::Rng;
use crate::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    Sigmoid,
    Relu,
    /// `max(0.2 x, x)`.
    LeakyRelu,
    /// `max(min(x + 1/2, 1), 0)`.
    Ramp,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Sigmoid => math::sigmoid(x),
            Self::Relu => x.max(0.0),
            Self::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Self::Ramp => (x + 0.5).clamp(0.0, 1.0),
            Self::Identity => x,
        }
    }

    /// Derivative from the pre-activation `z` and the output `a = act(z)`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Self::Sigmoid => a * (1.0 - a),
            Self::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Self::Ramp => {
                if z > -0.5 && z < 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Identity => 1.0,
        }
    }
}

/// Dense layer. `weight` is `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Option<Vec<f64>>,
    pub activation: Activation,
    /// Cap on the l1 norm of every weight row.
    pub row_l1_cap: Option<f64>,
    /// Cap on the l2 norm of every weight row.
    pub row_l2_cap: Option<f64>,
}

impl Layer {
    pub fn new(inputs: usize, outputs: usize, has_bias: bool, activation: Activation) -> Self {
        Self {
            weight: Matrix::zeros(outputs, inputs),
            bias: has_bias.then(|| vec![0.0; outputs]),
            activation,
            row_l1_cap: None,
            row_l2_cap: None,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.as_ref().map_or(0, |b| b.len())
    }
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlpNet {
    layers: Vec<Layer>,
    #[cfg_attr(feature = "serde", serde(skip))]
    version: u64,
}

impl PartialEq for MlpNet {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Activations recorded by [`MlpNet::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    input: Matrix,
    pre: Vec<Matrix>,
    post: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.post.last().unwrap_or(&self.input)
    }

    pub fn input(&self) -> &Matrix {
        &self.input
    }
}

/// Gradients per layer (summed over the batch) and per input row.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Option<Vec<f64>>>,
    pub input: Matrix,
}

impl Gradients {
    /// Parameter gradient in [`MlpNet::params_flat`] order.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            if let Some(b) = b {
                out.extend_from_slice(b);
            }
        }
        out
    }
}

impl MlpNet {
    /// Chains layers; consecutive widths must agree.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        }
        for (k, w) in layers.windows(2).enumerate() {
            if w[0].outputs() != w[1].inputs() {
                return Err(Error::DimensionMismatch {
                    context: format!("layer {} input", k + 1),
                    expected: w[0].outputs(),
                    found: w[1].inputs(),
                });
            }
        }
        for (k, l) in layers.iter().enumerate() {
            if let Some(b) = &l.bias {
                if b.len() != l.outputs() {
                    return Err(Error::DimensionMismatch {
                        context: format!("layer {k} bias"),
                        expected: l.outputs(),
                        found: b.len(),
                    });
                }
            }
        }
        Ok(Self { layers, version: 0 })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access to the layers; invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Weights (row-major) then bias, layer by layer.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            if let Some(b) = &l.bias {
                out.extend_from_slice(b);
            }
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                context: "set_params_flat".into(),
                expected: self.param_count(),
                found: params.len(),
            });
        }
        let mut k = 0;
        for l in self.layers_mut() {
            let w = l.weight.as_mut_slice();
            w.copy_from_slice(&params[k..k + w.len()]);
            k += w.len();
            if let Some(b) = &mut l.bias {
                let len = b.len();
                b.copy_from_slice(&params[k..k + len]);
                k += len;
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardCache> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for (k, l) in self.layers.iter().enumerate() {
            let a_in = post.last().unwrap_or(x);
            if a_in.cols() != l.inputs() {
                return Err(Error::DimensionMismatch {
                    context: format!("input of layer {k}"),
                    expected: l.inputs(),
                    found: a_in.cols(),
                });
            }
            let mut z = a_in.matmul_t(&l.weight);
            if let Some(b) = &l.bias {
                for i in 0..z.rows() {
                    for (zi, bi) in z.row_mut(i).iter_mut().zip(b) {
                        *zi += bi;
                    }
                }
            }
            let act = l.activation;
            let a = Matrix::from_vec(
                z.rows(),
                z.cols(),
                z.as_slice().iter().map(|&v| act.apply(v)).collect(),
            )?;
            pre.push(z);
            post.push(a);
        }
        Ok(ForwardCache {
            version: self.version,
            input: x.clone(),
            pre,
            post,
        })
    }

    /// Outputs only.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let mut cache = self.forward(x)?;
        Ok(cache.post.pop().unwrap_or(cache.input))
    }

    /// Reverse pass. `upstream` is d(loss)/d(output), one row per sample.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<Gradients> {
        if cache.version != self.version || cache.post.len() != self.layers.len() {
            return Err(Error::StaleCache);
        }
        let out = cache.output();
        if upstream.rows() != out.rows() || upstream.cols() != out.cols() {
            return Err(Error::DimensionMismatch {
                context: "backward upstream".into(),
                expected: out.cols(),
                found: upstream.cols(),
            });
        }
        let n_layers = self.layers.len();
        let mut weights = vec![Matrix::zeros(0, 0); n_layers];
        let mut biases = vec![None; n_layers];
        let mut grad = upstream.clone();
        for k in (0..n_layers).rev() {
            let l = &self.layers[k];
            let z = &cache.pre[k];
            let a = &cache.post[k];
            let act = l.activation;
            let delta = Matrix::from_vec(
                grad.rows(),
                grad.cols(),
                grad.as_slice()
                    .iter()
                    .zip(z.as_slice().iter().zip(a.as_slice()))
                    .map(|(g, (&zv, &av))| g * act.derivative(zv, av))
                    .collect(),
            )?;
            let a_in = if k == 0 { &cache.input } else { &cache.post[k - 1] };
            weights[k] = delta.t_matmul(a_in);
            if l.bias.is_some() {
                let mut gb = vec![0.0; l.outputs()];
                for r in delta.row_iter() {
                    for (g, d) in gb.iter_mut().zip(r) {
                        *g += d;
                    }
                }
                biases[k] = Some(gb);
            }
            grad = delta.matmul(&l.weight);
        }
        Ok(Gradients {
            weights,
            biases,
            input: grad,
        })
    }

    /// `params += step * grads`.
    pub fn apply_gradients(&mut self, grads: &Gradients, step: f64) {
        for (l, (gw, gb)) in self.layers_mut().iter_mut().zip(grads.weights.iter().zip(&grads.biases)) {
            for (w, g) in l.weight.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                *w += step * g;
            }
            if let (Some(b), Some(g)) = (&mut l.bias, gb) {
                for (bi, gi) in b.iter_mut().zip(g) {
                    *bi += step * gi;
                }
            }
        }
    }

    /// Projects flagged weight rows onto their l2 and l1 balls.
    pub fn project_constraints(&mut self) {
        for l in self.layers_mut() {
            let cols = l.weight.cols();
            for i in 0..l.weight.rows() {
                let row = &mut l.weight.as_mut_slice()[i * cols..(i + 1) * cols];
                if let Some(cap) = l.row_l2_cap {
                    let nrm = crate::linalg::norm2(row);
                    if nrm > cap {
                        row.iter_mut().for_each(|w| *w *= cap / nrm);
                    }
                }
                if let Some(cap) = l.row_l1_cap {
                    project_l1_ball(row, cap);
                }
            }
        }
    }

    /// Draws parameters: layer 0 weights i.i.d. `N(0, sigma1^2)`, later layers
    /// Xavier-uniform on `+-sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn initialize(&mut self, rng: &mut Rng, sigma1: f64) -> Result<()> {
        if sigma1.is_nan() || sigma1 <= 0.0 {
            return Err(Error::InvalidConfig(format!("sigma1 must be positive, got {sigma1}")));
        }
        for (k, l) in self.layers_mut().iter_mut().enumerate() {
            let limit = math::sqrt(6.0 / (l.inputs() + l.outputs()) as f64);
            for w in l.weight.as_mut_slice() {
                *w = if k == 0 {
                    sigma1 * standard_normal(rng)
                } else {
                    limit * (2.0 * rng.random::<f64>() - 1.0)
                };
            }
            if let Some(b) = &mut l.bias {
                b.iter_mut().for_each(|x| *x = 0.0);
            }
        }
        Ok(())
    }

    /// Xavier-uniform on every layer, biases zero.
    pub fn initialize_xavier(&mut self, rng: &mut Rng) {
        for l in self.layers_mut() {
            let limit = math::sqrt(6.0 / (l.inputs() + l.outputs()) as f64);
            for w in l.weight.as_mut_slice() {
                *w = limit * (2.0 * rng.random::<f64>() - 1.0);
            }
            if let Some(b) = &mut l.bias {
                b.iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }
}

/// Builds and initializes a discriminator for dimension `p`.
pub fn init_net(
    rng: &mut Rng,
    preset: &DiscriminatorPreset,
    p: usize,
    caps: Option<ConstraintCaps>,
    sigma1: f64,
) -> Result<MlpNet> {
    let mut net = preset.build(p, caps)?;
    net.initialize(rng, sigma1)?;
    Ok(net)
}

/// Euclidean projection onto `{w : ||w||_1 <= cap}` (sort-based).
pub fn project_l1_ball(w: &mut [f64], cap: f64) {
    let l1: f64 = w.iter().map(|x| x.abs()).sum();
    if l1 <= cap {
        return;
    }
    if cap <= 0.0 {
        w.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mut u: Vec<f64> = w.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - cap) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    for x in w.iter_mut() {
        let m = (x.abs() - theta).max(0.0);
        *x = if *x >= 0.0 { m } else { -m };
    }
}
