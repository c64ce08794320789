//! Fully connected networks with flat parameter storage, inverted dropout and
//! hand-written backprop.
//!
//! Parameters for layer `l` are stored as the `out x in` weight matrix
//! (row-major) followed by the `out` biases, layers back to back.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output.
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRepr", into = "MlpRepr")]
pub struct Mlp {
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    dropout: f64,
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MlpRepr {
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    dropout: f64,
    params: Vec<f64>,
}

impl TryFrom<MlpRepr> for Mlp {
    type Error = Error;

    fn try_from(r: MlpRepr) -> Result<Self> {
        let mut net = Mlp::zeros(&r.sizes, r.hidden, r.output, r.dropout)?;
        if r.params.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "network {:?} needs {} parameters, found {}",
                r.sizes,
                net.params.len(),
                r.params.len()
            )));
        }
        if r.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation("network parameters must be finite".into()));
        }
        net.params = r.params;
        Ok(net)
    }
}

impl From<Mlp> for MlpRepr {
    fn from(n: Mlp) -> Self {
        MlpRepr {
            sizes: n.sizes,
            hidden: n.hidden,
            output: n.output,
            dropout: n.dropout,
            params: n.params,
        }
    }
}

/// Activations recorded by [`Mlp::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer after dropout.
    inputs: Vec<Vec<f64>>,
    /// Per-unit dropout scale (0 or 1/(1-rate)) for each layer input; empty
    /// when dropout was off.
    masks: Vec<Vec<f64>>,
    /// Output of each layer after its activation.
    outputs: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation, dropout: f64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Argument(format!("dropout rate {dropout} outside [0, 1)")));
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            hidden,
            output,
            dropout,
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Uniform fan-in initialisation, `U(-1/sqrt(in), 1/sqrt(in))`, with the
    /// last layer drawn from `U(-final_scale, final_scale)`.
    pub fn init<R: Rng>(sizes: &[usize], hidden: Activation, output: Activation, dropout: f64, final_scale: f64, rng: &mut R) -> Result<Self> {
        let mut net = Mlp::zeros(sizes, hidden, output, dropout)?;
        let layers = net.layers();
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (net.sizes[l], net.sizes[l + 1]);
            let bound = if l + 1 == layers { final_scale } else { 1.0 / (n_in as f64).sqrt() };
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            for p in &mut net.params[off..off + n_in * n_out + n_out] {
                *p = dist.sample(rng);
            }
            off += n_in * n_out + n_out;
        }
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn set_dropout(&mut self, rate: f64) -> Result<()> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Argument(format!("dropout rate {rate} outside [0, 1)")));
        }
        self.dropout = rate;
        Ok(())
    }

    pub fn activations(&self) -> (Activation, Activation) {
        (self.hidden, self.output)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.sizes == other.sizes && self.hidden == other.hidden && self.output == other.output
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers() {
            self.output
        } else {
            self.hidden
        }
    }

    /// Output only. `dropout_seed = Some(..)` turns dropout on with masks
    /// drawn from that seed.
    pub fn forward(&self, input: &[f64], dropout_seed: Option<u64>) -> Result<Vec<f64>> {
        Ok(self.run(input, dropout_seed, false)?.outputs.pop().unwrap_or_default())
    }

    pub fn forward_cached(&self, input: &[f64], dropout_seed: Option<u64>) -> Result<ForwardCache> {
        self.run(input, dropout_seed, true)
    }

    fn run(&self, input: &[f64], dropout_seed: Option<u64>, keep: bool) -> Result<ForwardCache> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
        let keep_scale = 1.0 / (1.0 - self.dropout);
        let mut cache = ForwardCache {
            inputs: Vec::new(),
            masks: Vec::new(),
            outputs: Vec::new(),
        };
        let mut x = input.to_vec();
        let mut off = 0;
        for l in 0..self.layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if let Some(rng) = rng.as_mut() {
                let mask: Vec<f64> = (0..n_in)
                    .map(|_| if rng.random::<f64>() < self.dropout { 0.0 } else { keep_scale })
                    .collect();
                for (xi, m) in x.iter_mut().zip(&mask) {
                    *xi *= m;
                }
                if keep {
                    cache.masks.push(mask);
                }
            }
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let act = self.activation(l);
            let y: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let z = row.iter().zip(&x).fold(b[o], |acc, (wi, xi)| acc + wi * xi);
                    act.apply(z)
                })
                .collect();
            off += n_in * n_out + n_out;
            if keep {
                cache.inputs.push(std::mem::replace(&mut x, y));
                cache.outputs.push(x.clone());
            } else {
                x = y;
            }
        }
        if !keep {
            cache.outputs.push(x);
        }
        Ok(cache)
    }

    /// Accumulates parameter gradients of `upstream · output` into `grads`
    /// and returns the gradient with respect to the network input.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        let layers = self.layers();
        let cache_ok = cache.inputs.len() == layers
            && cache.outputs.len() == layers
            && (cache.masks.is_empty() || cache.masks.len() == layers)
            && cache.inputs.iter().zip(&self.sizes).all(|(x, &n)| x.len() == n);
        if !cache_ok {
            return Err(Error::Usage("backward needs a forward_cached pass of this network".into()));
        }
        if upstream.len() != self.output_dim() || grads.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "backward: upstream {} (want {}), grads {} (want {})",
                upstream.len(),
                self.output_dim(),
                grads.len(),
                self.params.len()
            )));
        }
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta = upstream.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let act = self.activation(l);
            let y = &cache.outputs[l];
            let x = &cache.inputs[l];
            let dz: Vec<f64> = delta.iter().zip(y).map(|(d, &yo)| d * act.grad_from_output(yo)).collect();
            let off = offsets[l];
            let w = &self.params[off..off + n_in * n_out];
            let (gw, gb) = grads[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            let mut dx = vec![0.0; n_in];
            for o in 0..n_out {
                let d = dz[o];
                gb[o] += d;
                let grow = &mut gw[o * n_in..(o + 1) * n_in];
                let wrow = &w[o * n_in..(o + 1) * n_in];
                for i in 0..n_in {
                    grow[i] += d * x[i];
                    dx[i] += wrow[i] * d;
                }
            }
            if let Some(mask) = cache.masks.get(l) {
                for (dxi, m) in dx.iter_mut().zip(mask) {
                    *dxi *= m;
                }
            }
            delta = dx;
        }
        Ok(delta)
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        if !self.same_shape(online) {
            return Err(Error::Shape("soft update between differently shaped networks".into()));
        }
        for (t, &o) in self.params.iter_mut().zip(&online.params) {
            *t = tau * o + (1.0 - tau) * *t;
        }
        Ok(())
    }
}
