//! Fully connected networks with tanh hidden layers and hand-written backprop.

use rand::Rng;

use crate::error::{Error, Result};

/// Affine layer `y = W x + b` with `W` stored row-major as `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Dense {
            in_dim,
            out_dim,
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
        }
    }

    /// Uniform Glorot initialisation, zero bias.
    pub fn glorot<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut d = Dense::zeros(in_dim, out_dim);
        for w in d.w.iter_mut() {
            *w = rng.gen_range(-limit..=limit);
        }
        d
    }

    pub fn forward_into(&self, x: &[f64], y: &mut [f64]) {
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            *yo = self.b[o] + dot(row, x);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stack of dense layers; tanh after every layer except (optionally) the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub tanh_output: bool,
}

/// Activations recorded by a forward pass: the input to every layer followed
/// by the network output.
#[derive(Debug, Clone)]
pub struct MlpCache {
    acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

impl Mlp {
    /// `sizes` lists every layer width including input and output.
    pub fn glorot<R: Rng>(sizes: &[usize], tanh_output: bool, rng: &mut R) -> Self {
        Mlp {
            layers: sizes.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect(),
            tanh_output,
        }
    }

    pub fn zeros(sizes: &[usize], tanh_output: bool) -> Self {
        Mlp {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            tanh_output,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp::zeros(&self.sizes(), self.tanh_output)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].in_dim];
        s.extend(self.layers.iter().map(|l| l.out_dim));
        s
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn activates(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len() || self.tanh_output
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_dim() {
            return Err(Error::config(
                "model",
                format!("network expects {} inputs, got {}", self.in_dim(), x.len()),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).acts.pop().unwrap()
    }

    pub fn forward_cached(&self, x: &[f64]) -> MlpCache {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (i, l) in self.layers.iter().enumerate() {
            let mut y = vec![0.0; l.out_dim];
            l.forward_into(acts.last().unwrap(), &mut y);
            if self.activates(i) {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(y);
        }
        MlpCache { acts }
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the input.
    pub fn backward(&self, cache: &MlpCache, d_out: &[f64], grads: &mut Mlp) -> Vec<f64> {
        let mut delta = d_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            let g = &mut grads.layers[i];
            if self.activates(i) {
                for (d, y) in delta.iter_mut().zip(&cache.acts[i + 1]) {
                    *d *= 1.0 - y * y;
                }
            }
            let x = &cache.acts[i];
            let mut d_in = vec![0.0; l.in_dim];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.b[o] += d;
                let row = o * l.in_dim..(o + 1) * l.in_dim;
                for ((gw, &xi), (w, di)) in g.w[row.clone()].iter_mut().zip(x).zip(l.w[row].iter().zip(d_in.iter_mut())) {
                    *gw += d * xi;
                    *di += d * w;
                }
            }
            delta = d_in;
        }
        delta
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.w.as_slice(), l.b.as_slice()]).collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.w.as_mut_slice(), l.b.as_mut_slice()])
            .collect()
    }
}
