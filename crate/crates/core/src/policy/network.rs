//! Small fully connected network with tanh hidden layers and a linear output,
//! plus the Adam optimizer used to fit it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let mut layer = Self::zeros(inputs, outputs);
        for w in layer.weights.iter_mut() {
            *w = rng.gen_range(-limit..limit);
        }
        layer
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(z + self.biases[o]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub activation: Activation,
    pub layers: Vec<Layer>,
}

/// Gradient with the same shape as the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Layer>,
}

impl Gradient {
    fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w *= k);
            l.biases.iter_mut().for_each(|b| *b *= k);
        }
    }
}

impl Mlp {
    pub fn random<R: Rng>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        let layers = sizes.windows(2).map(|w| Layer::random(w[0], w[1], rng)).collect();
        Ok(Self {
            activation: Activation::Tanh,
            layers,
        })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        Ok(Self {
            activation: Activation::Tanh,
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.layers.iter().map(|l| l.inputs).collect();
        if let Some(last) = self.layers.last() {
            s.push(last.outputs);
        }
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidModel("network has no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(Error::InvalidModel(format!("layer {i} has inconsistent shapes")));
            }
            if i > 0 && self.layers[i - 1].outputs != l.inputs {
                return Err(Error::InvalidModel(format!("layer {i} does not chain")));
            }
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Squared-error loss `mean_j (out_j - target_j)^2` for one sample and
    /// its gradient, accumulated into `grad`.
    fn accumulate(&self, x: &[f64], target: &[f64], grad: &mut Gradient) -> f64 {
        let last = self.layers.len() - 1;
        // activations[i] is the input to layer i
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.apply(&activations[i], &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(out);
        }
        let out = &activations[last + 1];
        let m = out.len() as f64;
        let mut loss = 0.0;
        let mut delta: Vec<f64> = out
            .iter()
            .zip(target)
            .map(|(o, t)| {
                let r = o - t;
                loss += r * r;
                2.0 * r / m
            })
            .collect();
        for i in (0..=last).rev() {
            let layer = &self.layers[i];
            let input = &activations[i];
            let g = &mut grad.layers[i];
            for o in 0..layer.outputs {
                g.biases[o] += delta[o];
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, a) in row.iter_mut().zip(input) {
                    *gw += delta[o] * a;
                }
            }
            if i > 0 {
                let mut prev = vec![0.0; layer.inputs];
                for o in 0..layer.outputs {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += delta[o] * w;
                    }
                }
                // tanh' = 1 - tanh^2, and input holds tanh values
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
        loss / m
    }

    /// Mean loss and mean gradient over a batch.
    pub fn loss_and_gradient(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> (f64, Gradient) {
        let mut grad = Gradient::zeros_like(self);
        let mut loss = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            loss += self.accumulate(x, t, &mut grad);
        }
        let n = inputs.len().max(1) as f64;
        grad.scale(1.0 / n);
        (loss / n, grad)
    }

    pub fn loss(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> f64 {
        let total: f64 = inputs
            .iter()
            .zip(targets)
            .map(|(x, t)| {
                let out = self.forward(x);
                out.iter().zip(t.iter()).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() / out.len() as f64
            })
            .sum();
        total / inputs.len().max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

pub struct Adam {
    params: AdamParams,
    m: Gradient,
    v: Gradient,
    t: i32,
}

impl Adam {
    pub fn new(net: &Mlp, params: AdamParams) -> Self {
        Self {
            params,
            m: Gradient::zeros_like(net),
            v: Gradient::zeros_like(net),
            t: 0,
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grad: &Gradient) {
        self.t += 1;
        let AdamParams {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.params;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= learning_rate * mh / (vh.sqrt() + epsilon);
            }
        };
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let (m, v) = (&mut self.m.layers[i], &mut self.v.layers[i]);
            update(&mut layer.weights, &grad.layers[i].weights, &mut m.weights, &mut v.weights);
            update(&mut layer.biases, &grad.layers[i].biases, &mut m.biases, &mut v.biases);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn relative_error(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for sizes in [vec![4, 5, 3], vec![4, 6, 6, 3], vec![2, 3, 1]] {
            let net = Mlp::random(&sizes, &mut rng).unwrap();
            let x: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let t: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..*sizes.last().unwrap()).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let xs: Vec<&[f64]> = x.iter().map(|v| v.as_slice()).collect();
            let ts: Vec<&[f64]> = t.iter().map(|v| v.as_slice()).collect();
            let (_, grad) = net.loss_and_gradient(&xs, &ts);
            let eps = 1e-6;
            let mut worst: f64 = 0.0;
            for li in 0..net.layers.len() {
                for wi in 0..net.layers[li].weights.len() + net.layers[li].biases.len() {
                    let mut plus = net.clone();
                    let mut minus = net.clone();
                    let nw = net.layers[li].weights.len();
                    let (analytic, p, m) = if wi < nw {
                        (grad.layers[li].weights[wi], &mut plus.layers[li].weights[wi], &mut minus.layers[li].weights[wi])
                    } else {
                        (grad.layers[li].biases[wi - nw], &mut plus.layers[li].biases[wi - nw], &mut minus.layers[li].biases[wi - nw])
                    };
                    *p += eps;
                    *m -= eps;
                    let numeric = (plus.loss(&xs, &ts) - minus.loss(&xs, &ts)) / (2.0 * eps);
                    worst = worst.max(relative_error(analytic, numeric));
                }
            }
            assert!(worst < 1e-5, "sizes {sizes:?}: worst relative error {worst}");
        }
    }

    #[test]
    fn zero_network_outputs_bias() {
        let mut net = Mlp::zeros(&[4, 32, 32, 3]).unwrap();
        net.layers[2].biases = vec![0.5, -1.0, 2.0];
        assert_eq!(net.forward(&[1.0, 2.0, 3.0, 4.0]), vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn adam_fits_a_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Mlp::random(&[1, 8, 1], &mut rng).unwrap();
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 10.0 - 1.0]).collect();
        let ts: Vec<Vec<f64>> = xs.iter().map(|x| vec![0.5 * x[0] - 0.2]).collect();
        let xr: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let tr: Vec<&[f64]> = ts.iter().map(|v| v.as_slice()).collect();
        let mut opt = Adam::new(&net, AdamParams { learning_rate: 1e-2, ..Default::default() });
        for _ in 0..2000 {
            let (_, g) = net.loss_and_gradient(&xr, &tr);
            opt.step(&mut net, &g);
        }
        assert!(net.loss(&xr, &tr) < 1e-5);
    }

    #[test]
    fn rejects_broken_chain() {
        let mut net = Mlp::zeros(&[4, 8, 3]).unwrap();
        net.layers[1].inputs = 7;
        net.layers[1].weights.truncate(21);
        assert!(net.validate().is_err());
    }
}
