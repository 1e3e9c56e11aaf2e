//! Fully connected tanh network over a flat parameter vector.
//!
//! Layer `l` stores its weights row-major (`out x in`) followed by its bias.
//! Hidden layers use tanh, the output layer is linear.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    pub params: Vec<f64>,
}

/// Activations kept from a forward pass for backprop. `acts[0]` is the input,
/// the last entry is the linear output.
#[derive(Debug, Clone)]
pub struct Cache {
    pub acts: Vec<Vec<f64>>,
}

impl Cache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache holds at least the input")
    }
}

pub fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "need at least input and output widths");
        Mlp {
            dims: dims.to_vec(),
            params: vec![0.0; param_count(dims)],
        }
    }

    /// Uniform Glorot init on every layer, the last layer scaled by
    /// `out_scale`. Biases start at zero.
    pub fn init(dims: &[usize], out_scale: f64, rng: &mut SimRng) -> Self {
        let mut net = Self::zeros(dims);
        let layers = dims.len() - 1;
        let mut off = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let mut limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            if l + 1 == layers {
                limit *= out_scale;
            }
            for w in &mut net.params[off..off + fan_in * fan_out] {
                *w = rng.random_range(-limit..=limit);
            }
            off += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn from_params(dims: &[usize], params: Vec<f64>) -> Result<Self> {
        if dims.len() < 2 || params.len() != param_count(dims) {
            return Err(Error::InvalidArgument(format!(
                "{} parameters do not fit dims {dims:?}",
                params.len()
            )));
        }
        Ok(Mlp { dims: dims.to_vec(), params })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).acts.pop().unwrap()
    }

    pub fn forward_cached(&self, x: &[f64]) -> Cache {
        assert_eq!(x.len(), self.input_dim(), "input width");
        let layers = self.dims.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let input = &acts[l];
            let mut out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    b[o] + row.iter().zip(input).map(|(a, c)| a * c).sum::<f64>()
                })
                .collect();
            if l + 1 < layers {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
            off += n_in * n_out + n_out;
        }
        Cache { acts }
    }

    /// Accumulates dLoss/dparams into `grad` given dLoss/doutput.
    pub fn backward(&self, cache: &Cache, grad_out: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let layers = self.dims.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.dims[l] * self.dims[l + 1] + self.dims[l + 1];
        }
        let mut delta = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let off = offsets[l];
            let input = &cache.acts[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let g_row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                for (g, a) in g_row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[off + n_in * n_out + o] += d;
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (p, wv) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += d * wv;
                }
            }
            // input of layer l is tanh output of layer l-1
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }

    /// Cheap fingerprint used to check that every agent saw the same weights.
    pub fn checksum(&self) -> u64 {
        self.params
            .iter()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, p| (h ^ p.to_bits()).wrapping_mul(0x0100_0000_01b3))
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.params.iter().all(|p| p.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("{what} parameters")))
        }
    }
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn param_layout_size() {
        assert_eq!(param_count(&[4, 8, 7]), 4 * 8 + 8 + 8 * 7 + 7);
        let net = Mlp::init(&[4, 8, 7], 1.0, &mut stream(0, Purpose::Init, 0));
        assert_eq!(net.params.len(), 103);
        assert!(Mlp::from_params(&[4, 8, 7], vec![0.0; 3]).is_err());
    }

    #[test]
    fn zero_net_gives_uniform_policy() {
        let net = Mlp::zeros(&[5, 16, 7]);
        let p = softmax(&net.forward(&[0.3, -1.0, 2.0, 0.0, 1.0]));
        assert!(p.iter().all(|v| (v - 1.0 / 7.0).abs() < 1e-15));
    }

    #[test]
    fn softmax_shift_invariance() {
        let z = [0.1, -3.0, 2.5, 0.0, 7.0, -1.0, 0.4];
        let shifted: Vec<f64> = z.iter().map(|v| v + 123.4).collect();
        let (a, b) = (softmax(&z), softmax(&shifted));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_handles_huge_logits() {
        let p = softmax(&[1e300, 0.0, -1e300]);
        assert_eq!(p[0], 1.0);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn checksum_tracks_params() {
        let mut net = Mlp::init(&[3, 4, 2], 1.0, &mut stream(1, Purpose::Init, 0));
        let c = net.checksum();
        net.params[5] += 1e-12;
        assert_ne!(c, net.checksum());
    }
}
