use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default hidden layer widths.
pub const DEFAULT_WIDTHS: [usize; 3] = [64, 64, 64];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub w: usize,
    pub b: usize,
}

/// Sigmoid MLP from joint angles to a translation (3 linear outputs) and
/// roll-pitch-yaw angles (3 linear outputs). All parameters live in one flat
/// vector so optimizers can treat them uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseNet {
    n_joints: usize,
    layers: Vec<Layer>,
    params: Vec<f64>,
}

/// Value, first and second time derivative of the six network outputs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OutputJet {
    pub t: [f64; 3],
    pub t_dot: [f64; 3],
    pub t_ddot: [f64; 3],
    pub r: [f64; 3],
    pub r_dot: [f64; 3],
    pub r_ddot: [f64; 3],
}

/// Per-layer intermediate values kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub(crate) struct Jets {
    x: [Vec<f64>; 3],
    z: Vec<[Vec<f64>; 3]>,
    h: Vec<[Vec<f64>; 3]>,
    s: Vec<[Vec<f64>; 3]>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn layout(n_joints: usize, widths: &[usize]) -> (Vec<Layer>, usize) {
    let mut layers = Vec::with_capacity(widths.len() + 2);
    let mut off = 0;
    let mut n_in = n_joints;
    let mut push = |n_in: usize, n_out: usize| {
        let l = Layer { n_in, n_out, w: off, b: off + n_in * n_out };
        off += n_in * n_out + n_out;
        layers.push(l);
    };
    for &w in widths {
        push(n_in, w);
        n_in = w;
    }
    push(n_in, 3);
    push(n_in, 3);
    (layers, off)
}

/// z = W x + b for the value and W x for both derivatives.
fn linear(params: &[f64], l: &Layer, x: &[Vec<f64>; 3], z: &mut [Vec<f64>; 3]) {
    for k in 0..3 {
        z[k].resize(l.n_out, 0.0);
    }
    for o in 0..l.n_out {
        let row = &params[l.w + o * l.n_in..l.w + (o + 1) * l.n_in];
        let (mut a, mut b, mut c) = (params[l.b + o], 0.0, 0.0);
        for i in 0..l.n_in {
            a += row[i] * x[0][i];
            b += row[i] * x[1][i];
            c += row[i] * x[2][i];
        }
        z[0][o] = a;
        z[1][o] = b;
        z[2][o] = c;
    }
}

/// Accumulates parameter gradients of a linear layer and writes the input
/// gradients into `gx` (if given).
fn linear_back(
    params: &[f64],
    l: &Layer,
    x: &[Vec<f64>; 3],
    gz: &[Vec<f64>; 3],
    grad: &mut [f64],
    gx: Option<&mut [Vec<f64>; 3]>,
) {
    for o in 0..l.n_out {
        let (a, b, c) = (gz[0][o], gz[1][o], gz[2][o]);
        grad[l.b + o] += a;
        let g = &mut grad[l.w + o * l.n_in..l.w + (o + 1) * l.n_in];
        for i in 0..l.n_in {
            g[i] += a * x[0][i] + b * x[1][i] + c * x[2][i];
        }
    }
    if let Some(gx) = gx {
        for k in 0..3 {
            gx[k].clear();
            gx[k].resize(l.n_in, 0.0);
        }
        for o in 0..l.n_out {
            let row = &params[l.w + o * l.n_in..l.w + (o + 1) * l.n_in];
            let (a, b, c) = (gz[0][o], gz[1][o], gz[2][o]);
            for i in 0..l.n_in {
                gx[0][i] += row[i] * a;
                gx[1][i] += row[i] * b;
                gx[2][i] += row[i] * c;
            }
        }
    }
}

impl PoseNet {
    /// Fresh network with Gaussian weights (std 1/√fan-in) and zero biases.
    pub fn new(n_joints: usize, widths: &[usize], seed: u64) -> Result<Self> {
        if n_joints == 0 || widths.is_empty() || widths.contains(&0) {
            return Err(Error::InvalidArgument("network needs inputs and non-empty hidden layers".into()));
        }
        let (layers, size) = layout(n_joints, widths);
        let mut params = vec![0.0; size];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &layers {
            let d = Normal::new(0.0, 1.0 / (l.n_in as f64).sqrt()).expect("positive std");
            for p in &mut params[l.w..l.b] {
                *p = d.sample(&mut rng);
            }
        }
        Ok(Self { n_joints, layers, params })
    }

    /// Network with every parameter zero.
    pub fn zeros(n_joints: usize, widths: &[usize]) -> Result<Self> {
        let mut n = Self::new(n_joints, widths, 0)?;
        n.params.iter_mut().for_each(|p| *p = 0.0);
        Ok(n)
    }

    pub fn n_joints(&self) -> usize {
        self.n_joints
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 2].iter().map(|l| l.n_out).collect()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn check_input(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_joints {
            return Err(Error::DimensionMismatch { expected: self.n_joints, got: v.len() });
        }
        Ok(())
    }

    /// Propagates (x, ẋ, ẍ) through the network, keeping intermediates.
    pub(crate) fn forward_jets(&self, theta: &[f64], theta_dot: &[f64], theta_ddot: &[f64], j: &mut Jets) -> OutputJet {
        let hidden = self.layers.len() - 2;
        j.x = [theta.to_vec(), theta_dot.to_vec(), theta_ddot.to_vec()];
        j.z.resize_with(hidden, Default::default);
        j.h.resize_with(hidden, Default::default);
        j.s.resize_with(hidden, Default::default);
        for k in 0..hidden {
            let (before, rest) = j.h.split_at_mut(k);
            let input = if k == 0 { &j.x } else { &before[k - 1] };
            linear(&self.params, &self.layers[k], input, &mut j.z[k]);
            let z = &j.z[k];
            let h = &mut rest[0];
            let s = &mut j.s[k];
            let n = z[0].len();
            for v in h.iter_mut().chain(s.iter_mut()) {
                v.resize(n, 0.0);
            }
            for i in 0..n {
                let sg = sigmoid(z[0][i]);
                let s1 = sg * (1.0 - sg);
                let s2 = s1 * (1.0 - 2.0 * sg);
                let s3 = s1 * (1.0 - 6.0 * sg + 6.0 * sg * sg);
                let zd = z[1][i];
                h[0][i] = sg;
                h[1][i] = s1 * zd;
                h[2][i] = s2 * zd * zd + s1 * z[2][i];
                s[0][i] = s1;
                s[1][i] = s2;
                s[2][i] = s3;
            }
        }
        let last = &j.h[hidden - 1];
        let mut tz: [Vec<f64>; 3] = Default::default();
        let mut rz: [Vec<f64>; 3] = Default::default();
        linear(&self.params, &self.layers[hidden], last, &mut tz);
        linear(&self.params, &self.layers[hidden + 1], last, &mut rz);
        let arr = |v: &Vec<f64>| [v[0], v[1], v[2]];
        OutputJet {
            t: arr(&tz[0]),
            t_dot: arr(&tz[1]),
            t_ddot: arr(&tz[2]),
            r: arr(&rz[0]),
            r_dot: arr(&rz[1]),
            r_ddot: arr(&rz[2]),
        }
    }

    /// Adds d(loss)/d(params) to `grad` given the loss gradient with respect
    /// to every output jet component. `j` must come from the matching
    /// [`forward_jets`](Self::forward_jets) call.
    pub(crate) fn backward(&self, j: &Jets, g: &OutputJet, grad: &mut [f64]) {
        let hidden = self.layers.len() - 2;
        let last = &j.h[hidden - 1];
        let gt = [g.t.to_vec(), g.t_dot.to_vec(), g.t_ddot.to_vec()];
        let gr = [g.r.to_vec(), g.r_dot.to_vec(), g.r_ddot.to_vec()];
        let mut gh: [Vec<f64>; 3] = Default::default();
        let mut gh2: [Vec<f64>; 3] = Default::default();
        linear_back(&self.params, &self.layers[hidden], last, &gt, grad, Some(&mut gh));
        linear_back(&self.params, &self.layers[hidden + 1], last, &gr, grad, Some(&mut gh2));
        for k in 0..3 {
            for (a, b) in gh[k].iter_mut().zip(&gh2[k]) {
                *a += b;
            }
        }
        let mut gz: [Vec<f64>; 3] = Default::default();
        for k in (0..hidden).rev() {
            let z = &j.z[k];
            let s = &j.s[k];
            let n = z[0].len();
            for v in gz.iter_mut() {
                v.resize(n, 0.0);
            }
            for i in 0..n {
                let (s1, s2, s3) = (s[0][i], s[1][i], s[2][i]);
                let (zd, zdd) = (z[1][i], z[2][i]);
                let (a, b, c) = (gh[0][i], gh[1][i], gh[2][i]);
                gz[2][i] = c * s1;
                gz[1][i] = b * s1 + c * 2.0 * s2 * zd;
                gz[0][i] = a * s1 + b * s2 * zd + c * (s3 * zd * zd + s2 * zdd);
            }
            let input = if k == 0 { &j.x } else { &j.h[k - 1] };
            let need_input_grad = k > 0;
            linear_back(&self.params, &self.layers[k], input, &gz, grad, need_input_grad.then_some(&mut gh));
        }
    }

    /// Output jet at θ with derivative directions θ̇ and θ̈.
    pub fn output_jet(&self, theta: &[f64], theta_dot: &[f64], theta_ddot: &[f64]) -> Result<OutputJet> {
        self.check_input(theta)?;
        self.check_input(theta_dot)?;
        self.check_input(theta_ddot)?;
        let mut j = Jets::default();
        Ok(self.forward_jets(theta, theta_dot, theta_ddot, &mut j))
    }
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    n_in: usize,
    n_out: usize,
    activation: String,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetDoc {
    n_joints: usize,
    hidden: Vec<LayerDoc>,
    translation: LayerDoc,
    rotation: LayerDoc,
}

impl Serialize for PoseNet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let doc = |l: &Layer, act: &str| LayerDoc {
            n_in: l.n_in,
            n_out: l.n_out,
            activation: act.to_string(),
            weights: self.params[l.w..l.b].to_vec(),
            bias: self.params[l.b..l.b + l.n_out].to_vec(),
        };
        let h = self.layers.len() - 2;
        NetDoc {
            n_joints: self.n_joints,
            hidden: self.layers[..h].iter().map(|l| doc(l, "sigmoid")).collect(),
            translation: doc(&self.layers[h], "linear"),
            rotation: doc(&self.layers[h + 1], "linear"),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PoseNet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = NetDoc::deserialize(d)?;
        let widths: Vec<usize> = doc.hidden.iter().map(|l| l.n_out).collect();
        let mut net = PoseNet::zeros(doc.n_joints, &widths).map_err(D::Error::custom)?;
        let docs: Vec<&LayerDoc> = doc.hidden.iter().chain([&doc.translation, &doc.rotation]).collect();
        for (l, ld) in net.layers.clone().iter().zip(docs) {
            if ld.n_in != l.n_in || ld.n_out != l.n_out || ld.weights.len() != l.n_in * l.n_out || ld.bias.len() != l.n_out {
                return Err(D::Error::custom("layer shapes do not chain"));
            }
            net.params[l.w..l.b].copy_from_slice(&ld.weights);
            net.params[l.b..l.b + l.n_out].copy_from_slice(&ld.bias);
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        let n = PoseNet::new(5, &[8, 8, 8], 1).unwrap();
        assert_eq!(n.n_params(), (5 * 8 + 8) + 2 * (8 * 8 + 8) + 2 * (8 * 3 + 3));
        assert_eq!(n.widths(), vec![8, 8, 8]);
    }

    #[test]
    fn json_round_trip() {
        let n = PoseNet::new(3, &[4, 5, 6], 7).unwrap();
        let s = serde_json::to_string(&n).unwrap();
        let back: PoseNet = serde_json::from_str(&s).unwrap();
        assert_eq!(n, back);
        let bad = s.replacen("\"n_in\":3", "\"n_in\":2", 1);
        assert!(serde_json::from_str::<PoseNet>(&bad).is_err());
    }

    #[test]
    fn jets_match_finite_differences_along_a_path() {
        // θ(t) = θ0 + v t + a t²/2, so the jet at t=0 is (θ0, v, a).
        let n = PoseNet::new(3, &[8, 8, 8], 3).unwrap();
        let th = [0.3, -0.2, 0.9];
        let v = [0.7, 0.1, -0.4];
        let a = [-0.3, 0.5, 0.2];
        let at = |t: f64| -> OutputJet {
            let x: Vec<f64> = (0..3).map(|i| th[i] + v[i] * t + 0.5 * a[i] * t * t).collect();
            n.output_jet(&x, &[0.0; 3], &[0.0; 3]).unwrap()
        };
        let j = n.output_jet(&th, &v, &a).unwrap();
        let h = 1e-4;
        let (p, m, c) = (at(h), at(-h), at(0.0));
        for k in 0..3 {
            assert!(((p.t[k] - m.t[k]) / (2.0 * h) - j.t_dot[k]).abs() < 1e-6);
            assert!(((p.r[k] - m.r[k]) / (2.0 * h) - j.r_dot[k]).abs() < 1e-6);
            assert!(((p.t[k] - 2.0 * c.t[k] + m.t[k]) / (h * h) - j.t_ddot[k]).abs() < 1e-4);
            assert!(((p.r[k] - 2.0 * c.r[k] + m.r[k]) / (h * h) - j.r_ddot[k]).abs() < 1e-4);
        }
    }
}
