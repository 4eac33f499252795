use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layout::HeadLayout;
use crate::error::{ensure_len, Error, Result};

/// Input width and hidden trunk widths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
}

impl LayerSpec {
    /// Two hidden layers of 50 and 100 units.
    pub fn standard(input: usize) -> Self {
        Self {
            input,
            hidden: vec![50, 100],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "layer widths must be at least 1: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn trunk_output(&self) -> usize {
        self.hidden.last().copied().unwrap_or(self.input)
    }
}

/// Dot product with four interleaved partial sums, combined in a fixed
/// order. Breaks the serial add chain while staying deterministic.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        let x: &[f64; 4] = x.try_into().unwrap();
        let y: &[f64; 4] = y.try_into().unwrap();
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Fully connected layer; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(row, b)| b + dot(row, x)),
        );
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }
}

/// Multi-headed feed-forward Q-network: ReLU trunk, linear heads that all
/// read the last trunk activation.
#[derive(Debug, Clone, PartialEq)]
pub struct QNet {
    spec: LayerSpec,
    layout: HeadLayout,
    trunk: Vec<Dense>,
    heads: Vec<Dense>,
}

/// Activations kept for the backward pass.
/// Per-sample loss, its forward pass, and per-head output gradients.
pub type SampleGrad = (f64, ForwardPass, Vec<Option<Vec<f64>>>);

#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Input followed by each trunk layer's post-ReLU activation.
    activations: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

impl ForwardPass {
    pub fn trunk_output(&self) -> &[f64] {
        self.activations.last().expect("input is always present")
    }
}

/// Parameter gradients with the same shape as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    trunk: Vec<Dense>,
    heads: Vec<Dense>,
}

impl QNet {
    pub fn init<R: Rng + ?Sized>(spec: LayerSpec, layout: HeadLayout, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        if layout.is_empty() {
            return Err(Error::Layout("network needs at least one head".into()));
        }
        let mut trunk = Vec::with_capacity(spec.hidden.len());
        let mut fan_in = spec.input;
        for &w in &spec.hidden {
            trunk.push(Dense::glorot(fan_in, w, rng));
            fan_in = w;
        }
        let heads = layout
            .heads()
            .iter()
            .map(|h| Dense::glorot(fan_in, h.width, rng))
            .collect();
        Ok(Self {
            spec,
            layout,
            trunk,
            heads,
        })
    }

    /// Network with every parameter set to zero.
    pub fn zeros(spec: LayerSpec, layout: HeadLayout) -> Result<Self> {
        spec.validate()?;
        let mut trunk = Vec::new();
        let mut fan_in = spec.input;
        for &w in &spec.hidden {
            trunk.push(Dense::zeros(fan_in, w));
            fan_in = w;
        }
        let heads = layout.heads().iter().map(|h| Dense::zeros(fan_in, h.width)).collect();
        Ok(Self {
            spec,
            layout,
            trunk,
            heads,
        })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn layout(&self) -> &HeadLayout {
        &self.layout
    }

    pub fn input_width(&self) -> usize {
        self.spec.input
    }

    pub fn trunk_layers(&self) -> &[Dense] {
        &self.trunk
    }

    pub fn head_layers(&self) -> &[Dense] {
        &self.heads
    }

    pub fn head_layers_mut(&mut self) -> &mut [Dense] {
        &mut self.heads
    }

    pub fn trunk_layers_mut(&mut self) -> &mut [Dense] {
        &mut self.trunk
    }

    pub fn param_count(&self) -> usize {
        self.trunk.iter().chain(&self.heads).map(Dense::param_count).sum()
    }

    /// All parameters: trunk layers then heads, each weights (row-major)
    /// followed by biases.
    pub fn flat_params(&self) -> Vec<f64> {
        self.trunk
            .iter()
            .chain(&self.heads)
            .flat_map(|d| d.params().copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        ensure_len("flat parameters", self.param_count(), values.len())?;
        for (p, v) in self
            .trunk
            .iter_mut()
            .chain(self.heads.iter_mut())
            .flat_map(|d| d.params_mut())
            .zip(values)
        {
            *p = *v;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.trunk
            .iter()
            .chain(&self.heads)
            .all(|d| d.params().all(|p| p.is_finite()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardPass> {
        ensure_len("network input", self.spec.input, input.len())?;
        let mut activations = Vec::with_capacity(self.trunk.len() + 1);
        activations.push(input.to_vec());
        for layer in &self.trunk {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.apply(activations.last().unwrap(), &mut z);
            for v in &mut z {
                *v = v.max(0.0);
            }
            activations.push(z);
        }
        let top = activations.last().unwrap();
        let q = self
            .heads
            .iter()
            .map(|h| {
                let mut out = Vec::with_capacity(h.outputs);
                h.apply(top, &mut out);
                out
            })
            .collect();
        Ok(ForwardPass { activations, q })
    }

    /// Per-head Q-vectors.
    pub fn q_values(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.forward(input)?.q)
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            trunk: self.trunk.iter().map(|d| Dense::zeros(d.inputs, d.outputs)).collect(),
            heads: self.heads.iter().map(|d| Dense::zeros(d.inputs, d.outputs)).collect(),
        }
    }

    /// Backpropagate per-head output gradients (`None` heads contribute
    /// nothing) from `pass`.
    pub fn backward(&self, pass: &ForwardPass, head_grads: &[Option<Vec<f64>>]) -> Result<Gradients> {
        let mut grads = self.zero_gradients();
        self.backward_into(&mut grads, pass, head_grads)?;
        Ok(grads)
    }

    /// Like [`backward`](Self::backward) but adds into `acc`. Each parameter
    /// receives at most one addition per call (exact-zero terms are skipped),
    /// so accumulating samples in a fixed order is bit-identical to summing
    /// per-sample gradients in that order.
    pub fn backward_into(
        &self,
        acc: &mut Gradients,
        pass: &ForwardPass,
        head_grads: &[Option<Vec<f64>>],
    ) -> Result<()> {
        ensure_len("head gradients", self.heads.len(), head_grads.len())?;
        let top = pass.trunk_output();
        let mut delta = vec![0.0; top.len()];
        let mut any = false;
        for ((head, g_acc), g) in self.heads.iter().zip(&mut acc.heads).zip(head_grads) {
            let Some(g) = g else { continue };
            ensure_len("head gradient width", head.outputs, g.len())?;
            any = true;
            for (o, &go) in g.iter().enumerate() {
                if go == 0.0 {
                    continue;
                }
                let row = &head.weights[o * head.inputs..(o + 1) * head.inputs];
                let grow = &mut g_acc.weights[o * head.inputs..(o + 1) * head.inputs];
                for ((gw, &a), (d, &w)) in grow.iter_mut().zip(top).zip(delta.iter_mut().zip(row)) {
                    *gw += go * a;
                    *d += go * w;
                }
                g_acc.bias[o] += go;
            }
        }
        if !any {
            return Ok(());
        }
        for l in (0..self.trunk.len()).rev() {
            let layer = &self.trunk[l];
            let out = &pass.activations[l + 1];
            let inp = &pass.activations[l];
            for (d, &a) in delta.iter_mut().zip(out) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            let mut prev = vec![0.0; layer.inputs];
            let g_acc = &mut acc.trunk[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                let grow = &mut g_acc.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for ((gw, &x), (p, &w)) in grow.iter_mut().zip(inp).zip(prev.iter_mut().zip(row)) {
                    *gw += d * x;
                    *p += d * w;
                }
                g_acc.bias[o] += d;
            }
            delta = prev;
        }
        Ok(())
    }

    /// `theta <- theta - lr * grad`. Rejects non-finite gradients and leaves
    /// the network untouched in that case.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradients"));
        }
        self.check_shape(grads)?;
        for (p, g) in self
            .trunk
            .iter_mut()
            .chain(self.heads.iter_mut())
            .zip(grads.trunk.iter().chain(&grads.heads))
        {
            for (w, gw) in p.params_mut().zip(g.params()) {
                *w -= lr * gw;
            }
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(())
    }

    fn check_shape(&self, grads: &Gradients) -> Result<()> {
        let same = self.trunk.len() == grads.trunk.len()
            && self.heads.len() == grads.heads.len()
            && self
                .trunk
                .iter()
                .chain(&self.heads)
                .zip(grads.trunk.iter().chain(&grads.heads))
                .all(|(a, b)| a.inputs == b.inputs && a.outputs == b.outputs);
        if same {
            Ok(())
        } else {
            Err(Error::Layout("gradient shape does not match network".into()))
        }
    }

    /// Copy every parameter from `other` (target-network sync).
    pub fn copy_from(&mut self, other: &QNet) -> Result<()> {
        if self.spec != other.spec || self.layout != other.layout {
            return Err(Error::Layout("cannot copy between differently shaped nets".into()));
        }
        self.trunk.clone_from(&other.trunk);
        self.heads.clone_from(&other.heads);
        Ok(())
    }

    pub(crate) fn from_parts(spec: LayerSpec, layout: HeadLayout, params: &[f64]) -> Result<Self> {
        let mut net = Self::zeros(spec, layout)?;
        net.set_flat_params(params)?;
        Ok(net)
    }
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        self.trunk
            .iter()
            .chain(&self.heads)
            .flat_map(|d| d.params().copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.trunk
            .iter()
            .chain(&self.heads)
            .all(|d| d.params().all(|p| p.is_finite()))
    }

    /// Element-wise `self += other`.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.trunk.iter_mut().chain(self.heads.iter_mut()).zip(other.trunk.iter().chain(&other.heads)) {
            for (x, y) in a.params_mut().zip(b.params()) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for d in self.trunk.iter_mut().chain(self.heads.iter_mut()) {
            for x in d.params_mut() {
                *x *= factor;
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.trunk
            .iter()
            .chain(&self.heads)
            .flat_map(|d| d.params())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescale so the global L2 norm is at most `max_norm`.
    pub fn clip_norm(&mut self, max_norm: f64) {
        let n = self.l2_norm();
        if n > max_norm && n.is_finite() {
            self.scale(max_norm / n);
        }
    }

    /// Gradient block of head `i`: (weights, bias).
    pub fn head(&self, i: usize) -> (&[f64], &[f64]) {
        (&self.heads[i].weights, &self.heads[i].bias)
    }
}
