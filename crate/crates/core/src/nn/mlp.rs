use rand::Rng;

use crate::error::{structural, Result};

/// Dense feed-forward network: affine layers with ReLU between them and an
/// affine output layer.
///
/// Parameters live in one flat buffer. Layer `l` owns an `out x in` row-major
/// weight block followed by its `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    widths: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer activations recorded by [`MlpParams::forward_trace`].
#[derive(Debug, Clone, Default)]
pub struct MlpTrace {
    // activations[0] is the input, activations[l + 1] the output of layer l
    // (post-ReLU for hidden layers, affine for the last one).
    activations: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpParams {
    /// All-zero network with the given layer widths `[input, hidden.., output]`.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(structural(format!("invalid layer widths {widths:?}")));
        }
        Ok(Self {
            widths: widths.to_vec(),
            params: vec![0.0; param_count(widths)],
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        let mut mlp = Self::zeros(widths)?;
        for l in 0..mlp.num_layers() {
            let (fan_in, fan_out) = (mlp.widths[l], mlp.widths[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let (w_off, _) = mlp.offsets(l);
            for w in &mut mlp.params[w_off..w_off + fan_in * fan_out] {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(mlp)
    }

    pub fn from_parts(widths: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut mlp = Self::zeros(widths)?;
        if params.len() != mlp.params.len() {
            return Err(structural(format!(
                "expected {} parameters for widths {widths:?}, got {}",
                mlp.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(structural("non-finite parameter"));
        }
        mlp.params = params;
        Ok(mlp)
    }

    /// Builds from explicit `(weights, bias)` per layer; weights are row-major `out x in`.
    pub fn from_layers(input_width: usize, layers: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        let mut widths = vec![input_width];
        let mut params = Vec::new();
        for (w, b) in layers {
            let fan_in = *widths.last().unwrap();
            if w.len() != b.len() * fan_in {
                return Err(structural("layer weights do not chain"));
            }
            widths.push(b.len());
            params.extend_from_slice(w);
            params.extend_from_slice(b);
        }
        Self::from_parts(&widths, params)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offsets of layer `l`'s weight block and bias block in the flat buffer.
    fn offsets(&self, l: usize) -> (usize, usize) {
        let start = param_count(&self.widths[..=l]);
        (start, start + self.widths[l] * self.widths[l + 1])
    }

    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (w, b) = self.offsets(l);
        let out = self.widths[l + 1];
        (&self.params[w..b], &self.params[b..b + out])
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_width() {
            return Err(structural(format!(
                "input width {} does not match network input {}",
                input.len(),
                self.input_width()
            )));
        }
        let mut trace = MlpTrace::default();
        self.forward_trace(input, &mut trace);
        Ok(trace.activations.pop().unwrap())
    }

    /// Forward pass that keeps every activation for [`backward`](Self::backward).
    /// Panics on an input width mismatch.
    pub fn forward_trace(&self, input: &[f64], trace: &mut MlpTrace) {
        assert_eq!(input.len(), self.input_width(), "mlp input width");
        let layers = self.num_layers();
        trace.activations.resize_with(layers + 1, Vec::new);
        trace.activations[0].clear();
        trace.activations[0].extend_from_slice(input);
        for l in 0..layers {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let (w, b) = self.layer(l);
            let (prev, rest) = trace.activations.split_at_mut(l + 1);
            let x = &prev[l];
            let out = &mut rest[0];
            out.clear();
            out.extend_from_slice(b);
            for (o, row) in out.iter_mut().zip(w.chunks_exact(fan_in)) {
                *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            }
            if l + 1 < layers {
                for o in out.iter_mut() {
                    *o = o.max(0.0);
                }
            }
            debug_assert_eq!(out.len(), fan_out);
        }
    }

    /// Accumulates `d(grad_out . output)/d params` into `grad`.
    pub fn backward(&self, trace: &MlpTrace, grad_out: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len(), "gradient buffer size");
        assert_eq!(grad_out.len(), self.output_width(), "output gradient width");
        let mut delta = grad_out.to_vec();
        for l in (0..self.num_layers()).rev() {
            let fan_in = self.widths[l];
            let (w_off, b_off) = self.offsets(l);
            let x = &trace.activations[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grad[b_off + o] += d;
                let row = &mut grad[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += d * xi;
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[w_off..b_off];
            let mut prev = vec![0.0; fan_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (p, wi) in prev.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                    *p += d * wi;
                }
            }
            // ReLU gate; a post-activation of exactly zero passes no gradient.
            for (p, a) in prev.iter_mut().zip(x) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }
}
