//! Minimal dense-network engine: explicit forward/backward passes, Adam,
//! the two training losses, and finite-difference gradient verification.
//!
//! Everything is double precision and hand-rolled on flat `Vec<f64>` arrays;
//! weights of layer `l` are stored row-major with shape `[out × in]`, so
//! output unit `j` reads `w[j*in + i]`. There is no autodiff graph: each
//! forward pass returns the cache its backward pass needs, and `backward`
//! computes the exact vector-Jacobian product for whatever scalar loss the
//! supplied output gradient encodes.

use rand::Rng;

/// Elementwise nonlinearity applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// Pass-through. Used for value/Q outputs.
    Identity,
    /// Rectified linear unit. Used for all hidden layers.
    Relu,
    /// Row-wise softmax. Used for policy outputs only.
    Softmax,
}

/// Fully connected network with a fixed hidden activation and a configurable
/// output activation.
#[derive(Debug, Clone)]
pub struct DenseNetwork {
    /// Widths of the input, each hidden layer, and the output.
    pub layer_widths: Vec<usize>,
    /// Per layer, row-major `[out × in]` weight matrix.
    pub weights: Vec<Vec<f64>>,
    /// Per layer, bias vector of length `out`.
    pub biases: Vec<Vec<f64>>,
    /// Nonlinearity for every layer except the last.
    pub hidden_activation: Activation,
    /// Nonlinearity for the last layer: identity or softmax.
    pub output_activation: Activation,
}

/// Activations recorded by [`DenseNetwork::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    /// `acts[0]` is the input batch, `acts[l+1]` the post-activation output
    /// of layer `l`; each is row-major `[batch × width]`.
    acts: Vec<Vec<f64>>,
    /// Pre-activation values of each layer, same layout.
    preacts: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// Network output recorded by the forward pass (last activation row).
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache holds at least the input")
    }

    /// Batch size of the recorded forward pass.
    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Parameter gradients produced by [`DenseNetwork::backward`], plus the
/// gradient with respect to the network input (needed when networks feed
/// into each other, as in end-to-end mixing training).
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    /// `[batch × input_width]` gradient w.r.t. the forward input.
    pub input: Vec<f64>,
}

impl Gradients {
    /// Zero gradients shaped like `net`'s parameters with the given batch.
    pub fn zeros_like(net: &DenseNetwork, batch: usize) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            input: vec![0.0; batch * net.layer_widths[0]],
        }
    }

    /// Accumulates `other` into `self` (input gradients included).
    pub fn add(&mut self, other: &Gradients) {
        assert_eq!(self.weights.len(), other.weights.len(), "layer count mismatch");
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.input.iter_mut().zip(&other.input) {
            *x += y;
        }
    }

    /// Scales every gradient entry by `c`.
    pub fn scale(&mut self, c: f64) {
        for w in &mut self.weights {
            for x in w {
                *x *= c;
            }
        }
        for b in &mut self.biases {
            for x in b {
                *x *= c;
            }
        }
        for x in &mut self.input {
            *x *= c;
        }
    }
}

impl DenseNetwork {
    /// Zero-initialized network; callers normally follow with one of the
    /// initialization routines below.
    pub fn zeros(layer_widths: &[usize], output_activation: Activation) -> Self {
        assert!(layer_widths.len() >= 2, "need at least input and output widths");
        assert!(
            layer_widths.iter().all(|&w| w > 0),
            "layer widths must be positive, got {layer_widths:?}"
        );
        assert!(
            matches!(output_activation, Activation::Identity | Activation::Softmax),
            "output activation must be identity or softmax"
        );
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layer_widths.len() - 1 {
            weights.push(vec![0.0; layer_widths[l] * layer_widths[l + 1]]);
            biases.push(vec![0.0; layer_widths[l + 1]]);
        }
        DenseNetwork {
            layer_widths: layer_widths.to_vec(),
            weights,
            biases,
            hidden_activation: Activation::Relu,
            output_activation,
        }
    }

    /// Uniform fan-in initialization: `U(-1/√in, 1/√in)` for weights and
    /// biases of each layer. Used by the Q-learning components.
    pub fn init_uniform_fanin(layer_widths: &[usize], output_activation: Activation, rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(layer_widths, output_activation);
        for l in 0..net.weights.len() {
            let bound = 1.0 / (layer_widths[l] as f64).sqrt();
            for w in &mut net.weights[l] {
                *w = rng.gen_range(-bound..bound);
            }
            for b in &mut net.biases[l] {
                *b = rng.gen_range(-bound..bound);
            }
        }
        net
    }

    /// Orthogonal initialization with gain √2 on hidden layers and
    /// `output_gain` on the last layer; biases start at zero. Used by the
    /// actor-critic components (small `output_gain` keeps initial policies
    /// near uniform).
    pub fn init_orthogonal(
        layer_widths: &[usize],
        output_activation: Activation,
        output_gain: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut net = Self::zeros(layer_widths, output_activation);
        let last = net.weights.len() - 1;
        for l in 0..net.weights.len() {
            let gain = if l == last { output_gain } else { std::f64::consts::SQRT_2 };
            let (rows, cols) = (layer_widths[l + 1], layer_widths[l]);
            net.weights[l] = orthogonal_matrix(rows, cols, gain, rng);
        }
        net
    }

    /// Number of layers (affine maps).
    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Total number of scalar parameters.
    pub fn num_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Runs the network on a row-major `[batch × input_width]` batch and
    /// returns the output batch together with the cache `backward` needs.
    ///
    /// Panics if the input length is not a multiple of the input width.
    pub fn forward(&self, input: &[f64], batch: usize) -> (Vec<f64>, ForwardCache) {
        let in_w = self.layer_widths[0];
        assert_eq!(
            input.len(),
            batch * in_w,
            "input length {} does not match batch {} × input width {}",
            input.len(),
            batch,
            in_w
        );
        let mut acts = vec![input.to_vec()];
        let mut preacts = Vec::new();
        for l in 0..self.num_layers() {
            let (iw, ow) = (self.layer_widths[l], self.layer_widths[l + 1]);
            let x = &acts[l];
            let mut z = vec![0.0; batch * ow];
            for b in 0..batch {
                for j in 0..ow {
                    let mut s = self.biases[l][j];
                    let row = &self.weights[l][j * iw..(j + 1) * iw];
                    let xin = &x[b * iw..(b + 1) * iw];
                    for i in 0..iw {
                        s += row[i] * xin[i];
                    }
                    z[b * ow + j] = s;
                }
            }
            let act = if l + 1 == self.num_layers() { self.output_activation } else { self.hidden_activation };
            let a = apply_activation(act, &z, batch, ow);
            preacts.push(z);
            acts.push(a);
        }
        (acts.last().unwrap().clone(), ForwardCache { batch, acts, preacts })
    }

    /// Backpropagates `output_grad` (row-major `[batch × output_width]`,
    /// the gradient of some scalar loss w.r.t. the forward output) through
    /// the cached pass. Parameter gradients are summed over the batch, so a
    /// mean-over-batch loss convention is expressed by scaling
    /// `output_grad` itself.
    ///
    /// Panics if the cache does not match this network's shape.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Gradients {
        let batch = cache.batch;
        let out_w = *self.layer_widths.last().unwrap();
        assert_eq!(
            cache.acts.len(),
            self.num_layers() + 1,
            "stale or mismatched forward cache (layer count)"
        );
        for (l, a) in cache.acts.iter().enumerate() {
            assert_eq!(a.len(), batch * self.layer_widths[l], "stale forward cache at layer {l}");
        }
        assert_eq!(output_grad.len(), batch * out_w, "output gradient shape mismatch");

        let mut grads = Gradients::zeros_like(self, batch);
        // Gradient flowing into the current layer's post-activation output.
        let mut d_out = output_grad.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (iw, ow) = (self.layer_widths[l], self.layer_widths[l + 1]);
            let act = if l + 1 == self.num_layers() { self.output_activation } else { self.hidden_activation };
            let d_z = activation_backward(act, &cache.preacts[l], &cache.acts[l + 1], &d_out, batch, ow);
            let x = &cache.acts[l];
            let mut d_x = vec![0.0; batch * iw];
            for b in 0..batch {
                for j in 0..ow {
                    let g = d_z[b * ow + j];
                    if g == 0.0 {
                        continue;
                    }
                    grads.biases[l][j] += g;
                    let row = &mut grads.weights[l][j * iw..(j + 1) * iw];
                    let xin = &x[b * iw..(b + 1) * iw];
                    let wrow = &self.weights[l][j * iw..(j + 1) * iw];
                    let dxr = &mut d_x[b * iw..(b + 1) * iw];
                    for i in 0..iw {
                        row[i] += g * xin[i];
                        dxr[i] += g * wrow[i];
                    }
                }
            }
            d_out = d_x;
        }
        grads.input = d_out;
        grads
    }

    /// Flattened view of all parameters (weights then biases, layer order).
    /// Used by the finite-difference checker and the checkpoint format.
    pub fn get_param(&self, idx: usize) -> f64 {
        let mut k = idx;
        for w in &self.weights {
            if k < w.len() {
                return w[k];
            }
            k -= w.len();
        }
        for b in &self.biases {
            if k < b.len() {
                return b[k];
            }
            k -= b.len();
        }
        panic!("parameter index {idx} out of range");
    }

    /// Mutable counterpart of [`Self::get_param`].
    pub fn set_param(&mut self, idx: usize, value: f64) {
        let mut k = idx;
        for w in &mut self.weights {
            if k < w.len() {
                w[k] = value;
                return;
            }
            k -= w.len();
        }
        for b in &mut self.biases {
            if k < b.len() {
                b[k] = value;
                return;
            }
            k -= b.len();
        }
        panic!("parameter index {idx} out of range");
    }

    /// Reads the flat gradient entry corresponding to [`Self::get_param`].
    pub fn get_grad(grads: &Gradients, idx: usize) -> f64 {
        let mut k = idx;
        for w in &grads.weights {
            if k < w.len() {
                return w[k];
            }
            k -= w.len();
        }
        for b in &grads.biases {
            if k < b.len() {
                return b[k];
            }
            k -= b.len();
        }
        panic!("gradient index {idx} out of range");
    }
}

fn apply_activation(act: Activation, z: &[f64], batch: usize, width: usize) -> Vec<f64> {
    match act {
        Activation::Identity => z.to_vec(),
        Activation::Relu => z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
        Activation::Softmax => {
            let mut out = vec![0.0; z.len()];
            for b in 0..batch {
                let row = &z[b * width..(b + 1) * width];
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for (j, &v) in row.iter().enumerate() {
                    let e = (v - m).exp();
                    out[b * width + j] = e;
                    sum += e;
                }
                for j in 0..width {
                    out[b * width + j] /= sum;
                }
            }
            out
        }
    }
}

/// Maps the gradient w.r.t. a layer's post-activation output to the gradient
/// w.r.t. its pre-activation values.
fn activation_backward(act: Activation, preact: &[f64], post: &[f64], d_out: &[f64], batch: usize, width: usize) -> Vec<f64> {
    match act {
        Activation::Identity => d_out.to_vec(),
        Activation::Relu => preact
            .iter()
            .zip(d_out)
            .map(|(&z, &g)| if z > 0.0 { g } else { 0.0 })
            .collect(),
        Activation::Softmax => {
            // dL/dz_j = p_j (dL/dp_j − Σ_k dL/dp_k p_k), row-wise.
            let mut out = vec![0.0; d_out.len()];
            for b in 0..batch {
                let p = &post[b * width..(b + 1) * width];
                let g = &d_out[b * width..(b + 1) * width];
                let dot: f64 = p.iter().zip(g).map(|(&pi, &gi)| pi * gi).sum();
                for j in 0..width {
                    out[b * width + j] = p[j] * (g[j] - dot);
                }
            }
            out
        }
    }
}

/// Gram-Schmidt orthogonalization of a Gaussian matrix, scaled by `gain`.
/// For rows > cols the columns are orthonormal instead, so `WᵀW = gain²·I`
/// on the smaller side either way.
fn orthogonal_matrix(rows: usize, cols: usize, gain: f64, rng: &mut impl Rng) -> Vec<f64> {
    let (n, m) = (rows.max(cols), rows.min(cols));
    // Draw an n×m Gaussian and orthonormalize its m columns.
    let mut a = vec![0.0; n * m];
    for v in &mut a {
        // Box-Muller keeps us independent of distribution crates here.
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        *v = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    }
    for c in 0..m {
        for prev in 0..c {
            let mut dot = 0.0;
            for r in 0..n {
                dot += a[r * m + c] * a[r * m + prev];
            }
            for r in 0..n {
                a[r * m + c] -= dot * a[r * m + prev];
            }
        }
        let norm = (0..n).map(|r| a[r * m + c] * a[r * m + c]).sum::<f64>().sqrt();
        assert!(norm > 1e-12, "degenerate draw during orthogonal init");
        for r in 0..n {
            a[r * m + c] /= norm;
        }
    }
    // Lay the factor out as [rows × cols], transposing if we orthonormalized
    // the other side.
    let mut w = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let v = if rows >= cols { a[r * m + c] } else { a[c * m + r] };
            w[r * cols + c] = gain * v;
        }
    }
    w
}

/// First/second Adam moments for one [`DenseNetwork`], plus the step counter
/// and learning-rate schedule. The effective learning rate after `k` steps
/// is `learning_rate × decay^k`.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m_weights: Vec<Vec<f64>>,
    pub v_weights: Vec<Vec<f64>>,
    pub m_biases: Vec<Vec<f64>>,
    pub v_biases: Vec<Vec<f64>>,
    pub step: u64,
    pub learning_rate: f64,
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh optimizer state for `net` with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(net: &DenseNetwork, learning_rate: f64, decay: f64) -> Self {
        assert!(learning_rate > 0.0, "learning rate must be positive");
        assert!(decay > 0.0 && decay <= 1.0, "decay must lie in (0, 1]");
        AdamState {
            m_weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            step: 0,
            learning_rate,
            decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// Current effective learning rate (`learning_rate × decay^step`).
    pub fn effective_lr(&self) -> f64 {
        self.learning_rate * self.decay.powi(self.step as i32)
    }
}

/// Applies one Adam update to `net` in place and advances `state`.
///
/// Panics on non-finite gradients — a numeric error upstream should fail
/// loudly rather than corrupt the parameters.
pub fn adam_step(net: &mut DenseNetwork, grads: &Gradients, state: &mut AdamState) {
    assert_eq!(net.weights.len(), grads.weights.len(), "gradient layer count mismatch");
    let lr = state.effective_lr();
    let t = (state.step + 1) as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        assert_eq!(p.len(), g.len(), "gradient shape mismatch");
        for i in 0..p.len() {
            assert!(g[i].is_finite(), "non-finite gradient entry {}", g[i]);
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    };
    for l in 0..net.weights.len() {
        update(&mut net.weights[l], &grads.weights[l], &mut state.m_weights[l], &mut state.v_weights[l]);
        update(&mut net.biases[l], &grads.biases[l], &mut state.m_biases[l], &mut state.v_biases[l]);
    }
    state.step += 1;
}

/// Squared TD loss `(target − prediction)²` and its gradient w.r.t. the
/// prediction; the target is treated as a constant.
pub fn td_loss(prediction: f64, target: f64) -> (f64, f64) {
    let delta = target - prediction;
    (delta * delta, -2.0 * delta)
}

/// Index of the largest value; ties break to the lowest index.
///
/// Panics on an empty slice.
pub fn argmax(values: &[f64]) -> usize {
    assert!(!values.is_empty(), "argmax of an empty slice");
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// Clipped-surrogate policy loss
/// `−min(ratio·A, clip(ratio, 1−ε, 1+ε)·A)` and its gradient w.r.t. the
/// ratio. On the clipped, inactive branch the gradient is exactly zero.
///
/// Panics on a nonpositive ratio: probabilities are positive, so a
/// nonpositive ratio means something upstream already went numerically
/// wrong.
pub fn ppo_loss(ratio: f64, advantage: f64, clip: f64) -> (f64, f64) {
    assert!(ratio > 0.0, "PPO ratio must be positive, got {ratio}");
    assert!(clip > 0.0, "clip range must be positive");
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if unclipped <= clipped {
        (-unclipped, -advantage)
    } else {
        // The clipped branch is only selected when the ratio sits strictly
        // outside the clip interval, where d(clip(ratio))/d(ratio) = 0.
        (-clipped, 0.0)
    }
}

/// Outcome of comparing analytic gradients against central finite
/// differences, parameter by parameter.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest relative error over all parameters.
    pub max_relative_error: f64,
    /// True iff `max_relative_error < tolerance`.
    pub pass: bool,
}

/// Central finite-difference gradient of `loss_fn` w.r.t. every parameter.
///
/// `loss_fn` maps the network output batch to a scalar loss and must be
/// deterministic.
pub fn finite_difference_grads(
    net: &DenseNetwork,
    input: &[f64],
    batch: usize,
    loss_fn: &dyn Fn(&[f64]) -> f64,
    step: f64,
) -> Vec<f64> {
    let mut probe = net.clone();
    let n = net.num_params();
    let mut out = vec![0.0; n];
    for idx in 0..n {
        let orig = probe.get_param(idx);
        probe.set_param(idx, orig + step);
        let (y_plus, _) = probe.forward(input, batch);
        probe.set_param(idx, orig - step);
        let (y_minus, _) = probe.forward(input, batch);
        probe.set_param(idx, orig);
        out[idx] = (loss_fn(&y_plus) - loss_fn(&y_minus)) / (2.0 * step);
    }
    out
}

/// Verifies `backward` against central finite differences for a scalar loss.
///
/// `loss_grad` must return the gradient of the same loss w.r.t. the output
/// batch (this is what the analytic path backpropagates).
pub fn grad_check(
    net: &DenseNetwork,
    input: &[f64],
    batch: usize,
    loss_fn: &dyn Fn(&[f64]) -> f64,
    loss_grad: &dyn Fn(&[f64]) -> Vec<f64>,
    step: f64,
    tolerance: f64,
) -> GradCheckReport {
    let (output, cache) = net.forward(input, batch);
    let analytic = net.backward(&cache, &loss_grad(&output));
    let numeric = finite_difference_grads(net, input, batch, loss_fn, step);
    let mut max_rel = 0.0;
    for idx in 0..net.num_params() {
        let a = DenseNetwork::get_grad(&analytic, idx);
        let n = numeric[idx];
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1.0);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    GradCheckReport { max_relative_error: max_rel, pass: max_rel < tolerance }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        stream_rng(seed, Stream::Custom(999))
    }

    #[test]
    fn argmax_breaks_ties_to_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[-1.0]), 0);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn forward_identity_single_layer_passes_input_through() {
        let mut net = DenseNetwork::zeros(&[2, 2], Activation::Identity);
        net.weights[0] = vec![1.0, 0.0, 0.0, 1.0];
        let (y, _) = net.forward(&[1.0, 2.0], 1);
        assert_eq!(y, vec![1.0, 2.0]);
    }

    #[test]
    fn forward_zero_weights_returns_bias() {
        let mut net = DenseNetwork::zeros(&[2, 1], Activation::Identity);
        net.biases[0] = vec![3.0];
        let (y, _) = net.forward(&[5.0, -7.0, 0.5, 0.5], 2);
        assert_eq!(y, vec![3.0, 3.0]);
    }

    #[test]
    fn forward_matches_hand_rolled_matrix_oracle() {
        // 2-3-1 net evaluated against explicit matrix arithmetic.
        let mut r = rng(11);
        let net = DenseNetwork::init_uniform_fanin(&[2, 3, 1], Activation::Identity, &mut r);
        let x = [0.3, -1.2];
        // Hidden layer by hand.
        let mut h = [0.0; 3];
        for j in 0..3 {
            let z = net.weights[0][j * 2] * x[0] + net.weights[0][j * 2 + 1] * x[1] + net.biases[0][j];
            h[j] = z.max(0.0);
        }
        let mut y = net.biases[1][0];
        for j in 0..3 {
            y += net.weights[1][j] * h[j];
        }
        let (out, _) = net.forward(&x, 1);
        assert!((out[0] - y).abs() < 1e-12, "forward {} vs oracle {}", out[0], y);
    }

    #[test]
    fn softmax_rows_are_normalized() {
        let mut r = rng(12);
        let net = DenseNetwork::init_uniform_fanin(&[4, 8, 3], Activation::Softmax, &mut r);
        let x: Vec<f64> = (0..20).map(|i| (i as f64) * 0.37 - 3.0).collect();
        let (y, _) = net.forward(&x, 5);
        for b in 0..5 {
            let row = &y[b * 3..(b + 1) * 3];
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "row {b} sums to {sum}");
            assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    #[should_panic(expected = "input length")]
    fn forward_rejects_wrong_input_width() {
        let net = DenseNetwork::zeros(&[3, 1], Activation::Identity);
        let _ = net.forward(&[1.0, 2.0], 1);
    }

    #[test]
    fn backward_single_weight_chain_rule() {
        // y = w·x with w = 4, x = 2: dL/dw = dL/dy · x = 1 · 2.
        let mut net = DenseNetwork::zeros(&[1, 1], Activation::Identity);
        net.weights[0] = vec![4.0];
        let (_, cache) = net.forward(&[2.0], 1);
        let g = net.backward(&cache, &[1.0]);
        assert_eq!(g.weights[0][0], 2.0);
        assert_eq!(g.biases[0][0], 1.0);
        assert_eq!(g.input[0], 4.0);
    }

    #[test]
    fn backward_through_dead_relu_is_zero() {
        // Negative pre-activation zeroes the downstream weight gradient.
        let mut net = DenseNetwork::zeros(&[1, 1, 1], Activation::Identity);
        net.weights[0] = vec![1.0];
        net.biases[0] = vec![-5.0]; // pre-activation = x − 5 < 0 for x = 1
        net.weights[1] = vec![3.0];
        let (_, cache) = net.forward(&[1.0], 1);
        let g = net.backward(&cache, &[1.0]);
        assert_eq!(g.weights[0][0], 0.0, "gradient into a zeroed activation");
        assert_eq!(g.weights[1][0], 0.0, "upstream weight sees a zero input");
        assert_eq!(g.input[0], 0.0);
    }

    #[test]
    fn backward_matches_finite_differences_on_random_net() {
        let mut r = rng(13);
        let net = DenseNetwork::init_uniform_fanin(&[3, 5, 4, 2], Activation::Identity, &mut r);
        let x: Vec<f64> = (0..9).map(|i| ((i * 7 % 5) as f64) * 0.21 - 0.4).collect();
        // Loss: sum of squares of outputs (deterministic, smooth).
        let loss = |y: &[f64]| y.iter().map(|v| v * v).sum::<f64>();
        let loss_grad = |y: &[f64]| y.iter().map(|v| 2.0 * v).collect::<Vec<_>>();
        let report = grad_check(&net, &x, 3, &loss, &loss_grad, 1e-5, 1e-4);
        assert!(report.pass, "max relative error {}", report.max_relative_error);
    }

    #[test]
    fn backward_matches_finite_differences_through_softmax() {
        let mut r = rng(14);
        let net = DenseNetwork::init_uniform_fanin(&[3, 6, 3], Activation::Softmax, &mut r);
        let x = [0.1, -0.2, 0.9, 1.1, 0.0, -0.7];
        // Cross-entropy-flavoured loss against a fixed pseudo-label row.
        let loss = |y: &[f64]| -(y[0].ln() + y[5].ln());
        let loss_grad = |y: &[f64]| {
            let mut g = vec![0.0; y.len()];
            g[0] = -1.0 / y[0];
            g[5] = -1.0 / y[5];
            g
        };
        let report = grad_check(&net, &x, 2, &loss, &loss_grad, 1e-6, 1e-4);
        assert!(report.pass, "max relative error {}", report.max_relative_error);
    }

    #[test]
    fn grad_check_detects_corrupted_gradient() {
        let mut r = rng(15);
        let net = DenseNetwork::init_uniform_fanin(&[2, 4, 1], Activation::Identity, &mut r);
        let x = [0.4, -0.6];
        let loss = |y: &[f64]| y[0] * y[0];
        let (output, cache) = net.forward(&x, 1);
        let mut analytic = net.backward(&cache, &[2.0 * output[0]]);
        analytic.weights[0][0] += 0.1; // injected error
        let numeric = finite_difference_grads(&net, &x, 1, &loss, 1e-5);
        let idx = 0;
        let a = DenseNetwork::get_grad(&analytic, idx);
        let n = numeric[idx];
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1.0);
        assert!(rel > 1e-4, "corruption must be visible, rel err {rel}");
    }

    #[test]
    fn adam_zero_gradient_leaves_params_unchanged() {
        let mut r = rng(16);
        let mut net = DenseNetwork::init_uniform_fanin(&[2, 3, 1], Activation::Identity, &mut r);
        let before = net.clone();
        let mut st = AdamState::new(&net, 0.1, 1.0);
        let grads = Gradients::zeros_like(&net, 1);
        adam_step(&mut net, &grads, &mut st);
        assert_eq!(st.step, 1);
        for l in 0..net.weights.len() {
            assert_eq!(net.weights[l], before.weights[l]);
            assert_eq!(net.biases[l], before.biases[l]);
        }
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        // Bias-corrected first step with g = 1 moves the parameter by
        // almost exactly lr: m̂ = 1, v̂ = 1 → Δ = lr / (1 + ε).
        let mut net = DenseNetwork::zeros(&[1, 1], Activation::Identity);
        net.weights[0] = vec![0.5];
        let mut st = AdamState::new(&net, 0.1, 1.0);
        let mut grads = Gradients::zeros_like(&net, 1);
        grads.weights[0][0] = 1.0;
        adam_step(&mut net, &grads, &mut st);
        let delta = 0.5 - net.weights[0][0];
        assert!((delta - 0.1).abs() < 1e-8, "first Adam step moved by {delta}");
    }

    #[test]
    fn adam_is_deterministic() {
        let mut r = rng(17);
        let net0 = DenseNetwork::init_uniform_fanin(&[2, 3, 1], Activation::Identity, &mut r);
        let mut grads = Gradients::zeros_like(&net0, 1);
        for (l, w) in grads.weights.iter_mut().enumerate() {
            for (i, g) in w.iter_mut().enumerate() {
                *g = ((l + 1) * (i + 2)) as f64 * 0.01;
            }
        }
        let mut a = net0.clone();
        let mut b = net0.clone();
        let mut sa = AdamState::new(&a, 0.05, 0.999);
        let mut sb = AdamState::new(&b, 0.05, 0.999);
        for _ in 0..3 {
            adam_step(&mut a, &grads, &mut sa);
            adam_step(&mut b, &grads, &mut sb);
        }
        assert_eq!(a.weights, b.weights);
        assert_eq!(sa.step, sb.step);
    }

    #[test]
    fn adam_learning_rate_decays_multiplicatively() {
        let net = DenseNetwork::zeros(&[1, 1], Activation::Identity);
        let mut st = AdamState::new(&net, 0.2, 0.9);
        assert!((st.effective_lr() - 0.2).abs() < 1e-15);
        st.step = 3;
        assert!((st.effective_lr() - 0.2 * 0.9f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn td_loss_values_and_gradients() {
        assert_eq!(td_loss(1.0, 1.0), (0.0, 0.0));
        assert_eq!(td_loss(1.0, 3.0), (4.0, -4.0));
        assert_eq!(td_loss(3.0, 1.0), (4.0, 4.0));
    }

    #[test]
    fn td_loss_nonnegative_and_zero_only_at_match() {
        for i in -10..10 {
            for j in -10..10 {
                let (p, t) = (i as f64 * 0.3, j as f64 * 0.7);
                let (l, _) = td_loss(p, t);
                assert!(l >= 0.0);
                assert_eq!(l == 0.0, p == t);
            }
        }
    }

    #[test]
    fn ppo_loss_tabulated_cases() {
        let (l, g) = ppo_loss(1.0, 2.0, 0.2);
        assert_eq!(l, -2.0);
        assert_eq!(g, -2.0);
        let (l, g) = ppo_loss(2.0, 1.0, 0.2);
        assert!((l + 1.2).abs() < 1e-15, "clipped branch, loss {l}");
        assert_eq!(g, 0.0, "clipped branch gradient must vanish");
        let (l, g) = ppo_loss(0.5, -1.0, 0.2);
        assert!((l - 0.8).abs() < 1e-15, "min selects the clipped term, loss {l}");
        assert_eq!(g, 0.0);
    }

    #[test]
    fn ppo_loss_is_pessimistic() {
        // loss ≥ −ratio·advantage everywhere: min can only lower the
        // surrogate objective, never raise it.
        let mut r = rng(18);
        for _ in 0..1000 {
            let ratio = rand::Rng::gen_range(&mut r, 0.01..3.0);
            let adv = rand::Rng::gen_range(&mut r, -2.0..2.0);
            let (l, _) = ppo_loss(ratio, adv, 0.2);
            assert!(l >= -ratio * adv - 1e-12);
        }
    }

    #[test]
    #[should_panic(expected = "PPO ratio must be positive")]
    fn ppo_loss_rejects_nonpositive_ratio() {
        let _ = ppo_loss(0.0, 1.0, 0.2);
    }

    #[test]
    fn grad_check_linear_net_quadratic_loss_is_exact() {
        let mut net = DenseNetwork::zeros(&[2, 1], Activation::Identity);
        net.weights[0] = vec![0.7, -0.3];
        net.biases[0] = vec![0.2];
        let x = [1.0, 2.0, -0.5, 0.25];
        let loss = |y: &[f64]| y.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>();
        let loss_grad = |y: &[f64]| y.iter().map(|v| 2.0 * (v - 1.0)).collect::<Vec<_>>();
        let report = grad_check(&net, &x, 2, &loss, &loss_grad, 1e-5, 1e-6);
        assert!(report.pass, "quadratic case should be exact, err {}", report.max_relative_error);
    }

    #[test]
    fn orthogonal_init_columns_are_orthonormal() {
        let mut r = rng(19);
        let net = DenseNetwork::init_orthogonal(&[4, 6, 2], Activation::Identity, 0.01, &mut r);
        // Hidden layer is 6×4 with gain √2: WᵀW should be 2·I (4×4).
        let w = &net.weights[0];
        for c1 in 0..4 {
            for c2 in 0..4 {
                let mut dot = 0.0;
                for row in 0..6 {
                    dot += w[row * 4 + c1] * w[row * 4 + c2];
                }
                let expect = if c1 == c2 { 2.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10, "WᵀW[{c1}][{c2}] = {dot}");
            }
        }
        // Output layer biases start at zero, weights scaled by 0.01.
        assert!(net.biases[1].iter().all(|&b| b == 0.0));
        let norm: f64 = net.weights[1].iter().map(|v| v * v).sum::<f64>();
        assert!(norm < 0.01, "policy head should start near zero, |W|² = {norm}");
    }

    #[test]
    fn determinism_identical_inputs_identical_outputs() {
        let mut r = rng(20);
        let net = DenseNetwork::init_uniform_fanin(&[3, 8, 2], Activation::Identity, &mut r);
        let x = [0.2, -0.1, 0.5];
        let (y1, c1) = net.forward(&x, 1);
        let (y2, c2) = net.forward(&x, 1);
        assert_eq!(y1, y2);
        let g1 = net.backward(&c1, &[1.0, -1.0]);
        let g2 = net.backward(&c2, &[1.0, -1.0]);
        assert_eq!(g1.weights, g2.weights);
        assert_eq!(g1.input, g2.input);
    }
}
