use super::matrix::{affine_forward, gemm, Matrix, View};
use crate::{Error, Result};

/// Anything whose trainable state can be viewed as a list of flat slices.
///
/// Two values with the same shape must return segments of equal lengths in
/// the same order; optimizers and gradient accumulators rely on that.
pub trait Params {
    fn segments(&self) -> Vec<&[f64]>;
    fn segments_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.segments().iter().map(|s| s.len()).sum()
    }

    fn shape_signature(&self) -> Vec<usize> {
        self.segments().iter().map(|s| s.len()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, v: &mut [f64]) {
        if self == Activation::Tanh {
            for x in v {
                *x = x.tanh();
            }
        }
    }

    /// Multiplies `grad` by the activation derivative, given the post-activation output.
    fn backprop(self, out: &[f64], grad: &mut [f64]) {
        if self == Activation::Tanh {
            for (g, y) in grad.iter_mut().zip(out) {
                *g *= 1.0 - y * y;
            }
        }
    }
}

/// Fully connected layer; `w` is `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            w: Matrix::zeros(output, input),
            b: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        affine_forward(x, &self.w, &self.b)
    }

    /// Batched forward: rows of `x` are samples.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim("Dense::forward_batch", self.input_dim(), x.cols()));
        }
        let mut y = Matrix::zeros(x.rows(), self.output_dim());
        for r in 0..x.rows() {
            y.row_mut(r).copy_from_slice(&self.b);
        }
        gemm(1.0, View::of(x), View::of(&self.w).t(), 1.0, &mut y);
        Ok(y)
    }

    /// Accumulates parameter gradients for a batch into `grad` and returns
    /// the gradient with respect to the batch input.
    pub fn backward_batch(&self, x: &Matrix, upstream: &Matrix, grad: &mut Dense) -> Matrix {
        // dW += upstreamᵀ · x
        gemm(1.0, View::of(upstream).t(), View::of(x), 1.0, &mut grad.w);
        for r in 0..upstream.rows() {
            for (gb, u) in grad.b.iter_mut().zip(upstream.row(r)) {
                *gb += u;
            }
        }
        let mut dx = Matrix::zeros(x.rows(), self.input_dim());
        gemm(1.0, View::of(upstream), View::of(&self.w), 0.0, &mut dx);
        dx
    }
}

impl Params for Dense {
    fn segments(&self) -> Vec<&[f64]> {
        vec![self.w.as_slice(), &self.b]
    }

    fn segments_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.as_mut_slice(), &mut self.b]
    }
}

/// Stack of dense layers, each followed by its own activation.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    layers: Vec<Dense>,
    activations: Vec<Activation>,
}

/// Gradients shaped like an [`MlpParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Dense>,
}

impl MlpGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| Dense::zeros(l.input_dim(), l.output_dim()))
                .collect(),
        }
    }
}

impl Params for MlpGrads {
    fn segments(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.segments()).collect()
    }

    fn segments_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.segments_mut()).collect()
    }
}

/// Post-activation outputs of every layer for one batch; `acts[0]` is the input.
#[derive(Clone, Debug)]
pub struct BatchTrace {
    pub acts: Vec<Matrix>,
}

impl BatchTrace {
    pub fn output(&self) -> &Matrix {
        self.acts.last().expect("trace always holds the input")
    }
}

impl MlpParams {
    pub fn new(layers: Vec<Dense>, activations: Vec<Activation>) -> Result<Self> {
        if layers.len() != activations.len() {
            return Err(Error::dim("MlpParams activations", layers.len(), activations.len()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::dim(
                    "MlpParams layer chain",
                    pair[0].output_dim(),
                    pair[1].input_dim(),
                ));
            }
        }
        for l in &layers {
            if l.b.len() != l.output_dim() {
                return Err(Error::dim("MlpParams bias", l.output_dim(), l.b.len()));
            }
        }
        Ok(Self { layers, activations })
    }

    /// Zero-initialized stack with the given widths and a single activation kind.
    pub fn zeros(widths: &[usize], activation: Activation) -> Self {
        let layers: Vec<Dense> = widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        let activations = vec![activation; layers.len()];
        Self { layers, activations }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, Dense::input_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Dense::output_dim)
    }

    /// Single-sample forward returning every layer's post-activation output
    /// (input first).
    pub fn forward_trace(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.input_dim() {
            return Err(Error::dim("MlpParams::forward input", self.input_dim(), x.len()));
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (i, (layer, act)) in self.layers.iter().zip(&self.activations).enumerate() {
            let mut y = layer.forward(acts.last().expect("non-empty"))?;
            act.apply(&mut y);
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("MLP layer {i} output")));
            }
            acts.push(y);
        }
        Ok(acts)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.pop().expect("non-empty"))
    }

    /// Forward pass plus exact reverse-mode gradients of `⟨upstream, output⟩`.
    pub fn forward_backward(&self, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, MlpGrads, Vec<f64>)> {
        let xb = Matrix::from_vec(1, x.len(), x.to_vec())?;
        let trace = self.forward_batch(&xb)?;
        if upstream.len() != self.output_dim() {
            return Err(Error::dim("mlp_forward_backward upstream", self.output_dim(), upstream.len()));
        }
        let ub = Matrix::from_vec(1, upstream.len(), upstream.to_vec())?;
        let mut grads = MlpGrads::zeros_like(self);
        let dx = self.backward_batch(&trace, &ub, &mut grads)?;
        Ok((trace.output().row(0).to_vec(), grads, dx.into_vec()))
    }

    pub fn forward_batch(&self, x: &Matrix) -> Result<BatchTrace> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim("MlpParams::forward_batch input", self.input_dim(), x.cols()));
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for (i, (layer, act)) in self.layers.iter().zip(&self.activations).enumerate() {
            let mut y = layer.forward_batch(acts.last().expect("non-empty"))?;
            act.apply(y.as_mut_slice());
            if !y.is_finite() {
                return Err(Error::NonFinite(format!("MLP layer {i} output")));
            }
            acts.push(y);
        }
        Ok(BatchTrace { acts })
    }

    /// Accumulates (sums over the batch) into `grads`; returns the input gradient.
    pub fn backward_batch(&self, trace: &BatchTrace, upstream: &Matrix, grads: &mut MlpGrads) -> Result<Matrix> {
        if upstream.cols() != self.output_dim() || upstream.rows() != trace.output().rows() {
            return Err(Error::dim("MlpParams::backward_batch upstream", self.output_dim(), upstream.cols()));
        }
        let mut delta = upstream.clone();
        for i in (0..self.layers.len()).rev() {
            self.activations[i].backprop(trace.acts[i + 1].as_slice(), delta.as_mut_slice());
            delta = self.layers[i].backward_batch(&trace.acts[i], &delta, &mut grads.layers[i]);
            if !delta.is_finite() {
                return Err(Error::NonFinite(format!("MLP layer {i} gradient")));
            }
        }
        Ok(delta)
    }
}

impl Params for MlpParams {
    fn segments(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.segments()).collect()
    }

    fn segments_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.segments_mut()).collect()
    }
}

/// Free-function form of [`MlpParams::forward_backward`].
pub fn mlp_forward_backward(
    params: &MlpParams,
    x: &[f64],
    upstream: &[f64],
) -> Result<(Vec<f64>, MlpGrads, Vec<f64>)> {
    params.forward_backward(x, upstream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_mlp(rng: &mut crate::Rng64, widths: &[usize]) -> MlpParams {
        let mut p = MlpParams::zeros(widths, Activation::Tanh);
        for seg in p.segments_mut() {
            for v in seg {
                *v = rng.random_range(-0.8..0.8);
            }
        }
        p
    }

    #[test]
    fn linear_layer_grad_is_input() {
        let mut p = MlpParams::zeros(&[3, 2], Activation::Identity);
        p.layers_mut()[0].w = Matrix::from_vec(2, 3, vec![0.5, -1.0, 2.0, 0.1, 0.2, 0.3]).unwrap();
        let x = [1.5, -2.0, 0.25];
        let (_, g, _) = p.forward_backward(&x, &[1.0, 0.0]).unwrap();
        assert_eq!(g.layers[0].w.row(0), &x);
        assert_eq!(g.layers[0].w.row(1), &[0.0, 0.0, 0.0]);
        assert_eq!(g.layers[0].b, vec![1.0, 0.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = crate::Rng64::seed_from_u64(3);
        let p = random_mlp(&mut rng, &[4, 6, 3]);
        let (_, g, dx) = p.forward_backward(&[0.1, 0.2, -0.3, 0.4], &[0.0; 3]).unwrap();
        assert!(g.segments().iter().all(|s| s.iter().all(|v| *v == 0.0)));
        assert!(dx.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn batch_and_single_forward_agree() {
        let mut rng = crate::Rng64::seed_from_u64(9);
        let p = random_mlp(&mut rng, &[5, 7, 4]);
        let rows: Vec<Vec<f64>> = (0..3).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let batch = p.forward_batch(&Matrix::from_rows(&rows).unwrap()).unwrap();
        for (i, r) in rows.iter().enumerate() {
            let single = p.forward(r).unwrap();
            for (a, b) in single.iter().zip(batch.output().row(i)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_finite_names_layer() {
        let mut p = MlpParams::zeros(&[2, 2, 1], Activation::Identity);
        p.layers_mut()[1].b[0] = f64::NAN;
        let err = p.forward(&[1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("layer 1"), "{err}");
    }

    #[test]
    fn rejects_broken_chain() {
        let err = MlpParams::new(
            vec![Dense::zeros(3, 4), Dense::zeros(5, 2)],
            vec![Activation::Tanh, Activation::Identity],
        );
        assert!(err.is_err());
    }
}
