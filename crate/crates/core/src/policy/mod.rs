//! Policy/value networks whose every forward pass exposes the action
//! distribution, the value estimate and the last hidden layer's activations.
//!
//! The trunk is a tanh MLP; the action head (categorical logits or Gaussian
//! mean with a free per-dimension log-std) and the scalar value head both read
//! the trunk's final hidden layer, which is the vector exported as the latent.

mod checkpoint;

use rand::Rng;

use crate::numkit::{
    argmax, categorical_entropy, gaussian_logprob_entropy, sample_categorical, sample_gaussian,
    softmax, Activation, BatchTrace, Dense, Matrix, MlpGrads, MlpParams, Params,
};
use crate::{Error, Result};

pub use checkpoint::CHECKPOINT_MAGIC;
pub(crate) use checkpoint::hex;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadKind {
    /// Discrete actions with this many logits.
    Categorical(usize),
    /// Continuous actions of this dimension.
    Gaussian(usize),
}

impl HeadKind {
    pub fn action_dim(self) -> usize {
        match self {
            HeadKind::Categorical(n) | HeadKind::Gaussian(n) => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicySpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub head: HeadKind,
    pub init_log_std: f64,
    /// Gain of the action head at initialization; small values give near-uniform
    /// (or near-zero-mean) initial policies.
    pub action_gain: f64,
}

impl PolicySpec {
    pub fn new(input_dim: usize, hidden: usize, head: HeadKind) -> Self {
        Self {
            input_dim,
            hidden: vec![hidden, hidden],
            head,
            init_log_std: -0.5,
            action_gain: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ActionHead {
    Categorical { logits: Dense },
    Gaussian { mean: Dense, log_std: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    pub fn discrete(&self) -> usize {
        match self {
            Action::Discrete(a) => *a,
            Action::Continuous(_) => panic!("expected a discrete action"),
        }
    }

    pub fn continuous(&self) -> &[f64] {
        match self {
            Action::Continuous(a) => a,
            Action::Discrete(_) => panic!("expected a continuous action"),
        }
    }
}

/// Distribution over actions produced by one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub enum ActionDist {
    Categorical(Vec<f64>),
    Gaussian { mean: Vec<f64>, log_std: Vec<f64> },
}

impl ActionDist {
    pub fn logp(&self, action: &Action) -> f64 {
        match (self, action) {
            (ActionDist::Categorical(p), Action::Discrete(a)) => p[*a].ln(),
            (ActionDist::Gaussian { mean, log_std }, Action::Continuous(a)) => {
                gaussian_logprob_entropy(mean, log_std, a).0
            }
            _ => panic!("action kind does not match distribution"),
        }
    }

    pub fn entropy(&self) -> f64 {
        match self {
            ActionDist::Categorical(p) => categorical_entropy(p),
            ActionDist::Gaussian { mean, log_std } => gaussian_logprob_entropy(mean, log_std, mean).1,
        }
    }

    /// The vector a white-box observer sees: probabilities, or the Gaussian mean.
    pub fn summary(&self) -> &[f64] {
        match self {
            ActionDist::Categorical(p) => p,
            ActionDist::Gaussian { mean, .. } => mean,
        }
    }

    pub fn mode(&self) -> Action {
        match self {
            ActionDist::Categorical(p) => Action::Discrete(argmax(p)),
            ActionDist::Gaussian { mean, .. } => Action::Continuous(mean.clone()),
        }
    }
}

/// Deterministic part of a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub dist: ActionDist,
    pub value: f64,
    pub latents: Vec<f64>,
    /// Raw head output: logits or Gaussian mean.
    pub head_out: Vec<f64>,
}

/// Everything one stochastic forward pass produces.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardRecord {
    pub dist: ActionDist,
    pub value: f64,
    pub latents: Vec<f64>,
    pub action: Action,
    pub logp: f64,
    pub entropy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNet {
    trunk: MlpParams,
    head: ActionHead,
    value: Dense,
}

/// Gradients shaped like a [`PolicyNet`].
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyGrads {
    pub trunk: MlpGrads,
    pub head: Dense,
    pub value: Dense,
    pub log_std: Vec<f64>,
}

/// Batched forward state kept for the backward pass.
#[derive(Clone, Debug)]
pub struct BatchEval {
    pub trace: BatchTrace,
    /// Logits or Gaussian means, one row per sample.
    pub head_out: Matrix,
    pub values: Vec<f64>,
}

impl PolicyNet {
    pub fn new<R: Rng + ?Sized>(spec: &PolicySpec, rng: &mut R) -> Result<Self> {
        if spec.hidden.is_empty() || spec.input_dim == 0 || spec.head.action_dim() == 0 {
            return Err(Error::InvalidArgument(
                "policy needs an input, at least one hidden layer and a non-empty action space".into(),
            ));
        }
        let mut widths = vec![spec.input_dim];
        widths.extend(&spec.hidden);
        let layers: Vec<Dense> = widths
            .windows(2)
            .map(|w| Dense {
                w: orthogonal(w[1], w[0], std::f64::consts::SQRT_2, rng),
                b: vec![0.0; w[1]],
            })
            .collect();
        let n = layers.len();
        let trunk = MlpParams::new(layers, vec![Activation::Tanh; n])?;
        let h = *spec.hidden.last().expect("checked non-empty");
        let a = spec.head.action_dim();
        let head_layer = Dense {
            w: orthogonal(a, h, spec.action_gain, rng),
            b: vec![0.0; a],
        };
        let head = match spec.head {
            HeadKind::Categorical(_) => ActionHead::Categorical { logits: head_layer },
            HeadKind::Gaussian(_) => ActionHead::Gaussian {
                mean: head_layer,
                log_std: vec![spec.init_log_std; a],
            },
        };
        let value = Dense {
            w: orthogonal(1, h, 1.0, rng),
            b: vec![0.0],
        };
        Ok(Self { trunk, head, value })
    }

    pub fn from_parts(trunk: MlpParams, head: ActionHead, value: Dense) -> Result<Self> {
        let h = trunk.output_dim();
        let head_layer = match &head {
            ActionHead::Categorical { logits } => logits,
            ActionHead::Gaussian { mean, log_std } => {
                if log_std.len() != mean.output_dim() {
                    return Err(Error::dim("PolicyNet log_std", mean.output_dim(), log_std.len()));
                }
                mean
            }
        };
        if head_layer.input_dim() != h {
            return Err(Error::dim("PolicyNet action head input", h, head_layer.input_dim()));
        }
        if value.input_dim() != h || value.output_dim() != 1 {
            return Err(Error::dim("PolicyNet value head input", h, value.input_dim()));
        }
        if trunk.activations().iter().any(|a| *a != Activation::Tanh) {
            return Err(Error::InvalidArgument("policy trunk layers must be tanh".into()));
        }
        Ok(Self { trunk, head, value })
    }

    pub fn trunk(&self) -> &MlpParams {
        &self.trunk
    }

    pub fn head(&self) -> &ActionHead {
        &self.head
    }

    pub fn value_head(&self) -> &Dense {
        &self.value
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    /// Width of the exported latent (the last hidden layer).
    pub fn latent_dim(&self) -> usize {
        self.trunk.output_dim()
    }

    /// Index of the hidden layer exported as the latent; always the last one.
    pub fn latent_layer_index(&self) -> usize {
        self.trunk.layers().len() - 1
    }

    pub fn head_kind(&self) -> HeadKind {
        match &self.head {
            ActionHead::Categorical { logits } => HeadKind::Categorical(logits.output_dim()),
            ActionHead::Gaussian { mean, .. } => HeadKind::Gaussian(mean.output_dim()),
        }
    }

    pub fn action_dim(&self) -> usize {
        self.head_kind().action_dim()
    }

    fn head_layer(&self) -> &Dense {
        match &self.head {
            ActionHead::Categorical { logits } => logits,
            ActionHead::Gaussian { mean, .. } => mean,
        }
    }

    fn head_layer_mut(&mut self) -> &mut Dense {
        match &mut self.head {
            ActionHead::Categorical { logits } => logits,
            ActionHead::Gaussian { mean, .. } => mean,
        }
    }

    pub fn log_std(&self) -> Option<&[f64]> {
        match &self.head {
            ActionHead::Gaussian { log_std, .. } => Some(log_std),
            ActionHead::Categorical { .. } => None,
        }
    }

    pub fn log_std_mut(&mut self) -> Option<&mut Vec<f64>> {
        match &mut self.head {
            ActionHead::Gaussian { log_std, .. } => Some(log_std),
            ActionHead::Categorical { .. } => None,
        }
    }

    /// Zeroes the action and value heads (weights and biases).
    pub fn zero_output_heads(&mut self) {
        let head = self.head_layer_mut();
        for s in head.segments_mut() {
            s.fill(0.0);
        }
        for s in self.value.segments_mut() {
            s.fill(0.0);
        }
    }

    fn dist_from_head(&self, head_out: Vec<f64>) -> ActionDist {
        match &self.head {
            ActionHead::Categorical { .. } => ActionDist::Categorical(softmax(&head_out)),
            ActionHead::Gaussian { log_std, .. } => ActionDist::Gaussian {
                mean: head_out,
                log_std: log_std.clone(),
            },
        }
    }

    /// Forward pass without sampling.
    pub fn evaluate(&self, obs: &[f64]) -> Result<Evaluation> {
        if obs.len() != self.input_dim() {
            return Err(Error::dim("policy observation width", self.input_dim(), obs.len()));
        }
        let latents = self.trunk.forward(obs)?;
        let head_out = self.head_layer().forward(&latents)?;
        let value = self.value.forward(&latents)?[0];
        if !head_out.iter().all(|v| v.is_finite()) || !value.is_finite() {
            return Err(Error::NonFinite("policy heads".into()));
        }
        Ok(Evaluation {
            dist: self.dist_from_head(head_out.clone()),
            value,
            latents,
            head_out,
        })
    }

    /// One forward pass plus an action sampled from it.
    pub fn forward<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<ForwardRecord> {
        let eval = self.evaluate(obs)?;
        let action = match &eval.dist {
            ActionDist::Categorical(p) => Action::Discrete(sample_categorical(p, rng)),
            ActionDist::Gaussian { mean, log_std } => Action::Continuous(sample_gaussian(mean, log_std, rng)),
        };
        Ok(Self::record(eval, action))
    }

    /// Record whose action is the distribution mode.
    pub fn forward_deterministic(&self, obs: &[f64]) -> Result<ForwardRecord> {
        let eval = self.evaluate(obs)?;
        let action = eval.dist.mode();
        Ok(Self::record(eval, action))
    }

    fn record(eval: Evaluation, action: Action) -> ForwardRecord {
        let logp = eval.dist.logp(&action);
        let entropy = eval.dist.entropy();
        ForwardRecord {
            dist: eval.dist,
            value: eval.value,
            latents: eval.latents,
            action,
            logp,
            entropy,
        }
    }

    /// Argmax of categorical probabilities (lowest index wins ties) or the Gaussian mean.
    pub fn deterministic_action(&self, obs: &[f64]) -> Result<Action> {
        Ok(self.evaluate(obs)?.dist.mode())
    }

    pub fn evaluate_batch(&self, obs: &Matrix) -> Result<BatchEval> {
        if obs.cols() != self.input_dim() {
            return Err(Error::dim("policy observation width", self.input_dim(), obs.cols()));
        }
        let trace = self.trunk.forward_batch(obs)?;
        let head_out = self.head_layer().forward_batch(trace.output())?;
        let values = self.value.forward_batch(trace.output())?.into_vec();
        if !head_out.is_finite() || !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("policy heads (batch)".into()));
        }
        Ok(BatchEval {
            trace,
            head_out,
            values,
        })
    }

    /// Backpropagates per-sample gradients of the head outputs and values.
    pub fn backward_batch(
        &self,
        eval: &BatchEval,
        d_head: &Matrix,
        d_values: &[f64],
        d_log_std: &[f64],
    ) -> Result<PolicyGrads> {
        let mut grads = PolicyGrads::zeros_like(self);
        let latents = eval.trace.output();
        let mut d_latent = self.head_layer().backward_batch(latents, d_head, &mut grads.head);
        let dv = Matrix::from_vec(d_values.len(), 1, d_values.to_vec())?;
        let d_latent_v = self.value.backward_batch(latents, &dv, &mut grads.value);
        for (a, b) in d_latent.as_mut_slice().iter_mut().zip(d_latent_v.as_slice()) {
            *a += b;
        }
        self.trunk.backward_batch(&eval.trace, &d_latent, &mut grads.trunk)?;
        if !grads.log_std.is_empty() {
            if d_log_std.len() != grads.log_std.len() {
                return Err(Error::dim("policy log_std gradient", grads.log_std.len(), d_log_std.len()));
            }
            grads.log_std.copy_from_slice(d_log_std);
        }
        Ok(grads)
    }
}

impl PolicyGrads {
    pub fn zeros_like(net: &PolicyNet) -> Self {
        let h = net.head_layer();
        Self {
            trunk: MlpGrads::zeros_like(&net.trunk),
            head: Dense::zeros(h.input_dim(), h.output_dim()),
            value: Dense::zeros(net.value.input_dim(), 1),
            log_std: net.log_std().map(|l| vec![0.0; l.len()]).unwrap_or_default(),
        }
    }

    pub fn scale(&mut self, k: f64) {
        for s in self.segments_mut() {
            for v in s {
                *v *= k;
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.segments()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

impl Params for PolicyNet {
    fn segments(&self) -> Vec<&[f64]> {
        let mut s = self.trunk.segments();
        s.extend(self.head_layer().segments());
        s.extend(self.value.segments());
        if let Some(ls) = self.log_std() {
            s.push(ls);
        }
        s
    }

    fn segments_mut(&mut self) -> Vec<&mut [f64]> {
        let mut s = self.trunk.segments_mut();
        match &mut self.head {
            ActionHead::Categorical { logits } => {
                s.extend(logits.segments_mut());
                s.extend(self.value.segments_mut());
            }
            ActionHead::Gaussian { mean, log_std } => {
                s.extend(mean.segments_mut());
                s.extend(self.value.segments_mut());
                s.push(log_std);
            }
        }
        s
    }
}

impl Params for PolicyGrads {
    fn segments(&self) -> Vec<&[f64]> {
        let mut s = self.trunk.segments();
        s.extend(self.head.segments());
        s.extend(self.value.segments());
        if !self.log_std.is_empty() {
            s.push(&self.log_std);
        }
        s
    }

    fn segments_mut(&mut self) -> Vec<&mut [f64]> {
        let mut s = self.trunk.segments_mut();
        s.extend(self.head.segments_mut());
        s.extend(self.value.segments_mut());
        if !self.log_std.is_empty() {
            s.push(&mut self.log_std);
        }
        s
    }
}

/// Free-function form of [`PolicyNet::forward`].
pub fn policy_forward<R: Rng + ?Sized>(net: &PolicyNet, obs: &[f64], rng: &mut R) -> Result<ForwardRecord> {
    net.forward(obs, rng)
}

/// Orthogonal initialization via modified Gram–Schmidt on a Gaussian matrix.
pub fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Matrix {
    use rand_distr::StandardNormal;
    // Orthonormalize along the shorter side.
    let (n, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut vecs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    for i in 0..n {
        for j in 0..i {
            let (head, tail) = vecs.split_at_mut(i);
            let proj: f64 = head[j].iter().zip(&tail[0]).map(|(a, b)| a * b).sum();
            for (t, h) in tail[0].iter_mut().zip(&head[j]) {
                *t -= proj * h;
            }
        }
        let norm = vecs[i].iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for v in &mut vecs[i] {
            *v /= norm;
        }
    }
    let mut m = Matrix::zeros(rows, cols);
    for (i, v) in vecs.iter().enumerate() {
        for (j, x) in v.iter().enumerate() {
            if rows <= cols {
                m.set(i, j, gain * x);
            } else {
                m.set(j, i, gain * x);
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rng64;
    use rand::SeedableRng;

    fn net(head: HeadKind) -> PolicyNet {
        let mut rng = Rng64::seed_from_u64(11);
        PolicyNet::new(&PolicySpec::new(6, 16, head), &mut rng).unwrap()
    }

    #[test]
    fn zero_heads_give_uniform_and_zero_value() {
        let mut n = net(HeadKind::Categorical(5));
        n.zero_output_heads();
        let mut rng = Rng64::seed_from_u64(0);
        let rec = n.forward(&[0.3, -0.1, 0.9, 0.0, 0.5, -0.7], &mut rng).unwrap();
        match &rec.dist {
            ActionDist::Categorical(p) => assert!(p.iter().all(|v| (v - 0.2).abs() < 1e-15)),
            _ => unreachable!(),
        }
        assert_eq!(rec.value, 0.0);
    }

    #[test]
    fn forward_deterministic_given_seed() {
        let n = net(HeadKind::Categorical(5));
        let obs = [0.1; 6];
        let a = n.forward(&obs, &mut Rng64::seed_from_u64(5)).unwrap();
        let b = n.forward(&obs, &mut Rng64::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn record_consistency() {
        let mut rng = Rng64::seed_from_u64(1);
        for head in [HeadKind::Categorical(4), HeadKind::Gaussian(3)] {
            let n = net(head);
            let obs = [0.5, -0.2, 0.1, 0.8, -0.9, 0.3];
            let rec = n.forward(&obs, &mut rng).unwrap();
            assert_eq!(rec.logp, rec.dist.logp(&rec.action));
            assert_eq!(rec.entropy, rec.dist.entropy());
            assert_eq!(rec.latents, n.trunk().forward(&obs).unwrap());
            if let ActionDist::Categorical(p) = &rec.dist {
                let h = -p.iter().map(|v| v * v.ln()).sum::<f64>();
                assert!((rec.entropy - h).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_action_rules() {
        let mut n = net(HeadKind::Categorical(3));
        n.zero_output_heads();
        assert_eq!(n.deterministic_action(&[0.0; 6]).unwrap(), Action::Discrete(0));
        if let ActionHead::Categorical { logits } = &mut n.head {
            logits.b = vec![0.1f64.ln(), 0.7f64.ln(), 0.2f64.ln()];
        }
        assert_eq!(n.deterministic_action(&[0.0; 6]).unwrap(), Action::Discrete(1));

        let mut g = net(HeadKind::Gaussian(2));
        g.zero_output_heads();
        if let ActionHead::Gaussian { mean, .. } = &mut g.head {
            mean.b = vec![0.3, -0.2];
        }
        assert_eq!(g.deterministic_action(&[0.0; 6]).unwrap(), Action::Continuous(vec![0.3, -0.2]));
    }

    #[test]
    fn latents_ignore_heads() {
        let n = net(HeadKind::Categorical(5));
        let mut m = n.clone();
        m.zero_output_heads();
        let obs = [0.2, 0.4, -0.6, 0.8, 0.0, 0.1];
        assert_eq!(n.evaluate(&obs).unwrap().latents, m.evaluate(&obs).unwrap().latents);
    }

    #[test]
    fn width_mismatch_errors() {
        let n = net(HeadKind::Categorical(5));
        assert!(matches!(n.evaluate(&[0.0; 5]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn orthogonal_rows_are_orthonormal() {
        let mut rng = Rng64::seed_from_u64(2);
        let m = orthogonal(4, 9, 1.0, &mut rng);
        for i in 0..4 {
            for j in 0..4 {
                let d: f64 = m.row(i).iter().zip(m.row(j)).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-10);
            }
        }
    }
}
