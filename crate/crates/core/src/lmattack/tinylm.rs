//! A small frozen decoder-only transformer with a residual-stream hook.
//!
//! Pre-norm blocks (causal multi-head attention, then a GELU MLP), learned
//! absolute positions and an untied unembedding. Weights come from a seeded
//! random initialization and are never trained. Hidden state `h_0` is the
//! embedding sum and `h_i` the residual stream after block `i` (1-based);
//! the hook adds a perturbation to `h_ℓ` at the first `k_s` positions, so
//! every `h_i` with `i < ℓ` is untouched.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::numkit::{dot, sample_categorical, softmax, Matrix};
use crate::policy::hex;
use crate::{Error, Result, Rng64};

/// `a-z A-Z 0-9 _ .`, one symbol per token id.
pub const SYMBOLS: &[u8; 64] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.";

pub fn detokenize(tokens: &[usize]) -> String {
    tokens.iter().map(|&t| SYMBOLS.get(t).map_or('?', |&b| b as char)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TinyLmConfig {
    pub vocab: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub mlp_ratio: usize,
    pub context: usize,
    /// Residual stream (1-based block index) that receives the perturbation.
    pub hook_layer: usize,
    /// Standard deviation of the logits under a unit-variance final norm.
    pub logit_scale: f64,
    pub seed: u64,
}

impl Default for TinyLmConfig {
    fn default() -> Self {
        Self {
            vocab: 64,
            d_model: 32,
            n_heads: 2,
            n_layers: 4,
            mlp_ratio: 4,
            context: 32,
            hook_layer: 2,
            logit_scale: 6.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Block {
    ln1: (Vec<f64>, Vec<f64>),
    wq: Matrix,
    wk: Matrix,
    wv: Matrix,
    wo: Matrix,
    ln2: (Vec<f64>, Vec<f64>),
    w1: Matrix,
    b1: Vec<f64>,
    w2: Matrix,
    b2: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TinyLm {
    cfg: TinyLmConfig,
    tok_emb: Matrix,
    pos_emb: Matrix,
    blocks: Vec<Block>,
    ln_f: (Vec<f64>, Vec<f64>),
    unembed: Matrix,
}

fn gaussian(rows: usize, cols: usize, std: f64, rng: &mut Rng64) -> Matrix {
    let n = Normal::new(0.0, std).expect("finite std");
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| n.sample(rng)).collect()).expect("sized")
}

fn layer_norm(x: &[f64], (g, b): &(Vec<f64>, Vec<f64>)) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let inv = 1.0 / (var + 1e-5).sqrt();
    x.iter().zip(g).zip(b).map(|((v, g), b)| (v - mean) * inv * g + b).collect()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (0.797_884_560_802_865_4 * (x + 0.044715 * x * x * x)).tanh())
}

/// Per-layer key/value cache for incremental decoding.
#[derive(Clone, Debug, Default)]
pub struct KvCache {
    keys: Vec<Vec<Vec<f64>>>,
    values: Vec<Vec<Vec<f64>>>,
}

impl KvCache {
    pub fn len(&self) -> usize {
        self.keys.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An additive write into `h_ℓ` at positions `0..positions`.
#[derive(Clone, Copy, Debug)]
pub struct Hook<'a> {
    pub delta: &'a [f64],
    pub positions: usize,
}

impl TinyLm {
    pub fn new(cfg: TinyLmConfig) -> Result<Self> {
        let d = cfg.d_model;
        if d == 0 || cfg.n_heads == 0 || !d.is_multiple_of(cfg.n_heads) {
            return Err(Error::InvalidArgument(format!("d_model {d} must split into {} heads", cfg.n_heads)));
        }
        if cfg.hook_layer == 0 || cfg.hook_layer > cfg.n_layers {
            return Err(Error::InvalidArgument(format!(
                "hook layer {} outside 1..={}",
                cfg.hook_layer, cfg.n_layers
            )));
        }
        let mut rng = <Rng64 as rand::SeedableRng>::seed_from_u64(cfg.seed);
        let tok_emb = gaussian(cfg.vocab, d, 1.0, &mut rng);
        let pos_emb = gaussian(cfg.context, d, 0.5, &mut rng);
        let s = 1.0 / (d as f64).sqrt();
        let h = cfg.mlp_ratio * d;
        let blocks = (0..cfg.n_layers)
            .map(|_| Block {
                ln1: (vec![1.0; d], vec![0.0; d]),
                wq: gaussian(d, d, s, &mut rng),
                wk: gaussian(d, d, s, &mut rng),
                wv: gaussian(d, d, s, &mut rng),
                wo: gaussian(d, d, s, &mut rng),
                ln2: (vec![1.0; d], vec![0.0; d]),
                w1: gaussian(h, d, s, &mut rng),
                b1: vec![0.0; h],
                w2: gaussian(d, h, 1.0 / (h as f64).sqrt(), &mut rng),
                b2: vec![0.0; d],
            })
            .collect();
        let unembed = gaussian(cfg.vocab, d, cfg.logit_scale * s, &mut rng);
        Ok(Self {
            ln_f: (vec![1.0; d], vec![0.0; d]),
            cfg,
            tok_emb,
            pos_emb,
            blocks,
            unembed,
        })
    }

    pub fn config(&self) -> &TinyLmConfig {
        &self.cfg
    }

    pub fn d_model(&self) -> usize {
        self.cfg.d_model
    }

    pub fn token_embedding(&self, token: usize) -> &[f64] {
        self.tok_emb.row(token)
    }

    /// Hex SHA-256 over every parameter in a fixed order.
    pub fn parameter_hash(&self) -> String {
        let mut h = Sha256::new();
        let mut feed = |v: &[f64]| {
            for x in v {
                h.update(x.to_le_bytes());
            }
        };
        feed(self.tok_emb.as_slice());
        feed(self.pos_emb.as_slice());
        for b in &self.blocks {
            for v in [&b.ln1.0, &b.ln1.1, &b.ln2.0, &b.ln2.1, &b.b1, &b.b2] {
                feed(v);
            }
            for m in [&b.wq, &b.wk, &b.wv, &b.wo, &b.w1, &b.w2] {
                feed(m.as_slice());
            }
        }
        feed(&self.ln_f.0);
        feed(&self.ln_f.1);
        feed(self.unembed.as_slice());
        hex(&h.finalize())
    }

    pub fn new_cache(&self) -> KvCache {
        KvCache {
            keys: vec![Vec::new(); self.cfg.n_layers],
            values: vec![Vec::new(); self.cfg.n_layers],
        }
    }

    /// Feeds one token at position `cache.len()`; returns the hidden states
    /// `h_0..=h_L` at that position and the next-token logits.
    pub fn step(&self, token: usize, cache: &mut KvCache, hook: Option<Hook<'_>>) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let pos = cache.len();
        if pos >= self.cfg.context {
            return Err(Error::InvalidArgument(format!("context length {} exceeded", self.cfg.context)));
        }
        if token >= self.cfg.vocab {
            return Err(Error::InvalidArgument(format!("token {token} outside vocabulary")));
        }
        let d = self.cfg.d_model;
        let nh = self.cfg.n_heads;
        let hd = d / nh;
        let scale = 1.0 / (hd as f64).sqrt();
        let mut x: Vec<f64> = self.tok_emb.row(token).iter().zip(self.pos_emb.row(pos)).map(|(a, b)| a + b).collect();
        let mut states = Vec::with_capacity(self.cfg.n_layers + 1);
        states.push(x.clone());
        for (li, b) in self.blocks.iter().enumerate() {
            let a_in = layer_norm(&x, &b.ln1);
            let q = b.wq.matvec(&a_in)?;
            cache.keys[li].push(b.wk.matvec(&a_in)?);
            cache.values[li].push(b.wv.matvec(&a_in)?);
            let keys = &cache.keys[li];
            let vals = &cache.values[li];
            let mut att = vec![0.0; d];
            for h in 0..nh {
                let r = h * hd..(h + 1) * hd;
                let scores: Vec<f64> = keys.iter().map(|k| dot(&q[r.clone()], &k[r.clone()]) * scale).collect();
                let w = softmax(&scores);
                for (wj, v) in w.iter().zip(vals) {
                    for (o, vv) in att[r.clone()].iter_mut().zip(&v[r.clone()]) {
                        *o += wj * vv;
                    }
                }
            }
            for (xi, o) in x.iter_mut().zip(b.wo.matvec(&att)?) {
                *xi += o;
            }
            let m_in = layer_norm(&x, &b.ln2);
            let mut hid = b.w1.matvec(&m_in)?;
            for (v, bias) in hid.iter_mut().zip(&b.b1) {
                *v = gelu(*v + bias);
            }
            for ((xi, o), bias) in x.iter_mut().zip(b.w2.matvec(&hid)?).zip(&b.b2) {
                *xi += o + bias;
            }
            if li + 1 == self.cfg.hook_layer {
                if let Some(hk) = hook {
                    if hk.delta.len() != d {
                        return Err(Error::dim("tinylm perturbation", d, hk.delta.len()));
                    }
                    if pos < hk.positions {
                        for (xi, p) in x.iter_mut().zip(hk.delta) {
                            *xi += p;
                        }
                    }
                }
            }
            states.push(x.clone());
        }
        let logits = self.unembed.matvec(&layer_norm(&x, &self.ln_f))?;
        if !logits.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("tinylm logits at position {pos}")));
        }
        Ok((states, logits))
    }

    /// Hidden states of every position for a full sequence.
    pub fn forward_trace(&self, tokens: &[usize], hook: Option<Hook<'_>>) -> Result<Vec<Vec<Vec<f64>>>> {
        let mut cache = self.new_cache();
        tokens.iter().map(|&t| self.step(t, &mut cache, hook).map(|s| s.0)).collect()
    }

    /// Samples `k` tokens after `prompt` at `temperature`; the hook, if
    /// any, is active for the whole generation.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        prompt: &[usize],
        hook: Option<Hook<'_>>,
        k: usize,
        temperature: f64,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        if prompt.is_empty() {
            return Err(Error::InvalidArgument("empty prompt".into()));
        }
        if prompt.len() + k > self.cfg.context {
            return Err(Error::InvalidArgument(format!(
                "prompt {} + completion {k} exceeds context {}",
                prompt.len(),
                self.cfg.context
            )));
        }
        let mut cache = self.new_cache();
        let mut logits = Vec::new();
        for &t in prompt {
            logits = self.step(t, &mut cache, hook)?.1;
        }
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
            let tok = sample_categorical(&softmax(&scaled), rng);
            out.push(tok);
            if i + 1 < k {
                logits = self.step(tok, &mut cache, hook)?.1;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn model() -> TinyLm {
        TinyLm::new(TinyLmConfig {
            seed: 7,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let m = model();
        let prompt = [3, 9, 27, 1, 0, 63, 12, 12, 40, 5];
        let zero = vec![0.0; 32];
        let hook = Hook {
            delta: &zero,
            positions: 10,
        };
        let a = m.generate(&prompt, None, 15, 1.0, &mut Rng64::seed_from_u64(1)).unwrap();
        let b = m.generate(&prompt, Some(hook), 15, 1.0, &mut Rng64::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        let c = m.generate(&prompt, None, 15, 1.0, &mut Rng64::seed_from_u64(1)).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn hook_is_local() {
        let m = model();
        let tokens: Vec<usize> = (0..14).map(|i| (i * 7) % 64).collect();
        let delta = vec![1.5; 32];
        let hook = Hook {
            delta: &delta,
            positions: 10,
        };
        let plain = m.forward_trace(&tokens, None).unwrap();
        let hooked = m.forward_trace(&tokens, Some(hook)).unwrap();
        for pos in 0..tokens.len() {
            for layer in 0..2 {
                assert_eq!(plain[pos][layer], hooked[pos][layer]);
            }
        }
        // Positions past the prompt get no direct write at layer 2, only
        // whatever attention carries over, so h_2 there differs from
        // "plain + delta".
        let expect: Vec<f64> = plain[3][2].iter().zip(&delta).map(|(a, b)| a + b).collect();
        assert_eq!(hooked[3][2], expect);
        assert_ne!(plain[12][3], hooked[12][3]);
    }

    #[test]
    fn large_perturbation_changes_first_logits() {
        let m = model();
        let prompt = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
        let big = vec![1e3; 32];
        let mut c1 = m.new_cache();
        let mut c2 = m.new_cache();
        let mut l1 = Vec::new();
        let mut l2 = Vec::new();
        for &t in &prompt {
            l1 = m.step(t, &mut c1, None).unwrap().1;
            l2 = m
                .step(
                    t,
                    &mut c2,
                    Some(Hook {
                        delta: &big,
                        positions: 10,
                    }),
                )
                .unwrap()
                .1;
        }
        assert_ne!(l1, l2);
    }

    #[test]
    fn context_overflow_errors() {
        let m = model();
        assert!(m.generate(&[0; 20], None, 15, 1.0, &mut Rng64::seed_from_u64(0)).is_err());
    }

    #[test]
    fn seeded_weights_are_reproducible() {
        assert_eq!(model().parameter_hash(), model().parameter_hash());
        let other = TinyLm::new(TinyLmConfig::default()).unwrap();
        assert_ne!(model().parameter_hash(), other.parameter_hash());
        assert_eq!(detokenize(&[0, 26, 52, 62, 63]), "aA0_.");
    }
}
