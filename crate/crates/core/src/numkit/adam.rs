use super::mlp::Params;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments, one accumulator per parameter segment.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: Params + ?Sized>(config: AdamConfig, params: &P) -> Self {
        let shape = params.shape_signature();
        Self {
            config,
            step: 0,
            first: shape.iter().map(|&n| vec![0.0; n]).collect(),
            second: shape.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step<P: Params + ?Sized, G: Params + ?Sized>(&mut self, params: &mut P, grads: &G) -> Result<()> {
        let shape = params.shape_signature();
        let gshape = grads.shape_signature();
        let mine: Vec<usize> = self.first.iter().map(Vec::len).collect();
        if shape != mine || gshape != mine {
            let got = if shape != mine { shape.iter().sum() } else { gshape.iter().sum() };
            return Err(Error::dim("adam_step shapes", mine.iter().sum(), got));
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params
            .segments_mut()
            .into_iter()
            .zip(grads.segments())
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Value-returning form of [`AdamState::step`].
pub fn adam_step<P: Params + Clone, G: Params>(params: &P, grads: &G, state: &AdamState) -> Result<(P, AdamState)> {
    let mut p = params.clone();
    let mut s = state.clone();
    s.step(&mut p, grads)?;
    Ok((p, s))
}
