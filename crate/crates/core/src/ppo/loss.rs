use super::{PpoConfig, RolloutBatch};
use crate::numkit::{categorical_entropy, gaussian_logprob_entropy, softmax, Matrix};
use crate::policy::{Action, PolicyGrads, PolicyNet};
use crate::{Error, Result};

/// Loss components averaged over the minibatch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub policy: f64,
    /// Mean squared value error, before the value coefficient.
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Clipped-surrogate loss and its analytic gradient over the whole batch.
///
/// Uses `batch.advantages` exactly as stored; normalization is the caller's job.
pub fn ppo_loss(net: &PolicyNet, batch: &RolloutBatch, cfg: &PpoConfig) -> Result<(LossParts, PolicyGrads)> {
    let idx: Vec<usize> = (0..batch.len()).collect();
    ppo_loss_on(net, batch, &idx, cfg)
}

/// `L = −mean(min(ρA, clip(ρ,1±ε)A)) + c_v·mean((V−R)²) − c_ent·mean(H)` on the
/// selected rows.
pub fn ppo_loss_on(
    net: &PolicyNet,
    batch: &RolloutBatch,
    idx: &[usize],
    cfg: &PpoConfig,
) -> Result<(LossParts, PolicyGrads)> {
    if idx.is_empty() {
        return Err(Error::InvalidArgument("ppo loss on an empty minibatch".into()));
    }
    let n = batch.len();
    for (name, len) in [
        ("actions", batch.actions.len()),
        ("logp_old", batch.logp_old.len()),
        ("advantages", batch.advantages.len()),
        ("returns", batch.returns.len()),
        ("obs rows", batch.obs.rows()),
    ] {
        if len != n {
            return Err(Error::Dimension {
                context: name,
                expected: n,
                got: len,
            });
        }
    }
    let obs = batch.obs.gather_rows(idx);
    let eval = net.evaluate_batch(&obs)?;
    let b = idx.len() as f64;
    let k = eval.head_out.cols();
    let mut d_head = Matrix::zeros(idx.len(), k);
    let mut d_values = vec![0.0; idx.len()];
    let mut d_log_std = vec![0.0; net.log_std().map_or(0, <[f64]>::len)];
    let d_entropy = -cfg.entropy_coef / b;
    let mut parts = LossParts::default();

    for (row, &i) in idx.iter().enumerate() {
        let out = eval.head_out.row(row);
        let adv = batch.advantages[i];
        let (logp, entropy) = match (&batch.actions[i], net.log_std()) {
            (Action::Discrete(a), None) => {
                let p = softmax(out);
                (p[*a].ln(), categorical_entropy(&p))
            }
            (Action::Continuous(a), Some(ls)) => gaussian_logprob_entropy(out, ls, a),
            _ => return Err(Error::InvalidArgument(format!("action kind does not match head at row {i}"))),
        };
        let ratio = (logp - batch.logp_old[i]).exp();
        let surr1 = ratio * adv;
        let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        let surr2 = clipped * adv;
        parts.policy -= surr1.min(surr2);
        if (ratio - 1.0).abs() > cfg.clip_eps {
            parts.clip_fraction += 1.0;
        }
        parts.approx_kl += batch.logp_old[i] - logp;
        let v_err = eval.values[row] - batch.returns[i];
        parts.value += v_err * v_err;
        parts.entropy += entropy;
        d_values[row] = 2.0 * cfg.value_coef * v_err / b;

        // The clipped branch is constant in θ, so only the unclipped one flows.
        let d_logp = if surr1 <= surr2 { -adv * ratio / b } else { 0.0 };
        let g = d_head.row_mut(row);
        match &batch.actions[i] {
            Action::Discrete(a) => {
                let p = softmax(out);
                for j in 0..k {
                    let onehot = if j == *a { 1.0 } else { 0.0 };
                    let dlogp = onehot - p[j];
                    let dent = if p[j] > 0.0 { -p[j] * (p[j].ln() + entropy) } else { 0.0 };
                    g[j] = d_logp * dlogp + d_entropy * dent;
                }
            }
            Action::Continuous(a) => {
                let ls = net.log_std().expect("checked above");
                for j in 0..k {
                    let inv_var = (-2.0 * ls[j]).exp();
                    let diff = a[j] - out[j];
                    g[j] = d_logp * diff * inv_var;
                    d_log_std[j] += d_logp * (diff * diff * inv_var - 1.0) + d_entropy;
                }
            }
        }
    }
    parts.policy /= b;
    parts.value /= b;
    parts.entropy /= b;
    parts.clip_fraction /= b;
    parts.approx_kl /= b;
    parts.total = parts.policy + cfg.value_coef * parts.value - cfg.entropy_coef * parts.entropy;
    if !parts.total.is_finite() {
        let adv_max = idx.iter().map(|&i| batch.advantages[i].abs()).fold(0.0, f64::max);
        return Err(Error::NonFinite(format!(
            "ppo loss (policy {}, value {}, entropy {}, batch {}, max |adv| {adv_max})",
            parts.policy,
            parts.value,
            parts.entropy,
            idx.len()
        )));
    }
    let grads = net.backward_batch(&eval, &d_head, &d_values, &d_log_std)?;
    Ok((parts, grads))
}
