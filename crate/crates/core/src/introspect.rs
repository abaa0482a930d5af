//! White-box feature extraction: the vector `m_t` read from a frozen target
//! at the same timestep the target acts, and its concatenation onto an
//! adversary's base observation.
//!
//! Segments are always ordered value ⊕ action ⊕ latent; a mode simply leaves
//! some of them empty. The action segment is the categorical probability
//! vector, or the Gaussian mean for continuous targets.

use std::fmt;
use std::str::FromStr;

use crate::numkit::RunningMoments;
use crate::policy::{ActionDist, ForwardRecord, PolicyNet};
use crate::{Error, Result};

/// Clip applied after normalizing `m_t`.
pub const M_CLIP: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntrospectionMode {
    BlackBox,
    ActionValue,
    Latent,
    Full,
    /// Action distribution and latents without the value estimate.
    ActionLatent,
}

impl IntrospectionMode {
    pub const ALL: [IntrospectionMode; 5] = [
        IntrospectionMode::BlackBox,
        IntrospectionMode::ActionValue,
        IntrospectionMode::Latent,
        IntrospectionMode::Full,
        IntrospectionMode::ActionLatent,
    ];

    fn parts(self) -> (bool, bool, bool) {
        match self {
            IntrospectionMode::BlackBox => (false, false, false),
            IntrospectionMode::ActionValue => (true, true, false),
            IntrospectionMode::Latent => (false, false, true),
            IntrospectionMode::Full => (true, true, true),
            IntrospectionMode::ActionLatent => (false, true, true),
        }
    }

    pub fn layout(self, action_dim: usize, latent_dim: usize) -> Layout {
        let (v, a, l) = self.parts();
        let value_end = usize::from(v);
        let action_end = value_end + if a { action_dim } else { 0 };
        let latent_end = action_end + if l { latent_dim } else { 0 };
        Layout {
            value_end,
            action_end,
            latent_end,
        }
    }

    /// Width of `m_t` for a target with the given action and latent widths.
    pub fn width(self, action_dim: usize, latent_dim: usize) -> usize {
        self.layout(action_dim, latent_dim).latent_end
    }

    pub fn name(self) -> &'static str {
        match self {
            IntrospectionMode::BlackBox => "blackbox",
            IntrospectionMode::ActionValue => "action_value",
            IntrospectionMode::Latent => "latent",
            IntrospectionMode::Full => "full",
            IntrospectionMode::ActionLatent => "action_latent",
        }
    }
}

impl fmt::Display for IntrospectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntrospectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IntrospectionMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown introspection mode {s:?} (expected blackbox, action_value, latent, full or action_latent)"
                ))
            })
    }
}

/// Cumulative segment ends: value is `0..value_end`, action
/// `value_end..action_end`, latent `action_end..latent_end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub value_end: usize,
    pub action_end: usize,
    pub latent_end: usize,
}

impl Layout {
    pub fn boundaries(&self) -> (usize, usize, usize) {
        (self.value_end, self.action_end, self.latent_end)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntrospectionVector {
    pub mode: IntrospectionMode,
    pub payload: Vec<f64>,
    pub layout: Layout,
}

impl IntrospectionVector {
    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    pub fn value(&self) -> &[f64] {
        &self.payload[..self.layout.value_end]
    }

    pub fn action(&self) -> &[f64] {
        &self.payload[self.layout.value_end..self.layout.action_end]
    }

    pub fn latent(&self) -> &[f64] {
        &self.payload[self.layout.action_end..self.layout.latent_end]
    }
}

/// Builds `m_t` from quantities of a single target forward pass.
pub fn extract_from_parts(
    mode: IntrospectionMode,
    dist: &ActionDist,
    value: f64,
    latents: &[f64],
) -> IntrospectionVector {
    let action = dist.summary();
    let layout = mode.layout(action.len(), latents.len());
    let (v, a, l) = mode.parts();
    let mut payload = Vec::with_capacity(layout.latent_end);
    if v {
        payload.push(value);
    }
    if a {
        payload.extend_from_slice(action);
    }
    if l {
        payload.extend_from_slice(latents);
    }
    IntrospectionVector { mode, payload, layout }
}

/// `m_t` from the record whose action the target executes this step.
pub fn extract_from_record(mode: IntrospectionMode, record: &ForwardRecord) -> IntrospectionVector {
    extract_from_parts(mode, &record.dist, record.value, &record.latents)
}

/// Runs the target once on its own observation and returns `m_t`.
pub fn extract_m(target: &PolicyNet, obs: &[f64], mode: IntrospectionMode) -> Result<IntrospectionVector> {
    let eval = target.evaluate(obs)?;
    Ok(extract_from_parts(mode, &eval.dist, eval.value, &eval.latents))
}

/// `(m − mean) / max(std, 1e-6)` clipped to ±10; identity on fresh stats.
pub fn normalize_m(m: &[f64], stats: &RunningMoments) -> Vec<f64> {
    stats.normalize(m, M_CLIP)
}

/// `base ⊕ normalize(m)`, or raw concatenation when `stats` is `None`.
pub fn compose_obs(base: &[f64], m: &IntrospectionVector, stats: Option<&RunningMoments>) -> Vec<f64> {
    let mut out = Vec::with_capacity(base.len() + m.len());
    out.extend_from_slice(base);
    match stats {
        Some(s) if !m.is_empty() => out.extend(normalize_m(&m.payload, s)),
        _ => out.extend_from_slice(&m.payload),
    }
    out
}

/// Adversary-side introspection pipeline for one fixed target shape.
///
/// While `training` is set, each composed observation first updates the
/// running moments; evaluation uses frozen statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct Introspector {
    pub mode: IntrospectionMode,
    pub normalize: bool,
    pub training: bool,
    action_dim: usize,
    latent_dim: usize,
    stats: RunningMoments,
}

impl Introspector {
    pub fn new(mode: IntrospectionMode, target: &PolicyNet, normalize: bool) -> Self {
        let (a, h) = (target.action_dim(), target.latent_dim());
        Self {
            mode,
            normalize,
            training: true,
            action_dim: a,
            latent_dim: h,
            stats: RunningMoments::new(mode.width(a, h)),
        }
    }

    pub fn width(&self) -> usize {
        self.stats.dim()
    }

    pub fn stats(&self) -> &RunningMoments {
        &self.stats
    }

    /// Checks that `target` produces vectors of the width this pipeline expects.
    pub fn check_target(&self, target: &PolicyNet) -> Result<()> {
        if target.action_dim() != self.action_dim {
            return Err(Error::dim("introspection target action width", self.action_dim, target.action_dim()));
        }
        if target.latent_dim() != self.latent_dim {
            return Err(Error::dim("introspection target latent width", self.latent_dim, target.latent_dim()));
        }
        Ok(())
    }

    /// Extracts `m_t` from the target's record and appends it to `base`.
    pub fn compose(&mut self, base: &[f64], record: &ForwardRecord) -> Result<Vec<f64>> {
        let m = extract_from_record(self.mode, record);
        if m.len() != self.width() {
            return Err(Error::dim("introspection vector", self.width(), m.len()));
        }
        if !self.normalize {
            return Ok(compose_obs(base, &m, None));
        }
        if self.training && !m.is_empty() {
            self.stats.update(&m.payload);
        }
        Ok(compose_obs(base, &m, Some(&self.stats)))
    }
}
