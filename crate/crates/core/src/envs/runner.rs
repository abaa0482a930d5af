use crate::{Error, Result};

pub const RUNNER_OBS_DIM: usize = 3;

/// Physics constants shared by every runner instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunnerConstants {
    pub force: f64,
    pub friction: f64,
    pub dt: f64,
    pub action_cost: f64,
    pub max_steps: u32,
}

impl Default for RunnerConstants {
    fn default() -> Self {
        Self {
            force: 2.0,
            friction: 0.15,
            dt: 0.05,
            action_cost: 0.01,
            max_steps: 200,
        }
    }
}

/// A point mass pushed along a line against friction.
///
/// `v' = v + force·a/mass − friction·f·v`, `x' = x + dt·v'`,
/// reward `dt·v' − action_cost·a²`, with `a` clamped to [−1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamRunner {
    pub consts: RunnerConstants,
    friction_coef: f64,
    mass_coef: f64,
    x: f64,
    v: f64,
    step: u32,
}

/// Runner with scaled friction and mass; both multipliers must be positive.
pub fn make_shifted_env(friction_mult: f64, mass_mult: f64) -> Result<ParamRunner> {
    ParamRunner::new(RunnerConstants::default(), friction_mult, mass_mult)
}

/// `n` evenly spaced values over `[lo, hi]`, endpoints included.
pub fn multiplier_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

impl ParamRunner {
    pub fn new(consts: RunnerConstants, friction_coef: f64, mass_coef: f64) -> Result<Self> {
        if !(friction_coef > 0.0 && mass_coef > 0.0) || !friction_coef.is_finite() || !mass_coef.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "runner multipliers must be positive (friction {friction_coef}, mass {mass_coef})"
            )));
        }
        Ok(Self {
            consts,
            friction_coef,
            mass_coef,
            x: 0.0,
            v: 0.0,
            step: 0,
        })
    }

    pub fn nominal() -> Self {
        make_shifted_env(1.0, 1.0).expect("unit multipliers are valid")
    }

    pub fn reset(&mut self) {
        self.x = 0.0;
        self.v = 0.0;
        self.step = 0;
    }

    pub fn coefficients(&self) -> (f64, f64) {
        (self.friction_coef, self.mass_coef)
    }

    pub fn position(&self) -> f64 {
        self.x
    }

    pub fn velocity(&self) -> f64 {
        self.v
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.consts.max_steps
    }

    pub fn observe(&self) -> Vec<f64> {
        vec![
            self.v / 10.0,
            self.x / 100.0,
            1.0 - f64::from(self.step) / f64::from(self.consts.max_steps),
        ]
    }

    /// Returns `(reward, done)`.
    pub fn step(&mut self, action: f64) -> Result<(f64, bool)> {
        if self.is_done() {
            return Err(Error::EpisodeFinished);
        }
        if action.is_nan() {
            return Err(Error::NonFinite("runner action".into()));
        }
        let a = action.clamp(-1.0, 1.0);
        let c = &self.consts;
        self.v = self.v + c.force * a / self.mass_coef - c.friction * self.friction_coef * self.v;
        self.x += c.dt * self.v;
        self.step += 1;
        let r = c.dt * self.v - c.action_cost * a * a;
        Ok((r, self.is_done()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_state_stays_at_rest() {
        let mut env = ParamRunner::nominal();
        assert_eq!(env.step(0.0).unwrap(), (0.0, false));
        assert_eq!(env.velocity(), 0.0);
    }

    #[test]
    fn unit_push_from_rest() {
        let mut env = ParamRunner::nominal();
        let (r, _) = env.step(1.0).unwrap();
        assert!((env.velocity() - 2.0).abs() < 1e-15);
        assert!((r - 0.09).abs() < 1e-15);
    }

    #[test]
    fn double_mass_halves_push() {
        let mut heavy = make_shifted_env(1.0, 2.0).unwrap();
        heavy.step(1.0).unwrap();
        assert!((heavy.velocity() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn actions_are_clamped() {
        let mut a = ParamRunner::nominal();
        let mut b = ParamRunner::nominal();
        assert_eq!(a.step(5.0).unwrap(), b.step(1.0).unwrap());
    }

    #[test]
    fn rejects_non_positive_multipliers() {
        assert!(make_shifted_env(0.0, 1.0).is_err());
        assert!(make_shifted_env(1.0, -0.5).is_err());
    }

    #[test]
    fn grid_endpoints_and_spacing() {
        let g = multiplier_grid(0.6, 1.6, 8);
        assert_eq!(g.len(), 8);
        assert_eq!(g[0], 0.6);
        assert_eq!(g[7], 1.6);
        let corner = make_shifted_env(g[0], g[7]).unwrap();
        let mut c = corner.clone();
        let mut n = ParamRunner::nominal();
        c.step(1.0).unwrap();
        n.step(1.0).unwrap();
        assert_ne!(c.velocity(), n.velocity());
    }

    #[test]
    fn finishes_after_max_steps() {
        let mut env = ParamRunner::nominal();
        for i in 0..200 {
            let (_, done) = env.step(0.3).unwrap();
            assert_eq!(done, i == 199);
        }
        assert!(env.step(0.0).is_err());
    }
}
