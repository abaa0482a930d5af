/// Per-coordinate running mean and variance (Welford / Chan merge).
#[derive(Clone, Debug, PartialEq)]
pub struct RunningMoments {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningMoments {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn update(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    /// Population standard deviation per coordinate.
    pub fn std(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![1.0; self.mean.len()];
        }
        self.m2.iter().map(|s| (s / self.count as f64).sqrt()).collect()
    }

    /// `(x − mean) / max(std, 1e-6)` clipped to `±clip`; identity before the first update.
    pub fn normalize(&self, x: &[f64], clip: f64) -> Vec<f64> {
        if self.count == 0 {
            return x.to_vec();
        }
        let std = self.std();
        x.iter()
            .zip(&self.mean)
            .zip(std)
            .map(|((v, m), s)| ((v - m) / s.max(1e-6)).clamp(-clip, clip))
            .collect()
    }

    /// Builds moments from explicit mean/std, as if observed from a large sample.
    pub fn from_parts(count: u64, mean: Vec<f64>, std: &[f64]) -> Self {
        let m2 = std.iter().map(|s| s * s * count as f64).collect();
        Self { count, mean, m2 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cold_start_identity() {
        let m = RunningMoments::new(3);
        assert_eq!(m.normalize(&[1.0, -7.0, 42.0], 10.0), vec![1.0, -7.0, 42.0]);
    }

    #[test]
    fn constant_coordinate_maps_to_zero() {
        let mut m = RunningMoments::new(2);
        for i in 0..10 {
            m.update(&[3.5, i as f64]);
        }
        assert_eq!(m.normalize(&[3.5, 4.0], 10.0)[0], 0.0);
    }

    #[test]
    fn arithmetic_case() {
        let m = RunningMoments::from_parts(100, vec![1.0], &[2.0]);
        assert!((m.normalize(&[5.0], 10.0)[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn clips() {
        let m = RunningMoments::from_parts(100, vec![0.0], &[0.01]);
        assert_eq!(m.normalize(&[5.0], 10.0)[0], 10.0);
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, -2.0, 8.5, 3.25];
        let mut m = RunningMoments::new(1);
        for x in xs {
            m.update(&[x]);
        }
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((m.mean()[0] - mean).abs() < 1e-12);
        assert!((m.std()[0] - var.sqrt()).abs() < 1e-12);
    }
}
