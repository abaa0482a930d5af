use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// One labelled set of outcomes, one value per agent or seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleGroup {
    pub label: String,
    pub values: Vec<f64>,
}

impl SampleGroup {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            values,
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

/// Standard error of the mean (n−1 denominator); needs at least two values.
pub fn sem(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: values.len(),
        });
    }
    Ok((sample_variance(values) / values.len() as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// Upper-tail p for H1: mean(a) > mean(b).
    pub p: f64,
}

/// One-sided Welch t-test of H1: mean(a) > mean(b).
///
/// When both groups have zero variance the statistic is 0 with p = 0.5 if
/// the means agree, and ±∞ with p = 0 or 1 otherwise.
pub fn welch_t_one_sided(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    for g in [a, b] {
        if g.len() < 2 {
            return Err(Error::InsufficientSamples { needed: 2, got: g.len() });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("welch sample".into()));
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (qa, qb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let diff = mean(a) - mean(b);
    let se2 = qa + qb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if diff == 0.0 {
            WelchResult { t: 0.0, df, p: 0.5 }
        } else if diff > 0.0 {
            WelchResult { t: f64::INFINITY, df, p: 0.0 }
        } else {
            WelchResult { t: f64::NEG_INFINITY, df, p: 1.0 }
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidArgument(format!("t distribution: {e}")))?;
    Ok(WelchResult { t, df, p: dist.sf(t) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sem_examples() {
        assert_eq!(sem(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!((sem(&[0.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((sem(&[1.0, 2.0, 3.0]).unwrap() - 0.5773502691896258).abs() < 1e-15);
        assert!(matches!(sem(&[4.0]), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn welch_null_and_constant_cases() {
        let r = welch_t_one_sided(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.t, r.p), (0.0, 0.5));
        let c = welch_t_one_sided(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(c.p, 0.5);
        assert!(welch_t_one_sided(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn welch_clear_separation() {
        let r = welch_t_one_sided(&[1.1, 1.2, 1.3], &[0.1, 0.2, 0.3]).unwrap();
        assert!(r.p < 0.01);
    }

    proptest! {
        #[test]
        fn swapping_groups_complements_p(
            a in prop::collection::vec(-10.0f64..10.0, 2..12),
            b in prop::collection::vec(-10.0f64..10.0, 2..12),
        ) {
            let ab = welch_t_one_sided(&a, &b).unwrap();
            let ba = welch_t_one_sided(&b, &a).unwrap();
            prop_assert!((ab.p + ba.p - 1.0).abs() < 1e-9);
        }

        #[test]
        fn mean_and_sem_ignore_order(mut v in prop::collection::vec(-1e3f64..1e3, 2..30), k in 0usize..30) {
            let (m0, s0) = (mean(&v), sem(&v).unwrap());
            let len = v.len();
            v.rotate_left(k % len);
            v.reverse();
            prop_assert!((mean(&v) - m0).abs() <= 1e-9 * m0.abs().max(1.0));
            prop_assert!((sem(&v).unwrap() - s0).abs() <= 1e-9 * s0.max(1.0));
        }
    }
}
