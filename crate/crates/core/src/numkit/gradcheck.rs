use super::mlp::Params;

/// Central finite differences of `f` with respect to every parameter of
/// `params`, flattened in segment order.
pub fn finite_difference<P, F>(params: &P, h: f64, mut f: F) -> Vec<f64>
where
    P: Params + Clone,
    F: FnMut(&P) -> f64,
{
    let mut probe = params.clone();
    let shape = params.shape_signature();
    let mut out = Vec::with_capacity(shape.iter().sum());
    for (s, &len) in shape.iter().enumerate() {
        for j in 0..len {
            let orig = probe.segments()[s][j];
            probe.segments_mut()[s][j] = orig + h;
            let up = f(&probe);
            probe.segments_mut()[s][j] = orig - h;
            let down = f(&probe);
            probe.segments_mut()[s][j] = orig;
            out.push((up - down) / (2.0 * h));
        }
    }
    out
}

/// Largest `|a − n| / max(|a|, |n|, floor)` over paired entries.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
