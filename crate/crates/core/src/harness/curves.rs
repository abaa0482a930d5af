use std::fmt::Write as _;
use std::path::Path;

use super::stats::{mean, sem};
use crate::{Error, Result};

/// One run's evaluation series.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub label: String,
    pub steps: Vec<u64>,
    pub values: Vec<f64>,
}

impl Curve {
    /// Value recorded at `step`, if that step is on the grid.
    pub fn at(&self, step: u64) -> Option<f64> {
        self.steps.iter().position(|&s| s == step).map(|i| self.values[i])
    }

    /// Trapezoidal area under the curve divided by the step span.
    pub fn normalized_auc(&self) -> f64 {
        if self.steps.len() < 2 {
            return self.values.first().copied().unwrap_or(f64::NAN);
        }
        let mut area = 0.0;
        for i in 1..self.steps.len() {
            let w = (self.steps[i] - self.steps[i - 1]) as f64;
            area += 0.5 * w * (self.values[i] + self.values[i - 1]);
        }
        area / (self.steps[self.steps.len() - 1] - self.steps[0]) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub step: u64,
    pub mean: f64,
    /// `None` when fewer than two runs contribute.
    pub sem: Option<f64>,
    pub n: usize,
}

/// Mean and SEM across runs at each shared step point.
pub fn aggregate_curves(runs: &[Curve]) -> Result<Vec<CurvePoint>> {
    let Some(first) = runs.first() else {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    };
    let offenders: Vec<&str> = runs
        .iter()
        .filter(|r| r.steps != first.steps || r.values.len() != r.steps.len())
        .map(|r| r.label.as_str())
        .collect();
    if !offenders.is_empty() {
        return Err(Error::StepGrid(format!(
            "runs {offenders:?} do not share the step grid of {:?}",
            first.label
        )));
    }
    Ok(first
        .steps
        .iter()
        .enumerate()
        .map(|(i, &step)| {
            let col: Vec<f64> = runs.iter().map(|r| r.values[i]).collect();
            CurvePoint {
                step,
                mean: mean(&col),
                sem: sem(&col).ok(),
                n: col.len(),
            }
        })
        .collect())
}

fn fmt_sem(s: Option<f64>) -> String {
    s.map_or_else(|| "nan".to_string(), |v| v.to_string())
}

/// `step,mean,sem,n`
pub fn curve_points_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("step,mean,sem,n\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.step, p.mean, fmt_sem(p.sem), p.n);
    }
    out
}

/// `<key>,env_steps,mean,sem,n` with one block of rows per labelled series.
pub fn labelled_points_csv(key: &str, series: &[(String, Vec<CurvePoint>)]) -> String {
    let mut out = format!("{key},env_steps,mean,sem,n\n");
    for (label, points) in series {
        for p in points {
            let _ = writeln!(out, "{label},{},{},{},{}", p.step, p.mean, fmt_sem(p.sem), p.n);
        }
    }
    out
}

/// Single-run series as `step,value`.
pub fn curve_csv(curve: &Curve) -> String {
    let mut out = String::from("step,value\n");
    for (s, v) in curve.steps.iter().zip(&curve.values) {
        let _ = writeln!(out, "{s},{v}");
    }
    out
}

/// Reads a `step,value` file written by [`curve_csv`].
pub fn read_curve(path: &Path) -> Result<Curve> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut steps = Vec::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = || Error::ConfigLine {
            line: i + 1,
            message: format!("{}: expected `step,value`, got {line:?}", path.display()),
        };
        let (s, v) = line.split_once(',').ok_or_else(bad)?;
        steps.push(s.trim().parse().map_err(|_| bad())?);
        values.push(v.trim().parse().map_err(|_| bad())?);
    }
    Ok(Curve {
        label: path.display().to_string(),
        steps,
        values,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
