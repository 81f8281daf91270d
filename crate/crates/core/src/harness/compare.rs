//! Pairwise deviation metrics between curves on a shared grid.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A named real curve sampled on the scenario grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub name: String,
    pub values: Vec<f64>,
}

impl Curve {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self { name: name.into(), values }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairMetrics {
    pub curve: String,
    pub reference: String,
    pub max_abs: f64,
    /// `(∫ |Δ|² dt)^{1/2}` by the trapezoid rule.
    pub l2: f64,
    pub t_of_max: f64,
}

/// Per-run bookkeeping that does not depend on the clock.
#[derive(Clone, Debug, PartialEq)]
pub struct RunInfo {
    pub name: String,
    pub max_leak: Option<f64>,
    pub n_max: Option<usize>,
    /// Smallest state eigenvalue seen along the run.
    pub min_eigenvalue: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComparisonReport {
    pub pairs: Vec<PairMetrics>,
    pub runs: Vec<RunInfo>,
    pub epsilon: Vec<String>,
    pub notes: Vec<String>,
    /// Wall-clock seconds per run; kept out of [`ComparisonReport::render`].
    pub timings: Vec<(String, f64)>,
}

impl ComparisonReport {
    pub fn pair(&self, curve: &str, reference: &str) -> Option<&PairMetrics> {
        self.pairs.iter().find(|p| p.curve == curve && p.reference == reference)
    }

    /// Deterministic text form.
    pub fn render(&self, header: &[String]) -> String {
        let mut s = String::new();
        for h in header {
            let _ = writeln!(s, "# {h}");
        }
        s.push_str("[epsilon]\n");
        for e in &self.epsilon {
            let _ = writeln!(s, "{e}");
        }
        s.push_str("[runs]\n");
        for r in &self.runs {
            let leak = r.max_leak.map_or("-".to_string(), |l| format!("{l:e}"));
            let n = r.n_max.map_or("-".to_string(), |n| n.to_string());
            let ev = r.min_eigenvalue.map_or("-".to_string(), |e| format!("{e:e}"));
            let flag = if r.max_leak.is_some_and(|l| l > crate::dynamics::LEAK_LIMIT) { " LEAK" } else { "" };
            let _ = writeln!(s, "{} max_leak={leak} n_max={n} min_eigenvalue={ev}{flag}", r.name);
        }
        s.push_str("[deviations]\n");
        for p in &self.pairs {
            let _ = writeln!(
                s,
                "{} vs {}: max_abs={:e} l2={:e} t_of_max={}",
                p.curve, p.reference, p.max_abs, p.l2, p.t_of_max
            );
        }
        if !self.notes.is_empty() {
            s.push_str("[notes]\n");
            for n in &self.notes {
                let _ = writeln!(s, "{n}");
            }
        }
        s
    }

    pub fn render_timing(&self) -> String {
        self.timings.iter().map(|(n, t)| format!("{n} {t:.3}s\n")).collect()
    }
}

fn metrics(grid: &[f64], a: &Curve, b: &Curve) -> PairMetrics {
    let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect();
    let (k, max_abs) =
        d.iter().enumerate().fold((0, 0.0), |(kb, mb), (k, &x)| if x > mb { (k, x) } else { (kb, mb) });
    let l2 = grid
        .windows(2)
        .zip(d.windows(2))
        .map(|(t, x)| 0.5 * (t[1] - t[0]) * (x[0] * x[0] + x[1] * x[1]))
        .sum::<f64>()
        .sqrt();
    PairMetrics { curve: a.name.clone(), reference: b.name.clone(), max_abs, l2, t_of_max: grid[k] }
}

/// Deviations of every curve against `reference` when it is present, or
/// between all ordered pairs otherwise.
pub fn compare(grid: &[f64], curves: &[Curve], reference: Option<&str>) -> Result<Vec<PairMetrics>> {
    for c in curves {
        if c.values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: c.values.len() });
        }
    }
    let refc = reference.and_then(|r| curves.iter().find(|c| c.name == r));
    Ok(match refc {
        Some(r) => curves.iter().filter(|c| c.name != r.name).map(|c| metrics(grid, c, r)).collect(),
        None => curves
            .iter()
            .enumerate()
            .flat_map(|(i, a)| curves[i + 1..].iter().map(move |b| (a, b)))
            .map(|(a, b)| metrics(grid, a, b))
            .collect(),
    })
}
