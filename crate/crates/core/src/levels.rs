//! Smooth test functions on `ℍ`, their superlevel sets, and cut measures
//! obtained by slicing them.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cuts::Lines;
use crate::error::{Error, Result};
use crate::grid::{GridGeometry, GridSet, Membership, SetMeasure};
use crate::heisenberg::GroupElement;

/// Named smooth functions used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `a`: slices are vertical half-spaces.
    A,
    /// `c`: slices are horizontal planes.
    C,
    /// `a + b² + c`.
    Parabolic,
    /// `a + 0.6 b + 0.4 ab + 0.3 b² + 0.5 c`, with `Pf ≠ 0` on `[−1, 1]³`.
    Generic,
}

impl TestFunction {
    pub const ALL: [TestFunction; 4] =
        [TestFunction::A, TestFunction::C, TestFunction::Parabolic, TestFunction::Generic];

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::A => "a",
            TestFunction::C => "c",
            TestFunction::Parabolic => "parabolic",
            TestFunction::Generic => "generic",
        }
    }

    #[inline]
    pub fn eval(self, p: GroupElement) -> f64 {
        let GroupElement { a, b, c } = p;
        match self {
            TestFunction::A => a,
            TestFunction::C => c,
            TestFunction::Parabolic => a + b * b + c,
            TestFunction::Generic => a + 0.6 * b + 0.4 * a * b + 0.3 * b * b + 0.5 * c,
        }
    }

    /// Horizontal gradient `(Pf, Qf)` with `P = ∂_a`, `Q = ∂_b + a∂_c`.
    pub fn horizontal_gradient(self, p: GroupElement) -> [f64; 2] {
        let GroupElement { a, b, .. } = p;
        match self {
            TestFunction::A => [1.0, 0.0],
            TestFunction::C => [0.0, a],
            TestFunction::Parabolic => [1.0, 2.0 * b + a],
            TestFunction::Generic => [1.0 + 0.4 * b, 0.6 + 0.4 * a + 0.6 * b + 0.5 * a],
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestFunction::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown test function {s:?}")))
    }
}

/// The superlevel set `{f ≥ t}`, restricted to a box outside of which
/// membership is reported as unknown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    pub function: TestFunction,
    pub threshold: f64,
    pub domain: Option<([f64; 3], [f64; 3])>,
}

impl LevelSet {
    pub fn new(function: TestFunction, threshold: f64) -> Self {
        LevelSet { function, threshold, domain: None }
    }

    pub fn within(mut self, lo: [f64; 3], hi: [f64; 3]) -> Self {
        self.domain = Some((lo, hi));
        self
    }
}

impl Membership for LevelSet {
    #[inline]
    fn member(&self, p: GroupElement) -> Option<bool> {
        if let Some((lo, hi)) = &self.domain {
            let x = [p.a, p.b, p.c];
            if (0..3).any(|d| x[d] < lo[d] || x[d] > hi[d]) {
                return None;
            }
        }
        Some(self.function.eval(p) >= self.threshold)
    }
}

/// Thresholds `t_j = f_min + (j + ½)h`, `j < levels`, with `h = (f_max − f_min)/levels`.
pub fn slice_thresholds(fmin: f64, fmax: f64, levels: usize) -> Result<(Vec<f64>, f64)> {
    if levels == 0 || !(fmax > fmin) {
        return Err(Error::invalid(format!("need levels > 0 and f_max > f_min, got {levels}, [{fmin}, {fmax}]")));
    }
    let h = (fmax - fmin) / levels as f64;
    Ok(((0..levels).map(|j| fmin + (j as f64 + 0.5) * h).collect(), h))
}

/// Values of `f` at the voxel centers.
pub fn sample_on_grid(geometry: &GridGeometry, f: impl Fn(GroupElement) -> f64) -> Vec<f64> {
    (0..geometry.len()).map(|idx| f(geometry.center(idx))).collect()
}

/// A sampled function sliced at evenly spaced thresholds.
#[derive(Debug, Clone)]
pub struct GridSlicing {
    pub measure: SetMeasure<GridSet>,
    pub thresholds: Vec<f64>,
    pub spacing: f64,
    /// `f_min + h · #{j : t_j ≤ f(v)}`: the function whose line variation
    /// matches the slices' total perimeter exactly.
    pub quantized: Vec<f64>,
}

/// Slices `{f ≥ t_j}` of sampled values, each with weight `h`. The thresholds
/// sit strictly between sample levels (`levels` evenly spaced over the sampled
/// range), so the superlevel sets are unambiguous.
pub fn slice_grid_values(geometry: &GridGeometry, values: &[f64], levels: usize) -> Result<GridSlicing> {
    if values.len() != geometry.len() {
        return Err(Error::GeometryMismatch(format!("{} values for {} voxels", values.len(), geometry.len())));
    }
    let fmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let fmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (thresholds, h) = slice_thresholds(fmin, fmax, levels)?;
    let mut measure = SetMeasure::new();
    for &t in &thresholds {
        let bits = crate::cuts::Cut::from_fn(values.len(), |i| values[i] >= t);
        measure.push(GridSet::from_cut(geometry.clone(), bits)?, h)?;
    }
    let quantized = values.iter().map(|&v| fmin + h * thresholds.partition_point(|&t| t <= v) as f64).collect();
    Ok(GridSlicing { measure, thresholds, spacing: h, quantized })
}

/// Slices of a named function sampled at the voxel centers.
pub fn slice_function(geometry: &GridGeometry, f: TestFunction, levels: usize) -> Result<GridSlicing> {
    slice_grid_values(geometry, &sample_on_grid(geometry, |p| f.eval(p)), levels)
}

/// Analytic slices `{f ≥ t_j}` over `[fmin, fmax]`, each of weight `h`.
pub fn analytic_slices(f: TestFunction, fmin: f64, fmax: f64, levels: usize) -> Result<SetMeasure<LevelSet>> {
    let (thresholds, h) = slice_thresholds(fmin, fmax, levels)?;
    SetMeasure::from_atoms(thresholds.into_iter().map(|t| (LevelSet::new(f, t), h)))
}

/// Line variation of sampled values along the grid's P- and Q-lines.
pub fn grid_line_variation(geometry: &GridGeometry, values: &[f64]) -> f64 {
    let lines: Lines = geometry.lines();
    crate::cuts::line_variation(values, &lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for f in TestFunction::ALL {
            assert_eq!(f.name().parse::<TestFunction>().unwrap(), f);
        }
        assert!("nope".parse::<TestFunction>().is_err());
    }

    #[test]
    fn horizontal_gradient_matches_finite_differences() {
        let p = GroupElement::new(0.3, -0.2, 0.1);
        let h = 1e-6;
        for f in TestFunction::ALL {
            let along = |g: GroupElement| (f.eval(p * g) - f.eval(p * GroupElement::new(-g.a, -g.b, 0.0))) / (2.0 * h);
            let [pf, qf] = f.horizontal_gradient(p);
            assert!((along(GroupElement::new(h, 0.0, 0.0)) - pf).abs() < 1e-6);
            assert!((along(GroupElement::new(0.0, h, 0.0)) - qf).abs() < 1e-6);
        }
    }

    #[test]
    fn quantized_values_count_thresholds() {
        let g = GridGeometry::cube(1.0, [4, 4, 8]).unwrap();
        let s = slice_function(&g, TestFunction::C, 7).unwrap();
        assert_eq!(s.measure.len(), 7);
        // Slicing c at cell spacing gives one level per voxel layer.
        assert!((s.spacing - g.cell()[2]).abs() < 1e-12);
        for idx in 0..g.len() {
            let (_, _, k) = g.coords(idx);
            assert!((s.quantized[idx] - (s.thresholds[0] - 0.5 * s.spacing + k as f64 * s.spacing)).abs() < 1e-12);
        }
    }

    #[test]
    fn domain_restriction() {
        let l = LevelSet::new(TestFunction::A, 0.0).within([-1.0; 3], [1.0; 3]);
        assert_eq!(l.member(GroupElement::new(0.5, 0.0, 0.0)), Some(true));
        assert_eq!(l.member(GroupElement::new(2.0, 0.0, 0.0)), None);
    }
}
