//! Finite metric spaces and dense distance matrices.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::heisenberg::GroupElement;

/// Symmetric `n × n` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(n: usize) -> Self {
        DistanceMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Format(format!("distance matrix has {} entries, expected {}", data.len(), n * n)));
        }
        Ok(DistanceMatrix { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    #[inline]
    pub(crate) fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
        self.data[j * self.n + i] += v;
    }

    pub fn row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, t: f64) -> DistanceMatrix {
        DistanceMatrix { n: self.n, data: self.data.iter().map(|v| v * t).collect() }
    }

    pub fn max_abs_diff(&self, other: &DistanceMatrix) -> f64 {
        assert_eq!(self.n, other.n, "matrix sizes differ");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Restriction to the listed points, in that order.
    pub fn restrict(&self, idx: &[usize]) -> DistanceMatrix {
        DistanceMatrix::from_fn(idx.len(), |i, j| self.get(idx[i], idx[j]))
    }

    /// Largest violation of nonnegativity, symmetry, zero diagonal and the
    /// triangle inequality. `0.0` for a pseudometric.
    pub fn pseudometric_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0_f64;
        for i in 0..n {
            worst = worst.max(self.get(i, i).abs());
            for j in 0..n {
                let d = self.get(i, j);
                worst = worst.max(-d).max((d - self.get(j, i)).abs());
                for k in 0..n {
                    worst = worst.max(d - self.get(i, k) - self.get(k, j));
                }
            }
        }
        worst
    }
}

/// Points with positive weights and a metric between them. Points may carry
/// Heisenberg coordinates (Cayley balls, sampled CC metrics).
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    pub weights: Vec<f64>,
    pub dist: DistanceMatrix,
    pub coords: Option<Vec<GroupElement>>,
}

impl FiniteMetricSpace {
    /// Unit weights, no coordinates. Validates the metric axioms.
    pub fn new(dist: DistanceMatrix) -> Result<Self> {
        let space = FiniteMetricSpace { weights: vec![1.0; dist.len()], dist, coords: None };
        space.validate(1e-9)?;
        Ok(space)
    }

    pub fn with_coords(mut self, coords: Vec<GroupElement>) -> Result<Self> {
        if coords.len() != self.len() {
            return Err(Error::invalid("coordinate count differs from point count"));
        }
        self.coords = Some(coords);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.weights.len() != self.len() {
            return Err(Error::invalid("weight count differs from point count"));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid(format!("point weights must be positive, found {w}")));
        }
        let defect = self.dist.pseudometric_defect();
        if defect > tol {
            return Err(Error::invalid(format!("not a metric: axiom defect {defect:e}")));
        }
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                if self.dist.get(i, j) <= 0.0 {
                    return Err(Error::Degenerate(format!(
                        "points {i} and {j} are at distance {}",
                        self.dist.get(i, j)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Sub-space on the listed points.
    pub fn restrict(&self, idx: &[usize]) -> FiniteMetricSpace {
        FiniteMetricSpace {
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
            dist: self.dist.restrict(idx),
            coords: self.coords.as_ref().map(|c| idx.iter().map(|&i| c[i]).collect()),
        }
    }

    pub fn scaled(&self, t: f64) -> FiniteMetricSpace {
        FiniteMetricSpace { dist: self.dist.scaled(t), ..self.clone() }
    }

    /// JSON: `{"n", "points": [{"coords": [a,b,c], "weight"}], "dist": [...]}`.
    /// Integral coordinates are written as JSON integers.
    pub fn to_json(&self) -> Value {
        let points: Vec<Value> = (0..self.len())
            .map(|i| {
                let mut p = json!({ "weight": self.weights[i] });
                if let Some(c) = &self.coords {
                    let g = c[i];
                    p["coords"] = json!([number(g.a), number(g.b), number(g.c)]);
                }
                p
            })
            .collect();
        json!({
            "n": self.len(),
            "points": points,
            "dist": self.dist.row_major(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let raw: SpaceJson = serde_json::from_value(v.clone())?;
        let dist = DistanceMatrix::from_row_major(raw.n, raw.dist)?;
        if raw.points.len() != raw.n {
            return Err(Error::Format(format!("{} points listed for n = {}", raw.points.len(), raw.n)));
        }
        let weights = raw.points.iter().map(|p| p.weight).collect();
        let coords = if raw.points.iter().all(|p| p.coords.is_some()) && raw.n > 0 {
            Some(
                raw.points
                    .iter()
                    .map(|p| {
                        let c = p.coords.unwrap();
                        GroupElement::new(c[0], c[1], c[2])
                    })
                    .collect(),
            )
        } else {
            None
        };
        let space = FiniteMetricSpace { weights, dist, coords };
        space.validate(1e-9)?;
        Ok(space)
    }

    /// One `i j d(i,j)` line per unordered pair.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                let _ = writeln!(out, "{i} {j} {}", self.dist.get(i, j));
            }
        }
        out
    }
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SpaceJson {
    n: usize,
    points: Vec<PointJson>,
    dist: Vec<f64>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PointJson {
    weight: f64,
    #[serde(default)]
    coords: Option<[f64; 3]>,
}

fn number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        json!(v as i64)
    } else {
        json!(v)
    }
}

/// Shortest-path metric of an unweighted graph given by an edge list.
pub fn graph_metric(n: usize, edges: &[(usize, usize)]) -> Result<DistanceMatrix> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        if u >= n || v >= n {
            return Err(Error::invalid(format!("edge ({u}, {v}) out of range for {n} vertices")));
        }
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut m = DistanceMatrix::zeros(n);
    for s in 0..n {
        let mut d = vec![usize::MAX; n];
        d[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if d[v] == usize::MAX {
                    d[v] = d[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (t, &dt) in d.iter().enumerate() {
            if dt == usize::MAX {
                return Err(Error::invalid("graph is disconnected"));
            }
            m.data[s * n + t] = dt as f64;
        }
    }
    Ok(m)
}

/// Named test graphs: `pathN`, `cycleN`, `starN`, `k23`.
pub fn named_graph(name: &str) -> Result<FiniteMetricSpace> {
    let parse = |prefix: &str| -> Option<usize> { name.strip_prefix(prefix)?.parse().ok() };
    let (n, edges): (usize, Vec<(usize, usize)>) = if let Some(n) = parse("path") {
        (n, (1..n).map(|i| (i - 1, i)).collect())
    } else if let Some(n) = parse("cycle") {
        if n < 3 {
            return Err(Error::invalid("cycles need at least 3 vertices"));
        }
        (n, (0..n).map(|i| (i, (i + 1) % n)).collect())
    } else if let Some(n) = parse("star") {
        (n, (1..n).map(|i| (0, i)).collect())
    } else if name == "k23" {
        (5, vec![(0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4)])
    } else {
        return Err(Error::invalid(format!("unknown graph name '{name}'")));
    };
    if n < 1 {
        return Err(Error::invalid("graph needs at least one vertex"));
    }
    FiniteMetricSpace::new(graph_metric(n, &edges)?)
}
