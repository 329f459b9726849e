//! Cuts, finite cut measures and their cut metrics.
//!
//! A cut is a subset of a finite weighted point set. A cut measure is a finite
//! list of weighted cuts; its cut metric is
//! `d_Σ(i, j) = Σ_k w_k |χ_{E_k}(i) − χ_{E_k}(j)|`. Every map into a weighted
//! `ℓ¹` space induces one through its level sets (see [`cut_measure_from_map`]),
//! and every cut measure is induced by its tautological map
//! ([`realize_embedding`]).

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::metric::DistanceMatrix;

/// Membership bit vector over `len` points.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Cut {
    len: usize,
    words: Vec<u64>,
}

impl std::fmt::Debug for Cut {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.len <= 64 {
            let bits: String = (0..self.len).map(|i| if self.contains(i) { '1' } else { '0' }).collect();
            write!(f, "Cut({bits})")
        } else {
            write!(f, "Cut(len={}, ones={})", self.len, self.count())
        }
    }
}

impl Cut {
    pub fn empty(len: usize) -> Self {
        Cut { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn full(len: usize) -> Self {
        Self::empty(len).complement()
    }

    pub fn from_indices(len: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut c = Self::empty(len);
        for i in idx {
            c.insert(i);
        }
        c
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut c = Self::empty(len);
        for i in 0..len {
            if f(i) {
                c.insert(i);
            }
        }
        c
    }

    /// Low `len` bits of `mask`.
    pub fn from_mask(len: usize, mask: u64) -> Self {
        assert!(len <= 64);
        let mut c = Self::empty(len);
        if len > 0 {
            c.words[0] = mask & low_bits(len);
        }
        c
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.len
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "index {i} out of range for cut of length {}", self.len);
        self.words[i >> 6] |= 1 << (i & 63);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        self.words[i >> 6] &= !(1 << (i & 63));
    }

    pub fn set(&mut self, i: usize, v: bool) {
        if v {
            self.insert(i)
        } else {
            self.remove(i)
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> Cut {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        if let Some(last) = words.last_mut() {
            let rem = self.len % 64;
            if rem != 0 {
                *last &= low_bits(rem);
            }
        }
        Cut { len: self.len, words }
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + t)
            })
        })
    }

    /// Number of positions where `self` and `other` differ.
    pub fn hamming(&self, other: &Cut) -> usize {
        self.words.iter().zip(&other.words).map(|(a, b)| (a ^ b).count_ones() as usize).sum()
    }

    /// `μ(E) = Σ_{i∈E} μ_i`.
    pub fn measure(&self, weights: &[f64]) -> f64 {
        self.ones().map(|i| weights[i]).sum()
    }

    /// The representative of `{E, Eᶜ}` not containing point 0, and whether it
    /// is the complement of `self`.
    pub fn canonical(&self) -> (Cut, bool) {
        if self.len > 0 && self.contains(0) {
            (self.complement(), true)
        } else {
            (self.clone(), false)
        }
    }

    /// Bit `i` lives in byte `i / 8` at position `i % 8` (least significant first).
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(nbytes);
        for b in 0..nbytes {
            out.push((self.words[b / 8] >> ((b % 8) * 8)) as u8);
        }
        out
    }

    pub fn from_bytes(len: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Format(format!("{} bytes cannot hold exactly {len} bits", bytes.len())));
        }
        let mut c = Self::empty(len);
        for (b, &byte) in bytes.iter().enumerate() {
            c.words[b / 8] |= (byte as u64) << ((b % 8) * 8);
        }
        if c.complement().complement() != c {
            return Err(Error::Format("padding bits are set".into()));
        }
        Ok(c)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(len: usize, s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Format(format!("bad hex cut: {e}")))?;
        Self::from_bytes(len, &bytes)
    }
}

fn low_bits(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// `d_E(i, j) = |χ_E(i) − χ_E(j)|`.
pub fn elementary_cut_metric(cut: &Cut, i: usize, j: usize) -> u8 {
    (cut.contains(i) != cut.contains(j)) as u8
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub cut: Cut,
    pub weight: f64,
}

/// Finite cut measure: positive weights, identical cuts merged.
#[derive(Debug, Clone, PartialEq)]
pub struct CutMeasure {
    n: usize,
    atoms: Vec<Atom>,
    index: HashMap<Cut, usize>,
}

impl CutMeasure {
    pub fn new(n: usize) -> Self {
        CutMeasure { n, atoms: Vec::new(), index: HashMap::new() }
    }

    pub fn from_atoms(n: usize, atoms: impl IntoIterator<Item = (Cut, f64)>) -> Result<Self> {
        let mut m = Self::new(n);
        for (c, w) in atoms {
            m.push(c, w)?;
        }
        Ok(m)
    }

    pub fn num_points(&self) -> usize {
        self.n
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Adds `weight` to `cut`. Zero weights are dropped; negative or
    /// non-finite weights are rejected.
    pub fn push(&mut self, cut: Cut, weight: f64) -> Result<()> {
        if cut.len() != self.n {
            return Err(Error::invalid(format!("cut over {} points pushed into a measure over {}", cut.len(), self.n)));
        }
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::invalid(format!("cut weight must be nonnegative, got {weight}")));
        }
        if weight == 0.0 {
            return Ok(());
        }
        match self.index.get(&cut) {
            Some(&k) => self.atoms[k].weight += weight,
            None => {
                self.index.insert(cut.clone(), self.atoms.len());
                self.atoms.push(Atom { cut, weight });
            }
        }
        Ok(())
    }

    /// Total weight `Σ_k w_k`.
    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// `Σ_k w_k μ(E_k)`.
    pub fn mass(&self, point_weights: &[f64]) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.cut.measure(point_weights)).sum()
    }

    /// Each cut replaced by its canonical representative (complements merged),
    /// dropping the trivial cuts `∅` and the full set. The cut metric is unchanged.
    pub fn canonicalized(&self) -> CutMeasure {
        let mut out = CutMeasure::new(self.n);
        for a in &self.atoms {
            let (c, _) = a.cut.canonical();
            if !c.is_empty() {
                out.push(c, a.weight).expect("weights already validated");
            }
        }
        out
    }

    pub fn scaled(&self, t: f64) -> Result<CutMeasure> {
        CutMeasure::from_atoms(self.n, self.atoms.iter().map(|a| (a.cut.clone(), a.weight * t)))
    }

    /// `{"n": int, "atoms": [{"cut": hex, "weight": float}]}`.
    pub fn to_json(&self) -> Value {
        let atoms: Vec<Value> =
            self.atoms.iter().map(|a| json!({ "cut": a.cut.to_hex(), "weight": a.weight })).collect();
        json!({ "n": self.n, "atoms": atoms })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let raw: MeasureJson = serde_json::from_value(v.clone())?;
        let mut m = CutMeasure::new(raw.n);
        for a in raw.atoms {
            m.push(Cut::from_hex(raw.n, &a.cut)?, a.weight)?;
        }
        Ok(m)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureJson {
    n: usize,
    atoms: Vec<AtomJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomJson {
    cut: String,
    weight: f64,
}

/// `d_Σ` as a dense matrix.
pub fn cut_metric(measure: &CutMeasure) -> DistanceMatrix {
    let n = measure.num_points();
    let mut d = DistanceMatrix::zeros(n);
    let mut inside = Vec::with_capacity(n);
    let mut outside = Vec::with_capacity(n);
    for a in measure.atoms() {
        inside.clear();
        outside.clear();
        for i in 0..n {
            if a.cut.contains(i) {
                inside.push(i);
            } else {
                outside.push(i);
            }
        }
        for &i in &inside {
            for &j in &outside {
                d.add_sym(i, j, a.weight);
            }
        }
    }
    d
}

/// A map from `n` weighted points into `ℓ¹` over `m` weighted coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Map {
    n: usize,
    m: usize,
    values: Vec<f64>,
    pub point_weights: Vec<f64>,
    pub target_weights: Vec<f64>,
}

impl L1Map {
    /// `values` is row-major `n × m`.
    pub fn new(values: Vec<f64>, point_weights: Vec<f64>, target_weights: Vec<f64>) -> Result<Self> {
        let (n, m) = (point_weights.len(), target_weights.len());
        if values.len() != n * m {
            return Err(Error::invalid(format!("{} values for a {n} × {m} map", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("map values must be finite, found {v}")));
        }
        for w in point_weights.iter().chain(&target_weights) {
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::invalid(format!("weights must be positive, found {w}")));
            }
        }
        Ok(L1Map { n, m, values, point_weights, target_weights })
    }

    /// Unit weights on both sides.
    pub fn unweighted(values: Vec<f64>, n: usize, m: usize) -> Result<Self> {
        Self::new(values, vec![1.0; n], vec![1.0; m])
    }

    pub fn num_points(&self) -> usize {
        self.n
    }

    pub fn num_coords(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i, j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `‖f‖ = Σ_i μ_i Σ_j ν_j |f(i, j)|`.
    pub fn norm(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                self.point_weights[i]
                    * (0..self.m).map(|j| self.target_weights[j] * self.value(i, j).abs()).sum::<f64>()
            })
            .sum()
    }

    /// `d_f(i, i') = Σ_j ν_j |f(i, j) − f(i', j)|`.
    pub fn distance_matrix(&self) -> DistanceMatrix {
        DistanceMatrix::from_fn(self.n, |i, k| {
            (0..self.m).map(|j| self.target_weights[j] * (self.value(i, j) - self.value(k, j)).abs()).sum()
        })
    }

    /// CSV: the first row is `mu\nu,ν_1,…,ν_m`; each further row is `μ_i,f(i,1),…,f(i,m)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mu\\nu");
        for w in &self.target_weights {
            let _ = write!(out, ",{w}");
        }
        out.push('\n');
        for i in 0..self.n {
            let _ = write!(out, "{}", self.point_weights[i]);
            for j in 0..self.m {
                let _ = write!(out, ",{}", self.value(i, j));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))?;
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::Format(format!("bad number '{s}': {e}")))
        };
        let mut cells = header.split(',');
        cells.next();
        let target_weights = cells.map(parse).collect::<Result<Vec<_>>>()?;
        let mut point_weights = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let row = line.split(',').map(parse).collect::<Result<Vec<_>>>()?;
            if row.len() != target_weights.len() + 1 {
                return Err(Error::Format(format!(
                    "row has {} cells, expected {}",
                    row.len(),
                    target_weights.len() + 1
                )));
            }
            point_weights.push(row[0]);
            values.extend_from_slice(&row[1..]);
        }
        L1Map::new(values, point_weights, target_weights)
    }
}

/// The tautological map of `Σ`: one coordinate per atom with weight `w_k`
/// and value `χ_{E_k}(i)`. Its `ℓ¹` distances are exactly `d_Σ`.
pub fn realize_embedding(measure: &CutMeasure, point_weights: &[f64]) -> Result<L1Map> {
    let n = measure.num_points();
    let m = measure.len();
    let mut values = vec![0.0; n * m];
    for (k, a) in measure.atoms().iter().enumerate() {
        for i in a.cut.ones() {
            values[i * m + k] = 1.0;
        }
    }
    L1Map::new(values, point_weights.to_vec(), measure.atoms().iter().map(|a| a.weight).collect())
}

/// `{u ≥ t}` for `t > 0`, `∅` for `t = 0`, `{u ≤ t}` for `t < 0`.
pub fn slice(u: &[f64], t: f64) -> Cut {
    let n = u.len();
    if t > 0.0 {
        Cut::from_fn(n, |i| u[i] >= t)
    } else if t < 0.0 {
        Cut::from_fn(n, |i| u[i] <= t)
    } else {
        Cut::empty(n)
    }
}

/// Pushes the Lebesgue measure on thresholds through [`slice`] for one
/// coordinate, scaled by `weight`. Slices are constant on the half-open gaps
/// between consecutive distinct values (and 0), so each gap contributes one atom.
fn push_slices(out: &mut CutMeasure, u: &[f64], weight: f64) -> Result<()> {
    let mut pos: Vec<f64> = u.iter().copied().filter(|v| *v > 0.0).collect();
    let mut neg: Vec<f64> = u.iter().copied().filter(|v| *v < 0.0).collect();
    pos.sort_by(f64::total_cmp);
    pos.dedup();
    neg.sort_by(|a, b| b.total_cmp(a));
    neg.dedup();
    // t ∈ (v_{l-1}, v_l]: {u ≥ t} = {u ≥ v_l}.
    let mut prev = 0.0;
    for &v in &pos {
        out.push(slice(u, v), weight * (v - prev))?;
        prev = v;
    }
    // t ∈ [v_l, v_{l-1}) going down from 0: {u ≤ t} = {u ≤ v_l}.
    let mut prev = 0.0;
    for &v in &neg {
        out.push(slice(u, v), weight * (prev - v))?;
        prev = v;
    }
    Ok(())
}

/// Finite realization of `Σ_f`: every coordinate's slices, weighted by the
/// threshold gap times the coordinate weight.
///
/// `cut_metric` of the result equals `f.distance_matrix()` and its mass
/// `Σ w_k μ(E_k)` equals `‖f‖`.
pub fn cut_measure_from_map(f: &L1Map) -> Result<CutMeasure> {
    let mut out = CutMeasure::new(f.num_points());
    for j in 0..f.num_coords() {
        push_slices(&mut out, &f.column(j), f.target_weights[j])?;
    }
    Ok(out)
}

/// Transpose of `f` with point and coordinate weights exchanged.
pub fn dual_map(f: &L1Map) -> L1Map {
    let (n, m) = (f.num_points(), f.num_coords());
    let mut values = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            values[j * n + i] = f.value(i, j);
        }
    }
    L1Map { n: m, m: n, values, point_weights: f.target_weights.clone(), target_weights: f.point_weights.clone() }
}

/// An ordered decomposition of an index set into lines, each with a
/// transverse weight. Variation is measured by jumps along lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lines {
    pub lines: Vec<Line>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub indices: Vec<usize>,
    pub weight: f64,
}

impl Lines {
    /// A single line `0, 1, …, n-1` of unit weight.
    pub fn single(n: usize) -> Self {
        Lines { lines: vec![Line { indices: (0..n).collect(), weight: 1.0 }] }
    }

    /// Rows and columns of a `rows × cols` array (row-major indices), unit weights.
    pub fn grid_2d(rows: usize, cols: usize) -> Self {
        let mut lines = Vec::new();
        for r in 0..rows {
            lines.push(Line { indices: (0..cols).map(|c| r * cols + c).collect(), weight: 1.0 });
        }
        for c in 0..cols {
            lines.push(Line { indices: (0..rows).map(|r| r * cols + c).collect(), weight: 1.0 });
        }
        Lines { lines }
    }

    pub fn max_index(&self) -> Option<usize> {
        self.lines.iter().flat_map(|l| l.indices.iter().copied()).max()
    }
}

/// `Σ_lines weight · Σ_steps |h(s+1) − h(s)|`.
pub fn line_variation(h: &[f64], lines: &Lines) -> f64 {
    lines.lines.iter().map(|l| l.weight * l.indices.windows(2).map(|w| (h[w[1]] - h[w[0]]).abs()).sum::<f64>()).sum()
}

/// Jump count of `χ_E` along the lines, weighted.
pub fn cut_line_variation(cut: &Cut, lines: &Lines) -> f64 {
    lines
        .lines
        .iter()
        .map(|l| l.weight * l.indices.windows(2).filter(|w| cut.contains(w[0]) != cut.contains(w[1])).count() as f64)
        .sum()
}

/// Both sides of the discrete coarea formula: the line variation of `h`, and
/// `Σ_gaps gap · VAR(χ_{h ≥ t})` over consecutive distinct values of `h`.
pub fn coarea_check(h: &[f64], lines: &Lines) -> (f64, f64) {
    let lhs = line_variation(h, lines);
    let mut levels: Vec<f64> = h.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let rhs = levels
        .windows(2)
        .map(|w| {
            let sup = Cut::from_fn(h.len(), |i| h[i] >= w[1]);
            (w[1] - w[0]) * cut_line_variation(&sup, lines)
        })
        .sum();
    (lhs, rhs)
}

/// `(Σ_k w_k VAR(χ_{E_k}), Σ_j ν_j VAR(f(·, j)))` with `Σ = Σ_f`; the two agree.
pub fn total_variation_identity(f: &L1Map, lines: &Lines) -> Result<(f64, f64)> {
    let sigma = cut_measure_from_map(f)?;
    let total_perimeter = sigma.atoms().iter().map(|a| a.weight * cut_line_variation(&a.cut, lines)).sum();
    let total_variation = (0..f.num_coords()).map(|j| f.target_weights[j] * line_variation(&f.column(j), lines)).sum();
    Ok((total_perimeter, total_variation))
}
