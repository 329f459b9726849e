//! Optimal `L¹` distortion of finite metric spaces through the cut cone.
//!
//! The LP has one variable `w_E ≥ 0` per cut and a scale `s ≥ 0`:
//! maximize `s` subject to `d_Σ(p) ≤ d(p)` and `s·d(p) ≤ d_Σ(p)` for every
//! pair `p`. The optimal distortion is `1/s*`. Rows are divided by `d(p)`.
//!
//! Distortion is normalized as a non-expansive embedding with co-Lipschitz
//! constant `1/distortion`.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cuts::{cut_metric, Cut, CutMeasure};
use crate::error::{Error, Result};
use crate::metric::{DistanceMatrix, FiniteMetricSpace};
use crate::simplex::{PivotRule, SolveStatus, Tableau};

pub const ENUMERATION_CAP: usize = 16;
/// Largest space on which separation enumerates every cut.
pub const EXHAUSTIVE_SEPARATION_CAP: usize = 20;

const PRICE_EPS: f64 = 1e-9;
const ROW_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    /// No cut outside the working family can improve the LP.
    ExactCertified,
    /// The witness embedding is real; its distortion bounds the optimum from above.
    HeuristicUpperEmbedding,
    /// Only a dual bound is known. Not produced by the solvers in this crate.
    HeuristicLowerBound,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LpStats {
    pub pivots: usize,
    pub iterations: usize,
    pub columns: usize,
    pub rows: usize,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionResult {
    pub distortion: f64,
    pub witness: CutMeasure,
    pub status: Status,
    pub lp_stats: LpStats,
}

impl DistortionResult {
    /// `{distortion, status, n_cuts, witness_ref, lp_stats, normalization}`.
    /// `witness_ref` names where the caller stored the witness.
    pub fn to_json(&self, witness_ref: &str) -> Value {
        json!({
            "distortion": finite_or_null(self.distortion),
            "status": self.status,
            "n_cuts": self.witness.len(),
            "witness_ref": witness_ref,
            "lp_stats": self.lp_stats,
            "normalization": "non-expansive, co-Lipschitz constant 1/distortion",
        })
    }
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// All `2^{n−1} − 1` nontrivial cuts up to complement, as the subsets of
/// `{1, …, n−1}` in increasing bitmask order.
pub fn enumerate_cuts(n: usize, cap: usize) -> Result<Vec<Cut>> {
    if n > cap {
        return Err(Error::OverCap { what: "cut enumeration", requested: n, cap, estimate: 1u64 << (n.min(64) - 1) });
    }
    if n < 2 {
        return Ok(Vec::new());
    }
    Ok((1u64..(1 << (n - 1))).map(|m| Cut::from_mask(n, m << 1)).collect())
}

struct Pairs {
    list: Vec<(usize, usize)>,
    dist: Vec<f64>,
}

fn pairs_of(space: &FiniteMetricSpace) -> Result<Pairs> {
    space.validate(1e-9)?;
    let n = space.len();
    let mut list = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    let mut dist = Vec::with_capacity(list.capacity());
    for i in 0..n {
        for j in (i + 1)..n {
            list.push((i, j));
            dist.push(space.dist.get(i, j));
        }
    }
    Ok(Pairs { list, dist })
}

/// Normalizes `Σ` to be non-expansive with its largest ratio exactly 1 and
/// returns `(witness, distortion)`.
fn normalize(space: &FiniteMetricSpace, measure: &CutMeasure) -> (CutMeasure, f64) {
    let d = cut_metric(measure);
    let (lo, hi) = ratio_range(&space.dist, &d);
    if hi <= 0.0 {
        return (measure.clone(), f64::INFINITY);
    }
    let w = measure.scaled(1.0 / hi).expect("positive scale");
    let distortion = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    (w, distortion)
}

fn ratio_range(d: &DistanceMatrix, ds: &DistanceMatrix) -> (f64, f64) {
    let n = d.len();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = ds.get(i, j) / d.get(i, j);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo, hi)
}

/// Master LP with a working set of cut columns and pair rows.
struct Master {
    t: Tableau,
    s_col: usize,
    cuts: Vec<Cut>,
    cut_cols: Vec<usize>,
    known: HashSet<Cut>,
    /// Active rows: (pair index, is_upper) → tableau row.
    rows: Vec<(usize, bool)>,
    active_upper: Vec<bool>,
    active_lower: Vec<bool>,
}

impl Master {
    fn new(num_pairs: usize) -> Self {
        let mut t = Tableau::new();
        let s_col = t.add_column(&[], 1.0);
        Master {
            t,
            s_col,
            cuts: Vec::new(),
            cut_cols: Vec::new(),
            known: HashSet::new(),
            rows: Vec::new(),
            active_upper: vec![false; num_pairs],
            active_lower: vec![false; num_pairs],
        }
    }

    fn add_row(&mut self, pairs: &Pairs, p: usize, upper: bool) -> Result<()> {
        let (i, j) = pairs.list[p];
        let inv = 1.0 / pairs.dist[p];
        let mut entries: Vec<(usize, f64)> = self
            .cuts
            .iter()
            .zip(&self.cut_cols)
            .filter(|(c, _)| c.contains(i) != c.contains(j))
            .map(|(_, &col)| (col, if upper { inv } else { -inv }))
            .collect();
        if !upper {
            entries.push((self.s_col, 1.0));
        }
        self.t.add_row(&entries, if upper { 1.0 } else { 0.0 })?;
        self.rows.push((p, upper));
        if upper {
            self.active_upper[p] = true;
        } else {
            self.active_lower[p] = true;
        }
        Ok(())
    }

    /// Adds the canonical form of `cut` unless trivial or already present.
    fn add_cut(&mut self, pairs: &Pairs, cut: Cut) -> bool {
        let (c, _) = cut.canonical();
        if c.is_empty() || self.known.contains(&c) {
            return false;
        }
        let mut entries = Vec::new();
        for (r, &(p, upper)) in self.rows.iter().enumerate() {
            let (i, j) = pairs.list[p];
            if c.contains(i) != c.contains(j) {
                let inv = 1.0 / pairs.dist[p];
                entries.push((r, if upper { inv } else { -inv }));
            }
        }
        let col = self.t.add_column(&entries, 0.0);
        self.known.insert(c.clone());
        self.cuts.push(c);
        self.cut_cols.push(col);
        true
    }

    fn measure(&self, n: usize) -> CutMeasure {
        let x = self.t.values();
        let mut m = CutMeasure::new(n);
        for (c, &col) in self.cuts.iter().zip(&self.cut_cols) {
            if x[col] > 0.0 {
                m.push(c.clone(), x[col]).expect("simplex values are nonnegative");
            }
        }
        m
    }

    /// Dual weight `(z_p − y_p)/d_p` on every pair.
    fn pricing_weights(&self, pairs: &Pairs, n: usize) -> Vec<f64> {
        let duals = self.t.duals();
        let mut w = vec![0.0; n * n];
        for (r, &(p, upper)) in self.rows.iter().enumerate() {
            let (i, j) = pairs.list[p];
            let v = if upper { -duals[r] } else { duals[r] } / pairs.dist[p];
            w[i * n + j] += v;
            w[j * n + i] += v;
        }
        w
    }
}

/// Exhaustive cut LP, Bland's rule, cuts in [`enumerate_cuts`] order.
pub fn min_distortion_exact(space: &FiniteMetricSpace) -> Result<DistortionResult> {
    let n = space.len();
    let cuts = enumerate_cuts(n, ENUMERATION_CAP)?;
    let pairs = pairs_of(space)?;
    if n < 2 {
        return Ok(DistortionResult {
            distortion: 1.0,
            witness: CutMeasure::new(n),
            status: Status::ExactCertified,
            lp_stats: LpStats::default(),
        });
    }
    let mut m = Master::new(pairs.list.len());
    for p in 0..pairs.list.len() {
        m.add_row(&pairs, p, true)?;
        m.add_row(&pairs, p, false)?;
    }
    for c in cuts {
        m.add_cut(&pairs, c);
    }
    if m.t.solve(PivotRule::Bland, usize::MAX)? != SolveStatus::Optimal {
        unreachable!("unbounded pivot budget");
    }
    let (witness, distortion) = normalize(space, &m.measure(n));
    Ok(DistortionResult {
        distortion,
        witness,
        status: Status::ExactCertified,
        lp_stats: LpStats {
            pivots: m.t.pivots,
            iterations: 1,
            columns: m.cuts.len(),
            rows: m.rows.len(),
            budget_exhausted: false,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColgenOptions {
    /// Outer iterations (master solve + pricing + row check).
    pub budget: usize,
    pub seed: u64,
    /// Random restarts of the bit-flip separation per pricing round.
    pub restarts: usize,
    pub max_new_columns: usize,
    /// Rows of each family added per row-generation round, per point.
    pub rows_per_point: usize,
    /// Enumerate all cuts in pricing when `n` is at most this.
    pub exhaustive_cap: usize,
}

impl Default for ColgenOptions {
    fn default() -> Self {
        ColgenOptions {
            budget: 500,
            seed: 0,
            restarts: 64,
            max_new_columns: 32,
            rows_per_point: 1,
            exhaustive_cap: EXHAUSTIVE_SEPARATION_CAP,
        }
    }
}

/// Singleton cuts, metric balls at every occurring radius, and coordinate
/// half-spaces when the points carry coordinates.
pub fn seed_cuts(space: &FiniteMetricSpace) -> Vec<Cut> {
    let n = space.len();
    let mut out = Vec::new();
    for i in 0..n {
        out.push(Cut::from_indices(n, [i]));
    }
    for i in 0..n {
        let mut radii: Vec<f64> = (0..n).map(|j| space.dist.get(i, j)).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        for &r in &radii {
            out.push(Cut::from_fn(n, |j| space.dist.get(i, j) <= r));
        }
    }
    if let Some(coords) = &space.coords {
        let axes: [fn(&crate::heisenberg::GroupElement) -> f64; 4] =
            [|g| g.a, |g| g.b, |g| g.c, |g| g.c - g.a * g.b / 2.0];
        for f in axes {
            let vals: Vec<f64> = coords.iter().map(f).collect();
            let mut levels = vals.clone();
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            for &t in &levels {
                out.push(Cut::from_fn(n, |j| vals[j] <= t));
            }
        }
    }
    out
}

/// Flips `i` in a max-cut state: `gain[j]` is the change of the cut weight
/// when flipping `j`.
fn flip(side: &mut [bool], gain: &mut [f64], w: &[f64], n: usize, i: usize) {
    side[i] = !side[i];
    gain[i] = -gain[i];
    let row = &w[i * n..(i + 1) * n];
    for j in 0..n {
        if j != i {
            // Edge (i, j) switched between cut and uncut.
            let now_cut = side[i] != side[j];
            gain[j] += if now_cut { -2.0 * row[j] } else { 2.0 * row[j] };
        }
    }
}

fn cut_value(side: &[bool], w: &[f64], n: usize) -> f64 {
    let mut v = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            if side[i] != side[j] {
                v += w[i * n + j];
            }
        }
    }
    v
}

fn local_search(w: &[f64], n: usize, start: Vec<bool>) -> (Vec<bool>, f64) {
    let mut side = start;
    let mut gain = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if j != i {
                let cut = side[i] != side[j];
                gain[i] += if cut { -w[i * n + j] } else { w[i * n + j] };
            }
        }
    }
    let mut value = cut_value(&side, w, n);
    loop {
        let mut best = None;
        for i in 0..n {
            if gain[i] > 1e-12 && best.is_none_or(|b: usize| gain[i] > gain[b]) {
                best = Some(i);
            }
        }
        let Some(i) = best else { break };
        value += gain[i];
        flip(&mut side, &mut gain, w, n, i);
    }
    (side, value)
}

/// Every cut with positive weight under `w`, found by Gray-code enumeration;
/// returns the best `keep` of them.
fn exhaustive_separation(w: &[f64], n: usize, keep: usize) -> Vec<(f64, Vec<bool>)> {
    let mut side = vec![false; n];
    let mut gain = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if j != i {
                gain[i] += w[i * n + j];
            }
        }
    }
    let mut value = 0.0;
    let mut found: Vec<(f64, Vec<bool>)> = Vec::new();
    let mut threshold = PRICE_EPS;
    let total = 1u64 << (n - 1);
    for k in 1..total {
        let i = k.trailing_zeros() as usize + 1;
        value += gain[i];
        flip(&mut side, &mut gain, w, n, i);
        if value > threshold {
            found.push((value, side.clone()));
            if found.len() >= 4 * keep {
                found.sort_by(|a, b| b.0.total_cmp(&a.0));
                found.truncate(keep);
                threshold = found.last().map_or(PRICE_EPS, |f| f.0);
            }
        }
    }
    found.sort_by(|a, b| b.0.total_cmp(&a.0));
    found.truncate(keep);
    found
}

/// Row-and-column generation over the cut cone.
///
/// Pricing is a weighted max-cut: a cut enters when
/// `Σ_{p cut} (z_p − y_p)/d_p > 0` for the upper duals `y` and lower duals `z`.
/// Bit-flip local search with random restarts runs first; for
/// `n ≤ exhaustive_cap` a full enumeration certifies that nothing is missed.
/// Pair rows start with the closest pairs and grow with the most violated ones.
pub fn min_distortion_colgen(space: &FiniteMetricSpace, opts: &ColgenOptions) -> Result<DistortionResult> {
    let n = space.len();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 points, got {n}")));
    }
    let pairs = pairs_of(space)?;
    let np = pairs.list.len();
    let mut m = Master::new(np);
    let dmin = pairs.dist.iter().copied().fold(f64::INFINITY, f64::min);
    let all_rows = np <= 1000;
    for p in 0..np {
        if all_rows || pairs.dist[p] <= 2.0 * dmin {
            m.add_row(&pairs, p, true)?;
            m.add_row(&pairs, p, false)?;
        }
    }
    for c in seed_cuts(space) {
        m.add_cut(&pairs, c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut stats = LpStats::default();
    let mut certified = false;
    let mut converged = false;
    let mut best = (CutMeasure::new(n), f64::INFINITY);
    while stats.iterations < opts.budget {
        stats.iterations += 1;
        m.t.solve(PivotRule::Dantzig, usize::MAX)?;

        // Row generation: add the pairs the current solution violates.
        let current = m.measure(n);
        let ds = cut_metric(&current);
        let (witness, distortion) = normalize(space, &current);
        if distortion < best.1 {
            best = (witness, distortion);
        }
        let s = m.t.value(m.s_col);
        let mut upper: Vec<(f64, usize)> = Vec::new();
        let mut lower: Vec<(f64, usize)> = Vec::new();
        for p in 0..np {
            let (i, j) = pairs.list[p];
            let ratio = ds.get(i, j) / pairs.dist[p];
            if !m.active_upper[p] && ratio > 1.0 + ROW_EPS {
                upper.push((ratio - 1.0, p));
            }
            if !m.active_lower[p] && ratio < s - ROW_EPS {
                lower.push((s - ratio, p));
            }
        }
        let rows_added = !upper.is_empty() || !lower.is_empty();
        let cap = opts.rows_per_point.max(1) * n;
        for (list, is_upper) in [(&mut upper, true), (&mut lower, false)] {
            list.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for &(_, p) in list.iter().take(cap) {
                m.add_row(&pairs, p, is_upper)?;
            }
        }

        // Column generation. Duals of rows added just now are zero, so this
        // prices against the previous row set; certification waits for a
        // round with no new rows.
        let w = m.pricing_weights(&pairs, n);
        let mut candidates: Vec<(f64, Vec<bool>)> = Vec::new();
        for _ in 0..opts.restarts {
            let start: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let (side, v) = local_search(&w, n, start);
            if v > PRICE_EPS {
                candidates.push((v, side));
            }
        }
        let exhaustive = n <= opts.exhaustive_cap;
        if candidates.is_empty() && exhaustive && !rows_added {
            candidates = exhaustive_separation(&w, n, opts.max_new_columns);
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut added = 0;
        for (_, side) in candidates {
            if added >= opts.max_new_columns {
                break;
            }
            if m.add_cut(&pairs, Cut::from_fn(n, |i| side[i])) {
                added += 1;
            }
        }
        if added == 0 && !rows_added {
            certified = exhaustive;
            converged = true;
            break;
        }
    }
    stats.budget_exhausted = !converged;
    stats.pivots = m.t.pivots;
    stats.columns = m.cuts.len();
    stats.rows = m.rows.len();
    let last = normalize(space, &m.measure(n));
    let (witness, distortion) = if last.1 <= best.1 { last } else { best };
    Ok(DistortionResult {
        distortion,
        witness,
        status: if certified { Status::ExactCertified } else { Status::HeuristicUpperEmbedding },
        lp_stats: stats,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    /// `max_p (d_Σ(p) − d(p))⁺`.
    pub max_upper_violation: f64,
    /// `max_p (d(p)/distortion − d_Σ(p))⁺`.
    pub max_lower_violation: f64,
    /// `max ratio / min ratio` of the witness, `∞` when some pair collapses.
    pub achieved_distortion: f64,
    pub infinite: bool,
}

/// Recomputes `d_Σ` from the witness and checks both constraint families.
pub fn verify_witness(space: &FiniteMetricSpace, result: &DistortionResult) -> WitnessReport {
    let ds = cut_metric(&result.witness);
    let n = space.len();
    let s = if result.distortion.is_finite() && result.distortion > 0.0 { 1.0 / result.distortion } else { 0.0 };
    let (mut up, mut low) = (0.0_f64, 0.0_f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = space.dist.get(i, j);
            let e = ds.get(i, j);
            up = up.max(e - d);
            low = low.max(s * d - e);
        }
    }
    let (lo, hi) = ratio_range(&space.dist, &ds);
    let achieved = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    WitnessReport {
        max_upper_violation: up,
        max_lower_violation: low,
        achieved_distortion: achieved,
        infinite: !achieved.is_finite(),
    }
}

/// Makes a sequence of results over nested isometric subspaces monotone.
///
/// `index_sets[k]` lists the points of space `k` inside space `k + 1`. The
/// witness of space `k + 1` restricted to space `k` is an embedding of space
/// `k`; whenever it is better, it replaces the result for space `k`. Runs from
/// the largest space down so improvements propagate.
pub fn enforce_nested_monotonicity(
    spaces: &[FiniteMetricSpace],
    index_sets: &[Vec<usize>],
    results: &mut [DistortionResult],
) {
    assert_eq!(spaces.len(), results.len());
    assert_eq!(index_sets.len() + 1, spaces.len());
    for k in (0..index_sets.len()).rev() {
        let idx = &index_sets[k];
        let sub = &spaces[k];
        let mut restricted = CutMeasure::new(idx.len());
        for a in results[k + 1].witness.atoms() {
            let c = Cut::from_fn(idx.len(), |i| a.cut.contains(idx[i]));
            let (c, _) = c.canonical();
            if !c.is_empty() {
                restricted.push(c, a.weight).expect("weights are positive");
            }
        }
        let (witness, distortion) = normalize(sub, &restricted);
        if distortion < results[k].distortion {
            let r = &mut results[k];
            r.distortion = distortion;
            r.witness = witness;
            if r.status == Status::ExactCertified {
                r.status = Status::HeuristicUpperEmbedding;
            }
        }
    }
}
