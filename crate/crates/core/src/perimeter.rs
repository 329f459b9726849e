//! Perimeter measures of voxel sets by counting crossings along horizontal
//! lines.
//!
//! A jump of `χ_E` between consecutive voxels of a P-line (Q-line) deposits
//! the line's transverse weight `db·dc` (`da·dc`) at the earlier voxel. The
//! total is the sum of the variations of `χ_E` along the two line families,
//! the perimeter for the horizontal norm `|Ph| + |Qh|`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, GridSet, HalfSpace, Membership, SetMeasure};
use crate::heisenberg::{koranyi_gauge, koranyi_unit_ball_volume, GroupElement};
use crate::levels::LevelSet;

/// Transverse sub-samples per crossing in [`perimeter_in_ball`].
const BALL_QUADRATURE: usize = 16;

/// A nonnegative density per voxel: a discrete Radon measure on the box.
#[derive(Debug, Clone, PartialEq)]
pub struct PerimeterField {
    geometry: GridGeometry,
    density: Vec<f64>,
}

impl PerimeterField {
    pub fn zeros(geometry: GridGeometry) -> Self {
        let n = geometry.len();
        PerimeterField { geometry, density: vec![0.0; n] }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn total(&self) -> f64 {
        self.density.iter().sum()
    }

    /// The field restricted to the voxels satisfying `region`.
    pub fn restrict(&self, region: impl Fn(usize) -> bool) -> PerimeterField {
        let density = self.density.iter().enumerate().map(|(i, &d)| if region(i) { d } else { 0.0 }).collect();
        PerimeterField { geometry: self.geometry.clone(), density }
    }

    pub fn add_scaled(&mut self, other: &PerimeterField, w: f64) -> Result<()> {
        if other.geometry != self.geometry {
            return Err(Error::GeometryMismatch("perimeter fields on different grids".into()));
        }
        for (d, o) in self.density.iter_mut().zip(&other.density) {
            *d += w * o;
        }
        Ok(())
    }

    /// `voxel,density` rows for the voxels carrying mass.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("voxel,density\n");
        for (i, d) in self.density.iter().enumerate() {
            if *d != 0.0 {
                writeln!(out, "{i},{d:e}").unwrap();
            }
        }
        out
    }

    pub fn from_csv(geometry: GridGeometry, text: &str) -> Result<Self> {
        let mut field = PerimeterField::zeros(geometry);
        let mut rows = text.lines();
        if rows.next().map(str::trim) != Some("voxel,density") {
            return Err(Error::Format("missing voxel,density header".into()));
        }
        for (n, row) in rows.enumerate().filter(|(_, r)| !r.trim().is_empty()) {
            let bad = || Error::Format(format!("bad perimeter row {}: {row:?}", n + 2));
            let (i, d) = row.split_once(',').ok_or_else(bad)?;
            let i: usize = i.trim().parse().map_err(|_| bad())?;
            let d: f64 = d.trim().parse().map_err(|_| bad())?;
            if i >= field.density.len() || !(d >= 0.0) {
                return Err(bad());
            }
            field.density[i] = d;
        }
        Ok(field)
    }
}

/// Crossing-count perimeter field of `E` over the whole box.
pub fn perimeter_field(e: &GridSet) -> PerimeterField {
    let g = e.geometry();
    let [na, nb, nc] = g.res;
    let (wp, wq) = g.line_weights();
    let mut field = PerimeterField::zeros(g.clone());
    for i in 0..na {
        for j in 0..nb {
            let shift = g.q_shift(i, j);
            let next_shift = (j + 1 < nb).then(|| g.q_shift(i, j + 1));
            for k in 0..nc {
                let idx = g.index(i, j, k);
                let inside = e.contains(idx);
                if i + 1 < na && e.contains(g.index(i + 1, j, k)) != inside {
                    field.density[idx] += wp;
                }
                if let Some(s2) = next_shift {
                    let k2 = k as i64 + s2 - shift;
                    if k2 >= 0 && (k2 as usize) < nc && e.contains(g.index(i, j + 1, k2 as usize)) != inside {
                        field.density[idx] += wq;
                    }
                }
            }
        }
    }
    field
}

/// `Per(E)` restricted to the voxels satisfying `region`.
pub fn perimeter(e: &GridSet, region: impl Fn(usize) -> bool) -> PerimeterField {
    perimeter_field(e).restrict(region)
}

/// `λ_Σ = Σ_k w_k Per(E_k)` restricted to `region`.
pub fn total_perimeter_measure(sigma: &SetMeasure<GridSet>, region: impl Fn(usize) -> bool) -> Result<PerimeterField> {
    let Some((first, _)) = sigma.atoms().first() else {
        return Err(Error::invalid("empty grid cut measure has no geometry"));
    };
    let mut total = PerimeterField::zeros(first.geometry().clone());
    for (e, w) in sigma.atoms() {
        if e.geometry() != total.geometry() {
            return Err(Error::GeometryMismatch("atoms of a grid cut measure must share one grid".into()));
        }
        total.add_scaled(&perimeter_field(e), *w)?;
    }
    Ok(total.restrict(region))
}

/// `c`-interval of the Korányi ball `B_r(x)` above the horizontal point `(a, b)`.
#[inline]
pub fn ball_c_interval(x: GroupElement, r: f64, a: f64, b: f64) -> Option<(f64, f64)> {
    let (da, db) = (a - x.a, b - x.b);
    let rho2 = da * da + db * db;
    let r2 = r * r;
    if rho2 >= r2 {
        return None;
    }
    let center = x.c + x.a * db + 0.5 * da * db;
    let half = 0.25 * (r2 * r2 - rho2 * rho2).sqrt();
    Some((center - half, center + half))
}

#[inline]
fn overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    (hi.min(b) - lo.max(a)).max(0.0)
}

/// `Per(E)(B_r(x))` for the Korányi ball.
///
/// Each crossing is placed at the midpoint between the two voxel centers; its
/// transverse cell (`b × c` for P-lines, `a × c₀` for Q-lines) is intersected
/// with the ball exactly in the vertical direction and by midpoint quadrature
/// in the horizontal one. Balls thinner than a voxel are handled correctly.
pub fn perimeter_in_ball(e: &GridSet, x: GroupElement, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("ball radius must be positive, got {r}")));
    }
    let g = e.geometry();
    let [na, nb, nc] = g.res;
    let [da, db, dc] = g.cell();
    let amax = g.lo[0].abs().max(g.hi[0].abs());
    let bmax = g.lo[1].abs().max(g.hi[1].abs());
    let c_reach = x.a.abs() * r + 0.5 * r * r + 2.0 * dc + amax * db + bmax * da;
    let range = |d: usize, lo: f64, hi: f64, n: usize, cell: f64| {
        let i0 = ((lo - g.lo[d]) / cell).floor() as i64 - 1;
        let i1 = ((hi - g.lo[d]) / cell).ceil() as i64 + 1;
        (i0.max(0) as usize, (i1.max(0) as usize).min(n))
    };
    let (i0, i1) = range(0, x.a - r, x.a + r, na, da);
    let (j0, j1) = range(1, x.b - r, x.b + r, nb, db);
    let (wp, wq) = (db / BALL_QUADRATURE as f64, da / BALL_QUADRATURE as f64);
    let mut total = 0.0;
    for i in i0..i1 {
        let a_i = g.axis_center(0, i);
        for j in j0..j1 {
            let b_j = g.axis_center(1, j);
            let shift = g.q_shift(i, j);
            let next_shift = (j + 1 < nb).then(|| g.q_shift(i, j + 1));
            let center_c = x.c + x.a * (b_j - x.b);
            let (k0, k1) = range(2, center_c - c_reach, center_c + c_reach, nc, dc);
            for k in k0..k1 {
                let idx = g.index(i, j, k);
                let inside = e.contains(idx);
                let c_k = g.axis_center(2, k);
                if i + 1 < na && e.contains(g.index(i + 1, j, k)) != inside {
                    let a_star = a_i + 0.5 * da;
                    for q in 0..BALL_QUADRATURE {
                        let b = b_j - 0.5 * db + (q as f64 + 0.5) * wp;
                        if let Some((lo, hi)) = ball_c_interval(x, r, a_star, b) {
                            total += wp * overlap(lo, hi, c_k - 0.5 * dc, c_k + 0.5 * dc);
                        }
                    }
                }
                if let Some(s2) = next_shift {
                    let k2 = k as i64 + s2 - shift;
                    if k2 >= 0 && (k2 as usize) < nc && e.contains(g.index(i, j + 1, k2 as usize)) != inside {
                        let b_star = b_j + 0.5 * db;
                        // Line label m = k − s(i, j) has c₀ = c_lo + (m + ½)dc.
                        let c0 = g.lo[2] + ((k as i64 - shift) as f64 + 0.5) * dc;
                        for q in 0..BALL_QUADRATURE {
                            let a = a_i - 0.5 * da + (q as f64 + 0.5) * wq;
                            if let Some((lo, hi)) = ball_c_interval(x, r, a, b_star) {
                                let shear = a * b_star;
                                total += wq * overlap(lo - shear, hi - shear, c0 - 0.5 * dc, c0 + 0.5 * dc);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(total)
}

/// `r · Per(E)(B_r(x)) / μ(B_{2r})`, the quantity bounded below for
/// half-spaces through points of the ball.
pub fn half_space_ratio(e: &GridSet, x: GroupElement, r: f64) -> Result<f64> {
    let mu_2r = koranyi_unit_ball_volume() * (2.0 * r).powi(4);
    Ok(r * perimeter_in_ball(e, x, r)? / mu_2r)
}

/// Perimeter of `E` from a mollified indicator: `χ_E` is averaged over a
/// `3 × 3 × 3` voxel block and `∫ (|Ph| + |Qh|) dμ` is taken with centered
/// differences along P- and Q-lines. Used to cross-check the crossing count.
pub fn mollified_perimeter(e: &GridSet) -> f64 {
    let g = e.geometry();
    let [na, nb, nc] = g.res;
    let [da, db, _] = g.cell();
    let mut h = vec![0.0; g.len()];
    for i in 0..na {
        for j in 0..nb {
            for k in 0..nc {
                let (mut sum, mut cnt) = (0.0, 0.0);
                for ii in i.saturating_sub(1)..(i + 2).min(na) {
                    for jj in j.saturating_sub(1)..(j + 2).min(nb) {
                        for kk in k.saturating_sub(1)..(k + 2).min(nc) {
                            cnt += 1.0;
                            if e.contains(g.index(ii, jj, kk)) {
                                sum += 1.0;
                            }
                        }
                    }
                }
                h[g.index(i, j, k)] = sum / cnt;
            }
        }
    }
    let mut total = 0.0;
    for i in 1..na.saturating_sub(1) {
        for j in 1..nb.saturating_sub(1) {
            let (sm, s0, sp) = (g.q_shift(i, j - 1), g.q_shift(i, j), g.q_shift(i, j + 1));
            for k in 0..nc {
                let ph = (h[g.index(i + 1, j, k)] - h[g.index(i - 1, j, k)]) / (2.0 * da);
                let (kp, km) = (k as i64 + sp - s0, k as i64 + sm - s0);
                let qh = if kp >= 0 && km >= 0 && (kp as usize) < nc && (km as usize) < nc {
                    (h[g.index(i, j + 1, kp as usize)] - h[g.index(i, j - 1, km as usize)]) / (2.0 * db)
                } else {
                    0.0
                };
                total += ph.abs() + qh.abs();
            }
        }
    }
    total * g.voxel_volume()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzDiagnostic {
    /// `sup λ_Σ(B_r(x)) / μ(B_r(x))` over the sweep.
    pub sup_ratio: f64,
    pub argmax: Option<(GroupElement, f64)>,
    pub ratios: Vec<f64>,
}

/// `λ_Σ(B_r(x)) / μ(B_r(x))` over a sweep of balls, and its supremum.
pub fn lipschitz_diagnostic(sigma: &SetMeasure<GridSet>, balls: &[(GroupElement, f64)]) -> Result<LipschitzDiagnostic> {
    let mut ratios = Vec::with_capacity(balls.len());
    let mut out = LipschitzDiagnostic { sup_ratio: 0.0, argmax: None, ratios: Vec::new() };
    for &(x, r) in balls {
        let mut lambda = 0.0;
        for (e, w) in sigma.atoms() {
            if *w != 0.0 {
                lambda += w * perimeter_in_ball(e, x, r)?;
            }
        }
        let ratio = lambda / (koranyi_unit_ball_volume() * r.powi(4));
        if ratio > out.sup_ratio || out.argmax.is_none() {
            out.sup_ratio = out.sup_ratio.max(ratio);
            out.argmax = Some((x, r));
        }
        ratios.push(ratio);
    }
    out.ratios = ratios;
    Ok(out)
}

/// `Per(E)(B_r(x))` for the Korányi ball.
pub trait BallPerimeter {
    fn perimeter_in_ball(&self, x: GroupElement, r: f64) -> Result<f64>;
}

impl BallPerimeter for GridSet {
    fn perimeter_in_ball(&self, x: GroupElement, r: f64) -> Result<f64> {
        perimeter_in_ball(self, x, r)
    }
}

impl BallPerimeter for HalfSpace {
    fn perimeter_in_ball(&self, x: GroupElement, r: f64) -> Result<f64> {
        line_sampled_perimeter(self, x, r, LINE_SAMPLES, LINE_STEPS)
    }
}

impl BallPerimeter for LevelSet {
    fn perimeter_in_ball(&self, x: GroupElement, r: f64) -> Result<f64> {
        line_sampled_perimeter(self, x, r, LINE_SAMPLES, LINE_STEPS)
    }
}

const LINE_SAMPLES: usize = 48;
const LINE_STEPS: usize = 96;
const BISECTIONS: usize = 40;

/// `Per(E)(B_r(x))` for a set known only through membership queries.
///
/// P-lines and Q-lines are left-invariant, so they are traced in coordinates
/// relative to `x`: `(0, β, γ)·exp(sP)` and `(α, 0, γ)·exp(sQ)` with the
/// transverse parameters on an `n × n` midpoint grid of `[−r, r] × [−r²/2, r²/2]`,
/// which covers every line meeting `B_r(e)`. Each line is stepped through
/// `s ∈ [−r, r]`, membership changes are bisected, and crossings inside the
/// ball count with the transverse cell area.
pub fn line_sampled_perimeter(e: &impl Membership, x: GroupElement, r: f64, n: usize, steps: usize) -> Result<f64> {
    if !(r > 0.0) || n == 0 || steps < 2 {
        return Err(Error::invalid(format!("bad line sampling: r = {r}, n = {n}, steps = {steps}")));
    }
    let cell = (2.0 * r / n as f64) * (r * r / n as f64);
    let member = |q: GroupElement| e.member(x * q).ok_or(Error::OutsideBox { clipped_fraction: 1.0 });
    let mut crossings = 0usize;
    for family in 0..2 {
        for u in 0..n {
            let t = -r + (u as f64 + 0.5) * 2.0 * r / n as f64;
            for v in 0..n {
                let gamma = (v as f64 + 0.5 - 0.5 * n as f64) * r * r / n as f64;
                let curve = |s: f64| match family {
                    0 => GroupElement::new(s, t, gamma),
                    _ => GroupElement::new(t, s, gamma + t * s),
                };
                let mut prev_s = -r;
                let mut prev = member(curve(prev_s))?;
                for step in 1..=steps {
                    let s = -r + 2.0 * r * step as f64 / steps as f64;
                    let cur = member(curve(s))?;
                    if cur != prev {
                        let (mut lo, mut hi) = (prev_s, s);
                        for _ in 0..BISECTIONS {
                            let mid = 0.5 * (lo + hi);
                            if member(curve(mid))? == prev {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        if koranyi_gauge(curve(0.5 * (lo + hi))) < r {
                            crossings += 1;
                        }
                    }
                    prev = cur;
                    prev_s = s;
                }
            }
        }
    }
    Ok(crossings as f64 * cell)
}
