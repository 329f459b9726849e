//! Center collapse of cut-measure metrics and the comparison of a blown-up
//! cut metric with its straightened half-space metric.

use serde::{Deserialize, Serialize};

use crate::alpha::{halton_unit_ball_from, radical_inverse, AlphaSampler};
use crate::cuts::{cut_measure_from_map, cut_metric, L1Map};
use crate::error::{Error, Result};
use crate::grid::{HalfSpace, Membership, SetMeasure};
use crate::heisenberg::{cc_distance, cc_norm, koranyi_unit_ball_volume, GroupElement};
use crate::levels::{analytic_slices, LevelSet, TestFunction};
use crate::perimeter::BallPerimeter;
use crate::straighten::{straighten, GoodBadParams};

const CC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Center,
    Horizontal,
}

impl Direction {
    /// `g_t`: `exp(tZ) = (0, 0, t)` or `exp(tP) = (t, 0, 0)`.
    pub fn element(self, t: f64) -> GroupElement {
        match self {
            Direction::Center => GroupElement::center(t),
            Direction::Horizontal => GroupElement::new(t, 0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseOptions {
    /// Points of the averaging neighborhood around `x`.
    pub offsets: usize,
    /// Side lengths of the averaging box around `x`, typically one voxel.
    pub neighborhood: [f64; 3],
    /// Scales below this are reported but left out of the slope fit.
    pub resolution_floor: f64,
}

impl Default for CollapseOptions {
    fn default() -> Self {
        CollapseOptions { offsets: 16, neighborhood: [0.0; 3], resolution_floor: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseReport {
    pub basepoint: GroupElement,
    pub direction: Direction,
    pub scales: Vec<f64>,
    pub numerators: Vec<f64>,
    pub denominators: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Least-squares slope of `log ρ` against `log t` over the fitted scales.
    pub slope: Option<f64>,
    pub resolution_floor: f64,
    /// `max_t |d(g_t x, x) − d(g_t, e)|`; left invariance makes this zero for
    /// central `g_t`.
    pub left_invariance_defect: f64,
}

impl CollapseReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,numerator,denominator,ratio\n");
        for i in 0..self.scales.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.scales[i], self.numerators[i], self.denominators[i], self.ratios[i]
            ));
        }
        out
    }
}

/// Slope of the least-squares line through `(log x, log y)` for `y > 0`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Averaging offsets: a Halton sample of the neighborhood box, centered.
fn offsets(opts: &CollapseOptions) -> Vec<GroupElement> {
    if opts.offsets <= 1 || opts.neighborhood == [0.0; 3] {
        return vec![GroupElement::IDENTITY];
    }
    let [ha, hb, hc] = opts.neighborhood;
    (0..opts.offsets as u64)
        .map(|i| {
            // c carries the center displacement, so it is stratified exactly.
            let u = (i as f64 + 0.5) / opts.offsets as f64;
            GroupElement::new(
                ha * (radical_inverse(i + 1, 2) - 0.5),
                hb * (radical_inverse(i + 1, 3) - 0.5),
                hc * (u - 0.5),
            )
        })
        .collect()
}

fn collapse<S: Membership>(
    sigma: &SetMeasure<S>,
    x: GroupElement,
    t_list: &[f64],
    direction: Direction,
    opts: &CollapseOptions,
) -> Result<CollapseReport> {
    if t_list.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::invalid(format!("scales must be positive: {t_list:?}")));
    }
    let offs = offsets(opts);
    let mut numerators = Vec::new();
    let mut denominators = Vec::new();
    let mut ratios = Vec::new();
    let mut defect = 0.0f64;
    for &t in t_list {
        let g = direction.element(t);
        let mut num = 0.0;
        for o in &offs {
            let base = GroupElement::new(x.a + o.a, x.b + o.b, x.c + o.c);
            num += sigma.distance(base, base * g)?;
        }
        num /= offs.len() as f64;
        let den = cc_distance(x * g, x, CC_TOL)?;
        defect = defect.max((den - cc_norm(g, CC_TOL)?).abs());
        numerators.push(num);
        denominators.push(den);
        ratios.push(num / den);
    }
    let fitted: Vec<usize> = (0..t_list.len()).filter(|&i| t_list[i] >= opts.resolution_floor).collect();
    let slope = log_log_slope(
        &fitted.iter().map(|&i| t_list[i]).collect::<Vec<_>>(),
        &fitted.iter().map(|&i| ratios[i]).collect::<Vec<_>>(),
    );
    Ok(CollapseReport {
        basepoint: x,
        direction,
        scales: t_list.to_vec(),
        numerators,
        denominators,
        ratios,
        slope,
        resolution_floor: opts.resolution_floor,
        left_invariance_defect: defect,
    })
}

/// Ratios `d_Σ(exp(tZ)x, x) / d(exp(tZ)x, x)`, the numerator averaged over
/// a neighborhood of `x`.
pub fn center_collapse<S: Membership>(
    sigma: &SetMeasure<S>,
    x: GroupElement,
    t_list: &[f64],
    opts: &CollapseOptions,
) -> Result<CollapseReport> {
    collapse(sigma, x, t_list, Direction::Center, opts)
}

/// The same ratios along `x · (t, 0, 0)`.
pub fn horizontal_control<S: Membership>(
    sigma: &SetMeasure<S>,
    x: GroupElement,
    t_list: &[f64],
    opts: &CollapseOptions,
) -> Result<CollapseReport> {
    collapse(sigma, x, t_list, Direction::Horizontal, opts)
}

/// Parallel families of half-spaces: for each of `angles` equispaced normals,
/// boundaries every `spacing` across `[−half_width, half_width]` with a
/// per-angle offset, weighted `spacing · π / angles` (a discretized invariant
/// measure on lines, counting each line with both orientations).
pub fn half_space_family(angles: usize, spacing: f64, half_width: f64) -> Result<SetMeasure<HalfSpace>> {
    if angles == 0 || !(spacing > 0.0) || !(half_width > 0.0) {
        return Err(Error::invalid("half-space family needs angles > 0, spacing > 0, half_width > 0"));
    }
    let w = spacing * std::f64::consts::PI / angles as f64;
    let per_angle = (2.0 * half_width / spacing).ceil() as usize;
    let mut out = SetMeasure::new();
    for k in 0..angles {
        let theta = std::f64::consts::TAU * k as f64 / angles as f64;
        let shift = radical_inverse(k as u64 + 1, 2);
        for j in 0..per_angle {
            let p = -half_width + (j as f64 + shift) * spacing;
            let base = GroupElement::new(p * theta.cos(), p * theta.sin(), 0.0);
            out.push(HalfSpace::new(base, theta), w)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleEntry {
    pub r: f64,
    pub delta: f64,
    pub eps: f64,
    pub r0: f64,
    /// `‖(1/r) S*_{x,r} d_Σ − (1/r) S*_{x,r} d_Σ̂‖` over `B_1(e) × B_1(e)`.
    pub discrepancy: f64,
    /// Same with `Σ` restricted to the straightened cuts.
    pub good_discrepancy: f64,
    /// Same norm of `(1/r) S*_{x,r} d_{Σ restricted to the dropped cuts}`.
    pub bad_discrepancy: f64,
    /// `‖(1/r) S*_{x,r} d_Σ‖`, the scale against which discrepancies are small.
    pub reference: f64,
    pub atoms: usize,
    pub good: usize,
    pub demoted: usize,
    pub good_mass: f64,
    pub c0_measured: f64,
    pub skipped: Option<String>,
}

impl ScaleEntry {
    /// `D ≤ D_good + D_bad` holds pointwise, so up to rounding.
    pub fn triangle_holds(&self) -> bool {
        self.discrepancy <= self.good_discrepancy + self.bad_discrepancy + 1e-12 * (1.0 + self.discrepancy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleReport {
    pub basepoint: GroupElement,
    pub pairs: usize,
    pub entries: Vec<ScaleEntry>,
}

impl ScaleReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,delta,eps,discrepancy,good_discrepancy,bad_discrepancy,reference,good_mass\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                e.r, e.delta, e.eps, e.discrepancy, e.good_discrepancy, e.bad_discrepancy, e.reference, e.good_mass
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleOptions {
    pub delta: f64,
    pub eps: f64,
    /// Quasi-random pairs in `B_1(e) × B_1(e)`.
    pub pairs: usize,
    pub ball_samples: usize,
}

impl Default for ScaleOptions {
    fn default() -> Self {
        ScaleOptions { delta: 0.1, eps: 0.1, pairs: 10_000, ball_samples: 256 }
    }
}

/// Slices of `f` whose thresholds cover the values `f` takes on `B_r(x)`:
/// `levels` evenly spaced levels, each weighted by the spacing. Slices that
/// miss the ball separate no pair of its points and are left out.
pub fn slices_near(
    f: TestFunction,
    x: GroupElement,
    r: f64,
    levels: usize,
    domain: ([f64; 3], [f64; 3]),
) -> Result<SetMeasure<LevelSet>> {
    let mut lo = f.eval(x);
    let mut hi = lo;
    for u in halton_unit_ball_from(4096, 1, [2, 3, 5]) {
        let v = f.eval(x * GroupElement::new(r * u.a, r * u.b, r * r * u.c));
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let pad = 0.05 * (hi - lo);
    let sigma = analytic_slices(f, lo - pad, hi + pad, levels)?;
    SetMeasure::from_atoms(sigma.atoms().iter().map(|(l, w)| (l.within(domain.0, domain.1), *w)))
}

/// Blow-up comparison of `d_Σ` with the straightened `d_Σ̂` at each scale.
///
/// `sigma_at(r)` supplies the cut measure used at scale `r`. The `L¹` norm on
/// `B_1(e) × B_1(e)` is `μ(B_1)²` times the average over fixed quasi-random
/// pairs `(u, v)`, evaluated at `x · δ_r(u)`, `x · δ_r(v)`.
pub fn scale_comparison<S, F>(sigma_at: F, x: GroupElement, r_list: &[f64], opts: &ScaleOptions) -> Result<ScaleReport>
where
    S: Membership + BallPerimeter,
    F: Fn(f64) -> Result<SetMeasure<S>>,
{
    if r_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid(format!("scales must be decreasing: {r_list:?}")));
    }
    let us = halton_unit_ball_from(opts.pairs, 1, [2, 3, 5]);
    let vs = halton_unit_ball_from(opts.pairs, 1, [7, 11, 13]);
    let sampler = AlphaSampler::new(opts.ball_samples);
    let mu2 = koranyi_unit_ball_volume().powi(2);
    let mut entries = Vec::new();
    for &r in r_list {
        let params = GoodBadParams::new(opts.delta, opts.eps, r);
        let mut entry = ScaleEntry {
            r,
            delta: opts.delta,
            eps: opts.eps,
            r0: params.r0,
            discrepancy: f64::NAN,
            good_discrepancy: f64::NAN,
            bad_discrepancy: f64::NAN,
            reference: f64::NAN,
            atoms: 0,
            good: 0,
            demoted: 0,
            good_mass: 0.0,
            c0_measured: 0.0,
            skipped: None,
        };
        let result = sigma_at(r).and_then(|sigma| {
            let st = straighten(&sigma, x, &params, &sampler, false)?;
            Ok((sigma, st))
        });
        let (sigma, st) = match result {
            Ok(v) => v,
            Err(e) => {
                entry.skipped = Some(e.to_string());
                entries.push(entry);
                continue;
            }
        };
        let mut kept = vec![false; sigma.len()];
        for a in &st.atoms {
            kept[a.atom] = true;
        }
        let (mut d, mut dg, mut db, mut dref) = (0.0, 0.0, 0.0, 0.0);
        let mut failure = None;
        for (u, v) in us.iter().zip(&vs) {
            let p = x * GroupElement::new(r * u.a, r * u.b, r * r * u.c);
            let q = x * GroupElement::new(r * v.a, r * v.b, r * r * v.c);
            let (mut all, mut good) = (0.0, 0.0);
            for (k, (e, w)) in sigma.atoms().iter().enumerate() {
                match (e.member(p), e.member(q)) {
                    (Some(a), Some(b)) => {
                        if a != b {
                            all += w;
                            if kept[k] {
                                good += w;
                            }
                        }
                    }
                    _ => failure = Some(Error::OutsideBox { clipped_fraction: 1.0 }),
                }
            }
            let hat = st.measure.distance(p, q)?;
            d += (all - hat).abs();
            dg += (good - hat).abs();
            db += all - good;
            dref += all;
        }
        if let Some(e) = failure {
            entry.skipped = Some(e.to_string());
            entries.push(entry);
            continue;
        }
        let scale = mu2 / (r * us.len() as f64);
        entry.discrepancy = d * scale;
        entry.good_discrepancy = dg * scale;
        entry.bad_discrepancy = db * scale;
        entry.reference = dref * scale;
        entry.atoms = sigma.len();
        entry.good = st.atoms.len();
        entry.demoted = st.demoted.len();
        entry.good_mass = st.measure.total_weight();
        entry.c0_measured = entry.good_mass * opts.delta / r;
        entries.push(entry);
    }
    Ok(ScaleReport { basepoint: x, pairs: us.len(), entries })
}

/// Moving characteristic function `t ↦ χ_{[0,t]}` on `n` equally spaced
/// points of `[0, 1]`; returns `max |d_f(t_i, t_j) − |t_i − t_j||` with `d_f`
/// computed through the cut metric of the map's slices.
pub fn moving_char_check(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid(format!("need n ≥ 2, got {n}")));
    }
    let m = n - 1;
    let t: Vec<f64> = (0..n).map(|i| i as f64 / m as f64).collect();
    let mut values = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..i {
            values[i * m + j] = 1.0;
        }
    }
    let lengths: Vec<f64> = (0..m).map(|j| t[j + 1] - t[j]).collect();
    let f = L1Map::new(values, vec![1.0; n], lengths)?;
    let d = cut_metric(&cut_measure_from_map(&f)?);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((d.get(i, j) - (t[i] - t[j]).abs()).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [0.1, 0.2, 0.4];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.5)).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(log_log_slope(&[1.0], &[1.0]), None);
    }

    #[test]
    fn half_spaces_do_not_see_the_center() {
        let sigma = SetMeasure::from_atoms(
            (0..8).map(|k| (HalfSpace::new(GroupElement::new(0.01 * k as f64, 0.0, 0.0), 0.8 * k as f64), 1.0)),
        )
        .unwrap();
        let x = GroupElement::new(0.02, 0.01, 0.0);
        let rep = center_collapse(&sigma, x, &[0.1, 0.01], &CollapseOptions::default()).unwrap();
        assert_eq!(rep.ratios, vec![0.0, 0.0]);
        assert!(rep.left_invariance_defect < 1e-9);
        let empty: SetMeasure<HalfSpace> = SetMeasure::new();
        assert_eq!(horizontal_control(&empty, x, &[0.1], &CollapseOptions::default()).unwrap().ratios, vec![0.0]);
    }

    #[test]
    fn moving_char_small() {
        assert_eq!(moving_char_check(2).unwrap(), 0.0);
        assert!(moving_char_check(1).is_err());
        assert!(moving_char_check(30).unwrap() < 1e-12);
    }

    #[test]
    fn half_space_measure_has_zero_discrepancy() {
        let x = GroupElement::new(0.1, 0.1, 0.0);
        let hs: Vec<(HalfSpace, f64)> =
            (0..6).map(|k| (HalfSpace::new(x * GroupElement::new(0.01 * k as f64, 0.0, 0.0), k as f64), 0.1)).collect();
        let opts = ScaleOptions { pairs: 500, ..ScaleOptions::default() };
        let rep = scale_comparison(|_| SetMeasure::from_atoms(hs.clone()), x, &[0.2, 0.1], &opts).unwrap();
        for e in &rep.entries {
            assert!(e.skipped.is_none());
            assert!(e.triangle_holds());
            assert!(e.discrepancy < 0.05 * e.reference, "{e:?}");
        }
    }
}
