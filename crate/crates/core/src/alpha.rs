//! Closeness of a set to the half-spaces through a point, blow-ups, and the
//! Bad/Good dichotomy.
//!
//! `α(E, x, r)` is the smallest normalized measure of `(E △ H) ∩ B_r(x)` over
//! vertical half-spaces `H` whose boundary contains `x`. The ball integral is
//! replaced by an average over a fixed quasi-random sample `u_k` of the unit
//! Korányi ball, pushed to `y_k = x · δ_r(u_k)`. Since `H` depends only on its
//! normal angle `θ`, `y_k ∈ H` iff `cos(θ − φ_k) ≥ 0` with `φ_k` the polar angle
//! of `u_k`, and the minimum over `θ` is found exactly by sweeping the events
//! `φ_k ± π/2`.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, GridSet, HalfSpace, Membership, SetMeasure};
use crate::heisenberg::{koranyi_gauge, GroupElement};

pub const DEFAULT_BALL_SAMPLES: usize = 256;

/// Van der Corput radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut out) = (inv, 0.0);
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

/// The first `n` Halton points of the unit Korányi ball, by rejection from
/// its bounding box in symmetrized coordinates. Haar-uniform in the limit.
pub fn halton_unit_ball(n: usize) -> Vec<GroupElement> {
    halton_unit_ball_from(n, 1, [2, 3, 5])
}

/// As [`halton_unit_ball`], starting at sequence index `start` with the given bases.
pub fn halton_unit_ball_from(n: usize, start: u64, bases: [u64; 3]) -> Vec<GroupElement> {
    let mut out = Vec::with_capacity(n);
    let mut i = start;
    while out.len() < n {
        let x = 2.0 * radical_inverse(i, bases[0]) - 1.0;
        let y = 2.0 * radical_inverse(i, bases[1]) - 1.0;
        let z = 0.5 * radical_inverse(i, bases[2]) - 0.25;
        i += 1;
        let g = GroupElement::from_symmetrized(x, y, z);
        if koranyi_gauge(g) <= 1.0 && (x != 0.0 || y != 0.0) {
            out.push(g);
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Event {
    angle: f64,
    sample: u32,
    enters: bool,
}

/// Fixed ball samples with their precomputed sweep events.
#[derive(Debug, Clone)]
pub struct AlphaSampler {
    samples: Vec<GroupElement>,
    phi: Vec<f64>,
    events: Vec<Event>,
}

impl Default for AlphaSampler {
    fn default() -> Self {
        Self::new(DEFAULT_BALL_SAMPLES)
    }
}

/// `α` with its minimizing half-space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Alpha {
    pub value: f64,
    pub half_space: HalfSpace,
}

impl AlphaSampler {
    pub fn new(samples: usize) -> Self {
        let samples = halton_unit_ball(samples.max(1));
        let phi: Vec<f64> = samples.iter().map(|u| u.b.atan2(u.a)).collect();
        let mut events = Vec::with_capacity(2 * phi.len());
        for (k, &p) in phi.iter().enumerate() {
            // θ crossing φ − π/2 upwards brings y_k into H; crossing φ + π/2 takes it out.
            events.push(Event { angle: (p - FRAC_PI_2).rem_euclid(TAU), sample: k as u32, enters: true });
            events.push(Event { angle: (p + FRAC_PI_2).rem_euclid(TAU), sample: k as u32, enters: false });
        }
        events.sort_by(|x, y| x.angle.total_cmp(&y.angle).then(x.sample.cmp(&y.sample)));
        AlphaSampler { samples, phi, events }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn unit_samples(&self) -> &[GroupElement] {
        &self.samples
    }

    /// `x · δ_r(u_k)` for every sample.
    pub fn points(&self, x: GroupElement, r: f64) -> impl Iterator<Item = GroupElement> + '_ {
        self.samples.iter().map(move |u| x * GroupElement::new(r * u.a, r * u.b, r * r * u.c))
    }

    /// Membership of `E` at the pushed samples; `OutsideBox` if any sample is unknown.
    pub fn memberships(&self, e: &impl Membership, x: GroupElement, r: f64) -> Result<Vec<bool>> {
        let mut out = Vec::with_capacity(self.samples.len());
        let mut missing = 0usize;
        for y in self.points(x, r) {
            match e.member(y) {
                Some(v) => out.push(v),
                None => {
                    missing += 1;
                    out.push(false);
                }
            }
        }
        if missing > 0 {
            return Err(Error::OutsideBox { clipped_fraction: missing as f64 / self.samples.len() as f64 });
        }
        Ok(out)
    }

    /// Whether every pushed sample of `B_r(x)` is known to `E`.
    pub fn ball_fits(&self, e: &impl Membership, x: GroupElement, r: f64) -> bool {
        self.points(x, r).all(|y| e.member(y).is_some())
    }

    /// Sample-average of `|χ_E − χ_H|` for the half-space through `x` with normal `θ`.
    pub fn discrepancy(&self, inside: &[bool], theta: f64) -> f64 {
        let bad = self.phi.iter().zip(inside).filter(|(&p, &e)| e != ((theta - p).cos() > 0.0)).count();
        bad as f64 / self.samples.len() as f64
    }

    /// `min_θ` of [`Self::discrepancy`] with the midpoint of the best arc.
    pub fn minimize(&self, inside: &[bool]) -> (f64, f64) {
        let m = self.samples.len();
        let ev = &self.events;
        let n = ev.len();
        let wrap_theta = (0.5 * (ev[n - 1].angle + ev[0].angle + TAU)).rem_euclid(TAU);
        let mut cost = (self.discrepancy(inside, wrap_theta) * m as f64).round() as i64;
        let (mut best, mut best_theta) = (cost, wrap_theta);
        for l in 0..n {
            let e = ev[l];
            let in_e = inside[e.sample as usize];
            // Entering H fixes a member and breaks a non-member; leaving does the reverse.
            cost += if e.enters == in_e { -1 } else { 1 };
            let next = if l + 1 < n { ev[l + 1].angle } else { ev[0].angle + TAU };
            if next > e.angle && cost < best {
                best = cost;
                best_theta = (0.5 * (e.angle + next)).rem_euclid(TAU);
            }
        }
        (best as f64 / m as f64, best_theta)
    }

    /// `α(E, x, r)` and the minimizing half-space through `x`.
    pub fn alpha(&self, e: &impl Membership, x: GroupElement, r: f64) -> Result<Alpha> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!("ball radius must be positive, got {r}")));
        }
        let inside = self.memberships(e, x, r)?;
        let (value, theta) = self.minimize(&inside);
        Ok(Alpha { value, half_space: HalfSpace::new(x, theta) })
    }
}

/// `α(E, x, r)` with the default sample count.
pub fn alpha(e: &impl Membership, x: GroupElement, r: f64) -> Result<Alpha> {
    AlphaSampler::default().alpha(e, x, r)
}

/// `S_{x,r}^{-1}(E)` resampled onto `out`: voxel `v` is a member iff
/// `x · δ_r(center(v)) ∈ E`.
pub fn blow_up(e: &impl Membership, x: GroupElement, r: f64, out: &GridGeometry) -> Result<GridSet> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("blow-up scale must be positive, got {r}")));
    }
    let mut missing = 0usize;
    let set = GridSet::from_fn(out.clone(), |p| match e.member(x * GroupElement::new(r * p.a, r * p.b, r * r * p.c)) {
        Some(v) => v,
        None => {
            missing += 1;
            false
        }
    });
    if missing > 0 {
        return Err(Error::OutsideBox { clipped_fraction: missing as f64 / out.len() as f64 });
    }
    Ok(set)
}

/// Sampled Bad-set test: `x ∈ Bad_{ε,R}(E)` iff some sampled scale `r ≤ R`
/// has `B_r(x)` leaving the region where `E` is known, or `α(E, x, r) > ε`.
#[derive(Debug, Clone)]
pub struct BadTest {
    pub eps: f64,
    /// Sampled scales, ascending.
    scales: Vec<f64>,
    pub sampler: AlphaSampler,
}

impl BadTest {
    pub fn new(eps: f64, scales: &[f64], sampler: AlphaSampler) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::invalid("need at least one scale"));
        }
        if scales.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::invalid(format!("scales must be positive: {scales:?}")));
        }
        let mut scales = scales.to_vec();
        scales.sort_by(f64::total_cmp);
        scales.dedup();
        Ok(BadTest { eps, scales, sampler })
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Smallest sampled scale at which `x` is bad, up to `r_max`.
    pub fn bad_from(&self, e: &impl Membership, x: GroupElement, r_max: f64) -> Option<f64> {
        for &r in self.scales.iter().take_while(|&&r| r <= r_max) {
            match self.sampler.memberships(e, x, r) {
                Err(_) => return Some(r),
                Ok(inside) => {
                    if self.sampler.minimize(&inside).0 > self.eps {
                        return Some(r);
                    }
                }
            }
        }
        None
    }

    pub fn is_bad(&self, e: &impl Membership, x: GroupElement, big_r: f64) -> bool {
        self.bad_from(e, x, big_r).is_some()
    }
}

/// Voxel mask of `Bad_{ε,R}(E)` over `E`'s grid. The sampled scales are
/// `scales ∩ (0, R]` together with `R`.
pub fn bad_set(e: &GridSet, eps: f64, big_r: f64, scales: &[f64], sampler: AlphaSampler) -> Result<Vec<bool>> {
    let mut all: Vec<f64> = scales.iter().copied().filter(|&r| r <= big_r).collect();
    if all.is_empty() {
        return Err(Error::invalid(format!("no sampled scale in (0, {big_r}]")));
    }
    all.push(big_r);
    let test = BadTest::new(eps, &all, sampler)?;
    let g = e.geometry();
    Ok((0..g.len()).map(|idx| test.is_bad(e, g.center(idx), big_r)).collect())
}

/// One horizontal-line crossing of a voxel set: a point of the discrete
/// reduced boundary carrying perimeter `weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub voxel: usize,
    pub point: GroupElement,
    pub weight: f64,
}

/// Every P- and Q-line crossing of `E`, located at the midpoint of the jump
/// (on the true Q-curve for Q-lines). Weights sum to the perimeter.
pub fn crossings(e: &GridSet) -> Vec<Crossing> {
    let g = e.geometry();
    let [na, nb, nc] = g.res;
    let [da, db, dc] = g.cell();
    let (wp, wq) = g.line_weights();
    let mut out = Vec::new();
    for i in 0..na {
        let a_i = g.axis_center(0, i);
        for j in 0..nb {
            let b_j = g.axis_center(1, j);
            let shift = g.q_shift(i, j);
            let next_shift = (j + 1 < nb).then(|| g.q_shift(i, j + 1));
            for k in 0..nc {
                let idx = g.index(i, j, k);
                let inside = e.contains(idx);
                if i + 1 < na && e.contains(g.index(i + 1, j, k)) != inside {
                    let point = GroupElement::new(a_i + 0.5 * da, b_j, g.axis_center(2, k));
                    out.push(Crossing { voxel: idx, point, weight: wp });
                }
                if let Some(s2) = next_shift {
                    let k2 = k as i64 + s2 - shift;
                    if k2 >= 0 && (k2 as usize) < nc && e.contains(g.index(i, j + 1, k2 as usize)) != inside {
                        let b_star = b_j + 0.5 * db;
                        let c0 = g.lo[2] + ((k as i64 - shift) as f64 + 0.5) * dc;
                        let point = GroupElement::new(a_i, b_star, c0 + a_i * b_star);
                        out.push(Crossing { voxel: idx, point, weight: wq });
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BadMassReport {
    pub eps: f64,
    pub radii: Vec<f64>,
    /// `Mass(λ^Bad_{ε,R})` per radius.
    pub bad_mass: Vec<f64>,
    /// `Mass(λ_Σ)`.
    pub total_mass: f64,
    pub scales: Vec<f64>,
    pub crossings: usize,
    pub ball_samples: usize,
}

impl BadMassReport {
    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        self.bad_mass.windows(2).all(|w| w[1] <= w[0] + tol)
    }
}

/// `Mass(λ^Bad_{ε,R}) = Σ_k w_k Per(E_k)(Bad_{ε,R}(E_k))` for each `R`.
///
/// Perimeter is carried by the line crossings, so the Bad test runs at the
/// crossing points only. Sampled scales are `scales ∪ radii`; a crossing is
/// bad for `R` when it is bad at some sampled scale `≤ R`, which makes the
/// output nonincreasing as `R` decreases.
pub fn bad_mass_decay(
    sigma: &SetMeasure<GridSet>,
    eps: f64,
    radii: &[f64],
    scales: &[f64],
    sampler: AlphaSampler,
) -> Result<BadMassReport> {
    if radii.is_empty() {
        return Err(Error::invalid("need at least one radius"));
    }
    let mut all = scales.to_vec();
    all.extend_from_slice(radii);
    let test = BadTest::new(eps, &all, sampler)?;
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let mut bad_mass = vec![0.0; radii.len()];
    let mut total_mass = 0.0;
    let mut count = 0;
    for (e, w) in sigma.atoms() {
        if *w == 0.0 {
            continue;
        }
        for cr in crossings(e) {
            count += 1;
            total_mass += w * cr.weight;
            if let Some(r) = test.bad_from(e, cr.point, r_max) {
                for (m, &big_r) in bad_mass.iter_mut().zip(radii) {
                    if r <= big_r {
                        *m += w * cr.weight;
                    }
                }
            }
        }
    }
    Ok(BadMassReport {
        eps,
        radii: radii.to_vec(),
        bad_mass,
        total_mass,
        scales: test.scales().to_vec(),
        crossings: count,
        ball_samples: test.sampler.len(),
    })
}
