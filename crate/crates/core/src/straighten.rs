//! Good and bad cuts near a point, and straightening the good ones into
//! half-spaces.
//!
//! A cut `E` is good at `(x, r)` when the closed ball `B̄_r(x)` holds a point
//! `x'` of `Good_{ε,R₀}(E)`. Good points lie on `∂E` (elsewhere `α = ½`), so
//! candidates are found by walking from sample points of the ball along P and
//! Q until membership changes and bisecting. A good `E` is replaced by the
//! half-space minimizing `α(E, x', 2r)`.

use serde::Serialize;

use crate::alpha::{Alpha, AlphaSampler};
use crate::error::{Error, Result};
use crate::grid::{HalfSpace, Membership, SetMeasure};
use crate::heisenberg::{koranyi_distance, koranyi_unit_ball_volume, GroupElement};
use crate::perimeter::BallPerimeter;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoodBadParams {
    pub delta: f64,
    pub eps: f64,
    pub r: f64,
    /// `R₀`; the Good test samples `α` at `R₀, R₀/2, …` (`dyadic_scales` of them).
    pub r0: f64,
    pub dyadic_scales: usize,
    /// Sample points of `B̄_r(x)` used as starting points of the boundary search.
    pub candidates: usize,
    /// Good points kept per cut before the search stops.
    pub max_good_points: usize,
}

impl GoodBadParams {
    /// `R₀ = 2r`, four dyadic scales, 24 candidates, up to 4 good points.
    pub fn new(delta: f64, eps: f64, r: f64) -> Self {
        GoodBadParams { delta, eps, r, r0: 2.0 * r, dyadic_scales: 4, candidates: 24, max_good_points: 4 }
    }

    fn validate(&self) -> Result<()> {
        let positive = [self.delta, self.eps, self.r, self.r0];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || self.dyadic_scales == 0 {
            return Err(Error::invalid(format!("good/bad parameters must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn scales(&self) -> Vec<f64> {
        (0..self.dyadic_scales).map(|j| self.r0 / (1u64 << j) as f64).collect()
    }
}

/// A good point `x'` of a cut with `α(E, x', 2r)` and its half-space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoodWitness {
    pub point: GroupElement,
    pub alpha_2r: Alpha,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoodBadDiagnostics {
    /// `Σ(𝒢)`.
    pub good_mass: f64,
    /// `Σ(𝒢)·δ/r`, the constant `c₀` needed for `Σ(𝒢) ≤ c₀ r δ⁻¹`.
    pub c0_measured: f64,
    /// `(1/μ(B_r(x))) Σ_{ℬ} w Per(E)(B_r(x))`, when perimeters were computed.
    pub bad_perimeter_ratio: Option<f64>,
    /// The bound checked against `bad_perimeter_ratio`: `max(ε, δ)`.
    pub bad_perimeter_bound: f64,
    /// Smallest `r·Per(γ(E))(B_r(x))/μ(B_{2r})` over the good cuts' half-spaces.
    pub half_space_ratio_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoodBad {
    pub good: Vec<usize>,
    pub bad: Vec<usize>,
    /// Per atom: its best good point, if any.
    pub witnesses: Vec<Option<GoodWitness>>,
    pub diagnostics: GoodBadDiagnostics,
}

fn walk(p: GroupElement, dir: usize, s: f64) -> GroupElement {
    match dir {
        0 => p * GroupElement::new(s, 0.0, 0.0),
        _ => p * GroupElement::new(0.0, s, 0.0),
    }
}

/// Boundary points of `E` in `B̄_r(x)` reached from `start` along P or Q.
fn boundary_points(e: &impl Membership, x: GroupElement, r: f64, start: GroupElement, out: &mut Vec<GroupElement>) {
    const STEPS: usize = 16;
    const BISECTIONS: usize = 40;
    for dir in 0..2 {
        let mut prev_s = -r;
        let Some(mut prev) = e.member(walk(start, dir, prev_s)) else { continue };
        for step in 1..=STEPS {
            let s = -r + 2.0 * r * step as f64 / STEPS as f64;
            let Some(cur) = e.member(walk(start, dir, s)) else { break };
            if cur != prev {
                let (mut lo, mut hi) = (prev_s, s);
                for _ in 0..BISECTIONS {
                    let mid = 0.5 * (lo + hi);
                    if e.member(walk(start, dir, mid)) == Some(prev) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let q = walk(start, dir, 0.5 * (lo + hi));
                if koranyi_distance(q, x) <= r {
                    out.push(q);
                }
            }
            prev = cur;
            prev_s = s;
        }
    }
}

/// Whether `x'` is in `Good_{ε,R₀}(E)` at the sampled scales.
fn is_good(e: &impl Membership, xp: GroupElement, params: &GoodBadParams, sampler: &AlphaSampler) -> bool {
    params.scales().into_iter().all(|rho| match sampler.memberships(e, xp, rho) {
        Ok(inside) => sampler.minimize(&inside).0 <= params.eps,
        Err(_) => false,
    })
}

/// Best good point of one cut, by `α(E, x', 2r)`.
pub fn good_witness(
    e: &impl Membership,
    x: GroupElement,
    params: &GoodBadParams,
    sampler: &AlphaSampler,
) -> Result<Option<GoodWitness>> {
    params.validate()?;
    let r = params.r;
    let mut best: Option<GoodWitness> = None;
    let mut found = 0;
    let starts = std::iter::once(x).chain(sampler.points(x, r).take(params.candidates));
    let mut boundary = Vec::new();
    for start in starts {
        boundary.clear();
        boundary_points(e, x, r, start, &mut boundary);
        for &xp in &boundary {
            if !is_good(e, xp, params, sampler) {
                continue;
            }
            let Ok(a) = sampler.alpha(e, xp, 2.0 * r) else { continue };
            found += 1;
            if best.is_none_or(|b| a.value < b.alpha_2r.value) {
                best = Some(GoodWitness { point: xp, alpha_2r: a });
            }
        }
        if found >= params.max_good_points {
            break;
        }
    }
    Ok(best)
}

/// Splits the atoms of `Σ` into good (`𝒢`) and bad (`ℬ`) cuts at `(x, r)`.
///
/// When `with_perimeters` is set, the diagnostics include the bad cuts'
/// perimeter in `B_r(x)` and the half-space perimeter ratio of the good cuts'
/// straightened half-spaces.
pub fn good_bad_cuts<S: Membership + BallPerimeter>(
    sigma: &SetMeasure<S>,
    x: GroupElement,
    params: &GoodBadParams,
    sampler: &AlphaSampler,
    with_perimeters: bool,
) -> Result<GoodBad> {
    params.validate()?;
    let mut good = Vec::new();
    let mut bad = Vec::new();
    let mut witnesses = Vec::with_capacity(sigma.len());
    for (k, (e, _)) in sigma.atoms().iter().enumerate() {
        let w = good_witness(e, x, params, sampler)?;
        if w.is_some() {
            good.push(k);
        } else {
            bad.push(k);
        }
        witnesses.push(w);
    }
    let r = params.r;
    let good_mass: f64 = good.iter().map(|&k| sigma.atoms()[k].1).sum();
    let mu_r = koranyi_unit_ball_volume() * r.powi(4);
    let mut bad_perimeter_ratio = None;
    let mut half_space_ratio_min = None;
    if with_perimeters {
        let mut bad_per = 0.0;
        for &k in &bad {
            let (e, w) = &sigma.atoms()[k];
            if *w != 0.0 {
                bad_per += w * e.perimeter_in_ball(x, r)?;
            }
        }
        bad_perimeter_ratio = Some(bad_per / mu_r);
        let mu_2r = 16.0 * mu_r;
        for wit in witnesses.iter().flatten() {
            let c = r * wit.alpha_2r.half_space.perimeter_in_ball(x, r)? / mu_2r;
            half_space_ratio_min = Some(half_space_ratio_min.map_or(c, |m: f64| m.min(c)));
        }
    }
    Ok(GoodBad {
        good,
        bad,
        witnesses,
        diagnostics: GoodBadDiagnostics {
            good_mass,
            c0_measured: good_mass * params.delta / r,
            bad_perimeter_ratio,
            bad_perimeter_bound: params.eps.max(params.delta),
            half_space_ratio_min,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StraightenedAtom {
    pub atom: usize,
    pub weight: f64,
    pub witness: GoodWitness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Straightened {
    /// `Σ̂ = γ_*(Σ restricted to 𝒢)`.
    pub measure: SetMeasure<HalfSpace>,
    pub atoms: Vec<StraightenedAtom>,
    /// Good cuts with no point where `α(E, x', 2r) ≤ 2ε`; dropped with the bad ones.
    pub demoted: Vec<usize>,
    pub split: GoodBad,
}

/// Replaces each good cut by its half-space `γ(E)` and drops the rest.
pub fn straighten<S: Membership + BallPerimeter>(
    sigma: &SetMeasure<S>,
    x: GroupElement,
    params: &GoodBadParams,
    sampler: &AlphaSampler,
    with_perimeters: bool,
) -> Result<Straightened> {
    let split = good_bad_cuts(sigma, x, params, sampler, with_perimeters)?;
    let mut measure = SetMeasure::new();
    let mut atoms = Vec::new();
    let mut demoted = Vec::new();
    for &k in &split.good {
        let wit = split.witnesses[k].expect("good atoms carry a witness");
        if wit.alpha_2r.value > 2.0 * params.eps {
            demoted.push(k);
            continue;
        }
        let w = sigma.atoms()[k].1;
        measure.push(wit.alpha_2r.half_space, w)?;
        atoms.push(StraightenedAtom { atom: k, weight: w, witness: wit });
    }
    Ok(Straightened { measure, atoms, demoted, split })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levels::{LevelSet, TestFunction};

    #[test]
    fn half_spaces_are_fixed() {
        let x = GroupElement::new(0.1, 0.0, 0.2);
        let sigma = SetMeasure::from_atoms([
            (HalfSpace::new(GroupElement::new(0.12, 0.02, 0.0), 0.4), 1.0),
            (HalfSpace::new(GroupElement::new(0.05, -0.03, 0.0), 2.0), 0.5),
        ])
        .unwrap();
        let sampler = AlphaSampler::new(256);
        let params = GoodBadParams::new(0.1, 0.1, 0.1);
        let s = straighten(&sigma, x, &params, &sampler, false).unwrap();
        assert_eq!(s.split.good, vec![0, 1]);
        for (atom, (h, w)) in s.atoms.iter().zip(sigma.atoms()) {
            assert!(atom.witness.alpha_2r.half_space.angle_to(h) < 0.05);
            assert_eq!(atom.weight, *w);
            assert!(h.contains(atom.witness.point) || atom.witness.alpha_2r.value == 0.0);
        }
        assert!(s.measure.total_weight() <= sigma.total_weight());
    }

    #[test]
    fn far_cut_is_bad() {
        let x = GroupElement::IDENTITY;
        let sigma = SetMeasure::from_atoms([(HalfSpace::new(GroupElement::new(0.5, 0.0, 0.0), 0.0), 1.0)]).unwrap();
        let split =
            good_bad_cuts(&sigma, x, &GoodBadParams::new(0.1, 0.1, 0.1), &AlphaSampler::new(64), false).unwrap();
        assert_eq!(split.bad, vec![0]);
        assert_eq!(split.diagnostics.good_mass, 0.0);
    }

    #[test]
    fn smooth_cut_normal() {
        let x = GroupElement::new(0.1, 0.2, -0.1);
        let f = TestFunction::Parabolic;
        let sigma = SetMeasure::from_atoms([(LevelSet::new(f, f.eval(x)), 1.0)]).unwrap();
        let s = straighten(&sigma, x, &GoodBadParams::new(0.1, 0.1, 0.05), &AlphaSampler::new(512), false).unwrap();
        let [pf, qf] = f.horizontal_gradient(x);
        let expected = HalfSpace::new(x, qf.atan2(pf));
        assert!(s.atoms[0].witness.alpha_2r.half_space.angle_to(&expected) < 0.1);
    }
}
